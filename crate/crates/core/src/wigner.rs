//! Time-dependent Wigner matrices and their principal submatrices.
//!
//! An [`EnsembleSample`] holds one realization of every entry process needed by
//! a run. Entry `(i, j)` is drawn from a generator keyed by `(seed, i, j)`, so
//! two samples built from the same seed agree on every coordinate they share,
//! whatever index sets were requested.

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::entry_process::{Beta, EntryPath, EntryProcessSpec, PathSampler, TimeGrid};
use crate::error::{Error, Result};
use crate::seed::entry_rng;

/// Default cap on stored path values (pairs x grid nodes).
pub const DEFAULT_CAPACITY: usize = 1 << 28;

/// A finite set `B` of positive integers, stored sorted.
#[derive(Clone, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(try_from = "Vec<usize>", into = "Vec<usize>")]
pub struct IndexSet(Vec<usize>);

impl IndexSet {
    /// Accepts any order; rejects duplicates, zero and empty input.
    pub fn new(mut elements: Vec<usize>) -> Result<Self> {
        if elements.is_empty() {
            return Err(Error::Domain("index set is empty".into()));
        }
        elements.sort_unstable();
        if elements[0] == 0 {
            return Err(Error::Domain("index sets are 1-based; found 0".into()));
        }
        if let Some(w) = elements.windows(2).find(|w| w[0] == w[1]) {
            return Err(Error::Domain(format!("index {} appears twice", w[0])));
        }
        Ok(IndexSet(elements))
    }

    /// `{1, ..., n}`.
    pub fn prefix(n: usize) -> Result<Self> {
        Self::range(1, n)
    }

    /// `{first, ..., last}`.
    pub fn range(first: usize, last: usize) -> Result<Self> {
        if first == 0 || last < first {
            return Err(Error::Domain(format!("invalid range {first}..={last}")));
        }
        Ok(IndexSet((first..=last).collect()))
    }

    pub fn elements(&self) -> &[usize] {
        &self.0
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    pub fn max(&self) -> usize {
        *self.0.last().expect("index sets are nonempty")
    }

    pub fn intersection_len(&self, other: &IndexSet) -> usize {
        let (mut i, mut j, mut n) = (0, 0, 0);
        let (a, b) = (&self.0, &other.0);
        while i < a.len() && j < b.len() {
            match a[i].cmp(&b[j]) {
                std::cmp::Ordering::Less => i += 1,
                std::cmp::Ordering::Greater => j += 1,
                std::cmp::Ordering::Equal => {
                    n += 1;
                    i += 1;
                    j += 1;
                }
            }
        }
        n
    }

    /// Sorted union of several sets.
    pub fn union<'a>(sets: impl IntoIterator<Item = &'a IndexSet>) -> Option<IndexSet> {
        let mut all: Vec<usize> = sets.into_iter().flat_map(|s| s.0.iter().copied()).collect();
        all.sort_unstable();
        all.dedup();
        (!all.is_empty()).then_some(IndexSet(all))
    }
}

impl TryFrom<Vec<usize>> for IndexSet {
    type Error = String;
    fn try_from(v: Vec<usize>) -> std::result::Result<Self, String> {
        IndexSet::new(v).map_err(|e| e.to_string())
    }
}

impl From<IndexSet> for Vec<usize> {
    fn from(s: IndexSet) -> Vec<usize> {
        s.0
    }
}

/// `overlap_fraction`: `(|B_p|/L, |B_q|/L, |B_p ∩ B_q|/L)`.
pub fn overlap_fraction(bp: &IndexSet, bq: &IndexSet, scale: f64) -> Result<(f64, f64, f64)> {
    if !(scale > 0.0 && scale.is_finite()) {
        return Err(Error::Domain(format!("scale L must be positive, got {scale}")));
    }
    Ok((
        bp.len() as f64 / scale,
        bq.len() as f64 / scale,
        bp.intersection_len(bq) as f64 / scale,
    ))
}

#[derive(Clone, Debug, PartialEq)]
enum EntryStore {
    Real(Vec<f64>),
    Complex(Vec<Complex64>),
}

/// Draws [`EnsembleSample`]s for a fixed entry law, grid and set of row indices.
#[derive(Clone, Debug)]
pub struct EnsembleSampler {
    sampler: PathSampler,
    indices: Vec<usize>,
}

impl EnsembleSampler {
    pub fn new(spec: &EntryProcessSpec, grid: &TimeGrid, indices: &IndexSet, cap: usize) -> Result<Self> {
        let n = indices.len();
        let requested = n
            .checked_mul(n + 1)
            .map(|p| p / 2)
            .and_then(|p| p.checked_mul(grid.len()))
            .unwrap_or(usize::MAX);
        if requested > cap {
            return Err(Error::Capacity { requested, cap });
        }
        Ok(EnsembleSampler {
            sampler: PathSampler::new(spec, grid)?,
            indices: indices.elements().to_vec(),
        })
    }

    pub fn beta(&self) -> Beta {
        self.sampler.spec().beta
    }

    pub fn sample(&self, seed: u64) -> EnsembleSample {
        let n = self.indices.len();
        let g = self.sampler.grid().len();
        let pairs = n * (n + 1) / 2;
        let entries = match self.beta() {
            Beta::Real => {
                let mut store = vec![0.0; pairs * g];
                let mut chunks = store.chunks_exact_mut(g);
                for a in 0..n {
                    for b in a..n {
                        let (i, j) = (self.indices[a], self.indices[b]);
                        let mut rng = entry_rng(seed, i as u64, j as u64);
                        let out = chunks.next().expect("pair count");
                        self.sampler.fill_real(&mut rng, a == b, out);
                    }
                }
                EntryStore::Real(store)
            }
            Beta::Complex => {
                let mut store = vec![Complex64::new(0.0, 0.0); pairs * g];
                let mut chunks = store.chunks_exact_mut(g);
                for a in 0..n {
                    for b in a..n {
                        let (i, j) = (self.indices[a], self.indices[b]);
                        let mut rng = entry_rng(seed, i as u64, j as u64);
                        let out = chunks.next().expect("pair count");
                        self.sampler.fill_complex(&mut rng, a == b, out);
                    }
                }
                EntryStore::Complex(store)
            }
        };
        EnsembleSample {
            beta: self.beta(),
            grid: self.sampler.grid().clone(),
            indices: self.indices.clone(),
            entries,
        }
    }
}

/// One realization of the entry processes for the rows in `indices`.
#[derive(Clone, Debug, PartialEq)]
pub struct EnsembleSample {
    beta: Beta,
    grid: TimeGrid,
    indices: Vec<usize>,
    entries: EntryStore,
}

impl EnsembleSample {
    pub fn beta(&self) -> Beta {
        self.beta
    }

    pub fn grid(&self) -> &TimeGrid {
        &self.grid
    }

    /// Largest row index present.
    pub fn ambient_dim(&self) -> usize {
        *self.indices.last().expect("nonempty")
    }

    pub fn indices(&self) -> &[usize] {
        &self.indices
    }

    fn position(&self, i: usize) -> Result<usize> {
        self.indices
            .binary_search(&i)
            .map_err(|_| Error::Domain(format!("row {i} is not part of this sample")))
    }

    fn offset(&self, a: usize, b: usize) -> usize {
        let n = self.indices.len();
        let (a, b) = if a <= b { (a, b) } else { (b, a) };
        (a * (2 * n - a + 1) / 2 + (b - a)) * self.grid.len()
    }

    /// `X(i, j | t_k)` with the symmetric / Hermitian completion.
    pub fn entry(&self, i: usize, j: usize, time_index: usize) -> Result<Complex64> {
        if time_index >= self.grid.len() {
            return Err(Error::Domain(format!("time index {time_index} out of range")));
        }
        let (a, b) = (self.position(i)?, self.position(j)?);
        let off = self.offset(a, b) + time_index;
        let v = match &self.entries {
            EntryStore::Real(v) => Complex64::new(v[off], 0.0),
            EntryStore::Complex(v) => v[off],
        };
        Ok(if a > b { v.conj() } else { v })
    }

    /// The stored path of entry `(i, j)`, `i <= j`.
    pub fn path(&self, i: usize, j: usize) -> Result<EntryPath> {
        let (a, b) = (self.position(i.min(j))?, self.position(i.max(j))?);
        let off = self.offset(a, b);
        let g = self.grid.len();
        Ok(match &self.entries {
            EntryStore::Real(v) => EntryPath::Real(v[off..off + g].to_vec()),
            EntryStore::Complex(v) => EntryPath::Complex(v[off..off + g].to_vec()),
        })
    }

    /// `submatrix`: `X_B(t_k)` with rows and columns in sorted order of `B`.
    pub fn submatrix(&self, set: &IndexSet, time_index: usize) -> Result<DenseMatrix> {
        let g = self.grid.len();
        if time_index >= g {
            return Err(Error::Domain(format!("time index {time_index} out of range")));
        }
        let pos: Vec<usize> = set
            .elements()
            .iter()
            .map(|&i| self.position(i))
            .collect::<Result<_>>()?;
        let n = pos.len();
        Ok(match &self.entries {
            EntryStore::Real(v) => {
                let mut data = vec![0.0; n * n];
                for r in 0..n {
                    for c in r..n {
                        let x = v[self.offset(pos[r], pos[c]) + time_index];
                        data[r * n + c] = x;
                        data[c * n + r] = x;
                    }
                }
                DenseMatrix {
                    n,
                    data: MatrixData::Real(data),
                }
            }
            EntryStore::Complex(v) => {
                let mut data = vec![Complex64::new(0.0, 0.0); n * n];
                for r in 0..n {
                    for c in r..n {
                        let x = v[self.offset(pos[r], pos[c]) + time_index];
                        data[r * n + c] = x;
                        data[c * n + r] = x.conj();
                    }
                }
                DenseMatrix {
                    n,
                    data: MatrixData::Complex(data),
                }
            }
        })
    }
}

/// `sample_ensemble`: entries for all `1 <= i <= j <= ambient_dim`.
pub fn sample_ensemble(
    ambient_dim: usize,
    spec: &EntryProcessSpec,
    grid: &TimeGrid,
    seed: u64,
) -> Result<EnsembleSample> {
    sample_ensemble_with_cap(ambient_dim, spec, grid, seed, DEFAULT_CAPACITY)
}

pub fn sample_ensemble_with_cap(
    ambient_dim: usize,
    spec: &EntryProcessSpec,
    grid: &TimeGrid,
    seed: u64,
    cap: usize,
) -> Result<EnsembleSample> {
    if ambient_dim == 0 {
        return Err(Error::Domain("ambient dimension must be at least 1".into()));
    }
    let rows = IndexSet::prefix(ambient_dim)?;
    Ok(EnsembleSampler::new(spec, grid, &rows, cap)?.sample(seed))
}

/// `submatrix` as a free function.
pub fn submatrix(sample: &EnsembleSample, set: &IndexSet, time_index: usize) -> Result<DenseMatrix> {
    sample.submatrix(set, time_index)
}

#[derive(Clone, Debug, PartialEq)]
pub enum MatrixData {
    Real(Vec<f64>),
    Complex(Vec<Complex64>),
}

/// Square symmetric (real) or Hermitian (complex) matrix, row-major.
#[derive(Clone, Debug, PartialEq)]
pub struct DenseMatrix {
    n: usize,
    data: MatrixData,
}

impl DenseMatrix {
    pub fn real(n: usize, data: Vec<f64>) -> Result<Self> {
        if data.len() != n * n {
            return Err(Error::Domain(format!("expected {} entries, got {}", n * n, data.len())));
        }
        Ok(DenseMatrix {
            n,
            data: MatrixData::Real(data),
        })
    }

    pub fn complex(n: usize, data: Vec<Complex64>) -> Result<Self> {
        if data.len() != n * n {
            return Err(Error::Domain(format!("expected {} entries, got {}", n * n, data.len())));
        }
        Ok(DenseMatrix {
            n,
            data: MatrixData::Complex(data),
        })
    }

    pub fn diagonal(values: &[f64]) -> Self {
        let n = values.len();
        let mut data = vec![0.0; n * n];
        for (i, v) in values.iter().enumerate() {
            data[i * n + i] = *v;
        }
        DenseMatrix {
            n,
            data: MatrixData::Real(data),
        }
    }

    pub fn order(&self) -> usize {
        self.n
    }

    pub fn data(&self) -> &MatrixData {
        &self.data
    }

    pub fn get(&self, r: usize, c: usize) -> Complex64 {
        match &self.data {
            MatrixData::Real(v) => Complex64::new(v[r * self.n + c], 0.0),
            MatrixData::Complex(v) => v[r * self.n + c],
        }
    }

    /// `max |M - M^H|` over entries.
    pub fn hermitian_defect(&self) -> f64 {
        let mut worst = 0.0f64;
        for r in 0..self.n {
            for c in 0..self.n {
                worst = worst.max((self.get(r, c) - self.get(c, r).conj()).norm());
            }
        }
        worst
    }

    pub fn trace(&self) -> f64 {
        (0..self.n).map(|i| self.get(i, i).re).sum()
    }

    pub fn frobenius_sq(&self) -> f64 {
        match &self.data {
            MatrixData::Real(v) => v.iter().map(|x| x * x).sum(),
            MatrixData::Complex(v) => v.iter().map(|z| z.norm_sqr()).sum(),
        }
    }

    pub fn is_finite(&self) -> bool {
        match &self.data {
            MatrixData::Real(v) => v.iter().all(|x| x.is_finite()),
            MatrixData::Complex(v) => v.iter().all(|z| z.re.is_finite() && z.im.is_finite()),
        }
    }

    /// The principal submatrix on the given 0-based rows, in the given order.
    pub fn select(&self, rows: &[usize]) -> DenseMatrix {
        let m = rows.len();
        match &self.data {
            MatrixData::Real(v) => DenseMatrix {
                n: m,
                data: MatrixData::Real(
                    rows.iter()
                        .flat_map(|&r| rows.iter().map(move |&c| v[r * self.n + c]))
                        .collect(),
                ),
            },
            MatrixData::Complex(v) => DenseMatrix {
                n: m,
                data: MatrixData::Complex(
                    rows.iter()
                        .flat_map(|&r| rows.iter().map(move |&c| v[r * self.n + c]))
                        .collect(),
                ),
            },
        }
    }
}
