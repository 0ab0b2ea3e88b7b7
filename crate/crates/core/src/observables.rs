//! Per-sample spectral statistics.

use std::io::Write;

use faer::complex_native::c64;
use faer::{Mat, Side};
use serde::{Deserialize, Serialize};

use crate::entry_process::Beta;
use crate::error::{Error, Result};
use crate::wigner::{DenseMatrix, MatrixData};

/// Sorted eigenvalues of a symmetric or Hermitian matrix.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Spectrum(Vec<f64>);

impl Spectrum {
    /// Sorts the input; rejects non-finite values.
    pub fn new(mut values: Vec<f64>) -> Result<Self> {
        if let Some(v) = values.iter().find(|v| !v.is_finite()) {
            return Err(Error::Numerical(format!("non-finite eigenvalue {v}")));
        }
        values.sort_by(f64::total_cmp);
        Ok(Spectrum(values))
    }

    pub fn values(&self) -> &[f64] {
        &self.0
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }
}

fn to_faer_real(n: usize, v: &[f64]) -> Mat<f64> {
    Mat::from_fn(n, n, |i, j| v[i * n + j])
}

fn to_faer_complex(n: usize, v: &[num_complex::Complex64]) -> Mat<c64> {
    Mat::from_fn(n, n, |i, j| {
        let z = v[i * n + j];
        c64::new(z.re, z.im)
    })
}

fn check_input(m: &DenseMatrix) -> Result<()> {
    if !m.is_finite() {
        return Err(Error::Numerical("matrix has non-finite entries".into()));
    }
    let scale = m.frobenius_sq().sqrt().max(f64::MIN_POSITIVE);
    let defect = m.hermitian_defect();
    if defect > 1e-12 * scale {
        return Err(Error::Domain(format!(
            "matrix is not symmetric/Hermitian (defect {defect:e}, norm {scale:e})"
        )));
    }
    Ok(())
}

/// `eigenvalues`: sorted real spectrum.
pub fn eigenvalues(m: &DenseMatrix) -> Result<Spectrum> {
    check_input(m)?;
    let n = m.order();
    let values = match m.data() {
        MatrixData::Real(v) => to_faer_real(n, v).selfadjoint_eigenvalues(Side::Lower),
        MatrixData::Complex(v) => to_faer_complex(n, v).selfadjoint_eigenvalues(Side::Lower),
    };
    Spectrum::new(values).map_err(|e| {
        Error::Numerical(format!(
            "eigensolver failed on {n}x{n} matrix with Frobenius norm {:e}: {e}",
            m.frobenius_sq().sqrt()
        ))
    })
}

/// Eigenvalues with unit eigenvectors; `vectors[s]` pairs with `values()[s]`.
#[derive(Clone, Debug)]
pub struct EigenPairs {
    pub spectrum: Spectrum,
    pub vectors: Vec<Vec<num_complex::Complex64>>,
}

impl EigenPairs {
    /// `max_s ||M v_s - λ_s v_s||`.
    pub fn max_residual(&self, m: &DenseMatrix) -> f64 {
        let n = m.order();
        let mut worst = 0.0f64;
        for (lambda, v) in self.spectrum.values().iter().zip(&self.vectors) {
            let mut r2 = 0.0;
            for i in 0..n {
                let mut acc = -v[i] * *lambda;
                for j in 0..n {
                    acc += m.get(i, j) * v[j];
                }
                r2 += acc.norm_sqr();
            }
            worst = worst.max(r2.sqrt());
        }
        worst
    }
}

pub fn eigenpairs(m: &DenseMatrix) -> Result<EigenPairs> {
    check_input(m)?;
    let n = m.order();
    let mut pairs: Vec<(f64, Vec<num_complex::Complex64>)> = match m.data() {
        MatrixData::Real(v) => {
            let e = to_faer_real(n, v).selfadjoint_eigendecomposition(Side::Lower);
            (0..n)
                .map(|s| {
                    let vec = (0..n)
                        .map(|i| num_complex::Complex64::new(e.u().read(i, s), 0.0))
                        .collect();
                    (e.s().column_vector().read(s), vec)
                })
                .collect()
        }
        MatrixData::Complex(v) => {
            let e = to_faer_complex(n, v).selfadjoint_eigendecomposition(Side::Lower);
            (0..n)
                .map(|s| {
                    let vec = (0..n)
                        .map(|i| {
                            let z = e.u().read(i, s);
                            num_complex::Complex64::new(z.re, z.im)
                        })
                        .collect();
                    (e.s().column_vector().read(s).re, vec)
                })
                .collect()
        }
    };
    pairs.sort_by(|a, b| a.0.total_cmp(&b.0));
    let (values, vectors): (Vec<f64>, Vec<_>) = pairs.into_iter().unzip();
    Ok(EigenPairs {
        spectrum: Spectrum::new(values)?,
        vectors,
    })
}

/// `Σ_s λ_s^k`.
pub fn trace_power(spec: &Spectrum, k: u32) -> f64 {
    spec.values().iter().map(|l| l.powi(k as i32)).sum()
}

/// `T_k(x)`: three-term recurrence on `[-1, 1]`, hyperbolic form outside.
pub fn chebyshev_eval(k: u32, x: f64) -> f64 {
    if x.abs() <= 1.0 {
        let (mut prev, mut cur) = (1.0, x);
        if k == 0 {
            return 1.0;
        }
        for _ in 1..k {
            let next = 2.0 * x * cur - prev;
            prev = cur;
            cur = next;
        }
        cur
    } else {
        let magnitude = (k as f64 * x.abs().acosh()).cosh();
        if x < 0.0 && k % 2 == 1 {
            -magnitude
        } else {
            magnitude
        }
    }
}

/// `Σ_s T_k(λ_s / (2√(bL)))`.
pub fn chebyshev_trace(spec: &Spectrum, k: u32, b: f64, scale: f64) -> Result<f64> {
    if k == 0 {
        return Err(Error::Domain("Chebyshev degree must be at least 1".into()));
    }
    if !(b > 0.0 && scale > 0.0) {
        return Err(Error::Domain(format!("need b > 0 and L > 0, got b={b}, L={scale}")));
    }
    let a = 2.0 * (b * scale).sqrt();
    Ok(spec.values().iter().map(|l| chebyshev_eval(k, l / a)).sum())
}

/// `√(βπ/2)`.
pub fn height_prefactor(beta: Beta) -> f64 {
    (beta.as_f64() * std::f64::consts::PI / 2.0).sqrt()
}

/// `√(βπ/2)·#{λ ≥ x}`.
pub fn height_function(spec: &Spectrum, x: f64, beta: Beta) -> f64 {
    let below = spec.values().partition_point(|&l| l < x);
    height_prefactor(beta) * (spec.len() - below) as f64
}

/// The height function sampled on a grid.
#[derive(Clone, Debug, PartialEq)]
pub struct HeightSample {
    pub x_grid: Vec<f64>,
    pub values: Vec<f64>,
    pub prefactor: f64,
}

pub fn height_profile(spec: &Spectrum, x_grid: &[f64], beta: Beta) -> HeightSample {
    HeightSample {
        x_grid: x_grid.to_vec(),
        values: x_grid.iter().map(|&x| height_function(spec, x, beta)).collect(),
        prefactor: height_prefactor(beta),
    }
}

/// Quadrature settings for [`height_moment_empirical`].
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct HeightWindow {
    pub x_max: f64,
    pub n_nodes: usize,
}

impl HeightWindow {
    /// `[-2√y - 1, 2√y + 1]` with 4096 nodes.
    pub fn for_level(y: f64) -> Self {
        HeightWindow {
            x_max: 2.0 * y.sqrt() + 1.0,
            n_nodes: 4096,
        }
    }

    pub fn nodes(&self) -> Vec<f64> {
        let n = self.n_nodes;
        (0..n)
            .map(|i| -self.x_max + 2.0 * self.x_max * i as f64 / (n - 1) as f64)
            .collect()
    }
}

/// Per-sample moments `∫ x^k (H - mean H) dx` plus truncation diagnostics.
#[derive(Clone, Debug, PartialEq)]
pub struct HeightMoments {
    pub values: Vec<f64>,
    /// Samples with a rescaled eigenvalue outside the window.
    pub truncated_samples: Vec<usize>,
}

/// `height_moment_empirical`: trapezoid rule in the rescaled variable, with
/// heights evaluated at `√L·x` and the ensemble mean as centering.
pub fn height_moment_empirical(
    spectra: &[Spectrum],
    k: u32,
    y: f64,
    scale: f64,
    window: HeightWindow,
    beta: Beta,
) -> Result<HeightMoments> {
    if spectra.is_empty() {
        return Err(Error::Domain("empty ensemble".into()));
    }
    if !(scale > 0.0) || !(y > 0.0) {
        return Err(Error::Domain(format!("need y > 0 and L > 0, got y={y}, L={scale}")));
    }
    if window.n_nodes < 2 {
        return Err(Error::Domain("at least two quadrature nodes are required".into()));
    }
    let required = 2.0 * y.sqrt() + 1.0;
    if window.x_max < required {
        return Err(Error::Domain(format!(
            "window half-width {} is below 2√y + 1 = {required}",
            window.x_max
        )));
    }
    let nodes = window.nodes();
    let root = scale.sqrt();
    let h = nodes[1] - nodes[0];
    let weights: Vec<f64> = nodes
        .iter()
        .enumerate()
        .map(|(i, x)| {
            let w = if i == 0 || i + 1 == nodes.len() { 0.5 * h } else { h };
            w * x.powi(k as i32)
        })
        .collect();
    let heights: Vec<Vec<f64>> = spectra
        .iter()
        .map(|s| nodes.iter().map(|&x| height_function(s, root * x, beta)).collect())
        .collect();
    let n = spectra.len() as f64;
    let mean: Vec<f64> = (0..nodes.len())
        .map(|i| heights.iter().map(|h| h[i]).sum::<f64>() / n)
        .collect();
    let values = heights
        .iter()
        .map(|hs| {
            hs.iter()
                .zip(&mean)
                .zip(&weights)
                .map(|((h, m), w)| w * (h - m))
                .sum()
        })
        .collect();
    let truncated_samples: Vec<usize> = spectra
        .iter()
        .enumerate()
        .filter(|(_, s)| s.values().iter().any(|l| (l / root).abs() >= window.x_max))
        .map(|(i, _)| i)
        .collect();
    if !truncated_samples.is_empty() {
        log::warn!(
            "{} of {} spectra extend beyond the height window ±{}",
            truncated_samples.len(),
            spectra.len(),
            window.x_max
        );
    }
    Ok(HeightMoments {
        values,
        truncated_samples,
    })
}

/// `L^{-(k+1)/2}·√(βπ/2)/(k+1)·(tr X^{k+1} - mean_trace)`.
pub fn height_moment_via_traces(spec: &Spectrum, mean_trace: f64, k: u32, scale: f64, beta: Beta) -> f64 {
    let kk = k + 1;
    scale.powf(-(kk as f64) / 2.0) * height_prefactor(beta) / kk as f64 * (trace_power(spec, kk) - mean_trace)
}

/// Natural size of a height moment: the same normalization applied to
/// `Σ|λ|^{k+1}` instead of the centered trace.
pub fn height_moment_scale(spec: &Spectrum, k: u32, scale: f64, beta: Beta) -> f64 {
    let kk = k + 1;
    let sum: f64 = spec.values().iter().map(|l| l.abs().powi(kk as i32)).sum();
    scale.powf(-(kk as f64) / 2.0) * height_prefactor(beta) / kk as f64 * sum
}

/// The statistic attached to one observable coordinate.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum Statistic {
    TracePower { k: u32 },
    Chebyshev { k: u32 },
}

impl Statistic {
    pub fn degree(&self) -> u32 {
        match *self {
            Statistic::TracePower { k } | Statistic::Chebyshev { k } => k,
        }
    }

    pub fn label(&self) -> String {
        match self {
            Statistic::TracePower { k } => format!("tr^{k}"),
            Statistic::Chebyshev { k } => format!("T_{k}"),
        }
    }

    /// The normalized value entering the covariance: `L^{-k/2} tr X^k` for
    /// trace powers, the rescaled Chebyshev trace otherwise. `set_size` is `|B|`.
    pub fn evaluate(&self, spec: &Spectrum, set_size: usize, scale: f64) -> Result<f64> {
        match *self {
            Statistic::TracePower { k } => Ok(scale.powf(-(k as f64) / 2.0) * trace_power(spec, k)),
            Statistic::Chebyshev { k } => chebyshev_trace(spec, k, set_size as f64 / scale, scale),
        }
    }
}

/// One coordinate of the observed random vector.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ObservableSpec {
    /// Name of an index set in the experiment.
    pub set: String,
    pub time: f64,
    pub statistic: Statistic,
}

/// Writes `sample_id, λ_1, ..., λ_n` rows.
pub fn write_spectra_csv<W: Write>(mut out: W, spectra: &[(usize, Spectrum)]) -> std::io::Result<()> {
    let width = spectra.iter().map(|(_, s)| s.len()).max().unwrap_or(0);
    write!(out, "sample_id")?;
    for i in 1..=width {
        write!(out, ",lambda_{i}")?;
    }
    writeln!(out)?;
    for (id, s) in spectra {
        write!(out, "{id}")?;
        for v in s.values() {
            write!(out, ",{v:.17e}")?;
        }
        writeln!(out)?;
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use num_complex::Complex64;
    use rand::{Rng, SeedableRng};
    use rand_xoshiro::Xoshiro256PlusPlus;

    fn random_symmetric(n: usize, seed: u64) -> DenseMatrix {
        let mut rng = Xoshiro256PlusPlus::seed_from_u64(seed);
        let mut v = vec![0.0; n * n];
        for i in 0..n {
            for j in i..n {
                let x: f64 = rng.gen_range(-1.0..1.0);
                v[i * n + j] = x;
                v[j * n + i] = x;
            }
        }
        DenseMatrix::real(n, v).unwrap()
    }

    fn random_hermitian(n: usize, seed: u64) -> DenseMatrix {
        let mut rng = Xoshiro256PlusPlus::seed_from_u64(seed);
        let mut v = vec![Complex64::new(0.0, 0.0); n * n];
        for i in 0..n {
            v[i * n + i] = Complex64::new(rng.gen_range(-1.0..1.0), 0.0);
            for j in i + 1..n {
                let z = Complex64::new(rng.gen_range(-1.0..1.0), rng.gen_range(-1.0..1.0));
                v[i * n + j] = z;
                v[j * n + i] = z.conj();
            }
        }
        DenseMatrix::complex(n, v).unwrap()
    }

    fn cube_trace(m: &DenseMatrix) -> f64 {
        let n = m.order();
        let mut t = Complex64::new(0.0, 0.0);
        for i in 0..n {
            for j in 0..n {
                for l in 0..n {
                    t += m.get(i, j) * m.get(j, l) * m.get(l, i);
                }
            }
        }
        t.re
    }

    #[test]
    fn eigenvalue_examples() {
        let d = DenseMatrix::diagonal(&[3.0, -1.0, 2.0]);
        assert_eq!(eigenvalues(&d).unwrap().values(), &[-1.0, 2.0, 3.0]);
        let swap = DenseMatrix::real(2, vec![0.0, 1.0, 1.0, 0.0]).unwrap();
        let s = eigenvalues(&swap).unwrap();
        assert!((s.values()[0] + 1.0).abs() < 1e-14 && (s.values()[1] - 1.0).abs() < 1e-14);
    }

    #[test]
    fn trace_identities() {
        for (seed, m) in [(1, random_symmetric(5, 1)), (2, random_hermitian(5, 2))] {
            let s = eigenvalues(&m).unwrap();
            assert!((trace_power(&s, 1) - m.trace()).abs() < 1e-10, "seed {seed}");
            assert!((trace_power(&s, 2) - m.frobenius_sq()).abs() < 1e-10, "seed {seed}");
        }
        let m = random_symmetric(6, 3);
        let s = eigenvalues(&m).unwrap();
        let c = cube_trace(&m);
        assert!((trace_power(&s, 3) - c).abs() <= 1e-8 * c.abs().max(1.0));
    }

    #[test]
    fn eigenpair_residuals() {
        for m in [random_symmetric(12, 4), random_hermitian(12, 5)] {
            let p = eigenpairs(&m).unwrap();
            let norm = m.frobenius_sq().sqrt();
            assert!(p.max_residual(&m) <= 1e-8 * norm);
            assert_eq!(p.spectrum, eigenvalues(&m).unwrap());
        }
    }

    #[test]
    fn rejects_non_hermitian() {
        let m = DenseMatrix::real(2, vec![0.0, 1.0, 2.0, 0.0]).unwrap();
        assert!(eigenvalues(&m).is_err());
        let m = DenseMatrix::real(1, vec![f64::NAN]).unwrap();
        assert!(matches!(eigenvalues(&m), Err(Error::Numerical(_))));
    }

    #[test]
    fn trace_power_examples() {
        let s = Spectrum::new(vec![-1.0, 1.0]).unwrap();
        assert_eq!(trace_power(&s, 2), 2.0);
        let s = Spectrum::new(vec![-1.0, 2.0, 3.0]).unwrap();
        assert_eq!(trace_power(&s, 1), 4.0);
    }

    #[test]
    fn chebyshev_examples() {
        let s = Spectrum::new(vec![-3.0, 0.5, 7.0]).unwrap();
        let (b, l) = (0.8, 10.0);
        let a = 2.0 * (b * l as f64).sqrt();
        let t1 = chebyshev_trace(&s, 1, b, l).unwrap();
        assert!((t1 - trace_power(&s, 1) / a).abs() <= 1e-14 * t1.abs().max(1.0));
        let zero = Spectrum::new(vec![0.0]).unwrap();
        assert_eq!(chebyshev_trace(&zero, 2, 3.0, 5.0).unwrap(), -1.0);
        for i in 0..=200 {
            let x = -1.0 + i as f64 / 100.0;
            for k in 1..=12 {
                let want = (k as f64 * x.acos()).cos();
                assert!((chebyshev_eval(k, x) - want).abs() <= 1e-12, "k={k} x={x}");
            }
        }
        assert!((chebyshev_eval(3, -2.0) - (4.0 * -8.0 - 3.0 * -2.0)).abs() < 1e-9);
        assert!((chebyshev_eval(4, 1.5) - (8.0 * 1.5f64.powi(4) - 8.0 * 2.25 + 1.0)).abs() < 1e-9);
        assert!(chebyshev_trace(&s, 0, 1.0, 1.0).is_err());
    }

    #[test]
    fn height_examples() {
        let s = Spectrum::new(vec![-1.0, 0.0, 2.0]).unwrap();
        let p = (std::f64::consts::PI / 2.0).sqrt();
        assert!((height_function(&s, 1.0, Beta::Real) - p).abs() < 1e-15);
        assert_eq!(height_function(&s, -5.0, Beta::Complex), 3.0 * height_prefactor(Beta::Complex));
        assert_eq!(height_function(&s, 2.5, Beta::Real), 0.0);
        assert_eq!(height_function(&s, 2.0, Beta::Real), p);
        let prof = height_profile(&s, &[-2.0, -0.5, 0.5, 3.0], Beta::Real);
        assert!(prof.values.windows(2).all(|w| w[0] >= w[1]));
    }

    #[test]
    fn height_moment_single_sample_is_zero() {
        let s = vec![Spectrum::new(vec![-1.0, 0.3]).unwrap()];
        let m = height_moment_empirical(&s, 2, 1.0, 1.0, HeightWindow::for_level(1.0), Beta::Real).unwrap();
        assert_eq!(m.values, vec![0.0]);
    }

    #[test]
    fn height_moment_mirror_pair() {
        let a = Spectrum::new(vec![-1.3, 0.2, 0.9]).unwrap();
        let b = Spectrum::new(vec![-0.9, -0.2, 1.3]).unwrap();
        let m = height_moment_empirical(&[a, b], 2, 1.0, 1.0, HeightWindow::for_level(1.0), Beta::Real).unwrap();
        assert!((m.values[0] + m.values[1]).abs() < 1e-12);
    }

    #[test]
    fn height_moment_window_rules() {
        let s = vec![Spectrum::new(vec![0.0]).unwrap()];
        let small = HeightWindow { x_max: 2.0, n_nodes: 100 };
        assert!(height_moment_empirical(&s, 1, 1.0, 1.0, small, Beta::Real).is_err());
        let far = vec![Spectrum::new(vec![10.0]).unwrap(), Spectrum::new(vec![0.0]).unwrap()];
        let m = height_moment_empirical(&far, 1, 1.0, 1.0, HeightWindow::for_level(1.0), Beta::Real).unwrap();
        assert_eq!(m.truncated_samples, vec![0]);
    }

    #[test]
    fn trace_moment_example() {
        let s = Spectrum::new(vec![1.0, -1.0]).unwrap();
        let v = height_moment_via_traces(&s, 0.0, 1, 1.0, Beta::Real);
        assert!((v - (std::f64::consts::PI / 2.0).sqrt()).abs() < 1e-15);
        assert_eq!(height_moment_via_traces(&s, 2.0, 1, 1.0, Beta::Real), 0.0);
    }

    #[test]
    fn observable_json() {
        let o: ObservableSpec = serde_json::from_str(r#"{"set":"full","time":0.5,"statistic":{"kind":"chebyshev","k":3}}"#).unwrap();
        assert_eq!(o.statistic, Statistic::Chebyshev { k: 3 });
        assert!(serde_json::from_str::<ObservableSpec>(r#"{"set":"a","time":0,"statistic":{"kind":"trace_power","k":1,"x":1}}"#).is_err());
    }

    #[test]
    fn spectra_csv() {
        let mut buf = Vec::new();
        write_spectra_csv(&mut buf, &[(0, Spectrum::new(vec![1.0, -1.0]).unwrap())]).unwrap();
        let text = String::from_utf8(buf).unwrap();
        assert!(text.starts_with("sample_id,lambda_1,lambda_2\n0,-1"));
    }
}
