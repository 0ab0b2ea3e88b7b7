//! Scalar stochastic processes that populate the matrix entries.
//!
//! Off-diagonal processes `Z(t)` and diagonal processes `Y(t)` are sampled on a
//! finite time grid. The correlation function `c(s,t)` fixes both laws:
//! `E Z(s)Z(t) = c(s,t)` and `E Y(s)Y(t) = 2c(s,t)` for real symmetric
//! matrices, `E Z(s)conj(Z(t)) = c(s,t)`, `E Z(s)Z(t) = 0` and
//! `E Y(s)Y(t) = c(s,t)` for Hermitian ones.

use std::f64::consts::SQRT_2;
use std::fmt;

use faer::{Mat, Side};
use num_complex::Complex64;
use rand::Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Symmetry class: 1 for real symmetric (GOE-like), 2 for Hermitian (GUE-like).
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(try_from = "u8", into = "u8")]
pub enum Beta {
    Real,
    Complex,
}

impl Beta {
    pub fn value(self) -> u8 {
        match self {
            Beta::Real => 1,
            Beta::Complex => 2,
        }
    }

    pub fn as_f64(self) -> f64 {
        f64::from(self.value())
    }
}

impl TryFrom<u8> for Beta {
    type Error = String;

    fn try_from(v: u8) -> std::result::Result<Self, String> {
        match v {
            1 => Ok(Beta::Real),
            2 => Ok(Beta::Complex),
            other => Err(format!("beta must be 1 or 2, got {other}")),
        }
    }
}

impl From<Beta> for u8 {
    fn from(b: Beta) -> u8 {
        b.value()
    }
}

impl fmt::Display for Beta {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}", self.value())
    }
}

/// Correlation function `c(s,t)` of the entry processes.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum CovarianceFn {
    /// `exp(-rate |s - t|)`.
    #[serde(rename = "ou")]
    OrnsteinUhlenbeck { rate: f64 },
    /// 1 on the diagonal `s == t`, `value` elsewhere.
    Constant { value: f64 },
    /// Bilinear interpolation of a symmetric table on `times x times`, clamped to [0, 1].
    #[serde(rename = "table")]
    TableInterpolated { times: Vec<f64>, values: Vec<Vec<f64>> },
}

impl CovarianceFn {
    pub fn ou(rate: f64) -> Self {
        CovarianceFn::OrnsteinUhlenbeck { rate }
    }

    pub fn constant(value: f64) -> Self {
        CovarianceFn::Constant { value }
    }

    pub fn validate(&self) -> Result<()> {
        match self {
            CovarianceFn::OrnsteinUhlenbeck { rate } => {
                if !(rate.is_finite() && *rate > 0.0) {
                    return Err(Error::Admissibility(format!(
                        "ou rate must be positive and finite, got {rate}"
                    )));
                }
            }
            CovarianceFn::Constant { value } => {
                if !(*value > 0.0 && *value <= 1.0) {
                    return Err(Error::Admissibility(format!(
                        "constant covariance must lie in (0, 1], got {value}"
                    )));
                }
            }
            CovarianceFn::TableInterpolated { times, values } => {
                if times.len() < 2 {
                    return Err(Error::Admissibility(
                        "covariance table needs at least two time nodes".into(),
                    ));
                }
                if !times.iter().all(|t| t.is_finite()) || times.windows(2).any(|w| w[0] >= w[1]) {
                    return Err(Error::Admissibility(
                        "covariance table times must be finite and strictly increasing".into(),
                    ));
                }
                let n = times.len();
                if values.len() != n || values.iter().any(|row| row.len() != n) {
                    return Err(Error::Admissibility(format!(
                        "covariance table must be {n}x{n}"
                    )));
                }
                for (i, row) in values.iter().enumerate() {
                    if (row[i] - 1.0).abs() > 1e-12 {
                        return Err(Error::Admissibility(format!(
                            "covariance table diagonal must be 1, row {i} has {}",
                            row[i]
                        )));
                    }
                    for (j, &v) in row.iter().enumerate() {
                        if !(0.0..=1.0).contains(&v) || (v - values[j][i]).abs() > 1e-12 {
                            return Err(Error::Admissibility(format!(
                                "covariance table entry ({i},{j}) = {v} must be symmetric and in [0,1]"
                            )));
                        }
                    }
                }
            }
        }
        Ok(())
    }

    /// `c(s,t)`.
    pub fn evaluate(&self, s: f64, t: f64) -> Result<f64> {
        match self {
            CovarianceFn::OrnsteinUhlenbeck { rate } => Ok((-rate * (s - t).abs()).exp()),
            CovarianceFn::Constant { value } => Ok(if s == t { 1.0 } else { *value }),
            CovarianceFn::TableInterpolated { times, values } => {
                let (lo, hi) = (times[0], times[times.len() - 1]);
                for v in [s, t] {
                    if !(lo..=hi).contains(&v) {
                        return Err(Error::OutOfRange {
                            what: "covariance table time",
                            value: v,
                            lo,
                            hi,
                        });
                    }
                }
                if s == t {
                    return Ok(1.0);
                }
                // evaluate at (min, max) so that c(s,t) and c(t,s) share one code path
                let (a, b) = if s <= t { (s, t) } else { (t, s) };
                Ok(bilinear(times, values, a, b).clamp(0.0, 1.0))
            }
        }
    }

    /// Whether `c(a,b) c(b,d) = c(a,d)` holds for all `a <= b <= d`.
    pub fn is_multiplicative(&self) -> bool {
        match self {
            CovarianceFn::OrnsteinUhlenbeck { .. } => true,
            CovarianceFn::Constant { value } => *value == 1.0,
            CovarianceFn::TableInterpolated { .. } => false,
        }
    }
}

fn bracket(times: &[f64], x: f64) -> (usize, f64) {
    let n = times.len();
    let i = times.partition_point(|&t| t <= x).clamp(1, n - 1) - 1;
    let frac = (x - times[i]) / (times[i + 1] - times[i]);
    (i, frac)
}

fn bilinear(times: &[f64], values: &[Vec<f64>], s: f64, t: f64) -> f64 {
    let (i, fs) = bracket(times, s);
    let (j, ft) = bracket(times, t);
    let v00 = values[i][j];
    let v10 = values[i + 1][j];
    let v01 = values[i][j + 1];
    let v11 = values[i + 1][j + 1];
    (1.0 - fs) * ((1.0 - ft) * v00 + ft * v01) + fs * ((1.0 - ft) * v10 + ft * v11)
}

/// `covariance_eval`: `c(s,t)` for the given kind.
pub fn covariance_eval(c: &CovarianceFn, s: f64, t: f64) -> Result<f64> {
    c.evaluate(s, t)
}

/// Single-draw law used by the time-constant families.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum StaticDistribution {
    Gaussian,
    /// `{-sqrt 3, 0, sqrt 3}` with probabilities `{1/6, 2/3, 1/6}`.
    ThreePoint,
    /// `{-1, 1}` equiprobable; violates the fourth-moment condition.
    Rademacher,
}

impl StaticDistribution {
    /// A unit-variance draw.
    pub fn draw<R: Rng + ?Sized>(self, rng: &mut R) -> f64 {
        match self {
            StaticDistribution::Gaussian => rng.sample(StandardNormal),
            StaticDistribution::ThreePoint => match rng.gen_range(0u8..6) {
                0 => -SQRT_3,
                5 => SQRT_3,
                _ => 0.0,
            },
            StaticDistribution::Rademacher => {
                if rng.gen::<bool>() {
                    1.0
                } else {
                    -1.0
                }
            }
        }
    }
}

const SQRT_3: f64 = 1.732_050_807_568_877_2;

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum EntryFamily {
    /// Jointly Gaussian stationary processes with correlation `c`.
    GaussianStationary,
    /// One three-point draw held constant in time (requires `c = 1`).
    FrozenThreePoint,
    /// One draw of the given law held constant in time (requires `c = 1`).
    StaticIid(StaticDistribution),
}

impl EntryFamily {
    fn static_law(self) -> Option<StaticDistribution> {
        match self {
            EntryFamily::GaussianStationary => None,
            EntryFamily::FrozenThreePoint => Some(StaticDistribution::ThreePoint),
            EntryFamily::StaticIid(d) => Some(d),
        }
    }
}

/// Law of the diagonal and off-diagonal entry processes.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "RawEntrySpec", into = "RawEntrySpec")]
pub struct EntryProcessSpec {
    pub beta: Beta,
    pub covariance: CovarianceFn,
    pub family: EntryFamily,
}

impl EntryProcessSpec {
    pub fn new(beta: Beta, covariance: CovarianceFn, family: EntryFamily) -> Result<Self> {
        let spec = EntryProcessSpec {
            beta,
            covariance,
            family,
        };
        spec.validate()?;
        Ok(spec)
    }

    pub fn gaussian(beta: Beta, covariance: CovarianceFn) -> Result<Self> {
        Self::new(beta, covariance, EntryFamily::GaussianStationary)
    }

    pub fn validate(&self) -> Result<()> {
        self.covariance.validate()?;
        if self.family.static_law().is_some()
            && self.covariance != (CovarianceFn::Constant { value: 1.0 })
        {
            return Err(Error::Admissibility(
                "time-constant families require covariance {\"kind\":\"constant\",\"value\":1}"
                    .into(),
            ));
        }
        Ok(())
    }
}

#[derive(Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
enum RawFamily {
    Gaussian,
    FrozenThreePoint,
    StaticIid,
}

#[derive(Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawEntrySpec {
    beta: Beta,
    family: RawFamily,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    distribution: Option<StaticDistribution>,
    covariance: CovarianceFn,
}

impl TryFrom<RawEntrySpec> for EntryProcessSpec {
    type Error = String;

    fn try_from(raw: RawEntrySpec) -> std::result::Result<Self, String> {
        let family = match (raw.family, raw.distribution) {
            (RawFamily::Gaussian, None) => EntryFamily::GaussianStationary,
            (RawFamily::FrozenThreePoint, None) => EntryFamily::FrozenThreePoint,
            (RawFamily::StaticIid, Some(d)) => EntryFamily::StaticIid(d),
            (RawFamily::StaticIid, None) => {
                return Err("family \"static_iid\" needs a \"distribution\"".into())
            }
            (_, Some(_)) => {
                return Err("\"distribution\" is only valid with family \"static_iid\"".into())
            }
        };
        EntryProcessSpec::new(raw.beta, raw.covariance, family).map_err(|e| e.to_string())
    }
}

impl From<EntryProcessSpec> for RawEntrySpec {
    fn from(spec: EntryProcessSpec) -> Self {
        let (family, distribution) = match spec.family {
            EntryFamily::GaussianStationary => (RawFamily::Gaussian, None),
            EntryFamily::FrozenThreePoint => (RawFamily::FrozenThreePoint, None),
            EntryFamily::StaticIid(d) => (RawFamily::StaticIid, Some(d)),
        };
        RawEntrySpec {
            beta: spec.beta,
            family,
            distribution,
            covariance: spec.covariance,
        }
    }
}

/// Strictly increasing, nonempty list of finite times.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "Vec<f64>", into = "Vec<f64>")]
pub struct TimeGrid(Vec<f64>);

impl TimeGrid {
    pub fn new(times: Vec<f64>) -> Result<Self> {
        if times.is_empty() {
            return Err(Error::Domain("time grid is empty".into()));
        }
        if times.iter().any(|t| !t.is_finite()) || times.windows(2).any(|w| w[0] >= w[1]) {
            return Err(Error::Domain(
                "time grid must be finite and strictly increasing".into(),
            ));
        }
        Ok(TimeGrid(times))
    }

    pub fn single(t: f64) -> Self {
        TimeGrid(vec![t])
    }

    pub fn times(&self) -> &[f64] {
        &self.0
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    /// Index of a grid node equal to `t` up to 1e-12.
    pub fn index_of(&self, t: f64) -> Option<usize> {
        self.0.iter().position(|&g| (g - t).abs() <= 1e-12)
    }
}

impl TryFrom<Vec<f64>> for TimeGrid {
    type Error = String;
    fn try_from(v: Vec<f64>) -> std::result::Result<Self, String> {
        TimeGrid::new(v).map_err(|e| e.to_string())
    }
}

impl From<TimeGrid> for Vec<f64> {
    fn from(g: TimeGrid) -> Vec<f64> {
        g.0
    }
}

/// One entry process evaluated on a time grid.
#[derive(Clone, Debug, PartialEq)]
pub enum EntryPath {
    Real(Vec<f64>),
    Complex(Vec<Complex64>),
}

impl EntryPath {
    pub fn len(&self) -> usize {
        match self {
            EntryPath::Real(v) => v.len(),
            EntryPath::Complex(v) => v.len(),
        }
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn get(&self, i: usize) -> Complex64 {
        match self {
            EntryPath::Real(v) => Complex64::new(v[i], 0.0),
            EntryPath::Complex(v) => v[i],
        }
    }

    pub fn is_finite(&self) -> bool {
        match self {
            EntryPath::Real(v) => v.iter().all(|x| x.is_finite()),
            EntryPath::Complex(v) => v.iter().all(|z| z.re.is_finite() && z.im.is_finite()),
        }
    }
}

const CHOLESKY_JITTER: f64 = 1e-12;
const EIGEN_CLAMP_TOL: f64 = 1e-10;

/// Matrix `[c(t_i, t_j)]` over the grid, row-major.
pub fn grid_covariance(c: &CovarianceFn, grid: &TimeGrid) -> Result<Vec<f64>> {
    let t = grid.times();
    let n = t.len();
    let mut out = vec![0.0; n * n];
    for i in 0..n {
        for j in 0..n {
            out[i * n + j] = c.evaluate(t[i], t[j])?;
        }
    }
    Ok(out)
}

/// A square factor `F` (row-major) with `F F^T = sigma`.
///
/// Tries Cholesky, then Cholesky with 1e-12 diagonal jitter, then a symmetric
/// eigendecomposition with negative eigenvalues down to `-1e-10 * max`
/// clamped to zero.
pub fn covariance_factor(sigma: &[f64], n: usize) -> Result<Vec<f64>> {
    let mat = Mat::<f64>::from_fn(n, n, |i, j| sigma[i * n + j]);
    if let Ok(ch) = mat.cholesky(Side::Lower) {
        return Ok(row_major(&ch.compute_l()));
    }
    let jittered = Mat::<f64>::from_fn(n, n, |i, j| {
        sigma[i * n + j] + if i == j { CHOLESKY_JITTER } else { 0.0 }
    });
    if let Ok(ch) = jittered.cholesky(Side::Lower) {
        return Ok(row_major(&ch.compute_l()));
    }
    let evd = mat.selfadjoint_eigendecomposition(Side::Lower);
    let s = evd.s().column_vector();
    let u = evd.u();
    let max = (0..n).map(|i| s.read(i).abs()).fold(0.0, f64::max);
    let mut out = vec![0.0; n * n];
    for k in 0..n {
        let lam = s.read(k);
        if lam < -EIGEN_CLAMP_TOL * max.max(1.0) {
            return Err(Error::Admissibility(format!(
                "grid covariance matrix has eigenvalue {lam:.3e}"
            )));
        }
        let root = lam.max(0.0).sqrt();
        for i in 0..n {
            out[i * n + k] = u.read(i, k) * root;
        }
    }
    Ok(out)
}

fn row_major(m: &Mat<f64>) -> Vec<f64> {
    let n = m.nrows();
    let mut out = vec![0.0; n * n];
    for i in 0..n {
        for j in 0..m.ncols() {
            out[i * n + j] = m.read(i, j);
        }
    }
    out
}

/// Samples entry paths for a fixed (spec, grid); the grid factor is computed once.
#[derive(Clone, Debug)]
pub struct PathSampler {
    spec: EntryProcessSpec,
    grid: TimeGrid,
    factor: Vec<f64>,
}

impl PathSampler {
    pub fn new(spec: &EntryProcessSpec, grid: &TimeGrid) -> Result<Self> {
        spec.validate()?;
        let n = grid.len();
        let factor = if spec.family.static_law().is_some() {
            Vec::new()
        } else {
            covariance_factor(&grid_covariance(&spec.covariance, grid)?, n)?
        };
        Ok(PathSampler {
            spec: spec.clone(),
            grid: grid.clone(),
            factor,
        })
    }

    pub fn spec(&self) -> &EntryProcessSpec {
        &self.spec
    }

    pub fn grid(&self) -> &TimeGrid {
        &self.grid
    }

    /// Writes `F g` for a fresh standard normal vector `g`, scaled by `scale`.
    fn correlated<R: Rng + ?Sized>(&self, rng: &mut R, scale: f64, out: &mut [f64], g: &mut [f64]) {
        let n = self.grid.len();
        for x in g.iter_mut() {
            *x = rng.sample(StandardNormal);
        }
        for i in 0..n {
            let row = &self.factor[i * n..i * n + n];
            let acc: f64 = row.iter().zip(g.iter()).map(|(a, b)| a * b).sum();
            out[i] = scale * acc;
        }
    }

    pub(crate) fn fill_real<R: Rng + ?Sized>(&self, rng: &mut R, diagonal: bool, out: &mut [f64]) {
        debug_assert_eq!(self.spec.beta, Beta::Real);
        let scale = if diagonal { SQRT_2 } else { 1.0 };
        match self.spec.family.static_law() {
            Some(law) => out.fill(scale * law.draw(rng)),
            None => {
                let mut g = [0.0; 64];
                if self.grid.len() <= 64 {
                    let g = &mut g[..self.grid.len()];
                    self.correlated(rng, scale, out, g);
                } else {
                    let mut g = vec![0.0; self.grid.len()];
                    self.correlated(rng, scale, out, &mut g);
                }
            }
        }
    }

    pub(crate) fn fill_complex<R: Rng + ?Sized>(
        &self,
        rng: &mut R,
        diagonal: bool,
        out: &mut [Complex64],
    ) {
        debug_assert_eq!(self.spec.beta, Beta::Complex);
        let n = self.grid.len();
        if let Some(law) = self.spec.family.static_law() {
            let z = if diagonal {
                Complex64::new(law.draw(rng), 0.0)
            } else {
                let a = law.draw(rng);
                let b = law.draw(rng);
                Complex64::new(a, b) / SQRT_2
            };
            out.fill(z);
            return;
        }
        let mut stack = [[0.0; 64]; 3];
        let mut heap;
        let [re, im, g]: [&mut [f64]; 3] = if n <= 64 {
            let [a, b, c] = &mut stack;
            [&mut a[..n], &mut b[..n], &mut c[..n]]
        } else {
            heap = vec![0.0; 3 * n];
            let (a, rest) = heap.split_at_mut(n);
            let (b, c) = rest.split_at_mut(n);
            [a, b, c]
        };
        if diagonal {
            self.correlated(rng, 1.0, re, g);
            for (o, r) in out.iter_mut().zip(re.iter()) {
                *o = Complex64::new(*r, 0.0);
            }
        } else {
            self.correlated(rng, std::f64::consts::FRAC_1_SQRT_2, re, g);
            self.correlated(rng, std::f64::consts::FRAC_1_SQRT_2, im, g);
            for ((o, r), i) in out.iter_mut().zip(re.iter()).zip(im.iter()) {
                *o = Complex64::new(*r, *i);
            }
        }
    }

    fn path<R: Rng + ?Sized>(&self, rng: &mut R, diagonal: bool) -> EntryPath {
        let n = self.grid.len();
        match self.spec.beta {
            Beta::Real => {
                let mut v = vec![0.0; n];
                self.fill_real(rng, diagonal, &mut v);
                EntryPath::Real(v)
            }
            Beta::Complex => {
                let mut v = vec![Complex64::new(0.0, 0.0); n];
                self.fill_complex(rng, diagonal, &mut v);
                EntryPath::Complex(v)
            }
        }
    }

    pub fn offdiagonal<R: Rng + ?Sized>(&self, rng: &mut R) -> EntryPath {
        self.path(rng, false)
    }

    pub fn diagonal<R: Rng + ?Sized>(&self, rng: &mut R) -> EntryPath {
        self.path(rng, true)
    }
}

/// `sample_offdiagonal_path`: one draw of `Z` on the grid.
pub fn sample_offdiagonal_path<R: Rng + ?Sized>(
    spec: &EntryProcessSpec,
    grid: &TimeGrid,
    rng: &mut R,
) -> Result<EntryPath> {
    Ok(PathSampler::new(spec, grid)?.offdiagonal(rng))
}

/// `sample_diagonal_path`: one draw of `Y` on the grid.
pub fn sample_diagonal_path<R: Rng + ?Sized>(
    spec: &EntryProcessSpec,
    grid: &TimeGrid,
    rng: &mut R,
) -> Result<EntryPath> {
    Ok(PathSampler::new(spec, grid)?.diagonal(rng))
}

/// One empirical moment against its admissibility target.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct MomentCheck {
    pub quantity: String,
    pub s: f64,
    pub t: f64,
    pub target: f64,
    pub estimate: f64,
    pub stderr: f64,
    pub z: f64,
}

#[derive(Clone, Debug, Default, Serialize)]
pub struct AdmissibilityReport {
    pub n_samples: usize,
    pub checks: Vec<MomentCheck>,
}

impl AdmissibilityReport {
    pub fn max_abs_z(&self) -> f64 {
        self.checks.iter().map(|c| c.z.abs()).fold(0.0, f64::max)
    }

    pub fn passes(&self, z_max: f64) -> bool {
        self.max_abs_z() <= z_max
    }

    pub fn find(&self, quantity: &str, s: f64, t: f64) -> Option<&MomentCheck> {
        self.checks
            .iter()
            .find(|c| c.quantity == quantity && c.s == s && c.t == t)
    }
}

fn moment_check(quantity: &str, s: f64, t: f64, target: f64, draws: &[f64]) -> MomentCheck {
    let n = draws.len() as f64;
    let mean = draws.iter().sum::<f64>() / n;
    let var = draws.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / (n - 1.0);
    let stderr = (var / n).sqrt();
    let diff = mean - target;
    let z = if stderr > 0.0 {
        diff / stderr
    } else if diff == 0.0 {
        0.0
    } else {
        diff.signum() * f64::INFINITY
    };
    MomentCheck {
        quantity: quantity.to_string(),
        s,
        t,
        target,
        estimate: mean,
        stderr,
        z,
    }
}

/// `check_admissibility`: empirical second and fourth moments at every grid pair.
pub fn check_admissibility<R: Rng + ?Sized>(
    spec: &EntryProcessSpec,
    grid: &TimeGrid,
    n_samples: usize,
    rng: &mut R,
) -> Result<AdmissibilityReport> {
    if n_samples < 1000 {
        return Err(Error::Domain(format!(
            "admissibility check needs at least 1000 samples, got {n_samples}"
        )));
    }
    let sampler = PathSampler::new(spec, grid)?;
    let times = grid.times();
    let g = times.len();
    let mut z_paths = Vec::with_capacity(n_samples);
    let mut y_paths = Vec::with_capacity(n_samples);
    for _ in 0..n_samples {
        z_paths.push(sampler.offdiagonal(rng));
        y_paths.push(sampler.diagonal(rng));
    }
    let mut report = AdmissibilityReport {
        n_samples,
        checks: Vec::new(),
    };
    let mut buf = vec![0.0; n_samples];
    let mut push = |report: &mut AdmissibilityReport,
                    name: &str,
                    s: f64,
                    t: f64,
                    target: f64,
                    f: &dyn Fn(usize) -> f64| {
        for (k, b) in buf.iter_mut().enumerate() {
            *b = f(k);
        }
        report.checks.push(moment_check(name, s, t, target, &buf));
    };
    for a in 0..g {
        for b in a..g {
            let (s, t) = (times[a], times[b]);
            let c = spec.covariance.evaluate(s, t)?;
            match spec.beta {
                Beta::Real => {
                    push(&mut report, "E Z(s)Z(t)", s, t, c, &|k| {
                        z_paths[k].get(a).re * z_paths[k].get(b).re
                    });
                    push(&mut report, "E Z^2(s)Z^2(t)", s, t, 2.0 * c * c + 1.0, &|k| {
                        (z_paths[k].get(a).re * z_paths[k].get(b).re).powi(2)
                    });
                    push(&mut report, "E Y(s)Y(t)", s, t, 2.0 * c, &|k| {
                        y_paths[k].get(a).re * y_paths[k].get(b).re
                    });
                }
                Beta::Complex => {
                    push(&mut report, "Re E Z(s)Z(t)", s, t, 0.0, &|k| {
                        (z_paths[k].get(a) * z_paths[k].get(b)).re
                    });
                    push(&mut report, "Im E Z(s)Z(t)", s, t, 0.0, &|k| {
                        (z_paths[k].get(a) * z_paths[k].get(b)).im
                    });
                    push(&mut report, "Re E Z(s)conj(Z(t))", s, t, c, &|k| {
                        (z_paths[k].get(a) * z_paths[k].get(b).conj()).re
                    });
                    if a != b {
                        push(&mut report, "Im E Z(s)conj(Z(t))", s, t, 0.0, &|k| {
                            (z_paths[k].get(a) * z_paths[k].get(b).conj()).im
                        });
                    }
                    push(&mut report, "E |Z(s)|^2|Z(t)|^2", s, t, c * c + 1.0, &|k| {
                        z_paths[k].get(a).norm_sqr() * z_paths[k].get(b).norm_sqr()
                    });
                    push(&mut report, "E Y(s)Y(t)", s, t, c, &|k| {
                        y_paths[k].get(a).re * y_paths[k].get(b).re
                    });
                }
            }
        }
    }
    Ok(report)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::seed::keyed_rng;
    use approx::assert_abs_diff_eq;

    fn ou() -> CovarianceFn {
        CovarianceFn::ou(1.0)
    }

    #[test]
    fn covariance_examples() {
        assert_eq!(ou().evaluate(0.0, 0.0).unwrap(), 1.0);
        assert_abs_diff_eq!(ou().evaluate(0.0, 0.5).unwrap(), 0.606_530_659_712_633_4, epsilon = 1e-15);
        assert_eq!(CovarianceFn::constant(0.7).evaluate(3.0, -8.0).unwrap(), 0.7);
        assert_eq!(CovarianceFn::constant(0.7).evaluate(3.0, 3.0).unwrap(), 1.0);
    }

    #[test]
    fn table_interpolates_and_rejects_outside() {
        let table = CovarianceFn::TableInterpolated {
            times: vec![0.0, 1.0, 2.0],
            values: vec![
                vec![1.0, 0.5, 0.2],
                vec![0.5, 1.0, 0.5],
                vec![0.2, 0.5, 1.0],
            ],
        };
        table.validate().unwrap();
        assert_eq!(table.evaluate(0.0, 2.0).unwrap(), 0.2);
        assert_eq!(table.evaluate(1.5, 1.5).unwrap(), 1.0);
        let v = table.evaluate(0.0, 1.5).unwrap();
        assert_abs_diff_eq!(v, 0.35, epsilon = 1e-12);
        assert_eq!(table.evaluate(0.3, 1.7).unwrap(), table.evaluate(1.7, 0.3).unwrap());
        assert!(matches!(table.evaluate(-0.1, 1.0), Err(Error::OutOfRange { .. })));
    }

    #[test]
    fn invalid_covariances_rejected() {
        assert!(CovarianceFn::ou(0.0).validate().is_err());
        assert!(CovarianceFn::constant(1.2).validate().is_err());
        assert!(CovarianceFn::constant(0.0).validate().is_err());
        let asym = CovarianceFn::TableInterpolated {
            times: vec![0.0, 1.0],
            values: vec![vec![1.0, 0.4], vec![0.5, 1.0]],
        };
        assert!(asym.validate().is_err());
    }

    #[test]
    fn frozen_family_requires_unit_covariance() {
        assert!(EntryProcessSpec::new(Beta::Real, ou(), EntryFamily::FrozenThreePoint).is_err());
        assert!(EntryProcessSpec::new(
            Beta::Real,
            CovarianceFn::constant(1.0),
            EntryFamily::FrozenThreePoint
        )
        .is_ok());
    }

    #[test]
    fn spec_json_round_trip() {
        let json = r#"{"beta":1,"family":"gaussian","covariance":{"kind":"ou","rate":1.0}}"#;
        let spec: EntryProcessSpec = serde_json::from_str(json).unwrap();
        assert_eq!(spec.beta, Beta::Real);
        assert_eq!(spec.covariance, ou());
        assert_eq!(serde_json::to_string(&spec).unwrap(), json);

        let bad = r#"{"beta":3,"family":"gaussian","covariance":{"kind":"ou","rate":1.0}}"#;
        assert!(serde_json::from_str::<EntryProcessSpec>(bad).is_err());
        let st = r#"{"beta":2,"family":"static_iid","distribution":"rademacher","covariance":{"kind":"constant","value":1.0}}"#;
        let spec: EntryProcessSpec = serde_json::from_str(st).unwrap();
        assert_eq!(spec.family, EntryFamily::StaticIid(StaticDistribution::Rademacher));
    }

    #[test]
    fn grid_validation() {
        assert!(TimeGrid::new(vec![]).is_err());
        assert!(TimeGrid::new(vec![0.0, 0.0]).is_err());
        assert!(TimeGrid::new(vec![1.0, 0.0]).is_err());
        assert_eq!(TimeGrid::new(vec![0.0, 0.5]).unwrap().index_of(0.5), Some(1));
    }

    fn empirical(n: usize, f: impl Fn(usize) -> f64) -> f64 {
        (0..n).map(f).sum::<f64>() / n as f64
    }

    #[test]
    fn offdiagonal_single_node_unit_variance() {
        let spec = EntryProcessSpec::gaussian(Beta::Real, ou()).unwrap();
        let sampler = PathSampler::new(&spec, &TimeGrid::single(0.0)).unwrap();
        let mut rng = keyed_rng(&[1]);
        let draws: Vec<f64> = (0..100_000).map(|_| sampler.offdiagonal(&mut rng).get(0).re).collect();
        let var = empirical(draws.len(), |k| draws[k] * draws[k]);
        assert_abs_diff_eq!(var, 1.0, epsilon = 0.02);
    }

    #[test]
    fn offdiagonal_ou_correlation() {
        let spec = EntryProcessSpec::gaussian(Beta::Real, ou()).unwrap();
        let sampler = PathSampler::new(&spec, &TimeGrid::new(vec![0.0, 0.5]).unwrap()).unwrap();
        let mut rng = keyed_rng(&[2]);
        let paths: Vec<EntryPath> = (0..100_000).map(|_| sampler.offdiagonal(&mut rng)).collect();
        let cov = empirical(paths.len(), |k| paths[k].get(0).re * paths[k].get(1).re);
        assert_abs_diff_eq!(cov, covariance_eval(&ou(), 0.0, 0.5).unwrap(), epsilon = 0.01);
    }

    #[test]
    fn frozen_three_point_moments() {
        let spec = EntryProcessSpec::new(
            Beta::Real,
            CovarianceFn::constant(1.0),
            EntryFamily::FrozenThreePoint,
        )
        .unwrap();
        let grid = TimeGrid::new(vec![0.0, 1.0, 2.0]).unwrap();
        let sampler = PathSampler::new(&spec, &grid).unwrap();
        let mut rng = keyed_rng(&[3]);
        let paths: Vec<EntryPath> = (0..100_000).map(|_| sampler.offdiagonal(&mut rng)).collect();
        for p in &paths[..10] {
            assert!(p.get(0) == p.get(1) && p.get(1) == p.get(2));
        }
        let m2 = empirical(paths.len(), |k| paths[k].get(0).re.powi(2));
        let m4 = empirical(paths.len(), |k| paths[k].get(0).re.powi(4));
        assert_abs_diff_eq!(m2, 1.0, epsilon = 0.02);
        assert_abs_diff_eq!(m4, 3.0, epsilon = 0.05);

        let diag: Vec<f64> = (0..100_000).map(|_| sampler.diagonal(&mut rng).get(0).re).collect();
        let d2 = empirical(diag.len(), |k| diag[k].powi(2));
        assert_abs_diff_eq!(d2, 2.0, epsilon = 0.04);
    }

    #[test]
    fn diagonal_variances() {
        let mut rng = keyed_rng(&[4]);
        let real = EntryProcessSpec::gaussian(Beta::Real, ou()).unwrap();
        let grid = TimeGrid::new(vec![0.0, 1.0]).unwrap();
        let s = PathSampler::new(&real, &grid).unwrap();
        let paths: Vec<EntryPath> = (0..100_000).map(|_| s.diagonal(&mut rng)).collect();
        let v = empirical(paths.len(), |k| paths[k].get(0).re.powi(2));
        assert_abs_diff_eq!(v, 2.0, epsilon = 0.04);
        let c = empirical(paths.len(), |k| paths[k].get(0).re * paths[k].get(1).re);
        assert_abs_diff_eq!(c, 2.0 * (-1.0f64).exp(), epsilon = 0.02);

        let cplx = EntryProcessSpec::gaussian(Beta::Complex, ou()).unwrap();
        let s = PathSampler::new(&cplx, &TimeGrid::single(0.0)).unwrap();
        let paths: Vec<EntryPath> = (0..100_000).map(|_| s.diagonal(&mut rng)).collect();
        assert!(paths.iter().all(|p| p.get(0).im == 0.0));
        let v = empirical(paths.len(), |k| paths[k].get(0).re.powi(2));
        assert_abs_diff_eq!(v, 1.0, epsilon = 0.02);
    }

    #[test]
    fn admissibility_examples() {
        let grid = TimeGrid::new(vec![0.0, 0.5]).unwrap();
        let real = EntryProcessSpec::gaussian(Beta::Real, ou()).unwrap();
        let rep = check_admissibility(&real, &grid, 40_000, &mut keyed_rng(&[5])).unwrap();
        let q = rep.find("E Z^2(s)Z^2(t)", 0.0, 0.5).unwrap();
        assert_abs_diff_eq!(q.target, 2.0 * (-1.0f64).exp() + 1.0, epsilon = 1e-12);
        assert!(q.z.abs() <= 4.0, "{q:?}");
        assert!(rep.passes(5.0), "{rep:?}");

        let cplx = EntryProcessSpec::gaussian(Beta::Complex, ou()).unwrap();
        let rep = check_admissibility(&cplx, &grid, 40_000, &mut keyed_rng(&[6])).unwrap();
        let q = rep.find("Re E Z(s)Z(t)", 0.0, 0.5).unwrap();
        assert_eq!(q.target, 0.0);
        assert!(q.z.abs() <= 4.0);
        assert!(rep.passes(5.0), "{rep:?}");

        let frozen = EntryProcessSpec::new(
            Beta::Real,
            CovarianceFn::constant(1.0),
            EntryFamily::FrozenThreePoint,
        )
        .unwrap();
        let rep = check_admissibility(&frozen, &grid, 40_000, &mut keyed_rng(&[7])).unwrap();
        let q = rep.find("E Z^2(s)Z^2(t)", 0.0, 0.5).unwrap();
        assert_eq!(q.target, 3.0);
        assert!(q.z.abs() <= 4.0);
    }

    #[test]
    fn rademacher_fails_fourth_moment() {
        let spec = EntryProcessSpec::new(
            Beta::Real,
            CovarianceFn::constant(1.0),
            EntryFamily::StaticIid(StaticDistribution::Rademacher),
        )
        .unwrap();
        let rep = check_admissibility(&spec, &TimeGrid::single(0.0), 2000, &mut keyed_rng(&[8])).unwrap();
        assert!(!rep.passes(5.0));
        assert!(check_admissibility(&spec, &TimeGrid::single(0.0), 10, &mut keyed_rng(&[8])).is_err());
    }

    #[test]
    fn singular_grid_covariance_falls_back() {
        // c = 1 on three nodes is rank one; the factor must still reproduce it
        let grid = TimeGrid::new(vec![0.0, 1.0, 2.0]).unwrap();
        let sigma = grid_covariance(&CovarianceFn::constant(1.0), &grid).unwrap();
        let f = covariance_factor(&sigma, 3).unwrap();
        for i in 0..3 {
            for j in 0..3 {
                let v: f64 = (0..3).map(|k| f[i * 3 + k] * f[j * 3 + k]).sum();
                assert_abs_diff_eq!(v, sigma[i * 3 + j], epsilon = 1e-8);
            }
        }
    }

    #[test]
    fn indefinite_matrix_rejected() {
        let sigma = [1.0, 2.0, 2.0, 1.0];
        assert!(matches!(covariance_factor(&sigma, 2), Err(Error::Admissibility(_))));
    }

    #[test]
    fn sampling_is_deterministic() {
        let spec = EntryProcessSpec::gaussian(Beta::Complex, ou()).unwrap();
        let grid = TimeGrid::new(vec![0.0, 0.3, 1.0]).unwrap();
        let a = sample_offdiagonal_path(&spec, &grid, &mut keyed_rng(&[9])).unwrap();
        let b = sample_offdiagonal_path(&spec, &grid, &mut keyed_rng(&[9])).unwrap();
        assert_eq!(a, b);
        assert!(a.is_finite());
        assert_eq!(a.len(), 3);
    }
}
