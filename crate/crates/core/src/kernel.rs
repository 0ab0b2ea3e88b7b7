//! The three-dimensional covariance kernel, the maps Ω and Ξ, and numerical
//! positive-definiteness checks.

use faer::{Mat, Side};
use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::entry_process::CovarianceFn;
use crate::error::{Error, Result};

use std::f64::consts::PI;

/// `E ln|U - V|` for independent uniform points of the unit square.
pub const UNIT_SQUARE_LOG_DISTANCE: f64 = -0.805_086_721_950_087_2;

/// A point of the open upper half-plane.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "[f64; 2]", into = "[f64; 2]")]
pub struct UpperHalfPlanePoint(Complex64);

impl UpperHalfPlanePoint {
    pub fn new(z: Complex64) -> Result<Self> {
        if !(z.im > 0.0 && z.re.is_finite() && z.im.is_finite()) {
            return Err(Error::Domain(format!("{z} is not in the open upper half-plane")));
        }
        Ok(UpperHalfPlanePoint(z))
    }

    pub fn from_parts(re: f64, im: f64) -> Result<Self> {
        Self::new(Complex64::new(re, im))
    }

    pub fn z(&self) -> Complex64 {
        self.0
    }
}

impl TryFrom<[f64; 2]> for UpperHalfPlanePoint {
    type Error = String;
    fn try_from(v: [f64; 2]) -> std::result::Result<Self, String> {
        UpperHalfPlanePoint::from_parts(v[0], v[1]).map_err(|e| e.to_string())
    }
}

impl From<UpperHalfPlanePoint> for [f64; 2] {
    fn from(p: UpperHalfPlanePoint) -> [f64; 2] {
        [p.0.re, p.0.im]
    }
}

/// `(1/2π) ln|(c m - z w)/(c m - z w̄)|` with `m = min(|z|², |w|²)` and a
/// precomputed `c = c(s, t)`.
pub fn kernel_value(z: Complex64, w: Complex64, c: f64) -> f64 {
    let m = c * z.norm_sqr().min(w.norm_sqr());
    let num = (m - z * w).norm();
    let den = (m - z * w.conj()).norm();
    (num / den).ln() / (2.0 * PI)
}

/// `kernel_C(z, s; w, t)`; `+∞` when `c(s, t) = 1` and `z = w`.
pub fn kernel_c(z: UpperHalfPlanePoint, s: f64, w: UpperHalfPlanePoint, t: f64, c: &CovarianceFn) -> Result<f64> {
    Ok(kernel_value(z.z(), w.z(), c.evaluate(s, t)?))
}

/// Dirichlet Green function of the upper half-plane,
/// `-(1/2π) ln|(z - w)/(z - w̄)|`.
pub fn green_halfplane(z: UpperHalfPlanePoint, w: UpperHalfPlanePoint) -> f64 {
    green_value(z.z(), w.z())
}

fn green_value(z: Complex64, w: Complex64) -> f64 {
    ((z - w.conj()).norm() / (z - w).norm()).ln() / (2.0 * PI)
}

/// `Ω(x, y) = x/2 + i√(y - x²/4)` on `|x| < 2√y`.
pub fn omega(x: f64, y: f64) -> Result<UpperHalfPlanePoint> {
    if !(y > 0.0 && y.is_finite() && x.is_finite()) {
        return Err(Error::Domain(format!("omega needs y > 0, got ({x}, {y})")));
    }
    let im2 = y - x * x / 4.0;
    if !(im2 > 0.0) {
        return Err(Error::Domain(format!("({x}, {y}) is not inside |x| < 2√y")));
    }
    UpperHalfPlanePoint::from_parts(x / 2.0, im2.sqrt())
}

/// `Ω^{-1}(z) = (2 Re z, |z|²)`.
pub fn omega_inv(z: UpperHalfPlanePoint) -> (f64, f64) {
    (2.0 * z.z().re, z.z().norm_sqr())
}

/// Monotone scalar profile of time.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum Profile {
    Constant { value: f64 },
    /// `intercept + slope·t`.
    Linear { intercept: f64, slope: f64 },
    /// `scale·exp(rate·t)`.
    Exponential { scale: f64, rate: f64 },
}

impl Profile {
    pub fn eval(&self, t: f64) -> f64 {
        match *self {
            Profile::Constant { value } => value,
            Profile::Linear { intercept, slope } => intercept + slope * t,
            Profile::Exponential { scale, rate } => scale * (rate * t).exp(),
        }
    }

    /// Sign of the derivative: -1, 0 or 1.
    fn direction(&self) -> i8 {
        let d = match *self {
            Profile::Constant { .. } => 0.0,
            Profile::Linear { slope, .. } => slope,
            Profile::Exponential { scale, rate } => scale * rate,
        };
        if d > 0.0 {
            1
        } else if d < 0.0 {
            -1
        } else {
            0
        }
    }
}

/// A monotone section: matrix-size profile `φ`, time profile `ψ`, reference
/// time `t0`, and the covariance of the entry processes.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SectionSpec {
    pub phi: Profile,
    pub psi: Profile,
    pub t0: f64,
    pub covariance: CovarianceFn,
    /// Range searched by [`xi_inv`].
    pub t_range: [f64; 2],
}

impl SectionSpec {
    pub fn validate(&self) -> Result<()> {
        self.covariance.validate()?;
        let [lo, hi] = self.t_range;
        if !(lo < hi && lo.is_finite() && hi.is_finite()) {
            return Err(Error::Domain(format!("invalid time range [{lo}, {hi}]")));
        }
        if !(self.t0 >= lo && self.t0 <= hi) {
            return Err(Error::Domain(format!("t0 = {} outside [{lo}, {hi}]", self.t0)));
        }
        if self.phi.direction() > 0 {
            return Err(Error::Domain("phi must be nonincreasing".into()));
        }
        if self.psi.direction() < 0 {
            return Err(Error::Domain("psi must be nondecreasing".into()));
        }
        if self.phi.direction() == 0 && self.psi.direction() == 0 {
            return Err(Error::Domain("one of phi, psi must be strictly monotone".into()));
        }
        if !(self.phi.eval(hi) > 0.0) {
            return Err(Error::Domain(format!("phi({hi}) must be positive")));
        }
        Ok(())
    }

    fn factor(&self, t: f64) -> Result<f64> {
        let (a, b) = (self.psi.eval(self.t0), self.psi.eval(t));
        let g = if t >= self.t0 {
            self.covariance.evaluate(a, b)?
        } else {
            1.0 / self.covariance.evaluate(b, a)?
        };
        if !(g > 0.0 && g.is_finite()) {
            return Err(Error::Domain(format!("covariance vanishes along the section at t = {t}")));
        }
        Ok(g)
    }

    fn radius(&self, t: f64) -> Result<f64> {
        Ok(self.factor(t)? * self.phi.eval(t).sqrt())
    }
}

/// `Ξ(x, t) = g(t)·Ω(x, φ(t))`, `g(t) = c(ψ(t0), ψ(t))` for `t >= t0` and
/// `1/c(ψ(t), ψ(t0))` otherwise.
pub fn xi(x: f64, t: f64, sec: &SectionSpec) -> Result<UpperHalfPlanePoint> {
    let g = sec.factor(t)?;
    UpperHalfPlanePoint::new(omega(x, sec.phi.eval(t))?.z() * g)
}

const BISECTION_TOL: f64 = 1e-12;
const BISECTION_MAX_ITER: usize = 200;
const MONOTONICITY_PROBES: usize = 257;

/// Inverse of [`xi`] on `sec.t_range`, by bisection on the radial profile
/// `|Ξ(x, t)| = g(t)√φ(t)`.
pub fn xi_inv(zeta: UpperHalfPlanePoint, sec: &SectionSpec) -> Result<(f64, f64)> {
    sec.validate()?;
    let [lo, hi] = sec.t_range;
    let radii: Vec<f64> = (0..MONOTONICITY_PROBES)
        .map(|i| sec.radius(lo + (hi - lo) * i as f64 / (MONOTONICITY_PROBES - 1) as f64))
        .collect::<Result<_>>()?;
    if radii.windows(2).any(|w| w[1] >= w[0]) {
        return Err(Error::Bijectivity(
            "radial profile is not strictly decreasing on the time range".into(),
        ));
    }
    let target = zeta.z().norm();
    let (r_lo, r_hi) = (radii[0], radii[MONOTONICITY_PROBES - 1]);
    if !(target <= r_lo && target >= r_hi) {
        return Err(Error::Domain(format!(
            "|ζ| = {target} outside the section's radial range [{r_hi}, {r_lo}]"
        )));
    }
    let (mut a, mut b) = (lo, hi);
    for _ in 0..BISECTION_MAX_ITER {
        if b - a <= BISECTION_TOL {
            break;
        }
        let mid = 0.5 * (a + b);
        if sec.radius(mid)? > target {
            a = mid;
        } else {
            b = mid;
        }
    }
    let t = 0.5 * (a + b);
    let x = 2.0 * zeta.z().re / sec.factor(t)?;
    Ok((x, t))
}

/// Outcome of [`section_pullback_check`].
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "status", rename_all = "snake_case")]
pub enum PullbackCheck {
    Applicable { max_discrepancy: f64, pairs: usize },
    Inapplicable { reason: String },
}

/// Largest `|kernel_C(Ω_1, ψ(t_1); Ω_2, ψ(t_2)) - G(Ξ(x_1,t_1), Ξ(x_2,t_2))|`
/// over all pairs of the given `(x, t)` points.
pub fn section_pullback_check(sec: &SectionSpec, points: &[(f64, f64)]) -> Result<PullbackCheck> {
    sec.validate()?;
    if !sec.covariance.is_multiplicative() {
        return Ok(PullbackCheck::Inapplicable {
            reason: "covariance is not multiplicative along the section".into(),
        });
    }
    let mut worst = 0.0f64;
    let mut pairs = 0;
    for (i, &p) in points.iter().enumerate() {
        for &q in &points[i + 1..] {
            let ((x1, t1), (x2, t2)) = if p.1 <= q.1 { (p, q) } else { (q, p) };
            let z1 = omega(x1, sec.phi.eval(t1))?;
            let z2 = omega(x2, sec.phi.eval(t2))?;
            let k = kernel_c(z1, sec.psi.eval(t1), z2, sec.psi.eval(t2), &sec.covariance)?;
            let g = green_halfplane(xi(x1, t1, sec)?, xi(x2, t2, sec)?);
            worst = worst.max((k - g).abs());
            pairs += 1;
        }
    }
    Ok(PullbackCheck::Applicable {
        max_discrepancy: worst,
        pairs,
    })
}

/// Kernel integrated against normalized indicator test functions of
/// `ε x ε` squares centred at the points, by a midpoint rule with
/// `stencil x stencil` cells. Coincident cells at unit covariance use the
/// exact cell average of the logarithmic singularity.
pub fn gram_matrix(points: &[(UpperHalfPlanePoint, f64)], c: &CovarianceFn, eps: f64) -> Result<Vec<f64>> {
    match gram_with_stencil(points, c, eps, 5) {
        Ok(g) if g.iter().all(|v| v.is_finite()) => Ok(g),
        _ => {
            let g = gram_with_stencil(points, c, eps, 7)?;
            if g.iter().all(|v| v.is_finite()) {
                Ok(g)
            } else {
                Err(Error::Numerical("Gram matrix is not finite after stencil refinement".into()))
            }
        }
    }
}

fn gram_with_stencil(points: &[(UpperHalfPlanePoint, f64)], c: &CovarianceFn, eps: f64, stencil: usize) -> Result<Vec<f64>> {
    if !(eps > 0.0 && eps.is_finite()) {
        return Err(Error::Domain(format!("mollifier width must be positive, got {eps}")));
    }
    if points.is_empty() {
        return Err(Error::Domain("no points".into()));
    }
    let h = eps / stencil as f64;
    let half = (stencil as f64 - 1.0) / 2.0;
    let offsets: Vec<Complex64> = (0..stencil * stencil)
        .map(|k| Complex64::new(((k % stencil) as f64 - half) * h, ((k / stencil) as f64 - half) * h))
        .collect();
    let nodes: Vec<Vec<Complex64>> = points
        .iter()
        .map(|(p, _)| {
            if p.z().im <= eps / 2.0 {
                return Err(Error::Domain(format!(
                    "point {} is within the mollifier width of the real axis",
                    p.z()
                )));
            }
            Ok(offsets.iter().map(|o| p.z() + o).collect())
        })
        .collect::<Result<_>>()?;
    let m = points.len();
    let cells = (stencil * stencil) as f64;
    let mut gram = vec![0.0; m * m];
    for a in 0..m {
        for b in a..m {
            let cv = c.evaluate(points[a].1, points[b].1)?;
            let mut sum = 0.0;
            for z in &nodes[a] {
                for w in &nodes[b] {
                    let v = if cv == 1.0 && z == w {
                        ((2.0 * z.im).ln() - h.ln() - UNIT_SQUARE_LOG_DISTANCE) / (2.0 * PI)
                    } else {
                        kernel_value(*z, *w, cv)
                    };
                    sum += v;
                }
            }
            let v = sum / (cells * cells);
            gram[a * m + b] = v;
            gram[b * m + a] = v;
        }
    }
    Ok(gram)
}

/// Minimum eigenvalue of [`gram_matrix`].
pub fn gram_pd_check(points: &[(UpperHalfPlanePoint, f64)], c: &CovarianceFn, eps: f64) -> Result<f64> {
    let g = gram_matrix(points, c, eps)?;
    let m = points.len();
    let mat = Mat::from_fn(m, m, |i, j| g[i * m + j]);
    mat.selfadjoint_eigenvalues(Side::Lower)
        .into_iter()
        .min_by(f64::total_cmp)
        .ok_or_else(|| Error::Numerical("empty Gram spectrum".into()))
}

/// Configuration `index` of `points` upper half-plane points with times,
/// drawn from a keyed stream: `Re z ∈ [-2, 2)`, `Im z ∈ [0.2, 2)`, `t ∈ [0, 2)`.
pub fn random_configuration(seed: u64, index: u64, points: usize) -> Vec<(UpperHalfPlanePoint, f64)> {
    use rand::Rng;
    let mut rng = crate::seed::keyed_rng(&[seed, index]);
    (0..points)
        .map(|_| {
            let z = Complex64::new(rng.gen_range(-2.0..2.0), rng.gen_range(0.2..2.0));
            (UpperHalfPlanePoint(z), rng.gen_range(0.0..2.0))
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::{Rng, SeedableRng};
    use rand_xoshiro::Xoshiro256PlusPlus;

    fn p(re: f64, im: f64) -> UpperHalfPlanePoint {
        UpperHalfPlanePoint::from_parts(re, im).unwrap()
    }

    fn ou_section(phi: Profile, psi: Profile) -> SectionSpec {
        SectionSpec { phi, psi, t0: 0.0, covariance: CovarianceFn::ou(1.0), t_range: [-2.0, 2.0] }
    }

    #[test]
    fn kernel_examples() {
        let ln3 = 3f64.ln() / (2.0 * PI);
        let one = CovarianceFn::constant(1.0);
        assert!((kernel_c(p(0.0, 1.0), 0.0, p(0.0, 2.0), 0.0, &one).unwrap() - ln3).abs() < 1e-15);
        let half = CovarianceFn::constant(0.5);
        assert!((kernel_c(p(0.0, 1.0), 0.0, p(0.0, 1.0), 1.0, &half).unwrap() - ln3).abs() < 1e-15);
        let edge = kernel_c(p(0.3, 1e-12), 0.0, p(-1.0, 2.0), 1.0, &half).unwrap();
        assert!(edge.abs() < 1e-10);
        assert_eq!(kernel_c(p(0.2, 0.7), 1.0, p(0.2, 0.7), 1.0, &one).unwrap(), f64::INFINITY);
    }

    #[test]
    fn green_examples() {
        assert!((green_halfplane(p(0.0, 1.0), p(0.0, 2.0)) - 3f64.ln() / (2.0 * PI)).abs() < 1e-15);
        assert_eq!(green_halfplane(p(1.0, 1.0), p(1.0, 1.0)), f64::INFINITY);
    }

    #[test]
    fn omega_examples() {
        assert_eq!(omega(0.0, 1.0).unwrap().z(), Complex64::new(0.0, 1.0));
        let z = omega(2.0, 4.0).unwrap().z();
        assert!((z - Complex64::new(1.0, 3f64.sqrt())).norm() < 1e-15);
        assert!((z.norm_sqr() - 4.0).abs() < 1e-14);
        assert_eq!(omega_inv(p(0.0, 3.0)), (0.0, 9.0));
        assert!(omega(2.0, 1.0).is_err());
        assert!(omega(0.0, 0.0).is_err());
        let near = omega(2.0 - 1e-12, 1.0).unwrap();
        assert!(near.z().im < 1e-5);
    }

    #[test]
    fn xi_examples() {
        let sec = ou_section(Profile::Constant { value: 1.0 }, Profile::Linear { intercept: 0.0, slope: 1.0 });
        assert!((xi(0.0, 0.0, &sec).unwrap().z() - Complex64::new(0.0, 1.0)).norm() < 1e-15);
        let v = xi(0.0, 1.0, &sec).unwrap().z();
        assert!((v - Complex64::new(0.0, (-1.0f64).exp())).norm() < 1e-15);
        let (x, t) = xi_inv(xi(0.5, -0.7, &sec).unwrap(), &sec).unwrap();
        assert!((x - 0.5).abs() < 1e-10 && (t + 0.7).abs() < 1e-10);
    }

    #[test]
    fn xi_inv_rejects_flat_profile() {
        let mut sec = ou_section(Profile::Constant { value: 1.0 }, Profile::Linear { intercept: 0.0, slope: 1.0 });
        sec.covariance = CovarianceFn::constant(1.0);
        assert!(matches!(xi_inv(p(0.0, 1.0), &sec), Err(Error::Bijectivity(_))));
    }

    #[test]
    fn pullback_identity() {
        let mut rng = Xoshiro256PlusPlus::seed_from_u64(9);
        let sec = ou_section(Profile::Constant { value: 1.0 }, Profile::Linear { intercept: 0.0, slope: 1.0 });
        let pts: Vec<(f64, f64)> = (0..15).map(|_| (rng.gen_range(-1.9..1.9), rng.gen_range(-2.0..2.0))).collect();
        match section_pullback_check(&sec, &pts).unwrap() {
            PullbackCheck::Applicable { max_discrepancy, pairs } => {
                assert_eq!(pairs, 105);
                assert!(max_discrepancy <= 1e-10, "{max_discrepancy}");
            }
            other => panic!("{other:?}"),
        }
        let mut stat = ou_section(Profile::Linear { intercept: 3.0, slope: -0.5 }, Profile::Constant { value: 0.0 });
        stat.covariance = CovarianceFn::constant(1.0);
        let pts: Vec<(f64, f64)> = (0..10).map(|_| (rng.gen_range(-1.5..1.5), rng.gen_range(-2.0..2.0))).collect();
        match section_pullback_check(&stat, &pts).unwrap() {
            PullbackCheck::Applicable { max_discrepancy, .. } => assert!(max_discrepancy <= 1e-10),
            other => panic!("{other:?}"),
        }
        let same = section_pullback_check(&sec, &[(0.3, 0.5), (-0.4, 0.5)]).unwrap();
        assert!(matches!(same, PullbackCheck::Applicable { max_discrepancy, .. } if max_discrepancy <= 1e-12));
    }

    #[test]
    fn pullback_inapplicable_for_tables() {
        let mut sec = ou_section(Profile::Constant { value: 1.0 }, Profile::Linear { intercept: 0.0, slope: 1.0 });
        sec.covariance = CovarianceFn::TableInterpolated {
            times: vec![-5.0, 5.0],
            values: vec![vec![1.0, 0.5], vec![0.5, 1.0]],
        };
        assert!(matches!(
            section_pullback_check(&sec, &[(0.0, 0.0), (0.1, 1.0)]).unwrap(),
            PullbackCheck::Inapplicable { .. }
        ));
    }

    #[test]
    fn gram_examples() {
        let ou = CovarianceFn::ou(1.0);
        let single = gram_pd_check(&[(p(0.1, 1.0), 0.0)], &ou, 0.05).unwrap();
        assert!(single > 0.0);
        let pts = [(p(0.1, 1.0), 0.3), (p(0.1, 1.0), 0.3)];
        let g = gram_matrix(&pts, &ou, 0.05).unwrap();
        let quad = g[0] - g[1] - g[2] + g[3];
        assert!(quad.abs() < 1e-12);
        assert!(gram_pd_check(&[(p(0.0, 0.01), 0.0)], &ou, 0.05).is_err());
    }

    #[test]
    fn gram_random_configurations() {
        let mut rng = Xoshiro256PlusPlus::seed_from_u64(2);
        let ou = CovarianceFn::ou(1.0);
        for _ in 0..5 {
            let pts: Vec<_> = (0..10)
                .map(|_| (p(rng.gen_range(-2.0..2.0), rng.gen_range(0.2..2.0)), rng.gen_range(0.0..2.0)))
                .collect();
            assert!(gram_pd_check(&pts, &ou, 0.05).unwrap() >= -1e-9);
        }
    }

    #[test]
    fn log_distance_constant() {
        let want = 2f64.ln() / 3.0 + PI / 3.0 - 25.0 / 12.0;
        assert!((UNIT_SQUARE_LOG_DISTANCE - want).abs() < 1e-15);
    }
}
