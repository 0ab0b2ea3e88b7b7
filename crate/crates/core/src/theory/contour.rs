//! Double contour integral evaluator.
//!
//! `(2/β)(2πi)^{-2} ∬ (z + b_p/z)^{k_p} (w + b_q/w)^{k_q} a (a z - w)^{-2} dz dw`
//! with `a = c b_pq / b_p`, over `|z| = √b_p (1-δ)` and `|w| = √b_q`. Both
//! circles are discretized by the trapezoid rule in the angle.

use num_complex::Complex64;

use super::{CovarianceQuery, QuadratureParams};
use crate::entry_process::Beta;
use crate::error::{Error, Result};

const POLE_CLEARANCE: f64 = 1e-6;
const IMAG_TOLERANCE: f64 = 1e-9;

/// Node data for one `(b_p, b_q, b_pq, c, β)` configuration, reusable across
/// degrees.
#[derive(Clone, Debug)]
pub struct ContourGeometry {
    b_p: f64,
    b_q: f64,
    beta: Beta,
    z: Vec<Complex64>,
    w: Vec<Complex64>,
    /// `a z_j w_l / (a z_j - w_l)^2`, row-major in `(j, l)`; empty when `a = 0`.
    kernel: Vec<Complex64>,
}

impl ContourGeometry {
    pub fn new(b_p: f64, b_q: f64, b_pq: f64, c: f64, beta: Beta, quad: &QuadratureParams) -> Result<Self> {
        CovarianceQuery { k_p: 1, k_q: 1, b_p, b_q, b_pq, c, beta }.validate()?;
        quad.validate()?;
        let n = quad.n_nodes;
        let a = c * b_pq / b_p;
        let rz = b_p.sqrt() * (1.0 - quad.delta);
        let rw = b_q.sqrt();
        let gap = rw - a * rz;
        if a > 0.0 && gap < POLE_CLEARANCE * rw.max(1.0) {
            return Err(Error::SingularConfiguration(format!(
                "pole at distance {gap:e} from the outer contour; increase delta"
            )));
        }
        let circle = |r: f64| -> Vec<Complex64> {
            (0..n)
                .map(|j| Complex64::from_polar(r, 2.0 * std::f64::consts::PI * j as f64 / n as f64))
                .collect()
        };
        let z = circle(rz);
        let w = circle(rw);
        let kernel = if a == 0.0 {
            Vec::new()
        } else {
            let mut k = Vec::with_capacity(n * n);
            for zj in &z {
                for wl in &w {
                    let d = a * zj - wl;
                    k.push(a * zj * wl / (d * d));
                }
            }
            k
        };
        Ok(ContourGeometry { b_p, b_q, beta, z, w, kernel })
    }

    fn powers(points: &[Complex64], b: f64, k: u32) -> Vec<Complex64> {
        points.iter().map(|p| (p + b / p).powu(k)).collect()
    }

    /// Raw complex value of the normalized double sum.
    pub fn integral(&self, k_p: u32, k_q: u32) -> Complex64 {
        if self.kernel.is_empty() {
            return Complex64::new(0.0, 0.0);
        }
        let n = self.z.len();
        let pz = Self::powers(&self.z, self.b_p, k_p);
        let qw = Self::powers(&self.w, self.b_q, k_q);
        let mut total = Complex64::new(0.0, 0.0);
        for (j, row) in self.kernel.chunks_exact(n).enumerate() {
            let inner: Complex64 = row.iter().zip(&qw).map(|(g, q)| g * q).sum();
            total += pz[j] * inner;
        }
        total * (2.0 / self.beta.as_f64()) / (n * n) as f64
    }

    pub fn covariance(&self, k_p: u32, k_q: u32) -> Result<f64> {
        if k_p == 0 || k_q == 0 {
            return Err(Error::InvalidQuery("degrees must be at least 1".into()));
        }
        let v = self.integral(k_p, k_q);
        if !(v.re.is_finite() && v.im.is_finite()) {
            return Err(Error::Numerical("non-finite contour sum".into()));
        }
        if v.im.abs() > IMAG_TOLERANCE * (1.0 + v.re.abs()) {
            return Err(Error::Numerical(format!(
                "contour sum has imaginary part {:e} (real part {})",
                v.im, v.re
            )));
        }
        Ok(v.re)
    }
}

/// `covariance_contour`.
pub fn covariance_contour(q: &CovarianceQuery, quad: &QuadratureParams) -> Result<f64> {
    q.validate()?;
    ContourGeometry::new(q.b_p, q.b_q, q.b_pq, q.c, q.beta, quad)?.covariance(q.k_p, q.k_q)
}
