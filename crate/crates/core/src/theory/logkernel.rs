//! Logarithmic-kernel evaluator.
//!
//! With `z = √b_p e^{iθ}`, `w = √b_q e^{iφ}` on the upper semicircles and
//! `ρ = c b_pq / √(b_p b_q)`, the covariance becomes
//!
//! `(2 k_p k_q / βπ)(1/2π) ∫∫ x_p^{k_p-1} x_q^{k_q-1} K(θ, φ) x_p' x_q' dθ dφ`
//!
//! where `x_p = 2√b_p cos θ`, `x_p' = 2√b_p sin θ` and
//! `K = ½ ln[((1-ρ)² + 4ρ sin²((θ+φ)/2)) / ((1-ρ)² + 4ρ sin²((θ-φ)/2))]`.
//!
//! The inner integral is split at `φ = θ` and each half is mapped by a cubic
//! grading toward the split point, so the logarithmic singularity of the
//! touching case `ρ = 1` sits at a quadrature endpoint. The outer variable is
//! graded toward both ends of `[0, π]`.

use gauss_quad::GaussLegendre;

use super::{CovarianceQuery, QuadratureParams};
use crate::entry_process::Beta;
use crate::error::{Error, Result};

use std::f64::consts::PI;

/// Inner moments `Σ_j V_ij (2√b_q cos φ_ij)^m` per outer node, reusable
/// across degrees up to `k_max`.
#[derive(Clone, Debug)]
pub struct LogKernelGeometry {
    beta: Beta,
    k_max: u32,
    zero: bool,
    /// `(x_p(θ_i), weight_i)`.
    outer: Vec<(f64, f64)>,
    /// `k_max` moments per outer node.
    moments: Vec<f64>,
}

fn unit_rule(n: usize) -> Result<Vec<(f64, f64)>> {
    let rule = GaussLegendre::new(n).map_err(|e| Error::Numerical(format!("Gauss-Legendre rule: {e}")))?;
    Ok(rule
        .as_node_weight_pairs()
        .iter()
        .map(|&(x, w)| (0.5 * (x + 1.0), 0.5 * w))
        .collect())
}

fn log_kernel(rho: f64, sum: f64, diff: f64) -> f64 {
    let gap = (1.0 - rho) * (1.0 - rho);
    let s = (0.5 * sum).sin();
    let d = (0.5 * diff).sin();
    0.5 * ((gap + 4.0 * rho * s * s).ln() - (gap + 4.0 * rho * d * d).ln())
}

impl LogKernelGeometry {
    pub fn new(
        b_p: f64,
        b_q: f64,
        b_pq: f64,
        c: f64,
        beta: Beta,
        k_max: u32,
        quad: &QuadratureParams,
    ) -> Result<Self> {
        CovarianceQuery { k_p: 1, k_q: 1, b_p, b_q, b_pq, c, beta }.validate()?;
        quad.validate()?;
        let rho = c * b_pq / (b_p * b_q).sqrt();
        if rho == 0.0 {
            return Ok(LogKernelGeometry { beta, k_max, zero: true, outer: Vec::new(), moments: Vec::new() });
        }
        match Self::build(b_p, b_q, rho, beta, k_max, quad.n_nodes) {
            Ok(g) => Ok(g),
            Err(_) => Self::build(b_p, b_q, rho, beta, k_max, quad.n_nodes + 1).map_err(|_| {
                Error::SingularConfiguration(format!(
                    "log kernel is not finite at the quadrature nodes (rho = {rho})"
                ))
            }),
        }
    }

    fn build(b_p: f64, b_q: f64, rho: f64, beta: Beta, k_max: u32, n: usize) -> Result<Self> {
        let outer_rule = unit_rule(n)?;
        let inner_rule = unit_rule((n / 2).max(2))?;
        let (sp, sq) = (2.0 * b_p.sqrt(), 2.0 * b_q.sqrt());
        let km = k_max.max(1) as usize;
        let mut outer = Vec::with_capacity(n);
        let mut moments = vec![0.0; n * km];
        for (i, &(u, wu)) in outer_rule.iter().enumerate() {
            let theta = PI * u * u * (3.0 - 2.0 * u);
            let jac = PI * 6.0 * u * (1.0 - u);
            outer.push((sp * theta.cos(), wu * jac * sp * theta.sin()));
            let row = &mut moments[i * km..(i + 1) * km];
            for (span, sign) in [(theta, 1.0), (PI - theta, -1.0)] {
                for &(v, wv) in &inner_rule {
                    let offset = span * v * v * v;
                    let phi = theta - sign * offset;
                    let k = log_kernel(rho, theta + phi, sign * offset);
                    let weight = wv * 3.0 * span * v * v * k * sq * phi.sin();
                    if !weight.is_finite() {
                        return Err(Error::Numerical("non-finite log-kernel node".into()));
                    }
                    let x = sq * phi.cos();
                    let mut power = 1.0;
                    for slot in row.iter_mut() {
                        *slot += weight * power;
                        power *= x;
                    }
                }
            }
        }
        Ok(LogKernelGeometry { beta, k_max, zero: false, outer, moments })
    }

    pub fn covariance(&self, k_p: u32, k_q: u32) -> Result<f64> {
        if k_p == 0 || k_q == 0 {
            return Err(Error::InvalidQuery("degrees must be at least 1".into()));
        }
        if k_q > self.k_max {
            return Err(Error::InvalidQuery(format!("k_q = {k_q} exceeds the prepared maximum {}", self.k_max)));
        }
        if (k_p + k_q) % 2 == 1 || self.zero {
            return Ok(0.0);
        }
        let km = self.moments.len() / self.outer.len();
        let mut total = 0.0;
        for (i, &(x, w)) in self.outer.iter().enumerate() {
            total += w * x.powi(k_p as i32 - 1) * self.moments[i * km + k_q as usize - 1];
        }
        let prefactor = 2.0 * (k_p * k_q) as f64 / (self.beta.as_f64() * PI) / (2.0 * PI);
        Ok(prefactor * total)
    }
}

/// `covariance_logkernel`.
pub fn covariance_logkernel(q: &CovarianceQuery, quad: &QuadratureParams) -> Result<f64> {
    q.validate()?;
    if (q.k_p + q.k_q) % 2 == 1 {
        return Ok(0.0);
    }
    LogKernelGeometry::new(q.b_p, q.b_q, q.b_pq, q.c, q.beta, q.k_q, quad)?.covariance(q.k_p, q.k_q)
}
