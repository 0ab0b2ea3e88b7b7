//! Finite binomial series for the limiting covariance.
//!
//! A polynomial statistic `Σ_j α_j L^{-j/2} tr X_B^j` enters the covariance
//! only through its cycle profile `v(r) = Σ_j α_j binom(j, (j-r)/2) b^{(j-r)/2}`,
//! and two statistics have limiting covariance
//! `(2/β) Σ_r r (c b_pq)^r v_p(r) v_q(r)`.

use super::combinatorics::central_binomial_f64;
use super::CovarianceQuery;
use crate::entry_process::Beta;
use crate::error::Result;

/// Profile of `L^{-k/2} tr X_B^k`; index `r` runs over `0..=k`.
pub fn trace_profile(k: u32, b: f64) -> Vec<f64> {
    (0..=k)
        .map(|r| {
            if (k - r) % 2 != 0 {
                0.0
            } else {
                central_binomial_f64(k, r) * b.powi(((k - r) / 2) as i32)
            }
        })
        .collect()
}

/// `(2/β) Σ_{r>=1} r x^r v_p(r) v_q(r)` with `x = c·b_pq`.
pub fn pair_from_profiles(vp: &[f64], vq: &[f64], x: f64, beta: Beta) -> f64 {
    let top = vp.len().min(vq.len());
    let mut sum = 0.0;
    let mut xr = 1.0;
    for r in 1..top {
        xr *= x;
        sum += r as f64 * xr * vp[r] * vq[r];
    }
    2.0 / beta.as_f64() * sum
}

/// `covariance_series`.
pub fn covariance_series(q: &CovarianceQuery) -> Result<f64> {
    q.validate()?;
    Ok(pair_from_profiles(
        &trace_profile(q.k_p, q.b_p),
        &trace_profile(q.k_q, q.b_q),
        q.c * q.b_pq,
        q.beta,
    ))
}
