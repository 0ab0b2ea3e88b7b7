//! Covariance of rescaled Chebyshev traces `Σ_s T_k(λ_s / (2√(b L)))`.

use num_bigint::BigInt;
use num_rational::BigRational;
use num_traits::{ToPrimitive, Zero};

use super::combinatorics::{central_binomial_term, chebyshev_coefficients};
use super::series::pair_from_profiles;
use super::CovarianceQuery;
use crate::error::{Error, Result};

pub const CHEBYSHEV_MAX_DEGREE: u32 = 32;

/// `δ_{k_p k_q}·(k/(2β))·(c b_pq / √(b_p b_q))^k`.
pub fn chebyshev_covariance_closed(q: &CovarianceQuery) -> Result<f64> {
    q.validate()?;
    if q.k_p != q.k_q {
        return Ok(0.0);
    }
    let ratio = q.c * q.b_pq / (q.b_p * q.b_q).sqrt();
    Ok(q.k_p as f64 / (2.0 * q.beta.as_f64()) * ratio.powi(q.k_p as i32))
}

/// `Σ_j a_j 2^{-j} binom(j, (j-r)/2)` for `r = 0..=k`, exactly.
fn unit_profile(k: u32) -> Vec<BigRational> {
    let coeffs = chebyshev_coefficients(k);
    (0..=k)
        .map(|r| {
            let mut acc = BigRational::zero();
            for (j, a) in coeffs.iter().enumerate() {
                let j = j as u32;
                let binom = central_binomial_term(j, r);
                if a.is_zero() || binom.is_zero() {
                    continue;
                }
                let den = BigInt::from(1u8) << j;
                acc += BigRational::new(a * BigInt::from(binom), den);
            }
            acc
        })
        .collect()
}

/// Cycle profile of the rescaled Chebyshev trace of degree `k` on a set of
/// relative size `b`: expands `T_k(x/(2√b))` in monomials of `L^{-1/2}x`.
pub fn chebyshev_profile(k: u32, b: f64) -> Result<Vec<f64>> {
    if k == 0 || k > CHEBYSHEV_MAX_DEGREE {
        return Err(Error::Domain(format!(
            "Chebyshev degree {k} outside 1..={CHEBYSHEV_MAX_DEGREE}"
        )));
    }
    Ok(unit_profile(k)
        .into_iter()
        .enumerate()
        .map(|(r, a)| a.to_f64().unwrap_or(f64::NAN) * b.powf(-(r as f64) / 2.0))
        .collect())
}

/// Bilinear expansion of the Chebyshev covariance over monomial covariances
/// `Σ_{j,l} a_j a_l (2√b_p)^{-j} (2√b_q)^{-l} cov(j, l)`, grouped by cycle
/// length with the monomial sums taken exactly.
pub fn chebyshev_covariance_expanded(q: &CovarianceQuery) -> Result<f64> {
    q.validate()?;
    let vp = chebyshev_profile(q.k_p, q.b_p)?;
    let vq = chebyshev_profile(q.k_q, q.b_q)?;
    Ok(pair_from_profiles(&vp, &vq, q.c * q.b_pq, q.beta))
}
