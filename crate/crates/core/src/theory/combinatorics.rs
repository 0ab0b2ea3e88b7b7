//! Exact Catalan and binomial arithmetic.

use num_bigint::BigUint;
use num_rational::BigRational;
use num_traits::{One, ToPrimitive, Zero};

use crate::error::{Error, Result};

pub const CATALAN_MAX: u32 = 64;
pub const CONVOLUTION_MAX_S: u32 = 32;

/// `binom(n, k)`, zero when `k > n`.
pub fn binomial(n: u64, k: u64) -> BigUint {
    if k > n {
        return BigUint::zero();
    }
    let k = k.min(n - k);
    let mut acc = BigUint::one();
    for i in 0..k {
        acc *= n - i;
        acc /= i + 1;
    }
    acc
}

/// `binom(n, (n - r)/2)` as used by the covariance series: zero unless the
/// lower index is an integer in `[0, n]`.
pub fn central_binomial_term(n: u32, r: u32) -> BigUint {
    if r > n || (n - r) % 2 != 0 {
        return BigUint::zero();
    }
    binomial(n as u64, ((n - r) / 2) as u64)
}

pub(crate) fn central_binomial_f64(n: u32, r: u32) -> f64 {
    central_binomial_term(n, r).to_f64().unwrap_or(f64::INFINITY)
}

/// The `n`-th Catalan number, `n <= 64`.
pub fn catalan(n: u32) -> Result<BigUint> {
    if n > CATALAN_MAX {
        return Err(Error::Domain(format!("catalan index {n} exceeds {CATALAN_MAX}")));
    }
    Ok(binomial(2 * n as u64, n as u64) / (n as u64 + 1))
}

/// Catalan number at a half-integer-capable index `twice / 2`; zero unless it
/// is a nonnegative integer.
pub fn catalan_half(twice: i64) -> Result<BigUint> {
    if twice < 0 || twice % 2 != 0 {
        return Ok(BigUint::zero());
    }
    catalan((twice / 2) as u32)
}

/// `Σ_{s_1+...+s_r=S} Π C_{s_i} = binom(2S+r, S)·r/(2S+r)`.
pub fn catalan_convolution(r: u32, s: u32) -> Result<BigUint> {
    if r == 0 {
        return Err(Error::Domain("convolution length r must be at least 1".into()));
    }
    if s > CONVOLUTION_MAX_S {
        return Err(Error::Domain(format!("S = {s} exceeds {CONVOLUTION_MAX_S}")));
    }
    let n = 2 * s as u64 + r as u64;
    let numerator = binomial(n, s as u64) * r;
    assert!(
        (&numerator % n).is_zero(),
        "binom(2S+r,S)·r is divisible by 2S+r"
    );
    Ok(numerator / n)
}

/// Direct enumeration of compositions of `s` into `r` nonnegative parts.
pub fn catalan_convolution_bruteforce(r: u32, s: u32) -> Result<BigUint> {
    if r == 0 {
        return Err(Error::Domain("convolution length r must be at least 1".into()));
    }
    let table: Vec<BigUint> = (0..=s).map(catalan).collect::<Result<_>>()?;
    fn walk(parts_left: u32, remaining: u32, table: &[BigUint], product: &BigUint, total: &mut BigUint) {
        if parts_left == 1 {
            *total += product * &table[remaining as usize];
            return;
        }
        for first in 0..=remaining {
            let next = product * &table[first as usize];
            walk(parts_left - 1, remaining - first, table, &next, total);
        }
    }
    let mut total = BigUint::zero();
    walk(r, s, &table, &BigUint::one(), &mut total);
    Ok(total)
}

fn rational(n: BigUint) -> BigRational {
    BigRational::from_integer(n.into())
}

/// Single-set variance limit written with Catalan numbers and their
/// `r`-fold convolutions (real symmetric case, unit scale).
pub fn variance_catalan_form(k: u32) -> Result<BigRational> {
    let kk = rational(BigUint::from(k) * k);
    let k = k as i64;
    let two = rational(BigUint::from(2u32));
    let first = &two * &kk * rational(catalan_half(k - 1)?.pow(2));
    let second = &kk * rational(catalan_half(k)?.pow(2));
    let mut total = first + second;
    for r in 3..=k {
        if (k - r) % 2 != 0 {
            continue;
        }
        let conv = catalan_convolution(r as u32, ((k - r) / 2) as u32)?;
        let coeff = &two * &kk / rational(BigUint::from(r as u64));
        total += coeff * rational(conv.pow(2));
    }
    Ok(total)
}

/// The same limit as `Σ_r 2r·binom(k, (k-r)/2)²`.
pub fn variance_binomial_form(k: u32) -> BigRational {
    let mut total = BigUint::zero();
    for r in 1..=k {
        total += BigUint::from(2 * r) * central_binomial_term(k, r).pow(2);
    }
    rational(total)
}

/// Monomial coefficients of `T_k`, lowest degree first.
pub fn chebyshev_coefficients(k: u32) -> Vec<num_bigint::BigInt> {
    use num_bigint::BigInt;
    let mut prev = vec![BigInt::one()];
    if k == 0 {
        return prev;
    }
    let mut cur = vec![BigInt::zero(), BigInt::one()];
    for _ in 1..k {
        let mut next = vec![BigInt::zero(); cur.len() + 1];
        for (j, a) in cur.iter().enumerate() {
            next[j + 1] += a * 2;
        }
        for (j, a) in prev.iter().enumerate() {
            next[j] -= a;
        }
        prev = cur;
        cur = next;
    }
    cur
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn catalan_examples() {
        assert_eq!(catalan(0).unwrap(), BigUint::from(1u32));
        assert_eq!(catalan(3).unwrap(), BigUint::from(5u32));
        assert_eq!(catalan(10).unwrap(), BigUint::from(16796u32));
        assert!(catalan(65).is_err());
    }

    #[test]
    fn catalan_matches_recurrence() {
        let mut c = vec![BigUint::one()];
        for n in 0..30usize {
            let next: BigUint = (0..=n).map(|i| &c[i] * &c[n - i]).sum();
            c.push(next);
        }
        for (n, v) in c.iter().enumerate() {
            assert_eq!(&catalan(n as u32).unwrap(), v);
        }
    }

    #[test]
    fn convolution_examples() {
        assert_eq!(catalan_convolution(1, 2).unwrap(), BigUint::from(2u32));
        assert_eq!(catalan_convolution(2, 2).unwrap(), BigUint::from(5u32));
        assert_eq!(catalan_convolution(3, 0).unwrap(), BigUint::from(1u32));
        assert_eq!(catalan_convolution_bruteforce(2, 2).unwrap(), BigUint::from(5u32));
        assert!(catalan_convolution(0, 1).is_err());
        assert!(catalan_convolution(1, 33).is_err());
    }

    #[test]
    fn variance_forms_small_k() {
        // k = 1: 2·1·1 = 2; k = 2: 4; k = 3: 18 + 6 = 24.
        for (k, want) in [(1u32, 2u32), (2, 4), (3, 24)] {
            let w = rational(BigUint::from(want));
            assert_eq!(variance_binomial_form(k), w);
            assert_eq!(variance_catalan_form(k).unwrap(), w);
        }
    }

    #[test]
    fn chebyshev_coefficient_examples() {
        use num_bigint::BigInt;
        let t4: Vec<BigInt> = [1, 0, -8, 0, 8].iter().map(|&v| BigInt::from(v)).collect();
        assert_eq!(chebyshev_coefficients(4), t4);
        assert_eq!(chebyshev_coefficients(1), vec![BigInt::zero(), BigInt::one()]);
    }
}
