//! Covariance values checked against references computed outside this crate:
//! the double integral of the logarithmic kernel over two semicircles,
//! integrated adaptively with the inner integral split at its singular
//! point, and an in-test cosine projection onto Chebyshev polynomials.

use std::f64::consts::PI;

use wigner_clt::entry_process::Beta;
use wigner_clt::theory::combinatorics::variance_catalan_form;
use wigner_clt::theory::{
    chebyshev_covariance_closed, chebyshev_covariance_expanded, covariance_contour, covariance_logkernel,
    covariance_series, CovarianceQuery, QuadratureParams,
};

fn q(k_p: u32, k_q: u32, b_p: f64, b_q: f64, b_pq: f64, c: f64, beta: u8) -> CovarianceQuery {
    CovarianceQuery { k_p, k_q, b_p, b_q, b_pq, c, beta: Beta::try_from(beta).unwrap() }
}

fn close(a: f64, b: f64, tol: f64) -> bool {
    (a - b).abs() <= tol * b.abs().max(1.0)
}

/// `(query, value)` from adaptive quadrature of the kernel integral.
fn frozen_trace_pairs() -> Vec<(CovarianceQuery, f64)> {
    let e = (-0.5f64).exp();
    vec![
        (q(1, 1, 1.0, 0.5, 0.5, e, 1), 0.6065306597126334),
        (q(2, 3, 1.0, 0.5, 0.5, 0.6, 1), 0.0),
        (q(3, 3, 1.0, 0.5, 0.5, e, 1), 2.896735588818173),
        (q(4, 2, 2.0, 1.0, 0.75, 0.3, 2), 0.81),
        (q(3, 5, 1.5, 0.7, 0.4, 0.9, 1), 16.855776000000006),
        (q(2, 2, 1.0, 1.0, 1.0, 1.0, 1), 4.000000000000011),
        (q(4, 4, 1.0, 1.0, 1.0, 1.0, 1), 72.00000000000001),
        (q(3, 1, 1.0, 1.0, 1.0, 1.0, 2), 3.000000000000002),
        (q(3, 3, 2.0, 2.0, 2.0, 1.0, 1), 191.99999999999974),
    ]
}

#[test]
fn trace_covariances_match_kernel_quadrature() {
    let quad = QuadratureParams::default();
    for (query, want) in frozen_trace_pairs() {
        let s = covariance_series(&query).unwrap();
        let c = covariance_contour(&query, &quad).unwrap();
        let l = covariance_logkernel(&query, &quad).unwrap();
        assert!(close(s, want, 1e-12), "series {query:?}: {s} vs {want}");
        assert!(close(c, want, 1e-8), "contour {query:?}: {c} vs {want}");
        assert!(close(l, want, 1e-8), "log-kernel {query:?}: {l} vs {want}");
    }
}

#[test]
fn chebyshev_covariances_match_kernel_quadrature() {
    let e = (-0.5f64).exp();
    let cases = [
        (q(3, 3, 1.0, 0.5, 0.5, e, 1), 0.11833263699614635),
        (q(2, 4, 1.0, 0.5, 0.5, e, 1), 0.0),
        (q(4, 4, 1.0, 0.5, 0.5, e, 2), 0.033833820809153155),
        (q(1, 3, 1.0, 1.0, 1.0, 1.0, 1), 0.0),
        (q(2, 2, 1.0, 1.0, 1.0, (-0.25f64).exp(), 1), 0.6065306597126334),
    ];
    for (query, want) in cases {
        let closed = chebyshev_covariance_closed(&query).unwrap();
        let expanded = chebyshev_covariance_expanded(&query).unwrap();
        assert!((closed - want).abs() < 1e-12, "{query:?}: {closed} vs {want}");
        assert!((expanded - want).abs() < 1e-10, "{query:?}: {expanded} vs {want}");
    }
}

/// `a_j = (2/π)∫_0^π (2√b cos θ)^k cos(jθ) dθ` by the midpoint rule, exact
/// for trigonometric polynomials of degree below twice the node count.
fn cosine_coefficients(k: u32, b: f64) -> Vec<f64> {
    let n = 256;
    (0..=k)
        .map(|j| {
            let mut s = 0.0;
            for i in 0..n {
                let th = PI * (i as f64 + 0.5) / n as f64;
                s += (2.0 * b.sqrt() * th.cos()).powi(k as i32) * (j as f64 * th).cos();
            }
            2.0 * s / n as f64
        })
        .collect()
}

#[test]
fn equal_sets_match_chebyshev_projection() {
    for beta in [1u8, 2] {
        for &b in &[0.5, 1.0, 3.0] {
            for &c in &[0.2f64, 0.7, 1.0] {
                for k_p in 1..=8 {
                    for k_q in 1..=8 {
                        let (ap, aq) = (cosine_coefficients(k_p, b), cosine_coefficients(k_q, b));
                        let oracle: f64 = (1..=k_p.min(k_q) as usize)
                            .map(|j| j as f64 / (2.0 * beta as f64) * c.powi(j as i32) * ap[j] * aq[j])
                            .sum();
                        let s = covariance_series(&q(k_p, k_q, b, b, b, c, beta)).unwrap();
                        let size = (2.0 * b.sqrt()).powi((k_p + k_q) as i32);
                        assert!((s - oracle).abs() <= 1e-13 * size, "{k_p} {k_q} {b} {c} {beta}: {s} vs {oracle}");
                    }
                }
            }
        }
    }
}

#[test]
fn static_variances_are_frozen() {
    // Real symmetric, unit scale, c = 1.
    let want: [i64; 8] = [2, 4, 24, 72, 360, 1200, 5600, 19600];
    for (i, &w) in want.iter().enumerate() {
        let k = i as u32 + 1;
        assert_eq!(covariance_series(&q(k, k, 1.0, 1.0, 1.0, 1.0, 1)).unwrap(), w as f64, "k = {k}");
        assert_eq!(covariance_series(&q(k, k, 1.0, 1.0, 1.0, 1.0, 2)).unwrap(), w as f64 / 2.0, "k = {k}");
        let exact = variance_catalan_form(k).unwrap();
        assert_eq!(exact, num_rational::BigRational::from_integer(w.into()));
    }
}
