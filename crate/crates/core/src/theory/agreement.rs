//! Cross-check of the series against the contour and log-kernel evaluators
//! over a fixed parameter grid.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::{covariance_series, ContourGeometry, CovarianceQuery, LogKernelGeometry, QuadratureParams};
use crate::entry_process::Beta;
use crate::error::Result;

pub const GRID_MAX_DEGREE: u32 = 8;

/// `(b_p, b_q, b_pq, c, β)` for every grid configuration: `b ∈ {0.5, 1, 2}`,
/// `b_pq ∈ {0, 0.25, min(b_p, b_q)}`, `c ∈ {0, 0.3, e^{-1/2}, 1}`.
pub fn agreement_grid() -> Vec<(f64, f64, f64, f64, Beta)> {
    let bs = [0.5, 1.0, 2.0];
    let cs = [0.0, 0.3, (-0.5f64).exp(), 1.0];
    let mut out = Vec::new();
    for beta in [Beta::Real, Beta::Complex] {
        for &bp in &bs {
            for &bq in &bs {
                for bpq in [0.0, 0.25, f64::min(bp, bq)] {
                    for &c in &cs {
                        out.push((bp, bq, bpq, c, beta));
                    }
                }
            }
        }
    }
    out
}

/// Relative discrepancy `|a - s|/|s|`; absolute when the target is zero.
pub fn relative_discrepancy(value: f64, target: f64) -> f64 {
    if target == 0.0 {
        value.abs()
    } else {
        (value - target).abs() / target.abs()
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct AgreementReport {
    pub queries: usize,
    pub max_rel_contour: f64,
    pub max_rel_logkernel: f64,
    pub worst_contour: Option<CovarianceQuery>,
    pub worst_logkernel: Option<CovarianceQuery>,
}

/// Evaluate every degree pair `k_p, k_q <= 8` on [`agreement_grid`] with all
/// three evaluators.
pub fn evaluator_agreement(quad: &QuadratureParams) -> Result<AgreementReport> {
    let per_config: Vec<Vec<(CovarianceQuery, f64, f64)>> = agreement_grid()
        .into_par_iter()
        .map(|(b_p, b_q, b_pq, c, beta)| -> Result<Vec<(CovarianceQuery, f64, f64)>> {
            let cg = ContourGeometry::new(b_p, b_q, b_pq, c, beta, quad)?;
            let lg = LogKernelGeometry::new(b_p, b_q, b_pq, c, beta, GRID_MAX_DEGREE, quad)?;
            let mut rows = Vec::new();
            for k_p in 1..=GRID_MAX_DEGREE {
                for k_q in 1..=GRID_MAX_DEGREE {
                    let q = CovarianceQuery { k_p, k_q, b_p, b_q, b_pq, c, beta };
                    let s = covariance_series(&q)?;
                    rows.push((
                        q,
                        relative_discrepancy(cg.covariance(k_p, k_q)?, s),
                        relative_discrepancy(lg.covariance(k_p, k_q)?, s),
                    ));
                }
            }
            Ok(rows)
        })
        .collect::<Result<_>>()?;
    let mut rep = AgreementReport {
        queries: 0,
        max_rel_contour: 0.0,
        max_rel_logkernel: 0.0,
        worst_contour: None,
        worst_logkernel: None,
    };
    for (q, ec, el) in per_config.into_iter().flatten() {
        rep.queries += 1;
        if ec > rep.max_rel_contour || rep.worst_contour.is_none() {
            rep.max_rel_contour = ec.max(rep.max_rel_contour);
            rep.worst_contour = Some(q);
        }
        if el > rep.max_rel_logkernel || rep.worst_logkernel.is_none() {
            rep.max_rel_logkernel = el.max(rep.max_rel_logkernel);
            rep.worst_logkernel = Some(q);
        }
    }
    Ok(rep)
}
