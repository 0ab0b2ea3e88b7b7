//! Limiting covariance of centered trace statistics.
//!
//! Four evaluators are provided: the finite binomial series, a double contour
//! integral, a double integral of the logarithmic kernel over semicircles, and
//! (for Chebyshev statistics) a closed form with a bilinear-expansion check.

pub mod agreement;
pub mod chebyshev;
pub mod combinatorics;
pub mod contour;
pub mod logkernel;
pub mod series;

use serde::{Deserialize, Serialize};

use crate::entry_process::Beta;
use crate::error::{Error, Result};

pub use chebyshev::{chebyshev_covariance_closed, chebyshev_covariance_expanded, chebyshev_profile};
pub use combinatorics::{catalan, catalan_convolution, catalan_convolution_bruteforce};
pub use contour::{covariance_contour, ContourGeometry};
pub use logkernel::{covariance_logkernel, LogKernelGeometry};
pub use series::{covariance_series, pair_from_profiles, trace_profile};

/// Parameters of one limiting covariance entry.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CovarianceQuery {
    pub k_p: u32,
    pub k_q: u32,
    pub b_p: f64,
    pub b_q: f64,
    pub b_pq: f64,
    /// `c(t_p, t_q)`.
    pub c: f64,
    pub beta: Beta,
}

impl CovarianceQuery {
    pub fn validate(&self) -> Result<()> {
        if self.k_p == 0 || self.k_q == 0 {
            return Err(Error::InvalidQuery("degrees must be at least 1".into()));
        }
        if !(self.b_p > 0.0 && self.b_p.is_finite() && self.b_q > 0.0 && self.b_q.is_finite()) {
            return Err(Error::InvalidQuery(format!(
                "b_p = {}, b_q = {} must be positive and finite",
                self.b_p, self.b_q
            )));
        }
        if !(self.b_pq >= 0.0 && self.b_pq <= self.b_p.min(self.b_q)) {
            return Err(Error::InvalidQuery(format!(
                "b_pq = {} must lie in [0, min(b_p, b_q)] = [0, {}]",
                self.b_pq,
                self.b_p.min(self.b_q)
            )));
        }
        if !(0.0..=1.0).contains(&self.c) {
            return Err(Error::InvalidQuery(format!("c = {} must lie in [0, 1]", self.c)));
        }
        Ok(())
    }

    /// Exchange the roles of `p` and `q`.
    pub fn swapped(&self) -> Self {
        CovarianceQuery {
            k_p: self.k_q,
            k_q: self.k_p,
            b_p: self.b_q,
            b_q: self.b_p,
            ..*self
        }
    }
}

/// Numerical settings for the contour and log-kernel evaluators.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct QuadratureParams {
    /// Trapezoid nodes per circle; Gauss-Legendre nodes per semicircle.
    pub n_nodes: usize,
    /// Relative shrink of the inner contour radius.
    pub delta: f64,
}

impl Default for QuadratureParams {
    fn default() -> Self {
        QuadratureParams {
            n_nodes: 512,
            delta: 0.25,
        }
    }
}

impl QuadratureParams {
    pub fn validate(&self) -> Result<()> {
        if self.n_nodes < 64 {
            return Err(Error::Domain(format!("n_nodes = {} is below 64", self.n_nodes)));
        }
        if !(self.delta > 0.0 && self.delta < 0.5) {
            return Err(Error::Domain(format!("delta = {} must lie in (0, 0.5)", self.delta)));
        }
        Ok(())
    }
}

/// Which evaluator produced a covariance value.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Method {
    Series,
    Contour,
    LogKernel,
    ChebyshevClosed,
    ChebyshevExpanded,
}

impl Method {
    pub fn name(&self) -> &'static str {
        match self {
            Method::Series => "series",
            Method::Contour => "contour",
            Method::LogKernel => "logkernel",
            Method::ChebyshevClosed => "chebyshev_closed",
            Method::ChebyshevExpanded => "chebyshev_expanded",
        }
    }
}

/// A limiting covariance matrix over a list of observables.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TheoryCovariance {
    pub method: Method,
    pub labels: Vec<String>,
    /// Row-major `m x m`.
    pub values: Vec<f64>,
}

impl TheoryCovariance {
    pub fn dim(&self) -> usize {
        self.labels.len()
    }

    pub fn get(&self, p: usize, q: usize) -> f64 {
        self.values[p * self.dim() + q]
    }
}
