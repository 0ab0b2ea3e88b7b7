//! Deterministic identity suite: exact combinatorics, evaluator agreement,
//! kernel identities and the height/trace relation. Draws no ensembles.

use std::f64::consts::PI;

use serde::{Deserialize, Serialize};

use crate::config::{parse_experiment, parse_json, presets, KernelConfig};
use crate::entry_process::{Beta, CovarianceFn};
use crate::error::Result;
use crate::kernel::{
    green_halfplane, gram_pd_check, kernel_c, random_configuration, section_pullback_check, xi, xi_inv,
    PullbackCheck, UpperHalfPlanePoint,
};
use crate::montecarlo::compare::theory_table;
use crate::observables::{
    chebyshev_eval, height_moment_empirical, height_moment_scale, height_moment_via_traces, trace_power,
    HeightWindow, Spectrum,
};
use crate::theory::agreement::evaluator_agreement;
use crate::theory::combinatorics::{
    catalan_convolution, catalan_convolution_bruteforce, variance_binomial_form, variance_catalan_form,
};
use crate::theory::{
    chebyshev_covariance_closed, chebyshev_covariance_expanded, chebyshev_profile, covariance_series,
    CovarianceQuery, QuadratureParams,
};

/// One family of identities: passes when `worst <= tolerance`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Check {
    pub name: String,
    pub count: usize,
    pub worst: f64,
    pub tolerance: f64,
    pub passed: bool,
}

impl Check {
    fn new(name: &str, count: usize, worst: f64, tolerance: f64) -> Self {
        Check {
            name: name.into(),
            count,
            worst,
            tolerance,
            passed: worst <= tolerance,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SelftestReport {
    pub checks: Vec<Check>,
}

impl SelftestReport {
    pub fn passed(&self) -> bool {
        self.checks.iter().all(|c| c.passed)
    }

    pub fn identities(&self) -> usize {
        self.checks.iter().map(|c| c.count).sum()
    }
}

fn rel(a: f64, b: f64) -> f64 {
    (a - b).abs() / b.abs().max(1.0)
}

fn exact_combinatorics() -> Result<Vec<Check>> {
    let mut n = 0;
    let mut bad = 0;
    for r in 1..=8 {
        for s in 0..=10 {
            n += 1;
            if catalan_convolution(r, s)? != catalan_convolution_bruteforce(r, s)? {
                bad += 1;
            }
        }
    }
    let conv = Check::new("catalan convolution closed form (r <= 8, S <= 10)", n, bad as f64, 0.0);
    let mut bad = 0;
    for k in 1..=12 {
        if variance_catalan_form(k)? != variance_binomial_form(k) {
            bad += 1;
        }
    }
    let var = Check::new("variance Catalan form = binomial form (k <= 12)", 12, bad as f64, 0.0);
    let mut n = 0;
    let mut bad = 0;
    for k in 1..=32 {
        for (r, v) in chebyshev_profile(k, 1.0)?.into_iter().enumerate() {
            n += 1;
            let want = if r as u32 == k { 0.5 } else { 0.0 };
            if v != want {
                bad += 1;
            }
        }
    }
    let cheb = Check::new("Chebyshev cycle profile is a unit vector (k <= 32)", n, bad as f64, 0.0);
    Ok(vec![conv, var, cheb])
}

fn evaluators() -> Result<Vec<Check>> {
    let rep = evaluator_agreement(&QuadratureParams::default())?;
    let mut checks = vec![
        Check::new("series vs contour", rep.queries, rep.max_rel_contour, 1e-8),
        Check::new("series vs log-kernel", rep.queries, rep.max_rel_logkernel, 1e-5),
    ];
    let (mut n, mut worst_sym, mut worst_cheb) = (0, 0.0f64, 0.0f64);
    for (b_p, b_q, b_pq, c, beta) in crate::theory::agreement::agreement_grid() {
        for k_p in 1..=8 {
            for k_q in 1..=8 {
                let q = CovarianceQuery { k_p, k_q, b_p, b_q, b_pq, c, beta };
                worst_sym = worst_sym.max(rel(covariance_series(&q.swapped())?, covariance_series(&q)?));
                worst_cheb = worst_cheb.max(rel(chebyshev_covariance_expanded(&q)?, chebyshev_covariance_closed(&q)?));
                n += 1;
            }
        }
    }
    checks.push(Check::new("series symmetric under p <-> q", n, worst_sym, 1e-12));
    checks.push(Check::new("Chebyshev closed form vs expansion", n, worst_cheb, 1e-9));
    let mut worst = 0.0f64;
    let mut n = 0;
    for k in 0..=32u32 {
        for i in 0..=64 {
            let th = PI * i as f64 / 64.0;
            worst = worst.max((chebyshev_eval(k, th.cos()) - (k as f64 * th).cos()).abs());
            n += 1;
        }
    }
    checks.push(Check::new("T_k(cos θ) = cos kθ", n, worst, 1e-9));
    let mut worst = 0.0f64;
    let mut n = 0;
    for (_, text) in presets::EXPERIMENTS {
        let exp = parse_experiment(text)?.resolve()?;
        let m = exp.observables.len();
        let mut mat = faer::Mat::<f64>::zeros(m, m);
        for t in theory_table(&exp, None)? {
            mat.write(t.p, t.q, t.value);
            mat.write(t.q, t.p, t.value);
        }
        let eig = mat.selfadjoint_eigenvalues(faer::Side::Lower);
        let top = eig.iter().cloned().fold(0.0f64, f64::max).max(1.0);
        let low = eig.iter().cloned().fold(f64::INFINITY, f64::min);
        worst = worst.max((-low / top).max(0.0));
        n += 1;
    }
    checks.push(Check::new("preset limit covariances are positive semidefinite", n, worst, 1e-10));
    Ok(checks)
}

fn kernels() -> Result<Vec<Check>> {
    let mut checks = Vec::new();
    let one = CovarianceFn::constant(1.0);
    let mut worst = 0.0f64;
    let mut n = 0;
    for cfg in 0..1000 {
        let pts = random_configuration(0x6b65726e, cfg, 10);
        for i in 0..pts.len() {
            let (z, w) = (pts[i].0, pts[(i + 1) % pts.len()].0);
            let k = kernel_c(z, 0.0, w, 0.0, &one)?;
            let g = green_halfplane(z, w);
            worst = worst.max((k - g).abs() / g.abs().max(1.0));
            n += 1;
        }
    }
    checks.push(Check::new("kernel at c = 1 equals the half-plane Green function", n, worst, 1e-12));
    let ou = CovarianceFn::ou(1.0);
    let w = UpperHalfPlanePoint::from_parts(0.3, 1.0)?;
    let mut worst = 0.0f64;
    let mut n = 0;
    for e in 2..=10 {
        let im = 10f64.powi(-e);
        for x in [-1.0, 0.0, 0.7] {
            let z = UpperHalfPlanePoint::from_parts(x, im)?;
            worst = worst.max(kernel_c(z, 0.0, w, 0.5, &ou)?.abs() / im);
            n += 1;
        }
    }
    checks.push(Check::new("kernel decays linearly at the boundary (|K|/Im z)", n, worst, 1.0));
    let kc: KernelConfig = parse_json(presets::MONOTONE_SECTION)?;
    kc.validate()?;
    let mut pts = Vec::new();
    for t in crate::config::linspace(kc.t) {
        for x in crate::config::linspace(kc.x) {
            if x.abs() < 2.0 * kc.section.phi.eval(t).sqrt() {
                pts.push((x, t));
            }
        }
    }
    let sub: Vec<(f64, f64)> = pts.iter().step_by(7).cloned().collect();
    match section_pullback_check(&kc.section, &sub)? {
        PullbackCheck::Applicable { max_discrepancy, pairs } => {
            checks.push(Check::new("kernel pulls back to the Green function along a section", pairs, max_discrepancy, 1e-10))
        }
        PullbackCheck::Inapplicable { .. } => checks.push(Check::new("section pullback applicable", 1, 1.0, 0.0)),
    }
    let mut worst = 0.0f64;
    for &(x, t) in &pts {
        let (x2, t2) = xi_inv(xi(x, t, &kc.section)?, &kc.section)?;
        worst = worst.max((x2 - x).abs().max((t2 - t).abs()));
    }
    checks.push(Check::new("Ξ^{-1}(Ξ(x, t)) = (x, t)", pts.len(), worst, 1e-9));
    let mut worst = 0.0f64;
    for cfg in 0..20 {
        let conf = random_configuration(7, cfg, 10);
        worst = worst.max(-gram_pd_check(&conf, &ou, 0.05)?);
    }
    checks.push(Check::new("Gram matrices are positive semidefinite", 20, worst, 1e-9));
    Ok(checks)
}

/// Deterministic spectra spread like a semicircle of radius `2√L`.
pub fn reference_spectra(n: usize, scale: f64, count: usize) -> Result<Vec<Spectrum>> {
    (0..count)
        .map(|j| {
            Spectrum::new(
                (0..n)
                    .map(|s| {
                        let u = (s as f64 + 0.5 + 0.4 * ((7 * s + 3 * j) as f64).sin()) / n as f64;
                        2.0 * scale.sqrt() * (PI * u).cos()
                    })
                    .collect(),
            )
        })
        .collect()
}

fn height_identity() -> Result<Check> {
    let scale = 100.0;
    let spectra = reference_spectra(100, scale, 10)?;
    let mut worst = 0.0f64;
    let mut n = 0;
    for k in 1..=3u32 {
        let hm = height_moment_empirical(&spectra, k, 1.0, scale, HeightWindow::for_level(1.0), Beta::Real)?;
        let mean = spectra.iter().map(|s| trace_power(s, k + 1)).sum::<f64>() / spectra.len() as f64;
        for (s, v) in spectra.iter().zip(&hm.values) {
            let t = height_moment_via_traces(s, mean, k, scale, Beta::Real);
            worst = worst.max((v - t).abs() / height_moment_scale(s, k, scale, Beta::Real));
            n += 1;
        }
    }
    Ok(Check::new("height moments match centered traces", n, worst, 1e-3))
}

/// `selftest`: every deterministic identity, with counts.
pub fn run_selftest() -> Result<SelftestReport> {
    let mut checks = exact_combinatorics()?;
    checks.extend(evaluators()?);
    checks.extend(kernels()?);
    checks.push(height_identity()?);
    Ok(SelftestReport { checks })
}
