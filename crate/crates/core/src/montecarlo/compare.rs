//! Limiting covariance over an experiment's observables, and the comparison
//! of simulated estimates against it.

use std::io::Write;

use serde::{Deserialize, Serialize};

use super::{EstimateTable, SimulationOutput};
use crate::config::Experiment;
use crate::entry_process::Beta;
use crate::error::{Error, Result};
use crate::observables::Statistic;
use crate::theory::combinatorics::chebyshev_coefficients;
use crate::theory::{
    chebyshev_covariance_closed, chebyshev_covariance_expanded, chebyshev_profile, pair_from_profiles,
    trace_profile, ContourGeometry, CovarianceQuery, LogKernelGeometry, Method,
};
use crate::wigner::overlap_fraction;

pub const VERSION: &str = env!("CARGO_PKG_VERSION");

/// Limiting parameters of one observable pair.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct PairGeometry {
    pub b_p: f64,
    pub b_q: f64,
    pub b_pq: f64,
    pub c: f64,
    pub beta: Beta,
}

pub fn pair_geometry(exp: &Experiment, p: usize, q: usize) -> Result<PairGeometry> {
    let (op, oq) = (&exp.observables[p], &exp.observables[q]);
    let (b_p, b_q, b_pq) = overlap_fraction(exp.set(op.set_index), exp.set(oq.set_index), exp.scale)?;
    let c = exp.entries.covariance.evaluate(exp.time(op.time_index), exp.time(oq.time_index))?;
    Ok(PairGeometry { b_p, b_q, b_pq, c, beta: exp.entries.beta })
}

fn profile(stat: Statistic, b: f64) -> Result<Vec<f64>> {
    match stat {
        Statistic::TracePower { k } => Ok(trace_profile(k, b)),
        Statistic::Chebyshev { k } => chebyshev_profile(k, b),
    }
}

/// The statistic as `Σ_j coef_j L^{-j/2} tr X^j`, constant term dropped.
fn monomials(stat: Statistic, b: f64) -> Vec<(u32, f64)> {
    match stat {
        Statistic::TracePower { k } => vec![(k, 1.0)],
        Statistic::Chebyshev { k } => chebyshev_coefficients(k)
            .into_iter()
            .enumerate()
            .skip(1)
            .filter(|(_, a)| *a != 0.into())
            .map(|(j, a)| {
                let a: f64 = num_traits::ToPrimitive::to_f64(&a).unwrap_or(f64::NAN);
                (j as u32, a * (2.0 * b.sqrt()).powi(-(j as i32)))
            })
            .collect(),
    }
}

/// Default evaluator for a pair of statistics.
pub fn default_method(sp: Statistic, sq: Statistic) -> Method {
    match (sp, sq) {
        (Statistic::Chebyshev { .. }, Statistic::Chebyshev { .. }) => Method::ChebyshevClosed,
        _ => Method::Series,
    }
}

/// Limiting covariance of observables `p` and `q` by the given evaluator, or
/// by [`default_method`] when `method` is `None`.
pub fn theory_for_pair(exp: &Experiment, p: usize, q: usize, method: Option<Method>) -> Result<(Method, f64)> {
    let g = pair_geometry(exp, p, q)?;
    let (sp, sq) = (exp.observables[p].statistic, exp.observables[q].statistic);
    let method = method.unwrap_or_else(|| default_method(sp, sq));
    let query = |kp: u32, kq: u32| CovarianceQuery {
        k_p: kp,
        k_q: kq,
        b_p: g.b_p,
        b_q: g.b_q,
        b_pq: g.b_pq,
        c: g.c,
        beta: g.beta,
    };
    query(sp.degree(), sq.degree()).validate()?;
    let value = match method {
        Method::Series => pair_from_profiles(&profile(sp, g.b_p)?, &profile(sq, g.b_q)?, g.c * g.b_pq, g.beta),
        Method::ChebyshevClosed | Method::ChebyshevExpanded => match (sp, sq) {
            (Statistic::Chebyshev { k: kp }, Statistic::Chebyshev { k: kq }) => {
                if method == Method::ChebyshevClosed {
                    chebyshev_covariance_closed(&query(kp, kq))?
                } else {
                    chebyshev_covariance_expanded(&query(kp, kq))?
                }
            }
            _ => {
                return Err(Error::InvalidQuery(format!(
                    "{} applies to Chebyshev pairs only",
                    method.name()
                )))
            }
        },
        Method::Contour | Method::LogKernel => {
            let (mp, mq) = (monomials(sp, g.b_p), monomials(sq, g.b_q));
            let cov: Box<dyn Fn(u32, u32) -> Result<f64>> = if method == Method::Contour {
                let geo = ContourGeometry::new(g.b_p, g.b_q, g.b_pq, g.c, g.beta, &exp.quadrature)?;
                Box::new(move |a, b| geo.covariance(a, b))
            } else {
                let k_max = sp.degree().max(sq.degree());
                let geo = LogKernelGeometry::new(g.b_p, g.b_q, g.b_pq, g.c, g.beta, k_max, &exp.quadrature)?;
                Box::new(move |a, b| geo.covariance(a, b))
            };
            let mut sum = 0.0;
            for &(j, aj) in &mp {
                for &(l, al) in &mq {
                    sum += aj * al * cov(j, l)?;
                }
            }
            sum
        }
    };
    Ok((method, value))
}

/// One upper-triangle entry of a theory table.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct PairTheory {
    pub p: usize,
    pub q: usize,
    pub method: Method,
    pub value: f64,
}

/// Limiting covariances for all pairs `p <= q`.
pub fn theory_table(exp: &Experiment, method: Option<Method>) -> Result<Vec<PairTheory>> {
    let m = exp.observables.len();
    let mut out = Vec::with_capacity(m * (m + 1) / 2);
    for p in 0..m {
        for q in p..m {
            let (method, value) = theory_for_pair(exp, p, q, method)?;
            out.push(PairTheory { p, q, method, value });
        }
    }
    Ok(out)
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct PairComparison {
    pub p: usize,
    pub q: usize,
    pub label_p: String,
    pub label_q: String,
    pub method: Method,
    pub theory: f64,
    pub empirical: f64,
    pub stderr: f64,
    pub z: f64,
    pub pass: bool,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct GaussianityCheck {
    pub index: usize,
    pub label: String,
    pub k3: f64,
    pub k3_stderr: f64,
    pub z3: f64,
    pub k4: f64,
    pub k4_stderr: f64,
    pub z4: f64,
    pub pass: bool,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ReportMetadata {
    pub name: String,
    pub seed: u64,
    pub scale: f64,
    pub beta: Beta,
    pub n_samples: usize,
    pub n_used: usize,
    pub quarantined: usize,
    pub z_max: f64,
    pub runtime_seconds: f64,
    pub version: String,
}

impl ReportMetadata {
    pub fn comment_line(&self) -> String {
        format!(
            "# seed={},L={},n_samples={},version={}",
            self.seed, self.scale, self.n_samples, self.version
        )
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ComparisonReport {
    pub metadata: ReportMetadata,
    pub pairs: Vec<PairComparison>,
    pub gaussianity: Vec<GaussianityCheck>,
    pub passed: bool,
}

fn z_score(emp: f64, theory: f64, stderr: f64, what: &str) -> Result<f64> {
    let diff = emp - theory;
    if stderr > 0.0 {
        Ok(diff / stderr)
    } else if diff.abs() <= 1e-12 * theory.abs().max(1.0) {
        Ok(0.0)
    } else {
        Err(Error::DegenerateEstimate(format!(
            "{what}: zero standard error with discrepancy {diff:e}"
        )))
    }
}

/// `compare`: z-scores of every empirical covariance against the limit, plus
/// third and fourth cumulant checks when enabled.
pub fn compare(est: &EstimateTable, exp: &Experiment, runtime_seconds: f64) -> Result<ComparisonReport> {
    let m = exp.observables.len();
    if est.dim() != m {
        return Err(Error::Usage(format!(
            "estimate table has {} observables, experiment has {m}",
            est.dim()
        )));
    }
    let z_max = exp.tolerances.z_max;
    let mut pairs = Vec::new();
    for t in theory_table(exp, None)? {
        let e = est.cov(t.p, t.q);
        let what = format!("cov({}, {})", est.labels[t.p], est.labels[t.q]);
        let z = z_score(e.value, t.value, e.stderr, &what)?;
        pairs.push(PairComparison {
            p: t.p,
            q: t.q,
            label_p: est.labels[t.p].clone(),
            label_q: est.labels[t.q].clone(),
            method: t.method,
            theory: t.value,
            empirical: e.value,
            stderr: e.stderr,
            z,
            pass: z.abs() <= z_max,
        });
    }
    let mut gaussianity = Vec::new();
    if exp.tolerances.gaussianity {
        for (i, c) in est.cumulants.iter().enumerate() {
            let z3 = z_score(c.k3, 0.0, c.k3_stderr, &format!("k3({})", est.labels[i]))?;
            let z4 = z_score(c.k4, 0.0, c.k4_stderr, &format!("k4({})", est.labels[i]))?;
            gaussianity.push(GaussianityCheck {
                index: i,
                label: est.labels[i].clone(),
                k3: c.k3,
                k3_stderr: c.k3_stderr,
                z3,
                k4: c.k4,
                k4_stderr: c.k4_stderr,
                z4,
                pass: z3.abs() <= z_max && z4.abs() <= z_max,
            });
        }
    }
    let passed = pairs.iter().all(|p| p.pass) && gaussianity.iter().all(|g| g.pass);
    Ok(ComparisonReport {
        metadata: ReportMetadata {
            name: exp.name.clone(),
            seed: exp.seed,
            scale: exp.scale,
            beta: exp.entries.beta,
            n_samples: exp.n_samples,
            n_used: est.n_used,
            quarantined: est.quarantined.len(),
            z_max,
            runtime_seconds,
            version: VERSION.into(),
        },
        pairs,
        gaussianity,
        passed,
    })
}

/// Shorthand for [`compare`] on a finished run.
pub fn compare_run(out: &SimulationOutput, exp: &Experiment) -> Result<ComparisonReport> {
    compare(&out.estimates, exp, out.runtime_seconds)
}

impl ComparisonReport {
    pub fn write_pairs_csv<W: Write>(&self, mut out: W) -> std::io::Result<()> {
        writeln!(out, "{}", self.metadata.comment_line())?;
        writeln!(out, "p,q,label_p,label_q,method,theory,empirical,stderr,z,pass")?;
        for r in &self.pairs {
            writeln!(
                out,
                "{},{},{},{},{},{:e},{:e},{:e},{:.4},{}",
                r.p,
                r.q,
                r.label_p,
                r.label_q,
                r.method.name(),
                r.theory,
                r.empirical,
                r.stderr,
                r.z,
                r.pass
            )?;
        }
        Ok(())
    }

    pub fn write_gaussianity_csv<W: Write>(&self, mut out: W) -> std::io::Result<()> {
        writeln!(out, "{}", self.metadata.comment_line())?;
        writeln!(out, "index,label,k3,k3_stderr,z3,k4,k4_stderr,z4,pass")?;
        for g in &self.gaussianity {
            writeln!(
                out,
                "{},{},{:e},{:e},{:.4},{:e},{:e},{:.4},{}",
                g.index, g.label, g.k3, g.k3_stderr, g.z3, g.k4, g.k4_stderr, g.z4, g.pass
            )?;
        }
        Ok(())
    }

    pub fn failures(&self) -> Vec<String> {
        let mut out: Vec<String> = self
            .pairs
            .iter()
            .filter(|p| !p.pass)
            .map(|p| format!("cov({}, {}): z = {:.2}", p.label_p, p.label_q, p.z))
            .collect();
        out.extend(
            self.gaussianity
                .iter()
                .filter(|g| !g.pass)
                .map(|g| format!("{}: z3 = {:.2}, z4 = {:.2}", g.label, g.z3, g.z4)),
        );
        out
    }
}

/// Writes the estimate table as `p,q,label_p,label_q,value,stderr` rows.
pub fn write_estimates_csv<W: Write>(mut out: W, est: &EstimateTable, meta: &ReportMetadata) -> std::io::Result<()> {
    writeln!(out, "{}", meta.comment_line())?;
    writeln!(out, "p,q,label_p,label_q,value,stderr")?;
    let m = est.dim();
    for p in 0..m {
        for q in p..m {
            let e = est.cov(p, q);
            writeln!(out, "{p},{q},{},{},{:e},{:e}", est.labels[p], est.labels[q], e.value, e.stderr)?;
        }
    }
    Ok(())
}

/// Writes `sample,<label>...` rows.
pub fn write_raw_csv<W: Write>(mut out: W, labels: &[String], rows: &[(usize, Vec<f64>)], meta: &ReportMetadata) -> std::io::Result<()> {
    writeln!(out, "{}", meta.comment_line())?;
    writeln!(out, "sample,{}", labels.join(","))?;
    for (i, row) in rows {
        let vals: Vec<String> = row.iter().map(|v| format!("{v:e}")).collect();
        writeln!(out, "{i},{}", vals.join(","))?;
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::config::{parse_experiment, presets};
    use crate::montecarlo::estimate::SampleMatrix;

    fn nested() -> Experiment {
        parse_experiment(presets::OU_DYNAMIC_NESTED).unwrap().resolve().unwrap()
    }

    #[test]
    fn evaluators_agree_over_preset_pairs() {
        let exp = nested();
        let auto = theory_table(&exp, None).unwrap();
        let series = theory_table(&exp, Some(Method::Series)).unwrap();
        let contour = theory_table(&exp, Some(Method::Contour)).unwrap();
        for ((a, s), c) in auto.iter().zip(&series).zip(&contour) {
            let scale = a.value.abs().max(1e-3);
            assert!((a.value - s.value).abs() < 1e-10 * scale, "{a:?} {s:?}");
            assert!((a.value - c.value).abs() < 1e-7 * scale, "{a:?} {c:?}");
        }
    }

    #[test]
    fn chebyshev_only_methods_reject_trace_pairs() {
        let exp = nested();
        assert!(matches!(
            theory_for_pair(&exp, 0, 0, Some(Method::ChebyshevClosed)),
            Err(Error::InvalidQuery(_))
        ));
    }

    #[test]
    fn zero_stderr_mismatch_is_degenerate() {
        assert_eq!(z_score(1.0, 1.0, 0.0, "x").unwrap(), 0.0);
        assert!(matches!(z_score(1.0, 2.0, 0.0, "x"), Err(Error::DegenerateEstimate(_))));
    }

    #[test]
    fn report_shape_and_csv() {
        let text = presets::GOE_STATIC;
        let exp = parse_experiment(text).unwrap().resolve().unwrap();
        let rows: Vec<Vec<f64>> = (0..50)
            .map(|i| {
                let x = (i as f64 * 0.37).sin();
                vec![x, 2.0 * x + 0.1 * (i as f64).cos(), x * x]
            })
            .collect();
        let est = EstimateTable::from_samples(exp.labels(), &SampleMatrix::from_rows(&rows), vec![]).unwrap();
        let rep = compare(&est, &exp, 0.0).unwrap();
        assert_eq!(rep.pairs.len(), 6);
        assert_eq!(rep.gaussianity.len(), 3);
        let mut buf = Vec::new();
        rep.write_pairs_csv(&mut buf).unwrap();
        let s = String::from_utf8(buf).unwrap();
        assert!(s.starts_with("# seed=20240501,L=200,n_samples=20000,version="));
        assert_eq!(s.lines().count(), 8);
    }
}
