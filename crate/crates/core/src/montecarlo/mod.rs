//! Ensemble orchestration: sampling, per-sample statistics, estimation and
//! comparison with the limiting covariance.

pub mod compare;
pub mod estimate;

use std::time::Instant;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::config::Experiment;
use crate::error::{Error, Result};
use crate::observables::{eigenvalues, Spectrum};
use crate::seed::sample_seed;
use crate::wigner::{EnsembleSampler, IndexSet};

pub use compare::{compare, compare_run, theory_for_pair, theory_table, ComparisonReport};
pub use estimate::{covariance_table, estimate_cumulants, CovarianceEntry, CumulantEstimate, SampleMatrix};

/// Largest tolerated fraction of quarantined samples.
pub const MAX_QUARANTINE_FRACTION: f64 = 1e-3;

#[derive(Clone, Copy, Debug, Default, PartialEq)]
pub struct RunOptions {
    /// Worker threads; `None` uses the global pool.
    pub threads: Option<usize>,
    /// Keep per-sample statistic rows.
    pub keep_raw: bool,
    /// Keep spectra of the first this many samples.
    pub keep_spectra: usize,
}

/// Moment estimates over the clean samples of a run.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct EstimateTable {
    pub labels: Vec<String>,
    pub n_used: usize,
    pub quarantined: Vec<usize>,
    pub means: Vec<f64>,
    /// Row-major `m x m`.
    pub covariance: Vec<CovarianceEntry>,
    pub cumulants: Vec<CumulantEstimate>,
}

impl EstimateTable {
    pub fn from_samples(labels: Vec<String>, data: &SampleMatrix, quarantined: Vec<usize>) -> Result<Self> {
        if data.n() < 5 {
            return Err(Error::DegenerateEstimate(format!("only {} usable samples", data.n())));
        }
        Ok(EstimateTable {
            labels,
            n_used: data.n(),
            quarantined,
            means: (0..data.m()).map(|p| estimate::mean(data.column(p))).collect(),
            covariance: covariance_table(data),
            cumulants: (0..data.m()).map(|p| estimate_cumulants(data.column(p))).collect(),
        })
    }

    pub fn dim(&self) -> usize {
        self.labels.len()
    }

    pub fn cov(&self, p: usize, q: usize) -> CovarianceEntry {
        self.covariance[p * self.dim() + q]
    }

    pub fn correlation(&self, p: usize, q: usize) -> f64 {
        self.cov(p, q).value / (self.cov(p, p).value * self.cov(q, q).value).sqrt()
    }
}

/// Spectra of one `(set, time)` pair for the first few samples.
#[derive(Clone, Debug, PartialEq)]
pub struct SpectraDump {
    pub set: String,
    pub time: f64,
    pub samples: Vec<(usize, Spectrum)>,
}

#[derive(Clone, Debug)]
pub struct SimulationOutput {
    pub estimates: EstimateTable,
    /// `(sample index, statistics)` for clean samples when requested.
    pub raw: Option<Vec<(usize, Vec<f64>)>>,
    pub spectra: Vec<SpectraDump>,
    pub runtime_seconds: f64,
}

struct SampleResult {
    values: Vec<f64>,
    spectra: Vec<Spectrum>,
}

/// Distinct `(set, time)` pairs in first-use order.
fn spectral_keys(exp: &Experiment) -> Vec<(usize, usize)> {
    let mut keys = Vec::new();
    for o in &exp.observables {
        let k = (o.set_index, o.time_index);
        if !keys.contains(&k) {
            keys.push(k);
        }
    }
    keys
}

fn one_sample(
    exp: &Experiment,
    sampler: &EnsembleSampler,
    keys: &[(usize, usize)],
    index: usize,
    keep_spectra: bool,
) -> Result<Option<SampleResult>> {
    let sample = sampler.sample(sample_seed(exp.seed, index as u64));
    let mut spectra = Vec::with_capacity(keys.len());
    for &(s, t) in keys {
        let m = sample.submatrix(exp.set(s), t)?;
        match eigenvalues(&m) {
            Ok(sp) => spectra.push(sp),
            Err(Error::Numerical(msg)) => {
                log::warn!("sample {index}: {msg}");
                return Ok(None);
            }
            Err(e) => return Err(e),
        }
    }
    let mut values = Vec::with_capacity(exp.observables.len());
    for o in &exp.observables {
        let key = keys.iter().position(|&k| k == (o.set_index, o.time_index)).expect("key");
        let v = o.statistic.evaluate(&spectra[key], exp.set(o.set_index).len(), exp.scale)?;
        if !v.is_finite() {
            log::warn!("sample {index}: non-finite statistic {}", o.label);
            return Ok(None);
        }
        values.push(v);
    }
    if !keep_spectra {
        spectra.clear();
    }
    Ok(Some(SampleResult { values, spectra }))
}

/// `run_experiment`: draw `n_samples` ensembles, evaluate every observable,
/// and estimate covariances and cumulants. Results do not depend on the
/// number of worker threads.
pub fn run_experiment(exp: &Experiment, opts: &RunOptions) -> Result<SimulationOutput> {
    let start = Instant::now();
    faer::set_global_parallelism(faer::Parallelism::None);
    let union = IndexSet::union(exp.sets.iter().map(|(_, s)| s)).expect("at least one set");
    let sampler = EnsembleSampler::new(&exp.entries, &exp.grid, &union, exp.capacity)?;
    let keys = spectral_keys(exp);
    let work = || -> Result<Vec<Option<SampleResult>>> {
        (0..exp.n_samples)
            .into_par_iter()
            .map(|i| one_sample(exp, &sampler, &keys, i, i < opts.keep_spectra))
            .collect()
    };
    let results = match opts.threads {
        Some(t) => rayon::ThreadPoolBuilder::new()
            .num_threads(t)
            .build()
            .map_err(|e| Error::Usage(format!("cannot start {t} worker threads: {e}")))?
            .install(work)?,
        None => work()?,
    };
    let quarantined: Vec<usize> = results
        .iter()
        .enumerate()
        .filter(|(_, r)| r.is_none())
        .map(|(i, _)| i)
        .collect();
    if quarantined.len() as f64 > MAX_QUARANTINE_FRACTION * exp.n_samples as f64 {
        return Err(Error::Quarantine {
            quarantined: quarantined.len(),
            total: exp.n_samples,
        });
    }
    if !quarantined.is_empty() {
        log::warn!("{} samples quarantined: {:?}", quarantined.len(), quarantined);
    }
    let mut spectra: Vec<SpectraDump> = keys
        .iter()
        .map(|&(s, t)| SpectraDump {
            set: exp.sets[s].0.clone(),
            time: exp.time(t),
            samples: Vec::new(),
        })
        .collect();
    let mut rows = Vec::with_capacity(results.len());
    let mut raw = opts.keep_raw.then(Vec::new);
    for (i, r) in results.into_iter().enumerate() {
        let Some(r) = r else { continue };
        for (dump, sp) in spectra.iter_mut().zip(r.spectra) {
            dump.samples.push((i, sp));
        }
        if let Some(raw) = raw.as_mut() {
            raw.push((i, r.values.clone()));
        }
        rows.push(r.values);
    }
    let data = SampleMatrix::from_rows(&rows);
    let estimates = EstimateTable::from_samples(exp.labels(), &data, quarantined)?;
    Ok(SimulationOutput {
        estimates,
        raw,
        spectra: if opts.keep_spectra > 0 { spectra } else { Vec::new() },
        runtime_seconds: start.elapsed().as_secs_f64(),
    })
}
