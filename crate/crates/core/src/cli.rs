//! Command-line front end: argument parsing, config loading and artifact
//! emission. `main` only forwards to [`run_from_args`].

use std::fs::{self, File};
use std::io::{BufWriter, Write};
use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand, ValueEnum};
use serde::Serialize;

use crate::config::{linspace, load_experiment, parse_experiment, parse_json, presets, Experiment, KernelConfig, Overrides};
use crate::error::{exit_code, Error, Result};
use crate::kernel::{
    green_halfplane, gram_pd_check, kernel_c, omega, random_configuration, section_pullback_check, xi, xi_inv,
    PullbackCheck,
};
use crate::montecarlo::compare::{self, write_estimates_csv, write_raw_csv, ReportMetadata, VERSION};
use crate::montecarlo::{run_experiment, RunOptions, SimulationOutput};
use crate::observables::write_spectra_csv;
use crate::selftest::run_selftest;
use crate::theory::Method;

#[derive(Debug, Parser)]
#[command(name = "wigner-clt", version, about = "Spectral fluctuations of dynamic Wigner matrices and their corners")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Limiting covariance tables from every applicable evaluator.
    Theory(TheoryArgs),
    /// Monte Carlo estimates of covariances and cumulants.
    Simulate(SimulateArgs),
    /// Simulate and test the estimates against the limit.
    Compare(SimulateArgs),
    /// Kernel, section map and Gram checks on a grid.
    Kernel(KernelArgs),
    /// Deterministic identity suite (no sampling).
    Selftest(SelftestArgs),
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, ValueEnum)]
pub enum Format {
    Csv,
    Json,
    Both,
}

impl Format {
    fn csv(self) -> bool {
        self != Format::Json
    }

    fn json(self) -> bool {
        self != Format::Csv
    }
}

#[derive(Debug, Args)]
#[group(required = true, multiple = false)]
pub struct Source {
    /// Config file (JSON).
    #[arg(long, value_name = "PATH")]
    pub config: Option<PathBuf>,
    /// Built-in preset name.
    #[arg(long, value_name = "NAME")]
    pub preset: Option<String>,
}

#[derive(Debug, Args)]
pub struct OutputArgs {
    /// Output directory.
    #[arg(long, value_name = "DIR", default_value = "out")]
    pub out: PathBuf,
    #[arg(long, value_enum, default_value = "csv")]
    pub format: Format,
}

#[derive(Debug, Args)]
pub struct TheoryArgs {
    #[command(flatten)]
    pub source: Source,
    #[command(flatten)]
    pub output: OutputArgs,
    /// Override the scale L.
    #[arg(long)]
    pub scale: Option<f64>,
}

#[derive(Debug, Args)]
pub struct SimulateArgs {
    #[command(flatten)]
    pub source: Source,
    #[command(flatten)]
    pub output: OutputArgs,
    #[arg(long)]
    pub seed: Option<u64>,
    /// Override the number of samples.
    #[arg(long)]
    pub samples: Option<usize>,
    /// Override the scale L.
    #[arg(long)]
    pub scale: Option<f64>,
    /// Worker threads (default: all cores).
    #[arg(long)]
    pub threads: Option<usize>,
    /// Also write per-sample statistics.
    #[arg(long)]
    pub raw: bool,
    /// Also write the spectra of the first N samples.
    #[arg(long, value_name = "N", default_value_t = 0)]
    pub spectra: usize,
}

#[derive(Debug, Args)]
pub struct KernelArgs {
    #[command(flatten)]
    pub source: Source,
    #[command(flatten)]
    pub output: OutputArgs,
}

#[derive(Debug, Args)]
pub struct SelftestArgs {
    /// Also write `selftest.json` here.
    #[arg(long, value_name = "DIR")]
    pub out: Option<PathBuf>,
}

fn source_text(src: &Source, kind: &str, lookup: fn(&str) -> Option<&'static str>) -> Result<String> {
    match (&src.config, &src.preset) {
        (Some(path), _) => fs::read_to_string(path)
            .map_err(|e| Error::Usage(format!("cannot read config {}: {e}", path.display()))),
        (None, Some(name)) => lookup(name)
            .map(str::to_owned)
            .ok_or_else(|| Error::Usage(format!("unknown {kind} preset \"{name}\""))),
        (None, None) => Err(Error::Usage("one of --config or --preset is required".into())),
    }
}

fn load(src: &Source, overrides: &Overrides) -> Result<Experiment> {
    let mut cfg = match &src.config {
        Some(path) => load_experiment(path)?,
        None => parse_experiment(&source_text(src, "experiment", presets::experiment)?)?,
    };
    cfg.apply(overrides);
    cfg.resolve()
}

fn create(dir: &Path, name: &str) -> Result<BufWriter<File>> {
    fs::create_dir_all(dir)?;
    Ok(BufWriter::new(File::create(dir.join(name))?))
}

fn write_json<T: Serialize>(dir: &Path, name: &str, value: &T) -> Result<()> {
    let mut w = create(dir, name)?;
    serde_json::to_writer_pretty(&mut w, value)?;
    writeln!(w)?;
    w.flush()?;
    Ok(())
}

fn metadata(exp: &Experiment, out: Option<&SimulationOutput>) -> ReportMetadata {
    ReportMetadata {
        name: exp.name.clone(),
        seed: exp.seed,
        scale: exp.scale,
        beta: exp.entries.beta,
        n_samples: exp.n_samples,
        n_used: out.map_or(0, |o| o.estimates.n_used),
        quarantined: out.map_or(0, |o| o.estimates.quarantined.len()),
        z_max: exp.tolerances.z_max,
        runtime_seconds: out.map_or(0.0, |o| o.runtime_seconds),
        version: VERSION.into(),
    }
}

#[derive(Serialize)]
struct TheoryRow {
    p: usize,
    q: usize,
    label_p: String,
    label_q: String,
    method: Method,
    value: f64,
}

/// Every evaluator that applies to each pair `p <= q`.
pub fn theory_rows(exp: &Experiment) -> Result<Vec<(usize, usize, Method, f64)>> {
    use crate::observables::Statistic::Chebyshev;
    let m = exp.observables.len();
    let mut rows = Vec::new();
    for p in 0..m {
        for q in p..m {
            let both_cheb = matches!(
                (exp.observables[p].statistic, exp.observables[q].statistic),
                (Chebyshev { .. }, Chebyshev { .. })
            );
            let mut methods = vec![Method::Series, Method::Contour, Method::LogKernel];
            if both_cheb {
                methods.extend([Method::ChebyshevClosed, Method::ChebyshevExpanded]);
            }
            for method in methods {
                let (method, value) = compare::theory_for_pair(exp, p, q, Some(method))?;
                rows.push((p, q, method, value));
            }
        }
    }
    Ok(rows)
}

fn cmd_theory(args: &TheoryArgs) -> Result<i32> {
    let exp = load(&args.source, &Overrides { scale: args.scale, ..Default::default() })?;
    let rows = theory_rows(&exp)?;
    let meta = metadata(&exp, None);
    let labels = exp.labels();
    let dir = &args.output.out;
    if args.output.format.csv() {
        let mut w = create(dir, "theory.csv")?;
        writeln!(w, "{}", meta.comment_line())?;
        writeln!(w, "p,q,label_p,label_q,method,value")?;
        for &(p, q, method, v) in &rows {
            writeln!(w, "{p},{q},{},{},{},{v:.17e}", labels[p], labels[q], method.name())?;
        }
        w.flush()?;
    }
    if args.output.format.json() {
        let rows: Vec<TheoryRow> = rows
            .iter()
            .map(|&(p, q, method, value)| TheoryRow {
                p,
                q,
                label_p: labels[p].clone(),
                label_q: labels[q].clone(),
                method,
                value,
            })
            .collect();
        write_json(dir, "theory.json", &serde_json::json!({ "metadata": meta, "rows": rows }))?;
    }
    println!("{} observables, {} theory values written to {}", labels.len(), rows.len(), dir.display());
    Ok(exit_code::PASS)
}

fn simulate(args: &SimulateArgs) -> Result<(Experiment, SimulationOutput)> {
    let exp = load(
        &args.source,
        &Overrides {
            seed: args.seed,
            n_samples: args.samples,
            scale: args.scale,
        },
    )?;
    if args.threads == Some(0) {
        return Err(Error::Usage("--threads must be at least 1".into()));
    }
    let opts = RunOptions {
        threads: args.threads,
        keep_raw: args.raw,
        keep_spectra: args.spectra,
    };
    log::info!("{}: {} samples at L = {}", exp.name, exp.n_samples, exp.scale);
    let out = run_experiment(&exp, &opts)?;
    let meta = metadata(&exp, Some(&out));
    let dir = &args.output.out;
    let est = &out.estimates;
    if args.output.format.csv() {
        let mut w = create(dir, "estimates.csv")?;
        write_estimates_csv(&mut w, est, &meta)?;
        w.flush()?;
        let mut w = create(dir, "cumulants.csv")?;
        writeln!(w, "{}", meta.comment_line())?;
        writeln!(w, "index,label,mean,k2,k3,k3_stderr,k4,k4_stderr,skewness,excess_kurtosis")?;
        for (i, c) in est.cumulants.iter().enumerate() {
            writeln!(
                w,
                "{i},{},{:e},{:e},{:e},{:e},{:e},{:e},{:e},{:e}",
                est.labels[i], est.means[i], c.k2, c.k3, c.k3_stderr, c.k4, c.k4_stderr, c.skewness, c.excess_kurtosis
            )?;
        }
        w.flush()?;
    }
    if args.output.format.json() {
        write_json(dir, "estimates.json", &serde_json::json!({ "metadata": meta, "estimates": est }))?;
    }
    if let Some(raw) = &out.raw {
        let mut w = create(dir, "raw.csv")?;
        write_raw_csv(&mut w, &est.labels, raw, &meta)?;
        w.flush()?;
    }
    for dump in &out.spectra {
        let mut w = create(dir, &format!("spectra_{}_t{}.csv", dump.set, dump.time))?;
        writeln!(w, "{}", meta.comment_line())?;
        write_spectra_csv(&mut w, &dump.samples)?;
        w.flush()?;
    }
    Ok((exp, out))
}

fn cmd_simulate(args: &SimulateArgs) -> Result<i32> {
    let (_, out) = simulate(args)?;
    println!(
        "{} samples used ({} quarantined) in {:.1} s; results in {}",
        out.estimates.n_used,
        out.estimates.quarantined.len(),
        out.runtime_seconds,
        args.output.out.display()
    );
    Ok(exit_code::PASS)
}

fn cmd_compare(args: &SimulateArgs) -> Result<i32> {
    let (exp, out) = simulate(args)?;
    let report = compare::compare_run(&out, &exp)?;
    let dir = &args.output.out;
    if args.output.format.csv() {
        let mut w = create(dir, "comparison.csv")?;
        report.write_pairs_csv(&mut w)?;
        w.flush()?;
        let mut w = create(dir, "gaussianity.csv")?;
        report.write_gaussianity_csv(&mut w)?;
        w.flush()?;
    }
    if args.output.format.json() {
        write_json(dir, "report.json", &report)?;
    }
    let worst = report.pairs.iter().map(|p| p.z.abs()).fold(0.0, f64::max);
    println!(
        "{}: {} covariance entries, {} Gaussianity checks, max |z| = {worst:.2} (limit {})",
        exp.name,
        report.pairs.len(),
        report.gaussianity.len(),
        exp.tolerances.z_max
    );
    for f in report.failures() {
        println!("FAIL {f}");
    }
    println!("{}", if report.passed { "PASS" } else { "FAIL" });
    Ok(if report.passed { exit_code::PASS } else { exit_code::VERDICT_FAILURE })
}

/// Summary of the `kernel` subcommand checks.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct KernelReport {
    pub grid_points: usize,
    pub pullback: PullbackCheck,
    pub max_roundtrip_error: f64,
    pub gram_min_eigenvalues: Vec<f64>,
    pub passed: bool,
}

pub const PULLBACK_TOLERANCE: f64 = 1e-10;
pub const GRAM_TOLERANCE: f64 = 1e-9;
pub const ROUNDTRIP_TOLERANCE: f64 = 1e-9;

/// Grid rows `(x, t, Ξ, kernel to reference, Green to reference)` plus the
/// checks of a kernel config.
pub fn kernel_report(kc: &KernelConfig) -> Result<(Vec<[f64; 7]>, KernelReport)> {
    kc.validate()?;
    let sec = &kc.section;
    let [x0, t0] = kc.reference;
    let z0 = omega(x0, sec.phi.eval(t0))?;
    let xi0 = xi(x0, t0, sec)?;
    let mut rows = Vec::new();
    let mut points = Vec::new();
    let mut roundtrip = 0.0f64;
    for t in linspace(kc.t) {
        for x in linspace(kc.x) {
            if x.abs() >= 2.0 * sec.phi.eval(t).sqrt() {
                continue;
            }
            let z = omega(x, sec.phi.eval(t))?;
            let zeta = xi(x, t, sec)?;
            let (x2, t2) = xi_inv(zeta, sec)?;
            roundtrip = roundtrip.max((x2 - x).abs().max((t2 - t).abs()));
            let same = (x, t) == (x0, t0);
            let k = if same { f64::INFINITY } else { kernel_c(z, sec.psi.eval(t), z0, sec.psi.eval(t0), &sec.covariance)? };
            let g = if same { f64::INFINITY } else { green_halfplane(zeta, xi0) };
            rows.push([x, t, zeta.z().re, zeta.z().im, k, g, (k - g).abs()]);
            points.push((x, t));
        }
    }
    let pullback = section_pullback_check(sec, &points)?;
    let mut gram = Vec::new();
    if let Some(g) = kc.gram {
        for i in 0..g.configurations {
            let conf = random_configuration(g.seed, i as u64, g.points);
            gram.push(gram_pd_check(&conf, &sec.covariance, g.eps)?);
        }
    }
    let pull_ok = match &pullback {
        PullbackCheck::Applicable { max_discrepancy, .. } => *max_discrepancy <= PULLBACK_TOLERANCE,
        PullbackCheck::Inapplicable { .. } => true,
    };
    let passed = pull_ok && roundtrip <= ROUNDTRIP_TOLERANCE && gram.iter().all(|&m| m >= -GRAM_TOLERANCE);
    Ok((
        rows,
        KernelReport {
            grid_points: points.len(),
            pullback,
            max_roundtrip_error: roundtrip,
            gram_min_eigenvalues: gram,
            passed,
        },
    ))
}

fn cmd_kernel(args: &KernelArgs) -> Result<i32> {
    let kc: KernelConfig = parse_json(&source_text(&args.source, "kernel", presets::kernel)?)?;
    let (rows, report) = kernel_report(&kc)?;
    let dir = &args.output.out;
    let comment = format!("# seed={},L=NA,n_samples=0,version={VERSION}", kc.gram.map_or(0, |g| g.seed));
    if args.output.format.csv() {
        let mut w = create(dir, "kernel_grid.csv")?;
        writeln!(w, "{comment}")?;
        writeln!(w, "x,t,xi_re,xi_im,kernel,green,discrepancy")?;
        for r in &rows {
            let s: Vec<String> = r.iter().map(|v| format!("{v:e}")).collect();
            writeln!(w, "{}", s.join(","))?;
        }
        w.flush()?;
        let mut w = create(dir, "gram.csv")?;
        writeln!(w, "{comment}")?;
        writeln!(w, "configuration,min_eigenvalue")?;
        for (i, m) in report.gram_min_eigenvalues.iter().enumerate() {
            writeln!(w, "{i},{m:e}")?;
        }
        w.flush()?;
    }
    if args.output.format.json() {
        write_json(dir, "kernel_report.json", &report)?;
    }
    match &report.pullback {
        PullbackCheck::Applicable { max_discrepancy, pairs } => {
            println!("pullback: max discrepancy {max_discrepancy:e} over {pairs} pairs")
        }
        PullbackCheck::Inapplicable { reason } => println!("pullback: not applicable ({reason})"),
    }
    println!("section map round trip: max error {:e}", report.max_roundtrip_error);
    if let Some(m) = report.gram_min_eigenvalues.iter().cloned().reduce(f64::min) {
        println!("Gram matrices: smallest eigenvalue {m:e}");
    }
    println!("{}", if report.passed { "PASS" } else { "FAIL" });
    Ok(if report.passed { exit_code::PASS } else { exit_code::VERDICT_FAILURE })
}

fn cmd_selftest(args: &SelftestArgs) -> Result<i32> {
    let report = run_selftest()?;
    for c in &report.checks {
        println!(
            "{} {:<58} {:>6} checked, worst {:.2e} (tolerance {:.0e})",
            if c.passed { "ok  " } else { "FAIL" },
            c.name,
            c.count,
            c.worst,
            c.tolerance
        );
    }
    println!("{} identities in {} families", report.identities(), report.checks.len());
    if let Some(dir) = &args.out {
        write_json(dir, "selftest.json", &report)?;
    }
    Ok(if report.passed() { exit_code::PASS } else { exit_code::VERDICT_FAILURE })
}

/// Run a parsed command, returning its exit code.
pub fn run(cli: &Cli) -> Result<i32> {
    match &cli.command {
        Command::Theory(a) => cmd_theory(a),
        Command::Simulate(a) => cmd_simulate(a),
        Command::Compare(a) => cmd_compare(a),
        Command::Kernel(a) => cmd_kernel(a),
        Command::Selftest(a) => cmd_selftest(a),
    }
}

/// Parse `args` (including the program name), run, and map errors to exit
/// codes.
pub fn run_from_args<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<std::ffi::OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(c) => c,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() { exit_code::USAGE } else { exit_code::PASS };
        }
    };
    match run(&cli) {
        Ok(code) => code,
        Err(e) => {
            eprintln!("error: {e}");
            e.exit_code()
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn parses_overrides() {
        let cli = Cli::try_parse_from(["wigner-clt", "simulate", "--config", "goe_static.json", "--seed", "7"]).unwrap();
        match cli.command {
            Command::Simulate(a) => {
                assert_eq!(a.seed, Some(7));
                assert_eq!(a.source.config.as_deref(), Some(Path::new("goe_static.json")));
            }
            other => panic!("{other:?}"),
        }
    }

    #[test]
    fn usage_errors_exit_2() {
        assert_eq!(run_from_args(["wigner-clt", "simulate"]), 2);
        assert_eq!(run_from_args(["wigner-clt", "simulate", "--preset", "goe_static", "--bogus"]), 2);
        assert_eq!(run_from_args(["wigner-clt", "simulate", "--config", "/nonexistent/x.json"]), 2);
        assert_eq!(run_from_args(["wigner-clt", "theory", "--preset", "nope"]), 2);
    }

    #[test]
    fn theory_rows_cover_all_evaluators() {
        let exp = parse_experiment(presets::CHEBYSHEV_DECORRELATION).unwrap().resolve().unwrap();
        let rows = theory_rows(&exp).unwrap();
        let m = exp.observables.len();
        assert_eq!(rows.len(), 5 * m * (m + 1) / 2);
        for &(p, q, _, v) in &rows {
            let (sp, sq) = (exp.observables[p].statistic, exp.observables[q].statistic);
            if sp != sq {
                assert!(v.abs() < 1e-8, "{p} {q} {v}");
            }
        }
    }

    #[test]
    fn kernel_preset_passes() {
        let kc: KernelConfig = parse_json(presets::MONOTONE_SECTION).unwrap();
        let (rows, rep) = kernel_report(&kc).unwrap();
        assert!(!rows.is_empty());
        assert!(rep.passed, "{rep:?}");
    }
}
