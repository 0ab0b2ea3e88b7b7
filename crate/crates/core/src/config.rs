//! Experiment configuration: JSON schema, presets, and validation into a
//! resolved [`Experiment`].

use std::collections::BTreeMap;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::entry_process::{EntryProcessSpec, TimeGrid};
use crate::error::{Error, Result};
use crate::kernel::SectionSpec;
use crate::observables::{ObservableSpec, Statistic};
use crate::theory::QuadratureParams;
use crate::wigner::{IndexSet, DEFAULT_CAPACITY};

pub const SCHEMA_VERSION: u32 = 1;
pub const MIN_SAMPLES: usize = 100;

/// How an index set is written in a config.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(untagged, deny_unknown_fields)]
pub enum SetDef {
    Explicit(Vec<usize>),
    Prefix { prefix: usize },
    Range { range: [usize; 2] },
    /// `{1, ..., round(f L)}`.
    PrefixFraction { prefix_frac: f64 },
}

impl SetDef {
    pub fn resolve(&self, scale: f64) -> Result<IndexSet> {
        match self {
            SetDef::Explicit(v) => IndexSet::new(v.clone()),
            SetDef::Prefix { prefix } => IndexSet::prefix(*prefix),
            SetDef::Range { range } => IndexSet::range(range[0], range[1]),
            SetDef::PrefixFraction { prefix_frac } => {
                if !(*prefix_frac > 0.0 && prefix_frac.is_finite()) {
                    return Err(Error::Domain(format!("prefix_frac must be positive, got {prefix_frac}")));
                }
                IndexSet::prefix((prefix_frac * scale).round() as usize)
            }
        }
    }
}

/// One observable, or the product of sets x times x statistics.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum ObservableEntry {
    Single(ObservableSpec),
    Product(ObservableProduct),
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ObservableProduct {
    pub sets: Vec<String>,
    pub times: Vec<f64>,
    pub statistics: Vec<Statistic>,
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct Tolerances {
    pub z_max: f64,
    /// Include third and fourth cumulant verdicts.
    pub gaussianity: bool,
}

impl Default for Tolerances {
    fn default() -> Self {
        Tolerances {
            z_max: 5.0,
            gaussianity: true,
        }
    }
}

fn default_capacity() -> usize {
    DEFAULT_CAPACITY
}

/// The on-disk experiment description.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    pub schema_version: u32,
    #[serde(default)]
    pub name: Option<String>,
    /// The scale `L`.
    pub scale: f64,
    #[serde(default)]
    pub ambient_dim: Option<usize>,
    pub entries: EntryProcessSpec,
    pub times: TimeGrid,
    pub sets: BTreeMap<String, SetDef>,
    pub observables: Vec<ObservableEntry>,
    pub n_samples: usize,
    pub seed: u64,
    #[serde(default)]
    pub tolerances: Tolerances,
    #[serde(default)]
    pub quadrature: QuadratureParams,
    #[serde(default = "default_capacity")]
    pub capacity: usize,
}

/// Command-line overrides applied before validation.
#[derive(Clone, Copy, Debug, Default, PartialEq)]
pub struct Overrides {
    pub seed: Option<u64>,
    pub n_samples: Option<usize>,
    pub scale: Option<f64>,
}

impl ExperimentConfig {
    pub fn apply(&mut self, o: &Overrides) {
        if let Some(s) = o.seed {
            self.seed = s;
        }
        if let Some(n) = o.n_samples {
            self.n_samples = n;
        }
        if let Some(l) = o.scale {
            self.scale = l;
        }
    }

    /// Check every invariant and resolve names, sets and times.
    pub fn resolve(&self) -> Result<Experiment> {
        if self.schema_version != SCHEMA_VERSION {
            return Err(Error::config(
                "/schema_version",
                format!("unsupported schema version {}, expected {SCHEMA_VERSION}", self.schema_version),
            ));
        }
        if !(self.scale > 0.0 && self.scale.is_finite()) {
            return Err(Error::config("/scale", format!("scale must be positive, got {}", self.scale)));
        }
        if self.n_samples < MIN_SAMPLES {
            return Err(Error::config(
                "/n_samples",
                format!("n_samples = {} is below {MIN_SAMPLES}", self.n_samples),
            ));
        }
        if !(self.tolerances.z_max > 0.0) {
            return Err(Error::config("/tolerances/z_max", "z_max must be positive"));
        }
        self.quadrature
            .validate()
            .map_err(|e| Error::config("/quadrature", e.to_string()))?;
        self.entries
            .validate()
            .map_err(|e| Error::config("/entries", e.to_string()))?;
        if self.sets.is_empty() {
            return Err(Error::config("/sets", "at least one index set is required"));
        }
        let mut sets = Vec::new();
        for (name, def) in &self.sets {
            let set = def
                .resolve(self.scale)
                .map_err(|e| Error::config(format!("/sets/{}", escape(name)), e.to_string()))?;
            sets.push((name.clone(), set));
        }
        let max_index = sets.iter().map(|(_, s)| s.max()).max().unwrap_or(0);
        let ambient_dim = match self.ambient_dim {
            Some(d) if d < max_index => {
                return Err(Error::config(
                    "/ambient_dim",
                    format!("ambient_dim = {d} is below the largest set index {max_index}"),
                ))
            }
            Some(d) => d,
            None => max_index,
        };
        let mut observables = Vec::new();
        for (i, entry) in self.observables.iter().enumerate() {
            let expanded: Vec<(String, ObservableSpec)> = match entry {
                ObservableEntry::Single(o) => vec![(format!("/observables/{i}"), o.clone())],
                ObservableEntry::Product(p) => {
                    let mut v = Vec::new();
                    for set in &p.sets {
                        for &time in &p.times {
                            for &statistic in &p.statistics {
                                v.push((
                                    format!("/observables/{i}"),
                                    ObservableSpec { set: set.clone(), time, statistic },
                                ));
                            }
                        }
                    }
                    v
                }
            };
            for (pointer, o) in expanded {
                let set_index = sets
                    .iter()
                    .position(|(n, _)| *n == o.set)
                    .ok_or_else(|| Error::config(format!("{pointer}/set"), format!("unknown set \"{}\"", o.set)))?;
                let time_index = self
                    .times
                    .index_of(o.time)
                    .ok_or_else(|| Error::config(format!("{pointer}/time"), format!("time {} is not on the grid", o.time)))?;
                if o.statistic.degree() == 0 {
                    return Err(Error::config(format!("{pointer}/statistic/k"), "degree must be at least 1"));
                }
                if let Statistic::Chebyshev { k } = o.statistic {
                    if k > crate::theory::chebyshev::CHEBYSHEV_MAX_DEGREE {
                        return Err(Error::config(format!("{pointer}/statistic/k"), "Chebyshev degree above 32"));
                    }
                }
                observables.push(ResolvedObservable {
                    label: format!("{}@{}:{}", o.statistic.label(), o.set, o.time),
                    set_index,
                    time_index,
                    statistic: o.statistic,
                });
            }
        }
        if observables.is_empty() {
            return Err(Error::config("/observables", "at least one observable is required"));
        }
        Ok(Experiment {
            name: self.name.clone().unwrap_or_else(|| "experiment".into()),
            scale: self.scale,
            ambient_dim,
            entries: self.entries.clone(),
            grid: self.times.clone(),
            sets,
            observables,
            n_samples: self.n_samples,
            seed: self.seed,
            tolerances: self.tolerances,
            quadrature: self.quadrature,
            capacity: self.capacity,
        })
    }
}

fn escape(token: &str) -> String {
    token.replace('~', "~0").replace('/', "~1")
}

#[derive(Clone, Debug, PartialEq)]
pub struct ResolvedObservable {
    pub label: String,
    pub set_index: usize,
    pub time_index: usize,
    pub statistic: Statistic,
}

/// A validated experiment.
#[derive(Clone, Debug, PartialEq)]
pub struct Experiment {
    pub name: String,
    pub scale: f64,
    pub ambient_dim: usize,
    pub entries: EntryProcessSpec,
    pub grid: TimeGrid,
    pub sets: Vec<(String, IndexSet)>,
    pub observables: Vec<ResolvedObservable>,
    pub n_samples: usize,
    pub seed: u64,
    pub tolerances: Tolerances,
    pub quadrature: QuadratureParams,
    pub capacity: usize,
}

impl Experiment {
    pub fn set(&self, i: usize) -> &IndexSet {
        &self.sets[i].1
    }

    pub fn time(&self, i: usize) -> f64 {
        self.grid.times()[i]
    }

    pub fn labels(&self) -> Vec<String> {
        self.observables.iter().map(|o| o.label.clone()).collect()
    }
}

fn pointer_from_path(path: &serde_path_to_error::Path) -> String {
    use serde_path_to_error::Segment;
    let mut out = String::new();
    for seg in path.iter() {
        match seg {
            Segment::Seq { index } => out.push_str(&format!("/{index}")),
            Segment::Map { key } => out.push_str(&format!("/{}", escape(key))),
            Segment::Enum { variant } => out.push_str(&format!("/{}", escape(variant))),
            Segment::Unknown => {}
        }
    }
    if out.is_empty() {
        "/".into()
    } else {
        out
    }
}

/// Deserialize JSON text, reporting failures with a JSON pointer.
pub fn parse_json<T: serde::de::DeserializeOwned>(text: &str) -> Result<T> {
    let de = &mut serde_json::Deserializer::from_str(text);
    serde_path_to_error::deserialize(de).map_err(|e| {
        let pointer = pointer_from_path(e.path());
        Error::config(pointer, e.into_inner().to_string())
    })
}

pub fn parse_experiment(text: &str) -> Result<ExperimentConfig> {
    parse_json(text)
}

pub fn load_experiment(path: &Path) -> Result<ExperimentConfig> {
    let text = std::fs::read_to_string(path)
        .map_err(|e| Error::Usage(format!("cannot read config {}: {e}", path.display())))?;
    parse_experiment(&text)
}

/// Settings of the `kernel` subcommand.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct KernelConfig {
    pub schema_version: u32,
    #[serde(default)]
    pub name: Option<String>,
    pub section: SectionSpec,
    /// `[start, stop, count]` for the `x` axis.
    pub x: [f64; 3],
    /// `[start, stop, count]` for the `t` axis.
    pub t: [f64; 3],
    /// Reference point `(x, t)` for the kernel and Green columns.
    pub reference: [f64; 2],
    #[serde(default)]
    pub gram: Option<GramConfig>,
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GramConfig {
    pub configurations: usize,
    pub points: usize,
    pub eps: f64,
    pub seed: u64,
}

impl KernelConfig {
    pub fn validate(&self) -> Result<()> {
        if self.schema_version != SCHEMA_VERSION {
            return Err(Error::config("/schema_version", "unsupported schema version"));
        }
        self.section
            .validate()
            .map_err(|e| Error::config("/section", e.to_string()))?;
        for (name, axis) in [("x", self.x), ("t", self.t)] {
            if !(axis[2] >= 1.0 && axis[2].fract() == 0.0 && axis[0] <= axis[1]) {
                return Err(Error::config(format!("/{name}"), "expected [start, stop, count] with count >= 1"));
            }
        }
        if let Some(g) = self.gram {
            if g.points == 0 || g.configurations == 0 || !(g.eps > 0.0) {
                return Err(Error::config("/gram", "points, configurations and eps must be positive"));
            }
        }
        Ok(())
    }
}

pub fn linspace(axis: [f64; 3]) -> Vec<f64> {
    let n = axis[2] as usize;
    if n == 1 {
        return vec![axis[0]];
    }
    (0..n)
        .map(|i| axis[0] + (axis[1] - axis[0]) * i as f64 / (n - 1) as f64)
        .collect()
}

/// Presets shipped with the crate.
pub mod presets {
    pub const GOE_STATIC: &str = include_str!("../presets/goe_static.json");
    pub const GUE_STATIC: &str = include_str!("../presets/gue_static.json");
    pub const OU_DYNAMIC_NESTED: &str = include_str!("../presets/ou_dynamic_nested.json");
    pub const OU_DYNAMIC_NESTED_GUE: &str = include_str!("../presets/ou_dynamic_nested_gue.json");
    pub const CHEBYSHEV_DECORRELATION: &str = include_str!("../presets/chebyshev_decorrelation.json");
    pub const UNIVERSALITY_THREEPOINT: &str = include_str!("../presets/universality_threepoint.json");
    pub const MONOTONE_SECTION: &str = include_str!("../presets/monotone_section.json");

    pub const EXPERIMENTS: [(&str, &str); 6] = [
        ("goe_static", GOE_STATIC),
        ("gue_static", GUE_STATIC),
        ("ou_dynamic_nested", OU_DYNAMIC_NESTED),
        ("ou_dynamic_nested_gue", OU_DYNAMIC_NESTED_GUE),
        ("chebyshev_decorrelation", CHEBYSHEV_DECORRELATION),
        ("universality_threepoint", UNIVERSALITY_THREEPOINT),
    ];

    pub const KERNELS: [(&str, &str); 1] = [("monotone_section", MONOTONE_SECTION)];

    pub fn experiment(name: &str) -> Option<&'static str> {
        EXPERIMENTS.iter().find(|(n, _)| *n == name).map(|(_, t)| *t)
    }

    pub fn kernel(name: &str) -> Option<&'static str> {
        KERNELS.iter().find(|(n, _)| *n == name).map(|(_, t)| *t)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn presets_resolve() {
        for (name, text) in presets::EXPERIMENTS {
            let cfg = parse_experiment(text).unwrap_or_else(|e| panic!("{name}: {e}"));
            cfg.resolve().unwrap_or_else(|e| panic!("{name}: {e}"));
        }
        for (name, text) in presets::KERNELS {
            let cfg: KernelConfig = parse_json(text).unwrap_or_else(|e| panic!("{name}: {e}"));
            cfg.validate().unwrap();
        }
    }

    #[test]
    fn set_forms() {
        let f = |t: &str| -> IndexSet { serde_json::from_str::<SetDef>(t).unwrap().resolve(200.0).unwrap() };
        assert_eq!(f("[3,1,2]"), IndexSet::prefix(3).unwrap());
        assert_eq!(f(r#"{"prefix":150}"#).len(), 150);
        assert_eq!(f(r#"{"range":[76,225]}"#).elements()[0], 76);
        assert_eq!(f(r#"{"prefix_frac":0.5}"#), IndexSet::prefix(100).unwrap());
        assert!(serde_json::from_str::<SetDef>(r#"{"prefix":1,"x":2}"#).is_err());
    }

    #[test]
    fn errors_carry_pointers() {
        let mut v: serde_json::Value = serde_json::from_str(presets::GOE_STATIC).unwrap();
        v["entries"]["covariance"]["rate"] = serde_json::json!("fast");
        v["entries"]["covariance"]["kind"] = serde_json::json!("ou");
        let e = parse_experiment(&v.to_string()).unwrap_err();
        match e {
            Error::Config { pointer, .. } => assert!(pointer.starts_with("/entries"), "{pointer}"),
            other => panic!("{other:?}"),
        }
        let mut v: serde_json::Value = serde_json::from_str(presets::GOE_STATIC).unwrap();
        v["n_samples"] = serde_json::json!(10);
        let e = parse_experiment(&v.to_string()).unwrap().resolve().unwrap_err();
        assert!(matches!(e, Error::Config { ref pointer, .. } if pointer == "/n_samples"));
        let mut v: serde_json::Value = serde_json::from_str(presets::GOE_STATIC).unwrap();
        v["observables"][0] = serde_json::json!({"set": "nope", "time": 0.0, "statistic": {"kind": "trace_power", "k": 1}});
        let e = parse_experiment(&v.to_string()).unwrap().resolve().unwrap_err();
        assert!(matches!(e, Error::Config { ref pointer, .. } if pointer.starts_with("/observables/0")));
        let mut v: serde_json::Value = serde_json::from_str(presets::GOE_STATIC).unwrap();
        v["bogus"] = serde_json::json!(1);
        assert!(parse_experiment(&v.to_string()).is_err());
        assert_eq!(parse_experiment(&v.to_string()).unwrap_err().exit_code(), 3);
    }

    #[test]
    fn overrides() {
        let mut cfg = parse_experiment(presets::GOE_STATIC).unwrap();
        cfg.apply(&Overrides { seed: Some(7), n_samples: Some(123), scale: None });
        let e = cfg.resolve().unwrap();
        assert_eq!((e.seed, e.n_samples), (7, 123));
    }

    #[test]
    fn linspace_axes() {
        assert_eq!(linspace([0.0, 1.0, 3.0]), vec![0.0, 0.5, 1.0]);
        assert_eq!(linspace([2.0, 2.0, 1.0]), vec![2.0]);
    }
}
