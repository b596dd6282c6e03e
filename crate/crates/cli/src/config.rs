//! Flat `key = value` experiment configuration.
//!
//! ```text
//! # comments and blank lines are ignored
//! name = sweep
//! n = 100, 200, 500
//! p = 12
//! k = 3
//! schedule = fixed_p        # fixed_p | direct | high_dim
//! delta = 1, 1.5, 2         # multiplier for high_dim
//! gamma = 1                 # fixed_p only
//! estimators = mil; bic; kn:alpha=0.0001
//! reps = 200
//! seed = 42
//! ```
//!
//! Alternatively `table = table6` starts from a built-in grid, and only
//! `reps`, `seed`, `k_max`, `center`, `rotation` and `estimators` may be
//! given alongside it. Cells are ordered by `p`, then `n`, then `delta`.

use std::collections::BTreeMap;

use rankscope::criteria::CandidateRange;
use rankscope::montecarlo::{builtin_table, builtin_table_names, ExperimentConfig, DEFAULT_REPS, DEFAULT_SEED};
use rankscope::{EstimatorSpec, SnrSchedule};
use sha2::{Digest, Sha256};

use crate::error::{CliError, CliResult};

const GRID_KEYS: &[&str] = &["n", "p", "k", "schedule", "delta", "gamma", "noise"];
const SHARED_KEYS: &[&str] = &[
    "name",
    "table",
    "estimators",
    "reps",
    "seed",
    "k_max",
    "center",
    "rotation",
];

/// Parsed key/value pairs, keyed and ordered by name.
#[derive(Debug, Clone, PartialEq, Eq, Default)]
pub struct KeyValues(BTreeMap<String, String>);

impl KeyValues {
    pub fn parse(text: &str) -> CliResult<Self> {
        let mut map = BTreeMap::new();
        for (i, raw) in text.lines().enumerate() {
            let line = raw.split('#').next().unwrap_or("").trim();
            if line.is_empty() {
                continue;
            }
            let (k, v) = line
                .split_once('=')
                .ok_or_else(|| CliError::Parse(format!("config line {}: expected `key = value`", i + 1)))?;
            let key = k.trim().to_ascii_lowercase();
            if !GRID_KEYS.contains(&key.as_str()) && !SHARED_KEYS.contains(&key.as_str()) {
                return Err(CliError::Parse(format!("config line {}: unknown key `{key}`", i + 1)));
            }
            if map.insert(key.clone(), v.trim().to_string()).is_some() {
                return Err(CliError::Parse(format!("config line {}: duplicate key `{key}`", i + 1)));
            }
        }
        Ok(Self(map))
    }

    pub fn get(&self, key: &str) -> Option<&str> {
        self.0.get(key).map(String::as_str)
    }

    pub fn set(&mut self, key: &str, value: impl Into<String>) {
        self.0.insert(key.to_string(), value.into());
    }

    /// `key=value` lines in key order.
    pub fn canonical(&self) -> String {
        self.0.iter().map(|(k, v)| format!("{k}={v}\n")).collect()
    }

    /// SHA-256 of [`KeyValues::canonical`], hex encoded.
    pub fn digest(&self) -> String {
        hex::encode(Sha256::digest(self.canonical().as_bytes()))
    }
}

/// A resolved grid ready to run.
#[derive(Debug, Clone, PartialEq)]
pub struct SimulationPlan {
    pub name: String,
    pub title: String,
    pub cells: Vec<ExperimentConfig>,
    pub digest: String,
}

impl SimulationPlan {
    pub fn seed(&self) -> u64 {
        self.cells.first().map_or(DEFAULT_SEED, |c| c.seed)
    }
}

fn list<T: std::str::FromStr>(kv: &KeyValues, key: &str) -> CliResult<Option<Vec<T>>> {
    let Some(raw) = kv.get(key) else { return Ok(None) };
    let items: Vec<&str> = raw.split(',').map(str::trim).filter(|s| !s.is_empty()).collect();
    if items.is_empty() {
        return Err(CliError::Parse(format!("config: `{key}` is empty")));
    }
    items
        .iter()
        .map(|s| {
            s.parse::<T>()
                .map_err(|_| CliError::Parse(format!("config: `{key}` has an invalid entry `{s}`")))
        })
        .collect::<CliResult<Vec<T>>>()
        .map(Some)
}

fn scalar<T: std::str::FromStr>(kv: &KeyValues, key: &str) -> CliResult<Option<T>> {
    match list::<T>(kv, key)? {
        None => Ok(None),
        Some(v) if v.len() == 1 => Ok(v.into_iter().next()),
        Some(_) => Err(CliError::Parse(format!("config: `{key}` takes a single value"))),
    }
}

fn required<T: std::str::FromStr>(kv: &KeyValues, key: &str) -> CliResult<Vec<T>> {
    list(kv, key)?.ok_or_else(|| CliError::Parse(format!("config: missing `{key}`")))
}

pub fn parse_estimators(raw: &str) -> CliResult<Vec<EstimatorSpec>> {
    raw.split(';')
        .map(str::trim)
        .filter(|s| !s.is_empty())
        .map(|s| {
            s.parse::<EstimatorSpec>()
                .map_err(|e| CliError::Parse(format!("config: {e}")))
        })
        .collect()
}

pub fn unknown_table(name: &str) -> CliError {
    CliError::Usage(format!(
        "unknown table `{name}`; valid names: {}",
        builtin_table_names().join(", ")
    ))
}

/// Settings applied on top of whatever the grid declares.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq)]
pub struct Overrides {
    pub reps: Option<usize>,
    pub seed: Option<u64>,
}

impl Overrides {
    fn record(&self, kv: &mut KeyValues) {
        if let Some(r) = self.reps {
            kv.set("reps", r.to_string());
        }
        if let Some(s) = self.seed {
            kv.set("seed", s.to_string());
        }
    }
}

/// Builds a plan from config text.
pub fn plan_from_config(text: &str, overrides: Overrides) -> CliResult<SimulationPlan> {
    let mut kv = KeyValues::parse(text)?;
    overrides.record(&mut kv);
    plan_from_kv(&kv)
}

/// Builds a plan from a built-in table name.
pub fn plan_from_table(name: &str, overrides: Overrides) -> CliResult<SimulationPlan> {
    let mut kv = KeyValues::default();
    kv.set("table", name);
    overrides.record(&mut kv);
    plan_from_kv(&kv)
}

fn plan_from_kv(kv: &KeyValues) -> CliResult<SimulationPlan> {
    let (name, title, mut cells) = match kv.get("table") {
        Some(table) => {
            if let Some(k) = GRID_KEYS.iter().find(|k| kv.get(k).is_some()) {
                return Err(CliError::Parse(format!(
                    "config: `{k}` cannot be combined with `table`"
                )));
            }
            let t = builtin_table(table).ok_or_else(|| unknown_table(table))?;
            (kv.get("name").unwrap_or(&t.name).to_string(), t.title, t.cells)
        }
        None => {
            let cells = grid_cells(kv)?;
            let name = kv.get("name").unwrap_or("custom").to_string();
            let title = format!("{} cells from a config file", cells.len());
            (name, title, cells)
        }
    };
    let estimators = kv.get("estimators").map(parse_estimators).transpose()?;
    let reps = scalar::<usize>(kv, "reps")?;
    let seed = scalar::<u64>(kv, "seed")?;
    let k_max = scalar::<usize>(kv, "k_max")?;
    let center = scalar::<bool>(kv, "center")?;
    let rotation = scalar::<u64>(kv, "rotation")?;
    for c in &mut cells {
        if let Some(e) = &estimators {
            c.estimators = e.clone();
        }
        if let Some(r) = reps {
            c.reps = r;
        }
        if let Some(s) = seed {
            c.seed = s;
        }
        if let Some(k) = k_max {
            c.range = CandidateRange::new(k, c.p).map_err(|e| CliError::Parse(format!("config: {e}")))?;
        }
        if let Some(b) = center {
            c.center = b;
        }
        if rotation.is_some() {
            c.rotation = rotation;
        }
        c.validate().map_err(|e| CliError::Parse(format!("config: {e}")))?;
    }
    if cells.is_empty() {
        return Err(CliError::Parse("config: the grid has no cells".into()));
    }
    Ok(SimulationPlan {
        name,
        title,
        cells,
        digest: kv.digest(),
    })
}

fn grid_cells(kv: &KeyValues) -> CliResult<Vec<ExperimentConfig>> {
    let ns: Vec<usize> = required(kv, "n")?;
    let ps: Vec<usize> = required(kv, "p")?;
    let k: usize = scalar(kv, "k")?.ok_or_else(|| CliError::Parse("config: missing `k`".into()))?;
    let deltas: Vec<f64> = required(kv, "delta")?;
    let gamma: f64 = scalar(kv, "gamma")?.unwrap_or(1.0);
    let noise: f64 = scalar(kv, "noise")?.unwrap_or(1.0);
    let schedule = kv.get("schedule").unwrap_or("fixed_p");
    let make = |delta: f64| -> CliResult<SnrSchedule> {
        Ok(match schedule {
            "fixed_p" => SnrSchedule::FixedP { delta, gamma },
            "direct" => SnrSchedule::Direct { delta },
            "high_dim" => SnrSchedule::HighDim { multiplier: delta },
            other => {
                return Err(CliError::Parse(format!(
                    "config: unknown schedule `{other}`; expected fixed_p, direct or high_dim"
                )))
            }
        })
    };
    if kv.get("estimators").is_none() {
        return Err(CliError::Parse("config: missing `estimators`".into()));
    }
    let mut cells = Vec::new();
    for &p in &ps {
        for &n in &ns {
            for &delta in &deltas {
                let mut c = ExperimentConfig::new(n, p, k, make(delta)?, Vec::new());
                c.noise = noise;
                c.reps = DEFAULT_REPS;
                cells.push(c);
            }
        }
    }
    Ok(cells)
}
