//! Seeded replicate experiments.
//!
//! Replicate `r` of a cell draws its observations from substream
//! `(seed, r)`; the spectrum is computed once and every estimator of the cell
//! is evaluated on it. Results depend only on the configuration, never on the
//! number of worker threads.

use ndarray::Array2;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::criteria::{estimate, CandidateRange, EstimatorSpec};
use crate::error::{domain, Error, Result};
use crate::model::{make_simulation_model, random_orthogonal, sample_from_stream, snr_value, SnrSchedule, Substream};
use crate::spectra::{spectrum_of, EigenSpectrum};

pub const DEFAULT_SEED: u64 = 20_120_924;
pub const DEFAULT_REPS: usize = 200;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExperimentConfig {
    pub n: usize,
    pub p: usize,
    pub k: usize,
    pub schedule: SnrSchedule,
    pub noise: f64,
    pub estimators: Vec<EstimatorSpec>,
    pub range: CandidateRange,
    pub reps: usize,
    pub seed: u64,
    /// Subtract column means before forming the covariance.
    #[serde(default)]
    pub center: bool,
    /// Rotate the population covariance by a seeded random orthogonal matrix.
    #[serde(default)]
    pub rotation: Option<u64>,
}

impl ExperimentConfig {
    /// Unit noise, the default candidate range, 200 replicates and the
    /// default seed.
    pub fn new(n: usize, p: usize, k: usize, schedule: SnrSchedule, estimators: Vec<EstimatorSpec>) -> Self {
        Self {
            n,
            p,
            k,
            schedule,
            noise: 1.0,
            estimators,
            range: CandidateRange::default_for(p),
            reps: DEFAULT_REPS,
            seed: DEFAULT_SEED,
            center: false,
            rotation: None,
        }
    }

    pub fn with_reps(mut self, reps: usize) -> Self {
        self.reps = reps;
        self
    }

    pub fn with_seed(mut self, seed: u64) -> Self {
        self.seed = seed;
        self
    }

    pub fn validate(&self) -> Result<()> {
        if self.reps == 0 {
            return Err(domain("reps must be at least 1"));
        }
        if self.n < 2 || self.p < 2 {
            return Err(domain(format!("need n, p >= 2, got n = {}, p = {}", self.n, self.p)));
        }
        if !(self.noise > 0.0 && self.noise.is_finite()) {
            return Err(domain(format!("noise must be positive, got {}", self.noise)));
        }
        CandidateRange::new(self.range.k_max(), self.p)?;
        for e in &self.estimators {
            e.validate()?;
        }
        self.snr().map(|_| ())
    }

    pub fn snr(&self) -> Result<f64> {
        snr_value(&self.schedule, self.n, self.p, self.k)
    }

    fn rotation_matrix(&self) -> Option<Array2<f64>> {
        self.rotation.map(|s| random_orthogonal(self.p, s))
    }
}

/// Spectrum of replicate `rep` of a cell, as seen by every estimator.
pub fn replicate_spectrum(cfg: &ExperimentConfig, rep: u64) -> Result<EigenSpectrum<f64>> {
    cfg.validate()?;
    let q = cfg.rotation_matrix();
    spectrum_for(cfg, cfg.snr()?, rep, q.as_ref())
}

fn spectrum_for(cfg: &ExperimentConfig, snr: f64, rep: u64, q: Option<&Array2<f64>>) -> Result<EigenSpectrum<f64>> {
    let model = make_simulation_model(cfg.p, cfg.k, snr, cfg.noise)?;
    let x = sample_from_stream(&model, cfg.n, Substream::new(cfg.seed, rep), q)?;
    spectrum_of(&x, cfg.center)
}

/// Outcome of one estimator on one replicate.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "status", rename_all = "snake_case")]
pub enum Outcome {
    Ok { k_hat: usize, saturated: bool },
    Failed { code: String },
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct RepRecord {
    /// Substream id.
    pub rep: u64,
    /// One entry per estimator, in configuration order.
    pub outcomes: Vec<Outcome>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EstimatorSummary {
    pub spec: EstimatorSpec,
    pub label: String,
    /// `#{k̂ = k}/reps`; failed replicates count as misses.
    pub prob_correct: f64,
    /// Mean `k̂` over the replicates that did not fail.
    pub mean_khat: Option<f64>,
    /// Counts of `k̂ = 0, 1, …, k_max`.
    pub histogram: Vec<usize>,
    pub failures: usize,
    pub saturated: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExperimentReport {
    pub config: ExperimentConfig,
    pub snr: f64,
    pub summaries: Vec<EstimatorSummary>,
    pub records: Vec<RepRecord>,
}

impl ExperimentReport {
    pub fn summary(&self, spec: &EstimatorSpec) -> Option<&EstimatorSummary> {
        self.summaries.iter().find(|s| &s.spec == spec)
    }

    /// `k̂` per replicate for estimator column `j`, `None` where it failed.
    pub fn k_hats(&self, j: usize) -> Vec<Option<usize>> {
        self.records
            .iter()
            .map(|r| match r.outcomes[j] {
                Outcome::Ok { k_hat, .. } => Some(k_hat),
                Outcome::Failed { .. } => None,
            })
            .collect()
    }
}

fn failure_code(e: &Error) -> String {
    match e {
        Error::Input(m) => format!("input: {m}"),
        Error::Domain(m) => format!("domain: {m}"),
        Error::Numeric { message, .. } => format!("numeric: {message}"),
    }
}

/// Receives `(cell index, replicate, spectrum)` for every replicate whose
/// spectrum could be computed.
pub type SpectrumObserver<'a> = &'a (dyn Fn(usize, u64, &EigenSpectrum<f64>) + Sync);

fn run_rep(
    cfg: &ExperimentConfig,
    snr: f64,
    rep: u64,
    q: Option<&Array2<f64>>,
    observe: Option<(usize, SpectrumObserver<'_>)>,
) -> RepRecord {
    let outcomes = match spectrum_for(cfg, snr, rep, q) {
        Ok(d) => {
            if let Some((cell, f)) = observe {
                f(cell, rep, &d);
            }
            cfg.estimators
                .iter()
                .map(|e| match estimate(e, &d, &cfg.range) {
                    Ok(est) => Outcome::Ok {
                        k_hat: est.k_hat,
                        saturated: est.saturated,
                    },
                    Err(err) => Outcome::Failed {
                        code: failure_code(&err),
                    },
                })
                .collect()
        }
        Err(err) => {
            let code = failure_code(&err);
            vec![Outcome::Failed { code }; cfg.estimators.len()]
        }
    };
    RepRecord { rep, outcomes }
}

fn summarize(cfg: &ExperimentConfig, records: &[RepRecord]) -> Vec<EstimatorSummary> {
    let bins = cfg.range.k_max() + 1;
    cfg.estimators
        .iter()
        .enumerate()
        .map(|(j, spec)| {
            let mut histogram = vec![0usize; bins];
            let (mut failures, mut saturated, mut correct, mut total) = (0, 0, 0, 0usize);
            for r in records {
                match r.outcomes[j] {
                    Outcome::Ok { k_hat, saturated: s } => {
                        histogram[k_hat] += 1;
                        total += k_hat;
                        correct += usize::from(k_hat == cfg.k);
                        saturated += usize::from(s);
                    }
                    Outcome::Failed { .. } => failures += 1,
                }
            }
            let ok = records.len() - failures;
            EstimatorSummary {
                spec: *spec,
                label: spec.to_string(),
                prob_correct: correct as f64 / records.len() as f64,
                mean_khat: (ok > 0).then(|| total as f64 / ok as f64),
                histogram,
                failures,
                saturated,
            }
        })
        .collect()
}

fn pool(workers: usize) -> Result<rayon::ThreadPool> {
    rayon::ThreadPoolBuilder::new()
        .num_threads(workers.max(1))
        .build()
        .map_err(|e| domain(format!("cannot start worker pool: {e}")))
}

fn run_in(
    pool: &rayon::ThreadPool,
    cfg: &ExperimentConfig,
    observe: Option<(usize, SpectrumObserver<'_>)>,
) -> Result<ExperimentReport> {
    cfg.validate()?;
    let snr = cfg.snr()?;
    let q = cfg.rotation_matrix();
    let records: Vec<RepRecord> = pool.install(|| {
        (0..cfg.reps as u64)
            .into_par_iter()
            .map(|r| run_rep(cfg, snr, r, q.as_ref(), observe))
            .collect()
    });
    Ok(ExperimentReport {
        summaries: summarize(cfg, &records),
        config: cfg.clone(),
        snr,
        records,
    })
}

/// Runs one cell on `workers` threads.
pub fn run_cell(cfg: &ExperimentConfig, workers: usize) -> Result<ExperimentReport> {
    run_in(&pool(workers)?, cfg, None)
}

/// Runs every cell in order, sharing one worker pool.
pub fn run_table(grid: &[ExperimentConfig], workers: usize) -> Result<Vec<ExperimentReport>> {
    if grid.is_empty() {
        return Err(domain("empty grid"));
    }
    let pool = pool(workers)?;
    grid.iter().map(|cfg| run_in(&pool, cfg, None)).collect()
}

/// [`run_table`], handing every replicate spectrum to `observe` as it is
/// computed (possibly from several threads at once).
pub fn run_table_observed(
    grid: &[ExperimentConfig],
    workers: usize,
    observe: SpectrumObserver<'_>,
) -> Result<Vec<ExperimentReport>> {
    if grid.is_empty() {
        return Err(domain("empty grid"));
    }
    let pool = pool(workers)?;
    grid.iter()
        .enumerate()
        .map(|(i, cfg)| run_in(&pool, cfg, Some((i, observe))))
        .collect()
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct NamedTable {
    pub name: String,
    pub title: String,
    pub cells: Vec<ExperimentConfig>,
}

const FIXED_P_DELTAS: [f64; 5] = [1.0, 1.25, 1.5, 1.75, 2.0];
const FIXED_P_NS: [usize; 5] = [100, 200, 500, 800, 1000];
const HIGH_DIM_SIZES: [usize; 5] = [100, 200, 300, 400, 500];

fn six_rows() -> Vec<EstimatorSpec> {
    vec![
        EstimatorSpec::mil(),
        EstimatorSpec::aic(),
        EstimatorSpec::ModifiedAic,
        EstimatorSpec::gaic(),
        EstimatorSpec::bfc(),
        EstimatorSpec::kn(),
    ]
}

fn fixed_p(name: &str, title: &str, spec: EstimatorSpec) -> NamedTable {
    let mut cells = Vec::new();
    for &n in &FIXED_P_NS {
        for &delta in &FIXED_P_DELTAS {
            let schedule = SnrSchedule::FixedP { delta, gamma: 1.0 };
            cells.push(ExperimentConfig::new(n, 12, 3, schedule, vec![spec]));
        }
    }
    NamedTable {
        name: name.into(),
        title: title.into(),
        cells,
    }
}

fn direct(name: &str, n: usize, p: usize, deltas: [f64; 5]) -> NamedTable {
    let cells = deltas
        .iter()
        .map(|&delta| ExperimentConfig::new(n, p, 10, SnrSchedule::Direct { delta }, six_rows()))
        .collect();
    NamedTable {
        name: name.into(),
        title: format!("MIL, AIC, modified AIC, GAIC-type, BFC, KN: n={n}, p={p}, k=10, SNR=delta"),
        cells,
    }
}

fn high_dim(name: &str, title: &str, spec: EstimatorSpec) -> NamedTable {
    let mut cells = Vec::new();
    for &p in &HIGH_DIM_SIZES {
        for &n in &HIGH_DIM_SIZES {
            let schedule = SnrSchedule::HighDim { multiplier: 2.0 };
            cells.push(ExperimentConfig::new(n, p, 10, schedule, vec![spec]));
        }
    }
    NamedTable {
        name: name.into(),
        title: title.into(),
        cells,
    }
}

/// The ten standard grids, `table1` … `table10`.
pub fn builtin_tables() -> Vec<NamedTable> {
    let caption = "p=12, k=3, SNR=delta*sqrt(4(p-k/2+1/2)loglog n/n)";
    vec![
        fixed_p("table1", &format!("MIL (gamma=1): {caption}"), EstimatorSpec::mil()),
        fixed_p("table2", &format!("BIC: {caption}"), EstimatorSpec::Bic),
        fixed_p("table3", &format!("AIC: {caption}"), EstimatorSpec::aic()),
        fixed_p(
            "table4",
            &format!("modified AIC: {caption}"),
            EstimatorSpec::ModifiedAic,
        ),
        fixed_p("table5", &format!("KN (alpha=1e-4): {caption}"), EstimatorSpec::kn()),
        direct("table6", 500, 200, [0.5, 1.0, 1.5, 2.0, 2.5]),
        direct("table7", 200, 500, [1.5, 2.5, 2.68, 3.5, 4.5]),
        direct("table8", 200, 200, [1.0, 1.5, 2.0, 2.5, 3.0]),
        high_dim(
            "table9",
            "GAIC-type (gamma=1.1*phi(p/n)): k=10, SNR=2*sqrt(p/n)",
            EstimatorSpec::gaic(),
        ),
        high_dim("table10", "BFC: k=10, SNR=2*sqrt(p/n)", EstimatorSpec::bfc()),
    ]
}

pub fn builtin_table(name: &str) -> Option<NamedTable> {
    builtin_tables().into_iter().find(|t| t.name == name)
}

pub fn builtin_table_names() -> Vec<String> {
    builtin_tables().into_iter().map(|t| t.name).collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    fn small_cell() -> ExperimentConfig {
        ExperimentConfig::new(
            200,
            12,
            3,
            SnrSchedule::FixedP { delta: 2.0, gamma: 1.0 },
            vec![EstimatorSpec::mil(), EstimatorSpec::Bic, EstimatorSpec::kn()],
        )
        .with_reps(24)
    }

    #[test]
    fn same_config_same_report() {
        let cfg = small_cell().with_reps(1);
        assert_eq!(run_cell(&cfg, 1).unwrap(), run_cell(&cfg, 1).unwrap());
    }

    #[test]
    fn worker_count_does_not_matter() {
        let cfg = small_cell();
        assert_eq!(run_cell(&cfg, 1).unwrap(), run_cell(&cfg, 3).unwrap());
    }

    #[test]
    fn summary_invariants() {
        let cfg = small_cell();
        let rep = run_cell(&cfg, 2).unwrap();
        for s in &rep.summaries {
            assert_eq!(s.histogram.iter().sum::<usize>() + s.failures, cfg.reps);
            let hits = s.prob_correct * cfg.reps as f64;
            assert!((hits - hits.round()).abs() < 1e-9);
            assert_eq!(hits.round() as usize, s.histogram[cfg.k]);
            let m = s.mean_khat.unwrap();
            assert!(m >= 0.0 && m <= cfg.range.k_max() as f64);
        }
    }

    #[test]
    fn permuting_estimators_permutes_columns() {
        let cfg = small_cell();
        let mut rev = cfg.clone();
        rev.estimators.reverse();
        let a = run_cell(&cfg, 1).unwrap();
        let b = run_cell(&rev, 1).unwrap();
        let m = cfg.estimators.len();
        for j in 0..m {
            assert_eq!(a.summaries[j], b.summaries[m - 1 - j]);
            assert_eq!(a.k_hats(j), b.k_hats(m - 1 - j));
        }
    }

    #[test]
    fn empty_estimator_list() {
        let mut cfg = small_cell().with_reps(2);
        cfg.estimators.clear();
        let rep = run_cell(&cfg, 1).unwrap();
        assert!(rep.summaries.is_empty());
        assert!(rep.records.iter().all(|r| r.outcomes.is_empty()));
    }

    #[test]
    fn degenerate_replicates_are_recorded() {
        // BFC is undefined for n = 2.
        let cfg =
            ExperimentConfig::new(2, 6, 1, SnrSchedule::Direct { delta: 1.0 }, vec![EstimatorSpec::bfc()]).with_reps(3);
        let rep = run_cell(&cfg, 1).unwrap();
        assert_eq!(rep.summaries[0].failures, 3);
        assert_eq!(rep.summaries[0].prob_correct, 0.0);
        assert_eq!(rep.summaries[0].mean_khat, None);
    }

    #[test]
    fn invalid_configs() {
        assert!(run_cell(&small_cell().with_reps(0), 1).is_err());
        let mut cfg = small_cell();
        cfg.k = 12;
        assert!(run_cell(&cfg, 1).is_err());
        assert!(run_table(&[], 1).is_err());
    }

    #[test]
    fn replicate_spectrum_matches_cell() {
        let cfg = small_cell().with_reps(3);
        let rep = run_cell(&cfg, 1).unwrap();
        for r in 0..3 {
            let d = replicate_spectrum(&cfg, r).unwrap();
            let k = estimate(&cfg.estimators[0], &d, &cfg.range).unwrap().k_hat;
            assert_eq!(rep.k_hats(0)[r as usize], Some(k));
        }
    }

    #[test]
    fn observer_sees_every_replicate() {
        use std::sync::Mutex;
        let cfg = small_cell().with_reps(5);
        let seen = Mutex::new(Vec::new());
        let f = |cell: usize, rep: u64, d: &EigenSpectrum<f64>| {
            seen.lock().unwrap().push((cell, rep, d.values()[0]));
        };
        let reports = run_table_observed(&[cfg.clone(), cfg.clone()], 2, &f).unwrap();
        assert_eq!(reports[0], run_cell(&cfg, 1).unwrap());
        let mut seen = seen.into_inner().unwrap();
        seen.sort_by_key(|s| (s.0, s.1));
        assert_eq!(seen.len(), 10);
        assert_eq!(seen[0].2, replicate_spectrum(&cfg, 0).unwrap().values()[0]);
    }

    #[test]
    fn builtin_grids() {
        let tables = builtin_tables();
        assert_eq!(tables.len(), 10);
        let names: Vec<_> = tables.iter().map(|t| t.name.as_str()).collect();
        assert_eq!(names[0], "table1");
        assert_eq!(names[9], "table10");
        let t1 = builtin_table("table1").unwrap();
        assert_eq!(t1.cells.len(), 25);
        assert!(t1
            .cells
            .iter()
            .all(|c| c.p == 12 && c.k == 3 && c.estimators == vec![EstimatorSpec::mil()]));
        let t5 = builtin_table("table5").unwrap();
        assert_eq!(t5.cells[0].estimators, vec![EstimatorSpec::kn()]);
        let t7 = builtin_table("table7").unwrap();
        assert_eq!(t7.cells.len(), 5);
        assert!(t7
            .cells
            .iter()
            .all(|c| c.n == 200 && c.p == 500 && c.estimators.len() == 6));
        assert_eq!(t7.cells[2].schedule, SnrSchedule::Direct { delta: 2.68 });
        let t9 = builtin_table("table9").unwrap();
        assert_eq!(t9.cells.len(), 25);
        assert!(t9.cells.iter().all(|c| c.range.k_max() == 15 && c.reps == 200));
        assert!(builtin_table("table11").is_none());
    }
}
