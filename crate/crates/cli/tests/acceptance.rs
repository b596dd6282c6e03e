//! One pass/fail line per acceptance criterion. Exits non-zero if any fail.

use std::process::{Command, ExitCode};
use std::time::Instant;

use ndarray::{Array1, Array2};
use rankscope::criteria::EstimatorSpec;
use rankscope::model::{sample_from_stream, Substream};
use rankscope::montecarlo::{builtin_table, run_cell, ExperimentReport};
use rankscope::spectra::{eig_decompose, eig_descending, CovarianceMatrix};
use rankscope::theory::{consistency_for, phi, psi};
use rankscope::{ExperimentConfig, SpikedModel};

struct Check {
    ok: bool,
    detail: String,
}

impl Check {
    fn new() -> Self {
        Self {
            ok: true,
            detail: String::new(),
        }
    }

    fn record(&mut self, ok: bool, what: String) {
        self.ok &= ok;
        if !self.detail.is_empty() {
            self.detail.push_str("; ");
        }
        self.detail.push_str(&what);
        if !ok {
            self.detail.push_str(" [miss]");
        }
    }

    fn near(&mut self, label: &str, got: f64, target: f64, tol: f64) {
        self.record(
            (got - target).abs() <= tol + 1e-12,
            format!("{label} {got:.3} (want {target} ± {tol})"),
        );
    }

    fn at_least(&mut self, label: &str, got: f64, floor: f64) {
        self.record(got >= floor, format!("{label} {got:.3} (want >= {floor})"));
    }

    fn at_most(&mut self, label: &str, got: f64, cap: f64) {
        self.record(got <= cap, format!("{label} {got:.3} (want <= {cap})"));
    }
}

fn workers() -> usize {
    std::thread::available_parallelism().map_or(1, |n| n.get())
}

fn cell(table: &str, n: usize, p: usize, label: f64) -> ExperimentConfig {
    builtin_table(table)
        .expect("builtin table")
        .cells
        .into_iter()
        .find(|c| c.n == n && c.p == p && c.schedule.label() == label)
        .unwrap_or_else(|| panic!("{table} has no cell n={n}, p={p}, label={label}"))
}

fn run(cfg: &ExperimentConfig) -> ExperimentReport {
    run_cell(cfg, workers()).expect("cell runs")
}

fn prob(r: &ExperimentReport, spec: &EstimatorSpec) -> f64 {
    r.summary(spec).expect("estimator in cell").prob_correct
}

fn fixed_p_prob(table: &str, spec: &EstimatorSpec, n: usize, delta: f64) -> f64 {
    prob(&run(&cell(table, n, 12, delta)), spec)
}

fn c1() -> Check {
    let mut c = Check::new();
    let mil = EstimatorSpec::mil();
    c.at_least("n=1000 d=2", fixed_p_prob("table1", &mil, 1000, 2.0), 0.97);
    c.near("n=1000 d=1.25", fixed_p_prob("table1", &mil, 1000, 1.25), 0.97, 0.10);
    c.near("n=100 d=1", fixed_p_prob("table1", &mil, 100, 1.0), 0.45, 0.12);
    c
}

fn c2() -> Check {
    let mut c = Check::new();
    c.near(
        "n=1000 d=2",
        fixed_p_prob("table2", &EstimatorSpec::Bic, 1000, 2.0),
        0.97,
        0.10,
    );
    c.at_most(
        "n=1000 d=1",
        fixed_p_prob("table2", &EstimatorSpec::Bic, 1000, 1.0),
        0.13,
    );
    c
}

fn c3() -> Check {
    let mut c = Check::new();
    let r = run(&cell("table3", 1000, 12, 2.0));
    let s = r.summary(&EstimatorSpec::aic()).unwrap();
    c.near("n=1000 d=2 prob", s.prob_correct, 0.75, 0.10);
    c.near("mean k", s.mean_khat.unwrap_or(f64::NAN), 3.29, 0.15);
    c
}

fn c4() -> Check {
    let mut c = Check::new();
    for delta in [1.75, 2.0] {
        c.at_least(
            &format!("n=1000 d={delta}"),
            fixed_p_prob("table4", &EstimatorSpec::ModifiedAic, 1000, delta),
            0.97,
        );
    }
    c
}

fn c5() -> Check {
    let mut c = Check::new();
    c.at_least(
        "n=1000 d=2",
        fixed_p_prob("table5", &EstimatorSpec::kn(), 1000, 2.0),
        0.97,
    );
    c.at_most(
        "n=200 d=1",
        fixed_p_prob("table5", &EstimatorSpec::kn(), 200, 1.0),
        0.25,
    );
    c
}

fn c6() -> Check {
    let mut c = Check::new();
    let table = builtin_table("table6").unwrap();
    let col = |spec: &EstimatorSpec| table.cells[0].estimators.iter().position(|e| e == spec).unwrap();
    let (aic, bfc) = (col(&EstimatorSpec::aic()), col(&EstimatorSpec::bfc()));
    let mut differing = 0;
    for cfg in &table.cells {
        let r = run(cfg);
        let delta = cfg.schedule.label();
        if delta == 1.5 {
            c.at_least("GAIC d=1.5", prob(&r, &EstimatorSpec::gaic()), 0.97);
        }
        if delta == 2.5 {
            c.near("MIL d=2.5", prob(&r, &EstimatorSpec::mil()), 0.85, 0.10);
        }
        differing += r
            .k_hats(aic)
            .iter()
            .zip(r.k_hats(bfc))
            .filter(|(a, b)| **a != *b)
            .count();
    }
    c.record(
        differing == 0,
        format!(
            "BFC vs AIC differ on {differing} of {} paired replicates",
            200 * table.cells.len()
        ),
    );
    c
}

fn c7() -> Check {
    let mut c = Check::new();
    for delta in [1.5, 2.5, 2.68, 3.5] {
        let r = run(&cell("table7", 200, 500, delta));
        let (g, b) = (prob(&r, &EstimatorSpec::gaic()), prob(&r, &EstimatorSpec::bfc()));
        if delta == 3.5 {
            c.near("GAIC d=3.5", g, 0.92, 0.10);
            c.near("BFC d=3.5", b, 0.84, 0.10);
        }
        c.record(g >= b, format!("d={delta} GAIC {g:.2} >= BFC {b:.2}"));
    }
    c
}

fn c8() -> Check {
    let mut c = Check::new();
    let r = run(&cell("table8", 200, 200, 2.0));
    c.near("GAIC d=2", prob(&r, &EstimatorSpec::gaic()), 0.85, 0.10);
    c.near("BFC d=2", prob(&r, &EstimatorSpec::bfc()), 0.32, 0.12);
    c
}

fn c9() -> Check {
    let mut c = Check::new();
    for size in [100, 200, 300, 400, 500] {
        let mut cfg = cell("table9", size, size, 2.0);
        assert_eq!(
            cfg,
            ExperimentConfig {
                estimators: cfg.estimators.clone(),
                ..cell("table10", size, size, 2.0)
            }
        );
        cfg.estimators = vec![EstimatorSpec::gaic(), EstimatorSpec::bfc()];
        let r = run(&cfg);
        let (g, b) = (prob(&r, &EstimatorSpec::gaic()), prob(&r, &EstimatorSpec::bfc()));
        c.record(g >= b, format!("n=p={size} GAIC {g:.2} >= BFC {b:.2}"));
        if size == 500 {
            c.near("GAIC n=p=500", g, 0.97, 0.05);
        }
    }
    c
}

fn c10() -> Check {
    let mut c = Check::new();
    let oracle = |c: f64| 0.5 + (1.0 / c).sqrt() - (1.0 + c.sqrt()).ln() / c;
    for (ratio, rounded) in [(0.4, 0.94), (1.0, 0.89), (2.5, 0.83)] {
        let v: f64 = phi(ratio).unwrap();
        c.record((v - oracle(ratio)).abs() <= 1e-10, format!("phi({ratio}) = {v:.10}"));
        let shown = (110.0 * v).round() / 100.0;
        c.record(shown == rounded, format!("1.1*phi({ratio}) rounds to {shown}"));
    }
    for (n, p, lambda, target) in [(500, 200, 2.0, 0.017), (200, 500, 3.68, 0.0085)] {
        let gamma = 1.1 * oracle(p as f64 / n as f64);
        let m = consistency_for(n, p, 10, lambda, gamma)
            .unwrap()
            .margin_underfit
            .unwrap();
        c.record(
            (m - target).abs() <= 5e-4,
            format!("margin at n={n} p={p} is {m:.5} (want {target} ± 5e-4)"),
        );
    }
    let mut worst: f64 = 0.0;
    for i in 1..=200 {
        let r = i as f64 * 0.025;
        let edge = 1.0 + r.sqrt();
        let v: f64 = psi(edge, r).unwrap();
        worst = worst.max((v - edge * edge).abs() / (edge * edge));
    }
    c.record(
        worst <= 1e-10,
        format!("psi(1+sqrt c) = (1+sqrt c)^2 on 200 ratios, worst relative error {worst:.1e}"),
    );
    c
}

fn gaussian_symmetric(p: usize, seed: u64) -> Array2<f64> {
    let white = SpikedModel::new(p, vec![], 1.0).unwrap();
    let g = sample_from_stream(&white, p, Substream::new(seed, 0), None).unwrap();
    let g = g.data();
    Array2::from_shape_fn((p, p), |(i, j)| 0.5 * (g[(i, j)] + g[(j, i)]))
}

fn weyl_pairs() -> (bool, String) {
    let mut violations = 0;
    for pair in 0..1000u64 {
        let p = 2 + (pair % 9) as usize;
        let a = gaussian_symmetric(p, 2 * pair);
        let b = gaussian_symmetric(p, 2 * pair + 1);
        let sum = &a + &b;
        let eig = |m: Array2<f64>| eig_decompose(&CovarianceMatrix::new(m).unwrap()).unwrap().0;
        let (la, lb, ls) = (eig(a), eig(b), eig(sum));
        let tol = 1e-10 * (1.0 + la[0].abs() + lb[0].abs());
        for i in 0..p {
            for j in 0..p - i {
                violations += usize::from(ls[i + j] > la[i] + lb[j] + tol);
                violations += usize::from(ls[p - 1 - i - j] < la[p - 1 - i] + lb[p - 1 - j] - tol);
            }
        }
    }
    (violations == 0, format!("Weyl: {violations} violations on 1000 pairs"))
}

/// Largest two eigenvalues of `X′X/n` by Lanczos on `v ↦ X′(Xv)/n` with full
/// reorthogonalisation.
fn top_two(x: &Array2<f64>, steps: usize) -> (f64, f64) {
    let (n, p) = x.dim();
    let mut basis: Vec<Array1<f64>> = Vec::with_capacity(steps);
    let mut q = Array1::from_shape_fn(p, |i| 1.0 + ((i * 7919) % 13) as f64 / 13.0);
    q /= q.dot(&q).sqrt();
    let (mut alpha, mut beta) = (Vec::new(), Vec::new());
    for _ in 0..steps {
        let xq = x.dot(&q);
        let mut w = Array1::zeros(p);
        for (row, &y) in x.rows().into_iter().zip(&xq) {
            w.scaled_add(y / n as f64, &row);
        }
        let a = w.dot(&q);
        alpha.push(a);
        basis.push(q.clone());
        for _ in 0..2 {
            for v in &basis {
                let h = w.dot(v);
                w.scaled_add(-h, v);
            }
        }
        let b = w.dot(&w).sqrt();
        if b < 1e-12 {
            break;
        }
        beta.push(b);
        q = w / b;
    }
    let m = alpha.len();
    let t = Array2::from_shape_fn((m, m), |(i, j)| match i.abs_diff(j) {
        0 => alpha[i],
        1 => beta[i.min(j)],
        _ => 0.0,
    });
    let ritz = eig_descending(&CovarianceMatrix::new(t).unwrap(), usize::MAX / 2).unwrap();
    (ritz.values()[0], ritz.values()[1])
}

fn spike_and_edge() -> Vec<(bool, String)> {
    let (n, p, lambda, reps) = (4000, 1600, 3.0, 50u64);
    let ratio = p as f64 / n as f64;
    let model = SpikedModel::new(p, vec![lambda], 1.0).unwrap();
    let (mut top, mut second) = (0.0, 0.0);
    for rep in 0..reps {
        let x = sample_from_stream(&model, n, Substream::new(11, rep), None).unwrap();
        let (d1, d2) = top_two(&x.data().to_owned(), 60);
        top += d1 / reps as f64;
        second += d2 / reps as f64;
    }
    let limit = lambda + ratio * lambda / (lambda - 1.0);
    let edge = (1.0 + ratio.sqrt()).powi(2);
    let (e1, e2) = ((top - limit).abs() / limit, (second - edge).abs() / edge);
    vec![
        (
            e1 <= 0.02,
            format!("mean d1 {top:.4} vs psi {limit:.4} ({:.2}%)", 100.0 * e1),
        ),
        (
            e2 <= 0.03,
            format!("mean d2 {second:.4} vs edge {edge:.4} ({:.2}%)", 100.0 * e2),
        ),
    ]
}

fn linear_statistic() -> (bool, String) {
    let (n, p, reps) = (2000, 1000usize, 400u64);
    let ratio = p as f64 / n as f64;
    let white = SpikedModel::new(p, vec![], 1.0).unwrap();
    // The sum of the eigenvalues of X′X/n is its trace.
    let stats: Vec<f64> = (0..reps)
        .map(|rep| {
            let x = sample_from_stream(&white, n, Substream::new(23, rep), None).unwrap();
            x.data().iter().map(|v| v * v).sum::<f64>() / n as f64
        })
        .collect();
    let mean = stats.iter().sum::<f64>() / reps as f64;
    let var = stats.iter().map(|s| (s - mean).powi(2)).sum::<f64>() / (reps - 1) as f64;
    let target = 2.0 * ratio;
    (
        (var - target).abs() <= 0.25 * target,
        format!("Var(sum d) {var:.4} vs 2c = {target} (want ± 25%)"),
    )
}

fn c11() -> Check {
    let mut c = Check::new();
    let (ok, what) = weyl_pairs();
    c.record(ok, what);
    for (ok, what) in spike_and_edge() {
        c.record(ok, what);
    }
    let (ok, what) = linear_statistic();
    c.record(ok, what);
    c
}

fn c12() -> Check {
    let mut c = Check::new();
    let dir = tempfile::tempdir().unwrap();
    for table in ["table1", "table8"] {
        let outputs: Vec<Vec<u8>> = ["1", "3"]
            .iter()
            .map(|w| {
                let path = dir.path().join(format!("{table}_{w}.csv"));
                let status = Command::new(env!("CARGO_BIN_EXE_rankscope"))
                    .args(["simulate", "--table", table, "--workers", w, "--csv"])
                    .arg(&path)
                    .env_remove("RANKSCOPE_SEED")
                    .output()
                    .expect("binary runs")
                    .status;
                assert!(status.success(), "simulate {table} failed");
                std::fs::read(&path).unwrap()
            })
            .collect();
        let same = outputs[0] == outputs[1] && !outputs[0].is_empty();
        c.record(
            same,
            format!("{table} CSV identical for 1 and 3 workers ({} bytes)", outputs[0].len()),
        );
    }
    c
}

fn main() -> ExitCode {
    let criteria: [(u32, fn() -> Check); 12] = [
        (1, c1),
        (2, c2),
        (3, c3),
        (4, c4),
        (5, c5),
        (6, c6),
        (7, c7),
        (8, c8),
        (9, c9),
        (10, c10),
        (11, c11),
        (12, c12),
    ];
    let mut failed = Vec::new();
    for (id, check) in criteria {
        let start = Instant::now();
        let result = check();
        let verdict = if result.ok { "PASS" } else { "FAIL" };
        println!(
            "criterion {id}: {verdict} ({:.1} s) {}",
            start.elapsed().as_secs_f64(),
            result.detail
        );
        if !result.ok {
            failed.push(id);
        }
    }
    if failed.is_empty() {
        println!("acceptance: all 12 criteria pass");
        ExitCode::SUCCESS
    } else {
        println!("acceptance: {} of 12 criteria fail: {failed:?}", failed.len());
        ExitCode::FAILURE
    }
}
