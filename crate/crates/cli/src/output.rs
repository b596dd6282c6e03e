//! Result documents and their CSV, JSON and human renderings.
//!
//! JSON layout: `{"manifest": {...}, "payload": {"type": "estimate" | "experiment" | "consistency", ...}}`.

use std::fmt::Write as _;

use rankscope::montecarlo::ExperimentReport;
use rankscope::{ConsistencyReport, KEstimate};
use serde::{Deserialize, Serialize};

use crate::error::{CliError, CliResult};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunManifest {
    pub command: String,
    pub config_digest: String,
    pub seed: Option<u64>,
    pub version: String,
    pub timestamp: String,
}

impl RunManifest {
    pub fn new(command: &str, config_digest: String, seed: Option<u64>) -> Self {
        Self {
            command: command.to_string(),
            config_digest,
            seed,
            version: env!("CARGO_PKG_VERSION").to_string(),
            timestamp: chrono::Utc::now().to_rfc3339_opts(chrono::SecondsFormat::Secs, true),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EstimatePayload {
    pub source: String,
    pub n: usize,
    pub p: usize,
    pub centered: bool,
    pub eigenvalues: Vec<f64>,
    pub estimates: Vec<KEstimate>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExperimentPayload {
    pub table: String,
    pub title: String,
    pub reports: Vec<ExperimentReport>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "snake_case")]
pub enum Payload {
    Estimate(EstimatePayload),
    Experiment(ExperimentPayload),
    Consistency(ConsistencyReport),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ResultDocument {
    pub manifest: RunManifest,
    pub payload: Payload,
}

impl ResultDocument {
    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("result documents always serialise")
    }

    pub fn from_json(text: &str) -> CliResult<Self> {
        serde_json::from_str(text).map_err(|e| CliError::Parse(format!("result document: {e}")))
    }

    pub fn to_csv(&self) -> String {
        match &self.payload {
            Payload::Estimate(p) => estimate_csv(p),
            Payload::Experiment(p) => experiment_csv(p),
            Payload::Consistency(r) => consistency_csv(r),
        }
    }

    pub fn to_human(&self) -> String {
        match &self.payload {
            Payload::Estimate(p) => estimate_human(p),
            Payload::Experiment(p) => experiment_human(p),
            Payload::Consistency(r) => consistency_human(r),
        }
    }
}

// `{}` on f64 prints the shortest string that parses back to the same value.
fn num(v: f64) -> String {
    format!("{v}")
}

fn opt(v: Option<f64>) -> String {
    v.map(num).unwrap_or_default()
}

/// Text that may contain commas is quoted.
fn field(s: &str) -> String {
    if s.contains([',', '"', '\n']) {
        format!("\"{}\"", s.replace('"', "\"\""))
    } else {
        s.to_string()
    }
}

pub fn experiment_csv(p: &ExperimentPayload) -> String {
    let mut out = String::from("estimator,n,p,k,delta,snr,reps,prob,mean,failures\n");
    for r in &p.reports {
        let c = &r.config;
        for s in &r.summaries {
            let _ = writeln!(
                out,
                "{},{},{},{},{},{},{},{},{},{}",
                field(&s.label),
                c.n,
                c.p,
                c.k,
                num(c.schedule.label()),
                num(r.snr),
                c.reps,
                num(s.prob_correct),
                opt(s.mean_khat),
                s.failures
            );
        }
    }
    out
}

fn estimate_csv(p: &EstimatePayload) -> String {
    let mut out = String::from("estimator,k_hat,saturated,k_prime,value,noise_estimate\n");
    for e in &p.estimates {
        let label = field(&e.curve.spec.to_string());
        for (k, (v, s)) in e.curve.values.iter().zip(&e.noise_estimates).enumerate() {
            let _ = writeln!(out, "{label},{},{},{k},{},{}", e.k_hat, e.saturated, num(*v), num(*s));
        }
    }
    out
}

fn consistency_rows(r: &ConsistencyReport) -> Vec<(&'static str, String)> {
    vec![
        ("n", r.n.to_string()),
        ("p", r.p.to_string()),
        ("k", r.k.to_string()),
        ("lambda_k", num(r.lambda_k)),
        ("c", num(r.c)),
        ("gamma", num(r.gamma)),
        ("phi_c", num(r.phi_c)),
        ("psi_k", opt(r.psi_k)),
        ("margin_underfit", opt(r.margin_underfit)),
        ("underfit_ok", r.underfit_ok.to_string()),
        ("edge_ok", r.edge_ok.to_string()),
        ("gamma_ok", r.gamma_ok.to_string()),
        ("bfc_margin_lt1", opt(r.bfc_margin_lt1)),
        ("bfc_margin_gt1", opt(r.bfc_margin_gt1)),
        ("bfc_ok", r.bfc_ok.to_string()),
    ]
}

fn consistency_csv(r: &ConsistencyReport) -> String {
    let mut out = String::from("field,value\n");
    for (k, v) in consistency_rows(r) {
        let _ = writeln!(out, "{k},{v}");
    }
    out
}

fn experiment_human(p: &ExperimentPayload) -> String {
    let mut out = format!("{}: {}\n", p.table, p.title);
    let _ = writeln!(
        out,
        "{:<24} {:>6} {:>6} {:>4} {:>7} {:>8} {:>6} {:>6}",
        "estimator", "n", "p", "k", "delta", "snr", "prob", "mean"
    );
    for r in &p.reports {
        let c = &r.config;
        for s in &r.summaries {
            let mean = s.mean_khat.map_or_else(|| "-".to_string(), |m| format!("{m:.2}"));
            let _ = write!(
                out,
                "{:<24} {:>6} {:>6} {:>4} {:>7} {:>8.4} {:>6.2} {:>6}",
                s.label,
                c.n,
                c.p,
                c.k,
                num(c.schedule.label()),
                r.snr,
                s.prob_correct,
                mean
            );
            if s.failures > 0 {
                let _ = write!(out, "  ({} failed)", s.failures);
            }
            out.push('\n');
        }
    }
    out
}

fn estimate_human(p: &EstimatePayload) -> String {
    let mut out = format!(
        "{}: n = {}, p = {}{}\n",
        p.source,
        p.n,
        p.p,
        if p.centered { ", centered" } else { "" }
    );
    for e in &p.estimates {
        let _ = writeln!(
            out,
            "\n{}  k_hat = {}{}",
            e.curve.spec,
            e.k_hat,
            if e.saturated { " (saturated at k_max)" } else { "" }
        );
        for (k, v) in e.curve.values.iter().enumerate() {
            let mark = if k == e.k_hat { " *" } else { "" };
            let _ = writeln!(out, "  k'={k:<3} {v:>16.6}{mark}");
        }
    }
    out
}

fn consistency_human(r: &ConsistencyReport) -> String {
    let pass = |b: bool| if b { "pass" } else { "FAIL" };
    let m = |v: Option<f64>| v.map_or_else(|| "undefined".to_string(), |x| format!("{x:.6}"));
    let mut out = format!(
        "n = {}, p = {}, k = {}, lambda_k = {}, c = {:.6}\ngamma = {:.6}, phi(c) = {:.6}, psi(lambda_k) = {}\n",
        r.n,
        r.p,
        r.k,
        r.lambda_k,
        r.c,
        r.gamma,
        r.phi_c,
        m(r.psi_k)
    );
    let bfc_margin = if r.c < 1.0 { r.bfc_margin_lt1 } else { r.bfc_margin_gt1 };
    let _ = writeln!(
        out,
        "  underfit  psi-1-log psi > 2*gamma*c   {}  margin {}",
        pass(r.underfit_ok),
        m(r.margin_underfit)
    );
    let _ = writeln!(out, "  edge      lambda_k > 1+sqrt(c)        {}", pass(r.edge_ok));
    let _ = writeln!(
        out,
        "  overfit   gamma > phi(c)              {}  margin {:.6}",
        pass(r.gamma_ok),
        r.gamma - r.phi_c
    );
    let branch = if r.c < 1.0 { "(c<1 branch)" } else { "(c>=1 branch)" };
    let _ = writeln!(
        out,
        "  bfc       {branch:<28}{}  margin {}",
        pass(r.bfc_ok),
        m(bfc_margin)
    );
    out
}
