//! Selection rules for the number of signals.
//!
//! Every penalized rule is built from the profile log-likelihood
//!
//! ```text
//! L(k′) = −(n/2)·( Σ_{i≤k′} log d_i + (p − k′)·log λ̂_{k′} ),   λ̂_{k′} = mean(d_{k′+1..p})
//! ```
//!
//! (the constant `−np/2` is dropped) minus `w·k′(p − (k′−1)/2)`, where the
//! weight `w` is `γ·log log n` (MIL), `C_n` (generic), `(log n)/2` (BIC),
//! `γ` (AIC-type) or `1.1·φ(p/n)` (GAIC-type). The BIC weight is the one that
//! turns the generic-`C_n` threshold `√(4(p−k/2+1/2)C_n/n)` into BIC's
//! `√(2(p−k/2+1/2)·log n/n)`.
//!
//! Ties are broken toward the smaller `k′`.

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::error::{domain, Error, Result};
use crate::scalar::Real;
use crate::spectra::EigenSpectrum;
use crate::theory::{phi, tw1_quantile, wishart_tw_centering};

/// Candidates `k′ ∈ {0, …, k_max}`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct CandidateRange {
    k_max: usize,
}

impl CandidateRange {
    pub const DEFAULT_CAP: usize = 15;

    pub fn new(k_max: usize, p: usize) -> Result<Self> {
        if p < 1 || k_max > p - 1 {
            return Err(domain(format!(
                "k_max = {k_max} must be at most p - 1 = {}",
                p.saturating_sub(1)
            )));
        }
        Ok(Self { k_max })
    }

    /// `min(p − 1, 15)`.
    pub fn default_for(p: usize) -> Self {
        Self {
            k_max: p.saturating_sub(1).min(Self::DEFAULT_CAP),
        }
    }

    pub fn k_min(&self) -> usize {
        0
    }

    pub fn k_max(&self) -> usize {
        self.k_max
    }

    fn check(&self, p: usize) -> Result<()> {
        if self.k_max + 1 > p {
            return Err(domain(format!("k_max = {} exceeds p - 1 = {}", self.k_max, p - 1)));
        }
        Ok(())
    }
}

/// Noise-level estimate used inside the KN test.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum KnNoise {
    /// Mean of the trailing `p − k′` eigenvalues.
    #[default]
    TrailingMean,
    /// Trailing mean corrected for the downward bias the top `k′` sample
    /// eigenvalues induce, solved by fixed-point iteration.
    BiasCorrected,
}

/// Which BFC formula to use.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum BfcBranch {
    /// `p < n` → small-dimension branch, otherwise the large-dimension one.
    #[default]
    Auto,
    /// The `0 < c < 1` form over all `p` eigenvalues.
    SmallDim,
    /// The `c > 1` form over the first `n − 1` eigenvalues.
    LargeDim,
}

/// One selection rule and its parameters.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "snake_case")]
pub enum EstimatorSpec {
    Mil {
        gamma: f64,
    },
    MilTilde {
        gamma: f64,
    },
    GenericCn {
        c_n: f64,
    },
    Bic,
    AicType {
        gamma: f64,
    },
    ModifiedAic,
    GaicType {
        multiplier: f64,
    },
    Bfc {
        #[serde(default)]
        branch: BfcBranch,
    },
    Kn {
        alpha: f64,
        #[serde(default)]
        noise: KnNoise,
    },
}

impl EstimatorSpec {
    pub const fn mil() -> Self {
        Self::Mil { gamma: 1.0 }
    }

    pub const fn aic() -> Self {
        Self::AicType { gamma: 1.0 }
    }

    pub const fn gaic() -> Self {
        Self::GaicType { multiplier: 1.1 }
    }

    pub const fn bfc() -> Self {
        Self::Bfc {
            branch: BfcBranch::Auto,
        }
    }

    pub const fn kn() -> Self {
        Self::Kn {
            alpha: 1e-4,
            noise: KnNoise::TrailingMean,
        }
    }

    /// MIL, BIC, AIC, modified AIC, GAIC-type, BFC and KN at their default
    /// parameters.
    pub fn standard_set() -> Vec<Self> {
        vec![
            Self::mil(),
            Self::Bic,
            Self::aic(),
            Self::ModifiedAic,
            Self::gaic(),
            Self::bfc(),
            Self::kn(),
        ]
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |what: &str, v: f64| Err(domain(format!("{what} must be positive, got {v}")));
        match *self {
            Self::Mil { gamma } | Self::MilTilde { gamma } | Self::AicType { gamma } if !(gamma > 0.0) => {
                bad("gamma", gamma)
            }
            Self::GenericCn { c_n } if !(c_n > 0.0) => bad("C_n", c_n),
            Self::GaicType { multiplier } if !(multiplier > 0.0) => bad("multiplier", multiplier),
            Self::Kn { alpha, .. } if !(alpha > 0.0 && alpha < 1.0) => {
                Err(domain(format!("alpha must lie in (0, 1), got {alpha}")))
            }
            _ => Ok(()),
        }
    }

    pub fn tag(&self) -> &'static str {
        match self {
            Self::Mil { .. } => "mil",
            Self::MilTilde { .. } => "mil-tilde",
            Self::GenericCn { .. } => "cn",
            Self::Bic => "bic",
            Self::AicType { .. } => "aic",
            Self::ModifiedAic => "aic-mod",
            Self::GaicType { .. } => "gaic",
            Self::Bfc { .. } => "bfc",
            Self::Kn { .. } => "kn",
        }
    }

    /// Every tag with its default parameters, for help output.
    pub fn catalogue() -> &'static [(&'static str, &'static str)] {
        &[
            ("mil", "gamma=1: penalty gamma*k'(p-(k'-1)/2)*log log n"),
            (
                "mil-tilde",
                "gamma=1: MIL in its linearised trailing-sum form (needs noise level 1)",
            ),
            ("cn", "c=<required>: penalty k'(p-(k'-1)/2)*C_n"),
            ("bic", "(no parameters): C_n = (log n)/2"),
            ("aic", "gamma=1: penalty gamma*k'(p-(k'-1)/2)"),
            ("aic-mod", "(no parameters): AIC-type with gamma=2"),
            ("gaic", "mult=1.1: AIC-type with gamma = mult*phi(p/n)"),
            ("bfc", "branch=auto|small|large: minimised two-branch criterion"),
            ("kn", "alpha=1e-4, noise=mean|corrected: sequential Tracy-Widom test"),
        ]
    }
}

impl fmt::Display for EstimatorSpec {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match *self {
            Self::Mil { gamma } => write!(f, "mil:gamma={gamma}"),
            Self::MilTilde { gamma } => write!(f, "mil-tilde:gamma={gamma}"),
            Self::GenericCn { c_n } => write!(f, "cn:c={c_n}"),
            Self::Bic => f.write_str("bic"),
            Self::AicType { gamma } => write!(f, "aic:gamma={gamma}"),
            Self::ModifiedAic => f.write_str("aic-mod"),
            Self::GaicType { multiplier } => write!(f, "gaic:mult={multiplier}"),
            Self::Bfc { branch } => match branch {
                BfcBranch::Auto => f.write_str("bfc"),
                BfcBranch::SmallDim => f.write_str("bfc:branch=small"),
                BfcBranch::LargeDim => f.write_str("bfc:branch=large"),
            },
            Self::Kn { alpha, noise } => match noise {
                KnNoise::TrailingMean => write!(f, "kn:alpha={alpha}"),
                KnNoise::BiasCorrected => write!(f, "kn:alpha={alpha},noise=corrected"),
            },
        }
    }
}

impl FromStr for EstimatorSpec {
    type Err = Error;

    /// `tag[:key=value[,key=value…]]`, e.g. `mil:gamma=1.5` or `kn:alpha=0.001`.
    fn from_str(s: &str) -> Result<Self> {
        let s = s.trim();
        let (tag, params) = match s.split_once(':') {
            Some((t, rest)) => (t.trim(), rest),
            None => (s, ""),
        };
        let mut kv = Vec::new();
        for part in params.split(',').map(str::trim).filter(|p| !p.is_empty()) {
            let (k, v) = part
                .split_once('=')
                .ok_or_else(|| Error::Input(format!("expected key=value in estimator `{s}`, got `{part}`")))?;
            kv.push((k.trim().to_ascii_lowercase(), v.trim().to_string()));
        }
        let mut take = |key: &str| -> Option<String> { kv.iter().position(|(k, _)| k == key).map(|i| kv.remove(i).1) };
        let num = |v: Option<String>, default: Option<f64>, key: &str| -> Result<f64> {
            match v {
                Some(v) => v
                    .parse::<f64>()
                    .map_err(|_| Error::Input(format!("estimator `{s}`: `{key}` is not a number"))),
                None => default.ok_or_else(|| Error::Input(format!("estimator `{s}` needs `{key}=`"))),
            }
        };
        let spec = match tag.to_ascii_lowercase().as_str() {
            "mil" => Self::Mil {
                gamma: num(take("gamma"), Some(1.0), "gamma")?,
            },
            "mil-tilde" => Self::MilTilde {
                gamma: num(take("gamma"), Some(1.0), "gamma")?,
            },
            "cn" => Self::GenericCn {
                c_n: num(take("c"), None, "c")?,
            },
            "bic" => Self::Bic,
            "aic" => Self::AicType {
                gamma: num(take("gamma"), Some(1.0), "gamma")?,
            },
            "aic-mod" => Self::ModifiedAic,
            "gaic" => Self::GaicType {
                multiplier: num(take("mult"), Some(1.1), "mult")?,
            },
            "bfc" => Self::Bfc {
                branch: match take("branch").as_deref() {
                    None | Some("auto") => BfcBranch::Auto,
                    Some("small") => BfcBranch::SmallDim,
                    Some("large") => BfcBranch::LargeDim,
                    Some(other) => return Err(Error::Input(format!("unknown BFC branch `{other}`"))),
                },
            },
            "kn" => Self::Kn {
                alpha: num(take("alpha"), Some(1e-4), "alpha")?,
                noise: match take("noise").as_deref() {
                    None | Some("mean") => KnNoise::TrailingMean,
                    Some("corrected") => KnNoise::BiasCorrected,
                    Some(other) => return Err(Error::Input(format!("unknown KN noise estimate `{other}`"))),
                },
            },
            other => {
                let tags: Vec<&str> = Self::catalogue().iter().map(|(t, _)| *t).collect();
                return Err(Error::Input(format!(
                    "unknown estimator `{other}`; expected one of {}",
                    tags.join(", ")
                )));
            }
        };
        if let Some((k, _)) = kv.first() {
            return Err(Error::Input(format!("estimator `{s}`: unknown parameter `{k}`")));
        }
        spec.validate()?;
        Ok(spec)
    }
}

/// How a curve is optimised.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Mode {
    Maximize,
    Minimize,
    /// Sequential testing: the first `k′` whose statistic is `≤ 0`.
    FirstNonPositive,
}

/// Criterion value per candidate `k′ = 0, 1, …`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CriterionCurve<T> {
    pub spec: EstimatorSpec,
    pub values: Vec<T>,
    pub mode: Mode,
    /// Per-candidate noise-level estimate behind each value.
    pub noise_estimates: Vec<T>,
    /// Penalty multiplier actually applied, where the rule derives one.
    pub tuning: Option<T>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct KEstimate<T> {
    pub k_hat: usize,
    pub curve: CriterionCurve<T>,
    pub noise_estimates: Vec<T>,
    /// Sequential test rejected at every candidate and stopped at `k_max`.
    pub saturated: bool,
}

/// Mean of the trailing `p − k′` eigenvalues.
pub fn noise_mle<T: Real>(spec: &EigenSpectrum<T>, k_prime: usize) -> Result<T> {
    let p = spec.p();
    if k_prime >= p {
        return Err(domain(format!("k' = {k_prime} must be below p = {p}")));
    }
    let tail = &spec.values()[k_prime..];
    Ok(tail.iter().copied().sum::<T>() / T::from_count(tail.len()))
}

/// Profile log-likelihood at `k′`, without the constant `−np/2`.
pub fn profile_loglik<T: Real>(spec: &EigenSpectrum<T>, k_prime: usize) -> Result<T> {
    let lambda = noise_mle(spec, k_prime)?;
    let head = &spec.values()[..k_prime];
    if !(lambda > T::zero()) || head.iter().any(|&d| !(d > T::zero())) {
        return Err(domain(format!(
            "profile likelihood at k' = {k_prime} needs positive eigenvalues"
        )));
    }
    let p = spec.p();
    let half_n = T::from_count(spec.n()) / T::lit(2.0);
    let logs: T = head.iter().map(|d| d.ln()).sum();
    Ok(-half_n * (logs + T::from_count(p - k_prime) * lambda.ln()))
}

/// `k′(p − (k′ − 1)/2)`, the free-parameter count of a `k′`-spike model.
pub fn penalty_units<T: Real>(p: usize, k_prime: usize) -> T {
    // k′(2p − k′ + 1)/2 is an integer-valued product, exact in floating point.
    T::from_count(k_prime * (2 * p + 1 - k_prime)) / T::lit(2.0)
}

/// Largest usable `k′` for criteria that need `λ̂_{k′} > 0` and positive
/// leading eigenvalues.
fn likelihood_k_max<T: Real>(spec: &EigenSpectrum<T>, range: &CandidateRange) -> Result<usize> {
    range.check(spec.p())?;
    let rank = spec.rank();
    if rank == 0 {
        return Err(domain("spectrum is identically zero"));
    }
    Ok(range.k_max().min(rank - 1))
}

struct Profile<T> {
    loglik: Vec<T>,
    noise: Vec<T>,
}

fn profile_curve<T: Real>(spec: &EigenSpectrum<T>, k_max: usize) -> Profile<T> {
    let d = spec.values();
    let p = d.len();
    let half_n = T::from_count(spec.n()) / T::lit(2.0);
    let mut suffix = vec![T::zero(); p + 1];
    for i in (0..p).rev() {
        suffix[i] = suffix[i + 1] + d[i];
    }
    let mut head_logs = T::zero();
    let mut loglik = Vec::with_capacity(k_max + 1);
    let mut noise = Vec::with_capacity(k_max + 1);
    for k in 0..=k_max {
        let m = T::from_count(p - k);
        let lambda = suffix[k] / m;
        loglik.push(-half_n * (head_logs + m * lambda.ln()));
        noise.push(lambda);
        head_logs = head_logs + d[k].ln();
    }
    Profile { loglik, noise }
}

fn penalized<T: Real>(
    spec: &EigenSpectrum<T>,
    weight: T,
    range: &CandidateRange,
    label: EstimatorSpec,
    tuning: Option<T>,
) -> Result<CriterionCurve<T>> {
    let k_max = likelihood_k_max(spec, range)?;
    let prof = profile_curve(spec, k_max);
    let p = spec.p();
    let values = prof
        .loglik
        .iter()
        .enumerate()
        .map(|(k, &l)| l - weight * penalty_units::<T>(p, k))
        .collect();
    Ok(CriterionCurve {
        spec: label,
        values,
        mode: Mode::Maximize,
        noise_estimates: prof.noise,
        tuning,
    })
}

fn log_log_n<T: Real>(n: usize) -> Result<T> {
    let v = T::from_count(n).ln().ln();
    if !(v > T::zero()) {
        return Err(domain(format!("log log n must be positive, got n = {n}")));
    }
    Ok(v)
}

fn positive<T: Real>(what: &str, v: T) -> Result<()> {
    if v > T::zero() && v.is_finite() {
        Ok(())
    } else {
        Err(domain(format!("{what} must be positive, got {v}")))
    }
}

pub fn criterion_mil<T: Real>(spec: &EigenSpectrum<T>, gamma: T, range: &CandidateRange) -> Result<CriterionCurve<T>> {
    positive("gamma", gamma)?;
    let w = gamma * log_log_n::<T>(spec.n())?;
    penalized(
        spec,
        w,
        range,
        EstimatorSpec::Mil { gamma: gamma.as_f64() },
        Some(gamma),
    )
}

/// `−(n/2)Σ_{i≤k′} log d_i − (n/2)Σ_{i>k′}(d_i − 1) − γ·k′(p−(k′−1)/2)·log log n`.
/// Assumes the spectrum is in units of the noise level.
pub fn criterion_mil_tilde<T: Real>(
    spec: &EigenSpectrum<T>,
    gamma: T,
    range: &CandidateRange,
) -> Result<CriterionCurve<T>> {
    positive("gamma", gamma)?;
    let w = gamma * log_log_n::<T>(spec.n())?;
    let k_max = likelihood_k_max(spec, range)?;
    let d = spec.values();
    let p = d.len();
    let half_n = T::from_count(spec.n()) / T::lit(2.0);
    let mut suffix = vec![T::zero(); p + 1];
    for i in (0..p).rev() {
        suffix[i] = suffix[i + 1] + (d[i] - T::one());
    }
    let mut head_logs = T::zero();
    let mut values = Vec::with_capacity(k_max + 1);
    let mut noise = Vec::with_capacity(k_max + 1);
    for k in 0..=k_max {
        values.push(-half_n * head_logs - half_n * suffix[k] - w * penalty_units::<T>(p, k));
        noise.push(T::one() + suffix[k] / T::from_count(p - k));
        head_logs = head_logs + d[k].ln();
    }
    Ok(CriterionCurve {
        spec: EstimatorSpec::MilTilde { gamma: gamma.as_f64() },
        values,
        mode: Mode::Maximize,
        noise_estimates: noise,
        tuning: Some(gamma),
    })
}

pub fn criterion_generic_cn<T: Real>(
    spec: &EigenSpectrum<T>,
    c_n: T,
    range: &CandidateRange,
) -> Result<CriterionCurve<T>> {
    positive("C_n", c_n)?;
    penalized(
        spec,
        c_n,
        range,
        EstimatorSpec::GenericCn { c_n: c_n.as_f64() },
        Some(c_n),
    )
}

/// The generic rule with `C_n = (log n)/2`.
pub fn criterion_bic<T: Real>(spec: &EigenSpectrum<T>, range: &CandidateRange) -> Result<CriterionCurve<T>> {
    let c_n = T::from_count(spec.n()).ln() / T::lit(2.0);
    penalized(spec, c_n, range, EstimatorSpec::Bic, Some(c_n))
}

/// AIC-type: constant weight `γ`. `γ = 1` is AIC, `γ = 2` the modified AIC.
pub fn criterion_aic_type<T: Real>(
    spec: &EigenSpectrum<T>,
    gamma: T,
    range: &CandidateRange,
) -> Result<CriterionCurve<T>> {
    positive("gamma", gamma)?;
    penalized(
        spec,
        gamma,
        range,
        EstimatorSpec::AicType { gamma: gamma.as_f64() },
        Some(gamma),
    )
}

/// AIC-type with `γ = multiplier·φ(p/n)`; the `γ` used is kept in
/// [`CriterionCurve::tuning`].
pub fn criterion_gaic_type<T: Real>(
    spec: &EigenSpectrum<T>,
    multiplier: T,
    range: &CandidateRange,
) -> Result<CriterionCurve<T>> {
    positive("multiplier", multiplier)?;
    let c = T::from_count(spec.p()) / T::from_count(spec.n());
    let gamma = multiplier * phi(c)?;
    let label = EstimatorSpec::GaicType {
        multiplier: multiplier.as_f64(),
    };
    penalized(spec, gamma, range, label, Some(gamma))
}

/// BFC, minimised. With `m` eigenvalues in play (`m = p` for `p < n`,
/// `m = n − 1` otherwise) and `N` the other dimension (`n`, resp. `p`):
///
/// `(m − k′)·log d̄_{k′} − Σ_{i=k′+1}^{m} log d_i − (m − k′ − 1)(m − k′ + 2)/N`
///
/// where `d̄_{k′}` averages `d_{k′+1..m}`.
pub fn criterion_bfc<T: Real>(spec: &EigenSpectrum<T>, range: &CandidateRange) -> Result<CriterionCurve<T>> {
    criterion_bfc_branch(spec, range, BfcBranch::Auto)
}

pub fn criterion_bfc_branch<T: Real>(
    spec: &EigenSpectrum<T>,
    range: &CandidateRange,
    branch: BfcBranch,
) -> Result<CriterionCurve<T>> {
    let (n, p) = (spec.n(), spec.p());
    if n < 3 || p < 3 {
        return Err(domain(format!("BFC needs n, p >= 3, got n = {n}, p = {p}")));
    }
    range.check(p)?;
    let small = match branch {
        BfcBranch::Auto => p < n,
        BfcBranch::SmallDim => true,
        BfcBranch::LargeDim => false,
    };
    let (m, other) = if small { (p, n) } else { (n - 1, p) };
    if m > p {
        return Err(domain(format!(
            "large-dimension BFC branch needs n - 1 <= p, got n = {n}, p = {p}"
        )));
    }
    let d = &spec.values()[..m];
    if let Some(i) = d.iter().position(|&x| !(x > T::zero())) {
        return Err(domain(format!("BFC needs d_{} > 0", i + 1)));
    }
    // The trailing mean needs at least one eigenvalue past k′.
    let k_max = range.k_max().min(m - 1);
    let other = T::from_count(other);
    let mut sum = vec![T::zero(); m + 1];
    let mut logs = vec![T::zero(); m + 1];
    for i in (0..m).rev() {
        sum[i] = sum[i + 1] + d[i];
        logs[i] = logs[i + 1] + d[i].ln();
    }
    let mut values = Vec::with_capacity(k_max + 1);
    let mut noise = Vec::with_capacity(k_max + 1);
    for k in 0..=k_max {
        let len = m - k;
        let mean = sum[k] / T::from_count(len);
        // (len − 1)(len + 2) as an integer to keep it exact.
        let corr = T::from_count((len - 1) * (len + 2)) / other;
        values.push(T::from_count(len) * mean.ln() - logs[k] - corr);
        noise.push(mean);
    }
    Ok(CriterionCurve {
        spec: EstimatorSpec::Bfc { branch },
        values,
        mode: Mode::Minimize,
        noise_estimates: noise,
        tuning: None,
    })
}

/// KN trailing-mean-with-bias-correction noise estimate at `k′`.
///
/// An eigenvalue whose quadratic for `ρ` has no real root sits below the
/// detection edge and contributes no correction.
fn kn_corrected_noise<T: Real>(spec: &EigenSpectrum<T>, k: usize) -> T {
    let d = spec.values();
    let p = d.len();
    let n = T::from_count(spec.n());
    let m = T::from_count(p - k);
    let tail: T = d[k..].iter().copied().sum();
    let mut sigma2 = tail / m;
    for _ in 0..200 {
        let mut correction = T::zero();
        for &dj in &d[..k] {
            let b = dj + sigma2 - sigma2 * m / n;
            let disc = b * b - T::lit(4.0) * dj * sigma2;
            if disc < T::zero() {
                continue;
            }
            let rho = (b + disc.sqrt()) / T::lit(2.0);
            correction = correction + (dj - rho).max(T::zero());
        }
        let next = (tail + correction) / m;
        let done = (next - sigma2).abs() <= T::lit(1e-12) * sigma2.abs();
        sigma2 = next;
        if done {
            break;
        }
    }
    sigma2
}

/// Sequential largest-eigenvalue test at level `alpha`.
///
/// At each `k′` the eigenvalue `d_{k′+1}` is standardised against a
/// `(p − k′)`-variate white Wishart with `n` samples,
/// `t = (d_{k′+1}/σ̂² − μ_{n,p−k′})/σ_{n,p−k′} − s(α)`, and the test rejects
/// (signal) when `t > 0`. The estimate is the first `k′` that does not
/// reject; the curve holds `t` per candidate.
pub fn estimate_kn<T: Real>(
    spec: &EigenSpectrum<T>,
    alpha: f64,
    noise: KnNoise,
    range: &CandidateRange,
) -> Result<KEstimate<T>> {
    if !(alpha > 0.0 && alpha < 1.0) {
        return Err(domain(format!("alpha must lie in (0, 1), got {alpha}")));
    }
    let k_max = likelihood_k_max(spec, range)?;
    let critical = T::lit(tw1_quantile(alpha)?);
    let (n, p) = (spec.n(), spec.p());
    let d = spec.values();
    let mut values = Vec::with_capacity(k_max + 1);
    let mut noise_estimates = Vec::with_capacity(k_max + 1);
    for (k, &dk) in d.iter().enumerate().take(k_max + 1) {
        let sigma2 = match noise {
            KnNoise::TrailingMean => noise_mle(spec, k)?,
            KnNoise::BiasCorrected => kn_corrected_noise(spec, k),
        };
        if !(sigma2 > T::zero()) {
            return Err(domain(format!("KN noise estimate at k' = {k} is not positive")));
        }
        let (mu, sigma) = wishart_tw_centering(n, p - k);
        let t = (dk / sigma2 - T::lit(mu)) / T::lit(sigma) - critical;
        values.push(t);
        noise_estimates.push(sigma2);
    }
    let curve = CriterionCurve {
        spec: EstimatorSpec::Kn { alpha, noise },
        values,
        mode: Mode::FirstNonPositive,
        noise_estimates,
        tuning: Some(critical),
    };
    Ok(select_k(curve))
}

/// Optimum of a curve, ties toward the smaller `k′`.
pub fn select_k<T: Real>(curve: CriterionCurve<T>) -> KEstimate<T> {
    let v = &curve.values;
    let (k_hat, saturated) = match curve.mode {
        Mode::Maximize => (arg_best(v, |a, b| a > b), false),
        Mode::Minimize => (arg_best(v, |a, b| a < b), false),
        Mode::FirstNonPositive => match v.iter().position(|&t| !(t > T::zero())) {
            Some(k) => (k, false),
            None => (v.len().saturating_sub(1), true),
        },
    };
    KEstimate {
        k_hat,
        noise_estimates: curve.noise_estimates.clone(),
        curve,
        saturated,
    }
}

fn arg_best<T: Real>(v: &[T], better: impl Fn(T, T) -> bool) -> usize {
    let mut best = 0;
    for (i, &x) in v.iter().enumerate().skip(1) {
        if better(x, v[best]) {
            best = i;
        }
    }
    best
}

/// Evaluates any estimator and selects `k̂`.
pub fn estimate<T: Real>(spec: &EstimatorSpec, d: &EigenSpectrum<T>, range: &CandidateRange) -> Result<KEstimate<T>> {
    spec.validate()?;
    let curve = match *spec {
        EstimatorSpec::Mil { gamma } => criterion_mil(d, T::lit(gamma), range)?,
        EstimatorSpec::MilTilde { gamma } => criterion_mil_tilde(d, T::lit(gamma), range)?,
        EstimatorSpec::GenericCn { c_n } => criterion_generic_cn(d, T::lit(c_n), range)?,
        EstimatorSpec::Bic => criterion_bic(d, range)?,
        EstimatorSpec::AicType { gamma } => criterion_aic_type(d, T::lit(gamma), range)?,
        EstimatorSpec::ModifiedAic => {
            let mut c = criterion_aic_type(d, T::lit(2.0), range)?;
            c.spec = EstimatorSpec::ModifiedAic;
            c
        }
        EstimatorSpec::GaicType { multiplier } => criterion_gaic_type(d, T::lit(multiplier), range)?,
        EstimatorSpec::Bfc { branch } => criterion_bfc_branch(d, range, branch)?,
        EstimatorSpec::Kn { alpha, noise } => return estimate_kn(d, alpha, noise, range),
    };
    if curve.values.iter().any(|v| !v.is_finite()) {
        return Err(domain(format!("{spec} produced a non-finite criterion value")));
    }
    Ok(select_k(curve))
}
