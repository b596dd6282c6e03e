//! Closed-form limits and consistency conditions.
//!
//! All conditions are evaluated at the finite-sample aspect ratio `c = p/n`,
//! with spikes expressed in units of the noise level.

mod tracy_widom;

use serde::{Deserialize, Serialize};

pub use tracy_widom::{tw1_cdf, tw1_quantile, wishart_tw_centering, Tw1Table};

use crate::error::{domain, Result};
use crate::model::SpikedModel;
use crate::scalar::Real;

/// `φ(c) = 1/2 + √(1/c) − log(1 + √c)/c`, the GAIC tuning value.
///
/// `φ(0⁺) = 1` is available as [`PHI_AT_ZERO`]; the formula itself is not
/// evaluated at zero.
pub fn phi<T: Real>(c: T) -> Result<T> {
    if !(c > T::zero()) || !c.is_finite() {
        return Err(domain(format!("phi needs c > 0, got {c}")));
    }
    let rc = c.sqrt();
    Ok(T::lit(0.5) + (T::one() / c).sqrt() - rc.ln_1p() / c)
}

pub const PHI_AT_ZERO: f64 = 1.0;

/// Almost-sure limit `λ + cλ/(λ − 1)` of a spiked sample eigenvalue.
pub fn psi<T: Real>(lambda: T, c: T) -> Result<T> {
    if !(lambda > T::one()) {
        return Err(domain(format!("psi needs lambda > 1, got {lambda}")));
    }
    if !(c > T::zero()) {
        return Err(domain(format!("psi needs c > 0, got {c}")));
    }
    Ok(lambda + c * lambda / (lambda - T::one()))
}

/// `ψ′(λ) = 1 − c/(λ − 1)²`.
pub fn psi_derivative<T: Real>(lambda: T, c: T) -> T {
    let gap = lambda - T::one();
    T::one() - c / (gap * gap)
}

/// Marčenko–Pastur support `(a, b)` for unit noise. The lower edge is
/// reported as 0 when `c ≥ 1`.
pub fn mp_edges<T: Real>(c: T) -> (T, T) {
    let rc = c.sqrt();
    let lower = if c < T::one() {
        (T::one() - rc).powi(2)
    } else {
        T::zero()
    };
    (lower, (T::one() + rc).powi(2))
}

fn dof<T: Real>(p: usize, k: usize) -> T {
    T::from_count(p) - T::from_count(k) / T::lit(2.0) + T::lit(0.5)
}

/// SNR above which MIL is consistent: `√(4γ(p − k/2 + 1/2)·log log n / n)`.
pub fn mil_snr_threshold<T: Real>(n: usize, p: usize, k: usize, gamma: T) -> Result<T> {
    let nf = T::from_count(n);
    let loglog = nf.ln().ln();
    if !(loglog > T::zero()) {
        return Err(domain(format!("log log n must be positive, got n = {n}")));
    }
    Ok((T::lit(4.0) * gamma * dof::<T>(p, k) * loglog / nf).sqrt())
}

/// BIC's threshold `√(2(p − k/2 + 1/2)·log n / n)`.
pub fn bic_snr_threshold<T: Real>(n: usize, p: usize, k: usize) -> Result<T> {
    if n < 2 {
        return Err(domain(format!("need n >= 2, got {n}")));
    }
    let nf = T::from_count(n);
    Ok((T::lit(2.0) * dof::<T>(p, k) * nf.ln() / nf).sqrt())
}

/// Threshold for a generic penalty weight `C_n`: `√(4(p − k/2 + 1/2)·C_n / n)`.
pub fn generic_snr_threshold<T: Real>(n: usize, p: usize, k: usize, c_n: T) -> Result<T> {
    if !(c_n > T::zero()) {
        return Err(domain(format!("C_n must be positive, got {c_n}")));
    }
    Ok((T::lit(4.0) * dof::<T>(p, k) * c_n / T::from_count(n)).sqrt())
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ThresholdReport {
    pub mil_threshold: f64,
    pub bic_threshold: f64,
    pub generic_threshold: Option<f64>,
}

pub fn thresholds(n: usize, p: usize, k: usize, gamma: f64, c_n: Option<f64>) -> Result<ThresholdReport> {
    Ok(ThresholdReport {
        mil_threshold: mil_snr_threshold(n, p, k, gamma)?,
        bic_threshold: bic_snr_threshold(n, p, k)?,
        generic_threshold: c_n.map(|c| generic_snr_threshold(n, p, k, c)).transpose()?,
    })
}

/// The four consistency conditions for a smallest spike `λ_k` (in noise units).
///
/// * underfit: `ψ(λ_k) − 1 − log ψ(λ_k) > 2γc` (AIC/GAIC-type, `k′ < k`)
/// * edge: `λ_k > 1 + √c` (distant spike)
/// * gamma: `γ > φ(c)` (AIC/GAIC-type, `k′ > k`)
/// * BFC, `c < 1`: `ψ − 1 − log ψ > 2c`; BFC, `c > 1`: `ψ/c − 1 − log(ψ/c) > 2/c`
///
/// Margins are `None` when `λ_k ≤ 1`, where `ψ` is undefined.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ConsistencyReport {
    pub n: usize,
    pub p: usize,
    pub k: usize,
    pub lambda_k: f64,
    pub c: f64,
    pub gamma: f64,
    pub phi_c: f64,
    pub psi_k: Option<f64>,
    pub margin_underfit: Option<f64>,
    pub underfit_ok: bool,
    pub edge_ok: bool,
    pub gamma_ok: bool,
    pub bfc_margin_lt1: Option<f64>,
    pub bfc_margin_gt1: Option<f64>,
    /// The BFC condition for the branch that applies at this `c`
    /// (`c ≥ 1` uses the `p ≥ n` branch).
    pub bfc_ok: bool,
}

impl ConsistencyReport {
    /// Both conditions GAIC-type needs: no underfit and no overfit.
    pub fn gaic_consistent(&self) -> bool {
        self.underfit_ok && self.edge_ok && self.gamma_ok
    }
}

/// GAIC-type default tuning `1.1·φ(p/n)`.
pub fn default_gaic_gamma(n: usize, p: usize) -> Result<f64> {
    Ok(1.1 * phi(p as f64 / n as f64)?)
}

pub fn check_consistency(model: &SpikedModel<f64>, n: usize, gamma: f64) -> Result<ConsistencyReport> {
    let lambda_k = model
        .spikes()
        .last()
        .map(|&l| l / model.noise())
        .ok_or_else(|| domain("consistency conditions need at least one spike"))?;
    consistency_for(n, model.p(), model.k(), lambda_k, gamma)
}

/// As [`check_consistency`], from a bare smallest spike. Accepts
/// `λ_k ≤ 1`, which yields a report with the edge condition failed.
pub fn consistency_for(n: usize, p: usize, k: usize, lambda_k: f64, gamma: f64) -> Result<ConsistencyReport> {
    if k == 0 {
        return Err(domain("consistency conditions need k >= 1"));
    }
    if n == 0 || p == 0 {
        return Err(domain("n and p must be positive"));
    }
    if !(gamma > 0.0) {
        return Err(domain(format!("gamma must be positive, got {gamma}")));
    }
    let c = p as f64 / n as f64;
    let phi_c = phi(c)?;
    let psi_k = psi(lambda_k, c).ok();
    let margin_underfit = psi_k.map(|s| s - 1.0 - s.ln() - 2.0 * gamma * c);
    let bfc_margin_lt1 = psi_k.map(|s| s - 1.0 - s.ln() - 2.0 * c);
    let bfc_margin_gt1 = psi_k.map(|s| s / c - 1.0 - (s / c).ln() - 2.0 / c);
    let bfc_margin = if c < 1.0 { bfc_margin_lt1 } else { bfc_margin_gt1 };
    Ok(ConsistencyReport {
        n,
        p,
        k,
        lambda_k,
        c,
        gamma,
        phi_c,
        psi_k,
        margin_underfit,
        underfit_ok: margin_underfit.is_some_and(|m| m > 0.0),
        edge_ok: lambda_k > 1.0 + c.sqrt(),
        gamma_ok: gamma > phi_c,
        bfc_margin_lt1,
        bfc_margin_gt1,
        bfc_ok: bfc_margin.is_some_and(|m| m > 0.0),
    })
}
