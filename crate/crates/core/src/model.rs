//! Spiked population models, SNR schedules and seeded Gaussian sampling.
//!
//! Randomness comes from ChaCha8 keyed by a 64-bit seed and selected by a
//! 64-bit stream id, so replicate `r` of an experiment with master seed `s`
//! always draws from stream `(s, r)` no matter which thread runs it. Normal
//! deviates use the ziggurat sampler of `rand_distr::StandardNormal`;
//! entries are filled row by row (observation-major).

use ndarray::Array2;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};
use serde::{Deserialize, Serialize};

use crate::error::{domain, Result};
use crate::scalar::Real;
use crate::spectra::ObservationSet;

/// Population eigenstructure: `k` spikes above a flat noise level.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SpikedModel<T> {
    p: usize,
    spikes: Vec<T>,
    noise: T,
}

impl<T: Real> SpikedModel<T> {
    pub fn new(p: usize, spikes: Vec<T>, noise: T) -> Result<Self> {
        if spikes.len() >= p {
            return Err(domain(format!(
                "spike count {} must be below dimension {p}",
                spikes.len()
            )));
        }
        if !(noise > T::zero()) || !noise.is_finite() {
            return Err(domain(format!("noise level must be positive, got {noise}")));
        }
        if spikes.windows(2).any(|w| w[0] < w[1]) {
            return Err(domain("spikes must be descending"));
        }
        if let Some(&last) = spikes.last() {
            if !(last > noise) || !spikes[0].is_finite() {
                return Err(domain(format!("smallest spike {last} must exceed noise level {noise}")));
            }
        }
        Ok(Self { p, spikes, noise })
    }

    pub fn p(&self) -> usize {
        self.p
    }

    pub fn k(&self) -> usize {
        self.spikes.len()
    }

    pub fn spikes(&self) -> &[T] {
        &self.spikes
    }

    pub fn noise(&self) -> T {
        self.noise
    }

    /// `(λ_k − λ)/λ`; `None` for a pure-noise model.
    pub fn snr(&self) -> Option<T> {
        self.spikes.last().map(|&lk| lk / self.noise - T::one())
    }

    /// Spikes followed by the noise level repeated `p − k` times.
    pub fn population_eigenvalues(&self) -> Vec<T> {
        let mut out = self.spikes.clone();
        out.resize(self.p, self.noise);
        out
    }
}

/// How the SNR of a simulation cell is derived from `(n, p, k)`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "snake_case")]
pub enum SnrSchedule {
    /// `δ·√(4γ(p − k/2 + 1/2)·log log n / n)`: a multiple of the MIL threshold.
    FixedP { delta: f64, gamma: f64 },
    /// The SNR is `δ` itself.
    Direct { delta: f64 },
    /// `multiplier·√(p/n)`.
    HighDim { multiplier: f64 },
}

impl SnrSchedule {
    /// The value a table column is labelled with.
    pub fn label(&self) -> f64 {
        match *self {
            SnrSchedule::FixedP { delta, .. } | SnrSchedule::Direct { delta } => delta,
            SnrSchedule::HighDim { multiplier } => multiplier,
        }
    }

    fn validate(&self) -> Result<()> {
        let ok = match *self {
            SnrSchedule::FixedP { delta, gamma } => delta > 0.0 && gamma > 0.0,
            SnrSchedule::Direct { delta } => delta > 0.0,
            SnrSchedule::HighDim { multiplier } => multiplier > 0.0,
        };
        if ok {
            Ok(())
        } else {
            Err(domain(format!("schedule parameters must be positive: {self:?}")))
        }
    }
}

pub fn snr_value<T: Real>(schedule: &SnrSchedule, n: usize, p: usize, k: usize) -> Result<T> {
    schedule.validate()?;
    if k >= p {
        return Err(domain(format!("k = {k} must be below p = {p}")));
    }
    let nf = T::from_count(n);
    match *schedule {
        SnrSchedule::FixedP { delta, gamma } => {
            let loglog = nf.ln().ln();
            if !(loglog > T::zero()) {
                return Err(domain(format!("log log n must be positive, got n = {n}")));
            }
            let dof = T::from_count(p) - T::from_count(k) / T::lit(2.0) + T::lit(0.5);
            Ok(T::lit(delta) * (T::lit(4.0) * T::lit(gamma) * dof * loglog / nf).sqrt())
        }
        SnrSchedule::Direct { delta } => Ok(T::lit(delta)),
        SnrSchedule::HighDim { multiplier } => Ok(T::lit(multiplier) * (T::from_count(p) / nf).sqrt()),
    }
}

/// The simulation design: `k − 1` spikes at `λ(1 + 2·snr)` and the last at
/// `λ(1 + snr)`, so that [`SpikedModel::snr`] returns `snr`.
pub fn make_simulation_model<T: Real>(p: usize, k: usize, snr: T, noise: T) -> Result<SpikedModel<T>> {
    if k >= p {
        return Err(domain(format!("k = {k} must be below p = {p}")));
    }
    if k > 0 && !(snr > T::zero()) {
        return Err(domain(format!("snr must be positive, got {snr}")));
    }
    let mut spikes = vec![noise * (T::one() + T::lit(2.0) * snr); k.saturating_sub(1)];
    if k > 0 {
        spikes.push(noise * (T::one() + snr));
    }
    SpikedModel::new(p, spikes, noise)
}

/// Identifies one independent random stream.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct Substream {
    pub seed: u64,
    pub stream: u64,
}

impl Substream {
    pub fn new(seed: u64, stream: u64) -> Self {
        Self { seed, stream }
    }

    fn rng(self) -> ChaCha8Rng {
        let mut rng = ChaCha8Rng::seed_from_u64(self.seed);
        rng.set_stream(self.stream);
        rng
    }
}

/// `n` draws from `N(0, diag(population eigenvalues))`, stream 0 of `seed`.
pub fn sample_observations<T: Real>(m: &SpikedModel<T>, n: usize, seed: u64) -> Result<ObservationSet<T>> {
    sample_from_stream(m, n, Substream::new(seed, 0), None)
}

/// Sampling from an explicit substream, with an optional orthogonal
/// `p × p` rotation `Q` so the covariance becomes `Q·diag(λ)·Q′`.
pub fn sample_from_stream<T: Real>(
    m: &SpikedModel<T>,
    n: usize,
    stream: Substream,
    rotation: Option<&Array2<f64>>,
) -> Result<ObservationSet<T>> {
    if n < 2 {
        return Err(domain(format!("need at least 2 observations, got {n}")));
    }
    let p = m.p();
    if let Some(q) = rotation {
        if q.dim() != (p, p) {
            return Err(domain(format!("rotation must be {p}x{p}, got {:?}", q.dim())));
        }
    }
    let scales: Vec<f64> = m.population_eigenvalues().iter().map(|l| l.as_f64().sqrt()).collect();
    let mut rng = stream.rng();
    let mut data = Array2::<T>::zeros((n, p));
    let mut z = vec![0.0_f64; p];
    for t in 0..n {
        for (zj, s) in z.iter_mut().zip(&scales) {
            let g: f64 = StandardNormal.sample(&mut rng);
            *zj = g * s;
        }
        match rotation {
            None => {
                for j in 0..p {
                    data[(t, j)] = T::lit(z[j]);
                }
            }
            Some(q) => {
                for i in 0..p {
                    let v: f64 = (0..p).map(|j| q[(i, j)] * z[j]).sum();
                    data[(t, i)] = T::lit(v);
                }
            }
        }
    }
    ObservationSet::new(data)
}

/// Haar-like random orthogonal matrix: Gram–Schmidt on a Gaussian matrix.
pub fn random_orthogonal(p: usize, seed: u64) -> Array2<f64> {
    let mut rng = Substream::new(seed, u64::MAX).rng();
    let mut q = Array2::<f64>::from_shape_simple_fn((p, p), || StandardNormal.sample(&mut rng));
    for j in 0..p {
        for _ in 0..2 {
            for i in 0..j {
                let dot: f64 = (0..p).map(|r| q[(r, i)] * q[(r, j)]).sum();
                for r in 0..p {
                    q[(r, j)] -= dot * q[(r, i)];
                }
            }
        }
        let norm = (0..p).map(|r| q[(r, j)] * q[(r, j)]).sum::<f64>().sqrt();
        for r in 0..p {
            q[(r, j)] /= norm;
        }
    }
    q
}
