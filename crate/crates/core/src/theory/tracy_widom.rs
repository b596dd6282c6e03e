//! Real (β = 1) Tracy–Widom law from a bundled CDF table.
//!
//! The table is produced by `tools/gen_tw1_table.py` (Fredholm determinant
//! of the Airy kernel, Gauss–Legendre Nyström discretisation). Between grid
//! points the CDF is a monotone piecewise cubic (Fritsch–Carlson), and
//! quantiles invert that interpolant.
//!
//! File format: `#` comment lines (the first must name `generator=` and
//! `tolerance=`), a header row `x,cdf`, then rows strictly increasing in both
//! columns.

use std::sync::LazyLock;

use crate::error::{domain, input, Result};

const BUNDLED: &str = include_str!("../../data/tw1_cdf.csv");

static TABLE: LazyLock<Tw1Table> =
    LazyLock::new(|| Tw1Table::parse(BUNDLED).expect("bundled Tracy-Widom table is valid"));

#[derive(Debug, Clone)]
pub struct Tw1Table {
    x: Vec<f64>,
    cdf: Vec<f64>,
    slope: Vec<f64>,
    generator: String,
    tolerance: f64,
}

impl Tw1Table {
    pub fn bundled() -> &'static Tw1Table {
        &TABLE
    }

    pub fn parse(text: &str) -> Result<Self> {
        let mut generator = None;
        let mut tolerance = None;
        let mut saw_header = false;
        let (mut x, mut cdf) = (Vec::new(), Vec::new());
        for (lineno, line) in text.lines().enumerate() {
            let line = line.trim();
            if line.is_empty() {
                continue;
            }
            if let Some(comment) = line.strip_prefix('#') {
                for part in comment.split(';') {
                    let part = part.trim();
                    if let Some(g) = part.strip_prefix("generator=") {
                        generator = Some(g.trim().to_string());
                    } else if let Some(t) = part.strip_prefix("tolerance=") {
                        tolerance = t.trim().parse::<f64>().ok();
                    }
                }
                continue;
            }
            if !saw_header {
                if line.replace(' ', "") != "x,cdf" {
                    return Err(input(format!("line {}: expected header `x,cdf`", lineno + 1)));
                }
                saw_header = true;
                continue;
            }
            let mut cols = line.split(',');
            let parse = |s: Option<&str>| -> Result<f64> {
                s.and_then(|s| s.trim().parse::<f64>().ok())
                    .ok_or_else(|| input(format!("line {}: expected two numbers", lineno + 1)))
            };
            let xi = parse(cols.next())?;
            let fi = parse(cols.next())?;
            if cols.next().is_some() {
                return Err(input(format!("line {}: more than two columns", lineno + 1)));
            }
            if let (Some(&px), Some(&pf)) = (x.last(), cdf.last()) {
                if !(xi > px && fi > pf) {
                    return Err(input(format!("line {}: table must be strictly increasing", lineno + 1)));
                }
            }
            if !(0.0..=1.0).contains(&fi) {
                return Err(input(format!("line {}: cdf outside [0, 1]", lineno + 1)));
            }
            x.push(xi);
            cdf.push(fi);
        }
        let generator = generator.ok_or_else(|| input("table header must name its generator"))?;
        let tolerance = tolerance.ok_or_else(|| input("table header must state its tolerance"))?;
        if x.len() < 4 {
            return Err(input("table needs at least 4 rows"));
        }
        let slope = pchip_slopes(&x, &cdf);
        Ok(Self {
            x,
            cdf,
            slope,
            generator,
            tolerance,
        })
    }

    pub fn generator(&self) -> &str {
        &self.generator
    }

    pub fn tolerance(&self) -> f64 {
        self.tolerance
    }

    pub fn grid(&self) -> (&[f64], &[f64]) {
        (&self.x, &self.cdf)
    }

    /// Interpolated CDF; 0 below the table and 1 above it.
    pub fn cdf(&self, s: f64) -> f64 {
        let last = self.x.len() - 1;
        if s <= self.x[0] {
            return if s == self.x[0] { self.cdf[0] } else { 0.0 };
        }
        if s >= self.x[last] {
            return if s == self.x[last] { self.cdf[last] } else { 1.0 };
        }
        let i = self.x.partition_point(|&xi| xi <= s) - 1;
        self.hermite(i, s)
    }

    /// Upper-α quantile: the `s` with `F(s) = 1 − α`.
    pub fn upper_quantile(&self, alpha: f64) -> Result<f64> {
        if !(alpha > 0.0 && alpha < 0.5) {
            return Err(domain(format!("alpha must lie in (0, 0.5), got {alpha}")));
        }
        let target = 1.0 - alpha;
        let last = self.x.len() - 1;
        if target > self.cdf[last] || target < self.cdf[0] {
            return Err(domain(format!(
                "alpha = {alpha:e} is outside the table's certified range [{:e}, 0.5)",
                1.0 - self.cdf[last]
            )));
        }
        let i = (self.cdf.partition_point(|&f| f <= target)).clamp(1, last) - 1;
        let (mut lo, mut hi) = (self.x[i], self.x[i + 1]);
        for _ in 0..200 {
            let mid = 0.5 * (lo + hi);
            if self.hermite(i, mid) < target {
                lo = mid;
            } else {
                hi = mid;
            }
            if hi - lo < 1e-13 {
                break;
            }
        }
        Ok(0.5 * (lo + hi))
    }

    fn hermite(&self, i: usize, s: f64) -> f64 {
        let h = self.x[i + 1] - self.x[i];
        let t = (s - self.x[i]) / h;
        let (t2, t3) = (t * t, t * t * t);
        let h00 = 2.0 * t3 - 3.0 * t2 + 1.0;
        let h10 = t3 - 2.0 * t2 + t;
        let h01 = -2.0 * t3 + 3.0 * t2;
        let h11 = t3 - t2;
        h00 * self.cdf[i] + h10 * h * self.slope[i] + h01 * self.cdf[i + 1] + h11 * h * self.slope[i + 1]
    }
}

/// Fritsch–Carlson derivative estimates. PCHIP endpoint rule at the ends.
fn pchip_slopes(x: &[f64], y: &[f64]) -> Vec<f64> {
    let m = x.len();
    let h: Vec<f64> = x.windows(2).map(|w| w[1] - w[0]).collect();
    let delta: Vec<f64> = (0..m - 1).map(|i| (y[i + 1] - y[i]) / h[i]).collect();
    let mut d = vec![0.0; m];
    for i in 1..m - 1 {
        if delta[i - 1] * delta[i] > 0.0 {
            let w1 = 2.0 * h[i] + h[i - 1];
            let w2 = h[i] + 2.0 * h[i - 1];
            d[i] = (w1 + w2) / (w1 / delta[i - 1] + w2 / delta[i]);
        }
    }
    let end = |h0: f64, h1: f64, d0: f64, d1: f64| {
        let v = ((2.0 * h0 + h1) * d0 - h0 * d1) / (h0 + h1);
        if v.signum() != d0.signum() {
            0.0
        } else if d0.signum() != d1.signum() && v.abs() > 3.0 * d0.abs() {
            3.0 * d0
        } else {
            v
        }
    };
    d[0] = end(h[0], h[1], delta[0], delta[1]);
    d[m - 1] = end(h[m - 2], h[m - 3], delta[m - 2], delta[m - 3]);
    d
}

/// Upper-α quantile of the real Tracy–Widom law from the bundled table.
pub fn tw1_quantile(alpha: f64) -> Result<f64> {
    Tw1Table::bundled().upper_quantile(alpha)
}

pub fn tw1_cdf(s: f64) -> f64 {
    Tw1Table::bundled().cdf(s)
}

/// Centering and scaling of the largest eigenvalue of `S = X′X/n` for a
/// `p`-variate white real Wishart with `n` samples, so that
/// `(d_1 − μ)/σ` is asymptotically Tracy–Widom (β = 1).
pub fn wishart_tw_centering(n: usize, p: usize) -> (f64, f64) {
    let a = (n as f64 - 0.5).sqrt();
    let b = (p as f64 - 0.5).sqrt();
    let nf = n as f64;
    let mu = (a + b).powi(2) / nf;
    let sigma = (a + b) * (1.0 / a + 1.0 / b).cbrt() / nf;
    (mu, sigma)
}
