//! Sample covariance matrices and their descending eigenvalue spectra.

mod symmetric_eigen;

use ndarray::{Array2, ArrayView2, Axis};
use serde::{Deserialize, Serialize};

use crate::error::{input, Error, Result};
use crate::scalar::Real;

/// `n` observations (rows) of a `p`-variate vector (columns).
#[derive(Debug, Clone, PartialEq)]
pub struct ObservationSet<T> {
    data: Array2<T>,
}

impl<T: Real> ObservationSet<T> {
    pub fn new(data: Array2<T>) -> Result<Self> {
        let (n, p) = data.dim();
        if n < 2 || p < 2 {
            return Err(input(format!(
                "need at least 2 observations of at least 2 variates, got {n}x{p}"
            )));
        }
        if let Some(((i, j), _)) = data.indexed_iter().find(|(_, x)| !x.is_finite()) {
            return Err(input(format!("non-finite entry at row {i}, column {j}")));
        }
        Ok(Self { data })
    }

    pub fn n(&self) -> usize {
        self.data.nrows()
    }

    pub fn p(&self) -> usize {
        self.data.ncols()
    }

    pub fn data(&self) -> ArrayView2<'_, T> {
        self.data.view()
    }

    /// Copy with every column shifted to zero mean.
    pub fn centered(&self) -> Self {
        let mut data = self.data.clone();
        let n = T::from_count(self.n());
        for mut col in data.axis_iter_mut(Axis(1)) {
            let mean = col.iter().copied().sum::<T>() / n;
            col.mapv_inplace(|x| x - mean);
        }
        Self { data }
    }
}

/// Real symmetric `p × p` matrix.
#[derive(Debug, Clone, PartialEq)]
pub struct CovarianceMatrix<T> {
    entries: Array2<T>,
}

impl<T: Real> CovarianceMatrix<T> {
    /// Validates shape, finiteness and symmetry (each mirrored pair within
    /// `1e-10`, scaled by the largest entry when that exceeds one).
    pub fn new(entries: Array2<T>) -> Result<Self> {
        let (r, c) = entries.dim();
        if r != c || r == 0 {
            return Err(input(format!("covariance must be square and non-empty, got {r}x{c}")));
        }
        if entries.iter().any(|x| !x.is_finite()) {
            return Err(input("covariance has non-finite entries"));
        }
        let tol = symmetry_tol::<T>() * max_abs(entries.view()).max(T::one());
        for i in 0..r {
            for j in 0..i {
                if (entries[(i, j)] - entries[(j, i)]).abs() > tol {
                    return Err(input(format!("covariance not symmetric at ({i}, {j})")));
                }
            }
        }
        Ok(Self { entries })
    }

    pub fn p(&self) -> usize {
        self.entries.nrows()
    }

    pub fn entries(&self) -> ArrayView2<'_, T> {
        self.entries.view()
    }

    pub fn trace(&self) -> T {
        self.entries.diag().iter().copied().sum()
    }
}

/// Descending sample eigenvalues `d_1 ≥ … ≥ d_p` together with the sample
/// size `n` they came from.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EigenSpectrum<T> {
    values: Vec<T>,
    n: usize,
}

impl<T: Real> EigenSpectrum<T> {
    /// Validates a descending, non-negative spectrum. Values in
    /// `[-tol·d_1, 0)` are clamped to zero; when `n ≤ p`, values below
    /// `1e-12·d_1` become exact zeros and anything non-zero past index `n`
    /// is rejected.
    pub fn new(values: Vec<T>, n: usize) -> Result<Self> {
        if values.len() < 2 {
            return Err(input(format!(
                "spectrum needs at least 2 eigenvalues, got {}",
                values.len()
            )));
        }
        if n < 2 {
            return Err(input(format!("sample size must be at least 2, got {n}")));
        }
        if values.iter().any(|x| !x.is_finite()) {
            return Err(input("spectrum has non-finite values"));
        }
        if let Some(i) = values.windows(2).position(|w| w[0] < w[1]) {
            return Err(input(format!("spectrum not descending at index {i}")));
        }
        let scale = values[0].abs().max(values[values.len() - 1].abs());
        let floor = -psd_tol::<T>() * scale;
        if let Some(i) = values.iter().position(|&x| x < floor) {
            return Err(Error::Numeric {
                message: format!("eigenvalue {i} is {} (matrix not positive semidefinite)", values[i]),
                max_abs: scale.as_f64(),
                diag_min: f64::NAN,
                diag_max: f64::NAN,
            });
        }
        let p = values.len();
        let zero_below = if n <= p { rank_tol::<T>() * values[0] } else { T::zero() };
        let mut values = values;
        for x in values.iter_mut() {
            if *x < T::zero() || (n <= p && *x < zero_below) {
                *x = T::zero();
            }
        }
        if n <= p {
            if let Some(j) = values.iter().skip(n).position(|&x| x > T::zero()) {
                return Err(input(format!(
                    "eigenvalue {} is non-zero but a sample of {n} has rank at most {n}",
                    j + n
                )));
            }
        }
        Ok(Self { values, n })
    }

    /// Sorts into descending order first. The flag reports whether the input
    /// needed sorting.
    pub fn from_unsorted(mut values: Vec<T>, n: usize) -> Result<(Self, bool)> {
        let was_sorted = values.windows(2).all(|w| w[0] >= w[1]);
        if !was_sorted {
            values.sort_by(|a, b| b.partial_cmp(a).unwrap_or(std::cmp::Ordering::Equal));
        }
        Ok((Self::new(values, n)?, !was_sorted))
    }

    pub fn values(&self) -> &[T] {
        &self.values
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn p(&self) -> usize {
        self.values.len()
    }

    /// Number of strictly positive eigenvalues.
    pub fn rank(&self) -> usize {
        self.values.iter().take_while(|&&x| x > T::zero()).count()
    }

    /// Multiplies every eigenvalue by `factor > 0`.
    pub fn scaled(&self, factor: T) -> Self {
        Self {
            values: self.values.iter().map(|&x| x * factor).collect(),
            n: self.n,
        }
    }
}

/// `(1/n)·X′X` with no mean-centering.
pub fn sample_covariance<T: Real>(x: &ObservationSet<T>) -> CovarianceMatrix<T> {
    let mut s = gram_of_columns(x.data());
    let inv_n = T::one() / T::from_count(x.n());
    s.mapv_inplace(|v| v * inv_n);
    CovarianceMatrix { entries: s }
}

/// Descending eigenvalues of `s`, taken to be a sample covariance from `n`
/// observations.
pub fn eig_descending<T: Real>(s: &CovarianceMatrix<T>, n: usize) -> Result<EigenSpectrum<T>> {
    let mut values = symmetric_eigenvalues(s.entries())?;
    values.reverse();
    EigenSpectrum::new(values, n)
}

/// Eigenvalues (descending) and matching eigenvectors (columns). Verifies
/// `max|V·D·V′ − S| ≤ tol·max|S|` before returning.
pub fn eig_decompose<T: Real>(s: &CovarianceMatrix<T>) -> Result<(Vec<T>, Array2<T>)> {
    let p = s.p();
    let flat: Vec<T> = s.entries.iter().copied().collect();
    let dec = symmetric_eigen::decompose(&flat, p, true).ok_or_else(|| non_convergence(s.entries()))?;
    let vecs = dec.vectors.expect("vectors requested");
    let mut values = Vec::with_capacity(p);
    let mut vectors = Array2::zeros((p, p));
    for (out, j) in (0..p).rev().enumerate() {
        values.push(dec.values[j]);
        for i in 0..p {
            vectors[(i, out)] = vecs[i * p + j];
        }
    }
    let scale = max_abs(s.entries());
    let tol = reconstruction_tol::<T>() * scale;
    for i in 0..p {
        for j in 0..p {
            let r: T = (0..p).map(|k| vectors[(i, k)] * values[k] * vectors[(j, k)]).sum();
            if (r - s.entries[(i, j)]).abs() > tol {
                return Err(numeric_failure(
                    format!("eigen-reconstruction error at ({i}, {j})"),
                    s.entries(),
                ));
            }
        }
    }
    Ok((values, vectors))
}

/// Largest absolute eigenvalue of a symmetric matrix.
pub fn spectral_norm<T: Real>(a: ArrayView2<'_, T>) -> Result<T> {
    let (r, c) = a.dim();
    if r != c {
        return Err(input(format!("spectral_norm needs a square matrix, got {r}x{c}")));
    }
    if r == 0 {
        return Ok(T::zero());
    }
    let values = symmetric_eigenvalues(a)?;
    Ok(values[0].abs().max(values[values.len() - 1].abs()))
}

/// Spectrum of the sample covariance of `x`, optionally centred. When
/// `p > n` the eigenvalues come from the `n × n` Gram matrix `XX′/n`, which
/// shares the non-zero spectrum of `X′X/n`; the rest are padded with zeros.
pub fn spectrum_of<T: Real>(x: &ObservationSet<T>, center: bool) -> Result<EigenSpectrum<T>> {
    let centered;
    let x = if center {
        centered = x.centered();
        &centered
    } else {
        x
    };
    let (n, p) = (x.n(), x.p());
    if p <= n {
        return eig_descending(&sample_covariance(x), n);
    }
    let mut g = gram_of_columns(x.data().t());
    let inv_n = T::one() / T::from_count(n);
    g.mapv_inplace(|v| v * inv_n);
    let mut values = symmetric_eigenvalues(g.view())?;
    values.reverse();
    values.resize(p, T::zero());
    EigenSpectrum::new(values, n)
}

/// Ascending eigenvalues of a symmetric matrix, unclamped.
pub(crate) fn symmetric_eigenvalues<T: Real>(a: ArrayView2<'_, T>) -> Result<Vec<T>> {
    let p = a.nrows();
    let flat: Vec<T> = a.iter().copied().collect();
    symmetric_eigen::decompose(&flat, p, false)
        .map(|d| d.values)
        .ok_or_else(|| non_convergence(a))
}

/// `A′A`, symmetric by construction.
fn gram_of_columns<T: Real>(a: ArrayView2<'_, T>) -> Array2<T> {
    let p = a.ncols();
    let cols: Vec<Vec<T>> = a.axis_iter(Axis(1)).map(|c| c.to_vec()).collect();
    let mut g = Array2::zeros((p, p));
    for i in 0..p {
        for j in 0..=i {
            let v: T = cols[i].iter().zip(&cols[j]).map(|(&x, &y)| x * y).sum();
            g[(i, j)] = v;
            g[(j, i)] = v;
        }
    }
    g
}

fn max_abs<T: Real>(a: ArrayView2<'_, T>) -> T {
    a.iter().fold(T::zero(), |m, x| m.max(x.abs()))
}

fn numeric_failure<T: Real>(message: String, a: ArrayView2<'_, T>) -> Error {
    let diag = a.diag();
    Error::Numeric {
        message,
        max_abs: max_abs(a).as_f64(),
        diag_min: diag.iter().fold(f64::INFINITY, |m, x| m.min(x.as_f64())),
        diag_max: diag.iter().fold(f64::NEG_INFINITY, |m, x| m.max(x.as_f64())),
    }
}

fn non_convergence<T: Real>(a: ArrayView2<'_, T>) -> Error {
    numeric_failure("symmetric eigensolver did not converge".into(), a)
}

// Tolerances are stated for f64; for f32 they are raised to a small multiple
// of machine epsilon so round-off alone never trips them.
fn symmetry_tol<T: Real>() -> T {
    T::lit(1e-10).max(T::epsilon() * T::lit(16.0))
}

fn psd_tol<T: Real>() -> T {
    T::lit(1e-8).max(T::epsilon() * T::lit(64.0))
}

fn rank_tol<T: Real>() -> T {
    T::lit(1e-12).max(T::epsilon() * T::lit(64.0))
}

fn reconstruction_tol<T: Real>() -> T {
    T::lit(1e-8).max(T::epsilon() * T::lit(256.0))
}

#[cfg(test)]
mod tests {
    use super::*;
    use ndarray::array;

    #[test]
    fn identity_observations() {
        let x = ObservationSet::new(Array2::<f64>::eye(2)).unwrap();
        let s = sample_covariance(&x);
        assert_eq!(s.entries(), array![[0.5, 0.0], [0.0, 0.5]]);
    }

    #[test]
    fn zero_observations() {
        let x = ObservationSet::new(Array2::<f64>::zeros((3, 2))).unwrap();
        let s = sample_covariance(&x);
        assert_eq!(s.entries(), Array2::<f64>::zeros((2, 2)));
        let spec = eig_descending(&s, 3).unwrap();
        assert_eq!(spec.values(), &[0.0, 0.0]);
    }

    #[test]
    fn rejects_non_finite() {
        let mut data = Array2::<f64>::ones((3, 2));
        data[(1, 1)] = f64::NAN;
        assert!(matches!(ObservationSet::new(data), Err(Error::Input(_))));
        assert!(ObservationSet::new(Array2::<f64>::ones((1, 3))).is_err());
    }

    #[test]
    fn identity_and_permuted_diagonal() {
        let s = CovarianceMatrix::new(Array2::<f64>::eye(3)).unwrap();
        assert_eq!(eig_descending(&s, 10).unwrap().values(), &[1.0, 1.0, 1.0]);
        let s = CovarianceMatrix::new(Array2::from_diag(&array![3.0, 1.0, 2.0])).unwrap();
        assert_eq!(eig_descending(&s, 10).unwrap().values(), &[3.0, 2.0, 1.0]);
    }

    #[test]
    fn spectral_norm_examples() {
        let a = Array2::from_diag(&array![2.0_f64, -5.0]);
        assert_eq!(spectral_norm(a.view()).unwrap(), 5.0);
        assert_eq!(spectral_norm(Array2::<f64>::zeros((3, 3)).view()).unwrap(), 0.0);
    }

    #[test]
    fn asymmetric_rejected() {
        let a = array![[1.0, 0.5], [0.4, 1.0]];
        assert!(CovarianceMatrix::new(a).is_err());
    }

    #[test]
    fn indefinite_matrix_is_numeric_error() {
        let s = CovarianceMatrix::new(array![[1.0, 2.0], [2.0, 1.0]]).unwrap();
        assert!(matches!(eig_descending(&s, 5), Err(Error::Numeric { .. })));
    }

    #[test]
    fn tiny_negative_clamped() {
        let spec = EigenSpectrum::new(vec![1.0, 0.5, -1e-12], 10).unwrap();
        assert_eq!(spec.values()[2], 0.0);
    }

    #[test]
    fn rank_deficient_spectrum() {
        let spec = EigenSpectrum::new(vec![3.0, 2.0, 1e-14, 0.0], 2).unwrap();
        assert_eq!(spec.values(), &[3.0, 2.0, 0.0, 0.0]);
        assert_eq!(spec.rank(), 2);
        assert!(EigenSpectrum::new(vec![3.0, 2.0, 1.0, 0.0], 2).is_err());
    }

    #[test]
    fn unsorted_input_is_sorted_and_flagged() {
        let (spec, sorted) = EigenSpectrum::from_unsorted(vec![1.0, 4.0, 2.0], 50).unwrap();
        assert!(sorted);
        assert_eq!(spec.values(), &[4.0, 2.0, 1.0]);
        assert!(EigenSpectrum::new(vec![1.0, 4.0], 50).is_err());
    }

    #[test]
    fn gram_route_matches_covariance_route() {
        let data = Array2::from_shape_fn((4, 7), |(i, j)| ((i * 7 + j * 3) % 5) as f64 - 1.7);
        let x = ObservationSet::new(data).unwrap();
        let wide = spectrum_of(&x, false).unwrap();
        let direct = eig_descending(&sample_covariance(&x), 4).unwrap();
        for (a, b) in wide.values().iter().zip(direct.values()) {
            assert!((a - b).abs() < 1e-12, "{a} vs {b}");
        }
        assert_eq!(wide.rank(), 4);
    }

    #[test]
    fn centering_reduces_rank() {
        let data = Array2::from_shape_fn((4, 6), |(i, j)| ((i * 5 + j * 11) % 7) as f64);
        let x = ObservationSet::new(data).unwrap();
        let spec = spectrum_of(&x, true).unwrap();
        assert!(spec.rank() <= 3);
    }

    #[test]
    fn decomposition_reconstructs() {
        let a: Array2<f64> = array![[4.0, 1.0, 0.5], [1.0, 3.0, 0.2], [0.5, 0.2, 1.0]];
        let s = CovarianceMatrix::new(a).unwrap();
        let (values, vectors) = eig_decompose(&s).unwrap();
        assert!(values.windows(2).all(|w| w[0] >= w[1]));
        let vtv = vectors.t().dot(&vectors);
        for i in 0..3 {
            for j in 0..3 {
                let want = if i == j { 1.0 } else { 0.0 };
                assert!((vtv[(i, j)] - want).abs() < 1e-12);
            }
        }
    }

    #[test]
    fn works_in_f32() {
        let s = CovarianceMatrix::new(Array2::from_diag(&array![3.0_f32, 1.0, 2.0])).unwrap();
        assert_eq!(eig_descending(&s, 10).unwrap().values(), &[3.0_f32, 2.0, 1.0]);
    }
}
