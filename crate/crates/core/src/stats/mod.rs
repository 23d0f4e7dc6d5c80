//! Statistical primitives used by structure discovery.

mod entropy;
mod hsic;
mod regress;

pub use entropy::{entropy_approx, neg_entropy_approx, standardize};
pub use hsic::{hsic_statistic, hsic_test, HsicConfig, HsicOutcome};
pub use regress::{ols_fit, tree_regress, OlsFit, TreeFit};

use crate::error::{Error, Result};
use crate::linalg::Matrix;
use crate::scalar::Scalar;
use serde::{Deserialize, Serialize};
use statrs::distribution::{ContinuousCDF, Normal};

/// Level of the conditional-independence test.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct CiTestConfig {
    pub alpha: f64,
}

impl Default for CiTestConfig {
    fn default() -> Self {
        Self { alpha: 0.05 }
    }
}

impl CiTestConfig {
    pub fn new(alpha: f64) -> Result<Self> {
        let c = Self { alpha };
        c.validate()?;
        Ok(c)
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.alpha > 0.0 && self.alpha < 1.0) {
            return Err(Error::Config(format!("alpha must lie in (0, 1), got {}", self.alpha)));
        }
        Ok(())
    }

    /// Two-sided standard-normal critical value.
    pub fn critical_value(&self) -> f64 {
        Normal::standard().inverse_cdf(1.0 - self.alpha / 2.0)
    }
}

pub fn mean<T: Scalar>(x: &[T]) -> T {
    x.iter().copied().sum::<T>() / T::of_usize(x.len())
}

/// Population variance (divides by n).
pub fn variance<T: Scalar>(x: &[T]) -> T {
    let m = mean(x);
    x.iter().map(|&v| (v - m) * (v - m)).sum::<T>() / T::of_usize(x.len())
}

/// Pearson correlation matrix of the given columns.
pub fn correlation_matrix<T: Scalar>(columns: &[&[T]]) -> Result<Matrix<T>> {
    let p = columns.len();
    let n = columns.first().map_or(0, |c| c.len());
    if columns.iter().any(|c| c.len() != n) {
        return Err(Error::ShapeMismatch("columns differ in length".into()));
    }
    if n < 3 {
        return Err(Error::InsufficientSamples(format!("correlation needs at least 3 rows, got {n}")));
    }
    let mut centered = Vec::with_capacity(p);
    let mut norms = Vec::with_capacity(p);
    for (j, c) in columns.iter().enumerate() {
        let m = mean(c);
        let z: Vec<T> = c.iter().map(|&v| v - m).collect();
        let ss: T = z.iter().map(|&v| v * v).sum();
        let scale = c.iter().fold(T::zero(), |a, &v| a.max(v.abs())).max(T::min_positive_value());
        if ss.sqrt() <= scale * T::epsilon() * T::of_usize(n).sqrt() * T::of(8.0) {
            return Err(Error::DegenerateColumn(format!("column {j} is constant")));
        }
        centered.push(z);
        norms.push(ss.sqrt());
    }
    let mut r = Matrix::identity(p);
    for a in 0..p {
        for b in a + 1..p {
            let dot: T = centered[a].iter().zip(&centered[b]).map(|(&u, &v)| u * v).sum();
            let v = (dot / (norms[a] * norms[b])).max(-T::one()).min(T::one());
            r[(a, b)] = v;
            r[(b, a)] = v;
        }
    }
    Ok(r)
}

/// Partial correlation of `i` and `j` given `s`, from the inverse of the
/// correlation submatrix on `{i, j} ∪ s`.
pub fn partial_correlation<T: Scalar>(corr: &Matrix<T>, i: usize, j: usize, s: &[usize]) -> Result<T> {
    if s.is_empty() {
        return Ok(corr[(i, j)]);
    }
    let mut idx = vec![i, j];
    idx.extend(s.iter().copied().filter(|&k| k != i && k != j));
    let m = idx.len();
    let mut sub = Matrix::zeros(m, m);
    for (a, &u) in idx.iter().enumerate() {
        for (b, &v) in idx.iter().enumerate() {
            sub[(a, b)] = corr[(u, v)];
        }
    }
    let p = sub.inverse().ok_or(Error::SingularSubmatrix)?;
    let denom = (p[(0, 0)] * p[(1, 1)]).sqrt();
    if !(denom > T::zero()) || !denom.is_finite() {
        return Err(Error::SingularSubmatrix);
    }
    Ok((-p[(0, 1)] / denom).max(-T::one()).min(T::one()))
}

/// Fisher-z statistic `sqrt(n - s - 3) * |atanh(r)|`.
pub fn fisher_z_statistic<T: Scalar>(r: T, n: usize, s: usize) -> Result<T> {
    if n <= s + 3 {
        return Err(Error::InsufficientSamples(format!(
            "Fisher-z with {s} conditioning variables needs more than {} rows, got {n}",
            s + 3
        )));
    }
    // |r| = 1 would give an infinite statistic; keep it finite and huge.
    let bound = T::one() - T::epsilon();
    let r = r.max(-bound).min(bound);
    let z = T::of(0.5) * ((T::one() + r) / (T::one() - r)).ln();
    Ok(T::of_usize(n - s - 3).sqrt() * z.abs())
}

/// True when the (partial) correlation `r` is judged zero at level `cfg.alpha`.
pub fn fisher_z_independent<T: Scalar>(r: T, n: usize, s: usize, cfg: &CiTestConfig) -> Result<bool> {
    let stat = fisher_z_statistic(r, n, s)?;
    Ok(stat.to_f64_lossy() <= cfg.critical_value())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rng;
    use proptest::prelude::*;
    use rand::Rng;

    fn corr3(xz: f64, zy: f64, xy: f64) -> Matrix<f64> {
        Matrix::from_rows(&[vec![1.0, xz, xy], vec![xz, 1.0, zy], vec![xy, zy, 1.0]])
    }

    #[test]
    fn self_and_linear_correlation_are_one() {
        let x: Vec<f64> = (0..50).map(|i| (i as f64).sin()).collect();
        let y: Vec<f64> = x.iter().map(|v| 2.0 * v).collect();
        let r = correlation_matrix(&[&x, &x, &y]).unwrap();
        assert_eq!(r[(0, 0)], 1.0);
        assert!((r[(0, 1)] - 1.0).abs() < 1e-12);
        assert!((r[(0, 2)] - 1.0).abs() < 1e-12);
    }

    #[test]
    fn independent_uniforms_are_nearly_uncorrelated() {
        let mut g = rng::seeded(3);
        let a: Vec<f64> = (0..100_000).map(|_| g.random()).collect();
        let b: Vec<f64> = (0..100_000).map(|_| g.random()).collect();
        let r = correlation_matrix(&[&a, &b]).unwrap();
        assert!(r[(0, 1)].abs() < 0.02);
        assert_eq!(r[(0, 1)], r[(1, 0)]);
    }

    #[test]
    fn constant_column_is_degenerate() {
        let a = [1.0, 2.0, 3.0, 4.0];
        let b = [5.0; 4];
        assert!(matches!(correlation_matrix(&[&a[..], &b[..]]), Err(Error::DegenerateColumn(_))));
    }

    #[test]
    fn partial_correlation_examples() {
        let c = corr3(0.6, 0.7, 0.42);
        assert_eq!(partial_correlation(&c, 0, 2, &[]).unwrap(), 0.42);
        // Closed form (r_xy - r_xz r_zy) / sqrt((1 - r_xz^2)(1 - r_zy^2)).
        let oracle = (0.42 - 0.6 * 0.7) / ((1.0f64 - 0.36) * (1.0 - 0.49)).sqrt();
        let got = partial_correlation(&c, 0, 2, &[1]).unwrap();
        assert!((got - oracle).abs() < 1e-12 && got.abs() < 1e-12);
        let e = corr3(0.5, 0.5, 0.5);
        let got = partial_correlation(&e, 0, 2, &[1]).unwrap();
        assert!((got - (0.5 - 0.25) / (1.0 - 0.25)).abs() < 1e-12);
    }

    #[test]
    fn singular_submatrix_errors() {
        let c = corr3(1.0, 1.0, 1.0);
        assert_eq!(partial_correlation(&c, 0, 2, &[1]), Err(Error::SingularSubmatrix));
    }

    #[test]
    fn fisher_z_examples() {
        let cfg = CiTestConfig::default();
        assert!(fisher_z_independent(0.0, 10, 0, &cfg).unwrap());
        let stat = fisher_z_statistic(0.5f64, 100, 1).unwrap();
        let oracle = 96f64.sqrt() * 0.5 * (1.5f64 / 0.5).ln();
        assert!((stat - oracle).abs() < 1e-12 && (stat - 5.38).abs() < 0.01);
        assert!(!fisher_z_independent(0.5, 100, 1, &cfg).unwrap());
        assert!(fisher_z_independent(0.01, 50, 0, &cfg).unwrap());
        assert!((cfg.critical_value() - 1.959964).abs() < 1e-5);
        assert!(matches!(fisher_z_independent(0.1, 4, 1, &cfg), Err(Error::InsufficientSamples(_))));
        assert!(!fisher_z_independent(1.0, 100, 0, &cfg).unwrap());
    }

    #[test]
    fn alpha_validated() {
        assert!(CiTestConfig::new(0.0).is_err());
        assert!(CiTestConfig::new(1.0).is_err());
        assert!(CiTestConfig::new(0.01).is_ok());
    }

    #[test]
    fn works_in_f32() {
        let c = Matrix::<f32>::from_rows(&[vec![1.0, 0.5, 0.5], vec![0.5, 1.0, 0.5], vec![0.5, 0.5, 1.0]]);
        let got = partial_correlation(&c, 0, 2, &[1]).unwrap();
        assert!((got - 1.0 / 3.0).abs() < 1e-6);
    }

    fn random_pd(seed: u64, p: usize) -> Matrix<f64> {
        let mut g = rng::seeded(seed);
        let cols: Vec<Vec<f64>> = (0..p).map(|_| (0..40).map(|_| g.random::<f64>()).collect()).collect();
        let refs: Vec<&[f64]> = cols.iter().map(Vec::as_slice).collect();
        correlation_matrix(&refs).unwrap()
    }

    proptest! {
        #[test]
        fn fisher_z_monotone_in_r(r1 in -0.99f64..0.99, t in 0.0f64..1.0, n in 10usize..500, s in 0usize..5) {
            let r2 = r1 * t;
            let cfg = CiTestConfig::default();
            if fisher_z_independent(r1, n, s, &cfg).unwrap() {
                prop_assert!(fisher_z_independent(r2, n, s, &cfg).unwrap());
            }
        }

        #[test]
        fn partial_correlation_symmetric(seed in 0u64..1000, k in 0usize..3) {
            let c = random_pd(seed, 5);
            let s: Vec<usize> = (2..2 + k).collect();
            let a = partial_correlation(&c, 0, 1, &s).unwrap();
            let b = partial_correlation(&c, 1, 0, &s).unwrap();
            prop_assert!((a - b).abs() < 1e-12);
        }
    }
}
