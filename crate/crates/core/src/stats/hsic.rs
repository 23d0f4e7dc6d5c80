use crate::error::{Error, Result};
use crate::linalg::Matrix;
use crate::rng;
use crate::scalar::Scalar;
use rand::seq::SliceRandom;
use serde::{Deserialize, Serialize};
use statrs::distribution::{ContinuousCDF, Gamma};

const MIN_POINTS: usize = 20;
const BANDWIDTH_POINTS: usize = 2000;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct HsicConfig {
    pub alpha: f64,
    /// When set, the null distribution comes from this many permutations
    /// instead of the gamma approximation.
    #[serde(default)]
    pub permutations: Option<usize>,
    #[serde(default)]
    pub seed: u64,
    /// Rows beyond this are thinned by an even stride before building the
    /// Gram matrices. `None` uses every row.
    #[serde(default = "default_max_points")]
    pub max_points: Option<usize>,
}

fn default_max_points() -> Option<usize> {
    Some(1000)
}

impl Default for HsicConfig {
    fn default() -> Self {
        Self {
            alpha: 0.05,
            permutations: None,
            seed: 0,
            max_points: default_max_points(),
        }
    }
}

impl HsicConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.alpha > 0.0 && self.alpha < 1.0) {
            return Err(Error::Config(format!("hsic alpha must lie in (0, 1), got {}", self.alpha)));
        }
        if self.permutations == Some(0) {
            return Err(Error::Config("permutation count must be positive".into()));
        }
        if matches!(self.max_points, Some(m) if m < MIN_POINTS) {
            return Err(Error::Config(format!("max_points must be at least {MIN_POINTS}")));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct HsicOutcome<T> {
    /// Biased estimate `tr(K H L H) / m^2`.
    pub statistic: T,
    /// Rejection threshold for `statistic` at the configured level.
    pub threshold: T,
    pub p_value: f64,
}

impl<T: Scalar> HsicOutcome<T> {
    pub fn independent(&self) -> bool {
        self.statistic <= self.threshold
    }
}

/// Univariate convenience wrapper around [`hsic_test`].
pub fn hsic_statistic<T: Scalar>(x: &[T], y: &[T], cfg: &HsicConfig) -> Result<HsicOutcome<T>> {
    hsic_test(&[x], &[y], cfg)
}

/// HSIC between the column sets `x` and `y` with Gaussian kernels whose
/// widths follow the median heuristic.
pub fn hsic_test<T: Scalar>(x: &[&[T]], y: &[&[T]], cfg: &HsicConfig) -> Result<HsicOutcome<T>> {
    cfg.validate()?;
    let n = x.first().or(y.first()).map_or(0, |c| c.len());
    if x.is_empty() || y.is_empty() || x.iter().chain(y).any(|c| c.len() != n) {
        return Err(Error::ShapeMismatch("hsic inputs must be non-empty columns of equal length".into()));
    }
    if n < MIN_POINTS {
        return Err(Error::InsufficientSamples(format!("hsic needs at least {MIN_POINTS} rows, got {n}")));
    }
    let rows = thin(n, cfg.max_points.unwrap_or(n));
    let px = points(x, &rows);
    let py = points(y, &rows);
    let kx = gram(&px, x.len());
    let ky = gram(&py, y.len());
    let m = rows.len();
    let kc = center(&kx);
    let lc = center(&ky);
    let mf = T::of_usize(m);
    let stat = kc.hadamard(&lc).as_slice().iter().copied().sum::<T>() / (mf * mf);

    let (threshold, p_value) = match cfg.permutations {
        Some(b) => permutation_null(&kc, &lc, stat, b, cfg),
        None => gamma_null(&kx, &ky, &kc, &lc, stat, cfg.alpha),
    };
    Ok(HsicOutcome {
        statistic: stat,
        threshold,
        p_value,
    })
}

fn thin(n: usize, cap: usize) -> Vec<usize> {
    if n <= cap {
        return (0..n).collect();
    }
    (0..cap).map(|k| k * n / cap).collect()
}

fn points<T: Scalar>(cols: &[&[T]], rows: &[usize]) -> Vec<T> {
    let mut out = Vec::with_capacity(rows.len() * cols.len());
    for &r in rows {
        out.extend(cols.iter().map(|c| c[r]));
    }
    out
}

fn sq_dist<T: Scalar>(p: &[T], d: usize, i: usize, j: usize) -> T {
    (0..d)
        .map(|k| {
            let t = p[i * d + k] - p[j * d + k];
            t * t
        })
        .sum()
}

/// Gaussian Gram matrix with `sigma` = median pairwise distance over at most
/// `BANDWIDTH_POINTS` points; falls back to the median of the positive
/// distances, then to 1, when the median is zero.
fn gram<T: Scalar>(p: &[T], d: usize) -> Matrix<T> {
    let m = p.len() / d;
    let sub = thin(m, BANDWIDTH_POINTS);
    let mut dists: Vec<T> = Vec::with_capacity(sub.len() * sub.len() / 2);
    for (a, &i) in sub.iter().enumerate() {
        for &j in &sub[a + 1..] {
            dists.push(sq_dist(p, d, i, j));
        }
    }
    let median = |v: &mut Vec<T>| -> T {
        if v.is_empty() {
            return T::zero();
        }
        let k = v.len() / 2;
        v.select_nth_unstable_by(k, |a, b| a.partial_cmp(b).unwrap_or(std::cmp::Ordering::Equal));
        v[k]
    };
    let mut s2 = median(&mut dists);
    if !(s2 > T::zero()) {
        dists.retain(|&v| v > T::zero());
        s2 = median(&mut dists);
    }
    if !(s2 > T::zero()) {
        s2 = T::one();
    }
    let mut k = Matrix::zeros(m, m);
    let inv = T::of(-0.5) / s2;
    for i in 0..m {
        k[(i, i)] = T::one();
        for j in i + 1..m {
            let v = (sq_dist(p, d, i, j) * inv).exp();
            k[(i, j)] = v;
            k[(j, i)] = v;
        }
    }
    k
}

/// `H K H` with `H = I - 11'/m`.
fn center<T: Scalar>(k: &Matrix<T>) -> Matrix<T> {
    let m = k.nrows();
    let mf = T::of_usize(m);
    let rows: Vec<T> = (0..m).map(|i| k.row(i).iter().copied().sum::<T>() / mf).collect();
    let all = rows.iter().copied().sum::<T>() / mf;
    let mut c = k.clone();
    for i in 0..m {
        for j in 0..m {
            c[(i, j)] = k[(i, j)] - rows[i] - rows[j] + all;
        }
    }
    c
}

/// Gamma approximation to the null law of `m * HSIC_b`.
fn gamma_null<T: Scalar>(
    kx: &Matrix<T>,
    ky: &Matrix<T>,
    kc: &Matrix<T>,
    lc: &Matrix<T>,
    stat: T,
    alpha: f64,
) -> (T, f64) {
    let m = kx.nrows();
    let mf = m as f64;
    let mut var = 0.0;
    for i in 0..m {
        for j in 0..m {
            if i != j {
                let v = (kc[(i, j)] * lc[(i, j)]).to_f64_lossy() / 6.0;
                var += v * v;
            }
        }
    }
    var /= mf * (mf - 1.0);
    var *= 72.0 * (mf - 4.0) * (mf - 5.0) / (mf * (mf - 1.0) * (mf - 2.0) * (mf - 3.0));
    let off_mean = |k: &Matrix<T>| {
        let total: f64 = k.as_slice().iter().map(|v| v.to_f64_lossy()).sum();
        (total - mf) / (mf * (mf - 1.0))
    };
    let (mux, muy) = (off_mean(kx), off_mean(ky));
    let mean = (1.0 + mux * muy - mux - muy) / mf;
    let scaled = stat.to_f64_lossy() * mf;
    if !(var > 0.0 && mean > 0.0) {
        // A constant kernel: no evidence of dependence is possible.
        return (T::infinity(), 1.0);
    }
    let shape = mean * mean / var;
    let scale = var * mf / mean;
    match Gamma::new(shape, 1.0 / scale) {
        Ok(g) => {
            let thr = g.inverse_cdf(1.0 - alpha) / mf;
            (T::of(thr), g.sf(scaled))
        }
        Err(_) => (T::infinity(), 1.0),
    }
}

fn permutation_null<T: Scalar>(kc: &Matrix<T>, lc: &Matrix<T>, stat: T, b: usize, cfg: &HsicConfig) -> (T, f64) {
    let m = kc.nrows();
    let mf = T::of_usize(m);
    let mut g = rng::seeded(cfg.seed);
    let mut perm: Vec<usize> = (0..m).collect();
    let mut null: Vec<T> = Vec::with_capacity(b);
    for _ in 0..b {
        perm.shuffle(&mut g);
        let mut s = T::zero();
        for i in 0..m {
            let pi = perm[i];
            for j in 0..m {
                s = s + kc[(i, j)] * lc[(pi, perm[j])];
            }
        }
        null.push(s / (mf * mf));
    }
    let exceed = null.iter().filter(|&&v| v >= stat).count();
    null.sort_by(|a, b| a.partial_cmp(b).unwrap_or(std::cmp::Ordering::Equal));
    let idx = (((1.0 - cfg.alpha) * b as f64).ceil() as usize).clamp(1, b) - 1;
    (null[idx], (1 + exceed) as f64 / (b + 1) as f64)
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::Rng;

    fn uniform(seed: u64, n: usize) -> Vec<f64> {
        let mut g = rng::seeded(seed);
        (0..n).map(|_| g.random::<f64>() * 2.0 - 1.0).collect()
    }

    #[test]
    fn shuffled_copy_is_mostly_independent() {
        let cfg = HsicConfig::default();
        let mut accepted = 0;
        for seed in 0..40 {
            let x = uniform(seed, 500);
            let mut y = x.clone();
            y.shuffle(&mut rng::seeded(1000 + seed));
            if hsic_statistic(&x, &y, &cfg).unwrap().independent() {
                accepted += 1;
            }
        }
        assert!(accepted >= 36, "accepted {accepted}/40");
    }

    #[test]
    fn identical_columns_are_dependent() {
        let x = uniform(1, 200);
        let out = hsic_statistic(&x, &x, &HsicConfig::default()).unwrap();
        assert!(out.statistic > 10.0 * out.threshold);
        assert!(out.p_value < 1e-6);
    }

    #[test]
    fn detects_uncorrelated_square() {
        let x = uniform(2, 1000);
        let y: Vec<f64> = x.iter().map(|v| v * v).collect();
        let out = hsic_statistic(&x, &y, &HsicConfig::default()).unwrap();
        assert!(!out.independent());
    }

    #[test]
    fn symmetric_in_arguments() {
        let x = uniform(3, 300);
        let y: Vec<f64> = uniform(4, 300).iter().zip(&x).map(|(a, b)| a + 0.3 * b).collect();
        let cfg = HsicConfig::default();
        let a = hsic_statistic(&x, &y, &cfg).unwrap();
        let b = hsic_statistic(&y, &x, &cfg).unwrap();
        assert!((a.statistic - b.statistic).abs() < 1e-9);
        assert!((a.threshold - b.threshold).abs() < 1e-9);
    }

    #[test]
    fn permutation_mode_agrees_on_clear_cases() {
        let cfg = HsicConfig {
            permutations: Some(100),
            seed: 9,
            ..HsicConfig::default()
        };
        let x = uniform(5, 200);
        let y = uniform(6, 200);
        let dep: Vec<f64> = x.iter().map(|v| v.abs()).collect();
        assert!(!hsic_statistic(&x, &dep, &cfg).unwrap().independent());
        assert!(hsic_statistic(&x, &y, &cfg).unwrap().p_value > 0.01);
    }

    #[test]
    fn constant_column_is_independent() {
        let x = uniform(7, 50);
        let c = vec![1.0; 50];
        assert!(hsic_statistic(&x, &c, &HsicConfig::default()).unwrap().independent());
    }

    #[test]
    fn too_few_rows() {
        let x = uniform(8, 10);
        assert!(matches!(
            hsic_statistic(&x, &x, &HsicConfig::default()),
            Err(Error::InsufficientSamples(_))
        ));
    }
}
