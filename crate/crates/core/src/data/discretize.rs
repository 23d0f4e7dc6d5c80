//! Equal-width and equal-frequency binning of a real column into integer codes.

use crate::error::{Error, Result};
use crate::scalar::Scalar;
use serde::{Deserialize, Serialize};

/// Codes for one column plus the boundaries that produced them.
#[derive(Debug, Clone, PartialEq)]
pub struct Binned<T> {
    pub codes: Vec<u32>,
    /// Equal width: the `k + 1` interval edges from min to max.
    /// Equal frequency: the strictly increasing interior cut points; a value
    /// `v` gets code `#{b : v > b}`.
    pub boundaries: Vec<T>,
    pub bins: usize,
    /// Set when the column is constant; every code is then 0.
    pub degenerate: bool,
}

fn check_input<T: Scalar>(values: &[T], k: usize) -> Result<()> {
    if k < 2 {
        return Err(Error::Config(format!("bin count must be at least 2, got {k}")));
    }
    if values.is_empty() {
        return Err(Error::DegenerateColumn("<empty>".into()));
    }
    if values.iter().any(|v| !v.is_finite()) {
        return Err(Error::Config("non-finite value in column".into()));
    }
    Ok(())
}

fn min_max<T: Scalar>(values: &[T]) -> (T, T) {
    values
        .iter()
        .fold((T::infinity(), T::neg_infinity()), |(lo, hi), &v| (lo.min(v), hi.max(v)))
}

/// Code of `v` under equal-width binning of `[min, max]` into `k` intervals.
/// Values outside the range clamp to the first or last interval.
pub fn equal_width_code<T: Scalar>(v: T, min: T, max: T, k: usize) -> u32 {
    if !(max > min) {
        return 0;
    }
    let pos = T::of_usize(k) * (v - min) / (max - min);
    if !(pos > T::zero()) {
        return 0;
    }
    let idx = pos.floor().to_usize().unwrap_or(k - 1);
    idx.min(k - 1) as u32
}

/// Splits `[min, max]` into `k` equal intervals; the maximum maps to `k - 1`.
pub fn discretize_equal_width<T: Scalar>(values: &[T], k: usize) -> Result<Binned<T>> {
    check_input(values, k)?;
    let (min, max) = min_max(values);
    let width = (max - min) / T::of_usize(k);
    let boundaries = (0..=k).map(|j| min + width * T::of_usize(j)).collect();
    if !(max > min) {
        return Ok(Binned {
            codes: vec![0; values.len()],
            boundaries,
            bins: k,
            degenerate: true,
        });
    }
    let codes = values.iter().map(|&v| equal_width_code(v, min, max, k)).collect();
    Ok(Binned {
        codes,
        boundaries,
        bins: k,
        degenerate: false,
    })
}

/// Code of `v` given interior cut points: the number of cut points strictly below `v`.
pub fn quantile_code<T: Scalar>(v: T, cuts: &[T]) -> u32 {
    cuts.partition_point(|&b| v > b) as u32
}

/// Cuts at the `j/k` sample quantiles (`j = 1..k-1`), ties going to the lower code.
///
/// Duplicate cut points collapse, so a column with heavy ties realizes fewer
/// than `k` bins; `bins` reports the realized count.
pub fn discretize_equal_frequency<T: Scalar>(values: &[T], k: usize) -> Result<Binned<T>> {
    check_input(values, k)?;
    let mut sorted = values.to_vec();
    sorted.sort_by(|a, b| a.partial_cmp(b).expect("finite values"));
    let n = sorted.len();
    let max = sorted[n - 1];
    let mut cuts: Vec<T> = Vec::with_capacity(k - 1);
    for j in 1..k {
        // 1-based rank ceil(j n / k)
        let rank = (j * n).div_ceil(k).max(1);
        let b = sorted[rank - 1];
        if b < max && cuts.last().is_none_or(|&last| b > last) {
            cuts.push(b);
        }
    }
    let degenerate = sorted[0] == max;
    let codes = values.iter().map(|&v| quantile_code(v, &cuts)).collect();
    Ok(Binned {
        codes,
        bins: cuts.len() + 1,
        boundaries: cuts,
        degenerate,
    })
}

/// Binary target: equal-width split in two, `1` for the upper half (midpoint included).
pub fn make_binary_target<T: Scalar>(values: &[T]) -> Result<Vec<u8>> {
    let b = discretize_equal_width(values, 2)?;
    if b.degenerate {
        return Err(Error::DegenerateColumn("target".into()));
    }
    Ok(b.codes.into_iter().map(|c| c as u8).collect())
}

/// Binning scheme.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "snake_case")]
pub enum Scheme {
    #[default]
    EqualWidth,
    EqualFrequency,
}
