//! Tabular data: the real-valued [`Dataset`], its integer-coded
//! [`DiscretizedDataset`], and CSV I/O.

mod csv_io;
pub mod discretize;

pub use csv_io::{load_csv, load_kinds_sidecar, read_csv, save_csv, write_csv, KindsSidecar};
pub use discretize::{
    discretize_equal_frequency, discretize_equal_width, make_binary_target, Binned, Scheme,
};

use crate::error::{Error, Result};
use serde::{Deserialize, Serialize};
use std::collections::BTreeSet;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "snake_case")]
pub enum ColumnKind {
    #[default]
    Continuous,
    Discrete,
}

/// Column-major table of finite reals.
#[derive(Debug, Clone, PartialEq)]
pub struct Dataset {
    labels: Vec<String>,
    kinds: Vec<ColumnKind>,
    columns: Vec<Vec<f64>>,
    n_rows: usize,
}

impl Dataset {
    /// All columns continuous.
    pub fn new(labels: Vec<String>, columns: Vec<Vec<f64>>) -> Result<Self> {
        let kinds = vec![ColumnKind::Continuous; labels.len()];
        Self::with_kinds(labels, kinds, columns)
    }

    pub fn with_kinds(
        labels: Vec<String>,
        kinds: Vec<ColumnKind>,
        columns: Vec<Vec<f64>>,
    ) -> Result<Self> {
        if labels.len() != columns.len() || kinds.len() != columns.len() {
            return Err(Error::ShapeMismatch(format!(
                "{} labels, {} kinds, {} columns",
                labels.len(),
                kinds.len(),
                columns.len()
            )));
        }
        let n_rows = columns.first().map_or(0, Vec::len);
        for (j, col) in columns.iter().enumerate() {
            if col.len() != n_rows {
                return Err(Error::ShapeMismatch(format!(
                    "column `{}` has {} rows, expected {n_rows}",
                    labels[j],
                    col.len()
                )));
            }
            if let Some(i) = col.iter().position(|v| !v.is_finite()) {
                return Err(Error::Parse {
                    row: i + 1,
                    column: j + 1,
                    message: "non-finite value".into(),
                });
            }
            if kinds[j] == ColumnKind::Discrete {
                if let Some(i) = col.iter().position(|v| v.fract() != 0.0) {
                    return Err(Error::Parse {
                        row: i + 1,
                        column: j + 1,
                        message: "discrete column holds a non-integer value".into(),
                    });
                }
            }
        }
        Ok(Self {
            labels,
            kinds,
            columns,
            n_rows,
        })
    }

    pub fn labels(&self) -> &[String] {
        &self.labels
    }

    pub fn kinds(&self) -> &[ColumnKind] {
        &self.kinds
    }

    pub fn n_rows(&self) -> usize {
        self.n_rows
    }

    pub fn n_cols(&self) -> usize {
        self.columns.len()
    }

    pub fn column(&self, j: usize) -> &[f64] {
        &self.columns[j]
    }

    pub fn columns(&self) -> &[Vec<f64>] {
        &self.columns
    }

    pub fn index_of(&self, label: &str) -> Option<usize> {
        self.labels.iter().position(|l| l == label)
    }

    pub fn set_kind(&mut self, j: usize, kind: ColumnKind) -> Result<()> {
        if kind == ColumnKind::Discrete && self.columns[j].iter().any(|v| v.fract() != 0.0) {
            return Err(Error::Config(format!(
                "column `{}` is not integer-valued",
                self.labels[j]
            )));
        }
        self.kinds[j] = kind;
        Ok(())
    }

    /// New dataset holding the listed columns, in that order.
    pub fn select(&self, cols: &[usize]) -> Self {
        Self {
            labels: cols.iter().map(|&j| self.labels[j].clone()).collect(),
            kinds: cols.iter().map(|&j| self.kinds[j]).collect(),
            columns: cols.iter().map(|&j| self.columns[j].clone()).collect(),
            n_rows: self.n_rows,
        }
    }
}

/// How one column was coded; used to code new values (e.g. interventional
/// samples) with the same boundaries.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "scheme", rename_all = "snake_case")]
pub enum ColumnBinning {
    EqualWidth { min: f64, max: f64, bins: usize },
    EqualFrequency { cuts: Vec<f64> },
    /// Discrete column: sorted distinct values, code = position.
    Levels { values: Vec<f64> },
}

impl ColumnBinning {
    pub fn code_of(&self, v: f64) -> u32 {
        match self {
            Self::EqualWidth { min, max, bins } => discretize::equal_width_code(v, *min, *max, *bins),
            Self::EqualFrequency { cuts } => discretize::quantile_code(v, cuts),
            Self::Levels { values } => {
                // nearest level; exact for values seen at fit time
                let i = values.partition_point(|&x| x < v);
                if i == 0 {
                    0
                } else if i == values.len() {
                    (values.len() - 1) as u32
                } else if (values[i] - v).abs() < (v - values[i - 1]).abs() {
                    i as u32
                } else {
                    (i - 1) as u32
                }
            }
        }
    }

    pub fn bins(&self) -> usize {
        match self {
            Self::EqualWidth { bins, .. } => *bins,
            Self::EqualFrequency { cuts } => cuts.len() + 1,
            Self::Levels { values } => values.len().max(1),
        }
    }
}

/// Integer-coded table. Codes of column `j` lie in `[0, bins[j] - 1]`.
#[derive(Debug, Clone, PartialEq)]
pub struct DiscretizedDataset {
    labels: Vec<String>,
    codes: Vec<Vec<u32>>,
    bins: Vec<usize>,
    binnings: Vec<ColumnBinning>,
    /// Per-code representative value (bin midpoint, bin mean, or the level itself).
    representatives: Vec<Vec<f64>>,
    degenerate: Vec<bool>,
}

impl DiscretizedDataset {
    /// Wraps ready-made codes; each column's bin count is `max code + 1`.
    pub fn from_codes(labels: Vec<String>, codes: Vec<Vec<u32>>) -> Result<Self> {
        if labels.len() != codes.len() {
            return Err(Error::ShapeMismatch("labels vs columns".into()));
        }
        let n = codes.first().map_or(0, Vec::len);
        if codes.iter().any(|c| c.len() != n) {
            return Err(Error::ShapeMismatch("ragged code columns".into()));
        }
        let bins: Vec<usize> = codes
            .iter()
            .map(|c| c.iter().copied().max().map_or(1, |m| m as usize + 1))
            .collect();
        let binnings = bins
            .iter()
            .map(|&b| ColumnBinning::Levels {
                values: (0..b).map(|v| v as f64).collect(),
            })
            .collect();
        let representatives = bins.iter().map(|&b| (0..b).map(|v| v as f64).collect()).collect();
        let degenerate = bins.iter().map(|&b| b < 2).collect();
        Ok(Self {
            labels,
            codes,
            bins,
            binnings,
            representatives,
            degenerate,
        })
    }

    pub fn labels(&self) -> &[String] {
        &self.labels
    }

    pub fn n_rows(&self) -> usize {
        self.codes.first().map_or(0, Vec::len)
    }

    pub fn n_cols(&self) -> usize {
        self.codes.len()
    }

    pub fn codes(&self, j: usize) -> &[u32] {
        &self.codes[j]
    }

    pub fn bins(&self, j: usize) -> usize {
        self.bins[j]
    }

    pub fn binning(&self, j: usize) -> &ColumnBinning {
        &self.binnings[j]
    }

    pub fn representative(&self, j: usize, code: u32) -> f64 {
        self.representatives[j][code as usize]
    }

    pub fn is_degenerate(&self, j: usize) -> bool {
        self.degenerate[j]
    }

    pub fn index_of(&self, label: &str) -> Option<usize> {
        self.labels.iter().position(|l| l == label)
    }

    /// Distinct codes present in column `j`, ascending.
    pub fn observed_codes(&self, j: usize) -> Vec<u32> {
        self.codes[j].iter().copied().collect::<BTreeSet<_>>().into_iter().collect()
    }

    /// Codes as reals, for regression-based discovery on ordinal data.
    pub fn to_numeric(&self) -> Dataset {
        let cols = self.codes.iter().map(|c| c.iter().map(|&v| v as f64).collect()).collect();
        Dataset::new(self.labels.clone(), cols).expect("codes are finite")
    }

    pub fn select(&self, cols: &[usize]) -> Self {
        Self {
            labels: cols.iter().map(|&j| self.labels[j].clone()).collect(),
            codes: cols.iter().map(|&j| self.codes[j].clone()).collect(),
            bins: cols.iter().map(|&j| self.bins[j]).collect(),
            binnings: cols.iter().map(|&j| self.binnings[j].clone()).collect(),
            representatives: cols.iter().map(|&j| self.representatives[j].clone()).collect(),
            degenerate: cols.iter().map(|&j| self.degenerate[j]).collect(),
        }
    }

    /// Codes a new real-valued table with this dataset's boundaries.
    /// Column `j` of `data` is coded with binning `j`.
    pub fn recode(&self, data: &Dataset) -> Result<Self> {
        if data.n_cols() != self.n_cols() {
            return Err(Error::SchemaMismatch(format!(
                "expected {} columns, got {}",
                self.n_cols(),
                data.n_cols()
            )));
        }
        let codes = (0..self.n_cols())
            .map(|j| data.column(j).iter().map(|&v| self.binnings[j].code_of(v)).collect())
            .collect();
        Ok(Self {
            labels: self.labels.clone(),
            codes,
            bins: self.bins.clone(),
            binnings: self.binnings.clone(),
            representatives: self.representatives.clone(),
            degenerate: self.degenerate.clone(),
        })
    }
}

/// Discretizes every column: continuous columns with `scheme` into `k` bins,
/// discrete columns by their distinct levels.
pub fn discretize(data: &Dataset, scheme: Scheme, k: usize) -> Result<DiscretizedDataset> {
    let mut codes = Vec::with_capacity(data.n_cols());
    let mut bins = Vec::with_capacity(data.n_cols());
    let mut binnings = Vec::with_capacity(data.n_cols());
    let mut representatives = Vec::with_capacity(data.n_cols());
    let mut degenerate = Vec::with_capacity(data.n_cols());
    for j in 0..data.n_cols() {
        let col = data.column(j);
        if col.is_empty() {
            codes.push(Vec::new());
            bins.push(k);
            binnings.push(ColumnBinning::EqualWidth {
                min: 0.0,
                max: 0.0,
                bins: k,
            });
            representatives.push(vec![0.0; k]);
            degenerate.push(true);
            continue;
        }
        let (c, binning, reps, degen) = match data.kinds()[j] {
            ColumnKind::Discrete => {
                let levels: Vec<f64> = {
                    let mut v = col.to_vec();
                    v.sort_by(|a, b| a.partial_cmp(b).unwrap());
                    v.dedup();
                    v
                };
                let binning = ColumnBinning::Levels {
                    values: levels.clone(),
                };
                let c: Vec<u32> = col.iter().map(|&v| binning.code_of(v)).collect();
                let degen = levels.len() < 2;
                (c, binning, levels, degen)
            }
            ColumnKind::Continuous => match scheme {
                Scheme::EqualWidth => {
                    let b = discretize_equal_width(col, k)?;
                    let (min, max) = (b.boundaries[0], b.boundaries[k]);
                    let reps = (0..k).map(|i| 0.5 * (b.boundaries[i] + b.boundaries[i + 1])).collect();
                    if b.degenerate {
                        log::warn!("column `{}` is constant", data.labels()[j]);
                    }
                    (b.codes, ColumnBinning::EqualWidth { min, max, bins: k }, reps, b.degenerate)
                }
                Scheme::EqualFrequency => {
                    let b = discretize_equal_frequency(col, k)?;
                    let reps = bin_means(col, &b.codes, b.bins);
                    if b.degenerate {
                        log::warn!("column `{}` is constant", data.labels()[j]);
                    }
                    (
                        b.codes,
                        ColumnBinning::EqualFrequency { cuts: b.boundaries },
                        reps,
                        b.degenerate,
                    )
                }
            },
        };
        bins.push(binning.bins());
        codes.push(c);
        binnings.push(binning);
        representatives.push(reps);
        degenerate.push(degen);
    }
    Ok(DiscretizedDataset {
        labels: data.labels().to_vec(),
        codes,
        bins,
        binnings,
        representatives,
        degenerate,
    })
}

fn bin_means(col: &[f64], codes: &[u32], bins: usize) -> Vec<f64> {
    let mut sum = vec![0.0; bins];
    let mut cnt = vec![0usize; bins];
    for (&v, &c) in col.iter().zip(codes) {
        sum[c as usize] += v;
        cnt[c as usize] += 1;
    }
    sum.iter().zip(&cnt).map(|(&s, &c)| if c > 0 { s / c as f64 } else { f64::NAN }).collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn ragged_and_non_finite_rejected() {
        assert!(Dataset::new(vec!["a".into(), "b".into()], vec![vec![1.0], vec![]]).is_err());
        assert!(matches!(
            Dataset::new(vec!["a".into()], vec![vec![1.0, f64::NAN]]),
            Err(Error::Parse { row: 2, column: 1, .. })
        ));
    }

    #[test]
    fn discrete_columns_keep_their_levels() {
        let d = Dataset::with_kinds(
            vec!["k".into(), "x".into()],
            vec![ColumnKind::Discrete, ColumnKind::Continuous],
            vec![vec![3.0, 1.0, 3.0, 7.0], vec![0.0, 0.5, 0.9, 1.0]],
        )
        .unwrap();
        let z = discretize(&d, Scheme::EqualWidth, 2).unwrap();
        assert_eq!(z.codes(0), &[1, 0, 1, 2]);
        assert_eq!(z.bins(0), 3);
        assert_eq!(z.codes(1), &[0, 1, 1, 1]);
        assert_eq!(z.representative(0, 2), 7.0);
    }

    #[test]
    fn recode_uses_fitted_edges() {
        let d = Dataset::new(vec!["x".into()], vec![vec![0.0, 0.25, 0.5, 1.0]]).unwrap();
        let z = discretize(&d, Scheme::EqualWidth, 4).unwrap();
        let fresh = Dataset::new(vec!["x".into()], vec![vec![-1.0, 0.3, 2.0]]).unwrap();
        assert_eq!(z.recode(&fresh).unwrap().codes(0), &[0, 1, 3]);
        assert_eq!(z.representative(0, 1), 0.375);
    }

    proptest! {
        #[test]
        fn discretization_is_monotone_and_in_range(
            values in prop::collection::vec(-1e6f64..1e6, 2..200),
            k in 2usize..15,
        ) {
            for b in [discretize_equal_width(&values, k).unwrap(), discretize_equal_frequency(&values, k).unwrap()] {
                prop_assert!(b.codes.iter().all(|&c| (c as usize) < k));
                let mut pairs: Vec<(f64, u32)> = values.iter().copied().zip(b.codes.iter().copied()).collect();
                pairs.sort_by(|a, b| a.0.partial_cmp(&b.0).unwrap());
                prop_assert!(pairs.windows(2).all(|w| w[0].1 <= w[1].1));
            }
        }

        #[test]
        fn equal_frequency_balanced_on_distinct_values(n in 10usize..400, k in 2usize..12) {
            let values: Vec<f64> = (0..n).map(|i| (i as f64 * 0.618).sin() * 1000.0 + i as f64 * 1e-3).collect();
            let b = discretize_equal_frequency(&values, k).unwrap();
            let mut counts = vec![0usize; b.bins];
            for &c in &b.codes { counts[c as usize] += 1; }
            let (lo, hi) = (counts.iter().min().unwrap(), counts.iter().max().unwrap());
            prop_assert!(hi - lo <= 1, "counts {:?}", counts);
            prop_assert!(b.boundaries.windows(2).all(|w| w[0] < w[1]));
        }
    }
}
