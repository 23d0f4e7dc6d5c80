use super::{evaluate, mean_stderr, prepare, summarize, Benchmark, ExperimentConfig, MetricsSummary};
use crate::data::Scheme;
use crate::error::{Error, Result};
use crate::model::ForestConfig;
use crate::scm::{make_benchmark, FunctionForm, NoiseFamily, Structure};
use crate::scoring::{GraphRef, Scorer, ScoringOptions};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use std::io::Write;
use std::str::FromStr;

/// Canned experiments: mean true-graph maxNesuf on the three-variable
/// structures (linear, nonlinear), then method comparisons on the
/// eight-variable benchmark for each function form and noise family.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum CannedTable {
    StructuresLinear,
    StructuresNonlinear,
    LinearUniform,
    LinearGaussian,
    NonlinearUniform,
    NonlinearGaussian,
}

impl CannedTable {
    pub const ALL: [CannedTable; 6] = [
        Self::StructuresLinear,
        Self::StructuresNonlinear,
        Self::LinearUniform,
        Self::LinearGaussian,
        Self::NonlinearUniform,
        Self::NonlinearGaussian,
    ];

    /// Table number used on the command line.
    pub fn number(self) -> u32 {
        Self::ALL.iter().position(|&t| t == self).expect("listed") as u32 + 2
    }

    pub fn eight_var(self) -> Option<(FunctionForm, NoiseFamily)> {
        match self {
            Self::LinearUniform => Some((FunctionForm::Linear, NoiseFamily::Uniform)),
            Self::LinearGaussian => Some((FunctionForm::Linear, NoiseFamily::Gaussian)),
            Self::NonlinearUniform => Some((FunctionForm::Nonlinear, NoiseFamily::Uniform)),
            Self::NonlinearGaussian => Some((FunctionForm::Nonlinear, NoiseFamily::Gaussian)),
            _ => None,
        }
    }

    pub fn form(self) -> FunctionForm {
        match self {
            Self::StructuresLinear | Self::LinearUniform | Self::LinearGaussian => FunctionForm::Linear,
            _ => FunctionForm::Nonlinear,
        }
    }
}

impl FromStr for CannedTable {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        let n: u32 = s
            .trim()
            .parse()
            .map_err(|_| Error::Config(format!("table `{s}` is not a number")))?;
        Self::ALL
            .iter()
            .copied()
            .find(|t| t.number() == n)
            .ok_or_else(|| Error::Config(format!("no canned table {n} (expected 2-7)")))
    }
}

/// Mean and standard error of the true-graph maxNesuf of `X` and `Z` for one structure.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StructureMeans {
    pub structure: Structure,
    pub form: FunctionForm,
    pub variables: Vec<String>,
    pub mean: Vec<f64>,
    pub stderr: Vec<f64>,
    pub n_trials: usize,
}

/// True-graph maxNesuf for each structure, averaged over `trials` seeds.
pub fn structure_means(
    form: FunctionForm,
    trials: usize,
    base_seed: u64,
    forest: &ForestConfig,
    opts: &ScoringOptions,
) -> Result<Vec<StructureMeans>> {
    Structure::ALL
        .iter()
        .map(|&s| {
            let per_trial: Vec<Vec<f64>> = (0..trials as u64)
                .into_par_iter()
                .map(|i| {
                    let spec = make_benchmark(s, form);
                    let prep = prepare(spec, 5000, base_seed + i, Scheme::EqualWidth, 10, forest)?;
                    let scorer = Scorer::new(prep.input()?, *opts)?;
                    scorer.max_nesuf_vector(GraphRef::Dag(prep.spec.dag()))
                })
                .collect::<Result<_>>()?;
            let p = per_trial.first().map_or(0, Vec::len);
            let stats: Vec<(f64, f64)> = (0..p)
                .map(|j| {
                    let col: Vec<f64> = per_trial.iter().map(|t| t[j]).collect();
                    mean_stderr(&col).unwrap_or((f64::NAN, f64::NAN))
                })
                .collect();
            Ok(StructureMeans {
                structure: s,
                form,
                variables: vec!["X".into(), "Z".into()],
                mean: stats.iter().map(|s| s.0).collect(),
                stderr: stats.iter().map(|s| s.1).collect(),
                n_trials: trials,
            })
        })
        .collect()
}

#[derive(Debug, Clone, PartialEq)]
pub enum TableOutput {
    Structures(Vec<StructureMeans>),
    Metrics(MetricsSummary),
}

/// Runs the canned experiment for each table with `trials` trials.
pub fn reproduce(tables: &[CannedTable], trials: usize, base_seed: u64) -> Result<Vec<(CannedTable, TableOutput)>> {
    tables
        .iter()
        .map(|&t| {
            let out = match t.eight_var() {
                None => TableOutput::Structures(structure_means(
                    t.form(),
                    trials,
                    base_seed,
                    &ForestConfig::default(),
                    &ScoringOptions::default(),
                )?),
                Some((form, noise)) => {
                    let cfg = ExperimentConfig {
                        benchmark: Benchmark::EightVar { form, noise },
                        trials,
                        base_seed,
                        ..Default::default()
                    };
                    TableOutput::Metrics(summarize(&evaluate(&cfg)?))
                }
            };
            Ok((t, out))
        })
        .collect()
}

fn csv_err(e: csv::Error) -> Error {
    Error::Io(e.to_string())
}

/// `structure, variable, mean_max_nesuf, stderr, n_trials`.
pub fn write_table_two_csv<W: Write>(rows: &[StructureMeans], w: W) -> Result<()> {
    let mut out = csv::Writer::from_writer(w);
    out.write_record(["structure", "variable", "mean_max_nesuf", "stderr", "n_trials"])
        .map_err(csv_err)?;
    for r in rows {
        for (j, v) in r.variables.iter().enumerate() {
            out.write_record([
                r.structure.to_string(),
                v.clone(),
                format!("{:.4}", r.mean[j]),
                format!("{:.4}", r.stderr[j]),
                r.n_trials.to_string(),
            ])
            .map_err(csv_err)?;
        }
    }
    out.flush()?;
    Ok(())
}

/// `method, mode, mae_mean, mae_stderr, spr_mean, n_trials`.
pub fn write_summary_csv<W: Write>(summary: &MetricsSummary, w: W) -> Result<()> {
    let mut out = csv::Writer::from_writer(w);
    out.write_record(["method", "mode", "mae_mean", "mae_stderr", "spr_mean", "n_trials"])
        .map_err(csv_err)?;
    for c in &summary.cells {
        out.write_record([
            c.cell.estimator.label().to_string(),
            c.cell.mode.map(|m| m.id().to_string()).unwrap_or_default(),
            format!("{:.4}", c.mae_mean),
            format!("{:.4}", c.mae_stderr),
            c.spr_mean.map(|s| format!("{s:.4}")).unwrap_or_default(),
            c.n_trials.to_string(),
        ])
        .map_err(csv_err)?;
    }
    out.flush()?;
    Ok(())
}
