//! Evaluation harness: metrics, extension selection, trial orchestration and
//! table-style summaries.

mod metrics;
mod tables;

pub use metrics::{mae, mae_bar, mean_stderr, ranks, spearman};
pub use tables::{
    reproduce, structure_means, write_summary_csv, write_table_two_csv, CannedTable, StructureMeans, TableOutput,
};

use crate::data::{discretize, make_binary_target, Dataset, DiscretizedDataset, Scheme};
use crate::discovery::{discover_with_prior, satisfies_mode, DiscoveredGraph, DiscoveryConfig, Method, PriorMode};
use crate::error::{Error, Result};
use crate::graph::Dag;
use crate::model::{fit_forest, Classifier, Forest, ForestConfig};
use crate::rng;
use crate::scm::{make_benchmark, make_eight_var, sample, sample_do, DoAssignment, FunctionForm, NoiseFamily, ScmSpec, Structure};
use crate::scoring::{GraphRef, Scorer, ScoringInput, ScoringOptions};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use std::collections::BTreeMap;
use std::fmt;

/// Data-generating regime of an experiment.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum Benchmark {
    /// Three-variable structure with uniform noise.
    Three { structure: Structure, form: FunctionForm },
    /// Shipped eight-variable graph; coefficients drawn per seed.
    EightVar { form: FunctionForm, noise: NoiseFamily },
}

impl Benchmark {
    pub fn spec(&self, seed: u64) -> ScmSpec {
        match *self {
            Self::Three { structure, form } => make_benchmark(structure, form),
            Self::EightVar { form, noise } => make_eight_var(form, noise, seed),
        }
    }
}

/// Which table discovery runs on.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "snake_case")]
pub enum DiscoveryInput {
    /// The sampled continuous values.
    #[default]
    Raw,
    /// The bin codes read as numbers.
    Codes,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ExperimentConfig {
    pub benchmark: Benchmark,
    pub n: usize,
    pub bins: usize,
    pub scheme: Scheme,
    pub forest: ForestConfig,
    pub discovery: DiscoveryConfig,
    pub discovery_input: DiscoveryInput,
    pub scoring: ScoringOptions,
    pub methods: Vec<Method>,
    pub modes: Vec<PriorMode>,
    pub trials: usize,
    pub base_seed: u64,
    /// Also score with the generating graph as an estimator cell.
    pub include_true_graph: bool,
}

impl Default for ExperimentConfig {
    fn default() -> Self {
        Self {
            benchmark: Benchmark::EightVar {
                form: FunctionForm::Linear,
                noise: NoiseFamily::Uniform,
            },
            n: 5000,
            bins: 10,
            scheme: Scheme::EqualWidth,
            forest: ForestConfig::default(),
            discovery: DiscoveryConfig::default(),
            discovery_input: DiscoveryInput::Raw,
            scoring: ScoringOptions::default(),
            methods: Method::ALL.to_vec(),
            modes: PriorMode::ALL.to_vec(),
            trials: 20,
            base_seed: 0,
            include_true_graph: false,
        }
    }
}

impl ExperimentConfig {
    pub fn validate(&self) -> Result<()> {
        if self.n < 10 {
            return Err(Error::Config("sample size must be at least 10".into()));
        }
        if self.bins < 2 {
            return Err(Error::Config("need at least two bins".into()));
        }
        if self.trials == 0 {
            return Err(Error::Config("trial count must be positive".into()));
        }
        self.forest.validate()?;
        self.discovery.validate()
    }

    pub fn from_json(s: &str) -> Result<Self> {
        let cfg: Self = serde_json::from_str(s)?;
        cfg.validate()?;
        Ok(cfg)
    }
}

/// Estimator half of a result cell.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Estimator {
    /// PC, best extension by rank correlation with the truth.
    PcMax,
    /// PC, worst extension.
    PcMin,
    Lingam,
    Resit,
    Notears,
    NoGraph,
    TrueGraph,
}

impl Estimator {
    pub fn label(self) -> &'static str {
        match self {
            Self::PcMax => "PC_Max",
            Self::PcMin => "PC_Min",
            Self::Lingam => "DirectLiNGAM",
            Self::Resit => "RESIT",
            Self::Notears => "NOTEARS",
            Self::NoGraph => "No graph",
            Self::TrueGraph => "True graph",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub struct CellId {
    pub estimator: Estimator,
    /// Prior mode; `None` for cells that run no discovery.
    pub mode: Option<PriorMode>,
}

impl CellId {
    pub fn new(estimator: Estimator, mode: PriorMode) -> Self {
        Self {
            estimator,
            mode: Some(mode),
        }
    }

    pub const NO_GRAPH: CellId = CellId {
        estimator: Estimator::NoGraph,
        mode: None,
    };

    pub const TRUE_GRAPH: CellId = CellId {
        estimator: Estimator::TrueGraph,
        mode: None,
    };
}

impl fmt::Display for CellId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self.mode {
            Some(m) => write!(f, "{} ({m})", self.estimator.label()),
            None => f.write_str(self.estimator.label()),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CellResult {
    pub cell: CellId,
    /// Estimated maxNesuf per explanatory variable; `None` when the cell failed.
    pub estimated: Option<Vec<f64>>,
    pub mae: Option<f64>,
    /// `None` when the rank correlation is undefined or the cell failed.
    pub spr: Option<f64>,
    /// Every candidate graph met the prior mode's structural postcondition.
    pub mode_satisfied: bool,
    pub graphs_checked: usize,
    pub error: Option<String>,
    pub notes: Vec<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrialResult {
    pub seed: u64,
    pub variables: Vec<String>,
    pub true_scores: Vec<f64>,
    pub cells: Vec<CellResult>,
}

impl TrialResult {
    pub fn cell(&self, id: CellId) -> Option<&CellResult> {
        self.cells.iter().find(|c| c.cell == id)
    }
}

/// One trial's prepared inputs: sampled data, its discretization, the fitted
/// classifier and its predictions.
pub struct Prepared {
    pub spec: ScmSpec,
    pub raw: Dataset,
    pub data: DiscretizedDataset,
    pub target: usize,
    pub forest: Forest,
    pub labels: Vec<u8>,
}

impl Prepared {
    pub fn input(&self) -> Result<ScoringInput<'_>> {
        ScoringInput::new(&self.data, self.target, &self.labels, Some(&self.forest))
    }

    pub fn explanatory(&self) -> Vec<usize> {
        (0..self.data.n_cols()).filter(|&j| j != self.target).collect()
    }
}

/// Samples `spec`, discretizes every column, binarizes the target, fits the
/// forest on the explanatory codes and predicts the training rows.
pub fn prepare(
    spec: ScmSpec,
    n: usize,
    seed: u64,
    scheme: Scheme,
    bins: usize,
    forest: &ForestConfig,
) -> Result<Prepared> {
    let target = spec
        .target()
        .ok_or_else(|| Error::Config("benchmark spec has no target".into()))?;
    let raw = sample(&spec, n, seed)?;
    let data = discretize(&raw, scheme, bins)?;
    let truth = make_binary_target(raw.column(target))?;
    let keep: Vec<usize> = (0..data.n_cols()).filter(|&j| j != target).collect();
    let features = data.select(&keep);
    let cfg = ForestConfig {
        seed: rng::child_seed(seed, 1),
        ..forest.clone()
    };
    let forest = fit_forest(&features, &truth, &cfg)?;
    let labels = forest.predict(&features)?;
    Ok(Prepared {
        spec,
        raw,
        data,
        target,
        forest,
        labels,
    })
}

/// Monte-Carlo `P(o | do(X = code))`: samples the intervened model with X at
/// the bin's representative value, bins the draw with the observed binning
/// and averages the classifier's positive predictions.
pub fn interventional_oracle(prep: &Prepared, x_var: usize, code: u32, n: usize, seed: u64) -> Result<f64> {
    let value = prep.data.representative(x_var, code);
    let draw = sample_do(&prep.spec, &DoAssignment::from([(x_var, value)]), n, seed)?;
    let coded = prep.data.recode(&draw)?;
    let pred = prep.forest.predict(&coded.select(&prep.explanatory()))?;
    Ok(pred.iter().filter(|&&l| l == 1).count() as f64 / n as f64)
}

/// Best and worst extension by rank correlation with the true scores.
#[derive(Debug, Clone, PartialEq)]
pub struct ExtensionSelection {
    pub max_index: usize,
    pub min_index: usize,
    pub max_scores: Vec<f64>,
    pub min_scores: Vec<f64>,
    pub max_spr: Option<f64>,
    pub min_spr: Option<f64>,
}

/// Scores every extension and keeps the ones with maximal and minimal SPR
/// against `true_scores`. Extensions with undefined SPR are only chosen when
/// no extension has a defined one.
pub fn select_extension_minmax(
    extensions: &[Dag],
    scorer: &Scorer<'_>,
    true_scores: &[f64],
) -> Result<ExtensionSelection> {
    if extensions.is_empty() {
        return Err(Error::NoExtension);
    }
    let scored: Vec<(Vec<f64>, Option<f64>)> = extensions
        .iter()
        .map(|d| {
            let s = scorer.max_nesuf_vector(GraphRef::Dag(d))?;
            let spr = match spearman(true_scores, &s) {
                Ok(v) => Some(v),
                Err(Error::ConstantVector) => None,
                Err(e) => return Err(e),
            };
            Ok((s, spr))
        })
        .collect::<Result<_>>()?;
    let (mut max_i, mut min_i) = (0, 0);
    for (i, (_, spr)) in scored.iter().enumerate() {
        let better = |cur: Option<f64>, gt: bool| match (spr, cur) {
            (Some(v), Some(c)) => (gt && *v > c) || (!gt && *v < c),
            (Some(_), None) => true,
            _ => false,
        };
        if better(scored[max_i].1, true) {
            max_i = i;
        }
        if better(scored[min_i].1, false) {
            min_i = i;
        }
    }
    Ok(ExtensionSelection {
        max_index: max_i,
        min_index: min_i,
        max_scores: scored[max_i].0.clone(),
        min_scores: scored[min_i].0.clone(),
        max_spr: scored[max_i].1,
        min_spr: scored[min_i].1,
    })
}

fn method_estimator(m: Method) -> Estimator {
    match m {
        Method::Pc => Estimator::PcMax,
        Method::Lingam => Estimator::Lingam,
        Method::Resit => Estimator::Resit,
        Method::Notears => Estimator::Notears,
    }
}

fn finish(cell: CellId, truth: &[f64], est: Vec<f64>, mode_ok: bool, graphs: usize, notes: Vec<String>) -> CellResult {
    let mae = mae(truth, &est).ok();
    let spr = spearman(truth, &est).ok();
    CellResult {
        cell,
        estimated: Some(est),
        mae,
        spr,
        mode_satisfied: mode_ok,
        graphs_checked: graphs,
        error: None,
        notes,
    }
}

fn failed(cell: CellId, e: &Error) -> CellResult {
    CellResult {
        cell,
        estimated: None,
        mae: None,
        spr: None,
        mode_satisfied: true,
        graphs_checked: 0,
        error: Some(e.to_string()),
        notes: Vec::new(),
    }
}

/// One trial: prepare the data, score with the true graph, then run every
/// supported method and prior mode. Cell failures are recorded, not raised.
pub fn run_trial(cfg: &ExperimentConfig, seed: u64) -> Result<TrialResult> {
    cfg.validate()?;
    let prep = prepare(cfg.benchmark.spec(seed), cfg.n, seed, cfg.scheme, cfg.bins, &cfg.forest)?;
    let target = prep.target;
    let scorer = Scorer::new(prep.input()?, cfg.scoring)?;
    let true_dag = prep.spec.dag();
    let truth = scorer.max_nesuf_vector(GraphRef::Dag(true_dag))?;
    let disc_data = match cfg.discovery_input {
        DiscoveryInput::Raw => prep.raw.clone(),
        DiscoveryInput::Codes => prep.data.to_numeric(),
    };

    let mut cells = Vec::new();
    if cfg.include_true_graph {
        cells.push(finish(CellId::TRUE_GRAPH, &truth, truth.clone(), true, 1, Vec::new()));
    }
    if cfg.modes.contains(&PriorMode::NoGraph) {
        let c = match scorer.max_nesuf_vector(GraphRef::NoGraph) {
            Ok(est) => finish(CellId::NO_GRAPH, &truth, est, true, 0, Vec::new()),
            Err(e) => failed(CellId::NO_GRAPH, &e),
        };
        cells.push(c);
    }
    for &method in &cfg.methods {
        for &mode in &cfg.modes {
            if mode == PriorMode::NoGraph || !method.supports(mode) {
                continue;
            }
            let id = CellId::new(method_estimator(method), mode);
            let out = match discover_with_prior(method, mode, &disc_data, target, &cfg.discovery) {
                Ok(o) => o,
                Err(e) => {
                    cells.push(failed(id, &e));
                    if method == Method::Pc {
                        cells.push(failed(CellId::new(Estimator::PcMin, mode), &e));
                    }
                    continue;
                }
            };
            let dags = out.dags();
            let mode_ok = dags.iter().all(|d| satisfies_mode(d, mode, target));
            let notes = out.diagnostics.notes.clone();
            match &out.graph {
                DiscoveredGraph::Pattern { extensions, .. } => {
                    match select_extension_minmax(extensions, &scorer, &truth) {
                        Ok(sel) => {
                            let n = extensions.len();
                            cells.push(finish(id, &truth, sel.max_scores, mode_ok, n, notes.clone()));
                            cells.push(finish(CellId::new(Estimator::PcMin, mode), &truth, sel.min_scores, mode_ok, n, notes));
                        }
                        Err(e) => {
                            cells.push(failed(id, &e));
                            cells.push(failed(CellId::new(Estimator::PcMin, mode), &e));
                        }
                    }
                }
                DiscoveredGraph::Dag(d) => {
                    let c = match scorer.max_nesuf_vector(GraphRef::Dag(d)) {
                        Ok(est) => finish(id, &truth, est, mode_ok, 1, notes),
                        Err(e) => failed(id, &e),
                    };
                    cells.push(c);
                }
                DiscoveredGraph::NoGraph => {}
            }
        }
    }
    Ok(TrialResult {
        seed,
        variables: prep.explanatory().iter().map(|&j| prep.data.labels()[j].clone()).collect(),
        true_scores: truth,
        cells,
    })
}

/// All trials of `cfg`, seed `base_seed + i`, in parallel on the current pool.
pub fn evaluate(cfg: &ExperimentConfig) -> Result<Vec<TrialResult>> {
    cfg.validate()?;
    (0..cfg.trials as u64)
        .into_par_iter()
        .map(|i| run_trial(cfg, cfg.base_seed + i))
        .collect()
}

/// Aggregates of one cell over trials.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CellSummary {
    pub cell: CellId,
    pub mae_mean: f64,
    pub mae_stderr: f64,
    /// `None` when no trial had a defined rank correlation.
    pub spr_mean: Option<f64>,
    /// Trials contributing to the MAE.
    pub n_trials: usize,
    /// Trials contributing to the SPR mean.
    pub n_spr: usize,
    pub failures: usize,
    pub mode_violations: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MetricsSummary {
    pub cells: Vec<CellSummary>,
}

impl MetricsSummary {
    pub fn get(&self, id: CellId) -> Option<&CellSummary> {
        self.cells.iter().find(|c| c.cell == id)
    }
}

/// Per cell: MAE mean and standard error over the trials where the cell
/// succeeded; SPR mean over trials with a defined SPR.
pub fn summarize(trials: &[TrialResult]) -> MetricsSummary {
    let mut by: BTreeMap<CellId, Vec<&CellResult>> = BTreeMap::new();
    for t in trials {
        for c in &t.cells {
            by.entry(c.cell).or_default().push(c);
        }
    }
    let cells = by
        .into_iter()
        .map(|(cell, rs)| {
            let maes: Vec<f64> = rs.iter().filter_map(|r| r.mae).collect();
            let sprs: Vec<f64> = rs.iter().filter_map(|r| r.spr).collect();
            let (mae_mean, mae_stderr) = mean_stderr(&maes).unwrap_or((f64::NAN, f64::NAN));
            CellSummary {
                cell,
                mae_mean,
                mae_stderr,
                spr_mean: mean_stderr(&sprs).map(|m| m.0),
                n_trials: maes.len(),
                n_spr: sprs.len(),
                failures: rs.iter().filter(|r| r.error.is_some()).count(),
                mode_violations: rs.iter().filter(|r| !r.mode_satisfied).count(),
            }
        })
        .collect();
    MetricsSummary { cells }
}
