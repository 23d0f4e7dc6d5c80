//! Synthetic credit-rating pipeline: a skewed five-feature firm model with a
//! discrete industry variable, scored end to end against its generating graph.

use crate::data::{discretize, make_binary_target, ColumnKind, Dataset, DiscretizedDataset, Scheme};
use crate::discovery::{discover_with_prior, DiscoveredGraph, DiscoveryConfig, Method, PriorMode};
use crate::error::{Error, Result};
use crate::eval::mae;
use crate::graph::{BackgroundKnowledge, Dag};
use crate::model::{fit_forest, Classifier, Forest, ForestConfig};
use crate::rng;
use crate::scoring::{GraphRef, ScoreReport, Scorer, ScoringInput, ScoringOptions};
use rand::Rng as _;
use serde::{Deserialize, Serialize};
use std::io::Write;

pub const INDUSTRY: usize = 0;
pub const CAPITAL: usize = 1;
pub const EMPLOYEES: usize = 2;
pub const SALES: usize = 3;
pub const LIABILITIES: usize = 4;
pub const RATING: usize = 5;

pub const COLUMNS: [&str; 6] = ["industry", "capital", "employees", "sales", "liabilities", "rating"];

/// Industry effect on every log-scale variable and on the rating.
const INDUSTRY_EFFECT: [f64; 5] = [-1.2, 0.9, -0.3, 1.4, 0.2];

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct DemoConfig {
    pub n: usize,
    pub seed: u64,
    pub bins: usize,
    pub forest: ForestConfig,
    pub discovery: DiscoveryConfig,
    pub scoring: ScoringOptions,
}

impl Default for DemoConfig {
    fn default() -> Self {
        Self {
            n: 5000,
            seed: 0,
            bins: 10,
            forest: ForestConfig::default(),
            discovery: DiscoveryConfig::default(),
            scoring: ScoringOptions::default(),
        }
    }
}

/// Generating graph of the demo model.
pub fn true_dag() -> Dag {
    let names = COLUMNS.iter().map(|s| s.to_string()).collect();
    let mut edges = vec![(CAPITAL, LIABILITIES), (CAPITAL, SALES), (LIABILITIES, SALES), (EMPLOYEES, SALES)];
    edges.extend([CAPITAL, EMPLOYEES, SALES, LIABILITIES, RATING].map(|v| (INDUSTRY, v)));
    edges.extend([(SALES, RATING), (LIABILITIES, RATING)]);
    Dag::new(names, &edges).expect("demo graph is acyclic")
}

/// Samples firms. Size variables are log-linear with uniform noise and
/// reported on the original (right-skewed) scale.
pub fn sample_firms(n: usize, seed: u64) -> Result<Dataset> {
    if n == 0 {
        return Err(Error::Config("sample count must be at least 1".into()));
    }
    let mut g = rng::seeded(seed);
    let mut u = move || g.random::<f64>() - 0.5;
    let mut cols: Vec<Vec<f64>> = vec![Vec::with_capacity(n); COLUMNS.len()];
    for _ in 0..n {
        let ind = ((u() + 0.5) * 5.0).floor().min(4.0);
        let e = INDUSTRY_EFFECT[ind as usize];
        let cap = 3.0 + 0.8 * e + 1.2 * u();
        let emp = 2.0 + 0.6 * e + 1.2 * u();
        let liab = 1.0 + 0.7 * cap + 0.4 * e + u();
        let sales = 0.5 + 0.4 * cap + 0.3 * liab + 0.4 * emp + 0.5 * e + u();
        let rating = 2.5 * e + 0.4 * sales - 0.3 * liab + 0.8 * u();
        for (c, v) in cols.iter_mut().zip([ind, cap.exp(), emp.exp(), sales.exp(), liab.exp(), rating]) {
            c.push(v);
        }
    }
    let mut kinds = vec![ColumnKind::Continuous; COLUMNS.len()];
    kinds[INDUSTRY] = ColumnKind::Discrete;
    Dataset::with_kinds(COLUMNS.iter().map(|s| s.to_string()).collect(), kinds, cols)
}

/// Per-variable reversal probabilities: the largest defined Nec and Suf over pairs.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Reversal {
    pub variable: String,
    pub nec: Option<f64>,
    pub suf: Option<f64>,
    pub max_nesuf: Option<f64>,
}

pub fn reversal_table(report: &ScoreReport) -> Vec<Reversal> {
    let fold = |v: Option<f64>, x: Option<f64>| match (v, x) {
        (Some(a), Some(b)) => Some(a.max(b)),
        (a, b) => a.or(b),
    };
    report
        .variables
        .iter()
        .map(|v| Reversal {
            variable: v.name.clone(),
            nec: v.pairs.iter().map(|p| p.scores.nec.map(|s| s.value)).fold(None, fold),
            suf: v.pairs.iter().map(|p| p.scores.suf.map(|s| s.value)).fold(None, fold),
            max_nesuf: v.max_nesuf,
        })
        .collect()
}

/// `variable, nec, suf, max_nesuf`.
pub fn write_reversal_csv<W: Write>(rows: &[Reversal], w: W) -> Result<()> {
    let mut out = csv::Writer::from_writer(w);
    let io = |e: csv::Error| Error::Io(e.to_string());
    out.write_record(["variable", "nec", "suf", "max_nesuf"]).map_err(io)?;
    let opt = |v: Option<f64>| v.map(|v| format!("{v:.6}")).unwrap_or_default();
    for r in rows {
        out.write_record([r.variable.clone(), opt(r.nec), opt(r.suf), opt(r.max_nesuf)])
            .map_err(io)?;
    }
    out.flush()?;
    Ok(())
}

pub struct DemoOutput {
    pub raw: Dataset,
    pub data: DiscretizedDataset,
    pub labels: Vec<u8>,
    pub forest: Forest,
    pub estimated: Dag,
    pub true_dag: Dag,
    pub report: ScoreReport,
    pub true_report: ScoreReport,
    /// Mean absolute maxNesuf difference between the two reports.
    pub mae: f64,
}

/// Sample, discretize by equal frequency, fit the forest, run DirectLiNGAM
/// with the industry exogenous and the rating a sink, and score against
/// both the estimated and the generating graph.
pub fn run_demo(cfg: &DemoConfig) -> Result<DemoOutput> {
    let raw = sample_firms(cfg.n, cfg.seed)?;
    let data = discretize(&raw, Scheme::EqualFrequency, cfg.bins)?;
    let truth = make_binary_target(raw.column(RATING))?;
    let keep: Vec<usize> = (0..COLUMNS.len()).filter(|&j| j != RATING).collect();
    let features = data.select(&keep);
    let forest_cfg = ForestConfig {
        seed: rng::child_seed(cfg.seed, 1),
        ..cfg.forest.clone()
    };
    let forest = fit_forest(&features, &truth, &forest_cfg)?;
    let labels = forest.predict(&features)?;

    let disc_cfg = DiscoveryConfig {
        extra_knowledge: BackgroundKnowledge::new().with_exogenous(INDUSTRY),
        ..cfg.discovery.clone()
    };
    let out = discover_with_prior(Method::Lingam, PriorMode::TargetSink, &data.to_numeric(), RATING, &disc_cfg)?;
    let DiscoveredGraph::Dag(estimated) = out.graph else {
        return Err(Error::InvalidGraph("DirectLiNGAM returned no DAG".into()));
    };

    let input = ScoringInput::new(&data, RATING, &labels, Some(&forest))?;
    let scorer = Scorer::new(input, cfg.scoring)?;
    let true_dag = true_dag();
    let report = scorer.explain(GraphRef::Dag(&estimated))?;
    let true_report = scorer.explain(GraphRef::Dag(&true_dag))?;
    let a = scorer.max_nesuf_vector(GraphRef::Dag(&estimated))?;
    let b = scorer.max_nesuf_vector(GraphRef::Dag(&true_dag))?;
    let mae = mae(&b, &a)?;
    Ok(DemoOutput {
        raw,
        data,
        labels,
        forest,
        estimated,
        true_dag,
        report,
        true_report,
        mae,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn quick(seed: u64) -> DemoOutput {
        run_demo(&DemoConfig {
            seed,
            n: 3000,
            forest: ForestConfig {
                n_trees: 30,
                ..Default::default()
            },
            ..Default::default()
        })
        .unwrap()
    }

    #[test]
    fn sampled_columns_are_skewed_and_industry_discrete() {
        let d = sample_firms(4000, 1).unwrap();
        assert_eq!(d.kinds()[INDUSTRY], ColumnKind::Discrete);
        let mut levels: Vec<f64> = d.column(INDUSTRY).to_vec();
        levels.sort_by(f64::total_cmp);
        levels.dedup();
        assert_eq!(levels, vec![0.0, 1.0, 2.0, 3.0, 4.0]);
        for j in [CAPITAL, SALES, LIABILITIES] {
            let c = d.column(j);
            let mean = c.iter().sum::<f64>() / c.len() as f64;
            let mut s = c.to_vec();
            s.sort_by(f64::total_cmp);
            assert!(mean > s[s.len() / 2], "{}", COLUMNS[j]);
        }
    }

    #[test]
    fn constraints_hold_across_seeds() {
        for seed in 0..3 {
            let o = quick(seed);
            assert!(o.estimated.parents(INDUSTRY).is_empty());
            assert_eq!(o.estimated.out_degree(RATING), 0);
        }
    }

    #[test]
    fn industry_dominates_under_the_true_graph() {
        let o = quick(4);
        let scores: Vec<f64> = o.true_report.max_nesuf().into_iter().map(Option::unwrap).collect();
        let top = scores.iter().copied().fold(f64::NEG_INFINITY, f64::max);
        assert_eq!(scores[INDUSTRY], top, "{scores:?}");
        assert!(o.mae < 0.1, "{}", o.mae);
    }

    #[test]
    fn reversal_csv_has_nec_and_suf() {
        let o = quick(5);
        let rows = reversal_table(&o.report);
        assert_eq!(rows.len(), 5);
        let mut buf = Vec::new();
        write_reversal_csv(&rows, &mut buf).unwrap();
        assert!(String::from_utf8(buf).unwrap().starts_with("variable,nec,suf,max_nesuf\n"));
    }
}
