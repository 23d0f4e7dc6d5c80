//! Necessity and sufficiency scores of a binary classifier's predictions,
//! with interventional probabilities identified from a causal graph.

mod report;

pub use report::{explain, explain_output, PairScore, ScoreReport, Scorer, VariableReport};

use crate::data::DiscretizedDataset;
use crate::error::{Error, Result};
use crate::graph::Dag;
use crate::model::Classifier;
use serde::{Deserialize, Serialize};
use std::collections::{BTreeMap, HashMap};

/// Positive prediction `o`.
pub const POSITIVE: u8 = 1;
/// Negative prediction `o'`.
pub const NEGATIVE: u8 = 0;

/// Everything scoring reads: the coded table (explanatory columns plus the
/// target column), the predicted labels and, optionally, the model that
/// produced them.
#[derive(Clone, Copy)]
pub struct ScoringInput<'a> {
    pub data: &'a DiscretizedDataset,
    pub target: usize,
    pub labels: &'a [u8],
    /// Features are the data columns without the target, in order.
    pub classifier: Option<&'a dyn Classifier>,
}

impl<'a> ScoringInput<'a> {
    pub fn new(
        data: &'a DiscretizedDataset,
        target: usize,
        labels: &'a [u8],
        classifier: Option<&'a dyn Classifier>,
    ) -> Result<Self> {
        if target >= data.n_cols() {
            return Err(Error::Config(format!("target index {target} out of range")));
        }
        if labels.len() != data.n_rows() {
            return Err(Error::ShapeMismatch(format!(
                "{} labels for {} rows",
                labels.len(),
                data.n_rows()
            )));
        }
        if let Some(bad) = labels.iter().find(|&&l| l > 1) {
            return Err(Error::Config(format!("labels must be 0 or 1, found {bad}")));
        }
        if let Some(c) = classifier {
            let expect: Vec<&String> = feature_columns(data.n_cols(), target)
                .map(|j| &data.labels()[j])
                .collect();
            let got: Vec<&String> = c.feature_names().iter().collect();
            if expect != got {
                return Err(Error::SchemaMismatch(format!(
                    "classifier features {got:?} do not match data columns {expect:?}"
                )));
            }
        }
        Ok(Self {
            data,
            target,
            labels,
            classifier,
        })
    }

    /// Explanatory column indices.
    pub fn explanatory(&self) -> Vec<usize> {
        feature_columns(self.data.n_cols(), self.target).collect()
    }
}

fn feature_columns(n: usize, target: usize) -> impl Iterator<Item = usize> {
    (0..n).filter(move |&j| j != target)
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum GraphRef<'a> {
    Dag(&'a Dag),
    /// Interventional probabilities equal the conditionals.
    NoGraph,
}

/// How `P(O | do(X = x))` is identified from a graph.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize, Default)]
#[serde(rename_all = "snake_case")]
pub enum Identification {
    /// `P(O)` when X is not an ancestor of the target, else backdoor
    /// adjustment over the parents of X.
    #[default]
    Full,
    /// Backdoor adjustment over the parents of X in every case.
    Backdoor,
}

/// Treatment of adjustment strata `z` with no row at `X = x`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize, Default)]
#[serde(rename_all = "snake_case")]
pub enum EmptyStrata {
    /// Query the classifier on the stratum's rows with X set to `x`; falls
    /// back to renormalizing when no classifier is attached.
    #[default]
    Impute,
    /// Drop the stratum and renormalize the remaining weights.
    Renormalize,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Default, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ScoringOptions {
    pub identification: Identification,
    pub empty_strata: EmptyStrata,
}

/// `P(labels = event | conditions)` by counting.
pub fn cond_prob(data: &DiscretizedDataset, labels: &[u8], event: u8, conditions: &[(usize, u32)]) -> Result<f64> {
    let mut hit = 0usize;
    let mut total = 0usize;
    for (i, &l) in labels.iter().enumerate() {
        if conditions.iter().all(|&(j, c)| data.codes(j)[i] == c) {
            total += 1;
            hit += usize::from(l == event);
        }
    }
    if total == 0 {
        return Err(Error::EmptyCell(conditions.to_vec()));
    }
    Ok(hit as f64 / total as f64)
}

/// `P(o | do(X = x))` for every observed code `x` of one variable.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DoTable {
    pub variable: usize,
    /// Observed codes of X with `P(o | do(X = code))`.
    pub positive: BTreeMap<u32, f64>,
    /// Columns adjusted over; empty for a direct conditional.
    pub adjustment: Vec<usize>,
    /// How the table was identified.
    pub rule: DoRule,
    /// Share of adjustment weight, over all `x`, taken from observed `(x, z)` cells.
    pub coverage: f64,
    pub imputed_cells: usize,
    pub dropped_cells: usize,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum DoRule {
    Conditional,
    NotAncestor,
    Backdoor,
}

impl DoTable {
    pub fn prob(&self, x: u32, event: u8) -> Result<f64> {
        let p = *self
            .positive
            .get(&x)
            .ok_or_else(|| Error::EmptyCell(vec![(self.variable, x)]))?;
        Ok(if event == POSITIVE { p } else { 1.0 - p })
    }
}

/// Interventional distribution of the prediction for every code of `x_var`.
pub fn do_table(input: &ScoringInput<'_>, graph: GraphRef<'_>, x_var: usize, opts: &ScoringOptions) -> Result<DoTable> {
    match graph {
        GraphRef::NoGraph => conditional_table(input, x_var),
        GraphRef::Dag(g) => {
            if g.n_nodes() != input.data.n_cols() {
                return Err(Error::SchemaMismatch(format!(
                    "graph has {} nodes, data has {} columns",
                    g.n_nodes(),
                    input.data.n_cols()
                )));
            }
            let ancestor = g.is_ancestor(x_var, input.target);
            let parents: Vec<usize> = g.parents(x_var).iter().copied().collect();
            do_table_with(input, x_var, &parents, ancestor, opts)
        }
    }
}

/// As [`do_table`] with the graph reduced to what it contributes: the
/// parents of X and whether X is an ancestor of the target.
pub fn do_table_with(
    input: &ScoringInput<'_>,
    x_var: usize,
    parents: &[usize],
    ancestor: bool,
    opts: &ScoringOptions,
) -> Result<DoTable> {
    if opts.identification == Identification::Full && !ancestor {
        let p = cond_prob(input.data, input.labels, POSITIVE, &[])?;
        return Ok(DoTable {
            variable: x_var,
            positive: input.data.observed_codes(x_var).into_iter().map(|c| (c, p)).collect(),
            adjustment: Vec::new(),
            rule: DoRule::NotAncestor,
            coverage: 1.0,
            imputed_cells: 0,
            dropped_cells: 0,
        });
    }
    if parents.is_empty() {
        return conditional_table(input, x_var);
    }
    backdoor_table(input, x_var, parents, opts)
}

fn conditional_table(input: &ScoringInput<'_>, x_var: usize) -> Result<DoTable> {
    let codes = input.data.codes(x_var);
    let mut counts: BTreeMap<u32, (usize, usize)> = BTreeMap::new();
    for (&c, &l) in codes.iter().zip(input.labels) {
        let e = counts.entry(c).or_default();
        e.0 += 1;
        e.1 += usize::from(l == POSITIVE);
    }
    Ok(DoTable {
        variable: x_var,
        positive: counts.into_iter().map(|(c, (n, k))| (c, k as f64 / n as f64)).collect(),
        adjustment: Vec::new(),
        rule: DoRule::Conditional,
        coverage: 1.0,
        imputed_cells: 0,
        dropped_cells: 0,
    })
}

#[derive(Default)]
struct Stratum {
    rows: Vec<usize>,
    /// Per code of X: (rows, positive rows).
    by_x: BTreeMap<u32, (usize, usize)>,
}

fn backdoor_table(input: &ScoringInput<'_>, x_var: usize, parents: &[usize], opts: &ScoringOptions) -> Result<DoTable> {
    let data = input.data;
    let n = data.n_rows();
    let xc = data.codes(x_var);
    let mut strata: HashMap<Vec<u32>, Stratum> = HashMap::new();
    for i in 0..n {
        let key: Vec<u32> = parents.iter().map(|&j| data.codes(j)[i]).collect();
        let s = strata.entry(key).or_default();
        s.rows.push(i);
        let e = s.by_x.entry(xc[i]).or_default();
        e.0 += 1;
        e.1 += usize::from(input.labels[i] == POSITIVE);
    }
    // Deterministic iteration order for bit-reproducible sums.
    let mut keys: Vec<&Vec<u32>> = strata.keys().collect();
    keys.sort();
    let impute = opts.empty_strata == EmptyStrata::Impute && input.classifier.is_some();
    let features: Vec<usize> = input.explanatory();
    let x_pos = features.iter().position(|&j| j == x_var);

    let mut positive = BTreeMap::new();
    let (mut imputed_cells, mut dropped_cells) = (0, 0);
    let mut covered_weight = 0.0;
    let observed = data.observed_codes(x_var);
    for &x in &observed {
        let (mut acc, mut weight) = (0.0, 0.0);
        for key in &keys {
            let s = &strata[*key];
            let w = s.rows.len() as f64 / n as f64;
            match s.by_x.get(&x) {
                Some(&(m, k)) => {
                    acc += w * k as f64 / m as f64;
                    weight += w;
                    covered_weight += w;
                }
                None if impute => {
                    let clf = input.classifier.expect("checked above");
                    let pos = x_pos.ok_or_else(|| Error::Config("the target cannot be scored".into()))?;
                    let mut row = vec![0u32; features.len()];
                    let mut k = 0usize;
                    for &i in &s.rows {
                        for (slot, &j) in row.iter_mut().zip(&features) {
                            *slot = data.codes(j)[i];
                        }
                        row[pos] = x;
                        k += usize::from(clf.predict_row(&row) == POSITIVE);
                    }
                    acc += w * k as f64 / s.rows.len() as f64;
                    weight += w;
                    imputed_cells += 1;
                }
                None => dropped_cells += 1,
            }
        }
        if weight <= 0.0 {
            return Err(Error::EmptyCell(vec![(x_var, x)]));
        }
        positive.insert(x, acc / weight);
    }
    Ok(DoTable {
        variable: x_var,
        positive,
        adjustment: parents.to_vec(),
        rule: DoRule::Backdoor,
        coverage: covered_weight / observed.len() as f64,
        imputed_cells,
        dropped_cells,
    })
}

/// `P(labels = event | do(X = x))`.
pub fn do_prob(
    input: &ScoringInput<'_>,
    graph: GraphRef<'_>,
    x_var: usize,
    x: u32,
    event: u8,
    opts: &ScoringOptions,
) -> Result<f64> {
    do_table(input, graph, x_var, opts)?.prob(x, event)
}

/// A value pair `x > x'` of one variable, as codes.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct ScoreQuery {
    pub variable: usize,
    pub x: u32,
    pub x_prime: u32,
}

impl ScoreQuery {
    pub fn new(variable: usize, x: u32, x_prime: u32) -> Result<Self> {
        if x <= x_prime {
            return Err(Error::Config(format!("score query needs x > x', got {x} <= {x_prime}")));
        }
        Ok(Self { variable, x, x_prime })
    }
}

/// A score clamped to `[0, 1]` with its raw value.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Score {
    pub value: f64,
    pub raw: f64,
    pub clamped: bool,
}

impl Score {
    pub fn new(raw: f64) -> Self {
        let value = raw.clamp(0.0, 1.0);
        Self {
            value,
            raw,
            clamped: value != raw,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ScoreTriple {
    /// `None` when `P(o | x) = 0`.
    pub nec: Option<Score>,
    /// `None` when `P(o' | x') = 0`.
    pub suf: Option<Score>,
    pub nesuf: Score,
}

impl ScoreTriple {
    pub fn any_clamped(&self) -> bool {
        self.nesuf.clamped || self.nec.is_some_and(|s| s.clamped) || self.suf.is_some_and(|s| s.clamped)
    }
}

/// Necessity, sufficiency and their conjunction from the interventional
/// table and the observed conditionals of one variable.
pub fn triple_from_tables(query: &ScoreQuery, dt: &DoTable, cond: &DoTable) -> Result<ScoreTriple> {
    let (x, xp) = (query.x, query.x_prime);
    let do_neg_xp = dt.prob(xp, NEGATIVE)?;
    let do_pos_x = dt.prob(x, POSITIVE)?;
    let do_neg_x = dt.prob(x, NEGATIVE)?;
    let pos_x = cond.prob(x, POSITIVE)?;
    let neg_x = cond.prob(x, NEGATIVE)?;
    let pos_xp = cond.prob(xp, POSITIVE)?;
    let neg_xp = cond.prob(xp, NEGATIVE)?;
    let nec = (pos_x > 0.0).then(|| Score::new((do_neg_xp - neg_x) / pos_x));
    let suf = (neg_xp > 0.0).then(|| Score::new((do_pos_x - pos_xp) / neg_xp));
    let nesuf = Score::new(do_neg_xp - do_neg_x);
    Ok(ScoreTriple { nec, suf, nesuf })
}

pub fn scores_for_pair(
    input: &ScoringInput<'_>,
    graph: GraphRef<'_>,
    query: &ScoreQuery,
    opts: &ScoringOptions,
) -> Result<ScoreTriple> {
    let dt = do_table(input, graph, query.variable, opts)?;
    let cond = conditional_table(input, query.variable)?;
    let t = triple_from_tables(query, &dt, &cond)?;
    if t.nec.is_none() || t.suf.is_none() {
        log::debug!("undefined necessity or sufficiency for {query:?}");
    }
    Ok(t)
}

/// Largest clamped Nesuf over all observed pairs `x > x'`.
pub fn max_nesuf(input: &ScoringInput<'_>, graph: GraphRef<'_>, x_var: usize, opts: &ScoringOptions) -> Result<f64> {
    let dt = do_table(input, graph, x_var, opts)?;
    let codes: Vec<u32> = dt.positive.keys().copied().collect();
    let mut best: Option<f64> = None;
    for (a, &xp) in codes.iter().enumerate() {
        for &x in &codes[a + 1..] {
            let v = Score::new(dt.prob(xp, NEGATIVE)? - dt.prob(x, NEGATIVE)?).value;
            best = Some(best.map_or(v, |b: f64| b.max(v)));
        }
    }
    best.ok_or(Error::NoValidPair(x_var))
}
