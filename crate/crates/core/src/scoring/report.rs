use super::{
    conditional_table, do_table_with, triple_from_tables, DoRule, DoTable, GraphRef, Identification, ScoreQuery,
    ScoreTriple, ScoringInput, ScoringOptions,
};
use crate::discovery::{DiscoveredGraph, DiscoveryOutput};
use crate::error::{Error, Result};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use std::collections::HashMap;
use std::io::Write;
use std::sync::{Arc, Mutex};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PairScore {
    pub x: u32,
    pub x_prime: u32,
    #[serde(flatten)]
    pub scores: ScoreTriple,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct VariableReport {
    pub variable: usize,
    pub name: String,
    pub pairs: Vec<PairScore>,
    /// `None` when the variable has fewer than two observed codes.
    pub max_nesuf: Option<f64>,
    pub rule: DoRule,
    pub adjustment: Vec<String>,
    pub coverage: f64,
    pub imputed_cells: usize,
    pub dropped_cells: usize,
    pub diagnostics: Vec<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScoreReport {
    /// Edges by name; `None` for the no-graph estimator.
    pub graph: Option<Vec<(String, String)>>,
    pub target: String,
    pub options: ScoringOptions,
    pub variables: Vec<VariableReport>,
    pub warnings: Vec<String>,
}

impl ScoreReport {
    pub fn max_nesuf(&self) -> Vec<Option<f64>> {
        self.variables.iter().map(|v| v.max_nesuf).collect()
    }

    pub fn variable(&self, name: &str) -> Option<&VariableReport> {
        self.variables.iter().find(|v| v.name == name)
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("report serializes")
    }

    /// One row per pair: variable, x, x', nec, suf, nesuf, clamped, maxNesuf.
    pub fn write_csv<W: Write>(&self, w: W) -> Result<()> {
        let mut out = csv::Writer::from_writer(w);
        let io = |e: csv::Error| Error::Io(e.to_string());
        out.write_record(["variable", "x", "x_prime", "nec", "suf", "nesuf", "clamped", "max_nesuf"])
            .map_err(io)?;
        let opt = |v: Option<f64>| v.map(|v| v.to_string()).unwrap_or_default();
        for v in &self.variables {
            for p in &v.pairs {
                let s = &p.scores;
                out.write_record([
                    v.name.clone(),
                    p.x.to_string(),
                    p.x_prime.to_string(),
                    opt(s.nec.map(|s| s.value)),
                    opt(s.suf.map(|s| s.value)),
                    s.nesuf.value.to_string(),
                    s.any_clamped().to_string(),
                    opt(v.max_nesuf),
                ])
                .map_err(io)?;
            }
        }
        out.flush()?;
        Ok(())
    }
}

type CacheKey = (usize, Vec<usize>, bool);

/// Scores variables against many graphs over one input, reusing work for
/// variables whose parent set and ancestor status repeat across graphs.
pub struct Scorer<'a> {
    input: ScoringInput<'a>,
    opts: ScoringOptions,
    conditionals: Vec<Option<DoTable>>,
    cache: Mutex<HashMap<CacheKey, Arc<VariableReport>>>,
}

impl<'a> Scorer<'a> {
    pub fn new(input: ScoringInput<'a>, opts: ScoringOptions) -> Result<Self> {
        let conditionals = (0..input.data.n_cols())
            .map(|j| (j != input.target).then(|| conditional_table(&input, j)).transpose())
            .collect::<Result<_>>()?;
        Ok(Self {
            input,
            opts,
            conditionals,
            cache: Mutex::new(HashMap::new()),
        })
    }

    pub fn input(&self) -> &ScoringInput<'a> {
        &self.input
    }

    pub fn options(&self) -> &ScoringOptions {
        &self.opts
    }

    fn key(&self, graph: GraphRef<'_>, x_var: usize) -> Result<Option<CacheKey>> {
        let GraphRef::Dag(g) = graph else {
            return Ok(None);
        };
        if g.n_nodes() != self.input.data.n_cols() {
            return Err(Error::SchemaMismatch(format!(
                "graph has {} nodes, data has {} columns",
                g.n_nodes(),
                self.input.data.n_cols()
            )));
        }
        let ancestor = g.is_ancestor(x_var, self.input.target);
        Ok(Some(match (self.opts.identification, ancestor) {
            (Identification::Full, false) => (x_var, Vec::new(), false),
            _ => (x_var, g.parents(x_var).iter().copied().collect(), true),
        }))
    }

    /// Report for one explanatory variable.
    pub fn variable(&self, graph: GraphRef<'_>, x_var: usize) -> Result<Arc<VariableReport>> {
        if x_var == self.input.target || x_var >= self.input.data.n_cols() {
            return Err(Error::Config(format!("column {x_var} is not an explanatory variable")));
        }
        let key = self.key(graph, x_var)?;
        if let Some(k) = &key {
            if let Some(hit) = self.cache.lock().expect("cache lock").get(k) {
                return Ok(hit.clone());
            }
        }
        let cond = self.conditionals[x_var].as_ref().expect("explanatory column");
        let dt = match &key {
            None => cond.clone(),
            Some((_, parents, ancestor)) => do_table_with(&self.input, x_var, parents, *ancestor, &self.opts)?,
        };
        let report = Arc::new(self.build(x_var, &dt, cond)?);
        if let Some(k) = key {
            self.cache.lock().expect("cache lock").insert(k, report.clone());
        }
        Ok(report)
    }

    fn build(&self, x_var: usize, dt: &DoTable, cond: &DoTable) -> Result<VariableReport> {
        let names = self.input.data.labels();
        let codes: Vec<u32> = dt.positive.keys().copied().collect();
        let mut pairs = Vec::new();
        let mut diagnostics = Vec::new();
        for (a, &xp) in codes.iter().enumerate() {
            for &x in &codes[a + 1..] {
                let q = ScoreQuery::new(x_var, x, xp)?;
                let scores = triple_from_tables(&q, dt, cond)?;
                if scores.nec.is_none() {
                    diagnostics.push(format!("nec undefined for ({x}, {xp}): P(o | x) = 0"));
                }
                if scores.suf.is_none() {
                    diagnostics.push(format!("suf undefined for ({x}, {xp}): P(o' | x') = 0"));
                }
                pairs.push(PairScore { x, x_prime: xp, scores });
            }
        }
        if dt.adjustment.contains(&self.input.target) {
            diagnostics.push(format!(
                "target `{}` is a parent of `{}`: reverse causation in the graph",
                names[self.input.target], names[x_var]
            ));
        }
        if dt.dropped_cells > 0 {
            diagnostics.push(format!(
                "{} empty strata dropped, coverage {:.3}",
                dt.dropped_cells, dt.coverage
            ));
        }
        let max_nesuf = pairs.iter().map(|p| p.scores.nesuf.value).reduce(f64::max);
        Ok(VariableReport {
            variable: x_var,
            name: names[x_var].clone(),
            pairs,
            max_nesuf,
            rule: dt.rule,
            adjustment: dt.adjustment.iter().map(|&j| names[j].clone()).collect(),
            coverage: dt.coverage,
            imputed_cells: dt.imputed_cells,
            dropped_cells: dt.dropped_cells,
            diagnostics,
        })
    }

    /// Full report over every explanatory variable.
    pub fn explain(&self, graph: GraphRef<'_>) -> Result<ScoreReport> {
        let vars = self.input.explanatory();
        let variables: Vec<VariableReport> = vars
            .par_iter()
            .map(|&j| self.variable(graph, j).map(|r| (*r).clone()))
            .collect::<Result<_>>()?;
        let names = self.input.data.labels();
        let mut warnings: Vec<String> = variables
            .iter()
            .flat_map(|v| v.diagnostics.iter().map(move |d| format!("{}: {d}", v.name)))
            .collect();
        if let GraphRef::Dag(g) = graph {
            if g.out_degree(self.input.target) > 0 {
                warnings.push(format!("target `{}` has children in the graph", names[self.input.target]));
            }
        }
        Ok(ScoreReport {
            graph: match graph {
                GraphRef::Dag(g) => Some(
                    g.edges()
                        .into_iter()
                        .map(|(a, b)| (names[a].clone(), names[b].clone()))
                        .collect(),
                ),
                GraphRef::NoGraph => None,
            },
            target: names[self.input.target].clone(),
            options: self.opts,
            variables,
            warnings,
        })
    }

    /// `maxNesuf` per explanatory variable, in column order.
    pub fn max_nesuf_vector(&self, graph: GraphRef<'_>) -> Result<Vec<f64>> {
        self.input
            .explanatory()
            .into_iter()
            .map(|j| self.variable(graph, j)?.max_nesuf.ok_or(Error::NoValidPair(j)))
            .collect()
    }
}

/// Report for a single graph (or none).
pub fn explain(input: &ScoringInput<'_>, graph: GraphRef<'_>, opts: &ScoringOptions) -> Result<ScoreReport> {
    Scorer::new(*input, *opts)?.explain(graph)
}

/// One report per DAG in a discovery result: a single report for a DAG or
/// for no graph, one per consistent extension for a pattern.
pub fn explain_output(
    input: &ScoringInput<'_>,
    output: &DiscoveryOutput,
    opts: &ScoringOptions,
) -> Result<Vec<ScoreReport>> {
    let scorer = Scorer::new(*input, *opts)?;
    match &output.graph {
        DiscoveredGraph::NoGraph => Ok(vec![scorer.explain(GraphRef::NoGraph)?]),
        DiscoveredGraph::Dag(d) => Ok(vec![scorer.explain(GraphRef::Dag(d))?]),
        DiscoveredGraph::Pattern { extensions, .. } => {
            extensions.iter().map(|d| scorer.explain(GraphRef::Dag(d))).collect()
        }
    }
}
