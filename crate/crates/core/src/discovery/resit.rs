use crate::data::Dataset;
use crate::error::{Error, Result};
use crate::graph::{BackgroundKnowledge, Dag};
use crate::stats::{hsic_test, standardize, tree_regress, HsicConfig};
use serde::{Deserialize, Serialize};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ResitConfig {
    pub hsic: HsicConfig,
    pub tree_depth: usize,
    pub min_leaf: usize,
}

impl Default for ResitConfig {
    fn default() -> Self {
        Self {
            hsic: HsicConfig::default(),
            tree_depth: 6,
            min_leaf: 20,
        }
    }
}

impl ResitConfig {
    pub fn validate(&self) -> Result<()> {
        self.hsic.validate()?;
        if self.min_leaf == 0 {
            return Err(Error::Config("min_leaf must be positive".into()));
        }
        Ok(())
    }
}

/// Regression with subsequent independence test: peel off sinks by residual
/// independence, then prune each parent set.
pub fn resit(data: &Dataset, bk: &BackgroundKnowledge, cfg: &ResitConfig) -> Result<Dag> {
    cfg.validate()?;
    let p = data.n_cols();
    bk.validate(p)?;
    let names = data.labels().to_vec();
    if p < 2 {
        return Ok(Dag::empty(names));
    }
    let x: Vec<Vec<f64>> = (0..p).map(|j| standardize(data.column(j))).collect::<Result<_>>()?;

    // Phase 1: order from sinks upward.
    let mut remaining: Vec<usize> = (0..p).collect();
    let mut order_rev = Vec::with_capacity(p);
    while remaining.len() > 1 {
        let sinks: Vec<usize> = remaining.iter().copied().filter(|v| bk.sink_nodes.contains(v)).collect();
        let cands: Vec<usize> = if !sinks.is_empty() {
            sinks
        } else {
            let free: Vec<usize> = remaining
                .iter()
                .copied()
                .filter(|v| !bk.exogenous_nodes.contains(v))
                .collect();
            if free.is_empty() {
                remaining.clone()
            } else {
                free
            }
        };
        let pick = if cands.len() == 1 {
            cands[0]
        } else {
            let mut best: Option<(f64, usize)> = None;
            for &k in &cands {
                let others: Vec<usize> = remaining.iter().copied().filter(|&v| v != k).collect();
                let stat = residual_dependence(&x, k, &others, &others, cfg)?;
                if best.is_none_or(|(s, _)| stat < s) {
                    best = Some((stat, k));
                }
            }
            best.expect("candidates are non-empty").1
        };
        order_rev.push(pick);
        remaining.retain(|&v| v != pick);
    }
    order_rev.extend(remaining);
    let order: Vec<usize> = order_rev.into_iter().rev().collect();

    // Phase 2: drop parents whose removal keeps the residual independent.
    let mut edges = Vec::new();
    for (k, &v) in order.iter().enumerate() {
        let preds: Vec<usize> = order[..k].to_vec();
        let mut parents: Vec<usize> = preds.iter().copied().filter(|&u| bk.allows(u, v)).collect();
        for &u in &preds {
            if !parents.contains(&u) || bk.requires(u, v) {
                continue;
            }
            let reduced: Vec<usize> = parents.iter().copied().filter(|&w| w != u).collect();
            if residual_independent(&x, v, &reduced, &preds, cfg)? {
                parents = reduced;
            }
        }
        edges.extend(parents.into_iter().map(|u| (u, v)));
    }
    Dag::new(names, &edges)
}

fn residual(x: &[Vec<f64>], k: usize, on: &[usize], cfg: &ResitConfig) -> Result<Vec<f64>> {
    if on.is_empty() {
        return Ok(x[k].clone());
    }
    let cols: Vec<&[f64]> = on.iter().map(|&u| x[u].as_slice()).collect();
    Ok(tree_regress(&x[k], &cols, cfg.tree_depth, cfg.min_leaf)?.residuals)
}

/// HSIC statistic relative to its threshold; lower means more independent.
fn residual_dependence(x: &[Vec<f64>], k: usize, on: &[usize], against: &[usize], cfg: &ResitConfig) -> Result<f64> {
    let r = residual(x, k, on, cfg)?;
    let cols: Vec<&[f64]> = against.iter().map(|&u| x[u].as_slice()).collect();
    let out = hsic_test(&[r.as_slice()], &cols, &cfg.hsic)?;
    Ok(if out.threshold.is_finite() && out.threshold > 0.0 {
        out.statistic / out.threshold
    } else {
        0.0
    })
}

fn residual_independent(x: &[Vec<f64>], k: usize, on: &[usize], against: &[usize], cfg: &ResitConfig) -> Result<bool> {
    if against.is_empty() {
        return Ok(true);
    }
    let r = residual(x, k, on, cfg)?;
    let cols: Vec<&[f64]> = against.iter().map(|&u| x[u].as_slice()).collect();
    Ok(hsic_test(&[r.as_slice()], &cols, &cfg.hsic)?.independent())
}
