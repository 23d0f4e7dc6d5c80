use super::{Dag, Pdag};
use crate::error::{Error, Result};

pub const DEFAULT_EXTENSION_CAP: usize = 10_000;

/// Enumerates the consistent DAG extensions of `pdag`: every full orientation
/// of its undirected edges that is acyclic, keeps the existing directed edges
/// and creates no v-structure absent from `pdag`.
///
/// Backtracking over undirected edges in index order, trying `lo -> hi`
/// before `hi -> lo`; stops after `cap` results.
pub fn enumerate_dag_extensions(pdag: &Pdag, cap: usize) -> Result<Vec<Dag>> {
    let cap = cap.max(1);
    if !pdag.directed_part_is_acyclic() {
        return Err(Error::NoExtension);
    }
    let undirected = pdag.undirected_edges();
    let mut state = Search {
        work: pdag.clone(),
        original: pdag,
        undirected: &undirected,
        out: Vec::new(),
        cap,
    };
    state.recurse(0);
    if state.out.is_empty() {
        return Err(Error::NoExtension);
    }
    Ok(state.out)
}

struct Search<'a> {
    work: Pdag,
    original: &'a Pdag,
    undirected: &'a [(usize, usize)],
    out: Vec<Dag>,
    cap: usize,
}

impl Search<'_> {
    fn recurse(&mut self, k: usize) {
        if self.out.len() >= self.cap {
            return;
        }
        if k == self.undirected.len() {
            let dag = self.work.to_dag().expect("acyclicity maintained incrementally");
            self.out.push(dag);
            return;
        }
        let (lo, hi) = self.undirected[k];
        for (a, b) in [(lo, hi), (hi, lo)] {
            if self.can_orient(a, b) {
                self.work.orient(a, b);
                self.recurse(k + 1);
                self.work.add_undirected(a, b);
                if self.out.len() >= self.cap {
                    return;
                }
            }
        }
    }

    /// `a -> b` must not close a directed cycle and must not make `b` a new
    /// collider with a non-adjacent parent.
    fn can_orient(&self, a: usize, b: usize) -> bool {
        if self.work.has_directed_path(b, a) {
            return false;
        }
        let n = self.work.n_nodes();
        for p in 0..n {
            if p != a && self.work.is_directed(p, b) && !self.original.adjacent(p, a) {
                return false;
            }
        }
        true
    }
}
