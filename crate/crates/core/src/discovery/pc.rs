use crate::data::Dataset;
use crate::error::Result;
use crate::graph::{
    apply_meek_rules, orient_v_structures, BackgroundKnowledge, OrientationConflict, Pdag, SepsetTable,
};
use crate::stats::{correlation_matrix, fisher_z_independent, partial_correlation, CiTestConfig};

#[derive(Debug, Clone, PartialEq)]
pub struct PcResult {
    pub pdag: Pdag,
    /// Undirected skeleton found by the independence tests.
    pub skeleton: Pdag,
    pub sepsets: SepsetTable,
    pub conflicts: Vec<OrientationConflict>,
    pub ci_tests: usize,
}

/// PC with Fisher-z tests. The skeleton phase is order-independent: each
/// level tests against the adjacencies frozen at the start of that level.
///
/// Knowledge orientations are fixed before v-structures, so a v-structure
/// that would point out of a sink is recorded as a conflict and dropped.
pub fn pc(data: &Dataset, cfg: &CiTestConfig, bk: &BackgroundKnowledge) -> Result<PcResult> {
    cfg.validate()?;
    let p = data.n_cols();
    bk.validate(p)?;
    let n = data.n_rows();
    let names = data.labels().to_vec();
    let mut skeleton = Pdag::complete(names);
    for &(a, b) in &bk.forbidden_edges {
        if bk.forbidden_edges.contains(&(b, a)) {
            skeleton.remove_edge(a, b);
        }
    }
    let mut sepsets = SepsetTable::new();
    let mut ci_tests = 0;
    if p >= 2 {
        let cols: Vec<&[f64]> = (0..p).map(|j| data.column(j)).collect();
        let corr = correlation_matrix(&cols)?;
        let mut level = 0;
        loop {
            let frozen: Vec<Vec<usize>> = (0..p).map(|v| skeleton.neighbors(v)).collect();
            if (0..p).all(|v| frozen[v].len() <= level) || n <= level + 3 {
                break;
            }
            for i in 0..p {
                for &j in &frozen[i] {
                    if !skeleton.adjacent(i, j) {
                        continue;
                    }
                    let pool: Vec<usize> = frozen[i].iter().copied().filter(|&k| k != j).collect();
                    if pool.len() < level {
                        continue;
                    }
                    for s in Combinations::new(pool.len(), level) {
                        let cond: Vec<usize> = s.iter().map(|&k| pool[k]).collect();
                        let r = partial_correlation(&corr, i, j, &cond)?;
                        ci_tests += 1;
                        if fisher_z_independent(r, n, level, cfg)? {
                            skeleton.remove_edge(i, j);
                            sepsets.insert(i, j, cond);
                            break;
                        }
                    }
                }
            }
            level += 1;
        }
    }
    let mut seeded = skeleton.clone();
    crate::graph::apply_background_knowledge(&mut seeded, bk)?;
    let v = orient_v_structures(&seeded, &sepsets);
    let pdag = apply_meek_rules(&v.pdag, bk)?;
    Ok(PcResult {
        pdag,
        skeleton,
        sepsets,
        conflicts: v.conflicts,
        ci_tests,
    })
}

/// Lexicographic `k`-subsets of `0..n`.
struct Combinations {
    n: usize,
    idx: Vec<usize>,
    done: bool,
}

impl Combinations {
    fn new(n: usize, k: usize) -> Self {
        Self {
            n,
            idx: (0..k).collect(),
            done: k > n,
        }
    }
}

impl Iterator for Combinations {
    type Item = Vec<usize>;

    fn next(&mut self) -> Option<Vec<usize>> {
        if self.done {
            return None;
        }
        let out = self.idx.clone();
        let k = self.idx.len();
        let mut i = k;
        loop {
            if i == 0 {
                self.done = true;
                break;
            }
            i -= 1;
            if self.idx[i] < self.n - k + i {
                self.idx[i] += 1;
                for t in i + 1..k {
                    self.idx[t] = self.idx[t - 1] + 1;
                }
                break;
            }
        }
        Some(out)
    }
}
