//! Directed and partially directed causal graphs.
//!
//! Nodes are identified by position; labels are carried along as metadata
//! only, so graphs join against dataset columns by index.

mod extend;
mod io;
mod orient;

pub use extend::{enumerate_dag_extensions, DEFAULT_EXTENSION_CAP};
pub use io::GraphJson;
pub(crate) use orient::apply_background_knowledge;
pub use orient::{apply_meek_rules, orient_v_structures, OrientationConflict, VStructureOrientation};

use crate::error::{Error, Result};
use std::collections::{BTreeMap, BTreeSet, VecDeque};

/// Topological order of the directed graph on `n` nodes with the given edges.
/// Kahn's algorithm; ties resolve toward the smallest index so the order is deterministic.
pub fn topological_order(n: usize, edges: &[(usize, usize)]) -> Result<Vec<usize>> {
    let mut indeg = vec![0usize; n];
    let mut children = vec![Vec::new(); n];
    for &(a, b) in edges {
        if a >= n || b >= n {
            return Err(Error::InvalidGraph(format!("edge ({a}, {b}) out of range")));
        }
        children[a].push(b);
        indeg[b] += 1;
    }
    let mut ready: BTreeSet<usize> = (0..n).filter(|&v| indeg[v] == 0).collect();
    let mut order = Vec::with_capacity(n);
    while let Some(v) = ready.pop_first() {
        order.push(v);
        for &c in &children[v] {
            indeg[c] -= 1;
            if indeg[c] == 0 {
                ready.insert(c);
            }
        }
    }
    if order.len() != n {
        return Err(Error::CyclicGraph);
    }
    Ok(order)
}

/// Directed acyclic graph.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Dag {
    names: Vec<String>,
    parents: Vec<BTreeSet<usize>>,
    children: Vec<BTreeSet<usize>>,
}

impl Dag {
    /// Builds a DAG, rejecting self-loops, out-of-range endpoints and cycles.
    pub fn new(names: Vec<String>, edges: &[(usize, usize)]) -> Result<Self> {
        let n = names.len();
        let mut parents = vec![BTreeSet::new(); n];
        let mut children = vec![BTreeSet::new(); n];
        for &(a, b) in edges {
            if a >= n || b >= n {
                return Err(Error::InvalidGraph(format!("edge ({a}, {b}) out of range")));
            }
            if a == b {
                return Err(Error::InvalidGraph(format!("self-loop on node {a}")));
            }
            parents[b].insert(a);
            children[a].insert(b);
        }
        topological_order(n, edges)?;
        Ok(Self {
            names,
            parents,
            children,
        })
    }

    /// Graph with no edges.
    pub fn empty(names: Vec<String>) -> Self {
        let n = names.len();
        Self {
            names,
            parents: vec![BTreeSet::new(); n],
            children: vec![BTreeSet::new(); n],
        }
    }

    /// Labels `X1..Xn`.
    pub fn with_default_names(n: usize, edges: &[(usize, usize)]) -> Result<Self> {
        Self::new(default_names(n), edges)
    }

    pub fn n_nodes(&self) -> usize {
        self.names.len()
    }

    pub fn names(&self) -> &[String] {
        &self.names
    }

    pub fn index_of(&self, name: &str) -> Option<usize> {
        self.names.iter().position(|n| n == name)
    }

    /// Sorted edge list.
    pub fn edges(&self) -> Vec<(usize, usize)> {
        self.children
            .iter()
            .enumerate()
            .flat_map(|(a, cs)| cs.iter().map(move |&b| (a, b)))
            .collect()
    }

    pub fn n_edges(&self) -> usize {
        self.children.iter().map(BTreeSet::len).sum()
    }

    pub fn has_edge(&self, a: usize, b: usize) -> bool {
        self.children[a].contains(&b)
    }

    pub fn parents(&self, v: usize) -> &BTreeSet<usize> {
        &self.parents[v]
    }

    pub fn children(&self, v: usize) -> &BTreeSet<usize> {
        &self.children[v]
    }

    pub fn in_degree(&self, v: usize) -> usize {
        self.parents[v].len()
    }

    pub fn out_degree(&self, v: usize) -> usize {
        self.children[v].len()
    }

    pub fn topological_order(&self) -> Vec<usize> {
        topological_order(self.n_nodes(), &self.edges()).expect("Dag invariant: acyclic")
    }

    /// All nodes reachable from `v` along directed edges, excluding `v`.
    pub fn descendants(&self, v: usize) -> BTreeSet<usize> {
        let mut seen = BTreeSet::new();
        let mut queue: VecDeque<usize> = self.children[v].iter().copied().collect();
        while let Some(u) = queue.pop_front() {
            if seen.insert(u) {
                queue.extend(self.children[u].iter().copied());
            }
        }
        seen
    }

    /// True when a directed path leads from `a` to `b` (`a != b`).
    pub fn is_ancestor(&self, a: usize, b: usize) -> bool {
        a != b && self.descendants(a).contains(&b)
    }

    /// Returns a copy with `edge` added, failing if that would close a cycle.
    pub fn with_edge(&self, a: usize, b: usize) -> Result<Self> {
        let mut edges = self.edges();
        if !self.has_edge(a, b) {
            edges.push((a, b));
        }
        Self::new(self.names.clone(), &edges)
    }

    /// The same graph viewed as a fully directed PDAG.
    pub fn to_pdag(&self) -> Pdag {
        let mut p = Pdag::new(self.names.clone());
        for (a, b) in self.edges() {
            p.add_directed(a, b);
        }
        p
    }

    /// Unordered adjacent pairs `(min, max)`.
    pub fn skeleton(&self) -> BTreeSet<(usize, usize)> {
        self.edges().into_iter().map(|(a, b)| (a.min(b), a.max(b))).collect()
    }

    /// Structural Hamming distance: adjacencies that differ plus shared
    /// adjacencies oriented differently.
    pub fn shd(&self, other: &Dag) -> usize {
        let n = self.n_nodes();
        let mut d = 0;
        for a in 0..n {
            for b in a + 1..n {
                let x = (self.has_edge(a, b), self.has_edge(b, a));
                let y = (other.has_edge(a, b), other.has_edge(b, a));
                if x != y {
                    d += 1;
                }
            }
        }
        d
    }

    /// Dense 0/1 adjacency matrix; row = parent, column = child.
    pub fn adjacency_matrix(&self) -> Vec<Vec<u8>> {
        let n = self.n_nodes();
        let mut m = vec![vec![0u8; n]; n];
        for (a, b) in self.edges() {
            m[a][b] = 1;
        }
        m
    }
}

pub(crate) fn default_names(n: usize) -> Vec<String> {
    (1..=n).map(|i| format!("X{i}")).collect()
}

/// Partially directed graph. Each adjacent pair is either directed or undirected.
///
/// Stored as an `n x n` mark matrix: `mark[a][b] && !mark[b][a]` is `a -> b`,
/// both set is `a - b`.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Pdag {
    names: Vec<String>,
    n: usize,
    mark: Vec<bool>,
}

impl Pdag {
    pub fn new(names: Vec<String>) -> Self {
        let n = names.len();
        Self {
            names,
            n,
            mark: vec![false; n * n],
        }
    }

    /// Complete undirected graph, the starting point of skeleton search.
    pub fn complete(names: Vec<String>) -> Self {
        let mut p = Self::new(names);
        for a in 0..p.n {
            for b in a + 1..p.n {
                p.add_undirected(a, b);
            }
        }
        p
    }

    pub fn from_edges(
        names: Vec<String>,
        directed: &[(usize, usize)],
        undirected: &[(usize, usize)],
    ) -> Result<Self> {
        let mut p = Self::new(names);
        for &(a, b) in directed.iter().chain(undirected) {
            if a >= p.n || b >= p.n || a == b {
                return Err(Error::InvalidGraph(format!("bad edge ({a}, {b})")));
            }
            if p.adjacent(a, b) {
                return Err(Error::InvalidGraph(format!(
                    "pair ({a}, {b}) listed more than once"
                )));
            }
            if directed.contains(&(a, b)) {
                p.add_directed(a, b);
            } else {
                p.add_undirected(a, b);
            }
        }
        Ok(p)
    }

    pub fn n_nodes(&self) -> usize {
        self.n
    }

    pub fn names(&self) -> &[String] {
        &self.names
    }

    #[inline]
    fn m(&self, a: usize, b: usize) -> bool {
        self.mark[a * self.n + b]
    }

    #[inline]
    fn set(&mut self, a: usize, b: usize, v: bool) {
        self.mark[a * self.n + b] = v;
    }

    pub fn adjacent(&self, a: usize, b: usize) -> bool {
        self.m(a, b) || self.m(b, a)
    }

    pub fn is_directed(&self, a: usize, b: usize) -> bool {
        self.m(a, b) && !self.m(b, a)
    }

    pub fn is_undirected(&self, a: usize, b: usize) -> bool {
        self.m(a, b) && self.m(b, a)
    }

    pub fn add_undirected(&mut self, a: usize, b: usize) {
        self.set(a, b, true);
        self.set(b, a, true);
    }

    pub fn add_directed(&mut self, a: usize, b: usize) {
        self.set(a, b, true);
        self.set(b, a, false);
    }

    /// Turns an existing adjacency into `a -> b`.
    pub fn orient(&mut self, a: usize, b: usize) {
        debug_assert!(self.adjacent(a, b));
        self.add_directed(a, b);
    }

    pub fn remove_edge(&mut self, a: usize, b: usize) {
        self.set(a, b, false);
        self.set(b, a, false);
    }

    pub fn neighbors(&self, v: usize) -> Vec<usize> {
        (0..self.n).filter(|&u| u != v && self.adjacent(u, v)).collect()
    }

    /// Sources of directed edges into `v`.
    pub fn parents(&self, v: usize) -> Vec<usize> {
        (0..self.n).filter(|&u| self.is_directed(u, v)).collect()
    }

    pub fn children(&self, v: usize) -> Vec<usize> {
        (0..self.n).filter(|&u| self.is_directed(v, u)).collect()
    }

    pub fn undirected_neighbors(&self, v: usize) -> Vec<usize> {
        (0..self.n).filter(|&u| u != v && self.is_undirected(u, v)).collect()
    }

    pub fn directed_edges(&self) -> Vec<(usize, usize)> {
        let mut out = Vec::new();
        for a in 0..self.n {
            for b in 0..self.n {
                if self.is_directed(a, b) {
                    out.push((a, b));
                }
            }
        }
        out
    }

    /// Undirected edges as `(min, max)` pairs, sorted.
    pub fn undirected_edges(&self) -> Vec<(usize, usize)> {
        let mut out = Vec::new();
        for a in 0..self.n {
            for b in a + 1..self.n {
                if self.is_undirected(a, b) {
                    out.push((a, b));
                }
            }
        }
        out
    }

    pub fn skeleton(&self) -> BTreeSet<(usize, usize)> {
        let mut s = BTreeSet::new();
        for a in 0..self.n {
            for b in a + 1..self.n {
                if self.adjacent(a, b) {
                    s.insert((a, b));
                }
            }
        }
        s
    }

    pub fn is_fully_directed(&self) -> bool {
        self.undirected_edges().is_empty()
    }

    /// Converts to a [`Dag`] when no undirected edge remains.
    pub fn to_dag(&self) -> Result<Dag> {
        if !self.is_fully_directed() {
            return Err(Error::InvalidGraph("graph has undirected edges".into()));
        }
        Dag::new(self.names.clone(), &self.directed_edges())
    }

    /// True when a directed path `from ~> to` exists using directed edges only.
    pub fn has_directed_path(&self, from: usize, to: usize) -> bool {
        let mut seen = vec![false; self.n];
        let mut stack = vec![from];
        while let Some(u) = stack.pop() {
            if u == to {
                return true;
            }
            if std::mem::replace(&mut seen[u], true) {
                continue;
            }
            for c in 0..self.n {
                if self.is_directed(u, c) && !seen[c] {
                    stack.push(c);
                }
            }
        }
        false
    }

    pub fn directed_part_is_acyclic(&self) -> bool {
        topological_order(self.n, &self.directed_edges()).is_ok()
    }
}

/// Structural constraints supplied as prior knowledge.
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct BackgroundKnowledge {
    pub required_edges: BTreeSet<(usize, usize)>,
    pub forbidden_edges: BTreeSet<(usize, usize)>,
    /// Nodes with no outgoing edges.
    pub sink_nodes: BTreeSet<usize>,
    /// Nodes with no incoming edges.
    pub exogenous_nodes: BTreeSet<usize>,
}

impl BackgroundKnowledge {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn with_sink(mut self, v: usize) -> Self {
        self.sink_nodes.insert(v);
        self
    }

    pub fn with_exogenous(mut self, v: usize) -> Self {
        self.exogenous_nodes.insert(v);
        self
    }

    pub fn forbid(mut self, a: usize, b: usize) -> Self {
        self.forbidden_edges.insert((a, b));
        self
    }

    pub fn require(mut self, a: usize, b: usize) -> Self {
        self.required_edges.insert((a, b));
        self
    }

    pub fn is_empty(&self) -> bool {
        self.required_edges.is_empty()
            && self.forbidden_edges.is_empty()
            && self.sink_nodes.is_empty()
            && self.exogenous_nodes.is_empty()
    }

    pub fn validate(&self, n: usize) -> Result<()> {
        let in_range = |v: usize| v < n;
        for &(a, b) in self.required_edges.iter().chain(&self.forbidden_edges) {
            if !in_range(a) || !in_range(b) || a == b {
                return Err(Error::InvalidGraph(format!("constraint edge ({a}, {b}) invalid")));
            }
        }
        if let Some(&v) = self
            .sink_nodes
            .iter()
            .chain(&self.exogenous_nodes)
            .find(|&&v| !in_range(v))
        {
            return Err(Error::InvalidGraph(format!("constraint node {v} out of range")));
        }
        if let Some(e) = self.required_edges.intersection(&self.forbidden_edges).next() {
            return Err(Error::ConstraintConflict(format!(
                "edge {e:?} both required and forbidden"
            )));
        }
        for &(a, b) in &self.required_edges {
            if self.sink_nodes.contains(&a) {
                return Err(Error::ConstraintConflict(format!(
                    "required edge ({a}, {b}) leaves sink node {a}"
                )));
            }
            if self.exogenous_nodes.contains(&b) {
                return Err(Error::ConstraintConflict(format!(
                    "required edge ({a}, {b}) enters exogenous node {b}"
                )));
            }
        }
        Ok(())
    }

    /// Whether the directed edge `a -> b` is permitted.
    pub fn allows(&self, a: usize, b: usize) -> bool {
        !self.forbidden_edges.contains(&(a, b))
            && !self.sink_nodes.contains(&a)
            && !self.exogenous_nodes.contains(&b)
    }

    pub fn requires(&self, a: usize, b: usize) -> bool {
        self.required_edges.contains(&(a, b))
    }

    /// Whether `dag` satisfies every constraint.
    pub fn is_satisfied_by(&self, dag: &Dag) -> bool {
        dag.edges().into_iter().all(|(a, b)| self.allows(a, b))
            && self.required_edges.iter().all(|&(a, b)| dag.has_edge(a, b))
    }

    /// Restricts the knowledge to a subset of nodes, reindexing by position in `keep`.
    pub fn restrict(&self, keep: &[usize]) -> Self {
        let map: BTreeMap<usize, usize> = keep.iter().enumerate().map(|(i, &v)| (v, i)).collect();
        let edge = |&(a, b): &(usize, usize)| Some((*map.get(&a)?, *map.get(&b)?));
        let node = |v: &usize| map.get(v).copied();
        Self {
            required_edges: self.required_edges.iter().filter_map(edge).collect(),
            forbidden_edges: self.forbidden_edges.iter().filter_map(edge).collect(),
            sink_nodes: self.sink_nodes.iter().filter_map(node).collect(),
            exogenous_nodes: self.exogenous_nodes.iter().filter_map(node).collect(),
        }
    }
}

/// Conditioning sets that separated each removed pair during skeleton search.
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct SepsetTable {
    sets: BTreeMap<(usize, usize), BTreeSet<usize>>,
}

impl SepsetTable {
    pub fn new() -> Self {
        Self::default()
    }

    fn key(a: usize, b: usize) -> (usize, usize) {
        (a.min(b), a.max(b))
    }

    pub fn insert(&mut self, a: usize, b: usize, set: impl IntoIterator<Item = usize>) {
        self.sets.insert(Self::key(a, b), set.into_iter().collect());
    }

    pub fn get(&self, a: usize, b: usize) -> Option<&BTreeSet<usize>> {
        self.sets.get(&Self::key(a, b))
    }

    pub fn contains_pair(&self, a: usize, b: usize) -> bool {
        self.sets.contains_key(&Self::key(a, b))
    }

    pub fn len(&self) -> usize {
        self.sets.len()
    }

    pub fn is_empty(&self) -> bool {
        self.sets.is_empty()
    }

    pub fn iter(&self) -> impl Iterator<Item = (&(usize, usize), &BTreeSet<usize>)> {
        self.sets.iter()
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn names(n: usize) -> Vec<String> {
        default_names(n)
    }

    fn order_respects(order: &[usize], edges: &[(usize, usize)]) -> bool {
        let pos: BTreeMap<usize, usize> = order.iter().enumerate().map(|(i, &v)| (v, i)).collect();
        edges.iter().all(|(a, b)| pos[a] < pos[b])
    }

    #[test]
    fn chain_has_unique_order() {
        // X=0 -> Z=2 -> Y=1
        let dag = Dag::new(names(3), &[(0, 2), (2, 1)]).unwrap();
        assert_eq!(dag.topological_order(), vec![0, 2, 1]);
    }

    #[test]
    fn empty_graph_order_is_a_permutation() {
        let order = topological_order(3, &[]).unwrap();
        let mut sorted = order.clone();
        sorted.sort();
        assert_eq!(sorted, vec![0, 1, 2]);
        assert!(order_respects(&order, &[]));
    }

    #[test]
    fn two_cycle_is_rejected() {
        assert_eq!(topological_order(2, &[(0, 1), (1, 0)]), Err(Error::CyclicGraph));
        assert_eq!(Dag::new(names(2), &[(0, 1), (1, 0)]), Err(Error::CyclicGraph));
    }

    #[test]
    fn self_loop_is_rejected() {
        assert!(matches!(Dag::new(names(2), &[(1, 1)]), Err(Error::InvalidGraph(_))));
    }

    #[test]
    fn parents_of_collider_and_chain() {
        // X=0 -> Y=1 <- Z=2
        let collider = Dag::new(names(3), &[(0, 1), (2, 1)]).unwrap();
        assert_eq!(collider.parents(1), &BTreeSet::from([0, 2]));
        assert!(collider.parents(0).is_empty());
        let chain = Dag::new(names(3), &[(0, 2), (2, 1)]).unwrap();
        assert_eq!(chain.parents(2), &BTreeSet::from([0]));
    }

    #[test]
    fn ancestors_and_shd() {
        let chain = Dag::new(names(3), &[(0, 2), (2, 1)]).unwrap();
        assert!(chain.is_ancestor(0, 1));
        assert!(!chain.is_ancestor(1, 0));
        let reversed = Dag::new(names(3), &[(2, 0), (2, 1)]).unwrap();
        assert_eq!(chain.shd(&reversed), 1);
        assert_eq!(chain.shd(&chain), 0);
    }

    #[test]
    fn pdag_pairs_live_in_one_edge_set() {
        let p = Pdag::from_edges(names(3), &[(0, 1)], &[(1, 2)]).unwrap();
        assert!(p.is_directed(0, 1));
        assert!(p.is_undirected(2, 1));
        assert!(Pdag::from_edges(names(3), &[(0, 1)], &[(0, 1)]).is_err());
    }

    #[test]
    fn background_knowledge_validation() {
        let bk = BackgroundKnowledge::new().require(0, 1).forbid(0, 1);
        assert!(matches!(bk.validate(3), Err(Error::ConstraintConflict(_))));
        let bk = BackgroundKnowledge::new().with_sink(0).require(0, 1);
        assert!(matches!(bk.validate(3), Err(Error::ConstraintConflict(_))));
        let bk = BackgroundKnowledge::new().with_sink(2).with_exogenous(0);
        assert!(bk.validate(3).is_ok());
        assert!(!bk.allows(2, 1));
        assert!(!bk.allows(1, 0));
        assert!(bk.allows(0, 2));
    }

    #[test]
    fn restrict_reindexes() {
        let bk = BackgroundKnowledge::new().with_sink(3).forbid(1, 2).with_exogenous(0);
        let r = bk.restrict(&[0, 1, 2]);
        assert!(r.sink_nodes.is_empty());
        assert_eq!(r.forbidden_edges, BTreeSet::from([(1, 2)]));
        assert_eq!(r.exogenous_nodes, BTreeSet::from([0]));
    }
}
