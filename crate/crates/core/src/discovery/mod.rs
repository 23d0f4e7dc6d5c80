//! Causal structure estimation under prior structural knowledge.

mod lingam;
mod notears;
mod pc;
mod resit;

pub use lingam::{direct_lingam, LingamConfig, LingamResult};
pub use notears::{h_acyclicity, notears_linear, NotearsConfig, NotearsResult};
pub use pc::{pc, PcResult};
pub use resit::{resit, ResitConfig};

use crate::data::Dataset;
use crate::error::{Error, Result};
use crate::graph::{enumerate_dag_extensions, BackgroundKnowledge, Dag, Pdag, DEFAULT_EXTENSION_CAP};
use crate::stats::{CiTestConfig, HsicConfig};
use serde::{Deserialize, Serialize};
use std::fmt;
use std::str::FromStr;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum PriorMode {
    /// No prior knowledge.
    #[serde(rename = "0")]
    None,
    /// Every explanatory variable is a direct parent of the target.
    #[serde(rename = "a")]
    TargetChildOfAll,
    /// The target is a sink.
    #[serde(rename = "b")]
    TargetSink,
    /// No graph: interventional probabilities fall back to conditionals.
    #[serde(rename = "nograph")]
    NoGraph,
}

impl PriorMode {
    pub const ALL: [PriorMode; 4] = [Self::None, Self::TargetChildOfAll, Self::TargetSink, Self::NoGraph];

    pub fn id(self) -> &'static str {
        match self {
            Self::None => "0",
            Self::TargetChildOfAll => "a",
            Self::TargetSink => "b",
            Self::NoGraph => "nograph",
        }
    }
}

impl fmt::Display for PriorMode {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.id())
    }
}

impl FromStr for PriorMode {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "0" | "none" | "mode0" => Ok(Self::None),
            "a" | "modea" => Ok(Self::TargetChildOfAll),
            "b" | "modeb" => Ok(Self::TargetSink),
            "nograph" | "no-graph" | "no_graph" => Ok(Self::NoGraph),
            _ => Err(Error::Config(format!("unknown prior mode `{s}` (expected 0, a, b or nograph)"))),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Method {
    Pc,
    Lingam,
    Resit,
    Notears,
}

impl Method {
    pub const ALL: [Method; 4] = [Self::Pc, Self::Lingam, Self::Resit, Self::Notears];

    pub fn id(self) -> &'static str {
        match self {
            Self::Pc => "pc",
            Self::Lingam => "lingam",
            Self::Resit => "resit",
            Self::Notears => "notears",
        }
    }

    pub fn supports(self, mode: PriorMode) -> bool {
        !(mode == PriorMode::TargetSink && matches!(self, Self::Resit | Self::Notears))
    }
}

impl fmt::Display for Method {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.id())
    }
}

impl FromStr for Method {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "pc" => Ok(Self::Pc),
            "lingam" | "directlingam" | "direct_lingam" => Ok(Self::Lingam),
            "resit" => Ok(Self::Resit),
            "notears" => Ok(Self::Notears),
            _ => Err(Error::Config(format!(
                "unknown method `{s}` (expected pc, lingam, resit or notears)"
            ))),
        }
    }
}

/// Settings for every method; each call reads the part it needs.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct DiscoveryConfig {
    pub ci: CiTestConfig,
    pub lingam: LingamConfig,
    pub resit: ResitConfig,
    pub notears: NotearsConfig,
    pub extension_cap: usize,
    /// Knowledge added on top of the prior mode, in full-data column indices.
    #[serde(skip)]
    pub extra_knowledge: BackgroundKnowledge,
}

impl Default for DiscoveryConfig {
    fn default() -> Self {
        Self {
            ci: CiTestConfig::default(),
            lingam: LingamConfig::default(),
            resit: ResitConfig::default(),
            notears: NotearsConfig::default(),
            extension_cap: DEFAULT_EXTENSION_CAP,
            extra_knowledge: BackgroundKnowledge::default(),
        }
    }
}

impl DiscoveryConfig {
    pub fn validate(&self) -> Result<()> {
        self.ci.validate()?;
        self.lingam.validate()?;
        self.resit.validate()?;
        self.notears.validate()?;
        if self.extension_cap == 0 {
            return Err(Error::Config("extension cap must be positive".into()));
        }
        Ok(())
    }

    pub fn hsic(&self) -> &HsicConfig {
        &self.resit.hsic
    }
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct Diagnostics {
    pub ci_tests: usize,
    pub optimizer_iterations: usize,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub h_final: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub converged: Option<bool>,
    pub extensions_truncated: bool,
    pub notes: Vec<String>,
}

#[derive(Debug, Clone, PartialEq)]
pub enum DiscoveredGraph {
    Dag(Dag),
    /// A pattern with its consistent DAG extensions.
    Pattern { pdag: Pdag, extensions: Vec<Dag> },
    NoGraph,
}

#[derive(Debug, Clone, PartialEq)]
pub struct DiscoveryOutput {
    pub method: Method,
    pub mode: PriorMode,
    pub graph: DiscoveredGraph,
    pub diagnostics: Diagnostics,
}

impl DiscoveryOutput {
    /// Candidate DAGs: the single estimate, every extension, or none.
    pub fn dags(&self) -> Vec<&Dag> {
        match &self.graph {
            DiscoveredGraph::Dag(d) => vec![d],
            DiscoveredGraph::Pattern { extensions, .. } => extensions.iter().collect(),
            DiscoveredGraph::NoGraph => Vec::new(),
        }
    }

    pub fn is_no_graph(&self) -> bool {
        matches!(self.graph, DiscoveredGraph::NoGraph)
    }
}

/// Whether `dag` obeys the structural postcondition of `mode`.
pub fn satisfies_mode(dag: &Dag, mode: PriorMode, target: usize) -> bool {
    match mode {
        PriorMode::TargetChildOfAll => (0..dag.n_nodes()).filter(|&v| v != target).all(|v| dag.has_edge(v, target)),
        PriorMode::TargetSink => dag.out_degree(target) == 0,
        PriorMode::None | PriorMode::NoGraph => true,
    }
}

/// Runs `method` on `data` under the prior `mode` for the target column.
pub fn discover_with_prior(
    method: Method,
    mode: PriorMode,
    data: &Dataset,
    target: usize,
    cfg: &DiscoveryConfig,
) -> Result<DiscoveryOutput> {
    let p = data.n_cols();
    if target >= p {
        return Err(Error::Config(format!("target index {target} out of range for {p} columns")));
    }
    if !method.supports(mode) {
        return Err(Error::UnsupportedModeForMethod {
            method: method.id().to_string(),
            mode: mode.id().to_string(),
        });
    }
    cfg.validate()?;
    cfg.extra_knowledge.validate(p)?;
    let out = |graph, diagnostics| DiscoveryOutput {
        method,
        mode,
        graph,
        diagnostics,
    };
    match mode {
        PriorMode::NoGraph => Ok(out(DiscoveredGraph::NoGraph, Diagnostics::default())),
        PriorMode::None => {
            let (g, d) = run(method, data, &cfg.extra_knowledge, cfg)?;
            Ok(out(g, d))
        }
        PriorMode::TargetSink => {
            let bk = cfg.extra_knowledge.clone().with_sink(target);
            let (g, d) = run(method, data, &bk, cfg)?;
            Ok(out(g, d))
        }
        PriorMode::TargetChildOfAll => {
            let keep: Vec<usize> = (0..p).filter(|&v| v != target).collect();
            let sub = data.select(&keep);
            let bk = cfg.extra_knowledge.restrict(&keep);
            let (g, d) = run(method, &sub, &bk, cfg)?;
            let lift = |edges: &[(usize, usize)]| -> Vec<(usize, usize)> {
                edges
                    .iter()
                    .map(|&(a, b)| (keep[a], keep[b]))
                    .chain(keep.iter().map(|&v| (v, target)))
                    .collect()
            };
            let names = data.labels().to_vec();
            let graph = match g {
                DiscoveredGraph::Dag(dag) => DiscoveredGraph::Dag(Dag::new(names, &lift(&dag.edges()))?),
                DiscoveredGraph::Pattern { pdag, extensions } => {
                    let undirected: Vec<_> = pdag
                        .undirected_edges()
                        .into_iter()
                        .map(|(a, b)| (keep[a], keep[b]))
                        .collect();
                    let pdag = Pdag::from_edges(names.clone(), &lift(&pdag.directed_edges()), &undirected)?;
                    let extensions = extensions
                        .iter()
                        .map(|e| Dag::new(names.clone(), &lift(&e.edges())))
                        .collect::<Result<_>>()?;
                    DiscoveredGraph::Pattern { pdag, extensions }
                }
                DiscoveredGraph::NoGraph => DiscoveredGraph::NoGraph,
            };
            Ok(out(graph, d))
        }
    }
}

fn run(method: Method, data: &Dataset, bk: &BackgroundKnowledge, cfg: &DiscoveryConfig) -> Result<(DiscoveredGraph, Diagnostics)> {
    let mut diag = Diagnostics::default();
    let graph = match method {
        Method::Pc => {
            let res = pc(data, &cfg.ci, bk)?;
            diag.ci_tests = res.ci_tests;
            for c in &res.conflicts {
                diag.notes.push(format!(
                    "v-structure conflict at {:?}: kept {:?} over {:?}",
                    c.triple, c.kept, c.requested
                ));
            }
            let (pdag, extensions) = pattern_extensions(res.pdag, &res.skeleton, bk, cfg.extension_cap, &mut diag)?;
            diag.extensions_truncated = extensions.len() >= cfg.extension_cap;
            DiscoveredGraph::Pattern { pdag, extensions }
        }
        Method::Lingam => {
            let res = direct_lingam(data, bk, &cfg.lingam)?;
            DiscoveredGraph::Dag(res.dag)
        }
        Method::Resit => DiscoveredGraph::Dag(resit(data, bk, &cfg.resit)?),
        Method::Notears => {
            let res = notears_linear(data, &cfg.notears, bk)?;
            diag.optimizer_iterations = res.inner_iterations;
            diag.h_final = Some(res.h);
            diag.converged = Some(res.converged);
            if !res.converged {
                diag.notes.push(format!("augmented Lagrangian stopped with h = {:e}", res.h));
            }
            if res.cycle_edges_removed > 0 {
                diag.notes.push(format!("{} edge(s) removed to break cycles", res.cycle_edges_removed));
            }
            DiscoveredGraph::Dag(res.dag)
        }
    };
    Ok((graph, diag))
}

/// Extensions of the PC pattern. A pattern whose orientations admit no
/// consistent DAG (possible with finite-sample test errors) falls back to the
/// skeleton with only the knowledge-driven orientations, then to a single
/// DAG oriented along a knowledge-respecting order.
fn pattern_extensions(
    pdag: Pdag,
    skeleton: &Pdag,
    bk: &BackgroundKnowledge,
    cap: usize,
    diag: &mut Diagnostics,
) -> Result<(Pdag, Vec<Dag>)> {
    match enumerate_dag_extensions(&pdag, cap) {
        Ok(ext) => return Ok((pdag, ext)),
        Err(Error::NoExtension) => diag.notes.push("pattern has no consistent extension; dropped v-structures".into()),
        Err(e) => return Err(e),
    }
    if let Ok(relaxed) = crate::graph::apply_meek_rules(skeleton, bk) {
        if let Ok(ext) = enumerate_dag_extensions(&relaxed, cap) {
            return Ok((relaxed, ext));
        }
    }
    diag.notes.push("oriented the skeleton along a constraint order".into());
    let n = skeleton.n_nodes();
    let rank = |v: usize| {
        if bk.exogenous_nodes.contains(&v) {
            0
        } else if bk.sink_nodes.contains(&v) {
            2
        } else {
            1
        }
    };
    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by_key(|&v| (rank(v), v));
    let mut pos = vec![0; n];
    for (i, &v) in order.iter().enumerate() {
        pos[v] = i;
    }
    let edges: Vec<(usize, usize)> = skeleton
        .skeleton()
        .into_iter()
        .map(|(a, b)| if pos[a] < pos[b] { (a, b) } else { (b, a) })
        .filter(|&(a, b)| bk.allows(a, b))
        .collect();
    let dag = Dag::new(skeleton.names().to_vec(), &edges)?;
    Ok((dag.to_pdag(), vec![dag]))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::scm::{make_benchmark, sample, FunctionForm, Structure};

    fn data(s: Structure, seed: u64) -> Dataset {
        sample(&make_benchmark(s, FunctionForm::Linear), 3000, seed).unwrap()
    }

    #[test]
    fn mode_parsing() {
        assert_eq!("b".parse::<PriorMode>().unwrap(), PriorMode::TargetSink);
        assert_eq!("NoGraph".parse::<PriorMode>().unwrap(), PriorMode::NoGraph);
        assert!("c".parse::<PriorMode>().is_err());
        assert_eq!("lingam".parse::<Method>().unwrap(), Method::Lingam);
    }

    #[test]
    fn mode_a_attaches_every_feature_to_target() {
        let d = data(Structure::C, 1);
        for m in Method::ALL {
            let out = discover_with_prior(m, PriorMode::TargetChildOfAll, &d, 2, &DiscoveryConfig::default()).unwrap();
            assert!(!out.dags().is_empty());
            for dag in out.dags() {
                assert!(dag.has_edge(0, 2) && dag.has_edge(1, 2), "{m}");
            }
        }
    }

    #[test]
    fn mode_b_makes_target_a_sink_or_is_unsupported() {
        let d = data(Structure::B, 2);
        for m in Method::ALL {
            let res = discover_with_prior(m, PriorMode::TargetSink, &d, 2, &DiscoveryConfig::default());
            match m {
                Method::Resit | Method::Notears => assert!(matches!(res, Err(Error::UnsupportedModeForMethod { .. }))),
                _ => {
                    for dag in res.unwrap().dags() {
                        assert_eq!(dag.out_degree(2), 0);
                    }
                }
            }
        }
    }

    #[test]
    fn no_graph_is_a_sentinel() {
        let d = data(Structure::A, 3);
        let out = discover_with_prior(Method::Pc, PriorMode::NoGraph, &d, 2, &DiscoveryConfig::default()).unwrap();
        assert!(out.is_no_graph() && out.dags().is_empty());
    }

    #[test]
    fn bad_target_is_config_error() {
        let d = data(Structure::A, 4);
        assert!(matches!(
            discover_with_prior(Method::Pc, PriorMode::None, &d, 9, &DiscoveryConfig::default()),
            Err(Error::Config(_))
        ));
    }

    #[test]
    fn inconsistent_pattern_falls_back_to_a_dag() {
        let names = crate::graph::default_names(3);
        let bad = Pdag::from_edges(names.clone(), &[(0, 1), (1, 2), (2, 0)], &[]).unwrap();
        let skel = Pdag::from_edges(names, &[], &[(0, 1), (1, 2), (0, 2)]).unwrap();
        let bk = BackgroundKnowledge::new().with_sink(2);
        let mut diag = Diagnostics::default();
        let (_, ext) = pattern_extensions(bad, &skel, &bk, 100, &mut diag).unwrap();
        assert!(!ext.is_empty());
        assert!(ext.iter().all(|d| d.out_degree(2) == 0));
        assert!(!diag.notes.is_empty());
    }
}
