//! Generative structural causal models: each node is a function of its graph
//! parents plus an independent noise draw.
//!
//! Used to build the benchmark datasets and, through [`sample_do`], as the
//! ground-truth interventional oracle.

use crate::data::{ColumnKind, Dataset};
use crate::error::{Error, Result};
use crate::graph::Dag;
use crate::rng;
use rand::Rng as _;
use rand_distr::{Distribution, Normal};
use serde::{Deserialize, Serialize};
use std::collections::BTreeMap;
use std::fmt;
use std::str::FromStr;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum NoiseSpec {
    Uniform01,
    Gaussian { mean: f64, sd: f64 },
    Bernoulli { p: f64 },
}

impl NoiseSpec {
    pub fn validate(&self) -> Result<()> {
        match *self {
            Self::Gaussian { sd, mean } if !(sd > 0.0) || !mean.is_finite() => {
                Err(Error::Config(format!("gaussian noise needs sd > 0, got {sd}")))
            }
            Self::Bernoulli { p } if !(0.0..=1.0).contains(&p) => {
                Err(Error::Config(format!("bernoulli p must lie in [0, 1], got {p}")))
            }
            _ => Ok(()),
        }
    }

    fn draw(&self, rng: &mut rng::Rng, n: usize) -> Vec<f64> {
        match *self {
            Self::Uniform01 => (0..n).map(|_| rng.random::<f64>()).collect(),
            Self::Gaussian { mean, sd } => {
                let d = Normal::new(mean, sd).expect("validated");
                (0..n).map(|_| d.sample(rng)).collect()
            }
            Self::Bernoulli { p } => (0..n).map(|_| f64::from(u8::from(rng.random_bool(p)))).collect(),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum MechanismKind {
    /// `sum_p c_p * v_p + noise`
    Linear,
    /// `sum_p c_p * v_p^2 + noise`
    QuadraticMonomial,
}

/// Per-node function: a kind plus one coefficient per parent.
#[derive(Debug, Clone, PartialEq)]
pub struct Mechanism {
    pub kind: MechanismKind,
    pub coefficients: BTreeMap<usize, f64>,
}

impl Mechanism {
    fn apply(&self, parents: &[(&[f64], f64)], i: usize) -> f64 {
        parents
            .iter()
            .map(|&(col, c)| match self.kind {
                MechanismKind::Linear => c * col[i],
                MechanismKind::QuadraticMonomial => c * col[i] * col[i],
            })
            .sum()
    }
}

/// Node index to a fixed value.
pub type DoAssignment = BTreeMap<usize, f64>;

#[derive(Debug, Clone, PartialEq)]
pub struct ScmSpec {
    dag: Dag,
    mechanisms: Vec<Mechanism>,
    noises: Vec<NoiseSpec>,
    target: Option<usize>,
}

impl ScmSpec {
    /// Validates that each node's coefficients cover exactly its parents.
    pub fn new(dag: Dag, mechanisms: Vec<Mechanism>, noises: Vec<NoiseSpec>) -> Result<Self> {
        let n = dag.n_nodes();
        if mechanisms.len() != n || noises.len() != n {
            return Err(Error::Config(format!(
                "{n} nodes but {} mechanisms and {} noises",
                mechanisms.len(),
                noises.len()
            )));
        }
        for (v, m) in mechanisms.iter().enumerate() {
            let keys: Vec<usize> = m.coefficients.keys().copied().collect();
            let parents: Vec<usize> = dag.parents(v).iter().copied().collect();
            if keys != parents {
                return Err(Error::Config(format!(
                    "node {v}: coefficients for {keys:?} but parents are {parents:?}"
                )));
            }
            if m.coefficients.values().any(|c| !c.is_finite()) {
                return Err(Error::Config(format!("node {v}: non-finite coefficient")));
            }
        }
        for nz in &noises {
            nz.validate()?;
        }
        Ok(Self {
            dag,
            mechanisms,
            noises,
            target: None,
        })
    }

    /// Same mechanism kind everywhere, coefficients given per edge.
    pub fn uniform(
        dag: Dag,
        kind: MechanismKind,
        coefficients: &BTreeMap<(usize, usize), f64>,
        noise: NoiseSpec,
    ) -> Result<Self> {
        let n = dag.n_nodes();
        let mut mechanisms: Vec<Mechanism> = (0..n)
            .map(|_| Mechanism {
                kind,
                coefficients: BTreeMap::new(),
            })
            .collect();
        for (a, b) in dag.edges() {
            let c = coefficients
                .get(&(a, b))
                .copied()
                .ok_or_else(|| Error::Config(format!("no coefficient for edge ({a}, {b})")))?;
            mechanisms[b].coefficients.insert(a, c);
        }
        Self::new(dag, mechanisms, vec![noise; n])
    }

    pub fn with_target(mut self, target: usize) -> Result<Self> {
        if target >= self.dag.n_nodes() {
            return Err(Error::Config(format!("target {target} out of range")));
        }
        self.target = Some(target);
        Ok(self)
    }

    pub fn dag(&self) -> &Dag {
        &self.dag
    }

    pub fn mechanisms(&self) -> &[Mechanism] {
        &self.mechanisms
    }

    pub fn noises(&self) -> &[NoiseSpec] {
        &self.noises
    }

    pub fn target(&self) -> Option<usize> {
        self.target
    }

    pub fn n_nodes(&self) -> usize {
        self.dag.n_nodes()
    }

    pub fn coefficient(&self, from: usize, to: usize) -> Option<f64> {
        self.mechanisms[to].coefficients.get(&from).copied()
    }
}

/// Observational sample of `n` rows; deterministic in `seed`.
///
/// Node `v` draws its noise from stream `v` of the seed, so observational and
/// interventional samples under one seed share every noise value.
pub fn sample(spec: &ScmSpec, n: usize, seed: u64) -> Result<Dataset> {
    sample_do(spec, &DoAssignment::new(), n, seed)
}

/// Sample with the nodes in `assignment` held at fixed values; their
/// mechanisms and noises are cut, descendants are generated normally.
pub fn sample_do(spec: &ScmSpec, assignment: &DoAssignment, n: usize, seed: u64) -> Result<Dataset> {
    if n == 0 {
        return Err(Error::Config("sample count must be at least 1".into()));
    }
    let p = spec.n_nodes();
    if let Some((&v, _)) = assignment.iter().find(|(&v, _)| v >= p) {
        return Err(Error::Config(format!("do-assignment names node {v}, graph has {p}")));
    }
    let order = crate::graph::topological_order(p, &spec.dag.edges())?;
    let mut columns: Vec<Vec<f64>> = vec![Vec::new(); p];
    for v in order {
        let noise = spec.noises[v].draw(&mut rng::stream(seed, v as u64), n);
        if let Some(&value) = assignment.get(&v) {
            columns[v] = vec![value; n];
            continue;
        }
        let mech = &spec.mechanisms[v];
        let parents: Vec<(&[f64], f64)> = mech
            .coefficients
            .iter()
            .map(|(&pa, &c)| (columns[pa].as_slice(), c))
            .collect();
        let col: Vec<f64> = (0..n).map(|i| mech.apply(&parents, i) + noise[i]).collect();
        columns[v] = col;
    }
    let kinds = (0..p)
        .map(|v| {
            let root_bernoulli = spec.dag.parents(v).is_empty()
                && matches!(spec.noises[v], NoiseSpec::Bernoulli { .. });
            if root_bernoulli && !assignment.contains_key(&v) {
                ColumnKind::Discrete
            } else {
                ColumnKind::Continuous
            }
        })
        .collect();
    Dataset::with_kinds(spec.dag.names().to_vec(), kinds, columns)
}

/// The five three-variable structures.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum Structure {
    /// Collider `X -> Y <- Z`.
    A,
    /// Chain `X -> Z -> Y`.
    B,
    /// Confounder `X -> Z`, `X -> Y`, `Z -> Y`.
    C,
    /// `Z -> Y` with `X` isolated.
    D,
    /// Fork `Z -> X`, `Z -> Y`.
    E,
}

impl Structure {
    pub const ALL: [Structure; 5] = [Self::A, Self::B, Self::C, Self::D, Self::E];
}

impl FromStr for Structure {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s.trim().to_ascii_uppercase().as_str() {
            "A" => Ok(Self::A),
            "B" => Ok(Self::B),
            "C" => Ok(Self::C),
            "D" => Ok(Self::D),
            "E" => Ok(Self::E),
            other => Err(Error::Config(format!("unknown structure `{other}` (expected A-E)"))),
        }
    }
}

impl fmt::Display for Structure {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{self:?}")
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum FunctionForm {
    Linear,
    Nonlinear,
}

impl FunctionForm {
    pub fn mechanism(self) -> MechanismKind {
        match self {
            Self::Linear => MechanismKind::Linear,
            Self::Nonlinear => MechanismKind::QuadraticMonomial,
        }
    }
}

impl FromStr for FunctionForm {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s.trim().to_ascii_lowercase().as_str() {
            "linear" => Ok(Self::Linear),
            "nonlinear" => Ok(Self::Nonlinear),
            other => Err(Error::Config(format!("unknown form `{other}`"))),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum NoiseFamily {
    Uniform,
    Gaussian,
}

impl NoiseFamily {
    pub fn spec(self) -> NoiseSpec {
        match self {
            Self::Uniform => NoiseSpec::Uniform01,
            Self::Gaussian => NoiseSpec::Gaussian { mean: 0.0, sd: 1.0 },
        }
    }
}

impl FromStr for NoiseFamily {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s.trim().to_ascii_lowercase().as_str() {
            "uniform" => Ok(Self::Uniform),
            "gaussian" => Ok(Self::Gaussian),
            other => Err(Error::Config(format!("unknown noise family `{other}`"))),
        }
    }
}

/// Node order of the three-variable benchmarks.
pub const BENCH_X: usize = 0;
pub const BENCH_Z: usize = 1;
pub const BENCH_Y: usize = 2;

/// Three-variable benchmark over nodes `[X, Z, Y]` with `Y` the target and
/// uniform `[0, 1]` noise. The collider weighs `X` by 1 and `Z` by 1.5; every
/// other coefficient is 1.
pub fn make_benchmark(structure: Structure, form: FunctionForm) -> ScmSpec {
    let (x, z, y) = (BENCH_X, BENCH_Z, BENCH_Y);
    let edges: Vec<((usize, usize), f64)> = match structure {
        Structure::A => vec![((x, y), 1.0), ((z, y), 1.5)],
        Structure::B => vec![((x, z), 1.0), ((z, y), 1.0)],
        Structure::C => vec![((x, z), 1.0), ((x, y), 1.0), ((z, y), 1.0)],
        Structure::D => vec![((z, y), 1.0)],
        Structure::E => vec![((z, x), 1.0), ((z, y), 1.0)],
    };
    let names = vec!["X".to_string(), "Z".to_string(), "Y".to_string()];
    let dag = Dag::new(names, &edges.iter().map(|e| e.0).collect::<Vec<_>>())
        .expect("benchmark graphs are acyclic");
    let coefs = edges.into_iter().collect();
    ScmSpec::uniform(dag, form.mechanism(), &coefs, NoiseSpec::Uniform01)
        .and_then(|s| s.with_target(y))
        .expect("benchmark specs are valid")
}

/// Topology of the eight-variable benchmark, as shipped in `config/eight_var.json`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct EightVarConfig {
    pub version: u32,
    pub nodes: Vec<String>,
    pub target: String,
    pub edges: Vec<(String, String)>,
    /// Edge coefficients are drawn uniformly from this range per seed.
    pub coefficient_range: (f64, f64),
}

const EIGHT_VAR_DEFAULT: &str = include_str!("../config/eight_var.json");

impl Default for EightVarConfig {
    fn default() -> Self {
        serde_json::from_str(EIGHT_VAR_DEFAULT).expect("shipped eight-variable config parses")
    }
}

impl EightVarConfig {
    pub fn from_json(s: &str) -> Result<Self> {
        Ok(serde_json::from_str(s)?)
    }

    fn index(&self, name: &str) -> Result<usize> {
        self.nodes
            .iter()
            .position(|n| n == name)
            .ok_or_else(|| Error::Config(format!("unknown node `{name}`")))
    }

    pub fn dag(&self) -> Result<Dag> {
        let edges = self
            .edges
            .iter()
            .map(|(a, b)| Ok((self.index(a)?, self.index(b)?)))
            .collect::<Result<Vec<_>>>()?;
        Dag::new(self.nodes.clone(), &edges)
    }

    /// Builds the spec for one seed; the seed only drives the coefficient draw.
    pub fn build(&self, form: FunctionForm, noise: NoiseFamily, seed: u64) -> Result<ScmSpec> {
        let dag = self.dag()?;
        let target = self.index(&self.target)?;
        if dag.out_degree(target) != 0 {
            return Err(Error::Config("benchmark target must be a sink".into()));
        }
        let (lo, hi) = self.coefficient_range;
        if !(lo <= hi) || !lo.is_finite() || !hi.is_finite() {
            return Err(Error::Config(format!("bad coefficient range ({lo}, {hi})")));
        }
        let mut r = rng::stream(seed, 0xC0EF);
        let coefs: BTreeMap<(usize, usize), f64> =
            dag.edges().into_iter().map(|e| (e, r.random_range(lo..=hi))).collect();
        ScmSpec::uniform(dag, form.mechanism(), &coefs, noise.spec())?.with_target(target)
    }
}

/// The shipped eight-variable benchmark.
pub fn make_eight_var(form: FunctionForm, noise: NoiseFamily, seed: u64) -> ScmSpec {
    EightVarConfig::default()
        .build(form, noise, seed)
        .expect("shipped eight-variable config is valid")
}

/// Serialized form of an [`ScmSpec`].
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ScmJson {
    pub nodes: Vec<String>,
    pub edges: Vec<EdgeJson>,
    pub mechanisms: Vec<MechanismKind>,
    pub noises: Vec<NoiseSpec>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub target: Option<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct EdgeJson {
    pub from: usize,
    pub to: usize,
    pub coef: f64,
}

impl From<&ScmSpec> for ScmJson {
    fn from(s: &ScmSpec) -> Self {
        Self {
            nodes: s.dag.names().to_vec(),
            edges: s
                .dag
                .edges()
                .into_iter()
                .map(|(a, b)| EdgeJson {
                    from: a,
                    to: b,
                    coef: s.mechanisms[b].coefficients[&a],
                })
                .collect(),
            mechanisms: s.mechanisms.iter().map(|m| m.kind).collect(),
            noises: s.noises.clone(),
            target: s.target.map(|t| s.dag.names()[t].clone()),
        }
    }
}

impl ScmJson {
    pub fn to_spec(&self) -> Result<ScmSpec> {
        let dag = Dag::new(
            self.nodes.clone(),
            &self.edges.iter().map(|e| (e.from, e.to)).collect::<Vec<_>>(),
        )?;
        if self.mechanisms.len() != self.nodes.len() {
            return Err(Error::Config("one mechanism kind per node required".into()));
        }
        let mut mechanisms: Vec<Mechanism> = self
            .mechanisms
            .iter()
            .map(|&kind| Mechanism {
                kind,
                coefficients: BTreeMap::new(),
            })
            .collect();
        for e in &self.edges {
            mechanisms[e.to].coefficients.insert(e.from, e.coef);
        }
        let spec = ScmSpec::new(dag, mechanisms, self.noises.clone())?;
        match &self.target {
            Some(t) => {
                let idx = spec
                    .dag
                    .index_of(t)
                    .ok_or_else(|| Error::Config(format!("unknown target `{t}`")))?;
                spec.with_target(idx)
            }
            None => Ok(spec),
        }
    }
}

impl ScmSpec {
    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(&ScmJson::from(self)).expect("spec serializes")
    }

    pub fn from_json(s: &str) -> Result<Self> {
        serde_json::from_str::<ScmJson>(s)?.to_spec()
    }
}
