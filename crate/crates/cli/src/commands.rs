use crate::{
    Command, DemoArgs, DiscoverArgs, DiscoverOn, DiscoveryFlags, EvaluateArgs, ExplainArgs, Form, IdentificationArg,
    Noise, ReproduceArgs, SchemeArg, SimulateArgs,
};
use anyhow::{anyhow, Context, Result};
use cfx::data::{discretize, load_csv, load_kinds_sidecar, make_binary_target, save_csv, Dataset, Scheme};
use cfx::demo::{reversal_table, run_demo, write_reversal_csv, DemoConfig};
use cfx::discovery::{discover_with_prior, DiscoveredGraph, DiscoveryConfig, DiscoveryOutput, Method, PriorMode};
use cfx::eval::{
    evaluate, reproduce, summarize, write_summary_csv, write_table_two_csv, DiscoveryInput, ExperimentConfig,
    TableOutput,
};
use cfx::graph::{Dag, GraphJson};
use cfx::model::{fit_forest, load_labels_csv, Classifier, Forest, ForestConfig};
use cfx::scm::{make_benchmark, make_eight_var, sample, FunctionForm, NoiseFamily, ScmSpec, Structure};
use cfx::scoring::{explain_output, GraphRef, Identification, ScoreReport, Scorer, ScoringInput, ScoringOptions};
use serde::{Deserialize, Serialize};
use std::fs::{self, File};
use std::io::BufWriter;
use std::path::{Path, PathBuf};

/// Invalid invocation detected after parsing.
#[derive(Debug)]
pub struct Usage(pub String);

impl std::fmt::Display for Usage {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(&self.0)
    }
}

impl std::error::Error for Usage {}

fn usage(msg: impl Into<String>) -> anyhow::Error {
    Usage(msg.into()).into()
}

/// 2 for usage and configuration errors, 1 for everything else.
pub fn exit_code(e: &anyhow::Error) -> u8 {
    for cause in e.chain() {
        if cause.is::<Usage>() {
            return 2;
        }
        if let Some(err) = cause.downcast_ref::<cfx::Error>() {
            return match err {
                cfx::Error::Config(_)
                | cfx::Error::Parse { .. }
                | cfx::Error::UnsupportedModeForMethod { .. }
                | cfx::Error::SchemaMismatch(_) => 2,
                _ => 1,
            };
        }
    }
    1
}

pub fn run(cmd: Command) -> Result<()> {
    match cmd {
        Command::Simulate(a) => simulate(a),
        Command::Discover(a) => discover(a),
        Command::Explain(a) => explain(a),
        Command::Evaluate(a) => cmd_evaluate(a),
        Command::Reproduce(a) => cmd_reproduce(a),
        Command::DemoCredit(a) => demo(a),
    }
}

fn form(f: Form) -> FunctionForm {
    match f {
        Form::Linear => FunctionForm::Linear,
        Form::Nonlinear => FunctionForm::Nonlinear,
    }
}

fn create(path: &Path) -> Result<BufWriter<File>> {
    if let Some(dir) = path.parent().filter(|d| !d.as_os_str().is_empty()) {
        fs::create_dir_all(dir).with_context(|| format!("creating {}", dir.display()))?;
    }
    Ok(BufWriter::new(
        File::create(path).with_context(|| format!("creating {}", path.display()))?,
    ))
}

fn write_text(path: &Path, text: &str) -> Result<()> {
    if let Some(dir) = path.parent().filter(|d| !d.as_os_str().is_empty()) {
        fs::create_dir_all(dir)?;
    }
    fs::write(path, text).with_context(|| format!("writing {}", path.display()))
}

fn simulate(a: SimulateArgs) -> Result<()> {
    let spec: ScmSpec = match (&a.structure, &a.spec, a.eight_var) {
        (Some(s), None, false) => make_benchmark(s.parse::<Structure>()?, form(a.form)),
        (None, Some(p), false) => {
            let text = fs::read_to_string(p).with_context(|| format!("reading {}", p.display()))?;
            ScmSpec::from_json(&text)?
        }
        (None, None, true) => {
            let noise = match a.noise {
                Noise::Uniform => NoiseFamily::Uniform,
                Noise::Gaussian => NoiseFamily::Gaussian,
            };
            make_eight_var(form(a.form), noise, a.seed)
        }
        _ => return Err(usage("give exactly one of --structure, --spec or --eight-var")),
    };
    let data = sample(&spec, a.n, a.seed)?;
    if let Some(dir) = a.out.parent().filter(|d| !d.as_os_str().is_empty()) {
        fs::create_dir_all(dir)?;
    }
    save_csv(&data, &a.out)?;
    if let Some(p) = &a.spec_out {
        write_text(p, &spec.to_json())?;
    }
    println!("wrote {} rows x {} columns to {}", data.n_rows(), data.n_cols(), a.out.display());
    Ok(())
}

fn load_data(path: &Path, kinds: Option<&PathBuf>) -> Result<Dataset> {
    let mut d = load_csv(path).with_context(|| format!("loading {}", path.display()))?;
    if let Some(k) = kinds {
        d.apply_kinds(&load_kinds_sidecar(k)?)?;
    }
    Ok(d)
}

fn target_index(d: &Dataset, name: &str) -> Result<usize> {
    d.index_of(name)
        .ok_or_else(|| usage(format!("target column `{name}` not found")))
}

fn apply_flags(cfg: &mut DiscoveryConfig, f: &DiscoveryFlags) {
    if let Some(a) = f.alpha {
        cfg.ci.alpha = a;
    }
    if let Some(a) = f.hsic_alpha {
        cfg.resit.hsic.alpha = a;
    }
    if let Some(c) = f.extension_cap {
        cfg.extension_cap = c;
    }
}

fn discover(a: DiscoverArgs) -> Result<()> {
    let data = load_data(&a.data, a.kinds.as_ref())?;
    let target = target_index(&data, &a.target)?;
    let method: Method = a.method.parse()?;
    let mode: PriorMode = a.prior.parse()?;
    let mut cfg = DiscoveryConfig::default();
    apply_flags(&mut cfg, &a.flags);
    let out = discover_with_prior(method, mode, &data, target, &cfg)?;
    let json = match &out.graph {
        DiscoveredGraph::Dag(d) => d.to_json(),
        DiscoveredGraph::Pattern { pdag, .. } => pdag.to_json(),
        DiscoveredGraph::NoGraph => serde_json::to_string_pretty(&GraphJson {
            nodes: data.labels().to_vec(),
            directed: vec![],
            undirected: vec![],
        })?,
    };
    write_text(&a.out, &json)?;
    if let Some(p) = &a.extensions_out {
        let all: Vec<GraphJson> = out.dags().into_iter().map(GraphJson::from).collect();
        write_text(p, &serde_json::to_string_pretty(&all)?)?;
    }
    print_discovery(&out);
    Ok(())
}

fn print_discovery(out: &DiscoveryOutput) {
    let dags = out.dags();
    println!("method {} prior {}: {} candidate DAG(s)", out.method.id(), out.mode, dags.len());
    if let Some(d) = dags.first() {
        for (a, b) in d.edges() {
            println!("  {} -> {}", d.names()[a], d.names()[b]);
        }
    }
    for n in &out.diagnostics.notes {
        println!("  note: {n}");
    }
}

/// Settings of `explain`; flags fill it, a config file overrides it.
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
struct ExplainSettings {
    bins: usize,
    scheme: Scheme,
    seed: u64,
    forest: ForestConfig,
    discovery: DiscoveryConfig,
    scoring: ScoringOptions,
    discover_on: DiscoveryInput,
}

impl Default for ExplainSettings {
    fn default() -> Self {
        Self {
            bins: 10,
            scheme: Scheme::EqualWidth,
            seed: 0,
            forest: ForestConfig::default(),
            discovery: DiscoveryConfig::default(),
            scoring: ScoringOptions::default(),
            discover_on: DiscoveryInput::Raw,
        }
    }
}

fn overlay(base: &mut serde_json::Value, top: serde_json::Value) {
    match (base, top) {
        (serde_json::Value::Object(b), serde_json::Value::Object(t)) => {
            for (k, v) in t {
                overlay(b.entry(k).or_insert(serde_json::Value::Null), v);
            }
        }
        (b, t) => *b = t,
    }
}

fn explain_settings(a: &ExplainArgs) -> Result<ExplainSettings> {
    let mut s = ExplainSettings::default();
    if let Some(b) = a.bins {
        s.bins = b;
    }
    if let Some(sc) = a.scheme {
        s.scheme = match sc {
            SchemeArg::EqualWidth => Scheme::EqualWidth,
            SchemeArg::EqualFrequency => Scheme::EqualFrequency,
        };
    }
    if let Some(seed) = a.seed {
        s.seed = seed;
        s.forest.seed = seed;
    }
    if let Some(i) = a.identification {
        s.scoring.identification = match i {
            IdentificationArg::Full => Identification::Full,
            IdentificationArg::Backdoor => Identification::Backdoor,
        };
    }
    if let Some(d) = a.discover_on {
        s.discover_on = match d {
            DiscoverOn::Raw => DiscoveryInput::Raw,
            DiscoverOn::Codes => DiscoveryInput::Codes,
        };
    }
    apply_flags(&mut s.discovery, &a.flags);
    if let Some(p) = &a.config {
        let text = fs::read_to_string(p).with_context(|| format!("reading {}", p.display()))?;
        let top: serde_json::Value = serde_json::from_str(&text).map_err(cfx::Error::from)?;
        let mut base = serde_json::to_value(&s)?;
        overlay(&mut base, top);
        s = serde_json::from_value(base).map_err(cfx::Error::from)?;
    }
    if s.bins < 2 {
        return Err(usage("--bins must be at least 2"));
    }
    s.forest.validate()?;
    s.discovery.validate()?;
    Ok(s)
}

/// Report file for extension `i` of `n`: the path itself when there is one.
fn numbered(path: &Path, i: usize, n: usize) -> PathBuf {
    if n == 1 {
        return path.to_path_buf();
    }
    let stem = path.file_stem().and_then(|s| s.to_str()).unwrap_or("report");
    let ext = path.extension().and_then(|s| s.to_str()).unwrap_or("csv");
    path.with_file_name(format!("{stem}.{i}.{ext}"))
}

fn print_reports(reports: &[ScoreReport]) {
    for (i, r) in reports.iter().enumerate() {
        if reports.len() > 1 {
            println!("extension {i}");
        }
        println!("{:<24} {:>10}", "variable", "maxNesuf");
        for v in &r.variables {
            let m = v.max_nesuf.map_or("-".to_string(), |m| format!("{m:.4}"));
            println!("{:<24} {:>10}", v.name, m);
        }
        for w in &r.warnings {
            println!("warning: {w}");
        }
    }
}

fn explain(a: ExplainArgs) -> Result<()> {
    let s = explain_settings(&a)?;
    let raw = load_data(&a.data, a.kinds.as_ref())?;
    let target = target_index(&raw, &a.target)?;
    let data = discretize(&raw, s.scheme, s.bins)?;
    let keep: Vec<usize> = (0..data.n_cols()).filter(|&j| j != target).collect();
    let (labels, forest): (Vec<u8>, Option<Forest>) = match &a.labels_csv {
        Some(p) => (load_labels_csv(p)?, None),
        None => {
            let truth = make_binary_target(raw.column(target))?;
            let features = data.select(&keep);
            let f = fit_forest(&features, &truth, &s.forest)?;
            (f.predict(&features)?, Some(f))
        }
    };
    let clf = forest.as_ref().map(|f| f as &dyn Classifier);
    let input = ScoringInput::new(&data, target, &labels, clf)?;

    let reports: Vec<ScoreReport> = if a.no_graph {
        vec![Scorer::new(input, s.scoring)?.explain(GraphRef::NoGraph)?]
    } else if let Some(p) = &a.graph {
        let text = fs::read_to_string(p).with_context(|| format!("reading {}", p.display()))?;
        let dag = Dag::from_json(&text)?;
        if dag.names() != data.labels() {
            return Err(usage(format!(
                "graph nodes {:?} do not match data columns {:?}",
                dag.names(),
                data.labels()
            )));
        }
        vec![Scorer::new(input, s.scoring)?.explain(GraphRef::Dag(&dag))?]
    } else if let Some(m) = &a.method {
        let method: Method = m.parse()?;
        let mode: PriorMode = a.prior.parse()?;
        let disc_data = match s.discover_on {
            DiscoveryInput::Raw => raw.clone(),
            DiscoveryInput::Codes => data.to_numeric(),
        };
        let out = discover_with_prior(method, mode, &disc_data, target, &s.discovery)?;
        print_discovery(&out);
        explain_output(&input, &out, &s.scoring)?
    } else {
        return Err(usage("give one of --graph, --method or --no-graph"));
    };

    let json = if reports.len() == 1 {
        reports[0].to_json()
    } else {
        serde_json::to_string_pretty(&reports)?
    };
    write_text(&a.out_json, &json)?;
    if let Some(p) = &a.out_csv {
        for (i, r) in reports.iter().enumerate() {
            r.write_csv(create(&numbered(p, i, reports.len()))?)?;
        }
    }
    print_reports(&reports);
    Ok(())
}

fn cmd_evaluate(a: EvaluateArgs) -> Result<()> {
    let text = fs::read_to_string(&a.config).with_context(|| format!("reading {}", a.config.display()))?;
    let cfg = ExperimentConfig::from_json(&text)?;
    let trials = evaluate(&cfg)?;
    let summary = summarize(&trials);
    write_summary_csv(&summary, create(&a.out)?)?;
    if let Some(p) = &a.trials_out {
        write_text(p, &serde_json::to_string_pretty(&trials)?)?;
    }
    for c in &summary.cells {
        let spr = c.spr_mean.map_or("-".to_string(), |s| format!("{s:.4}"));
        println!("{:<24} MAE {:.4} ± {:.4}  SPR {spr}  N {}", c.cell.to_string(), c.mae_mean, c.mae_stderr, c.n_trials);
    }
    Ok(())
}

fn cmd_reproduce(a: ReproduceArgs) -> Result<()> {
    let tables = a
        .tables
        .iter()
        .map(|t| t.parse().map_err(anyhow::Error::from))
        .collect::<Result<Vec<cfx::eval::CannedTable>>>()?;
    if a.trials == 0 {
        return Err(usage("--trials must be positive"));
    }
    fs::create_dir_all(&a.out_dir)?;
    for (t, out) in reproduce(&tables, a.trials, a.seed)? {
        let path = a.out_dir.join(format!("table{}.csv", t.number()));
        match &out {
            TableOutput::Structures(rows) => write_table_two_csv(rows, create(&path)?)?,
            TableOutput::Metrics(s) => write_summary_csv(s, create(&path)?)?,
        }
        println!("table {} -> {}", t.number(), path.display());
    }
    Ok(())
}

fn demo(a: DemoArgs) -> Result<()> {
    if a.n < 100 {
        return Err(usage("--n must be at least 100"));
    }
    let cfg = DemoConfig {
        n: a.n,
        seed: a.seed,
        ..Default::default()
    };
    let out = run_demo(&cfg).map_err(|e| anyhow!(e)).context("demo pipeline")?;
    fs::create_dir_all(&a.out_dir)?;
    write_text(&a.out_dir.join("graph.json"), &out.estimated.to_json())?;
    write_text(&a.out_dir.join("true_graph.json"), &out.true_dag.to_json())?;
    write_text(&a.out_dir.join("report.json"), &out.report.to_json())?;
    write_text(&a.out_dir.join("true_report.json"), &out.true_report.to_json())?;
    out.report.write_csv(create(&a.out_dir.join("report.csv"))?)?;
    write_reversal_csv(&reversal_table(&out.report), create(&a.out_dir.join("reversal.csv"))?)?;
    save_csv(&out.raw, a.out_dir.join("data.csv"))?;
    let summary = serde_json::json!({
        "seed": a.seed,
        "n": a.n,
        "mae_vs_true_graph": out.mae,
        "estimated_edges": out.estimated.edges().iter().map(|&(x, y)| [out.estimated.names()[x].clone(), out.estimated.names()[y].clone()]).collect::<Vec<_>>(),
    });
    write_text(&a.out_dir.join("summary.json"), &serde_json::to_string_pretty(&summary)?)?;
    print_reports(std::slice::from_ref(&out.report));
    println!("MAE against true-graph scoring: {:.4}", out.mae);
    Ok(())
}
