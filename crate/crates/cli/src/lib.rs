//! Config parsing, command execution and output writing for `graphflow`.

use std::fmt;
use std::fs;
use std::io::{BufWriter, Write};
use std::path::{Path, PathBuf};

use graphflow_core::dynamics::{
    brute_force_minimize, fmt_f64, integrate, write_diagnostics_json, write_trajectory_csv, IntegrateOptions, Outcome,
    Sampling, Trajectory,
};
use graphflow_core::graph::GraphDoc;
use graphflow_core::kernels::{check_aggregation_conditions, check_segregation_condition, evaluate, KernelSpecs};
use graphflow_core::scenarios::{random_initial_state, InitialRecipe, ScenarioRequest};
use graphflow_core::twopoint::{phase_portrait, Geometry};
use graphflow_core::{DynamicsParams, FiniteGraph, KernelSet, SpeciesState, TwoPointProblem};
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Command {
    Simulate,
    Classify,
    Portrait,
    Minimize,
    Check,
    Scenario,
}

impl Command {
    pub fn name(self) -> &'static str {
        match self {
            Command::Simulate => "simulate",
            Command::Classify => "classify",
            Command::Portrait => "portrait",
            Command::Minimize => "minimize",
            Command::Check => "check",
            Command::Scenario => "scenario",
        }
    }
}

/// Output sampling: at most one of the three may be set; default every step.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct OutputSpec {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub every: Option<u64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub interval: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub times: Option<Vec<f64>>,
}

/// A single run, as read from a JSON file. Which sections are required
/// depends on the command.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub command: Option<Command>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub graph: Option<GraphDoc>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub kernels: Option<KernelSpecs>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub params: Option<DynamicsParams>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub initial: Option<InitialRecipe>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub output: Option<OutputSpec>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub scenario: Option<ScenarioRequest>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub two_point: Option<TwoPointProblem>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub grid_n: Option<usize>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub resolution: Option<u32>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub seed: Option<u64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub out: Option<PathBuf>,
}

/// Exit status classes.
#[derive(Debug)]
pub enum CliError {
    /// Bad or inconsistent configuration; nothing has been written. Exit 1.
    Config(String),
    /// The numerics gave up; partial outputs may exist. Exit 2.
    Numerical(String),
    /// File system trouble while writing outputs. Exit 1.
    Io(String),
}

impl CliError {
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Config(_) | CliError::Io(_) => 1,
            CliError::Numerical(_) => 2,
        }
    }
}

impl fmt::Display for CliError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            CliError::Config(m) => write!(f, "config error: {m}"),
            CliError::Numerical(m) => write!(f, "numerical error: {m}"),
            CliError::Io(m) => write!(f, "output error: {m}"),
        }
    }
}

impl std::error::Error for CliError {}

fn config_err(e: impl fmt::Display) -> CliError {
    CliError::Config(e.to_string())
}

fn core_err(e: graphflow_core::Error) -> CliError {
    if e.is_numerical() {
        CliError::Numerical(e.to_string())
    } else {
        CliError::Config(e.to_string())
    }
}

fn io_err(e: impl fmt::Display) -> CliError {
    CliError::Io(e.to_string())
}

/// Parses a config, reporting syntax and schema errors with line and column.
pub fn parse_config(text: &str, origin: &str) -> Result<RunConfig, CliError> {
    serde_json::from_str(text).map_err(|e| {
        CliError::Config(format!("{origin}:{}:{}: {e}", e.line(), e.column()))
    })
}

pub fn load_config(path: &Path) -> Result<RunConfig, CliError> {
    let text = fs::read_to_string(path).map_err(|e| CliError::Config(format!("{}: {e}", path.display())))?;
    let mut config = parse_config(&text, &path.display().to_string())?;
    if let Some(k) = &mut config.kernels {
        let base = path.parent().unwrap_or(Path::new("."));
        k.k11.resolve_paths(base);
        k.k22.resolve_paths(base);
        k.k12.resolve_paths(base);
    }
    Ok(config)
}

/// Config serialised with sorted keys and no whitespace.
pub fn canonical_json(config: &RunConfig) -> String {
    let value = serde_json::to_value(config).expect("configs are plain data");
    serde_json::to_string(&value).expect("values always serialise")
}

/// SHA-256 over `blob {len}\0{canonical json}`, the git object layout.
pub fn content_hash(config: &RunConfig) -> String {
    let body = canonical_json(config);
    let mut h = Sha256::new();
    h.update(format!("blob {}\0", body.len()).as_bytes());
    h.update(body.as_bytes());
    hex::encode(h.finalize())
}

/// Files produced by a command, written only after everything validated.
struct Outputs {
    files: Vec<(String, Vec<u8>)>,
}

impl Outputs {
    fn new() -> Self {
        Self { files: Vec::new() }
    }

    fn add(&mut self, name: &str, bytes: Vec<u8>) {
        self.files.push((name.to_string(), bytes));
    }

    fn add_json<T: Serialize>(&mut self, name: &str, value: &T) {
        let mut bytes = serde_json::to_vec_pretty(value).expect("outputs are plain data");
        bytes.push(b'\n');
        self.add(name, bytes);
    }

    fn write(mut self, dir: &Path, command: Command, config: &RunConfig, extra: serde_json::Value) -> Result<Vec<PathBuf>, CliError> {
        fs::create_dir_all(dir).map_err(io_err)?;
        let mut names: Vec<String> = self.files.iter().map(|f| f.0.clone()).collect();
        names.push("manifest.json".into());
        let manifest = serde_json::json!({
            "tool": "graphflow",
            "version": env!("CARGO_PKG_VERSION"),
            "command": command.name(),
            "seed": config.seed.unwrap_or(0),
            "config_hash": content_hash(config),
            "config": config,
            "outputs": names,
            "details": extra,
        });
        self.add_json("manifest.json", &manifest);
        let mut written = Vec::new();
        for (name, bytes) in &self.files {
            let path = dir.join(name);
            let mut f = BufWriter::new(fs::File::create(&path).map_err(io_err)?);
            f.write_all(bytes).map_err(io_err)?;
            f.flush().map_err(io_err)?;
            written.push(path);
        }
        Ok(written)
    }
}

pub struct RunSummary {
    pub files: Vec<PathBuf>,
    pub message: String,
    /// Set when the run finished but the integrator aborted.
    pub aborted: Option<String>,
}

fn require<T: Clone>(field: &Option<T>, name: &str, command: Command) -> Result<T, CliError> {
    field
        .clone()
        .ok_or_else(|| CliError::Config(format!("`{name}` is required for `{}`", command.name())))
}

fn sampling(output: &Option<OutputSpec>) -> Result<Sampling, CliError> {
    let spec = output.clone().unwrap_or_default();
    match (spec.every, spec.interval, spec.times) {
        (None, None, None) => Ok(Sampling::Every(1)),
        (Some(n), None, None) if n > 0 => Ok(Sampling::Every(n)),
        (None, Some(h), None) if h > 0.0 => Ok(Sampling::Interval(h)),
        (None, None, Some(ts)) => Ok(Sampling::Times(ts)),
        _ => Err(config_err(
            "`output` takes exactly one of `every` (> 0), `interval` (> 0) or `times`",
        )),
    }
}

struct Prepared {
    graph: FiniteGraph,
    kernels: KernelSet,
    params: DynamicsParams,
    state: SpeciesState,
}

fn initial_state(recipe: &InitialRecipe, graph: &FiniteGraph, seed: Option<u64>) -> Result<SpeciesState, CliError> {
    match recipe {
        InitialRecipe::Masses { m1, m2 } => SpeciesState::from_masses(graph, m1, m2).map_err(core_err),
        InitialRecipe::Random { seed: s } => Ok(random_initial_state(graph, seed.unwrap_or(*s))),
    }
}

fn prepare_explicit(config: &RunConfig, command: Command) -> Result<Prepared, CliError> {
    let graph = FiniteGraph::from_doc(&require(&config.graph, "graph", command)?).map_err(core_err)?;
    let kernels = evaluate(&require(&config.kernels, "kernels", command)?, &graph).map_err(core_err)?;
    let params = require(&config.params, "params", command)?;
    params.validate().map_err(core_err)?;
    let recipe = require(&config.initial, "initial", command)?;
    let state = initial_state(&recipe, &graph, config.seed)?;
    Ok(Prepared {
        graph,
        kernels,
        params,
        state,
    })
}

fn simulation_outputs(prepared: &Prepared, config: &RunConfig, outputs: &mut Outputs) -> Result<Trajectory, CliError> {
    let options = IntegrateOptions::sampled(sampling(&config.output)?);
    let tr = integrate(&prepared.state, &prepared.graph, &prepared.kernels, &prepared.params, &options)
        .map_err(core_err)?;
    let mut csv = Vec::new();
    write_trajectory_csv(&mut csv, &tr, &prepared.graph).map_err(io_err)?;
    outputs.add("trajectory.csv", csv);
    let mut diag = Vec::new();
    write_diagnostics_json(&mut diag, &tr).map_err(io_err)?;
    outputs.add("diagnostics.json", diag);
    Ok(tr)
}

fn aborted(tr: &Trajectory) -> Option<String> {
    match &tr.outcome {
        Outcome::Aborted { reason } => Some(reason.clone()),
        _ => None,
    }
}

/// Runs one command and writes its outputs into `out`.
pub fn execute(command: Command, config: &RunConfig, out: &Path) -> Result<RunSummary, CliError> {
    if let Some(c) = config.command {
        if c != command {
            return Err(CliError::Config(format!(
                "config is for `{}` but `{}` was requested",
                c.name(),
                command.name()
            )));
        }
    }
    let mut outputs = Outputs::new();
    let mut extra = serde_json::Value::Null;
    let (message, abort) = match command {
        Command::Simulate => {
            let prepared = match (&config.scenario, &config.graph) {
                (Some(_), Some(_)) => return Err(config_err("give either `scenario` or `graph`, not both")),
                (Some(req), None) => {
                    let s = req.build(config.seed.unwrap_or(0)).map_err(core_err)?;
                    let mut params = s.params;
                    if let Some(p) = config.params {
                        params = p;
                    }
                    Prepared {
                        kernels: s.kernel_set().map_err(core_err)?,
                        state: s.initial_state().map_err(core_err)?,
                        graph: s.graph,
                        params,
                    }
                }
                (None, _) => prepare_explicit(config, command)?,
            };
            let tr = simulation_outputs(&prepared, config, &mut outputs)?;
            let last = tr.last();
            (
                format!("{:?} after {} steps at t = {}, energy {}", tr.outcome, tr.steps, last.t, last.energy),
                aborted(&tr),
            )
        }
        Command::Scenario => {
            let req = require(&config.scenario, "scenario", command)?;
            if config.graph.is_some() || config.kernels.is_some() || config.initial.is_some() {
                return Err(config_err("`scenario` runs take no `graph`, `kernels` or `initial`"));
            }
            let mut s = req.build(config.seed.unwrap_or(0)).map_err(core_err)?;
            if let Some(p) = config.params {
                p.validate().map_err(core_err)?;
                s.params = p;
            }
            let prepared = Prepared {
                kernels: s.kernel_set().map_err(core_err)?,
                state: s.initial_state().map_err(core_err)?,
                graph: s.graph.clone(),
                params: s.params,
            };
            let oracles: Vec<_> = s
                .evaluate_oracles()
                .map_err(core_err)?
                .into_iter()
                .map(|(o, got)| serde_json::json!({"oracle": o, "computed": got, "error": (o.value() - got).abs()}))
                .collect();
            let tr = simulation_outputs(&prepared, config, &mut outputs)?;
            let checks = s.check(&tr);
            let held = checks.iter().filter(|c| c.holds).count();
            outputs.add_json("checks.json", &serde_json::json!({"oracles": oracles, "expectations": checks}));
            extra = s.describe();
            (
                format!("{}: {:?} after {} steps, {held}/{} expectations hold", s.name, tr.outcome, tr.steps, checks.len()),
                aborted(&tr),
            )
        }
        Command::Classify => {
            let problem = require(&config.two_point, "two_point", command)?;
            let classes = problem.classify().map_err(core_err)?;
            outputs.add_json("classification.json", &classes);
            let tags: Vec<&str> = classes.entries.iter().map(|e| e.tag.name()).collect();
            (format!("{} entries: {}", tags.len(), tags.join(", ")), None)
        }
        Command::Portrait => {
            let problem = require(&config.two_point, "two_point", command)?;
            let grid_n = require(&config.grid_n, "grid_n", command)?;
            let portrait = phase_portrait(&problem, grid_n).map_err(core_err)?;
            let mut csv = String::from("x,y,energy,dxdt,dydt\n");
            for r in &portrait.records {
                csv.push_str(&format!(
                    "{},{},{},{},{}\n",
                    fmt_f64(r.x),
                    fmt_f64(r.y),
                    fmt_f64(r.energy),
                    fmt_f64(r.dxdt),
                    fmt_f64(r.dydt)
                ));
            }
            outputs.add("portrait.csv", csv.into_bytes());
            let mut states = String::from("tag,stability,kind,x,y,x_end,y_end,energy\n");
            for e in &portrait.classification.entries {
                let stability = serde_json::to_value(e.stability).expect("plain enum");
                let stability = stability.as_str().unwrap_or_default();
                match &e.geometry {
                    Geometry::Points(ps) => {
                        for [x, y] in ps {
                            states.push_str(&format!(
                                "{},{stability},point,{},{},,,{}\n",
                                e.tag.name(),
                                fmt_f64(*x),
                                fmt_f64(*y),
                                fmt_f64(e.energy)
                            ));
                        }
                    }
                    Geometry::Segments(segs) => {
                        for [a, b] in segs {
                            states.push_str(&format!(
                                "{},{stability},segment,{},{},{},{},{}\n",
                                e.tag.name(),
                                fmt_f64(a[0]),
                                fmt_f64(a[1]),
                                fmt_f64(b[0]),
                                fmt_f64(b[1]),
                                fmt_f64(e.energy)
                            ));
                        }
                    }
                }
            }
            outputs.add("states.csv", states.into_bytes());
            (format!("{} grid nodes", portrait.records.len()), None)
        }
        Command::Minimize => {
            let graph = FiniteGraph::from_doc(&require(&config.graph, "graph", command)?).map_err(core_err)?;
            let kernels = evaluate(&require(&config.kernels, "kernels", command)?, &graph).map_err(core_err)?;
            let resolution = require(&config.resolution, "resolution", command)?;
            let min = brute_force_minimize(&kernels, &graph, resolution).map_err(core_err)?;
            outputs.add_json(
                "minimizer.json",
                &serde_json::json!({
                    "energy": min.energy,
                    "m1": min.masses[0],
                    "m2": min.masses[1],
                    "u": min.state.u().outer_iter().map(|r| r.to_vec()).collect::<Vec<_>>(),
                    "candidates": min.candidates.to_string(),
                    "resolution": resolution,
                }),
            );
            (format!("energy {} over {} candidates", min.energy, min.candidates), None)
        }
        Command::Check => {
            let graph = FiniteGraph::from_doc(&require(&config.graph, "graph", command)?).map_err(core_err)?;
            let kernels = evaluate(&require(&config.kernels, "kernels", command)?, &graph).map_err(core_err)?;
            let agg = check_aggregation_conditions(&kernels);
            let seg = check_segregation_condition(&kernels);
            outputs.add_json("check.json", &serde_json::json!({"aggregation": agg, "segregation": seg}));
            (
                format!(
                    "case a {}, case b {:?}, case c {}, segregation {}",
                    agg.case_a, agg.case_b, agg.case_c, seg.holds
                ),
                None,
            )
        }
    };
    let files = outputs.write(out, command, config, extra)?;
    Ok(RunSummary {
        files,
        message,
        aborted: abort,
    })
}
