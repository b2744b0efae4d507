//! `qcad`: batch driver for circuit generation, correction placement,
//! mapping, simulation and reporting. Stages hand off through files.
//!
//! Exit codes: 0 ok, 1 I/O, 2 parse or usage, 3 correction placement,
//! 4 mapping, 5 simulation.

mod output;
mod run;

use clap::{Args, Parser, Subcommand};
use output::{emit, Stamp};
use qcad_core::adders::{gen_adder, AdderKind, AdderSpec};
use qcad_core::circuit::{decompose_toffoli, emit_netlist, parse_netlist};
use qcad_core::datapath::{DatapathConfig, DatapathKind};
use qcad_core::errorsim::{gate_trace, mc_run, AncillaQuality};
use qcad_core::mapper::{d_sweep, MapError};
use qcad_core::metrics::{emit_report, Metrics, ReportFormat};
use qcad_core::pipeline::{adcr_optimal, evaluate, place, PipelineError, QecMode, SimSettings};
use qcad_core::qec::{apply_placement, table_op_count, EDistConfig, QecError};
use qcad_core::randgen::{gen_random, RandSpec};
use qcad_core::shor::{shor_sweep, ShorError, ShorParams};
use qcad_core::tech::{ErrorSet, Tech, TechError};
use qcad_core::Circuit;
use serde::{Deserialize, Serialize};
use std::path::{Path, PathBuf};
use std::process::ExitCode;
use thiserror::Error;

pub const TECH_ENV: &str = "QCAD_TECH_FILE";

#[derive(Debug, Error)]
pub enum CliError {
    #[error("{0}")]
    Parse(String),
    #[error(transparent)]
    Qec(#[from] QecError),
    #[error(transparent)]
    Map(#[from] MapError),
    #[error("simulation: {0}")]
    Sim(String),
    #[error("{path}: {source}")]
    Io { path: String, source: std::io::Error },
}

impl CliError {
    pub fn code(&self) -> u8 {
        match self {
            CliError::Io { .. } => 1,
            CliError::Parse(_) => 2,
            CliError::Qec(_) => 3,
            CliError::Map(_) => 4,
            CliError::Sim(_) => 5,
        }
    }

    fn io(path: &Path, source: std::io::Error) -> Self {
        CliError::Io {
            path: path.display().to_string(),
            source,
        }
    }
}

impl From<TechError> for CliError {
    fn from(e: TechError) -> Self {
        CliError::Parse(e.to_string())
    }
}

impl From<PipelineError> for CliError {
    fn from(e: PipelineError) -> Self {
        match e {
            PipelineError::Qec(e) => e.into(),
            PipelineError::Map(e) => e.into(),
        }
    }
}

impl From<ShorError> for CliError {
    fn from(e: ShorError) -> Self {
        match e {
            ShorError::Qec(e) => e.into(),
            ShorError::Map(e) => e.into(),
            other => CliError::Parse(other.to_string()),
        }
    }
}

#[derive(Parser, Debug)]
#[command(name = "qcad", version, about = "Fault-tolerant quantum circuit CAD flow")]
struct Cli {
    #[command(subcommand)]
    cmd: Command,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Random circuit with a target Rent exponent.
    GenRandom(GenRandomArgs),
    /// Insert error corrections into a netlist.
    OptimizeQec(OptimizeArgs),
    /// Map a netlist onto a datapath and report its metrics.
    Map(MapArgs),
    /// Monte Carlo success probability of a netlist.
    Simulate(SimulateArgs),
    /// Ripple-carry or carry-lookahead adder netlist.
    Adders(AdderArgs),
    /// Resource estimate for factoring an n-bit number.
    Shor(ShorArgs),
    /// Merge metrics files into one JSON or CSV report.
    Report(ReportArgs),
    /// Whole flow: generate or read, correct, map, simulate, report.
    Run(run::RunArgs),
}

#[derive(Args, Debug, Clone, Serialize)]
pub struct TechArgs {
    /// Physical error rates: 1 or 2.
    #[arg(long, default_value = "1", value_parser = ["1", "2"])]
    pub error_set: String,
}

impl TechArgs {
    /// Defaults for the chosen error set, overridden by `$QCAD_TECH_FILE`.
    /// Returns the model and the override text (empty if none).
    pub fn load(&self) -> Result<(Tech, String), CliError> {
        let tech = Tech::new(ErrorSet::by_name(&self.error_set)?);
        match std::env::var_os(TECH_ENV) {
            Some(p) if !p.is_empty() => {
                let path = PathBuf::from(p);
                let text = std::fs::read_to_string(&path)
                    .map_err(|e| CliError::Parse(format!("{TECH_ENV}={}: {e}", path.display())))?;
                Ok((tech.from_toml(&text)?, text))
            }
            _ => Ok((tech, String::new())),
        }
    }
}

#[derive(Args, Debug, Clone, Serialize)]
#[group(multiple = false)]
pub struct QecArgs {
    /// Place corrections for an EDist threshold.
    #[arg(long, value_name = "N")]
    pub edist: Option<u32>,
    /// Largest threshold within 5% of every-gate success.
    #[arg(long)]
    pub auto_5pct: bool,
    /// Best success with at most N corrections.
    #[arg(long, value_name = "N")]
    pub budget: Option<usize>,
    /// Correct after every gate.
    #[arg(long)]
    pub every_gate: bool,
}

impl QecArgs {
    pub fn mode(&self, default: QecMode) -> QecMode {
        if let Some(t) = self.edist {
            QecMode::EDist(t)
        } else if self.auto_5pct {
            QecMode::Auto5pct
        } else if let Some(n) = self.budget {
            QecMode::Budget(n)
        } else if self.every_gate {
            QecMode::EveryGate
        } else {
            default
        }
    }
}

#[derive(Args, Debug, Clone, Serialize)]
pub struct DatapathArgs {
    /// qla, lqla, cqla, cqla+ or qalypso.
    #[arg(long, default_value = "qalypso")]
    pub datapath: String,
    /// Data regions.
    #[arg(long, default_value_t = 4)]
    pub d: usize,
    /// Memory regions (default: enough for every qubit).
    #[arg(long)]
    pub memory: Option<usize>,
    /// Sweep data regions as `a:b:step`, or `a:b:xk` for a geometric step.
    #[arg(long = "sweep-D", value_name = "RANGE")]
    pub sweep_d: Option<String>,
    /// Fraction of peak router load provisioned, in (0, 1].
    #[arg(long, default_value_t = 1.0)]
    pub net_aggressiveness: f64,
}

impl DatapathArgs {
    pub fn kind(&self) -> Result<DatapathKind, CliError> {
        self.datapath
            .parse()
            .map_err(|e: qcad_core::datapath::DatapathError| CliError::Parse(e.to_string()))
    }

    pub fn config(&self, qubits: usize) -> Result<DatapathConfig, CliError> {
        let mut cfg = DatapathConfig::for_qubits(self.kind()?, qubits, self.d);
        if let Some(m) = self.memory {
            cfg.m = m;
        }
        cfg.net_aggressiveness = self.net_aggressiveness;
        Ok(cfg)
    }

    /// Every configuration to evaluate: the sweep if given, else one.
    pub fn points(&self, qubits: usize) -> Result<Vec<DatapathConfig>, CliError> {
        match &self.sweep_d {
            None => Ok(vec![self.config(qubits)?]),
            Some(r) => {
                let ds = parse_range(r)?;
                let mut pts = d_sweep(self.kind()?, qubits, &ds, &[self.net_aggressiveness]);
                if let Some(m) = self.memory {
                    pts.iter_mut().for_each(|c| c.m = m);
                }
                Ok(pts)
            }
        }
    }
}

#[derive(Args, Debug, Clone, Serialize)]
pub struct SimArgs {
    #[arg(long, default_value_t = 10_000)]
    pub trials: u64,
    #[arg(long, default_value_t = 1)]
    pub seed: u64,
}

impl SimArgs {
    pub fn settings(&self) -> Result<SimSettings, CliError> {
        if self.trials == 0 {
            return Err(CliError::Sim("need at least one trial".into()));
        }
        Ok(SimSettings {
            trials: self.trials,
            seed: self.seed,
        })
    }
}

/// `a:b:step` (arithmetic) or `a:b:xk` (geometric), inclusive of `a`.
pub fn parse_range(s: &str) -> Result<Vec<usize>, CliError> {
    let bad = || CliError::Parse(format!("bad range `{s}` (expected a:b:step or a:b:xk)"));
    let parts: Vec<&str> = s.split(':').collect();
    let [a, b, step] = parts.as_slice() else {
        return Err(bad());
    };
    let a: usize = a.parse().map_err(|_| bad())?;
    let b: usize = b.parse().map_err(|_| bad())?;
    if a == 0 || a > b {
        return Err(bad());
    }
    let mut out = Vec::new();
    if let Some(k) = step.strip_prefix('x') {
        let k: usize = k.parse().map_err(|_| bad())?;
        if k < 2 {
            return Err(bad());
        }
        let mut d = a;
        while d <= b {
            out.push(d);
            d *= k;
        }
    } else {
        let k: usize = step.parse().map_err(|_| bad())?;
        if k == 0 {
            return Err(bad());
        }
        out.extend((a..=b).step_by(k));
    }
    Ok(out)
}

/// Reads a netlist from `path`, or stdin for `-`. Returns the circuit and
/// the raw text.
pub fn read_netlist(path: &Path) -> Result<(Circuit, String), CliError> {
    let text = if path == Path::new("-") {
        std::io::read_to_string(std::io::stdin()).map_err(|e| CliError::io(path, e))?
    } else {
        std::fs::read_to_string(path).map_err(|e| CliError::io(path, e))?
    };
    let c = parse_netlist(&text).map_err(|e| CliError::Parse(format!("{}: {e}", path.display())))?;
    Ok((c, text))
}

fn write_out(path: Option<&Path>, text: &str) -> Result<(), CliError> {
    emit(path, text).map_err(|e| CliError::io(path.unwrap_or(Path::new("-")), e))
}

#[derive(Args, Debug, Serialize)]
struct GenRandomArgs {
    #[arg(long)]
    gates: usize,
    #[arg(long)]
    qubits: usize,
    /// Target Rent exponent.
    #[arg(long, default_value_t = 0.5)]
    rent: f64,
    #[arg(long, default_value_t = 1)]
    seed: u64,
    #[serde(skip)]
    #[arg(long)]
    out: Option<PathBuf>,
}

fn cmd_gen_random(a: &GenRandomArgs) -> Result<(), CliError> {
    let c = gen_random(&RandSpec {
        gates: a.gates,
        qubits: a.qubits,
        rent_r: a.rent,
        seed: a.seed,
    })
    .map_err(|e| CliError::Parse(e.to_string()))?;
    let stamp = Stamp::new("gen-random", a, &[], a.seed);
    write_out(a.out.as_deref(), &stamp.text(&emit_netlist(&c)))
}

#[derive(Args, Debug, Serialize)]
struct OptimizeArgs {
    /// Netlist file, or `-` for stdin.
    #[serde(skip)]
    input: PathBuf,
    #[command(flatten)]
    qec: QecArgs,
    /// Instead of a netlist, emit a CSV of correction count, physical
    /// operations and success for every-gate and each listed threshold.
    #[arg(long = "sweep-T", value_delimiter = ',', value_name = "T,...")]
    sweep_t: Option<Vec<u32>>,
    #[command(flatten)]
    datapath: DatapathArgs,
    #[command(flatten)]
    sim: SimArgs,
    #[command(flatten)]
    tech: TechArgs,
    /// Corrected netlist; the placement summary goes next to it as JSON.
    #[serde(skip)]
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Serialize, Deserialize, Debug)]
pub struct QecSummary {
    pub mode: String,
    pub threshold: Option<u32>,
    pub corrections: usize,
    pub physical_ops: u64,
    pub every_gate_p: Option<f64>,
    pub p_success: Option<f64>,
    pub warning: bool,
}

pub fn optimize(
    c: &Circuit,
    mode: QecMode,
    cfg: &DatapathConfig,
    tech: &Tech,
    sim: SimSettings,
) -> Result<(Circuit, QecSummary), CliError> {
    let base = EDistConfig::default();
    let (placement, tune) = place(c, mode, &base, cfg, tech, sim)?;
    let threshold = match (mode, &tune) {
        (QecMode::EDist(t), _) => Some(t),
        (_, Some(t)) => t.threshold,
        _ => None,
    };
    let summary = QecSummary {
        mode: mode.label(),
        threshold,
        corrections: placement.len(),
        physical_ops: table_op_count(c, &placement, &tech.costs),
        every_gate_p: tune.as_ref().map(|t| t.every_gate_p),
        p_success: tune.as_ref().map(|t| t.p_success),
        warning: tune.as_ref().is_some_and(|t| t.warning),
    };
    Ok((apply_placement(c, &placement), summary))
}

fn cmd_optimize(a: &OptimizeArgs) -> Result<(), CliError> {
    let (c, text) = read_netlist(&a.input)?;
    let (tech, tech_text) = a.tech.load()?;
    let sim = a.sim.settings()?;
    let stamp = Stamp::new("optimize-qec", a, &[&text, &tech_text], a.sim.seed);
    if let Some(ts) = &a.sweep_t {
        return write_out(a.out.as_deref(), &stamp.text(&threshold_table(&c, ts, &tech, sim)?));
    }
    let cfg = a.datapath.config(c.num_qubits())?;
    let (corrected, summary) = optimize(&c, a.qec.mode(QecMode::EDist(6)), &cfg, &tech, sim)?;
    let netlist = stamp.text(&emit_netlist(&corrected));
    match &a.out {
        Some(p) => {
            write_out(Some(p), &netlist)?;
            write_out(Some(&p.with_extension("json")), &stamp.json(&summary))
        }
        None => {
            eprintln!("{}", serde_json::to_string(&summary).expect("summary serializes"));
            write_out(None, &netlist)
        }
    }
}

/// Rows of `mode,corrections,physical_ops,p_success,ci_low,ci_high`. Success
/// comes from the gate-level trace, without mapping, with Qalypso
/// pipelined ancilla.
pub fn threshold_table(c: &Circuit, ts: &[u32], tech: &Tech, sim: SimSettings) -> Result<String, CliError> {
    use qcad_core::qec::{every_gate_placement, insert_corrections};
    use qcad_core::tech::FactoryKind;
    let anc = AncillaQuality::for_factory(FactoryKind::QalypsoPipelined, tech);
    let mut rows = vec![("every-gate".to_string(), every_gate_placement(c))];
    for &t in ts {
        rows.push((format!("edist-{t}"), insert_corrections(c, &EDistConfig::new(t))?));
    }
    let mut out = String::from("mode,corrections,physical_ops,p_success,ci_low,ci_high\n");
    for (label, p) in rows {
        let r = mc_run(&gate_trace(&apply_placement(c, &p), tech, anc), sim.trials, sim.seed);
        out.push_str(&format!(
            "{label},{},{},{},{},{}\n",
            p.len(),
            table_op_count(c, &p, &tech.costs),
            r.p_success,
            r.ci_low,
            r.ci_high
        ));
    }
    Ok(out)
}

#[derive(Args, Debug, Serialize)]
struct MapArgs {
    /// Corrected netlist, or `-` for stdin.
    #[serde(skip)]
    input: PathBuf,
    #[command(flatten)]
    datapath: DatapathArgs,
    #[command(flatten)]
    sim: SimArgs,
    #[command(flatten)]
    tech: TechArgs,
    /// JSON metrics, or CSV with one row per point under `--sweep-D`.
    #[serde(skip)]
    #[arg(long)]
    out: Option<PathBuf>,
}

fn cmd_map(a: &MapArgs) -> Result<(), CliError> {
    let (c, text) = read_netlist(&a.input)?;
    let (tech, tech_text) = a.tech.load()?;
    let sim = a.sim.settings()?;
    let stamp = Stamp::new("map", a, &[&text, &tech_text], a.sim.seed);
    let points = a.datapath.points(c.num_qubits())?;
    if a.datapath.sweep_d.is_some() {
        let r = adcr_optimal(&c, &points, &tech, sim)?;
        let ms: Vec<Metrics> = r
            .rows
            .iter()
            .filter_map(|row| row.result.as_ref().map(|e| e.metrics.clone()))
            .collect();
        return write_out(a.out.as_deref(), &stamp.text(&emit_report(&ms, ReportFormat::Csv)));
    }
    let e = evaluate(&c, &points[0], &tech, sim)?;
    write_out(a.out.as_deref(), &stamp.json(&e.metrics))
}

#[derive(Args, Debug, Serialize)]
struct SimulateArgs {
    /// Corrected netlist, or `-` for stdin.
    #[serde(skip)]
    input: PathBuf,
    /// Simulate the gate sequence alone, without mapping.
    #[arg(long)]
    unmapped: bool,
    #[command(flatten)]
    datapath: DatapathArgs,
    #[command(flatten)]
    sim: SimArgs,
    #[command(flatten)]
    tech: TechArgs,
    #[serde(skip)]
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Serialize, Deserialize, Debug, Clone, Copy, PartialEq)]
pub struct SimOutput {
    pub p_success: f64,
    pub ci_low: f64,
    pub ci_high: f64,
    pub trials: u64,
    pub successes: u64,
}

impl From<&qcad_core::errorsim::McResult> for SimOutput {
    fn from(r: &qcad_core::errorsim::McResult) -> Self {
        SimOutput {
            p_success: r.p_success,
            ci_low: r.ci_low,
            ci_high: r.ci_high,
            trials: r.trials,
            successes: r.successes,
        }
    }
}

fn cmd_simulate(a: &SimulateArgs) -> Result<(), CliError> {
    let (c, text) = read_netlist(&a.input)?;
    let (tech, tech_text) = a.tech.load()?;
    let sim = a.sim.settings()?;
    let stamp = Stamp::new("simulate", a, &[&text, &tech_text], a.sim.seed);
    let cfg = a.datapath.config(c.num_qubits())?;
    let r = if a.unmapped {
        mc_run(
            &gate_trace(&c, &tech, AncillaQuality::for_datapath(&cfg, &tech)),
            sim.trials,
            sim.seed,
        )
    } else {
        evaluate(&c, &cfg, &tech, sim)?.sim
    };
    write_out(a.out.as_deref(), &stamp.json(&SimOutput::from(&r)))
}

#[derive(Args, Debug, Serialize)]
struct AdderArgs {
    /// qrca or qcla.
    #[arg(long, default_value = "qcla")]
    kind: AdderKind,
    /// Operand width in bits.
    #[arg(long)]
    n: usize,
    /// Sub-adder width (ripple) or block size (lookahead).
    #[arg(long, default_value_t = 4)]
    m: usize,
    /// Expand Toffoli gates into one- and two-qubit gates.
    #[arg(long)]
    decompose: bool,
    #[serde(skip)]
    #[arg(long)]
    out: Option<PathBuf>,
}

fn cmd_adders(a: &AdderArgs) -> Result<(), CliError> {
    let adder = gen_adder(AdderSpec {
        kind: a.kind,
        n: a.n,
        m: a.m,
    })
    .map_err(|e| CliError::Parse(e.to_string()))?;
    let c = if a.decompose {
        decompose_toffoli(&adder.circuit)
    } else {
        adder.circuit
    };
    let stamp = Stamp::new("adders", a, &[], 0);
    write_out(a.out.as_deref(), &stamp.text(&emit_netlist(&c)))
}

#[derive(Args, Debug, Serialize)]
struct ShorArgs {
    /// Bits of the number to factor; comma-separated for a sweep.
    #[arg(long, value_delimiter = ',', required = true)]
    n: Vec<usize>,
    #[arg(long, default_value = "qcla")]
    adder: AdderKind,
    /// Sub-adder width or lookahead block size.
    #[arg(long, default_value_t = 4)]
    m: usize,
    #[command(flatten)]
    qec: QecArgs,
    /// Data-region counts tried when mapping the adder.
    #[arg(long, value_delimiter = ',', default_value = "2,4,8")]
    ds: Vec<usize>,
    #[command(flatten)]
    tech: TechArgs,
    #[serde(skip)]
    #[arg(long)]
    out: Option<PathBuf>,
}

fn cmd_shor(a: &ShorArgs) -> Result<(), CliError> {
    let (tech, tech_text) = a.tech.load()?;
    let mut ns = a.n.clone();
    ns.sort_unstable();
    ns.dedup();
    let stamp = Stamp::new("shor", a, &[&tech_text], 1);
    let est = shor_sweep(
        &ns,
        a.adder,
        a.m,
        a.qec.mode(QecMode::EDist(6)),
        &a.ds,
        &ShorParams::default(),
        &tech,
    )?;
    #[derive(Serialize)]
    struct Out<'a> {
        estimates: &'a [qcad_core::shor::ShorEstimate],
    }
    write_out(a.out.as_deref(), &stamp.json(&Out { estimates: &est }))
}

#[derive(Args, Debug, Serialize)]
struct ReportArgs {
    /// Metrics files written by `map` or `run`.
    #[serde(skip)]
    #[arg(required = true)]
    inputs: Vec<PathBuf>,
    #[arg(long, default_value = "csv", value_parser = ["csv", "json"])]
    format: String,
    #[serde(skip)]
    #[arg(long)]
    out: Option<PathBuf>,
}

/// Metrics from a JSON file holding one record, an array, or an object
/// with a `metrics` array.
pub fn read_metrics(path: &Path) -> Result<(Vec<Metrics>, String), CliError> {
    let text = std::fs::read_to_string(path).map_err(|e| CliError::io(path, e))?;
    let bad = |e: serde_json::Error| CliError::Parse(format!("{}: {e}", path.display()));
    let v: serde_json::Value = serde_json::from_str(&text).map_err(bad)?;
    let ms = match &v {
        serde_json::Value::Array(_) => serde_json::from_value(v).map_err(bad)?,
        serde_json::Value::Object(o) if o.contains_key("metrics") => {
            serde_json::from_value(o["metrics"].clone()).map_err(bad)?
        }
        _ => vec![serde_json::from_value(v).map_err(bad)?],
    };
    Ok((ms, text))
}

fn cmd_report(a: &ReportArgs) -> Result<(), CliError> {
    let mut all = Vec::new();
    let mut texts = Vec::new();
    for p in &a.inputs {
        let (ms, text) = read_metrics(p)?;
        all.extend(ms);
        texts.push(text);
    }
    let refs: Vec<&str> = texts.iter().map(String::as_str).collect();
    let stamp = Stamp::new("report", a, &refs, 0);
    let body = if a.format == "json" {
        #[derive(Serialize)]
        struct Out<'a> {
            metrics: &'a [Metrics],
        }
        stamp.json(&Out { metrics: &all })
    } else {
        stamp.text(&emit_report(&all, ReportFormat::Csv))
    };
    write_out(a.out.as_deref(), &body)
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(c) => c,
        Err(e) => {
            let _ = e.print();
            return ExitCode::from(if e.use_stderr() { 2 } else { 0 });
        }
    };
    let r = match &cli.cmd {
        Command::GenRandom(a) => cmd_gen_random(a),
        Command::OptimizeQec(a) => cmd_optimize(a),
        Command::Map(a) => cmd_map(a),
        Command::Simulate(a) => cmd_simulate(a),
        Command::Adders(a) => cmd_adders(a),
        Command::Shor(a) => cmd_shor(a),
        Command::Report(a) => cmd_report(a),
        Command::Run(a) => run::cmd_run(a),
    };
    match r {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("qcad: {e}");
            ExitCode::from(e.code())
        }
    }
}
