//! `qcad run`: the whole flow from one manifest, with every stage's
//! artifact written to the output directory.

use crate::output::Stamp;
use crate::{optimize, read_netlist, write_out, CliError, DatapathArgs, QecArgs, SimArgs, SimOutput, TechArgs};
use clap::Args;
use qcad_core::circuit::emit_netlist;
use qcad_core::metrics::{emit_report, Metrics, ReportFormat};
use qcad_core::pipeline::{adcr_optimal, QecMode};
use qcad_core::randgen::{gen_random, RandSpec};
use serde::{Deserialize, Serialize};
use std::path::{Path, PathBuf};

#[derive(Args, Debug)]
pub struct RunArgs {
    /// TOML manifest; the flags below are ignored when given.
    #[arg(long)]
    manifest: Option<PathBuf>,
    /// Input netlist (otherwise a random circuit is generated).
    #[arg(long, conflicts_with_all = ["gates", "qubits"])]
    input: Option<PathBuf>,
    #[arg(long, default_value_t = 1000)]
    gates: usize,
    #[arg(long, default_value_t = 100)]
    qubits: usize,
    #[arg(long, default_value_t = 0.5)]
    rent: f64,
    #[command(flatten)]
    qec: QecArgs,
    #[command(flatten)]
    datapath: DatapathArgs,
    #[command(flatten)]
    sim: SimArgs,
    #[command(flatten)]
    tech: TechArgs,
    /// Output directory.
    #[arg(long)]
    out: Option<PathBuf>,
}

/// Everything a run depends on. Written back into the output directory so
/// the run can be repeated with `--manifest`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunManifest {
    pub input: Input,
    #[serde(default = "default_error_set")]
    pub error_set: String,
    /// Technology override file, applied on top of the error set.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub tech_file: Option<PathBuf>,
    pub datapath: String,
    /// Data-region counts to sweep; the ADCR-optimal one is reported.
    pub d: Vec<usize>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub memory: Option<usize>,
    #[serde(default = "one")]
    pub net_aggressiveness: f64,
    /// `none`, `every-gate`, `edist:N`, `auto-5pct` or `budget:N`.
    pub qec: String,
    pub trials: u64,
    pub seed: u64,
    pub out: PathBuf,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase", deny_unknown_fields)]
pub enum Input {
    Netlist(PathBuf),
    Random { gates: usize, qubits: usize, rent: f64 },
}

fn default_error_set() -> String {
    "1".into()
}

fn one() -> f64 {
    1.0
}

pub fn parse_qec(s: &str) -> Result<QecMode, CliError> {
    let bad = || CliError::Parse(format!("bad qec mode `{s}`"));
    let num = |v: &str| v.parse().map_err(|_| bad());
    Ok(match s.split_once(':') {
        None if s == "none" => QecMode::None,
        None if s == "every-gate" => QecMode::EveryGate,
        None if s == "auto-5pct" => QecMode::Auto5pct,
        Some(("edist", t)) => QecMode::EDist(num(t)? as u32),
        Some(("budget", n)) => QecMode::Budget(num(n)?),
        _ => return Err(bad()),
    })
}

fn qec_string(m: QecMode) -> String {
    match m {
        QecMode::EDist(t) => format!("edist:{t}"),
        QecMode::Budget(n) => format!("budget:{n}"),
        other => other.label(),
    }
}

impl RunManifest {
    fn from_flags(a: &RunArgs) -> Result<Self, CliError> {
        let d = match &a.datapath.sweep_d {
            Some(r) => crate::parse_range(r)?,
            None => vec![a.datapath.d],
        };
        Ok(RunManifest {
            input: match &a.input {
                Some(p) => Input::Netlist(p.clone()),
                None => Input::Random {
                    gates: a.gates,
                    qubits: a.qubits,
                    rent: a.rent,
                },
            },
            error_set: a.tech.error_set.clone(),
            tech_file: None,
            datapath: a.datapath.datapath.clone(),
            d,
            memory: a.datapath.memory,
            net_aggressiveness: a.datapath.net_aggressiveness,
            qec: qec_string(a.qec.mode(QecMode::EDist(6))),
            trials: a.sim.trials,
            seed: a.sim.seed,
            out: a
                .out
                .clone()
                .ok_or_else(|| CliError::Parse("run needs --out DIR or --manifest".into()))?,
        })
    }

    pub fn load(path: &Path) -> Result<Self, CliError> {
        let text = std::fs::read_to_string(path).map_err(|e| CliError::io(path, e))?;
        let mut m: RunManifest =
            toml::from_str(&text).map_err(|e| CliError::Parse(format!("{}: {e}", path.display())))?;
        // Relative paths are relative to the manifest.
        let dir = path.parent().unwrap_or(Path::new(""));
        if let Input::Netlist(p) = &mut m.input {
            *p = dir.join(&*p);
        }
        if let Some(t) = &mut m.tech_file {
            *t = dir.join(&*t);
        }
        m.out = dir.join(&m.out);
        Ok(m)
    }

    /// Checks everything that can be checked before the first stage runs.
    pub fn validate(&self) -> Result<(), CliError> {
        for p in [self.tech_file.as_ref(), self.netlist()].into_iter().flatten() {
            if !p.is_file() {
                return Err(CliError::Parse(format!("{}: no such file", p.display())));
            }
        }
        if self.d.is_empty() {
            return Err(CliError::Parse("manifest needs at least one value of d".into()));
        }
        parse_qec(&self.qec)?;
        Ok(())
    }

    fn netlist(&self) -> Option<&PathBuf> {
        match &self.input {
            Input::Netlist(p) => Some(p),
            Input::Random { .. } => None,
        }
    }
}

/// Settings that determine results; paths are replaced by file contents
/// in the hash.
#[derive(Serialize)]
struct Hashed<'a> {
    input: Option<&'a Input>,
    error_set: &'a str,
    datapath: &'a str,
    d: &'a [usize],
    memory: Option<usize>,
    net_aggressiveness: f64,
    qec: &'a str,
    trials: u64,
    seed: u64,
}

#[derive(Serialize)]
struct Report<'a> {
    qec: &'a crate::QecSummary,
    best: &'a str,
    metrics: &'a [Metrics],
}

pub fn cmd_run(a: &RunArgs) -> Result<(), CliError> {
    let m = match &a.manifest {
        Some(p) => RunManifest::load(p)?,
        None => RunManifest::from_flags(a)?,
    };
    run_pipeline(&m)
}

pub fn run_pipeline(m: &RunManifest) -> Result<(), CliError> {
    m.validate()?;
    let tech_args = TechArgs {
        error_set: m.error_set.clone(),
    };
    let (mut tech, mut tech_text) = tech_args.load()?;
    if let Some(p) = &m.tech_file {
        let text = std::fs::read_to_string(p).map_err(|e| CliError::io(p, e))?;
        tech = tech.from_toml(&text)?;
        tech_text.push_str(&text);
    }
    let sim = SimArgs {
        trials: m.trials,
        seed: m.seed,
    }
    .settings()?;

    // Stage 1: input circuit.
    let (c, input_text) = match &m.input {
        Input::Netlist(p) => read_netlist(p)?,
        Input::Random { gates, qubits, rent } => {
            let c = gen_random(&RandSpec {
                gates: *gates,
                qubits: *qubits,
                rent_r: *rent,
                seed: m.seed,
            })
            .map_err(|e| CliError::Parse(e.to_string()))?;
            let text = emit_netlist(&c);
            (c, text)
        }
    };
    let hashed = Hashed {
        input: matches!(m.input, Input::Random { .. }).then_some(&m.input),
        error_set: &m.error_set,
        datapath: &m.datapath,
        d: &m.d,
        memory: m.memory,
        net_aggressiveness: m.net_aggressiveness,
        qec: &m.qec,
        trials: m.trials,
        seed: m.seed,
    };
    let stamp = Stamp::new("run", &hashed, &[&input_text, &tech_text], m.seed);
    std::fs::create_dir_all(&m.out).map_err(|e| CliError::io(&m.out, e))?;
    let file = |name: &str| m.out.join(name);
    let manifest_toml = toml::to_string_pretty(m).expect("manifest serializes");
    write_out(Some(&file("manifest.toml")), &stamp.text(&manifest_toml))?;
    write_out(Some(&file("input.qc")), &stamp.text(&emit_netlist(&c)))?;

    // Stage 2: corrections, tuned against the first configuration.
    let dp = DatapathArgs {
        datapath: m.datapath.clone(),
        d: m.d[0],
        memory: m.memory,
        sweep_d: None,
        net_aggressiveness: m.net_aggressiveness,
    };
    let cfg = dp.config(c.num_qubits())?;
    let (corrected, summary) = optimize(&c, parse_qec(&m.qec)?, &cfg, &tech, sim)?;
    write_out(Some(&file("corrected.qc")), &stamp.text(&emit_netlist(&corrected)))?;
    write_out(Some(&file("qec.json")), &stamp.json(&summary))?;

    // Stages 3 and 4: map and simulate every configuration.
    let mut points = qcad_core::mapper::d_sweep(dp.kind()?, c.num_qubits(), &m.d, &[m.net_aggressiveness]);
    if let Some(mem) = m.memory {
        points.iter_mut().for_each(|p| p.m = mem);
    }
    let r = adcr_optimal(&corrected, &points, &tech, sim)?;
    let best = r.best_result();
    write_out(Some(&file("sim.json")), &stamp.json(&SimOutput::from(&best.sim)))?;

    // Stage 5: report.
    let metrics: Vec<Metrics> = r
        .rows
        .iter()
        .filter_map(|row| row.result.as_ref().map(|e| e.metrics.clone()))
        .collect();
    let report = Report {
        qec: &summary,
        best: &best.metrics.config,
        metrics: &metrics,
    };
    write_out(Some(&file("report.json")), &stamp.json(&report))?;
    write_out(
        Some(&file("report.csv")),
        &stamp.text(&emit_report(&metrics, ReportFormat::Csv)),
    )?;
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn qec_strings_round_trip() {
        for m in [
            QecMode::None,
            QecMode::EveryGate,
            QecMode::EDist(4),
            QecMode::Auto5pct,
            QecMode::Budget(12),
        ] {
            assert_eq!(parse_qec(&qec_string(m)).unwrap(), m);
        }
        assert!(parse_qec("edist:x").is_err());
        assert!(parse_qec("sometimes").is_err());
    }

    #[test]
    fn manifest_toml() {
        let text = r#"
            datapath = "qalypso"
            d = [1, 2]
            qec = "edist:6"
            trials = 100
            seed = 3
            out = "o"
            [input.random]
            gates = 10
            qubits = 4
            rent = 0.5
        "#;
        let m: RunManifest = toml::from_str(text).unwrap();
        assert_eq!(m.error_set, "1");
        assert_eq!(m.net_aggressiveness, 1.0);
        let back: RunManifest = toml::from_str(&toml::to_string(&m).unwrap()).unwrap();
        assert_eq!(back, m);
        assert!(toml::from_str::<RunManifest>(&format!("bogus = 1\n{text}")).is_err());
    }
}
