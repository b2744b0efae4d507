//! End-to-end evaluation: correction placement, mapping, simulation and
//! metrics, plus the sweep for the ADCR-optimal datapath configuration.

use crate::circuit::Circuit;
use crate::datapath::DatapathConfig;
use crate::errorsim::{build_error_trace, mc_run, McResult};
use crate::mapper::{adcr_search, map, MapError, Mapped, SearchResult};
use crate::metrics::{measure, Metrics};
use crate::qec::{
    apply_placement, every_gate_placement, insert_corrections, tune_threshold, CorrectionPlacement, EDistConfig,
    QecError, TuneMode, TuneResult,
};
use crate::tech::Tech;
use serde::{Deserialize, Serialize};
use thiserror::Error;

#[derive(Debug, Error)]
pub enum PipelineError {
    #[error(transparent)]
    Qec(#[from] QecError),
    #[error(transparent)]
    Map(#[from] MapError),
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum QecMode {
    None,
    EveryGate,
    EDist(u32),
    /// Largest threshold within 5% of every-gate success after mapping.
    Auto5pct,
    Budget(usize),
}

impl QecMode {
    pub fn label(&self) -> String {
        match self {
            QecMode::None => "none".into(),
            QecMode::EveryGate => "every-gate".into(),
            QecMode::EDist(t) => format!("edist-{t}"),
            QecMode::Auto5pct => "auto-5pct".into(),
            QecMode::Budget(n) => format!("budget-{n}"),
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct SimSettings {
    pub trials: u64,
    pub seed: u64,
}

/// Corrections for `c`. Tuned modes score candidate placements by mapping
/// onto `cfg` and simulating; a placement that fails to map scores zero.
pub fn place(
    c: &Circuit,
    mode: QecMode,
    base: &EDistConfig,
    cfg: &DatapathConfig,
    tech: &Tech,
    sim: SimSettings,
) -> Result<(CorrectionPlacement, Option<TuneResult>), QecError> {
    let tune = |m: TuneMode| {
        let eval = |p: &CorrectionPlacement| {
            let corrected = apply_placement(c, p);
            evaluate(&corrected, cfg, tech, sim)
                .map(|e| e.sim.p_success)
                .unwrap_or(0.0)
        };
        tune_threshold(c, base, m, eval).map(|r| (r.placement.clone(), Some(r)))
    };
    match mode {
        QecMode::None => Ok((CorrectionPlacement::default(), None)),
        QecMode::EveryGate => Ok((every_gate_placement(c), None)),
        QecMode::EDist(t) => Ok((insert_corrections(c, &base.with_threshold(t))?, None)),
        QecMode::Auto5pct => tune(TuneMode::MaxTWithin5pct),
        QecMode::Budget(n) => tune(TuneMode::Budget(n)),
    }
}

#[derive(Clone, Debug)]
pub struct Evaluation {
    pub mapped: Mapped,
    pub sim: McResult,
    pub metrics: Metrics,
}

/// Maps an already-corrected circuit, simulates it and measures it.
pub fn evaluate(c: &Circuit, cfg: &DatapathConfig, tech: &Tech, sim: SimSettings) -> Result<Evaluation, MapError> {
    let mapped = map(c, cfg, tech)?;
    let trace = build_error_trace(c, &mapped.schedule, &mapped.layout, tech);
    let r = mc_run(&trace, sim.trials, sim.seed);
    let metrics = measure(&mapped, &r, tech);
    Ok(Evaluation {
        mapped,
        sim: r,
        metrics,
    })
}

/// Evaluates every configuration and keeps the lowest ADCR.
pub fn adcr_optimal(
    c: &Circuit,
    points: &[DatapathConfig],
    tech: &Tech,
    sim: SimSettings,
) -> Result<SearchResult<Evaluation>, MapError> {
    adcr_search(points, |cfg| {
        let e = evaluate(c, cfg, tech, sim)?;
        Ok((e.metrics.adcr, e))
    })
}
