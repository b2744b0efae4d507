//! Browser bindings: random circuit generation with correction placement,
//! Monte Carlo simulation of a netlist on a datapath, and ADCR.
//!
//! Each export returns JSON text. The `*_json` functions hold the logic
//! and are plain Rust so they can be tested off the browser.

use qcad_core::circuit::{emit_netlist, parse_netlist};
use qcad_core::datapath::DatapathConfig;
use qcad_core::metrics::adcr;
use qcad_core::pipeline::{evaluate, SimSettings};
use qcad_core::qec::{apply_placement, every_gate_placement, insert_corrections, table_op_count, EDistConfig};
use qcad_core::randgen::{gen_random, RandSpec};
use qcad_core::tech::{ErrorSet, Tech};
use serde_json::json;
use wasm_bindgen::prelude::*;

/// Upper bound on trials per call so the page stays responsive.
pub const MAX_TRIALS: u64 = 200_000;

fn tech(error_set: u8) -> Result<Tech, String> {
    Ok(Tech::new(
        ErrorSet::by_name(&error_set.to_string()).map_err(|e| e.to_string())?,
    ))
}

pub fn place_json(gates: usize, qubits: usize, rent: f64, seed: u64, threshold: u32) -> Result<String, String> {
    let c = gen_random(&RandSpec {
        gates,
        qubits,
        rent_r: rent,
        seed,
    })
    .map_err(|e| e.to_string())?;
    let p = insert_corrections(&c, &EDistConfig::new(threshold)).map_err(|e| e.to_string())?;
    let costs = &Tech::set1().costs;
    let every = every_gate_placement(&c);
    Ok(json!({
        "gates": c.num_gates(),
        "qubits": c.num_qubits(),
        "threshold": threshold,
        "corrections": p.len(),
        "every_gate_corrections": every.len(),
        "physical_ops": table_op_count(&c, &p, costs),
        "every_gate_ops": table_op_count(&c, &every, costs),
        "netlist": emit_netlist(&apply_placement(&c, &p)),
    })
    .to_string())
}

pub fn simulate_json(
    netlist: &str,
    datapath: &str,
    d: usize,
    error_set: u8,
    trials: u64,
    seed: u64,
) -> Result<String, String> {
    let c = parse_netlist(netlist).map_err(|e| e.to_string())?;
    let kind = datapath
        .parse()
        .map_err(|e: qcad_core::datapath::DatapathError| e.to_string())?;
    let tech = tech(error_set)?;
    let cfg = DatapathConfig::for_qubits(kind, c.num_qubits(), d);
    let sim = SimSettings {
        trials: trials.clamp(1, MAX_TRIALS),
        seed,
    };
    let e = evaluate(&c, &cfg, &tech, sim).map_err(|e| e.to_string())?;
    serde_json::to_string(&e.metrics).map_err(|e| e.to_string())
}

#[wasm_bindgen]
pub fn place_corrections(gates: usize, qubits: usize, rent: f64, seed: u64, threshold: u32) -> Result<String, JsValue> {
    place_json(gates, qubits, rent, seed, threshold).map_err(|e| JsValue::from_str(&e))
}

#[wasm_bindgen]
pub fn simulate(
    netlist: &str,
    datapath: &str,
    d: usize,
    error_set: u8,
    trials: u64,
    seed: u64,
) -> Result<String, JsValue> {
    simulate_json(netlist, datapath, d, error_set, trials, seed).map_err(|e| JsValue::from_str(&e))
}

/// Area × latency / success; infinite when success is zero.
#[wasm_bindgen]
pub fn adcr_value(area: f64, latency: f64, p_success: f64) -> f64 {
    adcr(area, latency, p_success)
}
