//! Resource estimate for Shor's algorithm: modular exponentiation built
//! from controlled modular additions (five adder calls each), followed by
//! a banded quantum Fourier transform.
//!
//! Logical counts are exact functions of the adder netlist and the
//! constants in [`ShorParams`]. Latency and area come from mapping the
//! corrected adder (up to [`MAP_LIMIT`] bits) and are extrapolated beyond.

use crate::adders::{gen_adder, AdderError, AdderKind, AdderSpec};
use crate::circuit::decompose_toffoli;
use crate::datapath::{instantiate, DatapathConfig, DatapathKind};
use crate::mapper::{map, MapError};
use crate::metrics::area_breakdown;
use crate::pipeline::{place, QecMode, SimSettings};
use crate::qec::{apply_placement, greedy_corrections, CorrectionPlacement, EDistConfig, QecError};
use crate::tech::Tech;
use crate::GateKind;
use serde::{Deserialize, Serialize};
use thiserror::Error;

/// Largest adder mapped directly; bigger sizes are extrapolated.
pub const MAP_LIMIT: usize = 64;

/// Logical gates per Toffoli after decomposition.
const TOFFOLI_GATES: u64 = 15;

#[derive(Debug, Error)]
pub enum ShorError {
    #[error("Shor estimate needs n >= 4, got {0}")]
    TooSmall(usize),
    #[error(transparent)]
    Adder(#[from] AdderError),
    #[error(transparent)]
    Qec(#[from] QecError),
    #[error(transparent)]
    Map(#[from] MapError),
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct ShorParams {
    /// Adder calls per controlled modular addition.
    pub adders_per_modadd: u64,
    /// Logical gates per single-qubit rotation after synthesis into H and T.
    pub rotation_synthesis: u64,
    /// Qubits besides the adder's own: exponent (2n), modulus (n) and
    /// multiplier result (n) registers.
    pub extra_qubits_per_bit: u64,
}

impl Default for ShorParams {
    fn default() -> Self {
        ShorParams {
            adders_per_modadd: 5,
            rotation_synthesis: 40,
            extra_qubits_per_bit: 4,
        }
    }
}

impl ShorParams {
    /// One controlled rotation: two CNOTs and three synthesized rotations.
    pub fn controlled_rotation_gates(&self) -> u64 {
        2 + 3 * self.rotation_synthesis
    }
}

/// Logical structure of the modular exponentiation for `n` bits.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct ModExpShape {
    pub multiplications: u64,
    pub modadds: u64,
    pub adder_calls: u64,
    /// Comparator flag and controlled modulus loads, per modular addition.
    pub modadd_overhead_gates: u64,
    /// Controlled swap between multiplications.
    pub mult_overhead_gates: u64,
}

pub fn modexp_shape(n: usize, p: &ShorParams) -> ModExpShape {
    let n = n as u64;
    let multiplications = 2 * n;
    let modadds = multiplications * n;
    ModExpShape {
        multiplications,
        modadds,
        adder_calls: modadds * p.adders_per_modadd,
        // CNOT, X, CNOT, X on the flag plus two n-Toffoli loads of N.
        modadd_overhead_gates: 4 + 2 * n * TOFFOLI_GATES,
        // n Fredkin gates, each one Toffoli between two CNOTs.
        mult_overhead_gates: n * (TOFFOLI_GATES + 2),
    }
}

/// Hadamards and controlled rotations of a QFT on `width` qubits keeping
/// rotations up to angle 2π/2^band.
pub fn qft_counts(width: usize, band: usize) -> (u64, u64) {
    let rotations: usize = (0..width).map(|j| (width - 1 - j).min(band)).sum();
    (width as u64, rotations as u64)
}

/// Band used for an `n`-bit factoring QFT: log2 of its 2n qubits.
pub fn qft_band(n: usize) -> usize {
    (2 * n).next_power_of_two().trailing_zeros().max(1) as usize
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ShorCounts {
    pub n: usize,
    pub adder: AdderSpec,
    pub qubits: u64,
    pub shape: ModExpShape,
    /// Logical gates in one adder call (Toffolis decomposed).
    pub adder_gates: u64,
    pub adder_corrections: u64,
    pub modexp_gates: u64,
    pub qft_gates: u64,
    pub logical_gates: u64,
    pub corrections: u64,
    /// Logical gates plus every correction's physical bundle.
    pub physical_ops: f64,
    pub qft_share: f64,
}

/// Sub-adder width used at `n` bits: `m`, clamped to the operand width.
fn adder_at(kind: AdderKind, n: usize, m: usize) -> AdderSpec {
    AdderSpec { kind, n, m: m.min(n) }
}

/// Placement for a decomposed adder. Threshold modes use the lazy greedy
/// placement above the mapping limit, where the frontier search is too
/// costly.
fn adder_placement(
    c: &crate::Circuit,
    qec: QecMode,
    base: &EDistConfig,
    n: usize,
    tech: &Tech,
) -> Result<CorrectionPlacement, ShorError> {
    if let QecMode::EDist(t) = qec {
        if n > MAP_LIMIT {
            return Ok(greedy_corrections(c, &base.with_threshold(t))?);
        }
    }
    let cfg = DatapathConfig::for_qubits(DatapathKind::Qalypso, c.num_qubits(), 4);
    let sim = SimSettings { trials: 1000, seed: 1 };
    Ok(place(c, qec, base, &cfg, tech, sim)?.0)
}

/// Logical and physical operation counts. `qec` must already be resolved
/// to a fixed mode (not a tuning mode).
pub fn gen_shor(
    n: usize,
    adder: AdderKind,
    m: usize,
    qec: QecMode,
    params: &ShorParams,
    tech: &Tech,
) -> Result<ShorCounts, ShorError> {
    if n < 4 {
        return Err(ShorError::TooSmall(n));
    }
    let spec = adder_at(adder, n, m);
    let a = gen_adder(spec)?;
    let c = decompose_toffoli(&a.circuit);
    let placement = adder_placement(&c, qec, &EDistConfig::default(), n, tech)?;
    let adder_gates = c.num_gates() as u64;
    let adder_corrections = placement.len() as u64;
    let shape = modexp_shape(n, params);
    let modexp_gates = shape.adder_calls * adder_gates
        + shape.modadds * shape.modadd_overhead_gates
        + shape.multiplications * shape.mult_overhead_gates;
    let (h, rot) = qft_counts(2 * n, qft_band(n));
    let qft_gates = h + rot * params.controlled_rotation_gates();
    let logical_gates = modexp_gates + qft_gates;
    // Gates outside the adder are corrected at the adder's density.
    let density = adder_corrections as f64 / adder_gates.max(1) as f64;
    let corrections = shape.adder_calls * adder_corrections
        + ((logical_gates - shape.adder_calls * adder_gates) as f64 * density).round() as u64;
    let physical_ops = logical_gates as f64 + corrections as f64 * tech.costs.correction().total() as f64;
    Ok(ShorCounts {
        n,
        adder: spec,
        qubits: params.extra_qubits_per_bit * n as u64 + c.num_qubits() as u64,
        shape,
        adder_gates,
        adder_corrections,
        modexp_gates,
        qft_gates,
        logical_gates,
        corrections,
        physical_ops,
        qft_share: qft_gates as f64 / logical_gates as f64,
    })
}

/// Mapped adder at one size: the configuration with the smallest
/// area × latency among the data-region counts tried.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct AdderPoint {
    pub n: usize,
    pub config: DatapathConfig,
    pub latency_us: f64,
    pub area_mb: f64,
    /// Generators and T factories per data region, and generators per
    /// memory region, of the mapped layout.
    pub data_gens: usize,
    pub data_t: usize,
    pub memory_gens: usize,
}

pub fn map_adder(
    n: usize,
    adder: AdderKind,
    m: usize,
    qec: QecMode,
    ds: &[usize],
    tech: &Tech,
) -> Result<AdderPoint, ShorError> {
    let a = gen_adder(adder_at(adder, n, m))?;
    let c = decompose_toffoli(&a.circuit);
    let p = adder_placement(&c, qec, &EDistConfig::default(), n, tech)?;
    let cc = apply_placement(&c, &p);
    let mut best: Option<(f64, AdderPoint)> = None;
    for &d in ds {
        let cfg = DatapathConfig::for_qubits(DatapathKind::Qalypso, cc.num_qubits(), d);
        let mp = map(&cc, &cfg, tech)?;
        let area = mp.layout.total_area(tech);
        let lat = mp.schedule.makespan;
        let max_of = |kind| {
            mp.layout
                .regions
                .iter()
                .filter(|r| r.kind == kind)
                .map(|r| (r.gens, r.t_factories))
                .fold((0, 0), |acc, x| (acc.0.max(x.0), acc.1.max(x.1)))
        };
        let (dg, dt) = max_of(crate::datapath::RegionKind::Data);
        let (mg, _) = max_of(crate::datapath::RegionKind::Memory);
        let point = AdderPoint {
            n,
            config: cfg,
            latency_us: lat,
            area_mb: area,
            data_gens: dg,
            data_t: dt,
            memory_gens: mg,
        };
        if best.as_ref().is_none_or(|(b, _)| area * lat < *b) {
            best = Some((area * lat, point));
        }
    }
    Ok(best.expect("at least one data-region count").1)
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ShorEstimate {
    pub counts: ShorCounts,
    pub qec: String,
    pub latency_s: f64,
    pub area_mb: f64,
    pub area_mm2: f64,
    /// Adder mapped at this size rather than extrapolated.
    pub mapped: bool,
}

/// Serial latency of everything but the adder calls, in µs.
fn overhead_latency(n: usize, params: &ShorParams, tech: &Tech) -> f64 {
    let s = modexp_shape(n, params);
    let l = |k| tech.logical_latency(k);
    let modadd = 2.0 * l(GateKind::Cnot) + 2.0 * l(GateKind::X) + 2.0 * l(GateKind::Toffoli);
    let mult = l(GateKind::Toffoli) + 2.0 * l(GateKind::Cnot);
    let (h, rot) = qft_counts(2 * n, qft_band(n));
    let rot_lat =
        2.0 * l(GateKind::Cnot) + 3.0 * params.rotation_synthesis as f64 * (l(GateKind::H) + l(GateKind::T)) / 2.0;
    s.modadds as f64 * modadd + s.multiplications as f64 * mult + h as f64 * l(GateKind::H) + rot as f64 * rot_lat
}

/// Area of a Qalypso layout with the adder's data regions and enough
/// memory for every Shor qubit.
fn shor_area(point: &AdderPoint, qubits: u64, tech: &Tech) -> f64 {
    let mut cfg = DatapathConfig::for_qubits(DatapathKind::Qalypso, qubits as usize, point.config.d);
    cfg.net_aggressiveness = point.config.net_aggressiveness;
    let mut layout = instantiate(&cfg, tech).expect("valid Qalypso config");
    for r in &mut layout.regions {
        match r.kind {
            crate::datapath::RegionKind::Data => {
                r.gens = point.data_gens;
                r.t_factories = point.data_t;
            }
            crate::datapath::RegionKind::Memory => {
                r.gens = point.memory_gens.max(1);
                r.t_factories = 0;
            }
        }
        // One connection per router; the adder calls run one at a time.
        r.router_capacity = 1;
    }
    layout.refresh(tech);
    area_breakdown(&layout, tech).total()
}

/// Estimates for every size in `ns` (ascending). Adders up to
/// [`MAP_LIMIT`] bits are mapped for each data-region count in `ds`;
/// larger ones reuse the largest mapped configuration, with adder latency
/// extrapolated along the power law through the two largest mapped sizes.
pub fn shor_sweep(
    ns: &[usize],
    adder: AdderKind,
    m: usize,
    qec: QecMode,
    ds: &[usize],
    params: &ShorParams,
    tech: &Tech,
) -> Result<Vec<ShorEstimate>, ShorError> {
    let mut qec = qec;
    if matches!(qec, QecMode::Auto5pct | QecMode::Budget(_)) {
        // Tune on the largest mapped adder and reuse its threshold.
        let nm = ns
            .iter()
            .copied()
            .filter(|&n| n <= MAP_LIMIT)
            .max()
            .unwrap_or(MAP_LIMIT);
        let a = gen_adder(adder_at(adder, nm, m))?;
        let c = decompose_toffoli(&a.circuit);
        let cfg = DatapathConfig::for_qubits(DatapathKind::Qalypso, c.num_qubits(), 4);
        let (_, tune) = place(
            &c,
            qec,
            &EDistConfig::default(),
            &cfg,
            tech,
            SimSettings { trials: 1000, seed: 1 },
        )?;
        qec = match tune.and_then(|t| t.threshold) {
            Some(t) => QecMode::EDist(t),
            None => QecMode::EveryGate,
        };
    }
    let mut mapped_points: Vec<AdderPoint> = Vec::new();
    let mut mapped_sizes: Vec<usize> = ns.iter().copied().filter(|&n| n <= MAP_LIMIT).collect();
    if mapped_sizes.len() < 2 && ns.iter().any(|&n| n > MAP_LIMIT) {
        mapped_sizes = vec![MAP_LIMIT / 2, MAP_LIMIT];
    }
    mapped_sizes.sort_unstable();
    mapped_sizes.dedup();
    for &n in &mapped_sizes {
        mapped_points.push(map_adder(n, adder, m, qec, ds, tech)?);
    }
    let mut out = Vec::new();
    for &n in ns {
        let counts = gen_shor(n, adder, m, qec, params, tech)?;
        let (lat, point, mapped) = match mapped_points.iter().find(|p| p.n == n) {
            Some(p) => (p.latency_us, p.clone(), true),
            None => {
                let k = mapped_points.len();
                let (a, b) = (&mapped_points[k - 2], &mapped_points[k - 1]);
                let slope = (b.latency_us / a.latency_us).ln() / (b.n as f64 / a.n as f64).ln();
                (b.latency_us * (n as f64 / b.n as f64).powf(slope), b.clone(), false)
            }
        };
        let latency_us = counts.shape.adder_calls as f64 * lat + overhead_latency(n, params, tech);
        let area_mb = shor_area(&point, counts.qubits, tech);
        out.push(ShorEstimate {
            counts,
            qec: qec.label(),
            latency_s: latency_us * 1e-6,
            area_mb,
            area_mm2: tech.geometry.mm2(area_mb),
            mapped,
        });
    }
    Ok(out)
}

/// Least-squares slope of ln(y) against ln(x).
pub fn loglog_slope(points: &[(f64, f64)]) -> f64 {
    let pts: Vec<(f64, f64)> = points.iter().map(|&(x, y)| (x.ln(), y.ln())).collect();
    let k = pts.len() as f64;
    let mx = pts.iter().map(|p| p.0).sum::<f64>() / k;
    let my = pts.iter().map(|p| p.1).sum::<f64>() / k;
    let sxy: f64 = pts.iter().map(|p| (p.0 - mx) * (p.1 - my)).sum();
    let sxx: f64 = pts.iter().map(|p| (p.0 - mx) * (p.0 - mx)).sum();
    sxy / sxx
}
