//! Area, latency, success probability and ADCR of a mapped design, with the
//! area split into data, memory, QEC ancilla, T ancilla and network.

use crate::datapath::{region_area, RegionKind, RegionLayout};
use crate::errorsim::McResult;
use crate::mapper::Mapped;
use crate::tech::Tech;
use serde::{Deserialize, Serialize};
use std::fmt::Write;

/// Area-delay-to-correct-result: expected area × time spent until one run
/// succeeds, rerunning on failure. Infinite when success is impossible.
pub fn adcr(area: f64, latency_single: f64, p_success: f64) -> f64 {
    if p_success <= 0.0 {
        f64::INFINITY
    } else {
        area * latency_single / p_success
    }
}

/// Expected total latency Σ n·L·p(1−p)^(n−1), truncated after `terms`
/// runs. Converges to L/p.
pub fn expected_latency_series(latency_single: f64, p_success: f64, terms: u64) -> f64 {
    let q = 1.0 - p_success;
    let (mut sum, mut w) = (0.0, p_success);
    for n in 1..=terms {
        sum += n as f64 * w;
        w *= q;
        if w == 0.0 {
            break;
        }
    }
    latency_single * sum
}

/// Area per category in macroblocks.
#[derive(Clone, Copy, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct Breakdown {
    pub data: f64,
    pub memory: f64,
    /// Zero-ancilla generators, including those serving memory.
    pub qec: f64,
    pub t: f64,
    /// Routers and inter-region channels.
    pub network: f64,
}

impl Breakdown {
    pub fn total(&self) -> f64 {
        self.data + self.memory + self.qec + self.t + self.network
    }

    /// Each category as a fraction of the total; all zero for an empty
    /// design.
    pub fn shares(&self) -> Breakdown {
        let t = self.total();
        if t <= 0.0 {
            return Breakdown::default();
        }
        Breakdown {
            data: self.data / t,
            memory: self.memory / t,
            qec: self.qec / t,
            t: self.t / t,
            network: self.network / t,
        }
    }
}

pub fn area_breakdown(layout: &RegionLayout, tech: &Tech) -> Breakdown {
    let mut b = Breakdown {
        network: layout.channel_area(),
        ..Default::default()
    };
    for r in &layout.regions {
        let a = region_area(r, &layout.config, tech);
        match r.kind {
            RegionKind::Data => b.data += a.slots,
            RegionKind::Memory => b.memory += a.slots,
        }
        b.qec += a.factories;
        b.t += a.t_factories;
        b.network += a.router;
    }
    b
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Metrics {
    pub config: String,
    pub area_mb: f64,
    pub area_mm2: f64,
    pub latency_us: f64,
    pub p_success: f64,
    pub ci_low: f64,
    pub ci_high: f64,
    pub trials: u64,
    /// `null` in JSON when success is impossible.
    #[serde(with = "inf_as_null")]
    pub adcr: f64,
    /// Area by category, in macroblocks.
    pub area: Breakdown,
    /// Area shares; sum to one.
    pub shares: Breakdown,
}

impl Metrics {
    pub fn new(config: String, area: Breakdown, latency_us: f64, sim: &McResult, tech: &Tech) -> Self {
        let area_mb = area.total();
        Metrics {
            config,
            area_mb,
            area_mm2: tech.geometry.mm2(area_mb),
            latency_us,
            p_success: sim.p_success,
            ci_low: sim.ci_low,
            ci_high: sim.ci_high,
            trials: sim.trials,
            adcr: adcr(area_mb, latency_us, sim.p_success),
            area,
            shares: area.shares(),
        }
    }
}

pub fn measure(m: &Mapped, sim: &McResult, tech: &Tech) -> Metrics {
    Metrics::new(
        m.layout.config.label(),
        area_breakdown(&m.layout, tech),
        m.schedule.makespan,
        sim,
        tech,
    )
}

mod inf_as_null {
    use serde::{Deserialize, Deserializer, Serializer};

    pub fn serialize<S: Serializer>(v: &f64, s: S) -> Result<S::Ok, S::Error> {
        if v.is_finite() {
            s.serialize_f64(*v)
        } else {
            s.serialize_none()
        }
    }

    pub fn deserialize<'de, D: Deserializer<'de>>(d: D) -> Result<f64, D::Error> {
        Ok(Option::<f64>::deserialize(d)?.unwrap_or(f64::INFINITY))
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ReportFormat {
    Json,
    Csv,
}

pub const CSV_HEADER: &str =
    "config,area_mb,area_mm2,latency_us,p_success,adcr,share_data,share_memory,share_qec,share_t,share_network";

pub fn csv_row(m: &Metrics) -> String {
    let s = &m.shares;
    format!(
        "{},{},{},{},{},{},{},{},{},{},{}",
        m.config, m.area_mb, m.area_mm2, m.latency_us, m.p_success, m.adcr, s.data, s.memory, s.qec, s.t, s.network
    )
}

/// JSON array or CSV table (header plus one row per entry).
pub fn emit_report(ms: &[Metrics], format: ReportFormat) -> String {
    match format {
        ReportFormat::Json => serde_json::to_string_pretty(ms).expect("metrics serialize"),
        ReportFormat::Csv => {
            let mut out = String::from(CSV_HEADER);
            out.push('\n');
            for m in ms {
                let _ = writeln!(out, "{}", csv_row(m));
            }
            out
        }
    }
}
