//! Ancilla-generator and router sizing from a finished schedule.

use super::{Demand, MappedSchedule};
use crate::datapath::{RegionKind, RegionLayout};
use crate::tech::Tech;
use serde::{Deserialize, Serialize};

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct NetworkSizing {
    /// Peak concurrent connections traversing or terminating at each router.
    pub peak: Vec<u32>,
    /// Capacity each router is built for.
    pub provisioned: Vec<u32>,
    pub area_mb: Vec<f64>,
}

impl NetworkSizing {
    pub fn total_area(&self) -> f64 {
        self.area_mb.iter().sum()
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct AncillaSizing {
    /// Zero-ancilla generators per region.
    pub gens: Vec<usize>,
    /// T factories per region.
    pub t_factories: Vec<usize>,
}

/// Provisioned router capacity for a measured peak.
pub(crate) fn provision(peak: u32, aggressiveness: f64) -> u32 {
    if peak == 0 {
        0
    } else {
        ((aggressiveness * peak as f64 - 1e-9).ceil() as u32).max(1)
    }
}

/// Largest demand, in blocks per µs, over any window of length `window`.
pub fn peak_rate(demand: &[Demand], window: f64) -> f64 {
    let mut d: Vec<Demand> = demand.to_vec();
    d.sort_by(|a, b| a.time.total_cmp(&b.time));
    let (mut best, mut sum, mut lo) = (0u64, 0u64, 0usize);
    for hi in 0..d.len() {
        sum += d[hi].blocks as u64;
        while d[lo].time <= d[hi].time - window {
            sum -= d[lo].blocks as u64;
            lo += 1;
        }
        best = best.max(sum);
    }
    best as f64 / window
}

fn units(rate: f64, throughput: f64) -> usize {
    if rate <= 0.0 {
        0
    } else {
        ((rate / throughput - 1e-9).ceil() as usize).max(1)
    }
}

/// Generators per region to meet the peak demand rate, measured over one
/// factory latency. Memory regions are sized from their idle corrections.
pub fn size_ancilla(s: &MappedSchedule, layout: &RegionLayout, tech: &Tech) -> AncillaSizing {
    let f = tech.factories.get(layout.config.factory);
    let tf = &tech.factories.t_factory;
    let gens = layout
        .regions
        .iter()
        .map(|r| units(peak_rate(&s.zero_demand[r.id], f.latency_us), f.throughput_per_us))
        .collect();
    let t_factories = layout
        .regions
        .iter()
        .map(|r| match r.kind {
            RegionKind::Data => units(peak_rate(&s.t_demand[r.id], tf.latency_us), tf.throughput_per_us),
            RegionKind::Memory => 0,
        })
        .collect();
    AncillaSizing { gens, t_factories }
}

/// Peak router load over the schedule. Connections hold every router on
/// their route for their whole duration; one ending exactly when another
/// starts does not overlap it.
pub fn size_network(s: &MappedSchedule, layout: &RegionLayout, tech: &Tech) -> NetworkSizing {
    let n = layout.regions.len();
    let mut events: Vec<Vec<(f64, i32)>> = vec![Vec::new(); n];
    for c in &s.connections {
        for &r in &c.routers {
            events[r].push((c.start, 1));
            events[r].push((c.end, -1));
        }
    }
    let peak: Vec<u32> = events
        .into_iter()
        .map(|mut ev| {
            ev.sort_by(|a, b| a.0.total_cmp(&b.0).then(a.1.cmp(&b.1)));
            let (mut cur, mut best) = (0i32, 0i32);
            for (_, d) in ev {
                cur += d;
                best = best.max(cur);
            }
            best as u32
        })
        .collect();
    let provisioned: Vec<u32> = layout.regions.iter().map(|r| r.router_capacity).collect();
    let area_mb = provisioned.iter().map(|&p| tech.router.area(p)).collect();
    NetworkSizing {
        peak,
        provisioned,
        area_mb,
    }
}
