//! Datapath organizations as parameterized region catalogs, and their
//! placement on a 2-D grid of regions joined by teleport routers.

use crate::tech::{FactoryKind, Tech};
use serde::{Deserialize, Serialize};
use std::fmt;
use std::str::FromStr;
use thiserror::Error;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum DatapathKind {
    #[serde(rename = "qla")]
    Qla,
    #[serde(rename = "lqla")]
    Lqla,
    #[serde(rename = "cqla")]
    Cqla,
    #[serde(rename = "cqla+")]
    CqlaPlus,
    #[serde(rename = "qalypso")]
    Qalypso,
}

impl DatapathKind {
    pub const ALL: [DatapathKind; 5] = [
        DatapathKind::Qla,
        DatapathKind::Lqla,
        DatapathKind::Cqla,
        DatapathKind::CqlaPlus,
        DatapathKind::Qalypso,
    ];

    pub fn name(self) -> &'static str {
        match self {
            DatapathKind::Qla => "qla",
            DatapathKind::Lqla => "lqla",
            DatapathKind::Cqla => "cqla",
            DatapathKind::CqlaPlus => "cqla+",
            DatapathKind::Qalypso => "qalypso",
        }
    }

    pub fn factory(self) -> FactoryKind {
        match self {
            DatapathKind::Qla | DatapathKind::Cqla => FactoryKind::QlaBasic,
            DatapathKind::Lqla | DatapathKind::CqlaPlus => FactoryKind::LqlaOptimized,
            DatapathKind::Qalypso => FactoryKind::QalypsoPipelined,
        }
    }

    /// Fixed datapaths have a set number of generators per region and gates
    /// may stall waiting for ancilla.
    pub fn fixed_ancilla(self) -> bool {
        self != DatapathKind::Qalypso
    }
}

impl fmt::Display for DatapathKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for DatapathKind {
    type Err = DatapathError;
    fn from_str(s: &str) -> Result<Self, Self::Err> {
        DatapathKind::ALL
            .into_iter()
            .find(|k| k.name().eq_ignore_ascii_case(s) || (s == "cqlaplus" && *k == DatapathKind::CqlaPlus))
            .ok_or_else(|| DatapathError::UnknownKind(s.to_string()))
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum TPolicy {
    Anywhere,
    DesignatedSites,
}

#[derive(Debug, Error, PartialEq)]
pub enum DatapathError {
    #[error("unknown datapath `{0}`")]
    UnknownKind(String),
    #[error("{kind}: {msg}")]
    Mismatch { kind: DatapathKind, msg: String },
    #[error("datapath needs at least one data region")]
    NoDataRegions,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct DatapathConfig {
    pub kind: DatapathKind,
    /// Data (compute) regions.
    pub d: usize,
    /// Memory regions.
    pub m: usize,
    pub dq: usize,
    pub dag: usize,
    pub mq: usize,
    pub mag: usize,
    pub factory: FactoryKind,
    pub t_policy: TPolicy,
    /// T factories per data region (designated-sites policy only).
    pub t_factories: usize,
    /// Fraction of the measured peak router load that is provisioned.
    pub net_aggressiveness: f64,
}

impl DatapathConfig {
    /// Configuration with the fixed per-region parameters of `kind`.
    /// Qalypso starts with 16-qubit data regions and 64-qubit memory
    /// regions, one generator each; the mapper resizes generators.
    pub fn preset(kind: DatapathKind, d: usize, m: usize) -> Self {
        let (dq, dag, mq, mag) = match kind {
            DatapathKind::Qla | DatapathKind::Lqla => (2, 2, 0, 0),
            DatapathKind::Cqla => (36, 36, 64, 8),
            DatapathKind::CqlaPlus => (36, 36, 96, 12),
            DatapathKind::Qalypso => (16, 1, 64, 1),
        };
        let m = if matches!(kind, DatapathKind::Qla | DatapathKind::Lqla) {
            0
        } else {
            m
        };
        DatapathConfig {
            kind,
            d,
            m,
            dq,
            dag,
            mq,
            mag,
            factory: kind.factory(),
            t_policy: if kind == DatapathKind::Qalypso {
                TPolicy::DesignatedSites
            } else {
                TPolicy::Anywhere
            },
            t_factories: usize::from(kind == DatapathKind::Qalypso),
            net_aggressiveness: 1.0,
        }
    }

    /// Preset sized for a circuit of `qubits` logical qubits with `d` data
    /// regions: data regions start half full and memory takes the rest.
    /// QLA-style datapaths ignore `d` below one region per qubit.
    pub fn for_qubits(kind: DatapathKind, qubits: usize, d: usize) -> Self {
        let mut cfg = DatapathConfig::preset(kind, d.max(1), 0);
        match kind {
            DatapathKind::Qla | DatapathKind::Lqla => {
                cfg.d = d.max(qubits.div_ceil(2)).max(1);
            }
            _ => {
                let resident = cfg.d * (cfg.dq / 2);
                cfg.m = qubits.saturating_sub(resident).div_ceil(cfg.mq);
            }
        }
        cfg
    }

    pub fn validate(&self) -> Result<(), DatapathError> {
        let bad = |msg: &str| {
            Err(DatapathError::Mismatch {
                kind: self.kind,
                msg: msg.to_string(),
            })
        };
        if self.d == 0 {
            return Err(DatapathError::NoDataRegions);
        }
        if !(self.net_aggressiveness > 0.0 && self.net_aggressiveness <= 1.0) {
            return bad("network aggressiveness must be in (0, 1]");
        }
        match self.kind {
            DatapathKind::Qla | DatapathKind::Lqla => {
                if self.m != 0 || self.dq != 2 || self.dag != 2 {
                    return bad("needs M = 0, capacity 2 and 2 generators per region");
                }
                if self.t_policy != TPolicy::Anywhere {
                    return bad("T gates are allowed anywhere");
                }
            }
            DatapathKind::Cqla => {
                if (self.dq, self.dag, self.mq, self.mag) != (36, 36, 64, 8) {
                    return bad("needs 36/36 data and 64/8 memory regions");
                }
            }
            DatapathKind::CqlaPlus => {
                if (self.dq, self.dag, self.mq, self.mag) != (36, 36, 96, 12) {
                    return bad("needs 36/36 data and 96/12 memory regions");
                }
            }
            DatapathKind::Qalypso => {
                if self.dq == 0 || (self.m > 0 && self.mq == 0) {
                    return bad("regions need at least one qubit slot");
                }
                if self.t_policy != TPolicy::DesignatedSites || self.t_factories == 0 {
                    return bad("T gates need designated sites with at least one T factory");
                }
            }
        }
        if self.factory != self.kind.factory() {
            return bad("factory kind does not match datapath");
        }
        Ok(())
    }

    pub fn label(&self) -> String {
        format!("{}-D{}-M{}-a{}", self.kind, self.d, self.m, self.net_aggressiveness)
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum RegionKind {
    Data,
    Memory,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Region {
    pub id: usize,
    pub kind: RegionKind,
    /// (column, row) on the region grid.
    pub pos: (usize, usize),
    pub slots: usize,
    pub gens: usize,
    pub t_factories: usize,
    /// Provisioned router capacity (concurrent connections).
    pub router_capacity: u32,
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct Channel {
    pub a: usize,
    pub b: usize,
    pub length_mb: usize,
}

/// Area of one region split by attribution.
#[derive(Clone, Copy, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct RegionArea {
    pub slots: f64,
    pub factories: f64,
    pub t_factories: f64,
    pub router: f64,
}

impl RegionArea {
    pub fn total(&self) -> f64 {
        self.slots + self.factories + self.t_factories + self.router
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RegionLayout {
    pub config: DatapathConfig,
    pub regions: Vec<Region>,
    pub grid: (usize, usize),
    /// Side of a grid cell in macroblocks; regions fit inside a cell and
    /// channels run in the one-macroblock gutters between cells.
    pub cell_mb: usize,
    pub channels: Vec<Channel>,
}

/// Axis-aligned rectangle in macroblock units: (x, y, w, h).
pub type Rect = (usize, usize, usize, usize);

pub fn instantiate(cfg: &DatapathConfig, tech: &Tech) -> Result<RegionLayout, DatapathError> {
    cfg.validate()?;
    let n = cfg.d + cfg.m;
    let w = (1..=n).find(|w| w * w >= n).unwrap_or(1);
    let h = n.div_ceil(w);
    // Data regions take the cells nearest the grid center.
    let (cx, cy) = ((w as f64 - 1.0) / 2.0, (h as f64 - 1.0) / 2.0);
    let mut cells: Vec<(usize, usize)> = (0..h).flat_map(|y| (0..w).map(move |x| (x, y))).take(n).collect();
    cells.sort_by(|a, b| {
        let da = (a.0 as f64 - cx).abs() + (a.1 as f64 - cy).abs();
        let db = (b.0 as f64 - cx).abs() + (b.1 as f64 - cy).abs();
        da.total_cmp(&db).then((a.1, a.0).cmp(&(b.1, b.0)))
    });
    let cap = if cfg.kind.fixed_ancilla() {
        tech.router.fixed_capacity
    } else {
        1
    };
    let mut regions: Vec<Region> = cells
        .iter()
        .enumerate()
        .map(|(id, &pos)| {
            let data = id < cfg.d;
            Region {
                id,
                kind: if data { RegionKind::Data } else { RegionKind::Memory },
                pos,
                slots: if data { cfg.dq } else { cfg.mq },
                gens: if data { cfg.dag } else { cfg.mag },
                t_factories: if data && cfg.t_policy == TPolicy::DesignatedSites {
                    cfg.t_factories
                } else {
                    0
                },
                router_capacity: cap,
            }
        })
        .collect();
    regions.sort_by_key(|r| (r.kind == RegionKind::Memory, r.pos.1, r.pos.0));
    for (i, r) in regions.iter_mut().enumerate() {
        r.id = i;
    }
    let mut layout = RegionLayout {
        config: cfg.clone(),
        regions,
        grid: (w, h),
        cell_mb: 0,
        channels: Vec::new(),
    };
    layout.refresh(tech);
    Ok(layout)
}

impl RegionLayout {
    /// Recomputes cell size and channels after region contents change.
    pub fn refresh(&mut self, tech: &Tech) {
        let max_area = self
            .regions
            .iter()
            .map(|r| region_area(r, &self.config, tech).total())
            .fold(1.0, f64::max);
        self.cell_mb = (max_area.sqrt().ceil() as usize).max(1);
        let mut at = vec![usize::MAX; self.grid.0 * self.grid.1];
        for r in &self.regions {
            at[r.pos.1 * self.grid.0 + r.pos.0] = r.id;
        }
        self.channels.clear();
        for r in &self.regions {
            let (x, y) = r.pos;
            for (nx, ny) in [(x + 1, y), (x, y + 1)] {
                if nx < self.grid.0 && ny < self.grid.1 {
                    let o = at[ny * self.grid.0 + nx];
                    if o != usize::MAX {
                        self.channels.push(Channel {
                            a: r.id,
                            b: o,
                            length_mb: self.cell_mb,
                        });
                    }
                }
            }
        }
    }

    pub fn data_regions(&self) -> impl Iterator<Item = &Region> {
        self.regions.iter().filter(|r| r.kind == RegionKind::Data)
    }

    pub fn memory_regions(&self) -> impl Iterator<Item = &Region> {
        self.regions.iter().filter(|r| r.kind == RegionKind::Memory)
    }

    pub fn capacity(&self) -> usize {
        self.regions.iter().map(|r| r.slots).sum()
    }

    pub fn hops(&self, a: usize, b: usize) -> usize {
        let (pa, pb) = (self.regions[a].pos, self.regions[b].pos);
        pa.0.abs_diff(pb.0) + pa.1.abs_diff(pb.1)
    }

    /// Regions whose routers a connection from `a` to `b` occupies under
    /// X-then-Y dimension-ordered routing, endpoints included. Grid cells
    /// without a region (the ragged last row) are skipped.
    pub fn route(&self, a: usize, b: usize) -> Vec<usize> {
        let (w, _) = self.grid;
        let mut at = vec![usize::MAX; self.grid.0 * self.grid.1];
        for r in &self.regions {
            at[r.pos.1 * w + r.pos.0] = r.id;
        }
        let (mut x, mut y) = self.regions[a].pos;
        let (tx, ty) = self.regions[b].pos;
        let mut path = vec![a];
        while (x, y) != (tx, ty) {
            if x != tx {
                x = if tx > x { x + 1 } else { x - 1 };
            } else {
                y = if ty > y { y + 1 } else { y - 1 };
            }
            let id = at[y * w + x];
            if id != usize::MAX {
                path.push(id);
            }
        }
        path
    }

    pub fn channel_area(&self) -> f64 {
        self.channels.iter().map(|c| c.length_mb as f64).sum()
    }

    pub fn total_area(&self, tech: &Tech) -> f64 {
        self.regions
            .iter()
            .map(|r| region_area(r, &self.config, tech).total())
            .sum::<f64>()
            + self.channel_area()
    }

    /// Region and channel footprints. Each region is a `cell × ceil(area /
    /// cell)` block at its cell origin; channels fill the gutters.
    pub fn rects(&self, tech: &Tech) -> (Vec<Rect>, Vec<Rect>) {
        let p = self.cell_mb;
        let regions = self
            .regions
            .iter()
            .map(|r| {
                let a = region_area(r, &self.config, tech).total().ceil() as usize;
                (r.pos.0 * (p + 1), r.pos.1 * (p + 1), p, a.div_ceil(p).max(1))
            })
            .collect();
        let channels = self
            .channels
            .iter()
            .map(|c| {
                let (pa, pb) = (self.regions[c.a].pos, self.regions[c.b].pos);
                if pa.1 == pb.1 {
                    let x = pa.0.min(pb.0);
                    (x * (p + 1) + p, pa.1 * (p + 1), 1, c.length_mb)
                } else {
                    let y = pa.1.min(pb.1);
                    (pa.0 * (p + 1), y * (p + 1) + p, c.length_mb, 1)
                }
            })
            .collect();
        (regions, channels)
    }
}

pub fn region_area(r: &Region, cfg: &DatapathConfig, tech: &Tech) -> RegionArea {
    RegionArea {
        slots: r.slots as f64 * tech.geometry.slot_area_mb,
        factories: r.gens as f64 * tech.factories.get(cfg.factory).area_mb,
        t_factories: r.t_factories as f64 * tech.factories.t_factory.area_mb,
        router: tech.router.area(r.router_capacity),
    }
}
