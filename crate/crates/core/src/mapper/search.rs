//! Sweep over datapath configurations for the lowest ADCR.

use super::MapError;
use crate::datapath::{DatapathConfig, DatapathKind};
use crate::par;

#[derive(Clone, Debug)]
pub struct SweepRow<T> {
    pub config: DatapathConfig,
    pub adcr: Option<f64>,
    pub error: Option<String>,
    pub result: Option<T>,
}

#[derive(Clone, Debug)]
pub struct SearchResult<T> {
    pub best: usize,
    pub rows: Vec<SweepRow<T>>,
}

impl<T> SearchResult<T> {
    pub fn best(&self) -> &SweepRow<T> {
        &self.rows[self.best]
    }

    pub fn best_result(&self) -> &T {
        self.rows[self.best].result.as_ref().expect("best row succeeded")
    }
}

/// Evaluates every point (in parallel when enabled) and keeps the one with
/// the smallest ADCR; ties go to the earlier point. Failed points are kept
/// in the table with their error.
pub fn adcr_search<T, F>(points: &[DatapathConfig], eval: F) -> Result<SearchResult<T>, MapError>
where
    T: Send,
    F: Fn(&DatapathConfig) -> Result<(f64, T), MapError> + Sync + Send,
{
    if points.is_empty() {
        return Err(MapError::Invalid("empty sweep".into()));
    }
    let results = par::map(points, |cfg| eval(cfg));
    let mut rows = Vec::with_capacity(points.len());
    let mut best: Option<(usize, f64)> = None;
    for (i, (cfg, res)) in points.iter().zip(results).enumerate() {
        match res {
            Ok((adcr, r)) => {
                if best.is_none_or(|(_, b)| adcr < b) {
                    best = Some((i, adcr));
                }
                rows.push(SweepRow {
                    config: cfg.clone(),
                    adcr: Some(adcr),
                    error: None,
                    result: Some(r),
                });
            }
            Err(e) => rows.push(SweepRow {
                config: cfg.clone(),
                adcr: None,
                error: Some(e.to_string()),
                result: None,
            }),
        }
    }
    let (best, _) = best.ok_or(MapError::AllFailed)?;
    Ok(SearchResult { best, rows })
}

/// Configurations of `kind` for each data-region count and network
/// aggressiveness, with memory sized to hold the remaining qubits.
/// Duplicates (QLA-style datapaths clamp D) are dropped.
pub fn d_sweep(kind: DatapathKind, qubits: usize, ds: &[usize], aggressiveness: &[f64]) -> Vec<DatapathConfig> {
    let mut out: Vec<DatapathConfig> = Vec::new();
    for &d in ds {
        for &a in aggressiveness {
            let mut cfg = DatapathConfig::for_qubits(kind, qubits, d);
            cfg.net_aggressiveness = a;
            if !out.contains(&cfg) {
                out.push(cfg);
            }
        }
    }
    out
}
