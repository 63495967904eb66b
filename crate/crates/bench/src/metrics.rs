//! Long-horizon metrics: LH-k success rates and the average completed length.
//!
//! `LH-k` is the fraction of sequences whose first `k` subtasks all
//! succeeded; `Len = Σ LH-k`. Displayed values round half up to 0.1
//! percentage points and 0.01 respectively, computed in integers so the
//! display never depends on float noise.

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use crate::error::{BenchError, Result};

pub const HORIZON: usize = 5;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MetricsReport {
    pub n_sequences: usize,
    /// Sequences reaching depth ≥ k, for k = 1..=5.
    pub lh_counts: [usize; HORIZON],
    pub lh: [f64; HORIZON],
    pub len: f64,
    /// Table-style strings: `LH-1` .. `LH-5` and `Len`.
    pub display: BTreeMap<String, String>,
}

/// `round_half_up(num / den)` for non-negative integers.
fn div_round(num: u64, den: u64) -> u64 {
    (2 * num + den) / (2 * den)
}

/// `"91.8%"` for 918 per mille.
pub fn format_per_mille(pm: u64) -> String {
    format!("{}.{}%", pm / 10, pm % 10)
}

/// `"2.99"` for 299 hundredths.
pub fn format_hundredths(h: u64) -> String {
    format!("{}.{:02}", h / 100, h % 100)
}

pub fn metrics_from_depths(depths: &[usize]) -> Result<MetricsReport> {
    if depths.is_empty() {
        return Err(BenchError::EmptyLogs);
    }
    let n = depths.len();
    let mut lh_counts = [0usize; HORIZON];
    for &d in depths {
        for c in lh_counts.iter_mut().take(d.min(HORIZON)) {
            *c += 1;
        }
    }
    let lh = lh_counts.map(|c| c as f64 / n as f64);
    let total: usize = lh_counts.iter().sum();
    let len = total as f64 / n as f64;

    let n64 = n as u64;
    let mut display = BTreeMap::new();
    for (k, &c) in lh_counts.iter().enumerate() {
        display.insert(
            format!("LH-{}", k + 1),
            format_per_mille(div_round(1000 * c as u64, n64)),
        );
    }
    display.insert("Len".into(), format_hundredths(div_round(100 * total as u64, n64)));
    Ok(MetricsReport {
        n_sequences: n,
        lh_counts,
        lh,
        len,
        display,
    })
}

/// `Len` from published rates, e.g. `[0.918, 0.738, 0.562, 0.442, 0.334]`.
pub fn len_from_rates(rates: [f64; HORIZON]) -> f64 {
    rates.iter().sum()
}

/// Display string for [`len_from_rates`], rounding at per-mille first as
/// the published rates are.
pub fn format_len_from_rates(rates: [f64; HORIZON]) -> String {
    let pm: u64 = rates.iter().map(|r| (r * 1000.0).round() as u64).sum();
    format_hundredths(div_round(pm, 10))
}

/// Mean of per-form `Len` values.
pub fn average_len(lens: &[f64]) -> f64 {
    lens.iter().sum::<f64>() / lens.len().max(1) as f64
}

/// Mean of already-displayed `Len` values, in integer hundredths with
/// round half up: `(3.46, 3.58, 3.26, 3.60)` gives `"3.48"`.
pub fn format_average_len(lens: &[f64]) -> String {
    if lens.is_empty() {
        return format_hundredths(0);
    }
    let sum: u64 = lens.iter().map(|l| (l * 100.0).round() as u64).sum();
    format_hundredths(div_round(sum, lens.len() as u64))
}
