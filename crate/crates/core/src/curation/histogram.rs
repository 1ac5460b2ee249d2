//! Equal-width score histograms for duration, text cover, aesthetics and flow.

use std::io::Write;

use serde::{Deserialize, Serialize};

use super::{ClipScores, CurationError, Result};

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct HistogramRow {
    pub dimension: String,
    pub bin_lo: f64,
    pub bin_hi: f64,
    pub count: usize,
}

fn bins_for(name: &str, values: &[f64], bins: usize) -> Vec<HistogramRow> {
    if values.is_empty() {
        return Vec::new();
    }
    let mut lo = values.iter().copied().fold(f64::INFINITY, f64::min);
    let mut hi = values.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    if hi <= lo {
        lo -= 0.5;
        hi += 0.5;
    }
    let width = (hi - lo) / bins as f64;
    let mut counts = vec![0usize; bins];
    for &v in values {
        let b = (((v - lo) / width).floor() as usize).min(bins - 1);
        counts[b] += 1;
    }
    counts
        .into_iter()
        .enumerate()
        .map(|(i, count)| HistogramRow {
            dimension: name.to_string(),
            bin_lo: lo + width * i as f64,
            bin_hi: if i + 1 == bins { hi } else { lo + width * (i + 1) as f64 },
            count,
        })
        .collect()
}

/// `bins` equal-width bins per dimension over the observed range. A
/// dimension whose values are all equal gets a unit-wide range around them.
/// Absent scores are left out of that dimension's counts.
pub fn histogram_report(scores: &[ClipScores], bins: usize) -> Result<Vec<HistogramRow>> {
    if scores.is_empty() || bins == 0 {
        return Err(CurationError::EmptyHistogram);
    }
    let column = |f: fn(&ClipScores) -> Option<f64>| scores.iter().filter_map(f).collect::<Vec<f64>>();
    let mut rows = bins_for("duration", &column(|s| Some(s.duration)), bins);
    rows.extend(bins_for("text_cover", &column(|s| s.text_cover), bins));
    rows.extend(bins_for("aesthetic", &column(|s| s.aesthetic), bins));
    rows.extend(bins_for("flow", &column(|s| s.flow), bins));
    Ok(rows)
}

/// CSV with header `dimension,bin_lo,bin_hi,count`.
pub fn write_histogram_csv(rows: &[HistogramRow], writer: impl Write) -> Result<()> {
    let mut w = csv::Writer::from_writer(writer);
    if rows.is_empty() {
        w.write_record(["dimension", "bin_lo", "bin_hi", "count"])?;
    }
    for row in rows {
        w.serialize(row)?;
    }
    w.flush()?;
    Ok(())
}
