use std::collections::BTreeMap;
use std::io::Write;

use serde::Serialize;

use super::ScoreRow;
use crate::error::Result;

/// Five-number summary plus mean.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct BoxStats {
    pub min: f64,
    pub q1: f64,
    pub median: f64,
    pub q3: f64,
    pub max: f64,
    pub mean: f64,
}

impl BoxStats {
    pub fn iqr(&self) -> f64 {
        self.q3 - self.q1
    }
}

/// Linear-interpolation quantile of sorted data (the usual "type 7" rule).
fn quantile_sorted(sorted: &[f64], q: f64) -> f64 {
    let pos = q * (sorted.len() - 1) as f64;
    let lo = pos.floor() as usize;
    let hi = pos.ceil() as usize;
    sorted[lo] + (pos - lo as f64) * (sorted[hi] - sorted[lo])
}

/// Box statistics of a nonempty sample.
pub fn box_stats(values: &[f64]) -> Option<BoxStats> {
    if values.is_empty() {
        return None;
    }
    let mut s = values.to_vec();
    s.sort_by(f64::total_cmp);
    Some(BoxStats {
        min: s[0],
        q1: quantile_sorted(&s, 0.25),
        median: quantile_sorted(&s, 0.5),
        q3: quantile_sorted(&s, 0.75),
        max: s[s.len() - 1],
        mean: s.iter().sum::<f64>() / s.len() as f64,
    })
}

/// Scores of one method in one cell.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct CellResult {
    pub cell: String,
    pub method: String,
    /// Per-replicate Jaccard indices in replicate order.
    pub scores: Vec<f64>,
    pub stats: BoxStats,
    /// 1 = best mean Jaccard within the cell.
    pub rank: usize,
}

/// Groups score rows by `(cell, method)`, computes box statistics and ranks
/// methods within each cell by mean Jaccard (ties broken by method name).
pub fn summarize(rows: &[ScoreRow]) -> Vec<CellResult> {
    let mut groups: BTreeMap<(String, String), Vec<(usize, f64)>> = BTreeMap::new();
    for r in rows {
        groups
            .entry((r.cell.clone(), r.method_label()))
            .or_default()
            .push((r.replicate, r.jaccard));
    }
    let mut out: Vec<CellResult> = groups
        .into_iter()
        .map(|((cell, method), mut reps)| {
            reps.sort_by_key(|&(r, _)| r);
            let scores: Vec<f64> = reps.into_iter().map(|(_, j)| j).collect();
            let stats = box_stats(&scores).expect("groups are nonempty");
            CellResult { cell, method, scores, stats, rank: 0 }
        })
        .collect();

    let mut by_cell: BTreeMap<String, Vec<usize>> = BTreeMap::new();
    for (i, c) in out.iter().enumerate() {
        by_cell.entry(c.cell.clone()).or_default().push(i);
    }
    for idx in by_cell.values() {
        let mut order = idx.clone();
        order.sort_by(|&a, &b| {
            out[b].stats.mean.total_cmp(&out[a].stats.mean).then_with(|| out[a].method.cmp(&out[b].method))
        });
        for (rank, i) in order.into_iter().enumerate() {
            out[i].rank = rank + 1;
        }
    }
    out
}

/// Writes the summary as CSV: one row per `(cell, method)`.
pub fn write_summary_csv<W: Write>(results: &[CellResult], w: W) -> Result<()> {
    let mut csv = csv::Writer::from_writer(w);
    csv.write_record(["cell", "method", "n", "mean", "min", "q1", "median", "q3", "max", "rank"])?;
    for r in results {
        let s = &r.stats;
        csv.write_record([
            r.cell.clone(),
            r.method.clone(),
            r.scores.len().to_string(),
            s.mean.to_string(),
            s.min.to_string(),
            s.q1.to_string(),
            s.median.to_string(),
            s.q3.to_string(),
            s.max.to_string(),
            r.rank.to_string(),
        ])?;
    }
    csv.flush()?;
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn five_value_median() {
        let s = box_stats(&[0.5, 0.1, 0.4, 0.2, 0.3]).unwrap();
        assert!((s.median - 0.3).abs() < 1e-15);
        assert!((s.q1 - 0.2).abs() < 1e-15 && (s.q3 - 0.4).abs() < 1e-15);
        assert_eq!((s.min, s.max), (0.1, 0.5));
    }

    #[test]
    fn constant_scores_have_zero_iqr() {
        let s = box_stats(&[0.7; 6]).unwrap();
        assert_eq!(s.iqr(), 0.0);
        assert!(box_stats(&[]).is_none());
    }
}
