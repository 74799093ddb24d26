//! Adjusted Rand index over ground-truth foreground pixels.

use std::collections::BTreeMap;

use super::MetricsError;

fn pairs(n: u64) -> f64 {
    (n * n.saturating_sub(1)) as f64 / 2.0
}

/// ARI between `gt` and `pred` restricted to pixels where `gt` is not
/// `background`. Returns 1.0 when the expected and maximum index agree,
/// which happens only for identical degenerate partitions.
pub fn fg_ari(gt: &[u32], pred: &[u32], background: u32) -> Result<f64, MetricsError> {
    if gt.len() != pred.len() {
        return Err(MetricsError::ShapeMismatch(format!("gt {} pixels, pred {}", gt.len(), pred.len())));
    }
    let mut table: BTreeMap<(u32, u32), u64> = BTreeMap::new();
    let mut rows: BTreeMap<u32, u64> = BTreeMap::new();
    let mut cols: BTreeMap<u32, u64> = BTreeMap::new();
    let mut n = 0u64;
    for (&g, &p) in gt.iter().zip(pred).filter(|(g, _)| **g != background) {
        *table.entry((g, p)).or_insert(0) += 1;
        *rows.entry(g).or_insert(0) += 1;
        *cols.entry(p).or_insert(0) += 1;
        n += 1;
    }
    if n == 0 {
        return Err(MetricsError::NoForeground);
    }
    let index: f64 = table.values().map(|&c| pairs(c)).sum();
    let a: f64 = rows.values().map(|&c| pairs(c)).sum();
    let b: f64 = cols.values().map(|&c| pairs(c)).sum();
    let total = pairs(n);
    let expected = if total > 0.0 { a * b / total } else { 0.0 };
    let max = 0.5 * (a + b);
    if max == expected {
        return Ok(1.0);
    }
    Ok((index - expected) / (max - expected))
}
