use serde::Serialize;

use crate::runtime::executor::Placement;

/// Per-stage accounting. Times are seconds on the runtime clock.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct MetricsRecord {
    pub iteration: usize,
    pub stage: usize,
    /// Last end minus first enqueue.
    pub ttx: f64,
    /// `ttx` minus the time during which at least one payload was running.
    pub eoh: f64,
    /// Raw time spent inside scheduler and completion handling.
    pub bookkeeping: f64,
    pub tasks: usize,
    pub frames: u64,
    pub bytes: u64,
}

/// Length of the union of half-open `[start, end)` intervals.
pub fn busy_envelope(intervals: &[(f64, f64)]) -> f64 {
    let mut iv: Vec<(f64, f64)> = intervals.iter().copied().filter(|(a, b)| b > a).collect();
    iv.sort_by(|a, b| a.0.total_cmp(&b.0));
    let mut total = 0.0;
    let mut cur: Option<(f64, f64)> = None;
    for (a, b) in iv {
        match cur {
            Some((ca, cb)) if a <= cb => cur = Some((ca, cb.max(b))),
            Some((ca, cb)) => {
                total += cb - ca;
                cur = Some((a, b));
            }
            None => cur = Some((a, b)),
        }
    }
    if let Some((a, b)) = cur {
        total += b - a;
    }
    total
}

pub fn record_metrics(
    iteration: usize,
    stage: usize,
    placements: &[Placement],
    bookkeeping: f64,
    frames: u64,
    bytes: u64,
) -> MetricsRecord {
    let (ttx, eoh) = if placements.is_empty() {
        (0.0, 0.0)
    } else {
        let first = placements.iter().map(|p| p.enqueue_ts).fold(f64::INFINITY, f64::min);
        let last = placements.iter().map(|p| p.end_ts).fold(f64::NEG_INFINITY, f64::max);
        let ttx = (last - first).max(0.0);
        let iv: Vec<(f64, f64)> = placements.iter().map(|p| (p.start_ts, p.end_ts)).collect();
        (ttx, (ttx - busy_envelope(&iv)).max(0.0))
    };
    MetricsRecord {
        iteration,
        stage,
        ttx,
        eoh,
        bookkeeping,
        tasks: placements.len(),
        frames,
        bytes,
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn envelope_merges_overlaps() {
        assert_eq!(busy_envelope(&[]), 0.0);
        assert_eq!(busy_envelope(&[(0.0, 1.0), (0.5, 2.0), (3.0, 4.0)]), 3.0);
        assert_eq!(busy_envelope(&[(3.0, 4.0), (0.0, 1.0), (1.0, 1.5)]), 2.5);
    }
}
