/// Max-norm change of `cur` relative to `prev`, `max|cur - prev| / max|prev|`.
/// An all-zero `prev` makes the change absolute.
pub fn relative_change(prev: &[f64], cur: &[f64]) -> f64 {
    assert_eq!(prev.len(), cur.len(), "samples must cover the same cells");
    let diff = prev.iter().zip(cur).fold(0.0f64, |m, (a, b)| m.max((b - a).abs()));
    let scale = prev.iter().fold(0.0f64, |m, a| m.max(a.abs()));
    if diff == 0.0 {
        0.0
    } else if scale > 0.0 {
        diff / scale
    } else {
        diff
    }
}

/// Relative change between the last two samples of a depth history.
pub fn steady_state_monitor(history: &[Vec<f64>]) -> f64 {
    assert!(history.len() >= 2, "need at least two samples");
    let n = history.len();
    relative_change(&history[n - 2], &history[n - 1])
}

/// Running monitor keeping only the previous sample.
#[derive(Debug, Clone, Default)]
pub struct SteadyStateMonitor {
    prev: Option<Vec<f64>>,
    /// `(time, relative change)` for every sample after the first.
    pub changes: Vec<(f64, f64)>,
}

impl SteadyStateMonitor {
    pub fn sample(&mut self, t: f64, h: Vec<f64>) -> Option<f64> {
        let change = self.prev.as_deref().map(|p| relative_change(p, &h));
        if let Some(c) = change {
            self.changes.push((t, c));
        }
        self.prev = Some(h);
        change
    }

    pub fn last(&self) -> Option<f64> {
        self.changes.last().map(|c| c.1)
    }
}
