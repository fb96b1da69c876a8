use serde::{Deserialize, Serialize};

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum StopDecision {
    Improved,
    NoImprovement,
    Stop,
}

/// Patience-based early stopping on a metric to minimise.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct EarlyStopping {
    pub patience: usize,
    pub best: f64,
    pub best_epoch: usize,
    pub epochs_since_improvement: usize,
}

impl EarlyStopping {
    pub fn new(patience: usize) -> Self {
        Self { patience, best: f64::MAX, best_epoch: 0, epochs_since_improvement: 0 }
    }

    /// Records the metric for `epoch`; a strict decrease counts as improvement.
    pub fn observe(&mut self, epoch: usize, metric: f64) -> StopDecision {
        if metric < self.best {
            self.best = metric;
            self.best_epoch = epoch;
            self.epochs_since_improvement = 0;
            return StopDecision::Improved;
        }
        self.epochs_since_improvement += 1;
        if self.epochs_since_improvement >= self.patience {
            StopDecision::Stop
        } else {
            StopDecision::NoImprovement
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn constant_metric_stops_after_baseline_plus_patience() {
        let mut s = EarlyStopping::new(10);
        let mut last = 0;
        for epoch in 1..100 {
            last = epoch;
            if s.observe(epoch, 0.5) == StopDecision::Stop {
                break;
            }
        }
        assert_eq!(last, 11);
        assert_eq!(s.best_epoch, 1);
    }

    #[test]
    fn improvement_resets_counter() {
        let mut s = EarlyStopping::new(2);
        assert_eq!(s.observe(1, 3.0), StopDecision::Improved);
        assert_eq!(s.observe(2, 3.0), StopDecision::NoImprovement);
        assert_eq!(s.observe(3, 2.0), StopDecision::Improved);
        assert_eq!(s.observe(4, 2.5), StopDecision::NoImprovement);
        assert_eq!(s.observe(5, 2.5), StopDecision::Stop);
    }
}
