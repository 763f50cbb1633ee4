/// Running mean of observed baseline rewards with a Hoeffding radius
/// `√(ln(2T/δ) / (2·count))`.
#[derive(Debug, Clone, PartialEq)]
pub struct BaselineEstimator {
    count: u64,
    sum: f64,
    horizon: u64,
    delta: f64,
}

impl BaselineEstimator {
    pub fn new(horizon: u64, delta: f64) -> Self {
        Self {
            count: 0,
            sum: 0.0,
            horizon: horizon.max(1),
            delta,
        }
    }

    pub fn observe(&mut self, reward: f64) {
        self.count += 1;
        self.sum += reward;
    }

    pub fn count(&self) -> u64 {
        self.count
    }

    pub fn mean(&self) -> f64 {
        if self.count == 0 {
            0.0
        } else {
            self.sum / self.count as f64
        }
    }

    pub fn radius(&self) -> f64 {
        if self.count == 0 {
            return f64::INFINITY;
        }
        ((2.0 * self.horizon as f64 / self.delta).ln() / (2.0 * self.count as f64)).sqrt()
    }

    /// Upper confidence bound on the baseline reward; 1 before any sample.
    pub fn upper(&self) -> f64 {
        if self.count == 0 {
            1.0
        } else {
            (self.mean() + self.radius()).min(1.0)
        }
    }
}
