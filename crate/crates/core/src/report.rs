use serde::{Deserialize, Serialize};

/// Summary of a numerical certification: `pass` iff every instance had
/// slack `≥ 0` after its tolerance.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CheckReport {
    pub check: String,
    pub instances: usize,
    /// Smallest `tolerance + (rhs − lhs)` seen; negative means a failure.
    pub worst_slack: f64,
    pub pass: bool,
}

impl CheckReport {
    pub fn new(check: impl Into<String>) -> Self {
        Self {
            check: check.into(),
            instances: 0,
            worst_slack: f64::INFINITY,
            pass: true,
        }
    }

    /// Records one instance with the given slack (already including tolerance).
    pub fn record(&mut self, slack: f64) {
        self.instances += 1;
        if slack < self.worst_slack || slack.is_nan() {
            self.worst_slack = slack;
        }
        if !(slack >= 0.0) {
            self.pass = false;
        }
    }

    pub fn merge(&mut self, other: &CheckReport) {
        self.instances += other.instances;
        if other.worst_slack < self.worst_slack || other.worst_slack.is_nan() {
            self.worst_slack = other.worst_slack;
        }
        self.pass &= other.pass;
    }
}
