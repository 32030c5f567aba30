use serde::{Deserialize, Serialize};

use crate::error::ConfigError;

/// Strictly decreasing positive regularization parameters.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "Vec<f64>", into = "Vec<f64>")]
pub struct EpsSchedule(Vec<f64>);

impl EpsSchedule {
    pub fn new(values: Vec<f64>) -> Result<Self, ConfigError> {
        if values.is_empty() {
            return Err(ConfigError::Parameter("epsilon schedule is empty".into()));
        }
        if values.iter().any(|e| !(*e > 0.0) || !e.is_finite()) {
            return Err(ConfigError::Parameter("epsilon values must be positive".into()));
        }
        if values.windows(2).any(|w| !(w[1] < w[0])) {
            return Err(ConfigError::Parameter("epsilon schedule must be strictly decreasing".into()));
        }
        Ok(EpsSchedule(values))
    }

    /// `start, start·ratio, …` down to the last value not below `end`
    /// (with a relative slack of 1e-9).
    pub fn geometric(start: f64, end: f64, ratio: f64) -> Result<Self, ConfigError> {
        if !(ratio > 0.0 && ratio < 1.0) {
            return Err(ConfigError::Parameter(format!("ratio must lie in (0, 1), got {ratio}")));
        }
        if !(end > 0.0 && end <= start) {
            return Err(ConfigError::Parameter("need 0 < end <= start".into()));
        }
        let mut values = vec![start];
        loop {
            let next = values.last().unwrap() * ratio;
            if next < end * (1.0 - 1e-9) {
                break;
            }
            values.push(next);
        }
        Self::new(values)
    }

    /// `8h, 4h, 2h`.
    pub fn for_spacing(h: f64) -> Result<Self, ConfigError> {
        Self::geometric(8.0 * h, 2.0 * h, 0.5)
    }

    pub fn values(&self) -> &[f64] {
        &self.0
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }
}

impl TryFrom<Vec<f64>> for EpsSchedule {
    type Error = ConfigError;

    fn try_from(values: Vec<f64>) -> Result<Self, ConfigError> {
        Self::new(values)
    }
}

impl From<EpsSchedule> for Vec<f64> {
    fn from(s: EpsSchedule) -> Vec<f64> {
        s.0
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn default_schedule() {
        let h = 1.0 / 64.0;
        let s = EpsSchedule::for_spacing(h).unwrap();
        assert_eq!(s.values(), &[8.0 * h, 4.0 * h, 2.0 * h]);
    }

    #[test]
    fn rejects_bad_schedules() {
        assert!(EpsSchedule::new(vec![]).is_err());
        assert!(EpsSchedule::new(vec![0.1, 0.1]).is_err());
        assert!(EpsSchedule::new(vec![0.1, -0.05]).is_err());
        assert!(EpsSchedule::geometric(0.1, 0.2, 0.5).is_err());
        assert!(EpsSchedule::geometric(0.1, 0.01, 1.5).is_err());
    }
}
