use serde::{Deserialize, Serialize};

use crate::divergence::{DEFAULT_EPSILON, DEFAULT_LOG_FLOOR};
use crate::ensemble::EligibilityPolicy;
use crate::spectral::SpectralParams;

pub const DEFAULT_BINS: usize = 100;

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum ConfigError {
    #[error("bins must be >= 2, got {0}")]
    Bins(usize),
    #[error("epsilon must be > 0, got {0}")]
    Epsilon(f64),
    #[error("log floor must be > 0, got {0}")]
    LogFloor(f64),
}

/// Every knob that influences a cPSE value. Reports embed a copy so that any
/// output can be reproduced from its own metadata.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RunConfig {
    pub bins: usize,
    pub epsilon: f64,
    pub log_floor: f64,
    pub eligibility: EligibilityPolicy,
    pub log_eigs: bool,
    pub skip_first: bool,
}

impl Default for RunConfig {
    fn default() -> Self {
        Self {
            bins: DEFAULT_BINS,
            epsilon: DEFAULT_EPSILON,
            log_floor: DEFAULT_LOG_FLOOR,
            eligibility: EligibilityPolicy::default(),
            log_eigs: false,
            skip_first: false,
        }
    }
}

impl RunConfig {
    pub fn validate(&self) -> Result<(), ConfigError> {
        if self.bins < 2 {
            return Err(ConfigError::Bins(self.bins));
        }
        if !(self.epsilon > 0.0 && self.epsilon.is_finite()) {
            return Err(ConfigError::Epsilon(self.epsilon));
        }
        if !(self.log_floor > 0.0 && self.log_floor.is_finite()) {
            return Err(ConfigError::LogFloor(self.log_floor));
        }
        Ok(())
    }

    pub fn spectral(&self) -> SpectralParams {
        SpectralParams {
            bins: self.bins,
            log_eigs: self.log_eigs,
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn defaults() {
        let c = RunConfig::default();
        assert_eq!((c.bins, c.epsilon, c.log_floor), (100, 1e-10, 1e-12));
        assert!(!c.log_eigs && !c.skip_first);
        assert!(c.validate().is_ok());
    }

    #[test]
    fn rejects_bad_values() {
        let bad = |f: fn(&mut RunConfig)| {
            let mut c = RunConfig::default();
            f(&mut c);
            c.validate().unwrap_err()
        };
        assert_eq!(bad(|c| c.bins = 1), ConfigError::Bins(1));
        assert_eq!(bad(|c| c.epsilon = 0.0), ConfigError::Epsilon(0.0));
        assert_eq!(bad(|c| c.log_floor = -1.0), ConfigError::LogFloor(-1.0));
    }
}
