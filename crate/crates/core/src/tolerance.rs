use serde::{Deserialize, Serialize};

/// Numerical tolerances shared by every module.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ToleranceConfig {
    pub abs: f64,
    pub rel: f64,
    /// Frame orthonormality tolerance.
    pub frame: f64,
}

impl Default for ToleranceConfig {
    fn default() -> Self {
        Self { abs: 1e-9, rel: 1e-7, frame: 1e-12 }
    }
}

impl ToleranceConfig {
    pub fn close(&self, a: f64, b: f64) -> bool {
        let diff = (a - b).abs();
        diff <= self.abs || diff <= self.rel * a.abs().max(b.abs())
    }

    pub fn leq(&self, a: f64, b: f64) -> bool {
        a <= b || self.close(a, b)
    }
}

pub const DEFAULT_TOL: ToleranceConfig = ToleranceConfig { abs: 1e-9, rel: 1e-7, frame: 1e-12 };
