//! Shared fixtures for the benchmarks.

use std::sync::Arc;

use stablekit::kernel::WeaklyHoelderKernel;
use stablekit::path::EulerConfig;
use stablekit::{KernelModel, Point, VariableOrderKernel};

pub fn stable(dim: usize, alpha: f64) -> KernelModel {
    KernelModel::stable(dim, alpha, 1.0).expect("valid stable model")
}

pub fn ou(dim: usize, alpha: f64) -> KernelModel {
    stable(dim, alpha).with_drift(Arc::new(|x: &Point| -*x))
}

pub fn variable_order() -> KernelModel {
    VariableOrderKernel::new(1.2, 1.5, 1.8).and_then(|k| k.model(1)).expect("valid variable-order model")
}

pub fn weakly_hoelder(alpha: f64) -> KernelModel {
    WeaklyHoelderKernel {
        amp: 0.2,
        omega: 3.0,
        theta: 0.5,
        skew: 0.0,
    }
    .model(1, alpha)
    .expect("valid weakly Hölder model")
}

pub fn euler(dt: f64, alpha: f64) -> EulerConfig {
    EulerConfig::new(dt, 100.0, alpha)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn fixtures_build() {
        assert_eq!(stable(2, 1.5).dim, 2);
        assert!(!ou(1, 1.5).drift_is_zero);
        assert!(!variable_order().symmetric);
        assert_eq!(weakly_hoelder(1.6).alpha, 1.6);
        assert!(euler(1e-3, 1.5).check().is_ok());
    }
}
