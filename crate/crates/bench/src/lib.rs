//! Fixtures shared by the criterion benches.

use finsler::catalog;
use finsler::FinslerStructure;

/// Tangent vectors at which kernels are timed.
pub fn pond_points() -> Vec<(Vec<f64>, Vec<f64>)> {
    catalog::pond().sample_tangents(16, 42)
}

pub fn sphere(n: usize) -> FinslerStructure {
    catalog::sphere_polar(1.0, n).expect("valid sphere").structure
}
