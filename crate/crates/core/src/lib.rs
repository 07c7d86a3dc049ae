//! Computational Finsler geometry.
//!
//! Structures are given by a norm `F(x, y)` on a coordinate chart. Exact
//! derivatives come from truncated multivariate Taylor jets, on top of which
//! the crate builds the fundamental and Cartan tensors, the spray and Cartan
//! connection, flag curvature, geodesics, Finsler gradients and transnormal
//! wavefronts, and rigidity checks for warped and polar sphere metrics.

pub mod catalog;
pub mod connections;
pub mod diffcalc;
pub mod dsl;
pub mod error;
pub mod geodesics;
pub mod quadrature;
pub mod rigidity;
pub mod structure;
pub mod tensors;
pub mod transnormal;
pub mod zermelo;

pub use connections::{
    cartan_connection, constant_curvature_scan, contracted_curvature, flag_curvature, horizontal_covariant_derivative,
    spray, warped_curvature_components, CurvatureScan, TensorField,
};
pub use diffcalc::{Jet, JetSpace, ScalarField};
pub use dsl::{parse, parse_profile, BaseExpr, Expr, MetricSpec};
pub use error::{FinslerError, Result};
pub use geodesics::{exponential_map, integrate_geodesic, parallel_transport, GeodesicPath, Integrator};
pub use rigidity::{
    adapted_block_check, build_sphere_polar, k_form_check, obata_tensor_residual, rigidity_report, special_solution,
    LevelMetric, SpecialSolution, WarpedStructure,
};
pub use structure::{Domain, FinslerStructure};
pub use tensors::{cartan_tensor, fundamental_tensor, verify_structure, ValidityReport};
pub use transnormal::{
    classify_by_critical_points, finsler_gradient, transnormality_test, wavefront_radius, GradientValue,
    TransnormalProfile,
};
pub use zermelo::{randers_from_zermelo, ZermeloData};
