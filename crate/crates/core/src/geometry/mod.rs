//! Martingale-measure polytope, density processes, endowment expectations and the
//! primal/dual cone pair.

pub mod cones;
pub mod exact;
pub mod polytope;

pub use cones::{build_cones, ConeKind, ConePair};
pub use polytope::{enumerate_martingale_vertices, martingale_residual, one_step_vertices, MeasurePolytope};
