//! Utility maximisation with intermediate consumption and static claim positions
//! on finite event trees, together with its convex dual and numerical checks of
//! the duality relations.

pub mod dual;
pub mod error;
pub mod extended;
pub mod finiteness;
pub mod fixtures;
pub mod geometry;
pub mod instance;
mod ipm;
pub mod lp;
pub mod policy;
pub mod primal;
pub mod scenario;
pub mod utility;
pub mod verify;

pub use error::{Error, Result};
pub use instance::Instance;
pub use policy::NumericPolicy;
pub use scenario::{MarketScenario, OptionalProcess};
pub use utility::{UtilityFamily, UtilityField, Weight};
