//! Robust discrete portfolio pricing as a multiple-choice knapsack.
//!
//! A [`PricingInstance`] holds per-item price menus with nominal demand and a
//! deviation bound. [`solve`] finds a revenue-maximizing choice whose margin
//! constraint holds for every demand scenario in which at most `Γ` items
//! deviate, and certifies it exactly.

pub mod driver;
pub mod error;
pub mod generators;
pub mod hull;
pub mod instance;
pub mod lp;
pub mod oracle;
pub mod par;
pub mod reduction;
pub mod rng;
pub mod robust;
pub mod rounding;
pub mod stress;

pub use driver::{
    frontier, nested_prefix_run, solve, FrontierTable, GammaRule, SolveOptions, SolveReport,
};
pub use error::{Error, Result};
pub use instance::{
    validate, DiscreteSolution, ItemSpec, MenuPoint, PricingInstance, ValidationReport,
};
pub use par::Execution;
