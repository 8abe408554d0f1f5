//! Synthetic ecosystems, an independent plan checker, and the side-by-side
//! comparison of the lag-aware planner with the direct-latest baseline.

mod compare;
pub mod fixtures;
mod generate;
mod oracle;

use crate::compat::CompatError;
use crate::graph::GraphError;
use crate::planner::PlanError;
use crate::registry::RegistryError;

pub use compare::{breaking_violations, compare_modes, ComparisonReport, ComparisonRow, Violation};
pub(crate) use compare::format_table;
pub use generate::{gen_ecosystem, Ecosystem, EcosystemParams, MANIFEST_FILE, REGISTRY_FILE, USAGE_FILE};
pub use oracle::{oracle_verify_plan, Divergence, Verdict};

#[derive(Debug, thiserror::Error)]
pub enum HarnessError {
    #[error("invalid ecosystem parameters: {0}")]
    InvalidParams(String),
    #[error(transparent)]
    Registry(#[from] RegistryError),
    #[error(transparent)]
    Graph(#[from] GraphError),
    #[error(transparent)]
    Compat(#[from] CompatError),
    #[error(transparent)]
    Plan(#[from] PlanError),
}
