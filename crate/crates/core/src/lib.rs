//! Plans dependency upgrades for Maven-style projects that reduce technical
//! lag without pulling in larger dependency closures or breaking the code
//! the project actually reaches.
//!
//! ```
//! use laglift::harness::fixtures::{manifest, rel, RegistryBuilder, UsageBuilder};
//! use laglift::graph::resolve_graph;
//! use laglift::planner::plan_upgrades;
//!
//! let reg = RegistryBuilder::new()
//!     .add(rel("org.a:a", "1.0").day(0))
//!     .add(rel("org.a:a", "1.1").day(30))
//!     .build()
//!     .unwrap();
//! let graph = resolve_graph(&manifest(&[("org.a:a", "1.0")]), &reg).unwrap();
//! let plan = plan_upgrades(&graph, &reg, &UsageBuilder::new().build()).unwrap();
//! assert_eq!(plan.decisions[0].to_version.raw(), "1.1");
//! ```

#![allow(clippy::result_large_err)]

pub mod cli;
pub mod compat;
pub mod graph;
pub mod harness;
pub mod planner;
pub mod registry;
pub mod versioning;

#[cfg(doctest)]
mod guide {
    #[doc = include_str!("../../../book/src/introduction.md")]
    pub struct Introduction;
    #[doc = include_str!("../../../book/src/versions.md")]
    pub struct Versions;
    #[doc = include_str!("../../../book/src/graphs.md")]
    pub struct Graphs;
    #[doc = include_str!("../../../book/src/compatibility.md")]
    pub struct Compatibility;
    #[doc = include_str!("../../../book/src/planning.md")]
    pub struct Planning;
    #[doc = include_str!("../../../book/src/cli.md")]
    pub struct Cli;
}
