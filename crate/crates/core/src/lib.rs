//! Parallel and incremental subgradient methods for minimizing a sum of
//! nonsmooth convex functions over the common fixed points of
//! quasi-nonexpansive mappings.

pub mod checks;
pub mod driver;
mod error;
pub mod functions;
pub mod geometry;
mod point;
pub mod metrics;
pub mod network;
pub mod problem;
pub mod rng;
pub mod schedule;
pub mod solvers;

pub use error::{Error, Result};
pub use functions::{ConvexFn, ConvexityClass, SubgradientSample};
pub use geometry::{relax, ClosedConvexSet, MappingClass, QneMapping, RelaxedMapping, SetKind};
pub use point::Point;
pub use rng::{TieBreaker, TieRule};
pub use driver::{run, MonitorConfig, RunOptions, RunTrace};
pub use metrics::{BoundConstants, MetricRow, RateBound, Verdict};
pub use network::{Network, Topology};
pub use problem::{ProblemInstance, ReferenceMethod, ReferenceSolution, UserSpec};
pub use schedule::StepSchedule;
pub use solvers::{IterationState, Method, UserStep};
