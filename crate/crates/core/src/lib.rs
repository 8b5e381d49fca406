//! Minimum-weight H-factors and H-covers of randomly weighted complete graphs.
//!
//! * [`graph`]: pattern graphs and their density invariants.
//! * [`instance`]: weighted K_n, the Exp(1) coupling and the red-green split.
//! * [`copies`]: enumeration of embedded copies under an edge cap.
//! * [`exact`]: branch-and-bound factor/cover solvers, the budget dual and an
//!   exhaustive oracle.
//! * [`heuristic`]: greedy partial factors and the recursive construction.
//! * [`theory`]: closed-form exponents, constants and bounds.
//! * [`experiments`]: the Monte Carlo harness.

pub mod copies;
pub mod exact;
pub mod experiments;
pub mod graph;
pub mod heuristic;
pub mod instance;
pub mod solution;
pub mod theory;

pub use copies::{cheapest_copy, enumerate_copies, CopyIndex, PlacedCopy};
pub use exact::{brute_force_oracle, max_coverage_under_budget, min_cover, min_factor, SolveOutcome};
pub use graph::{analyze, named_graph, parse_graph, parse_named, DensityReport, GraphH};
pub use instance::{couple_instance, red_green_instance, sample_instance, WeightDistribution, WeightedInstance};
pub use solution::{validate_solution, Mode, TilingSolution};
