//! Label-free lower bounds on the mistakes of a classifier ensemble.
//!
//! The ensemble's Q classifiers map every sample to a tuple of labels (a
//! *cell*); counting samples per cell gives a sparse occupancy table, the
//! only observable this crate ever consumes. Maximizing the number of
//! same-class pairs an integer assignment of classes to cells can explain
//! yields a coherence score and, from its optimal witness, a lower bound on
//! the mistakes the ensemble must be making. A planted-truth simulator
//! validates the bound against known mistake counts, and the metric module
//! derives ensembles from embedding vectors the way the bound is used in
//! practice.

pub mod bound;
pub mod error;
pub mod formats;
pub mod metric;
pub mod occupancy;
pub mod seeding;
pub mod simulate;
pub mod stats;

pub use bound::{
    bound_pipeline, bound_pipeline_with, coherence_of, mistake_bound_of, solve_bruteforce,
    solve_exact_dp, solve_greedy, AssignmentMatrix, BoundReport, BoundResult, BruteforceGuard,
    PipelineOptions, SolverKind, Strategy,
};
pub use error::{Error, Result};
pub use occupancy::{
    build_occupancy, check_resolution, reduce_instance, reduce_table, CellIndex, ClassSizes,
    InstanceSpec, OccupancyBuilder, OccupancyTable, PredictionRecord,
};
