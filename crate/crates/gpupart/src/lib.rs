//! Contention-aware GPU SM partitioning for real-time compute kernels.
//!
//! The library splits a pool of streaming multiprocessors among
//! periodic kernels so every deadline is met while kernels of the same
//! resource type are kept apart where possible:
//!
//! - [`model`]: tasks, partitions, and the semi-linear execution-time
//!   model with conflict inflation;
//! - [`sched`]: the necessary utilization test, minimal per-task
//!   sizing, the exact EDF demand test, and a simulation oracle;
//! - [`partitioner`]: the greedy merge heuristic (SMS / BF orderings,
//!   ACT / INA forbidden lists) and the 1G baseline;
//! - [`gen`]: synthetic taskset generation (UUniFast-Discard);
//! - [`harness`]: utilization sweeps and metric aggregation.

pub mod gen;
pub mod harness;
pub mod model;
pub mod partitioner;
pub mod sched;
