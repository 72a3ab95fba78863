//! Discrete-time simulation of decentralized, cluster-forming task allocation
//! against a statically partitioned FIFO baseline, plus the experiment
//! harness and the hierarchical queue cost model.

// Negated float comparisons below are how NaN inputs get rejected.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod config;
pub mod drap;
pub mod error;
pub mod experiment;
pub mod fifo;
pub mod lymph;
pub mod metrics;
pub mod spatial;
pub mod stats;
pub mod task;
pub mod workload;
pub mod world;

pub use drap::{DrapConfig, DrapPolicy};
pub use error::{Result, SimError};
pub use experiment::{ExperimentConfig, RadiusSetting, SchedulerKind};
pub use fifo::{ClusterSizing, FifoPolicy};
pub use metrics::{RunSummary, TickSample, Timeseries};
pub use task::{Holder, Task, TaskId};
pub use workload::{generate, WorkloadSpec};
pub use world::{init_world, Agent, AgentId, Cluster, ClusterId, Mode, Policy, TickReport, World};
