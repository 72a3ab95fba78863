//! First-in first-out baseline over a static cluster partition.
//!
//! All agents are split into clusters once, at time zero. Each tick the head
//! of the queue goes to the idle cluster with the lowest id, regardless of
//! how well the cluster's size matches the task. Tasks run for their nominal
//! duration whatever the mismatch.

use std::fmt;
use std::str::FromStr;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::error::{Result, SimError};
use crate::task::{Holder, Task, TaskId};
use crate::workload::{CpuSampler, WorkloadSpec};
use crate::world::{AgentId, Policy, World};

const PARTITION_STREAM: u64 = 2;

/// How static cluster sizes are chosen.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ClusterSizing {
    /// Every cluster has this many agents (the last takes what is left).
    Fixed(u32),
    /// Sizes drawn i.i.d. from the workload's CPU distribution.
    MatchWorkload,
}

impl fmt::Display for ClusterSizing {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            ClusterSizing::Fixed(k) => write!(f, "{k}"),
            ClusterSizing::MatchWorkload => f.write_str("workload"),
        }
    }
}

impl FromStr for ClusterSizing {
    type Err = SimError;

    fn from_str(s: &str) -> Result<Self> {
        if s == "workload" {
            return Ok(ClusterSizing::MatchWorkload);
        }
        match s.parse::<u32>() {
            Ok(k) if k >= 1 => Ok(ClusterSizing::Fixed(k)),
            _ => Err(SimError::Config(format!(
                "FIFO cluster size must be a positive integer or 'workload', got '{s}'"
            ))),
        }
    }
}

/// Partitions every agent of a fresh world into static clusters.
///
/// Each cluster grows from a randomly chosen unassigned agent, taking the
/// nearest unassigned agents until it reaches its drawn size. The final
/// cluster absorbs whatever agents remain.
pub fn init_fixed_clusters(
    world: &mut World,
    sizing: ClusterSizing,
    workload: &WorkloadSpec,
    seed: u64,
) -> Result<()> {
    if world.clusters().next().is_some() {
        return Err(SimError::Config("FIFO partition needs a world without clusters".into()));
    }
    let sampler = CpuSampler::new(workload)?;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(PARTITION_STREAM);

    let mut unassigned: Vec<AgentId> = (0..world.agents().len()).collect();
    while !unassigned.is_empty() {
        let drawn = match sizing {
            ClusterSizing::Fixed(k) => k,
            ClusterSizing::MatchWorkload => sampler.sample(&mut rng),
        } as usize;
        let size = drawn.max(1).min(unassigned.len());

        let seed_agent = unassigned[rng.gen_range(0..unassigned.len())];
        let origin = world.agent(seed_agent).position;
        let mut others: Vec<AgentId> = unassigned.iter().copied().filter(|&a| a != seed_agent).collect();
        others.sort_by(|&a, &b| {
            let da = world.agent(a).position.distance(&origin);
            let db = world.agent(b).position.distance(&origin);
            da.total_cmp(&db).then(a.cmp(&b))
        });
        others.truncate(size - 1);
        world.form_cluster(seed_agent, &others);
        unassigned.retain(|a| *a != seed_agent && !others.contains(a));
    }
    Ok(())
}

/// Hands queue heads to idle clusters, lowest id first, until either runs
/// out. Returns the number of assignments.
pub fn fifo_assign(world: &mut World) -> usize {
    let mut made = 0;
    while !world.queue().is_empty() {
        let Some(cluster) = world.clusters().find(|c| c.task.is_none()).map(|c| c.id) else {
            break;
        };
        world.add_traversals(1);
        world.claim_from_queue(0, Holder::Cluster(cluster));
        made += 1;
    }
    made
}

#[derive(Debug, Clone)]
pub struct FifoPolicy {
    pub sizing: ClusterSizing,
    pub workload: WorkloadSpec,
    pub seed: u64,
}

impl FifoPolicy {
    pub fn new(sizing: ClusterSizing, workload: WorkloadSpec, seed: u64) -> Self {
        FifoPolicy { sizing, workload, seed }
    }
}

impl Policy for FifoPolicy {
    fn name(&self) -> &'static str {
        "fifo"
    }

    fn prepare(&mut self, world: &mut World) -> Result<()> {
        init_fixed_clusters(world, self.sizing, &self.workload, self.seed)
    }

    fn begin_tick(&mut self, world: &mut World) {
        fifo_assign(world);
    }

    fn act(&mut self, _world: &mut World, _agent: AgentId) {}

    fn progresses(&self, _task: &Task, _staffing: u32) -> bool {
        true
    }

    fn on_task_complete(&mut self, world: &mut World, _task: TaskId, holder: Holder) {
        if let Holder::Cluster(c) = holder {
            world.set_idle_since(c, world.clock());
        }
    }
}
