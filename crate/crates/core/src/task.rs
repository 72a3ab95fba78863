//! Units of work and who is holding them.

use crate::world::{AgentId, ClusterId};

pub type TaskId = usize;

/// Which entity currently owns a running task.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Holder {
    /// A clusterless agent working alone.
    Agent(AgentId),
    Cluster(ClusterId),
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Task {
    pub id: TaskId,
    /// CPUs (equivalently, threads) the task declares up front.
    pub cpu_req: u32,
    /// Ticks of work when fully staffed.
    pub time_total: u32,
    pub time_rem: u32,
    pub arrival_time: u64,
    /// Tick the current holder claimed the task. Cleared if the task is
    /// handed back to the queue.
    pub start_time: Option<u64>,
    /// Tick at which the task first made progress.
    pub first_progress: Option<u64>,
    pub completion_time: Option<u64>,
    pub holder: Option<Holder>,
}

impl Task {
    pub fn new(id: TaskId, cpu_req: u32, time_total: u32) -> Self {
        Task {
            id,
            cpu_req,
            time_total,
            time_rem: time_total,
            arrival_time: 0,
            start_time: None,
            first_progress: None,
            completion_time: None,
            holder: None,
        }
    }

    pub fn is_complete(&self) -> bool {
        self.completion_time.is_some()
    }

    pub fn wait(&self) -> Option<u64> {
        self.start_time.map(|s| s - self.arrival_time)
    }
}
