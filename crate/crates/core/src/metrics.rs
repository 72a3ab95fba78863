//! Per-run measurements: completion time, mean wait, cluster utilization,
//! node utilization per tick and queue traversal counts.

use crate::error::{Result, SimError};
use crate::task::Task;
use crate::world::World;

/// Fraction of a cluster's CPUs a task can use. Under-staffed clusters count
/// as fully used.
pub fn mu_cluster(cpu_req: u32, cpu_cluster: u32) -> Result<f64> {
    if cpu_req == 0 || cpu_cluster == 0 {
        return Err(SimError::Domain(format!(
            "mu_cluster needs positive sizes, got cpu_req={cpu_req}, cpu_cluster={cpu_cluster}"
        )));
    }
    if cpu_cluster <= cpu_req {
        Ok(1.0)
    } else {
        Ok(f64::from(cpu_req) / f64::from(cpu_cluster))
    }
}

/// Mean ticks between arrival and start over `tasks`.
pub fn t_wait<'a, I>(tasks: I) -> Result<f64>
where
    I: IntoIterator<Item = &'a Task>,
{
    let mut sum = 0u64;
    let mut n = 0u64;
    for t in tasks {
        let wait = t
            .wait()
            .ok_or_else(|| SimError::IncompleteRun(format!("task {} never started", t.id)))?;
        sum += wait;
        n += 1;
    }
    Ok(if n == 0 { 0.0 } else { sum as f64 / n as f64 })
}

/// Queue entries examined per tick when every cluster scans the whole queue.
pub fn traversal_worst_case(n_clusters: u64, m_tasks: u64) -> u64 {
    n_clusters * m_tasks
}

#[derive(Debug, Clone, PartialEq)]
pub struct RunMeta {
    pub seed: u64,
    pub scheduler: String,
    pub nodes: usize,
    pub tasks: usize,
}

#[derive(Debug, Clone, PartialEq)]
pub struct RunSummary {
    pub t_complete: u64,
    pub t_wait: f64,
    /// Mean of per-assignment utilization. 1.0 when nothing was assigned.
    pub mu_mean: f64,
    pub meta: RunMeta,
    pub incomplete: bool,
}

impl RunSummary {
    /// Summarizes the world as it stands. An unfinished world yields an
    /// incomplete summary whose wait is taken over completed tasks only.
    pub fn from_world(world: &World, meta: RunMeta) -> Self {
        let completed = world.completed().iter().map(|&t| world.task(t));
        let t_wait = t_wait(completed).expect("completed tasks have start times");
        let mu = world.assignment_mu();
        let mu_mean = if mu.is_empty() {
            1.0
        } else {
            mu.iter().sum::<f64>() / mu.len() as f64
        };
        RunSummary {
            t_complete: world.clock(),
            t_wait,
            mu_mean,
            meta,
            incomplete: !world.is_finished(),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TickSample {
    pub tick: u64,
    /// Nodes doing useful work: members of progressing assignments, capped
    /// at the task's CPU requirement.
    pub busy_nodes: u32,
    pub utilization: f64,
    pub traversals: u64,
    /// Queue length at the start of the tick.
    pub queue_length: usize,
}

#[derive(Debug, Clone, Default, PartialEq)]
pub struct Timeseries {
    pub samples: Vec<TickSample>,
}

impl Timeseries {
    pub fn len(&self) -> usize {
        self.samples.len()
    }

    pub fn is_empty(&self) -> bool {
        self.samples.is_empty()
    }

    /// Mean utilization over the middle half of the run (ticks in
    /// `[len/4, 3*len/4)`).
    pub fn middle_half_utilization(&self) -> f64 {
        let n = self.samples.len();
        let window = &self.samples[n / 4..(3 * n) / 4];
        if window.is_empty() {
            return 0.0;
        }
        window.iter().map(|s| s.utilization).sum::<f64>() / window.len() as f64
    }

    /// Ratio of mean traversals to the mean worst case for `n_clusters`
    /// scanners, over ticks after the first that started with a non-empty
    /// queue. `None` when no such tick exists.
    pub fn traversal_fraction(&self, n_clusters: u64) -> Option<f64> {
        let window: Vec<&TickSample> = self
            .samples
            .iter()
            .skip(1)
            .filter(|s| s.queue_length > 0)
            .collect();
        if window.is_empty() {
            return None;
        }
        let observed: u64 = window.iter().map(|s| s.traversals).sum();
        let worst: u64 = window
            .iter()
            .map(|s| traversal_worst_case(n_clusters, s.queue_length as u64))
            .sum();
        Some(observed as f64 / worst as f64)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn mu_cluster_cases() {
        assert_eq!(mu_cluster(2, 5).unwrap(), 0.4);
        assert_eq!(mu_cluster(3, 3).unwrap(), 1.0);
        assert_eq!(mu_cluster(5, 2).unwrap(), 1.0);
        assert!(matches!(mu_cluster(0, 2), Err(SimError::Domain(_))));
        assert!(mu_cluster(2, 0).is_err());
    }

    fn started(id: usize, start: Option<u64>) -> Task {
        let mut t = Task::new(id, 1, 25);
        t.start_time = start;
        t
    }

    #[test]
    fn t_wait_cases() {
        assert_eq!(t_wait(&[started(0, Some(0))]).unwrap(), 0.0);
        assert_eq!(t_wait(&[started(0, Some(10)), started(1, Some(30))]).unwrap(), 20.0);
        let err = t_wait(&[started(0, Some(3)), started(1, None)]).unwrap_err();
        assert!(matches!(err, SimError::IncompleteRun(_)));
    }

    #[test]
    fn worst_case_product() {
        assert_eq!(traversal_worst_case(100, 1000), 100_000);
        assert_eq!(traversal_worst_case(0, 17), 0);
        assert_eq!(traversal_worst_case(3, 7), 21);
    }

    fn sample(tick: u64, utilization: f64, traversals: u64, queue_length: usize) -> TickSample {
        TickSample { tick, busy_nodes: 0, utilization, traversals, queue_length }
    }

    #[test]
    fn middle_half_window() {
        let ts = Timeseries {
            samples: (0..8)
                .map(|i| sample(i, if (2..6).contains(&i) { 0.5 } else { 1.0 }, 0, 0))
                .collect(),
        };
        assert_eq!(ts.middle_half_utilization(), 0.5);
    }

    #[test]
    fn traversal_fraction_skips_first_tick() {
        let ts = Timeseries {
            samples: vec![sample(0, 0.0, 999, 10), sample(1, 0.0, 10, 10), sample(2, 0.0, 0, 0)],
        };
        assert_eq!(ts.traversal_fraction(10), Some(0.1));
        assert_eq!(Timeseries::default().traversal_fraction(10), None);
    }
}
