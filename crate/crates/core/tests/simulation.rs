mod common;

use drap_core::metrics::traversal_worst_case;
use drap_core::{init_world, DrapConfig, DrapPolicy, FifoPolicy, ClusterSizing, Mode, Policy, SchedulerKind, Task, TickReport, World, WorkloadSpec};

fn drap() -> DrapPolicy {
    DrapPolicy::new(DrapConfig::default()).unwrap()
}

fn unit_tasks(n: usize) -> Vec<Task> {
    (0..n).map(|i| Task::new(i, 1, 25)).collect()
}

#[test]
fn single_agent_single_task_finishes_at_25() {
    let mut world = init_world(1, unit_tasks(1), 0.1, 3).unwrap();
    let mut p = drap();
    let mut reports = Vec::new();
    while !world.is_finished() {
        reports.push(world.tick(&mut p));
    }
    assert_eq!(world.clock(), 25);
    assert_eq!(world.task(0).completion_time, Some(25));
    assert_eq!(reports.iter().map(|r| r.completions).sum::<u32>(), 1);
    assert!(reports.iter().all(|r| r.busy_nodes == 1));
}

#[test]
fn four_sequential_tasks_take_100() {
    let mut world = init_world(1, unit_tasks(4), 0.1, 3).unwrap();
    let (series, summary) = world.run_to_completion(&mut drap(), 1_000).unwrap();
    assert_eq!(summary.t_complete, 100);
    assert_eq!(series.len(), 100);
    // Hand trace: task k starts at 25k.
    assert_eq!(summary.t_wait, (0.0 + 25.0 + 50.0 + 75.0) / 4.0);
    assert!(!summary.incomplete);
}

#[test]
fn empty_workload_is_already_complete() {
    let mut world = init_world(1, Vec::new(), 0.1, 7).unwrap();
    assert!(world.is_finished());
    let (series, summary) = world.run_to_completion(&mut drap(), 10).unwrap();
    assert_eq!(summary.t_complete, 0);
    assert!(series.is_empty());
}

#[test]
fn standard_world_starts_free_with_full_queue() {
    let workload = WorkloadSpec { seed: 4, ..WorkloadSpec::default() };
    let world = init_world(100, drap_core::generate(&workload).unwrap(), 0.15, 4).unwrap();
    assert_eq!(world.agents().len(), 100);
    assert!(world.agents().iter().all(|a| a.mode == Mode::Free));
    assert_eq!(world.queue().len(), 1000);
    assert_eq!(world.clock(), 0);
}

#[test]
fn finished_world_tick_is_a_no_op() {
    let mut world = init_world(1, unit_tasks(1), 0.1, 3).unwrap();
    let mut p = drap();
    world.run_to_completion(&mut p, 100).unwrap();
    let clock = world.clock();
    assert_eq!(world.tick(&mut p), TickReport::default());
    assert_eq!(world.clock(), clock);
}

#[test]
fn lone_agent_cannot_staff_large_task_and_gives_it_back() {
    let mut world = init_world(1, vec![Task::new(0, 3, 75)], 0.01, 2).unwrap();
    let mut p = drap();
    let timeout = DrapConfig::default().starvation_timeout;
    let mut returned_at = None;
    for _ in 0..3 * timeout {
        world.tick(&mut p);
        assert_eq!(world.task(0).time_rem, 75, "under-staffed task progressed");
        if world.queue() == [0] && returned_at.is_none() {
            returned_at = Some(world.clock());
        }
    }
    let at = returned_at.expect("task was never handed back");
    assert!(at <= timeout + 1, "handed back at {at}");
}

#[test]
fn identical_seeds_give_identical_worlds_and_runs() {
    for kind in [SchedulerKind::Drap, SchedulerKind::Fifo] {
        let (mut a, mut pa) = common::setup(kind, 40, 150, 0.25, 11);
        let (mut b, mut pb) = common::setup(kind, 40, 150, 0.25, 11);
        assert_eq!(a.agents(), b.agents());
        let (sa, ra) = a.run_to_completion(pa.as_mut(), 100_000).unwrap();
        let (sb, rb) = b.run_to_completion(pb.as_mut(), 100_000).unwrap();
        assert_eq!(sa, sb);
        assert_eq!(ra, rb);
        assert_eq!(a.tasks(), b.tasks());
    }
}

#[test]
fn busy_node_work_matches_task_work() {
    // Under dRAP every progressing task is exactly staffed, so summed busy
    // nodes equals the total cpu-ticks of work in the workload.
    let (mut world, mut p) = common::setup(SchedulerKind::Drap, 60, 300, 0.2, 5);
    let work: u64 = world.tasks().iter().map(|t| u64::from(t.cpu_req) * u64::from(t.time_total)).sum();
    let (series, summary) = world.run_to_completion(p.as_mut(), 100_000).unwrap();
    let busy: u64 = series.samples.iter().map(|s| u64::from(s.busy_nodes)).sum();
    assert_eq!(busy, work);
    assert_eq!(summary.t_complete, world.clock());
    assert_eq!(summary.t_complete as usize, series.len());
}

#[test]
fn traversals_never_exceed_a_full_scan_per_agent() {
    let (mut world, mut p) = common::setup(SchedulerKind::Drap, 50, 400, 0.2, 9);
    while !world.is_finished() {
        let q = world.queue().len() as u64;
        // Starved tasks can re-enter the queue mid-tick.
        let reachable = q + world.running().len() as u64;
        let r = world.tick(p.as_mut());
        assert!(r.traversals <= traversal_worst_case(50, reachable), "{} > 50 x {reachable}", r.traversals);
        assert_eq!(r.queue_length as u64, q);
    }
}

#[test]
fn fifo_starts_tasks_in_queue_order() {
    let workload = WorkloadSpec { count: 200, seed: 8, ..WorkloadSpec::default() };
    let mut world = init_world(30, drap_core::generate(&workload).unwrap(), 0.3, 8).unwrap();
    let mut p = FifoPolicy::new(ClusterSizing::Fixed(5), workload, 8);
    p.prepare(&mut world).unwrap();
    let partition: Vec<Vec<usize>> = world.clusters().map(|c| c.members.clone()).collect();
    world.run_to_completion(&mut p, 100_000).unwrap();
    assert!(common::fifo_order_holds(&world));
    let after: Vec<Vec<usize>> = world.clusters().map(|c| c.members.clone()).collect();
    assert_eq!(partition, after);
}

#[test]
fn max_ticks_flags_incomplete() {
    let mut world: World = init_world(1, unit_tasks(2), 0.1, 1).unwrap();
    let (series, summary) = world.run_to_completion(&mut drap(), 30).unwrap();
    assert!(summary.incomplete);
    assert_eq!(series.len(), 30);
    assert!(world.run_to_completion(&mut drap(), 0).is_err());
}
