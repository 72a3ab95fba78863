#![allow(dead_code)]

use std::fs;
use std::path::Path;

use drap_core::experiment::run_experiment;
use drap_core::workload::{CpuDistribution, Ordering};
use drap_core::{
    generate, init_world, ClusterSizing, DrapConfig, DrapPolicy, ExperimentConfig, FifoPolicy, Policy, RadiusSetting,
    SchedulerKind, World, WorkloadSpec,
};
use proptest::prelude::*;

/// Builds a world and its policy the same way a trial does.
pub fn setup(scheduler: SchedulerKind, nodes: usize, tasks: usize, radius: f64, seed: u64) -> (World, Box<dyn Policy>) {
    let config = ExperimentConfig {
        scheduler,
        nodes,
        tasks,
        radius: RadiusSetting::Fixed(radius),
        ..ExperimentConfig::default()
    };
    setup_config(&config, seed)
}

pub fn setup_config(config: &ExperimentConfig, seed: u64) -> (World, Box<dyn Policy>) {
    let workload = WorkloadSpec { count: config.tasks, seed, ..config.workload.clone() };
    let mut world = init_world(config.nodes, generate(&workload).unwrap(), config.resolved_radius(), seed).unwrap();
    let mut policy: Box<dyn Policy> = match config.scheduler {
        SchedulerKind::Drap => Box::new(DrapPolicy::new(config.drap).unwrap()),
        SchedulerKind::Fifo => Box::new(FifoPolicy::new(config.fifo_sizing, workload, seed)),
    };
    policy.prepare(&mut world).unwrap();
    (world, policy)
}

/// Randomized small configurations covering both schedulers and every
/// workload and tuning knob.
pub fn config_strategy() -> impl Strategy<Value = ExperimentConfig> {
    (
        prop_oneof![Just(SchedulerKind::Drap), Just(SchedulerKind::Fifo)],
        1usize..40,
        0usize..80,
        0.05f64..0.6,
        any::<u64>(),
        (0u64..15, 1u64..25, any::<bool>()),
        (
            prop_oneof![Just(CpuDistribution::Normal), Just(CpuDistribution::Uniform)],
            prop_oneof![Just(Ordering::Shuffled), Just(Ordering::AdversarialDesc), Just(Ordering::AdversarialAsc)],
            prop_oneof![Just(ClusterSizing::MatchWorkload), (1u32..6).prop_map(ClusterSizing::Fixed)],
        ),
    )
        .prop_map(|(scheduler, nodes, tasks, radius, seed, (persistence, starvation, early), (dist, ordering, sizing))| {
            let mut c = ExperimentConfig {
                scheduler,
                nodes,
                tasks,
                trials: 2,
                base_seed: seed % 1_000_000,
                radius: RadiusSetting::Fixed(radius),
                fifo_sizing: sizing,
                max_ticks: 5_000,
                ..ExperimentConfig::default()
            };
            c.drap = DrapConfig { cluster_persistence: persistence, starvation_timeout: starvation, early_exit_on_exact_fit: early };
            c.workload.distribution = dist;
            c.workload.ordering = ordering;
            c
        })
}

/// Every between-tick invariant, plus FIFO ordering, for one configuration.
pub fn check_all(config: &ExperimentConfig) -> Result<(), String> {
    let (mut world, mut policy) = setup_config(config, config.base_seed);
    step_checked(&mut world, policy.as_mut(), config.max_ticks)?;
    if config.scheduler == SchedulerKind::Fifo && !fifo_order_holds(&world) {
        return Err("FIFO start times are out of queue order".into());
    }
    Ok(())
}

/// Steps a world until it finishes or `max_ticks` pass, checking the
/// between-tick invariants after every tick. Returns a description of the
/// first violation. Sparse worlds can legitimately fail to staff large tasks,
/// so running out of ticks is not a violation.
pub fn step_checked(world: &mut World, policy: &mut dyn Policy, max_ticks: u64) -> Result<(), String> {
    let n = world.agents().len();
    let total = world.tasks().len();
    let mut prev_rem: Vec<u32> = world.tasks().iter().map(|t| t.time_rem).collect();
    for _ in 0..max_ticks {
        if world.is_finished() {
            break;
        }
        world.tick(policy);
        world.check_invariants()?;

        let moded = world.agents().iter().filter(|a| a.mode.number() >= 1 && a.mode.number() <= 4).count();
        if moded != n {
            return Err(format!("{} of {n} agents have a valid mode", moded));
        }
        let accounted = world.queue().len() + world.running().len() + world.completed().len();
        if accounted != total {
            return Err(format!("{accounted} tasks accounted for out of {total}"));
        }
        for t in world.tasks() {
            if t.time_rem > prev_rem[t.id] {
                return Err(format!("task {} time_rem rose from {} to {}", t.id, prev_rem[t.id], t.time_rem));
            }
            prev_rem[t.id] = t.time_rem;
        }
    }
    Ok(())
}

/// Started tasks form a prefix of the queue and their start times are
/// non-decreasing in queue order.
pub fn fifo_order_holds(world: &World) -> bool {
    let starts: Vec<Option<u64>> = world.tasks().iter().map(|t| t.start_time).collect();
    starts.windows(2).all(|w| match (w[0], w[1]) {
        (Some(a), Some(b)) => a <= b,
        (_, None) => true,
        (None, Some(_)) => false,
    })
}

/// Runs the experiment into `dir` and returns the bytes of every CSV file.
pub fn csv_bytes(config: &ExperimentConfig, dir: &Path) -> Vec<(String, Vec<u8>)> {
    let config = ExperimentConfig { out_dir: dir.to_path_buf(), ..config.clone() };
    run_experiment(&config).unwrap();
    let mut files: Vec<(String, Vec<u8>)> = fs::read_dir(dir)
        .unwrap()
        .map(|e| e.unwrap().path())
        .filter(|p| p.extension().is_some_and(|e| e == "csv"))
        .map(|p| (p.file_name().unwrap().to_string_lossy().into_owned(), fs::read(&p).unwrap()))
        .collect();
    files.sort();
    files
}
