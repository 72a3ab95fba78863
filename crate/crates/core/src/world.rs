//! World state and the randomized lock-step tick loop.
//!
//! Every tick visits all agents once, in a fresh uniformly random order drawn
//! from the world's RNG, and lets the scheduling policy act for each. After
//! the last agent has acted, every running task the policy considers staffed
//! advances by one unit of work; tasks that reach zero are completed and
//! handed back to the policy.

use std::collections::BTreeMap;

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::error::{Result, SimError};
use crate::metrics::{mu_cluster, RunMeta, RunSummary, TickSample, Timeseries};
use crate::spatial::{NeighborIndex, Point};
use crate::task::{Holder, Task, TaskId};

pub type AgentId = usize;
pub type ClusterId = usize;

/// The four agent states. Each agent is in exactly one at all times.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum Mode {
    /// Mode 1: no cluster, no task.
    Free,
    /// Mode 2: no cluster, holding a task.
    Solo,
    /// Mode 3: in a cluster that has no task.
    Idle,
    /// Mode 4: in a cluster that has a task.
    Engaged,
}

impl Mode {
    pub fn number(self) -> u8 {
        match self {
            Mode::Free => 1,
            Mode::Solo => 2,
            Mode::Idle => 3,
            Mode::Engaged => 4,
        }
    }
}

/// What an agent knows about its current work: ticks of work left on its
/// task and the size of the group it belongs to.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub struct InfoVector {
    pub time_rem: u32,
    pub cpu_cluster: u32,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Agent {
    pub id: AgentId,
    pub position: Point,
    pub mode: Mode,
    pub cluster: Option<ClusterId>,
    /// Set only while working alone (mode 2).
    pub task: Option<TaskId>,
    pub info: InfoVector,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Cluster {
    pub id: ClusterId,
    pub leader: AgentId,
    /// Leader first, then members in join order.
    pub members: Vec<AgentId>,
    pub task: Option<TaskId>,
    pub idle_since: Option<u64>,
}

impl Cluster {
    pub fn size(&self) -> u32 {
        self.members.len() as u32
    }
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq)]
pub struct TickReport {
    pub busy_nodes: u32,
    pub traversals: u64,
    pub completions: u32,
    /// Queue length before any agent acted.
    pub queue_length: usize,
}

/// A scheduling policy plugged into the tick loop.
pub trait Policy {
    fn name(&self) -> &'static str;

    /// One-time setup on a fresh world.
    fn prepare(&mut self, _world: &mut World) -> Result<()> {
        Ok(())
    }

    /// Runs once per tick before any agent acts.
    fn begin_tick(&mut self, _world: &mut World) {}

    /// Mode handler for one agent.
    fn act(&mut self, world: &mut World, agent: AgentId);

    /// Whether a running task advances this tick given how many agents hold it.
    fn progresses(&self, task: &Task, staffing: u32) -> bool;

    /// Called after `task` finished and was detached from `holder`.
    fn on_task_complete(&mut self, world: &mut World, task: TaskId, holder: Holder);
}

#[derive(Debug, Clone)]
pub struct World {
    agents: Vec<Agent>,
    neighbors: NeighborIndex,
    clusters: BTreeMap<ClusterId, Cluster>,
    next_cluster_id: ClusterId,
    tasks: Vec<Task>,
    queue: Vec<TaskId>,
    running: Vec<TaskId>,
    completed: Vec<TaskId>,
    clock: u64,
    rng: ChaCha8Rng,
    seed: u64,
    traversal_count_this_tick: u64,
    assignment_mu: Vec<f64>,
}

/// Builds a world with `agent_count` agents placed uniformly in the unit
/// square and every task queued, in the given order, at time zero.
///
/// Tasks are re-numbered `0..n` in queue order.
pub fn init_world(agent_count: usize, tasks: Vec<Task>, neighbor_radius: f64, seed: u64) -> Result<World> {
    if agent_count == 0 {
        return Err(SimError::Config("agent_count must be at least 1".into()));
    }
    if !(neighbor_radius > 0.0 && neighbor_radius <= std::f64::consts::SQRT_2) {
        return Err(SimError::Config(format!(
            "neighbor_radius must lie in (0, sqrt 2], got {neighbor_radius}"
        )));
    }
    for t in &tasks {
        if t.cpu_req == 0 || t.time_total == 0 {
            return Err(SimError::Config(format!(
                "task {} needs cpu_req >= 1 and time_total >= 1",
                t.id
            )));
        }
    }

    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let positions: Vec<Point> = (0..agent_count)
        .map(|_| Point::new(rng.gen::<f64>(), rng.gen::<f64>()))
        .collect();
    Ok(World::assemble(positions, tasks, neighbor_radius, rng, seed))
}

impl World {
    /// Builds a world with agents at the given coordinates instead of random
    /// ones. The seed still drives tick ordering.
    pub fn with_positions(points: &[(f64, f64)], tasks: Vec<Task>, neighbor_radius: f64, seed: u64) -> Result<World> {
        let mut w = init_world(points.len(), tasks, neighbor_radius, seed)?;
        let positions: Vec<Point> = points.iter().map(|&(x, y)| Point::new(x, y)).collect();
        if let Some(p) = positions.iter().find(|p| !((0.0..=1.0).contains(&p.x) && (0.0..=1.0).contains(&p.y))) {
            return Err(SimError::Config(format!("position ({}, {}) lies outside the unit square", p.x, p.y)));
        }
        let tasks = std::mem::take(&mut w.tasks);
        Ok(World::assemble(positions, tasks, neighbor_radius, w.rng, seed))
    }

    fn assemble(positions: Vec<Point>, tasks: Vec<Task>, neighbor_radius: f64, rng: ChaCha8Rng, seed: u64) -> World {
    let neighbors = NeighborIndex::build(&positions, neighbor_radius);
    let agents = positions
        .into_iter()
        .enumerate()
        .map(|(id, position)| Agent {
            id,
            position,
            mode: Mode::Free,
            cluster: None,
            task: None,
            info: InfoVector { time_rem: 0, cpu_cluster: 1 },
        })
        .collect();

    let tasks: Vec<Task> = tasks
        .into_iter()
        .enumerate()
        .map(|(i, t)| Task::new(i, t.cpu_req, t.time_total))
        .collect();
    let queue = (0..tasks.len()).collect();

        World {
        agents,
        neighbors,
        clusters: BTreeMap::new(),
        next_cluster_id: 0,
        tasks,
        queue,
        running: Vec::new(),
        completed: Vec::new(),
        clock: 0,
        rng,
        seed,
        traversal_count_this_tick: 0,
        assignment_mu: Vec::new(),
    }
    }
    pub fn agents(&self) -> &[Agent] {
        &self.agents
    }

    pub fn agent(&self, id: AgentId) -> &Agent {
        &self.agents[id]
    }

    pub fn clusters(&self) -> impl Iterator<Item = &Cluster> {
        self.clusters.values()
    }

    pub fn cluster(&self, id: ClusterId) -> Option<&Cluster> {
        self.clusters.get(&id)
    }

    pub fn tasks(&self) -> &[Task] {
        &self.tasks
    }

    pub fn task(&self, id: TaskId) -> &Task {
        &self.tasks[id]
    }

    pub fn queue(&self) -> &[TaskId] {
        &self.queue
    }

    /// The queue as `(task id, cpu_req)` pairs, head first.
    pub fn queue_view(&self) -> impl Iterator<Item = (TaskId, u32)> + '_ {
        self.queue.iter().map(|&t| (t, self.tasks[t].cpu_req))
    }

    pub fn running(&self) -> &[TaskId] {
        &self.running
    }

    pub fn completed(&self) -> &[TaskId] {
        &self.completed
    }

    pub fn clock(&self) -> u64 {
        self.clock
    }

    pub fn seed(&self) -> u64 {
        self.seed
    }

    pub fn neighbor_radius(&self) -> f64 {
        self.neighbors.radius()
    }

    pub fn mean_neighbor_count(&self) -> f64 {
        self.neighbors.mean_degree()
    }

    pub fn traversals_this_tick(&self) -> u64 {
        self.traversal_count_this_tick
    }

    /// Utilization recorded for each assignment when it first made progress.
    pub fn assignment_mu(&self) -> &[f64] {
        &self.assignment_mu
    }

    /// Other agents within the neighbor radius, nearest first, ties by id.
    pub fn neighbors_of(&self, agent: AgentId) -> Result<&[AgentId]> {
        self.neighbors.get(agent).ok_or(SimError::UnknownAgent(agent))
    }

    /// True once nothing is queued and nothing is running.
    pub fn is_finished(&self) -> bool {
        self.queue.is_empty() && self.running.is_empty()
    }

    /// Number of agents currently holding `task`.
    pub fn staffing(&self, task: TaskId) -> u32 {
        match self.tasks[task].holder {
            Some(Holder::Agent(_)) => 1,
            Some(Holder::Cluster(c)) => self.clusters[&c].size(),
            None => 0,
        }
    }

    pub fn add_traversals(&mut self, n: u64) {
        self.traversal_count_this_tick += n;
    }

    /// Removes the task at queue position `pos` and gives it to `holder`.
    /// A cluster holder must currently be idle; an agent holder must be free.
    pub fn claim_from_queue(&mut self, pos: usize, holder: Holder) -> TaskId {
        let task = self.queue.remove(pos);
        let t = &mut self.tasks[task];
        t.start_time = Some(self.clock);
        t.holder = Some(holder);
        self.running.push(task);
        match holder {
            Holder::Agent(a) => {
                debug_assert_eq!(self.agents[a].mode, Mode::Free);
                self.agents[a].task = Some(task);
                self.refresh_agent(a);
            }
            Holder::Cluster(c) => {
                let cluster = self.clusters.get_mut(&c).expect("claiming cluster exists");
                debug_assert!(cluster.task.is_none());
                cluster.task = Some(task);
                cluster.idle_since = None;
                self.refresh_cluster(c);
            }
        }
        task
    }

    /// Takes a running task away from its holder and puts it back at the head
    /// of the queue. The holder is left without a task: a lone agent becomes
    /// free, a cluster becomes idle.
    pub fn return_to_queue_front(&mut self, task: TaskId) {
        let holder = self.detach(task);
        let t = &mut self.tasks[task];
        t.start_time = None;
        self.queue.insert(0, task);
        if let Holder::Cluster(c) = holder {
            self.clusters.get_mut(&c).expect("holder exists").idle_since = Some(self.clock);
        }
    }

    /// Creates a cluster led by `leader` with the given extra members. A lone
    /// leader that is holding a task carries it into the cluster.
    pub fn form_cluster(&mut self, leader: AgentId, members: &[AgentId]) -> ClusterId {
        debug_assert!(self.agents[leader].cluster.is_none());
        let id = self.next_cluster_id;
        self.next_cluster_id += 1;
        let task = self.agents[leader].task.take();
        let mut all = Vec::with_capacity(members.len() + 1);
        all.push(leader);
        all.extend_from_slice(members);
        for &m in &all {
            debug_assert!(m == leader || self.agents[m].mode == Mode::Free);
            self.agents[m].cluster = Some(id);
        }
        if let Some(t) = task {
            self.tasks[t].holder = Some(Holder::Cluster(id));
        }
        self.clusters.insert(
            id,
            Cluster {
                id,
                leader,
                members: all,
                task,
                idle_since: if task.is_none() { Some(self.clock) } else { None },
            },
        );
        self.refresh_cluster(id);
        id
    }

    /// Adds free agents to an existing cluster.
    pub fn join_cluster(&mut self, cluster: ClusterId, agents: &[AgentId]) {
        for &a in agents {
            debug_assert_eq!(self.agents[a].mode, Mode::Free);
            self.agents[a].cluster = Some(cluster);
        }
        self.clusters
            .get_mut(&cluster)
            .expect("cluster exists")
            .members
            .extend_from_slice(agents);
        self.refresh_cluster(cluster);
    }

    /// Releases non-leader members back to mode 1.
    pub fn leave_cluster(&mut self, cluster: ClusterId, agents: &[AgentId]) {
        let c = self.clusters.get_mut(&cluster).expect("cluster exists");
        debug_assert!(!agents.contains(&c.leader));
        c.members.retain(|m| !agents.contains(m));
        for &a in agents {
            self.agents[a].cluster = None;
            self.refresh_agent(a);
        }
        self.refresh_cluster(cluster);
    }

    /// Destroys a cluster with no task; every member returns to mode 1.
    pub fn dissolve_cluster(&mut self, cluster: ClusterId) {
        let c = self.clusters.remove(&cluster).expect("cluster exists");
        debug_assert!(c.task.is_none(), "dissolving a cluster that holds a task");
        for a in c.members {
            self.agents[a].cluster = None;
            self.refresh_agent(a);
        }
    }

    /// Marks an idle cluster's idle-since tick.
    pub fn set_idle_since(&mut self, cluster: ClusterId, tick: u64) {
        if let Some(c) = self.clusters.get_mut(&cluster) {
            c.idle_since = Some(tick);
        }
    }

    /// Executes one lock-step tick.
    pub fn tick<P: Policy + ?Sized>(&mut self, policy: &mut P) -> TickReport {
        if self.is_finished() {
            return TickReport::default();
        }
        self.traversal_count_this_tick = 0;
        let queue_length = self.queue.len();

        policy.begin_tick(self);

        let mut order: Vec<AgentId> = (0..self.agents.len()).collect();
        order.shuffle(&mut self.rng);
        for a in order {
            policy.act(self, a);
        }

        let mut busy_nodes = 0;
        let mut finished = Vec::new();
        let running = self.running.clone();
        for task in running {
            let staffing = self.staffing(task);
            let t = &mut self.tasks[task];
            if !policy.progresses(t, staffing) {
                continue;
            }
            if t.first_progress.is_none() {
                t.first_progress = Some(self.clock);
                self.assignment_mu
                    .push(mu_cluster(t.cpu_req, staffing).expect("staffed tasks have positive sizes"));
            }
            t.time_rem -= 1;
            busy_nodes += staffing.min(t.cpu_req);
            if t.time_rem == 0 {
                finished.push(task);
            }
        }

        let completions = finished.len() as u32;
        for task in finished {
            let holder = self.detach(task);
            self.tasks[task].completion_time = Some(self.clock + 1);
            self.completed.push(task);
            policy.on_task_complete(self, task, holder);
        }

        self.clock += 1;
        for a in 0..self.agents.len() {
            self.refresh_agent(a);
        }

        TickReport {
            busy_nodes,
            traversals: self.traversal_count_this_tick,
            completions,
            queue_length,
        }
    }

    /// Ticks until every task is done or `max_ticks` ticks have elapsed.
    pub fn run_to_completion<P: Policy + ?Sized>(
        &mut self,
        policy: &mut P,
        max_ticks: u64,
    ) -> Result<(Timeseries, RunSummary)> {
        if max_ticks == 0 {
            return Err(SimError::Config("max_ticks must be at least 1".into()));
        }
        let n = self.agents.len() as f64;
        let mut samples = Vec::new();
        let mut ticks = 0;
        while !self.is_finished() && ticks < max_ticks {
            let tick = self.clock;
            let r = self.tick(policy);
            samples.push(TickSample {
                tick,
                busy_nodes: r.busy_nodes,
                utilization: f64::from(r.busy_nodes) / n,
                traversals: r.traversals,
                queue_length: r.queue_length,
            });
            ticks += 1;
        }
        let summary = RunSummary::from_world(
            self,
            RunMeta {
                seed: self.seed,
                scheduler: policy.name().to_string(),
                nodes: self.agents.len(),
                tasks: self.tasks.len(),
            },
        );
        Ok((Timeseries { samples }, summary))
    }

    /// Checks the structural invariants that must hold between ticks.
    pub fn check_invariants(&self) -> std::result::Result<(), String> {
        let mut seen = vec![None; self.agents.len()];
        for c in self.clusters.values() {
            if c.members.is_empty() || c.members[0] != c.leader {
                return Err(format!("cluster {} has a malformed member list", c.id));
            }
            for &m in &c.members {
                if let Some(other) = seen[m] {
                    return Err(format!("agent {m} is in clusters {other} and {}", c.id));
                }
                seen[m] = Some(c.id);
                let a = &self.agents[m];
                if a.cluster != Some(c.id) {
                    return Err(format!("agent {m} does not point back at cluster {}", c.id));
                }
                if a.info.cpu_cluster != c.size() {
                    return Err(format!("agent {m} has stale cpu_cluster"));
                }
                let expected = if c.task.is_some() { Mode::Engaged } else { Mode::Idle };
                if a.mode != expected {
                    return Err(format!("agent {m} in cluster {} is in mode {}", c.id, a.mode.number()));
                }
            }
            if let Some(t) = c.task {
                if self.tasks[t].holder != Some(Holder::Cluster(c.id)) {
                    return Err(format!("task {t} does not point back at cluster {}", c.id));
                }
            }
        }
        for a in &self.agents {
            match a.cluster {
                Some(c) if seen[a.id] != Some(c) => {
                    return Err(format!("agent {} claims missing cluster {c}", a.id));
                }
                None => {
                    let expected = if a.task.is_some() { Mode::Solo } else { Mode::Free };
                    if a.mode != expected || a.info.cpu_cluster != 1 {
                        return Err(format!("clusterless agent {} is inconsistent", a.id));
                    }
                }
                _ => {}
            }
            if matches!(a.mode, Mode::Free | Mode::Idle) && a.info.time_rem != 0 {
                return Err(format!("task-less agent {} reports time_rem {}", a.id, a.info.time_rem));
            }
        }

        let running: usize = self.running.len();
        if self.queue.len() + running + self.completed.len() != self.tasks.len() {
            return Err("task conservation violated".into());
        }
        for t in &self.tasks {
            if t.time_rem > t.time_total {
                return Err(format!("task {} has time_rem above time_total", t.id));
            }
            if (t.time_rem == 0) != t.completion_time.is_some() {
                return Err(format!("task {} completion stamp disagrees with time_rem", t.id));
            }
            if let (Some(s), Some(c)) = (t.start_time, t.completion_time) {
                if c < s || s < t.arrival_time {
                    return Err(format!("task {} has out-of-order timestamps", t.id));
                }
            }
        }
        for &t in &self.queue {
            if self.tasks[t].holder.is_some() {
                return Err(format!("queued task {t} has a holder"));
            }
        }
        for &t in &self.running {
            match self.tasks[t].holder {
                Some(Holder::Agent(a)) if self.agents[a].task != Some(t) => {
                    return Err(format!("task {t} holder agent {a} disagrees"));
                }
                Some(Holder::Cluster(c)) if self.clusters.get(&c).and_then(|c| c.task) != Some(t) => {
                    return Err(format!("task {t} holder cluster {c} disagrees"));
                }
                None => return Err(format!("running task {t} has no holder")),
                _ => {}
            }
        }
        Ok(())
    }

    fn detach(&mut self, task: TaskId) -> Holder {
        let holder = self.tasks[task].holder.take().expect("detaching a held task");
        self.running.retain(|&t| t != task);
        match holder {
            Holder::Agent(a) => {
                self.agents[a].task = None;
                self.refresh_agent(a);
            }
            Holder::Cluster(c) => {
                self.clusters.get_mut(&c).expect("holder exists").task = None;
                self.refresh_cluster(c);
            }
        }
        holder
    }

    #[cfg(test)]
    pub(crate) fn set_clock_for_test(&mut self, tick: u64) {
        self.clock = tick;
    }

    fn refresh_cluster(&mut self, cluster: ClusterId) {
        let members = self.clusters[&cluster].members.clone();
        for m in members {
            self.refresh_agent(m);
        }
    }

    fn refresh_agent(&mut self, a: AgentId) {
        let (mode, task, cpu_cluster) = match self.agents[a].cluster {
            Some(c) => {
                let c = &self.clusters[&c];
                let mode = if c.task.is_some() { Mode::Engaged } else { Mode::Idle };
                (mode, c.task, c.size())
            }
            None => {
                let task = self.agents[a].task;
                let mode = if task.is_some() { Mode::Solo } else { Mode::Free };
                (mode, task, 1)
            }
        };
        let agent = &mut self.agents[a];
        agent.mode = mode;
        agent.info = InfoVector {
            time_rem: task.map_or(0, |t| self.tasks[t].time_rem),
            cpu_cluster,
        };
    }
}
