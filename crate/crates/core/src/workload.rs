//! Reproducible task lists.

use std::fmt;
use std::str::FromStr;

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};

use crate::error::{Result, SimError};
use crate::task::Task;

/// RNG stream reserved for workload generation, so task draws never share
/// a sequence with agent placement or tick ordering.
const WORKLOAD_STREAM: u64 = 1;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum CpuDistribution {
    /// Rounded Gaussian centred on the middle of the range, clamped to it.
    Normal,
    Uniform,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Ordering {
    Shuffled,
    /// Largest CPU requirements first.
    AdversarialDesc,
    AdversarialAsc,
}

#[derive(Debug, Clone, PartialEq)]
pub struct WorkloadSpec {
    pub count: usize,
    pub distribution: CpuDistribution,
    pub ordering: Ordering,
    pub time_per_cpu: u32,
    pub cpu_min: u32,
    pub cpu_max: u32,
    /// Standard deviation for the normal distribution.
    pub sigma: f64,
    pub seed: u64,
}

impl Default for WorkloadSpec {
    fn default() -> Self {
        WorkloadSpec {
            count: 1000,
            distribution: CpuDistribution::Normal,
            ordering: Ordering::Shuffled,
            time_per_cpu: 25,
            cpu_min: 1,
            cpu_max: 5,
            sigma: 1.0,
            seed: 0,
        }
    }
}

impl WorkloadSpec {
    pub fn validate(&self) -> Result<()> {
        if self.cpu_min == 0 || self.cpu_min > self.cpu_max {
            return Err(SimError::Config(format!(
                "need 1 <= cpu_min <= cpu_max, got {}..{}",
                self.cpu_min, self.cpu_max
            )));
        }
        if self.time_per_cpu == 0 {
            return Err(SimError::Config("time_per_cpu must be at least 1".into()));
        }
        if !(self.sigma > 0.0 && self.sigma.is_finite()) {
            return Err(SimError::Config(format!("sigma must be positive, got {}", self.sigma)));
        }
        Ok(())
    }

    pub fn mean_cpu(&self) -> f64 {
        f64::from(self.cpu_min + self.cpu_max) / 2.0
    }
}

/// Draws CPU requirements from a workload's distribution. Also used to size
/// static clusters from the same distribution.
#[derive(Debug, Clone)]
pub struct CpuSampler {
    distribution: CpuDistribution,
    normal: Normal<f64>,
    cpu_min: u32,
    cpu_max: u32,
}

impl CpuSampler {
    pub fn new(spec: &WorkloadSpec) -> Result<Self> {
        spec.validate()?;
        let normal = Normal::new(spec.mean_cpu(), spec.sigma)
            .map_err(|e| SimError::Config(e.to_string()))?;
        Ok(CpuSampler {
            distribution: spec.distribution,
            normal,
            cpu_min: spec.cpu_min,
            cpu_max: spec.cpu_max,
        })
    }

    pub fn sample<R: Rng + ?Sized>(&self, rng: &mut R) -> u32 {
        match self.distribution {
            CpuDistribution::Normal => {
                let x = self.normal.sample(rng).round();
                x.clamp(f64::from(self.cpu_min), f64::from(self.cpu_max)) as u32
            }
            CpuDistribution::Uniform => rng.gen_range(self.cpu_min..=self.cpu_max),
        }
    }
}

/// Generates `spec.count` tasks. Each task's work is `time_per_cpu * cpu_req`
/// ticks; ids follow final queue order.
pub fn generate(spec: &WorkloadSpec) -> Result<Vec<Task>> {
    let sampler = CpuSampler::new(spec)?;
    let mut rng = ChaCha8Rng::seed_from_u64(spec.seed);
    rng.set_stream(WORKLOAD_STREAM);

    let mut reqs: Vec<u32> = (0..spec.count).map(|_| sampler.sample(&mut rng)).collect();
    match spec.ordering {
        Ordering::Shuffled => reqs.shuffle(&mut rng),
        Ordering::AdversarialDesc => reqs.sort_by(|a, b| b.cmp(a)),
        Ordering::AdversarialAsc => reqs.sort(),
    }
    Ok(reqs
        .into_iter()
        .enumerate()
        .map(|(id, cpu)| Task::new(id, cpu, spec.time_per_cpu * cpu))
        .collect())
}

impl fmt::Display for CpuDistribution {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            CpuDistribution::Normal => "normal",
            CpuDistribution::Uniform => "uniform",
        })
    }
}

impl FromStr for CpuDistribution {
    type Err = SimError;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "normal" => Ok(CpuDistribution::Normal),
            "uniform" => Ok(CpuDistribution::Uniform),
            other => Err(SimError::Config(format!("unknown workload distribution '{other}'"))),
        }
    }
}

impl fmt::Display for Ordering {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Ordering::Shuffled => "shuffled",
            Ordering::AdversarialDesc => "adversarial-desc",
            Ordering::AdversarialAsc => "adversarial-asc",
        })
    }
}

impl FromStr for Ordering {
    type Err = SimError;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "shuffled" => Ok(Ordering::Shuffled),
            "adversarial-desc" | "adversarial_desc" => Ok(Ordering::AdversarialDesc),
            "adversarial-asc" | "adversarial_asc" => Ok(Ordering::AdversarialAsc),
            other => Err(SimError::Config(format!("unknown task ordering '{other}'"))),
        }
    }
}
