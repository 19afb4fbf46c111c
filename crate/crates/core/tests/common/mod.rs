#![allow(dead_code)]

use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use speedbal::bal::{
    find_critical_jobs, find_critical_speed, retire_critical_jobs, speed_bounds, CriticalSet,
    CriticalSpeed,
};
use speedbal::instance::build_interval_grid;
use speedbal::{Instance, IntervalGrid, Job, SolverConfig};

pub fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

pub fn rel_err(a: f64, b: f64) -> f64 {
    (a - b).abs() / a.abs().max(b.abs()).max(f64::MIN_POSITIVE)
}

/// Integer works in `1..=max_work`, integer release/deadline in `0..=max_time`.
pub fn integer_instance(
    rng: &mut ChaCha8Rng,
    n_max: usize,
    machines: usize,
    max_work: u32,
    max_time: u32,
    alpha: f64,
) -> Instance {
    let n = rng.gen_range(1..=n_max);
    let jobs = (0..n)
        .map(|k| {
            let r = rng.gen_range(0..max_time);
            let d = rng.gen_range(r + 1..=max_time);
            let w = rng.gen_range(1..=max_work);
            Job::new(format!("j{k}"), w as f64, r as f64, d as f64)
        })
        .collect();
    Instance::new(jobs, machines, alpha)
}

/// Real-valued works and times, `m` in `1..=m_max`, `alpha` in `[1.5, 3.5)`.
pub fn real_instance(rng: &mut ChaCha8Rng, n_max: usize, m_max: usize, horizon: f64) -> Instance {
    let n = rng.gen_range(1..=n_max);
    let m = rng.gen_range(1..=m_max);
    let alpha = rng.gen_range(1.5..3.5);
    let jobs = (0..n)
        .map(|k| {
            let r = rng.gen_range(0.0..horizon * 0.9);
            let d = rng.gen_range(r + 0.05 * horizon..=horizon);
            let w = rng.gen_range(0.1..10.0);
            Job::new(format!("j{k}"), w, r, d)
        })
        .collect();
    Instance::new(jobs, m, alpha)
}

/// Large instance for timing: integer releases in `[0, 100)`, span lengths
/// `1..=20`, works `1..=10`.
pub fn perf_instance(rng: &mut ChaCha8Rng, n: usize, machines: usize) -> Instance {
    let jobs = (0..n)
        .map(|k| {
            let r = rng.gen_range(0..100u32);
            let len = rng.gen_range(1..=20u32);
            let w = rng.gen_range(1..=10u32);
            Job::new(format!("j{k}"), w as f64, r as f64, (r + len) as f64)
        })
        .collect();
    Instance::new(jobs, machines, 3.0)
}

pub struct Step {
    pub grid: IntervalGrid,
    pub crit: CriticalSpeed,
    pub set: CriticalSet,
}

/// Runs the outer loop through the public step functions, returning every
/// step's grid (before retirement), critical speed and critical set.
pub fn drive_steps(instance: &Instance, config: &SolverConfig) -> speedbal::Result<Vec<Step>> {
    let jobs = &instance.jobs;
    let mut grid = build_interval_grid(jobs, instance.machines);
    let (mut lo, mut hi) = speed_bounds(&grid, jobs);
    let mut steps = Vec::new();
    while !grid.jobs.is_empty() {
        assert!(steps.len() < jobs.len(), "more steps than jobs");
        let crit = find_critical_speed(&grid, jobs, lo, hi, config)?;
        let set = find_critical_jobs(&crit)?;
        let (next, _) = retire_critical_jobs(&grid, &set, &crit)?;
        hi = crit.speed;
        lo = speed_bounds(&next, jobs).0.min(hi);
        steps.push(Step { grid, crit, set });
        grid = next;
    }
    Ok(steps)
}
