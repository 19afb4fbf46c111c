//! Problem input: jobs, machines, the power exponent, and the interval grid
//! induced by release dates and deadlines.

use std::collections::HashSet;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Job {
    pub id: String,
    pub work: f64,
    pub release: f64,
    pub deadline: f64,
}

impl Job {
    pub fn new(id: impl Into<String>, work: f64, release: f64, deadline: f64) -> Self {
        Job {
            id: id.into(),
            work,
            release,
            deadline,
        }
    }

    pub fn span_len(&self) -> f64 {
        self.deadline - self.release
    }
}

/// Minimum constant speed at which the job fits in its own span.
pub fn job_density(job: &Job) -> f64 {
    job.work / (job.deadline - job.release)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Instance {
    pub alpha: f64,
    pub machines: usize,
    pub jobs: Vec<Job>,
}

impl Instance {
    pub fn new(jobs: Vec<Job>, machines: usize, alpha: f64) -> Self {
        Instance {
            alpha,
            machines,
            jobs,
        }
    }

    pub fn job_index(&self, id: &str) -> Option<usize> {
        self.jobs.iter().position(|j| j.id == id)
    }

    pub fn total_work(&self) -> f64 {
        self.jobs.iter().map(|j| j.work).sum()
    }
}

/// Checks every input invariant and hands the instance back unchanged.
pub fn validate_instance(raw: Instance) -> Result<Instance> {
    if raw.jobs.is_empty() {
        return Err(Error::EmptyInstance);
    }
    if raw.machines == 0 {
        return Err(Error::BadMachines);
    }
    if !(raw.alpha > 1.0) || !raw.alpha.is_finite() {
        return Err(Error::BadAlpha(raw.alpha));
    }
    let mut seen = HashSet::with_capacity(raw.jobs.len());
    for job in &raw.jobs {
        if !(job.work.is_finite() && job.release.is_finite() && job.deadline.is_finite()) {
            return Err(Error::NonFinite(job.id.clone()));
        }
        if job.work <= 0.0 {
            return Err(Error::NonPositiveWork(job.id.clone()));
        }
        if job.deadline <= job.release {
            return Err(Error::EmptySpan(job.id.clone()));
        }
        if !seen.insert(job.id.as_str()) {
            return Err(Error::DuplicateJobId(job.id.clone()));
        }
    }
    Ok(raw)
}

#[derive(Debug, Clone, PartialEq)]
pub struct Interval {
    pub start: f64,
    pub end: f64,
    /// Indices of the jobs alive in this interval, ascending.
    pub alive: Vec<usize>,
    /// Processors still available in this interval (`m_j`).
    pub machines: usize,
}

impl Interval {
    pub fn len(&self) -> f64 {
        self.end - self.start
    }

    pub fn is_alive(&self, job: usize) -> bool {
        self.alive.binary_search(&job).is_ok()
    }
}

/// Partition of the horizon at every release date and deadline.
///
/// `jobs` lists the job indices still taking part (all of them right after
/// construction; BAL shrinks it as jobs get their final speed). Intervals are
/// never split or merged after construction, only their alive sets and
/// machine counts change.
#[derive(Debug, Clone, PartialEq)]
pub struct IntervalGrid {
    pub breakpoints: Vec<f64>,
    pub intervals: Vec<Interval>,
    pub jobs: Vec<usize>,
}

impl IntervalGrid {
    pub fn len(&self) -> usize {
        self.intervals.len()
    }

    pub fn is_empty(&self) -> bool {
        self.intervals.is_empty()
    }

    /// Range of interval indices covering `[release, deadline]`.
    pub fn span_range(&self, job: &Job) -> std::ops::Range<usize> {
        let lo = self.breakpoints.partition_point(|&t| t < job.release);
        let hi = self.breakpoints.partition_point(|&t| t < job.deadline);
        lo..hi
    }

    /// Number of jobs alive in interval `j` (`a_j`).
    pub fn alive_count(&self, j: usize) -> usize {
        self.intervals[j].alive.len()
    }
}

pub fn build_interval_grid(jobs: &[Job], machines: usize) -> IntervalGrid {
    let mut breakpoints: Vec<f64> = jobs.iter().flat_map(|j| [j.release, j.deadline]).collect();
    breakpoints.sort_by(f64::total_cmp);
    breakpoints.dedup();

    let mut intervals: Vec<Interval> = breakpoints
        .windows(2)
        .map(|w| Interval {
            start: w[0],
            end: w[1],
            alive: Vec::new(),
            machines,
        })
        .collect();

    let mut grid = IntervalGrid {
        breakpoints,
        intervals: Vec::new(),
        jobs: (0..jobs.len()).collect(),
    };
    for (i, job) in jobs.iter().enumerate() {
        for j in grid.span_range(job) {
            intervals[j].alive.push(i);
        }
    }
    grid.intervals = intervals;
    grid
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SolverConfig {
    /// Binary-search stopping gap, relative to the initial upper bound.
    pub speed_tolerance: f64,
    /// Relative slack under which an arc counts as saturated.
    pub flow_tolerance: f64,
    /// Hard cap on flow computations per search.
    pub max_iterations_guard: usize,
}

impl Default for SolverConfig {
    fn default() -> Self {
        SolverConfig {
            speed_tolerance: 1e-9,
            flow_tolerance: 1e-9,
            max_iterations_guard: 10_000,
        }
    }
}

impl SolverConfig {
    pub fn validate(&self) -> Result<()> {
        let ok = |t: f64| t > 0.0 && t.is_finite();
        if ok(self.speed_tolerance) && ok(self.flow_tolerance) && self.max_iterations_guard > 0 {
            Ok(())
        } else {
            Err(Error::BadTolerance)
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn inst(jobs: Vec<Job>) -> Instance {
        Instance::new(jobs, 2, 2.0)
    }

    #[test]
    fn validation_accepts_and_rejects() {
        assert!(validate_instance(inst(vec![Job::new("a", 4.0, 0.0, 2.0)])).is_ok());
        assert_eq!(
            validate_instance(inst(vec![Job::new("a", 0.0, 0.0, 2.0)])),
            Err(Error::NonPositiveWork("a".into()))
        );
        assert_eq!(
            validate_instance(inst(vec![Job::new("a", 1.0, 2.0, 2.0)])),
            Err(Error::EmptySpan("a".into()))
        );
        assert_eq!(validate_instance(inst(vec![])), Err(Error::EmptyInstance));
        assert_eq!(
            validate_instance(Instance::new(vec![Job::new("a", 1.0, 0.0, 1.0)], 1, 1.0)),
            Err(Error::BadAlpha(1.0))
        );
        assert_eq!(
            validate_instance(inst(vec![
                Job::new("a", 1.0, 0.0, 1.0),
                Job::new("a", 2.0, 0.0, 1.0)
            ])),
            Err(Error::DuplicateJobId("a".into()))
        );
        assert_eq!(
            validate_instance(Instance::new(vec![Job::new("a", 1.0, 0.0, 1.0)], 0, 2.0)),
            Err(Error::BadMachines)
        );
        assert_eq!(
            validate_instance(inst(vec![Job::new("a", f64::NAN, 0.0, 1.0)])),
            Err(Error::NonFinite("a".into()))
        );
    }

    #[test]
    fn grid_of_two_overlapping_spans() {
        let jobs = vec![Job::new("1", 1.0, 0.0, 2.0), Job::new("2", 1.0, 1.0, 3.0)];
        let g = build_interval_grid(&jobs, 2);
        assert_eq!(g.breakpoints, vec![0.0, 1.0, 2.0, 3.0]);
        let alive: Vec<_> = g.intervals.iter().map(|i| i.alive.clone()).collect();
        assert_eq!(alive, vec![vec![0], vec![0, 1], vec![1]]);
        assert!(g.intervals.iter().all(|i| i.machines == 2));
    }

    #[test]
    fn grid_single_and_identical_spans() {
        let g = build_interval_grid(&[Job::new("1", 4.0, 0.0, 2.0)], 3);
        assert_eq!(g.len(), 1);
        assert_eq!((g.intervals[0].start, g.intervals[0].end), (0.0, 2.0));
        assert_eq!(g.intervals[0].alive, vec![0]);

        let g = build_interval_grid(
            &[Job::new("1", 1.0, 0.0, 1.0), Job::new("2", 1.0, 0.0, 1.0)],
            1,
        );
        assert_eq!(g.len(), 1);
        assert_eq!(g.alive_count(0), 2);
    }

    #[test]
    fn densities() {
        assert_eq!(job_density(&Job::new("a", 4.0, 0.0, 2.0)), 2.0);
        assert_eq!(job_density(&Job::new("a", 1.0, 0.0, 1.0)), 1.0);
        assert_eq!(job_density(&Job::new("a", 3.0, 1.0, 3.0)), 1.5);
    }

    #[test]
    fn config_validation() {
        assert!(SolverConfig::default().validate().is_ok());
        let bad = SolverConfig {
            flow_tolerance: 0.0,
            ..Default::default()
        };
        assert_eq!(bad.validate(), Err(Error::BadTolerance));
    }

    mod props {
        use super::*;
        use proptest::prelude::*;

        fn jobs_strategy() -> impl Strategy<Value = Vec<Job>> {
            prop::collection::vec((0i32..20, 1i32..10, 1i32..10), 1..10).prop_map(|v| {
                v.into_iter()
                    .enumerate()
                    .map(|(k, (r, len, w))| {
                        Job::new(k.to_string(), w as f64, r as f64, (r + len) as f64)
                    })
                    .collect()
            })
        }

        proptest! {
            #[test]
            fn grid_tiles_and_covers_spans(jobs in jobs_strategy(), shift in -50i32..50) {
                let g = build_interval_grid(&jobs, 3);
                prop_assert_eq!(&g, &build_interval_grid(&jobs, 3));
                let total: f64 = g.intervals.iter().map(Interval::len).sum();
                let horizon = g.breakpoints.last().unwrap() - g.breakpoints[0];
                prop_assert_eq!(total, horizon);
                for w in g.intervals.windows(2) {
                    prop_assert_eq!(w[0].end, w[1].start);
                }
                for (i, job) in jobs.iter().enumerate() {
                    let covered: f64 = g.intervals.iter().filter(|iv| iv.is_alive(i)).map(Interval::len).sum();
                    prop_assert_eq!(covered, job.span_len());
                    for iv in &g.intervals {
                        let inside = job.release <= iv.start && iv.end <= job.deadline;
                        prop_assert_eq!(inside, iv.is_alive(i));
                    }
                }

                let d = shift as f64;
                let shifted: Vec<Job> = jobs.iter().map(|j| Job::new(j.id.clone(), j.work, j.release + d, j.deadline + d)).collect();
                let gs = build_interval_grid(&shifted, 3);
                let moved: Vec<f64> = g.breakpoints.iter().map(|t| t + d).collect();
                prop_assert_eq!(gs.breakpoints, moved);
                let a: Vec<_> = g.intervals.iter().map(|i| i.alive.clone()).collect();
                let b: Vec<_> = gs.intervals.iter().map(|i| i.alive.clone()).collect();
                prop_assert_eq!(a, b);
            }
        }
    }
}
