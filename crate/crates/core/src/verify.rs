//! Independent checks on schedules: feasibility, energy accounting, and the
//! five structural optimality conditions.
//!
//! The optimality checker works on the time matrix rather than raw segments;
//! [`check_schedule_kkt`] derives one from any schedule first.

use std::collections::HashMap;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::instance::{Instance, Job};
use crate::timetable::{measure_times, Schedule, TimeMatrix};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum Violation {
    UnknownJob {
        job: String,
    },
    BadSegment {
        job: String,
        start: f64,
        end: f64,
    },
    BadMachine {
        job: String,
        machine: usize,
    },
    MachineOverlap {
        machine: usize,
        first: String,
        second: String,
        at: f64,
    },
    ParallelExecution {
        job: String,
        at: f64,
    },
    SpanViolation {
        job: String,
        start: f64,
        end: f64,
    },
    WorkMismatch {
        job: String,
        done: f64,
        required: f64,
    },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FeasibilityVerdict {
    pub passed: bool,
    pub violations: Vec<Violation>,
    pub tolerance: f64,
}

/// Time slack for comparisons at time `t`.
fn time_slack(tol: f64, t: f64) -> f64 {
    tol * t.abs().max(1.0)
}

pub fn check_feasibility(schedule: &Schedule, instance: &Instance, tol: f64) -> FeasibilityVerdict {
    let mut violations = Vec::new();
    let index: HashMap<&str, usize> = instance
        .jobs
        .iter()
        .enumerate()
        .map(|(i, j)| (j.id.as_str(), i))
        .collect();
    let mut done = vec![0.0; instance.jobs.len()];
    let mut by_machine: HashMap<usize, Vec<&crate::timetable::Segment>> = HashMap::new();
    let mut by_job: Vec<Vec<&crate::timetable::Segment>> = vec![Vec::new(); instance.jobs.len()];

    for seg in &schedule.segments {
        let Some(&i) = index.get(seg.job.as_str()) else {
            violations.push(Violation::UnknownJob {
                job: seg.job.clone(),
            });
            continue;
        };
        if !(seg.end >= seg.start) || !(seg.speed > 0.0) || !seg.speed.is_finite() {
            violations.push(Violation::BadSegment {
                job: seg.job.clone(),
                start: seg.start,
                end: seg.end,
            });
            continue;
        }
        if seg.machine == 0 || seg.machine > instance.machines {
            violations.push(Violation::BadMachine {
                job: seg.job.clone(),
                machine: seg.machine,
            });
        }
        let job = &instance.jobs[i];
        if seg.start < job.release - time_slack(tol, job.release)
            || seg.end > job.deadline + time_slack(tol, job.deadline)
        {
            violations.push(Violation::SpanViolation {
                job: seg.job.clone(),
                start: seg.start,
                end: seg.end,
            });
        }
        done[i] += seg.duration() * seg.speed;
        by_machine.entry(seg.machine).or_default().push(seg);
        by_job[i].push(seg);
    }

    let mut machines: Vec<_> = by_machine.into_iter().collect();
    machines.sort_by_key(|(m, _)| *m);
    for (machine, mut segs) in machines {
        segs.sort_by(|a, b| a.start.total_cmp(&b.start));
        for w in segs.windows(2) {
            if w[1].start < w[0].end - time_slack(tol, w[0].end) {
                violations.push(Violation::MachineOverlap {
                    machine,
                    first: w[0].job.clone(),
                    second: w[1].job.clone(),
                    at: w[1].start,
                });
            }
        }
    }
    for (i, segs) in by_job.iter_mut().enumerate() {
        segs.sort_by(|a, b| a.start.total_cmp(&b.start));
        for w in segs.windows(2) {
            if w[1].start < w[0].end - time_slack(tol, w[0].end) {
                violations.push(Violation::ParallelExecution {
                    job: instance.jobs[i].id.clone(),
                    at: w[1].start,
                });
            }
        }
        let w = instance.jobs[i].work;
        if (done[i] - w).abs() > tol * w {
            violations.push(Violation::WorkMismatch {
                job: instance.jobs[i].id.clone(),
                done: done[i],
                required: w,
            });
        }
    }

    FeasibilityVerdict {
        passed: violations.is_empty(),
        violations,
        tolerance: tol,
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EnergyReport {
    pub per_job: Vec<f64>,
    pub total: f64,
    /// Busy fraction `sum_i t_ij / (m |I_j|)` per interval, when times are known.
    pub utilization: Vec<f64>,
}

/// Closed-form energy `w_i s_i^(alpha-1)` per job.
pub fn energy_of(speeds: &[f64], jobs: &[Job], alpha: f64) -> Result<EnergyReport> {
    let mut per_job = Vec::with_capacity(jobs.len());
    for (job, &s) in jobs.iter().zip(speeds) {
        if !(s > 0.0) {
            return Err(Error::NonPositiveSpeed(s));
        }
        per_job.push(job.work * s.powf(alpha - 1.0));
    }
    let total = per_job.iter().sum();
    Ok(EnergyReport {
        per_job,
        total,
        utilization: Vec::new(),
    })
}

impl EnergyReport {
    pub fn with_utilization(mut self, times: &TimeMatrix, machines: usize) -> Self {
        self.utilization = times
            .grid
            .intervals
            .iter()
            .enumerate()
            .map(|(j, iv)| times.interval_total(j) / (machines as f64 * iv.len()))
            .collect();
        self
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Witness {
    pub job: String,
    /// The job it was compared against, for the pairwise properties.
    pub other: Option<String>,
    pub interval: usize,
    /// How far past the tolerance the comparison failed.
    pub margin: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PropertyCheck {
    pub property: u8,
    pub passed: bool,
    pub witness: Option<Witness>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct KktVerdict {
    pub properties: Vec<PropertyCheck>,
    pub tolerance: f64,
}

impl KktVerdict {
    pub fn passed(&self) -> bool {
        self.properties.iter().all(|p| p.passed)
    }

    pub fn property(&self, number: u8) -> &PropertyCheck {
        &self.properties[usize::from(number) - 1]
    }
}

fn record(slot: &mut Option<Witness>, w: impl FnOnce() -> Witness) {
    if slot.is_none() {
        *slot = Some(w());
    }
}

/// Checks the five optimality properties on `times` with one speed per job.
/// Speed comparisons are relative to `tol`; "zero" and "full interval" mean
/// within `tol * |I_j|` of 0 and `|I_j|`.
pub fn check_kkt_properties(
    instance: &Instance,
    speeds: &[f64],
    times: &TimeMatrix,
    tol: f64,
) -> KktVerdict {
    check_with_property_one(instance, speeds, times, tol, None)
}

fn check_with_property_one(
    instance: &Instance,
    speeds: &[f64],
    times: &TimeMatrix,
    tol: f64,
    one: Option<Witness>,
) -> KktVerdict {
    let id = |i: usize| instance.jobs[i].id.clone();
    let mut w2 = None;
    let mut w3 = None;
    let mut w4 = None;
    let mut w5 = None;

    for (j, iv) in times.grid.intervals.iter().enumerate() {
        let len = iv.len();
        let eps = tol * len;
        let alive = &iv.alive;
        let t = &times.times[j];
        let is_zero = |k: usize| t[k] <= eps;
        let is_full = |k: usize| t[k] >= len - eps;

        // (5) room for everyone: everybody runs the whole interval
        if alive.len() <= instance.machines {
            for (k, &i) in alive.iter().enumerate() {
                if !is_full(k) {
                    record(&mut w5, || Witness {
                        job: id(i),
                        other: None,
                        interval: j,
                        margin: len - t[k],
                    });
                }
            }
        }

        // extreme speeds among running / not-full / partial jobs
        let pick = |pred: &dyn Fn(usize) -> bool, better: fn(f64, f64) -> bool| {
            let mut best: Option<usize> = None;
            for k in 0..alive.len() {
                if pred(k) && best.is_none_or(|b| better(speeds[alive[k]], speeds[alive[b]])) {
                    best = Some(k);
                }
            }
            best
        };
        let lt = |a: f64, b: f64| a < b;
        let gt = |a: f64, b: f64| a > b;

        // (2) idle job no faster than any running job
        if let Some(slow) = pick(&|k| !is_zero(k), lt) {
            let s_min = speeds[alive[slow]];
            for k in 0..alive.len() {
                let s = speeds[alive[k]];
                if is_zero(k) && s > s_min * (1.0 + tol) {
                    record(&mut w2, || Witness {
                        job: id(alive[k]),
                        other: Some(id(alive[slow])),
                        interval: j,
                        margin: s - s_min,
                    });
                }
            }
        }

        // (3) full-interval job no slower than any job that is not full
        if let Some(fast) = pick(&|k| !is_full(k), gt) {
            let s_max = speeds[alive[fast]];
            for k in 0..alive.len() {
                let s = speeds[alive[k]];
                if is_full(k) && s < s_max * (1.0 - tol) {
                    record(&mut w3, || Witness {
                        job: id(alive[k]),
                        other: Some(id(alive[fast])),
                        interval: j,
                        margin: s_max - s,
                    });
                }
            }
        }

        // (4) partially running jobs share one speed
        let partial = |k: usize| !is_zero(k) && !is_full(k);
        if let (Some(lo), Some(hi)) = (pick(&partial, lt), pick(&partial, gt)) {
            let (a, b) = (speeds[alive[lo]], speeds[alive[hi]]);
            if b - a > tol * b {
                record(&mut w4, || Witness {
                    job: id(alive[hi]),
                    other: Some(id(alive[lo])),
                    interval: j,
                    margin: b - a,
                });
            }
        }
    }

    let check = |property: u8, witness: Option<Witness>| PropertyCheck {
        property,
        passed: witness.is_none(),
        witness,
    };
    KktVerdict {
        properties: vec![
            check(1, one),
            check(2, w2),
            check(3, w3),
            check(4, w4),
            check(5, w5),
        ],
        tolerance: tol,
    }
}

/// Optimality check of an arbitrary schedule: per-job speeds are read from
/// its segments (property 1 fails when one job's segments disagree) and the
/// time matrix is measured from segment overlaps with the grid.
pub fn check_schedule_kkt(instance: &Instance, schedule: &Schedule, tol: f64) -> KktVerdict {
    let times = measure_times(instance, schedule);
    let mut speeds = vec![0.0; instance.jobs.len()];
    let mut seen = vec![false; instance.jobs.len()];
    let mut one = None;
    for seg in &schedule.segments {
        let Some(i) = instance.job_index(&seg.job) else {
            continue;
        };
        if !seen[i] {
            seen[i] = true;
            speeds[i] = seg.speed;
        } else if (seg.speed - speeds[i]).abs() > tol * seg.speed.max(speeds[i]) {
            record(&mut one, || Witness {
                job: seg.job.clone(),
                other: None,
                interval: times
                    .grid
                    .breakpoints
                    .partition_point(|&t| t <= seg.start)
                    .saturating_sub(1),
                margin: (seg.speed - speeds[i]).abs(),
            });
        }
    }
    check_with_property_one(instance, &speeds, &times, tol, one)
}
