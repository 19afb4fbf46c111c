//! From per-job speeds to an explicit per-machine schedule.

use serde::{Deserialize, Serialize};

use crate::bal::SpeedAssignment;
use crate::error::{Error, Result};
use crate::flownet::{max_flow, FlowNetwork};
use crate::instance::{build_interval_grid, Instance, IntervalGrid, SolverConfig};

/// Pieces shorter than this are flow dust and are not emitted.
pub const MIN_SEGMENT: f64 = 1e-12;

/// `t_{i,j}`: time each alive job runs inside each interval.
///
/// `times[j][k]` belongs to job `grid.intervals[j].alive[k]`.
#[derive(Debug, Clone, PartialEq)]
pub struct TimeMatrix {
    pub grid: IntervalGrid,
    pub times: Vec<Vec<f64>>,
}

impl TimeMatrix {
    pub fn zeros(grid: IntervalGrid) -> Self {
        let times = grid
            .intervals
            .iter()
            .map(|iv| vec![0.0; iv.alive.len()])
            .collect();
        TimeMatrix { grid, times }
    }

    pub fn get(&self, job: usize, interval: usize) -> f64 {
        match self.grid.intervals[interval].alive.binary_search(&job) {
            Ok(k) => self.times[interval][k],
            Err(_) => 0.0,
        }
    }

    /// Sets `t_{job,interval}`; returns false if the job is not alive there.
    pub fn set(&mut self, job: usize, interval: usize, t: f64) -> bool {
        match self.grid.intervals[interval].alive.binary_search(&job) {
            Ok(k) => {
                self.times[interval][k] = t;
                true
            }
            Err(_) => false,
        }
    }

    pub fn job_total(&self, job: usize) -> f64 {
        (0..self.grid.len()).map(|j| self.get(job, j)).sum()
    }

    pub fn interval_total(&self, interval: usize) -> f64 {
        self.times[interval].iter().sum()
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Segment {
    pub job: String,
    /// 1-based machine label.
    pub machine: usize,
    pub start: f64,
    pub end: f64,
    pub speed: f64,
}

impl Segment {
    pub fn duration(&self) -> f64 {
        self.end - self.start
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Schedule {
    pub energy: f64,
    pub makespan: f64,
    pub segments: Vec<Segment>,
}

impl Schedule {
    /// Builds a schedule and derives energy and makespan from the segments.
    pub fn from_segments(segments: Vec<Segment>, alpha: f64) -> Self {
        let energy = segments
            .iter()
            .map(|s| s.duration() * s.speed.powf(alpha))
            .sum();
        let makespan = segments
            .iter()
            .map(|s| s.end)
            .fold(f64::NEG_INFINITY, f64::max);
        Schedule {
            energy,
            makespan,
            segments,
        }
    }
}

/// A piece of `pack_interval` output; `job` is whatever key the caller used.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Piece {
    pub job: usize,
    pub machine: usize,
    pub start: f64,
    pub end: f64,
}

/// Computes per-interval times for the given speeds through the network with
/// source capacities `w_i / s_i`.
pub fn assign_interval_times(
    instance: &Instance,
    speeds: &SpeedAssignment,
    config: &SolverConfig,
) -> Result<TimeMatrix> {
    let grid = build_interval_grid(&instance.jobs, instance.machines);
    let mut demands = Vec::with_capacity(instance.jobs.len());
    for (job, &s) in instance.jobs.iter().zip(&speeds.speeds) {
        if !(s > 0.0) || !s.is_finite() {
            return Err(Error::NonPositiveSpeed(s));
        }
        demands.push(job.work / s);
    }
    let net = FlowNetwork::with_demands(&grid, &instance.jobs, &demands)?;
    let flow = max_flow(&net, config.flow_tolerance);
    let demand = net.demand();
    if demand - flow.value > config.flow_tolerance * demand {
        return Err(Error::InfeasibleSpeeds {
            flow: flow.value,
            demand,
        });
    }

    let mut tm = TimeMatrix::zeros(grid);
    for a in net.middle_arcs() {
        let arc = net.arcs[a];
        let job = net.jobs[arc.from - 1];
        let interval = net.intervals[arc.to - 1 - net.jobs.len()];
        let len = arc.capacity;
        let mut t = flow.arc_flows[a];
        // snap to the interval ends so full/empty tests downstream are exact
        if len - t <= MIN_SEGMENT * len.max(1.0) {
            t = len;
        } else if t <= MIN_SEGMENT * len.max(1.0) {
            t = 0.0;
        }
        tm.set(job, interval, t);
    }
    Ok(tm)
}

/// Wrap-around packing of one interval: jobs in descending time order (ties
/// by key) fill machine 1 from `start`, overflow continues on machine 2 from
/// `start`, and so on. A job split across two machines gets a suffix of one
/// and a prefix of the next, which never overlap because its time is at most
/// the interval length.
pub fn pack_interval(
    times: &[(usize, f64)],
    machines: usize,
    interval: (f64, f64),
) -> Result<Vec<Piece>> {
    let (start, end) = interval;
    let len = end - start;
    let slop = MIN_SEGMENT * len.max(1.0);
    let mut order: Vec<(usize, f64)> = Vec::with_capacity(times.len());
    for &(job, t) in times {
        if t > len + slop {
            return Err(Error::OversizeJobTime {
                job: job.to_string(),
                start,
                end,
            });
        }
        order.push((job, t.clamp(0.0, len)));
    }
    let total: f64 = order.iter().map(|p| p.1).sum();
    if total > machines as f64 * len + slop * (order.len() as f64).max(1.0) {
        return Err(Error::OverfullInterval { start, end });
    }
    order.sort_by(|a, b| b.1.total_cmp(&a.1).then(a.0.cmp(&b.0)));

    let mut pieces = Vec::new();
    let mut machine = 1usize;
    let mut cursor = start;
    for (job, t) in order {
        let mut left = t;
        while left > MIN_SEGMENT {
            if machine > machines {
                // only rounding dust can remain here
                break;
            }
            let room = end - cursor;
            let take = left.min(room);
            if take > MIN_SEGMENT {
                pieces.push(Piece {
                    job,
                    machine,
                    start: cursor,
                    end: cursor + take,
                });
            }
            left -= take;
            if room - take <= slop {
                machine += 1;
                cursor = start;
            } else {
                cursor += take;
            }
        }
    }
    Ok(pieces)
}

/// Timetable for `speeds`, packed interval by interval.
pub fn build_schedule(
    instance: &Instance,
    speeds: &SpeedAssignment,
    config: &SolverConfig,
) -> Result<(Schedule, TimeMatrix)> {
    let tm = assign_interval_times(instance, speeds, config)?;
    let mut segments = Vec::new();
    for (j, iv) in tm.grid.intervals.iter().enumerate() {
        let times: Vec<(usize, f64)> = iv
            .alive
            .iter()
            .copied()
            .zip(tm.times[j].iter().copied())
            .filter(|&(_, t)| t > 0.0)
            .collect();
        let pieces = pack_interval(&times, instance.machines, (iv.start, iv.end))?;
        segments.extend(pieces.into_iter().map(|p| Segment {
            job: instance.jobs[p.job].id.clone(),
            machine: p.machine,
            start: p.start,
            end: p.end,
            speed: speeds.speeds[p.job],
        }));
    }
    Ok((Schedule::from_segments(segments, instance.alpha), tm))
}

/// Per-interval times measured back from schedule segments. Time falling
/// outside a job's span or on unknown jobs is ignored here; feasibility
/// checking reports it.
pub fn measure_times(instance: &Instance, schedule: &Schedule) -> TimeMatrix {
    let grid = build_interval_grid(&instance.jobs, instance.machines);
    let mut tm = TimeMatrix::zeros(grid);
    let index: std::collections::HashMap<&str, usize> = instance
        .jobs
        .iter()
        .enumerate()
        .map(|(i, j)| (j.id.as_str(), i))
        .collect();
    for seg in &schedule.segments {
        let Some(&i) = index.get(seg.job.as_str()) else {
            continue;
        };
        let bp = &tm.grid.breakpoints;
        let first = bp.partition_point(|&t| t <= seg.start).saturating_sub(1);
        for j in first..tm.grid.len() {
            let (s, e) = (tm.grid.intervals[j].start, tm.grid.intervals[j].end);
            if s >= seg.end {
                break;
            }
            let overlap = seg.end.min(e) - seg.start.max(s);
            if overlap > 0.0 {
                let cur = tm.get(i, j);
                tm.set(i, j, cur + overlap);
            }
        }
    }
    tm
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::bal::bal_solve;
    use crate::instance::Job;

    fn speeds(v: Vec<f64>) -> SpeedAssignment {
        let n = v.len();
        SpeedAssignment {
            speeds: v,
            step: vec![0; n],
            crit_speeds: vec![],
        }
    }

    fn piece(job: usize, machine: usize, start: f64, end: f64) -> Piece {
        Piece {
            job,
            machine,
            start,
            end,
        }
    }

    #[test]
    fn interval_times() {
        let cfg = SolverConfig::default();
        let inst = Instance::new(vec![Job::new("1", 4.0, 0.0, 2.0)], 2, 2.0);
        let tm = assign_interval_times(&inst, &speeds(vec![2.0]), &cfg).unwrap();
        assert_eq!(tm.get(0, 0), 2.0);

        let inst = Instance::new(
            vec![Job::new("1", 3.0, 0.0, 1.0), Job::new("2", 1.0, 0.0, 1.0)],
            1,
            2.0,
        );
        let tm = assign_interval_times(&inst, &speeds(vec![4.0, 4.0]), &cfg).unwrap();
        assert_eq!((tm.get(0, 0), tm.get(1, 0)), (0.75, 0.25));

        let inst = Instance::new(
            vec![Job::new("1", 6.0, 0.0, 1.0), Job::new("2", 1.0, 0.0, 1.0)],
            2,
            2.0,
        );
        let tm = assign_interval_times(&inst, &speeds(vec![6.0, 1.0]), &cfg).unwrap();
        assert_eq!((tm.get(0, 0), tm.get(1, 0)), (1.0, 1.0));
    }

    #[test]
    fn infeasible_speeds_rejected() {
        let inst = Instance::new(
            vec![Job::new("1", 3.0, 0.0, 1.0), Job::new("2", 1.0, 0.0, 1.0)],
            1,
            2.0,
        );
        let err = assign_interval_times(&inst, &speeds(vec![3.0, 3.0]), &SolverConfig::default());
        assert!(matches!(err, Err(Error::InfeasibleSpeeds { .. })));
    }

    #[test]
    fn packing_examples() {
        let p = pack_interval(&[(0, 2.0), (1, 1.5), (2, 0.5)], 2, (0.0, 2.0)).unwrap();
        assert_eq!(
            p,
            vec![
                piece(0, 1, 0.0, 2.0),
                piece(1, 2, 0.0, 1.5),
                piece(2, 2, 1.5, 2.0)
            ]
        );

        let p = pack_interval(&[(0, 1.5), (1, 1.5), (2, 1.0)], 2, (0.0, 2.0)).unwrap();
        assert_eq!(
            p,
            vec![
                piece(0, 1, 0.0, 1.5),
                piece(1, 1, 1.5, 2.0),
                piece(1, 2, 0.0, 1.0),
                piece(2, 2, 1.0, 2.0)
            ]
        );

        let p = pack_interval(&[(0, 1.0)], 1, (0.0, 1.0)).unwrap();
        assert_eq!(p, vec![piece(0, 1, 0.0, 1.0)]);
    }

    #[test]
    fn packing_errors() {
        assert!(matches!(
            pack_interval(&[(0, 1.5)], 2, (0.0, 1.0)),
            Err(Error::OversizeJobTime { .. })
        ));
        assert!(matches!(
            pack_interval(&[(0, 1.0), (1, 1.0), (2, 0.5)], 2, (0.0, 1.0)),
            Err(Error::OverfullInterval { .. })
        ));
    }

    #[test]
    fn schedules() {
        let cfg = SolverConfig::default();
        let inst = Instance::new(vec![Job::new("1", 4.0, 0.0, 2.0)], 2, 2.0);
        let (sched, _) = build_schedule(&inst, &speeds(vec![2.0]), &cfg).unwrap();
        assert_eq!(
            sched.segments,
            vec![Segment {
                job: "1".into(),
                machine: 1,
                start: 0.0,
                end: 2.0,
                speed: 2.0
            }]
        );
        assert_eq!(sched.energy, 8.0);

        let inst = Instance::new(
            vec![Job::new("1", 6.0, 0.0, 1.0), Job::new("2", 1.0, 0.0, 1.0)],
            2,
            2.0,
        );
        let (sa, _) = bal_solve(&inst, &cfg).unwrap();
        let (sched, _) = build_schedule(&inst, &sa, &cfg).unwrap();
        assert_eq!(sched.segments.len(), 2);
        assert_eq!(
            (sched.segments[0].job.as_str(), sched.segments[0].machine),
            ("1", 1)
        );
        assert_eq!(
            (sched.segments[1].job.as_str(), sched.segments[1].machine),
            ("2", 2)
        );
        assert!((sched.energy - 37.0).abs() < 1e-7);

        let jobs = (0..3)
            .map(|k| Job::new(k.to_string(), 1.0, 0.0, 1.0))
            .collect();
        let inst = Instance::new(jobs, 3, 3.0);
        let (sa, _) = bal_solve(&inst, &cfg).unwrap();
        let (sched, _) = build_schedule(&inst, &sa, &cfg).unwrap();
        let machines: Vec<usize> = sched.segments.iter().map(|s| s.machine).collect();
        assert_eq!(machines, vec![1, 2, 3]);
        assert!((sched.energy - 3.0).abs() < 1e-9);
    }

    mod props {
        use super::*;
        use proptest::prelude::*;

        proptest! {
            #[test]
            fn packing_round_trips(raw in prop::collection::vec(0.0f64..=1.0, 1..8), m in 1usize..4) {
                // scale the times so the interval is never overfull
                let total: f64 = raw.iter().sum();
                let scale = if total > m as f64 { m as f64 / total } else { 1.0 };
                let times: Vec<(usize, f64)> = raw.iter().enumerate().map(|(k, &t)| (k, t * scale * 3.0)).collect();
                let pieces = pack_interval(&times, m, (5.0, 8.0)).unwrap();
                for &(job, t) in &times {
                    let mine: Vec<&Piece> = pieces.iter().filter(|p| p.job == job).collect();
                    let got: f64 = mine.iter().map(|p| p.end - p.start).sum();
                    prop_assert!((got - t).abs() <= 1e-9);
                    for a in &mine {
                        for b in &mine {
                            if a != b {
                                prop_assert!(a.end <= b.start + 1e-12 || b.end <= a.start + 1e-12);
                            }
                        }
                    }
                }
                for p in &pieces {
                    prop_assert!(p.machine >= 1 && p.machine <= m);
                    prop_assert!(p.start >= 5.0 && p.end <= 8.0 + 1e-12);
                }
                let used: std::collections::HashSet<usize> = pieces.iter().map(|p| p.machine).collect();
                prop_assert!(used.len() <= m.min(times.len()));
            }
        }
    }
}
