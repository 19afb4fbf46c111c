//! The BAL loop: find the critical speed, retire the critical jobs at that
//! speed, give their processors away, repeat until every job has a speed.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::flownet::{
    build_wap_network, max_flow_from, outcome, residual_reachable_from_source,
    residual_reaching_sink, FlowNetwork, FlowResult, WapOutcome,
};
use crate::instance::{
    build_interval_grid, job_density, validate_instance, Instance, IntervalGrid, Job, SolverConfig,
};

/// Final per-job speeds, indexed like `Instance::jobs`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SpeedAssignment {
    pub speeds: Vec<f64>,
    /// BAL step (0-based) at which each job was retired.
    pub step: Vec<usize>,
    /// Critical speed of every step, non-increasing.
    pub crit_speeds: Vec<f64>,
}

impl SpeedAssignment {
    pub fn speed_of(&self, instance: &Instance, id: &str) -> Option<f64> {
        instance.job_index(id).map(|i| self.speeds[i])
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MachineUpdate {
    pub interval: usize,
    pub before: usize,
    pub after: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BalStep {
    pub step: usize,
    pub s_crit: f64,
    pub critical_jobs: Vec<String>,
    pub tight_intervals: Vec<usize>,
    pub machine_updates: Vec<MachineUpdate>,
    /// Flow computations spent on this step.
    pub probes: usize,
}

pub type BalTrace = Vec<BalStep>;

/// Initial bracket for the critical speed of the active jobs in `grid`.
pub fn speed_bounds(grid: &IntervalGrid, jobs: &[Job]) -> (f64, f64) {
    let lower = max_density(grid, jobs);
    let crowded = grid
        .intervals
        .iter()
        .filter(|iv| iv.len() > 0.0)
        .map(|iv| iv.alive.iter().map(|&i| jobs[i].work).sum::<f64>() / iv.len())
        .fold(0.0, f64::max);
    (lower, crowded.max(lower))
}

fn max_density(grid: &IntervalGrid, jobs: &[Job]) -> f64 {
    grid.jobs
        .iter()
        .map(|&i| job_density(&jobs[i]))
        .fold(0.0, f64::max)
}

/// Result of the critical-speed search.
#[derive(Debug, Clone)]
pub struct CriticalSpeed {
    pub speed: f64,
    /// Largest proven lower bound on the exact critical speed.
    pub lower: f64,
    pub network: FlowNetwork,
    /// Maximum flow at `speed`, with saturation widened by the bracket slack.
    pub flow: FlowResult,
    pub probes: usize,
}

/// Smallest feasible common speed in `[s_lb, s_ub]`, to within
/// `config.speed_tolerance * s_ub`.
pub fn find_critical_speed(
    grid: &IntervalGrid,
    jobs: &[Job],
    s_lb: f64,
    s_ub: f64,
    config: &SolverConfig,
) -> Result<CriticalSpeed> {
    search_critical_speed(
        grid,
        jobs,
        s_lb,
        s_ub,
        config.speed_tolerance * s_ub,
        config,
        None,
    )
}

/// Bisection on the common speed. Every infeasible probe also yields a cut
/// `X` with `W_X / K_X <= s*` (work upstream over non-source cut capacity),
/// which is used as the next lower bound and probed directly; on these
/// networks that usually lands on `s*` after a couple of probes.
fn search_critical_speed(
    grid: &IntervalGrid,
    jobs: &[Job],
    s_lb: f64,
    s_ub: f64,
    abs_tol: f64,
    config: &SolverConfig,
    warm: Option<(&FlowNetwork, &[f64])>,
) -> Result<CriticalSpeed> {
    let mut probes = 0usize;
    let mut last: Option<(FlowNetwork, Vec<f64>)> =
        warm.map(|(net, flows)| (net.clone(), flows.to_vec()));
    let mut probe = |v: f64, last: &mut Option<(FlowNetwork, Vec<f64>)>| -> Result<WapOutcome> {
        probes += 1;
        if probes > config.max_iterations_guard {
            return Err(Error::IterationGuardExceeded(config.max_iterations_guard));
        }
        let net = build_wap_network(grid, jobs, v)?;
        let start = match last.as_ref() {
            Some((prev, flows)) => net.carry_flow(prev, flows),
            None => vec![0.0; net.arcs.len()],
        };
        let flow = max_flow_from(&net, config.flow_tolerance, start);
        *last = Some((net.clone(), flow.arc_flows.clone()));
        Ok(outcome(net, flow))
    };

    let top = probe(s_ub, &mut last)?;
    if !top.feasible {
        return Err(Error::InfeasibleAtUpperBound(s_ub));
    }
    let mut hi = s_ub;
    let mut best = top;
    let mut lo = s_lb.min(s_ub);
    let mut next = Some(lo);

    while hi - lo > abs_tol {
        let v = match next.take() {
            Some(c) if c >= lo && c < hi => c,
            _ => 0.5 * (lo + hi),
        };
        let out = probe(v, &mut last)?;
        if out.feasible {
            hi = v;
            best = out;
        } else {
            lo = lo.max(v);
            if let Some(c) = cut_ratio(&out) {
                if c > lo && c < hi {
                    lo = c;
                    next = Some(c);
                } else if c >= hi {
                    lo = hi;
                }
            }
        }
    }

    let work: f64 = grid.jobs.iter().map(|&i| jobs[i].work).sum();
    let slack = if lo > 0.0 && lo < hi {
        work / lo - work / hi
    } else {
        0.0
    };
    let WapOutcome { network, flow, .. } = best;
    let flow = flow.with_slack(&network, slack);
    Ok(CriticalSpeed {
        speed: hi,
        lower: lo,
        network,
        flow,
        probes,
    })
}

/// `W_X / K_X` for the upstream side `X` of an infeasible probe.
fn cut_ratio(out: &WapOutcome) -> Option<f64> {
    let net = &out.network;
    let side = residual_reachable_from_source(net, &out.flow).ok()?;
    let mut upstream_work = 0.0;
    let mut fixed = 0.0;
    let speed = net.speed?;
    for (a, arc) in net.arcs.iter().enumerate() {
        if !side[arc.from] {
            continue;
        }
        if a < net.source_arcs().end {
            if side[arc.to] {
                upstream_work += arc.capacity * speed;
            }
        } else if !side[arc.to] {
            fixed += arc.capacity;
        }
    }
    (fixed > 0.0 && upstream_work > 0.0).then(|| upstream_work / fixed)
}

#[derive(Debug, Clone, PartialEq)]
pub struct CriticalSet {
    /// Instance job indices, ascending.
    pub jobs: Vec<usize>,
    /// Grid interval indices, ascending.
    pub tight_intervals: Vec<usize>,
}

/// Jobs that cannot reach the sink in the residual graph at the critical
/// speed, and intervals whose node cannot either.
pub fn find_critical_jobs(crit: &CriticalSpeed) -> Result<CriticalSet> {
    let net = &crit.network;
    let reaches = residual_reaching_sink(net, &crit.flow);
    if reaches[net.source()] {
        return Err(Error::InvariantViolation(
            "critical-speed flow is not maximum".into(),
        ));
    }
    let jobs: Vec<usize> = (0..net.jobs.len())
        .filter(|&k| !reaches[net.job_node(k)])
        .map(|k| net.jobs[k])
        .collect();
    if jobs.is_empty() {
        return Err(Error::NoCriticalJobFound(crit.speed));
    }
    let tight_intervals = (0..net.intervals.len())
        .filter(|&k| !reaches[net.interval_node(k)])
        .map(|k| net.intervals[k])
        .collect();
    Ok(CriticalSet {
        jobs,
        tight_intervals,
    })
}

/// Removes the critical jobs from `grid` and hands their processors over:
/// tight intervals lose all processors, every other interval loses one per
/// retired job alive in it.
pub fn retire_critical_jobs(
    grid: &IntervalGrid,
    set: &CriticalSet,
    crit: &CriticalSpeed,
) -> Result<(IntervalGrid, Vec<MachineUpdate>)> {
    let net = &crit.network;
    let flow = &crit.flow;
    let mut next = grid.clone();
    let mut updates = Vec::new();
    let retired = |i: usize| set.jobs.binary_search(&i).is_ok();

    for (k, &j) in net.intervals.iter().enumerate() {
        let before = grid.intervals[j].machines;
        let y = net.interval_node(k);
        let after = if set.tight_intervals.binary_search(&j).is_ok() {
            0
        } else {
            let mut count = 0usize;
            for &a in net.in_arcs(y) {
                let x = net.arcs[a].from;
                if !retired(net.jobs[x - 1]) {
                    continue;
                }
                count += 1;
                let cap = net.arcs[a].capacity;
                if !flow.saturated[a] {
                    return Err(Error::InvariantViolation(format!(
                        "retired job `{}` runs {} < {} in non-tight interval {j}",
                        net.jobs[x - 1],
                        flow.arc_flows[a],
                        cap
                    )));
                }
            }
            before
                .checked_sub(count)
                .ok_or(Error::NegativeCapacity { interval: j })?
        };
        if after != before {
            next.intervals[j].machines = after;
            updates.push(MachineUpdate {
                interval: j,
                before,
                after,
            });
        }
    }
    for iv in &mut next.intervals {
        iv.alive.retain(|&i| !retired(i));
    }
    next.jobs.retain(|&i| !retired(i));
    Ok((next, updates))
}

/// Runs BAL to completion on a validated copy of `instance`.
pub fn bal_solve(
    instance: &Instance,
    config: &SolverConfig,
) -> Result<(SpeedAssignment, BalTrace)> {
    bal_solve_observed(instance, config, |_, _| {})
}

/// [`bal_solve`], calling `observe` with every step's critical speed and
/// critical set before the jobs are retired.
pub fn bal_solve_observed(
    instance: &Instance,
    config: &SolverConfig,
    mut observe: impl FnMut(&CriticalSpeed, &CriticalSet),
) -> Result<(SpeedAssignment, BalTrace)> {
    config.validate()?;
    let instance = validate_instance(instance.clone())?;
    let jobs = &instance.jobs;
    let n = jobs.len();
    let mut grid = build_interval_grid(jobs, instance.machines);
    let (mut s_lb, mut s_ub) = speed_bounds(&grid, jobs);
    let abs_tol = config.speed_tolerance * s_ub;

    let mut speeds = vec![0.0; n];
    let mut step_of = vec![usize::MAX; n];
    let mut crit_speeds = Vec::new();
    let mut trace = Vec::new();
    let mut warm: Option<(FlowNetwork, Vec<f64>)> = None;

    while !grid.jobs.is_empty() {
        let step = trace.len();
        if step >= n {
            return Err(Error::IterationGuardExceeded(n));
        }
        let crit = search_critical_speed(
            &grid,
            jobs,
            s_lb,
            s_ub,
            abs_tol,
            config,
            warm.as_ref().map(|(net, f)| (net, f.as_slice())),
        )?;
        let set = find_critical_jobs(&crit)?;
        observe(&crit, &set);
        let (next, machine_updates) = retire_critical_jobs(&grid, &set, &crit)?;

        for &i in &set.jobs {
            speeds[i] = crit.speed;
            step_of[i] = step;
        }
        crit_speeds.push(crit.speed);
        trace.push(BalStep {
            step,
            s_crit: crit.speed,
            critical_jobs: set.jobs.iter().map(|&i| jobs[i].id.clone()).collect(),
            tight_intervals: set.tight_intervals.clone(),
            machine_updates,
            probes: crit.probes,
        });

        grid = next;
        s_ub = crit.speed;
        s_lb = max_density(&grid, jobs).min(s_ub);
        warm = Some((crit.network, crit.flow.arc_flows));
    }

    Ok((
        SpeedAssignment {
            speeds,
            step: step_of,
            crit_speeds,
        },
        trace,
    ))
}
