//! Reference solvers that share no code path with BAL: YDS for a single
//! processor and a brute-force search over per-job processing times for tiny
//! multiprocessor instances.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::instance::{build_interval_grid, Instance, Job};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum OracleMethod {
    Yds,
    Brute,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct OracleResult {
    pub speeds: Vec<f64>,
    pub energy: f64,
    pub method: OracleMethod,
}

fn energy(jobs: &[Job], speeds: &[f64], alpha: f64) -> f64 {
    jobs.iter()
        .zip(speeds)
        .map(|(j, &s)| j.work * s.powf(alpha - 1.0))
        .sum()
}

/// Optimal single-processor speeds by repeated densest-interval peeling.
pub fn yds_energy(jobs: &[Job], alpha: f64) -> OracleResult {
    let n = jobs.len();
    let mut span: Vec<(f64, f64)> = jobs.iter().map(|j| (j.release, j.deadline)).collect();
    let mut left: Vec<usize> = (0..n).collect();
    let mut speeds = vec![0.0; n];

    while !left.is_empty() {
        let mut best = (f64::NEG_INFINITY, 0.0, 0.0);
        for &a in &left {
            for &b in &left {
                let (lo, hi) = (span[a].0, span[b].1);
                if hi <= lo {
                    continue;
                }
                let work: f64 = left
                    .iter()
                    .filter(|&&i| span[i].0 >= lo && span[i].1 <= hi)
                    .map(|&i| jobs[i].work)
                    .sum();
                let g = work / (hi - lo);
                if g > best.0 {
                    best = (g, lo, hi);
                }
            }
        }
        let (g, lo, hi) = best;
        let (inside, rest): (Vec<usize>, Vec<usize>) = left
            .iter()
            .partition(|&&i| span[i].0 >= lo && span[i].1 <= hi);
        for &i in &inside {
            speeds[i] = g;
        }
        let squeeze = |t: f64| {
            if t <= lo {
                t
            } else if t >= hi {
                t - (hi - lo)
            } else {
                lo
            }
        };
        for &i in &rest {
            span[i] = (squeeze(span[i].0), squeeze(span[i].1));
        }
        left = rest;
    }

    OracleResult {
        energy: energy(jobs, &speeds, alpha),
        speeds,
        method: OracleMethod::Yds,
    }
}

pub const BRUTE_MAX_JOBS: usize = 4;
pub const BRUTE_MAX_INTERVALS: usize = 4;

/// Dense Edmonds-Karp on the job/interval network with per-job source
/// capacities. Returns the max-flow value.
struct TinyNetwork {
    n: usize,
    /// `(interval length, machines * length, alive jobs)`.
    intervals: Vec<(f64, f64, Vec<usize>)>,
}

impl TinyNetwork {
    fn new(instance: &Instance) -> Self {
        let grid = build_interval_grid(&instance.jobs, instance.machines);
        let intervals = grid
            .intervals
            .iter()
            .map(|iv| {
                (
                    iv.len(),
                    instance.machines as f64 * iv.len(),
                    iv.alive.clone(),
                )
            })
            .collect();
        TinyNetwork {
            n: instance.jobs.len(),
            intervals,
        }
    }

    fn max_flow(&self, supply: &[f64]) -> f64 {
        let n = self.n;
        let l = self.intervals.len();
        let size = n + l + 2;
        let (s, t) = (0, size - 1);
        let mut cap = vec![vec![0.0f64; size]; size];
        cap[s][1..=n].copy_from_slice(&supply[..n]);
        for (j, (len, total, alive)) in self.intervals.iter().enumerate() {
            for &i in alive {
                cap[1 + i][1 + n + j] = *len;
            }
            cap[1 + n + j][t] = *total;
        }
        let mut value = 0.0;
        loop {
            let mut prev = vec![usize::MAX; size];
            prev[s] = s;
            let mut queue = std::collections::VecDeque::from([s]);
            while let Some(u) = queue.pop_front() {
                for v in 0..size {
                    if prev[v] == usize::MAX && cap[u][v] > 1e-15 {
                        prev[v] = u;
                        queue.push_back(v);
                    }
                }
            }
            if prev[t] == usize::MAX {
                return value;
            }
            let mut push = f64::INFINITY;
            let mut v = t;
            while v != s {
                push = push.min(cap[prev[v]][v]);
                v = prev[v];
            }
            let mut v = t;
            while v != s {
                let u = prev[v];
                cap[u][v] -= push;
                cap[v][u] += push;
                v = u;
            }
            value += push;
        }
    }

    /// Largest total time job `k` can get when jobs before it have exactly
    /// `fixed` and jobs after it have none.
    fn room_for(&self, fixed: &[f64], k: usize, horizon: f64) -> f64 {
        let mut supply = vec![0.0; self.n];
        supply[..fixed.len()].copy_from_slice(fixed);
        supply[k] = horizon;
        (self.max_flow(&supply) - fixed.iter().sum::<f64>()).max(0.0)
    }
}

/// Minimum energy over per-job total processing times `T_i`.
///
/// Energy is `sum w_i^alpha T_i^(1-alpha)`. The feasible `T` vectors form a
/// polymatroid, so given `T_1..T_{k-1}` the largest feasible `T_k` is a
/// single max-flow away; nested golden-section searches over `T_1..T_{n-1}`
/// (the last job always takes all the room it has) minimise a convex
/// function at every level. `resolution` is the relative bracket width at
/// which each level stops.
pub fn brute_force_energy(instance: &Instance, resolution: f64) -> Result<OracleResult> {
    let grid = build_interval_grid(&instance.jobs, instance.machines);
    if instance.jobs.len() > BRUTE_MAX_JOBS || grid.len() > BRUTE_MAX_INTERVALS {
        return Err(Error::InstanceTooLarge {
            jobs: instance.jobs.len(),
            intervals: grid.len(),
        });
    }
    let net = TinyNetwork::new(instance);
    let horizon = grid.breakpoints.last().unwrap() - grid.breakpoints[0];
    let alpha = instance.alpha;
    let jobs = &instance.jobs;
    let cost = |i: usize, t: f64| {
        if t <= 0.0 {
            f64::INFINITY
        } else {
            jobs[i].work.powf(alpha) * t.powf(1.0 - alpha)
        }
    };
    let iterations = ((resolution.max(1e-15)).ln() / 0.618_033_988_75f64.ln()).ceil() as usize;

    // returns (best energy, times) for levels k.. given fixed prefix
    fn level(
        k: usize,
        prefix: &mut Vec<f64>,
        net: &TinyNetwork,
        horizon: f64,
        iterations: usize,
        cost: &dyn Fn(usize, f64) -> f64,
    ) -> (f64, Vec<f64>) {
        let room = net.room_for(prefix, k, horizon);
        if k + 1 == net.n {
            let mut times = prefix.clone();
            times.push(room);
            return (cost(k, room), times);
        }
        let eval = |t: f64, prefix: &mut Vec<f64>| {
            prefix.push(t);
            let (rest, times) = level(k + 1, prefix, net, horizon, iterations, cost);
            prefix.pop();
            (cost(k, t) + rest, times)
        };
        let inv_phi = 0.618_033_988_749_894_9;
        let (mut a, mut b) = (0.0, room);
        let mut c = b - inv_phi * (b - a);
        let mut d = a + inv_phi * (b - a);
        let mut fc = eval(c, prefix);
        let mut fd = eval(d, prefix);
        for _ in 0..iterations {
            if fc.0 <= fd.0 {
                b = d;
                d = c;
                fd = fc;
                c = b - inv_phi * (b - a);
                fc = eval(c, prefix);
            } else {
                a = c;
                c = d;
                fc = fd;
                d = a + inv_phi * (b - a);
                fd = eval(d, prefix);
            }
        }
        let end = eval(b, prefix);
        [fc, fd, end]
            .into_iter()
            .min_by(|x, y| x.0.total_cmp(&y.0))
            .unwrap()
    }

    let (best, times) = level(0, &mut Vec::new(), &net, horizon, iterations, &cost);
    let speeds: Vec<f64> = jobs.iter().zip(&times).map(|(j, &t)| j.work / t).collect();
    Ok(OracleResult {
        speeds,
        energy: best,
        method: OracleMethod::Brute,
    })
}
