//! Makespan minimisation under an energy budget: bisection on a common
//! deadline, with BAL deciding whether the budget suffices.

use serde::{Deserialize, Serialize};

use crate::bal::{bal_solve, SpeedAssignment};
use crate::error::{Error, Result};
use crate::instance::{Instance, Job, SolverConfig};
use crate::timetable::{build_schedule, Schedule};
use crate::verify::energy_of;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BudgetJob {
    pub id: String,
    pub work: f64,
    pub release: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EnergyBudgetProblem {
    pub jobs: Vec<BudgetJob>,
    pub machines: usize,
    pub alpha: f64,
    pub budget: f64,
}

impl EnergyBudgetProblem {
    pub fn total_work(&self) -> f64 {
        self.jobs.iter().map(|j| j.work).sum()
    }

    pub fn max_release(&self) -> f64 {
        self.jobs
            .iter()
            .map(|j| j.release)
            .fold(f64::NEG_INFINITY, f64::max)
    }

    fn validate(&self) -> Result<()> {
        if !(self.budget > 0.0) || !self.budget.is_finite() {
            return Err(Error::NonPositiveBudget(self.budget));
        }
        // deadline-free check of the remaining invariants
        let probe = self.with_deadline(self.max_release() + 1.0);
        crate::instance::validate_instance(probe).map(|_| ())
    }

    /// The scheduling instance with every deadline set to `makespan`.
    pub fn with_deadline(&self, makespan: f64) -> Instance {
        let jobs = self
            .jobs
            .iter()
            .map(|j| Job::new(j.id.clone(), j.work, j.release, makespan))
            .collect();
        Instance::new(jobs, self.machines, self.alpha)
    }
}

/// Makespan bracket: all work spread over `m` machines from time zero, and
/// all work on one machine after the last release, both at budget `E`.
pub fn makespan_bounds(problem: &EnergyBudgetProblem) -> (f64, f64) {
    let w = problem.total_work();
    let single = (w.powf(problem.alpha) / problem.budget).powf(1.0 / (problem.alpha - 1.0));
    (
        single / problem.machines as f64,
        problem.max_release() + single,
    )
}

#[derive(Debug, Clone)]
pub struct MakespanEnergy {
    pub energy: f64,
    pub speeds: SpeedAssignment,
    pub instance: Instance,
}

/// Minimum energy needed to finish every job by `makespan`.
pub fn min_energy_for_makespan(
    problem: &EnergyBudgetProblem,
    makespan: f64,
    config: &SolverConfig,
) -> Result<MakespanEnergy> {
    if let Some(j) = problem.jobs.iter().find(|j| makespan <= j.release) {
        return Err(Error::BadDeadline {
            job: j.id.clone(),
            makespan,
        });
    }
    let instance = problem.with_deadline(makespan);
    let (speeds, _) = bal_solve(&instance, config)?;
    let energy = energy_of(&speeds.speeds, &instance.jobs, instance.alpha)?.total;
    Ok(MakespanEnergy {
        energy,
        speeds,
        instance,
    })
}

#[derive(Debug, Clone)]
pub struct MbalResult {
    pub makespan: f64,
    /// Minimum energy at `makespan` (closed form).
    pub energy: f64,
    pub speeds: SpeedAssignment,
    pub schedule: Schedule,
    pub instance: Instance,
    /// Number of BAL runs spent in the search.
    pub evaluations: usize,
}

/// Smallest common deadline whose minimum energy fits the budget, to within
/// `config.speed_tolerance * X_UB`. The returned end of the bracket is always
/// the one that fits.
pub fn mbal_solve(problem: &EnergyBudgetProblem, config: &SolverConfig) -> Result<MbalResult> {
    config.validate()?;
    problem.validate()?;
    let (x_lb, x_ub) = makespan_bounds(problem);
    let budget = problem.budget * (1.0 + config.flow_tolerance);
    let gap = config.speed_tolerance * x_ub;
    let mut evaluations = 0usize;

    let mut fits = |x: f64| -> Result<Option<MakespanEnergy>> {
        evaluations += 1;
        if evaluations > config.max_iterations_guard {
            return Err(Error::IterationGuardExceeded(config.max_iterations_guard));
        }
        if x <= problem.max_release() {
            return Ok(None);
        }
        let e = min_energy_for_makespan(problem, x, config)?;
        Ok((e.energy <= budget).then_some(e))
    };

    let mut hi = x_ub;
    let mut best = fits(hi)?.ok_or_else(|| {
        Error::InvariantViolation(format!("upper makespan bound {x_ub} exceeds the budget"))
    })?;
    let mut lo = x_lb.max(problem.max_release()).min(hi);
    while hi - lo > gap {
        let mid = 0.5 * (lo + hi);
        match fits(mid)? {
            Some(e) => {
                hi = mid;
                best = e;
            }
            None => lo = mid,
        }
    }

    let (schedule, _) = build_schedule(&best.instance, &best.speeds, config)?;
    Ok(MbalResult {
        makespan: hi,
        energy: best.energy,
        speeds: best.speeds,
        schedule,
        instance: best.instance,
        evaluations,
    })
}
