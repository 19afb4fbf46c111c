//! Energy-optimal scheduling of jobs with release dates and deadlines on
//! speed-scalable processors, with preemption and migration.
//!
//! The solver ([`bal::bal_solve`]) lowers a common speed until the work
//! assignment max-flow network stops admitting every job, retires the jobs
//! that became critical at that speed, hands their processors over, and
//! repeats. [`timetable`] turns the speeds into explicit per-machine
//! segments, [`mbal`] solves the makespan-under-budget variant, and
//! [`verify`] checks feasibility and optimality of any schedule.

#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod bal;
pub mod error;
pub mod flownet;
pub mod instance;
pub mod mbal;
pub mod oracle;
pub mod timetable;
pub mod verify;

pub use bal::{bal_solve, bal_solve_observed, BalStep, BalTrace, SpeedAssignment};
pub use error::{Error, Result};
pub use instance::{validate_instance, Instance, IntervalGrid, Job, SolverConfig};
pub use mbal::{mbal_solve, BudgetJob, EnergyBudgetProblem, MbalResult};
pub use timetable::{build_schedule, Schedule, Segment, TimeMatrix};
pub use verify::{check_feasibility, check_kkt_properties, check_schedule_kkt, KktVerdict};

/// Everything one BAL run produces.
#[derive(Debug, Clone)]
pub struct Solution {
    pub speeds: SpeedAssignment,
    pub trace: BalTrace,
    pub schedule: Schedule,
    pub times: TimeMatrix,
}

/// Speeds, timetable and trace for `instance`.
pub fn solve(instance: &Instance, config: &SolverConfig) -> Result<Solution> {
    let (speeds, trace) = bal_solve(instance, config)?;
    let (schedule, times) = build_schedule(instance, &speeds, config)?;
    Ok(Solution {
        speeds,
        trace,
        schedule,
        times,
    })
}
