use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum Error {
    #[error("instance has no jobs")]
    EmptyInstance,
    #[error("job `{0}` has non-positive work")]
    NonPositiveWork(String),
    #[error("job `{0}` has an empty span (deadline <= release)")]
    EmptySpan(String),
    #[error("job `{0}` has a non-finite field")]
    NonFinite(String),
    #[error("alpha must be > 1, got {0}")]
    BadAlpha(f64),
    #[error("machine count must be >= 1")]
    BadMachines,
    #[error("duplicate job id `{0}`")]
    DuplicateJobId(String),
    #[error("speed must be > 0, got {0}")]
    NonPositiveSpeed(f64),
    #[error("energy budget must be > 0, got {0}")]
    NonPositiveBudget(f64),
    #[error("tolerance must be > 0")]
    BadTolerance,
    #[error("flow is not maximum: sink reachable in the residual graph")]
    FlowNotMaximum,
    #[error("node {0} does not exist in the network")]
    UnknownNode(usize),
    #[error("work assignment infeasible at the upper speed bound {0}")]
    InfeasibleAtUpperBound(f64),
    #[error("no critical job found at speed {0}; tolerance too loose for this instance")]
    NoCriticalJobFound(f64),
    #[error("interval {interval} would get negative capacity")]
    NegativeCapacity { interval: usize },
    #[error("internal invariant violated: {0}")]
    InvariantViolation(String),
    #[error("iteration guard of {0} exceeded")]
    IterationGuardExceeded(usize),
    #[error("speeds admit no feasible timetable (flow {flow} < demand {demand})")]
    InfeasibleSpeeds { flow: f64, demand: f64 },
    #[error("interval [{start}, {end}] is overfull")]
    OverfullInterval { start: f64, end: f64 },
    #[error("job `{job}` needs more time than interval [{start}, {end}] offers")]
    OversizeJobTime { job: String, start: f64, end: f64 },
    #[error("makespan {makespan} does not exceed release date of job `{job}`")]
    BadDeadline { job: String, makespan: f64 },
    #[error("instance too large for the brute-force oracle ({jobs} jobs, {intervals} intervals)")]
    InstanceTooLarge { jobs: usize, intervals: usize },
    #[error("unknown job id `{0}`")]
    UnknownJob(String),
}

impl Error {
    /// Stable machine-readable code.
    pub fn code(&self) -> &'static str {
        match self {
            Error::EmptyInstance => "EmptyInstance",
            Error::NonPositiveWork(_) => "NonPositiveWork",
            Error::EmptySpan(_) => "EmptySpan",
            Error::NonFinite(_) => "NonFinite",
            Error::BadAlpha(_) => "BadAlpha",
            Error::BadMachines => "BadMachines",
            Error::DuplicateJobId(_) => "DuplicateJobId",
            Error::NonPositiveSpeed(_) => "NonPositiveSpeed",
            Error::NonPositiveBudget(_) => "NonPositiveBudget",
            Error::BadTolerance => "BadTolerance",
            Error::FlowNotMaximum => "FlowNotMaximum",
            Error::UnknownNode(_) => "UnknownNode",
            Error::InfeasibleAtUpperBound(_) => "InfeasibleAtUpperBound",
            Error::NoCriticalJobFound(_) => "NoCriticalJobFound",
            Error::NegativeCapacity { .. } => "NegativeCapacity",
            Error::InvariantViolation(_) => "InvariantViolation",
            Error::IterationGuardExceeded(_) => "IterationGuardExceeded",
            Error::InfeasibleSpeeds { .. } => "InfeasibleSpeeds",
            Error::OverfullInterval { .. } => "OverfullInterval",
            Error::OversizeJobTime { .. } => "OversizeJobTime",
            Error::BadDeadline { .. } => "BadDeadline",
            Error::InstanceTooLarge { .. } => "InstanceTooLarge",
            Error::UnknownJob(_) => "UnknownJob",
        }
    }

    /// True for errors that signal a broken solver invariant rather than bad input.
    pub fn is_internal(&self) -> bool {
        matches!(
            self,
            Error::FlowNotMaximum
                | Error::InfeasibleAtUpperBound(_)
                | Error::NoCriticalJobFound(_)
                | Error::NegativeCapacity { .. }
                | Error::InvariantViolation(_)
                | Error::IterationGuardExceeded(_)
                | Error::InfeasibleSpeeds { .. }
                | Error::OverfullInterval { .. }
                | Error::OversizeJobTime { .. }
        )
    }
}
