use thiserror::Error;

/// Errors raised by the solvers, mechanisms and audits.
#[derive(Debug, Clone, PartialEq, Error)]
pub enum Error {
    #[error("field `{field}` of job {id} must be strictly positive")]
    NonPositiveField { field: &'static str, id: u32 },

    #[error("field `{field}` of job {id} must be finite")]
    NonFiniteField { field: &'static str, id: u32 },

    #[error("instance has no jobs")]
    EmptyInstance,

    #[error("alpha must be a finite value greater than 1, got {0}")]
    BadAlpha(f64),

    #[error("job id {0} appears more than once")]
    DuplicateId(u32),

    #[error("unknown user id {0}")]
    UnknownUser(u32),

    #[error("announcement for user {id} must declare a positive finite value, got {value}")]
    BadAnnouncement { id: u32, value: f64 },

    #[error("profile delivers {profile} units of work but the jobs need {jobs}")]
    WorkMismatch { profile: f64, jobs: f64 },

    #[error("invalid speed profile: {0}")]
    InvalidProfile(String),

    #[error("invalid job order: {0}")]
    InvalidOrder(String),

    #[error("deadlines must be sorted ascending")]
    UnsortedDeadlines,

    #[error("first deadline must be positive; a zero-length interval cannot start the schedule")]
    ZeroInterval,

    #[error("{n} jobs exceed the enumeration limit of {max}")]
    TooLarge { n: usize, max: usize },

    #[error("announced penalty of job at position {index} must be strictly positive")]
    NonPositivePenalty { index: usize },

    #[error("cost shares cannot be normalised by zero energy")]
    ZeroEnergy,

    #[error("finite-difference step {h} must be below a tenth of the true value {value}")]
    StepTooLarge { h: f64, value: f64 },

    #[error("mechanism {mechanism} does not apply to type {user_type} users")]
    MechanismMismatch {
        mechanism: &'static str,
        user_type: &'static str,
    },

    #[error("cost-share formulas disagree for rank {rank}: {direct} vs {equivalent}")]
    DualFormMismatch {
        rank: usize,
        direct: f64,
        equivalent: f64,
    },
}

pub type Result<T> = std::result::Result<T, Error>;
