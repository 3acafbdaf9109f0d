use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    #[error("invalid report: {0}")]
    InvalidReport(String),

    #[error("invalid trajectory: {0}")]
    InvalidTrajectory(String),

    #[error("invalid profile: {0}")]
    InvalidProfile(String),

    #[error("invalid configuration: {0}")]
    InvalidConfig(String),

    #[error("match key requires a payload but report has none")]
    MissingPayload,

    #[error("profile set is empty")]
    EmptyProfileSet,

    #[error("no users to evaluate")]
    EmptyUsers,

    #[error("point-of-interest list is empty")]
    EmptyPois,

    #[error("sanitization ladder is empty")]
    EmptyLadder,

    #[error("released report {0} has no provenance entry")]
    MissingProvenance(usize),

    #[error("relative error undefined: query value of the original is zero")]
    ZeroQuery,

    #[error("metrics have no requests")]
    NoRequests,

    #[error("no allocation satisfies the budget constraint (headroom > 0)")]
    InfeasibleBudget,

    #[error("i/o: {0}")]
    Io(String),

    #[error("reports belong to more than one user ({0} and {1})")]
    MixedUsers(String, String),
}

pub type Result<T> = std::result::Result<T, Error>;
