use thiserror::Error;

use crate::dependency::DependencyFinding;
use crate::sim::Trajectory;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("coincident points: a ray of zero length is not defined")]
    CoincidentPoints,
    #[error("invalid angularity: {}", format_issues(.0))]
    Invalid(Vec<crate::angularity::ValidationIssue>),
    #[error("mismatched structure: {0}")]
    MismatchedStructure(String),
    #[error("numerical failure: {0}")]
    NumericalFailure(String),
    #[error("subset search skipped: {m} constraints exceed the enumeration cap of {cap}")]
    SubsetSearchBudgetExceeded {
        m: usize,
        cap: usize,
        partial: Vec<DependencyFinding>,
    },

    #[error("degenerate chord: arc endpoints coincide")]
    DegenerateChord,
    #[error("angle {0} rad is outside the admissible range")]
    InvalidAngle(f64),
    #[error("rays are aligned (parallel) and do not determine a point")]
    AlignedRays,
    #[error("constraint loci coincide")]
    CoincidentLoci,
    #[error("no intersection between the constraint loci")]
    NoIntersection,
    #[error("vertex-addition case violation: {0}")]
    CaseViolation(String),
    #[error("branch rule cannot discriminate between candidate placements")]
    AmbiguousBranch,
    #[error("seed triangle mismatch: {0}")]
    SeedMismatch(String),
    #[error("step {index}: {source}")]
    Step {
        index: usize,
        #[source]
        source: Box<Error>,
    },

    #[error("agent {agent}: collinear configuration (sin of controlled angle below threshold)")]
    CollinearConfiguration { agent: usize },
    #[error("agents {a} and {b} coincide")]
    CoincidentAgents { a: usize, b: usize },
    #[error("degenerate formation spec: {0}")]
    DegenerateSpec(String),
    #[error("linearization is not Hurwitz (trace {trace}, det {determinant})")]
    NotHurwitz { trace: f64, determinant: f64 },

    #[error("insufficient data for rate fit: {usable} usable samples")]
    InsufficientData { usable: usize },
    #[error("simulation halted by event at t = {}", .0.times.last().copied().unwrap_or(0.0))]
    EventHalt(Box<Trajectory>),
    #[error("numerical blow-up at t = {t}")]
    NumericalBlowup { t: f64 },
    #[error("invalid configuration: {0}")]
    InvalidConfig(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),
    #[error("parse error: {0}")]
    Json(#[from] serde_json::Error),
    #[error(transparent)]
    Csv(#[from] csv::Error),
}

impl Error {
    pub(crate) fn at_step(self, index: usize) -> Error {
        Error::Step {
            index,
            source: Box::new(self),
        }
    }
}

fn format_issues(issues: &[crate::angularity::ValidationIssue]) -> String {
    issues
        .iter()
        .map(|i| i.to_string())
        .collect::<Vec<_>>()
        .join("; ")
}
