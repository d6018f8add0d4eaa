use thiserror::Error;

#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid domain: {0}")]
    Domain(String),
    #[error("parameter {name} = {value} out of range: {why}")]
    Range { name: &'static str, value: f64, why: &'static str },
    #[error("domain mismatch between {0} and {1}")]
    DomainMismatch(&'static str, &'static str),
    #[error("format error: {0}")]
    Format(String),
    #[error("truncated payload: expected {expected} bytes, found {found}")]
    Truncated { expected: usize, found: usize },
    #[error("label {label} exceeds chamber count {n}")]
    LabelOutOfRange { label: u8, n: usize },
    #[error("infeasible volumes: {0}")]
    Infeasible(String),
    #[error("requested balls overlap: {0}")]
    Overlap(String),
    #[error("same-cell interaction diverges (offset 0)")]
    ZeroOffset,
    #[error("lattice tail bound {bound:.3e} exceeds tolerance {tol:.3e} at cutoff {cutoff}")]
    TailBound { bound: f64, tol: f64, cutoff: usize },
    #[error("masks are not disjoint (cell {0})")]
    NotDisjoint(usize),
    #[error("free mode: chamber cell {0} lies on the outer layer")]
    OuterLayer(usize),
    #[error("soft constraint violated by {0:.3e}")]
    Constraint(f64),
    #[error("projection did not converge: residual {0:.3e}")]
    ProjectionStalled(f64),
    #[error("step size collapsed below 1e-14")]
    StepCollapse,
    #[error("volume error {error} cells in chamber {chamber} exceeds budget {budget}")]
    VolumeBudget { chamber: usize, error: i64, budget: i64 },
    #[error("repair deadlock: no admissible swap from chamber {from} to {to}")]
    Deadlock { from: usize, to: usize },
    #[error("search space {0:.3e} exceeds 1e7 labelings")]
    SearchSpace(f64),
    #[error("precondition violated: {0}")]
    Precondition(String),
    #[error("no admissible point: {0}")]
    NoAdmissiblePoint(String),
    #[error("no radius satisfies the truncation inequality:\n{0}")]
    NoRadius(String),
    #[error("point is not on the cluster boundary")]
    NotOnBoundary,
    #[error("radius {radius} is below the grid resolution {min}")]
    BelowResolution { radius: f64, min: f64 },
    #[error("padding insufficient: {0}")]
    Padding(String),
    #[error("unsupported: {0}")]
    Unsupported(String),
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

pub type Result<T> = std::result::Result<T, Error>;
