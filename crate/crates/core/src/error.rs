use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("configuration error: {0}")]
    Config(String),

    #[error("inverted cell ({i}, {j}) with area {area:e}")]
    InvertedCell { i: usize, j: usize, area: f64 },

    #[error("Courant number {courant} exceeds the {n}-cell periodic domain at face {face}")]
    CourantExceedsDomain { face: usize, courant: f64, n: usize },

    #[error("scheme diverged at step {step}")]
    Diverged { step: usize },

    #[error("matrix row {row} is not diagonally dominant")]
    NotDiagonallyDominant { row: usize },

    #[error("zero modified diagonal in DILU preconditioner at row {row}")]
    SingularPreconditioner { row: usize },

    #[error("linear solver did not converge after {iterations} iterations (residual {residual:e})")]
    SolverNotConverged { iterations: usize, residual: f64 },

    #[error("bi-CG breakdown after {iterations} iterations (residual {residual:e})")]
    SolverBreakdown { iterations: usize, residual: f64 },

    #[error("least-squares fit has too few cells ({cells}) at face {face}")]
    DegenerateStencil { face: usize, cells: usize },

    #[error("no analytic solution for {case} at t = {time}")]
    NoAnalyticSolution { case: String, time: f64 },

    #[error("reference field has zero norm")]
    ZeroReference,

    #[error("need at least two distinct resolutions for a convergence slope")]
    TooFewPoints,

    #[error(transparent)]
    Io(#[from] std::io::Error),
}
