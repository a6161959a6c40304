use thiserror::Error;

/// Errors raised by mesh construction, discretization, solves and studies.
#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid mesh subdivision count M = {0} (must be at least 1)")]
    ZeroSubdivision(usize),

    #[error("mesh with M = {m} and p = {p} has too many degrees of freedom for the index type")]
    DofOverflow { m: usize, p: usize },

    #[error("face {0:?} does not lie on the boundary of the unit cube")]
    NotBoundaryFace([usize; 3]),

    #[error("unsupported polynomial order p = {0} (supported: 1, 2, 3)")]
    UnsupportedOrder(usize),

    #[error("quadrature degree {requested} exceeds the supported maximum {max}")]
    QuadratureDegree { requested: usize, max: usize },

    #[error("singular element map for tetrahedron {0}")]
    SingularElementMap(usize),

    #[error("degree-of-freedom functional Gram matrix is singular for orientation class {0}")]
    SingularGram(usize),

    #[error("inconsistent degree-of-freedom map: {0}")]
    InconsistentDofMap(String),

    #[error("dimension mismatch: expected {expected}, got {got}")]
    DimensionMismatch { expected: usize, got: usize },

    #[error("matrix is singular (pivot {pivot})")]
    SingularMatrix { pivot: usize },

    #[error("GMRES did not converge: final relative residual {final_residual:e} after {iterations} iterations")]
    NotConverged {
        iterations: usize,
        final_residual: f64,
        history: Vec<f64>,
    },

    #[error("sparse factorization failed: {0}")]
    Factorization(String),

    #[error("zero denominator in {0}")]
    ZeroDenominator(&'static str),

    #[error("mesh for target N_lambda would need M = {needed}, above the cap {cap}")]
    MeshCap { needed: usize, cap: usize },

    #[error("invalid study configuration: {0}")]
    InvalidConfig(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Csv(#[from] csv::Error),
}

pub type Result<T, E = Error> = std::result::Result<T, E>;
