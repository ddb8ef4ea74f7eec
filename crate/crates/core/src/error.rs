use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("dimension mismatch: expected {expected}, got {got}")]
    DimensionMismatch { expected: usize, got: usize },

    #[error("structure constants violate the Jacobi identity: defect {defect:.3e} exceeds {tolerance:.3e}")]
    JacobiViolation { defect: f64, tolerance: f64 },

    #[error("computed radical of rank {rank} is not solvable (degenerate structure constants?)")]
    SolvabilityCheckFailed { rank: usize },

    #[error("algebra is not semisimple: radical has rank {radical_rank}")]
    NotSemisimple { radical_rank: usize },

    #[error("nilpotent orbit dimension {d} is odd; rank estimate unreliable, rerun with more trials")]
    OddOrbitDimension { d: usize },

    #[error("algebra is not unimodular: trace(ad of basis {index}) = {trace:.6e}")]
    NotUnimodular { index: usize, trace: f64 },

    #[error("algebra is not solvable")]
    NotSolvable,

    #[error("representation homomorphism residual {residual:.3e} exceeds {tolerance:.3e}")]
    HomomorphismResidual { residual: f64, tolerance: f64 },

    #[error("subspace is not invariant: leakage {leakage:.3e}")]
    NotInvariant { leakage: f64 },

    #[error("level {level}: commuting family is not simultaneously diagonalizable (residual {residual:.3e})")]
    NotSimultaneouslyDiagonalizable { level: usize, residual: f64 },

    #[error("level {level}: derived algebra acts nontrivially (norm {norm:.3e})")]
    DerivedActionNonzero { level: usize, norm: f64 },

    #[error("group element '{label}' has non-positive determinant {det:.6e}")]
    NonPositiveDeterminant { label: String, det: f64 },

    #[error("character value for '{label}' is not positive: {value:.6e}")]
    NonPositiveCharacter { label: String, value: f64 },

    #[error("inner product matrix is not positive definite (min eigenvalue {min_eigenvalue:.3e})")]
    InnerProductNotPD { min_eigenvalue: f64 },

    #[error("involution is not a Cartan involution: B_theta has min eigenvalue {min_eigenvalue:.3e}")]
    ThetaNotCartan { min_eigenvalue: f64 },

    #[error("group elements are not declared to lie in the connected group generated by the algebra")]
    FNotConnected,

    #[error("group element '{label}' is singular")]
    SingularGroupMatrix { label: String },

    #[error("epsilon {eps:.3e} outside (0, {max:.3e})")]
    EpsilonOutOfRange { eps: f64, max: f64 },

    #[error("exponential chart is not injective at this scale (log/exp residual {residual:.3e})")]
    ChartNotInjective { residual: f64 },

    #[error("unknown catalog entry '{0}'")]
    UnknownEntry(String),

    #[error("invalid neighbourhood: {0}")]
    InvalidNeighborhood(String),

    #[error("invalid input: {0}")]
    Invalid(String),

    #[error("{context}: {source}")]
    Context {
        context: String,
        #[source]
        source: Box<Error>,
    },

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error("JSON error at line {line}, column {column}: {message}")]
    Json {
        line: usize,
        column: usize,
        message: String,
    },
}

impl Error {
    pub fn context(self, context: impl Into<String>) -> Self {
        Error::Context {
            context: context.into(),
            source: Box::new(self),
        }
    }

    /// Innermost error, skipping context wrappers.
    pub fn root(&self) -> &Error {
        match self {
            Error::Context { source, .. } => source.root(),
            other => other,
        }
    }
}

impl From<serde_json::Error> for Error {
    fn from(e: serde_json::Error) -> Self {
        Error::Json {
            line: e.line(),
            column: e.column(),
            message: e.to_string(),
        }
    }
}
