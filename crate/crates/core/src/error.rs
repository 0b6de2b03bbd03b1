use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("degenerate configuration: {0}")]
    DegenerateConfiguration(String),

    #[error("basepoint {re}+{im}i coincides with a pole")]
    InvalidBasepoint { re: f64, im: f64 },

    #[error("connection evaluated within {distance:e} of pole {pole}")]
    PoleEvaluation { pole: usize, distance: f64 },

    #[error("path passes within {distance:e} of pole {pole} (minimum {minimum:e})")]
    PoleProximity {
        pole: usize,
        distance: f64,
        minimum: f64,
    },

    #[error(
        "step size underflow at arc length {position} of {length}: h = {step:e} after {steps} steps ({rejected} rejected)"
    )]
    Stiffness {
        position: f64,
        length: f64,
        step: f64,
        steps: usize,
        rejected: usize,
    },

    #[error("step rejection cap of {cap} exceeded")]
    RejectionCap { cap: usize },

    #[error("poles {first} and {second} collide (distance {distance:e} < margin {margin:e})")]
    Collision {
        first: usize,
        second: usize,
        distance: f64,
        margin: f64,
    },

    #[error("loop {index}: {source}")]
    Loop {
        index: usize,
        #[source]
        source: Box<Error>,
    },

    #[error("degenerate lattice: |det| = {det:e}")]
    DegenerateLattice { det: f64 },

    #[error("first integral f{index} is indeterminate: |t{index}| = {modulus:e}")]
    IndeterminateIntegral { index: usize, modulus: f64 },

    #[error("slope is at infinity; the finite chart is required")]
    SlopeAtInfinity,

    #[error("jacobian contains non-finite entries")]
    InvalidJacobian,

    #[error("perturbed point leaves the admissible domain along coordinate {coordinate} ({name})")]
    Boundary { coordinate: usize, name: String },

    #[error("evaluation failed at tau = {tau:?}: {source}")]
    Evaluation {
        tau: Vec<f64>,
        #[source]
        source: Box<Error>,
    },

    #[error("kernel dimension changed from {expected} to {found} at a probe point")]
    RankInstability { expected: usize, found: usize },

    #[error("kernel is zero-dimensional")]
    EmptyKernel,

    #[error("rank scan failed at {failed} of {total} points")]
    Scan { failed: usize, total: usize },

    #[error("sampling rejected {rejected} of {drawn} draws")]
    Sampling { rejected: usize, drawn: usize },

    #[error("incompatible tuples: {0}")]
    IncompatibleTuples(String),

    #[error("invalid argument: {0}")]
    InvalidArgument(String),
}

impl Error {
    pub(crate) fn at_tau(self, tau: &[f64]) -> Self {
        Error::Evaluation {
            tau: tau.to_vec(),
            source: Box::new(self),
        }
    }
}
