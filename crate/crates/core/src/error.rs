use thiserror::Error;

/// Errors shared across the crate.
#[derive(Debug, Error)]
pub enum Error {
    /// A matrix failed the admissibility test `F = R + d (x) e_n`.
    #[error("matrix is not in the admissible set (first {0} column(s) not orthonormal within tolerance)")]
    NotInAdmissibleSet(usize),

    /// A matrix failed rotation validation.
    #[error("matrix is not a rotation: {0}")]
    NotARotation(String),

    /// Dimension outside the supported range or mismatched between operands.
    #[error("unsupported or mismatched dimension: {0}")]
    Dimension(String),

    /// Generic invalid-argument error with context.
    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    /// A cuboid domain with non-positive extent in some axis.
    #[error("degenerate domain: {0}")]
    DegenerateDomain(String),

    /// A field/profile violated one of its construction invariants.
    #[error("construction invariant violated: {0}")]
    InvariantViolation(String),

    /// Operation requires a layer configuration the field does not carry.
    #[error("deformation field carries no layer configuration")]
    MissingLayerConfig,

    /// Shift exceeds the interval the operation is defined on.
    #[error("shift {xi} too large for interval of length {len}")]
    ShiftTooLarge { xi: f64, len: f64 },

    /// Scaling fit asked for with invalid samples.
    #[error("invalid scaling samples: {0}")]
    InvalidSamples(String),

    /// Operation requires a convex energy density.
    #[error("operation requires a convex energy density (use cell_minimize for non-convex ones)")]
    RequiresConvexDensity,

    /// Iterative solver failed to reach its tolerance.
    #[error("numerical non-convergence: {0}")]
    NonConvergence(String),

    /// Configuration file error with field/line diagnostics.
    #[error("config error at line {line}, field `{field}`: {msg}")]
    Config {
        line: usize,
        field: String,
        msg: String,
    },

    #[error("i/o error: {0}")]
    Io(#[from] std::io::Error),
}

pub type Result<T> = std::result::Result<T, Error>;
