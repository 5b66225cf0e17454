use thiserror::Error;

/// Errors raised by the analytical, numerical and simulation layers.
#[derive(Debug, Clone, PartialEq, Error)]
pub enum Error {
    #[error("rate vectors differ in length: {a} left rates vs {b} right rates")]
    LengthMismatch { a: usize, b: usize },

    #[error("at least two particles are required, got {0}")]
    TooFewParticles(usize),

    #[error("left rate a_{label} = {value} must be finite and non-negative")]
    InvalidLeftRate { label: usize, value: f64 },

    #[error("right rate b_{label} = {value} must be finite and positive")]
    InvalidRightRate { label: usize, value: f64 },

    #[error("rate ratios over particles {first}..={last} span exp({log_span:.1}); products would leave double range")]
    RatioRange { first: usize, last: usize, log_span: f64 },

    #[error("operation needs every right rate positive; this system only satisfies the mirrored assumption")]
    MirroredAssumption,

    #[error("interval [{first}; {len}] is not contained in 1..={particles}")]
    IntervalOutOfBounds { first: usize, len: usize, particles: usize },

    #[error("interval [{first}; {len}] has no interior gaps")]
    IntervalTooShort { first: usize, len: usize },

    #[error("gap {gap} is not an interior gap of [{first}; {len}]")]
    NotInterior { gap: usize, first: usize, len: usize },

    #[error("dimension mismatch: expected {expected}, got {got}")]
    DimensionMismatch { expected: usize, got: usize },

    #[error("load {rho} at position {index} is not below one")]
    LoadNotBelowOne { index: usize, rho: f64 },

    #[error("invalid ordered partition: {0}")]
    InvalidPartition(String),

    #[error("boundary gap {gap} has load {rho} < 1; partition is not the cloud partition")]
    BoundaryLoadBelowOne { gap: usize, rho: f64 },

    #[error("particle speeds decrease between particles {label} and {}", label + 1)]
    NonMonotoneSpeeds { label: usize },

    #[error("tridiagonal system is singular at row {row}")]
    SingularSystem { row: usize },

    #[error("fixed-point iteration did not converge in {iterations} iterations (last change {residual:e})")]
    NoConvergence { iterations: usize, residual: f64 },

    #[error("solver tolerance must be positive and finite, got {0}")]
    InvalidTolerance(f64),

    #[error("system is not a single stable cloud")]
    NotSingleCloud,

    #[error("closed-form two-particle constants need exactly two particles, got {0}")]
    NotTwoParticles(usize),

    #[error("two-particle system is not stable: a1 + b2 = {arrival} >= a2 + b1 = {service}")]
    UnstablePair { arrival: f64, service: f64 },

    #[error("need at least {needed} excursions, got {got}")]
    InsufficientExcursions { needed: usize, got: usize },

    #[error("invalid simulation config: {0}")]
    InvalidSimConfig(String),

    #[error("gap {gap} is out of range 1..={gaps}")]
    GapOutOfRange { gap: usize, gaps: usize },

    #[error("no post-burn-in time was accumulated")]
    EmptyWindow,

    #[error("joint occupation is only tracked for at most {max} gaps")]
    JointUnavailable { max: usize },

    #[error("truncated chain has {states} states, over the budget of {budget}")]
    StateBudget { states: usize, budget: usize },

    #[error("truncated chain solve failed: {0}")]
    ChainSolve(String),
}

pub type Result<T, E = Error> = std::result::Result<T, E>;
