//! Kernel truncated randomized ridge regression.
//!
//! KTR³ fits a sequence of kernel ridge regressors on growing prefixes of a
//! randomly permuted training set, picks one prefix uniformly at random, and
//! truncates its predictions to the known label range. This crate implements
//! the full pipeline at desk scale:
//!
//! - [`kernels`] — the Gaussian kernel and the periodic spline family `Λ_q`,
//!   with closed forms, Fourier-series evaluation, and exact population
//!   eigenvalues under the uniform measure on `[0, 1]`.
//! - [`solver`] — an incremental (bordered) Cholesky factorization of
//!   `K_t + λnI` that yields the per-step leverage increments `d_t`, dual
//!   coefficients for every prefix, log-determinant ratios, and the `λ = 0`
//!   minimum-norm solution.
//! - [`algorithm`] — the randomized regression procedure itself: truncation,
//!   the seeded permutation/prefix draw, the one-pass online recursion, and
//!   the plain KRR baseline.
//! - [`datagen`] — seeded synthetic spline benchmarks with known target
//!   functions and Bayes risk.
//! - [`evaluation`] — excess-risk estimators, the uniform-prefix risk
//!   average, log-log rate fits, and closed-form regularization schedules.
//! - [`checks`] — executable verification of the exact identities and
//!   inequalities the solver and algorithm are built on.
//!
//! Everything randomized is driven by explicit `u64` seeds through a fixed,
//! portable generator, so every experiment is reproducible bit for bit.

pub mod algorithm;
pub mod checks;
pub mod datagen;
pub mod evaluation;
pub mod kernels;
pub mod seed;
pub mod solver;

// Compiles every snippet in the guide under `cargo test --doc`, keeping
// book and library in lockstep. Hidden from ordinary builds and docs.
#[cfg(doctest)]
#[doc(hidden)]
pub mod book;

use thiserror::Error;

/// Errors surfaced by the library.
#[derive(Debug, Error)]
pub enum Error {
    #[error("spline order must exceed 1, got q = {0}")]
    SplineOrder(f64),
    #[error("gaussian bandwidth must be positive, got {0}")]
    Bandwidth(f64),
    #[error("series tolerance must be positive, got {0}")]
    SeriesTolerance(f64),
    #[error("cosine series for q = {q} at u = {u} did not converge within the term budget; increase series_tol")]
    SeriesBudget { q: f64, u: f64 },
    #[error("gram matrix requires at least one point")]
    EmptyPoints,
    #[error("population eigenvalues are only available for spline kernels")]
    NoEigenvalueFormula,
    #[error("extension at step {step} would make the shifted gram matrix numerically singular (pivot {pivot:.3e})")]
    SingularExtension { step: usize, pivot: f64 },
    #[error("leverage increment {d:.3e} at step {step} is below the consistency window")]
    InconsistentLeverage { step: usize, d: f64 },
    #[error("solver state is empty")]
    EmptySolver,
    #[error("prefix {t} exceeds solver size {len}")]
    PrefixOutOfRange { t: usize, len: usize },
    #[error("lambda must be positive, got {0}")]
    NonPositiveLambda(f64),
    #[error("lambda must be nonnegative, got {0}")]
    NegativeLambda(f64),
    #[error("truncation level must be nonnegative, got {0}")]
    NegativeCap(f64),
    #[error("tail fraction must lie in (0, 1], got {0}")]
    TailFraction(f64),
    #[error("dataset must be nonempty")]
    EmptyDataset,
    #[error("invalid problem specification: {0}")]
    InvalidProblem(String),
    #[error("test set has neither ground-truth values nor a known bayes risk")]
    MissingGroundTruth,
    #[error("prefix grid is empty or out of range")]
    BadPrefixGrid,
    #[error("rate fit needs at least 3 points, got {0}")]
    TooFewRatePoints(usize),
    #[error("rate fit requires positive excess risks, got {0}")]
    NonPositiveExcess(f64),
    #[error("lambda schedule for {regime}: {reason}")]
    Schedule { regime: &'static str, reason: String },
    #[error("lambda grid must be nonempty")]
    EmptyLambdaGrid,
    #[error("repetitions must be at least 1")]
    NoRepetitions,
    #[error("check input out of domain: {0}")]
    CheckDomain(String),
    #[error("mismatched sizes: {0}")]
    SizeMismatch(String),
    #[error(transparent)]
    Io(#[from] std::io::Error),
    #[error("malformed dataset file: {0}")]
    Parse(String),
}

pub type Result<T> = std::result::Result<T, Error>;
