//! Executable verification of the identities and bounds the solver and
//! algorithm rely on.
//!
//! Each check compares an independently computed left and right side and
//! reports a machine-readable verdict. Equalities are judged relative
//! (`|lhs - rhs| ≤ tol · max(1, |rhs|)`), inequalities with additive slack
//! (`lhs ≤ rhs + tol`). Two routes are kept strictly separate everywhere:
//! the incremental factorization produces the left sides, while right
//! sides come from dense solves or eigendecompositions, so a bug in one
//! path cannot cancel in both.
//!
//! The five checks:
//!
//! - [`online_objective_identity`]: the discounted online loss average
//!   `(1/n) Σ ℓ_t / (1 + d_t/(λn))` equals the optimal regularized
//!   objective value `λ yᵀ(K + λnI)⁻¹ y`. Exact for every dataset.
//! - [`sum_dt_bound`]: `Σ d_t/(d_t + λn)` is dominated by the
//!   log-determinant ratio `ln det(λI + K/n) - ln det(λI)`. Exact per
//!   realization, no slack beyond float noise.
//! - [`scalar_log_bound`]: `ln(1+x) ≤ min(1/b, ln^{1-b}(1+M)) x^b` on
//!   `0 ≤ x ≤ M`, `b ∈ [0,1]`.
//! - [`logdet_expectation_bound`]: the expected log-determinant ratio is
//!   at most `min(ln^{1-b'}(1+1/λ), 1/b') Tr[L_K^{b'}] / λ^{b'}`; verified
//!   as a Monte Carlo test with three-standard-error slack since only the
//!   expectation, not each draw, is bounded.
//! - [`truncation_dominance`]: clamping predictions toward labels inside
//!   the cap never increases the squared loss.

use nalgebra::DVector;
use rand::Rng;
use serde::Serialize;

use crate::algorithm::{online_pass, truncate, OnlineTrace};
use crate::datagen::{Dataset, ProblemSpec};
use crate::evaluation::trace_power;
use crate::kernels::KernelSpec;
use crate::seed::{derive_seed, rng_from};
use crate::solver::log_det_ratio;
use crate::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum Relation {
    Equal,
    Leq,
}

/// One verified comparison, serializable as a JSON line.
#[derive(Debug, Clone, Serialize)]
pub struct CheckReport {
    pub name: String,
    pub lhs: f64,
    pub rhs: f64,
    pub relation: Relation,
    pub tolerance: f64,
    pub passed: bool,
    pub seed: u64,
}

impl CheckReport {
    /// Builds a report, judging `lhs` against `rhs` under the relation's
    /// tolerance rule.
    pub fn evaluate(
        name: &str,
        lhs: f64,
        rhs: f64,
        relation: Relation,
        tolerance: f64,
        seed: u64,
    ) -> Self {
        let passed = match relation {
            Relation::Equal => (lhs - rhs).abs() <= tolerance * rhs.abs().max(1.0),
            Relation::Leq => lhs <= rhs + tolerance,
        };
        CheckReport {
            name: name.to_string(),
            lhs,
            rhs,
            relation,
            tolerance,
            passed,
            seed,
        }
    }

    pub fn to_json_line(&self) -> String {
        serde_json::to_string(self).expect("report serialization cannot fail")
    }
}

/// Optimal value of the regularized least-squares objective,
/// `min_f λ‖f‖² + (1/n)Σ(f(xᵢ) - yᵢ)² = λ yᵀ(K + λnI)⁻¹ y`, by a dense
/// LU solve independent of the incremental factorization.
pub fn ridge_objective_value(dataset: &Dataset, kernel: KernelSpec, lambda: f64) -> Result<f64> {
    if !(lambda > 0.0) {
        return Err(Error::NonPositiveLambda(lambda));
    }
    let n = dataset.len();
    let mut a = kernel.gram(&dataset.inputs)?;
    for i in 0..n {
        a[(i, i)] += lambda * n as f64;
    }
    let y = DVector::from_column_slice(&dataset.labels);
    let sol = a
        .lu()
        .solve(&y)
        .ok_or_else(|| Error::SizeMismatch("shifted gram did not invert".into()))?;
    Ok(lambda * y.dot(&sol))
}

const IDENTITY_TOL: f64 = 1e-8;
const SUM_DT_TOL: f64 = 1e-10;
const SCALAR_TOL: f64 = 1e-12;

/// Checks that the discounted online loss average equals the optimal
/// regularized objective value. `seed` drives the pass permutation; the
/// right side does not depend on it.
pub fn online_objective_identity(
    dataset: &Dataset,
    kernel: KernelSpec,
    lambda: f64,
    seed: u64,
) -> Result<CheckReport> {
    let trace = online_pass(dataset, kernel, lambda, None, seed)?;
    let lhs = trace.weighted_loss_average();
    let rhs = ridge_objective_value(dataset, kernel, lambda)?;
    Ok(CheckReport::evaluate(
        "online_objective_identity",
        lhs,
        rhs,
        Relation::Equal,
        IDENTITY_TOL,
        seed,
    ))
}

/// Checks `Σ d_t/(d_t + λn) ≤ ln det(λI + K/n) - ln det(λI)` on one
/// realized pass. The gram matrix must cover the same points the trace
/// consumed (any order; the right side is permutation invariant).
pub fn sum_dt_bound(
    trace: &OnlineTrace,
    gram: &nalgebra::DMatrix<f64>,
    lambda: f64,
    n: usize,
) -> Result<CheckReport> {
    if gram.nrows() != trace.len() || n != trace.n {
        return Err(Error::SizeMismatch(format!(
            "trace has n = {}, gram is {}x{}, n = {n}",
            trace.n,
            gram.nrows(),
            gram.ncols()
        )));
    }
    if lambda != trace.lambda {
        return Err(Error::CheckDomain(format!(
            "trace ran at lambda = {}, check asked for {lambda}",
            trace.lambda
        )));
    }
    let shift = lambda * n as f64;
    let lhs: f64 = trace.d.iter().map(|&d| d / (d + shift)).sum();
    let rhs = log_det_ratio(gram, lambda, n)?.logdet_ratio;
    Ok(CheckReport::evaluate(
        "sum_dt_bound",
        lhs,
        rhs,
        Relation::Leq,
        SUM_DT_TOL,
        trace.seed,
    ))
}

/// Checks the scalar inequality `ln(1+x) ≤ min(1/b, ln^{1-b}(1+M)) · x^b`
/// for `0 ≤ x ≤ M` and `b ∈ [0, 1]` (with `1/0 = ∞`).
pub fn scalar_log_bound(x: f64, m: f64, b: f64) -> Result<CheckReport> {
    if !(x >= 0.0 && m >= x && (0.0..=1.0).contains(&b)) {
        return Err(Error::CheckDomain(format!(
            "need 0 <= x <= M and b in [0,1]; got x={x}, M={m}, b={b}"
        )));
    }
    let lhs = x.ln_1p();
    let envelope = if b == 0.0 {
        (1.0 + m).ln()
    } else {
        (1.0 / b).min((1.0 + m).ln().powf(1.0 - b))
    };
    let rhs = envelope * x.powf(b);
    Ok(CheckReport::evaluate(
        "scalar_log_bound",
        lhs,
        rhs,
        Relation::Leq,
        SCALAR_TOL,
        0,
    ))
}

/// Monte Carlo check of the expected log-determinant ratio against the
/// capacity bound `min(ln^{1-b'}(1+1/λ), 1/b') · Tr[L_K^{b'}] / λ^{b'}`.
///
/// Fresh input sets are drawn per repetition from the problem's input
/// distribution; labels are irrelevant. The trace exponent defaults to
/// `b' = 1.1/q`, just inside the convergence region of the trace series.
pub fn logdet_expectation_bound(
    problem: &ProblemSpec,
    lambda: f64,
    n: usize,
    reps: usize,
    b_exponent: Option<f64>,
) -> Result<CheckReport> {
    if !(lambda > 0.0) {
        return Err(Error::NonPositiveLambda(lambda));
    }
    if n == 0 || reps < 2 {
        return Err(Error::CheckDomain(
            "need n >= 1 and at least 2 repetitions".into(),
        ));
    }
    let q = problem.kernel_order();
    let kernel = KernelSpec::spline(q)?;
    let b = b_exponent.unwrap_or(1.1 / q);
    let trace_b = trace_power(q, b)?;

    let mut values = Vec::with_capacity(reps);
    for r in 0..reps {
        let mut rng = rng_from(derive_seed(problem.seed, &[0x10de7, r as u64]));
        let inputs: Vec<f64> = (0..n).map(|_| rng.random::<f64>()).collect();
        let gram = kernel.gram(&inputs)?;
        values.push(log_det_ratio(&gram, lambda, n)?.logdet_ratio);
    }
    let mean = values.iter().sum::<f64>() / reps as f64;
    let var = values.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / (reps as f64 - 1.0);
    let std_error = (var / reps as f64).sqrt();

    let envelope = (1.0 / b).min((1.0 + 1.0 / lambda).ln().powf(1.0 - b));
    let rhs = envelope * trace_b / lambda.powf(b);
    Ok(CheckReport::evaluate(
        "logdet_expectation_bound",
        mean,
        rhs,
        Relation::Leq,
        3.0 * std_error,
        problem.seed,
    ))
}

/// Checks that truncation toward the label range never increases squared
/// loss: mean over triples of `(T(z) - y)²` against mean of `(z - y)²`.
/// Every label must satisfy `|y| ≤ y_cap`, the inequality's precondition.
pub fn truncation_dominance(samples: &[(f64, f64, f64)]) -> Result<CheckReport> {
    if samples.is_empty() {
        return Err(Error::CheckDomain("no samples".into()));
    }
    for &(_, y, cap) in samples {
        if !(cap >= 0.0) || y.abs() > cap {
            return Err(Error::CheckDomain(format!(
                "label {y} outside cap {cap}"
            )));
        }
    }
    let m = samples.len() as f64;
    let lhs = samples
        .iter()
        .map(|&(z, y, cap)| (truncate(z, cap) - y).powi(2))
        .sum::<f64>()
        / m;
    let rhs = samples.iter().map(|&(z, y, _)| (z - y).powi(2)).sum::<f64>() / m;
    Ok(CheckReport::evaluate(
        "truncation_dominance",
        lhs,
        rhs,
        Relation::Leq,
        0.0,
        0,
    ))
}

/// Runs the whole suite over randomized instances: `instances` datasets of
/// size up to `max_n` for the two per-realization checks, a deterministic
/// grid for the scalar bound, the Monte Carlo expectation check at three
/// regularization levels, and a large random sweep of truncation triples.
pub fn standard_suite(seed: u64, max_n: usize, instances: usize) -> Result<Vec<CheckReport>> {
    let mut reports = Vec::new();
    let mut rng = rng_from(derive_seed(seed, &[0x5017e]));

    for i in 0..instances {
        let n = 1 + rng.random_range(0..max_n);
        let inputs: Vec<f64> = (0..n).map(|_| rng.random::<f64>()).collect();
        let labels: Vec<f64> = (0..n).map(|_| 4.0 * rng.random::<f64>() - 2.0).collect();
        let dataset = Dataset::from_samples(inputs, labels)?;
        // Alternate kernel families; the identities hold for any of them.
        let kernel = match i % 3 {
            0 => KernelSpec::spline(2.0)?,
            1 => KernelSpec::spline(4.0)?,
            _ => KernelSpec::gaussian(0.2 + 1.8 * rng.random::<f64>())?,
        };
        // Log-uniform λ in [1e-3, 1].
        let lambda = 10f64.powf(-3.0 * rng.random::<f64>());
        let pass_seed = derive_seed(seed, &[0x9a55, i as u64]);

        reports.push(online_objective_identity(&dataset, kernel, lambda, pass_seed)?);

        let trace = online_pass(&dataset, kernel, lambda, None, pass_seed)?;
        let permuted: Vec<f64> = trace
            .permutation
            .iter()
            .map(|&j| dataset.inputs[j])
            .collect();
        let gram = kernel.gram(&permuted)?;
        reports.push(sum_dt_bound(&trace, &gram, lambda, dataset.len())?);
    }

    for m in [1.0, 10.0, 100.0] {
        for bi in 0..=10 {
            let b = bi as f64 / 10.0;
            // Report the grid point with the thinnest margin.
            let mut worst: Option<CheckReport> = None;
            for xi in 0..=20 {
                let x = m * xi as f64 / 20.0;
                let report = scalar_log_bound(x, m, b)?;
                let margin = report.rhs - report.lhs;
                if worst.as_ref().map_or(true, |w| margin < w.rhs - w.lhs) {
                    worst = Some(report);
                }
            }
            reports.push(worst.unwrap());
        }
    }

    let problem = ProblemSpec {
        b: 0.5,
        beta: 0.5,
        epsilon: 0.0,
        n_train: 100,
        n_test: 1,
        seed: derive_seed(seed, &[0x4e7]),
    };
    for lambda in [1e-3, 1e-2, 1e-1] {
        reports.push(logdet_expectation_bound(&problem, lambda, 100, 50, Some(0.6))?);
    }

    let triples: Vec<(f64, f64, f64)> = (0..10_000)
        .map(|_| {
            let cap = 3.0 * rng.random::<f64>();
            let y = cap * (2.0 * rng.random::<f64>() - 1.0);
            let z = 20.0 * rng.random::<f64>() - 10.0;
            (z, y, cap)
        })
        .collect();
    reports.push(truncation_dominance(&triples)?);

    Ok(reports)
}
