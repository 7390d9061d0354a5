//! The randomized truncated regression procedure.
//!
//! Given `n` samples, a kernel, and `λ ≥ 0`, the procedure:
//!
//! 1. permutes the sample with a seeded shuffle;
//! 2. draws a prefix length `k` uniformly from `{0, …, n-1}` (or from the
//!    top `tail_fraction` of that range);
//! 3. fits ridge coefficients on the first `k` permuted points, solving
//!    `(K_k + λn I) α = y_{1:k}` — note the shift uses the full `n`, not
//!    `k`, because the empirical objective divides by `n` regardless of
//!    how many terms it has — or the minimum-norm interpolant when `λ = 0`;
//! 4. truncates every prediction to `[-Y, Y]` where `Y` bounds the labels.
//!
//! Averaged over the prefix draw, the randomized predictor's risk is
//! controlled by the one-pass online losses `(f_{t-1}(x_t) - y_t)²`, which
//! [`online_pass`] records together with the leverage increments `d_t`
//! needed by the regret identity. [`krr_fit`] is the deterministic
//! full-sample baseline.

use rand::seq::SliceRandom;
use rand::Rng;

use crate::datagen::Dataset;
use crate::kernels::KernelSpec;
use crate::seed::rng_from;
use crate::solver::{min_norm_solve, SolverState, DEFAULT_PINV_REL_TOL};
use crate::{Error, Result};

/// Clamps a prediction to `[-y_cap, y_cap]`.
///
/// # Panics
///
/// Panics if `y_cap < 0` (an empty interval).
pub fn truncate(z: f64, y_cap: f64) -> f64 {
    z.clamp(-y_cap, y_cap)
}

/// A fitted kernel regressor with truncated predictions.
#[derive(Debug, Clone, PartialEq)]
pub struct Predictor {
    support: Vec<f64>,
    alpha: Vec<f64>,
    kernel: KernelSpec,
    y_cap: f64,
    lambda: f64,
    prefix_len: usize,
}

impl Predictor {
    /// The zero predictor (an empty prefix).
    pub fn zero(kernel: KernelSpec, lambda: f64, y_cap: f64) -> Self {
        Predictor {
            support: Vec::new(),
            alpha: Vec::new(),
            kernel,
            y_cap,
            lambda,
            prefix_len: 0,
        }
    }

    fn from_parts(
        support: Vec<f64>,
        alpha: Vec<f64>,
        kernel: KernelSpec,
        lambda: f64,
        y_cap: f64,
    ) -> Self {
        let prefix_len = support.len();
        Predictor {
            support,
            alpha,
            kernel,
            y_cap,
            lambda,
            prefix_len,
        }
    }

    /// Truncated prediction at `x`.
    pub fn predict(&self, x: f64) -> f64 {
        truncate(self.predict_raw(x), self.y_cap)
    }

    /// The kernel expansion `Σᵢ αᵢ k(xᵢ, x)` without truncation.
    pub fn predict_raw(&self, x: f64) -> f64 {
        self.support
            .iter()
            .zip(&self.alpha)
            .map(|(&xi, &ai)| ai * self.kernel.eval(xi, x))
            .sum()
    }

    /// Number of training points the predictor was fitted on.
    pub fn prefix_len(&self) -> usize {
        self.prefix_len
    }

    pub fn lambda(&self) -> f64 {
        self.lambda
    }

    pub fn y_cap(&self) -> f64 {
        self.y_cap
    }

    /// Squared RKHS norm `αᵀ K α` of the (untruncated) expansion.
    pub fn rkhs_norm_sq(&self) -> f64 {
        let mut total = 0.0;
        for (i, (&xi, &ai)) in self.support.iter().zip(&self.alpha).enumerate() {
            for (j, (&xj, &aj)) in self.support.iter().zip(&self.alpha).enumerate() {
                if j > i {
                    break;
                }
                let term = ai * aj * self.kernel.eval(xi, xj);
                total += if i == j { term } else { 2.0 * term };
            }
        }
        total
    }
}

fn shuffled_indices(n: usize, rng: &mut impl Rng) -> Vec<usize> {
    let mut order: Vec<usize> = (0..n).collect();
    order.shuffle(rng);
    order
}

/// The pass order a seed induces on a sample of size `n`: exactly the
/// permutation [`run_ktr3`] and [`online_pass`] consume for that seed.
pub fn pass_order(n: usize, seed: u64) -> Vec<usize> {
    shuffled_indices(n, &mut rng_from(seed))
}

fn effective_cap(requested: Option<f64>, labels: &[f64]) -> Result<f64> {
    let cap = match requested {
        Some(c) => c,
        None => labels.iter().fold(0.0_f64, |m, &y| m.max(y.abs())),
    };
    if !(cap >= 0.0) {
        return Err(Error::NegativeCap(cap));
    }
    Ok(cap)
}

/// Fits ridge (or minimum-norm when `lambda == 0`) dual coefficients on the
/// first `k` entries of an already-ordered sample. The ridge shift is
/// `lambda * n` with `n` the full sample size.
pub fn fit_prefix(
    inputs: &[f64],
    labels: &[f64],
    kernel: KernelSpec,
    lambda: f64,
    y_cap: f64,
    k: usize,
) -> Result<Predictor> {
    let n = inputs.len();
    if labels.len() != n {
        return Err(Error::SizeMismatch(format!(
            "{} inputs vs {} labels",
            n,
            labels.len()
        )));
    }
    if k > n {
        return Err(Error::PrefixOutOfRange { t: k, len: n });
    }
    if !(lambda >= 0.0) {
        return Err(Error::NegativeLambda(lambda));
    }
    if !(y_cap >= 0.0) {
        return Err(Error::NegativeCap(y_cap));
    }
    if k == 0 {
        return Ok(Predictor::zero(kernel, lambda, y_cap));
    }

    let alpha = if lambda > 0.0 {
        let mut state = SolverState::new(kernel, lambda * n as f64)?;
        for i in 0..k {
            state.extend(inputs[i], labels[i])?;
        }
        state.dual_coefficients()?
    } else {
        let gram = kernel.gram(&inputs[..k])?;
        min_norm_solve(&gram, &labels[..k], DEFAULT_PINV_REL_TOL)?
    };
    Ok(Predictor::from_parts(
        inputs[..k].to_vec(),
        alpha,
        kernel,
        lambda,
        y_cap,
    ))
}

/// Runs the full randomized procedure on a training set.
///
/// `y_cap` defaults to the largest absolute training label. The seed fully
/// determines the output: the shuffle consumes the generator first, then
/// one draw selects the prefix length from `{⌊(1-tail_fraction)·n⌋, …, n-1}`.
pub fn run_ktr3(
    train: &Dataset,
    kernel: KernelSpec,
    lambda: f64,
    y_cap: Option<f64>,
    seed: u64,
    tail_fraction: f64,
) -> Result<Predictor> {
    if train.is_empty() {
        return Err(Error::EmptyDataset);
    }
    if !(tail_fraction > 0.0 && tail_fraction <= 1.0) {
        return Err(Error::TailFraction(tail_fraction));
    }
    let cap = effective_cap(y_cap, &train.labels)?;
    let n = train.len();

    let mut rng = rng_from(seed);
    let order = shuffled_indices(n, &mut rng);
    let lo = (((1.0 - tail_fraction) * n as f64).floor() as usize).min(n - 1);
    let k = rng.random_range(lo..n);

    let inputs: Vec<f64> = order.iter().map(|&i| train.inputs[i]).collect();
    let labels: Vec<f64> = order.iter().map(|&i| train.labels[i]).collect();
    fit_prefix(&inputs, &labels, kernel, lambda, cap, k)
}

/// Full-sample kernel ridge baseline, untruncated unless a cap is given.
pub fn krr_fit(
    train: &Dataset,
    kernel: KernelSpec,
    lambda: f64,
    y_cap: Option<f64>,
) -> Result<Predictor> {
    if train.is_empty() {
        return Err(Error::EmptyDataset);
    }
    let cap = match y_cap {
        Some(c) if c < 0.0 => return Err(Error::NegativeCap(c)),
        Some(c) => c,
        None => f64::INFINITY,
    };
    fit_prefix(
        &train.inputs,
        &train.labels,
        kernel,
        lambda,
        cap,
        train.len(),
    )
}

/// Record of one pass over a permuted sample.
#[derive(Debug, Clone)]
pub struct OnlineTrace {
    /// Leverage increments `d_t`, in pass order.
    pub d: Vec<f64>,
    /// Raw online losses `(f_{t-1}(x_t) - y_t)²`.
    pub losses: Vec<f64>,
    /// Online losses of the truncated predictions.
    pub truncated_losses: Vec<f64>,
    /// The permutation applied to the dataset, as indices into it.
    pub permutation: Vec<usize>,
    pub lambda: f64,
    pub n: usize,
    pub seed: u64,
}

impl OnlineTrace {
    pub fn len(&self) -> usize {
        self.d.len()
    }

    pub fn is_empty(&self) -> bool {
        self.d.is_empty()
    }

    /// The discounted loss average `(1/n) Σ_t ℓ_t / (1 + d_t/(λn))`, which
    /// equals the optimal value of the regularized empirical objective.
    pub fn weighted_loss_average(&self) -> f64 {
        let shift = self.lambda * self.n as f64;
        self.d
            .iter()
            .zip(&self.losses)
            .map(|(&d, &l)| l / (1.0 + d / shift))
            .sum::<f64>()
            / self.n as f64
    }
}

/// Permutes the sample with the seed's shuffle and runs the incremental
/// solver once across it, recording leverage increments and online losses.
/// Requires `lambda > 0`.
pub fn online_pass(
    train: &Dataset,
    kernel: KernelSpec,
    lambda: f64,
    y_cap: Option<f64>,
    seed: u64,
) -> Result<OnlineTrace> {
    if train.is_empty() {
        return Err(Error::EmptyDataset);
    }
    if !(lambda > 0.0) {
        return Err(Error::NonPositiveLambda(lambda));
    }
    let cap = effective_cap(y_cap, &train.labels)?;
    let n = train.len();
    let order = pass_order(n, seed);

    let mut state = SolverState::new(kernel, lambda * n as f64)?;
    let mut d = Vec::with_capacity(n);
    let mut losses = Vec::with_capacity(n);
    let mut truncated = Vec::with_capacity(n);
    for &i in &order {
        let (x, y) = (train.inputs[i], train.labels[i]);
        let ext = state.extend(x, y)?;
        d.push(ext.d);
        let r = ext.prediction - y;
        losses.push(r * r);
        let rt = truncate(ext.prediction, cap) - y;
        truncated.push(rt * rt);
    }
    Ok(OnlineTrace {
        d,
        losses,
        truncated_losses: truncated,
        permutation: order,
        lambda,
        n,
        seed,
    })
}
