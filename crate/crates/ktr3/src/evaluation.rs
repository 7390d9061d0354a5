//! Risk estimation, rate fitting, λ schedules, and grid sweeps.
//!
//! Excess risk is estimated against the noiseless target when the test set
//! carries one (the synthetic generators always do), falling back to noisy
//! labels with the Bayes risk subtracted. The randomized algorithm's risk
//! is a uniform average over prefix lengths; [`expected_risk_over_k`]
//! estimates that average from a sparse geometric grid of prefixes with
//! trapezoid weights, exactly when the grid is `{0, …, n-1}`.
//!
//! [`best_lambda_sweep`] reproduces the benchmark protocol: for each
//! candidate λ, average the estimated excess risk over seeded repetitions
//! (fresh data and fresh algorithm randomness per repetition) and return
//! the λ with the smallest average. Repetitions share data across λ cells
//! (common random numbers), which sharpens the argmin without biasing any
//! individual estimate.

use std::fmt;
use std::str::FromStr;
use std::time::Instant;

use crate::algorithm::{pass_order, run_ktr3, truncate, Predictor};
use crate::datagen::{default_n_test, Dataset, Problem};
use crate::kernels::KernelSpec;
use crate::seed::derive_seed;
use crate::solver::{min_norm_solve, SolverState, DEFAULT_PINV_REL_TOL};
use crate::{Error, Result};

const SWEEP_DATA_TAG: u64 = 0xda7a;
const SWEEP_ALGO_TAG: u64 = 0xa190;

/// How the risk of the randomized procedure is estimated.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum RiskMode {
    /// One seeded draw of the prefix length, as the algorithm runs in
    /// production.
    SingleDraw,
    /// Average over the uniform prefix draw, estimated on a prefix grid.
    KAverage,
}

impl fmt::Display for RiskMode {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            RiskMode::SingleDraw => "single_draw",
            RiskMode::KAverage => "k_average",
        })
    }
}

impl FromStr for RiskMode {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "single_draw" => Ok(RiskMode::SingleDraw),
            "k_average" => Ok(RiskMode::KAverage),
            other => Err(Error::Parse(format!("unknown risk mode {other:?}"))),
        }
    }
}

/// An excess-risk estimate with its sampling uncertainty.
#[derive(Debug, Clone, Copy)]
pub struct RiskEstimate {
    pub excess_risk: f64,
    pub std_error: f64,
    pub n_test: usize,
    pub mode: RiskMode,
}

fn mean_and_std_error(values: &[f64]) -> (f64, f64) {
    let m = values.len() as f64;
    let mean = values.iter().sum::<f64>() / m;
    if values.len() < 2 {
        return (mean, 0.0);
    }
    let var = values.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / (m - 1.0);
    (mean, (var / m).sqrt())
}

/// Reference values a predictor is scored against: the noiseless target
/// when available, otherwise labels with the known Bayes risk subtracted
/// from the resulting mean squared error.
enum Reference<'a> {
    Truth(&'a [f64]),
    NoisyLabels { labels: &'a [f64], bayes: f64 },
}

impl<'a> Reference<'a> {
    fn for_test(test: &'a Dataset) -> Result<Self> {
        if let Some(truth) = &test.f_star {
            return Ok(Reference::Truth(truth));
        }
        if let Some(meta) = &test.meta {
            return Ok(Reference::NoisyLabels {
                labels: &test.labels,
                bayes: meta.bayes_risk,
            });
        }
        Err(Error::MissingGroundTruth)
    }

    fn target(&self, j: usize) -> f64 {
        match self {
            Reference::Truth(t) => t[j],
            Reference::NoisyLabels { labels, .. } => labels[j],
        }
    }

    fn bias(&self) -> f64 {
        match self {
            Reference::Truth(_) => 0.0,
            Reference::NoisyLabels { bayes, .. } => *bayes,
        }
    }
}

/// Test excess risk of a single predictor.
pub fn excess_risk(p: &Predictor, test: &Dataset) -> Result<RiskEstimate> {
    if test.is_empty() {
        return Err(Error::EmptyDataset);
    }
    let reference = Reference::for_test(test)?;
    let errs: Vec<f64> = test
        .inputs
        .iter()
        .enumerate()
        .map(|(j, &x)| (p.predict(x) - reference.target(j)).powi(2))
        .collect();
    let (mean, std_error) = mean_and_std_error(&errs);
    Ok(RiskEstimate {
        excess_risk: mean - reference.bias(),
        std_error,
        n_test: test.len(),
        mode: RiskMode::SingleDraw,
    })
}

/// Default prefix grid: 32 geometrically spaced indices in `{0, …, n-1}`,
/// always containing both endpoints.
pub fn default_t_grid(n: usize) -> Vec<usize> {
    assert!(n >= 1);
    let top = n - 1;
    let mut grid = vec![0];
    if top == 0 {
        return grid;
    }
    let points = 31usize;
    for i in 0..points {
        let f = (top as f64).powf(i as f64 / (points - 1) as f64);
        let t = f.round() as usize;
        if *grid.last().unwrap() != t {
            grid.push(t);
        }
    }
    grid
}

/// Prefix grid for the restricted draw `k ∈ {⌊(1-α)n⌋, …, n-1}`: up to 32
/// evenly spaced indices across that window. `α = 1` recovers
/// [`default_t_grid`]; a tiny `α` pins the window to the single full
/// prefix `n-1`, the protocol that scores the final fit alone.
pub fn window_t_grid(n: usize, tail_fraction: f64) -> Result<Vec<usize>> {
    assert!(n >= 1);
    if !(tail_fraction > 0.0 && tail_fraction <= 1.0) {
        return Err(Error::TailFraction(tail_fraction));
    }
    let lo = (((1.0 - tail_fraction) * n as f64).floor() as usize).min(n - 1);
    if lo == 0 {
        return Ok(default_t_grid(n));
    }
    let top = n - 1;
    let mut grid = vec![lo];
    let points = 31usize;
    for i in 1..=points {
        let t = lo + ((top - lo) as f64 * i as f64 / points as f64).round() as usize;
        if *grid.last().unwrap() != t {
            grid.push(t);
        }
    }
    Ok(grid)
}

/// Estimates the average risk of `T∘f_k` for `k` uniform on the window
/// `[t_first, t_last]` covered by the grid, on a sparse prefix grid. With
/// a grid spanning all of `{0, …, n-1}` this is the expected risk of the
/// full randomized procedure.
///
/// The sample is consumed in the order given (callers permute first). Each
/// grid prefix is scored on the test set and the per-prefix risks are
/// combined with trapezoid weights plus half-weight endpoint terms:
///
/// ```text
/// (1/w) [ Σᵢ (tᵢ₊₁ - tᵢ)(Rᵢ + Rᵢ₊₁)/2 + (R_first + R_last)/2 ],
/// ```
///
/// where `w = t_last - t_first + 1` is the window length; this reduces to
/// the exact arithmetic mean when the grid has no gaps. `y_cap` defaults
/// to the largest absolute training label.
pub fn expected_risk_over_k(
    dataset: &Dataset,
    kernel: KernelSpec,
    lambda: f64,
    y_cap: Option<f64>,
    test: &Dataset,
    t_grid: &[usize],
) -> Result<RiskEstimate> {
    if dataset.is_empty() || test.is_empty() {
        return Err(Error::EmptyDataset);
    }
    if !(lambda >= 0.0) {
        return Err(Error::NegativeLambda(lambda));
    }
    let n = dataset.len();
    if t_grid.is_empty()
        || !t_grid.windows(2).all(|w| w[0] < w[1])
        || *t_grid.last().unwrap() >= n
    {
        return Err(Error::BadPrefixGrid);
    }
    let cap = match y_cap {
        Some(c) if !(c >= 0.0) => return Err(Error::NegativeCap(c)),
        Some(c) => c,
        None => dataset.labels.iter().fold(0.0_f64, |m, &y| m.max(y.abs())),
    };
    let reference = Reference::for_test(test)?;

    // Trapezoid weights; they sum to (t_last - t_first) + 1.
    let m = t_grid.len();
    let mut weights = vec![0.0; m];
    for i in 0..m - 1 {
        let gap = (t_grid[i + 1] - t_grid[i]) as f64;
        weights[i] += gap / 2.0;
        weights[i + 1] += gap / 2.0;
    }
    weights[0] += 0.5;
    weights[m - 1] += 0.5;

    // Dual coefficients for every grid prefix. With a positive shift a
    // single growing factorization serves all prefixes; at λ = 0 each
    // prefix gets its own pseudo-inverse solve on a leading gram block.
    let t_max = *t_grid.last().unwrap();
    let mut alphas: Vec<Vec<f64>> = Vec::with_capacity(m);
    if lambda > 0.0 {
        let mut state = SolverState::new(kernel, lambda * n as f64)?;
        for i in 0..t_max {
            state.extend(dataset.inputs[i], dataset.labels[i])?;
        }
        for &t in t_grid {
            if t == 0 {
                alphas.push(Vec::new());
            } else {
                alphas.push(state.dual_coefficients_at(t)?);
            }
        }
    } else {
        let gram = if t_max > 0 {
            Some(kernel.gram(&dataset.inputs[..t_max])?)
        } else {
            None
        };
        for &t in t_grid {
            if t == 0 {
                alphas.push(Vec::new());
            } else {
                let block = gram.as_ref().unwrap().view((0, 0), (t, t)).into_owned();
                alphas.push(min_norm_solve(&block, &dataset.labels[..t], DEFAULT_PINV_REL_TOL)?);
            }
        }
    }

    // Weighted per-test-point risks, accumulated block-wise so the cross
    // kernel between train and test points is evaluated exactly once.
    let m_test = test.len();
    let mut acc = vec![0.0_f64; m_test];
    const BLOCK: usize = 2048;
    let mut cross = vec![0.0_f64; t_max * BLOCK.min(m_test.max(1))];
    let mut start = 0;
    while start < m_test {
        let width = BLOCK.min(m_test - start);
        for i in 0..t_max {
            let xi = dataset.inputs[i];
            let row = &mut cross[i * width..(i + 1) * width];
            for (jj, slot) in row.iter_mut().enumerate() {
                *slot = kernel.eval(xi, test.inputs[start + jj]);
            }
        }
        for (alpha, &wt) in alphas.iter().zip(&weights) {
            for jj in 0..width {
                let mut pred = 0.0;
                for (i, &a) in alpha.iter().enumerate() {
                    pred += a * cross[i * width + jj];
                }
                let err = truncate(pred, cap) - reference.target(start + jj);
                acc[start + jj] += wt * err * err;
            }
        }
        start += width;
    }

    let window = (t_grid[m - 1] - t_grid[0] + 1) as f64;
    let risks: Vec<f64> = acc.iter().map(|&a| a / window).collect();
    let (mean, std_error) = mean_and_std_error(&risks);
    Ok(RiskEstimate {
        excess_risk: mean - reference.bias(),
        std_error,
        n_test: m_test,
        mode: RiskMode::KAverage,
    })
}

/// Least-squares power-law fit on log-log axes.
#[derive(Debug, Clone)]
pub struct RateFit {
    /// Slope of `ln(excess)` against `ln(n)`; a rate of `n^{-r}` fits as
    /// slope `-r`.
    pub slope: f64,
    pub intercept: f64,
    pub r_squared: f64,
    pub points: Vec<(f64, f64)>,
}

/// Fits `ln(excess) = slope·ln(n) + intercept` by ordinary least squares.
pub fn fit_rate(points: &[(f64, f64)]) -> Result<RateFit> {
    if points.len() < 3 {
        return Err(Error::TooFewRatePoints(points.len()));
    }
    for &(n, e) in points {
        if !(e > 0.0) {
            return Err(Error::NonPositiveExcess(e));
        }
        if !(n > 0.0) {
            return Err(Error::InvalidProblem(format!("sample size {n} invalid")));
        }
    }
    let logs: Vec<(f64, f64)> = points.iter().map(|&(n, e)| (n.ln(), e.ln())).collect();
    let m = logs.len() as f64;
    let mean_x = logs.iter().map(|p| p.0).sum::<f64>() / m;
    let mean_y = logs.iter().map(|p| p.1).sum::<f64>() / m;
    let sxx: f64 = logs.iter().map(|p| (p.0 - mean_x).powi(2)).sum();
    let sxy: f64 = logs.iter().map(|p| (p.0 - mean_x) * (p.1 - mean_y)).sum();
    if sxx == 0.0 {
        return Err(Error::InvalidProblem("all sample sizes equal".into()));
    }
    let slope = sxy / sxx;
    let intercept = mean_y - slope * mean_x;
    let ss_res: f64 = logs
        .iter()
        .map(|p| (p.1 - slope * p.0 - intercept).powi(2))
        .sum();
    let ss_tot: f64 = logs.iter().map(|p| (p.1 - mean_y).powi(2)).sum();
    let r_squared = if ss_tot > 0.0 {
        1.0 - ss_res / ss_tot
    } else if ss_res <= f64::EPSILON {
        1.0
    } else {
        0.0
    };
    Ok(RateFit {
        slope,
        intercept,
        r_squared,
        points: points.to_vec(),
    })
}

/// The closed-form regularization schedules, one per regime of the theory.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum LambdaRegime {
    /// Noise present; balances `λ^{2β}` against `bayes/(λn)`.
    Noisy,
    /// Zero Bayes risk; `λ = (1/n)(1/(2β) - 1)`, exactly 0 at `β = 1/2`.
    ZeroBayes,
    /// Capacity-dependent; uses `Tr[L_K^b]` and the label bound.
    Capacity,
    /// Finite-dimensional / `b = 0` regime: `λ = 1/(n·‖f‖²)`.
    FiniteDim,
}

/// Inputs the schedules may draw on; regimes validate what they need.
#[derive(Debug, Clone, Copy, Default)]
pub struct ScheduleInputs {
    pub n: usize,
    pub beta: f64,
    pub b: f64,
    pub bayes_risk: Option<f64>,
    pub source_norm_sq: Option<f64>,
    pub trace_b: Option<f64>,
    pub y_cap: Option<f64>,
}

pub fn lambda_schedule(regime: LambdaRegime, inputs: &ScheduleInputs) -> Result<f64> {
    let fail = |regime: &'static str, reason: String| Err(Error::Schedule { regime, reason });
    let n = inputs.n as f64;
    if inputs.n == 0 {
        return fail("all", "n must be positive".into());
    }
    if !(inputs.beta > 0.0 && inputs.beta <= 0.5) {
        return fail("all", format!("beta = {} outside (0, 1/2]", inputs.beta));
    }
    let two_beta = 2.0 * inputs.beta;
    match regime {
        LambdaRegime::Noisy => {
            let bayes = match inputs.bayes_risk {
                Some(v) if v >= 0.0 => v,
                _ => return fail("noisy", "bayes_risk required and nonnegative".into()),
            };
            let norm = match inputs.source_norm_sq {
                Some(v) if v > 0.0 => v,
                _ => return fail("noisy", "source_norm_sq required and positive".into()),
            };
            Ok(((bayes / n) / (two_beta * norm)).powf(1.0 / (two_beta + 1.0)))
        }
        LambdaRegime::ZeroBayes => Ok((1.0 / two_beta - 1.0) / n),
        LambdaRegime::Capacity => {
            let b = inputs.b;
            if !(b > 0.0 && b <= 1.0) {
                return fail("capacity", format!("b = {b} outside (0, 1]"));
            }
            let norm = match inputs.source_norm_sq {
                Some(v) if v > 0.0 => v,
                _ => return fail("capacity", "source_norm_sq required and positive".into()),
            };
            let trace = match inputs.trace_b {
                Some(v) if v > 0.0 => v,
                _ => return fail("capacity", "trace_b required and positive".into()),
            };
            let y = match inputs.y_cap {
                Some(v) if v > 0.0 => v,
                _ => return fail("capacity", "y_cap required and positive".into()),
            };
            let num = b * y * y * trace;
            let den = two_beta * n * b * norm;
            Ok((num / den).powf(1.0 / (two_beta + b)))
        }
        LambdaRegime::FiniteDim => {
            let norm = match inputs.source_norm_sq {
                Some(v) if v > 0.0 => v,
                _ => return fail("finite_dim", "source_norm_sq required and positive".into()),
            };
            Ok(1.0 / (n * norm))
        }
    }
}

/// `Tr[L_K^b] = 1 + 2 Σ_k (2πk)^{-qb}` for the spline kernel of order `q`;
/// finite exactly when `qb > 1`.
pub fn trace_power(q: f64, b: f64) -> Result<f64> {
    if !(q > 1.0) {
        return Err(Error::SplineOrder(q));
    }
    let p = q * b;
    if !(p > 1.0) {
        return Err(Error::Schedule {
            regime: "capacity",
            reason: format!("trace exponent q·b = {p} must exceed 1"),
        });
    }
    Ok(1.0 + 2.0 * std::f64::consts::TAU.powf(-p) * crate::kernels::riemann_zeta(p))
}

/// Default λ grid: the exact endpoint 0 plus 25 logarithmically spaced
/// values spanning `[10⁻⁶, 1]`, in ascending order.
pub fn default_lambda_grid() -> Vec<f64> {
    let mut grid = vec![0.0];
    let (lo, hi) = (1e-6_f64.ln(), 1.0_f64.ln());
    for i in 0..25 {
        grid.push((lo + (hi - lo) * i as f64 / 24.0).exp());
    }
    grid
}

/// One sweep cell: a (sample size, λ, repetition) evaluation.
#[derive(Debug, Clone, Copy)]
pub struct SweepRecord {
    pub n: usize,
    pub lambda: f64,
    pub rep: usize,
    pub seed: u64,
    pub excess_risk: f64,
    pub std_error: f64,
    pub mode: RiskMode,
    pub elapsed_ms: u64,
}

/// Outcome of a λ sweep at fixed sample size.
#[derive(Debug, Clone)]
pub struct SweepOutcome {
    pub best_lambda: f64,
    pub best_excess: f64,
    /// Mean excess risk per λ, ascending in λ.
    pub mean_by_lambda: Vec<(f64, f64)>,
    pub records: Vec<SweepRecord>,
}

/// Sweeps a λ grid at sample size `n` and returns the risk-minimizing λ.
///
/// Each repetition draws fresh data and fresh algorithm randomness from
/// seeds derived off `master_seed`; all λ cells within a repetition share
/// both draws. The grid is deduplicated and sorted ascending, and ties in
/// the average go to the smaller λ. `tail_fraction` restricts the prefix
/// draw to `{⌊(1-α)n⌋, …, n-1}`: 1 scores the full uniform draw, a tiny
/// value scores the final fit alone.
pub fn best_lambda_sweep(
    problem: &Problem,
    lambda_grid: &[f64],
    n: usize,
    repetitions: usize,
    master_seed: u64,
    mode: RiskMode,
    tail_fraction: f64,
) -> Result<SweepOutcome> {
    if lambda_grid.is_empty() {
        return Err(Error::EmptyLambdaGrid);
    }
    if repetitions == 0 {
        return Err(Error::NoRepetitions);
    }
    let t_grid = window_t_grid(n, tail_fraction)?;
    let mut grid = lambda_grid.to_vec();
    for &l in &grid {
        if !(l >= 0.0) || !l.is_finite() {
            return Err(Error::NegativeLambda(l));
        }
    }
    grid.sort_by(|a, b| a.partial_cmp(b).unwrap());
    grid.dedup();

    let mut records = Vec::with_capacity(grid.len() * repetitions);
    let mut sums = vec![0.0_f64; grid.len()];
    for rep in 0..repetitions {
        let data_seed = derive_seed(master_seed, &[SWEEP_DATA_TAG, n as u64, rep as u64]);
        let algo_seed = derive_seed(master_seed, &[SWEEP_ALGO_TAG, n as u64, rep as u64]);
        let gen = problem.generate(n, default_n_test(n), data_seed)?;

        // The k-average estimator scores the same permutation stream the
        // single-draw run would consume.
        let permuted = match mode {
            RiskMode::KAverage => {
                let order = pass_order(n, algo_seed);
                let mut ds = gen.train.clone();
                ds.inputs = order.iter().map(|&i| gen.train.inputs[i]).collect();
                ds.labels = order.iter().map(|&i| gen.train.labels[i]).collect();
                ds.f_star = gen
                    .train
                    .f_star
                    .as_ref()
                    .map(|t| order.iter().map(|&i| t[i]).collect());
                Some(ds)
            }
            RiskMode::SingleDraw => None,
        };

        for (gi, &lambda) in grid.iter().enumerate() {
            let started = Instant::now();
            let estimate = match mode {
                RiskMode::SingleDraw => {
                    let p = run_ktr3(
                        &gen.train,
                        gen.kernel,
                        lambda,
                        Some(gen.train.y_cap),
                        algo_seed,
                        tail_fraction,
                    )?;
                    excess_risk(&p, &gen.test)?
                }
                RiskMode::KAverage => {
                    let ds = permuted.as_ref().unwrap();
                    expected_risk_over_k(ds, gen.kernel, lambda, Some(ds.y_cap), &gen.test, &t_grid)?
                }
            };
            if !estimate.excess_risk.is_finite() {
                return Err(Error::InvalidProblem(format!(
                    "non-finite excess risk at n={n}, lambda={lambda}, rep={rep}"
                )));
            }
            sums[gi] += estimate.excess_risk;
            records.push(SweepRecord {
                n,
                lambda,
                rep,
                seed: algo_seed,
                excess_risk: estimate.excess_risk,
                std_error: estimate.std_error,
                mode,
                elapsed_ms: started.elapsed().as_millis() as u64,
            });
        }
    }

    let mean_by_lambda: Vec<(f64, f64)> = grid
        .iter()
        .zip(&sums)
        .map(|(&l, &s)| (l, s / repetitions as f64))
        .collect();
    let mut best = 0usize;
    for i in 1..mean_by_lambda.len() {
        if mean_by_lambda[i].1 < mean_by_lambda[best].1 {
            best = i;
        }
    }
    Ok(SweepOutcome {
        best_lambda: mean_by_lambda[best].0,
        best_excess: mean_by_lambda[best].1,
        mean_by_lambda,
        records,
    })
}
