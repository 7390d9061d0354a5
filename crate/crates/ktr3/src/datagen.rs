//! Synthetic spline-kernel benchmarks with known ground truth.
//!
//! The generator is parameterized the way learning rates are stated: an
//! eigenvalue-decay exponent `b` (the kernel has eigenvalues decaying like
//! `k^{-1/b}`, so smaller `b` means a smaller effective hypothesis class)
//! and a smoothness exponent `β ∈ (0, 1/2]` of the target relative to the
//! kernel. Concretely, learning with the spline kernel `Λ_q`, `q = 1/b`,
//! the target is a section of a smoother spline kernel,
//!
//! ```text
//! f*(x) = Λ_{q*}(x, 0),   q* = β/b + 1/2,
//! ```
//!
//! whose Fourier coefficients `(2πk)^{-q*}` place it exactly at source
//! smoothness `β` for the chosen kernel. Inputs are uniform on `[0, 1)` and
//! labels carry uniform noise on `[-ε, ε]`, so the Bayes risk is `ε²/3` and
//! labels are bounded by `Λ_{q*}(0) + ε`.
//!
//! [`zero_noise_h_problem`] builds the noiseless variant whose target is a
//! section of the learning kernel itself, the cleanest instance with source
//! smoothness exactly `1/2`; interpolation (`λ = 0`) is optimal there.

use std::fmt;
use std::io::{BufRead, BufReader, Write};
use std::path::Path;

use rand::Rng;

use crate::kernels::KernelSpec;
use crate::seed::{derive_seed, rng_from};
use crate::{Error, Result};

const TRAIN_STREAM: u64 = 0x7261;
const TEST_STREAM: u64 = 0x7465;

/// The target regression function of a generated problem.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum TargetFn {
    /// `x ↦ Λ_order(x, anchor)`.
    SplineSection { order: f64, anchor: f64 },
}

impl TargetFn {
    pub fn eval(&self, x: f64) -> f64 {
        match *self {
            TargetFn::SplineSection { order, anchor } => KernelSpec::Spline {
                q: order,
                series_tol: crate::kernels::DEFAULT_SERIES_TOL,
            }
            .eval(x, anchor),
        }
    }

    /// Supremum of `|f*|`; for spline sections the series is maximal at
    /// lag zero and dominates the absolute value everywhere.
    pub fn sup_abs(&self) -> f64 {
        match *self {
            TargetFn::SplineSection { anchor, .. } => self.eval(anchor),
        }
    }
}

/// Provenance of a generated dataset, carried alongside the samples.
#[derive(Debug, Clone, PartialEq)]
pub struct ProblemMeta {
    pub b: f64,
    pub beta: f64,
    pub epsilon: f64,
    /// Expected squared noise, `ε²/3` for uniform noise on `[-ε, ε]`.
    pub bayes_risk: f64,
    pub seed: u64,
    pub target: TargetFn,
}

/// A labeled scalar sample, optionally with ground truth attached.
#[derive(Debug, Clone, PartialEq)]
pub struct Dataset {
    pub inputs: Vec<f64>,
    pub labels: Vec<f64>,
    /// Known bound on `|y|`; truncation level for the algorithm.
    pub y_cap: f64,
    /// Noiseless target values at `inputs`, when known.
    pub f_star: Option<Vec<f64>>,
    pub meta: Option<ProblemMeta>,
}

impl Dataset {
    /// Wraps raw samples; the label bound defaults to the empirical
    /// maximum absolute label.
    pub fn from_samples(inputs: Vec<f64>, labels: Vec<f64>) -> Result<Self> {
        if inputs.is_empty() {
            return Err(Error::EmptyDataset);
        }
        if inputs.len() != labels.len() {
            return Err(Error::SizeMismatch(format!(
                "{} inputs vs {} labels",
                inputs.len(),
                labels.len()
            )));
        }
        let y_cap = labels.iter().fold(0.0_f64, |m, &y| m.max(y.abs()));
        Ok(Dataset {
            inputs,
            labels,
            y_cap,
            f_star: None,
            meta: None,
        })
    }

    pub fn len(&self) -> usize {
        self.inputs.len()
    }

    pub fn is_empty(&self) -> bool {
        self.inputs.is_empty()
    }
}

/// Parameters of the noisy spline benchmark.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ProblemSpec {
    /// Eigenvalue-decay exponent; the kernel order is `q = 1/b`.
    pub b: f64,
    /// Source smoothness in `(0, 1/2]`; the target order is `β/b + 1/2`.
    pub beta: f64,
    /// Label noise is uniform on `[-ε, ε]`.
    pub epsilon: f64,
    pub n_train: usize,
    pub n_test: usize,
    pub seed: u64,
}

impl ProblemSpec {
    pub fn kernel_order(&self) -> f64 {
        1.0 / self.b
    }

    pub fn target_order(&self) -> f64 {
        self.beta / self.b + 0.5
    }

    pub fn validate(&self) -> Result<()> {
        let fail = |msg: String| Err(Error::InvalidProblem(msg));
        if !(self.b > 0.0 && self.kernel_order() > 1.0) {
            return fail(format!("decay exponent b = {} needs 1/b > 1", self.b));
        }
        if !(self.beta > 0.0 && self.beta <= 0.5) {
            return fail(format!("smoothness beta = {} outside (0, 1/2]", self.beta));
        }
        if !(self.target_order() > 1.0) {
            return fail(format!(
                "target order beta/b + 1/2 = {} is not above 1",
                self.target_order()
            ));
        }
        if !(self.epsilon >= 0.0 && self.epsilon.is_finite()) {
            return fail(format!("noise level {} invalid", self.epsilon));
        }
        if self.n_train == 0 || self.n_test == 0 {
            return fail("train and test sizes must be positive".into());
        }
        Ok(())
    }
}

/// Default test-set size: ten times the training size, capped at 10⁴.
pub fn default_n_test(n_train: usize) -> usize {
    (10 * n_train).min(10_000)
}

/// The target function value `Λ_{q*}(x, 0)` for a problem specification.
pub fn true_function_eval(spec: &ProblemSpec, x: f64) -> f64 {
    TargetFn::SplineSection {
        order: spec.target_order(),
        anchor: 0.0,
    }
    .eval(x)
}

/// A generated train/test pair plus the kernel to learn with.
#[derive(Debug, Clone)]
pub struct GeneratedProblem {
    pub train: Dataset,
    pub test: Dataset,
    pub kernel: KernelSpec,
}

/// Draws the noisy spline benchmark described in the module docs.
///
/// Both datasets carry ground-truth values and metadata; `y_cap` is the
/// a-priori bound `Λ_{q*}(0) + ε`, not the empirical maximum. The train
/// and test streams are derived independently from `spec.seed`, and within
/// each stream all inputs are drawn before any noise.
pub fn make_spline_problem(spec: &ProblemSpec) -> Result<GeneratedProblem> {
    spec.validate()?;
    let kernel = KernelSpec::spline(spec.kernel_order())?;
    let target = TargetFn::SplineSection {
        order: spec.target_order(),
        anchor: 0.0,
    };
    let y_cap = target.sup_abs() + spec.epsilon;
    let meta = ProblemMeta {
        b: spec.b,
        beta: spec.beta,
        epsilon: spec.epsilon,
        bayes_risk: spec.epsilon * spec.epsilon / 3.0,
        seed: spec.seed,
        target,
    };

    let draw = |n: usize, stream: u64| -> Dataset {
        let mut rng = rng_from(derive_seed(spec.seed, &[stream]));
        let inputs: Vec<f64> = (0..n).map(|_| rng.random::<f64>()).collect();
        let truth: Vec<f64> = inputs.iter().map(|&x| target.eval(x)).collect();
        let labels: Vec<f64> = truth
            .iter()
            .map(|&f| f + (2.0 * rng.random::<f64>() - 1.0) * spec.epsilon)
            .collect();
        Dataset {
            inputs,
            labels,
            y_cap,
            f_star: Some(truth),
            meta: Some(meta.clone()),
        }
    };

    Ok(GeneratedProblem {
        train: draw(spec.n_train, TRAIN_STREAM),
        test: draw(spec.n_test, TEST_STREAM),
        kernel,
    })
}

/// Noiseless benchmark whose target is a section of the learning kernel:
/// `f*(x) = Λ_q(x, 0)`, labels exact, Bayes risk zero.
pub fn zero_noise_h_problem(
    q: f64,
    n_train: usize,
    n_test: usize,
    seed: u64,
) -> Result<GeneratedProblem> {
    if n_train == 0 || n_test == 0 {
        return Err(Error::InvalidProblem(
            "train and test sizes must be positive".into(),
        ));
    }
    let kernel = KernelSpec::spline(q)?;
    let target = TargetFn::SplineSection {
        order: q,
        anchor: 0.0,
    };
    let meta = ProblemMeta {
        b: 1.0 / q,
        beta: 0.5,
        epsilon: 0.0,
        bayes_risk: 0.0,
        seed,
        target,
    };
    let draw = |n: usize, stream: u64| -> Dataset {
        let mut rng = rng_from(derive_seed(seed, &[stream]));
        let inputs: Vec<f64> = (0..n).map(|_| rng.random::<f64>()).collect();
        let labels: Vec<f64> = inputs.iter().map(|&x| target.eval(x)).collect();
        Dataset {
            inputs,
            labels: labels.clone(),
            y_cap: target.sup_abs(),
            f_star: Some(labels),
            meta: Some(meta.clone()),
        }
    };
    Ok(GeneratedProblem {
        train: draw(n_train, TRAIN_STREAM),
        test: draw(n_test, TEST_STREAM),
        kernel,
    })
}

/// A benchmark family the sweep machinery can instantiate at any size.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Problem {
    Spline { b: f64, beta: f64, epsilon: f64 },
    ZeroNoise { q: f64 },
}

impl Problem {
    pub fn generate(&self, n_train: usize, n_test: usize, seed: u64) -> Result<GeneratedProblem> {
        match *self {
            Problem::Spline { b, beta, epsilon } => make_spline_problem(&ProblemSpec {
                b,
                beta,
                epsilon,
                n_train,
                n_test,
                seed,
            }),
            Problem::ZeroNoise { q } => zero_noise_h_problem(q, n_train, n_test, seed),
        }
    }

    /// Bayes risk of the label distribution.
    pub fn bayes_risk(&self) -> f64 {
        match *self {
            Problem::Spline { epsilon, .. } => epsilon * epsilon / 3.0,
            Problem::ZeroNoise { .. } => 0.0,
        }
    }
}

impl fmt::Display for Problem {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match *self {
            Problem::Spline { b, beta, epsilon } => {
                write!(f, "spline(b={b}, beta={beta}, eps={epsilon})")
            }
            Problem::ZeroNoise { q } => write!(f, "zero_noise(q={q})"),
        }
    }
}

/// Writes `x,y[,f_star]` with 17 significant digits, enough to round-trip
/// f64 exactly.
pub fn write_csv<P: AsRef<Path>>(dataset: &Dataset, path: P) -> Result<()> {
    let mut out = std::io::BufWriter::new(std::fs::File::create(path)?);
    match &dataset.f_star {
        Some(truth) => {
            writeln!(out, "x,y,f_star")?;
            for i in 0..dataset.len() {
                writeln!(
                    out,
                    "{:.16e},{:.16e},{:.16e}",
                    dataset.inputs[i], dataset.labels[i], truth[i]
                )?;
            }
        }
        None => {
            writeln!(out, "x,y")?;
            for i in 0..dataset.len() {
                writeln!(out, "{:.16e},{:.16e}", dataset.inputs[i], dataset.labels[i])?;
            }
        }
    }
    out.flush()?;
    Ok(())
}

/// Reads a dataset written by [`write_csv`]. Metadata does not survive the
/// round trip and the label bound is reconstructed as the empirical maximum.
pub fn read_csv<P: AsRef<Path>>(path: P) -> Result<Dataset> {
    let reader = BufReader::new(std::fs::File::open(path)?);
    let mut lines = reader.lines();
    let header = lines
        .next()
        .ok_or_else(|| Error::Parse("empty file".into()))??;
    let with_truth = match header.trim() {
        "x,y" => false,
        "x,y,f_star" => true,
        other => return Err(Error::Parse(format!("unrecognized header {other:?}"))),
    };

    let mut inputs = Vec::new();
    let mut labels = Vec::new();
    let mut truth = Vec::new();
    for (lineno, line) in lines.enumerate() {
        let line = line?;
        if line.trim().is_empty() {
            continue;
        }
        let mut fields = line.split(',');
        let mut next = |name: &str| -> Result<f64> {
            fields
                .next()
                .ok_or_else(|| Error::Parse(format!("line {}: missing {name}", lineno + 2)))?
                .trim()
                .parse::<f64>()
                .map_err(|e| Error::Parse(format!("line {}: {e}", lineno + 2)))
        };
        inputs.push(next("x")?);
        labels.push(next("y")?);
        if with_truth {
            truth.push(next("f_star")?);
        }
    }
    let mut ds = Dataset::from_samples(inputs, labels)?;
    if with_truth {
        ds.f_star = Some(truth);
    }
    Ok(ds)
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    fn fig_left() -> ProblemSpec {
        ProblemSpec {
            b: 0.125,
            beta: 7.0 / 16.0,
            epsilon: 0.1,
            n_train: 50,
            n_test: 80,
            seed: 7,
        }
    }

    #[test]
    fn orders_derived_from_exponents() {
        let spec = fig_left();
        assert_relative_eq!(spec.kernel_order(), 8.0);
        assert_relative_eq!(spec.target_order(), 4.0);
        spec.validate().unwrap();
    }

    #[test]
    fn invalid_specs_are_rejected() {
        let mut s = fig_left();
        s.beta = 0.6;
        assert!(s.validate().is_err());
        let mut s = fig_left();
        s.b = 1.0; // kernel order 1 is not a valid spline
        assert!(s.validate().is_err());
        let mut s = fig_left();
        s.b = 0.9;
        s.beta = 0.3; // target order 0.3/0.9 + 0.5 = 0.833 < 1
        assert!(s.validate().is_err());
        let mut s = fig_left();
        s.n_train = 0;
        assert!(s.validate().is_err());
    }

    #[test]
    fn generated_problem_is_deterministic_and_within_caps() {
        let spec = fig_left();
        let a = make_spline_problem(&spec).unwrap();
        let b = make_spline_problem(&spec).unwrap();
        assert_eq!(a.train.inputs, b.train.inputs);
        assert_eq!(a.train.labels, b.train.labels);
        assert_eq!(a.test.inputs, b.test.inputs);

        assert_eq!(a.train.len(), 50);
        assert_eq!(a.test.len(), 80);
        // Train and test streams must differ.
        assert_ne!(a.train.inputs[0], a.test.inputs[0]);

        let cap = a.train.y_cap;
        assert_relative_eq!(cap, 1.0 + 1.0 / 720.0 + 0.1, max_relative = 1e-12);
        for (&x, &y) in a.train.inputs.iter().zip(&a.train.labels) {
            assert!((0.0..1.0).contains(&x));
            assert!(y.abs() <= cap);
        }

        // Labels deviate from ground truth by at most ε.
        let truth = a.train.f_star.as_ref().unwrap();
        for (&y, &f) in a.train.labels.iter().zip(truth) {
            assert!((y - f).abs() <= 0.1 + 1e-12);
        }
        assert_relative_eq!(
            a.train.meta.as_ref().unwrap().bayes_risk,
            0.01 / 3.0,
            max_relative = 1e-15
        );
    }

    #[test]
    fn ground_truth_matches_target_kernel_section() {
        let spec = fig_left();
        let gen = make_spline_problem(&spec).unwrap();
        let k4 = KernelSpec::spline(4.0).unwrap();
        let truth = gen.train.f_star.as_ref().unwrap();
        for (&x, &f) in gen.train.inputs.iter().zip(truth) {
            assert_relative_eq!(f, k4.eval(x, 0.0), max_relative = 1e-13);
            assert_relative_eq!(f, true_function_eval(&spec, x), max_relative = 1e-13);
        }
    }

    #[test]
    fn zero_noise_problem_has_exact_labels() {
        let gen = zero_noise_h_problem(2.0, 30, 60, 11).unwrap();
        let k = KernelSpec::spline(2.0).unwrap();
        for (&x, &y) in gen.train.inputs.iter().zip(&gen.train.labels) {
            assert_relative_eq!(y, k.eval(x, 0.0), max_relative = 1e-14);
        }
        assert_relative_eq!(gen.train.y_cap, 13.0 / 12.0, max_relative = 1e-14);
        assert_eq!(gen.train.meta.as_ref().unwrap().bayes_risk, 0.0);
        assert!(zero_noise_h_problem(1.0, 10, 10, 0).is_err());
        assert!(zero_noise_h_problem(2.0, 0, 10, 0).is_err());
    }

    #[test]
    fn csv_round_trip_is_exact() {
        let gen = make_spline_problem(&fig_left()).unwrap();
        let dir = std::env::temp_dir().join("ktr3_datagen_test");
        std::fs::create_dir_all(&dir).unwrap();
        let path = dir.join("train.csv");
        write_csv(&gen.train, &path).unwrap();
        let back = read_csv(&path).unwrap();
        assert_eq!(back.inputs, gen.train.inputs);
        assert_eq!(back.labels, gen.train.labels);
        assert_eq!(back.f_star.as_ref(), gen.train.f_star.as_ref());
        // The a-priori cap is not stored; the empirical one is smaller.
        assert!(back.y_cap <= gen.train.y_cap);
        std::fs::remove_file(&path).ok();
    }

    #[test]
    fn csv_read_rejects_garbage() {
        let dir = std::env::temp_dir().join("ktr3_datagen_test");
        std::fs::create_dir_all(&dir).unwrap();
        let path = dir.join("bad.csv");
        std::fs::write(&path, "x,z\n1,2\n").unwrap();
        assert!(read_csv(&path).is_err());
        std::fs::write(&path, "x,y\n1,notanumber\n").unwrap();
        assert!(read_csv(&path).is_err());
        std::fs::remove_file(&path).ok();
    }

    #[test]
    fn dataset_from_samples_checks_shape() {
        assert!(Dataset::from_samples(vec![], vec![]).is_err());
        assert!(Dataset::from_samples(vec![0.1], vec![]).is_err());
        let ds = Dataset::from_samples(vec![0.1, 0.2], vec![-3.0, 1.0]).unwrap();
        assert_relative_eq!(ds.y_cap, 3.0);
    }
}
