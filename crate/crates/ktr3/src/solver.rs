//! Incremental factorization of the shifted gram matrix.
//!
//! The regression path needs, for every prefix length `t`, the solution of
//! `(K_t + λn I) α = y_{1:t}` together with the leverage increment
//!
//! ```text
//! d_t = k(x_t, x_t) - k_{t-1}(x_t)ᵀ (K_{t-1} + λn I)⁻¹ k_{t-1}(x_t) ≥ 0,
//! ```
//!
//! the Schur complement of the new point against the previous block.
//! Recomputing a dense solve per prefix costs `O(n⁴)` over a pass; instead
//! [`SolverState`] grows a Cholesky factor of `K_t + λn I` one bordered row
//! at a time for `O(t²)` per step. The new diagonal pivot satisfies
//! `pivot² = d_t + λn`, so the increments, the online predictions, and the
//! prefix dual coefficients all fall out of quantities the factorization
//! maintains anyway:
//!
//! - `w = L⁻¹ k` is the bordered row, and `d = k(x,x) - ‖w‖²`;
//! - with `z = L⁻¹ y` kept up to date, `wᵀz` is the previous prefix's
//!   prediction at the incoming point, giving the one-pass online losses;
//! - back-substituting `Lᵀ α = z` (or a leading block of it) yields the
//!   dual coefficients of any prefix without refactorizing.
//!
//! The `λ = 0` path does not use the factorization: the gram matrix may be
//! exactly singular there, so [`min_norm_solve`] computes the minimum-norm
//! interpolant through a spectral pseudo-inverse instead.

use nalgebra::{DMatrix, DVector};

use crate::kernels::KernelSpec;
use crate::{Error, Result};

/// Relative eigenvalue cutoff for the pseudo-inverse in [`min_norm_solve`].
pub const DEFAULT_PINV_REL_TOL: f64 = 1e-10;

/// How far below zero a computed `d_t` may fall before it is treated as a
/// broken invariant instead of roundoff.
const LEVERAGE_WINDOW: f64 = 1e-10;

/// Pivots below this fraction of the incoming diagonal are treated as an
/// exactly singular extension (duplicate point at zero shift).
const PIVOT_FLOOR: f64 = 1e-14;

/// Result of one extension step.
#[derive(Debug, Clone, Copy)]
pub struct Extension {
    /// Leverage increment `d_t` of the added point (clamped at zero).
    pub d: f64,
    /// Prediction of the pre-extension regressor at the added point;
    /// zero for the first point (the empty prefix predicts zero).
    pub prediction: f64,
}

/// Growing Cholesky factorization of `K_t + shift·I` over added points.
#[derive(Debug, Clone)]
pub struct SolverState {
    kernel: KernelSpec,
    shift: f64,
    points: Vec<f64>,
    labels: Vec<f64>,
    /// Lower-triangular factor, packed row-major: row `i` occupies
    /// `i(i+1)/2 .. i(i+1)/2 + i + 1`.
    factor: Vec<f64>,
    /// `z = L⁻¹ y`, extended alongside the factor.
    forward: Vec<f64>,
}

#[inline]
fn row_start(i: usize) -> usize {
    i * (i + 1) / 2
}

impl SolverState {
    /// Empty state for the given kernel and ridge shift `λ·n ≥ 0`.
    pub fn new(kernel: KernelSpec, shift: f64) -> Result<Self> {
        if !shift.is_finite() || shift < 0.0 {
            return Err(Error::NegativeLambda(shift));
        }
        Ok(SolverState {
            kernel,
            shift,
            points: Vec::new(),
            labels: Vec::new(),
            factor: Vec::new(),
            forward: Vec::new(),
        })
    }

    pub fn len(&self) -> usize {
        self.points.len()
    }

    pub fn is_empty(&self) -> bool {
        self.points.is_empty()
    }

    pub fn shift(&self) -> f64 {
        self.shift
    }

    pub fn kernel(&self) -> KernelSpec {
        self.kernel
    }

    pub fn points(&self) -> &[f64] {
        &self.points
    }

    pub fn labels(&self) -> &[f64] {
        &self.labels
    }

    /// Adds one observation, growing the factorization by a bordered row.
    ///
    /// Returns the leverage increment of the new point and the prediction
    /// the previous prefix made for it. `O(t²)` time, `O(t)` extra space.
    pub fn extend(&mut self, x: f64, y: f64) -> Result<Extension> {
        let t = self.points.len();
        let k_xx = self.kernel.eval(x, x);

        // Bordered row: w = L⁻¹ k by forward substitution.
        let mut w = vec![0.0; t];
        for i in 0..t {
            let row = row_start(i);
            let mut acc = self.kernel.eval(self.points[i], x);
            for j in 0..i {
                acc -= self.factor[row + j] * w[j];
            }
            w[i] = acc / self.factor[row + i];
        }

        let prediction: f64 = w.iter().zip(&self.forward).map(|(a, b)| a * b).sum();
        let mut d = k_xx - w.iter().map(|v| v * v).sum::<f64>();
        if d < -LEVERAGE_WINDOW {
            return Err(Error::InconsistentLeverage { step: t, d });
        }
        d = d.max(0.0);

        let pivot_sq = d + self.shift;
        if pivot_sq <= PIVOT_FLOOR * (k_xx.abs() + self.shift) {
            return Err(Error::SingularExtension {
                step: t,
                pivot: pivot_sq,
            });
        }
        let pivot = pivot_sq.sqrt();

        self.factor.extend_from_slice(&w);
        self.factor.push(pivot);
        self.forward.push((y - prediction) / pivot);
        self.points.push(x);
        self.labels.push(y);
        Ok(Extension { d, prediction })
    }

    /// Dual coefficients of the full state: `α = (K + shift·I)⁻¹ y`.
    pub fn dual_coefficients(&self) -> Result<Vec<f64>> {
        self.dual_coefficients_at(self.len())
    }

    /// Dual coefficients of the first `t` observations.
    ///
    /// Bordering leaves the leading `t×t` factor untouched, so the prefix
    /// solution is a single `O(t²)` back substitution against the stored
    /// `z = L⁻¹ y`.
    pub fn dual_coefficients_at(&self, t: usize) -> Result<Vec<f64>> {
        if t == 0 {
            return Err(Error::EmptySolver);
        }
        if t > self.len() {
            return Err(Error::PrefixOutOfRange { t, len: self.len() });
        }
        let mut alpha = self.forward[..t].to_vec();
        for i in (0..t).rev() {
            let mut acc = alpha[i];
            for j in (i + 1)..t {
                acc -= self.factor[row_start(j) + i] * alpha[j];
            }
            alpha[i] = acc / self.factor[row_start(i) + i];
        }
        Ok(alpha)
    }

    /// `ln det(K_t + shift·I)`, the sum of log squared pivots.
    pub fn log_det(&self) -> f64 {
        (0..self.len())
            .map(|i| 2.0 * self.factor[row_start(i) + i].ln())
            .sum()
    }
}

/// Minimum-norm interpolant coefficients through a spectral pseudo-inverse.
///
/// Eigendirections of `gram` with eigenvalue at most `rel_tol` times the
/// largest are dropped; the rest are inverted. When the gram matrix is
/// numerically invertible this coincides with the exact solve, and in the
/// singular case it returns the dual coefficients of minimum Euclidean norm
/// among all least-squares solutions.
pub fn min_norm_solve(gram: &DMatrix<f64>, labels: &[f64], rel_tol: f64) -> Result<Vec<f64>> {
    let n = gram.nrows();
    if n == 0 {
        return Err(Error::EmptyPoints);
    }
    if gram.ncols() != n || labels.len() != n {
        return Err(Error::SizeMismatch(format!(
            "gram is {}x{}, labels has length {}",
            gram.nrows(),
            gram.ncols(),
            labels.len()
        )));
    }
    if !(rel_tol >= 0.0) {
        return Err(Error::SeriesTolerance(rel_tol));
    }
    let eig = gram.clone().symmetric_eigen();
    let max_eig = eig.eigenvalues.iter().fold(0.0_f64, |m, &v| m.max(v));
    let threshold = rel_tol * max_eig;
    let y = DVector::from_column_slice(labels);
    let coeffs = eig.eigenvectors.transpose() * y;
    let mut alpha = DVector::zeros(n);
    for i in 0..n {
        let mu = eig.eigenvalues[i];
        if mu > threshold && mu > 0.0 {
            alpha += eig.eigenvectors.column(i) * (coeffs[i] / mu);
        }
    }
    Ok(alpha.iter().copied().collect())
}

/// Log-determinant ratio `ln det(λI + K/n) - ln det(λI) = Σᵢ ln(1 + μᵢ/(λn))`
/// over the eigenvalues `μᵢ` of `gram`; `n` is the normalization size.
#[derive(Debug, Clone, Copy)]
pub struct LogDetReport {
    pub logdet_ratio: f64,
    pub lambda: f64,
    pub n: usize,
}

pub fn log_det_ratio(gram: &DMatrix<f64>, lambda: f64, n: usize) -> Result<LogDetReport> {
    if gram.nrows() == 0 {
        return Err(Error::EmptyPoints);
    }
    if !(lambda > 0.0) {
        return Err(Error::NonPositiveLambda(lambda));
    }
    if n == 0 {
        return Err(Error::SizeMismatch("normalization size must be positive".into()));
    }
    let shift = lambda * n as f64;
    let eigs = gram.clone().symmetric_eigenvalues();
    // Tiny negative eigenvalues are roundoff from an exactly PSD matrix;
    // clamping keeps the ratio nonnegative.
    let logdet_ratio = eigs.iter().map(|&mu| (1.0 + mu.max(0.0) / shift).ln()).sum();
    Ok(LogDetReport {
        logdet_ratio,
        lambda,
        n,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    fn unit_kernel() -> KernelSpec {
        KernelSpec::gaussian(1.0).unwrap()
    }

    #[test]
    fn scalar_instance_by_hand() {
        // One point, k(x,x) = 1, y = 2, shift = 1: d = 1, α = y/(1+1) = 1,
        // and the empty prefix predicts 0.
        let mut s = SolverState::new(unit_kernel(), 1.0).unwrap();
        let ext = s.extend(0.0, 2.0).unwrap();
        assert_relative_eq!(ext.d, 1.0);
        assert_relative_eq!(ext.prediction, 0.0);
        assert_relative_eq!(s.dual_coefficients().unwrap()[0], 1.0);
        assert_relative_eq!(s.log_det(), 2.0_f64.ln());
    }

    #[test]
    fn two_point_closed_form() {
        // Symmetric 2x2 system [[1, b], [b, 1]] + sI with s = 0.5:
        // α = (A + sI)⁻¹ y has a textbook closed form.
        let kernel = unit_kernel();
        let x0 = 0.0;
        let x1 = 0.9;
        let b = kernel.eval(x0, x1);
        let s_shift = 0.5;
        let y = [1.0, -2.0];

        let mut st = SolverState::new(kernel, s_shift).unwrap();
        st.extend(x0, y[0]).unwrap();
        let ext = st.extend(x1, y[1]).unwrap();
        // d_2 = 1 - b²/(1 + s) by the Schur complement.
        assert_relative_eq!(ext.d, 1.0 - b * b / (1.0 + s_shift), max_relative = 1e-14);
        // Previous prefix predicts b/(1+s) · y0.
        assert_relative_eq!(ext.prediction, b * y[0] / (1.0 + s_shift), max_relative = 1e-14);

        let a = 1.0 + s_shift;
        let det = a * a - b * b;
        let want = [
            (a * y[0] - b * y[1]) / det,
            (a * y[1] - b * y[0]) / det,
        ];
        let alpha = st.dual_coefficients().unwrap();
        assert_relative_eq!(alpha[0], want[0], max_relative = 1e-13);
        assert_relative_eq!(alpha[1], want[1], max_relative = 1e-13);
        assert_relative_eq!(st.log_det(), det.ln(), max_relative = 1e-13);
    }

    #[test]
    fn prefix_coefficients_match_fresh_state() {
        let kernel = KernelSpec::spline(2.0).unwrap();
        let xs = [0.11, 0.52, 0.73, 0.31, 0.95, 0.08];
        let ys = [0.4, -1.2, 0.3, 2.0, -0.7, 1.1];
        let mut full = SolverState::new(kernel, 0.3).unwrap();
        for (&x, &y) in xs.iter().zip(&ys) {
            full.extend(x, y).unwrap();
        }
        for t in 1..=xs.len() {
            let mut fresh = SolverState::new(kernel, 0.3).unwrap();
            for i in 0..t {
                fresh.extend(xs[i], ys[i]).unwrap();
            }
            let a = full.dual_coefficients_at(t).unwrap();
            let b = fresh.dual_coefficients().unwrap();
            for (u, v) in a.iter().zip(&b) {
                // Same operations in the same order: bitwise equal.
                assert_eq!(u.to_bits(), v.to_bits(), "prefix {t}");
            }
        }
    }

    #[test]
    fn duplicate_point_is_singular_only_at_zero_shift() {
        let kernel = unit_kernel();
        let mut unshifted = SolverState::new(kernel, 0.0).unwrap();
        unshifted.extend(0.4, 1.0).unwrap();
        match unshifted.extend(0.4, 1.0) {
            Err(Error::SingularExtension { step: 1, .. }) => {}
            other => panic!("expected singular extension, got {other:?}"),
        }

        // With shift s the duplicate keeps leverage d = a·s/(a+s), a = k(x,x):
        // it vanishes only as s → 0.
        let s = 1e-3;
        let mut shifted = SolverState::new(kernel, s).unwrap();
        shifted.extend(0.4, 1.0).unwrap();
        let ext = shifted.extend(0.4, 1.0).unwrap();
        assert_relative_eq!(ext.d, s / (1.0 + s), max_relative = 1e-10);
    }

    #[test]
    fn empty_and_out_of_range_prefixes_error() {
        let s = SolverState::new(unit_kernel(), 1.0).unwrap();
        assert!(matches!(s.dual_coefficients(), Err(Error::EmptySolver)));
        assert!(matches!(
            s.dual_coefficients_at(1),
            Err(Error::PrefixOutOfRange { .. })
        ));
        assert!(SolverState::new(unit_kernel(), -0.1).is_err());
    }

    #[test]
    fn min_norm_on_duplicates_splits_mass() {
        // Two identical points: K = c·[[1,1],[1,1]], y = (y₀, y₀). The
        // minimum-norm dual splits evenly: α = y₀/(2c) each.
        let kernel = KernelSpec::spline(2.0).unwrap();
        let g = kernel.gram(&[0.4, 0.4]).unwrap();
        let c = g[(0, 0)];
        let alpha = min_norm_solve(&g, &[3.0, 3.0], DEFAULT_PINV_REL_TOL).unwrap();
        assert_relative_eq!(alpha[0], 3.0 / (2.0 * c), max_relative = 1e-12);
        assert_relative_eq!(alpha[1], 3.0 / (2.0 * c), max_relative = 1e-12);
    }

    #[test]
    fn min_norm_matches_exact_solve_when_invertible() {
        let kernel = KernelSpec::spline(2.0).unwrap();
        let pts = [0.05, 0.35, 0.62, 0.88];
        let ys = [1.0, 0.5, -0.25, 2.0];
        let g = kernel.gram(&pts).unwrap();
        let alpha = min_norm_solve(&g, &ys, DEFAULT_PINV_REL_TOL).unwrap();
        let exact = g
            .clone()
            .lu()
            .solve(&DVector::from_column_slice(&ys))
            .unwrap();
        for i in 0..4 {
            assert_relative_eq!(alpha[i], exact[i], max_relative = 1e-8);
        }
    }

    #[test]
    fn min_norm_rejects_bad_shapes() {
        let g = DMatrix::<f64>::zeros(0, 0);
        assert!(min_norm_solve(&g, &[], 1e-10).is_err());
        let g = DMatrix::<f64>::identity(2, 2);
        assert!(min_norm_solve(&g, &[1.0], 1e-10).is_err());
        assert!(min_norm_solve(&g, &[1.0, 2.0], -1.0).is_err());
    }

    #[test]
    fn log_det_ratio_basics() {
        // Identity gram, n = 2, λ = 0.5: 2·ln(1 + 1/(0.5·2)) = 2 ln 2.
        let g = DMatrix::<f64>::identity(2, 2);
        let r = log_det_ratio(&g, 0.5, 2).unwrap();
        assert_relative_eq!(r.logdet_ratio, 2.0 * 2.0_f64.ln(), max_relative = 1e-14);
        assert!(log_det_ratio(&g, 0.0, 2).is_err());
        assert!(log_det_ratio(&g, -1.0, 2).is_err());
        assert!(log_det_ratio(&DMatrix::zeros(0, 0), 0.5, 2).is_err());
    }
}
