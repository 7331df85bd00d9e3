//! Wendland C2 kernel in two dimensions and the gradient-correction
//! (renormalization) matrix used by the solid solver.
//!
//! With `q = r / h` the kernel is
//!
//! ```text
//! W(q) = alpha_d (q + 0.5) (2 - q)^4     for q <= 2
//! W(q) = 0                               otherwise
//! alpha_d = 7 / (32 pi h^2)
//! ```
//!
//! Gradients follow the convention `grad_i W(x_i - x_j)`, i.e. the gradient
//! with respect to the position of the first particle of the pair.

use std::f64::consts::PI;

use nalgebra::{Matrix2, Vector2};

use crate::error::{Result, SimError};

/// Threshold on the 2-norm condition number of the moment matrix above which
/// a stencil is declared degenerate.
pub const MAX_CONDITION_NUMBER: f64 = 1e8;

/// Smoothing length and derived constants of the 2D Wendland C2 kernel.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct KernelSpec {
    h: f64,
    alpha_d: f64,
    support_radius: f64,
}

impl KernelSpec {
    pub fn new(h: f64) -> Result<Self> {
        if !(h > 0.0) || !h.is_finite() {
            return Err(SimError::InvalidInput(format!(
                "smoothing length must be positive and finite, got {h}"
            )));
        }
        Ok(Self {
            h,
            alpha_d: 7.0 / (32.0 * PI * h * h),
            support_radius: 2.0 * h,
        })
    }

    #[inline]
    pub fn h(&self) -> f64 {
        self.h
    }

    #[inline]
    pub fn alpha_d(&self) -> f64 {
        self.alpha_d
    }

    #[inline]
    pub fn support_radius(&self) -> f64 {
        self.support_radius
    }

    /// Kernel value at distance `r` (no sign check; `r` is a distance).
    #[inline]
    pub fn value_at(&self, r: f64) -> f64 {
        let q = r / self.h;
        if q > 2.0 {
            return 0.0;
        }
        let t = 2.0 - q;
        let t2 = t * t;
        self.alpha_d * (q + 0.5) * t2 * t2
    }

    /// Gradient `grad_i W` for the displacement `rij = x_i - x_j`.
    ///
    /// `dW/dq = -5 alpha_d q (2 - q)^3`, so the gradient simplifies to
    /// `-5 alpha_d (2 - q)^3 rij / h^2`, which is zero at `rij = 0`.
    #[inline]
    pub fn gradient(&self, rij: Vector2<f64>) -> Vector2<f64> {
        let r2 = rij.norm_squared();
        if r2 >= self.support_radius * self.support_radius {
            return Vector2::zeros();
        }
        let q = r2.sqrt() / self.h;
        let t = 2.0 - q;
        rij * (-5.0 * self.alpha_d * t * t * t / (self.h * self.h))
    }

    /// Value and gradient in one pass, with `r = |rij|` supplied by the caller.
    #[inline]
    pub fn value_and_gradient(&self, rij: Vector2<f64>, r: f64) -> (f64, Vector2<f64>) {
        let q = r / self.h;
        if q >= 2.0 {
            return (0.0, Vector2::zeros());
        }
        let t = 2.0 - q;
        let t3 = t * t * t;
        let w = self.alpha_d * (q + 0.5) * t3 * t;
        (w, rij * (-5.0 * self.alpha_d * t3 / (self.h * self.h)))
    }
}

/// `W(q)` for a normalized distance `q >= 0`.
pub fn kernel_value(q: f64, spec: &KernelSpec) -> Result<f64> {
    if !(q >= 0.0) {
        return Err(SimError::InvalidInput(format!(
            "normalized distance must be non-negative, got {q}"
        )));
    }
    Ok(spec.value_at(q * spec.h()))
}

/// `grad_i W(|r_ij| / h)`; zero outside the support and at `r_ij = 0`.
pub fn kernel_gradient(rij: Vector2<f64>, spec: &KernelSpec) -> Vector2<f64> {
    spec.gradient(rij)
}

/// One neighbor's contribution to a corrected-gradient stencil.
#[derive(Clone, Copy, Debug)]
pub struct StencilTerm {
    /// Effective volume `f_ij m_j / rho_j`; broken bonds carry zero.
    pub volume: f64,
    /// `x_i - x_j`.
    pub rij: Vector2<f64>,
    /// Uncorrected `grad_i W_ij`.
    pub grad: Vector2<f64>,
}

/// Renormalization matrix `B` of one particle.
///
/// The moment matrix is assembled as `A = -sum_j V_j gradW_ij (x) x_ij` and
/// `B = A^-1`, so that `B gradW_ij` reproduces the gradient of any linear
/// field exactly: `-sum_j V_j (phi_i - phi_j) B gradW_ij = grad phi`.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct CorrectionMatrix {
    pub b: Matrix2<f64>,
    /// Set when the moment matrix was singular or ill-conditioned and the
    /// identity was substituted.
    pub degenerate: bool,
}

impl Default for CorrectionMatrix {
    fn default() -> Self {
        Self {
            b: Matrix2::identity(),
            degenerate: false,
        }
    }
}

impl CorrectionMatrix {
    /// Identity, flagged as a fallback.
    pub fn fallback() -> Self {
        Self {
            b: Matrix2::identity(),
            degenerate: true,
        }
    }

    #[inline]
    pub fn correct(&self, grad: Vector2<f64>) -> Vector2<f64> {
        self.b * grad
    }
}

/// Moment matrix `A = -sum_j V_j gradW_ij (x) x_ij`.
pub fn moment_matrix<I>(terms: I) -> Matrix2<f64>
where
    I: IntoIterator<Item = StencilTerm>,
{
    let mut a = Matrix2::zeros();
    for t in terms {
        a -= t.volume * t.grad * t.rij.transpose();
    }
    a
}

/// 2-norm condition number of a 2x2 matrix (infinite when singular).
pub fn condition_number(a: &Matrix2<f64>) -> f64 {
    // singular values from the eigenvalues of A^T A
    let ata = a.transpose() * a;
    let tr = ata.trace();
    let det = ata.determinant();
    let disc = (0.25 * tr * tr - det).max(0.0).sqrt();
    let s_max2 = 0.5 * tr + disc;
    let s_min2 = 0.5 * tr - disc;
    if !(s_min2 > 0.0) || !s_max2.is_finite() {
        return f64::INFINITY;
    }
    (s_max2 / s_min2).sqrt()
}

/// Correction matrix from an already assembled moment matrix.
pub fn correction_from_moment(a: &Matrix2<f64>) -> CorrectionMatrix {
    if condition_number(a) > MAX_CONDITION_NUMBER {
        return CorrectionMatrix::fallback();
    }
    match a.try_inverse() {
        Some(b) if b.iter().all(|v| v.is_finite()) => CorrectionMatrix {
            b,
            degenerate: false,
        },
        _ => CorrectionMatrix::fallback(),
    }
}

/// Correction matrix for particle `i` from its (bonded) stencil.
///
/// An empty stencil, a singular moment matrix, or a condition number above
/// [`MAX_CONDITION_NUMBER`] yields the identity with `degenerate` set.
pub fn correction_matrix<I>(terms: I) -> CorrectionMatrix
where
    I: IntoIterator<Item = StencilTerm>,
{
    correction_from_moment(&moment_matrix(terms))
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    fn unit() -> KernelSpec {
        KernelSpec::new(1.0).unwrap()
    }

    #[test]
    fn rejects_bad_inputs() {
        assert!(KernelSpec::new(0.0).is_err());
        assert!(KernelSpec::new(-1.0).is_err());
        assert!(kernel_value(-0.1, &unit()).is_err());
    }

    #[test]
    fn kernel_reference_values() {
        let k = unit();
        assert_eq!(kernel_value(2.0, &k).unwrap(), 0.0);
        assert_eq!(kernel_value(2.5, &k).unwrap(), 0.0);
        // alpha_d * 0.5 * 2^4 = 7/(4 pi)
        assert_relative_eq!(
            kernel_value(0.0, &k).unwrap(),
            7.0 / (4.0 * PI),
            max_relative = 1e-14
        );
        assert_relative_eq!(kernel_value(0.0, &k).unwrap(), 0.557042, epsilon = 1e-6);
        // alpha_d * 1.5 * 1
        assert_relative_eq!(
            kernel_value(1.0, &k).unwrap(),
            10.5 / (32.0 * PI),
            max_relative = 1e-14
        );
        assert_relative_eq!(kernel_value(1.0, &k).unwrap(), 0.10445, epsilon = 1e-5);
    }

    #[test]
    fn gradient_reference_values() {
        let k = unit();
        assert_eq!(kernel_gradient(Vector2::zeros(), &k), Vector2::zeros());
        let g = kernel_gradient(Vector2::new(1.0, 0.0), &k);
        assert_relative_eq!(g.x, -5.0 * k.alpha_d(), max_relative = 1e-14);
        assert_relative_eq!(g.x, -0.348151, epsilon = 1e-6);
        assert_eq!(g.y, 0.0);
        assert_eq!(kernel_gradient(Vector2::new(2.0, 0.0), &k), Vector2::zeros());
    }

    #[test]
    fn gradient_matches_finite_difference() {
        let k = KernelSpec::new(0.013).unwrap();
        let eps = 1e-8;
        for &(x, y) in &[(0.004, 0.001), (-0.01, 0.007), (0.02, -0.003), (0.0001, 0.0)] {
            let r = Vector2::new(x, y);
            let g = k.gradient(r);
            let fd_x = (k.value_at((r + Vector2::new(eps, 0.0)).norm())
                - k.value_at((r - Vector2::new(eps, 0.0)).norm()))
                / (2.0 * eps);
            let fd_y = (k.value_at((r + Vector2::new(0.0, eps)).norm())
                - k.value_at((r - Vector2::new(0.0, eps)).norm()))
                / (2.0 * eps);
            let scale = g.norm().max(1.0);
            assert!((g.x - fd_x).abs() < 1e-5 * scale, "{} vs {}", g.x, fd_x);
            assert!((g.y - fd_y).abs() < 1e-5 * scale, "{} vs {}", g.y, fd_y);
        }
    }

    #[test]
    fn c1_at_support_edge() {
        let k = unit();
        let below = 2.0 - 1e-6;
        assert!(k.value_at(below) < 1e-20);
        assert!(k.gradient(Vector2::new(below, 0.0)).norm() < 1e-15);
    }

    #[test]
    fn value_and_gradient_agree_with_separate_calls() {
        let k = KernelSpec::new(0.7).unwrap();
        let r = Vector2::new(0.3, -0.5);
        let (w, g) = k.value_and_gradient(r, r.norm());
        assert_relative_eq!(w, k.value_at(r.norm()), max_relative = 1e-14);
        assert_relative_eq!(g, k.gradient(r), max_relative = 1e-14);
    }

    fn lattice_stencil(dp: f64, k: &KernelSpec, offsets: &[(i32, i32)]) -> Vec<StencilTerm> {
        offsets
            .iter()
            .map(|&(a, b)| {
                // x_i at origin, x_j at (a, b) dp
                let rij = Vector2::new(-(a as f64) * dp, -(b as f64) * dp);
                StencilTerm {
                    volume: dp * dp,
                    rij,
                    grad: k.gradient(rij),
                }
            })
            .collect()
    }

    fn corrected_gradient_of(terms: &[StencilTerm], c: &CorrectionMatrix, g: Vector2<f64>) -> Vector2<f64> {
        // phi(x) = g . x with x_i = 0, so phi_i - phi_j = g . rij
        let mut out = Vector2::zeros();
        for t in terms {
            out -= t.volume * g.dot(&t.rij) * c.correct(t.grad);
        }
        out
    }

    const INTERIOR: [(i32, i32); 8] = [(-1, -1), (0, -1), (1, -1), (-1, 0), (1, 0), (-1, 1), (0, 1), (1, 1)];
    const EDGE: [(i32, i32); 5] = [(-1, 0), (1, 0), (-1, 1), (0, 1), (1, 1)];
    const CORNER: [(i32, i32); 3] = [(1, 0), (0, 1), (1, 1)];

    #[test]
    fn interior_stencil_inverse_and_linear_reproduction() {
        let dp = 0.01;
        let k = KernelSpec::new(1.5 * dp).unwrap();
        let terms = lattice_stencil(dp, &k, &INTERIOR);
        let a = moment_matrix(terms.iter().copied());
        let c = correction_from_moment(&a);
        assert!(!c.degenerate);
        assert!((a * c.b - Matrix2::identity()).norm() < 1e-12);
        let g = corrected_gradient_of(&terms, &c, Vector2::new(1.0, 0.0));
        assert!((g - Vector2::new(1.0, 0.0)).norm() < 1e-10);
    }

    #[test]
    fn truncated_stencils_reproduce_linear_fields() {
        let dp = 0.05;
        let k = KernelSpec::new(1.5 * dp).unwrap();
        for offsets in [&EDGE[..], &CORNER[..]] {
            let terms = lattice_stencil(dp, &k, offsets);
            let c = correction_matrix(terms.iter().copied());
            assert!(!c.degenerate);
            for g in [Vector2::new(1.0, 0.0), Vector2::new(0.0, 1.0), Vector2::new(-2.5, 0.75)] {
                let est = corrected_gradient_of(&terms, &c, g);
                assert!((est - g).norm() < 1e-10, "{est:?} vs {g:?}");
            }
        }
    }

    #[test]
    fn collinear_stencil_falls_back_to_identity() {
        let dp = 0.01;
        let k = KernelSpec::new(1.5 * dp).unwrap();
        let terms = lattice_stencil(dp, &k, &[(1, 0), (-1, 0), (2, 0)]);
        let c = correction_matrix(terms);
        assert!(c.degenerate);
        assert_eq!(c.b, Matrix2::identity());
        let empty = correction_matrix(std::iter::empty());
        assert!(empty.degenerate);
    }

    #[test]
    fn partition_of_unity_on_lattice_interior() {
        let dp = 0.02;
        let k = KernelSpec::new(1.5 * dp).unwrap();
        let mut sum = 0.0;
        for a in -4..=4 {
            for b in -4..=4 {
                let r = ((a * a + b * b) as f64).sqrt() * dp;
                sum += dp * dp * k.value_at(r);
            }
        }
        assert!((sum - 1.0).abs() < 1e-2, "sum = {sum}");
    }

    mod props {
        use super::*;
        use proptest::prelude::*;

        proptest! {
            #[test]
            fn gradient_is_antisymmetric(x in -3.0f64..3.0, y in -3.0f64..3.0, h in 0.1f64..2.0) {
                let k = KernelSpec::new(h).unwrap();
                let r = Vector2::new(x, y);
                prop_assert_eq!(k.gradient(r), -k.gradient(-r));
            }

            #[test]
            fn kernel_is_non_negative_and_compact(q in 0.0f64..4.0) {
                let k = KernelSpec::new(1.0).unwrap();
                let w = kernel_value(q, &k).unwrap();
                prop_assert!(w >= 0.0);
                if q >= 2.0 { prop_assert_eq!(w, 0.0); }
            }

            #[test]
            fn corrected_gradient_exact_on_random_stencils(
                pts in proptest::collection::vec((-1.4f64..1.4, -1.4f64..1.4, 0.5f64..1.5), 3..12),
                gx in -5.0f64..5.0, gy in -5.0f64..5.0,
            ) {
                let k = KernelSpec::new(1.0).unwrap();
                let terms: Vec<StencilTerm> = pts.iter().map(|&(x, y, v)| {
                    let rij = Vector2::new(x, y);
                    StencilTerm { volume: v, rij, grad: k.gradient(rij) }
                }).collect();
                let c = correction_matrix(terms.iter().copied());
                prop_assume!(!c.degenerate && condition_number(&moment_matrix(terms.iter().copied())) < 1e4);
                let g = Vector2::new(gx, gy);
                let est = corrected_gradient_of(&terms, &c, g);
                prop_assert!((est - g).norm() < 1e-10 * (1.0 + g.norm()));
            }
        }
    }
}
