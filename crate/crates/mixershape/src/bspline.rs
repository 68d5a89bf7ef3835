//! Periodic cubic B-spline curves on uniform knots over [0, 2*pi) and least
//! squares projection onto the spline space.
//!
//! The basis is the set of n_B shifted periodic cubic B-splines B_i with
//! support [x_i, x_{i+4}) on the uniform knots x_j = j * (2*pi / n_B).
//! Projection solves the Gram system <r_B, B_i> = <f, B_i>, a symmetric
//! cyclic system with seven diagonals that is assembled and factorized once
//! per projector and reused across evaluations.

use std::f64::consts::TAU;

use nalgebra::{DMatrix, DVector};
use thiserror::Error;

use crate::quad;

/// Largest basis count for which the dense Gram factorization is accepted.
pub const MAX_BASIS: usize = 1024;

/// Default Gauss-Legendre points per knot interval for Gram and right-hand
/// side assembly.
pub const DEFAULT_POINTS_PER_INTERVAL: usize = 8;

#[derive(Debug, Error)]
pub enum SplineError {
    #[error("need at least 8 basis functions, got {0}")]
    TooFewBasis(usize),
    #[error("dense Gram factorization supports at most {MAX_BASIS} basis functions, got {0}")]
    TooManyBasis(usize),
    #[error("need at least 4 quadrature points per knot interval, got {0}")]
    TooFewQuadraturePoints(usize),
    #[error("Gram system is singular")]
    SingularGram,
}

/// Values of the four nonzero cubic segments at local coordinate t in [0, 1].
///
/// Segment m is the restriction of basis function B_{j-m} to knot interval j.
fn segment_values(t: f64) -> [f64; 4] {
    let t2 = t * t;
    let t3 = t2 * t;
    let omt = 1.0 - t;
    [
        t3 / 6.0,
        (1.0 + 3.0 * t + 3.0 * t2 - 3.0 * t3) / 6.0,
        (4.0 - 6.0 * t2 + 3.0 * t3) / 6.0,
        omt * omt * omt / 6.0,
    ]
}

/// Knot interval index and local coordinate of x on the periodic grid.
fn locate(n_basis: usize, x: f64) -> (usize, f64) {
    let delta = TAU / n_basis as f64;
    let wrapped = x.rem_euclid(TAU);
    let mut j = (wrapped / delta) as usize;
    if j >= n_basis {
        j = n_basis - 1;
    }
    (j, wrapped / delta - j as f64)
}

/// Value of the single periodic basis function B_i at x.
pub fn basis_value(n_basis: usize, i: usize, x: f64) -> f64 {
    let (j, t) = locate(n_basis, x);
    let m = (j + n_basis - i % n_basis) % n_basis;
    if m < 4 {
        segment_values(t)[m]
    } else {
        0.0
    }
}

/// A periodic cubic spline curve given by basis coefficients.
#[derive(Clone, Debug, PartialEq)]
pub struct BSplineCurve {
    coeffs: Vec<f64>,
}

impl BSplineCurve {
    pub fn new(coeffs: Vec<f64>) -> Result<Self, SplineError> {
        if coeffs.len() < 8 {
            return Err(SplineError::TooFewBasis(coeffs.len()));
        }
        Ok(Self { coeffs })
    }

    pub fn coeffs(&self) -> &[f64] {
        &self.coeffs
    }

    pub fn num_basis(&self) -> usize {
        self.coeffs.len()
    }

    /// Spline value at x, periodic with period 2*pi.
    pub fn eval(&self, x: f64) -> f64 {
        let n = self.coeffs.len();
        let (j, t) = locate(n, x);
        let seg = segment_values(t);
        let mut value = 0.0;
        for (m, s) in seg.iter().enumerate() {
            value += self.coeffs[(j + n - m) % n] * s;
        }
        value
    }
}

/// L2 projector onto the periodic cubic spline space with n_basis knots.
///
/// Construction assembles and factorizes the Gram matrix; the factorization
/// is reused by every [`SplineProjector::project`] call.
pub struct SplineProjector {
    n_basis: usize,
    points_per_interval: usize,
    unit_rule: Vec<(f64, f64)>,
    gram_lu: nalgebra::linalg::LU<f64, nalgebra::Dyn, nalgebra::Dyn>,
}

impl SplineProjector {
    pub fn new(n_basis: usize, points_per_interval: usize) -> Result<Self, SplineError> {
        if n_basis < 8 {
            return Err(SplineError::TooFewBasis(n_basis));
        }
        if n_basis > MAX_BASIS {
            return Err(SplineError::TooManyBasis(n_basis));
        }
        if points_per_interval < 4 {
            return Err(SplineError::TooFewQuadraturePoints(points_per_interval));
        }
        let unit_rule = quad::gauss_legendre_on(0.0, 1.0, points_per_interval);
        let delta = TAU / n_basis as f64;
        let mut gram = DMatrix::<f64>::zeros(n_basis, n_basis);
        for j in 0..n_basis {
            for &(t, w) in &unit_rule {
                let seg = segment_values(t);
                for (m1, s1) in seg.iter().enumerate() {
                    let row = (j + n_basis - m1) % n_basis;
                    for (m2, s2) in seg.iter().enumerate() {
                        let col = (j + n_basis - m2) % n_basis;
                        gram[(row, col)] += delta * w * s1 * s2;
                    }
                }
            }
        }
        let gram_lu = gram.lu();
        if !gram_lu.is_invertible() {
            return Err(SplineError::SingularGram);
        }
        Ok(Self {
            n_basis,
            points_per_interval,
            unit_rule,
            gram_lu,
        })
    }

    pub fn num_basis(&self) -> usize {
        self.n_basis
    }

    pub fn points_per_interval(&self) -> usize {
        self.points_per_interval
    }

    /// Inner products <f, B_i> for all basis functions, by composite
    /// Gauss-Legendre quadrature over the knot intervals.
    pub fn inner_products(&self, f: &dyn Fn(f64) -> f64) -> Vec<f64> {
        let n = self.n_basis;
        let delta = TAU / n as f64;
        let mut rhs = vec![0.0; n];
        for j in 0..n {
            for &(t, w) in &self.unit_rule {
                let x = (j as f64 + t) * delta;
                let fw = delta * w * f(x);
                let seg = segment_values(t);
                for (m, s) in seg.iter().enumerate() {
                    rhs[(j + n - m) % n] += fw * s;
                }
            }
        }
        rhs
    }

    /// L2 projection of f onto the spline space.
    pub fn project(&self, f: &dyn Fn(f64) -> f64) -> Result<BSplineCurve, SplineError> {
        let rhs = DVector::from_vec(self.inner_products(f));
        let coeffs = self.gram_lu.solve(&rhs).ok_or(SplineError::SingularGram)?;
        BSplineCurve::new(coeffs.as_slice().to_vec())
    }
}

/// One-shot projection: build a projector for n_basis knots and project f.
pub fn project_to_bspline(
    f: &dyn Fn(f64) -> f64,
    n_basis: usize,
    points_per_interval: usize,
) -> Result<BSplineCurve, SplineError> {
    SplineProjector::new(n_basis, points_per_interval)?.project(f)
}

/// L2 distance between f and the spline curve over [0, 2*pi), evaluated by
/// 16-point Gauss-Legendre quadrature per knot interval.
pub fn l2_error(f: &dyn Fn(f64) -> f64, curve: &BSplineCurve) -> f64 {
    let n = curve.num_basis();
    let delta = TAU / n as f64;
    let rule = quad::gauss_legendre_on(0.0, 1.0, 16);
    let mut sum = 0.0;
    for j in 0..n {
        for &(t, w) in &rule {
            let x = (j as f64 + t) * delta;
            let d = f(x) - curve.eval(x);
            sum += delta * w * d * d;
        }
    }
    sum.sqrt()
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;
    use proptest::prelude::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;
    use rand_distr::{Distribution, StandardNormal};

    /// Cox-de Boor recursion for B_{i,p} on the integer knots 0, 1, 2, ...
    fn cox_de_boor(u: f64, i: usize, p: usize) -> f64 {
        if p == 0 {
            return if i as f64 <= u && u < (i + 1) as f64 {
                1.0
            } else {
                0.0
            };
        }
        let pf = p as f64;
        let left = (u - i as f64) / pf * cox_de_boor(u, i, p - 1);
        let right = ((i + p + 1) as f64 - u) / pf * cox_de_boor(u, i + 1, p - 1);
        left + right
    }

    /// Random mean-free trig polynomial with decaying mode amplitudes,
    /// mimicking a smooth boundary perturbation.
    fn random_smooth_function(seed: u64, modes: usize, s: f64) -> impl Fn(f64) -> f64 {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut coeffs = Vec::with_capacity(2 * modes);
        for k in 1..=modes {
            let scale = (k as f64).powf(-s - 0.5);
            let a: f64 = StandardNormal.sample(&mut rng);
            let b: f64 = StandardNormal.sample(&mut rng);
            coeffs.push(a * scale);
            coeffs.push(b * scale);
        }
        move |x: f64| {
            let mut sum = 0.0;
            for k in 1..=modes {
                let kx = k as f64 * x;
                sum += coeffs[2 * k - 2] * kx.cos() + coeffs[2 * k - 1] * kx.sin();
            }
            sum
        }
    }

    #[test]
    fn segments_match_cox_de_boor() {
        let n = 16;
        let delta = TAU / n as f64;
        for step in 0..200 {
            let x = step as f64 * TAU / 200.0 + 1e-9;
            let (j, t) = locate(n, x);
            let seg = segment_values(t);
            for m in 0..4 {
                // B_{j-m} on knots (j-m)..(j-m+4), shifted to integer knots.
                let u = x / delta - (j as f64 - m as f64);
                assert_relative_eq!(seg[m], cox_de_boor(u, 0, 3), epsilon = 1e-12);
            }
        }
    }

    #[test]
    fn constant_is_reproduced_exactly() {
        let projector = SplineProjector::new(24, 8).unwrap();
        let curve = projector.project(&|_| 2.5).unwrap();
        for c in curve.coeffs() {
            assert_relative_eq!(*c, 2.5, epsilon = 1e-10);
        }
        assert!(l2_error(&|_| 2.5, &curve) < 1e-10);
    }

    #[test]
    fn all_ones_evaluates_to_one() {
        let curve = BSplineCurve::new(vec![1.0; 12]).unwrap();
        for step in 0..50 {
            let x = step as f64 * TAU / 50.0;
            assert_relative_eq!(curve.eval(x), 1.0, epsilon = 1e-13);
        }
    }

    #[test]
    fn functions_in_the_spline_space_are_reproduced() {
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        let coeffs: Vec<f64> = (0..16).map(|_| StandardNormal.sample(&mut rng)).collect();
        let curve = BSplineCurve::new(coeffs.clone()).unwrap();
        let projector = SplineProjector::new(16, 8).unwrap();
        let reproduced = projector.project(&|x| curve.eval(x)).unwrap();
        for (a, b) in coeffs.iter().zip(reproduced.coeffs()) {
            assert!((a - b).abs() < 1e-10, "coefficient drift {}", (a - b).abs());
        }
        assert!(l2_error(&|x| curve.eval(x), &reproduced) < 1e-10);
    }

    #[test]
    fn cosine_projection_is_accurate_at_production_resolution() {
        let projector = SplineProjector::new(160, 8).unwrap();
        let curve = projector.project(&|x| x.cos()).unwrap();
        assert!(l2_error(&|x| x.cos(), &curve) <= 1e-5);
        assert!((curve.eval(0.0) - 1.0).abs() <= 1e-4);
    }

    #[test]
    fn cosine_projection_error_decreases_with_refinement() {
        let coarse = project_to_bspline(&|x| x.cos(), 20, 8).unwrap();
        let fine = project_to_bspline(&|x| x.cos(), 160, 8).unwrap();
        let coarse_err = l2_error(&|x| x.cos(), &coarse);
        let fine_err = l2_error(&|x| x.cos(), &fine);
        assert!(coarse_err > fine_err);
        // Quartic convergence gives a factor near 8^4 between these levels.
        assert!(coarse_err / fine_err > 100.0);
    }

    #[test]
    fn projection_error_non_increasing_under_knot_doubling() {
        for seed in 0..10 {
            let f = random_smooth_function(seed, 40, 1.25);
            let mut previous = f64::INFINITY;
            for n_basis in [16, 32, 64, 128] {
                let curve = project_to_bspline(&f, n_basis, 8).unwrap();
                let err = l2_error(&f, &curve);
                assert!(
                    err <= previous * (1.0 + 1e-9),
                    "error grew from {previous} to {err} at n_basis = {n_basis}, seed {seed}"
                );
                previous = err;
            }
        }
    }

    #[test]
    fn projection_residuals_are_orthogonal() {
        let f = random_smooth_function(3, 30, 1.25);
        let projector = SplineProjector::new(40, 8).unwrap();
        let curve = projector.project(&f).unwrap();
        // Recompute the inner products with a finer rule than the projector
        // used, so the check is independent of the assembly quadrature.
        let fine = SplineProjector::new(40, 24).unwrap();
        let residual = fine.inner_products(&|x| f(x) - curve.eval(x));
        let scale = fine
            .inner_products(&f)
            .iter()
            .fold(0.0f64, |m, v| m.max(v.abs()))
            .max(1e-30);
        for r in residual {
            assert!(
                r.abs() <= 1e-10 * scale.max(1.0),
                "residual {} exceeds tolerance",
                r.abs()
            );
        }
    }

    #[test]
    fn projector_validates_inputs() {
        assert!(matches!(
            SplineProjector::new(4, 8),
            Err(SplineError::TooFewBasis(4))
        ));
        assert!(matches!(
            SplineProjector::new(2048, 8),
            Err(SplineError::TooManyBasis(2048))
        ));
        assert!(matches!(
            SplineProjector::new(16, 2),
            Err(SplineError::TooFewQuadraturePoints(2))
        ));
    }

    proptest! {
        #[test]
        fn partition_of_unity(x in -10.0..10.0f64) {
            let n = 12;
            let total: f64 = (0..n).map(|i| basis_value(n, i, x)).sum();
            prop_assert!((total - 1.0).abs() < 1e-12);
        }

        #[test]
        fn eval_is_periodic(x in 0.0..TAU) {
            let curve = BSplineCurve::new(
                (0..10).map(|i| (i as f64 * 0.7).sin()).collect()
            ).unwrap();
            prop_assert!((curve.eval(x) - curve.eval(x + TAU)).abs() < 1e-12);
        }
    }
}
