//! Sparse linear system assembly and direct solution.
//!
//! Both field solvers build their discrete operators as triplet streams and
//! hand them to [`LinearSystem`], which eliminates Dirichlet constraints at
//! the triplet level (constrained rows are dropped, constrained columns are
//! folded into the right hand side, and an identity row pins each constrained
//! unknown to its boundary value), factors the remaining matrix with a sparse
//! LU, applies one step of iterative refinement, and verifies the relative
//! residual before returning.

use faer::prelude::*;
use faer::sparse::{SparseColMat, Triplet};
use std::sync::Once;
use thiserror::Error;

/// Relative residual bound enforced after refinement.
const RESIDUAL_TOL: f64 = 1e-10;

static FAER_MODE: Once = Once::new();

/// Pin faer to sequential execution so factorizations are bit-reproducible
/// regardless of how many chains run concurrently.
fn ensure_deterministic_backend() {
    FAER_MODE.call_once(|| faer::set_global_parallelism(faer::Par::Seq));
}

/// Failure modes shared by the flow and transport solvers.
#[derive(Debug, Error)]
pub enum SolveError {
    /// The factorization failed or the solution did not satisfy the system.
    #[error("linear solver failure: {0}")]
    SolverFailure(String),
    /// Two fields that must live on the same mesh do not.
    #[error("fields belong to different meshes")]
    MeshMismatch,
    /// A solver was configured with an out of range parameter.
    #[error("invalid solver parameter: {0}")]
    InvalidParameter(String),
}

/// Triplet accumulator for a square sparse system with a dense right hand side.
pub struct LinearSystem {
    n: usize,
    triplets: Vec<Triplet<usize, usize, f64>>,
    rhs: Vec<f64>,
}

impl LinearSystem {
    #[cfg(test)]
    pub fn new(n: usize) -> Self {
        LinearSystem {
            n,
            triplets: Vec::new(),
            rhs: vec![0.0; n],
        }
    }

    pub fn with_capacity(n: usize, nnz_estimate: usize) -> Self {
        LinearSystem {
            n,
            triplets: Vec::with_capacity(nnz_estimate),
            rhs: vec![0.0; n],
        }
    }

    /// Accumulate `value` at `(row, col)`; duplicate positions are summed.
    #[inline]
    pub fn add(&mut self, row: usize, col: usize, value: f64) {
        debug_assert!(row < self.n && col < self.n);
        if value != 0.0 {
            self.triplets.push(Triplet::new(row, col, value));
        }
    }

    #[inline]
    pub fn add_rhs(&mut self, row: usize, value: f64) {
        self.rhs[row] += value;
    }

    /// Solve the assembled system subject to strong constraints.
    ///
    /// `constraints[i] = Some(g)` fixes unknown `i` to the value `g`; the
    /// corresponding column contributions move to the right hand side so the
    /// reduced system stays symmetric in structure. Constrained entries of
    /// the returned vector are exactly their prescribed values.
    pub fn solve(self, constraints: &[Option<f64>]) -> Result<Vec<f64>, SolveError> {
        assert_eq!(constraints.len(), self.n, "constraint vector length");
        ensure_deterministic_backend();

        let n = self.n;
        let mut rhs = self.rhs;
        let mut kept: Vec<Triplet<usize, usize, f64>> = Vec::with_capacity(self.triplets.len());
        for t in &self.triplets {
            if constraints[t.row].is_some() {
                continue;
            }
            if let Some(g) = constraints[t.col] {
                rhs[t.row] -= t.val * g;
            } else {
                kept.push(*t);
            }
        }
        for (i, c) in constraints.iter().enumerate() {
            if let Some(g) = c {
                kept.push(Triplet::new(i, i, 1.0));
                rhs[i] = *g;
            }
        }

        let matrix = SparseColMat::<usize, f64>::try_new_from_triplets(n, n, &kept)
            .map_err(|e| SolveError::SolverFailure(format!("assembly: {e:?}")))?;
        let lu = matrix
            .sp_lu()
            .map_err(|e| SolveError::SolverFailure(format!("factorization: {e:?}")))?;

        let b = Mat::from_fn(n, 1, |i, _| rhs[i]);
        let mut x = lu.solve(&b);

        // One step of iterative refinement tightens the residual for the
        // penalty saddle systems, which are mildly ill conditioned.
        let ax = &matrix * &x;
        let residual = Mat::from_fn(n, 1, |i, _| b[(i, 0)] - ax[(i, 0)]);
        let dx = lu.solve(&residual);
        for i in 0..n {
            x[(i, 0)] += dx[(i, 0)];
        }

        // Re-impose constrained values bitwise; refinement keeps them very
        // close but strong boundary data must be exact.
        for (i, c) in constraints.iter().enumerate() {
            if let Some(g) = c {
                x[(i, 0)] = *g;
            }
        }

        let ax = &matrix * &x;
        let mut res_sq = 0.0;
        let mut rhs_sq = 0.0;
        for i in 0..n {
            let r = b[(i, 0)] - ax[(i, 0)];
            res_sq += r * r;
            rhs_sq += b[(i, 0)] * b[(i, 0)];
        }
        let scale = rhs_sq.sqrt().max(1e-30);
        let rel = res_sq.sqrt() / scale;
        if !rel.is_finite() || rel > RESIDUAL_TOL {
            return Err(SolveError::SolverFailure(format!(
                "relative residual {rel:.3e} exceeds {RESIDUAL_TOL:.0e}"
            )));
        }

        Ok((0..n).map(|i| x[(i, 0)]).collect())
    }
}
