use alloc::vec;
use alloc::vec::Vec;

use crate::error::{Error, Result};
use crate::linalg::{build_projection, dot, norm, Matrix, Vector};

/// A linear-equality constraint `Bθ = b` together with its projection data:
/// `P` projects onto `Ker(B)`, `c` is the minimum-norm feasible point and
/// `d = rank(P)`.
#[derive(Debug, Clone, PartialEq)]
pub struct Constraint {
    matrix: Matrix,
    rhs: Vector,
    projection: Matrix,
    offset: Vector,
    rank: usize,
    unconstrained: bool,
}

impl Constraint {
    pub fn new(matrix: Matrix, rhs: Vec<f64>) -> Result<Self> {
        let proj = build_projection(&matrix, &rhs)?;
        let unconstrained = matrix.rows() == 0;
        Ok(Self {
            rhs: Vector::new(rhs)?,
            matrix,
            projection: proj.projection,
            offset: proj.offset,
            rank: proj.rank,
            unconstrained,
        })
    }

    /// No constraint: `P = I`, `c = 0`, `d = p`.
    pub fn unconstrained(p: usize) -> Self {
        Self {
            matrix: Matrix::empty_rows(p),
            rhs: Vector::zeros(0),
            projection: Matrix::identity(p),
            offset: Vector::zeros(p),
            rank: p,
            unconstrained: true,
        }
    }

    pub fn param_dim(&self) -> usize {
        self.matrix.cols()
    }

    pub fn matrix(&self) -> &Matrix {
        &self.matrix
    }

    pub fn rhs(&self) -> &[f64] {
        &self.rhs
    }

    pub fn projection(&self) -> &Matrix {
        &self.projection
    }

    pub fn offset(&self) -> &[f64] {
        &self.offset
    }

    /// `d`, the dimension of the feasible affine set.
    pub fn rank(&self) -> usize {
        self.rank
    }

    /// `p − d`, the number of independent constraints.
    pub fn df(&self) -> usize {
        self.param_dim() - self.rank
    }

    pub fn is_unconstrained(&self) -> bool {
        self.unconstrained
    }

    /// `‖Bθ − b‖`.
    pub fn residual(&self, theta: &[f64]) -> f64 {
        let r: Vec<f64> = (0..self.matrix.rows())
            .map(|i| dot(self.matrix.row(i), theta) - self.rhs[i])
            .collect();
        norm(&r)
    }

    /// Feasibility tolerance `1e-8 · max(1, ‖b‖)`.
    pub fn tolerance(&self) -> f64 {
        1e-8 * self.rhs.norm().max(1.0)
    }

    /// `θ ← c + P(θ − c)`.
    pub fn project(&self, theta: &mut [f64]) {
        let mut scratch = vec![0.0; theta.len()];
        self.project_with(theta, &mut scratch);
    }

    /// Projection using a caller-provided scratch buffer of length `p`.
    pub(crate) fn project_with(&self, theta: &mut [f64], scratch: &mut [f64]) {
        if self.unconstrained {
            return;
        }
        for ((s, &t), &c) in scratch.iter_mut().zip(theta.iter()).zip(self.offset.iter()) {
            *s = t - c;
        }
        for (i, t) in theta.iter_mut().enumerate() {
            *t = self.offset[i] + dot(self.projection.row(i), scratch);
        }
    }

    pub fn check_dim(&self, p: usize) -> Result<()> {
        if self.param_dim() != p {
            return Err(Error::Dimension {
                context: "constraint columns",
                expected: p,
                actual: self.param_dim(),
            });
        }
        Ok(())
    }
}
