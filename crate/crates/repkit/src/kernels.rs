//! Operator-valued kernel catalog.
//!
//! Every kernel here is a scalar kernel times the identity on the output
//! space: `K(x, x') = k(x, x') * I_n`. That makes Gram matrices block
//! matrices whose `(i, j)` block is `k(x_i, x_j) * I_n`, and lets learners
//! solve one scalar system for all output coordinates at once.

use crate::solvers::{self, SolverError};
use ndarray::{Array1, Array2};
use serde::{Deserialize, Serialize};
use thiserror::Error;

#[derive(Debug, Error)]
pub enum KernelError {
    #[error("input dimension mismatch: {left} vs {right}")]
    DimensionMismatch { left: usize, right: usize },
    #[error("invalid kernel parameter: {0}")]
    InvalidParameter(String),
    #[error("gram matrix is not positive definite after jitter retry")]
    NotPositiveDefinite(#[source] SolverError),
    #[error("empty point set")]
    EmptyPointSet,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum KernelFamily {
    /// `exp(-||x - x'||^2 / (2 lengthscale^2))`; equals 1 on the diagonal.
    SquaredExponential { lengthscale: f64 },
    /// Plain dot product `<x, x'>`.
    Linear,
    /// `(<x, x'> + offset)^degree` with `degree >= 1`, `offset >= 0`.
    Polynomial { degree: u32, offset: f64 },
}

/// A scalar kernel together with the output dimension it is lifted to.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct KernelSpec {
    pub family: KernelFamily,
    pub output_dim: usize,
}

impl KernelSpec {
    pub fn squared_exponential(lengthscale: f64, output_dim: usize) -> Result<Self, KernelError> {
        if !(lengthscale > 0.0) {
            return Err(KernelError::InvalidParameter(format!(
                "lengthscale must be positive, got {lengthscale}"
            )));
        }
        Self::checked(KernelFamily::SquaredExponential { lengthscale }, output_dim)
    }

    pub fn linear(output_dim: usize) -> Result<Self, KernelError> {
        Self::checked(KernelFamily::Linear, output_dim)
    }

    pub fn polynomial(degree: u32, offset: f64, output_dim: usize) -> Result<Self, KernelError> {
        if degree < 1 {
            return Err(KernelError::InvalidParameter(
                "polynomial degree must be at least 1".into(),
            ));
        }
        if !(offset >= 0.0) {
            return Err(KernelError::InvalidParameter(format!(
                "polynomial offset must be nonnegative, got {offset}"
            )));
        }
        Self::checked(KernelFamily::Polynomial { degree, offset }, output_dim)
    }

    fn checked(family: KernelFamily, output_dim: usize) -> Result<Self, KernelError> {
        if output_dim == 0 {
            return Err(KernelError::InvalidParameter(
                "output dimension must be at least 1".into(),
            ));
        }
        Ok(KernelSpec { family, output_dim })
    }

    /// Scalar kernel value `k(x, x')`.
    pub fn eval(&self, x: &Array1<f64>, y: &Array1<f64>) -> Result<f64, KernelError> {
        if x.len() != y.len() {
            return Err(KernelError::DimensionMismatch {
                left: x.len(),
                right: y.len(),
            });
        }
        Ok(match &self.family {
            KernelFamily::SquaredExponential { lengthscale } => {
                let d2: f64 = x.iter().zip(y.iter()).map(|(a, b)| (a - b) * (a - b)).sum();
                (-d2 / (2.0 * lengthscale * lengthscale)).exp()
            }
            KernelFamily::Linear => x.iter().zip(y.iter()).map(|(a, b)| a * b).sum(),
            KernelFamily::Polynomial { degree, offset } => {
                let dot: f64 = x.iter().zip(y.iter()).map(|(a, b)| a * b).sum();
                (dot + offset).powi(*degree as i32)
            }
        })
    }

    /// Gradient of `k(x, x')` with respect to the first argument.
    pub fn input_gradient(
        &self,
        x: &Array1<f64>,
        y: &Array1<f64>,
    ) -> Result<Array1<f64>, KernelError> {
        let value = self.eval(x, y)?;
        Ok(match &self.family {
            KernelFamily::SquaredExponential { lengthscale } => {
                let scale = value / (lengthscale * lengthscale);
                (y - x).mapv(|d| d * scale)
            }
            KernelFamily::Linear => y.clone(),
            KernelFamily::Polynomial { degree, offset } => {
                let dot: f64 = x.iter().zip(y.iter()).map(|(a, b)| a * b).sum();
                let scale = f64::from(*degree) * (dot + offset).powi(*degree as i32 - 1);
                y.mapv(|b| b * scale)
            }
        })
    }

    /// `m x m` matrix of scalar kernel values over a point set.
    ///
    /// The upper triangle is computed once and mirrored, so the result is
    /// symmetric to the last bit.
    pub fn scalar_gram(&self, points: &[Array1<f64>]) -> Result<Array2<f64>, KernelError> {
        if points.is_empty() {
            return Err(KernelError::EmptyPointSet);
        }
        let m = points.len();
        let mut g = Array2::<f64>::zeros((m, m));
        for i in 0..m {
            for j in i..m {
                let v = self.eval(&points[i], &points[j])?;
                g[(i, j)] = v;
                g[(j, i)] = v;
            }
        }
        Ok(g)
    }

    /// Block Gram matrix of size `n*m x n*m` with `(i, j)` block
    /// `k(x_i, x_j) * I_n`, validated positive definite under the jitter
    /// policy. Returns the (possibly jittered) matrix and whether jitter was
    /// applied.
    pub fn block_gram(&self, points: &[Array1<f64>]) -> Result<(Array2<f64>, bool), KernelError> {
        let scalar = self.scalar_gram(points)?;
        let n = self.output_dim;
        let m = points.len();
        let dim = n * m;
        let mut g = Array2::<f64>::zeros((dim, dim));
        for i in 0..m {
            for j in 0..m {
                let v = scalar[(i, j)];
                for c in 0..n {
                    g[(i * n + c, j * n + c)] = v;
                }
            }
        }
        let fac =
            solvers::spd_cholesky_with_jitter(&g).map_err(KernelError::NotPositiveDefinite)?;
        Ok((fac.matrix, fac.jitter_applied))
    }
}
