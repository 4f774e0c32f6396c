//! Finite-dimensional Hilbert spaces in coordinates.
//!
//! A space is a dimension, a symmetric positive definite Gram matrix, and a
//! shape tag saying how coordinate vectors should be read (plain vectors,
//! row-major flattened matrices under the Frobenius inner product, or
//! coefficient vectors over a kernel dictionary). Subspaces are stored as
//! Gram-orthonormal bases, so projectors and complements come out of plain
//! matrix products.

use crate::kernels::{KernelError, KernelSpec};
use crate::solvers::{self, SolverError};
use ndarray::{Array1, Array2, Axis};
use thiserror::Error;

/// Deflation tolerance for [`orthonormalize`], relative to the largest input
/// vector norm: candidate directions whose residual norm falls below
/// `tol * max_input_norm` are treated as dependent and dropped.
pub const DEFLATION_TOL: f64 = 1e-9;

/// Orthonormality tolerance enforced on stored subspace bases.
pub const ORTHONORMALITY_TOL: f64 = 1e-10;

/// Default residual tolerance for membership and containment tests.
pub const MEMBERSHIP_TOL: f64 = 1e-9;

#[derive(Debug, Error)]
pub enum HilbertError {
    #[error("dimension mismatch: expected {expected}, got {got}")]
    DimensionMismatch { expected: usize, got: usize },
    #[error("operands live in different spaces")]
    SpaceMismatch,
    #[error("gram matrix is invalid: {0}")]
    InvalidGram(#[source] SolverError),
    #[error("kernel dictionary construction failed: {0}")]
    Dictionary(#[from] KernelError),
    #[error("basis is not gram-orthonormal (max deviation {deviation:e})")]
    NotOrthonormal { deviation: f64 },
    #[error("complement construction produced rank {got}, expected {expected}")]
    ComplementRank { expected: usize, got: usize },
    #[error("empty input where at least one vector is required")]
    EmptyInput,
}

/// How coordinate vectors of a space should be interpreted.
#[derive(Debug, Clone, PartialEq)]
pub enum ShapeTag {
    /// Plain coordinate vectors of the given length.
    Vector { len: usize },
    /// Row-major flattened `rows x cols` matrices with the Frobenius inner
    /// product; entry `(i, j)` sits at coordinate `i * cols + j`.
    Matrix { rows: usize, cols: usize },
    /// Coefficient vectors over the kernel sections at the dictionary points:
    /// coordinate block `i` holds the output-space coefficient attached to
    /// `K(., x_i)`.
    RkhsDictionary {
        points: Vec<Array1<f64>>,
        kernel: KernelSpec,
    },
}

/// A finite-dimensional Hilbert space: dimension, Gram matrix, shape tag.
#[derive(Debug, Clone, PartialEq)]
pub struct SpaceSpec {
    dim: usize,
    gram: Array2<f64>,
    shape: ShapeTag,
    jitter_applied: bool,
}

impl SpaceSpec {
    /// Euclidean space with the identity Gram matrix.
    pub fn euclidean(n: usize) -> SpaceSpec {
        SpaceSpec {
            dim: n,
            gram: Array2::eye(n),
            shape: ShapeTag::Vector { len: n },
            jitter_applied: false,
        }
    }

    /// Vector space with an explicit Gram matrix, validated symmetric positive
    /// definite under the one-shot jitter policy.
    pub fn vector_with_gram(gram: Array2<f64>) -> Result<SpaceSpec, HilbertError> {
        let n = gram.nrows();
        let fac = solvers::spd_cholesky_with_jitter(&gram).map_err(HilbertError::InvalidGram)?;
        Ok(SpaceSpec {
            dim: n,
            gram: fac.matrix,
            shape: ShapeTag::Vector { len: n },
            jitter_applied: fac.jitter_applied,
        })
    }

    /// Space of `rows x cols` real matrices under the Frobenius inner product;
    /// in row-major coordinates the Gram matrix is the identity.
    pub fn matrix_frobenius(rows: usize, cols: usize) -> SpaceSpec {
        SpaceSpec {
            dim: rows * cols,
            gram: Array2::eye(rows * cols),
            shape: ShapeTag::Matrix { rows, cols },
            jitter_applied: false,
        }
    }

    /// Span of the kernel sections `K(., x_i)` over a dictionary of points,
    /// coordinatized by their output-space coefficients. The Gram matrix is
    /// the block kernel matrix, jittered once if the dictionary is degenerate.
    pub fn rkhs_dictionary(
        points: Vec<Array1<f64>>,
        kernel: KernelSpec,
    ) -> Result<SpaceSpec, HilbertError> {
        let (gram, jitter_applied) = kernel.block_gram(&points)?;
        let dim = gram.nrows();
        Ok(SpaceSpec {
            dim,
            gram,
            shape: ShapeTag::RkhsDictionary { points, kernel },
            jitter_applied,
        })
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn gram(&self) -> &Array2<f64> {
        &self.gram
    }

    pub fn shape(&self) -> &ShapeTag {
        &self.shape
    }

    pub fn jitter_applied(&self) -> bool {
        self.jitter_applied
    }

    pub fn check_vector(&self, v: &Array1<f64>) -> Result<(), HilbertError> {
        if v.len() != self.dim {
            return Err(HilbertError::DimensionMismatch {
                expected: self.dim,
                got: v.len(),
            });
        }
        Ok(())
    }

    /// Inner product `<u, v> = u^T G v`.
    pub fn inner(&self, u: &Array1<f64>, v: &Array1<f64>) -> Result<f64, HilbertError> {
        self.check_vector(u)?;
        self.check_vector(v)?;
        Ok(u.dot(&self.gram.dot(v)))
    }

    pub fn norm(&self, v: &Array1<f64>) -> Result<f64, HilbertError> {
        Ok(self.inner(v, v)?.max(0.0).sqrt())
    }

    pub fn standard_basis_vector(&self, i: usize) -> Array1<f64> {
        let mut e = Array1::zeros(self.dim);
        e[i] = 1.0;
        e
    }
}

/// Row-major flattening of a matrix into Frobenius-space coordinates.
pub fn flatten_matrix(w: &Array2<f64>) -> Array1<f64> {
    Array1::from_iter(w.iter().copied())
}

/// Inverse of [`flatten_matrix`].
pub fn unflatten_matrix(v: &Array1<f64>, rows: usize, cols: usize) -> Array2<f64> {
    Array2::from_shape_vec((rows, cols), v.to_vec()).expect("shape matches length")
}

/// A subspace stored as a Gram-orthonormal basis (columns).
#[derive(Debug, Clone)]
pub struct SubspaceBasis {
    space: SpaceSpec,
    basis: Array2<f64>,
}

impl SubspaceBasis {
    /// Wraps an explicit basis, validating Gram-orthonormality.
    pub fn new(space: SpaceSpec, basis: Array2<f64>) -> Result<SubspaceBasis, HilbertError> {
        if basis.nrows() != space.dim() {
            return Err(HilbertError::DimensionMismatch {
                expected: space.dim(),
                got: basis.nrows(),
            });
        }
        let sub = SubspaceBasis { space, basis };
        let dev = sub.orthonormality_deviation();
        if dev > ORTHONORMALITY_TOL {
            return Err(HilbertError::NotOrthonormal { deviation: dev });
        }
        Ok(sub)
    }

    /// The zero subspace.
    pub fn zero(space: SpaceSpec) -> SubspaceBasis {
        let dim = space.dim();
        SubspaceBasis {
            space,
            basis: Array2::zeros((dim, 0)),
        }
    }

    /// The full space, orthonormalized from the standard basis.
    pub fn full(space: SpaceSpec) -> SubspaceBasis {
        let vectors: Vec<Array1<f64>> = (0..space.dim())
            .map(|i| space.standard_basis_vector(i))
            .collect();
        orthonormalize(&vectors, &space, DEFLATION_TOL).expect("standard basis spans the space")
    }

    pub fn space(&self) -> &SpaceSpec {
        &self.space
    }

    pub fn basis(&self) -> &Array2<f64> {
        &self.basis
    }

    pub fn rank(&self) -> usize {
        self.basis.ncols()
    }

    pub fn is_zero(&self) -> bool {
        self.rank() == 0
    }

    fn orthonormality_deviation(&self) -> f64 {
        let g = self.basis.t().dot(&self.space.gram().dot(&self.basis));
        let r = self.rank();
        let mut dev = 0.0f64;
        for i in 0..r {
            for j in 0..r {
                let target = if i == j { 1.0 } else { 0.0 };
                dev = dev.max((g[(i, j)] - target).abs());
            }
        }
        dev
    }

    /// The orthogonal projector onto this subspace: `B B^T G`.
    pub fn projector(&self) -> Array2<f64> {
        self.basis.dot(&self.basis.t().dot(self.space.gram()))
    }

    /// Applies the projector to a vector without materializing it.
    pub fn project_vector(&self, v: &Array1<f64>) -> Result<Array1<f64>, HilbertError> {
        self.space.check_vector(v)?;
        let coeffs = self.basis.t().dot(&self.space.gram().dot(v));
        Ok(self.basis.dot(&coeffs))
    }

    /// Coefficients of the projection of `v` in this basis.
    pub fn coefficients(&self, v: &Array1<f64>) -> Result<Array1<f64>, HilbertError> {
        self.space.check_vector(v)?;
        Ok(self.basis.t().dot(&self.space.gram().dot(v)))
    }

    /// Gram-norm of `v - P v`; zero (up to tolerance) means membership.
    pub fn member_residual(&self, v: &Array1<f64>) -> Result<f64, HilbertError> {
        let p = self.project_vector(v)?;
        self.space.norm(&(v - &p))
    }

    pub fn contains_vector(&self, v: &Array1<f64>, tol: f64) -> Result<bool, HilbertError> {
        Ok(self.member_residual(v)? <= tol)
    }

    /// Frobenius distance between the projectors of two subspaces of the same
    /// space; zero exactly when the subspaces are equal.
    pub fn projector_distance(&self, other: &SubspaceBasis) -> Result<f64, HilbertError> {
        if self.space != other.space {
            return Err(HilbertError::SpaceMismatch);
        }
        Ok(solvers::frobenius_norm(
            &(self.projector() - other.projector()),
        ))
    }
}

/// Modified Gram-Schmidt with re-orthogonalization under the space's Gram
/// inner product. Dependent directions are deflated away; the result has
/// full column rank and is deterministic given the input order.
pub fn orthonormalize(
    vectors: &[Array1<f64>],
    space: &SpaceSpec,
    tol: f64,
) -> Result<SubspaceBasis, HilbertError> {
    for v in vectors {
        space.check_vector(v)?;
    }
    let mut max_norm = 0.0f64;
    for v in vectors {
        max_norm = max_norm.max(space.norm(v)?);
    }
    if max_norm == 0.0 {
        return Ok(SubspaceBasis::zero(space.clone()));
    }
    let threshold = tol * max_norm;
    let mut accepted: Vec<Array1<f64>> = Vec::new();
    for v in vectors {
        if let Some(u) = deflate_and_normalize(v, &accepted, space, threshold) {
            accepted.push(u);
        }
    }
    assemble(space.clone(), accepted)
}

/// Deflates `v` against `against` twice (re-orthogonalization) and normalizes;
/// returns `None` when the residual falls below the threshold.
fn deflate_and_normalize(
    v: &Array1<f64>,
    against: &[Array1<f64>],
    space: &SpaceSpec,
    threshold: f64,
) -> Option<Array1<f64>> {
    let mut w = v.clone();
    for _pass in 0..2 {
        for u in against {
            let c = space.inner(u, &w).expect("validated dims");
            w = &w - &(c * u);
        }
    }
    let norm = space.norm(&w).expect("validated dims");
    if norm <= threshold {
        None
    } else {
        Some(w / norm)
    }
}

fn assemble(space: SpaceSpec, cols: Vec<Array1<f64>>) -> Result<SubspaceBasis, HilbertError> {
    let dim = space.dim();
    let mut basis = Array2::<f64>::zeros((dim, cols.len()));
    for (j, c) in cols.iter().enumerate() {
        basis.column_mut(j).assign(c);
    }
    SubspaceBasis::new(space, basis)
}

/// Orthogonal complement, built by deflating the standard basis against the
/// subspace and orthonormalizing what survives.
pub fn orth_complement(a: &SubspaceBasis) -> Result<SubspaceBasis, HilbertError> {
    let space = a.space();
    let n = space.dim();
    let expected = n - a.rank();
    let seed: Vec<Array1<f64>> = (0..a.rank())
        .map(|j| a.basis().column(j).to_owned())
        .collect();
    let mut accepted = seed;
    let mut fresh: Vec<Array1<f64>> = Vec::new();
    // The seed columns are unit-norm, so an absolute threshold at the
    // deflation tolerance is the right scale for the standard basis.
    let threshold = DEFLATION_TOL;
    for i in 0..n {
        let e = space.standard_basis_vector(i);
        if let Some(u) = deflate_and_normalize(&e, &accepted, space, threshold) {
            accepted.push(u.clone());
            fresh.push(u);
        }
    }
    if fresh.len() != expected {
        return Err(HilbertError::ComplementRank {
            expected,
            got: fresh.len(),
        });
    }
    assemble(space.clone(), fresh)
}

/// Projection of `v` onto the subspace (as a vector of the ambient space).
pub fn project(v: &Array1<f64>, a: &SubspaceBasis) -> Result<Array1<f64>, HilbertError> {
    a.project_vector(v)
}

/// Smallest subspace containing both arguments.
pub fn subspace_sum(a: &SubspaceBasis, b: &SubspaceBasis) -> Result<SubspaceBasis, HilbertError> {
    if a.space() != b.space() {
        return Err(HilbertError::SpaceMismatch);
    }
    let mut cols: Vec<Array1<f64>> = Vec::with_capacity(a.rank() + b.rank());
    for j in 0..a.rank() {
        cols.push(a.basis().column(j).to_owned());
    }
    for j in 0..b.rank() {
        cols.push(b.basis().column(j).to_owned());
    }
    if cols.is_empty() {
        return Ok(SubspaceBasis::zero(a.space().clone()));
    }
    orthonormalize(&cols, a.space(), DEFLATION_TOL)
}

/// Whether `inner` is contained in `outer`, by projecting every basis vector
/// of `inner` and checking the residual.
pub fn subspace_contains(
    outer: &SubspaceBasis,
    inner: &SubspaceBasis,
    tol: f64,
) -> Result<bool, HilbertError> {
    if outer.space() != inner.space() {
        return Err(HilbertError::SpaceMismatch);
    }
    for j in 0..inner.rank() {
        let col = inner.basis().column(j).to_owned();
        if outer.member_residual(&col)? > tol {
            return Ok(false);
        }
    }
    Ok(true)
}

/// Concatenates basis columns of several subspaces (no orthonormalization).
pub fn collect_columns(subs: &[&SubspaceBasis]) -> Vec<Array1<f64>> {
    let mut cols = Vec::new();
    for s in subs {
        for j in 0..s.rank() {
            cols.push(s.basis().column(j).to_owned());
        }
    }
    cols
}

/// Maps a subspace through a matrix into a target space and orthonormalizes
/// the image.
pub fn map_subspace(
    matrix: &Array2<f64>,
    a: &SubspaceBasis,
    target: &SpaceSpec,
) -> Result<SubspaceBasis, HilbertError> {
    if a.is_zero() {
        return Ok(SubspaceBasis::zero(target.clone()));
    }
    let image = matrix.dot(a.basis());
    let cols: Vec<Array1<f64>> = image.axis_iter(Axis(1)).map(|c| c.to_owned()).collect();
    orthonormalize(&cols, target, DEFLATION_TOL)
}
