//! Dense linear operators between spaces, with Gram-derived adjoints.
//!
//! Every operator is a coordinate matrix together with its domain and
//! codomain. The adjoint is always computed from the two Gram matrices as
//! `G_dom^-1 M^T G_cod`; the hand-derived adjoint formulas for the named
//! constructors (evaluation, explicit basis, derivative, rank-one probes)
//! serve as independent oracles in the tests.

pub mod legendre;

use crate::hilbert::{
    orthonormalize, HilbertError, ShapeTag, SpaceSpec, SubspaceBasis, DEFLATION_TOL,
};
use crate::kernels::KernelError;
use crate::solvers::{self, SolverError};
use ndarray::{Array1, Array2};
use thiserror::Error;

#[derive(Debug, Error)]
pub enum OperatorError {
    #[error(transparent)]
    Hilbert(#[from] HilbertError),
    #[error(transparent)]
    Solver(#[from] SolverError),
    #[error(transparent)]
    Kernel(#[from] KernelError),
    #[error("matrix shape ({rows}, {cols}) does not match codomain {codomain} x domain {domain}")]
    MatrixShape {
        rows: usize,
        cols: usize,
        codomain: usize,
        domain: usize,
    },
    #[error("space does not carry the required {expected} shape tag")]
    WrongShapeTag { expected: &'static str },
    #[error(
        "feature evaluator returned shape ({got_rows}, {got_cols}), expected ({rows}, {cols})"
    )]
    FeatureShape {
        rows: usize,
        cols: usize,
        got_rows: usize,
        got_cols: usize,
    },
    #[error("point is not a dictionary point, exact adjoint coefficients are unavailable")]
    NotInDictionary,
    #[error("zero vector where a nonzero vector is required")]
    ZeroVector,
    #[error("operators do not share the required space")]
    DomainMismatch,
    #[error("operator list is empty")]
    EmptyOperatorSet,
    #[error("vector length {got} does not match space dimension {expected}")]
    VectorLength { expected: usize, got: usize },
}

/// A linear map between two spaces, stored as its coordinate matrix
/// (codomain dim x domain dim).
#[derive(Debug, Clone)]
pub struct OperatorRep {
    domain: SpaceSpec,
    codomain: SpaceSpec,
    matrix: Array2<f64>,
}

impl OperatorRep {
    pub fn new(
        domain: SpaceSpec,
        codomain: SpaceSpec,
        matrix: Array2<f64>,
    ) -> Result<OperatorRep, OperatorError> {
        if matrix.nrows() != codomain.dim() || matrix.ncols() != domain.dim() {
            return Err(OperatorError::MatrixShape {
                rows: matrix.nrows(),
                cols: matrix.ncols(),
                codomain: codomain.dim(),
                domain: domain.dim(),
            });
        }
        Ok(OperatorRep {
            domain,
            codomain,
            matrix,
        })
    }

    pub fn identity(space: &SpaceSpec) -> OperatorRep {
        OperatorRep {
            domain: space.clone(),
            codomain: space.clone(),
            matrix: Array2::eye(space.dim()),
        }
    }

    pub fn domain(&self) -> &SpaceSpec {
        &self.domain
    }

    pub fn codomain(&self) -> &SpaceSpec {
        &self.codomain
    }

    pub fn matrix(&self) -> &Array2<f64> {
        &self.matrix
    }

    pub fn apply(&self, v: &Array1<f64>) -> Result<Array1<f64>, OperatorError> {
        self.domain.check_vector(v)?;
        Ok(self.matrix.dot(v))
    }

    /// The adjoint `L*` with `<z, Lf> = <L*z, f>`, computed as
    /// `G_dom^-1 M^T G_cod`.
    pub fn adjoint(&self) -> Result<OperatorRep, OperatorError> {
        let rhs = self.matrix.t().dot(self.codomain.gram());
        let adj = solvers::solve_spd(self.domain.gram(), &rhs)?;
        Ok(OperatorRep {
            domain: self.codomain.clone(),
            codomain: self.domain.clone(),
            matrix: adj,
        })
    }

    /// Composition `self . other` (apply `other` first).
    pub fn compose(&self, other: &OperatorRep) -> Result<OperatorRep, OperatorError> {
        if self.domain != other.codomain {
            return Err(OperatorError::DomainMismatch);
        }
        Ok(OperatorRep {
            domain: other.domain.clone(),
            codomain: self.codomain.clone(),
            matrix: self.matrix.dot(&other.matrix),
        })
    }

    /// Orthonormal basis of the closure of the range of `L*`, which equals
    /// the orthogonal complement of the null space of `L`.
    pub fn null_complement(&self) -> Result<SubspaceBasis, OperatorError> {
        joint_null_complement(std::slice::from_ref(self))
    }
}

/// Free-function form of [`OperatorRep::adjoint`].
pub fn adjoint(l: &OperatorRep) -> Result<OperatorRep, OperatorError> {
    l.adjoint()
}

/// Orthonormal basis of the complement of the joint null space of a family of
/// operators with common domain: the span of all adjoint columns.
pub fn joint_null_complement(ops: &[OperatorRep]) -> Result<SubspaceBasis, OperatorError> {
    let first = ops.first().ok_or(OperatorError::EmptyOperatorSet)?;
    let domain = first.domain();
    let mut cols: Vec<Array1<f64>> = Vec::new();
    for op in ops {
        if op.domain() != domain {
            return Err(OperatorError::DomainMismatch);
        }
        let adj = op.adjoint()?;
        for j in 0..adj.matrix().ncols() {
            cols.push(adj.matrix().column(j).to_owned());
        }
    }
    Ok(orthonormalize(&cols, domain, DEFLATION_TOL)?)
}

/// Point evaluation on a kernel dictionary space: coefficient vectors map to
/// the function value `f(x) = sum_j K(x, x_j) c_j` in the kernel's output
/// space.
pub fn evaluation_operator(
    space: &SpaceSpec,
    x: &Array1<f64>,
) -> Result<OperatorRep, OperatorError> {
    let (points, kernel) = match space.shape() {
        ShapeTag::RkhsDictionary { points, kernel } => (points, kernel),
        _ => {
            return Err(OperatorError::WrongShapeTag {
                expected: "rkhs_dictionary",
            })
        }
    };
    let d = kernel.output_dim;
    let mut matrix = Array2::<f64>::zeros((d, space.dim()));
    for (j, xj) in points.iter().enumerate() {
        let k = kernel.eval(x, xj)?;
        for a in 0..d {
            matrix[(a, j * d + a)] = k;
        }
    }
    OperatorRep::new(space.clone(), SpaceSpec::euclidean(d), matrix)
}

/// Coefficient vector of the section `K(., x) z` when `x` is one of the
/// dictionary points: the block at that point holds `z`, all others are zero.
/// This is the evaluation operator's adjoint applied to `z`, exact because
/// the section already lies in the dictionary span.
pub fn exact_adjoint_coefficients(
    space: &SpaceSpec,
    x: &Array1<f64>,
    z: &Array1<f64>,
) -> Result<Array1<f64>, OperatorError> {
    let (points, kernel) = match space.shape() {
        ShapeTag::RkhsDictionary { points, kernel } => (points, kernel),
        _ => {
            return Err(OperatorError::WrongShapeTag {
                expected: "rkhs_dictionary",
            })
        }
    };
    let d = kernel.output_dim;
    if z.len() != d {
        return Err(OperatorError::VectorLength {
            expected: d,
            got: z.len(),
        });
    }
    let hit = points.iter().position(|p| p == x);
    let Some(j) = hit else {
        return Err(OperatorError::NotInDictionary);
    };
    let mut coeffs = Array1::zeros(space.dim());
    for a in 0..d {
        coeffs[j * d + a] = z[a];
    }
    Ok(coeffs)
}

/// A feature function for explicit-basis operators: maps an input point to an
/// `n_features x width` matrix of feature values. Vector-valued features are
/// the `width = 1` case.
pub struct FeatureMap {
    n_features: usize,
    k_outputs: usize,
    width: usize,
    evaluator: Box<dyn Fn(&Array1<f64>) -> Array2<f64> + Send + Sync>,
}

impl FeatureMap {
    pub fn new(
        n_features: usize,
        k_outputs: usize,
        width: usize,
        evaluator: Box<dyn Fn(&Array1<f64>) -> Array2<f64> + Send + Sync>,
    ) -> FeatureMap {
        FeatureMap {
            n_features,
            k_outputs,
            width,
            evaluator,
        }
    }

    /// Feature map whose evaluator returns a plain feature vector.
    pub fn from_vector_features(
        n_features: usize,
        k_outputs: usize,
        evaluator: Box<dyn Fn(&Array1<f64>) -> Array1<f64> + Send + Sync>,
    ) -> FeatureMap {
        FeatureMap {
            n_features,
            k_outputs,
            width: 1,
            evaluator: Box::new(move |x| {
                let v = evaluator(x);
                let n = v.len();
                v.into_shape_with_order((n, 1)).expect("column reshape")
            }),
        }
    }

    pub fn n_features(&self) -> usize {
        self.n_features
    }

    pub fn k_outputs(&self) -> usize {
        self.k_outputs
    }

    pub fn width(&self) -> usize {
        self.width
    }

    /// The domain of the induced operators: `n_features x k_outputs` weight
    /// matrices under the Frobenius inner product.
    pub fn weight_space(&self) -> SpaceSpec {
        SpaceSpec::matrix_frobenius(self.n_features, self.k_outputs)
    }

    /// The codomain of the induced operators: `k_outputs x width` matrices.
    pub fn output_space(&self) -> SpaceSpec {
        SpaceSpec::matrix_frobenius(self.k_outputs, self.width)
    }

    /// Evaluates the features, validating the declared output shape.
    pub fn eval(&self, x: &Array1<f64>) -> Result<Array2<f64>, OperatorError> {
        let phi = (self.evaluator)(x);
        if phi.nrows() != self.n_features || phi.ncols() != self.width {
            return Err(OperatorError::FeatureShape {
                rows: self.n_features,
                cols: self.width,
                got_rows: phi.nrows(),
                got_cols: phi.ncols(),
            });
        }
        Ok(phi)
    }
}

/// The explicit-basis operator `W -> W^T phi(x)` from weight matrices to
/// output matrices; its adjoint acts as `Z -> phi(x) Z^T`.
pub fn explicit_basis_operator(
    map: &FeatureMap,
    x: &Array1<f64>,
) -> Result<OperatorRep, OperatorError> {
    let phi = map.eval(x)?;
    let n = map.n_features();
    let k = map.k_outputs();
    let w = map.width();
    let mut matrix = Array2::<f64>::zeros((k * w, n * k));
    // Output entry (j, l) = sum_i W[i, j] phi[i, l] in row-major flattening.
    for j in 0..k {
        for l in 0..w {
            for i in 0..n {
                matrix[(j * w + l, i * k + j)] = phi[(i, l)];
            }
        }
    }
    OperatorRep::new(map.weight_space(), map.output_space(), matrix)
}

/// The rank-one probe `h -> z_star <f, h> / |f|^2`. It sends `f` to `z_star`,
/// annihilates everything orthogonal to `f`, and its adjoint is
/// `z -> <z_star, z> f / |f|^2`.
pub fn necessity_probe(
    codomain: &SpaceSpec,
    z_star: &Array1<f64>,
    domain: &SpaceSpec,
    f: &Array1<f64>,
) -> Result<OperatorRep, OperatorError> {
    codomain.check_vector(z_star)?;
    domain.check_vector(f)?;
    let gf = domain.gram().dot(f);
    let norm2 = f.dot(&gf);
    if norm2 <= 0.0 {
        return Err(OperatorError::ZeroVector);
    }
    let p = codomain.dim();
    let n = domain.dim();
    let mut matrix = Array2::<f64>::zeros((p, n));
    for a in 0..p {
        for b in 0..n {
            matrix[(a, b)] = z_star[a] * gf[b] / norm2;
        }
    }
    OperatorRep::new(domain.clone(), codomain.clone(), matrix)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::kernels::KernelSpec;
    use crate::sampling;
    use approx::assert_abs_diff_eq;
    use ndarray::array;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn adjoint_discrepancy(l: &OperatorRep, f: &Array1<f64>, z: &Array1<f64>) -> f64 {
        let lf = l.apply(f).unwrap();
        let adj = l.adjoint().unwrap();
        let lz = adj.apply(z).unwrap();
        let lhs = l.codomain().inner(z, &lf).unwrap();
        let rhs = l.domain().inner(f, &lz).unwrap();
        (lhs - rhs).abs()
    }

    #[test]
    fn adjoint_on_euclidean_spaces_is_the_transpose() {
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let m = sampling::random_matrix(3, 5, &mut rng);
        let l =
            OperatorRep::new(SpaceSpec::euclidean(5), SpaceSpec::euclidean(3), m.clone()).unwrap();
        let adj = l.adjoint().unwrap();
        let diff = solvers::frobenius_norm(&(adj.matrix() - &m.t()));
        assert!(diff <= 1e-12, "transpose deviation {diff:e}");
    }

    #[test]
    fn adjoint_identity_holds_under_random_grams() {
        let mut rng = ChaCha8Rng::seed_from_u64(2);
        let domain = SpaceSpec::vector_with_gram(sampling::random_spd(5, &mut rng)).unwrap();
        let codomain = SpaceSpec::vector_with_gram(sampling::random_spd(3, &mut rng)).unwrap();
        let m = sampling::random_matrix(3, 5, &mut rng);
        let l = OperatorRep::new(domain, codomain, m).unwrap();
        for _ in 0..100 {
            let f = sampling::random_vector(5, &mut rng);
            let z = sampling::random_vector(3, &mut rng);
            let bound =
                1e-9 * (1.0 + l.domain().norm(&f).unwrap() * l.codomain().norm(&z).unwrap());
            assert!(adjoint_discrepancy(&l, &f, &z) <= bound);
        }
    }

    #[test]
    fn adjoint_is_an_involution() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        for trial in 0..10 {
            let domain = SpaceSpec::vector_with_gram(sampling::random_spd(4, &mut rng)).unwrap();
            let codomain = SpaceSpec::vector_with_gram(sampling::random_spd(6, &mut rng)).unwrap();
            let m = sampling::random_matrix(6, 4, &mut rng);
            let l = OperatorRep::new(domain, codomain, m).unwrap();
            let back = l.adjoint().unwrap().adjoint().unwrap();
            let diff = solvers::frobenius_norm(&(back.matrix() - l.matrix()));
            assert!(
                diff <= 1e-10,
                "trial {trial}: involution deviation {diff:e}"
            );
        }
    }

    fn four_point_dictionary(output_dim: usize) -> SpaceSpec {
        let kernel = KernelSpec::squared_exponential(1.0, output_dim).unwrap();
        let points = vec![
            array![0.0, 0.0],
            array![1.0, 0.5],
            array![-1.0, 0.25],
            array![0.5, -1.5],
        ];
        SpaceSpec::rkhs_dictionary(points, kernel).unwrap()
    }

    #[test]
    fn evaluation_on_single_point_dictionary_is_the_identity_row() {
        let kernel = KernelSpec::squared_exponential(1.0, 1).unwrap();
        let space = SpaceSpec::rkhs_dictionary(vec![array![0.3, -0.7]], kernel).unwrap();
        let l = evaluation_operator(&space, &array![0.3, -0.7]).unwrap();
        assert_eq!(l.matrix().shape(), &[1, 1]);
        assert_abs_diff_eq!(l.matrix()[(0, 0)], 1.0, epsilon = 1e-15);
    }

    #[test]
    fn evaluation_row_holds_kernel_values_at_the_point() {
        let kernel = KernelSpec::squared_exponential(0.8, 1).unwrap();
        let pts = vec![array![0.0], array![1.0]];
        let space = SpaceSpec::rkhs_dictionary(pts.clone(), kernel.clone()).unwrap();
        let l = evaluation_operator(&space, &pts[0]).unwrap();
        assert_abs_diff_eq!(
            l.matrix()[(0, 0)],
            kernel.eval(&pts[0], &pts[0]).unwrap(),
            epsilon = 1e-15
        );
        assert_abs_diff_eq!(
            l.matrix()[(0, 1)],
            kernel.eval(&pts[0], &pts[1]).unwrap(),
            epsilon = 1e-15
        );
    }

    #[test]
    fn evaluation_matches_manual_kernel_expansion_at_fresh_point() {
        let space = four_point_dictionary(2);
        let ShapeTag::RkhsDictionary { points, kernel } = space.shape().clone() else {
            unreachable!()
        };
        let mut rng = ChaCha8Rng::seed_from_u64(4);
        let x = array![0.2, 0.9];
        let l = evaluation_operator(&space, &x).unwrap();
        let c = sampling::random_vector(space.dim(), &mut rng);
        let via_matrix = l.apply(&c).unwrap();
        let mut manual = Array1::<f64>::zeros(2);
        for (j, xj) in points.iter().enumerate() {
            let k = kernel.eval(&x, xj).unwrap();
            for a in 0..2 {
                manual[a] += k * c[j * 2 + a];
            }
        }
        for a in 0..2 {
            assert_abs_diff_eq!(via_matrix[a], manual[a], epsilon = 1e-12);
        }
    }

    #[test]
    fn evaluation_adjoint_identity_on_four_point_dictionary() {
        let space = four_point_dictionary(2);
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        let l = evaluation_operator(&space, &array![0.1, 0.4]).unwrap();
        for _ in 0..50 {
            let f = sampling::random_vector(space.dim(), &mut rng);
            let z = sampling::random_vector(2, &mut rng);
            assert!(adjoint_discrepancy(&l, &f, &z) <= 1e-8);
        }
    }

    #[test]
    fn exact_adjoint_coefficients_match_generic_adjoint_at_dictionary_point() {
        let space = four_point_dictionary(2);
        let ShapeTag::RkhsDictionary { points, .. } = space.shape().clone() else {
            unreachable!()
        };
        let x = points[2].clone();
        let z = array![0.7, -1.3];
        let exact = exact_adjoint_coefficients(&space, &x, &z).unwrap();
        let generic = evaluation_operator(&space, &x)
            .unwrap()
            .adjoint()
            .unwrap()
            .apply(&z)
            .unwrap();
        for i in 0..space.dim() {
            assert_abs_diff_eq!(exact[i], generic[i], epsilon = 1e-8);
        }
        assert_abs_diff_eq!(exact[2 * 2], 0.7, epsilon = 0.0);
    }

    #[test]
    fn exact_adjoint_coefficients_reject_fresh_points() {
        let space = four_point_dictionary(1);
        let err = exact_adjoint_coefficients(&space, &array![9.0, 9.0], &array![1.0]).unwrap_err();
        assert!(matches!(err, OperatorError::NotInDictionary));
    }

    fn constant_feature_map(n: usize, k: usize, phi: Array2<f64>) -> FeatureMap {
        let width = phi.ncols();
        FeatureMap::new(n, k, width, Box::new(move |_x| phi.clone()))
    }

    #[test]
    fn explicit_basis_picks_first_weight_for_e1_features() {
        let map = constant_feature_map(2, 1, array![[1.0], [0.0]]);
        let l = explicit_basis_operator(&map, &array![0.0]).unwrap();
        // W = (w1, w2) flattened; action is w1.
        let out = l.apply(&array![3.5, -2.0]).unwrap();
        assert_eq!(out.len(), 1);
        assert_abs_diff_eq!(out[0], 3.5, epsilon = 0.0);
        let adj = l.adjoint().unwrap();
        let back = adj.apply(&array![2.0]).unwrap();
        assert_abs_diff_eq!(back[0], 2.0, epsilon = 1e-12);
        assert_abs_diff_eq!(back[1], 0.0, epsilon = 1e-12);
    }

    #[test]
    fn explicit_basis_action_matches_hand_product() {
        // W = identity 2x2, phi = (1,2): W^T phi = (1,2).
        let map = constant_feature_map(2, 2, array![[1.0], [2.0]]);
        let l = explicit_basis_operator(&map, &array![0.0]).unwrap();
        let w = crate::hilbert::flatten_matrix(&array![[1.0, 0.0], [0.0, 1.0]]);
        let out = l.apply(&w).unwrap();
        assert_abs_diff_eq!(out[0], 1.0, epsilon = 0.0);
        assert_abs_diff_eq!(out[1], 2.0, epsilon = 0.0);
    }

    #[test]
    fn explicit_basis_adjoint_is_phi_z_transpose_and_trace_identity_holds() {
        let mut rng = ChaCha8Rng::seed_from_u64(6);
        let phi_col = sampling::random_vector(4, &mut rng);
        let phi = phi_col.clone().into_shape_with_order((4, 1)).unwrap();
        let map = constant_feature_map(4, 3, phi.clone());
        let l = explicit_basis_operator(&map, &array![0.0]).unwrap();
        for _ in 0..20 {
            let w_mat = sampling::random_matrix(4, 3, &mut rng);
            let z = sampling::random_vector(3, &mut rng);
            let w_flat = crate::hilbert::flatten_matrix(&w_mat);
            let lw = l.apply(&w_flat).unwrap();
            // Trace identity: <W^T phi, z> = phi^T W z.
            let lhs = lw.dot(&z);
            let rhs = phi_col.dot(&w_mat.dot(&z));
            assert_abs_diff_eq!(lhs, rhs, epsilon = 1e-10);
            // Adjoint closed form: z -> phi z^T, flattened row-major.
            let adj_z = l.adjoint().unwrap().apply(&z).unwrap();
            for i in 0..4 {
                for j in 0..3 {
                    assert_abs_diff_eq!(adj_z[i * 3 + j], phi_col[i] * z[j], epsilon = 1e-10);
                }
            }
        }
    }

    #[test]
    fn feature_shape_mismatch_is_rejected() {
        let map = FeatureMap::new(3, 2, 1, Box::new(|_x| Array2::<f64>::zeros((2, 2))));
        let err = explicit_basis_operator(&map, &array![0.0]).unwrap_err();
        assert!(matches!(err, OperatorError::FeatureShape { .. }));
    }

    #[test]
    fn joint_null_complement_of_invertible_operator_is_full_space() {
        let space = SpaceSpec::euclidean(3);
        let l = OperatorRep::new(
            space.clone(),
            space.clone(),
            array![[2.0, 1.0, 0.0], [0.0, 1.0, 0.0], [1.0, 0.0, 3.0]],
        )
        .unwrap();
        let comp = joint_null_complement(&[l]).unwrap();
        assert_eq!(comp.rank(), 3);
    }

    #[test]
    fn joint_null_complement_of_e1_feature_operator_is_the_first_axis() {
        let map = constant_feature_map(2, 1, array![[1.0], [0.0]]);
        let l = explicit_basis_operator(&map, &array![0.0]).unwrap();
        let comp = joint_null_complement(&[l]).unwrap();
        assert_eq!(comp.rank(), 1);
        let c = comp.basis().column(0).to_owned();
        assert_abs_diff_eq!(c[0].abs(), 1.0, epsilon = 1e-12);
        assert_abs_diff_eq!(c[1], 0.0, epsilon = 1e-12);
    }

    #[test]
    fn joint_null_complement_over_all_dictionary_points_is_full() {
        let space = four_point_dictionary(1);
        let ShapeTag::RkhsDictionary { points, .. } = space.shape().clone() else {
            unreachable!()
        };
        let ops: Vec<OperatorRep> = points
            .iter()
            .map(|x| evaluation_operator(&space, x).unwrap())
            .collect();
        let comp = joint_null_complement(&ops).unwrap();
        assert_eq!(comp.rank(), space.dim());
    }

    #[test]
    fn joint_null_complement_orthocomplement_is_annihilated() {
        let mut rng = ChaCha8Rng::seed_from_u64(7);
        let domain = SpaceSpec::vector_with_gram(sampling::random_spd(6, &mut rng)).unwrap();
        let ops: Vec<OperatorRep> = (0..2)
            .map(|_| {
                let m = sampling::random_matrix(2, 6, &mut rng);
                OperatorRep::new(domain.clone(), SpaceSpec::euclidean(2), m).unwrap()
            })
            .collect();
        let comp = joint_null_complement(&ops).unwrap();
        assert!(comp.rank() < 6, "two rank-2 operators leave a null space");
        let null = crate::hilbert::orth_complement(&comp).unwrap();
        for j in 0..null.rank() {
            let g = null.basis().column(j).to_owned();
            for op in &ops {
                let img = op.apply(&g).unwrap();
                assert!(solvers::euclidean_norm(&img) <= 1e-8);
            }
        }
    }

    #[test]
    fn probe_with_e1_direction_is_the_first_coordinate_row() {
        let domain = SpaceSpec::euclidean(3);
        let codomain = SpaceSpec::euclidean(1);
        let probe = necessity_probe(
            &codomain,
            &array![1.0],
            &domain,
            &domain.standard_basis_vector(0),
        )
        .unwrap();
        assert_abs_diff_eq!(probe.matrix()[(0, 0)], 1.0, epsilon = 0.0);
        assert_abs_diff_eq!(probe.matrix()[(0, 1)], 0.0, epsilon = 0.0);
        let out = probe.apply(&domain.standard_basis_vector(1)).unwrap();
        assert_abs_diff_eq!(out[0], 0.0, epsilon = 0.0);
    }

    #[test]
    fn probe_sends_its_direction_to_z_star_and_annihilates_orthogonals() {
        let mut rng = ChaCha8Rng::seed_from_u64(8);
        for _ in 0..20 {
            let domain = SpaceSpec::vector_with_gram(sampling::random_spd(4, &mut rng)).unwrap();
            let codomain = SpaceSpec::euclidean(3);
            let f = sampling::random_vector(4, &mut rng);
            let z_star = sampling::random_vector(3, &mut rng);
            let probe = necessity_probe(&codomain, &z_star, &domain, &f).unwrap();
            let out = probe.apply(&f).unwrap();
            for a in 0..3 {
                assert_abs_diff_eq!(out[a], z_star[a], epsilon = 1e-10);
            }
            // Any vector with its f-component projected away is annihilated.
            let g = sampling::random_vector(4, &mut rng);
            let norm2 = domain.inner(&f, &f).unwrap();
            let coeff = domain.inner(&f, &g).unwrap() / norm2;
            let perp = &g - &(coeff * &f);
            let out_perp = probe.apply(&perp).unwrap();
            assert!(solvers::euclidean_norm(&out_perp) <= 1e-10);
        }
    }

    #[test]
    fn probe_adjoint_matches_closed_form_and_generic_adjoint() {
        let mut rng = ChaCha8Rng::seed_from_u64(9);
        let domain = SpaceSpec::vector_with_gram(sampling::random_spd(5, &mut rng)).unwrap();
        let codomain = SpaceSpec::vector_with_gram(sampling::random_spd(2, &mut rng)).unwrap();
        let f = sampling::random_vector(5, &mut rng);
        let z_star = sampling::random_vector(2, &mut rng);
        let probe = necessity_probe(&codomain, &z_star, &domain, &f).unwrap();
        let adj = probe.adjoint().unwrap();
        let norm2 = domain.inner(&f, &f).unwrap();
        for _ in 0..20 {
            let z = sampling::random_vector(2, &mut rng);
            let via_generic = adj.apply(&z).unwrap();
            let scale = codomain.inner(&z_star, &z).unwrap() / norm2;
            for i in 0..5 {
                assert_abs_diff_eq!(via_generic[i], scale * f[i], epsilon = 1e-9);
            }
        }
    }

    #[test]
    fn probe_rejects_zero_direction() {
        let domain = SpaceSpec::euclidean(2);
        let codomain = SpaceSpec::euclidean(1);
        let err = necessity_probe(&codomain, &array![1.0], &domain, &array![0.0, 0.0]).unwrap_err();
        assert!(matches!(err, OperatorError::ZeroVector));
    }

    #[test]
    fn compose_multiplies_matrices_with_space_checks() {
        let a = OperatorRep::new(
            SpaceSpec::euclidean(2),
            SpaceSpec::euclidean(3),
            array![[1.0, 0.0], [0.0, 1.0], [1.0, 1.0]],
        )
        .unwrap();
        let b = OperatorRep::new(
            SpaceSpec::euclidean(3),
            SpaceSpec::euclidean(2),
            array![[1.0, 0.0, 0.0], [0.0, 1.0, 0.0]],
        )
        .unwrap();
        let ba = b.compose(&a).unwrap();
        assert_eq!(ba.matrix(), &Array2::<f64>::eye(2));
        assert!(matches!(
            a.compose(&a).unwrap_err(),
            OperatorError::DomainMismatch
        ));
    }
}
