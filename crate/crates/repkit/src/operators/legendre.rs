//! Orthonormal Legendre polynomial bases on [-1,1]^n, the gradient operator
//! in coefficient coordinates, and its integration-by-parts companion.
//!
//! Basis functions are tensor products of the normalized one-dimensional
//! Legendre polynomials `sqrt(j + 1/2) P_j`, so every space here carries the
//! identity Gram matrix. Differentiation is exact in coefficient space via
//! the classical expansion of `P_j'` in lower-degree polynomials; quadrature
//! is used only to project sampled functions and to verify orthonormality.

use super::{OperatorError, OperatorRep};
use crate::hilbert::SpaceSpec;
use ndarray::{Array1, Array2};

/// Quadrature nodes per axis used for all polynomial inner products: exact
/// for integrands of per-axis degree up to `2 * (max_degree + 2) - 1`.
fn quadrature_nodes_for(max_degree: usize) -> usize {
    max_degree + 2
}

/// Tensor-product Legendre basis for functions [-1,1]^n -> R^m with per-axis
/// degree at most `max_degree`. Coefficients are stored output-major: block
/// `j` of length `scalar_dim` holds the coefficients of component `j`.
#[derive(Debug, Clone, PartialEq)]
pub struct LegendreBasis {
    max_degree: usize,
    n_inputs: usize,
    m_outputs: usize,
    include_constant: bool,
    indices: Vec<Vec<usize>>,
}

impl LegendreBasis {
    pub fn new(max_degree: usize, n_inputs: usize, m_outputs: usize) -> LegendreBasis {
        Self::build(max_degree, n_inputs, m_outputs, true)
    }

    /// Same family with the all-zero multi-index removed, so the gradient
    /// operator restricted to this basis is injective.
    pub fn without_constant(max_degree: usize, n_inputs: usize, m_outputs: usize) -> LegendreBasis {
        assert!(max_degree >= 1, "a constant-free basis needs degree >= 1");
        Self::build(max_degree, n_inputs, m_outputs, false)
    }

    fn build(
        max_degree: usize,
        n_inputs: usize,
        m_outputs: usize,
        include_constant: bool,
    ) -> LegendreBasis {
        assert!(n_inputs >= 1 && m_outputs >= 1);
        let mut indices = Vec::new();
        let mut idx = vec![0usize; n_inputs];
        loop {
            if include_constant || idx.iter().any(|&d| d > 0) {
                indices.push(idx.clone());
            }
            // Odometer increment, last axis fastest.
            let mut axis = n_inputs;
            loop {
                if axis == 0 {
                    return LegendreBasis {
                        max_degree,
                        n_inputs,
                        m_outputs,
                        include_constant,
                        indices,
                    };
                }
                axis -= 1;
                if idx[axis] < max_degree {
                    idx[axis] += 1;
                    break;
                }
                idx[axis] = 0;
            }
        }
    }

    pub fn max_degree(&self) -> usize {
        self.max_degree
    }

    pub fn n_inputs(&self) -> usize {
        self.n_inputs
    }

    pub fn m_outputs(&self) -> usize {
        self.m_outputs
    }

    pub fn include_constant(&self) -> bool {
        self.include_constant
    }

    /// Scalar multi-indices in odometer order.
    pub fn indices(&self) -> &[Vec<usize>] {
        &self.indices
    }

    pub fn scalar_dim(&self) -> usize {
        self.indices.len()
    }

    pub fn dim(&self) -> usize {
        self.m_outputs * self.scalar_dim()
    }

    /// The coefficient space; the basis is orthonormal so the Gram matrix is
    /// the identity.
    pub fn space(&self) -> SpaceSpec {
        SpaceSpec::euclidean(self.dim())
    }

    /// The same family with constants restored (identity when already full).
    pub fn with_constant(&self) -> LegendreBasis {
        Self::build(self.max_degree, self.n_inputs, self.m_outputs, true)
    }

    /// Values of all scalar basis functions at a point.
    pub fn eval_scalar_basis(&self, x: &Array1<f64>) -> Result<Array1<f64>, OperatorError> {
        if x.len() != self.n_inputs {
            return Err(OperatorError::VectorLength {
                expected: self.n_inputs,
                got: x.len(),
            });
        }
        let per_axis: Vec<Vec<f64>> = (0..self.n_inputs)
            .map(|i| normalized_values(x[i], self.max_degree))
            .collect();
        let mut out = Array1::zeros(self.scalar_dim());
        for (a, idx) in self.indices.iter().enumerate() {
            let mut v = 1.0;
            for (axis, &deg) in idx.iter().enumerate() {
                v *= per_axis[axis][deg];
            }
            out[a] = v;
        }
        Ok(out)
    }

    /// Evaluates the function with the given coefficients at a point.
    pub fn eval_function(
        &self,
        coeffs: &Array1<f64>,
        x: &Array1<f64>,
    ) -> Result<Array1<f64>, OperatorError> {
        if coeffs.len() != self.dim() {
            return Err(OperatorError::VectorLength {
                expected: self.dim(),
                got: coeffs.len(),
            });
        }
        let basis_vals = self.eval_scalar_basis(x)?;
        let n = self.scalar_dim();
        let mut out = Array1::zeros(self.m_outputs);
        for j in 0..self.m_outputs {
            let mut acc = 0.0;
            for a in 0..n {
                acc += coeffs[j * n + a] * basis_vals[a];
            }
            out[j] = acc;
        }
        Ok(out)
    }

    /// Coefficients of a scalar function obtained by Gauss-Legendre
    /// projection; exact when the function is a polynomial of per-axis degree
    /// at most `max_degree`.
    pub fn project_scalar_function<F>(&self, f: F) -> Array1<f64>
    where
        F: Fn(&Array1<f64>) -> f64,
    {
        let q = quadrature_nodes_for(self.max_degree);
        let (nodes, weights) = gauss_legendre(q);
        let mut coeffs = Array1::zeros(self.scalar_dim());
        let mut grid = vec![0usize; self.n_inputs];
        loop {
            let x = Array1::from_iter(grid.iter().map(|&g| nodes[g]));
            let w: f64 = grid.iter().map(|&g| weights[g]).product();
            let basis_vals = self.eval_scalar_basis(&x).expect("internal grid point");
            let fx = f(&x);
            for a in 0..self.scalar_dim() {
                coeffs[a] += w * fx * basis_vals[a];
            }
            let mut axis = self.n_inputs;
            loop {
                if axis == 0 {
                    return coeffs;
                }
                axis -= 1;
                if grid[axis] + 1 < q {
                    grid[axis] += 1;
                    break;
                }
                grid[axis] = 0;
            }
        }
    }

    /// Gram matrix of the scalar basis under Gauss-Legendre quadrature; the
    /// orthonormality invariant says this is the identity within 1e-8.
    pub fn quadrature_scalar_gram(&self) -> Array2<f64> {
        let q = quadrature_nodes_for(self.max_degree);
        let (nodes, weights) = gauss_legendre(q);
        let n = self.scalar_dim();
        let mut gram = Array2::zeros((n, n));
        let mut grid = vec![0usize; self.n_inputs];
        loop {
            let x = Array1::from_iter(grid.iter().map(|&g| nodes[g]));
            let w: f64 = grid.iter().map(|&g| weights[g]).product();
            let vals = self.eval_scalar_basis(&x).expect("internal grid point");
            for a in 0..n {
                for b in 0..n {
                    gram[(a, b)] += w * vals[a] * vals[b];
                }
            }
            let mut axis = self.n_inputs;
            loop {
                if axis == 0 {
                    return gram;
                }
                axis -= 1;
                if grid[axis] + 1 < q {
                    grid[axis] += 1;
                    break;
                }
                grid[axis] = 0;
            }
        }
    }
}

/// Unnormalized Legendre values `P_0(x) .. P_max(x)` by the three-term
/// recurrence.
pub fn legendre_values(x: f64, max_degree: usize) -> Vec<f64> {
    let mut vals = Vec::with_capacity(max_degree + 1);
    vals.push(1.0);
    if max_degree >= 1 {
        vals.push(x);
    }
    for j in 1..max_degree {
        let jf = j as f64;
        let next = ((2.0 * jf + 1.0) * x * vals[j] - jf * vals[j - 1]) / (jf + 1.0);
        vals.push(next);
    }
    vals
}

/// Normalized values `sqrt(j + 1/2) P_j(x)`, orthonormal on [-1,1].
pub fn normalized_values(x: f64, max_degree: usize) -> Vec<f64> {
    legendre_values(x, max_degree)
        .into_iter()
        .enumerate()
        .map(|(j, p)| (j as f64 + 0.5).sqrt() * p)
        .collect()
}

/// One-dimensional differentiation matrix for the normalized family:
/// `d/dx p~_b = sum_a D[a][b] p~_a`, from the classical expansion
/// `P_b' = sum_{a < b, b-a odd} (2a+1) P_a`.
fn normalized_derivative_matrix_1d(max_degree: usize) -> Array2<f64> {
    let n = max_degree + 1;
    let mut d = Array2::zeros((n, n));
    for b in 0..n {
        for a in 0..b {
            if (b - a) % 2 == 1 {
                let nb = (b as f64 + 0.5).sqrt();
                let na = (a as f64 + 0.5).sqrt();
                d[(a, b)] = 2.0 * nb * na;
            }
        }
    }
    d
}

/// Matrix of `d/dx_axis` from the scalar indices of `domain` to the scalar
/// indices of its full companion basis. Differentiation lowers the degree on
/// one axis, so the truncation is never left.
fn axis_derivative_matrix(
    domain: &LegendreBasis,
    full: &LegendreBasis,
    axis: usize,
) -> Array2<f64> {
    let d1 = normalized_derivative_matrix_1d(domain.max_degree());
    let mut pos = std::collections::HashMap::new();
    for (b, idx) in full.indices().iter().enumerate() {
        pos.insert(idx.clone(), b);
    }
    let mut m = Array2::zeros((full.scalar_dim(), domain.scalar_dim()));
    for (a, idx) in domain.indices().iter().enumerate() {
        let deg = idx[axis];
        for target_deg in 0..deg {
            let c = d1[(target_deg, deg)];
            if c == 0.0 {
                continue;
            }
            let mut tgt = idx.clone();
            tgt[axis] = target_deg;
            let b = *pos.get(&tgt).expect("derivative stays in the truncation");
            m[(b, a)] = c;
        }
    }
    m
}

/// The gradient operator `D f = (d f_j / d x_i)_{j,i}` in coefficient
/// coordinates. Domain: the given basis. Codomain: `m x n` matrix-valued
/// functions over the full companion basis, entry `(j, i)` stored at block
/// `j * n + i`.
pub fn derivative_operator(basis: &LegendreBasis) -> OperatorRep {
    let full = basis.with_constant();
    let n = basis.n_inputs();
    let m = basis.m_outputs();
    let nd = basis.scalar_dim();
    let nf = full.scalar_dim();
    let mut matrix = Array2::zeros((m * n * nf, m * nd));
    for i in 0..n {
        let di = axis_derivative_matrix(basis, &full, i);
        for j in 0..m {
            let row0 = (j * n + i) * nf;
            let col0 = j * nd;
            for b in 0..nf {
                for a in 0..nd {
                    matrix[(row0 + b, col0 + a)] = di[(b, a)];
                }
            }
        }
    }
    let codomain = SpaceSpec::euclidean(m * n * nf);
    OperatorRep::new(basis.space(), codomain, matrix).expect("shapes are consistent")
}

/// The integration-by-parts companion of [`derivative_operator`]: for matrix
/// valued `g` it realizes `[D* g]_j = -sum_i d/dx_i [g]_{j i}` as a matrix
/// from the gradient codomain to `m`-vector-valued functions over the full
/// basis. It agrees with the true adjoint on functions whose boundary terms
/// vanish.
pub fn adjoint_by_parts(basis: &LegendreBasis) -> OperatorRep {
    let full = basis.with_constant();
    let n = basis.n_inputs();
    let m = basis.m_outputs();
    let nf = full.scalar_dim();
    let di_mats: Vec<Array2<f64>> = (0..n)
        .map(|i| axis_derivative_matrix(&full, &full, i))
        .collect();
    let mut matrix = Array2::zeros((m * nf, m * n * nf));
    for j in 0..m {
        for i in 0..n {
            let col0 = (j * n + i) * nf;
            let row0 = j * nf;
            for b in 0..nf {
                for a in 0..nf {
                    matrix[(row0 + b, col0 + a)] = -di_mats[i][(b, a)];
                }
            }
        }
    }
    let domain = SpaceSpec::euclidean(m * n * nf);
    let codomain = SpaceSpec::euclidean(m * nf);
    OperatorRep::new(domain, codomain, matrix).expect("shapes are consistent")
}

/// Gauss-Legendre nodes and weights on [-1,1], exact for polynomials of
/// degree `2q - 1`.
pub fn gauss_legendre(q: usize) -> (Vec<f64>, Vec<f64>) {
    assert!(q >= 1);
    let mut nodes = vec![0.0; q];
    let mut weights = vec![0.0; q];
    for i in 1..=q {
        let mut x = (std::f64::consts::PI * (i as f64 - 0.25) / (q as f64 + 0.5)).cos();
        let mut dp = 0.0;
        for _ in 0..100 {
            let vals = legendre_values(x, q);
            let p = vals[q];
            let pm1 = vals[q - 1];
            dp = q as f64 * (x * p - pm1) / (x * x - 1.0);
            let step = p / dp;
            x -= step;
            if step.abs() < 1e-15 {
                break;
            }
        }
        nodes[i - 1] = x;
        weights[i - 1] = 2.0 / ((1.0 - x * x) * dp * dp);
    }
    let mut order: Vec<usize> = (0..q).collect();
    order.sort_by(|&a, &b| nodes[a].partial_cmp(&nodes[b]).unwrap());
    let nodes_sorted: Vec<f64> = order.iter().map(|&k| nodes[k]).collect();
    let weights_sorted: Vec<f64> = order.iter().map(|&k| weights[k]).collect();
    (nodes_sorted, weights_sorted)
}
