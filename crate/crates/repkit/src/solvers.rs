//! Shared dense numerical routines: SPD factorization and solves, a symmetric
//! eigensolver, the l1 proximal map, backtracking gradient descent, and a
//! finite-difference gradient checker.
//!
//! Everything here is sized for desk-scale problems (dimensions in the tens to
//! low hundreds), so the implementations favor clarity and exact reproducibility
//! over asymptotic speed.

use ndarray::{Array1, Array2, Axis};
use thiserror::Error;

/// Relative diagonal jitter applied once when a Cholesky factorization of a
/// nominally PSD matrix fails: `JITTER_SCALE * trace / dim` is added to the
/// diagonal and the factorization retried. A second failure is an error.
pub const JITTER_SCALE: f64 = 1e-10;

/// Residual bound enforced by [`solve_spd`]: `||A X - B|| <= RESIDUAL_TOL * (1 + ||B||)`.
pub const RESIDUAL_TOL: f64 = 1e-8;

#[derive(Debug, Error)]
pub enum SolverError {
    #[error("matrix is not square: {rows}x{cols}")]
    NotSquare { rows: usize, cols: usize },
    #[error("matrix is not symmetric: max |A - A^T| = {asym:e}")]
    NotSymmetric { asym: f64 },
    #[error("matrix is not positive definite (pivot {pivot:e} at index {index}, after jitter retry: {jittered})")]
    NotPositiveDefinite {
        pivot: f64,
        index: usize,
        jittered: bool,
    },
    #[error("dimension mismatch: left is {left}, right is {right}")]
    DimensionMismatch { left: usize, right: usize },
    #[error("linear solve residual {residual:e} exceeds bound {bound:e}")]
    ResidualTooLarge { residual: f64, bound: f64 },
    #[error("eigensolver failed to converge after {sweeps} sweeps (off-diagonal norm {off:e})")]
    EigenNoConvergence { sweeps: usize, off: f64 },
}

/// Lower-triangular Cholesky factor of a symmetric positive definite matrix.
///
/// Fails on the first non-positive pivot without modifying the input.
pub fn cholesky(a: &Array2<f64>) -> Result<Array2<f64>, SolverError> {
    let n = check_square(a)?;
    let mut l = Array2::<f64>::zeros((n, n));
    for j in 0..n {
        let mut d = a[(j, j)];
        for k in 0..j {
            d -= l[(j, k)] * l[(j, k)];
        }
        if d <= 0.0 || !d.is_finite() {
            return Err(SolverError::NotPositiveDefinite {
                pivot: d,
                index: j,
                jittered: false,
            });
        }
        let dj = d.sqrt();
        l[(j, j)] = dj;
        for i in (j + 1)..n {
            let mut s = a[(i, j)];
            for k in 0..j {
                s -= l[(i, k)] * l[(j, k)];
            }
            l[(i, j)] = s / dj;
        }
    }
    Ok(l)
}

/// Result of [`spd_cholesky_with_jitter`]: the factor, the (possibly jittered)
/// matrix that was actually factorized, and whether jitter was applied.
#[derive(Debug, Clone)]
pub struct SpdFactor {
    pub factor: Array2<f64>,
    pub matrix: Array2<f64>,
    pub jitter_applied: bool,
}

/// Cholesky with the one-shot jitter policy.
///
/// If the plain factorization fails, `JITTER_SCALE * trace / dim` is added to
/// the diagonal once and the factorization retried; a second failure is
/// reported as an error.
pub fn spd_cholesky_with_jitter(a: &Array2<f64>) -> Result<SpdFactor, SolverError> {
    let n = check_square(a)?;
    check_symmetric(a)?;
    match cholesky(a) {
        Ok(factor) => Ok(SpdFactor {
            factor,
            matrix: a.clone(),
            jitter_applied: false,
        }),
        Err(_) => {
            let trace: f64 = a.diag().sum();
            let eps = JITTER_SCALE * trace / n as f64;
            let mut jittered = a.clone();
            for i in 0..n {
                jittered[(i, i)] += eps;
            }
            match cholesky(&jittered) {
                Ok(factor) => Ok(SpdFactor {
                    factor,
                    matrix: jittered,
                    jitter_applied: true,
                }),
                Err(SolverError::NotPositiveDefinite { pivot, index, .. }) => {
                    Err(SolverError::NotPositiveDefinite {
                        pivot,
                        index,
                        jittered: true,
                    })
                }
                Err(e) => Err(e),
            }
        }
    }
}

/// Solves `L L^T x = b` given the lower Cholesky factor.
pub fn cholesky_solve_vec(l: &Array2<f64>, b: &Array1<f64>) -> Array1<f64> {
    let n = l.nrows();
    let mut y = b.clone();
    for i in 0..n {
        let mut s = y[i];
        for k in 0..i {
            s -= l[(i, k)] * y[k];
        }
        y[i] = s / l[(i, i)];
    }
    let mut x = y;
    for i in (0..n).rev() {
        let mut s = x[i];
        for k in (i + 1)..n {
            s -= l[(k, i)] * x[k];
        }
        x[i] = s / l[(i, i)];
    }
    x
}

/// Solves `A X = B` for symmetric positive definite `A` (multi-column `B`),
/// applying the jitter policy if the factorization needs it and verifying the
/// residual bound `||A X - B||_F <= RESIDUAL_TOL * (1 + ||B||_F)`.
pub fn solve_spd(a: &Array2<f64>, b: &Array2<f64>) -> Result<Array2<f64>, SolverError> {
    let n = check_square(a)?;
    if b.nrows() != n {
        return Err(SolverError::DimensionMismatch {
            left: n,
            right: b.nrows(),
        });
    }
    let fac = spd_cholesky_with_jitter(a)?;
    let mut x = Array2::<f64>::zeros(b.raw_dim());
    for (j, col) in b.axis_iter(Axis(1)).enumerate() {
        let sol = cholesky_solve_vec(&fac.factor, &col.to_owned());
        x.column_mut(j).assign(&sol);
    }
    let residual = frobenius_norm(&(a.dot(&x) - b));
    let bound = RESIDUAL_TOL * (1.0 + frobenius_norm(b));
    if residual > bound {
        return Err(SolverError::ResidualTooLarge { residual, bound });
    }
    Ok(x)
}

/// Single-rhs convenience wrapper around [`solve_spd`].
pub fn solve_spd_vec(a: &Array2<f64>, b: &Array1<f64>) -> Result<Array1<f64>, SolverError> {
    let b2 = b
        .clone()
        .into_shape_with_order((b.len(), 1))
        .expect("vector reshape");
    let x = solve_spd(a, &b2)?;
    Ok(x.column(0).to_owned())
}

pub fn frobenius_norm(a: &Array2<f64>) -> f64 {
    a.iter().map(|v| v * v).sum::<f64>().sqrt()
}

pub fn euclidean_norm(v: &Array1<f64>) -> f64 {
    v.iter().map(|x| x * x).sum::<f64>().sqrt()
}

fn check_square(a: &Array2<f64>) -> Result<usize, SolverError> {
    if a.nrows() != a.ncols() {
        return Err(SolverError::NotSquare {
            rows: a.nrows(),
            cols: a.ncols(),
        });
    }
    Ok(a.nrows())
}

fn check_symmetric(a: &Array2<f64>) -> Result<(), SolverError> {
    let n = a.nrows();
    let mut asym = 0.0f64;
    let mut scale = 0.0f64;
    for i in 0..n {
        for j in 0..n {
            asym = asym.max((a[(i, j)] - a[(j, i)]).abs());
            scale = scale.max(a[(i, j)].abs());
        }
    }
    if asym > 1e-8 * (1.0 + scale) {
        return Err(SolverError::NotSymmetric { asym });
    }
    Ok(())
}

/// Eigendecomposition of a symmetric matrix by cyclic Jacobi rotations.
///
/// Returns `(eigenvalues, eigenvectors)` with eigenvectors in columns, sorted
/// by ascending eigenvalue. Intended for small matrices; convergence is to
/// machine-level off-diagonal norm.
pub fn symmetric_eigen(a: &Array2<f64>) -> Result<(Array1<f64>, Array2<f64>), SolverError> {
    let n = check_square(a)?;
    check_symmetric(a)?;
    let mut m = a.clone();
    // Work on the symmetrized copy so roundoff asymmetry cannot accumulate.
    for i in 0..n {
        for j in 0..i {
            let v = 0.5 * (m[(i, j)] + m[(j, i)]);
            m[(i, j)] = v;
            m[(j, i)] = v;
        }
    }
    let mut v = Array2::<f64>::eye(n);
    let scale = m.iter().map(|x| x * x).sum::<f64>().sqrt().max(1e-300);
    let tol = 1e-14 * scale;
    let max_sweeps = 100;
    for _sweep in 0..max_sweeps {
        let off: f64 = {
            let mut s = 0.0;
            for p in 0..n {
                for q in (p + 1)..n {
                    s += m[(p, q)] * m[(p, q)];
                }
            }
            (2.0 * s).sqrt()
        };
        if off <= tol {
            let mut pairs: Vec<(f64, usize)> = (0..n).map(|i| (m[(i, i)], i)).collect();
            pairs.sort_by(|a, b| a.0.partial_cmp(&b.0).expect("finite eigenvalues"));
            let vals = Array1::from_iter(pairs.iter().map(|p| p.0));
            let mut vecs = Array2::<f64>::zeros((n, n));
            for (k, &(_, i)) in pairs.iter().enumerate() {
                vecs.column_mut(k).assign(&v.column(i));
            }
            return Ok((vals, vecs));
        }
        for p in 0..n {
            for q in (p + 1)..n {
                let apq = m[(p, q)];
                if apq.abs() <= tol / (n as f64) {
                    continue;
                }
                let app = m[(p, p)];
                let aqq = m[(q, q)];
                let theta = (aqq - app) / (2.0 * apq);
                let t = theta.signum() / (theta.abs() + (theta * theta + 1.0).sqrt());
                let c = 1.0 / (t * t + 1.0).sqrt();
                let s = t * c;
                for k in 0..n {
                    let mkp = m[(k, p)];
                    let mkq = m[(k, q)];
                    m[(k, p)] = c * mkp - s * mkq;
                    m[(k, q)] = s * mkp + c * mkq;
                }
                for k in 0..n {
                    let mpk = m[(p, k)];
                    let mqk = m[(q, k)];
                    m[(p, k)] = c * mpk - s * mqk;
                    m[(q, k)] = s * mpk + c * mqk;
                }
                for k in 0..n {
                    let vkp = v[(k, p)];
                    let vkq = v[(k, q)];
                    v[(k, p)] = c * vkp - s * vkq;
                    v[(k, q)] = s * vkp + c * vkq;
                }
            }
        }
    }
    let off: f64 = {
        let mut s = 0.0;
        for p in 0..n {
            for q in (p + 1)..n {
                s += m[(p, q)] * m[(p, q)];
            }
        }
        (2.0 * s).sqrt()
    };
    Err(SolverError::EigenNoConvergence {
        sweeps: max_sweeps,
        off,
    })
}

/// Projects a symmetric matrix onto the PSD cone by clipping negative
/// eigenvalues at zero.
pub fn psd_clip(a: &Array2<f64>) -> Result<Array2<f64>, SolverError> {
    let (vals, vecs) = symmetric_eigen(a)?;
    let n = a.nrows();
    let mut out = Array2::<f64>::zeros((n, n));
    for k in 0..n {
        let lam = vals[k].max(0.0);
        if lam == 0.0 {
            continue;
        }
        let u = vecs.column(k);
        for i in 0..n {
            for j in 0..n {
                out[(i, j)] += lam * u[i] * u[j];
            }
        }
    }
    // Exact symmetry for downstream serialization and membership checks.
    for i in 0..n {
        for j in 0..i {
            let v = 0.5 * (out[(i, j)] + out[(j, i)]);
            out[(i, j)] = v;
            out[(j, i)] = v;
        }
    }
    Ok(out)
}

/// Componentwise soft threshold: the proximal map of `t * ||.||_1`.
pub fn prox_l1(v: &Array1<f64>, t: f64) -> Array1<f64> {
    v.mapv(|x| {
        if x > t {
            x - t
        } else if x < -t {
            x + t
        } else {
            0.0
        }
    })
}

/// Neumaier compensated sum, used when re-verifying reported counterexamples
/// so that a verdict never rests on a cancellation artifact.
pub fn compensated_sum<I: IntoIterator<Item = f64>>(values: I) -> f64 {
    let mut sum = 0.0f64;
    let mut comp = 0.0f64;
    for x in values {
        let t = sum + x;
        if sum.abs() >= x.abs() {
            comp += (sum - t) + x;
        } else {
            comp += (x - t) + sum;
        }
        sum = t;
    }
    sum + comp
}

/// Configuration for [`gradient_descent`].
#[derive(Debug, Clone)]
pub struct DescentConfig {
    pub max_iters: usize,
    pub grad_tol: f64,
    pub initial_step: f64,
    /// Multiplicative backtracking factor in (0, 1).
    pub backtrack: f64,
    /// Armijo sufficient-decrease constant.
    pub armijo: f64,
    /// Line search gives up after this many step halvings.
    pub max_halvings: usize,
}

impl Default for DescentConfig {
    fn default() -> Self {
        DescentConfig {
            max_iters: 10_000,
            grad_tol: 1e-10,
            initial_step: 1.0,
            backtrack: 0.5,
            armijo: 1e-4,
            max_halvings: 60,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum DescentStatus {
    /// Gradient norm fell below `grad_tol`.
    GradToleranceReached,
    /// Iteration budget exhausted.
    MaxItersReached,
    /// The line search could not find decrease within `max_halvings`; the
    /// last iterate is still returned.
    LineSearchStalled,
}

#[derive(Debug, Clone)]
pub struct DescentResult {
    pub x: Array1<f64>,
    /// Objective value at every accepted iterate, starting with the initial point.
    pub trace: Vec<f64>,
    pub status: DescentStatus,
    pub iterations: usize,
}

/// Gradient descent with Armijo backtracking.
///
/// The accepted-objective trace is nonincreasing by construction. The line
/// search warm-starts from twice the previously accepted step, capped at
/// `initial_step`, which keeps the halving count small on stiff problems.
pub fn gradient_descent<F, G>(
    objective: F,
    gradient: G,
    x0: &Array1<f64>,
    cfg: &DescentConfig,
) -> DescentResult
where
    F: Fn(&Array1<f64>) -> f64,
    G: Fn(&Array1<f64>) -> Array1<f64>,
{
    let mut x = x0.clone();
    let mut fx = objective(&x);
    let mut trace = vec![fx];
    let mut last_step = cfg.initial_step;
    for iter in 0..cfg.max_iters {
        let g = gradient(&x);
        let gnorm2: f64 = g.iter().map(|v| v * v).sum();
        if gnorm2.sqrt() <= cfg.grad_tol {
            return DescentResult {
                x,
                trace,
                status: DescentStatus::GradToleranceReached,
                iterations: iter,
            };
        }
        let mut t = (2.0 * last_step).min(cfg.initial_step);
        let mut halvings = 0;
        loop {
            let candidate = &x - &(t * &g);
            let fc = objective(&candidate);
            if fc < fx && fc <= fx - cfg.armijo * t * gnorm2 {
                x = candidate;
                fx = fc;
                last_step = t;
                trace.push(fx);
                break;
            }
            halvings += 1;
            if halvings > cfg.max_halvings {
                return DescentResult {
                    x,
                    trace,
                    status: DescentStatus::LineSearchStalled,
                    iterations: iter,
                };
            }
            t *= cfg.backtrack;
        }
    }
    DescentResult {
        x,
        trace,
        status: DescentStatus::MaxItersReached,
        iterations: cfg.max_iters,
    }
}

/// Maximum relative central-difference error of `gradient` against `objective`
/// at `x`, with per-component denominator `max(1, |analytic_i|)`.
pub fn fd_gradient_check<F, G>(objective: F, gradient: G, x: &Array1<f64>, h: f64) -> f64
where
    F: Fn(&Array1<f64>) -> f64,
    G: Fn(&Array1<f64>) -> Array1<f64>,
{
    let g = gradient(x);
    let mut worst = 0.0f64;
    for i in 0..x.len() {
        let mut xp = x.clone();
        let mut xm = x.clone();
        xp[i] += h;
        xm[i] -= h;
        let fd = (objective(&xp) - objective(&xm)) / (2.0 * h);
        let err = (fd - g[i]).abs() / g[i].abs().max(1.0);
        worst = worst.max(err);
    }
    worst
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;
    use ndarray::array;

    #[test]
    fn cholesky_reconstructs_spd_matrix() {
        let a = array![[4.0, 2.0, 0.6], [2.0, 5.0, 1.1], [0.6, 1.1, 3.0]];
        let l = cholesky(&a).expect("SPD");
        let recon = l.dot(&l.t());
        assert!(frobenius_norm(&(&recon - &a)) < 1e-12);
    }

    #[test]
    fn cholesky_rejects_indefinite_matrix() {
        let a = array![[1.0, 2.0], [2.0, 1.0]];
        assert!(matches!(
            cholesky(&a),
            Err(SolverError::NotPositiveDefinite { .. })
        ));
    }

    #[test]
    fn jitter_rescues_rank_deficient_psd_matrix() {
        // Doubled row/column: PSD but singular, plain Cholesky must fail.
        let a = array![[1.0, 1.0], [1.0, 1.0]];
        assert!(cholesky(&a).is_err());
        let fac = spd_cholesky_with_jitter(&a).expect("jitter retry succeeds");
        assert!(fac.jitter_applied);
        let expected_eps = JITTER_SCALE * 2.0 / 2.0;
        assert_abs_diff_eq!(fac.matrix[(0, 0)], 1.0 + expected_eps, epsilon = 1e-18);
    }

    #[test]
    fn jitter_does_not_rescue_indefinite_matrix() {
        let a = array![[0.0, 1.0], [1.0, 0.0]];
        match spd_cholesky_with_jitter(&a) {
            Err(SolverError::NotPositiveDefinite { jittered, .. }) => assert!(jittered),
            other => panic!("expected second failure, got {other:?}"),
        }
    }

    #[test]
    fn solve_spd_meets_residual_bound() {
        let a = array![[6.0, 2.0, 1.0], [2.0, 5.0, 2.0], [1.0, 2.0, 4.0]];
        let b = array![[1.0, 0.0], [0.0, 1.0], [2.0, -1.0]];
        let x = solve_spd(&a, &b).expect("solve");
        let residual = frobenius_norm(&(a.dot(&x) - &b));
        assert!(residual <= RESIDUAL_TOL * (1.0 + frobenius_norm(&b)));
    }

    #[test]
    fn symmetric_eigen_matches_hand_computed_2x2() {
        // Eigenvalues of [[2,1],[1,2]] are 1 and 3.
        let a = array![[2.0, 1.0], [1.0, 2.0]];
        let (vals, vecs) = symmetric_eigen(&a).expect("eigen");
        assert_abs_diff_eq!(vals[0], 1.0, epsilon = 1e-12);
        assert_abs_diff_eq!(vals[1], 3.0, epsilon = 1e-12);
        // Columns reconstruct the matrix.
        let lam = Array2::from_diag(&vals);
        let recon = vecs.dot(&lam).dot(&vecs.t());
        assert!(frobenius_norm(&(&recon - &a)) < 1e-12);
    }

    #[test]
    fn symmetric_eigen_reconstructs_random_matrix() {
        use rand::Rng;
        use rand::SeedableRng;
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(7);
        let n = 6;
        let raw = Array2::from_shape_fn((n, n), |_| rng.random::<f64>() - 0.5);
        let sym = 0.5 * (&raw + &raw.t());
        let (vals, vecs) = symmetric_eigen(&sym).expect("eigen");
        let lam = Array2::from_diag(&vals);
        let recon = vecs.dot(&lam).dot(&vecs.t());
        assert!(frobenius_norm(&(&recon - &sym)) < 1e-10);
        let gram = vecs.t().dot(&vecs);
        assert!(frobenius_norm(&(&gram - &Array2::<f64>::eye(n))) < 1e-10);
    }

    #[test]
    fn psd_clip_removes_negative_directions() {
        let a = array![[1.0, 0.0], [0.0, -2.0]];
        let clipped = psd_clip(&a).expect("clip");
        assert_abs_diff_eq!(clipped[(0, 0)], 1.0, epsilon = 1e-12);
        assert_abs_diff_eq!(clipped[(1, 1)], 0.0, epsilon = 1e-12);
    }

    #[test]
    fn prox_l1_matches_grid_search_oracle() {
        // Independent oracle: dense 1-D grid minimization of
        // 0.5 (x - v)^2 + t |x| for each component.
        let vs = [-2.5, -0.3, 0.0, 0.4, 1.7];
        let t = 0.5;
        let prox = prox_l1(&Array1::from_iter(vs.iter().copied()), t);
        for (i, &v) in vs.iter().enumerate() {
            let mut best_x = f64::NAN;
            let mut best_f = f64::INFINITY;
            let mut x = -4.0;
            while x <= 4.0 {
                let f = 0.5 * (x - v) * (x - v) + t * x.abs();
                if f < best_f {
                    best_f = f;
                    best_x = x;
                }
                x += 1e-4;
            }
            assert!((prox[i] - best_x).abs() < 1e-3, "component {i}");
        }
    }

    #[test]
    fn descent_minimizes_shifted_quadratic_in_trace_tolerance() {
        let a = array![1.0, -2.0, 3.0];
        let obj = |x: &Array1<f64>| {
            0.5 * x
                .iter()
                .zip(a.iter())
                .map(|(x, a)| (x - a) * (x - a))
                .sum::<f64>()
        };
        let grad = |x: &Array1<f64>| x - &a;
        let res = gradient_descent(obj, grad, &Array1::zeros(3), &DescentConfig::default());
        assert_eq!(res.status, DescentStatus::GradToleranceReached);
        for i in 0..3 {
            assert_abs_diff_eq!(res.x[i], a[i], epsilon = 1e-9);
        }
    }

    #[test]
    fn descent_trace_is_nonincreasing_on_rosenbrock() {
        let obj = |x: &Array1<f64>| {
            let (a, b) = (x[0], x[1]);
            (1.0 - a) * (1.0 - a) + 100.0 * (b - a * a) * (b - a * a)
        };
        let grad = |x: &Array1<f64>| {
            let (a, b) = (x[0], x[1]);
            array![
                -2.0 * (1.0 - a) - 400.0 * a * (b - a * a),
                200.0 * (b - a * a)
            ]
        };
        let cfg = DescentConfig {
            max_iters: 2000,
            ..DescentConfig::default()
        };
        let res = gradient_descent(obj, grad, &array![-1.2, 1.0], &cfg);
        for w in res.trace.windows(2) {
            assert!(w[1] <= w[0] + 1e-15, "trace must not increase");
        }
        assert!(res.trace.last().unwrap() < &res.trace[0]);
    }

    #[test]
    fn line_search_stall_reports_last_iterate() {
        // Objective decreasing toward -inf along -x with unbounded below slope;
        // a gradient pointing the wrong way can never satisfy Armijo.
        let obj = |x: &Array1<f64>| x[0];
        let bad_grad = |_: &Array1<f64>| array![-1.0f64]; // ascent direction
        let res = gradient_descent(obj, bad_grad, &array![0.5], &DescentConfig::default());
        assert_eq!(res.status, DescentStatus::LineSearchStalled);
        assert_abs_diff_eq!(res.x[0], 0.5, epsilon = 0.0);
    }

    #[test]
    fn fd_check_accepts_true_gradient_and_catches_planted_bug() {
        let obj = |x: &Array1<f64>| x[0] * x[0] * x[1] + x[1].sin();
        let grad_ok = |x: &Array1<f64>| array![2.0 * x[0] * x[1], x[0] * x[0] + x[1].cos()];
        let grad_bad = |x: &Array1<f64>| array![2.0 * x[0] * x[1], x[0] * x[0] - x[1].cos()];
        let x = array![0.7, -1.3];
        assert!(fd_gradient_check(obj, grad_ok, &x, 1e-5) < 1e-8);
        assert!(fd_gradient_check(obj, grad_bad, &x, 1e-5) > 1e-2);
    }

    #[test]
    fn compensated_sum_handles_cancellation() {
        let vals = vec![1e16, 1.0, -1e16];
        assert_abs_diff_eq!(compensated_sum(vals), 1.0, epsilon = 0.0);
    }
}
