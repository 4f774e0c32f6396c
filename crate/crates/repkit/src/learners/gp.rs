//! Stochastic regression with random coefficient vectors: means solve the
//! ridge system, covariance blocks minimize the expectation-expanded
//! quadratic objective.
//!
//! Observation noise is assumed independent across samples and independent
//! of the outputs; the assumption travels with the saved model.

use super::{validate_psd, Dataset, LearnerConfig, LearnerError};
use crate::kernels::KernelSpec;
use crate::solvers;
use ndarray::{Array1, Array2};

/// A fitted stochastic kernel expansion: coefficient means plus the full
/// block covariance of the coefficient vector.
#[derive(Debug, Clone)]
pub struct GaussianRepresenterModel {
    kernel: KernelSpec,
    inputs: Vec<Array1<f64>>,
    /// One mean row per training point.
    means: Array2<f64>,
    /// Symmetric PSD block matrix; block (i, j) is the covariance between
    /// coefficients i and j.
    covariance: Array2<f64>,
    lambda: f64,
    noise_cov: Array2<f64>,
}

impl GaussianRepresenterModel {
    /// Rebuilds a model from stored parts, revalidating every shape and the
    /// positive-semidefiniteness of both covariance inputs.
    pub fn from_parts(
        kernel: KernelSpec,
        inputs: Vec<Array1<f64>>,
        means: Array2<f64>,
        covariance: Array2<f64>,
        lambda: f64,
        noise_cov: Array2<f64>,
    ) -> Result<GaussianRepresenterModel, LearnerError> {
        if inputs.is_empty() || means.nrows() != inputs.len() {
            return Err(LearnerError::EmptyDataset);
        }
        if !(lambda > 0.0) {
            return Err(LearnerError::BadLambda { got: lambda });
        }
        let n = means.ncols();
        if kernel.output_dim != n {
            return Err(LearnerError::OutputDimMismatch {
                kernel: kernel.output_dim,
                data: n,
            });
        }
        let mn = inputs.len() * n;
        if covariance.nrows() != mn || covariance.ncols() != mn {
            return Err(LearnerError::BadConfig(format!(
                "covariance must be {mn}x{mn}, got {}x{}",
                covariance.nrows(),
                covariance.ncols()
            )));
        }
        validate_psd(&covariance, 0)?;
        if noise_cov.nrows() != n || noise_cov.ncols() != n {
            return Err(LearnerError::BadConfig(format!(
                "noise covariance must be {n}x{n}, got {}x{}",
                noise_cov.nrows(),
                noise_cov.ncols()
            )));
        }
        validate_psd(&noise_cov, 0)?;
        Ok(GaussianRepresenterModel {
            kernel,
            inputs,
            means,
            covariance,
            lambda,
            noise_cov,
        })
    }

    pub fn kernel(&self) -> &KernelSpec {
        &self.kernel
    }

    pub fn inputs(&self) -> &[Array1<f64>] {
        &self.inputs
    }

    pub fn means(&self) -> &Array2<f64> {
        &self.means
    }

    pub fn covariance(&self) -> &Array2<f64> {
        &self.covariance
    }

    pub fn lambda(&self) -> f64 {
        self.lambda
    }

    pub fn noise_cov(&self) -> &Array2<f64> {
        &self.noise_cov
    }

    pub fn output_dim(&self) -> usize {
        self.means.ncols()
    }

    /// Covariance block between coefficients `i` and `j`.
    pub fn covariance_block(&self, i: usize, j: usize) -> Array2<f64> {
        let n = self.output_dim();
        let mut block = Array2::zeros((n, n));
        for a in 0..n {
            for b in 0..n {
                block[(a, b)] = self.covariance[(i * n + a, j * n + b)];
            }
        }
        block
    }
}

/// Kernel Gram expanded to blocks: entry `(i a, j b)` is `K(x_i, x_j)` when
/// `a == b`, zero otherwise.
pub fn block_kernel(k: &Array2<f64>, n: usize) -> Array2<f64> {
    let m = k.nrows();
    let mut out = Array2::zeros((m * n, m * n));
    for i in 0..m {
        for j in 0..m {
            for a in 0..n {
                out[(i * n + a, j * n + a)] = k[(i, j)];
            }
        }
    }
    out
}

/// Stacks square blocks of one size down the diagonal.
pub fn block_diag(blocks: &[Array2<f64>]) -> Array2<f64> {
    let n = blocks[0].nrows();
    let m = blocks.len();
    let mut out = Array2::zeros((m * n, m * n));
    for (i, b) in blocks.iter().enumerate() {
        for a in 0..n {
            for c in 0..n {
                out[(i * n + a, i * n + c)] = b[(a, c)];
            }
        }
    }
    out
}

fn trace(m: &Array2<f64>) -> f64 {
    m.diag().sum()
}

fn symmetrize(m: &Array2<f64>) -> Array2<f64> {
    0.5 * (m + &m.t().to_owned())
}

/// The trace part of the expectation-expanded objective as a function of
/// the adaptation matrix `B`: residual covariance energy plus the
/// regularizer's second moment.
pub fn trace_objective(
    kn: &Array2<f64>,
    q: &Array2<f64>,
    delta: &Array2<f64>,
    b: &Array2<f64>,
) -> f64 {
    let bd = b.dot(delta);
    trace(delta) - 2.0 * trace(&kn.dot(&bd)) + trace(&q.dot(&bd).dot(&b.t().to_owned()))
}

/// Unconstrained matrix gradient of [`trace_objective`] in `B`.
pub fn trace_gradient(
    kn: &Array2<f64>,
    q: &Array2<f64>,
    delta: &Array2<f64>,
    b: &Array2<f64>,
) -> Array2<f64> {
    (2.0 * (&q.dot(b) - kn)).dot(delta)
}

/// Minimizes the trace objective over symmetric PSD matrices by projected
/// gradient steps with an exact line step along the projected direction.
fn minimize_trace_objective(
    kn: &Array2<f64>,
    q: &Array2<f64>,
    delta: &Array2<f64>,
) -> Result<Array2<f64>, LearnerError> {
    let dim = kn.nrows();
    let mut b = Array2::zeros((dim, dim));
    let mut value = trace_objective(kn, q, delta, &b);
    let scale = 1.0 + solvers::frobenius_norm(&kn.dot(delta));
    for _ in 0..5000 {
        let grad = symmetrize(&trace_gradient(kn, q, delta, &b));
        let gnorm = solvers::frobenius_norm(&grad);
        if gnorm <= 1e-11 * scale {
            break;
        }
        let curvature = trace(&q.dot(&grad).dot(delta).dot(&grad.t().to_owned()));
        if curvature <= f64::MIN_POSITIVE {
            break;
        }
        let mut step = gnorm * gnorm / (2.0 * curvature);
        let mut accepted = false;
        for _ in 0..60 {
            let trial = solvers::psd_clip(&symmetrize(&(&b - &(step * &grad))))?;
            let trial_value = trace_objective(kn, q, delta, &trial);
            if trial_value <= value {
                if (value - trial_value).abs() <= 1e-15 * (1.0 + value.abs()) {
                    b = trial;
                    return Ok(b);
                }
                b = trial;
                value = trial_value;
                accepted = true;
                break;
            }
            step *= 0.5;
        }
        if !accepted {
            break;
        }
    }
    Ok(b)
}

/// Fits means and covariance blocks of the coefficient vector. Means solve
/// `(K + lambda I) Zbar = Ybar`; the covariance comes from the minimizing
/// adaptation of the coefficients to the stochastic residual, projected to
/// the PSD cone.
pub fn fit_gp(
    data: &Dataset,
    cfg: &LearnerConfig,
) -> Result<GaussianRepresenterModel, LearnerError> {
    if !(cfg.lambda > 0.0) {
        return Err(LearnerError::BadLambda { got: cfg.lambda });
    }
    if cfg.kernel.output_dim != data.output_dim() {
        return Err(LearnerError::OutputDimMismatch {
            kernel: cfg.kernel.output_dim,
            data: data.output_dim(),
        });
    }
    let m = data.len();
    let n = data.output_dim();
    let noise = match &cfg.noise_cov {
        Some(s) => {
            if s.nrows() != n || s.ncols() != n {
                return Err(LearnerError::NotPsd { index: 0 });
            }
            validate_psd(s, 0)?;
            s.clone()
        }
        None => Array2::zeros((n, n)),
    };

    let k = cfg.kernel.scalar_gram(data.inputs())?;
    let mut a = k.clone();
    for i in 0..m {
        a[(i, i)] += cfg.lambda;
    }
    let means = solvers::solve_spd(&a, &data.output_matrix())?;

    let deltas: Vec<Array2<f64>> = (0..m)
        .map(|i| {
            let base = data
                .output_covs()
                .map(|covs| covs[i].clone())
                .unwrap_or_else(|| Array2::zeros((n, n)));
            base + &noise
        })
        .collect();
    let stochastic = deltas.iter().any(|d| d.iter().any(|&x| x != 0.0));

    let covariance = if stochastic {
        let kn = block_kernel(&k, n);
        let q = &kn.dot(&kn) + &(cfg.lambda * &kn);
        let delta = block_diag(&deltas);
        let b = minimize_trace_objective(&kn, &q, &delta)?;
        let c = b.dot(&delta).dot(&b.t().to_owned());
        symmetrize(&solvers::psd_clip(&symmetrize(&c))?)
    } else {
        Array2::zeros((m * n, m * n))
    };

    Ok(GaussianRepresenterModel {
        kernel: cfg.kernel.clone(),
        inputs: data.inputs().to_vec(),
        means,
        covariance,
        lambda: cfg.lambda,
        noise_cov: noise,
    })
}

/// Predictive mean and covariance at a point: the mean is the kernel
/// expansion of the coefficient means, the covariance contracts the block
/// covariance with kernel values on both sides.
pub fn gp_predict(
    model: &GaussianRepresenterModel,
    x: &Array1<f64>,
) -> Result<(Array1<f64>, Array2<f64>), LearnerError> {
    let m = model.inputs.len();
    let n = model.output_dim();
    let mut kvec = Array1::zeros(m);
    for (i, xi) in model.inputs.iter().enumerate() {
        kvec[i] = model.kernel.eval(xi, x)?;
    }
    let mut mean = Array1::zeros(n);
    for i in 0..m {
        for a in 0..n {
            mean[a] += kvec[i] * model.means[(i, a)];
        }
    }
    let mut cov = Array2::zeros((n, n));
    for a in 0..n {
        for b in 0..n {
            let mut acc = 0.0;
            for i in 0..m {
                for j in 0..m {
                    acc += kvec[i] * model.covariance[(i * n + a, j * n + b)] * kvec[j];
                }
            }
            cov[(a, b)] = acc;
        }
    }
    Ok((mean, cov))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::learners::fit_ridge;
    use crate::sampling;
    use crate::solvers::DescentConfig;
    use ndarray::array;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn random_psd(n: usize, scale: f64, rng: &mut ChaCha8Rng) -> Array2<f64> {
        let a = sampling::random_matrix(n, n, rng);
        scale * (a.t().dot(&a) + 0.5 * Array2::<f64>::eye(n))
    }

    fn toy_stochastic_data(m: usize, n: usize, seed: u64) -> Dataset {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let inputs: Vec<Array1<f64>> = (0..m)
            .map(|_| sampling::random_vector(2, &mut rng))
            .collect();
        let outputs: Vec<Array1<f64>> = (0..m)
            .map(|_| sampling::random_vector(n, &mut rng))
            .collect();
        let covs: Vec<Array2<f64>> = (0..m).map(|_| random_psd(n, 0.05, &mut rng)).collect();
        Dataset::with_output_covs(inputs, outputs, covs).unwrap()
    }

    #[test]
    fn deterministic_data_degenerates_to_ridge() {
        let mut rng = ChaCha8Rng::seed_from_u64(4);
        let inputs: Vec<Array1<f64>> = (0..4)
            .map(|_| sampling::random_vector(2, &mut rng))
            .collect();
        let outputs: Vec<Array1<f64>> = (0..4)
            .map(|_| sampling::random_vector(2, &mut rng))
            .collect();
        let data = Dataset::new(inputs, outputs).unwrap();
        let kernel = KernelSpec::squared_exponential(1.0, 2).unwrap();
        let cfg = LearnerConfig::new(kernel, 0.7).unwrap();
        let gp = fit_gp(&data, &cfg).unwrap();
        let ridge = fit_ridge(&data, &cfg).unwrap();
        let diff = solvers::frobenius_norm(&(gp.means() - ridge.coefficients()));
        assert!(diff <= 1e-9);
        assert!(gp.covariance().iter().all(|&c| c == 0.0));
    }

    #[test]
    fn single_point_scalar_closed_forms() {
        let cov = array![[0.4]];
        let data =
            Dataset::with_output_covs(vec![array![0.0]], vec![array![3.0]], vec![cov]).unwrap();
        let kernel = KernelSpec::squared_exponential(1.0, 1).unwrap();
        let cfg = LearnerConfig::new(kernel, 1.0).unwrap();
        let gp = fit_gp(&data, &cfg).unwrap();
        // Mean: ybar / (lambda + K(x, x)) = 3 / 2.
        assert!((gp.means()[(0, 0)] - 1.5).abs() <= 1e-10);
        // Covariance: delta / (K + lambda)^2 = 0.4 / 4.
        assert!((gp.covariance()[(0, 0)] - 0.1).abs() <= 1e-8);
        // Predictive covariance specializes to K(x1, x)^2 C11.
        let x = array![0.7];
        let kv = cfg.kernel.eval(&array![0.0], &x).unwrap();
        let (_, cov) = gp_predict(&gp, &x).unwrap();
        assert!((cov[(0, 0)] - kv * kv * gp.covariance()[(0, 0)]).abs() <= 1e-12);
    }

    #[test]
    fn covariance_matches_the_resolvent_closed_form() {
        let data = toy_stochastic_data(3, 2, 5);
        let kernel = KernelSpec::squared_exponential(1.0, 2).unwrap();
        let cfg = LearnerConfig::new(kernel.clone(), 0.4).unwrap();
        let gp = fit_gp(&data, &cfg).unwrap();

        let k = kernel.scalar_gram(data.inputs()).unwrap();
        let n = 2;
        let kn = block_kernel(&k, n);
        let mut a_mat = kn.clone();
        for i in 0..a_mat.nrows() {
            a_mat[(i, i)] += cfg.lambda;
        }
        let deltas: Vec<Array2<f64>> = data
            .output_covs()
            .unwrap()
            .iter()
            .map(|c| c.clone())
            .collect();
        let delta = block_diag(&deltas);
        let a_inv = solvers::solve_spd(&a_mat, &Array2::<f64>::eye(a_mat.nrows())).unwrap();
        let expected = a_inv.dot(&delta).dot(&a_inv.t().to_owned());
        let diff = solvers::frobenius_norm(&(gp.covariance() - &expected));
        assert!(diff <= 1e-6, "covariance off closed form by {diff:e}");
    }

    #[test]
    fn covariance_matches_brute_force_descent_over_symmetric_parameters() {
        let data = toy_stochastic_data(2, 2, 6);
        let kernel = KernelSpec::squared_exponential(1.2, 2).unwrap();
        let cfg = LearnerConfig::new(kernel.clone(), 0.6).unwrap();
        let gp = fit_gp(&data, &cfg).unwrap();

        let k = kernel.scalar_gram(data.inputs()).unwrap();
        let n = 2;
        let dim = data.len() * n;
        let kn = block_kernel(&k, n);
        let q = &kn.dot(&kn) + &(cfg.lambda * &kn);
        let deltas: Vec<Array2<f64>> = data
            .output_covs()
            .unwrap()
            .iter()
            .map(|c| c.clone())
            .collect();
        let delta = block_diag(&deltas);

        // Brute-force oracle: descend the trace objective over the upper
        // triangle of a symmetric adaptation matrix.
        let pairs: Vec<(usize, usize)> = (0..dim)
            .flat_map(|i| (i..dim).map(move |j| (i, j)))
            .collect();
        let unpack = |v: &Array1<f64>| -> Array2<f64> {
            let mut b = Array2::zeros((dim, dim));
            for (idx, &(i, j)) in pairs.iter().enumerate() {
                b[(i, j)] = v[idx];
                b[(j, i)] = v[idx];
            }
            b
        };
        let objective = |v: &Array1<f64>| trace_objective(&kn, &q, &delta, &unpack(v));
        let gradient =
            |v: &Array1<f64>| -> Array1<f64> {
                let b = unpack(v);
                let g = (2.0 * (&q.dot(&b) - &kn)).dot(&delta);
                let gs = 0.5 * (&g + &g.t().to_owned());
                Array1::from_iter(pairs.iter().map(|&(i, j)| {
                    if i == j {
                        gs[(i, j)]
                    } else {
                        2.0 * gs[(i, j)]
                    }
                }))
            };
        let x0 = Array1::zeros(pairs.len());
        assert!(solvers::fd_gradient_check(objective, gradient, &x0, 1e-6) <= 1e-5);
        let mut dcfg = DescentConfig::default();
        dcfg.max_iters = 300_000;
        dcfg.grad_tol = 1e-12;
        let res = solvers::gradient_descent(objective, gradient, &x0, &dcfg);
        let b = unpack(&res.x);
        let oracle_cov = b.dot(&delta).dot(&b.t().to_owned());
        let diff = solvers::frobenius_norm(&(gp.covariance() - &oracle_cov));
        assert!(diff <= 1e-5, "descent oracle disagrees by {diff:e}");
    }

    #[test]
    fn block_covariance_and_predictions_are_symmetric_psd() {
        let data = toy_stochastic_data(3, 2, 8);
        let kernel = KernelSpec::squared_exponential(0.9, 2).unwrap();
        let cfg = LearnerConfig::new(kernel, 0.5).unwrap();
        let gp = fit_gp(&data, &cfg).unwrap();
        let c = gp.covariance();
        assert!(solvers::frobenius_norm(&(c - &c.t().to_owned())) <= 1e-9);
        let (eigs, _) = solvers::symmetric_eigen(c).unwrap();
        assert!(eigs.iter().all(|&e| e >= -1e-9));
        let mut rng = ChaCha8Rng::seed_from_u64(9);
        for _ in 0..20 {
            let x = sampling::random_vector(2, &mut rng);
            let (_, cov) = gp_predict(&gp, &x).unwrap();
            assert!(solvers::frobenius_norm(&(&cov - &cov.t().to_owned())) <= 1e-9);
            let (eigs, _) = solvers::symmetric_eigen(&cov).unwrap();
            assert!(eigs.iter().all(|&e| e >= -1e-9));
        }
    }

    #[test]
    fn zero_covariance_model_predicts_zero_covariance() {
        let data = Dataset::new(
            vec![array![0.0], array![1.0]],
            vec![array![1.0], array![2.0]],
        )
        .unwrap();
        let kernel = KernelSpec::squared_exponential(1.0, 1).unwrap();
        let cfg = LearnerConfig::new(kernel, 0.3).unwrap();
        let gp = fit_gp(&data, &cfg).unwrap();
        let (_, cov) = gp_predict(&gp, &array![0.4]).unwrap();
        assert!(cov.iter().all(|&c| c == 0.0));
    }

    #[test]
    fn invalid_configurations_are_rejected() {
        let data = Dataset::new(vec![array![0.0]], vec![array![1.0]]).unwrap();
        let kernel = KernelSpec::squared_exponential(1.0, 1).unwrap();
        let cfg = LearnerConfig::new(kernel.clone(), 0.0).unwrap();
        assert!(matches!(
            fit_gp(&data, &cfg),
            Err(LearnerError::BadLambda { .. })
        ));
        let mut cfg = LearnerConfig::new(kernel, 1.0).unwrap();
        cfg.noise_cov = Some(array![[-1.0]]);
        assert!(matches!(
            fit_gp(&data, &cfg),
            Err(LearnerError::NotPsd { .. })
        ));
    }
}
