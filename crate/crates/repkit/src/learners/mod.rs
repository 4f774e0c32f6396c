//! Learning pipelines whose minimizers live in the span of adjoint columns
//! over the training points: kernel ridge regression, hard-margin SVM,
//! Gaussian-process regression, sparse feature selection, and a
//! multiple-shooting kernel deep network, plus post-hoc verification that a
//! fitted minimizer actually has the reduced form.

pub mod deep;
pub mod gp;
pub mod l1;

use crate::hilbert::{HilbertError, SpaceSpec};
use crate::kernels::{KernelError, KernelSpec};
use crate::maps::{apply_map, set_member_residual, set_orth_complement, MapError, SubspaceMapSpec};
use crate::operators::{evaluation_operator, joint_null_complement, OperatorError, OperatorRep};
use crate::report::{Verdict, Witness};
use crate::sampling;
use crate::solvers::{self, DescentConfig, SolverError};
use ndarray::{Array1, Array2};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use thiserror::Error;

/// Residual bound for the containment of a minimizer in the mapped
/// null-space complement.
pub const REPRESENTER_TOL: f64 = 1e-8;

/// Allowed slack when perturbing a minimizer along the orthogonal
/// complement.
pub const PERTURBATION_SLACK: f64 = 1e-9;

/// Largest accepted margin violation for separable SVM data.
pub const SVM_FEASIBILITY_TOL: f64 = 1e-3;

#[derive(Debug, Error)]
pub enum LearnerError {
    #[error(transparent)]
    Kernel(#[from] KernelError),
    #[error(transparent)]
    Solver(#[from] SolverError),
    #[error(transparent)]
    Hilbert(#[from] HilbertError),
    #[error(transparent)]
    Operator(#[from] OperatorError),
    #[error(transparent)]
    Map(#[from] MapError),
    #[error("dataset must contain at least one sample")]
    EmptyDataset,
    #[error("sample {index} has inconsistent dimensions")]
    InconsistentSample { index: usize },
    #[error("regularization weight must be nonnegative, got {got}")]
    BadLambda { got: f64 },
    #[error("kernel output dimension {kernel} does not match data output dimension {data}")]
    OutputDimMismatch { kernel: usize, data: usize },
    #[error("classification labels must be -1 or +1 with both classes present")]
    BadLabels,
    #[error("one-hot label {label} is out of range for {classes} classes")]
    LabelOutOfRange { label: usize, classes: usize },
    #[error("covariance matrix at index {index} is not symmetric positive semidefinite")]
    NotPsd { index: usize },
    #[error("margin violation {violation:.3e} exceeds the feasibility tolerance; data may not be separable")]
    Infeasible { violation: f64 },
    #[error("{0}")]
    BadConfig(String),
    #[error("objective increased on rounds {first} and {second}; aborting as divergent")]
    Divergence { first: usize, second: usize },
    #[error("training index {index} lies outside the dictionary window [{lo}, {hi}]")]
    OutsideWindow { index: i64, lo: i64, hi: i64 },
}

/// Checks a square matrix is symmetric and has no eigenvalue below `-1e-9`.
pub(crate) fn validate_psd(m: &Array2<f64>, index: usize) -> Result<(), LearnerError> {
    if m.nrows() != m.ncols() {
        return Err(LearnerError::NotPsd { index });
    }
    let asym = solvers::frobenius_norm(&(m - &m.t().to_owned()));
    if asym > 1e-9 * (1.0 + solvers::frobenius_norm(m)) {
        return Err(LearnerError::NotPsd { index });
    }
    let (eigs, _) = symmetric_eigen_or_psd_err(m, index)?;
    if eigs.iter().any(|&e| e < -1e-9) {
        return Err(LearnerError::NotPsd { index });
    }
    Ok(())
}

fn symmetric_eigen_or_psd_err(
    m: &Array2<f64>,
    index: usize,
) -> Result<(Array1<f64>, Array2<f64>), LearnerError> {
    solvers::symmetric_eigen(m).map_err(|_| LearnerError::NotPsd { index })
}

/// Training data: input points with vector outputs, optionally carrying a
/// per-sample output covariance for stochastic regression.
#[derive(Debug, Clone)]
pub struct Dataset {
    inputs: Vec<Array1<f64>>,
    outputs: Vec<Array1<f64>>,
    output_covs: Option<Vec<Array2<f64>>>,
}

impl Dataset {
    pub fn new(
        inputs: Vec<Array1<f64>>,
        outputs: Vec<Array1<f64>>,
    ) -> Result<Dataset, LearnerError> {
        if inputs.is_empty() || inputs.len() != outputs.len() {
            return Err(LearnerError::EmptyDataset);
        }
        let d = inputs[0].len();
        let n = outputs[0].len();
        for (i, (x, y)) in inputs.iter().zip(&outputs).enumerate() {
            if x.len() != d || y.len() != n {
                return Err(LearnerError::InconsistentSample { index: i });
            }
        }
        Ok(Dataset {
            inputs,
            outputs,
            output_covs: None,
        })
    }

    /// Adds per-sample output covariances; each must be a symmetric PSD
    /// matrix matching the output dimension.
    pub fn with_output_covs(
        inputs: Vec<Array1<f64>>,
        outputs: Vec<Array1<f64>>,
        covs: Vec<Array2<f64>>,
    ) -> Result<Dataset, LearnerError> {
        let base = Dataset::new(inputs, outputs)?;
        if covs.len() != base.len() {
            return Err(LearnerError::EmptyDataset);
        }
        let n = base.output_dim();
        for (i, c) in covs.iter().enumerate() {
            if c.nrows() != n || c.ncols() != n {
                return Err(LearnerError::InconsistentSample { index: i });
            }
            validate_psd(c, i)?;
        }
        Ok(Dataset {
            output_covs: Some(covs),
            ..base
        })
    }

    /// Builds one-hot classification outputs; each row sums to one exactly.
    pub fn from_one_hot(
        inputs: Vec<Array1<f64>>,
        labels: &[usize],
        classes: usize,
    ) -> Result<Dataset, LearnerError> {
        if inputs.len() != labels.len() {
            return Err(LearnerError::EmptyDataset);
        }
        let mut outputs = Vec::with_capacity(labels.len());
        for &label in labels {
            if label >= classes {
                return Err(LearnerError::LabelOutOfRange { label, classes });
            }
            let mut row = Array1::zeros(classes);
            row[label] = 1.0;
            outputs.push(row);
        }
        Dataset::new(inputs, outputs)
    }

    /// Builds binary classification outputs from plus/minus one labels.
    pub fn from_signs(inputs: Vec<Array1<f64>>, labels: &[f64]) -> Result<Dataset, LearnerError> {
        if inputs.len() != labels.len() {
            return Err(LearnerError::EmptyDataset);
        }
        if labels.iter().any(|&y| y != 1.0 && y != -1.0) {
            return Err(LearnerError::BadLabels);
        }
        let outputs = labels.iter().map(|&y| ndarray::array![y]).collect();
        Dataset::new(inputs, outputs)
    }

    pub fn len(&self) -> usize {
        self.inputs.len()
    }

    pub fn is_empty(&self) -> bool {
        self.inputs.is_empty()
    }

    pub fn input_dim(&self) -> usize {
        self.inputs[0].len()
    }

    pub fn output_dim(&self) -> usize {
        self.outputs[0].len()
    }

    pub fn inputs(&self) -> &[Array1<f64>] {
        &self.inputs
    }

    pub fn outputs(&self) -> &[Array1<f64>] {
        &self.outputs
    }

    pub fn output_covs(&self) -> Option<&[Array2<f64>]> {
        self.output_covs.as_deref()
    }

    /// Stacks outputs into an m-by-n matrix.
    pub fn output_matrix(&self) -> Array2<f64> {
        let mut y = Array2::zeros((self.len(), self.output_dim()));
        for (i, out) in self.outputs.iter().enumerate() {
            y.row_mut(i).assign(out);
        }
        y
    }
}

/// Shared fitter configuration.
#[derive(Debug, Clone)]
pub struct LearnerConfig {
    pub lambda: f64,
    pub kernel: KernelSpec,
    /// Observation noise covariance for stochastic regression.
    pub noise_cov: Option<Array2<f64>>,
    /// Use the rescaled unit margin for classification.
    pub margin: bool,
    pub descent: DescentConfig,
}

impl LearnerConfig {
    pub fn new(kernel: KernelSpec, lambda: f64) -> Result<LearnerConfig, LearnerError> {
        if !(lambda >= 0.0) {
            return Err(LearnerError::BadLambda { got: lambda });
        }
        Ok(LearnerConfig {
            lambda,
            kernel,
            noise_cov: None,
            margin: true,
            descent: DescentConfig::default(),
        })
    }
}

/// A fitted kernel expansion: `f(x) = sum_i K(x_i, x) z_i`.
#[derive(Debug, Clone)]
pub struct RepresenterModel {
    kernel: KernelSpec,
    inputs: Vec<Array1<f64>>,
    /// One coefficient row per training point.
    coefficients: Array2<f64>,
}

impl RepresenterModel {
    pub fn new(
        kernel: KernelSpec,
        inputs: Vec<Array1<f64>>,
        coefficients: Array2<f64>,
    ) -> Result<RepresenterModel, LearnerError> {
        if inputs.is_empty() || coefficients.nrows() != inputs.len() {
            return Err(LearnerError::EmptyDataset);
        }
        if coefficients.iter().any(|c| !c.is_finite()) {
            return Err(LearnerError::BadConfig(
                "coefficients must be finite".to_string(),
            ));
        }
        Ok(RepresenterModel {
            kernel,
            inputs,
            coefficients,
        })
    }

    pub fn kernel(&self) -> &KernelSpec {
        &self.kernel
    }

    pub fn inputs(&self) -> &[Array1<f64>] {
        &self.inputs
    }

    pub fn coefficients(&self) -> &Array2<f64> {
        &self.coefficients
    }

    pub fn output_dim(&self) -> usize {
        self.coefficients.ncols()
    }

    /// Evaluates the kernel expansion at a point.
    pub fn predict(&self, x: &Array1<f64>) -> Result<Array1<f64>, LearnerError> {
        let mut out = Array1::zeros(self.output_dim());
        for (xi, zi) in self.inputs.iter().zip(self.coefficients.rows()) {
            let k = self.kernel.eval(xi, x)?;
            out = out + k * &zi.to_owned();
        }
        Ok(out)
    }
}

/// Ridge regression: coefficients solve `(K + lambda I) Z = Y`.
pub fn fit_ridge(data: &Dataset, cfg: &LearnerConfig) -> Result<RepresenterModel, LearnerError> {
    if cfg.kernel.output_dim != data.output_dim() {
        return Err(LearnerError::OutputDimMismatch {
            kernel: cfg.kernel.output_dim,
            data: data.output_dim(),
        });
    }
    if !(cfg.lambda >= 0.0) {
        return Err(LearnerError::BadLambda { got: cfg.lambda });
    }
    let k = cfg.kernel.scalar_gram(data.inputs())?;
    let m = data.len();
    let mut a = k;
    for i in 0..m {
        a[(i, i)] += cfg.lambda;
    }
    let z = solvers::solve_spd(&a, &data.output_matrix())?;
    RepresenterModel::new(cfg.kernel.clone(), data.inputs().to_vec(), z)
}

/// Minimum-norm classifier with unit margins: minimizes `z' K z` subject to
/// `y_i (K z)_i >= 1`, solved as a warm-started squared-hinge penalty
/// sequence in representer coordinates.
pub fn fit_svm(data: &Dataset, cfg: &LearnerConfig) -> Result<RepresenterModel, LearnerError> {
    if !cfg.margin {
        return Err(LearnerError::BadConfig(
            "only the rescaled unit-margin formulation is implemented".to_string(),
        ));
    }
    if data.output_dim() != 1 {
        return Err(LearnerError::BadLabels);
    }
    let labels: Vec<f64> = data.outputs().iter().map(|y| y[0]).collect();
    if labels.iter().any(|&y| y != 1.0 && y != -1.0)
        || !labels.contains(&1.0)
        || !labels.contains(&-1.0)
    {
        return Err(LearnerError::BadLabels);
    }
    let m = data.len();
    let k = cfg.kernel.scalar_gram(data.inputs())?;
    let y = Array1::from_vec(labels);

    let hinge = |z: &Array1<f64>| -> Array1<f64> {
        let kz = k.dot(z);
        Array1::from_iter((0..m).map(|i| (1.0 - y[i] * kz[i]).max(0.0)))
    };
    let mut z = Array1::zeros(m);
    let mut mu = 10.0;
    for _ in 0..7 {
        let objective = |z: &Array1<f64>| -> f64 {
            let h = hinge(z);
            z.dot(&k.dot(z)) + mu * h.dot(&h)
        };
        let gradient = |z: &Array1<f64>| -> Array1<f64> {
            let h = hinge(z);
            let pushed = Array1::from_iter((0..m).map(|i| z[i] - mu * h[i] * y[i]));
            2.0 * k.dot(&pushed)
        };
        let result = solvers::gradient_descent(objective, gradient, &z, &cfg.descent);
        z = result.x;
        mu *= 10.0;
    }
    let violation = hinge(&z).iter().fold(0.0_f64, |a, &b| a.max(b));
    if violation > SVM_FEASIBILITY_TOL {
        return Err(LearnerError::Infeasible { violation });
    }
    let mut coeffs = Array2::zeros((m, 1));
    for i in 0..m {
        coeffs[(i, 0)] = z[i];
    }
    RepresenterModel::new(cfg.kernel.clone(), data.inputs().to_vec(), coeffs)
}

/// Post-hoc check that a fitted minimizer has the reduced form: (a) it lies
/// in the image of the joint null complement under the map, and (b) no
/// perturbation along the image's orthogonal complement lowers the
/// objective.
pub fn verify_representer<F>(
    objective: F,
    f_star: &Array1<f64>,
    s: &SubspaceMapSpec,
    ops: &[OperatorRep],
    trials: usize,
    seed: u64,
) -> Verdict
where
    F: Fn(&Array1<f64>) -> f64,
{
    if s.space().check_vector(f_star).is_err() {
        return Verdict::not_applicable("minimizer does not live in the map's space", seed);
    }
    let null_comp = match joint_null_complement(ops) {
        Ok(a) => a,
        Err(e) => return Verdict::not_applicable(e.to_string(), seed),
    };
    if null_comp.space() != s.space() {
        return Verdict::not_applicable("operators act on a different space than the map", seed);
    }
    let image = match apply_map(s, &null_comp) {
        Ok(rep) => rep,
        Err(e) => return Verdict::not_applicable(e.to_string(), seed),
    };
    let scale = 1.0 + solvers::euclidean_norm(f_star);
    let residual = match set_member_residual(&image, f_star) {
        Ok(r) => r,
        Err(e) => return Verdict::not_applicable(e.to_string(), seed),
    };
    if residual > REPRESENTER_TOL * scale {
        let w = Witness::new("minimizer leaves the mapped null-space complement")
            .with_vector("f_star", f_star.iter().copied())
            .with_scalar("residual", residual);
        return Verdict::counterexample(w, 0, seed);
    }
    let comp = match set_orth_complement(&image) {
        Ok(c) => c,
        Err(e) => return Verdict::not_applicable(e.to_string(), seed),
    };
    let j_star = objective(f_star);
    if comp.rank() == 0 {
        return Verdict::pass(trials, seed)
            .with_note("orthogonal complement is trivial; containment alone decides");
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    for trial in 0..trials.max(1) {
        let g = sampling::sample_in_subspace(&comp, &mut rng);
        let j_pert = objective(&(f_star + &g));
        if j_pert < j_star - PERTURBATION_SLACK {
            let w = Witness::new("orthogonal perturbation lowers the objective")
                .with_vector("g", g.iter().copied())
                .with_scalar("objective_at_minimizer", j_star)
                .with_scalar("objective_perturbed", j_pert);
            return Verdict::counterexample(w, trial + 1, seed);
        }
    }
    Verdict::pass(trials.max(1), seed)
}

/// Kernel-dictionary verification problem for a fitted kernel expansion.
/// The dictionary spans training and probe points, the evaluation operators
/// cover the training points only, and the objective is the regularized
/// empirical risk restricted to that dictionary.
pub struct DictionaryVerification {
    space: SpaceSpec,
    ops: Vec<OperatorRep>,
    f_star: Array1<f64>,
    outputs: Vec<Array1<f64>>,
    lambda: f64,
}

impl DictionaryVerification {
    pub fn new(
        model: &RepresenterModel,
        probes: &[Array1<f64>],
        data: &Dataset,
        lambda: f64,
    ) -> Result<DictionaryVerification, LearnerError> {
        if lambda < 0.0 {
            return Err(LearnerError::BadLambda { got: lambda });
        }
        let mut points = model.inputs().to_vec();
        points.extend(probes.iter().cloned());
        let space = SpaceSpec::rkhs_dictionary(points, model.kernel().clone())?;
        let n = model.output_dim();
        let mut ops = Vec::with_capacity(data.inputs().len());
        for x in data.inputs() {
            ops.push(evaluation_operator(&space, x)?);
        }
        let mut f_star = Array1::zeros(space.dim());
        for i in 0..model.inputs().len() {
            for j in 0..n {
                f_star[i * n + j] = model.coefficients()[(i, j)];
            }
        }
        Ok(DictionaryVerification {
            space,
            ops,
            f_star,
            outputs: data.outputs().to_vec(),
            lambda,
        })
    }

    pub fn space(&self) -> &SpaceSpec {
        &self.space
    }

    pub fn ops(&self) -> &[OperatorRep] {
        &self.ops
    }

    /// Dictionary coefficients of the fitted expansion, zero on the probe
    /// blocks.
    pub fn f_star(&self) -> &Array1<f64> {
        &self.f_star
    }

    /// Regularized empirical risk of a dictionary coefficient vector.
    /// Panics when `f` does not live in the dictionary space.
    pub fn objective(&self, f: &Array1<f64>) -> f64 {
        let mut j = 0.0;
        for (op, y) in self.ops.iter().zip(&self.outputs) {
            let fx = op
                .apply(f)
                .expect("coefficient vector matches the dictionary space");
            let r = &fx - y;
            j += r.dot(&r);
        }
        j + self.lambda
            * self
                .space
                .inner(f, f)
                .expect("coefficient vector matches the space")
    }

    /// Runs the reduced-form check for this problem under the given map.
    pub fn verify(&self, s: &SubspaceMapSpec, trials: usize, seed: u64) -> Verdict {
        verify_representer(
            |f| self.objective(f),
            &self.f_star,
            s,
            &self.ops,
            trials,
            seed,
        )
    }
}
