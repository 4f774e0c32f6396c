//! Kernel deep networks trained by multiple shooting: each layer is a
//! kernel expansion over its own centers, hidden targets act as shooting
//! nodes, and a tightening consensus penalty glues consecutive layers
//! together.

use super::{Dataset, LearnerError};
use crate::kernels::KernelSpec;
use crate::solvers::{self, DescentConfig};
use ndarray::{Array1, Array2};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};
use serde::{Deserialize, Serialize};

/// Initial coefficient scale used when no explicit initialization is given.
const INIT_SCALE: f64 = 0.1;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Activation {
    Tanh,
    Identity,
    Logistic,
}

impl Activation {
    pub fn value(&self, x: f64) -> f64 {
        match self {
            Activation::Tanh => x.tanh(),
            Activation::Identity => x,
            Activation::Logistic => 1.0 / (1.0 + (-x).exp()),
        }
    }

    pub fn derivative(&self, x: f64) -> f64 {
        match self {
            Activation::Tanh => {
                let t = x.tanh();
                1.0 - t * t
            }
            Activation::Identity => 1.0,
            Activation::Logistic => {
                let s = 1.0 / (1.0 + (-x).exp());
                s * (1.0 - s)
            }
        }
    }

    fn apply(&self, m: &Array2<f64>) -> Array2<f64> {
        m.mapv(|x| self.value(x))
    }

    fn apply_derivative(&self, m: &Array2<f64>) -> Array2<f64> {
        m.mapv(|x| self.derivative(x))
    }
}

/// Configuration plus, after fitting, the trained layers of a kernel deep
/// network. Layer `l` maps width `widths[l]` to `widths[l + 1]` through
/// `sigma_l(sum_j k_l(y_j, .) z_j)` with centers `targets[l]`.
#[derive(Debug, Clone)]
pub struct DeepNetState {
    widths: Vec<usize>,
    kernels: Vec<KernelSpec>,
    activations: Vec<Activation>,
    lambdas: Vec<f64>,
    rho0: f64,
    tighten: f64,
    rounds: usize,
    sweeps: usize,
    seed: u64,
    descent: DescentConfig,
    initial_coefficients: Option<Vec<Array2<f64>>>,
    coefficients: Vec<Array2<f64>>,
    /// Junction values `y^(0) .. y^(N)`; the ends hold training inputs and
    /// training targets, the interior the learned shooting nodes.
    targets: Vec<Array2<f64>>,
    consensus_history: Vec<f64>,
    round_objectives: Vec<(f64, f64)>,
    base_history: Vec<f64>,
}

impl DeepNetState {
    pub fn new(
        widths: Vec<usize>,
        kernels: Vec<KernelSpec>,
        activations: Vec<Activation>,
        lambdas: Vec<f64>,
        seed: u64,
    ) -> Result<DeepNetState, LearnerError> {
        if widths.len() < 2 {
            return Err(LearnerError::BadConfig(
                "a network needs at least one layer (two widths)".into(),
            ));
        }
        let n_layers = widths.len() - 1;
        if kernels.len() != n_layers || activations.len() != n_layers || lambdas.len() != n_layers {
            return Err(LearnerError::BadConfig(format!(
                "expected {n_layers} kernels, activations and lambdas"
            )));
        }
        for (l, k) in kernels.iter().enumerate() {
            if k.output_dim != widths[l + 1] {
                return Err(LearnerError::BadConfig(format!(
                    "kernel {l} lifts to dimension {} but the layer emits {}",
                    k.output_dim,
                    widths[l + 1]
                )));
            }
        }
        for (l, &lam) in lambdas.iter().enumerate() {
            if !(lam >= 0.0) {
                return Err(LearnerError::BadConfig(format!(
                    "layer {l} regularization must be nonnegative, got {lam}"
                )));
            }
        }
        let mut descent = DescentConfig::default();
        descent.max_iters = 400;
        descent.grad_tol = 1e-7;
        Ok(DeepNetState {
            widths,
            kernels,
            activations,
            lambdas,
            rho0: 1.0,
            tighten: 4.0,
            rounds: 8,
            sweeps: 1,
            seed,
            descent,
            initial_coefficients: None,
            coefficients: Vec::new(),
            targets: Vec::new(),
            consensus_history: Vec::new(),
            round_objectives: Vec::new(),
            base_history: Vec::new(),
        })
    }

    pub fn with_schedule(
        mut self,
        rho0: f64,
        tighten: f64,
        rounds: usize,
    ) -> Result<DeepNetState, LearnerError> {
        if !(rho0 > 0.0) || !(tighten > 1.0) || rounds == 0 {
            return Err(LearnerError::BadConfig(
                "need rho0 > 0, tightening factor > 1 and at least one round".into(),
            ));
        }
        self.rho0 = rho0;
        self.tighten = tighten;
        self.rounds = rounds;
        Ok(self)
    }

    pub fn with_descent(mut self, descent: DescentConfig) -> DeepNetState {
        self.descent = descent;
        self
    }

    /// Installs trained coefficients and junction targets, e.g. when loading
    /// a saved model. Histories are not restored; the state predicts but
    /// carries no training trace.
    pub fn restore_fitted(
        mut self,
        coefficients: Vec<Array2<f64>>,
        targets: Vec<Array2<f64>>,
    ) -> Result<DeepNetState, LearnerError> {
        let n_layers = self.num_layers();
        if coefficients.len() != n_layers || targets.len() != n_layers + 1 {
            return Err(LearnerError::BadConfig(format!(
                "expected {n_layers} coefficient blocks and {} junction blocks",
                n_layers + 1
            )));
        }
        let m = targets[0].nrows();
        if m == 0 {
            return Err(LearnerError::EmptyDataset);
        }
        for (l, t) in targets.iter().enumerate() {
            if t.nrows() != m || t.ncols() != self.widths[l] {
                return Err(LearnerError::BadConfig(format!(
                    "junction {l} must be {m}x{}, got {}x{}",
                    self.widths[l],
                    t.nrows(),
                    t.ncols()
                )));
            }
        }
        for (l, z) in coefficients.iter().enumerate() {
            if z.nrows() != m || z.ncols() != self.widths[l + 1] {
                return Err(LearnerError::BadConfig(format!(
                    "coefficient block {l} must be {m}x{}, got {}x{}",
                    self.widths[l + 1],
                    z.nrows(),
                    z.ncols()
                )));
            }
        }
        self.coefficients = coefficients;
        self.targets = targets;
        self.consensus_history.clear();
        self.round_objectives.clear();
        self.base_history.clear();
        Ok(self)
    }

    /// Pins the initial coefficients instead of drawing them from the seed.
    /// One matrix per layer, rows aligned with the training samples.
    pub fn with_initial_coefficients(mut self, init: Vec<Array2<f64>>) -> DeepNetState {
        self.initial_coefficients = Some(init);
        self
    }

    pub fn num_layers(&self) -> usize {
        self.widths.len() - 1
    }

    /// Penalty schedule as (starting weight, tightening factor, rounds).
    pub fn schedule(&self) -> (f64, f64, usize) {
        (self.rho0, self.tighten, self.rounds)
    }

    pub fn seed(&self) -> u64 {
        self.seed
    }

    pub fn widths(&self) -> &[usize] {
        &self.widths
    }

    pub fn kernels(&self) -> &[KernelSpec] {
        &self.kernels
    }

    pub fn activations(&self) -> &[Activation] {
        &self.activations
    }

    pub fn lambdas(&self) -> &[f64] {
        &self.lambdas
    }

    pub fn is_fitted(&self) -> bool {
        !self.coefficients.is_empty()
    }

    pub fn coefficients(&self) -> &[Array2<f64>] {
        &self.coefficients
    }

    pub fn targets(&self) -> &[Array2<f64>] {
        &self.targets
    }

    /// Largest hidden-junction defect after each outer round.
    pub fn consensus_history(&self) -> &[f64] {
        &self.consensus_history
    }

    /// Weighted objective at the start and end of each round, under that
    /// round's penalty.
    pub fn round_objectives(&self) -> &[(f64, f64)] {
        &self.round_objectives
    }

    /// Unit-weight objective after each round, watched by the divergence
    /// guard.
    pub fn base_history(&self) -> &[f64] {
        &self.base_history
    }
}

fn rows(m: &Array2<f64>) -> Vec<Array1<f64>> {
    (0..m.nrows()).map(|i| m.row(i).to_owned()).collect()
}

fn gram_of(kernel: &KernelSpec, points: &Array2<f64>) -> Result<Array2<f64>, LearnerError> {
    Ok(kernel.scalar_gram(&rows(points))?)
}

fn flatten(m: &Array2<f64>) -> Array1<f64> {
    Array1::from_iter(m.iter().copied())
}

fn unflatten(v: &Array1<f64>, nrows: usize, ncols: usize) -> Array2<f64> {
    Array2::from_shape_fn((nrows, ncols), |(i, j)| v[i * ncols + j])
}

fn sum_sq(m: &Array2<f64>) -> f64 {
    m.iter().map(|x| x * x).sum()
}

/// Per-layer coefficient subproblem with centers and junction targets
/// fixed: `weight * |T - sigma(K Z)|^2 + lambda * tr(Z' K Z)`.
pub struct CoefBlock<'a> {
    pub gram: Array2<f64>,
    pub targets: &'a Array2<f64>,
    pub weight: f64,
    pub lambda: f64,
    pub activation: Activation,
}

impl CoefBlock<'_> {
    pub fn objective(&self, zflat: &Array1<f64>) -> f64 {
        let z = unflatten(zflat, self.gram.nrows(), self.targets.ncols());
        let pre = self.gram.dot(&z);
        let act = self.activation.apply(&pre);
        let fit = sum_sq(&(self.targets - &act));
        let reg: f64 = (&pre * &z).sum();
        self.weight * fit + self.lambda * reg
    }

    pub fn gradient(&self, zflat: &Array1<f64>) -> Array1<f64> {
        let z = unflatten(zflat, self.gram.nrows(), self.targets.ncols());
        let pre = self.gram.dot(&z);
        let act = self.activation.apply(&pre);
        let slope = self.activation.apply_derivative(&pre);
        let residual = (self.targets - &act) * &slope;
        let grad = self
            .gram
            .dot(&(-2.0 * self.weight * &residual + 2.0 * self.lambda * &z));
        flatten(&grad)
    }
}

/// Hidden-junction subproblem: the junction's own defect against the
/// incoming activations, the next junction's defect (where the variables
/// are both centers and evaluation points), and the next layer's
/// regularizer.
pub struct TargetBlock<'a> {
    pub prev_act: &'a Array2<f64>,
    pub own_weight: f64,
    pub next_targets: &'a Array2<f64>,
    pub next_weight: f64,
    pub z: &'a Array2<f64>,
    pub kernel: &'a KernelSpec,
    pub lambda: f64,
    pub activation: Activation,
}

impl TargetBlock<'_> {
    pub fn objective(&self, yflat: &Array1<f64>) -> Result<f64, LearnerError> {
        let m = self.prev_act.nrows();
        let d = self.prev_act.ncols();
        let y = unflatten(yflat, m, d);
        let own = sum_sq(&(&y - self.prev_act));
        let gram = gram_of(self.kernel, &y)?;
        let pre = gram.dot(self.z);
        let act = self.activation.apply(&pre);
        let next = sum_sq(&(self.next_targets - &act));
        let reg: f64 = (&pre * self.z).sum();
        Ok(self.own_weight * own + self.next_weight * next + self.lambda * reg)
    }

    pub fn gradient(&self, yflat: &Array1<f64>) -> Result<Array1<f64>, LearnerError> {
        let m = self.prev_act.nrows();
        let d = self.prev_act.ncols();
        let y = unflatten(yflat, m, d);
        let points = rows(&y);
        let gram = self.kernel.scalar_gram(&points)?;
        let pre = gram.dot(self.z);
        let act = self.activation.apply(&pre);
        let slope = self.activation.apply_derivative(&pre);
        // Sensitivity of the next-junction defect to each preactivation row.
        let s = -2.0 * self.next_weight * ((self.next_targets - &act) * &slope);

        let mut grad = 2.0 * self.own_weight * (&y - self.prev_act);
        // The kernel argument gradient enters through three channels with a
        // shared factor: as a center of the expansion, as an evaluation
        // point, and through the regularizer.
        for p in 0..m {
            let zp = self.z.row(p);
            let sp = s.row(p);
            let mut acc = Array1::<f64>::zeros(d);
            for i in 0..m {
                let c = s.row(i).dot(&zp)
                    + sp.dot(&self.z.row(i))
                    + 2.0 * self.lambda * zp.dot(&self.z.row(i));
                if c != 0.0 {
                    let ig = self.kernel.input_gradient(&points[p], &points[i])?;
                    acc = acc + &(c * &ig);
                }
            }
            for j in 0..d {
                grad[(p, j)] += acc[j];
            }
        }
        Ok(flatten(&grad))
    }
}

/// Weighted multiple-shooting objective: junction defects with the hidden
/// junctions scaled by `rho`, plus per-layer regularizers.
fn shooting_objective(state: &DeepNetState, rho: f64) -> Result<f64, LearnerError> {
    let n_layers = state.num_layers();
    let mut total = 0.0;
    for l in 0..n_layers {
        let gram = gram_of(&state.kernels[l], &state.targets[l])?;
        let pre = gram.dot(&state.coefficients[l]);
        let act = state.activations[l].apply(&pre);
        let weight = if l + 1 == n_layers { 1.0 } else { rho };
        total += weight * sum_sq(&(&state.targets[l + 1] - &act));
        total += state.lambdas[l] * (&pre * &state.coefficients[l]).sum();
    }
    Ok(total)
}

/// Largest per-sample hidden-junction defect norm.
fn consensus_residual(state: &DeepNetState) -> Result<f64, LearnerError> {
    let n_layers = state.num_layers();
    let mut worst = 0.0f64;
    for l in 0..n_layers.saturating_sub(1) {
        let gram = gram_of(&state.kernels[l], &state.targets[l])?;
        let act = state.activations[l].apply(&gram.dot(&state.coefficients[l]));
        let defect = &state.targets[l + 1] - &act;
        for i in 0..defect.nrows() {
            let norm = defect.row(i).iter().map(|x| x * x).sum::<f64>().sqrt();
            worst = worst.max(norm);
        }
    }
    Ok(worst)
}

/// Flags two consecutive increases at the end of the history, returning the
/// zero-based rounds on which they were observed.
fn divergence_rounds(history: &[f64]) -> Option<(usize, usize)> {
    let k = history.len();
    if k < 3 {
        return None;
    }
    let slack = |v: f64| 1e-12 * (1.0 + v.abs());
    if history[k - 1] > history[k - 2] + slack(history[k - 2])
        && history[k - 2] > history[k - 3] + slack(history[k - 3])
    {
        Some((k - 2, k - 1))
    } else {
        None
    }
}

/// Trains the network by alternating coefficient and shooting-node block
/// descents under a tightening consensus penalty.
pub fn fit_deep_net(data: &Dataset, state0: &DeepNetState) -> Result<DeepNetState, LearnerError> {
    let mut state = state0.clone();
    let n_layers = state.num_layers();
    let m = data.len();
    if data.input_dim() != state.widths[0] {
        return Err(LearnerError::BadConfig(format!(
            "input dimension {} does not match the first width {}",
            data.input_dim(),
            state.widths[0]
        )));
    }
    if data.output_dim() != state.widths[n_layers] {
        return Err(LearnerError::OutputDimMismatch {
            kernel: state.widths[n_layers],
            data: data.output_dim(),
        });
    }

    // Coefficients: pinned initialization if provided, otherwise small
    // seeded draws.
    let mut rng = ChaCha8Rng::seed_from_u64(state.seed);
    state.coefficients = match &state.initial_coefficients {
        Some(init) => {
            if init.len() != n_layers
                || init
                    .iter()
                    .enumerate()
                    .any(|(l, z)| z.nrows() != m || z.ncols() != state.widths[l + 1])
            {
                return Err(LearnerError::BadConfig(
                    "initial coefficients do not match the layer shapes".into(),
                ));
            }
            init.clone()
        }
        None => (0..n_layers)
            .map(|l| {
                Array2::from_shape_fn((m, state.widths[l + 1]), |_| {
                    INIT_SCALE
                        * <StandardNormal as Distribution<f64>>::sample(&StandardNormal, &mut rng)
                })
            })
            .collect(),
    };

    // Shooting nodes: propagate the inputs so every hidden defect starts
    // at zero; the data junction carries the full initial error.
    state.targets = vec![data.output_matrix(); n_layers + 1];
    state.targets[0] = {
        let mut inputs = Array2::zeros((m, data.input_dim()));
        for (i, x) in data.inputs().iter().enumerate() {
            for j in 0..x.len() {
                inputs[(i, j)] = x[j];
            }
        }
        inputs
    };
    for l in 0..n_layers.saturating_sub(1) {
        let gram = gram_of(&state.kernels[l], &state.targets[l])?;
        state.targets[l + 1] = state.activations[l].apply(&gram.dot(&state.coefficients[l]));
    }

    state.consensus_history.clear();
    state.round_objectives.clear();
    state.base_history.clear();

    for round in 0..state.rounds {
        let rho = state.rho0 * state.tighten.powi(round as i32);
        let start = shooting_objective(&state, rho)?;
        for _ in 0..state.sweeps {
            for l in 0..n_layers {
                let block = CoefBlock {
                    gram: gram_of(&state.kernels[l], &state.targets[l])?,
                    targets: &state.targets[l + 1],
                    weight: if l + 1 == n_layers { 1.0 } else { rho },
                    lambda: state.lambdas[l],
                    activation: state.activations[l],
                };
                let z0 = flatten(&state.coefficients[l]);
                let res = solvers::gradient_descent(
                    |z| block.objective(z),
                    |z| block.gradient(z),
                    &z0,
                    &state.descent,
                );
                state.coefficients[l] = unflatten(&res.x, m, state.widths[l + 1]);
            }
            for l in 1..n_layers {
                let prev_gram = gram_of(&state.kernels[l - 1], &state.targets[l - 1])?;
                let prev_act =
                    state.activations[l - 1].apply(&prev_gram.dot(&state.coefficients[l - 1]));
                let block = TargetBlock {
                    prev_act: &prev_act,
                    own_weight: rho,
                    next_targets: &state.targets[l + 1],
                    next_weight: if l + 1 == n_layers { 1.0 } else { rho },
                    z: &state.coefficients[l],
                    kernel: &state.kernels[l],
                    lambda: state.lambdas[l],
                    activation: state.activations[l],
                };
                let y0 = flatten(&state.targets[l]);
                let res = solvers::gradient_descent(
                    |y| {
                        block
                            .objective(y)
                            .expect("kernel evaluation on descent path")
                    },
                    |y| {
                        block
                            .gradient(y)
                            .expect("kernel evaluation on descent path")
                    },
                    &y0,
                    &state.descent,
                );
                state.targets[l] = unflatten(&res.x, m, state.widths[l]);
            }
        }
        let end = shooting_objective(&state, rho)?;
        state.round_objectives.push((start, end));
        state.base_history.push(shooting_objective(&state, 1.0)?);
        state.consensus_history.push(consensus_residual(&state)?);
        if let Some((first, second)) = divergence_rounds(&state.base_history) {
            return Err(LearnerError::Divergence { first, second });
        }
    }
    Ok(state)
}

/// Forward pass through the trained layers followed by a logistic soft-max.
pub fn deep_predict(state: &DeepNetState, x: &Array1<f64>) -> Result<Array1<f64>, LearnerError> {
    if !state.is_fitted() {
        return Err(LearnerError::BadConfig(
            "the network has not been fitted".into(),
        ));
    }
    if x.len() != state.widths[0] {
        return Err(LearnerError::BadConfig(format!(
            "input dimension {} does not match the first width {}",
            x.len(),
            state.widths[0]
        )));
    }
    let mut h = x.clone();
    for l in 0..state.num_layers() {
        let centers = &state.targets[l];
        let z = &state.coefficients[l];
        let mut pre = Array1::zeros(state.widths[l + 1]);
        for j in 0..centers.nrows() {
            let k = state.kernels[l].eval(&centers.row(j).to_owned(), &h)?;
            for a in 0..pre.len() {
                pre[a] += k * z[(j, a)];
            }
        }
        h = pre.mapv(|v| state.activations[l].value(v));
    }
    Ok(softmax(&h))
}

/// Numerically stable soft-max; the output is a probability vector.
pub fn softmax(v: &Array1<f64>) -> Array1<f64> {
    let max = v.iter().fold(f64::NEG_INFINITY, |a, &b| a.max(b));
    let exps = v.mapv(|x| (x - max).exp());
    let sum: f64 = exps.sum();
    exps.mapv(|e| e / sum)
}

/// Index of the largest probability; exact ties go to the lowest index.
pub fn class_of(probabilities: &Array1<f64>) -> usize {
    let mut best = 0;
    for i in 1..probabilities.len() {
        if probabilities[i] > probabilities[best] {
            best = i;
        }
    }
    best
}
