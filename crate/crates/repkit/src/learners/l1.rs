//! Sparse feature selection with a squared entrywise l1 penalty.
//!
//! The squared penalty has no coordinatewise proximal map, so the fitter
//! walks a scaled-l1 path: it solves `sum of squares + tau * |W|_1` by
//! ISTA with backtracking for a descending grid of `tau`, polishes with
//! the fixed-point scale `tau = 2 lambda |W|_1`, and keeps the candidate
//! with the smallest original objective.

use super::{Dataset, LearnerError};
use crate::operators::{explicit_basis_operator, FeatureMap};
use crate::solvers;
use ndarray::{Array1, Array2};

/// Grid resolution of the scaled-l1 path.
const TAU_GRID_POINTS: usize = 25;
/// Ratio between the largest and smallest nonzero grid scale.
const TAU_GRID_SPAN: f64 = 1e-4;
/// Rounds of fixed-point polish on the selected candidate.
const POLISH_ROUNDS: usize = 5;

/// A fitted weight matrix over explicit features, one row per feature.
#[derive(Debug, Clone)]
pub struct FeatureWeights {
    weights: Array2<f64>,
    lambda: f64,
    /// Scale of the l1 subproblem that produced the winning candidate.
    selected_tau: f64,
    /// Composite objective at every accepted iterate of the winning run.
    objective_trace: Vec<f64>,
    /// Index range covered by indicator features, when fitted on one.
    window: Option<(i64, i64)>,
}

impl FeatureWeights {
    /// Rebuilds fitted weights from stored parts. The objective trace is not
    /// persisted; a restored value carries an empty trace.
    pub fn from_parts(
        weights: Array2<f64>,
        lambda: f64,
        selected_tau: f64,
        window: Option<(i64, i64)>,
    ) -> Result<FeatureWeights, LearnerError> {
        if !(lambda >= 0.0) {
            return Err(LearnerError::BadLambda { got: lambda });
        }
        if weights.iter().any(|w| !w.is_finite()) {
            return Err(LearnerError::BadConfig("weights must be finite".into()));
        }
        if let Some((lo, hi)) = window {
            if hi < lo || (hi - lo + 1) as usize != weights.nrows() {
                return Err(LearnerError::BadConfig(format!(
                    "window [{lo}, {hi}] does not cover {} weight rows",
                    weights.nrows()
                )));
            }
        }
        Ok(FeatureWeights {
            weights,
            lambda,
            selected_tau,
            objective_trace: Vec::new(),
            window,
        })
    }

    pub fn weights(&self) -> &Array2<f64> {
        &self.weights
    }

    pub fn lambda(&self) -> f64 {
        self.lambda
    }

    pub fn selected_tau(&self) -> f64 {
        self.selected_tau
    }

    pub fn objective_trace(&self) -> &[f64] {
        &self.objective_trace
    }

    pub fn window(&self) -> Option<(i64, i64)> {
        self.window
    }

    /// Rows holding at least one exactly nonzero weight.
    pub fn support(&self) -> Vec<usize> {
        (0..self.weights.nrows())
            .filter(|&i| self.weights.row(i).iter().any(|&w| w != 0.0))
            .collect()
    }

    /// For a dictionary fit, the support expressed as integer indices.
    pub fn support_indices(&self) -> Option<Vec<i64>> {
        self.window
            .map(|(lo, _)| self.support().iter().map(|&r| lo + r as i64).collect())
    }
}

/// Applies the fitted weights to the features of a point.
pub fn l1_predict(
    weights: &FeatureWeights,
    map: &FeatureMap,
    x: &Array1<f64>,
) -> Result<Array2<f64>, LearnerError> {
    let phi = map.eval(x)?;
    Ok(weights.weights.t().dot(&phi))
}

/// Indicator features over the integer window `[lo, hi]`: index j maps to
/// the standard basis vector at position `j - lo`, anything outside the
/// window to the zero vector.
pub fn indicator_features(lo: i64, hi: i64, k_outputs: usize) -> FeatureMap {
    let n = (hi - lo + 1) as usize;
    FeatureMap::from_vector_features(
        n,
        k_outputs,
        Box::new(move |x: &Array1<f64>| {
            let mut phi = Array1::zeros(n);
            if let Some(idx) = integer_index(x) {
                if idx >= lo && idx <= hi {
                    phi[(idx - lo) as usize] = 1.0;
                }
            }
            phi
        }),
    )
}

fn integer_index(x: &Array1<f64>) -> Option<i64> {
    if x.len() != 1 {
        return None;
    }
    let r = x[0].round();
    if (x[0] - r).abs() <= 1e-9 {
        Some(r as i64)
    } else {
        None
    }
}

/// Quadratic data in normal form: g(w) = y2 - 2 w.b + w.H.w.
pub struct QuadraticForm {
    pub h: Array2<f64>,
    pub b: Array1<f64>,
    pub y2: f64,
}

impl QuadraticForm {
    pub fn value(&self, w: &Array1<f64>) -> f64 {
        self.y2 - 2.0 * w.dot(&self.b) + w.dot(&self.h.dot(w))
    }

    pub fn gradient(&self, w: &Array1<f64>) -> Array1<f64> {
        2.0 * (&self.h.dot(w) - &self.b)
    }
}

/// Collects the smooth part of the sparse objective over the whole dataset.
pub fn assemble_quadratic(data: &Dataset, map: &FeatureMap) -> Result<QuadraticForm, LearnerError> {
    let dim = map.n_features() * map.k_outputs();
    let out_dim = map.k_outputs() * map.width();
    if data.output_dim() != out_dim {
        return Err(LearnerError::OutputDimMismatch {
            kernel: out_dim,
            data: data.output_dim(),
        });
    }
    let mut h = Array2::zeros((dim, dim));
    let mut b = Array1::zeros(dim);
    let mut y2 = 0.0;
    for (x, y) in data.inputs().iter().zip(data.outputs()) {
        let op = explicit_basis_operator(map, x)?;
        let m = op.matrix();
        h = h + &m.t().dot(m);
        b = b + &m.t().dot(y);
        y2 += y.dot(y);
    }
    Ok(QuadraticForm { h, b, y2 })
}

struct IstaRun {
    w: Array1<f64>,
    trace: Vec<f64>,
}

/// ISTA with backtracking on the majorization of the smooth part. The
/// composite trace is nonincreasing; coordinates that start at zero with a
/// permanently zero gradient stay exactly zero through the soft threshold.
fn ista_solve(q: &QuadraticForm, tau: f64, w0: &Array1<f64>, max_iters: usize) -> IstaRun {
    let l1 = |w: &Array1<f64>| w.iter().map(|x| x.abs()).sum::<f64>();
    let mut w = w0.clone();
    let mut gw = q.value(&w);
    let mut trace = vec![gw + tau * l1(&w)];
    let mut t = 1.0f64;
    for _ in 0..max_iters {
        let grad = q.gradient(&w);
        // Prox-gradient residual at unit step decides optimality.
        let residual = {
            let probe = solvers::prox_l1(&(&w - &grad), tau);
            (&probe - &w).iter().map(|d| d * d).sum::<f64>().sqrt()
        };
        if residual <= 1e-10 {
            break;
        }
        let mut accepted = false;
        for _ in 0..60 {
            let u = solvers::prox_l1(&(&w - &(t * &grad)), t * tau);
            let delta = &u - &w;
            let dnorm2: f64 = delta.iter().map(|d| d * d).sum();
            if dnorm2 == 0.0 {
                break;
            }
            let gu = q.value(&u);
            let bound = gw + grad.dot(&delta) + dnorm2 / (2.0 * t) + 1e-12 * (1.0 + gw.abs());
            if gu <= bound {
                w = u;
                gw = gu;
                trace.push(gw + tau * l1(&w));
                accepted = true;
                break;
            }
            t *= 0.5;
        }
        if !accepted {
            break;
        }
    }
    IstaRun { w, trace }
}

fn original_objective(q: &QuadraticForm, lambda: f64, w: &Array1<f64>) -> f64 {
    let l1: f64 = w.iter().map(|x| x.abs()).sum();
    q.value(w) + lambda * l1 * l1
}

fn fit_l1_core(
    data: &Dataset,
    map: &FeatureMap,
    lambda: f64,
) -> Result<FeatureWeights, LearnerError> {
    if !(lambda >= 0.0) {
        return Err(LearnerError::BadLambda { got: lambda });
    }
    if data.is_empty() {
        return Err(LearnerError::EmptyDataset);
    }
    let q = assemble_quadratic(data, map)?;
    let dim = map.n_features() * map.k_outputs();
    let zero = Array1::zeros(dim);
    let tau_max = q.gradient(&zero).iter().fold(0.0f64, |a, g| a.max(g.abs()));

    // Descending grid of scaled problems, warm-started, then the unscaled
    // least-squares run from zero.
    let mut candidates: Vec<(f64, IstaRun)> = Vec::new();
    if tau_max > 0.0 {
        let ratio = TAU_GRID_SPAN.powf(1.0 / (TAU_GRID_POINTS as f64 - 1.0));
        let mut warm = zero.clone();
        for k in 0..TAU_GRID_POINTS {
            let tau = tau_max * ratio.powi(k as i32);
            let run = ista_solve(&q, tau, &warm, 20_000);
            warm = run.w.clone();
            candidates.push((tau, run));
        }
    }
    candidates.push((0.0, ista_solve(&q, 0.0, &zero, 20_000)));

    let best_index = |cands: &[(f64, IstaRun)]| -> usize {
        let mut best = 0;
        for (i, (_, run)) in cands.iter().enumerate() {
            if original_objective(&q, lambda, &run.w)
                < original_objective(&q, lambda, &cands[best].1.w)
            {
                best = i;
            }
        }
        best
    };

    // Fixed-point polish: the squared penalty is stationary at the scaled
    // solution whose tau equals 2 lambda |W|_1.
    if lambda > 0.0 {
        for _ in 0..POLISH_ROUNDS {
            let best = best_index(&candidates);
            let w = candidates[best].1.w.clone();
            let tau_fp = 2.0 * lambda * w.iter().map(|x| x.abs()).sum::<f64>();
            if tau_fp == 0.0 {
                break;
            }
            let run = ista_solve(&q, tau_fp, &w, 20_000);
            candidates.push((tau_fp, run));
        }
    }

    let best = best_index(&candidates);
    let (selected_tau, run) = &candidates[best];
    let weights = run
        .w
        .clone()
        .into_shape_with_order((map.n_features(), map.k_outputs()))
        .expect("weight reshape");
    Ok(FeatureWeights {
        weights,
        lambda,
        selected_tau: *selected_tau,
        objective_trace: run.trace.clone(),
        window: None,
    })
}

/// Fits the squared-l1 feature selection objective
/// `sum_i |y_i - L_{x_i} W|^2 + lambda |W|_1^2` over explicit features.
pub fn fit_l1(
    data: &Dataset,
    map: &FeatureMap,
    lambda: f64,
) -> Result<FeatureWeights, LearnerError> {
    fit_l1_core(data, map, lambda)
}

/// Same solver over indicator features on an integer window. `half_width`
/// defaults to 32; the window is centered on the training indices' range
/// and every training index must fall inside it.
pub fn fit_l1_dictionary(
    data: &Dataset,
    lambda: f64,
    half_width: Option<usize>,
) -> Result<FeatureWeights, LearnerError> {
    if data.is_empty() {
        return Err(LearnerError::EmptyDataset);
    }
    let w = half_width.unwrap_or(32) as i64;
    let mut indices = Vec::with_capacity(data.len());
    for (i, x) in data.inputs().iter().enumerate() {
        match integer_index(x) {
            Some(idx) => indices.push(idx),
            None => {
                return Err(LearnerError::BadConfig(format!(
                    "training input {i} is not a 1-d integer index"
                )))
            }
        }
    }
    let min = *indices.iter().min().expect("nonempty");
    let max = *indices.iter().max().expect("nonempty");
    let center = (min + max).div_euclid(2);
    let lo = center - w;
    let hi = center + w;
    for &idx in &indices {
        if idx < lo || idx > hi {
            return Err(LearnerError::OutsideWindow { index: idx, lo, hi });
        }
    }
    let map = indicator_features(lo, hi, data.output_dim());
    let mut fitted = fit_l1_core(data, &map, lambda)?;
    fitted.window = Some((lo, hi));
    Ok(fitted)
}
