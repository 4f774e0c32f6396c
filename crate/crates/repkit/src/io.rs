//! CSV datasets and predictions, JSON model files.
//!
//! Floats are written in their shortest round-trip decimal form and parse
//! back bit for bit, so write, read, write is byte-stable. Model files
//! carry an explicit `format_version` plus the fitting assumptions baked
//! into the learner that produced them.

use crate::kernels::KernelSpec;
use crate::learners::deep::{deep_predict, Activation, DeepNetState};
use crate::learners::gp::GaussianRepresenterModel;
use crate::learners::l1::FeatureWeights;
use crate::learners::{Dataset, LearnerError, RepresenterModel};
use crate::operators::FeatureMap;
use ndarray::{Array1, Array2};
use serde::{Deserialize, Serialize};
use std::path::Path;
use thiserror::Error;

/// Version stamp written into every JSON artifact.
pub const FORMAT_VERSION: u32 = 1;

#[derive(Debug, Error)]
pub enum IoError {
    #[error("{origin}:{line}: {message}")]
    Parse {
        origin: String,
        line: usize,
        message: String,
    },
    #[error("unsupported format version {got}; this build reads version 1")]
    Version { got: u32 },
    #[error("malformed model file: {0}")]
    Malformed(String),
    #[error(transparent)]
    File(#[from] std::io::Error),
    #[error(transparent)]
    Json(#[from] serde_json::Error),
    #[error(transparent)]
    Learner(#[from] LearnerError),
}

fn parse_err(origin: &str, line: usize, message: impl Into<String>) -> IoError {
    IoError::Parse {
        origin: origin.to_string(),
        line,
        message: message.into(),
    }
}

// ---------------------------------------------------------------------------
// CSV datasets
// ---------------------------------------------------------------------------

/// Renders a dataset as CSV with `x_*` input columns, `y_*` output columns,
/// and, when per-sample output covariances are attached, row-major
/// `cov_<row>_<col>` columns.
pub fn dataset_to_csv(data: &Dataset) -> String {
    let d = data.input_dim();
    let n = data.output_dim();
    let mut cols: Vec<String> = (0..d).map(|j| format!("x_{j}")).collect();
    cols.extend((0..n).map(|j| format!("y_{j}")));
    if data.output_covs().is_some() {
        for a in 0..n {
            for b in 0..n {
                cols.push(format!("cov_{a}_{b}"));
            }
        }
    }
    let mut out = cols.join(",");
    out.push('\n');
    for i in 0..data.len() {
        let mut fields: Vec<String> = data.inputs()[i].iter().map(|v| format!("{v}")).collect();
        fields.extend(data.outputs()[i].iter().map(|v| format!("{v}")));
        if let Some(covs) = data.output_covs() {
            fields.extend(covs[i].iter().map(|v| format!("{v}")));
        }
        out.push_str(&fields.join(","));
        out.push('\n');
    }
    out
}

/// Renders a dataset together with its evaluated feature vectors: `x_*`,
/// `phi_*`, then `y_*` columns. Only scalar feature maps (width one) are
/// supported.
pub fn features_to_csv(data: &Dataset, map: &FeatureMap) -> Result<String, IoError> {
    if map.width() != 1 {
        return Err(IoError::Malformed(
            "feature CSV export needs a width-one feature map".into(),
        ));
    }
    let d = data.input_dim();
    let n = data.output_dim();
    let p = map.n_features();
    let mut cols: Vec<String> = (0..d).map(|j| format!("x_{j}")).collect();
    cols.extend((0..p).map(|j| format!("phi_{j}")));
    cols.extend((0..n).map(|j| format!("y_{j}")));
    let mut out = cols.join(",");
    out.push('\n');
    for i in 0..data.len() {
        let phi = map.eval(&data.inputs()[i]).map_err(LearnerError::from)?;
        let mut fields: Vec<String> = data.inputs()[i].iter().map(|v| format!("{v}")).collect();
        fields.extend((0..p).map(|j| format!("{}", phi[(j, 0)])));
        fields.extend(data.outputs()[i].iter().map(|v| format!("{v}")));
        out.push_str(&fields.join(","));
        out.push('\n');
    }
    Ok(out)
}

struct ColumnPlan {
    x: Vec<usize>,
    y: Vec<usize>,
    cov: Vec<usize>,
    n_cols: usize,
    output_dim: usize,
}

/// Reads the header row and locates `x_*`, `y_*` and `cov_*_*` columns.
/// `phi_*` columns are accepted and ignored: feature values are derived
/// data. Indices of each group must be contiguous from zero and covariance
/// columns, when present, must cover a full square in row-major order.
fn plan_columns(header: &str, origin: &str) -> Result<ColumnPlan, IoError> {
    let names: Vec<&str> = header.split(',').map(str::trim).collect();
    let mut x: Vec<(usize, usize)> = Vec::new();
    let mut y: Vec<(usize, usize)> = Vec::new();
    let mut cov: Vec<((usize, usize), usize)> = Vec::new();
    for (pos, name) in names.iter().enumerate() {
        if let Some(rest) = name.strip_prefix("x_") {
            let j: usize = rest
                .parse()
                .map_err(|_| parse_err(origin, 1, format!("bad input column name '{name}'")))?;
            x.push((j, pos));
        } else if let Some(rest) = name.strip_prefix("y_") {
            let j: usize = rest
                .parse()
                .map_err(|_| parse_err(origin, 1, format!("bad output column name '{name}'")))?;
            y.push((j, pos));
        } else if let Some(rest) = name.strip_prefix("cov_") {
            let (a, b) = rest
                .split_once('_')
                .and_then(|(a, b)| Some((a.parse::<usize>().ok()?, b.parse::<usize>().ok()?)))
                .ok_or_else(|| {
                    parse_err(origin, 1, format!("bad covariance column name '{name}'"))
                })?;
            cov.push(((a, b), pos));
        } else if name.strip_prefix("phi_").is_some() {
            // Derived feature values; skipped on input.
        } else {
            return Err(parse_err(
                origin,
                1,
                format!("unrecognized column '{name}'"),
            ));
        }
    }
    x.sort_unstable();
    y.sort_unstable();
    cov.sort_unstable();
    for (want, (got, _)) in x.iter().enumerate() {
        if *got != want {
            return Err(parse_err(origin, 1, "input columns must be x_0, x_1, ..."));
        }
    }
    for (want, (got, _)) in y.iter().enumerate() {
        if *got != want {
            return Err(parse_err(origin, 1, "output columns must be y_0, y_1, ..."));
        }
    }
    if x.is_empty() || y.is_empty() {
        return Err(parse_err(
            origin,
            1,
            "need at least one x_ and one y_ column",
        ));
    }
    let n = y.len();
    if !cov.is_empty() {
        if cov.len() != n * n {
            return Err(parse_err(
                origin,
                1,
                format!(
                    "expected {} covariance columns for {n} outputs, found {}",
                    n * n,
                    cov.len()
                ),
            ));
        }
        for (k, ((a, b), _)) in cov.iter().enumerate() {
            if (*a, *b) != (k / n, k % n) {
                return Err(parse_err(
                    origin,
                    1,
                    "covariance columns must enumerate cov_0_0, cov_0_1, ... row-major",
                ));
            }
        }
    }
    Ok(ColumnPlan {
        x: x.into_iter().map(|(_, pos)| pos).collect(),
        y: y.into_iter().map(|(_, pos)| pos).collect(),
        cov: cov.into_iter().map(|(_, pos)| pos).collect(),
        n_cols: names.len(),
        output_dim: n,
    })
}

fn parse_field(fields: &[&str], pos: usize, origin: &str, line: usize) -> Result<f64, IoError> {
    let raw = fields[pos].trim();
    raw.parse::<f64>().map_err(|_| {
        parse_err(
            origin,
            line,
            format!("field {} is not a number: '{raw}'", pos + 1),
        )
    })
}

/// Parses a dataset from CSV text. `origin` names the source (usually the
/// file path) in error messages; every parse error carries a 1-based line
/// number.
pub fn dataset_from_csv(text: &str, origin: &str) -> Result<Dataset, IoError> {
    let mut lines = text.lines();
    let header = lines
        .next()
        .ok_or_else(|| parse_err(origin, 1, "empty file"))?;
    let plan = plan_columns(header, origin)?;
    let mut inputs = Vec::new();
    let mut outputs = Vec::new();
    let mut covs: Vec<Array2<f64>> = Vec::new();
    for (idx, row) in lines.enumerate() {
        let line = idx + 2;
        if row.trim().is_empty() {
            return Err(parse_err(origin, line, "blank row"));
        }
        let fields: Vec<&str> = row.split(',').collect();
        if fields.len() != plan.n_cols {
            return Err(parse_err(
                origin,
                line,
                format!("expected {} fields, got {}", plan.n_cols, fields.len()),
            ));
        }
        let mut xv = Array1::zeros(plan.x.len());
        for (j, &pos) in plan.x.iter().enumerate() {
            xv[j] = parse_field(&fields, pos, origin, line)?;
        }
        inputs.push(xv);
        let mut yv = Array1::zeros(plan.y.len());
        for (j, &pos) in plan.y.iter().enumerate() {
            yv[j] = parse_field(&fields, pos, origin, line)?;
        }
        outputs.push(yv);
        if !plan.cov.is_empty() {
            let n = plan.output_dim;
            let mut c = Array2::zeros((n, n));
            for (k, &pos) in plan.cov.iter().enumerate() {
                c[(k / n, k % n)] = parse_field(&fields, pos, origin, line)?;
            }
            covs.push(c);
        }
    }
    if inputs.is_empty() {
        return Err(parse_err(origin, 2, "no data rows"));
    }
    let data = if covs.is_empty() {
        Dataset::new(inputs, outputs)?
    } else {
        Dataset::with_output_covs(inputs, outputs, covs)?
    };
    Ok(data)
}

pub fn write_dataset(path: &Path, data: &Dataset) -> Result<(), IoError> {
    std::fs::write(path, dataset_to_csv(data))?;
    Ok(())
}

pub fn read_dataset(path: &Path) -> Result<Dataset, IoError> {
    let text = std::fs::read_to_string(path)?;
    dataset_from_csv(&text, &path.display().to_string())
}

// ---------------------------------------------------------------------------
// CSV predictions
// ---------------------------------------------------------------------------

/// One prediction: the query point, the predicted outputs, and optionally a
/// predictive covariance for stochastic models.
#[derive(Debug, Clone)]
pub struct PredictionRow {
    pub x: Array1<f64>,
    pub y: Array1<f64>,
    pub cov: Option<Array2<f64>>,
}

/// Renders predictions as CSV. All rows must agree on the presence of a
/// covariance and on every dimension.
pub fn predictions_to_csv(rows: &[PredictionRow]) -> Result<String, IoError> {
    let first = rows
        .first()
        .ok_or_else(|| IoError::Malformed("no predictions to write".into()))?;
    let d = first.x.len();
    let n = first.y.len();
    let with_cov = first.cov.is_some();
    let mut cols: Vec<String> = (0..d).map(|j| format!("x_{j}")).collect();
    cols.extend((0..n).map(|j| format!("y_{j}")));
    if with_cov {
        for a in 0..n {
            for b in 0..n {
                cols.push(format!("cov_{a}_{b}"));
            }
        }
    }
    let mut out = cols.join(",");
    out.push('\n');
    for row in rows {
        if row.x.len() != d || row.y.len() != n || row.cov.is_some() != with_cov {
            return Err(IoError::Malformed(
                "prediction rows disagree on their shape".into(),
            ));
        }
        let mut fields: Vec<String> = row.x.iter().map(|v| format!("{v}")).collect();
        fields.extend(row.y.iter().map(|v| format!("{v}")));
        if let Some(c) = &row.cov {
            fields.extend(c.iter().map(|v| format!("{v}")));
        }
        out.push_str(&fields.join(","));
        out.push('\n');
    }
    Ok(out)
}

// ---------------------------------------------------------------------------
// JSON model files
// ---------------------------------------------------------------------------

/// Any fitted model the command line can save and reload.
#[derive(Debug, Clone)]
pub enum AnyModel {
    Ridge {
        model: RepresenterModel,
        lambda: f64,
    },
    Gp(GaussianRepresenterModel),
    L1Dictionary(FeatureWeights),
    Deep(DeepNetState),
}

impl AnyModel {
    pub fn learner_name(&self) -> &'static str {
        match self {
            AnyModel::Ridge { .. } => "ridge",
            AnyModel::Gp(_) => "gp",
            AnyModel::L1Dictionary(_) => "l1",
            AnyModel::Deep(_) => "deep",
        }
    }

    fn assumptions(&self) -> Vec<String> {
        let list: &[&str] = match self {
            AnyModel::Ridge { .. } => &[
                "outputs are deterministic; squared error with a squared-norm penalty solved as one linear system",
            ],
            AnyModel::Gp(_) => &[
                "observation noise is independent of the coefficient vector and shares one covariance across samples",
                "the coefficient covariance minimizes the expectation-expanded objective over symmetric blocks with eigenvalue clipping",
            ],
            AnyModel::L1Dictionary(_) => &[
                "weights come from a scaled-l1 proximal grid; the reported candidate minimizes the squared coordinate-sum objective",
                "the support is confined to the indicator window around the training indices",
            ],
            AnyModel::Deep(_) => &[
                "hidden junctions are shooting targets; consensus is enforced by a geometrically tightened penalty schedule",
            ],
        };
        list.iter().map(|s| s.to_string()).collect()
    }
}

fn rows_of(m: &Array2<f64>) -> Vec<Vec<f64>> {
    (0..m.nrows()).map(|i| m.row(i).to_vec()).collect()
}

fn matrix_of(rows: &[Vec<f64>], what: &str) -> Result<Array2<f64>, IoError> {
    let r = rows.len();
    if r == 0 {
        return Err(IoError::Malformed(format!("{what} has no rows")));
    }
    let c = rows[0].len();
    let mut out = Array2::zeros((r, c));
    for (i, row) in rows.iter().enumerate() {
        if row.len() != c {
            return Err(IoError::Malformed(format!(
                "{what} rows have uneven lengths"
            )));
        }
        for (j, &v) in row.iter().enumerate() {
            out[(i, j)] = v;
        }
    }
    Ok(out)
}

fn points_of(rows: &[Vec<f64>], what: &str) -> Result<Vec<Array1<f64>>, IoError> {
    if rows.is_empty() {
        return Err(IoError::Malformed(format!("{what} has no rows")));
    }
    let d = rows[0].len();
    let mut out = Vec::with_capacity(rows.len());
    for row in rows {
        if row.len() != d {
            return Err(IoError::Malformed(format!(
                "{what} rows have uneven lengths"
            )));
        }
        out.push(Array1::from_vec(row.clone()));
    }
    Ok(out)
}

#[derive(Serialize, Deserialize)]
#[serde(tag = "learner", rename_all = "snake_case")]
enum ModelPayload {
    Ridge {
        kernel: KernelSpec,
        lambda: f64,
        inputs: Vec<Vec<f64>>,
        coefficients: Vec<Vec<f64>>,
    },
    Gp {
        kernel: KernelSpec,
        lambda: f64,
        inputs: Vec<Vec<f64>>,
        means: Vec<Vec<f64>>,
        covariance: Vec<Vec<f64>>,
        noise_covariance: Vec<Vec<f64>>,
    },
    L1 {
        lambda: f64,
        selected_tau: f64,
        window: (i64, i64),
        weights: Vec<Vec<f64>>,
    },
    Deep {
        widths: Vec<usize>,
        kernels: Vec<KernelSpec>,
        activations: Vec<Activation>,
        lambdas: Vec<f64>,
        rho0: f64,
        tighten: f64,
        rounds: usize,
        net_seed: u64,
        coefficients: Vec<Vec<Vec<f64>>>,
        targets: Vec<Vec<Vec<f64>>>,
    },
}

#[derive(Serialize, Deserialize)]
struct ModelFile {
    format_version: u32,
    seed: u64,
    assumptions: Vec<String>,
    #[serde(flatten)]
    payload: ModelPayload,
}

/// Serializes a model with the seed that produced it. The output is
/// deterministic and ends with a newline.
pub fn model_to_json(model: &AnyModel, seed: u64) -> Result<String, IoError> {
    let payload = match model {
        AnyModel::Ridge { model, lambda } => ModelPayload::Ridge {
            kernel: model.kernel().clone(),
            lambda: *lambda,
            inputs: model.inputs().iter().map(|x| x.to_vec()).collect(),
            coefficients: rows_of(model.coefficients()),
        },
        AnyModel::Gp(model) => ModelPayload::Gp {
            kernel: model.kernel().clone(),
            lambda: model.lambda(),
            inputs: model.inputs().iter().map(|x| x.to_vec()).collect(),
            means: rows_of(model.means()),
            covariance: rows_of(model.covariance()),
            noise_covariance: rows_of(model.noise_cov()),
        },
        AnyModel::L1Dictionary(weights) => {
            let window = weights.window().ok_or_else(|| {
                IoError::Malformed("only dictionary-window sparse fits are saved".into())
            })?;
            ModelPayload::L1 {
                lambda: weights.lambda(),
                selected_tau: weights.selected_tau(),
                window,
                weights: rows_of(weights.weights()),
            }
        }
        AnyModel::Deep(state) => {
            if !state.is_fitted() {
                return Err(IoError::Malformed("deep model is not fitted".into()));
            }
            let (rho0, tighten, rounds) = state.schedule();
            ModelPayload::Deep {
                widths: state.widths().to_vec(),
                kernels: state.kernels().to_vec(),
                activations: state.activations().to_vec(),
                lambdas: state.lambdas().to_vec(),
                rho0,
                tighten,
                rounds,
                net_seed: state.seed(),
                coefficients: state.coefficients().iter().map(|m| rows_of(m)).collect(),
                targets: state.targets().iter().map(|m| rows_of(m)).collect(),
            }
        }
    };
    let file = ModelFile {
        format_version: FORMAT_VERSION,
        seed,
        assumptions: model.assumptions(),
        payload,
    };
    let mut s = serde_json::to_string_pretty(&file)?;
    s.push('\n');
    Ok(s)
}

/// Parses a model file, returning the model and the seed recorded with it.
pub fn model_from_json(text: &str) -> Result<(AnyModel, u64), IoError> {
    let file: ModelFile = serde_json::from_str(text)?;
    if file.format_version != FORMAT_VERSION {
        return Err(IoError::Version {
            got: file.format_version,
        });
    }
    let model = match file.payload {
        ModelPayload::Ridge {
            kernel,
            lambda,
            inputs,
            coefficients,
        } => AnyModel::Ridge {
            model: RepresenterModel::new(
                kernel,
                points_of(&inputs, "inputs")?,
                matrix_of(&coefficients, "coefficients")?,
            )?,
            lambda,
        },
        ModelPayload::Gp {
            kernel,
            lambda,
            inputs,
            means,
            covariance,
            noise_covariance,
        } => AnyModel::Gp(GaussianRepresenterModel::from_parts(
            kernel,
            points_of(&inputs, "inputs")?,
            matrix_of(&means, "means")?,
            matrix_of(&covariance, "covariance")?,
            lambda,
            matrix_of(&noise_covariance, "noise covariance")?,
        )?),
        ModelPayload::L1 {
            lambda,
            selected_tau,
            window,
            weights,
        } => AnyModel::L1Dictionary(FeatureWeights::from_parts(
            matrix_of(&weights, "weights")?,
            lambda,
            selected_tau,
            Some(window),
        )?),
        ModelPayload::Deep {
            widths,
            kernels,
            activations,
            lambdas,
            rho0,
            tighten,
            rounds,
            net_seed,
            coefficients,
            targets,
        } => {
            let state = DeepNetState::new(widths, kernels, activations, lambdas, net_seed)?
                .with_schedule(rho0, tighten, rounds)?;
            let coeffs: Result<Vec<_>, _> = coefficients
                .iter()
                .map(|m| matrix_of(m, "coefficients"))
                .collect();
            let tgts: Result<Vec<_>, _> = targets.iter().map(|m| matrix_of(m, "targets")).collect();
            AnyModel::Deep(state.restore_fitted(coeffs?, tgts?)?)
        }
    };
    Ok((model, file.seed))
}

pub fn save_model(path: &Path, model: &AnyModel, seed: u64) -> Result<(), IoError> {
    std::fs::write(path, model_to_json(model, seed)?)?;
    Ok(())
}

pub fn load_model(path: &Path) -> Result<(AnyModel, u64), IoError> {
    let text = std::fs::read_to_string(path)?;
    model_from_json(&text)
}

/// Predicts at one point with whatever model is loaded. Ridge and sparse
/// models emit plain outputs, stochastic models attach the predictive
/// covariance, deep models emit class probabilities.
pub fn predict_row(model: &AnyModel, x: &Array1<f64>) -> Result<PredictionRow, IoError> {
    let row = match model {
        AnyModel::Ridge { model, .. } => PredictionRow {
            x: x.clone(),
            y: model.predict(x)?,
            cov: None,
        },
        AnyModel::Gp(model) => {
            let (mean, cov) = crate::learners::gp::gp_predict(model, x)?;
            PredictionRow {
                x: x.clone(),
                y: mean,
                cov: Some(cov),
            }
        }
        AnyModel::L1Dictionary(weights) => {
            let (lo, hi) = weights
                .window()
                .ok_or_else(|| IoError::Malformed("sparse model lacks its window".into()))?;
            let k = weights.weights().ncols();
            let map = crate::learners::l1::indicator_features(lo, hi, k);
            let out = crate::learners::l1::l1_predict(weights, &map, x)?;
            PredictionRow {
                x: x.clone(),
                y: out.column(0).to_owned(),
                cov: None,
            }
        }
        AnyModel::Deep(state) => PredictionRow {
            x: x.clone(),
            y: deep_predict(state, x)?,
            cov: None,
        },
    };
    Ok(row)
}
