//! Command line driver: dataset generation, fitting, prediction, and the
//! named verdict suites. Every command is a deterministic function of its
//! flags, input files, and seed. The seed comes from `--seed` when given,
//! else from `REPKIT_SEED`, else defaults to 42.

use clap::{Parser, Subcommand, ValueEnum};
use ndarray::Array1;
use repkit::datasets;
use repkit::io::{
    self, dataset_to_csv, features_to_csv, predictions_to_csv, read_dataset, AnyModel,
    PredictionRow,
};
use repkit::kernels::KernelSpec;
use repkit::learners::deep::{fit_deep_net, Activation, DeepNetState};
use repkit::learners::gp::fit_gp;
use repkit::learners::l1::fit_l1_dictionary;
use repkit::learners::{fit_ridge, Dataset, LearnerConfig};
use repkit::suites::{run_suite, SuiteKind};
use std::error::Error;
use std::path::PathBuf;
use std::process::ExitCode;

#[derive(Parser)]
#[command(
    name = "repkit",
    version,
    about = "Subspace-valued map checkers and representer-reduced learners"
)]
struct Cli {
    #[command(subcommand)]
    command: Cmd,
}

#[derive(Clone, Copy, ValueEnum)]
enum DataKind {
    /// Three Gaussian blobs in the plane with one-hot labels.
    Blobs3,
    /// Noisy sinusoid pair on a 1-D grid with per-sample output covariance.
    #[value(name = "sinusoid_gp")]
    SinusoidGp,
    /// Plane-monomial features with a fixed set of dead coordinates.
    #[value(name = "sparse_features")]
    SparseFeatures,
}

#[derive(Clone, Copy, ValueEnum)]
enum LearnerKind {
    /// Kernel expansion from a regularized squared-error solve.
    Ridge,
    /// Stochastic-output fit with coefficient means and covariance.
    Gp,
    /// Sparse integer-dictionary fit with a coordinate-sum penalty.
    L1,
    /// Layered kernel net trained by shooting with a consensus schedule.
    Deep,
}

#[derive(Clone, Copy, ValueEnum)]
enum KernelKind {
    Sqexp,
    Linear,
    Poly,
}

#[derive(Clone, Copy, ValueEnum)]
enum CliSuite {
    Maps,
    Orthomonotone,
    Adjoints,
    Representer,
    All,
}

impl From<CliSuite> for SuiteKind {
    fn from(s: CliSuite) -> SuiteKind {
        match s {
            CliSuite::Maps => SuiteKind::Maps,
            CliSuite::Orthomonotone => SuiteKind::Orthomonotone,
            CliSuite::Adjoints => SuiteKind::Adjoints,
            CliSuite::Representer => SuiteKind::Representer,
            CliSuite::All => SuiteKind::All,
        }
    }
}

#[derive(Subcommand)]
enum Cmd {
    /// Write one of the example datasets as CSV.
    Datagen {
        #[arg(long, value_enum)]
        kind: DataKind,
        /// Points per class for the blob generator.
        #[arg(long, default_value_t = 20)]
        per_class: usize,
        /// Sample count for the grid and feature generators.
        #[arg(long, default_value_t = 8)]
        samples: usize,
        /// Dead feature indices for the sparse generator.
        #[arg(long, value_delimiter = ',', default_values_t = [2, 5])]
        dead: Vec<usize>,
        #[arg(long)]
        seed: Option<u64>,
        #[arg(long)]
        out: PathBuf,
    },
    /// Fit a learner to a CSV dataset and save the model as JSON.
    Fit {
        #[arg(long, value_enum)]
        learner: LearnerKind,
        /// Training data CSV.
        #[arg(long)]
        data: PathBuf,
        #[arg(long, value_enum, default_value_t = KernelKind::Sqexp)]
        kernel: KernelKind,
        #[arg(long, default_value_t = 1.0)]
        lengthscale: f64,
        /// Polynomial kernel degree.
        #[arg(long, default_value_t = 2)]
        degree: u32,
        #[arg(long, default_value_t = 0.1)]
        lambda: f64,
        /// Layer plan for the deep learner, e.g. `3:tanh,3:tanh,3:logistic`.
        #[arg(long)]
        layers: Option<String>,
        /// Half-width of the integer dictionary window for the sparse learner.
        #[arg(long)]
        window: Option<usize>,
        #[arg(long)]
        seed: Option<u64>,
        #[arg(long)]
        out: PathBuf,
    },
    /// Predict with a saved model at the inputs of a CSV dataset.
    Predict {
        #[arg(long)]
        model: PathBuf,
        #[arg(long)]
        data: PathBuf,
        #[arg(long)]
        out: PathBuf,
    },
    /// Run a named verdict suite and report every expected outcome.
    Check {
        #[arg(long, value_enum, default_value_t = CliSuite::All)]
        suite: CliSuite,
        #[arg(long)]
        seed: Option<u64>,
        /// Report destination; stdout when absent.
        #[arg(long)]
        out: Option<PathBuf>,
    },
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(cli.command) {
        Ok(code) => code,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(2)
        }
    }
}

fn resolve_seed(flag: Option<u64>) -> Result<u64, String> {
    if let Some(s) = flag {
        return Ok(s);
    }
    match std::env::var("REPKIT_SEED") {
        Ok(v) => v
            .trim()
            .parse()
            .map_err(|_| format!("REPKIT_SEED is not an unsigned integer: '{v}'")),
        Err(_) => Ok(42),
    }
}

fn build_kernel(
    kind: KernelKind,
    lengthscale: f64,
    degree: u32,
    dim: usize,
) -> Result<KernelSpec, Box<dyn Error>> {
    let k = match kind {
        KernelKind::Sqexp => KernelSpec::squared_exponential(lengthscale, dim)?,
        KernelKind::Linear => KernelSpec::linear(dim)?,
        KernelKind::Poly => KernelSpec::polynomial(degree, 1.0, dim)?,
    };
    Ok(k)
}

fn parse_layers(plan: &str) -> Result<Vec<(usize, Activation)>, String> {
    let mut layers = Vec::new();
    for part in plan.split(',') {
        let (w, a) = part
            .split_once(':')
            .ok_or_else(|| format!("layer '{part}' is not of the form width:activation"))?;
        let width: usize = w
            .trim()
            .parse()
            .map_err(|_| format!("layer width '{w}' is not an unsigned integer"))?;
        let activation = match a.trim() {
            "tanh" => Activation::Tanh,
            "identity" => Activation::Identity,
            "logistic" => Activation::Logistic,
            other => return Err(format!("unknown activation '{other}'")),
        };
        layers.push((width, activation));
    }
    if layers.is_empty() {
        return Err("layer plan is empty".into());
    }
    Ok(layers)
}

fn fit_model(
    learner: LearnerKind,
    data: &Dataset,
    kernel: KernelKind,
    lengthscale: f64,
    degree: u32,
    lambda: f64,
    layers: Option<&str>,
    window: Option<usize>,
    seed: u64,
) -> Result<AnyModel, Box<dyn Error>> {
    match learner {
        LearnerKind::Ridge => {
            let kernel = build_kernel(kernel, lengthscale, degree, data.output_dim())?;
            let cfg = LearnerConfig::new(kernel, lambda)?;
            let model = fit_ridge(data, &cfg)?;
            Ok(AnyModel::Ridge { model, lambda })
        }
        LearnerKind::Gp => {
            let kernel = build_kernel(kernel, lengthscale, degree, data.output_dim())?;
            let cfg = LearnerConfig::new(kernel, lambda)?;
            Ok(AnyModel::Gp(fit_gp(data, &cfg)?))
        }
        LearnerKind::L1 => Ok(AnyModel::L1Dictionary(fit_l1_dictionary(
            data, lambda, window,
        )?)),
        LearnerKind::Deep => {
            let plan = parse_layers(layers.ok_or("the deep learner needs --layers")?)?;
            let last = plan.last().expect("plan is nonempty").0;
            if last != data.output_dim() {
                return Err(format!(
                    "last layer width {last} must match the {} output columns",
                    data.output_dim()
                )
                .into());
            }
            let mut widths = vec![data.input_dim()];
            let mut kernels = Vec::new();
            let mut activations = Vec::new();
            for (w, a) in &plan {
                widths.push(*w);
                kernels.push(build_kernel(kernel, lengthscale, degree, *w)?);
                activations.push(*a);
            }
            let lambdas = vec![lambda; plan.len()];
            let state = DeepNetState::new(widths, kernels, activations, lambdas, seed)?;
            Ok(AnyModel::Deep(fit_deep_net(data, &state)?))
        }
    }
}

fn run(cmd: Cmd) -> Result<ExitCode, Box<dyn Error>> {
    match cmd {
        Cmd::Datagen {
            kind,
            per_class,
            samples,
            dead,
            seed,
            out,
        } => {
            let seed = resolve_seed(seed)?;
            let text = match kind {
                DataKind::Blobs3 => dataset_to_csv(&datasets::blobs3(per_class, seed)?),
                DataKind::SinusoidGp => dataset_to_csv(&datasets::sinusoid_gp(samples, seed)?),
                DataKind::SparseFeatures => {
                    let (data, map) = datasets::sparse_features(samples, &dead, seed)?;
                    features_to_csv(&data, &map)?
                }
            };
            std::fs::write(&out, text)?;
            println!("wrote {}", out.display());
            Ok(ExitCode::SUCCESS)
        }
        Cmd::Fit {
            learner,
            data,
            kernel,
            lengthscale,
            degree,
            lambda,
            layers,
            window,
            seed,
            out,
        } => {
            let seed = resolve_seed(seed)?;
            let dataset = read_dataset(&data)?;
            let model = fit_model(
                learner,
                &dataset,
                kernel,
                lengthscale,
                degree,
                lambda,
                layers.as_deref(),
                window,
                seed,
            )?;
            io::save_model(&out, &model, seed)?;
            println!("wrote {} model to {}", model.learner_name(), out.display());
            Ok(ExitCode::SUCCESS)
        }
        Cmd::Predict { model, data, out } => {
            let (model, _) = io::load_model(&model)?;
            let dataset = read_dataset(&data)?;
            let rows: Vec<PredictionRow> = dataset
                .inputs()
                .iter()
                .map(|x: &Array1<f64>| io::predict_row(&model, x))
                .collect::<Result<_, _>>()?;
            std::fs::write(&out, predictions_to_csv(&rows)?)?;
            println!("wrote {} predictions to {}", rows.len(), out.display());
            Ok(ExitCode::SUCCESS)
        }
        Cmd::Check { suite, seed, out } => {
            let seed = resolve_seed(seed)?;
            let report = run_suite(SuiteKind::from(suite), seed);
            let json = report.to_json();
            match &out {
                Some(path) => std::fs::write(path, &json)?,
                None => print!("{json}"),
            }
            let total = report.entries.len();
            let off = report.mismatches();
            if off.is_empty() {
                println!("suite {}: {total} entries, all as expected", report.suite);
                Ok(ExitCode::SUCCESS)
            } else {
                println!(
                    "suite {}: {} of {total} entries deviate",
                    report.suite,
                    off.len()
                );
                for e in off {
                    eprintln!(
                        "  {}: expected {:?}, observed {:?}",
                        e.id,
                        e.expected,
                        e.verdict.outcome.summary()
                    );
                }
                Ok(ExitCode::FAILURE)
            }
        }
    }
}
