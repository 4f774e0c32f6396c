//! Seeded synthetic datasets used by the examples, the CLI and the tests.

use crate::learners::{Dataset, LearnerError};
use crate::operators::FeatureMap;
use ndarray::{array, Array1};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};

/// Cluster centers of the three-blob classification task.
pub const BLOB_CENTERS: [(f64, f64); 3] = [(0.0, 3.0), (-3.0, -2.0), (3.0, -2.0)];

/// Spread of each blob around its center.
const BLOB_SIGMA: f64 = 0.6;

fn normal(rng: &mut ChaCha8Rng) -> f64 {
    <StandardNormal as Distribution<f64>>::sample(&StandardNormal, rng)
}

/// Three well-separated 2-D Gaussian blobs with one-hot labels, grouped by
/// class in sample order.
pub fn blobs3(points_per_class: usize, seed: u64) -> Result<Dataset, LearnerError> {
    if points_per_class == 0 {
        return Err(LearnerError::EmptyDataset);
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut inputs = Vec::with_capacity(3 * points_per_class);
    let mut labels = Vec::with_capacity(3 * points_per_class);
    for (c, &(cx, cy)) in BLOB_CENTERS.iter().enumerate() {
        for _ in 0..points_per_class {
            inputs.push(array![
                cx + BLOB_SIGMA * normal(&mut rng),
                cy + BLOB_SIGMA * normal(&mut rng)
            ]);
            labels.push(c);
        }
    }
    Dataset::from_one_hot(inputs, &labels, 3)
}

/// Noisy 2-D observations of a sinusoid pair on an even 1-D grid, with the
/// per-sample observation covariance attached to the dataset.
pub fn sinusoid_gp(m: usize, seed: u64) -> Result<Dataset, LearnerError> {
    if m == 0 {
        return Err(LearnerError::EmptyDataset);
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut inputs = Vec::with_capacity(m);
    let mut outputs = Vec::with_capacity(m);
    let mut covs = Vec::with_capacity(m);
    for i in 0..m {
        let x = if m == 1 {
            0.0
        } else {
            3.0 * i as f64 / (m as f64 - 1.0)
        };
        let s = x.sin();
        let cov = array![[0.04 + 0.02 * s * s, 0.01], [0.01, 0.03]];
        // Draw correlated noise through the 2x2 Cholesky factor.
        let l11 = cov[(0, 0)].sqrt();
        let l21 = cov[(1, 0)] / l11;
        let l22 = (cov[(1, 1)] - l21 * l21).sqrt();
        let (u, v) = (normal(&mut rng), normal(&mut rng));
        let noise = array![l11 * u, l21 * u + l22 * v];
        let clean = array![(2.0 * x).sin(), x.cos()];
        inputs.push(array![x]);
        outputs.push(&clean + &noise);
        covs.push(cov);
    }
    Dataset::with_output_covs(inputs, outputs, covs)
}

/// Monomial features on the plane up to degree two, with the listed columns
/// forced to zero.
pub fn plane_monomials(dead: &[usize]) -> FeatureMap {
    let dead = dead.to_vec();
    FeatureMap::from_vector_features(
        6,
        1,
        Box::new(move |x: &Array1<f64>| {
            let mut phi = array![1.0, x[0], x[1], x[0] * x[0], x[1] * x[1], x[0] * x[1]];
            for &j in &dead {
                if j < 6 {
                    phi[j] = 0.0;
                }
            }
            phi
        }),
    )
}

/// Scalar regression data whose targets depend only on the live columns of
/// the plane monomials; the matching feature map is returned alongside.
pub fn sparse_features(
    m: usize,
    dead: &[usize],
    seed: u64,
) -> Result<(Dataset, FeatureMap), LearnerError> {
    if m == 0 {
        return Err(LearnerError::EmptyDataset);
    }
    if let Some(&bad) = dead.iter().find(|&&j| j >= 6) {
        return Err(LearnerError::BadConfig(format!(
            "dead feature index {bad} out of range for 6 features"
        )));
    }
    let map = plane_monomials(dead);
    let mut truth = Array1::<f64>::zeros(6);
    let mut assigned = 0;
    for j in 0..6 {
        if !dead.contains(&j) && assigned < 2 {
            truth[j] = if assigned == 0 { 1.5 } else { -2.0 };
            assigned += 1;
        }
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut inputs = Vec::with_capacity(m);
    let mut outputs = Vec::with_capacity(m);
    for _ in 0..m {
        let x = array![
            3.0 * rng_uniform(&mut rng) - 1.5,
            3.0 * rng_uniform(&mut rng) - 1.5
        ];
        let phi = map.eval(&x)?;
        let mut y = 0.0;
        for j in 0..6 {
            y += truth[j] * phi[(j, 0)];
        }
        y += 0.05 * normal(&mut rng);
        inputs.push(x);
        outputs.push(array![y]);
    }
    let data = Dataset::new(inputs, outputs)?;
    Ok((data, map))
}

fn rng_uniform(rng: &mut ChaCha8Rng) -> f64 {
    use rand::Rng;
    rng.random::<f64>()
}
