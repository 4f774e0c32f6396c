//! Seeded random generators for vectors, Gram matrices, and subspaces.
//!
//! Everything here draws from a caller-supplied ChaCha stream so that test
//! runs and suite reports are reproducible from a single seed.

use crate::hilbert::{orthonormalize, SpaceSpec, SubspaceBasis, DEFLATION_TOL};
use ndarray::{Array1, Array2};
use rand::Rng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};

/// Standard normal vector.
pub fn random_vector(n: usize, rng: &mut ChaCha8Rng) -> Array1<f64> {
    Array1::from_shape_fn(n, |_| StandardNormal.sample(rng))
}

/// Standard normal matrix.
pub fn random_matrix(rows: usize, cols: usize, rng: &mut ChaCha8Rng) -> Array2<f64> {
    Array2::from_shape_fn((rows, cols), |_| StandardNormal.sample(rng))
}

/// Well-conditioned random symmetric positive definite matrix `A^T A + I/2`.
pub fn random_spd(n: usize, rng: &mut ChaCha8Rng) -> Array2<f64> {
    let a = random_matrix(n, n, rng);
    let mut g = a.t().dot(&a) + 0.5 * Array2::<f64>::eye(n);
    // Symmetrize bit-exactly; floating point products can differ across the
    // diagonal by an ulp.
    for i in 0..n {
        for j in (i + 1)..n {
            let v = g[(i, j)];
            g[(j, i)] = v;
        }
    }
    g
}

/// Random subspace of the given space: rank drawn uniformly from `0..=dim`,
/// basis orthonormalized from standard normal directions.
pub fn sample_subspace(space: &SpaceSpec, rng: &mut ChaCha8Rng) -> SubspaceBasis {
    let r = rng.random_range(0..=space.dim());
    sample_subspace_of_rank(space, r, rng)
}

/// Random subspace of a fixed rank (normal directions are independent with
/// probability one, so the requested rank is achieved).
pub fn sample_subspace_of_rank(
    space: &SpaceSpec,
    rank: usize,
    rng: &mut ChaCha8Rng,
) -> SubspaceBasis {
    if rank == 0 {
        return SubspaceBasis::zero(space.clone());
    }
    let vectors: Vec<Array1<f64>> = (0..rank).map(|_| random_vector(space.dim(), rng)).collect();
    orthonormalize(&vectors, space, DEFLATION_TOL).expect("random directions orthonormalize")
}

/// Random member of a subspace: basis times standard normal coefficients.
pub fn sample_in_subspace(a: &SubspaceBasis, rng: &mut ChaCha8Rng) -> Array1<f64> {
    if a.is_zero() {
        return Array1::zeros(a.space().dim());
    }
    let coeffs = random_vector(a.rank(), rng);
    a.basis().dot(&coeffs)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::hilbert::MEMBERSHIP_TOL;
    use crate::solvers;
    use rand::SeedableRng;

    #[test]
    fn random_spd_factorizes_without_jitter() {
        let mut rng = ChaCha8Rng::seed_from_u64(7);
        for _ in 0..5 {
            let g = random_spd(4, &mut rng);
            let fac = solvers::spd_cholesky_with_jitter(&g).unwrap();
            assert!(!fac.jitter_applied);
        }
    }

    #[test]
    fn sampled_subspace_members_project_to_themselves() {
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        let space = SpaceSpec::vector_with_gram(random_spd(5, &mut rng)).unwrap();
        for _ in 0..10 {
            let a = sample_subspace(&space, &mut rng);
            let v = sample_in_subspace(&a, &mut rng);
            assert!(a.member_residual(&v).unwrap() <= MEMBERSHIP_TOL);
        }
    }

    #[test]
    fn same_seed_reproduces_the_same_subspace() {
        let space = SpaceSpec::euclidean(4);
        let mut r1 = ChaCha8Rng::seed_from_u64(99);
        let mut r2 = ChaCha8Rng::seed_from_u64(99);
        let a = sample_subspace(&space, &mut r1);
        let b = sample_subspace(&space, &mut r2);
        assert_eq!(a.rank(), b.rank());
        assert!(a.projector_distance(&b).unwrap() == 0.0);
    }

    #[test]
    fn fixed_rank_sampling_hits_the_requested_rank() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let space = SpaceSpec::euclidean(6);
        for r in 0..=6 {
            let a = sample_subspace_of_rank(&space, r, &mut rng);
            assert_eq!(a.rank(), r);
        }
    }
}
