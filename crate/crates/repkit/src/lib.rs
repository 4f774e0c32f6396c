//! Finite-dimensional Hilbert space toolkit built around representer reductions.
//!
//! The crate works with concrete coordinate representations throughout: a
//! Hilbert space is a dimension plus a Gram matrix, a linear operator is a
//! dense matrix between two such spaces, and every adjoint is derived from the
//! Gram matrices rather than hand-coded. On top of that sit
//!
//! * a catalog of subspace-valued maps with randomized property checkers
//!   (inclusivity, closedness, super-additivity, null-space preservation),
//! * orthomonotonicity checkers for a small regularizer catalog, and
//! * learners whose fitted functions are kernel expansions over the training
//!   inputs: ridge regression, Gaussian-process regression, squared-l1 feature
//!   selection, a hard-margin SVM, and a multiple-shooting kernel deep net.
//!
//! Randomized checkers take an explicit seed and record it in every verdict,
//! so check reports are reproducible byte for byte.

#![forbid(unsafe_code)]

pub mod datasets;
pub mod hilbert;
pub mod io;
pub mod kernels;
pub mod learners;
pub mod maps;
pub mod orthomonotone;
pub mod report;
pub mod sampling;
pub mod solvers;
pub mod suites;

pub mod operators;

/// Default seed for every randomized checker and generator in the crate.
pub const DEFAULT_SEED: u64 = 42;
