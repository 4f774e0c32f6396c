//! Subspace-valued maps: a catalog of maps sending subspaces to sets, with
//! symbolic set images and randomized property checkers.
//!
//! Images are represented exactly as a subspace, a finite union of
//! subspaces, or a symmetric double cone in the plane, so membership and
//! orthogonal complements are analytic and counterexamples are trustworthy.
//! A map defined on single vectors extends to subspaces by summing the
//! images of all members; the catalog maps are defined directly on
//! subspaces.

use crate::hilbert::{
    orth_complement, orthonormalize, subspace_contains, subspace_sum, HilbertError, SpaceSpec,
    SubspaceBasis, DEFLATION_TOL, MEMBERSHIP_TOL,
};
use crate::operators::{joint_null_complement, OperatorError, OperatorRep};
use crate::report::{Verdict, Witness};
use crate::sampling;
use crate::solvers;
use ndarray::{Array1, Array2};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};
use thiserror::Error;

/// Tolerance for deciding that a coordinate axis is touched by a subspace.
pub const COEFF_TOL: f64 = 1e-9;

/// Norm bound below which an operator image counts as annihilated.
pub const NULL_TOL: f64 = 1e-8;

#[derive(Debug, Error)]
pub enum MapError {
    #[error(transparent)]
    Hilbert(#[from] HilbertError),
    #[error(transparent)]
    Operator(#[from] OperatorError),
    #[error("subspace lives in a different space than the map")]
    SpaceMismatch,
    #[error("rotation maps require an angle in (0, pi), got {got}")]
    BadAngle { got: f64 },
    #[error("operator family members must be endomorphisms of the map's space")]
    FamilyMismatch,
    #[error("the image of a cone through a general operator is not representable exactly")]
    UnsupportedPullback,
}

/// The three structural attributes a catalog map carries by construction.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct DeclaredAttrs {
    pub inclusive: bool,
    pub closed: bool,
    pub super_additive: bool,
}

#[derive(Debug, Clone)]
pub enum MapKind {
    /// `A -> A`: the span of all scalar multiples of members.
    SpanR,
    /// `A -> R_theta A`: every member rotated clockwise by `theta`.
    Rotate { theta: f64 },
    /// `A -> {r R_phi a : |phi| < theta}`: the open double cone around `A`.
    RotateConeOpen { half_angle: f64 },
    /// Same with `|phi| <= theta`: the closed double cone.
    RotateConeClosed { half_angle: f64 },
    /// `A -> A  union  R_{pi/2} A`.
    RotateUnionHalfPi,
    /// `A -> span{L a : L in family, a in A}`.
    OperatorFamily { ops: Vec<OperatorRep> },
    /// Union of the axis lines not orthogonal to `A`.
    NullProj { axes: Vec<Array1<f64>> },
    /// Span of the axis lines not orthogonal to `A`.
    Proj { axes: Vec<Array1<f64>> },
    /// `A -> L* S(L A)`: the inner map viewed through an operator.
    Pullback {
        op: Box<OperatorRep>,
        inner: Box<SubspaceMapSpec>,
    },
}

/// A subspace-valued map: a kind, the space its arguments live in, and the
/// attributes it is declared to have.
#[derive(Debug, Clone)]
pub struct SubspaceMapSpec {
    kind: MapKind,
    space: SpaceSpec,
    declared: DeclaredAttrs,
}

fn check_angle(theta: f64) -> Result<f64, MapError> {
    if theta > 0.0 && theta < std::f64::consts::PI {
        Ok(theta)
    } else {
        Err(MapError::BadAngle { got: theta })
    }
}

fn validate_axes(space: &SpaceSpec, axes: &[Array1<f64>]) -> Result<(), MapError> {
    let mut m = Array2::<f64>::zeros((space.dim(), axes.len()));
    for (j, a) in axes.iter().enumerate() {
        space.check_vector(a)?;
        m.column_mut(j).assign(a);
    }
    SubspaceBasis::new(space.clone(), m)?;
    Ok(())
}

fn standard_axes(space: &SpaceSpec) -> Vec<Array1<f64>> {
    (0..space.dim())
        .map(|i| space.standard_basis_vector(i))
        .collect()
}

impl SubspaceMapSpec {
    pub fn span_r(space: SpaceSpec) -> SubspaceMapSpec {
        SubspaceMapSpec {
            kind: MapKind::SpanR,
            space,
            declared: DeclaredAttrs {
                inclusive: true,
                closed: true,
                super_additive: true,
            },
        }
    }

    pub fn rotate(theta: f64) -> Result<SubspaceMapSpec, MapError> {
        Ok(SubspaceMapSpec {
            kind: MapKind::Rotate {
                theta: check_angle(theta)?,
            },
            space: SpaceSpec::euclidean(2),
            declared: DeclaredAttrs {
                inclusive: false,
                closed: true,
                super_additive: true,
            },
        })
    }

    pub fn rotate_cone_open(half_angle: f64) -> Result<SubspaceMapSpec, MapError> {
        Ok(SubspaceMapSpec {
            kind: MapKind::RotateConeOpen {
                half_angle: check_angle(half_angle)?,
            },
            space: SpaceSpec::euclidean(2),
            declared: DeclaredAttrs {
                inclusive: true,
                closed: false,
                super_additive: true,
            },
        })
    }

    pub fn rotate_cone_closed(half_angle: f64) -> Result<SubspaceMapSpec, MapError> {
        Ok(SubspaceMapSpec {
            kind: MapKind::RotateConeClosed {
                half_angle: check_angle(half_angle)?,
            },
            space: SpaceSpec::euclidean(2),
            declared: DeclaredAttrs {
                inclusive: true,
                closed: true,
                super_additive: true,
            },
        })
    }

    pub fn rotate_union_half_pi() -> SubspaceMapSpec {
        SubspaceMapSpec {
            kind: MapKind::RotateUnionHalfPi,
            space: SpaceSpec::euclidean(2),
            declared: DeclaredAttrs {
                inclusive: true,
                closed: true,
                super_additive: false,
            },
        }
    }

    /// The family image map. The declared attributes assume the generating
    /// set spans a family containing the identity operator.
    pub fn operator_family(
        space: SpaceSpec,
        ops: Vec<OperatorRep>,
    ) -> Result<SubspaceMapSpec, MapError> {
        for op in &ops {
            if op.domain() != &space || op.codomain() != &space {
                return Err(MapError::FamilyMismatch);
            }
        }
        Ok(SubspaceMapSpec {
            kind: MapKind::OperatorFamily { ops },
            space,
            declared: DeclaredAttrs {
                inclusive: true,
                closed: true,
                super_additive: true,
            },
        })
    }

    pub fn null_proj(space: SpaceSpec) -> Result<SubspaceMapSpec, MapError> {
        let axes = standard_axes(&space);
        Self::null_proj_with_axes(space, axes)
    }

    pub fn null_proj_with_axes(
        space: SpaceSpec,
        axes: Vec<Array1<f64>>,
    ) -> Result<SubspaceMapSpec, MapError> {
        validate_axes(&space, &axes)?;
        Ok(SubspaceMapSpec {
            kind: MapKind::NullProj { axes },
            space,
            declared: DeclaredAttrs {
                inclusive: false,
                closed: true,
                super_additive: false,
            },
        })
    }

    pub fn proj(space: SpaceSpec) -> Result<SubspaceMapSpec, MapError> {
        let axes = standard_axes(&space);
        Self::proj_with_axes(space, axes)
    }

    pub fn proj_with_axes(
        space: SpaceSpec,
        axes: Vec<Array1<f64>>,
    ) -> Result<SubspaceMapSpec, MapError> {
        validate_axes(&space, &axes)?;
        Ok(SubspaceMapSpec {
            kind: MapKind::Proj { axes },
            space,
            declared: DeclaredAttrs {
                inclusive: true,
                closed: true,
                super_additive: true,
            },
        })
    }

    /// The inner map viewed through `op`: arguments are pushed forward, the
    /// inner image is pulled back through the adjoint. Inclusivity is only
    /// declared when `op` is unitary; closedness and super-additivity are
    /// inherited.
    pub fn pullback(op: OperatorRep, inner: SubspaceMapSpec) -> Result<SubspaceMapSpec, MapError> {
        if inner.space() != op.codomain() {
            return Err(MapError::SpaceMismatch);
        }
        let unitary = operator_is_unitary(&op)?;
        let declared = DeclaredAttrs {
            inclusive: unitary && inner.declared.inclusive,
            closed: inner.declared.closed,
            super_additive: inner.declared.super_additive,
        };
        let space = op.domain().clone();
        Ok(SubspaceMapSpec {
            kind: MapKind::Pullback {
                op: Box::new(op),
                inner: Box::new(inner),
            },
            space,
            declared,
        })
    }

    pub fn kind(&self) -> &MapKind {
        &self.kind
    }

    pub fn space(&self) -> &SpaceSpec {
        &self.space
    }

    pub fn declared_attrs(&self) -> DeclaredAttrs {
        self.declared
    }

    pub fn kind_name(&self) -> &'static str {
        match &self.kind {
            MapKind::SpanR => "span_r",
            MapKind::Rotate { .. } => "rotate",
            MapKind::RotateConeOpen { .. } => "rotate_cone_open",
            MapKind::RotateConeClosed { .. } => "rotate_cone_closed",
            MapKind::RotateUnionHalfPi => "rotate_union_half_pi",
            MapKind::OperatorFamily { .. } => "operator_family",
            MapKind::NullProj { .. } => "null_proj",
            MapKind::Proj { .. } => "proj",
            MapKind::Pullback { .. } => "pullback",
        }
    }
}

fn operator_is_unitary(op: &OperatorRep) -> Result<bool, MapError> {
    if op.domain().dim() != op.codomain().dim() {
        return Ok(false);
    }
    let adj = op.adjoint()?;
    let n = op.domain().dim();
    let ata = adj.matrix().dot(op.matrix());
    let aat = op.matrix().dot(adj.matrix());
    let eye = Array2::<f64>::eye(n);
    Ok(solvers::frobenius_norm(&(&ata - &eye)) <= 1e-9
        && solvers::frobenius_norm(&(&aat - &eye)) <= 1e-9)
}

/// Clockwise rotation by `theta` in the plane.
pub fn rotation_matrix(theta: f64) -> Array2<f64> {
    let (s, c) = theta.sin_cos();
    ndarray::array![[c, s], [-s, c]]
}

/// A symbolic image set: exactly one of a subspace, a deduplicated finite
/// union of subspaces, or a symmetric double cone around a line in the
/// plane.
#[derive(Debug, Clone)]
pub enum SetRep {
    Subspace(SubspaceBasis),
    Union(Vec<SubspaceBasis>),
    Cone {
        space: SpaceSpec,
        center: Array1<f64>,
        half_angle: f64,
        closed: bool,
    },
}

impl SetRep {
    pub fn space(&self) -> &SpaceSpec {
        match self {
            SetRep::Subspace(b) => b.space(),
            SetRep::Union(branches) => branches[0].space(),
            SetRep::Cone { space, .. } => space,
        }
    }
}

/// Collapses a list of branches into the canonical set: branches contained
/// in another branch are dropped, singletons become plain subspaces.
fn canonical_from_branches(space: &SpaceSpec, branches: Vec<SubspaceBasis>) -> SetRep {
    let mut kept: Vec<SubspaceBasis> = Vec::new();
    for b in branches {
        if kept
            .iter()
            .any(|k| subspace_contains(k, &b, MEMBERSHIP_TOL).unwrap_or(false))
        {
            continue;
        }
        kept.retain(|k| !subspace_contains(&b, k, MEMBERSHIP_TOL).unwrap_or(false));
        kept.push(b);
    }
    match kept.len() {
        0 => SetRep::Subspace(SubspaceBasis::zero(space.clone())),
        1 => SetRep::Subspace(kept.into_iter().next().unwrap()),
        _ => SetRep::Union(kept),
    }
}

fn touched_axes(axes: &[Array1<f64>], a: &SubspaceBasis) -> Result<Vec<usize>, MapError> {
    let mut touched = Vec::new();
    for (i, e) in axes.iter().enumerate() {
        let coeffs = a.coefficients(e)?;
        if solvers::euclidean_norm(&coeffs) > COEFF_TOL {
            touched.push(i);
        }
    }
    Ok(touched)
}

fn cone_image(space: &SpaceSpec, a: &SubspaceBasis, half_angle: f64, closed: bool) -> SetRep {
    if a.is_zero() {
        return SetRep::Subspace(SubspaceBasis::zero(space.clone()));
    }
    if a.rank() >= 2 {
        return SetRep::Subspace(SubspaceBasis::full(space.clone()));
    }
    // Every line sits within pi/2 of the center line, so wide cones fill the
    // plane.
    let fills_plane = if closed {
        half_angle >= std::f64::consts::FRAC_PI_2
    } else {
        half_angle > std::f64::consts::FRAC_PI_2
    };
    if fills_plane {
        return SetRep::Subspace(SubspaceBasis::full(space.clone()));
    }
    SetRep::Cone {
        space: space.clone(),
        center: a.basis().column(0).to_owned(),
        half_angle,
        closed,
    }
}

/// Applies a catalog map to a subspace, producing its symbolic image.
pub fn apply_map(s: &SubspaceMapSpec, a: &SubspaceBasis) -> Result<SetRep, MapError> {
    if a.space() != s.space() {
        return Err(MapError::SpaceMismatch);
    }
    let space = s.space();
    match &s.kind {
        MapKind::SpanR => Ok(SetRep::Subspace(a.clone())),
        MapKind::Rotate { theta } => {
            let r = rotation_matrix(*theta);
            Ok(SetRep::Subspace(crate::hilbert::map_subspace(
                &r, a, space,
            )?))
        }
        MapKind::RotateConeOpen { half_angle } => Ok(cone_image(space, a, *half_angle, false)),
        MapKind::RotateConeClosed { half_angle } => Ok(cone_image(space, a, *half_angle, true)),
        MapKind::RotateUnionHalfPi => {
            let r = rotation_matrix(std::f64::consts::FRAC_PI_2);
            let rotated = crate::hilbert::map_subspace(&r, a, space)?;
            Ok(canonical_from_branches(space, vec![a.clone(), rotated]))
        }
        MapKind::OperatorFamily { ops } => {
            if a.is_zero() {
                return Ok(SetRep::Subspace(SubspaceBasis::zero(space.clone())));
            }
            let mut cols: Vec<Array1<f64>> = Vec::new();
            for op in ops {
                let image = op.matrix().dot(a.basis());
                for j in 0..image.ncols() {
                    cols.push(image.column(j).to_owned());
                }
            }
            Ok(SetRep::Subspace(orthonormalize(
                &cols,
                space,
                DEFLATION_TOL,
            )?))
        }
        MapKind::NullProj { axes } => {
            let touched = touched_axes(axes, a)?;
            let branches: Vec<SubspaceBasis> = touched
                .iter()
                .map(|&i| {
                    orthonormalize(std::slice::from_ref(&axes[i]), space, DEFLATION_TOL)
                        .expect("axis spans a line")
                })
                .collect();
            Ok(canonical_from_branches(space, branches))
        }
        MapKind::Proj { axes } => {
            let touched = touched_axes(axes, a)?;
            let cols: Vec<Array1<f64>> = touched.iter().map(|&i| axes[i].clone()).collect();
            if cols.is_empty() {
                return Ok(SetRep::Subspace(SubspaceBasis::zero(space.clone())));
            }
            Ok(SetRep::Subspace(orthonormalize(
                &cols,
                space,
                DEFLATION_TOL,
            )?))
        }
        MapKind::Pullback { op, inner } => {
            let la = crate::hilbert::map_subspace(op.matrix(), a, op.codomain())?;
            let inner_image = apply_map(inner, &la)?;
            let adj = op.adjoint()?;
            match inner_image {
                SetRep::Subspace(b) => Ok(SetRep::Subspace(crate::hilbert::map_subspace(
                    adj.matrix(),
                    &b,
                    space,
                )?)),
                SetRep::Union(branches) => {
                    let mapped: Result<Vec<SubspaceBasis>, MapError> = branches
                        .iter()
                        .map(|b| {
                            crate::hilbert::map_subspace(adj.matrix(), b, space)
                                .map_err(MapError::from)
                        })
                        .collect();
                    Ok(canonical_from_branches(space, mapped?))
                }
                SetRep::Cone { .. } => Err(MapError::UnsupportedPullback),
            }
        }
    }
}

/// Smallest subspace containing the set.
pub fn span_of_set(rep: &SetRep) -> Result<SubspaceBasis, MapError> {
    match rep {
        SetRep::Subspace(b) => Ok(b.clone()),
        SetRep::Union(branches) => {
            let mut acc = branches[0].clone();
            for b in &branches[1..] {
                acc = subspace_sum(&acc, b)?;
            }
            Ok(acc)
        }
        SetRep::Cone { space, .. } => Ok(SubspaceBasis::full(space.clone())),
    }
}

/// Vectors orthogonal to every member of the set: the complement of its
/// span.
pub fn set_orth_complement(rep: &SetRep) -> Result<SubspaceBasis, MapError> {
    Ok(orth_complement(&span_of_set(rep)?)?)
}

fn line_angle(space: &SpaceSpec, u: &Array1<f64>, v: &Array1<f64>) -> f64 {
    let nu = space.norm(u).expect("validated");
    let nv = space.norm(v).expect("validated");
    let ip = space.inner(u, v).expect("validated");
    let c = (ip.abs() / (nu * nv)).clamp(0.0, 1.0);
    c.acos()
}

/// Exact membership test with tolerance.
pub fn set_membership(rep: &SetRep, v: &Array1<f64>, tol: f64) -> Result<bool, MapError> {
    match rep {
        SetRep::Subspace(b) => Ok(b.member_residual(v)? <= tol),
        SetRep::Union(branches) => {
            for b in branches {
                if b.member_residual(v)? <= tol {
                    return Ok(true);
                }
            }
            Ok(false)
        }
        SetRep::Cone {
            space,
            center,
            half_angle,
            closed,
        } => {
            space.check_vector(v)?;
            if space.norm(v)? <= tol {
                return Ok(true);
            }
            let angle = line_angle(space, v, center);
            Ok(if *closed {
                angle <= half_angle + tol
            } else {
                angle < half_angle - tol
            })
        }
    }
}

/// Distance-like residual of `v` against the set: zero exactly when `v` is a
/// member. Unions take the closest branch; cones use the chord to the
/// nearest boundary ray.
pub fn set_member_residual(rep: &SetRep, v: &Array1<f64>) -> Result<f64, MapError> {
    match rep {
        SetRep::Subspace(b) => Ok(b.member_residual(v)?),
        SetRep::Union(branches) => {
            let mut best = f64::INFINITY;
            for b in branches {
                best = best.min(b.member_residual(v)?);
            }
            Ok(best)
        }
        SetRep::Cone {
            space,
            center,
            half_angle,
            ..
        } => {
            space.check_vector(v)?;
            let norm = space.norm(v)?;
            if norm <= 1e-12 {
                return Ok(0.0);
            }
            let excess = (line_angle(space, v, center) - half_angle).max(0.0);
            Ok(norm * excess.sin())
        }
    }
}

/// Distinguished members generating the set: basis columns for subspaces and
/// union branches; for cones the center ray and the two extreme rays (pulled
/// strictly inside when the cone is open).
pub fn set_generators(rep: &SetRep) -> Vec<Array1<f64>> {
    match rep {
        SetRep::Subspace(b) => (0..b.rank())
            .map(|j| b.basis().column(j).to_owned())
            .collect(),
        SetRep::Union(branches) => branches
            .iter()
            .flat_map(|b| (0..b.rank()).map(|j| b.basis().column(j).to_owned()))
            .collect(),
        SetRep::Cone {
            center,
            half_angle,
            closed,
            ..
        } => {
            let extreme = if *closed {
                *half_angle
            } else {
                half_angle / 2.0
            };
            vec![
                center.clone(),
                rotation_matrix(extreme).dot(center),
                rotation_matrix(-extreme).dot(center),
            ]
        }
    }
}

/// Random member of the set. Cone members are drawn from the polar lobe
/// around the stored center ray: angle uniform within the aperture,
/// nonnegative radius.
pub fn sample_set_member(rep: &SetRep, rng: &mut ChaCha8Rng) -> Array1<f64> {
    match rep {
        SetRep::Subspace(b) => sampling::sample_in_subspace(b, rng),
        SetRep::Union(branches) => {
            let pick = rng.random_range(0..branches.len());
            sampling::sample_in_subspace(&branches[pick], rng)
        }
        SetRep::Cone {
            center, half_angle, ..
        } => {
            let phi = (2.0 * rng.random::<f64>() - 1.0) * half_angle;
            let r: f64 = StandardNormal.sample(rng);
            r.abs() * rotation_matrix(phi).dot(center)
        }
    }
}

fn unit_or_none(space: &SpaceSpec, v: &Array1<f64>) -> Option<Array1<f64>> {
    let n = space.norm(v).ok()?;
    if n <= 1e-12 {
        None
    } else {
        Some(v / n)
    }
}

/// Span of the pulled-back image `L* S(L A)` without materializing the set;
/// well-defined for every inner image kind including cones.
pub fn pullback_image_span(
    op: &OperatorRep,
    inner: &SubspaceMapSpec,
    a: &SubspaceBasis,
) -> Result<SubspaceBasis, MapError> {
    let la = crate::hilbert::map_subspace(op.matrix(), a, op.codomain())?;
    let inner_image = apply_map(inner, &la)?;
    let span = span_of_set(&inner_image)?;
    let adj = op.adjoint()?;
    Ok(crate::hilbert::map_subspace(
        adj.matrix(),
        &span,
        op.domain(),
    )?)
}

fn basis_columns(b: &SubspaceBasis) -> Vec<Array1<f64>> {
    (0..b.rank())
        .map(|j| b.basis().column(j).to_owned())
        .collect()
}

/// Checks `A` is contained in its own image on fixed degenerate subspaces
/// (zero, full) and random ones.
pub fn check_inclusive(s: &SubspaceMapSpec, trials: usize, seed: u64) -> Verdict {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let space = s.space();
    for trial in 0..trials.max(2) {
        let a = match trial {
            0 => SubspaceBasis::zero(space.clone()),
            1 => SubspaceBasis::full(space.clone()),
            _ => sampling::sample_subspace(space, &mut rng),
        };
        let image = match apply_map(s, &a) {
            Ok(rep) => rep,
            Err(e) => return Verdict::not_applicable(e.to_string(), seed),
        };
        let mut probes = basis_columns(&a);
        probes.push(sampling::sample_in_subspace(&a, &mut rng));
        for v in probes {
            let Some(u) = unit_or_none(space, &v) else {
                continue;
            };
            match set_membership(&image, &u, MEMBERSHIP_TOL) {
                Ok(true) => {}
                Ok(false) => {
                    let w = Witness::new("subspace member escapes its own image")
                        .with_vector("member", u.iter().copied())
                        .with_scalar("trial", trial as f64);
                    return Verdict::counterexample(w, trial + 1, seed);
                }
                Err(e) => return Verdict::not_applicable(e.to_string(), seed),
            }
        }
    }
    Verdict::pass(trials.max(2), seed)
}

/// Checks `S(A) + S(B) <= S(A + B)` via generator pairs and random member
/// pairs. The schedule forces the degenerate pairs (zero, zero) and
/// (full, full) first and revisits equal pairs `B = A` every third trial.
pub fn check_super_additive(s: &SubspaceMapSpec, trials: usize, seed: u64) -> Verdict {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let space = s.space();
    for trial in 0..trials.max(2) {
        let (a, b) = match trial {
            0 => (
                SubspaceBasis::zero(space.clone()),
                SubspaceBasis::zero(space.clone()),
            ),
            1 => (
                SubspaceBasis::full(space.clone()),
                SubspaceBasis::full(space.clone()),
            ),
            _ => {
                let a = sampling::sample_subspace(space, &mut rng);
                let b = if trial % 3 == 2 {
                    a.clone()
                } else {
                    sampling::sample_subspace(space, &mut rng)
                };
                (a, b)
            }
        };
        let sum = match subspace_sum(&a, &b) {
            Ok(sum) => sum,
            Err(e) => return Verdict::not_applicable(e.to_string(), seed),
        };
        let images = (|| -> Result<(SetRep, SetRep, SetRep), MapError> {
            Ok((apply_map(s, &a)?, apply_map(s, &b)?, apply_map(s, &sum)?))
        })();
        let (image_a, image_b, image_sum) = match images {
            Ok(t) => t,
            Err(e) => return Verdict::not_applicable(e.to_string(), seed),
        };
        let mut pairs: Vec<(Array1<f64>, Array1<f64>)> = Vec::new();
        for ga in set_generators(&image_a) {
            for gb in set_generators(&image_b) {
                pairs.push((ga.clone(), gb.clone()));
            }
        }
        for _ in 0..3 {
            pairs.push((
                sample_set_member(&image_a, &mut rng),
                sample_set_member(&image_b, &mut rng),
            ));
        }
        for (va, vb) in pairs {
            let vsum = &va + &vb;
            match set_membership(&image_sum, &vsum, MEMBERSHIP_TOL) {
                Ok(true) => {}
                Ok(false) => {
                    let w = Witness::new("sum of image members escapes the image of the sum")
                        .with_vector("a", va.iter().copied())
                        .with_vector("b", vb.iter().copied())
                        .with_vector("a_plus_b", vsum.iter().copied())
                        .with_scalar("trial", trial as f64);
                    return Verdict::counterexample(w, trial + 1, seed);
                }
                Err(e) => return Verdict::not_applicable(e.to_string(), seed),
            }
        }
    }
    Verdict::pass(trials.max(2), seed)
}

/// Closedness is decided analytically per kind: every catalog image is a
/// finite union of closed sets except the open cone, whose boundary rays are
/// limits of members but not members.
pub fn check_closed(s: &SubspaceMapSpec) -> Verdict {
    match &s.kind {
        MapKind::RotateConeOpen { half_angle } => {
            let boundary = rotation_matrix(*half_angle).dot(&ndarray::array![1.0, 0.0]);
            let w = Witness::new("boundary ray is a limit of image members but is not a member")
                .with_vector("boundary_ray", boundary.iter().copied())
                .with_scalar("half_angle", *half_angle);
            Verdict::counterexample(w, 0, 0)
        }
        MapKind::Pullback { inner, .. } => {
            let inner_verdict = check_closed(inner);
            if inner_verdict.passed() {
                Verdict::pass(0, 0)
                    .with_note("finite-dimensional linear images of closed sets are closed")
            } else {
                Verdict::not_applicable(
                    "closedness of the mapped image depends on the operator; the inner map is not closed",
                    0,
                )
            }
        }
        _ => Verdict::pass(0, 0),
    }
}

/// Checks the image of the joint null complement of `ops` leaves the
/// complement of its span inside the joint null space: `|L_i g| <= 1e-8`
/// for every complement basis vector `g` and every operator.
pub fn check_null_space_preserving(s: &SubspaceMapSpec, ops: &[OperatorRep], seed: u64) -> Verdict {
    let a = match joint_null_complement(ops) {
        Ok(a) => a,
        Err(e) => return Verdict::not_applicable(e.to_string(), seed),
    };
    if a.space() != s.space() {
        return Verdict::not_applicable("operators act on a different space than the map", seed);
    }
    let image = match apply_map(s, &a) {
        Ok(rep) => rep,
        Err(e) => return Verdict::not_applicable(e.to_string(), seed),
    };
    let comp = match set_orth_complement(&image) {
        Ok(c) => c,
        Err(e) => return Verdict::not_applicable(e.to_string(), seed),
    };
    for j in 0..comp.rank() {
        let g = comp.basis().column(j).to_owned();
        for (i, op) in ops.iter().enumerate() {
            let img = match op.apply(&g) {
                Ok(v) => v,
                Err(e) => return Verdict::not_applicable(e.to_string(), seed),
            };
            let norm = op.codomain().norm(&img).unwrap_or(f64::INFINITY);
            if norm > NULL_TOL {
                let w = Witness::new(
                    "complement direction of the image is not annihilated by the operators",
                )
                .with_vector("complement_vector", g.iter().copied())
                .with_scalar("operator_index", i as f64)
                .with_scalar("image_norm", norm);
                return Verdict::counterexample(w, 1, seed);
            }
        }
    }
    Verdict::pass(1, seed)
}

/// Checks image sets behave like vector spaces under combination probes:
/// sums of generator pairs and nonnegative random combinations of sampled
/// members must remain members. Union images are refuted by cross-branch
/// generator sums; cone members are sampled in the primary lobe, which the
/// tested combinations cannot leave.
pub fn check_vector_space_image(s: &SubspaceMapSpec, trials: usize, seed: u64) -> Verdict {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let space = s.space();
    for trial in 0..trials.max(2) {
        let a = match trial {
            0 => SubspaceBasis::zero(space.clone()),
            1 => SubspaceBasis::full(space.clone()),
            _ => sampling::sample_subspace(space, &mut rng),
        };
        let image = match apply_map(s, &a) {
            Ok(rep) => rep,
            Err(e) => return Verdict::not_applicable(e.to_string(), seed),
        };
        let gens = set_generators(&image);
        let mut probes: Vec<(Array1<f64>, Array1<f64>, f64, f64)> = Vec::new();
        for ga in &gens {
            for gb in &gens {
                probes.push((ga.clone(), gb.clone(), 1.0, 1.0));
            }
        }
        for _ in 0..3 {
            let va = sample_set_member(&image, &mut rng);
            let vb = sample_set_member(&image, &mut rng);
            let c1: f64 = StandardNormal.sample(&mut rng);
            let c2: f64 = StandardNormal.sample(&mut rng);
            probes.push((va, vb, c1.abs(), c2.abs()));
        }
        for (va, vb, c1, c2) in probes {
            let combo = c1 * &va + c2 * &vb;
            match set_membership(&image, &combo, MEMBERSHIP_TOL) {
                Ok(true) => {}
                Ok(false) => {
                    let w = Witness::new("combination of image members escapes the image")
                        .with_vector("a", va.iter().copied())
                        .with_vector("b", vb.iter().copied())
                        .with_vector("combination", combo.iter().copied())
                        .with_scalar("c1", c1)
                        .with_scalar("c2", c2)
                        .with_scalar("trial", trial as f64);
                    return Verdict::counterexample(w, trial + 1, seed);
                }
                Err(e) => return Verdict::not_applicable(e.to_string(), seed),
            }
        }
    }
    Verdict::pass(trials.max(2), seed)
}

/// Checks the image of every sampled line has dimension at most `r`.
pub fn check_r_regular(s: &SubspaceMapSpec, r: usize, samples: usize, seed: u64) -> Verdict {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let space = s.space();
    for trial in 0..samples.max(1) {
        let v = if trial == 0 {
            Array1::from_elem(space.dim(), 1.0)
        } else {
            sampling::random_vector(space.dim(), &mut rng)
        };
        let a = match orthonormalize(std::slice::from_ref(&v), space, DEFLATION_TOL) {
            Ok(a) => a,
            Err(e) => return Verdict::not_applicable(e.to_string(), seed),
        };
        let image = match apply_map(s, &a) {
            Ok(rep) => rep,
            Err(e) => return Verdict::not_applicable(e.to_string(), seed),
        };
        let span = match span_of_set(&image) {
            Ok(b) => b,
            Err(e) => return Verdict::not_applicable(e.to_string(), seed),
        };
        if span.rank() > r {
            let w = Witness::new("image of a single direction exceeds the dimension bound")
                .with_vector("direction", v.iter().copied())
                .with_scalar("image_dim", span.rank() as f64)
                .with_scalar("bound", r as f64);
            return Verdict::counterexample(w, trial + 1, seed);
        }
    }
    Verdict::pass(samples.max(1), seed)
}

/// For a pulled-back map, checks the two containments that make the carrier
/// operator compatible with orthogonal splitting: members of the image push
/// forward into the inner image, and complement directions push forward into
/// the inner image's complement.
pub fn check_orthogonality_preservation(
    s_l: &SubspaceMapSpec,
    trials: usize,
    seed: u64,
) -> Verdict {
    let MapKind::Pullback { op, inner } = &s_l.kind else {
        return Verdict::not_applicable(
            "orthogonality preservation applies to pulled-back maps",
            seed,
        );
    };
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let space = s_l.space();
    for trial in 0..trials.max(2) {
        let a = match trial {
            0 => SubspaceBasis::zero(space.clone()),
            1 => SubspaceBasis::full(space.clone()),
            _ => sampling::sample_subspace(space, &mut rng),
        };
        let la = match crate::hilbert::map_subspace(op.matrix(), &a, op.codomain()) {
            Ok(la) => la,
            Err(e) => return Verdict::not_applicable(e.to_string(), seed),
        };
        let target = match apply_map(inner, &la) {
            Ok(rep) => rep,
            Err(e) => return Verdict::not_applicable(e.to_string(), seed),
        };
        // Containment 1: members of the pulled-back image push forward into
        // the inner image.
        let image = match apply_map(s_l, &a) {
            Ok(rep) => rep,
            Err(MapError::UnsupportedPullback) => {
                return Verdict::not_applicable(
                    "pulled-back image is not representable exactly for this inner map",
                    seed,
                )
            }
            Err(e) => return Verdict::not_applicable(e.to_string(), seed),
        };
        let mut members = set_generators(&image);
        for _ in 0..3 {
            members.push(sample_set_member(&image, &mut rng));
        }
        for v in members {
            let Some(u) = unit_or_none(space, &v) else {
                continue;
            };
            let pushed = match op.apply(&u) {
                Ok(p) => p,
                Err(e) => return Verdict::not_applicable(e.to_string(), seed),
            };
            match set_membership(&target, &pushed, MEMBERSHIP_TOL) {
                Ok(true) => {}
                Ok(false) => {
                    let w = Witness::new("image member pushes forward outside the inner image")
                        .with_vector("member", u.iter().copied())
                        .with_vector("pushed", pushed.iter().copied())
                        .with_scalar("trial", trial as f64);
                    return Verdict::counterexample(w, trial + 1, seed);
                }
                Err(e) => return Verdict::not_applicable(e.to_string(), seed),
            }
        }
        // Containment 2: complement directions push forward orthogonally to
        // the inner image.
        let span = match pullback_image_span(op, inner, &a) {
            Ok(b) => b,
            Err(e) => return Verdict::not_applicable(e.to_string(), seed),
        };
        let comp = match orth_complement(&span) {
            Ok(c) => c,
            Err(e) => return Verdict::not_applicable(e.to_string(), seed),
        };
        let target_comp = match set_orth_complement(&target) {
            Ok(c) => c,
            Err(e) => return Verdict::not_applicable(e.to_string(), seed),
        };
        for j in 0..comp.rank() {
            let g = comp.basis().column(j).to_owned();
            let pushed = match op.apply(&g) {
                Ok(p) => p,
                Err(e) => return Verdict::not_applicable(e.to_string(), seed),
            };
            let candidate = match unit_or_none(op.codomain(), &pushed) {
                Some(u) => u,
                None => continue,
            };
            let resid = match target_comp.member_residual(&candidate) {
                Ok(r) => r,
                Err(e) => return Verdict::not_applicable(e.to_string(), seed),
            };
            if resid > MEMBERSHIP_TOL {
                let w = Witness::new(
                    "complement direction pushes forward with a component inside the inner image",
                )
                .with_vector("complement_vector", g.iter().copied())
                .with_vector("pushed", pushed.iter().copied())
                .with_scalar("residual", resid)
                .with_scalar("trial", trial as f64);
                return Verdict::counterexample(w, trial + 1, seed);
            }
        }
    }
    Verdict::pass(trials.max(2), seed)
}
