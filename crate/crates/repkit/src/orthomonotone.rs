//! Regularizer catalog and the orthomonotonicity checker.
//!
//! A functional is orthomonotone with respect to a subspace-valued map when
//! adding any vector orthogonal to the image never decreases the value below
//! the larger of the two parts. The checker samples subspaces, members of
//! their images, and complement directions; candidate violations are
//! re-verified with compensated accumulation before being reported.

use crate::hilbert::{orthonormalize, HilbertError, SpaceSpec, DEFLATION_TOL, MEMBERSHIP_TOL};
use crate::maps::{
    apply_map, check_orthogonality_preservation, sample_set_member, set_generators, set_membership,
    set_orth_complement, MapError, SubspaceMapSpec,
};
use crate::operators::{OperatorError, OperatorRep};
use crate::report::{Outcome, Verdict, Witness};
use crate::sampling;
use crate::solvers::compensated_sum;
use ndarray::Array1;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use thiserror::Error;

/// Default absolute slack for the orthomonotonicity inequality.
pub const ORTHOMONOTONE_TOL: f64 = 1e-10;

#[derive(Debug, Error)]
pub enum RegError {
    #[error(transparent)]
    Hilbert(#[from] HilbertError),
    #[error(transparent)]
    Operator(#[from] OperatorError),
    #[error(transparent)]
    Map(#[from] MapError),
    #[error("norm power must be positive, got {got}")]
    BadPower { got: f64 },
    #[error("inner regularizer must live on the operator's codomain")]
    SpaceMismatch,
}

#[derive(Debug, Clone)]
pub enum RegKind {
    /// `v -> |v|^p` in the space's gram norm.
    NormPower { p: f64 },
    /// Coordinate absolute sum in the standard basis, whatever the gram.
    L1,
    /// Squared coordinate absolute sum.
    L1Squared,
    /// `v -> inner(L v)`.
    SeminormViaOperator {
        op: Box<OperatorRep>,
        inner: Box<RegularizerSpec>,
    },
}

/// A regularizer: a catalog kind bound to the space its arguments live in.
#[derive(Debug, Clone)]
pub struct RegularizerSpec {
    kind: RegKind,
    space: SpaceSpec,
}

impl RegularizerSpec {
    pub fn norm_power(space: SpaceSpec, p: f64) -> Result<RegularizerSpec, RegError> {
        if p <= 0.0 {
            return Err(RegError::BadPower { got: p });
        }
        Ok(RegularizerSpec {
            kind: RegKind::NormPower { p },
            space,
        })
    }

    pub fn l1(space: SpaceSpec) -> RegularizerSpec {
        RegularizerSpec {
            kind: RegKind::L1,
            space,
        }
    }

    pub fn l1_squared(space: SpaceSpec) -> RegularizerSpec {
        RegularizerSpec {
            kind: RegKind::L1Squared,
            space,
        }
    }

    pub fn seminorm_via_operator(
        op: OperatorRep,
        inner: RegularizerSpec,
    ) -> Result<RegularizerSpec, RegError> {
        if inner.space() != op.codomain() {
            return Err(RegError::SpaceMismatch);
        }
        let space = op.domain().clone();
        Ok(RegularizerSpec {
            kind: RegKind::SeminormViaOperator {
                op: Box::new(op),
                inner: Box::new(inner),
            },
            space,
        })
    }

    pub fn kind(&self) -> &RegKind {
        &self.kind
    }

    pub fn space(&self) -> &SpaceSpec {
        &self.space
    }

    pub fn kind_name(&self) -> &'static str {
        match &self.kind {
            RegKind::NormPower { .. } => "norm_power",
            RegKind::L1 => "l1",
            RegKind::L1Squared => "l1_squared",
            RegKind::SeminormViaOperator { .. } => "seminorm_via_operator",
        }
    }
}

fn l1_sum(v: &Array1<f64>) -> f64 {
    v.iter().map(|x| x.abs()).sum()
}

/// Evaluates a regularizer at a vector.
pub fn evaluate(omega: &RegularizerSpec, v: &Array1<f64>) -> Result<f64, RegError> {
    omega.space.check_vector(v)?;
    match &omega.kind {
        RegKind::NormPower { p } => Ok(omega.space.norm(v)?.powf(*p)),
        RegKind::L1 => Ok(l1_sum(v)),
        RegKind::L1Squared => {
            let s = l1_sum(v);
            Ok(s * s)
        }
        RegKind::SeminormViaOperator { op, inner } => evaluate(inner, &op.apply(v)?),
    }
}

/// Same value with compensated accumulation of the inner sums; used to
/// re-verify candidate counterexamples before reporting them.
fn evaluate_compensated(omega: &RegularizerSpec, v: &Array1<f64>) -> Result<f64, RegError> {
    omega.space.check_vector(v)?;
    match &omega.kind {
        RegKind::NormPower { p } => {
            let g = omega.space.gram();
            let mut terms = Vec::with_capacity(v.len() * v.len());
            for i in 0..v.len() {
                for j in 0..v.len() {
                    terms.push(v[i] * g[(i, j)] * v[j]);
                }
            }
            let q = compensated_sum(terms.iter().copied()).max(0.0);
            Ok(q.powf(p * 0.5))
        }
        RegKind::L1 => {
            let terms: Vec<f64> = v.iter().map(|x| x.abs()).collect();
            Ok(compensated_sum(terms.iter().copied()))
        }
        RegKind::L1Squared => {
            let terms: Vec<f64> = v.iter().map(|x| x.abs()).collect();
            let s = compensated_sum(terms.iter().copied());
            Ok(s * s)
        }
        RegKind::SeminormViaOperator { op, inner } => evaluate_compensated(inner, &op.apply(v)?),
    }
}

struct Probe {
    subspace_rank: usize,
    f: Array1<f64>,
    g: Array1<f64>,
}

fn canonical_probe(s: &SubspaceMapSpec, rng: &mut ChaCha8Rng) -> Result<Probe, MapError> {
    let space = s.space();
    let n = space.dim();
    let ones = Array1::from_elem(n, 1.0);
    let a = orthonormalize(std::slice::from_ref(&ones), space, DEFLATION_TOL)?;
    let image = apply_map(s, &a)?;
    let f = if set_membership(&image, &ones, MEMBERSHIP_TOL)? {
        ones
    } else {
        set_generators(&image)
            .into_iter()
            .next()
            .unwrap_or_else(|| sample_set_member(&image, rng))
    };
    let comp = set_orth_complement(&image)?;
    let g = if comp.rank() == 0 || n < 2 {
        Array1::zeros(n)
    } else {
        let mut probe = Array1::zeros(n);
        probe[n - 1] = n as f64;
        comp.project_vector(&probe)?
    };
    Ok(Probe {
        subspace_rank: a.rank(),
        f,
        g,
    })
}

fn random_probe(s: &SubspaceMapSpec, rng: &mut ChaCha8Rng) -> Result<Probe, MapError> {
    let space = s.space();
    let a = sampling::sample_subspace(space, rng);
    let image = apply_map(s, &a)?;
    let f = sample_set_member(&image, rng);
    let comp = set_orth_complement(&image)?;
    let g = if comp.rank() == 0 {
        Array1::zeros(space.dim())
    } else {
        sampling::sample_in_subspace(&comp, rng)
    };
    Ok(Probe {
        subspace_rank: a.rank(),
        f,
        g,
    })
}

fn run_orthomonotone_check<E, R>(
    eval: E,
    refine: R,
    s: &SubspaceMapSpec,
    trials: usize,
    tol: f64,
    seed: u64,
) -> Verdict
where
    E: Fn(&Array1<f64>) -> Result<f64, RegError>,
    R: Fn(&Array1<f64>) -> Result<f64, RegError>,
{
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    for trial in 0..trials.max(1) {
        let probe = if trial == 0 {
            canonical_probe(s, &mut rng)
        } else {
            random_probe(s, &mut rng)
        };
        let probe = match probe {
            Ok(p) => p,
            Err(e) => return Verdict::not_applicable(e.to_string(), seed),
        };
        let sum = &probe.f + &probe.g;
        let values = (|| -> Result<(f64, f64, f64), RegError> {
            Ok((eval(&probe.f)?, eval(&probe.g)?, eval(&sum)?))
        })();
        let (of, og, osum) = match values {
            Ok(v) => v,
            Err(e) => return Verdict::not_applicable(e.to_string(), seed),
        };
        if osum < of.max(og) - tol {
            // Candidate violation: confirm with compensated accumulation so
            // rounding in the plain sums cannot manufacture a witness.
            let refined = (|| -> Result<(f64, f64, f64), RegError> {
                Ok((refine(&probe.f)?, refine(&probe.g)?, refine(&sum)?))
            })();
            let (rf, rg, rsum) = match refined {
                Ok(v) => v,
                Err(e) => return Verdict::not_applicable(e.to_string(), seed),
            };
            if rsum < rf.max(rg) - tol {
                let w = Witness::new("orthogonal addition drops the value below the larger part")
                    .with_vector("f", probe.f.iter().copied())
                    .with_vector("g", probe.g.iter().copied())
                    .with_vector("f_plus_g", sum.iter().copied())
                    .with_scalar("omega_f", rf)
                    .with_scalar("omega_g", rg)
                    .with_scalar("omega_f_plus_g", rsum)
                    .with_scalar("subspace_rank", probe.subspace_rank as f64);
                return Verdict::counterexample(w, trial + 1, seed);
            }
        }
    }
    Verdict::pass(trials.max(1), seed)
}

/// Checks `omega(f + g) >= max(omega(f), omega(g)) - tol` for image members
/// `f` and complement directions `g`. The first trial probes the all-ones
/// direction with a canonical complement vector; the rest are random.
pub fn check_orthomonotone(
    omega: &RegularizerSpec,
    s: &SubspaceMapSpec,
    trials: usize,
    tol: f64,
    seed: u64,
) -> Verdict {
    if omega.space() != s.space() {
        return Verdict::not_applicable("regularizer and map live on different spaces", seed);
    }
    run_orthomonotone_check(
        |v| evaluate(omega, v),
        |v| evaluate_compensated(omega, v),
        s,
        trials,
        tol,
        seed,
    )
}

/// Same check for an arbitrary functional given as a closure; used for
/// monotone wrappings of catalog regularizers.
pub fn check_orthomonotone_fn<F>(
    eval: F,
    s: &SubspaceMapSpec,
    trials: usize,
    tol: f64,
    seed: u64,
) -> Verdict
where
    F: Fn(&Array1<f64>) -> f64,
{
    run_orthomonotone_check(|v| Ok(eval(v)), |v| Ok(eval(v)), s, trials, tol, seed)
}

/// Checks orthomonotonicity of `v -> omega(L v)` with respect to the map
/// pulled back through `L`. The operator must first preserve orthogonality
/// for the pulled-back map; otherwise the verdict is not-applicable and
/// names the failing containment.
pub fn compose_check(
    omega: &RegularizerSpec,
    s: &SubspaceMapSpec,
    l: &OperatorRep,
    trials: usize,
    tol: f64,
    seed: u64,
) -> Verdict {
    if omega.space() != l.codomain() {
        return Verdict::not_applicable("regularizer must live on the operator's codomain", seed);
    }
    let s_l = match SubspaceMapSpec::pullback(l.clone(), s.clone()) {
        Ok(s_l) => s_l,
        Err(e) => return Verdict::not_applicable(e.to_string(), seed),
    };
    let ortho = check_orthogonality_preservation(&s_l, trials, seed);
    match &ortho.outcome {
        Outcome::Pass => {}
        Outcome::Counterexample { witness } => {
            return Verdict::not_applicable(
                format!("orthogonality preservation fails: {}", witness.label),
                seed,
            )
        }
        Outcome::NotApplicable { reason } => {
            return Verdict::not_applicable(
                format!("orthogonality preservation undecided: {reason}"),
                seed,
            )
        }
    }
    let composed = match RegularizerSpec::seminorm_via_operator(l.clone(), omega.clone()) {
        Ok(c) => c,
        Err(e) => return Verdict::not_applicable(e.to_string(), seed),
    };
    check_orthomonotone(&composed, &s_l, trials, tol, seed)
        .with_note("checked against the pulled-back map")
}
