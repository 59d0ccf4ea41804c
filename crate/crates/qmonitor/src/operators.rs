//! Measurement formalism: density operators, effect (Kraus) operators, POVM
//! elements, Born probabilities, conditional state updates, and the
//! completeness audits that certify a measurement as unbiased.

use crate::linalg::{
    hermitian_deviation, hermitian_norm, identity, min_eigenvalue, sqrt_psd, trace,
};
use crate::{C64, CMat, QmError};
use rand::Rng;

pub const HERMITICITY_TOL: f64 = 1e-10;
pub const TRACE_TOL: f64 = 1e-9;
pub const EIGENVALUE_FLOOR: f64 = -1e-9;
pub const COMPLETENESS_TOL: f64 = 1e-9;
pub const PROBABILITY_FLOOR: f64 = 1e-14;

/// Unit-trace positive Hermitian operator on a finite-dimensional space.
#[derive(Debug, Clone, PartialEq)]
pub struct DensityOperator {
    mat: CMat,
}

impl DensityOperator {
    pub fn new(mat: CMat) -> Result<Self, QmError> {
        if mat.nrows() != mat.ncols() {
            return Err(QmError::DimensionMismatch(mat.nrows(), mat.ncols()));
        }
        let herm = hermitian_deviation(&mat);
        if herm > HERMITICITY_TOL {
            return Err(QmError::NotHermitian(herm));
        }
        let tr = trace(&mat);
        let drift = (tr - C64::new(1.0, 0.0)).norm();
        if drift > TRACE_TOL {
            return Err(QmError::TraceNotUnit(drift));
        }
        let min_eig = min_eigenvalue(&mat);
        if min_eig < EIGENVALUE_FLOOR {
            return Err(QmError::NotPositive(min_eig));
        }
        Ok(Self { mat })
    }

    /// Pure state |psi><psi| from an unnormalized ket.
    pub fn from_ket(ket: &nalgebra::DVector<C64>) -> Result<Self, QmError> {
        let norm2 = ket.iter().map(|z| z.norm_sqr()).sum::<f64>();
        if norm2 < PROBABILITY_FLOOR {
            return Err(QmError::InvalidParameter("zero ket".into()));
        }
        let scaled = ket / C64::new(norm2.sqrt(), 0.0);
        Self::new(&scaled * scaled.adjoint())
    }

    /// Pure computational-basis state |n><n|.
    pub fn basis_state(dim: usize, n: usize) -> Result<Self, QmError> {
        if n >= dim {
            return Err(QmError::InvalidParameter(format!(
                "basis index {n} out of range for dimension {dim}"
            )));
        }
        Self::new(crate::linalg::ketbra(dim, n, n))
    }

    pub fn mat(&self) -> &CMat {
        &self.mat
    }

    pub fn dim(&self) -> usize {
        self.mat.nrows()
    }
}

/// One Kraus effect: outcome label `k`, multiplicity index `l`, and the
/// operator implementing the conditional state change.
#[derive(Debug, Clone, PartialEq)]
pub struct EffectOperator {
    outcome: String,
    multiplicity: usize,
    mat: CMat,
}

impl EffectOperator {
    pub fn new(outcome: impl Into<String>, multiplicity: usize, mat: CMat) -> Result<Self, QmError> {
        if mat.nrows() != mat.ncols() {
            return Err(QmError::DimensionMismatch(mat.nrows(), mat.ncols()));
        }
        Ok(Self {
            outcome: outcome.into(),
            multiplicity,
            mat,
        })
    }

    /// Convenience constructor for single-multiplicity effects.
    pub fn single(outcome: impl Into<String>, mat: CMat) -> Result<Self, QmError> {
        Self::new(outcome, 0, mat)
    }

    pub fn outcome(&self) -> &str {
        &self.outcome
    }

    pub fn multiplicity(&self) -> usize {
        self.multiplicity
    }

    pub fn mat(&self) -> &CMat {
        &self.mat
    }

    pub fn dim(&self) -> usize {
        self.mat.nrows()
    }
}

/// Labeled collection of effect operators sharing one space.
#[derive(Debug, Clone, PartialEq)]
pub struct EffectSet {
    effects: Vec<EffectOperator>,
    dim: usize,
}

impl EffectSet {
    pub fn new(effects: Vec<EffectOperator>) -> Result<Self, QmError> {
        let dim = match effects.first() {
            Some(e) => e.dim(),
            None => return Err(QmError::EmptyEffectSet),
        };
        for e in &effects {
            if e.dim() != dim {
                return Err(QmError::DimensionMismatch(dim, e.dim()));
            }
        }
        for (i, e) in effects.iter().enumerate() {
            for other in &effects[i + 1..] {
                if e.outcome == other.outcome && e.multiplicity == other.multiplicity {
                    return Err(QmError::DuplicateEffectLabel(
                        e.outcome.clone(),
                        e.multiplicity,
                    ));
                }
            }
        }
        Ok(Self { effects, dim })
    }

    pub fn effects(&self) -> &[EffectOperator] {
        &self.effects
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn len(&self) -> usize {
        self.effects.len()
    }

    pub fn is_empty(&self) -> bool {
        self.effects.is_empty()
    }

    /// Copy of the set with every effect carrying the given outcome removed.
    /// The result is deliberately biased; used by causality diagnostics.
    pub fn without_outcome(&self, outcome: &str) -> Result<Self, QmError> {
        let kept: Vec<EffectOperator> = self
            .effects
            .iter()
            .filter(|e| e.outcome != outcome)
            .cloned()
            .collect();
        Self::new(kept)
    }
}

/// One probability operator pi_j of a POVM.
#[derive(Debug, Clone, PartialEq)]
pub struct PovmElement {
    outcome: String,
    mat: CMat,
}

impl PovmElement {
    pub fn new(outcome: impl Into<String>, mat: CMat) -> Result<Self, QmError> {
        if mat.nrows() != mat.ncols() {
            return Err(QmError::DimensionMismatch(mat.nrows(), mat.ncols()));
        }
        let herm = hermitian_deviation(&mat);
        if herm > HERMITICITY_TOL {
            return Err(QmError::NotHermitian(herm));
        }
        let min_eig = min_eigenvalue(&mat);
        if min_eig < EIGENVALUE_FLOOR {
            return Err(QmError::NotPositive(min_eig));
        }
        Ok(Self {
            outcome: outcome.into(),
            mat,
        })
    }

    pub fn outcome(&self) -> &str {
        &self.outcome
    }

    pub fn mat(&self) -> &CMat {
        &self.mat
    }

    pub fn dim(&self) -> usize {
        self.mat.nrows()
    }
}

/// Preparation-side ensemble: states rho_i with prior probabilities P_i.
#[derive(Debug, Clone)]
pub struct PreparationEnsemble {
    states: Vec<DensityOperator>,
    priors: Vec<f64>,
}

impl PreparationEnsemble {
    pub fn new(states: Vec<DensityOperator>, priors: Vec<f64>) -> Result<Self, QmError> {
        if states.len() != priors.len() {
            return Err(QmError::InvalidParameter(
                "states and priors must have equal length".into(),
            ));
        }
        for &p in &priors {
            if !(0.0..=1.0).contains(&p) {
                return Err(QmError::PriorOutOfRange(p));
            }
        }
        let total: f64 = priors.iter().sum();
        if (total - 1.0).abs() > 1e-12 {
            return Err(QmError::PriorsNotNormalized(total));
        }
        Ok(Self { states, priors })
    }

    pub fn states(&self) -> &[DensityOperator] {
        &self.states
    }

    pub fn priors(&self) -> &[f64] {
        &self.priors
    }
}

/// Tr(rho pi), the probability of outcome pi given preparation rho.
pub fn born_probability(rho: &DensityOperator, pi: &PovmElement) -> Result<f64, QmError> {
    if rho.dim() != pi.dim() {
        return Err(QmError::DimensionMismatch(rho.dim(), pi.dim()));
    }
    let tr = trace(&(rho.mat() * pi.mat()));
    if tr.im.abs() > 1e-10 {
        return Err(QmError::ImaginaryResidue(tr.im.abs()));
    }
    Ok(tr.re.clamp(0.0, 1.0))
}

/// Conditional state change rho -> A rho A^dag / Tr(rho A^dag A), returned
/// with the outcome probability.
pub fn apply_effect(
    rho: &DensityOperator,
    effect: &EffectOperator,
) -> Result<(DensityOperator, f64), QmError> {
    if rho.dim() != effect.dim() {
        return Err(QmError::DimensionMismatch(rho.dim(), effect.dim()));
    }
    let a = effect.mat();
    let numerator = a * rho.mat() * a.adjoint();
    let prob = trace(&numerator).re;
    if prob < PROBABILITY_FLOOR {
        return Err(QmError::ZeroProbabilityOutcome(prob));
    }
    let post = DensityOperator::new(numerator / C64::new(prob, 0.0))?;
    Ok((post, prob))
}

/// POVM elements pi_k = sum_l A_kl^dag A_kl, one per outcome label, in
/// first-appearance order.
pub fn povm_from_effects(set: &EffectSet) -> Result<Vec<PovmElement>, QmError> {
    let d = set.dim();
    let mut outcomes: Vec<&str> = Vec::new();
    for e in set.effects() {
        if !outcomes.contains(&e.outcome()) {
            outcomes.push(e.outcome());
        }
    }
    outcomes
        .into_iter()
        .map(|k| {
            let mut sum = CMat::zeros(d, d);
            for e in set.effects().iter().filter(|e| e.outcome() == k) {
                sum += e.mat().adjoint() * e.mat();
            }
            PovmElement::new(k, sum)
        })
        .collect()
}

/// Operator norm of (sum_kl A^dag A - 1). Zero within tolerance certifies an
/// unbiased (complete) set.
pub fn completeness_defect(set: &EffectSet) -> f64 {
    let d = set.dim();
    let mut sum = CMat::zeros(d, d);
    for e in set.effects() {
        sum += e.mat().adjoint() * e.mat();
    }
    hermitian_norm(&(sum - identity(d)))
}

/// Operator norm of (sum_kl A A^dag - 1). A strictly positive value certifies
/// that the set cannot describe time-reversed unbiased measurements.
pub fn reversed_completeness_defect(set: &EffectSet) -> f64 {
    let d = set.dim();
    let mut sum = CMat::zeros(d, d);
    for e in set.effects() {
        sum += e.mat() * e.mat().adjoint();
    }
    hermitian_norm(&(sum - identity(d)))
}

/// identity/d, the state of complete ignorance.
pub fn maximally_mixed(d: usize) -> Result<DensityOperator, QmError> {
    if d == 0 {
        return Err(QmError::InvalidParameter("dimension must be positive".into()));
    }
    DensityOperator::new(identity(d) / C64::new(d as f64, 0.0))
}

/// Draws one measurement outcome from a complete effect set and returns the
/// conditioned post-measurement state.
///
/// Refuses biased sets: sampling from an incomplete set would break the
/// normalization that the probabilities rely on.
pub fn sample_outcome<R: Rng + ?Sized>(
    rho: &DensityOperator,
    set: &EffectSet,
    rng: &mut R,
) -> Result<(String, usize, DensityOperator), QmError> {
    let defect = completeness_defect(set);
    if defect > COMPLETENESS_TOL {
        return Err(QmError::BiasedEffectSet(defect));
    }
    let probs: Vec<f64> = set
        .effects()
        .iter()
        .map(|e| trace(&(e.mat().adjoint() * e.mat() * rho.mat())).re.max(0.0))
        .collect();
    let total: f64 = probs.iter().sum();
    if (total - 1.0).abs() > COMPLETENESS_TOL {
        return Err(QmError::BiasedEffectSet((total - 1.0).abs()));
    }
    let u: f64 = rng.random::<f64>() * total;
    let mut acc = 0.0;
    let mut chosen = set.len() - 1;
    for (i, &p) in probs.iter().enumerate() {
        acc += p;
        if u < acc {
            chosen = i;
            break;
        }
    }
    // a zero-probability branch can still be hit by the final-bucket fallback
    let mut idx = chosen;
    while probs[idx] < PROBABILITY_FLOOR {
        idx = (idx + set.len() - 1) % set.len();
    }
    let effect = &set.effects()[idx];
    let (post, _) = apply_effect(rho, effect)?;
    Ok((effect.outcome().to_string(), effect.multiplicity(), post))
}

/// Hermitian effect family A_m = sqrt((1-eps)/M + eps pi_m) interpolating
/// between a trivial measurement (eps = 0) and the input POVM (eps = 1).
/// Complete by construction at every strength.
pub fn weak_effect_family(povm: &[PovmElement], eps: f64) -> Result<EffectSet, QmError> {
    if !(0.0..=1.0).contains(&eps) {
        return Err(QmError::InvalidStrength(eps));
    }
    let first = povm.first().ok_or(QmError::EmptyEffectSet)?;
    let d = first.dim();
    let mut sum = CMat::zeros(d, d);
    for p in povm {
        if p.dim() != d {
            return Err(QmError::DimensionMismatch(d, p.dim()));
        }
        sum += p.mat();
    }
    let defect = hermitian_norm(&(sum - identity(d)));
    if defect > 1e-10 {
        return Err(QmError::IncompletePovm(defect));
    }
    let m = povm.len() as f64;
    let base = identity(d) * C64::new((1.0 - eps) / m, 0.0);
    let effects = povm
        .iter()
        .map(|p| {
            let arg = &base + p.mat() * C64::new(eps, 0.0);
            let root = sqrt_psd(&arg, 1e-12)?;
            EffectOperator::single(p.outcome(), root)
        })
        .collect::<Result<Vec<_>, _>>()?;
    EffectSet::new(effects)
}

/// Projective sigma_z POVM on a two-level space: "+" = |e><e| (index 0),
/// "-" = |g><g| (index 1).
pub fn sigma_z_povm() -> Vec<PovmElement> {
    vec![
        PovmElement::new("+", crate::linalg::ketbra(2, 0, 0)).unwrap(),
        PovmElement::new("-", crate::linalg::ketbra(2, 1, 1)).unwrap(),
    ]
}
