//! Bundled concrete systems: a monitored two-level atom, a photodetected
//! field mode on a truncated Fock space, the amplitude-damping effect pair,
//! and a discretized continuous-variable joint monitor built from coherent
//! states.

use crate::evolution::MonitoringModel;
use crate::linalg::{hermitian_norm, identity, ketbra, sqrt_psd};
use crate::operators::{EffectOperator, EffectSet, PovmElement, sigma_z_povm, weak_effect_family};
use crate::{C64, CMat, QmError};
use nalgebra::DVector;

/// Two-level atom with a sigma_x Rabi drive monitored in the sigma_z basis.
/// Index 0 is |e>, index 1 is |g>.
pub fn two_level_monitor(omega: f64, eps: f64, rate: f64) -> Result<MonitoringModel, QmError> {
    let h = (ketbra(2, 0, 1) + ketbra(2, 1, 0)) * C64::new(omega / 2.0, 0.0);
    let effects = weak_effect_family(&sigma_z_povm(), eps)?;
    MonitoringModel::new(h, effects, rate)
}

/// Perfect absorbing photodetector on a Fock space truncated at dimension
/// `dim`. The click effect |0><1| acts only on the single-photon sector
/// (zero-extended above it); the no-click effect is sqrt(1 - |1><1|).
pub fn photodetector_mode(dim: usize, rate: f64) -> Result<MonitoringModel, QmError> {
    if dim < 2 {
        return Err(QmError::TruncationTooSmall(dim, 2));
    }
    let a_click = ketbra(dim, 0, 1);
    let no_click_sq = identity(dim) - a_click.adjoint() * &a_click;
    let a_noclick = sqrt_psd(&no_click_sq, 1e-12)?;
    let effects = EffectSet::new(vec![
        EffectOperator::single("click", a_click)?,
        EffectOperator::single("noclick", a_noclick)?,
    ])?;
    MonitoringModel::new(CMat::zeros(dim, dim), effects, rate)
}

/// Amplitude-damping effect pair on a two-level space (|e> = index 0):
/// A_0 = |g><g| + sqrt(1-p)|e><e|, A_1 = sqrt(p)|g><e|.
///
/// Complete forward (sum A^dag A = 1) but not reversed: sum A A^dag differs
/// from the identity by exactly p, the canonical witness that an informative
/// measurement is not time-reversible as an unbiased measurement.
pub fn amplitude_damping_effects(p: f64) -> Result<EffectSet, QmError> {
    if !(0.0..=1.0).contains(&p) {
        return Err(QmError::InvalidParameter(format!(
            "damping probability {p} outside [0, 1]"
        )));
    }
    let a0 = ketbra(2, 1, 1) + ketbra(2, 0, 0) * C64::new((1.0 - p).sqrt(), 0.0);
    let a1 = ketbra(2, 1, 0) * C64::new(p.sqrt(), 0.0);
    EffectSet::new(vec![
        EffectOperator::single("noclick", a0)?,
        EffectOperator::single("click", a1)?,
    ])
}

/// Annihilation operator on a Fock space truncated at `dim` levels.
pub fn annihilation(dim: usize) -> CMat {
    let mut a = CMat::zeros(dim, dim);
    for n in 1..dim {
        a[(n - 1, n)] = C64::new((n as f64).sqrt(), 0.0);
    }
    a
}

/// Number operator diag(0, 1, ..., dim-1).
pub fn number_operator(dim: usize) -> CMat {
    CMat::from_diagonal(&DVector::from_iterator(
        dim,
        (0..dim).map(|n| C64::new(n as f64, 0.0)),
    ))
}

/// Cavity mode losing photons at rate `gamma`, H = 0.
pub fn damped_cavity(dim: usize, gamma: f64) -> Result<crate::evolution::LindbladModel, QmError> {
    if dim < 2 {
        return Err(QmError::TruncationTooSmall(dim, 2));
    }
    crate::evolution::LindbladModel::new(CMat::zeros(dim, dim), vec![annihilation(dim)], gamma)
}

/// Discretization of a continuous (x, p) outcome family: a square grid of
/// coherent amplitudes with Re(alpha), Im(alpha) in [-alpha_max, alpha_max]
/// and spacing `spacing`, on a Fock space truncated at `truncation`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CvOutcomeGrid {
    pub alpha_max: f64,
    pub spacing: f64,
    pub truncation: usize,
    pub multiplicity: usize,
}

impl CvOutcomeGrid {
    pub fn new(
        alpha_max: f64,
        spacing: f64,
        truncation: usize,
        multiplicity: usize,
    ) -> Result<Self, QmError> {
        if spacing <= 0.0 || alpha_max <= 0.0 {
            return Err(QmError::InvalidParameter(
                "alpha_max and spacing must be positive".into(),
            ));
        }
        let n = 2.0 * alpha_max / spacing;
        if (n - n.round()).abs() > 1e-9 {
            return Err(QmError::InvalidParameter(format!(
                "2*alpha_max/spacing = {n} is not an integer"
            )));
        }
        if truncation < 4 {
            return Err(QmError::TruncationTooSmall(truncation, 4));
        }
        // grid must stay inside the truncation's reliable region: the mean
        // photon number alpha_max^2 of an axis-edge node cannot exceed the
        // highest retained Fock level
        if alpha_max * alpha_max > truncation as f64 {
            return Err(QmError::InvalidParameter(format!(
                "alpha_max^2 = {} exceeds truncation = {}",
                alpha_max * alpha_max,
                truncation
            )));
        }
        if multiplicity == 0 {
            return Err(QmError::InvalidParameter(
                "multiplicity must be at least 1".into(),
            ));
        }
        Ok(Self {
            alpha_max,
            spacing,
            truncation,
            multiplicity,
        })
    }

    /// Coherent amplitudes, row-major over (Re index, Im index).
    pub fn nodes(&self) -> Vec<C64> {
        let n = (2.0 * self.alpha_max / self.spacing).round() as usize;
        let mut out = Vec::with_capacity((n + 1) * (n + 1));
        for i in 0..=n {
            for j in 0..=n {
                out.push(C64::new(
                    -self.alpha_max + i as f64 * self.spacing,
                    -self.alpha_max + j as f64 * self.spacing,
                ));
            }
        }
        out
    }
}

/// Coherent state |alpha> truncated to `dim` Fock levels and renormalized.
pub fn coherent_ket(dim: usize, alpha: C64) -> DVector<C64> {
    let mut v = DVector::zeros(dim);
    let mut amp = C64::new(1.0, 0.0);
    for n in 0..dim {
        if n > 0 {
            amp *= alpha / C64::new((n as f64).sqrt(), 0.0);
        }
        v[n] = amp;
    }
    let norm = v.iter().map(|z| z.norm_sqr()).sum::<f64>().sqrt();
    v / C64::new(norm, 0.0)
}

/// Unrenormalized POVM candidates (delta^2/pi) |alpha><alpha| and their sum,
/// the grid quadrature of the coherent-state measure d^2alpha/pi.
fn cv_raw_elements(grid: &CvOutcomeGrid) -> (Vec<(String, CMat)>, CMat) {
    let d = grid.truncation;
    let weight = C64::new(grid.spacing * grid.spacing / std::f64::consts::PI, 0.0);
    let mut sum = CMat::zeros(d, d);
    let mut elements = Vec::new();
    for alpha in grid.nodes() {
        let ket = coherent_ket(d, alpha);
        let proj = (&ket * ket.adjoint()) * weight;
        sum += &proj;
        elements.push((format!("a({:+.3},{:+.3})", alpha.re, alpha.im), proj));
    }
    (elements, sum)
}

/// Operator norm of the unrenormalized sum's deviation from the identity.
/// Shrinks as the grid is refined; used to check discretization convergence.
pub fn cv_discretization_defect(grid: &CvOutcomeGrid) -> f64 {
    let (_, sum) = cv_raw_elements(grid);
    hermitian_norm(&(sum - identity(grid.truncation)))
}

/// Joint (x, p) monitor built from coherent-state projectors on the grid,
/// renormalized as a set (S^{-1/2} w S^{-1/2}) so the POVM sums to the
/// identity exactly, then weakened to strength `eps`. The Hamiltonian is the
/// number operator with unit frequency.
pub fn cv_monitor(grid: &CvOutcomeGrid, eps: f64, rate: f64) -> Result<MonitoringModel, QmError> {
    let d = grid.truncation;
    let (elements, sum) = cv_raw_elements(grid);
    let root = sqrt_psd(&sum, 1e-12)?;
    let inv_root = root
        .try_inverse()
        .ok_or(QmError::GridTooCoarse(f64::INFINITY))?;
    // how far S^{-1/2} is from a no-op; a large correction means the grid
    // does not faithfully resolve the identity on the truncated space
    let correction = hermitian_norm(&(&inv_root - identity(d)));
    if correction > 0.5 {
        return Err(QmError::GridTooCoarse(correction));
    }
    let povm = elements
        .into_iter()
        .map(|(label, w)| PovmElement::new(label, &inv_root * w * &inv_root))
        .collect::<Result<Vec<_>, _>>()?;
    let base = weak_effect_family(&povm, eps)?;
    let effects = if grid.multiplicity == 1 {
        base
    } else {
        // split each outcome into equal-weight xi-indexed copies
        let scale = C64::new(1.0 / (grid.multiplicity as f64).sqrt(), 0.0);
        let mut expanded = Vec::with_capacity(base.len() * grid.multiplicity);
        for e in base.effects() {
            for xi in 0..grid.multiplicity {
                expanded.push(EffectOperator::new(e.outcome(), xi, e.mat() * scale)?);
            }
        }
        EffectSet::new(expanded)?
    };
    MonitoringModel::new(number_operator(d), effects, rate)
}
