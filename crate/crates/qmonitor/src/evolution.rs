//! Master-equation generators and a fixed-step classical 4th-order
//! integrator.
//!
//! Predictive generators evolve density operators forward in time; the
//! retrodictive variants evolve probability operators backward, parameterized
//! by elapsed backward time. Two retrodictive orderings are provided for
//! dissipative (Lindblad) models: the Heisenberg adjoint of the forward
//! generator, which preserves the identity and makes Tr(rho pi) exactly
//! collapse-time invariant, and an alternative ordering with the channel
//! anticommutators reversed. The two coincide exactly for normal channels
//! with [b, b^dag] = 0; the causality module surfaces their difference as a
//! diagnostic instead of resolving it.

use crate::linalg::{all_finite, commutator, hermitian_deviation, hermitian_norm, trace};
use crate::operators::{COMPLETENESS_TOL, EffectSet, completeness_defect};
use crate::{C64, CMat, QmError};
use serde::{Deserialize, Serialize};

/// Maximum allowed dt * (generator scale); larger steps are rejected.
pub const STEP_GUARD: f64 = 0.1;
/// Maximum allowed trace drift over a predictive integration.
pub const TRACE_DRIFT_TOL: f64 = 1e-7;

/// Dissipative model: drho/dt = -i[H, rho] + gamma sum_k D[b_k](rho).
#[derive(Debug, Clone)]
pub struct LindbladModel {
    hamiltonian: CMat,
    channels: Vec<CMat>,
    rate: f64,
}

impl LindbladModel {
    pub fn new(hamiltonian: CMat, channels: Vec<CMat>, rate: f64) -> Result<Self, QmError> {
        let d = hamiltonian.nrows();
        if hamiltonian.ncols() != d {
            return Err(QmError::DimensionMismatch(d, hamiltonian.ncols()));
        }
        let herm = hermitian_deviation(&hamiltonian);
        if herm > 1e-10 {
            return Err(QmError::NotHermitian(herm));
        }
        if rate < 0.0 {
            return Err(QmError::NegativeRate(rate));
        }
        for b in &channels {
            if b.nrows() != d || b.ncols() != d {
                return Err(QmError::DimensionMismatch(d, b.nrows()));
            }
        }
        Ok(Self {
            hamiltonian,
            channels,
            rate,
        })
    }

    pub fn hamiltonian(&self) -> &CMat {
        &self.hamiltonian
    }

    pub fn channels(&self) -> &[CMat] {
        &self.channels
    }

    pub fn rate(&self) -> f64 {
        self.rate
    }

    pub fn dim(&self) -> usize {
        self.hamiltonian.nrows()
    }

    /// Scale used by the integrator step guard.
    pub fn generator_scale(&self) -> f64 {
        let channel_scale: f64 = self
            .channels
            .iter()
            .map(|b| {
                let n = crate::linalg::operator_norm(b);
                n * n
            })
            .sum();
        hermitian_norm(&self.hamiltonian) + self.rate * channel_scale
    }
}

/// Monitored model: drho/dt = -i[H, rho] + R (sum_kl A rho A^dag - rho).
#[derive(Debug, Clone)]
pub struct MonitoringModel {
    hamiltonian: CMat,
    effects: EffectSet,
    rate: f64,
    // cached Hermitian eigendecomposition of H, used for exact unitary
    // propagation between measurement events
    h_eigvals: Vec<f64>,
    h_eigvecs: CMat,
    // cached A^dag A per effect, used by outcome sampling
    gram: Vec<CMat>,
}

impl MonitoringModel {
    pub fn new(hamiltonian: CMat, effects: EffectSet, rate: f64) -> Result<Self, QmError> {
        let d = hamiltonian.nrows();
        if hamiltonian.ncols() != d || effects.dim() != d {
            return Err(QmError::DimensionMismatch(d, effects.dim()));
        }
        let herm = hermitian_deviation(&hamiltonian);
        if herm > 1e-10 {
            return Err(QmError::NotHermitian(herm));
        }
        if rate < 0.0 {
            return Err(QmError::NegativeRate(rate));
        }
        let defect = completeness_defect(&effects);
        if defect > COMPLETENESS_TOL {
            return Err(QmError::BiasedEffectSet(defect));
        }
        let (h_eigvals, h_eigvecs) = crate::linalg::hermitian_eigen(&hamiltonian);
        let gram = effects
            .effects()
            .iter()
            .map(|e| e.mat().adjoint() * e.mat())
            .collect();
        Ok(Self {
            hamiltonian,
            effects,
            rate,
            h_eigvals,
            h_eigvecs,
            gram,
        })
    }

    pub fn hamiltonian(&self) -> &CMat {
        &self.hamiltonian
    }

    pub fn effects(&self) -> &EffectSet {
        &self.effects
    }

    pub fn rate(&self) -> f64 {
        self.rate
    }

    pub fn dim(&self) -> usize {
        self.hamiltonian.nrows()
    }

    /// exp(-i H t).
    pub fn unitary(&self, t: f64) -> CMat {
        crate::linalg::unitary_from_hermitian(&self.h_eigvals, &self.h_eigvecs, t)
    }

    /// Cached A_kl^dag A_kl, indexed like `effects()`.
    pub fn effect_grams(&self) -> &[CMat] {
        &self.gram
    }

    pub fn generator_scale(&self) -> f64 {
        hermitian_norm(&self.hamiltonian) + self.rate
    }
}

/// Either kind of generator model.
#[derive(Debug, Clone)]
pub enum GeneratorModel {
    Lindblad(LindbladModel),
    Monitoring(MonitoringModel),
}

impl GeneratorModel {
    pub fn dim(&self) -> usize {
        match self {
            GeneratorModel::Lindblad(m) => m.dim(),
            GeneratorModel::Monitoring(m) => m.dim(),
        }
    }

    pub fn generator_scale(&self) -> f64 {
        match self {
            GeneratorModel::Lindblad(m) => m.generator_scale(),
            GeneratorModel::Monitoring(m) => m.generator_scale(),
        }
    }
}

/// Direction and ordering of the generator.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum GeneratorVariant {
    /// Forward-time evolution of the density operator.
    Predictive,
    /// Backward-time evolution of the probability operator, using the
    /// Heisenberg adjoint of the forward generator.
    RetrodictiveAdjoint,
    /// Backward-time evolution with the channel anticommutator ordering
    /// reversed (b b^dag in place of b^dag b). Dissipative models only;
    /// coincides with the adjoint for monitoring models.
    RetrodictiveAsPrinted,
}

impl GeneratorVariant {
    pub fn is_retrodictive(self) -> bool {
        !matches!(self, GeneratorVariant::Predictive)
    }
}

/// Uniform time grid, inclusive of both endpoints.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TimeGrid {
    pub t0: f64,
    pub t1: f64,
    pub dt: f64,
}

impl TimeGrid {
    pub fn new(t0: f64, t1: f64, dt: f64) -> Result<Self, QmError> {
        if !(t0.is_finite() && t1.is_finite() && dt.is_finite()) {
            return Err(QmError::InvalidGrid("non-finite endpoint or step".into()));
        }
        if dt <= 0.0 {
            return Err(QmError::InvalidGrid(format!("dt = {dt} must be positive")));
        }
        if t1 < t0 {
            return Err(QmError::InvalidGrid(format!("t1 = {t1} < t0 = {t0}")));
        }
        let steps = (t1 - t0) / dt;
        if (steps - steps.round()).abs() > 1e-9 * steps.max(1.0) {
            return Err(QmError::InvalidGrid(format!(
                "(t1 - t0)/dt = {steps} is not an integer"
            )));
        }
        Ok(Self { t0, t1, dt })
    }

    pub fn n_steps(&self) -> usize {
        ((self.t1 - self.t0) / self.dt).round() as usize
    }

    /// Grid times t0, t0+dt, ..., t1.
    pub fn times(&self) -> Vec<f64> {
        (0..=self.n_steps())
            .map(|i| self.t0 + i as f64 * self.dt)
            .collect()
    }

    pub fn span(&self) -> f64 {
        self.t1 - self.t0
    }
}

/// Forward generator of the dissipative master equation.
pub fn lindblad_rhs(rho: &CMat, model: &LindbladModel) -> Result<CMat, QmError> {
    if rho.nrows() != model.dim() || rho.ncols() != model.dim() {
        return Err(QmError::DimensionMismatch(model.dim(), rho.nrows()));
    }
    let mut out = commutator(model.hamiltonian(), rho) * C64::new(0.0, -1.0);
    let g = C64::new(model.rate(), 0.0);
    let half = C64::new(0.5, 0.0);
    for b in model.channels() {
        let bdag = b.adjoint();
        let bdag_b = &bdag * b;
        out += (b * rho * &bdag - (&bdag_b * rho + rho * &bdag_b) * half) * g;
    }
    Ok(out)
}

/// Forward generator of the monitoring master equation.
pub fn monitoring_rhs(rho: &CMat, model: &MonitoringModel) -> Result<CMat, QmError> {
    if rho.nrows() != model.dim() || rho.ncols() != model.dim() {
        return Err(QmError::DimensionMismatch(model.dim(), rho.nrows()));
    }
    let mut sum = CMat::zeros(model.dim(), model.dim());
    for e in model.effects().effects() {
        sum += e.mat() * rho * e.mat().adjoint();
    }
    Ok(commutator(model.hamiltonian(), rho) * C64::new(0.0, -1.0)
        + (sum - rho) * C64::new(model.rate(), 0.0))
}

/// Backward-time rate of change of a probability operator,
/// d pi / d(-t), for the requested retrodictive ordering.
pub fn retro_rhs(
    pi: &CMat,
    model: &GeneratorModel,
    variant: GeneratorVariant,
) -> Result<CMat, QmError> {
    if !variant.is_retrodictive() {
        return Err(QmError::PredictiveVariant);
    }
    let d = model.dim();
    if pi.nrows() != d || pi.ncols() != d {
        return Err(QmError::DimensionMismatch(d, pi.nrows()));
    }
    match model {
        GeneratorModel::Monitoring(m) => {
            // +i[H, pi] + R (sum A^dag pi A - pi): both the backward equation
            // and the adjoint of the forward generator
            let mut sum = CMat::zeros(d, d);
            for e in m.effects().effects() {
                sum += e.mat().adjoint() * pi * e.mat();
            }
            Ok(commutator(m.hamiltonian(), pi) * C64::new(0.0, 1.0)
                + (sum - pi) * C64::new(m.rate(), 0.0))
        }
        GeneratorModel::Lindblad(m) => {
            let g = C64::new(m.rate(), 0.0);
            let half = C64::new(0.5, 0.0);
            let mut out = commutator(m.hamiltonian(), pi) * C64::new(0.0, 1.0);
            for b in m.channels() {
                let bdag = b.adjoint();
                let sandwich = &bdag * pi * b;
                let anti = match variant {
                    GeneratorVariant::RetrodictiveAdjoint => &bdag * b,
                    GeneratorVariant::RetrodictiveAsPrinted => b * &bdag,
                    GeneratorVariant::Predictive => unreachable!(),
                };
                out += (sandwich - (&anti * pi + pi * &anti) * half) * g;
            }
            Ok(out)
        }
    }
}

/// Rate of change in the integration parameter (forward time for the
/// predictive variant, elapsed backward time otherwise).
pub fn generator_rhs(
    op: &CMat,
    model: &GeneratorModel,
    variant: GeneratorVariant,
) -> Result<CMat, QmError> {
    match (variant, model) {
        (GeneratorVariant::Predictive, GeneratorModel::Lindblad(m)) => lindblad_rhs(op, m),
        (GeneratorVariant::Predictive, GeneratorModel::Monitoring(m)) => monitoring_rhs(op, m),
        _ => retro_rhs(op, model, variant),
    }
}

/// Classical fixed-step 4th-order integration over the grid. Returns one
/// snapshot per grid point, the first being `op0`.
///
/// No trace renormalization is applied; for predictive runs drift beyond
/// `TRACE_DRIFT_TOL` is reported as an error rather than corrected.
pub fn integrate(
    op0: &CMat,
    model: &GeneratorModel,
    variant: GeneratorVariant,
    grid: &TimeGrid,
) -> Result<Vec<CMat>, QmError> {
    let guard = grid.dt * model.generator_scale();
    if guard > STEP_GUARD {
        return Err(QmError::StepGuard(guard));
    }
    let trace0 = trace(op0);
    let h = C64::new(grid.dt, 0.0);
    let half = C64::new(0.5, 0.0);
    let sixth = C64::new(1.0 / 6.0, 0.0);
    let two = C64::new(2.0, 0.0);

    let mut out = Vec::with_capacity(grid.n_steps() + 1);
    out.push(op0.clone());
    let mut cur = op0.clone();
    for _ in 0..grid.n_steps() {
        let k1 = generator_rhs(&cur, model, variant)?;
        let k2 = generator_rhs(&(&cur + &k1 * h * half), model, variant)?;
        let k3 = generator_rhs(&(&cur + &k2 * h * half), model, variant)?;
        let k4 = generator_rhs(&(&cur + &k3 * h), model, variant)?;
        cur += (k1 + (k2 + k3) * two + k4) * h * sixth;
        if !all_finite(&cur) {
            return Err(QmError::NonFinite);
        }
        if variant == GeneratorVariant::Predictive {
            let drift = (trace(&cur) - trace0).norm();
            if drift > TRACE_DRIFT_TOL {
                return Err(QmError::TraceDrift(drift));
            }
        }
        out.push(cur.clone());
    }
    Ok(out)
}

/// Final snapshot of `integrate` without retaining the intermediate states.
pub fn integrate_to_end(
    op0: &CMat,
    model: &GeneratorModel,
    variant: GeneratorVariant,
    grid: &TimeGrid,
) -> Result<CMat, QmError> {
    Ok(integrate(op0, model, variant, grid)?.pop().unwrap())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::linalg::{identity, ketbra, max_abs_entry};
    use crate::operators::{sigma_z_povm, weak_effect_family, EffectOperator};
    use approx::assert_abs_diff_eq;

    // |e> = index 0, |g> = index 1
    fn sigma_minus() -> CMat {
        ketbra(2, 1, 0)
    }

    fn sigma_x() -> CMat {
        ketbra(2, 0, 1) + ketbra(2, 1, 0)
    }

    fn decay_model(gamma: f64) -> LindbladModel {
        LindbladModel::new(CMat::zeros(2, 2), vec![sigma_minus()], gamma).unwrap()
    }

    fn excited() -> CMat {
        ketbra(2, 0, 0)
    }

    #[test]
    fn lindblad_rhs_decay_from_excited() {
        let gamma = 1.3;
        let rhs = lindblad_rhs(&excited(), &decay_model(gamma)).unwrap();
        let expect = (ketbra(2, 1, 1) - ketbra(2, 0, 0)) * C64::new(gamma, 0.0);
        assert!(max_abs_entry(&(rhs - expect)) < 1e-12);
    }

    #[test]
    fn lindblad_rhs_dark_state() {
        let rhs = lindblad_rhs(&ketbra(2, 1, 1), &decay_model(2.0)).unwrap();
        assert!(max_abs_entry(&rhs) < 1e-14);
    }

    #[test]
    fn lindblad_rhs_traceless_and_hermitian() {
        let h = sigma_x() * C64::new(0.7, 0.0);
        let model = LindbladModel::new(h, vec![sigma_minus()], 0.9).unwrap();
        let rho = identity(2) * C64::new(0.5, 0.0);
        let rhs = lindblad_rhs(&rho, &model).unwrap();
        assert!(trace(&rhs).norm() < 1e-12);
        assert!(crate::linalg::hermitian_deviation(&rhs) < 1e-12);
    }

    #[test]
    fn integrated_decay_matches_exponential() {
        // closed-form oracle: excited population e^{-gamma t}
        let gamma = 2.0;
        let grid = TimeGrid::new(0.0, 1.0, 1e-3).unwrap();
        let model = GeneratorModel::Lindblad(decay_model(gamma));
        let snaps = integrate(&excited(), &model, GeneratorVariant::Predictive, &grid).unwrap();
        for (i, s) in snaps.iter().enumerate() {
            let t = i as f64 * grid.dt;
            assert!(
                (s[(0, 0)].re - (-gamma * t).exp()).abs() < 1e-8,
                "t = {t}"
            );
        }
    }

    #[test]
    fn monitoring_rhs_identity_effects_is_zero() {
        let set = crate::operators::EffectSet::new(vec![
            EffectOperator::single("only", identity(2)).unwrap(),
        ])
        .unwrap();
        let model = MonitoringModel::new(CMat::zeros(2, 2), set, 5.0).unwrap();
        let rho = excited() * C64::new(0.4, 0.0) + ketbra(2, 1, 1) * C64::new(0.6, 0.0);
        assert!(max_abs_entry(&monitoring_rhs(&rho, &model).unwrap()) < 1e-14);
    }

    #[test]
    fn projective_monitoring_dephases_at_rate_r() {
        let r = 3.0;
        let set = weak_effect_family(&sigma_z_povm(), 1.0).unwrap();
        let model =
            GeneratorModel::Monitoring(MonitoringModel::new(CMat::zeros(2, 2), set, r).unwrap());
        let plus_x = identity(2) * C64::new(0.5, 0.0)
            + (ketbra(2, 0, 1) + ketbra(2, 1, 0)) * C64::new(0.5, 0.0);
        let grid = TimeGrid::new(0.0, 1.0, 1e-3).unwrap();
        let snaps = integrate(&plus_x, &model, GeneratorVariant::Predictive, &grid).unwrap();
        let coh = snaps.last().unwrap()[(0, 1)].re;
        assert_abs_diff_eq!(coh, 0.5 * (-r * 1.0).exp(), epsilon = 1e-8);
    }

    #[test]
    fn weak_monitoring_coherence_rate() {
        // oracle: sum_m A_m rho A_m shrinks the off-diagonal by sqrt(1 - eps^2),
        // so the decay rate is R (1 - sqrt(1 - eps^2))
        let eps = 0.1_f64;
        let r = 10.0;
        let set = weak_effect_family(&sigma_z_povm(), eps).unwrap();
        let model =
            GeneratorModel::Monitoring(MonitoringModel::new(CMat::zeros(2, 2), set, r).unwrap());
        let plus_x = identity(2) * C64::new(0.5, 0.0)
            + (ketbra(2, 0, 1) + ketbra(2, 1, 0)) * C64::new(0.5, 0.0);
        let t = 1.0;
        let grid = TimeGrid::new(0.0, t, 1e-3).unwrap();
        let snaps = integrate(&plus_x, &model, GeneratorVariant::Predictive, &grid).unwrap();
        let coh = snaps.last().unwrap()[(0, 1)].re;
        let exact_rate = r * (1.0 - (1.0 - eps * eps).sqrt());
        assert_abs_diff_eq!(coh, 0.5 * (-exact_rate * t).exp(), epsilon = 1e-8);
        // and that rate is within 1% of R eps^2 / 2
        assert!((exact_rate - r * eps * eps / 2.0).abs() / (r * eps * eps / 2.0) < 0.01);
    }

    #[test]
    fn monitoring_rhs_preserves_diagonals_for_hermitian_effects() {
        let set = weak_effect_family(&sigma_z_povm(), 0.6).unwrap();
        let model = MonitoringModel::new(CMat::zeros(2, 2), set, 4.0).unwrap();
        let rho = excited() * C64::new(0.3, 0.0) + ketbra(2, 1, 1) * C64::new(0.7, 0.0);
        let rhs = monitoring_rhs(&rho, &model).unwrap();
        assert!(rhs[(0, 0)].norm() < 1e-12);
        assert!(rhs[(1, 1)].norm() < 1e-12);
    }

    #[test]
    fn retro_rhs_monitoring_preserves_identity() {
        let set = weak_effect_family(&sigma_z_povm(), 0.5).unwrap();
        let model =
            GeneratorModel::Monitoring(MonitoringModel::new(CMat::zeros(2, 2), set, 2.0).unwrap());
        let rhs = retro_rhs(&identity(2), &model, GeneratorVariant::RetrodictiveAdjoint).unwrap();
        assert!(max_abs_entry(&rhs) < 1e-12);
    }

    #[test]
    fn retro_rhs_lindblad_variants_on_identity() {
        let model = GeneratorModel::Lindblad(decay_model(1.7));
        // adjoint of a trace-preserving generator annihilates the identity
        let adj = retro_rhs(&identity(2), &model, GeneratorVariant::RetrodictiveAdjoint).unwrap();
        assert!(max_abs_entry(&adj) < 1e-12);
        // as-printed ordering does not: gamma (b^dag b - b b^dag) =
        // gamma (|e><e| - |g><g|)
        let printed =
            retro_rhs(&identity(2), &model, GeneratorVariant::RetrodictiveAsPrinted).unwrap();
        let expect = (ketbra(2, 0, 0) - ketbra(2, 1, 1)) * C64::new(1.7, 0.0);
        assert!(max_abs_entry(&(printed - expect)) < 1e-12);
    }

    #[test]
    fn retro_variant_difference_is_half_anticommutator() {
        // as-printed minus adjoint = gamma/2 {b^dag b - b b^dag, pi} for one channel
        let gamma = 0.8;
        let model = GeneratorModel::Lindblad(decay_model(gamma));
        let pi = ketbra(2, 0, 0) * C64::new(0.9, 0.0) + ketbra(2, 0, 1) * C64::new(0.2, 0.1)
            + ketbra(2, 1, 0) * C64::new(0.2, -0.1)
            + ketbra(2, 1, 1) * C64::new(0.4, 0.0);
        let adj = retro_rhs(&pi, &model, GeneratorVariant::RetrodictiveAdjoint).unwrap();
        let printed = retro_rhs(&pi, &model, GeneratorVariant::RetrodictiveAsPrinted).unwrap();
        let b = sigma_minus();
        let comm = b.adjoint() * &b - &b * b.adjoint();
        let expect = crate::linalg::anticommutator(&comm, &pi) * C64::new(gamma * 0.5, 0.0);
        assert!(max_abs_entry(&(printed - adj - expect)) < 1e-12);
    }

    #[test]
    fn retro_rhs_rejects_predictive_tag() {
        let model = GeneratorModel::Lindblad(decay_model(1.0));
        assert!(matches!(
            retro_rhs(&identity(2), &model, GeneratorVariant::Predictive),
            Err(QmError::PredictiveVariant)
        ));
    }

    #[test]
    fn zero_generator_keeps_state_constant() {
        let model = GeneratorModel::Lindblad(decay_model(0.0));
        let grid = TimeGrid::new(0.0, 0.5, 1e-2).unwrap();
        let rho = excited();
        for s in integrate(&rho, &model, GeneratorVariant::Predictive, &grid).unwrap() {
            assert!(max_abs_entry(&(s - &rho)) < 1e-15);
        }
    }

    #[test]
    fn unitary_flow_reverses() {
        let h = sigma_x() * C64::new(0.6, 0.0);
        let model = GeneratorModel::Lindblad(LindbladModel::new(h, vec![], 0.0).unwrap());
        let grid = TimeGrid::new(0.0, 1.0, 1e-3).unwrap();
        let rho = excited();
        let fwd = integrate_to_end(&rho, &model, GeneratorVariant::Predictive, &grid).unwrap();
        let back =
            integrate_to_end(&fwd, &model, GeneratorVariant::RetrodictiveAdjoint, &grid).unwrap();
        assert!(max_abs_entry(&(back - rho)) < 1e-7);
    }

    #[test]
    fn adjoint_pairing_keeps_pairing_constant() {
        // Tr(rho(t) pi(t)) is invariant when rho runs forward and pi backward
        let eps = 0.5;
        let r = 2.0;
        let h = sigma_x() * C64::new(0.5, 0.0);
        let set = weak_effect_family(&sigma_z_povm(), eps).unwrap();
        let model =
            GeneratorModel::Monitoring(MonitoringModel::new(h, set, r).unwrap());
        let grid = TimeGrid::new(0.0, 1.0, 1e-3).unwrap();
        let rho0 = excited();
        let pi_final = ketbra(2, 0, 0); // measured projector at the late end
        let rho_snaps = integrate(&rho0, &model, GeneratorVariant::Predictive, &grid).unwrap();
        let pi_snaps =
            integrate(&pi_final, &model, GeneratorVariant::RetrodictiveAdjoint, &grid).unwrap();
        let n = rho_snaps.len();
        let reference = trace(&(&rho_snaps[0] * &pi_snaps[n - 1])).re;
        for i in 0..n {
            // pi_snaps[j] is pi evolved backward by j*dt from the late end
            let v = trace(&(&rho_snaps[i] * &pi_snaps[n - 1 - i])).re;
            assert!((v - reference).abs() < 1e-8, "i = {i}: {v} vs {reference}");
        }
    }

    #[test]
    fn predictive_integration_preserves_state_invariants() {
        let h = sigma_x() * C64::new(1.0, 0.0);
        let model = GeneratorModel::Lindblad(
            LindbladModel::new(h, vec![sigma_minus()], 1.0).unwrap(),
        );
        let grid = TimeGrid::new(0.0, 5.0, 1e-3).unwrap();
        let snaps = integrate(&excited(), &model, GeneratorVariant::Predictive, &grid).unwrap();
        for s in snaps.iter().step_by(500) {
            assert!((trace(s).re - 1.0).abs() < 1e-7);
            assert!(crate::linalg::hermitian_deviation(s) < 1e-9);
            assert!(crate::linalg::min_eigenvalue(s) > -1e-7);
        }
    }

    #[test]
    fn step_guard_rejects_coarse_grids() {
        let model = GeneratorModel::Lindblad(decay_model(10.0));
        let grid = TimeGrid::new(0.0, 1.0, 0.05).unwrap();
        assert!(matches!(
            integrate(&excited(), &model, GeneratorVariant::Predictive, &grid),
            Err(QmError::StepGuard(_))
        ));
    }

    #[test]
    fn time_grid_validation() {
        assert!(TimeGrid::new(0.0, 1.0, 0.1).is_ok());
        assert!(TimeGrid::new(0.0, 1.0, -0.1).is_err());
        assert!(TimeGrid::new(0.0, 1.0, 0.3).is_err()); // not an integer count
        assert!(TimeGrid::new(1.0, 0.0, 0.1).is_err());
        let g = TimeGrid::new(0.0, 1.0, 0.25).unwrap();
        assert_eq!(g.n_steps(), 4);
        assert_eq!(g.times(), vec![0.0, 0.25, 0.5, 0.75, 1.0]);
    }

    #[test]
    fn model_constructors_validate() {
        let non_herm = ketbra(2, 0, 1);
        assert!(LindbladModel::new(non_herm.clone(), vec![], 1.0).is_err());
        assert!(LindbladModel::new(CMat::zeros(2, 2), vec![], -1.0).is_err());
        let biased = crate::operators::EffectSet::new(vec![
            EffectOperator::single("half", identity(2) * C64::new(0.5, 0.0)).unwrap(),
        ])
        .unwrap();
        assert!(matches!(
            MonitoringModel::new(CMat::zeros(2, 2), biased, 1.0),
            Err(QmError::BiasedEffectSet(_))
        ));
    }
}
