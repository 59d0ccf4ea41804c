//! Causality test-bench: collapse-time invariance scans, forward/reversed
//! bias audits, and retrodictive energy-gain profiles.

use crate::evolution::{GeneratorModel, GeneratorVariant, TimeGrid, integrate, integrate_to_end};
use crate::linalg::{hermitian_norm, identity, trace};
use crate::models::number_operator;
use crate::operators::{
    EffectSet, PovmElement, PreparationEnsemble, completeness_defect,
    reversed_completeness_defect,
};
use crate::{CMat, QmError};
use serde::Serialize;

/// Probability tables from a collapse-time scan: the prepared states evolve
/// forward from `t_p`, the probability operators backward from `t_m`, and
/// they meet at each hypothetical collapse time on the grid.
#[derive(Debug, Clone)]
pub struct CollapseScanResult {
    pub t_p: f64,
    pub t_m: f64,
    pub t_c_values: Vec<f64>,
    /// Tr(rho_i(t_c) pi_j(t_c)), indexed `[i][j][c]`.
    pub unnormalized: Vec<Vec<Vec<f64>>>,
    /// Row-normalized over j for each (i, t_c).
    pub normalized: Vec<Vec<Vec<f64>>>,
    /// Max over (i, j) of (max over t_c - min over t_c) of the unnormalized
    /// table; the collapse-time invariance figure of merit.
    pub spread: f64,
    /// Same figure for the normalized table, reported as a diagnostic for
    /// generator orderings that do not preserve the identity backward.
    pub normalized_spread: f64,
}

/// Forward and reversed completeness audit of an effect set.
#[derive(Debug, Clone, Serialize)]
pub struct BiasReport {
    pub forward_defect: f64,
    pub reversed_defect: f64,
    pub verdict: BiasVerdict,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum BiasVerdict {
    UnbiasedAndReversible,
    UnbiasedForwardOnly,
    Biased,
}

const VERDICT_TOL: f64 = 1e-9;

/// Classifies an effect set by its forward and reversed completeness.
pub fn bias_report(set: &EffectSet) -> BiasReport {
    let forward_defect = completeness_defect(set);
    let reversed_defect = reversed_completeness_defect(set);
    let verdict = if forward_defect > VERDICT_TOL {
        BiasVerdict::Biased
    } else if reversed_defect > VERDICT_TOL {
        BiasVerdict::UnbiasedForwardOnly
    } else {
        BiasVerdict::UnbiasedAndReversible
    };
    BiasReport {
        forward_defect,
        reversed_defect,
        verdict,
    }
}

/// Evaluates P(j|i) with the collapse placed at each of `n_c` uniformly
/// spaced times in [t_p, t_m] (a single-point grid sits at t_m). States run
/// forward under the predictive generator; probability operators run
/// backward under the requested retrodictive variant.
#[allow(clippy::too_many_arguments)]
pub fn collapse_time_scan(
    prep: &PreparationEnsemble,
    povm: &[PovmElement],
    model: &GeneratorModel,
    variant: GeneratorVariant,
    t_p: f64,
    t_m: f64,
    n_c: usize,
    dt: f64,
) -> Result<CollapseScanResult, QmError> {
    if !variant.is_retrodictive() {
        return Err(QmError::PredictiveVariant);
    }
    if t_m < t_p {
        return Err(QmError::InvalidGrid(format!("t_m = {t_m} < t_p = {t_p}")));
    }
    if n_c == 0 {
        return Err(QmError::InvalidParameter("need at least one collapse time".into()));
    }
    let d = model.dim();
    let mut povm_sum = CMat::zeros(d, d);
    for p in povm {
        if p.dim() != d {
            return Err(QmError::DimensionMismatch(d, p.dim()));
        }
        povm_sum += p.mat();
    }
    let povm_defect = hermitian_norm(&(povm_sum - identity(d)));
    if povm_defect > VERDICT_TOL {
        return Err(QmError::IncompletePovm(povm_defect));
    }

    let span = t_m - t_p;
    let t_c_values: Vec<f64> = if n_c == 1 {
        vec![t_m]
    } else {
        (0..n_c)
            .map(|c| t_p + span * c as f64 / (n_c - 1) as f64)
            .collect()
    };
    if dt <= 0.0 {
        return Err(QmError::InvalidGrid(format!("dt = {dt} must be positive")));
    }
    // Each forward and backward leg is integrated on its own grid, with the
    // step shrunk to fit the leg exactly (never stretched past `dt`).
    let leg = |op: &CMat, len: f64, var: GeneratorVariant| -> Result<CMat, QmError> {
        if len <= 0.0 {
            return Ok(op.clone());
        }
        let n = (len / dt).ceil().max(1.0);
        integrate_to_end(op, model, var, &TimeGrid::new(0.0, len, len / n)?)
    };

    let n_i = prep.states().len();
    let n_j = povm.len();
    let mut unnormalized = vec![vec![vec![0.0; n_c]; n_j]; n_i];
    let mut normalized = vec![vec![vec![0.0; n_c]; n_j]; n_i];
    for (c, &t_c) in t_c_values.iter().enumerate() {
        let forward: Vec<CMat> = prep
            .states()
            .iter()
            .map(|rho| leg(rho.mat(), t_c - t_p, GeneratorVariant::Predictive))
            .collect::<Result<_, _>>()?;
        let backward: Vec<CMat> = povm
            .iter()
            .map(|pi| leg(pi.mat(), t_m - t_c, variant))
            .collect::<Result<_, _>>()?;
        for i in 0..n_i {
            let row: Vec<f64> = (0..n_j)
                .map(|j| trace(&(&forward[i] * &backward[j])).re)
                .collect();
            let row_sum: f64 = row.iter().sum();
            for j in 0..n_j {
                unnormalized[i][j][c] = row[j];
                normalized[i][j][c] = if row_sum.abs() > 1e-300 {
                    row[j] / row_sum
                } else {
                    0.0
                };
            }
        }
    }

    let spread_of = |table: &Vec<Vec<Vec<f64>>>| -> f64 {
        let mut worst: f64 = 0.0;
        for rows in table {
            for series in rows {
                let max = series.iter().copied().fold(f64::NEG_INFINITY, f64::max);
                let min = series.iter().copied().fold(f64::INFINITY, f64::min);
                worst = worst.max(max - min);
            }
        }
        worst
    };
    let spread = spread_of(&unnormalized);
    let normalized_spread = spread_of(&normalized);
    Ok(CollapseScanResult {
        t_p,
        t_m,
        t_c_values,
        unnormalized,
        normalized,
        spread,
        normalized_spread,
    })
}

/// Mean photon number Tr(n pi)/Tr(pi) of the backward-evolved probability
/// operator, one value per grid point, newest time (t_m) first and oldest
/// last. Uses the adjoint retrodictive variant.
pub fn retro_energy_profile(
    cavity: &crate::evolution::LindbladModel,
    pi_m: &PovmElement,
    grid: &TimeGrid,
) -> Result<Vec<f64>, QmError> {
    let d = cavity.dim();
    if d < 8 {
        return Err(QmError::TruncationTooSmall(d, 8));
    }
    if pi_m.dim() != d {
        return Err(QmError::DimensionMismatch(d, pi_m.dim()));
    }
    let number = number_operator(d);
    let model = GeneratorModel::Lindblad(cavity.clone());
    let snaps = integrate(
        pi_m.mat(),
        &model,
        GeneratorVariant::RetrodictiveAdjoint,
        grid,
    )?;
    snaps
        .iter()
        .map(|pi| {
            let norm = trace(pi).re;
            if norm < 1e-12 {
                return Err(QmError::DegenerateMeasurement(norm));
            }
            Ok(trace(&(&number * pi)).re / norm)
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::evolution::{LindbladModel, MonitoringModel};
    use crate::linalg::ketbra;
    use crate::models::{amplitude_damping_effects, damped_cavity};
    use crate::operators::{
        DensityOperator, born_probability, sigma_z_povm, weak_effect_family,
    };
    use crate::C64;
    use approx::assert_abs_diff_eq;

    fn two_level_prep() -> PreparationEnsemble {
        PreparationEnsemble::new(
            vec![
                DensityOperator::basis_state(2, 0).unwrap(),
                DensityOperator::basis_state(2, 1).unwrap(),
            ],
            vec![0.5, 0.5],
        )
        .unwrap()
    }

    fn monitoring_model(eps: f64, rate: f64, omega: f64) -> GeneratorModel {
        let h = (ketbra(2, 0, 1) + ketbra(2, 1, 0)) * C64::new(omega / 2.0, 0.0);
        let set = weak_effect_family(&sigma_z_povm(), eps).unwrap();
        GeneratorModel::Monitoring(MonitoringModel::new(h, set, rate).unwrap())
    }

    #[test]
    fn bias_report_classifies_damping_pair() {
        let report = bias_report(&amplitude_damping_effects(0.36).unwrap());
        assert!(report.forward_defect < 1e-10);
        assert_abs_diff_eq!(report.reversed_defect, 0.36, epsilon = 1e-12);
        assert_eq!(report.verdict, BiasVerdict::UnbiasedForwardOnly);
    }

    #[test]
    fn bias_report_classifies_weak_family() {
        for eps in [0.0, 0.4, 1.0] {
            let report = bias_report(&weak_effect_family(&sigma_z_povm(), eps).unwrap());
            assert!(report.forward_defect < 1e-12);
            assert!(report.reversed_defect < 1e-12);
            assert_eq!(report.verdict, BiasVerdict::UnbiasedAndReversible);
        }
    }

    #[test]
    fn bias_report_flags_deleted_outcome() {
        let biased = amplitude_damping_effects(0.36)
            .unwrap()
            .without_outcome("click")
            .unwrap();
        let report = bias_report(&biased);
        assert_abs_diff_eq!(report.forward_defect, 0.36, epsilon = 1e-12);
        assert_eq!(report.verdict, BiasVerdict::Biased);
    }

    #[test]
    fn single_point_scan_reduces_to_born_probabilities() {
        let model = monitoring_model(0.5, 2.0, 1.0);
        let prep = two_level_prep();
        let povm = sigma_z_povm();
        let scan = collapse_time_scan(
            &prep,
            &povm,
            &model,
            GeneratorVariant::RetrodictiveAdjoint,
            0.0,
            1.0,
            1,
            1e-3,
        )
        .unwrap();
        assert_eq!(scan.t_c_values, vec![1.0]);
        let fine = TimeGrid::new(0.0, 1.0, 1e-3).unwrap();
        for (i, rho) in prep.states().iter().enumerate() {
            let evolved = integrate(rho.mat(), &model, GeneratorVariant::Predictive, &fine)
                .unwrap()
                .pop()
                .unwrap();
            let evolved = DensityOperator::new(evolved).unwrap();
            for (j, pi) in povm.iter().enumerate() {
                let direct = born_probability(&evolved, pi).unwrap();
                assert_abs_diff_eq!(scan.unnormalized[i][j][0], direct, epsilon = 1e-12);
            }
        }
    }

    #[test]
    fn monitoring_scan_is_collapse_time_invariant() {
        // gamma_eff * span = 1 with eps = 0.8, R = 2
        let model = monitoring_model(0.8, 2.0, 1.0);
        let scan = collapse_time_scan(
            &two_level_prep(),
            &sigma_z_povm(),
            &model,
            GeneratorVariant::RetrodictiveAdjoint,
            0.0,
            1.25,
            11,
            1e-3,
        )
        .unwrap();
        assert!(scan.spread <= 1e-8, "spread = {:e}", scan.spread);
        // normalized rows sum to one at every collapse time
        for i in 0..2 {
            for c in 0..scan.t_c_values.len() {
                let sum: f64 = (0..2).map(|j| scan.normalized[i][j][c]).sum();
                assert!((sum - 1.0).abs() < 1e-9);
            }
        }
    }

    #[test]
    fn halving_dt_shrinks_the_residual_spread() {
        // Rapid projective monitoring over a short window whose collapse grid
        // does not line up with dt, so the legs carry visible step error.
        let model = monitoring_model(1.0, 60.0, 1.0);
        let run = |dt: f64| {
            collapse_time_scan(
                &two_level_prep(),
                &sigma_z_povm(),
                &model,
                GeneratorVariant::RetrodictiveAdjoint,
                0.0,
                1.0 / 60.0,
                11,
                dt,
            )
            .unwrap()
            .spread
        };
        let coarse = run(1e-3);
        let fine = run(5e-4);
        assert!(coarse <= 1e-8, "spread = {coarse:e}");
        assert!(
            coarse >= 8.0 * fine,
            "4th-order convergence not observed: {coarse:e} vs {fine:e}"
        );
    }

    #[test]
    fn lindblad_adjoint_invariant_as_printed_not() {
        let h = (ketbra(2, 0, 1) + ketbra(2, 1, 0)) * C64::new(0.5, 0.0);
        let model = GeneratorModel::Lindblad(
            LindbladModel::new(h, vec![ketbra(2, 1, 0)], 1.0).unwrap(),
        );
        let adjoint = collapse_time_scan(
            &two_level_prep(),
            &sigma_z_povm(),
            &model,
            GeneratorVariant::RetrodictiveAdjoint,
            0.0,
            1.0,
            11,
            1e-3,
        )
        .unwrap();
        assert!(adjoint.spread <= 1e-8, "spread = {:e}", adjoint.spread);

        let printed = collapse_time_scan(
            &two_level_prep(),
            &sigma_z_povm(),
            &model,
            GeneratorVariant::RetrodictiveAsPrinted,
            0.0,
            1.0,
            11,
            1e-3,
        )
        .unwrap();
        assert!(printed.spread > 1e-3, "spread = {:e}", printed.spread);
    }

    #[test]
    fn scan_rejects_bad_inputs() {
        let model = monitoring_model(0.5, 2.0, 1.0);
        let prep = two_level_prep();
        // predictive variant
        assert!(matches!(
            collapse_time_scan(
                &prep,
                &sigma_z_povm(),
                &model,
                GeneratorVariant::Predictive,
                0.0,
                1.0,
                3,
                1e-3
            ),
            Err(QmError::PredictiveVariant)
        ));
        // incomplete POVM
        let biased = vec![PovmElement::new("+", ketbra(2, 0, 0)).unwrap()];
        assert!(matches!(
            collapse_time_scan(
                &prep,
                &biased,
                &model,
                GeneratorVariant::RetrodictiveAdjoint,
                0.0,
                1.0,
                3,
                1e-3
            ),
            Err(QmError::IncompletePovm(_))
        ));
    }

    #[test]
    fn identity_retro_profile_is_constant() {
        let cavity = damped_cavity(8, 1.0).unwrap();
        let pi = PovmElement::new("any", crate::linalg::identity(8)).unwrap();
        let grid = TimeGrid::new(0.0, 0.5, 1e-3).unwrap();
        let profile = retro_energy_profile(&cavity, &pi, &grid).unwrap();
        let expect = profile[0];
        for v in &profile {
            assert!((v - expect).abs() < 1e-9);
        }
    }

    #[test]
    fn vacuum_detection_profile_gains_energy_backward() {
        let cavity = damped_cavity(12, 1.0).unwrap();
        let pi = PovmElement::new("vacuum", ketbra(12, 0, 0)).unwrap();
        let grid = TimeGrid::new(0.0, 1.0, 1e-3).unwrap();
        let profile = retro_energy_profile(&cavity, &pi, &grid).unwrap();
        for w in profile.windows(2) {
            assert!(w[1] >= w[0] - 1e-9, "profile decreased backward in time");
        }
        assert!(profile.last().unwrap() > &0.1);
    }

    #[test]
    fn zero_duration_profile_is_initial_value() {
        let cavity = damped_cavity(8, 1.0).unwrap();
        let pi = PovmElement::new("one", ketbra(8, 1, 1)).unwrap();
        let grid = TimeGrid::new(0.0, 0.0, 1e-3).unwrap();
        let profile = retro_energy_profile(&cavity, &pi, &grid).unwrap();
        assert_eq!(profile.len(), 1);
        assert_abs_diff_eq!(profile[0], 1.0, epsilon = 1e-12);
    }

    #[test]
    fn retro_profile_guards() {
        let small = damped_cavity(4, 1.0).unwrap();
        let pi = PovmElement::new("x", crate::linalg::identity(4)).unwrap();
        let grid = TimeGrid::new(0.0, 0.1, 1e-3).unwrap();
        assert!(matches!(
            retro_energy_profile(&small, &pi, &grid),
            Err(QmError::TruncationTooSmall(4, 8))
        ));
        let cavity = damped_cavity(8, 1.0).unwrap();
        let zero = PovmElement::new("zero", crate::CMat::zeros(8, 8)).unwrap();
        assert!(matches!(
            retro_energy_profile(&cavity, &zero, &grid),
            Err(QmError::DegenerateMeasurement(_))
        ));
    }
}
