//! Built-in verification suite behind the `selfcheck` command: ten
//! independent checks of the library's core claims, from measurement
//! unbiasedness through output byte-determinism. Each check reports pass/fail
//! with a one-line diagnostic; nothing here mutates global state.

use crate::causality::{BiasVerdict, bias_report, collapse_time_scan, retro_energy_profile};
use crate::cli::{self, GridConfig, ScenarioConfig};
use crate::evolution::{GeneratorModel, GeneratorVariant, TimeGrid, integrate};
use crate::linalg::{ketbra, max_abs_entry, trace_distance};
use crate::models::{
    CvOutcomeGrid, amplitude_damping_effects, cv_monitor, damped_cavity, photodetector_mode,
    two_level_monitor,
};
use crate::operators::{
    DensityOperator, PovmElement, PreparationEnsemble, apply_effect, born_probability,
    completeness_defect, maximally_mixed, povm_from_effects, sigma_z_povm, weak_effect_family,
};
use crate::rng::stream_seed;
use crate::trajectories::{
    ensemble_average, event_outcome_marginal, simulate_trajectory, zeno_survival,
};
use serde_json::json;
use std::time::Instant;

#[derive(Debug, Clone)]
pub struct CriterionOutcome {
    pub index: usize,
    pub label: &'static str,
    pub passed: bool,
    pub detail: String,
}

type CheckResult = Result<(bool, String), String>;

fn criterion(
    index: usize,
    label: &'static str,
    body: impl FnOnce() -> CheckResult,
) -> CriterionOutcome {
    let (passed, detail) = match body() {
        Ok((passed, detail)) => (passed, detail),
        Err(e) => (false, format!("errored: {e}")),
    };
    CriterionOutcome { index, label, passed, detail }
}

fn s<E: std::fmt::Display>(e: E) -> String {
    e.to_string()
}

fn check_unbiasedness() -> CheckResult {
    let mut worst: f64 = 0.0;
    let monitors = [
        ("two_level_monitor", two_level_monitor(1.0, 0.3, 20.0).map_err(s)?),
        ("photodetector", photodetector_mode(8, 1.0).map_err(s)?),
        (
            "cv_monitor",
            cv_monitor(&CvOutcomeGrid::new(4.0, 0.5, 16, 1).map_err(s)?, 0.5, 1.0).map_err(s)?,
        ),
    ];
    for (name, m) in &monitors {
        let defect = completeness_defect(m.effects());
        worst = worst.max(defect);
        if defect > 1e-10 {
            return Ok((false, format!("{name} defect = {defect:.3e} > 1e-10")));
        }
    }
    let damping = amplitude_damping_effects(0.36).map_err(s)?;
    let defect = completeness_defect(&damping);
    worst = worst.max(defect);
    if defect > 1e-10 {
        return Ok((false, format!("amplitude_damping defect = {defect:.3e}")));
    }
    let mut worst_family: f64 = 0.0;
    for eps in [0.0, 0.1, 0.5, 1.0] {
        let family = weak_effect_family(&sigma_z_povm(), eps).map_err(s)?;
        let defect = completeness_defect(&family);
        worst_family = worst_family.max(defect);
        if defect > 1e-12 {
            return Ok((false, format!("weak family defect = {defect:.3e} at eps = {eps}")));
        }
    }
    Ok((
        true,
        format!("worst model defect {worst:.2e}, worst family defect {worst_family:.2e}"),
    ))
}

fn check_photodetection() -> CheckResult {
    let model = photodetector_mode(4, 1.0).map_err(s)?;
    let povm = povm_from_effects(model.effects()).map_err(s)?;
    let click_pi = povm
        .iter()
        .find(|pi| pi.outcome() == "click")
        .ok_or("no click outcome")?;
    let click_effect = model
        .effects()
        .effects()
        .iter()
        .find(|e| e.outcome() == "click")
        .ok_or("no click effect")?;
    let one_photon = DensityOperator::basis_state(4, 1).map_err(s)?;
    let p_click = born_probability(&one_photon, click_pi).map_err(s)?;
    if (p_click - 1.0).abs() > 1e-12 {
        return Ok((false, format!("click probability = {p_click}")));
    }
    let (post, _) = apply_effect(&one_photon, click_effect).map_err(s)?;
    let vacuum_dev = max_abs_entry(&(post.mat() - ketbra(4, 0, 0)));
    if vacuum_dev > 1e-12 {
        return Ok((false, format!("post-click state off vacuum by {vacuum_dev:.3e}")));
    }
    let p_again = born_probability(&post, click_pi).map_err(s)?;
    if p_again > 1e-12 {
        return Ok((false, format!("second click probability = {p_again:.3e}")));
    }
    Ok((true, format!("click prob 1, vacuum dev {vacuum_dev:.1e}, re-click {p_again:.1e}")))
}

fn check_ensemble_vs_master_equation() -> CheckResult {
    let start = Instant::now();
    let model = two_level_monitor(1.0, 0.3, 20.0).map_err(s)?;
    let rho0 = DensityOperator::basis_state(2, 0).map_err(s)?;
    let grid = TimeGrid::new(0.0, 5.0, 0.1).map_err(s)?;
    let ens = ensemble_average(&rho0, &model, &grid, 5000, 20240803).map_err(s)?;

    let fine = TimeGrid::new(0.0, 5.0, 1e-3).map_err(s)?;
    let gen = GeneratorModel::Monitoring(model);
    let me = integrate(rho0.mat(), &gen, GeneratorVariant::Predictive, &fine).map_err(s)?;
    let mut worst = (0.0_f64, 0.0_f64);
    for k in 0..=grid.n_steps() {
        let dist = trace_distance(&ens.mean[k], &me[k * 100]);
        let tol = (3.0 * ens.aggregate_stderr(k)).max(5e-2);
        if dist > worst.0 {
            worst = (dist, tol);
        }
        if dist > tol {
            return Ok((false, format!("point {k}: distance {dist:.3e} > {tol:.3e}")));
        }
    }
    let elapsed = start.elapsed().as_secs_f64();
    if elapsed > 60.0 {
        return Ok((false, format!("took {elapsed:.1}s > 60s")));
    }
    Ok((
        true,
        format!("worst distance {:.2e} (tol {:.2e}), {elapsed:.1}s", worst.0, worst.1),
    ))
}

fn check_collapse_time_invariance() -> CheckResult {
    let model = GeneratorModel::Monitoring(two_level_monitor(1.0, 1.0, 60.0).map_err(s)?);
    let prep = PreparationEnsemble::new(
        vec![
            DensityOperator::basis_state(2, 0).map_err(s)?,
            DensityOperator::basis_state(2, 1).map_err(s)?,
        ],
        vec![0.5, 0.5],
    )
    .map_err(s)?;
    let run = |dt: f64| -> Result<f64, String> {
        Ok(collapse_time_scan(
            &prep,
            &sigma_z_povm(),
            &model,
            GeneratorVariant::RetrodictiveAdjoint,
            0.0,
            1.0 / 60.0,
            11,
            dt,
        )
        .map_err(s)?
        .spread)
    };
    let coarse = run(1e-3)?;
    let fine = run(5e-4)?;
    if coarse > 1e-8 {
        return Ok((false, format!("spread {coarse:.3e} > 1e-8 at dt = 1e-3")));
    }
    if coarse < 8.0 * fine {
        return Ok((false, format!("spread {coarse:.3e} -> {fine:.3e}: ratio < 8")));
    }
    Ok((true, format!("spread {coarse:.2e} -> {fine:.2e} on dt halving")))
}

fn check_irreversibility_witness() -> CheckResult {
    let report = bias_report(&amplitude_damping_effects(0.36).map_err(s)?);
    if report.forward_defect > 1e-10 {
        return Ok((false, format!("forward defect {:.3e}", report.forward_defect)));
    }
    if (report.reversed_defect - 0.36).abs() > 1e-12 {
        return Ok((false, format!("reversed defect {} != 0.36", report.reversed_defect)));
    }
    if report.verdict != BiasVerdict::UnbiasedForwardOnly {
        return Ok((false, format!("verdict {:?}", report.verdict)));
    }
    Ok((
        true,
        format!(
            "forward {:.1e}, reversed {}, unbiased-forward-only",
            report.forward_defect, report.reversed_defect
        ),
    ))
}

fn check_weak_rapid_limit() -> CheckResult {
    let gamma_eff = 0.5;
    let omega = 1.0;
    let epsilons = [0.2, 0.1, 0.05, 0.025];
    let n_traj = 2000;
    let grid = TimeGrid::new(0.0, 2.0, 0.1).map_err(s)?;
    let mut ket = nalgebra::DVector::<crate::C64>::zeros(2);
    ket[0] = crate::C64::new(std::f64::consts::FRAC_1_SQRT_2, 0.0);
    ket[1] = ket[0];
    let rho0 = DensityOperator::from_ket(&ket).map_err(s)?;

    // fixed-rate dephasing reference with the same Hamiltonian
    let h = (ketbra(2, 0, 1) + ketbra(2, 1, 0)) * crate::C64::new(omega / 2.0, 0.0);
    let sz = ketbra(2, 0, 0) - ketbra(2, 1, 1);
    let reference = crate::evolution::LindbladModel::new(h, vec![sz], gamma_eff / 2.0)
        .map_err(s)?;
    let fine = TimeGrid::new(0.0, 2.0, 1e-3).map_err(s)?;
    let ref_snaps = integrate(
        rho0.mat(),
        &GeneratorModel::Lindblad(reference),
        GeneratorVariant::Predictive,
        &fine,
    )
    .map_err(s)?;

    let mut jump_sizes = Vec::new();
    for (e, &eps) in epsilons.iter().enumerate() {
        let rate = 2.0 * gamma_eff / (eps * eps);
        let model = two_level_monitor(omega, eps, rate).map_err(s)?;
        let sub_seed = stream_seed(777, e as u64);
        let ens = ensemble_average(&rho0, &model, &grid, n_traj, sub_seed).map_err(s)?;
        for (k, mean) in ens.mean.iter().enumerate() {
            let diff = (mean[(0, 1)] - ref_snaps[k * 100][(0, 1)]).norm();
            let tol = 3.0 * ens.stderr[k][(0, 1)];
            if diff > 1e-12 && diff > tol {
                return Ok((
                    false,
                    format!("eps {eps}, point {k}: coherence off by {diff:.3e} > {tol:.3e}"),
                ));
            }
        }
        let mut total = 0.0;
        let mut count = 0usize;
        for i in 0..300u64 {
            let traj = simulate_trajectory(&rho0, &model, &grid, stream_seed(sub_seed, i))
                .map_err(s)?;
            for event in &traj.events {
                total += event.jump_size;
                count += 1;
            }
        }
        jump_sizes.push(total / count as f64);
    }
    let xs: Vec<f64> = epsilons.iter().map(|e| e.ln()).collect();
    let ys: Vec<f64> = jump_sizes.iter().map(|j: &f64| j.ln()).collect();
    let xm = xs.iter().sum::<f64>() / xs.len() as f64;
    let ym = ys.iter().sum::<f64>() / ys.len() as f64;
    let slope = xs
        .iter()
        .zip(&ys)
        .map(|(x, y)| (x - xm) * (y - ym))
        .sum::<f64>()
        / xs.iter().map(|x| (x - xm) * (x - xm)).sum::<f64>();
    if (slope - 1.0).abs() > 0.1 {
        return Ok((false, format!("jump-size slope {slope:.3} outside 1.0 +/- 0.1")));
    }
    Ok((true, format!("slope {slope:.3}, coherence within 3 stderr of the reference")))
}

fn check_zeno() -> CheckResult {
    let omega = 1.0;
    let t = std::f64::consts::PI / omega;
    let (strong, _) = zeno_survival(omega, 1.0, 100.0 * omega, t, 2000, 31).map_err(s)?;
    if strong < 0.9 {
        return Ok((false, format!("survival {strong:.3} < 0.9 at eps = 1, R = 100")));
    }
    let mut last: Option<(f64, f64)> = None;
    for (e, &eps) in [0.0, 0.25, 0.5, 0.75, 1.0].iter().enumerate() {
        let (surv, se) =
            zeno_survival(omega, eps, 20.0 * omega, t, 2000, stream_seed(32, e as u64))
                .map_err(s)?;
        if let Some((prev, prev_se)) = last {
            let slack = 3.0 * (se * se + prev_se * prev_se).sqrt();
            if surv < prev - slack {
                return Ok((
                    false,
                    format!("survival dropped {prev:.3} -> {surv:.3} at eps = {eps}"),
                ));
            }
        }
        last = Some((surv, se));
    }
    Ok((true, format!("survival {strong:.3} at eps = 1, sweep nondecreasing")))
}

fn check_no_retro_signaling() -> CheckResult {
    let model = two_level_monitor(0.0, 0.5, 4.0).map_err(s)?;
    let rho0 = maximally_mixed(2).map_err(s)?;
    let n = 10_000;
    let truncated = event_outcome_marginal(&rho0, &model, 0, 1, n, 100, None).map_err(s)?;
    let continued = event_outcome_marginal(&rho0, &model, 0, 4, n, 200, None).map_err(s)?;
    let diff = (truncated.frequency("+") - continued.frequency("+")).abs();
    let sigma = (truncated.binomial_stderr("+").powi(2) + continued.binomial_stderr("+").powi(2))
        .sqrt();
    if diff > 3.0 * sigma {
        return Ok((false, format!("unbiased marginal shifted by {diff:.4} > 3 stderr")));
    }
    let biased = event_outcome_marginal(&rho0, &model, 0, 4, n, 200, Some("-")).map_err(s)?;
    let bias_diff = (truncated.frequency("+") - biased.frequency("+")).abs();
    let bias_sigma = (truncated.binomial_stderr("+").powi(2)
        + biased.binomial_stderr("+").powi(2))
    .sqrt();
    if bias_diff <= 5.0 * bias_sigma {
        return Ok((
            false,
            format!("post-selected marginal shifted by only {bias_diff:.4}"),
        ));
    }
    Ok((
        true,
        format!(
            "unbiased shift {:.1} stderr, post-selected shift {:.1} stderr",
            diff / sigma,
            bias_diff / bias_sigma
        ),
    ))
}

fn check_retro_energy_gain() -> CheckResult {
    // window short enough that the retrodicted vacuum effect stays far from
    // the truncation edge; longer windows shift the profile at visible order
    let grid = TimeGrid::new(0.0, 0.25, 1e-3).map_err(s)?;
    let profile_at = |dim: usize| -> Result<Vec<f64>, String> {
        let cavity = damped_cavity(dim, 1.0).map_err(s)?;
        let pi = PovmElement::new("vacuum", ketbra(dim, 0, 0)).map_err(s)?;
        retro_energy_profile(&cavity, &pi, &grid).map_err(s)
    };
    let at12 = profile_at(12)?;
    for w in at12.windows(2) {
        if w[1] < w[0] - 1e-9 {
            return Ok((false, format!("profile decreased by {:.3e}", w[0] - w[1])));
        }
    }
    let at16 = profile_at(16)?;
    let change = at12
        .iter()
        .zip(&at16)
        .map(|(a, b)| (a - b).abs())
        .fold(0.0_f64, f64::max);
    if change > 1e-6 {
        return Ok((false, format!("truncation 12 -> 16 moved the profile by {change:.3e}")));
    }
    Ok((
        true,
        format!("monotone backward, truncation change {change:.1e}"),
    ))
}

fn determinism_configs(dir: &std::path::Path) -> Vec<ScenarioConfig> {
    let stem = |name: &str| dir.join(name).to_string_lossy().into_owned();
    let mk = |scenario: &str, model: &str, params: serde_json::Value, grid: GridConfig,
              n_traj: usize, name: &str| {
        cli::parse_config(
            json!({
                "scenario": scenario,
                "model": { "name": model, "params": params },
                "grid": { "t0": grid.t0, "t1": grid.t1, "dt": grid.dt },
                "n_traj": n_traj,
                "master_seed": 9,
                "output": { "path": stem(name) },
            })
            .to_string()
            .as_bytes(),
        )
        .expect("self-check config is valid")
    };
    vec![
        mk(
            "trajectory",
            "two_level_monitor",
            json!({"epsilon": 0.5, "rate": 10.0}),
            GridConfig { t0: 0.0, t1: 1.0, dt: 0.05 },
            1,
            "trajectory",
        ),
        mk(
            "ensemble",
            "two_level_monitor",
            json!({"epsilon": 0.5, "rate": 10.0, "me_dt": 0.002}),
            GridConfig { t0: 0.0, t1: 1.0, dt: 0.1 },
            50,
            "ensemble",
        ),
        mk(
            "collapse-scan",
            "two_level_monitor",
            json!({"epsilon": 0.8, "rate": 2.0, "n_c": 5}),
            GridConfig { t0: 0.0, t1: 0.5, dt: 1e-3 },
            1,
            "collapse",
        ),
        mk(
            "weak-limit",
            "two_level_monitor",
            json!({"epsilons": [0.2, 0.1], "gamma_eff": 0.5, "me_dt": 1e-3}),
            GridConfig { t0: 0.0, t1: 1.0, dt: 0.1 },
            100,
            "weak",
        ),
        mk(
            "zeno",
            "two_level_monitor",
            json!({"rate": 20.0, "epsilons": [0.0, 1.0]}),
            GridConfig { t0: 0.0, t1: 3.0, dt: 3.0 },
            200,
            "zeno",
        ),
        mk(
            "bias-report",
            "amplitude_damping",
            json!({"p": 0.36}),
            GridConfig::default(),
            1,
            "bias",
        ),
        mk(
            "retro-energy",
            "damped_cavity",
            json!({"dim": 8, "gamma": 1.0}),
            GridConfig { t0: 0.0, t1: 0.5, dt: 1e-3 },
            1,
            "retro",
        ),
    ]
}

fn check_determinism() -> CheckResult {
    let dir = tempfile::tempdir().map_err(s)?;
    for cfg in determinism_configs(dir.path()) {
        let first = cli::run(&cfg).map_err(s)?;
        let csv1 = std::fs::read(first.csv_path.as_ref().unwrap()).map_err(s)?;
        let json1 = std::fs::read(first.json_path.as_ref().unwrap()).map_err(s)?;
        let second = cli::run(&cfg).map_err(s)?;
        let csv2 = std::fs::read(second.csv_path.as_ref().unwrap()).map_err(s)?;
        let json2 = std::fs::read(second.json_path.as_ref().unwrap()).map_err(s)?;
        if csv1 != csv2 || json1 != json2 {
            return Ok((
                false,
                format!("scenario {:?} produced different bytes on rerun", cfg.scenario),
            ));
        }
    }
    Ok((true, "all seven scenarios byte-identical on rerun".into()))
}

/// Runs every check and reports one outcome per criterion, in order.
pub fn run_selfcheck() -> Vec<CriterionOutcome> {
    vec![
        criterion(1, "unbiased effect sets", check_unbiasedness),
        criterion(2, "single-photon detection", check_photodetection),
        criterion(3, "ensemble mean vs master equation", check_ensemble_vs_master_equation),
        criterion(4, "collapse-time invariance", check_collapse_time_invariance),
        criterion(5, "irreversibility witness", check_irreversibility_witness),
        criterion(6, "weak-rapid limit", check_weak_rapid_limit),
        criterion(7, "Zeno regime", check_zeno),
        criterion(8, "no retro-signaling", check_no_retro_signaling),
        criterion(9, "retrodictive energy gain", check_retro_energy_gain),
        criterion(10, "byte determinism", check_determinism),
    ]
}
