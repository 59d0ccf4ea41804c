//! Scenario runner: JSON config in, plot-ready CSV plus a JSON summary out.
//!
//! Outputs are byte-deterministic: (config, master_seed) fully determines
//! every emitted byte, independent of thread count. Exit codes: 2 = config
//! error, 3 = numerical guard tripped, 4 = self-check violation.

use crate::causality::{bias_report, collapse_time_scan, retro_energy_profile};
use crate::evolution::{
    GeneratorModel, GeneratorVariant, LindbladModel, MonitoringModel, TimeGrid, integrate,
};
use crate::linalg::{ketbra, trace, trace_distance};
use crate::models::{
    CvOutcomeGrid, amplitude_damping_effects, cv_monitor, damped_cavity, photodetector_mode,
    two_level_monitor,
};
use crate::operators::{
    DensityOperator, EffectSet, PovmElement, PreparationEnsemble, maximally_mixed,
    povm_from_effects, sigma_z_povm,
};
use crate::rng::stream_seed;
use crate::trajectories::{ensemble_average, jump_size_stats, simulate_trajectory, zeno_survival};
use crate::{C64, QmError};
use clap::{Parser, Subcommand};
use serde::{Deserialize, Serialize};
use serde_json::{Value, json};
use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::path::PathBuf;

pub const VERSION: &str = env!("CARGO_PKG_VERSION");

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Scenario {
    Trajectory,
    Ensemble,
    CollapseScan,
    WeakLimit,
    Zeno,
    BiasReport,
    RetroEnergy,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ModelConfig {
    pub name: String,
    #[serde(default)]
    pub params: BTreeMap<String, Value>,
}

#[derive(Debug, Clone, Copy, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GridConfig {
    pub t0: f64,
    pub t1: f64,
    pub dt: f64,
}

impl Default for GridConfig {
    fn default() -> Self {
        GridConfig { t0: 0.0, t1: 1.0, dt: 1e-3 }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum OutputFormat {
    Csv,
    Json,
    #[default]
    Both,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct OutputConfig {
    /// Stem for the emitted files; `.csv` / `.json` are appended.
    pub path: String,
    #[serde(default)]
    pub format: OutputFormat,
}

fn default_n_traj() -> usize {
    1000
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ScenarioConfig {
    pub scenario: Scenario,
    pub model: ModelConfig,
    #[serde(default)]
    pub grid: GridConfig,
    #[serde(default = "default_n_traj")]
    pub n_traj: usize,
    #[serde(default)]
    pub master_seed: u64,
    pub output: OutputConfig,
}

#[derive(Debug, thiserror::Error)]
pub enum CliError {
    #[error("config: {0}")]
    Config(String),
    #[error("numerical guard: {0}")]
    Numerical(QmError),
    #[error("self-check failed: {0}")]
    SelfCheck(String),
    #[error("io: {0}")]
    Io(#[from] std::io::Error),
}

impl CliError {
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Config(_) | CliError::Io(_) => 2,
            CliError::Numerical(_) => 3,
            CliError::SelfCheck(_) => 4,
        }
    }
}

/// Integrator guards become exit code 3; everything else reaching the CLI
/// from the library is a configuration problem.
fn numerical(e: QmError) -> CliError {
    match e {
        QmError::StepGuard(_) | QmError::TraceDrift(_) | QmError::NonFinite => {
            CliError::Numerical(e)
        }
        other => CliError::Config(other.to_string()),
    }
}

fn config_err(e: impl std::fmt::Display) -> CliError {
    CliError::Config(e.to_string())
}

/// Parses a scenario config from raw JSON bytes.
pub fn parse_config(bytes: &[u8]) -> Result<ScenarioConfig, CliError> {
    serde_json::from_slice(bytes).map_err(config_err)
}

/// Parses one `--param key=value` override. The value is taken as JSON when
/// it parses as JSON (numbers, booleans, arrays) and as a bare string
/// otherwise, so `--param epsilon=0.3` and `--param detect=vacuum` both work.
pub fn parse_param_override(s: &str) -> Result<(String, Value), CliError> {
    let (key, raw) = s
        .split_once('=')
        .ok_or_else(|| CliError::Config(format!("--param needs key=value, got {s:?}")))?;
    if key.is_empty() {
        return Err(CliError::Config("--param key is empty".into()));
    }
    let value = serde_json::from_str(raw).unwrap_or_else(|_| Value::String(raw.to_string()));
    Ok((key.to_string(), value))
}

// ---------------------------------------------------------------------------
// parameter map access

fn fparam(params: &BTreeMap<String, Value>, key: &str, default: f64) -> Result<f64, CliError> {
    match params.get(key) {
        None => Ok(default),
        Some(v) => {
            let x = v
                .as_f64()
                .ok_or_else(|| CliError::Config(format!("param {key} must be a number")))?;
            if !x.is_finite() {
                return Err(CliError::Config(format!("param {key} is not finite")));
            }
            Ok(x)
        }
    }
}

fn fparam_req(params: &BTreeMap<String, Value>, key: &str) -> Result<f64, CliError> {
    if !params.contains_key(key) {
        return Err(CliError::Config(format!("missing required param {key}")));
    }
    fparam(params, key, 0.0)
}

fn uparam(params: &BTreeMap<String, Value>, key: &str, default: usize) -> Result<usize, CliError> {
    match params.get(key) {
        None => Ok(default),
        Some(v) => v
            .as_u64()
            .map(|x| x as usize)
            .ok_or_else(|| CliError::Config(format!("param {key} must be a nonnegative integer"))),
    }
}

fn farray(
    params: &BTreeMap<String, Value>,
    key: &str,
    default: &[f64],
) -> Result<Vec<f64>, CliError> {
    match params.get(key) {
        None => Ok(default.to_vec()),
        Some(Value::Array(items)) => items
            .iter()
            .map(|v| {
                v.as_f64()
                    .filter(|x| x.is_finite())
                    .ok_or_else(|| CliError::Config(format!("param {key} has a non-numeric entry")))
            })
            .collect(),
        Some(_) => Err(CliError::Config(format!("param {key} must be an array"))),
    }
}

fn sparam<'a>(params: &'a BTreeMap<String, Value>, key: &str) -> Option<&'a str> {
    params.get(key).and_then(|v| v.as_str())
}

// ---------------------------------------------------------------------------
// model registry

pub enum BuiltModel {
    Monitoring(MonitoringModel),
    Lindblad(LindbladModel),
    Effects(EffectSet),
}

pub fn build_model(cfg: &ModelConfig) -> Result<BuiltModel, CliError> {
    let p = &cfg.params;
    match cfg.name.as_str() {
        "two_level_monitor" => {
            let m = two_level_monitor(
                fparam(p, "omega", 1.0)?,
                fparam_req(p, "epsilon")?,
                fparam_req(p, "rate")?,
            )
            .map_err(config_err)?;
            Ok(BuiltModel::Monitoring(m))
        }
        "photodetector" => {
            let m = photodetector_mode(uparam(p, "dim", 4)?, fparam_req(p, "rate")?)
                .map_err(config_err)?;
            Ok(BuiltModel::Monitoring(m))
        }
        "amplitude_damping" => {
            let set = amplitude_damping_effects(fparam_req(p, "p")?).map_err(config_err)?;
            Ok(BuiltModel::Effects(set))
        }
        "damped_cavity" => {
            let m = damped_cavity(uparam(p, "dim", 12)?, fparam_req(p, "gamma")?)
                .map_err(config_err)?;
            Ok(BuiltModel::Lindblad(m))
        }
        "cv_monitor" => {
            let grid = CvOutcomeGrid::new(
                fparam(p, "alpha_max", 4.0)?,
                fparam(p, "spacing", 0.5)?,
                uparam(p, "truncation", 16)?,
                uparam(p, "multiplicity", 1)?,
            )
            .map_err(config_err)?;
            let m = cv_monitor(&grid, fparam(p, "epsilon", 0.5)?, fparam_req(p, "rate")?)
                .map_err(config_err)?;
            Ok(BuiltModel::Monitoring(m))
        }
        other => Err(CliError::Config(format!(
            "unknown model {other:?}; run the registry command for the list"
        ))),
    }
}

fn require_monitoring(built: BuiltModel) -> Result<MonitoringModel, CliError> {
    match built {
        BuiltModel::Monitoring(m) => Ok(m),
        _ => Err(CliError::Config(
            "this scenario needs a monitoring model (Hamiltonian + effect set + rate)".into(),
        )),
    }
}

fn effect_set_of(built: BuiltModel) -> Result<EffectSet, CliError> {
    match built {
        BuiltModel::Monitoring(m) => Ok(m.effects().clone()),
        BuiltModel::Effects(set) => Ok(set),
        BuiltModel::Lindblad(_) => Err(CliError::Config(
            "this scenario needs an effect set; Lindblad channels are not effects".into(),
        )),
    }
}

fn time_grid(g: &GridConfig) -> Result<TimeGrid, CliError> {
    for (name, v) in [("t0", g.t0), ("t1", g.t1), ("dt", g.dt)] {
        if !v.is_finite() {
            return Err(CliError::Config(format!("grid {name} is not finite")));
        }
    }
    TimeGrid::new(g.t0, g.t1, g.dt).map_err(config_err)
}

/// Initial state: a basis index, `"mixed"`, or `"plus"` (equal superposition
/// of the first two basis states). Defaults to basis state 0.
fn initial_state(params: &BTreeMap<String, Value>, d: usize) -> Result<DensityOperator, CliError> {
    match params.get("initial_state") {
        None => DensityOperator::basis_state(d, 0).map_err(config_err),
        Some(Value::String(s)) if s == "mixed" => maximally_mixed(d).map_err(config_err),
        Some(Value::String(s)) if s == "plus" => {
            let mut ket = nalgebra::DVector::<C64>::zeros(d);
            let amp = C64::new(std::f64::consts::FRAC_1_SQRT_2, 0.0);
            ket[0] = amp;
            ket[1] = amp;
            DensityOperator::from_ket(&ket).map_err(config_err)
        }
        Some(v) => {
            let n = v.as_u64().ok_or_else(|| {
                CliError::Config("initial_state must be a basis index, \"mixed\" or \"plus\"".into())
            })? as usize;
            DensityOperator::basis_state(d, n).map_err(config_err)
        }
    }
}

// ---------------------------------------------------------------------------
// scenario runners

struct Artifacts {
    csv: String,
    metrics: Value,
    seeds: Value,
}

fn fmt_row(values: &[f64]) -> String {
    let mut row = String::new();
    for (k, v) in values.iter().enumerate() {
        if k > 0 {
            row.push(',');
        }
        let _ = write!(row, "{v}");
    }
    row.push('\n');
    row
}

fn seeds_json(master_seed: u64, n_streams: usize) -> Value {
    let streams: Vec<u64> = (0..n_streams.min(4) as u64)
        .map(|i| stream_seed(master_seed, i))
        .collect();
    json!({ "master_seed": master_seed, "streams": streams })
}

fn run_trajectory(cfg: &ScenarioConfig) -> Result<Artifacts, CliError> {
    let model = require_monitoring(build_model(&cfg.model)?)?;
    let d = model.dim();
    let rho0 = initial_state(&cfg.model.params, d)?;
    let grid = time_grid(&cfg.grid)?;
    let seed = stream_seed(cfg.master_seed, 0);
    let traj = simulate_trajectory(&rho0, &model, &grid, seed).map_err(numerical)?;

    let mut csv = String::from("time");
    for i in 0..d {
        let _ = write!(csv, ",pop{i}");
    }
    csv.push_str(",purity\n");
    for (k, t) in grid.times().iter().enumerate() {
        let s = traj.states[k].mat();
        let mut row = vec![*t];
        row.extend((0..d).map(|i| s[(i, i)].re));
        row.push(trace(&(s * s)).re);
        csv.push_str(&fmt_row(&row));
    }
    let (max_jump, mean_jump) = jump_size_stats(&traj);
    Ok(Artifacts {
        csv,
        metrics: json!({
            "n_events": traj.events.len(),
            "max_jump_size": max_jump,
            "mean_jump_size": mean_jump,
        }),
        seeds: seeds_json(cfg.master_seed, 1),
    })
}

fn run_ensemble(cfg: &ScenarioConfig) -> Result<Artifacts, CliError> {
    let model = require_monitoring(build_model(&cfg.model)?)?;
    let d = model.dim();
    let rho0 = initial_state(&cfg.model.params, d)?;
    let grid = time_grid(&cfg.grid)?;
    let ens = ensemble_average(&rho0, &model, &grid, cfg.n_traj, cfg.master_seed)
        .map_err(numerical)?;

    // reference master-equation solution, on a finer step when requested
    let me_dt = fparam(&cfg.model.params, "me_dt", grid.dt)?;
    let ratio = grid.dt / me_dt;
    if (ratio - ratio.round()).abs() > 1e-9 || ratio < 1.0 {
        return Err(CliError::Config(format!(
            "me_dt = {me_dt} must evenly subdivide grid dt = {}",
            grid.dt
        )));
    }
    let ratio = ratio.round() as usize;
    let fine = TimeGrid::new(grid.t0, grid.t1, me_dt).map_err(config_err)?;
    let gen = GeneratorModel::Monitoring(model);
    let me = integrate(rho0.mat(), &gen, GeneratorVariant::Predictive, &fine).map_err(numerical)?;

    let mut csv = String::from("time");
    for i in 0..d {
        let _ = write!(csv, ",pop{i}");
    }
    for i in 0..d {
        let _ = write!(csv, ",me_pop{i}");
    }
    csv.push_str(",stderr,trace_dist\n");
    let mut max_dist: f64 = 0.0;
    let mut max_stderr: f64 = 0.0;
    for (k, t) in grid.times().iter().enumerate() {
        let mean = &ens.mean[k];
        let me_k = &me[k * ratio];
        let dist = trace_distance(mean, me_k);
        let se = ens.aggregate_stderr(k);
        max_dist = max_dist.max(dist);
        max_stderr = max_stderr.max(se);
        let mut row = vec![*t];
        row.extend((0..d).map(|i| mean[(i, i)].re));
        row.extend((0..d).map(|i| me_k[(i, i)].re));
        row.push(se);
        row.push(dist);
        csv.push_str(&fmt_row(&row));
    }
    Ok(Artifacts {
        csv,
        metrics: json!({
            "n": ens.n,
            "max_trace_distance": max_dist,
            "max_aggregate_stderr": max_stderr,
        }),
        seeds: seeds_json(cfg.master_seed, cfg.n_traj),
    })
}

fn run_collapse_scan(cfg: &ScenarioConfig) -> Result<Artifacts, CliError> {
    let (gen, povm) = match build_model(&cfg.model)? {
        BuiltModel::Monitoring(m) => {
            let povm = povm_from_effects(m.effects()).map_err(config_err)?;
            (GeneratorModel::Monitoring(m), povm)
        }
        BuiltModel::Lindblad(l) if l.dim() == 2 => {
            (GeneratorModel::Lindblad(l), sigma_z_povm())
        }
        _ => {
            return Err(CliError::Config(
                "collapse-scan needs a monitoring model or a two-level Lindblad model".into(),
            ));
        }
    };
    let d = gen.dim();
    let prep = PreparationEnsemble::new(
        vec![
            DensityOperator::basis_state(d, 0).map_err(config_err)?,
            DensityOperator::basis_state(d, 1).map_err(config_err)?,
        ],
        vec![0.5, 0.5],
    )
    .map_err(config_err)?;
    let n_c = uparam(&cfg.model.params, "n_c", 11)?;
    let variant = match sparam(&cfg.model.params, "variant").unwrap_or("adjoint") {
        "adjoint" => GeneratorVariant::RetrodictiveAdjoint,
        "as-printed" => GeneratorVariant::RetrodictiveAsPrinted,
        other => {
            return Err(CliError::Config(format!(
                "variant must be \"adjoint\" or \"as-printed\", got {other:?}"
            )));
        }
    };
    let g = &cfg.grid;
    let scan = collapse_time_scan(&prep, &povm, &gen, variant, g.t0, g.t1, n_c, g.dt)
        .map_err(numerical)?;

    let mut csv = String::from("time");
    for (i, _) in prep.states().iter().enumerate() {
        for pi in &povm {
            let _ = write!(csv, ",u{i}_{}", pi.outcome());
        }
    }
    for (i, _) in prep.states().iter().enumerate() {
        for pi in &povm {
            let _ = write!(csv, ",n{i}_{}", pi.outcome());
        }
    }
    csv.push('\n');
    for (c, t_c) in scan.t_c_values.iter().enumerate() {
        let mut row = vec![*t_c];
        for i in 0..prep.states().len() {
            for j in 0..povm.len() {
                row.push(scan.unnormalized[i][j][c]);
            }
        }
        for i in 0..prep.states().len() {
            for j in 0..povm.len() {
                row.push(scan.normalized[i][j][c]);
            }
        }
        csv.push_str(&fmt_row(&row));
    }
    Ok(Artifacts {
        csv,
        metrics: json!({
            "spread": scan.spread,
            "normalized_spread": scan.normalized_spread,
        }),
        seeds: seeds_json(cfg.master_seed, 0),
    })
}

fn run_weak_limit(cfg: &ScenarioConfig) -> Result<Artifacts, CliError> {
    if cfg.model.name != "two_level_monitor" {
        return Err(CliError::Config(
            "weak-limit sweeps the two_level_monitor model".into(),
        ));
    }
    let p = &cfg.model.params;
    let omega = fparam(p, "omega", 1.0)?;
    let gamma_eff = fparam(p, "gamma_eff", 0.5)?;
    if gamma_eff <= 0.0 {
        return Err(CliError::Config("gamma_eff must be positive".into()));
    }
    let epsilons = farray(p, "epsilons", &[0.2, 0.1, 0.05, 0.025])?;
    if epsilons.len() < 2 || epsilons.iter().any(|&e| e <= 0.0 || e > 1.0) {
        return Err(CliError::Config(
            "epsilons must hold at least two strengths in (0, 1]".into(),
        ));
    }
    let grid = time_grid(&cfg.grid)?;
    let rho0 = match p.get("initial_state") {
        Some(_) => initial_state(p, 2)?,
        None => initial_state(&BTreeMap::from([("initial_state".into(), json!("plus"))]), 2)?,
    };

    // fixed-rate dephasing reference with the same Hamiltonian: coherence
    // decays at gamma_eff
    let h = (ketbra(2, 0, 1) + ketbra(2, 1, 0)) * C64::new(omega / 2.0, 0.0);
    let sz = ketbra(2, 0, 0) - ketbra(2, 1, 1);
    let reference =
        LindbladModel::new(h, vec![sz], gamma_eff / 2.0).map_err(config_err)?;
    let me_dt = fparam(p, "me_dt", 1e-3)?;
    let ratio = grid.dt / me_dt;
    if (ratio - ratio.round()).abs() > 1e-9 || ratio < 1.0 {
        return Err(CliError::Config(format!(
            "me_dt = {me_dt} must evenly subdivide grid dt = {}",
            grid.dt
        )));
    }
    let ratio = ratio.round() as usize;
    let fine = TimeGrid::new(grid.t0, grid.t1, me_dt).map_err(config_err)?;
    let ref_snaps = integrate(
        rho0.mat(),
        &GeneratorModel::Lindblad(reference),
        GeneratorVariant::Predictive,
        &fine,
    )
    .map_err(numerical)?;

    let n_jump_traj = cfg.n_traj.min(uparam(p, "jump_trajectories", 300)?).max(1);
    let mut coherences: Vec<Vec<f64>> = Vec::new();
    let mut jump_sizes = Vec::new();
    let mut max_sigma = Vec::new();
    for (e, &eps) in epsilons.iter().enumerate() {
        let rate = 2.0 * gamma_eff / (eps * eps);
        let model = two_level_monitor(omega, eps, rate).map_err(config_err)?;
        let sub_seed = stream_seed(cfg.master_seed, e as u64);
        let ens =
            ensemble_average(&rho0, &model, &grid, cfg.n_traj, sub_seed).map_err(numerical)?;
        coherences.push(ens.mean.iter().map(|m| m[(0, 1)].norm()).collect());

        let mut worst_sigma: f64 = 0.0;
        for (k, mean) in ens.mean.iter().enumerate() {
            let diff = (mean[(0, 1)] - ref_snaps[k * ratio][(0, 1)]).norm();
            if diff > 1e-12 {
                let se = ens.stderr[k][(0, 1)].max(1e-300);
                worst_sigma = worst_sigma.max(diff / se);
            }
        }
        max_sigma.push(worst_sigma);

        // re-simulating the leading streams reproduces the same trajectories
        // the ensemble used, so the jump statistics line up with the mean
        let mut total = 0.0;
        let mut count = 0usize;
        for i in 0..n_jump_traj as u64 {
            let traj = simulate_trajectory(&rho0, &model, &grid, stream_seed(sub_seed, i))
                .map_err(numerical)?;
            for event in &traj.events {
                total += event.jump_size;
                count += 1;
            }
        }
        if count == 0 {
            return Err(CliError::Config(
                "no measurement events in the weak-limit sweep; extend the grid".into(),
            ));
        }
        jump_sizes.push(total / count as f64);
    }

    // least-squares log-log slope of jump size against strength
    let xs: Vec<f64> = epsilons.iter().map(|e| e.ln()).collect();
    let ys: Vec<f64> = jump_sizes.iter().map(|j| j.ln()).collect();
    let n = xs.len() as f64;
    let xm = xs.iter().sum::<f64>() / n;
    let ym = ys.iter().sum::<f64>() / n;
    let slope = xs
        .iter()
        .zip(&ys)
        .map(|(x, y)| (x - xm) * (y - ym))
        .sum::<f64>()
        / xs.iter().map(|x| (x - xm) * (x - xm)).sum::<f64>();

    let mut csv = String::from("time");
    for eps in &epsilons {
        let _ = write!(csv, ",coh_eps{eps}");
    }
    csv.push_str(",coh_ref\n");
    for (k, t) in grid.times().iter().enumerate() {
        let mut row = vec![*t];
        row.extend(coherences.iter().map(|c| c[k]));
        row.push(ref_snaps[k * ratio][(0, 1)].norm());
        csv.push_str(&fmt_row(&row));
    }

    let mut jump_map = serde_json::Map::new();
    let mut sigma_map = serde_json::Map::new();
    for (e, eps) in epsilons.iter().enumerate() {
        jump_map.insert(format!("{eps}"), json!(jump_sizes[e]));
        sigma_map.insert(format!("{eps}"), json!(max_sigma[e]));
    }
    Ok(Artifacts {
        csv,
        metrics: json!({
            "jump_size_slope": slope,
            "mean_jump_size": jump_map,
            "max_sigma_deviation": sigma_map,
        }),
        seeds: seeds_json(cfg.master_seed, epsilons.len()),
    })
}

fn run_zeno(cfg: &ScenarioConfig) -> Result<Artifacts, CliError> {
    if cfg.model.name != "two_level_monitor" {
        return Err(CliError::Config("zeno sweeps the two_level_monitor model".into()));
    }
    let p = &cfg.model.params;
    let omega = fparam(p, "omega", 1.0)?;
    let rate = fparam_req(p, "rate")?;
    let epsilons = if p.contains_key("epsilons") {
        farray(p, "epsilons", &[])?
    } else if p.contains_key("epsilon") {
        vec![fparam_req(p, "epsilon")?]
    } else {
        vec![0.0, 0.25, 0.5, 0.75, 1.0]
    };
    if epsilons.is_empty() {
        return Err(CliError::Config("epsilons is empty".into()));
    }
    let grid = time_grid(&cfg.grid)?;
    let duration = grid.span();

    let mut csv = String::from("time,epsilon,survival,stderr\n");
    let mut survival_map = serde_json::Map::new();
    for (e, &eps) in epsilons.iter().enumerate() {
        let (survival, stderr) = zeno_survival(
            omega,
            eps,
            rate,
            duration,
            cfg.n_traj,
            stream_seed(cfg.master_seed, e as u64),
        )
        .map_err(numerical)?;
        csv.push_str(&fmt_row(&[duration, eps, survival, stderr]));
        survival_map.insert(format!("{eps}"), json!([survival, stderr]));
    }
    Ok(Artifacts {
        csv,
        metrics: json!({ "survival": survival_map }),
        seeds: seeds_json(cfg.master_seed, epsilons.len()),
    })
}

fn run_bias_report(cfg: &ScenarioConfig) -> Result<Artifacts, CliError> {
    let mut set = effect_set_of(build_model(&cfg.model)?)?;
    if let Some(outcome) = sparam(&cfg.model.params, "drop_outcome") {
        set = set.without_outcome(outcome).map_err(config_err)?;
    }
    let report = bias_report(&set);
    let csv = format!(
        "time,forward_defect,reversed_defect\n0,{},{}\n",
        report.forward_defect, report.reversed_defect
    );
    Ok(Artifacts {
        csv,
        metrics: serde_json::to_value(&report).map_err(config_err)?,
        seeds: seeds_json(cfg.master_seed, 0),
    })
}

fn run_retro_energy(cfg: &ScenarioConfig) -> Result<Artifacts, CliError> {
    let cavity = match build_model(&cfg.model)? {
        BuiltModel::Lindblad(l) => l,
        _ => {
            return Err(CliError::Config(
                "retro-energy needs a Lindblad model (damped_cavity)".into(),
            ));
        }
    };
    let d = cavity.dim();
    let level = uparam(&cfg.model.params, "fock_level", 0)?;
    if level >= d {
        return Err(CliError::Config(format!(
            "fock_level = {level} outside the {d}-level truncation"
        )));
    }
    let pi = PovmElement::new(format!("fock{level}"), ketbra(d, level, level))
        .map_err(config_err)?;
    let grid = time_grid(&cfg.grid)?;
    let profile = retro_energy_profile(&cavity, &pi, &grid).map_err(numerical)?;

    // profile is newest-first; the CSV runs oldest-first so time ascends
    let n = profile.len();
    let mut csv = String::from("time,mean_photons\n");
    for (k, t) in grid.times().iter().enumerate() {
        csv.push_str(&fmt_row(&[*t, profile[n - 1 - k]]));
    }
    let max_backward_decrease = profile
        .windows(2)
        .map(|w| w[0] - w[1])
        .fold(0.0_f64, f64::max);
    Ok(Artifacts {
        csv,
        metrics: json!({
            "at_detection": profile[0],
            "at_preparation": profile[n - 1],
            "max_backward_decrease": max_backward_decrease,
        }),
        seeds: seeds_json(cfg.master_seed, 0),
    })
}

// ---------------------------------------------------------------------------
// orchestration

#[derive(Debug)]
pub struct RunOutput {
    pub csv_path: Option<PathBuf>,
    pub json_path: Option<PathBuf>,
}

/// Runs one scenario and writes its artifacts. Identical configs produce
/// byte-identical files.
pub fn run(cfg: &ScenarioConfig) -> Result<RunOutput, CliError> {
    if cfg.n_traj == 0 {
        return Err(CliError::Config("n_traj must be at least 1".into()));
    }
    let artifacts = match cfg.scenario {
        Scenario::Trajectory => run_trajectory(cfg)?,
        Scenario::Ensemble => run_ensemble(cfg)?,
        Scenario::CollapseScan => run_collapse_scan(cfg)?,
        Scenario::WeakLimit => run_weak_limit(cfg)?,
        Scenario::Zeno => run_zeno(cfg)?,
        Scenario::BiasReport => run_bias_report(cfg)?,
        Scenario::RetroEnergy => run_retro_energy(cfg)?,
    };

    let summary = json!({
        "config": serde_json::to_value(cfg).map_err(config_err)?,
        "metrics": artifacts.metrics,
        "seeds": artifacts.seeds,
        "version": VERSION,
    });
    let mut out = RunOutput { csv_path: None, json_path: None };
    if matches!(cfg.output.format, OutputFormat::Csv | OutputFormat::Both) {
        let path = PathBuf::from(format!("{}.csv", cfg.output.path));
        std::fs::write(&path, artifacts.csv.as_bytes())?;
        out.csv_path = Some(path);
    }
    if matches!(cfg.output.format, OutputFormat::Json | OutputFormat::Both) {
        let path = PathBuf::from(format!("{}.json", cfg.output.path));
        let mut body = serde_json::to_string_pretty(&summary).map_err(config_err)?;
        body.push('\n');
        std::fs::write(&path, body.as_bytes())?;
        out.json_path = Some(path);
    }
    Ok(out)
}

/// Stable, sorted listing of scenarios and models with their parameters.
pub fn list_registry() -> String {
    let mut s = String::new();
    s.push_str("scenarios:\n");
    for (name, params) in [
        ("bias-report", "drop_outcome?"),
        ("collapse-scan", "n_c=11, variant=adjoint|as-printed"),
        ("ensemble", "initial_state=0, me_dt=dt"),
        ("retro-energy", "fock_level=0"),
        ("trajectory", "initial_state=0"),
        ("weak-limit", "epsilons=[0.2,0.1,0.05,0.025], gamma_eff=0.5, omega=1, me_dt=1e-3, jump_trajectories=300"),
        ("zeno", "epsilons=[0,0.25,0.5,0.75,1], omega=1, rate"),
    ] {
        let _ = writeln!(s, "  {name:<14} params: {params}");
    }
    s.push_str("models:\n");
    for (name, params) in [
        ("amplitude_damping", "p"),
        ("cv_monitor", "alpha_max=4, spacing=0.5, truncation=16, multiplicity=1, epsilon=0.5, rate"),
        ("damped_cavity", "dim=12, gamma"),
        ("photodetector", "dim=4, rate"),
        ("two_level_monitor", "omega, epsilon, rate"),
    ] {
        let _ = writeln!(s, "  {name:<18} params: {params}");
    }
    s.push_str("scenario parameters live in model.params; --param key=value overrides them.\n");
    s
}

// ---------------------------------------------------------------------------
// command line

#[derive(Debug, Parser)]
#[command(name = "qmonitor", version, about = "Monitored open quantum system simulator")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Run a scenario described by a JSON config file
    Simulate {
        config: PathBuf,
        #[arg(long)]
        scenario: Option<String>,
        #[arg(long)]
        model: Option<String>,
        #[arg(long)]
        seed: Option<u64>,
        #[arg(long)]
        ntraj: Option<usize>,
        #[arg(long)]
        t0: Option<f64>,
        #[arg(long)]
        t1: Option<f64>,
        #[arg(long)]
        dt: Option<f64>,
        #[arg(long)]
        out: Option<String>,
        /// Model/scenario parameter override, repeatable
        #[arg(long = "param", value_name = "KEY=VALUE")]
        param: Vec<String>,
    },
    /// List available scenarios and models
    Registry,
    /// Run the built-in verification suite
    Selfcheck,
}

#[allow(clippy::too_many_arguments)]
fn load_config(
    path: &PathBuf,
    scenario: Option<String>,
    model: Option<String>,
    seed: Option<u64>,
    ntraj: Option<usize>,
    t0: Option<f64>,
    t1: Option<f64>,
    dt: Option<f64>,
    out: Option<String>,
    params: &[String],
) -> Result<ScenarioConfig, CliError> {
    let bytes = std::fs::read(path)?;
    let mut cfg = parse_config(&bytes)?;
    if let Some(s) = scenario {
        cfg.scenario = serde_json::from_value(json!(s))
            .map_err(|_| CliError::Config(format!("unknown scenario {s:?}")))?;
    }
    if let Some(m) = model {
        cfg.model.name = m;
    }
    if let Some(s) = seed {
        cfg.master_seed = s;
    }
    if let Some(n) = ntraj {
        cfg.n_traj = n;
    }
    if let Some(v) = t0 {
        cfg.grid.t0 = v;
    }
    if let Some(v) = t1 {
        cfg.grid.t1 = v;
    }
    if let Some(v) = dt {
        cfg.grid.dt = v;
    }
    if let Some(o) = out {
        cfg.output.path = o;
    }
    for raw in params {
        let (key, value) = parse_param_override(raw)?;
        cfg.model.params.insert(key, value);
    }
    Ok(cfg)
}

/// Top-level dispatch; returns the process exit code.
pub fn run_cli(cli: Cli) -> i32 {
    match cli.command {
        Command::Simulate {
            config,
            scenario,
            model,
            seed,
            ntraj,
            t0,
            t1,
            dt,
            out,
            param,
        } => {
            let result = load_config(
                &config, scenario, model, seed, ntraj, t0, t1, dt, out, &param,
            )
            .and_then(|cfg| run(&cfg));
            match result {
                Ok(output) => {
                    for path in [output.csv_path, output.json_path].into_iter().flatten() {
                        println!("wrote {}", path.display());
                    }
                    0
                }
                Err(e) => {
                    eprintln!("error: {e}");
                    e.exit_code()
                }
            }
        }
        Command::Registry => {
            print!("{}", list_registry());
            0
        }
        Command::Selfcheck => {
            let results = crate::selfcheck::run_selfcheck();
            let mut ok = true;
            for r in &results {
                println!(
                    "criterion {:>2} [{}]: {} — {}",
                    r.index,
                    r.label,
                    if r.passed { "PASS" } else { "FAIL" },
                    r.detail
                );
                ok &= r.passed;
            }
            if ok {
                0
            } else {
                eprintln!("error: {}", CliError::SelfCheck("see FAIL lines above".into()));
                4
            }
        }
    }
}
