//! The three control experiments. Each writes its artifacts and returns a
//! summary; convergence is judged by the caller.

use std::f64::consts::PI;
use std::path::Path;

use anyhow::Result;
use floquet_control::floquet::{self, ControlModel, FloquetEigensystem, Truncation};
use floquet_control::linalg::{Operator, StateVector};
use floquet_control::objectives::{self, ControlProblem, EnsembleSpec, Objective, Target};
use floquet_control::optimizer::{self, MinTimeOutcome, OptimizerConfig, PenaltySchedule, RunOutcome, TraceRow};
use floquet_control::spinsys::{self, ChainParams};
use floquet_control::varcalc::EvalTime;
use floquet_control::{ode, rng};
use log::info;
use rayon::prelude::*;
use serde::Serialize;

use crate::config::ExperimentConfig;
use crate::output::{self, Series};

/// Completeness tolerance of the final re-evaluation.
pub const STRICT_TOL: f64 = 1e-10;

fn max_abs(x: &[f64]) -> f64 {
    x.iter().fold(0.0, |m, a| m.max(a.abs()))
}

/// Amplitude bound of the config, `10 g_max` by default.
fn bounded(problem: ControlProblem, cfg: &ExperimentConfig, sys: &ChainParams) -> Result<ControlProblem> {
    Ok(problem.with_amplitude_bound(cfg.optimizer.amplitude_bound.unwrap_or(10.0 * sys.g_max()))?)
}

fn optimizer_config(cfg: &ExperimentConfig) -> OptimizerConfig {
    OptimizerConfig { seed: cfg.seed, ..cfg.optimizer.clone() }
}

/// `U(t)` when the pulse stops at `t_f` and the drift continues alone.
fn pulse_off_propagator(es: &FloquetEigensystem, t: f64) -> Result<Operator> {
    let tf = es.model().pulse_end();
    if t <= tf {
        return Ok(floquet::propagator(es, t));
    }
    Ok(floquet::drift_propagator(es.model(), t - tf)?.dot(&floquet::propagator(es, tf)))
}

fn drift_only(model: &ControlModel) -> Result<ControlModel> {
    Ok(model.clone().with_amplitudes(&vec![0.0; model.num_amplitudes()])?)
}

fn strict(model: &ControlModel, n_max: usize) -> Result<FloquetEigensystem> {
    Ok(floquet::solve_with(model, Truncation::Auto { min: n_max + 2, tol: STRICT_TOL })?)
}

#[derive(Debug, Clone, Serialize)]
pub struct ContinuationSummary {
    pub threshold: f64,
    pub f0: f64,
    pub t_f: f64,
    pub relative_increase: f64,
    pub converged: bool,
}

#[derive(Debug, Clone, Serialize)]
pub struct GateSummary {
    pub f0: f64,
    pub t_f: f64,
    pub omega: f64,
    pub threshold: f64,
    pub converged: bool,
    pub restart: usize,
    pub max_amplitude: f64,
    pub peak_field: f64,
    /// `π / (4 g_max)`
    pub t_char: f64,
    pub nu_max: usize,
    pub completeness_defect: f64,
    /// Fidelity at the pulse end re-evaluated with a stricter truncation.
    pub f0_strict: f64,
    /// Fidelity of the integrated propagator.
    pub f0_ode: f64,
    pub uncontrolled_f0_at_t_f: f64,
    pub uncontrolled_best_f0: f64,
    pub uncontrolled_best_time: f64,
    pub continuation: Option<ContinuationSummary>,
    pub amplitudes: Vec<f64>,
}

fn trace_stages(min_time: &MinTimeOutcome, prefix: &str) -> Vec<(String, Vec<TraceRow>)> {
    let mut stages = Vec::new();
    if let Some(w) = &min_time.warmup {
        stages.push((format!("{prefix}warmup"), w.trace.clone()));
    }
    stages.push((format!("{prefix}search"), min_time.search.trace.clone()));
    stages.push((format!("{prefix}polish"), min_time.polish.trace.clone()));
    stages
}

/// Shortest pulse reaching the gate threshold, with `Ω` free in the
/// configured duration range.
pub fn gate_min_time(cfg: &ExperimentConfig, out: &Path) -> Result<GateSummary> {
    let sys = cfg.system()?;
    let g = cfg.gate.as_ref().expect("validated");
    let target = spinsys::canonical_gate(g.alpha);
    let template =
        ControlModel::new(spinsys::chain_hamiltonian(&sys)?, spinsys::xy_controls(2, &[1, 2])?, cfg.n_max, PI / g.initial_duration)?;
    let objective = Objective::new(Target::Gate { gate: target.clone(), modulus: g.modulus }, vec![EvalTime::PulseEnd])?;
    let [lo, hi] = g.duration_range;
    let problem = bounded(
        ControlProblem::new(template.clone(), objective, cfg.truncation())?.with_free_omega(PI / hi, PI / lo)?,
        cfg,
        &sys,
    )?;
    let opt = optimizer_config(cfg);
    let threshold = opt.schedule.unwrap_or_default().threshold;
    let fidelity = |u: &Operator| {
        let z = objectives::gate_overlap(u, &target);
        if g.modulus {
            z.norm()
        } else {
            z.re
        }
    };

    let result = optimizer::minimal_time_search(&problem, &opt)?;
    info!("minimal-time search: F0 = {:.10}, t_f = {:.6}", result.f0, result.t_f);
    let mut stages = trace_stages(&result, "");
    let mut pulses = vec![("controlled".to_string(), problem.model_at(&result.x, 0)?)];
    let continuation = match g.continuation_threshold {
        Some(thr) => {
            let schedule = PenaltySchedule { threshold: thr, ..opt.schedule.unwrap_or_default() };
            let c = OptimizerConfig { schedule: Some(schedule), max_iters: g.continuation_iters.unwrap_or(opt.max_iters), ..opt.clone() };
            let cont = optimizer::minimal_time_continue(&problem, result.x.clone(), &c)?;
            info!("continuation: F0 = {:.10}, t_f = {:.6}", cont.f0, cont.t_f);
            stages.extend(trace_stages(&cont, "continuation_"));
            pulses.push(("continuation".to_string(), problem.model_at(&cont.x, 0)?));
            Some(ContinuationSummary {
                threshold: thr,
                f0: cont.f0,
                t_f: cont.t_f,
                relative_increase: cont.t_f / result.t_f - 1.0,
                converged: cont.f0 >= thr,
            })
        }
        None => None,
    };

    let model = &pulses[0].1;
    let es = floquet::solve_with(model, cfg.truncation())?;
    let tf = result.t_f;
    let zero = drift_only(model)?;
    let mut series = Series::uniform(cfg.output.horizon * tf, cfg.output.samples);
    let controlled: Vec<f64> = series.times.iter().map(|&t| 1.0 - fidelity(&floquet::propagator(&es, t))).collect();
    let pulse_off = series.times.iter().map(|&t| Ok(1.0 - fidelity(&pulse_off_propagator(&es, t)?))).collect::<Result<Vec<_>>>()?;
    let uncontrolled =
        series.times.iter().map(|&t| Ok(1.0 - fidelity(&floquet::drift_propagator(&zero, t)?))).collect::<Result<Vec<_>>>()?;
    let (best_i, best_unc) =
        uncontrolled.iter().enumerate().fold((0, f64::INFINITY), |(bi, bv), (i, &v)| if v < bv { (i, v) } else { (bi, bv) });
    let uncontrolled_best_time = series.times[best_i];
    series.push_values("infidelity_controlled", controlled);
    series.push_values("infidelity_pulse_off", pulse_off);
    series.push_values("infidelity_uncontrolled", uncontrolled);

    let summary = GateSummary {
        f0: result.f0,
        t_f: tf,
        omega: result.omega,
        threshold,
        converged: result.f0 >= threshold,
        restart: result.search.restart,
        max_amplitude: max_abs(&model.amplitudes()),
        peak_field: model.peak_field(cfg.output.samples),
        t_char: PI / (4.0 * sys.g_max()),
        nu_max: es.nu_max(),
        completeness_defect: es.completeness_defect(),
        f0_strict: fidelity(&floquet::propagator(&strict(model, cfg.n_max)?, tf)),
        f0_ode: fidelity(&ode::ode_oracle(model, tf)?),
        uncontrolled_f0_at_t_f: fidelity(&floquet::drift_propagator(&zero, tf)?),
        uncontrolled_best_f0: 1.0 - best_unc,
        uncontrolled_best_time,
        continuation,
        amplitudes: model.amplitudes(),
    };

    let names = output::channel_names(&[1, 2]);
    let labelled: Vec<(&str, &ControlModel)> = pulses.iter().map(|(l, m)| (l.as_str(), m)).collect();
    let stage_refs: Vec<(String, &[TraceRow])> = stages.iter().map(|(s, r)| (s.clone(), r.as_slice())).collect();
    output::write(out, "timeseries.csv", &series.to_csv())?;
    output::write(out, "trace.csv", &output::trace_csv(&stage_refs))?;
    output::write(out, "pulse.csv", &output::pulse_series(&labelled, &names, cfg.output.samples).to_csv())?;
    output::write_json(out, "summary.json", &summary)?;
    Ok(summary)
}

#[derive(Debug, Clone, Serialize)]
pub struct TangleStage {
    pub name: String,
    pub curvature_penalty: f64,
    pub times: Vec<f64>,
    pub objective: f64,
    pub tangle_at_t_f: f64,
    /// `∂²C²/∂t²` at `t_f`, (µs)⁻².
    pub curvature: f64,
    /// Interval around `t_f` with `C² > threshold`, µs.
    pub plateau: Option<[f64; 2]>,
    pub plateau_width: f64,
    pub max_amplitude: f64,
    pub peak_field: f64,
    pub nu_max: usize,
    pub iterations: usize,
    pub amplitudes: Vec<f64>,
}

#[derive(Debug, Clone, Serialize)]
pub struct TangleSummary {
    pub t_f: f64,
    pub threshold: f64,
    pub converged: bool,
    pub uncontrolled_max_tangle: f64,
    pub stages: Vec<TangleStage>,
    /// Curvature-stage plateau over peak-stage plateau.
    pub curvature_width_ratio: Option<f64>,
    /// Multi-time plateau over single-time curvature plateau.
    pub multi_width_ratio: Option<f64>,
}

fn width_ratio(a: &TangleStage, b: &TangleStage) -> Option<f64> {
    (b.plateau_width > 0.0).then(|| a.plateau_width / b.plateau_width)
}

/// Tangle at `t_f` for a peak-only pulse, a curvature-penalized pulse and,
/// with extra times configured, a pulse targeting all of them.
pub fn tangle_plateau(cfg: &ExperimentConfig, out: &Path) -> Result<TangleSummary> {
    let sys = cfg.system()?;
    let tc = cfg.tangle.as_ref().expect("validated");
    let tf = tc.duration;
    let psi0 = spinsys::bloch_product_state(&tc.initial);
    let template = ControlModel::new(spinsys::chain_hamiltonian(&sys)?, spinsys::xy_controls(2, &[1, 2])?, cfg.n_max, PI / tf)?;
    let opt = optimizer_config(cfg);
    let horizon = cfg.output.horizon * tf;

    let mut plan = vec![("peak", 0.0, vec![EvalTime::PulseEnd]), ("curvature", tc.curvature_penalty, vec![EvalTime::PulseEnd])];
    if !tc.extra_times.is_empty() {
        let times = std::iter::once(EvalTime::PulseEnd).chain(tc.extra_times.iter().map(|&t| EvalTime::At(t))).collect();
        plan.push(("multi", tc.curvature_penalty, times));
    }

    let mut series = Series::uniform(horizon, cfg.output.samples);
    let zero = drift_only(&template)?;
    let uncontrolled = series
        .times
        .iter()
        .map(|&t| Ok(spinsys::tangle_pure(&floquet::drift_propagator(&zero, t)?.dot(&psi0))?))
        .collect::<Result<Vec<f64>>>()?;
    let uncontrolled_max_tangle = uncontrolled.iter().copied().fold(0.0, f64::max);
    series.push_values("tangle_uncontrolled", uncontrolled);

    let mut stages = Vec::new();
    let mut traces = Vec::new();
    let mut models = Vec::new();
    for (name, penalty, times) in plan {
        let objective = Objective::new(Target::Tangle { initial: psi0.clone(), curvature_penalty: penalty }, times.clone())?;
        let problem = bounded(ControlProblem::new(template.clone(), objective, cfg.truncation())?, cfg, &sys)?;
        let (best, runs) = optimizer::run(&problem, &problem.initial_point(), &opt)?;
        let run = &runs[best];
        let es = problem.eigensystem(&run.x, 0)?;
        let profile = |t: f64| objectives::tangle_profile(&es, &psi0, t).map(|p| p.0).unwrap_or(f64::NAN);
        let (c2, curvature) = objectives::tangle_profile(&es, &psi0, tf)?;
        let plateau = objectives::plateau_around(profile, tf, tc.plateau_threshold, (0.0, horizon), tf / 4000.0);
        info!("{name}: C2(t_f) = {c2:.8}, curvature = {curvature:.3e}, plateau = {plateau:?}");
        series.push(format!("tangle_{name}"), profile);
        stages.push(TangleStage {
            name: name.to_string(),
            curvature_penalty: penalty,
            times: times.iter().map(|t| if let EvalTime::At(t) = t { *t } else { tf }).collect(),
            objective: run.f0,
            tangle_at_t_f: c2,
            curvature,
            plateau: plateau.map(|(a, b)| [a, b]),
            plateau_width: plateau.map_or(0.0, |(a, b)| b - a),
            max_amplitude: max_abs(&run.x),
            peak_field: es.model().peak_field(cfg.output.samples),
            nu_max: es.nu_max(),
            iterations: run.trace.len().saturating_sub(1),
            amplitudes: run.x.clone(),
        });
        traces.push((name.to_string(), run.trace.clone()));
        models.push((name, es.model().clone()));
    }

    let summary = TangleSummary {
        t_f: tf,
        threshold: tc.plateau_threshold,
        converged: stages.iter().all(|s| s.tangle_at_t_f > tc.plateau_threshold),
        uncontrolled_max_tangle,
        curvature_width_ratio: width_ratio(&stages[1], &stages[0]),
        multi_width_ratio: stages.get(2).and_then(|m| width_ratio(m, &stages[1])),
        stages,
    };

    let names = output::channel_names(&[1, 2]);
    let labelled: Vec<(&str, &ControlModel)> = models.iter().map(|(l, m)| (*l, m)).collect();
    let stage_refs: Vec<(String, &[TraceRow])> = traces.iter().map(|(s, r)| (s.clone(), r.as_slice())).collect();
    output::write(out, "timeseries.csv", &series.to_csv())?;
    output::write(out, "trace.csv", &output::trace_csv(&stage_refs))?;
    output::write(out, "pulse.csv", &output::pulse_series(&labelled, &names, cfg.output.samples).to_csv())?;
    output::write_json(out, "summary.json", &summary)?;
    Ok(summary)
}

#[derive(Debug, Clone, Serialize)]
pub struct Robustness {
    pub epsilon: f64,
    /// Mean chain bound over the training ensemble after robust training.
    pub train_f0: f64,
    pub iterations: usize,
    pub nominal_mean: f64,
    pub nominal_std: f64,
    pub robust_mean: f64,
    pub robust_std: f64,
    pub robust_amplitudes: Vec<f64>,
}

#[derive(Debug, Clone, Serialize)]
pub struct ChainSummary {
    pub n_sites: usize,
    pub t_f: f64,
    pub threshold: f64,
    /// End-spin lower bound at `t_f`.
    pub f0: f64,
    pub f0_strict: f64,
    pub converged: bool,
    pub restart: usize,
    pub eof_at_t_f: f64,
    pub uncontrolled_max_eof: f64,
    pub max_amplitude: f64,
    pub peak_field: f64,
    pub nu_max: usize,
    pub completeness_defect: f64,
    pub iterations: usize,
    pub amplitudes: Vec<f64>,
    pub robustness: Vec<Robustness>,
}

fn mean_std(v: &[f64]) -> (f64, f64) {
    let n = v.len() as f64;
    let mean = v.iter().sum::<f64>() / n;
    let var = if v.len() > 1 { v.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / (n - 1.0) } else { 0.0 };
    (mean, var.sqrt())
}

/// End-spin entanglement of formation at `t_f` for each test member.
fn test_eof(template: &ControlModel, amps: &[f64], test: &[ChainParams], psi0: &StateVector, truncation: Truncation) -> Result<Vec<f64>> {
    let tf = template.pulse_end();
    test.par_iter()
        .map(|c| {
            let mut m = template.clone().with_amplitudes(amps)?;
            m.drift = spinsys::chain_hamiltonian(c)?;
            let es = floquet::solve_with(&m, truncation)?;
            Ok(objectives::end_spin_eof(&objectives::evolve(&es, psi0, tf))?)
        })
        .collect()
}

/// End-spin entanglement on a chain with controls on the two end sites,
/// plus ensemble-robust pulses for each configured coupling error.
pub fn chain_entangle(cfg: &ExperimentConfig, out: &Path) -> Result<ChainSummary> {
    let sys = cfg.system()?;
    let cc = cfg.chain.as_ref().expect("validated");
    let n = sys.n_sites();
    let tf = cc.duration;
    let psi0 = spinsys::bloch_product_state(&cc.initial);
    let template = ControlModel::new(spinsys::chain_hamiltonian(&sys)?, spinsys::xy_controls(n, &[1, n])?, cfg.n_max, PI / tf)?;
    let objective = Objective::new(Target::ChainBound { initial: psi0.clone() }, vec![EvalTime::PulseEnd])?;
    let problem = bounded(ControlProblem::new(template.clone(), objective.clone(), cfg.truncation())?, cfg, &sys)?;
    let opt = optimizer_config(cfg);

    let (best, runs) = optimizer::run(&problem, &problem.initial_point(), &opt)?;
    let nominal: RunOutcome = runs[best].clone();
    info!("nominal: bound = {:.10}", nominal.f0);
    let es = problem.eigensystem(&nominal.x, 0)?;
    let model = es.model().clone();
    let zero = drift_only(&template)?;

    let mut series = Series::uniform(cfg.output.horizon * tf, cfg.output.samples);
    let eof_of = |u: Operator| objectives::end_spin_eof(&u.dot(&psi0));
    let uncontrolled =
        series.times.iter().map(|&t| Ok(eof_of(floquet::drift_propagator(&zero, t)?)?)).collect::<Result<Vec<f64>>>()?;
    let controlled = series.times.iter().map(|&t| Ok(eof_of(floquet::propagator(&es, t))?)).collect::<Result<Vec<f64>>>()?;
    let pulse_off = series.times.iter().map(|&t| Ok(eof_of(pulse_off_propagator(&es, t)?)?)).collect::<Result<Vec<f64>>>()?;
    let bound = series
        .times
        .iter()
        .map(|&t| Ok(spinsys::tangle_lower_bound(&objectives::evolve(&es, &psi0, t))?))
        .collect::<Result<Vec<f64>>>()?;
    let uncontrolled_max_eof = uncontrolled.iter().copied().fold(0.0, f64::max);
    series.push_values("eof_uncontrolled", uncontrolled);
    series.push_values("eof_controlled", controlled);
    series.push_values("eof_pulse_off", pulse_off);
    series.push_values("lower_bound_controlled", bound);

    let mut traces = vec![("nominal".to_string(), nominal.trace.clone())];
    let mut pulses = vec![("nominal".to_string(), model.clone())];
    let mut robustness = Vec::new();
    if let Some(ens) = &cfg.ensemble {
        for (idx, &epsilon) in ens.epsilons.iter().enumerate() {
            let mut train_rng = rng::stream(rng::child_seed(cfg.seed, rng::STREAM_TRAIN_ENSEMBLE), idx as u64);
            let mut test_rng = rng::stream(rng::child_seed(cfg.seed, rng::STREAM_TEST_ENSEMBLE), idx as u64);
            let train = EnsembleSpec { epsilon, members: ens.members }.sample(&sys, &mut train_rng)?;
            let test = EnsembleSpec { epsilon, members: ens.test_members }.sample(&sys, &mut test_rng)?;
            let drifts = train.iter().map(spinsys::chain_hamiltonian).collect::<Result<Vec<_>, _>>()?;
            let robust_problem =
                bounded(ControlProblem::new(template.clone(), objective.clone(), cfg.truncation())?.with_members(drifts)?, cfg, &sys)?;
            let train_cfg = OptimizerConfig { max_iters: ens.train_iters.unwrap_or(opt.max_iters), ..opt.clone() };
            let robust = optimizer::run_from(&robust_problem, nominal.x.clone(), &train_cfg, 0)?;
            let (nominal_mean, nominal_std) = mean_std(&test_eof(&template, &nominal.x, &test, &psi0, cfg.truncation())?);
            let (robust_mean, robust_std) = mean_std(&test_eof(&template, &robust.x, &test, &psi0, cfg.truncation())?);
            info!("epsilon {epsilon}: nominal {nominal_mean:.4} ± {nominal_std:.4}, robust {robust_mean:.4} ± {robust_std:.4}");
            let label = format!("robust_{idx}");
            traces.push((label.clone(), robust.trace.clone()));
            pulses.push((label, template.clone().with_amplitudes(&robust.x)?));
            robustness.push(Robustness {
                epsilon,
                train_f0: robust.f0,
                iterations: robust.trace.len().saturating_sub(1),
                nominal_mean,
                nominal_std,
                robust_mean,
                robust_std,
                robust_amplitudes: robust.x,
            });
        }
    }

    let summary = ChainSummary {
        n_sites: n,
        t_f: tf,
        threshold: cc.threshold,
        f0: nominal.f0,
        f0_strict: spinsys::tangle_lower_bound(&objectives::evolve(&strict(&model, cfg.n_max)?, &psi0, tf))?,
        converged: nominal.f0 >= cc.threshold,
        restart: nominal.restart,
        eof_at_t_f: objectives::end_spin_eof(&objectives::evolve(&es, &psi0, tf))?,
        uncontrolled_max_eof,
        max_amplitude: max_abs(&nominal.x),
        peak_field: model.peak_field(cfg.output.samples),
        nu_max: es.nu_max(),
        completeness_defect: es.completeness_defect(),
        iterations: nominal.trace.len().saturating_sub(1),
        amplitudes: nominal.x.clone(),
        robustness,
    };

    let names = output::channel_names(&[1, n]);
    let labelled: Vec<(&str, &ControlModel)> = pulses.iter().map(|(l, m)| (l.as_str(), m)).collect();
    let stage_refs: Vec<(String, &[TraceRow])> = traces.iter().map(|(s, r)| (s.clone(), r.as_slice())).collect();
    output::write(out, "timeseries.csv", &series.to_csv())?;
    output::write(out, "trace.csv", &output::trace_csv(&stage_refs))?;
    output::write(out, "pulse.csv", &output::pulse_series(&labelled, &names, cfg.output.samples).to_csv())?;
    if !summary.robustness.is_empty() {
        output::write(out, "robustness.csv", &robustness_csv(&summary.robustness))?;
    }
    output::write_json(out, "summary.json", &summary)?;
    Ok(summary)
}

fn robustness_csv(rows: &[Robustness]) -> String {
    let mut s = String::from("epsilon,nominal_mean,nominal_std,robust_mean,robust_std,train_f0\n");
    for r in rows {
        s.push_str(&format!(
            "{:.11e},{:.11e},{:.11e},{:.11e},{:.11e},{:.11e}\n",
            r.epsilon, r.nominal_mean, r.nominal_std, r.robust_mean, r.robust_std, r.train_f0
        ));
    }
    s
}
