//! Line-search ascent with penalty scheduling, restarts and the minimal-time
//! search.

use log::{debug, info};
use rand::Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::objectives::{ControlProblem, Evaluation, Request};
use crate::rng;

/// Anything the ascent can drive.
pub trait Problem: Sync {
    fn dim(&self) -> usize;
    /// Leading coordinates that are pulse amplitudes (subject to jitter).
    fn num_amplitudes(&self) -> usize;
    fn evaluate(&self, x: &[f64], req: &Request) -> Result<Evaluation>;
    fn project(&self, x: &mut [f64]);
}

impl Problem for ControlProblem {
    fn dim(&self) -> usize {
        ControlProblem::dim(self)
    }
    fn num_amplitudes(&self) -> usize {
        ControlProblem::num_amplitudes(self)
    }
    fn evaluate(&self, x: &[f64], req: &Request) -> Result<Evaluation> {
        ControlProblem::evaluate(self, x, req)
    }
    fn project(&self, x: &mut [f64]) {
        ControlProblem::project(self, x)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Ascent {
    /// Steepest ascent.
    Gradient,
    /// Quasi-Newton direction from the BFGS inverse-Hessian update.
    Bfgs,
}

/// Duration weight `p` starts at zero and grows while `F₀ ≥ threshold`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct PenaltySchedule {
    pub p0: f64,
    pub growth: f64,
    pub threshold: f64,
}

impl Default for PenaltySchedule {
    fn default() -> Self {
        Self { p0: 0.01, growth: 1.5, threshold: 1.0 - 1e-4 }
    }
}

impl PenaltySchedule {
    /// Next weight after an iteration that reached `f0`.
    pub fn next(&self, p: f64, f0: f64) -> f64 {
        if f0 < self.threshold {
            p
        } else if p == 0.0 {
            self.p0
        } else {
            p * self.growth
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct OptimizerConfig {
    pub max_iters: usize,
    /// Stop once `‖∇F‖` falls below this.
    pub grad_tol: f64,
    /// Stop once an accepted step is shorter than this.
    pub step_tol: f64,
    /// Stop once `F₀` reaches this value (ignored while a schedule runs).
    pub target_f0: Option<f64>,
    /// Use the directional curvature for the initial step length.
    pub use_curvature: bool,
    pub ascent: Ascent,
    /// Longest trial step in parameter space.
    pub max_step: f64,
    /// Fixed duration weight when no schedule is given.
    pub duration_penalty: f64,
    pub schedule: Option<PenaltySchedule>,
    pub jitter_scale: f64,
    pub restarts: usize,
    /// Initial amplitudes are drawn from `U[−init_amplitude, init_amplitude]`.
    pub init_amplitude: f64,
    /// Fixed-frequency iterations after a minimal-time search.
    pub polish_iters: usize,
    /// Box bound on `|a|`, rad/µs, applied when the problem is built.
    pub amplitude_bound: Option<f64>,
    pub seed: u64,
}

impl Default for OptimizerConfig {
    fn default() -> Self {
        Self {
            max_iters: 500,
            grad_tol: 1e-9,
            step_tol: 1e-12,
            target_f0: None,
            use_curvature: false,
            ascent: Ascent::Gradient,
            max_step: 5.0,
            duration_penalty: 0.0,
            schedule: None,
            jitter_scale: 1e-3,
            restarts: 1,
            init_amplitude: 0.5,
            polish_iters: 200,
            amplitude_bound: None,
            seed: 0,
        }
    }
}

impl OptimizerConfig {
    pub fn validate(&self) -> Result<()> {
        let positive = [
            ("grad_tol", self.grad_tol),
            ("step_tol", self.step_tol),
            ("max_step", self.max_step),
            ("jitter_scale", self.jitter_scale),
        ];
        for (name, v) in positive {
            if !(v > 0.0) {
                return Err(Error::InvalidParameter(format!("{name} must be positive, got {v}")));
            }
        }
        if !(self.init_amplitude >= 0.0) || !(self.duration_penalty >= 0.0) {
            return Err(Error::InvalidParameter("init_amplitude and duration_penalty must be ≥ 0".into()));
        }
        if let Some(s) = &self.schedule {
            if !(s.p0 > 0.0 && s.growth > 1.0) {
                return Err(Error::InvalidParameter(format!("penalty schedule needs p0 > 0 and growth > 1, got {s:?}")));
            }
        }
        if self.amplitude_bound.is_some_and(|b| !(b > 0.0)) {
            return Err(Error::InvalidParameter("amplitude_bound must be positive".into()));
        }
        if self.restarts == 0 {
            return Err(Error::InvalidParameter("at least one restart is required".into()));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct TraceRow {
    pub iter: usize,
    pub f: f64,
    pub f0: f64,
    pub fp: f64,
    pub t_f: f64,
    pub grad_norm: f64,
    pub max_amp: f64,
    pub penalty_weight: f64,
    pub step: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct RunOutcome {
    /// Best parameters visited.
    pub x: Vec<f64>,
    pub f0: f64,
    pub t_f: f64,
    /// `F` at the best point with the weight in force when it was visited.
    pub f: f64,
    pub trace: Vec<TraceRow>,
    pub converged: bool,
    pub restart: usize,
    /// Final iterate, which may differ from the best point.
    pub last: Vec<f64>,
}

const ARMIJO: f64 = 1e-4;
const MAX_BACKTRACKS: usize = 30;
const MAX_JITTERS: usize = 20;

fn norm(v: &[f64]) -> f64 {
    v.iter().map(|x| x * x).sum::<f64>().sqrt()
}

fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

/// `x_i += U[−s, s]·max(max|a|, 1)` on the amplitude coordinates.
pub fn jitter(x: &mut [f64], n_amp: usize, scale: f64, rng: &mut impl Rng) {
    let amp = x[..n_amp].iter().fold(1.0f64, |m, a| m.max(a.abs()));
    for a in &mut x[..n_amp] {
        *a += rng.gen_range(-scale..=scale) * amp;
    }
}

/// Gradient evaluation that jitters the amplitudes away from degenerate
/// points.
fn evaluate_robust<P: Problem>(
    problem: &P,
    x: &mut Vec<f64>,
    cfg: &OptimizerConfig,
    rng: &mut impl Rng,
) -> Result<Evaluation> {
    for _ in 0..MAX_JITTERS {
        match problem.evaluate(x, &Request::Gradient) {
            Err(Error::DegenerateMode { mode, gap }) => {
                debug!("degenerate mode {mode} (gap {gap:.2e}); jittering amplitudes");
                jitter(x, problem.num_amplitudes(), cfg.jitter_scale, rng);
                problem.project(x);
            }
            other => return other,
        }
    }
    problem.evaluate(x, &Request::Gradient)
}

/// Inverse-Hessian approximation of `−F`.
struct Bfgs {
    h: Vec<Vec<f64>>,
    fresh: bool,
}

impl Bfgs {
    fn new(n: usize) -> Self {
        let h = (0..n).map(|i| (0..n).map(|j| if i == j { 1.0 } else { 0.0 }).collect()).collect();
        Self { h, fresh: true }
    }

    fn direction(&self, g: &[f64]) -> Vec<f64> {
        self.h.iter().map(|row| dot(row, g)).collect()
    }

    /// `s = x_new − x_old`, `y = ∇(−F)_new − ∇(−F)_old`.
    fn update(&mut self, s: &[f64], y: &[f64]) {
        let sy = dot(s, y);
        if sy <= 1e-12 * norm(s) * norm(y) {
            return;
        }
        let n = s.len();
        if self.fresh {
            let gamma = sy / dot(y, y);
            for (i, row) in self.h.iter_mut().enumerate() {
                for (j, v) in row.iter_mut().enumerate() {
                    *v = if i == j { gamma } else { 0.0 };
                }
            }
            self.fresh = false;
        }
        let rho = 1.0 / sy;
        let hy = self.direction(y);
        let yhy = dot(y, &hy);
        for i in 0..n {
            for j in 0..n {
                self.h[i][j] += -rho * (hy[i] * s[j] + s[i] * hy[j]) + (rho * rho * yhy + rho) * s[i] * s[j];
            }
        }
    }
}

/// Whether `(f0, t_f)` beats the incumbent under the run's criterion.
fn better(sched: Option<&PenaltySchedule>, cand: (f64, f64, f64), best: (f64, f64, f64)) -> bool {
    let (f0, tf, f) = cand;
    let (bf0, btf, bf) = best;
    match sched {
        Some(s) => {
            let (ok, bok) = (f0 >= s.threshold, bf0 >= s.threshold);
            match (ok, bok) {
                (true, false) => true,
                (false, true) => false,
                (true, true) => tf < btf || (tf == btf && f0 > bf0),
                (false, false) => f0 > bf0,
            }
        }
        None => f > bf,
    }
}

/// One ascent from `x0`.
pub fn run_from<P: Problem>(problem: &P, x0: Vec<f64>, cfg: &OptimizerConfig, restart: usize) -> Result<RunOutcome> {
    cfg.validate()?;
    if x0.len() != problem.dim() {
        return Err(Error::DimensionMismatch { expected: problem.dim(), found: x0.len() });
    }
    let mut jitter_rng = rng::stream(rng::child_seed(cfg.seed, rng::STREAM_RESTART_BASE + restart as u64), rng::STREAM_JITTER);
    let sched = cfg.schedule.as_ref();
    let mut p = if sched.is_some() { 0.0 } else { cfg.duration_penalty };
    let mut x = x0;
    problem.project(&mut x);
    let mut ev = evaluate_robust(problem, &mut x, cfg, &mut jitter_rng)?;
    let n_amp = problem.num_amplitudes();
    let max_amp = |x: &[f64]| x[..n_amp].iter().fold(0.0f64, |m, a| m.max(a.abs()));
    let row = |iter: usize, x: &[f64], ev: &Evaluation, p: f64, step: f64| TraceRow {
        iter,
        f: ev.value(p),
        f0: ev.f0,
        fp: ev.penalty(p),
        t_f: ev.t_f,
        grad_norm: norm(&ev.gradient(p).expect("gradient evaluated")),
        max_amp: max_amp(x),
        penalty_weight: p,
        step,
    };
    let mut trace = vec![row(0, &x, &ev, p, 0.0)];
    let mut best = (x.clone(), (ev.f0, ev.t_f, ev.value(p)));
    let mut bfgs = Bfgs::new(x.len());
    let mut alpha_prev: f64 = 1.0;
    let mut converged = false;
    let mut failures = 0;

    for iter in 1..=cfg.max_iters {
        let g = ev.gradient(p).expect("gradient evaluated");
        let gnorm = norm(&g);
        if gnorm < cfg.grad_tol {
            converged = true;
            break;
        }
        if sched.is_none() && cfg.target_f0.is_some_and(|t| ev.f0 >= t) {
            converged = true;
            break;
        }
        let mut d = match cfg.ascent {
            Ascent::Gradient => g.clone(),
            Ascent::Bfgs => bfgs.direction(&g),
        };
        if dot(&g, &d) <= 0.0 {
            bfgs = Bfgs::new(x.len());
            d = g.clone();
        }
        let slope = dot(&g, &d);
        let dnorm = norm(&d);
        let mut alpha = match cfg.ascent {
            Ascent::Bfgs if !bfgs.fresh => 1.0,
            _ => 2.0 * alpha_prev,
        };
        if cfg.use_curvature {
            if let Ok(c) = problem.evaluate(&x, &Request::Curvature(d.clone())) {
                let curv = c.curvature(p).expect("curvature evaluated");
                if curv < 0.0 {
                    alpha = -slope / curv;
                }
            }
        }
        alpha = alpha.min(cfg.max_step / dnorm);

        let f_here = ev.value(p);
        let mut accepted = None;
        for _ in 0..MAX_BACKTRACKS {
            let mut y: Vec<f64> = x.iter().zip(&d).map(|(a, b)| a + alpha * b).collect();
            problem.project(&mut y);
            let s: Vec<f64> = y.iter().zip(&x).map(|(a, b)| a - b).collect();
            if let Ok(ey) = problem.evaluate(&y, &Request::Gradient) {
                if ey.value(p) >= f_here + ARMIJO * dot(&g, &s) && ey.value(p) >= f_here {
                    accepted = Some((y, ey, s));
                    break;
                }
            }
            alpha *= 0.5;
        }
        let Some((y, ey, s)) = accepted else {
            failures += 1;
            debug!("line search failed at iteration {iter} (failure {failures})");
            if failures > 3 {
                break;
            }
            jitter(&mut x, n_amp, cfg.jitter_scale, &mut jitter_rng);
            problem.project(&mut x);
            ev = evaluate_robust(problem, &mut x, cfg, &mut jitter_rng)?;
            bfgs = Bfgs::new(x.len());
            alpha_prev = 1.0;
            continue;
        };
        failures = 0;
        alpha_prev = alpha;
        let step = norm(&s);
        if cfg.ascent == Ascent::Bfgs {
            let gy = ey.gradient(p).expect("gradient evaluated");
            let yv: Vec<f64> = g.iter().zip(&gy).map(|(a, b)| a - b).collect();
            bfgs.update(&s, &yv);
        }
        x = y;
        ev = ey;
        trace.push(row(iter, &x, &ev, p, step));
        if better(sched, (ev.f0, ev.t_f, ev.value(p)), best.1) {
            best = (x.clone(), (ev.f0, ev.t_f, ev.value(p)));
        }
        if let Some(s) = sched {
            p = s.next(p, ev.f0);
        }
        if step < cfg.step_tol {
            converged = true;
            break;
        }
    }
    let last = x;
    let (x, (f0, t_f, f)) = best;
    Ok(RunOutcome { x, f0, t_f, f, trace, converged, restart, last })
}

/// Initial point of restart `r`: fresh random amplitudes, the problem's own
/// value for any further coordinates.
pub fn initial_point<P: Problem>(problem: &P, base: &[f64], cfg: &OptimizerConfig, r: usize) -> Vec<f64> {
    let mut rng = rng::stream(rng::child_seed(cfg.seed, rng::STREAM_RESTART_BASE + r as u64), rng::STREAM_INITIAL_AMPLITUDES);
    let mut x = base.to_vec();
    if cfg.init_amplitude > 0.0 {
        for a in &mut x[..problem.num_amplitudes()] {
            *a = rng.gen_range(-cfg.init_amplitude..=cfg.init_amplitude);
        }
    }
    x
}

/// Independent restarts from seeded random amplitudes; returns every
/// outcome in restart order and the index of the best.
pub fn run<P: Problem>(problem: &P, base: &[f64], cfg: &OptimizerConfig) -> Result<(usize, Vec<RunOutcome>)> {
    cfg.validate()?;
    let outcomes: Vec<RunOutcome> = (0..cfg.restarts)
        .into_par_iter()
        .map(|r| {
            let out = run_from(problem, initial_point(problem, base, cfg, r), cfg, r);
            if let Ok(o) = &out {
                info!("restart {r}: F0 = {:.10}, t_f = {:.6}, {} iterations", o.f0, o.t_f, o.trace.len() - 1);
            }
            out
        })
        .collect::<Result<_>>()?;
    let mut best = 0;
    for (i, o) in outcomes.iter().enumerate().skip(1) {
        let b = &outcomes[best];
        if better(cfg.schedule.as_ref(), (o.f0, o.t_f, o.f), (b.f0, b.t_f, b.f)) {
            best = i;
        }
    }
    Ok((best, outcomes))
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct MinTimeOutcome {
    /// Amplitudes followed by `Ω`.
    pub x: Vec<f64>,
    pub omega: f64,
    pub t_f: f64,
    pub f0: f64,
    /// Fixed-frequency ascent at the initial `Ω`, absent when continuing.
    pub warmup: Option<RunOutcome>,
    pub search: RunOutcome,
    pub polish: RunOutcome,
}

/// Copy of `problem` with `Ω` frozen.
fn fixed_frequency(problem: &ControlProblem, omega: f64, amplitudes: &[f64]) -> Result<ControlProblem> {
    let mut template = problem.template().clone();
    template.omega = omega;
    template.set_amplitudes(amplitudes)?;
    let mut fixed = ControlProblem::new(template, problem.objective().clone(), problem.truncation())?
        .with_members(problem.members().to_vec())?;
    if problem.amplitude_bound().is_finite() {
        fixed = fixed.with_amplitude_bound(problem.amplitude_bound())?;
    }
    Ok(fixed)
}

fn with_schedule(cfg: &OptimizerConfig) -> (PenaltySchedule, OptimizerConfig) {
    let sched = cfg.schedule.unwrap_or_default();
    (sched, OptimizerConfig { schedule: Some(sched), ..cfg.clone() })
}

/// Per restart: amplitudes are first raised to the threshold at the initial
/// (long) pulse, then `Ω` is released under a growing duration penalty, then
/// the shortest pulse that met the threshold is polished at fixed `Ω` and
/// `p = 0`. The restart with the shortest feasible pulse wins.
pub fn minimal_time_search(problem: &ControlProblem, cfg: &OptimizerConfig) -> Result<MinTimeOutcome> {
    if !problem.optimizes_omega() {
        return Err(Error::InvalidParameter("minimal-time search needs a free frequency".into()));
    }
    let (sched, cfg) = with_schedule(cfg);
    cfg.validate()?;
    let na = problem.num_amplitudes();
    let base = problem.initial_point();
    let omega0 = base[na];
    let outcomes: Vec<MinTimeOutcome> = (0..cfg.restarts)
        .into_par_iter()
        .map(|r| {
            let x0 = initial_point(problem, &base, &cfg, r);
            let fixed = fixed_frequency(problem, omega0, &x0[..na])?;
            let warm_cfg = OptimizerConfig { schedule: None, duration_penalty: 0.0, target_f0: Some(sched.threshold), ..cfg.clone() };
            let warmup = run_from(&fixed, x0[..na].to_vec(), &warm_cfg, r)?;
            let mut x1 = warmup.x.clone();
            x1.push(omega0);
            let search = run_from(problem, x1, &cfg, r)?;
            let mut out = minimal_time_polish(problem, &cfg, search)?;
            info!("restart {r}: F0 = {:.10}, t_f = {:.6}", out.f0, out.t_f);
            out.warmup = Some(warmup);
            Ok(out)
        })
        .collect::<Result<_>>()?;
    let mut best = 0;
    for (i, o) in outcomes.iter().enumerate().skip(1) {
        let b = &outcomes[best];
        if better(Some(&sched), (o.f0, o.t_f, o.f0), (b.f0, b.t_f, b.f0)) {
            best = i;
        }
    }
    Ok(outcomes.into_iter().nth(best).expect("at least one restart"))
}

/// Minimal-time search started from a given point, such as the result of a
/// search with a looser threshold.
pub fn minimal_time_continue(problem: &ControlProblem, x0: Vec<f64>, cfg: &OptimizerConfig) -> Result<MinTimeOutcome> {
    let (_, cfg) = with_schedule(cfg);
    let search = run_from(problem, x0, &cfg, 0)?;
    minimal_time_polish(problem, &cfg, search)
}

/// Polishes the final iterate when it is shorter than the best feasible
/// point, since a held penalty can leave it just below the threshold; falls
/// back to the best feasible point if that polish does not reach it.
fn minimal_time_polish(problem: &ControlProblem, cfg: &OptimizerConfig, search: RunOutcome) -> Result<MinTimeOutcome> {
    let thr = cfg.schedule.unwrap_or_default().threshold;
    let na = problem.num_amplitudes();
    let polish_cfg = OptimizerConfig {
        schedule: None,
        duration_penalty: 0.0,
        target_f0: None,
        max_iters: cfg.polish_iters,
        ..cfg.clone()
    };
    let polish_at = |x: &[f64]| -> Result<(f64, RunOutcome)> {
        let omega = x[na];
        let fixed = fixed_frequency(problem, omega, &x[..na])?;
        Ok((omega, run_from(&fixed, x[..na].to_vec(), &polish_cfg, search.restart)?))
    };
    let last_omega = search.last[na];
    let mut polished = None;
    if search.f0 < thr || last_omega > search.x[na] {
        let (omega, out) = polish_at(&search.last)?;
        if out.f0 >= thr || search.f0 < thr && out.f0 > search.f0 {
            polished = Some((omega, out));
        }
    }
    let (omega, polish) = match polished {
        Some(p) => p,
        None => polish_at(&search.x)?,
    };
    let mut x = polish.x.clone();
    x.push(omega);
    Ok(MinTimeOutcome { x, omega, t_f: polish.t_f, f0: polish.f0, warmup: None, search, polish })
}

#[cfg(test)]
mod tests {
    use super::*;

    /// `F = −‖x − x*‖²` with a synthetic duration `t_f = x₀`.
    struct Quadratic {
        target: Vec<f64>,
    }

    impl Problem for Quadratic {
        fn dim(&self) -> usize {
            self.target.len()
        }
        fn num_amplitudes(&self) -> usize {
            self.target.len()
        }
        fn evaluate(&self, x: &[f64], req: &Request) -> Result<Evaluation> {
            let r: Vec<f64> = x.iter().zip(&self.target).map(|(a, b)| a - b).collect();
            let f0 = -dot(&r, &r);
            let mut ev = Evaluation {
                f0,
                shape: 0.0,
                t_f: x[0],
                grad_base: None,
                grad_tf: None,
                dir_base: None,
                dir_tf: None,
            };
            let mut e0 = vec![0.0; x.len()];
            e0[0] = 1.0;
            match req {
                Request::Value => {}
                Request::Gradient => {
                    ev.grad_base = Some(r.iter().map(|v| -2.0 * v).collect());
                    ev.grad_tf = Some(e0);
                }
                Request::Curvature(d) => {
                    ev.dir_base = Some([-2.0 * dot(&r, d), -2.0 * dot(d, d)]);
                    ev.dir_tf = Some([d[0], 0.0]);
                }
            }
            Ok(ev)
        }
        fn project(&self, _: &mut [f64]) {}
    }

    fn quad() -> Quadratic {
        Quadratic { target: vec![0.7, -1.3, 2.2, 0.1] }
    }

    #[test]
    fn quadratic_converges_within_fifty_iterations() {
        for ascent in [Ascent::Gradient, Ascent::Bfgs] {
            for use_curvature in [false, true] {
                let cfg = OptimizerConfig { max_iters: 50, ascent, use_curvature, grad_tol: 1e-8, ..Default::default() };
                let out = run_from(&quad(), vec![0.0; 4], &cfg, 0).unwrap();
                let err = out.x.iter().zip(&quad().target).map(|(a, b)| (a - b).abs()).fold(0.0, f64::max);
                assert!(err < 1e-6, "{ascent:?} {use_curvature}: {err}");
                assert!(out.converged);
            }
        }
    }

    #[test]
    fn stationary_point_is_left_unchanged() {
        let q = quad();
        let out = run_from(&q, q.target.clone(), &OptimizerConfig::default(), 0).unwrap();
        assert_eq!(out.x, q.target);
        assert!(out.converged);
        assert_eq!(out.trace.len(), 1);
    }

    #[test]
    fn zero_budget_returns_the_initial_point() {
        let cfg = OptimizerConfig { max_iters: 0, ..Default::default() };
        let out = run_from(&quad(), vec![0.5; 4], &cfg, 0).unwrap();
        assert_eq!(out.x, vec![0.5; 4]);
    }

    #[test]
    fn ascent_never_decreases_f_and_best_is_monotone() {
        let cfg = OptimizerConfig { max_iters: 30, ..Default::default() };
        let out = run_from(&quad(), vec![-3.0, 4.0, 0.0, 1.0], &cfg, 0).unwrap();
        for w in out.trace.windows(2) {
            assert!(w[1].f >= w[0].f);
            assert!(w[1].iter > w[0].iter);
        }
    }

    #[test]
    fn schedule_arithmetic() {
        let s = PenaltySchedule { p0: 0.01, growth: 1.5, threshold: 0.9 };
        let mut p = 0.0;
        p = s.next(p, 0.5);
        assert_eq!(p, 0.0);
        for _ in 0..3 {
            p = s.next(p, 0.95);
        }
        assert!((p - 0.0225).abs() < 1e-15);
        assert_eq!(s.next(p, 0.1), p);
    }

    #[test]
    fn jitter_is_bounded() {
        let mut r = rng::stream(1, 2);
        for scale in [0.3, 4.0] {
            let x0 = vec![scale, -0.2, 0.05, 7.0];
            let mut x = x0.clone();
            jitter(&mut x, 3, 1e-3, &mut r);
            let bound = 1e-3 * scale.max(1.0);
            for (a, b) in x.iter().zip(&x0).take(3) {
                assert!((a - b).abs() <= bound);
            }
            assert_eq!(x[3], 7.0);
        }
    }

    #[test]
    fn runs_are_deterministic() {
        let cfg = OptimizerConfig { max_iters: 10, restarts: 3, seed: 9, ..Default::default() };
        let q = quad();
        let a = run(&q, &[0.0; 4], &cfg).unwrap();
        let b = run(&q, &[0.0; 4], &cfg).unwrap();
        assert_eq!(a, b);
    }

    #[test]
    fn config_validation() {
        assert!(OptimizerConfig::default().validate().is_ok());
        let bad = OptimizerConfig { schedule: Some(PenaltySchedule { growth: 1.0, ..Default::default() }), ..Default::default() };
        assert!(bad.validate().is_err());
        assert!(OptimizerConfig { restarts: 0, ..Default::default() }.validate().is_err());
    }
}
