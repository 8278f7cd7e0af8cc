//! Oracle suites: the propagator against direct integration, every analytic
//! derivative against finite differences, and structural invariants.
//!
//! Each suite draws its random instances from a seeded stream and reports the
//! worst defect it measured, so callers can both assert on it and print it.

use rand::Rng;
use rayon::prelude::*;
use serde::Serialize;

use crate::error::{Error, Result};
use crate::floquet::{self, ControlModel, FloquetEigensystem};
use crate::linalg::{self, Operator, StateVector, C64};
use crate::objectives::{ControlProblem, Objective, Request, Target};
use crate::ode;
use crate::rng;
use crate::spinsys::{self, ChainParams, TwoSpinParams};
use crate::varcalc::{self, EvalTime, Perturbation, Sensitivity};

/// Finite-difference steps tried in order; the best agreement counts.
pub const FD_STEPS: [f64; 3] = [1e-5, 1e-4, 1e-6];
/// Denominator floor for relative errors of quantities that may vanish.
pub const RELATIVE_FLOOR: f64 = 1e-3;

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct CheckOutcome {
    pub name: String,
    pub instances: usize,
    pub worst: f64,
    pub tolerance: f64,
}

impl CheckOutcome {
    pub fn new(name: &str, instances: usize, worst: f64, tolerance: f64) -> Self {
        Self { name: name.to_string(), instances, worst, tolerance }
    }

    pub fn passed(&self) -> bool {
        self.worst.is_finite() && self.worst < self.tolerance
    }
}

/// Two spins with random drift, harmonics on both sites' x and y controls.
pub fn random_two_spin_model(rng: &mut impl Rng, n_max: usize) -> ControlModel {
    let p = TwoSpinParams {
        omega1: rng.gen_range(0.0..0.5),
        omega2: rng.gen_range(0.0..0.5),
        gx: rng.gen_range(1.0..10.0),
        gy: rng.gen_range(1.0..10.0),
    };
    let controls = spinsys::xy_controls(2, &[1, 2]).expect("two sites");
    let model = ControlModel::new(spinsys::two_spin_hamiltonian(&p), controls, n_max, rng.gen_range(10.0..40.0))
        .expect("valid model");
    random_amplitudes(rng, model, 0.3 * p.g_max())
}

/// Chain with random drift, controls on both end sites.
pub fn random_chain_model(rng: &mut impl Rng, n_sites: usize, n_max: usize) -> ControlModel {
    let p = ChainParams {
        omegas: (0..n_sites).map(|_| rng.gen_range(0.0..0.5)).collect(),
        gx: (1..n_sites).map(|_| rng.gen_range(1.0..6.0)).collect(),
        gy: (1..n_sites).map(|_| rng.gen_range(1.0..6.0)).collect(),
    };
    let controls = spinsys::xy_controls(n_sites, &[1, n_sites]).expect("end sites");
    let drift = spinsys::chain_hamiltonian(&p).expect("small chain");
    let model = ControlModel::new(drift, controls, n_max, rng.gen_range(10.0..30.0)).expect("valid model");
    random_amplitudes(rng, model, 0.3 * p.g_max())
}

fn random_amplitudes(rng: &mut impl Rng, model: ControlModel, scale: f64) -> ControlModel {
    let a: Vec<f64> = (0..model.num_amplitudes()).map(|_| rng.gen_range(-scale..scale)).collect();
    model.with_amplitudes(&a).expect("matching length")
}

fn relative(analytic: &[C64], reference: &[C64]) -> f64 {
    let diff: f64 = analytic.iter().zip(reference).map(|(a, b)| (a - b).norm_sqr()).sum::<f64>().sqrt();
    let scale: f64 = reference.iter().map(|z| z.norm_sqr()).sum::<f64>().sqrt();
    diff / scale.max(RELATIVE_FLOOR)
}

/// Best relative agreement of `analytic` with the central difference
/// `(f(h) − f(−h)) / 2h` over [`FD_STEPS`].
pub fn fd_relative_error(analytic: &[C64], f: impl Fn(f64) -> Result<Vec<C64>>) -> Result<f64> {
    let mut best = f64::INFINITY;
    for h in FD_STEPS {
        let (p, m) = (f(h)?, f(-h)?);
        let fd: Vec<C64> = p.iter().zip(&m).map(|(a, b)| (a - b) / (2.0 * h)).collect();
        best = best.min(relative(analytic, &fd));
        if best < 1e-7 {
            break;
        }
    }
    Ok(best)
}

fn flat(m: &Operator) -> Vec<C64> {
    m.iter().copied().collect()
}

/// Eigenpair of `other`'s full spectrum that continues mode `k` of `base`,
/// with the phase aligned so that `⟨χ_base|χ⟩ > 0`.
pub fn tracked_mode(base: &FloquetEigensystem, k: usize, other: &FloquetEigensystem) -> (f64, StateVector) {
    let chi = base.mode(k);
    let vecs = other.full_vectors();
    let (best, overlap) = vecs
        .columns()
        .into_iter()
        .enumerate()
        .map(|(j, c)| (j, chi.iter().zip(c.iter()).map(|(a, b)| a.conj() * b).sum::<C64>()))
        .max_by(|a, b| a.1.norm().total_cmp(&b.1.norm()))
        .expect("non-empty spectrum");
    let phase = (overlap / overlap.norm()).conj();
    (other.full_energies()[best], vecs.column(best).mapv(|z| z * phase))
}

/// Selected mode of `other` with the largest overlap with mode `k` of `base`.
fn tracked_selected(base: &FloquetEigensystem, k: usize, other: &FloquetEigensystem) -> Result<usize> {
    let chi = base.mode(k);
    let (j, ov) = (0..other.dim_sys())
        .map(|j| (j, chi.iter().zip(other.mode(j).iter()).map(|(a, b)| a.conj() * b).sum::<C64>().norm()))
        .max_by(|a, b| a.1.total_cmp(&b.1))
        .expect("modes");
    if ov < 0.9 {
        return Err(Error::BrillouinZoneMiscount { found: 0, expected: base.dim_sys() });
    }
    Ok(j)
}

/// Propagator against the Runge-Kutta oracle at the pulse end and one
/// interior time, with `ν_max` chosen adaptively.
pub fn ode_agreement(seed: u64, two_spin: usize, three_spin: usize) -> Result<CheckOutcome> {
    let jobs: Vec<(u64, usize)> =
        (0..two_spin).map(|i| (i as u64, 2)).chain((0..three_spin).map(|i| (1000 + i as u64, 3))).collect();
    let defects: Vec<f64> = jobs
        .par_iter()
        .map(|&(id, n)| {
            let mut r = rng::stream(seed, id);
            let n_max = r.gen_range(2..=6);
            let model = if n == 2 { random_two_spin_model(&mut r, n_max) } else { random_chain_model(&mut r, 3, n_max) };
            let nu = floquet::adaptive_truncation(&model, 1e-11)?;
            let es = floquet::solve(&model, nu)?;
            let tf = model.pulse_end();
            let mut worst: f64 = 0.0;
            for t in [tf, r.gen_range(0.0..tf)] {
                let u = floquet::propagator(&es, t);
                worst = worst.max(linalg::max_abs_diff(&u, &ode::ode_oracle(&model, t)?));
            }
            Ok(worst)
        })
        .collect::<Result<_>>()?;
    Ok(CheckOutcome::new("propagator vs ODE", jobs.len(), max(&defects), 1e-8))
}

fn max(v: &[f64]) -> f64 {
    v.iter().copied().fold(0.0, f64::max)
}

/// Truncation used by the derivative suites; derivatives are exact for the
/// truncated operator, so convergence in `ν_max` is not required there.
const SUITE_NU: usize = 12;

fn suite_instance(seed: u64, id: u64) -> Result<(ControlModel, FloquetEigensystem, f64)> {
    for attempt in 0..8u64 {
        let mut r = rng::stream(seed, id * 16 + attempt);
        let model = random_two_spin_model(&mut r, 2);
        let es = floquet::solve(&model, SUITE_NU)?;
        if Sensitivity::new(&es).is_ok() {
            let t = r.gen_range(0.2..1.0) * model.pulse_end();
            return Ok((model, es, t));
        }
    }
    Err(Error::InvalidParameter("no non-degenerate random instance".into()))
}

fn random_direction(seed: u64, id: u64, model: &ControlModel) -> Perturbation {
    let mut r = rng::stream(seed, (1 << 20) + id);
    Perturbation::Combination {
        amplitudes: (0..model.num_amplitudes()).map(|_| r.gen_range(-1.0..1.0)).collect(),
        omega: r.gen_range(-1.0..1.0),
    }
}

/// Worst relative finite-difference error per derivative family.
#[derive(Debug, Clone, Default)]
struct DerivativeDefects {
    quasi_energy: f64,
    mode: f64,
    propagator: f64,
    total_omega: f64,
    second_quasi_energy: f64,
    second_propagator: f64,
    time_first: f64,
    time_second: f64,
}

fn instance_defects(seed: u64, id: u64) -> Result<DerivativeDefects> {
    let (model, es, t) = suite_instance(seed, id)?;
    let d = es.dim_sys();
    let sens = Sensitivity::new(&es)?;
    let mut dirs = Perturbation::parameter_basis(&model, true);
    dirs.push(random_direction(seed, id, &model));
    let first = sens.first_order_many(&dirs)?;
    let solve_at = |p: &Perturbation, h: f64| floquet::solve(&p.displace(&model, h)?, SUITE_NU);
    let mut out = DerivativeDefects::default();

    for (p, fo) in dirs.iter().zip(&first) {
        let dl: Vec<C64> = fo.dlambda.iter().map(|&x| x.into()).collect();
        let e = fd_relative_error(&dl, |h| {
            let o = solve_at(p, h)?;
            Ok((0..d).map(|k| tracked_mode(&es, k, &o).0.into()).collect())
        })?;
        out.quasi_energy = out.quasi_energy.max(e);

        let dchi: Vec<C64> = fo.dchi.iter().flat_map(|v| v.iter().copied()).collect();
        let e = fd_relative_error(&dchi, |h| {
            let o = solve_at(p, h)?;
            Ok((0..d).flat_map(|k| tracked_mode(&es, k, &o).1.to_vec()).collect())
        })?;
        out.mode = out.mode.max(e);

        let bundle = varcalc::propagator_gradient(&es, std::slice::from_ref(p), EvalTime::At(t), false)?;
        let e = fd_relative_error(&flat(&bundle.du[0]), |h| Ok(flat(&floquet::propagator(&solve_at(p, h)?, t))))?;
        out.propagator = out.propagator.max(e);
    }

    let dw = varcalc::total_omega_derivative(&es)?;
    out.total_omega = fd_relative_error(&flat(&dw), |h| {
        let o = solve_at(&Perturbation::Omega, h)?;
        Ok(flat(&floquet::propagator(&o, o.model().pulse_end())))
    })?;

    // Second order along a random direction, against differences of the
    // analytic first order.
    let b = dirs.last().expect("random direction");
    let fb = first.last().expect("random direction");
    let so = sens.second_order((b, fb), (b, fb));
    let d2l: Vec<C64> = so.dlambda.iter().map(|&x| x.into()).collect();
    out.second_quasi_energy = fd_relative_error(&d2l, |h| {
        let o = solve_at(b, h)?;
        let g = varcalc::quasi_energy_gradient(&o, b)?;
        (0..d).map(|k| Ok(g[tracked_selected(&es, k, &o)?].into())).collect()
    })?;
    let bundle = varcalc::propagator_gradient(&es, &[b.clone()], EvalTime::At(t), true)?;
    let d2u = &bundle.d2u.as_ref().expect("requested")[0][0];
    out.second_propagator = fd_relative_error(&flat(d2u), |h| {
        let o = solve_at(b, h)?;
        Ok(flat(&varcalc::propagator_gradient(&o, &[b.clone()], EvalTime::At(t), false)?.du[0]))
    })?;

    let u1 = floquet::time_derivative(&es, t, 1)?;
    let u2 = floquet::time_derivative(&es, t, 2)?;
    out.time_first = fd_relative_error(&flat(&u1), |h| Ok(flat(&floquet::propagator(&es, t + h))))?;
    out.time_second = fd_relative_error(&flat(&u2), |h| Ok(flat(&floquet::time_derivative(&es, t + h, 1)?)))?;
    Ok(out)
}

/// Every analytic derivative against central differences on random
/// two-spin instances; tolerance is relative `1e-5`.
pub fn derivative_suite(seed: u64, instances: usize) -> Result<Vec<CheckOutcome>> {
    let all: Vec<DerivativeDefects> =
        (0..instances as u64).into_par_iter().map(|id| instance_defects(seed, id)).collect::<Result<_>>()?;
    let worst = |f: fn(&DerivativeDefects) -> f64| all.iter().map(f).fold(0.0, f64::max);
    let tol = 1e-5;
    Ok(vec![
        CheckOutcome::new("d quasi-energy", instances, worst(|x| x.quasi_energy), tol),
        CheckOutcome::new("d Floquet mode", instances, worst(|x| x.mode), tol),
        CheckOutcome::new("d propagator", instances, worst(|x| x.propagator), tol),
        CheckOutcome::new("d/dOmega propagator at pulse end", instances, worst(|x| x.total_omega), tol),
        CheckOutcome::new("d2 quasi-energy", instances, worst(|x| x.second_quasi_energy), tol),
        CheckOutcome::new("d2 propagator", instances, worst(|x| x.second_propagator), tol),
        CheckOutcome::new("dU/dt", instances, worst(|x| x.time_first), tol),
        CheckOutcome::new("d2U/dt2", instances, worst(|x| x.time_second), tol),
    ])
}

/// Propagator gradients are unchanged when the eigenvector phases are
/// re-fixed at random.
pub fn gauge_robustness(seed: u64, instances: usize) -> Result<CheckOutcome> {
    let defects: Vec<f64> = (0..instances as u64)
        .into_par_iter()
        .map(|id| {
            let (model, es, t) = suite_instance(seed, 10_000 + id)?;
            let mut r = rng::stream(seed, (1 << 21) + id);
            let phases: Vec<f64> = (0..es.dim_sys()).map(|_| r.gen_range(-3.2..3.2)).collect();
            let dirs = Perturbation::parameter_basis(&model, true);
            let a = varcalc::propagator_gradient(&es, &dirs, EvalTime::At(t), false)?;
            let b = varcalc::propagator_gradient(&es.rephased(&phases), &dirs, EvalTime::At(t), false)?;
            Ok(a.du.iter().zip(&b.du).map(|(x, y)| linalg::max_abs_diff(x, y)).fold(0.0, f64::max))
        })
        .collect::<Result<_>>()?;
    Ok(CheckOutcome::new("gauge robustness of dU", instances, max(&defects), 1e-10))
}

/// Unitarity of `U(t)`, Hermiticity of `K`, and Brillouin-zone completeness
/// at converged truncation.
pub fn structure_suite(seed: u64, instances: usize) -> Result<Vec<CheckOutcome>> {
    let rows: Vec<[f64; 3]> = (0..instances as u64)
        .into_par_iter()
        .map(|id| {
            let mut r = rng::stream(seed, 20_000 + id);
            let n_max = r.gen_range(2..=6);
            let model = random_two_spin_model(&mut r, n_max);
            let nu = floquet::adaptive_truncation(&model, 1e-10)?;
            let k = floquet::assemble(&model, nu)?;
            let herm = linalg::hermiticity_defect(&k.matrix);
            let es = floquet::eigensystem(&k)?;
            let tf = model.pulse_end();
            let unit = [0.0, 0.3 * tf, tf, 1.7 * tf]
                .iter()
                .map(|&t| linalg::unitarity_defect(&floquet::propagator(&es, t)))
                .fold(0.0, f64::max);
            Ok([unit, herm, es.completeness_defect()])
        })
        .collect::<Result<_>>()?;
    let col = |i: usize| rows.iter().map(|r| r[i]).fold(0.0, f64::max);
    Ok(vec![
        CheckOutcome::new("unitarity of U(t)", instances, col(0), 1e-8),
        CheckOutcome::new("Hermiticity of K", instances, col(1), 1e-12),
        CheckOutcome::new("Brillouin-zone completeness", instances, col(2), 1e-8),
    ])
}

fn random_state(r: &mut impl Rng, dim: usize) -> StateVector {
    let v: StateVector = (0..dim).map(|_| C64::new(r.gen_range(-1.0..1.0), r.gen_range(-1.0..1.0))).collect();
    let n = linalg::norm(&v);
    v.mapv(|z| z / n)
}

/// The purity bound never exceeds the end-spin tangle, and equals the pure
/// tangle for two spins. Reports the worst violation.
pub fn lower_bound_suite(seed: u64, instances: usize) -> Result<CheckOutcome> {
    let mut r = rng::stream(seed, 30_000);
    let mut worst: f64 = 0.0;
    for i in 0..instances {
        let n = 2 + i % 3;
        let psi = random_state(&mut r, 1 << n);
        let bound = spinsys::tangle_lower_bound(&psi)?;
        let tangle = if n == 2 {
            let t = spinsys::tangle_pure(&psi)?;
            worst = worst.max((bound - t).abs());
            t
        } else {
            spinsys::concurrence(&spinsys::reduced_density(&psi, &[1, n])?)?.powi(2)
        };
        worst = worst.max(bound - tangle);
    }
    Ok(CheckOutcome::new("tangle lower bound", instances, worst, 1e-10))
}

/// Truncation convergence: the adaptive order meets its tolerance and the
/// defect sequence decreases.
pub fn truncation_suite(seed: u64, instances: usize, tol: f64) -> Result<CheckOutcome> {
    let mut worst: f64 = 0.0;
    for id in 0..instances as u64 {
        let mut r = rng::stream(seed, 40_000 + id);
        let model = random_two_spin_model(&mut r, 6);
        let report = floquet::adaptive_truncation_report(&model, tol, floquet::TRUNCATION_CAP)?;
        let last = report.defects.last().map_or(f64::INFINITY, |x| x.1);
        let monotone = report.defects.windows(2).all(|w| w[1].1 <= w[0].1 * 1.5 + 1e-14);
        worst = worst.max(if monotone { last / tol } else { f64::INFINITY });
    }
    Ok(CheckOutcome::new("truncation convergence (defect / tol)", instances, worst, 1.0))
}

/// Propagator at a fixed truncation against the Runge-Kutta oracle, with
/// amplitudes scaled by `amplitude_scale`. A failed solve counts as an
/// infinite defect, so a truncation that is too small always fails.
pub fn fixed_truncation_suite(seed: u64, instances: usize, nu_max: usize, amplitude_scale: f64) -> Result<CheckOutcome> {
    let defects: Vec<f64> = (0..instances as u64)
        .into_par_iter()
        .map(|id| {
            let mut r = rng::stream(seed, 50_000 + id);
            let model = random_two_spin_model(&mut r, nu_max.clamp(1, 6));
            let amps: Vec<f64> = model.amplitudes().iter().map(|a| a * amplitude_scale).collect();
            let model = model.with_amplitudes(&amps)?;
            let tf = model.pulse_end();
            let exact = ode::ode_oracle(&model, tf)?;
            Ok(match floquet::solve(&model, nu_max) {
                Ok(es) => linalg::max_abs_diff(&floquet::propagator(&es, tf), &exact),
                Err(_) => f64::INFINITY,
            })
        })
        .collect::<Result<_>>()?;
    Ok(CheckOutcome::new(&format!("propagator vs ODE at nu_max = {nu_max}"), instances, max(&defects), 1e-8))
}

/// Objective kinds covered by [`objective_suite`].
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ObjectiveKind {
    Gate,
    Tangle,
    Chain,
    Ensemble,
}

impl ObjectiveKind {
    pub const ALL: [Self; 4] = [Self::Gate, Self::Tangle, Self::Chain, Self::Ensemble];

    fn label(self) -> &'static str {
        match self {
            Self::Gate => "gate",
            Self::Tangle => "tangle",
            Self::Chain => "chain bound",
            Self::Ensemble => "ensemble",
        }
    }
}

const SUITE_DURATION_WEIGHT: f64 = 0.3;

fn random_problem(kind: ObjectiveKind, seed: u64, id: u64) -> Result<ControlProblem> {
    let mut r = rng::stream(seed, 50_000 + id);
    let (model, objective, members) = match kind {
        ObjectiveKind::Gate => {
            let model = random_two_spin_model(&mut r, 2);
            let alpha = [r.gen_range(0.0..1.0), r.gen_range(0.0..1.0), r.gen_range(0.0..1.0)];
            let target = Target::Gate { gate: spinsys::canonical_gate(alpha), modulus: false };
            (model, Objective::new(target, vec![EvalTime::PulseEnd])?, None)
        }
        ObjectiveKind::Tangle => {
            let model = random_two_spin_model(&mut r, 2);
            let tf = model.pulse_end();
            let initial = random_state(&mut r, 4);
            let target = Target::Tangle { initial, curvature_penalty: 1e-4 };
            (model, Objective::new(target, vec![EvalTime::At(tf), EvalTime::At(0.8 * tf)])?, None)
        }
        ObjectiveKind::Chain | ObjectiveKind::Ensemble => {
            let model = random_chain_model(&mut r, 3, 2);
            let initial = random_state(&mut r, 8);
            let obj = Objective::new(Target::ChainBound { initial }, vec![EvalTime::PulseEnd])?;
            let members = (kind == ObjectiveKind::Ensemble).then(|| {
                (0..3)
                    .map(|_| {
                        let scale = 1.0 + r.gen_range(-0.1..0.1);
                        model.drift.mapv(|z| z * scale)
                    })
                    .collect::<Vec<_>>()
            });
            (model, obj, members)
        }
    };
    let w = model.omega;
    let mut p = ControlProblem::new(model, objective, floquet::Truncation::Fixed(SUITE_NU))?.with_free_omega(0.5 * w, 2.0 * w)?;
    if let Some(m) = members {
        p = p.with_members(m)?;
    }
    Ok(p)
}

/// Objective gradients and directional curvature against central
/// differences of the objective and of its gradient, plus agreement of the
/// directional curvature with the assembled Hessian.
pub fn objective_suite(seed: u64, instances: usize) -> Result<Vec<CheckOutcome>> {
    let mut out = Vec::new();
    for kind in ObjectiveKind::ALL {
        let rows: Vec<[f64; 3]> = (0..instances as u64)
            .into_par_iter()
            .map(|id| -> Result<[f64; 3]> {
                let mut problem = None;
                for attempt in 0..8 {
                    let p = random_problem(kind, seed, id * 16 + attempt)?;
                    if p.evaluate(&p.initial_point(), &Request::Gradient).is_ok() {
                        problem = Some(p);
                        break;
                    }
                }
                let problem = problem.ok_or_else(|| Error::InvalidParameter("no non-degenerate instance".into()))?;
                let pw = SUITE_DURATION_WEIGHT;
                let x = problem.initial_point();
                let ev = problem.evaluate(&x, &Request::Gradient)?;
                let grad = ev.gradient(pw).expect("requested");
                let value_at = |dir: &[f64], h: f64| -> Result<f64> {
                    let y: Vec<f64> = x.iter().zip(dir).map(|(a, b)| a + h * b).collect();
                    Ok(problem.evaluate(&y, &Request::Value)?.value(pw))
                };
                let mut worst_grad: f64 = 0.0;
                for p in 0..x.len() {
                    let mut e = vec![0.0; x.len()];
                    e[p] = 1.0;
                    let err = fd_relative_error(&[grad[p].into()], |h| Ok(vec![value_at(&e, h)?.into()]))?;
                    worst_grad = worst_grad.max(err);
                }
                let mut r = rng::stream(seed, 60_000 + id);
                let b: Vec<f64> = (0..x.len()).map(|_| r.gen_range(-1.0..1.0)).collect();
                let norm = b.iter().map(|v| v * v).sum::<f64>().sqrt();
                let b: Vec<f64> = b.iter().map(|v| v / norm).collect();
                let cv = problem.evaluate(&x, &Request::Curvature(b.clone()))?;
                let curv = cv.curvature(pw).expect("requested");
                let slope_fd = |h: f64| -> Result<Vec<C64>> {
                    let y: Vec<f64> = x.iter().zip(&b).map(|(a, v)| a + h * v).collect();
                    let g = problem.evaluate(&y, &Request::Gradient)?.gradient(pw).expect("requested");
                    Ok(vec![g.iter().zip(&b).map(|(gi, bi)| gi * bi).sum::<f64>().into()])
                };
                let worst_curv = fd_relative_error(&[curv.into()], slope_fd)?;
                let h = problem.hessian(&x, pw)?;
                let bhb: f64 = (0..x.len()).flat_map(|i| (0..x.len()).map(move |j| (i, j))).map(|(i, j)| b[i] * h[[i, j]] * b[j]).sum();
                let hess = (bhb - curv).abs() / curv.abs().max(1.0);
                Ok([worst_grad, worst_curv, hess])
            })
            .collect::<Result<_>>()?;
        let col = |i: usize| rows.iter().map(|r| r[i]).fold(0.0, f64::max);
        let name = kind.label();
        out.push(CheckOutcome::new(&format!("{name} objective gradient"), instances, col(0), 1e-5));
        out.push(CheckOutcome::new(&format!("{name} directional curvature"), instances, col(1), 1e-5));
        out.push(CheckOutcome::new(&format!("{name} curvature vs Hessian"), instances, col(2), 1e-8));
    }
    Ok(out)
}
