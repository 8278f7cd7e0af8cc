//! Target functionals `F = F₀ − F_p` and their exact derivatives.
//!
//! Each functional is written once against [`Scalar`] and evaluated on
//! hyper-dual propagator jets, which yields its value, gradient component or
//! directional curvature depending on how the jets were seeded.

use ndarray::Array2;
use rand::Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::floquet::{self, ControlModel, FloquetEigensystem, Truncation};
use crate::jet::{HyperDual, Scalar};
use crate::linalg::{self, Operator, StateVector, C64};
use crate::spinsys::{self, ChainParams};
use crate::varcalc::{self, EvalTime, ModeJets, Perturbation, Sensitivity};

/// `Re Tr(U†U_d) / d`
pub fn gate_overlap<T: Scalar>(u: &Array2<T>, target: &Operator) -> T {
    let d = target.nrows() as f64;
    let mut acc = T::zero();
    for (x, y) in u.iter().zip(target.iter()) {
        acc += x.conj().scale(*y);
    }
    acc.scale(C64::new(1.0 / d, 0.0))
}

fn re<T: Scalar>(x: T) -> T {
    (x + x.conj()).scale(C64::new(0.5, 0.0))
}

/// Phase-sensitive gate fidelity `Re Tr(U†U_d) / d`.
pub fn gate_fidelity(u: &Operator, target: &Operator) -> Result<f64> {
    if u.dim() != target.dim() {
        return Err(Error::DimensionMismatch { expected: target.nrows(), found: u.nrows() });
    }
    Ok(gate_overlap(u, target).re)
}

/// `(C², ∂²C²/∂t²)` from the state and its first two time derivatives.
pub fn tangle_and_curvature<T: Scalar>(psi: &[T], dpsi: &[T], d2psi: &[T]) -> (T, T) {
    let two = C64::new(2.0, 0.0);
    let bil = |x: &[T], y: &[T]| x[1] * y[2] + x[2] * y[1] - x[0] * y[3] - x[3] * y[0];
    let q = bil(psi, psi);
    let q1 = bil(psi, dpsi).scale(two);
    let q2 = (bil(dpsi, dpsi) + bil(psi, d2psi)).scale(two);
    let c2 = re(q * q.conj());
    let curv = re(q.conj() * q2).scale(two) + re(q1 * q1.conj()).scale(two);
    (c2, curv)
}

fn apply<T: Scalar>(u: &Array2<T>, psi: &StateVector) -> Vec<T> {
    u.rows().into_iter().map(|row| row.iter().zip(psi).fold(T::zero(), |acc, (x, &p)| acc + x.scale(p))).collect()
}

/// What is being optimized, independent of the spin system.
#[derive(Debug, Clone, PartialEq)]
pub enum Target {
    /// Gate fidelity against `gate`; `modulus` replaces `Re Tr` by `|Tr|`.
    Gate { gate: Operator, modulus: bool },
    /// Tangle of `U|ψ₀⟩` with penalty `p (∂²C²/∂t²)²`.
    Tangle { initial: StateVector, curvature_penalty: f64 },
    /// End-spin purity bound of `U|ψ₀⟩` on a chain.
    ChainBound { initial: StateVector },
}

#[derive(Debug, Clone, PartialEq)]
pub struct Objective {
    pub target: Target,
    /// Evaluation times; the functional is averaged over them.
    pub times: Vec<EvalTime>,
}

/// Objective pieces as jets: averaged primary fidelity, shape penalty and
/// pulse end. `F = f0 − shape − p·t_f` for duration weight `p`.
#[derive(Debug, Clone, Copy)]
pub struct Parts<T> {
    pub f0: T,
    pub shape: T,
    pub t_f: T,
}

impl Objective {
    pub fn new(target: Target, times: Vec<EvalTime>) -> Result<Self> {
        if times.is_empty() {
            return Err(Error::InvalidParameter("objective needs at least one evaluation time".into()));
        }
        if let Target::Tangle { curvature_penalty, .. } = target {
            if !(curvature_penalty >= 0.0) {
                return Err(Error::InvalidParameter(format!("curvature penalty {curvature_penalty} < 0")));
            }
        }
        Ok(Self { target, times })
    }

    fn check_dim(&self, d: usize) -> Result<()> {
        let expected = match &self.target {
            Target::Gate { gate, .. } => gate.nrows(),
            Target::Tangle { initial, .. } => {
                if initial.len() != 4 {
                    return Err(Error::DimensionMismatch { expected: 4, found: initial.len() });
                }
                4
            }
            Target::ChainBound { initial } => initial.len(),
        };
        if expected != d {
            return Err(Error::DimensionMismatch { expected, found: d });
        }
        Ok(())
    }

    fn time_order(&self) -> u32 {
        match &self.target {
            Target::Tangle { curvature_penalty, .. } if *curvature_penalty > 0.0 => 2,
            _ => 0,
        }
    }

    /// `(F₀, penalty)` at one time from `[U, ∂_tU, ∂²_tU]`.
    fn at_time<T: Scalar>(&self, u: &[Array2<T>], n_sites: usize, sqrt: impl Fn(T) -> T) -> (T, T) {
        match &self.target {
            Target::Gate { gate, modulus } => {
                let z = gate_overlap(&u[0], gate);
                let f = if *modulus { sqrt(z * z.conj()) } else { re(z) };
                (f, T::zero())
            }
            Target::Tangle { initial, curvature_penalty } => {
                if u.len() < 3 {
                    let psi = apply(&u[0], initial);
                    let (c2, _) = tangle_and_curvature(&psi, &psi, &psi);
                    return (c2, T::zero());
                }
                let psi: Vec<Vec<T>> = u.iter().map(|m| apply(m, initial)).collect();
                let (c2, curv) = tangle_and_curvature(&psi[0], &psi[1], &psi[2]);
                (c2, (curv * curv).scale(C64::new(*curvature_penalty, 0.0)))
            }
            Target::ChainBound { initial } => (re(spinsys::lower_bound_of(&apply(&u[0], initial), n_sites)), T::zero()),
        }
    }

    /// Objective pieces on hyper-dual jets.
    pub fn jet_parts(&self, jets: &ModeJets) -> Result<Parts<HyperDual>> {
        let d = jets.dim_sys();
        self.check_dim(d)?;
        let n_sites = d.trailing_zeros() as usize;
        let scale = C64::new(1.0 / self.times.len() as f64, 0.0);
        let mut f0 = HyperDual::zero();
        let mut shape = HyperDual::zero();
        for &when in &self.times {
            let u = jets.propagator_jets(jets.time(when), self.time_order());
            let (f, s) = self.at_time(&u, n_sites, HyperDual::sqrt);
            f0 += f.scale(scale);
            shape += s.scale(scale);
        }
        Ok(Parts { f0, shape, t_f: jets.pulse_end() })
    }

    /// Objective pieces at plain values.
    pub fn parts(&self, es: &FloquetEigensystem) -> Result<Parts<f64>> {
        let p = self.jet_parts(&ModeJets::constant(es))?;
        Ok(Parts { f0: p.f0.v.re, shape: p.shape.v.re, t_f: p.t_f.v.re })
    }
}

/// Sample couplings `g(1 + u)`, `u ~ U[−ε, ε]` independently per coupling.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct EnsembleSpec {
    pub epsilon: f64,
    pub members: usize,
}

impl EnsembleSpec {
    pub fn validate(&self) -> Result<()> {
        if !(self.epsilon >= 0.0) || self.members == 0 {
            return Err(Error::InvalidParameter(format!(
                "ensemble needs epsilon ≥ 0 and at least one member, got {} and {}",
                self.epsilon, self.members
            )));
        }
        Ok(())
    }

    pub fn sample(&self, base: &ChainParams, rng: &mut impl Rng) -> Result<Vec<ChainParams>> {
        self.validate()?;
        let eps = self.epsilon;
        let mut jitter = |g: &[f64]| -> Vec<f64> {
            g.iter().map(|&x| if eps > 0.0 { x * (1.0 + rng.gen_range(-eps..=eps)) } else { x }).collect()
        };
        Ok((0..self.members)
            .map(|_| {
                let gx = jitter(&base.gx);
                let gy = jitter(&base.gy);
                ChainParams { omegas: base.omegas.clone(), gx, gy }
            })
            .collect())
    }
}

/// What an evaluation should compute beyond the value.
#[derive(Debug, Clone, PartialEq)]
pub enum Request {
    Value,
    Gradient,
    /// First and second derivative along a parameter-space direction.
    Curvature(Vec<f64>),
}

/// Objective pieces and their derivatives at one parameter point. The
/// duration weight is applied on readout so that it can change without
/// re-evaluating.
#[derive(Debug, Clone, PartialEq)]
pub struct Evaluation {
    pub f0: f64,
    pub shape: f64,
    pub t_f: f64,
    /// Gradient of `f0 − shape`.
    pub grad_base: Option<Vec<f64>>,
    /// Gradient of `t_f`.
    pub grad_tf: Option<Vec<f64>>,
    /// `(d, d²)` of `f0 − shape` along the requested direction.
    pub dir_base: Option<[f64; 2]>,
    /// `(d, d²)` of `t_f` along the requested direction.
    pub dir_tf: Option<[f64; 2]>,
}

impl Evaluation {
    /// `F = F₀ − shape − p·t_f`
    pub fn value(&self, p: f64) -> f64 {
        self.f0 - self.shape - p * self.t_f
    }

    /// Total penalty `F_p`.
    pub fn penalty(&self, p: f64) -> f64 {
        self.shape + p * self.t_f
    }

    pub fn gradient(&self, p: f64) -> Option<Vec<f64>> {
        let (gb, gt) = (self.grad_base.as_ref()?, self.grad_tf.as_ref()?);
        Some(gb.iter().zip(gt).map(|(b, t)| b - p * t).collect())
    }

    /// Second directional derivative of `F`.
    pub fn curvature(&self, p: f64) -> Option<f64> {
        Some(self.dir_base?[1] - p * self.dir_tf?[1])
    }

    /// First directional derivative of `F`.
    pub fn slope(&self, p: f64) -> Option<f64> {
        Some(self.dir_base?[0] - p * self.dir_tf?[0])
    }
}

/// A control task: pulse parametrization, one or more spin systems that
/// must all be driven by the same pulse, and the objective.
///
/// The parameter vector holds the amplitudes in channel-major order followed
/// by `Ω` when the frequency is optimized.
#[derive(Debug, Clone)]
pub struct ControlProblem {
    template: ControlModel,
    drifts: Vec<Operator>,
    objective: Objective,
    truncation: Truncation,
    omega_range: Option<(f64, f64)>,
    amplitude_bound: f64,
}

impl ControlProblem {
    pub fn new(template: ControlModel, objective: Objective, truncation: Truncation) -> Result<Self> {
        objective.check_dim(template.dim())?;
        check_truncation(&template, truncation)?;
        let drifts = vec![template.drift.clone()];
        Ok(Self { template, drifts, objective, truncation, omega_range: None, amplitude_bound: f64::INFINITY })
    }

    /// Average over several drifts driven by the same pulse.
    pub fn with_members(mut self, drifts: Vec<Operator>) -> Result<Self> {
        if drifts.is_empty() {
            return Err(Error::InvalidParameter("ensemble without members".into()));
        }
        for h in &drifts {
            if h.dim() != self.template.drift.dim() {
                return Err(Error::DimensionMismatch { expected: self.template.dim(), found: h.nrows() });
            }
        }
        self.drifts = drifts;
        Ok(self)
    }

    /// Treat `Ω` as a parameter restricted to `[lo, hi]`.
    pub fn with_free_omega(mut self, lo: f64, hi: f64) -> Result<Self> {
        if !(lo > 0.0 && hi > lo) {
            return Err(Error::InvalidParameter(format!("bad frequency range [{lo}, {hi}]")));
        }
        self.omega_range = Some((lo, hi));
        Ok(self)
    }

    pub fn with_amplitude_bound(mut self, bound: f64) -> Result<Self> {
        if !(bound > 0.0) {
            return Err(Error::NotPositive(bound));
        }
        self.amplitude_bound = bound;
        Ok(self)
    }

    pub fn objective(&self) -> &Objective {
        &self.objective
    }

    pub fn template(&self) -> &ControlModel {
        &self.template
    }

    pub fn members(&self) -> &[Operator] {
        &self.drifts
    }

    pub fn truncation(&self) -> Truncation {
        self.truncation
    }

    pub fn amplitude_bound(&self) -> f64 {
        self.amplitude_bound
    }

    pub fn omega_range(&self) -> Option<(f64, f64)> {
        self.omega_range
    }

    pub fn optimizes_omega(&self) -> bool {
        self.omega_range.is_some()
    }

    pub fn num_amplitudes(&self) -> usize {
        self.template.num_amplitudes()
    }

    pub fn dim(&self) -> usize {
        self.num_amplitudes() + usize::from(self.optimizes_omega())
    }

    /// Parameters of the template model.
    pub fn initial_point(&self) -> Vec<f64> {
        let mut x = self.template.amplitudes();
        if self.optimizes_omega() {
            x.push(self.template.omega);
        }
        x
    }

    pub fn omega_of(&self, x: &[f64]) -> f64 {
        if self.optimizes_omega() {
            x[self.num_amplitudes()]
        } else {
            self.template.omega
        }
    }

    /// Control model of member `m` at parameters `x`.
    pub fn model_at(&self, x: &[f64], member: usize) -> Result<ControlModel> {
        if x.len() != self.dim() {
            return Err(Error::DimensionMismatch { expected: self.dim(), found: x.len() });
        }
        let drift = self
            .drifts
            .get(member)
            .ok_or_else(|| Error::InvalidParameter(format!("no ensemble member {member}")))?;
        let mut m = self.template.clone();
        m.drift = drift.clone();
        m.set_amplitudes(&x[..self.num_amplitudes()])?;
        m.omega = self.omega_of(x);
        if !(m.omega > 0.0) {
            return Err(Error::NotPositive(m.omega));
        }
        Ok(m)
    }

    /// Clamp into the box bounds.
    pub fn project(&self, x: &mut [f64]) {
        let na = self.num_amplitudes();
        for a in &mut x[..na] {
            *a = a.clamp(-self.amplitude_bound, self.amplitude_bound);
        }
        if let Some((lo, hi)) = self.omega_range {
            x[na] = x[na].clamp(lo, hi);
        }
    }

    fn direction(&self, v: &[f64]) -> Perturbation {
        let na = self.num_amplitudes();
        Perturbation::Combination {
            amplitudes: v[..na].to_vec(),
            omega: if self.optimizes_omega() { v[na] } else { 0.0 },
        }
    }

    fn member_eval(&self, x: &[f64], member: usize, req: &Request) -> Result<Evaluation> {
        let model = self.model_at(x, member)?;
        let es = floquet::solve_with(&model, self.truncation)?;
        let obj = &self.objective;
        let mut ev = {
            let p = obj.parts(&es)?;
            Evaluation { f0: p.f0, shape: p.shape, t_f: p.t_f, grad_base: None, grad_tf: None, dir_base: None, dir_tf: None }
        };
        match req {
            Request::Value => {}
            Request::Gradient => {
                let sens = Sensitivity::new(&es)?;
                let dirs = Perturbation::parameter_basis(&model, self.optimizes_omega());
                let first = sens.first_order_many(&dirs)?;
                let parts: Vec<Parts<HyperDual>> =
                    first.par_iter().map(|fo| obj.jet_parts(&ModeJets::first(&es, fo))).collect::<Result<_>>()?;
                ev.grad_base = Some(parts.iter().map(|p| (p.f0 - p.shape).a.re).collect());
                ev.grad_tf = Some(parts.iter().map(|p| p.t_f.a.re).collect());
            }
            Request::Curvature(v) => {
                if v.len() != self.dim() {
                    return Err(Error::DimensionMismatch { expected: self.dim(), found: v.len() });
                }
                let dir = self.direction(v);
                let sens = Sensitivity::new(&es)?;
                let fo = sens.first_order(&dir)?;
                let so = sens.second_order((&dir, &fo), (&dir, &fo));
                let p = obj.jet_parts(&ModeJets::mixed(&es, &fo, &fo, &so))?;
                let base = p.f0 - p.shape;
                ev.dir_base = Some([base.a.re, base.ab.re]);
                ev.dir_tf = Some([p.t_f.a.re, p.t_f.ab.re]);
            }
        }
        Ok(ev)
    }

    /// Member-averaged objective pieces. Members are evaluated in parallel
    /// and reduced in index order.
    pub fn evaluate(&self, x: &[f64], req: &Request) -> Result<Evaluation> {
        let evs: Vec<Evaluation> =
            (0..self.drifts.len()).into_par_iter().map(|m| self.member_eval(x, m, req)).collect::<Result<_>>()?;
        let w = 1.0 / evs.len() as f64;
        let mean = |f: &dyn Fn(&Evaluation) -> f64| evs.iter().map(f).sum::<f64>() * w;
        let mean_vec = |f: &dyn Fn(&Evaluation) -> Option<&Vec<f64>>| -> Option<Vec<f64>> {
            let mut acc = vec![0.0; f(&evs[0])?.len()];
            for e in &evs {
                for (a, x) in acc.iter_mut().zip(f(e)?) {
                    *a += x * w;
                }
            }
            Some(acc)
        };
        let mean_pair = |f: &dyn Fn(&Evaluation) -> Option<[f64; 2]>| -> Option<[f64; 2]> {
            let mut acc = [0.0; 2];
            for e in &evs {
                let v = f(e)?;
                acc[0] += v[0] * w;
                acc[1] += v[1] * w;
            }
            Some(acc)
        };
        Ok(Evaluation {
            f0: mean(&|e| e.f0),
            shape: mean(&|e| e.shape),
            t_f: mean(&|e| e.t_f),
            grad_base: mean_vec(&|e| e.grad_base.as_ref()),
            grad_tf: mean_vec(&|e| e.grad_tf.as_ref()),
            dir_base: mean_pair(&|e| e.dir_base),
            dir_tf: mean_pair(&|e| e.dir_tf),
        })
    }

    /// Full Hessian of `f0 − shape − p·t_f`, averaged over members.
    pub fn hessian(&self, x: &[f64], p: f64) -> Result<Array2<f64>> {
        let mut acc = Array2::zeros((self.dim(), self.dim()));
        let w = 1.0 / self.drifts.len() as f64;
        for m in 0..self.drifts.len() {
            let model = self.model_at(x, m)?;
            let es = floquet::solve_with(&model, self.truncation)?;
            let dirs = Perturbation::parameter_basis(&model, self.optimizes_omega());
            let h = varcalc::hessian(&es, &dirs, |j| {
                let parts = self.objective.jet_parts(j)?;
                Ok(parts.f0 - parts.shape - parts.t_f.scale(C64::new(p, 0.0)))
            })?;
            acc.scaled_add(w, &h);
        }
        Ok(acc)
    }

    /// Eigensystem of member `m` at `x`.
    pub fn eigensystem(&self, x: &[f64], member: usize) -> Result<FloquetEigensystem> {
        floquet::solve_with(&self.model_at(x, member)?, self.truncation)
    }
}

fn check_truncation(model: &ControlModel, truncation: Truncation) -> Result<()> {
    match truncation {
        Truncation::Fixed(nu) if nu < model.n_max => {
            Err(Error::HarmonicBeyondTruncation { harmonic: model.n_max, nu_max: nu })
        }
        Truncation::Auto { tol, .. } if !(tol > 0.0) => Err(Error::NotPositive(tol)),
        _ => Ok(()),
    }
}

/// `Ψ(t) = U(t)|ψ₀⟩`
pub fn evolve(es: &FloquetEigensystem, initial: &StateVector, t: f64) -> StateVector {
    floquet::propagator(es, t).dot(initial)
}

/// `(C²(t), ∂²C²/∂t²)` of `U(t)|ψ₀⟩` for two spins.
pub fn tangle_profile(es: &FloquetEigensystem, initial: &StateVector, t: f64) -> Result<(f64, f64)> {
    if initial.len() != 4 || es.dim_sys() != 4 {
        return Err(Error::DimensionMismatch { expected: 4, found: initial.len() });
    }
    let psi: Vec<Vec<C64>> =
        (0..3).map(|n| floquet::propagator_derivative(es, t, n).dot(initial).to_vec()).collect();
    let (c2, curv) = tangle_and_curvature(&psi[0], &psi[1], &psi[2]);
    Ok((c2.re, curv.re))
}

/// Contiguous interval around `center` within `[lo, hi]` on which
/// `profile > threshold`, or `None` if `center` itself fails. Edges are
/// located by stepping outward by `step` and then bisecting.
pub fn plateau_around(
    profile: impl Fn(f64) -> f64,
    center: f64,
    threshold: f64,
    (lo, hi): (f64, f64),
    step: f64,
) -> Option<(f64, f64)> {
    if !(profile(center) > threshold) || !(step > 0.0) {
        return None;
    }
    let edge = |dir: f64, limit: f64| {
        let mut inside = center;
        loop {
            let next = if dir > 0.0 { (inside + step).min(limit) } else { (inside - step).max(limit) };
            if !(profile(next) > threshold) {
                let mut a = inside;
                let mut b = next;
                for _ in 0..60 {
                    let m = 0.5 * (a + b);
                    if profile(m) > threshold {
                        a = m;
                    } else {
                        b = m;
                    }
                }
                return a;
            }
            if next == limit {
                return limit;
            }
            inside = next;
        }
    };
    Some((edge(-1.0, lo), edge(1.0, hi)))
}

/// Entanglement of formation of the two end spins of `|ψ⟩`.
pub fn end_spin_eof(psi: &StateVector) -> Result<f64> {
    let n = psi.len().trailing_zeros() as usize;
    let norm = linalg::norm(psi);
    spinsys::eof_wootters(&spinsys::reduced_density(&psi.mapv(|z| z / norm), &[1, n])?)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::jet::HyperDual;
    use crate::spinsys::{canonical_gate, TwoSpinParams};
    use std::f64::consts::PI;

    fn gate_model() -> ControlModel {
        let drift = spinsys::two_spin_hamiltonian(&TwoSpinParams { omega1: 0.13, omega2: 0.26, gx: 5.40, gy: 9.95 });
        ControlModel::new(drift, spinsys::xy_controls(2, &[1, 2]).unwrap(), 6, PI / 0.11).unwrap()
    }

    #[test]
    fn plateau_of_a_parabola() {
        let (a, b) = plateau_around(|t| 1.0 - (t - 0.3) * (t - 0.3), 0.31, 0.99, (0.0, 1.0), 0.013).unwrap();
        assert!((a - 0.2).abs() < 1e-12 && (b - 0.4).abs() < 1e-12);
        assert_eq!(plateau_around(|t| 1.0 - t, 0.5, 0.9, (0.0, 1.0), 0.01), None);
        let (a, b) = plateau_around(|_| 1.0, 0.5, 0.9, (0.0, 1.0), 0.3).unwrap();
        assert_eq!((a, b), (0.0, 1.0));
    }

    #[test]
    fn gate_fidelity_extremes() {
        let g = canonical_gate([0.5, 0.4, 0.3]);
        assert!((gate_fidelity(&g, &g).unwrap() - 1.0).abs() < 1e-14);
        assert!((gate_fidelity(&g.mapv(|z| -z), &g).unwrap() + 1.0).abs() < 1e-14);
        assert!(gate_fidelity(&linalg::identity(2), &g).is_err());
    }

    #[test]
    fn drift_alone_gives_modest_gate_fidelity() {
        let m = gate_model();
        let u = floquet::drift_propagator(&m, m.pulse_end()).unwrap();
        assert!(gate_fidelity(&u, &canonical_gate([0.5, 0.4, 0.3])).unwrap() < 0.9);
    }

    #[test]
    fn duration_penalty_and_its_omega_derivative() {
        let m = gate_model().with_amplitudes(&vec![0.0; 24]).unwrap();
        let es = floquet::solve(&m, 12).unwrap();
        let obj = Objective::new(Target::Gate { gate: canonical_gate([0.5, 0.4, 0.3]), modulus: false }, vec![EvalTime::PulseEnd])
            .unwrap();
        let fo = Sensitivity::new(&es).unwrap().first_order(&Perturbation::Omega).unwrap();
        let parts = obj.jet_parts(&ModeJets::first(&es, &fo)).unwrap();
        assert!((parts.t_f.v.re - 0.11).abs() < 1e-14);
        let w = m.omega;
        assert!((parts.t_f.a.re + PI / (w * w)).abs() < 1e-12);
        let ev = Evaluation { f0: 1.0, shape: 0.0, t_f: 0.11, grad_base: None, grad_tf: None, dir_base: None, dir_tf: None };
        assert_eq!(ev.penalty(0.0), 0.0);
        assert!((ev.penalty(1.0) - 0.11).abs() < 1e-15);
    }

    #[test]
    fn tangle_kernel_matches_pure_tangle_and_time_differences() {
        let drift = spinsys::two_spin_hamiltonian(&TwoSpinParams { omega1: 0.3, omega2: 0.2, gx: 2.7, gy: 6.2 });
        let m = ControlModel::new(drift, spinsys::xy_controls(2, &[1, 2]).unwrap(), 2, PI / 0.4).unwrap();
        let es = floquet::solve(&m, 8).unwrap();
        let psi0 = spinsys::bloch_product_state(&spinsys::BlochProductState::new(vec![0.4, 2.1], vec![0.3, 1.2]).unwrap());
        let t = 0.23;
        let (c2, curv) = tangle_profile(&es, &psi0, t).unwrap();
        assert!((c2 - spinsys::tangle_pure(&evolve(&es, &psi0, t)).unwrap()).abs() < 1e-12);
        let h = 1e-4;
        let c = |s: f64| spinsys::tangle_pure(&evolve(&es, &psi0, s)).unwrap();
        let fd = (c(t + h) - 2.0 * c2 + c(t - h)) / (h * h);
        assert!((curv - fd).abs() < 1e-4 * curv.abs().max(1.0), "{curv} vs {fd}");
    }

    #[test]
    fn gate_fidelity_is_invariant_under_common_left_unitary() {
        let g = canonical_gate([0.5, 0.4, 0.3]);
        let u = canonical_gate([0.1, -0.7, 0.2]);
        let h = spinsys::two_spin_hamiltonian(&TwoSpinParams { omega1: 0.4, omega2: -1.1, gx: 0.8, gy: 2.3 });
        let v = linalg::expm_hermitian(&h, 0.77).unwrap();
        let a = gate_fidelity(&u, &g).unwrap();
        let b = gate_fidelity(&v.dot(&u), &v.dot(&g)).unwrap();
        assert!((a - b).abs() < 1e-12);
    }

    #[test]
    fn modulus_variant_ignores_global_phase() {
        let g = canonical_gate([0.5, 0.4, 0.3]);
        let obj_re = Target::Gate { gate: g.clone(), modulus: false };
        let obj_abs = Objective::new(Target::Gate { gate: g.clone(), modulus: true }, vec![EvalTime::At(0.0)]).unwrap();
        let u: Array2<HyperDual> = g.mapv(|z| HyperDual::constant(z * C64::from_polar(1.0, 0.9)));
        let (f, _) = obj_abs.at_time(&[u.clone()], 2, HyperDual::sqrt);
        assert!((f.v.re - 1.0).abs() < 1e-14);
        let o = Objective::new(obj_re, vec![EvalTime::At(0.0)]).unwrap();
        assert!((o.at_time(&[u], 2, HyperDual::sqrt).0.v.re - 0.9f64.cos()).abs() < 1e-14);
    }

    #[test]
    fn ensemble_sampling_is_bounded_and_reproducible() {
        let base = ChainParams::new(vec![0.2, 0.1, 0.3], vec![2.0, 3.0], vec![4.0, 5.0]).unwrap();
        let spec = EnsembleSpec { epsilon: 0.1, members: 10 };
        let a = spec.sample(&base, &mut crate::rng::stream(5, 3)).unwrap();
        let b = spec.sample(&base, &mut crate::rng::stream(5, 3)).unwrap();
        assert_eq!(a, b);
        for m in &a {
            assert_eq!(m.omegas, base.omegas);
            for (g, g0) in m.gx.iter().chain(&m.gy).zip(base.gx.iter().chain(&base.gy)) {
                assert!((g / g0 - 1.0).abs() <= 0.1 + 1e-15);
            }
        }
        let zero = EnsembleSpec { epsilon: 0.0, members: 3 }.sample(&base, &mut crate::rng::stream(5, 3)).unwrap();
        assert!(zero.iter().all(|m| *m == base));
        assert!(EnsembleSpec { epsilon: 0.1, members: 0 }.validate().is_err());
    }
}
