//! Exact parameter derivatives of quasi-energies, Floquet modes and the
//! propagator.
//!
//! The Floquet operator is linear in every control parameter, so each
//! parameter direction corresponds to a fixed generator `G = ∂K/∂θ` and
//! Rayleigh–Schrödinger perturbation theory on the truncated operator gives
//!
//! ```text
//! ∂λ   = ⟨χ|G|χ⟩
//! ∂χ   = −I G χ
//! ∂²λ  = ⟨χ|G_a|χ_b⟩ + ⟨χ|G_b|χ_a⟩
//! ∂²χ  = −I (T_a χ_b + T_b χ_a) − Re⟨χ_a|χ_b⟩ χ,     T = G − ∂λ
//! ```
//!
//! with `I = Σ_{l: |λ_l − λ| > δ} |χ_l⟩⟨χ_l| / (λ_l − λ)` summed over the full
//! truncated spectrum, replicas included. The eigenvector derivatives are in
//! the parallel-transport gauge `⟨χ(0)|χ(θ)⟩ ∈ ℝ⁺`; the propagator is gauge
//! invariant so downstream quantities do not depend on that choice.
//!
//! Derivatives are propagated into the propagator and any functional of it
//! with [`HyperDual`] numbers.

use std::f64::consts::PI;

use ndarray::{s, Array1, Array2, ArrayView1};
use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::floquet::{ControlModel, FloquetEigensystem};
use crate::jet::{HyperDual, Scalar};
use crate::linalg::{Operator, StateVector, C64, I};

/// Eigenvalues closer than `GAP_RELATIVE · Ω` are treated as degenerate.
pub const GAP_RELATIVE: f64 = 1e-8;

/// A direction in parameter space, identified with its generator `∂K/∂θ`.
#[derive(Debug, Clone, PartialEq)]
pub enum Perturbation {
    /// Sine amplitude `a_{channel, harmonic}` (harmonic counts from 1).
    Amplitude { channel: usize, harmonic: usize },
    /// Fundamental frequency at fixed amplitudes: generator `1 ⊗ N̂`.
    Omega,
    /// Uniform energy shift `1 ⊗ 1`; not a control parameter, useful for
    /// checking the machinery.
    Identity,
    /// `Σ_p c_p ∂/∂a_p + c_Ω ∂/∂Ω`, amplitudes in channel-major order.
    Combination { amplitudes: Vec<f64>, omega: f64 },
}

impl Perturbation {
    /// One direction per amplitude in channel-major order, then `Omega` if
    /// requested.
    pub fn parameter_basis(model: &ControlModel, include_omega: bool) -> Vec<Self> {
        let mut out: Vec<Self> = (0..model.channels.len())
            .flat_map(|channel| (1..=model.n_max).map(move |harmonic| Self::Amplitude { channel, harmonic }))
            .collect();
        if include_omega {
            out.push(Self::Omega);
        }
        out
    }

    /// `∂Ω/∂θ` along this direction.
    pub fn omega_rate(&self) -> f64 {
        match self {
            Self::Omega => 1.0,
            Self::Combination { omega, .. } => *omega,
            _ => 0.0,
        }
    }

    pub fn validate(&self, model: &ControlModel) -> Result<()> {
        match self {
            Self::Amplitude { channel, harmonic } => {
                if *channel >= model.channels.len() || *harmonic == 0 || *harmonic > model.n_max {
                    return Err(Error::InvalidParameter(format!(
                        "amplitude ({channel}, {harmonic}) outside {} channels × {} harmonics",
                        model.channels.len(),
                        model.n_max
                    )));
                }
            }
            Self::Combination { amplitudes, .. } => {
                if amplitudes.len() != model.num_amplitudes() {
                    return Err(Error::DimensionMismatch { expected: model.num_amplitudes(), found: amplitudes.len() });
                }
            }
            Self::Omega | Self::Identity => {}
        }
        Ok(())
    }

    /// Copy of `model` moved by `h` along this direction.
    pub fn displace(&self, model: &ControlModel, h: f64) -> Result<ControlModel> {
        self.validate(model)?;
        let mut out = model.clone();
        match self {
            Self::Amplitude { channel, harmonic } => out.channels[*channel].amplitudes[harmonic - 1] += h,
            Self::Omega => out.omega += h,
            Self::Identity => {
                return Err(Error::InvalidParameter("the identity direction is not a model parameter".into()))
            }
            Self::Combination { amplitudes, omega } => {
                let a: Vec<f64> = model.amplitudes().iter().zip(amplitudes).map(|(x, c)| x + h * c).collect();
                out.set_amplitudes(&a)?;
                out.omega += h * omega;
            }
        }
        if out.omega <= 0.0 {
            return Err(Error::NotPositive(out.omega));
        }
        Ok(out)
    }

    /// `G v` for a Floquet-space vector `v`.
    pub fn apply(&self, model: &ControlModel, nu_max: usize, v: ArrayView1<C64>) -> StateVector {
        let d = model.dim();
        let mut out = Array1::zeros(v.len());
        match self {
            Self::Amplitude { channel, harmonic } => {
                add_channel(&mut out, &model.channels[*channel].operator, &[(*harmonic, 1.0)], v, nu_max, d);
            }
            Self::Omega => add_number(&mut out, 1.0, v, nu_max, d),
            Self::Identity => out.assign(&v),
            Self::Combination { amplitudes, omega } => {
                for (i, c) in model.channels.iter().enumerate() {
                    let coefs: Vec<(usize, f64)> = (1..=model.n_max)
                        .map(|n| (n, amplitudes[i * model.n_max + n - 1]))
                        .filter(|&(_, x)| x != 0.0)
                        .collect();
                    if !coefs.is_empty() {
                        add_channel(&mut out, &c.operator, &coefs, v, nu_max, d);
                    }
                }
                if *omega != 0.0 {
                    add_number(&mut out, *omega, v, nu_max, d);
                }
            }
        }
        out
    }

    /// Dense generator matrix.
    pub fn matrix(&self, model: &ControlModel, nu_max: usize) -> Operator {
        let dim = model.dim() * (2 * nu_max + 1);
        let mut m = Array2::zeros((dim, dim));
        let mut e = Array1::zeros(dim);
        for j in 0..dim {
            e[j] = C64::new(1.0, 0.0);
            m.column_mut(j).assign(&self.apply(model, nu_max, e.view()));
            e[j] = C64::new(0.0, 0.0);
        }
        m
    }
}

/// `out += Σ_n c_n (h ⊗ (π_n − π_{−n}) / 2i) v`
fn add_channel(out: &mut StateVector, h: &Operator, coefs: &[(usize, f64)], v: ArrayView1<C64>, nu_max: usize, d: usize) {
    let l = nu_max as i64;
    for nu in -l..=l {
        let src = ((nu + l) as usize) * d;
        let w = h.dot(&v.slice(s![src..src + d])).mapv(|z| z / (2.0 * I));
        for &(n, c) in coefs {
            let n = n as i64;
            if nu + n <= l {
                let dst = ((nu + n + l) as usize) * d;
                out.slice_mut(s![dst..dst + d]).scaled_add(C64::new(c, 0.0), &w);
            }
            if nu - n >= -l {
                let dst = ((nu - n + l) as usize) * d;
                out.slice_mut(s![dst..dst + d]).scaled_add(C64::new(-c, 0.0), &w);
            }
        }
    }
}

/// `out += c (1 ⊗ N̂) v`
fn add_number(out: &mut StateVector, c: f64, v: ArrayView1<C64>, nu_max: usize, d: usize) {
    for (b, (mut o, x)) in out.exact_chunks_mut(d).into_iter().zip(v.exact_chunks(d)).enumerate() {
        let nu = b as f64 - nu_max as f64;
        o.scaled_add(C64::new(c * nu, 0.0), &x);
    }
}

/// First derivatives of all selected modes along one direction.
#[derive(Debug, Clone)]
pub struct FirstOrder {
    pub omega_rate: f64,
    pub dlambda: Vec<f64>,
    pub dchi: Vec<StateVector>,
}

/// Mixed second derivatives of all selected modes along two directions.
#[derive(Debug, Clone)]
pub struct SecondOrder {
    pub dlambda: Vec<f64>,
    pub dchi: Vec<StateVector>,
}

/// Smallest distance from mode `k`'s eigenvalue to any other eigenvalue of
/// the truncated operator.
pub fn spectral_gap(es: &FloquetEigensystem, k: usize) -> f64 {
    let j = es.spectral_index(k);
    let lk = es.full_energies()[j];
    es.full_energies()
        .iter()
        .enumerate()
        .filter(|&(l, _)| l != j)
        .map(|(_, &x)| (x - lk).abs())
        .fold(f64::INFINITY, f64::min)
}

/// Perturbation-theory workspace for one eigensystem.
pub struct Sensitivity<'a> {
    es: &'a FloquetEigensystem,
    vh: Operator,
    delta: f64,
}

impl<'a> Sensitivity<'a> {
    /// Fails with [`Error::DegenerateMode`] if a selected mode is degenerate
    /// with any other eigenvalue of the truncated operator.
    pub fn new(es: &'a FloquetEigensystem) -> Result<Self> {
        let delta = GAP_RELATIVE * es.omega();
        for k in 0..es.dim_sys() {
            let gap = spectral_gap(es, k);
            if gap <= delta {
                return Err(Error::DegenerateMode { mode: k, gap });
            }
        }
        let vh = es.full_vectors().t().mapv(|z| z.conj());
        Ok(Self { es, vh, delta })
    }

    pub fn eigensystem(&self) -> &'a FloquetEigensystem {
        self.es
    }

    /// Applies `I_k^power` to each `(k, v)` column in one batch.
    fn resolve(&self, cols: &[(usize, StateVector)], power: i32) -> Vec<StateVector> {
        if cols.is_empty() {
            return Vec::new();
        }
        let dim = self.es.dim_floquet();
        let mut b = Array2::<C64>::zeros((dim, cols.len()));
        for (c, (_, v)) in cols.iter().enumerate() {
            b.column_mut(c).assign(v);
        }
        let mut coef = self.vh.dot(&b);
        let energies = self.es.full_energies();
        for (c, (k, _)) in cols.iter().enumerate() {
            let lk = self.es.raw_energy(*k);
            for (l, z) in coef.column_mut(c).iter_mut().enumerate() {
                let diff = energies[l] - lk;
                *z = if diff.abs() > self.delta { *z / diff.powi(power) } else { C64::new(0.0, 0.0) };
            }
        }
        let x = self.es.full_vectors().dot(&coef);
        x.columns().into_iter().map(|c| c.to_owned()).collect()
    }

    /// `I_k^power v` for `power` 1 or 2.
    pub fn pseudo_inverse_apply(&self, k: usize, v: &StateVector, power: i32) -> Result<StateVector> {
        if !(1..=2).contains(&power) {
            return Err(Error::InvalidParameter(format!("pseudo-inverse power {power} outside 1..=2")));
        }
        Ok(self.resolve(&[(k, v.clone())], power).pop().expect("one column"))
    }

    pub fn first_order(&self, pert: &Perturbation) -> Result<FirstOrder> {
        Ok(self.first_order_many(std::slice::from_ref(pert))?.pop().expect("one direction"))
    }

    /// First derivatives along several directions with one batched resolvent
    /// application.
    pub fn first_order_many(&self, perts: &[Perturbation]) -> Result<Vec<FirstOrder>> {
        let es = self.es;
        let model = es.model();
        let d = es.dim_sys();
        for p in perts {
            p.validate(model)?;
        }
        let mut cols = Vec::with_capacity(perts.len() * d);
        let mut dlambda = vec![vec![0.0; d]; perts.len()];
        for (ip, p) in perts.iter().enumerate() {
            for k in 0..d {
                let chi = es.mode(k);
                let g = p.apply(model, es.nu_max(), chi);
                dlambda[ip][k] = dotc(chi, g.view()).re;
                cols.push((k, g));
            }
        }
        let mut x = self.resolve(&cols, 1).into_iter();
        Ok(perts
            .iter()
            .zip(dlambda)
            .map(|(p, dl)| FirstOrder {
                omega_rate: p.omega_rate(),
                dlambda: dl,
                dchi: (0..d).map(|_| -x.next().expect("column")).collect(),
            })
            .collect())
    }

    /// Mixed second derivatives for each pair `(a, b)` of directions with
    /// precomputed first-order data.
    pub fn second_order_many(&self, pairs: &[((&Perturbation, &FirstOrder), (&Perturbation, &FirstOrder))]) -> Vec<SecondOrder> {
        let es = self.es;
        let model = es.model();
        let d = es.dim_sys();
        let l = es.nu_max();
        let mut cols = Vec::with_capacity(pairs.len() * d);
        let mut dlambda = vec![vec![0.0; d]; pairs.len()];
        let mut overlaps = vec![vec![0.0; d]; pairs.len()];
        for (ip, ((pa, fa), (pb, fb))) in pairs.iter().enumerate() {
            for k in 0..d {
                let chi = es.mode(k);
                let (xa, xb) = (&fa.dchi[k], &fb.dchi[k]);
                let ga_xb = pa.apply(model, l, xb.view());
                let gb_xa = pb.apply(model, l, xa.view());
                dlambda[ip][k] = (dotc(chi, ga_xb.view()) + dotc(chi, gb_xa.view())).re;
                overlaps[ip][k] = dotc(xa.view(), xb.view()).re;
                let mut t = ga_xb + gb_xa;
                t.scaled_add(C64::new(-fa.dlambda[k], 0.0), xb);
                t.scaled_add(C64::new(-fb.dlambda[k], 0.0), xa);
                cols.push((k, t));
            }
        }
        let mut x = self.resolve(&cols, 1).into_iter();
        dlambda
            .into_iter()
            .zip(overlaps)
            .map(|(dl, ov)| SecondOrder {
                dlambda: dl,
                dchi: (0..d)
                    .map(|k| {
                        let mut v = -x.next().expect("column");
                        v.scaled_add(C64::new(-ov[k], 0.0), &es.mode(k));
                        v
                    })
                    .collect(),
            })
            .collect()
    }

    pub fn second_order(&self, a: (&Perturbation, &FirstOrder), b: (&Perturbation, &FirstOrder)) -> SecondOrder {
        self.second_order_many(&[(a, b)]).pop().expect("one pair")
    }
}

fn dotc(a: ArrayView1<C64>, b: ArrayView1<C64>) -> C64 {
    a.iter().zip(b.iter()).map(|(x, y)| x.conj() * y).sum()
}

/// `∂λ_k/∂θ` for every selected mode.
pub fn quasi_energy_gradient(es: &FloquetEigensystem, pert: &Perturbation) -> Result<Vec<f64>> {
    Ok(Sensitivity::new(es)?.first_order(pert)?.dlambda)
}

/// `∂χ_k/∂θ` in the parallel-transport gauge.
pub fn eigvec_gradient(es: &FloquetEigensystem, pert: &Perturbation, k: usize) -> Result<StateVector> {
    if k >= es.dim_sys() {
        return Err(Error::InvalidParameter(format!("mode {k} outside 0..{}", es.dim_sys())));
    }
    Ok(Sensitivity::new(es)?.first_order(pert)?.dchi.swap_remove(k))
}

/// `(∂²λ_k, ∂²χ_k)` along directions `a` and `b` for every selected mode.
pub fn second_derivatives(es: &FloquetEigensystem, a: &Perturbation, b: &Perturbation) -> Result<SecondOrder> {
    let sens = Sensitivity::new(es)?;
    let f = sens.first_order_many(&[a.clone(), b.clone()])?;
    Ok(sens.second_order((a, &f[0]), (b, &f[1])))
}

/// Evaluation time of a propagator.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum EvalTime {
    At(f64),
    /// `t_f = π/Ω`, which moves with `Ω`.
    PulseEnd,
}

/// Quasi-energies, modes and `Ω` of one eigensystem as hyper-dual numbers
/// along two parameter directions.
#[derive(Debug, Clone)]
pub struct ModeJets {
    d: usize,
    nu_max: usize,
    omega: HyperDual,
    lambdas: Vec<HyperDual>,
    chis: Vec<Vec<HyperDual>>,
}

impl ModeJets {
    /// No parameter dependence.
    pub fn constant(es: &FloquetEigensystem) -> Self {
        Self::build(es, None, None, None)
    }

    /// `a = b = ` the direction of `fo`; the mixed part is left at zero, so
    /// only first derivatives are meaningful.
    pub fn first(es: &FloquetEigensystem, fo: &FirstOrder) -> Self {
        Self::build(es, Some(fo), Some(fo), None)
    }

    /// Full jet along `a` and `b` with mixed derivatives `ab`.
    pub fn mixed(es: &FloquetEigensystem, a: &FirstOrder, b: &FirstOrder, ab: &SecondOrder) -> Self {
        Self::build(es, Some(a), Some(b), Some(ab))
    }

    fn build(es: &FloquetEigensystem, a: Option<&FirstOrder>, b: Option<&FirstOrder>, ab: Option<&SecondOrder>) -> Self {
        let d = es.dim_sys();
        let zero = C64::new(0.0, 0.0);
        let omega = HyperDual::real(
            es.omega(),
            a.map_or(0.0, |f| f.omega_rate),
            b.map_or(0.0, |f| f.omega_rate),
            0.0,
        );
        let lambdas = (0..d)
            .map(|k| {
                HyperDual::real(
                    es.raw_energy(k),
                    a.map_or(0.0, |f| f.dlambda[k]),
                    b.map_or(0.0, |f| f.dlambda[k]),
                    ab.map_or(0.0, |f| f.dlambda[k]),
                )
            })
            .collect();
        let chis = (0..d)
            .map(|k| {
                es.mode(k)
                    .iter()
                    .enumerate()
                    .map(|(i, &v)| {
                        HyperDual::new(
                            v,
                            a.map_or(zero, |f| f.dchi[k][i]),
                            b.map_or(zero, |f| f.dchi[k][i]),
                            ab.map_or(zero, |f| f.dchi[k][i]),
                        )
                    })
                    .collect()
            })
            .collect();
        Self { d, nu_max: es.nu_max(), omega, lambdas, chis }
    }

    pub fn dim_sys(&self) -> usize {
        self.d
    }

    pub fn omega(&self) -> HyperDual {
        self.omega
    }

    /// `π/Ω` with its parameter dependence.
    pub fn pulse_end(&self) -> HyperDual {
        self.omega.recip().scale(C64::new(PI, 0.0))
    }

    pub fn time(&self, when: EvalTime) -> HyperDual {
        match when {
            EvalTime::At(t) => HyperDual::real(t, 0.0, 0.0, 0.0),
            EvalTime::PulseEnd => self.pulse_end(),
        }
    }

    /// `[U, ∂_tU, …, ∂_t^{max_order}U]` at time `t`.
    pub fn propagator_jets(&self, t: HyperDual, max_order: u32) -> Vec<Array2<HyperDual>> {
        let d = self.d;
        let orders = max_order as usize + 1;
        let mut out = vec![Array2::from_elem((d, d), HyperDual::zero()); orders];
        for (lam, chi) in self.lambdas.iter().zip(&self.chis) {
            let mut left = vec![vec![HyperDual::zero(); d]; orders];
            let mut right = vec![HyperDual::zero(); d];
            for (b, block) in chi.chunks_exact(d).enumerate() {
                let nu = b as f64 - self.nu_max as f64;
                let iz = (self.omega.scale(C64::new(nu, 0.0)) - *lam).scale(I);
                let mut w = (iz * t).exp();
                for row in left.iter_mut() {
                    for (acc, &x) in row.iter_mut().zip(block) {
                        *acc += w * x;
                    }
                    w = w * iz;
                }
                for (acc, &x) in right.iter_mut().zip(block) {
                    *acc += x;
                }
            }
            let right: Vec<HyperDual> = right.into_iter().map(Scalar::conj).collect();
            for (u, l) in out.iter_mut().zip(&left) {
                for a in 0..d {
                    for c in 0..d {
                        u[[a, c]] += l[a] * right[c];
                    }
                }
            }
        }
        out
    }

    /// `U(t)` jet.
    pub fn propagator(&self, t: HyperDual) -> Array2<HyperDual> {
        self.propagator_jets(t, 0).pop().expect("order 0")
    }
}

/// Value and gradient of a functional of the mode jets. The functional is
/// evaluated once per direction with `a = b = e_p`.
pub fn gradient<F>(es: &FloquetEigensystem, perts: &[Perturbation], f: F) -> Result<(f64, Vec<f64>)>
where
    F: Fn(&ModeJets) -> Result<HyperDual> + Sync,
{
    if perts.is_empty() {
        return Ok((f(&ModeJets::constant(es))?.v.re, Vec::new()));
    }
    let sens = Sensitivity::new(es)?;
    let first = sens.first_order_many(perts)?;
    let vals: Vec<HyperDual> = first
        .par_iter()
        .map(|fo| f(&ModeJets::first(es, fo)))
        .collect::<Result<_>>()?;
    Ok((vals[0].v.re, vals.iter().map(|h| h.a.re).collect()))
}

/// Jet of a functional along one direction: value, directional derivative
/// and second directional derivative in `v`, `a` and `ab`.
pub fn directional_curvature<F>(es: &FloquetEigensystem, dir: &Perturbation, f: F) -> Result<HyperDual>
where
    F: Fn(&ModeJets) -> Result<HyperDual>,
{
    let sens = Sensitivity::new(es)?;
    let fo = sens.first_order(dir)?;
    let so = sens.second_order((dir, &fo), (dir, &fo));
    f(&ModeJets::mixed(es, &fo, &fo, &so))
}

/// Full Hessian of a functional. Costs one functional evaluation and one
/// resolvent column per mode for each parameter pair.
pub fn hessian<F>(es: &FloquetEigensystem, perts: &[Perturbation], f: F) -> Result<Array2<f64>>
where
    F: Fn(&ModeJets) -> Result<HyperDual> + Sync,
{
    let n = perts.len();
    let sens = Sensitivity::new(es)?;
    let first = sens.first_order_many(perts)?;
    let idx: Vec<(usize, usize)> = (0..n).flat_map(|p| (p..n).map(move |q| (p, q))).collect();
    let pairs: Vec<_> = idx.iter().map(|&(p, q)| ((&perts[p], &first[p]), (&perts[q], &first[q]))).collect();
    let second = sens.second_order_many(&pairs);
    let vals: Vec<f64> = idx
        .par_iter()
        .zip(second.par_iter())
        .map(|(&(p, q), so)| Ok(f(&ModeJets::mixed(es, &first[p], &first[q], so))?.ab.re))
        .collect::<Result<_>>()?;
    let mut h = Array2::zeros((n, n));
    for (&(p, q), v) in idx.iter().zip(vals) {
        h[[p, q]] = v;
        h[[q, p]] = v;
    }
    Ok(h)
}

/// Propagator and its parameter derivatives at one time.
#[derive(Debug, Clone)]
pub struct DerivativeBundle {
    pub u: Operator,
    /// `∂U/∂θ_p`
    pub du: Vec<Operator>,
    /// `∂²U/∂θ_p∂θ_q`, if requested.
    pub d2u: Option<Vec<Vec<Operator>>>,
}

fn part(m: &Array2<HyperDual>, f: impl Fn(&HyperDual) -> C64) -> Operator {
    m.map(f)
}

pub fn propagator_gradient(
    es: &FloquetEigensystem,
    perts: &[Perturbation],
    when: EvalTime,
    with_hessian: bool,
) -> Result<DerivativeBundle> {
    let sens = Sensitivity::new(es)?;
    let first = sens.first_order_many(perts)?;
    let u = part(&ModeJets::constant(es).propagator(ModeJets::constant(es).time(when)), |h| h.v);
    let du = first
        .iter()
        .map(|fo| {
            let j = ModeJets::first(es, fo);
            part(&j.propagator(j.time(when)), |h| h.a)
        })
        .collect();
    let d2u = if with_hessian {
        let n = perts.len();
        let mut out = vec![vec![Array2::zeros((0, 0)); n]; n];
        for p in 0..n {
            for q in p..n {
                let so = sens.second_order((&perts[p], &first[p]), (&perts[q], &first[q]));
                let j = ModeJets::mixed(es, &first[p], &first[q], &so);
                let m = part(&j.propagator(j.time(when)), |h| h.ab);
                out[q][p] = m.clone();
                out[p][q] = m;
            }
        }
        Some(out)
    } else {
        None
    };
    Ok(DerivativeBundle { u, du, d2u })
}

/// `d/dΩ U(π/Ω)` including the motion of the pulse end.
pub fn total_omega_derivative(es: &FloquetEigensystem) -> Result<Operator> {
    let sens = Sensitivity::new(es)?;
    let fo = sens.first_order(&Perturbation::Omega)?;
    let j = ModeJets::first(es, &fo);
    Ok(part(&j.propagator(j.pulse_end()), |h| h.a))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::floquet::{self, propagator};
    use crate::linalg::{max_abs, max_abs_diff};
    use crate::spinsys::{self, TwoSpinParams};

    fn model(amps: &[f64]) -> ControlModel {
        let drift = spinsys::two_spin_hamiltonian(&TwoSpinParams { omega1: 0.3, omega2: 0.2, gx: 2.7, gy: 6.2 });
        let m = ControlModel::new(drift, spinsys::xy_controls(2, &[1, 2]).unwrap(), 2, 9.0).unwrap();
        m.with_amplitudes(amps).unwrap()
    }

    const AMPS: [f64; 8] = [0.8, -0.4, 0.3, 0.5, -0.6, 0.2, 0.1, 0.7];

    #[test]
    fn generators_are_exact_differences_of_the_floquet_operator() {
        let m = model(&AMPS);
        let nu = 6;
        let k0 = floquet::assemble(&m, nu).unwrap().matrix;
        for (p, pert) in Perturbation::parameter_basis(&m, true).iter().enumerate() {
            let mut m1 = m.clone();
            if p < 8 {
                let mut a = AMPS;
                a[p] += 1.0;
                m1.set_amplitudes(&a).unwrap();
            } else {
                m1.omega += 1.0;
            }
            let diff = floquet::assemble(&m1, nu).unwrap().matrix - &k0;
            assert!(max_abs_diff(&diff, &pert.matrix(&m, nu)) < 1e-12, "{pert:?}");
        }
    }

    #[test]
    fn combination_is_linear() {
        let m = model(&AMPS);
        let coefs: Vec<f64> = (0..8).map(|i| 0.1 * i as f64 - 0.3).collect();
        let comb = Perturbation::Combination { amplitudes: coefs.clone(), omega: 0.7 };
        let mut expect = Perturbation::Omega.matrix(&m, 4).mapv(|z| z * 0.7);
        for (c, p) in coefs.iter().zip(Perturbation::parameter_basis(&m, false)) {
            expect.scaled_add(C64::new(*c, 0.0), &p.matrix(&m, 4));
        }
        assert!(max_abs_diff(&comb.matrix(&m, 4), &expect) < 1e-13);
    }

    #[test]
    fn identity_direction_shifts_every_energy() {
        let m = model(&AMPS);
        let es = floquet::solve(&m, 24).unwrap();
        let sens = Sensitivity::new(&es).unwrap();
        let fo = sens.first_order(&Perturbation::Identity).unwrap();
        for k in 0..4 {
            assert!((fo.dlambda[k] - 1.0).abs() < 1e-12);
            assert!(max_abs(fo.dchi[k].view().insert_axis(ndarray::Axis(1))) < 1e-10);
        }
        let t = 0.37;
        let du = propagator_gradient(&es, &[Perturbation::Identity], EvalTime::At(t), false).unwrap();
        let expect = propagator(&es, t).mapv(|z| z * (-I * t));
        assert!(max_abs_diff(&du.du[0], &expect) < 1e-10);
    }

    #[test]
    fn exact_symmetry_is_reported_as_degenerate() {
        let drift = spinsys::two_spin_hamiltonian(&TwoSpinParams { omega1: 0.0, omega2: 0.0, gx: 3.0, gy: 3.0 });
        let m = ControlModel::new(drift, spinsys::xy_controls(2, &[1, 2]).unwrap(), 2, 9.0).unwrap();
        let es = floquet::solve(&m, 8).unwrap();
        assert!(matches!(Sensitivity::new(&es), Err(Error::DegenerateMode { .. })));
        assert!(matches!(
            quasi_energy_gradient(&es, &Perturbation::Omega),
            Err(Error::DegenerateMode { .. })
        ));
    }

    #[test]
    fn pseudo_inverse_inverts_off_the_mode() {
        let m = model(&AMPS);
        let es = floquet::solve(&m, 10).unwrap();
        let sens = Sensitivity::new(&es).unwrap();
        let kmat = floquet::assemble(&m, 10).unwrap().matrix;
        let v = Perturbation::Amplitude { channel: 1, harmonic: 2 }.apply(&m, 10, es.mode(2));
        let x = sens.pseudo_inverse_apply(2, &v, 1).unwrap();
        let x2 = sens.pseudo_inverse_apply(2, &v, 2).unwrap();
        // (K − λ) I v = Q v and (K − λ) I² v = I v
        let lam = es.raw_energy(2);
        let chi = es.mode(2).to_owned();
        let q_v = &v - &chi.mapv(|z| z * dotc(chi.view(), v.view()));
        let lhs = kmat.dot(&x) - x.mapv(|z| z * lam);
        assert!((&lhs - &q_v).iter().map(|z| z.norm()).fold(0.0, f64::max) < 1e-10);
        let lhs2 = kmat.dot(&x2) - x2.mapv(|z| z * lam);
        assert!((&lhs2 - &x).iter().map(|z| z.norm()).fold(0.0, f64::max) < 1e-10);
        assert!(sens.pseudo_inverse_apply(2, &v, 3).is_err());
    }
}
