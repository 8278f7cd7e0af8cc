//! Floquet-space representation of a periodically driven spin system.
//!
//! The extended space is `system ⊗ Fourier modes` with Fourier indices
//! `ν ∈ [−ν_max, ν_max]`. A Floquet-space vector stores the system components
//! of Fourier index `ν` at offsets `(ν + ν_max)·d .. (ν + ν_max + 1)·d`.
//!
//! With `H(t) = H_D + Σ_i Σ_n a_{i,n} sin(nΩt) h_i` the Floquet operator has
//! blocks `K_{νμ} = H_{ν−μ} + δ_{νμ} νΩ`, where the only non-zero Fourier
//! components are `H_0 = H_D` and `H_{±n} = ±Σ_i a_{i,n} h_i / (2i)`.

use std::f64::consts::PI;

use log::{debug, warn};
use ndarray::{s, Array1, Array2, ArrayView1};

use crate::error::{Error, Result};
use crate::linalg::{self, Operator, StateVector, C64, I};

/// Completeness defect above which an eigensystem is flagged as
/// under-resolved.
pub const COMPLETENESS_WARN: f64 = 1e-8;

/// Default cap for [`adaptive_truncation`].
pub const TRUNCATION_CAP: usize = 512;

#[derive(Debug, Clone, PartialEq)]
pub struct Channel {
    pub operator: Operator,
    /// `a_{i,n}` for `n = 1..=n_max`, rad/µs.
    pub amplitudes: Vec<f64>,
}

/// Drift plus sine-series controls `f_i(t) = Σ_n a_{i,n} sin(nΩt)`. Every
/// control vanishes at `t = 0` and `t = π/Ω`.
#[derive(Debug, Clone, PartialEq)]
pub struct ControlModel {
    pub drift: Operator,
    pub channels: Vec<Channel>,
    /// Fundamental frequency, rad/µs.
    pub omega: f64,
    pub n_max: usize,
}

impl ControlModel {
    /// A model with all amplitudes zero.
    pub fn new(drift: Operator, operators: Vec<Operator>, n_max: usize, omega: f64) -> Result<Self> {
        let d = drift.nrows();
        if drift.ncols() != d || !d.is_power_of_two() {
            return Err(Error::InvalidParameter(format!("drift must be square with 2^N rows, got {:?}", drift.dim())));
        }
        if linalg::hermiticity_defect(&drift) > 1e-12 {
            return Err(Error::InvalidParameter("drift is not Hermitian".into()));
        }
        for h in &operators {
            if h.dim() != (d, d) {
                return Err(Error::DimensionMismatch { expected: d, found: h.nrows() });
            }
            if linalg::hermiticity_defect(h) > 1e-12 {
                return Err(Error::InvalidParameter("control operator is not Hermitian".into()));
            }
        }
        if !(omega > 0.0 && omega.is_finite()) {
            return Err(Error::InvalidParameter(format!("fundamental frequency must be positive, got {omega}")));
        }
        let channels = operators
            .into_iter()
            .map(|operator| Channel { operator, amplitudes: vec![0.0; n_max] })
            .collect();
        Ok(Self { drift, channels, omega, n_max })
    }

    pub fn dim(&self) -> usize {
        self.drift.nrows()
    }

    pub fn num_amplitudes(&self) -> usize {
        self.channels.len() * self.n_max
    }

    /// Amplitudes flattened channel-major: index `i·n_max + (n − 1)`.
    pub fn amplitudes(&self) -> Vec<f64> {
        self.channels.iter().flat_map(|c| c.amplitudes.iter().copied()).collect()
    }

    pub fn set_amplitudes(&mut self, amps: &[f64]) -> Result<()> {
        if amps.len() != self.num_amplitudes() {
            return Err(Error::DimensionMismatch { expected: self.num_amplitudes(), found: amps.len() });
        }
        if amps.iter().any(|a| !a.is_finite()) {
            return Err(Error::InvalidParameter("non-finite amplitude".into()));
        }
        for (c, chunk) in self.channels.iter_mut().zip(amps.chunks(self.n_max)) {
            c.amplitudes.copy_from_slice(chunk);
        }
        Ok(())
    }

    pub fn with_amplitudes(mut self, amps: &[f64]) -> Result<Self> {
        self.set_amplitudes(amps)?;
        Ok(self)
    }

    /// `t_f = π/Ω`, where every sine harmonic returns to zero.
    pub fn pulse_end(&self) -> f64 {
        PI / self.omega
    }

    pub fn field(&self, channel: usize, t: f64) -> f64 {
        self.channels[channel]
            .amplitudes
            .iter()
            .enumerate()
            .map(|(j, a)| a * ((j + 1) as f64 * self.omega * t).sin())
            .sum()
    }

    pub fn hamiltonian(&self, t: f64) -> Operator {
        let mut h = self.drift.clone();
        for (i, c) in self.channels.iter().enumerate() {
            let f = self.field(i, t);
            if f != 0.0 {
                h.scaled_add(C64::new(f, 0.0), &c.operator);
            }
        }
        h
    }

    pub fn max_coefficient(&self) -> f64 {
        self.amplitudes().iter().fold(0.0, |m, a| m.max(a.abs()))
    }

    /// Largest `|f_i(t)|` over `samples` uniform points in `[0, π/Ω]`.
    pub fn peak_field(&self, samples: usize) -> f64 {
        let tf = self.pulse_end();
        let mut peak: f64 = 0.0;
        for s in 0..=samples {
            let t = tf * s as f64 / samples as f64;
            for i in 0..self.channels.len() {
                peak = peak.max(self.field(i, t).abs());
            }
        }
        peak
    }

    pub fn default_nu_max(&self) -> usize {
        32.max(4 * self.n_max)
    }
}

/// Truncated matrix of `K = H − i∂_t`.
#[derive(Debug, Clone)]
pub struct FloquetOperator {
    pub nu_max: usize,
    pub dim_sys: usize,
    pub omega: f64,
    pub matrix: Operator,
    model: ControlModel,
}

impl FloquetOperator {
    pub fn dim(&self) -> usize {
        self.matrix.nrows()
    }

    pub fn model(&self) -> &ControlModel {
        &self.model
    }
}

fn block_offset(nu: i64, nu_max: usize, d: usize) -> usize {
    (nu + nu_max as i64) as usize * d
}

/// Adds `coef · h ⊗ (π_n − π_{−n}) / (2i)` to `matrix`.
fn add_sine_harmonic(matrix: &mut Operator, h: &Operator, coef: f64, n: usize, nu_max: usize) {
    let d = h.nrows();
    let up = h.mapv(|z| z * coef / (2.0 * I));
    let l = nu_max as i64;
    let n = n as i64;
    for nu in -l..=l {
        let col = block_offset(nu, nu_max, d);
        if nu + n <= l {
            let row = block_offset(nu + n, nu_max, d);
            let mut blk = matrix.slice_mut(s![row..row + d, col..col + d]);
            blk += &up;
        }
        if nu - n >= -l {
            let row = block_offset(nu - n, nu_max, d);
            let mut blk = matrix.slice_mut(s![row..row + d, col..col + d]);
            blk -= &up;
        }
    }
}

/// Contribution `a_{i,n} h_i ⊗ (π_n − π_{−n})/(2i)` of one harmonic of one
/// channel.
pub fn fourier_block(model: &ControlModel, channel: usize, harmonic: usize, nu_max: usize) -> Result<Operator> {
    if harmonic == 0 || harmonic > model.n_max {
        return Err(Error::InvalidParameter(format!("harmonic {harmonic} outside 1..={}", model.n_max)));
    }
    if harmonic > nu_max {
        return Err(Error::HarmonicBeyondTruncation { harmonic, nu_max });
    }
    let c = model
        .channels
        .get(channel)
        .ok_or_else(|| Error::InvalidParameter(format!("no control channel {channel}")))?;
    let dim = model.dim() * (2 * nu_max + 1);
    let mut m = Array2::zeros((dim, dim));
    add_sine_harmonic(&mut m, &c.operator, c.amplitudes[harmonic - 1], harmonic, nu_max);
    Ok(m)
}

pub fn assemble(model: &ControlModel, nu_max: usize) -> Result<FloquetOperator> {
    if model.n_max > nu_max {
        return Err(Error::HarmonicBeyondTruncation { harmonic: model.n_max, nu_max });
    }
    let d = model.dim();
    let dim = d * (2 * nu_max + 1);
    let mut matrix = Array2::zeros((dim, dim));
    let l = nu_max as i64;
    for nu in -l..=l {
        let o = block_offset(nu, nu_max, d);
        let mut blk = matrix.slice_mut(s![o..o + d, o..o + d]);
        blk.assign(&model.drift);
        for i in 0..d {
            blk[[i, i]] += C64::new(nu as f64 * model.omega, 0.0);
        }
    }
    for c in &model.channels {
        for (j, &a) in c.amplitudes.iter().enumerate() {
            if a != 0.0 {
                add_sine_harmonic(&mut matrix, &c.operator, a, j + 1, nu_max);
            }
        }
    }
    Ok(FloquetOperator { nu_max, dim_sys: d, omega: model.omega, matrix, model: model.clone() })
}

/// Eigenpairs of the truncated Floquet operator with one representative per
/// physical mode selected.
#[derive(Debug, Clone)]
pub struct FloquetEigensystem {
    model: ControlModel,
    nu_max: usize,
    energies: Vec<f64>,
    vectors: Operator,
    selected: Vec<usize>,
    folds: Vec<i64>,
    initial: Vec<StateVector>,
    completeness_defect: f64,
}

/// Fourier-weight centroid `Σ_ν ν ‖χ_ν‖²` of a unit Floquet-space vector.
pub fn fourier_centroid(v: ArrayView1<C64>, nu_max: usize, d: usize) -> f64 {
    v.exact_chunks(d)
        .into_iter()
        .enumerate()
        .map(|(b, chunk)| (b as f64 - nu_max as f64) * chunk.iter().map(|z| z.norm_sqr()).sum::<f64>())
        .sum()
}

fn fix_gauge(vectors: &mut Operator) {
    for mut col in vectors.columns_mut() {
        let mut best = 0;
        let mut best_abs = -1.0;
        for (i, z) in col.iter().enumerate() {
            let a = z.norm();
            if a > best_abs + 1e-14 {
                best_abs = a;
                best = i;
            }
        }
        let z = col[best];
        if z.norm() > 0.0 {
            let phase = z.conj() / z.norm();
            col.mapv_inplace(|w| w * phase);
        }
    }
}

/// Integer `m` such that `λ − mΩ ∈ (−Ω/2, Ω/2]`.
fn fold_index(lambda: f64, omega: f64) -> i64 {
    (lambda / omega - 0.5).ceil() as i64
}

pub fn eigensystem(k: &FloquetOperator) -> Result<FloquetEigensystem> {
    let (energies, mut vectors) = linalg::eigh(&k.matrix)?;
    fix_gauge(&mut vectors);
    let d = k.dim_sys;
    let l = k.nu_max;

    let centroids: Vec<f64> = vectors.columns().into_iter().map(|c| fourier_centroid(c, l, d)).collect();
    let mut selected: Vec<usize> = (0..energies.len())
        .filter(|&j| centroids[j] > -0.5 && centroids[j] <= 0.5)
        .collect();
    if selected.len() != d {
        debug!("centroid zone holds {} modes instead of {d}; ranking by |centroid|", selected.len());
        let mut order: Vec<usize> = (0..energies.len()).collect();
        order.sort_by(|&a, &b| centroids[a].abs().total_cmp(&centroids[b].abs()).then(a.cmp(&b)));
        selected = order[..d].to_vec();
    }
    // Order physical modes by folded quasi-energy for a stable labelling.
    let folds_of = |j: usize| fold_index(energies[j], k.omega);
    selected.sort_by(|&a, &b| {
        let ea = energies[a] - folds_of(a) as f64 * k.omega;
        let eb = energies[b] - folds_of(b) as f64 * k.omega;
        ea.total_cmp(&eb).then(a.cmp(&b))
    });
    let folds: Vec<i64> = selected.iter().map(|&j| folds_of(j)).collect();

    let initial: Vec<StateVector> = selected
        .iter()
        .map(|&j| {
            let col = vectors.column(j);
            let mut phi = Array1::zeros(d);
            for chunk in col.exact_chunks(d) {
                phi += &chunk;
            }
            phi
        })
        .collect();

    let distinct = (0..d).all(|a| (0..a).all(|b| linalg::inner(&initial[a], &initial[b]).norm() < 0.5));
    if !distinct {
        let found = count_distinct(&initial);
        return Err(Error::BrillouinZoneMiscount { found, expected: d });
    }

    let mut completeness = Array2::<C64>::zeros((d, d));
    for phi in &initial {
        let col = phi.view().insert_axis(ndarray::Axis(1));
        completeness = completeness + col.dot(&col.t().mapv(|z| z.conj()));
    }
    let completeness_defect = linalg::max_abs_diff(&completeness, &linalg::identity(d));
    if completeness_defect > COMPLETENESS_WARN {
        debug!("Floquet completeness defect {completeness_defect:.2e} at nu_max = {l}");
    }

    Ok(FloquetEigensystem {
        model: k.model.clone(),
        nu_max: l,
        energies,
        vectors,
        selected,
        folds,
        initial,
        completeness_defect,
    })
}

fn count_distinct(initial: &[StateVector]) -> usize {
    let mut reps: Vec<&StateVector> = Vec::new();
    for phi in initial {
        if reps.iter().all(|r| linalg::inner(r, phi).norm() < 0.5) {
            reps.push(phi);
        }
    }
    reps.len()
}

/// Assemble and diagonalize in one call.
pub fn solve(model: &ControlModel, nu_max: usize) -> Result<FloquetEigensystem> {
    eigensystem(&assemble(model, nu_max)?)
}

impl FloquetEigensystem {
    pub fn model(&self) -> &ControlModel {
        &self.model
    }

    pub fn omega(&self) -> f64 {
        self.model.omega
    }

    pub fn nu_max(&self) -> usize {
        self.nu_max
    }

    pub fn dim_sys(&self) -> usize {
        self.model.dim()
    }

    pub fn dim_floquet(&self) -> usize {
        self.energies.len()
    }

    /// Selected quasi-energies folded into `(−Ω/2, Ω/2]`.
    pub fn quasi_energies(&self) -> Vec<f64> {
        self.selected
            .iter()
            .zip(&self.folds)
            .map(|(&j, &m)| self.energies[j] - m as f64 * self.omega())
            .collect()
    }

    /// Eigenvalue of the truncated operator belonging to mode `k`, before
    /// folding. Propagator reconstruction and perturbation theory work with
    /// this value and [`Self::mode`], which form an exact eigenpair.
    pub fn raw_energy(&self, k: usize) -> f64 {
        self.energies[self.selected[k]]
    }

    pub fn mode(&self, k: usize) -> ArrayView1<'_, C64> {
        self.vectors.column(self.selected[k])
    }

    /// Index of mode `k` within the full spectrum.
    pub fn spectral_index(&self, k: usize) -> usize {
        self.selected[k]
    }

    pub fn full_energies(&self) -> &[f64] {
        &self.energies
    }

    pub fn full_vectors(&self) -> &Operator {
        &self.vectors
    }

    /// `|Φ_k(0)⟩ = Σ_ν |χ_{k,ν}⟩`
    pub fn initial_mode(&self, k: usize) -> &StateVector {
        &self.initial[k]
    }

    /// `|Φ_k(t)⟩ = Σ_ν |χ_{k,ν}⟩ e^{iνΩt}` (periodic part, unfolded labelling).
    pub fn floquet_mode(&self, k: usize, t: f64) -> StateVector {
        let d = self.dim_sys();
        let mut out = Array1::zeros(d);
        for (b, chunk) in self.mode(k).exact_chunks(d).into_iter().enumerate() {
            let nu = b as f64 - self.nu_max as f64;
            out.scaled_add(C64::from_polar(1.0, nu * self.omega() * t), &chunk);
        }
        out
    }

    /// `‖Σ_k |Φ_k(0)⟩⟨Φ_k(0)| − 1‖_max`
    pub fn completeness_defect(&self) -> f64 {
        self.completeness_defect
    }

    /// Logs a warning when the truncation looks insufficient.
    pub fn check_completeness(&self) -> bool {
        let ok = self.completeness_defect <= COMPLETENESS_WARN;
        if !ok {
            warn!(
                "Floquet completeness defect {:.2e} exceeds {COMPLETENESS_WARN:.0e}; consider nu_max > {}",
                self.completeness_defect, self.nu_max
            );
        }
        ok
    }

    /// Copy with the selected eigenvectors multiplied by `e^{iφ_k}`.
    pub fn rephased(&self, phases: &[f64]) -> Self {
        let mut out = self.clone();
        for (k, &phi) in phases.iter().enumerate() {
            let j = out.selected[k];
            let z = C64::from_polar(1.0, phi);
            out.vectors.column_mut(j).mapv_inplace(|w| w * z);
            out.initial[k].mapv_inplace(|w| w * z);
        }
        out
    }
}

/// `∂ⁿU/∂tⁿ = Σ_{k,ν} (i(νΩ − ε_k))ⁿ e^{i(νΩ − ε_k)t} |χ_{k,ν}⟩⟨Φ_k(0)|`;
/// `n = 0` is the propagator itself.
pub fn propagator_derivative(es: &FloquetEigensystem, t: f64, n: u32) -> Operator {
    let d = es.dim_sys();
    let omega = es.omega();
    let mut u = Array2::<C64>::zeros((d, d));
    for k in 0..d {
        let lambda = es.raw_energy(k);
        let mut left = Array1::<C64>::zeros(d);
        for (b, chunk) in es.mode(k).exact_chunks(d).into_iter().enumerate() {
            let z = (b as f64 - es.nu_max() as f64) * omega - lambda;
            let w = (I * z).powu(n) * C64::from_polar(1.0, z * t);
            left.scaled_add(w, &chunk);
        }
        let right = es.initial_mode(k);
        for a in 0..d {
            for c in 0..d {
                u[[a, c]] += left[a] * right[c].conj();
            }
        }
    }
    u
}

/// `U(t) = Σ_k e^{−iε_k t} |Φ_k(t)⟩⟨Φ_k(0)|`
pub fn propagator(es: &FloquetEigensystem, t: f64) -> Operator {
    propagator_derivative(es, t, 0)
}

pub fn time_derivative(es: &FloquetEigensystem, t: f64, n: u32) -> Result<Operator> {
    if !(1..=4).contains(&n) {
        return Err(Error::InvalidParameter(format!("time-derivative order {n} outside 1..=4")));
    }
    Ok(propagator_derivative(es, t, n))
}

/// `exp(−i H_D t)`, the uncontrolled evolution.
pub fn drift_propagator(model: &ControlModel, t: f64) -> Result<Operator> {
    linalg::expm_hermitian(&model.drift, t)
}

/// How many Fourier sidebands to keep.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Truncation {
    Fixed(usize),
    /// Grow `ν_max` from an estimate until the zone completeness defect is
    /// below `tol`. The result depends only on the model, so it is
    /// reproducible.
    Auto { min: usize, tol: f64 },
}

impl Truncation {
    pub const DEFAULT_AUTO: Self = Self::Auto { min: 8, tol: COMPLETENESS_WARN };
}

/// Typical decay of the completeness defect, decades per sideband.
const DEFECT_DECAY: f64 = 0.3;

/// Empirical sideband count for completeness `tol`:
/// `n_max + 13 + 12 hypot(max|f|, 0.09‖H_D‖)/Ω` at `tol = 1e-8`, plus the
/// sidebands needed to gain the remaining decades at [`DEFECT_DECAY`].
fn sideband_estimate(model: &ControlModel, tol: f64) -> usize {
    let row_norm = |m: &Operator| m.rows().into_iter().map(|r| r.iter().map(|z| z.norm()).sum::<f64>()).fold(0.0, f64::max);
    let peak = model.peak_field(64 * model.n_max);
    let scale = 12.0 * peak.hypot(0.09 * row_norm(&model.drift)) / model.omega;
    let extra = (COMPLETENESS_WARN / tol).log10() / DEFECT_DECAY;
    (model.n_max as f64 + 13.0 + scale + extra).ceil().max(0.0) as usize
}

/// Eigensystem under a truncation policy. In automatic mode a failed
/// attempt grows the order by the sidebands needed to close the gap in
/// defect, using the observed decay once two attempts exist.
pub fn solve_with(model: &ControlModel, truncation: Truncation) -> Result<FloquetEigensystem> {
    let (min, tol) = match truncation {
        Truncation::Fixed(nu) => return solve(model, nu),
        Truncation::Auto { min, tol } => (min, tol),
    };
    let mut nu = sideband_estimate(model, tol).max(min).max(model.n_max);
    let mut previous: Option<(usize, f64)> = None;
    loop {
        let defect = match solve(model, nu) {
            Ok(es) if es.completeness_defect() <= tol => return Ok(es),
            Ok(es) => es.completeness_defect(),
            Err(Error::BrillouinZoneMiscount { .. }) => f64::INFINITY,
            Err(e) => return Err(e),
        };
        let rate = match previous {
            Some((nu0, d0)) if defect < d0 => ((d0 / defect).log10() / (nu - nu0) as f64).min(1.0),
            _ => DEFECT_DECAY,
        };
        let step = if defect.is_finite() { ((defect / tol).log10() / rate).ceil() as usize + 1 } else { nu / 4 };
        let next = nu + step.clamp(2, nu.max(2));
        if next > TRUNCATION_CAP {
            return Err(Error::TruncationCap { tol, cap: TRUNCATION_CAP, defect });
        }
        previous = defect.is_finite().then_some((nu, defect));
        nu = next;
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct TruncationReport {
    pub nu_max: usize,
    /// `(ν_max, ‖U(t_f; ν_max) − U(t_f; 2ν_max)‖_max)` for every tested order.
    pub defects: Vec<(usize, f64)>,
}

/// Smallest `ν_max` (doubling from `2·n_max`) whose pulse-end propagator
/// agrees with the doubled truncation to `tol`.
pub fn adaptive_truncation(model: &ControlModel, tol: f64) -> Result<usize> {
    adaptive_truncation_report(model, tol, TRUNCATION_CAP).map(|r| r.nu_max)
}

pub fn adaptive_truncation_report(model: &ControlModel, tol: f64, cap: usize) -> Result<TruncationReport> {
    if !(tol > 0.0) {
        return Err(Error::InvalidParameter(format!("truncation tolerance must be positive, got {tol}")));
    }
    let tf = model.pulse_end();
    let mut nu = (2 * model.n_max).max(1);
    let mut current = propagator(&solve(model, nu)?, tf);
    let mut defects = Vec::new();
    loop {
        if 2 * nu > cap {
            let defect = defects.last().map(|&(_, d)| d).unwrap_or(f64::INFINITY);
            return Err(Error::TruncationCap { tol, cap, defect });
        }
        let next = propagator(&solve(model, 2 * nu)?, tf);
        let defect = linalg::max_abs_diff(&current, &next);
        debug!("truncation nu_max = {nu}: defect {defect:.3e}");
        defects.push((nu, defect));
        if defect < tol {
            return Ok(TruncationReport { nu_max: nu, defects });
        }
        nu *= 2;
        current = next;
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::linalg::{hermiticity_defect, max_abs, max_abs_diff, unitarity_defect};
    use crate::spinsys::{self, TwoSpinParams};
    use rand::{Rng, SeedableRng};

    fn gate_drift() -> Operator {
        spinsys::two_spin_hamiltonian(&TwoSpinParams { omega1: 0.13, omega2: 0.26, gx: 5.40, gy: 9.95 })
    }

    fn two_spin_model(n_max: usize, omega: f64) -> ControlModel {
        let controls = spinsys::xy_controls(2, &[1, 2]).unwrap();
        ControlModel::new(gate_drift(), controls, n_max, omega).unwrap()
    }

    fn random_amplitudes(model: &ControlModel, scale: f64, seed: u64) -> Vec<f64> {
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(seed);
        (0..model.num_amplitudes()).map(|_| rng.gen_range(-scale..scale)).collect()
    }

    #[test]
    fn fourier_block_structure() {
        let x = spinsys::pauli(spinsys::Axis::X, 1, 1).unwrap();
        let mut m = ControlModel::new(Array2::zeros((2, 2)), vec![x.clone()], 1, 1.0).unwrap();
        m.set_amplitudes(&[1.0]).unwrap();
        let b = fourier_block(&m, 0, 1, 1).unwrap();
        assert!(hermiticity_defect(&b) < 1e-15);
        // Block (ν+1, ν) = h/(2i), block (ν−1, ν) = −h/(2i).
        let up = b.slice(s![2..4, 0..2]).to_owned();
        let down = b.slice(s![0..2, 2..4]).to_owned();
        assert!(max_abs_diff(&up, &x.mapv(|z| z / (2.0 * I))) < 1e-15);
        assert!(max_abs_diff(&down, &x.mapv(|z| -z / (2.0 * I))) < 1e-15);
        // diagonal blocks stay empty
        assert!(max_abs(b.slice(s![0..2, 0..2])) == 0.0);
        assert!(max_abs(b.slice(s![0..2, 4..6])) == 0.0);

        m.set_amplitudes(&[0.0]).unwrap();
        assert!(max_abs(fourier_block(&m, 0, 1, 1).unwrap().view()) == 0.0);
        assert_eq!(
            fourier_block(&two_spin_model(3, 1.0), 0, 3, 2),
            Err(Error::HarmonicBeyondTruncation { harmonic: 3, nu_max: 2 })
        );
    }

    #[test]
    fn assemble_zero_control_is_block_diagonal() {
        let model = two_spin_model(2, 3.0);
        let k = assemble(&model, 4).unwrap();
        assert_eq!(k.dim(), 4 * 9);
        for nu in -4i64..=4 {
            let o = block_offset(nu, 4, 4);
            let blk = k.matrix.slice(s![o..o + 4, o..o + 4]).to_owned();
            let expected = &model.drift + &(linalg::identity(4) * C64::new(nu as f64 * 3.0, 0.0));
            assert!(max_abs_diff(&blk, &expected) < 1e-15);
        }
        let off = k.matrix.slice(s![0..4, 4..8]);
        assert!(max_abs(off) == 0.0);
    }

    #[test]
    fn assemble_without_drift_has_empty_diagonal_blocks() {
        let x = spinsys::pauli(spinsys::Axis::X, 1, 1).unwrap();
        let m = ControlModel::new(Array2::zeros((2, 2)), vec![x], 2, 1.0).unwrap().with_amplitudes(&[0.4, -0.3]).unwrap();
        let k = assemble(&m, 3).unwrap();
        for nu in -3i64..=3 {
            let o = block_offset(nu, 3, 2);
            let blk = k.matrix.slice(s![o..o + 2, o..o + 2]);
            assert!((blk[[0, 1]]).norm() == 0.0 && (blk[[1, 0]]).norm() == 0.0);
            assert!((blk[[0, 0]] - C64::new(nu as f64, 0.0)).norm() == 0.0);
        }
    }

    #[test]
    fn gate_model_assembles_hermitian() {
        let model = two_spin_model(6, PI / 0.11);
        let amps = random_amplitudes(&model, 5.0, 3);
        let model = model.with_amplitudes(&amps).unwrap();
        let k = assemble(&model, 32).unwrap();
        assert_eq!(k.dim(), 4 * 65);
        assert!(hermiticity_defect(&k.matrix) < 1e-12);
        assert!(matches!(assemble(&model, 5), Err(Error::HarmonicBeyondTruncation { .. })));
    }

    #[test]
    fn zero_control_folds_drift_spectrum() {
        let omega = 4.0;
        let model = two_spin_model(2, omega);
        let es = solve(&model, 8).unwrap();
        let mut got = es.quasi_energies();
        got.sort_by(f64::total_cmp);
        let (vals, _) = linalg::eigh(&model.drift).unwrap();
        let mut expected: Vec<f64> = vals.iter().map(|&e| e - fold_index(e, omega) as f64 * omega).collect();
        expected.sort_by(f64::total_cmp);
        for (g, e) in got.iter().zip(&expected) {
            assert!((g - e).abs() < 1e-12, "{got:?} vs {expected:?}");
            assert!(*g > -omega / 2.0 && *g <= omega / 2.0);
        }
        assert!(es.completeness_defect() < 1e-12);
    }

    #[test]
    fn selected_modes_are_orthonormal() {
        let model = two_spin_model(6, PI / 0.11);
        let amps = random_amplitudes(&model, 3.0, 11);
        let es = solve(&model.with_amplitudes(&amps).unwrap(), 32).unwrap();
        for a in 0..4 {
            for b in 0..4 {
                let ip: C64 = es.mode(a).iter().zip(es.mode(b).iter()).map(|(x, y)| x.conj() * y).sum();
                let expected = if a == b { 1.0 } else { 0.0 };
                assert!((ip - C64::new(expected, 0.0)).norm() < 1e-10);
            }
        }
        assert!(es.completeness_defect() < 1e-9, "{}", es.completeness_defect());
    }

    #[test]
    fn propagator_limits() {
        let model = two_spin_model(3, 7.0);
        let es = solve(&model, 12).unwrap();
        assert!(max_abs_diff(&propagator(&es, 0.0), &linalg::identity(4)) < 1e-12);
        for t in [0.1, 0.37, 1.3] {
            let exact = drift_propagator(&model, t).unwrap();
            assert!(max_abs_diff(&propagator(&es, t), &exact) < 1e-12);
        }
        let d1 = time_derivative(&es, 0.0, 1).unwrap();
        let expected = model.drift.mapv(|z| -I * z);
        assert!(max_abs_diff(&d1, &expected) < 1e-11);
        assert!(time_derivative(&es, 0.0, 5).is_err());
    }

    #[test]
    fn time_derivatives_match_finite_differences() {
        let model = two_spin_model(6, PI / 0.4);
        let amps = random_amplitudes(&model, 4.0, 5);
        let model = model.with_amplitudes(&amps).unwrap();
        let es = solve(&model, 48).unwrap();
        let t = 0.23;
        let h = 1e-5;
        let up = propagator(&es, t + h);
        let mid = propagator(&es, t);
        let down = propagator(&es, t - h);
        let fd1 = (&up - &down).mapv(|z| z / (2.0 * h));
        let fd2 = (&up - &mid * C64::new(2.0, 0.0) + &down).mapv(|z| z / (h * h));
        assert!(max_abs_diff(&time_derivative(&es, t, 1).unwrap(), &fd1) < 1e-6);
        assert!(max_abs_diff(&time_derivative(&es, t, 2).unwrap(), &fd2) < 1e-4);
        // Schrödinger equation
        let lhs = time_derivative(&es, t, 1).unwrap();
        let rhs = model.hamiltonian(t).dot(&mid).mapv(|z| -I * z);
        let defect = max_abs_diff(&lhs, &rhs);
        assert!(defect < 1e-8, "{defect:e} completeness {}", es.completeness_defect());
    }

    #[test]
    fn floquet_modes_are_periodic() {
        let model = two_spin_model(4, PI / 0.3);
        let amps = random_amplitudes(&model, 4.0, 8);
        let es = solve(&model.with_amplitudes(&amps).unwrap(), 32).unwrap();
        let period = 2.0 * PI / es.omega();
        for k in 0..4 {
            let a = es.floquet_mode(k, 0.071);
            let b = es.floquet_mode(k, 0.071 + period);
            assert!(a.iter().zip(b.iter()).all(|(x, y)| (x - y).norm() < 1e-8));
        }
    }

    #[test]
    fn spectrum_contains_shifted_replicas() {
        let model = two_spin_model(3, PI / 0.2);
        let amps = random_amplitudes(&model, 3.0, 21);
        let es = solve(&model.with_amplitudes(&amps).unwrap(), 24).unwrap();
        let d = 4;
        let l = es.nu_max() as i64;
        for k in 0..d {
            let target = es.raw_energy(k) + es.omega();
            let j = (0..es.dim_floquet())
                .min_by(|&a, &b| {
                    (es.full_energies()[a] - target).abs().total_cmp(&(es.full_energies()[b] - target).abs())
                })
                .unwrap();
            assert!((es.full_energies()[j] - target).abs() < 1e-6);
            let shifted = es.full_vectors().column(j);
            let chi = es.mode(k);
            // compare Fourier index ν of χ with ν+1 of the replica on the central half
            let mut overlap = C64::new(0.0, 0.0);
            for nu in -l / 2..=l / 2 {
                for s in 0..d {
                    overlap += chi[block_offset(nu, es.nu_max(), d) + s].conj()
                        * shifted[block_offset(nu + 1, es.nu_max(), d) + s];
                }
            }
            let phase = overlap / overlap.norm();
            for nu in -l / 2..=l / 2 {
                for s in 0..d {
                    let a = chi[block_offset(nu, es.nu_max(), d) + s] * phase;
                    let b = shifted[block_offset(nu + 1, es.nu_max(), d) + s];
                    assert!((a - b).norm() < 1e-6);
                }
            }
        }
    }

    #[test]
    fn random_models_unitary_at_converged_truncation() {
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(99);
        for seed in 0..20 {
            let tf = rng.gen_range(0.1..0.5);
            let model = two_spin_model(6, PI / tf);
            let amps = random_amplitudes(&model, 8.0, seed);
            let model = model.with_amplitudes(&amps).unwrap();
            let nu = adaptive_truncation(&model, 1e-10).unwrap();
            let es = solve(&model, nu).unwrap();
            for _ in 0..10 {
                let t = rng.gen_range(0.0..2.0 * tf);
                assert!(unitarity_defect(&propagator(&es, t)) < 1e-8);
            }
        }
    }

    #[test]
    fn adaptive_truncation_behaviour() {
        let model = two_spin_model(3, 10.0);
        let r = adaptive_truncation_report(&model, 1e-10, TRUNCATION_CAP).unwrap();
        assert_eq!(r.nu_max, 6);

        let weak = model.clone().with_amplitudes(&vec![0.05; 12]).unwrap();
        let weak_nu = adaptive_truncation(&weak, 1e-10).unwrap();
        let strong = model.with_amplitudes(&vec![20.0; 12]).unwrap();
        let report = adaptive_truncation_report(&strong, 1e-10, TRUNCATION_CAP).unwrap();
        assert!(weak_nu <= 12);
        assert!(report.nu_max > weak_nu);
        assert!(report.defects.windows(2).all(|w| w[1].1 < w[0].1));
        assert!(matches!(adaptive_truncation_report(&strong, 1e-10, 8), Err(Error::TruncationCap { .. })));
    }
}
