//! Spin-1/2 algebra for chains of at most a few qubits.
//!
//! Site 1 is the most significant bit of a computational-basis index, so for
//! two spins `|q1 q2⟩` has index `2·q1 + q2`. All frequencies and couplings
//! are angular frequencies in rad/µs.

use ndarray::{Array1, Array2};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::jet::Scalar;
use crate::linalg::{self, identity, kron, Operator, StateVector, C64, I};

/// Chain length accepted by [`chain_hamiltonian`] unless a larger limit is
/// passed to [`chain_hamiltonian_limited`].
pub const DEFAULT_SITE_LIMIT: usize = 4;

const NORM_TOL: f64 = 1e-8;
const PSD_TOL: f64 = 1e-9;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Axis {
    X,
    Y,
    Z,
}

fn single_pauli(axis: Axis) -> Operator {
    let o = C64::new(0.0, 0.0);
    let l = C64::new(1.0, 0.0);
    match axis {
        Axis::X => ndarray::array![[o, l], [l, o]],
        Axis::Y => ndarray::array![[o, -I], [I, o]],
        Axis::Z => ndarray::array![[l, o], [o, -l]],
    }
}

/// `σ_axis` acting on `site` (1-based) of an `n_sites` register.
pub fn pauli(axis: Axis, site: usize, n_sites: usize) -> Result<Operator> {
    if site == 0 || site > n_sites {
        return Err(Error::SiteOutOfRange { site, n_sites });
    }
    let mut out = identity(1);
    for s in 1..=n_sites {
        let factor = if s == site { single_pauli(axis) } else { identity(2) };
        out = kron(&out, &factor);
    }
    Ok(out)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TwoSpinParams {
    pub omega1: f64,
    pub omega2: f64,
    pub gx: f64,
    pub gy: f64,
}

impl TwoSpinParams {
    pub fn to_chain(&self) -> ChainParams {
        ChainParams {
            omegas: vec![self.omega1, self.omega2],
            gx: vec![self.gx],
            gy: vec![self.gy],
        }
    }

    pub fn g_max(&self) -> f64 {
        self.gx.abs().max(self.gy.abs())
    }
}

/// Nearest-neighbour xx/yy chain with individual z splittings.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ChainParams {
    pub omegas: Vec<f64>,
    pub gx: Vec<f64>,
    pub gy: Vec<f64>,
}

impl ChainParams {
    pub fn new(omegas: Vec<f64>, gx: Vec<f64>, gy: Vec<f64>) -> Result<Self> {
        let p = Self { omegas, gx, gy };
        p.validate()?;
        Ok(p)
    }

    pub fn n_sites(&self) -> usize {
        self.omegas.len()
    }

    pub fn validate(&self) -> Result<()> {
        let n = self.omegas.len();
        if n < 2 {
            return Err(Error::InconsistentChain(format!("need at least 2 spins, got {n}")));
        }
        if self.gx.len() != n - 1 || self.gy.len() != n - 1 {
            return Err(Error::InconsistentChain(format!(
                "{n} splittings require {} couplings per axis, got gx={} gy={}",
                n - 1,
                self.gx.len(),
                self.gy.len()
            )));
        }
        let all = self.omegas.iter().chain(&self.gx).chain(&self.gy);
        if all.clone().any(|v| !v.is_finite()) {
            return Err(Error::InconsistentChain("non-finite parameter".into()));
        }
        Ok(())
    }

    pub fn g_max(&self) -> f64 {
        self.gx.iter().chain(&self.gy).fold(0.0, |m, g| m.max(g.abs()))
    }
}

pub fn two_spin_hamiltonian(p: &TwoSpinParams) -> Operator {
    chain_hamiltonian(&p.to_chain()).expect("two-spin parameters always form a valid chain")
}

pub fn chain_hamiltonian(p: &ChainParams) -> Result<Operator> {
    chain_hamiltonian_limited(p, DEFAULT_SITE_LIMIT)
}

/// `Σ_k (ω_k/2) σ_z^(k) + Σ_k (g_x^(k) σ_x^(k) σ_x^(k+1) + g_y^(k) σ_y^(k) σ_y^(k+1))`
pub fn chain_hamiltonian_limited(p: &ChainParams, limit: usize) -> Result<Operator> {
    p.validate()?;
    let n = p.n_sites();
    if n > limit {
        return Err(Error::TooManySites { n_sites: n, limit });
    }
    let dim = 1 << n;
    let mut h = Array2::<C64>::zeros((dim, dim));
    for (k, &w) in p.omegas.iter().enumerate() {
        h = h + pauli(Axis::Z, k + 1, n)? * C64::new(w / 2.0, 0.0);
    }
    for k in 0..n - 1 {
        let xx = pauli(Axis::X, k + 1, n)?.dot(&pauli(Axis::X, k + 2, n)?);
        let yy = pauli(Axis::Y, k + 1, n)?.dot(&pauli(Axis::Y, k + 2, n)?);
        h = h + xx * C64::new(p.gx[k], 0.0) + yy * C64::new(p.gy[k], 0.0);
    }
    Ok(h)
}

/// `σ_x` and `σ_y` on each listed site, in the order `(x, s₁), (y, s₁), (x, s₂), …`.
pub fn xy_controls(n_sites: usize, sites: &[usize]) -> Result<Vec<Operator>> {
    let mut out = Vec::with_capacity(2 * sites.len());
    for &s in sites {
        out.push(pauli(Axis::X, s, n_sites)?);
        out.push(pauli(Axis::Y, s, n_sites)?);
    }
    Ok(out)
}

/// `exp(−i Σ_k α_k σ_k⊗σ_k)`, built from the three commuting single-axis
/// factors `cos α_k − i sin α_k σ_k⊗σ_k`.
pub fn canonical_gate(alpha: [f64; 3]) -> Operator {
    let mut u = identity(4);
    for (axis, a) in [Axis::X, Axis::Y, Axis::Z].into_iter().zip(alpha) {
        let p = kron(&single_pauli(axis), &single_pauli(axis));
        let factor = identity(4) * C64::new(a.cos(), 0.0) - p * (I * a.sin());
        u = u.dot(&factor);
    }
    u
}

/// Whether a canonical gate maps some product state to a maximally entangled
/// state: `α_x + α_y ≥ π/4` and `α_y + α_z ≤ π/4`.
pub fn is_perfect_entangler(alpha: [f64; 3]) -> bool {
    let q = std::f64::consts::FRAC_PI_4;
    alpha[0] + alpha[1] >= q && alpha[1] + alpha[2] <= q
}

/// `⊗_k (cos(θ_k/2)|0⟩ + e^{iφ_k} sin(θ_k/2)|1⟩)`
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BlochProductState {
    pub thetas: Vec<f64>,
    pub phis: Vec<f64>,
}

impl BlochProductState {
    pub fn new(thetas: Vec<f64>, phis: Vec<f64>) -> Result<Self> {
        let s = Self { thetas, phis };
        s.validate()?;
        Ok(s)
    }

    pub fn validate(&self) -> Result<()> {
        if self.thetas.is_empty() || self.thetas.len() != self.phis.len() {
            return Err(Error::InvalidParameter(format!(
                "product state needs equally many angles, got {} thetas and {} phis",
                self.thetas.len(),
                self.phis.len()
            )));
        }
        Ok(())
    }

    pub fn n_sites(&self) -> usize {
        self.thetas.len()
    }
}

pub fn bloch_product_state(s: &BlochProductState) -> StateVector {
    assert_eq!(s.thetas.len(), s.phis.len(), "product state angle counts differ");
    let mut psi = Array1::from(vec![C64::new(1.0, 0.0)]);
    for (&theta, &phi) in s.thetas.iter().zip(&s.phis) {
        let single = [
            C64::new((theta / 2.0).cos(), 0.0),
            C64::from_polar((theta / 2.0).sin(), phi),
        ];
        psi = Array1::from_iter(psi.iter().flat_map(|&a| single.map(|b| a * b)));
    }
    psi
}

fn check_norm(psi: &StateVector) -> Result<()> {
    let dev = (linalg::norm(psi) - 1.0).abs();
    if dev > NORM_TOL {
        return Err(Error::NotNormalized(dev));
    }
    Ok(())
}

fn n_sites_of(len: usize) -> Result<usize> {
    if len < 2 || !len.is_power_of_two() {
        return Err(Error::InvalidParameter(format!("state length {len} is not 2^N with N ≥ 1")));
    }
    Ok(len.trailing_zeros() as usize)
}

/// `ψᵀ (σ_y⊗σ_y) ψ`; its squared modulus is the tangle.
pub fn tangle_amplitude<T: Scalar>(psi: &[T]) -> T {
    let two = C64::new(2.0, 0.0);
    (psi[1] * psi[2] - psi[0] * psi[3]).scale(two)
}

/// Tangle `C² = |⟨Ψ|σ_y⊗σ_y|Ψ*⟩|²` of a two-qubit pure state.
pub fn tangle_pure(psi: &StateVector) -> Result<f64> {
    if psi.len() != 4 {
        return Err(Error::DimensionMismatch { expected: 4, found: psi.len() });
    }
    check_norm(psi)?;
    Ok(tangle_amplitude(psi.as_slice().expect("contiguous state")).norm_sqr())
}

fn validate_subset(n_sites: usize, keep: &[usize]) -> Result<()> {
    if keep.is_empty() {
        return Err(Error::InvalidSubset("no sites kept".into()));
    }
    for (i, &s) in keep.iter().enumerate() {
        if s == 0 || s > n_sites {
            return Err(Error::InvalidSubset(format!("site {s} outside 1..={n_sites}")));
        }
        if keep[..i].contains(&s) {
            return Err(Error::InvalidSubset(format!("site {s} listed twice")));
        }
    }
    Ok(())
}

/// Partial trace over every site not in `keep`. Kept sites retain their
/// relative order (the first listed site is most significant).
pub fn reduced_density_of<T: Scalar>(psi: &[T], n_sites: usize, keep: &[usize]) -> Array2<T> {
    let kept_dim = 1usize << keep.len();
    let traced: Vec<usize> = (1..=n_sites).filter(|s| !keep.contains(s)).collect();
    let bit = |site: usize| n_sites - site;
    let mut rho = Array2::from_elem((kept_dim, kept_dim), T::zero());
    let mut block = vec![T::zero(); kept_dim];
    for r in 0..(1usize << traced.len()) {
        let mut base = 0usize;
        for (j, &s) in traced.iter().enumerate() {
            if (r >> (traced.len() - 1 - j)) & 1 == 1 {
                base |= 1 << bit(s);
            }
        }
        for (k, slot) in block.iter_mut().enumerate() {
            let mut idx = base;
            for (j, &s) in keep.iter().enumerate() {
                if (k >> (keep.len() - 1 - j)) & 1 == 1 {
                    idx |= 1 << bit(s);
                }
            }
            *slot = psi[idx];
        }
        for a in 0..kept_dim {
            for b in 0..kept_dim {
                rho[[a, b]] += block[a] * block[b].conj();
            }
        }
    }
    rho
}

pub fn reduced_density(psi: &StateVector, keep: &[usize]) -> Result<Operator> {
    let n = n_sites_of(psi.len())?;
    validate_subset(n, keep)?;
    check_norm(psi)?;
    Ok(reduced_density_of(psi.as_slice().expect("contiguous state"), n, keep))
}

/// `Tr ρ²` for Hermitian `ρ`.
pub fn purity_of<T: Scalar>(rho: &Array2<T>) -> T {
    let mut acc = T::zero();
    for z in rho.iter() {
        acc += *z * z.conj();
    }
    acc
}

/// `2 Tr ρ_{1N}² − Tr ρ_1² − Tr ρ_N²` for the two end spins.
pub fn lower_bound_of<T: Scalar>(psi: &[T], n_sites: usize) -> T {
    let ends = reduced_density_of(psi, n_sites, &[1, n_sites]);
    let first = reduced_density_of(psi, n_sites, &[1]);
    let last = reduced_density_of(psi, n_sites, &[n_sites]);
    let p = purity_of(&ends);
    p + p - purity_of(&first) - purity_of(&last)
}

pub fn tangle_lower_bound(psi: &StateVector) -> Result<f64> {
    let n = n_sites_of(psi.len())?;
    if n < 2 {
        return Err(Error::InvalidSubset("end-spin bound needs at least two spins".into()));
    }
    check_norm(psi)?;
    Ok(lower_bound_of(psi.as_slice().expect("contiguous state"), n).re)
}

/// Wootters concurrence of a two-qubit density matrix.
pub fn concurrence(rho: &Operator) -> Result<f64> {
    if rho.dim() != (4, 4) {
        return Err(Error::DimensionMismatch { expected: 4, found: rho.nrows() });
    }
    let yy = kron(&single_pauli(Axis::Y), &single_pauli(Axis::Y));
    let flipped = yy.dot(&rho.mapv(|z| z.conj())).dot(&yy);
    let root = linalg::psd_sqrt(rho, PSD_TOL)?;
    let r = root.dot(&flipped).dot(&root);
    let herm = (&r + &linalg::dagger(&r)) * C64::new(0.5, 0.0);
    let (mut mu, _) = linalg::eigh(&herm)?;
    for m in mu.iter_mut() {
        if *m < -PSD_TOL {
            return Err(Error::NotPositive(*m));
        }
        *m = m.max(0.0).sqrt();
    }
    mu.sort_by(|a, b| b.total_cmp(a));
    Ok((mu[0] - mu[1] - mu[2] - mu[3]).max(0.0))
}

pub fn binary_entropy(x: f64) -> f64 {
    let term = |p: f64| if p <= 0.0 { 0.0 } else { -p * p.log2() };
    term(x) + term(1.0 - x)
}

/// Entanglement of formation from the concurrence, `h((1 + √(1 − C²))/2)`.
pub fn eof_from_concurrence(c: f64) -> f64 {
    let c = c.clamp(0.0, 1.0);
    binary_entropy((1.0 + (1.0 - c * c).max(0.0).sqrt()) / 2.0)
}

pub fn eof_wootters(rho: &Operator) -> Result<f64> {
    concurrence(rho).map(eof_from_concurrence)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::linalg::{dagger, hermiticity_defect, max_abs, max_abs_diff, unitarity_defect};
    use proptest::prelude::*;
    use std::f64::consts::{FRAC_1_SQRT_2, FRAC_PI_4, PI};

    fn c(re: f64, im: f64) -> C64 {
        C64::new(re, im)
    }

    fn bell() -> StateVector {
        Array1::from(vec![c(FRAC_1_SQRT_2, 0.0), c(0.0, 0.0), c(0.0, 0.0), c(FRAC_1_SQRT_2, 0.0)])
    }

    fn basis(dim: usize, i: usize) -> StateVector {
        let mut v = Array1::zeros(dim);
        v[i] = c(1.0, 0.0);
        v
    }

    fn normalized(v: Vec<C64>) -> StateVector {
        let v = Array1::from(v);
        let n = linalg::norm(&v);
        v.mapv(|z| z / n)
    }

    /// Haar-ish random single-qubit unitary from Euler angles.
    fn su2(a: f64, b: f64, g: f64) -> Operator {
        let rz = |t: f64| ndarray::array![[C64::from_polar(1.0, -t / 2.0), c(0.0, 0.0)], [c(0.0, 0.0), C64::from_polar(1.0, t / 2.0)]];
        let ry = ndarray::array![[c((b / 2.0).cos(), 0.0), c(-(b / 2.0).sin(), 0.0)], [c((b / 2.0).sin(), 0.0), c((b / 2.0).cos(), 0.0)]];
        rz(a).dot(&ry).dot(&rz(g))
    }

    #[test]
    fn pauli_z_single_site() {
        let z = pauli(Axis::Z, 1, 1).unwrap();
        assert_eq!(z, ndarray::array![[c(1.0, 0.0), c(0.0, 0.0)], [c(0.0, 0.0), c(-1.0, 0.0)]]);
    }

    #[test]
    fn pauli_involution_and_anticommutation() {
        let x = pauli(Axis::X, 1, 2).unwrap();
        let y = pauli(Axis::Y, 1, 2).unwrap();
        assert!(max_abs_diff(&x.dot(&x), &identity(4)) < 1e-15);
        assert!(max_abs((x.dot(&y) + y.dot(&x)).view()) < 1e-15);
        for axis in [Axis::X, Axis::Y, Axis::Z] {
            for site in 1..=3 {
                let p = pauli(axis, site, 3).unwrap();
                assert!(hermiticity_defect(&p) < 1e-15);
                assert!(unitarity_defect(&p) < 1e-15);
                assert!(linalg::trace(&p).norm() < 1e-15);
            }
        }
    }

    #[test]
    fn pauli_site_out_of_range() {
        assert_eq!(pauli(Axis::X, 3, 2), Err(Error::SiteOutOfRange { site: 3, n_sites: 2 }));
        assert!(pauli(Axis::X, 0, 2).is_err());
    }

    #[test]
    fn site_one_is_most_significant() {
        // σ_x on site 1 flips |00⟩ (index 0) to |10⟩ (index 2).
        let x1 = pauli(Axis::X, 1, 2).unwrap();
        assert_eq!(x1.dot(&basis(4, 0)), basis(4, 2));
    }

    #[test]
    fn symmetric_xy_coupling_spectrum() {
        let g = 1.7;
        let h = two_spin_hamiltonian(&TwoSpinParams { omega1: 0.0, omega2: 0.0, gx: g, gy: g });
        let (mut vals, _) = linalg::eigh(&h).unwrap();
        vals.sort_by(f64::total_cmp);
        let expected = [-2.0 * g, 0.0, 0.0, 2.0 * g];
        for (v, e) in vals.iter().zip(expected) {
            assert!((v - e).abs() < 1e-12, "{vals:?}");
        }
    }

    #[test]
    fn decoupled_spins_are_diagonal() {
        let (w1, w2) = (0.8, 0.3);
        let h = two_spin_hamiltonian(&TwoSpinParams { omega1: w1, omega2: w2, gx: 0.0, gy: 0.0 });
        let diag = [(w1 + w2) / 2.0, (w1 - w2) / 2.0, (-w1 + w2) / 2.0, -(w1 + w2) / 2.0];
        for i in 0..4 {
            for j in 0..4 {
                let expected = if i == j { diag[i] } else { 0.0 };
                assert!((h[[i, j]] - c(expected, 0.0)).norm() < 1e-15);
            }
        }
    }

    #[test]
    fn gate_experiment_drift_is_hermitian_traceless() {
        let h = two_spin_hamiltonian(&TwoSpinParams { omega1: 0.13, omega2: 0.26, gx: 5.40, gy: 9.95 });
        assert!(hermiticity_defect(&h) < 1e-12);
        assert!(linalg::trace(&h).norm() < 1e-12);
    }

    #[test]
    fn chain_reduces_to_two_spin() {
        let p = TwoSpinParams { omega1: 0.3, omega2: -0.2, gx: 2.7, gy: 6.2 };
        let a = two_spin_hamiltonian(&p);
        let b = chain_hamiltonian(&p.to_chain()).unwrap();
        assert_eq!(a, b);
    }

    #[test]
    fn three_spin_chain_is_hermitian_traceless() {
        let p = ChainParams::new(vec![0.91, 0.97, 0.40], vec![0.78, 1.48], vec![1.27, 2.65]).unwrap();
        let h = chain_hamiltonian(&p).unwrap();
        assert_eq!(h.dim(), (8, 8));
        assert!(hermiticity_defect(&h) < 1e-12);
        assert!(linalg::trace(&h).norm() < 1e-12);
    }

    #[test]
    fn zero_chain_is_zero() {
        let p = ChainParams::new(vec![0.0; 3], vec![0.0; 2], vec![0.0; 2]).unwrap();
        assert!(max_abs(chain_hamiltonian(&p).unwrap().view()) == 0.0);
    }

    #[test]
    fn chain_rejects_inconsistent_lengths_and_size() {
        assert!(matches!(
            ChainParams::new(vec![0.0; 3], vec![0.0; 1], vec![0.0; 2]),
            Err(Error::InconsistentChain(_))
        ));
        let p = ChainParams { omegas: vec![0.0; 5], gx: vec![0.0; 4], gy: vec![0.0; 4] };
        assert_eq!(chain_hamiltonian(&p), Err(Error::TooManySites { n_sites: 5, limit: 4 }));
        assert!(chain_hamiltonian_limited(&p, 5).is_ok());
    }

    #[test]
    fn canonical_gate_examples() {
        assert!(max_abs_diff(&canonical_gate([0.0; 3]), &identity(4)) < 1e-15);
        let out = canonical_gate([FRAC_PI_4, 0.0, 0.0]).dot(&basis(4, 0));
        let expected = Array1::from(vec![c(FRAC_1_SQRT_2, 0.0), c(0.0, 0.0), c(0.0, 0.0), c(0.0, -FRAC_1_SQRT_2)]);
        assert!(out.iter().zip(expected.iter()).all(|(a, b)| (a - b).norm() < 1e-15));
        let alpha = [0.5, 0.4, 0.3];
        assert!(unitarity_defect(&canonical_gate(alpha)) < 1e-14);
        assert!(is_perfect_entangler(alpha));
    }

    #[test]
    fn canonical_gate_equals_joint_exponential() {
        let alpha = [0.5, 0.4, 0.3];
        let mut gen = Array2::<C64>::zeros((4, 4));
        for (axis, a) in [Axis::X, Axis::Y, Axis::Z].into_iter().zip(alpha) {
            gen = gen + kron(&single_pauli(axis), &single_pauli(axis)) * c(a, 0.0);
        }
        let joint = linalg::expm_hermitian(&gen, 1.0).unwrap();
        assert!(max_abs_diff(&joint, &canonical_gate(alpha)) < 1e-12);
    }

    #[test]
    fn product_state_examples() {
        let s = BlochProductState::new(vec![0.0, 0.0], vec![0.3, 1.0]).unwrap();
        assert_eq!(bloch_product_state(&s), basis(4, 0));
        let one = bloch_product_state(&BlochProductState::new(vec![PI], vec![0.0]).unwrap());
        assert!(one[0].norm() < 1e-16 && (one[1] - c(1.0, 0.0)).norm() < 1e-15);
        let psi = bloch_product_state(&BlochProductState::new(vec![1.59, 2.10], vec![5.23, 0.57]).unwrap());
        assert!((linalg::norm(&psi) - 1.0).abs() < 1e-12);
        assert!(tangle_pure(&psi).unwrap() < 1e-15);
    }

    #[test]
    fn tangle_examples() {
        assert!((tangle_pure(&bell()).unwrap() - 1.0).abs() < 1e-15);
        assert_eq!(tangle_pure(&basis(4, 1)).unwrap(), 0.0);
        let plus = Array1::from(vec![c(0.5, 0.0); 4]);
        assert!(tangle_pure(&plus).unwrap() < 1e-16);
        assert!(matches!(tangle_pure(&(bell() * c(1.1, 0.0))), Err(Error::NotNormalized(_))));
    }

    #[test]
    fn reduced_density_examples() {
        let product = bloch_product_state(&BlochProductState::new(vec![0.4, 1.2], vec![0.1, 2.0]).unwrap());
        let rho = reduced_density(&product, &[1]).unwrap();
        assert!((purity_of(&rho).re - 1.0).abs() < 1e-12);

        let rho = reduced_density(&bell(), &[1]).unwrap();
        assert!(max_abs_diff(&rho, &(identity(2) * c(0.5, 0.0))) < 1e-15);

        let mut ghz = Array1::zeros(8);
        ghz[0] = c(FRAC_1_SQRT_2, 0.0);
        ghz[7] = c(FRAC_1_SQRT_2, 0.0);
        let rho = reduced_density(&ghz, &[1, 3]).unwrap();
        let mut expected = Array2::zeros((4, 4));
        expected[[0, 0]] = c(0.5, 0.0);
        expected[[3, 3]] = c(0.5, 0.0);
        assert!(max_abs_diff(&rho, &expected) < 1e-15);

        assert!(matches!(reduced_density(&ghz, &[]), Err(Error::InvalidSubset(_))));
        assert!(matches!(reduced_density(&ghz, &[4]), Err(Error::InvalidSubset(_))));
        assert!(matches!(reduced_density(&ghz, &[1, 1]), Err(Error::InvalidSubset(_))));
    }

    #[test]
    fn lower_bound_examples() {
        assert!((tangle_lower_bound(&bell()).unwrap() - 1.0).abs() < 1e-14);
        let product = bloch_product_state(&BlochProductState::new(vec![0.4, 1.2, 2.2], vec![0.1, 2.0, 4.0]).unwrap());
        assert!(tangle_lower_bound(&product).unwrap().abs() < 1e-14);
    }

    #[test]
    fn eof_examples() {
        let bell_rho = {
            let b = bell();
            let col = b.view().insert_axis(ndarray::Axis(1)).to_owned();
            col.dot(&dagger(&col))
        };
        assert!((eof_wootters(&bell_rho).unwrap() - 1.0).abs() < 1e-7);
        let mixed = identity(4) * c(0.25, 0.0);
        assert!(eof_wootters(&mixed).unwrap().abs() < 1e-12);

        // Werner state: concurrence max(0, (3p − 1)/2).
        let p = 0.9;
        let werner = &bell_rho * c(p, 0.0) + &mixed * c(1.0 - p, 0.0);
        let conc = concurrence(&werner).unwrap();
        assert!((conc - 0.85).abs() < 1e-10, "{conc}");
        let eof = eof_wootters(&werner).unwrap();
        let expected = binary_entropy((1.0 + (1.0f64 - 0.85 * 0.85).sqrt()) / 2.0);
        assert!((eof - expected).abs() < 1e-10);

        let mut bad = mixed.clone();
        bad[[0, 0]] = c(-0.1, 0.0);
        assert!(matches!(eof_wootters(&bad), Err(Error::NotPositive(_))));
    }

    #[test]
    fn reduced_density_consistency_on_three_spins() {
        let v: Vec<C64> = (0..8).map(|i| c((i as f64 * 0.7).sin(), (i as f64 * 1.3).cos())).collect();
        let psi = normalized(v);
        let ends = reduced_density(&psi, &[1, 3]).unwrap();
        let first = reduced_density(&psi, &[1]).unwrap();
        // trace out the second qubit of ρ_13
        let mut traced = Array2::<C64>::zeros((2, 2));
        for a in 0..2 {
            for b in 0..2 {
                traced[[a, b]] = ends[[2 * a, 2 * b]] + ends[[2 * a + 1, 2 * b + 1]];
            }
        }
        assert!(max_abs_diff(&traced, &first) < 1e-12);
    }

    fn state_strategy(dim: usize) -> impl Strategy<Value = StateVector> {
        proptest::collection::vec((-1.0f64..1.0, -1.0f64..1.0), dim)
            .prop_filter("non-zero", |v| v.iter().any(|(a, b)| a.abs() + b.abs() > 1e-3))
            .prop_map(|v| normalized(v.into_iter().map(|(a, b)| c(a, b)).collect()))
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(100))]

        #[test]
        fn canonical_gate_is_unitary(a in -PI..PI, b in -PI..PI, g in -PI..PI) {
            prop_assert!(unitarity_defect(&canonical_gate([a, b, g])) < 1e-12);
        }

        #[test]
        fn tangle_is_local_unitary_invariant(
            psi in state_strategy(4),
            e1 in proptest::array::uniform3(-PI..PI),
            e2 in proptest::array::uniform3(-PI..PI),
        ) {
            let local = kron(&su2(e1[0], e1[1], e1[2]), &su2(e2[0], e2[1], e2[2]));
            let moved = local.dot(&psi);
            let d = (tangle_pure(&psi).unwrap() - tangle_pure(&moved).unwrap()).abs();
            prop_assert!(d < 1e-10);
        }

        #[test]
        fn lower_bound_equals_tangle_for_two_spins(psi in state_strategy(4)) {
            let d = (tangle_lower_bound(&psi).unwrap() - tangle_pure(&psi).unwrap()).abs();
            prop_assert!(d < 1e-10);
        }

        #[test]
        fn lower_bound_below_end_spin_tangle(psi in state_strategy(8)) {
            let bound = tangle_lower_bound(&psi).unwrap();
            let rho = reduced_density(&psi, &[1, 3]).unwrap();
            let conc = concurrence(&rho).unwrap();
            prop_assert!(bound <= conc * conc + 1e-9, "bound {} vs C² {}", bound, conc * conc);
            prop_assert!((-1.0 - 1e-12..=1.0 + 1e-12).contains(&bound));
        }

        #[test]
        fn reduced_density_is_a_state(psi in state_strategy(8)) {
            for keep in [vec![1], vec![2, 3], vec![1, 3]] {
                let rho = reduced_density(&psi, &keep).unwrap();
                prop_assert!(hermiticity_defect(&rho) < 1e-12);
                prop_assert!((linalg::trace(&rho) - c(1.0, 0.0)).norm() < 1e-12);
                let (vals, _) = linalg::eigh(&rho).unwrap();
                prop_assert!(vals.iter().all(|&v| v > -1e-10));
            }
        }
    }
}
