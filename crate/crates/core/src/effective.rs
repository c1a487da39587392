//! Ideal spin models: the hopping Hamiltonian Σₙ Ωₙ e^{i(φₙ−δₙt)} Σᵢ σ⁺ᵢσ⁻ᵢ₊ₙ + h.c.
//! plus site potentials, with the ring and fermionic reference results.

use std::collections::HashMap;
use std::f64::consts::PI;

use serde::{Deserialize, Serialize};

use crate::geometry::{compile, validate_terms, GeometrySpec, HoppingTerm};
use crate::linalg::{eigh, CMatrix};
use crate::model::{spin_sector, DEFAULT_DIM_CAP};
use crate::{Error, Result, C64};

/// Spin basis over the active (non-spacer) sites; bit s ↔ active slot s.
#[derive(Clone, Debug, PartialEq)]
pub struct SpinBasis {
    /// Physical site of each slot.
    pub sites: Vec<usize>,
    pub sector: Option<usize>,
    pub states: Vec<u64>,
    lookup: HashMap<u64, usize>,
}

impl SpinBasis {
    pub fn new(n_sites: usize, spacers: &[usize], sector: Option<usize>) -> Result<Self> {
        let sites: Vec<usize> = (0..n_sites).filter(|k| !spacers.contains(k)).collect();
        let ns = sites.len();
        if ns > 40 {
            return Err(Error::DimensionCap { dim: usize::MAX, cap: DEFAULT_DIM_CAP });
        }
        let states = match sector {
            Some(m) => {
                if m > ns {
                    return Err(Error::InvalidTerm(format!("sector {m} exceeds {ns} spins")));
                }
                spin_sector(ns, m)
            }
            None => (0..(1u64 << ns)).collect(),
        };
        if states.len() > DEFAULT_DIM_CAP {
            return Err(Error::DimensionCap { dim: states.len(), cap: DEFAULT_DIM_CAP });
        }
        let lookup = states.iter().enumerate().map(|(i, &s)| (s, i)).collect();
        Ok(SpinBasis { sites, sector, states, lookup })
    }

    pub fn dim(&self) -> usize {
        self.states.len()
    }

    pub fn index_of(&self, state: u64) -> Option<usize> {
        self.lookup.get(&state).copied()
    }

    pub fn slot_of(&self, site: usize) -> Option<usize> {
        self.sites.iter().position(|&s| s == site)
    }

    /// Excitation probability of every slot for amplitudes over this basis.
    pub fn populations(&self, amps: &[C64]) -> Vec<f64> {
        let mut p = vec![0.0; self.sites.len()];
        for (a, &s) in amps.iter().zip(&self.states) {
            let w = a.norm_sqr();
            for (k, pk) in p.iter_mut().enumerate() {
                if s >> k & 1 == 1 {
                    *pk += w;
                }
            }
        }
        p
    }
}

/// Terms, spacers and potentials of an ideal model; the matrix is built on
/// demand at any time.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct EffectiveModel {
    pub n_sites: usize,
    pub terms: Vec<HoppingTerm>,
    #[serde(default)]
    pub spacers: Vec<usize>,
    /// V_k per physical site (empty = none).
    #[serde(default)]
    pub potentials: Vec<f64>,
}

impl EffectiveModel {
    pub fn new(n_sites: usize, terms: Vec<HoppingTerm>, spacers: Vec<usize>, potentials: Vec<f64>) -> Result<Self> {
        validate_terms(&terms, n_sites)?;
        if !potentials.is_empty() && potentials.len() != n_sites {
            return Err(Error::InvalidTerm(format!("{} potentials for {n_sites} sites", potentials.len())));
        }
        if potentials.iter().any(|v| !v.is_finite()) {
            return Err(Error::InvalidTerm("non-finite site potential".into()));
        }
        if let Some(&s) = spacers.iter().find(|&&s| s >= n_sites) {
            return Err(Error::InvalidTerm(format!("spacer {s} outside chain")));
        }
        Ok(EffectiveModel { n_sites, terms, spacers, potentials })
    }

    pub fn is_time_dependent(&self) -> bool {
        self.terms.iter().any(|t| t.delta != 0.0)
    }

    pub fn basis(&self, sector: Option<usize>) -> Result<SpinBasis> {
        SpinBasis::new(self.n_sites, &self.spacers, sector)
    }

    /// Dense matrix at time t on `basis`.
    pub fn matrix(&self, basis: &SpinBasis, t: f64) -> CMatrix {
        let d = basis.dim();
        let mut h = CMatrix::zeros(d, d);
        let slot: Vec<Option<usize>> = (0..self.n_sites).map(|k| basis.slot_of(k)).collect();
        for term in &self.terms {
            let c = C64::from_polar(term.omega, term.phi - term.delta * t);
            for i in 0..self.n_sites - term.n {
                let (Some(si), Some(sj)) = (slot[i], slot[i + term.n]) else {
                    continue;
                };
                // σ⁺ᵢσ⁻ⱼ: j up, i down → i up, j down
                for (col, &s) in basis.states.iter().enumerate() {
                    if s >> sj & 1 == 1 && s >> si & 1 == 0 {
                        let t2 = s ^ (1 << sj) ^ (1 << si);
                        if let Some(row) = basis.index_of(t2) {
                            h[(row, col)] += c;
                            h[(col, row)] += c.conj();
                        }
                    }
                }
            }
        }
        if !self.potentials.is_empty() {
            for (col, &s) in basis.states.iter().enumerate() {
                let mut e = 0.0;
                for (k, &site) in basis.sites.iter().enumerate() {
                    let z = if s >> k & 1 == 1 { 1.0 } else { -1.0 };
                    e += 0.5 * self.potentials[site] * z;
                }
                h[(col, col)] += C64::new(e, 0.0);
            }
        }
        h
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct EffectiveHamiltonian {
    pub model: EffectiveModel,
    pub basis: SpinBasis,
    pub time: f64,
    pub matrix: CMatrix,
}

pub fn build_h_eff(
    terms: &[HoppingTerm],
    n_sites: usize,
    spacers: &[usize],
    potentials: &[f64],
    t: f64,
    sector: Option<usize>,
) -> Result<EffectiveHamiltonian> {
    let model = EffectiveModel::new(n_sites, terms.to_vec(), spacers.to_vec(), potentials.to_vec())?;
    let basis = model.basis(sector)?;
    let matrix = model.matrix(&basis, t);
    Ok(EffectiveHamiltonian { model, basis, time: t, matrix })
}

/// Ascending eigenpairs; refuses matrices above `cap` rows.
pub fn diagonalize(h: &EffectiveHamiltonian, cap: usize) -> Result<(Vec<f64>, CMatrix)> {
    let d = h.matrix.nrows();
    if d > cap {
        return Err(Error::DimensionCap { dim: d, cap });
    }
    Ok(eigh(&h.matrix))
}

/// E_k = 2Ω cos(2π(k+Φ)/N), k = 0..N−1 (unsorted, in k order).
pub fn ring_spectrum(n: usize, flux: f64, omega: f64) -> Vec<f64> {
    (0..n).map(|k| 2.0 * omega * (2.0 * PI * (k as f64 + flux) / n as f64).cos()).collect()
}

/// Angular velocity of the (|k⟩ + e^{iϕ}|k−1⟩)/√2 packet: E_k − E_{k−1}.
pub fn wavepacket_velocity(n: usize, k: i64, flux: f64, omega: f64) -> f64 {
    let nf = n as f64;
    -4.0 * omega * (PI / nf).sin() * (2.0 * PI * (flux + k as f64 - 0.5) / nf).sin()
}

/// Ring terms with loop phase 2πΦ and rate Ω.
pub fn ring_terms(n: usize, flux: f64, omega: f64) -> Result<Vec<HoppingTerm>> {
    Ok(compile(&GeometrySpec::Ring { n, loop_flux: 2.0 * PI * flux, omega })?.terms)
}

/// Site amplitudes (1/√(2N))(e^{2πikn/N} + e^{iϕ₀}e^{2πi(k−1)n/N}).
pub fn wavepacket_state(n: usize, k: i64, phi0: f64) -> Vec<C64> {
    let nf = n as f64;
    let norm = 1.0 / (2.0 * nf).sqrt();
    (0..n)
        .map(|m| {
            let a = 2.0 * PI * k as f64 * m as f64 / nf;
            let b = 2.0 * PI * (k - 1) as f64 * m as f64 / nf;
            (C64::from_polar(1.0, a) + C64::from_polar(1.0, phi0 + b)) * norm
        })
        .collect()
}

/// Free-fermion energies of the ring in the `n_exc` sector: the boundary hop
/// picks up (−1)^{n_exc−1} from the Jordan–Wigner string.
pub fn jordan_wigner_oracle(n: usize, loop_phase: f64, n_exc: usize, omega: f64) -> Result<Vec<f64>> {
    if n_exc == 0 || n_exc >= n {
        return Err(Error::InvalidTerm(format!("excitation number {n_exc} outside 1..{}", n - 1)));
    }
    let terms = compile(&GeometrySpec::Ring { n, loop_flux: loop_phase, omega })?.terms;
    let mut h = CMatrix::zeros(n, n);
    let twist = if n_exc % 2 == 1 { 1.0 } else { -1.0 };
    for t in &terms {
        for i in 0..n - t.n {
            let j = i + t.n;
            // strings between i and j hold n_exc−1 fermions for the long hop
            let sign = if t.n == 1 { 1.0 } else { twist };
            let c = C64::from_polar(t.omega * sign, t.phi);
            h[(i, j)] += c;
            h[(j, i)] += c.conj();
        }
    }
    let eps = eigh(&h).0;
    let mut out = Vec::new();
    for mask in spin_sector(n, n_exc) {
        out.push((0..n).filter(|k| mask >> k & 1 == 1).map(|k| eps[k]).sum());
    }
    out.sort_by(f64::total_cmp);
    Ok(out)
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct LadderPoint {
    /// j = J₂/J₁.
    pub j: f64,
    pub energy: f64,
    /// Mean vector chirality ⟨σˣᵢσʸᵢ₊₁ − σʸᵢσˣᵢ₊₁⟩ over bonds.
    pub chirality: f64,
}

/// Triangular-ladder ground state (half-filling sector) for each j.
pub fn triangular_scan(n: usize, j1: f64, js: &[f64], phi1: f64, phi2: f64) -> Result<Vec<LadderPoint>> {
    js.iter()
        .map(|&j| {
            let terms = vec![HoppingTerm::new(1, j1, phi1), HoppingTerm::new(2, j * j1, phi2)];
            let h = build_h_eff(&terms, n, &[], &[], 0.0, Some(n / 2))?;
            let (vals, vecs) = diagonalize(&h, 5000)?;
            let gs: Vec<C64> = vecs.column(0).iter().copied().collect();
            let mut chi = 0.0;
            for i in 0..n - 1 {
                chi += -4.0 * correlator(&h.basis, &gs, i, i + 1).im;
            }
            Ok(LadderPoint { j, energy: vals[0], chirality: chi / (n - 1) as f64 })
        })
        .collect()
}

/// ⟨σ⁺ᵢσ⁻ⱼ⟩ for slot indices i ≠ j.
pub fn correlator(basis: &SpinBasis, amps: &[C64], i: usize, j: usize) -> C64 {
    let mut acc = C64::new(0.0, 0.0);
    for (col, &s) in basis.states.iter().enumerate() {
        if s >> j & 1 == 1 && s >> i & 1 == 0 {
            if let Some(row) = basis.index_of(s ^ (1 << i) ^ (1 << j)) {
                acc += amps[row].conj() * amps[col];
            }
        }
    }
    acc
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn ring_fig_zero_flux_is_circulant() {
        let h = build_h_eff(&ring_terms(5, 0.0, 1.0).unwrap(), 5, &[], &[], 0.0, Some(1)).unwrap();
        for r in 0..5 {
            for c in 0..5 {
                let want = if (r + 5 - c) % 5 == 1 || (c + 5 - r) % 5 == 1 { 1.0 } else { 0.0 };
                assert!((h.matrix[(r, c)] - C64::new(want, 0.0)).norm() < 1e-15);
            }
        }
    }

    #[test]
    fn velocity_examples() {
        assert!((wavepacket_velocity(5, 0, 0.0, 1.0) - 4.0 * (PI / 5.0).sin().powi(2)).abs() < 1e-14);
        assert!(wavepacket_velocity(7, 0, 0.5, 1.0).abs() < 1e-15);
    }

    #[test]
    fn packet_profile() {
        let a = wavepacket_state(5, 0, 0.0);
        let p: Vec<f64> = a.iter().map(|x| x.norm_sqr()).collect();
        assert!((p.iter().sum::<f64>() - 1.0).abs() < 1e-14);
        for (m, pm) in p.iter().enumerate() {
            assert!((pm - (1.0 + (2.0 * PI * m as f64 / 5.0).cos()) / 5.0).abs() < 1e-14);
        }
    }

    #[test]
    fn jw_four_sites_two_fermions() {
        let e = jordan_wigner_oracle(4, 0.0, 2, 1.0).unwrap();
        let sp: Vec<f64> = (0..4).map(|k| 2.0 * (PI * (2 * k + 1) as f64 / 4.0).cos()).collect();
        let mut want = Vec::new();
        for a in 0..4 {
            for b in a + 1..4 {
                want.push(sp[a] + sp[b]);
            }
        }
        want.sort_by(f64::total_cmp);
        for (x, y) in e.iter().zip(&want) {
            assert!((x - y).abs() < 1e-12);
        }
    }

    #[test]
    fn spacer_edges_dropped() {
        let h = build_h_eff(&[HoppingTerm::new(1, 1.0, 0.0)], 4, &[1], &[], 0.0, Some(1)).unwrap();
        // only 2–3 bond survives
        assert_eq!(h.basis.dim(), 3);
        let nnz = h.matrix.iter().filter(|x| x.norm() > 0.0).count();
        assert_eq!(nnz, 2);
    }
}
