//! Spin ⊗ truncated-boson state space in the interaction picture of H₀.
//!
//! Basis ordering is spin-major, phonon-minor:
//! `index = spin_bits * phonon_dim + phonon_index`, where bit `s` of
//! `spin_bits` set means spin slot `s` is excited (|↑⟩), and the phonon index
//! is mixed-radix with mode 0 most significant.

use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};

use crate::{Error, Result, C64};

pub const DEFAULT_DIM_CAP: usize = 2_000_000;
/// Leakage (top-Fock population / norm) that triggers a cutoff rerun.
pub const LEAKAGE_THRESHOLD: f64 = 1e-6;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Mode {
    /// νₗ in rad/s.
    pub frequency: f64,
    /// η_{l,k} for every physical ion k.
    pub lamb_dicke: Vec<f64>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ChainConfig {
    pub n_ions: usize,
    /// Δ in rad/s: transition-frequency step between neighbouring ions.
    pub gradient: f64,
    pub modes: Vec<Mode>,
    pub fock_cutoff: usize,
    /// ω₀ in rad/s; informational only.
    #[serde(default)]
    pub qubit_splitting: f64,
    /// Physical (0-based) indices of spacer ions. They keep their place in the
    /// gradient and in the modes but carry no spin degree of freedom.
    #[serde(default)]
    pub spacers: Vec<usize>,
}

impl ChainConfig {
    /// Single centre-of-mass mode with the uniform row η₁/√N.
    pub fn com(n_ions: usize, gradient: f64, nu: f64, eta1: f64, fock_cutoff: usize) -> Result<Self> {
        let eta = eta1 / (n_ions.max(1) as f64).sqrt();
        let cfg = ChainConfig {
            n_ions,
            gradient,
            modes: vec![Mode { frequency: nu, lamb_dicke: vec![eta; n_ions] }],
            fock_cutoff,
            qubit_splitting: 0.0,
            spacers: Vec::new(),
        };
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn with_spacers(mut self, spacers: Vec<usize>) -> Result<Self> {
        self.spacers = spacers;
        self.validate()?;
        Ok(self)
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |m: String| Err(Error::InvalidChain(m));
        if self.n_ions < 2 {
            return bad(format!("need at least 2 ions, got {}", self.n_ions));
        }
        if !(self.gradient > 0.0 && self.gradient.is_finite()) {
            return bad(format!("gradient must be positive, got {}", self.gradient));
        }
        if self.fock_cutoff < 1 {
            return bad("fock_cutoff must be >= 1".into());
        }
        if self.modes.is_empty() {
            return bad("at least one motional mode is required".into());
        }
        for (l, m) in self.modes.iter().enumerate() {
            if !(m.frequency > 0.0 && m.frequency.is_finite()) {
                return bad(format!("mode {l} frequency must be positive"));
            }
            if m.lamb_dicke.len() != self.n_ions {
                return bad(format!("mode {l} has {} Lamb-Dicke entries for {} ions", m.lamb_dicke.len(), self.n_ions));
            }
            if m.lamb_dicke.iter().any(|x| !x.is_finite()) {
                return bad(format!("mode {l} has non-finite Lamb-Dicke entries"));
            }
            if l > 0 && self.modes[l - 1].frequency >= m.frequency {
                return bad("mode frequencies must be strictly increasing".into());
            }
        }
        let mut seen = vec![false; self.n_ions];
        for &s in &self.spacers {
            if s >= self.n_ions {
                return bad(format!("spacer {s} out of range"));
            }
            if seen[s] {
                return bad(format!("duplicate spacer {s}"));
            }
            seen[s] = true;
        }
        if self.spacers.len() + 1 > self.n_ions {
            return bad("no active spin left after removing spacers".into());
        }
        Ok(())
    }

    /// Physical indices of the non-spacer ions, ascending.
    pub fn active_sites(&self) -> Vec<usize> {
        (0..self.n_ions).filter(|k| !self.spacers.contains(k)).collect()
    }

    pub fn basis(&self) -> Result<Basis> {
        build_basis(self)
    }
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Basis {
    n_spins: usize,
    cutoffs: Vec<usize>,
    strides: Vec<usize>,
    phonon_dim: usize,
    dim: usize,
}

pub fn build_basis(config: &ChainConfig) -> Result<Basis> {
    config.validate()?;
    let cutoffs = vec![config.fock_cutoff; config.modes.len()];
    Basis::new(config.n_ions - config.spacers.len(), &cutoffs)
}

impl Basis {
    pub fn new(n_spins: usize, cutoffs: &[usize]) -> Result<Self> {
        Self::with_cap(n_spins, cutoffs, DEFAULT_DIM_CAP)
    }

    pub fn with_cap(n_spins: usize, cutoffs: &[usize], cap: usize) -> Result<Self> {
        if n_spins == 0 || n_spins > 40 {
            return Err(Error::InvalidChain(format!("unsupported spin count {n_spins}")));
        }
        let mut phonon_dim: usize = 1;
        for &c in cutoffs {
            phonon_dim = phonon_dim.checked_mul(c + 1).ok_or(Error::DimensionCap { dim: usize::MAX, cap })?;
        }
        let dim = (1usize << n_spins).checked_mul(phonon_dim).ok_or(Error::DimensionCap { dim: usize::MAX, cap })?;
        if dim > cap {
            return Err(Error::DimensionCap { dim, cap });
        }
        let mut strides = vec![1; cutoffs.len()];
        for l in (0..cutoffs.len().saturating_sub(1)).rev() {
            strides[l] = strides[l + 1] * (cutoffs[l + 1] + 1);
        }
        Ok(Basis { n_spins, cutoffs: cutoffs.to_vec(), strides, phonon_dim, dim })
    }

    pub fn dim(&self) -> usize {
        self.dim
    }
    pub fn n_spins(&self) -> usize {
        self.n_spins
    }
    pub fn n_modes(&self) -> usize {
        self.cutoffs.len()
    }
    pub fn cutoffs(&self) -> &[usize] {
        &self.cutoffs
    }
    pub fn phonon_dim(&self) -> usize {
        self.phonon_dim
    }
    pub fn spin_dim(&self) -> usize {
        1 << self.n_spins
    }
    /// Index offset produced by adding one phonon to `mode`.
    pub fn phonon_stride(&self, mode: usize) -> usize {
        self.strides[mode]
    }
    /// Index offset produced by flipping spin slot `s` up.
    pub fn spin_stride(&self, s: usize) -> usize {
        (1usize << s) * self.phonon_dim
    }

    pub fn index(&self, spin: u64, phonons: &[usize]) -> Result<usize> {
        if spin >= (1u64 << self.n_spins) {
            return Err(Error::LabelOutOfRange(format!("spin configuration {spin:#b}")));
        }
        if phonons.len() != self.cutoffs.len() {
            return Err(Error::LabelOutOfRange(format!(
                "{} phonon labels for {} modes",
                phonons.len(),
                self.cutoffs.len()
            )));
        }
        let mut p = 0;
        for (l, (&n, &c)) in phonons.iter().zip(&self.cutoffs).enumerate() {
            if n > c {
                return Err(Error::LabelOutOfRange(format!("mode {l} occupation {n} > cutoff {c}")));
            }
            p += n * self.strides[l];
        }
        Ok(spin as usize * self.phonon_dim + p)
    }

    pub fn labels(&self, index: usize) -> (u64, Vec<usize>) {
        let spin = (index / self.phonon_dim) as u64;
        let p = index % self.phonon_dim;
        let ph = (0..self.cutoffs.len()).map(|l| self.phonon_of_index(p, l)).collect();
        (spin, ph)
    }

    #[inline]
    pub fn spin_of(&self, index: usize) -> u64 {
        (index / self.phonon_dim) as u64
    }

    #[inline]
    pub fn phonon_of(&self, index: usize, mode: usize) -> usize {
        self.phonon_of_index(index % self.phonon_dim, mode)
    }

    #[inline]
    fn phonon_of_index(&self, p: usize, mode: usize) -> usize {
        (p / self.strides[mode]) % (self.cutoffs[mode] + 1)
    }

    /// All basis indices with exactly `n_exc` excited spins.
    pub fn excitation_sector(&self, n_exc: usize) -> Vec<usize> {
        spin_sector(self.n_spins, n_exc)
            .into_iter()
            .flat_map(|s| {
                let base = s as usize * self.phonon_dim;
                base..base + self.phonon_dim
            })
            .collect()
    }

    /// Dense matrix of a single ladder operator (for tests and small oracles).
    pub fn ladder_matrix(&self, op: Ladder) -> Result<DMatrix<C64>> {
        self.check_label(op)?;
        let mut m = DMatrix::zeros(self.dim, self.dim);
        for i in 0..self.dim {
            if let Some((j, f)) = self.ladder_target(op, i) {
                m[(j, i)] = C64::new(f, 0.0);
            }
        }
        Ok(m)
    }

    fn check_label(&self, op: Ladder) -> Result<()> {
        match op {
            Ladder::SpinRaise(s) | Ladder::SpinLower(s) if s >= self.n_spins => {
                Err(Error::LabelOutOfRange(format!("spin slot {s} (have {})", self.n_spins)))
            }
            Ladder::PhononRaise(l) | Ladder::PhononLower(l) if l >= self.cutoffs.len() => {
                Err(Error::LabelOutOfRange(format!("mode {l} (have {})", self.cutoffs.len())))
            }
            _ => Ok(()),
        }
    }

    /// Where a ladder operator sends basis vector `i`, with its matrix element.
    /// `None` means the image is zero (including truncation at the cutoff).
    #[inline]
    pub fn ladder_target(&self, op: Ladder, i: usize) -> Option<(usize, f64)> {
        match op {
            Ladder::SpinRaise(s) => (self.spin_of(i) >> s & 1 == 0).then(|| (i + self.spin_stride(s), 1.0)),
            Ladder::SpinLower(s) => (self.spin_of(i) >> s & 1 == 1).then(|| (i - self.spin_stride(s), 1.0)),
            Ladder::PhononRaise(l) => {
                let n = self.phonon_of(i, l);
                (n < self.cutoffs[l]).then(|| (i + self.strides[l], ((n + 1) as f64).sqrt()))
            }
            Ladder::PhononLower(l) => {
                let n = self.phonon_of(i, l);
                (n > 0).then(|| (i - self.strides[l], (n as f64).sqrt()))
            }
        }
    }
}

/// Spin configurations of `n` sites with `n_exc` excitations, ascending.
pub fn spin_sector(n: usize, n_exc: usize) -> Vec<u64> {
    if n_exc > n {
        return Vec::new();
    }
    (0..1u64 << n).filter(|s| s.count_ones() as usize == n_exc).collect()
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub enum Ladder {
    SpinRaise(usize),
    SpinLower(usize),
    PhononRaise(usize),
    PhononLower(usize),
}

#[derive(Clone, Debug, PartialEq)]
pub struct SpinFockState {
    pub basis: Basis,
    pub amps: Vec<C64>,
    /// Accumulated squared norm lost to phonon raising at the cutoff.
    pub leakage: f64,
}

impl SpinFockState {
    pub fn new(basis: Basis, amps: Vec<C64>) -> Result<Self> {
        if amps.len() != basis.dim() {
            return Err(Error::Mismatch(format!("{} amplitudes for dimension {}", amps.len(), basis.dim())));
        }
        Ok(SpinFockState { basis, amps, leakage: 0.0 })
    }

    pub fn basis_state(basis: &Basis, spin: u64, phonons: &[usize]) -> Result<Self> {
        let i = basis.index(spin, phonons)?;
        let mut amps = vec![C64::new(0.0, 0.0); basis.dim()];
        amps[i] = C64::new(1.0, 0.0);
        Self::new(basis.clone(), amps)
    }

    /// |spin⟩ ⊗ |n_1 … n_L⟩ from a spin amplitude vector of length 2^N.
    pub fn product(basis: &Basis, spin_amps: &[C64], phonons: &[usize]) -> Result<Self> {
        if spin_amps.len() != basis.spin_dim() {
            return Err(Error::Mismatch(format!("{} spin amplitudes for {} spins", spin_amps.len(), basis.n_spins())));
        }
        let p = basis.index(0, phonons)?;
        let mut amps = vec![C64::new(0.0, 0.0); basis.dim()];
        for (s, a) in spin_amps.iter().enumerate() {
            amps[s * basis.phonon_dim() + p] = *a;
        }
        Self::new(basis.clone(), amps)
    }

    pub fn norm_sqr(&self) -> f64 {
        self.amps.iter().map(|a| a.norm_sqr()).sum()
    }

    pub fn apply_ladder(&self, op: Ladder) -> Result<Self> {
        self.basis.check_label(op)?;
        let mut out = vec![C64::new(0.0, 0.0); self.amps.len()];
        let mut lost = 0.0;
        for (i, a) in self.amps.iter().enumerate() {
            if a.norm_sqr() == 0.0 {
                continue;
            }
            match self.basis.ladder_target(op, i) {
                Some((j, f)) => out[j] += a * f,
                None => {
                    if let Ladder::PhononRaise(l) = op {
                        let n = self.basis.phonon_of(i, l);
                        if n == self.basis.cutoffs[l] {
                            lost += a.norm_sqr() * (n + 1) as f64;
                        }
                    }
                }
            }
        }
        Ok(SpinFockState { basis: self.basis.clone(), amps: out, leakage: self.leakage + lost })
    }

    pub fn observables(&self, time: f64) -> ObservableRecord {
        observables(&self.basis, &self.amps, time)
    }

    /// Spin amplitudes of the component with the given phonon occupations.
    pub fn spin_component(&self, phonons: &[usize]) -> Result<Vec<C64>> {
        let p = self.basis.index(0, phonons)?;
        Ok((0..self.basis.spin_dim()).map(|s| self.amps[s * self.basis.phonon_dim() + p]).collect())
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ObservableRecord {
    pub time: f64,
    pub p_excited: Vec<f64>,
    pub mean_phonons: Vec<f64>,
    pub norm: f64,
    /// ⟨Σσᶻ⟩.
    pub total_sz: f64,
    /// Population of the highest retained Fock level, per mode.
    pub top_fock: Vec<f64>,
}

pub fn observables(basis: &Basis, amps: &[C64], time: f64) -> ObservableRecord {
    let n = basis.n_spins();
    let mut pe = vec![0.0; n];
    let mut nbar = vec![0.0; basis.n_modes()];
    let mut top = vec![0.0; basis.n_modes()];
    let mut norm = 0.0;
    for (i, a) in amps.iter().enumerate() {
        let w = a.norm_sqr();
        if w == 0.0 {
            continue;
        }
        norm += w;
        let s = basis.spin_of(i);
        for (k, p) in pe.iter_mut().enumerate() {
            if s >> k & 1 == 1 {
                *p += w;
            }
        }
        for l in 0..basis.n_modes() {
            let nl = basis.phonon_of(i, l);
            nbar[l] += w * nl as f64;
            if nl == basis.cutoffs()[l] {
                top[l] += w;
            }
        }
    }
    let total_sz = pe.iter().map(|p| 2.0 * p).sum::<f64>() - n as f64 * norm;
    ObservableRecord { time, p_excited: pe, mean_phonons: nbar, norm: norm.sqrt(), total_sz, top_fock: top }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn dimensions() {
        assert_eq!(Basis::new(1, &[1]).unwrap().dim(), 4);
        assert_eq!(Basis::new(5, &[6]).unwrap().dim(), 224);
        assert_eq!(Basis::new(2, &[2, 2]).unwrap().dim(), 36);
        assert!(matches!(Basis::with_cap(10, &[9], 1000), Err(Error::DimensionCap { .. })));
    }

    #[test]
    fn round_trip() {
        let b = Basis::new(3, &[2, 3]).unwrap();
        for i in 0..b.dim() {
            let (s, p) = b.labels(i);
            assert_eq!(b.index(s, &p).unwrap(), i);
        }
    }

    #[test]
    fn ladder_examples() {
        let b = Basis::new(1, &[3]).unwrap();
        let down = SpinFockState::basis_state(&b, 0, &[0]).unwrap();
        let up = down.apply_ladder(Ladder::SpinRaise(0)).unwrap();
        assert_eq!(up.amps[b.index(1, &[0]).unwrap()], C64::new(1.0, 0.0));
        assert_eq!(up.apply_ladder(Ladder::SpinRaise(0)).unwrap().norm_sqr(), 0.0);
        let n2 = SpinFockState::basis_state(&b, 0, &[2]).unwrap();
        let n3 = n2.apply_ladder(Ladder::PhononRaise(0)).unwrap();
        assert!((n3.amps[b.index(0, &[3]).unwrap()].re - 3f64.sqrt()).abs() < 1e-15);
        let gone = n3.apply_ladder(Ladder::PhononRaise(0)).unwrap();
        assert_eq!(gone.norm_sqr(), 0.0);
        assert!(gone.leakage > 0.0);
    }

    #[test]
    fn sectors() {
        assert_eq!(spin_sector(5, 1).len(), 5);
        assert_eq!(spin_sector(5, 0).len(), 1);
        assert_eq!(spin_sector(4, 2).len(), 6);
        let b = Basis::new(4, &[1]).unwrap();
        let total: usize = (0..=4).map(|k| b.excitation_sector(k).len()).sum();
        assert_eq!(total, b.dim());
    }

    #[test]
    fn chain_validation() {
        assert!(ChainConfig::com(1, 1.0, 10.0, 0.1, 2).is_err());
        assert!(ChainConfig::com(3, -1.0, 10.0, 0.1, 2).is_err());
        assert!(ChainConfig::com(3, 1.0, 10.0, 0.1, 0).is_err());
        let c = ChainConfig::com(4, 1.0, 10.0, 0.2, 2).unwrap();
        assert!((c.modes[0].lamb_dicke[2] - 0.1).abs() < 1e-15);
        assert!(c.clone().with_spacers(vec![4]).is_err());
        assert_eq!(c.with_spacers(vec![1]).unwrap().active_sites(), vec![0, 2, 3]);
    }
}
