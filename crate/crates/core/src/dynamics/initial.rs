//! Initial spin ⊗ phonon states.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Geometric};
use serde::{Deserialize, Serialize};

use crate::effective::wavepacket_state;
use crate::model::{Basis, SpinFockState};
use crate::{Error, Result, C64};

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum SpinInit {
    /// One excitation on a physical site (0-based).
    SingleExcitation { site: usize },
    /// (|k⟩ + e^{iϕ₀}|k−1⟩)/√2 over the active sites taken as a ring.
    WavePacket { k: i64, phi0: f64 },
    /// Excited physical sites.
    Product { excited: Vec<usize> },
    /// Amplitudes over all 2^(active) spin configurations as (re, im).
    Custom { amplitudes: Vec<(f64, f64)> },
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum PhononInit {
    #[default]
    Ground,
    /// Fock occupation of every mode (one entry per mode, or a single entry for mode 0).
    Fock { n: Vec<usize> },
    /// Diagonal thermal ensemble of mode occupations, sampled from a geometric
    /// distribution with mean `nbar` using a seeded ChaCha8 stream.
    Thermal { nbar: f64, seed: u64, samples: usize },
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct InitialStateSpec {
    pub spin: SpinInit,
    #[serde(default)]
    pub phonon: PhononInit,
}

impl InitialStateSpec {
    pub fn single(site: usize) -> Self {
        InitialStateSpec { spin: SpinInit::SingleExcitation { site }, phonon: PhononInit::Ground }
    }

    pub fn wave_packet(k: i64, phi0: f64) -> Self {
        InitialStateSpec { spin: SpinInit::WavePacket { k, phi0 }, phonon: PhononInit::Ground }
    }

    pub fn with_phonons(mut self, phonon: PhononInit) -> Self {
        self.phonon = phonon;
        self
    }

    /// Spin amplitudes over the 2^(active) configurations (bit s ↔ slot s).
    pub fn spin_amplitudes(&self, sites: &[usize]) -> Result<Vec<C64>> {
        let ns = sites.len();
        let dim = 1usize << ns;
        let slot = |site: usize| -> Result<usize> {
            sites
                .iter()
                .position(|&s| s == site)
                .ok_or_else(|| Error::LabelOutOfRange(format!("site {site} is a spacer or outside the chain")))
        };
        let mut amps = vec![C64::new(0.0, 0.0); dim];
        match &self.spin {
            SpinInit::SingleExcitation { site } => amps[1 << slot(*site)?] = C64::new(1.0, 0.0),
            SpinInit::WavePacket { k, phi0 } => {
                if ns < 3 {
                    return Err(Error::InvalidTerm("wave packet needs at least 3 sites".into()));
                }
                for (s, a) in wavepacket_state(ns, *k, *phi0).into_iter().enumerate() {
                    amps[1 << s] = a;
                }
            }
            SpinInit::Product { excited } => {
                let mut bits = 0usize;
                for &e in excited {
                    bits |= 1 << slot(e)?;
                }
                amps[bits] = C64::new(1.0, 0.0);
            }
            SpinInit::Custom { amplitudes } => {
                if amplitudes.len() != dim {
                    return Err(Error::Mismatch(format!(
                        "{} custom amplitudes for {dim} configurations",
                        amplitudes.len()
                    )));
                }
                let norm: f64 = amplitudes.iter().map(|(r, i)| r * r + i * i).sum::<f64>().sqrt();
                if !(norm > 0.0) {
                    return Err(Error::Mismatch("custom amplitudes vanish".into()));
                }
                for (a, (r, i)) in amps.iter_mut().zip(amplitudes) {
                    *a = C64::new(*r, *i) / norm;
                }
            }
        }
        Ok(amps)
    }

    /// Pure states making up the initial ensemble (equal weights).
    pub fn states(&self, basis: &Basis, sites: &[usize]) -> Result<Vec<SpinFockState>> {
        let spin = self.spin_amplitudes(sites)?;
        let nm = basis.n_modes();
        let occupations: Vec<Vec<usize>> = match &self.phonon {
            PhononInit::Ground => vec![vec![0; nm]],
            PhononInit::Fock { n } => {
                let mut occ = vec![0; nm];
                match n.len() {
                    1 => occ[0] = n[0],
                    l if l == nm => occ.copy_from_slice(n),
                    l => return Err(Error::Mismatch(format!("{l} Fock entries for {nm} modes"))),
                }
                vec![occ]
            }
            PhononInit::Thermal { nbar, seed, samples } => {
                if !(*nbar >= 0.0) || *samples == 0 {
                    return Err(Error::Mismatch("thermal state needs nbar ≥ 0 and samples ≥ 1".into()));
                }
                let mut rng = ChaCha8Rng::seed_from_u64(*seed);
                let p = 1.0 / (1.0 + nbar);
                let geo = Geometric::new(p).map_err(|e| Error::Mismatch(e.to_string()))?;
                (0..*samples).map(|_| (0..nm).map(|_| geo.sample(&mut rng) as usize).collect()).collect()
            }
        };
        occupations
            .iter()
            .map(|occ| {
                for (l, &o) in occ.iter().enumerate() {
                    if o > basis.cutoffs()[l] {
                        return Err(Error::LabelOutOfRange(format!(
                            "Fock {o} above cutoff {} of mode {l}",
                            basis.cutoffs()[l]
                        )));
                    }
                }
                SpinFockState::product(basis, &spin, occ)
            })
            .collect()
    }
}
