//! Interaction-picture spin–phonon Hamiltonian of a drive schedule.

use crate::linalg::CMatrix;
use crate::model::{build_basis, Basis, ChainConfig, Ladder};
use crate::scheduler::{DriveSchedule, Sideband};
use crate::{Result, C64};

/// Matrix-free V_I(t) + ½ΣV_kσᶻ_k.
#[derive(Clone, Debug)]
pub struct FullHamiltonian {
    pub basis: Basis,
    schedule: DriveSchedule,
    /// Physical site of every slot.
    sites: Vec<usize>,
    /// η_{l, site} per [slot][mode].
    eta: Vec<Vec<f64>>,
    /// (from, to, √n) lists for σ⁺_slot B_mode, per [slot][mode][blue/red].
    links: Vec<Vec<[Vec<(u32, u32, f64)>; 2]>>,
    /// Tones per sideband with their per-mode base frequency sν_l − δ_a.
    tones: [Vec<(usize, Vec<f64>)>; 2],
    /// Diagonal ½ΣV_kσᶻ_k (empty if no potentials).
    diag: Vec<f64>,
    programs: bool,
}

fn side(s: Sideband) -> usize {
    match s {
        Sideband::Blue => 0,
        Sideband::Red => 1,
    }
}

impl FullHamiltonian {
    pub fn new(schedule: &DriveSchedule, chain: &ChainConfig, potentials: &[f64]) -> Result<Self> {
        let basis = build_basis(chain)?;
        let sites = chain.active_sites();
        let nm = chain.modes.len();
        let eta: Vec<Vec<f64>> = sites.iter().map(|&k| chain.modes.iter().map(|m| m.lamb_dicke[k]).collect()).collect();
        let mut links = Vec::new();
        for slot in 0..sites.len() {
            let mut per_mode = Vec::new();
            for l in 0..nm {
                let mut pair: [Vec<(u32, u32, f64)>; 2] = [Vec::new(), Vec::new()];
                for (sb, op) in [(0, Ladder::PhononRaise(l)), (1, Ladder::PhononLower(l))] {
                    for i in 0..basis.dim() {
                        if let Some((j, f)) = basis.ladder_target(op, i) {
                            if let Some((k, g)) = basis.ladder_target(Ladder::SpinRaise(slot), j) {
                                pair[sb].push((i as u32, k as u32, f * g));
                            }
                        }
                    }
                }
                per_mode.push(pair);
            }
            links.push(per_mode);
        }
        let mut tones: [Vec<(usize, Vec<f64>)>; 2] = [Vec::new(), Vec::new()];
        for (a, t) in schedule.tones.iter().enumerate() {
            if t.amplitude == 0.0 {
                continue;
            }
            let w: Vec<f64> = chain.modes.iter().map(|m| t.sideband.sign() * m.frequency - t.detuning).collect();
            tones[side(t.sideband)].push((a, w));
        }
        let diag = if potentials.iter().any(|&v| v != 0.0) {
            (0..basis.dim())
                .map(|i| {
                    let s = basis.spin_of(i);
                    sites
                        .iter()
                        .enumerate()
                        .map(|(slot, &site)| 0.5 * potentials[site] * if s >> slot & 1 == 1 { 1.0 } else { -1.0 })
                        .sum()
                })
                .collect()
        } else {
            Vec::new()
        };
        Ok(FullHamiltonian {
            basis,
            schedule: schedule.clone(),
            sites,
            eta,
            links,
            tones,
            diag,
            programs: schedule.has_programs(),
        })
    }

    pub fn dim(&self) -> usize {
        self.basis.dim()
    }

    /// Largest |kΔ + sν_l − δ_a| over sites, modes and tones.
    pub fn fastest_frequency(&self) -> f64 {
        let mut w: f64 = 0.0;
        for &site in &self.sites {
            let k = site as f64 + 1.0;
            for list in &self.tones {
                for (_, ws) in list {
                    for x in ws {
                        w = w.max((k * self.schedule.gradient + x).abs());
                    }
                }
            }
        }
        w
    }

    /// Coefficients f(t) of σ⁺_slot B_mode, per [slot][mode][sideband].
    fn coefficients(&self, t: f64) -> Vec<Vec<[C64; 2]>> {
        let nm = self.eta.first().map_or(0, |e| e.len());
        // tone phasors per mode, site factor applied below
        let mut tone_sum: Vec<[C64; 2]> = vec![[C64::new(0.0, 0.0); 2]; nm];
        let mut out = Vec::with_capacity(self.sites.len());
        for (slot, &site) in self.sites.iter().enumerate() {
            let site_ph = C64::from_polar(1.0, (site as f64 + 1.0) * self.schedule.gradient * t);
            if slot == 0 {
                for (sb, list) in self.tones.iter().enumerate() {
                    for (a, ws) in list {
                        let tone = &self.schedule.tones[*a];
                        let theta = if self.programs { self.schedule.tone_phase(*a, t) } else { tone.phase };
                        for (l, w) in ws.iter().enumerate() {
                            tone_sum[l][sb] +=
                                C64::new(0.0, 0.5 * tone.amplitude) * C64::from_polar(1.0, w * t - theta);
                        }
                    }
                }
            }
            let row: Vec<[C64; 2]> = (0..nm)
                .map(|l| {
                    let e = self.eta[slot][l];
                    [tone_sum[l][0] * site_ph * e, tone_sum[l][1] * site_ph * e]
                })
                .collect();
            out.push(row);
        }
        out
    }

    /// out = H(t)·psi.
    pub fn apply(&self, t: f64, psi: &[C64], out: &mut [C64]) {
        out.iter_mut().for_each(|x| *x = C64::new(0.0, 0.0));
        let coef = self.coefficients(t);
        for (slot, per_mode) in self.links.iter().enumerate() {
            for (l, pair) in per_mode.iter().enumerate() {
                for sb in 0..2 {
                    let f = coef[slot][l][sb];
                    if f == C64::new(0.0, 0.0) {
                        continue;
                    }
                    let fc = f.conj();
                    for &(from, to, v) in &pair[sb] {
                        let (from, to) = (from as usize, to as usize);
                        out[to] += f * v * psi[from];
                        out[from] += fc * v * psi[to];
                    }
                }
            }
        }
        if !self.diag.is_empty() {
            for ((o, d), p) in out.iter_mut().zip(&self.diag).zip(psi) {
                *o += *d * p;
            }
        }
    }

    /// dψ/dt = −iH(t)ψ.
    pub fn derivative(&self, t: f64, psi: &[C64], out: &mut [C64]) {
        self.apply(t, psi, out);
        for x in out.iter_mut() {
            *x = C64::new(x.im, -x.re);
        }
    }

    /// Dense H(t) (small systems and tests).
    pub fn matrix(&self, t: f64) -> CMatrix {
        let d = self.dim();
        let mut m = CMatrix::zeros(d, d);
        let mut e = vec![C64::new(0.0, 0.0); d];
        let mut col = vec![C64::new(0.0, 0.0); d];
        for c in 0..d {
            e.iter_mut().for_each(|x| *x = C64::new(0.0, 0.0));
            e[c] = C64::new(1.0, 0.0);
            self.apply(t, &e, &mut col);
            for r in 0..d {
                m[(r, c)] = col[r];
            }
        }
        m
    }
}

/// Dense full Hamiltonian at time t.
pub fn build_full_hamiltonian(schedule: &DriveSchedule, chain: &ChainConfig, t: f64) -> Result<CMatrix> {
    Ok(FullHamiltonian::new(schedule, chain, &[])?.matrix(t))
}
