//! Full spin–phonon dynamics under a drive schedule, the ideal effective
//! evolution, and their comparison.

mod analysis;
mod dopri;
mod hamiltonian;
mod initial;

pub use analysis::{compare, fit_rabi, phase_track, profile_phase, Comparison, PhaseFit, RabiFit};
pub use dopri::{Dopri5, IntegratorStats};
pub use hamiltonian::{build_full_hamiltonian, FullHamiltonian};
pub use initial::{InitialStateSpec, PhononInit, SpinInit};

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::effective::{EffectiveModel, SpinBasis};
use crate::linalg::{eigh, propagator_from_eigen, CMatrix, CVector};
use crate::model::{observables, ChainConfig, ObservableRecord, LEAKAGE_THRESHOLD};
use crate::scheduler::DriveSchedule;
use crate::{Error, Result, C64};

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Snapshot {
    pub time: f64,
    pub amps: Vec<C64>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum StateLayout {
    /// spin-major full basis with `phonon_dim` phonon states per spin configuration.
    Full { phonon_dim: usize },
    /// Effective spin basis: bitstrings of the retained configurations.
    Spin { states: Vec<u64> },
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Trajectory {
    pub n_sites: usize,
    /// Physical site of every slot.
    pub sites: Vec<usize>,
    pub records: Vec<ObservableRecord>,
    pub snapshots: Vec<Snapshot>,
    pub layout: StateLayout,
    pub stats: IntegratorStats,
    /// Largest top-Fock population seen.
    pub max_top_fock: f64,
    pub fock_cutoff: usize,
}

impl Trajectory {
    pub fn times(&self) -> Vec<f64> {
        self.records.iter().map(|r| r.time).collect()
    }

    /// Excitation probability per physical site (spacers read 0).
    pub fn site_populations(&self, i: usize) -> Vec<f64> {
        let mut p = vec![0.0; self.n_sites];
        for (slot, &site) in self.sites.iter().enumerate() {
            p[site] = self.records[i].p_excited[slot];
        }
        p
    }

    /// CSV with header `t,Pe_1..Pe_N,norm,nbar,sector` (time in seconds).
    pub fn to_csv(&self) -> String {
        let mut s = String::from("t");
        for k in 1..=self.n_sites {
            s.push_str(&format!(",Pe_{k}"));
        }
        s.push_str(",norm,nbar,sector\n");
        for (i, r) in self.records.iter().enumerate() {
            s.push_str(&format!("{:.12e}", r.time));
            for p in self.site_populations(i) {
                s.push_str(&format!(",{p:.12e}"));
            }
            let nbar: f64 = r.mean_phonons.iter().sum();
            let sector: f64 = r.p_excited.iter().sum();
            s.push_str(&format!(",{:.15e},{nbar:.12e},{sector:.12e}\n", r.norm));
        }
        s
    }

    pub fn max_norm_drift(&self) -> f64 {
        self.records.iter().map(|r| (r.norm - 1.0).abs()).fold(0.0, f64::max)
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct IntegrateOptions {
    pub tol: f64,
    /// Step ceiling as a fraction of the fastest drive period.
    pub step_fraction: f64,
    /// Sample times at which to keep the full state (must be among the samples).
    pub snapshot_times: Vec<f64>,
    /// V_k per physical site.
    pub potentials: Vec<f64>,
    pub leakage_threshold: f64,
    /// Reruns at cutoff+2 allowed before giving up on leakage.
    pub max_reruns: usize,
}

impl Default for IntegrateOptions {
    fn default() -> Self {
        IntegrateOptions {
            tol: 1e-9,
            step_fraction: 1.0 / 20.0,
            snapshot_times: Vec::new(),
            potentials: Vec::new(),
            leakage_threshold: LEAKAGE_THRESHOLD,
            max_reruns: 2,
        }
    }
}

impl IntegrateOptions {
    pub fn with_tol(tol: f64) -> Self {
        IntegrateOptions { tol, ..Self::default() }
    }

    /// Keep full states at every sample time.
    pub fn snapshot_all(mut self, times: &[f64]) -> Self {
        self.snapshot_times = times.to_vec();
        self
    }
}

fn check_times(times: &[f64]) -> Result<()> {
    if times.windows(2).any(|w| !(w[1] > w[0])) || times.first().is_some_and(|t| *t < 0.0) {
        return Err(Error::Mismatch("sample times must be non-negative and strictly increasing".into()));
    }
    Ok(())
}

/// Full dynamics sampled at `times` (t₀ = 0). Reruns with a larger Fock cutoff
/// while the top level's population exceeds the leakage threshold.
pub fn integrate(
    init: &InitialStateSpec,
    schedule: &DriveSchedule,
    chain: &ChainConfig,
    times: &[f64],
    opts: &IntegrateOptions,
) -> Result<Trajectory> {
    if !(1e-12..=1e-4).contains(&opts.tol) {
        return Err(Error::Mismatch(format!("tolerance {:.1e} outside [1e-12, 1e-4]", opts.tol)));
    }
    check_times(times)?;
    let mut chain = chain.clone();
    for attempt in 0..=opts.max_reruns {
        let traj = integrate_once(init, schedule, &chain, times, opts)?;
        if traj.max_top_fock <= opts.leakage_threshold {
            return Ok(traj);
        }
        if attempt == opts.max_reruns {
            return Err(Error::Leakage {
                leakage: traj.max_top_fock,
                threshold: opts.leakage_threshold,
                cutoff: chain.fock_cutoff,
            });
        }
        chain.fock_cutoff += 2;
    }
    unreachable!("loop returns")
}

fn integrate_once(
    init: &InitialStateSpec,
    schedule: &DriveSchedule,
    chain: &ChainConfig,
    times: &[f64],
    opts: &IntegrateOptions,
) -> Result<Trajectory> {
    let potentials = if opts.potentials.is_empty() { vec![0.0; chain.n_ions] } else { opts.potentials.clone() };
    if potentials.len() != chain.n_ions {
        return Err(Error::Mismatch(format!("{} potentials for {} ions", potentials.len(), chain.n_ions)));
    }
    let h = FullHamiltonian::new(schedule, chain, &potentials)?;
    let sites = chain.active_sites();
    let states = init.states(&h.basis, &sites)?;
    let w = h.fastest_frequency() + potentials.iter().map(|v| v.abs()).fold(0.0, f64::max);
    let h_max = if w > 0.0 {
        opts.step_fraction * 2.0 * std::f64::consts::PI / w
    } else {
        times.last().copied().unwrap_or(1.0).max(1e-300)
    };
    let stepper = Dopri5::new(opts.tol, h_max);
    let n_samples = states.len();
    let runs: Vec<Result<(Vec<ObservableRecord>, Vec<Snapshot>, IntegratorStats)>> = states
        .into_par_iter()
        .map(|st| {
            let mut y = st.amps.clone();
            let mut recs = Vec::with_capacity(times.len());
            let mut snaps = Vec::new();
            let mut emit = |t: f64, y: &[C64]| {
                recs.push(observables(&h.basis, y, t));
                if opts.snapshot_times.iter().any(|s| (s - t).abs() <= 1e-12 * t.abs().max(1e-300)) {
                    snaps.push(Snapshot { time: t, amps: y.to_vec() });
                }
                Ok(())
            };
            let mut outs = times.to_vec();
            if outs.first() == Some(&0.0) {
                emit(0.0, &y)?;
                outs.remove(0);
            }
            let stats = stepper.integrate(|t, y, d| h.derivative(t, y, d), 0.0, &mut y, &outs, &mut emit)?;
            Ok((recs, snaps, stats))
        })
        .collect();
    let mut records: Vec<ObservableRecord> = Vec::new();
    let mut snapshots = Vec::new();
    let mut stats = IntegratorStats::default();
    for (i, r) in runs.into_iter().enumerate() {
        let (recs, snaps, st) = r?;
        stats.steps += st.steps;
        stats.rejected += st.rejected;
        stats.evaluations += st.evaluations;
        if i == 0 {
            records = recs;
            if n_samples == 1 {
                snapshots = snaps;
            }
        } else {
            for (acc, r) in records.iter_mut().zip(recs) {
                for (a, b) in acc.p_excited.iter_mut().zip(&r.p_excited) {
                    *a += b;
                }
                for (a, b) in acc.mean_phonons.iter_mut().zip(&r.mean_phonons) {
                    *a += b;
                }
                for (a, b) in acc.top_fock.iter_mut().zip(&r.top_fock) {
                    *a += b;
                }
                acc.norm += r.norm;
                acc.total_sz += r.total_sz;
            }
        }
    }
    if n_samples > 1 {
        let f = 1.0 / n_samples as f64;
        for r in &mut records {
            r.p_excited.iter_mut().for_each(|x| *x *= f);
            r.mean_phonons.iter_mut().for_each(|x| *x *= f);
            r.top_fock.iter_mut().for_each(|x| *x *= f);
            r.norm *= f;
            r.total_sz *= f;
        }
    }
    let max_top_fock = records.iter().flat_map(|r| r.top_fock.iter().copied()).fold(0.0, f64::max);
    Ok(Trajectory {
        n_sites: chain.n_ions,
        sites,
        records,
        snapshots,
        layout: StateLayout::Full { phonon_dim: h.basis.phonon_dim() },
        stats,
        max_top_fock,
        fock_cutoff: chain.fock_cutoff,
    })
}

/// Excitation number of `amps` if it is definite.
pub fn definite_sector(amps: &[C64]) -> Option<usize> {
    let mut sector = None;
    for (s, a) in amps.iter().enumerate() {
        if a.norm_sqr() > 0.0 {
            let n = (s as u64).count_ones() as usize;
            match sector {
                None => sector = Some(n),
                Some(m) if m != n => return None,
                _ => {}
            }
        }
    }
    sector
}

fn spin_record(basis: &SpinBasis, amps: &[C64], t: f64) -> ObservableRecord {
    let p = basis.populations(amps);
    let norm: f64 = amps.iter().map(|a| a.norm_sqr()).sum();
    let total_sz = p.iter().map(|x| 2.0 * x - norm).sum();
    ObservableRecord { time: t, p_excited: p, mean_phonons: Vec::new(), norm, total_sz, top_fock: Vec::new() }
}

/// Ideal spin evolution from spin amplitudes over all 2^(active) configurations.
/// Runs in the excitation sector when the initial state has one.
pub fn evolve_effective(spin_amps: &[C64], model: &EffectiveModel, times: &[f64]) -> Result<Trajectory> {
    check_times(times)?;
    let sector = definite_sector(spin_amps);
    let basis = model.basis(sector)?;
    if spin_amps.len() != 1usize << basis.sites.len() {
        return Err(Error::Mismatch(format!(
            "{} spin amplitudes for {} active sites",
            spin_amps.len(),
            basis.sites.len()
        )));
    }
    let psi0 = CVector::from_iterator(basis.dim(), basis.states.iter().map(|&s| spin_amps[s as usize]));
    let mut records = Vec::with_capacity(times.len());
    let mut snapshots = Vec::with_capacity(times.len());
    let mut push = |t: f64, v: &CVector| {
        let a: Vec<C64> = v.iter().copied().collect();
        records.push(spin_record(&basis, &a, t));
        snapshots.push(Snapshot { time: t, amps: a });
    };
    let mut stats = IntegratorStats::default();
    if !model.is_time_dependent() {
        let (vals, vecs) = eigh(&model.matrix(&basis, 0.0));
        let c0 = vecs.adjoint() * &psi0;
        for &t in times {
            let ph = CVector::from_iterator(
                vals.len(),
                vals.iter().zip(c0.iter()).map(|(e, c)| c * C64::from_polar(1.0, -e * t)),
            );
            push(t, &(&vecs * ph));
        }
    } else {
        // fourth-order Gauss–Legendre Magnus steps
        let dmax = model.terms.iter().map(|t| t.delta.abs()).fold(0.0, f64::max);
        let hnorm: f64 = model.terms.iter().map(|t| 2.0 * t.omega.abs()).sum::<f64>()
            + model.potentials.iter().map(|v| v.abs()).sum::<f64>();
        let hmax = (2.0 * std::f64::consts::PI / (40.0 * dmax)).min(0.05 / hnorm.max(1e-300));
        let mut psi = psi0.clone();
        let mut t = 0.0;
        let c = 3f64.sqrt() / 6.0;
        for &target in times {
            let span = target - t;
            let n = (span / hmax).ceil().max(if span > 0.0 { 1.0 } else { 0.0 }) as usize;
            let h = if n > 0 { span / n as f64 } else { 0.0 };
            for _ in 0..n {
                let h1 = model.matrix(&basis, t + (0.5 - c) * h);
                let h2 = model.matrix(&basis, t + (0.5 + c) * h);
                let comm: CMatrix = &h1 * &h2 - &h2 * &h1;
                let k = (&h1 + &h2) * C64::new(0.5 * h, 0.0) + comm * C64::new(0.0, 3f64.sqrt() * h * h / 12.0);
                let (vals, vecs) = eigh(&k);
                psi = propagator_from_eigen(&vals, &vecs, 1.0) * psi;
                t += h;
                stats.steps += 1;
            }
            t = target;
            push(t, &psi);
        }
    }
    Ok(Trajectory {
        n_sites: model.n_sites,
        sites: basis.sites.clone(),
        records,
        snapshots,
        layout: StateLayout::Spin { states: basis.states.clone() },
        stats,
        max_top_fock: 0.0,
        fock_cutoff: 0,
    })
}
