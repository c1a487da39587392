//! Figure-data recipes. Each returns plain data; the command layer writes it.

use std::f64::consts::{PI, TAU};

use petgraph::graph::UnGraph;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::dynamics::{
    compare, evolve_effective, fit_rabi, integrate, phase_track, profile_phase, Comparison, InitialStateSpec,
    IntegrateOptions, Trajectory,
};
use crate::effective::{build_h_eff, diagonalize, ring_terms, triangular_scan, wavepacket_velocity, EffectiveModel};
use crate::geometry::{compile, expand_to_graph, GeometrySpec, HoppingTerm};
use crate::model::ChainConfig;
use crate::scheduler::{
    rate_for_beta, reduce_tones, scaling_point, schedule, stroboscopic_period, validate, DriveSchedule, Knobs,
};
use crate::units::hz_to_rad;
use crate::{Error, Result};

/// COM-mode chain from boundary (Hz) parameters.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct ChainParams {
    pub gradient_hz: f64,
    pub nu_hz: f64,
    pub eta1: f64,
    pub cutoff: usize,
}

impl Default for ChainParams {
    fn default() -> Self {
        ChainParams { gradient_hz: 2e3, nu_hz: 2e6, eta1: 0.1, cutoff: 3 }
    }
}

impl ChainParams {
    pub fn chain(&self, n: usize) -> Result<ChainConfig> {
        ChainConfig::com(n, hz_to_rad(self.gradient_hz), hz_to_rad(self.nu_hz), self.eta1, self.cutoff)
    }
}

/// Sample times k·T, thinned to at most `max_samples` + 1 points.
pub fn stroboscopic_times(period: f64, span: f64, max_samples: usize) -> Vec<f64> {
    let k = (span / period).ceil().max(2.0) as usize;
    let step = k.div_ceil(max_samples.max(2)).max(1);
    (0..=k).step_by(step).map(|i| i as f64 * period).collect()
}

// ---------------------------------------------------------------------------
// Aharonov–Bohm ring

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RingParams {
    pub n: usize,
    /// Flux in quanta (loop phase / 2π).
    pub flux: f64,
    pub alpha: f64,
    pub beta: f64,
    pub chain: ChainParams,
    pub tol: f64,
    pub step_fraction: f64,
    /// Span in units of 2π/|v| (or 2π/v_max with `span_from_vmax`).
    pub revolutions: f64,
    pub span_from_vmax: bool,
    pub max_samples: usize,
    pub full: bool,
    /// Keep full states for the fidelity comparison.
    pub compare: bool,
}

impl Default for RingParams {
    fn default() -> Self {
        RingParams {
            n: 5,
            flux: 0.375,
            alpha: 20.0,
            beta: 40.0,
            chain: ChainParams::default(),
            tol: 1e-9,
            step_fraction: 0.05,
            revolutions: 1.0,
            span_from_vmax: false,
            max_samples: 60,
            full: true,
            compare: true,
        }
    }
}

#[derive(Clone, Debug)]
pub struct RingRun {
    pub schedule: DriveSchedule,
    pub period: f64,
    pub times: Vec<f64>,
    /// Closed-form packet velocity, rad/s.
    pub v_analytic: f64,
    pub v_max: f64,
    pub v_effective: f64,
    pub v_full: Option<f64>,
    pub v_full_ci95: Option<f64>,
    pub effective: Trajectory,
    pub full: Option<Trajectory>,
    pub comparison: Option<Comparison>,
}

pub fn ring_run(p: &RingParams) -> Result<RingRun> {
    let chain = p.chain.chain(p.n)?;
    let rate = rate_for_beta(chain.gradient, p.beta, true);
    let terms = ring_terms(p.n, p.flux, rate)?;
    let knobs = Knobs { alpha: p.alpha, grid_divisor: 2, ..Knobs::default() };
    let s = schedule(&terms, &chain, &knobs)?;
    let period = stroboscopic_period(&s, 10_000)?.t;
    let v = wavepacket_velocity(p.n, 0, p.flux, rate);
    let vmax = 4.0 * rate * (PI / p.n as f64).sin();
    let vspan = if p.span_from_vmax { vmax } else { v.abs().max(0.25 * vmax) };
    let times = stroboscopic_times(period, p.revolutions * TAU / vspan, p.max_samples);
    let init = InitialStateSpec::wave_packet(0, 0.0);
    let model = EffectiveModel::new(p.n, terms, Vec::new(), Vec::new())?;
    let eff = evolve_effective(&init.spin_amplitudes(&chain.active_sites())?, &model, &times)?;
    let v_eff = phase_track(&eff, 0.2)?.velocity;
    let (mut full, mut cmp, mut vf, mut ci) = (None, None, None, None);
    if p.full {
        let mut opts = IntegrateOptions { step_fraction: p.step_fraction, ..IntegrateOptions::with_tol(p.tol) };
        if p.compare {
            opts = opts.snapshot_all(&times);
        }
        let tr = integrate(&init, &s, &chain, &times, &opts)?;
        let fit = phase_track(&tr, 0.2)?;
        vf = Some(fit.velocity);
        ci = Some(fit.ci95);
        if p.compare {
            cmp = Some(compare(&tr, &eff, s.correction)?);
        }
        full = Some(tr);
    }
    Ok(RingRun {
        schedule: s,
        period,
        times,
        v_analytic: v,
        v_max: vmax,
        v_effective: v_eff,
        v_full: vf,
        v_full_ci95: ci,
        effective: eff,
        full,
        comparison: cmp,
    })
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct SweepRow {
    pub flux: f64,
    pub v_analytic: f64,
    pub v_effective: f64,
    pub v_full: Option<f64>,
    pub ci95: Option<f64>,
    /// (v_full − v_analytic)/v_max.
    pub deviation: Option<f64>,
}

/// Packet velocity against flux at `points` evenly spaced Φ ∈ [0, 1).
pub fn flux_velocity_sweep(base: &RingParams, points: usize) -> Result<Vec<SweepRow>> {
    (0..points)
        .into_par_iter()
        .map(|i| {
            let p = RingParams { flux: i as f64 / points as f64, span_from_vmax: true, compare: false, ..base.clone() };
            let r = ring_run(&p)?;
            Ok(SweepRow {
                flux: p.flux,
                v_analytic: r.v_analytic,
                v_effective: r.v_effective,
                v_full: r.v_full,
                ci95: r.v_full_ci95,
                deviation: r.v_full.map(|v| (v - r.v_analytic) / r.v_max),
            })
        })
        .collect()
}

// ---------------------------------------------------------------------------
// Bloch oscillation: a linearly growing flux from δ on the n = 1 term

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct BlochParams {
    pub n: usize,
    /// δ₁ in units of the hop rate.
    pub delta1: f64,
    pub alpha: f64,
    pub beta: f64,
    pub chain: ChainParams,
    /// Span in Bloch periods 2π/((N−1)δ₁).
    pub periods: f64,
    pub samples: usize,
    pub full: bool,
    pub tol: f64,
}

#[derive(Clone, Debug)]
pub struct BlochRun {
    pub rate: f64,
    pub bloch_period: f64,
    /// Flux in quanta at every sample.
    pub flux: Vec<f64>,
    pub effective: Trajectory,
    pub full: Option<Trajectory>,
    /// Unwrapped packet position ϕ(t) (effective, full).
    pub phase_effective: Vec<f64>,
    pub phase_full: Option<Vec<f64>>,
}

fn unwrapped_phases(t: &Trajectory) -> Vec<f64> {
    let mut out: Vec<f64> = Vec::new();
    for r in &t.records {
        let ph = profile_phase(&r.p_excited).0;
        let ph = match out.last() {
            None => ph,
            Some(&q) => q + crate::units::wrap_angle(ph - q),
        };
        out.push(ph);
    }
    out
}

pub fn bloch_oscillation(p: &BlochParams) -> Result<BlochRun> {
    if !(p.delta1 > 0.0) {
        return Err(Error::InvalidTerm("bloch oscillation needs δ₁ > 0".into()));
    }
    let chain = p.chain.chain(p.n)?;
    let rate = rate_for_beta(chain.gradient, p.beta, true);
    let mut terms = ring_terms(p.n, 0.0, rate)?;
    let d = p.delta1 * rate;
    for t in terms.iter_mut().filter(|t| t.n == 1) {
        t.delta = d;
    }
    // loop phase (N−1)(φ₁−δt) − φ_{N−1}
    let bloch_period = TAU / ((p.n - 1) as f64 * d);
    let span = p.periods * bloch_period;
    let ns = p.samples.max(3);
    let times: Vec<f64> = (0..=ns).map(|i| span * i as f64 / ns as f64).collect();
    let flux = times.iter().map(|t| -((p.n - 1) as f64) * d * t / TAU).collect();
    let init = InitialStateSpec::wave_packet(0, 0.0);
    let model = EffectiveModel::new(p.n, terms.clone(), Vec::new(), Vec::new())?;
    let eff = evolve_effective(&init.spin_amplitudes(&chain.active_sites())?, &model, &times)?;
    let full = if p.full {
        let knobs = Knobs { alpha: p.alpha, grid_divisor: 2, ..Knobs::default() };
        let s = schedule(&terms, &chain, &knobs)?;
        Some(integrate(&init, &s, &chain, &times, &IntegrateOptions::with_tol(p.tol))?)
    } else {
        None
    };
    Ok(BlochRun {
        rate,
        bloch_period,
        flux,
        phase_effective: unwrapped_phases(&eff),
        phase_full: full.as_ref().map(unwrapped_phases),
        effective: eff,
        full,
    })
}

// ---------------------------------------------------------------------------
// Triangular ladder ED

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TriangularRow {
    pub j: f64,
    /// Lowest levels of the half-filled sector.
    pub levels: Vec<f64>,
    pub chirality: f64,
}

pub fn triangular_ed(n: usize, js: &[f64], phi1: f64, phi2: f64, levels: usize) -> Result<Vec<TriangularRow>> {
    let scan = triangular_scan(n, 1.0, js, phi1, phi2)?;
    scan.iter()
        .map(|pt| {
            let terms = vec![HoppingTerm::new(1, 1.0, phi1), HoppingTerm::new(2, pt.j, phi2)];
            let h = build_h_eff(&terms, n, &[], &[], 0.0, Some(n / 2))?;
            let (vals, _) = diagonalize(&h, 5000)?;
            Ok(TriangularRow { j: pt.j, levels: vals.into_iter().take(levels).collect(), chirality: pt.chirality })
        })
        .collect()
}

// ---------------------------------------------------------------------------
// Spacer ladder

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SpacerLadder {
    pub n_ions: usize,
    /// 0-based.
    pub spacers: Vec<usize>,
    pub terms: Vec<HoppingTerm>,
    /// Undirected edges (i < j), 0-based physical sites.
    pub edges: Vec<(usize, usize)>,
    pub isomorphic: bool,
}

/// rows × cols grid graph.
pub fn grid_graph(rows: usize, cols: usize) -> UnGraph<(), ()> {
    let mut g = UnGraph::new_undirected();
    let nodes: Vec<_> = (0..rows * cols).map(|_| g.add_node(())).collect();
    for r in 0..rows {
        for c in 0..cols {
            let i = r * cols + c;
            if c + 1 < cols {
                g.add_edge(nodes[i], nodes[i + 1], ());
            }
            if r + 1 < rows {
                g.add_edge(nodes[i], nodes[i + cols], ());
            }
        }
    }
    g
}

pub fn spacer_ladder(rows: usize, cols: usize) -> Result<SpacerLadder> {
    let spec = GeometrySpec::RectangularLadder { rows, cols, omega: 1.0, rung: None, flux: 0.0, n: None };
    let g = compile(&spec)?;
    let graph = expand_to_graph(&g.terms, &g.spacers, g.n_ions)?;
    let edges = graph.edges();
    let active = graph.active_nodes();
    let mut ug = UnGraph::<(), ()>::new_undirected();
    let nodes: Vec<_> = active.iter().map(|_| ug.add_node(())).collect();
    let slot = |s: usize| active.iter().position(|&a| a == s).expect("edge on active node");
    for &(i, j) in &edges {
        ug.add_edge(nodes[slot(i)], nodes[slot(j)], ());
    }
    let isomorphic = petgraph::algo::is_isomorphic(&ug, &grid_graph(rows, cols));
    Ok(SpacerLadder { n_ions: g.n_ions, spacers: g.spacers, terms: g.terms, edges, isomorphic })
}

// ---------------------------------------------------------------------------
// Shared-tone {1, 2} schedule: rates follow products of tone amplitudes

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct AppendixParams {
    pub alpha: f64,
    pub beta: f64,
    /// Requested J₂/J₁.
    pub ratio: f64,
    /// Factor applied to one tone at a time.
    pub scale: f64,
    pub chain: ChainParams,
    pub tol: f64,
}

impl Default for AppendixParams {
    fn default() -> Self {
        AppendixParams { alpha: 20.0, beta: 160.0, ratio: 0.5, scale: 1.5, chain: ChainParams::default(), tol: 1e-9 }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct AppendixRow {
    /// "base", or the scaled tone ("minus", "plus", "three").
    pub variant: String,
    /// Blue amplitudes (Ω₋, Ω₊, Ω₃), rad/s.
    pub amplitudes: [f64; 3],
    /// Rates read off two-site population dynamics, rad/s.
    pub j1: f64,
    pub j2: f64,
    /// Measured rate ratio to the base schedule.
    pub j1_ratio: f64,
    pub j2_ratio: f64,
    /// Ratios predicted by J₁ ∝ Ω₊(Ω₋+Ω₃), J₂ ∝ Ω₋Ω₃.
    pub j1_law: f64,
    pub j2_law: f64,
}

/// |J| of the σ⁺σ⁻ coupling between the two active ions of `chain`, from a
/// sinusoid fit of the transferred population.
pub fn two_site_rate(s: &DriveSchedule, chain: &ChainConfig, guess: f64, tol: f64) -> Result<f64> {
    let sites = chain.active_sites();
    if sites.len() != 2 {
        return Err(Error::Mismatch("two-site rate needs exactly two active ions".into()));
    }
    let span = 1.5 * PI / guess;
    let times: Vec<f64> = (0..=240).map(|i| span * i as f64 / 240.0).collect();
    let tr = integrate(&InitialStateSpec::single(sites[0]), s, chain, &times, &IntegrateOptions::with_tol(tol))?;
    let y: Vec<f64> = tr.records.iter().map(|r| r.p_excited[1]).collect();
    let fit = fit_rabi(&times, &y, 0.5 * guess, 4.0 * guess)?;
    // P = (2J²/W²)(1 − cos Wt) with W² = 4J² + d²
    Ok(fit.frequency * (fit.amplitude / 2.0).sqrt())
}

pub fn appendix_a_equivalence(p: &AppendixParams) -> Result<Vec<AppendixRow>> {
    let chain = p.chain.chain(3)?;
    let r1 = rate_for_beta(chain.gradient, p.beta, true);
    let terms = vec![HoppingTerm::new(1, r1, 0.0), HoppingTerm::new(2, p.ratio * r1, 0.0)];
    let knobs = Knobs { alpha: p.alpha, grid_divisor: 2, ..Knobs::default() };
    let base = reduce_tones(&terms, &chain, &knobs, 1e-9)?;
    let blue: Vec<usize> = (0..base.tones.len()).filter(|&a| base.tones[a].sideband.sign() > 0.0).collect();
    if blue.len() != 3 {
        return Err(Error::ToneSharing(format!("expected three tones per sideband, got {}", blue.len())));
    }
    // tones by position: −, +, 3
    let mut order = blue.clone();
    order.sort_by(|&a, &b| base.tones[a].position.total_cmp(&base.tones[b].position));
    let pos: Vec<f64> = order.iter().map(|&a| base.tones[a].position).collect();
    let variant = |which: Option<usize>| -> DriveSchedule {
        let mut s = base.clone();
        if let Some(w) = which {
            for t in &mut s.tones {
                if t.position == pos[w] {
                    t.amplitude *= p.scale;
                }
            }
        }
        s
    };
    let pair1 = chain.clone().with_spacers(vec![2])?;
    let pair2 = chain.clone().with_spacers(vec![1])?;
    let runs: Vec<(String, Option<usize>)> =
        vec![("base".into(), None), ("minus".into(), Some(0)), ("plus".into(), Some(1)), ("three".into(), Some(2))];
    let measured: Vec<(String, [f64; 3], f64, f64)> = runs
        .into_par_iter()
        .map(|(name, which)| {
            let s = variant(which);
            let amps = [0, 1, 2].map(|w| s.tones[order[w]].amplitude);
            let j1 = two_site_rate(&s, &pair1, r1, p.tol)?;
            let j2 = two_site_rate(&s, &pair2, p.ratio * r1, p.tol)?;
            Ok((name, amps, j1, j2))
        })
        .collect::<Result<_>>()?;
    let (_, a0, j10, j20) = measured[0].clone();
    let law1 = |a: &[f64; 3]| a[1] * (a[0] + a[2]);
    let law2 = |a: &[f64; 3]| a[0] * a[2];
    Ok(measured
        .into_iter()
        .map(|(variant, a, j1, j2)| AppendixRow {
            variant,
            amplitudes: a,
            j1,
            j2,
            j1_ratio: j1 / j10,
            j2_ratio: j2 / j20,
            j1_law: law1(&a) / law1(&a0),
            j2_law: law2(&a) / law2(&a0),
        })
        .collect())
}

// ---------------------------------------------------------------------------
// Scaling with N at fixed (α, β, η₁, Ω₀)

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct ScalingRow {
    pub n: usize,
    pub gradient: f64,
    pub xi: f64,
    /// Closed-form coupling η₁Ω₀/(N√(2αβ)).
    pub coupling: f64,
    /// Ω_{n,b} of the schedule built at that point.
    pub realized: f64,
}

pub fn scaling_law(ns: &[usize], alpha: f64, beta: f64, eta1: f64, omega0: f64, nu: f64) -> Result<Vec<ScalingRow>> {
    ns.iter()
        .map(|&n| {
            let sp = scaling_point(n, alpha, beta, eta1, omega0);
            let chain = ChainConfig::com(n, sp.gradient, nu, eta1, 1)?;
            let knobs = Knobs { xi: Some(vec![sp.xi]), omega0: Some(vec![omega0]), ..Knobs::blue_only() };
            let s = schedule(&[HoppingTerm::new(1, sp.coupling, 0.0)], &chain, &knobs)?;
            let rep = validate(&s, &chain, 0.0);
            Ok(ScalingRow {
                n,
                gradient: sp.gradient,
                xi: sp.xi,
                coupling: sp.coupling,
                realized: rep.predicted_coupling[0],
            })
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn spacer_ladder_matches_grid() {
        let l = spacer_ladder(2, 5).unwrap();
        assert_eq!(l.n_ions, 11);
        assert_eq!(l.spacers, vec![5]);
        assert!(l.isomorphic);
    }

    #[test]
    fn scaling_rows_follow_one_over_n() {
        let rows = scaling_law(&[3, 4, 5], 20.0, 40.0, 0.1, hz_to_rad(1e5), hz_to_rad(2e6)).unwrap();
        let c = rows[0].coupling * 3.0;
        for r in &rows {
            assert!((r.coupling * r.n as f64 - c).abs() <= 1e-12 * c);
            assert!((r.realized - r.coupling).abs() <= 1e-9 * r.coupling);
        }
    }

    #[test]
    fn thinned_times_are_periodic() {
        let t = stroboscopic_times(1e-3, 0.1, 40);
        assert!(t.len() <= 41);
        for x in &t {
            let k = x / 1e-3;
            assert!((k - k.round()).abs() < 1e-9);
        }
    }
}
