//! Multitone drive synthesis.
//!
//! Tone convention: a tone with detuning δ = ω − ω₀, Rabi amplitude Ω and
//! phase θ adds, for every ion k (site energy kΔ, k = physical index + 1) and
//! mode l,
//!
//!   (Ω/2)·iη_{l,k}·σ⁺_k B_l·exp(i(kΔ ± ν_l − δ)t − iθ) + h.c.
//!
//! with B = a† and +ν for blue tones, B = a and −ν for red tones. A blue pair
//! at ν+ξ_b±nΔ/2 with phases ±φ/2 reproduces the single-pair interaction
//! V = iηΩ_b a† cos(nΔt/2+φ/2) Σ σ⁺_k e^{i(kΔ−ξ_b)t} + h.c. and, at second
//! order, the hop Ω_{n,b} e^{iφ} σ⁺_k σ⁻_{k+n} + h.c. with
//! Ω_{n,b} = η²Ω_b²/(4ξ_b) = η²Ω₀²/(2ξ_b), where Ω₀ ≡ Ω_b/√2.

use std::f64::consts::PI;

use serde::{Deserialize, Serialize};

use crate::geometry::{validate_terms, HoppingTerm};
use crate::model::ChainConfig;
use crate::{Error, Result, C64};

pub const DEFAULT_ALPHA: f64 = 20.0;
pub const DEFAULT_BETA: f64 = 40.0;
pub const DEFAULT_MARGIN_RATIO: f64 = 20.0;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Sideband {
    Blue,
    Red,
}

impl Sideband {
    pub fn sign(self) -> f64 {
        match self {
            Sideband::Blue => 1.0,
            Sideband::Red => -1.0,
        }
    }
}

/// How the red pair's phases are assigned.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum RedPhaseRule {
    /// ±φ/2, same as the blue pair: red and blue hops add.
    #[default]
    Matched,
    /// ±(φ+π)/2: with the tone convention above this cancels the hop.
    PiOffset,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Tone {
    /// ω − ω₀ in rad/s.
    pub detuning: f64,
    pub amplitude: f64,
    pub phase: f64,
    pub sideband: Sideband,
    /// Sideband detuning ξ_b (blue) or ξ_r (red), positive.
    pub xi: f64,
    /// Offset in units of the (corrected) gradient from ±(ν+ξ).
    pub position: f64,
    /// Extra detuning implementing a time-dependent phase (δₙ).
    pub split: f64,
    /// Owning term, if the tone is not shared.
    pub term: Option<usize>,
    /// Multiplier of the term's phase program added to `phase`.
    pub program_weight: f64,
}

impl Tone {
    fn place(&mut self, nu: f64, grad: f64) {
        self.detuning = self.sideband.sign() * (nu + self.xi) + self.position * grad + self.split;
    }
}

/// Piecewise-linear φ(t) added to a term's static phase.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct PhaseProgram {
    /// (t, φ) knots with strictly increasing t; φ is held constant outside.
    pub knots: Vec<(f64, f64)>,
}

impl PhaseProgram {
    pub fn value(&self, t: f64) -> f64 {
        let k = &self.knots;
        if k.is_empty() {
            return 0.0;
        }
        if t <= k[0].0 {
            return k[0].1;
        }
        for w in k.windows(2) {
            let ((t0, p0), (t1, p1)) = (w[0], w[1]);
            if t <= t1 {
                return p0 + (p1 - p0) * (t - t0) / (t1 - t0);
            }
        }
        k[k.len() - 1].1
    }

    pub fn max_slope(&self) -> f64 {
        self.knots.windows(2).map(|w| ((w[1].1 - w[0].1) / (w[1].0 - w[0].0)).abs()).fold(0.0, f64::max)
    }

    /// Knots increasing and every slope at most Δ/20.
    pub fn validate(&self, gradient: f64) -> Result<()> {
        if self.knots.windows(2).any(|w| !(w[1].0 > w[0].0)) {
            return Err(Error::Schedule("phase program knots must have increasing times".into()));
        }
        let s = self.max_slope();
        if s > gradient / 20.0 {
            return Err(Error::Schedule(format!(
                "phase program slope {s:.3e} rad/s exceeds Δ/20 = {:.3e} rad/s",
                gradient / 20.0
            )));
        }
        Ok(())
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TermDrive {
    pub n: usize,
    /// Target combined hop rate Ωₙ (rad/s).
    pub rate: f64,
    pub phi: f64,
    pub delta: f64,
    pub xi: f64,
    pub xi_b: f64,
    pub xi_r: f64,
    pub epsilon: f64,
    /// Blue tone amplitude Ω_b.
    pub omega_b: f64,
    /// Red tone amplitude Ω_r (0 without red pair).
    pub omega_r: f64,
    #[serde(default)]
    pub program: Option<PhaseProgram>,
}

impl TermDrive {
    /// Pair amplitude Ω₀ = Ω_b/√2.
    pub fn omega0(&self) -> f64 {
        self.omega_b / 2f64.sqrt()
    }
}

/// A tone pair whose two-photon hop is wanted: `absorbed` raises site k+range,
/// `emitted` lowers site k.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct IntendedPair {
    pub absorbed: usize,
    pub emitted: usize,
    pub range: usize,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct DriveSchedule {
    /// Nominal Δ (rad/s).
    pub gradient: f64,
    /// Reference mode frequency ν (rad/s).
    pub nu: f64,
    /// Lamb-Dicke factor used for rate solving.
    pub eta: f64,
    pub terms: Vec<TermDrive>,
    pub tones: Vec<Tone>,
    pub intended: Vec<IntendedPair>,
    /// Stark-gradient correction g: tones are laid out on Δ+2g.
    pub correction: f64,
    pub red: bool,
    pub red_rule: RedPhaseRule,
    /// Tones shared between terms (resource-efficient layout).
    pub shared: bool,
}

impl DriveSchedule {
    pub fn effective_gradient(&self) -> f64 {
        self.gradient + 2.0 * self.correction
    }

    pub fn max_rate(&self) -> f64 {
        self.terms.iter().map(|t| t.rate).fold(0.0, f64::max)
    }

    /// Instantaneous phase of tone `a` including its term's phase program.
    pub fn tone_phase(&self, a: usize, t: f64) -> f64 {
        let tone = &self.tones[a];
        match tone.term.and_then(|j| self.terms[j].program.as_ref()) {
            Some(p) if tone.program_weight != 0.0 => tone.phase + tone.program_weight * p.value(t),
            _ => tone.phase,
        }
    }

    pub fn has_programs(&self) -> bool {
        self.terms.iter().any(|t| t.program.is_some())
    }

    /// Hopping terms this schedule aims to realize.
    pub fn target_terms(&self) -> Vec<HoppingTerm> {
        self.terms.iter().map(|t| HoppingTerm { n: t.n, omega: t.rate, phi: t.phi, delta: t.delta }).collect()
    }

    /// Same schedule with every amplitude scaled by `s`.
    pub fn scaled(&self, s: f64) -> DriveSchedule {
        let mut out = self.clone();
        for t in &mut out.tones {
            t.amplitude *= s;
        }
        for t in &mut out.terms {
            t.omega_b *= s;
            t.omega_r *= s;
            t.rate *= s * s;
        }
        out
    }

    fn relayout(&mut self) {
        let g = self.effective_gradient();
        let nu = self.nu;
        for t in &mut self.tones {
            t.place(nu, g);
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Knobs {
    /// ξ of the first term is α·N·Δ when `xi` is not given.
    pub alpha: f64,
    pub xi: Option<Vec<f64>>,
    /// None selects ε automatically.
    pub epsilon: Option<f64>,
    /// Explicit pair amplitudes Ω₀ per term; overrides the requested rates.
    pub omega0: Option<Vec<f64>>,
    pub red: bool,
    pub red_rule: RedPhaseRule,
    pub gradient_correction: bool,
    /// Ω₀ ≤ cap·ν.
    pub amplitude_cap: f64,
    pub margin_ratio: f64,
    /// Automatic ξ and ε are snapped to Δ/grid_divisor.
    pub grid_divisor: u32,
    pub period_bound: u64,
}

impl Default for Knobs {
    fn default() -> Self {
        Knobs {
            alpha: DEFAULT_ALPHA,
            xi: None,
            epsilon: None,
            omega0: None,
            red: true,
            red_rule: RedPhaseRule::Matched,
            gradient_correction: true,
            amplitude_cap: 0.1,
            margin_ratio: DEFAULT_MARGIN_RATIO,
            grid_divisor: 4,
            period_bound: 10_000,
        }
    }
}

impl Knobs {
    /// Bare blue pairs, no correction: the plain single-pair interaction.
    pub fn blue_only() -> Self {
        Knobs { red: false, gradient_correction: false, epsilon: Some(0.0), ..Knobs::default() }
    }
}

/// Combined rate giving β = Δ/Ω_{n,b} (Ω_{n,b} is the per-sideband rate).
pub fn rate_for_beta(gradient: f64, beta: f64, red: bool) -> f64 {
    let per_pair = gradient / beta;
    if red {
        2.0 * per_pair
    } else {
        per_pair
    }
}

/// Lamb-Dicke factor used for rate solving: the RMS of the reference mode row
/// over the active ions (η₁/√N for the COM mode).
pub fn drive_eta(chain: &ChainConfig) -> f64 {
    let act = chain.active_sites();
    let row = &chain.modes[0].lamb_dicke;
    (act.iter().map(|&k| row[k] * row[k]).sum::<f64>() / act.len() as f64).sqrt()
}

/// Red/blue amplitude-squared ratio cancelling the homogeneous σᶻ(a†a+½) part
/// of a pair with half-splitting y.
pub fn red_ratio(xi_b: f64, xi_r: f64, y: f64) -> f64 {
    (xi_b / xi_r) * (xi_r * xi_r - y * y) / (xi_b * xi_b - y * y)
}

fn snap(x: f64, grid: f64) -> f64 {
    (x / grid).round() * grid
}

fn snap_up(x: f64, grid: f64) -> f64 {
    (x / grid - 1e-9).ceil() * grid
}

pub fn schedule(terms: &[HoppingTerm], chain: &ChainConfig, knobs: &Knobs) -> Result<DriveSchedule> {
    chain.validate()?;
    validate_terms(terms, chain.n_ions)?;
    if terms.is_empty() {
        return Err(Error::Schedule("no hopping terms".into()));
    }
    let nt = terms.len();
    let delta = chain.gradient;
    let nu = chain.modes[0].frequency;
    let eta = drive_eta(chain);
    if eta <= 0.0 {
        return Err(Error::Schedule("reference mode has zero Lamb-Dicke coupling".into()));
    }
    if let Some(x) = &knobs.xi {
        if x.len() != nt || x.iter().any(|v| !(*v > 0.0)) {
            return Err(Error::Schedule("need one positive ξ per term".into()));
        }
    }
    if let Some(o) = &knobs.omega0 {
        if o.len() != nt || o.iter().any(|v| !(*v >= 0.0)) {
            return Err(Error::Schedule("need one non-negative Ω₀ per term".into()));
        }
    }
    let grid = delta / knobs.grid_divisor.max(1) as f64;
    let max_rate = terms.iter().map(|t| t.omega).fold(0.0, f64::max);

    // ε lower bound: 20·η²Ω_rΩ_b/ξ ≈ 20·4Ω_{n,b}, and 5Ωₙ.
    let eps_min = if knobs.red { (40.0 * max_rate).max(5.0 * max_rate) } else { 0.0 };
    if let Some(e) = knobs.epsilon {
        if knobs.red && !(e > 0.0) {
            return Err(Error::Schedule("ε must be positive with the red pair".into()));
        }
        if knobs.red && e < eps_min * (1.0 - 1e-12) {
            return Err(Error::Schedule(format!(
                "ε = {e:.4e} rad/s below the pair-creation margin {eps_min:.4e} rad/s"
            )));
        }
    }

    let draft = |xis: &[f64], eps: f64| -> DriveSchedule {
        let mut s = DriveSchedule {
            gradient: delta,
            nu,
            eta,
            terms: Vec::new(),
            tones: Vec::new(),
            intended: Vec::new(),
            correction: 0.0,
            red: knobs.red,
            red_rule: knobs.red_rule,
            shared: false,
        };
        for (j, t) in terms.iter().enumerate() {
            let e = if knobs.red { eps } else { 0.0 };
            push_term(&mut s, j, t, xis[j], e, 1.0, 1.0);
        }
        s.relayout();
        s
    };

    let (xis, eps) = match (&knobs.xi, knobs.epsilon) {
        (Some(x), Some(e)) => (x.clone(), if knobs.red { e } else { 0.0 }),
        _ => {
            let xi0 = snap(knobs.alpha * chain.n_ions as f64 * delta, grid);
            let eps_cands: Vec<f64> = match knobs.epsilon {
                Some(e) => vec![e],
                None if knobs.red => {
                    let lo = snap_up(eps_min.max(grid), grid);
                    let span = (2 * chain.n_ions + terms.iter().map(|t| t.n).max().unwrap_or(1) + 4) as f64 * delta;
                    (0..).map(|i| lo + i as f64 * grid).take_while(|e| *e <= lo + span).collect()
                }
                None => vec![0.0],
            };
            let mut best: Option<(f64, Vec<f64>, f64)> = None;
            for &e in &eps_cands {
                let xis = match &knobs.xi {
                    Some(x) => x.clone(),
                    None => place_terms(terms, chain, xi0, e, grid, &draft),
                };
                let score = census_score(&draft(&xis, e), chain);
                if best.as_ref().is_none_or(|b| score > b.0 + 1e-9 * delta) {
                    best = Some((score, xis, e));
                }
                if score >= delta * (1.0 - 1e-9) {
                    break;
                }
            }
            let (_, x, e) = best.expect("at least one candidate");
            (x, e)
        }
    };

    let mut s = draft(&xis, eps);
    // amplitudes
    let cap = knobs.amplitude_cap * nu;
    for j in 0..nt {
        let td = &s.terms[j];
        let y = td.n as f64 * delta / 2.0;
        let kappa = if knobs.red { red_ratio(td.xi_b, td.xi_r, y) } else { 0.0 };
        let inv = 1.0 / td.xi_b + if knobs.red { kappa / td.xi_r } else { 0.0 };
        let ob = match &knobs.omega0 {
            Some(o) => 2f64.sqrt() * o[j],
            None => (4.0 * terms[j].omega / (eta * eta * inv)).sqrt(),
        };
        let or = kappa.sqrt() * ob;
        let rate = eta * eta * ob * ob * inv / 4.0;
        for a in [ob, or] {
            if a / 2f64.sqrt() > cap {
                return Err(Error::AmplitudeCap { n: td.n, required: a / 2f64.sqrt(), cap });
            }
        }
        let td = &mut s.terms[j];
        td.omega_b = ob;
        td.omega_r = or;
        td.rate = rate;
    }
    for tone in &mut s.tones {
        let td = &s.terms[tone.term.expect("four-tone tones are owned")];
        tone.amplitude = match tone.sideband {
            Sideband::Blue => td.omega_b,
            Sideband::Red => td.omega_r,
        };
    }
    if knobs.gradient_correction {
        s = apply_gradient_correction(&s, chain)?;
    }
    Ok(s)
}

fn push_term(s: &mut DriveSchedule, j: usize, t: &HoppingTerm, xi: f64, eps: f64, ab: f64, ar: f64) {
    let (xi_b, xi_r) = (xi + eps, xi - eps);
    s.terms.push(TermDrive {
        n: t.n,
        rate: t.omega,
        phi: t.phi,
        delta: t.delta,
        xi,
        xi_b,
        xi_r,
        epsilon: eps,
        omega_b: ab,
        omega_r: if s.red { ar } else { 0.0 },
        program: None,
    });
    let half = t.n as f64 / 2.0;
    let red_off = match s.red_rule {
        RedPhaseRule::Matched => 0.0,
        RedPhaseRule::PiOffset => PI,
    };
    let mut sb = vec![(Sideband::Blue, xi_b, 0.0, ab)];
    if s.red {
        sb.push((Sideband::Red, xi_r, red_off, ar));
    }
    for (side, x, off, amp) in sb {
        let base = s.tones.len();
        for sgn in [1.0, -1.0] {
            s.tones.push(Tone {
                detuning: 0.0,
                amplitude: amp,
                phase: sgn * (t.phi + off) / 2.0,
                sideband: side,
                xi: x,
                position: sgn * half,
                // e^{i(φ−δt)} on σ⁺_iσ⁻_{i+n}
                split: -sgn * t.delta / 2.0,
                term: Some(j),
                program_weight: sgn / 2.0,
            });
        }
        s.intended.push(IntendedPair { absorbed: base, emitted: base + 1, range: t.n });
    }
}

/// Greedy ξ placement: each further term sits above the previous one by the
/// smallest separation on the grid that keeps the census margin maximal.
fn place_terms(
    terms: &[HoppingTerm],
    chain: &ChainConfig,
    xi0: f64,
    eps: f64,
    grid: f64,
    draft: &dyn Fn(&[f64], f64) -> DriveSchedule,
) -> Vec<f64> {
    let delta = chain.gradient;
    let n = chain.n_ions as f64;
    let mut xis = vec![xi0];
    for j in 1..terms.len() {
        let nn = (terms[j].n + terms[j - 1].n) as f64 / 2.0;
        let lo = snap_up((2.0 * n + nn + 1.0) * delta, grid);
        let mut best: Option<(f64, f64)> = None;
        for i in 0..(8 * chain.n_ions) {
            let x = xis[j - 1] + lo + i as f64 * grid;
            let mut trial = xis.clone();
            trial.push(x);
            // score against the terms placed so far
            let score = census_score(&draft_prefix(draft, &trial, eps, terms.len()), chain);
            if best.is_none_or(|b| score > b.0 + 1e-9 * delta) {
                best = Some((score, x));
            }
            if score >= delta * (1.0 - 1e-9) {
                break;
            }
        }
        xis.push(best.expect("candidates").1);
    }
    xis
}

/// Draft with only the first `trial.len()` terms populated (remaining terms are
/// parked far away so they do not influence the census).
fn draft_prefix(draft: &dyn Fn(&[f64], f64) -> DriveSchedule, trial: &[f64], eps: f64, nt: usize) -> DriveSchedule {
    let mut x = trial.to_vec();
    let far = trial.iter().fold(0.0, |a: f64, b| a.max(*b)) * 1e3;
    while x.len() < nt {
        x.push(far * (x.len() + 1) as f64);
    }
    let mut s = draft(&x, eps);
    let keep = trial.len();
    let kept: Vec<usize> = (0..s.tones.len()).filter(|&a| s.tones[a].term.is_some_and(|j| j < keep)).collect();
    let remap = |a: usize| kept.iter().position(|&k| k == a);
    s.intended = s
        .intended
        .iter()
        .filter_map(|p| Some(IntendedPair { absorbed: remap(p.absorbed)?, emitted: remap(p.emitted)?, range: p.range }))
        .collect();
    s.tones = kept.iter().map(|&a| s.tones[a].clone()).collect();
    s
}

/// Smallest unintended two-photon mismatch, capped at Δ (larger margins are
/// not worth trading for bigger detunings).
fn census_score(s: &DriveSchedule, chain: &ChainConfig) -> f64 {
    census(s, chain).iter().filter(|p| !p.intended).map(|p| p.mismatch.abs()).fold(chain.gradient, f64::min)
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ProcessKind {
    Hop,
    PairCreation,
}

/// A two-photon process of the drive: tone `a` at site `i` combined with tone
/// `b` at site `j` (physical indices).
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct Process {
    pub kind: ProcessKind,
    pub a: usize,
    pub b: usize,
    pub i: usize,
    pub j: usize,
    /// Detuning from exact two-photon resonance (rad/s).
    pub mismatch: f64,
    /// Order-of-magnitude coupling η²Ω_aΩ_b/(4ξ) (rad/s).
    pub coupling: f64,
    pub intended: bool,
}

/// Brute-force enumeration of all hop (same sideband, σ⁺ᵢσ⁻ⱼ) and pair
/// creation (blue+red, σ⁺ᵢσ⁺ⱼ) processes between distinct active ions.
pub fn census(s: &DriveSchedule, chain: &ChainConfig) -> Vec<Process> {
    let grad = s.effective_gradient();
    let act = chain.active_sites();
    let mut out = Vec::new();
    let eta = s.eta;
    let coupling = |a: &Tone, b: &Tone| eta * eta * a.amplitude * b.amplitude / (4.0 * 0.5 * (a.xi + b.xi));
    for (ia, ta) in s.tones.iter().enumerate() {
        for (ib, tb) in s.tones.iter().enumerate() {
            if ta.sideband == tb.sideband {
                // a absorbed at i, b emitted at j
                for &i in &act {
                    for &j in &act {
                        if i == j {
                            continue;
                        }
                        let mismatch = (ta.detuning - tb.detuning) - (i as f64 - j as f64) * grad;
                        // either orientation of an intended pair (σ⁺σ⁻ and its conjugate)
                        let intended = s.intended.iter().any(|p| {
                            (p.absorbed == ia && p.emitted == ib && i > j && p.range == i - j)
                                || (p.absorbed == ib && p.emitted == ia && j > i && p.range == j - i)
                        });
                        out.push(Process {
                            kind: ProcessKind::Hop,
                            a: ia,
                            b: ib,
                            i,
                            j,
                            mismatch,
                            coupling: coupling(ta, tb),
                            intended,
                        });
                    }
                }
            } else if ta.sideband == Sideband::Blue {
                for &i in &act {
                    for &j in &act {
                        if i == j {
                            continue;
                        }
                        let ki = i as f64 + 1.0;
                        let kj = j as f64 + 1.0;
                        let mismatch = (ta.detuning + tb.detuning) - (ki + kj) * grad;
                        out.push(Process {
                            kind: ProcessKind::PairCreation,
                            a: ia,
                            b: ib,
                            i,
                            j,
                            mismatch,
                            coupling: coupling(ta, tb),
                            intended: false,
                        });
                    }
                }
            }
        }
    }
    out
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct CrossMargin {
    pub term_a: usize,
    pub term_b: usize,
    /// m at which min_m ||ξ′−ξ| − mΔ| is attained.
    pub m: usize,
    /// That minimum divided by max(Ωₙ, Ωₙ′).
    pub ratio: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct AdiabaticityReport {
    /// ξ/(ΔN) per term.
    pub alpha: Vec<f64>,
    /// Δ/Ω_{n,b} per term.
    pub beta: Vec<f64>,
    /// Ω_{n,b} = η²Ω₀²/(2ξ_b) per term.
    pub predicted_coupling: Vec<f64>,
    pub cross_margins: Vec<CrossMargin>,
    /// 2ε/(η²Ω_rΩ_b/ξ) per term; None without a red pair.
    pub pair_creation: Vec<Option<f64>>,
    /// Smallest |mismatch|/coupling over every unintended two-photon process.
    pub census_ratio: f64,
    pub census_worst: Option<Process>,
    pub flags: Vec<String>,
}

impl AdiabaticityReport {
    pub fn ok(&self) -> bool {
        self.flags.is_empty()
    }
}

pub fn validate(s: &DriveSchedule, chain: &ChainConfig, margin_ratio: f64) -> AdiabaticityReport {
    let delta = s.gradient;
    let n = chain.n_ions;
    let eta2 = s.eta * s.eta;
    let mut flags = Vec::new();
    let alpha: Vec<f64> = s.terms.iter().map(|t| t.xi / (delta * n as f64)).collect();
    let pc: Vec<f64> = s.terms.iter().map(|t| eta2 * t.omega0().powi(2) / (2.0 * t.xi_b)).collect();
    let beta: Vec<f64> = pc.iter().map(|c| delta / c).collect();
    for (j, (&a, &b)) in alpha.iter().zip(&beta).enumerate() {
        if a < 2.0 {
            flags.push(format!("term {j}: alpha = {a:.3} < 2"));
        }
        if b < 10.0 {
            flags.push(format!("term {j}: beta = {b:.3} < 10"));
        }
    }
    let mut cross = Vec::new();
    for a in 0..s.terms.len() {
        for b in a + 1..s.terms.len() {
            let d = (s.terms[a].xi - s.terms[b].xi).abs();
            let (m, gap) =
                (0..n).map(|m| (m, (d - m as f64 * delta).abs())).min_by(|x, y| x.1.total_cmp(&y.1)).expect("n >= 2");
            let ratio = gap / s.terms[a].rate.max(s.terms[b].rate);
            if !(ratio >= margin_ratio) {
                flags.push(format!("terms {a},{b}: cross-resonance margin {ratio:.3} at m={m}"));
            }
            cross.push(CrossMargin { term_a: a, term_b: b, m, ratio });
        }
    }
    let pair: Vec<Option<f64>> = s
        .terms
        .iter()
        .enumerate()
        .map(|(j, t)| {
            if !s.red || t.omega_r == 0.0 {
                return None;
            }
            let r = 2.0 * t.epsilon / (eta2 * t.omega_r * t.omega_b / t.xi);
            if r < margin_ratio {
                flags.push(format!("term {j}: pair-creation margin {r:.3}"));
            }
            Some(r)
        })
        .collect();
    let mut worst: Option<Process> = None;
    let mut census_ratio = f64::INFINITY;
    for p in census(s, chain).into_iter().filter(|p| !p.intended && p.coupling > 0.0) {
        let r = p.mismatch.abs() / p.coupling;
        if r < census_ratio {
            census_ratio = r;
            worst = Some(p);
        }
    }
    if census_ratio < margin_ratio {
        if let Some(p) = &worst {
            flags.push(format!(
                "unintended {:?} tones ({},{}) ions ({},{}) detuned by only {:.3}x its coupling",
                p.kind, p.a, p.b, p.i, p.j, census_ratio
            ));
        }
    }
    AdiabaticityReport {
        alpha,
        beta,
        predicted_coupling: pc,
        cross_margins: cross,
        pair_creation: pair,
        census_ratio,
        census_worst: worst,
        flags,
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct Period {
    /// T in seconds (rad/s inputs).
    pub t: f64,
    pub m: u64,
    /// Tξ_b/2π of the first term.
    pub m_b: u64,
}

/// Smallest T with TΔ = 4πm and Tξ/2π integer for every ξ_b, ξ_r in use.
/// Time-dependent splittings and the Stark correction are not part of the
/// condition (they make the drive aperiodic by design).
pub fn stroboscopic_period(s: &DriveSchedule, bound: u64) -> Result<Period> {
    let delta = s.gradient;
    let mut xs: Vec<f64> = s.tones.iter().map(|t| t.xi).collect();
    xs.dedup();
    let tol = 1e-9;
    let mut nearest = (u64::MAX, f64::INFINITY);
    for m in 1..=bound {
        let mut worst: f64 = 0.0;
        for &x in &xs {
            let v = 2.0 * m as f64 * x / delta;
            worst = worst.max((v - v.round()).abs());
        }
        // positions must sit on the half-integer lattice
        for t in &s.tones {
            let v = 2.0 * m as f64 * t.position;
            worst = worst.max((v - v.round()).abs());
        }
        if worst <= tol * (2.0 * m as f64 * xs.iter().fold(1.0, |a: f64, b| a.max(b / delta))) {
            let t = 4.0 * PI * m as f64 / delta;
            let m_b = (2.0 * m as f64 * s.terms[0].xi_b / delta).round() as u64;
            return Ok(Period { t, m, m_b });
        }
        if worst < nearest.1 {
            nearest = (m, worst);
        }
    }
    Err(Error::Incommensurate {
        bound,
        nearest_period: 4.0 * PI * nearest.0 as f64 / delta,
        m: nearest.0,
        residual: nearest.1,
    })
}

/// A second-order hop: coef·e^{i·freq·t} σ⁺_to σ⁻_from (physical ion indices).
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct HopCoupling {
    pub to: usize,
    pub from: usize,
    pub coef: C64,
    pub freq: f64,
}

/// Time-averaged second-order Hamiltonian of the drive (the James rule), with
/// tone pairs closer than `window` to resonance kept.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SecondOrder {
    /// Physical indices of the active ions (row order of `stark`).
    pub sites: Vec<usize>,
    pub hops: Vec<HopCoupling>,
    /// Coefficient of σᶻ_k(a†_l a_l + ½), indexed [active slot][mode].
    pub stark: Vec<Vec<f64>>,
}

impl SecondOrder {
    /// Coefficients z_k of σᶻ_k in the phonon ground state.
    pub fn ground_stark(&self) -> Vec<f64> {
        self.stark.iter().map(|r| 0.5 * r.iter().sum::<f64>()).collect()
    }

    /// Coefficient of σ⁺_to σ⁻_from summed over the kept (near-resonant) pairs.
    pub fn hop(&self, to: usize, from: usize) -> C64 {
        self.hops.iter().filter(|h| h.to == to && h.from == from).map(|h| h.coef).sum()
    }
}

pub fn second_order(s: &DriveSchedule, chain: &ChainConfig, window: f64) -> SecondOrder {
    let sites = chain.active_sites();
    let grad = s.gradient;
    let nm = chain.modes.len();
    let mut stark = vec![vec![0.0; nm]; sites.len()];
    // d_a(k, l) = δ_a − kΔ − s_a ν_l
    let d = |t: &Tone, k: usize, l: usize| {
        t.detuning - (k as f64 + 1.0) * grad - t.sideband.sign() * chain.modes[l].frequency
    };
    for (si, &k) in sites.iter().enumerate() {
        for l in 0..nm {
            let eta = chain.modes[l].lamb_dicke[k];
            for t in &s.tones {
                stark[si][l] -= t.amplitude * t.amplitude * eta * eta / (4.0 * d(t, k, l));
            }
        }
    }
    let mut hops: Vec<HopCoupling> = Vec::new();
    for ta in &s.tones {
        for tb in &s.tones {
            if ta.sideband != tb.sideband {
                continue;
            }
            for &i in &sites {
                for &j in &sites {
                    if i == j {
                        continue;
                    }
                    for l in 0..nm {
                        let (da, db) = (d(ta, i, l), d(tb, j, l));
                        let freq = da - db;
                        if freq.abs() > window {
                            continue;
                        }
                        let row = &chain.modes[l].lamb_dicke;
                        let mag = ta.sideband.sign() * ta.amplitude * tb.amplitude * row[i] * row[j] / 8.0
                            * (1.0 / da + 1.0 / db);
                        let coef = C64::from_polar(mag, ta.phase - tb.phase);
                        let freq = if freq.abs() < 1e-9 * grad { 0.0 } else { freq };
                        match hops.iter_mut().find(|h| h.to == j && h.from == i && h.freq == freq) {
                            Some(h) => h.coef += coef,
                            None => hops.push(HopCoupling { to: j, from: i, coef, freq }),
                        }
                    }
                }
            }
        }
    }
    SecondOrder { sites, hops, stark }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct GradientCorrection {
    /// g: least-squares slope of the ground-state σᶻ_k coefficient per site.
    pub slope: f64,
}

/// Per-site slope of the ground-state Stark shift, absorbed into Δ → Δ+2g.
pub fn gradient_correction(s: &DriveSchedule, chain: &ChainConfig) -> GradientCorrection {
    let so = second_order(s, chain, 0.0);
    let z = so.ground_stark();
    let k: Vec<f64> = so.sites.iter().map(|&x| x as f64).collect();
    if k.len() < 2 {
        return GradientCorrection { slope: 0.0 };
    }
    let km = k.iter().sum::<f64>() / k.len() as f64;
    let zm = z.iter().sum::<f64>() / z.len() as f64;
    let num: f64 = k.iter().zip(&z).map(|(a, b)| (a - km) * (b - zm)).sum();
    let den: f64 = k.iter().map(|a| (a - km) * (a - km)).sum();
    GradientCorrection { slope: num / den }
}

/// Per-tone frequency offsets implied by the correction g.
pub fn correction_offsets(s: &DriveSchedule, g: f64) -> Vec<f64> {
    s.tones.iter().map(|t| 2.0 * g * t.position).collect()
}

/// Lay the tones out on Δ+2g with g from [`gradient_correction`] evaluated on
/// the uncorrected layout.
pub fn apply_gradient_correction(s: &DriveSchedule, chain: &ChainConfig) -> Result<DriveSchedule> {
    let mut base = s.clone();
    base.correction = 0.0;
    base.relayout();
    let g = gradient_correction(&base, chain).slope;
    base.correction = g;
    base.relayout();
    Ok(base)
}

/// Attach a piecewise-linear phase program to term `j`.
pub fn with_phase_program(s: &DriveSchedule, j: usize, program: PhaseProgram) -> Result<DriveSchedule> {
    program.validate(s.gradient)?;
    if s.shared {
        return Err(Error::Schedule("phase programs need per-term tones".into()));
    }
    let mut out = s.clone();
    out.terms.get_mut(j).ok_or_else(|| Error::Schedule(format!("no term {j}")))?.program = Some(program);
    Ok(out)
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct RealizedRate {
    pub n: usize,
    /// Mean |J| over the bonds of range n.
    pub mean: f64,
    pub min: f64,
    pub max: f64,
    /// Phase φ of the mean bond in the e^{iφ}σ⁺_iσ⁻_{i+n} convention.
    pub phi: f64,
}

/// Hop rates per range from the second-order couplings within Δ/4 of
/// resonance (the Stark correction detunes intended pairs by 2ng).
pub fn realized_rates(s: &DriveSchedule, chain: &ChainConfig) -> Vec<RealizedRate> {
    let so = second_order(s, chain, 0.25 * s.gradient);
    let mut out = Vec::new();
    for n in 1..chain.n_ions {
        let bonds: Vec<C64> = so
            .sites
            .iter()
            .filter(|&&i| so.sites.contains(&(i + n)))
            .map(|&i| so.hop(i, i + n))
            .filter(|c| c.norm() > 0.0)
            .collect();
        if bonds.is_empty() {
            continue;
        }
        let mean_c: C64 = bonds.iter().sum::<C64>() / bonds.len() as f64;
        let mags: Vec<f64> = bonds.iter().map(|c| c.norm()).collect();
        out.push(RealizedRate {
            n,
            mean: mags.iter().sum::<f64>() / mags.len() as f64,
            min: mags.iter().cloned().fold(f64::INFINITY, f64::min),
            max: mags.iter().cloned().fold(0.0, f64::max),
            phi: mean_c.arg(),
        });
    }
    out
}

/// Closed-form scaling point at fixed (α, β) and fixed field Ω₀ on the COM
/// mode: Δ = βΩ_eff, ξ = αNΔ and Ω_eff = η₁Ω₀/(N√(2αβ)).
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct ScalingPoint {
    pub n: usize,
    pub eta: f64,
    pub gradient: f64,
    pub xi: f64,
    pub coupling: f64,
}

pub fn scaling_point(n: usize, alpha: f64, beta: f64, eta1: f64, omega0: f64) -> ScalingPoint {
    let eta = eta1 / (n as f64).sqrt();
    let coupling = eta * omega0 / (2.0 * alpha * beta * n as f64).sqrt();
    let gradient = beta * coupling;
    ScalingPoint { n, eta, gradient, xi: alpha * n as f64 * gradient, coupling }
}

// ---------------------------------------------------------------------------
// Shared tones

/// Tone ladder found by [`reduce_tones`]: offsets in units of Δ.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ToneLadder {
    pub offsets: Vec<i64>,
    /// Ranges realized (difference set restricted to 1..N−1).
    pub ranges: Vec<usize>,
}

/// Ranges n < N induced by a ladder of tone offsets (units of Δ).
pub fn induced_ranges(offsets: &[i64], n_ions: usize) -> Vec<usize> {
    let mut r: Vec<usize> = Vec::new();
    for (a, &x) in offsets.iter().enumerate() {
        for &y in &offsets[a + 1..] {
            let d = (x - y).unsigned_abs() as usize;
            if d >= 1 && d < n_ions && !r.contains(&d) {
                r.push(d);
            }
        }
    }
    r.sort_unstable();
    r
}

/// Fewest tones (per sideband) whose pairwise differences realize exactly the
/// wanted ranges.
pub fn find_ladder(ranges: &[usize], n_ions: usize, max_tones: usize) -> Result<ToneLadder> {
    let mut want: Vec<usize> = ranges.to_vec();
    want.sort_unstable();
    want.dedup();
    let span = 2 * n_ions as i64;
    for count in 2..=max_tones {
        let mut best: Option<Vec<i64>> = None;
        let mut cur = vec![0i64];
        search_ladder(&mut cur, count, span, &want, n_ions, &mut best);
        if let Some(offsets) = best {
            return Ok(ToneLadder { ranges: induced_ranges(&offsets, n_ions), offsets });
        }
    }
    Err(Error::ToneSharing(format!("no ladder of at most {max_tones} tones realizes exactly {want:?}")))
}

fn search_ladder(cur: &mut Vec<i64>, count: usize, span: i64, want: &[usize], n: usize, best: &mut Option<Vec<i64>>) {
    if cur.len() == count {
        if induced_ranges(cur, n) == want {
            let better = best.as_ref().is_none_or(|b| cur.last() < b.last());
            if better {
                *best = Some(cur.clone());
            }
        }
        return;
    }
    let last = *cur.last().expect("non-empty");
    for next in last + 1..=span {
        // prune: an unwanted range below N appearing already can never vanish
        cur.push(next);
        let ok = induced_ranges(cur, n).iter().all(|r| want.contains(r));
        if ok {
            search_ladder(cur, count, span, want, n, best);
        }
        cur.pop();
    }
}

/// Resource-efficient schedule: one shared tone ladder per sideband whose
/// pairwise differences realize the wanted ranges. Amplitudes and phases are
/// solved so the second-order rates match the request.
pub fn reduce_tones(terms: &[HoppingTerm], chain: &ChainConfig, knobs: &Knobs, tol: f64) -> Result<DriveSchedule> {
    chain.validate()?;
    validate_terms(terms, chain.n_ions)?;
    if terms.iter().any(|t| t.delta != 0.0) {
        return Err(Error::ToneSharing("time-dependent phases need per-term tones".into()));
    }
    let ranges: Vec<usize> = terms.iter().map(|t| t.n).collect();
    let ladder = find_ladder(&ranges, chain.n_ions, 5)?;
    let delta = chain.gradient;
    let nu = chain.modes[0].frequency;
    let eta = drive_eta(chain);
    let grid = delta / knobs.grid_divisor.max(1) as f64;
    let k = ladder.offsets.len();
    let center = *ladder.offsets.last().expect("two tones at least") as f64 / 2.0;
    let pos: Vec<f64> = ladder.offsets.iter().map(|&o| o as f64 - center).collect();

    // pairs per wanted range: (absorbed = higher tone, emitted = lower tone)
    let mut pairs: Vec<(usize, usize, usize)> = Vec::new();
    for a in 0..k {
        for b in 0..k {
            let d = ladder.offsets[a] - ladder.offsets[b];
            if d > 0 && (d as usize) < chain.n_ions {
                pairs.push((a, b, d as usize));
            }
        }
    }

    // phases: θ_hi − θ_lo = φₙ for every pair, solved along a spanning tree
    let mut theta: Vec<Option<f64>> = vec![None; k];
    theta[0] = Some(0.0);
    let phi_of = |n: usize| terms.iter().find(|t| t.n == n).expect("wanted").phi;
    for _ in 0..k {
        for &(a, b, n) in &pairs {
            match (theta[a], theta[b]) {
                (None, Some(tb)) => theta[a] = Some(tb + phi_of(n)),
                (Some(ta), None) => theta[b] = Some(ta - phi_of(n)),
                _ => {}
            }
        }
    }
    let theta: Vec<f64> = theta.into_iter().map(|t| t.unwrap_or(0.0)).collect();
    let phase_res = pairs
        .iter()
        .map(|&(a, b, n)| crate::units::wrap_angle(theta[a] - theta[b] - phi_of(n)).abs())
        .fold(0.0, f64::max);
    if phase_res > tol.max(1e-9) {
        return Err(Error::ToneSharing(format!(
            "phases overdetermined: pair constraints leave a residual of {phase_res:.3e} rad"
        )));
    }

    let xi = match &knobs.xi {
        Some(x) => x[0],
        None => snap(knobs.alpha * chain.n_ions as f64 * delta, grid),
    };
    let max_rate = terms.iter().map(|t| t.omega).fold(0.0, f64::max);
    let build = |eps: f64, amps: &[f64], kappa: f64| -> DriveSchedule {
        let mut s = DriveSchedule {
            gradient: delta,
            nu,
            eta,
            terms: terms
                .iter()
                .map(|t| TermDrive {
                    n: t.n,
                    rate: t.omega,
                    phi: t.phi,
                    delta: 0.0,
                    xi,
                    xi_b: xi + eps,
                    xi_r: xi - eps,
                    epsilon: eps,
                    omega_b: 0.0,
                    omega_r: 0.0,
                    program: None,
                })
                .collect(),
            tones: Vec::new(),
            intended: Vec::new(),
            correction: 0.0,
            red: knobs.red,
            red_rule: RedPhaseRule::Matched,
            shared: true,
        };
        let mut sides = vec![(Sideband::Blue, xi + eps, 1.0)];
        if knobs.red {
            sides.push((Sideband::Red, xi - eps, kappa.sqrt()));
        }
        for (side, x, scale) in sides {
            let base = s.tones.len();
            for a in 0..k {
                s.tones.push(Tone {
                    detuning: 0.0,
                    amplitude: amps[a] * scale,
                    phase: theta[a],
                    sideband: side,
                    xi: x,
                    position: pos[a],
                    split: 0.0,
                    term: None,
                    program_weight: 0.0,
                });
            }
            for &(a, b, n) in &pairs {
                s.intended.push(IntendedPair { absorbed: base + a, emitted: base + b, range: n });
            }
        }
        s.relayout();
        s
    };

    let eps = match knobs.epsilon {
        Some(e) => e,
        None if knobs.red => {
            let lo = snap_up((40.0 * max_rate).max(grid), grid);
            let span = (2 * chain.n_ions + ladder.offsets[k - 1] as usize + 4) as f64 * delta;
            let mut best = (f64::NEG_INFINITY, lo);
            let mut e = lo;
            while e <= lo + span {
                let sc = census_score(&build(e, &vec![1.0; k], 1.0), chain);
                if sc > best.0 + 1e-9 * delta {
                    best = (sc, e);
                }
                if sc >= delta * (1.0 - 1e-9) {
                    break;
                }
                e += grid;
            }
            best.1
        }
        None => 0.0,
    };

    // Rate of range n (homogeneous part): Σ_pairs c_p A_a A_b with
    // c_p = η²/4 · (1/d_b + κ/d_r) at the k → 0 extrapolation.
    let (xb, xr) = (xi + eps, xi - eps);
    let coef = |a: usize, n: usize, kappa: f64| -> f64 {
        let db = xb + (pos[a] - n as f64) * delta;
        let dr = xr - (pos[a] - n as f64) * delta;
        eta * eta / 4.0 * (1.0 / db + if knobs.red { kappa / dr } else { 0.0 })
    };
    let mut kappa = 1.0;
    let mut logs = vec![0.0f64; k];
    let target: Vec<f64> = terms.iter().map(|t| t.omega).collect();
    if target.iter().any(|&r| !(r > 0.0)) {
        return Err(Error::ToneSharing("shared tones need positive target rates".into()));
    }
    // start from a uniform guess
    let guess = (target[0] / (coef(0, terms[0].n, kappa) * pairs.iter().filter(|p| p.2 == terms[0].n).count() as f64))
        .sqrt()
        .ln();
    logs.iter_mut().for_each(|x| *x = guess);
    let mut resid = f64::INFINITY;
    for _outer in 0..8 {
        // Levenberg–Marquardt on log-amplitudes, with a weak pull to balance
        let lambda_reg = 1e-6;
        let mut mu = 1e-3;
        for _ in 0..200 {
            let (r, jac) = rate_residuals(&logs, &pairs, terms, &target, &|a, n| coef(a, n, kappa));
            let mean = logs.iter().sum::<f64>() / k as f64;
            let mut jtj = vec![vec![0.0; k]; k];
            let mut jtr = vec![0.0; k];
            for (ri, row) in r.iter().zip(&jac) {
                for p in 0..k {
                    jtr[p] += row[p] * ri;
                    for q in 0..k {
                        jtj[p][q] += row[p] * row[q];
                    }
                }
            }
            for p in 0..k {
                jtr[p] += lambda_reg * (logs[p] - mean);
                jtj[p][p] += lambda_reg + mu;
            }
            let step = solve_dense(jtj, jtr);
            let trial: Vec<f64> = logs.iter().zip(&step).map(|(x, s)| x - s).collect();
            let cost = |l: &[f64]| {
                let (r, _) = rate_residuals(l, &pairs, terms, &target, &|a, n| coef(a, n, kappa));
                r.iter().map(|x| x * x).sum::<f64>()
            };
            if cost(&trial) <= cost(&logs) {
                logs = trial;
                mu *= 0.3;
            } else {
                mu *= 10.0;
            }
            if step.iter().map(|s| s.abs()).fold(0.0, f64::max) < 1e-13 {
                break;
            }
        }
        let (r, _) = rate_residuals(&logs, &pairs, terms, &target, &|a, n| coef(a, n, kappa));
        resid = r.iter().map(|x| x.abs()).fold(0.0, f64::max);
        if !knobs.red {
            break;
        }
        // re-match the red ladder to cancel the homogeneous Stark shift
        let amps: Vec<f64> = logs.iter().map(|x| x.exp()).collect();
        let sb: f64 = (0..k).map(|a| amps[a].powi(2) / (xb + pos[a] * delta)).sum();
        let sr: f64 = (0..k).map(|a| amps[a].powi(2) / (xr - pos[a] * delta)).sum();
        let new_kappa = sb / sr;
        if (new_kappa - kappa).abs() < 1e-14 {
            break;
        }
        kappa = new_kappa;
    }
    if resid > tol {
        return Err(Error::ToneSharing(format!(
            "inconsistent rate system: least-squares relative residual {resid:.3e} exceeds {tol:.1e}"
        )));
    }
    let amps: Vec<f64> = logs.iter().map(|x| x.exp()).collect();
    let cap = knobs.amplitude_cap * nu;
    if let Some(a) = amps.iter().map(|a| a * kappa.sqrt().max(1.0)).find(|a| a / 2f64.sqrt() > cap) {
        return Err(Error::AmplitudeCap { n: terms[0].n, required: a / 2f64.sqrt(), cap });
    }
    let mut s = build(eps, &amps, kappa);
    for td in &mut s.terms {
        // equivalent pair amplitude of the range
        let ps: Vec<&(usize, usize, usize)> = pairs.iter().filter(|p| p.2 == td.n).collect();
        let prod: f64 = ps.iter().map(|p| amps[p.0] * amps[p.1]).sum();
        td.omega_b = prod.sqrt();
        td.omega_r = (prod * kappa).sqrt();
    }
    if knobs.gradient_correction {
        s = apply_gradient_correction(&s, chain)?;
    }
    Ok(s)
}

/// Relative residuals log(rate_n/target_n) and their Jacobian in log-amplitudes.
fn rate_residuals(
    logs: &[f64],
    pairs: &[(usize, usize, usize)],
    terms: &[HoppingTerm],
    target: &[f64],
    coef: &dyn Fn(usize, usize) -> f64,
) -> (Vec<f64>, Vec<Vec<f64>>) {
    let k = logs.len();
    let mut r = Vec::new();
    let mut jac = Vec::new();
    for (t, &want) in terms.iter().zip(target) {
        let mut rate = 0.0;
        let mut grad = vec![0.0; k];
        for &(a, b, n) in pairs {
            if n != t.n {
                continue;
            }
            let v = coef(a, n) * (logs[a] + logs[b]).exp();
            rate += v;
            grad[a] += v;
            grad[b] += v;
        }
        r.push((rate / want).ln());
        jac.push(grad.iter().map(|g| g / rate).collect());
    }
    (r, jac)
}

fn solve_dense(mut a: Vec<Vec<f64>>, mut b: Vec<f64>) -> Vec<f64> {
    let n = b.len();
    for c in 0..n {
        let p = (c..n).max_by(|&x, &y| a[x][c].abs().total_cmp(&a[y][c].abs())).expect("rows");
        a.swap(c, p);
        b.swap(c, p);
        let d = a[c][c];
        for r in c + 1..n {
            let f = a[r][c] / d;
            for q in c..n {
                a[r][q] -= f * a[c][q];
            }
            b[r] -= f * b[c];
        }
    }
    let mut x = vec![0.0; n];
    for r in (0..n).rev() {
        let s: f64 = (r + 1..n).map(|q| a[r][q] * x[q]).sum();
        x[r] = (b[r] - s) / a[r][r];
    }
    x
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::f64::consts::TAU;

    fn chain(n: usize, delta_hz: f64) -> ChainConfig {
        ChainConfig::com(n, TAU * delta_hz, TAU * 1e6, 0.1, 2).unwrap()
    }

    #[test]
    fn blue_detunings_formula() {
        let c = chain(5, 5e3);
        let knobs = Knobs { xi: Some(vec![TAU * 100e3]), ..Knobs::blue_only() };
        let s = schedule(&[HoppingTerm::new(2, TAU * 100.0, PI / 3.0)], &c, &knobs).unwrap();
        let f: Vec<f64> = s.tones.iter().map(|t| t.detuning / TAU / 1e3).collect();
        assert!((f[0] - 1105.0).abs() < 1e-9 && (f[1] - 1095.0).abs() < 1e-9);
        assert!((s.tones[0].phase - PI / 6.0).abs() < 1e-15);
        assert!((s.tones[1].phase + PI / 6.0).abs() < 1e-15);
    }

    #[test]
    fn red_phase_rules() {
        let c = chain(5, 5e3);
        let terms = [HoppingTerm::new(2, TAU * 50.0, PI / 3.0)];
        let mut knobs = Knobs { xi: Some(vec![TAU * 100e3]), epsilon: Some(TAU * 20e3), ..Knobs::default() };
        knobs.gradient_correction = false;
        let s = schedule(&terms, &c, &knobs).unwrap();
        let red: Vec<&Tone> = s.tones.iter().filter(|t| t.sideband == Sideband::Red).collect();
        assert!((red[0].phase - PI / 6.0).abs() < 1e-15);
        knobs.red_rule = RedPhaseRule::PiOffset;
        let s = schedule(&terms, &c, &knobs).unwrap();
        let red: Vec<&Tone> = s.tones.iter().filter(|t| t.sideband == Sideband::Red).collect();
        assert!((red[0].phase - (PI / 3.0 + PI) / 2.0).abs() < 1e-15);
        assert!((red[1].phase + (PI / 3.0 + PI) / 2.0).abs() < 1e-15);
    }

    #[test]
    fn amplitude_inversion() {
        let c = ChainConfig::com(4, TAU * 5e3, TAU * 1e6, 0.1, 2).unwrap();
        let eta = drive_eta(&c);
        let xi_b = TAU * 100e3;
        let rate = TAU * 40.0;
        let knobs = Knobs { xi: Some(vec![xi_b]), ..Knobs::blue_only() };
        let s = schedule(&[HoppingTerm::new(1, rate, 0.0)], &c, &knobs).unwrap();
        let want = (2.0 * xi_b * rate).sqrt() / eta;
        assert!((s.terms[0].omega0() - want).abs() < 1e-9 * want);
    }

    #[test]
    fn period_examples() {
        let c = chain(5, 5e3);
        let knobs = Knobs { xi: Some(vec![TAU * 100e3]), ..Knobs::blue_only() };
        let s = schedule(&[HoppingTerm::new(2, TAU * 50.0, 0.0)], &c, &knobs).unwrap();
        let p = stroboscopic_period(&s, 100).unwrap();
        assert_eq!((p.m, p.m_b), (1, 40));
        assert!((p.t - 0.4e-3).abs() < 1e-15);
        let knobs = Knobs { xi: Some(vec![TAU * 5e3 * 10.0 * 2f64.sqrt()]), ..Knobs::blue_only() };
        let s = schedule(&[HoppingTerm::new(2, TAU * 50.0, 0.0)], &c, &knobs).unwrap();
        assert!(matches!(stroboscopic_period(&s, 1000), Err(Error::Incommensurate { .. })));
    }

    #[test]
    fn ladders() {
        assert_eq!(find_ladder(&[1, 2], 6, 5).unwrap().offsets, vec![0, 1, 2]);
        assert_eq!(find_ladder(&[1, 4], 5, 5).unwrap().offsets, vec![0, 1, 5]);
        assert_eq!(induced_ranges(&[0, 1, 4], 6), vec![1, 3, 4]);
        assert_eq!(find_ladder(&[1, 2, 4, 5], 7, 5).unwrap().ranges, vec![1, 2, 4, 5]);
    }
}
