//! Trajectory post-processing: full-vs-effective comparison and fits.

use std::f64::consts::PI;

use serde::{Deserialize, Serialize};

use super::{StateLayout, Trajectory};
use crate::{Error, Result, C64};

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Comparison {
    pub times: Vec<f64>,
    /// |⟨ψ_eff|P₀ψ_full⟩|²/‖P₀ψ_full‖², P₀ = phonon vacuum projector.
    pub fidelity: Vec<f64>,
    /// |⟨ψ_eff ⊗ 0|ψ_full⟩|² without renormalization.
    pub overlap: Vec<f64>,
    /// max over sites |P_e,full − P_e,eff| at each snapshot time.
    pub pe_distance: Vec<f64>,
    pub min_fidelity: f64,
    /// max |ΔP_e| over every common sample (not only snapshots).
    pub max_pe_distance: f64,
}

fn same_time(a: f64, b: f64) -> bool {
    (a - b).abs() <= 1e-9 * a.abs().max(b.abs()).max(1e-300)
}

/// Compare at the snapshot times common to both trajectories. The full state
/// is brought to the effective frame with R† = exp(+i·g·t·Σ_p p σᶻ_p), g the
/// Stark-gradient correction of the schedule (0 for none).
pub fn compare(full: &Trajectory, eff: &Trajectory, frame_slope: f64) -> Result<Comparison> {
    if full.sites != eff.sites {
        return Err(Error::Mismatch(format!("sites {:?} vs {:?}", full.sites, eff.sites)));
    }
    let StateLayout::Full { phonon_dim } = &full.layout else {
        return Err(Error::Mismatch("first trajectory must be a full spin–phonon run".into()));
    };
    let StateLayout::Spin { states } = &eff.layout else {
        return Err(Error::Mismatch("second trajectory must be an effective run".into()));
    };
    let sites = &full.sites;
    let mut out = Comparison {
        times: Vec::new(),
        fidelity: Vec::new(),
        overlap: Vec::new(),
        pe_distance: Vec::new(),
        min_fidelity: 1.0,
        max_pe_distance: 0.0,
    };
    for sf in &full.snapshots {
        let Some(se) = eff.snapshots.iter().find(|s| same_time(s.time, sf.time)) else {
            continue;
        };
        let t = sf.time;
        let mut dot = C64::new(0.0, 0.0);
        let mut vac = 0.0;
        for a in sf.amps.chunks(*phonon_dim) {
            vac += a[0].norm_sqr();
        }
        for (&s, e) in states.iter().zip(&se.amps) {
            let a = sf.amps[s as usize * phonon_dim];
            let phase: f64 = sites
                .iter()
                .enumerate()
                .map(|(slot, &p)| if s >> slot & 1 == 1 { p as f64 } else { -(p as f64) })
                .sum();
            dot += e.conj() * a * C64::from_polar(1.0, frame_slope * t * phase);
        }
        let en: f64 = se.amps.iter().map(|x| x.norm_sqr()).sum();
        let ov = dot.norm_sqr() / en;
        let fid = if vac > 0.0 { ov / vac } else { 0.0 };
        out.times.push(t);
        out.overlap.push(ov);
        out.fidelity.push(fid);
        out.min_fidelity = out.min_fidelity.min(fid);
        let rf = full.records.iter().find(|r| same_time(r.time, t));
        let re = eff.records.iter().find(|r| same_time(r.time, t));
        if let (Some(rf), Some(re)) = (rf, re) {
            out.pe_distance.push(pe_distance(&rf.p_excited, &re.p_excited));
        }
    }
    for rf in &full.records {
        if let Some(re) = eff.records.iter().find(|r| same_time(r.time, rf.time)) {
            out.max_pe_distance = out.max_pe_distance.max(pe_distance(&rf.p_excited, &re.p_excited));
        }
    }
    if !full.records.iter().any(|r| eff.records.iter().any(|e| same_time(e.time, r.time))) {
        return Err(Error::Mismatch("trajectories share no sample times".into()));
    }
    Ok(out)
}

fn pe_distance(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y).abs()).fold(0.0, f64::max)
}

/// Least-squares ϕ of P(n) ≈ A + B cos(2πn/N) + C sin(2πn/N), with the RMS
/// residual relative to the profile's peak-to-mean amplitude.
pub fn profile_phase(p: &[f64]) -> (f64, f64) {
    let n = p.len() as f64;
    let (mut a, mut b, mut c) = (0.0, 0.0, 0.0);
    for (m, &x) in p.iter().enumerate() {
        let th = 2.0 * PI * m as f64 / n;
        a += x / n;
        b += 2.0 * x * th.cos() / n;
        c += 2.0 * x * th.sin() / n;
    }
    let mut rss = 0.0;
    for (m, &x) in p.iter().enumerate() {
        let th = 2.0 * PI * m as f64 / n;
        rss += (x - a - b * th.cos() - c * th.sin()).powi(2);
    }
    let amp = (b * b + c * c).sqrt();
    let rel = if amp > 0.0 { (rss / n).sqrt() / amp } else { f64::INFINITY };
    (c.atan2(b), rel)
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct PhaseFit {
    /// dϕ/dt (rad/s).
    pub velocity: f64,
    pub intercept: f64,
    /// Half-width of the 95% confidence interval of the velocity.
    pub ci95: f64,
    /// Unwrapped ϕ per sample.
    pub phases: Vec<f64>,
    pub max_profile_residual: f64,
    /// Set when some profile does not look like 1+cos(2πn/N−ϕ).
    pub flagged: bool,
}

/// Fit the packet position per sample and a straight line through it.
pub fn phase_track(traj: &Trajectory, residual_threshold: f64) -> Result<PhaseFit> {
    if traj.records.len() < 3 {
        return Err(Error::Fit("need at least three samples".into()));
    }
    let mut phases = Vec::new();
    let mut worst: f64 = 0.0;
    let mut prev: Option<f64> = None;
    for r in &traj.records {
        let (ph, res) = profile_phase(&r.p_excited);
        worst = worst.max(res);
        let ph = match prev {
            None => ph,
            Some(q) => q + crate::units::wrap_angle(ph - q),
        };
        phases.push(ph);
        prev = Some(ph);
    }
    let t: Vec<f64> = traj.records.iter().map(|r| r.time).collect();
    let (slope, intercept, se) = linear_fit(&t, &phases);
    Ok(PhaseFit {
        velocity: slope,
        intercept,
        ci95: 1.96 * se,
        phases,
        max_profile_residual: worst,
        flagged: !(worst <= residual_threshold),
    })
}

/// (slope, intercept, standard error of the slope)
fn linear_fit(x: &[f64], y: &[f64]) -> (f64, f64, f64) {
    let n = x.len() as f64;
    let xm = x.iter().sum::<f64>() / n;
    let ym = y.iter().sum::<f64>() / n;
    let sxx: f64 = x.iter().map(|a| (a - xm).powi(2)).sum();
    let sxy: f64 = x.iter().zip(y).map(|(a, b)| (a - xm) * (b - ym)).sum();
    let slope = sxy / sxx;
    let intercept = ym - slope * xm;
    let rss: f64 = x.iter().zip(y).map(|(a, b)| (b - intercept - slope * a).powi(2)).sum();
    let se = if n > 2.0 { (rss / (n - 2.0) / sxx).sqrt() } else { 0.0 };
    (slope, intercept, se)
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct RabiFit {
    /// Angular frequency W of y ≈ a + b·cos(Wt) + c·sin(Wt).
    pub frequency: f64,
    pub offset: f64,
    pub amplitude: f64,
    pub rms_residual: f64,
}

/// Single-frequency sinusoid fit: grid scan of W in [w_lo, w_hi] followed by
/// golden-section refinement of the linear least-squares residual.
pub fn fit_rabi(t: &[f64], y: &[f64], w_lo: f64, w_hi: f64) -> Result<RabiFit> {
    if t.len() < 4 || t.len() != y.len() || !(w_hi > w_lo && w_lo > 0.0) {
        return Err(Error::Fit("need ≥ 4 samples and 0 < w_lo < w_hi".into()));
    }
    let rss = |w: f64| -> (f64, [f64; 3]) {
        // normal equations for (a, b, c)
        let mut m = [[0.0; 3]; 3];
        let mut v = [0.0; 3];
        for (&ti, &yi) in t.iter().zip(y) {
            let f = [1.0, (w * ti).cos(), (w * ti).sin()];
            for r in 0..3 {
                v[r] += f[r] * yi;
                for c in 0..3 {
                    m[r][c] += f[r] * f[c];
                }
            }
        }
        let p = solve3(m, v);
        let r: f64 =
            t.iter().zip(y).map(|(&ti, &yi)| (yi - p[0] - p[1] * (w * ti).cos() - p[2] * (w * ti).sin()).powi(2)).sum();
        (r, p)
    };
    let grid = 2000;
    let mut best = (f64::INFINITY, w_lo);
    for i in 0..=grid {
        let w = w_lo + (w_hi - w_lo) * i as f64 / grid as f64;
        let r = rss(w).0;
        if r < best.0 {
            best = (r, w);
        }
    }
    let dw = (w_hi - w_lo) / grid as f64;
    let (mut a, mut b) = ((best.1 - dw).max(w_lo), (best.1 + dw).min(w_hi));
    let g = (5f64.sqrt() - 1.0) / 2.0;
    for _ in 0..100 {
        let c = b - g * (b - a);
        let d = a + g * (b - a);
        if rss(c).0 < rss(d).0 {
            b = d;
        } else {
            a = c;
        }
    }
    let w = 0.5 * (a + b);
    let (r, p) = rss(w);
    Ok(RabiFit {
        frequency: w,
        offset: p[0],
        amplitude: (p[1] * p[1] + p[2] * p[2]).sqrt(),
        rms_residual: (r / t.len() as f64).sqrt(),
    })
}

fn solve3(mut m: [[f64; 3]; 3], mut v: [f64; 3]) -> [f64; 3] {
    for c in 0..3 {
        let p = (c..3).max_by(|&a, &b| m[a][c].abs().total_cmp(&m[b][c].abs())).unwrap_or(c);
        m.swap(c, p);
        v.swap(c, p);
        for r in c + 1..3 {
            let f = m[r][c] / m[c][c];
            for k in c..3 {
                m[r][k] -= f * m[c][k];
            }
            v[r] -= f * v[c];
        }
    }
    let mut x = [0.0; 3];
    for r in (0..3).rev() {
        let s: f64 = (r + 1..3).map(|k| m[r][k] * x[k]).sum();
        x[r] = (v[r] - s) / m[r][r];
    }
    x
}
