//! First and second Magnus terms of the drive, by quadrature, and their
//! closed-form decomposition.
//!
//! The second-order generator follows the literal convention
//! χ₂ = −∫₀ᵀdt₁∫₀^{t₁}dt₂ [V(t₁),V(t₂)], i.e. without the ½ of the Magnus
//! series, so i·χ₂ = 2T·H_eff.

use serde::{Deserialize, Serialize};

use crate::linalg::CMatrix;
use crate::model::{build_basis, Basis, ChainConfig};
use crate::scheduler::{DriveSchedule, Sideband};
use crate::{Error, Result, C64};

const GL_ORDER: usize = 8;

/// Nodes and weights of the n-point Gauss–Legendre rule on [−1, 1].
pub fn gauss_legendre(n: usize) -> (Vec<f64>, Vec<f64>) {
    let mut x = vec![0.0; n];
    let mut w = vec![0.0; n];
    for i in 0..n.div_ceil(2) {
        let mut z = (std::f64::consts::PI * (i as f64 + 0.75) / (n as f64 + 0.5)).cos();
        for _ in 0..100 {
            let (p, dp) = legendre(n, z);
            let dz = p / dp;
            z -= dz;
            if dz.abs() < 1e-16 {
                break;
            }
        }
        let (_, dp) = legendre(n, z);
        x[i] = -z;
        x[n - 1 - i] = z;
        w[i] = 2.0 / ((1.0 - z * z) * dp * dp);
        w[n - 1 - i] = w[i];
    }
    (x, w)
}

fn legendre(n: usize, z: f64) -> (f64, f64) {
    let (mut p0, mut p1) = (1.0, z);
    for k in 2..=n {
        let p2 = ((2 * k - 1) as f64 * z * p1 - (k - 1) as f64 * p0) / k as f64;
        p0 = p1;
        p1 = p2;
    }
    let dp = n as f64 * (z * p1 - p0) / (z * z - 1.0);
    (p1, dp)
}

/// One coupling of the drive: coef·e^{i·freq·t} σ⁺_slot B_mode + h.c.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct DrivePiece {
    pub slot: usize,
    pub site: usize,
    pub mode: usize,
    pub tone: usize,
    pub sideband: Sideband,
    pub coef: C64,
    pub freq: f64,
}

/// Static-phase decomposition of V(t) (phase programs are ignored here).
pub fn drive_pieces(s: &DriveSchedule, chain: &ChainConfig) -> Vec<DrivePiece> {
    let mut out = Vec::new();
    for (slot, site) in chain.active_sites().into_iter().enumerate() {
        let k = site as f64 + 1.0;
        for (l, mode) in chain.modes.iter().enumerate() {
            let eta = mode.lamb_dicke[site];
            for (a, t) in s.tones.iter().enumerate() {
                if t.amplitude == 0.0 || eta == 0.0 {
                    continue;
                }
                out.push(DrivePiece {
                    slot,
                    site,
                    mode: l,
                    tone: a,
                    sideband: t.sideband,
                    coef: C64::new(0.0, 0.5 * t.amplitude * eta) * C64::from_polar(1.0, -t.phase),
                    freq: k * s.gradient + t.sideband.sign() * mode.frequency - t.detuning,
                });
            }
        }
    }
    out
}

/// Sparse operator with at most one non-zero per column: (from, to, value).
#[derive(Clone, Debug)]
struct SparseOp(Vec<(usize, usize, f64)>);

impl SparseOp {
    fn piece(basis: &Basis, p: &DrivePiece) -> SparseOp {
        use crate::model::Ladder::*;
        let b = match p.sideband {
            Sideband::Blue => PhononRaise(p.mode),
            Sideband::Red => PhononLower(p.mode),
        };
        let mut v = Vec::new();
        for i in 0..basis.dim() {
            if let Some((j, f)) = basis.ladder_target(b, i) {
                if let Some((k, g)) = basis.ladder_target(SpinRaise(p.slot), j) {
                    v.push((i, k, f * g));
                }
            }
        }
        SparseOp(v)
    }

    fn adjoint(&self) -> SparseOp {
        SparseOp(self.0.iter().map(|&(a, b, v)| (b, a, v)).collect())
    }

    fn add_to(&self, m: &mut CMatrix, c: C64) {
        for &(from, to, v) in &self.0 {
            m[(to, from)] += c * v;
        }
    }

    /// out += c·(Q·M − M·Q)
    fn commutator_into(&self, m: &CMatrix, c: C64, out: &mut CMatrix) {
        let d = m.nrows();
        for &(from, to, v) in &self.0 {
            let cv = c * v;
            for col in 0..d {
                out[(to, col)] += cv * m[(from, col)];
            }
            for row in 0..d {
                out[(row, from)] -= cv * m[(row, to)];
            }
        }
    }
}

/// Composite Gauss–Legendre grid over [0, T] with panels no longer than
/// `max_panel`.
struct Grid {
    t: f64,
    panels: usize,
    x: Vec<f64>,
    w: Vec<f64>,
}

impl Grid {
    fn new(t: f64, max_panel: f64) -> Grid {
        let panels = (t / max_panel).ceil().max(1.0) as usize;
        let (x, w) = gauss_legendre(GL_ORDER);
        Grid { t, panels, x, w }
    }

    fn h(&self) -> f64 {
        self.t / self.panels as f64
    }

    fn refined(&self) -> Grid {
        Grid { t: self.t, panels: self.panels * 2, x: self.x.clone(), w: self.w.clone() }
    }

    fn integrate(&self, f: &dyn Fn(f64) -> C64) -> C64 {
        let h = self.h();
        let mut acc = C64::new(0.0, 0.0);
        for p in 0..self.panels {
            let a = p as f64 * h;
            for (x, w) in self.x.iter().zip(&self.w) {
                acc += f(a + 0.5 * h * (1.0 + x)) * (0.5 * h * w);
            }
        }
        acc
    }
}

fn shortest_period(pieces: &[DrivePiece]) -> f64 {
    let wmax = pieces.iter().map(|p| p.freq.abs()).fold(0.0, f64::max);
    if wmax > 0.0 {
        2.0 * std::f64::consts::PI / wmax
    } else {
        f64::INFINITY
    }
}

/// ∫₀ᵀ coef·e^{i w t} dt in closed form.
pub fn exp_integral(coef: C64, w: f64, t: f64) -> C64 {
    if (w * t).abs() < 1e-8 {
        return coef * t * C64::new(1.0, 0.5 * w * t);
    }
    coef * (C64::from_polar(1.0, w * t) - 1.0) / C64::new(0.0, w)
}

fn check_dim(basis: &Basis, cap: usize) -> Result<()> {
    if basis.dim() > cap {
        return Err(Error::DimensionCap { dim: basis.dim(), cap });
    }
    Ok(())
}

/// Dense-oracle size limit for χ matrices.
pub const MAGNUS_DIM_CAP: usize = 1024;

/// χ₁ = −i∫₀ᵀV dt by composite Gauss–Legendre, panels ≤ 1/20 of the shortest
/// period and doubled until the piece integrals agree to 10⁻¹³·|coef|T.
pub fn chi1_numeric(s: &DriveSchedule, chain: &ChainConfig, t: f64) -> Result<CMatrix> {
    if !(t > 0.0) {
        return Err(Error::Schedule("integration time must be positive".into()));
    }
    let basis = build_basis(chain)?;
    check_dim(&basis, MAGNUS_DIM_CAP)?;
    let pieces = drive_pieces(s, chain);
    let mut grid = Grid::new(t, shortest_period(&pieces) / 20.0);
    let integrals = loop {
        let a: Vec<C64> =
            pieces.iter().map(|p| grid.integrate(&|x| p.coef * C64::from_polar(1.0, p.freq * x))).collect();
        let fine = grid.refined();
        let b: Vec<C64> =
            pieces.iter().map(|p| fine.integrate(&|x| p.coef * C64::from_polar(1.0, p.freq * x))).collect();
        let ok = pieces.iter().zip(a.iter().zip(&b)).all(|(p, (x, y))| (x - y).norm() <= 1e-13 * p.coef.norm() * t);
        if ok || fine.panels > 1 << 22 {
            break b;
        }
        grid = fine;
    };
    let d = basis.dim();
    let mut chi = CMatrix::zeros(d, d);
    let mi = C64::new(0.0, -1.0);
    for (p, i) in pieces.iter().zip(&integrals) {
        let q = SparseOp::piece(&basis, p);
        q.add_to(&mut chi, mi * i);
        q.adjoint().add_to(&mut chi, mi * i.conj());
    }
    Ok(chi)
}

/// χ₁ from the exact exponential integrals (oracle).
pub fn chi1_analytic(s: &DriveSchedule, chain: &ChainConfig, t: f64) -> Result<CMatrix> {
    let basis = build_basis(chain)?;
    check_dim(&basis, MAGNUS_DIM_CAP)?;
    let d = basis.dim();
    let mut chi = CMatrix::zeros(d, d);
    let mi = C64::new(0.0, -1.0);
    for p in drive_pieces(s, chain) {
        let i = exp_integral(p.coef, p.freq, t);
        let q = SparseOp::piece(&basis, &p);
        q.add_to(&mut chi, mi * i);
        q.adjoint().add_to(&mut chi, mi * i.conj());
    }
    Ok(chi)
}

/// Which piece pairs enter χ₂.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum PairFilter {
    All,
    /// Only pairs acting on different modes.
    InterMode,
    /// Only pairs acting on the same mode.
    IntraMode,
}

/// Nested integrals I_{μν} = ∫₀ᵀdt₁ g_μ(t₁) ∫₀^{t₁}dt₂ g_ν(t₂) for scalar
/// exponentials g = c·e^{iwt}, on a composite Gauss–Legendre grid.
fn nested_integrals(funcs: &[(C64, f64)], grid: &Grid) -> Vec<Vec<C64>> {
    let nf = funcs.len();
    let h = grid.h();
    let mut out = vec![vec![C64::new(0.0, 0.0); nf]; nf];
    let mut cum = vec![C64::new(0.0, 0.0); nf];
    let mut inner = vec![C64::new(0.0, 0.0); nf];
    let mut outer = vec![C64::new(0.0, 0.0); nf];
    for p in 0..grid.panels {
        let a = p as f64 * h;
        for (x, w) in grid.x.iter().zip(&grid.w) {
            let t1 = a + 0.5 * h * (1.0 + x);
            let wt = 0.5 * h * w;
            // partial panel [a, t1]
            let hp = t1 - a;
            for (nu, &(c, f)) in funcs.iter().enumerate() {
                let mut s = C64::new(0.0, 0.0);
                for (y, v) in grid.x.iter().zip(&grid.w) {
                    s += C64::from_polar(1.0, f * (a + 0.5 * hp * (1.0 + y))) * (0.5 * hp * v);
                }
                inner[nu] = cum[nu] + c * s;
                outer[nu] = funcs[nu].0 * C64::from_polar(1.0, f * t1) * wt;
            }
            for mu in 0..nf {
                let o = outer[mu];
                let row = &mut out[mu];
                for nu in 0..nf {
                    row[nu] += o * inner[nu];
                }
            }
        }
        for (nu, &(c, f)) in funcs.iter().enumerate() {
            let mut s = C64::new(0.0, 0.0);
            for (y, v) in grid.x.iter().zip(&grid.w) {
                s += C64::from_polar(1.0, f * (a + 0.5 * h * (1.0 + y))) * (0.5 * h * v);
            }
            cum[nu] += c * s;
        }
    }
    out
}

/// χ₂ by nested quadrature of the commutator (literal convention, no ½).
pub fn chi2_numeric(s: &DriveSchedule, chain: &ChainConfig, t: f64) -> Result<CMatrix> {
    chi2_filtered(s, chain, t, PairFilter::All)
}

pub fn chi2_filtered(s: &DriveSchedule, chain: &ChainConfig, t: f64, filter: PairFilter) -> Result<CMatrix> {
    if !(t > 0.0) {
        return Err(Error::Schedule("integration time must be positive".into()));
    }
    let basis = build_basis(chain)?;
    check_dim(&basis, MAGNUS_DIM_CAP)?;
    let pieces = drive_pieces(s, chain);
    // g_μ over pieces and their adjoints
    let mut funcs = Vec::new();
    let mut ops = Vec::new();
    let mut modes = Vec::new();
    for p in &pieces {
        let q = SparseOp::piece(&basis, p);
        funcs.push((p.coef, p.freq));
        funcs.push((p.coef.conj(), -p.freq));
        let qa = q.adjoint();
        ops.push(q);
        ops.push(qa);
        modes.push(p.mode);
        modes.push(p.mode);
    }
    let mut grid = Grid::new(t, shortest_period(&pieces) / 20.0);
    let scale: f64 = pieces.iter().map(|p| p.coef.norm()).fold(0.0, f64::max).powi(2) * t * t;
    let ints = loop {
        let a = nested_integrals(&funcs, &grid);
        let fine = grid.refined();
        let b = nested_integrals(&funcs, &fine);
        let err = a.iter().flatten().zip(b.iter().flatten()).map(|(x, y)| (x - y).norm()).fold(0.0, f64::max);
        if err <= 1e-12 * scale || fine.panels > 1 << 20 {
            break b;
        }
        grid = fine;
    };
    let d = basis.dim();
    let mut chi = CMatrix::zeros(d, d);
    for mu in 0..funcs.len() {
        // M_μ = Σ_ν I_{μν} Q_ν
        let mut m = CMatrix::zeros(d, d);
        let mut any = false;
        for nu in 0..funcs.len() {
            let keep = match filter {
                PairFilter::All => true,
                PairFilter::InterMode => modes[mu] != modes[nu],
                PairFilter::IntraMode => modes[mu] == modes[nu],
            };
            if keep && ints[mu][nu].norm() > 0.0 {
                ops[nu].add_to(&mut m, ints[mu][nu]);
                any = true;
            }
        }
        if any {
            ops[mu].commutator_into(&m, C64::new(-1.0, 0.0), &mut chi);
        }
    }
    Ok(chi)
}

/// Coefficients read off i·χ₂ (literal scale, i.e. 2T × rates).
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Chi2Coefficients {
    /// Physical sites of the active slots.
    pub sites: Vec<usize>,
    /// (to, from, coefficient of σ⁺_to σ⁻_from) for every slot pair, phonon vacuum.
    pub hops: Vec<(usize, usize, C64)>,
    /// Coefficient of σᶻ_k(a†a+½) for mode 0, per slot.
    pub z: Vec<f64>,
}

impl Chi2Coefficients {
    pub fn hop(&self, to: usize, from: usize) -> C64 {
        self.hops.iter().find(|h| h.0 == to && h.1 == from).map(|h| h.2).unwrap_or_default()
    }

    /// z extrapolated to energy index k = 0 by the interpolating polynomial
    /// through every active site: the homogeneous σᶻ(a†a+½) part.
    pub fn homogeneous_z(&self) -> f64 {
        let k: Vec<f64> = self.sites.iter().map(|&s| s as f64 + 1.0).collect();
        let mut acc = 0.0;
        for i in 0..k.len() {
            let mut l = 1.0;
            for j in 0..k.len() {
                if i != j {
                    l *= (0.0 - k[j]) / (k[i] - k[j]);
                }
            }
            acc += l * self.z[i];
        }
        acc
    }
}

/// Read hop and σᶻ coefficients from M = i·χ₂ (hermitian).
pub fn extract_coefficients(m: &CMatrix, chain: &ChainConfig) -> Result<Chi2Coefficients> {
    let basis = build_basis(chain)?;
    let ns = basis.n_spins();
    let vac = vec![0usize; basis.n_modes()];
    let mut one = vac.clone();
    one[0] = 1;
    let mut hops = Vec::new();
    for to in 0..ns {
        for from in 0..ns {
            if to != from {
                let r = basis.index(1 << to, &vac)?;
                let c = basis.index(1 << from, &vac)?;
                hops.push((to, from, m[(r, c)]));
            }
        }
    }
    let d = |spin: u64, ph: &[usize]| -> Result<f64> {
        let i = basis.index(spin, ph)?;
        Ok(m[(i, i)].re)
    };
    let base = d(0, &one)? - d(0, &vac)?;
    let mut z = Vec::new();
    for k in 0..ns {
        z.push(0.5 * ((d(1 << k, &one)? - d(1 << k, &vac)?) - base));
    }
    Ok(Chi2Coefficients { sites: chain.active_sites(), hops, z })
}

/// Closed-form per-site coefficients of a single blue pair (literal scale):
/// hop T·η²Ω_b²/(2ξ_b − 2Δ(k+n/2)) on σ⁺_{k+n}σ⁻_k with phase e^{−iφ};
/// σᶻ(a†a+½): −T·η²Ω_b²·x/(x²−y²), x = ξ_b−kΔ, y = nΔ/2.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ClosedForm {
    /// Energy index k (= site + 1) of each slot.
    pub k: Vec<f64>,
    pub hop: Vec<f64>,
    pub z: Vec<f64>,
}

pub fn closed_form(s: &DriveSchedule, chain: &ChainConfig, t: f64) -> Result<ClosedForm> {
    let td = single_term(s)?;
    let eta = s.eta;
    let grad = s.gradient;
    let n = td.n as f64;
    let y = n * grad / 2.0;
    let k: Vec<f64> = chain.active_sites().iter().map(|&x| x as f64 + 1.0).collect();
    let ob2 = td.omega_b * td.omega_b;
    let hop = k.iter().map(|kk| t * eta * eta * ob2 / (2.0 * td.xi_b - 2.0 * grad * (kk + n / 2.0))).collect();
    let z = k
        .iter()
        .map(|kk| {
            let x = td.xi_b - kk * grad;
            -t * eta * eta * ob2 * x / (x * x - y * y)
        })
        .collect();
    Ok(ClosedForm { k, hop, z })
}

fn single_term(s: &DriveSchedule) -> Result<&crate::scheduler::TermDrive> {
    if s.terms.len() != 1 || s.shared {
        return Err(Error::Schedule("decomposition is defined per single-term schedule".into()));
    }
    Ok(&s.terms[0])
}

/// H_eff ≈ H_h + H_z + H_h^∇ + H_z^∇ for a single blue pair.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct Decomposition {
    /// Ω_{n,b} = η²Ω₀²/(2ξ_b): H_h = Ω_{n,b} Σ e^{iφ}σ⁺_kσ⁻_{k+n} + h.c.
    pub omega_nb: f64,
    /// H_z = h_z Σσᶻ_k(a†a+½), h_z = −2Ω_{n,b}.
    pub h_z: f64,
    /// Hop rate grows as Ω_{n,b}(Δ/ξ_b)(k+n/2).
    pub h_h_grad: f64,
    /// σᶻ coefficient grows as −2Ω_{n,b}(Δ/ξ_b)k.
    pub h_z_grad: f64,
}

impl Decomposition {
    /// Rate of the bond (k, k+n), energy index k.
    pub fn hop(&self, k: f64, n: f64) -> f64 {
        self.omega_nb + self.h_h_grad * (k + n / 2.0)
    }

    pub fn z(&self, k: f64) -> f64 {
        self.h_z + self.h_z_grad * k
    }
}

pub fn analytic_decomposition(s: &DriveSchedule) -> Result<Decomposition> {
    let td = single_term(s)?;
    let omega_nb = s.eta * s.eta * td.omega0().powi(2) / (2.0 * td.xi_b);
    let r = s.gradient / td.xi_b;
    Ok(Decomposition { omega_nb, h_z: -2.0 * omega_nb, h_h_grad: omega_nb * r, h_z_grad: -2.0 * omega_nb * r })
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct CoefficientRow {
    pub coefficient: String,
    pub numeric: f64,
    pub analytic: f64,
    pub relative_residual: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct MagnusReport {
    pub period: f64,
    /// ‖χ₁‖_F / (ηΩ_bT).
    pub chi1_relative: f64,
    /// max ‖iχ₂ − (iχ₂)†‖.
    pub hermiticity: f64,
    /// Numeric vs the per-site closed expressions.
    pub closed_form: Vec<CoefficientRow>,
    /// Numeric vs the four-part decomposition (gradient terms included).
    pub decomposition: Vec<CoefficientRow>,
    pub max_closed_residual: f64,
    pub max_decomposition_residual: f64,
    /// Homogeneous σᶻ(a†a+½) coefficient (k = 0 extrapolation), literal scale.
    pub homogeneous_z: f64,
}

fn row(name: String, numeric: f64, analytic: f64) -> CoefficientRow {
    let relative_residual = (numeric - analytic).abs() / analytic.abs().max(f64::MIN_POSITIVE);
    CoefficientRow { coefficient: name, numeric, analytic, relative_residual }
}

/// Full numeric-vs-analytic comparison for a single-term schedule at time t.
pub fn verify(s: &DriveSchedule, chain: &ChainConfig, t: f64) -> Result<MagnusReport> {
    let td = single_term(s)?.clone();
    let chi1 = chi1_numeric(s, chain, t)?;
    let chi2 = chi2_numeric(s, chain, t)?;
    let m = &chi2 * C64::new(0.0, 1.0);
    let co = extract_coefficients(&m, chain)?;
    let cf = closed_form(s, chain, t)?;
    let dec = analytic_decomposition(s)?;
    let n = td.n;
    let mut closed = Vec::new();
    let mut decomp = Vec::new();
    let sites = chain.active_sites();
    for (slot, &site) in sites.iter().enumerate() {
        let k = site as f64 + 1.0;
        if let Some(to) = sites.iter().position(|&x| x == site + n) {
            let h = co.hop(to, slot);
            // the hop carries e^{−iφ} on σ⁺_{k+n}σ⁻_k
            let mag = (h * C64::from_polar(1.0, td.phi)).re;
            closed.push(row(format!("hop k={k}"), mag, cf.hop[slot]));
            decomp.push(row(format!("hop k={k}"), mag / (2.0 * t), dec.hop(k, n as f64)));
        }
        closed.push(row(format!("z k={k}"), co.z[slot], cf.z[slot]));
        decomp.push(row(format!("z k={k}"), co.z[slot] / (2.0 * t), dec.z(k)));
    }
    let max = |v: &[CoefficientRow]| v.iter().map(|r| r.relative_residual).fold(0.0, f64::max);
    let norm1 = chi1.iter().map(|x| x.norm_sqr()).sum::<f64>().sqrt();
    Ok(MagnusReport {
        period: t,
        chi1_relative: norm1 / (s.eta * td.omega_b * t),
        hermiticity: crate::linalg::hermiticity_defect(&m),
        max_closed_residual: max(&closed),
        max_decomposition_residual: max(&decomp),
        closed_form: closed,
        decomposition: decomp,
        homogeneous_z: co.homogeneous_z(),
    })
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct MultiModeCoupling {
    /// B_{i,k} = Σ_j η_{j,i}η_{j,k}/(2ξ_{b,j}).
    pub b: Vec<Vec<f64>>,
    /// ξ_{b,j} = ω_b − ν_j.
    pub xi: Vec<f64>,
    pub omega_b: f64,
}

pub fn multimode_b_matrix(chain: &ChainConfig, omega_b: f64) -> Result<MultiModeCoupling> {
    let xi: Vec<f64> = chain.modes.iter().map(|m| omega_b - m.frequency).collect();
    if let Some(j) = xi.iter().position(|x| x.abs() < 1e-12 * omega_b.abs().max(1.0)) {
        return Err(Error::Schedule(format!("blue tone resonant with mode {j}")));
    }
    let n = chain.n_ions;
    let mut b = vec![vec![0.0; n]; n];
    for (m, x) in chain.modes.iter().zip(&xi) {
        for i in 0..n {
            for k in 0..n {
                b[i][k] += m.lamb_dicke[i] * m.lamb_dicke[k] / (2.0 * x);
            }
        }
    }
    Ok(MultiModeCoupling { b, xi, omega_b })
}

/// |projection| of `m` onto every σ⁺ᵢσ⁻ⱼ ⊗ 1 (i ≠ j), relative to ‖m‖_F.
pub fn hopping_projection(m: &CMatrix, chain: &ChainConfig) -> Result<f64> {
    let basis = build_basis(chain)?;
    let ns = basis.n_spins();
    let pd = basis.phonon_dim();
    let norm = m.iter().map(|x| x.norm_sqr()).sum::<f64>().sqrt();
    let mut worst: f64 = 0.0;
    for i in 0..ns {
        for j in 0..ns {
            if i == j {
                continue;
            }
            // Tr[(σ⁺ᵢσ⁻ⱼ⊗1)† m] / ‖σ⁺ᵢσ⁻ⱼ⊗1‖
            let mut acc = C64::new(0.0, 0.0);
            let mut cnt = 0usize;
            for s in 0..basis.spin_dim() as u64 {
                if s >> j & 1 == 1 && s >> i & 1 == 0 {
                    let t = s ^ (1 << i) ^ (1 << j);
                    for p in 0..pd {
                        acc += m[(t as usize * pd + p, s as usize * pd + p)];
                        cnt += 1;
                    }
                }
            }
            worst = worst.max(acc.norm() / (cnt as f64).sqrt());
        }
    }
    Ok(if norm > 0.0 { worst / norm } else { 0.0 })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn gauss_legendre_exact_for_polynomials() {
        let (x, w) = gauss_legendre(8);
        assert!((w.iter().sum::<f64>() - 2.0).abs() < 1e-14);
        let i14: f64 = x.iter().zip(&w).map(|(x, w)| w * x.powi(14)).sum();
        assert!((i14 - 2.0 / 15.0).abs() < 1e-14);
    }

    #[test]
    fn exp_integral_matches_quadrature() {
        let c = C64::new(0.3, -0.2);
        let g = Grid::new(2.0, 0.01);
        let q = g.integrate(&|t| c * C64::from_polar(1.0, 7.0 * t));
        assert!((q - exp_integral(c, 7.0, 2.0)).norm() < 1e-14);
    }

    #[test]
    fn nested_integral_oracle() {
        // ∫₀ᵀ e^{iat}∫₀^{t}e^{ibs} ds dt, a+b ≠ 0
        let (a, b, t) = (3.0, -1.3, 2.0);
        let g = Grid::new(t, 0.01);
        let i = nested_integrals(&[(C64::new(1.0, 0.0), a), (C64::new(1.0, 0.0), b)], &g);
        let want =
            (exp_integral(C64::new(1.0, 0.0), a + b, t) - exp_integral(C64::new(1.0, 0.0), a, t)) / C64::new(0.0, b);
        assert!((i[0][1] - want).norm() < 1e-13);
    }
}
