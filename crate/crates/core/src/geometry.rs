//! Lattice geometries → hopping terms Σₙ Ωₙ e^{i(φₙ−δₙt)} Σᵢ σ⁺ᵢσ⁻_{i+n} + h.c.
//!
//! Sites are 0-based here. The directed edge i→j of a [`CouplingGraph`]
//! carries the coefficient w_ij of σ⁺ᵢσ⁻ⱼ, so the edge i→i+n has phase φₙ.
//! Geometry rates are unit-agnostic: terms come out in the units of the spec.

use std::collections::BTreeMap;
use std::f64::consts::TAU;

use serde::{Deserialize, Serialize};

use crate::units::wrap_angle;
use crate::{Error, Result, C64};

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct HoppingTerm {
    pub n: usize,
    pub omega: f64,
    #[serde(default)]
    pub phi: f64,
    #[serde(default)]
    pub delta: f64,
}

impl HoppingTerm {
    pub fn new(n: usize, omega: f64, phi: f64) -> Self {
        HoppingTerm { n, omega, phi, delta: 0.0 }
    }
}

fn one() -> f64 {
    1.0
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "geometry", rename_all = "snake_case")]
pub enum GeometrySpec {
    /// Closed ring; `loop_flux` is the gauge-invariant loop phase (= 2πΦ).
    Ring {
        n: usize,
        #[serde(default)]
        loop_flux: f64,
        #[serde(default = "one")]
        omega: f64,
    },
    TriangularLadder {
        n: usize,
        #[serde(default = "one")]
        j1: f64,
        j2: f64,
        #[serde(default)]
        phi1: f64,
        #[serde(default)]
        phi2: f64,
    },
    /// `rows` rows of `cols` ions separated by spacer ions.
    RectangularLadder {
        rows: usize,
        cols: usize,
        #[serde(default = "one")]
        omega: f64,
        #[serde(default)]
        rung: Option<f64>,
        #[serde(default)]
        flux: f64,
        #[serde(default)]
        n: Option<usize>,
    },
    /// Rectangular lattice closed along the row index, threaded by `flux`.
    Cylinder {
        rows: usize,
        cols: usize,
        #[serde(default)]
        flux: f64,
        #[serde(default = "one")]
        omega: f64,
        #[serde(default)]
        n: Option<usize>,
    },
    MobiusLadder {
        n: usize,
        #[serde(default)]
        loop_flux: f64,
        #[serde(default = "one")]
        omega: f64,
    },
    Helix {
        w: usize,
        h: usize,
        #[serde(default)]
        flux: f64,
        #[serde(default = "one")]
        omega: f64,
        #[serde(default)]
        n: Option<usize>,
    },
    /// Twisted torus with the two independent fluxes Φ₁ = h·φ_w, Φ₂ = w·φ₁ − φ_w.
    Torus {
        w: usize,
        h: usize,
        #[serde(default)]
        flux1: f64,
        #[serde(default)]
        flux2: f64,
        #[serde(default = "one")]
        omega: f64,
        #[serde(default)]
        n: Option<usize>,
    },
    Custom {
        n: usize,
        terms: Vec<HoppingTerm>,
        #[serde(default)]
        spacers: Vec<usize>,
    },
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct FluxReport {
    pub name: String,
    pub cycle: Vec<usize>,
    /// Sum of directed edge phases around `cycle`.
    pub loop_phase: f64,
    /// The same flux in units of the flux quantum (loop_phase / 2π).
    pub flux_quanta: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct CompiledGeometry {
    pub n_ions: usize,
    pub terms: Vec<HoppingTerm>,
    pub spacers: Vec<usize>,
    pub fluxes: Vec<FluxReport>,
}

fn geo(msg: impl Into<String>) -> Error {
    Error::Geometry(msg.into())
}

fn check_n(expected: usize, given: Option<usize>, what: &str) -> Result<()> {
    match given {
        Some(n) if n != expected => Err(geo(format!("{what} needs N = {expected} ions, got N = {n}"))),
        _ => Ok(()),
    }
}

fn no_flux(flux: f64, what: &str) -> Result<()> {
    if flux != 0.0 {
        return Err(Error::OpenGeometryFlux(format!(
            "{what}: every closed loop encloses zero net range phase, so flux {flux} cannot be realized"
        )));
    }
    Ok(())
}

pub fn compile(spec: &GeometrySpec) -> Result<CompiledGeometry> {
    let (n_ions, terms, spacers, loops): (usize, Vec<HoppingTerm>, Vec<usize>, Vec<(String, Vec<usize>)>) = match *spec
    {
        GeometrySpec::Ring { n, loop_flux, omega } => {
            if n < 3 {
                return Err(geo(format!("ring needs N >= 3 (n=1 and n=N-1 coincide at N={n})")));
            }
            let p = loop_flux / n as f64;
            let terms = vec![HoppingTerm::new(1, omega, p), HoppingTerm::new(n - 1, omega, -p)];
            (n, terms, vec![], vec![("ring".into(), (0..n).collect())])
        }
        GeometrySpec::TriangularLadder { n, j1, j2, phi1, phi2 } => {
            if n < 3 {
                return Err(geo("triangular ladder needs N >= 3"));
            }
            let terms = vec![HoppingTerm::new(1, j1, phi1), HoppingTerm::new(2, j2, phi2)];
            let loops = triangular_plaquettes(n)
                .into_iter()
                .take(2)
                .enumerate()
                .map(|(i, c)| (format!("plaquette{i}"), c))
                .collect();
            (n, terms, vec![], loops)
        }
        GeometrySpec::RectangularLadder { rows, cols, omega, rung, flux, n } => {
            if rows < 2 || cols < 2 {
                return Err(geo("rectangular ladder needs rows >= 2 and cols >= 2"));
            }
            no_flux(flux, "rectangular ladder")?;
            let total = rows * (cols + 1) - 1;
            check_n(total, n, "rectangular ladder")?;
            let spacers = (0..rows - 1).map(|r| r * (cols + 1) + cols).collect();
            let terms = vec![HoppingTerm::new(1, omega, 0.0), HoppingTerm::new(cols + 1, rung.unwrap_or(omega), 0.0)];
            (total, terms, spacers, vec![])
        }
        GeometrySpec::Cylinder { rows, cols, flux, omega, n } => {
            if rows < 3 || cols < 1 {
                return Err(geo("cylinder needs rows >= 3 and cols >= 1"));
            }
            let total = rows * (cols + 1);
            check_n(total, n, "cylinder")?;
            let s = cols + 1;
            let p = flux / rows as f64;
            let spacers = (0..rows).map(|r| r * s + cols).collect();
            let terms = vec![
                HoppingTerm::new(1, omega, 0.0),
                HoppingTerm::new(s, omega, p),
                HoppingTerm::new(total - s, omega, -p),
            ];
            let cycle = (0..rows).map(|r| r * s).collect();
            (total, terms, spacers, vec![("around".into(), cycle)])
        }
        GeometrySpec::MobiusLadder { n, loop_flux, omega } => {
            if n < 4 || n % 2 != 0 {
                return Err(geo(format!("Mobius ladder needs even N >= 4, got {n}")));
            }
            let p = loop_flux / n as f64;
            let terms = vec![
                HoppingTerm::new(1, omega, p),
                HoppingTerm::new(n / 2, omega, 0.0),
                HoppingTerm::new(n - 1, omega, -p),
            ];
            (n, terms, vec![], vec![("ring".into(), (0..n).collect())])
        }
        GeometrySpec::Helix { w, h, flux, omega, n } => {
            if w < 2 || h < 2 {
                return Err(geo("helix needs w >= 2 and h >= 2"));
            }
            no_flux(flux, "helix")?;
            let total = w * h;
            check_n(total, n, "helix")?;
            (total, vec![HoppingTerm::new(1, omega, 0.0), HoppingTerm::new(w, omega, 0.0)], vec![], vec![])
        }
        GeometrySpec::Torus { w, h, flux1, flux2, omega, n } => {
            if w < 2 || h < 3 {
                return Err(geo("torus needs w >= 2 and h >= 3 so that the four ranges are distinct"));
            }
            let total = w * h;
            check_n(total, n, "torus")?;
            let phi_w = flux1 / h as f64;
            let phi_1 = (flux2 + phi_w) / w as f64;
            let terms = vec![
                HoppingTerm::new(1, omega, phi_1),
                HoppingTerm::new(w, omega, phi_w),
                HoppingTerm::new(total - w, omega, -phi_w),
                HoppingTerm::new(total - 1, omega, -phi_1),
            ];
            let loops = vec![("flux1".into(), (0..h).map(|r| r * w).collect()), ("flux2".into(), (0..=w).collect())];
            (total, terms, vec![], loops)
        }
        GeometrySpec::Custom { n, ref terms, ref spacers } => (n, terms.clone(), spacers.clone(), vec![]),
    };
    validate_terms(&terms, n_ions)?;
    let graph = expand_to_graph(&terms, &spacers, n_ions)?;
    let fluxes = loops
        .into_iter()
        .map(|(name, cycle)| {
            let loop_phase = graph.loop_flux(&cycle, false)?;
            Ok(FluxReport { name, cycle, loop_phase, flux_quanta: loop_phase / TAU })
        })
        .collect::<Result<Vec<_>>>()?;
    Ok(CompiledGeometry { n_ions, terms, spacers, fluxes })
}

pub fn validate_terms(terms: &[HoppingTerm], n_ions: usize) -> Result<()> {
    let mut seen = vec![false; n_ions];
    for t in terms {
        if t.n == 0 || t.n >= n_ions {
            return Err(Error::InvalidTerm(format!("range {} outside 1..={}", t.n, n_ions.saturating_sub(1))));
        }
        if seen[t.n] {
            return Err(Error::InvalidTerm(format!("duplicate range {}", t.n)));
        }
        seen[t.n] = true;
        if !(t.omega >= 0.0 && t.omega.is_finite()) {
            return Err(Error::InvalidTerm(format!("rate of range {} must be finite and >= 0", t.n)));
        }
        if !t.phi.is_finite() || !t.delta.is_finite() {
            return Err(Error::InvalidTerm(format!("non-finite phase data on range {}", t.n)));
        }
    }
    Ok(())
}

/// φₙ → φₙ + nϕ, i.e. σ⁺_k → e^{ikϕ}σ⁺_k.
pub fn apply_gauge(terms: &[HoppingTerm], gauge: f64) -> Vec<HoppingTerm> {
    terms.iter().map(|t| HoppingTerm { phi: t.phi + t.n as f64 * gauge, ..*t }).collect()
}

#[derive(Clone, Debug, PartialEq)]
pub struct CouplingGraph {
    pub n_sites: usize,
    pub spacers: Vec<usize>,
    /// (rate, phase) of every directed edge.
    edges: BTreeMap<(usize, usize), (f64, f64)>,
}

impl CouplingGraph {
    pub fn active_nodes(&self) -> Vec<usize> {
        (0..self.n_sites).filter(|k| !self.spacers.contains(k)).collect()
    }

    /// Coefficient of σ⁺ᵢσ⁻ⱼ.
    pub fn weight(&self, i: usize, j: usize) -> Option<C64> {
        self.edges.get(&(i, j)).map(|&(r, p)| C64::from_polar(r, p))
    }

    pub fn phase(&self, i: usize, j: usize) -> Option<f64> {
        self.edges.get(&(i, j)).map(|e| e.1)
    }

    /// Directed edges (i, j, w_ij), both orientations.
    pub fn directed_edges(&self) -> impl Iterator<Item = (usize, usize, C64)> + '_ {
        self.edges.iter().map(|(&(i, j), &(r, p))| (i, j, C64::from_polar(r, p)))
    }

    /// Undirected edges with i < j.
    pub fn edges(&self) -> Vec<(usize, usize)> {
        self.edges.keys().filter(|(i, j)| i < j).copied().collect()
    }

    pub fn degree(&self, i: usize) -> usize {
        self.edges.keys().filter(|(a, _)| *a == i).count()
    }

    pub fn neighbors(&self, i: usize) -> Vec<usize> {
        self.edges.keys().filter(|(a, _)| *a == i).map(|&(_, b)| b).collect()
    }

    pub fn is_hermitian(&self, tol: f64) -> bool {
        self.directed_edges().all(|(i, j, w)| self.weight(j, i).is_some_and(|r| (r - w.conj()).norm() <= tol))
    }

    /// Sum of directed edge phases along `cycle` (closed back to its first
    /// node unless it already ends there).
    pub fn loop_flux(&self, cycle: &[usize], reduce: bool) -> Result<f64> {
        if cycle.len() < 2 {
            return Err(geo("cycle needs at least two nodes"));
        }
        let mut walk = cycle.to_vec();
        if walk.first() != walk.last() {
            walk.push(walk[0]);
        }
        let mut total = 0.0;
        for p in walk.windows(2) {
            total += self.phase(p[0], p[1]).ok_or(Error::MissingEdge { from: p[0], to: p[1] })?;
        }
        Ok(if reduce { wrap_angle(total) } else { total })
    }
}

/// Edge (i, i+n) for every term and every pair of active sites. Zero-rate
/// terms still produce edges so their phases stay visible to `loop_flux`.
pub fn expand_to_graph(terms: &[HoppingTerm], spacers: &[usize], n_sites: usize) -> Result<CouplingGraph> {
    validate_terms(terms, n_sites)?;
    if let Some(&s) = spacers.iter().find(|&&s| s >= n_sites) {
        return Err(geo(format!("spacer {s} outside chain of {n_sites}")));
    }
    let mut edges = BTreeMap::new();
    for t in terms {
        for i in 0..n_sites - t.n {
            let j = i + t.n;
            if spacers.contains(&i) || spacers.contains(&j) {
                continue;
            }
            edges.insert((i, j), (t.omega, t.phi));
            edges.insert((j, i), (t.omega, -t.phi));
        }
    }
    let mut spacers = spacers.to_vec();
    spacers.sort_unstable();
    spacers.dedup();
    Ok(CouplingGraph { n_sites, spacers, edges })
}

/// Counter-clockwise triangles of the triangular ladder, with site i drawn at
/// (i/2, i mod 2). Flux is φ₂−2φ₁ for even i and 2φ₁−φ₂ for odd i.
pub fn triangular_plaquettes(n: usize) -> Vec<Vec<usize>> {
    (0..n.saturating_sub(2)).map(|i| if i % 2 == 0 { vec![i, i + 2, i + 1] } else { vec![i, i + 1, i + 2] }).collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::f64::consts::PI;

    #[test]
    fn ring_fig1() {
        let g = compile(&GeometrySpec::Ring { n: 5, loop_flux: 3.0 * PI / 4.0, omega: 1.0 }).unwrap();
        assert_eq!(g.terms[0].n, 1);
        assert!((g.terms[0].phi - 3.0 * PI / 20.0).abs() < 1e-15);
        assert_eq!(g.terms[1].n, 4);
        assert!((g.terms[1].phi + 3.0 * PI / 20.0).abs() < 1e-15);
        assert!((g.fluxes[0].loop_phase - 3.0 * PI / 4.0).abs() < 1e-14);
        assert!((g.fluxes[0].flux_quanta - 0.375).abs() < 1e-14);
    }

    #[test]
    fn small_ring_rejected() {
        assert!(compile(&GeometrySpec::Ring { n: 2, loop_flux: 0.0, omega: 1.0 }).is_err());
    }

    #[test]
    fn path_and_cycle() {
        let g = expand_to_graph(&[HoppingTerm::new(1, 1.0, 0.0)], &[], 5).unwrap();
        assert_eq!(g.edges().len(), 4);
        let g = expand_to_graph(&[HoppingTerm::new(1, 1.0, 0.0), HoppingTerm::new(4, 1.0, 0.0)], &[], 5).unwrap();
        assert_eq!(g.edges().len(), 5);
        assert!((0..5).all(|i| g.degree(i) == 2));
    }

    #[test]
    fn spacer_ladder_edges() {
        let g =
            compile(&GeometrySpec::RectangularLadder { rows: 2, cols: 5, omega: 1.0, rung: None, flux: 0.0, n: None })
                .unwrap();
        assert_eq!(g.n_ions, 11);
        assert_eq!(g.spacers, vec![5]);
        assert_eq!(g.terms.iter().map(|t| t.n).collect::<Vec<_>>(), vec![1, 6]);
        let graph = expand_to_graph(&g.terms, &g.spacers, 11).unwrap();
        assert_eq!(graph.degree(5), 0);
        assert!(graph.weight(4, 5).is_none() && graph.weight(5, 6).is_none());
        assert_eq!(graph.edges().len(), 4 + 4 + 5);
    }

    #[test]
    fn flux_on_ladder_rejected() {
        let r =
            compile(&GeometrySpec::RectangularLadder { rows: 2, cols: 3, omega: 1.0, rung: None, flux: 0.5, n: None });
        assert!(matches!(r, Err(Error::OpenGeometryFlux(_))));
    }

    #[test]
    fn triangular_plaquette_flux() {
        let (p1, p2) = (0.3, -0.7);
        let terms = [HoppingTerm::new(1, 1.0, p1), HoppingTerm::new(2, 0.5, p2)];
        let g = expand_to_graph(&terms, &[], 8).unwrap();
        for (i, c) in triangular_plaquettes(8).iter().enumerate() {
            let f = g.loop_flux(c, false).unwrap();
            let want = if i % 2 == 0 { p2 - 2.0 * p1 } else { 2.0 * p1 - p2 };
            assert!((f - want).abs() < 1e-14);
        }
    }

    #[test]
    fn missing_edge() {
        let g = expand_to_graph(&[HoppingTerm::new(1, 1.0, 0.0)], &[], 4).unwrap();
        assert!(matches!(g.loop_flux(&[0, 1, 3], false), Err(Error::MissingEdge { .. })));
    }

    #[test]
    fn torus_identification() {
        let (f1, f2) = (0.9, -0.4);
        let g = compile(&GeometrySpec::Torus { w: 4, h: 3, flux1: f1, flux2: f2, omega: 1.0, n: Some(12) }).unwrap();
        assert!((g.fluxes[0].loop_phase - f1).abs() < 1e-14);
        assert!((g.fluxes[1].loop_phase - f2).abs() < 1e-14);
        assert!(compile(&GeometrySpec::Torus { w: 4, h: 3, flux1: 0.0, flux2: 0.0, omega: 1.0, n: Some(10) }).is_err());
    }

    #[test]
    fn cylinder_flux() {
        let g = compile(&GeometrySpec::Cylinder { rows: 3, cols: 2, flux: 1.1, omega: 1.0, n: None }).unwrap();
        assert_eq!(g.n_ions, 9);
        assert_eq!(g.spacers, vec![2, 5, 8]);
        assert!((g.fluxes[0].loop_phase - 1.1).abs() < 1e-14);
    }

    #[test]
    fn mobius_parity() {
        assert!(compile(&GeometrySpec::MobiusLadder { n: 7, loop_flux: 0.0, omega: 1.0 }).is_err());
        let g = compile(&GeometrySpec::MobiusLadder { n: 8, loop_flux: 0.0, omega: 1.0 }).unwrap();
        assert_eq!(g.terms.iter().map(|t| t.n).collect::<Vec<_>>(), vec![1, 4, 7]);
    }
}
