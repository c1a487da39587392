//! Python bindings. Library conventions apply: rad/s and 0-based ion indices
//! (only the `run_cli` entry point speaks Hz and 1-based labels).

use pyo3::exceptions::{PyRuntimeError, PyValueError};
use pyo3::prelude::*;
use pyo3::types::PyList;

use ion_gauge::dynamics::{evolve_effective, integrate, phase_track, IntegrateOptions, Trajectory};
use ion_gauge::effective::{build_h_eff, diagonalize, EffectiveModel};
use ion_gauge::geometry::{self, GeometrySpec};
use ion_gauge::model::ChainConfig;
use ion_gauge::scheduler::{self, DriveSchedule, Knobs};
use ion_gauge::{cli, effective, magnus};

fn err(e: ion_gauge::Error) -> PyErr {
    if e.is_numerical() {
        PyRuntimeError::new_err(e.to_string())
    } else {
        PyValueError::new_err(e.to_string())
    }
}

/// serde value → Python object through the json module.
fn to_py<T: serde::Serialize>(py: Python<'_>, v: &T) -> PyResult<Py<PyAny>> {
    let s = serde_json::to_string(v).map_err(|e| PyValueError::new_err(e.to_string()))?;
    Ok(py.import("json")?.call_method1("loads", (s,))?.unbind())
}

#[pyclass(module = "iongauge", from_py_object)]
#[derive(Clone)]
pub struct HoppingTerm {
    #[pyo3(get, set)]
    pub n: usize,
    #[pyo3(get, set)]
    pub omega: f64,
    #[pyo3(get, set)]
    pub phi: f64,
    #[pyo3(get, set)]
    pub delta: f64,
}

#[pymethods]
impl HoppingTerm {
    #[new]
    #[pyo3(signature = (n, omega, phi=0.0, delta=0.0))]
    fn new(n: usize, omega: f64, phi: f64, delta: f64) -> Self {
        HoppingTerm { n, omega, phi, delta }
    }

    fn __repr__(&self) -> String {
        format!("HoppingTerm(n={}, omega={}, phi={}, delta={})", self.n, self.omega, self.phi, self.delta)
    }
}

impl From<&HoppingTerm> for geometry::HoppingTerm {
    fn from(t: &HoppingTerm) -> Self {
        geometry::HoppingTerm { n: t.n, omega: t.omega, phi: t.phi, delta: t.delta }
    }
}

impl From<&geometry::HoppingTerm> for HoppingTerm {
    fn from(t: &geometry::HoppingTerm) -> Self {
        HoppingTerm { n: t.n, omega: t.omega, phi: t.phi, delta: t.delta }
    }
}

fn core_terms(terms: &[HoppingTerm]) -> Vec<geometry::HoppingTerm> {
    terms.iter().map(Into::into).collect()
}

/// Compile a geometry given as a JSON spec, e.g.
/// `{"geometry": "ring", "n": 5, "loop_flux": 2.356}`.
/// Returns (n_ions, terms, spacers, fluxes).
#[pyfunction]
fn compile_geometry(py: Python<'_>, spec: &str) -> PyResult<(usize, Vec<HoppingTerm>, Vec<usize>, Py<PyAny>)> {
    let spec: GeometrySpec = serde_json::from_str(spec).map_err(|e| PyValueError::new_err(e.to_string()))?;
    let g = geometry::compile(&spec).map_err(err)?;
    let fluxes = to_py(py, &g.fluxes)?;
    Ok((g.n_ions, g.terms.iter().map(Into::into).collect(), g.spacers, fluxes))
}

/// E_k = 2Ω cos(2π(k+Φ)/N), flux Φ in quanta.
#[pyfunction]
fn ring_spectrum(n: usize, flux: f64, omega: f64) -> Vec<f64> {
    effective::ring_spectrum(n, flux, omega)
}

#[pyfunction]
#[pyo3(signature = (n, flux, omega, k=0))]
fn wavepacket_velocity(n: usize, flux: f64, omega: f64, k: i64) -> f64 {
    effective::wavepacket_velocity(n, k, flux, omega)
}

/// Sorted eigenvalues of the ideal spin model (optionally in one excitation sector).
#[pyfunction]
#[pyo3(signature = (terms, n_sites, sector=None, spacers=Vec::new()))]
fn effective_spectrum(
    terms: Vec<HoppingTerm>,
    n_sites: usize,
    sector: Option<usize>,
    spacers: Vec<usize>,
) -> PyResult<Vec<f64>> {
    let h = build_h_eff(&core_terms(&terms), n_sites, &spacers, &[], 0.0, sector).map_err(err)?;
    Ok(diagonalize(&h, 5000).map_err(err)?.0)
}

#[pyclass(module = "iongauge", from_py_object)]
#[derive(Clone)]
pub struct Chain {
    inner: ChainConfig,
}

#[pymethods]
impl Chain {
    /// Single COM mode: `gradient` Δ and `nu` in rad/s, η₁ of one ion.
    #[new]
    #[pyo3(signature = (n_ions, gradient, nu, eta1=0.1, fock_cutoff=3, spacers=Vec::new()))]
    fn new(
        n_ions: usize,
        gradient: f64,
        nu: f64,
        eta1: f64,
        fock_cutoff: usize,
        spacers: Vec<usize>,
    ) -> PyResult<Self> {
        let c = ChainConfig::com(n_ions, gradient, nu, eta1, fock_cutoff).map_err(err)?;
        Ok(Chain { inner: c.with_spacers(spacers).map_err(err)? })
    }

    #[getter]
    fn n_ions(&self) -> usize {
        self.inner.n_ions
    }

    #[getter]
    fn gradient(&self) -> f64 {
        self.inner.gradient
    }

    #[getter]
    fn active_sites(&self) -> Vec<usize> {
        self.inner.active_sites()
    }
}

#[pyclass(module = "iongauge", from_py_object)]
#[derive(Clone)]
pub struct Schedule {
    inner: DriveSchedule,
}

#[pymethods]
impl Schedule {
    /// Lay out the tones for `terms` (rates in rad/s).
    #[new]
    #[pyo3(signature = (terms, chain, alpha=20.0, red=true, epsilon=None, gradient_correction=true, grid_divisor=4, reduce=false))]
    #[allow(clippy::too_many_arguments)]
    fn new(
        terms: Vec<HoppingTerm>,
        chain: &Chain,
        alpha: f64,
        red: bool,
        epsilon: Option<f64>,
        gradient_correction: bool,
        grid_divisor: u32,
        reduce: bool,
    ) -> PyResult<Self> {
        let knobs = Knobs { alpha, red, epsilon, gradient_correction, grid_divisor, ..Knobs::default() };
        let t = core_terms(&terms);
        let s = if reduce {
            scheduler::reduce_tones(&t, &chain.inner, &knobs, 1e-9)
        } else {
            scheduler::schedule(&t, &chain.inner, &knobs)
        };
        Ok(Schedule { inner: s.map_err(err)? })
    }

    /// Tones as dicts (detuning, amplitude in rad/s).
    #[getter]
    fn tones(&self, py: Python<'_>) -> PyResult<Py<PyAny>> {
        to_py(py, &self.inner.tones)
    }

    #[getter]
    fn correction(&self) -> f64 {
        self.inner.correction
    }

    /// Stroboscopic period T in seconds.
    #[pyo3(signature = (bound=10_000))]
    fn period(&self, bound: u64) -> PyResult<f64> {
        Ok(scheduler::stroboscopic_period(&self.inner, bound).map_err(err)?.t)
    }

    /// Adiabaticity report as a dict.
    #[pyo3(signature = (chain, margin_ratio=20.0))]
    fn validate(&self, py: Python<'_>, chain: &Chain, margin_ratio: f64) -> PyResult<Py<PyAny>> {
        to_py(py, &scheduler::validate(&self.inner, &chain.inner, margin_ratio))
    }

    /// Second-order rates per range as dicts.
    fn realized_rates(&self, py: Python<'_>, chain: &Chain) -> PyResult<Py<PyAny>> {
        to_py(py, &scheduler::realized_rates(&self.inner, &chain.inner))
    }
}

fn parse_init(init: &str) -> PyResult<ion_gauge::dynamics::InitialStateSpec> {
    cli::parse_init(init, "ground", 0).map_err(err)
}

/// (times, P_e per sample per active slot, norms, packet velocity or None)
type RunOut = (Vec<f64>, Vec<Vec<f64>>, Vec<f64>, Option<f64>);

fn unpack(t: &Trajectory) -> RunOut {
    let v = if t.sites.len() >= 3 { phase_track(t, 0.2).ok().map(|f| f.velocity) } else { None };
    (
        t.records.iter().map(|r| r.time).collect(),
        t.records.iter().map(|r| r.p_excited.clone()).collect(),
        t.records.iter().map(|r| r.norm).collect(),
        v,
    )
}

/// Full spin-phonon dynamics. `init` uses the command-line syntax with
/// 1-based labels: "site:K", "packet:k[,phi0]", "product:K1,K2".
#[pyfunction]
#[pyo3(signature = (schedule, chain, times, init="packet:0", tol=1e-9))]
fn simulate(
    py: Python<'_>,
    schedule: &Schedule,
    chain: &Chain,
    times: Vec<f64>,
    init: &str,
    tol: f64,
) -> PyResult<RunOut> {
    let spec = parse_init(init)?;
    let (s, c) = (schedule.inner.clone(), chain.inner.clone());
    let tr = py.detach(move || integrate(&spec, &s, &c, &times, &IntegrateOptions::with_tol(tol))).map_err(err)?;
    Ok(unpack(&tr))
}

/// Ideal spin dynamics of `terms` on `n_sites` sites.
#[pyfunction]
#[pyo3(signature = (terms, n_sites, times, init="packet:0"))]
fn simulate_effective(terms: Vec<HoppingTerm>, n_sites: usize, times: Vec<f64>, init: &str) -> PyResult<RunOut> {
    let spec = parse_init(init)?;
    let model = EffectiveModel::new(n_sites, core_terms(&terms), Vec::new(), Vec::new()).map_err(err)?;
    let sites: Vec<usize> = (0..n_sites).collect();
    let amps = spec.spin_amplitudes(&sites).map_err(err)?;
    Ok(unpack(&evolve_effective(&amps, &model, &times).map_err(err)?))
}

/// Numeric Magnus terms of a single-term schedule against closed forms.
#[pyfunction]
fn verify_magnus(py: Python<'_>, schedule: &Schedule, chain: &Chain) -> PyResult<Py<PyAny>> {
    let t = scheduler::stroboscopic_period(&schedule.inner, 10_000).map_err(err)?.t;
    to_py(py, &magnus::verify(&schedule.inner, &chain.inner, t).map_err(err)?)
}

/// Run the command line with `args` (without the program name); returns the exit code.
#[pyfunction]
fn run_cli(py: Python<'_>, args: &Bound<'_, PyList>) -> PyResult<i32> {
    let mut argv = vec!["ion-gauge".to_string()];
    for a in args.iter() {
        argv.push(a.extract::<String>()?);
    }
    Ok(py.detach(move || cli::main_with_args(argv)))
}

#[pymodule]
fn iongauge(m: &Bound<'_, PyModule>) -> PyResult<()> {
    m.add_class::<HoppingTerm>()?;
    m.add_class::<Chain>()?;
    m.add_class::<Schedule>()?;
    m.add_function(wrap_pyfunction!(compile_geometry, m)?)?;
    m.add_function(wrap_pyfunction!(ring_spectrum, m)?)?;
    m.add_function(wrap_pyfunction!(wavepacket_velocity, m)?)?;
    m.add_function(wrap_pyfunction!(effective_spectrum, m)?)?;
    m.add_function(wrap_pyfunction!(simulate, m)?)?;
    m.add_function(wrap_pyfunction!(simulate_effective, m)?)?;
    m.add_function(wrap_pyfunction!(verify_magnus, m)?)?;
    m.add_function(wrap_pyfunction!(run_cli, m)?)?;
    m.add("__version__", env!("CARGO_PKG_VERSION"))?;
    Ok(())
}
