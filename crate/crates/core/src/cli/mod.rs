//! `ion-gauge` command line. Frequencies on flags and in files are in Hz, ion
//! labels are 1-based; the library works in rad/s with 0-based indices.
//!
//! Exit codes: 0 success, 2 usage or schema problem, 3 numerical failure
//! (stiff integration, phonon leakage, incommensurate tones, failed checks).

pub mod experiments;
pub mod files;

use std::ffi::OsString;
use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand, ValueEnum};
use serde::Serialize;
use serde_json::{json, Value};

use crate::dynamics::{
    compare, evolve_effective, integrate, phase_track, InitialStateSpec, IntegrateOptions, PhononInit, SpinInit,
    Trajectory,
};
use crate::effective::EffectiveModel;
use crate::geometry::{compile, GeometrySpec};
use crate::magnus;
use crate::model::ChainConfig;
use crate::scheduler::{
    rate_for_beta, reduce_tones, schedule, stroboscopic_period, validate, DriveSchedule, Knobs, RedPhaseRule,
};
use crate::units::{hz_to_rad, rad_to_hz};
use crate::{Error, Result};

use experiments::ChainParams;
use files::{
    manifest_path, resolve_output, write_csv, write_json, ChainFile, FileHash, Inputs, RunManifest, ScheduleFile,
    TermsFile, SCHEMA_VERSION,
};

#[derive(Parser, Debug)]
#[command(name = "ion-gauge", version, about = "Synthetic gauge fields in trapped-ion chains")]
#[command(args_conflicts_with_subcommands = true)]
#[command(after_help = "All frequencies are in Hz and ion labels are 1-based.\n\
Relative output paths are resolved against $ION_GAUGE_OUTPUT_ROOT when it is set.")]
pub struct Cli {
    /// Replay the run recorded in a manifest file
    #[arg(long)]
    pub manifest: Option<PathBuf>,
    #[command(subcommand)]
    pub command: Option<Command>,
}

#[derive(Subcommand, Debug)]
pub enum Command {
    /// Compile a lattice geometry into hopping terms
    Compile(CompileArgs),
    /// Lay out the drive tones realizing a terms file
    Schedule(ScheduleArgs),
    /// Check the adiabaticity margins of a schedule
    Validate(ValidateArgs),
    /// Integrate the full spin-phonon (or the effective spin) dynamics
    Simulate(SimulateArgs),
    /// Run full and effective dynamics side by side
    Compare(CompareArgs),
    /// Check the numeric Magnus terms against closed forms
    VerifyMagnus(VerifyArgs),
    /// Figure-data recipes
    Experiment {
        #[command(subcommand)]
        which: Experiment,
    },
}

#[derive(Args, Debug, Clone, Serialize)]
pub struct ChainArgs {
    /// Chain description (JSON, Hz); overrides the flags below
    #[arg(long)]
    pub chain: Option<PathBuf>,
    /// Number of ions (default: taken from the input)
    #[arg(long)]
    pub ions: Option<usize>,
    /// Qubit-frequency step between neighbouring ions, Hz
    #[arg(long = "gradient", default_value_t = 2e3)]
    pub gradient_hz: f64,
    /// COM mode frequency, Hz
    #[arg(long = "nu", default_value_t = 2e6)]
    pub nu_hz: f64,
    /// Lamb-Dicke parameter of a single ion (η₁)
    #[arg(long, default_value_t = 0.1)]
    pub eta1: f64,
    /// Fock cutoff of each mode
    #[arg(long, default_value_t = 3)]
    pub cutoff: usize,
}

impl ChainArgs {
    fn params(&self) -> ChainParams {
        ChainParams { gradient_hz: self.gradient_hz, nu_hz: self.nu_hz, eta1: self.eta1, cutoff: self.cutoff }
    }

    fn build(&self, inputs: &mut Inputs, default_n: Option<usize>) -> Result<ChainConfig> {
        if let Some(p) = &self.chain {
            let f: ChainFile = inputs.json(p)?;
            return f.to_config();
        }
        let n = self
            .ions
            .or(default_n)
            .ok_or_else(|| Error::InvalidChain("number of ions unknown: pass --ions or --chain".into()))?;
        self.params().chain(n)
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, ValueEnum, Serialize)]
pub enum GeometryKind {
    Ring,
    Triangular,
    Rectangular,
    Cylinder,
    Mobius,
    Helix,
    Torus,
}

#[derive(Args, Debug, Clone, Serialize)]
pub struct CompileArgs {
    /// Geometry given inline
    #[arg(long, required_unless_present = "spec", conflicts_with = "spec")]
    pub geometry: Option<GeometryKind>,
    /// Geometry specification file (JSON)
    #[arg(long)]
    pub spec: Option<PathBuf>,
    /// Number of ions (required for ring, triangular and mobius; a check otherwise)
    #[arg(long)]
    pub n: Option<usize>,
    /// Loop phase in radians (ring, mobius)
    #[arg(long, default_value_t = 0.0, allow_hyphen_values = true)]
    pub loop_flux: f64,
    /// Hop rate, Hz
    #[arg(long, default_value_t = 100.0)]
    pub omega: f64,
    /// Triangular ladder: nearest-neighbour rate, Hz (default --omega)
    #[arg(long)]
    pub j1: Option<f64>,
    /// Triangular ladder: J₂/J₁
    #[arg(long, default_value_t = 0.5)]
    pub j2_over_j1: f64,
    #[arg(long, default_value_t = 0.0, allow_hyphen_values = true)]
    pub phi1: f64,
    #[arg(long, default_value_t = 0.0, allow_hyphen_values = true)]
    pub phi2: f64,
    #[arg(long)]
    pub rows: Option<usize>,
    #[arg(long)]
    pub cols: Option<usize>,
    /// Rung rate of the rectangular ladder, Hz (default --omega)
    #[arg(long)]
    pub rung: Option<f64>,
    /// Plaquette flux in radians (rectangular, cylinder, helix)
    #[arg(long, default_value_t = 0.0, allow_hyphen_values = true)]
    pub flux: f64,
    #[arg(long)]
    pub w: Option<usize>,
    #[arg(long)]
    pub h: Option<usize>,
    #[arg(long, default_value_t = 0.0, allow_hyphen_values = true)]
    pub flux1: f64,
    #[arg(long, default_value_t = 0.0, allow_hyphen_values = true)]
    pub flux2: f64,
    #[arg(long, default_value = "terms.json")]
    pub out: PathBuf,
}

#[derive(Args, Debug, Clone, Serialize)]
pub struct ScheduleArgs {
    /// Terms file from `compile`
    #[arg(long)]
    pub terms: PathBuf,
    #[command(flatten)]
    pub chain: ChainArgs,
    /// ξ = α·N·Δ for the first term when --xi is not given
    #[arg(long, default_value_t = crate::scheduler::DEFAULT_ALPHA)]
    pub alpha: f64,
    /// Rescale the rates so that Δ/Ω_{n,b} = β for the fastest term
    #[arg(long)]
    pub beta: Option<f64>,
    /// Sideband detunings per term, Hz (comma separated)
    #[arg(long, value_delimiter = ',')]
    pub xi: Option<Vec<f64>>,
    /// Blue/red asymmetry ε, Hz (automatic if omitted)
    #[arg(long)]
    pub epsilon: Option<f64>,
    /// Drop the red-sideband pairs
    #[arg(long)]
    pub blue_only: bool,
    /// Offset the red pair phases by π (the hops then cancel)
    #[arg(long)]
    pub red_pi_offset: bool,
    /// Keep the nominal gradient (no Stark correction)
    #[arg(long)]
    pub no_correction: bool,
    /// Share one tone ladder between terms
    #[arg(long)]
    pub reduce: bool,
    /// Pair amplitude cap as a fraction of ν
    #[arg(long, default_value_t = 0.1)]
    pub amplitude_cap: f64,
    #[arg(long, default_value_t = crate::scheduler::DEFAULT_MARGIN_RATIO)]
    pub margin_ratio: f64,
    /// Automatic ξ and ε sit on a Δ/divisor grid
    #[arg(long, default_value_t = 4)]
    pub grid_divisor: u32,
    #[arg(long, default_value_t = 10_000)]
    pub period_bound: u64,
    #[arg(long, default_value = "schedule.json")]
    pub out: PathBuf,
}

#[derive(Args, Debug, Clone, Serialize)]
pub struct ValidateArgs {
    #[arg(long)]
    pub schedule: PathBuf,
    #[arg(long, default_value_t = crate::scheduler::DEFAULT_MARGIN_RATIO)]
    pub margin_ratio: f64,
    /// Exit 3 when any margin is flagged
    #[arg(long)]
    pub strict: bool,
    #[arg(long, default_value = "validation.json")]
    pub out: PathBuf,
}

#[derive(Args, Debug, Clone, Serialize)]
pub struct RunArgs {
    /// Schedule file from `schedule`
    #[arg(long)]
    pub schedule: PathBuf,
    /// site:K | packet:k[,phi0] | product:K1,K2,...
    #[arg(long, default_value = "packet:0")]
    pub init: String,
    /// ground | fock:n[,n2,...] | thermal:nbar[,samples]
    #[arg(long, default_value = "ground")]
    pub phonons: String,
    /// Seed of the thermal-state sampler
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    /// End time in seconds (uniform sampling)
    #[arg(long, conflicts_with = "periods")]
    pub t_end: Option<f64>,
    /// Duration in stroboscopic periods; samples at multiples of T
    #[arg(long)]
    pub periods: Option<f64>,
    #[arg(long, default_value_t = 100)]
    pub samples: usize,
    #[arg(long, default_value_t = 1e-9)]
    pub tol: f64,
    /// Step ceiling as a fraction of the fastest drive period
    #[arg(long, default_value_t = 0.05)]
    pub step_fraction: f64,
    /// Reruns with a larger Fock cutoff on leakage
    #[arg(long, default_value_t = 2)]
    pub max_reruns: usize,
    /// On-site potentials V_k per ion, Hz (comma separated)
    #[arg(long, value_delimiter = ',', allow_hyphen_values = true)]
    pub potentials: Option<Vec<f64>>,
}

#[derive(Args, Debug, Clone, Serialize)]
pub struct SimulateArgs {
    #[command(flatten)]
    pub run: RunArgs,
    /// Evolve the ideal spin model of the schedule's target terms instead
    #[arg(long)]
    pub effective: bool,
    /// Also write the sampled states (JSON)
    #[arg(long)]
    pub snapshots: Option<PathBuf>,
    #[arg(long, default_value = "trajectory.csv")]
    pub out: PathBuf,
}

#[derive(Args, Debug, Clone, Serialize)]
pub struct CompareArgs {
    #[command(flatten)]
    pub run: RunArgs,
    /// Trajectory CSV of the full run
    #[arg(long)]
    pub full_out: Option<PathBuf>,
    /// Trajectory CSV of the effective run
    #[arg(long)]
    pub effective_out: Option<PathBuf>,
    #[arg(long, default_value = "comparison.csv")]
    pub out: PathBuf,
}

#[derive(Args, Debug, Clone, Serialize)]
pub struct VerifyArgs {
    /// Verify this (single-term) schedule instead of building one
    #[arg(long)]
    pub schedule: Option<PathBuf>,
    #[arg(long, default_value_t = 3)]
    pub n: usize,
    #[arg(long, default_value_t = crate::scheduler::DEFAULT_ALPHA)]
    pub alpha: f64,
    #[arg(long, default_value_t = crate::scheduler::DEFAULT_BETA)]
    pub beta: f64,
    /// Hop range of the single blue pair
    #[arg(long, default_value_t = 1)]
    pub range: usize,
    #[arg(long, default_value_t = 0.0, allow_hyphen_values = true)]
    pub phi: f64,
    #[arg(long = "gradient", default_value_t = 2e3)]
    pub gradient_hz: f64,
    #[arg(long = "nu", default_value_t = 2e6)]
    pub nu_hz: f64,
    #[arg(long, default_value_t = 0.1)]
    pub eta1: f64,
    #[arg(long, default_value_t = 3)]
    pub cutoff: usize,
    /// Bound on ‖χ₁‖/(ηΩ_bT)
    #[arg(long, default_value_t = 1e-8)]
    pub chi1_threshold: f64,
    /// Bound on the relative closed-form residuals of χ₂
    #[arg(long, default_value_t = 1e-4)]
    pub closed_threshold: f64,
    #[arg(long, default_value = "magnus.json")]
    pub out: PathBuf,
}

#[derive(Subcommand, Debug, Clone, Serialize)]
pub enum Experiment {
    /// Circulating wave packet on the flux ring (heatmap data)
    AbRing(AbRingArgs),
    /// Packet velocity against flux, full and effective dynamics
    FluxVelocitySweep(SweepArgs),
    /// Packet under a linearly growing flux
    BlochOscillation(BlochArgs),
    /// Triangular-ladder ground state and low levels against J₂/J₁
    TriangularEd(TriangularArgs),
    /// Rectangular ladder carved by spacer ions
    SpacerLadder(SpacerArgs),
    /// Shared-tone {1,2} schedule: rates against tone amplitudes
    AppendixAEquivalence(AppendixArgs),
    /// Coupling against N at fixed α, β, η₁ and field
    ScalingLaw(ScalingArgs),
}

#[derive(Args, Debug, Clone, Serialize)]
pub struct ExperimentChain {
    #[arg(long = "gradient", default_value_t = 2e3)]
    pub gradient_hz: f64,
    #[arg(long = "nu", default_value_t = 2e6)]
    pub nu_hz: f64,
    #[arg(long, default_value_t = 0.1)]
    pub eta1: f64,
    #[arg(long, default_value_t = 3)]
    pub cutoff: usize,
}

impl ExperimentChain {
    fn params(&self) -> ChainParams {
        ChainParams { gradient_hz: self.gradient_hz, nu_hz: self.nu_hz, eta1: self.eta1, cutoff: self.cutoff }
    }
}

#[derive(Args, Debug, Clone, Serialize)]
pub struct AbRingArgs {
    #[arg(long, default_value_t = 5)]
    pub n: usize,
    /// Loop phase in radians
    #[arg(long, default_value_t = 2.356, allow_hyphen_values = true)]
    pub loop_flux: f64,
    #[arg(long, default_value_t = 20.0)]
    pub alpha: f64,
    #[arg(long, default_value_t = 40.0)]
    pub beta: f64,
    #[arg(long, default_value_t = 1.0)]
    pub revolutions: f64,
    #[arg(long, default_value_t = 60)]
    pub max_samples: usize,
    #[arg(long, default_value_t = 1e-9)]
    pub tol: f64,
    /// Skip the full spin-phonon run
    #[arg(long)]
    pub effective_only: bool,
    #[command(flatten)]
    pub chain: ExperimentChain,
    #[arg(long, default_value = "ab-ring")]
    pub out_dir: PathBuf,
}

#[derive(Args, Debug, Clone, Serialize)]
pub struct SweepArgs {
    #[arg(long, default_value_t = 5)]
    pub n: usize,
    #[arg(long, default_value_t = 17)]
    pub points: usize,
    #[arg(long, default_value_t = 20.0)]
    pub alpha: f64,
    /// Large β keeps the cross-talk corrections of the full dynamics below 1%
    #[arg(long, default_value_t = 2560.0)]
    pub beta: f64,
    #[arg(long, default_value_t = 40)]
    pub max_samples: usize,
    #[arg(long, default_value_t = 1e-8)]
    pub tol: f64,
    #[arg(long, default_value_t = 0.1)]
    pub step_fraction: f64,
    #[arg(long)]
    pub effective_only: bool,
    #[command(flatten)]
    pub chain: ExperimentChain,
    #[arg(long, default_value = "flux-velocity-sweep")]
    pub out_dir: PathBuf,
}

#[derive(Args, Debug, Clone, Serialize)]
pub struct BlochArgs {
    #[arg(long, default_value_t = 6)]
    pub n: usize,
    /// Phase ramp δ₁ of the n = 1 term, in units of the hop rate
    #[arg(long, default_value_t = 0.1)]
    pub delta1: f64,
    #[arg(long, default_value_t = 20.0)]
    pub alpha: f64,
    #[arg(long, default_value_t = 40.0)]
    pub beta: f64,
    /// Duration in Bloch periods
    #[arg(long, default_value_t = 2.0)]
    pub periods: f64,
    #[arg(long, default_value_t = 200)]
    pub samples: usize,
    /// Also integrate the full spin-phonon dynamics
    #[arg(long)]
    pub full: bool,
    #[arg(long, default_value_t = 1e-9)]
    pub tol: f64,
    #[command(flatten)]
    pub chain: ExperimentChain,
    #[arg(long, default_value = "bloch-oscillation")]
    pub out_dir: PathBuf,
}

#[derive(Args, Debug, Clone, Serialize)]
pub struct TriangularArgs {
    #[arg(long, default_value_t = 8)]
    pub n: usize,
    #[arg(long, default_value_t = 0.0)]
    pub j_min: f64,
    #[arg(long, default_value_t = 1.5)]
    pub j_max: f64,
    #[arg(long, default_value_t = 31)]
    pub points: usize,
    #[arg(long, default_value_t = 0.0, allow_hyphen_values = true)]
    pub phi1: f64,
    #[arg(long, default_value_t = 0.0, allow_hyphen_values = true)]
    pub phi2: f64,
    #[arg(long, default_value_t = 4)]
    pub levels: usize,
    #[arg(long, default_value = "triangular-ed")]
    pub out_dir: PathBuf,
}

#[derive(Args, Debug, Clone, Serialize)]
pub struct SpacerArgs {
    #[arg(long, default_value_t = 2)]
    pub rows: usize,
    #[arg(long, default_value_t = 5)]
    pub cols: usize,
    #[arg(long, default_value = "spacer-ladder")]
    pub out_dir: PathBuf,
}

#[derive(Args, Debug, Clone, Serialize)]
pub struct AppendixArgs {
    #[arg(long, default_value_t = 20.0)]
    pub alpha: f64,
    #[arg(long, default_value_t = 160.0)]
    pub beta: f64,
    /// Requested J₂/J₁
    #[arg(long, default_value_t = 0.5)]
    pub ratio: f64,
    /// Factor applied to one tone at a time
    #[arg(long, default_value_t = 1.5)]
    pub scale: f64,
    #[command(flatten)]
    pub chain: ExperimentChain,
    #[arg(long, default_value = "appendix-a-equivalence")]
    pub out_dir: PathBuf,
}

#[derive(Args, Debug, Clone, Serialize)]
pub struct ScalingArgs {
    #[arg(long, default_value_t = 3)]
    pub n_min: usize,
    #[arg(long, default_value_t = 10)]
    pub n_max: usize,
    #[arg(long, default_value_t = 20.0)]
    pub alpha: f64,
    #[arg(long, default_value_t = 40.0)]
    pub beta: f64,
    #[arg(long, default_value_t = 0.1)]
    pub eta1: f64,
    /// Pair Rabi frequency Ω₀, Hz
    #[arg(long, default_value_t = 1e5)]
    pub omega0: f64,
    #[arg(long = "nu", default_value_t = 2e6)]
    pub nu_hz: f64,
    #[arg(long, default_value = "scaling-law")]
    pub out_dir: PathBuf,
}

// ---------------------------------------------------------------------------
// entry points

/// Parse and run; returns the process exit code.
pub fn main_with_args<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let args: Vec<OsString> = args.into_iter().map(Into::into).collect();
    let cli = match Cli::try_parse_from(&args) {
        Ok(c) => c,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() { 2 } else { 0 };
        }
    };
    let argv: Vec<String> = args.iter().skip(1).map(|a| a.to_string_lossy().into_owned()).collect();
    let outcome = match (cli.manifest, cli.command) {
        (Some(m), _) => replay(&m),
        (None, Some(cmd)) => run(cmd, argv),
        (None, None) => {
            eprintln!("error: a subcommand or --manifest is required (see --help)");
            return 2;
        }
    };
    match outcome {
        Ok(code) => code,
        Err(e) => {
            eprintln!("error: {e}");
            if e.is_numerical() {
                3
            } else {
                2
            }
        }
    }
}

fn replay(path: &Path) -> Result<i32> {
    let m = RunManifest::load(path)?;
    let stale = m.stale_inputs();
    if !stale.is_empty() {
        return Err(Error::Mismatch(format!("inputs changed since the manifest was written: {stale:?}")));
    }
    if m.argv.iter().any(|a| a == "--manifest") {
        return Err(Error::Mismatch("manifest argv cannot itself replay a manifest".into()));
    }
    let mut args = vec![OsString::from("ion-gauge")];
    args.extend(m.argv.iter().map(OsString::from));
    let cli = Cli::try_parse_from(&args).map_err(|e| Error::Mismatch(format!("manifest argv: {e}")))?;
    let cmd = cli.command.ok_or_else(|| Error::Mismatch("manifest has no subcommand".into()))?;
    run(cmd, m.argv)
}

/// Run context: collects inputs and outputs for the manifest.
struct Ctx {
    subcommand: String,
    argv: Vec<String>,
    parameters: Value,
    inputs: Inputs,
    outputs: Vec<FileHash>,
    tolerances: serde_json::Map<String, Value>,
    seed: Option<u64>,
}

impl Ctx {
    fn new<P: Serialize>(subcommand: &str, argv: Vec<String>, params: &P) -> Result<Self> {
        Ok(Ctx {
            subcommand: subcommand.into(),
            argv,
            parameters: serde_json::to_value(params)?,
            inputs: Inputs::default(),
            outputs: Vec::new(),
            tolerances: serde_json::Map::new(),
            seed: None,
        })
    }

    fn tolerance(&mut self, name: &str, v: f64) {
        self.tolerances.insert(name.into(), json!(v));
    }

    fn digest(&self) -> String {
        self.inputs.digest(&self.parameters)
    }

    fn json<T: Serialize>(&mut self, path: &Path, v: &T) -> Result<()> {
        self.outputs.push(write_json(path, v)?);
        Ok(())
    }

    fn csv(&mut self, path: &Path, body: &str) -> Result<()> {
        let h = self.digest();
        self.outputs.push(write_csv(path, &h, body)?);
        Ok(())
    }

    fn finish(self, manifest: &Path, output_dir: &Path, results: Value) -> Result<()> {
        let m = RunManifest {
            schema_version: SCHEMA_VERSION,
            tool_version: env!("CARGO_PKG_VERSION").into(),
            subcommand: self.subcommand.clone(),
            input_sha256: self.digest(),
            argv: self.argv,
            parameters: self.parameters,
            inputs: self.inputs.files,
            tolerances: self.tolerances,
            seed: self.seed,
            output_dir: output_dir.display().to_string(),
            outputs: self.outputs,
            results,
        };
        write_json(manifest, &m)?;
        Ok(())
    }
}

fn parent_dir(p: &Path) -> PathBuf {
    match p.parent() {
        Some(d) if !d.as_os_str().is_empty() => d.to_path_buf(),
        _ => PathBuf::from("."),
    }
}

fn run(cmd: Command, argv: Vec<String>) -> Result<i32> {
    match cmd {
        Command::Compile(a) => cmd_compile(&a, argv),
        Command::Schedule(a) => cmd_schedule(&a, argv),
        Command::Validate(a) => cmd_validate(&a, argv),
        Command::Simulate(a) => cmd_simulate(&a, argv),
        Command::Compare(a) => cmd_compare(&a, argv),
        Command::VerifyMagnus(a) => cmd_verify_magnus(&a, argv),
        Command::Experiment { which } => cmd_experiment(&which, argv),
    }
}

// ---------------------------------------------------------------------------
// compile

fn need(v: Option<usize>, flag: &str, what: &str) -> Result<usize> {
    v.ok_or_else(|| Error::Geometry(format!("{what} needs --{flag}")))
}

fn inline_spec(a: &CompileArgs, kind: GeometryKind) -> Result<GeometrySpec> {
    Ok(match kind {
        GeometryKind::Ring => GeometrySpec::Ring { n: need(a.n, "n", "ring")?, loop_flux: a.loop_flux, omega: a.omega },
        GeometryKind::Triangular => {
            let j1 = a.j1.unwrap_or(a.omega);
            GeometrySpec::TriangularLadder {
                n: need(a.n, "n", "triangular ladder")?,
                j1,
                j2: a.j2_over_j1 * j1,
                phi1: a.phi1,
                phi2: a.phi2,
            }
        }
        GeometryKind::Rectangular => GeometrySpec::RectangularLadder {
            rows: need(a.rows, "rows", "rectangular ladder")?,
            cols: need(a.cols, "cols", "rectangular ladder")?,
            omega: a.omega,
            rung: a.rung,
            flux: a.flux,
            n: a.n,
        },
        GeometryKind::Cylinder => GeometrySpec::Cylinder {
            rows: need(a.rows, "rows", "cylinder")?,
            cols: need(a.cols, "cols", "cylinder")?,
            flux: a.flux,
            omega: a.omega,
            n: a.n,
        },
        GeometryKind::Mobius => {
            GeometrySpec::MobiusLadder { n: need(a.n, "n", "mobius ladder")?, loop_flux: a.loop_flux, omega: a.omega }
        }
        GeometryKind::Helix => GeometrySpec::Helix {
            w: need(a.w, "w", "helix")?,
            h: need(a.h, "h", "helix")?,
            flux: a.flux,
            omega: a.omega,
            n: a.n,
        },
        GeometryKind::Torus => GeometrySpec::Torus {
            w: need(a.w, "w", "torus")?,
            h: need(a.h, "h", "torus")?,
            flux1: a.flux1,
            flux2: a.flux2,
            omega: a.omega,
            n: a.n,
        },
    })
}

fn cmd_compile(a: &CompileArgs, argv: Vec<String>) -> Result<i32> {
    let mut ctx = Ctx::new("compile", argv, a)?;
    let spec = match (&a.spec, a.geometry) {
        (Some(p), _) => ctx.inputs.json::<GeometrySpec>(p)?,
        (None, Some(k)) => inline_spec(a, k)?,
        (None, None) => return Err(Error::Geometry("pass --geometry or --spec".into())),
    };
    let g = compile(&spec)?;
    let out = resolve_output(&a.out);
    let file = TermsFile::from_compiled(&g, ctx.digest());
    ctx.json(&out, &file)?;
    for t in &file.terms {
        println!("n={} omega={} Hz phi={:.6} rad", t.n, t.omega, t.phi);
    }
    for f in &file.fluxes {
        println!("flux {}: {:.6} rad = {:.6} quanta", f.name, f.loop_phase, f.flux_quanta);
    }
    ctx.finish(&manifest_path(&out), &parent_dir(&out), json!({ "n_ions": g.n_ions, "terms": g.terms.len() }))?;
    Ok(0)
}

// ---------------------------------------------------------------------------
// schedule / validate

fn cmd_schedule(a: &ScheduleArgs, argv: Vec<String>) -> Result<i32> {
    let mut ctx = Ctx::new("schedule", argv, a)?;
    let tf: TermsFile = ctx.inputs.json(&a.terms)?;
    let mut terms = tf.terms()?;
    let mut chain = a.chain.build(&mut ctx.inputs, Some(tf.n_ions))?;
    if chain.n_ions != tf.n_ions {
        return Err(Error::Mismatch(format!("terms need {} ions, chain has {}", tf.n_ions, chain.n_ions)));
    }
    if chain.spacers.is_empty() && !tf.spacers.is_empty() {
        chain = chain.with_spacers(tf.spacers()?)?;
    }
    let red = !a.blue_only;
    if let Some(beta) = a.beta {
        let max = terms.iter().map(|t| t.omega).fold(0.0, f64::max);
        if !(max > 0.0) {
            return Err(Error::Schedule("--beta needs a term with a positive rate".into()));
        }
        let k = rate_for_beta(chain.gradient, beta, red) / max;
        terms.iter_mut().for_each(|t| t.omega *= k);
    }
    let knobs = Knobs {
        alpha: a.alpha,
        xi: a.xi.as_ref().map(|v| v.iter().map(|&x| hz_to_rad(x)).collect()),
        epsilon: a.epsilon.map(hz_to_rad),
        red,
        red_rule: if a.red_pi_offset { RedPhaseRule::PiOffset } else { RedPhaseRule::Matched },
        gradient_correction: !a.no_correction,
        amplitude_cap: a.amplitude_cap,
        margin_ratio: a.margin_ratio,
        grid_divisor: a.grid_divisor,
        period_bound: a.period_bound,
        ..Knobs::default()
    };
    let s = if a.reduce { reduce_tones(&terms, &chain, &knobs, 1e-9)? } else { schedule(&terms, &chain, &knobs)? };
    let period = match stroboscopic_period(&s, a.period_bound) {
        Ok(p) => Some(p),
        Err(e) => {
            eprintln!("warning: {e}");
            None
        }
    };
    let report = validate(&s, &chain, a.margin_ratio);
    for f in &report.flags {
        eprintln!("warning: {f}");
    }
    let out = resolve_output(&a.out);
    let file = ScheduleFile::new(&s, &chain, period, &report, ctx.digest());
    ctx.tolerance("margin_ratio", a.margin_ratio);
    ctx.json(&out, &file)?;
    println!(
        "{} tones, T = {} s, alpha = {:.3}, beta = {:.3}, flags = {}",
        s.tones.len(),
        period.map_or("n/a".into(), |p| format!("{:.6e}", p.t)),
        file.metadata.alpha,
        file.metadata.beta,
        report.flags.len()
    );
    ctx.finish(&manifest_path(&out), &parent_dir(&out), json!({ "margins_ok": report.ok() }))?;
    Ok(0)
}

fn load_schedule(ctx: &mut Ctx, p: &Path) -> Result<(ScheduleFile, DriveSchedule, ChainConfig)> {
    let f: ScheduleFile = ctx.inputs.json(p)?;
    let s = f.to_schedule()?;
    let c = f.chain()?;
    Ok((f, s, c))
}

fn cmd_validate(a: &ValidateArgs, argv: Vec<String>) -> Result<i32> {
    let mut ctx = Ctx::new("validate", argv, a)?;
    let (_, s, chain) = load_schedule(&mut ctx, &a.schedule)?;
    let report = validate(&s, &chain, a.margin_ratio);
    let rec = files::MarginsRecord::from_report(&report);
    let out = resolve_output(&a.out);
    ctx.tolerance("margin_ratio", a.margin_ratio);
    ctx.json(&out, &json!({ "schema_version": SCHEMA_VERSION, "input_sha256": ctx.digest(), "margins": rec }))?;
    if report.ok() {
        println!("all margins pass (census ratio {:.3})", report.census_ratio);
    } else {
        for f in &report.flags {
            println!("FLAG {f}");
        }
    }
    ctx.finish(&manifest_path(&out), &parent_dir(&out), json!({ "ok": report.ok() }))?;
    Ok(if a.strict && !report.ok() { 3 } else { 0 })
}

// ---------------------------------------------------------------------------
// simulate / compare

fn parse_list(s: &str) -> Result<Vec<f64>> {
    s.split(',')
        .filter(|x| !x.trim().is_empty())
        .map(|x| x.trim().parse::<f64>().map_err(|e| Error::Mismatch(format!("bad number {x:?}: {e}"))))
        .collect()
}

fn label(x: f64) -> Result<usize> {
    if x < 1.0 || x.fract() != 0.0 {
        return Err(Error::LabelOutOfRange(format!("ion label {x} must be a positive integer")));
    }
    Ok(x as usize - 1)
}

pub fn parse_init(init: &str, phonons: &str, seed: u64) -> Result<InitialStateSpec> {
    let (kind, rest) = init.split_once(':').unwrap_or((init, ""));
    let spin = match kind {
        "site" => {
            let v = parse_list(rest)?;
            if v.len() != 1 {
                return Err(Error::Mismatch("site:K takes one label".into()));
            }
            SpinInit::SingleExcitation { site: label(v[0])? }
        }
        "packet" => {
            let v = parse_list(rest)?;
            SpinInit::WavePacket { k: v.first().copied().unwrap_or(0.0) as i64, phi0: v.get(1).copied().unwrap_or(0.0) }
        }
        "product" => SpinInit::Product { excited: parse_list(rest)?.into_iter().map(label).collect::<Result<_>>()? },
        other => return Err(Error::Mismatch(format!("unknown initial state {other:?}"))),
    };
    let (pk, prest) = phonons.split_once(':').unwrap_or((phonons, ""));
    let phonon = match pk {
        "ground" => PhononInit::Ground,
        "fock" => PhononInit::Fock { n: parse_list(prest)?.into_iter().map(|x| x as usize).collect() },
        "thermal" => {
            let v = parse_list(prest)?;
            let nbar = *v.first().ok_or_else(|| Error::Mismatch("thermal:nbar[,samples]".into()))?;
            PhononInit::Thermal { nbar, seed, samples: v.get(1).copied().unwrap_or(20.0) as usize }
        }
        other => return Err(Error::Mismatch(format!("unknown phonon state {other:?}"))),
    };
    Ok(InitialStateSpec { spin, phonon })
}

struct Prepared {
    schedule: DriveSchedule,
    chain: ChainConfig,
    init: InitialStateSpec,
    times: Vec<f64>,
    opts: IntegrateOptions,
    potentials: Vec<f64>,
}

fn prepare(ctx: &mut Ctx, r: &RunArgs) -> Result<Prepared> {
    let (file, s, chain) = load_schedule(ctx, &r.schedule)?;
    let init = parse_init(&r.init, &r.phonons, r.seed)?;
    if matches!(init.phonon, PhononInit::Thermal { .. }) {
        ctx.seed = Some(r.seed);
    }
    let n = r.samples.max(2);
    let times: Vec<f64> = match (r.t_end, r.periods) {
        (Some(t), _) => (0..=n).map(|i| t * i as f64 / n as f64).collect(),
        (None, Some(k)) => {
            let t = file
                .metadata
                .T_s
                .ok_or_else(|| Error::Mismatch("schedule has no stroboscopic period; use --t-end".into()))?;
            experiments::stroboscopic_times(t, k * t, n)
        }
        (None, None) => return Err(Error::Mismatch("pass --t-end or --periods".into())),
    };
    let potentials: Vec<f64> = r.potentials.clone().unwrap_or_default().into_iter().map(hz_to_rad).collect();
    if !potentials.is_empty() && potentials.len() != chain.n_ions {
        return Err(Error::Mismatch(format!("{} potentials for {} ions", potentials.len(), chain.n_ions)));
    }
    let opts = IntegrateOptions {
        tol: r.tol,
        step_fraction: r.step_fraction,
        potentials: potentials.clone(),
        max_reruns: r.max_reruns,
        ..IntegrateOptions::default()
    };
    ctx.tolerance("tol", r.tol);
    ctx.tolerance("step_fraction", r.step_fraction);
    ctx.tolerance("leakage_threshold", opts.leakage_threshold);
    Ok(Prepared { schedule: s, chain, init, times, opts, potentials })
}

fn effective_run(p: &Prepared) -> Result<Trajectory> {
    let model = EffectiveModel::new(
        p.chain.n_ions,
        p.schedule.target_terms(),
        p.chain.spacers.clone(),
        if p.potentials.is_empty() { Vec::new() } else { p.potentials.clone() },
    )?;
    evolve_effective(&p.init.spin_amplitudes(&p.chain.active_sites())?, &model, &p.times)
}

fn trajectory_results(t: &Trajectory) -> Value {
    let mut v = json!({
        "fock_cutoff": t.fock_cutoff,
        "max_top_fock": t.max_top_fock,
        "max_norm_drift": t.max_norm_drift(),
        "stats": t.stats,
    });
    if t.sites.len() >= 3 {
        if let Ok(fit) = phase_track(t, 0.2) {
            v["packet_velocity_hz"] = json!(rad_to_hz(fit.velocity));
            v["packet_velocity_ci95_hz"] = json!(rad_to_hz(fit.ci95));
            v["packet_profile_flagged"] = json!(fit.flagged);
        }
    }
    v
}

fn cmd_simulate(a: &SimulateArgs, argv: Vec<String>) -> Result<i32> {
    let mut ctx = Ctx::new("simulate", argv, a)?;
    let mut p = prepare(&mut ctx, &a.run)?;
    if a.snapshots.is_some() {
        p.opts = p.opts.clone().snapshot_all(&p.times);
    }
    let traj =
        if a.effective { effective_run(&p)? } else { integrate(&p.init, &p.schedule, &p.chain, &p.times, &p.opts)? };
    if traj.fock_cutoff != p.chain.fock_cutoff {
        eprintln!("note: leakage rerun raised the Fock cutoff {} -> {}", p.chain.fock_cutoff, traj.fock_cutoff);
    }
    let out = resolve_output(&a.out);
    ctx.csv(&out, &traj.to_csv())?;
    if let Some(sp) = &a.snapshots {
        let sp = resolve_output(sp);
        ctx.json(&sp, &json!({ "input_sha256": ctx.digest(), "layout": traj.layout, "snapshots": traj.snapshots }))?;
    }
    let results = trajectory_results(&traj);
    println!("{}", serde_json::to_string(&results)?);
    ctx.finish(&manifest_path(&out), &parent_dir(&out), results)?;
    Ok(0)
}

fn comparison_csv(c: &crate::dynamics::Comparison) -> String {
    let mut s = String::from("t,fidelity,overlap,pe_distance\n");
    for i in 0..c.times.len() {
        s.push_str(&format!(
            "{:.12e},{:.12e},{:.12e},{:.12e}\n",
            c.times[i],
            c.fidelity[i],
            c.overlap[i],
            c.pe_distance.get(i).copied().unwrap_or(f64::NAN)
        ));
    }
    s
}

fn cmd_compare(a: &CompareArgs, argv: Vec<String>) -> Result<i32> {
    let mut ctx = Ctx::new("compare", argv, a)?;
    let mut p = prepare(&mut ctx, &a.run)?;
    p.opts = p.opts.clone().snapshot_all(&p.times);
    let full = integrate(&p.init, &p.schedule, &p.chain, &p.times, &p.opts)?;
    let eff = effective_run(&p)?;
    let cmp = compare(&full, &eff, p.schedule.correction)?;
    let out = resolve_output(&a.out);
    ctx.csv(&out, &comparison_csv(&cmp))?;
    if let Some(f) = &a.full_out {
        ctx.csv(&resolve_output(f), &full.to_csv())?;
    }
    if let Some(f) = &a.effective_out {
        ctx.csv(&resolve_output(f), &eff.to_csv())?;
    }
    let results = json!({
        "min_fidelity": cmp.min_fidelity,
        "max_pe_distance": cmp.max_pe_distance,
        "full": trajectory_results(&full),
        "effective": trajectory_results(&eff),
    });
    println!("min fidelity {:.6}, max |dPe| {:.3e}", cmp.min_fidelity, cmp.max_pe_distance);
    ctx.finish(&manifest_path(&out), &parent_dir(&out), results)?;
    Ok(0)
}

// ---------------------------------------------------------------------------
// verify-magnus

fn cmd_verify_magnus(a: &VerifyArgs, argv: Vec<String>) -> Result<i32> {
    let mut ctx = Ctx::new("verify-magnus", argv, a)?;
    let (s, chain) = match &a.schedule {
        Some(p) => {
            let (_, s, c) = load_schedule(&mut ctx, p)?;
            (s, c)
        }
        None => {
            let chain = ChainParams { gradient_hz: a.gradient_hz, nu_hz: a.nu_hz, eta1: a.eta1, cutoff: a.cutoff }
                .chain(a.n)?;
            let rate = rate_for_beta(chain.gradient, a.beta, false);
            let terms = [crate::geometry::HoppingTerm::new(a.range, rate, a.phi)];
            let knobs = Knobs { alpha: a.alpha, ..Knobs::blue_only() };
            (schedule(&terms, &chain, &knobs)?, chain)
        }
    };
    let period = stroboscopic_period(&s, 10_000)?;
    let rep = magnus::verify(&s, &chain, period.t)?;
    ctx.tolerance("chi1_threshold", a.chi1_threshold);
    ctx.tolerance("closed_threshold", a.closed_threshold);
    let out = resolve_output(&a.out);
    let pass = rep.chi1_relative <= a.chi1_threshold && rep.max_closed_residual <= a.closed_threshold;
    ctx.json(
        &out,
        &json!({ "schema_version": SCHEMA_VERSION, "input_sha256": ctx.digest(), "pass": pass, "report": rep }),
    )?;
    println!(
        "T = {:.6e} s (m = {}), |chi1|/(eta Omega_b T) = {:.3e}, max closed-form residual = {:.3e}, max decomposition residual = {:.3e}",
        period.t, period.m, rep.chi1_relative, rep.max_closed_residual, rep.max_decomposition_residual
    );
    ctx.finish(&manifest_path(&out), &parent_dir(&out), json!({ "pass": pass }))?;
    if pass {
        Ok(0)
    } else {
        eprintln!("error: Magnus residual above threshold");
        Ok(3)
    }
}

// ---------------------------------------------------------------------------
// experiments

fn cmd_experiment(e: &Experiment, argv: Vec<String>) -> Result<i32> {
    let mut ctx = Ctx::new("experiment", argv, e)?;
    let (dir, results) = match e {
        Experiment::AbRing(a) => {
            let dir = resolve_output(&a.out_dir);
            let p = experiments::RingParams {
                n: a.n,
                flux: a.loop_flux / std::f64::consts::TAU,
                alpha: a.alpha,
                beta: a.beta,
                chain: a.chain.params(),
                tol: a.tol,
                revolutions: a.revolutions,
                max_samples: a.max_samples,
                full: !a.effective_only,
                ..Default::default()
            };
            ctx.tolerance("tol", a.tol);
            let r = experiments::ring_run(&p)?;
            ctx.csv(&dir.join("heatmap_effective.csv"), &r.effective.to_csv())?;
            if let Some(f) = &r.full {
                ctx.csv(&dir.join("heatmap_full.csv"), &f.to_csv())?;
            }
            if let Some(c) = &r.comparison {
                ctx.csv(&dir.join("fidelity.csv"), &comparison_csv(c))?;
            }
            let res = json!({
                "period_s": r.period,
                "velocity_analytic_hz": rad_to_hz(r.v_analytic),
                "velocity_effective_hz": rad_to_hz(r.v_effective),
                "velocity_full_hz": r.v_full.map(rad_to_hz),
                "min_fidelity": r.comparison.as_ref().map(|c| c.min_fidelity),
            });
            ctx.json(&dir.join("summary.json"), &res)?;
            (dir, res)
        }
        Experiment::FluxVelocitySweep(a) => {
            let dir = resolve_output(&a.out_dir);
            let p = experiments::RingParams {
                n: a.n,
                alpha: a.alpha,
                beta: a.beta,
                chain: a.chain.params(),
                tol: a.tol,
                step_fraction: a.step_fraction,
                max_samples: a.max_samples,
                full: !a.effective_only,
                ..Default::default()
            };
            ctx.tolerance("tol", a.tol);
            let rows = experiments::flux_velocity_sweep(&p, a.points)?;
            let opt = |v: Option<f64>| v.map_or(String::new(), |x| format!("{x:.9e}"));
            let mut csv = String::from(
                "flux_quanta,loop_flux_rad,v_analytic_hz,v_effective_hz,v_full_hz,v_full_ci95_hz,deviation_rel_vmax\n",
            );
            for r in &rows {
                csv.push_str(&format!(
                    "{:.9e},{:.9e},{:.9e},{:.9e},{},{},{}\n",
                    r.flux,
                    r.flux * std::f64::consts::TAU,
                    rad_to_hz(r.v_analytic),
                    rad_to_hz(r.v_effective),
                    opt(r.v_full.map(rad_to_hz)),
                    opt(r.ci95.map(rad_to_hz)),
                    opt(r.deviation)
                ));
            }
            ctx.csv(&dir.join("velocity.csv"), &csv)?;
            let worst = rows.iter().filter_map(|r| r.deviation).fold(0.0, |a: f64, d| a.max(d.abs()));
            (dir, json!({ "points": rows.len(), "max_deviation_rel_vmax": worst }))
        }
        Experiment::BlochOscillation(a) => {
            let dir = resolve_output(&a.out_dir);
            let p = experiments::BlochParams {
                n: a.n,
                delta1: a.delta1,
                alpha: a.alpha,
                beta: a.beta,
                chain: a.chain.params(),
                periods: a.periods,
                samples: a.samples,
                full: a.full,
                tol: a.tol,
            };
            let r = experiments::bloch_oscillation(&p)?;
            ctx.csv(&dir.join("heatmap_effective.csv"), &r.effective.to_csv())?;
            if let Some(f) = &r.full {
                ctx.csv(&dir.join("heatmap_full.csv"), &f.to_csv())?;
            }
            let mut csv = String::from("t,flux_quanta,position_effective_rad,position_full_rad\n");
            for (i, rec) in r.effective.records.iter().enumerate() {
                let pf = r.phase_full.as_ref().map_or(String::new(), |v| format!("{:.9e}", v[i]));
                csv.push_str(&format!("{:.12e},{:.9e},{:.9e},{pf}\n", rec.time, r.flux[i], r.phase_effective[i]));
            }
            ctx.csv(&dir.join("packet.csv"), &csv)?;
            let excursion = r.phase_effective.iter().fold(0.0, |a: f64, x| a.max((x - r.phase_effective[0]).abs()));
            (dir, json!({ "bloch_period_s": r.bloch_period, "max_excursion_rad": excursion }))
        }
        Experiment::TriangularEd(a) => {
            let dir = resolve_output(&a.out_dir);
            let np = a.points.max(2);
            let js: Vec<f64> = (0..np).map(|i| a.j_min + (a.j_max - a.j_min) * i as f64 / (np - 1) as f64).collect();
            let rows = experiments::triangular_ed(a.n, &js, a.phi1, a.phi2, a.levels)?;
            let mut csv = String::from("j");
            for l in 0..a.levels {
                csv.push_str(&format!(",E{l}"));
            }
            csv.push_str(",chirality\n");
            for r in &rows {
                csv.push_str(&format!("{:.9e}", r.j));
                for l in 0..a.levels {
                    csv.push_str(&r.levels.get(l).map_or(",".into(), |e| format!(",{e:.12e}")));
                }
                csv.push_str(&format!(",{:.12e}\n", r.chirality));
            }
            ctx.csv(&dir.join("spectrum.csv"), &csv)?;
            (dir, json!({ "points": rows.len(), "units": "energies in units of J1" }))
        }
        Experiment::SpacerLadder(a) => {
            let dir = resolve_output(&a.out_dir);
            let l = experiments::spacer_ladder(a.rows, a.cols)?;
            let mut csv = String::from("i,j,range\n");
            for &(i, j) in &l.edges {
                csv.push_str(&format!("{},{},{}\n", i + 1, j + 1, j - i));
            }
            ctx.csv(&dir.join("edges.csv"), &csv)?;
            let spec = GeometrySpec::RectangularLadder {
                rows: a.rows,
                cols: a.cols,
                omega: 1.0,
                rung: None,
                flux: 0.0,
                n: None,
            };
            let tf = TermsFile::from_compiled(&compile(&spec)?, ctx.digest());
            ctx.json(&dir.join("terms.json"), &tf)?;
            let res = json!({
                "n_ions": l.n_ions,
                "spacers": l.spacers.iter().map(|s| s + 1).collect::<Vec<_>>(),
                "ranges": l.terms.iter().map(|t| t.n).collect::<Vec<_>>(),
                "isomorphic_to_grid": l.isomorphic,
            });
            (dir, res)
        }
        Experiment::AppendixAEquivalence(a) => {
            let dir = resolve_output(&a.out_dir);
            let p = experiments::AppendixParams {
                alpha: a.alpha,
                beta: a.beta,
                ratio: a.ratio,
                scale: a.scale,
                chain: a.chain.params(),
                ..Default::default()
            };
            let rows = experiments::appendix_a_equivalence(&p)?;
            let mut csv = String::from(
                "variant,rabi_minus_hz,rabi_plus_hz,rabi_three_hz,j1_hz,j2_hz,j1_ratio,j1_law,j2_ratio,j2_law\n",
            );
            let mut worst: f64 = 0.0;
            for r in &rows {
                csv.push_str(&format!(
                    "{},{:.9e},{:.9e},{:.9e},{:.9e},{:.9e},{:.9e},{:.9e},{:.9e},{:.9e}\n",
                    r.variant,
                    rad_to_hz(r.amplitudes[0]),
                    rad_to_hz(r.amplitudes[1]),
                    rad_to_hz(r.amplitudes[2]),
                    rad_to_hz(r.j1),
                    rad_to_hz(r.j2),
                    r.j1_ratio,
                    r.j1_law,
                    r.j2_ratio,
                    r.j2_law
                ));
                worst = worst.max((r.j1_ratio / r.j1_law - 1.0).abs()).max((r.j2_ratio / r.j2_law - 1.0).abs());
            }
            ctx.csv(&dir.join("rates.csv"), &csv)?;
            (dir, json!({ "max_law_deviation": worst }))
        }
        Experiment::ScalingLaw(a) => {
            let dir = resolve_output(&a.out_dir);
            let ns: Vec<usize> = (a.n_min..=a.n_max).collect();
            let rows = experiments::scaling_law(&ns, a.alpha, a.beta, a.eta1, hz_to_rad(a.omega0), hz_to_rad(a.nu_hz))?;
            let mut csv = String::from("n,gradient_hz,xi_hz,coupling_hz,realized_hz,n_times_coupling_hz\n");
            for r in &rows {
                csv.push_str(&format!(
                    "{},{:.12e},{:.12e},{:.12e},{:.12e},{:.12e}\n",
                    r.n,
                    rad_to_hz(r.gradient),
                    rad_to_hz(r.xi),
                    rad_to_hz(r.coupling),
                    rad_to_hz(r.realized),
                    rad_to_hz(r.coupling * r.n as f64)
                ));
            }
            ctx.csv(&dir.join("scaling.csv"), &csv)?;
            (dir, json!({ "points": rows.len() }))
        }
    };
    println!("{}", serde_json::to_string(&results)?);
    ctx.finish(&dir.join("manifest.json"), &dir, results)?;
    Ok(0)
}
