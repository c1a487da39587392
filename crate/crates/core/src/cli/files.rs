//! On-disk artifacts. Every frequency in a file is in Hz and every ion label
//! is 1-based; conversion to the library's rad/s and 0-based indices happens
//! here and nowhere else.

use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::geometry::{CompiledGeometry, FluxReport, HoppingTerm};
use crate::model::{ChainConfig, Mode};
use crate::scheduler::{
    AdiabaticityReport, CrossMargin, DriveSchedule, IntendedPair, Period, PhaseProgram, RedPhaseRule, Sideband,
    TermDrive, Tone,
};
use crate::units::{hz_to_rad, rad_to_hz};
use crate::{Error, Result};

pub const SCHEMA_VERSION: u32 = 1;
/// Relative output paths are resolved against this directory when set.
pub const OUTPUT_ROOT_ENV: &str = "ION_GAUGE_OUTPUT_ROOT";

fn schema() -> u32 {
    SCHEMA_VERSION
}

fn hz() -> String {
    "Hz".into()
}

fn check_schema(v: u32, what: &str) -> Result<()> {
    if v != SCHEMA_VERSION {
        return Err(Error::Mismatch(format!("{what}: schema version {v}, this build reads {SCHEMA_VERSION}")));
    }
    Ok(())
}

fn to_labels(v: &[usize]) -> Vec<usize> {
    v.iter().map(|x| x + 1).collect()
}

fn from_labels(v: &[usize], n: usize, what: &str) -> Result<Vec<usize>> {
    v.iter()
        .map(|&x| {
            if x == 0 || x > n {
                Err(Error::LabelOutOfRange(format!("{what} label {x} outside 1..={n}")))
            } else {
                Ok(x - 1)
            }
        })
        .collect()
}

// ---------------------------------------------------------------------------
// hashing and atomic writes

pub fn sha256_hex(bytes: &[u8]) -> String {
    let d = Sha256::digest(bytes);
    d.iter().map(|b| format!("{b:02x}")).collect()
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct FileHash {
    pub path: String,
    pub sha256: String,
}

/// Reads a file and remembers its hash.
#[derive(Clone, Debug, Default)]
pub struct Inputs {
    pub files: Vec<FileHash>,
}

impl Inputs {
    pub fn read(&mut self, path: &Path) -> Result<Vec<u8>> {
        let bytes = fs::read(path).map_err(|e| Error::Mismatch(format!("cannot read {}: {e}", path.display())))?;
        self.files.push(FileHash { path: path.display().to_string(), sha256: sha256_hex(&bytes) });
        Ok(bytes)
    }

    pub fn json<T: for<'de> Deserialize<'de>>(&mut self, path: &Path) -> Result<T> {
        let bytes = self.read(path)?;
        serde_json::from_slice(&bytes).map_err(|e| Error::Mismatch(format!("{}: {e}", path.display())))
    }

    /// Digest of every input file plus the canonical parameter record.
    pub fn digest(&self, params: &serde_json::Value) -> String {
        let mut h = Sha256::new();
        for f in &self.files {
            h.update(f.sha256.as_bytes());
        }
        h.update(params.to_string().as_bytes());
        h.finalize().iter().map(|b| format!("{b:02x}")).collect()
    }
}

pub fn resolve_output(path: &Path) -> PathBuf {
    if path.is_absolute() {
        return path.to_path_buf();
    }
    match std::env::var_os(OUTPUT_ROOT_ENV) {
        Some(root) if !root.is_empty() => PathBuf::from(root).join(path),
        _ => path.to_path_buf(),
    }
}

/// Write-to-temp then rename, so readers never see a partial file.
pub fn write_atomic(path: &Path, bytes: &[u8]) -> Result<FileHash> {
    let dir = match path.parent() {
        Some(d) if !d.as_os_str().is_empty() => d.to_path_buf(),
        _ => PathBuf::from("."),
    };
    fs::create_dir_all(&dir)?;
    let name = path.file_name().map(|n| n.to_string_lossy().into_owned()).unwrap_or_else(|| "out".into());
    let tmp = dir.join(format!(".{name}.{}.tmp", std::process::id()));
    {
        let mut f = fs::File::create(&tmp)?;
        f.write_all(bytes)?;
        f.sync_all()?;
    }
    fs::rename(&tmp, path)?;
    Ok(FileHash { path: path.display().to_string(), sha256: sha256_hex(bytes) })
}

pub fn write_json<T: Serialize>(path: &Path, value: &T) -> Result<FileHash> {
    let mut s = serde_json::to_string_pretty(value)?;
    s.push('\n');
    write_atomic(path, s.as_bytes())
}

/// CSV with a leading `# input_sha256=` comment line.
pub fn write_csv(path: &Path, input_hash: &str, body: &str) -> Result<FileHash> {
    write_atomic(path, format!("# input_sha256={input_hash}\n{body}").as_bytes())
}

// ---------------------------------------------------------------------------
// run manifest

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RunManifest {
    #[serde(default = "schema")]
    pub schema_version: u32,
    pub tool_version: String,
    pub subcommand: String,
    /// Arguments after the program name; replaying re-parses exactly these.
    pub argv: Vec<String>,
    pub parameters: serde_json::Value,
    pub inputs: Vec<FileHash>,
    pub tolerances: serde_json::Map<String, serde_json::Value>,
    pub seed: Option<u64>,
    pub output_dir: String,
    pub outputs: Vec<FileHash>,
    pub input_sha256: String,
    /// Diagnostics of the run (not part of the replay contract).
    pub results: serde_json::Value,
}

impl RunManifest {
    pub fn load(path: &Path) -> Result<Self> {
        let bytes = fs::read(path).map_err(|e| Error::Mismatch(format!("cannot read {}: {e}", path.display())))?;
        let m: RunManifest =
            serde_json::from_slice(&bytes).map_err(|e| Error::Mismatch(format!("{}: {e}", path.display())))?;
        check_schema(m.schema_version, "manifest")?;
        Ok(m)
    }

    /// Inputs whose contents changed since the manifest was written.
    pub fn stale_inputs(&self) -> Vec<String> {
        self.inputs
            .iter()
            .filter(|f| fs::read(&f.path).map(|b| sha256_hex(&b) != f.sha256).unwrap_or(true))
            .map(|f| f.path.clone())
            .collect()
    }
}

/// `<dir>/<stem>.manifest.json` next to the main output.
pub fn manifest_path(main_output: &Path) -> PathBuf {
    let stem = main_output.file_stem().map(|s| s.to_string_lossy().into_owned()).unwrap_or_else(|| "run".into());
    main_output.with_file_name(format!("{stem}.manifest.json"))
}

// ---------------------------------------------------------------------------
// chain

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ModeRecord {
    pub frequency_hz: f64,
    pub lamb_dicke: Vec<f64>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ChainFile {
    #[serde(default = "schema")]
    pub schema_version: u32,
    pub n_ions: usize,
    pub gradient_hz: f64,
    pub modes: Vec<ModeRecord>,
    pub fock_cutoff: usize,
    #[serde(default)]
    pub qubit_splitting_hz: f64,
    /// 1-based.
    #[serde(default)]
    pub spacers: Vec<usize>,
}

impl ChainFile {
    pub fn from_config(c: &ChainConfig) -> Self {
        ChainFile {
            schema_version: SCHEMA_VERSION,
            n_ions: c.n_ions,
            gradient_hz: rad_to_hz(c.gradient),
            modes: c
                .modes
                .iter()
                .map(|m| ModeRecord { frequency_hz: rad_to_hz(m.frequency), lamb_dicke: m.lamb_dicke.clone() })
                .collect(),
            fock_cutoff: c.fock_cutoff,
            qubit_splitting_hz: rad_to_hz(c.qubit_splitting),
            spacers: to_labels(&c.spacers),
        }
    }

    pub fn to_config(&self) -> Result<ChainConfig> {
        check_schema(self.schema_version, "chain")?;
        let c = ChainConfig {
            n_ions: self.n_ions,
            gradient: hz_to_rad(self.gradient_hz),
            modes: self
                .modes
                .iter()
                .map(|m| Mode { frequency: hz_to_rad(m.frequency_hz), lamb_dicke: m.lamb_dicke.clone() })
                .collect(),
            fock_cutoff: self.fock_cutoff,
            qubit_splitting: hz_to_rad(self.qubit_splitting_hz),
            spacers: from_labels(&self.spacers, self.n_ions, "spacer")?,
        };
        c.validate()?;
        Ok(c)
    }
}

// ---------------------------------------------------------------------------
// terms

/// A hopping term as written to disk: `omega` and `delta` in Hz.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct TermRecord {
    pub n: usize,
    pub omega: f64,
    #[serde(default)]
    pub phi: f64,
    #[serde(default)]
    pub delta: f64,
}

impl TermRecord {
    /// Geometry output is unit-agnostic; its rates are taken as Hz.
    pub fn from_term_hz(t: &HoppingTerm) -> Self {
        TermRecord { n: t.n, omega: t.omega, phi: t.phi, delta: t.delta }
    }

    pub fn to_term(&self) -> HoppingTerm {
        HoppingTerm { n: self.n, omega: hz_to_rad(self.omega), phi: self.phi, delta: hz_to_rad(self.delta) }
    }

    pub fn from_term(t: &HoppingTerm) -> Self {
        TermRecord { n: t.n, omega: rad_to_hz(t.omega), phi: t.phi, delta: rad_to_hz(t.delta) }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct FluxRecord {
    pub name: String,
    /// 1-based sites.
    pub cycle: Vec<usize>,
    /// Loop phase in radians (2π per flux quantum).
    pub loop_phase: f64,
    pub flux_quanta: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TermsFile {
    #[serde(default = "schema")]
    pub schema_version: u32,
    #[serde(default = "hz")]
    pub units: String,
    pub n_ions: usize,
    /// 1-based.
    #[serde(default)]
    pub spacers: Vec<usize>,
    pub terms: Vec<TermRecord>,
    #[serde(default)]
    pub fluxes: Vec<FluxRecord>,
    #[serde(default)]
    pub input_sha256: String,
}

impl TermsFile {
    pub fn from_compiled(g: &CompiledGeometry, input_sha256: String) -> Self {
        TermsFile {
            schema_version: SCHEMA_VERSION,
            units: hz(),
            n_ions: g.n_ions,
            spacers: to_labels(&g.spacers),
            terms: g.terms.iter().map(TermRecord::from_term_hz).collect(),
            fluxes: g.fluxes.iter().map(flux_record).collect(),
            input_sha256,
        }
    }

    pub fn terms(&self) -> Result<Vec<HoppingTerm>> {
        check_schema(self.schema_version, "terms")?;
        if self.units != "Hz" {
            return Err(Error::Mismatch(format!("terms file units {:?}, expected \"Hz\"", self.units)));
        }
        Ok(self.terms.iter().map(TermRecord::to_term).collect())
    }

    pub fn spacers(&self) -> Result<Vec<usize>> {
        from_labels(&self.spacers, self.n_ions, "spacer")
    }
}

fn flux_record(f: &FluxReport) -> FluxRecord {
    FluxRecord {
        name: f.name.clone(),
        cycle: to_labels(&f.cycle),
        loop_phase: f.loop_phase,
        flux_quanta: f.flux_quanta,
    }
}

// ---------------------------------------------------------------------------
// schedule

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ToneRecord {
    /// Tone frequency minus the qubit frequency.
    pub detuning_hz: f64,
    /// Carrier Rabi frequency of the tone.
    pub rabi_hz: f64,
    pub phase_rad: f64,
    pub sideband: Sideband,
    pub xi_hz: f64,
    /// Offset from ±(ν+ξ) in units of the corrected gradient.
    pub position: f64,
    pub split_hz: f64,
    /// 1-based owning term.
    pub term: Option<usize>,
    pub program_weight: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TermDriveRecord {
    pub n: usize,
    pub rate_hz: f64,
    pub phi: f64,
    pub delta_hz: f64,
    pub xi_hz: f64,
    pub xi_b_hz: f64,
    pub xi_r_hz: f64,
    pub epsilon_hz: f64,
    pub rabi_b_hz: f64,
    pub rabi_r_hz: f64,
    /// (t in s, φ in rad) knots.
    #[serde(default)]
    pub program: Option<Vec<(f64, f64)>>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct IntendedRecord {
    /// 1-based tone indices.
    pub absorbed: usize,
    pub emitted: usize,
    pub range: usize,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct MarginsRecord {
    pub ok: bool,
    pub alpha: Vec<f64>,
    pub beta: Vec<f64>,
    pub cross_margins: Vec<CrossMargin>,
    pub pair_creation: Vec<Option<f64>>,
    pub census_ratio: f64,
    pub flags: Vec<String>,
}

impl MarginsRecord {
    pub fn from_report(r: &AdiabaticityReport) -> Self {
        MarginsRecord {
            ok: r.ok(),
            alpha: r.alpha.clone(),
            beta: r.beta.clone(),
            cross_margins: r.cross_margins.clone(),
            pair_creation: r.pair_creation.clone(),
            // JSON has no infinity
            census_ratio: if r.census_ratio.is_finite() { r.census_ratio } else { f64::MAX },
            flags: r.flags.clone(),
        }
    }
}

#[allow(non_snake_case)]
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ScheduleMetadata {
    /// Stroboscopic period; None if the tones are incommensurate.
    pub T_s: Option<f64>,
    pub m: Option<u64>,
    pub M_b: Option<u64>,
    /// Smallest α and β over the terms.
    pub alpha: f64,
    pub beta: f64,
    pub margins: MarginsRecord,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ScheduleFile {
    #[serde(default = "schema")]
    pub schema_version: u32,
    #[serde(default = "hz")]
    pub units: String,
    #[serde(default)]
    pub input_sha256: String,
    pub chain: ChainFile,
    pub gradient_hz: f64,
    pub nu_hz: f64,
    pub eta: f64,
    pub correction_hz: f64,
    pub red: bool,
    pub red_rule: RedPhaseRule,
    pub shared: bool,
    pub tones: Vec<ToneRecord>,
    pub terms: Vec<TermDriveRecord>,
    pub intended: Vec<IntendedRecord>,
    pub metadata: ScheduleMetadata,
}

impl ScheduleFile {
    pub fn new(
        s: &DriveSchedule,
        chain: &ChainConfig,
        period: Option<Period>,
        report: &AdiabaticityReport,
        input_sha256: String,
    ) -> Self {
        let min = |v: &[f64]| v.iter().cloned().fold(f64::INFINITY, f64::min);
        ScheduleFile {
            schema_version: SCHEMA_VERSION,
            units: hz(),
            input_sha256,
            chain: ChainFile::from_config(chain),
            gradient_hz: rad_to_hz(s.gradient),
            nu_hz: rad_to_hz(s.nu),
            eta: s.eta,
            correction_hz: rad_to_hz(s.correction),
            red: s.red,
            red_rule: s.red_rule,
            shared: s.shared,
            tones: s
                .tones
                .iter()
                .map(|t| ToneRecord {
                    detuning_hz: rad_to_hz(t.detuning),
                    rabi_hz: rad_to_hz(t.amplitude),
                    phase_rad: t.phase,
                    sideband: t.sideband,
                    xi_hz: rad_to_hz(t.xi),
                    position: t.position,
                    split_hz: rad_to_hz(t.split),
                    term: t.term.map(|j| j + 1),
                    program_weight: t.program_weight,
                })
                .collect(),
            terms: s
                .terms
                .iter()
                .map(|t| TermDriveRecord {
                    n: t.n,
                    rate_hz: rad_to_hz(t.rate),
                    phi: t.phi,
                    delta_hz: rad_to_hz(t.delta),
                    xi_hz: rad_to_hz(t.xi),
                    xi_b_hz: rad_to_hz(t.xi_b),
                    xi_r_hz: rad_to_hz(t.xi_r),
                    epsilon_hz: rad_to_hz(t.epsilon),
                    rabi_b_hz: rad_to_hz(t.omega_b),
                    rabi_r_hz: rad_to_hz(t.omega_r),
                    program: t.program.as_ref().map(|p| p.knots.clone()),
                })
                .collect(),
            intended: s
                .intended
                .iter()
                .map(|p| IntendedRecord { absorbed: p.absorbed + 1, emitted: p.emitted + 1, range: p.range })
                .collect(),
            metadata: ScheduleMetadata {
                T_s: period.map(|p| p.t),
                m: period.map(|p| p.m),
                M_b: period.map(|p| p.m_b),
                alpha: min(&report.alpha),
                beta: min(&report.beta),
                margins: MarginsRecord::from_report(report),
            },
        }
    }

    pub fn chain(&self) -> Result<ChainConfig> {
        self.chain.to_config()
    }

    pub fn to_schedule(&self) -> Result<DriveSchedule> {
        check_schema(self.schema_version, "schedule")?;
        if self.units != "Hz" {
            return Err(Error::Mismatch(format!("schedule units {:?}, expected \"Hz\"", self.units)));
        }
        let nt = self.terms.len();
        let nto = self.tones.len();
        let tones = self
            .tones
            .iter()
            .map(|t| {
                let term = match t.term {
                    Some(j) if j == 0 || j > nt => {
                        return Err(Error::LabelOutOfRange(format!("tone owner {j} outside 1..={nt}")))
                    }
                    j => j.map(|j| j - 1),
                };
                Ok(Tone {
                    detuning: hz_to_rad(t.detuning_hz),
                    amplitude: hz_to_rad(t.rabi_hz),
                    phase: t.phase_rad,
                    sideband: t.sideband,
                    xi: hz_to_rad(t.xi_hz),
                    position: t.position,
                    split: hz_to_rad(t.split_hz),
                    term,
                    program_weight: t.program_weight,
                })
            })
            .collect::<Result<Vec<_>>>()?;
        let intended = self
            .intended
            .iter()
            .map(|p| {
                let a = from_labels(&[p.absorbed, p.emitted], nto, "tone")?;
                Ok(IntendedPair { absorbed: a[0], emitted: a[1], range: p.range })
            })
            .collect::<Result<Vec<_>>>()?;
        Ok(DriveSchedule {
            gradient: hz_to_rad(self.gradient_hz),
            nu: hz_to_rad(self.nu_hz),
            eta: self.eta,
            terms: self
                .terms
                .iter()
                .map(|t| TermDrive {
                    n: t.n,
                    rate: hz_to_rad(t.rate_hz),
                    phi: t.phi,
                    delta: hz_to_rad(t.delta_hz),
                    xi: hz_to_rad(t.xi_hz),
                    xi_b: hz_to_rad(t.xi_b_hz),
                    xi_r: hz_to_rad(t.xi_r_hz),
                    epsilon: hz_to_rad(t.epsilon_hz),
                    omega_b: hz_to_rad(t.rabi_b_hz),
                    omega_r: hz_to_rad(t.rabi_r_hz),
                    program: t.program.clone().map(|knots| PhaseProgram { knots }),
                })
                .collect(),
            tones,
            intended,
            correction: hz_to_rad(self.correction_hz),
            red: self.red,
            red_rule: self.red_rule,
            shared: self.shared,
        })
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::scheduler::{schedule, stroboscopic_period, validate, Knobs};

    #[test]
    fn schedule_round_trip() {
        let c = ChainConfig::com(4, hz_to_rad(2e3), hz_to_rad(2e6), 0.1, 2).unwrap();
        let terms = vec![HoppingTerm::new(1, hz_to_rad(50.0), 0.3), HoppingTerm::new(2, hz_to_rad(25.0), -1.0)];
        let s = schedule(&terms, &c, &Knobs::default()).unwrap();
        let p = stroboscopic_period(&s, 1000).ok();
        let f = ScheduleFile::new(&s, &c, p, &validate(&s, &c, 20.0), String::new());
        let text = serde_json::to_string(&f).unwrap();
        let back: ScheduleFile = serde_json::from_str(&text).unwrap();
        let s2 = back.to_schedule().unwrap();
        assert_eq!(s2.tones.len(), s.tones.len());
        for (a, b) in s.tones.iter().zip(&s2.tones) {
            assert!((a.detuning - b.detuning).abs() <= 1e-9 * a.detuning.abs());
            assert!((a.amplitude - b.amplitude).abs() <= 1e-12 * a.amplitude.abs().max(1.0));
            assert_eq!(a.term, b.term);
        }
        assert_eq!(back.chain().unwrap().n_ions, 4);
    }

    #[test]
    fn labels_are_one_based() {
        assert_eq!(to_labels(&[0, 5]), vec![1, 6]);
        assert!(from_labels(&[0], 3, "x").is_err());
        assert_eq!(from_labels(&[3], 3, "x").unwrap(), vec![2]);
    }
}
