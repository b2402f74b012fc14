//! TOML scenario files.
//!
//! ```toml
//! hbar = 1.0
//!
//! [system]
//! dimension = 2
//! observable = "pauli_z"
//! state = ["0.7071067811865475+0j", "0.7071067811865475+0j"]
//!
//! [postselection]
//! amplitudes = ["0.5+0j", "-0.8660254037844386+0j"]
//!
//! [meter]
//! kind = "gaussian_cv"
//! sigma_x2 = 0.5
//! cutoff = 60
//!
//! [scan]
//! s_values = [0.0, 0.05, 0.1]
//!
//! [numdiff]
//! h = 1e-3
//! richardson_levels = 2
//! ```
//!
//! Complex entries are `"re+imj"` strings or plain numbers. Observables are
//! `"pauli_x"`, `"pauli_y"`, `"pauli_z"`, `"spin_j"` or a matrix given as a
//! list of rows. The system state is either `state` (amplitudes) or
//! `density` (rows).

use std::fmt;
use std::path::Path;
use std::str::FromStr;

use serde::{Deserialize, Deserializer, Serialize, Serializer};

use crate::dynamics::Scenario;
use crate::error::{Error, Result};
use crate::meter::{
    build_custom_meter, build_fock_meter, build_gaussian_cv_meter, build_qubit_meter_with_hbar,
    MeterModel,
};
use crate::numdiff::{NumdiffSettings, DEFAULT_LEVELS, DEFAULT_STEP};
use crate::operator::{
    pauli_x, pauli_y, pauli_z, spin_z, ComplexMatrix, QuantumState, StateVector, C64,
};

/// Amplitude vectors whose norm is within this of one are renormalized;
/// anything further off is rejected.
pub const RENORMALIZATION_TOL: f64 = 1e-6;
pub const DEFAULT_CUTOFF: usize = 60;

/// Complex number serialized as `"re+imj"`.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Complex(pub C64);

impl fmt::Display for Complex {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}{:+}j", self.0.re, self.0.im)
    }
}

impl FromStr for Complex {
    type Err = String;

    fn from_str(s: &str) -> std::result::Result<Self, String> {
        let cleaned: String = s
            .trim()
            .replace('\u{2212}', "-")
            .chars()
            .filter(|ch| !ch.is_whitespace())
            .collect();
        C64::from_str(&cleaned)
            .map(Complex)
            .map_err(|_| format!("cannot parse {s:?} as a complex number"))
    }
}

impl Serialize for Complex {
    fn serialize<S: Serializer>(&self, ser: S) -> std::result::Result<S::Ok, S::Error> {
        ser.collect_str(self)
    }
}

impl<'de> Deserialize<'de> for Complex {
    fn deserialize<D: Deserializer<'de>>(de: D) -> std::result::Result<Self, D::Error> {
        #[derive(Deserialize)]
        #[serde(untagged)]
        enum Raw {
            Real(f64),
            Text(String),
        }
        match Raw::deserialize(de)? {
            Raw::Real(x) => Ok(Complex(C64::new(x, 0.0))),
            Raw::Text(s) => s.parse().map_err(serde::de::Error::custom),
        }
    }
}

pub type Amplitudes = Vec<Complex>;
pub type MatrixRows = Vec<Vec<Complex>>;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum ObservableConfig {
    Named(String),
    Matrix(MatrixRows),
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SystemConfig {
    pub dimension: usize,
    pub observable: ObservableConfig,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub state: Option<Amplitudes>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub density: Option<MatrixRows>,
}

/// Accepts both `postselection = [...]` and a `[postselection]` section.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(from = "PostselectionSpec")]
pub struct PostselectionConfig {
    pub amplitudes: Amplitudes,
}

#[derive(Deserialize)]
#[serde(untagged)]
enum PostselectionSpec {
    Bare(Amplitudes),
    Section { amplitudes: Amplitudes },
}

impl From<PostselectionSpec> for PostselectionConfig {
    fn from(spec: PostselectionSpec) -> Self {
        match spec {
            PostselectionSpec::Bare(amplitudes) | PostselectionSpec::Section { amplitudes } => {
                PostselectionConfig { amplitudes }
            }
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum MeterKind {
    Qubit,
    GaussianCv,
    Custom,
}

/// `custom` meters take either a Fock-basis state of the reference
/// oscillator (`fock_state`, with `sigma_x`/`sigma_x2` and `cutoff`) or
/// explicit `readout`, `generator`, `state` and optional `inversion`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct MeterConfig {
    pub kind: MeterKind,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub sigma_x: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub sigma_x2: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub cutoff: Option<usize>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub fock_state: Option<Amplitudes>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub readout: Option<MatrixRows>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub generator: Option<MatrixRows>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub state: Option<Amplitudes>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub inversion: Option<MatrixRows>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ScanConfig {
    pub s_values: Vec<f64>,
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct NumdiffConfig {
    #[serde(default = "default_step")]
    pub h: f64,
    #[serde(default = "default_levels")]
    pub richardson_levels: usize,
}

fn default_step() -> f64 {
    DEFAULT_STEP
}

fn default_levels() -> usize {
    DEFAULT_LEVELS
}

fn default_hbar() -> f64 {
    1.0
}

impl Default for NumdiffConfig {
    fn default() -> Self {
        NumdiffConfig {
            h: DEFAULT_STEP,
            richardson_levels: DEFAULT_LEVELS,
        }
    }
}

impl From<NumdiffConfig> for NumdiffSettings {
    fn from(c: NumdiffConfig) -> Self {
        NumdiffSettings {
            step: c.h,
            richardson_levels: c.richardson_levels,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ScenarioConfig {
    #[serde(default = "default_hbar")]
    pub hbar: f64,
    pub system: SystemConfig,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub postselection: Option<PostselectionConfig>,
    pub meter: MeterConfig,
    pub scan: ScanConfig,
    #[serde(default)]
    pub numdiff: NumdiffConfig,
}

/// Reads and validates a scenario file.
pub fn load_scenario(path: impl AsRef<Path>) -> Result<ScenarioConfig> {
    let path = path.as_ref();
    let text = std::fs::read_to_string(path)
        .map_err(|e| Error::config("<file>", format!("{}: {e}", path.display())))?;
    parse_scenario(&text)
}

pub fn parse_scenario(text: &str) -> Result<ScenarioConfig> {
    let config: ScenarioConfig =
        toml::from_str(text).map_err(|e| Error::config("<parse>", e.to_string().trim_end()))?;
    config.validate()?;
    Ok(config)
}

pub fn write_scenario(config: &ScenarioConfig) -> Result<String> {
    toml::to_string(config).map_err(|e| Error::config("<write>", e.to_string()))
}

fn complexes(xs: &[Complex]) -> Vec<C64> {
    xs.iter().map(|z| z.0).collect()
}

fn finite(path: &str, xs: &[C64]) -> Result<()> {
    match xs
        .iter()
        .position(|z| !(z.re.is_finite() && z.im.is_finite()))
    {
        Some(i) => Err(Error::config(format!("{path}[{i}]"), "non-finite entry")),
        None => Ok(()),
    }
}

fn vector(path: &str, xs: &[Complex], dim: usize) -> Result<StateVector> {
    if xs.len() != dim {
        return Err(Error::config(
            path,
            format!("expected {dim} amplitudes, found {}", xs.len()),
        ));
    }
    let v = complexes(xs);
    finite(path, &v)?;
    let v = StateVector::from_vec(v);
    let norm = v.norm();
    if (norm - 1.0).abs() > RENORMALIZATION_TOL {
        return Err(Error::config(
            path,
            format!("amplitude norm {norm} differs from 1 by more than {RENORMALIZATION_TOL:e}"),
        ));
    }
    Ok(v.unscale(norm))
}

fn matrix(path: &str, rows: &[Vec<Complex>], dim: usize) -> Result<ComplexMatrix> {
    if rows.len() != dim {
        return Err(Error::config(
            path,
            format!("expected {dim} rows, found {}", rows.len()),
        ));
    }
    for (i, row) in rows.iter().enumerate() {
        if row.len() != dim {
            return Err(Error::config(
                format!("{path}[{i}]"),
                format!("expected {dim} entries, found {}", row.len()),
            ));
        }
        finite(&format!("{path}[{i}]"), &complexes(row))?;
    }
    let rows: Vec<Vec<C64>> = rows.iter().map(|r| complexes(r)).collect();
    ComplexMatrix::from_rows(&rows).map_err(|e| Error::config(path, e.to_string()))
}

fn hermitian(path: &str, rows: &[Vec<Complex>], dim: usize) -> Result<ComplexMatrix> {
    let m = matrix(path, rows, dim)?;
    m.require_hermitian(path)
        .map_err(|e| Error::config(path, e.to_string()))?;
    Ok(m)
}

/// Attaches a field path to errors raised by lower layers.
fn at<T>(path: &str, r: Result<T>) -> Result<T> {
    r.map_err(|e| match e {
        Error::Config { .. } => e,
        other => Error::config(path, other.to_string()),
    })
}

impl ScenarioConfig {
    pub fn validate(&self) -> Result<()> {
        self.scenario().map(|_| ())?;
        if self.scan.s_values.is_empty() {
            return Err(Error::config(
                "scan.s_values",
                "at least one value is required",
            ));
        }
        if let Some(i) = self.scan.s_values.iter().position(|s| !s.is_finite()) {
            return Err(Error::config(
                format!("scan.s_values[{i}]"),
                "non-finite value",
            ));
        }
        if !(self.numdiff.h.is_finite() && self.numdiff.h > 0.0) {
            return Err(Error::config("numdiff.h", "step must be positive"));
        }
        Ok(())
    }

    pub fn numdiff_settings(&self) -> NumdiffSettings {
        self.numdiff.into()
    }

    pub fn observable(&self) -> Result<ComplexMatrix> {
        let dim = self.system.dimension;
        let path = "system.observable";
        match &self.system.observable {
            ObservableConfig::Named(name) => {
                let m = match name.as_str() {
                    "pauli_x" => pauli_x(),
                    "pauli_y" => pauli_y(),
                    "pauli_z" => pauli_z(),
                    "spin_j" => spin_z(dim),
                    other => {
                        return Err(Error::config(path, format!("unknown observable {other:?}")))
                    }
                };
                if m.dim() != dim {
                    return Err(Error::config(
                        path,
                        format!("{name} acts on dimension {}, system has {dim}", m.dim()),
                    ));
                }
                Ok(m)
            }
            ObservableConfig::Matrix(rows) => hermitian(path, rows, dim),
        }
    }

    pub fn system_state(&self) -> Result<QuantumState> {
        let dim = self.system.dimension;
        match (&self.system.state, &self.system.density) {
            (Some(amps), None) => Ok(QuantumState::Pure(vector("system.state", amps, dim)?)),
            (None, Some(rows)) => {
                let rho = hermitian("system.density", rows, dim)?;
                at("system.density", QuantumState::mixed(rho))
            }
            _ => Err(Error::config(
                "system",
                "exactly one of `state` or `density` is required",
            )),
        }
    }

    pub fn postselection(&self) -> Result<Option<StateVector>> {
        self.postselection
            .as_ref()
            .map(|p| {
                vector(
                    "postselection.amplitudes",
                    &p.amplitudes,
                    self.system.dimension,
                )
            })
            .transpose()
    }

    fn sigma_x(&self) -> Result<f64> {
        let sigma = match (self.meter.sigma_x, self.meter.sigma_x2) {
            (Some(s), None) => s,
            (None, Some(s2)) if s2 > 0.0 => s2.sqrt(),
            (None, Some(_)) => return Err(Error::config("meter.sigma_x2", "must be positive")),
            _ => {
                return Err(Error::config(
                    "meter",
                    "exactly one of `sigma_x` or `sigma_x2` is required",
                ))
            }
        };
        if sigma.is_finite() && sigma > 0.0 {
            Ok(sigma)
        } else {
            Err(Error::config("meter.sigma_x", "must be positive"))
        }
    }

    fn reject_fields(&self, fields: &[(&str, bool)]) -> Result<()> {
        match fields.iter().find(|(_, present)| *present) {
            Some((name, _)) => Err(Error::config(
                format!("meter.{name}"),
                "not used by this meter kind",
            )),
            None => Ok(()),
        }
    }

    pub fn meter(&self) -> Result<MeterModel> {
        let m = &self.meter;
        let hbar = self.hbar;
        if !(hbar.is_finite() && hbar > 0.0) {
            return Err(Error::config("hbar", "must be positive"));
        }
        let explicit = [
            ("readout", m.readout.is_some()),
            ("generator", m.generator.is_some()),
            ("state", m.state.is_some()),
            ("inversion", m.inversion.is_some()),
        ];
        let cutoff = m.cutoff.unwrap_or(DEFAULT_CUTOFF);
        match m.kind {
            MeterKind::Qubit => {
                self.reject_fields(&explicit)?;
                self.reject_fields(&[
                    ("sigma_x", m.sigma_x.is_some()),
                    ("sigma_x2", m.sigma_x2.is_some()),
                    ("cutoff", m.cutoff.is_some()),
                    ("fock_state", m.fock_state.is_some()),
                ])?;
                at("meter", build_qubit_meter_with_hbar(hbar))
            }
            MeterKind::GaussianCv => {
                self.reject_fields(&explicit)?;
                self.reject_fields(&[("fock_state", m.fock_state.is_some())])?;
                at(
                    "meter",
                    build_gaussian_cv_meter(self.sigma_x()?, cutoff, hbar),
                )
            }
            MeterKind::Custom => match &m.fock_state {
                Some(amps) => {
                    self.reject_fields(&explicit)?;
                    let amps = complexes(amps);
                    finite("meter.fock_state", &amps)?;
                    at(
                        "meter.fock_state",
                        build_fock_meter(self.sigma_x()?, cutoff, &amps, hbar),
                    )
                }
                None => self.explicit_meter(),
            },
        }
    }

    fn explicit_meter(&self) -> Result<MeterModel> {
        let m = &self.meter;
        self.reject_fields(&[
            ("sigma_x", m.sigma_x.is_some()),
            ("sigma_x2", m.sigma_x2.is_some()),
            ("cutoff", m.cutoff.is_some()),
        ])?;
        let (Some(readout), Some(generator), Some(state)) = (&m.readout, &m.generator, &m.state)
        else {
            return Err(Error::config(
                "meter",
                "custom meters need `fock_state` or all of `readout`, `generator`, `state`",
            ));
        };
        let dim = readout.len();
        let readout = hermitian("meter.readout", readout, dim)?;
        let generator = hermitian("meter.generator", generator, dim)?;
        let state = QuantumState::Pure(vector("meter.state", state, dim)?);
        let inversion = m
            .inversion
            .as_ref()
            .map(|rows| matrix("meter.inversion", rows, dim))
            .transpose()?;
        at(
            "meter",
            build_custom_meter(readout, generator, state, inversion, self.hbar),
        )
    }

    /// Builds the validated scenario. The post-selection probability is not
    /// checked here; a degenerate post-selection surfaces when the
    /// conditional statistics are evaluated.
    pub fn scenario(&self) -> Result<Scenario> {
        if self.system.dimension == 0 {
            return Err(Error::config("system.dimension", "must be positive"));
        }
        let a = self.observable()?;
        let rho = self.system_state()?;
        let f = self.postselection()?;
        let meter = self.meter()?;
        at("system", Scenario::new(a, rho, f, meter))
    }
}
