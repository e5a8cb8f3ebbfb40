//! Experiment configs, run manifests and atomic output.

use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use serde_json::Value;
use sha2::{Digest, Sha256};

use crate::dtheta::{ThetaBase, ThetaJump, ThetaSpec};
use crate::error::{Error, Result};
use crate::scattering1d::{parse_grid, LatticeModel, Site};
use crate::sho::SymbolSpec;

/// Largest truncation accepted from a config (modes per side or box size).
pub const MAX_SIZE: usize = 16_384;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum ExperimentKind {
    ShoSpectrum,
    ShoBands,
    MehlerVerify,
    ScatterScan,
    DthetaRun,
    SpecfunEval,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, clap::ValueEnum)]
#[serde(rename_all = "kebab-case")]
pub enum SpecialFunction {
    Zeta,
    Conical,
    Mtau,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, clap::ValueEnum)]
#[serde(rename_all = "kebab-case")]
pub enum Identity {
    F1,
    F3,
    Unitarity,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize, clap::ValueEnum)]
#[serde(rename_all = "kebab-case")]
pub enum GridChoice {
    #[default]
    Default,
    Refined,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SpecfunParams {
    pub function: SpecialFunction,
    /// `zeta`: lambda values; `conical`: pairs `tau, x`; `mtau`: tau values
    pub args: Vec<f64>,
}

fn default_taus() -> Vec<f64> {
    vec![0.25, 0.5, 1.0, 2.0, 3.0]
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct MehlerParams {
    pub identity: Identity,
    #[serde(default = "default_taus")]
    pub taus: Vec<f64>,
    #[serde(default)]
    pub grid: GridChoice,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ShoSpectrumParams {
    pub symbol: SymbolSpec,
    pub modes: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ShoBandsParams {
    pub symbol: SymbolSpec,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ScatterParams {
    pub model: LatticeModel,
    /// `start:stop:step`
    pub grid: String,
}

fn default_model() -> LatticeModel {
    LatticeModel::single_site(2.0)
}

fn default_theta() -> ThetaSpec {
    ThetaSpec {
        jumps: vec![ThetaJump {
            lambda: 0.0,
            kappa: 1.0,
        }],
        base: ThetaBase::Step,
        limits: [0.0, 1.0],
    }
}

fn default_box() -> usize {
    4096
}

fn default_ladder() -> Vec<usize> {
    vec![1024, 2048, 4096]
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DthetaParams {
    #[serde(default = "default_model")]
    pub model: LatticeModel,
    #[serde(default = "default_theta")]
    pub theta: ThetaSpec,
    #[serde(default = "default_box", rename = "box")]
    pub box_size: usize,
    #[serde(default = "default_ladder")]
    pub ladder: Vec<usize>,
}

/// Kind-specific parameters.
#[derive(Debug, Clone, PartialEq, Serialize)]
#[serde(untagged)]
pub enum Parameters {
    ShoSpectrum(ShoSpectrumParams),
    ShoBands(ShoBandsParams),
    MehlerVerify(MehlerParams),
    ScatterScan(ScatterParams),
    DthetaRun(DthetaParams),
    SpecfunEval(SpecfunParams),
}

impl Parameters {
    pub fn kind(&self) -> ExperimentKind {
        match self {
            Parameters::ShoSpectrum(_) => ExperimentKind::ShoSpectrum,
            Parameters::ShoBands(_) => ExperimentKind::ShoBands,
            Parameters::MehlerVerify(_) => ExperimentKind::MehlerVerify,
            Parameters::ScatterScan(_) => ExperimentKind::ScatterScan,
            Parameters::DthetaRun(_) => ExperimentKind::DthetaRun,
            Parameters::SpecfunEval(_) => ExperimentKind::SpecfunEval,
        }
    }
}

/// A single experiment: what to run, with which seed, and where to write.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ExperimentConfig {
    pub kind: ExperimentKind,
    pub parameters: Parameters,
    pub seed: u64,
    /// file name of the primary output, relative to the output directory
    pub output: Option<PathBuf>,
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct RawConfig {
    kind: ExperimentKind,
    #[serde(default)]
    parameters: Option<Value>,
    #[serde(default)]
    seed: u64,
    #[serde(default)]
    output: Option<PathBuf>,
}

fn parse_params<T: serde::de::DeserializeOwned>(v: Value) -> Result<T> {
    serde_json::from_value(v).map_err(|e| Error::config("parameters", e.to_string()))
}

fn check_size(field: &str, n: usize, min: usize) -> Result<()> {
    if n < min || n > MAX_SIZE {
        return Err(Error::config(field, format!("{n} is outside [{min}, {MAX_SIZE}]")));
    }
    Ok(())
}

impl ExperimentConfig {
    pub fn new(parameters: Parameters, seed: u64, output: Option<PathBuf>) -> Result<Self> {
        let cfg = Self {
            kind: parameters.kind(),
            parameters,
            seed,
            output,
        };
        cfg.validate()?;
        Ok(cfg)
    }

    /// Parses and validates a JSON config; missing kind-specific fields take defaults
    /// where the kind has them.
    pub fn from_json(text: &str) -> Result<Self> {
        let raw: RawConfig =
            serde_json::from_str(text).map_err(|e| Error::config("config", e.to_string()))?;
        let params = raw
            .parameters
            .unwrap_or_else(|| Value::Object(Default::default()));
        let parameters = match raw.kind {
            ExperimentKind::ShoSpectrum => Parameters::ShoSpectrum(parse_params(params)?),
            ExperimentKind::ShoBands => Parameters::ShoBands(parse_params(params)?),
            ExperimentKind::MehlerVerify => Parameters::MehlerVerify(parse_params(params)?),
            ExperimentKind::ScatterScan => Parameters::ScatterScan(parse_params(params)?),
            ExperimentKind::DthetaRun => Parameters::DthetaRun(parse_params(params)?),
            ExperimentKind::SpecfunEval => Parameters::SpecfunEval(parse_params(params)?),
        };
        Self::new(parameters, raw.seed, raw.output)
    }

    pub fn validate(&self) -> Result<()> {
        match &self.parameters {
            Parameters::ShoSpectrum(p) => {
                check_size("parameters.modes", p.modes, 1)?;
                validate_symbol(&p.symbol)
            }
            Parameters::ShoBands(p) => validate_symbol(&p.symbol),
            Parameters::MehlerVerify(p) => {
                if p.taus.is_empty() {
                    return Err(Error::config("parameters.taus", "must not be empty"));
                }
                for (i, t) in p.taus.iter().enumerate() {
                    if !(*t > 0.0 && *t <= 10.0) {
                        return Err(Error::config(
                            format!("parameters.taus[{i}]"),
                            format!("{t} is outside (0, 10]"),
                        ));
                    }
                }
                Ok(())
            }
            Parameters::ScatterScan(p) => {
                validate_model(&p.model)?;
                let grid = parse_grid(&p.grid).map_err(|_| {
                    Error::config("parameters.grid", format!("expected start:stop:step, got `{}`", p.grid))
                })?;
                if grid.iter().any(|l| l.abs() >= 2.0) {
                    return Err(Error::config("parameters.grid", "energies must lie in (-2, 2)"));
                }
                Ok(())
            }
            Parameters::DthetaRun(p) => {
                validate_model(&p.model)?;
                p.theta.validate().map_err(|e| prefix(e, "parameters.theta."))?;
                check_size("parameters.box", p.box_size, 2)?;
                if p.ladder.is_empty() {
                    return Err(Error::config("parameters.ladder", "must not be empty"));
                }
                for (i, n) in p.ladder.iter().enumerate() {
                    check_size(&format!("parameters.ladder[{i}]"), *n, 2)?;
                }
                Ok(())
            }
            Parameters::SpecfunEval(p) => {
                if p.function == SpecialFunction::Conical && p.args.len() % 2 != 0 {
                    return Err(Error::config("parameters.args", "conical expects pairs tau, x"));
                }
                Ok(())
            }
        }
    }

    /// Hex SHA-256 of the canonical JSON form.
    pub fn hash(&self) -> String {
        let text = serde_json::to_string(self).expect("config serializes");
        let digest = Sha256::digest(text.as_bytes());
        digest.iter().map(|b| format!("{b:02x}")).collect()
    }
}

fn prefix(e: Error, p: &str) -> Error {
    match e {
        Error::Config { field, message } => Error::Config {
            field: format!("{p}{field}"),
            message,
        },
        other => other,
    }
}

fn validate_model(m: &LatticeModel) -> Result<()> {
    m.validate().map_err(|e| prefix(e, "parameters.model."))?;
    for (i, Site { n, .. }) in m.sites.iter().enumerate() {
        if n.unsigned_abs() > 1000 {
            return Err(Error::config(
                format!("parameters.model.sites[{i}].n"),
                format!("{n} is outside [-1000, 1000]"),
            ));
        }
    }
    Ok(())
}

fn validate_symbol(s: &SymbolSpec) -> Result<()> {
    if s.dim == 0 || s.dim > 8 {
        return Err(Error::config("parameters.symbol.dim", format!("{} is outside [1, 8]", s.dim)));
    }
    s.build().map_err(|e| prefix(e, "parameters.symbol.")).map(|_| ())
}

/// Reads and validates a config file.
pub fn parse_config(path: &Path) -> Result<ExperimentConfig> {
    let text = fs::read_to_string(path)?;
    ExperimentConfig::from_json(&text)
}

/// Reads a JSON value of type `T` from a file, naming the file in errors.
pub fn read_json<T: serde::de::DeserializeOwned>(path: &Path, field: &str) -> Result<T> {
    let text = fs::read_to_string(path)?;
    serde_json::from_str(&text).map_err(|e| Error::config(field, format!("{}: {e}", path.display())))
}

/// One pass/fail check recorded in a manifest.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CheckRecord {
    pub name: String,
    pub value: f64,
    /// human-readable acceptance condition, e.g. `<= 1e-6`
    pub bound: String,
    pub passed: bool,
}

impl CheckRecord {
    pub fn at_most(name: impl Into<String>, value: f64, tol: f64) -> Self {
        Self {
            name: name.into(),
            value,
            bound: format!("<= {tol:e}"),
            passed: value <= tol,
        }
    }

    pub fn at_least(name: impl Into<String>, value: f64, min: f64) -> Self {
        Self {
            name: name.into(),
            value,
            bound: format!(">= {min}"),
            passed: value >= min,
        }
    }

    pub fn within(name: impl Into<String>, value: f64, lo: f64, hi: f64) -> Self {
        Self {
            name: name.into(),
            value,
            bound: format!("in [{lo}, {hi}]"),
            passed: value >= lo && value <= hi,
        }
    }

    pub fn flag(name: impl Into<String>, ok: bool) -> Self {
        Self {
            name: name.into(),
            value: if ok { 1.0 } else { 0.0 },
            bound: "true".into(),
            passed: ok,
        }
    }
}

/// Record emitted next to every run's outputs.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct RunManifest {
    pub config_hash: String,
    pub kind: String,
    pub version: String,
    pub seed: u64,
    pub wall_seconds: f64,
    pub tolerance_profile: String,
    pub outputs: Vec<PathBuf>,
    pub checks: Vec<CheckRecord>,
    pub passed: bool,
}

/// Writes `bytes` to `path` through a temporary file in the same directory and a rename.
pub fn atomic_write(path: &Path, bytes: &[u8]) -> Result<()> {
    let dir = match path.parent() {
        Some(d) if !d.as_os_str().is_empty() => d.to_path_buf(),
        _ => PathBuf::from("."),
    };
    fs::create_dir_all(&dir)?;
    let name = path
        .file_name()
        .ok_or_else(|| Error::config("output", format!("`{}` is not a file path", path.display())))?;
    let tmp = dir.join(format!(".{}.tmp-{}", name.to_string_lossy(), std::process::id()));
    let result = (|| {
        let mut f = fs::File::create(&tmp)?;
        f.write_all(bytes)?;
        f.sync_all()?;
        fs::rename(&tmp, path)
    })();
    if result.is_err() {
        let _ = fs::remove_file(&tmp);
    }
    Ok(result?)
}

pub fn write_json<T: Serialize>(path: &Path, value: &T) -> Result<()> {
    let mut text = serde_json::to_string_pretty(value)?;
    text.push('\n');
    atomic_write(path, text.as_bytes())
}
