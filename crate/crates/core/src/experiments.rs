//! Declarative experiments, their artifacts and pass/fail checks.
//!
//! An experiment is a TOML file with a `name`, a `seed` and exactly one
//! section naming its kind:
//!
//! ```toml
//! name = "disk-spectrum"
//! seed = 7
//!
//! [spectrum]
//! curve = "disk"
//! n = 256
//! ```
//!
//! Running it writes `config.toml` (the resolved config), one or more CSV
//! tables and `record.json` into `<out>/<name>/`. Every file is written to a
//! temporary sibling and renamed into place.

use std::collections::BTreeSet;
use std::f64::consts::PI;
use std::fs;
use std::path::{Path, PathBuf};
use std::time::Instant;

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::domain::Domain;
use crate::error::{Error, Result};
use crate::geometry::CurvePreset;
use crate::growth::{self, GrowthConfig, KernelSpec};
use crate::parallel;
use crate::rng;
use crate::spde::{self, SolverKind, SpdeConfig, TrajectoryRecord};
use crate::steklov::ModeCutoff;
use crate::stochastics::{self, Dissipation};

/// Mixed into every record id so that ids change with the code.
pub const VERSION_TAG: &str = concat!(env!("CARGO_PKG_NAME"), "@", env!("CARGO_PKG_VERSION"));

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    pub name: String,
    #[serde(default)]
    pub seed: u64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub spectrum: Option<SpectrumParams>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub weyl: Option<WeylParams>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub renorm: Option<RenormParams>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub oucheck: Option<OuCheckParams>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub spde: Option<SpdeParams>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub psi: Option<PsiParams>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub growth: Option<GrowthParams>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Kind {
    Spectrum,
    Weyl,
    Renorm,
    Oucheck,
    Spde,
    Psi,
    Growth,
}

impl Kind {
    pub fn as_str(self) -> &'static str {
        match self {
            Kind::Spectrum => "spectrum",
            Kind::Weyl => "weyl",
            Kind::Renorm => "renorm",
            Kind::Oucheck => "oucheck",
            Kind::Spde => "spde",
            Kind::Psi => "psi",
            Kind::Growth => "growth",
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct SpectrumParams {
    pub curve: String,
    pub n: usize,
    /// Eigenvalues written to the table.
    pub k_max: usize,
    /// Disk only: modes compared with `⌈k/2⌉`.
    pub oracle_modes: usize,
    pub tolerance: f64,
    pub max_seconds: f64,
}

impl Default for SpectrumParams {
    fn default() -> Self {
        SpectrumParams {
            curve: "disk".into(),
            n: 256,
            k_max: 128,
            oracle_modes: 128,
            tolerance: 1e-6,
            max_seconds: 5.0,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct WeylParams {
    pub curve: String,
    pub n: usize,
    pub gap_min: f64,
    pub k_min: usize,
    pub k_max: usize,
    pub ratio_band: [f64; 2],
    pub ell_max: usize,
    /// Bound on the local Weyl residual.
    pub residual_max: f64,
    /// Disk: relative tolerance of the fitted slope against 2.
    pub slope_tolerance: f64,
    /// Bound on the sup residual at `ell_max` over the one at `ell_max / 2`.
    pub growth_factor: f64,
    pub pdo_k_max: usize,
    /// Disk: bound on the order-zero defect.
    pub pdo_tolerance: f64,
    /// Other curves: max defect over median defect.
    pub pdo_spread: f64,
}

impl Default for WeylParams {
    fn default() -> Self {
        WeylParams {
            curve: "disk".into(),
            n: 256,
            gap_min: 0.3,
            k_min: 8,
            k_max: 64,
            ratio_band: [0.5, 2.0],
            ell_max: 64,
            residual_max: 3.0,
            slope_tolerance: 0.05,
            growth_factor: 1.25,
            pdo_k_max: 64,
            pdo_tolerance: 1e-6,
            pdo_spread: 2.0,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct RenormParams {
    pub curve: String,
    pub n: usize,
    pub fit_min: usize,
    pub fit_max: usize,
    pub r2_min: f64,
    /// Disk: tolerance for the closed forms at `⌊η⁻¹⌋ = 3, 4`.
    pub exact_tolerance: f64,
}

impl Default for RenormParams {
    fn default() -> Self {
        RenormParams {
            curve: "disk".into(),
            n: 1024,
            fit_min: 16,
            fit_max: 128,
            r2_min: 0.99,
            exact_tolerance: 1e-10,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct OuCheckParams {
    pub curve: String,
    pub n: usize,
    /// `⌊η⁻¹⌋` for the stationarity check.
    pub modes: usize,
    pub replicas: usize,
    pub steps: usize,
    pub dt: f64,
    pub variance_tolerance: f64,
    pub lag_tolerance: f64,
    pub max_seconds: f64,
    /// Grid for the Cauchy check; needs `N/4` above the largest level.
    pub cauchy_n: usize,
    pub cauchy_pairs: Vec<[usize; 2]>,
    pub cauchy_replicas: usize,
    pub cauchy_alpha: f64,
    pub cauchy_sigmas: f64,
}

impl Default for OuCheckParams {
    fn default() -> Self {
        OuCheckParams {
            curve: "disk".into(),
            n: 64,
            modes: 16,
            replicas: 10_000,
            steps: 1000,
            dt: 0.01,
            variance_tolerance: 0.05,
            lag_tolerance: 0.05,
            max_seconds: 60.0,
            cauchy_n: 256,
            cauchy_pairs: vec![[16, 32], [32, 64]],
            cauchy_replicas: 4000,
            cauchy_alpha: 0.9,
            cauchy_sigmas: 3.0,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "kebab-case")]
pub enum SpdeMode {
    /// One trajectory of `config.solver`.
    #[default]
    Run,
    /// Singular solver against the split solution at `dt` and `dt/2`.
    DpdConsistency,
    /// Singular solver with no noise from zero data.
    TrivialDrift,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct SpdeParams {
    pub mode: SpdeMode,
    pub config: SpdeConfig,
    /// DPD: bound on the final `L²` mismatch at `dt`.
    pub tolerance: f64,
    /// DPD: bound on mismatch(dt/2) / mismatch(dt).
    pub halving_ratio_max: f64,
    /// DPD on the disk: bound on `sup |h^{reg,1}|`.
    pub reg1_tolerance: f64,
    pub drift_tolerance: f64,
    /// DPD: start the OU ensemble from its stationary law.
    pub stationary_start: bool,
}

impl Default for SpdeParams {
    fn default() -> Self {
        SpdeParams {
            mode: SpdeMode::Run,
            config: SpdeConfig::default(),
            tolerance: 1e-2,
            halving_ratio_max: 0.6,
            reg1_tolerance: 1e-8,
            drift_tolerance: 1e-10,
            stationary_start: true,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct PsiParams {
    pub curve: String,
    pub n: usize,
    pub levels: Vec<usize>,
    pub replicas: usize,
    pub dt: f64,
    pub horizon: f64,
    pub record_every: usize,
    pub substeps: usize,
    pub gamma: f64,
}

impl Default for PsiParams {
    fn default() -> Self {
        PsiParams {
            curve: "disk".into(),
            n: 512,
            levels: vec![8, 16, 32, 64],
            replicas: 50,
            dt: 1.0 / 4096.0,
            horizon: 0.25,
            record_every: 64,
            substeps: 4,
            gamma: 0.1,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "kebab-case")]
pub enum GrowthMode {
    /// Realized bracket of the noise integral across `eps_list`.
    #[default]
    Bracket,
    /// Flat inflation with `K ≡ 1` and the size of the fluctuation field.
    Sanity,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct GrowthParams {
    pub mode: GrowthMode,
    pub config: GrowthConfig,
    pub eps_list: Vec<f64>,
    /// Bracket: relative tolerance at the last entry of `eps_list`.
    pub bracket_tolerance: f64,
    /// Sanity: bound on `sup |Y|` over all replicas.
    pub y_bound: f64,
    /// Sanity: bound on `max |I - ε^{-1/3} t|` for `K ≡ 1`.
    pub flat_tolerance: f64,
}

impl Default for GrowthParams {
    fn default() -> Self {
        GrowthParams {
            mode: GrowthMode::Bracket,
            config: GrowthConfig::default(),
            eps_list: vec![0.4, 0.3, 0.2],
            bracket_tolerance: 0.3,
            y_bound: 10.0,
            flat_tolerance: 1e-8,
        }
    }
}

impl ExperimentConfig {
    /// A config of the given kind with default parameters.
    pub fn with_defaults(name: impl Into<String>, kind: Kind, seed: u64) -> Self {
        let mut cfg = ExperimentConfig {
            name: name.into(),
            seed,
            spectrum: None,
            weyl: None,
            renorm: None,
            oucheck: None,
            spde: None,
            psi: None,
            growth: None,
        };
        match kind {
            Kind::Spectrum => cfg.spectrum = Some(Default::default()),
            Kind::Weyl => cfg.weyl = Some(Default::default()),
            Kind::Renorm => cfg.renorm = Some(Default::default()),
            Kind::Oucheck => cfg.oucheck = Some(Default::default()),
            Kind::Spde => cfg.spde = Some(Default::default()),
            Kind::Psi => cfg.psi = Some(Default::default()),
            Kind::Growth => cfg.growth = Some(Default::default()),
        }
        cfg
    }

    pub fn from_toml(text: &str) -> Result<Self> {
        let cfg: ExperimentConfig = toml::from_str(text).map_err(|e| toml_error(text, &e))?;
        cfg.kind()?;
        Ok(cfg)
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        Self::from_toml(&fs::read_to_string(path)?)
    }

    pub fn to_toml(&self) -> Result<String> {
        toml::to_string(self).map_err(|e| Error::config("", e.to_string()))
    }

    pub fn kind(&self) -> Result<Kind> {
        let present: Vec<Kind> = [
            (self.spectrum.is_some(), Kind::Spectrum),
            (self.weyl.is_some(), Kind::Weyl),
            (self.renorm.is_some(), Kind::Renorm),
            (self.oucheck.is_some(), Kind::Oucheck),
            (self.spde.is_some(), Kind::Spde),
            (self.psi.is_some(), Kind::Psi),
            (self.growth.is_some(), Kind::Growth),
        ]
        .into_iter()
        .filter_map(|(on, k)| on.then_some(k))
        .collect();
        match present.as_slice() {
            [k] => Ok(*k),
            [] => Err(Error::config(
                "",
                "no experiment section; expected one of spectrum, weyl, renorm, oucheck, spde, psi, growth",
            )),
            _ => Err(Error::config("", "more than one experiment section")),
        }
    }

    /// Content address: SHA-256 of the version tag and the resolved config.
    pub fn id(&self) -> Result<String> {
        let mut h = Sha256::new();
        h.update(VERSION_TAG.as_bytes());
        h.update([0]);
        h.update(serde_json::to_vec(self)?);
        Ok(hex::encode(h.finalize()))
    }

    pub fn validate(&self) -> Result<()> {
        if self.name.is_empty()
            || !self
                .name
                .chars()
                .all(|c| c.is_ascii_alphanumeric() || matches!(c, '-' | '_' | '.'))
            || self.name.starts_with('.')
        {
            return Err(Error::config("name", "must be a non-empty file-name-safe string"));
        }
        let curve = |section: &str, c: &str| {
            c.parse::<CurvePreset>()
                .map(|_| ())
                .map_err(|e| Error::config(format!("{section}.curve"), e.to_string()))
        };
        match self.kind()? {
            Kind::Spectrum => curve("spectrum", &self.spectrum.as_ref().unwrap().curve),
            Kind::Weyl => curve("weyl", &self.weyl.as_ref().unwrap().curve),
            Kind::Renorm => {
                let p = self.renorm.as_ref().unwrap();
                curve("renorm", &p.curve)?;
                if p.fit_min < 1 || p.fit_max <= p.fit_min {
                    return Err(Error::config("renorm.fit_max", "needs 1 ≤ fit_min < fit_max"));
                }
                Ok(())
            }
            Kind::Oucheck => {
                let p = self.oucheck.as_ref().unwrap();
                curve("oucheck", &p.curve)?;
                if p.replicas < 2 || p.steps < 2 {
                    return Err(Error::config("oucheck.replicas", "needs at least two replicas and steps"));
                }
                if !(p.dt > 0.0) {
                    return Err(Error::config("oucheck.dt", "must be positive"));
                }
                Ok(())
            }
            Kind::Spde => {
                let p = self.spde.as_ref().unwrap();
                curve("spde.config", &p.config.curve)?;
                p.config.validate().map_err(|e| prefix("spde.config", e))
            }
            Kind::Psi => {
                let p = self.psi.as_ref().unwrap();
                curve("psi", &p.curve)?;
                if p.levels.len() < 2 || p.replicas == 0 {
                    return Err(Error::config("psi.levels", "needs at least two levels and one replica"));
                }
                Ok(())
            }
            Kind::Growth => {
                let p = self.growth.as_ref().unwrap();
                p.config.validate().map_err(|e| prefix("growth.config", e))?;
                if p.eps_list.is_empty() {
                    return Err(Error::config("growth.eps_list", "must not be empty"));
                }
                for &eps in &p.eps_list {
                    GrowthConfig { eps, ..p.config.clone() }
                        .validate()
                        .map_err(|e| prefix("growth.eps_list", e))?;
                }
                Ok(())
            }
        }
    }
}

fn prefix(section: &str, e: Error) -> Error {
    match e {
        Error::Config { path, message } => Error::config(format!("{section}.{path}"), message),
        other => other,
    }
}

/// Turns a TOML error into a config error whose path names the offending key.
fn toml_error(text: &str, e: &toml::de::Error) -> Error {
    let msg = e.message().to_string();
    let section = e
        .span()
        .map(|span| {
            text[..span.start.min(text.len())]
                .lines()
                .filter_map(|l| {
                    let l = l.trim();
                    (l.starts_with('[') && l.ends_with(']'))
                        .then(|| l.trim_matches(|c| c == '[' || c == ']').trim().to_string())
                })
                .next_back()
                .unwrap_or_default()
        })
        .unwrap_or_default();
    let key = msg
        .split('`')
        .nth(1)
        .filter(|_| msg.starts_with("unknown field"))
        .map(str::to_string);
    let path = match (section.is_empty(), key) {
        (true, Some(k)) => k,
        (false, Some(k)) => format!("{section}.{k}"),
        (_, None) => section,
    };
    Error::Config { path, message: msg }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Check {
    pub name: String,
    pub value: f64,
    /// Human-readable condition, e.g. `< 1e-6`.
    pub condition: String,
    pub passed: bool,
}

impl Check {
    fn at_most(name: &str, value: f64, bound: f64) -> Self {
        Check {
            name: name.into(),
            value,
            condition: format!("≤ {bound:e}"),
            passed: value <= bound,
        }
    }

    fn at_least(name: &str, value: f64, bound: f64) -> Self {
        Check {
            name: name.into(),
            value,
            condition: format!("≥ {bound}"),
            passed: value >= bound,
        }
    }

    fn holds(name: &str, value: f64, condition: impl Into<String>, passed: bool) -> Self {
        Check {
            name: name.into(),
            value,
            condition: condition.into(),
            passed,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Artifact {
    pub path: String,
    pub sha256: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunRecord {
    pub id: String,
    pub name: String,
    pub kind: Kind,
    pub seed: u64,
    pub version: String,
    pub wall_seconds: f64,
    pub artifacts: Vec<Artifact>,
    pub checks: Vec<Check>,
    pub warnings: Vec<String>,
    pub passed: bool,
    pub config: ExperimentConfig,
}

/// Tables and checks produced by one experiment body.
#[derive(Default)]
struct Outcome {
    tables: Vec<(String, Vec<u8>)>,
    checks: Vec<Check>,
    warnings: Vec<String>,
}

impl Outcome {
    fn table<R: Serialize>(&mut self, file: &str, rows: impl IntoIterator<Item = R>) -> Result<()> {
        let mut w = csv::Writer::from_writer(Vec::new());
        for r in rows {
            w.serialize(r)?;
        }
        let bytes = w.into_inner().map_err(|e| Error::Io(e.into_error()))?;
        self.tables.push((file.to_string(), bytes));
        Ok(())
    }
}

/// Writes `bytes` to `path` through a temporary file and a rename.
pub fn write_atomic(path: &Path, bytes: &[u8]) -> Result<()> {
    let file = path
        .file_name()
        .ok_or_else(|| Error::Io(std::io::Error::other("path has no file name")))?;
    let tmp = path.with_file_name(format!(".{}.tmp", file.to_string_lossy()));
    fs::write(&tmp, bytes)?;
    fs::rename(&tmp, path)?;
    Ok(())
}

fn sha256_hex(bytes: &[u8]) -> String {
    hex::encode(Sha256::digest(bytes))
}

fn domain(curve: &str, n: usize) -> Result<Domain> {
    Domain::from_preset(&curve.parse()?, n)
}

/// Runs one experiment and writes its artifacts into `out_root/<name>/`.
pub fn run_experiment(cfg: &ExperimentConfig, out_root: &Path) -> Result<RunRecord> {
    cfg.validate()?;
    let kind = cfg.kind()?;
    let id = cfg.id()?;
    let started = Instant::now();
    let outcome = match kind {
        Kind::Spectrum => spectrum(cfg.spectrum.as_ref().unwrap())?,
        Kind::Weyl => weyl(cfg.weyl.as_ref().unwrap())?,
        Kind::Renorm => renorm(cfg.renorm.as_ref().unwrap())?,
        Kind::Oucheck => oucheck(cfg.oucheck.as_ref().unwrap(), cfg.seed)?,
        Kind::Spde => spde_experiment(cfg.spde.as_ref().unwrap(), cfg.seed)?,
        Kind::Psi => psi(cfg.psi.as_ref().unwrap(), cfg.seed)?,
        Kind::Growth => growth_experiment(cfg.growth.as_ref().unwrap(), cfg.seed)?,
    };
    let wall_seconds = started.elapsed().as_secs_f64();

    let dir = out_root.join(&cfg.name);
    fs::create_dir_all(&dir)?;
    write_atomic(&dir.join("config.toml"), cfg.to_toml()?.as_bytes())?;
    let mut artifacts = Vec::new();
    for (file, bytes) in &outcome.tables {
        write_atomic(&dir.join(file), bytes)?;
        artifacts.push(Artifact {
            path: file.clone(),
            sha256: sha256_hex(bytes),
        });
    }
    let passed = outcome.checks.iter().all(|c| c.passed);
    let record = RunRecord {
        id,
        name: cfg.name.clone(),
        kind,
        seed: cfg.seed,
        version: VERSION_TAG.into(),
        wall_seconds,
        artifacts,
        checks: outcome.checks,
        warnings: outcome.warnings,
        passed,
        config: cfg.clone(),
    };
    write_atomic(&dir.join("record.json"), &serde_json::to_vec_pretty(&record)?)?;
    Ok(record)
}

#[derive(Debug, Clone, Serialize, Deserialize, Default)]
#[serde(deny_unknown_fields)]
pub struct Manifest {
    #[serde(default)]
    pub experiment: Vec<ExperimentConfig>,
}

impl Manifest {
    pub fn from_toml(text: &str) -> Result<Self> {
        let m: Manifest = toml::from_str(text).map_err(|e| toml_error(text, &e))?;
        let mut names = BTreeSet::new();
        for (i, e) in m.experiment.iter().enumerate() {
            e.kind().map_err(|err| prefix(&format!("experiment[{i}]"), err))?;
            if !names.insert(e.name.as_str()) {
                return Err(Error::config(
                    format!("experiment[{i}].name"),
                    format!("duplicate experiment name `{}`", e.name),
                ));
            }
        }
        Ok(m)
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        Self::from_toml(&fs::read_to_string(path)?)
    }
}

#[derive(Debug, Clone, Serialize)]
pub struct SuiteEntry {
    pub name: String,
    pub record: Option<RunRecord>,
    /// Set when the experiment could not run.
    pub error: Option<String>,
    /// `config` or `numerical` for errors.
    pub error_kind: Option<String>,
}

#[derive(Debug, Clone, Serialize)]
pub struct SuiteReport {
    pub entries: Vec<SuiteEntry>,
    pub passed: bool,
}

/// Classifies errors for reporting and exit codes.
pub fn is_config_error(e: &Error) -> bool {
    matches!(
        e,
        Error::Config { .. } | Error::InvalidCurve(_) | Error::Domain(_) | Error::Io(_)
    )
}

/// Runs every experiment (concurrently) and aggregates; one failure does not
/// stop the others.
pub fn suite(manifest: &Manifest, out_root: &Path) -> Result<SuiteReport> {
    fs::create_dir_all(out_root)?;
    let entries: Vec<SuiteEntry> = parallel::map_slice(&manifest.experiment, |cfg| {
        match run_experiment(cfg, out_root) {
            Ok(record) => SuiteEntry {
                name: cfg.name.clone(),
                record: Some(record),
                error: None,
                error_kind: None,
            },
            Err(e) => SuiteEntry {
                name: cfg.name.clone(),
                error_kind: Some(if is_config_error(&e) { "config" } else { "numerical" }.into()),
                error: Some(e.to_string()),
                record: None,
            },
        }
    });
    let passed = entries
        .iter()
        .all(|e| e.record.as_ref().is_some_and(|r| r.passed));
    let report = SuiteReport { entries, passed };
    write_atomic(&out_root.join("suite.json"), &serde_json::to_vec_pretty(&report)?)?;
    Ok(report)
}

fn spectrum(p: &SpectrumParams) -> Result<Outcome> {
    #[derive(Serialize)]
    struct Row {
        k: usize,
        lambda: f64,
        oracle: Option<f64>,
        relative_error: Option<f64>,
    }
    let preset: CurvePreset = p.curve.parse()?;
    let started = Instant::now();
    let d = Domain::from_preset(&preset, p.n)?;
    let elapsed = started.elapsed().as_secs_f64();
    let disk = matches!(preset, CurvePreset::Disk);
    let k_max = p.k_max.min(d.len() - 1);
    let rows: Vec<Row> = (0..=k_max)
        .map(|k| {
            let lambda = d.basis.eigenvalue(k);
            let oracle = disk.then(|| k.div_ceil(2) as f64);
            let relative_error = oracle.map(|o| if o == 0.0 { lambda.abs() } else { (lambda - o).abs() / o });
            Row { k, lambda, oracle, relative_error }
        })
        .collect();
    let mut out = Outcome::default();
    if disk {
        let worst = rows
            .iter()
            .take(p.oracle_modes.min(k_max) + 1)
            .filter_map(|r| r.relative_error)
            .fold(0.0, f64::max);
        out.checks.push(Check::at_most("disk_relative_error", worst, p.tolerance));
    }
    out.checks.push(Check::at_least("spectral_gap", d.basis.eigenvalue(1), 0.0));
    out.checks.push(Check::at_most("runtime_seconds", elapsed, p.max_seconds));
    out.table("spectrum.csv", rows)?;
    Ok(out)
}

/// Rounding allowance on the closed Weyl band; the disk sits on its edge.
const BAND_SLACK: f64 = 1e-9;

fn weyl(p: &WeylParams) -> Result<Outcome> {
    let preset: CurvePreset = p.curve.parse()?;
    let disk = matches!(preset, CurvePreset::Disk);
    let d = Domain::from_preset(&preset, p.n)?;
    let mut out = Outcome::default();
    out.checks.push(Check::at_least("lambda_1", d.basis.eigenvalue(1), p.gap_min));

    #[derive(Serialize)]
    struct Ratio {
        k: usize,
        lambda: f64,
        ratio: f64,
    }
    let ratios: Vec<Ratio> = (1..=p.k_max)
        .map(|k| {
            let lambda = d.basis.eigenvalue(k);
            Ratio { k, lambda, ratio: lambda / k as f64 }
        })
        .collect();
    let band: Vec<f64> = ratios.iter().filter(|r| r.k >= p.k_min).map(|r| r.ratio).collect();
    let (lo, hi) = band
        .iter()
        .fold((f64::INFINITY, f64::NEG_INFINITY), |(a, b), &r| (a.min(r), b.max(r)));
    out.checks.push(Check::holds(
        "weyl_ratio_min",
        lo,
        format!("≥ {}", p.ratio_band[0]),
        lo >= p.ratio_band[0] * (1.0 - BAND_SLACK),
    ));
    out.checks.push(Check::holds(
        "weyl_ratio_max",
        hi,
        format!("≤ {}", p.ratio_band[1]),
        hi <= p.ratio_band[1] * (1.0 + BAND_SLACK),
    ));
    out.table("weyl.csv", ratios)?;

    let report = d.basis.weyl_diagnostics(p.ell_max)?;
    out.checks.push(Check::at_most("local_weyl_residual", report.sup_residual, p.residual_max));
    if disk {
        let rel = (report.slope - 2.0).abs() / 2.0;
        out.checks.push(Check::at_most("local_weyl_slope_error", rel, p.slope_tolerance));
    }
    let half = d.basis.weyl_diagnostics(p.ell_max / 2)?;
    out.checks.push(Check::at_most(
        "local_weyl_growth",
        report.sup_residual / half.sup_residual.max(f64::MIN_POSITIVE),
        p.growth_factor,
    ));
    out.table("local_weyl.csv", &report.rows)?;

    #[derive(Serialize)]
    struct Defect {
        k: usize,
        defect: f64,
    }
    let defects: Vec<Defect> = (1..=p.pdo_k_max)
        .map(|k| d.basis.pdo_defect(&d.heat, k).map(|defect| Defect { k, defect }))
        .collect::<Result<_>>()?;
    let max = defects.iter().map(|r| r.defect).fold(0.0, f64::max);
    if disk {
        out.checks.push(Check::at_most("pdo_defect_max", max, p.pdo_tolerance));
    } else {
        let mut sorted: Vec<f64> = defects.iter().map(|r| r.defect).collect();
        sorted.sort_by(f64::total_cmp);
        let median = sorted[sorted.len() / 2];
        out.checks.push(Check::at_most("pdo_defect_spread", max / median, p.pdo_spread));
    }
    out.table("pdo.csv", defects)?;
    Ok(out)
}

/// Least squares `y ≈ a + b x`; returns `(a, b, r²)`.
pub fn linear_fit(x: &[f64], y: &[f64]) -> (f64, f64, f64) {
    let n = x.len() as f64;
    let mx = x.iter().sum::<f64>() / n;
    let my = y.iter().sum::<f64>() / n;
    let sxy: f64 = x.iter().zip(y).map(|(a, b)| (a - mx) * (b - my)).sum();
    let sxx: f64 = x.iter().map(|a| (a - mx).powi(2)).sum();
    let syy: f64 = y.iter().map(|b| (b - my).powi(2)).sum();
    let b = sxy / sxx;
    (my - b * mx, b, sxy * sxy / (sxx * syy))
}

fn renorm(p: &RenormParams) -> Result<Outcome> {
    let preset: CurvePreset = p.curve.parse()?;
    let d = Domain::from_preset(&preset, p.n)?;
    #[derive(Serialize)]
    struct Row {
        m: usize,
        eta: f64,
        log_inv_eta: f64,
        c_eta: f64,
    }
    let rows: Vec<Row> = (1..=p.fit_max)
        .map(|m| {
            let cut = ModeCutoff(m);
            stochastics::renorm_constant(&d.basis, cut).map(|c| Row {
                m,
                eta: cut.eta(),
                log_inv_eta: (m as f64).ln(),
                c_eta: c,
            })
        })
        .collect::<Result<_>>()?;
    let mut out = Outcome::default();
    if matches!(preset, CurvePreset::Disk) {
        for (m, exact) in [(3usize, PI / 4.0), (4, 5.0 * PI / 12.0)] {
            let err = (rows[m - 1].c_eta - exact).abs();
            out.checks.push(Check::at_most(&format!("closed_form_m{m}"), err, p.exact_tolerance));
        }
    }
    let fit: Vec<&Row> = rows.iter().filter(|r| r.m >= p.fit_min).collect();
    let x: Vec<f64> = fit.iter().map(|r| r.log_inv_eta).collect();
    let y: Vec<f64> = fit.iter().map(|r| r.c_eta).collect();
    let (intercept, slope, r2) = linear_fit(&x, &y);
    out.checks.push(Check::at_least("log_fit_r2", r2, p.r2_min));
    out.table("renorm.csv", rows)?;
    #[derive(Serialize)]
    struct Fit {
        fit_min: usize,
        fit_max: usize,
        slope: f64,
        intercept: f64,
        r2: f64,
    }
    out.table(
        "renorm_fit.csv",
        [Fit { fit_min: p.fit_min, fit_max: p.fit_max, slope, intercept, r2 }],
    )?;
    Ok(out)
}

/// Per-mode OU statistics after `steps` exact steps from zero data.
#[derive(Debug, Clone, Serialize)]
pub struct OuModeRow {
    pub k: usize,
    pub lambda: f64,
    pub variance: f64,
    pub variance_theory: f64,
    pub variance_error: f64,
    pub lag_covariance: f64,
    pub lag_theory: f64,
    pub lag_error: f64,
}

pub fn ou_stationarity(p: &OuCheckParams, seed: u64) -> Result<Vec<OuModeRow>> {
    let d = domain(&p.curve, p.n)?;
    let cut = ModeCutoff(p.modes);
    d.basis.check_cutoff(cut)?;
    let k = cut.count();
    let burn = p.steps / 2;
    // (final z², Σ z_t z_{t+1}, pair count) per mode, per replica
    let per: Vec<Result<Vec<(f64, f64)>>> = parallel::map_indices(p.replicas, |r| {
        let mut ens = stochastics::sample_stationary(&d.basis, cut, rng::replica_seed(seed, r as u64))?
            .zeroed()
            .with_dissipation(Dissipation::HalfSquare);
        let mut lag = vec![0.0; k];
        let mut prev = ens.coefficients().to_vec();
        for s in 0..p.steps {
            ens.ou_step(p.dt)?;
            let z = ens.coefficients();
            if s >= burn {
                for j in 0..k {
                    lag[j] += prev[j] * z[j];
                }
            }
            prev.copy_from_slice(z);
        }
        Ok(prev.iter().zip(lag).map(|(z, l)| (z * z, l)).collect())
    });
    let per: Vec<Vec<(f64, f64)>> = per.into_iter().collect::<Result<_>>()?;
    let pairs = ((p.steps - burn) * p.replicas) as f64;
    Ok((0..k)
        .map(|j| {
            let lambda = d.basis.eigenvalue(j + 1);
            let variance = per.iter().map(|r| r[j].0).sum::<f64>() / p.replicas as f64;
            let lag_covariance = per.iter().map(|r| r[j].1).sum::<f64>() / pairs;
            let variance_theory = Dissipation::HalfSquare.stationary_variance(lambda);
            let lag_theory = variance_theory * (-Dissipation::HalfSquare.rate(lambda) * p.dt).exp();
            OuModeRow {
                k: j + 1,
                lambda,
                variance,
                variance_theory,
                variance_error: (variance - variance_theory).abs() / variance_theory,
                lag_covariance,
                lag_theory,
                lag_error: (lag_covariance - lag_theory).abs() / lag_theory,
            }
        })
        .collect())
}

#[derive(Debug, Clone, Serialize)]
pub struct CauchyRow {
    pub coarse: usize,
    pub fine: usize,
    pub estimate: f64,
    pub std_error: f64,
    pub analytic: f64,
    pub z_score: f64,
}

/// Coupled `E‖h^{η₁,lin} - h^{η₂,lin}‖²_{H^α}` against the analytic tail sum.
pub fn linear_cauchy(p: &OuCheckParams, seed: u64) -> Result<Vec<CauchyRow>> {
    let d = domain(&p.curve, p.cauchy_n)?;
    p.cauchy_pairs
        .iter()
        .map(|&[k1, k2]| {
            let (c1, c2) = (ModeCutoff(k1), ModeCutoff(k2));
            d.basis.check_cutoff(c2)?;
            let samples: Vec<Result<f64>> = parallel::map_indices(p.cauchy_replicas, |r| {
                let s = rng::replica_seed(seed, r as u64);
                let fine = stochastics::sample_stationary(&d.basis, c2, s)?;
                let coarse = stochastics::sample_stationary(&d.basis, c1, s)?;
                let mut c = vec![0.0; d.len()];
                for (j, z) in fine.coefficients().iter().enumerate() {
                    c[j + 1] = z - coarse.coefficients().get(j).copied().unwrap_or(0.0);
                }
                Ok(d.basis.sobolev_norm_from_coefficients(&c, p.cauchy_alpha).powi(2))
            });
            let xs: Vec<f64> = samples.into_iter().collect::<Result<_>>()?;
            let (estimate, std_error) = growth::mean_and_error(&xs);
            let analytic = stochastics::tail_sum(&d.basis, c1, c2, p.cauchy_alpha);
            Ok(CauchyRow {
                coarse: k1,
                fine: k2,
                estimate,
                std_error,
                analytic,
                z_score: (estimate - analytic) / std_error,
            })
        })
        .collect()
}

fn oucheck(p: &OuCheckParams, seed: u64) -> Result<Outcome> {
    let mut out = Outcome::default();
    let started = Instant::now();
    let rows = ou_stationarity(p, seed)?;
    let elapsed = started.elapsed().as_secs_f64();
    let var = rows.iter().map(|r| r.variance_error).fold(0.0, f64::max);
    let lag = rows.iter().map(|r| r.lag_error).fold(0.0, f64::max);
    out.checks.push(Check::at_most("variance_relative_error", var, p.variance_tolerance));
    out.checks.push(Check::at_most("lag_relative_error", lag, p.lag_tolerance));
    out.checks.push(Check::at_most("runtime_seconds", elapsed, p.max_seconds));
    out.table("ou_modes.csv", rows)?;
    let cauchy = linear_cauchy(p, rng::splitmix64(seed ^ 0xC0FFEE))?;
    for r in &cauchy {
        out.checks.push(Check::at_most(
            &format!("cauchy_{}_{}_sigmas", r.coarse, r.fine),
            r.z_score.abs(),
            p.cauchy_sigmas,
        ));
    }
    out.table("cauchy.csv", cauchy)?;
    Ok(out)
}

#[derive(Serialize)]
struct SeriesRow {
    t: f64,
    mean: f64,
    sup_norm: f64,
    sobolev_norm: f64,
    gradient_energy: f64,
}

#[derive(Serialize)]
struct SnapshotRow {
    t: f64,
    node: usize,
    value: f64,
}

fn series_rows(rec: &TrajectoryRecord) -> Vec<SeriesRow> {
    (0..rec.times.len())
        .map(|i| SeriesRow {
            t: rec.times[i],
            mean: rec.mean[i],
            sup_norm: rec.sup_norm[i],
            sobolev_norm: rec.sobolev_norm[i],
            gradient_energy: rec.gradient_energy[i],
        })
        .collect()
}

fn snapshot_rows(rec: &TrajectoryRecord) -> Vec<SnapshotRow> {
    rec.snapshots
        .iter()
        .flat_map(|s| {
            s.values
                .iter()
                .enumerate()
                .map(move |(node, &value)| SnapshotRow { t: s.t, node, value })
        })
        .collect()
}

#[derive(Debug, Clone, Serialize)]
pub struct DpdRow {
    pub dt: f64,
    pub l2_mismatch: f64,
    pub reg1_sup: f64,
    pub blowup: bool,
}

/// Singular solver against `h^{lin} + h^{reg,1} + h^{reg,2}` on one noise path.
pub fn dpd_consistency(cfg: &SpdeConfig, stationary_start: bool) -> Result<DpdRow> {
    let d = domain(&cfg.curve, cfg.n)?;
    let cut = cfg.cutoff()?;
    let ens = stochastics::sample_stationary(&d.basis, cut, cfg.seed)?.with_dissipation(Dissipation::Square);
    let ens = if stationary_start { ens } else { ens.zeroed() };
    let init = ens.linear_field(&d.basis)?;
    let mut path = cfg.noise_path()?;
    let split = spde::solve_dpd(&SpdeConfig { solver: SolverKind::Dpd, ..cfg.clone() }, &d, &init, ens, &mut path)?;
    let mut path = cfg.noise_path()?;
    let direct = spde::solve_singular_galerkin(
        &SpdeConfig { solver: SolverKind::Singular, ..cfg.clone() },
        &d,
        &init,
        &mut path,
    )?;
    let blowup = split.sum.is_truncated() || direct.is_truncated();
    let a = split.sum.final_values().unwrap_or_default();
    let b = direct.final_values().unwrap_or_default();
    let diff: Vec<f64> = a.iter().zip(b).map(|(x, y)| x - y).collect();
    let reg1_sup = split.reg1.sup_norm.iter().copied().fold(0.0, f64::max);
    Ok(DpdRow {
        dt: cfg.dt,
        l2_mismatch: if blowup { f64::INFINITY } else { d.curve.l2_norm(&diff) },
        reg1_sup,
        blowup,
    })
}

fn spde_experiment(p: &SpdeParams, seed: u64) -> Result<Outcome> {
    let mut out = Outcome::default();
    let mut cfg = p.config.clone();
    cfg.seed = rng::splitmix64(seed ^ cfg.seed);
    match p.mode {
        SpdeMode::Run => {
            let d = domain(&cfg.curve, cfg.n)?;
            let init = d.curve.zeros();
            let mut path = cfg.noise_path()?;
            let rec = match cfg.solver {
                SolverKind::Kpz => {
                    let k = spde::make_kernel(&d.curve, &d.heat, cfg.rho)?;
                    spde::solve_regularized_kpz(&cfg, &d, &k, &init, &mut path)?
                }
                SolverKind::Singular => spde::solve_singular_galerkin(&cfg, &d, &init, &mut path)?,
                SolverKind::Dpd => {
                    let ens = stochastics::sample_stationary(&d.basis, cfg.cutoff()?, cfg.seed)?
                        .with_dissipation(Dissipation::Square)
                        .zeroed();
                    spde::solve_dpd(&cfg, &d, &init, ens, &mut path)?.sum
                }
                SolverKind::Psi => {
                    let ens = stochastics::sample_stationary(&d.basis, cfg.cutoff()?, cfg.seed)?;
                    spde::psi_eta(&cfg, &d, ens)?
                }
            };
            if let Some(t) = rec.blowup {
                out.warnings.push(format!("blowup guard tripped at t = {t}"));
            }
            out.table("trajectory.csv", series_rows(&rec))?;
            out.table("snapshots.csv", snapshot_rows(&rec))?;
        }
        SpdeMode::DpdConsistency => {
            let fine = cfg.fine_dt.unwrap_or(cfg.dt / 2.0);
            let coarse = SpdeConfig { fine_dt: Some(fine), ..cfg.clone() };
            let half = SpdeConfig { dt: cfg.dt / 2.0, fine_dt: Some(fine), ..cfg.clone() };
            half.validate().map_err(|e| prefix("spde.config", e))?;
            let rows = vec![
                dpd_consistency(&coarse, p.stationary_start)?,
                dpd_consistency(&half, p.stationary_start)?,
            ];
            for r in &rows {
                if r.blowup {
                    out.warnings.push(format!("blowup guard tripped at dt = {}", r.dt));
                }
            }
            out.checks.push(Check::at_most("l2_mismatch", rows[0].l2_mismatch, p.tolerance));
            out.checks.push(Check::at_most(
                "halving_ratio",
                rows[1].l2_mismatch / rows[0].l2_mismatch,
                p.halving_ratio_max,
            ));
            if matches!(cfg.curve.parse::<CurvePreset>()?, CurvePreset::Disk) {
                let reg1 = rows.iter().map(|r| r.reg1_sup).fold(0.0, f64::max);
                out.checks.push(Check::at_most("disk_reg1_sup", reg1, p.reg1_tolerance));
            }
            out.table("dpd.csv", rows)?;
        }
        SpdeMode::TrivialDrift => {
            let cfg = SpdeConfig { noise: 0.0, solver: SolverKind::Singular, ..cfg };
            let err = trivial_drift_error(&cfg)?;
            out.checks.push(Check::at_most("drift_error", err.1, p.drift_tolerance));
            #[derive(Serialize)]
            struct Row {
                c_eta: f64,
                max_error: f64,
            }
            out.table("drift.csv", [Row { c_eta: err.0, max_error: err.1 }])?;
        }
    }
    Ok(out)
}

/// `(C_η, max_{t,x} |h(t, x) + C_η t|)` for the noiseless singular solver.
pub fn trivial_drift_error(cfg: &SpdeConfig) -> Result<(f64, f64)> {
    let d = domain(&cfg.curve, cfg.n)?;
    let c = stochastics::renorm_constant(&d.basis, cfg.cutoff()?)?;
    let mut path = cfg.noise_path()?;
    let rec = spde::solve_singular_galerkin(cfg, &d, &d.curve.zeros(), &mut path)?;
    let err = rec
        .snapshots
        .iter()
        .flat_map(|s| s.values.iter().map(move |v| (v + c * s.t).abs()))
        .fold(0.0, f64::max);
    Ok((c, err))
}

fn psi(p: &PsiParams, seed: u64) -> Result<Outcome> {
    let d = domain(&p.curve, p.n)?;
    let cfg = SpdeConfig {
        curve: p.curve.clone(),
        n: p.n,
        dt: p.dt,
        horizon: p.horizon,
        record_every: p.record_every,
        substeps: p.substeps,
        gamma: p.gamma,
        seed,
        solver: SolverKind::Psi,
        ..Default::default()
    };
    let levels: Vec<ModeCutoff> = p.levels.iter().map(|&m| ModeCutoff(m)).collect();
    let r = spde::psi_refinement(&cfg, &d, &levels, p.replicas)?;
    #[derive(Serialize)]
    struct Row {
        coarse: usize,
        fine: usize,
        mean_difference: f64,
        std_error: f64,
    }
    let rows: Vec<Row> = (0..r.mean_difference.len())
        .map(|i| Row {
            coarse: r.levels[i],
            fine: r.levels[i + 1],
            mean_difference: r.mean_difference[i],
            std_error: r.std_error[i],
        })
        .collect();
    let decreasing = r.mean_difference.windows(2).all(|w| w[1] < w[0]);
    let worst = r
        .mean_difference
        .windows(2)
        .map(|w| w[1] / w[0])
        .fold(0.0, f64::max);
    let mut out = Outcome::default();
    out.checks.push(Check::holds(
        "monotone_decrease",
        worst,
        "consecutive ratio < 1",
        decreasing,
    ));
    out.table("psi.csv", rows)?;
    Ok(out)
}

#[derive(Serialize)]
struct IntRow {
    eps: f64,
    replica: usize,
    probe: usize,
    t: f64,
    int_noise: f64,
    martingale: f64,
}

fn growth_experiment(p: &GrowthParams, seed: u64) -> Result<Outcome> {
    let cfg = GrowthConfig {
        seed: rng::splitmix64(seed ^ p.config.seed),
        ..p.config.clone()
    };
    let d = Domain::from_preset(&CurvePreset::Disk, cfg.n)?;
    let mut out = Outcome::default();
    match p.mode {
        GrowthMode::Bracket => {
            let kernel = cfg.kernel.build(&d)?;
            let mut rows = Vec::new();
            let mut series = Vec::new();
            for &eps in &p.eps_list {
                let runs = growth::bracket_runs(&cfg, &d, &kernel, eps)?;
                let probes = cfg.resolved_probes(&d);
                for (r, run) in runs.iter().enumerate() {
                    for (pi, &x) in probes.iter().enumerate() {
                        for (i, &t) in run.times.iter().enumerate() {
                            series.push(IntRow {
                                eps,
                                replica: r,
                                probe: x,
                                t,
                                int_noise: run.int_noise[pi][i],
                                martingale: run.martingale[pi][i],
                            });
                        }
                    }
                }
                rows.extend(growth::bracket_rows(&cfg, &d, &kernel, eps, &runs));
            }
            let last = *p.eps_list.last().unwrap();
            let at_last: Vec<&growth::BracketRow> = rows.iter().filter(|r| r.eps == last).collect();
            let raw = at_last.iter().map(|r| r.raw_relative_bias.abs()).fold(0.0, f64::max);
            let mart = at_last
                .iter()
                .map(|r| r.martingale_relative_bias.abs())
                .fold(0.0, f64::max);
            out.checks.push(Check::at_most("bracket_relative_bias", raw, p.bracket_tolerance));
            let probes = cfg.resolved_probes(&d);
            let shrinking = probes.iter().all(|&x| {
                let b: Vec<f64> = rows
                    .iter()
                    .filter(|r| r.probe == x)
                    .map(|r| r.raw_relative_bias.abs())
                    .collect();
                b.windows(2).all(|w| w[1] < w[0])
            });
            out.checks.push(Check::holds("bias_shrinking", raw, "decreasing along eps_list", shrinking));
            out.checks
                .push(Check::at_most("martingale_relative_bias", mart, p.bracket_tolerance));
            out.table("bracket_report.csv", rows)?;
            out.table("int_noise.csv", series)?;
        }
        GrowthMode::Sanity => {
            let flat_cfg = GrowthConfig {
                kernel: KernelSpec::Constant,
                replicas: 1,
                ..cfg.clone()
            };
            let flat = growth::run_growth(&flat_cfg, &d, &KernelSpec::Constant.build(&d)?, cfg.seed)?;
            out.checks
                .push(Check::at_most("flat_deviation", flat.max_flat_deviation, p.flat_tolerance));
            let kernel = cfg.kernel.build(&d)?;
            let runs: Vec<Result<growth::GrowthRun>> = parallel::map_indices(cfg.replicas, |r| {
                growth::run_growth(&cfg, &d, &kernel, rng::replica_seed(cfg.seed, r as u64))
            });
            let runs: Vec<growth::GrowthRun> = runs.into_iter().collect::<Result<_>>()?;
            let sup = runs.iter().map(|r| r.fluctuation_sup).fold(0.0, f64::max);
            out.checks.push(Check::at_most("fluctuation_sup", sup, p.y_bound));
            #[derive(Serialize)]
            struct Row {
                replica: usize,
                fluctuation_sup: f64,
                local_time: f64,
            }
            out.table(
                "fluctuation.csv",
                runs.iter().enumerate().map(|(replica, r)| Row {
                    replica,
                    fluctuation_sup: r.fluctuation_sup,
                    local_time: r.particle.local_time,
                }),
            )?;
            let eps_third = cfg.eps.powf(-1.0 / 3.0);
            let snaps = runs.iter().enumerate().flat_map(|(replica, r)| {
                r.final_interface.iter().enumerate().map(move |(node, &v)| InterfaceRow {
                    replica,
                    node,
                    interface: v,
                    fluctuation: eps_third * (v - eps_third * cfg.horizon),
                })
            });
            out.table("interfaces.csv", snaps)?;
        }
    }
    Ok(out)
}

#[derive(Serialize)]
struct InterfaceRow {
    replica: usize,
    node: usize,
    interface: f64,
    fluctuation: f64,
}

/// Paths of the CSV artifacts of a record, relative to `out_root`.
pub fn artifact_paths(record: &RunRecord, out_root: &Path) -> Vec<PathBuf> {
    record
        .artifacts
        .iter()
        .map(|a| out_root.join(&record.name).join(&a.path))
        .collect()
}
