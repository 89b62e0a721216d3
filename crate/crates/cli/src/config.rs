//! Run configuration: strict JSON parsing, inline overrides, validation and the normal form.

use std::path::{Path, PathBuf};

use serde::de::DeserializeOwned;
use serde::{Deserialize, Serialize};
use serde_json::{Map, Value};
use sha2::{Digest, Sha256};
use stiefel_priors::models::{Parameterization, QPrior};
use stiefel_priors::{CorrelationFamily, EntryLaw, HmcConfig};

use crate::error::CliError;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Command {
    SamplePrior,
    Project,
    TheoryCheck,
    FitEigenmodel,
    FitSvd,
    Diagnose,
}

impl Command {
    pub const ALL: [Command; 6] = [
        Command::SamplePrior,
        Command::Project,
        Command::TheoryCheck,
        Command::FitEigenmodel,
        Command::FitSvd,
        Command::Diagnose,
    ];

    pub fn name(self) -> &'static str {
        match self {
            Command::SamplePrior => "sample-prior",
            Command::Project => "project",
            Command::TheoryCheck => "theory-check",
            Command::FitEigenmodel => "fit-eigenmodel",
            Command::FitSvd => "fit-svd",
            Command::Diagnose => "diagnose",
        }
    }

    pub fn from_name(s: &str) -> Option<Self> {
        Self::ALL.into_iter().find(|c| c.name() == s)
    }

    pub fn stochastic(self) -> bool {
        !matches!(self, Command::Project | Command::Diagnose)
    }
}

/// Entry law as written in a config; checked by validation rather than at parse time.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "law", rename_all = "snake_case", deny_unknown_fields)]
pub enum EntryLawConfig {
    StandardNormal,
    Shrinkage { ell: f64 },
}

impl EntryLawConfig {
    fn check(&self, key: &str, v: &mut Vec<String>) {
        if let EntryLawConfig::Shrinkage { ell } = *self {
            if !(ell > 0.0 && ell <= 1.0) {
                v.push(format!("{key}.ell: must lie in the range (0, 1], got {ell}"));
            }
        }
    }

    pub fn build(&self) -> stiefel_priors::Result<EntryLaw> {
        match *self {
            EntryLawConfig::StandardNormal => Ok(EntryLaw::StandardNormal),
            EntryLawConfig::Shrinkage { ell } => EntryLaw::shrinkage(ell),
        }
    }
}

fn check_family(key: &str, f: &CorrelationFamily, v: &mut Vec<String>) {
    if let Err(e) = f.validate() {
        v.push(format!("{key}: {e}"));
    }
}

fn shrinkage_needs_identity(key: &str, law: &EntryLawConfig, f: &CorrelationFamily, v: &mut Vec<String>) {
    if matches!(law, EntryLawConfig::Shrinkage { .. }) && *f != CorrelationFamily::Identity {
        v.push(format!("{key}: shrinkage entries require the identity correlation"));
    }
}

fn positive(key: &str, x: f64, v: &mut Vec<String>) {
    if !(x > 0.0 && x.is_finite()) {
        v.push(format!("{key}: must be positive, got {x}"));
    }
}

fn at_least(key: &str, x: usize, min: usize, v: &mut Vec<String>) {
    if x < min {
        v.push(format!("{key}: must be at least {min}, got {x}"));
    }
}

fn identity() -> CorrelationFamily {
    CorrelationFamily::Identity
}

fn one() -> f64 {
    1.0
}

fn default_out() -> PathBuf {
    PathBuf::from("out")
}

/// Sampler settings; the run seed is supplied separately.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct HmcSettings {
    pub chains: usize,
    pub warmup: usize,
    pub draws: usize,
    pub target_accept: f64,
    pub max_leapfrog: usize,
    pub init_stepsize: f64,
    pub mass: stiefel_priors::inference::MassMatrix,
    pub path_length: f64,
    pub audit: bool,
}

impl Default for HmcSettings {
    fn default() -> Self {
        let d = HmcConfig::default();
        Self {
            chains: d.chains,
            warmup: d.warmup,
            draws: d.draws,
            target_accept: d.target_accept,
            max_leapfrog: d.max_leapfrog,
            init_stepsize: d.init_stepsize,
            mass: d.mass,
            path_length: d.path_length,
            audit: d.audit,
        }
    }
}

impl HmcSettings {
    pub fn with_seed(&self, seed: u64) -> HmcConfig {
        HmcConfig {
            chains: self.chains,
            warmup: self.warmup,
            draws: self.draws,
            target_accept: self.target_accept,
            max_leapfrog: self.max_leapfrog,
            seed,
            init_stepsize: self.init_stepsize,
            mass: self.mass,
            path_length: self.path_length,
            audit: self.audit,
        }
    }

    fn check(&self, v: &mut Vec<String>) {
        if let Err(e) = self.with_seed(0).validate() {
            v.push(format!("hmc: {e}"));
        }
        if self.chains < 2 {
            v.push(format!("hmc.chains: diagnostics need at least 2 chains, got {}", self.chains));
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SamplePriorConfig {
    pub command: Command,
    pub seed: Option<u64>,
    #[serde(default = "default_out")]
    pub output_dir: PathBuf,
    pub p: usize,
    pub k: usize,
    pub entry_law: EntryLawConfig,
    #[serde(default = "identity")]
    pub correlation: CorrelationFamily,
    #[serde(default = "one")]
    pub spacing: f64,
    #[serde(default = "default_prior_draws")]
    pub draws: usize,
}

fn default_prior_draws() -> usize {
    1000
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ProjectConfig {
    pub command: Command,
    pub seed: Option<u64>,
    #[serde(default = "default_out")]
    pub output_dir: PathBuf,
    /// Headerless numeric CSV holding the p×k matrix to project.
    pub input: PathBuf,
}

/// A theory experiment with its settings.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "name", rename_all = "snake_case", deny_unknown_fields)]
pub enum Preset {
    /// Decay in p of the W2 distance between `√p·Q_ij` and `X_ij`.
    Wasserstein {
        entry_law: EntryLawConfig,
        correlation: CorrelationFamily,
        spacing: f64,
        p_grid: Vec<usize>,
        k: usize,
        /// 1-based `[row, col]` pairs.
        entries: Vec<[usize; 2]>,
        replicates: usize,
    },
    /// `‖X − √p Q‖²` against its trace form on random draws.
    FrobeniusIdentity {
        entry_law: EntryLawConfig,
        correlation: CorrelationFamily,
        spacing: f64,
        p: usize,
        k: usize,
        instances: usize,
    },
    /// Kolmogorov distance of the renormalized covariance spectrum to the semicircle.
    Semicircle {
        correlation: CorrelationFamily,
        spacing: f64,
        p: usize,
        k: usize,
        replicates: usize,
    },
    /// Mean zero crossings of squared-exponential curves against `T/(πρ)`.
    ZeroCrossings { rho: f64, t: usize, replicates: usize },
}

impl Preset {
    fn check(&self, v: &mut Vec<String>) {
        match self {
            Preset::Wasserstein {
                entry_law,
                correlation,
                spacing,
                p_grid,
                k,
                entries,
                replicates,
            } => {
                entry_law.check("preset.entry_law", v);
                check_family("preset.correlation", correlation, v);
                shrinkage_needs_identity("preset.entry_law", entry_law, correlation, v);
                positive("preset.spacing", *spacing, v);
                if p_grid.is_empty() {
                    v.push("preset.p_grid: must not be empty".into());
                }
                if p_grid.windows(2).any(|w| w[0] >= w[1]) {
                    v.push("preset.p_grid: must be strictly increasing".into());
                }
                at_least("preset.k", *k, 1, v);
                if let Some(&p0) = p_grid.first() {
                    if *k > p0 {
                        v.push(format!("preset.k: must not exceed the smallest p ({p0}), got {k}"));
                    }
                    for e in entries {
                        if e[0] < 1 || e[0] > p0 || e[1] < 1 || e[1] > *k {
                            v.push(format!("preset.entries: {e:?} outside the {p0}x{k} matrix"));
                        }
                    }
                }
                if entries.is_empty() {
                    v.push("preset.entries: must not be empty".into());
                }
                at_least("preset.replicates", *replicates, 2, v);
            }
            Preset::FrobeniusIdentity {
                entry_law,
                correlation,
                spacing,
                p,
                k,
                instances,
            } => {
                entry_law.check("preset.entry_law", v);
                check_family("preset.correlation", correlation, v);
                positive("preset.spacing", *spacing, v);
                check_pk("preset", *p, *k, v);
                at_least("preset.instances", *instances, 1, v);
            }
            Preset::Semicircle {
                correlation,
                spacing,
                p,
                k,
                replicates,
            } => {
                check_family("preset.correlation", correlation, v);
                positive("preset.spacing", *spacing, v);
                check_pk("preset", *p, *k, v);
                at_least("preset.replicates", *replicates, 1, v);
            }
            Preset::ZeroCrossings { rho, t, replicates } => {
                positive("preset.rho", *rho, v);
                at_least("preset.t", *t, 2, v);
                at_least("preset.replicates", *replicates, 1, v);
            }
        }
    }
}

fn check_pk(prefix: &str, p: usize, k: usize, v: &mut Vec<String>) {
    let key = |name: &str| if prefix.is_empty() { name.to_string() } else { format!("{prefix}.{name}") };
    at_least(&key("p"), p, 1, v);
    at_least(&key("k"), k, 1, v);
    if k > p {
        v.push(format!("{}: must not exceed p ({p}), got {k}", key("k")));
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TheoryCheckConfig {
    pub command: Command,
    pub seed: Option<u64>,
    #[serde(default = "default_out")]
    pub output_dir: PathBuf,
    pub preset: Preset,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "source", rename_all = "snake_case", deny_unknown_fields)]
pub enum NetworkSource {
    /// Square 0/1/NA adjacency CSV.
    Csv { path: PathBuf },
    /// Network simulated from the model with a shrinkage-prior `Q`.
    Simulate {
        p: usize,
        c: f64,
        lambda: Vec<f64>,
        ell: f64,
    },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct FitEigenmodelConfig {
    pub command: Command,
    pub seed: Option<u64>,
    #[serde(default = "default_out")]
    pub output_dir: PathBuf,
    pub data: NetworkSource,
    pub k: usize,
    #[serde(default)]
    pub q_prior: QPrior,
    #[serde(default)]
    pub parameterization: Parameterization,
    /// Fraction of observed dyads held out for AUC; 0 fits on everything.
    #[serde(default)]
    pub holdout_fraction: f64,
    /// Cross-validation folds; when set, replaces the single fit.
    #[serde(default)]
    pub folds: Option<usize>,
    /// In cross-validation, also fit the uniform-prior model on each fold.
    #[serde(default)]
    pub compare_priors: bool,
    #[serde(default)]
    pub hmc: HmcSettings,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "source", rename_all = "snake_case", deny_unknown_fields)]
pub enum MatrixSource {
    /// Headerless numeric n×p CSV.
    Csv { path: PathBuf },
    /// Rank-k signal with smooth right factors plus Gaussian noise.
    Simulate {
        n: usize,
        p: usize,
        d: Vec<f64>,
        sigma: f64,
        rho: f64,
    },
}

/// Overrides of the data-driven SVD hyperparameter defaults.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct SvdHyperConfig {
    pub nu_err: Option<f64>,
    pub s2: Option<f64>,
    pub tau: Option<f64>,
    /// Prior mean and sd of the length-scale, converted to inverse gamma shape and scale.
    pub rho_mean: Option<f64>,
    pub rho_sd: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct FitSvdConfig {
    pub command: Command,
    pub seed: Option<u64>,
    #[serde(default = "default_out")]
    pub output_dir: PathBuf,
    pub data: MatrixSource,
    pub k: usize,
    /// Distance between adjacent columns in the kernel.
    #[serde(default = "one")]
    pub spacing: f64,
    #[serde(default = "yes")]
    pub center: bool,
    #[serde(default)]
    pub hyper: SvdHyperConfig,
    #[serde(default)]
    pub parameterization: Parameterization,
    #[serde(default)]
    pub hmc: HmcSettings,
}

fn yes() -> bool {
    true
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DiagnoseConfig {
    pub command: Command,
    pub seed: Option<u64>,
    #[serde(default = "default_out")]
    pub output_dir: PathBuf,
    /// Draws table written by a fit command.
    pub draws: PathBuf,
}

/// A validated run configuration.
#[derive(Debug, Clone, PartialEq, Serialize)]
#[serde(untagged)]
pub enum RunConfig {
    SamplePrior(SamplePriorConfig),
    Project(ProjectConfig),
    TheoryCheck(TheoryCheckConfig),
    FitEigenmodel(FitEigenmodelConfig),
    FitSvd(FitSvdConfig),
    Diagnose(DiagnoseConfig),
}

impl RunConfig {
    pub fn command(&self) -> Command {
        match self {
            RunConfig::SamplePrior(c) => c.command,
            RunConfig::Project(c) => c.command,
            RunConfig::TheoryCheck(c) => c.command,
            RunConfig::FitEigenmodel(c) => c.command,
            RunConfig::FitSvd(c) => c.command,
            RunConfig::Diagnose(c) => c.command,
        }
    }

    pub fn seed(&self) -> Option<u64> {
        match self {
            RunConfig::SamplePrior(c) => c.seed,
            RunConfig::Project(c) => c.seed,
            RunConfig::TheoryCheck(c) => c.seed,
            RunConfig::FitEigenmodel(c) => c.seed,
            RunConfig::FitSvd(c) => c.seed,
            RunConfig::Diagnose(c) => c.seed,
        }
    }

    pub fn output_dir(&self) -> &Path {
        match self {
            RunConfig::SamplePrior(c) => &c.output_dir,
            RunConfig::Project(c) => &c.output_dir,
            RunConfig::TheoryCheck(c) => &c.output_dir,
            RunConfig::FitEigenmodel(c) => &c.output_dir,
            RunConfig::FitSvd(c) => &c.output_dir,
            RunConfig::Diagnose(c) => &c.output_dir,
        }
    }

    /// Every rule violation, not just the first.
    pub fn violations(&self) -> Vec<String> {
        let mut v = Vec::new();
        if self.command().stochastic() && self.seed().is_none() {
            v.push(format!("seed: required for {}", self.command().name()));
        }
        match self {
            RunConfig::SamplePrior(c) => {
                check_pk("", c.p, c.k, &mut v);
                c.entry_law.check("entry_law", &mut v);
                check_family("correlation", &c.correlation, &mut v);
                shrinkage_needs_identity("entry_law", &c.entry_law, &c.correlation, &mut v);
                positive("spacing", c.spacing, &mut v);
                at_least("draws", c.draws, 1, &mut v);
            }
            RunConfig::Project(_) | RunConfig::Diagnose(_) => {}
            RunConfig::TheoryCheck(c) => c.preset.check(&mut v),
            RunConfig::FitEigenmodel(c) => {
                at_least("k", c.k, 1, &mut v);
                if let NetworkSource::Simulate { p, c: _, lambda, ell } = &c.data {
                    at_least("data.p", *p, 2, &mut v);
                    if lambda.is_empty() || lambda.len() > *p {
                        v.push(format!("data.lambda: need between 1 and p entries, got {}", lambda.len()));
                    }
                    if !(*ell > 0.0 && *ell <= 1.0) {
                        v.push(format!("data.ell: must lie in the range (0, 1], got {ell}"));
                    }
                }
                if !(0.0..1.0).contains(&c.holdout_fraction) {
                    v.push(format!("holdout_fraction: must lie in [0, 1), got {}", c.holdout_fraction));
                }
                if let Some(f) = c.folds {
                    at_least("folds", f, 2, &mut v);
                    if c.holdout_fraction > 0.0 {
                        v.push("folds: cannot be combined with holdout_fraction".into());
                    }
                }
                if c.compare_priors && c.folds.is_none() {
                    v.push("compare_priors: requires folds".into());
                }
                c.hmc.check(&mut v);
            }
            RunConfig::FitSvd(c) => {
                at_least("k", c.k, 1, &mut v);
                positive("spacing", c.spacing, &mut v);
                if let MatrixSource::Simulate { n, p, d, sigma, rho } = &c.data {
                    at_least("data.n", *n, 2, &mut v);
                    at_least("data.p", *p, 2, &mut v);
                    if d.len() != c.k {
                        v.push(format!("data.d: need k = {} entries, got {}", c.k, d.len()));
                    }
                    d.iter().for_each(|x| positive("data.d", *x, &mut v));
                    positive("data.sigma", *sigma, &mut v);
                    positive("data.rho", *rho, &mut v);
                }
                let h = &c.hyper;
                for (key, x) in [
                    ("hyper.nu_err", h.nu_err),
                    ("hyper.s2", h.s2),
                    ("hyper.tau", h.tau),
                    ("hyper.rho_mean", h.rho_mean),
                    ("hyper.rho_sd", h.rho_sd),
                ] {
                    if let Some(x) = x {
                        positive(key, x, &mut v);
                    }
                }
                if h.rho_mean.is_some() != h.rho_sd.is_some() {
                    v.push("hyper.rho_mean: rho_mean and rho_sd must be given together".into());
                }
                c.hmc.check(&mut v);
            }
        }
        v
    }

    /// Pretty JSON with every default filled in, newline terminated.
    pub fn normal_form(&self) -> String {
        let mut s = serde_json::to_string_pretty(self).expect("config serializes");
        s.push('\n');
        s
    }

    /// Hex SHA-256 of the normal form.
    pub fn hash(&self) -> String {
        hex::encode(Sha256::digest(self.normal_form().as_bytes()))
    }
}

/// Sets `a.b.c = value` in a JSON object, creating intermediate objects.
fn set_path(root: &mut Value, path: &str, value: Value) -> Result<(), CliError> {
    let parts: Vec<&str> = path.split('.').collect();
    if parts.iter().any(|p| p.is_empty()) {
        return Err(CliError::parse(path, None, "empty key segment"));
    }
    let mut cur = root;
    for (i, part) in parts.iter().enumerate() {
        let obj = cur
            .as_object_mut()
            .ok_or_else(|| CliError::parse(parts[..i].join("."), None, "not an object"))?;
        if i + 1 == parts.len() {
            obj.insert(part.to_string(), value);
            return Ok(());
        }
        cur = obj.entry(part.to_string()).or_insert_with(|| Value::Object(Map::new()));
    }
    unreachable!()
}

/// Parses `key=value`; the value is JSON when it parses as JSON and a string otherwise.
pub fn parse_override(s: &str) -> Result<(String, Value), CliError> {
    let (k, v) = s
        .split_once('=')
        .ok_or_else(|| CliError::parse(s, None, "expected key=value"))?;
    let value = serde_json::from_str(v).unwrap_or_else(|_| Value::String(v.to_string()));
    Ok((k.trim().to_string(), value))
}

fn typed<T: DeserializeOwned>(text: &str) -> Result<T, CliError> {
    let mut de = serde_json::Deserializer::from_str(text);
    let t: T = serde_path_to_error::deserialize(&mut de).map_err(|e| {
        let key = e.path().to_string();
        let inner = e.into_inner();
        CliError::parse(key, Some((inner.line(), inner.column())), inner.to_string())
    })?;
    de.end()
        .map_err(|e| CliError::parse("", Some((e.line(), e.column())), e.to_string()))?;
    Ok(t)
}

/// Parses a config document, applies inline overrides and an implied command, and validates.
///
/// Errors carry the offending key and, when the text is parsed as written, its line.
pub fn parse_config(
    text: Option<&str>,
    command: Option<Command>,
    overrides: &[(String, Value)],
) -> Result<RunConfig, CliError> {
    let text = text.unwrap_or("{}");
    let mut doc: Value = serde_json::from_str(text)
        .map_err(|e| CliError::parse("", Some((e.line(), e.column())), e.to_string()))?;
    if !doc.is_object() {
        return Err(CliError::parse("", None, "config must be a JSON object"));
    }
    let mut rewritten = !overrides.is_empty();
    if let Some(cmd) = command {
        match doc.get("command") {
            None => {
                set_path(&mut doc, "command", Value::String(cmd.name().into()))?;
                rewritten = true;
            }
            Some(Value::String(s)) if s == cmd.name() => {}
            Some(other) => {
                return Err(CliError::parse(
                    "command",
                    None,
                    format!("config names {other} but `{}` was invoked", cmd.name()),
                ))
            }
        }
    }
    for (k, v) in overrides {
        set_path(&mut doc, k, v.clone())?;
    }
    let name = match doc.get("command") {
        Some(Value::String(s)) => s.clone(),
        Some(_) => return Err(CliError::parse("command", None, "must be a string")),
        None => return Err(CliError::parse("command", None, "missing field `command`")),
    };
    let cmd = Command::from_name(&name).ok_or_else(|| {
        let known: Vec<&str> = Command::ALL.iter().map(|c| c.name()).collect();
        CliError::parse("command", None, format!("unknown command `{name}`, expected one of {}", known.join(", ")))
    })?;
    let owned;
    let text = if rewritten {
        owned = serde_json::to_string_pretty(&doc).expect("json value serializes");
        owned.as_str()
    } else {
        text
    };
    let cfg = match cmd {
        Command::SamplePrior => RunConfig::SamplePrior(typed(text)?),
        Command::Project => RunConfig::Project(typed(text)?),
        Command::TheoryCheck => RunConfig::TheoryCheck(typed(text)?),
        Command::FitEigenmodel => RunConfig::FitEigenmodel(typed(text)?),
        Command::FitSvd => RunConfig::FitSvd(typed(text)?),
        Command::Diagnose => RunConfig::Diagnose(typed(text)?),
    };
    let violations = cfg.violations();
    if violations.is_empty() {
        Ok(cfg)
    } else {
        Err(CliError::Validation(violations))
    }
}
