//! Run configuration: a line-oriented `section.key = value` format with `#`
//! comments, strict key checking, defaults, validation and a canonical
//! writer whose output parses back to the same configuration.
//!
//! Lists are whitespace separated. `loading.dirichlet`, `loading.traction`,
//! `mesh.seed` and `mesh.node_set` may be repeated; every other key may
//! appear at most once.

use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::path::{Path, PathBuf};
use std::sync::Arc;

use crate::driver::{BcValue, DirichletBc, LoadProgram, NonConvergencePolicy, Problem, StaggerOptions, Traction};
use crate::fem::{BodyForce, FeSpace, FunctionalKind};
use crate::material::{derive_constants, DeltaEps, Material, MaterialError, MaterialParams, ETA_EPS_DEFAULT};
use crate::mesh::{self, Mesh, NotchMode, NotchSpec};
use crate::solver::{LinearOptions, LinearSolver};

pub const OUTPUT_DIR_ENV: &str = "PFRAC_OUTPUT_DIR";

#[derive(Debug, thiserror::Error)]
pub enum ConfigError {
    #[error("{path}: {source}")]
    Read { path: PathBuf, source: std::io::Error },
    #[error("line {line}: {message}")]
    Syntax { line: usize, message: String },
    #[error("line {line}: {key}: {message}")]
    Value { line: usize, key: String, message: String },
    #[error("line {line}: unknown key {key}")]
    UnknownKey { line: usize, key: String },
    #[error("line {line}: {key} given more than once (first on line {first})")]
    Duplicate { line: usize, key: String, first: usize },
    #[error("missing required key {0}")]
    Missing(String),
    #[error("invalid {key}: {message}")]
    Invalid { key: String, message: String },
    #[error("invalid material: {0}")]
    Material(#[from] MaterialError),
    #[error(transparent)]
    Mesh(#[from] mesh::MeshError),
    #[error(transparent)]
    Driver(#[from] crate::driver::DriverError),
}

fn invalid(key: &str, message: impl Into<String>) -> ConfigError {
    ConfigError::Invalid { key: key.into(), message: message.into() }
}

/// Regularization length, absolute or as a fraction of `3 G_c / (16 𝒲_ts)`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum EpsSetting {
    Absolute(f64),
    Fraction(f64),
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct MaterialConfig {
    pub mu: f64,
    pub lambda: f64,
    pub sigma_ts: f64,
    pub sigma_hs: f64,
    pub g_c: f64,
    pub eps: EpsSetting,
    pub eta_eps: f64,
    pub delta_eps: DeltaEps,
}

impl MaterialConfig {
    pub fn params(&self) -> Result<MaterialParams, ConfigError> {
        let base = MaterialParams {
            mu: self.mu,
            lambda: self.lambda,
            sigma_ts: self.sigma_ts,
            sigma_hs: self.sigma_hs,
            g_c: self.g_c,
            eps: 1.0,
            eta_eps: self.eta_eps,
            delta_eps: 1.0,
        };
        base.validate()?;
        let eps = match self.eps {
            EpsSetting::Absolute(e) => e,
            EpsSetting::Fraction(f) => f * derive_constants(&base).eps_recommended_max,
        };
        let p = base.with_eps(eps, self.delta_eps);
        p.validate()?;
        Ok(p)
    }

    pub fn with_eps_fraction(&self, fraction: f64) -> MaterialConfig {
        MaterialConfig { eps: EpsSetting::Fraction(fraction), ..*self }
    }
}

/// Uniform spacing `h` on `[lo, hi]` of one mesh axis.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Refinement {
    pub lo: f64,
    pub hi: f64,
    pub h: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub enum MeshSource {
    Rect { width: f64, height: f64, nx: usize, ny: usize, x_refine: Option<Refinement>, y_refine: Option<Refinement> },
    File(PathBuf),
}

/// Axis-aligned box `[x0, x1] × [y0, y1]` (closed, with a small tolerance).
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Region {
    pub x: [f64; 2],
    pub y: [f64; 2],
}

impl Region {
    pub fn contains(&self, p: [f64; 2], tol: f64) -> bool {
        p[0] >= self.x[0] - tol && p[0] <= self.x[1] + tol && p[1] >= self.y[0] - tol && p[1] <= self.y[1] + tol
    }
}

/// Initial phase-field value on the nodes of a region.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Seed {
    pub region: Region,
    pub value: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct MeshConfig {
    pub source: MeshSource,
    pub notch: Option<NotchSpec>,
    pub seeds: Vec<Seed>,
    pub node_sets: Vec<(String, Region)>,
}

#[derive(Debug, Clone, PartialEq)]
pub enum LoadFactors {
    Ramp { start: f64, end: f64, steps: usize },
    List(Vec<f64>),
}

#[derive(Debug, Clone, PartialEq)]
pub struct LoadingConfig {
    pub factors: LoadFactors,
    pub monotone: bool,
    pub dirichlet: Vec<DirichletBc>,
    pub traction: Vec<Traction>,
    pub body: Option<[f64; 2]>,
    pub reactions: Vec<String>,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SolverConfig {
    pub mode: FunctionalKind,
    pub stagger_tol: f64,
    pub energy_tol: f64,
    pub max_stagger: usize,
    pub v_tol: Option<f64>,
    pub v_max_iter: usize,
    pub linear: LinearSolver,
    pub linear_tol: f64,
    pub linear_max_iter: usize,
    pub policy: NonConvergencePolicy,
    pub monotonicity_tol: f64,
    pub damage_threshold: f64,
}

impl SolverConfig {
    pub fn stagger_options(&self) -> StaggerOptions {
        StaggerOptions {
            stagger_tol: self.stagger_tol,
            energy_tol: self.energy_tol,
            max_stagger: self.max_stagger,
            v_tol: self.v_tol,
            v_max_iter: self.v_max_iter,
            linear: LinearOptions {
                method: self.linear,
                tol: self.linear_tol,
                max_iter: self.linear_max_iter,
                ..LinearOptions::default()
            },
            policy: self.policy,
            functional: self.mode,
            monotonicity_tol: self.monotonicity_tol,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct OutputConfig {
    /// `None` falls back to `$PFRAC_OUTPUT_DIR`, then to `output`.
    pub dir: Option<PathBuf>,
    pub vtk: bool,
    /// VTK snapshot every this many steps (the last step is always written).
    pub every: usize,
}

impl OutputConfig {
    pub fn resolved_dir(&self) -> PathBuf {
        self.dir
            .clone()
            .or_else(|| std::env::var_os(OUTPUT_DIR_ENV).map(PathBuf::from))
            .unwrap_or_else(|| PathBuf::from("output"))
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum HomogeneousPath {
    /// In-plane stress `diag(σ, 0)`.
    Tension,
    /// In-plane stress `diag(τ, −τ)`.
    Shear,
    /// In-plane stress `diag(σ, σ)`.
    Biaxial,
    /// In-plane stress `diag(−σ, 0)`.
    Compression,
}

impl HomogeneousPath {
    pub fn name(&self) -> &'static str {
        match self {
            HomogeneousPath::Tension => "tension",
            HomogeneousPath::Shear => "shear",
            HomogeneousPath::Biaxial => "biaxial",
            HomogeneousPath::Compression => "compression",
        }
    }
}

/// How a homogeneous bar is driven. Both reproduce the same uniform state
/// while the bar is intact.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum LoadControl {
    /// Tractions on the right and top edges, rollers on the left and bottom.
    Traction,
    /// Prescribed edge displacements.
    Stretch,
}

impl LoadControl {
    pub fn name(&self) -> &'static str {
        match self {
            LoadControl::Traction => "traction",
            LoadControl::Stretch => "stretch",
        }
    }
}

/// Homogeneous loading of a seeded bar. Lengths are in units of
/// `G_c/𝒲_ts` (domain) or of `ε` (refinement); stresses are in units of the
/// path's reference stress (the strength-surface root along the path, or
/// `σ_cs` for compression).
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct HomogeneousConfig {
    pub path: HomogeneousPath,
    pub control: LoadControl,
    pub length: f64,
    pub height: f64,
    pub nx: usize,
    pub ny: usize,
    pub fine_halfwidth: f64,
    pub fine_h: f64,
    pub seed: f64,
    pub stress_start: f64,
    pub stress_step: f64,
    pub max_stress: f64,
}

/// Single-edge-notch tension, half model above the crack plane. Lengths in
/// units of `G_c/𝒲_ts` (geometry) or of `ε` (refinement and detection);
/// loads in units of the handbook Griffith load.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SentConfig {
    pub notch: f64,
    pub width: f64,
    pub height: f64,
    pub nx: usize,
    pub ny: usize,
    pub fine_h: f64,
    pub zone_behind: f64,
    pub zone_ahead: f64,
    pub band_height: f64,
    pub extension: f64,
    pub load_start: f64,
    pub load_step: f64,
    pub load_max: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub enum ScenarioKind {
    Homogeneous(HomogeneousConfig),
    /// Same bar in both functionals at `ε` and `ε·eps_factor`.
    ModeContrast { bar: HomogeneousConfig, eps_factor: f64, griffith_max_stress: f64 },
    /// `notch_factor = 0` skips the longer-notch run.
    Sent { sent: SentConfig, notch_factor: f64, compare_griffith: bool },
    NotchSweep { sent: SentConfig, notches: Vec<f64> },
}

impl ScenarioKind {
    pub fn name(&self) -> &'static str {
        match self {
            ScenarioKind::Homogeneous(_) => "homogeneous",
            ScenarioKind::ModeContrast { .. } => "mode-contrast",
            ScenarioKind::Sent { .. } => "sent",
            ScenarioKind::NotchSweep { .. } => "notch-sweep",
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ScenarioConfig {
    pub kind: ScenarioKind,
    /// Nodes with `v` below this count as damaged.
    pub damage_threshold: f64,
    /// Largest damaged area fraction that still counts as localized.
    pub localization_fraction: f64,
    /// Relative tolerance of the oracle comparison.
    pub tolerance: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct RunConfig {
    pub material: MaterialConfig,
    pub mesh: MeshConfig,
    pub loading: LoadingConfig,
    pub solver: SolverConfig,
    pub output: OutputConfig,
    pub scenario: Option<ScenarioConfig>,
}

const REPEATABLE: &[&str] = &["loading.dirichlet", "loading.traction", "mesh.seed", "mesh.node_set"];

#[derive(Debug, Clone)]
struct Entry {
    line: usize,
    value: String,
}

/// Key/value pairs in file order, consumed by the typed readers.
struct Entries {
    map: BTreeMap<String, Vec<Entry>>,
}

impl Entries {
    fn parse(text: &str) -> Result<Entries, ConfigError> {
        let mut map: BTreeMap<String, Vec<Entry>> = BTreeMap::new();
        for (i, raw) in text.lines().enumerate() {
            let line = i + 1;
            let content = raw.split('#').next().unwrap_or("").trim();
            if content.is_empty() {
                continue;
            }
            let (key, value) = content.split_once('=').ok_or_else(|| ConfigError::Syntax {
                line,
                message: format!("expected `section.key = value`, got {content:?}"),
            })?;
            let key = key.trim();
            let value = value.trim();
            let valid_key = key.split_once('.').is_some_and(|(s, k)| {
                !s.is_empty()
                    && !k.is_empty()
                    && key.chars().all(|c| c.is_ascii_lowercase() || c.is_ascii_digit() || c == '_' || c == '.')
            });
            if !valid_key {
                return Err(ConfigError::Syntax { line, message: format!("malformed key {key:?}") });
            }
            if value.is_empty() {
                return Err(ConfigError::Value { line, key: key.into(), message: "empty value".into() });
            }
            let list = map.entry(key.to_string()).or_default();
            if let Some(first) = list.first() {
                if !REPEATABLE.contains(&key) {
                    return Err(ConfigError::Duplicate { line, key: key.into(), first: first.line });
                }
            }
            list.push(Entry { line, value: value.to_string() });
        }
        Ok(Entries { map })
    }

    fn take(&mut self, key: &str) -> Option<Entry> {
        self.map.remove(key).and_then(|mut v| v.pop())
    }

    fn take_all(&mut self, key: &str) -> Vec<Entry> {
        self.map.remove(key).unwrap_or_default()
    }

    fn has_section(&self, section: &str) -> bool {
        let prefix = format!("{section}.");
        self.map.keys().any(|k| k.starts_with(&prefix))
    }

    fn finish(self) -> Result<(), ConfigError> {
        let first = self.map.into_iter().flat_map(|(k, v)| v.into_iter().map(move |e| (e.line, k.clone()))).min();
        match first {
            Some((line, key)) => Err(ConfigError::UnknownKey { line, key }),
            None => Ok(()),
        }
    }

    fn f64(&mut self, key: &str, default: Option<f64>) -> Result<f64, ConfigError> {
        match self.take(key) {
            Some(e) => parse_f64(key, &e, &e.value),
            None => default.ok_or_else(|| ConfigError::Missing(key.into())),
        }
    }

    fn usize(&mut self, key: &str, default: usize) -> Result<usize, ConfigError> {
        match self.take(key) {
            Some(e) => e.value.parse().map_err(|_| value_err(key, &e, "expected a non-negative integer")),
            None => Ok(default),
        }
    }

    fn bool(&mut self, key: &str, default: bool) -> Result<bool, ConfigError> {
        match self.take(key) {
            Some(e) => match e.value.as_str() {
                "true" => Ok(true),
                "false" => Ok(false),
                _ => Err(value_err(key, &e, "expected true or false")),
            },
            None => Ok(default),
        }
    }

    fn floats(&mut self, key: &str, n: usize) -> Result<Option<Vec<f64>>, ConfigError> {
        match self.take(key) {
            Some(e) => {
                let v = float_list(key, &e)?;
                if v.len() != n {
                    return Err(value_err(key, &e, &format!("expected {n} numbers, got {}", v.len())));
                }
                Ok(Some(v))
            }
            None => Ok(None),
        }
    }
}

fn value_err(key: &str, e: &Entry, message: &str) -> ConfigError {
    ConfigError::Value { line: e.line, key: key.into(), message: format!("{message} (got {:?})", e.value) }
}

fn parse_f64(key: &str, e: &Entry, s: &str) -> Result<f64, ConfigError> {
    match s.parse::<f64>() {
        Ok(x) if x.is_finite() => Ok(x),
        _ => Err(value_err(key, e, "expected a finite number")),
    }
}

fn float_list(key: &str, e: &Entry) -> Result<Vec<f64>, ConfigError> {
    e.value.split_whitespace().map(|s| parse_f64(key, e, s)).collect()
}

fn parse_component(key: &str, e: &Entry, s: &str) -> Result<usize, ConfigError> {
    match s {
        "x" => Ok(0),
        "y" => Ok(1),
        _ => Err(value_err(key, e, "component must be x or y")),
    }
}

fn parse_dirichlet(e: &Entry) -> Result<DirichletBc, ConfigError> {
    const KEY: &str = "loading.dirichlet";
    let words: Vec<&str> = e.value.split_whitespace().collect();
    let bad = || value_err(KEY, e, "expected `<tag> <x|y> <value>` or `<tag> <x|y> linear <c> <gx> <gy>`");
    let value = match words.as_slice() {
        [_, _, v] => BcValue::Constant(parse_f64(KEY, e, v)?),
        [_, _, "linear", c, gx, gy] => BcValue::Linear {
            c: parse_f64(KEY, e, c)?,
            gx: parse_f64(KEY, e, gx)?,
            gy: parse_f64(KEY, e, gy)?,
        },
        _ => return Err(bad()),
    };
    Ok(DirichletBc { tag: words[0].to_string(), component: parse_component(KEY, e, words[1])?, value })
}

fn parse_traction(e: &Entry) -> Result<Traction, ConfigError> {
    const KEY: &str = "loading.traction";
    let words: Vec<&str> = e.value.split_whitespace().collect();
    match words.as_slice() {
        [tag, tx, ty] => Ok(Traction { tag: tag.to_string(), value: [parse_f64(KEY, e, tx)?, parse_f64(KEY, e, ty)?] }),
        _ => Err(value_err(KEY, e, "expected `<tag> <tx> <ty>`")),
    }
}

fn parse_region(key: &str, e: &Entry, words: &[&str]) -> Result<Region, ConfigError> {
    let v: Vec<f64> = words.iter().map(|s| parse_f64(key, e, s)).collect::<Result<_, _>>()?;
    if v[0] > v[1] || v[2] > v[3] {
        return Err(value_err(key, e, "region bounds must satisfy x0 <= x1 and y0 <= y1"));
    }
    Ok(Region { x: [v[0], v[1]], y: [v[2], v[3]] })
}

fn parse_notch(e: &Entry) -> Result<NotchSpec, ConfigError> {
    const KEY: &str = "mesh.notch";
    let words: Vec<&str> = e.value.split_whitespace().collect();
    let bad = || value_err(KEY, e, "expected `<tip_x> <tip_y> <dir_x> <dir_y> <length> phase <half_width>` or `... slit`");
    if words.len() < 6 {
        return Err(bad());
    }
    let nums: Vec<f64> = words[..5].iter().map(|s| parse_f64(KEY, e, s)).collect::<Result<_, _>>()?;
    let mode = match &words[5..] {
        ["phase", w] => NotchMode::PhaseField { half_width: parse_f64(KEY, e, w)? },
        ["slit"] => NotchMode::Slit,
        _ => return Err(bad()),
    };
    Ok(NotchSpec { tip: [nums[0], nums[1]], direction: [nums[2], nums[3]], length: nums[4], mode })
}

fn parse_refinement(es: &mut Entries, key: &str) -> Result<Option<Refinement>, ConfigError> {
    Ok(es.floats(key, 3)?.map(|v| Refinement { lo: v[0], hi: v[1], h: v[2] }))
}

fn parse_enum<T: Copy>(es: &mut Entries, key: &str, default: T, options: &[(&str, T)]) -> Result<T, ConfigError> {
    match es.take(key) {
        Some(e) => options.iter().find(|(n, _)| *n == e.value).map(|(_, t)| *t).ok_or_else(|| {
            let names: Vec<&str> = options.iter().map(|(n, _)| *n).collect();
            value_err(key, &e, &format!("expected one of {}", names.join(", ")))
        }),
        None => Ok(default),
    }
}

fn read_material(es: &mut Entries) -> Result<MaterialConfig, ConfigError> {
    let eps = match (es.take("material.eps"), es.take("material.eps_fraction")) {
        (Some(e), None) => EpsSetting::Absolute(parse_f64("material.eps", &e, &e.value)?),
        (None, Some(e)) => EpsSetting::Fraction(parse_f64("material.eps_fraction", &e, &e.value)?),
        (Some(_), Some(e)) => {
            return Err(value_err("material.eps_fraction", &e, "give either material.eps or material.eps_fraction"))
        }
        (None, None) => return Err(ConfigError::Missing("material.eps".into())),
    };
    let delta_eps = match es.take("material.delta_eps") {
        None => DeltaEps::Fallback,
        Some(e) if e.value == "fallback" => DeltaEps::Fallback,
        Some(e) => DeltaEps::Given(parse_f64("material.delta_eps", &e, &e.value)?),
    };
    Ok(MaterialConfig {
        mu: es.f64("material.mu", None)?,
        lambda: es.f64("material.lambda", None)?,
        sigma_ts: es.f64("material.sigma_ts", None)?,
        sigma_hs: es.f64("material.sigma_hs", None)?,
        g_c: es.f64("material.g_c", None)?,
        eps,
        eta_eps: es.f64("material.eta_eps", Some(ETA_EPS_DEFAULT))?,
        delta_eps,
    })
}

fn read_mesh(es: &mut Entries) -> Result<MeshConfig, ConfigError> {
    let kind = es.take("mesh.kind");
    if let Some(e) = &kind {
        if e.value != "rect" && e.value != "file" {
            return Err(value_err("mesh.kind", e, "expected rect or file"));
        }
    }
    let source = match kind.as_ref().map(|e| e.value.as_str()) {
        None | Some("rect") => MeshSource::Rect {
            width: es.f64("mesh.width", Some(1.0))?,
            height: es.f64("mesh.height", Some(1.0))?,
            nx: es.usize("mesh.nx", 10)?,
            ny: es.usize("mesh.ny", 10)?,
            x_refine: parse_refinement(es, "mesh.x_refine")?,
            y_refine: parse_refinement(es, "mesh.y_refine")?,
        },
        Some("file") => match es.take("mesh.file") {
            Some(e) => MeshSource::File(PathBuf::from(e.value)),
            None => return Err(ConfigError::Missing("mesh.file".into())),
        },
        Some(_) => unreachable!(),
    };
    let notch = es.take("mesh.notch").map(|e| parse_notch(&e)).transpose()?;
    let mut seeds = Vec::new();
    for e in es.take_all("mesh.seed") {
        let words: Vec<&str> = e.value.split_whitespace().collect();
        if words.len() != 5 {
            return Err(value_err("mesh.seed", &e, "expected `<x0> <x1> <y0> <y1> <value>`"));
        }
        seeds.push(Seed { region: parse_region("mesh.seed", &e, &words[..4])?, value: parse_f64("mesh.seed", &e, words[4])? });
    }
    let mut node_sets = Vec::new();
    for e in es.take_all("mesh.node_set") {
        let words: Vec<&str> = e.value.split_whitespace().collect();
        if words.len() != 5 {
            return Err(value_err("mesh.node_set", &e, "expected `<name> <x0> <x1> <y0> <y1>`"));
        }
        node_sets.push((words[0].to_string(), parse_region("mesh.node_set", &e, &words[1..])?));
    }
    Ok(MeshConfig { source, notch, seeds, node_sets })
}

fn read_loading(es: &mut Entries) -> Result<LoadingConfig, ConfigError> {
    let factors = match (es.take("loading.ramp"), es.take("loading.factors")) {
        (Some(_), Some(e)) => return Err(value_err("loading.factors", &e, "give either loading.ramp or loading.factors")),
        (Some(e), None) => {
            let words: Vec<&str> = e.value.split_whitespace().collect();
            if words.len() != 3 {
                return Err(value_err("loading.ramp", &e, "expected `<start> <end> <steps>`"));
            }
            LoadFactors::Ramp {
                start: parse_f64("loading.ramp", &e, words[0])?,
                end: parse_f64("loading.ramp", &e, words[1])?,
                steps: words[2].parse().map_err(|_| value_err("loading.ramp", &e, "step count must be an integer"))?,
            }
        }
        (None, Some(e)) => LoadFactors::List(float_list("loading.factors", &e)?),
        (None, None) => LoadFactors::Ramp { start: 0.0, end: 1.0, steps: 10 },
    };
    let dirichlet = es.take_all("loading.dirichlet").iter().map(parse_dirichlet).collect::<Result<_, _>>()?;
    let traction = es.take_all("loading.traction").iter().map(parse_traction).collect::<Result<_, _>>()?;
    let body = es.floats("loading.body", 2)?.map(|v| [v[0], v[1]]);
    let reactions = es
        .take("loading.reactions")
        .map(|e| e.value.split_whitespace().map(str::to_string).collect())
        .unwrap_or_default();
    Ok(LoadingConfig { factors, monotone: es.bool("loading.monotone", true)?, dirichlet, traction, body, reactions })
}

fn read_solver(es: &mut Entries) -> Result<SolverConfig, ConfigError> {
    let d = StaggerOptions::default();
    let v_tol = match es.take("solver.v_tol") {
        None => None,
        Some(e) if e.value == "auto" => None,
        Some(e) => Some(parse_f64("solver.v_tol", &e, &e.value)?),
    };
    Ok(SolverConfig {
        mode: parse_enum(es, "solver.mode", FunctionalKind::Strength, &[
            ("strength", FunctionalKind::Strength),
            ("griffith", FunctionalKind::Griffith),
        ])?,
        stagger_tol: es.f64("solver.stagger_tol", Some(d.stagger_tol))?,
        energy_tol: es.f64("solver.energy_tol", Some(d.energy_tol))?,
        max_stagger: es.usize("solver.max_stagger", d.max_stagger)?,
        v_tol,
        v_max_iter: es.usize("solver.v_max_iter", d.v_max_iter)?,
        linear: parse_enum(es, "solver.linear", d.linear.method, &[
            ("auto", LinearSolver::Auto),
            ("direct", LinearSolver::Direct),
            ("cg", LinearSolver::ConjugateGradient),
        ])?,
        linear_tol: es.f64("solver.linear_tol", Some(d.linear.tol))?,
        linear_max_iter: es.usize("solver.linear_max_iter", d.linear.max_iter)?,
        policy: parse_enum(es, "solver.policy", d.policy, &[
            ("abort", NonConvergencePolicy::Abort),
            ("continue", NonConvergencePolicy::Continue),
        ])?,
        monotonicity_tol: es.f64("solver.monotonicity_tol", Some(d.monotonicity_tol))?,
        damage_threshold: es.f64("solver.damage_threshold", Some(0.05))?,
    })
}

fn read_output(es: &mut Entries) -> Result<OutputConfig, ConfigError> {
    Ok(OutputConfig {
        dir: es.take("output.dir").map(|e| PathBuf::from(e.value)),
        vtk: es.bool("output.vtk", true)?,
        every: es.usize("output.every", 1)?,
    })
}

fn read_bar(es: &mut Entries) -> Result<HomogeneousConfig, ConfigError> {
    Ok(HomogeneousConfig {
        path: parse_enum(es, "scenario.path", HomogeneousPath::Tension, &[
            ("tension", HomogeneousPath::Tension),
            ("shear", HomogeneousPath::Shear),
            ("biaxial", HomogeneousPath::Biaxial),
            ("compression", HomogeneousPath::Compression),
        ])?,
        control: parse_enum(es, "scenario.control", LoadControl::Traction, &[
            ("traction", LoadControl::Traction),
            ("stretch", LoadControl::Stretch),
        ])?,
        length: es.f64("scenario.length", Some(12.0))?,
        height: es.f64("scenario.height", Some(1.0))?,
        nx: es.usize("scenario.nx", 20)?,
        ny: es.usize("scenario.ny", 20)?,
        fine_halfwidth: es.f64("scenario.fine_halfwidth", Some(2.0))?,
        fine_h: es.f64("scenario.fine_h", Some(0.5))?,
        seed: es.f64("scenario.seed", Some(0.999))?,
        stress_start: es.f64("scenario.stress_start", Some(0.5))?,
        stress_step: es.f64("scenario.stress_step", Some(0.01))?,
        max_stress: es.f64("scenario.max_stress", Some(1.3))?,
    })
}

fn read_sent(es: &mut Entries) -> Result<SentConfig, ConfigError> {
    Ok(SentConfig {
        notch: es.f64("scenario.notch", Some(20.0))?,
        width: es.f64("scenario.width", Some(66.0))?,
        height: es.f64("scenario.height", Some(66.0))?,
        nx: es.usize("scenario.nx", 100)?,
        ny: es.usize("scenario.ny", 50)?,
        fine_h: es.f64("scenario.fine_h", Some(0.25))?,
        zone_behind: es.f64("scenario.zone_behind", Some(2.0))?,
        zone_ahead: es.f64("scenario.zone_ahead", Some(12.0))?,
        band_height: es.f64("scenario.band_height", Some(3.0))?,
        extension: es.f64("scenario.extension", Some(4.0))?,
        load_start: es.f64("scenario.load_start", Some(0.6))?,
        load_step: es.f64("scenario.load_step", Some(0.02))?,
        load_max: es.f64("scenario.load_max", Some(1.4))?,
    })
}

fn read_scenario(es: &mut Entries) -> Result<Option<ScenarioConfig>, ConfigError> {
    if !es.has_section("scenario") {
        return Ok(None);
    }
    let kind_entry = es.take("scenario.kind").ok_or_else(|| ConfigError::Missing("scenario.kind".into()))?;
    let kind = match kind_entry.value.as_str() {
        "homogeneous" => ScenarioKind::Homogeneous(read_bar(es)?),
        "mode-contrast" => ScenarioKind::ModeContrast {
            bar: read_bar(es)?,
            eps_factor: es.f64("scenario.eps_factor", Some(0.5))?,
            griffith_max_stress: es.f64("scenario.griffith_max_stress", Some(3.0))?,
        },
        "sent" => ScenarioKind::Sent {
            sent: read_sent(es)?,
            notch_factor: es.f64("scenario.notch_factor", Some(2.0))?,
            compare_griffith: es.bool("scenario.compare_griffith", false)?,
        },
        "notch-sweep" => {
            let notches = match es.take("scenario.notches") {
                Some(e) => float_list("scenario.notches", &e)?,
                None => return Err(ConfigError::Missing("scenario.notches".into())),
            };
            ScenarioKind::NotchSweep { sent: read_sent(es)?, notches }
        }
        _ => return Err(value_err("scenario.kind", &kind_entry, "expected homogeneous, mode-contrast, sent or notch-sweep")),
    };
    Ok(Some(ScenarioConfig {
        kind,
        damage_threshold: es.f64("scenario.damage_threshold", Some(0.05))?,
        localization_fraction: es.f64("scenario.localization_fraction", Some(0.1))?,
        tolerance: es.f64("scenario.tolerance", Some(0.1))?,
    }))
}

impl RunConfig {
    pub fn parse(text: &str) -> Result<RunConfig, ConfigError> {
        let mut es = Entries::parse(text)?;
        let cfg = RunConfig {
            material: read_material(&mut es)?,
            mesh: read_mesh(&mut es)?,
            loading: read_loading(&mut es)?,
            solver: read_solver(&mut es)?,
            output: read_output(&mut es)?,
            scenario: read_scenario(&mut es)?,
        };
        es.finish()?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn validate(&self) -> Result<(), ConfigError> {
        self.material.params()?;
        let positive = |key: &str, x: f64| if x > 0.0 && x.is_finite() { Ok(()) } else { Err(invalid(key, format!("must be positive, got {x}"))) };
        if let EpsSetting::Fraction(f) = self.material.eps {
            positive("material.eps_fraction", f)?;
        }
        if let MeshSource::Rect { width, height, nx, ny, .. } = self.mesh.source {
            positive("mesh.width", width)?;
            positive("mesh.height", height)?;
            if nx == 0 || ny == 0 {
                return Err(invalid("mesh.nx", "element counts must be at least 1"));
            }
        }
        for s in &self.mesh.seeds {
            if !(0.0..=1.0).contains(&s.value) {
                return Err(invalid("mesh.seed", format!("phase-field value {} outside [0, 1]", s.value)));
            }
        }
        match &self.loading.factors {
            LoadFactors::Ramp { steps, .. } if *steps == 0 => return Err(invalid("loading.ramp", "needs at least one step")),
            LoadFactors::List(f) if f.is_empty() => return Err(invalid("loading.factors", "needs at least one factor")),
            _ => {}
        }
        let s = &self.solver;
        positive("solver.stagger_tol", s.stagger_tol)?;
        positive("solver.energy_tol", s.energy_tol)?;
        positive("solver.linear_tol", s.linear_tol)?;
        positive("solver.monotonicity_tol", s.monotonicity_tol)?;
        if let Some(t) = s.v_tol {
            positive("solver.v_tol", t)?;
        }
        if s.max_stagger == 0 || s.v_max_iter == 0 || s.linear_max_iter == 0 {
            return Err(invalid("solver.max_stagger", "iteration limits must be at least 1"));
        }
        if !(s.damage_threshold > 0.0 && s.damage_threshold < 1.0) {
            return Err(invalid("solver.damage_threshold", "must lie in (0, 1)"));
        }
        if self.output.every == 0 {
            return Err(invalid("output.every", "must be at least 1"));
        }
        if let Some(sc) = &self.scenario {
            positive("scenario.tolerance", sc.tolerance)?;
            if !(sc.damage_threshold > 0.0 && sc.damage_threshold < 1.0) {
                return Err(invalid("scenario.damage_threshold", "must lie in (0, 1)"));
            }
            if !(sc.localization_fraction > 0.0 && sc.localization_fraction <= 1.0) {
                return Err(invalid("scenario.localization_fraction", "must lie in (0, 1]"));
            }
            let bar_ok = |b: &HomogeneousConfig| -> Result<(), ConfigError> {
                for (k, x) in [
                    ("scenario.length", b.length),
                    ("scenario.height", b.height),
                    ("scenario.fine_halfwidth", b.fine_halfwidth),
                    ("scenario.fine_h", b.fine_h),
                    ("scenario.stress_step", b.stress_step),
                    ("scenario.max_stress", b.max_stress),
                ] {
                    positive(k, x)?;
                }
                if !(0.0..=1.0).contains(&b.seed) {
                    return Err(invalid("scenario.seed", "must lie in [0, 1]"));
                }
                Ok(())
            };
            let sent_ok = |s: &SentConfig| -> Result<(), ConfigError> {
                for (k, x) in [
                    ("scenario.notch", s.notch),
                    ("scenario.width", s.width),
                    ("scenario.height", s.height),
                    ("scenario.fine_h", s.fine_h),
                    ("scenario.extension", s.extension),
                    ("scenario.load_step", s.load_step),
                    ("scenario.load_max", s.load_max),
                ] {
                    positive(k, x)?;
                }
                if s.notch >= s.width {
                    return Err(invalid("scenario.notch", "must be shorter than scenario.width"));
                }
                Ok(())
            };
            match &sc.kind {
                ScenarioKind::Homogeneous(b) => bar_ok(b)?,
                ScenarioKind::ModeContrast { bar, eps_factor, griffith_max_stress } => {
                    bar_ok(bar)?;
                    positive("scenario.eps_factor", *eps_factor)?;
                    positive("scenario.griffith_max_stress", *griffith_max_stress)?;
                }
                ScenarioKind::Sent { sent, notch_factor, .. } => {
                    sent_ok(sent)?;
                    if *notch_factor < 0.0 {
                        return Err(invalid("scenario.notch_factor", "must be non-negative"));
                    }
                }
                ScenarioKind::NotchSweep { sent, notches } => {
                    sent_ok(sent)?;
                    if notches.len() < 2 || notches.iter().any(|&a| !(a > 0.0)) {
                        return Err(invalid("scenario.notches", "needs at least two positive notch lengths"));
                    }
                }
            }
        }
        Ok(())
    }

    pub fn from_file(path: &Path) -> Result<RunConfig, ConfigError> {
        let text = std::fs::read_to_string(path).map_err(|source| ConfigError::Read { path: path.into(), source })?;
        RunConfig::parse(&text)
    }

    /// Canonical text: every key with its resolved value, sections in a
    /// fixed order.
    pub fn to_canonical_string(&self) -> String {
        let mut s = String::new();
        let mut put = |k: &str, v: String| {
            let _ = writeln!(s, "{k} = {v}");
        };
        let m = &self.material;
        put("material.mu", m.mu.to_string());
        put("material.lambda", m.lambda.to_string());
        put("material.sigma_ts", m.sigma_ts.to_string());
        put("material.sigma_hs", m.sigma_hs.to_string());
        put("material.g_c", m.g_c.to_string());
        match m.eps {
            EpsSetting::Absolute(e) => put("material.eps", e.to_string()),
            EpsSetting::Fraction(f) => put("material.eps_fraction", f.to_string()),
        }
        put("material.eta_eps", m.eta_eps.to_string());
        put("material.delta_eps", match m.delta_eps {
            DeltaEps::Fallback => "fallback".into(),
            DeltaEps::Given(d) => d.to_string(),
        });

        match &self.mesh.source {
            MeshSource::Rect { width, height, nx, ny, x_refine, y_refine } => {
                put("mesh.kind", "rect".into());
                put("mesh.width", width.to_string());
                put("mesh.height", height.to_string());
                put("mesh.nx", nx.to_string());
                put("mesh.ny", ny.to_string());
                for (k, r) in [("mesh.x_refine", x_refine), ("mesh.y_refine", y_refine)] {
                    if let Some(r) = r {
                        put(k, format!("{} {} {}", r.lo, r.hi, r.h));
                    }
                }
            }
            MeshSource::File(p) => {
                put("mesh.kind", "file".into());
                put("mesh.file", p.display().to_string());
            }
        }
        if let Some(n) = &self.mesh.notch {
            let mode = match n.mode {
                NotchMode::PhaseField { half_width } => format!("phase {half_width}"),
                NotchMode::Slit => "slit".into(),
            };
            put("mesh.notch", format!("{} {} {} {} {} {mode}", n.tip[0], n.tip[1], n.direction[0], n.direction[1], n.length));
        }
        for sd in &self.mesh.seeds {
            let r = sd.region;
            put("mesh.seed", format!("{} {} {} {} {}", r.x[0], r.x[1], r.y[0], r.y[1], sd.value));
        }
        for (name, r) in &self.mesh.node_sets {
            put("mesh.node_set", format!("{name} {} {} {} {}", r.x[0], r.x[1], r.y[0], r.y[1]));
        }

        let l = &self.loading;
        match &l.factors {
            LoadFactors::Ramp { start, end, steps } => put("loading.ramp", format!("{start} {end} {steps}")),
            LoadFactors::List(f) => put("loading.factors", f.iter().map(f64::to_string).collect::<Vec<_>>().join(" ")),
        }
        put("loading.monotone", l.monotone.to_string());
        for bc in &l.dirichlet {
            let comp = if bc.component == 0 { "x" } else { "y" };
            let value = match bc.value {
                BcValue::Constant(c) => c.to_string(),
                BcValue::Linear { c, gx, gy } => format!("linear {c} {gx} {gy}"),
            };
            put("loading.dirichlet", format!("{} {comp} {value}", bc.tag));
        }
        for t in &l.traction {
            put("loading.traction", format!("{} {} {}", t.tag, t.value[0], t.value[1]));
        }
        if let Some(b) = l.body {
            put("loading.body", format!("{} {}", b[0], b[1]));
        }
        if !l.reactions.is_empty() {
            put("loading.reactions", l.reactions.join(" "));
        }

        let sv = &self.solver;
        put("solver.mode", sv.mode.name().into());
        put("solver.stagger_tol", sv.stagger_tol.to_string());
        put("solver.energy_tol", sv.energy_tol.to_string());
        put("solver.max_stagger", sv.max_stagger.to_string());
        put("solver.v_tol", sv.v_tol.map_or("auto".into(), |t| t.to_string()));
        put("solver.v_max_iter", sv.v_max_iter.to_string());
        put("solver.linear", match sv.linear {
            LinearSolver::Auto => "auto",
            LinearSolver::Direct => "direct",
            LinearSolver::ConjugateGradient => "cg",
        }
        .into());
        put("solver.linear_tol", sv.linear_tol.to_string());
        put("solver.linear_max_iter", sv.linear_max_iter.to_string());
        put("solver.policy", match sv.policy {
            NonConvergencePolicy::Abort => "abort",
            NonConvergencePolicy::Continue => "continue",
        }
        .into());
        put("solver.monotonicity_tol", sv.monotonicity_tol.to_string());
        put("solver.damage_threshold", sv.damage_threshold.to_string());

        if let Some(d) = &self.output.dir {
            put("output.dir", d.display().to_string());
        }
        put("output.vtk", self.output.vtk.to_string());
        put("output.every", self.output.every.to_string());

        if let Some(sc) = &self.scenario {
            put("scenario.kind", sc.kind.name().into());
            let bar = |put: &mut dyn FnMut(&str, String), b: &HomogeneousConfig| {
                put("scenario.path", b.path.name().into());
                put("scenario.control", b.control.name().into());
                put("scenario.length", b.length.to_string());
                put("scenario.height", b.height.to_string());
                put("scenario.nx", b.nx.to_string());
                put("scenario.ny", b.ny.to_string());
                put("scenario.fine_halfwidth", b.fine_halfwidth.to_string());
                put("scenario.fine_h", b.fine_h.to_string());
                put("scenario.seed", b.seed.to_string());
                put("scenario.stress_start", b.stress_start.to_string());
                put("scenario.stress_step", b.stress_step.to_string());
                put("scenario.max_stress", b.max_stress.to_string());
            };
            let sent = |put: &mut dyn FnMut(&str, String), s: &SentConfig| {
                put("scenario.notch", s.notch.to_string());
                put("scenario.width", s.width.to_string());
                put("scenario.height", s.height.to_string());
                put("scenario.nx", s.nx.to_string());
                put("scenario.ny", s.ny.to_string());
                put("scenario.fine_h", s.fine_h.to_string());
                put("scenario.zone_behind", s.zone_behind.to_string());
                put("scenario.zone_ahead", s.zone_ahead.to_string());
                put("scenario.band_height", s.band_height.to_string());
                put("scenario.extension", s.extension.to_string());
                put("scenario.load_start", s.load_start.to_string());
                put("scenario.load_step", s.load_step.to_string());
                put("scenario.load_max", s.load_max.to_string());
            };
            match &sc.kind {
                ScenarioKind::Homogeneous(b) => bar(&mut put, b),
                ScenarioKind::ModeContrast { bar: b, eps_factor, griffith_max_stress } => {
                    bar(&mut put, b);
                    put("scenario.eps_factor", eps_factor.to_string());
                    put("scenario.griffith_max_stress", griffith_max_stress.to_string());
                }
                ScenarioKind::Sent { sent: s, notch_factor, compare_griffith } => {
                    sent(&mut put, s);
                    put("scenario.notch_factor", notch_factor.to_string());
                    put("scenario.compare_griffith", compare_griffith.to_string());
                }
                ScenarioKind::NotchSweep { sent: s, notches } => {
                    sent(&mut put, s);
                    put("scenario.notches", notches.iter().map(f64::to_string).collect::<Vec<_>>().join(" "));
                }
            }
            put("scenario.damage_threshold", sc.damage_threshold.to_string());
            put("scenario.localization_fraction", sc.localization_fraction.to_string());
            put("scenario.tolerance", sc.tolerance.to_string());
        }
        s
    }

    pub fn material_params(&self) -> Result<MaterialParams, ConfigError> {
        self.material.params()
    }

    /// Mesh with configured node sets, plus the initial phase field from
    /// the notch and seeds.
    pub fn build_mesh(&self, base_dir: &Path) -> Result<(Mesh, Vec<f64>), ConfigError> {
        let params = self.material_params()?;
        let mut mesh = match &self.mesh.source {
            MeshSource::Rect { width, height, nx, ny, x_refine, y_refine } => {
                let axis = |len: f64, n: usize, r: &Option<Refinement>| -> Result<Vec<f64>, ConfigError> {
                    Ok(match r {
                        Some(r) => mesh::refined_lines(len, n, r.lo, r.hi, r.h)?,
                        None => (0..=n).map(|i| len * i as f64 / n as f64).collect(),
                    })
                };
                mesh::generate_tensor_grid(&axis(*width, *nx, x_refine)?, &axis(*height, *ny, y_refine)?)?
            }
            MeshSource::File(p) => {
                let path = if p.is_absolute() { p.clone() } else { base_dir.join(p) };
                mesh::import_mesh(&path)?
            }
        };
        let (lo, hi) = mesh.bounding_box();
        let tol = 1e-9 * ((hi[0] - lo[0]).powi(2) + (hi[1] - lo[1]).powi(2)).sqrt();
        for (name, region) in &self.mesh.node_sets {
            let nodes: Vec<usize> =
                mesh.nodes().iter().enumerate().filter(|(_, x)| region.contains(**x, tol)).map(|(i, _)| i).collect();
            if nodes.is_empty() {
                return Err(invalid("mesh.node_set", format!("node set {name} contains no nodes")));
            }
            mesh = mesh.with_node_set(name, nodes)?;
        }
        let mut v0 = vec![1.0; mesh.num_nodes()];
        if let Some(spec) = &self.mesh.notch {
            let notched = mesh::apply_notch(&mesh, spec, Some(params.eps))?;
            mesh = notched.mesh;
            v0 = notched.v0;
        }
        for sd in &self.mesh.seeds {
            for (i, x) in mesh.nodes().iter().enumerate() {
                if sd.region.contains(*x, tol) {
                    v0[i] = v0[i].min(sd.value);
                }
            }
        }
        Ok((mesh, v0))
    }

    pub fn load_program(&self) -> Result<LoadProgram, ConfigError> {
        let factors = match &self.loading.factors {
            LoadFactors::Ramp { start, end, steps } => {
                (1..=*steps).map(|i| start + (end - start) * i as f64 / *steps as f64).collect()
            }
            LoadFactors::List(f) => f.clone(),
        };
        Ok(LoadProgram::proportional_with(&factors, self.loading.monotone)?)
    }

    /// Problem and load program described by the configuration. Relative
    /// mesh paths resolve against `base_dir`.
    pub fn build(&self, base_dir: &Path) -> Result<(Problem, LoadProgram), ConfigError> {
        let material = Material::new(self.material_params()?)?;
        let (mesh, v0) = self.build_mesh(base_dir)?;
        let space = FeSpace::new(Arc::new(mesh));
        let mut problem =
            Problem::new(space, material, self.loading.dirichlet.clone(), self.loading.traction.clone(), Some(v0))?;
        if let Some(b) = self.loading.body {
            problem.body = BodyForce::Uniform(b);
        }
        problem.options = self.solver.stagger_options();
        problem.reaction_tags = self.loading.reactions.clone();
        problem.damage_threshold = self.solver.damage_threshold;
        problem.validate()?;
        Ok((problem, self.load_program()?))
    }
}

impl std::str::FromStr for RunConfig {
    type Err = ConfigError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        RunConfig::parse(s)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    const MINIMAL: &str = "material.mu = 100\nmaterial.lambda = 150\nmaterial.sigma_ts = 1\n\
                           material.sigma_hs = 1.2\nmaterial.g_c = 0.002\nmaterial.eps_fraction = 0.5\n";

    #[test]
    fn minimal_config_gets_defaults() {
        let c = RunConfig::parse(MINIMAL).unwrap();
        assert_eq!(c.material.eta_eps, 1e-5);
        assert_eq!(c.solver.stagger_tol, 1e-4);
        assert_eq!(c.material.delta_eps, DeltaEps::Fallback);
        assert_eq!(c.solver.mode, FunctionalKind::Strength);
        assert!(c.scenario.is_none());
    }

    #[test]
    fn comments_and_blank_lines_are_ignored() {
        let text = format!("# header\n\n{MINIMAL}solver.mode = griffith # trailing\n");
        assert_eq!(RunConfig::parse(&text).unwrap().solver.mode, FunctionalKind::Griffith);
    }

    #[test]
    fn unknown_key_is_rejected_with_line() {
        let text = format!("{MINIMAL}solver.stager_tol = 1e-3\n");
        match RunConfig::parse(&text) {
            Err(ConfigError::UnknownKey { line, key }) => {
                assert_eq!(line, 7);
                assert_eq!(key, "solver.stager_tol");
            }
            other => panic!("{other:?}"),
        }
    }

    #[test]
    fn duplicate_scalar_key_is_rejected() {
        let text = format!("{MINIMAL}material.mu = 3\n");
        assert!(matches!(RunConfig::parse(&text), Err(ConfigError::Duplicate { line: 7, first: 1, .. })));
    }

    #[test]
    fn syntax_error_names_line() {
        let text = format!("{MINIMAL}solver.mode strength\n");
        assert!(matches!(RunConfig::parse(&text), Err(ConfigError::Syntax { line: 7, .. })));
    }

    #[test]
    fn bad_number_names_key() {
        let text = MINIMAL.replace("material.mu = 100", "material.mu = abc");
        let err = RunConfig::parse(&text).unwrap_err().to_string();
        assert!(err.contains("line 1") && err.contains("material.mu"), "{err}");
    }

    #[test]
    fn negative_toughness_names_g_c() {
        let text = MINIMAL.replace("0.002", "-0.002");
        let err = RunConfig::parse(&text).unwrap_err().to_string();
        assert!(err.contains("g_c"), "{err}");
    }

    #[test]
    fn degenerate_strength_ratio_is_hard_error() {
        let text = MINIMAL.replace("material.sigma_hs = 1.2", "material.sigma_hs = 0.5").replace("sigma_ts = 1\n", "sigma_ts = 1.5\n");
        let err = RunConfig::parse(&text).unwrap_err().to_string();
        assert!(err.contains("Drucker-Prager"), "{err}");
    }

    #[test]
    fn missing_material_key_is_reported() {
        let text = MINIMAL.replace("material.g_c = 0.002\n", "");
        assert!(matches!(RunConfig::parse(&text), Err(ConfigError::Missing(k)) if k == "material.g_c"));
    }

    #[test]
    fn repeated_boundary_keys_accumulate() {
        let text = format!(
            "{MINIMAL}loading.dirichlet = left x 0\nloading.dirichlet = right x linear 0.1 0 0.5\n\
             loading.traction = top 0 1\nloading.reactions = left right\n"
        );
        let c = RunConfig::parse(&text).unwrap();
        assert_eq!(c.loading.dirichlet.len(), 2);
        assert_eq!(c.loading.dirichlet[1].value, BcValue::Linear { c: 0.1, gx: 0.0, gy: 0.5 });
        assert_eq!(c.loading.traction[0].value, [0.0, 1.0]);
        assert_eq!(c.loading.reactions, ["left", "right"]);
    }

    #[test]
    fn canonical_writer_round_trips() {
        let text = format!(
            "{MINIMAL}mesh.width = 3\nmesh.nx = 12\nmesh.x_refine = 1 2 0.1\nmesh.seed = 1.4 1.6 0 1 0.9\n\
             mesh.node_set = lig 1 3 0 0\nmesh.notch = 1 0.5 1 0 1 phase 0.05\n\
             loading.factors = 0.1 0.2 0.30000000000000004\nloading.dirichlet = left x 0\nloading.body = 0 -1\n\
             solver.v_tol = 1e-9\nsolver.policy = continue\noutput.dir = out\noutput.vtk = false\n\
             scenario.kind = sent\nscenario.notch = 10\nscenario.compare_griffith = true\n"
        );
        let c = RunConfig::parse(&text).unwrap();
        let written = c.to_canonical_string();
        let back = RunConfig::parse(&written).unwrap();
        assert_eq!(back, c);
        assert_eq!(back.to_canonical_string(), written);
    }

    #[test]
    fn minimal_round_trip_keeps_defaults_explicit() {
        let c = RunConfig::parse(MINIMAL).unwrap();
        let written = c.to_canonical_string();
        assert!(written.contains("material.eta_eps = 0.00001"));
        assert!(written.contains("solver.stagger_tol = 0.0001"));
        assert_eq!(RunConfig::parse(&written).unwrap(), c);
    }

    #[test]
    fn eps_fraction_resolves_against_recommended_max() {
        let c = RunConfig::parse(MINIMAL).unwrap();
        let p = c.material_params().unwrap();
        let d = derive_constants(&p);
        assert!((p.eps - 0.5 * d.eps_recommended_max).abs() < 1e-15);
    }

    #[test]
    fn build_applies_seed_and_node_set() {
        let text = format!(
            "{MINIMAL}mesh.width = 2\nmesh.nx = 4\nmesh.ny = 2\nmesh.seed = 1 1 0 1 0.5\n\
             mesh.node_set = mid 1 1 0 1\nloading.dirichlet = mid x 0\nloading.ramp = 0 1 3\n"
        );
        let c = RunConfig::parse(&text).unwrap();
        let (p, prog) = c.build(Path::new(".")).unwrap();
        assert_eq!(prog.len(), 3);
        assert_eq!(p.v0.iter().filter(|&&v| v == 0.5).count(), 3);
        assert_eq!(p.space.mesh().nodes_of_tag("mid").unwrap().len(), 3);
    }
}
