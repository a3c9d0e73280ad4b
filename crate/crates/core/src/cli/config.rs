//! Run configuration: a TOML file with `[box]`, `[interaction]`, `[solver]`
//! and `[output]` sections.
//!
//! ```toml
//! [box]
//! length = 10.0
//! left_bc = "dirichlet"
//! right_bc = "dirichlet"
//!
//! [interaction]
//! kind = "epsilon"     # free | delta | epsilon | chi | train | family
//! c = 5.0
//! a = 0.0              # 0 = ideal point interaction
//! s = 0.0              # 0 = ideal deltas, > 0 = cos² bumps (fd only)
//!
//! [solver]
//! method = "exact"     # exact | fd
//! energy_window = [0.0, 1.0]
//! max_states = 4
//! ```

use std::fmt;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::connmat::{BoundaryKind, ConnectionMatrix};
use crate::exact::{BoxSystem, Interaction};
use crate::fdsolve::{self, TridiagonalOperator};
use crate::potential::{smear, DeltaTrain, RenormalizedFamily, UniformGrid};

/// A rejected configuration, naming the offending field.
#[derive(Debug, Clone, PartialEq)]
pub struct ConfigError {
    pub field: String,
    pub message: String,
}

impl ConfigError {
    pub fn new(field: &str, message: impl Into<String>) -> Self {
        ConfigError {
            field: field.to_string(),
            message: message.into(),
        }
    }
}

impl fmt::Display for ConfigError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}: {}", self.field, self.message)
    }
}

impl std::error::Error for ConfigError {}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Kind {
    Free,
    Delta,
    Epsilon,
    Chi,
    Train,
    Family,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Method {
    Exact,
    Fd,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Format {
    Csv,
    Json,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct BoxConfig {
    pub length: f64,
    #[serde(default = "dirichlet")]
    pub left_bc: BoundaryKind,
    #[serde(default = "dirichlet")]
    pub right_bc: BoundaryKind,
}

fn dirichlet() -> BoundaryKind {
    BoundaryKind::Dirichlet
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct InteractionConfig {
    pub kind: Kind,
    #[serde(default)]
    pub a: f64,
    #[serde(default)]
    pub s: f64,
    #[serde(default)]
    pub position: f64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub v: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub c: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub alpha: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub beta: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub gamma: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub delta: Option<f64>,
    /// Family law: constant, epsilon, chi3, chi5 or chi5z.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub law: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub params: Option<Vec<f64>>,
    /// `[position, strength]` pairs for an explicit train.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub spikes: Option<Vec<[f64; 2]>>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SolverConfig {
    #[serde(default = "default_method")]
    pub method: Method,
    #[serde(default = "default_grid_points")]
    pub grid_points: usize,
    #[serde(default = "default_window")]
    pub energy_window: [f64; 2],
    #[serde(default = "default_max_states")]
    pub max_states: usize,
    #[serde(default = "default_tolerance")]
    pub tolerance: f64,
    #[serde(default)]
    pub wavefunctions: bool,
}

fn default_method() -> Method {
    Method::Exact
}
fn default_grid_points() -> usize {
    8191
}
fn default_window() -> [f64; 2] {
    [0.0, 1.0]
}
fn default_max_states() -> usize {
    4
}
fn default_tolerance() -> f64 {
    1e-12
}

impl Default for SolverConfig {
    fn default() -> Self {
        SolverConfig {
            method: default_method(),
            grid_points: default_grid_points(),
            energy_window: default_window(),
            max_states: default_max_states(),
            tolerance: default_tolerance(),
            wavefunctions: false,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct OutputConfig {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub format: Option<Format>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub path: Option<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    #[serde(rename = "box")]
    pub box_: BoxConfig,
    pub interaction: InteractionConfig,
    #[serde(default)]
    pub solver: SolverConfig,
    #[serde(default)]
    pub output: OutputConfig,
}

/// What the interaction resolves to before any solver is chosen.
#[derive(Debug, Clone, PartialEq)]
pub enum Model {
    Free,
    Point(ConnectionMatrix),
    Family(RenormalizedFamily),
    Train(DeltaTrain),
}

/// A validated configuration.
#[derive(Debug, Clone, PartialEq)]
pub struct Setup {
    pub config: RunConfig,
    pub model: Model,
}

impl RunConfig {
    pub fn from_toml(text: &str) -> Result<Self, ConfigError> {
        toml::from_str(text).map_err(|e| {
            let msg = e.message().to_string();
            let field = e
                .span()
                .map(|span| locate_key(text, span.start))
                .unwrap_or_else(|| "config".to_string());
            ConfigError::new(&field, msg)
        })
    }

    pub fn load(path: &Path) -> Result<Self, ConfigError> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| ConfigError::new("--config", format!("cannot read {}: {e}", path.display())))?;
        Self::from_toml(&text)
    }

    pub fn validate(self) -> Result<Setup, ConfigError> {
        let b = &self.box_;
        if !(b.length > 0.0 && b.length.is_finite()) {
            return Err(ConfigError::new("box.length", format!("must be positive, got {}", b.length)));
        }
        let i = &self.interaction;
        for (name, x) in [("interaction.a", i.a), ("interaction.s", i.s)] {
            if !(x >= 0.0 && x.is_finite()) {
                return Err(ConfigError::new(name, format!("must be finite and >= 0, got {x}")));
            }
        }
        if !(i.position.abs() < b.length / 2.0) {
            return Err(ConfigError::new("interaction.position", "must lie strictly inside the box"));
        }

        let s = &self.solver;
        if s.grid_points < 3 {
            return Err(ConfigError::new("solver.grid_points", "must be at least 3"));
        }
        let [lo, hi] = s.energy_window;
        if !(lo.is_finite() && hi.is_finite() && lo < hi) {
            return Err(ConfigError::new("solver.energy_window", "must be finite with lo < hi"));
        }
        if s.max_states == 0 {
            return Err(ConfigError::new("solver.max_states", "must be at least 1"));
        }
        if !(s.tolerance > 0.0 && s.tolerance.is_finite()) {
            return Err(ConfigError::new("solver.tolerance", "must be positive"));
        }

        let model = resolve_model(i)?;
        if i.s > 0.0 && matches!(model, Model::Point(_)) {
            return Err(ConfigError::new("interaction.s", "smearing requires a train (set a > 0)"));
        }
        if i.s > 0.0 && matches!(model, Model::Free) {
            return Err(ConfigError::new("interaction.s", "free box has nothing to smear"));
        }
        match s.method {
            Method::Fd => {
                if i.s <= 0.0 && !matches!(model, Model::Free) {
                    return Err(ConfigError::new("interaction.s", "fd requires s>0"));
                }
                if b.left_bc != BoundaryKind::Dirichlet || b.right_bc != BoundaryKind::Dirichlet {
                    let field = if b.left_bc != BoundaryKind::Dirichlet {
                        "box.left_bc"
                    } else {
                        "box.right_bc"
                    };
                    return Err(ConfigError::new(field, "fd supports dirichlet walls only"));
                }
            }
            Method::Exact => {
                if i.s != 0.0 {
                    return Err(ConfigError::new("interaction.s", "exact requires s=0"));
                }
            }
        }
        let setup = Setup { config: self, model };
        // geometry problems (spikes outside the box, overlapping bumps) surface here
        setup.train().map_err(|m| ConfigError::new("interaction", m))?;
        Ok(setup)
    }
}

fn locate_key(text: &str, offset: usize) -> String {
    let mut section = String::new();
    let mut key = String::new();
    let mut pos = 0;
    for line in text.lines() {
        let t = line.trim();
        if t.starts_with('[') {
            section = t.trim_matches(|c| c == '[' || c == ']').to_string();
            key.clear();
        } else if let Some((k, _)) = t.split_once('=') {
            key = k.trim().to_string();
        }
        pos += line.len() + 1;
        if pos > offset {
            break;
        }
    }
    match (section.is_empty(), key.is_empty()) {
        (true, _) => if key.is_empty() { "config".into() } else { key },
        (false, true) => section,
        (false, false) => format!("{section}.{key}"),
    }
}

fn require(value: Option<f64>, field: &str) -> Result<f64, ConfigError> {
    match value {
        Some(x) if x.is_finite() => Ok(x),
        Some(x) => Err(ConfigError::new(field, format!("must be finite, got {x}"))),
        None => Err(ConfigError::new(field, "is required for this kind")),
    }
}

fn resolve_model(i: &InteractionConfig) -> Result<Model, ConfigError> {
    let ideal = i.a == 0.0;
    match i.kind {
        Kind::Free => Ok(Model::Free),
        Kind::Delta => {
            let v = require(i.v, "interaction.v")?;
            // a single spike has no separation to shrink; a is ignored
            let train = DeltaTrain::from_pairs(&[(0.0, v)]).map_err(|e| ConfigError::new("interaction.v", e.to_string()))?;
            Ok(Model::Train(train))
        }
        Kind::Epsilon => {
            let c = require(i.c, "interaction.c")?;
            if ideal {
                Ok(Model::Point(ConnectionMatrix::from_epsilon_strength(c).map_err(|e| {
                    ConfigError::new("interaction.c", e.to_string())
                })?))
            } else {
                let fam = RenormalizedFamily::Epsilon { c };
                fam.validate().map_err(|e| ConfigError::new("interaction.c", e.to_string()))?;
                Ok(Model::Family(fam))
            }
        }
        Kind::Chi => {
            let alpha = require(i.alpha, "interaction.alpha")?;
            let beta = require(i.beta, "interaction.beta")?;
            let gamma = require(i.gamma, "interaction.gamma")?;
            let delta = require(i.delta, "interaction.delta")?;
            let t = ConnectionMatrix::make_connection(alpha, beta, gamma, delta).map_err(|_| {
                ConfigError::new(
                    "interaction.alpha/beta/gamma/delta",
                    format!(
                        "alpha*gamma - beta*delta must equal 1 within 1e-9, got {}",
                        alpha * gamma - beta * delta
                    ),
                )
            })?;
            if ideal {
                return Ok(Model::Point(t));
            }
            match RenormalizedFamily::for_matrix(&t) {
                None => Ok(Model::Free),
                Some(fam) => {
                    fam.validate()
                        .map_err(|e| ConfigError::new("interaction.alpha/beta/gamma/delta", e.to_string()))?;
                    Ok(Model::Family(fam))
                }
            }
        }
        Kind::Family => {
            let law = i
                .law
                .as_deref()
                .ok_or_else(|| ConfigError::new("interaction.law", "is required for kind = \"family\""))?;
            let params = i.params.as_deref().unwrap_or(&[]);
            let fam = parse_family_parts(law, params).map_err(|m| {
                let field = if m.starts_with("unknown law") {
                    "interaction.law"
                } else {
                    "interaction.params"
                };
                ConfigError::new(field, m)
            })?;
            if ideal {
                return Err(ConfigError::new("interaction.a", "a family needs a > 0"));
            }
            Ok(Model::Family(fam))
        }
        Kind::Train => {
            let spikes = i
                .spikes
                .as_ref()
                .ok_or_else(|| ConfigError::new("interaction.spikes", "is required for kind = \"train\""))?;
            let pairs: Vec<(f64, f64)> = spikes.iter().map(|p| (p[0], p[1])).collect();
            let train = DeltaTrain::from_pairs(&pairs).map_err(|e| ConfigError::new("interaction.spikes", e.to_string()))?;
            Ok(Model::Train(train))
        }
    }
}

/// Parses `law:p1,p2,...`, e.g. `epsilon:5` or `chi3:-2,1,-1,1`.
pub fn parse_family(spec: &str) -> Result<RenormalizedFamily, String> {
    let (law, rest) = spec.split_once(':').unwrap_or((spec, ""));
    let params = rest
        .split(',')
        .filter(|p| !p.trim().is_empty())
        .map(|p| p.trim().parse::<f64>().map_err(|_| format!("bad number {p:?} in {spec:?}")))
        .collect::<Result<Vec<_>, _>>()?;
    parse_family_parts(law.trim(), &params)
}

fn parse_family_parts(law: &str, p: &[f64]) -> Result<RenormalizedFamily, String> {
    let want = match law {
        "constant" => 2,
        "epsilon" => 1,
        "chi3" => 4,
        "chi5" => 3,
        "chi5z" => 2,
        _ => return Err(format!("unknown law {law:?} (constant, epsilon, chi3, chi5, chi5z)")),
    };
    if p.len() != want {
        return Err(format!("law {law} takes {want} parameters, got {}", p.len()));
    }
    let fam = match law {
        "constant" => RenormalizedFamily::Constant { v0: p[0], u0: p[1] },
        "epsilon" => RenormalizedFamily::Epsilon { c: p[0] },
        "chi3" => RenormalizedFamily::Chi3 {
            alpha: p[0],
            beta: p[1],
            gamma: p[2],
            delta: p[3],
        },
        "chi5" => RenormalizedFamily::Chi5 {
            alpha: p[0],
            beta: p[1],
            gamma: p[2],
        },
        _ => RenormalizedFamily::Chi5z { alpha: p[0], gamma: p[1] },
    };
    fam.validate().map_err(|e| e.to_string())?;
    Ok(fam)
}

impl Setup {
    pub fn length(&self) -> f64 {
        self.config.box_.length
    }

    pub fn method(&self) -> Method {
        self.config.solver.method
    }

    pub fn solver(&self) -> &SolverConfig {
        &self.config.solver
    }

    fn position(&self) -> f64 {
        self.config.interaction.position
    }

    /// The train placed in the box, if the model has one.
    pub fn train(&self) -> Result<Option<DeltaTrain>, String> {
        let p = self.position();
        let t = match &self.model {
            Model::Free | Model::Point(_) => return Ok(None),
            Model::Family(f) => f.at(self.config.interaction.a).map_err(|e| e.to_string())?,
            Model::Train(t) => t.clone(),
        };
        let t = if p != 0.0 { t.shifted(p) } else { t };
        let half = self.length() / 2.0;
        let reach = self.config.interaction.s / 2.0;
        if t.first_position() - reach <= -half || t.last_position() + reach >= half {
            return Err("train does not fit inside the box".into());
        }
        Ok(Some(t))
    }

    /// The matrix the interaction approximates, when there is one.
    pub fn target(&self) -> Option<ConnectionMatrix> {
        match &self.model {
            Model::Free => Some(ConnectionMatrix::from_entries(1.0, 0.0, 0.0, 1.0).ok()?),
            Model::Point(t) => Some(*t),
            Model::Family(f) => f.target().ok(),
            Model::Train(t) if t.len() == 1 => ConnectionMatrix::from_delta_strength(t.spikes()[0].strength).ok(),
            Model::Train(_) => None,
        }
    }

    /// Center of the defect and the offset of its outermost spikes.
    pub fn defect_geometry(&self) -> (f64, f64) {
        match self.train() {
            Ok(Some(t)) => (t.center(), t.half_extent()),
            _ => (self.position(), 0.0),
        }
    }

    pub fn exact_system(&self) -> Result<BoxSystem, String> {
        let interaction = match &self.model {
            Model::Free => Interaction::None,
            Model::Point(t) => Interaction::Point {
                matrix: *t,
                position: self.position(),
            },
            _ => Interaction::Train(self.train()?.expect("train model")),
        };
        let b = &self.config.box_;
        BoxSystem::new(b.length, b.left_bc, b.right_bc, interaction).map_err(|e| e.to_string())
    }

    pub fn grid(&self) -> Result<UniformGrid, String> {
        UniformGrid::box_interior(self.length(), self.solver().grid_points).map_err(|e| e.to_string())
    }

    pub fn fd_operator(&self) -> Result<TridiagonalOperator, String> {
        let grid = self.grid()?;
        let potential = match self.train()? {
            Some(t) => Some(smear(&t, self.config.interaction.s, &grid).map_err(|e| e.to_string())?),
            None => None,
        };
        fdsolve::discretize(potential.as_ref(), self.length(), self.solver().grid_points).map_err(|e| e.to_string())
    }
}
