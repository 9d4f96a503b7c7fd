//! JSON scenario configuration.
//!
//! ```json
//! {
//!   "system": "builtin:pendulum_ex1",
//!   "reference": { "amplitude": 1.0, "frequency": 0.5 },
//!   "controller": { "p_mode": "explicit", "stages": [ { "v_bar": 4.5, "p": 1.0, "q": 0.05, "mu": 0.9, "delta": 0.5 } ] },
//!   "bounds": { "k": [0.0], "g_lo": [1.0], "g_hi": [1.0], "d_bar": [0.0], "v0_bar": 1.0, "r0": 0.5 },
//!   "sim": { "x0": [-0.5], "horizon": 20.0, "step": 0.001, "substeps": 10 },
//!   "region": { "x_range": [-2, 2], "y_range": [-2, 2], "grid": [201, 201], "probes": [[-0.5, 1.0]] }
//! }
//! ```
//!
//! `system` may also be a parameter block of a built-in family, e.g.
//! `{ "family": "pendulum", "mass": 0.01, ... }`. Unknown keys are rejected
//! everywhere.

use std::f64::consts::FRAC_PI_2;
use std::fmt;

use pic_core::plant::{NonlinearParams, PendulumParams};
use pic_core::{
    builtin_system, cascade, BoundsSpec, BuiltinSystem, CascadeConfig, FunnelParams, Grid,
    ReferenceSpec, RegionTemplate, Scenario, StageControllerParams, StageTemplate, SystemSpec,
};
use serde::{Deserialize, Serialize};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ScenarioConfig {
    pub system: SystemConfig,
    pub reference: ReferenceConfig,
    pub controller: ControllerConfig,
    pub bounds: BoundsConfig,
    pub sim: SimConfig,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub region: Option<RegionConfig>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum SystemConfig {
    /// `"builtin:<name>"`.
    Builtin(BuiltinRef),
    Family(FamilyConfig),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(try_from = "String", into = "String")]
pub struct BuiltinRef(pub BuiltinSystem);

impl TryFrom<String> for BuiltinRef {
    type Error = String;

    fn try_from(s: String) -> Result<Self, String> {
        let name = s
            .strip_prefix("builtin:")
            .ok_or_else(|| format!("system must look like `builtin:<name>`, got `{s}`"))?;
        name.parse()
            .map(BuiltinRef)
            .map_err(|e: pic_core::Error| e.to_string())
    }
}

impl From<BuiltinRef> for String {
    fn from(b: BuiltinRef) -> String {
        format!("builtin:{}", b.0)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "family", rename_all = "snake_case", deny_unknown_fields)]
pub enum FamilyConfig {
    Pendulum {
        mass: f64,
        length: f64,
        friction: f64,
        gravity: f64,
        disturbance_amplitude: f64,
    },
    Nonlinear {
        sin_gain: f64,
        g1: f64,
        g2: f64,
        d1_amplitude: f64,
        d2_amplitude: f64,
    },
}

/// `y_d(t) = amplitude * sin(frequency * t)`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ReferenceConfig {
    pub amplitude: f64,
    pub frequency: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum PMode {
    /// Use each stage's `p` as given.
    #[default]
    Explicit,
    /// `p_i = |z_i(0)| + delta_i`.
    DeltaOffset,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ControllerConfig {
    #[serde(default)]
    pub p_mode: PMode,
    pub stages: Vec<StageConfig>,
}

fn half_pi() -> f64 {
    FRAC_PI_2
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct StageConfig {
    pub v_bar: f64,
    #[serde(default = "half_pi")]
    pub c: f64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub p: Option<f64>,
    pub q: f64,
    pub mu: f64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub delta: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct BoundsConfig {
    pub k: Vec<f64>,
    pub g_lo: Vec<f64>,
    pub g_hi: Vec<f64>,
    pub d_bar: Vec<f64>,
    pub v0_bar: f64,
    pub r0: f64,
}

fn one() -> usize {
    1
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SimConfig {
    pub x0: Vec<f64>,
    pub horizon: f64,
    pub step: f64,
    #[serde(default = "one")]
    pub substeps: usize,
    #[serde(default)]
    pub permissive: bool,
}

fn default_grid() -> [usize; 2] {
    [201, 201]
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RegionConfig {
    pub x_range: [f64; 2],
    pub y_range: [f64; 2],
    #[serde(default = "default_grid")]
    pub grid: [usize; 2],
    /// Extra initial states whose membership is reported.
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub probes: Vec<[f64; 2]>,
}

/// A configuration problem; the CLI maps it to exit code 2.
#[derive(Debug, Clone, PartialEq)]
pub struct ConfigError(pub String);

impl fmt::Display for ConfigError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.0)
    }
}

impl std::error::Error for ConfigError {}

impl From<pic_core::Error> for ConfigError {
    fn from(e: pic_core::Error) -> Self {
        ConfigError(e.to_string())
    }
}

/// Parses and validates a config.
pub fn parse(text: &str) -> Result<ScenarioConfig, ConfigError> {
    let config = parse_unchecked(text)?;
    config.validate()?;
    Ok(config)
}

/// Parses without the structural checks, so command-line overrides can be
/// applied first. Serde errors carry their line and column.
pub fn parse_unchecked(text: &str) -> Result<ScenarioConfig, ConfigError> {
    serde_json::from_str(text)
        .map_err(|e| ConfigError(format!("line {}, column {}: {e}", e.line(), e.column())))
}

impl ScenarioConfig {
    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("config serialises")
    }

    pub fn n(&self) -> usize {
        self.controller.stages.len()
    }

    /// Structural checks that do not need the dynamics.
    pub fn validate(&self) -> Result<(), ConfigError> {
        let n = self.n();
        if n == 0 {
            return Err(ConfigError("controller.stages must not be empty".into()));
        }
        if self.sim.x0.len() != n {
            return Err(ConfigError(format!(
                "sim.x0 has {} entries, expected {n}",
                self.sim.x0.len()
            )));
        }
        let sys_n = self.system_spec()?.n();
        if sys_n != n {
            return Err(ConfigError(format!(
                "system has order {sys_n} but the controller has {n} stages"
            )));
        }
        self.bounds_spec().validate(n)?;
        for (i, s) in self.controller.stages.iter().enumerate() {
            match self.controller.p_mode {
                PMode::Explicit if s.p.is_none() => {
                    return Err(ConfigError(format!(
                        "controller.stages[{i}].p is required in explicit mode"
                    )))
                }
                PMode::DeltaOffset if s.delta.is_none() => {
                    return Err(ConfigError(format!(
                        "controller.stages[{i}].delta is required in delta_offset mode"
                    )))
                }
                _ => {}
            }
        }
        if let Some(r) = &self.region {
            if n != 2 {
                return Err(ConfigError(format!(
                    "region sweep needs a two-stage system, got {n} stages"
                )));
            }
            if self.controller.stages.iter().any(|s| s.delta.is_none()) {
                return Err(ConfigError(
                    "region sweep needs a delta on every stage".into(),
                ));
            }
            Grid::new(
                (r.x_range[0], r.x_range[1]),
                r.grid[0],
                (r.y_range[0], r.y_range[1]),
                r.grid[1],
            )?;
        }
        Ok(())
    }

    pub fn system_spec(&self) -> Result<SystemSpec, ConfigError> {
        Ok(match &self.system {
            SystemConfig::Builtin(b) => builtin_system(b.0.name())?.system,
            SystemConfig::Family(FamilyConfig::Pendulum {
                mass,
                length,
                friction,
                gravity,
                disturbance_amplitude,
            }) => PendulumParams {
                mass: *mass,
                length: *length,
                friction: *friction,
                gravity: *gravity,
                disturbance_amplitude: *disturbance_amplitude,
            }
            .system()?,
            SystemConfig::Family(FamilyConfig::Nonlinear {
                sin_gain,
                g1,
                g2,
                d1_amplitude,
                d2_amplitude,
            }) => NonlinearParams {
                sin_gain: *sin_gain,
                g1: *g1,
                g2: *g2,
                d1_amplitude: *d1_amplitude,
                d2_amplitude: *d2_amplitude,
            }
            .system()?,
        })
    }

    pub fn reference_spec(&self) -> ReferenceSpec {
        ReferenceSpec::sinusoid(self.reference.amplitude, self.reference.frequency)
    }

    pub fn bounds_spec(&self) -> BoundsSpec {
        let b = &self.bounds;
        BoundsSpec {
            k: b.k.clone(),
            g_lo: b.g_lo.clone(),
            g_hi: b.g_hi.clone(),
            d_bar: b.d_bar.clone(),
            v0_bar: b.v0_bar,
            r0: b.r0,
        }
    }

    pub fn stage_templates(&self) -> Vec<StageTemplate> {
        self.controller
            .stages
            .iter()
            .map(|s| StageTemplate {
                v_bar: s.v_bar,
                c: s.c,
                q: s.q,
                mu: s.mu,
            })
            .collect()
    }

    /// Cascade with every `p_i` resolved according to `p_mode`.
    pub fn cascade_config(&self) -> Result<CascadeConfig, ConfigError> {
        let stages = &self.controller.stages;
        match self.controller.p_mode {
            PMode::Explicit => {
                let built = stages
                    .iter()
                    .enumerate()
                    .map(|(i, s)| {
                        let p = s.p.ok_or_else(|| {
                            ConfigError(format!("controller.stages[{i}].p is missing"))
                        })?;
                        FunnelParams::new(p, s.q, s.mu)
                            .and_then(|f| StageControllerParams::new(s.v_bar, s.c, f))
                            .map_err(|e| ConfigError(format!("controller.stages[{i}]: {e}")))
                    })
                    .collect::<Result<Vec<_>, _>>()?;
                Ok(CascadeConfig::new(built)?)
            }
            PMode::DeltaOffset => {
                let deltas = self.deltas()?;
                let y_d0 = self.reference_spec().value(0.0);
                Ok(pic_core::delta_offset_config(
                    &self.stage_templates(),
                    &deltas,
                    &self.sim.x0,
                    y_d0,
                )?)
            }
        }
    }

    pub fn deltas(&self) -> Result<Vec<f64>, ConfigError> {
        self.controller
            .stages
            .iter()
            .enumerate()
            .map(|(i, s)| {
                s.delta
                    .ok_or_else(|| ConfigError(format!("controller.stages[{i}].delta is missing")))
            })
            .collect()
    }

    /// Initial stage errors `z_i(0)` under the resolved cascade.
    pub fn initial_errors(&self, config: &CascadeConfig) -> Result<Vec<f64>, ConfigError> {
        Ok(cascade(&self.sim.x0, 0.0, config, &self.reference_spec())?.z)
    }

    pub fn scenario(&self) -> Result<Scenario, ConfigError> {
        let mut s = Scenario::new(
            self.system_spec()?,
            self.reference_spec(),
            self.cascade_config()?,
            self.sim.x0.clone(),
            self.sim.horizon,
            self.sim.step,
        );
        s.bounds = Some(self.bounds_spec());
        s.substeps = self.sim.substeps;
        s.permissive = self.sim.permissive;
        s.validate()?;
        Ok(s)
    }

    pub fn region_template(&self) -> Result<(Grid, RegionTemplate), ConfigError> {
        let r = self
            .region
            .as_ref()
            .ok_or_else(|| ConfigError("config has no `region` section".into()))?;
        let grid = Grid::new(
            (r.x_range[0], r.x_range[1]),
            r.grid[0],
            (r.y_range[0], r.y_range[1]),
            r.grid[1],
        )?;
        let template = RegionTemplate {
            stages: self.stage_templates(),
            deltas: self.deltas()?,
            bounds: self.bounds_spec(),
            y_d0: self.reference_spec().value(0.0),
        };
        template.validate()?;
        Ok((grid, template))
    }
}

/// The bundled configuration of a built-in example.
pub fn defaults(which: BuiltinSystem) -> ScenarioConfig {
    let b = builtin_system(which.name()).expect("built-in systems exist");
    let stages = b
        .controller
        .stages()
        .iter()
        .zip(&b.deltas)
        .map(|(s, d)| StageConfig {
            v_bar: s.v_bar(),
            c: s.c(),
            p: Some(s.funnel().p()),
            q: s.funnel().q(),
            mu: s.funnel().mu(),
            delta: Some(*d),
        })
        .collect();
    let probes = match which {
        BuiltinSystem::PendulumEx1 => vec![[-0.5, 1.0]],
        BuiltinSystem::NonlinearEx2 => vec![[0.5, -0.8], [0.2, -0.8]],
    };
    ScenarioConfig {
        system: SystemConfig::Builtin(BuiltinRef(which)),
        reference: ReferenceConfig {
            amplitude: b.reference_sinusoid.0,
            frequency: b.reference_sinusoid.1,
        },
        controller: ControllerConfig {
            p_mode: PMode::Explicit,
            stages,
        },
        bounds: BoundsConfig {
            k: b.bounds.k,
            g_lo: b.bounds.g_lo,
            g_hi: b.bounds.g_hi,
            d_bar: b.bounds.d_bar,
            v0_bar: b.bounds.v0_bar,
            r0: b.bounds.r0,
        },
        sim: SimConfig {
            x0: b.x0,
            horizon: b.horizon,
            step: 1e-3,
            substeps: 10,
            permissive: false,
        },
        region: Some(RegionConfig {
            x_range: [-2.0, 2.0],
            y_range: [-2.0, 2.0],
            grid: [201, 201],
            probes,
        }),
    }
}
