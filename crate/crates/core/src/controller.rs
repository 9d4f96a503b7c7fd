//! The approximation-free control law and the backstepping cascade.
//!
//! Each stage maps its normalised error `theta = z / psi` through
//!
//! ```text
//! u(theta) = -(2 v / pi) * atan( (pi / 2c) * tan(pi theta / 2) )
//! ```
//!
//! which is odd, strictly decreasing, bounded by `v` in magnitude and grows
//! repulsive as `|theta| -> 1`. No model of the plant enters the law.

use std::f64::consts::{FRAC_PI_2, PI};

use crate::error::{invalid, Error, Result};
use crate::funnel::FunnelParams;
use crate::plant::ReferenceSpec;

/// Margin kept between a clamped `theta` and the singular points `+-1`.
pub const THETA_CLAMP_EPS: f64 = 1e-9;

/// Design parameters of one stage: input bound `v_bar`, shape constant `c`
/// and the performance funnel the stage error must respect.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct StageControllerParams {
    v_bar: f64,
    c: f64,
    funnel: FunnelParams,
}

impl StageControllerParams {
    pub fn new(v_bar: f64, c: f64, funnel: FunnelParams) -> Result<Self> {
        if !(v_bar.is_finite() && v_bar > 0.0) {
            return Err(invalid(format!(
                "stage input bound v_bar must be positive, got {v_bar}"
            )));
        }
        if !(c.is_finite() && c > 0.0) {
            return Err(invalid(format!(
                "stage shape constant c must be positive, got {c}"
            )));
        }
        Ok(Self { v_bar, c, funnel })
    }

    /// Stage with the default shape constant `c = pi / 2`, for which the law
    /// reduces to `u = -v_bar * theta`.
    pub fn with_default_shape(v_bar: f64, funnel: FunnelParams) -> Result<Self> {
        Self::new(v_bar, FRAC_PI_2, funnel)
    }

    pub fn v_bar(&self) -> f64 {
        self.v_bar
    }

    pub fn c(&self) -> f64 {
        self.c
    }

    pub fn funnel(&self) -> &FunnelParams {
        &self.funnel
    }
}

/// Ordered stages of the backstepping cascade. The last stage's `v_bar` is
/// the bound on the actual plant input.
#[derive(Debug, Clone, PartialEq)]
pub struct CascadeConfig {
    stages: Vec<StageControllerParams>,
}

impl CascadeConfig {
    pub fn new(stages: Vec<StageControllerParams>) -> Result<Self> {
        if stages.is_empty() {
            return Err(invalid("cascade needs at least one stage"));
        }
        Ok(Self { stages })
    }

    /// System order.
    pub fn n(&self) -> usize {
        self.stages.len()
    }

    pub fn stages(&self) -> &[StageControllerParams] {
        &self.stages
    }

    /// Bound on the actual input, i.e. the last stage's `v_bar`.
    pub fn input_bound(&self) -> f64 {
        self.stages[self.stages.len() - 1].v_bar
    }
}

/// Output of one cascade evaluation. All vectors have length `n`; `u[n-1]`
/// is the actual plant input. `theta` holds the unclamped `z / psi`.
#[derive(Debug, Clone, PartialEq)]
pub struct CascadeDecision {
    pub z: Vec<f64>,
    pub theta: Vec<f64>,
    pub u: Vec<f64>,
    pub saturated: Vec<bool>,
}

impl CascadeDecision {
    pub fn input(&self) -> f64 {
        self.u[self.u.len() - 1]
    }

    pub fn any_saturated(&self) -> bool {
        self.saturated.iter().any(|&s| s)
    }
}

/// Stage control law. Requires `|theta| < 1`.
pub fn stage_control(theta: f64, params: &StageControllerParams) -> Result<f64> {
    check_theta(theta)?;
    Ok(control_law(theta, params))
}

/// Gain `d u / d theta` of the stage law; strictly negative on `(-1, 1)`.
pub fn stage_gain(theta: f64, params: &StageControllerParams) -> Result<f64> {
    check_theta(theta)?;
    Ok(gain_law(theta, params))
}

/// Range `(phi_lo, phi_hi)` of the stage gain over `theta in (-1, 1)`.
///
/// The two extremes are attained at `theta = 0` and as `|theta| -> 1`; which
/// one is the lower bound depends on whether `c` is below `pi / 2`.
pub fn gain_range(params: &StageControllerParams) -> (f64, f64) {
    let (v, c) = (params.v_bar, params.c);
    let at_center = -PI * v / (2.0 * c);
    let at_edge = -2.0 * v * c / PI;
    if c < FRAC_PI_2 {
        (at_center, at_edge)
    } else {
        (at_edge, at_center)
    }
}

/// Evaluates the full cascade at state `state` and time `t`.
///
/// `z_1 = xi_1 - y_d(t)`, `z_i = xi_i - u_{i-1}` for the later stages.
/// A `theta` at or beyond `1 - THETA_CLAMP_EPS` in magnitude is clamped
/// before the law is applied and the stage is flagged as saturated.
pub fn cascade(
    state: &[f64],
    t: f64,
    config: &CascadeConfig,
    reference: &ReferenceSpec,
) -> Result<CascadeDecision> {
    let n = config.n();
    if state.len() != n {
        return Err(Error::DimensionMismatch {
            what: "cascade state",
            expected: n,
            got: state.len(),
        });
    }
    if let Some(i) = state.iter().position(|x| !x.is_finite()) {
        return Err(Error::NonFinite {
            what: "state",
            stage: i + 1,
        });
    }

    let mut decision = CascadeDecision {
        z: Vec::with_capacity(n),
        theta: Vec::with_capacity(n),
        u: Vec::with_capacity(n),
        saturated: Vec::with_capacity(n),
    };
    let mut upstream = reference.value(t);
    for (i, stage) in config.stages.iter().enumerate() {
        let z = state[i] - upstream;
        let psi = stage.funnel.value(t)?;
        let theta = z / psi;
        let limit = 1.0 - THETA_CLAMP_EPS;
        let saturated = theta.abs() >= limit;
        let clamped = theta.clamp(-limit, limit);
        let u = control_law(clamped, stage);

        decision.z.push(z);
        decision.theta.push(theta);
        decision.u.push(u);
        decision.saturated.push(saturated);
        upstream = u;
    }
    Ok(decision)
}

fn check_theta(theta: f64) -> Result<()> {
    if !theta.is_finite() {
        return Err(invalid(format!("theta must be finite, got {theta}")));
    }
    if theta.abs() >= 1.0 {
        return Err(invalid(format!("theta must lie in (-1, 1), got {theta}")));
    }
    Ok(())
}

fn control_law(theta: f64, params: &StageControllerParams) -> f64 {
    let inner = (PI / (2.0 * params.c)) * (FRAC_PI_2 * theta).tan();
    -(2.0 * params.v_bar / PI) * inner.atan()
}

fn gain_law(theta: f64, params: &StageControllerParams) -> f64 {
    let c = params.c;
    let cos = (FRAC_PI_2 * theta).cos();
    -2.0 * PI * params.v_bar * c / ((4.0 * c * c - PI * PI) * cos * cos + PI * PI)
}
