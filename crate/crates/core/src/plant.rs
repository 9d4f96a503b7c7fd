//! Pure-feedback plants, reference signals and the built-in example systems.
//!
//! A plant of order `n` evolves as
//!
//! ```text
//! d xi_i / dt = f_i(xi_1..xi_i) + g_i(xi_1..xi_i) xi_{i+1} + d_i(t),  i < n
//! d xi_n / dt = f_n(xi_1..xi_n) + g_n(xi_1..xi_n) u       + d_n(t)
//! ```
//!
//! The controller never looks at `f`, `g` or `d`; they exist here only to
//! drive simulations.

use std::f64::consts::{FRAC_PI_2, SQRT_2};
use std::fmt;
use std::str::FromStr;
use std::sync::Arc;

use crate::controller::{CascadeConfig, StageControllerParams};
use crate::error::{invalid, Error, Result};
use crate::feasibility::BoundsSpec;
use crate::funnel::FunnelParams;

/// A scalar function of the leading states `xi_1..xi_i`.
pub type StateFn = Arc<dyn Fn(&[f64]) -> f64 + Send + Sync>;
/// A scalar function of time.
pub type TimeFn = Arc<dyn Fn(f64) -> f64 + Send + Sync>;

/// Dynamics oracles of a pure-feedback system.
#[derive(Clone)]
pub struct SystemSpec {
    f: Vec<StateFn>,
    g: Vec<StateFn>,
    d: Vec<TimeFn>,
}

impl SystemSpec {
    pub fn new(f: Vec<StateFn>, g: Vec<StateFn>, d: Vec<TimeFn>) -> Result<Self> {
        let n = f.len();
        if n == 0 {
            return Err(invalid("system order must be positive"));
        }
        if g.len() != n {
            return Err(Error::DimensionMismatch {
                what: "g oracles",
                expected: n,
                got: g.len(),
            });
        }
        if d.len() != n {
            return Err(Error::DimensionMismatch {
                what: "d oracles",
                expected: n,
                got: d.len(),
            });
        }
        Ok(Self { f, g, d })
    }

    pub fn n(&self) -> usize {
        self.f.len()
    }

    /// `f_i` evaluated on the first `i` entries of `state` (`stage` is 1-based).
    pub fn f(&self, stage: usize, state: &[f64]) -> f64 {
        (self.f[stage - 1])(&state[..stage])
    }

    pub fn g(&self, stage: usize, state: &[f64]) -> f64 {
        (self.g[stage - 1])(&state[..stage])
    }

    pub fn d(&self, stage: usize, t: f64) -> f64 {
        (self.d[stage - 1])(t)
    }
}

impl fmt::Debug for SystemSpec {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("SystemSpec")
            .field("n", &self.n())
            .finish_non_exhaustive()
    }
}

/// Desired output `y_d(t)` together with its derivative.
#[derive(Clone)]
pub struct ReferenceSpec {
    y_d: TimeFn,
    y_d_rate: TimeFn,
}

impl ReferenceSpec {
    pub fn new(y_d: TimeFn, y_d_rate: TimeFn) -> Self {
        Self { y_d, y_d_rate }
    }

    /// `y_d(t) = amplitude * sin(frequency * t)`.
    pub fn sinusoid(amplitude: f64, frequency: f64) -> Self {
        Self::new(
            Arc::new(move |t| amplitude * (frequency * t).sin()),
            Arc::new(move |t| amplitude * frequency * (frequency * t).cos()),
        )
    }

    pub fn constant(value: f64) -> Self {
        Self::new(Arc::new(move |_| value), Arc::new(|_| 0.0))
    }

    pub fn value(&self, t: f64) -> f64 {
        (self.y_d)(t)
    }

    pub fn rate(&self, t: f64) -> f64 {
        (self.y_d_rate)(t)
    }
}

impl fmt::Debug for ReferenceSpec {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("ReferenceSpec").finish_non_exhaustive()
    }
}

/// State derivative of the plant for input `input` at time `t`.
pub fn eval_dynamics(sys: &SystemSpec, state: &[f64], input: f64, t: f64) -> Result<Vec<f64>> {
    let n = sys.n();
    if state.len() != n {
        return Err(Error::DimensionMismatch {
            what: "plant state",
            expected: n,
            got: state.len(),
        });
    }
    if !input.is_finite() {
        return Err(Error::NonFinite {
            what: "plant input",
            stage: n,
        });
    }
    let mut out = Vec::with_capacity(n);
    for stage in 1..=n {
        let drive = if stage < n { state[stage] } else { input };
        let rate = sys.f(stage, state) + sys.g(stage, state) * drive + sys.d(stage, t);
        if !rate.is_finite() {
            return Err(Error::DynamicsBlowup { stage });
        }
        out.push(rate);
    }
    Ok(out)
}

/// Result of sampling `|f_i| <= k_i * ||xi_1..xi_i||` over a box.
#[derive(Debug, Clone, PartialEq)]
pub struct GrowthCheck {
    pub stage: usize,
    pub k: f64,
    /// Largest `|f_i| - k_i ||xi||` seen; positive means the bound failed.
    pub worst_excess: f64,
    pub worst_point: Vec<f64>,
}

impl GrowthCheck {
    pub fn holds(&self) -> bool {
        self.worst_excess <= 0.0
    }
}

/// Samples each `f_i` on a uniform grid over `[-half_width, half_width]^i`
/// and reports how far the declared linear-growth bound `k_i` is exceeded.
/// Euclidean norm throughout.
pub fn spot_check_growth(
    sys: &SystemSpec,
    k: &[f64],
    half_width: f64,
    points_per_axis: usize,
) -> Result<Vec<GrowthCheck>> {
    let n = sys.n();
    if k.len() != n {
        return Err(Error::DimensionMismatch {
            what: "Lipschitz constants",
            expected: n,
            got: k.len(),
        });
    }
    if points_per_axis < 2 || !(half_width.is_finite() && half_width > 0.0) {
        return Err(invalid(
            "growth spot-check needs a positive box and >= 2 points per axis",
        ));
    }
    let axis: Vec<f64> = (0..points_per_axis)
        .map(|j| -half_width + 2.0 * half_width * j as f64 / (points_per_axis - 1) as f64)
        .collect();

    let mut out = Vec::with_capacity(n);
    for stage in 1..=n {
        let mut worst = GrowthCheck {
            stage,
            k: k[stage - 1],
            worst_excess: f64::NEG_INFINITY,
            worst_point: vec![0.0; stage],
        };
        let mut idx = vec![0usize; stage];
        let mut point = vec![0.0; n];
        loop {
            for (slot, &j) in point.iter_mut().zip(&idx) {
                *slot = axis[j];
            }
            let norm = point[..stage].iter().map(|x| x * x).sum::<f64>().sqrt();
            let excess = sys.f(stage, &point).abs() - k[stage - 1] * norm;
            if excess > worst.worst_excess {
                worst.worst_excess = excess;
                worst.worst_point = point[..stage].to_vec();
            }
            // odometer increment
            let mut pos = 0;
            while pos < stage {
                idx[pos] += 1;
                if idx[pos] < points_per_axis {
                    break;
                }
                idx[pos] = 0;
                pos += 1;
            }
            if pos == stage {
                break;
            }
        }
        out.push(worst);
    }
    Ok(out)
}

/// Inverted pendulum with viscous friction and a sinusoidal disturbance on
/// the velocity equation.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PendulumParams {
    pub mass: f64,
    pub length: f64,
    pub friction: f64,
    pub gravity: f64,
    pub disturbance_amplitude: f64,
}

impl Default for PendulumParams {
    fn default() -> Self {
        Self {
            mass: 0.01,
            length: 1.0,
            friction: 0.01,
            gravity: 9.8,
            disturbance_amplitude: 0.5,
        }
    }
}

impl PendulumParams {
    pub fn system(&self) -> Result<SystemSpec> {
        let Self {
            mass,
            length,
            friction,
            gravity,
            disturbance_amplitude,
        } = *self;
        if !(mass > 0.0 && length > 0.0) {
            return Err(invalid("pendulum mass and length must be positive"));
        }
        let input_gain = 1.0 / (mass * length * length);
        SystemSpec::new(
            vec![
                Arc::new(|_| 0.0),
                Arc::new(move |x| {
                    -(gravity / length) * x[0].sin() - (friction / mass) * x[1] + x[1].sin()
                }),
            ],
            vec![Arc::new(|_| 1.0), Arc::new(move |_| input_gain)],
            vec![
                Arc::new(|_| 0.0),
                Arc::new(move |t| disturbance_amplitude * t.sin()),
            ],
        )
    }
}

/// Second-order system `xi1' = a sin(xi1) + b1 xi2 + d1`,
/// `xi2' = sin(xi1) + xi2 + b2 u + d2` with sinusoidal disturbances.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct NonlinearParams {
    pub sin_gain: f64,
    pub g1: f64,
    pub g2: f64,
    pub d1_amplitude: f64,
    pub d2_amplitude: f64,
}

impl Default for NonlinearParams {
    fn default() -> Self {
        Self {
            sin_gain: 0.5,
            g1: 5.0,
            g2: 7.0,
            d1_amplitude: 0.2,
            d2_amplitude: 0.5,
        }
    }
}

impl NonlinearParams {
    pub fn system(&self) -> Result<SystemSpec> {
        let Self {
            sin_gain,
            g1,
            g2,
            d1_amplitude,
            d2_amplitude,
        } = *self;
        SystemSpec::new(
            vec![
                Arc::new(move |x| sin_gain * x[0].sin()),
                Arc::new(|x| x[0].sin() + x[1]),
            ],
            vec![Arc::new(move |_| g1), Arc::new(move |_| g2)],
            vec![
                Arc::new(move |t| d1_amplitude * t.sin()),
                Arc::new(move |t| d2_amplitude * t.sin()),
            ],
        )
    }
}

/// Names of the bundled example systems.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum BuiltinSystem {
    PendulumEx1,
    NonlinearEx2,
}

impl BuiltinSystem {
    pub const ALL: [BuiltinSystem; 2] = [BuiltinSystem::PendulumEx1, BuiltinSystem::NonlinearEx2];

    pub fn name(self) -> &'static str {
        match self {
            BuiltinSystem::PendulumEx1 => "pendulum_ex1",
            BuiltinSystem::NonlinearEx2 => "nonlinear_ex2",
        }
    }
}

impl fmt::Display for BuiltinSystem {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for BuiltinSystem {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        BuiltinSystem::ALL
            .into_iter()
            .find(|b| b.name() == s)
            .ok_or_else(|| Error::UnknownSystem(s.to_string()))
    }
}

/// A built-in system together with its reference controller design,
/// certification constants and initial condition.
#[derive(Debug, Clone)]
pub struct BuiltinScenario {
    pub name: BuiltinSystem,
    pub system: SystemSpec,
    pub reference: ReferenceSpec,
    /// Reference as `(amplitude, frequency)` of `amplitude * sin(frequency t)`.
    pub reference_sinusoid: (f64, f64),
    /// Controller with the funnel initial bounds `p_i` as given.
    pub controller: CascadeConfig,
    /// Offsets `Delta_i` of the `p_i = |z_i(0)| + Delta_i` parameterisation.
    pub deltas: Vec<f64>,
    pub bounds: BoundsSpec,
    pub x0: Vec<f64>,
    pub horizon: f64,
}

/// Looks up a built-in example by name (`pendulum_ex1` or `nonlinear_ex2`).
pub fn builtin_system(name: &str) -> Result<BuiltinScenario> {
    let which: BuiltinSystem = name.parse()?;
    Ok(match which {
        BuiltinSystem::PendulumEx1 => {
            let stages = vec![
                StageControllerParams::new(4.5, FRAC_PI_2, FunnelParams::new(1.0, 0.05, 0.9)?)?,
                StageControllerParams::new(8.0, FRAC_PI_2, FunnelParams::new(1.4, 0.05, 1.0)?)?,
            ];
            BuiltinScenario {
                name: which,
                system: PendulumParams::default().system()?,
                reference: ReferenceSpec::sinusoid(1.0, 0.5),
                reference_sinusoid: (1.0, 0.5),
                controller: CascadeConfig::new(stages)?,
                deltas: vec![0.5, 0.1],
                bounds: BoundsSpec {
                    k: vec![0.0, 9.8 * SQRT_2],
                    g_lo: vec![1.0, 100.0],
                    g_hi: vec![1.0, 100.0],
                    d_bar: vec![0.0, 0.5],
                    v0_bar: 1.0,
                    r0: 0.5,
                },
                x0: vec![-0.5, 1.0],
                horizon: 20.0,
            }
        }
        BuiltinSystem::NonlinearEx2 => {
            let stages = vec![
                StageControllerParams::new(1.0, FRAC_PI_2, FunnelParams::new(1.0, 0.08, 0.9)?)?,
                StageControllerParams::new(16.0, FRAC_PI_2, FunnelParams::new(0.4, 0.01, 0.5)?)?,
            ];
            BuiltinScenario {
                name: which,
                system: NonlinearParams::default().system()?,
                reference: ReferenceSpec::sinusoid(0.5, 1.0),
                reference_sinusoid: (0.5, 1.0),
                controller: CascadeConfig::new(stages)?,
                deltas: vec![0.5, 0.1],
                bounds: BoundsSpec {
                    k: vec![0.5, 1.0],
                    g_lo: vec![5.0, 7.0],
                    g_hi: vec![5.0, 7.0],
                    d_bar: vec![0.2, 0.5],
                    v0_bar: 0.5,
                    r0: 0.5,
                },
                x0: vec![0.5, -0.8],
                horizon: 20.0,
            }
        }
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn pendulum_equilibrium() {
        let sys = PendulumParams {
            disturbance_amplitude: 0.0,
            ..Default::default()
        }
        .system()
        .unwrap();
        assert_eq!(
            eval_dynamics(&sys, &[0.0, 0.0], 0.0, 0.0).unwrap(),
            vec![0.0, 0.0]
        );
    }

    #[test]
    fn pendulum_friction_and_sine_terms() {
        let sys = PendulumParams::default().system().unwrap();
        let rate = eval_dynamics(&sys, &[0.0, 1.0], 0.0, 0.0).unwrap();
        assert_eq!(rate[0], 1.0);
        assert!((rate[1] - (-1.0 + 1f64.sin())).abs() < 1e-15);
        assert!((rate[1] + 0.158_529_015_192_103_5).abs() < 1e-12);
    }

    #[test]
    fn nonlinear_unit_input() {
        let sys = NonlinearParams::default().system().unwrap();
        assert_eq!(
            eval_dynamics(&sys, &[0.0, 0.0], 1.0, 0.0).unwrap(),
            vec![0.0, 7.0]
        );
    }

    #[test]
    fn builtin_gains() {
        let ex1 = builtin_system("pendulum_ex1").unwrap();
        for x in [[0.0, 0.0], [1.0, -3.0], [-2.0, 5.0]] {
            assert!((ex1.system.g(2, &x) - 100.0).abs() < 1e-12);
            assert_eq!(ex1.system.g(1, &x), 1.0);
        }
        assert_eq!(ex1.x0, vec![-0.5, 1.0]);

        let ex2 = builtin_system("nonlinear_ex2").unwrap();
        for x in [[0.0, 0.0], [0.3, -0.2]] {
            assert_eq!(ex2.system.g(1, &x), 5.0);
            assert_eq!(ex2.system.g(2, &x), 7.0);
        }
        assert_eq!(ex2.x0, vec![0.5, -0.8]);
    }

    #[test]
    fn unknown_builtin_rejected() {
        assert!(matches!(
            builtin_system("duffing"),
            Err(Error::UnknownSystem(_))
        ));
    }

    #[test]
    fn dynamics_are_deterministic() {
        let sys = builtin_system("pendulum_ex1").unwrap().system;
        let a = eval_dynamics(&sys, &[0.3, -0.7], 2.5, 1.7).unwrap();
        let b = eval_dynamics(&sys, &[0.3, -0.7], 2.5, 1.7).unwrap();
        assert_eq!(a[0].to_bits(), b[0].to_bits());
        assert_eq!(a[1].to_bits(), b[1].to_bits());
    }

    #[test]
    fn blowup_reports_stage() {
        let sys = SystemSpec::new(
            vec![Arc::new(|_| 0.0), Arc::new(|x| 1.0 / x[0])],
            vec![Arc::new(|_| 1.0), Arc::new(|_| 1.0)],
            vec![Arc::new(|_| 0.0), Arc::new(|_| 0.0)],
        )
        .unwrap();
        assert!(matches!(
            eval_dynamics(&sys, &[0.0, 0.0], 0.0, 0.0),
            Err(Error::DynamicsBlowup { stage: 2 })
        ));
        assert!(eval_dynamics(&sys, &[1.0, 0.0], f64::NAN, 0.0).is_err());
    }

    #[test]
    fn pendulum_growth_bounds_hold() {
        let ex1 = builtin_system("pendulum_ex1").unwrap();
        let checks = spot_check_growth(&ex1.system, &ex1.bounds.k, 3.0, 61).unwrap();
        assert!(checks.iter().all(GrowthCheck::holds), "{checks:?}");
    }

    #[test]
    fn nonlinear_stage_two_growth_bound_is_violated() {
        let ex2 = builtin_system("nonlinear_ex2").unwrap();
        let checks = spot_check_growth(&ex2.system, &ex2.bounds.k, 1.0, 21).unwrap();
        assert!(checks[0].holds());
        assert!(!checks[1].holds());
        // sin(1) + 1 > sqrt(2) at the corner (1, 1)
        let corner = 1f64.sin() + 1.0 - SQRT_2;
        assert!(checks[1].worst_excess >= corner - 1e-12);
    }
}
