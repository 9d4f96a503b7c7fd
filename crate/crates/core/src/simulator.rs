//! Closed-loop simulation and runtime bound monitoring.
//!
//! The plant is integrated with classic fixed-step RK4. The cascade is
//! re-evaluated at every RK4 sub-stage, so the loop is continuous static
//! feedback rather than a sampled-data one. Samples are recorded every
//! `step`; each recorded step may be split into `substeps` equal RK4 steps
//! when the closed loop is too stiff for `step` itself.

use std::fmt;

use crate::controller::{cascade, stage_gain, CascadeConfig, CascadeDecision, THETA_CLAMP_EPS};
use crate::error::{invalid, Error, Result};
use crate::feasibility::{rate_bounds, BoundsSpec};
use crate::plant::{eval_dynamics, ReferenceSpec, SystemSpec};

/// Everything needed for one closed-loop run.
#[derive(Debug, Clone)]
pub struct Scenario {
    pub system: SystemSpec,
    pub reference: ReferenceSpec,
    pub controller: CascadeConfig,
    /// Certification constants, used only by the monitors.
    pub bounds: Option<BoundsSpec>,
    pub x0: Vec<f64>,
    pub horizon: f64,
    /// Recording interval.
    pub step: f64,
    /// RK4 steps per recording interval.
    pub substeps: usize,
    /// Run even if the trivial condition fails at `t = 0`.
    pub permissive: bool,
}

impl Scenario {
    pub fn new(
        system: SystemSpec,
        reference: ReferenceSpec,
        controller: CascadeConfig,
        x0: Vec<f64>,
        horizon: f64,
        step: f64,
    ) -> Self {
        Self {
            system,
            reference,
            controller,
            bounds: None,
            x0,
            horizon,
            step,
            substeps: 1,
            permissive: false,
        }
    }

    pub fn validate(&self) -> Result<()> {
        let n = self.controller.n();
        if self.system.n() != n {
            return Err(Error::DimensionMismatch {
                what: "system order",
                expected: n,
                got: self.system.n(),
            });
        }
        if self.x0.len() != n {
            return Err(Error::DimensionMismatch {
                what: "initial state",
                expected: n,
                got: self.x0.len(),
            });
        }
        if let Some(b) = &self.bounds {
            b.validate(n)?;
        }
        if !(self.step.is_finite() && self.step > 0.0) {
            return Err(invalid(format!("step must be positive, got {}", self.step)));
        }
        if !(self.horizon.is_finite() && self.horizon >= self.step) {
            return Err(invalid(format!(
                "horizon {} must be at least one step ({})",
                self.horizon, self.step
            )));
        }
        if self.substeps == 0 {
            return Err(invalid("substeps must be at least 1"));
        }
        Ok(())
    }

    /// Number of recorded intervals.
    pub fn intervals(&self) -> usize {
        (self.horizon / self.step + 1e-9).floor() as usize
    }
}

/// One recorded instant of the closed loop.
#[derive(Debug, Clone, PartialEq)]
pub struct Sample {
    pub t: f64,
    pub xi: Vec<f64>,
    pub z: Vec<f64>,
    pub theta: Vec<f64>,
    pub u: Vec<f64>,
    pub psi: Vec<f64>,
    pub y_d: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum EventKind {
    /// `|theta|` reached the clamp during the interval ending at the event time.
    Saturation,
    /// `|z_i(0)| >= p_i` in a permissive run.
    TrivialCondition,
    /// `|z_i| >= psi_i` at a recorded sample.
    PerformanceViolation,
    /// `|u_i| >= v_bar_i` at a recorded sample.
    InputViolation,
}

impl EventKind {
    pub fn as_str(self) -> &'static str {
        match self {
            EventKind::Saturation => "saturation",
            EventKind::TrivialCondition => "trivial_condition",
            EventKind::PerformanceViolation => "performance_violation",
            EventKind::InputViolation => "input_violation",
        }
    }
}

impl fmt::Display for EventKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Event {
    pub t: f64,
    pub kind: EventKind,
    /// 1-based stage.
    pub stage: usize,
    pub value: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Trajectory {
    pub n: usize,
    pub samples: Vec<Sample>,
    pub events: Vec<Event>,
}

impl Trajectory {
    pub fn len(&self) -> usize {
        self.samples.len()
    }

    pub fn is_empty(&self) -> bool {
        self.samples.is_empty()
    }

    pub fn times(&self) -> Vec<f64> {
        self.samples.iter().map(|s| s.t).collect()
    }

    pub fn last(&self) -> &Sample {
        &self.samples[self.samples.len() - 1]
    }

    pub fn events_of(&self, kind: EventKind) -> impl Iterator<Item = &Event> {
        self.events.iter().filter(move |e| e.kind == kind)
    }
}

/// Integrates the closed loop over the scenario horizon.
///
/// Fails if the trivial condition `|z_i(0)| < psi_i(0)` does not hold (unless
/// the scenario is permissive) or if the state stops being finite.
pub fn simulate(scenario: &Scenario) -> Result<Trajectory> {
    scenario.validate()?;
    let n = scenario.controller.n();
    let loop_ = ClosedLoop { scenario };
    let mut events = Vec::new();

    let first = loop_.decide(&scenario.x0, 0.0).map_err(|e| abort(0.0, e))?;
    for (j, theta) in first.theta.iter().enumerate() {
        if theta.abs() >= 1.0 {
            let p = scenario.controller.stages()[j].funnel().p();
            if !scenario.permissive {
                return Err(Error::TrivialCondition {
                    stage: j + 1,
                    z0: first.z[j],
                    p,
                });
            }
            events.push(Event {
                t: 0.0,
                kind: EventKind::TrivialCondition,
                stage: j + 1,
                value: first.z[j],
            });
        }
    }

    let intervals = scenario.intervals();
    let mut samples = Vec::with_capacity(intervals + 1);
    let mut clamp = vec![0.0f64; n];
    note_clamps(&first, &mut clamp);
    flush_clamps(&mut clamp, 0.0, &mut events);
    samples.push(loop_.record(&scenario.x0, 0.0, first, &mut events)?);

    let h = scenario.step / scenario.substeps as f64;
    let mut x = scenario.x0.clone();
    for k in 0..intervals {
        let t0 = k as f64 * scenario.step;
        for j in 0..scenario.substeps {
            let t = t0 + j as f64 * h;
            x = loop_.rk4(&x, t, h, &mut clamp).map_err(|e| abort(t, e))?;
        }
        let t1 = (k + 1) as f64 * scenario.step;
        if let Some(i) = x.iter().position(|v| !v.is_finite()) {
            return Err(abort(
                t1,
                Error::NonFinite {
                    what: "state",
                    stage: i + 1,
                },
            ));
        }
        let decision = loop_.decide(&x, t1).map_err(|e| abort(t1, e))?;
        note_clamps(&decision, &mut clamp);
        flush_clamps(&mut clamp, t1, &mut events);
        samples.push(loop_.record(&x, t1, decision, &mut events)?);
    }
    Ok(Trajectory { n, samples, events })
}

fn abort(time: f64, source: Error) -> Error {
    Error::SimulationAborted {
        time,
        source: Box::new(source),
    }
}

fn note_clamps(decision: &CascadeDecision, clamp: &mut [f64]) {
    for ((slot, &sat), &theta) in clamp
        .iter_mut()
        .zip(&decision.saturated)
        .zip(&decision.theta)
    {
        if sat && theta.abs() > slot.abs() {
            *slot = theta;
        }
    }
}

fn flush_clamps(clamp: &mut [f64], t: f64, events: &mut Vec<Event>) {
    for (j, slot) in clamp.iter_mut().enumerate() {
        if *slot != 0.0 {
            events.push(Event {
                t,
                kind: EventKind::Saturation,
                stage: j + 1,
                value: *slot,
            });
            *slot = 0.0;
        }
    }
}

struct ClosedLoop<'a> {
    scenario: &'a Scenario,
}

impl ClosedLoop<'_> {
    fn decide(&self, x: &[f64], t: f64) -> Result<CascadeDecision> {
        cascade(x, t, &self.scenario.controller, &self.scenario.reference)
    }

    fn rhs(&self, x: &[f64], t: f64, clamp: &mut [f64]) -> Result<Vec<f64>> {
        let decision = self.decide(x, t)?;
        note_clamps(&decision, clamp);
        eval_dynamics(&self.scenario.system, x, decision.input(), t)
    }

    fn rk4(&self, x: &[f64], t: f64, h: f64, clamp: &mut [f64]) -> Result<Vec<f64>> {
        let k1 = self.rhs(x, t, clamp)?;
        let k2 = self.rhs(&axpy(x, 0.5 * h, &k1), t + 0.5 * h, clamp)?;
        let k3 = self.rhs(&axpy(x, 0.5 * h, &k2), t + 0.5 * h, clamp)?;
        let k4 = self.rhs(&axpy(x, h, &k3), t + h, clamp)?;
        Ok((0..x.len())
            .map(|i| x[i] + h / 6.0 * (k1[i] + 2.0 * k2[i] + 2.0 * k3[i] + k4[i]))
            .collect())
    }

    fn record(
        &self,
        x: &[f64],
        t: f64,
        d: CascadeDecision,
        events: &mut Vec<Event>,
    ) -> Result<Sample> {
        let stages = self.scenario.controller.stages();
        let psi = stages
            .iter()
            .map(|s| s.funnel().value(t))
            .collect::<Result<Vec<_>>>()?;
        for (j, stage) in stages.iter().enumerate() {
            if d.z[j].abs() >= psi[j] {
                events.push(Event {
                    t,
                    kind: EventKind::PerformanceViolation,
                    stage: j + 1,
                    value: d.z[j],
                });
            }
            if d.u[j].abs() >= stage.v_bar() {
                events.push(Event {
                    t,
                    kind: EventKind::InputViolation,
                    stage: j + 1,
                    value: d.u[j],
                });
            }
        }
        Ok(Sample {
            t,
            xi: x.to_vec(),
            z: d.z,
            theta: d.theta,
            u: d.u,
            psi,
            y_d: self.scenario.reference.value(t),
        })
    }
}

fn axpy(x: &[f64], a: f64, y: &[f64]) -> Vec<f64> {
    x.iter().zip(y).map(|(x, y)| x + a * y).collect()
}

/// The four families of runtime bounds.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum BoundFamily {
    /// `|z_i| < psi_i`.
    Performance,
    /// `|u_i| < v_bar_i`.
    Input,
    /// `|xi_i| < psi_i + v_bar_{i-1}`, with `v_bar_0` the reference bound.
    State,
    /// `|du_i/dt| <= r_i`.
    Rate,
}

impl BoundFamily {
    pub const ALL: [BoundFamily; 4] = [
        BoundFamily::Performance,
        BoundFamily::Input,
        BoundFamily::State,
        BoundFamily::Rate,
    ];

    pub fn as_str(self) -> &'static str {
        match self {
            BoundFamily::Performance => "performance",
            BoundFamily::Input => "input",
            BoundFamily::State => "state",
            BoundFamily::Rate => "rate",
        }
    }
}

impl fmt::Display for BoundFamily {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

/// Worst case of one bound family at one stage. A sample violates the bound
/// when its margin is negative.
#[derive(Debug, Clone, PartialEq)]
pub struct BoundCheck {
    pub family: BoundFamily,
    pub stage: usize,
    pub worst_margin: f64,
    pub worst_time: f64,
    pub violations: usize,
}

#[derive(Debug, Clone, PartialEq)]
pub struct MonitorReport {
    pub checks: Vec<BoundCheck>,
}

impl MonitorReport {
    pub fn violations(&self, family: BoundFamily) -> usize {
        self.checks
            .iter()
            .filter(|c| c.family == family)
            .map(|c| c.violations)
            .sum()
    }

    pub fn total_violations(&self) -> usize {
        self.checks.iter().map(|c| c.violations).sum()
    }

    pub fn check(&self, family: BoundFamily, stage: usize) -> Option<&BoundCheck> {
        self.checks
            .iter()
            .find(|c| c.family == family && c.stage == stage)
    }

    pub fn all_strictly_positive(&self) -> bool {
        self.checks.iter().all(|c| c.worst_margin > 0.0)
    }
}

/// Finite-difference estimate of every `du_i/dt`: central differences inside,
/// one-sided at the two ends. Indexed `[sample][stage]`.
pub fn input_rates(trajectory: &Trajectory) -> Vec<Vec<f64>> {
    finite_difference(trajectory, |s| &s.u)
}

fn finite_difference(
    trajectory: &Trajectory,
    field: impl Fn(&Sample) -> &Vec<f64>,
) -> Vec<Vec<f64>> {
    let s = &trajectory.samples;
    let m = s.len();
    (0..m)
        .map(|k| {
            let (a, b) = match k {
                _ if m < 2 => (0, 0),
                0 => (0, 1),
                _ if k == m - 1 => (m - 2, m - 1),
                _ => (k - 1, k + 1),
            };
            let dt = s[b].t - s[a].t;
            (0..trajectory.n)
                .map(|i| {
                    if dt > 0.0 {
                        (field(&s[b])[i] - field(&s[a])[i]) / dt
                    } else {
                        0.0
                    }
                })
                .collect()
        })
        .collect()
}

/// Checks every recorded sample against all four bound families.
pub fn monitor(
    trajectory: &Trajectory,
    config: &CascadeConfig,
    bounds: &BoundsSpec,
) -> Result<MonitorReport> {
    let n = config.n();
    if trajectory.n != n {
        return Err(Error::DimensionMismatch {
            what: "trajectory order",
            expected: n,
            got: trajectory.n,
        });
    }
    if let Some(bad) = trajectory.samples.iter().find(|s| {
        [s.xi.len(), s.z.len(), s.theta.len(), s.u.len(), s.psi.len()]
            .iter()
            .any(|&l| l != n)
    }) {
        return Err(invalid(format!(
            "sample at t = {} has inconsistent dimensions",
            bad.t
        )));
    }
    let r = rate_bounds(config, bounds)?;
    let rates = input_rates(trajectory);
    let stages = config.stages();

    let mut checks = Vec::with_capacity(4 * n);
    for family in BoundFamily::ALL {
        for j in 0..n {
            let v_prev = if j == 0 {
                bounds.v0_bar
            } else {
                stages[j - 1].v_bar()
            };
            let margin = |k: usize, s: &Sample| match family {
                BoundFamily::Performance => s.psi[j] - s.z[j].abs(),
                BoundFamily::Input => stages[j].v_bar() - s.u[j].abs(),
                BoundFamily::State => s.psi[j] + v_prev - s.xi[j].abs(),
                BoundFamily::Rate => r[j] - rates[k][j].abs(),
            };
            let mut check = BoundCheck {
                family,
                stage: j + 1,
                worst_margin: f64::INFINITY,
                worst_time: 0.0,
                violations: 0,
            };
            for (k, s) in trajectory.samples.iter().enumerate() {
                let m = margin(k, s);
                if m < check.worst_margin || m.is_nan() {
                    check.worst_margin = m;
                    check.worst_time = s.t;
                }
                if m.is_nan() || m < 0.0 {
                    check.violations += 1;
                }
            }
            checks.push(check);
        }
    }
    Ok(MonitorReport { checks })
}

/// Largest disagreement, per stage, between the finite-difference rate of
/// `u_i` and `phi_i(theta_i)` times the finite-difference rate of `theta_i`.
/// Samples whose neighbourhood touches the clamp are skipped.
pub fn chain_rule_residual(trajectory: &Trajectory, config: &CascadeConfig) -> Result<Vec<f64>> {
    let n = config.n();
    if trajectory.n != n {
        return Err(Error::DimensionMismatch {
            what: "trajectory order",
            expected: n,
            got: trajectory.n,
        });
    }
    let du = input_rates(trajectory);
    let dtheta = finite_difference(trajectory, |s| &s.theta);
    let s = &trajectory.samples;
    let limit = 1.0 - THETA_CLAMP_EPS;
    let mut worst = vec![0.0f64; n];
    for k in 1..s.len().saturating_sub(1) {
        for (j, stage) in config.stages().iter().enumerate() {
            if (k - 1..=k + 1).any(|m| s[m].theta[j].abs() >= limit) {
                continue;
            }
            let phi = stage_gain(s[k].theta[j], stage)?;
            worst[j] = worst[j].max((du[k][j] - phi * dtheta[k][j]).abs());
        }
    }
    Ok(worst)
}

#[cfg(test)]
mod tests {
    use std::sync::Arc;

    use super::*;
    use crate::controller::StageControllerParams;
    use crate::funnel::FunnelParams;

    fn integrator_chain() -> Scenario {
        let system = SystemSpec::new(
            vec![Arc::new(|_| 0.0), Arc::new(|_| 0.0)],
            vec![Arc::new(|_| 1.0), Arc::new(|_| 1.0)],
            vec![Arc::new(|_| 0.0), Arc::new(|_| 0.0)],
        )
        .unwrap();
        let controller = CascadeConfig::new(vec![
            StageControllerParams::new(2.0, 1.0, FunnelParams::new(1.0, 0.1, 1.0).unwrap())
                .unwrap(),
            StageControllerParams::new(5.0, 1.0, FunnelParams::new(3.0, 0.2, 1.0).unwrap())
                .unwrap(),
        ])
        .unwrap();
        Scenario::new(
            system,
            ReferenceSpec::constant(0.0),
            controller,
            vec![0.0, 0.0],
            1.0,
            0.01,
        )
    }

    #[test]
    fn equilibrium_stays_at_zero() {
        let traj = simulate(&integrator_chain()).unwrap();
        assert_eq!(traj.len(), 101);
        for s in &traj.samples {
            assert!(s.xi.iter().chain(&s.u).all(|v| *v == 0.0));
        }
        assert!(traj.events.is_empty());
    }

    #[test]
    fn scenario_validation() {
        let mut s = integrator_chain();
        s.horizon = 0.0;
        assert!(simulate(&s).is_err());
        let mut s = integrator_chain();
        s.step = -1.0;
        assert!(simulate(&s).is_err());
        let mut s = integrator_chain();
        s.x0 = vec![0.0];
        assert!(simulate(&s).is_err());
        let mut s = integrator_chain();
        s.substeps = 0;
        assert!(simulate(&s).is_err());
    }

    #[test]
    fn trivial_condition_is_enforced_unless_permissive() {
        let mut s = integrator_chain();
        s.x0 = vec![1.5, 0.0];
        assert!(matches!(
            simulate(&s),
            Err(Error::TrivialCondition { stage: 1, .. })
        ));
        s.permissive = true;
        let traj = simulate(&s).unwrap();
        assert_eq!(traj.events_of(EventKind::TrivialCondition).count(), 1);
        assert!(traj
            .events_of(EventKind::Saturation)
            .any(|e| e.t == 0.0 && e.stage == 1));
        assert!(traj
            .events_of(EventKind::PerformanceViolation)
            .any(|e| e.t == 0.0));
    }

    #[test]
    fn blowup_aborts_with_time() {
        let mut s = integrator_chain();
        s.system = SystemSpec::new(
            vec![Arc::new(|x| x[0] * x[0] * 1e3 + 1e3), Arc::new(|_| 0.0)],
            vec![Arc::new(|_| 1.0), Arc::new(|_| 1.0)],
            vec![Arc::new(|_| 0.0), Arc::new(|_| 0.0)],
        )
        .unwrap();
        s.permissive = true;
        s.horizon = 10.0;
        match simulate(&s) {
            Err(Error::SimulationAborted { time, .. }) => assert!(time > 0.0 && time < 10.0),
            other => panic!("expected abort, got {other:?}"),
        }
    }

    #[test]
    fn monitor_flags_edited_sample() {
        let s = integrator_chain();
        let mut traj = simulate(&s).unwrap();
        let bounds = BoundsSpec {
            k: vec![0.0; 2],
            g_lo: vec![1.0; 2],
            g_hi: vec![1.0; 2],
            d_bar: vec![0.0; 2],
            v0_bar: 0.0,
            r0: 0.0,
        };
        let clean = monitor(&traj, &s.controller, &bounds).unwrap();
        assert_eq!(clean.total_violations(), 0);

        let k = 40;
        traj.samples[k].z[0] = traj.samples[k].psi[0] * 1.01;
        let report = monitor(&traj, &s.controller, &bounds).unwrap();
        let perf = report.check(BoundFamily::Performance, 1).unwrap();
        assert_eq!(perf.violations, 1);
        assert_eq!(perf.worst_time, traj.samples[k].t);
        assert_eq!(report.violations(BoundFamily::Performance), 1);
    }

    #[test]
    fn monitor_rejects_mismatched_order() {
        let s = integrator_chain();
        let traj = simulate(&s).unwrap();
        let one = CascadeConfig::new(vec![s.controller.stages()[0]]).unwrap();
        let bounds = BoundsSpec {
            k: vec![0.0],
            g_lo: vec![1.0],
            g_hi: vec![1.0],
            d_bar: vec![0.0],
            v0_bar: 0.0,
            r0: 0.0,
        };
        assert!(monitor(&traj, &one, &bounds).is_err());
    }

    #[test]
    fn input_rates_use_one_sided_ends() {
        let mut traj = simulate(&integrator_chain()).unwrap();
        for (k, s) in traj.samples.iter_mut().enumerate() {
            s.u = vec![(k * k) as f64, 0.0];
        }
        let du = input_rates(&traj);
        assert!((du[0][0] - 1.0 / 0.01).abs() < 1e-9);
        assert!((du[5][0] - (36.0 - 16.0) / 0.02).abs() < 1e-9);
        let m = traj.len() - 1;
        assert!((du[m][0] - ((m * m) as f64 - ((m - 1) * (m - 1)) as f64) / 0.01).abs() < 1e-6);
    }
}
