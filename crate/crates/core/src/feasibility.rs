//! Analytical feasibility certificate for jointly prescribed performance and
//! input constraints, and the feasible initial-state region sweep.
//!
//! For every stage `i` the certificate requires
//!
//! ```text
//! varphi_i < (g_hi_i + g_lo_i) v_i + mu_i (q_i - p_i)
//! varphi_i = k_i ||delta_i|| + d_i + g_hi_i p_{i+1} + g_hi_i v_i + r_{i-1}   (no p_{i+1} term at i = n)
//! r_i      = (varphi_i / q_i + mu_i (p_i - q_i) / p_i) |phi_lo_i|
//! delta_i  = [p_1 + v_0, ..., p_i + v_{i-1}]
//! ```
//!
//! plus the trivial condition `|z_i(0)| < p_i`. `r_i` bounds the rate of the
//! `i`-th virtual input and feeds the next stage. Norms are Euclidean.

use rayon::prelude::*;

use crate::controller::{gain_range, stage_control, CascadeConfig, StageControllerParams};
use crate::error::{invalid, Error, Result};
use crate::funnel::FunnelParams;

/// Certification constants: linear-growth constants `k`, control-gain bounds
/// `g_lo <= g <= g_hi`, disturbance bounds `d_bar`, reference bound `v0_bar`
/// and reference-rate bound `r0`.
#[derive(Debug, Clone, PartialEq)]
pub struct BoundsSpec {
    pub k: Vec<f64>,
    pub g_lo: Vec<f64>,
    pub g_hi: Vec<f64>,
    pub d_bar: Vec<f64>,
    pub v0_bar: f64,
    pub r0: f64,
}

impl BoundsSpec {
    /// Checks dimensions against system order `n` and the sign constraints.
    pub fn validate(&self, n: usize) -> Result<()> {
        for (what, v) in [
            ("k", &self.k),
            ("g_lo", &self.g_lo),
            ("g_hi", &self.g_hi),
            ("d_bar", &self.d_bar),
        ] {
            if v.len() != n {
                return Err(Error::DimensionMismatch {
                    what: bounds_field(what),
                    expected: n,
                    got: v.len(),
                });
            }
            if let Some(x) = v.iter().find(|x| !(x.is_finite() && **x >= 0.0)) {
                return Err(invalid(format!(
                    "bound {what} must be finite and nonnegative, got {x}"
                )));
            }
        }
        if let Some(i) = (0..n).find(|&i| self.g_lo[i] > self.g_hi[i]) {
            return Err(invalid(format!(
                "stage {}: g_lo = {} exceeds g_hi = {}",
                i + 1,
                self.g_lo[i],
                self.g_hi[i]
            )));
        }
        for (what, x) in [("v0_bar", self.v0_bar), ("r0", self.r0)] {
            if !(x.is_finite() && x >= 0.0) {
                return Err(invalid(format!(
                    "bound {what} must be finite and nonnegative, got {x}"
                )));
            }
        }
        Ok(())
    }
}

fn bounds_field(name: &str) -> &'static str {
    match name {
        "k" => "bounds.k",
        "g_lo" => "bounds.g_lo",
        "g_hi" => "bounds.g_hi",
        _ => "bounds.d_bar",
    }
}

/// Per-stage outcome of the certificate.
#[derive(Debug, Clone, PartialEq)]
pub struct StageMargin {
    /// 1-based stage index.
    pub stage: usize,
    pub varphi: f64,
    /// `(g_hi + g_lo) v + mu (q - p)`.
    pub rhs: f64,
    /// `rhs - varphi`; the stage condition holds iff this is positive.
    pub margin: f64,
    /// Virtual-input rate bound `r_i`.
    pub rate_bound: f64,
    pub z0: f64,
    /// `p_i - |z_i(0)|`.
    pub trivial_margin: f64,
}

impl StageMargin {
    pub fn satisfied(&self) -> bool {
        self.margin > 0.0 && self.trivial_margin > 0.0
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct FeasibilityReport {
    pub stages: Vec<StageMargin>,
    pub feasible: bool,
}

impl FeasibilityReport {
    /// Stages whose main condition fails.
    pub fn failed_conditions(&self) -> impl Iterator<Item = &StageMargin> {
        self.stages.iter().filter(|s| s.margin <= 0.0)
    }

    /// Stages whose trivial condition `|z_i(0)| < p_i` fails.
    pub fn failed_trivial(&self) -> impl Iterator<Item = &StageMargin> {
        self.stages.iter().filter(|s| s.trivial_margin <= 0.0)
    }
}

/// `delta_i = [p_1 + v_0, ..., p_i + v_{i-1}]` for 1-based `i`.
///
/// `v_bar` must have `v_0` prepended, i.e. `v_bar[j]` is `v_j`.
pub fn delta_vector(i: usize, p: &[f64], v_bar: &[f64]) -> Result<Vec<f64>> {
    if i == 0 || i > p.len() {
        return Err(invalid(format!(
            "stage index {i} out of range 1..={}",
            p.len()
        )));
    }
    if v_bar.len() < i {
        return Err(Error::DimensionMismatch {
            what: "v_bar with v0 prepended",
            expected: i,
            got: v_bar.len(),
        });
    }
    Ok(p[..i].iter().zip(&v_bar[..i]).map(|(p, v)| p + v).collect())
}

/// `varphi_i` for 1-based stage `i` given the previous rate bound `r_{i-1}`
/// (`r_0` from the bounds for the first stage).
pub fn varphi(i: usize, bounds: &BoundsSpec, config: &CascadeConfig, r_prev: f64) -> Result<f64> {
    let n = config.n();
    if i == 0 || i > n {
        return Err(invalid(format!("stage index {i} out of range 1..={n}")));
    }
    let stages = config.stages();
    let p: Vec<f64> = stages.iter().map(|s| s.funnel().p()).collect();
    let v_bar: Vec<f64> = std::iter::once(bounds.v0_bar)
        .chain(stages.iter().map(StageControllerParams::v_bar))
        .collect();
    let delta = delta_vector(i, &p, &v_bar)?;
    let norm = delta.iter().map(|x| x * x).sum::<f64>().sqrt();

    let j = i - 1;
    let next_funnel = if i < n { bounds.g_hi[j] * p[i] } else { 0.0 };
    Ok(bounds.k[j] * norm
        + bounds.d_bar[j]
        + next_funnel
        + bounds.g_hi[j] * stages[j].v_bar()
        + r_prev)
}

/// Virtual-input rate bound `r_i = (varphi_i / q_i + mu_i (p_i - q_i) / p_i) |phi_lo_i|`.
pub fn rate_bound(varphi_i: f64, funnel: &FunnelParams, gain_lo: f64) -> f64 {
    let (p, q, mu) = (funnel.p(), funnel.q(), funnel.mu());
    (varphi_i / q + mu * (p - q) / p) * gain_lo.abs()
}

/// All rate bounds `r_1..r_n` of the recursion.
pub fn rate_bounds(config: &CascadeConfig, bounds: &BoundsSpec) -> Result<Vec<f64>> {
    Ok(recursion(config, bounds)?
        .into_iter()
        .map(|(_, r)| r)
        .collect())
}

fn recursion(config: &CascadeConfig, bounds: &BoundsSpec) -> Result<Vec<(f64, f64)>> {
    bounds.validate(config.n())?;
    let mut out = Vec::with_capacity(config.n());
    let mut r_prev = bounds.r0;
    for (j, stage) in config.stages().iter().enumerate() {
        let vp = varphi(j + 1, bounds, config, r_prev)?;
        let r = rate_bound(vp, stage.funnel(), gain_range(stage).0);
        out.push((vp, r));
        r_prev = r;
    }
    Ok(out)
}

/// Evaluates the certificate for `config` under `bounds`, with `z0` the
/// initial stage errors. The verdict requires every margin strictly positive.
pub fn check_feasibility(
    config: &CascadeConfig,
    bounds: &BoundsSpec,
    z0: &[f64],
) -> Result<FeasibilityReport> {
    let n = config.n();
    if z0.len() != n {
        return Err(Error::DimensionMismatch {
            what: "initial errors",
            expected: n,
            got: z0.len(),
        });
    }
    let chain = recursion(config, bounds)?;
    let stages: Vec<StageMargin> = config
        .stages()
        .iter()
        .zip(chain)
        .enumerate()
        .map(|(j, (stage, (vp, r)))| {
            let f = stage.funnel();
            let rhs = (bounds.g_hi[j] + bounds.g_lo[j]) * stage.v_bar() + f.mu() * (f.q() - f.p());
            StageMargin {
                stage: j + 1,
                varphi: vp,
                rhs,
                margin: rhs - vp,
                rate_bound: r,
                z0: z0[j],
                trivial_margin: f.p() - z0[j].abs(),
            }
        })
        .collect();
    let feasible = stages.iter().all(StageMargin::satisfied);
    Ok(FeasibilityReport { stages, feasible })
}

/// Stage design without its funnel initial bound, which the
/// `p_i = |z_i(0)| + Delta_i` parameterisation fills in.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct StageTemplate {
    pub v_bar: f64,
    pub c: f64,
    pub q: f64,
    pub mu: f64,
}

impl StageTemplate {
    pub fn from_stage(stage: &StageControllerParams) -> Self {
        let f = stage.funnel();
        Self {
            v_bar: stage.v_bar(),
            c: stage.c(),
            q: f.q(),
            mu: f.mu(),
        }
    }

    fn with_p(&self, p: f64) -> Result<StageControllerParams> {
        StageControllerParams::new(self.v_bar, self.c, FunnelParams::new(p, self.q, self.mu)?)
    }
}

/// Builds a cascade whose initial funnel bounds are `p_i = |z_i(0)| + Delta_i`,
/// walking the stages in order since `z_i(0)` depends on `u_{i-1}(0)`.
pub fn delta_offset_config(
    templates: &[StageTemplate],
    deltas: &[f64],
    x0: &[f64],
    y_d0: f64,
) -> Result<CascadeConfig> {
    let n = templates.len();
    if deltas.len() != n {
        return Err(Error::DimensionMismatch {
            what: "deltas",
            expected: n,
            got: deltas.len(),
        });
    }
    if x0.len() != n {
        return Err(Error::DimensionMismatch {
            what: "initial state",
            expected: n,
            got: x0.len(),
        });
    }
    if let Some(d) = deltas.iter().find(|d| !(d.is_finite() && **d > 0.0)) {
        return Err(invalid(format!(
            "funnel offsets Delta must be positive, got {d}"
        )));
    }
    let mut stages = Vec::with_capacity(n);
    let mut upstream = y_d0;
    for ((template, delta), x) in templates.iter().zip(deltas).zip(x0) {
        let z = x - upstream;
        let stage = template.with_p(z.abs() + delta)?;
        upstream = stage_control(z / stage.funnel().p(), &stage)?;
        stages.push(stage);
    }
    CascadeConfig::new(stages)
}

/// Rectangular grid of initial states `(x', y')`, both ends inclusive.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Grid {
    pub x_min: f64,
    pub x_max: f64,
    pub nx: usize,
    pub y_min: f64,
    pub y_max: f64,
    pub ny: usize,
}

impl Grid {
    pub fn new(x_range: (f64, f64), nx: usize, y_range: (f64, f64), ny: usize) -> Result<Self> {
        let grid = Self {
            x_min: x_range.0,
            x_max: x_range.1,
            nx,
            y_min: y_range.0,
            y_max: y_range.1,
            ny,
        };
        grid.validate()?;
        Ok(grid)
    }

    pub fn validate(&self) -> Result<()> {
        if self.nx < 2 || self.ny < 2 {
            return Err(invalid(format!(
                "grid needs at least 2x2 points, got {}x{}",
                self.nx, self.ny
            )));
        }
        let finite = [self.x_min, self.x_max, self.y_min, self.y_max]
            .iter()
            .all(|v| v.is_finite());
        if !finite || self.x_min >= self.x_max || self.y_min >= self.y_max {
            return Err(invalid("grid ranges must be finite with min < max"));
        }
        Ok(())
    }

    pub fn len(&self) -> usize {
        self.nx * self.ny
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn x(&self, ix: usize) -> f64 {
        self.x_min + (self.x_max - self.x_min) * ix as f64 / (self.nx - 1) as f64
    }

    pub fn y(&self, iy: usize) -> f64 {
        self.y_min + (self.y_max - self.y_min) * iy as f64 / (self.ny - 1) as f64
    }

    /// Cell index nearest to `(x, y)`, or `None` outside the grid.
    pub fn nearest(&self, x: f64, y: f64) -> Option<usize> {
        if !(self.x_min..=self.x_max).contains(&x) || !(self.y_min..=self.y_max).contains(&y) {
            return None;
        }
        let ix =
            ((x - self.x_min) / (self.x_max - self.x_min) * (self.nx - 1) as f64).round() as usize;
        let iy =
            ((y - self.y_min) / (self.y_max - self.y_min) * (self.ny - 1) as f64).round() as usize;
        Some(iy * self.nx + ix)
    }
}

/// Everything of a two-stage design except the initial state.
#[derive(Debug, Clone, PartialEq)]
pub struct RegionTemplate {
    pub stages: Vec<StageTemplate>,
    pub deltas: Vec<f64>,
    pub bounds: BoundsSpec,
    /// Reference value at `t = 0`.
    pub y_d0: f64,
}

impl RegionTemplate {
    pub fn validate(&self) -> Result<()> {
        if self.stages.len() != 2 {
            return Err(invalid(format!(
                "region sweep needs a two-stage design, got {} stages",
                self.stages.len()
            )));
        }
        if self.deltas.len() != 2 {
            return Err(invalid("region template needs one Delta per stage"));
        }
        if let Some(d) = self.deltas.iter().find(|d| !(d.is_finite() && **d > 0.0)) {
            return Err(invalid(format!(
                "funnel offsets Delta must be positive, got {d}"
            )));
        }
        for s in &self.stages {
            if !(s.v_bar > 0.0 && s.c > 0.0 && s.q > 0.0 && s.mu > 0.0) {
                return Err(invalid("stage template parameters must be positive"));
            }
        }
        self.bounds.validate(2)
    }

    /// Evaluates both stage conditions for the initial state `(x, y)`.
    ///
    /// Works directly from the closed-form two-stage expressions rather than
    /// the general recursion. A cell whose derived `p_i` falls below `q_i` is
    /// not a valid design and is reported infeasible.
    pub fn evaluate(&self, x: f64, y: f64) -> RegionCell {
        let [s1, s2] = [self.stages[0], self.stages[1]];
        let b = &self.bounds;

        let z1 = x - self.y_d0;
        let p1 = z1.abs() + self.deltas[0];
        let u1 = -(2.0 * s1.v_bar / std::f64::consts::PI)
            * ((std::f64::consts::PI / (2.0 * s1.c))
                * (std::f64::consts::FRAC_PI_2 * z1 / p1).tan())
            .atan();
        let p2 = (y - u1).abs() + self.deltas[1];

        let varphi1 =
            b.k[0] * (p1 + b.v0_bar) + b.d_bar[0] + b.g_hi[0] * p2 + b.g_hi[0] * s1.v_bar + b.r0;
        let margin_c1 = (b.g_hi[0] + b.g_lo[0]) * s1.v_bar + s1.mu * (s1.q - p1) - varphi1;

        let phi_lo1 = if s1.c < std::f64::consts::FRAC_PI_2 {
            std::f64::consts::PI * s1.v_bar / (2.0 * s1.c)
        } else {
            2.0 * s1.v_bar * s1.c / std::f64::consts::PI
        };
        let r1 = (varphi1 / s1.q + s1.mu * (p1 - s1.q) / p1) * phi_lo1;
        let varphi2 =
            b.k[1] * (p1 + b.v0_bar).hypot(p2 + s1.v_bar) + b.d_bar[1] + b.g_hi[1] * s2.v_bar + r1;
        let margin_c2 = (b.g_hi[1] + b.g_lo[1]) * s2.v_bar + s2.mu * (s2.q - p2) - varphi2;

        let valid = p1 >= s1.q && p2 >= s2.q;
        RegionCell {
            x,
            y,
            feasible: valid && margin_c1 > 0.0 && margin_c2 > 0.0,
            margin_c1,
            margin_c2,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RegionCell {
    pub x: f64,
    pub y: f64,
    pub feasible: bool,
    pub margin_c1: f64,
    pub margin_c2: f64,
}

/// Region mask over a grid; `cells[iy * nx + ix]`.
#[derive(Debug, Clone, PartialEq)]
pub struct RegionMap {
    pub grid: Grid,
    pub cells: Vec<RegionCell>,
}

impl RegionMap {
    pub fn feasible_count(&self) -> usize {
        self.cells.iter().filter(|c| c.feasible).count()
    }

    pub fn feasible_fraction(&self) -> f64 {
        self.feasible_count() as f64 / self.cells.len() as f64
    }

    pub fn cell(&self, ix: usize, iy: usize) -> &RegionCell {
        &self.cells[iy * self.grid.nx + ix]
    }

    /// Grid cell nearest to `(x, y)`.
    pub fn nearest_cell(&self, x: f64, y: f64) -> Option<&RegionCell> {
        self.grid.nearest(x, y).map(|i| &self.cells[i])
    }
}

/// Sweeps the grid of initial states, evaluating both stage conditions for
/// every cell. Cells are evaluated in parallel; the output order is by cell
/// index regardless.
pub fn feasible_region(grid: &Grid, template: &RegionTemplate) -> Result<RegionMap> {
    grid.validate()?;
    template.validate()?;
    let cells = (0..grid.len())
        .into_par_iter()
        .map(|idx| template.evaluate(grid.x(idx % grid.nx), grid.y(idx / grid.nx)))
        .collect();
    Ok(RegionMap { grid: *grid, cells })
}
