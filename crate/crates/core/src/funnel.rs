//! Exponential performance funnels.
//!
//! A funnel `psi(t) = (p - q) e^{-mu t} + q` starts at `p`, decays at rate
//! `mu` and settles at `q`. The tracking error of each backstepping stage
//! must stay strictly inside `(-psi(t), psi(t))`.

use crate::error::{invalid, Result};

/// Parameters of one performance funnel.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct FunnelParams {
    p: f64,
    q: f64,
    mu: f64,
}

impl FunnelParams {
    /// Builds a funnel with initial bound `p`, steady-state bound `q` and
    /// decay rate `mu` (1/s). Requires `p >= q > 0` and `mu > 0`; `p == q`
    /// gives a constant funnel.
    pub fn new(p: f64, q: f64, mu: f64) -> Result<Self> {
        if !(p.is_finite() && q.is_finite() && mu.is_finite()) {
            return Err(invalid(format!(
                "funnel parameters must be finite (p = {p}, q = {q}, mu = {mu})"
            )));
        }
        if q <= 0.0 {
            return Err(invalid(format!(
                "funnel steady-state bound q must be positive, got {q}"
            )));
        }
        if p < q {
            return Err(invalid(format!(
                "funnel requires p >= q, got p = {p}, q = {q}"
            )));
        }
        if mu <= 0.0 {
            return Err(invalid(format!(
                "funnel decay rate mu must be positive, got {mu}"
            )));
        }
        Ok(Self { p, q, mu })
    }

    pub fn p(&self) -> f64 {
        self.p
    }

    pub fn q(&self) -> f64 {
        self.q
    }

    pub fn mu(&self) -> f64 {
        self.mu
    }

    /// Funnel value `psi(t)`, always within `[q, p]`.
    pub fn value(&self, t: f64) -> Result<f64> {
        check_time(t)?;
        let v = (self.p - self.q) * (-self.mu * t).exp() + self.q;
        // exp() rounding can leave the sum a hair outside [q, p]
        Ok(v.clamp(self.q, self.p))
    }

    /// Funnel rate `d psi / dt = -mu (p - q) e^{-mu t}`, within `[mu (q - p), 0]`.
    pub fn rate(&self, t: f64) -> Result<f64> {
        check_time(t)?;
        let lo = self.mu * (self.q - self.p);
        Ok((lo * (-self.mu * t).exp()).clamp(lo, 0.0))
    }

    /// Bounds `(mu (q - p), 0)` on the funnel rate over all `t >= 0`.
    pub fn rate_bounds(&self) -> (f64, f64) {
        (self.mu * (self.q - self.p), 0.0)
    }
}

fn check_time(t: f64) -> Result<()> {
    if t.is_nan() || t < 0.0 {
        Err(invalid(format!("funnel evaluated at invalid time t = {t}")))
    } else {
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn ex1() -> FunnelParams {
        FunnelParams::new(1.0, 0.05, 0.9).unwrap()
    }

    #[test]
    fn value_at_zero_is_p() {
        assert_eq!(ex1().value(0.0).unwrap(), 1.0);
    }

    #[test]
    fn value_settles_to_q() {
        for t in [20.0, 30.0, 100.0, 1e6] {
            assert!((ex1().value(t).unwrap() - 0.05).abs() < 1e-6);
        }
    }

    #[test]
    fn value_at_half_life() {
        let t = 2f64.ln() / 0.9;
        assert!((ex1().value(t).unwrap() - 0.525).abs() < 1e-12);
    }

    #[test]
    fn rate_at_zero() {
        assert!((ex1().rate(0.0).unwrap() + 0.855).abs() < 1e-12);
        assert!(ex1().rate(200.0).unwrap().abs() < 1e-12);
    }

    #[test]
    fn constant_funnel_has_zero_rate() {
        let f = FunnelParams::new(0.3, 0.3, 4.0).unwrap();
        for t in [0.0, 0.1, 5.0] {
            assert_eq!(f.rate(t).unwrap(), 0.0);
            assert_eq!(f.value(t).unwrap(), 0.3);
        }
        assert_eq!(f.rate_bounds(), (0.0, 0.0));
    }

    #[test]
    fn rate_bounds_examples() {
        let (lo, hi) = ex1().rate_bounds();
        assert!((lo + 0.855).abs() < 1e-12);
        assert_eq!(hi, 0.0);
        let (lo, hi) = FunnelParams::new(1.4, 0.05, 1.0).unwrap().rate_bounds();
        assert!((lo + 1.35).abs() < 1e-12);
        assert_eq!(hi, 0.0);
    }

    #[test]
    fn negative_time_rejected() {
        assert!(ex1().value(-1e-9).is_err());
        assert!(ex1().rate(-1.0).is_err());
        assert!(ex1().value(f64::NAN).is_err());
    }

    #[test]
    fn invalid_params_rejected() {
        assert!(FunnelParams::new(1.0, 0.0, 1.0).is_err());
        assert!(FunnelParams::new(0.5, 1.0, 1.0).is_err());
        assert!(FunnelParams::new(1.0, 0.5, 0.0).is_err());
        assert!(FunnelParams::new(f64::INFINITY, 0.5, 1.0).is_err());
    }
}
