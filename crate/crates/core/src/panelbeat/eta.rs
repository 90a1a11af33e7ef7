use serde::Serialize;

use super::PanelBeatError;

/// Default end of the pure power range.
pub const DEFAULT_T0: f64 = 0.25;
const CHECK_SAMPLES: usize = 100;

/// Radial profile `η`: `t^r` on `(0, t0]`, a monotone cubic Hermite blend on
/// `[t0, 1/2]` matching value and slope at both ends, the identity from 1/2.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct EtaProfile {
    pub r: f64,
    pub t0: f64,
}

impl EtaProfile {
    /// Requires `r > 1` and `0 < t0 < 1/2`; the blend is checked to be
    /// increasing and to stay below the identity.
    pub fn new(r: f64, t0: f64) -> Result<Self, PanelBeatError> {
        if !(r > 1.0 && r.is_finite()) {
            return Err(PanelBeatError::InvalidProfile(format!("exponent {r} must exceed 1")));
        }
        if !(t0 > 0.0 && t0 < 0.5) {
            return Err(PanelBeatError::InvalidProfile(format!("cutoff {t0} must lie in (0, 1/2)")));
        }
        let eta = Self { r, t0 };
        let (p0, m0, p1, m1) = eta.ends();
        let h = 0.5 - t0;
        let secant = (p1 - p0) / h;
        let (a, b) = (m0 / secant, m1 / secant);
        if a * a + b * b > 9.0 {
            return Err(PanelBeatError::InvalidProfile(format!(
                "blend on [{t0}, 1/2] is not monotone for r = {r}"
            )));
        }
        for i in 0..=CHECK_SAMPLES {
            let t = t0 + h * i as f64 / CHECK_SAMPLES as f64;
            if eta.eval(t) > t + 1e-15 || eta.deriv(t) <= 0.0 {
                return Err(PanelBeatError::InvalidProfile(format!(
                    "blend fails monotonicity or η ≤ t at t = {t}"
                )));
            }
        }
        Ok(eta)
    }

    fn ends(&self) -> (f64, f64, f64, f64) {
        (
            self.t0.powf(self.r),
            self.r * self.t0.powf(self.r - 1.0),
            0.5,
            1.0,
        )
    }

    pub fn eval(&self, t: f64) -> f64 {
        if t <= 0.0 {
            0.0
        } else if t <= self.t0 {
            t.powf(self.r)
        } else if t < 0.5 {
            let (p0, m0, p1, m1) = self.ends();
            let h = 0.5 - self.t0;
            let s = (t - self.t0) / h;
            let (h00, h10, h01, h11) = (
                2.0 * s * s * s - 3.0 * s * s + 1.0,
                s * s * s - 2.0 * s * s + s,
                -2.0 * s * s * s + 3.0 * s * s,
                s * s * s - s * s,
            );
            h00 * p0 + h10 * h * m0 + h01 * p1 + h11 * h * m1
        } else {
            t
        }
    }

    pub fn deriv(&self, t: f64) -> f64 {
        if t <= 0.0 {
            0.0
        } else if t <= self.t0 {
            self.r * t.powf(self.r - 1.0)
        } else if t < 0.5 {
            let (p0, m0, p1, m1) = self.ends();
            let h = 0.5 - self.t0;
            let s = (t - self.t0) / h;
            let (d00, d10, d01, d11) = (
                6.0 * s * s - 6.0 * s,
                3.0 * s * s - 4.0 * s + 1.0,
                -6.0 * s * s + 6.0 * s,
                3.0 * s * s - 2.0 * s,
            );
            (d00 * p0 + d01 * p1) / h + d10 * m0 + d11 * m1
        } else {
            1.0
        }
    }

    /// `η⁻¹(s)` by bisection.
    pub fn inverse(&self, s: f64) -> f64 {
        if s <= 0.0 {
            return 0.0;
        }
        if s >= 0.5 {
            return s;
        }
        if s <= self.t0.powf(self.r) {
            return s.powf(1.0 / self.r);
        }
        let (mut lo, mut hi) = (self.t0, 0.5);
        for _ in 0..200 {
            let mid = 0.5 * (lo + hi);
            if self.eval(mid) < s {
                lo = mid;
            } else {
                hi = mid;
            }
            if hi - lo <= 1e-16 {
                break;
            }
        }
        0.5 * (lo + hi)
    }
}
