//! A single FMM wave: a cosine whose phase is warped by a Möbius map.
//!
//! `W(t) = A cos(β + 2 atan(ω tan((t - α) / 2)))`
//!
//! The tangent form is singular at `t - α = π`. Everything here goes through
//! the two-argument arctangent `2 atan2(ω sin(u), cos(u))`, `u = (t - α)/2`,
//! which agrees with it modulo 2π and is total.

use std::f64::consts::PI;

use serde::{Deserialize, Serialize};

use crate::angle;
use crate::error::{Error, Result};

/// Amplitude, location, shape and sharpness of one wave.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct WaveParams {
    #[serde(rename = "A")]
    pub amplitude: f64,
    pub alpha: f64,
    pub beta: f64,
    pub omega: f64,
}

impl WaveParams {
    /// Validates and reduces `alpha`, `beta` to `[0, 2π)`.
    pub fn new(amplitude: f64, alpha: f64, beta: f64, omega: f64) -> Result<Self> {
        let p = Self {
            amplitude,
            alpha: angle::wrap(alpha),
            beta: angle::wrap(beta),
            omega,
        };
        p.validate()?;
        Ok(p)
    }

    pub fn validate(&self) -> Result<()> {
        let Self {
            amplitude,
            alpha,
            beta,
            omega,
        } = *self;
        if !(amplitude.is_finite() && amplitude > 0.0) {
            return Err(Error::InvalidWave(format!("A must be positive, got {amplitude}")));
        }
        if !(omega > 0.0 && omega <= 1.0) {
            return Err(Error::InvalidWave(format!("omega must lie in (0, 1], got {omega}")));
        }
        for (name, v) in [("alpha", alpha), ("beta", beta)] {
            if !(v.is_finite() && (0.0..std::f64::consts::TAU).contains(&v)) {
                return Err(Error::InvalidWave(format!("{name} must lie in [0, 2π), got {v}")));
            }
        }
        Ok(())
    }

    /// The Möbius part of the phase, `2 atan2(ω sin u, cos u)`.
    ///
    /// Continuous and increasing on `[α, α + 2π)`, where it sweeps `[0, 2π)`.
    #[inline]
    pub fn warped_phase(&self, t: f64) -> f64 {
        warp(t, self.alpha, self.omega)
    }

    /// Full phase `β + warped_phase(t)`.
    #[inline]
    pub fn phase(&self, t: f64) -> f64 {
        self.beta + self.warped_phase(t)
    }

    #[inline]
    pub fn eval(&self, t: f64) -> f64 {
        self.amplitude * self.phase(t).cos()
    }

    /// Time of the global maximum `+A`, in `[0, 2π)`.
    pub fn crest_time(&self) -> f64 {
        extremum_time(self.alpha, self.beta, self.omega)
    }

    /// Time of the global minimum `-A`, in `[0, 2π)`.
    pub fn trough_time(&self) -> f64 {
        extremum_time(self.alpha, self.beta - PI, self.omega)
    }

    /// Value the wave rests at away from its sharp excursion (`A cos β`).
    pub fn resting_level(&self) -> f64 {
        self.amplitude * self.beta.cos()
    }
}

#[inline]
pub(crate) fn warp(t: f64, alpha: f64, omega: f64) -> f64 {
    let (s, c) = (0.5 * (t - alpha)).sin_cos();
    2.0 * (omega * s).atan2(c)
}

/// Solves `β + warp(t) ≡ 0 (mod 2π)` for `t`.
///
/// With `u = (t-α)/2` and `tan u = tan(-β/2) / ω`, choosing the branch
/// `u = atan2(-sin(β/2), ω cos(β/2))` makes `atan2(ω sin u, cos u) = -β/2`.
fn extremum_time(alpha: f64, beta: f64, omega: f64) -> f64 {
    let (s, c) = (0.5 * beta).sin_cos();
    angle::wrap(alpha + 2.0 * (-s).atan2(omega * c))
}

#[cfg(test)]
mod tests {
    use std::f64::consts::TAU;

    use proptest::prelude::*;

    use super::*;

    fn wave(a: f64, alpha: f64, beta: f64, omega: f64) -> WaveParams {
        WaveParams::new(a, alpha, beta, omega).unwrap()
    }

    #[test]
    fn unit_sharpness_is_a_reversed_cosine() {
        let p = wave(1.0, 0.0, PI, 1.0);
        assert!((p.eval(0.0) + 1.0).abs() < 1e-15);
        for i in 0..50 {
            let t = i as f64 * 0.13;
            assert!((p.eval(t) + t.cos()).abs() < 1e-12);
        }
    }

    #[test]
    fn matches_high_precision_value() {
        // mpmath, 40 digits, direct tangent form
        let p = wave(2.0, 1.0, 4.0, 0.1);
        assert!((p.eval(1.3) - (-1.260_948_804_933_367_963_553_485)).abs() < 1e-13);
    }

    #[test]
    fn tangent_singularity_is_the_limit() {
        let p = wave(1.5, 0.7, 2.2, 0.3);
        let expected = 1.5 * (2.2 + PI).cos();
        assert!((p.eval(0.7 + PI) - expected).abs() < 1e-12);
        assert!((p.eval(0.7 + PI - 1e-9) - expected).abs() < 1e-6);
    }

    #[test]
    fn crest_special_cases() {
        assert!((wave(1.0, 1.2, 0.0, 0.3).crest_time() - 1.2).abs() < 1e-15);
        let p = wave(1.0, 1.0, 2.5, 1.0);
        assert!((p.crest_time() - angle::wrap(1.0 - 2.5)).abs() < 1e-12);
    }

    #[test]
    fn crest_matches_million_point_grid() {
        // grid argmax computed independently: 5.007924884493189
        let p = wave(1.0, 2.0, 5.0, 0.05);
        let n = 1_000_000;
        let step = TAU / n as f64;
        let (mut best_t, mut best_v) = (0.0, f64::NEG_INFINITY);
        for i in 0..n {
            let t = i as f64 * step;
            let v = p.eval(t);
            if v > best_v {
                best_v = v;
                best_t = t;
            }
        }
        assert!(angle::dist(best_t, p.crest_time()) <= step);
        assert!((p.crest_time() - 5.007_927_207_564_976).abs() < 1e-12);
    }

    #[test]
    fn rejects_out_of_domain() {
        assert!(WaveParams::new(0.0, 0.0, 0.0, 0.5).is_err());
        assert!(WaveParams::new(1.0, 0.0, 0.0, 0.0).is_err());
        assert!(WaveParams::new(1.0, 0.0, 0.0, 1.01).is_err());
        assert!(WaveParams::new(f64::NAN, 0.0, 0.0, 0.5).is_err());
        let p = WaveParams::new(1.0, -0.5, 7.0, 1.0).unwrap();
        assert!((p.alpha - (TAU - 0.5)).abs() < 1e-15);
        assert!((p.beta - (7.0 - TAU)).abs() < 1e-15);
    }

    fn any_wave() -> impl Strategy<Value = WaveParams> {
        (0.01f64..10.0, 0.0f64..TAU, 0.0f64..TAU, 0.002f64..=1.0)
            .prop_map(|(a, al, b, w)| wave(a, al, b, w))
    }

    proptest! {
        #[test]
        fn periodic(p in any_wave(), t in -20.0f64..20.0) {
            prop_assert!((p.eval(t) - p.eval(t + TAU)).abs() < 1e-12 * p.amplitude.max(1.0));
        }

        #[test]
        fn bounded_and_attained(p in any_wave(), t in -10.0f64..10.0) {
            prop_assert!(p.eval(t).abs() <= p.amplitude * (1.0 + 1e-15));
            prop_assert!((p.eval(p.crest_time()) - p.amplitude).abs() < 1e-9 * p.amplitude.max(1.0));
            prop_assert!((p.eval(p.trough_time()) + p.amplitude).abs() < 1e-9 * p.amplitude.max(1.0));
        }

        #[test]
        fn phase_sweeps_one_turn(p in any_wave()) {
            let n = 2000;
            let mut prev = p.warped_phase(p.alpha);
            prop_assert!(prev.abs() < 1e-12);
            for i in 1..n {
                let cur = p.warped_phase(p.alpha + TAU * i as f64 / n as f64);
                prop_assert!(cur >= prev);
                prev = cur;
            }
            let end = p.warped_phase(p.alpha + TAU - 1e-12);
            prop_assert!((end - TAU).abs() < 1e-6);
        }

        #[test]
        fn extrema_match_dense_grid(p in any_wave()) {
            let n = 20_000;
            let step = TAU / n as f64;
            let (mut imax, mut imin) = (0, 0);
            let (mut vmax, mut vmin) = (f64::NEG_INFINITY, f64::INFINITY);
            for i in 0..n {
                let v = p.eval(i as f64 * step);
                if v > vmax { vmax = v; imax = i; }
                if v < vmin { vmin = v; imin = i; }
            }
            // the phase is monotone over one turn, so each extremum is unique and
            // the grid optimum is one of its two neighbouring samples
            let near_max = angle::dist(imax as f64 * step, p.crest_time()) <= step;
            let near_min = angle::dist(imin as f64 * step, p.trough_time()) <= step;
            prop_assert!(near_max && near_min);
        }
    }
}
