//! Parameter estimation: single-component fits, backfitting, wave
//! identification and the alternating loop that ties them together.

mod backfit;
mod config;
mod istep;
mod joint;
mod mi;
mod single;
mod stats;

use serde::{Deserialize, Serialize};

use crate::wave::WaveParams;

pub use backfit::{backfit, Backfit};
pub use config::{IStepConfig, LabelRule, Window};
pub use istep::{istep_assign, reassign_all, Assignment};
pub use joint::refine_joint;
pub use mi::{fit_beat, ComponentPv, FitReport};
pub use single::{default_omega_grid, fit_single_fmm, Profile, SingleFit, SingleFitter};
pub use stats::{pv_sequence, r_squared, r_squared_with_free_intercept, rss, tss};

/// An unlabelled fitted oscillator.
///
/// `delta`, `gamma` are the linear coefficients of `cos φ`, `sin φ`; the wave
/// has `A = √(δ² + γ²)` and `β = atan2(-γ, δ)`. A component fitted to a
/// constant series is `absent` and has zero amplitude.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Component {
    pub params: WaveParams,
    pub delta: f64,
    pub gamma: f64,
    pub pv: f64,
    pub absent: bool,
}

impl Component {
    pub fn zero() -> Self {
        Self {
            params: WaveParams {
                amplitude: 0.0,
                alpha: 0.0,
                beta: 0.0,
                omega: 1.0,
            },
            delta: 0.0,
            gamma: 0.0,
            pv: 0.0,
            absent: true,
        }
    }

    /// Wraps known wave parameters, e.g. to seed a backfit.
    pub fn from_wave(params: WaveParams) -> Self {
        Self {
            params,
            delta: params.amplitude * params.beta.cos(),
            gamma: -params.amplitude * params.beta.sin(),
            pv: 0.0,
            absent: false,
        }
    }

    /// Component with the given nonlinear parameters and linear coefficients;
    /// absent when both coefficients vanish.
    pub fn from_linear(alpha: f64, omega: f64, delta: f64, gamma: f64) -> Self {
        let amplitude = delta.hypot(gamma);
        if !(amplitude > 0.0 && amplitude.is_finite()) {
            return Self::zero();
        }
        Self {
            params: WaveParams {
                amplitude,
                alpha: crate::angle::wrap(alpha),
                beta: crate::angle::wrap((-gamma).atan2(delta)),
                omega,
            },
            delta,
            gamma,
            pv: 0.0,
            absent: false,
        }
    }

    pub fn eval(&self, t: f64) -> f64 {
        if self.absent {
            0.0
        } else {
            self.params.eval(t)
        }
    }

    pub fn sample(&self, times: &[f64]) -> Vec<f64> {
        times.iter().map(|&t| self.eval(t)).collect()
    }
}
