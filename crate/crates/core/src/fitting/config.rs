//! Thresholds of the identification step and knobs of the fitter.
//!
//! A config file is plain text, one `key = value` per line, `#` starts a
//! comment. Keys are the field names of [`IStepConfig`]. Windows take two
//! comma-separated numbers (`r_beta_window = 1.5708, 5.236`); flags take
//! `true`/`false`. Unlisted keys keep their defaults.

use std::f64::consts::PI;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::marks::MarkKind;
use crate::model::WaveLabel;

/// Closed interval `[lo, hi]`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Window {
    pub lo: f64,
    pub hi: f64,
}

impl Window {
    pub const fn new(lo: f64, hi: f64) -> Self {
        Self { lo, hi }
    }

    pub fn contains(&self, x: f64) -> bool {
        self.lo <= x && x <= self.hi
    }

    fn is_valid(&self) -> bool {
        self.lo.is_finite() && self.hi.is_finite() && self.lo < self.hi
    }
}

/// What a label's component must look like to keep that label.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LabelRule {
    pub omega: Window,
    /// Signed offset of the fiducial mark from the R crest, radians.
    pub offset: Window,
    /// Required polarity, if any.
    pub kind: Option<MarkKind>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct IStepConfig {
    pub r_beta_window: Window,
    pub r_omega_max: f64,
    pub r_qrs_proximity: f64,
    /// Take the runner-up by crest height when the highest crest has
    /// negligible PV.
    pub r_second_max_fallback: bool,
    /// "Negligible": PV below this fraction of the runner-up's PV.
    pub r_second_max_pv_ratio: f64,
    pub noise_pv_max: f64,
    pub noise_omega_min: f64,
    pub noise_omega_max: f64,
    pub p_omega_window: Window,
    pub p_offset_window: Window,
    pub p_requires_crest: bool,
    pub q_omega_window: Window,
    pub q_offset_window: Window,
    pub s_omega_window: Window,
    pub s_offset_window: Window,
    pub t_omega_window: Window,
    pub t_offset_window: Window,
    pub max_iter: usize,
    pub pv_gain_stop: f64,
    pub k_initial: usize,
    pub k_max: usize,
    pub backfit_passes_initial: usize,
    pub backfit_passes_escalation: usize,
    pub alpha_grid_size: usize,
    pub omega_grid_size: usize,
    pub omega_grid_min: f64,
    pub simplex_max_evals: usize,
    /// Jointly polish the assigned waves after identification.
    pub joint_refine: bool,
}

impl Default for IStepConfig {
    fn default() -> Self {
        Self {
            r_beta_window: Window::new(PI / 2.0, 5.0 * PI / 3.0),
            r_omega_max: 0.12,
            r_qrs_proximity: PI / 5.0,
            r_second_max_fallback: true,
            r_second_max_pv_ratio: 0.1,
            noise_pv_max: 0.001,
            noise_omega_min: 0.008,
            noise_omega_max: 0.95,
            p_omega_window: Window::new(0.02, 0.6),
            p_offset_window: Window::new(-2.6, -0.25),
            p_requires_crest: true,
            q_omega_window: Window::new(0.008, 0.15),
            q_offset_window: Window::new(-0.6, -0.02),
            s_omega_window: Window::new(0.008, 0.2),
            s_offset_window: Window::new(0.02, 0.8),
            t_omega_window: Window::new(0.05, 0.9),
            t_offset_window: Window::new(0.45, 3.8),
            max_iter: 10,
            pv_gain_stop: 0.0001,
            k_initial: 5,
            k_max: 10,
            backfit_passes_initial: 5,
            backfit_passes_escalation: 2,
            alpha_grid_size: 100,
            omega_grid_size: 40,
            omega_grid_min: 0.005,
            simplex_max_evals: 200,
            joint_refine: true,
        }
    }
}

impl IStepConfig {
    pub fn validate(&self) -> Result<()> {
        let bad = |m: &str| Err(Error::InvalidArgument(format!("config: {m}")));
        let windows = [
            ("r_beta_window", self.r_beta_window),
            ("p_omega_window", self.p_omega_window),
            ("p_offset_window", self.p_offset_window),
            ("q_omega_window", self.q_omega_window),
            ("q_offset_window", self.q_offset_window),
            ("s_omega_window", self.s_omega_window),
            ("s_offset_window", self.s_offset_window),
            ("t_omega_window", self.t_omega_window),
            ("t_offset_window", self.t_offset_window),
        ];
        for (name, w) in windows {
            if !w.is_valid() {
                return bad(&format!("{name} must be a nonempty interval"));
            }
        }
        if self.noise_omega_min >= self.noise_omega_max {
            return bad("noise_omega_min must be below noise_omega_max");
        }
        if self.k_initial == 0 || self.k_initial > self.k_max {
            return bad("need 1 <= k_initial <= k_max");
        }
        if self.max_iter == 0 {
            return bad("max_iter must be positive");
        }
        if self.alpha_grid_size < 4 || self.omega_grid_size < 2 {
            return bad("grid too small");
        }
        if !(self.omega_grid_min > 0.0 && self.omega_grid_min < 1.0) {
            return bad("omega_grid_min must lie in (0, 1)");
        }
        if !(self.r_omega_max > 0.0
            && self.r_qrs_proximity > 0.0
            && self.pv_gain_stop >= 0.0
            && self.r_second_max_pv_ratio >= 0.0)
        {
            return bad("thresholds must be positive");
        }
        Ok(())
    }

    pub fn rule(&self, label: WaveLabel) -> LabelRule {
        match label {
            WaveLabel::P => LabelRule {
                omega: self.p_omega_window,
                offset: self.p_offset_window,
                kind: self.p_requires_crest.then_some(MarkKind::Crest),
            },
            WaveLabel::Q => LabelRule {
                omega: self.q_omega_window,
                offset: self.q_offset_window,
                kind: Some(MarkKind::Trough),
            },
            WaveLabel::S => LabelRule {
                omega: self.s_omega_window,
                offset: self.s_offset_window,
                kind: Some(MarkKind::Trough),
            },
            WaveLabel::T => LabelRule {
                omega: self.t_omega_window,
                offset: self.t_offset_window,
                kind: None,
            },
            WaveLabel::R => LabelRule {
                omega: Window::new(0.0, self.r_omega_max),
                offset: Window::new(-self.r_qrs_proximity, self.r_qrs_proximity),
                kind: Some(MarkKind::Crest),
            },
        }
    }

    /// Log-spaced sharpness grid from `omega_grid_min` to 1.
    pub fn omega_grid(&self) -> Vec<f64> {
        log_grid(self.omega_grid_min, 1.0, self.omega_grid_size)
    }

    pub fn from_file(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let text = std::fs::read_to_string(path)?;
        Self::parse(&text, &path.display().to_string())
    }

    /// Parses `key = value` lines on top of the defaults.
    pub fn parse(text: &str, origin: &str) -> Result<Self> {
        let mut cfg = Self::default();
        for (i, raw) in text.lines().enumerate() {
            let line = raw.split('#').next().unwrap_or("").trim();
            if line.is_empty() {
                continue;
            }
            let err = |message: String| Error::Config {
                path: origin.to_string(),
                line: i + 1,
                message,
            };
            let (key, value) = line
                .split_once('=')
                .ok_or_else(|| err(format!("expected `key = value`, got {line:?}")))?;
            cfg.set(key.trim(), value.trim()).map_err(err)?;
        }
        cfg.validate()?;
        Ok(cfg)
    }

    fn set(&mut self, key: &str, value: &str) -> std::result::Result<(), String> {
        fn num(v: &str) -> std::result::Result<f64, String> {
            v.parse::<f64>().map_err(|_| format!("not a number: {v:?}"))
        }
        fn int(v: &str) -> std::result::Result<usize, String> {
            v.parse::<usize>().map_err(|_| format!("not a nonnegative integer: {v:?}"))
        }
        fn flag(v: &str) -> std::result::Result<bool, String> {
            v.parse::<bool>().map_err(|_| format!("expected true or false, got {v:?}"))
        }
        fn window(v: &str) -> std::result::Result<Window, String> {
            let v = v.trim_start_matches(['(', '[']).trim_end_matches([')', ']']);
            let (lo, hi) = v
                .split_once(',')
                .ok_or_else(|| format!("expected `lo, hi`, got {v:?}"))?;
            Ok(Window::new(num(lo.trim())?, num(hi.trim())?))
        }
        match key {
            "r_beta_window" => self.r_beta_window = window(value)?,
            "r_omega_max" => self.r_omega_max = num(value)?,
            "r_qrs_proximity" => self.r_qrs_proximity = num(value)?,
            "r_second_max_fallback" => self.r_second_max_fallback = flag(value)?,
            "r_second_max_pv_ratio" => self.r_second_max_pv_ratio = num(value)?,
            "noise_pv_max" => self.noise_pv_max = num(value)?,
            "noise_omega_min" => self.noise_omega_min = num(value)?,
            "noise_omega_max" => self.noise_omega_max = num(value)?,
            "p_omega_window" => self.p_omega_window = window(value)?,
            "p_offset_window" => self.p_offset_window = window(value)?,
            "p_requires_crest" => self.p_requires_crest = flag(value)?,
            "q_omega_window" => self.q_omega_window = window(value)?,
            "q_offset_window" => self.q_offset_window = window(value)?,
            "s_omega_window" => self.s_omega_window = window(value)?,
            "s_offset_window" => self.s_offset_window = window(value)?,
            "t_omega_window" => self.t_omega_window = window(value)?,
            "t_offset_window" => self.t_offset_window = window(value)?,
            "max_iter" => self.max_iter = int(value)?,
            "pv_gain_stop" => self.pv_gain_stop = num(value)?,
            "k_initial" => self.k_initial = int(value)?,
            "k_max" => self.k_max = int(value)?,
            "backfit_passes_initial" => self.backfit_passes_initial = int(value)?,
            "backfit_passes_escalation" => self.backfit_passes_escalation = int(value)?,
            "alpha_grid_size" => self.alpha_grid_size = int(value)?,
            "omega_grid_size" => self.omega_grid_size = int(value)?,
            "omega_grid_min" => self.omega_grid_min = num(value)?,
            "simplex_max_evals" => self.simplex_max_evals = int(value)?,
            "joint_refine" => self.joint_refine = flag(value)?,
            other => return Err(format!("unknown key {other:?}")),
        }
        Ok(())
    }
}

pub(crate) fn log_grid(lo: f64, hi: f64, n: usize) -> Vec<f64> {
    let (a, b) = (lo.ln(), hi.ln());
    (0..n)
        .map(|i| {
            if i + 1 == n {
                hi
            } else {
                (a + (b - a) * i as f64 / (n - 1) as f64).exp()
            }
        })
        .collect()
}
