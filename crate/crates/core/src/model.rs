//! The five-wave heartbeat model and the beat it is fitted to.

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::angle;
use crate::error::{Error, Result};
use crate::wave::WaveParams;

/// Minimum number of samples in a beat. Five waves plus an intercept have 21
/// free parameters.
pub const MIN_BEAT_SAMPLES: usize = 20;

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub enum WaveLabel {
    P,
    Q,
    R,
    S,
    T,
}

impl WaveLabel {
    /// Labels in activation order.
    pub const ALL: [WaveLabel; 5] = [Self::P, Self::Q, Self::R, Self::S, Self::T];

    pub fn index(self) -> usize {
        self as usize
    }

    pub fn as_str(self) -> &'static str {
        match self {
            Self::P => "P",
            Self::Q => "Q",
            Self::R => "R",
            Self::S => "S",
            Self::T => "T",
        }
    }
}

impl fmt::Display for WaveLabel {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for WaveLabel {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.trim() {
            "P" | "p" => Ok(Self::P),
            "Q" | "q" => Ok(Self::Q),
            "R" | "r" => Ok(Self::R),
            "S" | "s" => Ok(Self::S),
            "T" | "t" => Ok(Self::T),
            other => Err(Error::UnknownLabels(vec![other.to_string()])),
        }
    }
}

/// Per-label optional wave parameters. Absent means the wave is not present.
#[derive(Debug, Clone, Copy, Default, PartialEq, Serialize, Deserialize)]
#[serde(from = "WavesRepr", into = "WavesRepr")]
pub struct Waves([Option<WaveParams>; 5]);

impl Waves {
    pub fn get(&self, label: WaveLabel) -> Option<&WaveParams> {
        self.0[label.index()].as_ref()
    }

    pub fn set(&mut self, label: WaveLabel, wave: Option<WaveParams>) {
        self.0[label.index()] = wave;
    }

    /// Present waves in label order.
    pub fn iter(&self) -> impl Iterator<Item = (WaveLabel, &WaveParams)> {
        WaveLabel::ALL
            .into_iter()
            .filter_map(move |l| self.get(l).map(|w| (l, w)))
    }

    pub fn count(&self) -> usize {
        self.0.iter().flatten().count()
    }
}

#[allow(non_snake_case)]
#[derive(Serialize, Deserialize)]
struct WavesRepr {
    P: Option<WaveParams>,
    Q: Option<WaveParams>,
    R: Option<WaveParams>,
    S: Option<WaveParams>,
    T: Option<WaveParams>,
}

impl From<WavesRepr> for Waves {
    fn from(r: WavesRepr) -> Self {
        Self([r.P, r.Q, r.R, r.S, r.T])
    }
}

impl From<Waves> for WavesRepr {
    fn from(w: Waves) -> Self {
        let [p, q, r, s, t] = w.0;
        Self {
            P: p,
            Q: q,
            R: r,
            S: s,
            T: t,
        }
    }
}

/// Intercept, labelled waves and residual variance of a fitted or generating model.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct FmmEcgParams {
    #[serde(rename = "M")]
    pub intercept: f64,
    pub waves: Waves,
    pub sigma2: f64,
}

impl FmmEcgParams {
    pub fn new(intercept: f64) -> Self {
        Self {
            intercept,
            waves: Waves::default(),
            sigma2: 0.0,
        }
    }

    pub fn with_wave(mut self, label: WaveLabel, wave: WaveParams) -> Self {
        self.waves.set(label, Some(wave));
        self
    }

    /// `M + Σ W_J(t)` over present waves.
    pub fn eval(&self, t: f64) -> f64 {
        self.intercept + self.waves.iter().map(|(_, w)| w.eval(t)).sum::<f64>()
    }

    pub fn validate(&self) -> Result<()> {
        if !self.intercept.is_finite() {
            return Err(Error::InvalidWave("intercept M must be finite".into()));
        }
        if !(self.sigma2.is_finite() && self.sigma2 >= 0.0) {
            return Err(Error::InvalidWave("sigma2 must be nonnegative".into()));
        }
        for (_, w) in self.waves.iter() {
            w.validate()?;
        }
        if !self.is_circularly_ordered() {
            return Err(Error::InvalidWave(
                "wave locations violate the circular order P, Q, R, S, T".into(),
            ));
        }
        Ok(())
    }

    /// True when the present waves' `alpha`s follow P→Q→R→S→T→P around the
    /// circle. Anchored at R when present, otherwise at the first present wave.
    pub fn is_circularly_ordered(&self) -> bool {
        let present: Vec<(WaveLabel, f64)> = self.waves.iter().map(|(l, w)| (l, w.alpha)).collect();
        if present.len() < 3 {
            return true;
        }
        let anchor_pos = present
            .iter()
            .position(|(l, _)| *l == WaveLabel::R)
            .unwrap_or(0);
        let origin = present[anchor_pos].1;
        // walk labels cyclically from the anchor; their offsets must not decrease
        let n = present.len();
        let mut prev = 0.0;
        for k in 1..n {
            let (_, a) = present[(anchor_pos + k) % n];
            let off = angle::ccw_offset(a, origin);
            if off < prev {
                return false;
            }
            prev = off;
        }
        true
    }
}

/// One heartbeat on the phase axis.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Beat {
    pub times: Vec<f64>,
    pub values: Vec<f64>,
    pub fs: f64,
    pub qrs_phase: f64,
}

impl Beat {
    pub fn new(times: Vec<f64>, values: Vec<f64>, fs: f64, qrs_phase: f64) -> Result<Self> {
        let beat = Self {
            times,
            values,
            fs,
            qrs_phase,
        };
        beat.validate()?;
        Ok(beat)
    }

    pub fn validate(&self) -> Result<()> {
        if self.times.len() != self.values.len() {
            return Err(Error::InvalidBeat(format!(
                "{} times but {} values",
                self.times.len(),
                self.values.len()
            )));
        }
        if self.times.len() < MIN_BEAT_SAMPLES {
            return Err(Error::InvalidBeat(format!(
                "{} samples; at least {MIN_BEAT_SAMPLES} are needed",
                self.times.len()
            )));
        }
        if !self.times.windows(2).all(|w| w[0] < w[1]) {
            return Err(Error::InvalidBeat("times must be strictly increasing".into()));
        }
        if self.values.iter().chain(&self.times).any(|v| !v.is_finite()) {
            return Err(Error::InvalidBeat("non-finite sample".into()));
        }
        if !(self.fs.is_finite() && self.fs > 0.0) {
            return Err(Error::InvalidBeat(format!("sampling frequency {} is not positive", self.fs)));
        }
        if !self.qrs_phase.is_finite() {
            return Err(Error::InvalidBeat("QRS phase must be finite".into()));
        }
        Ok(())
    }

    pub fn len(&self) -> usize {
        self.times.len()
    }

    pub fn is_empty(&self) -> bool {
        self.times.is_empty()
    }

    /// Seconds spanned by a phase difference on this beat's grid.
    pub fn phase_to_seconds(&self, dphase: f64) -> f64 {
        dphase * self.len() as f64 / (std::f64::consts::TAU * self.fs)
    }

    pub fn seconds_to_phase(&self, seconds: f64) -> f64 {
        seconds * std::f64::consts::TAU * self.fs / self.len() as f64
    }

    /// Returns a copy with every voltage multiplied by `c`.
    pub fn scaled(&self, c: f64) -> Self {
        Self {
            values: self.values.iter().map(|v| v * c).collect(),
            ..self.clone()
        }
    }
}
