//! Fiducial marks: one reference point per present wave.

use serde::{Deserialize, Serialize};

use crate::model::{FmmEcgParams, WaveLabel};
use crate::wave::WaveParams;

/// Half-width of the band of `cos β` around zero inside which a wave counts
/// as biphasic and its polarity is read off the fitted signal instead of β.
pub const BIPHASIC_COS_BAND: f64 = 0.2;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum MarkKind {
    Crest,
    Trough,
}

impl MarkKind {
    pub fn as_str(self) -> &'static str {
        match self {
            Self::Crest => "crest",
            Self::Trough => "trough",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct FiducialMark {
    pub label: WaveLabel,
    pub phase: f64,
    pub kind: MarkKind,
    /// Fitted signal at the mark.
    pub value: f64,
}

/// Crest for positive waves, trough for negative ones.
///
/// A wave rests near `A cos β` and makes its sharp excursion towards the
/// opposite extreme, so `cos β < 0` means an upward spike. Near-biphasic waves
/// (`|cos β| ≤ BIPHASIC_COS_BAND`) are decided by which extremum of the
/// fitted signal lies further from the intercept.
pub fn polarity(model: &FmmEcgParams, wave: &WaveParams) -> MarkKind {
    polarity_on(wave, model.intercept, |t| model.eval(t))
}

/// [`polarity`] against an arbitrary fitted curve `mu` with baseline `intercept`.
pub fn polarity_on(wave: &WaveParams, intercept: f64, mu: impl Fn(f64) -> f64) -> MarkKind {
    let c = wave.beta.cos();
    if c < -BIPHASIC_COS_BAND {
        return MarkKind::Crest;
    }
    if c > BIPHASIC_COS_BAND {
        return MarkKind::Trough;
    }
    let up = (mu(wave.crest_time()) - intercept).abs();
    let down = (mu(wave.trough_time()) - intercept).abs();
    if up >= down {
        MarkKind::Crest
    } else {
        MarkKind::Trough
    }
}

/// Crest or trough time of `wave` according to `kind`.
pub fn mark_time(wave: &WaveParams, kind: MarkKind) -> f64 {
    match kind {
        MarkKind::Crest => wave.crest_time(),
        MarkKind::Trough => wave.trough_time(),
    }
}

pub fn fiducial_mark(model: &FmmEcgParams, label: WaveLabel) -> Option<FiducialMark> {
    let wave = model.waves.get(label)?;
    let kind = polarity(model, wave);
    let phase = mark_time(wave, kind);
    Some(FiducialMark {
        label,
        phase,
        kind,
        value: model.eval(phase),
    })
}

/// One mark per present wave, in label order.
pub fn fiducial_marks(model: &FmmEcgParams) -> Vec<FiducialMark> {
    WaveLabel::ALL
        .into_iter()
        .filter_map(|l| fiducial_mark(model, l))
        .collect()
}
