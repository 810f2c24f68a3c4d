//! Synthetic beats: the model sampled on an equispaced phase grid plus
//! seeded Gaussian noise.

use std::f64::consts::TAU;
use std::fmt;
use std::str::FromStr;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};

use crate::error::{Error, Result};
use crate::model::{Beat, FmmEcgParams, WaveLabel, MIN_BEAT_SAMPLES};
use crate::wave::WaveParams;

/// Phase of the QRS annotation in a beat segmented as 40% / 60% of RR.
pub const QRS_PHASE: f64 = 0.4 * TAU;

/// Samples `m` at phases `i·2π/n` and adds i.i.d. `N(0, noise_sd²)` noise.
///
/// The QRS reference is the R crest.
pub fn synth_beat(m: &FmmEcgParams, n: usize, fs: f64, noise_sd: f64, seed: u64) -> Result<Beat> {
    let r = m.waves.get(WaveLabel::R).ok_or(Error::MissingRWave)?;
    if n < MIN_BEAT_SAMPLES {
        return Err(Error::InvalidArgument(format!(
            "a beat needs at least {MIN_BEAT_SAMPLES} samples, got {n}"
        )));
    }
    if !(noise_sd.is_finite() && noise_sd >= 0.0) {
        return Err(Error::InvalidArgument(format!("noise sd must be nonnegative, got {noise_sd}")));
    }
    let times = phase_grid(n);
    let mut values: Vec<f64> = times.iter().map(|&t| m.eval(t)).collect();
    if noise_sd > 0.0 {
        add_noise(&mut values, noise_sd, seed);
    }
    Beat::new(times, values, fs, r.crest_time())
}

pub fn phase_grid(n: usize) -> Vec<f64> {
    (0..n).map(|i| i as f64 * TAU / n as f64).collect()
}

pub fn add_noise(values: &mut [f64], sd: f64, seed: u64) {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let normal = Normal::new(0.0, sd).expect("sd validated by caller");
    for v in values {
        *v += normal.sample(&mut rng);
    }
}

/// Noise standard deviation giving the requested signal-to-noise ratio,
/// with signal power taken as the sample variance of `clean`.
pub fn noise_sd_for_snr(clean: &[f64], snr_db: f64) -> f64 {
    let n = clean.len() as f64;
    let mean = clean.iter().sum::<f64>() / n;
    let var = clean.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / n;
    (var / 10f64.powf(snr_db / 10.0)).sqrt()
}

/// Builds a wave whose fiducial point (crest when `cos β < 0`, trough
/// otherwise) falls on `mark`.
pub fn wave_at_mark(amplitude: f64, mark: f64, beta: f64, omega: f64) -> WaveParams {
    let probe = WaveParams::new(amplitude, 0.0, beta, omega).expect("preset wave is valid");
    let offset = if beta.cos() < 0.0 {
        probe.crest_time()
    } else {
        probe.trough_time()
    };
    WaveParams::new(amplitude, mark - offset, beta, omega).expect("preset wave is valid")
}

/// Illustrative morphologies. The parameter values are invented to give a
/// recognisable shape for each beat class; they are not estimates from data.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Preset {
    Normal,
    Pace,
    Rbbb,
    Apc,
    Pvc,
}

impl Preset {
    pub const ALL: [Preset; 5] = [Self::Normal, Self::Pace, Self::Rbbb, Self::Apc, Self::Pvc];

    pub fn name(self) -> &'static str {
        match self {
            Self::Normal => "NORMAL",
            Self::Pace => "PACE",
            Self::Rbbb => "RBBB",
            Self::Apc => "APC",
            Self::Pvc => "PVC",
        }
    }

    /// (label, amplitude, mark offset from QRS in radians, β, ω)
    fn table(self) -> [(WaveLabel, f64, f64, f64, f64); 5] {
        use WaveLabel::*;
        match self {
            Self::Normal => [
                (P, 0.08, -1.15, 3.0, 0.10),
                (Q, 0.08, -0.16, 0.3, 0.04),
                (R, 0.60, 0.0, 3.1, 0.035),
                (S, 0.12, 0.17, 0.2, 0.04),
                (T, 0.20, 2.05, 2.8, 0.25),
            ],
            Self::Pace => [
                (P, 0.05, -1.20, 3.1, 0.12),
                (Q, 0.15, -0.30, 0.4, 0.06),
                (R, 0.45, 0.0, 2.9, 0.08),
                (S, 0.25, 0.32, 0.3, 0.07),
                (T, 0.18, 2.15, 0.4, 0.28),
            ],
            Self::Rbbb => [
                (P, 0.07, -1.20, 3.0, 0.10),
                (Q, 0.06, -0.17, 0.2, 0.04),
                (R, 0.55, 0.0, 3.0, 0.04),
                (S, 0.20, 0.26, 0.5, 0.09),
                (T, 0.12, 2.00, 0.3, 0.22),
            ],
            Self::Apc => [
                (P, 0.10, -0.85, 2.6, 0.08),
                (Q, 0.07, -0.16, 0.3, 0.04),
                (R, 0.58, 0.0, 3.1, 0.035),
                (S, 0.10, 0.17, 0.2, 0.04),
                (T, 0.18, 1.90, 2.9, 0.25),
            ],
            Self::Pvc => [
                (P, 0.03, -1.30, 3.1, 0.15),
                (Q, 0.10, -0.35, 0.3, 0.07),
                (R, 0.75, 0.0, 3.2, 0.09),
                (S, 0.15, 0.40, 0.4, 0.08),
                (T, 0.35, 2.10, 0.2, 0.30),
            ],
        }
    }

    pub fn params(self) -> FmmEcgParams {
        let mut m = FmmEcgParams::new(0.0);
        for (label, a, offset, beta, omega) in self.table() {
            m.waves.set(label, Some(wave_at_mark(a, QRS_PHASE + offset, beta, omega)));
        }
        // put the resting level of the sum near zero
        m.intercept = -m.waves.iter().map(|(_, w)| w.resting_level()).sum::<f64>();
        m
    }
}

impl fmt::Display for Preset {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Preset {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        Self::ALL
            .into_iter()
            .find(|p| p.name().eq_ignore_ascii_case(s.trim()))
            .ok_or_else(|| {
                Error::InvalidArgument(format!(
                    "unknown preset {s:?}; expected one of NORMAL, PACE, RBBB, APC, PVC"
                ))
            })
    }
}

/// Random perturbation of a preset used to build test corpora: amplitudes
/// ±15%, marks ±0.05 rad, β ±0.1 rad, ω ±10%.
pub fn jittered(preset: Preset, seed: u64) -> FmmEcgParams {
    use rand::Rng;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut m = FmmEcgParams::new(0.0);
    for (label, a, offset, beta, omega) in preset.table() {
        let a = a * rng.random_range(0.85..1.15);
        let mark = QRS_PHASE + offset + if label == WaveLabel::R { 0.0 } else { rng.random_range(-0.05..0.05) };
        let beta = beta + rng.random_range(-0.1..0.1);
        let omega = (omega * rng.random_range(0.9..1.1)).min(1.0);
        m.waves.set(label, Some(wave_at_mark(a, mark, beta, omega)));
    }
    m.intercept = -m.waves.iter().map(|(_, w)| w.resting_level()).sum::<f64>();
    debug_assert!(m.is_circularly_ordered());
    m
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::angle;

    #[test]
    fn noiseless_beat_is_the_model() {
        let m = Preset::Normal.params();
        let b = synth_beat(&m, 200, 250.0, 0.0, 7).unwrap();
        for (t, v) in b.times.iter().zip(&b.values) {
            assert_eq!(*v, m.eval(*t));
        }
        assert_eq!(b.qrs_phase, m.waves.get(WaveLabel::R).unwrap().crest_time());
    }

    #[test]
    fn seeded_noise_is_reproducible() {
        let m = Preset::Normal.params();
        let a = synth_beat(&m, 200, 250.0, 0.05, 11).unwrap();
        let b = synth_beat(&m, 200, 250.0, 0.05, 11).unwrap();
        let c = synth_beat(&m, 200, 250.0, 0.05, 12).unwrap();
        assert_eq!(a, b);
        assert_ne!(a, c);
    }

    #[test]
    fn noise_has_requested_spread() {
        let m = Preset::Normal.params();
        let n = 100_000;
        let b = synth_beat(&m, n, 250.0, 0.1, 3).unwrap();
        let resid: Vec<f64> = b.times.iter().zip(&b.values).map(|(t, v)| v - m.eval(*t)).collect();
        let mean = resid.iter().sum::<f64>() / n as f64;
        let sd = (resid.iter().map(|r| (r - mean).powi(2)).sum::<f64>() / (n - 1) as f64).sqrt();
        assert!((sd - 0.1).abs() < 0.001, "sd = {sd}");
    }

    #[test]
    fn requires_r_wave() {
        let m = FmmEcgParams::new(0.0);
        assert!(matches!(synth_beat(&m, 100, 250.0, 0.0, 0), Err(Error::MissingRWave)));
        let m = Preset::Normal.params();
        assert!(synth_beat(&m, 10, 250.0, 0.0, 0).is_err());
        assert!(synth_beat(&m, 100, 250.0, -1.0, 0).is_err());
    }

    #[test]
    fn presets_are_valid_and_put_r_on_the_qrs() {
        for p in Preset::ALL {
            let m = p.params();
            m.validate().unwrap();
            let r = m.waves.get(WaveLabel::R).unwrap();
            assert!(angle::dist(r.crest_time(), QRS_PHASE) < 1e-12, "{p}");
            assert_eq!(p.name().parse::<Preset>().unwrap(), p);
        }
        for seed in 0..200 {
            jittered(Preset::Normal, seed).validate().unwrap();
        }
    }
}
