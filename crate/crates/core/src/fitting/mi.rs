//! The alternating fit: backfit components, label them, and if some label is
//! missing add components and try again.

use std::collections::BTreeMap;

use log::debug;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::model::{Beat, FmmEcgParams, WaveLabel};
use crate::wave::WaveParams;

use super::backfit::{backfit, Backfit};
use super::config::IStepConfig;
use super::istep::{istep_assign, reassign_all, Assignment};
use super::joint::refine_joint;
use super::single::SingleFitter;
use super::stats::{pv_sequence, r_squared};
use super::Component;

const JOINT_MAX_ITER: usize = 100;
// Working values are rounded to multiples of this many standard deviations.
const UNIT_QUANTUM: f64 = 1.0 / (1u64 << 28) as f64;
// A labelled model losing more R² than this against the full set of
// components it came from is ranked below every model that does not.
const MAX_LABEL_R2_LOSS: f64 = 0.1;

/// Variance explained by one labelled wave, added in label order.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ComponentPv {
    pub label: WaveLabel,
    /// Index of the backfitted component the wave came from.
    pub component: usize,
    pub pv: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FitReport {
    pub params: FmmEcgParams,
    pub r2: f64,
    pub pv_per_component: Vec<ComponentPv>,
    pub iterations: usize,
    pub assigned_from_component: BTreeMap<WaveLabel, usize>,
    /// All five waves were identified.
    pub converged: bool,
}

impl FitReport {
    pub fn fitted(&self, times: &[f64]) -> Vec<f64> {
        times.iter().map(|&t| self.params.eval(t)).collect()
    }
}

/// Fits the five-wave model to one beat.
///
/// Returns the report with the most identified waves (then the highest R²)
/// seen over all iterations, passing over reports whose labelled waves lose
/// much of the fit of the components they came from. Fails with
/// [`Error::Unfittable`] if no R wave is ever found.
pub fn fit_beat(beat: &Beat, cfg: &IStepConfig) -> Result<FitReport> {
    beat.validate()?;
    cfg.validate()?;
    let (working, offset, scale) = standardized(beat);
    let mut report = fit_standardized(&working, cfg)?;
    let p = &mut report.params;
    p.intercept = offset + scale * p.intercept;
    p.sigma2 *= scale * scale;
    for label in WaveLabel::ALL {
        if let Some(w) = p.waves.get(label).copied() {
            p.waves.set(label, Some(WaveParams { amplitude: scale * w.amplitude, ..w }));
        }
    }
    Ok(report)
}

/// The beat in units of its standard deviation about its mean, rounded to
/// a fixed grid so that the same shape recorded in other units gives the
/// same working values.
fn standardized(beat: &Beat) -> (Beat, f64, f64) {
    let n = beat.values.len() as f64;
    let mean = beat.values.iter().sum::<f64>() / n;
    let sd = (beat.values.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / n).sqrt();
    if !(sd > 0.0 && sd.is_finite()) {
        return (beat.clone(), 0.0, 1.0);
    }
    let values = beat
        .values
        .iter()
        .map(|v| ((v - mean) / sd / UNIT_QUANTUM).round() * UNIT_QUANTUM)
        .collect();
    (Beat { values, ..beat.clone() }, mean, sd)
}

fn fit_standardized(beat: &Beat, cfg: &IStepConfig) -> Result<FitReport> {
    let fitter = SingleFitter::from_config(&beat.times, cfg)?;

    let mut bf = backfit(&fitter, beat, cfg.k_initial, &[], cfg.backfit_passes_initial)?;
    let mut best: Option<(bool, FitReport)> = None;
    let mut k = cfg.k_initial;
    let mut prev_r2 = bf.r2();

    for iter in 1..=cfg.max_iter {
        let asg = if iter == 1 {
            istep_assign(&bf.components, bf.intercept, beat, cfg)
        } else {
            reassign_all(&bf.components, bf.intercept, beat, cfg)
        };
        let mut current = None;
        match asg {
            Ok(asg) => {
                debug!("iteration {iter}: K = {k}, {} labels, R2 = {:.6}", asg.count(), bf.r2());
                let report = finalize(beat, cfg, &bf, &asg, iter)?;
                keep_better(&mut best, report, bf.r2());
                if asg.is_complete() {
                    break;
                }
                current = Some(asg);
            }
            Err(Error::Unfittable) => debug!("iteration {iter}: K = {k}, no R candidate"),
            Err(e) => return Err(e),
        }
        if iter == cfg.max_iter {
            break;
        }

        let next_k = (k + 1).min(cfg.k_max);
        let seed = seed_components(&bf, current.as_ref());
        let next = backfit(&fitter, beat, next_k, &seed, cfg.backfit_passes_escalation)?;
        let gain = next.r2() - prev_r2;
        let stalled = next_k == k && gain < cfg.pv_gain_stop;
        k = next_k;
        prev_r2 = next.r2();
        bf = next;
        if stalled {
            debug!("R2 gain {gain:.2e} below threshold at K = {k}");
            // the refit may still label better; one last look
            if let Ok(asg) = reassign_all(&bf.components, bf.intercept, beat, cfg) {
                let report = finalize(beat, cfg, &bf, &asg, iter + 1)?;
                keep_better(&mut best, report, bf.r2());
            }
            break;
        }
    }
    best.map(|(_, r)| r).ok_or(Error::Unfittable)
}

/// Credible reports first, then more labels, then higher R².
fn keep_better(best: &mut Option<(bool, FitReport)>, report: FitReport, components_r2: f64) {
    let credible = report.r2 >= components_r2 - MAX_LABEL_R2_LOSS;
    let key = |c: bool, r: &FitReport| (c, r.params.waves.count(), r.r2);
    if best.as_ref().is_none_or(|(c, b)| key(credible, &report) > key(*c, b)) {
        *best = Some((credible, report));
    }
}

/// The components labelled in this round seed the next one, the rest of
/// them follow by PV so that nothing fitted is thrown away.
fn seed_components(bf: &Backfit, asg: Option<&Assignment>) -> Vec<Component> {
    let labelled: Vec<usize> = asg
        .map(|a| WaveLabel::ALL.into_iter().filter_map(|l| a.get(l)).collect())
        .unwrap_or_default();
    labelled
        .iter()
        .copied()
        .chain(bf.ranked().into_iter().filter(|i| !labelled.contains(i)))
        .map(|i| bf.components[i])
        .collect()
}

fn finalize(beat: &Beat, cfg: &IStepConfig, bf: &Backfit, asg: &Assignment, iterations: usize) -> Result<FitReport> {
    let y = &beat.values;
    let n = y.len() as f64;
    let labels: Vec<(WaveLabel, usize)> = WaveLabel::ALL
        .into_iter()
        .filter_map(|l| asg.get(l).map(|i| (l, i)))
        .collect();
    let mut waves: Vec<WaveParams> = labels.iter().map(|&(_, i)| bf.components[i].params).collect();
    let intercept_for = |waves: &[WaveParams]| {
        beat.times
            .iter()
            .zip(y)
            .map(|(&t, v)| v - waves.iter().map(|w| w.eval(t)).sum::<f64>())
            .sum::<f64>()
            / n
    };
    let mut intercept = intercept_for(&waves);

    if cfg.joint_refine {
        let floor = cfg.omega_grid_min / 2.0;
        let (_, polished, _) = refine_joint(&beat.times, y, intercept, &waves, floor, JOINT_MAX_ITER);
        if polished.iter().all(|w| w.validate().is_ok()) && build(0.0, &labels, &polished).is_circularly_ordered() {
            waves = polished;
            intercept = intercept_for(&waves);
        }
    }

    let mut params = build(intercept, &labels, &waves);
    let fitted: Vec<f64> = beat.times.iter().map(|&t| params.eval(t)).collect();
    let rss: f64 = y.iter().zip(&fitted).map(|(o, f)| (o - f).powi(2)).sum();
    params.sigma2 = rss / n;
    let r2 = r_squared(y, &fitted)?;

    let contrib: Vec<Vec<f64>> = waves
        .iter()
        .map(|w| beat.times.iter().map(|&t| w.eval(t)).collect())
        .collect();
    let pv = pv_sequence(y, &contrib)?;
    let pv_per_component = labels
        .iter()
        .zip(pv)
        .map(|(&(label, component), pv)| ComponentPv { label, component, pv })
        .collect();

    Ok(FitReport {
        params,
        r2,
        pv_per_component,
        iterations,
        assigned_from_component: labels.iter().copied().collect(),
        converged: asg.is_complete(),
    })
}

fn build(intercept: f64, labels: &[(WaveLabel, usize)], waves: &[WaveParams]) -> FmmEcgParams {
    let mut m = FmmEcgParams::new(intercept);
    for (&(label, _), w) in labels.iter().zip(waves) {
        m.waves.set(label, Some(*w));
    }
    m
}
