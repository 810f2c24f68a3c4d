//! Wave identification: which fitted component is P, Q, R, S or T.
//!
//! R comes first: the sharp, upward component whose crest sits near the QRS
//! annotation and is the highest point of the fit. The other labels are then
//! matched to the remaining components by location relative to the R crest,
//! sharpness and polarity, keeping the circular order of the locations.

use crate::angle;
use crate::error::{Error, Result};
use crate::marks::{self, MarkKind};
use crate::model::{Beat, FmmEcgParams, WaveLabel};

use super::config::IStepConfig;
use super::Component;

const SATELLITES: [WaveLabel; 4] = [WaveLabel::P, WaveLabel::Q, WaveLabel::S, WaveLabel::T];

/// Label → component index, plus the components judged to be noise.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Assignment {
    pub labels: [Option<usize>; 5],
    pub noise: Vec<bool>,
}

impl Assignment {
    pub fn get(&self, label: WaveLabel) -> Option<usize> {
        self.labels[label.index()]
    }

    pub fn count(&self) -> usize {
        self.labels.iter().flatten().count()
    }

    pub fn is_complete(&self) -> bool {
        self.count() == 5
    }

    /// The labelled waves with the given intercept.
    pub fn model(&self, components: &[Component], intercept: f64) -> FmmEcgParams {
        let mut m = FmmEcgParams::new(intercept);
        for label in WaveLabel::ALL {
            if let Some(i) = self.get(label) {
                m.waves.set(label, Some(components[i].params));
            }
        }
        m
    }
}

/// Assignment among the five components of largest PV.
///
/// Fails with [`Error::Unfittable`] when none of them qualifies as R.
pub fn istep_assign(components: &[Component], intercept: f64, beat: &Beat, cfg: &IStepConfig) -> Result<Assignment> {
    let pool: Vec<usize> = ranked(components).into_iter().take(5).collect();
    assign(components, intercept, beat, cfg, &pool)
}

/// Assignment among all components, used once the component count grows.
pub fn reassign_all(components: &[Component], intercept: f64, beat: &Beat, cfg: &IStepConfig) -> Result<Assignment> {
    let pool = ranked(components);
    assign(components, intercept, beat, cfg, &pool)
}

fn ranked(components: &[Component]) -> Vec<usize> {
    let mut idx: Vec<usize> = (0..components.len()).filter(|&i| !components[i].absent).collect();
    idx.sort_by(|&a, &b| components[b].pv.total_cmp(&components[a].pv).then(a.cmp(&b)));
    idx
}

/// Small PV or extreme sharpness. A PV above 1 is also rejected: such a
/// component only fits in tandem with another that cancels it.
pub(crate) fn is_noise(c: &Component, cfg: &IStepConfig) -> bool {
    c.absent
        || c.pv < cfg.noise_pv_max
        || c.pv > 1.0
        || c.params.omega < cfg.noise_omega_min
        || c.params.omega > cfg.noise_omega_max
}

struct Curve<'a> {
    components: &'a [Component],
    intercept: f64,
}

impl Curve<'_> {
    fn eval(&self, t: f64) -> f64 {
        self.intercept + self.components.iter().map(|c| c.eval(t)).sum::<f64>()
    }

    fn kind(&self, c: &Component) -> MarkKind {
        marks::polarity_on(&c.params, self.intercept, |t| self.eval(t))
    }
}

fn assign(
    components: &[Component],
    intercept: f64,
    beat: &Beat,
    cfg: &IStepConfig,
    pool: &[usize],
) -> Result<Assignment> {
    let curve = Curve { components, intercept };
    let noise: Vec<bool> = components.iter().map(|c| is_noise(c, cfg)).collect();
    let r = pick_r(&curve, &noise, beat, cfg, pool).ok_or(Error::Unfittable)?;
    let r_crest = components[r].params.crest_time();

    let free: Vec<usize> = pool.iter().copied().filter(|&i| i != r && !noise[i]).collect();
    let options: Vec<Vec<usize>> = SATELLITES
        .iter()
        .map(|&label| {
            let mut v: Vec<usize> = free
                .iter()
                .copied()
                .filter(|&i| plausible(&curve, &components[i], label, r_crest, cfg))
                .collect();
            v.sort_unstable();
            v
        })
        .collect();

    let mut best = Best {
        labels: [None; 5],
        count: 0,
        pv: f64::NEG_INFINITY,
    };
    let mut labels = [None; 5];
    labels[WaveLabel::R.index()] = Some(r);
    search(components, &options, 0, &mut labels, &mut best);
    best.labels[WaveLabel::R.index()] = Some(r);
    Ok(Assignment {
        labels: best.labels,
        noise,
    })
}

fn pick_r(curve: &Curve, noise: &[bool], beat: &Beat, cfg: &IStepConfig, pool: &[usize]) -> Option<usize> {
    let mut cands: Vec<(usize, f64)> = pool
        .iter()
        .copied()
        .filter(|&i| {
            let p = &curve.components[i].params;
            !noise[i]
                && p.omega < cfg.r_omega_max
                && cfg.r_beta_window.contains(p.beta)
                && angle::dist(p.crest_time(), beat.qrs_phase) <= cfg.r_qrs_proximity
        })
        .map(|i| (i, curve.eval(curve.components[i].params.crest_time())))
        .collect();
    cands.sort_by(|a, b| b.1.total_cmp(&a.1).then(a.0.cmp(&b.0)));
    let first = cands.first()?.0;
    if cfg.r_second_max_fallback {
        if let Some(&(second, _)) = cands.get(1) {
            let pv = |i: usize| curve.components[i].pv;
            if pv(first) < cfg.r_second_max_pv_ratio * pv(second) {
                return Some(second);
            }
        }
    }
    Some(first)
}

/// Offset of the component's mark from the R crest along the beat, so that
/// P and Q come out negative and S and T positive.
fn beat_offset(phase: f64, r_crest: f64) -> f64 {
    angle::wrap(phase) - angle::wrap(r_crest)
}

fn plausible(curve: &Curve, c: &Component, label: WaveLabel, r_crest: f64, cfg: &IStepConfig) -> bool {
    let rule = cfg.rule(label);
    if !rule.omega.contains(c.params.omega) {
        return false;
    }
    let kind = curve.kind(c);
    if rule.kind.is_some_and(|k| k != kind) {
        return false;
    }
    rule.offset.contains(beat_offset(marks::mark_time(&c.params, kind), r_crest))
}

struct Best {
    labels: [Option<usize>; 5],
    count: usize,
    pv: f64,
}

// Exhaustive over at most a handful of candidates per label.
fn search(components: &[Component], options: &[Vec<usize>], depth: usize, labels: &mut [Option<usize>; 5], best: &mut Best) {
    if depth == SATELLITES.len() {
        let chosen: Vec<usize> = labels.iter().flatten().copied().collect();
        let count = chosen.len() - 1;
        let pv: f64 = chosen.iter().map(|&i| components[i].pv).sum();
        if (count, pv) > (best.count, best.pv) {
            let a = Assignment {
                labels: *labels,
                noise: Vec::new(),
            };
            if a.model(components, 0.0).is_circularly_ordered() {
                best.labels = *labels;
                best.count = count;
                best.pv = pv;
            }
        }
        return;
    }
    let slot = SATELLITES[depth].index();
    for &i in &options[depth] {
        if labels.contains(&Some(i)) {
            continue;
        }
        labels[slot] = Some(i);
        search(components, options, depth + 1, labels, best);
    }
    labels[slot] = None;
    search(components, options, depth + 1, labels, best);
}
