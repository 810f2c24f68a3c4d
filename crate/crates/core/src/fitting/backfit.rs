use crate::angle;
use crate::error::{Error, Result};
use crate::model::Beat;

use super::joint::refine_joint;
use super::single::SingleFitter;
use super::stats::pv_sequence;
use super::Component;

const POLISH_ITER: usize = 30;
// candidate pairs for merging: close in location and sharpness
const MERGE_ALPHA: f64 = 0.05;
const MERGE_LOG_OMEGA: f64 = 0.25;

/// Outcome of cyclic refitting.
#[derive(Debug, Clone)]
pub struct Backfit {
    /// Components in fit order, each carrying its incremental PV.
    pub components: Vec<Component>,
    pub intercept: f64,
    /// Total RSS after initialisation and after every accepted update.
    pub rss_trace: Vec<f64>,
    pub passes: usize,
}

impl Backfit {
    pub fn rss(&self) -> f64 {
        *self.rss_trace.last().expect("trace starts with the initial RSS")
    }

    /// R² of the full k-component model.
    pub fn r2(&self) -> f64 {
        self.components.iter().map(|c| c.pv).sum()
    }

    /// Component indices by descending PV; ties go to the lower index.
    pub fn ranked(&self) -> Vec<usize> {
        let mut idx: Vec<usize> = (0..self.components.len())
            .filter(|&i| !self.components[i].absent)
            .collect();
        idx.sort_by(|&a, &b| {
            self.components[b]
                .pv
                .total_cmp(&self.components[a].pv)
                .then(a.cmp(&b))
        });
        idx
    }
}

/// Fits `k` components by refitting each in turn against the residual of
/// all others, for at most `passes` full turns.
///
/// `init` seeds the first components; the rest start at zero. Every refit is
/// warm-started from the component it replaces, so total RSS never goes up.
/// With more than one component each pass ends with a joint polish of all of
/// them and an attempt to merge near-duplicate pairs; both are kept only if
/// they lower RSS. Stops early once a full pass no longer lowers RSS.
pub fn backfit(fitter: &SingleFitter, beat: &Beat, k: usize, init: &[Component], passes: usize) -> Result<Backfit> {
    if k == 0 {
        return Err(Error::InvalidArgument("backfit needs at least one component".into()));
    }
    if init.len() > k {
        return Err(Error::InvalidArgument(format!(
            "{} initial components for k = {k}",
            init.len()
        )));
    }
    if fitter.len() != beat.len() {
        return Err(Error::InvalidArgument("fitter was built for different sample times".into()));
    }
    let mut components = init.to_vec();
    components.resize(k, Component::zero());
    // every refit re-estimates the intercept, so it can start at zero
    let mut st = State::new(beat, components, 0.0);
    let mut rss_trace = vec![st.rss];

    let mut done = 0;
    for _ in 0..passes {
        let before = st.rss;
        for j in 0..k {
            st.refit(fitter, j)?;
            rss_trace.push(st.rss);
        }
        if k > 1 {
            if let Some(next) = st.polished(fitter) {
                st = next;
                rss_trace.push(st.rss);
            }
            while let Some(next) = st.merged(fitter)? {
                st = next;
                rss_trace.push(st.rss);
            }
        }
        done += 1;
        if before - st.rss <= 1e-12 * before {
            break;
        }
    }

    let State {
        mut components,
        contrib,
        intercept,
        ..
    } = st;
    let pv = pv_sequence(&beat.values, &contrib)?;
    for (c, p) in components.iter_mut().zip(pv) {
        c.pv = p;
    }
    Ok(Backfit {
        components,
        intercept,
        rss_trace,
        passes: done,
    })
}

#[derive(Clone)]
struct State<'a> {
    beat: &'a Beat,
    components: Vec<Component>,
    contrib: Vec<Vec<f64>>,
    intercept: f64,
    resid: Vec<f64>,
    rss: f64,
}

impl<'a> State<'a> {
    fn new(beat: &'a Beat, components: Vec<Component>, intercept: f64) -> Self {
        let contrib = components.iter().map(|c| c.sample(&beat.times)).collect();
        let mut st = Self {
            beat,
            components,
            contrib,
            intercept,
            resid: Vec::new(),
            rss: 0.0,
        };
        st.update_resid();
        st
    }

    fn update_resid(&mut self) {
        let y = &self.beat.values;
        self.resid = (0..y.len())
            .map(|i| y[i] - self.intercept - self.contrib.iter().map(|c| c[i]).sum::<f64>())
            .collect();
        self.rss = self.resid.iter().map(|r| r * r).sum();
    }

    fn set(&mut self, j: usize, c: Component) {
        self.components[j] = c;
        self.contrib[j] = c.sample(&self.beat.times);
    }

    /// Refits component `j` against everything else.
    fn refit(&mut self, fitter: &SingleFitter, j: usize) -> Result<()> {
        let target: Vec<f64> = self.resid.iter().zip(&self.contrib[j]).map(|(r, c)| r + c).collect();
        let c = &self.components[j];
        let warm = (!c.absent).then_some((c.params.alpha, c.params.omega));
        let fit = fitter.fit(&target, warm)?;
        self.set(j, fit.component);
        self.intercept += fit.intercept;
        for (i, r) in self.resid.iter_mut().enumerate() {
            *r = target[i] - fit.intercept - self.contrib[j][i];
        }
        self.rss = self.resid.iter().map(|r| r * r).sum();
        Ok(())
    }

    // Joint Levenberg-Marquardt step over all present components. Overlapping
    // waves trade variance back and forth for many passes otherwise.
    fn polished(&self, fitter: &SingleFitter) -> Option<Self> {
        let present: Vec<usize> = (0..self.components.len()).filter(|&j| !self.components[j].absent).collect();
        if present.is_empty() {
            return None;
        }
        let waves: Vec<_> = present.iter().map(|&j| self.components[j].params).collect();
        let (m, polished, _) = refine_joint(
            &self.beat.times,
            &self.beat.values,
            self.intercept,
            &waves,
            fitter.omega_floor(),
            POLISH_ITER,
        );
        if polished.iter().any(|w| w.validate().is_err()) {
            return None;
        }
        let mut next = self.clone();
        for (&j, w) in present.iter().zip(polished) {
            next.set(j, Component::from_wave(w));
        }
        next.intercept = m;
        next.update_resid();
        (next.rss < self.rss).then_some(next)
    }

    // Two components at (nearly) the same location and sharpness span almost
    // the same basis and can cancel each other with large amplitudes. Either
    // fold the pair into one wave or clear both, refit the freed slots and
    // polish; keep whichever fits clearly better than before.
    fn merged(&self, fitter: &SingleFitter) -> Result<Option<Self>> {
        let k = self.components.len();
        let mut best: Option<Self> = None;
        for a in 0..k {
            for b in a + 1..k {
                let (ca, cb) = (&self.components[a], &self.components[b]);
                if ca.absent || cb.absent {
                    continue;
                }
                let (pa, pb) = (ca.params, cb.params);
                if angle::dist(pa.alpha, pb.alpha) > MERGE_ALPHA || (pa.omega / pb.omega).ln().abs() > MERGE_LOG_OMEGA {
                    continue;
                }
                let (keep, drop) = if pa.amplitude >= pb.amplitude { (a, b) } else { (b, a) };
                let p = self.components[keep].params;

                let mut folded = self.clone();
                folded.set(keep, Component::from_linear(p.alpha, p.omega, ca.delta + cb.delta, ca.gamma + cb.gamma));
                folded.set(drop, Component::zero());
                folded.update_resid();
                folded.refit(fitter, drop)?;

                let mut cleared = self.clone();
                cleared.set(keep, Component::zero());
                cleared.set(drop, Component::zero());
                cleared.update_resid();
                cleared.refit(fitter, keep)?;
                cleared.refit(fitter, drop)?;

                for mut next in [folded, cleared] {
                    if let Some(p) = next.polished(fitter) {
                        next = p;
                    }
                    if best.as_ref().is_none_or(|b| next.rss < b.rss) {
                        best = Some(next);
                    }
                }
            }
        }
        Ok(best.filter(|b| b.rss < self.rss * (1.0 - 1e-9)))
    }
}
