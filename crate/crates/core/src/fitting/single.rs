//! Fitting one FMM component to a residual series.
//!
//! At fixed `(α, ω)` the component `m + δ cos φ(t) + γ sin φ(t)` is linear
//! in `(m, δ, γ)`, so each grid point is an exact small least-squares solve.
//! The cosine and sine columns for every grid point only depend on the sample
//! times, so they are computed once per beat and reused by every refit.
//! The best grid point (or the caller's warm start, whichever is better) is
//! then polished by a Nelder–Mead simplex over `(α, ln ω)`.

use std::f64::consts::TAU;

use crate::angle;
use crate::error::{Error, Result};
use crate::wave::WaveParams;

use super::config::{log_grid, IStepConfig};
use super::joint::refine_joint;
use super::Component;

/// Linear part of a component fitted at fixed `(α, ω)`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Profile {
    pub alpha: f64,
    pub omega: f64,
    pub intercept: f64,
    pub delta: f64,
    pub gamma: f64,
    pub rss: f64,
}

/// Result of one single-component fit.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SingleFit {
    pub component: Component,
    /// Local intercept absorbed by the caller's global intercept.
    pub intercept: f64,
    pub rss: f64,
}

#[derive(Debug, Clone, Copy)]
struct GridPoint {
    alpha: f64,
    omega: f64,
    // entries of the inverse centred Gram matrix [[a, b], [b, d]]
    inv_cc: f64,
    inv_cs: f64,
    inv_ss: f64,
}

const POLISH_ITER: usize = 20;

/// Single-component fitter bound to one set of sample times.
#[derive(Debug, Clone)]
pub struct SingleFitter {
    n: usize,
    times: Vec<f64>,
    half_sin: Vec<f64>,
    half_cos: Vec<f64>,
    points: Vec<GridPoint>,
    // row-major, one row of n samples per grid point; rows of singular
    // points are kept so indices line up
    cos_phi: Vec<f64>,
    sin_phi: Vec<f64>,
    usable: Vec<bool>,
    alpha_step: f64,
    log_omega_step: f64,
    omega_floor: f64,
    max_evals: usize,
}

impl SingleFitter {
    pub fn new(times: &[f64], alpha_grid_size: usize, omega_grid: &[f64], max_evals: usize) -> Result<Self> {
        if times.len() < 4 {
            return Err(Error::InvalidArgument(format!(
                "a single component needs at least 4 samples, got {}",
                times.len()
            )));
        }
        if alpha_grid_size == 0 || omega_grid.is_empty() {
            return Err(Error::InvalidArgument("empty search grid".into()));
        }
        if omega_grid.iter().any(|w| !(*w > 0.0 && *w <= 1.0)) {
            return Err(Error::InvalidArgument("omega grid values must lie in (0, 1]".into()));
        }
        let n = times.len();
        let (half_sin, half_cos): (Vec<f64>, Vec<f64>) = times.iter().map(|t| (0.5 * t).sin_cos()).unzip();
        let g = alpha_grid_size * omega_grid.len();
        let mut points = Vec::with_capacity(g);
        let mut cos_phi = vec![0.0; g * n];
        let mut sin_phi = vec![0.0; g * n];
        let mut usable = Vec::with_capacity(g);
        let mut su = vec![0.0; n];
        let mut cu = vec![0.0; n];
        for ia in 0..alpha_grid_size {
            let alpha = TAU * ia as f64 / alpha_grid_size as f64;
            half_angle_diff(&half_sin, &half_cos, alpha, &mut su, &mut cu);
            for &omega in omega_grid {
                let row = points.len() * n;
                let (c, s) = (&mut cos_phi[row..row + n], &mut sin_phi[row..row + n]);
                warped_basis(&su, &cu, omega, c, s);
                match centred_inverse(c, s) {
                    Some((inv_cc, inv_cs, inv_ss)) => {
                        usable.push(true);
                        points.push(GridPoint { alpha, omega, inv_cc, inv_cs, inv_ss });
                    }
                    None => {
                        usable.push(false);
                        points.push(GridPoint { alpha, omega, inv_cc: 0.0, inv_cs: 0.0, inv_ss: 0.0 });
                    }
                }
            }
        }
        let min_omega = omega_grid.iter().copied().fold(f64::INFINITY, f64::min);
        let log_omega_step = if omega_grid.len() > 1 {
            let max_omega = omega_grid.iter().copied().fold(0.0, f64::max);
            (max_omega / min_omega).ln() / (omega_grid.len() - 1) as f64
        } else {
            0.1
        };
        Ok(Self {
            n,
            times: times.to_vec(),
            half_sin,
            half_cos,
            points,
            cos_phi,
            sin_phi,
            usable,
            alpha_step: TAU / alpha_grid_size as f64,
            log_omega_step,
            omega_floor: 0.5 * min_omega,
            max_evals,
        })
    }

    pub fn from_config(times: &[f64], cfg: &IStepConfig) -> Result<Self> {
        Self::new(times, cfg.alpha_grid_size, &cfg.omega_grid(), cfg.simplex_max_evals)
    }

    pub fn len(&self) -> usize {
        self.n
    }

    pub fn is_empty(&self) -> bool {
        self.n == 0
    }

    /// Smallest `omega` the local search may reach.
    pub fn omega_floor(&self) -> f64 {
        self.omega_floor
    }

    /// Fits one component to `residuals`.
    ///
    /// `warm` is a previous `(α, ω)` that competes with the grid optimum as a
    /// starting point; the returned RSS is never above the RSS obtained at
    /// `warm` or at any grid point.
    pub fn fit(&self, residuals: &[f64], warm: Option<(f64, f64)>) -> Result<SingleFit> {
        if residuals.len() != self.n {
            return Err(Error::InvalidArgument(format!(
                "{} residuals for {} sample times",
                residuals.len(),
                self.n
            )));
        }
        if residuals.iter().any(|r| !r.is_finite()) {
            return Err(Error::InvalidArgument("residuals must be finite".into()));
        }
        let n = self.n as f64;
        let mean = residuals.iter().sum::<f64>() / n;
        let centred: Vec<f64> = residuals.iter().map(|r| r - mean).collect();
        let tss: f64 = centred.iter().map(|r| r * r).sum();
        let sumsq: f64 = residuals.iter().map(|r| r * r).sum();
        if tss <= f64::EPSILON * f64::EPSILON * sumsq || tss == 0.0 {
            return Ok(SingleFit {
                component: Component::zero(),
                intercept: mean,
                rss: tss,
            });
        }

        let mut best: Option<(usize, f64)> = None;
        for (g, point) in self.points.iter().enumerate() {
            if !self.usable[g] {
                continue;
            }
            let row = g * self.n;
            let c = &self.cos_phi[row..row + self.n];
            let s = &self.sin_phi[row..row + self.n];
            let (mut rc, mut rs) = (0.0, 0.0);
            for i in 0..self.n {
                rc += centred[i] * c[i];
                rs += centred[i] * s[i];
            }
            let reduction = point.inv_cc * rc * rc + 2.0 * point.inv_cs * rc * rs + point.inv_ss * rs * rs;
            if best.is_none_or(|(_, b)| reduction > b) {
                best = Some((g, reduction));
            }
        }

        let mut start = match best {
            Some((g, _)) => self.profile(residuals, self.points[g].alpha, self.points[g].omega),
            None => self.null_profile(residuals, 0.0, 1.0),
        };
        if let Some((alpha, omega)) = warm {
            let omega = omega.clamp(self.omega_floor, 1.0);
            let w = self.profile(residuals, angle::wrap(alpha), omega);
            if w.rss < start.rss {
                start = w;
            }
        }
        let refined = self.polish(residuals, self.refine(residuals, start));
        Ok(self.to_fit(refined, tss))
    }

    /// Exact linear least squares at fixed `(α, ω)`.
    pub fn profile(&self, residuals: &[f64], alpha: f64, omega: f64) -> Profile {
        let n = self.n;
        let mut su = vec![0.0; n];
        let mut cu = vec![0.0; n];
        let mut c = vec![0.0; n];
        let mut s = vec![0.0; n];
        half_angle_diff(&self.half_sin, &self.half_cos, alpha, &mut su, &mut cu);
        warped_basis(&su, &cu, omega, &mut c, &mut s);
        let nf = n as f64;
        let mr = residuals.iter().sum::<f64>() / nf;
        let mc = c.iter().sum::<f64>() / nf;
        let ms = s.iter().sum::<f64>() / nf;
        let (mut scc, mut sss, mut scs, mut src, mut srs) = (0.0, 0.0, 0.0, 0.0, 0.0);
        for i in 0..n {
            let (dc, ds, dr) = (c[i] - mc, s[i] - ms, residuals[i] - mr);
            scc += dc * dc;
            sss += ds * ds;
            scs += dc * ds;
            src += dr * dc;
            srs += dr * ds;
        }
        let det = scc * sss - scs * scs;
        if !(det > 1e-12 * scc * sss) {
            return self.null_profile(residuals, alpha, omega);
        }
        let delta = (sss * src - scs * srs) / det;
        let gamma = (scc * srs - scs * src) / det;
        let intercept = mr - delta * mc - gamma * ms;
        let rss = (0..n)
            .map(|i| (residuals[i] - intercept - delta * c[i] - gamma * s[i]).powi(2))
            .sum();
        Profile {
            alpha,
            omega,
            intercept,
            delta,
            gamma,
            rss,
        }
    }

    fn null_profile(&self, residuals: &[f64], alpha: f64, omega: f64) -> Profile {
        let mean = residuals.iter().sum::<f64>() / self.n as f64;
        Profile {
            alpha,
            omega,
            intercept: mean,
            delta: 0.0,
            gamma: 0.0,
            rss: residuals.iter().map(|r| (r - mean).powi(2)).sum(),
        }
    }

    fn refine(&self, residuals: &[f64], start: Profile) -> Profile {
        if self.max_evals == 0 {
            return start;
        }
        let lo = self.omega_floor.ln();
        let eval = |x: [f64; 2]| {
            let omega = x[1].clamp(lo, 0.0).exp();
            self.profile(residuals, angle::wrap(x[0]), omega)
        };
        let x0 = [start.alpha, start.omega.ln()];
        let step = [0.5 * self.alpha_step, 0.5 * self.log_omega_step];
        let mut best = start;
        nelder_mead(
            |x| {
                let p = eval(x);
                if p.rss < best.rss {
                    best = p;
                }
                p.rss
            },
            x0,
            step,
            self.max_evals,
        );
        best
    }

    // The simplex stops once RSS is flat, which leaves (α, ω) loose along
    // shallow valleys; a few Gauss-Newton steps pin them down.
    fn polish(&self, residuals: &[f64], p: Profile) -> Profile {
        let amplitude = p.delta.hypot(p.gamma);
        if !(amplitude > 0.0 && amplitude.is_finite()) {
            return p;
        }
        let wave = WaveParams {
            amplitude,
            alpha: angle::wrap(p.alpha),
            beta: (-p.gamma).atan2(p.delta),
            omega: p.omega,
        };
        let (intercept, w, rss) = refine_joint(&self.times, residuals, p.intercept, &[wave], self.omega_floor, POLISH_ITER);
        if !(rss < p.rss) {
            return p;
        }
        Profile {
            alpha: w[0].alpha,
            omega: w[0].omega,
            intercept,
            delta: w[0].amplitude * w[0].beta.cos(),
            gamma: -w[0].amplitude * w[0].beta.sin(),
            rss,
        }
    }

    fn to_fit(&self, p: Profile, tss: f64) -> SingleFit {
        let amplitude = p.delta.hypot(p.gamma);
        let component = if amplitude > 0.0 && amplitude.is_finite() {
            Component {
                params: WaveParams {
                    amplitude,
                    alpha: angle::wrap(p.alpha),
                    beta: angle::wrap((-p.gamma).atan2(p.delta)),
                    omega: p.omega,
                },
                delta: p.delta,
                gamma: p.gamma,
                pv: 1.0 - p.rss / tss,
                absent: false,
            }
        } else {
            Component::zero()
        };
        SingleFit {
            component,
            intercept: p.intercept,
            rss: p.rss,
        }
    }
}

/// Convenience wrapper building a throwaway fitter for one series.
pub fn fit_single_fmm(times: &[f64], residuals: &[f64], alpha_grid_size: usize, omega_grid: &[f64]) -> Result<SingleFit> {
    SingleFitter::new(times, alpha_grid_size, omega_grid, IStepConfig::default().simplex_max_evals)?
        .fit(residuals, None)
}

/// Default log-spaced sharpness grid.
pub fn default_omega_grid() -> Vec<f64> {
    let c = IStepConfig::default();
    log_grid(c.omega_grid_min, 1.0, c.omega_grid_size)
}

/// `sin`, `cos` of `(t - α)/2` from those of `t/2`.
fn half_angle_diff(hs: &[f64], hc: &[f64], alpha: f64, su: &mut [f64], cu: &mut [f64]) {
    let (sa, ca) = (0.5 * alpha).sin_cos();
    for i in 0..hs.len() {
        su[i] = hs[i] * ca - hc[i] * sa;
        cu[i] = hc[i] * ca + hs[i] * sa;
    }
}

/// `cos φ`, `sin φ` with `φ = 2 atan2(ω sin u, cos u)`, without calling trig:
/// the angle `θ = atan2(ω s, c)` has `cos 2θ = (c² - ω²s²)/ρ` and
/// `sin 2θ = 2ωsc/ρ` where `ρ = c² + ω²s²`.
fn warped_basis(su: &[f64], cu: &[f64], omega: f64, cos_out: &mut [f64], sin_out: &mut [f64]) {
    for i in 0..su.len() {
        let ws = omega * su[i];
        let c = cu[i];
        let rho = c * c + ws * ws;
        cos_out[i] = (c * c - ws * ws) / rho;
        sin_out[i] = 2.0 * ws * c / rho;
    }
}

/// Inverse of the centred 2×2 Gram matrix of `(c, s)`, or `None` when the
/// columns are (nearly) collinear.
fn centred_inverse(c: &[f64], s: &[f64]) -> Option<(f64, f64, f64)> {
    let n = c.len() as f64;
    let mc = c.iter().sum::<f64>() / n;
    let ms = s.iter().sum::<f64>() / n;
    let (mut scc, mut sss, mut scs) = (0.0, 0.0, 0.0);
    for (ci, si) in c.iter().zip(s) {
        let (dc, ds) = (ci - mc, si - ms);
        scc += dc * dc;
        sss += ds * ds;
        scs += dc * ds;
    }
    let det = scc * sss - scs * scs;
    if det > 1e-12 * scc * sss && det > 0.0 {
        Some((sss / det, -scs / det, scc / det))
    } else {
        None
    }
}

/// Nelder–Mead on two variables. Returns the best vertex and its value.
pub(crate) fn nelder_mead<F>(mut f: F, x0: [f64; 2], step: [f64; 2], max_evals: usize) -> ([f64; 2], f64)
where
    F: FnMut([f64; 2]) -> f64,
{
    let mut evals = 0;
    let mut call = |x: [f64; 2], evals: &mut usize| {
        *evals += 1;
        f(x)
    };
    let mut simplex = [x0, [x0[0] + step[0], x0[1]], [x0[0], x0[1] + step[1]]];
    let mut values = [0.0; 3];
    for (v, x) in values.iter_mut().zip(&simplex) {
        *v = call(*x, &mut evals);
    }
    while evals < max_evals {
        // order: best, middle, worst
        let mut idx = [0, 1, 2];
        idx.sort_by(|&a, &b| values[a].total_cmp(&values[b]));
        simplex = [simplex[idx[0]], simplex[idx[1]], simplex[idx[2]]];
        values = [values[idx[0]], values[idx[1]], values[idx[2]]];

        let spread = values[2] - values[0];
        let size = (0..2)
            .map(|d| (simplex[1][d] - simplex[0][d]).abs().max((simplex[2][d] - simplex[0][d]).abs()))
            .fold(0.0, f64::max);
        if spread <= 1e-15 * values[0].abs() && size < 1e-10 {
            break;
        }

        let centroid = [
            0.5 * (simplex[0][0] + simplex[1][0]),
            0.5 * (simplex[0][1] + simplex[1][1]),
        ];
        let along = |t: f64| {
            [
                centroid[0] + t * (simplex[2][0] - centroid[0]),
                centroid[1] + t * (simplex[2][1] - centroid[1]),
            ]
        };
        let xr = along(-1.0);
        let fr = call(xr, &mut evals);
        if fr < values[0] {
            let xe = along(-2.0);
            let fe = call(xe, &mut evals);
            if fe < fr {
                simplex[2] = xe;
                values[2] = fe;
            } else {
                simplex[2] = xr;
                values[2] = fr;
            }
        } else if fr < values[1] {
            simplex[2] = xr;
            values[2] = fr;
        } else {
            let (xc, fc) = if fr < values[2] {
                let xc = along(-0.5);
                (xc, call(xc, &mut evals))
            } else {
                let xc = along(0.5);
                (xc, call(xc, &mut evals))
            };
            if fc < values[2].min(fr) {
                simplex[2] = xc;
                values[2] = fc;
            } else {
                for k in 1..3 {
                    for d in 0..2 {
                        simplex[k][d] = simplex[0][d] + 0.5 * (simplex[k][d] - simplex[0][d]);
                    }
                    values[k] = call(simplex[k], &mut evals);
                }
            }
        }
    }
    let best = (0..3).min_by(|&a, &b| values[a].total_cmp(&values[b])).unwrap();
    (simplex[best], values[best])
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::synth::phase_grid;

    fn fitter(n: usize) -> SingleFitter {
        SingleFitter::from_config(&phase_grid(n), &IStepConfig::default()).unwrap()
    }

    #[test]
    fn recovers_a_known_wave() {
        let times = phase_grid(250);
        let truth = WaveParams::new(1.3, 2.0, 2.9, 0.07).unwrap();
        let r: Vec<f64> = times.iter().map(|&t| 0.4 + truth.eval(t)).collect();
        let fit = fitter(250).fit(&r, None).unwrap();
        let p = fit.component.params;
        let alpha_step = TAU / 100.0;
        let omega_ratio = (1.0f64 / 0.005).powf(1.0 / 39.0);
        assert!((p.amplitude / truth.amplitude - 1.0).abs() < 0.01, "{p:?}");
        assert!(angle::dist(p.alpha, truth.alpha) <= alpha_step);
        assert!(angle::dist(p.beta, truth.beta) <= 0.02);
        assert!((p.omega / truth.omega).ln().abs() <= omega_ratio.ln());
        assert!((fit.intercept - 0.4).abs() < 1e-3);
        assert!(fit.component.pv > 0.999);
    }

    #[test]
    fn zero_residuals_are_absent() {
        let fit = fitter(50).fit(&[0.0; 50], None).unwrap();
        assert!(fit.component.absent);
        assert_eq!(fit.component.params.amplitude, 0.0);
        let fit = fitter(50).fit(&[3.5; 50], None).unwrap();
        assert!(fit.component.absent);
        assert_eq!(fit.intercept, 3.5);
    }

    #[test]
    fn sinusoid_is_unit_sharpness() {
        let times = phase_grid(120);
        let r: Vec<f64> = times.iter().map(|t| t.cos()).collect();
        let fit = fitter(120).fit(&r, None).unwrap();
        let p = fit.component.params;
        assert!(p.omega > 0.95, "{p:?}");
        assert!((p.amplitude - 1.0).abs() < 1e-6);
        for (t, v) in times.iter().zip(&r) {
            assert!((fit.intercept + p.eval(*t) - v).abs() < 1e-6);
        }
    }

    #[test]
    fn never_worse_than_zero_or_warm_start() {
        let times = phase_grid(90);
        let r: Vec<f64> = times.iter().map(|&t| (3.0 * t).sin() + 0.2 * (7.0 * t).cos()).collect();
        let f = fitter(90);
        let fit = f.fit(&r, None).unwrap();
        let tss: f64 = {
            let m = r.iter().sum::<f64>() / 90.0;
            r.iter().map(|v| (v - m).powi(2)).sum()
        };
        assert!(fit.rss <= tss);
        let warm = (1.234, 0.3);
        let at_warm = f.profile(&r, warm.0, warm.1);
        let fit = f.fit(&r, Some(warm)).unwrap();
        assert!(fit.rss <= at_warm.rss);
    }

    #[test]
    fn wave_relation_of_linear_coefficients() {
        let times = phase_grid(64);
        let f = fitter(64);
        let r: Vec<f64> = times.iter().map(|&t| 2.0 * (1.0 + (t - 0.5)).cos()).collect();
        let p = f.profile(&r, 0.5, 1.0);
        let a = p.delta.hypot(p.gamma);
        let beta = (-p.gamma).atan2(p.delta);
        assert!((a - 2.0).abs() < 1e-10);
        assert!(angle::dist(beta, 1.0) < 1e-10);
    }

    #[test]
    fn simplex_finds_quadratic_minimum() {
        let (x, v) = nelder_mead(|x| (x[0] - 1.0).powi(2) + 3.0 * (x[1] + 2.0).powi(2), [0.0, 0.0], [0.5, 0.5], 400);
        assert!((x[0] - 1.0).abs() < 1e-6 && (x[1] + 2.0).abs() < 1e-6, "{x:?} {v}");
    }

    #[test]
    fn rejects_short_or_mismatched_input() {
        assert!(SingleFitter::new(&[0.0, 1.0, 2.0], 10, &[0.5], 10).is_err());
        assert!(fitter(50).fit(&[0.0; 49], None).is_err());
    }
}
