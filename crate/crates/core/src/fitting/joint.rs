//! Joint polish of an additive model: Levenberg–Marquardt over the intercept
//! and every wave's `(δ, γ, α, ω)` at once.
//!
//! Backfitting moves one wave at a time and crawls when waves overlap (Q, R
//! and S sit on top of each other). Once the waves are labelled, a few
//! Gauss–Newton steps on the whole model finish the job.

use nalgebra::{DMatrix, DVector};

use crate::angle;
use crate::wave::WaveParams;

const PER_WAVE: usize = 4;

/// Returns the polished `(intercept, waves, rss)`. The result never has a
/// higher RSS than the input; `omega` stays in `[omega_floor, 1]`.
pub fn refine_joint(
    times: &[f64],
    values: &[f64],
    intercept: f64,
    waves: &[WaveParams],
    omega_floor: f64,
    max_iter: usize,
) -> (f64, Vec<WaveParams>, f64) {
    let n = times.len();
    let p = 1 + PER_WAVE * waves.len();
    let mut theta = pack(intercept, waves);
    let mut resid = DVector::zeros(n);
    let mut rss = residuals(times, values, &theta, &mut resid);
    let start_rss = rss;
    let mut lambda = 1e-3;
    let mut jac = DMatrix::zeros(n, p);
    let mut trial_resid = DVector::zeros(n);
    let mut stalls = 0;

    for _ in 0..max_iter {
        jacobian(times, &theta, &mut jac);
        let jtj = jac.transpose() * &jac;
        let jtr = jac.transpose() * &resid;
        let mut accepted = false;
        for _ in 0..12 {
            let mut a = jtj.clone();
            for d in 0..p {
                a[(d, d)] += lambda * jtj[(d, d)].max(1e-300);
            }
            let Some(chol) = a.cholesky() else {
                lambda *= 10.0;
                continue;
            };
            let step = chol.solve(&jtr);
            let mut trial = &theta + &step;
            clamp(&mut trial, omega_floor);
            let trial_rss = residuals(times, values, &trial, &mut trial_resid);
            if trial_rss < rss {
                let gain = (rss - trial_rss) / rss.max(f64::MIN_POSITIVE);
                theta = trial;
                std::mem::swap(&mut resid, &mut trial_resid);
                rss = trial_rss;
                lambda = (lambda / 3.0).max(1e-12);
                accepted = true;
                stalls = if gain < 4.0 * f64::EPSILON { stalls + 1 } else { 0 };
                break;
            }
            lambda *= 4.0;
        }
        if !accepted || stalls >= 2 || rss == 0.0 {
            break;
        }
    }

    if rss <= start_rss {
        let (m, w) = unpack(&theta);
        (m, w, rss)
    } else {
        (intercept, waves.to_vec(), start_rss)
    }
}

// layout: [M, δ₁, γ₁, α₁, ω₁, δ₂, ...]
fn pack(intercept: f64, waves: &[WaveParams]) -> DVector<f64> {
    let mut v = Vec::with_capacity(1 + PER_WAVE * waves.len());
    v.push(intercept);
    for w in waves {
        v.push(w.amplitude * w.beta.cos());
        v.push(-w.amplitude * w.beta.sin());
        v.push(w.alpha);
        v.push(w.omega);
    }
    DVector::from_vec(v)
}

fn unpack(theta: &DVector<f64>) -> (f64, Vec<WaveParams>) {
    let waves = theta.as_slice()[1..]
        .chunks(PER_WAVE)
        .map(|c| WaveParams {
            amplitude: c[0].hypot(c[1]),
            alpha: angle::wrap(c[2]),
            beta: angle::wrap((-c[1]).atan2(c[0])),
            omega: c[3],
        })
        .collect();
    (theta[0], waves)
}

fn clamp(theta: &mut DVector<f64>, omega_floor: f64) {
    let k = (theta.len() - 1) / PER_WAVE;
    for j in 0..k {
        let w = &mut theta[1 + PER_WAVE * j + 3];
        *w = w.clamp(omega_floor, 1.0);
    }
}

fn residuals(times: &[f64], values: &[f64], theta: &DVector<f64>, out: &mut DVector<f64>) -> f64 {
    let k = (theta.len() - 1) / PER_WAVE;
    let mut total = 0.0;
    for (i, &t) in times.iter().enumerate() {
        let mut model = theta[0];
        for j in 0..k {
            let b = 1 + PER_WAVE * j;
            let (delta, gamma, alpha, omega) = (theta[b], theta[b + 1], theta[b + 2], theta[b + 3]);
            let phi = crate::wave::warp(t, alpha, omega);
            let (s, c) = phi.sin_cos();
            model += delta * c + gamma * s;
        }
        let r = values[i] - model;
        out[i] = r;
        total += r * r;
    }
    total
}

fn jacobian(times: &[f64], theta: &DVector<f64>, jac: &mut DMatrix<f64>) {
    let k = (theta.len() - 1) / PER_WAVE;
    for (i, &t) in times.iter().enumerate() {
        jac[(i, 0)] = 1.0;
        for j in 0..k {
            let b = 1 + PER_WAVE * j;
            let (delta, gamma, alpha, omega) = (theta[b], theta[b + 1], theta[b + 2], theta[b + 3]);
            let (su, cu) = (0.5 * (t - alpha)).sin_cos();
            let rho = cu * cu + omega * omega * su * su;
            let phi = 2.0 * (omega * su).atan2(cu);
            let (s, c) = phi.sin_cos();
            let dphase = -delta * s + gamma * c;
            jac[(i, b)] = c;
            jac[(i, b + 1)] = s;
            jac[(i, b + 2)] = dphase * (-omega / rho);
            jac[(i, b + 3)] = dphase * (2.0 * su * cu / rho);
        }
    }
}
