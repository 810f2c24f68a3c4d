use proptest::prelude::*;

use fmm_ecg::angle;
use fmm_ecg::fitting::{backfit, SingleFitter};
use fmm_ecg::ingest::{detrend, normalize_phase, segment, QrsAnnotations, RawRecord};
use fmm_ecg::metrics::{match_samples, DetectionCounts};
use fmm_ecg::synth::{jittered, noise_sd_for_snr, synth_beat, Preset};
use fmm_ecg::{fiducial_marks, fit_beat, Beat, IStepConfig};

fn beat_from(preset: usize, seed: u64, snr_db: Option<f64>) -> Beat {
    let m = jittered(Preset::ALL[preset], seed);
    let clean = synth_beat(&m, 250, 250.0, 0.0, 0).unwrap();
    match snr_db {
        Some(db) => synth_beat(&m, 250, 250.0, noise_sd_for_snr(&clean.values, db), seed).unwrap(),
        None => clean,
    }
}

fn any_beat() -> impl Strategy<Value = Beat> {
    (0..Preset::ALL.len(), any::<u64>(), prop::option::of(15.0f64..40.0))
        .prop_map(|(p, seed, snr)| beat_from(p, seed, snr))
}

proptest! {
    #![proptest_config(ProptestConfig { cases: 12, ..ProptestConfig::default() })]

    #[test]
    fn reports_keep_label_order_and_pv_adds_up(beat in any_beat()) {
        if let Ok(r) = fit_beat(&beat, &IStepConfig::default()) {
            prop_assert!(r.params.is_circularly_ordered());
            let pv: f64 = r.pv_per_component.iter().map(|c| c.pv).sum();
            prop_assert!((pv - r.r2).abs() < 1e-9, "sum PV {} vs R2 {}", pv, r.r2);
            prop_assert!(r.params.validate().is_ok());
        }
    }

    #[test]
    fn fitting_is_deterministic(beat in any_beat()) {
        let cfg = IStepConfig::default();
        let a = fit_beat(&beat, &cfg).map_err(|e| e.to_string());
        let b = fit_beat(&beat, &cfg).map_err(|e| e.to_string());
        prop_assert_eq!(a, b);
    }

    #[test]
    fn fitting_is_scale_equivariant(beat in any_beat(), log_c in -3.0f64..3.0) {
        let c = 10f64.powf(log_c);
        let cfg = IStepConfig::default();
        let (Ok(a), Ok(b)) = (fit_beat(&beat, &cfg), fit_beat(&beat.scaled(c), &cfg)) else {
            return Ok(());
        };
        let close = |x: f64, y: f64| (x - y).abs() <= 1e-9 * x.abs().max(y.abs()).max(1e-300);
        prop_assert!(close(c * a.params.intercept, b.params.intercept) || (a.params.intercept * c - b.params.intercept).abs() < 1e-12 * c);
        prop_assert!(close(c * a.params.sigma2.sqrt(), b.params.sigma2.sqrt()));
        prop_assert_eq!(a.r2, b.r2);
        prop_assert_eq!(a.assigned_from_component, b.assigned_from_component);
        for (pa, pb) in a.pv_per_component.iter().zip(&b.pv_per_component) {
            prop_assert_eq!(pa.pv, pb.pv);
        }
        for (l, w) in a.params.waves.iter() {
            let v = b.params.waves.get(l).unwrap();
            prop_assert!(close(c * w.amplitude, v.amplitude));
            prop_assert_eq!((w.alpha, w.beta, w.omega), (v.alpha, v.beta, v.omega));
        }
        for (fa, fb) in fiducial_marks(&a.params).iter().zip(fiducial_marks(&b.params).iter()) {
            prop_assert_eq!(fa.phase, fb.phase);
        }
    }

    #[test]
    fn backfit_rss_never_rises(beat in any_beat(), k in 1usize..8, passes in 1usize..4) {
        let cfg = IStepConfig::default();
        let fitter = SingleFitter::from_config(&beat.times, &cfg).unwrap();
        let bf = backfit(&fitter, &beat, k, &[], passes).unwrap();
        for w in bf.rss_trace.windows(2) {
            prop_assert!(w[1] <= w[0] * (1.0 + 1e-9), "{} -> {}", w[0], w[1]);
        }
        let pv: f64 = bf.components.iter().map(|c| c.pv).sum();
        prop_assert!((pv - bf.r2()).abs() < 1e-9);
    }
}

#[test]
fn noiseless_recovery_tightens_as_noise_vanishes() {
    let cfg = IStepConfig::default();
    let m = jittered(Preset::Normal, 3);
    let clean = synth_beat(&m, 250, 250.0, 0.0, 0).unwrap();
    let err = |sd: f64| {
        let beat = synth_beat(&m, 250, 250.0, sd, 11).unwrap();
        let r = fit_beat(&beat, &cfg).unwrap();
        m.waves
            .iter()
            .map(|(l, w)| {
                let g = r.params.waves.get(l).unwrap();
                angle::dist(g.alpha, w.alpha) + (g.amplitude / w.amplitude - 1.0).abs()
            })
            .fold(0.0, f64::max)
    };
    let sd = noise_sd_for_snr(&clean.values, 40.0);
    let (e0, e1, e2) = (err(0.0), err(sd / 10.0), err(sd));
    assert!(e0 < 1e-6, "{e0}");
    assert!(e1 < e2, "{e1} vs {e2}");
}

fn increasing(len: std::ops::Range<usize>) -> impl Strategy<Value = Vec<usize>> {
    (10usize..200, prop::collection::vec(60usize..400, len)).prop_map(|(first, gaps)| {
        let mut v = vec![first];
        for g in gaps {
            v.push(v.last().unwrap() + g);
        }
        v
    })
}

proptest! {
    #[test]
    fn consecutive_windows_share_a_boundary(idx in increasing(3..12)) {
        let len = idx.last().unwrap() + 1;
        let ann = QrsAnnotations::new(idx.clone()).unwrap();
        let windows: Vec<_> = (1..idx.len() - 1).map(|i| segment(len, &ann, i).unwrap()).collect();
        for w in windows.windows(2) {
            prop_assert_eq!(w[0].end, w[1].start);
        }
        for (w, &q) in windows.iter().zip(&idx[1..]) {
            prop_assert!(w.start < q && q < w.end);
        }
    }

    #[test]
    fn normalized_phases_increase(idx in increasing(3..6), beat in 1usize..2) {
        let len = idx.last().unwrap() + 1;
        let rec = RawRecord::new((0..len).map(|i| (i as f64 * 0.01).sin()).collect(), 360.0, "r").unwrap();
        let ann = QrsAnnotations::new(idx).unwrap();
        let b = normalize_phase(&rec, segment(len, &ann, beat).unwrap()).unwrap();
        prop_assert!(b.times.windows(2).all(|t| t[0] < t[1]));
        prop_assert!(b.times[0] == 0.0 && *b.times.last().unwrap() < std::f64::consts::TAU);
    }

    #[test]
    fn detrend_commutes_with_constants(
        values in prop::collection::vec(-5.0f64..5.0, 40..300),
        c in -100.0f64..100.0,
    ) {
        let n = values.len();
        let times = (0..n).map(|i| i as f64 * std::f64::consts::TAU / n as f64).collect();
        let beat = Beat::new(times, values, 250.0, 1.0).unwrap();
        let shifted = Beat { values: beat.values.iter().map(|v| v + c).collect(), ..beat.clone() };
        let (a, b) = (detrend(&beat), detrend(&shifted));
        for (x, y) in a.values.iter().zip(&b.values) {
            prop_assert!((x + c - y).abs() < 1e-9 * (1.0 + c.abs()), "{} + {} vs {}", x, c, y);
        }
    }

    #[test]
    fn der_splits_into_misses_and_false_alarms(tp in 1u64..10_000, fp in 0u64..10_000, fn_ in 0u64..10_000) {
        let c = DetectionCounts::new(tp, fp, fn_);
        let rhs = (1.0 - c.se().unwrap()) + fp as f64 / (tp + fn_) as f64;
        prop_assert!((c.der().unwrap() - rhs).abs() < 1e-12);
    }

    #[test]
    fn f1_ignores_common_scale(tp in 0u64..10_000, fp in 0u64..10_000, fn_ in 0u64..10_000, k in 1u64..1000) {
        let a = DetectionCounts::new(tp, fp, fn_);
        let b = DetectionCounts::new(k * tp, k * fp, k * fn_);
        match (a.f1(), b.f1()) {
            (Some(x), Some(y)) => prop_assert!((x - y).abs() < 1e-14),
            (x, y) => prop_assert_eq!(x, y),
        }
    }

    #[test]
    fn tolerance_boundary_is_inclusive(fs in prop::sample::select(vec![100.0, 250.0, 360.0, 500.0, 1000.0]), off in 0i64..60) {
        // offsets of whole samples; exactly tol is a hit
        let tol_ms = off as f64 * 1000.0 / fs;
        let hit = match_samples(&[(Some(off), Some(0)), (Some(-off), Some(0))], Some(fs), tol_ms).unwrap();
        prop_assert_eq!(hit, DetectionCounts::new(2, 0, 0));
        let miss = match_samples(&[(Some(off + 1), Some(0))], Some(fs), tol_ms).unwrap();
        prop_assert_eq!(miss, DetectionCounts::new(0, 1, 1));
    }

    #[test]
    fn aggregation_is_order_free(parts in prop::collection::vec((0u64..50, 0u64..50, 0u64..50), 0..20)) {
        let counts: Vec<DetectionCounts> = parts.iter().map(|&(a, b, c)| DetectionCounts::new(a, b, c)).collect();
        let fwd: DetectionCounts = counts.iter().copied().sum();
        let rev: DetectionCounts = counts.iter().rev().copied().sum();
        prop_assert_eq!(fwd, rev);
    }
}
