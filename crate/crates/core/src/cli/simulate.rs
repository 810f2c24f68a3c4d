use std::f64::consts::TAU;
use std::io::Write;

use serde::Serialize;

use crate::error::Error;
use crate::marks::{fiducial_marks, MarkKind};
use crate::model::{FmmEcgParams, WaveLabel, MIN_BEAT_SAMPLES};
use crate::synth::{add_noise, Preset};

use super::{check_fs, create_dir, create_file, CliError, CliResult, SimulateArgs};

#[derive(Debug, Serialize)]
struct TruthMark {
    label: WaveLabel,
    kind: MarkKind,
    phase: f64,
    sample: usize,
}

#[derive(Debug, Serialize)]
struct TruthBeat {
    beat_index: usize,
    start: usize,
    qrs: usize,
    marks: Vec<TruthMark>,
}

#[derive(Debug, Serialize)]
struct Truth<'a> {
    preset: Option<&'a str>,
    params: &'a FmmEcgParams,
    fs: f64,
    samples_per_beat: usize,
    noise_sd: f64,
    seed: u64,
    beats: Vec<TruthBeat>,
}

fn params_of(a: &SimulateArgs) -> CliResult<FmmEcgParams> {
    let m = match (&a.preset, &a.params) {
        (Some(name), _) => name.parse::<Preset>().map_err(|e| CliError::usage(e.to_string()))?.params(),
        (None, Some(path)) => {
            let text = std::fs::read_to_string(path).map_err(|e| Error::Parse {
                path: path.clone(),
                message: e.to_string(),
            })?;
            serde_json::from_str(&text).map_err(|e| Error::Parse {
                path: path.clone(),
                message: e.to_string(),
            })?
        }
        (None, None) => return Err(CliError::usage("one of --preset or --params is required")),
    };
    m.validate()?;
    if m.waves.get(WaveLabel::R).is_none() {
        return Err(Error::MissingRWave.into());
    }
    Ok(m)
}

fn round_half_up(x: f64) -> usize {
    (x + 0.5).floor().max(0.0) as usize
}

pub(super) fn run(a: &SimulateArgs, stdout: &mut dyn Write) -> CliResult {
    check_fs(a.fs)?;
    if a.beats == 0 {
        return Err(CliError::usage("--beats must be at least 1"));
    }
    if !(a.noise_sd.is_finite() && a.noise_sd >= 0.0) {
        return Err(CliError::usage(format!("--noise-sd must be nonnegative, got {}", a.noise_sd)));
    }
    if !(a.rr.is_finite() && a.rr > 0.0) {
        return Err(CliError::usage(format!("--rr must be positive, got {}", a.rr)));
    }
    let n = round_half_up(a.rr * a.fs);
    if n < MIN_BEAT_SAMPLES {
        return Err(CliError::usage(format!(
            "RR of {} s at {} Hz gives {n} samples per beat; at least {MIN_BEAT_SAMPLES} are needed",
            a.rr, a.fs
        )));
    }
    let m = params_of(a)?;
    let r = *m.waves.get(WaveLabel::R).expect("checked above");

    // one guard beat at each end so that every written beat has two neighbours
    let total = a.beats + 2;
    let mut signal: Vec<f64> = (0..total * n)
        .map(|i| m.eval((i % n) as f64 * TAU / n as f64))
        .collect();
    if a.noise_sd > 0.0 {
        add_noise(&mut signal, a.noise_sd, a.seed);
    }
    let to_sample = |k: usize, phase: f64| k * n + round_half_up(phase * n as f64 / TAU) ;
    let marks = fiducial_marks(&m);
    let beats: Vec<TruthBeat> = (0..total)
        .map(|k| TruthBeat {
            beat_index: k,
            start: k * n,
            qrs: to_sample(k, r.crest_time()),
            marks: marks
                .iter()
                .map(|f| TruthMark {
                    label: f.label,
                    kind: f.kind,
                    phase: f.phase,
                    sample: to_sample(k, f.phase),
                })
                .collect(),
        })
        .collect();

    create_dir(&a.out)?;
    let mut w = create_file(&a.out.join("signal.csv"))?;
    writeln!(w, "value")?;
    for v in &signal {
        writeln!(w, "{v}")?;
    }
    w.flush()?;

    let mut ann = csv::Writer::from_writer(create_file(&a.out.join("annotations.csv"))?);
    let mut truth_marks = csv::Writer::from_writer(create_file(&a.out.join("truth_marks.csv"))?);
    ann.write_record(["sample", "label"]).map_err(Error::from)?;
    truth_marks.write_record(["beat", "label", "sample"]).map_err(Error::from)?;
    for b in &beats {
        let guard = b.beat_index == 0 || b.beat_index == total - 1;
        let mut rows: Vec<(usize, String)> = vec![(b.qrs, "QRS".into())];
        for mk in &b.marks {
            rows.push((mk.sample, mk.label.to_string()));
            if !guard {
                truth_marks
                    .write_record([b.beat_index.to_string(), mk.label.to_string(), mk.sample.to_string()])
                    .map_err(Error::from)?;
            }
        }
        rows.sort();
        for (s, l) in rows {
            ann.write_record([s.to_string(), l]).map_err(Error::from)?;
        }
    }
    ann.flush()?;
    truth_marks.flush()?;

    let truth = Truth {
        preset: a.preset.as_deref(),
        params: &m,
        fs: a.fs,
        samples_per_beat: n,
        noise_sd: a.noise_sd,
        seed: a.seed,
        beats,
    };
    let mut t = create_file(&a.out.join("truth.json"))?;
    serde_json::to_writer_pretty(&mut t, &truth).map_err(Error::from)?;
    writeln!(t)?;
    t.flush()?;

    writeln!(
        stdout,
        "wrote {} beats of {n} samples (plus 2 guard beats) to {}",
        a.beats,
        a.out.display()
    )?;
    Ok(())
}
