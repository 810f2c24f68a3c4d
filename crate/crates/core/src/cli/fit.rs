use std::io::Write;
use std::path::Path;

use log::{info, warn};
use rayon::prelude::*;
use serde::Serialize;

use crate::error::Error;
use crate::fitting::{fit_beat, FitReport};
use crate::ingest::{extract_beats, read_annotations, read_signal, RawRecord, SegmentedBeat, Window};
use crate::marks::{fiducial_marks, MarkKind};
use crate::metrics::export_features;
use crate::model::WaveLabel;

use super::{check_fs, create_dir, create_file, load_config, CliError, CliResult, FitArgs, EXIT_NOTHING_FITTED};

#[derive(Debug, Serialize)]
struct WindowOut {
    start: usize,
    end: usize,
    qrs: usize,
}

impl From<Window> for WindowOut {
    fn from(w: Window) -> Self {
        Self {
            start: w.start,
            end: w.end,
            qrs: w.qrs,
        }
    }
}

#[derive(Debug, Serialize)]
struct MarkOut {
    label: WaveLabel,
    kind: MarkKind,
    phase: f64,
    sample: usize,
    value: f64,
}

#[derive(Debug, Serialize)]
struct BeatOut<'a> {
    record_id: &'a str,
    beat_index: usize,
    window: WindowOut,
    report: &'a FitReport,
    marks: Vec<MarkOut>,
}

fn open(path: &Path) -> CliResult<std::fs::File> {
    std::fs::File::open(path).map_err(|e| {
        Error::Parse {
            path: path.to_path_buf(),
            message: e.to_string(),
        }
        .into()
    })
}

fn marks_of(report: &FitReport, window: Window) -> Vec<MarkOut> {
    fiducial_marks(&report.params)
        .into_iter()
        .map(|m| MarkOut {
            label: m.label,
            kind: m.kind,
            phase: m.phase,
            sample: window.sample_of(m.phase),
            value: m.value,
        })
        .collect()
}

pub(super) fn run(a: &FitArgs, stdout: &mut dyn Write) -> CliResult {
    check_fs(a.fs)?;
    let cfg = load_config(a.config.as_deref())?;
    let id = a
        .signal
        .file_stem()
        .map(|s| s.to_string_lossy().into_owned())
        .unwrap_or_default();
    let record = RawRecord::new(read_signal(open(&a.signal)?, &a.signal)?, a.fs, id)?;
    let ann = read_annotations(open(&a.annotations)?, &a.annotations)?;
    let beats = extract_beats(&record, &ann, !a.no_detrend)?;
    info!("{}: {} beats segmented", record.record_id, beats.len());

    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(a.jobs)
        .build()
        .map_err(|e| CliError::usage(format!("cannot start {} workers: {e}", a.jobs)))?;
    let fitted: Vec<(&SegmentedBeat, Option<FitReport>)> = pool.install(|| {
        beats
            .par_iter()
            .map(|b| match fit_beat(&b.beat, &cfg) {
                Ok(r) => (b, Some(r)),
                Err(e) => {
                    warn!("{}: beat {} not fitted: {e}", record.record_id, b.index);
                    (b, None)
                }
            })
            .collect()
    });
    let fitted: Vec<(&SegmentedBeat, FitReport)> = fitted.into_iter().filter_map(|(b, r)| r.map(|r| (b, r))).collect();

    create_dir(&a.out)?;
    let mut marks = csv::Writer::from_writer(create_file(&a.out.join("marks.csv"))?);
    marks.write_record(["beat", "label", "kind", "sample", "phase", "value"]).map_err(Error::from)?;
    for (b, report) in &fitted {
        let out = BeatOut {
            record_id: &record.record_id,
            beat_index: b.index,
            window: b.window.into(),
            report,
            marks: marks_of(report, b.window),
        };
        let mut json = create_file(&a.out.join(format!("beat_{:04}.json", b.index)))?;
        serde_json::to_writer_pretty(&mut json, &out).map_err(Error::from)?;
        writeln!(json)?;
        json.flush()?;
        for m in &out.marks {
            marks
                .write_record([
                    b.index.to_string(),
                    m.label.to_string(),
                    m.kind.as_str().to_string(),
                    m.sample.to_string(),
                    m.phase.to_string(),
                    m.value.to_string(),
                ])
                .map_err(Error::from)?;
        }
        write_curve(&a.out.join(format!("beat_{:04}_curve.csv", b.index)), b, report)?;
    }
    marks.flush()?;

    let mut refs = csv::Writer::from_writer(create_file(&a.out.join("reference_marks.csv"))?);
    refs.write_record(["beat", "label", "sample"]).map_err(Error::from)?;
    for b in &beats {
        for (l, s) in &b.reference {
            refs.write_record([b.index.to_string(), l.to_string(), s.to_string()])
                .map_err(Error::from)?;
        }
    }
    refs.flush()?;

    let features = create_file(&a.out.join("features.csv"))?;
    export_features(
        features,
        fitted.iter().map(|(b, r)| (record.record_id.as_str(), b.index, r)),
    )?;

    writeln!(
        stdout,
        "{}: fitted {} of {} beats into {}",
        record.record_id,
        fitted.len(),
        beats.len(),
        a.out.display()
    )?;
    if fitted.is_empty() {
        return Err(CliError {
            code: EXIT_NOTHING_FITTED,
            message: "no beat could be fitted".into(),
        });
    }
    Ok(())
}

fn write_curve(path: &Path, b: &SegmentedBeat, report: &FitReport) -> CliResult {
    let mut w = csv::Writer::from_writer(create_file(path)?);
    let mut header = vec!["t".to_string(), "observed".into(), "fitted".into()];
    header.extend(WaveLabel::ALL.iter().map(|l| l.to_string()));
    w.write_record(&header).map_err(Error::from)?;
    for (&t, &y) in b.beat.times.iter().zip(&b.beat.values) {
        let mut row = vec![t.to_string(), y.to_string(), report.params.eval(t).to_string()];
        for l in WaveLabel::ALL {
            row.push(report.params.waves.get(l).map_or_else(String::new, |p| p.eval(t).to_string()));
        }
        w.write_record(&row).map_err(Error::from)?;
    }
    w.flush()?;
    Ok(())
}
