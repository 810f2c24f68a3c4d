use std::collections::{BTreeMap, BTreeSet};
use std::io::{Read, Write};
use std::path::Path;

use crate::error::{Error, Result};
use crate::metrics::{match_samples, write_report_csv, ReportRow, ReportTable};
use crate::model::WaveLabel;

use super::{check_fs, create_file, CliResult, EvaluateArgs};

/// One row of a marks file.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct MarkRow {
    pub beat: usize,
    pub label: WaveLabel,
    pub sample: i64,
}

/// Reads the `beat`, `label` and `sample` columns of a marks CSV; other
/// columns are ignored. Labels other than P, Q, R, S, T are an error.
pub fn read_marks<R: Read>(input: R, origin: &Path) -> Result<Vec<MarkRow>> {
    let bad = |message: String| Error::Parse {
        path: origin.to_path_buf(),
        message,
    };
    let mut r = csv::ReaderBuilder::new().trim(csv::Trim::All).from_reader(input);
    let headers = r.headers()?.clone();
    let col = |name: &str| {
        headers
            .iter()
            .position(|h| h.eq_ignore_ascii_case(name))
            .ok_or_else(|| bad(format!("missing column {name:?}")))
    };
    let (cb, cl, cs) = (col("beat")?, col("label")?, col("sample")?);
    let mut rows = Vec::new();
    let mut unknown = BTreeSet::new();
    for (i, rec) in r.records().enumerate() {
        let rec = rec?;
        let field = |c: usize| rec.get(c).unwrap_or("");
        let beat = field(cb)
            .parse()
            .map_err(|_| bad(format!("row {}: bad beat {:?}", i + 2, field(cb))))?;
        let sample = field(cs)
            .parse()
            .map_err(|_| bad(format!("row {}: bad sample {:?}", i + 2, field(cs))))?;
        match field(cl).parse::<WaveLabel>() {
            Ok(label) => rows.push(MarkRow { beat, label, sample }),
            Err(_) => {
                unknown.insert(field(cl).to_string());
            }
        }
    }
    if !unknown.is_empty() {
        return Err(Error::UnknownLabels(unknown.into_iter().collect()));
    }
    Ok(rows)
}

fn keyed(rows: &[MarkRow], origin: &Path) -> Result<BTreeMap<(WaveLabel, usize), i64>> {
    let mut out = BTreeMap::new();
    for r in rows {
        if out.insert((r.label, r.beat), r.sample).is_some() {
            return Err(Error::Parse {
                path: origin.to_path_buf(),
                message: format!("more than one {} mark for beat {}", r.label, r.beat),
            });
        }
    }
    Ok(out)
}

/// Table rows for P and T plus any other label present in either file.
pub(crate) fn evaluate(
    predicted: &BTreeMap<(WaveLabel, usize), i64>,
    reference: &BTreeMap<(WaveLabel, usize), i64>,
    fs: f64,
    tol_ms: f64,
) -> Result<Vec<ReportRow>> {
    let mut labels: BTreeSet<WaveLabel> = [WaveLabel::P, WaveLabel::T].into();
    labels.extend(predicted.keys().chain(reference.keys()).map(|k| k.0));
    labels
        .into_iter()
        .map(|label| {
            let beats: BTreeSet<usize> = predicted
                .keys()
                .chain(reference.keys())
                .filter(|k| k.0 == label)
                .map(|k| k.1)
                .collect();
            let pairs: Vec<_> = beats
                .iter()
                .map(|&b| (predicted.get(&(label, b)).copied(), reference.get(&(label, b)).copied()))
                .collect();
            Ok(ReportRow {
                label,
                counts: match_samples(&pairs, Some(fs), tol_ms)?,
            })
        })
        .collect()
}

pub(super) fn run(a: &EvaluateArgs, stdout: &mut dyn Write) -> CliResult {
    check_fs(a.fs)?;
    if !(a.tol_ms.is_finite() && a.tol_ms >= 0.0) {
        return Err(super::CliError::usage(format!("--tol-ms must be nonnegative, got {}", a.tol_ms)));
    }
    let load = |p: &Path| -> Result<_> {
        let f = std::fs::File::open(p).map_err(|e| Error::Parse {
            path: p.to_path_buf(),
            message: e.to_string(),
        })?;
        keyed(&read_marks(f, p)?, p)
    };
    let predicted = load(&a.predicted)?;
    let reference = load(&a.reference)?;
    let rows = evaluate(&predicted, &reference, a.fs, a.tol_ms)?;
    write!(stdout, "{}", ReportTable(&rows))?;
    if let Some(path) = &a.csv {
        write_report_csv(create_file(path)?, &rows)?;
    }
    Ok(())
}
