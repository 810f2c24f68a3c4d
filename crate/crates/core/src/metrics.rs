//! Delineation scoring and feature export.

use std::fmt;
use std::io::{Read, Write};
use std::ops::{Add, AddAssign};

use serde::Serialize;

use crate::error::{Error, Result};
use crate::fitting::FitReport;
use crate::model::{FmmEcgParams, WaveLabel};
use crate::wave::WaveParams;

pub const DEFAULT_TOLERANCE_MS: f64 = 75.0;

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize)]
pub struct DetectionCounts {
    pub tp: u64,
    pub fp: u64,
    #[serde(rename = "fn")]
    pub fn_: u64,
}

impl DetectionCounts {
    pub const fn new(tp: u64, fp: u64, fn_: u64) -> Self {
        Self { tp, fp, fn_ }
    }

    /// Beats carrying a reference mark.
    pub fn beats(&self) -> u64 {
        self.tp + self.fn_
    }

    pub fn se(&self) -> Option<f64> {
        ratio(self.tp, self.tp + self.fn_)
    }

    pub fn ppv(&self) -> Option<f64> {
        ratio(self.tp, self.tp + self.fp)
    }

    pub fn der(&self) -> Option<f64> {
        ratio(self.fp + self.fn_, self.tp + self.fn_)
    }

    pub fn f1(&self) -> Option<f64> {
        ratio(2 * self.tp, 2 * self.tp + self.fp + self.fn_)
    }
}

impl Add for DetectionCounts {
    type Output = Self;

    fn add(self, o: Self) -> Self {
        Self::new(self.tp + o.tp, self.fp + o.fp, self.fn_ + o.fn_)
    }
}

impl AddAssign for DetectionCounts {
    fn add_assign(&mut self, o: Self) {
        *self = *self + o;
    }
}

impl std::iter::Sum for DetectionCounts {
    fn sum<I: Iterator<Item = Self>>(iter: I) -> Self {
        iter.fold(Self::default(), Add::add)
    }
}

fn ratio(num: u64, den: u64) -> Option<f64> {
    (den > 0).then(|| num as f64 / den as f64)
}

/// Scores one beat's mark for one wave. Distances are in seconds; `tol` is
/// inclusive. A prediction too far from an existing reference counts once
/// as FP and once as FN.
pub fn score_mark(predicted: Option<f64>, reference: Option<f64>, tol: f64) -> DetectionCounts {
    match (predicted, reference) {
        (Some(p), Some(r)) if within(p - r, tol) => DetectionCounts::new(1, 0, 0),
        (Some(_), Some(_)) => DetectionCounts::new(0, 1, 1),
        (Some(_), None) => DetectionCounts::new(0, 1, 0),
        (None, Some(_)) => DetectionCounts::new(0, 0, 1),
        (None, None) => DetectionCounts::default(),
    }
}

// absorbs rounding in the ms → s → samples conversions
fn within(d: f64, tol: f64) -> bool {
    d.abs() <= tol * (1.0 + 1e-9)
}

/// Matches per-beat marks given as phases on beats of `n` samples at `fs`.
///
/// `pairs[i]` holds the predicted and reference phase of one beat.
pub fn match_marks(pairs: &[(Option<f64>, Option<f64>)], n: usize, fs: Option<f64>, tol_ms: f64) -> Result<DetectionCounts> {
    let fs = fs.filter(|f| f.is_finite() && *f > 0.0).ok_or(Error::MissingSamplingFrequency)?;
    let to_s = |phase: f64| phase * n as f64 / (std::f64::consts::TAU * fs);
    Ok(pairs
        .iter()
        .map(|&(p, r)| score_mark(p.map(to_s), r.map(to_s), tol_ms / 1000.0))
        .sum())
}

/// Same as [`match_marks`] with marks given as sample indices.
pub fn match_samples(pairs: &[(Option<i64>, Option<i64>)], fs: Option<f64>, tol_ms: f64) -> Result<DetectionCounts> {
    let fs = fs.filter(|f| f.is_finite() && *f > 0.0).ok_or(Error::MissingSamplingFrequency)?;
    Ok(pairs
        .iter()
        .map(|&(p, r)| score_mark(p.map(|s| s as f64 / fs), r.map(|s| s as f64 / fs), tol_ms / 1000.0))
        .sum())
}

/// Percentages with two decimals; `None` where a denominator is zero.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct Summary {
    pub se: Option<f64>,
    pub ppv: Option<f64>,
    pub der: Option<f64>,
    pub f1: Option<f64>,
}

pub fn summarize(c: &DetectionCounts) -> Summary {
    Summary {
        se: percent(c.tp, c.tp + c.fn_),
        ppv: percent(c.tp, c.tp + c.fp),
        der: percent(c.fp + c.fn_, c.tp + c.fn_),
        f1: percent(2 * c.tp, 2 * c.tp + c.fp + c.fn_),
    }
}

/// `100·num/den` rounded half-up to two decimals, exactly.
fn percent(num: u64, den: u64) -> Option<f64> {
    if den == 0 {
        return None;
    }
    let (num, den) = (num as u128, den as u128);
    let hundredths = (num * 20_000 + den) / (2 * den);
    Some(hundredths as f64 / 100.0)
}

fn cell(v: Option<f64>) -> String {
    v.map_or_else(|| "undefined".to_string(), |x| format!("{x:.2}"))
}

/// One row of a detection report.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ReportRow {
    pub label: WaveLabel,
    pub counts: DetectionCounts,
}

const HEADER: [&str; 9] = ["Wave", "No. beats", "TP", "FP", "FN", "Se", "PPV", "DER", "F1"];

fn row_cells(r: &ReportRow) -> [String; 9] {
    let s = summarize(&r.counts);
    [
        r.label.to_string(),
        r.counts.beats().to_string(),
        r.counts.tp.to_string(),
        r.counts.fp.to_string(),
        r.counts.fn_.to_string(),
        cell(s.se),
        cell(s.ppv),
        cell(s.der),
        cell(s.f1),
    ]
}

/// Aligned plain-text table.
pub struct ReportTable<'a>(pub &'a [ReportRow]);

impl fmt::Display for ReportTable<'_> {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let rows: Vec<[String; 9]> = self.0.iter().map(row_cells).collect();
        let mut widths = HEADER.map(str::len);
        for r in &rows {
            for (w, c) in widths.iter_mut().zip(r) {
                *w = (*w).max(c.len());
            }
        }
        for (i, h) in HEADER.iter().enumerate() {
            let sep = if i == 0 { "" } else { "  " };
            if i == 0 {
                write!(f, "{h:<w$}", w = widths[i])?;
            } else {
                write!(f, "{sep}{h:>w$}", w = widths[i])?;
            }
        }
        writeln!(f)?;
        for r in &rows {
            for (i, c) in r.iter().enumerate() {
                if i == 0 {
                    write!(f, "{c:<w$}", w = widths[i])?;
                } else {
                    write!(f, "  {c:>w$}", w = widths[i])?;
                }
            }
            writeln!(f)?;
        }
        Ok(())
    }
}

pub fn write_report_csv<W: Write>(out: W, rows: &[ReportRow]) -> Result<()> {
    let mut w = csv::Writer::from_writer(out);
    w.write_record(HEADER)?;
    for r in rows {
        w.write_record(row_cells(r))?;
    }
    w.flush()?;
    Ok(())
}

const WAVE_FIELDS: [&str; 4] = ["A", "alpha", "beta", "omega"];

pub fn feature_header() -> Vec<String> {
    let mut h = vec!["record_id".to_string(), "beat_index".to_string()];
    for l in WaveLabel::ALL {
        for f in WAVE_FIELDS {
            h.push(format!("{f}_{l}"));
        }
    }
    h.push("M".into());
    h.push("R2".into());
    h
}

/// One row of the feature table.
#[derive(Debug, Clone, PartialEq)]
pub struct FeatureRow {
    pub record_id: String,
    pub beat_index: usize,
    pub params: FmmEcgParams,
    pub r2: f64,
}

/// Writes one row per beat: identifiers, `A, α, β, ω` per wave (empty for
/// absent waves), intercept and R². Numbers are written in full precision.
pub fn export_features<'a, W: Write>(
    out: W,
    rows: impl IntoIterator<Item = (&'a str, usize, &'a FitReport)>,
) -> Result<()> {
    let mut w = csv::Writer::from_writer(out);
    w.write_record(feature_header())?;
    for (id, beat, report) in rows {
        let mut rec = vec![id.to_string(), beat.to_string()];
        for l in WaveLabel::ALL {
            match report.params.waves.get(l) {
                Some(p) => rec.extend([p.amplitude, p.alpha, p.beta, p.omega].map(|v| v.to_string())),
                None => rec.extend(std::iter::repeat_n(String::new(), 4)),
            }
        }
        rec.push(report.params.intercept.to_string());
        rec.push(report.r2.to_string());
        w.write_record(&rec)?;
    }
    w.flush()?;
    Ok(())
}

pub fn read_features<R: Read>(input: R) -> Result<Vec<FeatureRow>> {
    let mut r = csv::Reader::from_reader(input);
    let expected = feature_header();
    if r.headers()?.iter().ne(expected.iter().map(String::as_str)) {
        return Err(Error::InvalidArgument("feature table has unexpected columns".into()));
    }
    let num = |s: &str| {
        s.parse::<f64>()
            .map_err(|_| Error::InvalidArgument(format!("not a number in feature table: {s:?}")))
    };
    let mut out = Vec::new();
    for rec in r.records() {
        let rec = rec?;
        let beat_index = rec[1]
            .parse()
            .map_err(|_| Error::InvalidArgument(format!("bad beat index {:?}", &rec[1])))?;
        let mut params = FmmEcgParams::new(num(&rec[22])?);
        for (k, l) in WaveLabel::ALL.into_iter().enumerate() {
            let f = &rec.iter().skip(2 + 4 * k).take(4).collect::<Vec<_>>();
            if f.iter().all(|s| s.is_empty()) {
                continue;
            }
            let w = WaveParams {
                amplitude: num(f[0])?,
                alpha: num(f[1])?,
                beta: num(f[2])?,
                omega: num(f[3])?,
            };
            params.waves.set(l, Some(w));
        }
        out.push(FeatureRow {
            record_id: rec[0].to_string(),
            beat_index,
            params,
            r2: num(&rec[23])?,
        });
    }
    Ok(out)
}
