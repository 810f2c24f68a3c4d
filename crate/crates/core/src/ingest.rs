//! From a raw single-lead record and its QRS annotations to phase-normalised
//! beats.

use std::collections::BTreeMap;
use std::f64::consts::TAU;
use std::io::Read;
use std::path::Path;

use log::info;

use crate::error::{Error, Result};
use crate::model::{Beat, WaveLabel, MIN_BEAT_SAMPLES};

/// Fraction of the preceding RR interval included before the QRS.
pub const PRE_QRS_FRACTION: f64 = 0.4;
/// Fraction of the following RR interval included after the QRS.
pub const POST_QRS_FRACTION: f64 = 0.6;
/// Share of the beat used at each end to anchor the trend line.
pub const DETREND_ANCHOR_FRACTION: f64 = 0.05;

#[derive(Debug, Clone, PartialEq)]
pub struct RawRecord {
    pub samples: Vec<f64>,
    pub fs: f64,
    pub record_id: String,
}

impl RawRecord {
    pub fn new(samples: Vec<f64>, fs: f64, record_id: impl Into<String>) -> Result<Self> {
        if !(fs.is_finite() && fs > 0.0) {
            return Err(Error::InvalidArgument(format!("sampling frequency must be positive, got {fs}")));
        }
        if samples.is_empty() {
            return Err(Error::InvalidArgument("record has no samples".into()));
        }
        if samples.iter().any(|v| !v.is_finite()) {
            return Err(Error::InvalidArgument("record contains non-finite samples".into()));
        }
        Ok(Self {
            samples,
            fs,
            record_id: record_id.into(),
        })
    }

    pub fn from_csv(path: impl AsRef<Path>, fs: f64) -> Result<Self> {
        let path = path.as_ref();
        let id = path
            .file_stem()
            .map(|s| s.to_string_lossy().into_owned())
            .unwrap_or_default();
        let file = std::fs::File::open(path)?;
        Self::new(read_signal(file, path)?, fs, id)
    }

    pub fn len(&self) -> usize {
        self.samples.len()
    }

    pub fn is_empty(&self) -> bool {
        self.samples.is_empty()
    }
}

/// QRS positions plus optional per-wave reference marks, all as sample
/// indices into the record.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct QrsAnnotations {
    pub indices: Vec<usize>,
    pub reference: BTreeMap<WaveLabel, Vec<usize>>,
}

impl QrsAnnotations {
    pub fn new(indices: Vec<usize>) -> Result<Self> {
        let a = Self {
            indices,
            reference: BTreeMap::new(),
        };
        a.validate(None)?;
        Ok(a)
    }

    /// Reads `sample,label` rows. `QRS` rows drive segmentation, wave labels
    /// become reference marks, anything else is ignored.
    pub fn from_csv(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let file = std::fs::File::open(path)?;
        read_annotations(file, path)
    }

    pub fn validate(&self, record_len: Option<usize>) -> Result<()> {
        if !self.indices.windows(2).all(|w| w[0] < w[1]) {
            return Err(Error::InvalidArgument("QRS annotations must be strictly increasing".into()));
        }
        if let (Some(n), Some(&last)) = (record_len, self.indices.last()) {
            if last >= n {
                return Err(Error::InvalidArgument(format!(
                    "QRS annotation at sample {last} lies beyond the record ({n} samples)"
                )));
            }
        }
        Ok(())
    }

    /// The reference mark of `label` belonging to beat `beat`: inside the
    /// window, on the expected side of the QRS, closest to it.
    pub fn reference_for(&self, label: WaveLabel, beat: usize, window: Window) -> Option<usize> {
        let q = self.indices[beat];
        self.reference
            .get(&label)?
            .iter()
            .copied()
            .filter(|&s| s >= window.start && s <= window.end)
            .filter(|&s| match label {
                WaveLabel::P | WaveLabel::Q => s <= q,
                WaveLabel::S | WaveLabel::T => s >= q,
                WaveLabel::R => true,
            })
            .min_by_key(|&s| s.abs_diff(q))
    }
}

/// Inclusive sample range of one beat.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Window {
    pub start: usize,
    pub end: usize,
    pub qrs: usize,
}

impl Window {
    pub fn len(&self) -> usize {
        self.end - self.start + 1
    }

    pub fn is_empty(&self) -> bool {
        false
    }

    /// Phase of a record sample on this window's grid.
    pub fn phase_of(&self, sample: usize) -> f64 {
        (sample as f64 - self.start as f64) * TAU / self.len() as f64
    }

    /// Nearest record sample of a phase on this window's grid.
    pub fn sample_of(&self, phase: f64) -> usize {
        let x = self.start as f64 + phase * self.len() as f64 / TAU;
        (x + 0.5).floor().max(0.0) as usize
    }
}

fn round_half_up(x: f64) -> i64 {
    (x + 0.5).floor() as i64
}

/// `[q − 0.4·RR₋, q + 0.6·RR₊]` for annotation `beat_index`, rounded half-up
/// and clipped to the record. The first and last annotations have no
/// neighbour on one side and are refused.
pub fn segment(record_len: usize, ann: &QrsAnnotations, beat_index: usize) -> Result<Window> {
    let skip = |reason: &str| Error::Segmentation {
        beat: beat_index,
        reason: reason.into(),
    };
    let idx = &ann.indices;
    if beat_index >= idx.len() {
        return Err(skip("no such annotation"));
    }
    if beat_index == 0 {
        return Err(skip("first beat has no preceding RR interval"));
    }
    if beat_index + 1 == idx.len() {
        return Err(skip("last beat has no following RR interval"));
    }
    let (prev, q, next) = (idx[beat_index - 1], idx[beat_index], idx[beat_index + 1]);
    if q >= record_len {
        return Err(skip("annotation lies beyond the record"));
    }
    let rr_pre = (q - prev) as f64;
    let rr_post = (next - q) as f64;
    let last = record_len as i64 - 1;
    let start = round_half_up(q as f64 - PRE_QRS_FRACTION * rr_pre).clamp(0, last) as usize;
    let end = round_half_up(q as f64 + POST_QRS_FRACTION * rr_post).clamp(0, last) as usize;
    Ok(Window { start, end, qrs: q })
}

/// Maps the window's samples onto phases `i·2π/n`.
pub fn normalize_phase(record: &RawRecord, window: Window) -> Result<Beat> {
    let n = window.len();
    if n < MIN_BEAT_SAMPLES {
        return Err(Error::InvalidBeat(format!(
            "window [{}, {}] has {n} samples; at least {MIN_BEAT_SAMPLES} are needed",
            window.start, window.end
        )));
    }
    if window.end >= record.len() {
        return Err(Error::InvalidArgument("window extends beyond the record".into()));
    }
    let times = (0..n).map(|i| i as f64 * TAU / n as f64).collect();
    let values = record.samples[window.start..=window.end].to_vec();
    Beat::new(times, values, record.fs, window.phase_of(window.qrs))
}

/// Removes the linear trend that makes the median of the last 5% of samples
/// equal the median of the first 5%.
///
/// The difference of the two medians falls strictly as the slope grows, so
/// the slope is found by bisection and is unique. Adding a ramp to a beat
/// therefore changes nothing in the output but a constant, and detrending
/// twice is the same as once.
pub fn detrend(beat: &Beat) -> Beat {
    let n = beat.len();
    let m = ((DETREND_ANCHOR_FRACTION * n as f64).ceil() as usize).clamp(1, n / 2);
    let gap = |s: f64| {
        let anchor = |range: std::ops::Range<usize>| {
            let v: Vec<f64> = range.map(|i| beat.values[i] - s * beat.times[i]).collect();
            median(v)
        };
        anchor(n - m..n) - anchor(0..m)
    };

    let span = beat.times[n - m] - beat.times[m - 1];
    let mut guess = gap(0.0) / span;
    let (mut lo, mut hi);
    // grow a bracket around the first guess
    let mut width = guess.abs().max(1e-12);
    loop {
        lo = guess - width;
        hi = guess + width;
        if gap(lo) >= 0.0 && gap(hi) <= 0.0 {
            break;
        }
        width *= 2.0;
        if !width.is_finite() {
            guess = 0.0;
            lo = 0.0;
            hi = 0.0;
            break;
        }
    }
    for _ in 0..200 {
        let mid = 0.5 * (lo + hi);
        if mid <= lo || mid >= hi {
            break;
        }
        if gap(mid) > 0.0 {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    let slope = if lo == hi { guess } else { 0.5 * (lo + hi) };
    Beat {
        values: beat
            .values
            .iter()
            .zip(&beat.times)
            .map(|(v, t)| v - slope * t)
            .collect(),
        ..beat.clone()
    }
}

fn median(mut v: Vec<f64>) -> f64 {
    v.sort_by(f64::total_cmp);
    let k = v.len();
    if k % 2 == 1 {
        v[k / 2]
    } else {
        0.5 * (v[k / 2 - 1] + v[k / 2])
    }
}

/// A beat cut from a record, with its position and reference marks.
#[derive(Debug, Clone, PartialEq)]
pub struct SegmentedBeat {
    /// Index of the QRS annotation the beat is built around.
    pub index: usize,
    pub window: Window,
    pub beat: Beat,
    /// Reference marks as record sample indices.
    pub reference: BTreeMap<WaveLabel, usize>,
}

/// Every beat of the record that can be segmented; the others are logged
/// and skipped.
pub fn extract_beats(record: &RawRecord, ann: &QrsAnnotations, detrended: bool) -> Result<Vec<SegmentedBeat>> {
    ann.validate(Some(record.len()))?;
    let mut out = Vec::new();
    for i in 0..ann.indices.len() {
        let window = match segment(record.len(), ann, i) {
            Ok(w) => w,
            Err(e) => {
                info!("{}: skipping beat: {e}", record.record_id);
                continue;
            }
        };
        let beat = match normalize_phase(record, window) {
            Ok(b) => b,
            Err(e) => {
                info!("{}: skipping beat {i}: {e}", record.record_id);
                continue;
            }
        };
        let beat = if detrended { detrend(&beat) } else { beat };
        let reference = WaveLabel::ALL
            .into_iter()
            .filter_map(|l| ann.reference_for(l, i, window).map(|s| (l, s)))
            .collect();
        out.push(SegmentedBeat {
            index: i,
            window,
            beat,
            reference,
        });
    }
    Ok(out)
}

fn csv_reader<R: Read>(input: R) -> csv::Reader<R> {
    csv::ReaderBuilder::new()
        .has_headers(false)
        .trim(csv::Trim::All)
        .flexible(true)
        .comment(Some(b'#'))
        .from_reader(input)
}

/// One voltage per row; a non-numeric first row is taken as a header.
pub fn read_signal<R: Read>(input: R, origin: &Path) -> Result<Vec<f64>> {
    let mut out = Vec::new();
    for (row, rec) in csv_reader(input).records().enumerate() {
        let rec = rec?;
        let field = rec.get(0).unwrap_or("");
        match field.parse::<f64>() {
            Ok(v) if v.is_finite() => out.push(v),
            _ if row == 0 => {}
            _ => {
                return Err(Error::Parse {
                    path: origin.to_path_buf(),
                    message: format!("row {}: not a number: {field:?}", row + 1),
                })
            }
        }
    }
    Ok(out)
}

/// `sample,label` rows; a non-numeric first row is taken as a header.
pub fn read_annotations<R: Read>(input: R, origin: &Path) -> Result<QrsAnnotations> {
    let mut ann = QrsAnnotations::default();
    for (row, rec) in csv_reader(input).records().enumerate() {
        let rec = rec?;
        let bad = |message: String| Error::Parse {
            path: origin.to_path_buf(),
            message: format!("row {}: {message}", row + 1),
        };
        let field = rec.get(0).unwrap_or("");
        let sample = match field.parse::<usize>() {
            Ok(s) => s,
            Err(_) if row == 0 => continue,
            Err(_) => return Err(bad(format!("not a sample index: {field:?}"))),
        };
        let label = rec.get(1).ok_or_else(|| bad("missing label".into()))?;
        if label.eq_ignore_ascii_case("QRS") {
            ann.indices.push(sample);
        } else if let Ok(l) = label.parse::<WaveLabel>() {
            ann.reference.entry(l).or_default().push(sample);
        }
    }
    ann.indices.sort_unstable();
    for v in ann.reference.values_mut() {
        v.sort_unstable();
    }
    ann.validate(None)?;
    Ok(ann)
}
