//! Line-oriented landmark files and detector output documents.
//!
//! A landmark file is one JSON record per line: a `meta` header followed by
//! `obs` records in non-decreasing frame order.
//!
//! ```text
//! {"type":"meta","fps":25.0,"width":1920,"height":1080}
//! {"type":"obs","frame":0,"bbox":[x,y,w,h],"conf":0.98,"landmarks":[[x0,y0],...,[x67,y67]]}
//! ```

use std::io::{self, BufRead, Write};

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::detector::LipSignal;
use crate::landmarks::{GeometryError, LandmarkSet, Point, NUM_LANDMARKS};
use crate::types::{BoundingBox, FaceObservation, SpeakingInterval, TrackSummary, VideoMeta};

/// Fractional digits kept for serialized pixel coordinates.
pub const COORD_DECIMALS: i32 = 3;

/// Largest tolerated mismatch between a stored `time_s` and `frame / fps`.
const TIME_TOLERANCE_S: f64 = 1e-6;

#[derive(Debug, Error)]
pub enum FormatError {
    #[error("line {line}: parse error: {reason}")]
    Parse { line: usize, reason: String },
    #[error("line {line}: schema error: {reason}")]
    Schema { line: usize, reason: String },
    #[error("line {line}: frame {frame} follows frame {previous}")]
    Order { line: usize, frame: u64, previous: u64 },
    #[error(transparent)]
    Io(#[from] io::Error),
}

impl FormatError {
    pub fn line(&self) -> Option<usize> {
        match self {
            FormatError::Parse { line, .. } | FormatError::Schema { line, .. } | FormatError::Order { line, .. } => {
                Some(*line)
            }
            FormatError::Io(_) => None,
        }
    }
}

/// Rounds a pixel coordinate to the serialized precision.
pub fn quantize(v: f64) -> f64 {
    let scale = 10f64.powi(COORD_DECIMALS);
    (v * scale).round() / scale + 0.0
}

/// Copy of `obs` with every pixel quantity on the serialized grid, so that a
/// write/read cycle reproduces it exactly.
pub fn quantize_observation(obs: &FaceObservation) -> Result<FaceObservation, GeometryError> {
    let b = obs.bbox;
    Ok(FaceObservation {
        bbox: BoundingBox {
            x: quantize(b.x),
            y: quantize(b.y),
            w: quantize(b.w),
            h: quantize(b.h),
        },
        landmarks: obs.landmarks.map(|p| Point::new(quantize(p.x), quantize(p.y)))?,
        ..obs.clone()
    })
}

#[derive(Deserialize)]
struct RawRecord {
    #[serde(rename = "type")]
    kind: String,
    fps: Option<f64>,
    width: Option<u32>,
    height: Option<u32>,
    frame_count: Option<u64>,
    frame: Option<u64>,
    time_s: Option<f64>,
    bbox: Option<[f64; 4]>,
    conf: Option<f64>,
    landmarks: Option<Vec<[f64; 2]>>,
}

#[derive(Serialize)]
struct MetaRecord {
    #[serde(rename = "type")]
    kind: &'static str,
    fps: f64,
    width: u32,
    height: u32,
    #[serde(skip_serializing_if = "Option::is_none")]
    frame_count: Option<u64>,
}

#[derive(Serialize)]
struct ObsRecord {
    #[serde(rename = "type")]
    kind: &'static str,
    frame: u64,
    bbox: [f64; 4],
    conf: f64,
    landmarks: Vec<[f64; 2]>,
}

fn parse_line(line: usize, text: &str) -> Result<RawRecord, FormatError> {
    serde_json::from_str::<RawRecord>(text).map_err(|e| {
        let reason = e.to_string();
        match e.classify() {
            serde_json::error::Category::Data => FormatError::Schema { line, reason },
            _ => FormatError::Parse { line, reason },
        }
    })
}

fn schema(line: usize, reason: impl Into<String>) -> FormatError {
    FormatError::Schema {
        line,
        reason: reason.into(),
    }
}

fn meta_from_raw(line: usize, raw: RawRecord) -> Result<VideoMeta, FormatError> {
    if raw.kind != "meta" {
        return Err(schema(
            line,
            format!("expected meta header, found record type {:?}", raw.kind),
        ));
    }
    let meta = VideoMeta {
        fps: raw.fps.ok_or_else(|| schema(line, "meta header lacks fps"))?,
        width: raw.width.ok_or_else(|| schema(line, "meta header lacks width"))?,
        height: raw.height.ok_or_else(|| schema(line, "meta header lacks height"))?,
        frame_count: raw.frame_count,
    };
    meta.validate().map_err(|e| schema(line, e.to_string()))?;
    Ok(meta)
}

fn obs_from_raw(line: usize, meta: &VideoMeta, raw: RawRecord) -> Result<FaceObservation, FormatError> {
    if raw.kind != "obs" {
        return Err(schema(
            line,
            format!("expected obs record, found record type {:?}", raw.kind),
        ));
    }
    let frame = raw.frame.ok_or_else(|| schema(line, "obs record lacks frame"))?;
    let [x, y, w, h] = raw.bbox.ok_or_else(|| schema(line, "obs record lacks bbox"))?;
    let confidence = raw.conf.ok_or_else(|| schema(line, "obs record lacks conf"))?;
    let pairs = raw
        .landmarks
        .ok_or_else(|| schema(line, "obs record lacks landmarks"))?;

    if !(0.0..=1.0).contains(&confidence) {
        return Err(schema(line, format!("confidence {confidence} outside [0, 1]")));
    }
    if !(w >= 0.0 && h >= 0.0) {
        return Err(schema(line, format!("bbox has negative size {w}x{h}")));
    }
    if pairs.len() != NUM_LANDMARKS {
        return Err(schema(
            line,
            format!("expected {NUM_LANDMARKS} landmark pairs, got {}", pairs.len()),
        ));
    }
    // Landmarks of partially visible faces may leave the image, but never by
    // more than one image size.
    let (fw, fh) = (meta.width as f64, meta.height as f64);
    for (i, [px, py]) in pairs.iter().enumerate() {
        if !(-fw..=2.0 * fw).contains(px) || !(-fh..=2.0 * fh).contains(py) {
            return Err(schema(
                line,
                format!(
                    "landmark {i} at ({px}, {py}) is far outside the {}x{} frame",
                    meta.width, meta.height
                ),
            ));
        }
    }
    let landmarks = LandmarkSet::new(pairs.into_iter().map(|[x, y]| Point::new(x, y)).collect())
        .map_err(|e| schema(line, format!("frame {frame}: {e}")))?;

    let derived = meta.frame_time(frame);
    let time_s = match raw.time_s {
        Some(t) if (t - derived).abs() > TIME_TOLERANCE_S => {
            return Err(schema(
                line,
                format!("time_s {t} disagrees with frame {frame} at {} fps", meta.fps),
            ));
        }
        Some(t) => t,
        None => derived,
    };
    Ok(FaceObservation {
        frame,
        time_s,
        bbox: BoundingBox { x, y, w, h },
        confidence,
        landmarks,
    })
}

/// Streaming reader over a landmark file.
///
/// The header is consumed by [`LandmarkReader::new`]; observations are then
/// yielded one line at a time.
pub struct LandmarkReader<R> {
    source: R,
    meta: VideoMeta,
    line: usize,
    buf: String,
    last_frame: Option<u64>,
    failed: bool,
}

impl<R: BufRead> LandmarkReader<R> {
    pub fn new(mut source: R) -> Result<Self, FormatError> {
        let mut buf = String::new();
        let mut line = 0;
        loop {
            buf.clear();
            if source.read_line(&mut buf)? == 0 {
                return Err(schema(line.max(1), "missing meta header"));
            }
            line += 1;
            if !buf.trim().is_empty() {
                break;
            }
        }
        let meta = meta_from_raw(line, parse_line(line, buf.trim())?)?;
        Ok(Self {
            source,
            meta,
            line,
            buf,
            last_frame: None,
            failed: false,
        })
    }

    pub fn meta(&self) -> &VideoMeta {
        &self.meta
    }

    fn next_observation(&mut self) -> Result<Option<FaceObservation>, FormatError> {
        loop {
            self.buf.clear();
            if self.source.read_line(&mut self.buf)? == 0 {
                return Ok(None);
            }
            self.line += 1;
            let text = self.buf.trim();
            if text.is_empty() {
                continue;
            }
            let raw = parse_line(self.line, text)?;
            let obs = obs_from_raw(self.line, &self.meta, raw)?;
            if let Some(previous) = self.last_frame {
                if obs.frame < previous {
                    return Err(FormatError::Order {
                        line: self.line,
                        frame: obs.frame,
                        previous,
                    });
                }
            }
            self.last_frame = Some(obs.frame);
            return Ok(Some(obs));
        }
    }
}

impl<R: BufRead> Iterator for LandmarkReader<R> {
    type Item = Result<FaceObservation, FormatError>;

    fn next(&mut self) -> Option<Self::Item> {
        if self.failed {
            return None;
        }
        let item = self.next_observation().transpose();
        if matches!(item, Some(Err(_))) {
            self.failed = true;
        }
        item
    }
}

/// Reads a whole landmark file, stopping at the first invalid line.
pub fn read_landmark_file<R: BufRead>(source: R) -> Result<(VideoMeta, Vec<FaceObservation>), FormatError> {
    let reader = LandmarkReader::new(source)?;
    let meta = *reader.meta();
    let observations = reader.collect::<Result<Vec<_>, _>>()?;
    Ok((meta, observations))
}

/// Writes the header line of a landmark file.
pub fn write_meta<W: Write>(out: &mut W, meta: &VideoMeta) -> io::Result<()> {
    let record = MetaRecord {
        kind: "meta",
        fps: meta.fps,
        width: meta.width,
        height: meta.height,
        frame_count: meta.frame_count,
    };
    serde_json::to_writer(&mut *out, &record)?;
    out.write_all(b"\n")
}

/// Writes one observation line. Pixel values are rounded to
/// [`COORD_DECIMALS`] fractional digits.
pub fn write_observation<W: Write>(out: &mut W, obs: &FaceObservation) -> io::Result<()> {
    let b = obs.bbox;
    let record = ObsRecord {
        kind: "obs",
        frame: obs.frame,
        bbox: [quantize(b.x), quantize(b.y), quantize(b.w), quantize(b.h)],
        conf: obs.confidence,
        landmarks: obs
            .landmarks
            .points()
            .iter()
            .map(|p| [quantize(p.x), quantize(p.y)])
            .collect(),
    };
    serde_json::to_writer(&mut *out, &record)?;
    out.write_all(b"\n")
}

pub fn write_landmark_file<W: Write>(mut out: W, meta: &VideoMeta, observations: &[FaceObservation]) -> io::Result<()> {
    write_meta(&mut out, meta)?;
    for obs in observations {
        write_observation(&mut out, obs)?;
    }
    out.flush()
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct IntervalRecord {
    pub start_frame: u64,
    pub end_frame: u64,
    pub start_s: f64,
    pub end_s: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PersonRecord {
    pub person_id: u64,
    pub first_frame: u64,
    pub last_frame: u64,
    pub intervals: Vec<IntervalRecord>,
}

/// Detection results: one entry per person, each with its speaking intervals.
#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
pub struct ResultsDocument {
    pub persons: Vec<PersonRecord>,
}

impl ResultsDocument {
    /// Groups `intervals` under their tracks; persons are ordered by id and
    /// intervals by start frame. Intervals without a matching track are ignored.
    pub fn assemble(tracks: &[TrackSummary], intervals: &[SpeakingInterval]) -> Self {
        let mut persons: Vec<PersonRecord> = tracks
            .iter()
            .map(|t| PersonRecord {
                person_id: t.person_id,
                first_frame: t.first_frame,
                last_frame: t.last_frame,
                intervals: Vec::new(),
            })
            .collect();
        persons.sort_by_key(|p| p.person_id);
        for iv in intervals {
            if let Ok(i) = persons.binary_search_by_key(&iv.person_id, |p| p.person_id) {
                persons[i].intervals.push(IntervalRecord {
                    start_frame: iv.start_frame,
                    end_frame: iv.end_frame,
                    start_s: iv.start_s,
                    end_s: iv.end_s,
                });
            }
        }
        for p in &mut persons {
            p.intervals.sort_by_key(|iv| (iv.start_frame, iv.end_frame));
        }
        Self { persons }
    }
}

pub fn write_results<W: Write>(mut out: W, tracks: &[TrackSummary], intervals: &[SpeakingInterval]) -> io::Result<()> {
    let doc = ResultsDocument::assemble(tracks, intervals);
    serde_json::to_writer_pretty(&mut out, &doc)?;
    out.write_all(b"\n")?;
    out.flush()
}

pub fn read_results<R: BufRead>(source: R) -> serde_json::Result<ResultsDocument> {
    serde_json::from_reader(source)
}

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
pub struct TrackReport {
    pub tracks: Vec<TrackSummary>,
}

pub fn write_track_report<W: Write>(mut out: W, tracks: &[TrackSummary]) -> io::Result<()> {
    let mut tracks = tracks.to_vec();
    tracks.sort_by_key(|t| (t.first_frame, t.person_id));
    serde_json::to_writer_pretty(&mut out, &TrackReport { tracks })?;
    out.write_all(b"\n")?;
    out.flush()
}

pub const SIGNAL_COLUMNS: [&str; 10] = [
    "frame", "time_s", "t", "b", "t_smooth", "b_smooth", "d", "e", "c", "valid",
];

/// Per-frame dump of a lip signal as CSV. Invalid frames keep their row with
/// empty signal cells and `valid=0`.
pub fn write_debug_signals<W: Write>(mut out: W, signal: &LipSignal, fps: f64) -> io::Result<()> {
    writeln!(out, "{}", SIGNAL_COLUMNS.join(","))?;
    for i in 0..signal.len() {
        let frame = signal.first_frame + i as u64;
        let time_s = frame as f64 / fps;
        if signal.valid[i] {
            writeln!(
                out,
                "{frame},{time_s},{},{},{},{},{},{},{},1",
                signal.t[i], signal.b[i], signal.t_smooth[i], signal.b_smooth[i], signal.d[i], signal.e[i], signal.c[i],
            )?;
        } else {
            writeln!(out, "{frame},{time_s},,,,,,,,0")?;
        }
    }
    out.flush()
}
