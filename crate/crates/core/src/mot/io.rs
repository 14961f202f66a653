use std::fs::File;
use std::io::{BufWriter, Write};
use std::path::{Path, PathBuf};

use thiserror::Error;

use crate::geometry::{round2, BoundingBox};
use crate::track::{Detection, LabeledBox, LabeledFrames};

#[derive(Debug, Error)]
pub enum MotError {
    #[error("cannot access {path}: {source}")]
    Io { path: PathBuf, source: std::io::Error },
    #[error("{path}:{line}: {message}")]
    Parse { path: PathBuf, line: u64, message: String },
}

/// One sequence: per-frame detections for frames `1..=frame_count`,
/// optionally with ground truth over the same range.
#[derive(Debug, Clone, PartialEq)]
pub struct SequenceBundle {
    pub name: String,
    pub frame_count: u32,
    pub detections: Vec<Vec<Detection>>,
    pub ground_truth: Option<LabeledFrames>,
    pub frame_rate: f64,
}

impl SequenceBundle {
    pub fn detections_at(&self, frame: u32) -> &[Detection] {
        if frame == 0 {
            return &[];
        }
        self.detections.get(frame as usize - 1).map_or(&[], Vec::as_slice)
    }

    /// Extends detections and ground truth with empty frames.
    pub fn pad_to(&mut self, frame_count: u32) {
        if frame_count > self.frame_count {
            self.frame_count = frame_count;
        }
        self.detections.resize(self.frame_count as usize, Vec::new());
        if let Some(gt) = self.ground_truth.as_mut() {
            gt.pad_to(self.frame_count);
        }
    }
}

struct Row {
    line: u64,
    frame: u32,
    id: i64,
    bbox: BoundingBox,
    conf: f64,
}

fn parse_error(path: &Path, line: u64, message: impl Into<String>) -> MotError {
    MotError::Parse { path: path.to_path_buf(), line, message: message.into() }
}

fn read_rows(path: &Path) -> Result<Vec<Row>, MotError> {
    let mut reader = csv::ReaderBuilder::new()
        .has_headers(false)
        .flexible(true)
        .trim(csv::Trim::All)
        .from_path(path)
        .map_err(|e| csv_error(path, e))?;
    let mut rows = Vec::new();
    for rec in reader.records() {
        let rec = rec.map_err(|e| csv_error(path, e))?;
        let line = rec.position().map_or(0, |p| p.line());
        if rec.iter().all(str::is_empty) {
            continue;
        }
        if rec.len() < 7 {
            return Err(parse_error(path, line, format!("expected at least 7 fields, found {}", rec.len())));
        }
        let num = |i: usize, what: &str| -> Result<f64, MotError> {
            let s = &rec[i];
            s.parse::<f64>()
                .ok()
                .filter(|v| v.is_finite())
                .ok_or_else(|| parse_error(path, line, format!("bad {what} {s:?}")))
        };
        let frame = num(0, "frame")?;
        if frame < 1.0 || frame.fract() != 0.0 || frame > u32::MAX as f64 {
            return Err(parse_error(path, line, format!("bad frame {:?}", &rec[0])));
        }
        let id = num(1, "id")?;
        if id.fract() != 0.0 {
            return Err(parse_error(path, line, format!("bad id {:?}", &rec[1])));
        }
        let bbox = BoundingBox::new(num(2, "bb_left")?, num(3, "bb_top")?, num(4, "bb_width")?, num(5, "bb_height")?)
            .map_err(|e| parse_error(path, line, e.to_string()))?;
        rows.push(Row { line, frame: frame as u32, id: id as i64, bbox, conf: num(6, "conf")? });
    }
    Ok(rows)
}

fn csv_error(path: &Path, e: csv::Error) -> MotError {
    let line = e.position().map_or(0, |p| p.line());
    match e.into_kind() {
        csv::ErrorKind::Io(source) => MotError::Io { path: path.to_path_buf(), source },
        csv::ErrorKind::Utf8 { .. } => parse_error(path, line, "invalid UTF-8"),
        other => parse_error(path, line, format!("{other:?}")),
    }
}

/// Name of the sequence a file belongs to: the file stem, or for the
/// usual `SEQ/det/det.txt` and `SEQ/gt/gt.txt` layouts, the first parent
/// directory with a different name.
pub fn sequence_name(path: &Path) -> String {
    let stem = path.file_stem().map_or_else(String::new, |s| s.to_string_lossy().into_owned());
    if stem != "det" && stem != "gt" {
        return stem;
    }
    path.ancestors()
        .skip(1)
        .filter_map(|a| a.file_name())
        .map(|n| n.to_string_lossy().into_owned())
        .find(|n| n != "det" && n != "gt")
        .unwrap_or(stem)
}

/// Reads a detection file. The bundle spans frames up to the last frame
/// that has a detection; see [`sequence_name`] for the name.
pub fn read_detections(path: &Path) -> Result<SequenceBundle, MotError> {
    let mut detections: Vec<Vec<Detection>> = Vec::new();
    for r in read_rows(path)? {
        let idx = r.frame as usize - 1;
        if detections.len() <= idx {
            detections.resize(idx + 1, Vec::new());
        }
        detections[idx].push(Detection { frame: r.frame, bbox: r.bbox, score: r.conf });
    }
    Ok(SequenceBundle {
        name: sequence_name(path),
        frame_count: detections.len() as u32,
        detections,
        ground_truth: None,
        frame_rate: 30.0,
    })
}

fn read_labeled_filtered(path: &Path, skip_flagged: bool) -> Result<LabeledFrames, MotError> {
    let mut frames = LabeledFrames::default();
    let mut seen = std::collections::HashSet::new();
    for r in read_rows(path)? {
        if skip_flagged && r.conf == 0.0 {
            continue;
        }
        if r.id < 1 {
            return Err(parse_error(path, r.line, format!("id must be positive, got {}", r.id)));
        }
        if !seen.insert((r.frame, r.id)) {
            return Err(parse_error(path, r.line, format!("id {} appears twice in frame {}", r.id, r.frame)));
        }
        frames.push(r.frame, LabeledBox { id: r.id as u64, bbox: r.bbox });
    }
    frames.sort();
    Ok(frames)
}

/// Reads a track or ground-truth file with positive, per-frame unique ids.
pub fn read_labeled(path: &Path) -> Result<LabeledFrames, MotError> {
    read_labeled_filtered(path, false)
}

/// Like [`read_labeled`], but rows whose seventh field is 0 (marked
/// "ignore" in benchmark ground truth) are skipped.
pub fn read_ground_truth(path: &Path) -> Result<LabeledFrames, MotError> {
    read_labeled_filtered(path, true)
}

fn create(path: &Path) -> Result<BufWriter<File>, MotError> {
    File::create(path)
        .map(BufWriter::new)
        .map_err(|source| MotError::Io { path: path.to_path_buf(), source })
}

fn fmt_box(b: &BoundingBox) -> String {
    format!("{:.2},{:.2},{:.2},{:.2}", round2(b.x()), round2(b.y()), round2(b.w()), round2(b.h()))
}

/// Writes labeled boxes sorted by frame then id, conf 1, two decimals.
pub fn write_labeled(path: &Path, frames: &LabeledFrames) -> Result<(), MotError> {
    let io = |source| MotError::Io { path: path.to_path_buf(), source };
    let mut w = create(path)?;
    for (f, boxes) in frames.iter() {
        let mut boxes = boxes.to_vec();
        boxes.sort_by_key(|b| b.id);
        for b in boxes {
            writeln!(w, "{f},{},{},1,-1,-1,-1", b.id, fmt_box(&b.bbox)).map_err(io)?;
        }
    }
    w.flush().map_err(io)
}

pub fn write_tracks(path: &Path, tracks: &LabeledFrames) -> Result<(), MotError> {
    write_labeled(path, tracks)
}

/// Writes detections with id −1, in frame order and input order within a
/// frame.
pub fn write_detections(path: &Path, detections: &[Vec<Detection>]) -> Result<(), MotError> {
    let io = |source| MotError::Io { path: path.to_path_buf(), source };
    let mut w = create(path)?;
    for d in detections.iter().flatten() {
        writeln!(w, "{},-1,{},{:.2},-1,-1,-1", d.frame, fmt_box(&d.bbox), round2(d.score)).map_err(io)?;
    }
    w.flush().map_err(io)
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::fs;

    fn file(text: &str) -> tempfile::NamedTempFile {
        let mut f = tempfile::NamedTempFile::new().unwrap();
        f.write_all(text.as_bytes()).unwrap();
        f
    }

    #[test]
    fn sequence_names() {
        assert_eq!(sequence_name(Path::new("data/TUD-Campus/det/det.txt")), "TUD-Campus");
        assert_eq!(sequence_name(Path::new("runs/sim3/det.txt")), "sim3");
        assert_eq!(sequence_name(Path::new("runs/clip.txt")), "clip");
        assert_eq!(sequence_name(Path::new("det.txt")), "det");
    }

    #[test]
    fn parses_detection_line() {
        let f = file("1,-1,10.5,20,50,100,0.9,-1,-1,-1\n");
        let b = read_detections(f.path()).unwrap();
        assert_eq!(b.frame_count, 1);
        let d = b.detections_at(1)[0];
        assert_eq!(d.frame, 1);
        assert_eq!(d.bbox, BoundingBox::new(10.5, 20.0, 50.0, 100.0).unwrap());
        assert_eq!(d.score, 0.9);
    }

    #[test]
    fn empty_file_has_no_frames() {
        let f = file("");
        let b = read_detections(f.path()).unwrap();
        assert_eq!(b.frame_count, 0);
        assert!(b.detections.is_empty());
    }

    #[test]
    fn trailing_fields_and_gaps() {
        let f = file("3,-1,1,2,3,4,0.5\n\n1,-1,1,2,3,4,0.5,-1,-1,-1,extra\n");
        let b = read_detections(f.path()).unwrap();
        assert_eq!(b.frame_count, 3);
        assert_eq!(b.detections_at(2).len(), 0);
        assert_eq!(b.detections_at(3).len(), 1);
    }

    #[test]
    fn rejects_bad_rows_with_line_numbers() {
        let f = file("1,-1,0,0,5,5,1\n2,-1,10,20,0,100,0.9\n");
        let err = read_detections(f.path()).unwrap_err().to_string();
        assert!(err.ends_with(":2: box width and height must be positive, got w=0 h=100"), "{err}");
        for bad in ["1,-1,x,0,5,5,1\n", "0,-1,0,0,5,5,1\n", "1,-1,0,0,5\n", "1.5,-1,0,0,5,5,1\n"] {
            let f = file(bad);
            let err = read_detections(f.path()).unwrap_err().to_string();
            assert!(err.contains(":1:"), "{bad:?} → {err}");
        }
        let f = file("1,2,0,0,5,5,1\n1,2,9,9,5,5,1\n");
        assert!(read_labeled(f.path()).unwrap_err().to_string().contains(":2:"));
        let f = file("1,-1,0,0,5,5,1\n");
        assert!(read_labeled(f.path()).is_err());
    }

    #[test]
    fn ground_truth_skips_ignored_rows() {
        let f = file("1,1,0,0,5,5,1\n1,2,0,0,5,5,0\n");
        assert_eq!(read_ground_truth(f.path()).unwrap().box_count(), 1);
        assert_eq!(read_labeled(f.path()).unwrap().box_count(), 2);
    }

    #[test]
    fn tracks_round_trip_sorted() {
        let mut t = LabeledFrames::new(3);
        t.push(2, LabeledBox { id: 5, bbox: BoundingBox::new(1.234, 5.678, 10.001, 20.0).unwrap() });
        t.push(2, LabeledBox { id: 3, bbox: BoundingBox::new(-4.0, 0.0, 1.0, 1.0).unwrap() });
        t.push(1, LabeledBox { id: 9, bbox: BoundingBox::new(0.0, 0.0, 1.0, 1.0).unwrap() });
        let dir = tempfile::tempdir().unwrap();
        let p = dir.path().join("t.txt");
        write_tracks(&p, &t).unwrap();
        let text = fs::read_to_string(&p).unwrap();
        assert_eq!(
            text,
            "1,9,0.00,0.00,1.00,1.00,1,-1,-1,-1\n2,3,-4.00,0.00,1.00,1.00,1,-1,-1,-1\n2,5,1.23,5.68,10.00,20.00,1,-1,-1,-1\n"
        );
        let back = read_labeled(&p).unwrap();
        let mut expect = t.map_boxes(BoundingBox::rounded);
        expect.sort();
        expect = LabeledFrames::from_frames(expect.iter().take(2).map(|(_, b)| b.to_vec()).collect());
        assert_eq!(back, expect);

        let dets = read_detections(&p).unwrap();
        assert_eq!(dets.detections_at(2)[1].bbox, BoundingBox::new(1.23, 5.68, 10.0, 20.0).unwrap());
    }

    #[test]
    fn detections_round_trip() {
        let d = vec![
            vec![Detection { frame: 1, bbox: BoundingBox::new(1.0, 2.0, 3.0, 4.0).unwrap(), score: 0.25 }],
            vec![],
            vec![Detection { frame: 3, bbox: BoundingBox::new(5.5, 6.0, 7.0, 8.0).unwrap(), score: 1.0 }],
        ];
        let dir = tempfile::tempdir().unwrap();
        let p = dir.path().join("d.txt");
        write_detections(&p, &d).unwrap();
        assert_eq!(read_detections(&p).unwrap().detections, d);
    }

    #[test]
    fn missing_file_is_io_error() {
        assert!(matches!(read_detections(Path::new("/nonexistent/x.txt")), Err(MotError::Io { .. })));
    }
}
