//! File-backed providers that replay precomputed estimator output.
//!
//! Displacement grids: `seq,frame,anchor_x,anchor_y,anchor_w,anchor_h,bin_index,confidence`,
//! one row per non-zero bin; absent bins are zero.
//! Similarities: `seq,frame,ax,ay,aw,ah,bx,by,bw,bh,score`, looked up in
//! either box order. A leading header row starting with `seq` is skipped.
//! Boxes are matched after rounding to two decimals.

use std::collections::HashMap;
use std::path::{Path, PathBuf};

use thiserror::Error;

use super::{BoxKey, DisplacementProvider, EstimateError, GridProposal, GridSpec, SimilarityProvider};
use crate::geometry::BoundingBox;
use crate::track::Tracklet;

#[derive(Debug, Error)]
pub enum OracleLoadError {
    #[error("cannot read {path}: {source}")]
    Io { path: PathBuf, source: std::io::Error },
    #[error("{path}:{line}: {message}")]
    Parse { path: PathBuf, line: u64, message: String },
}

type GridKey = (String, u32, BoxKey);

#[derive(Debug, Clone)]
pub struct FileDisplacementOracle {
    grid: GridSpec,
    sequence: String,
    grids: HashMap<GridKey, Vec<(usize, f64)>>,
}

impl FileDisplacementOracle {
    pub fn load(path: &Path, grid: GridSpec) -> Result<Self, OracleLoadError> {
        let mut grids: HashMap<GridKey, Vec<(usize, f64)>> = HashMap::new();
        for_each_row(path, 8, |row, fields| {
            let frame = parse::<u32>(path, row, fields[1], "frame")?;
            let anchor = parse_box(path, row, &fields[2..6])?;
            let bin = parse::<usize>(path, row, fields[6], "bin_index")?;
            let conf = parse::<f64>(path, row, fields[7], "confidence")?;
            if bin >= grid.bins_x * grid.bins_y {
                return Err(parse_error(path, row, format!("bin_index {bin} out of range")));
            }
            grids
                .entry((fields[0].to_string(), frame, BoxKey::of(&anchor)))
                .or_default()
                .push((bin, conf));
            Ok(())
        })?;
        Ok(Self { grid, sequence: String::new(), grids })
    }

    /// Selects which sequence's rows answer queries.
    pub fn with_sequence(mut self, sequence: impl Into<String>) -> Self {
        self.sequence = sequence.into();
        self
    }

    pub fn len(&self) -> usize {
        self.grids.len()
    }

    pub fn is_empty(&self) -> bool {
        self.grids.is_empty()
    }
}

impl DisplacementProvider for FileDisplacementOracle {
    fn propose(
        &self,
        tracklet: &Tracklet,
        frame: u32,
        context: &BoundingBox,
    ) -> Result<GridProposal, EstimateError> {
        let anchor = tracklet.last_box();
        let key = (self.sequence.clone(), frame, BoxKey::of(&anchor));
        let rows = self.grids.get(&key).ok_or_else(|| EstimateError::MissingGrid {
            sequence: self.sequence.clone(),
            frame,
            anchor,
        })?;
        let layout = self.grid.layout_for(context);
        let mut confidences = vec![0.0; layout.len()];
        for &(bin, c) in rows {
            confidences[bin] += c;
        }
        Ok(GridProposal { layout, confidences })
    }
}

#[derive(Debug, Clone)]
pub struct FileSimilarityOracle {
    sequence: String,
    scores: HashMap<(String, u32, BoxKey, BoxKey), f64>,
}

impl FileSimilarityOracle {
    pub fn load(path: &Path) -> Result<Self, OracleLoadError> {
        let mut scores = HashMap::new();
        for_each_row(path, 11, |row, fields| {
            let frame = parse::<u32>(path, row, fields[1], "frame")?;
            let a = parse_box(path, row, &fields[2..6])?;
            let b = parse_box(path, row, &fields[6..10])?;
            let score = parse::<f64>(path, row, fields[10], "score")?;
            scores.insert((fields[0].to_string(), frame, BoxKey::of(&a), BoxKey::of(&b)), score);
            Ok(())
        })?;
        Ok(Self { sequence: String::new(), scores })
    }

    pub fn with_sequence(mut self, sequence: impl Into<String>) -> Self {
        self.sequence = sequence.into();
        self
    }
}

impl SimilarityProvider for FileSimilarityOracle {
    fn similarity(&self, a: &BoundingBox, b: &BoundingBox, frame: u32) -> Result<f64, EstimateError> {
        let (ka, kb) = (BoxKey::of(a), BoxKey::of(b));
        let seq = self.sequence.clone();
        self.scores
            .get(&(seq.clone(), frame, ka, kb))
            .or_else(|| self.scores.get(&(seq, frame, kb, ka)))
            .copied()
            .ok_or_else(|| EstimateError::MissingSimilarity {
                sequence: self.sequence.clone(),
                frame,
                a: *a,
                b: *b,
            })
    }
}

fn parse_error(path: &Path, line: u64, message: String) -> OracleLoadError {
    OracleLoadError::Parse { path: path.to_path_buf(), line, message }
}

fn parse<T: std::str::FromStr>(path: &Path, line: u64, s: &str, what: &str) -> Result<T, OracleLoadError> {
    s.trim()
        .parse()
        .map_err(|_| parse_error(path, line, format!("bad {what} {s:?}")))
}

fn parse_box(path: &Path, line: u64, f: &[&str]) -> Result<BoundingBox, OracleLoadError> {
    let v: Vec<f64> = f
        .iter()
        .map(|s| parse::<f64>(path, line, s, "box coordinate"))
        .collect::<Result<_, _>>()?;
    BoundingBox::new(v[0], v[1], v[2], v[3]).map_err(|e| parse_error(path, line, e.to_string()))
}

fn for_each_row(
    path: &Path,
    min_fields: usize,
    mut f: impl FnMut(u64, &[&str]) -> Result<(), OracleLoadError>,
) -> Result<(), OracleLoadError> {
    let mut reader = csv::ReaderBuilder::new()
        .has_headers(false)
        .flexible(true)
        .trim(csv::Trim::All)
        .from_path(path)
        .map_err(|e| csv_error(path, e))?;
    for (i, rec) in reader.records().enumerate() {
        let rec = rec.map_err(|e| csv_error(path, e))?;
        let line = rec.position().map(|p| p.line()).unwrap_or(i as u64 + 1);
        let fields: Vec<&str> = rec.iter().collect();
        if fields.iter().all(|s| s.is_empty()) {
            continue;
        }
        if i == 0 && fields[0].eq_ignore_ascii_case("seq") {
            continue;
        }
        if fields.len() < min_fields {
            return Err(parse_error(
                path,
                line,
                format!("expected {min_fields} fields, found {}", fields.len()),
            ));
        }
        f(line, &fields)?;
    }
    Ok(())
}

fn csv_error(path: &Path, e: csv::Error) -> OracleLoadError {
    let line = e.position().map(|p| p.line()).unwrap_or(0);
    match e.into_kind() {
        csv::ErrorKind::Io(source) => OracleLoadError::Io { path: path.to_path_buf(), source },
        other => parse_error(path, line, format!("{other:?}")),
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::estimators::estimate_displacement;
    use std::io::Write;

    fn write(content: &str) -> tempfile::NamedTempFile {
        let mut f = tempfile::NamedTempFile::new().unwrap();
        f.write_all(content.as_bytes()).unwrap();
        f
    }

    #[test]
    fn grid_lookup_and_missing_key() {
        let f = write(
            "seq,frame,anchor_x,anchor_y,anchor_w,anchor_h,bin_index,confidence\n\
             s1,2,10.004,20,30,40,0,0.25\n\
             s1,2,10.00,20,30,40,399,0.75\n",
        );
        let oracle = FileDisplacementOracle::load(f.path(), GridSpec::default())
            .unwrap()
            .with_sequence("s1");
        assert_eq!(oracle.len(), 1);
        let t = Tracklet::candidate(1, 1, BoundingBox::new(10.0, 20.0, 30.0, 40.0).unwrap());
        let ctx = t.last_box().enlarge(5.0, 2.0);
        let ev = estimate_displacement(&oracle, &t, 2, &ctx).unwrap();
        assert_eq!(ev.max_confidence(), 0.75);
        assert!(matches!(
            estimate_displacement(&oracle, &t, 3, &ctx),
            Err(EstimateError::MissingGrid { frame: 3, .. })
        ));
        let other = oracle.clone().with_sequence("s2");
        assert!(estimate_displacement(&other, &t, 2, &ctx).is_err());
    }

    #[test]
    fn unnormalized_file_grid_is_rejected() {
        let f = write("s,2,0,0,10,10,5,0.5\n");
        let oracle = FileDisplacementOracle::load(f.path(), GridSpec::default()).unwrap().with_sequence("s");
        let t = Tracklet::candidate(1, 1, BoundingBox::new(0.0, 0.0, 10.0, 10.0).unwrap());
        let ctx = t.last_box().enlarge(5.0, 2.0);
        assert!(matches!(
            estimate_displacement(&oracle, &t, 2, &ctx),
            Err(EstimateError::NotNormalized { .. })
        ));
    }

    #[test]
    fn malformed_rows_report_line() {
        let f = write("s,2,0,0,10,10,5,0.5\ns,2,0,0,10,x,5,0.5\n");
        let err = FileDisplacementOracle::load(f.path(), GridSpec::default()).unwrap_err();
        assert!(matches!(err, OracleLoadError::Parse { line: 2, .. }), "{err}");
        let f = write("s,2,0,0,10,10,400,0.5\n");
        assert!(FileDisplacementOracle::load(f.path(), GridSpec::default()).is_err());
    }

    #[test]
    fn similarity_lookup_is_order_free() {
        let f = write("s,1,0,0,10,10,5,0,10,10,0.9\n");
        let o = FileSimilarityOracle::load(f.path()).unwrap().with_sequence("s");
        let a = BoundingBox::new(0.0, 0.0, 10.0, 10.0).unwrap();
        let b = BoundingBox::new(5.0, 0.0, 10.0, 10.0).unwrap();
        assert_eq!(o.similarity(&a, &b, 1).unwrap(), 0.9);
        assert_eq!(o.similarity(&b, &a, 1).unwrap(), 0.9);
        assert!(matches!(o.similarity(&a, &b, 2), Err(EstimateError::MissingSimilarity { .. })));
    }
}
