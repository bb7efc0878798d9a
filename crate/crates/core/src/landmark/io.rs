//! Landmark CSV files: `frame_idx,t_s,x0,y0,...,x{K-1},y{K-1}`.

use std::path::Path;

use super::{LandmarkFrame, LandmarkSequence, Point};
use crate::error::{Error, Result};

pub fn write_landmark_csv(path: &Path, seq: &LandmarkSequence) -> Result<()> {
    let k = seq.landmark_count();
    let mut w = csv::Writer::from_path(path).map_err(|e| csv_err(path, e))?;
    let mut header = vec!["frame_idx".to_string(), "t_s".to_string()];
    for i in 0..k {
        header.push(format!("x{i}"));
        header.push(format!("y{i}"));
    }
    w.write_record(&header).map_err(|e| csv_err(path, e))?;
    for (idx, frame) in seq.frames.iter().enumerate() {
        let t = seq.t0 + idx as f64 / seq.fps;
        let mut row = vec![idx.to_string(), fmt(t)];
        for p in &frame.points {
            row.push(fmt(p.x));
            row.push(fmt(p.y));
        }
        w.write_record(&row).map_err(|e| csv_err(path, e))?;
    }
    w.flush().map_err(|e| Error::io(path.display().to_string(), e))?;
    Ok(())
}

pub fn read_landmark_csv(path: &Path, fps: f64, expected_k: usize) -> Result<LandmarkSequence> {
    let mut r = csv::Reader::from_path(path).map_err(|e| csv_err(path, e))?;
    let headers = r.headers().map_err(|e| csv_err(path, e))?.clone();
    let want = 2 + 2 * expected_k;
    if headers.len() != want {
        return Err(Error::Parse {
            path: path.display().to_string(),
            line: 1,
            message: format!("expected {want} columns for K={expected_k}, found {}", headers.len()),
        });
    }
    let mut frames = Vec::new();
    let mut t0 = 0.0;
    for (line, rec) in r.records().enumerate() {
        let rec = rec.map_err(|e| csv_err(path, e))?;
        let parse = |i: usize| -> Result<f64> {
            rec.get(i)
                .ok_or_else(|| parse_err(path, line + 2, "missing field"))?
                .trim()
                .parse::<f64>()
                .map_err(|e| parse_err(path, line + 2, &format!("bad number: {e}")))
        };
        if frames.is_empty() {
            t0 = parse(1)?;
        }
        let mut points = Vec::with_capacity(expected_k);
        for i in 0..expected_k {
            points.push(Point::new(parse(2 + 2 * i)?, parse(3 + 2 * i)?));
        }
        frames.push(LandmarkFrame::new(points));
    }
    LandmarkSequence::new(frames, fps, t0)
}

// shortest round-trip representation keeps files byte-stable
fn fmt(v: f64) -> String {
    let mut buf = format!("{v}");
    if buf.ends_with(".0") {
        buf.truncate(buf.len() - 2);
    }
    buf
}

fn csv_err(path: &Path, e: csv::Error) -> Error {
    Error::Parse {
        path: path.display().to_string(),
        line: 0,
        message: e.to_string(),
    }
}

fn parse_err(path: &Path, line: usize, msg: &str) -> Error {
    Error::Parse {
        path: path.display().to_string(),
        line,
        message: msg.to_string(),
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn landmark_csv_round_trip() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("lms.csv");
        let seq = LandmarkSequence::new(
            vec![
                LandmarkFrame::new(vec![Point::new(0.25, -1.5), Point::new(2.0, 3.0)]),
                LandmarkFrame::new(vec![Point::new(0.5, -1.25), Point::new(2.125, 3.5)]),
            ],
            25.0,
            0.0,
        )
        .unwrap();
        write_landmark_csv(&path, &seq).unwrap();
        let back = read_landmark_csv(&path, 25.0, 2).unwrap();
        assert_eq!(back, seq);
    }

    #[test]
    fn wrong_k_is_a_parse_error() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("lms.csv");
        let seq = LandmarkSequence::new(
            vec![LandmarkFrame::new(vec![Point::new(0.0, 0.0)])],
            25.0,
            0.0,
        )
        .unwrap();
        write_landmark_csv(&path, &seq).unwrap();
        assert!(read_landmark_csv(&path, 25.0, 3).is_err());
    }
}
