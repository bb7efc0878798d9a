//! Annotation and turn CSV formats.
//!
//! Annotations: `dyad_id,listener_side,onset_s,offset_s,intensity` with
//! intensity one of A-E or empty. Turns: per dyad-side,
//! `turn_id,start_s,end_s,token,word_start_s,word_end_s`, one row per word.

use std::collections::BTreeMap;
use std::path::Path;

use super::{Intensity, SmileAnnotation, TurnSegment, Word};
use crate::error::{Error, Result};

pub fn write_annotations_csv(path: &Path, annotations: &[SmileAnnotation]) -> Result<()> {
    let mut w = csv::Writer::from_path(path).map_err(|e| table_err(path, 0, e.to_string()))?;
    w.write_record(["dyad_id", "listener_side", "onset_s", "offset_s", "intensity"])
        .map_err(|e| table_err(path, 0, e.to_string()))?;
    for a in annotations {
        w.write_record([
            a.dyad_id.as_str(),
            &a.listener_side.to_string(),
            &format!("{}", a.onset_s),
            &format!("{}", a.offset_s),
            &a.intensity.map(|i| i.to_string()).unwrap_or_default(),
        ])
        .map_err(|e| table_err(path, 0, e.to_string()))?;
    }
    w.flush().map_err(|e| Error::io(path.display().to_string(), e))?;
    Ok(())
}

pub fn read_annotations_csv(path: &Path) -> Result<Vec<SmileAnnotation>> {
    let mut r = csv::Reader::from_path(path).map_err(|e| table_err(path, 0, e.to_string()))?;
    let mut out = Vec::new();
    for (i, rec) in r.records().enumerate() {
        let line = i + 2;
        let rec = rec.map_err(|e| table_err(path, line, e.to_string()))?;
        if rec.len() != 5 {
            return Err(table_err(path, line, format!("expected 5 fields, got {}", rec.len())));
        }
        let a = SmileAnnotation {
            dyad_id: rec[0].to_string(),
            listener_side: rec[1].parse().map_err(|e| table_err(path, line, format!("{e}")))?,
            onset_s: parse_f64(path, line, &rec[2], "onset_s")?,
            offset_s: parse_f64(path, line, &rec[3], "offset_s")?,
            intensity: Intensity::parse(&rec[4]).map_err(|e| table_err(path, line, e.to_string()))?,
        };
        a.validate(None)?;
        out.push(a);
    }
    Ok(out)
}

pub fn write_turns_csv(path: &Path, turns: &[TurnSegment]) -> Result<()> {
    let mut w = csv::Writer::from_path(path).map_err(|e| table_err(path, 0, e.to_string()))?;
    w.write_record(["turn_id", "start_s", "end_s", "token", "word_start_s", "word_end_s"])
        .map_err(|e| table_err(path, 0, e.to_string()))?;
    for t in turns {
        for word in &t.words {
            w.write_record([
                t.id.as_str(),
                &format!("{}", t.start_s),
                &format!("{}", t.end_s),
                word.token.as_str(),
                &format!("{}", word.start_s),
                &format!("{}", word.end_s),
            ])
            .map_err(|e| table_err(path, 0, e.to_string()))?;
        }
    }
    w.flush().map_err(|e| Error::io(path.display().to_string(), e))?;
    Ok(())
}

/// Reads one dyad-side's turns, grouping rows by turn id. `dyad_id` and
/// `side` come from the caller since the format is one file per dyad-side.
pub fn read_turns_csv(
    path: &Path,
    dyad_id: &str,
    side: super::Side,
) -> Result<Vec<TurnSegment>> {
    let mut r = csv::Reader::from_path(path).map_err(|e| table_err(path, 0, e.to_string()))?;
    let mut order: Vec<String> = Vec::new();
    let mut by_id: BTreeMap<String, TurnSegment> = BTreeMap::new();
    for (i, rec) in r.records().enumerate() {
        let line = i + 2;
        let rec = rec.map_err(|e| table_err(path, line, e.to_string()))?;
        if rec.len() != 6 {
            return Err(table_err(path, line, format!("expected 6 fields, got {}", rec.len())));
        }
        let id = rec[0].to_string();
        let start_s = parse_f64(path, line, &rec[1], "start_s")?;
        let end_s = parse_f64(path, line, &rec[2], "end_s")?;
        let word = Word {
            token: rec[3].to_string(),
            start_s: parse_f64(path, line, &rec[4], "word_start_s")?,
            end_s: parse_f64(path, line, &rec[5], "word_end_s")?,
        };
        let entry = by_id.entry(id.clone()).or_insert_with(|| {
            order.push(id.clone());
            TurnSegment {
                id,
                dyad_id: dyad_id.to_string(),
                side,
                start_s,
                end_s,
                words: Vec::new(),
            }
        });
        if (entry.start_s - start_s).abs() > 1e-9 || (entry.end_s - end_s).abs() > 1e-9 {
            return Err(table_err(path, line, "inconsistent turn interval across rows".into()));
        }
        entry.words.push(word);
    }
    let turns: Vec<TurnSegment> = order.into_iter().map(|id| by_id.remove(&id).unwrap()).collect();
    for t in &turns {
        t.validate()?;
    }
    Ok(turns)
}

fn parse_f64(path: &Path, line: usize, s: &str, field: &str) -> Result<f64> {
    s.trim()
        .parse::<f64>()
        .map_err(|e| table_err(path, line, format!("bad {field}: {e}")))
}

fn table_err(path: &Path, line: usize, message: String) -> Error {
    Error::Parse {
        path: path.display().to_string(),
        line,
        message,
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::corpus::Side;

    #[test]
    fn annotations_round_trip() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("ann.csv");
        let anns = vec![
            SmileAnnotation {
                dyad_id: "d0".into(),
                listener_side: Side::Left,
                onset_s: 10.5,
                offset_s: 12.25,
                intensity: Some(Intensity::C),
            },
            SmileAnnotation {
                dyad_id: "d1".into(),
                listener_side: Side::Right,
                onset_s: 3.0,
                offset_s: 4.5,
                intensity: None,
            },
        ];
        write_annotations_csv(&path, &anns).unwrap();
        assert_eq!(read_annotations_csv(&path).unwrap(), anns);
    }

    #[test]
    fn turns_round_trip_groups_words() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("turns.csv");
        let turns = vec![
            TurnSegment {
                id: "t0".into(),
                dyad_id: "d0".into(),
                side: Side::Left,
                start_s: 0.0,
                end_s: 5.0,
                words: vec![
                    Word { token: "hello".into(), start_s: 0.5, end_s: 1.0 },
                    Word { token: "there".into(), start_s: 1.2, end_s: 1.6 },
                ],
            },
            TurnSegment {
                id: "t1".into(),
                dyad_id: "d0".into(),
                side: Side::Left,
                start_s: 10.0,
                end_s: 12.0,
                words: vec![Word { token: "yes".into(), start_s: 10.1, end_s: 10.4 }],
            },
        ];
        write_turns_csv(&path, &turns).unwrap();
        assert_eq!(read_turns_csv(&path, "d0", Side::Left).unwrap(), turns);
    }

    #[test]
    fn bad_number_reports_line_and_field() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("ann.csv");
        std::fs::write(
            &path,
            "dyad_id,listener_side,onset_s,offset_s,intensity\nd0,left,oops,2.0,A\n",
        )
        .unwrap();
        let err = read_annotations_csv(&path).unwrap_err();
        let msg = err.to_string();
        assert!(msg.contains("line 2") && msg.contains("onset_s"), "{msg}");
    }
}
