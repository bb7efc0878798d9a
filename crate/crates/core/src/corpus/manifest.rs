//! Manifest I/O: one JSON document, a top-level array of dyad objects with
//! media paths relative to the manifest directory.

use std::fs;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use super::{DyadRecord, PersonMeta, Relationship, SidePaths};
use crate::error::{Error, Result};

/// Raw manifest row; `sex` is a free string so records with unresolvable sex
/// can be rejected with a report instead of failing the whole load.
#[derive(Debug, Clone, Serialize, Deserialize)]
struct RawDyad {
    dyad_id: String,
    relationship: Relationship,
    left_person: RawPerson,
    right_person: RawPerson,
    video_fps: f64,
    video_duration_s: f64,
    landmark_count: usize,
    audio: SidePaths,
    landmarks: SidePaths,
    transcripts: SidePaths,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
struct RawPerson {
    person_id: String,
    sex: String,
}

#[derive(Debug, Clone)]
pub struct RejectedDyad {
    pub dyad_id: String,
    pub reason: String,
}

/// Result of a manifest load: valid records plus a rejection report.
#[derive(Debug, Clone)]
pub struct ManifestLoad {
    pub records: Vec<DyadRecord>,
    pub rejected: Vec<RejectedDyad>,
}

/// Loads and validates a manifest. Records whose sex cannot be resolved are
/// dropped and reported; structural problems (bad JSON, violated invariants,
/// missing media files) are hard errors.
pub fn load_manifest(path: &Path) -> Result<ManifestLoad> {
    let text = fs::read_to_string(path).map_err(|e| Error::io(path.display().to_string(), e))?;
    let raw: Vec<RawDyad> = serde_json::from_str(&text).map_err(|e| Error::Parse {
        path: path.display().to_string(),
        line: e.line(),
        message: e.to_string(),
    })?;
    let base = path.parent().unwrap_or_else(|| Path::new("."));
    let mut records = Vec::new();
    let mut rejected = Vec::new();
    for d in raw {
        let left_sex = parse_sex(&d.left_person.sex);
        let right_sex = parse_sex(&d.right_person.sex);
        let (left_sex, right_sex) = match (left_sex, right_sex) {
            (Some(l), Some(r)) => (l, r),
            _ => {
                rejected.push(RejectedDyad {
                    dyad_id: d.dyad_id.clone(),
                    reason: "participant sex could not be resolved".into(),
                });
                continue;
            }
        };
        let record = DyadRecord {
            dyad_id: d.dyad_id,
            relationship: d.relationship,
            left_person: PersonMeta {
                person_id: d.left_person.person_id,
                sex: left_sex,
            },
            right_person: PersonMeta {
                person_id: d.right_person.person_id,
                sex: right_sex,
            },
            video_fps: d.video_fps,
            video_duration_s: d.video_duration_s,
            landmark_count: d.landmark_count,
            audio: resolve(&d.audio, base),
            landmarks: resolve(&d.landmarks, base),
            transcripts: resolve(&d.transcripts, base),
        };
        record.validate()?;
        for (label, p) in [
            ("audio", &record.audio.left),
            ("audio", &record.audio.right),
            ("landmarks", &record.landmarks.left),
            ("landmarks", &record.landmarks.right),
            ("transcripts", &record.transcripts.left),
            ("transcripts", &record.transcripts.right),
        ] {
            if !p.exists() {
                return Err(Error::missing(format!(
                    "dyad {}: {label} file {} does not exist",
                    record.dyad_id,
                    p.display()
                )));
            }
        }
        records.push(record);
    }
    Ok(ManifestLoad { records, rejected })
}

fn parse_sex(s: &str) -> Option<super::Sex> {
    match s.trim().to_ascii_lowercase().as_str() {
        "male" | "m" => Some(super::Sex::Male),
        "female" | "f" => Some(super::Sex::Female),
        _ => None,
    }
}

fn resolve(paths: &SidePaths, base: &Path) -> SidePaths {
    let join = |p: &PathBuf| {
        if p.is_absolute() {
            p.clone()
        } else {
            base.join(p)
        }
    };
    SidePaths {
        left: join(&paths.left),
        right: join(&paths.right),
    }
}

/// Writes records as a manifest with paths relative to `dir`.
pub fn write_manifest(path: &Path, records: &[DyadRecord]) -> Result<()> {
    let base = path.parent().unwrap_or_else(|| Path::new("."));
    let raw: Vec<RawDyad> = records
        .iter()
        .map(|r| RawDyad {
            dyad_id: r.dyad_id.clone(),
            relationship: r.relationship,
            left_person: RawPerson {
                person_id: r.left_person.person_id.clone(),
                sex: r.left_person.sex.to_string(),
            },
            right_person: RawPerson {
                person_id: r.right_person.person_id.clone(),
                sex: r.right_person.sex.to_string(),
            },
            video_fps: r.video_fps,
            video_duration_s: r.video_duration_s,
            landmark_count: r.landmark_count,
            audio: relativize(&r.audio, base),
            landmarks: relativize(&r.landmarks, base),
            transcripts: relativize(&r.transcripts, base),
        })
        .collect();
    let text = serde_json::to_string_pretty(&raw)?;
    fs::write(path, text).map_err(|e| Error::io(path.display().to_string(), e))
}

fn relativize(paths: &SidePaths, base: &Path) -> SidePaths {
    let strip = |p: &PathBuf| p.strip_prefix(base).map(PathBuf::from).unwrap_or_else(|_| p.clone());
    SidePaths {
        left: strip(&paths.left),
        right: strip(&paths.right),
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::corpus::Sex;
    use std::fs::File;

    fn touch(path: &Path) {
        File::create(path).unwrap();
    }

    fn manifest_json(n: usize, bad_sex_idx: Option<usize>) -> String {
        let rows: Vec<String> = (0..n)
            .map(|i| {
                let sex = if bad_sex_idx == Some(i) { "unknown" } else { "female" };
                format!(
                    r#"{{"dyad_id":"d{i}","relationship":"friends",
                       "left_person":{{"person_id":"d{i}L","sex":"male"}},
                       "right_person":{{"person_id":"d{i}R","sex":"{sex}"}},
                       "video_fps":25.0,"video_duration_s":60.0,"landmark_count":8,
                       "audio":{{"left":"d{i}_left.wav","right":"d{i}_right.wav"}},
                       "landmarks":{{"left":"d{i}_left.csv","right":"d{i}_right.csv"}},
                       "transcripts":{{"left":"d{i}_left_turns.csv","right":"d{i}_right_turns.csv"}}}}"#
                )
            })
            .collect();
        format!("[{}]", rows.join(","))
    }

    fn write_media(dir: &Path, n: usize) {
        for i in 0..n {
            for suffix in ["left.wav", "right.wav", "left.csv", "right.csv", "left_turns.csv", "right_turns.csv"] {
                touch(&dir.join(format!("d{i}_{suffix}")));
            }
        }
    }

    #[test]
    fn loads_48_dyads() {
        let dir = tempfile::tempdir().unwrap();
        write_media(dir.path(), 48);
        let path = dir.path().join("manifest.json");
        fs::write(&path, manifest_json(48, None)).unwrap();
        let load = load_manifest(&path).unwrap();
        assert_eq!(load.records.len(), 48);
        assert!(load.rejected.is_empty());
        assert_eq!(load.records[0].right_person.sex, Sex::Female);
    }

    #[test]
    fn empty_manifest_is_ok() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("manifest.json");
        fs::write(&path, "[]").unwrap();
        let load = load_manifest(&path).unwrap();
        assert!(load.records.is_empty());
        assert!(load.rejected.is_empty());
    }

    #[test]
    fn unknown_sex_is_rejected_with_report() {
        let dir = tempfile::tempdir().unwrap();
        write_media(dir.path(), 3);
        let path = dir.path().join("manifest.json");
        fs::write(&path, manifest_json(3, Some(1))).unwrap();
        let load = load_manifest(&path).unwrap();
        assert_eq!(load.records.len(), 2);
        assert_eq!(load.rejected.len(), 1);
        assert_eq!(load.rejected[0].dyad_id, "d1");
    }

    #[test]
    fn manifest_round_trips_to_equal_records() {
        let dir = tempfile::tempdir().unwrap();
        write_media(dir.path(), 4);
        let path = dir.path().join("manifest.json");
        fs::write(&path, manifest_json(4, None)).unwrap();
        let load = load_manifest(&path).unwrap();
        let copy = dir.path().join("copy.json");
        write_manifest(&copy, &load.records).unwrap();
        let back = load_manifest(&copy).unwrap();
        assert_eq!(back.records, load.records);
        assert!(back.rejected.is_empty());
    }

    #[test]
    fn missing_media_is_an_error() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("manifest.json");
        fs::write(&path, manifest_json(1, None)).unwrap();
        assert!(load_manifest(&path).is_err());
    }

    #[test]
    fn bad_json_reports_line() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("manifest.json");
        fs::write(&path, "[{\"dyad_id\": }]").unwrap();
        match load_manifest(&path) {
            Err(Error::Parse { line, .. }) => assert!(line >= 1),
            other => panic!("expected parse error, got {other:?}"),
        }
    }
}
