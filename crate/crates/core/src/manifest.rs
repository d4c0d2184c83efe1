//! JSON-lines manifests.
//!
//! Relative tile paths inside a pair manifest are resolved against the
//! manifest's own directory when read, and come back absolute.

use std::fs;
use std::path::{Path, PathBuf};

use serde::de::DeserializeOwned;
use serde::Serialize;

use crate::curation::PairRecord;
use crate::error::{Error, Result};

pub fn read_jsonl<T: DeserializeOwned>(path: impl AsRef<Path>) -> Result<Vec<T>> {
    let path = path.as_ref();
    let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    text.lines()
        .enumerate()
        .filter(|(_, l)| !l.trim().is_empty())
        .map(|(i, line)| {
            serde_json::from_str(line).map_err(|e| Error::Record {
                path: path.to_path_buf(),
                line: i + 1,
                message: e.to_string(),
            })
        })
        .collect()
}

pub fn to_jsonl<T: Serialize>(items: &[T]) -> String {
    let mut out = String::new();
    for item in items {
        out.push_str(&serde_json::to_string(item).expect("record serializes"));
        out.push('\n');
    }
    out
}

pub fn write_jsonl<T: Serialize>(path: impl AsRef<Path>, items: &[T]) -> Result<()> {
    let path = path.as_ref();
    fs::write(path, to_jsonl(items)).map_err(|e| Error::io(path, e))
}

fn manifest_dir(path: &Path) -> Result<PathBuf> {
    let parent = path.parent().unwrap_or(Path::new(""));
    std::path::absolute(if parent.as_os_str().is_empty() {
        Path::new(".")
    } else {
        parent
    })
    .map_err(|e| Error::io(path, e))
}

fn resolve(base: &Path, p: &mut PathBuf) {
    if p.is_relative() {
        *p = base.join(&*p);
    }
}

pub fn read_pair_manifest(path: impl AsRef<Path>) -> Result<Vec<PairRecord>> {
    let path = path.as_ref();
    let mut pairs: Vec<PairRecord> = read_jsonl(path)?;
    let base = manifest_dir(path)?;
    for p in &mut pairs {
        resolve(&base, &mut p.s1_path);
        resolve(&base, &mut p.s2_path);
        if let Some(q) = p.qa60_path.as_mut() {
            resolve(&base, q);
        }
    }
    Ok(pairs)
}

pub fn write_pair_manifest(path: impl AsRef<Path>, pairs: &[PairRecord]) -> Result<()> {
    write_jsonl(path, pairs)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::cloudscreen::ScreenReport;

    #[test]
    fn relative_paths_resolve_against_manifest() {
        let dir = tempfile::tempdir().unwrap();
        let rec = PairRecord {
            pair_id: "p".into(),
            s1_path: "s1/p.s2tl".into(),
            s2_path: "/abs/p.s2tl".into(),
            qa60_path: Some("qa60/p.s2tl".into()),
            screen: Some(ScreenReport {
                tile_id: "p".into(),
                nodata_ratio: 0.0,
                qa60_cloud_ratio: None,
                heuristic_cloud_ratio: 0.0,
            }),
        };
        let m = dir.path().join("pairs.jsonl");
        write_pair_manifest(&m, std::slice::from_ref(&rec)).unwrap();
        let text = fs::read_to_string(&m).unwrap();
        assert_eq!(
            text,
            "{\"pair_id\":\"p\",\"s1_path\":\"s1/p.s2tl\",\"s2_path\":\"/abs/p.s2tl\",\
             \"qa60_path\":\"qa60/p.s2tl\",\"screen\":{\"tile_id\":\"p\",\"nodata_ratio\":0.0,\
             \"qa60_cloud_ratio\":null,\"heuristic_cloud_ratio\":0.0}}\n"
        );
        let back = read_pair_manifest(&m).unwrap();
        let base = std::path::absolute(dir.path()).unwrap();
        assert_eq!(back[0].s1_path, base.join("s1/p.s2tl"));
        assert_eq!(back[0].s2_path, PathBuf::from("/abs/p.s2tl"));
        assert_eq!(back[0].qa60_path, Some(base.join("qa60/p.s2tl")));
    }

    #[test]
    fn malformed_line_reports_position() {
        let dir = tempfile::tempdir().unwrap();
        let m = dir.path().join("bad.jsonl");
        fs::write(&m, "\n{\"pair_id\": 3}\n").unwrap();
        match read_pair_manifest(&m) {
            Err(Error::Record { line, .. }) => assert_eq!(line, 2),
            other => panic!("{other:?}"),
        }
    }
}
