use std::fs;
use std::io::{BufRead, BufReader, BufWriter, Write};
use std::path::Path;

use serde::{Deserialize, Serialize};

use super::rawvid::{read_rawvid, write_rawvid};
use super::{Split, VideoRecord};
use crate::error::{Error, Result};

pub const MANIFEST_FILE: &str = "manifest.jsonl";

/// One line of the dataset manifest. `path` is relative to the manifest.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ManifestEntry {
    pub id: u64,
    pub path: String,
    pub motion_class: u32,
    pub appearance_class: u32,
    pub split: Split,
}

/// Writes every video as `videos/<id>.rvid` under `dir` plus the manifest.
pub fn save_dataset(dir: impl AsRef<Path>, videos: &[VideoRecord]) -> Result<()> {
    let dir = dir.as_ref();
    fs::create_dir_all(dir.join("videos"))?;
    let mut manifest = BufWriter::new(fs::File::create(dir.join(MANIFEST_FILE))?);
    for v in videos {
        let rel = format!("videos/{:06}.rvid", v.id);
        write_rawvid(v, dir.join(&rel))?;
        let entry = ManifestEntry {
            id: v.id,
            path: rel,
            motion_class: v.motion_class,
            appearance_class: v.appearance_class,
            split: v.split,
        };
        serde_json::to_writer(&mut manifest, &entry)?;
        manifest.write_all(b"\n")?;
    }
    manifest.flush()?;
    Ok(())
}

pub fn read_manifest(path: impl AsRef<Path>) -> Result<Vec<ManifestEntry>> {
    let path = path.as_ref();
    if !path.exists() {
        return Err(Error::Missing(path.to_path_buf()));
    }
    let reader = BufReader::new(fs::File::open(path)?);
    let mut entries = Vec::new();
    for line in reader.lines() {
        let line = line?;
        if line.trim().is_empty() {
            continue;
        }
        entries.push(serde_json::from_str(&line)?);
    }
    Ok(entries)
}

pub fn load_dataset(dir: impl AsRef<Path>) -> Result<Vec<VideoRecord>> {
    let dir = dir.as_ref();
    read_manifest(dir.join(MANIFEST_FILE))?
        .into_iter()
        .map(|e| {
            let path = dir.join(&e.path);
            if !path.exists() {
                return Err(Error::Missing(path));
            }
            Ok(VideoRecord {
                id: e.id,
                frames: read_rawvid(path)?,
                motion_class: e.motion_class,
                appearance_class: e.appearance_class,
                split: e.split,
            })
        })
        .collect()
}
