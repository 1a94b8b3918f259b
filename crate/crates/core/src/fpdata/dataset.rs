//! Dataset directories.
//!
//! A dataset is a flat directory of `<subject>_<impression>.min` minutiae
//! files; a sibling `<subject>_<impression>.pgm` skeleton is attached when
//! present. The impression id is everything after the last underscore, so
//! subject ids may themselves contain underscores.

use std::fs;
use std::io;
use std::path::{Path, PathBuf};

use thiserror::Error;

use super::{parse_minutiae, parse_skeleton, write_minutiae, write_skeleton};
use super::{DatasetEntry, PgmError, TextError};

#[derive(Debug, Error)]
pub enum DatasetError {
    #[error("{path}: {source}")]
    Io { path: PathBuf, source: io::Error },
    #[error("{path}: {source}")]
    Minutiae { path: PathBuf, source: TextError },
    #[error("{path}: {source}")]
    Skeleton { path: PathBuf, source: PgmError },
    #[error("{path}: file stem {stem:?} is not <subject>_<impression>")]
    BadFileName { path: PathBuf, stem: String },
    #[error("{path}: file says subject {file_subject:?} impression {file_impression:?}, name says {name_subject:?} {name_impression:?}")]
    NameMismatch {
        path: PathBuf,
        file_subject: String,
        file_impression: String,
        name_subject: String,
        name_impression: String,
    },
    #[error("no .min files under {path}")]
    EmptyDataset { path: PathBuf },
}

/// Loads every record in the directory, sorted by (subject_id, impression_id).
pub fn load_dataset(root: &Path) -> Result<Vec<DatasetEntry>, DatasetError> {
    let io_err = |path: &Path, source| DatasetError::Io {
        path: path.to_path_buf(),
        source,
    };
    let mut min_paths: Vec<PathBuf> = Vec::new();
    for entry in fs::read_dir(root).map_err(|e| io_err(root, e))? {
        let entry = entry.map_err(|e| io_err(root, e))?;
        let path = entry.path();
        if path.extension().and_then(|e| e.to_str()) == Some("min") {
            min_paths.push(path);
        }
    }
    if min_paths.is_empty() {
        return Err(DatasetError::EmptyDataset {
            path: root.to_path_buf(),
        });
    }

    let mut entries = Vec::with_capacity(min_paths.len());
    for path in min_paths {
        let stem = path
            .file_stem()
            .and_then(|s| s.to_str())
            .unwrap_or_default()
            .to_string();
        let (name_subject, name_impression) =
            stem.rsplit_once('_')
                .ok_or_else(|| DatasetError::BadFileName {
                    path: path.clone(),
                    stem: stem.clone(),
                })?;

        let text = fs::read_to_string(&path).map_err(|e| io_err(&path, e))?;
        let record = parse_minutiae(&text).map_err(|source| DatasetError::Minutiae {
            path: path.clone(),
            source,
        })?;
        if record.subject_id != name_subject || record.impression_id != name_impression {
            return Err(DatasetError::NameMismatch {
                path,
                file_subject: record.subject_id,
                file_impression: record.impression_id,
                name_subject: name_subject.to_string(),
                name_impression: name_impression.to_string(),
            });
        }

        let pgm_path = path.with_extension("pgm");
        let skeleton = match fs::read(&pgm_path) {
            Ok(bytes) => Some(
                parse_skeleton(&bytes, Some((record.width, record.height))).map_err(|source| {
                    DatasetError::Skeleton {
                        path: pgm_path,
                        source,
                    }
                })?,
            ),
            Err(e) if e.kind() == io::ErrorKind::NotFound => None,
            Err(e) => return Err(io_err(&pgm_path, e)),
        };
        entries.push(DatasetEntry { record, skeleton });
    }

    entries.sort_by(|a, b| {
        (&a.record.subject_id, &a.record.impression_id)
            .cmp(&(&b.record.subject_id, &b.record.impression_id))
    });
    Ok(entries)
}

/// Writes entries as `<subject>_<impression>.min` (+ `.pgm` when a skeleton is
/// attached), creating the directory if needed.
pub fn write_dataset(root: &Path, entries: &[DatasetEntry]) -> Result<(), DatasetError> {
    let io_err = |path: &Path, source| DatasetError::Io {
        path: path.to_path_buf(),
        source,
    };
    fs::create_dir_all(root).map_err(|e| io_err(root, e))?;
    for entry in entries {
        let base = format!("{}_{}", entry.record.subject_id, entry.record.impression_id);
        let min_path = root.join(format!("{base}.min"));
        fs::write(&min_path, write_minutiae(&entry.record)).map_err(|e| io_err(&min_path, e))?;
        if let Some(skeleton) = &entry.skeleton {
            let pgm_path = root.join(format!("{base}.pgm"));
            fs::write(&pgm_path, write_skeleton(skeleton)).map_err(|e| io_err(&pgm_path, e))?;
        }
    }
    Ok(())
}
