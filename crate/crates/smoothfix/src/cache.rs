//! On-disk reuse of sampled mixing distributions: a CSV of samples next to
//! a JSON sidecar carrying the sampling identity and a content checksum.
//!
//! The file name is a hash of the identity fields (model checksum, alpha,
//! depth, prune threshold, stream state, replication count), so a rerun
//! with the same inputs lands on the same file and can skip resampling,
//! while any drift in inputs produces a fresh name. Stored bytes are
//! deterministic: shortest-roundtrip decimal per sample, one per line.

use crate::martingale::{EmpiricalW, WMeta};
use crate::numeric::fnv64;
use crate::{Error, Result};
use serde::{Deserialize, Serialize};
use std::fmt::Write as _;
use std::fs;
use std::path::{Path, PathBuf};

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct Sidecar {
    meta: WMeta,
    /// Hash of the exact CSV bytes; load refuses on mismatch.
    content_checksum: String,
}

fn identity_bytes(meta: &WMeta) -> Vec<u8> {
    let mut s = String::new();
    let _ = write!(
        s,
        "{}|{:016x}|{}|{:016x}|{:016x}|{}",
        meta.model_checksum,
        meta.alpha.to_bits(),
        meta.depth,
        meta.prune_eps.to_bits(),
        meta.stream_state,
        meta.reps
    );
    s.into_bytes()
}

/// File name the cache uses for this sampling identity.
pub fn w_file_name(meta: &WMeta) -> String {
    format!("w_{:016x}.csv", fnv64(&identity_bytes(meta)))
}

/// Sidecar path for a given samples file.
pub fn sidecar_path(csv: &Path) -> PathBuf {
    csv.with_extension("meta.json")
}

fn same_identity(a: &WMeta, b: &WMeta) -> bool {
    a.model_checksum == b.model_checksum
        && a.alpha.to_bits() == b.alpha.to_bits()
        && a.depth == b.depth
        && a.prune_eps.to_bits() == b.prune_eps.to_bits()
        && a.stream_state == b.stream_state
        && a.reps == b.reps
}

fn csv_bytes(w: &EmpiricalW) -> Vec<u8> {
    let mut s = String::with_capacity(2 + w.samples.len() * 20);
    s.push_str("w\n");
    for &v in &w.samples {
        let _ = writeln!(s, "{v}");
    }
    s.into_bytes()
}

fn read_sidecar(csv: &Path) -> Result<Sidecar> {
    let raw = fs::read(sidecar_path(csv))?;
    Ok(serde_json::from_slice(&raw)?)
}

/// Persist samples under the identity-derived name inside `dir`.
///
/// Idempotent when the file already holds exactly this content; a name
/// collision with different content is refused unless `overwrite`.
pub fn store_w(dir: &Path, w: &EmpiricalW, overwrite: bool) -> Result<PathBuf> {
    fs::create_dir_all(dir)?;
    let path = dir.join(w_file_name(&w.meta));
    let bytes = csv_bytes(w);
    let sidecar = Sidecar {
        meta: w.meta.clone(),
        content_checksum: format!("{:016x}", fnv64(&bytes)),
    };
    if path.exists() {
        let existing = read_sidecar(&path)?;
        if existing == sidecar {
            return Ok(path);
        }
        if !overwrite {
            return Err(Error::Cache(format!(
                "{} exists with different content (checksum {} vs {}); pass overwrite to replace",
                path.display(),
                existing.content_checksum,
                sidecar.content_checksum
            )));
        }
    }
    fs::write(&path, &bytes)?;
    fs::write(
        sidecar_path(&path),
        serde_json::to_vec_pretty(&sidecar)?,
    )?;
    Ok(path)
}

/// Load a samples file, verifying the sidecar checksum and sample count.
pub fn load_w(path: &Path) -> Result<EmpiricalW> {
    let sidecar = read_sidecar(path)?;
    let bytes = fs::read(path)?;
    let checksum = format!("{:016x}", fnv64(&bytes));
    if checksum != sidecar.content_checksum {
        return Err(Error::Cache(format!(
            "{} fails its checksum ({} recorded, {} on disk)",
            path.display(),
            sidecar.content_checksum,
            checksum
        )));
    }
    let text = String::from_utf8(bytes)
        .map_err(|_| Error::Cache(format!("{} is not UTF-8", path.display())))?;
    let mut lines = text.lines();
    if lines.next() != Some("w") {
        return Err(Error::Cache(format!(
            "{} does not start with the expected header",
            path.display()
        )));
    }
    let mut samples = Vec::with_capacity(sidecar.meta.reps as usize);
    for line in lines {
        let v: f64 = line
            .parse()
            .map_err(|_| Error::Cache(format!("{}: bad sample line {line:?}", path.display())))?;
        samples.push(v);
    }
    if samples.len() as u64 != sidecar.meta.reps {
        return Err(Error::Cache(format!(
            "{} holds {} samples but the sidecar promises {}",
            path.display(),
            samples.len(),
            sidecar.meta.reps
        )));
    }
    Ok(EmpiricalW {
        samples,
        meta: sidecar.meta,
    })
}

/// The content checksum recorded in a cache file's sidecar.
pub fn recorded_checksum(path: &Path) -> Result<String> {
    Ok(read_sidecar(path)?.content_checksum)
}

/// Look for an existing cache in `dir` matching this sampling identity.
pub fn find_w(dir: &Path, meta: &WMeta) -> Option<PathBuf> {
    let path = dir.join(w_file_name(meta));
    if !path.exists() {
        return None;
    }
    match read_sidecar(&path) {
        Ok(side) if same_identity(&side.meta, meta) => Some(path),
        _ => None,
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::martingale::sample_limit_w;
    use crate::model::WeightModel;
    use crate::rng::RngStream;

    fn small_w(seed: u64) -> EmpiricalW {
        sample_limit_w(
            &WeightModel::uniform_pair(),
            1.0,
            6,
            64,
            0.0,
            RngStream::new(seed),
        )
        .unwrap()
    }

    #[test]
    fn round_trip_preserves_samples_bitwise() {
        let dir = tempfile::tempdir().unwrap();
        let w = small_w(1);
        let path = store_w(dir.path(), &w, false).unwrap();
        let back = load_w(&path).unwrap();
        assert_eq!(back.meta, w.meta);
        assert_eq!(back.samples.len(), w.samples.len());
        for (a, b) in back.samples.iter().zip(&w.samples) {
            assert_eq!(a.to_bits(), b.to_bits());
        }
    }

    #[test]
    fn second_store_is_idempotent_and_findable() {
        let dir = tempfile::tempdir().unwrap();
        let w = small_w(2);
        let p1 = store_w(dir.path(), &w, false).unwrap();
        let p2 = store_w(dir.path(), &w, false).unwrap();
        assert_eq!(p1, p2);
        assert_eq!(find_w(dir.path(), &w.meta), Some(p1));
    }

    #[test]
    fn distinct_seeds_get_distinct_files() {
        let dir = tempfile::tempdir().unwrap();
        let a = store_w(dir.path(), &small_w(3), false).unwrap();
        let b = store_w(dir.path(), &small_w(4), false).unwrap();
        assert_ne!(a, b);
    }

    #[test]
    fn conflicting_content_requires_overwrite() {
        let dir = tempfile::tempdir().unwrap();
        let mut w = small_w(5);
        let path = store_w(dir.path(), &w, false).unwrap();
        w.samples[0] += 0.25;
        let err = store_w(dir.path(), &w, false).unwrap_err();
        assert!(matches!(err, Error::Cache(_)), "{err}");
        let replaced = store_w(dir.path(), &w, true).unwrap();
        assert_eq!(replaced, path);
        let back = load_w(&path).unwrap();
        assert_eq!(back.samples[0].to_bits(), w.samples[0].to_bits());
    }

    #[test]
    fn tampered_bytes_fail_the_checksum() {
        let dir = tempfile::tempdir().unwrap();
        let w = small_w(6);
        let path = store_w(dir.path(), &w, false).unwrap();
        let mut text = std::fs::read_to_string(&path).unwrap();
        text.push_str("0.5\n");
        std::fs::write(&path, text).unwrap();
        let err = load_w(&path).unwrap_err();
        assert!(matches!(err, Error::Cache(_)), "{err}");
    }
}
