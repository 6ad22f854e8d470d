// SPDX-License-Identifier: MIT OR Apache-2.0

//! Memoization of null laws, in memory and optionally on disk.
//!
//! A law depends only on the statistic, the cluster sizes and the sampling
//! method, so it is computed once and reused across analyses. Files hold the
//! whole law rather than one cut-off, so every α is served from one entry.

use std::collections::HashMap;
use std::fs;
use std::path::{Path, PathBuf};
use std::sync::atomic::{AtomicUsize, Ordering};
use std::sync::{Arc, Mutex};

use serde::{Deserialize, Serialize};

use super::{compute_null, NullDistribution, NullKey, RandomizedThreshold};
use crate::{Error, Result};

/// Environment variable naming the on-disk cache directory.
pub const CACHE_DIR_ENV: &str = "HDCPD_CACHE_DIR";

/// Bumped whenever the file layout or the statistics change.
pub const CACHE_VERSION: u32 = 1;

#[derive(Serialize, Deserialize)]
struct CacheFile {
    version: u32,
    distribution: NullDistribution,
}

type Slot = Arc<Mutex<Option<Arc<NullDistribution>>>>;

/// Thread-safe store of null laws.
#[derive(Default)]
pub struct CutoffCache {
    dir: Option<PathBuf>,
    slots: Mutex<HashMap<NullKey, Slot>>,
    computations: AtomicUsize,
    write_lock: Mutex<()>,
}

impl std::fmt::Debug for CutoffCache {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("CutoffCache")
            .field("dir", &self.dir)
            .field("computations", &self.computations())
            .finish()
    }
}

impl CutoffCache {
    /// Memory-only cache.
    pub fn in_memory() -> Self {
        Self::default()
    }

    /// Cache backed by JSON files under `dir`, created if missing.
    pub fn with_dir(dir: impl Into<PathBuf>) -> Result<Self> {
        let dir = dir.into();
        fs::create_dir_all(&dir).map_err(|source| Error::CacheIo {
            path: dir.clone(),
            source,
        })?;
        Ok(Self {
            dir: Some(dir),
            ..Self::default()
        })
    }

    /// Disk-backed if `HDCPD_CACHE_DIR` is set, memory-only otherwise.
    pub fn from_env() -> Result<Self> {
        match std::env::var_os(CACHE_DIR_ENV) {
            Some(dir) if !dir.is_empty() => Self::with_dir(PathBuf::from(dir)),
            _ => Ok(Self::in_memory()),
        }
    }

    pub fn dir(&self) -> Option<&Path> {
        self.dir.as_deref()
    }

    /// Number of laws actually computed (not loaded) by this cache.
    pub fn computations(&self) -> usize {
        self.computations.load(Ordering::SeqCst)
    }

    fn path_for(&self, key: &NullKey) -> Option<PathBuf> {
        self.dir.as_ref().map(|d| d.join(format!("{}.json", key.file_stem())))
    }

    fn load(&self, key: &NullKey) -> Option<NullDistribution> {
        let path = self.path_for(key)?;
        let text = fs::read_to_string(path).ok()?;
        let file: CacheFile = serde_json::from_str(&text).ok()?;
        let valid = file.version == CACHE_VERSION
            && file.distribution.key() == *key
            && !file.distribution.support.is_empty()
            && file.distribution.support.len() == file.distribution.probs.len();
        valid.then_some(file.distribution)
    }

    fn store(&self, dist: &NullDistribution) -> Result<()> {
        let Some(path) = self.path_for(&dist.key()) else {
            return Ok(());
        };
        let text = serde_json::to_string(&CacheFile {
            version: CACHE_VERSION,
            distribution: dist.clone(),
        })
        .expect("null law serializes");
        let _guard = self.write_lock.lock().unwrap_or_else(|e| e.into_inner());
        let tmp = path.with_extension(format!("json.tmp{}", std::process::id()));
        let io = |source| Error::CacheIo {
            path: path.clone(),
            source,
        };
        fs::write(&tmp, text).map_err(io)?;
        fs::rename(&tmp, &path).map_err(io)
    }

    /// The law for `key`, from memory, disk, or a fresh computation.
    pub fn distribution(&self, key: &NullKey) -> Result<Arc<NullDistribution>> {
        let slot = {
            let mut slots = self.slots.lock().unwrap_or_else(|e| e.into_inner());
            slots.entry(*key).or_default().clone()
        };
        let mut guard = slot.lock().unwrap_or_else(|e| e.into_inner());
        if let Some(d) = guard.as_ref() {
            return Ok(d.clone());
        }
        let dist = match self.load(key) {
            Some(d) => d,
            None => {
                let d = compute_null(key)?;
                self.computations.fetch_add(1, Ordering::SeqCst);
                self.store(&d)?;
                d
            }
        };
        let dist = Arc::new(dist);
        *guard = Some(dist.clone());
        Ok(dist)
    }

    /// The law for `key` together with its level-α cut-off.
    pub fn threshold(&self, key: &NullKey, alpha: f64) -> Result<(Arc<NullDistribution>, RandomizedThreshold)> {
        let dist = self.distribution(key)?;
        let th = dist.threshold(alpha)?;
        Ok((dist, th))
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::nulldist::{NullPolicy, Statistic};
    use crate::singlecp::ImpurityKind;

    fn key() -> NullKey {
        NullKey::new(
            Statistic::ImpurityMin {
                impurity: ImpurityKind::Gini,
            },
            4,
            5,
            &NullPolicy::default(),
        )
    }

    #[test]
    fn memory_hit_does_not_recompute() {
        let cache = CutoffCache::in_memory();
        let a = cache.distribution(&key()).unwrap();
        let b = cache.distribution(&key()).unwrap();
        assert_eq!(a, b);
        assert_eq!(cache.computations(), 1);
    }

    #[test]
    fn disk_roundtrip_and_reuse() {
        let dir = tempfile::tempdir().unwrap();
        let first = CutoffCache::with_dir(dir.path()).unwrap();
        let a = first.threshold(&key(), 0.05).unwrap();
        assert_eq!(first.computations(), 1);
        let second = CutoffCache::with_dir(dir.path()).unwrap();
        let b = second.threshold(&key(), 0.05).unwrap();
        assert_eq!(second.computations(), 0);
        assert_eq!(a.0, b.0);
        assert_eq!(a.1, b.1);
        // a different alpha is served by the same entry
        second.threshold(&key(), 0.1).unwrap();
        assert_eq!(second.computations(), 0);
    }

    #[test]
    fn stale_or_corrupt_files_are_recomputed() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join(format!("{}.json", key().file_stem()));
        fs::write(&path, "not json").unwrap();
        let cache = CutoffCache::with_dir(dir.path()).unwrap();
        let good = cache.distribution(&key()).unwrap();
        assert_eq!(cache.computations(), 1);

        let stale = serde_json::to_string(&CacheFile {
            version: CACHE_VERSION + 1,
            distribution: (*good).clone(),
        })
        .unwrap();
        fs::write(&path, stale).unwrap();
        let cache = CutoffCache::with_dir(dir.path()).unwrap();
        cache.distribution(&key()).unwrap();
        assert_eq!(cache.computations(), 1);
        // overwritten with the current version
        let again = CutoffCache::with_dir(dir.path()).unwrap();
        again.distribution(&key()).unwrap();
        assert_eq!(again.computations(), 0);
    }

    #[test]
    fn concurrent_requests_compute_once() {
        use rayon::prelude::*;
        let cache = CutoffCache::in_memory();
        (0..32).into_par_iter().for_each(|_| {
            cache.distribution(&key()).unwrap();
        });
        assert_eq!(cache.computations(), 1);
    }
}
