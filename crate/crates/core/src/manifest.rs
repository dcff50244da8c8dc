//! Replay manifests: one `path<TAB>ts_ns` per line.

use alloc::collections::BTreeSet;
use alloc::string::{String, ToString};
use alloc::vec::Vec;
use core::fmt;

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ManifestEntry {
    pub path: String,
    pub ts_ns: u64,
}

#[derive(Debug, Clone, PartialEq, Eq, Default)]
pub struct FrameManifest {
    pub base_dir: String,
    pub entries: Vec<ManifestEntry>,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum ManifestError {
    Malformed { line: usize, reason: String },
    DuplicatePath { line: usize, path: String },
    SampleTooLarge { k: usize, available: usize },
}

impl fmt::Display for ManifestError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            ManifestError::Malformed { line, reason } => write!(f, "line {line}: {reason}"),
            ManifestError::DuplicatePath { line, path } => write!(f, "line {line}: duplicate path {path:?}"),
            ManifestError::SampleTooLarge { k, available } => {
                write!(f, "cannot sample {k} entries from a manifest of {available}")
            }
        }
    }
}

impl core::error::Error for ManifestError {}

impl FrameManifest {
    /// Parse manifest text. Blank lines are ignored; line numbers in errors
    /// are 1-based.
    pub fn parse(text: &str, base_dir: impl Into<String>) -> Result<Self, ManifestError> {
        let mut entries = Vec::new();
        let mut seen = BTreeSet::new();
        for (idx, line) in text.split('\n').enumerate() {
            let line_no = idx + 1;
            if line.is_empty() {
                continue;
            }
            let malformed = |reason: &str| ManifestError::Malformed { line: line_no, reason: reason.to_string() };
            let mut fields = line.split('\t');
            let (Some(path), Some(ts), None) = (fields.next(), fields.next(), fields.next()) else {
                return Err(malformed("expected exactly two TAB-separated fields"));
            };
            if path.is_empty() {
                return Err(malformed("empty path"));
            }
            let ts_ns: u64 = ts
                .parse()
                .map_err(|_| ManifestError::Malformed { line: line_no, reason: alloc::format!("non-numeric timestamp {ts:?}") })?;
            if !seen.insert(path.to_string()) {
                return Err(ManifestError::DuplicatePath { line: line_no, path: path.to_string() });
            }
            entries.push(ManifestEntry { path: path.to_string(), ts_ns });
        }
        entries.sort_by_key(|e| e.ts_ns);
        Ok(Self { base_dir: base_dir.into(), entries })
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    /// Serialize back to manifest text (LF endings).
    pub fn to_text(&self) -> String {
        let mut out = String::new();
        for e in &self.entries {
            out.push_str(&e.path);
            out.push('\t');
            out.push_str(&e.ts_ns.to_string());
            out.push('\n');
        }
        out
    }

    /// Keep `k` entries at indices `floor(i * N / k)`, preserving order.
    pub fn sample_uniform(&self, k: usize) -> Result<Self, ManifestError> {
        let entries = sample_indices(self.entries.len(), k)?
            .into_iter()
            .map(|i| self.entries[i].clone())
            .collect();
        Ok(Self { base_dir: self.base_dir.clone(), entries })
    }
}

/// Indices `floor(i * n / k)` for `i in 0..k`.
pub fn sample_indices(n: usize, k: usize) -> Result<Vec<usize>, ManifestError> {
    if k > n {
        return Err(ManifestError::SampleTooLarge { k, available: n });
    }
    Ok((0..k).map(|i| ((i as u128 * n as u128) / k as u128) as usize).collect())
}
