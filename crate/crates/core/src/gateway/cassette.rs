//! On-disk map from request digest to completion text.

use serde::{Deserialize, Serialize};
use std::collections::BTreeMap;
use std::fs;
use std::path::Path;
use std::time::{SystemTime, UNIX_EPOCH};

use super::GatewayError;

#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct Cassette {
    pub model: String,
    #[serde(default)]
    pub created: u64,
    pub entries: BTreeMap<String, String>,
}

impl Cassette {
    pub fn new(model: &str) -> Self {
        let created = SystemTime::now()
            .duration_since(UNIX_EPOCH)
            .map(|d| d.as_secs())
            .unwrap_or(0);
        Cassette {
            model: model.to_string(),
            created,
            entries: BTreeMap::new(),
        }
    }

    pub fn load(path: &Path) -> Result<Self, GatewayError> {
        let text = fs::read_to_string(path).map_err(|e| GatewayError::CassetteUnreadable {
            path: path.display().to_string(),
            reason: e.to_string(),
        })?;
        let c: Cassette = serde_json::from_str(&text).map_err(|e| GatewayError::CassetteCorrupt {
            path: path.display().to_string(),
            reason: e.to_string(),
        })?;
        for k in c.entries.keys() {
            if k.len() != 64 || !k.bytes().all(|b| b.is_ascii_digit() || (b'a'..=b'f').contains(&b)) {
                return Err(GatewayError::CassetteCorrupt {
                    path: path.display().to_string(),
                    reason: format!("key `{k}` is not a lowercase sha-256 hex digest"),
                });
            }
        }
        Ok(c)
    }

    /// Write atomically through a sibling temp file.
    pub fn save(&self, path: &Path) -> Result<(), GatewayError> {
        let io = |e: std::io::Error| GatewayError::CassetteUnreadable {
            path: path.display().to_string(),
            reason: e.to_string(),
        };
        if let Some(dir) = path.parent() {
            if !dir.as_os_str().is_empty() {
                fs::create_dir_all(dir).map_err(io)?;
            }
        }
        let tmp = path.with_extension("json.tmp");
        let text = serde_json::to_string_pretty(self).expect("cassette serializes");
        fs::write(&tmp, text + "\n").map_err(io)?;
        fs::rename(&tmp, path).map_err(io)
    }

    pub fn get(&self, digest: &str) -> Option<&str> {
        self.entries.get(digest).map(String::as_str)
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn roundtrip_and_key_check() {
        let dir = tempfile::tempdir().unwrap();
        let p = dir.path().join("c.json");
        let mut c = Cassette::new("m");
        c.entries.insert("a".repeat(64), "hello".into());
        c.save(&p).unwrap();
        assert_eq!(Cassette::load(&p).unwrap(), c);

        std::fs::write(&p, r#"{"model":"m","entries":{"XYZ":"t"}}"#).unwrap();
        assert!(matches!(Cassette::load(&p), Err(GatewayError::CassetteCorrupt { .. })));
        std::fs::write(&p, "not json").unwrap();
        assert!(matches!(Cassette::load(&p), Err(GatewayError::CassetteCorrupt { .. })));
    }
}
