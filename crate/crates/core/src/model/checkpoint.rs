//! Single-file archive of named parameter groups plus JSON metadata.
//!
//! Layout: 8-byte magic, `u32` format version, `u64` header length, a JSON
//! header describing every tensor, then the tensors as little-endian `f32`.

use std::io::{Read, Write};
use std::path::Path;

use serde::{Deserialize, Serialize};
use tensor::ParamStore;

use crate::error::{Error, Result};

const MAGIC: &[u8; 8] = b"TLGANARC";
pub const FORMAT_VERSION: u32 = 1;

#[derive(Serialize, Deserialize)]
struct TensorEntry {
    name: String,
    shape: Vec<usize>,
    offset: usize,
}

#[derive(Serialize, Deserialize)]
struct GroupEntry {
    name: String,
    tensors: Vec<TensorEntry>,
}

#[derive(Serialize, Deserialize)]
struct Header {
    kind: String,
    meta: serde_json::Value,
    groups: Vec<GroupEntry>,
}

#[derive(Clone, Debug)]
pub struct Archive {
    pub kind: String,
    pub meta: serde_json::Value,
    pub groups: Vec<(String, ParamStore)>,
}

impl Archive {
    pub fn new(kind: impl Into<String>, meta: serde_json::Value) -> Self {
        Self {
            kind: kind.into(),
            meta,
            groups: Vec::new(),
        }
    }

    pub fn with_group(mut self, name: impl Into<String>, store: &ParamStore) -> Self {
        self.groups.push((name.into(), store.clone()));
        self
    }

    pub fn group(&self, name: &str) -> Result<&ParamStore> {
        self.groups
            .iter()
            .find(|(n, _)| n == name)
            .map(|(_, s)| s)
            .ok_or_else(|| Error::Format(format!("archive has no group `{name}`")))
    }

    pub fn expect_kind(&self, kind: &str) -> Result<()> {
        if self.kind == kind {
            Ok(())
        } else {
            Err(Error::Format(format!("expected a `{kind}` archive, found `{}`", self.kind)))
        }
    }

    pub fn to_bytes(&self) -> Result<Vec<u8>> {
        let mut offset = 0;
        let mut groups = Vec::new();
        for (name, store) in &self.groups {
            let mut tensors = Vec::new();
            for (tname, t) in store.iter() {
                tensors.push(TensorEntry {
                    name: tname.clone(),
                    shape: t.shape().to_vec(),
                    offset,
                });
                offset += t.numel();
            }
            groups.push(GroupEntry {
                name: name.clone(),
                tensors,
            });
        }
        let header = serde_json::to_vec(&Header {
            kind: self.kind.clone(),
            meta: self.meta.clone(),
            groups,
        })?;
        let mut out = Vec::with_capacity(20 + header.len() + offset * 4);
        out.extend_from_slice(MAGIC);
        out.extend_from_slice(&FORMAT_VERSION.to_le_bytes());
        out.extend_from_slice(&(header.len() as u64).to_le_bytes());
        out.extend_from_slice(&header);
        for (_, store) in &self.groups {
            for (_, t) in store.iter() {
                for v in t.data() {
                    out.extend_from_slice(&v.to_le_bytes());
                }
            }
        }
        Ok(out)
    }

    pub fn from_bytes(bytes: &[u8]) -> Result<Self> {
        if bytes.len() < 20 || &bytes[..8] != MAGIC {
            return Err(Error::Format("not an archive (bad magic)".into()));
        }
        let version = u32::from_le_bytes(bytes[8..12].try_into().unwrap());
        if version > FORMAT_VERSION {
            return Err(Error::Format(format!(
                "archive format {version} is newer than supported {FORMAT_VERSION}"
            )));
        }
        let hlen = u64::from_le_bytes(bytes[12..20].try_into().unwrap()) as usize;
        let body_start = 20usize
            .checked_add(hlen)
            .filter(|&e| e <= bytes.len())
            .ok_or_else(|| Error::Format("truncated header".into()))?;
        let header: Header = serde_json::from_slice(&bytes[20..body_start])?;
        let body = &bytes[body_start..];
        let mut groups = Vec::new();
        for g in header.groups {
            let mut store = ParamStore::new();
            for t in g.tensors {
                let n: usize = t.shape.iter().product();
                let start = t.offset * 4;
                let end = start + n * 4;
                if end > body.len() {
                    return Err(Error::Format(format!("tensor `{}` runs past the end", t.name)));
                }
                let data = body[start..end]
                    .chunks_exact(4)
                    .map(|c| f32::from_le_bytes(c.try_into().unwrap()))
                    .collect();
                store.insert(t.name, data, &t.shape);
            }
            groups.push((g.name, store));
        }
        Ok(Self {
            kind: header.kind,
            meta: header.meta,
            groups,
        })
    }

    pub fn save(&self, path: impl AsRef<Path>) -> Result<()> {
        let bytes = self.to_bytes()?;
        let path = path.as_ref();
        let tmp = path.with_extension("partial");
        {
            let mut f = std::fs::File::create(&tmp)?;
            f.write_all(&bytes)?;
            f.sync_all()?;
        }
        std::fs::rename(tmp, path)?;
        Ok(())
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let mut bytes = Vec::new();
        std::fs::File::open(path.as_ref())?.read_to_end(&mut bytes)?;
        Self::from_bytes(&bytes)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn round_trip_is_bit_exact() {
        let mut s = ParamStore::new();
        s.insert("a", vec![1.5, f32::MIN_POSITIVE, -0.0, 3.0e-39], &[2, 2]);
        s.insert("b", vec![std::f32::consts::PI], &[1]);
        let arc = Archive::new("test", serde_json::json!({"x": 1})).with_group("g", &s);
        let back = Archive::from_bytes(&arc.to_bytes().unwrap()).unwrap();
        assert!(back.group("g").unwrap().bit_eq(&s));
        assert_eq!(back.meta["x"], 1);
        assert!(back.group("h").is_err());
    }

    #[test]
    fn rejects_newer_versions_and_garbage() {
        let arc = Archive::new("test", serde_json::Value::Null);
        let mut bytes = arc.to_bytes().unwrap();
        bytes[8..12].copy_from_slice(&(FORMAT_VERSION + 1).to_le_bytes());
        assert!(matches!(Archive::from_bytes(&bytes), Err(Error::Format(_))));
        assert!(Archive::from_bytes(b"nope").is_err());
    }
}
