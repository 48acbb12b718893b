//! Append-only, checksummed record log with an in-memory index.
//!
//! Each entry is `[u32 LE body length][body][sha256(body)]` with body
//! `op u8 | identity length u16 | identity | record bytes` (`op` 1 = put,
//! 2 = delete, delete has no record bytes). Replaying the log on open
//! rebuilds the index; a checksum mismatch anywhere is an integrity error.

use std::collections::BTreeMap;
use std::fs::{File, OpenOptions};
use std::io::{Read, Write};
use std::os::unix::fs::FileExt;
use std::path::{Path, PathBuf};
use std::sync::{Mutex, RwLock};

use sha2::{Digest, Sha256};

use super::wire::ErrorCode;
use crate::{Error, Result};

const OP_PUT: u8 = 1;
const OP_DELETE: u8 = 2;
const CHECKSUM_LEN: usize = 32;

#[derive(Clone, Copy, Debug)]
struct Location {
    /// Offset of the entry's length prefix.
    offset: u64,
    body_len: u32,
}

pub struct TemplateStore {
    path: PathBuf,
    reader: File,
    writer: Mutex<File>,
    index: RwLock<BTreeMap<String, Location>>,
}

impl std::fmt::Debug for TemplateStore {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("TemplateStore")
            .field("path", &self.path)
            .finish_non_exhaustive()
    }
}

fn checksum(body: &[u8]) -> [u8; CHECKSUM_LEN] {
    Sha256::digest(body).into()
}

fn parse_body(body: &[u8]) -> Result<(u8, String, usize)> {
    if body.len() < 3 {
        return Err(Error::Integrity("short store entry".into()));
    }
    let op = body[0];
    let id_len = u16::from_le_bytes([body[1], body[2]]) as usize;
    let id_end = 3 + id_len;
    if body.len() < id_end || !(op == OP_PUT || op == OP_DELETE) {
        return Err(Error::Integrity("bad store entry header".into()));
    }
    let identity = std::str::from_utf8(&body[3..id_end])
        .map_err(|_| Error::Integrity("identity is not UTF-8".into()))?
        .to_string();
    Ok((op, identity, id_end))
}

impl TemplateStore {
    /// Open or create the log at `path` and replay it.
    pub fn open(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref().to_path_buf();
        let mut writer = OpenOptions::new()
            .create(true)
            .read(true)
            .append(true)
            .open(&path)?;
        let mut data = Vec::new();
        writer.read_to_end(&mut data)?;
        let mut index = BTreeMap::new();
        let mut pos = 0usize;
        while pos < data.len() {
            if data.len() - pos < 4 {
                return Err(Error::Integrity(format!("truncated entry at offset {pos}")));
            }
            let body_len = u32::from_le_bytes(data[pos..pos + 4].try_into().unwrap()) as usize;
            let end = pos + 4 + body_len + CHECKSUM_LEN;
            if end > data.len() {
                return Err(Error::Integrity(format!("truncated entry at offset {pos}")));
            }
            let body = &data[pos + 4..pos + 4 + body_len];
            if checksum(body)[..] != data[pos + 4 + body_len..end] {
                return Err(Error::Integrity(format!(
                    "checksum mismatch at offset {pos}"
                )));
            }
            let (op, identity, _) = parse_body(body)?;
            if op == OP_PUT {
                index.insert(
                    identity,
                    Location {
                        offset: pos as u64,
                        body_len: body_len as u32,
                    },
                );
            } else {
                index.remove(&identity);
            }
            pos = end;
        }
        let reader = File::open(&path)?;
        Ok(Self {
            path,
            reader,
            writer: Mutex::new(writer),
            index: RwLock::new(index),
        })
    }

    pub fn path(&self) -> &Path {
        &self.path
    }

    fn append(&self, file: &mut File, body: &[u8]) -> Result<u64> {
        let offset = file.metadata()?.len();
        let mut entry = Vec::with_capacity(body.len() + 4 + CHECKSUM_LEN);
        entry.extend_from_slice(&(body.len() as u32).to_le_bytes());
        entry.extend_from_slice(body);
        entry.extend_from_slice(&checksum(body));
        file.write_all(&entry)?;
        file.sync_data()?;
        Ok(offset)
    }

    fn body(op: u8, identity: &str, record: &[u8]) -> Result<Vec<u8>> {
        if identity.len() > u16::MAX as usize {
            return Err(Error::InvalidParameter("identity too long".into()));
        }
        if record.len() + identity.len() + 3 > u32::MAX as usize {
            return Err(Error::Capacity("record too large for the store".into()));
        }
        let mut body = Vec::with_capacity(3 + identity.len() + record.len());
        body.push(op);
        body.extend_from_slice(&(identity.len() as u16).to_le_bytes());
        body.extend_from_slice(identity.as_bytes());
        body.extend_from_slice(record);
        Ok(body)
    }

    /// Store a new record; an existing identity is an error.
    pub fn put(&self, identity: &str, record: &[u8]) -> Result<()> {
        let body = Self::body(OP_PUT, identity, record)?;
        let mut file = self.writer.lock().expect("store writer poisoned");
        if self.contains(identity) {
            return Err(Error::Protocol {
                code: ErrorCode::Duplicate,
                message: format!("identity {identity:?} already enrolled"),
            });
        }
        let offset = self.append(&mut file, &body)?;
        self.index.write().expect("store index poisoned").insert(
            identity.to_string(),
            Location {
                offset,
                body_len: body.len() as u32,
            },
        );
        Ok(())
    }

    pub fn get(&self, identity: &str) -> Result<Vec<u8>> {
        let loc = self
            .index
            .read()
            .expect("store index poisoned")
            .get(identity)
            .copied()
            .ok_or_else(|| Error::NotFound(format!("identity {identity:?}")))?;
        let total = 4 + loc.body_len as usize + CHECKSUM_LEN;
        let mut entry = vec![0u8; total];
        self.reader.read_exact_at(&mut entry, loc.offset)?;
        let body = &entry[4..4 + loc.body_len as usize];
        if checksum(body)[..] != entry[4 + loc.body_len as usize..] {
            return Err(Error::Integrity(format!(
                "record for {identity:?} is corrupt"
            )));
        }
        let (_, stored_id, start) = parse_body(body)?;
        if stored_id != identity {
            return Err(Error::Integrity("index points at another record".into()));
        }
        Ok(body[start..].to_vec())
    }

    /// Revoke an identity.
    pub fn delete(&self, identity: &str) -> Result<()> {
        let body = Self::body(OP_DELETE, identity, &[])?;
        let mut file = self.writer.lock().expect("store writer poisoned");
        if !self.contains(identity) {
            return Err(Error::NotFound(format!("identity {identity:?}")));
        }
        self.append(&mut file, &body)?;
        self.index
            .write()
            .expect("store index poisoned")
            .remove(identity);
        Ok(())
    }

    pub fn contains(&self, identity: &str) -> bool {
        self.index
            .read()
            .expect("store index poisoned")
            .contains_key(identity)
    }

    pub fn identities(&self) -> Vec<String> {
        self.index
            .read()
            .expect("store index poisoned")
            .keys()
            .cloned()
            .collect()
    }

    pub fn len(&self) -> usize {
        self.index.read().expect("store index poisoned").len()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }
}
