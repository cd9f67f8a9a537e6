//! Embedding files.
//!
//! ```text
//! magic      8 bytes  "RAREMB01"
//! dim        u32
//! count      u64
//! label_len  u16, then label_len bytes of UTF-8 model label
//! count x { key_len u16, key bytes (UTF-8), dim x f32 }
//! ```
//!
//! Integers and floats are little-endian.

use std::fs::File;
use std::io::{BufReader, BufWriter, Read, Write};
use std::path::Path;

use indexmap::IndexMap;

use crate::error::{Error, Result};

pub const MAGIC: &[u8; 8] = b"RAREMB01";

/// Fixed-dimension vectors keyed by text-unit id, in file order.
#[derive(Debug, Clone, PartialEq)]
pub struct EmbeddingSet {
    dim: usize,
    label: String,
    entries: IndexMap<String, Vec<f32>>,
}

impl EmbeddingSet {
    pub fn new(dim: usize, label: impl Into<String>) -> Result<Self> {
        if dim == 0 {
            return Err(Error::Validation("embedding dimension must be positive".into()));
        }
        Ok(EmbeddingSet {
            dim,
            label: label.into(),
            entries: IndexMap::new(),
        })
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn label(&self) -> &str {
        &self.label
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    pub fn get(&self, key: &str) -> Option<&[f32]> {
        self.entries.get(key).map(Vec::as_slice)
    }

    pub fn contains(&self, key: &str) -> bool {
        self.entries.contains_key(key)
    }

    pub fn iter(&self) -> impl Iterator<Item = (&str, &[f32])> {
        self.entries.iter().map(|(k, v)| (k.as_str(), v.as_slice()))
    }

    pub fn insert(&mut self, key: impl Into<String>, vector: Vec<f32>) -> Result<()> {
        let key = key.into();
        if vector.len() != self.dim {
            return Err(Error::DimensionMismatch {
                key,
                expected: self.dim,
                found: vector.len(),
            });
        }
        if vector.iter().any(|x| !x.is_finite()) {
            return Err(Error::Validation(format!("embedding `{key}` has a non-finite component")));
        }
        if key.len() > u16::MAX as usize {
            return Err(Error::Validation(format!("embedding key `{key}` is too long")));
        }
        if self.entries.contains_key(&key) {
            return Err(Error::Validation(format!("duplicate embedding key `{key}`")));
        }
        self.entries.insert(key, vector);
        Ok(())
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let file = File::open(path).map_err(|e| Error::io(path, e))?;
        Self::read_from(&mut BufReader::new(file), path)
    }

    pub fn read_from(input: &mut impl Read, path: &Path) -> Result<Self> {
        let read = |input: &mut dyn Read, buf: &mut [u8], what: &str| -> Result<()> {
            input.read_exact(buf).map_err(|e| match e.kind() {
                std::io::ErrorKind::UnexpectedEof => {
                    Error::format(path, format!("truncated while reading {what}"))
                }
                _ => Error::io(path, e),
            })
        };
        let mut magic = [0u8; 8];
        read(input, &mut magic, "magic")?;
        if &magic != MAGIC {
            return Err(Error::format(path, "not an embedding file (bad magic)"));
        }
        let mut u32_buf = [0u8; 4];
        read(input, &mut u32_buf, "dimension")?;
        let dim = u32::from_le_bytes(u32_buf) as usize;
        let mut u64_buf = [0u8; 8];
        read(input, &mut u64_buf, "record count")?;
        let count = u64::from_le_bytes(u64_buf);
        let mut u16_buf = [0u8; 2];
        read(input, &mut u16_buf, "label length")?;
        let mut label = vec![0u8; u16::from_le_bytes(u16_buf) as usize];
        read(input, &mut label, "label")?;
        let label = String::from_utf8(label)
            .map_err(|_| Error::format(path, "model label is not UTF-8"))?;

        let mut set = EmbeddingSet::new(dim, label).map_err(|e| Error::format(path, e.to_string()))?;
        let mut vec_bytes = Vec::with_capacity(dim * 4);
        let mut previous: Option<String> = None;
        for record in 0..count {
            let context = || match &previous {
                Some(k) => format!("record {record} (after `{k}`)"),
                None => format!("record {record}"),
            };
            read(input, &mut u16_buf, "key length").map_err(|_| {
                Error::format(path, format!("truncated at {}", context()))
            })?;
            let mut key = vec![0u8; u16::from_le_bytes(u16_buf) as usize];
            read(input, &mut key, "key")
                .map_err(|_| Error::format(path, format!("truncated key at {}", context())))?;
            let key = String::from_utf8(key).map_err(|_| {
                Error::format(path, format!("key of {} is not UTF-8", context()))
            })?;

            vec_bytes.clear();
            input
                .by_ref()
                .take(dim as u64 * 4)
                .read_to_end(&mut vec_bytes)
                .map_err(|e| Error::io(path, e))?;
            if vec_bytes.len() != dim * 4 {
                return Err(Error::DimensionMismatch {
                    key,
                    expected: dim,
                    found: vec_bytes.len() / 4,
                });
            }
            let vector: Vec<f32> = vec_bytes
                .chunks_exact(4)
                .map(|c| f32::from_le_bytes([c[0], c[1], c[2], c[3]]))
                .collect();
            set.insert(key.clone(), vector)?;
            previous = Some(key);
        }
        let mut probe = [0u8; 1];
        if input.read(&mut probe).map_err(|e| Error::io(path, e))? != 0 {
            return Err(Error::format(
                path,
                format!("trailing bytes after {count} records (does the header dimension {dim} match the records?)"),
            ));
        }
        Ok(set)
    }

    pub fn save(&self, path: impl AsRef<Path>) -> Result<()> {
        let path = path.as_ref();
        let file = File::create(path).map_err(|e| Error::io(path, e))?;
        let mut out = BufWriter::new(file);
        self.write_to(&mut out)
            .and_then(|()| out.flush())
            .map_err(|e| Error::io(path, e))
    }

    pub fn write_to(&self, out: &mut impl Write) -> std::io::Result<()> {
        out.write_all(MAGIC)?;
        out.write_all(&(self.dim as u32).to_le_bytes())?;
        out.write_all(&(self.entries.len() as u64).to_le_bytes())?;
        let label = self.label.as_bytes();
        let label = &label[..label.len().min(u16::MAX as usize)];
        out.write_all(&(label.len() as u16).to_le_bytes())?;
        out.write_all(label)?;
        for (key, vector) in &self.entries {
            out.write_all(&(key.len() as u16).to_le_bytes())?;
            out.write_all(key.as_bytes())?;
            for x in vector {
                out.write_all(&x.to_le_bytes())?;
            }
        }
        Ok(())
    }
}
