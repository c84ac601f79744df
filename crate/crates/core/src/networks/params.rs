//! Flat named-array parameter archives with a JSON shape manifest.

use std::io::{Read, Write};

use serde::{Deserialize, Serialize};
use thiserror::Error;

/// Format tag written into every parameter archive.
pub const PARAMS_FORMAT: &str = "derain-params";
pub const PARAMS_VERSION: u32 = 1;

#[derive(Debug, Error)]
pub enum ParamsError {
    #[error("archive io: {0}")]
    Io(#[from] std::io::Error),
    #[error("bad archive header: {0}")]
    BadHeader(String),
    #[error("missing array {0:?}")]
    MissingEntry(String),
    #[error("array {name}: expected shape {expected:?}, found {got:?}")]
    ShapeMismatch {
        name: String,
        expected: Vec<usize>,
        got: Vec<usize>,
    },
}

/// One named weight array with its recorded shape.
#[derive(Debug, Clone, PartialEq)]
pub struct ParamEntry {
    pub name: String,
    pub shape: Vec<usize>,
    pub data: Vec<f64>,
}

impl ParamEntry {
    pub fn new(name: impl Into<String>, shape: Vec<usize>, data: Vec<f64>) -> Self {
        let entry = Self {
            name: name.into(),
            shape,
            data,
        };
        debug_assert_eq!(
            entry.shape.iter().product::<usize>(),
            entry.data.len(),
            "shape does not cover data for {}",
            entry.name
        );
        entry
    }
}

/// Ordered collection of named weight arrays; two builds from the same
/// config produce identical shape manifests.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct ParamSet {
    pub entries: Vec<ParamEntry>,
}

impl ParamSet {
    pub fn push(&mut self, name: impl Into<String>, shape: Vec<usize>, data: Vec<f64>) {
        self.entries.push(ParamEntry::new(name, shape, data));
    }

    /// Total number of scalar parameters.
    pub fn param_count(&self) -> usize {
        self.entries.iter().map(|e| e.data.len()).sum()
    }

    /// `(name, shape)` pairs in canonical order.
    pub fn shape_manifest(&self) -> Vec<(String, Vec<usize>)> {
        self.entries
            .iter()
            .map(|e| (e.name.clone(), e.shape.clone()))
            .collect()
    }

    pub fn get(&self, name: &str) -> Option<&ParamEntry> {
        self.entries.iter().find(|e| e.name == name)
    }

    /// Pull an entry by name, checking its shape.
    pub fn take(&self, name: &str, shape: &[usize]) -> Result<Vec<f64>, ParamsError> {
        let entry = self
            .get(name)
            .ok_or_else(|| ParamsError::MissingEntry(name.to_string()))?;
        if entry.shape != shape {
            return Err(ParamsError::ShapeMismatch {
                name: name.to_string(),
                expected: shape.to_vec(),
                got: entry.shape.clone(),
            });
        }
        Ok(entry.data.clone())
    }
}

#[derive(Serialize, Deserialize)]
struct ArrayHeader {
    name: String,
    shape: Vec<usize>,
    offset: usize,
    len: usize,
}

#[derive(Serialize, Deserialize)]
struct ArchiveHeader {
    format: String,
    version: u32,
    meta: serde_json::Value,
    arrays: Vec<ArrayHeader>,
}

/// Write `sets` as one archive: a single JSON header line followed by a
/// raw little-endian f64 payload. Saving the result of a load yields a
/// byte-identical archive.
pub fn write_archive<W: Write>(
    mut w: W,
    meta: &serde_json::Value,
    sets: &[(&str, &ParamSet)],
) -> Result<(), ParamsError> {
    let mut arrays = Vec::new();
    let mut offset = 0usize;
    for (prefix, set) in sets {
        for e in &set.entries {
            arrays.push(ArrayHeader {
                name: format!("{prefix}/{}", e.name),
                shape: e.shape.clone(),
                offset,
                len: e.data.len(),
            });
            offset += e.data.len();
        }
    }
    let header = ArchiveHeader {
        format: PARAMS_FORMAT.to_string(),
        version: PARAMS_VERSION,
        meta: meta.clone(),
        arrays,
    };
    let header_json = serde_json::to_string(&header).expect("header serializes");
    w.write_all(header_json.as_bytes())?;
    w.write_all(b"\n")?;
    for (_, set) in sets {
        for e in &set.entries {
            for v in &e.data {
                w.write_all(&v.to_le_bytes())?;
            }
        }
    }
    Ok(())
}

/// Read an archive back into per-prefix parameter sets plus its meta value.
pub fn read_archive<R: Read>(
    mut r: R,
) -> Result<(serde_json::Value, Vec<(String, ParamSet)>), ParamsError> {
    let mut bytes = Vec::new();
    r.read_to_end(&mut bytes)?;
    let newline = bytes
        .iter()
        .position(|&b| b == b'\n')
        .ok_or_else(|| ParamsError::BadHeader("missing header line".into()))?;
    let header: ArchiveHeader = serde_json::from_slice(&bytes[..newline])
        .map_err(|e| ParamsError::BadHeader(e.to_string()))?;
    if header.format != PARAMS_FORMAT {
        return Err(ParamsError::BadHeader(format!(
            "unexpected format tag {:?}",
            header.format
        )));
    }
    if header.version != PARAMS_VERSION {
        return Err(ParamsError::BadHeader(format!(
            "unsupported version {}",
            header.version
        )));
    }
    let payload = &bytes[newline + 1..];
    let mut sets: Vec<(String, ParamSet)> = Vec::new();
    for arr in &header.arrays {
        let (prefix, name) = arr
            .name
            .split_once('/')
            .ok_or_else(|| ParamsError::BadHeader(format!("unprefixed array {:?}", arr.name)))?;
        let start = arr.offset * 8;
        let end = start + arr.len * 8;
        if end > payload.len() {
            return Err(ParamsError::BadHeader(format!(
                "array {:?} overruns payload",
                arr.name
            )));
        }
        let data: Vec<f64> = payload[start..end]
            .chunks_exact(8)
            .map(|c| f64::from_le_bytes(c.try_into().expect("chunk of 8")))
            .collect();
        let set = match sets.iter_mut().find(|(p, _)| p == prefix) {
            Some((_, s)) => s,
            None => {
                sets.push((prefix.to_string(), ParamSet::default()));
                &mut sets.last_mut().expect("just pushed").1
            }
        };
        set.push(name, arr.shape.clone(), data);
    }
    Ok((header.meta, sets))
}
