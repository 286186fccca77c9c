//! The NNWA named-tensor archive.
//!
//! Layout, all integers little-endian:
//!
//! ```text
//! "NNWA" | u32 version | u32 n_meta | (u32 len, utf8 key, u32 len, utf8 value) * n_meta
//!        | u32 n_entries | per entry: u32 name_len, name, u8 dtype (0 = f32), u8 rank,
//!        u32 dims[rank], f32 payload (row-major)
//! ```
//!
//! Entries and metadata are written in byte-wise lexicographic order, so equal
//! archives always serialize to identical bytes.

use std::collections::BTreeMap;
use std::fmt;
use std::path::Path;

use crate::error::{Error, Result};
use crate::tensor::{Tensor, MAX_RANK};

pub const MAGIC: &[u8; 4] = b"NNWA";
pub const FORMAT_VERSION: u32 = 1;
pub const MAX_NAME_BYTES: usize = 256;
pub const FORMAT_VERSION_KEY: &str = "format_version";
const DTYPE_F32: u8 = 0;

#[derive(Clone, Debug, PartialEq)]
pub struct TensorArchive {
    entries: BTreeMap<String, Tensor>,
    metadata: BTreeMap<String, String>,
}

impl Default for TensorArchive {
    fn default() -> Self {
        Self::new()
    }
}

impl TensorArchive {
    pub fn new() -> Self {
        let mut metadata = BTreeMap::new();
        metadata.insert(FORMAT_VERSION_KEY.to_string(), FORMAT_VERSION.to_string());
        TensorArchive {
            entries: BTreeMap::new(),
            metadata,
        }
    }

    /// Adds a tensor; fails if the name is taken or too long.
    pub fn insert(&mut self, name: impl Into<String>, tensor: Tensor) -> Result<()> {
        let name = name.into();
        check_name(&name)?;
        if self.entries.contains_key(&name) {
            return Err(Error::Duplicate(name));
        }
        self.entries.insert(name, tensor);
        Ok(())
    }

    /// Inserts or overwrites `name`, returning the previous tensor.
    pub fn replace(&mut self, name: impl Into<String>, tensor: Tensor) -> Result<Option<Tensor>> {
        let name = name.into();
        check_name(&name)?;
        Ok(self.entries.insert(name, tensor))
    }

    pub fn remove(&mut self, name: &str) -> Option<Tensor> {
        self.entries.remove(name)
    }

    pub fn set_metadata(&mut self, key: impl Into<String>, value: impl Into<String>) {
        self.metadata.insert(key.into(), value.into());
    }

    pub fn get(&self, name: &str) -> Option<&Tensor> {
        self.entries.get(name)
    }

    pub fn metadata(&self) -> &BTreeMap<String, String> {
        &self.metadata
    }

    pub fn entries(&self) -> impl Iterator<Item = (&str, &Tensor)> {
        self.entries.iter().map(|(k, v)| (k.as_str(), v))
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        read_archive(&std::fs::read(path)?)
    }

    pub fn save(&self, path: impl AsRef<Path>) -> Result<()> {
        std::fs::write(path, write_archive(self)?)?;
        Ok(())
    }
}

fn check_name(name: &str) -> Result<()> {
    if name.len() > MAX_NAME_BYTES {
        return Err(Error::Format(format!(
            "tensor name is {} bytes, limit is {MAX_NAME_BYTES}",
            name.len()
        )));
    }
    Ok(())
}

pub fn write_archive(archive: &TensorArchive) -> Result<Vec<u8>> {
    if !archive.metadata.contains_key(FORMAT_VERSION_KEY) {
        return Err(Error::Format(format!("metadata lacks `{FORMAT_VERSION_KEY}`")));
    }
    let payload: usize = archive.entries.values().map(|t| t.len() * 4).sum();
    let mut out = Vec::with_capacity(16 + payload + 64 * archive.entries.len());
    out.extend_from_slice(MAGIC);
    put_u32(&mut out, FORMAT_VERSION);
    put_u32(&mut out, len_u32(archive.metadata.len())?);
    for (k, v) in &archive.metadata {
        put_str(&mut out, k)?;
        put_str(&mut out, v)?;
    }
    put_u32(&mut out, len_u32(archive.entries.len())?);
    for (name, tensor) in &archive.entries {
        check_name(name)?;
        put_str(&mut out, name)?;
        out.push(DTYPE_F32);
        out.push(tensor.rank() as u8);
        for &d in tensor.dims() {
            put_u32(&mut out, len_u32(d)?);
        }
        for v in tensor.data() {
            out.extend_from_slice(&v.to_le_bytes());
        }
    }
    Ok(out)
}

fn len_u32(n: usize) -> Result<u32> {
    u32::try_from(n).map_err(|_| Error::Format(format!("length {n} exceeds u32")))
}

fn put_u32(out: &mut Vec<u8>, v: u32) {
    out.extend_from_slice(&v.to_le_bytes());
}

fn put_str(out: &mut Vec<u8>, s: &str) -> Result<()> {
    put_u32(out, len_u32(s.len())?);
    out.extend_from_slice(s.as_bytes());
    Ok(())
}

/// Bounds-checked little-endian cursor.
struct Cursor<'a> {
    bytes: &'a [u8],
    pos: usize,
}

impl<'a> Cursor<'a> {
    fn take(&mut self, n: usize) -> Result<&'a [u8]> {
        let available = self.bytes.len() - self.pos;
        if n > available {
            return Err(Error::Truncated {
                offset: self.pos,
                needed: n,
                available,
            });
        }
        let s = &self.bytes[self.pos..self.pos + n];
        self.pos += n;
        Ok(s)
    }

    fn u8(&mut self) -> Result<u8> {
        Ok(self.take(1)?[0])
    }

    fn u32(&mut self) -> Result<u32> {
        let b = self.take(4)?;
        Ok(u32::from_le_bytes([b[0], b[1], b[2], b[3]]))
    }

    fn string(&mut self, what: &str) -> Result<String> {
        let at = self.pos;
        let len = self.u32()? as usize;
        let raw = self.take(len)?;
        String::from_utf8(raw.to_vec())
            .map_err(|_| Error::Format(format!("{what} at byte {at} is not valid UTF-8")))
    }
}

pub fn read_archive(bytes: &[u8]) -> Result<TensorArchive> {
    let mut cur = Cursor { bytes, pos: 0 };
    let magic = cur.take(4).map_err(|_| Error::Format("missing NNWA magic".into()))?;
    if magic != MAGIC {
        return Err(Error::Format(format!("bad magic {magic:?}, expected \"NNWA\"")));
    }
    let version = cur.u32()?;
    if version != FORMAT_VERSION {
        return Err(Error::Version(version));
    }

    let mut metadata = BTreeMap::new();
    for _ in 0..cur.u32()? {
        let key = cur.string("metadata key")?;
        let value = cur.string("metadata value")?;
        if metadata.insert(key.clone(), value).is_some() {
            return Err(Error::Format(format!("duplicate metadata key `{key}`")));
        }
    }
    if !metadata.contains_key(FORMAT_VERSION_KEY) {
        return Err(Error::Format(format!("metadata lacks `{FORMAT_VERSION_KEY}`")));
    }

    let mut entries = BTreeMap::new();
    for _ in 0..cur.u32()? {
        let at = cur.pos;
        let name = cur.string("tensor name")?;
        check_name(&name)?;
        let dtype = cur.u8()?;
        if dtype != DTYPE_F32 {
            return Err(Error::Format(format!(
                "tensor `{name}` at byte {at} has unsupported dtype {dtype}"
            )));
        }
        let rank = cur.u8()? as usize;
        if rank == 0 || rank > MAX_RANK {
            return Err(Error::Format(format!("tensor `{name}` has rank {rank}")));
        }
        let mut dims = Vec::with_capacity(rank);
        for _ in 0..rank {
            dims.push(cur.u32()? as usize);
        }
        let count = dims
            .iter()
            .try_fold(1usize, |acc, &d| acc.checked_mul(d))
            .filter(|&n| n > 0)
            .ok_or_else(|| Error::Format(format!("tensor `{name}` has invalid dims {dims:?}")))?;
        let nbytes = count
            .checked_mul(4)
            .ok_or_else(|| Error::Format(format!("tensor `{name}` is too large")))?;
        let raw = cur.take(nbytes)?;
        let data = raw
            .chunks_exact(4)
            .map(|b| f32::from_le_bytes([b[0], b[1], b[2], b[3]]))
            .collect();
        let tensor = Tensor::new(dims, data)?;
        if entries.insert(name.clone(), tensor).is_some() {
            return Err(Error::Duplicate(name));
        }
    }
    if cur.pos != bytes.len() {
        return Err(Error::Format(format!(
            "{} trailing bytes after last entry at byte {}",
            bytes.len() - cur.pos,
            cur.pos
        )));
    }
    Ok(TensorArchive { entries, metadata })
}

/// Expected tensor names and dims for one network.
pub type Manifest = Vec<(String, Vec<usize>)>;

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct ShapeMismatch {
    pub name: String,
    pub expected: Vec<usize>,
    pub actual: Vec<usize>,
}

#[derive(Clone, Debug, Default, PartialEq, Eq)]
pub struct ValidationReport {
    pub missing: Vec<String>,
    pub extra: Vec<String>,
    pub mismatched: Vec<ShapeMismatch>,
}

impl ValidationReport {
    pub fn is_empty(&self) -> bool {
        self.missing.is_empty() && self.extra.is_empty() && self.mismatched.is_empty()
    }
}

impl fmt::Display for ValidationReport {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        if self.is_empty() {
            return write!(f, "archive matches manifest");
        }
        for name in &self.missing {
            writeln!(f, "missing: {name}")?;
        }
        for name in &self.extra {
            writeln!(f, "extra: {name}")?;
        }
        for m in &self.mismatched {
            writeln!(
                f,
                "shape mismatch: {} expected {:?}, found {:?}",
                m.name, m.expected, m.actual
            )?;
        }
        Ok(())
    }
}

pub fn validate_manifest(archive: &TensorArchive, manifest: &[(String, Vec<usize>)]) -> ValidationReport {
    let mut report = ValidationReport::default();
    let mut expected = BTreeMap::new();
    for (name, dims) in manifest {
        expected.insert(name.as_str(), dims);
        match archive.get(name) {
            None => report.missing.push(name.clone()),
            Some(t) if t.dims() != dims.as_slice() => report.mismatched.push(ShapeMismatch {
                name: name.clone(),
                expected: dims.clone(),
                actual: t.dims().to_vec(),
            }),
            Some(_) => {}
        }
    }
    report.extra = archive
        .entries
        .keys()
        .filter(|k| !expected.contains_key(k.as_str()))
        .cloned()
        .collect();
    report
}

#[cfg(test)]
mod tests {
    use super::*;

    fn sample() -> TensorArchive {
        let mut a = TensorArchive::new();
        a.insert("w", Tensor::new(vec![2, 2], vec![1.0, 2.0, 3.0, 4.0]).unwrap())
            .unwrap();
        a
    }

    #[test]
    fn empty_archive_layout() {
        let bytes = write_archive(&TensorArchive::new()).unwrap();
        let meta_block = 4 + FORMAT_VERSION_KEY.len() + 4 + 1;
        assert_eq!(bytes.len(), 16 + meta_block);
        assert_eq!(&bytes[..4], b"NNWA");
        assert_eq!(&bytes[4..8], &1u32.to_le_bytes());
        assert_eq!(&bytes[8..12], &1u32.to_le_bytes());
        assert_eq!(&bytes[bytes.len() - 4..], &0u32.to_le_bytes());
        let back = read_archive(&bytes).unwrap();
        assert!(back.is_empty());
        assert_eq!(write_archive(&back).unwrap(), bytes);
    }

    #[test]
    fn single_tensor_round_trip() {
        let a = sample();
        let back = read_archive(&write_archive(&a).unwrap()).unwrap();
        assert_eq!(back.get("w").unwrap().dims(), &[2, 2]);
        assert_eq!(back.get("w").unwrap().data(), &[1.0, 2.0, 3.0, 4.0]);
    }

    #[test]
    fn insertion_order_does_not_matter() {
        let t = |v: f32| Tensor::from_vec(vec![v]).unwrap();
        let mut a = TensorArchive::new();
        a.insert("b", t(1.0)).unwrap();
        a.insert("a", t(2.0)).unwrap();
        let mut b = TensorArchive::new();
        b.insert("a", t(2.0)).unwrap();
        b.insert("b", t(1.0)).unwrap();
        assert_eq!(write_archive(&a).unwrap(), write_archive(&b).unwrap());
        assert_eq!(write_archive(&a).unwrap(), write_archive(&a).unwrap());
    }

    #[test]
    fn bad_magic_and_version() {
        let mut bytes = write_archive(&sample()).unwrap();
        bytes[0] = b'X';
        assert!(matches!(read_archive(&bytes), Err(Error::Format(_))));
        let mut bytes = write_archive(&sample()).unwrap();
        bytes[4] = 2;
        assert!(matches!(read_archive(&bytes), Err(Error::Version(2))));
    }

    #[test]
    fn truncation_reports_offset() {
        let bytes = write_archive(&sample()).unwrap();
        let cut = &bytes[..bytes.len() - 3];
        match read_archive(cut) {
            Err(Error::Truncated {
                offset,
                needed,
                available,
            }) => {
                assert_eq!(needed, 16);
                assert_eq!(available, 13);
                assert_eq!(offset, bytes.len() - 16);
            }
            other => panic!("expected truncation, got {other:?}"),
        }
        let mut longer = bytes.clone();
        longer.push(0);
        assert!(matches!(read_archive(&longer), Err(Error::Format(_))));
    }

    #[test]
    fn duplicate_names_rejected() {
        let mut a = sample();
        assert!(matches!(
            a.insert("w", Tensor::from_vec(vec![0.0]).unwrap()),
            Err(Error::Duplicate(_))
        ));
        // Forge a file with the same entry twice.
        let bytes = write_archive(&sample()).unwrap();
        let header_end = 16 + 4 + FORMAT_VERSION_KEY.len() + 4 + 1 - 4;
        let entry = &bytes[header_end + 4..];
        let mut forged = bytes[..header_end].to_vec();
        forged.extend_from_slice(&2u32.to_le_bytes());
        forged.extend_from_slice(entry);
        forged.extend_from_slice(entry);
        assert!(matches!(read_archive(&forged), Err(Error::Duplicate(_))));
    }

    #[test]
    fn long_names_rejected() {
        let mut a = TensorArchive::new();
        let name = "x".repeat(MAX_NAME_BYTES + 1);
        assert!(matches!(
            a.insert(name, Tensor::from_vec(vec![0.0]).unwrap()),
            Err(Error::Format(_))
        ));
    }

    #[test]
    fn manifest_validation_findings() {
        let a = sample();
        let exact = vec![("w".to_string(), vec![2, 2])];
        assert!(validate_manifest(&a, &exact).is_empty());

        let missing = vec![("w".to_string(), vec![2, 2]), ("v".to_string(), vec![1])];
        let r = validate_manifest(&a, &missing);
        assert_eq!(r.missing, vec!["v".to_string()]);
        assert!(r.extra.is_empty() && r.mismatched.is_empty());

        let mut b = TensorArchive::new();
        b.insert("m", Tensor::zeros(vec![2, 3]).unwrap()).unwrap();
        let r = validate_manifest(&b, &[("m".to_string(), vec![3, 2])]);
        assert_eq!(
            r.mismatched,
            vec![ShapeMismatch {
                name: "m".into(),
                expected: vec![3, 2],
                actual: vec![2, 3]
            }]
        );
        let text = r.to_string();
        assert!(text.contains("[3, 2]") && text.contains("[2, 3]"));

        let r = validate_manifest(&a, &[]);
        assert_eq!(r.extra, vec!["w".to_string()]);
    }
}
