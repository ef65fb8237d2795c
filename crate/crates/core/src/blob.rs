//! Binary container used by checkpoints and distance tables.
//!
//! Layout: magic bytes `USCR`, format version (u16 LE), a JSON header
//! (u32 LE length prefix), then a tensor count (u32 LE) followed by named
//! tensor blobs: name (u16 LE length + UTF-8), dtype (u8), rank (u8),
//! dims (u32 LE each), and little-endian element data. Readers reject
//! unknown versions and unknown dtypes.

use std::fs::File;
use std::io::{BufReader, BufWriter, Read, Write};
use std::path::Path;

use crate::error::{Error, Result};

pub const MAGIC: [u8; 4] = *b"USCR";
pub const VERSION: u16 = 1;

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum DType {
    F32,
    F64,
    U8,
    U32,
    U64,
}

impl DType {
    fn code(self) -> u8 {
        match self {
            DType::F32 => 1,
            DType::F64 => 2,
            DType::U8 => 3,
            DType::U32 => 4,
            DType::U64 => 5,
        }
    }

    fn from_code(code: u8) -> Result<Self> {
        Ok(match code {
            1 => DType::F32,
            2 => DType::F64,
            3 => DType::U8,
            4 => DType::U32,
            5 => DType::U64,
            _ => return Err(Error::BadCheckpoint(format!("unknown dtype code {code}"))),
        })
    }

    pub fn size(self) -> usize {
        match self {
            DType::F32 | DType::U32 => 4,
            DType::F64 | DType::U64 => 8,
            DType::U8 => 1,
        }
    }

    pub fn name(self) -> &'static str {
        match self {
            DType::F32 => "f32",
            DType::F64 => "f64",
            DType::U8 => "u8",
            DType::U32 => "u32",
            DType::U64 => "u64",
        }
    }
}

/// One named tensor: raw little-endian bytes plus shape metadata.
#[derive(Clone, Debug)]
pub struct Tensor {
    pub name: String,
    pub dtype: DType,
    pub dims: Vec<u32>,
    pub bytes: Vec<u8>,
}

impl Tensor {
    pub fn from_f32(name: &str, dims: Vec<u32>, values: &[f32]) -> Self {
        let bytes = values.iter().flat_map(|v| v.to_le_bytes()).collect();
        Tensor { name: name.to_string(), dtype: DType::F32, dims, bytes }
    }

    pub fn from_f64(name: &str, dims: Vec<u32>, values: &[f64]) -> Self {
        let bytes = values.iter().flat_map(|v| v.to_le_bytes()).collect();
        Tensor { name: name.to_string(), dtype: DType::F64, dims, bytes }
    }

    pub fn from_u8(name: &str, dims: Vec<u32>, values: &[u8]) -> Self {
        Tensor { name: name.to_string(), dtype: DType::U8, dims, bytes: values.to_vec() }
    }

    pub fn from_u64(name: &str, dims: Vec<u32>, values: &[u64]) -> Self {
        let bytes = values.iter().flat_map(|v| v.to_le_bytes()).collect();
        Tensor { name: name.to_string(), dtype: DType::U64, dims, bytes }
    }

    pub fn element_count(&self) -> usize {
        self.dims.iter().map(|&d| d as usize).product()
    }

    pub fn as_f32(&self) -> Result<Vec<f32>> {
        self.expect_dtype(DType::F32)?;
        Ok(self
            .bytes
            .chunks_exact(4)
            .map(|c| f32::from_le_bytes(c.try_into().unwrap()))
            .collect())
    }

    pub fn as_f64(&self) -> Result<Vec<f64>> {
        self.expect_dtype(DType::F64)?;
        Ok(self
            .bytes
            .chunks_exact(8)
            .map(|c| f64::from_le_bytes(c.try_into().unwrap()))
            .collect())
    }

    pub fn as_u8(&self) -> Result<Vec<u8>> {
        self.expect_dtype(DType::U8)?;
        Ok(self.bytes.clone())
    }

    pub fn as_u64(&self) -> Result<Vec<u64>> {
        self.expect_dtype(DType::U64)?;
        Ok(self
            .bytes
            .chunks_exact(8)
            .map(|c| u64::from_le_bytes(c.try_into().unwrap()))
            .collect())
    }

    fn expect_dtype(&self, want: DType) -> Result<()> {
        if self.dtype != want {
            return Err(Error::BadCheckpoint(format!(
                "tensor `{}` is {}, expected {}",
                self.name,
                self.dtype.name(),
                want.name()
            )));
        }
        Ok(())
    }
}

/// A parsed container: JSON header plus tensors in file order.
#[derive(Debug)]
pub struct Container {
    pub header: serde_json::Value,
    pub tensors: Vec<Tensor>,
}

impl Container {
    pub fn new(header: serde_json::Value) -> Self {
        Container { header, tensors: Vec::new() }
    }

    pub fn push(&mut self, tensor: Tensor) {
        self.tensors.push(tensor);
    }

    pub fn find(&self, name: &str) -> Result<&Tensor> {
        self.tensors
            .iter()
            .find(|t| t.name == name)
            .ok_or_else(|| Error::BadCheckpoint(format!("missing tensor `{name}`")))
    }

    pub fn write_to(&self, w: &mut impl Write) -> Result<()> {
        w.write_all(&MAGIC)?;
        w.write_all(&VERSION.to_le_bytes())?;
        let header = serde_json::to_vec(&self.header)
            .map_err(|e| Error::BadCheckpoint(format!("header: {e}")))?;
        w.write_all(&(header.len() as u32).to_le_bytes())?;
        w.write_all(&header)?;
        w.write_all(&(self.tensors.len() as u32).to_le_bytes())?;
        for t in &self.tensors {
            let name = t.name.as_bytes();
            w.write_all(&(name.len() as u16).to_le_bytes())?;
            w.write_all(name)?;
            w.write_all(&[t.dtype.code(), t.dims.len() as u8])?;
            for &d in &t.dims {
                w.write_all(&d.to_le_bytes())?;
            }
            debug_assert_eq!(t.bytes.len(), t.element_count() * t.dtype.size());
            w.write_all(&t.bytes)?;
        }
        Ok(())
    }

    pub fn read_from(r: &mut impl Read) -> Result<Self> {
        let mut magic = [0u8; 4];
        r.read_exact(&mut magic)?;
        if magic != MAGIC {
            return Err(Error::BadCheckpoint("bad magic bytes".into()));
        }
        let version = read_u16(r)?;
        if version != VERSION {
            return Err(Error::BadCheckpoint(format!(
                "unsupported format version {version} (expected {VERSION})"
            )));
        }
        let header_len = read_u32(r)? as usize;
        let mut header_bytes = vec![0u8; header_len];
        r.read_exact(&mut header_bytes)?;
        let header = serde_json::from_slice(&header_bytes)
            .map_err(|e| Error::BadCheckpoint(format!("header: {e}")))?;
        let count = read_u32(r)? as usize;
        let mut tensors = Vec::with_capacity(count);
        for _ in 0..count {
            let name_len = read_u16(r)? as usize;
            let mut name = vec![0u8; name_len];
            r.read_exact(&mut name)?;
            let name = String::from_utf8(name)
                .map_err(|_| Error::BadCheckpoint("tensor name is not UTF-8".into()))?;
            let mut meta = [0u8; 2];
            r.read_exact(&mut meta)?;
            let dtype = DType::from_code(meta[0])?;
            let mut dims = Vec::with_capacity(meta[1] as usize);
            for _ in 0..meta[1] {
                dims.push(read_u32(r)?);
            }
            let len: usize = dims.iter().map(|&d| d as usize).product::<usize>() * dtype.size();
            let mut bytes = vec![0u8; len];
            r.read_exact(&mut bytes)?;
            tensors.push(Tensor { name, dtype, dims, bytes });
        }
        Ok(Container { header, tensors })
    }

    /// Write atomically: a temp file in the target directory, then rename.
    pub fn save(&self, path: &Path) -> Result<()> {
        let tmp = temp_sibling(path);
        {
            let mut w = BufWriter::new(File::create(&tmp)?);
            self.write_to(&mut w)?;
            w.flush()?;
        }
        std::fs::rename(&tmp, path)?;
        Ok(())
    }

    pub fn load(path: &Path) -> Result<Self> {
        let mut r = BufReader::new(File::open(path)?);
        Self::read_from(&mut r)
    }
}

/// Temp-file path in the same directory, for atomic renames.
pub fn temp_sibling(path: &Path) -> std::path::PathBuf {
    let mut name = path.file_name().unwrap_or_default().to_os_string();
    name.push(format!(".tmp-{}", std::process::id()));
    path.with_file_name(name)
}

/// Atomically write text to a file (temp sibling + rename).
pub fn write_text_atomic(path: &Path, text: &str) -> Result<()> {
    let tmp = temp_sibling(path);
    std::fs::write(&tmp, text)?;
    std::fs::rename(&tmp, path)?;
    Ok(())
}

fn read_u16(r: &mut impl Read) -> Result<u16> {
    let mut b = [0u8; 2];
    r.read_exact(&mut b)?;
    Ok(u16::from_le_bytes(b))
}

fn read_u32(r: &mut impl Read) -> Result<u32> {
    let mut b = [0u8; 4];
    r.read_exact(&mut b)?;
    Ok(u32::from_le_bytes(b))
}
