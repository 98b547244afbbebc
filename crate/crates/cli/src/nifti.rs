//! Minimal single-file NIfTI-1 reader/writer: float32 and int16 payloads,
//! no extensions, no compression.

use std::fs;
use std::path::Path;

use thiserror::Error;

const HEADER_SIZE: usize = 348;
/// Header plus the four-byte extension flag.
const DATA_OFFSET: usize = 352;
const DT_INT16: i16 = 4;
const DT_FLOAT32: i16 = 16;

#[derive(Debug, Error)]
pub enum VolumeError {
    #[error("unsupported format: {0}")]
    UnsupportedFormat(String),
    #[error("unsupported datatype code {0} (only int16 = 4 and float32 = 16 are read)")]
    UnsupportedDatatype(i16),
    #[error("truncated payload: expected {expected} bytes of voxel data, found {found}")]
    Truncated { expected: usize, found: usize },
    #[error("invalid volume: {0}")]
    Invalid(String),
    #[error("io error on {path}: {source}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Datatype {
    Int16,
    Float32,
}

/// Up to four dimensions, first axis fastest, with values already scaled to
/// float.
#[derive(Debug, Clone, PartialEq)]
pub struct VolumeFile {
    pub dims: Vec<usize>,
    pub voxel_sizes: Vec<f32>,
    pub datatype: Datatype,
    pub data: Vec<f32>,
}

impl VolumeFile {
    pub fn new(dims: Vec<usize>, voxel_sizes: Vec<f32>, data: Vec<f32>) -> Result<Self, VolumeError> {
        if dims.is_empty() || dims.len() > 4 || dims.iter().any(|&d| d == 0 || d > i16::MAX as usize) {
            return Err(VolumeError::Invalid(format!("dims {dims:?} must be 1 to 4 positive extents")));
        }
        if voxel_sizes.len() != dims.len() {
            return Err(VolumeError::Invalid("one voxel size per dimension required".into()));
        }
        let n: usize = dims.iter().product();
        if data.len() != n {
            return Err(VolumeError::Invalid(format!("{} values for dims {dims:?}", data.len())));
        }
        Ok(VolumeFile { dims, voxel_sizes, datatype: Datatype::Float32, data })
    }

    /// Spatial extents (first three axes, trailing singletons dropped) and
    /// the number of volumes along the fourth axis.
    pub fn spatial_and_time(&self) -> (Vec<usize>, usize) {
        let mut spatial: Vec<usize> = self.dims.iter().take(3).copied().collect();
        while spatial.len() > 1 && spatial.last() == Some(&1) {
            spatial.pop();
        }
        (spatial, self.dims.get(3).copied().unwrap_or(1))
    }
}

#[derive(Clone, Copy)]
enum Endian {
    Little,
    Big,
}

struct Reader<'a> {
    bytes: &'a [u8],
    endian: Endian,
}

impl Reader<'_> {
    fn take<const N: usize>(&self, off: usize) -> [u8; N] {
        let mut b = [0u8; N];
        b.copy_from_slice(&self.bytes[off..off + N]);
        b
    }

    fn i16(&self, off: usize) -> i16 {
        match self.endian {
            Endian::Little => i16::from_le_bytes(self.take(off)),
            Endian::Big => i16::from_be_bytes(self.take(off)),
        }
    }

    fn f32(&self, off: usize) -> f32 {
        match self.endian {
            Endian::Little => f32::from_le_bytes(self.take(off)),
            Endian::Big => f32::from_be_bytes(self.take(off)),
        }
    }
}

pub fn parse_volume(bytes: &[u8]) -> Result<VolumeFile, VolumeError> {
    if bytes.len() < HEADER_SIZE {
        return Err(VolumeError::UnsupportedFormat(format!("{} bytes is shorter than a header", bytes.len())));
    }
    let endian = match (
        i32::from_le_bytes(bytes[0..4].try_into().expect("4 bytes")),
        i32::from_be_bytes(bytes[0..4].try_into().expect("4 bytes")),
    ) {
        (348, _) => Endian::Little,
        (_, 348) => Endian::Big,
        _ => return Err(VolumeError::UnsupportedFormat("header size field is not 348".into())),
    };
    if &bytes[344..348] != b"n+1\0" {
        return Err(VolumeError::UnsupportedFormat("magic is not `n+1` (single-file NIfTI-1)".into()));
    }
    let r = Reader { bytes, endian };
    let ndim = r.i16(40);
    if !(1..=4).contains(&ndim) {
        return Err(VolumeError::Invalid(format!("{ndim} dimensions (supported: 1 to 4)")));
    }
    let ndim = ndim as usize;
    let mut dims = Vec::with_capacity(ndim);
    let mut voxel_sizes = Vec::with_capacity(ndim);
    for axis in 0..ndim {
        let d = r.i16(42 + 2 * axis);
        if d < 1 {
            return Err(VolumeError::Invalid(format!("extent {d} on axis {axis}")));
        }
        dims.push(d as usize);
        let p = r.f32(80 + 4 * axis);
        voxel_sizes.push(if p > 0.0 { p } else { 1.0 });
    }
    let datatype = match r.i16(70) {
        DT_INT16 => Datatype::Int16,
        DT_FLOAT32 => Datatype::Float32,
        other => return Err(VolumeError::UnsupportedDatatype(other)),
    };
    let offset = r.f32(108);
    let offset = if offset >= HEADER_SIZE as f32 { offset as usize } else { DATA_OFFSET };
    let (slope, inter) = (r.f32(112), r.f32(116));
    let scaled = slope != 0.0 && slope.is_finite() && (slope != 1.0 || inter != 0.0);

    let n: usize = dims.iter().product();
    let width = match datatype {
        Datatype::Int16 => 2,
        Datatype::Float32 => 4,
    };
    let expected = n * width;
    let found = bytes.len().saturating_sub(offset);
    if found < expected {
        return Err(VolumeError::Truncated { expected, found });
    }
    let payload = Reader { bytes: &bytes[offset..], endian };
    let mut data: Vec<f32> = match datatype {
        Datatype::Int16 => (0..n).map(|i| f32::from(payload.i16(2 * i))).collect(),
        Datatype::Float32 => (0..n).map(|i| payload.f32(4 * i)).collect(),
    };
    if scaled {
        for v in &mut data {
            *v = *v * slope + inter;
        }
    }
    Ok(VolumeFile { dims, voxel_sizes, datatype, data })
}

pub fn read_volume(path: &Path) -> Result<VolumeFile, VolumeError> {
    let bytes = fs::read(path).map_err(|source| VolumeError::Io { path: path.display().to_string(), source })?;
    parse_volume(&bytes)
}

/// Serialises as little-endian float32 with identity scaling.
pub fn encode_volume(vol: &VolumeFile) -> Vec<u8> {
    let mut h = vec![0u8; DATA_OFFSET];
    let put_i16 = |h: &mut Vec<u8>, off: usize, v: i16| h[off..off + 2].copy_from_slice(&v.to_le_bytes());
    let put_f32 = |h: &mut Vec<u8>, off: usize, v: f32| h[off..off + 4].copy_from_slice(&v.to_le_bytes());
    h[0..4].copy_from_slice(&(HEADER_SIZE as i32).to_le_bytes());
    h[38] = b'r';
    put_i16(&mut h, 40, vol.dims.len() as i16);
    for axis in 0..7 {
        put_i16(&mut h, 42 + 2 * axis, vol.dims.get(axis).map_or(1, |&d| d as i16));
    }
    put_i16(&mut h, 70, DT_FLOAT32);
    put_i16(&mut h, 72, 32);
    put_f32(&mut h, 76, 1.0);
    for axis in 0..7 {
        put_f32(&mut h, 80 + 4 * axis, vol.voxel_sizes.get(axis).copied().unwrap_or(1.0));
    }
    put_f32(&mut h, 108, DATA_OFFSET as f32);
    put_f32(&mut h, 112, 1.0);
    h[123] = 2 | 8; // millimetres, seconds
    h[344..348].copy_from_slice(b"n+1\0");
    h.reserve(vol.data.len() * 4);
    for &v in &vol.data {
        h.extend_from_slice(&v.to_le_bytes());
    }
    h
}

pub fn write_volume(path: &Path, vol: &VolumeFile) -> Result<(), VolumeError> {
    fs::write(path, encode_volume(vol)).map_err(|source| VolumeError::Io { path: path.display().to_string(), source })
}
