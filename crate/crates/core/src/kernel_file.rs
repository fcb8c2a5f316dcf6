//! `NTKC` kernel files.
//!
//! Little-endian layout:
//!
//! | bytes | field |
//! |-------|-------|
//! | 4     | magic `NTKC` |
//! | 4     | version (`u32`, currently 1) |
//! | 4     | flags (`u32`): 1 compact, 2 full, 4 analytic prior |
//! | 4     | `s` (`u32`), number of down/up pairs; 0 for full kernels |
//! | 4     | `p2` (`u32`), log2 of the resolution; 0 for non power-of-two full kernels |
//! | 8     | `rho` (`f64`), NaN for explicit priors |
//! | 4 + 4 | base resolution `m`, `n` (`u32`) |
//! | 32    | SHA-256 of the architecture's layer list |
//!
//! followed by the row-major `f64` payload: `p x p x d2 x d2` for compact
//! kernels, `mn x mn` for full kernels.

use std::io::{Read, Write};
use std::path::Path;

use ndarray::{Array2, Array4};

use crate::cntk::CntkKernel;
use crate::error::{Error, Result};
use crate::expand::{CompactKernel, KernelMeta};

pub const MAGIC: &[u8; 4] = b"NTKC";
pub const VERSION: u32 = 1;
pub const FLAG_COMPACT: u32 = 1;
pub const FLAG_FULL: u32 = 2;
pub const FLAG_ANALYTIC: u32 = 4;

const HEADER_LEN: usize = 4 + 4 + 4 + 4 + 4 + 8 + 4 + 4 + 32;

#[derive(Debug, Clone, PartialEq)]
pub enum KernelFile {
    Compact(CompactKernel),
    Full { kernel: CntkKernel, meta: KernelMeta },
}

impl KernelFile {
    pub fn meta(&self) -> &KernelMeta {
        match self {
            KernelFile::Compact(c) => &c.meta,
            KernelFile::Full { meta, .. } => meta,
        }
    }

    pub fn as_pixel_kernel(&self) -> &dyn crate::cntk::PixelKernel {
        match self {
            KernelFile::Compact(c) => c,
            KernelFile::Full { kernel, .. } => kernel,
        }
    }
}

fn u32_field(v: usize, what: &str) -> Result<u32> {
    u32::try_from(v).map_err(|_| Error::Format(format!("{what} = {v} does not fit in u32")))
}

pub fn write_kernel<W: Write>(mut w: W, file: &KernelFile) -> Result<()> {
    let meta = file.meta();
    let analytic = if meta.rho.is_nan() { 0 } else { FLAG_ANALYTIC };
    let (flags, s, p2, payload): (u32, usize, usize, &[f64]) = match file {
        KernelFile::Compact(c) => (
            FLAG_COMPACT | analytic,
            c.s(),
            c.resolution().trailing_zeros() as usize,
            c.rows().as_slice().expect("standard layout"),
        ),
        KernelFile::Full { kernel, .. } => {
            let (m, n) = kernel.dims;
            let p2 = if m == n && m.is_power_of_two() { m.trailing_zeros() as usize } else { 0 };
            let slice = kernel
                .matrix
                .as_slice()
                .ok_or_else(|| Error::Format("kernel matrix is not contiguous".into()))?;
            (FLAG_FULL | analytic, 0, p2, slice)
        }
    };
    let base = match file {
        KernelFile::Compact(c) => c.meta.base,
        KernelFile::Full { kernel, .. } => kernel.dims,
    };
    let mut header = Vec::with_capacity(HEADER_LEN);
    header.extend_from_slice(MAGIC);
    header.extend_from_slice(&VERSION.to_le_bytes());
    header.extend_from_slice(&flags.to_le_bytes());
    header.extend_from_slice(&u32_field(s, "s")?.to_le_bytes());
    header.extend_from_slice(&u32_field(p2, "p2")?.to_le_bytes());
    header.extend_from_slice(&meta.rho.to_le_bytes());
    header.extend_from_slice(&u32_field(base.0, "m")?.to_le_bytes());
    header.extend_from_slice(&u32_field(base.1, "n")?.to_le_bytes());
    header.extend_from_slice(&meta.arch_hash);
    w.write_all(&header)?;
    let mut buf = Vec::with_capacity(payload.len().min(1 << 20) * 8);
    for chunk in payload.chunks(1 << 17) {
        buf.clear();
        for v in chunk {
            buf.extend_from_slice(&v.to_le_bytes());
        }
        w.write_all(&buf)?;
    }
    w.flush()?;
    Ok(())
}

pub fn read_kernel<R: Read>(mut r: R) -> Result<KernelFile> {
    let mut header = [0u8; HEADER_LEN];
    r.read_exact(&mut header)
        .map_err(|_| Error::Format("file is shorter than the NTKC header".into()))?;
    if &header[0..4] != MAGIC {
        return Err(Error::Format(format!("bad magic {:?}, expected \"NTKC\"", &header[0..4])));
    }
    let u32_at = |o: usize| u32::from_le_bytes(header[o..o + 4].try_into().expect("4 bytes")) as usize;
    let version = u32_at(4) as u32;
    if version != VERSION {
        return Err(Error::Format(format!("unsupported NTKC version {version}")));
    }
    let flags = u32_at(8) as u32;
    let s = u32_at(12);
    let p2 = u32_at(16);
    let rho = f64::from_le_bytes(header[20..28].try_into().expect("8 bytes"));
    let base = (u32_at(28), u32_at(32));
    let mut arch_hash = [0u8; 32];
    arch_hash.copy_from_slice(&header[36..68]);
    if (flags & FLAG_ANALYTIC != 0) == rho.is_nan() {
        return Err(Error::Format("analytic-prior flag disagrees with rho".into()));
    }
    let meta = KernelMeta { arch_hash, rho, base };

    let compact = flags & FLAG_COMPACT != 0;
    let full = flags & FLAG_FULL != 0;
    let len = match (compact, full) {
        (true, false) => {
            if s >= 16 || p2 >= 32 {
                return Err(Error::Format(format!("implausible sizes s = {s}, p2 = {p2}")));
            }
            let p = 1usize << s;
            let d2 = 1usize << p2;
            p.checked_mul(p).and_then(|v| v.checked_mul(d2 * d2))
        }
        (false, true) => {
            let mn = base.0.checked_mul(base.1);
            mn.and_then(|v| v.checked_mul(v))
        }
        _ => return Err(Error::Format(format!("flags {flags:#x} must mark exactly one of compact or full"))),
    }
    .ok_or_else(|| Error::Format("payload size overflows".into()))?;

    let mut bytes = Vec::new();
    r.read_to_end(&mut bytes)?;
    if bytes.len() != len * 8 {
        return Err(Error::Format(format!(
            "payload holds {} bytes, header implies {}",
            bytes.len(),
            len * 8
        )));
    }
    let values: Vec<f64> = bytes
        .chunks_exact(8)
        .map(|c| f64::from_le_bytes(c.try_into().expect("8 bytes")))
        .collect();
    if compact {
        let p = 1usize << s;
        let d2 = 1usize << p2;
        let rows = Array4::from_shape_vec((p, p, d2, d2), values).map_err(|e| Error::Format(e.to_string()))?;
        Ok(KernelFile::Compact(CompactKernel::from_parts(rows, s, d2, meta)?))
    } else {
        let mn = base.0 * base.1;
        let matrix = Array2::from_shape_vec((mn, mn), values).map_err(|e| Error::Format(e.to_string()))?;
        Ok(KernelFile::Full {
            kernel: CntkKernel::from_matrix(matrix, base)?,
            meta,
        })
    }
}

pub fn save(path: impl AsRef<Path>, file: &KernelFile) -> Result<()> {
    let f = std::fs::File::create(path)?;
    write_kernel(std::io::BufWriter::new(f), file)
}

pub fn load(path: impl AsRef<Path>) -> Result<KernelFile> {
    let f = std::fs::File::open(path)?;
    read_kernel(std::io::BufReader::new(f))
}
