//! The binary tensor file format.
//!
//! Layout, all little-endian:
//!
//! ```text
//! magic   4 bytes  "ATNT"
//! version u16      1
//! dtype   u16      0 = fp32, 1 = bf16
//! rows    u32
//! cols    u32
//! payload rows*cols raw IEEE bit patterns, row-major
//!         (4 bytes per fp32 element, 2 bytes per bf16 element)
//! ```
//!
//! The payload stores exact bit patterns, so encode/decode round-trips are
//! bit-identical; a text format would not be.

use std::fs;
use std::path::Path;

use anyhow::{bail, Context, Result};

use expmul_core::floatbits::{bf16_bits_from_f32, f32_from_bf16_bits};
use expmul_core::{Dtype, Tensor};

pub const MAGIC: [u8; 4] = *b"ATNT";
pub const VERSION: u16 = 1;

fn dtype_code(dtype: Dtype) -> u16 {
    match dtype {
        Dtype::Fp32 => 0,
        Dtype::Bf16 => 1,
    }
}

/// Serialize a tensor to the wire layout.
pub fn encode(tensor: &Tensor) -> Vec<u8> {
    let element_size = match tensor.dtype() {
        Dtype::Fp32 => 4,
        Dtype::Bf16 => 2,
    };
    let mut out = Vec::with_capacity(16 + tensor.data().len() * element_size);
    out.extend_from_slice(&MAGIC);
    out.extend_from_slice(&VERSION.to_le_bytes());
    out.extend_from_slice(&dtype_code(tensor.dtype()).to_le_bytes());
    out.extend_from_slice(&(tensor.rows() as u32).to_le_bytes());
    out.extend_from_slice(&(tensor.cols() as u32).to_le_bytes());
    for &v in tensor.data() {
        match tensor.dtype() {
            Dtype::Fp32 => out.extend_from_slice(&v.to_bits().to_le_bytes()),
            Dtype::Bf16 => out.extend_from_slice(&bf16_bits_from_f32(v).to_le_bytes()),
        }
    }
    out
}

/// Parse the wire layout back into a tensor.
pub fn decode(bytes: &[u8]) -> Result<Tensor> {
    if bytes.len() < 16 {
        bail!(
            "file is {} bytes, shorter than the 16-byte header",
            bytes.len()
        );
    }
    if bytes[0..4] != MAGIC {
        bail!("bad magic bytes {:02X?}, expected \"ATNT\"", &bytes[0..4]);
    }
    let version = u16::from_le_bytes([bytes[4], bytes[5]]);
    if version != VERSION {
        bail!("unsupported version {version}, expected {VERSION}");
    }
    let dtype = match u16::from_le_bytes([bytes[6], bytes[7]]) {
        0 => Dtype::Fp32,
        1 => Dtype::Bf16,
        code => bail!("unknown dtype code {code}"),
    };
    let rows = u32::from_le_bytes(bytes[8..12].try_into().unwrap()) as usize;
    let cols = u32::from_le_bytes(bytes[12..16].try_into().unwrap()) as usize;
    let element_size = match dtype {
        Dtype::Fp32 => 4,
        Dtype::Bf16 => 2,
    };
    let payload = &bytes[16..];
    let expected = rows
        .checked_mul(cols)
        .and_then(|n| n.checked_mul(element_size))
        .context("tensor dimensions overflow")?;
    if payload.len() != expected {
        bail!(
            "payload is {} bytes, expected {expected} for {rows}x{cols}",
            payload.len()
        );
    }
    let data: Vec<f32> = match dtype {
        Dtype::Fp32 => payload
            .chunks_exact(4)
            .map(|c| f32::from_bits(u32::from_le_bytes(c.try_into().unwrap())))
            .collect(),
        Dtype::Bf16 => payload
            .chunks_exact(2)
            .map(|c| f32_from_bf16_bits(u16::from_le_bytes(c.try_into().unwrap())))
            .collect(),
    };
    Ok(Tensor::new(rows, cols, dtype, data)?)
}

/// Write a tensor file, failing with the path in the message.
pub fn write_tensor(path: &Path, tensor: &Tensor) -> Result<()> {
    fs::write(path, encode(tensor)).with_context(|| format!("writing {}", path.display()))
}

/// Read a tensor file, failing with the path in the message.
pub fn read_tensor(path: &Path) -> Result<Tensor> {
    let bytes = fs::read(path).with_context(|| format!("reading {}", path.display()))?;
    decode(&bytes).with_context(|| format!("decoding {}", path.display()))
}
