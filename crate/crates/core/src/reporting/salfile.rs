//! Binary saliency container: `SALM`, u16 version, u32 width, u32 height,
//! then `width * height` little-endian f32 values in row-major order.

use std::path::Path;

use super::ReportingError;

pub const SALIENCY_MAGIC: &[u8; 4] = b"SALM";
pub const SALIENCY_VERSION: u16 = 1;
const HEADER_LEN: usize = 4 + 2 + 4 + 4;

#[derive(Debug, Clone, PartialEq)]
pub struct SaliencyFile {
    pub width: u32,
    pub height: u32,
    pub values: Vec<f32>,
}

impl SaliencyFile {
    pub fn new(width: u32, height: u32, values: Vec<f32>) -> Result<Self, ReportingError> {
        if values.len() as u64 != width as u64 * height as u64 {
            return Err(ReportingError::SaliencyFormat(format!(
                "{} values for {width}x{height}",
                values.len()
            )));
        }
        if let Some(i) = values.iter().position(|v| !v.is_finite()) {
            return Err(ReportingError::SaliencyFormat(format!("non-finite value at index {i}")));
        }
        Ok(Self { width, height, values })
    }

    pub fn from_map(map: &crate::saliency::SaliencyMap) -> Result<Self, ReportingError> {
        let values = map.values().iter().map(|&v| v as f32).collect();
        Self::new(map.width() as u32, map.height() as u32, values)
    }

    pub fn to_bytes(&self) -> Vec<u8> {
        let mut out = Vec::with_capacity(HEADER_LEN + 4 * self.values.len());
        out.extend_from_slice(SALIENCY_MAGIC);
        out.extend_from_slice(&SALIENCY_VERSION.to_le_bytes());
        out.extend_from_slice(&self.width.to_le_bytes());
        out.extend_from_slice(&self.height.to_le_bytes());
        for v in &self.values {
            out.extend_from_slice(&v.to_le_bytes());
        }
        out
    }

    pub fn from_bytes(bytes: &[u8]) -> Result<Self, ReportingError> {
        let bad = |m: String| Err(ReportingError::SaliencyFormat(m));
        if bytes.len() < HEADER_LEN {
            return bad(format!("{} bytes is shorter than the header", bytes.len()));
        }
        if &bytes[..4] != SALIENCY_MAGIC {
            return bad("missing SALM magic".into());
        }
        let version = u16::from_le_bytes([bytes[4], bytes[5]]);
        if version != SALIENCY_VERSION {
            return bad(format!("unsupported version {version}"));
        }
        let width = u32::from_le_bytes(bytes[6..10].try_into().expect("4 bytes"));
        let height = u32::from_le_bytes(bytes[10..14].try_into().expect("4 bytes"));
        let payload = &bytes[HEADER_LEN..];
        let expected = 4 * width as u64 * height as u64;
        if payload.len() as u64 != expected {
            return bad(format!("payload is {} bytes, expected {expected}", payload.len()));
        }
        let values = payload
            .chunks_exact(4)
            .map(|c| f32::from_le_bytes(c.try_into().expect("4 bytes")))
            .collect();
        Self::new(width, height, values)
    }

    pub fn write(&self, path: impl AsRef<Path>) -> Result<(), ReportingError> {
        std::fs::write(path, self.to_bytes())?;
        Ok(())
    }

    pub fn read(path: impl AsRef<Path>) -> Result<Self, ReportingError> {
        Self::from_bytes(&std::fs::read(path)?)
    }
}
