// SPDX-License-Identifier: Apache-2.0

//! Little-endian wire format of a [`CountSketch`].
//!
//! ```text
//! offset  size  field
//!      0     4  magic "SKFD"
//!      4     2  version (u16) = 1
//!      6     2  reserved (u16) = 0
//!      8     4  rows d (u32)
//!     12     4  width w (u32)
//!     16     8  domain size n (u64)
//!     24     8  hash seed (u64)
//!     32  8·d·w counters (f64), row-major
//! ```

use super::{CountSketch, SketchConfig, SketchError};

pub const MAGIC: [u8; 4] = *b"SKFD";
pub const VERSION: u16 = 1;
pub const HEADER_LEN: usize = 32;

fn decode_err(offset: usize, reason: impl Into<String>) -> SketchError {
    SketchError::Decode {
        offset,
        reason: reason.into(),
    }
}

impl CountSketch {
    pub fn to_bytes(&self) -> Vec<u8> {
        let cfg = self.config();
        let mut out = Vec::with_capacity(self.payload_bytes());
        out.extend_from_slice(&MAGIC);
        out.extend_from_slice(&VERSION.to_le_bytes());
        out.extend_from_slice(&0u16.to_le_bytes());
        out.extend_from_slice(&(cfg.rows as u32).to_le_bytes());
        out.extend_from_slice(&(cfg.width as u32).to_le_bytes());
        out.extend_from_slice(&(cfg.domain_size as u64).to_le_bytes());
        out.extend_from_slice(&cfg.seed.to_le_bytes());
        for c in self.counters() {
            out.extend_from_slice(&c.to_le_bytes());
        }
        out
    }

    pub fn from_bytes(bytes: &[u8]) -> Result<Self, SketchError> {
        if bytes.len() < HEADER_LEN {
            return Err(decode_err(
                bytes.len(),
                format!(
                    "truncated header: need {HEADER_LEN} bytes, got {}",
                    bytes.len()
                ),
            ));
        }
        let u16_at = |o: usize| u16::from_le_bytes(bytes[o..o + 2].try_into().unwrap());
        let u32_at = |o: usize| u32::from_le_bytes(bytes[o..o + 4].try_into().unwrap());
        let u64_at = |o: usize| u64::from_le_bytes(bytes[o..o + 8].try_into().unwrap());

        if bytes[0..4] != MAGIC {
            return Err(decode_err(0, format!("bad magic {:?}", &bytes[0..4])));
        }
        let version = u16_at(4);
        if version != VERSION {
            return Err(decode_err(4, format!("unsupported version {version}")));
        }
        let rows = u32_at(8) as usize;
        let width = u32_at(12) as usize;
        let domain_size = usize::try_from(u64_at(16))
            .map_err(|_| decode_err(16, "domain size does not fit in usize"))?;
        let seed = u64_at(24);
        let config = SketchConfig::new(rows, width, seed, domain_size)
            .map_err(|e| decode_err(8, e.to_string()))?;

        let expected = config.payload_bytes();
        if bytes.len() < expected {
            return Err(decode_err(
                bytes.len(),
                format!(
                    "truncated counters: need {expected} bytes, got {}",
                    bytes.len()
                ),
            ));
        }
        if bytes.len() > expected {
            return Err(decode_err(
                expected,
                format!("{} trailing bytes", bytes.len() - expected),
            ));
        }
        let mut counters = Vec::with_capacity(config.num_counters());
        for (k, chunk) in bytes[HEADER_LEN..].chunks_exact(8).enumerate() {
            let c = f64::from_le_bytes(chunk.try_into().unwrap());
            if !c.is_finite() {
                return Err(decode_err(HEADER_LEN + 8 * k, "non-finite counter"));
            }
            counters.push(c);
        }
        CountSketch::from_counters(config, counters)
    }
}
