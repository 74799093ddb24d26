//! `KBRR` raster files: a 24-byte little-endian header followed by a
//! row-major, channel-interleaved payload.
//!
//! ```text
//! offset  size  field
//!      0     4  magic "KBRR"
//!      4     4  version (1)
//!      8     4  width
//!     12     4  height
//!     16     4  channels
//!     20     1  dtype (0 f32, 1 u32, 2 u16, 3 u8)
//!     21     3  reserved, zero
//!     24     .  payload
//! ```

use std::path::Path;

use super::ExportError;

pub const RASTER_MAGIC: [u8; 4] = *b"KBRR";
pub const RASTER_VERSION: u32 = 1;
pub const HEADER_LEN: usize = 24;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum Dtype {
    F32 = 0,
    U32 = 1,
    U16 = 2,
    U8 = 3,
}

impl Dtype {
    pub fn size(self) -> usize {
        match self {
            Dtype::F32 | Dtype::U32 => 4,
            Dtype::U16 => 2,
            Dtype::U8 => 1,
        }
    }

    pub fn from_code(code: u8) -> Option<Dtype> {
        Some(match code {
            0 => Dtype::F32,
            1 => Dtype::U32,
            2 => Dtype::U16,
            3 => Dtype::U8,
            _ => return None,
        })
    }
}

#[derive(Clone, Debug, PartialEq)]
pub enum RasterData {
    F32(Vec<f32>),
    U32(Vec<u32>),
    U16(Vec<u16>),
    U8(Vec<u8>),
}

impl RasterData {
    pub fn dtype(&self) -> Dtype {
        match self {
            RasterData::F32(_) => Dtype::F32,
            RasterData::U32(_) => Dtype::U32,
            RasterData::U16(_) => Dtype::U16,
            RasterData::U8(_) => Dtype::U8,
        }
    }

    pub fn len(&self) -> usize {
        match self {
            RasterData::F32(v) => v.len(),
            RasterData::U32(v) => v.len(),
            RasterData::U16(v) => v.len(),
            RasterData::U8(v) => v.len(),
        }
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }
}

/// A `height × width × channels` array.
#[derive(Clone, Debug, PartialEq)]
pub struct Raster {
    pub width: u32,
    pub height: u32,
    pub channels: u32,
    pub data: RasterData,
}

fn element_count(width: u32, height: u32, channels: u32) -> Option<usize> {
    (width as usize).checked_mul(height as usize)?.checked_mul(channels as usize)
}

impl Raster {
    pub fn new(width: u32, height: u32, channels: u32, data: RasterData) -> Result<Raster, ExportError> {
        match element_count(width, height, channels) {
            Some(n) if n == data.len() => Ok(Raster { width, height, channels, data }),
            _ => Err(ExportError::Format(format!(
                "{} elements do not fill {width}x{height}x{channels}",
                data.len()
            ))),
        }
    }

    pub fn f32(width: u32, height: u32, channels: u32, data: Vec<f32>) -> Result<Raster, ExportError> {
        Raster::new(width, height, channels, RasterData::F32(data))
    }

    pub fn u32(width: u32, height: u32, channels: u32, data: Vec<u32>) -> Result<Raster, ExportError> {
        Raster::new(width, height, channels, RasterData::U32(data))
    }

    pub fn dtype(&self) -> Dtype {
        self.data.dtype()
    }

    pub fn as_f32(&self) -> Option<&[f32]> {
        match &self.data {
            RasterData::F32(v) => Some(v),
            _ => None,
        }
    }

    pub fn as_u32(&self) -> Option<&[u32]> {
        match &self.data {
            RasterData::U32(v) => Some(v),
            _ => None,
        }
    }

    /// Bitwise comparison; unlike `==`, NaN payloads compare equal to
    /// themselves.
    pub fn bit_eq(&self, other: &Raster) -> bool {
        self.encode() == other.encode()
    }

    pub fn encode(&self) -> Vec<u8> {
        let mut out = Vec::with_capacity(HEADER_LEN + self.data.len() * self.dtype().size());
        out.extend_from_slice(&RASTER_MAGIC);
        for v in [RASTER_VERSION, self.width, self.height, self.channels] {
            out.extend_from_slice(&v.to_le_bytes());
        }
        out.extend_from_slice(&[self.dtype() as u8, 0, 0, 0]);
        match &self.data {
            RasterData::F32(v) => v.iter().for_each(|x| out.extend_from_slice(&x.to_bits().to_le_bytes())),
            RasterData::U32(v) => v.iter().for_each(|x| out.extend_from_slice(&x.to_le_bytes())),
            RasterData::U16(v) => v.iter().for_each(|x| out.extend_from_slice(&x.to_le_bytes())),
            RasterData::U8(v) => out.extend_from_slice(v),
        }
        out
    }

    pub fn decode(bytes: &[u8]) -> Result<Raster, ExportError> {
        let fail = |m: String| Err(ExportError::Format(m));
        if bytes.len() < HEADER_LEN {
            return fail(format!("{} bytes is shorter than the header", bytes.len()));
        }
        if bytes[..4] != RASTER_MAGIC {
            return fail("bad magic".into());
        }
        let word = |i: usize| u32::from_le_bytes(bytes[i..i + 4].try_into().unwrap());
        let version = word(4);
        if version != RASTER_VERSION {
            return fail(format!("unsupported version {version}"));
        }
        let (width, height, channels) = (word(8), word(12), word(16));
        let Some(dtype) = Dtype::from_code(bytes[20]) else {
            return fail(format!("unknown dtype code {}", bytes[20]));
        };
        if bytes[21..24] != [0, 0, 0] {
            return fail("reserved header bytes are not zero".into());
        }
        let payload = &bytes[HEADER_LEN..];
        let n = element_count(width, height, channels).filter(|n| n.checked_mul(dtype.size()).is_some());
        let Some(n) = n else {
            return fail("dimensions overflow".into());
        };
        if payload.len() != n * dtype.size() {
            return fail(format!("payload is {} bytes, expected {}", payload.len(), n * dtype.size()));
        }
        let data = match dtype {
            Dtype::F32 => RasterData::F32(
                payload.chunks_exact(4).map(|c| f32::from_bits(u32::from_le_bytes(c.try_into().unwrap()))).collect(),
            ),
            Dtype::U32 => RasterData::U32(payload.chunks_exact(4).map(|c| u32::from_le_bytes(c.try_into().unwrap())).collect()),
            Dtype::U16 => RasterData::U16(payload.chunks_exact(2).map(|c| u16::from_le_bytes(c.try_into().unwrap())).collect()),
            Dtype::U8 => RasterData::U8(payload.to_vec()),
        };
        Ok(Raster { width, height, channels, data })
    }
}

pub fn write_raster(path: &Path, raster: &Raster) -> Result<(), ExportError> {
    std::fs::write(path, raster.encode()).map_err(|e| ExportError::io(path, e))
}

pub fn read_raster(path: &Path) -> Result<Raster, ExportError> {
    let bytes = std::fs::read(path).map_err(|e| ExportError::io(path, e))?;
    Raster::decode(&bytes)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rng::Rng;
    use proptest::prelude::*;

    const GOLDEN: [u8; 32] = [
        0x4B, 0x42, 0x52, 0x52, 0x01, 0x00, 0x00, 0x00, 0x01, 0x00, 0x00, 0x00, 0x02, 0x00, 0x00, 0x00, 0x01, 0x00,
        0x00, 0x00, 0x00, 0x00, 0x00, 0x00, 0x00, 0x00, 0x80, 0x3F, 0x00, 0x00, 0x80, 0x7F,
    ];

    #[test]
    fn golden_bytes() {
        let r = Raster::f32(1, 2, 1, vec![1.0, f32::INFINITY]).unwrap();
        assert_eq!(r.encode(), GOLDEN);
        let back = Raster::decode(&GOLDEN).unwrap();
        assert_eq!(back, r);
        assert_eq!(back.encode(), GOLDEN);
    }

    #[test]
    fn u32_round_trip_through_file() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("seg.kbr");
        let mut rng = Rng::new(3);
        let data: Vec<u32> = (0..17 * 9).map(|_| rng.next_u64() as u32).collect();
        let r = Raster::u32(17, 9, 1, data).unwrap();
        write_raster(&path, &r).unwrap();
        assert_eq!(read_raster(&path).unwrap(), r);
    }

    #[test]
    fn nan_payloads_survive() {
        let odd = f32::from_bits(0x7FC0_1234);
        let r = Raster::f32(2, 1, 1, vec![odd, f32::NEG_INFINITY]).unwrap();
        let back = Raster::decode(&r.encode()).unwrap();
        assert!(back.bit_eq(&r));
        assert_eq!(back.as_f32().unwrap()[0].to_bits(), 0x7FC0_1234);
    }

    #[test]
    fn malformed_inputs() {
        assert!(matches!(Raster::decode(&GOLDEN[..31]), Err(ExportError::Format(_))));
        assert!(matches!(Raster::decode(&GOLDEN[..10]), Err(ExportError::Format(_))));
        let mut bad = GOLDEN;
        bad[0] = b'X';
        assert!(Raster::decode(&bad).is_err());
        let mut bad = GOLDEN;
        bad[4] = 2;
        assert!(Raster::decode(&bad).is_err());
        let mut bad = GOLDEN;
        bad[20] = 9;
        assert!(Raster::decode(&bad).is_err());
        let mut long = GOLDEN.to_vec();
        long.push(0);
        assert!(Raster::decode(&long).is_err());
        assert!(Raster::f32(2, 2, 1, vec![0.0; 3]).is_err());
    }

    #[test]
    fn small_dtypes() {
        let r = Raster::new(3, 1, 1, RasterData::U16(vec![1, 0xBEEF, 7])).unwrap();
        let bytes = r.encode();
        assert_eq!(bytes[20], 2);
        assert_eq!(&bytes[26..28], &[0xEF, 0xBE]);
        assert_eq!(Raster::decode(&bytes).unwrap(), r);
        let r = Raster::new(1, 1, 3, RasterData::U8(vec![1, 2, 3])).unwrap();
        assert_eq!(Raster::decode(&r.encode()).unwrap(), r);
    }

    proptest! {
        #[test]
        fn f32_round_trip_is_bitwise(w in 1u32..6, h in 1u32..6, c in 1u32..4, seed: u64) {
            let mut rng = Rng::new(seed);
            let data = (0..w * h * c).map(|_| f32::from_bits(rng.next_u64() as u32)).collect();
            let r = Raster::f32(w, h, c, data).unwrap();
            let back = Raster::decode(&r.encode()).unwrap();
            prop_assert!(back.bit_eq(&r));
            prop_assert_eq!(back.encode(), r.encode());
        }
    }
}
