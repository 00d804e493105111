//! The FAMECLIP on-disk container.
//!
//! Layout: 8-byte magic `FAMECLIP`, version byte (1), dtype byte
//! (0 = unsigned 8-bit pixels, 1 = little-endian 32-bit floats), then
//! `C, T, H, W` as little-endian u32, then the raw payload in the clip's
//! channel-major layout.

use std::path::Path;

use crate::clip::Clip;
use crate::error::{Error, Result};

pub const MAGIC: &[u8; 8] = b"FAMECLIP";
pub const VERSION: u8 = 1;
pub const HEADER_LEN: usize = 26;

const OFF_MAGIC: u64 = 0;
const OFF_VERSION: u64 = 8;
const OFF_DTYPE: u64 = 9;
const OFF_DIMS: u64 = 10;

/// How pixel samples are stored on disk.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum StorageKind {
    /// One byte per sample; `v = byte / 255`.
    U8 = 0,
    /// Four bytes per sample, little-endian f32, already in `[0, 1]`.
    F32 = 1,
}

impl StorageKind {
    pub fn bytes_per_sample(self) -> u64 {
        match self {
            StorageKind::U8 => 1,
            StorageKind::F32 => 4,
        }
    }
}

/// Parses a clip from raw container bytes.
pub fn parse_clip(bytes: &[u8]) -> Result<Clip> {
    if bytes.len() < HEADER_LEN {
        return Err(Error::format(
            bytes.len() as u64,
            format!("header truncated: need {HEADER_LEN} bytes, have {}", bytes.len()),
        ));
    }
    if &bytes[0..8] != MAGIC {
        return Err(Error::format(OFF_MAGIC, "bad magic, expected \"FAMECLIP\""));
    }
    if bytes[8] != VERSION {
        return Err(Error::format(
            OFF_VERSION,
            format!("unsupported version {}, expected {VERSION}", bytes[8]),
        ));
    }
    let dtype = match bytes[9] {
        0 => StorageKind::U8,
        1 => StorageKind::F32,
        other => {
            return Err(Error::format(
                OFF_DTYPE,
                format!("unknown dtype {other}, expected 0 or 1"),
            ))
        }
    };
    let mut dims = [0u32; 4];
    for (k, dim) in dims.iter_mut().enumerate() {
        let at = OFF_DIMS as usize + 4 * k;
        *dim = u32::from_le_bytes(bytes[at..at + 4].try_into().unwrap());
    }
    let [c, t, h, w] = dims;
    if c != 1 && c != 3 {
        return Err(Error::format(
            OFF_DIMS,
            format!("channel count must be 1 or 3, got {c}"),
        ));
    }
    if t == 0 || h == 0 || w == 0 {
        return Err(Error::format(
            OFF_DIMS,
            format!("dimensions must be >= 1, got T={t} H={h} W={w}"),
        ));
    }

    let samples = (c as u64) * (t as u64) * (h as u64) * (w as u64);
    let expected = samples
        .checked_mul(dtype.bytes_per_sample())
        .ok_or_else(|| Error::format(OFF_DIMS, "payload size overflows"))?;
    let payload = &bytes[HEADER_LEN..];
    if payload.len() as u64 != expected {
        return Err(Error::Length {
            expected,
            got: payload.len() as u64,
        });
    }

    let data: Vec<f32> = match dtype {
        StorageKind::U8 => payload.iter().map(|&b| b as f32 / 255.0).collect(),
        StorageKind::F32 => {
            let mut out = Vec::with_capacity(samples as usize);
            for (index, chunk) in payload.chunks_exact(4).enumerate() {
                let value = f32::from_le_bytes(chunk.try_into().unwrap());
                if !(0.0..=1.0).contains(&value) {
                    return Err(Error::Range { index, value });
                }
                out.push(value);
            }
            out
        }
    };
    Clip::new(c as usize, t as usize, h as usize, w as usize, data)
}

/// Serializes a clip to container bytes. `StorageKind::U8` quantizes each
/// sample by `round(v · 255)`; `StorageKind::F32` is lossless.
pub fn clip_to_bytes(clip: &Clip, dtype: StorageKind) -> Vec<u8> {
    let samples = clip.data().len();
    let mut out = Vec::with_capacity(HEADER_LEN + samples * dtype.bytes_per_sample() as usize);
    out.extend_from_slice(MAGIC);
    out.push(VERSION);
    out.push(dtype as u8);
    for dim in [clip.channels(), clip.frames(), clip.height(), clip.width()] {
        out.extend_from_slice(&(dim as u32).to_le_bytes());
    }
    match dtype {
        StorageKind::U8 => out.extend(clip.data().iter().map(|&v| (v * 255.0).round() as u8)),
        StorageKind::F32 => {
            for &v in clip.data() {
                out.extend_from_slice(&v.to_le_bytes());
            }
        }
    }
    out
}

/// Loads a FAMECLIP file.
pub fn load_clip(path: impl AsRef<Path>) -> Result<Clip> {
    let path = path.as_ref();
    let bytes = std::fs::read(path).map_err(|e| Error::io(path, e))?;
    parse_clip(&bytes)
}

/// Writes a clip as a FAMECLIP file.
pub fn save_clip(clip: &Clip, path: impl AsRef<Path>, dtype: StorageKind) -> Result<()> {
    let path = path.as_ref();
    std::fs::write(path, clip_to_bytes(clip, dtype)).map_err(|e| Error::io(path, e))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn header(dtype: u8, c: u32, t: u32, h: u32, w: u32) -> Vec<u8> {
        let mut bytes = Vec::new();
        bytes.extend_from_slice(MAGIC);
        bytes.push(VERSION);
        bytes.push(dtype);
        for dim in [c, t, h, w] {
            bytes.extend_from_slice(&dim.to_le_bytes());
        }
        bytes
    }

    #[test]
    fn u8_endpoints_map_to_zero_and_one() {
        let mut bytes = header(0, 1, 1, 1, 2);
        bytes.extend_from_slice(&[0, 255]);
        let clip = parse_clip(&bytes).unwrap();
        assert_eq!(clip.data(), &[0.0, 1.0]);
    }

    #[test]
    fn u8_round_trip_of_half() {
        // round(0.5 * 255) = 128, reloads as 128/255
        let clip = Clip::new(1, 1, 1, 1, vec![0.5]).unwrap();
        let bytes = clip_to_bytes(&clip, StorageKind::U8);
        assert_eq!(bytes[HEADER_LEN], 128);
        let back = parse_clip(&bytes).unwrap();
        assert_eq!(back.data(), &[128.0f32 / 255.0]);
    }

    #[test]
    fn f32_round_trip_is_exact() {
        let clip = Clip::new(1, 2, 1, 2, vec![0.0, 0.25, 0.625, 1.0]).unwrap();
        let back = parse_clip(&clip_to_bytes(&clip, StorageKind::F32)).unwrap();
        assert_eq!(back, clip);
    }

    #[test]
    fn short_payload_names_expected_and_got() {
        let mut bytes = header(0, 1, 1, 1, 2);
        bytes.push(0);
        let err = parse_clip(&bytes).unwrap_err();
        assert!(matches!(err, Error::Length { expected: 2, got: 1 }));
    }

    #[test]
    fn bad_magic_reports_offset_zero() {
        let mut bytes = header(0, 1, 1, 1, 1);
        bytes[0] = b'X';
        bytes.push(0);
        let err = parse_clip(&bytes).unwrap_err();
        assert!(matches!(err, Error::Format { offset: 0, .. }));
    }

    #[test]
    fn bad_version_and_dtype_report_offsets() {
        let mut bytes = header(0, 1, 1, 1, 1);
        bytes[8] = 7;
        bytes.push(0);
        assert!(matches!(
            parse_clip(&bytes).unwrap_err(),
            Error::Format { offset: 8, .. }
        ));

        let mut bytes = header(9, 1, 1, 1, 1);
        bytes.push(0);
        assert!(matches!(
            parse_clip(&bytes).unwrap_err(),
            Error::Format { offset: 9, .. }
        ));
    }

    #[test]
    fn float_payload_outside_unit_interval_is_rejected() {
        let mut bytes = header(1, 1, 1, 1, 1);
        bytes.extend_from_slice(&1.5f32.to_le_bytes());
        let err = parse_clip(&bytes).unwrap_err();
        assert!(matches!(err, Error::Range { index: 0, .. }));
    }

    #[test]
    fn file_round_trip() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("clip.fameclip");
        let clip = Clip::new(3, 2, 2, 2, (0..24).map(|k| k as f32 / 23.0).collect()).unwrap();
        save_clip(&clip, &path, StorageKind::F32).unwrap();
        let first = load_clip(&path).unwrap();
        save_clip(&first, &path, StorageKind::F32).unwrap();
        let second = load_clip(&path).unwrap();
        assert_eq!(first, second);
    }
}
