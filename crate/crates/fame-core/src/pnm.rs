//! Portable anymap interchange: P6 pixmaps for frames, P5 graymaps for masks.
//!
//! Readers accept the standard header grammar (whitespace separated tokens,
//! `#` comments); writers emit the canonical `P6\n<w> <h>\n255\n` form so a
//! read/write cycle is byte identical.

use std::path::Path;

use crate::clip::Clip;
use crate::error::{Error, Result};
use crate::foreground::{BinaryMask, SoftMask};

struct Tokenizer<'a> {
    bytes: &'a [u8],
    pos: usize,
}

impl<'a> Tokenizer<'a> {
    fn new(bytes: &'a [u8], pos: usize) -> Self {
        Self { bytes, pos }
    }

    fn skip_separators(&mut self) {
        while self.pos < self.bytes.len() {
            match self.bytes[self.pos] {
                b' ' | b'\t' | b'\r' | b'\n' => self.pos += 1,
                b'#' => {
                    while self.pos < self.bytes.len() && self.bytes[self.pos] != b'\n' {
                        self.pos += 1;
                    }
                }
                _ => break,
            }
        }
    }

    fn next_u32(&mut self) -> Result<u32> {
        self.skip_separators();
        let start = self.pos;
        while self.pos < self.bytes.len() && self.bytes[self.pos].is_ascii_digit() {
            self.pos += 1;
        }
        if self.pos == start {
            return Err(Error::format(start as u64, "expected decimal integer"));
        }
        let text = std::str::from_utf8(&self.bytes[start..self.pos]).unwrap();
        text.parse::<u32>()
            .map_err(|_| Error::format(start as u64, format!("integer {text} out of range")))
    }
}

/// One decoded P6 image: interleaved RGB bytes, row-major.
pub struct P6Image {
    pub height: usize,
    pub width: usize,
    pub rgb: Vec<u8>,
}

/// Parses a binary P6 pixmap with maxval 255.
pub fn parse_p6(bytes: &[u8]) -> Result<P6Image> {
    if bytes.len() < 2 || &bytes[0..2] != b"P6" {
        return Err(Error::format(0, "bad magic, expected \"P6\""));
    }
    let mut tok = Tokenizer::new(bytes, 2);
    let width = tok.next_u32()? as usize;
    let height = tok.next_u32()? as usize;
    let maxval_at = {
        tok.skip_separators();
        tok.pos as u64
    };
    let maxval = tok.next_u32()?;
    if maxval != 255 {
        return Err(Error::format(
            maxval_at,
            format!("maxval must be 255, got {maxval}"),
        ));
    }
    if width == 0 || height == 0 {
        return Err(Error::format(2, "width and height must be >= 1"));
    }
    // Exactly one whitespace byte separates the header from the raster.
    if tok.pos >= bytes.len() || !bytes[tok.pos].is_ascii_whitespace() {
        return Err(Error::format(tok.pos as u64, "expected whitespace before raster"));
    }
    let raster = &bytes[tok.pos + 1..];
    let expected = (width * height * 3) as u64;
    if raster.len() as u64 != expected {
        return Err(Error::Length {
            expected,
            got: raster.len() as u64,
        });
    }
    Ok(P6Image {
        height,
        width,
        rgb: raster.to_vec(),
    })
}

/// Reads ordered P6 frames into one RGB clip (`C=3`, `T = paths.len()`),
/// mapping bytes to intensities by `v / 255`.
pub fn import_frames(paths: &[impl AsRef<Path>]) -> Result<Clip> {
    if paths.is_empty() {
        return Err(Error::Precondition("import requires at least one frame".into()));
    }
    let mut images: Vec<P6Image> = Vec::with_capacity(paths.len());
    for (index, path) in paths.iter().enumerate() {
        let path = path.as_ref();
        let bytes = std::fs::read(path).map_err(|e| Error::io(path, e))?;
        let image = parse_p6(&bytes)?;
        if let Some(first) = images.first() {
            if image.height != first.height || image.width != first.width {
                return Err(Error::Shape(format!(
                    "frame {index} is {}x{}, expected {}x{} from frame 0",
                    image.height, image.width, first.height, first.width
                )));
            }
        }
        images.push(image);
    }

    let (height, width) = (images[0].height, images[0].width);
    let frames = images.len();
    let plane = height * width;
    let mut data = vec![0.0f32; 3 * frames * plane];
    for (t, image) in images.iter().enumerate() {
        for p in 0..plane {
            for c in 0..3 {
                data[(c * frames + t) * plane + p] = image.rgb[p * 3 + c] as f32 / 255.0;
            }
        }
    }
    Clip::new(3, frames, height, width, data)
}

/// Serializes one frame of an RGB clip as a canonical P6 pixmap.
pub fn frame_to_p6_bytes(clip: &Clip, t: usize) -> Result<Vec<u8>> {
    if clip.channels() != 3 {
        return Err(Error::Precondition(format!(
            "P6 export requires 3 channels, clip has {}",
            clip.channels()
        )));
    }
    if t >= clip.frames() {
        return Err(Error::Precondition(format!(
            "frame index {t} out of range 0..{}",
            clip.frames()
        )));
    }
    let (h, w) = (clip.height(), clip.width());
    let mut out = format!("P6\n{w} {h}\n255\n").into_bytes();
    let planes: Vec<&[f32]> = (0..3).map(|c| clip.frame_slice(c, t)).collect();
    for p in 0..h * w {
        for plane in &planes {
            out.push((plane[p] * 255.0).round() as u8);
        }
    }
    Ok(out)
}

/// Writes one frame of an RGB clip as a P6 file.
pub fn export_frame(clip: &Clip, t: usize, path: impl AsRef<Path>) -> Result<()> {
    let path = path.as_ref();
    let bytes = frame_to_p6_bytes(clip, t)?;
    std::fs::write(path, bytes).map_err(|e| Error::io(path, e))
}

fn p5_bytes(height: usize, width: usize, gray: impl Iterator<Item = u8>) -> Vec<u8> {
    let mut out = format!("P5\n{width} {height}\n255\n").into_bytes();
    out.extend(gray);
    out
}

/// Serializes a binary mask as a P5 graymap with values 0 or 255.
pub fn binary_mask_to_p5_bytes(mask: &BinaryMask) -> Vec<u8> {
    p5_bytes(
        mask.height(),
        mask.width(),
        mask.values().iter().map(|&v| if v == 1 { 255 } else { 0 }),
    )
}

/// Serializes a soft mask as a P5 graymap via `round(v · 255)`.
pub fn soft_mask_to_p5_bytes(mask: &SoftMask) -> Vec<u8> {
    p5_bytes(
        mask.height(),
        mask.width(),
        mask.values().iter().map(|&v| (v * 255.0).round() as u8),
    )
}
