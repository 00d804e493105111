//! Dense pixel volumes: the in-memory video clip and single-frame types.
//!
//! A clip is a `C×T×H×W` volume of intensities in `[0, 1]`, laid out
//! channel-major, then time, then row, then column. All types here are
//! immutable after construction; operations are pure functions.

use crate::error::{Error, Result};

/// A video clip: `channels × frames × height × width` intensities in `[0, 1]`.
#[derive(Debug, Clone, PartialEq)]
pub struct Clip {
    channels: usize,
    frames: usize,
    height: usize,
    width: usize,
    data: Vec<f32>,
}

/// A single image: `channels × height × width` intensities in `[0, 1]`.
#[derive(Debug, Clone, PartialEq)]
pub struct Frame {
    channels: usize,
    height: usize,
    width: usize,
    data: Vec<f32>,
}

fn check_dims(channels: usize, frames: usize, height: usize, width: usize) -> Result<()> {
    if channels != 1 && channels != 3 {
        return Err(Error::Precondition(format!(
            "channel count must be 1 or 3, got {channels}"
        )));
    }
    if frames == 0 || height == 0 || width == 0 {
        return Err(Error::Precondition(format!(
            "frames, height and width must be >= 1, got {frames}x{height}x{width}"
        )));
    }
    Ok(())
}

fn check_values(data: &[f32]) -> Result<()> {
    for (index, &value) in data.iter().enumerate() {
        // NaN fails the comparison too.
        if !(0.0..=1.0).contains(&value) {
            return Err(Error::Range { index, value });
        }
    }
    Ok(())
}

impl Clip {
    /// Builds a clip, validating dimensions, data length and value range.
    pub fn new(
        channels: usize,
        frames: usize,
        height: usize,
        width: usize,
        data: Vec<f32>,
    ) -> Result<Self> {
        check_dims(channels, frames, height, width)?;
        let expected = channels * frames * height * width;
        if data.len() != expected {
            return Err(Error::Length {
                expected: expected as u64,
                got: data.len() as u64,
            });
        }
        check_values(&data)?;
        Ok(Self {
            channels,
            frames,
            height,
            width,
            data,
        })
    }

    /// Internal constructor for data already known to satisfy the invariants
    /// (e.g. produced by selecting pixels from two valid clips).
    pub(crate) fn from_valid_parts(
        channels: usize,
        frames: usize,
        height: usize,
        width: usize,
        data: Vec<f32>,
    ) -> Self {
        debug_assert_eq!(data.len(), channels * frames * height * width);
        Self {
            channels,
            frames,
            height,
            width,
            data,
        }
    }

    /// Fills a clip from a per-sample generator `f(c, t, i, j)`.
    pub fn from_fn(
        channels: usize,
        frames: usize,
        height: usize,
        width: usize,
        mut f: impl FnMut(usize, usize, usize, usize) -> f32,
    ) -> Result<Self> {
        let mut data = Vec::with_capacity(channels * frames * height * width);
        for c in 0..channels {
            for t in 0..frames {
                for i in 0..height {
                    for j in 0..width {
                        data.push(f(c, t, i, j));
                    }
                }
            }
        }
        Clip::new(channels, frames, height, width, data)
    }

    pub fn channels(&self) -> usize {
        self.channels
    }

    pub fn frames(&self) -> usize {
        self.frames
    }

    pub fn height(&self) -> usize {
        self.height
    }

    pub fn width(&self) -> usize {
        self.width
    }

    pub fn data(&self) -> &[f32] {
        &self.data
    }

    /// Sample at `(c, t, i, j)`.
    pub fn get(&self, c: usize, t: usize, i: usize, j: usize) -> f32 {
        self.data[((c * self.frames + t) * self.height + i) * self.width + j]
    }

    /// Contiguous `H·W` slice for one channel of one frame.
    pub fn frame_slice(&self, c: usize, t: usize) -> &[f32] {
        let plane = self.height * self.width;
        let start = (c * self.frames + t) * plane;
        &self.data[start..start + plane]
    }

    /// Mean over the time axis: `X̃(c, i, j) = Σ_t X(c, t, i, j) / T`.
    ///
    /// Accumulates in f64 so the result does not depend on frame order.
    pub fn temporal_average(&self) -> Frame {
        let plane = self.height * self.width;
        let mut acc = vec![0.0f64; self.channels * plane];
        for c in 0..self.channels {
            let out = &mut acc[c * plane..(c + 1) * plane];
            for t in 0..self.frames {
                let frame = self.frame_slice(c, t);
                for (a, &v) in out.iter_mut().zip(frame) {
                    *a += v as f64;
                }
            }
        }
        let inv = 1.0 / self.frames as f64;
        let data = acc.iter().map(|&a| (a * inv) as f32).collect();
        Frame {
            channels: self.channels,
            height: self.height,
            width: self.width,
            data,
        }
    }

    /// Cyclic shift along time: output frame `t` is input frame `(t + offset) mod T`.
    pub fn temporal_shift(&self, offset: usize) -> Clip {
        let offset = offset % self.frames;
        if offset == 0 {
            return self.clone();
        }
        let mut data = Vec::with_capacity(self.data.len());
        for c in 0..self.channels {
            for t in 0..self.frames {
                let src = (t + offset) % self.frames;
                data.extend_from_slice(self.frame_slice(c, src));
            }
        }
        Clip::from_valid_parts(self.channels, self.frames, self.height, self.width, data)
    }

    /// True when both clips have identical `C, T, H, W`.
    pub fn same_shape(&self, other: &Clip) -> bool {
        self.channels == other.channels
            && self.frames == other.frames
            && self.height == other.height
            && self.width == other.width
    }
}

impl Frame {
    /// Builds a frame, validating dimensions, data length and value range.
    pub fn new(channels: usize, height: usize, width: usize, data: Vec<f32>) -> Result<Self> {
        check_dims(channels, 1, height, width)?;
        let expected = channels * height * width;
        if data.len() != expected {
            return Err(Error::Length {
                expected: expected as u64,
                got: data.len() as u64,
            });
        }
        check_values(&data)?;
        Ok(Self {
            channels,
            height,
            width,
            data,
        })
    }

    pub fn channels(&self) -> usize {
        self.channels
    }

    pub fn height(&self) -> usize {
        self.height
    }

    pub fn width(&self) -> usize {
        self.width
    }

    pub fn data(&self) -> &[f32] {
        &self.data
    }

    /// Sample at `(c, i, j)`.
    pub fn get(&self, c: usize, i: usize, j: usize) -> f32 {
        self.data[(c * self.height + i) * self.width + j]
    }
}
