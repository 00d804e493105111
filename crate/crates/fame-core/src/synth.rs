//! Synthetic labeled videos for the bias probe.
//!
//! Each video is a class-specific sinusoidal background (large, static,
//! trivially discriminable) with a small bright square moving in a
//! direction determined by its motion class. The construction makes
//! background identity easy to shortcut and motion identity subtle, so a
//! retrieval probe can measure which one an encoder learned.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::clip::Clip;
use crate::error::{Error, Result};
use crate::foreground::BinaryMask;

/// Generator parameters. Clips are always RGB.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct SynthConfig {
    pub num_videos: usize,
    pub num_motion_classes: usize,
    pub num_background_classes: usize,
    pub frames: usize,
    pub height: usize,
    pub width: usize,
    pub object_size: usize,
    pub rng_seed: u64,
}

impl Default for SynthConfig {
    fn default() -> Self {
        Self {
            num_videos: 200,
            num_motion_classes: 4,
            num_background_classes: 8,
            frames: 8,
            height: 32,
            width: 32,
            object_size: 10,
            rng_seed: 7,
        }
    }
}

impl SynthConfig {
    pub fn validate(&self) -> Result<()> {
        if self.num_videos == 0 {
            return Err(Error::Config("num_videos must be >= 1".into()));
        }
        if self.num_motion_classes < 2 || self.num_background_classes < 2 {
            return Err(Error::Config("class counts must be >= 2".into()));
        }
        if self.frames < 2 {
            return Err(Error::Config("frames must be >= 2".into()));
        }
        if self.object_size == 0 || self.object_size >= self.height.min(self.width) {
            return Err(Error::Config(format!(
                "object_size must be in 1..min(H, W), got {} for {}x{}",
                self.object_size, self.height, self.width
            )));
        }
        Ok(())
    }

    /// Integer per-frame step: as much of the frame as `T−1` moves can sweep.
    pub fn speed(&self) -> usize {
        ((self.height.min(self.width) - self.object_size) / (self.frames - 1)).max(1)
    }

    /// Per-frame (row, column) velocity for a motion class, on the circle
    /// `2π·class/num_classes`. With four classes: right, down, left, up.
    pub fn velocity(&self, motion_label: usize) -> (i64, i64) {
        let angle = 2.0 * std::f64::consts::PI * motion_label as f64
            / self.num_motion_classes as f64;
        let speed = self.speed() as f64;
        (
            (speed * angle.sin()).round() as i64,
            (speed * angle.cos()).round() as i64,
        )
    }
}

/// A generated video with its labels.
#[derive(Debug, Clone, PartialEq)]
pub struct LabeledClip {
    pub clip: Clip,
    pub motion_label: usize,
    pub background_label: usize,
}

/// Construction-time ground truth, for verifying mask quality.
#[derive(Debug, Clone)]
pub struct VideoTruth {
    /// Top-left corner of the square per frame.
    pub positions: Vec<(usize, usize)>,
    /// Union of the square over all frames.
    pub footprint: BinaryMask,
    pub object_color: [f32; 3],
}

impl VideoTruth {
    /// Swept-area fraction of the frame, the β that matches this video.
    pub fn footprint_fraction(&self) -> f64 {
        self.footprint.ones_count() as f64
            / (self.footprint.height() * self.footprint.width()) as f64
    }
}

/// Per-video texture variation. Amplitude and offset jitter leave the
/// class-level pixel correlation untouched (Pearson is affine-invariant)
/// while giving every video a unique background fingerprint.
#[derive(Debug, Clone, Copy)]
struct BackgroundJitter {
    phase: f64,
    amplitude: f64,
    offset: f64,
}

impl BackgroundJitter {
    fn draw(rng: &mut impl Rng) -> Self {
        Self {
            phase: rng.random_range(-0.1..0.1),
            amplitude: 0.22 * rng.random_range(0.85..1.15),
            offset: 0.32 + rng.random_range(-0.03..0.03),
        }
    }
}

fn background_value(
    config: &SynthConfig,
    background_label: usize,
    jitter: BackgroundJitter,
    c: usize,
    i: usize,
    j: usize,
) -> f32 {
    let orientation =
        std::f64::consts::PI * background_label as f64 / config.num_background_classes as f64;
    let cycles = 1.5 + 0.5 * (background_label % 3) as f64;
    let freq = 2.0 * std::f64::consts::PI * cycles / config.height.max(config.width) as f64;
    let u = i as f64 * orientation.cos() + j as f64 * orientation.sin();
    let channel_phase = 2.0 * std::f64::consts::PI * c as f64 / 3.0
        + 0.7 * background_label as f64;
    (jitter.offset + jitter.amplitude * (freq * u + channel_phase + jitter.phase).sin()) as f32
}

/// Renders one video with the given labels, drawing start position, phase
/// jitter and object tint from `rng`.
pub fn synthesize_video(
    config: &SynthConfig,
    motion_label: usize,
    background_label: usize,
    rng: &mut impl Rng,
) -> (Clip, VideoTruth) {
    let (h, w, t_len, size) = (config.height, config.width, config.frames, config.object_size);
    let jitter = BackgroundJitter::draw(rng);
    let object_color = [
        rng.random_range(0.90..1.0f32),
        rng.random_range(0.90..1.0f32),
        rng.random_range(0.90..1.0f32),
    ];
    let start = (
        rng.random_range(0..=(h - size)) as i64,
        rng.random_range(0..=(w - size)) as i64,
    );
    let (vi, vj) = config.velocity(motion_label);

    let positions: Vec<(usize, usize)> = (0..t_len)
        .map(|t| {
            let i = (start.0 + vi * t as i64).clamp(0, (h - size) as i64) as usize;
            let j = (start.1 + vj * t as i64).clamp(0, (w - size) as i64) as usize;
            (i, j)
        })
        .collect();

    let mut footprint = vec![0u8; h * w];
    for &(pi, pj) in &positions {
        for i in pi..pi + size {
            for j in pj..pj + size {
                footprint[i * w + j] = 1;
            }
        }
    }

    let plane = h * w;
    let mut data = vec![0.0f32; 3 * t_len * plane];
    for c in 0..3 {
        let mut texture = Vec::with_capacity(plane);
        for i in 0..h {
            for j in 0..w {
                texture.push(background_value(config, background_label, jitter, c, i, j));
            }
        }
        for t in 0..t_len {
            let frame = &mut data[(c * t_len + t) * plane..(c * t_len + t + 1) * plane];
            frame.copy_from_slice(&texture);
            let (pi, pj) = positions[t];
            for i in pi..pi + size {
                for j in pj..pj + size {
                    frame[i * w + j] = object_color[c];
                }
            }
        }
    }

    let clip = Clip::from_valid_parts(3, t_len, h, w, data);
    let truth = VideoTruth {
        positions,
        footprint: BinaryMask::from_values(h, w, footprint).expect("0/1 by construction"),
        object_color,
    };
    (clip, truth)
}

/// Generates the full labeled dataset along with per-video ground truth.
/// Deterministic in `config.rng_seed`.
pub fn generate_with_ground_truth(
    config: &SynthConfig,
) -> Result<Vec<(LabeledClip, VideoTruth)>> {
    config.validate()?;
    let mut rng = ChaCha8Rng::seed_from_u64(config.rng_seed);
    let mut out = Vec::with_capacity(config.num_videos);
    for _ in 0..config.num_videos {
        let motion_label = rng.random_range(0..config.num_motion_classes);
        let background_label = rng.random_range(0..config.num_background_classes);
        let (clip, truth) = synthesize_video(config, motion_label, background_label, &mut rng);
        out.push((
            LabeledClip {
                clip,
                motion_label,
                background_label,
            },
            truth,
        ));
    }
    Ok(out)
}

/// Generates the labeled dataset.
pub fn generate_synthetic(config: &SynthConfig) -> Result<Vec<LabeledClip>> {
    Ok(generate_with_ground_truth(config)?
        .into_iter()
        .map(|(labeled, _)| labeled)
        .collect())
}
