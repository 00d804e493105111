//! Motion-seeded foreground discovery.
//!
//! The pipeline: accumulate frame differences into a seed map, sample color
//! histograms from the most- and least-moving pixels of the time-averaged
//! frame, turn per-color likelihoods into a soft mask, and binarize by
//! keeping the top `round(β·H·W)` pixels. Three cruder mask variants
//! (central Gaussian, raw seed, 4×4 grid) cover the ablation space.
//!
//! Every ranking step breaks ties by ascending row-major pixel index, so
//! the whole pipeline is a deterministic function of its inputs.

use crate::clip::{Clip, Frame};
use crate::error::{Error, Result};

/// Default histogram resolution per channel.
pub const DEFAULT_BINS: usize = 16;
/// Fraction of pixels (most motion first) sampled for the foreground histogram.
pub const DEFAULT_FG_FRACTION: f64 = 0.5;
/// Fraction of pixels (least motion) sampled for the background histogram.
pub const DEFAULT_BG_FRACTION: f64 = 0.1;

/// Nearest-integer count for a fraction of `total`; the `⌊x⌉` rule used by
/// every sampling and binarization step (halves round away from zero).
pub fn rounded_count(fraction: f64, total: usize) -> usize {
    (fraction * total as f64).round() as usize
}

/// Per-pixel motion magnitude accumulated over channels and time.
#[derive(Debug, Clone, PartialEq)]
pub struct SeedMap {
    height: usize,
    width: usize,
    values: Vec<f32>,
}

impl SeedMap {
    pub fn height(&self) -> usize {
        self.height
    }

    pub fn width(&self) -> usize {
        self.width
    }

    pub fn values(&self) -> &[f32] {
        &self.values
    }
}

/// Paired quantized color histograms for foreground and background samples.
#[derive(Debug, Clone, PartialEq)]
pub struct ColorModel {
    bins_per_channel: usize,
    channels: usize,
    fg_hist: Vec<u32>,
    bg_hist: Vec<u32>,
    fg_total: u32,
    bg_total: u32,
}

impl ColorModel {
    pub fn bins_per_channel(&self) -> usize {
        self.bins_per_channel
    }

    pub fn channels(&self) -> usize {
        self.channels
    }

    pub fn fg_total(&self) -> u32 {
        self.fg_total
    }

    pub fn bg_total(&self) -> u32 {
        self.bg_total
    }

    pub fn fg_hist(&self) -> &[u32] {
        &self.fg_hist
    }

    pub fn bg_hist(&self) -> &[u32] {
        &self.bg_hist
    }
}

/// Per-pixel foreground probability in `[0, 1]`.
#[derive(Debug, Clone, PartialEq)]
pub struct SoftMask {
    height: usize,
    width: usize,
    values: Vec<f64>,
}

impl SoftMask {
    pub fn new(height: usize, width: usize, values: Vec<f64>) -> Result<Self> {
        if values.len() != height * width {
            return Err(Error::Length {
                expected: (height * width) as u64,
                got: values.len() as u64,
            });
        }
        if let Some(&bad) = values.iter().find(|v| !(0.0..=1.0).contains(*v)) {
            return Err(Error::Precondition(format!(
                "soft mask value {bad} outside [0, 1]"
            )));
        }
        Ok(Self {
            height,
            width,
            values,
        })
    }

    pub fn height(&self) -> usize {
        self.height
    }

    pub fn width(&self) -> usize {
        self.width
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }
}

/// Hard foreground selection; `values` hold 0 or 1.
#[derive(Debug, Clone, PartialEq)]
pub struct BinaryMask {
    height: usize,
    width: usize,
    values: Vec<u8>,
    ones_count: usize,
}

impl BinaryMask {
    fn from_selected(height: usize, width: usize, selected: &[bool]) -> Self {
        let values: Vec<u8> = selected.iter().map(|&s| s as u8).collect();
        let ones_count = values.iter().filter(|&&v| v == 1).count();
        Self {
            height,
            width,
            values,
            ones_count,
        }
    }

    /// Builds a mask from explicit 0/1 values.
    pub fn from_values(height: usize, width: usize, values: Vec<u8>) -> Result<Self> {
        if values.len() != height * width {
            return Err(Error::Length {
                expected: (height * width) as u64,
                got: values.len() as u64,
            });
        }
        if values.iter().any(|&v| v > 1) {
            return Err(Error::Precondition("mask values must be 0 or 1".into()));
        }
        let ones_count = values.iter().filter(|&&v| v == 1).count();
        Ok(Self {
            height,
            width,
            values,
            ones_count,
        })
    }

    pub fn height(&self) -> usize {
        self.height
    }

    pub fn width(&self) -> usize {
        self.width
    }

    pub fn values(&self) -> &[u8] {
        &self.values
    }

    pub fn ones_count(&self) -> usize {
        self.ones_count
    }

    pub fn get(&self, i: usize, j: usize) -> u8 {
        self.values[i * self.width + j]
    }
}

/// Frame-difference seed region:
/// `S(i,j) = Σ_c Σ_t |X(c,t+1,i,j) − X(c,t,i,j)| / (T−1)`.
pub fn seed_region(clip: &Clip) -> Result<SeedMap> {
    if clip.frames() < 2 {
        return Err(Error::Precondition(
            "seed region requires at least two frames".into(),
        ));
    }
    let plane = clip.height() * clip.width();
    let mut values = vec![0.0f32; plane];
    for c in 0..clip.channels() {
        for t in 0..clip.frames() - 1 {
            let cur = clip.frame_slice(c, t);
            let next = clip.frame_slice(c, t + 1);
            for (acc, (&a, &b)) in values.iter_mut().zip(cur.iter().zip(next)) {
                *acc += (b - a).abs();
            }
        }
    }
    let norm = (clip.frames() - 1) as f32;
    for v in &mut values {
        *v /= norm;
    }
    Ok(SeedMap {
        height: clip.height(),
        width: clip.width(),
        values,
    })
}

/// Pixel indices sorted by descending key, ties by ascending index.
fn rank_descending_f32(keys: &[f32]) -> Vec<u32> {
    let mut order: Vec<u32> = (0..keys.len() as u32).collect();
    order.sort_unstable_by(|&a, &b| {
        keys[b as usize]
            .total_cmp(&keys[a as usize])
            .then(a.cmp(&b))
    });
    order
}

fn rank_descending_f64(keys: &[f64]) -> Vec<u32> {
    let mut order: Vec<u32> = (0..keys.len() as u32).collect();
    order.sort_unstable_by(|&a, &b| {
        keys[b as usize]
            .total_cmp(&keys[a as usize])
            .then(a.cmp(&b))
    });
    order
}

/// Quantized color index of pixel `p`: `Σ_c bin_c · B^(C−1−c)` with
/// `bin_c = min(⌊v_c·B⌋, B−1)`.
fn color_index(frame: &Frame, p: usize, bins: usize) -> usize {
    let plane = frame.height() * frame.width();
    let data = frame.data();
    let mut index = 0usize;
    for c in 0..frame.channels() {
        let v = data[c * plane + p] as f64;
        let bin = ((v * bins as f64).floor() as usize).min(bins - 1);
        index = index * bins + bin;
    }
    index
}

fn validate_bins(bins: usize) -> Result<()> {
    if !(1..=256).contains(&bins) {
        return Err(Error::Precondition(format!(
            "bins per channel must be in 1..=256, got {bins}"
        )));
    }
    Ok(())
}

/// Builds the color model by histogramming the `round(fg_frac·H·W)` pixels
/// with the largest seed values (foreground sample) and the
/// `round(bg_frac·H·W)` pixels with the smallest (background sample).
pub fn sample_color_model(
    avg: &Frame,
    seed: &SeedMap,
    fg_frac: f64,
    bg_frac: f64,
    bins: usize,
) -> Result<ColorModel> {
    if avg.height() != seed.height() || avg.width() != seed.width() {
        return Err(Error::Shape(format!(
            "frame is {}x{} but seed map is {}x{}",
            avg.height(),
            avg.width(),
            seed.height(),
            seed.width()
        )));
    }
    validate_bins(bins)?;
    if fg_frac <= 0.0 || bg_frac <= 0.0 || fg_frac + bg_frac > 1.0 {
        return Err(Error::Precondition(format!(
            "sample fractions must be positive and sum to at most 1, got {fg_frac} + {bg_frac}"
        )));
    }
    let pixels = avg.height() * avg.width();
    let fg_total = rounded_count(fg_frac, pixels);
    let bg_total = rounded_count(bg_frac, pixels);
    if fg_total == 0 || bg_total == 0 {
        return Err(Error::Precondition(format!(
            "empty sample after rounding: fg={fg_total}, bg={bg_total} of {pixels} pixels"
        )));
    }

    let order = rank_descending_f32(seed.values());
    let colors = bins.pow(avg.channels() as u32);
    let mut fg_hist = vec![0u32; colors];
    let mut bg_hist = vec![0u32; colors];
    for &p in &order[..fg_total] {
        fg_hist[color_index(avg, p as usize, bins)] += 1;
    }
    for &p in &order[pixels - bg_total..] {
        bg_hist[color_index(avg, p as usize, bins)] += 1;
    }
    Ok(ColorModel {
        bins_per_channel: bins,
        channels: avg.channels(),
        fg_hist,
        bg_hist,
        fg_total: fg_total as u32,
        bg_total: bg_total as u32,
    })
}

impl ColorModel {
    /// `P(F|x) = P(x|F) / (P(x|F) + P(x|B))` for a quantized color; an
    /// unseen color maps to 0.5.
    pub fn foreground_likelihood(&self, color_index: usize) -> f64 {
        let p_f = self.fg_hist[color_index] as f64 / self.fg_total as f64;
        let p_b = self.bg_hist[color_index] as f64 / self.bg_total as f64;
        if p_f == 0.0 && p_b == 0.0 {
            0.5
        } else {
            p_f / (p_f + p_b)
        }
    }
}

/// Per-pixel foreground likelihood of the time-averaged frame.
pub fn soft_mask(avg: &Frame, model: &ColorModel) -> Result<SoftMask> {
    if avg.channels() != model.channels() {
        return Err(Error::Shape(format!(
            "frame has {} channels but color model was sampled from {}",
            avg.channels(),
            model.channels()
        )));
    }
    let pixels = avg.height() * avg.width();
    let values = (0..pixels)
        .map(|p| model.foreground_likelihood(color_index(avg, p, model.bins_per_channel)))
        .collect();
    Ok(SoftMask {
        height: avg.height(),
        width: avg.width(),
        values,
    })
}

fn validate_beta(beta: f64, pixels: usize) -> Result<usize> {
    if !(beta > 0.0 && beta <= 1.0) {
        return Err(Error::Precondition(format!(
            "beta must satisfy 0 < beta <= 1, got {beta}"
        )));
    }
    let keep = rounded_count(beta, pixels);
    if keep == 0 {
        return Err(Error::Precondition(format!(
            "round(beta*H*W) must be >= 1, got 0 for beta={beta} over {pixels} pixels"
        )));
    }
    Ok(keep)
}

/// Keeps exactly `round(β·H·W)` pixels: the largest soft values, ties by
/// ascending row-major index.
pub fn binarize(soft: &SoftMask, beta: f64) -> Result<BinaryMask> {
    let pixels = soft.values.len();
    let keep = validate_beta(beta, pixels)?;
    let order = rank_descending_f64(&soft.values);
    let mut selected = vec![false; pixels];
    for &p in &order[..keep] {
        selected[p as usize] = true;
    }
    Ok(BinaryMask::from_selected(soft.height, soft.width, &selected))
}

/// The cruder mask constructions used for ablations.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum MaskVariant {
    /// Centered 2D Gaussian prior, σ = (H/4, W/4).
    Gauss,
    /// The raw seed region used directly as the soft mask.
    Seed,
    /// 4×4 spatial grid ranked by summed seed values; whole cells selected.
    Grid,
}

/// Boundary of grid cell `g` of 4 along an axis of `len` pixels.
fn grid_edge(g: usize, len: usize) -> usize {
    g * len / 4
}

/// Builds an ablation-variant mask. `Gauss` works on any clip; `Seed` and
/// `Grid` need at least two frames, `Grid` also at least 4×4 pixels.
pub fn variant_mask(clip: &Clip, variant: MaskVariant, beta: f64) -> Result<BinaryMask> {
    let (h, w) = (clip.height(), clip.width());
    match variant {
        MaskVariant::Gauss => {
            let (ci, cj) = ((h as f64 - 1.0) / 2.0, (w as f64 - 1.0) / 2.0);
            let (si, sj) = (h as f64 / 4.0, w as f64 / 4.0);
            let mut values = Vec::with_capacity(h * w);
            for i in 0..h {
                for j in 0..w {
                    let di = i as f64 - ci;
                    let dj = j as f64 - cj;
                    values.push((-(di * di / (2.0 * si * si) + dj * dj / (2.0 * sj * sj))).exp());
                }
            }
            binarize(&SoftMask::new(h, w, values)?, beta)
        }
        MaskVariant::Seed => {
            let seed = seed_region(clip)?;
            let values = seed.values().iter().map(|&v| v as f64).collect();
            // Seed magnitudes are bounded by 1 since intensities live in [0, 1].
            binarize(
                &SoftMask {
                    height: h,
                    width: w,
                    values,
                },
                beta,
            )
        }
        MaskVariant::Grid => {
            if h < 4 || w < 4 {
                return Err(Error::Precondition(format!(
                    "grid variant requires height and width >= 4, got {h}x{w}"
                )));
            }
            validate_beta(beta, h * w)?;
            let cells = rounded_count(beta, 16);
            if cells == 0 {
                return Err(Error::Precondition(format!(
                    "round(beta*16) grid cells must be >= 1, got 0 for beta={beta}"
                )));
            }
            let seed = seed_region(clip)?;
            let mut sums = [0.0f64; 16];
            for gi in 0..4 {
                for gj in 0..4 {
                    let mut sum = 0.0f64;
                    for i in grid_edge(gi, h)..grid_edge(gi + 1, h) {
                        for j in grid_edge(gj, w)..grid_edge(gj + 1, w) {
                            sum += seed.values()[i * w + j] as f64;
                        }
                    }
                    sums[gi * 4 + gj] = sum;
                }
            }
            let order = rank_descending_f64(&sums);
            let mut selected = vec![false; h * w];
            for &cell in &order[..cells] {
                let (gi, gj) = (cell as usize / 4, cell as usize % 4);
                for i in grid_edge(gi, h)..grid_edge(gi + 1, h) {
                    for j in grid_edge(gj, w)..grid_edge(gj + 1, w) {
                        selected[i * w + j] = true;
                    }
                }
            }
            Ok(BinaryMask::from_selected(h, w, &selected))
        }
    }
}

/// The full foreground-discovery pipeline: one binary mask per clip, shared
/// by all of its frames.
pub fn fame_mask(clip: &Clip, beta: f64, bins: usize) -> Result<BinaryMask> {
    let seed = seed_region(clip)?;
    let avg = clip.temporal_average();
    let model = sample_color_model(&avg, &seed, DEFAULT_FG_FRACTION, DEFAULT_BG_FRACTION, bins)?;
    let soft = soft_mask(&avg, &model)?;
    binarize(&soft, beta)
}
