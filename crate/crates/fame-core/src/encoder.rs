//! A tiny two-layer encoder over pooled clips.
//!
//! The clip is average-pooled 2× along time and space, flattened, pushed
//! through `affine → relu → affine`, and the output is L2-normalized to a
//! unit embedding. All math is f64 so analytic gradients can be checked
//! against central finite differences.

use std::sync::atomic::{AtomicU64, Ordering};

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::clip::Clip;
use crate::error::{Error, Result};

pub const HIDDEN_WIDTH: usize = 128;
pub const EMBED_WIDTH: usize = 32;

/// Weights and biases of the two affine layers, stored as one flat vector
/// `[w1 | b1 | w2 | b2]` so finite-difference probes and SGD updates can
/// address every coordinate uniformly.
#[derive(Debug)]
pub struct EncoderParams {
    channels: usize,
    frames: usize,
    height: usize,
    width: usize,
    input_dim: usize,
    values: Vec<f64>,
    zero_fallbacks: AtomicU64,
}

impl Clone for EncoderParams {
    fn clone(&self) -> Self {
        Self {
            channels: self.channels,
            frames: self.frames,
            height: self.height,
            width: self.width,
            input_dim: self.input_dim,
            values: self.values.clone(),
            zero_fallbacks: AtomicU64::new(self.zero_fallbacks.load(Ordering::Relaxed)),
        }
    }
}

fn pooled_len(n: usize) -> usize {
    n.div_ceil(2)
}

impl EncoderParams {
    /// Random initialization, uniform in `±1/√fan_in` per layer, zero biases.
    pub fn init(
        channels: usize,
        frames: usize,
        height: usize,
        width: usize,
        rng_seed: u64,
    ) -> Self {
        let input_dim =
            channels * pooled_len(frames) * pooled_len(height) * pooled_len(width);
        let total = HIDDEN_WIDTH * input_dim + HIDDEN_WIDTH + EMBED_WIDTH * HIDDEN_WIDTH + EMBED_WIDTH;
        let mut values = vec![0.0f64; total];
        let mut rng = ChaCha8Rng::seed_from_u64(rng_seed);
        let a1 = 1.0 / (input_dim as f64).sqrt();
        for v in &mut values[..HIDDEN_WIDTH * input_dim] {
            *v = rng.random_range(-a1..a1);
        }
        let a2 = 1.0 / (HIDDEN_WIDTH as f64).sqrt();
        let w2_start = HIDDEN_WIDTH * input_dim + HIDDEN_WIDTH;
        for v in &mut values[w2_start..w2_start + EMBED_WIDTH * HIDDEN_WIDTH] {
            *v = rng.random_range(-a2..a2);
        }
        Self {
            channels,
            frames,
            height,
            width,
            input_dim,
            values,
            zero_fallbacks: AtomicU64::new(0),
        }
    }

    pub fn input_dim(&self) -> usize {
        self.input_dim
    }

    pub fn param_count(&self) -> usize {
        self.values.len()
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn values_mut(&mut self) -> &mut [f64] {
        &mut self.values
    }

    /// How many encodes hit the zero-vector fallback so far.
    pub fn zero_fallback_count(&self) -> u64 {
        self.zero_fallbacks.load(Ordering::Relaxed)
    }

    fn offsets(&self) -> (usize, usize, usize) {
        let b1 = HIDDEN_WIDTH * self.input_dim;
        let w2 = b1 + HIDDEN_WIDTH;
        let b2 = w2 + EMBED_WIDTH * HIDDEN_WIDTH;
        (b1, w2, b2)
    }

    /// 2× average pooling along time and space, then flatten, in f64.
    fn pooled_input(&self, clip: &Clip) -> Result<Vec<f64>> {
        if clip.channels() != self.channels
            || clip.frames() != self.frames
            || clip.height() != self.height
            || clip.width() != self.width
        {
            return Err(Error::Shape(format!(
                "clip is {}x{}x{}x{} but encoder expects {}x{}x{}x{}",
                clip.channels(),
                clip.frames(),
                clip.height(),
                clip.width(),
                self.channels,
                self.frames,
                self.height,
                self.width
            )));
        }
        let (pt, ph, pw) = (
            pooled_len(self.frames),
            pooled_len(self.height),
            pooled_len(self.width),
        );
        let mut out = Vec::with_capacity(self.input_dim);
        for c in 0..self.channels {
            for bt in 0..pt {
                let t_end = (2 * bt + 2).min(self.frames);
                for bi in 0..ph {
                    let i_end = (2 * bi + 2).min(self.height);
                    for bj in 0..pw {
                        let j_end = (2 * bj + 2).min(self.width);
                        let mut sum = 0.0f64;
                        let mut count = 0usize;
                        for t in 2 * bt..t_end {
                            for i in 2 * bi..i_end {
                                for j in 2 * bj..j_end {
                                    sum += clip.get(c, t, i, j) as f64;
                                    count += 1;
                                }
                            }
                        }
                        out.push(sum / count as f64);
                    }
                }
            }
        }
        Ok(out)
    }

    pub(crate) fn forward(&self, clip: &Clip) -> Result<ForwardCache> {
        let x = self.pooled_input(clip)?;
        let (ob1, ow2, ob2) = self.offsets();
        let w1 = &self.values[..ob1];
        let b1 = &self.values[ob1..ow2];
        let w2 = &self.values[ow2..ob2];
        let b2 = &self.values[ob2..];

        let mut hidden = vec![0.0f64; HIDDEN_WIDTH];
        for (h, out) in hidden.iter_mut().enumerate() {
            let row = &w1[h * self.input_dim..(h + 1) * self.input_dim];
            let mut acc = b1[h];
            for (w, xv) in row.iter().zip(&x) {
                acc += w * xv;
            }
            *out = acc.max(0.0);
        }

        let mut raw = vec![0.0f64; EMBED_WIDTH];
        for (e, out) in raw.iter_mut().enumerate() {
            let row = &w2[e * HIDDEN_WIDTH..(e + 1) * HIDDEN_WIDTH];
            let mut acc = b2[e];
            for (w, hv) in row.iter().zip(&hidden) {
                acc += w * hv;
            }
            *out = acc;
        }

        let norm = raw.iter().map(|v| v * v).sum::<f64>().sqrt();
        let embedding = if norm == 0.0 {
            self.zero_fallbacks.fetch_add(1, Ordering::Relaxed);
            let mut basis = vec![0.0f64; EMBED_WIDTH];
            basis[0] = 1.0;
            basis
        } else {
            raw.iter().map(|v| v / norm).collect()
        };
        Ok(ForwardCache {
            x,
            hidden,
            norm,
            embedding,
        })
    }

    /// Unit-norm embedding of a clip.
    pub fn encode(&self, clip: &Clip) -> Result<Vec<f64>> {
        Ok(self.forward(clip)?.embedding)
    }

    /// Accumulates parameter gradients for `d_embedding = ∂L/∂z` through
    /// the cached forward pass.
    pub(crate) fn backward(
        &self,
        cache: &ForwardCache,
        d_embedding: &[f64],
        grads: &mut EncoderGrads,
    ) {
        if cache.norm == 0.0 {
            // constant fallback output: no gradient flows
            return;
        }
        let (ob1, ow2, ob2) = self.offsets();
        let w2 = &self.values[ow2..ob2];

        // through z = y / ||y||: dy = (dz − (dz·z) z) / ||y||
        let dot: f64 = d_embedding
            .iter()
            .zip(&cache.embedding)
            .map(|(d, z)| d * z)
            .sum();
        let d_raw: Vec<f64> = d_embedding
            .iter()
            .zip(&cache.embedding)
            .map(|(d, z)| (d - dot * z) / cache.norm)
            .collect();

        let g = &mut grads.values;
        for (e, &dr) in d_raw.iter().enumerate() {
            g[ob2 + e] += dr;
            let row = &mut g[ow2 + e * HIDDEN_WIDTH..ow2 + (e + 1) * HIDDEN_WIDTH];
            for (gw, hv) in row.iter_mut().zip(&cache.hidden) {
                *gw += dr * hv;
            }
        }

        for h in 0..HIDDEN_WIDTH {
            if cache.hidden[h] <= 0.0 {
                continue; // relu gate closed
            }
            let mut dh = 0.0f64;
            for (e, &dr) in d_raw.iter().enumerate() {
                dh += w2[e * HIDDEN_WIDTH + h] * dr;
            }
            if dh == 0.0 {
                continue;
            }
            g[ob1 + h] += dh;
            let row = &mut g[h * self.input_dim..(h + 1) * self.input_dim];
            for (gw, xv) in row.iter_mut().zip(&cache.x) {
                *gw += dh * xv;
            }
        }
    }

    /// Plain gradient-descent step.
    pub fn step(&mut self, grads: &EncoderGrads, learning_rate: f64) {
        for (p, g) in self.values.iter_mut().zip(&grads.values) {
            *p -= learning_rate * g;
        }
    }
}

/// Intermediate activations kept for the backward pass.
pub(crate) struct ForwardCache {
    x: Vec<f64>,
    hidden: Vec<f64>,
    norm: f64,
    pub(crate) embedding: Vec<f64>,
}

/// Gradient buffer matching the flat parameter layout.
pub struct EncoderGrads {
    values: Vec<f64>,
}

impl EncoderGrads {
    pub fn zeros_like(params: &EncoderParams) -> Self {
        Self {
            values: vec![0.0f64; params.param_count()],
        }
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn scale(&mut self, factor: f64) {
        for v in &mut self.values {
            *v *= factor;
        }
    }
}
