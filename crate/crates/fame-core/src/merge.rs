//! Foreground/background compositing and batch-level background shuffling.
//!
//! `merge` implements `X_merge = X⊗M̃ + Y⊗(1−M̃)`: every output pixel is
//! copied from exactly one input, selected by the mask, which broadcasts
//! over channels and time. Batch augmentation assigns each clip a donor
//! background — another batch member (inter) or a time-shifted window of
//! itself (intra) — and replaces everything outside the clip's mask with
//! raw donor pixels.

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::clip::Clip;
use crate::error::{Error, Result};
use crate::foreground::{fame_mask, BinaryMask, DEFAULT_BINS};

/// Where donor backgrounds come from.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum BackgroundMode {
    /// Donor is another clip of the same batch (derangement assignment).
    Inter,
    /// Donor is the same clip at a time-shifted window.
    Intra,
}

/// Whether one or both views of the positive pair are merged.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Branches {
    Single,
    Both,
}

/// Knobs for batch augmentation.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct AugmentConfig {
    pub beta: f64,
    pub bins: usize,
    pub background_mode: BackgroundMode,
    pub branches: Branches,
    /// Temporal shift (frames, wrapping) of the intra-video donor window.
    pub intra_offset: usize,
    pub rng_seed: u64,
}

impl Default for AugmentConfig {
    fn default() -> Self {
        Self {
            beta: 0.5,
            bins: DEFAULT_BINS,
            background_mode: BackgroundMode::Inter,
            branches: Branches::Single,
            intra_offset: 4,
            rng_seed: 0,
        }
    }
}

impl AugmentConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.beta > 0.0 && self.beta <= 1.0) {
            return Err(Error::Precondition(format!(
                "beta must satisfy 0 < beta <= 1, got {}",
                self.beta
            )));
        }
        if !(1..=256).contains(&self.bins) {
            return Err(Error::Precondition(format!(
                "bins per channel must be in 1..=256, got {}",
                self.bins
            )));
        }
        Ok(())
    }
}

/// Bijective clip-to-donor mapping for one batch.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct BatchAssignment {
    permutation: Vec<usize>,
}

impl BatchAssignment {
    pub fn donor_of(&self, clip_index: usize) -> usize {
        self.permutation[clip_index]
    }

    pub fn permutation(&self) -> &[usize] {
        &self.permutation
    }

    pub fn is_derangement(&self) -> bool {
        self.permutation.iter().enumerate().all(|(i, &p)| i != p)
    }
}

/// Draws the clip-to-donor mapping: a uniformly random derangement for
/// inter-video mode, the identity for intra-video mode.
pub fn assign_backgrounds(
    batch_size: usize,
    mode: BackgroundMode,
    rng: &mut impl Rng,
) -> Result<BatchAssignment> {
    if batch_size == 0 {
        return Err(Error::Precondition("batch must be non-empty".into()));
    }
    match mode {
        BackgroundMode::Intra => Ok(BatchAssignment {
            permutation: (0..batch_size).collect(),
        }),
        BackgroundMode::Inter => {
            if batch_size < 2 {
                return Err(Error::Precondition(
                    "inter-video assignment requires a batch of at least 2".into(),
                ));
            }
            // Rejection sampling stays uniform over derangements and accepts
            // with probability ~1/e per draw.
            let mut permutation: Vec<usize> = (0..batch_size).collect();
            loop {
                permutation.shuffle(rng);
                if permutation.iter().enumerate().all(|(i, &p)| i != p) {
                    return Ok(BatchAssignment { permutation });
                }
            }
        }
    }
}

/// Per-pixel selection `X⊗M̃ + Y⊗(1−M̃)`; the mask broadcasts over
/// channels and frames.
pub fn merge(fg: &Clip, bg: &Clip, mask: &BinaryMask) -> Result<Clip> {
    for (axis, a, b) in [
        ("channels", fg.channels(), bg.channels()),
        ("frames", fg.frames(), bg.frames()),
        ("height", fg.height(), bg.height()),
        ("width", fg.width(), bg.width()),
    ] {
        if a != b {
            return Err(Error::Shape(format!(
                "{axis}: foreground has {a} but background has {b}"
            )));
        }
    }
    for (axis, clip_len, mask_len) in [
        ("height", fg.height(), mask.height()),
        ("width", fg.width(), mask.width()),
    ] {
        if clip_len != mask_len {
            return Err(Error::Shape(format!(
                "{axis}: clip has {clip_len} but mask has {mask_len}"
            )));
        }
    }

    let mut data = Vec::with_capacity(fg.data().len());
    for c in 0..fg.channels() {
        for t in 0..fg.frames() {
            let f = fg.frame_slice(c, t);
            let b = bg.frame_slice(c, t);
            data.extend(
                mask.values()
                    .iter()
                    .zip(f.iter().zip(b))
                    .map(|(&m, (&fv, &bv))| if m == 1 { fv } else { bv }),
            );
        }
    }
    Ok(Clip::from_valid_parts(
        fg.channels(),
        fg.frames(),
        fg.height(),
        fg.width(),
        data,
    ))
}

/// One augmented positive pair.
pub type ViewPair = (Clip, Clip);

fn donor_for<'a>(
    clips: &'a [Clip],
    view_base: &Clip,
    assignment: &BatchAssignment,
    index: usize,
    config: &AugmentConfig,
) -> std::borrow::Cow<'a, Clip> {
    match config.background_mode {
        BackgroundMode::Inter => std::borrow::Cow::Borrowed(&clips[assignment.donor_of(index)]),
        BackgroundMode::Intra => std::borrow::Cow::Owned(view_base.temporal_shift(config.intra_offset)),
    }
}

/// Produces the two training views per clip.
///
/// View one is the clip itself; view two is the clip (inter mode) or its
/// `intra_offset`-shifted window (intra mode). Merged views keep the clip's
/// own foreground (its mask is computed once and shared) and take donor
/// pixels raw everywhere else. With `Branches::Single` only view one is
/// merged; with `Branches::Both` each view is merged with an independently
/// assigned donor. Deterministic in `(clips, config)` including `rng_seed`.
pub fn fame_augment_batch(clips: &[Clip], config: &AugmentConfig) -> Result<Vec<ViewPair>> {
    config.validate()?;
    if clips.is_empty() {
        return Err(Error::Precondition("batch must be non-empty".into()));
    }
    let first = &clips[0];
    for (index, clip) in clips.iter().enumerate() {
        if !clip.same_shape(first) {
            return Err(Error::Shape(format!(
                "clip {index} is {}x{}x{}x{}, expected {}x{}x{}x{}",
                clip.channels(),
                clip.frames(),
                clip.height(),
                clip.width(),
                first.channels(),
                first.frames(),
                first.height(),
                first.width()
            )));
        }
    }

    let mut rng = ChaCha8Rng::seed_from_u64(config.rng_seed);
    let primary = assign_backgrounds(clips.len(), config.background_mode, &mut rng)?;
    let secondary = match config.branches {
        Branches::Single => None,
        Branches::Both => Some(assign_backgrounds(
            clips.len(),
            config.background_mode,
            &mut rng,
        )?),
    };

    let mut pairs = Vec::with_capacity(clips.len());
    for (index, clip) in clips.iter().enumerate() {
        let mask = fame_mask(clip, config.beta, config.bins)?;
        let view_two_base = match config.background_mode {
            BackgroundMode::Inter => clip.clone(),
            BackgroundMode::Intra => clip.temporal_shift(config.intra_offset),
        };

        let donor_one = donor_for(clips, clip, &primary, index, config);
        let view_one = merge(clip, &donor_one, &mask)?;

        let view_two = match &secondary {
            None => view_two_base,
            Some(assignment) => {
                let donor_two = donor_for(clips, &view_two_base, assignment, index, config);
                merge(&view_two_base, &donor_two, &mask)?
            }
        };
        pairs.push((view_one, view_two));
    }
    Ok(pairs)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::foreground::rounded_count;

    fn checker_clip(seed: u32, frames: usize) -> Clip {
        Clip::from_fn(1, frames, 4, 4, |_, t, i, j| {
            (((seed as usize + 3 * t + 5 * i + 7 * j) % 13) as f32) / 13.0
        })
        .unwrap()
    }

    fn mask_of(values: Vec<u8>, h: usize, w: usize) -> BinaryMask {
        BinaryMask::from_values(h, w, values).unwrap()
    }

    #[test]
    fn all_ones_mask_returns_foreground() {
        let fg = checker_clip(1, 2);
        let bg = checker_clip(9, 2);
        let mask = mask_of(vec![1; 16], 4, 4);
        assert_eq!(merge(&fg, &bg, &mask).unwrap(), fg);
    }

    #[test]
    fn all_zeros_mask_returns_background() {
        let fg = checker_clip(1, 2);
        let bg = checker_clip(9, 2);
        let mask = mask_of(vec![0; 16], 4, 4);
        assert_eq!(merge(&fg, &bg, &mask).unwrap(), bg);
    }

    #[test]
    fn hand_merge_example() {
        let fg = Clip::new(1, 1, 1, 2, vec![0.9, 0.9]).unwrap();
        let bg = Clip::new(1, 1, 1, 2, vec![0.1, 0.1]).unwrap();
        let mask = mask_of(vec![1, 0], 1, 2);
        let merged = merge(&fg, &bg, &mask).unwrap();
        assert_eq!(merged.data(), &[0.9, 0.1]);
    }

    #[test]
    fn shape_mismatch_names_the_axis() {
        let fg = checker_clip(1, 2);
        let bg = checker_clip(1, 3);
        let mask = mask_of(vec![1; 16], 4, 4);
        match merge(&fg, &bg, &mask) {
            Err(Error::Shape(msg)) => assert!(msg.starts_with("frames"), "{msg}"),
            other => panic!("expected shape error, got {other:?}"),
        }
    }

    #[test]
    fn merge_with_itself_is_identity() {
        let clip = checker_clip(4, 3);
        let mask = mask_of(vec![1, 0, 1, 0, 0, 1, 0, 1, 1, 1, 0, 0, 0, 0, 1, 1], 4, 4);
        assert_eq!(merge(&clip, &clip, &mask).unwrap(), clip);
    }

    #[test]
    fn inter_with_two_clips_is_the_swap() {
        let mut rng = ChaCha8Rng::seed_from_u64(0);
        let assignment = assign_backgrounds(2, BackgroundMode::Inter, &mut rng).unwrap();
        assert_eq!(assignment.permutation(), &[1, 0]);
    }

    #[test]
    fn intra_is_identity() {
        let mut rng = ChaCha8Rng::seed_from_u64(0);
        let assignment = assign_backgrounds(5, BackgroundMode::Intra, &mut rng).unwrap();
        assert_eq!(assignment.permutation(), &[0, 1, 2, 3, 4]);
    }

    #[test]
    fn inter_assignment_is_seed_deterministic() {
        for seed in 0..10u64 {
            let mut a = ChaCha8Rng::seed_from_u64(seed);
            let mut b = ChaCha8Rng::seed_from_u64(seed);
            assert_eq!(
                assign_backgrounds(4, BackgroundMode::Inter, &mut a).unwrap(),
                assign_backgrounds(4, BackgroundMode::Inter, &mut b).unwrap()
            );
        }
    }

    #[test]
    fn inter_with_one_clip_is_rejected() {
        let mut rng = ChaCha8Rng::seed_from_u64(0);
        assert!(matches!(
            assign_backgrounds(1, BackgroundMode::Inter, &mut rng),
            Err(Error::Precondition(_))
        ));
    }

    #[test]
    fn beta_one_single_branch_leaves_the_clip_unchanged() {
        let clips = vec![
            Clip::from_fn(1, 2, 4, 4, |_, t, i, j| {
                ((t + i + j) % 5) as f32 / 5.0
            })
            .unwrap(),
            checker_clip(2, 2),
        ];
        let config = AugmentConfig {
            beta: 1.0,
            rng_seed: 3,
            ..AugmentConfig::default()
        };
        let pairs = fame_augment_batch(&clips, &config).unwrap();
        for (pair, clip) in pairs.iter().zip(&clips) {
            assert_eq!(&pair.0, clip);
            assert_eq!(&pair.1, clip);
        }
    }

    #[test]
    fn augment_batch_is_deterministic() {
        let clips: Vec<Clip> = (0..4).map(|k| checker_clip(k, 4)).collect();
        let config = AugmentConfig {
            beta: 0.5,
            rng_seed: 11,
            branches: Branches::Both,
            ..AugmentConfig::default()
        };
        let a = fame_augment_batch(&clips, &config).unwrap();
        let b = fame_augment_batch(&clips, &config).unwrap();
        assert_eq!(a, b);
    }

    #[test]
    fn both_branches_alter_both_views() {
        let clips: Vec<Clip> = (0..4)
            .map(|k| {
                Clip::from_fn(1, 4, 8, 8, |_, t, i, j| {
                    let square = i >= t && i < t + 3 && j >= 2 * (k as usize % 3) && j < 2 * (k as usize % 3) + 3;
                    if square {
                        0.9 + 0.02 * k as f32
                    } else {
                        ((i * 8 + j + k as usize) % 9) as f32 / 30.0
                    }
                })
                .unwrap()
            })
            .collect();
        let config = AugmentConfig {
            beta: 0.4,
            branches: Branches::Both,
            rng_seed: 5,
            ..AugmentConfig::default()
        };
        let pairs = fame_augment_batch(&clips, &config).unwrap();
        for (pair, clip) in pairs.iter().zip(&clips) {
            assert_ne!(&pair.0, clip);
            assert_ne!(&pair.1, clip);
        }
    }

    #[test]
    fn merged_background_pixels_come_from_the_donor() {
        let clips: Vec<Clip> = (0..2).map(|k| checker_clip(2 + 4 * k, 4)).collect();
        let config = AugmentConfig {
            beta: 0.25,
            rng_seed: 7,
            ..AugmentConfig::default()
        };
        let pairs = fame_augment_batch(&clips, &config).unwrap();
        // N=2 inter assignment is the swap
        for (index, (merged, untouched)) in pairs.iter().enumerate() {
            assert_eq!(untouched, &clips[index]);
            let donor = &clips[1 - index];
            let mask = fame_mask(&clips[index], config.beta, config.bins).unwrap();
            for t in 0..4 {
                for i in 0..4 {
                    for j in 0..4 {
                        let expect = if mask.get(i, j) == 1 {
                            clips[index].get(0, t, i, j)
                        } else {
                            donor.get(0, t, i, j)
                        };
                        assert_eq!(merged.get(0, t, i, j), expect);
                    }
                }
            }
        }
    }

    #[test]
    fn ones_count_matches_rounding_rule() {
        assert_eq!(rounded_count(0.5, 1024), 512);
        assert_eq!(rounded_count(0.3, 1024), 307);
        assert_eq!(rounded_count(1.0, 64), 64);
    }
}
