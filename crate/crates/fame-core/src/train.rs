//! Contrastive training of the tiny encoder and the retrieval probe.
//!
//! Each step draws a batch, forms two views per video (two temporal
//! windows when augmentation is off, otherwise the merged pairs from the
//! batch augmenter), and accumulates a symmetric InfoNCE loss where each
//! view queries the other and all other videos' views act as negatives.
//! Updates are plain gradient descent in a fixed order, so runs are
//! bit-reproducible from the seed.

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::encoder::{EncoderGrads, EncoderParams};
use crate::error::{Error, Result};
use crate::loss::{cosine_sim, info_nce, info_nce_grad};
use crate::merge::{fame_augment_batch, AugmentConfig};
use crate::synth::LabeledClip;

/// Whether and how training views are augmented.
#[derive(Debug, Clone, PartialEq)]
pub enum Augmentation {
    /// Two random temporal windows of the same clip.
    Off,
    /// Foreground-background merged views.
    Fame(AugmentConfig),
}

/// Training hyperparameters.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct TrainOptions {
    pub epochs: usize,
    pub batch_size: usize,
    pub learning_rate: f64,
    pub temperature: f64,
    pub rng_seed: u64,
}

impl Default for TrainOptions {
    fn default() -> Self {
        Self {
            epochs: 30,
            batch_size: 16,
            learning_rate: 0.05,
            temperature: 0.1,
            rng_seed: 7,
        }
    }
}

/// Retrieval probe output.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ProbeMetrics {
    pub motion_recall_at_1: f64,
    pub background_recall_at_1: f64,
    pub loss_history: Vec<f64>,
}

fn splitmix64(mut x: u64) -> u64 {
    x = x.wrapping_add(0x9E3779B97F4A7C15);
    let mut z = x;
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58476D1CE4E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D049BB133111EB);
    z ^ (z >> 31)
}

/// Deterministic 80/20 split by index: first 80% train, rest eval.
pub fn split_dataset(dataset: &[LabeledClip]) -> (&[LabeledClip], &[LabeledClip]) {
    let cut = dataset.len() * 4 / 5;
    (&dataset[..cut], &dataset[cut..])
}

/// Trains the encoder with symmetric in-batch InfoNCE and evaluates the
/// retrieval probe on the held-out split.
pub fn train_probe(
    dataset: &[LabeledClip],
    aug: &Augmentation,
    opts: &TrainOptions,
) -> Result<(EncoderParams, ProbeMetrics)> {
    if opts.batch_size < 2 {
        return Err(Error::Precondition(format!(
            "batch_size must be >= 2, got {}",
            opts.batch_size
        )));
    }
    let (train_set, eval_set) = split_dataset(dataset);
    if train_set.len() < 2 || eval_set.is_empty() {
        return Err(Error::Precondition(format!(
            "dataset of {} is too small for an 80/20 split",
            dataset.len()
        )));
    }
    let first = &train_set[0].clip;
    let frames = first.frames();
    if frames < 2 {
        return Err(Error::Precondition(
            "training requires clips with at least two frames".into(),
        ));
    }
    if let Augmentation::Fame(config) = aug {
        config.validate()?;
    }

    let mut params = EncoderParams::init(
        first.channels(),
        frames,
        first.height(),
        first.width(),
        splitmix64(opts.rng_seed),
    );
    let mut rng = ChaCha8Rng::seed_from_u64(opts.rng_seed);
    let mut loss_history = Vec::with_capacity(opts.epochs);
    let mut global_step = 0usize;

    for _epoch in 0..opts.epochs {
        let mut order: Vec<usize> = (0..train_set.len()).collect();
        order.shuffle(&mut rng);

        let mut epoch_loss = 0.0f64;
        let mut epoch_batches = 0usize;
        for batch in order.chunks(opts.batch_size) {
            if batch.len() < 2 {
                continue; // a single clip has no in-batch negatives
            }
            let clips: Vec<_> = batch.iter().map(|&i| train_set[i].clip.clone()).collect();

            let views: Vec<(crate::clip::Clip, crate::clip::Clip)> = match aug {
                Augmentation::Off => clips
                    .iter()
                    .map(|clip| {
                        let first = rng.random_range(0..frames);
                        let mut second = rng.random_range(0..frames - 1);
                        if second >= first {
                            second += 1;
                        }
                        (clip.temporal_shift(first), clip.temporal_shift(second))
                    })
                    .collect(),
                Augmentation::Fame(config) => {
                    let step_config = AugmentConfig {
                        rng_seed: splitmix64(
                            config.rng_seed ^ (global_step as u64).wrapping_mul(0x9E37_79B9),
                        ),
                        ..config.clone()
                    };
                    fame_augment_batch(&clips, &step_config)?
                }
            };

            let step_loss = descend_on_views(&mut params, &views, opts)?;
            if !step_loss.is_finite() {
                return Err(Error::Diverged { step: global_step });
            }
            epoch_loss += step_loss;
            epoch_batches += 1;
            global_step += 1;
        }
        loss_history.push(epoch_loss / epoch_batches as f64);
    }

    let mut metrics = evaluate_retrieval(&params, eval_set, train_set, 1)?;
    metrics.loss_history = loss_history;
    Ok((params, metrics))
}

/// One encode-loss-backprop-update cycle over a batch of view pairs.
/// Returns the mean loss across the `2·N` queries.
fn descend_on_views(
    params: &mut EncoderParams,
    views: &[(crate::clip::Clip, crate::clip::Clip)],
    opts: &TrainOptions,
) -> Result<f64> {
    let n = views.len();
    let mut caches = Vec::with_capacity(2 * n);
    for (a, b) in views {
        caches.push(params.forward(a)?);
        caches.push(params.forward(b)?);
    }
    let embeddings: Vec<&[f64]> = caches.iter().map(|c| c.embedding.as_slice()).collect();

    // d_loss/d_embedding buffers, then symmetric InfoNCE: query index 2i+v,
    // positive 2i+(1−v), negatives both views of every other video.
    let mut d_embeddings = vec![vec![0.0f64; embeddings[0].len()]; 2 * n];
    let mut total_loss = 0.0f64;
    let query_weight = 1.0 / (2 * n) as f64;
    for video in 0..n {
        for view in 0..2 {
            let q_idx = 2 * video + view;
            let p_idx = 2 * video + (1 - view);
            let negatives: Vec<&[f64]> = (0..n)
                .filter(|&other| other != video)
                .flat_map(|other| [embeddings[2 * other], embeddings[2 * other + 1]])
                .collect();
            let positives = [embeddings[p_idx]];
            total_loss +=
                info_nce(embeddings[q_idx], &positives, &negatives, opts.temperature)?;
            let grad =
                info_nce_grad(embeddings[q_idx], &positives, &negatives, opts.temperature)?;

            for (acc, g) in d_embeddings[q_idx].iter_mut().zip(&grad.d_query) {
                *acc += query_weight * g;
            }
            for (acc, g) in d_embeddings[p_idx].iter_mut().zip(&grad.d_positives[0]) {
                *acc += query_weight * g;
            }
            let mut neg_iter = grad.d_negatives.iter();
            for other in (0..n).filter(|&other| other != video) {
                for k_idx in [2 * other, 2 * other + 1] {
                    let g = neg_iter.next().expect("one gradient per negative");
                    for (acc, gv) in d_embeddings[k_idx].iter_mut().zip(g) {
                        *acc += query_weight * gv;
                    }
                }
            }
        }
    }

    let mut grads = EncoderGrads::zeros_like(params);
    for (cache, d_embedding) in caches.iter().zip(&d_embeddings) {
        params.backward(cache, d_embedding, &mut grads);
    }
    params.step(&grads, opts.learning_rate);
    Ok(total_loss * query_weight)
}

/// Nearest-neighbor hit rates over plain (unaugmented) embeddings, for both
/// label kinds. Ties in similarity break by ascending train index.
pub fn evaluate_retrieval(
    params: &EncoderParams,
    eval_set: &[LabeledClip],
    train_set: &[LabeledClip],
    k: usize,
) -> Result<ProbeMetrics> {
    if eval_set.is_empty() || train_set.is_empty() {
        return Err(Error::Precondition(
            "retrieval needs non-empty eval and train sets".into(),
        ));
    }
    let train_embeddings: Vec<Vec<f64>> = train_set
        .iter()
        .map(|l| params.encode(&l.clip))
        .collect::<Result<_>>()?;
    let eval_embeddings: Vec<Vec<f64>> = eval_set
        .iter()
        .map(|l| params.encode(&l.clip))
        .collect::<Result<_>>()?;

    let train_motion: Vec<usize> = train_set.iter().map(|l| l.motion_label).collect();
    let train_background: Vec<usize> = train_set.iter().map(|l| l.background_label).collect();
    let eval_motion: Vec<usize> = eval_set.iter().map(|l| l.motion_label).collect();
    let eval_background: Vec<usize> = eval_set.iter().map(|l| l.background_label).collect();

    let (motion_recall, background_recall) = retrieval_recalls(
        &eval_embeddings,
        &eval_motion,
        &eval_background,
        &train_embeddings,
        &train_motion,
        &train_background,
        k,
    )?;
    Ok(ProbeMetrics {
        motion_recall_at_1: motion_recall,
        background_recall_at_1: background_recall,
        loss_history: Vec::new(),
    })
}

/// Recall@k on raw embeddings: a query scores a hit when any of its k
/// nearest train embeddings (cosine similarity, ties by ascending index)
/// carries the same label.
#[allow(clippy::too_many_arguments)]
pub fn retrieval_recalls(
    eval_embeddings: &[Vec<f64>],
    eval_motion: &[usize],
    eval_background: &[usize],
    train_embeddings: &[Vec<f64>],
    train_motion: &[usize],
    train_background: &[usize],
    k: usize,
) -> Result<(f64, f64)> {
    if k == 0 {
        return Err(Error::Precondition("k must be >= 1".into()));
    }
    let k = k.min(train_embeddings.len());
    let mut motion_hits = 0usize;
    let mut background_hits = 0usize;
    for (qi, query) in eval_embeddings.iter().enumerate() {
        let sims: Vec<f64> = train_embeddings
            .iter()
            .map(|t| cosine_sim(query, t))
            .collect::<Result<_>>()?;
        let mut order: Vec<usize> = (0..sims.len()).collect();
        order.sort_unstable_by(|&a, &b| sims[b].total_cmp(&sims[a]).then(a.cmp(&b)));
        let neighbors = &order[..k];
        if neighbors.iter().any(|&t| train_motion[t] == eval_motion[qi]) {
            motion_hits += 1;
        }
        if neighbors
            .iter()
            .any(|&t| train_background[t] == eval_background[qi])
        {
            background_hits += 1;
        }
    }
    let denom = eval_embeddings.len() as f64;
    Ok((motion_hits as f64 / denom, background_hits as f64 / denom))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::synth::{generate_synthetic, SynthConfig};

    fn tiny_dataset() -> Vec<LabeledClip> {
        generate_synthetic(&SynthConfig {
            num_videos: 20,
            height: 16,
            width: 16,
            object_size: 5,
            frames: 4,
            rng_seed: 3,
            ..SynthConfig::default()
        })
        .unwrap()
    }

    fn tiny_opts() -> TrainOptions {
        TrainOptions {
            epochs: 2,
            batch_size: 8,
            learning_rate: 0.05,
            temperature: 0.1,
            rng_seed: 5,
        }
    }

    #[test]
    fn zero_learning_rate_leaves_params_at_init() {
        let dataset = tiny_dataset();
        let opts = TrainOptions {
            learning_rate: 0.0,
            ..tiny_opts()
        };
        let (params, _) = train_probe(&dataset, &Augmentation::Off, &opts).unwrap();
        let clip = &dataset[0].clip;
        let fresh = EncoderParams::init(
            clip.channels(),
            clip.frames(),
            clip.height(),
            clip.width(),
            splitmix64(opts.rng_seed),
        );
        assert_eq!(params.values(), fresh.values());
    }

    #[test]
    fn training_reduces_the_loss() {
        let dataset = tiny_dataset();
        let opts = TrainOptions {
            epochs: 6,
            ..tiny_opts()
        };
        let (_, metrics) = train_probe(&dataset, &Augmentation::Off, &opts).unwrap();
        let first = metrics.loss_history.first().unwrap();
        let last = metrics.loss_history.last().unwrap();
        assert!(last < first, "loss went {first} -> {last}");
    }

    #[test]
    fn runs_are_bit_reproducible() {
        let dataset = tiny_dataset();
        let aug = Augmentation::Fame(AugmentConfig {
            rng_seed: 5,
            ..AugmentConfig::default()
        });
        let (params_a, metrics_a) = train_probe(&dataset, &aug, &tiny_opts()).unwrap();
        let (params_b, metrics_b) = train_probe(&dataset, &aug, &tiny_opts()).unwrap();
        assert_eq!(params_a.values(), params_b.values());
        assert_eq!(metrics_a, metrics_b);
    }

    #[test]
    fn batch_size_below_two_is_rejected() {
        let dataset = tiny_dataset();
        let opts = TrainOptions {
            batch_size: 1,
            ..tiny_opts()
        };
        assert!(matches!(
            train_probe(&dataset, &Augmentation::Off, &opts),
            Err(Error::Precondition(_))
        ));
    }

    #[test]
    fn retrieval_with_k_covering_the_train_set_hits_everything() {
        let embeddings: Vec<Vec<f64>> = (0..6)
            .map(|i| {
                let mut v = vec![0.0; 4];
                v[i % 4] = 1.0;
                v
            })
            .collect();
        let labels: Vec<usize> = (0..6).map(|i| i % 3).collect();
        let (motion, background) = retrieval_recalls(
            &embeddings,
            &labels,
            &labels,
            &embeddings,
            &labels,
            &labels,
            100,
        )
        .unwrap();
        assert_eq!(motion, 1.0);
        assert_eq!(background, 1.0);
    }

    #[test]
    fn one_hot_motion_embeddings_recall_perfectly() {
        let labels = vec![0usize, 1, 2, 3, 0, 1, 2, 3];
        let embeddings: Vec<Vec<f64>> = labels
            .iter()
            .map(|&l| {
                let mut v = vec![0.0; 4];
                v[l] = 1.0;
                v
            })
            .collect();
        let background = vec![0usize; 8];
        let (motion, _) = retrieval_recalls(
            &embeddings[..4].to_vec(),
            &labels[..4],
            &background[..4],
            &embeddings[4..].to_vec(),
            &labels[4..],
            &background[4..],
            1,
        )
        .unwrap();
        assert_eq!(motion, 1.0);
    }

    #[test]
    fn random_embeddings_recall_near_chance() {
        use rand::{Rng, SeedableRng};
        let mut hits = 0.0;
        let trials = 20;
        for seed in 0..trials {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            let mut random_unit = || {
                let v: Vec<f64> = (0..16).map(|_| rng.random_range(-1.0..1.0f64)).collect();
                v
            };
            let train: Vec<Vec<f64>> = (0..80).map(|_| random_unit()).collect();
            let eval: Vec<Vec<f64>> = (0..40).map(|_| random_unit()).collect();
            let train_labels: Vec<usize> = (0..80).map(|i| i % 4).collect();
            let eval_labels: Vec<usize> = (0..40).map(|i| i % 4).collect();
            let zeros = vec![0usize; 80];
            let zeros_eval = vec![0usize; 40];
            let (motion, _) = retrieval_recalls(
                &eval,
                &eval_labels,
                &zeros_eval,
                &train,
                &train_labels,
                &zeros,
                1,
            )
            .unwrap();
            hits += motion;
        }
        let mean = hits / trials as f64;
        assert!((mean - 0.25).abs() < 0.1, "mean recall {mean}");
    }

    #[test]
    fn retrieval_is_invariant_to_train_order() {
        let dataset = tiny_dataset();
        let (train, eval) = split_dataset(&dataset);
        let clip = &dataset[0].clip;
        let params = EncoderParams::init(
            clip.channels(),
            clip.frames(),
            clip.height(),
            clip.width(),
            9,
        );
        let forward = evaluate_retrieval(&params, eval, train, 1).unwrap();
        let reversed: Vec<LabeledClip> = train.iter().rev().cloned().collect();
        let backward = evaluate_retrieval(&params, eval, &reversed, 1).unwrap();
        assert_eq!(forward.motion_recall_at_1, backward.motion_recall_at_1);
        assert_eq!(
            forward.background_recall_at_1,
            backward.background_recall_at_1
        );
    }
}
