//! InfoNCE contrastive objective over cosine similarities.
//!
//! `L = −log [ Σ_pos exp(sim(q,k)/τ) / Σ_{pos∪neg} exp(sim(q,k)/τ) ]`,
//! evaluated with max-subtraction. The gradient routine differentiates the
//! exact same expression, including the cosine-normalization Jacobian, so
//! it can be validated against central finite differences.

use crate::error::{Error, Result};

fn norm(v: &[f64]) -> f64 {
    v.iter().map(|x| x * x).sum::<f64>().sqrt()
}

fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

/// Cosine similarity `qᵀk / (‖q‖‖k‖)`, clamped into `[−1, 1]`.
pub fn cosine_sim(q: &[f64], k: &[f64]) -> Result<f64> {
    let (nq, nk) = (norm(q), norm(k));
    if nq == 0.0 || nk == 0.0 {
        return Err(Error::Domain(
            "cosine similarity is undefined for a zero vector".into(),
        ));
    }
    Ok((dot(q, k) / (nq * nk)).clamp(-1.0, 1.0))
}

fn check_inputs(positives: &[&[f64]], temperature: f64) -> Result<()> {
    if temperature <= 0.0 || !temperature.is_finite() {
        return Err(Error::Domain(format!(
            "temperature must be positive, got {temperature}"
        )));
    }
    if positives.is_empty() {
        return Err(Error::Domain("at least one positive key is required".into()));
    }
    Ok(())
}

fn similarity_row(q: &[f64], keys: &[&[f64]]) -> Result<Vec<f64>> {
    keys.iter().map(|k| cosine_sim(q, k)).collect()
}

/// InfoNCE loss for one query. Zero iff there are no negatives.
pub fn info_nce(
    q: &[f64],
    positives: &[&[f64]],
    negatives: &[&[f64]],
    temperature: f64,
) -> Result<f64> {
    check_inputs(positives, temperature)?;
    let pos_sims = similarity_row(q, positives)?;
    let neg_sims = similarity_row(q, negatives)?;

    let max_logit = pos_sims
        .iter()
        .chain(&neg_sims)
        .fold(f64::NEG_INFINITY, |m, &s| m.max(s / temperature));
    let pos_sum: f64 = pos_sims
        .iter()
        .map(|&s| (s / temperature - max_logit).exp())
        .sum();
    let neg_sum: f64 = neg_sims
        .iter()
        .map(|&s| (s / temperature - max_logit).exp())
        .sum();
    Ok((pos_sum + neg_sum).ln() - pos_sum.ln())
}

/// Gradients of [`info_nce`] with respect to the query and every key.
pub struct InfoNceGrad {
    pub d_query: Vec<f64>,
    pub d_positives: Vec<Vec<f64>>,
    pub d_negatives: Vec<Vec<f64>>,
}

pub fn info_nce_grad(
    q: &[f64],
    positives: &[&[f64]],
    negatives: &[&[f64]],
    temperature: f64,
) -> Result<InfoNceGrad> {
    check_inputs(positives, temperature)?;
    let pos_sims = similarity_row(q, positives)?;
    let neg_sims = similarity_row(q, negatives)?;

    let max_logit = pos_sims
        .iter()
        .chain(&neg_sims)
        .fold(f64::NEG_INFINITY, |m, &s| m.max(s / temperature));
    let pos_weights: Vec<f64> = pos_sims
        .iter()
        .map(|&s| (s / temperature - max_logit).exp())
        .collect();
    let neg_weights: Vec<f64> = neg_sims
        .iter()
        .map(|&s| (s / temperature - max_logit).exp())
        .collect();
    let pos_sum: f64 = pos_weights.iter().sum();
    let total_sum: f64 = pos_sum + neg_weights.iter().sum::<f64>();

    // dL/ds_k, then chain through s = cos(q, k)
    let nq = norm(q);
    let q_hat: Vec<f64> = q.iter().map(|v| v / nq).collect();
    let mut d_query = vec![0.0f64; q.len()];
    let mut propagate = |key: &[f64], sim: f64, d_sim: f64| -> Vec<f64> {
        let nk = norm(key);
        let k_hat: Vec<f64> = key.iter().map(|v| v / nk).collect();
        // ∂s/∂q = (k̂ − s·q̂)/‖q‖ ; ∂s/∂k = (q̂ − s·k̂)/‖k‖
        for ((dq, &kh), &qh) in d_query.iter_mut().zip(&k_hat).zip(&q_hat) {
            *dq += d_sim * (kh - sim * qh) / nq;
        }
        k_hat
            .iter()
            .zip(&q_hat)
            .map(|(&kh, &qh)| d_sim * (qh - sim * kh) / nk)
            .collect()
    };

    let d_positives = positives
        .iter()
        .zip(&pos_sims)
        .zip(&pos_weights)
        .map(|((key, &sim), &weight)| {
            let d_sim = (weight / total_sum - weight / pos_sum) / temperature;
            propagate(key, sim, d_sim)
        })
        .collect();
    let d_negatives = negatives
        .iter()
        .zip(&neg_sims)
        .zip(&neg_weights)
        .map(|((key, &sim), &weight)| {
            let d_sim = (weight / total_sum) / temperature;
            propagate(key, sim, d_sim)
        })
        .collect();

    Ok(InfoNceGrad {
        d_query,
        d_positives,
        d_negatives,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn unit(mut v: Vec<f64>) -> Vec<f64> {
        let n = norm(&v);
        for x in &mut v {
            *x /= n;
        }
        v
    }

    #[test]
    fn cosine_of_identical_vectors_is_one() {
        let q = vec![0.3, -0.2, 0.9];
        assert!((cosine_sim(&q, &q).unwrap() - 1.0).abs() < 1e-12);
    }

    #[test]
    fn cosine_of_orthogonal_vectors_is_zero() {
        assert_eq!(cosine_sim(&[1.0, 0.0], &[0.0, 2.0]).unwrap(), 0.0);
    }

    #[test]
    fn cosine_hand_value() {
        let s = cosine_sim(&[1.0, 0.0], &[1.0, 1.0]).unwrap();
        assert!((s - 1.0 / 2.0f64.sqrt()).abs() < 1e-12);
    }

    #[test]
    fn cosine_rejects_zero_vectors() {
        assert!(matches!(
            cosine_sim(&[0.0, 0.0], &[1.0, 0.0]),
            Err(Error::Domain(_))
        ));
    }

    #[test]
    fn info_nce_closed_form() {
        // one positive at sim 1, one negative at sim 0, τ = 1:
        // −log(e / (e + 1)) ≈ 0.31326
        let q = vec![1.0, 0.0];
        let pos = vec![1.0, 0.0];
        let neg = vec![0.0, 1.0];
        let loss = info_nce(&q, &[&pos], &[&neg], 1.0).unwrap();
        assert!((loss - 0.3132616875182228).abs() < 1e-12);
    }

    #[test]
    fn no_negatives_means_zero_loss_and_zero_gradient() {
        let q = vec![0.2, 0.5, -0.1];
        let pos = vec![0.4, 0.4, 0.4];
        assert_eq!(info_nce(&q, &[&pos], &[], 0.1).unwrap(), 0.0);
        let grad = info_nce_grad(&q, &[&pos], &[], 0.1).unwrap();
        assert!(grad.d_query.iter().all(|&g| g.abs() < 1e-15));
        assert!(grad.d_positives[0].iter().all(|&g| g.abs() < 1e-15));
    }

    #[test]
    fn sharper_temperature_lowers_loss_when_positive_dominates() {
        let q = unit(vec![1.0, 0.2, 0.0]);
        let pos = unit(vec![0.9, 0.3, 0.1]);
        let neg1 = unit(vec![-0.2, 0.8, 0.0]);
        let neg2 = unit(vec![0.1, -0.5, 0.7]);
        let wide = info_nce(&q, &[&pos], &[&neg1, &neg2], 1.0).unwrap();
        let sharp = info_nce(&q, &[&pos], &[&neg1, &neg2], 0.1).unwrap();
        assert!(sharp < wide, "sharp={sharp} wide={wide}");
    }

    #[test]
    fn rejects_bad_temperature_and_empty_positives() {
        let q = vec![1.0, 0.0];
        let k = vec![0.5, 0.5];
        assert!(matches!(
            info_nce(&q, &[&k], &[], 0.0),
            Err(Error::Domain(_))
        ));
        assert!(matches!(info_nce(&q, &[], &[&k], 1.0), Err(Error::Domain(_))));
    }

    #[test]
    fn loss_is_invariant_to_common_rescaling() {
        let q = vec![0.3, -0.7, 0.2];
        let pos = vec![0.1, 0.9, 0.3];
        let neg = vec![-0.5, 0.2, 0.8];
        let base = info_nce(&q, &[&pos], &[&neg], 0.2).unwrap();
        let scale = 37.5;
        let qs: Vec<f64> = q.iter().map(|v| v * scale).collect();
        let ps: Vec<f64> = pos.iter().map(|v| v * scale).collect();
        let ns: Vec<f64> = neg.iter().map(|v| v * scale).collect();
        let scaled = info_nce(&qs, &[&ps], &[&ns], 0.2).unwrap();
        assert!((base - scaled).abs() < 1e-12);
    }

    #[test]
    fn duplicate_negative_strictly_increases_loss() {
        let q = unit(vec![1.0, 0.0, 0.0]);
        let pos = unit(vec![0.9, 0.1, 0.0]);
        let neg = unit(vec![0.0, 1.0, 0.0]);
        let single = info_nce(&q, &[&pos], &[&neg], 0.5).unwrap();
        let doubled = info_nce(&q, &[&pos], &[&neg, &neg], 0.5).unwrap();
        assert!(doubled > single);
    }

    fn random_vec(rng: &mut impl Rng, dim: usize) -> Vec<f64> {
        (0..dim).map(|_| rng.random_range(-1.0..1.0)).collect()
    }

    #[test]
    fn gradient_matches_finite_differences() {
        let mut rng = ChaCha8Rng::seed_from_u64(99);
        let dim = 6;
        for _ in 0..5 {
            let q = random_vec(&mut rng, dim);
            let pos: Vec<Vec<f64>> = (0..2).map(|_| random_vec(&mut rng, dim)).collect();
            let neg: Vec<Vec<f64>> = (0..3).map(|_| random_vec(&mut rng, dim)).collect();
            let pos_refs: Vec<&[f64]> = pos.iter().map(|v| v.as_slice()).collect();
            let neg_refs: Vec<&[f64]> = neg.iter().map(|v| v.as_slice()).collect();
            let tau = 0.3;
            let grad = info_nce_grad(&q, &pos_refs, &neg_refs, tau).unwrap();

            let eps = 1e-5;
            let loss_at = |q: &[f64], pos: &[Vec<f64>], neg: &[Vec<f64>]| {
                let p: Vec<&[f64]> = pos.iter().map(|v| v.as_slice()).collect();
                let n: Vec<&[f64]> = neg.iter().map(|v| v.as_slice()).collect();
                info_nce(q, &p, &n, tau).unwrap()
            };
            for d in 0..dim {
                let mut qp = q.clone();
                let mut qm = q.clone();
                qp[d] += eps;
                qm[d] -= eps;
                let fd = (loss_at(&qp, &pos, &neg) - loss_at(&qm, &pos, &neg)) / (2.0 * eps);
                let rel = (grad.d_query[d] - fd).abs() / fd.abs().max(1e-8);
                assert!(rel < 1e-5, "query coord {d}: analytic {} vs fd {fd}", grad.d_query[d]);
            }
            for (ki, key_grad) in grad.d_negatives.iter().enumerate() {
                for d in 0..dim {
                    let mut np = neg.clone();
                    let mut nm = neg.clone();
                    np[ki][d] += eps;
                    nm[ki][d] -= eps;
                    let fd = (loss_at(&q, &pos, &np) - loss_at(&q, &pos, &nm)) / (2.0 * eps);
                    let rel = (key_grad[d] - fd).abs() / fd.abs().max(1e-8);
                    assert!(rel < 1e-5, "negative {ki} coord {d}");
                }
            }
        }
    }

    #[test]
    fn query_gradient_is_orthogonal_to_the_query() {
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        let q = unit(random_vec(&mut rng, 8));
        let pos = unit(random_vec(&mut rng, 8));
        let neg = unit(random_vec(&mut rng, 8));
        let grad = info_nce_grad(&q, &[&pos], &[&neg], 0.1).unwrap();
        let along: f64 = dot(&grad.d_query, &q);
        assert!(along.abs() < 1e-8, "projection residue {along}");
    }
}
