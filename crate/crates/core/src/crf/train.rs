//! Maximum-likelihood training.
//!
//! The loss over a batch is `sum_i (log Z_i - score_i(gold)) +
//! lambda/2 * ||w||^2`; its gradient is expected minus observed feature
//! counts plus `lambda * w`, with expectations from forward-backward
//! marginals. Sentences are processed in fixed-size chunks that may run in
//! parallel, but chunk results are reduced in a fixed order so gradients
//! (and therefore whole training runs) are bit-stable for any thread count.

use super::inference::{
    emission_scores, forward_backward, log_partition_with_emissions,
    sequence_score_with_emissions, viterbi_decode,
};
use super::lbfgs::{minimize, LbfgsParams, StopReason};
use super::{CrfError, CrfModel, CrfWeights, TrainConfig, TransitionMask};
use crate::corpus::bilou::{decode_bilou, encode_bilou, Tag, TagSequence, TAG_COUNT};
use crate::corpus::{Document, SpanAnnotation};
use crate::features::{extract_features, ExtractorConfig, FeatureIndex, FeatureVector};
use crate::metrics;
use rayon::prelude::*;
use std::collections::BTreeMap;

/// Sentences per parallel gradient chunk. Fixed so the reduction order (and
/// thus every floating-point sum) is independent of the thread count.
const GRAD_CHUNK: usize = 32;

/// One training sentence: features plus gold tag indices.
#[derive(Debug, Clone)]
pub struct TrainInstance {
    pub features: Vec<FeatureVector>,
    pub tags: Vec<usize>,
}

/// One dev/test document prepared for span evaluation.
#[derive(Debug, Clone)]
pub struct EvalDocument {
    pub id: String,
    pub sentences: Vec<Vec<FeatureVector>>,
    pub gold: Vec<SpanAnnotation>,
}

/// Featurize documents into training instances (gold tags BILOU-encoded).
pub fn prepare_instances(
    docs: &[&Document],
    cfg: &ExtractorConfig,
    index: &FeatureIndex,
) -> Vec<TrainInstance> {
    let mut out = Vec::new();
    for doc in docs {
        for (s, sentence) in doc.sentences.iter().enumerate() {
            let spans = doc.sentence_annotations(s);
            let tags = encode_bilou(sentence.len(), &spans)
                .expect("validated documents have disjoint spans");
            out.push(TrainInstance {
                features: extract_features(sentence, cfg, index),
                tags: tags.iter().map(|t| t.index()).collect(),
            });
        }
    }
    out
}

/// Featurize documents for span-level evaluation.
pub fn prepare_eval_documents(
    docs: &[&Document],
    cfg: &ExtractorConfig,
    index: &FeatureIndex,
) -> Vec<EvalDocument> {
    docs.iter()
        .map(|doc| EvalDocument {
            id: doc.id.clone(),
            sentences: doc
                .sentences
                .iter()
                .map(|s| extract_features(s, cfg, index))
                .collect(),
            gold: {
                let mut g = doc.annotations.clone();
                g.sort();
                g
            },
        })
        .collect()
}

/// Reject gold sequences that use masked transitions (an encoder/mask
/// mismatch would otherwise surface as a `-inf` loss deep in training).
pub fn validate_gold(batch: &[TrainInstance], mask: &TransitionMask) -> Result<(), CrfError> {
    for inst in batch {
        let t = &inst.tags;
        if t.is_empty() {
            continue;
        }
        let bad = |from: Option<usize>, to: usize| CrfError::MaskedGoldTransition {
            from: from.map_or("<start>".to_string(), |f| Tag::from_index(f).to_string()),
            to: Tag::from_index(to).to_string(),
        };
        if !mask.start[t[0]] {
            return Err(bad(None, t[0]));
        }
        for w in t.windows(2) {
            if !mask.allows(w[0], w[1]) {
                return Err(bad(Some(w[0]), w[1]));
            }
        }
        if !mask.end[t[t.len() - 1]] {
            return Err(CrfError::MaskedGoldTransition {
                from: Tag::from_index(t[t.len() - 1]).to_string(),
                to: "<end>".to_string(),
            });
        }
    }
    Ok(())
}

struct ChunkGrad {
    loss: f64,
    grad: Vec<f64>,
}

fn sentence_gradient(
    weights: &CrfWeights,
    mask: &TransitionMask,
    inst: &TrainInstance,
    grad: &mut [f64],
) -> f64 {
    let n = inst.tags.len();
    let em = emission_scores(weights, &inst.features);
    let fb = forward_backward(weights, mask, &em, n);
    let ne = weights.n_features * TAG_COUNT;
    let trans_off = ne;
    let start_off = ne + TAG_COUNT * TAG_COUNT;
    let end_off = start_off + TAG_COUNT;

    // Expected counts from marginals.
    let mut mu = [0.0f64; TAG_COUNT];
    for i in 0..n {
        for t in 0..TAG_COUNT {
            mu[t] = (fb.alpha[i * TAG_COUNT + t] + fb.beta[i * TAG_COUNT + t] - fb.log_z).exp();
        }
        for &f in &inst.features[i].0 {
            let row = f as usize * TAG_COUNT;
            for t in 0..TAG_COUNT {
                grad[row + t] += mu[t];
            }
        }
        if i == 0 {
            for t in 0..TAG_COUNT {
                grad[start_off + t] += mu[t];
            }
        }
        if i == n - 1 {
            for t in 0..TAG_COUNT {
                grad[end_off + t] += mu[t];
            }
        }
    }
    // Pairwise expectations for transitions.
    for i in 0..n - 1 {
        for t in 0..TAG_COUNT {
            let a = fb.alpha[i * TAG_COUNT + t];
            if a == f64::NEG_INFINITY {
                continue;
            }
            for u in 0..TAG_COUNT {
                if !mask.allows(t, u) {
                    continue;
                }
                let log_xi = a
                    + weights.transition[t * TAG_COUNT + u]
                    + em[(i + 1) * TAG_COUNT + u]
                    + fb.beta[(i + 1) * TAG_COUNT + u]
                    - fb.log_z;
                grad[trans_off + t * TAG_COUNT + u] += log_xi.exp();
            }
        }
    }

    // Observed counts.
    for i in 0..n {
        let g = inst.tags[i];
        for &f in &inst.features[i].0 {
            grad[f as usize * TAG_COUNT + g] -= 1.0;
        }
    }
    for w in inst.tags.windows(2) {
        grad[trans_off + w[0] * TAG_COUNT + w[1]] -= 1.0;
    }
    grad[start_off + inst.tags[0]] -= 1.0;
    grad[end_off + inst.tags[n - 1]] -= 1.0;

    let gold = TagSequence(inst.tags.iter().map(|&t| Tag::from_index(t)).collect());
    fb.log_z - sequence_score_with_emissions(weights, mask, &em, &gold)
}

/// Regularized negative log-likelihood and its gradient over a batch.
///
/// The gradient is returned flat (`emission ++ transition ++ start ++ end`).
pub fn nll_and_gradient(
    weights: &CrfWeights,
    mask: &TransitionMask,
    batch: &[TrainInstance],
    l2_lambda: f64,
) -> Result<(f64, Vec<f64>), CrfError> {
    validate_gold(batch, mask)?;
    let flat_len = weights.len();
    let chunks: Vec<ChunkGrad> = batch
        .par_chunks(GRAD_CHUNK)
        .map(|chunk| {
            let mut grad = vec![0.0; flat_len];
            let mut loss = 0.0;
            for inst in chunk {
                loss += sentence_gradient(weights, mask, inst, &mut grad);
            }
            ChunkGrad { loss, grad }
        })
        .collect();

    let mut loss = 0.0;
    let mut grad = vec![0.0; flat_len];
    for c in &chunks {
        loss += c.loss;
        for (g, cg) in grad.iter_mut().zip(&c.grad) {
            *g += cg;
        }
    }

    if l2_lambda != 0.0 {
        let flat = weights.to_flat();
        let mut sq = 0.0;
        for (g, w) in grad.iter_mut().zip(&flat) {
            *g += l2_lambda * w;
            sq += w * w;
        }
        loss += 0.5 * l2_lambda * sq;
    }
    Ok((loss, grad))
}

/// Regularized negative log-likelihood only (cheaper: forward pass, no
/// backward, no gradient). Used by the line search.
pub fn nll(
    weights: &CrfWeights,
    mask: &TransitionMask,
    batch: &[TrainInstance],
    l2_lambda: f64,
) -> Result<f64, CrfError> {
    let losses: Vec<f64> = batch
        .par_chunks(GRAD_CHUNK)
        .map(|chunk| {
            let mut loss = 0.0;
            for inst in chunk {
                let n = inst.tags.len();
                let em = emission_scores(weights, &inst.features);
                let gold =
                    TagSequence(inst.tags.iter().map(|&t| Tag::from_index(t)).collect());
                loss += log_partition_with_emissions(weights, mask, &em, n)
                    - sequence_score_with_emissions(weights, mask, &em, &gold);
            }
            loss
        })
        .collect();
    let mut loss: f64 = losses.iter().sum();
    if l2_lambda != 0.0 {
        let flat = weights.to_flat();
        loss += 0.5 * l2_lambda * flat.iter().map(|w| w * w).sum::<f64>();
    }
    Ok(loss)
}

/// Span micro-F1 of a weight vector on prepared eval documents.
pub fn eval_span_f1(
    weights: &CrfWeights,
    mask: &TransitionMask,
    docs: &[EvalDocument],
) -> f64 {
    let mut gold: BTreeMap<String, Vec<SpanAnnotation>> = BTreeMap::new();
    let mut pred: BTreeMap<String, Vec<SpanAnnotation>> = BTreeMap::new();
    let decoded: Vec<(String, Vec<SpanAnnotation>)> = docs
        .par_iter()
        .map(|doc| {
            let mut spans = Vec::new();
            for (s, feats) in doc.sentences.iter().enumerate() {
                if feats.is_empty() {
                    continue;
                }
                let res = viterbi_decode(weights, mask, feats);
                spans.extend(decode_bilou(&res.tags, s));
            }
            (doc.id.clone(), spans)
        })
        .collect();
    for (doc, spans) in decoded {
        pred.insert(doc, spans);
    }
    for doc in docs {
        gold.insert(doc.id.clone(), doc.gold.clone());
    }
    metrics::span_f1(&gold, &pred)
        .map(|r| r.overall.f1)
        .unwrap_or(0.0)
}

/// Outcome bookkeeping from one training run.
#[derive(Debug, Clone)]
pub struct TrainReport {
    pub epochs_run: usize,
    pub final_loss: f64,
    pub stop: StopReason,
    /// Dev span-F1 after every epoch (index 0 = initial weights). Empty
    /// when no dev documents were supplied.
    pub dev_f1_trajectory: Vec<f64>,
    /// Epoch whose weights were returned.
    pub best_epoch: usize,
}

/// Train a CRF: full-batch L-BFGS on the regularized NLL, returning the
/// weights with the best dev span-F1 seen (final weights when `dev` is
/// empty). Deterministic given identical inputs and config.
pub fn train(
    train: &[TrainInstance],
    dev: &[EvalDocument],
    index: FeatureIndex,
    extractor: ExtractorConfig,
    mask: TransitionMask,
    config: &TrainConfig,
) -> Result<(CrfModel, TrainReport), CrfError> {
    if train.is_empty() {
        return Err(CrfError::EmptyTrainingSet);
    }
    validate_gold(train, &mask)?;

    let n_features = index.len();
    let x0 = CrfWeights::zeros(n_features).to_flat();
    let params = LbfgsParams {
        memory: config.lbfgs_memory,
        tolerance: config.tolerance,
        max_epochs: config.max_epochs,
        ..LbfgsParams::default()
    };

    let mut best: Option<(f64, usize, Vec<f64>)> = None;
    let mut trajectory = Vec::new();
    let mut epochs_run = 0usize;

    let (x, final_loss, stop) = {
        let mask_ref = &mask;
        minimize(
            x0,
            &params,
            |flat| {
                let w = CrfWeights::from_flat(n_features, flat);
                nll_and_gradient(&w, mask_ref, train, config.l2_lambda)
            },
            |flat| {
                let w = CrfWeights::from_flat(n_features, flat);
                nll(&w, mask_ref, train, config.l2_lambda)
            },
            |epoch, flat, _loss| {
                epochs_run = epoch;
                if dev.is_empty() {
                    return;
                }
                let w = CrfWeights::from_flat(n_features, flat);
                let f1 = eval_span_f1(&w, mask_ref, dev);
                trajectory.push(f1);
                let improved = match &best {
                    None => true,
                    Some((b, _, _)) => f1 > *b,
                };
                if improved {
                    best = Some((f1, epoch, flat.to_vec()));
                }
            },
        )?
    };

    let (best_epoch, flat) = match best {
        Some((_, epoch, snapshot)) => (epoch, snapshot),
        None => (epochs_run, x),
    };
    let weights = CrfWeights::from_flat(n_features, &flat);
    if !weights.all_finite() {
        return Err(CrfError::NonFinite {
            value: f64::NAN,
            epoch: best_epoch,
        });
    }
    let config_hash = crate::rng::sha256_hex(
        &serde_json::to_vec(config).expect("config serialization cannot fail"),
    );
    let model = CrfModel {
        feature_index: index,
        extractor,
        weights,
        mask,
        config_hash,
    };
    let report = TrainReport {
        epochs_run,
        final_loss,
        stop,
        dev_f1_trajectory: trajectory,
        best_epoch,
    };
    Ok((model, report))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::corpus::bilou::Tag;
    use crate::corpus::ConceptType::*;

    fn fv(ids: &[u32]) -> FeatureVector {
        FeatureVector(ids.to_vec())
    }

    #[test]
    fn zero_weights_single_token_loss_is_ln_17() {
        let w = CrfWeights::zeros(1);
        let mask = TransitionMask::unconstrained();
        let batch = vec![TrainInstance {
            features: vec![fv(&[0])],
            tags: vec![Tag::Outside.index()],
        }];
        let (loss, _) = nll_and_gradient(&w, &mask, &batch, 0.0).unwrap();
        assert!((loss - 17f64.ln()).abs() < 1e-12, "{loss}");
    }

    #[test]
    fn l2_gradient_at_zero_weights_is_zero_without_data_signal() {
        // A single-token instance with no active features and a symmetric
        // model: the data gradient on emissions is zero, so with w = 0 the
        // full gradient on emission coordinates is exactly lambda * 0 = 0.
        let w = CrfWeights::zeros(2);
        let mask = TransitionMask::unconstrained();
        let batch = vec![TrainInstance {
            features: vec![fv(&[])],
            tags: vec![Tag::Outside.index()],
        }];
        let (_, grad) = nll_and_gradient(&w, &mask, &batch, 5.0).unwrap();
        for g in &grad[..2 * TAG_COUNT] {
            assert_eq!(*g, 0.0);
        }
    }

    #[test]
    fn gold_masked_transition_is_an_error() {
        let w = CrfWeights::zeros(1);
        let mask = TransitionMask::bilou();
        let batch = vec![TrainInstance {
            features: vec![fv(&[0]), fv(&[0])],
            tags: vec![Tag::Outside.index(), Tag::Inside(Data).index()],
        }];
        let err = nll_and_gradient(&w, &mask, &batch, 0.0).unwrap_err();
        assert!(matches!(err, CrfError::MaskedGoldTransition { .. }), "{err}");
    }

    #[test]
    fn nll_matches_gradient_path_loss() {
        let mut w = CrfWeights::zeros(3);
        for (i, v) in w.emission.iter_mut().enumerate() {
            *v = ((i % 11) as f64 - 5.0) * 0.13;
        }
        let mask = TransitionMask::bilou();
        let batch = vec![
            TrainInstance {
                features: vec![fv(&[0, 1]), fv(&[2]), fv(&[1])],
                tags: vec![
                    Tag::Outside.index(),
                    Tag::Unit(Material).index(),
                    Tag::Outside.index(),
                ],
            },
            TrainInstance {
                features: vec![fv(&[2])],
                tags: vec![Tag::Unit(Process).index()],
            },
        ];
        let (full, _) = nll_and_gradient(&w, &mask, &batch, 0.7).unwrap();
        let only = nll(&w, &mask, &batch, 0.7).unwrap();
        assert!((full - only).abs() < 1e-10);
    }

    #[test]
    fn empty_training_set_is_an_error() {
        let err = train(
            &[],
            &[],
            FeatureIndex::from_names(vec![]),
            ExtractorConfig::default(),
            TransitionMask::bilou(),
            &TrainConfig::default(),
        )
        .unwrap_err();
        assert!(matches!(err, CrfError::EmptyTrainingSet));
    }

    #[test]
    fn huge_lambda_collapses_to_prior_path() {
        // With lambda so large that weights are crushed toward 0, scores on
        // neutral input tie and the prior path wins: all O (smallest tag
        // index under the tie rule).
        let batch = vec![TrainInstance {
            features: vec![fv(&[0]), fv(&[1])],
            tags: vec![Tag::Unit(Data).index(), Tag::Outside.index()],
        }];
        let config = TrainConfig {
            l2_lambda: 1e6,
            max_epochs: 50,
            ..TrainConfig::default()
        };
        let (model, _) = train(
            &batch,
            &[],
            FeatureIndex::from_names(vec!["a".into(), "b".into()]),
            ExtractorConfig::default(),
            TransitionMask::bilou(),
            &config,
        )
        .unwrap();
        let max_w = model
            .weights
            .to_flat()
            .iter()
            .map(|w| w.abs())
            .fold(0.0, f64::max);
        assert!(max_w < 1e-3, "weights should be crushed, max {max_w}");
        // Every path score has collapsed toward the zero-weight limit, where
        // the tie rule yields the all-O prior path.
        let res = viterbi_decode(&model.weights, &model.mask, &[fv(&[0]), fv(&[1])]);
        assert!(res.log_score.abs() < 1e-2, "{}", res.log_score);
        let limit = viterbi_decode(
            &CrfWeights::zeros(2),
            &model.mask,
            &[fv(&[0]), fv(&[1])],
        );
        assert!(limit.tags.iter().all(|&t| t == Tag::Outside));
    }
}
