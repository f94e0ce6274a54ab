//! Exact inference: scoring, forward-backward, marginals, Viterbi.
//!
//! Everything is computed in log space. `-inf` encodes masked transitions
//! and impossible states; log-sum-exp subtracts the running maximum before
//! exponentiating.

use super::{CrfError, CrfWeights, DecodeResult, TransitionMask};
use crate::corpus::bilou::{Tag, TagSequence, TAG_COUNT};
use crate::features::FeatureVector;

const NEG_INF: f64 = f64::NEG_INFINITY;

/// `log(sum(exp(xs)))` with max subtraction; `-inf` for an all-`-inf` input.
pub fn log_sum_exp(xs: &[f64]) -> f64 {
    let max = xs.iter().copied().fold(NEG_INF, f64::max);
    if max == NEG_INF {
        return NEG_INF;
    }
    let sum: f64 = xs.iter().map(|x| (x - max).exp()).sum();
    max + sum.ln()
}

/// Emission score table, `n x TAG_COUNT`, flattened row-major.
pub fn emission_scores(weights: &CrfWeights, features: &[FeatureVector]) -> Vec<f64> {
    let mut em = vec![0.0; features.len() * TAG_COUNT];
    for (i, fv) in features.iter().enumerate() {
        let row = &mut em[i * TAG_COUNT..(i + 1) * TAG_COUNT];
        for &f in &fv.0 {
            let wrow = &weights.emission[f as usize * TAG_COUNT..(f as usize + 1) * TAG_COUNT];
            for t in 0..TAG_COUNT {
                row[t] += wrow[t];
            }
        }
    }
    em
}

fn start_score(weights: &CrfWeights, mask: &TransitionMask, t: usize) -> f64 {
    if mask.start[t] {
        weights.start[t]
    } else {
        NEG_INF
    }
}

fn end_score(weights: &CrfWeights, mask: &TransitionMask, t: usize) -> f64 {
    if mask.end[t] {
        weights.end[t]
    } else {
        NEG_INF
    }
}

fn trans_score(weights: &CrfWeights, mask: &TransitionMask, from: usize, to: usize) -> f64 {
    if mask.allows(from, to) {
        weights.transition[from * TAG_COUNT + to]
    } else {
        NEG_INF
    }
}

/// Unnormalized log score of one tag sequence: sum of start, emission,
/// transition, and end potentials. `-inf` when the sequence uses a masked
/// transition.
pub fn sequence_score(
    weights: &CrfWeights,
    mask: &TransitionMask,
    features: &[FeatureVector],
    tags: &TagSequence,
) -> Result<f64, CrfError> {
    if features.len() != tags.len() {
        return Err(CrfError::LengthMismatch {
            features: features.len(),
            tags: tags.len(),
        });
    }
    let em = emission_scores(weights, features);
    Ok(sequence_score_with_emissions(weights, mask, &em, tags))
}

pub(crate) fn sequence_score_with_emissions(
    weights: &CrfWeights,
    mask: &TransitionMask,
    em: &[f64],
    tags: &TagSequence,
) -> f64 {
    let n = tags.len();
    if n == 0 {
        return 0.0;
    }
    let idx: Vec<usize> = tags.iter().map(|t| t.index()).collect();
    let mut score = start_score(weights, mask, idx[0]) + em[idx[0]];
    for i in 1..n {
        score += trans_score(weights, mask, idx[i - 1], idx[i]);
        score += em[i * TAG_COUNT + idx[i]];
    }
    score + end_score(weights, mask, idx[n - 1])
}

/// Forward recursion. `alpha[i][t]` is the log-sum over all allowed prefixes
/// ending at position `i` with tag `t`, including the emission at `i`.
fn forward(weights: &CrfWeights, mask: &TransitionMask, em: &[f64], n: usize) -> Vec<f64> {
    let mut alpha = vec![NEG_INF; n * TAG_COUNT];
    for t in 0..TAG_COUNT {
        alpha[t] = start_score(weights, mask, t) + em[t];
    }
    let mut terms = [0.0f64; TAG_COUNT];
    for i in 1..n {
        for u in 0..TAG_COUNT {
            for (t, term) in terms.iter_mut().enumerate() {
                *term = alpha[(i - 1) * TAG_COUNT + t] + trans_score(weights, mask, t, u);
            }
            alpha[i * TAG_COUNT + u] = log_sum_exp(&terms) + em[i * TAG_COUNT + u];
        }
    }
    alpha
}

/// Backward recursion. `beta[i][t]` is the log-sum over all allowed
/// completions after position `i` given tag `t` there, excluding the
/// emission at `i` but including the end potential.
fn backward(weights: &CrfWeights, mask: &TransitionMask, em: &[f64], n: usize) -> Vec<f64> {
    let mut beta = vec![NEG_INF; n * TAG_COUNT];
    for t in 0..TAG_COUNT {
        beta[(n - 1) * TAG_COUNT + t] = end_score(weights, mask, t);
    }
    let mut terms = [0.0f64; TAG_COUNT];
    for i in (0..n - 1).rev() {
        for t in 0..TAG_COUNT {
            for (u, term) in terms.iter_mut().enumerate() {
                *term = trans_score(weights, mask, t, u)
                    + em[(i + 1) * TAG_COUNT + u]
                    + beta[(i + 1) * TAG_COUNT + u];
            }
            beta[i * TAG_COUNT + t] = log_sum_exp(&terms);
        }
    }
    beta
}

/// Log of the partition function: log-sum over every allowed tag sequence.
pub fn log_partition(weights: &CrfWeights, mask: &TransitionMask, features: &[FeatureVector]) -> f64 {
    let n = features.len();
    assert!(n >= 1, "log_partition requires at least one token");
    let em = emission_scores(weights, features);
    log_partition_with_emissions(weights, mask, &em, n)
}

pub(crate) fn log_partition_with_emissions(
    weights: &CrfWeights,
    mask: &TransitionMask,
    em: &[f64],
    n: usize,
) -> f64 {
    let alpha = forward(weights, mask, em, n);
    let mut terms = [0.0f64; TAG_COUNT];
    for (t, term) in terms.iter_mut().enumerate() {
        *term = alpha[(n - 1) * TAG_COUNT + t] + end_score(weights, mask, t);
    }
    log_sum_exp(&terms)
}

/// Forward-backward tables shared by marginals and the gradient.
pub(crate) struct ForwardBackward {
    pub alpha: Vec<f64>,
    pub beta: Vec<f64>,
    pub log_z: f64,
}

pub(crate) fn forward_backward(
    weights: &CrfWeights,
    mask: &TransitionMask,
    em: &[f64],
    n: usize,
) -> ForwardBackward {
    let alpha = forward(weights, mask, em, n);
    let beta = backward(weights, mask, em, n);
    let mut terms = [0.0f64; TAG_COUNT];
    for (t, term) in terms.iter_mut().enumerate() {
        *term = alpha[(n - 1) * TAG_COUNT + t] + end_score(weights, mask, t);
    }
    ForwardBackward {
        alpha,
        beta,
        log_z: log_sum_exp(&terms),
    }
}

/// Per-position posterior tag probabilities, `n x TAG_COUNT` row-major.
/// Each row sums to 1.
pub fn posterior_marginals(
    weights: &CrfWeights,
    mask: &TransitionMask,
    features: &[FeatureVector],
) -> Vec<f64> {
    let n = features.len();
    assert!(n >= 1, "posterior_marginals requires at least one token");
    let em = emission_scores(weights, features);
    let fb = forward_backward(weights, mask, &em, n);
    let mut mu = vec![0.0; n * TAG_COUNT];
    for i in 0..n {
        for t in 0..TAG_COUNT {
            let log_m = fb.alpha[i * TAG_COUNT + t] + fb.beta[i * TAG_COUNT + t] - fb.log_z;
            mu[i * TAG_COUNT + t] = log_m.exp();
        }
    }
    mu
}

/// Viterbi decoding with deterministic tie-breaking: among maximizing
/// sequences, the lexicographically smallest tag-index sequence is returned
/// (O sorts first). Implemented with suffix maxima and a forward walk that
/// keeps the lowest-index maximizer at every step.
pub fn viterbi_decode(
    weights: &CrfWeights,
    mask: &TransitionMask,
    features: &[FeatureVector],
) -> DecodeResult {
    let n = features.len();
    assert!(n >= 1, "viterbi_decode requires at least one token");
    let em = emission_scores(weights, features);

    // delta[i][t]: best achievable log score of the suffix starting at i
    // with tag t, including emission at i and the end potential.
    let mut delta = vec![NEG_INF; n * TAG_COUNT];
    for t in 0..TAG_COUNT {
        delta[(n - 1) * TAG_COUNT + t] = em[(n - 1) * TAG_COUNT + t] + end_score(weights, mask, t);
    }
    for i in (0..n - 1).rev() {
        for t in 0..TAG_COUNT {
            let mut best = NEG_INF;
            for u in 0..TAG_COUNT {
                let v = trans_score(weights, mask, t, u) + delta[(i + 1) * TAG_COUNT + u];
                if v > best {
                    best = v;
                }
            }
            delta[i * TAG_COUNT + t] = em[i * TAG_COUNT + t] + best;
        }
    }

    let mut best_score = NEG_INF;
    let mut first = 0usize;
    for t in 0..TAG_COUNT {
        let v = start_score(weights, mask, t) + delta[t];
        if v > best_score {
            best_score = v;
            first = t;
        }
    }

    let mut path = Vec::with_capacity(n);
    path.push(first);
    for i in 1..n {
        let prev = path[i - 1];
        let mut best = NEG_INF;
        let mut pick = 0usize;
        for u in 0..TAG_COUNT {
            let v = trans_score(weights, mask, prev, u) + delta[i * TAG_COUNT + u];
            if v > best {
                best = v;
                pick = u;
            }
        }
        path.push(pick);
    }

    let tags = TagSequence(path.into_iter().map(Tag::from_index).collect());
    let log_z = log_partition_with_emissions(weights, mask, &em, n);
    let log_score = sequence_score_with_emissions(weights, mask, &em, &tags);
    DecodeResult {
        tags,
        log_score,
        log_prob: log_score - log_z,
    }
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
    fn zero_weights_score_zero_on_valid_sequence() {
        let w = CrfWeights::zeros(2);
        let mask = TransitionMask::bilou();
        let tags = TagSequence(vec![Tag::Outside, Tag::Unit(Data), Tag::Outside]);
        let feats = vec![fv(&[0]), fv(&[1]), fv(&[])];
        assert_eq!(sequence_score(&w, &mask, &feats, &tags).unwrap(), 0.0);
    }

    #[test]
    fn masked_transition_scores_neg_inf() {
        let w = CrfWeights::zeros(1);
        let mask = TransitionMask::bilou();
        let tags = TagSequence(vec![Tag::Outside, Tag::Inside(Data)]);
        let feats = vec![fv(&[]), fv(&[])];
        assert_eq!(
            sequence_score(&w, &mask, &feats, &tags).unwrap(),
            f64::NEG_INFINITY
        );
    }

    #[test]
    fn length_mismatch_is_an_error() {
        let w = CrfWeights::zeros(1);
        let mask = TransitionMask::bilou();
        let tags = TagSequence(vec![Tag::Outside]);
        let feats = vec![fv(&[]), fv(&[])];
        assert!(matches!(
            sequence_score(&w, &mask, &feats, &tags),
            Err(CrfError::LengthMismatch { .. })
        ));
    }

    #[test]
    fn single_token_score_is_start_plus_emission_plus_end() {
        let mut w = CrfWeights::zeros(1);
        let u_data = Tag::Unit(Data).index();
        w.start[u_data] = 0.3;
        w.end[u_data] = -0.7;
        w.emission[u_data] = 2.0; // feature 0
        let mask = TransitionMask::bilou();
        let tags = TagSequence(vec![Tag::Unit(Data)]);
        let score = sequence_score(&w, &mask, &[fv(&[0])], &tags).unwrap();
        assert!((score - (0.3 + 2.0 - 0.7)).abs() < 1e-12);
    }

    #[test]
    fn hand_summed_potentials_match() {
        // 2 tokens, 2 features; explicit sum of the four potential kinds.
        let mut w = CrfWeights::zeros(2);
        let o = Tag::Outside.index();
        let b = Tag::Begin(Material).index();
        let l = Tag::Last(Material).index();
        w.start[b] = 0.11;
        w.emission[b] = 1.25; // feature 0 at token 0
        w.emission[TAG_COUNT + b] = -0.5; // feature 1, unused by token 0
        w.emission[TAG_COUNT + l] = 0.75; // feature 1 at token 1
        w.transition[b * TAG_COUNT + l] = 2.0;
        w.end[l] = -0.25;
        w.start[o] = 9.0; // irrelevant to this path
        let mask = TransitionMask::bilou();
        let tags = TagSequence(vec![Tag::Begin(Material), Tag::Last(Material)]);
        let score = sequence_score(&w, &mask, &[fv(&[0]), fv(&[1])], &tags).unwrap();
        let expected = 0.11 + 1.25 + 2.0 + 0.75 - 0.25;
        assert!((score - expected).abs() < 1e-12, "{score} vs {expected}");
    }

    #[test]
    fn uniform_log_partition_is_n_ln_17() {
        let w = CrfWeights::zeros(1);
        let mask = TransitionMask::unconstrained();
        for n in 1..=5 {
            let feats = vec![fv(&[]); n];
            let lz = log_partition(&w, &mask, &feats);
            assert!((lz - n as f64 * 17f64.ln()).abs() < 1e-9, "n={n}: {lz}");
        }
    }

    #[test]
    fn emission_shift_moves_log_partition_by_constant() {
        let mut w = CrfWeights::zeros(2);
        for (i, v) in w.emission.iter_mut().enumerate() {
            *v = (i as f64 * 0.37).sin();
        }
        let mask = TransitionMask::bilou();
        let feats = vec![fv(&[0]), fv(&[1]), fv(&[0, 1])];
        let before = log_partition(&w, &mask, &feats);
        // Feature 1 is active at tokens 1 and 2, so adding c to all of its
        // tag weights shifts every path score, and hence log Z, by exactly 2c.
        let c = 1.7;
        let mut shifted = w.clone();
        for t in 0..TAG_COUNT {
            shifted.emission[TAG_COUNT + t] += c;
        }
        let after = log_partition(&shifted, &mask, &feats);
        assert!((after - (before + 2.0 * c)).abs() < 1e-9);
    }

    #[test]
    fn uniform_marginals_without_constraints() {
        let w = CrfWeights::zeros(1);
        let mask = TransitionMask::unconstrained();
        let feats = vec![fv(&[]); 3];
        let mu = posterior_marginals(&w, &mask, &feats);
        for &p in &mu {
            assert!((p - 1.0 / 17.0).abs() < 1e-12);
        }
    }

    #[test]
    fn marginal_rows_sum_to_one() {
        let mut w = CrfWeights::zeros(3);
        for (i, v) in w.emission.iter_mut().enumerate() {
            *v = ((i * 31 % 17) as f64 - 8.0) * 0.21;
        }
        for (i, v) in w.transition.iter_mut().enumerate() {
            *v = ((i * 13 % 7) as f64 - 3.0) * 0.1;
        }
        let mask = TransitionMask::bilou();
        let feats = vec![fv(&[0, 2]), fv(&[1]), fv(&[0]), fv(&[2, 1])];
        let mu = posterior_marginals(&w, &mask, &feats);
        for i in 0..4 {
            let row: f64 = mu[i * TAG_COUNT..(i + 1) * TAG_COUNT].iter().sum();
            assert!((row - 1.0).abs() < 1e-9, "row {i} sums to {row}");
        }
    }

    #[test]
    fn dominant_emission_dominates_marginal() {
        let mut w = CrfWeights::zeros(1);
        w.emission[Tag::Unit(Process).index()] = 50.0;
        let mask = TransitionMask::bilou();
        let feats = vec![fv(&[0]), fv(&[])];
        let mu = posterior_marginals(&w, &mask, &feats);
        assert!(mu[Tag::Unit(Process).index()] > 0.99);
    }

    #[test]
    fn zero_weights_viterbi_returns_all_outside() {
        let w = CrfWeights::zeros(1);
        for mask in [TransitionMask::bilou(), TransitionMask::unconstrained()] {
            let feats = vec![fv(&[]); 4];
            let res = viterbi_decode(&w, &mask, &feats);
            assert!(res.tags.iter().all(|&t| t == Tag::Outside), "{:?}", res.tags);
            assert_eq!(res.log_score, 0.0);
        }
    }

    #[test]
    fn viterbi_log_prob_is_score_minus_partition() {
        let mut w = CrfWeights::zeros(2);
        for (i, v) in w.emission.iter_mut().enumerate() {
            *v = ((i * 7 % 23) as f64 - 11.0) * 0.17;
        }
        let mask = TransitionMask::bilou();
        let feats = vec![fv(&[0]), fv(&[1]), fv(&[0, 1])];
        let res = viterbi_decode(&w, &mask, &feats);
        let lz = log_partition(&w, &mask, &feats);
        assert!((res.log_prob - (res.log_score - lz)).abs() < 1e-12);
        assert!(res.log_prob <= 0.0);
    }

    #[test]
    fn masked_decoding_is_always_well_formed() {
        // Adversarial weights pushing toward I- tags everywhere.
        let mut w = CrfWeights::zeros(1);
        for c in 0..4 {
            w.emission[5 + c] = 10.0; // I-x block
        }
        let mask = TransitionMask::bilou();
        let feats = vec![fv(&[0]); 5];
        let res = viterbi_decode(&w, &mask, &feats);
        assert!(res.tags.is_well_formed(), "{:?}", res.tags);
    }
}
