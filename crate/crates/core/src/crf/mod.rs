//! Linear-chain conditional random field over the 17 BILOU tags.
//!
//! Potentials are sums of sparse-feature emission weights and adjacent-tag
//! transition weights (plus start/end vectors). All inference runs in
//! log-space with log-sum-exp stabilization — exact forward-backward for the
//! partition function and marginals, Viterbi for decoding — and training is
//! full-batch maximum likelihood with L2 regularization driven by L-BFGS.
//!
//! BILOU-invalid transitions are hard-masked at both training and decoding
//! time, so raw decoder output is always a well-formed tag sequence.

pub mod inference;
pub mod io;
mod lbfgs;
pub mod train;

pub use lbfgs::{LbfgsParams, StopReason};

use crate::corpus::bilou::{self, Tag, TagSequence, TAG_COUNT};
use crate::features::{ExtractorConfig, FeatureIndex, FeatureVector};
use serde::{Deserialize, Serialize};

/// Errors from CRF inference and training.
#[derive(Debug, thiserror::Error)]
pub enum CrfError {
    #[error("feature sequence has length {features} but tag sequence has length {tags}")]
    LengthMismatch { features: usize, tags: usize },
    #[error("gold sequence uses masked transition {from} -> {to}; the encoder and mask disagree")]
    MaskedGoldTransition { from: String, to: String },
    #[error("non-finite loss ({value}) at epoch {epoch}; aborting training")]
    NonFinite { value: f64, epoch: usize },
    #[error("training set is empty")]
    EmptyTrainingSet,
}

/// Allowed-transition mask: pairwise, plus start and end vectors.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct TransitionMask {
    /// `pair[from * TAG_COUNT + to]`.
    pub pair: Vec<bool>,
    pub start: Vec<bool>,
    pub end: Vec<bool>,
}

impl TransitionMask {
    /// The BILOU grammar mask: forbids exactly the invalid transitions
    /// (`O -> I-X`, `B-X -> B-Y`, `I-X -> U-Y`, ...), invalid starts
    /// (`I`/`L`) and invalid ends (`B`/`I`).
    pub fn bilou() -> TransitionMask {
        let mut mask = TransitionMask {
            pair: vec![false; TAG_COUNT * TAG_COUNT],
            start: vec![false; TAG_COUNT],
            end: vec![false; TAG_COUNT],
        };
        for from in Tag::all() {
            mask.start[from.index()] = bilou::valid_transition(None, from);
            mask.end[from.index()] = bilou::valid_end(from);
            for to in Tag::all() {
                mask.pair[from.index() * TAG_COUNT + to.index()] =
                    bilou::valid_transition(Some(from), to);
            }
        }
        mask
    }

    /// No constraints at all (every sequence allowed).
    pub fn unconstrained() -> TransitionMask {
        TransitionMask {
            pair: vec![true; TAG_COUNT * TAG_COUNT],
            start: vec![true; TAG_COUNT],
            end: vec![true; TAG_COUNT],
        }
    }

    #[inline]
    pub fn allows(&self, from: usize, to: usize) -> bool {
        self.pair[from * TAG_COUNT + to]
    }
}

/// Weight tables of a linear-chain CRF.
///
/// Emission weights are laid out `[feature_id * TAG_COUNT + tag]`; the flat
/// parameter vector used by the optimizer is `emission ++ transition ++
/// start ++ end`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CrfWeights {
    pub n_features: usize,
    pub emission: Vec<f64>,
    pub transition: Vec<f64>,
    pub start: Vec<f64>,
    pub end: Vec<f64>,
}

impl CrfWeights {
    pub fn zeros(n_features: usize) -> CrfWeights {
        CrfWeights {
            n_features,
            emission: vec![0.0; n_features * TAG_COUNT],
            transition: vec![0.0; TAG_COUNT * TAG_COUNT],
            start: vec![0.0; TAG_COUNT],
            end: vec![0.0; TAG_COUNT],
        }
    }

    /// Total parameter count.
    pub fn len(&self) -> usize {
        self.emission.len() + self.transition.len() + self.start.len() + self.end.len()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn to_flat(&self) -> Vec<f64> {
        let mut flat = Vec::with_capacity(self.len());
        flat.extend_from_slice(&self.emission);
        flat.extend_from_slice(&self.transition);
        flat.extend_from_slice(&self.start);
        flat.extend_from_slice(&self.end);
        flat
    }

    pub fn from_flat(n_features: usize, flat: &[f64]) -> CrfWeights {
        let ne = n_features * TAG_COUNT;
        let nt = TAG_COUNT * TAG_COUNT;
        assert_eq!(flat.len(), ne + nt + 2 * TAG_COUNT, "flat vector size");
        CrfWeights {
            n_features,
            emission: flat[..ne].to_vec(),
            transition: flat[ne..ne + nt].to_vec(),
            start: flat[ne + nt..ne + nt + TAG_COUNT].to_vec(),
            end: flat[ne + nt + TAG_COUNT..].to_vec(),
        }
    }

    pub fn all_finite(&self) -> bool {
        self.emission.iter().all(|w| w.is_finite())
            && self.transition.iter().all(|w| w.is_finite())
            && self.start.iter().all(|w| w.is_finite())
            && self.end.iter().all(|w| w.is_finite())
    }
}

/// Training hyperparameters.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrainConfig {
    /// L2 strength; the penalty is `l2_lambda/2 * ||w||^2` on the batch loss.
    pub l2_lambda: f64,
    /// Maximum optimizer epochs (full-batch L-BFGS iterations).
    pub max_epochs: usize,
    /// Gradient-norm stopping tolerance: stop when
    /// `||g||_2 <= tolerance * max(1, ||w||_2)`.
    pub tolerance: f64,
    /// L-BFGS history length.
    pub lbfgs_memory: usize,
    pub seed: u64,
}

impl Default for TrainConfig {
    fn default() -> TrainConfig {
        TrainConfig {
            l2_lambda: 1.0,
            max_epochs: 300,
            tolerance: 1e-5,
            lbfgs_memory: 7,
            seed: 42,
        }
    }
}

/// Result of decoding one sentence.
#[derive(Debug, Clone, PartialEq)]
pub struct DecodeResult {
    pub tags: TagSequence,
    /// Unnormalized path score of the returned sequence.
    pub log_score: f64,
    /// `log_score - log_partition`, always <= 0.
    pub log_prob: f64,
}

/// A trained model: weights plus everything needed to featurize new text.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CrfModel {
    pub feature_index: FeatureIndex,
    pub extractor: ExtractorConfig,
    pub weights: CrfWeights,
    pub mask: TransitionMask,
    /// SHA-256 of the training configuration (canonical JSON).
    pub config_hash: String,
}

impl CrfModel {
    /// Featurize and decode one sentence.
    pub fn tag_sentence(&self, sentence: &crate::corpus::Sentence) -> DecodeResult {
        let feats = crate::features::extract_features(sentence, &self.extractor, &self.feature_index);
        self.decode_features(&feats)
    }

    /// Decode pre-extracted features.
    pub fn decode_features(&self, features: &[FeatureVector]) -> DecodeResult {
        inference::viterbi_decode(&self.weights, &self.mask, features)
    }

    /// Version fingerprint over weights and feature index, used to stamp
    /// silver records and detect file corruption.
    pub fn fingerprint(&self) -> String {
        let bytes = serde_json::to_vec(self).expect("model serialization cannot fail");
        crate::rng::sha256_hex(&bytes)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::corpus::ConceptType::*;

    #[test]
    fn bilou_mask_matches_grammar_examples() {
        let m = TransitionMask::bilou();
        let idx = |t: Tag| t.index();
        // Forbidden.
        assert!(!m.allows(idx(Tag::Outside), idx(Tag::Inside(Data))));
        assert!(!m.allows(idx(Tag::Begin(Data)), idx(Tag::Begin(Material))));
        assert!(!m.allows(idx(Tag::Inside(Data)), idx(Tag::Unit(Material))));
        assert!(!m.allows(idx(Tag::Begin(Data)), idx(Tag::Outside)));
        // Allowed.
        assert!(m.allows(idx(Tag::Outside), idx(Tag::Begin(Data))));
        assert!(m.allows(idx(Tag::Begin(Data)), idx(Tag::Inside(Data))));
        assert!(m.allows(idx(Tag::Inside(Data)), idx(Tag::Last(Data))));
        assert!(m.allows(idx(Tag::Unit(Data)), idx(Tag::Unit(Process))));
        // Start/end vectors.
        assert!(m.start[idx(Tag::Outside)]);
        assert!(m.start[idx(Tag::Begin(Data))]);
        assert!(!m.start[idx(Tag::Inside(Data))]);
        assert!(!m.start[idx(Tag::Last(Data))]);
        assert!(m.end[idx(Tag::Last(Data))]);
        assert!(!m.end[idx(Tag::Begin(Data))]);
    }

    #[test]
    fn flat_round_trip() {
        let mut w = CrfWeights::zeros(3);
        w.emission[5] = 1.5;
        w.transition[17] = -2.0;
        w.start[0] = 0.25;
        w.end[16] = -0.5;
        let flat = w.to_flat();
        assert_eq!(flat.len(), 3 * 17 + 17 * 17 + 34);
        assert_eq!(CrfWeights::from_flat(3, &flat), w);
    }
}
