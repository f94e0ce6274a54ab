//! Cross-validation fold planning.
//!
//! Folds are stratified by domain: each fold draws the configured number of
//! train/dev/test documents *per domain*, test assignments rotate so no two
//! folds test on the same documents, and the whole plan is a pure function
//! of the corpus, the split, and the seed.

use super::{Corpus, CorpusError, Domain};
use crate::rng::substream;
use rand::seq::SliceRandom;
use serde::{Deserialize, Serialize};
use std::collections::BTreeMap;

/// One fold: disjoint document-id sets.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Fold {
    pub train: Vec<String>,
    pub dev: Vec<String>,
    pub test: Vec<String>,
}

/// A complete fold plan.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct FoldPlan {
    pub k: usize,
    /// Per-domain (train, dev, test) document counts.
    pub split: (usize, usize, usize),
    pub seed: u64,
    pub folds: Vec<Fold>,
}

/// Plan `k` folds with the given per-domain split.
///
/// Document ids are shuffled once per domain (sub-stream `folds:<domain>` of
/// `seed`), then each fold takes a rotated window: fold `f` tests on
/// positions `f*test..f*test+test` (mod n), takes the next `dev` positions
/// as dev and the next `train` as train. Identical inputs give identical
/// plans.
pub fn make_folds(
    corpus: &Corpus,
    k: usize,
    split: (usize, usize, usize),
    seed: u64,
) -> Result<FoldPlan, CorpusError> {
    let (n_train, n_dev, n_test) = split;
    let needed = n_train + n_dev + n_test;

    let mut by_domain: BTreeMap<Domain, Vec<String>> = BTreeMap::new();
    for doc in &corpus.documents {
        by_domain.entry(doc.domain).or_default().push(doc.id.clone());
    }
    for (domain, ids) in by_domain.iter_mut() {
        if ids.len() < needed {
            return Err(CorpusError::InsufficientDocuments {
                domain: *domain,
                needed,
                found: ids.len(),
            });
        }
        // Sort before shuffling so the plan does not depend on file order.
        ids.sort();
        let mut rng = substream(seed, &format!("folds:{domain}"));
        ids.shuffle(&mut rng);
    }

    let mut folds = Vec::with_capacity(k);
    for f in 0..k {
        let mut fold = Fold {
            train: Vec::new(),
            dev: Vec::new(),
            test: Vec::new(),
        };
        for ids in by_domain.values() {
            let n = ids.len();
            let mut cursor = (f * n_test) % n;
            let take = |count: usize, cursor: &mut usize| {
                let mut out = Vec::with_capacity(count);
                for _ in 0..count {
                    out.push(ids[*cursor].clone());
                    *cursor = (*cursor + 1) % n;
                }
                out
            };
            fold.test.extend(take(n_test, &mut cursor));
            fold.dev.extend(take(n_dev, &mut cursor));
            fold.train.extend(take(n_train, &mut cursor));
        }
        fold.train.sort();
        fold.dev.sort();
        fold.test.sort();
        folds.push(fold);
    }

    // Rotation can wrap onto an earlier fold's window when k*test exceeds
    // the domain size; refuse such degenerate plans.
    for a in 0..folds.len() {
        for b in a + 1..folds.len() {
            if folds[a].test == folds[b].test {
                return Err(CorpusError::DegenerateFolds { a, b });
            }
        }
    }

    Ok(FoldPlan {
        k,
        split,
        seed,
        folds,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::corpus::{Document, Sentence};
    use std::collections::BTreeSet;

    fn corpus(docs_per_domain: usize) -> Corpus {
        let mut documents = Vec::new();
        for domain in Domain::ALL {
            for i in 0..docs_per_domain {
                documents.push(Document {
                    id: format!("{domain}-{i:02}"),
                    domain,
                    sentences: vec![Sentence::from_words(&["hello", "."])],
                    annotations: vec![],
                });
            }
        }
        Corpus::new(documents).unwrap()
    }

    #[test]
    fn five_fold_8_1_2_on_eleven_docs_per_domain() {
        let c = corpus(11);
        let plan = make_folds(&c, 5, (8, 1, 2), 7).unwrap();
        assert_eq!(plan.folds.len(), 5);
        for fold in &plan.folds {
            assert_eq!(fold.train.len(), 80);
            assert_eq!(fold.dev.len(), 10);
            assert_eq!(fold.test.len(), 20);
            // Disjoint within the fold.
            let all: BTreeSet<&String> = fold
                .train
                .iter()
                .chain(&fold.dev)
                .chain(&fold.test)
                .collect();
            assert_eq!(all.len(), 110);
        }
    }

    #[test]
    fn deterministic_given_seed() {
        let c = corpus(11);
        let a = make_folds(&c, 5, (8, 1, 2), 7).unwrap();
        let b = make_folds(&c, 5, (8, 1, 2), 7).unwrap();
        assert_eq!(a, b);
        let other = make_folds(&c, 5, (8, 1, 2), 8).unwrap();
        assert_ne!(a, other);
    }

    #[test]
    fn test_sets_differ_across_folds() {
        let c = corpus(11);
        let plan = make_folds(&c, 5, (8, 1, 2), 7).unwrap();
        for a in 0..5 {
            for b in a + 1..5 {
                assert_ne!(plan.folds[a].test, plan.folds[b].test);
            }
        }
    }

    #[test]
    fn insufficient_documents_names_the_domain() {
        let c = corpus(10);
        let err = make_folds(&c, 5, (8, 1, 2), 7).unwrap_err();
        match err {
            CorpusError::InsufficientDocuments { needed, found, .. } => {
                assert_eq!((needed, found), (11, 10));
            }
            other => panic!("unexpected error {other}"),
        }
    }

    #[test]
    fn per_domain_counts_match_split() {
        let c = corpus(11);
        let plan = make_folds(&c, 5, (8, 1, 2), 7).unwrap();
        for fold in &plan.folds {
            for domain in Domain::ALL {
                let count = |ids: &[String]| {
                    ids.iter()
                        .filter(|id| id.starts_with(&format!("{domain}-")))
                        .count()
                };
                assert_eq!(count(&fold.train), 8);
                assert_eq!(count(&fold.dev), 1);
                assert_eq!(count(&fold.test), 2);
            }
        }
    }
}
