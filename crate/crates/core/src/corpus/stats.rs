//! Corpus characteristics: per-domain document counts, abstract lengths,
//! gold/unique phrase counts, and per-concept counts.
//!
//! "Unique" phrases are counted by case-folded surface string (tokens joined
//! by single spaces, lowercased) within each domain.

use super::{ConceptType, Corpus, Domain};
use serde::{Deserialize, Serialize};
use std::collections::{BTreeMap, BTreeSet};

/// Counts for one domain (or the overall totals).
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct DomainStats {
    pub documents: usize,
    pub tokens: usize,
    /// `tokens / documents`; 0 when the domain is empty.
    pub avg_tokens_per_abstract: f64,
    pub gold_phrases: usize,
    pub unique_phrases: usize,
    /// Indexed by [`ConceptType::index`].
    pub per_concept: [usize; 4],
}

/// Full corpus statistics.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CorpusStats {
    pub per_domain: BTreeMap<Domain, DomainStats>,
    /// Sums over the domain rows (unique phrases included: the overall
    /// figure is additive over domains, not deduplicated across them).
    pub overall: DomainStats,
}

/// Compute corpus statistics.
pub fn corpus_stats(corpus: &Corpus) -> CorpusStats {
    let mut per_domain: BTreeMap<Domain, DomainStats> = BTreeMap::new();
    let mut unique: BTreeMap<Domain, BTreeSet<String>> = BTreeMap::new();

    for doc in &corpus.documents {
        let entry = per_domain.entry(doc.domain).or_default();
        entry.documents += 1;
        entry.tokens += doc.token_count();
        entry.gold_phrases += doc.annotations.len();
        let seen = unique.entry(doc.domain).or_default();
        for ann in &doc.annotations {
            entry.per_concept[ann.concept.index()] += 1;
            let surface = ann.surface(&doc.sentences[ann.sentence]).to_lowercase();
            seen.insert(surface);
        }
    }

    let mut overall = DomainStats::default();
    for (domain, stats) in per_domain.iter_mut() {
        stats.unique_phrases = unique.get(domain).map_or(0, BTreeSet::len);
        stats.avg_tokens_per_abstract = if stats.documents > 0 {
            stats.tokens as f64 / stats.documents as f64
        } else {
            0.0
        };
        overall.documents += stats.documents;
        overall.tokens += stats.tokens;
        overall.gold_phrases += stats.gold_phrases;
        overall.unique_phrases += stats.unique_phrases;
        for c in 0..4 {
            overall.per_concept[c] += stats.per_concept[c];
        }
    }
    overall.avg_tokens_per_abstract = if overall.documents > 0 {
        overall.tokens as f64 / overall.documents as f64
    } else {
        0.0
    };

    CorpusStats {
        per_domain,
        overall,
    }
}

impl CorpusStats {
    /// Total span count for one concept type across domains.
    pub fn concept_total(&self, concept: ConceptType) -> usize {
        self.overall.per_concept[concept.index()]
    }
}
