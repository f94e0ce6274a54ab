//! Deterministic synthetic corpora.
//!
//! Three generators back the test and benchmark harnesses:
//!
//! - [`stm_fixture`] — a 110-abstract stand-in for the annotated STM corpus
//!   (10 domains x 11 abstracts) whose per-domain statistics (average tokens
//!   per abstract, gold and unique phrase counts, per-concept counts) match
//!   the published corpus characteristics exactly. Concept phrases combine a
//!   concept-bearing stem shared across domains with a domain-local tail
//!   token, so a model trained on all domains transfers better than one
//!   trained on a single domain.
//! - [`separable_corpus`] — 1,000 sentences over 10 pseudo-domains with
//!   planted trigger tokens that uniquely determine each span, so a
//!   feature-based tagger can reach near-perfect span F1.
//! - [`planted_difficulty_corpus`] — 1,000 sentences where trigger-vocabulary
//!   size ramps up across domains (in `Domain::ALL` order): early domains
//!   reuse a couple of triggers, late domains spread their spans over dozens
//!   of rare triggers whose surface shape deliberately reveals nothing about
//!   the concept. Identity memorization is the only route to a correct type,
//!   which rewards sampling strategies that chase unseen triggers.

use crate::corpus::{ConceptType, Corpus, Document, Domain, Sentence, SpanAnnotation};
use crate::rng::substream;
use rand::seq::SliceRandom;
use rand::Rng;

const STEMS_PROCESS: [&str; 28] = [
    "growth", "oxidation", "heating", "erosion", "diffusion", "evaporation", "migration",
    "decay", "expansion", "corrosion", "absorption", "flooding", "synthesis", "fission",
    "melting", "cooling", "rotation", "deposition", "infection", "combustion", "fermentation",
    "germination", "radiation", "sedimentation", "adsorption", "ionization", "crystallization",
    "degradation",
];

const STEMS_METHOD: [&str; 28] = [
    "spectroscopy", "chromatography", "microscopy", "simulation", "regression", "titration",
    "assay", "imaging", "sequencing", "modelling", "calorimetry", "diffraction",
    "interferometry", "spectrometry", "tomography", "lithography", "centrifugation",
    "electrolysis", "calibration", "annotation", "clustering", "sampling", "filtration",
    "distillation", "polymerisation", "staining", "benchmarking", "profiling",
];

const STEMS_MATERIAL: [&str; 28] = [
    "soil", "alloy", "graphene", "polymer", "membrane", "catalyst", "electrode", "substrate",
    "sediment", "plasma", "crystal", "ceramic", "composite", "nanotube", "electrolyte",
    "reagent", "enzyme", "protein", "bacteria", "tissue", "mineral", "solvent", "monomer",
    "oxide", "hydrogel", "fibre", "resin", "pigment",
];

const STEMS_DATA: [&str; 28] = [
    "temperature", "pressure", "velocity", "conductivity", "viscosity", "density", "intensity",
    "frequency", "amplitude", "voltage", "entropy", "enthalpy", "luminosity", "salinity",
    "humidity", "porosity", "hardness", "stiffness", "turbidity", "acidity", "resistivity",
    "permeability", "reflectance", "absorbance", "magnitude", "wavelength", "curvature",
    "throughput",
];

const MODIFIERS: [&str; 16] = [
    "thermal", "rapid", "novel", "stable", "uniform", "partial", "anisotropic", "catalytic",
    "aqueous", "porous", "synthetic", "relative", "effective", "localized", "transient",
    "robust",
];

const FILLERS: [&str; 24] = [
    "the", "of", "in", "we", "observed", "that", "during", "under", "with", "measured",
    "results", "show", "a", "study", "for", "this", "and", "between", "after", "samples",
    "analysis", "to", "was", "increased",
];

fn stems(concept: ConceptType) -> &'static [&'static str; 28] {
    match concept {
        ConceptType::Process => &STEMS_PROCESS,
        ConceptType::Method => &STEMS_METHOD,
        ConceptType::Material => &STEMS_MATERIAL,
        ConceptType::Data => &STEMS_DATA,
    }
}

/// Per-domain targets of the shipped fixture, in [`Domain::ALL`] order:
/// (average tokens/abstract, gold phrases, unique phrases, per-concept).
const FIXTURE_TARGETS: [(Domain, usize, usize, usize, [usize; 4]); 10] = [
    (Domain::Agr, 333, 741, 631, [252, 28, 292, 169]),
    (Domain::Ast, 382, 791, 663, [241, 19, 296, 235]),
    (Domain::Bio, 273, 649, 511, [281, 15, 291, 62]),
    (Domain::Che, 217, 483, 444, [149, 27, 188, 119]),
    (Domain::CS, 253, 553, 482, [220, 66, 102, 165]),
    (Domain::ES, 321, 698, 633, [243, 9, 249, 197]),
    (Domain::Eng, 303, 741, 618, [248, 27, 208, 258]),
    (Domain::MS, 282, 574, 493, [178, 27, 231, 138]),
    (Domain::Mat, 140, 297, 287, [56, 7, 51, 183]),
    (Domain::Med, 274, 600, 518, [244, 33, 191, 132]),
];

const DOCS_PER_DOMAIN: usize = 11;

/// Split the unique-phrase budget across concepts, proportional to their
/// span counts (largest-remainder rounding), keeping `1 <= d_c <= n_c`.
fn unique_quota(per_concept: [usize; 4], gold: usize, unique: usize) -> [usize; 4] {
    let mut quota = [0usize; 4];
    let mut fractions: Vec<(usize, f64)> = Vec::with_capacity(4);
    let mut assigned = 0usize;
    for c in 0..4 {
        let exact = per_concept[c] as f64 * unique as f64 / gold as f64;
        quota[c] = exact.floor() as usize;
        assigned += quota[c];
        fractions.push((c, exact - exact.floor()));
    }
    fractions.sort_by(|a, b| b.1.partial_cmp(&a.1).unwrap().then(a.0.cmp(&b.0)));
    let mut remainder = unique - assigned;
    for (c, _) in fractions {
        if remainder == 0 {
            break;
        }
        if quota[c] < per_concept[c] {
            quota[c] += 1;
            remainder -= 1;
        }
    }
    for c in 0..4 {
        assert!(quota[c] >= 1 && quota[c] <= per_concept[c], "quota out of range");
    }
    assert_eq!(quota.iter().sum::<usize>(), unique);
    quota
}

struct PhraseInstance {
    concept: ConceptType,
    tokens: Vec<String>,
}

/// Deterministic 110-abstract fixture reproducing the published per-domain
/// corpus statistics exactly. No randomness: completely counter-based.
pub fn stm_fixture() -> Corpus {
    let mut documents = Vec::with_capacity(100 + 10);
    for (domain, avg_tokens, gold, unique, per_concept) in FIXTURE_TARGETS {
        let token_budget = avg_tokens * DOCS_PER_DOMAIN;
        let quota = unique_quota(per_concept, gold, unique);
        let dom = domain.code().to_lowercase();

        // Distinct phrase inventory, then instances with duplicates cycling
        // through the distinct list so unique counts land exactly on target.
        let mut tail_counter = 0usize;
        let mut per_concept_instances: Vec<Vec<PhraseInstance>> = Vec::with_capacity(4);
        for concept in ConceptType::ALL {
            let c = concept.index();
            let stems = stems(concept);
            let mut distinct: Vec<Vec<String>> = Vec::with_capacity(quota[c]);
            for i in 0..quota[c] {
                let tail = format!("{dom}t{tail_counter:03}");
                tail_counter += 1;
                let stem = stems[i % stems.len()].to_string();
                let tokens = if i % 3 == 2 {
                    vec![MODIFIERS[i % MODIFIERS.len()].to_string(), stem, tail]
                } else {
                    vec![stem, tail]
                };
                distinct.push(tokens);
            }
            let mut instances = Vec::with_capacity(per_concept[c]);
            for j in 0..per_concept[c] {
                instances.push(PhraseInstance {
                    concept,
                    tokens: distinct[j % distinct.len()].clone(),
                });
            }
            per_concept_instances.push(instances);
        }

        // Round-robin interleave so every concept is spread over all docs.
        let mut stream: Vec<PhraseInstance> = Vec::with_capacity(gold);
        let mut cursors = [0usize; 4];
        while stream.len() < gold {
            for c in 0..4 {
                if cursors[c] < per_concept_instances[c].len() {
                    stream.push(PhraseInstance {
                        concept: per_concept_instances[c][cursors[c]].concept,
                        tokens: per_concept_instances[c][cursors[c]].tokens.clone(),
                    });
                    cursors[c] += 1;
                }
            }
        }

        // Sentences of 2-3 phrases each, assigned to docs round-robin.
        let mut doc_sentences: Vec<Vec<Sentence>> = vec![Vec::new(); DOCS_PER_DOMAIN];
        let mut doc_annotations: Vec<Vec<SpanAnnotation>> = vec![Vec::new(); DOCS_PER_DOMAIN];
        let mut used_tokens = 0usize;
        let mut filler_cursor = 0usize;
        let next_filler = |cursor: &mut usize| {
            let f = FILLERS[*cursor % FILLERS.len()];
            *cursor += 1;
            f.to_string()
        };
        let mut sentence_index = 0usize;
        let mut offset = 0usize;
        while offset < stream.len() {
            let take = if sentence_index % 2 == 0 { 2 } else { 3 };
            let group = &stream[offset..(offset + take).min(stream.len())];
            offset += group.len();
            let doc = sentence_index % DOCS_PER_DOMAIN;
            let mut words: Vec<String> = Vec::new();
            let mut spans = Vec::new();
            for phrase in group {
                words.push(next_filler(&mut filler_cursor));
                let start = words.len();
                words.extend(phrase.tokens.iter().cloned());
                spans.push((start, words.len(), phrase.concept));
            }
            words.push(".".to_string());
            used_tokens += words.len();
            let s_idx = doc_sentences[doc].len();
            for (start, end, concept) in spans {
                doc_annotations[doc].push(SpanAnnotation::new(s_idx, start, end, concept));
            }
            doc_sentences[doc].push(Sentence::from_words(&words));
            sentence_index += 1;
        }

        // Pad with filler-only sentences to hit the exact token budget.
        assert!(used_tokens <= token_budget, "{domain}: content exceeds budget");
        let mut remaining = token_budget - used_tokens;
        let mut doc_cursor = 0usize;
        while remaining > 0 {
            let chunk = remaining.min(16);
            let mut words: Vec<String> = Vec::with_capacity(chunk);
            for _ in 0..chunk - 1 {
                words.push(next_filler(&mut filler_cursor));
            }
            words.push(".".to_string());
            let doc = doc_cursor % DOCS_PER_DOMAIN;
            doc_cursor += 1;
            doc_sentences[doc].push(Sentence::from_words(&words));
            remaining -= chunk;
        }

        for k in 0..DOCS_PER_DOMAIN {
            documents.push(Document {
                id: format!("{domain}-{k:02}"),
                domain,
                sentences: std::mem::take(&mut doc_sentences[k]),
                annotations: std::mem::take(&mut doc_annotations[k]),
            });
        }
    }
    Corpus::new(documents).expect("fixture construction is valid")
}

const SENTENCES_PER_DOMAIN: usize = 100;

/// Doc index for the `ds`-th sentence of a domain: 11 docs, the last one
/// taking the extra sentence (10 docs x 9 + 1 doc x 10 = 100).
fn doc_of(ds: usize) -> usize {
    (ds / 9).min(DOCS_PER_DOMAIN - 1)
}

fn concept_prefix(c: ConceptType) -> &'static str {
    match c {
        ConceptType::Process => "proc",
        ConceptType::Method => "meth",
        ConceptType::Material => "matl",
        ConceptType::Data => "data",
    }
}

/// 1,000-sentence corpus where every span is marked by planted trigger
/// tokens that uniquely determine its concept and extent: unit spans use
/// `<c>sigNN`, multi-token spans `<c>begNN [<c>mid] <c>endNN`. Perfectly
/// separable by token identity.
pub fn separable_corpus(seed: u64) -> Corpus {
    let mut rng = substream(seed, "synth:separable");
    let mut documents: Vec<Document> = Vec::new();
    for (d, domain) in Domain::ALL.into_iter().enumerate() {
        let mut sentences: Vec<Vec<Sentence>> = vec![Vec::new(); DOCS_PER_DOMAIN];
        let mut annotations: Vec<Vec<SpanAnnotation>> = vec![Vec::new(); DOCS_PER_DOMAIN];
        for ds in 0..SENTENCES_PER_DOMAIN {
            let doc = doc_of(ds);
            let n_spans = 1 + rng.random_range(0..2);
            let mut words: Vec<String> = Vec::new();
            let mut spans = Vec::new();
            for _ in 0..n_spans {
                for _ in 0..1 + rng.random_range(0..2) {
                    words.push(FILLERS[rng.random_range(0..FILLERS.len())].to_string());
                }
                let concept = ConceptType::from_index(rng.random_range(0..4));
                let p = concept_prefix(concept);
                let start = words.len();
                if rng.random_range(0..10) < 6 {
                    words.push(format!("{p}sig{:02}", rng.random_range(0..12)));
                } else {
                    let j = rng.random_range(0..8);
                    words.push(format!("{p}beg{j:02}"));
                    if rng.random_range(0..2) == 1 {
                        words.push(format!("{p}mid"));
                    }
                    words.push(format!("{p}end{j:02}"));
                }
                spans.push((start, words.len(), concept));
            }
            for _ in 0..1 + rng.random_range(0..2) {
                words.push(FILLERS[rng.random_range(0..FILLERS.len())].to_string());
            }
            words.push(".".to_string());
            let s_idx = sentences[doc].len();
            for (start, end, concept) in spans {
                annotations[doc].push(SpanAnnotation::new(s_idx, start, end, concept));
            }
            sentences[doc].push(Sentence::from_words(&words));
        }
        for k in 0..DOCS_PER_DOMAIN {
            documents.push(Document {
                id: format!("syn{d}-{}-{k:02}", domain.code().to_lowercase()),
                domain,
                sentences: std::mem::take(&mut sentences[k]),
                annotations: std::mem::take(&mut annotations[k]),
            });
        }
    }
    Corpus::new(documents).expect("separable corpus is valid")
}

/// Trigger vocabulary size per concept for difficulty rank `d` (0..10).
fn planted_vocab(d: usize) -> usize {
    2 + 6 * d
}

/// 1,000-sentence corpus with planted per-domain difficulty for
/// active-learning experiments. Every span is a single trigger token
/// `<dom>tNN`; the trigger-to-concept map is a seeded shuffle, so the
/// surface form carries no type signal and rare triggers (late domains in
/// `Domain::ALL` order, vocabulary ramp 2..56 per concept) must be seen
/// labelled to be tagged correctly.
pub fn planted_difficulty_corpus(seed: u64) -> Corpus {
    let mut documents: Vec<Document> = Vec::new();
    for (d, domain) in Domain::ALL.into_iter().enumerate() {
        let mut rng = substream(seed, &format!("synth:planted:{domain}"));
        let v = planted_vocab(d);
        // Balanced trigger -> concept assignment, shuffled so digits in the
        // trigger name are uncorrelated with the concept.
        let mut concept_of: Vec<ConceptType> = (0..4 * v)
            .map(|j| ConceptType::from_index(j % 4))
            .collect();
        concept_of.shuffle(&mut rng);

        let mut sentences: Vec<Vec<Sentence>> = vec![Vec::new(); DOCS_PER_DOMAIN];
        let mut annotations: Vec<Vec<SpanAnnotation>> = vec![Vec::new(); DOCS_PER_DOMAIN];
        let dom = domain.code().to_lowercase();
        for ds in 0..SENTENCES_PER_DOMAIN {
            let doc = doc_of(ds);
            let n_spans = 1 + rng.random_range(0..2);
            let mut words: Vec<String> = Vec::new();
            let mut spans = Vec::new();
            for _ in 0..n_spans {
                for _ in 0..2 + rng.random_range(0..2) {
                    words.push(FILLERS[rng.random_range(0..FILLERS.len())].to_string());
                }
                let j = rng.random_range(0..4 * v);
                let start = words.len();
                words.push(format!("{dom}t{j:02}"));
                spans.push((start, words.len(), concept_of[j]));
            }
            for _ in 0..1 + rng.random_range(0..2) {
                words.push(FILLERS[rng.random_range(0..FILLERS.len())].to_string());
            }
            words.push(".".to_string());
            let s_idx = sentences[doc].len();
            for (start, end, concept) in spans {
                annotations[doc].push(SpanAnnotation::new(s_idx, start, end, concept));
            }
            sentences[doc].push(Sentence::from_words(&words));
        }
        for k in 0..DOCS_PER_DOMAIN {
            documents.push(Document {
                id: format!("pd{d}-{dom}-{k:02}"),
                domain,
                sentences: std::mem::take(&mut sentences[k]),
                annotations: std::mem::take(&mut annotations[k]),
            });
        }
    }
    Corpus::new(documents).expect("planted corpus is valid")
}
