//! Deterministic sparse feature extraction.
//!
//! Each token yields a bag of binary feature strings from a fixed template
//! set: lowercased identity, word shape (character classes with runs
//! collapsed), prefixes/suffixes of lengths 1-4, orthographic flags,
//! identity+shape of neighbours at relative positions -2..+2 with
//! begin/end-of-sentence sentinels, and optional gazetteer / word-cluster
//! features. Extraction is a pure function of the sentence and the
//! configuration; at prediction time, feature strings absent from the
//! frozen index are dropped, never hashed.

use crate::corpus::{ConceptType, CorpusError, Sentence};
use serde::{Deserialize, Serialize};
use std::collections::{BTreeMap, HashMap};
use std::io::BufRead;
use std::path::Path;

/// Sorted, deduplicated feature ids of one token (all binary, value 1).
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct FeatureVector(pub Vec<u32>);

/// Frozen bijection between feature strings and dense ids.
///
/// Built once from training data; lookups of unregistered strings return
/// `None` so unknown features are dropped at prediction time.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct FeatureIndex {
    names: Vec<String>,
    #[serde(skip)]
    lookup: HashMap<String, u32>,
}

impl FeatureIndex {
    /// Rebuild from the id-ordered name list (used after deserialization).
    pub fn from_names(names: Vec<String>) -> FeatureIndex {
        let lookup = names
            .iter()
            .enumerate()
            .map(|(i, n)| (n.clone(), i as u32))
            .collect();
        FeatureIndex { names, lookup }
    }

    pub fn len(&self) -> usize {
        self.names.len()
    }

    pub fn is_empty(&self) -> bool {
        self.names.is_empty()
    }

    pub fn id(&self, feature: &str) -> Option<u32> {
        self.lookup.get(feature).copied()
    }

    pub fn name(&self, id: u32) -> &str {
        &self.names[id as usize]
    }

    pub fn names(&self) -> &[String] {
        &self.names
    }

    /// Restore the lookup table if this index came from serde.
    pub fn rehydrate(&mut self) {
        if self.lookup.len() != self.names.len() {
            self.lookup = self
                .names
                .iter()
                .enumerate()
                .map(|(i, n)| (n.clone(), i as u32))
                .collect();
        }
    }
}

/// Optional external feature resources.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct ExtractorConfig {
    /// Per-concept phrase lists; phrases stored lowercased and tokenized.
    pub gazetteers: Vec<(ConceptType, Vec<Vec<String>>)>,
    /// token -> cluster id.
    pub clusters: BTreeMap<String, String>,
}

impl ExtractorConfig {
    pub fn is_trivial(&self) -> bool {
        self.gazetteers.is_empty() && self.clusters.is_empty()
    }
}

/// Word shape with runs collapsed: uppercase -> `X`, lowercase -> `x`,
/// digit -> `d`, everything else kept verbatim. "X-ray" -> "X-x".
fn shape(token: &str) -> String {
    let mut out = String::new();
    let mut last: Option<char> = None;
    for c in token.chars() {
        let class = if c.is_uppercase() {
            'X'
        } else if c.is_lowercase() {
            'x'
        } else if c.is_ascii_digit() {
            'd'
        } else {
            c
        };
        if last != Some(class) {
            out.push(class);
            last = Some(class);
        }
    }
    out
}

fn char_prefix(s: &str, n: usize) -> Option<String> {
    let chars: Vec<char> = s.chars().collect();
    (chars.len() >= n).then(|| chars[..n].iter().collect())
}

fn char_suffix(s: &str, n: usize) -> Option<String> {
    let chars: Vec<char> = s.chars().collect();
    (chars.len() >= n).then(|| chars[chars.len() - n..].iter().collect())
}

/// Gazetteer match marks for one sentence: `marks[i]` is the concept of a
/// phrase covering token `i`, if any. Greedy longest match, left to right;
/// on equal length the gazetteer listed first wins.
fn gazetteer_marks(sentence: &Sentence, cfg: &ExtractorConfig) -> Vec<Option<ConceptType>> {
    let n = sentence.len();
    let mut marks = vec![None; n];
    if cfg.gazetteers.is_empty() {
        return marks;
    }
    let lower: Vec<String> = sentence
        .tokens
        .iter()
        .map(|t| t.text.to_lowercase())
        .collect();
    let mut i = 0usize;
    while i < n {
        let mut best: Option<(usize, ConceptType)> = None;
        for (concept, phrases) in &cfg.gazetteers {
            for phrase in phrases {
                let len = phrase.len();
                if len == 0 || i + len > n {
                    continue;
                }
                if lower[i..i + len] == phrase[..] && best.is_none_or(|(blen, _)| len > blen) {
                    best = Some((len, *concept));
                }
            }
        }
        if let Some((len, concept)) = best {
            for m in marks.iter_mut().skip(i).take(len) {
                *m = Some(concept);
            }
            i += len;
        } else {
            i += 1;
        }
    }
    marks
}

/// All feature strings of one sentence, one bag per token.
pub fn sentence_feature_strings(sentence: &Sentence, cfg: &ExtractorConfig) -> Vec<Vec<String>> {
    let n = sentence.len();
    let lower: Vec<String> = sentence
        .tokens
        .iter()
        .map(|t| t.text.to_lowercase())
        .collect();
    let shapes: Vec<String> = sentence.tokens.iter().map(|t| shape(&t.text)).collect();
    let marks = gazetteer_marks(sentence, cfg);

    let mut out = Vec::with_capacity(n);
    for i in 0..n {
        let text = &sentence.tokens[i].text;
        let mut feats = Vec::with_capacity(24);
        feats.push(format!("low={}", lower[i]));
        feats.push(format!("shape={}", shapes[i]));
        for k in 1..=4 {
            if let Some(p) = char_prefix(text, k) {
                feats.push(format!("pre{k}={}", p.to_lowercase()));
            }
            if let Some(s) = char_suffix(text, k) {
                feats.push(format!("suf{k}={}", s.to_lowercase()));
            }
        }
        let first = text.chars().next().unwrap_or(' ');
        if text.chars().all(|c| c.is_ascii_digit()) {
            feats.push("flag:digit".into());
        }
        if text.chars().any(|c| c.is_ascii_digit()) {
            feats.push("flag:hasdigit".into());
        }
        if text.chars().all(|c| !c.is_alphanumeric()) {
            feats.push("flag:punct".into());
        }
        if first.is_uppercase() {
            feats.push("flag:cap".into());
        }
        if text.chars().any(char::is_alphabetic)
            && text.chars().filter(|c| c.is_alphabetic()).all(char::is_uppercase)
        {
            feats.push("flag:allcaps".into());
        }
        if i == 0 {
            feats.push("bos".into());
        }
        if i + 1 == n {
            feats.push("eos".into());
        }
        for delta in [-2isize, -1, 1, 2] {
            let j = i as isize + delta;
            if j < 0 {
                feats.push(format!("low[{delta}]=<S>"));
                feats.push(format!("shape[{delta}]=<S>"));
            } else if j as usize >= n {
                feats.push(format!("low[{delta}]=</S>"));
                feats.push(format!("shape[{delta}]=</S>"));
            } else {
                feats.push(format!("low[{delta}]={}", lower[j as usize]));
                feats.push(format!("shape[{delta}]={}", shapes[j as usize]));
            }
        }
        if let Some(concept) = marks[i] {
            feats.push(format!("gaz={concept}"));
        }
        if let Some(cluster) = cfg.clusters.get(&lower[i]) {
            feats.push(format!("cl={cluster}"));
        }
        out.push(feats);
    }
    out
}

/// Build a frozen index from every feature string occurring at least
/// `min_count` times in the corpus. Ids are assigned in lexicographic
/// order, so identical corpora yield byte-identical indexes.
pub fn build_feature_index(
    corpus: &[&crate::corpus::Document],
    cfg: &ExtractorConfig,
    min_count: usize,
) -> FeatureIndex {
    let mut counts: BTreeMap<String, usize> = BTreeMap::new();
    for doc in corpus {
        for sentence in &doc.sentences {
            for bag in sentence_feature_strings(sentence, cfg) {
                for f in bag {
                    *counts.entry(f).or_insert(0) += 1;
                }
            }
        }
    }
    let names: Vec<String> = counts
        .into_iter()
        .filter(|(_, c)| *c >= min_count)
        .map(|(name, _)| name)
        .collect();
    FeatureIndex::from_names(names)
}

/// Map a sentence to feature-id vectors under a frozen index; unknown
/// features are dropped. Output length equals the sentence length.
pub fn extract_features(
    sentence: &Sentence,
    cfg: &ExtractorConfig,
    index: &FeatureIndex,
) -> Vec<FeatureVector> {
    sentence_feature_strings(sentence, cfg)
        .into_iter()
        .map(|bag| {
            let mut ids: Vec<u32> = bag.iter().filter_map(|f| index.id(f)).collect();
            ids.sort_unstable();
            ids.dedup();
            FeatureVector(ids)
        })
        .collect()
}

/// Parse a gazetteer file: `[Concept]` section headers, one phrase per
/// line; blank lines and `;` comments ignored. Phrases are lowercased and
/// whitespace-tokenized.
pub fn load_gazetteer(path: impl AsRef<Path>) -> Result<Vec<(ConceptType, Vec<Vec<String>>)>, CorpusError> {
    let path = path.as_ref();
    let reader = std::fs::File::open(path)
        .map(std::io::BufReader::new)
        .map_err(|source| CorpusError::Io {
            path: path.display().to_string(),
            source,
        })?;
    let mut out: Vec<(ConceptType, Vec<Vec<String>>)> = Vec::new();
    let mut current: Option<usize> = None;
    for (lineno, line) in reader.lines().enumerate() {
        let line = line.map_err(|source| CorpusError::Io {
            path: path.display().to_string(),
            source,
        })?;
        let line = line.trim();
        if line.is_empty() || line.starts_with(';') {
            continue;
        }
        if let Some(name) = line.strip_prefix('[').and_then(|l| l.strip_suffix(']')) {
            let concept: ConceptType = name.trim().parse().map_err(|msg| CorpusError::Parse {
                path: path.display().to_string(),
                line: lineno + 1,
                msg,
            })?;
            out.push((concept, Vec::new()));
            current = Some(out.len() - 1);
        } else {
            let Some(section) = current else {
                return Err(CorpusError::Parse {
                    path: path.display().to_string(),
                    line: lineno + 1,
                    msg: "phrase before any [Concept] header".into(),
                });
            };
            let phrase: Vec<String> = line.split_whitespace().map(str::to_lowercase).collect();
            out[section].1.push(phrase);
        }
    }
    Ok(out)
}

/// Parse a cluster file: `token<TAB>cluster-id` per line.
pub fn load_clusters(path: impl AsRef<Path>) -> Result<BTreeMap<String, String>, CorpusError> {
    let path = path.as_ref();
    let reader = std::fs::File::open(path)
        .map(std::io::BufReader::new)
        .map_err(|source| CorpusError::Io {
            path: path.display().to_string(),
            source,
        })?;
    let mut out = BTreeMap::new();
    for (lineno, line) in reader.lines().enumerate() {
        let line = line.map_err(|source| CorpusError::Io {
            path: path.display().to_string(),
            source,
        })?;
        if line.trim().is_empty() {
            continue;
        }
        let (token, cluster) = line.split_once('\t').ok_or_else(|| CorpusError::Parse {
            path: path.display().to_string(),
            line: lineno + 1,
            msg: "expected token<TAB>cluster-id".into(),
        })?;
        out.insert(token.to_lowercase(), cluster.trim().to_string());
    }
    Ok(out)
}
