//! Data model for annotated abstracts.
//!
//! A [`Corpus`] is a list of [`Document`]s (one per abstract), each tagged
//! with one of the ten STM [`Domain`]s and carrying tokenized sentences plus
//! non-nested typed phrase spans ([`SpanAnnotation`]). Span offsets are
//! token-based and sentence-local.
//!
//! Submodules: [`bilou`] (tag codec), [`io`] (JSONL/CoNLL), [`folds`]
//! (cross-validation planning), [`stats`] (corpus characteristics),
//! [`tokenize`] (raw-text tokenizer and sentence splitter for the silver
//! pipeline).

pub mod bilou;
pub mod folds;
pub mod io;
pub mod stats;
pub mod tokenize;

use serde::{Deserialize, Serialize};
use std::fmt;
use std::str::FromStr;

/// Errors from corpus construction, parsing, and validation.
#[derive(Debug, thiserror::Error)]
pub enum CorpusError {
    /// A record could not be parsed at all.
    #[error("{path}:{line}: parse error: {msg}")]
    Parse {
        path: String,
        line: usize,
        msg: String,
    },
    /// A record parsed but violates a data invariant.
    #[error("document {doc_id}: {msg}")]
    Validation { doc_id: String, msg: String },
    /// A domain does not have enough documents for the requested fold split.
    #[error("domain {domain}: fold split needs {needed} documents, found {found}")]
    InsufficientDocuments {
        domain: Domain,
        needed: usize,
        found: usize,
    },
    /// Fold construction produced repeated test sets (degenerate k/split).
    #[error("folds {a} and {b} received identical test sets; reduce k or the test share")]
    DegenerateFolds { a: usize, b: usize },
    #[error("i/o error on {path}: {source}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },
}

/// The four generic scientific concept types.
///
/// Exactly these four exist; parsers reject anything else.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub enum ConceptType {
    Process,
    Method,
    Material,
    Data,
}

impl ConceptType {
    pub const ALL: [ConceptType; 4] = [
        ConceptType::Process,
        ConceptType::Method,
        ConceptType::Material,
        ConceptType::Data,
    ];

    pub fn as_str(self) -> &'static str {
        match self {
            ConceptType::Process => "Process",
            ConceptType::Method => "Method",
            ConceptType::Material => "Material",
            ConceptType::Data => "Data",
        }
    }

    /// Stable index 0..4 in declaration order.
    pub fn index(self) -> usize {
        match self {
            ConceptType::Process => 0,
            ConceptType::Method => 1,
            ConceptType::Material => 2,
            ConceptType::Data => 3,
        }
    }

    pub fn from_index(i: usize) -> ConceptType {
        Self::ALL[i]
    }
}

impl fmt::Display for ConceptType {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for ConceptType {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "Process" => Ok(ConceptType::Process),
            "Method" => Ok(ConceptType::Method),
            "Material" => Ok(ConceptType::Material),
            "Data" => Ok(ConceptType::Data),
            other => Err(format!("unknown concept label {other:?}")),
        }
    }
}

/// The ten STM domain codes.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub enum Domain {
    Agr,
    Ast,
    Bio,
    Che,
    CS,
    ES,
    Eng,
    MS,
    Mat,
    Med,
}

impl Domain {
    pub const ALL: [Domain; 10] = [
        Domain::Agr,
        Domain::Ast,
        Domain::Bio,
        Domain::Che,
        Domain::CS,
        Domain::ES,
        Domain::Eng,
        Domain::MS,
        Domain::Mat,
        Domain::Med,
    ];

    pub fn code(self) -> &'static str {
        match self {
            Domain::Agr => "Agr",
            Domain::Ast => "Ast",
            Domain::Bio => "Bio",
            Domain::Che => "Che",
            Domain::CS => "CS",
            Domain::ES => "ES",
            Domain::Eng => "Eng",
            Domain::MS => "MS",
            Domain::Mat => "Mat",
            Domain::Med => "Med",
        }
    }
}

impl fmt::Display for Domain {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.code())
    }
}

impl FromStr for Domain {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        Domain::ALL
            .iter()
            .copied()
            .find(|d| d.code() == s)
            .ok_or_else(|| format!("unknown domain code {s:?}"))
    }
}

/// A single token with character offsets into its sentence.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Token {
    pub text: String,
    /// Character offset of the first character in the sentence.
    pub start: usize,
    /// Character offset one past the last character.
    pub end: usize,
}

impl Token {
    pub fn new(text: impl Into<String>, start: usize, end: usize) -> Token {
        Token {
            text: text.into(),
            start,
            end,
        }
    }
}

/// A tokenized sentence. Token offsets are strictly increasing and
/// non-overlapping; a sentence has at least one token.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Sentence {
    pub tokens: Vec<Token>,
}

impl Sentence {
    pub fn new(tokens: Vec<Token>) -> Sentence {
        Sentence { tokens }
    }

    /// Build a sentence from bare words, assigning offsets as if the words
    /// were joined by single spaces.
    pub fn from_words<S: AsRef<str>>(words: &[S]) -> Sentence {
        let mut tokens = Vec::with_capacity(words.len());
        let mut pos = 0usize;
        for w in words {
            let w = w.as_ref();
            let len = w.chars().count();
            tokens.push(Token::new(w, pos, pos + len));
            pos += len + 1;
        }
        Sentence { tokens }
    }

    pub fn len(&self) -> usize {
        self.tokens.len()
    }

    pub fn is_empty(&self) -> bool {
        self.tokens.is_empty()
    }

    /// Reconstruct the sentence text from token offsets, padding gaps with
    /// spaces.
    pub fn text(&self) -> String {
        let mut out = String::new();
        let mut pos = 0usize;
        for tok in &self.tokens {
            while pos < tok.start {
                out.push(' ');
                pos += 1;
            }
            out.push_str(&tok.text);
            pos = tok.end;
        }
        out
    }

    fn validate(&self, doc_id: &str, index: usize) -> Result<(), CorpusError> {
        let fail = |msg: String| CorpusError::Validation {
            doc_id: doc_id.to_string(),
            msg,
        };
        if self.tokens.is_empty() {
            return Err(fail(format!("sentence {index} has no tokens")));
        }
        let mut prev_end = 0usize;
        for (t, tok) in self.tokens.iter().enumerate() {
            if tok.text.is_empty() {
                return Err(fail(format!("sentence {index} token {t} is empty")));
            }
            if tok.start >= tok.end {
                return Err(fail(format!(
                    "sentence {index} token {t} has start {} >= end {}",
                    tok.start, tok.end
                )));
            }
            if t > 0 && tok.start < prev_end {
                return Err(fail(format!(
                    "sentence {index} token {t} overlaps the previous token"
                )));
            }
            prev_end = tok.end;
        }
        Ok(())
    }
}

/// A typed phrase span: token range `[start, end)` within one sentence.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub struct SpanAnnotation {
    /// Index of the sentence within the document.
    pub sentence: usize,
    /// First token of the span.
    pub start: usize,
    /// One past the last token of the span.
    pub end: usize,
    pub concept: ConceptType,
}

impl SpanAnnotation {
    pub fn new(sentence: usize, start: usize, end: usize, concept: ConceptType) -> SpanAnnotation {
        SpanAnnotation {
            sentence,
            start,
            end,
            concept,
        }
    }

    /// Surface string of the span (tokens joined by single spaces).
    pub fn surface(&self, sentence: &Sentence) -> String {
        let words: Vec<&str> = sentence.tokens[self.start..self.end]
            .iter()
            .map(|t| t.text.as_str())
            .collect();
        words.join(" ")
    }
}

/// One annotated abstract.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Document {
    pub id: String,
    pub domain: Domain,
    pub sentences: Vec<Sentence>,
    pub annotations: Vec<SpanAnnotation>,
}

impl Document {
    /// Check every type invariant: sentence well-formedness, span bounds,
    /// and pairwise disjointness of spans within each sentence.
    pub fn validate(&self) -> Result<(), CorpusError> {
        let fail = |msg: String| CorpusError::Validation {
            doc_id: self.id.clone(),
            msg,
        };
        for (i, sentence) in self.sentences.iter().enumerate() {
            sentence.validate(&self.id, i)?;
        }
        for ann in &self.annotations {
            let Some(sentence) = self.sentences.get(ann.sentence) else {
                return Err(fail(format!(
                    "annotation references sentence {} of {}",
                    ann.sentence,
                    self.sentences.len()
                )));
            };
            if ann.start >= ann.end || ann.end > sentence.len() {
                return Err(fail(format!(
                    "annotation ({}, {}, {}, {}) out of range for sentence of length {}",
                    ann.sentence,
                    ann.start,
                    ann.end,
                    ann.concept,
                    sentence.len()
                )));
            }
        }
        // Non-nesting/non-overlap: sort per sentence and compare neighbours.
        let mut sorted: Vec<&SpanAnnotation> = self.annotations.iter().collect();
        sorted.sort();
        for pair in sorted.windows(2) {
            let (a, b) = (pair[0], pair[1]);
            if a.sentence == b.sentence && b.start < a.end {
                return Err(fail(format!(
                    "overlapping spans in sentence {}: ({},{}) and ({},{})",
                    a.sentence, a.start, a.end, b.start, b.end
                )));
            }
        }
        Ok(())
    }

    /// Annotations of one sentence, in token order.
    pub fn sentence_annotations(&self, sentence: usize) -> Vec<SpanAnnotation> {
        let mut spans: Vec<SpanAnnotation> = self
            .annotations
            .iter()
            .copied()
            .filter(|a| a.sentence == sentence)
            .collect();
        spans.sort();
        spans
    }

    pub fn token_count(&self) -> usize {
        self.sentences.iter().map(Sentence::len).sum()
    }
}

/// A list of validated documents with unique ids.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Corpus {
    pub documents: Vec<Document>,
}

impl Corpus {
    pub fn new(documents: Vec<Document>) -> Result<Corpus, CorpusError> {
        let corpus = Corpus { documents };
        corpus.validate()?;
        Ok(corpus)
    }

    pub fn validate(&self) -> Result<(), CorpusError> {
        let mut seen = std::collections::BTreeSet::new();
        for doc in &self.documents {
            doc.validate()?;
            if !seen.insert(doc.id.as_str()) {
                return Err(CorpusError::Validation {
                    doc_id: doc.id.clone(),
                    msg: "duplicate document id".into(),
                });
            }
        }
        Ok(())
    }

    pub fn len(&self) -> usize {
        self.documents.len()
    }

    pub fn is_empty(&self) -> bool {
        self.documents.is_empty()
    }

    pub fn get(&self, id: &str) -> Option<&Document> {
        self.documents.iter().find(|d| d.id == id)
    }

    /// Documents restricted to an id set, in corpus order.
    pub fn subset(&self, ids: &[String]) -> Vec<&Document> {
        let wanted: std::collections::BTreeSet<&str> = ids.iter().map(String::as_str).collect();
        self.documents
            .iter()
            .filter(|d| wanted.contains(d.id.as_str()))
            .collect()
    }
}
