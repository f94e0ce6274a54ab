//! Corpus file formats.
//!
//! Two interchangeable formats:
//!
//! - **JSONL**: one document per line,
//!   `{"id", "domain", "sentences":[{"tokens":[{"text","start","end"}]}],
//!   "annotations":[{"sentence","start","end","concept"}]}`. Offsets are
//!   token-based for annotations and character-based (within the sentence)
//!   for tokens. UTF-8.
//! - **CoNLL**: one `TOKEN<TAB>BILOU-TAG` pair per line, blank line between
//!   sentences, and a `# id = <id>\tdomain = <code>` comment line before
//!   each document.
//!
//! Both loaders validate every invariant (span bounds, non-nesting, domain
//! and concept labels) and report the offending line or document.

use super::bilou::{decode_bilou, encode_bilou, Tag, TagSequence};
use super::{Corpus, CorpusError, Document, Sentence, SpanAnnotation, Token};
use serde::{Deserialize, Serialize};
use std::io::{BufRead, BufReader, Write};
use std::path::Path;
use std::str::FromStr;

/// Supported corpus file formats.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum CorpusFormat {
    Jsonl,
    Conll,
}

impl FromStr for CorpusFormat {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "jsonl" => Ok(CorpusFormat::Jsonl),
            "conll" => Ok(CorpusFormat::Conll),
            other => Err(format!("unknown corpus format {other:?} (expected jsonl or conll)")),
        }
    }
}

#[derive(Serialize, Deserialize)]
struct JsonToken {
    text: String,
    start: usize,
    end: usize,
}

#[derive(Serialize, Deserialize)]
struct JsonSentence {
    tokens: Vec<JsonToken>,
}

#[derive(Serialize, Deserialize)]
struct JsonAnnotation {
    sentence: usize,
    start: usize,
    end: usize,
    concept: String,
}

#[derive(Serialize, Deserialize)]
struct JsonDocument {
    id: String,
    domain: String,
    sentences: Vec<JsonSentence>,
    annotations: Vec<JsonAnnotation>,
}

/// Load a corpus in the given format.
pub fn load_corpus(path: impl AsRef<Path>, format: CorpusFormat) -> Result<Corpus, CorpusError> {
    match format {
        CorpusFormat::Jsonl => load_jsonl(path),
        CorpusFormat::Conll => load_conll(path),
    }
}

/// Write a corpus in the given format.
pub fn save_corpus<W: Write>(
    corpus: &Corpus,
    writer: &mut W,
    format: CorpusFormat,
) -> Result<(), CorpusError> {
    match format {
        CorpusFormat::Jsonl => write_jsonl(corpus, writer),
        CorpusFormat::Conll => write_conll(corpus, writer),
    }
}

fn open(path: &Path) -> Result<BufReader<std::fs::File>, CorpusError> {
    std::fs::File::open(path)
        .map(BufReader::new)
        .map_err(|source| CorpusError::Io {
            path: path.display().to_string(),
            source,
        })
}

/// Load a JSONL corpus, reporting parse errors with their line number.
pub fn load_jsonl(path: impl AsRef<Path>) -> Result<Corpus, CorpusError> {
    let path = path.as_ref();
    let reader = open(path)?;
    let mut documents = Vec::new();
    for (lineno, line) in reader.lines().enumerate() {
        let line = line.map_err(|source| CorpusError::Io {
            path: path.display().to_string(),
            source,
        })?;
        if line.trim().is_empty() {
            continue;
        }
        let parse_err = |msg: String| CorpusError::Parse {
            path: path.display().to_string(),
            line: lineno + 1,
            msg,
        };
        let raw: JsonDocument =
            serde_json::from_str(&line).map_err(|e| parse_err(e.to_string()))?;
        documents.push(document_from_json(raw, &parse_err)?);
    }
    let corpus = Corpus { documents };
    corpus.validate()?;
    Ok(corpus)
}

fn document_from_json(
    raw: JsonDocument,
    parse_err: &dyn Fn(String) -> CorpusError,
) -> Result<Document, CorpusError> {
    let domain = raw.domain.parse().map_err(parse_err)?;
    let sentences = raw
        .sentences
        .into_iter()
        .map(|s| {
            Sentence::new(
                s.tokens
                    .into_iter()
                    .map(|t| Token::new(t.text, t.start, t.end))
                    .collect(),
            )
        })
        .collect();
    let mut annotations = Vec::with_capacity(raw.annotations.len());
    for a in raw.annotations {
        let concept = a.concept.parse().map_err(parse_err)?;
        annotations.push(SpanAnnotation::new(a.sentence, a.start, a.end, concept));
    }
    Ok(Document {
        id: raw.id,
        domain,
        sentences,
        annotations,
    })
}

/// Serialize one document as a JSONL line (no trailing newline).
pub fn document_to_json_line(doc: &Document) -> String {
    let raw = JsonDocument {
        id: doc.id.clone(),
        domain: doc.domain.code().to_string(),
        sentences: doc
            .sentences
            .iter()
            .map(|s| JsonSentence {
                tokens: s
                    .tokens
                    .iter()
                    .map(|t| JsonToken {
                        text: t.text.clone(),
                        start: t.start,
                        end: t.end,
                    })
                    .collect(),
            })
            .collect(),
        annotations: doc
            .annotations
            .iter()
            .map(|a| JsonAnnotation {
                sentence: a.sentence,
                start: a.start,
                end: a.end,
                concept: a.concept.as_str().to_string(),
            })
            .collect(),
    };
    serde_json::to_string(&raw).expect("document serialization cannot fail")
}

pub fn write_jsonl<W: Write>(corpus: &Corpus, writer: &mut W) -> Result<(), CorpusError> {
    for doc in &corpus.documents {
        writeln!(writer, "{}", document_to_json_line(doc)).map_err(io_err)?;
    }
    Ok(())
}

fn io_err(source: std::io::Error) -> CorpusError {
    CorpusError::Io {
        path: "<writer>".into(),
        source,
    }
}

/// Load a CoNLL-style corpus. Gold files must carry well-formed BILOU tags;
/// a sequence that does not survive a decode/re-encode round trip is
/// rejected as ill-formed rather than silently repaired.
pub fn load_conll(path: impl AsRef<Path>) -> Result<Corpus, CorpusError> {
    let path = path.as_ref();
    let reader = open(path)?;

    struct PartialDoc {
        id: String,
        domain: super::Domain,
        sentences: Vec<Sentence>,
        annotations: Vec<SpanAnnotation>,
    }

    let mut documents = Vec::new();
    let mut current: Option<PartialDoc> = None;
    let mut words: Vec<String> = Vec::new();
    let mut tags: Vec<Tag> = Vec::new();

    fn flush_sentence(
        doc: &mut PartialDoc,
        words: &mut Vec<String>,
        tags: &mut Vec<Tag>,
        path: &Path,
        lineno: usize,
    ) -> Result<(), CorpusError> {
        if words.is_empty() {
            return Ok(());
        }
        let sentence = Sentence::from_words(words);
        let seq = TagSequence(std::mem::take(tags));
        let index = doc.sentences.len();
        let spans = decode_bilou(&seq, index);
        let reencoded = encode_bilou(sentence.len(), &spans).expect("decoded spans are disjoint");
        if reencoded != seq {
            return Err(CorpusError::Parse {
                path: path.display().to_string(),
                line: lineno,
                msg: format!("ill-formed BILOU tags in document {}", doc.id),
            });
        }
        doc.annotations.extend(spans);
        doc.sentences.push(sentence);
        words.clear();
        Ok(())
    }

    let mut last_line = 0usize;
    for (lineno, line) in reader.lines().enumerate() {
        let lineno = lineno + 1;
        last_line = lineno;
        let line = line.map_err(|source| CorpusError::Io {
            path: path.display().to_string(),
            source,
        })?;
        let parse_err = |msg: String| CorpusError::Parse {
            path: path.display().to_string(),
            line: lineno,
            msg,
        };
        if let Some(rest) = line.strip_prefix('#') {
            // Document header: "# id = <id>\tdomain = <code>"
            if let Some(doc) = current.as_mut() {
                flush_sentence(doc, &mut words, &mut tags, path, lineno)?;
            }
            if let Some(done) = current.take() {
                documents.push(Document {
                    id: done.id,
                    domain: done.domain,
                    sentences: done.sentences,
                    annotations: done.annotations,
                });
            }
            let mut id = None;
            let mut domain = None;
            for field in rest.split('\t') {
                match field.trim().split_once('=') {
                    Some((k, v)) if k.trim() == "id" => id = Some(v.trim().to_string()),
                    Some((k, v)) if k.trim() == "domain" => {
                        domain = Some(v.trim().parse().map_err(parse_err)?)
                    }
                    _ => return Err(parse_err(format!("unrecognized header field {field:?}"))),
                }
            }
            let id = id.ok_or_else(|| parse_err("header missing id".into()))?;
            let domain = domain.ok_or_else(|| parse_err("header missing domain".into()))?;
            current = Some(PartialDoc {
                id,
                domain,
                sentences: Vec::new(),
                annotations: Vec::new(),
            });
        } else if line.trim().is_empty() {
            if let Some(doc) = current.as_mut() {
                flush_sentence(doc, &mut words, &mut tags, path, lineno)?;
            }
        } else {
            let doc = current
                .as_mut()
                .ok_or_else(|| parse_err("token line before any document header".into()))?;
            let _ = doc;
            let (word, tag) = line
                .split_once('\t')
                .ok_or_else(|| parse_err("expected TOKEN<TAB>TAG".into()))?;
            if word.is_empty() {
                return Err(parse_err("empty token".into()));
            }
            words.push(word.to_string());
            tags.push(tag.trim().parse().map_err(parse_err)?);
        }
    }
    if let Some(doc) = current.as_mut() {
        flush_sentence(doc, &mut words, &mut tags, path, last_line)?;
    }
    if let Some(done) = current.take() {
        documents.push(Document {
            id: done.id,
            domain: done.domain,
            sentences: done.sentences,
            annotations: done.annotations,
        });
    }
    let corpus = Corpus { documents };
    corpus.validate()?;
    Ok(corpus)
}

pub fn write_conll<W: Write>(corpus: &Corpus, writer: &mut W) -> Result<(), CorpusError> {
    for doc in &corpus.documents {
        writeln!(writer, "# id = {}\tdomain = {}", doc.id, doc.domain).map_err(io_err)?;
        for (i, sentence) in doc.sentences.iter().enumerate() {
            let spans = doc.sentence_annotations(i);
            let tags = encode_bilou(sentence.len(), &spans).map_err(|e| {
                CorpusError::Validation {
                    doc_id: doc.id.clone(),
                    msg: e.to_string(),
                }
            })?;
            for (tok, tag) in sentence.tokens.iter().zip(tags.iter()) {
                writeln!(writer, "{}\t{}", tok.text, tag).map_err(io_err)?;
            }
            writeln!(writer).map_err(io_err)?;
        }
    }
    Ok(())
}
