//! BILOU tag codec.
//!
//! Spans are encoded per sentence as `U-X` (unit), or `B-X (I-X)* L-X`
//! (beginning, inside, last), with `O` elsewhere — 17 tags in total over the
//! four concept types.
//!
//! Decoding is a *total* function: predicted sequences may be ill-formed, and
//! the repair rule below turns any tag sequence into a valid span set
//! deterministically. Scanning left to right, a maximal same-type run that
//! starts with `B-`/`U-` (or with `I-`/`L-` when preceded by `O` or the
//! sequence start) is closed into a span at the first `L-`/`U-` (inclusive),
//! or truncated at a type change, `O`, or the sequence end. Tags that can
//! start no run are dropped. The rule never invents a type that is not
//! present in the run, and it inverts `encode` exactly on well-formed input.

use super::{ConceptType, SpanAnnotation};
use serde::{Deserialize, Serialize};
use std::fmt;
use std::str::FromStr;

/// Number of distinct tags: `{B,I,L,U} x {4 concepts} + O`.
pub const TAG_COUNT: usize = 17;

/// One BILOU tag.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub enum Tag {
    Outside,
    Begin(ConceptType),
    Inside(ConceptType),
    Last(ConceptType),
    Unit(ConceptType),
}

impl Tag {
    /// Stable index in `0..TAG_COUNT`. `O` is 0, then `B`, `I`, `L`, `U`
    /// blocks with concepts in declaration order. Viterbi tie-breaking
    /// relies on this order being total and fixed.
    pub fn index(self) -> usize {
        match self {
            Tag::Outside => 0,
            Tag::Begin(c) => 1 + c.index(),
            Tag::Inside(c) => 5 + c.index(),
            Tag::Last(c) => 9 + c.index(),
            Tag::Unit(c) => 13 + c.index(),
        }
    }

    pub fn from_index(i: usize) -> Tag {
        match i {
            0 => Tag::Outside,
            1..=4 => Tag::Begin(ConceptType::from_index(i - 1)),
            5..=8 => Tag::Inside(ConceptType::from_index(i - 5)),
            9..=12 => Tag::Last(ConceptType::from_index(i - 9)),
            13..=16 => Tag::Unit(ConceptType::from_index(i - 13)),
            _ => panic!("tag index {i} out of range"),
        }
    }

    /// Concept type carried by the tag, `None` for `O`.
    pub fn concept(self) -> Option<ConceptType> {
        match self {
            Tag::Outside => None,
            Tag::Begin(c) | Tag::Inside(c) | Tag::Last(c) | Tag::Unit(c) => Some(c),
        }
    }

    pub fn all() -> impl Iterator<Item = Tag> {
        (0..TAG_COUNT).map(Tag::from_index)
    }
}

impl fmt::Display for Tag {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Tag::Outside => f.write_str("O"),
            Tag::Begin(c) => write!(f, "B-{c}"),
            Tag::Inside(c) => write!(f, "I-{c}"),
            Tag::Last(c) => write!(f, "L-{c}"),
            Tag::Unit(c) => write!(f, "U-{c}"),
        }
    }
}

impl FromStr for Tag {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        if s == "O" {
            return Ok(Tag::Outside);
        }
        let (scheme, concept) = s
            .split_once('-')
            .ok_or_else(|| format!("malformed tag {s:?}"))?;
        let concept: ConceptType = concept.parse()?;
        match scheme {
            "B" => Ok(Tag::Begin(concept)),
            "I" => Ok(Tag::Inside(concept)),
            "L" => Ok(Tag::Last(concept)),
            "U" => Ok(Tag::Unit(concept)),
            other => Err(format!("unknown scheme prefix {other:?} in tag {s:?}")),
        }
    }
}

/// A per-sentence tag sequence.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct TagSequence(pub Vec<Tag>);

impl TagSequence {
    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    pub fn iter(&self) -> std::slice::Iter<'_, Tag> {
        self.0.iter()
    }

    /// True when the sequence obeys the BILOU grammar: every `B-X` is
    /// followed by `L-X` with only `I-X` between, and `I`/`L` tags never
    /// follow `O`, the start, or a tag of a different type.
    pub fn is_well_formed(&self) -> bool {
        let mut prev: Option<Tag> = None;
        for &tag in &self.0 {
            if !valid_transition(prev, tag) {
                return false;
            }
            prev = Some(tag);
        }
        match prev {
            None => true,
            Some(t) => valid_end(t),
        }
    }
}

/// BILOU grammar: may `next` follow `prev` (`None` = sequence start)?
///
/// Shared by [`TagSequence::is_well_formed`] and the CRF transition mask so
/// the two can never drift apart.
pub fn valid_transition(prev: Option<Tag>, next: Tag) -> bool {
    match prev {
        // After start, O, or a completed span: only O or a new span start.
        None | Some(Tag::Outside) | Some(Tag::Last(_)) | Some(Tag::Unit(_)) => {
            matches!(next, Tag::Outside | Tag::Begin(_) | Tag::Unit(_))
        }
        // Inside an open span: continue or close it, same type only.
        Some(Tag::Begin(x)) | Some(Tag::Inside(x)) => match next {
            Tag::Inside(y) | Tag::Last(y) => x == y,
            _ => false,
        },
    }
}

/// May a sequence end on `tag`?
pub fn valid_end(tag: Tag) -> bool {
    matches!(tag, Tag::Outside | Tag::Last(_) | Tag::Unit(_))
}

/// Overlapping spans passed to [`encode_bilou`].
#[derive(Debug, thiserror::Error)]
#[error("overlapping spans ({a_start},{a_end}) and ({b_start},{b_end}) cannot be BILOU-encoded")]
pub struct OverlapError {
    pub a_start: usize,
    pub a_end: usize,
    pub b_start: usize,
    pub b_end: usize,
}

/// Encode disjoint spans over a sentence of `len` tokens.
///
/// Only `start`/`end`/`concept` of each annotation are read; the caller
/// selects the spans of one sentence. Out-of-bounds or overlapping spans are
/// an error, never silently dropped.
pub fn encode_bilou(len: usize, spans: &[SpanAnnotation]) -> Result<TagSequence, OverlapError> {
    let mut sorted: Vec<&SpanAnnotation> = spans.iter().collect();
    sorted.sort_by_key(|s| (s.start, s.end));
    let mut tags = vec![Tag::Outside; len];
    let mut prev: Option<&SpanAnnotation> = None;
    for span in sorted {
        debug_assert!(span.start < span.end && span.end <= len, "span out of bounds");
        if let Some(p) = prev {
            if span.start < p.end {
                return Err(OverlapError {
                    a_start: p.start,
                    a_end: p.end,
                    b_start: span.start,
                    b_end: span.end,
                });
            }
        }
        if span.end - span.start == 1 {
            tags[span.start] = Tag::Unit(span.concept);
        } else {
            tags[span.start] = Tag::Begin(span.concept);
            for t in span.start + 1..span.end - 1 {
                tags[t] = Tag::Inside(span.concept);
            }
            tags[span.end - 1] = Tag::Last(span.concept);
        }
        prev = Some(span);
    }
    Ok(TagSequence(tags))
}

/// Decode a tag sequence into spans for sentence `sentence_index`.
///
/// Total and deterministic for arbitrary input; exact inverse of
/// [`encode_bilou`] on well-formed sequences, repair rule otherwise (see
/// module docs).
pub fn decode_bilou(tags: &TagSequence, sentence_index: usize) -> Vec<SpanAnnotation> {
    let mut spans = Vec::new();
    let mut open: Option<(ConceptType, usize)> = None;
    let n = tags.len();
    for i in 0..n {
        let tag = tags.0[i];
        if let Some((concept, start)) = open {
            match tag {
                Tag::Inside(y) | Tag::Begin(y) if y == concept => continue,
                Tag::Last(y) | Tag::Unit(y) if y == concept => {
                    spans.push(SpanAnnotation::new(sentence_index, start, i + 1, concept));
                    open = None;
                    continue;
                }
                _ => {
                    // Type change or O truncates the open span; the current
                    // position is then reconsidered as a potential start.
                    spans.push(SpanAnnotation::new(sentence_index, start, i, concept));
                    open = None;
                }
            }
        }
        match tag {
            Tag::Outside => {}
            Tag::Begin(c) => open = Some((c, i)),
            Tag::Unit(c) => spans.push(SpanAnnotation::new(sentence_index, i, i + 1, c)),
            Tag::Inside(c) => {
                // Orphan I/L may start a run only after O or the start.
                if i == 0 || tags.0[i - 1] == Tag::Outside {
                    open = Some((c, i));
                }
            }
            Tag::Last(c) => {
                if i == 0 || tags.0[i - 1] == Tag::Outside {
                    spans.push(SpanAnnotation::new(sentence_index, i, i + 1, c));
                }
            }
        }
    }
    if let Some((concept, start)) = open {
        spans.push(SpanAnnotation::new(sentence_index, start, n, concept));
    }
    spans
}
