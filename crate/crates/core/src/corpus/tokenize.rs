//! Tokenizer and sentence splitter for raw abstract text.
//!
//! Only the silver-labelling pipeline uses this; annotated corpora ship
//! pre-tokenized and bypass it. Rules are fixed and deterministic:
//!
//! - Tokens are maximal runs of alphanumeric characters. `- . , '` stay
//!   inside a token when flanked by alphanumerics on both sides ("X-ray",
//!   "3.5", "1,000"); every other non-space character is a single-character
//!   token.
//! - Sentences end at `. ? !` followed by whitespace and an uppercase
//!   letter, unless the preceding word is a known abbreviation or a single
//!   initial.

use super::{Sentence, Token};

/// Words (lowercased, final period stripped) that do not end a sentence.
const ABBREVIATIONS: &[&str] = &[
    "al", "approx", "ca", "cf", "dr", "e.g", "eq", "eqs", "et", "etc", "fig", "figs", "i.e",
    "no", "prof", "resp", "vs",
];

fn is_word_char(c: char) -> bool {
    c.is_alphanumeric()
}

fn is_joiner(c: char) -> bool {
    matches!(c, '-' | '.' | ',' | '\'')
}

/// Tokenize one sentence; offsets are character offsets into `text`.
pub fn tokenize(text: &str) -> Vec<Token> {
    let chars: Vec<char> = text.chars().collect();
    let mut tokens = Vec::new();
    let mut i = 0usize;
    while i < chars.len() {
        let c = chars[i];
        if c.is_whitespace() {
            i += 1;
        } else if is_word_char(c) {
            let start = i;
            while i < chars.len() {
                if is_word_char(chars[i]) {
                    i += 1;
                } else if i + 1 < chars.len()
                    && is_joiner(chars[i])
                    && is_word_char(chars[i + 1])
                    && i > start
                {
                    i += 2;
                } else {
                    break;
                }
            }
            let word: String = chars[start..i].iter().collect();
            tokens.push(Token::new(word, start, i));
        } else {
            tokens.push(Token::new(c.to_string(), i, i + 1));
            i += 1;
        }
    }
    tokens
}

/// Tokenize into a [`Sentence`]; returns `None` for whitespace-only text.
pub fn tokenize_sentence(text: &str) -> Option<Sentence> {
    let tokens = tokenize(text);
    if tokens.is_empty() {
        None
    } else {
        Some(Sentence::new(tokens))
    }
}

/// Split raw text into sentence strings.
pub fn split_sentences(text: &str) -> Vec<String> {
    let chars: Vec<char> = text.chars().collect();
    let mut sentences = Vec::new();
    let mut start = 0usize;
    let mut i = 0usize;
    while i < chars.len() {
        let c = chars[i];
        if matches!(c, '.' | '?' | '!') {
            // Look ahead: whitespace then an uppercase letter.
            let mut j = i + 1;
            let mut saw_space = false;
            while j < chars.len() && chars[j].is_whitespace() {
                saw_space = true;
                j += 1;
            }
            let upper_next = j < chars.len() && chars[j].is_uppercase();
            let boundary = saw_space && upper_next && !(c == '.' && is_abbreviation(&chars, i));
            if boundary {
                let sentence: String = chars[start..=i].iter().collect();
                let trimmed = sentence.trim();
                if !trimmed.is_empty() {
                    sentences.push(trimmed.to_string());
                }
                start = j;
                i = j;
                continue;
            }
        }
        i += 1;
    }
    let tail: String = chars[start..].iter().collect();
    let tail = tail.trim();
    if !tail.is_empty() {
        sentences.push(tail.to_string());
    }
    sentences
}

/// Is the period at `chars[dot]` part of an abbreviation or initial?
fn is_abbreviation(chars: &[char], dot: usize) -> bool {
    let mut start = dot;
    while start > 0 {
        let p = chars[start - 1];
        if p.is_alphanumeric() || p == '.' {
            start -= 1;
        } else {
            break;
        }
    }
    if start == dot {
        return false;
    }
    let word: String = chars[start..dot].iter().collect();
    // Single initial like "A." or "J."
    if word.chars().count() == 1 && word.chars().next().unwrap().is_uppercase() {
        return true;
    }
    let lowered = word.to_lowercase();
    let lowered = lowered.strip_suffix('.').unwrap_or(&lowered);
    ABBREVIATIONS.contains(&lowered)
}

/// Sentence-split and tokenize a raw abstract.
pub fn segment(text: &str) -> Vec<Sentence> {
    split_sentences(text)
        .iter()
        .filter_map(|s| tokenize_sentence(s))
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    fn words(text: &str) -> Vec<String> {
        tokenize(text).into_iter().map(|t| t.text).collect()
    }

    #[test]
    fn punctuation_splits_off() {
        assert_eq!(words("We measured it."), vec!["We", "measured", "it", "."]);
        assert_eq!(words("alpha(beta)"), vec!["alpha", "(", "beta", ")"]);
    }

    #[test]
    fn internal_joiners_stay_inside() {
        assert_eq!(words("X-ray at 3.5 K"), vec!["X-ray", "at", "3.5", "K"]);
        assert_eq!(words("1,000 samples"), vec!["1,000", "samples"]);
        // Joiner at a token edge does not glue.
        assert_eq!(words("-ray"), vec!["-", "ray"]);
        assert_eq!(words("end."), vec!["end", "."]);
    }

    #[test]
    fn offsets_match_text() {
        let text = "X-ray study.";
        for tok in tokenize(text) {
            let slice: String = text.chars().skip(tok.start).take(tok.end - tok.start).collect();
            assert_eq!(slice, tok.text);
        }
    }

    #[test]
    fn sentence_splitting_basic() {
        let out = split_sentences("We ran a test. Another followed. Done");
        assert_eq!(out, vec!["We ran a test.", "Another followed.", "Done"]);
        // A single capital before the period reads as an initial, not a
        // sentence end.
        let out = split_sentences("We did X. Then more.");
        assert_eq!(out, vec!["We did X. Then more."]);
    }

    #[test]
    fn abbreviations_do_not_split() {
        let out = split_sentences("Results follow, e.g. Figure one. Next sentence.");
        assert_eq!(out.len(), 2);
        let out = split_sentences("As shown by J. Smith, it works. Indeed.");
        assert_eq!(out.len(), 2);
    }

    #[test]
    fn lowercase_continuation_does_not_split() {
        let out = split_sentences("approx. 5 cases");
        assert_eq!(out, vec!["approx. 5 cases"]);
    }

    #[test]
    fn segment_produces_sentences() {
        let sents = segment("We measured X-ray diffraction. The sample melted.");
        assert_eq!(sents.len(), 2);
        assert_eq!(sents[0].tokens[2].text, "X-ray");
    }
}
