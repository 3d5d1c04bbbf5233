//! Documents, discourse-unit segmentation, tokenization and JSONL IO.

mod jsonl;
mod segment;
mod tokenize;

use std::ops::Range;

use serde::{Deserialize, Serialize};
use thiserror::Error;

pub use jsonl::{load_jsonl, read_jsonl, save_jsonl, write_jsonl, DocumentRecord};
pub use segment::split_sentences;
pub use tokenize::{detokenize, token_count, tokenize};

/// Default minimum unit length in tokens.
pub const MIN_EDU_TOKENS: usize = 5;

#[derive(Debug, Error)]
pub enum CorpusError {
    #[error("document text is empty or whitespace-only")]
    EmptyText,
    #[error("line {line}: {message}")]
    Malformed { line: usize, message: String },
    #[error("invalid unit spans: {0}")]
    InvalidSpans(String),
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

/// One elementary discourse unit. Offsets are byte offsets into the
/// document text.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct EduSpan {
    pub index: usize,
    pub sentence_index: usize,
    pub char_start: usize,
    pub char_end: usize,
    pub token_count: usize,
}

impl EduSpan {
    pub fn range(&self) -> Range<usize> {
        self.char_start..self.char_end
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Document {
    pub id: String,
    pub text: String,
    pub sentences: Vec<Range<usize>>,
    pub edus: Vec<EduSpan>,
    pub reference: Option<String>,
    /// Tokens of every sentence.
    pub tokens: Vec<Vec<String>>,
    edu_tokens: Vec<Vec<String>>,
}

/// Segments `text` into sentences and discourse units.
pub fn segment(text: &str, min_edu_tokens: usize) -> Result<Document, CorpusError> {
    Document::from_text("", text, None, min_edu_tokens)
}

impl Document {
    pub fn from_text(
        id: impl Into<String>,
        text: &str,
        reference: Option<String>,
        min_edu_tokens: usize,
    ) -> Result<Self, CorpusError> {
        if text.trim().is_empty() {
            return Err(CorpusError::EmptyText);
        }
        let sentences = split_sentences(text);
        let spans = sentences
            .iter()
            .map(|s| segment::split_units(text, s, min_edu_tokens))
            .collect();
        Ok(Self::assemble(id.into(), text.to_string(), reference, sentences, spans))
    }

    /// Builds a document from externally supplied unit spans, which are kept
    /// verbatim but must tile the rule-based sentences exactly.
    pub fn with_spans(
        id: impl Into<String>,
        text: &str,
        reference: Option<String>,
        spans: &[(usize, usize)],
    ) -> Result<Self, CorpusError> {
        if text.trim().is_empty() {
            return Err(CorpusError::EmptyText);
        }
        let sentences = split_sentences(text);
        let mut per_sentence: Vec<Vec<Range<usize>>> = vec![Vec::new(); sentences.len()];
        let mut prev_end = 0;
        for (i, &(start, end)) in spans.iter().enumerate() {
            if start >= end || end > text.len() {
                return Err(CorpusError::InvalidSpans(format!(
                    "span {i} [{start}, {end}) is empty or out of bounds"
                )));
            }
            if !text.is_char_boundary(start) || !text.is_char_boundary(end) {
                return Err(CorpusError::InvalidSpans(format!(
                    "span {i} [{start}, {end}) splits a UTF-8 character"
                )));
            }
            if start < prev_end {
                return Err(CorpusError::InvalidSpans(format!(
                    "span {i} [{start}, {end}) overlaps or precedes the previous span"
                )));
            }
            prev_end = end;
            let Some(si) = sentences.iter().position(|s| s.start <= start && end <= s.end) else {
                return Err(CorpusError::InvalidSpans(format!(
                    "span {i} [{start}, {end}) does not lie inside a single sentence"
                )));
            };
            per_sentence[si].push(start..end);
        }
        for (si, (sent, units)) in sentences.iter().zip(&per_sentence).enumerate() {
            let tiles = units.first().map(|u| u.start) == Some(sent.start)
                && units.last().map(|u| u.end) == Some(sent.end)
                && units.windows(2).all(|w| w[0].end == w[1].start);
            if !tiles {
                return Err(CorpusError::InvalidSpans(format!(
                    "spans do not cover sentence {si} [{}, {}) without gaps",
                    sent.start, sent.end
                )));
            }
        }
        Ok(Self::assemble(id.into(), text.to_string(), reference, sentences, per_sentence))
    }

    fn assemble(
        id: String,
        text: String,
        reference: Option<String>,
        sentences: Vec<Range<usize>>,
        spans: Vec<Vec<Range<usize>>>,
    ) -> Self {
        let mut edus = Vec::new();
        let mut edu_tokens = Vec::new();
        for (si, units) in spans.into_iter().enumerate() {
            for r in units {
                let toks = tokenize(&text[r.clone()]);
                edus.push(EduSpan {
                    index: edus.len(),
                    sentence_index: si,
                    char_start: r.start,
                    char_end: r.end,
                    token_count: toks.len(),
                });
                edu_tokens.push(toks);
            }
        }
        let tokens = sentences.iter().map(|s| tokenize(&text[s.clone()])).collect();
        Self { id, text, sentences, edus, reference, tokens, edu_tokens }
    }

    pub fn num_edus(&self) -> usize {
        self.edus.len()
    }

    pub fn edu_text(&self, index: usize) -> &str {
        &self.text[self.edus[index].range()]
    }

    pub fn edu_tokens(&self, index: usize) -> &[String] {
        &self.edu_tokens[index]
    }

    /// Tokens of the given units concatenated in document order.
    pub fn tokens_of(&self, indices: &[usize]) -> Vec<String> {
        let mut sorted = indices.to_vec();
        sorted.sort_unstable();
        sorted.dedup();
        sorted.iter().flat_map(|&i| self.edu_tokens[i].iter().cloned()).collect()
    }

    /// All document tokens in order.
    pub fn all_tokens(&self) -> Vec<String> {
        self.edu_tokens.iter().flatten().cloned().collect()
    }

    pub fn reference_tokens(&self) -> Option<Vec<String>> {
        self.reference.as_deref().map(tokenize)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn check_invariants(doc: &Document) {
        let mut prev = 0;
        for s in &doc.sentences {
            assert!(s.start >= prev && s.start < s.end && s.end <= doc.text.len());
            prev = s.end;
        }
        for (i, e) in doc.edus.iter().enumerate() {
            assert_eq!(e.index, i);
        }
        for (si, s) in doc.sentences.iter().enumerate() {
            let units: Vec<_> = doc.edus.iter().filter(|e| e.sentence_index == si).collect();
            assert!(!units.is_empty(), "sentence {si} has no units");
            let joined: String = units.iter().map(|e| &doc.text[e.range()]).collect();
            assert_eq!(joined, &doc.text[s.clone()]);
            let unit_tokens: Vec<&String> = units.iter().flat_map(|e| doc.edu_tokens(e.index)).collect();
            assert_eq!(unit_tokens, doc.tokens[si].iter().collect::<Vec<_>>(), "unit tokens differ from sentence tokens");
            let sentence_tokens = doc.tokens[si].len();
            for e in &units {
                assert!(
                    e.token_count >= MIN_EDU_TOKENS || sentence_tokens < MIN_EDU_TOKENS,
                    "short unit {:?} in {:?}",
                    &doc.text[e.range()],
                    &doc.text[s.clone()]
                );
            }
        }
    }

    #[test]
    fn worked_examples() {
        let d = segment(
            "The committee approved the budget, but several members who opposed the plan walked out.",
            5,
        )
        .unwrap();
        assert_eq!(d.num_edus(), 2);
        assert!(d.edu_text(1).starts_with("but several"));

        let d = segment("The sky is blue today.", 5).unwrap();
        assert_eq!(d.num_edus(), 1);
        assert_eq!(d.edu_text(0), "The sky is blue today.");

        let d = segment("He ran, but she stayed home all day.", 5).unwrap();
        assert_eq!(d.num_edus(), 1);
        check_invariants(&d);
    }

    #[test]
    fn rejects_blank_text() {
        assert!(matches!(segment("  \n\t", 5), Err(CorpusError::EmptyText)));
        assert!(matches!(segment("", 5), Err(CorpusError::EmptyText)));
    }

    #[test]
    fn supplied_spans() {
        let text = "Alpha beta gamma delta eps.";
        assert_eq!(text.len(), 27);
        let d = Document::with_spans("x", text, None, &[(0, 10), (10, 27)]).unwrap();
        assert_eq!(d.num_edus(), 2);
        assert_eq!(d.edu_text(0), "Alpha beta");
        assert!(Document::with_spans("x", text, None, &[(0, 10), (5, 27)]).is_err());
        assert!(Document::with_spans("x", text, None, &[(0, 10), (11, 27)]).is_err());
        assert!(Document::with_spans("x", text, None, &[(0, 10)]).is_err());
    }

    #[test]
    fn tokens_of_uses_document_order() {
        let d = segment("The first clause is here, and the second clause follows it.", 5).unwrap();
        assert_eq!(d.num_edus(), 2);
        assert_eq!(d.tokens_of(&[1, 0]), d.all_tokens());
    }

    proptest! {
        #[test]
        fn invariants_hold_for_random_ascii(text in "[ -~]{1,500}") {
            prop_assume!(!text.trim().is_empty());
            let doc = segment(&text, MIN_EDU_TOKENS).unwrap();
            check_invariants(&doc);
            prop_assert_eq!(segment(&text, MIN_EDU_TOKENS).unwrap(), doc);
        }

        #[test]
        fn invariants_hold_for_clausal_text(
            words in prop::collection::vec(
                prop::sample::select(vec![
                    "The", "cat", "sat,", "and", "but", "which", "who", "ran;", "home.", "Then",
                    "it", "rained", "when", "so,", "yet", "x", "Big!", "dogs?",
                ]),
                1..80,
            )
        ) {
            let text = words.join(" ");
            let doc = segment(&text, MIN_EDU_TOKENS).unwrap();
            check_invariants(&doc);
        }
    }
}
