//! Rule-based sentence and discourse-unit segmentation.
//!
//! Sentences end at `.`, `!` or `?` followed by whitespace and an uppercase
//! letter. Inside a sentence a new unit starts at
//!
//! * a coordinating conjunction (`and but or so yet`) whose previous word ends
//!   with a comma,
//! * any word following a semicolon,
//! * a subordinating or relative marker (`who which that because although
//!   while when`) whose previous word ends with a comma.
//!
//! Units shorter than the token minimum are merged into the following unit;
//! a short final unit merges backwards.

use std::ops::Range;

use super::tokenize::token_count;

const COORDINATORS: &[&str] = &["and", "but", "or", "so", "yet"];
const SUBORDINATORS: &[&str] = &["who", "which", "that", "because", "although", "while", "when"];

/// Byte ranges of the sentences in `text`, trimmed of surrounding whitespace.
pub fn split_sentences(text: &str) -> Vec<Range<usize>> {
    let mut out = Vec::new();
    let chars: Vec<(usize, char)> = text.char_indices().collect();
    let mut start: Option<usize> = None;
    let mut i = 0;
    while i < chars.len() {
        let (pos, c) = chars[i];
        if start.is_none() {
            if c.is_whitespace() {
                i += 1;
                continue;
            }
            start = Some(pos);
        }
        if matches!(c, '.' | '!' | '?') {
            let mut j = i + 1;
            while j < chars.len() && chars[j].1.is_whitespace() {
                j += 1;
            }
            if j > i + 1 && j < chars.len() && chars[j].1.is_uppercase() {
                out.push(start.take().unwrap()..pos + c.len_utf8());
                i = j;
                continue;
            }
        }
        i += 1;
    }
    if let Some(s) = start {
        let end = s + text[s..].trim_end().len();
        if end > s {
            out.push(s..end);
        }
    }
    out
}

fn bare_word(chunk: &str) -> String {
    chunk
        .trim_matches(|c: char| !c.is_alphanumeric())
        .to_lowercase()
}

/// Unit start offsets (absolute) inside one sentence, before merging.
fn split_points(text: &str, sentence: &Range<usize>) -> Vec<usize> {
    let body = &text[sentence.clone()];
    let mut points = Vec::new();
    let mut prev: Option<&str> = None;
    for (off, chunk) in chunk_offsets(body) {
        if let Some(p) = prev {
            let word = bare_word(chunk);
            let after_comma = p.ends_with(',');
            let split = p.ends_with(';')
                || (after_comma && COORDINATORS.contains(&word.as_str()))
                || (after_comma && SUBORDINATORS.contains(&word.as_str()));
            if split {
                points.push(sentence.start + off);
            }
        }
        prev = Some(chunk);
    }
    points
}

fn chunk_offsets(s: &str) -> impl Iterator<Item = (usize, &str)> {
    let base = s.as_ptr() as usize;
    s.split_whitespace()
        .map(move |chunk| (chunk.as_ptr() as usize - base, chunk))
}

/// Splits one sentence into contiguous unit ranges covering it exactly,
/// applying the merge rule for units under `min_tokens`.
pub fn split_units(text: &str, sentence: &Range<usize>, min_tokens: usize) -> Vec<Range<usize>> {
    let mut bounds = vec![sentence.start];
    bounds.extend(split_points(text, sentence));
    bounds.push(sentence.end);
    let mut pieces: Vec<Range<usize>> = bounds.windows(2).map(|w| w[0]..w[1]).collect();

    let mut i = 0;
    while pieces.len() > 1 && i < pieces.len() {
        if token_count(&text[pieces[i].clone()]) >= min_tokens {
            i += 1;
            continue;
        }
        if i + 1 < pieces.len() {
            let next = pieces.remove(i + 1);
            pieces[i].end = next.end;
        } else {
            let last = pieces.remove(i);
            pieces[i - 1].end = last.end;
            i -= 1;
        }
    }
    pieces
}
