//! Plan-guided abstractive summarization candidates.
//!
//! A copy-style planner proposes distinct sets of elementary discourse units
//! (content plans); a plan-decorated encoder-decoder realizes one abstract per
//! plan; a length-normalized likelihood scorer trained with a pairwise margin
//! loss re-ranks the candidates. The [`analysis`] module measures candidate
//! sets (salience, uniqueness, fusion, plan adherence).

pub mod abstractor;
pub mod analysis;
pub mod corpus;
pub mod llm;
pub mod planner;
pub mod plans;
pub mod reranker;
pub mod rouge;
pub mod seq2seq;
pub mod synth;

#[cfg(test)]
pub(crate) mod test_support {
    use crate::corpus::Document;

    /// A single-sentence document whose units are exactly `units`.
    pub(crate) fn doc_from_units(units: &[&str]) -> Document {
        let text = units.join(" ");
        let mut spans = Vec::new();
        let mut start = 0;
        for (i, u) in units.iter().enumerate() {
            let end = if i + 1 == units.len() { text.len() } else { start + u.len() + 1 };
            spans.push((start, end));
            start = end;
        }
        Document::with_spans("t", &text, None, &spans).unwrap()
    }
}
