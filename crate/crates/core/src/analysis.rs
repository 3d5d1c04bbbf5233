//! Candidate-set diagnostics: salience, uniqueness, fusion, plan adherence,
//! per-beam consistency and length quartiles, with CSV output.

use std::collections::BTreeSet;
use std::fmt::Write as _;
use std::fs;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::abstractor::Candidate;
use crate::corpus::{split_sentences, Document};
use crate::plans::{derive_dcp, ContentPlan, PlanError};
use crate::rouge::rouge_n;

#[derive(Debug, Error)]
pub enum AnalysisError {
    #[error("candidate text has no sentences")]
    NoSentences,
    #[error(transparent)]
    Plan(#[from] PlanError),
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

/// ROUGE-1 F1 of the text of `dcp` against `reference`; 0 for an empty
/// plan or reference.
pub fn salience(dcp: &ContentPlan, doc: &Document, reference: &[String]) -> f64 {
    if dcp.is_empty() || reference.is_empty() {
        return 0.0;
    }
    rouge_n(&doc.tokens_of(&dcp.edu_indices), reference, 1).f1
}

/// Number of distinct unit sets.
pub fn uniqueness(dcps: &[ContentPlan]) -> usize {
    dcps.iter().map(|p| p.edu_indices.iter().copied().collect::<BTreeSet<_>>()).collect::<BTreeSet<_>>().len()
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Fusion {
    pub plan_sentences: usize,
    pub summary_sentences: usize,
    pub ratio: f64,
    /// Set when the derived plan was empty (ratio forced to 0).
    pub empty_plan: bool,
}

/// Distinct source sentences behind `dcp` divided by the sentence count of
/// `summary`.
pub fn fusion_ratio(dcp: &ContentPlan, doc: &Document, summary: &str) -> Result<Fusion, AnalysisError> {
    let summary_sentences = split_sentences(summary).len();
    if summary_sentences == 0 {
        return Err(AnalysisError::NoSentences);
    }
    dcp.validate(doc.num_edus())?;
    let plan_sentences = dcp.edu_indices.iter().map(|&i| doc.edus[i].sentence_index).collect::<BTreeSet<_>>().len();
    Ok(Fusion {
        plan_sentences,
        summary_sentences,
        ratio: plan_sentences as f64 / summary_sentences as f64,
        empty_plan: dcp.is_empty(),
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct Adherence {
    pub recall: f64,
    pub precision: f64,
    pub f1: f64,
}

/// Overlap of the plan given to the abstractor (`ecp`) with the plan its
/// output realizes (`dcp`).
pub fn plan_adherence(ecp: &ContentPlan, dcp: &ContentPlan) -> Adherence {
    let e: BTreeSet<usize> = ecp.edu_indices.iter().copied().collect();
    let d: BTreeSet<usize> = dcp.edu_indices.iter().copied().collect();
    let both = e.intersection(&d).count() as f64;
    let ratio = |n: usize| if n == 0 { 0.0 } else { both / n as f64 };
    let (recall, precision) = (ratio(e.len()), ratio(d.len()));
    let f1 = if recall + precision == 0.0 { 0.0 } else { 2.0 * recall * precision / (recall + precision) };
    Adherence { recall, precision, f1 }
}

/// Per-set measurements. Reference-dependent entries are `None` when the
/// document has no reference.
#[derive(Debug, Clone, PartialEq)]
pub struct SetMetrics {
    pub doc_id: String,
    pub salience: Vec<Option<f64>>,
    pub uniqueness: usize,
    pub fusion_ratio: Option<f64>,
    pub adherence: Option<Adherence>,
    pub mean_r1_by_beam: Vec<Option<f64>>,
    pub mean_len_by_beam: Vec<usize>,
    pub top_r1: Option<f64>,
}

/// Measures one candidate set given in beam order. `top` is the position
/// of the re-ranked winner (defaults to the first candidate).
pub fn set_metrics(doc: &Document, candidates: &[Candidate], top: Option<usize>) -> Result<SetMetrics, AnalysisError> {
    let reference = doc.reference_tokens();
    let mut dcps = Vec::with_capacity(candidates.len());
    let mut saliences = Vec::new();
    let mut r1 = Vec::new();
    let mut fusions = Vec::new();
    let mut adherence = Vec::new();
    for c in candidates {
        let dcp = if c.tokens.is_empty() { ContentPlan::null() } else { derive_dcp(doc, &c.tokens)? };
        saliences.push(reference.as_ref().map(|r| salience(&dcp, doc, r)));
        r1.push(reference.as_ref().map(|r| rouge_n(&c.tokens, r, 1).f1));
        if let Ok(f) = fusion_ratio(&dcp, doc, &c.text) {
            fusions.push(f.ratio);
        }
        if let Some(ecp) = c.plan.as_ref().filter(|p| !p.is_null()) {
            adherence.push(plan_adherence(ecp, &dcp));
        }
        dcps.push(dcp);
    }
    let n = adherence.len().max(1) as f64;
    let mean_adherence = (!adherence.is_empty()).then(|| Adherence {
        recall: adherence.iter().map(|a| a.recall).sum::<f64>() / n,
        precision: adherence.iter().map(|a| a.precision).sum::<f64>() / n,
        f1: adherence.iter().map(|a| a.f1).sum::<f64>() / n,
    });
    let top_r1 = r1.get(top.unwrap_or(0)).copied().flatten();
    Ok(SetMetrics {
        doc_id: doc.id.clone(),
        salience: saliences,
        uniqueness: uniqueness(&dcps),
        fusion_ratio: mean(&fusions),
        adherence: mean_adherence,
        mean_r1_by_beam: r1,
        mean_len_by_beam: candidates.iter().map(|c| c.tokens.len()).collect(),
        top_r1,
    })
}

fn mean(xs: &[f64]) -> Option<f64> {
    (!xs.is_empty()).then(|| xs.iter().sum::<f64>() / xs.len() as f64)
}

fn mean_opt<'a>(xs: impl Iterator<Item = &'a Option<f64>>) -> Option<f64> {
    mean(&xs.flatten().copied().collect::<Vec<_>>())
}

/// Document property the length quartiles are keyed on.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum QuartileKey {
    /// Number of source units.
    #[default]
    SourceUnits,
    /// Reference token count.
    SummaryLength,
}

/// One document's candidates in beam order with the re-ranked winner.
#[derive(Debug, Clone)]
pub struct SetInput {
    pub doc: Document,
    pub candidates: Vec<Candidate>,
    pub top: Option<usize>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct MethodReport {
    pub method: String,
    pub sets: Vec<SetMetrics>,
    pub mean_r1_by_beam: Vec<Option<f64>>,
    pub mean_len_by_beam: Vec<Option<f64>>,
    pub salience_by_beam: Vec<Option<f64>>,
    pub uniqueness: Option<f64>,
    pub fusion_ratio: Option<f64>,
    pub adherence: Option<Adherence>,
    pub top_r1: Option<f64>,
    /// Mean top-ranked ROUGE-1 per quartile, smallest key first.
    pub quartiles: [Option<f64>; 4],
}

#[derive(Debug, Clone, PartialEq)]
pub struct Report {
    pub methods: Vec<MethodReport>,
    /// Mean fusion ratio of the references' own derived plans.
    pub reference_fusion: Option<f64>,
}

/// Quartile (0..4) of every item by `keys`, ties kept in input order.
pub fn quartiles(keys: &[usize]) -> Vec<usize> {
    let mut order: Vec<usize> = (0..keys.len()).collect();
    order.sort_by_key(|&i| keys[i]);
    let mut out = vec![0; keys.len()];
    for (rank, &i) in order.iter().enumerate() {
        out[i] = 4 * rank / keys.len();
    }
    out
}

pub fn method_report(method: &str, sets: &[SetInput], key: QuartileKey) -> Result<MethodReport, AnalysisError> {
    let metrics: Vec<SetMetrics> =
        sets.iter().map(|s| set_metrics(&s.doc, &s.candidates, s.top)).collect::<Result<_, _>>()?;
    let width = metrics.iter().map(|m| m.mean_r1_by_beam.len()).max().unwrap_or(0);
    let by_beam = |f: &dyn Fn(&SetMetrics, usize) -> Option<f64>| -> Vec<Option<f64>> {
        (0..width).map(|b| mean(&metrics.iter().filter_map(|m| f(m, b)).collect::<Vec<_>>())).collect()
    };
    let mean_r1_by_beam = by_beam(&|m, b| m.mean_r1_by_beam.get(b).copied().flatten());
    let mean_len_by_beam = by_beam(&|m, b| m.mean_len_by_beam.get(b).map(|&l| l as f64));
    let salience_by_beam = by_beam(&|m, b| m.salience.get(b).copied().flatten());
    let adherence: Vec<Adherence> = metrics.iter().filter_map(|m| m.adherence).collect();
    let n = adherence.len() as f64;
    let adherence = (!adherence.is_empty()).then(|| Adherence {
        recall: adherence.iter().map(|a| a.recall).sum::<f64>() / n,
        precision: adherence.iter().map(|a| a.precision).sum::<f64>() / n,
        f1: adherence.iter().map(|a| a.f1).sum::<f64>() / n,
    });
    let keys: Vec<usize> = sets
        .iter()
        .map(|s| match key {
            QuartileKey::SourceUnits => s.doc.num_edus(),
            QuartileKey::SummaryLength => s.doc.reference_tokens().map_or(0, |r| r.len()),
        })
        .collect();
    let bins = quartiles(&keys);
    let quartiles = std::array::from_fn(|q| {
        mean_opt(metrics.iter().zip(&bins).filter(|(_, &b)| b == q).map(|(m, _)| &m.top_r1))
    });
    Ok(MethodReport {
        method: method.to_string(),
        mean_r1_by_beam,
        mean_len_by_beam,
        salience_by_beam,
        uniqueness: mean(&metrics.iter().map(|m| m.uniqueness as f64).collect::<Vec<_>>()),
        fusion_ratio: mean(&metrics.iter().filter_map(|m| m.fusion_ratio).collect::<Vec<_>>()),
        adherence,
        top_r1: mean_opt(metrics.iter().map(|m| &m.top_r1)),
        quartiles,
        sets: metrics,
    })
}

/// Mean fusion ratio of every reference against its own derived plan.
pub fn reference_fusion(docs: &[&Document]) -> Option<f64> {
    let ratios: Vec<f64> = docs
        .iter()
        .filter_map(|d| {
            let reference = d.reference.as_ref()?;
            let dcp = derive_dcp(d, &d.reference_tokens()?).ok()?;
            fusion_ratio(&dcp, d, reference).ok().map(|f| f.ratio)
        })
        .collect();
    mean(&ratios)
}

pub fn report(inputs: &[(String, Vec<SetInput>)], key: QuartileKey) -> Result<Report, AnalysisError> {
    let methods = inputs.iter().map(|(m, sets)| method_report(m, sets, key)).collect::<Result<_, _>>()?;
    let mut seen = BTreeSet::new();
    let docs: Vec<&Document> =
        inputs.iter().flat_map(|(_, s)| s.iter().map(|s| &s.doc)).filter(|d| seen.insert(d.id.clone())).collect();
    Ok(Report { methods, reference_fusion: reference_fusion(&docs) })
}

fn cell(v: Option<f64>) -> String {
    v.map_or_else(|| "NA".to_string(), |x| format!("{x:.6}"))
}

impl Report {
    /// Writes every table into `dir` and returns the written paths.
    pub fn write_csv(&self, dir: &Path) -> Result<Vec<PathBuf>, AnalysisError> {
        fs::create_dir_all(dir)?;
        let mut written = Vec::new();
        let mut put = |name: String, body: String| -> Result<(), AnalysisError> {
            let path = dir.join(name);
            fs::write(&path, body)?;
            written.push(path);
            Ok(())
        };
        let mut uniq = String::from("method,uniqueness\n");
        let mut fusion = String::from("method,fusion_ratio\n");
        let mut adherence = String::from("method,adherence_r,adherence_p,adherence_f1\n");
        let mut top = String::from("method,mean_r1\n");
        for m in &self.methods {
            let mut beams = String::from("beam,mean_r1,mean_len\n");
            let mut sal = String::from("beam,salience\n");
            for b in 0..m.mean_r1_by_beam.len() {
                let _ = writeln!(beams, "{},{},{}", b + 1, cell(m.mean_r1_by_beam[b]), cell(m.mean_len_by_beam[b]));
                let _ = writeln!(sal, "{},{}", b + 1, cell(m.salience_by_beam[b]));
            }
            put(format!("beam_consistency_{}.csv", m.method), beams)?;
            put(format!("salience_{}.csv", m.method), sal)?;
            let mut quart = String::from("quartile,mean_r1\n");
            for (q, v) in m.quartiles.iter().enumerate() {
                let _ = writeln!(quart, "{},{}", q + 1, cell(*v));
            }
            put(format!("quartiles_{}.csv", m.method), quart)?;
            let _ = writeln!(uniq, "{},{}", m.method, cell(m.uniqueness));
            let _ = writeln!(fusion, "{},{}", m.method, cell(m.fusion_ratio));
            let _ = writeln!(top, "{},{}", m.method, cell(m.top_r1));
            let a = m.adherence;
            let _ = writeln!(
                adherence,
                "{},{},{},{}",
                m.method,
                cell(a.map(|a| a.recall)),
                cell(a.map(|a| a.precision)),
                cell(a.map(|a| a.f1))
            );
        }
        let _ = writeln!(fusion, "reference,{}", cell(self.reference_fusion));
        put("uniqueness.csv".into(), uniq)?;
        put("fusion.csv".into(), fusion)?;
        put("adherence.csv".into(), adherence)?;
        put("top_ranked.csv".into(), top)?;
        Ok(written)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::abstractor::Method;
    use crate::corpus::tokenize;
    use crate::plans::Provenance;
    use crate::test_support::doc_from_units;

    fn plan(v: &[usize]) -> ContentPlan {
        ContentPlan::new(v.to_vec(), Provenance::Derived)
    }

    fn words(s: &str) -> Vec<String> {
        tokenize(s)
    }

    #[test]
    fn salience_examples() {
        let doc = doc_from_units(&["a b", "c d"]);
        assert_eq!(salience(&plan(&[0]), &doc, &words("a b")), 1.0);
        assert_eq!(salience(&plan(&[]), &doc, &words("a b")), 0.0);
        let doc = doc_from_units(&["a b"]);
        assert_eq!(salience(&plan(&[0]), &doc, &words("a c")), 0.5);
    }

    #[test]
    fn uniqueness_examples() {
        assert_eq!(uniqueness(&vec![plan(&[1, 2]); 16]), 1);
        let distinct: Vec<ContentPlan> = (0..16).map(|i| plan(&[i])).collect();
        assert_eq!(uniqueness(&distinct), 16);
        let unordered = [
            ContentPlan { edu_indices: vec![0, 1], provenance: Provenance::Derived, log_prob: None },
            ContentPlan { edu_indices: vec![1, 0], provenance: Provenance::Derived, log_prob: None },
            plan(&[2]),
        ];
        assert_eq!(uniqueness(&unordered), 2);
    }

    #[test]
    fn adherence_examples() {
        let a = plan_adherence(&plan(&[0, 2]), &plan(&[0, 2]));
        assert_eq!((a.recall, a.precision, a.f1), (1.0, 1.0, 1.0));
        let a = plan_adherence(&plan(&[0, 2]), &plan(&[0, 1]));
        assert_eq!((a.recall, a.precision, a.f1), (0.5, 0.5, 0.5));
        let a = plan_adherence(&plan(&[0]), &plan(&[1]));
        assert_eq!((a.recall, a.precision, a.f1), (0.0, 0.0, 0.0));
        assert_eq!(plan_adherence(&plan(&[]), &plan(&[])), Adherence::default());
    }

    fn three_sentence_doc() -> Document {
        let text = "The council met on monday. The mayor spoke at length. The board voted against it.";
        Document::from_text("f", text, Some("The council met. The board voted.".into()), 3).unwrap()
    }

    #[test]
    fn fusion_examples() {
        let doc = three_sentence_doc();
        assert_eq!(doc.num_edus(), 3);
        let two = fusion_ratio(&plan(&[0, 2]), &doc, "One. Two.").unwrap();
        assert_eq!(two.ratio, 1.0);
        let three = fusion_ratio(&plan(&[0, 1, 2]), &doc, "One. Two.").unwrap();
        assert_eq!(three.ratio, 1.5);
        let empty = fusion_ratio(&plan(&[]), &doc, "One.").unwrap();
        assert!(empty.empty_plan && empty.ratio == 0.0);
        assert!(matches!(fusion_ratio(&plan(&[0]), &doc, "  "), Err(AnalysisError::NoSentences)));
    }

    #[test]
    fn quartile_bins() {
        assert_eq!(quartiles(&[5, 1, 3, 7]), vec![2, 0, 1, 3]);
        assert_eq!(quartiles(&[1]), vec![0]);
        assert_eq!(quartiles(&[2, 2, 2, 2, 2, 2, 2, 2]), vec![0, 0, 1, 1, 2, 2, 3, 3]);
    }

    fn cand(doc: &Document, beam: usize, text: &str, plan: Option<ContentPlan>) -> Candidate {
        Candidate {
            doc_id: doc.id.clone(),
            method: Method::Pga,
            beam_index: beam,
            text: text.into(),
            tokens: tokenize(text),
            plan,
            log_likelihood: 0.0,
        }
    }

    #[test]
    fn perfect_candidates_have_full_salience_and_tables_are_written() {
        let doc = three_sentence_doc();
        let reference = doc.reference.clone().unwrap();
        let set: Vec<Candidate> = (0..3).map(|b| cand(&doc, b, &reference, Some(plan(&[0, 2])))).collect();
        let m = set_metrics(&doc, &set, None).unwrap();
        assert_eq!(m.uniqueness, 1);
        let oracle = derive_dcp(&doc, &doc.reference_tokens().unwrap()).unwrap();
        let expected = salience(&oracle, &doc, &doc.reference_tokens().unwrap());
        assert!(m.salience.iter().all(|s| *s == Some(expected)));
        assert_eq!(m.top_r1, Some(1.0));

        let mut bare = doc.clone();
        bare.reference = None;
        let inputs = vec![
            ("pga".to_string(), vec![SetInput { doc: doc.clone(), candidates: set.clone(), top: Some(0) }]),
            ("beam".to_string(), vec![SetInput { doc: bare.clone(), candidates: vec![cand(&bare, 0, "The mayor spoke.", None)], top: None }]),
        ];
        let r = report(&inputs, QuartileKey::SourceUnits).unwrap();
        let dir = tempfile::tempdir().unwrap();
        let files = r.write_csv(dir.path()).unwrap();
        assert_eq!(files.len(), 3 * 2 + 4);
        let read = |n: &str| fs::read_to_string(dir.path().join(n)).unwrap();
        assert!(read("beam_consistency_pga.csv").starts_with("beam,mean_r1,mean_len\n1,1.000000,"));
        assert!(read("beam_consistency_beam.csv").starts_with("beam,mean_r1,mean_len\n1,NA,"));
        assert_eq!(read("adherence.csv").lines().nth(2), Some("beam,NA,NA,NA"));
        assert!(read("fusion.csv").lines().last().unwrap().starts_with("reference,"));
        assert_eq!(read("quartiles_pga.csv"), "quartile,mean_r1\n1,1.000000\n2,NA\n3,NA\n4,NA\n");
        assert_eq!(read("uniqueness.csv"), "method,uniqueness\npga,1.000000\nbeam,1.000000\n");
        assert!(read("salience_pga.csv").starts_with("beam,salience\n"));
        assert!(read("top_ranked.csv").starts_with("method,mean_r1\npga,1.000000\n"));
    }
}
