use std::fs::File;
use std::io::{BufRead, BufReader, BufWriter, Write};
use std::path::Path;

use serde::de::DeserializeOwned;
use serde::{Deserialize, Serialize};

use super::{CorpusError, Document, MIN_EDU_TOKENS};

/// On-disk document record. `edus` holds byte offsets into `text`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DocumentRecord {
    pub id: String,
    pub text: String,
    #[serde(default)]
    pub reference: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub edus: Option<Vec<(usize, usize)>>,
}

impl DocumentRecord {
    pub fn into_document(self, min_edu_tokens: usize) -> Result<Document, CorpusError> {
        match self.edus {
            Some(spans) => Document::with_spans(self.id, &self.text, self.reference, &spans),
            None => Document::from_text(self.id, &self.text, self.reference, min_edu_tokens),
        }
    }
}

impl From<&Document> for DocumentRecord {
    fn from(doc: &Document) -> Self {
        Self {
            id: doc.id.clone(),
            text: doc.text.clone(),
            reference: doc.reference.clone(),
            edus: Some(doc.edus.iter().map(|e| (e.char_start, e.char_end)).collect()),
        }
    }
}

/// Reads any JSONL file of `T`, skipping blank lines. Errors carry the
/// 1-based line number.
pub fn read_jsonl<T: DeserializeOwned>(path: &Path) -> Result<Vec<T>, CorpusError> {
    Ok(read_numbered(path)?.into_iter().map(|(_, r)| r).collect())
}

fn read_numbered<T: DeserializeOwned>(path: &Path) -> Result<Vec<(usize, T)>, CorpusError> {
    let reader = BufReader::new(File::open(path)?);
    let mut out = Vec::new();
    for (i, line) in reader.lines().enumerate() {
        let line = line?;
        if line.trim().is_empty() {
            continue;
        }
        let rec = serde_json::from_str(&line).map_err(|e| CorpusError::Malformed {
            line: i + 1,
            message: e.to_string(),
        })?;
        out.push((i + 1, rec));
    }
    Ok(out)
}

pub fn write_jsonl<T: Serialize>(path: &Path, records: &[T]) -> Result<(), CorpusError> {
    let mut w = BufWriter::new(File::create(path)?);
    for r in records {
        serde_json::to_writer(&mut w, r).map_err(std::io::Error::from)?;
        w.write_all(b"\n")?;
    }
    w.flush()?;
    Ok(())
}

/// Loads documents; supplied unit spans are honored verbatim, otherwise the
/// text is segmented with the default token minimum.
pub fn load_jsonl(path: &Path) -> Result<Vec<Document>, CorpusError> {
    read_numbered::<DocumentRecord>(path)?
        .into_iter()
        .map(|(line, r)| {
            r.into_document(MIN_EDU_TOKENS)
                .map_err(|e| CorpusError::Malformed { line, message: e.to_string() })
        })
        .collect()
}

pub fn save_jsonl(path: &Path, docs: &[Document]) -> Result<(), CorpusError> {
    let records: Vec<DocumentRecord> = docs.iter().map(DocumentRecord::from).collect();
    write_jsonl(path, &records)
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::io::Write;

    fn write(lines: &str) -> tempfile::NamedTempFile {
        let mut f = tempfile::NamedTempFile::new().unwrap();
        f.write_all(lines.as_bytes()).unwrap();
        f
    }

    #[test]
    fn empty_file_is_empty_list() {
        let f = write("");
        assert!(load_jsonl(f.path()).unwrap().is_empty());
    }

    #[test]
    fn explicit_spans_verbatim() {
        let f = write(
            r#"{"id":"a","text":"Alpha beta gamma delta eps.","reference":null,"edus":[[0,10],[10,27]]}"#,
        );
        let docs = load_jsonl(f.path()).unwrap();
        assert_eq!(docs[0].num_edus(), 2);
        assert_eq!(docs[0].edus[1].char_start, 10);
    }

    #[test]
    fn overlapping_spans_rejected() {
        let f = write(
            "{\"id\":\"ok\",\"text\":\"Fine text here.\"}\n\n{\"id\":\"a\",\"text\":\"Alpha beta gamma delta eps.\",\"reference\":null,\"edus\":[[0,10],[5,25]]}\n",
        );
        let err = load_jsonl(f.path()).unwrap_err();
        assert!(matches!(err, CorpusError::Malformed { line: 3, .. }), "{err}");
    }

    #[test]
    fn malformed_line_named() {
        let f = write("{\"id\":\"ok\",\"text\":\"Fine.\"}\n\n{not json}\n");
        match load_jsonl(f.path()).unwrap_err() {
            CorpusError::Malformed { line, .. } => assert_eq!(line, 3),
            e => panic!("unexpected {e}"),
        }
    }

    #[test]
    fn save_then_load_preserves_segmentation() {
        let doc = Document::from_text(
            "d1",
            "The budget passed on monday, but the council delayed the vote. Nobody objected to it.",
            Some("Budget passed.".into()),
            5,
        )
        .unwrap();
        let f = tempfile::NamedTempFile::new().unwrap();
        save_jsonl(f.path(), std::slice::from_ref(&doc)).unwrap();
        assert_eq!(load_jsonl(f.path()).unwrap(), vec![doc]);
    }
}
