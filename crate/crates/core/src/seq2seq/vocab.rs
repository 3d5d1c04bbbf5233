use std::collections::{BTreeSet, HashMap};

use serde::{Deserialize, Serialize};

pub const PAD: usize = 0;
pub const BOS: usize = 1;
pub const EOS: usize = 2;
pub const UNK: usize = 3;
pub const EDU_START: usize = 4;
pub const EDU_END: usize = 5;
pub const EOE: usize = 6;

pub const SPECIALS: [&str; 7] = ["<pad>", "<bos>", "<eos>", "<unk>", "<e>", "</e>", "<eoe>"];

/// Word-level vocabulary with the special symbols at fixed ids.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(from = "Vec<String>", into = "Vec<String>")]
pub struct Vocab {
    tokens: Vec<String>,
    index: HashMap<String, usize>,
}

impl From<Vec<String>> for Vocab {
    fn from(tokens: Vec<String>) -> Self {
        let index = tokens.iter().enumerate().map(|(i, t)| (t.clone(), i)).collect();
        Self { tokens, index }
    }
}

impl From<Vocab> for Vec<String> {
    fn from(v: Vocab) -> Self {
        v.tokens
    }
}

impl Vocab {
    /// Builds a vocabulary from every token seen, sorted for determinism.
    pub fn build<'a>(tokens: impl IntoIterator<Item = &'a String>) -> Self {
        let words: BTreeSet<&str> = tokens.into_iter().map(String::as_str).collect();
        let mut all: Vec<String> = SPECIALS.iter().map(|s| s.to_string()).collect();
        all.extend(words.into_iter().filter(|w| !SPECIALS.contains(w)).map(String::from));
        all.into()
    }

    pub fn len(&self) -> usize {
        self.tokens.len()
    }

    pub fn is_empty(&self) -> bool {
        self.tokens.is_empty()
    }

    pub fn id(&self, token: &str) -> usize {
        self.index.get(token).copied().unwrap_or(UNK)
    }

    pub fn token(&self, id: usize) -> &str {
        self.tokens.get(id).map_or("<unk>", String::as_str)
    }

    pub fn encode(&self, tokens: &[String]) -> Vec<usize> {
        tokens.iter().map(|t| self.id(t)).collect()
    }

    /// Maps ids back to words, dropping special symbols.
    pub fn decode(&self, ids: &[usize]) -> Vec<String> {
        ids.iter().filter(|&&i| i >= SPECIALS.len()).map(|&i| self.token(i).to_string()).collect()
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn specials_have_fixed_ids() {
        let words: Vec<String> = ["zeta", "alpha", "<e>", "alpha"].iter().map(|s| s.to_string()).collect();
        let v = Vocab::build(&words);
        assert_eq!(v.len(), 9);
        for (i, s) in SPECIALS.iter().enumerate() {
            assert_eq!(v.id(s), i);
        }
        assert_eq!(v.id("alpha"), 7);
        assert_eq!(v.id("missing"), UNK);
        assert_eq!(v.decode(&[BOS, 7, 8, EOS]), vec!["alpha", "zeta"]);
        let json = serde_json::to_string(&v).unwrap();
        assert_eq!(serde_json::from_str::<Vocab>(&json).unwrap(), v);
    }
}
