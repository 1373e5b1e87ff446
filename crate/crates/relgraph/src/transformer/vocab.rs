//! Token vocabularies with fixed special-token ids.

use std::collections::HashMap;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

pub const PAD_ID: usize = 0;
pub const SOS_ID: usize = 1;
pub const EOS_ID: usize = 2;
pub const UNK_ID: usize = 3;

const SPECIALS: [&str; 4] = ["<pad>", "<sos>", "<eos>", "<unk>"];

/// Bidirectional token/id map. Ids 0..4 are always pad/sos/eos/unk so
/// checkpoints stay portable.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(from = "Vec<String>", into = "Vec<String>")]
pub struct Vocabulary {
    tokens: Vec<String>,
    lookup: HashMap<String, usize>,
}

impl Vocabulary {
    /// Vocabulary over the given non-special tokens, in the given order.
    pub fn new<I, S>(tokens: I) -> Result<Self>
    where
        I: IntoIterator<Item = S>,
        S: Into<String>,
    {
        let mut all: Vec<String> = SPECIALS.iter().map(|s| s.to_string()).collect();
        for t in tokens {
            let t = t.into();
            if t.is_empty() {
                return Err(Error::invalid("empty token in vocabulary"));
            }
            all.push(t);
        }
        let mut lookup = HashMap::with_capacity(all.len());
        for (i, t) in all.iter().enumerate() {
            if lookup.insert(t.clone(), i).is_some() {
                return Err(Error::invalid(format!("duplicate vocabulary token {t:?}")));
            }
        }
        Ok(Vocabulary { tokens: all, lookup })
    }

    /// Source vocabulary from corpus tokens: unique words, sorted.
    pub fn from_corpus_tokens<'a, I>(token_lists: I) -> Result<Self>
    where
        I: IntoIterator<Item = &'a [String]>,
    {
        let mut words: Vec<&String> = token_lists.into_iter().flatten().collect();
        words.sort();
        words.dedup();
        Vocabulary::new(words.into_iter().cloned())
    }

    /// Total size including the four specials.
    pub fn len(&self) -> usize {
        self.tokens.len()
    }

    pub fn is_empty(&self) -> bool {
        self.tokens.is_empty()
    }

    pub fn id(&self, token: &str) -> Option<usize> {
        self.lookup.get(token).copied()
    }

    pub fn id_or_unk(&self, token: &str) -> usize {
        self.id(token).unwrap_or(UNK_ID)
    }

    pub fn token(&self, id: usize) -> Option<&str> {
        self.tokens.get(id).map(|s| s.as_str())
    }

    pub fn is_special(id: usize) -> bool {
        id <= UNK_ID
    }

    /// Non-special tokens in id order.
    pub fn payload_tokens(&self) -> &[String] {
        &self.tokens[SPECIALS.len()..]
    }
}

impl From<Vocabulary> for Vec<String> {
    fn from(v: Vocabulary) -> Self {
        v.tokens[SPECIALS.len()..].to_vec()
    }
}

impl From<Vec<String>> for Vocabulary {
    fn from(tokens: Vec<String>) -> Self {
        Vocabulary::new(tokens).expect("invalid serialized vocabulary")
    }
}
