//! Minimal text <-> token-ID mapping for detection over plain text.

use std::collections::HashMap;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::greenlist::TokenId;

/// Table key that, when present, names the UNK ID explicitly.
pub const UNK_WORD: &str = "<unk>";

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum TokenizerMode {
    /// Text is whitespace-separated decimal token IDs.
    #[default]
    IdentityIntegers,
    /// Whitespace-split words looked up in a [`VocabTable`].
    WhitespaceVocab,
}

/// Word <-> ID mapping loaded from a JSON object `{"word": id, ...}`.
#[derive(Debug, Clone, PartialEq)]
pub struct VocabTable {
    to_id: HashMap<String, TokenId>,
    to_word: HashMap<TokenId, String>,
    unk_id: TokenId,
}

impl VocabTable {
    pub fn from_map(map: HashMap<String, TokenId>) -> Result<Self> {
        let mut to_word = HashMap::with_capacity(map.len());
        for (w, &id) in &map {
            if let Some(prev) = to_word.insert(id, w.clone()) {
                return Err(Error::config(format!("vocab table maps both '{prev}' and '{w}' to {id}")));
            }
        }
        let unk_id = match map.get(UNK_WORD) {
            Some(&id) => id,
            None => map.values().max().map_or(0, |m| m + 1),
        };
        Ok(Self { to_id: map, to_word, unk_id })
    }

    pub fn from_json(json: &str) -> Result<Self> {
        Self::from_map(serde_json::from_str(json)?)
    }

    pub fn load(path: &Path) -> Result<Self> {
        Self::from_json(&std::fs::read_to_string(path)?)
    }

    pub fn unk_id(&self) -> TokenId {
        self.unk_id
    }

    /// Smallest vocabulary size that covers every ID including UNK.
    pub fn required_vocab_size(&self) -> u32 {
        self.to_word.keys().copied().chain([self.unk_id]).max().unwrap_or(0) + 1
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Tokenized {
    pub tokens: Vec<TokenId>,
    /// Words that fell back to UNK, in order of appearance.
    pub unknown_words: Vec<String>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct SimpleTokenizer {
    mode: TokenizerMode,
    table: Option<VocabTable>,
}

impl SimpleTokenizer {
    pub fn identity() -> Self {
        Self { mode: TokenizerMode::IdentityIntegers, table: None }
    }

    pub fn with_table(table: VocabTable) -> Self {
        Self { mode: TokenizerMode::WhitespaceVocab, table: Some(table) }
    }

    /// Fails if `mode` needs a table and none is given.
    pub fn new(mode: TokenizerMode, table: Option<VocabTable>) -> Result<Self> {
        if mode == TokenizerMode::WhitespaceVocab && table.is_none() {
            return Err(Error::config("whitespace-vocab tokenizer needs a vocab table"));
        }
        Ok(Self { mode, table })
    }

    pub fn mode(&self) -> TokenizerMode {
        self.mode
    }

    pub fn tokenize(&self, text: &str) -> Result<Tokenized> {
        match self.mode {
            TokenizerMode::IdentityIntegers => {
                let tokens = text
                    .split_whitespace()
                    .map(|w| {
                        w.parse::<TokenId>()
                            .map_err(|_| Error::input(format!("'{w}' is not an integer token ID")))
                    })
                    .collect::<Result<Vec<_>>>()?;
                Ok(Tokenized { tokens, unknown_words: Vec::new() })
            }
            TokenizerMode::WhitespaceVocab => {
                let table = self.table()?;
                let mut unknown_words = Vec::new();
                let tokens = text
                    .split_whitespace()
                    .map(|w| match table.to_id.get(w) {
                        Some(&id) => id,
                        None => {
                            unknown_words.push(w.to_string());
                            table.unk_id
                        }
                    })
                    .collect();
                Ok(Tokenized { tokens, unknown_words })
            }
        }
    }

    pub fn detokenize(&self, tokens: &[TokenId]) -> Result<String> {
        let words: Vec<String> = match self.mode {
            TokenizerMode::IdentityIntegers => tokens.iter().map(|t| t.to_string()).collect(),
            TokenizerMode::WhitespaceVocab => {
                let table = self.table()?;
                tokens
                    .iter()
                    .map(|t| match table.to_word.get(t) {
                        Some(w) => Ok(w.clone()),
                        None if *t == table.unk_id => Ok(UNK_WORD.to_string()),
                        None => Err(Error::input(format!("token {t} is not in the vocab table"))),
                    })
                    .collect::<Result<_>>()?
            }
        };
        Ok(words.join(" "))
    }

    fn table(&self) -> Result<&VocabTable> {
        self.table.as_ref().ok_or_else(|| Error::config("vocab table not loaded"))
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn ab() -> SimpleTokenizer {
        SimpleTokenizer::with_table(VocabTable::from_json(r#"{"a": 0, "b": 1}"#).unwrap())
    }

    #[test]
    fn whitespace_vocab_basics() {
        let tok = ab();
        assert_eq!(tok.tokenize("a b a").unwrap().tokens, vec![0, 1, 0]);
        assert_eq!(tok.detokenize(&[0, 1, 0]).unwrap(), "a b a");
        let t = tok.tokenize("a zebra").unwrap();
        assert_eq!(t.tokens, vec![0, 2]);
        assert_eq!(t.unknown_words, vec!["zebra"]);
        assert_eq!(tok.detokenize(&t.tokens).unwrap(), "a <unk>");
        assert_eq!(tok.table().unwrap().required_vocab_size(), 3);
    }

    #[test]
    fn explicit_unk_entry() {
        let table = VocabTable::from_json(r#"{"<unk>": 0, "x": 1}"#).unwrap();
        assert_eq!(table.unk_id(), 0);
        assert_eq!(SimpleTokenizer::with_table(table).tokenize("y x").unwrap().tokens, vec![0, 1]);
    }

    #[test]
    fn missing_table_is_a_config_error() {
        assert!(matches!(
            SimpleTokenizer::new(TokenizerMode::WhitespaceVocab, None),
            Err(Error::InvalidConfiguration(_))
        ));
        assert!(VocabTable::from_json(r#"{"a": 0, "b": 0}"#).is_err());
    }

    #[test]
    fn identity_integers() {
        let tok = SimpleTokenizer::identity();
        assert_eq!(tok.tokenize(" 4  8\n15 ").unwrap().tokens, vec![4, 8, 15]);
        assert_eq!(tok.detokenize(&[4, 8, 15]).unwrap(), "4 8 15");
        assert!(tok.tokenize("4 x").is_err());
    }

    proptest! {
        #[test]
        fn round_trip_in_vocab(words in proptest::collection::vec(prop_oneof![Just("a"), Just("b")], 0..30)) {
            let text = words.join(" ");
            let tok = ab();
            prop_assert_eq!(tok.detokenize(&tok.tokenize(&text).unwrap().tokens).unwrap(), text);
        }
    }
}
