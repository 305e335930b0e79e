//! Fixed Spanish/English token table used for label normalization.

use std::collections::BTreeMap;
use std::sync::OnceLock;

pub const LEXICON_CSV: &str = include_str!("../data/lexicon_v1.csv");
pub const LEXICON_VERSION: u32 = 1;
pub const UNKNOWN_TOKEN: &str = "unknown";

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Lexicon {
    es_to_en: BTreeMap<String, String>,
    en_to_es: BTreeMap<String, String>,
}

impl Lexicon {
    /// Parses `es_token,en_token` rows after a header line.
    pub fn from_csv(text: &str) -> Result<Lexicon, String> {
        let mut es_to_en = BTreeMap::new();
        let mut en_to_es = BTreeMap::new();
        for (lineno, line) in text.lines().enumerate().skip(1) {
            let line = line.trim();
            if line.is_empty() {
                continue;
            }
            let (es, en) = line
                .split_once(',')
                .ok_or_else(|| format!("line {}: expected two columns", lineno + 1))?;
            es_to_en.insert(es.trim().to_string(), en.trim().to_string());
            en_to_es.insert(en.trim().to_string(), es.trim().to_string());
        }
        Ok(Lexicon { es_to_en, en_to_es })
    }

    pub fn shipped() -> &'static Lexicon {
        static SHIPPED: OnceLock<Lexicon> = OnceLock::new();
        SHIPPED.get_or_init(|| Lexicon::from_csv(LEXICON_CSV).expect("shipped lexicon parses"))
    }

    pub fn len(&self) -> usize {
        self.es_to_en.len()
    }

    pub fn is_empty(&self) -> bool {
        self.es_to_en.is_empty()
    }

    pub fn is_english(&self, token: &str) -> bool {
        self.en_to_es.contains_key(token)
    }

    pub fn spanish_for(&self, en: &str) -> Option<&str> {
        self.en_to_es.get(en).map(String::as_str)
    }

    pub fn english_tokens(&self) -> impl Iterator<Item = &str> {
        self.en_to_es.keys().map(String::as_str)
    }

    /// Maps a token to its canonical English form. English tokens pass
    /// through; anything outside the table becomes `unknown`.
    pub fn normalize<'a>(&'a self, token: &'a str) -> &'a str {
        if self.en_to_es.contains_key(token) {
            token
        } else if let Some(en) = self.es_to_en.get(token) {
            en
        } else {
            UNKNOWN_TOKEN
        }
    }
}

pub fn normalize_language<'a>(token: &'a str, lexicon: &'a Lexicon) -> &'a str {
    lexicon.normalize(token)
}

pub(crate) fn to_spanish(en: &str) -> Option<&'static str> {
    Lexicon::shipped().spanish_for(en)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn shipped_table_has_twelve_pairs() {
        assert_eq!(Lexicon::shipped().len(), 12);
    }

    #[test]
    fn normalization_examples() {
        let lex = Lexicon::shipped();
        assert_eq!(normalize_language("urgente", lex), "urgent");
        assert_eq!(normalize_language("urgent", lex), "urgent");
        assert_eq!(normalize_language("zzz", lex), "unknown");
        assert_eq!(normalize_language("normal", lex), "normal");
    }

    #[test]
    fn every_spanish_token_maps_back() {
        let lex = Lexicon::shipped();
        for en in lex.english_tokens() {
            let es = lex.spanish_for(en).unwrap();
            assert_eq!(lex.normalize(es), en);
        }
    }
}
