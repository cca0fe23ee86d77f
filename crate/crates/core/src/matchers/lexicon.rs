use std::collections::{BTreeMap, BTreeSet};
use std::path::Path;

use crate::error::{Error, Result};

const BUNDLED: &str = include_str!("../../fixtures/lexicon.tsv");

/// Token relations standing in for a thesaurus: abbreviations, synonyms and
/// closely related terms. A token always relates to itself.
#[derive(Clone, Debug, Default, PartialEq, Eq)]
pub struct Lexicon {
    relations: BTreeMap<String, BTreeSet<String>>,
    symmetric: bool,
}

impl Lexicon {
    pub fn empty() -> Self {
        Lexicon::default()
    }

    /// The lexicon shipped with the crate, symmetrically closed.
    pub fn bundled() -> Self {
        Lexicon::parse(BUNDLED, Path::new("<bundled lexicon>"))
            .expect("bundled lexicon is well formed")
            .symmetric_closure()
    }

    /// Parses `token<TAB>related1,related2,...` lines. Blank lines and lines
    /// starting with `#` are skipped.
    pub fn parse(text: &str, origin: &Path) -> Result<Self> {
        let mut relations: BTreeMap<String, BTreeSet<String>> = BTreeMap::new();
        for (k, line) in text.lines().enumerate() {
            let line = line.trim_end_matches('\r');
            if line.trim().is_empty() || line.starts_with('#') {
                continue;
            }
            let (token, related) = line.split_once('\t').ok_or_else(|| Error::Parse {
                path: origin.to_path_buf(),
                line: k + 1,
                message: "expected token<TAB>related,...".into(),
            })?;
            let token = token.trim().to_lowercase();
            if token.is_empty() {
                return Err(Error::Parse {
                    path: origin.to_path_buf(),
                    line: k + 1,
                    message: "empty token".into(),
                });
            }
            let entry = relations.entry(token.clone()).or_default();
            for r in related.split(',').map(|r| r.trim().to_lowercase()) {
                if !r.is_empty() && r != token {
                    entry.insert(r);
                }
            }
        }
        Ok(Lexicon {
            relations,
            symmetric: false,
        })
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Lexicon::parse(&text, path)
    }

    pub fn insert(&mut self, token: &str, related: &str) {
        let (t, r) = (token.to_lowercase(), related.to_lowercase());
        if t != r {
            self.relations.entry(t).or_default().insert(r);
        }
    }

    /// Adds `b -> a` for every `a -> b`.
    pub fn symmetric_closure(mut self) -> Self {
        let pairs: Vec<(String, String)> = self
            .relations
            .iter()
            .flat_map(|(t, rs)| rs.iter().map(move |r| (r.clone(), t.clone())))
            .collect();
        for (a, b) in pairs {
            self.relations.entry(a).or_default().insert(b);
        }
        self.symmetric = true;
        self
    }

    pub fn is_symmetric(&self) -> bool {
        self.symmetric
    }

    pub fn is_empty(&self) -> bool {
        self.relations.is_empty()
    }

    /// Tokens declared related to `token`, excluding the token itself.
    pub fn related(&self, token: &str) -> impl Iterator<Item = &str> {
        self.relations
            .get(token)
            .into_iter()
            .flat_map(|s| s.iter().map(String::as_str))
    }

    /// Whether a declared relation links two distinct tokens, in either direction.
    pub fn relates(&self, a: &str, b: &str) -> bool {
        a != b
            && (self.relations.get(a).is_some_and(|s| s.contains(b))
                || self.relations.get(b).is_some_and(|s| s.contains(a)))
    }

    /// Tokens followed by their related tokens (sorted, without repeats).
    pub fn expand(&self, tokens: &[String]) -> Vec<String> {
        let mut out: Vec<String> = Vec::with_capacity(tokens.len());
        for t in tokens {
            if !out.contains(t) {
                out.push(t.clone());
            }
        }
        let extra: BTreeSet<&str> = tokens.iter().flat_map(|t| self.related(t)).collect();
        for e in extra {
            if !out.iter().any(|o| o == e) {
                out.push(e.to_string());
            }
        }
        out
    }

    pub fn to_tsv(&self) -> String {
        let mut out = String::new();
        for (t, rs) in &self.relations {
            out.push_str(t);
            out.push('\t');
            out.push_str(&rs.iter().cloned().collect::<Vec<_>>().join(","));
            out.push('\n');
        }
        out
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn parses_and_closes() {
        let lex = Lexicon::parse("day\tdate\n# comment\n\npo\tpurchase,order\n", Path::new("x"))
            .unwrap();
        assert!(lex.relates("day", "date"));
        assert!(lex.relates("date", "day"));
        assert_eq!(lex.related("date").count(), 0);
        let closed = lex.symmetric_closure();
        assert_eq!(closed.related("date").collect::<Vec<_>>(), ["day"]);
        assert!(closed.is_symmetric());
    }

    #[test]
    fn rejects_line_without_tab() {
        let err = Lexicon::parse("day date\n", Path::new("lex.tsv")).unwrap_err();
        assert!(err.to_string().contains("lex.tsv:1"));
    }

    #[test]
    fn self_relation_is_not_a_declared_relation() {
        let lex = Lexicon::parse("day\tday,date\n", Path::new("x")).unwrap();
        assert!(!lex.relates("day", "day"));
        assert_eq!(lex.related("day").collect::<Vec<_>>(), ["date"]);
    }

    #[test]
    fn bundled_lexicon_loads() {
        let lex = Lexicon::bundled();
        assert!(lex.relates("day", "date"));
        assert!(!lex.is_empty());
    }

    #[test]
    fn expansion_keeps_order_then_related() {
        let lex = Lexicon::parse("po\tpurchase,order\n", Path::new("x")).unwrap();
        let tokens = vec!["po".to_string(), "code".to_string()];
        assert_eq!(lex.expand(&tokens), ["po", "code", "order", "purchase"]);
    }
}
