//! Phrase corpora and digraph statistics over the 27-key alphabet.

use std::fmt;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Number of symbols: `A`–`Z` plus space.
pub const ALPHABET_LEN: usize = 27;
pub const SPACE_INDEX: usize = 26;
const ALPHABET: &str = "ABCDEFGHIJKLMNOPQRSTUVWXYZ ";

/// Vendored phrase set used when no corpus is supplied.
pub const BUILTIN_PHRASES: &str = include_str!("../data/phrases.txt");
/// Ten-phrase fixture for quick checks.
pub const DESK_PHRASES: &str = include_str!("../data/desk10.txt");

/// One of the 27 keyboard symbols, indexed `A = 0 … Z = 25, SPACE = 26`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct Symbol(u8);

impl Symbol {
    pub const SPACE: Symbol = Symbol(SPACE_INDEX as u8);

    pub fn from_index(index: usize) -> Option<Symbol> {
        (index < ALPHABET_LEN).then_some(Symbol(index as u8))
    }

    pub fn from_char(c: char) -> Option<Symbol> {
        match c.to_ascii_uppercase() {
            c @ 'A'..='Z' => Some(Symbol(c as u8 - b'A')),
            ' ' => Some(Symbol::SPACE),
            _ => None,
        }
    }

    pub fn index(self) -> usize {
        self.0 as usize
    }

    pub fn to_char(self) -> char {
        ALPHABET.as_bytes()[self.index()] as char
    }

    pub fn is_space(self) -> bool {
        self == Symbol::SPACE
    }

    pub fn all() -> impl Iterator<Item = Symbol> {
        (0..ALPHABET_LEN as u8).map(Symbol)
    }
}

impl fmt::Display for Symbol {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}", self.to_char())
    }
}

impl Serialize for Symbol {
    fn serialize<S: serde::Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        let mut buf = [0u8; 4];
        s.serialize_str(self.to_char().encode_utf8(&mut buf))
    }
}

impl<'de> Deserialize<'de> for Symbol {
    fn deserialize<D: serde::Deserializer<'de>>(d: D) -> std::result::Result<Self, D::Error> {
        let s = String::deserialize(d)?;
        let mut chars = s.chars();
        match (chars.next(), chars.next()) {
            (Some(c), None) if c == ' ' || c.is_ascii_uppercase() => Ok(Symbol::from_char(c).expect("checked above")),
            _ => Err(serde::de::Error::custom(format!("not a keyboard symbol: {s:?}"))),
        }
    }
}

/// Uppercases, drops anything outside `A–Z`/space, collapses whitespace runs.
pub fn normalize_line(line: &str) -> String {
    let mut out = String::with_capacity(line.len());
    let mut pending_space = false;
    for c in line.chars() {
        if c.is_whitespace() {
            pending_space = !out.is_empty();
            continue;
        }
        let up = c.to_ascii_uppercase();
        if up.is_ascii_uppercase() {
            if pending_space {
                out.push(' ');
                pending_space = false;
            }
            out.push(up);
        }
    }
    out
}

/// Normalized line as symbols.
pub fn symbols(line: &str) -> Vec<Symbol> {
    normalize_line(line).chars().filter_map(Symbol::from_char).collect()
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(try_from = "DigraphDoc", into = "DigraphDoc")]
pub struct DigraphMatrix {
    counts: Vec<[u64; ALPHABET_LEN]>,
    total: u64,
}

#[derive(Serialize, Deserialize)]
struct DigraphDoc {
    alphabet: String,
    counts: Vec<Vec<u64>>,
    total: u64,
}

impl From<DigraphMatrix> for DigraphDoc {
    fn from(m: DigraphMatrix) -> Self {
        DigraphDoc {
            alphabet: ALPHABET.to_string(),
            counts: m.counts.iter().map(|row| row.to_vec()).collect(),
            total: m.total,
        }
    }
}

impl TryFrom<DigraphDoc> for DigraphMatrix {
    type Error = Error;

    fn try_from(doc: DigraphDoc) -> Result<Self> {
        if doc.alphabet != ALPHABET {
            return Err(Error::invalid("unexpected alphabet"));
        }
        if doc.counts.len() != ALPHABET_LEN || doc.counts.iter().any(|r| r.len() != ALPHABET_LEN) {
            return Err(Error::invalid("digraph counts must be 27×27"));
        }
        let mut m = DigraphMatrix::default();
        for (i, row) in doc.counts.iter().enumerate() {
            m.counts[i].copy_from_slice(row);
        }
        m.total = m.counts.iter().flatten().sum();
        if m.total != doc.total {
            return Err(Error::invalid("digraph total does not match counts"));
        }
        Ok(m)
    }
}

impl Default for DigraphMatrix {
    fn default() -> Self {
        DigraphMatrix {
            counts: vec![[0; ALPHABET_LEN]; ALPHABET_LEN],
            total: 0,
        }
    }
}

impl DigraphMatrix {
    pub fn count(&self, from: Symbol, to: Symbol) -> u64 {
        self.counts[from.index()][to.index()]
    }

    pub fn total(&self) -> u64 {
        self.total
    }

    pub fn add_line(&mut self, line: &str) {
        let syms = symbols(line);
        for pair in syms.windows(2) {
            self.counts[pair[0].index()][pair[1].index()] += 1;
            self.total += 1;
        }
    }

    /// Adds another matrix's counts into this one.
    pub fn merge(&mut self, other: &DigraphMatrix) {
        for (mine, theirs) in self.counts.iter_mut().zip(&other.counts) {
            for (a, b) in mine.iter_mut().zip(theirs) {
                *a += b;
            }
        }
        self.total += other.total;
    }
}

/// Counts digraphs within each line; no digraph spans a line break.
pub fn ingest_phrases<I, S>(lines: I) -> DigraphMatrix
where
    I: IntoIterator<Item = S>,
    S: AsRef<str>,
{
    let mut m = DigraphMatrix::default();
    for line in lines {
        m.add_line(line.as_ref());
    }
    m
}

/// Row-major 27×27 joint probabilities `p[i][j] = counts[i][j] / total`.
pub fn joint_probabilities(m: &DigraphMatrix) -> Result<Vec<Vec<f64>>> {
    if m.total == 0 {
        return Err(Error::EmptyCorpus);
    }
    let total = m.total as f64;
    Ok(m.counts
        .iter()
        .map(|row| row.iter().map(|&c| c as f64 / total).collect())
        .collect())
}

/// Phrases (non-empty after normalization) from a plain-text corpus.
pub fn phrases(text: &str) -> Vec<String> {
    text.lines().map(normalize_line).filter(|l| !l.is_empty()).collect()
}

/// Hex SHA-256 of a corpus text, used to reference corpora in provenance.
pub fn corpus_digest(text: &str) -> String {
    use sha2::{Digest, Sha256};
    hex::encode(Sha256::digest(text.as_bytes()))
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn sym(c: char) -> Symbol {
        Symbol::from_char(c).unwrap()
    }

    #[test]
    fn alphabet_bijection() {
        assert_eq!(Symbol::all().count(), 27);
        for s in Symbol::all() {
            assert_eq!(Symbol::from_char(s.to_char()), Some(s));
            assert_eq!(Symbol::from_index(s.index()), Some(s));
        }
        assert_eq!(sym('a'), sym('A'));
        assert_eq!(sym(' ').index(), SPACE_INDEX);
        assert_eq!(Symbol::from_char('7'), None);
    }

    #[test]
    fn abba() {
        let m = ingest_phrases(["ABBA"]);
        assert_eq!(m.count(sym('A'), sym('B')), 1);
        assert_eq!(m.count(sym('B'), sym('B')), 1);
        assert_eq!(m.count(sym('B'), sym('A')), 1);
        assert_eq!(m.total(), 3);
        let p = joint_probabilities(&m).unwrap();
        assert_eq!(p[0][1], 1.0 / 3.0);
        assert_eq!(p[1][1], 1.0 / 3.0);
        assert_eq!(p[1][0], 1.0 / 3.0);
    }

    #[test]
    fn go_go() {
        let m = ingest_phrases(["GO GO"]);
        assert_eq!(m.count(sym('G'), sym('O')), 2);
        assert_eq!(m.count(sym('O'), Symbol::SPACE), 1);
        assert_eq!(m.count(Symbol::SPACE, sym('G')), 1);
        assert_eq!(m.total(), 4);
    }

    #[test]
    fn phrase_length_minus_one() {
        let line = "my watch fell in the water";
        assert_eq!(normalize_line(line).len(), 26);
        assert_eq!(ingest_phrases([line]).total(), 25);
    }

    #[test]
    fn normalization() {
        assert_eq!(normalize_line("  Hello,   World! 42 "), "HELLO WORLD");
        assert_eq!(normalize_line("don't\tstop"), "DONT STOP");
        assert_eq!(normalize_line("123"), "");
    }

    #[test]
    fn line_boundaries_break_digraphs() {
        let m = ingest_phrases(["AB", "CD"]);
        assert_eq!(m.total(), 2);
        assert_eq!(m.count(sym('B'), sym('C')), 0);
    }

    #[test]
    fn probability_edge_cases() {
        assert!(matches!(
            joint_probabilities(&ingest_phrases([""; 0])),
            Err(Error::EmptyCorpus)
        ));
        let p = joint_probabilities(&ingest_phrases(["XY"])).unwrap();
        assert_eq!(p[23][24], 1.0);
        let p = joint_probabilities(&ingest_phrases(["XY", "QZ"])).unwrap();
        assert_eq!(p[23][24], 0.5);
        assert_eq!(p[16][25], 0.5);
    }

    #[test]
    fn builtin_corpus_sums_to_one() {
        let m = ingest_phrases(BUILTIN_PHRASES.lines());
        assert!(m.total() > 5000);
        let p = joint_probabilities(&m).unwrap();
        let sum: f64 = p.iter().flatten().sum();
        assert!((sum - 1.0).abs() < 1e-12);
        assert_eq!(phrases(DESK_PHRASES).len(), 10);
    }

    #[test]
    fn json_round_trip() {
        let m = ingest_phrases(["HELLO WORLD"]);
        let json = serde_json::to_string(&m).unwrap();
        assert!(json.starts_with("{\"alphabet\":\"ABCDEFGHIJKLMNOPQRSTUVWXYZ \""));
        assert_eq!(serde_json::from_str::<DigraphMatrix>(&json).unwrap(), m);
    }

    proptest! {
        #[test]
        fn normalization_is_idempotent(line in "[ -~\\t]{0,60}") {
            let once = normalize_line(&line);
            prop_assert_eq!(normalize_line(&once), once.clone());
            prop_assert_eq!(ingest_phrases([&line]), ingest_phrases([&once]));
        }

        #[test]
        fn ingestion_is_order_insensitive(lines in proptest::collection::vec("[a-z ]{0,20}", 0..8)) {
            let forward = ingest_phrases(&lines);
            let reversed = ingest_phrases(lines.iter().rev());
            prop_assert_eq!(&forward, &reversed);
            let mut merged = DigraphMatrix::default();
            for l in &lines {
                merged.merge(&ingest_phrases([l]));
            }
            prop_assert_eq!(forward, merged);
        }

        #[test]
        fn marginals_are_subdistributions(lines in proptest::collection::vec("[a-z ]{2,20}", 1..8)) {
            let m = ingest_phrases(&lines);
            prop_assume!(m.total() > 0);
            let p = joint_probabilities(&m).unwrap();
            let total: f64 = p.iter().flatten().sum();
            prop_assert!((total - 1.0).abs() < 1e-12);
            for i in 0..ALPHABET_LEN {
                let row: f64 = p[i].iter().sum();
                let col: f64 = p.iter().map(|r| r[i]).sum();
                prop_assert!((0.0..=1.0 + 1e-12).contains(&row));
                prop_assert!((0.0..=1.0 + 1e-12).contains(&col));
            }
        }
    }
}
