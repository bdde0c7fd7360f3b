//! Clopen subsets of Cantor space `{0,1}^N` as finite prefix-free word sets.
//!
//! A cylinder `[u]` is the set of sequences extending the binary word `u`;
//! two cylinders are nested or disjoint, so every clopen set has a unique
//! canonical form: a prefix-free set of words in which no two siblings
//! `w0`, `w1` are both present. All set operations preserve that form, which
//! makes equality of clopen sets plain equality of word sets.

use std::collections::BTreeSet;
use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Deserializer, Serialize, Serializer};
use thiserror::Error;

use crate::rational::Rat;

/// Finite binary word; the empty word denotes the whole space.
#[derive(Clone, PartialEq, Eq, PartialOrd, Ord, Hash, Default)]
pub struct Word(String);

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum WordError {
    #[error("word {0:?} contains a character other than 0/1")]
    BadCharacter(String),
}

impl Word {
    pub fn root() -> Word {
        Word(String::new())
    }

    pub fn bits(&self) -> &str {
        &self.0
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    pub fn ones(&self) -> usize {
        self.0.bytes().filter(|&b| b == b'1').count()
    }

    pub fn zeros(&self) -> usize {
        self.0.len() - self.ones()
    }

    pub fn is_prefix_of(&self, other: &Word) -> bool {
        other.0.starts_with(&self.0)
    }

    /// One cylinder meets another iff the words are comparable.
    pub fn comparable(&self, other: &Word) -> bool {
        self.is_prefix_of(other) || other.is_prefix_of(self)
    }

    pub fn concat(&self, suffix: &Word) -> Word {
        Word(format!("{}{}", self.0, suffix.0))
    }

    pub fn child(&self, bit: u8) -> Word {
        debug_assert!(bit <= 1);
        let mut s = self.0.clone();
        s.push(if bit == 0 { '0' } else { '1' });
        Word(s)
    }

    /// Strips `prefix` from the front; `None` if it is not a prefix.
    pub fn strip_prefix(&self, prefix: &Word) -> Option<Word> {
        self.0.strip_prefix(&prefix.0).map(|s| Word(s.to_string()))
    }

    /// All extensions of this word with total length `depth`.
    pub fn extensions(&self, depth: usize) -> Vec<Word> {
        assert!(depth >= self.len(), "depth shorter than word");
        let extra = depth - self.len();
        let mut out = Vec::with_capacity(1 << extra);
        for mask in 0..(1u64 << extra) {
            let mut s = self.0.clone();
            for i in (0..extra).rev() {
                s.push(if (mask >> i) & 1 == 0 { '0' } else { '1' });
            }
            out.push(Word(s));
        }
        out
    }

    /// Cylinder mass under the Bernoulli(`p`) measure: `p` per 1, `1-p` per 0.
    pub fn bernoulli_mass(&self, p: &Rat) -> Rat {
        let q = Rat::one() - p;
        p.pow(self.ones() as u32) * q.pow(self.zeros() as u32)
    }
}

impl FromStr for Word {
    type Err = WordError;
    fn from_str(s: &str) -> Result<Word, WordError> {
        if s.bytes().all(|b| b == b'0' || b == b'1') {
            Ok(Word(s.to_string()))
        } else {
            Err(WordError::BadCharacter(s.to_string()))
        }
    }
}

impl fmt::Display for Word {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        if self.0.is_empty() {
            write!(f, "ε")
        } else {
            write!(f, "{}", self.0)
        }
    }
}

impl fmt::Debug for Word {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "[{self}]")
    }
}

impl Serialize for Word {
    fn serialize<S: Serializer>(&self, serializer: S) -> Result<S::Ok, S::Error> {
        serializer.serialize_str(&self.0)
    }
}

impl<'de> Deserialize<'de> for Word {
    fn deserialize<D: Deserializer<'de>>(deserializer: D) -> Result<Word, D::Error> {
        let s = String::deserialize(deserializer)?;
        s.parse().map_err(serde::de::Error::custom)
    }
}

/// Convenience constructor for tests and fixtures.
pub fn word(s: &str) -> Word {
    s.parse().expect("binary word literal")
}

/// Clopen set in canonical form.
#[derive(Clone, PartialEq, Eq, PartialOrd, Ord, Hash, Default, Serialize, Deserialize)]
#[serde(from = "Vec<Word>", into = "Vec<Word>")]
pub struct ClopenSet {
    words: BTreeSet<Word>,
}

impl From<Vec<Word>> for ClopenSet {
    fn from(words: Vec<Word>) -> ClopenSet {
        ClopenSet::from_words(words)
    }
}

impl From<ClopenSet> for Vec<Word> {
    fn from(s: ClopenSet) -> Vec<Word> {
        s.words.into_iter().collect()
    }
}

impl ClopenSet {
    pub fn empty() -> ClopenSet {
        ClopenSet {
            words: BTreeSet::new(),
        }
    }

    pub fn full() -> ClopenSet {
        ClopenSet::cylinder(Word::root())
    }

    pub fn cylinder(w: Word) -> ClopenSet {
        ClopenSet {
            words: BTreeSet::from([w]),
        }
    }

    /// Canonicalizes an arbitrary word collection: drops words covered by a
    /// prefix, then merges full sibling pairs bottom-up.
    pub fn from_words(words: impl IntoIterator<Item = Word>) -> ClopenSet {
        let mut sorted: Vec<Word> = words.into_iter().collect();
        sorted.sort();
        // A word is redundant iff some earlier word in sorted order is a
        // prefix of it (prefixes sort first).
        let mut kept: Vec<Word> = Vec::with_capacity(sorted.len());
        for w in sorted {
            match kept.last() {
                Some(prev) if prev.is_prefix_of(&w) => {}
                _ => kept.push(w),
            }
        }
        let mut set: BTreeSet<Word> = kept.into_iter().collect();
        // Merge siblings until a fixed point.
        loop {
            let mut merged = None;
            for w in set.iter() {
                if w.bits().ends_with('0') {
                    let parent: Word = w.bits()[..w.len() - 1].parse().unwrap();
                    let sibling = parent.child(1);
                    if set.contains(&sibling) {
                        merged = Some((w.clone(), sibling, parent));
                        break;
                    }
                }
            }
            match merged {
                Some((a, b, parent)) => {
                    set.remove(&a);
                    set.remove(&b);
                    set.insert(parent);
                }
                None => break,
            }
        }
        ClopenSet { words: set }
    }

    pub fn words(&self) -> impl Iterator<Item = &Word> {
        self.words.iter()
    }

    pub fn word_count(&self) -> usize {
        self.words.len()
    }

    pub fn is_empty(&self) -> bool {
        self.words.is_empty()
    }

    pub fn is_full(&self) -> bool {
        self.words.len() == 1 && self.words.iter().next().unwrap().is_empty()
    }

    pub fn max_word_len(&self) -> usize {
        self.words.iter().map(Word::len).max().unwrap_or(0)
    }

    pub fn contains_point_cylinder(&self, w: &Word) -> bool {
        self.words.iter().any(|u| u.is_prefix_of(w))
    }

    pub fn union(&self, other: &ClopenSet) -> ClopenSet {
        ClopenSet::from_words(self.words.iter().chain(other.words.iter()).cloned())
    }

    /// Intersection of prefix-free families: for each comparable pair keep
    /// the longer word.
    pub fn intersect(&self, other: &ClopenSet) -> ClopenSet {
        let mut out = Vec::new();
        for u in &self.words {
            for v in &other.words {
                if u.is_prefix_of(v) {
                    out.push(v.clone());
                } else if v.is_prefix_of(u) {
                    out.push(u.clone());
                }
            }
        }
        ClopenSet::from_words(out)
    }

    pub fn complement(&self) -> ClopenSet {
        let words: Vec<&Word> = self.words.iter().collect();
        let mut out = Vec::new();
        complement_rec(&words, &Word::root(), &mut out);
        ClopenSet::from_words(out)
    }

    pub fn difference(&self, other: &ClopenSet) -> ClopenSet {
        self.intersect(&other.complement())
    }

    pub fn is_disjoint(&self, other: &ClopenSet) -> bool {
        self.words
            .iter()
            .all(|u| other.words.iter().all(|v| !u.comparable(v)))
    }

    /// In canonical form `[u] ⊆ S` iff some word of `S` prefixes `u`, so the
    /// subset test is per-word.
    pub fn is_subset(&self, other: &ClopenSet) -> bool {
        self.words.iter().all(|u| other.contains_point_cylinder(u))
    }

    /// Exact mass under Bernoulli(`p`); `p = 1/2` is the uniform measure.
    pub fn measure(&self, p: &Rat) -> Rat {
        self.words.iter().map(|w| w.bernoulli_mass(p)).sum()
    }

    /// All depth-`d` cylinders inside the set; every word must have length
    /// at most `d`.
    pub fn leaves_at_depth(&self, d: usize) -> Vec<Word> {
        let mut out = Vec::new();
        for w in &self.words {
            out.extend(w.extensions(d));
        }
        out.sort();
        out
    }
}

fn complement_rec(words: &[&Word], at: &Word, out: &mut Vec<Word>) {
    if words.is_empty() {
        out.push(at.clone());
        return;
    }
    if words.iter().any(|w| w.is_empty()) {
        // This node is fully covered.
        return;
    }
    for bit in 0..2u8 {
        let side = if bit == 0 { '0' } else { '1' };
        let tails: Vec<Word> = words
            .iter()
            .filter(|w| w.bits().starts_with(side))
            .map(|w| w.bits()[1..].parse().unwrap())
            .collect();
        let refs: Vec<&Word> = tails.iter().collect();
        complement_rec(&refs, &at.child(bit), out);
    }
}

impl fmt::Display for ClopenSet {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{{")?;
        for (i, w) in self.words.iter().enumerate() {
            if i > 0 {
                write!(f, ", ")?;
            }
            write!(f, "{w}")?;
        }
        write!(f, "}}")
    }
}

impl fmt::Debug for ClopenSet {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        fmt::Display::fmt(self, f)
    }
}

/// Builds a set from word literals.
pub fn clopen(words: &[&str]) -> ClopenSet {
    ClopenSet::from_words(words.iter().map(|s| word(s)))
}
