//! Prefix-exchange homeomorphisms of Cantor space.
//!
//! The carrier group is generated by cylinder swaps: exchange `[u]` and `[v]`
//! for words of equal length and fix everything else. In `WeightPreserving`
//! mode the swapped words must also have the same number of 1s, which makes
//! every Bernoulli(p) measure invariant; in `AllSwaps` mode only the uniform
//! measure is guaranteed invariant. Composite elements are [`GroupWord`]s over
//! a [`SwapRegistry`]; any such element can also be flattened into a single
//! [`PrefixMapHomeo`], a complete prefix-code rewrite `u·y ↦ v·y`.

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::rational::Rat;
use crate::words::{ClopenSet, Word};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum SwapMode {
    #[serde(rename = "all")]
    AllSwaps,
    #[serde(rename = "weight")]
    WeightPreserving,
}

impl fmt::Display for SwapMode {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            SwapMode::AllSwaps => write!(f, "all"),
            SwapMode::WeightPreserving => write!(f, "weight"),
        }
    }
}

impl FromStr for SwapMode {
    type Err = String;
    fn from_str(s: &str) -> Result<SwapMode, String> {
        match s {
            "all" => Ok(SwapMode::AllSwaps),
            "weight" => Ok(SwapMode::WeightPreserving),
            other => Err(format!("unknown generator mode {other:?}, expected all|weight")),
        }
    }
}

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum SwapError {
    #[error("swap words {0} and {1} differ in length")]
    LengthMismatch(Word, Word),
    #[error("swap words are equal ({0})")]
    EqualWords(Word),
    #[error("swap {0}↔{1} changes the number of 1s, not allowed in weight mode")]
    WeightMismatch(Word, Word),
    #[error("group word refers to generator {index} but only {registered} are registered")]
    UnknownGenerator { index: usize, registered: usize },
}

/// Exchange of two disjoint cylinders of equal depth; an involution.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct CylinderSwap {
    pub left: Word,
    pub right: Word,
}

impl CylinderSwap {
    pub fn new(left: Word, right: Word, mode: SwapMode) -> Result<CylinderSwap, SwapError> {
        if left.len() != right.len() {
            return Err(SwapError::LengthMismatch(left, right));
        }
        if left == right {
            return Err(SwapError::EqualWords(left));
        }
        if mode == SwapMode::WeightPreserving && left.ones() != right.ones() {
            return Err(SwapError::WeightMismatch(left, right));
        }
        Ok(CylinderSwap { left, right })
    }

    /// Exact image of a clopen set.
    pub fn apply(&self, s: &ClopenSet) -> ClopenSet {
        let lu = ClopenSet::cylinder(self.left.clone());
        let rv = ClopenSet::cylinder(self.right.clone());
        let mut words: Vec<Word> = s.difference(&lu.union(&rv)).words().cloned().collect();
        words.extend(transfer(s, &self.left, &self.right));
        words.extend(transfer(s, &self.right, &self.left));
        ClopenSet::from_words(words)
    }

    /// The swap as a complete prefix-code rewrite.
    pub fn to_prefix_map(&self) -> PrefixMapHomeo {
        let lu = ClopenSet::cylinder(self.left.clone());
        let rv = ClopenSet::cylinder(self.right.clone());
        let mut rules = vec![
            (self.left.clone(), self.right.clone()),
            (self.right.clone(), self.left.clone()),
        ];
        for w in lu.union(&rv).complement().words() {
            rules.push((w.clone(), w.clone()));
        }
        PrefixMapHomeo::new(rules).expect("swap rules form a complete code")
    }
}

/// Words of `s ∩ [from]` with the prefix `from` replaced by `to`.
fn transfer(s: &ClopenSet, from: &Word, to: &Word) -> Vec<Word> {
    s.intersect(&ClopenSet::cylinder(from.clone()))
        .words()
        .map(|w| {
            let tail = w.strip_prefix(from).expect("intersection words extend the cylinder word");
            to.concat(&tail)
        })
        .collect()
}

/// Composite group element: generator indices with exponents, applied left to
/// right.
#[derive(Debug, Clone, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(transparent)]
pub struct GroupWord {
    letters: Vec<(usize, i8)>,
}

impl GroupWord {
    pub fn identity() -> GroupWord {
        GroupWord { letters: Vec::new() }
    }

    pub fn generator(index: usize) -> GroupWord {
        GroupWord {
            letters: vec![(index, 1)],
        }
    }

    pub fn is_identity(&self) -> bool {
        self.letters.is_empty()
    }

    pub fn letters(&self) -> &[(usize, i8)] {
        &self.letters
    }

    pub fn len(&self) -> usize {
        self.letters.len()
    }

    pub fn is_empty(&self) -> bool {
        self.letters.is_empty()
    }

    /// `self` followed by `next`.
    pub fn then(&self, next: &GroupWord) -> GroupWord {
        let mut letters = self.letters.clone();
        letters.extend(next.letters.iter().cloned());
        GroupWord { letters }
    }

    pub fn inverse(&self) -> GroupWord {
        GroupWord {
            letters: self
                .letters
                .iter()
                .rev()
                .map(|&(i, e)| (i, -e))
                .collect(),
        }
    }
}

impl fmt::Display for GroupWord {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        if self.letters.is_empty() {
            return write!(f, "id");
        }
        for (i, (gen, exp)) in self.letters.iter().enumerate() {
            if i > 0 {
                write!(f, "*")?;
            }
            write!(f, "s{gen}")?;
            if *exp < 0 {
                write!(f, "^-1")?;
            }
        }
        Ok(())
    }
}

/// Registered swap generators; group words index into this table.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct SwapRegistry {
    mode: SwapMode,
    swaps: Vec<CylinderSwap>,
}

impl SwapRegistry {
    pub fn new(mode: SwapMode) -> SwapRegistry {
        SwapRegistry {
            mode,
            swaps: Vec::new(),
        }
    }

    pub fn mode(&self) -> SwapMode {
        self.mode
    }

    pub fn len(&self) -> usize {
        self.swaps.len()
    }

    pub fn is_empty(&self) -> bool {
        self.swaps.is_empty()
    }

    pub fn swap(&self, index: usize) -> &CylinderSwap {
        &self.swaps[index]
    }

    pub fn swaps(&self) -> &[CylinderSwap] {
        &self.swaps
    }

    /// Registers a swap, returning its generator index; the same unordered
    /// pair yields the same index.
    pub fn register(&mut self, left: Word, right: Word) -> Result<usize, SwapError> {
        let swap = CylinderSwap::new(left, right, self.mode)?;
        for (i, existing) in self.swaps.iter().enumerate() {
            if *existing == swap
                || (existing.left == swap.right && existing.right == swap.left)
            {
                return Ok(i);
            }
        }
        self.swaps.push(swap);
        Ok(self.swaps.len() - 1)
    }

    pub fn check(&self, w: &GroupWord) -> Result<(), SwapError> {
        for &(i, _) in w.letters() {
            if i >= self.swaps.len() {
                return Err(SwapError::UnknownGenerator {
                    index: i,
                    registered: self.swaps.len(),
                });
            }
        }
        Ok(())
    }

    /// Exact image of `s` under the group word (letters applied left to
    /// right; a swap is its own inverse).
    pub fn apply(&self, w: &GroupWord, s: &ClopenSet) -> ClopenSet {
        let mut cur = s.clone();
        for &(i, _) in w.letters() {
            assert!(i < self.swaps.len(), "group word uses unregistered generator s{i}");
            cur = self.swaps[i].apply(&cur);
        }
        cur
    }

    /// Flattens a group word to a single prefix-code rewrite.
    pub fn to_prefix_map(&self, w: &GroupWord) -> PrefixMapHomeo {
        let mut map = PrefixMapHomeo::identity();
        for &(i, exp) in w.letters() {
            assert!(i < self.swaps.len(), "group word uses unregistered generator s{i}");
            let step = self.swaps[i].to_prefix_map();
            let step = if exp < 0 { step.inverse() } else { step };
            map = map.compose(&step);
        }
        map
    }
}

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum PrefixMapError {
    #[error("rule sources do not form a complete prefix-free code")]
    SourcesNotACode,
    #[error("rule targets do not form a complete prefix-free code")]
    TargetsNotACode,
}

/// Bijection of Cantor space given by a finite prefix-code rewrite: the rules
/// `(u_i, v_i)` send `u_i·y` to `v_i·y`, with both the sources and the targets
/// forming complete prefix-free codes.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(try_from = "Vec<(Word, Word)>", into = "Vec<(Word, Word)>")]
pub struct PrefixMapHomeo {
    rules: Vec<(Word, Word)>,
}

impl TryFrom<Vec<(Word, Word)>> for PrefixMapHomeo {
    type Error = PrefixMapError;
    fn try_from(rules: Vec<(Word, Word)>) -> Result<PrefixMapHomeo, PrefixMapError> {
        PrefixMapHomeo::new(rules)
    }
}

impl From<PrefixMapHomeo> for Vec<(Word, Word)> {
    fn from(m: PrefixMapHomeo) -> Vec<(Word, Word)> {
        m.rules
    }
}

/// A word family is a complete prefix-free code iff its cylinders tile the
/// space: union is everything and the uniform masses sum to exactly 1.
fn is_complete_code<'a>(words: impl Iterator<Item = &'a Word> + Clone) -> bool {
    let total: Rat = words
        .clone()
        .map(|w| Rat::new(1, 2).pow(w.len() as u32))
        .sum();
    total == Rat::one() && ClopenSet::from_words(words.cloned()).is_full()
}

impl PrefixMapHomeo {
    pub fn new(mut rules: Vec<(Word, Word)>) -> Result<PrefixMapHomeo, PrefixMapError> {
        if !is_complete_code(rules.iter().map(|(u, _)| u)) {
            return Err(PrefixMapError::SourcesNotACode);
        }
        if !is_complete_code(rules.iter().map(|(_, v)| v)) {
            return Err(PrefixMapError::TargetsNotACode);
        }
        rules.sort();
        Ok(PrefixMapHomeo { rules })
    }

    pub fn identity() -> PrefixMapHomeo {
        PrefixMapHomeo {
            rules: vec![(Word::root(), Word::root())],
        }
    }

    pub fn rules(&self) -> &[(Word, Word)] {
        &self.rules
    }

    pub fn apply(&self, s: &ClopenSet) -> ClopenSet {
        let mut words = Vec::new();
        for (u, v) in &self.rules {
            words.extend(transfer(s, u, v));
        }
        ClopenSet::from_words(words)
    }

    pub fn inverse(&self) -> PrefixMapHomeo {
        let mut rules: Vec<(Word, Word)> = self
            .rules
            .iter()
            .map(|(u, v)| (v.clone(), u.clone()))
            .collect();
        rules.sort();
        PrefixMapHomeo { rules }
    }

    /// `self` followed by `next`, refined to a single rule set.
    pub fn compose(&self, next: &PrefixMapHomeo) -> PrefixMapHomeo {
        let mut rules = Vec::new();
        for (u, v) in &self.rules {
            for (s, t) in &next.rules {
                if let Some(rest) = v.strip_prefix(s) {
                    // v = s·rest: u·y ↦ v·y = s·rest·y ↦ t·rest·y.
                    rules.push((u.clone(), t.concat(&rest)));
                } else if let Some(rest) = s.strip_prefix(v) {
                    if !rest.is_empty() {
                        // s = v·rest: u·rest·z ↦ v·rest·z = s·z ↦ t·z.
                        rules.push((u.concat(&rest), t.clone()));
                    }
                }
            }
        }
        rules.sort();
        PrefixMapHomeo { rules }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rational::rat;
    use crate::words::{clopen, word};
    use proptest::prelude::*;

    fn swap(l: &str, r: &str, mode: SwapMode) -> CylinderSwap {
        CylinderSwap::new(word(l), word(r), mode).unwrap()
    }

    #[test]
    fn identity_fixes_sets() {
        let s = clopen(&["00", "101"]);
        assert_eq!(PrefixMapHomeo::identity().apply(&s), s);
        let mut reg = SwapRegistry::new(SwapMode::AllSwaps);
        reg.register(word("0"), word("1")).unwrap();
        assert_eq!(reg.apply(&GroupWord::identity(), &s), s);
    }

    #[test]
    fn single_swap_moves_a_cylinder() {
        let g = swap("00", "01", SwapMode::AllSwaps);
        assert_eq!(g.apply(&clopen(&["00"])), clopen(&["01"]));
        assert_eq!(g.apply(&clopen(&["01"])), clopen(&["00"]));
        assert_eq!(g.apply(&clopen(&["1"])), clopen(&["1"]));
    }

    #[test]
    fn depth_one_swap_on_mixed_set() {
        // swap([0]↔[1]) on {[00],[1]}: [00] → [10], [1] → [0].
        let g = swap("0", "1", SwapMode::AllSwaps);
        assert_eq!(g.apply(&clopen(&["00", "1"])), clopen(&["10", "0"]));
    }

    #[test]
    fn swap_validation() {
        assert_eq!(
            CylinderSwap::new(word("0"), word("01"), SwapMode::AllSwaps),
            Err(SwapError::LengthMismatch(word("0"), word("01")))
        );
        assert_eq!(
            CylinderSwap::new(word("01"), word("01"), SwapMode::AllSwaps),
            Err(SwapError::EqualWords(word("01")))
        );
        assert_eq!(
            CylinderSwap::new(word("00"), word("01"), SwapMode::WeightPreserving),
            Err(SwapError::WeightMismatch(word("00"), word("01")))
        );
        assert!(CylinderSwap::new(word("01"), word("10"), SwapMode::WeightPreserving).is_ok());
    }

    #[test]
    fn registry_dedups_both_orientations() {
        let mut reg = SwapRegistry::new(SwapMode::AllSwaps);
        let a = reg.register(word("00"), word("01")).unwrap();
        let b = reg.register(word("01"), word("00")).unwrap();
        let c = reg.register(word("00"), word("10")).unwrap();
        assert_eq!(a, b);
        assert_ne!(a, c);
        assert_eq!(reg.len(), 2);
    }

    #[test]
    fn group_word_algebra() {
        let w = GroupWord::generator(2).then(&GroupWord::generator(5).inverse());
        assert_eq!(w.letters(), &[(2, 1), (5, -1)]);
        assert_eq!(w.inverse().letters(), &[(5, 1), (2, -1)]);
        assert_eq!(w.to_string(), "s2*s5^-1");
        assert_eq!(GroupWord::identity().to_string(), "id");
        let json = serde_json::to_string(&w).unwrap();
        assert_eq!(json, "[[2,1],[5,-1]]");
    }

    #[test]
    fn swap_prefix_map_matches_direct_apply() {
        let g = swap("01", "10", SwapMode::WeightPreserving);
        let m = g.to_prefix_map();
        for s in [
            clopen(&["0"]),
            clopen(&["011", "10"]),
            clopen(&["1"]),
            ClopenSet::full(),
        ] {
            assert_eq!(m.apply(&s), g.apply(&s));
        }
    }

    #[test]
    fn prefix_map_validation_rejects_incomplete_codes() {
        assert_eq!(
            PrefixMapHomeo::new(vec![(word("0"), word("0"))]),
            Err(PrefixMapError::SourcesNotACode)
        );
        assert_eq!(
            PrefixMapHomeo::new(vec![(word("0"), word("00")), (word("1"), word("01"))]),
            Err(PrefixMapError::TargetsNotACode)
        );
        // Duplicated source word is caught by the tiling test.
        assert!(PrefixMapHomeo::new(vec![
            (word("0"), word("0")),
            (word("0"), word("10")),
            (word("1"), word("11")),
        ])
        .is_err());
    }

    #[test]
    fn compose_and_inverse_round_trip() {
        let mut reg = SwapRegistry::new(SwapMode::AllSwaps);
        let a = reg.register(word("0"), word("1")).unwrap();
        let b = reg.register(word("00"), word("01")).unwrap();
        let w = GroupWord::generator(a).then(&GroupWord::generator(b));
        let m = reg.to_prefix_map(&w);
        let s = clopen(&["001", "1"]);
        assert_eq!(m.apply(&s), reg.apply(&w, &s));
        assert_eq!(m.compose(&m.inverse()).apply(&s), s);
        assert_eq!(reg.apply(&w.then(&w.inverse()), &s), s);
    }

    prop_compose! {
        fn arb_word(max_len: usize)(len in 0..=max_len)(bits in proptest::collection::vec(0u8..2, len)) -> Word {
            bits.iter().map(|b| if *b == 0 { '0' } else { '1' }).collect::<String>().parse().unwrap()
        }
    }

    fn arb_clopen(depth: usize) -> impl Strategy<Value = ClopenSet> {
        proptest::collection::vec(arb_word(depth), 0..6)
            .prop_map(ClopenSet::from_words)
    }

    fn arb_swap(mode: SwapMode) -> impl Strategy<Value = CylinderSwap> {
        (1usize..=3, any::<u64>(), any::<u64>()).prop_filter_map(
            "need two distinct words, equal weight in weight mode",
            move |(len, a, b)| {
                let wa: Word = (0..len)
                    .map(|i| if (a >> i) & 1 == 0 { '0' } else { '1' })
                    .collect::<String>()
                    .parse()
                    .unwrap();
                let wb: Word = (0..len)
                    .map(|i| if (b >> i) & 1 == 0 { '0' } else { '1' })
                    .collect::<String>()
                    .parse()
                    .unwrap();
                CylinderSwap::new(wa, wb, mode).ok()
            },
        )
    }

    proptest! {
        #[test]
        fn all_swaps_preserve_uniform_measure(g in arb_swap(SwapMode::AllSwaps), s in arb_clopen(4)) {
            prop_assert_eq!(g.apply(&s).measure(&rat(1, 2)), s.measure(&rat(1, 2)));
        }

        #[test]
        fn weight_swaps_preserve_every_bernoulli(g in arb_swap(SwapMode::WeightPreserving), s in arb_clopen(4)) {
            for p in [rat(1, 2), rat(1, 3), rat(2, 5)] {
                prop_assert_eq!(g.apply(&s).measure(&p), s.measure(&p));
            }
        }

        #[test]
        fn swaps_are_involutions(g in arb_swap(SwapMode::AllSwaps), s in arb_clopen(4)) {
            prop_assert_eq!(g.apply(&g.apply(&s)), s);
        }

        #[test]
        fn swaps_respect_complement(g in arb_swap(SwapMode::AllSwaps), s in arb_clopen(4)) {
            prop_assert_eq!(g.apply(&s.complement()), g.apply(&s).complement());
        }
    }
}
