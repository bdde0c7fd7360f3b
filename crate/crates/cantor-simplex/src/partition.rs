//! Column partitions of clopen sets and approximate division.
//!
//! A dividing partition arranges a clopen set into columns: a base together
//! with at least `N` registered group elements sweeping out pairwise disjoint
//! copies of it. Because every witness preserves the invariant measures of
//! the generator family, all atoms of a column have exactly equal mass, which
//! is what makes the division bound exact. The merge operations combine
//! partitions of overlapping sets by refining columns and re-hanging the
//! overlap on top of existing columns, never breaking the column structure.

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::prefix_map::{GroupWord, SwapError, SwapMode, SwapRegistry};
use crate::rational::Rat;
use crate::words::{ClopenSet, Word};

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum PartitionError {
    #[error("cannot build a partition of the empty set")]
    EmptySet,
    #[error("partitions have different column floors ({left} vs {right})")]
    MismatchedFloor { left: usize, right: usize },
    #[error("column index {index} out of range ({count} columns)")]
    ColumnIndex { index: usize, count: usize },
    #[error("atom index {index} out of range in column {column} ({count} atoms)")]
    AtomIndex { column: usize, index: usize, count: usize },
    #[error("the given pieces do not partition the base of column {column}")]
    NotAPartitionOfBase { column: usize },
    #[error("cannot add an empty set on top of a column")]
    EmptyTop,
    #[error("the set to add intersects the covered set")]
    TopOverlapsCovered,
    #[error("the group word does not map the chosen atom onto the set to add")]
    TopImageMismatch,
    #[error("column {column} has {arity} witnesses, needs at least {need}")]
    ArityTooSmall { column: usize, arity: usize, need: usize },
    #[error("column {column} has an empty base")]
    EmptyBase { column: usize },
    #[error("atom {atom} of column {column} overlaps an earlier atom")]
    OverlappingAtoms { column: usize, atom: usize },
    #[error("the union of the column atoms differs from the covered set")]
    CoverMismatch,
    #[error("word budget exhausted: {detail}")]
    BudgetExhausted { detail: String },
    #[error("division count must be at least 1")]
    BadDivisor,
    #[error("eps must be positive, got {0}")]
    BadEpsilon(Rat),
    #[error("Bernoulli parameter {0} is not in (0,1)")]
    BadMeasure(Rat),
    #[error("measure Bernoulli({0}) is not invariant under the all-swaps family; only 1/2 is")]
    MeasureNotInvariant(Rat),
    #[error(transparent)]
    Swap(#[from] SwapError),
}

/// One column: a base plus the witnesses sweeping out its copies. Atom `0`
/// is the base itself; atom `j >= 1` is `witnesses[j-1]` applied to the base.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Column {
    pub base: ClopenSet,
    pub witnesses: Vec<GroupWord>,
}

impl Column {
    pub fn arity(&self) -> usize {
        self.witnesses.len()
    }

    pub fn witness_to_atom(&self, j: usize) -> GroupWord {
        if j == 0 {
            GroupWord::identity()
        } else {
            self.witnesses[j - 1].clone()
        }
    }

    pub fn atom(&self, reg: &SwapRegistry, j: usize) -> ClopenSet {
        if j == 0 {
            self.base.clone()
        } else {
            reg.apply(&self.witnesses[j - 1], &self.base)
        }
    }

    pub fn atoms(&self, reg: &SwapRegistry) -> Vec<ClopenSet> {
        (0..=self.arity()).map(|j| self.atom(reg, j)).collect()
    }

    pub fn union_of_atoms(&self, reg: &SwapRegistry) -> ClopenSet {
        self.atoms(reg)
            .into_iter()
            .fold(ClopenSet::empty(), |acc, a| acc.union(&a))
    }
}

/// Clopen partition of `covered` into columns of at least `floor` witnesses
/// each.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct DividingPartition {
    /// Minimum witness count per column (the `N` of an N-dividing partition).
    #[serde(rename = "N")]
    pub floor: usize,
    pub covered: ClopenSet,
    pub columns: Vec<Column>,
}

impl DividingPartition {
    /// Single-column partition; the covered set is derived from the column.
    pub fn single(floor: usize, column: Column, reg: &SwapRegistry) -> DividingPartition {
        DividingPartition {
            floor,
            covered: column.union_of_atoms(reg),
            columns: vec![column],
        }
    }

    /// Full invariant check: arity floor, pairwise disjoint atoms, exact
    /// cover.
    pub fn validate(&self, reg: &SwapRegistry) -> Result<(), PartitionError> {
        let mut seen = ClopenSet::empty();
        for (ci, col) in self.columns.iter().enumerate() {
            if col.arity() < self.floor {
                return Err(PartitionError::ArityTooSmall {
                    column: ci,
                    arity: col.arity(),
                    need: self.floor,
                });
            }
            if col.base.is_empty() {
                return Err(PartitionError::EmptyBase { column: ci });
            }
            for (j, atom) in col.atoms(reg).into_iter().enumerate() {
                if !atom.is_disjoint(&seen) {
                    return Err(PartitionError::OverlappingAtoms { column: ci, atom: j });
                }
                seen = seen.union(&atom);
            }
        }
        if seen != self.covered {
            return Err(PartitionError::CoverMismatch);
        }
        Ok(())
    }
}

/// Splits each part by the cut, keeping nonempty halves.
fn split_parts(parts: Vec<ClopenSet>, cut: &ClopenSet) -> Vec<ClopenSet> {
    let mut next = Vec::with_capacity(parts.len() + 1);
    for p in parts {
        let inside = p.intersect(cut);
        if inside.is_empty() {
            next.push(p);
            continue;
        }
        let outside = p.difference(cut);
        if outside.is_empty() {
            next.push(p);
        } else {
            next.push(inside);
            next.push(outside);
        }
    }
    next
}

/// Replaces column `index` by one column per piece of `base_parts`, all
/// sharing the original witnesses; the covered set is unchanged.
pub fn refine_column(
    part: &DividingPartition,
    index: usize,
    base_parts: &[ClopenSet],
) -> Result<DividingPartition, PartitionError> {
    let col = part
        .columns
        .get(index)
        .ok_or(PartitionError::ColumnIndex {
            index,
            count: part.columns.len(),
        })?;
    let mut union = ClopenSet::empty();
    for piece in base_parts {
        if piece.is_empty() || !piece.is_disjoint(&union) {
            return Err(PartitionError::NotAPartitionOfBase { column: index });
        }
        union = union.union(piece);
    }
    if union != col.base {
        return Err(PartitionError::NotAPartitionOfBase { column: index });
    }
    let mut out = part.clone();
    let replacement: Vec<Column> = base_parts
        .iter()
        .map(|piece| Column {
            base: piece.clone(),
            witnesses: col.witnesses.clone(),
        })
        .collect();
    out.columns.splice(index..=index, replacement);
    Ok(out)
}

/// Extends column `column` by one atom: `v`, reached from atom `atom_j` by
/// `g`. The new witness is the old one followed by `g`; the covered set grows
/// by `v`.
pub fn add_on_top(
    part: &DividingPartition,
    reg: &SwapRegistry,
    column: usize,
    atom_j: usize,
    v: &ClopenSet,
    g: &GroupWord,
) -> Result<DividingPartition, PartitionError> {
    let col = part
        .columns
        .get(column)
        .ok_or(PartitionError::ColumnIndex {
            index: column,
            count: part.columns.len(),
        })?;
    if atom_j > col.arity() {
        return Err(PartitionError::AtomIndex {
            column,
            index: atom_j,
            count: col.arity() + 1,
        });
    }
    if v.is_empty() {
        return Err(PartitionError::EmptyTop);
    }
    if !v.is_disjoint(&part.covered) {
        return Err(PartitionError::TopOverlapsCovered);
    }
    if reg.apply(g, &col.atom(reg, atom_j)) != *v {
        return Err(PartitionError::TopImageMismatch);
    }
    let mut out = part.clone();
    let witness = col.witness_to_atom(atom_j).then(g);
    out.columns[column].witnesses.push(witness);
    out.covered = out.covered.union(v);
    Ok(out)
}

/// One absorption step: intersects the column base with the covered set,
/// refines the partition so every atom maps inside or outside the covered
/// set under every column witness, hangs the escaping images on top, and
/// returns the partition together with the untouched residual column
/// (base minus covered, same witnesses).
pub fn merge_single_column(
    part: &DividingPartition,
    reg: &SwapRegistry,
    col: &Column,
) -> Result<(DividingPartition, Column), PartitionError> {
    let v = col.base.intersect(&part.covered);
    if v.is_empty() {
        return Ok((part.clone(), col.clone()));
    }
    let residual = Column {
        base: col.base.difference(&part.covered),
        witnesses: col.witnesses.clone(),
    };
    // Cells of the partition of V generated by the witness pullbacks of the
    // covered set: each cell maps fully inside or fully outside the covered
    // set under every column witness.
    let mut cells = vec![v.clone()];
    for h in &col.witnesses {
        let pull = v.intersect(&reg.apply(&h.inverse(), &part.covered));
        cells = split_parts(cells, &pull);
    }
    // Refine every column so each atom is inside or outside every cell.
    let mut refined = DividingPartition {
        floor: part.floor,
        covered: part.covered.clone(),
        columns: Vec::new(),
    };
    for column in &part.columns {
        let mut base_parts = vec![column.base.clone()];
        for j in 0..=column.arity() {
            let atom = column.atom(reg, j);
            let back = column.witness_to_atom(j).inverse();
            for cell in &cells {
                let x = atom.intersect(cell);
                if x.is_empty() {
                    continue;
                }
                let pulled = if j == 0 { x } else { reg.apply(&back, &x) };
                base_parts = split_parts(base_parts, &pulled);
            }
        }
        for base in base_parts {
            refined.columns.push(Column {
                base,
                witnesses: column.witnesses.clone(),
            });
        }
    }
    // Hang the images of absorbed atoms on top wherever they escape the
    // covered set.
    for ci in 0..refined.columns.len() {
        let arity = refined.columns[ci].arity();
        for j in 0..=arity {
            let atom = refined.columns[ci].atom(reg, j);
            if !atom.is_subset(&v) {
                continue;
            }
            for h in &col.witnesses {
                let image = reg.apply(h, &atom);
                if image.is_disjoint(&refined.covered) {
                    refined = add_on_top(&refined, reg, ci, j, &image, h)?;
                }
            }
        }
    }
    Ok((refined, residual))
}

/// Combines two partitions with the same floor into one covering the union
/// of their sets: each column of `pb` is absorbed atom by atom (rebasing the
/// column at each atom in turn), and whatever stays outside is appended as a
/// shrunken column.
pub fn merge_partitions(
    pa: &DividingPartition,
    pb: &DividingPartition,
    reg: &SwapRegistry,
) -> Result<DividingPartition, PartitionError> {
    if pa.floor != pb.floor {
        return Err(PartitionError::MismatchedFloor {
            left: pa.floor,
            right: pb.floor,
        });
    }
    let mut acc = pa.clone();
    if acc.covered.is_disjoint(&pb.covered) {
        acc.columns.extend(pb.columns.iter().cloned());
        acc.covered = acc.covered.union(&pb.covered);
        return Ok(acc);
    }
    for col in &pb.columns {
        let mut base = col.base.clone();
        for t in 0..=col.arity() {
            if base.is_empty() {
                break;
            }
            let to_t = col.witness_to_atom(t);
            let from_t = to_t.inverse();
            let rebased = Column {
                base: reg.apply(&to_t, &base),
                witnesses: (0..=col.arity())
                    .filter(|j| *j != t)
                    .map(|j| from_t.then(&col.witness_to_atom(j)))
                    .collect(),
            };
            let (next, residual) = merge_single_column(&acc, reg, &rebased)?;
            acc = next;
            base = reg.apply(&from_t, &residual.base);
        }
        if !base.is_empty() {
            let column = Column {
                base,
                witnesses: col.witnesses.clone(),
            };
            acc.covered = acc.covered.union(&column.union_of_atoms(reg));
            acc.columns.push(column);
        }
    }
    Ok(acc)
}

/// Smallest `t` with `2^t >= x`.
fn ceil_log2(x: usize) -> usize {
    x.next_power_of_two().trailing_zeros() as usize
}

/// Builds a partition of `a` with at least `floor` witnesses per column,
/// registering the needed swap generators. In all-swaps mode every maximal
/// cylinder is subdivided to the next power of two; in weight-preserving mode
/// the leaves of `a` are grouped by weight at increasing depth until every
/// class can host a column, which can honestly fail: the extreme weight
/// classes never grow with depth.
pub fn cover_clopen(
    a: &ClopenSet,
    floor: usize,
    reg: &mut SwapRegistry,
    word_budget: usize,
) -> Result<DividingPartition, PartitionError> {
    if a.is_empty() {
        return Err(PartitionError::EmptySet);
    }
    let pieces = match reg.mode() {
        SwapMode::AllSwaps => cover_all_swaps(a, floor, reg, word_budget)?,
        SwapMode::WeightPreserving => cover_weight(a, floor, reg, word_budget)?,
    };
    let mut it = pieces.into_iter();
    let mut acc = it.next().expect("nonempty set yields at least one piece");
    for p in it {
        acc = merge_partitions(&acc, &p, reg)?;
    }
    Ok(acc)
}

fn cover_all_swaps(
    a: &ClopenSet,
    floor: usize,
    reg: &mut SwapRegistry,
    word_budget: usize,
) -> Result<Vec<DividingPartition>, PartitionError> {
    let depth = ceil_log2(floor + 1);
    let mut pieces = Vec::new();
    for u in a.words() {
        if u.len() + depth > word_budget {
            return Err(PartitionError::BudgetExhausted {
                detail: format!(
                    "cylinder [{u}] needs words of length {}, budget is {word_budget}",
                    u.len() + depth
                ),
            });
        }
        let leaves = u.extensions(u.len() + depth);
        let base_word = leaves[0].clone();
        let mut witnesses = Vec::with_capacity(leaves.len() - 1);
        for leaf in &leaves[1..] {
            let idx = reg.register(base_word.clone(), leaf.clone())?;
            witnesses.push(GroupWord::generator(idx));
        }
        pieces.push(DividingPartition {
            floor,
            covered: ClopenSet::cylinder(u.clone()),
            columns: vec![Column {
                base: ClopenSet::cylinder(base_word),
                witnesses,
            }],
        });
    }
    Ok(pieces)
}

fn cover_weight(
    a: &ClopenSet,
    floor: usize,
    reg: &mut SwapRegistry,
    word_budget: usize,
) -> Result<Vec<DividingPartition>, PartitionError> {
    let need = floor + 1;
    let mut depth = a.max_word_len();
    loop {
        if depth > word_budget {
            return Err(PartitionError::BudgetExhausted {
                detail: format!("no depth up to {word_budget} splits every weight class into {need} leaves"),
            });
        }
        let leaves = a.leaves_at_depth(depth);
        if leaves.len() > 1 << 17 {
            return Err(PartitionError::BudgetExhausted {
                detail: format!("leaf enumeration at depth {depth} is too large"),
            });
        }
        let mut classes: BTreeMap<usize, Vec<Word>> = BTreeMap::new();
        for w in leaves {
            classes.entry(w.ones()).or_default().push(w);
        }
        if classes.values().all(|c| c.len() >= need) {
            let mut pieces = Vec::new();
            for class in classes.values() {
                let base_word = class[0].clone();
                let mut witnesses = Vec::with_capacity(class.len() - 1);
                for leaf in &class[1..] {
                    let idx = reg.register(base_word.clone(), leaf.clone())?;
                    witnesses.push(GroupWord::generator(idx));
                }
                pieces.push(DividingPartition {
                    floor,
                    covered: ClopenSet::from_words(class.iter().cloned()),
                    columns: vec![Column {
                        base: ClopenSet::cylinder(base_word),
                        witnesses,
                    }],
                });
            }
            return Ok(pieces);
        }
        // Deepening sends each minimal-weight leaf w to w·0 and creates no
        // other leaf of that weight, so the extreme classes have constant
        // size; if one of them is short, no budget can help.
        let lightest = classes.values().next().expect("nonempty set has leaves");
        let heaviest = classes.values().next_back().expect("nonempty set has leaves");
        if lightest.len() < need || heaviest.len() < need {
            return Err(PartitionError::BudgetExhausted {
                detail: format!(
                    "an extreme weight class has {} leaves at every depth, need {need}",
                    lightest.len().min(heaviest.len())
                ),
            });
        }
        depth += 1;
    }
}

/// Exact per-measure verdicts for one approximate division.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct MeasureCheck {
    pub p: Rat,
    pub mu_a: Rat,
    pub mu_b0: Rat,
    /// μ(A) − ε <= n·μ(B0)
    pub lower_holds: bool,
    /// n·μ(B0) <= μ(A)
    pub upper_holds: bool,
    /// μ(A) − n·μ(B0) <= (n−1)/N · μ(A)
    pub internal_bound_holds: bool,
    pub base_mass: Rat,
    /// Σ μ(bases) < μ(A)/N
    pub base_mass_holds: bool,
    pub b_masses: Vec<Rat>,
    pub b_masses_equal: bool,
}

impl MeasureCheck {
    pub fn all_hold(&self) -> bool {
        self.lower_holds
            && self.upper_holds
            && self.internal_bound_holds
            && self.base_mass_holds
            && self.b_masses_equal
    }
}

/// Result of an approximate division: the sets `B_0..B_{n-1}`, the partition
/// they were read from, and the exact verdicts.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct DivisionReport {
    pub n: usize,
    pub eps: Rat,
    /// The chosen column floor: smallest integer > n/eps.
    #[serde(rename = "N")]
    pub floor: usize,
    pub b_sets: Vec<ClopenSet>,
    pub b_disjoint_in_a: bool,
    pub partition: DividingPartition,
    pub checks: Vec<MeasureCheck>,
}

impl DivisionReport {
    pub fn b(&self) -> &ClopenSet {
        &self.b_sets[0]
    }

    pub fn all_hold(&self) -> bool {
        self.b_disjoint_in_a && self.checks.iter().all(MeasureCheck::all_hold)
    }
}

/// Divides `a` into `n` nearly equal clopen pieces: builds a partition with
/// floor chosen from `eps`, deals the column atoms round-robin into
/// `B_0..B_{n-1}` (dropping at most n−1 leftovers per column), and certifies
/// `μ(a) − eps <= n·μ(B_0) <= μ(a)` exactly for every supplied measure.
pub fn approx_divide(
    a: &ClopenSet,
    n: usize,
    eps: &Rat,
    reg: &mut SwapRegistry,
    measures: &[Rat],
    word_budget: usize,
) -> Result<DivisionReport, PartitionError> {
    if n == 0 {
        return Err(PartitionError::BadDivisor);
    }
    if !eps.is_positive() {
        return Err(PartitionError::BadEpsilon(eps.clone()));
    }
    if a.is_empty() {
        return Err(PartitionError::EmptySet);
    }
    let measures: Vec<Rat> = if measures.is_empty() {
        vec![Rat::new(1, 2)]
    } else {
        measures.to_vec()
    };
    let half = Rat::new(1, 2);
    for p in &measures {
        if !p.is_positive() || *p >= Rat::one() {
            return Err(PartitionError::BadMeasure(p.clone()));
        }
        if reg.mode() == SwapMode::AllSwaps && *p != half {
            return Err(PartitionError::MeasureNotInvariant(p.clone()));
        }
    }
    let floor = (Rat::from_int(n as i64) / eps).floor_usize() + 1;
    let partition = cover_clopen(a, floor, reg, word_budget)?;

    let mut b_sets = vec![ClopenSet::empty(); n];
    for col in &partition.columns {
        let atoms = col.atoms(reg);
        let per = atoms.len() / n;
        for (k, b) in b_sets.iter_mut().enumerate() {
            for l in 0..per {
                *b = b.union(&atoms[k + n * l]);
            }
        }
    }
    let mut b_disjoint_in_a = true;
    let mut seen = ClopenSet::empty();
    for b in &b_sets {
        if !b.is_disjoint(&seen) || !b.is_subset(a) {
            b_disjoint_in_a = false;
        }
        seen = seen.union(b);
    }

    let n_rat = Rat::from_int(n as i64);
    let floor_rat = Rat::from_int(floor as i64);
    let checks = measures
        .iter()
        .map(|p| {
            let mu_a = a.measure(p);
            let mu_b0 = b_sets[0].measure(p);
            let scaled = &n_rat * &mu_b0;
            let slack = Rat::from_int(n as i64 - 1) / &floor_rat * &mu_a;
            let base_mass: Rat = partition.columns.iter().map(|c| c.base.measure(p)).sum();
            let b_masses: Vec<Rat> = b_sets.iter().map(|b| b.measure(p)).collect();
            let b_masses_equal = b_masses.windows(2).all(|w| w[0] == w[1]);
            MeasureCheck {
                p: p.clone(),
                lower_holds: &mu_a - eps <= scaled,
                upper_holds: scaled <= mu_a,
                internal_bound_holds: &mu_a - &scaled <= slack,
                base_mass_holds: &base_mass * &floor_rat < mu_a,
                base_mass,
                mu_a,
                mu_b0,
                b_masses,
                b_masses_equal,
            }
        })
        .collect();

    Ok(DivisionReport {
        n,
        eps: eps.clone(),
        floor,
        b_sets,
        b_disjoint_in_a,
        partition,
        checks,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rational::rat;
    use crate::words::{clopen, word};
    use proptest::prelude::*;

    /// Brute-force check: arity floor, pairwise disjointness, exact cover,
    /// via full cylinder enumeration at a depth covering every word involved.
    fn cover_oracle(part: &DividingPartition, reg: &SwapRegistry) {
        let atoms: Vec<ClopenSet> = part
            .columns
            .iter()
            .flat_map(|c| c.atoms(reg))
            .collect();
        let depth = atoms
            .iter()
            .map(ClopenSet::max_word_len)
            .chain([part.covered.max_word_len()])
            .max()
            .unwrap_or(0);
        for w in Word::root().extensions(depth) {
            let want = usize::from(part.covered.contains_point_cylinder(&w));
            let hits = atoms
                .iter()
                .filter(|a| a.contains_point_cylinder(&w))
                .count();
            assert_eq!(hits, want, "cylinder [{w}] covered {hits} times, want {want}");
        }
        for (ci, col) in part.columns.iter().enumerate() {
            assert!(col.arity() >= part.floor, "column {ci} below floor");
        }
    }

    /// Registry with one all-swaps partition of [0]: base [00], swap 00↔01.
    fn simple_cover() -> (SwapRegistry, DividingPartition) {
        let mut reg = SwapRegistry::new(SwapMode::AllSwaps);
        let part = cover_clopen(&clopen(&["0"]), 1, &mut reg, 8).unwrap();
        (reg, part)
    }

    #[test]
    fn cover_of_half_space_is_one_swap_column() {
        let (reg, part) = simple_cover();
        assert_eq!(part.columns.len(), 1);
        assert_eq!(part.columns[0].base, clopen(&["00"]));
        assert_eq!(part.columns[0].atoms(&reg)[1], clopen(&["01"]));
        part.validate(&reg).unwrap();
        cover_oracle(&part, &reg);
    }

    #[test]
    fn cover_examples_from_small_cases() {
        // [0] with floor 2: base [000], swaps to 001, 010, 011.
        let mut reg = SwapRegistry::new(SwapMode::AllSwaps);
        let part = cover_clopen(&clopen(&["0"]), 2, &mut reg, 8).unwrap();
        assert_eq!(part.columns.len(), 1);
        assert_eq!(part.columns[0].base, clopen(&["000"]));
        let atoms = part.columns[0].atoms(&reg);
        assert_eq!(
            atoms,
            vec![
                clopen(&["000"]),
                clopen(&["001"]),
                clopen(&["010"]),
                clopen(&["011"]),
            ]
        );
        part.validate(&reg).unwrap();

        // Full space with floor 2^3 - 1: one column of all depth-3 cylinders.
        let mut reg = SwapRegistry::new(SwapMode::AllSwaps);
        let part = cover_clopen(&ClopenSet::full(), 7, &mut reg, 8).unwrap();
        assert_eq!(part.columns.len(), 1);
        assert_eq!(part.columns[0].arity(), 7);
        assert_eq!(part.columns[0].base, clopen(&["000"]));
        part.validate(&reg).unwrap();
        cover_oracle(&part, &reg);
    }

    #[test]
    fn cover_weight_mode_single_class() {
        let mut reg = SwapRegistry::new(SwapMode::WeightPreserving);
        let part = cover_clopen(&clopen(&["01", "10"]), 1, &mut reg, 8).unwrap();
        assert_eq!(part.columns.len(), 1);
        assert_eq!(part.columns[0].base, clopen(&["01"]));
        assert_eq!(part.columns[0].atoms(&reg)[1], clopen(&["10"]));
        part.validate(&reg).unwrap();
    }

    #[test]
    fn cover_weight_mode_full_space_exhausts() {
        // Weight swaps fix the all-zero tail, so the full space cannot be
        // arranged into columns: the lightest class is a singleton forever.
        let mut reg = SwapRegistry::new(SwapMode::WeightPreserving);
        let err = cover_clopen(&ClopenSet::full(), 1, &mut reg, 10).unwrap_err();
        assert!(matches!(err, PartitionError::BudgetExhausted { .. }));
    }

    #[test]
    fn cover_budget_exceeded_all_swaps() {
        let mut reg = SwapRegistry::new(SwapMode::AllSwaps);
        let err = cover_clopen(&clopen(&["0"]), 7, &mut reg, 3).unwrap_err();
        assert!(matches!(err, PartitionError::BudgetExhausted { .. }));
    }

    #[test]
    fn refine_column_replicates_along_witnesses() {
        // Base [00] swapped to 01, 10, 11; splitting the base at depth 3
        // doubles the columns and keeps the cover.
        let mut reg = SwapRegistry::new(SwapMode::AllSwaps);
        let part = cover_clopen(&ClopenSet::full(), 3, &mut reg, 8).unwrap();
        assert_eq!(part.columns[0].base, clopen(&["00"]));
        let split = [clopen(&["000"]), clopen(&["001"])];
        let refined = refine_column(&part, 0, &split).unwrap();
        assert_eq!(refined.columns.len(), 2);
        assert_eq!(refined.columns[0].base, clopen(&["000"]));
        assert_eq!(refined.columns[1].base, clopen(&["001"]));
        assert_eq!(refined.columns[0].atoms(&reg).len(), 4);
        assert_eq!(refined.covered, part.covered);
        refined.validate(&reg).unwrap();
        cover_oracle(&refined, &reg);

        // Splitting the base into itself changes nothing.
        let same = refine_column(&part, 0, &[part.columns[0].base.clone()]).unwrap();
        assert_eq!(same, part);

        // A non-partition is rejected.
        let err = refine_column(&part, 0, &[clopen(&["000"])]).unwrap_err();
        assert_eq!(err, PartitionError::NotAPartitionOfBase { column: 0 });
    }

    #[test]
    fn add_on_top_extends_a_column() {
        let (mut reg, part) = simple_cover();
        let s = reg.register(word("01"), word("10")).unwrap();
        let g = GroupWord::generator(s);
        // [10] is the image of atom 1 = [01] and is untouched so far.
        let grown = add_on_top(&part, &reg, 0, 1, &clopen(&["10"]), &g).unwrap();
        assert_eq!(grown.columns[0].arity(), 2);
        assert_eq!(grown.columns[0].atoms(&reg)[2], clopen(&["10"]));
        assert_eq!(grown.covered, clopen(&["0", "10"]));
        grown.validate(&reg).unwrap();
        cover_oracle(&grown, &reg);

        // Overlapping the covered set is rejected.
        let bad = reg.register(word("01"), word("00")).unwrap();
        let err = add_on_top(&part, &reg, 0, 1, &clopen(&["00"]), &GroupWord::generator(bad));
        assert_eq!(err.unwrap_err(), PartitionError::TopOverlapsCovered);

        // A wrong image is rejected.
        let err = add_on_top(&part, &reg, 0, 0, &clopen(&["10"]), &g);
        assert_eq!(err.unwrap_err(), PartitionError::TopImageMismatch);
    }

    #[test]
    fn merge_single_column_disjoint_is_a_no_op() {
        let (mut reg, part) = simple_cover();
        let s = reg.register(word("10"), word("11")).unwrap();
        let col = Column {
            base: clopen(&["10"]),
            witnesses: vec![GroupWord::generator(s)],
        };
        let (merged, residual) = merge_single_column(&part, &reg, &col).unwrap();
        assert_eq!(merged, part);
        assert_eq!(residual, col);
    }

    #[test]
    fn merge_single_column_fully_inside_leaves_no_residual() {
        // Partition of the full space (base [0], swap 0↔1); the column
        // ([00] ↔ [01]) sits entirely inside, so it is absorbed whole.
        let mut reg = SwapRegistry::new(SwapMode::AllSwaps);
        let part = cover_clopen(&ClopenSet::full(), 1, &mut reg, 8).unwrap();
        let s = reg.register(word("00"), word("01")).unwrap();
        let col = Column {
            base: clopen(&["00"]),
            witnesses: vec![GroupWord::generator(s)],
        };
        let (merged, residual) = merge_single_column(&part, &reg, &col).unwrap();
        assert!(residual.base.is_empty());
        assert_eq!(merged.covered, ClopenSet::full());
        merged.validate(&reg).unwrap();
        cover_oracle(&merged, &reg);
    }

    #[test]
    fn merge_partitions_absorbs_overlap_on_top() {
        // Partition of [0] plus a column ([01] ↔ [10]): the overlap [01] is
        // already covered, so [10] is hung on top of the existing column.
        let (mut reg, part) = simple_cover();
        let s = reg.register(word("01"), word("10")).unwrap();
        let col = Column {
            base: clopen(&["01"]),
            witnesses: vec![GroupWord::generator(s)],
        };
        let pb = DividingPartition::single(1, col, &reg);
        let merged = merge_partitions(&part, &pb, &reg).unwrap();
        assert_eq!(merged.covered, clopen(&["0", "10"]));
        assert_eq!(merged.columns.len(), 1);
        assert_eq!(merged.columns[0].arity(), 2);
        merged.validate(&reg).unwrap();
        cover_oracle(&merged, &reg);
    }

    #[test]
    fn merge_partitions_splits_at_the_generated_partition() {
        // The second column's witness sends [11] to {000, 101}, half inside
        // the covered set [0] and half outside; the existing column must
        // split at exactly {000} and re-hang the escaping pieces.
        let (mut reg, part) = simple_cover();
        let sa = reg.register(word("11"), word("00")).unwrap();
        let sb = reg.register(word("001"), word("101")).unwrap();
        let w = GroupWord::generator(sa).then(&GroupWord::generator(sb));
        let col = Column {
            base: clopen(&["11"]),
            witnesses: vec![w],
        };
        assert_eq!(col.atom(&reg, 1), clopen(&["000", "101"]));
        let pb = DividingPartition::single(1, col, &reg);
        let merged = merge_partitions(&part, &pb, &reg).unwrap();
        assert_eq!(merged.covered, clopen(&["0", "11", "101"]));
        let bases: Vec<ClopenSet> = merged.columns.iter().map(|c| c.base.clone()).collect();
        assert!(bases.contains(&clopen(&["000"])));
        assert!(bases.contains(&clopen(&["001"])));
        merged.validate(&reg).unwrap();
        cover_oracle(&merged, &reg);
    }

    #[test]
    fn merge_partitions_disjoint_is_column_union() {
        let (mut reg, part) = simple_cover();
        let s = reg.register(word("10"), word("11")).unwrap();
        let col = Column {
            base: clopen(&["10"]),
            witnesses: vec![GroupWord::generator(s)],
        };
        let pb = DividingPartition::single(1, col, &reg);
        let merged = merge_partitions(&part, &pb, &reg).unwrap();
        assert_eq!(merged.columns.len(), 2);
        assert!(merged.covered.is_full());
        merged.validate(&reg).unwrap();
    }

    #[test]
    fn merge_partitions_with_itself_still_covers() {
        let (reg, part) = simple_cover();
        let merged = merge_partitions(&part, &part, &reg).unwrap();
        assert_eq!(merged.covered, part.covered);
        merged.validate(&reg).unwrap();
        cover_oracle(&merged, &reg);
    }

    #[test]
    fn merge_partitions_rejects_mismatched_floors() {
        let (reg, part) = simple_cover();
        let mut other = part.clone();
        other.floor = 0;
        let err = merge_partitions(&part, &other, &reg).unwrap_err();
        assert_eq!(err, PartitionError::MismatchedFloor { left: 1, right: 0 });
    }

    #[test]
    fn approx_divide_single_column_worked_example() {
        // Full space, n = 3, eps = 1/2: floor becomes 7, one column of the
        // eight depth-3 cylinders, so B_0 = U_0 ∪ U_3 with uniform mass 1/4
        // and gap 1 − 3·(1/4) = 1/4 <= 2/7.
        let mut reg = SwapRegistry::new(SwapMode::AllSwaps);
        let report = approx_divide(&ClopenSet::full(), 3, &rat(1, 2), &mut reg, &[], 8).unwrap();
        assert_eq!(report.floor, 7);
        assert_eq!(report.b(), &clopen(&["000", "011"]));
        let check = &report.checks[0];
        assert_eq!(check.mu_a, rat(1, 1));
        assert_eq!(check.mu_b0, rat(1, 4));
        assert_eq!(check.b_masses, vec![rat(1, 4); 3]);
        assert!(report.all_hold());
        assert!(&check.mu_a - rat(3, 1) * &check.mu_b0 <= rat(2, 7));
        report.partition.validate(&reg).unwrap();
    }

    #[test]
    fn approx_divide_n_one_has_zero_gap_when_divisible() {
        let mut reg = SwapRegistry::new(SwapMode::AllSwaps);
        let report = approx_divide(&ClopenSet::full(), 1, &rat(1, 2), &mut reg, &[], 8).unwrap();
        assert_eq!(report.b(), &ClopenSet::full());
        assert_eq!(report.checks[0].mu_b0, rat(1, 1));
        assert!(report.all_hold());
    }

    #[test]
    fn approx_divide_weight_mode_multi_measure() {
        // All weight-2 cylinders of depth 4 form one class of 6 leaves, so a
        // floor up to 5 fits; every Bernoulli measure must agree exactly.
        let a = ClopenSet::from_words(
            word("").extensions(4).into_iter().filter(|w| w.ones() == 2),
        );
        let mut reg = SwapRegistry::new(SwapMode::WeightPreserving);
        let measures = [rat(1, 2), rat(1, 3), rat(2, 5)];
        let report = approx_divide(&a, 2, &rat(1, 2), &mut reg, &measures, 10).unwrap();
        assert_eq!(report.floor, 5);
        assert!(report.all_hold());
        report.partition.validate(&reg).unwrap();
        for col in &report.partition.columns {
            let atoms = col.atoms(&reg);
            for p in &measures {
                let base_mass = atoms[0].measure(p);
                for atom in &atoms {
                    assert_eq!(atom.measure(p), base_mass);
                }
            }
        }
    }

    #[test]
    fn approx_divide_input_validation() {
        let mut reg = SwapRegistry::new(SwapMode::AllSwaps);
        assert_eq!(
            approx_divide(&ClopenSet::full(), 2, &rat(0, 1), &mut reg, &[], 8).unwrap_err(),
            PartitionError::BadEpsilon(rat(0, 1))
        );
        assert_eq!(
            approx_divide(&ClopenSet::full(), 0, &rat(1, 2), &mut reg, &[], 8).unwrap_err(),
            PartitionError::BadDivisor
        );
        assert_eq!(
            approx_divide(&ClopenSet::full(), 2, &rat(1, 2), &mut reg, &[rat(1, 3)], 8)
                .unwrap_err(),
            PartitionError::MeasureNotInvariant(rat(1, 3))
        );
        let mut wreg = SwapRegistry::new(SwapMode::WeightPreserving);
        assert_eq!(
            approx_divide(&clopen(&["01", "10"]), 1, &rat(1, 2), &mut wreg, &[rat(3, 2)], 8)
                .unwrap_err(),
            PartitionError::BadMeasure(rat(3, 2))
        );
    }

    #[test]
    fn partition_serializes_with_floor_as_big_n() {
        let (_, part) = simple_cover();
        let json = serde_json::to_value(&part).unwrap();
        assert_eq!(json["N"], 1);
        let back: DividingPartition = serde_json::from_value(json).unwrap();
        assert_eq!(back, part);
    }

    prop_compose! {
        fn arb_word(max_len: usize)(len in 1..=max_len)(bits in proptest::collection::vec(0u8..2, len)) -> Word {
            bits.iter().map(|b| if *b == 0 { '0' } else { '1' }).collect::<String>().parse().unwrap()
        }
    }

    fn arb_nonempty_clopen(depth: usize) -> impl Strategy<Value = ClopenSet> {
        proptest::collection::vec(arb_word(depth), 1..5)
            .prop_map(ClopenSet::from_words)
            .prop_filter("nonempty", |s| !s.is_empty())
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(64))]

        #[test]
        fn merged_covers_pass_the_oracle(
            a in arb_nonempty_clopen(3),
            b in arb_nonempty_clopen(3),
        ) {
            let mut reg = SwapRegistry::new(SwapMode::AllSwaps);
            let pa = cover_clopen(&a, 1, &mut reg, 10).unwrap();
            let pb = cover_clopen(&b, 1, &mut reg, 10).unwrap();
            let merged = merge_partitions(&pa, &pb, &reg).unwrap();
            prop_assert_eq!(&merged.covered, &a.union(&b));
            merged.validate(&reg).unwrap();
            cover_oracle(&merged, &reg);
        }

        #[test]
        fn division_bounds_hold_on_random_sets(
            a in arb_nonempty_clopen(4),
            n in 1usize..4,
        ) {
            let mut reg = SwapRegistry::new(SwapMode::AllSwaps);
            let report = approx_divide(&a, n, &rat(1, 3), &mut reg, &[], 12).unwrap();
            prop_assert!(report.all_hold());
        }
    }
}
