//! Back-and-forth matching between two refinement chains.
//!
//! A [`PartialIso`] pairs off atom blocks of one chain with equal-mass atom
//! blocks of another. [`back_and_forth_extend`] refines such a matching until
//! it separates a requested atom, discharging splitting tasks in the
//! receiving chain when no existing atom fits exactly; iterating it over all
//! atoms realizes the isomorphism between any two chains built from the same
//! class, and between a chain and itself it extends the automorphism germs
//! produced by [`homogeneity_automorphism`].

use std::collections::{BTreeMap, BTreeSet};

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::algebra::{
    AlgebraError, Atom, AtomId, Embedding, FiniteMeasuredAlgebra, PresentedAlgebra,
};
use crate::chain::{one_point_extension, ChainError, FraisseTask, LimitChain};
use crate::measure::MeasureVector;

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum BackForthError {
    #[error("pair {0} has an empty atom set")]
    EmptyPair(usize),
    #[error("pair {index} repeats an atom on the {side} side")]
    OverlappingPairs { side: &'static str, index: usize },
    #[error("pair {index} has unequal measure vectors: {left} vs {right}")]
    VectorMismatch {
        index: usize,
        left: MeasureVector,
        right: MeasureVector,
    },
    #[error("the {0} sets do not partition the newest stage")]
    NotAPartition(&'static str),
    #[error("part lists have different lengths: {left} vs {right}")]
    PartCountMismatch { left: usize, right: usize },
    #[error("target atom {atom:?} is not in stage {stage}")]
    UnknownTarget { stage: usize, atom: AtomId },
    #[error("stage budget {budget} blocks a required splitting task")]
    StageBudget { budget: usize },
    #[error(transparent)]
    Chain(#[from] ChainError),
    #[error(transparent)]
    Algebra(#[from] AlgebraError),
}

/// Which chain a target atom belongs to.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Side {
    Left,
    Right,
}

/// An atom of one of the two chains, addressed by stage and id.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct TargetAtom {
    pub side: Side,
    pub stage: usize,
    pub atom: AtomId,
}

/// One matched pair: a block of stage-`left_stage` atoms in the left chain
/// and a block of equal measure in the right chain.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct IsoPair {
    pub left_stage: usize,
    pub left: BTreeSet<AtomId>,
    pub right_stage: usize,
    pub right: BTreeSet<AtomId>,
}

/// A measure-preserving matching of finitely many disjoint blocks.
///
/// Blocks recorded at an old stage mean their image under all later
/// refinements, so a pair stays valid as the chains grow.
#[derive(Clone, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct PartialIso {
    pairs: Vec<IsoPair>,
}

impl PartialIso {
    pub fn empty() -> PartialIso {
        PartialIso::default()
    }

    pub fn new(pairs: Vec<IsoPair>) -> PartialIso {
        PartialIso { pairs }
    }

    pub fn pairs(&self) -> &[IsoPair] {
        &self.pairs
    }

    pub fn is_empty(&self) -> bool {
        self.pairs.is_empty()
    }

    /// The same matching in the opposite direction.
    pub fn flip(&self) -> PartialIso {
        PartialIso {
            pairs: self
                .pairs
                .iter()
                .map(|p| IsoPair {
                    left_stage: p.right_stage,
                    left: p.right.clone(),
                    right_stage: p.left_stage,
                    right: p.left.clone(),
                })
                .collect(),
        }
    }

    /// Checks that the pairs are nonempty, disjoint per side after pushing
    /// everything to the newest stages, and matched with equal vectors.
    pub fn validate(&self, m: &LimitChain, n: &LimitChain) -> Result<(), BackForthError> {
        let mut seen_left: BTreeSet<AtomId> = BTreeSet::new();
        let mut seen_right: BTreeSet<AtomId> = BTreeSet::new();
        for (i, (l, r)) in self.forwarded(m, n)?.into_iter().enumerate() {
            if l.is_empty() || r.is_empty() {
                return Err(BackForthError::EmptyPair(i));
            }
            if !l.iter().all(|id| seen_left.insert(id.clone())) {
                return Err(BackForthError::OverlappingPairs { side: "left", index: i });
            }
            if !r.iter().all(|id| seen_right.insert(id.clone())) {
                return Err(BackForthError::OverlappingPairs { side: "right", index: i });
            }
            let lm = m.last_stage().block_mass(&l)?;
            let rm = n.last_stage().block_mass(&r)?;
            if lm != rm {
                return Err(BackForthError::VectorMismatch {
                    index: i,
                    left: lm,
                    right: rm,
                });
            }
        }
        Ok(())
    }

    /// Every pair pushed forward to the newest stage of each chain.
    pub fn forwarded(
        &self,
        m: &LimitChain,
        n: &LimitChain,
    ) -> Result<Vec<(BTreeSet<AtomId>, BTreeSet<AtomId>)>, BackForthError> {
        let m_last = m.stage_count() - 1;
        let n_last = n.stage_count() - 1;
        self.pairs
            .iter()
            .map(|p| {
                Ok((
                    m.forward_set(p.left_stage, m_last, &p.left)?,
                    n.forward_set(p.right_stage, n_last, &p.right)?,
                ))
            })
            .collect()
    }

    /// Image of a left-chain atom: the union of matched right blocks, if the
    /// matching separates the atom's descendants exactly.
    pub fn image_of(
        &self,
        m: &LimitChain,
        n: &LimitChain,
        stage: usize,
        atom: &str,
    ) -> Result<Option<BTreeSet<AtomId>>, BackForthError> {
        let m_last = m.stage_count() - 1;
        let x = m.forward_set(stage, m_last, &BTreeSet::from([atom.to_string()]))?;
        let mut covered: BTreeSet<AtomId> = BTreeSet::new();
        let mut image: BTreeSet<AtomId> = BTreeSet::new();
        for (l, r) in self.forwarded(m, n)? {
            if l.is_subset(&x) {
                covered.extend(l);
                image.extend(r);
            }
        }
        Ok(if covered == x { Some(image) } else { None })
    }

    /// The matching as a pair of embeddings of one abstract block algebra
    /// into the newest stages; both are valid exactly when the pairs form a
    /// measure-preserving correspondence of full partitions.
    pub fn induced_embeddings(
        &self,
        m: &LimitChain,
        n: &LimitChain,
    ) -> Result<(Embedding, Embedding), BackForthError> {
        let forwarded = self.forwarded(m, n)?;
        let mut atoms = Vec::new();
        let mut left_blocks = BTreeMap::new();
        let mut right_blocks = BTreeMap::new();
        for (i, (l, r)) in forwarded.into_iter().enumerate() {
            let id = format!("p{i}");
            atoms.push(Atom {
                id: id.clone(),
                mu: m.last_stage().block_mass(&l)?,
            });
            left_blocks.insert(id.clone(), l);
            right_blocks.insert(id, r);
        }
        let blocks_algebra = FiniteMeasuredAlgebra::new(m.k(), atoms)?;
        Ok((
            Embedding {
                source: blocks_algebra.clone(),
                target: m.last_stage().clone(),
                blocks: left_blocks,
            },
            Embedding {
                source: blocks_algebra,
                target: n.last_stage().clone(),
                blocks: right_blocks,
            },
        ))
    }
}

/// Pairs pushed to the newest stages, with the complement added so the
/// matching is a full partition on both sides; the empty iso becomes the
/// unit pair. Errors mirror [`PartialIso::validate`].
fn normalize(
    m: &LimitChain,
    n: &LimitChain,
    p: &PartialIso,
) -> Result<Vec<IsoPair>, BackForthError> {
    p.validate(m, n)?;
    let m_last = m.stage_count() - 1;
    let n_last = n.stage_count() - 1;
    let mut pairs: Vec<IsoPair> = p
        .forwarded(m, n)?
        .into_iter()
        .map(|(l, r)| IsoPair {
            left_stage: m_last,
            left: l,
            right_stage: n_last,
            right: r,
        })
        .collect();
    let mut left_rest: BTreeSet<AtomId> = m.last_stage().atom_ids().cloned().collect();
    let mut right_rest: BTreeSet<AtomId> = n.last_stage().atom_ids().cloned().collect();
    for pair in &pairs {
        for id in &pair.left {
            left_rest.remove(id);
        }
        for id in &pair.right {
            right_rest.remove(id);
        }
    }
    // Equal masses pairwise force equal total mass, so the complements are
    // empty together or not at all.
    if !left_rest.is_empty() {
        pairs.push(IsoPair {
            left_stage: m_last,
            left: left_rest,
            right_stage: n_last,
            right: right_rest,
        });
    }
    Ok(pairs)
}

/// Lowest-indexed atom of any stage of `chain` whose descendants stay inside
/// `within` (a set of newest-stage atoms) and whose mass is exactly `mass`.
fn exact_single_atom(
    chain: &LimitChain,
    within: &BTreeSet<AtomId>,
    mass: &MeasureVector,
) -> Option<BTreeSet<AtomId>> {
    let last = chain.stage_count() - 1;
    for (s, stage) in chain.stages().iter().enumerate() {
        for atom in stage.atoms() {
            if &atom.mu != mass {
                continue;
            }
            let fwd = chain
                .forward_set(s, last, &BTreeSet::from([atom.id.clone()]))
                .expect("stage atoms forward cleanly");
            if fwd.is_subset(within) {
                return Some(fwd);
            }
        }
    }
    None
}

fn fresh_id(base: &str, taken: &BTreeSet<AtomId>) -> AtomId {
    let mut id = base.to_string();
    while taken.contains(&id) {
        id.push('+');
    }
    id
}

/// Discharges the task that splits the block `within` of the newest stage
/// into a part of mass exactly `cut` and its complement. Returns the two
/// parts as atom sets of the appended stage.
fn split_block(
    chain: &mut LimitChain,
    within: &BTreeSet<AtomId>,
    cut: &MeasureVector,
    max_stages: usize,
) -> Result<(BTreeSet<AtomId>, BTreeSet<AtomId>), BackForthError> {
    if chain.stage_count() >= max_stages {
        return Err(BackForthError::StageBudget { budget: max_stages });
    }
    let stage = chain.last_stage().clone();
    let block_id = within.iter().next().expect("split block is nonempty").clone();
    let mut blocks: Vec<(AtomId, BTreeSet<AtomId>)> = vec![(block_id.clone(), within.clone())];
    let mut target_atoms: Vec<Atom> = Vec::new();
    let mut ext_blocks: BTreeMap<AtomId, BTreeSet<AtomId>> = BTreeMap::new();
    let mut taken: BTreeSet<AtomId> = BTreeSet::new();
    for atom in stage.atoms() {
        if within.contains(&atom.id) {
            continue;
        }
        blocks.push((atom.id.clone(), BTreeSet::from([atom.id.clone()])));
        target_atoms.push(atom.clone());
        ext_blocks.insert(atom.id.clone(), BTreeSet::from([atom.id.clone()]));
        taken.insert(atom.id.clone());
    }
    let lo = fresh_id("cut0", &taken);
    let hi = fresh_id("cut1", &taken);
    let block_mass = stage.block_mass(within)?;
    target_atoms.push(Atom {
        id: lo.clone(),
        mu: cut.clone(),
    });
    target_atoms.push(Atom {
        id: hi.clone(),
        mu: block_mass.sub(cut),
    });
    ext_blocks.insert(
        block_id.clone(),
        BTreeSet::from([lo.clone(), hi.clone()]),
    );

    let sub = PresentedAlgebra::new(blocks);
    let source = sub.induced_algebra(&stage)?;
    let task = FraisseTask {
        source_stage: chain.stage_count() - 1,
        sub,
        ext: Embedding {
            source,
            target: FiniteMeasuredAlgebra::new(chain.k(), target_atoms)?,
            blocks: ext_blocks,
        },
    };
    *chain = one_point_extension(chain, task)?;
    let beta = &chain.task_log().last().expect("task just discharged").beta;
    Ok((beta.blocks[&lo].clone(), beta.blocks[&hi].clone()))
}

/// Refines `pairs` until the source-side set `x` (atoms of `src`'s newest
/// stage) is a union of source blocks, splitting receiver blocks exactly;
/// `src` is never modified, `dst` may gain stages.
fn extend_into(
    src: &LimitChain,
    dst: &mut LimitChain,
    pairs: Vec<IsoPair>,
    x: &BTreeSet<AtomId>,
    max_stages: usize,
) -> Result<Vec<IsoPair>, BackForthError> {
    let src_last = src.stage_count() - 1;
    let mut out: Vec<IsoPair> = Vec::new();
    for pair in pairs {
        let l = src.forward_set(pair.left_stage, src_last, &pair.left)?;
        let r = dst.forward_set(pair.right_stage, dst.stage_count() - 1, &pair.right)?;
        let xi: BTreeSet<AtomId> = l.intersection(x).cloned().collect();
        if xi.is_empty() || xi == l {
            out.push(IsoPair {
                left_stage: src_last,
                left: l,
                right_stage: dst.stage_count() - 1,
                right: r,
            });
            continue;
        }
        // The pair straddles x: cut the receiver block to the exact mass,
        // reusing a single existing atom when one fits.
        let cut = src.last_stage().block_mass(&xi)?;
        let (y_lo, y_hi) = match exact_single_atom(dst, &r, &cut) {
            Some(y) => {
                let rest = r.difference(&y).cloned().collect();
                (y, rest)
            }
            None => split_block(dst, &r, &cut, max_stages)?,
        };
        let dst_last = dst.stage_count() - 1;
        out.push(IsoPair {
            left_stage: src_last,
            left: xi.clone(),
            right_stage: dst_last,
            right: y_lo,
        });
        out.push(IsoPair {
            left_stage: src_last,
            left: l.difference(&xi).cloned().collect(),
            right_stage: dst_last,
            right: y_hi,
        });
    }
    Ok(out)
}

/// Extends `p` so that the matching separates `target`: afterwards the
/// target atom's descendants are a union of matched blocks, so the iso is
/// defined on it (left targets) or attains it (right targets). Splitting
/// tasks are discharged in the chain opposite the target as needed; each
/// appends one stage, refused once that chain holds `max_stages` stages.
pub fn back_and_forth_extend(
    m: &mut LimitChain,
    n: &mut LimitChain,
    p: &PartialIso,
    target: &TargetAtom,
    max_stages: usize,
) -> Result<PartialIso, BackForthError> {
    let pairs = normalize(m, n, p)?;
    let (src, dst, pairs): (&LimitChain, &mut LimitChain, Vec<IsoPair>) = match target.side {
        Side::Left => (m, n, pairs),
        Side::Right => (
            n,
            m,
            pairs
                .into_iter()
                .map(|p| IsoPair {
                    left_stage: p.right_stage,
                    left: p.right,
                    right_stage: p.left_stage,
                    right: p.left,
                })
                .collect(),
        ),
    };
    if src.stage(target.stage)?.atom(&target.atom).is_none() {
        return Err(BackForthError::UnknownTarget {
            stage: target.stage,
            atom: target.atom.clone(),
        });
    }
    let x = src.forward_set(
        target.stage,
        src.stage_count() - 1,
        &BTreeSet::from([target.atom.clone()]),
    )?;
    let out = extend_into(src, dst, pairs, &x, max_stages)?;
    let iso = PartialIso { pairs: out };
    Ok(match target.side {
        Side::Left => iso,
        Side::Right => iso.flip(),
    })
}

/// The automorphism germ sending each block of `part_a` onto the block of
/// `part_b` with the same index. Both lists must partition the newest stage
/// (blocks given at any stage, meaning their descendants) and corresponding
/// blocks must carry equal measure vectors.
pub fn homogeneity_automorphism(
    chain: &LimitChain,
    part_a: &[(usize, BTreeSet<AtomId>)],
    part_b: &[(usize, BTreeSet<AtomId>)],
) -> Result<PartialIso, BackForthError> {
    if part_a.len() != part_b.len() {
        return Err(BackForthError::PartCountMismatch {
            left: part_a.len(),
            right: part_b.len(),
        });
    }
    let last = chain.stage_count() - 1;
    let forward = |parts: &[(usize, BTreeSet<AtomId>)], side: &'static str| {
        let mut seen: BTreeSet<AtomId> = BTreeSet::new();
        let mut out = Vec::new();
        for (i, (stage, set)) in parts.iter().enumerate() {
            let fwd = chain.forward_set(*stage, last, set)?;
            if fwd.is_empty() {
                return Err(BackForthError::EmptyPair(i));
            }
            if !fwd.iter().all(|id| seen.insert(id.clone())) {
                return Err(BackForthError::OverlappingPairs { side, index: i });
            }
            out.push(fwd);
        }
        if seen.len() != chain.last_stage().atoms().len() {
            return Err(BackForthError::NotAPartition(side));
        }
        Ok(out)
    };
    let lefts = forward(part_a, "left")?;
    let rights = forward(part_b, "right")?;
    for (i, (l, r)) in lefts.iter().zip(&rights).enumerate() {
        let lm = chain.last_stage().block_mass(l)?;
        let rm = chain.last_stage().block_mass(r)?;
        if lm != rm {
            return Err(BackForthError::VectorMismatch {
                index: i,
                left: lm,
                right: rm,
            });
        }
    }
    Ok(PartialIso {
        pairs: lefts
            .into_iter()
            .zip(rights)
            .map(|(l, r)| IsoPair {
                left_stage: last,
                left: l,
                right_stage: last,
                right: r,
            })
            .collect(),
    })
}
