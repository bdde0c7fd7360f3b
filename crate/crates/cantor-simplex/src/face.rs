//! Faces of the measure simplex as vertex subsets.
//!
//! A face is an index set `R` into the vertices. Affine data given on `R`
//! extends to all vertices by taking the midpoint of an allowed interval
//! ([`extend_with_bounds`]), decompositions prescribed on `R` extend to full
//! decompositions ([`face_extension_decompose`]), whole chains restrict to a
//! face stage by stage ([`restricted_limit`]), and permuting the vertex
//! measures yields an isomorphism germ with an exact pushforward identity
//! ([`limit_isomorphism_h`]).

use std::collections::BTreeSet;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::algebra::{AlgebraError, AtomId, Embedding, FiniteMeasuredAlgebra};
use crate::backforth::{back_and_forth_extend, BackForthError, PartialIso, Side, TargetAtom};
use crate::chain::{
    one_point_extension, split_block_task, ChainError, DischargedTask, FraisseTask, LimitChain,
};
use crate::measure::MeasureVector;
use crate::rational::Rat;

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum FaceError {
    #[error("face is empty")]
    EmptyFace,
    #[error("face indices must be strictly increasing")]
    UnsortedFace,
    #[error("vertex {0} is out of range")]
    VertexOutOfRange(usize),
    #[error("vectors have different lengths: {0} vs {1}")]
    LengthMismatch(usize, usize),
    #[error("{0} face values for a face of {1} vertices")]
    FaceValueCount(usize, usize),
    #[error("bounds are inverted at vertex {0}")]
    InvertedBounds(usize),
    #[error("value {value} at vertex {vertex} escapes [{lo}, {hi}]")]
    BoundViolation {
        vertex: usize,
        value: Rat,
        lo: Rat,
        hi: Rat,
    },
    #[error("no parts to extend")]
    NoParts,
    #[error("part {part} is not positive at vertex {vertex}")]
    NonPositivePart { part: usize, vertex: usize },
    #[error("parts sum to {got} at vertex {vertex}, expected {want}")]
    PartSumMismatch { vertex: usize, want: Rat, got: Rat },
    #[error("vector must be strictly positive")]
    NotPositive,
    #[error("map is not a permutation of the vertex set")]
    NotAPermutation,
    #[error(transparent)]
    Algebra(#[from] AlgebraError),
    #[error(transparent)]
    Chain(#[from] ChainError),
    #[error(transparent)]
    BackForth(#[from] BackForthError),
}

fn check_face(face: &[usize], k: usize) -> Result<(), FaceError> {
    if face.is_empty() {
        return Err(FaceError::EmptyFace);
    }
    if !face.windows(2).all(|w| w[0] < w[1]) {
        return Err(FaceError::UnsortedFace);
    }
    if let Some(&v) = face.iter().find(|&&v| v >= k) {
        return Err(FaceError::VertexOutOfRange(v));
    }
    Ok(())
}

/// Extends values given on the face to all vertices: on the face the given
/// value (checked against the bounds), elsewhere the midpoint of the bound
/// interval. The result g satisfies `f1 <= g <= f2` everywhere.
pub fn extend_with_bounds(
    face: &[usize],
    f_on_r: &[Rat],
    f1: &MeasureVector,
    f2: &MeasureVector,
) -> Result<MeasureVector, FaceError> {
    let k = f1.len();
    if f2.len() != k {
        return Err(FaceError::LengthMismatch(k, f2.len()));
    }
    check_face(face, k)?;
    if f_on_r.len() != face.len() {
        return Err(FaceError::FaceValueCount(f_on_r.len(), face.len()));
    }
    if let Some(v) = (0..k).find(|&v| f1.get(v) > f2.get(v)) {
        return Err(FaceError::InvertedBounds(v));
    }
    let half = Rat::new(1, 2);
    let mut coords = Vec::with_capacity(k);
    for v in 0..k {
        match face.binary_search(&v) {
            Ok(pos) => {
                let value = &f_on_r[pos];
                if value < f1.get(v) || value > f2.get(v) {
                    return Err(FaceError::BoundViolation {
                        vertex: v,
                        value: value.clone(),
                        lo: f1.get(v).clone(),
                        hi: f2.get(v).clone(),
                    });
                }
                coords.push(value.clone());
            }
            Err(_) => coords.push((f1.get(v) + f2.get(v)) * &half),
        }
    }
    Ok(MeasureVector::new(coords))
}

/// Extends a decomposition prescribed on the face to a full decomposition of
/// `f`: the parts agree with the prescription on the face, are strictly
/// positive everywhere, and sum to `f` exactly. Each step extends one part
/// inside bounds that leave room for the rest, then recurses on what is
/// left.
pub fn face_extension_decompose(
    f: &MeasureVector,
    face: &[usize],
    parts_on_r: &[Vec<Rat>],
) -> Result<Vec<MeasureVector>, FaceError> {
    let k = f.len();
    check_face(face, k)?;
    if parts_on_r.is_empty() {
        return Err(FaceError::NoParts);
    }
    if !f.is_strictly_positive() {
        return Err(FaceError::NotPositive);
    }
    for (p, part) in parts_on_r.iter().enumerate() {
        if part.len() != face.len() {
            return Err(FaceError::FaceValueCount(part.len(), face.len()));
        }
        for (i, value) in part.iter().enumerate() {
            if !value.is_positive() {
                return Err(FaceError::NonPositivePart {
                    part: p,
                    vertex: face[i],
                });
            }
        }
    }
    for (i, &v) in face.iter().enumerate() {
        let got: Rat = parts_on_r.iter().map(|part| part[i].clone()).sum();
        if &got != f.get(v) {
            return Err(FaceError::PartSumMismatch {
                vertex: v,
                want: f.get(v).clone(),
                got,
            });
        }
    }

    let half = Rat::new(1, 2);
    let mut current = f.clone();
    let mut out = Vec::with_capacity(parts_on_r.len());
    for part in &parts_on_r[..parts_on_r.len() - 1] {
        // Room on the face: below by the part itself, above by what the
        // remaining parts still need. Off the face, half the smallest
        // remaining coordinate on each side keeps everything positive.
        let slack = current.min_coord() * &half;
        let lo = part
            .iter()
            .min()
            .expect("face is nonempty")
            .clone()
            .min(slack.clone());
        let hi = face
            .iter()
            .enumerate()
            .map(|(i, &v)| current.get(v) - &part[i])
            .min()
            .expect("face is nonempty")
            .min(slack);
        let f1 = MeasureVector::constant(k, lo);
        let f2 = current.sub(&MeasureVector::constant(k, hi));
        let g = extend_with_bounds(face, part, &f1, &f2)?;
        current = current.sub(&g);
        debug_assert!(current.is_strictly_positive());
        out.push(g);
    }
    for (i, &v) in face.iter().enumerate() {
        debug_assert_eq!(current.get(v), &parts_on_r[parts_on_r.len() - 1][i]);
    }
    out.push(current);
    debug_assert_eq!(MeasureVector::sum_of(out.iter(), k), *f);
    Ok(out)
}

fn restrict_embedding(e: &Embedding, face: &[usize]) -> Result<Embedding, FaceError> {
    Ok(Embedding {
        source: e.source.restrict_to_face(face)?,
        target: e.target.restrict_to_face(face)?,
        blocks: e.blocks.clone(),
    })
}

/// Projects every stage, refinement, and logged task of the chain onto the
/// face. The tree of atoms is unchanged; only the measures drop coordinates.
pub fn restricted_limit(chain: &LimitChain, face: &[usize]) -> Result<LimitChain, FaceError> {
    check_face(face, chain.k())?;
    let stages = chain
        .stages()
        .iter()
        .map(|s| s.restrict_to_face(face))
        .collect::<Result<Vec<_>, _>>()?;
    let refinements = chain
        .refinements()
        .iter()
        .map(|e| restrict_embedding(e, face))
        .collect::<Result<Vec<_>, _>>()?;
    let task_log = chain
        .task_log()
        .iter()
        .map(|entry| {
            Ok(DischargedTask {
                task: FraisseTask {
                    source_stage: entry.task.source_stage,
                    sub: entry.task.sub.clone(),
                    ext: restrict_embedding(&entry.task.ext, face)?,
                },
                new_stage: entry.new_stage,
                beta: restrict_embedding(&entry.beta, face)?,
            })
        })
        .collect::<Result<Vec<_>, FaceError>>()?;
    let restricted = LimitChain::from_parts(
        face.len(),
        stages,
        refinements,
        task_log,
        chain.is_truncated(),
    );
    debug_assert!(restricted.validate().is_ok());
    Ok(restricted)
}

/// Discharges a task of the restricted class in the parent chain: the named
/// atom of the last stage is split into parts with the given values on the
/// face, lifted to full vectors by [`face_extension_decompose`]. Restricting
/// the result realizes the requested split.
pub fn lift_restricted_split(
    chain: &LimitChain,
    face: &[usize],
    atom: &AtomId,
    parts_on_r: &[Vec<Rat>],
) -> Result<LimitChain, FaceError> {
    check_face(face, chain.k())?;
    let f = chain.last_stage().mu(atom)?.clone();
    let parts = face_extension_decompose(&f, face, parts_on_r)?;
    let block = BTreeSet::from([atom.clone()]);
    let (task, _) = split_block_task(chain, &block, &parts, "f")?;
    Ok(one_point_extension(chain, task)?)
}

fn check_permutation(map: &[usize], k: usize) -> Result<(), FaceError> {
    if map.len() != k {
        return Err(FaceError::NotAPermutation);
    }
    let mut seen = vec![false; k];
    for &v in map {
        if v >= k {
            return Err(FaceError::VertexOutOfRange(v));
        }
        if seen[v] {
            return Err(FaceError::NotAPermutation);
        }
        seen[v] = true;
    }
    Ok(())
}

fn reindex_embedding(e: &Embedding, perm: &[usize]) -> Embedding {
    Embedding {
        source: e.source.reindex_vertices(perm),
        target: e.target.reindex_vertices(perm),
        blocks: e.blocks.clone(),
    }
}

/// The chain whose measure at vertex `q` is the original measure at vertex
/// `perm[q]`; same atoms, same refinements.
pub fn reindexed_limit(chain: &LimitChain, perm: &[usize]) -> Result<LimitChain, FaceError> {
    check_permutation(perm, chain.k())?;
    let stages = chain
        .stages()
        .iter()
        .map(|s| s.reindex_vertices(perm))
        .collect();
    let refinements = chain
        .refinements()
        .iter()
        .map(|e| reindex_embedding(e, perm))
        .collect();
    let task_log = chain
        .task_log()
        .iter()
        .map(|entry| DischargedTask {
            task: FraisseTask {
                source_stage: entry.task.source_stage,
                sub: entry.task.sub.clone(),
                ext: reindex_embedding(&entry.task.ext, perm),
            },
            new_stage: entry.new_stage,
            beta: reindex_embedding(&entry.beta, perm),
        })
        .collect();
    let reindexed = LimitChain::from_parts(
        chain.k(),
        stages,
        refinements,
        task_log,
        chain.is_truncated(),
    );
    debug_assert!(reindexed.validate().is_ok());
    Ok(reindexed)
}

/// An isomorphism germ between a chain and its measure-permuted copy.
///
/// Matched blocks carry equal stored vectors, and the target chain stores at
/// vertex `q` the original measure at `perm[q]`; together this is the exact
/// pushforward identity: the image of a block has, at vertex `perm[q]`, the
/// original measure the block had at `q`.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct LimitIsomorphism {
    pub perm: Vec<usize>,
    /// The original chain, possibly grown by matching tasks.
    pub source: LimitChain,
    /// The permuted chain, possibly grown by matching tasks.
    pub target: LimitChain,
    pub germ: PartialIso,
}

impl LimitIsomorphism {
    /// The exact masses of each matched pair, source side then target side,
    /// after checking they agree coordinatewise.
    pub fn pushforward_checks(&self) -> Result<Vec<(MeasureVector, MeasureVector)>, FaceError> {
        let mut rows = Vec::with_capacity(self.germ.pairs().len());
        for (index, pair) in self.germ.pairs().iter().enumerate() {
            let left = self
                .source
                .stage(pair.left_stage)?
                .block_mass(&pair.left)?;
            let right = self
                .target
                .stage(pair.right_stage)?
                .block_mass(&pair.right)?;
            if left != right {
                return Err(FaceError::BackForth(BackForthError::VectorMismatch {
                    index,
                    left,
                    right,
                }));
            }
            rows.push((left, right));
        }
        Ok(rows)
    }
}

/// Builds a back-and-forth germ between the chain and its `perm`-permuted
/// copy covering every atom of both current last stages. The vertex map must
/// be injective, hence a permutation of the finite vertex set; growing
/// either chain past `max_stages` stages fails with a budget error.
pub fn limit_isomorphism_h(
    chain: &LimitChain,
    perm: &[usize],
    max_stages: usize,
) -> Result<LimitIsomorphism, FaceError> {
    check_permutation(perm, chain.k())?;
    let mut source = chain.clone();
    let mut target = reindexed_limit(chain, perm)?;
    let mut germ = PartialIso::empty();
    let left_stage = source.stage_count() - 1;
    let left_atoms: Vec<AtomId> = source.last_stage().atom_ids().cloned().collect();
    let right_stage = target.stage_count() - 1;
    let right_atoms: Vec<AtomId> = target.last_stage().atom_ids().cloned().collect();
    for atom in left_atoms {
        let goal = TargetAtom {
            side: Side::Left,
            stage: left_stage,
            atom,
        };
        germ = back_and_forth_extend(&mut source, &mut target, &germ, &goal, max_stages)?;
    }
    for atom in right_atoms {
        let goal = TargetAtom {
            side: Side::Right,
            stage: right_stage,
            atom,
        };
        germ = back_and_forth_extend(&mut source, &mut target, &germ, &goal, max_stages)?;
    }
    Ok(LimitIsomorphism {
        perm: perm.to_vec(),
        source,
        target,
        germ,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::algebra::Atom;
    use proptest::prelude::*;

    fn mv(coords: &[&str]) -> MeasureVector {
        MeasureVector::new(coords.iter().map(|c| c.parse().unwrap()).collect())
    }

    fn rat(s: &str) -> Rat {
        s.parse().unwrap()
    }

    fn rats(values: &[&str]) -> Vec<Rat> {
        values.iter().map(|v| v.parse().unwrap()).collect()
    }

    fn split_stage(k: usize, vectors: &[Vec<Rat>]) -> FiniteMeasuredAlgebra {
        FiniteMeasuredAlgebra::new(
            k,
            vectors
                .iter()
                .enumerate()
                .map(|(i, mu)| Atom {
                    id: format!("a{i}"),
                    mu: MeasureVector::new(mu.clone()),
                })
                .collect(),
        )
        .unwrap()
    }

    fn grow(chain: &LimitChain, vectors: &[Vec<Rat>]) -> LimitChain {
        let target = split_stage(chain.k(), vectors);
        one_point_extension(chain, FraisseTask::joint(chain, target)).unwrap()
    }

    #[test]
    fn midpoint_extension_examples() {
        let quarter = MeasureVector::constant(3, rat("1/4"));
        let three_quarters = MeasureVector::constant(3, rat("3/4"));
        let g = extend_with_bounds(&[0, 1], &rats(&["1/3", "1/2"]), &quarter, &three_quarters)
            .unwrap();
        assert_eq!(g, mv(&["1/3", "1/2", "1/2"]));

        // Full face: nothing to extend.
        let g = extend_with_bounds(
            &[0, 1, 2],
            &rats(&["1/4", "1/4", "1/2"]),
            &MeasureVector::constant(3, rat("1/8")),
            &three_quarters,
        )
        .unwrap();
        assert_eq!(g, mv(&["1/4", "1/4", "1/2"]));

        // Degenerate bounds force the value outside the face.
        let third = MeasureVector::constant(3, rat("1/3"));
        let g = extend_with_bounds(&[0], &rats(&["1/3"]), &third, &third).unwrap();
        assert_eq!(g, mv(&["1/3", "1/3", "1/3"]));

        let err = extend_with_bounds(&[0], &rats(&["7/8"]), &quarter, &three_quarters).unwrap_err();
        assert_eq!(
            err,
            FaceError::BoundViolation {
                vertex: 0,
                value: rat("7/8"),
                lo: rat("1/4"),
                hi: rat("3/4"),
            }
        );
        assert_eq!(
            extend_with_bounds(&[1, 0], &rats(&["1/2", "1/2"]), &quarter, &three_quarters),
            Err(FaceError::UnsortedFace)
        );
    }

    #[test]
    fn decompose_even_split_follows_midpoint_rule() {
        let parts = face_extension_decompose(
            &mv(&["1", "1"]),
            &[0],
            &[rats(&["1/2"]), rats(&["1/2"])],
        )
        .unwrap();
        assert_eq!(parts, vec![mv(&["1/2", "1/2"]), mv(&["1/2", "1/2"])]);
    }

    #[test]
    fn decompose_single_part_returns_input() {
        let f = mv(&["1/3", "2/3"]);
        let parts = face_extension_decompose(&f, &[1], &[rats(&["2/3"])]).unwrap();
        assert_eq!(parts, vec![f]);
    }

    #[test]
    fn decompose_on_full_face_returns_parts() {
        let parts = face_extension_decompose(
            &mv(&["1", "1"]),
            &[0, 1],
            &[rats(&["1/4", "1/3"]), rats(&["3/4", "2/3"])],
        )
        .unwrap();
        assert_eq!(parts, vec![mv(&["1/4", "1/3"]), mv(&["3/4", "2/3"])]);
    }

    #[test]
    fn decompose_rejects_bad_parts() {
        assert_eq!(
            face_extension_decompose(
                &mv(&["1", "1"]),
                &[0],
                &[rats(&["1/2"]), rats(&["1/3"])],
            ),
            Err(FaceError::PartSumMismatch {
                vertex: 0,
                want: rat("1"),
                got: rat("5/6"),
            })
        );
        assert_eq!(
            face_extension_decompose(
                &mv(&["1", "1"]),
                &[1],
                &[rats(&["0"]), rats(&["1"])],
            ),
            Err(FaceError::NonPositivePart { part: 0, vertex: 1 })
        );
        assert_eq!(
            face_extension_decompose(&mv(&["1", "1"]), &[0], &[]),
            Err(FaceError::NoParts)
        );
    }

    proptest! {
        /// Weight-generated prescriptions always extend: exact sum, exact
        /// agreement on the face, strict positivity everywhere.
        #[test]
        fn decompose_invariants(
            k in 1usize..5,
            raw_face in proptest::collection::vec(0usize..4, 1..4),
            weights in proptest::collection::vec(
                proptest::collection::vec(1u32..10, 1..5),
                2..6,
            ),
        ) {
            let face: Vec<usize> = {
                let mut f: Vec<usize> = raw_face.iter().map(|v| v % k).collect();
                f.sort_unstable();
                f.dedup();
                f
            };
            let n = weights.len();
            let parts: Vec<Vec<Rat>> = (0..n)
                .map(|i| {
                    face.iter()
                        .enumerate()
                        .map(|(j, _)| {
                            let column: u32 = weights
                                .iter()
                                .map(|row| row[j % row.len()])
                                .sum();
                            Rat::new(weights[i][j % weights[i].len()] as i64, column as i64)
                        })
                        .collect()
                })
                .collect();
            let f = MeasureVector::unit(k);
            let out = face_extension_decompose(&f, &face, &parts).unwrap();
            prop_assert_eq!(out.len(), n);
            prop_assert_eq!(MeasureVector::sum_of(out.iter(), k), f);
            for (i, g) in out.iter().enumerate() {
                prop_assert!(g.is_strictly_positive());
                for (j, &v) in face.iter().enumerate() {
                    prop_assert_eq!(g.get(v), &parts[i][j]);
                }
            }
        }
    }

    #[test]
    fn restriction_to_full_face_is_identity() {
        let chain = grow(
            &LimitChain::new(2),
            &[
                vec![rat("1/4"), rat("1/2")],
                vec![rat("3/4"), rat("1/2")],
            ],
        );
        assert_eq!(restricted_limit(&chain, &[0, 1]).unwrap(), chain);
    }

    #[test]
    fn restriction_projects_measures() {
        let chain = grow(
            &LimitChain::new(2),
            &[
                vec![rat("1/4"), rat("1/2")],
                vec![rat("3/4"), rat("1/2")],
            ],
        );
        let restricted = restricted_limit(&chain, &[1]).unwrap();
        assert_eq!(restricted.k(), 1);
        restricted.validate().unwrap();
        assert_eq!(
            restricted.last_stage().mu("r.0").unwrap(),
            &mv(&["1/2"])
        );
        assert_eq!(
            restricted_limit(&chain, &[]),
            Err(FaceError::EmptyFace)
        );
    }

    #[test]
    fn restricted_task_discharges_by_lifting() {
        // Split r.0 into two quarter-mass atoms as seen on the face {1}.
        let chain = grow(
            &LimitChain::new(2),
            &[
                vec![rat("1/2"), rat("1/2")],
                vec![rat("1/2"), rat("1/2")],
            ],
        );
        let lifted = lift_restricted_split(
            &chain,
            &[1],
            &"r.0".to_string(),
            &[rats(&["1/4"]), rats(&["1/4"])],
        )
        .unwrap();
        lifted.validate().unwrap();
        let restricted = restricted_limit(&lifted, &[1]).unwrap();
        // The witness embedding of the lifted task survives restriction, so
        // the restricted new stage realizes the requested split exactly.
        let beta = &restricted.task_log().last().unwrap().beta;
        assert!(beta.is_embedding());
        assert_eq!(beta.source.mu("f0").unwrap(), &mv(&["1/4"]));
        let last = restricted.last_stage();
        assert_eq!(
            last.block_mass(&beta.blocks["f0"]).unwrap(),
            mv(&["1/4"])
        );
        assert_eq!(
            last.block_mass(&beta.blocks["f1"]).unwrap(),
            mv(&["1/4"])
        );
    }

    #[test]
    fn reindexing_permutes_stage_vectors() {
        let chain = grow(
            &LimitChain::new(3),
            &[
                vec![rat("1/2"), rat("1/4"), rat("1/3")],
                vec![rat("1/2"), rat("3/4"), rat("2/3")],
            ],
        );
        let cycled = reindexed_limit(&chain, &[1, 2, 0]).unwrap();
        cycled.validate().unwrap();
        assert_eq!(
            cycled.last_stage().mu("r.0").unwrap(),
            &mv(&["1/4", "1/3", "1/2"])
        );
        assert_eq!(reindexed_limit(&chain, &[0, 1, 2]).unwrap(), chain);
        assert_eq!(
            reindexed_limit(&chain, &[1, 1, 0]),
            Err(FaceError::NotAPermutation)
        );
        assert_eq!(
            reindexed_limit(&chain, &[0, 1]),
            Err(FaceError::NotAPermutation)
        );
        assert_eq!(
            reindexed_limit(&chain, &[0, 1, 3]),
            Err(FaceError::VertexOutOfRange(3))
        );
    }

    #[test]
    fn identity_permutation_gives_identity_germ() {
        let chain = grow(
            &grow(
                &LimitChain::new(2),
                &[
                    vec![rat("1/2"), rat("1/2")],
                    vec![rat("1/2"), rat("1/2")],
                ],
            ),
            &[
                vec![rat("1/4"), rat("1/2")],
                vec![rat("3/4"), rat("1/2")],
            ],
        );
        let h = limit_isomorphism_h(&chain, &[0, 1], 8).unwrap();
        // Identical chains match every atom with itself and never grow.
        assert_eq!(h.source, chain);
        assert_eq!(h.target, chain);
        for pair in h.germ.pairs() {
            assert_eq!(pair.left, pair.right);
            assert_eq!(pair.left_stage, pair.right_stage);
        }
        h.pushforward_checks().unwrap();
    }

    #[test]
    fn cyclic_permutation_satisfies_pushforward_identity() {
        let chain = grow(
            &LimitChain::new(3),
            &[
                vec![rat("1/2"), rat("1/4"), rat("1/3")],
                vec![rat("1/2"), rat("3/4"), rat("2/3")],
            ],
        );
        let perm = [1usize, 2, 0];
        let h = limit_isomorphism_h(&chain, &perm, 12).unwrap();
        let rows = h.pushforward_checks().unwrap();
        assert!(!rows.is_empty());
        // Reading the target mass back through the inverse permutation gives
        // the original measures: value at perm[q] equals the source value at
        // q, for every matched pair and every vertex.
        let mut inverse = vec![0usize; perm.len()];
        for (q, &p) in perm.iter().enumerate() {
            inverse[p] = q;
        }
        for (left, right) in &rows {
            let original = right.reindex(&inverse);
            for q in 0..3 {
                assert_eq!(original.get(perm[q]), left.get(q));
            }
        }
        // Both chains stay valid refinement towers after the matching tasks.
        h.source.validate().unwrap();
        h.target.validate().unwrap();
    }

    #[test]
    fn germ_covers_both_original_stages() {
        let chain = grow(
            &LimitChain::new(3),
            &[
                vec![rat("1/2"), rat("1/4"), rat("1/3")],
                vec![rat("1/2"), rat("3/4"), rat("2/3")],
            ],
        );
        let h = limit_isomorphism_h(&chain, &[2, 0, 1], 12).unwrap();
        let source_last = h.source.stage_count() - 1;
        let target_last = h.target.stage_count() - 1;
        let mut left_cover: BTreeSet<AtomId> = BTreeSet::new();
        let mut right_cover: BTreeSet<AtomId> = BTreeSet::new();
        for pair in h.germ.pairs() {
            left_cover.extend(
                h.source
                    .forward_set(pair.left_stage, source_last, &pair.left)
                    .unwrap(),
            );
            right_cover.extend(
                h.target
                    .forward_set(pair.right_stage, target_last, &pair.right)
                    .unwrap(),
            );
        }
        let all_left: BTreeSet<AtomId> = h.source.last_stage().atom_ids().cloned().collect();
        let all_right: BTreeSet<AtomId> = h.target.last_stage().atom_ids().cloned().collect();
        assert_eq!(left_cover, all_left);
        assert_eq!(right_cover, all_right);
    }

    #[test]
    fn isomorphism_round_trips_through_json() {
        let chain = grow(
            &LimitChain::new(2),
            &[
                vec![rat("1/4"), rat("1/2")],
                vec![rat("3/4"), rat("1/2")],
            ],
        );
        let h = limit_isomorphism_h(&chain, &[1, 0], 10).unwrap();
        let json = serde_json::to_string(&h).unwrap();
        let back: LimitIsomorphism = serde_json::from_str(&json).unwrap();
        assert_eq!(back, h);
    }
}
