//! Finite Boolean algebras carrying one finitely additive probability measure
//! per vertex, and the measure-preserving embeddings between them.
//!
//! An algebra is stored by its atoms. Each atom has a string id and a
//! [`MeasureVector`]; for every vertex the atom values sum to exactly 1.
//! An embedding maps each source atom to the block of target atoms it splits
//! into, so checking it is exact summation.

use std::collections::{BTreeMap, BTreeSet};
use std::fmt;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::measure::MeasureVector;
use crate::rational::Rat;

pub type AtomId = String;

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct Atom {
    pub id: AtomId,
    pub mu: MeasureVector,
}

/// Finite measured Boolean algebra over vertex set `0..k`, presented by its
/// atoms in id order.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(try_from = "AlgebraRepr", into = "AlgebraRepr")]
pub struct FiniteMeasuredAlgebra {
    k: usize,
    atoms: Vec<Atom>,
}

#[derive(Serialize, Deserialize)]
struct AlgebraRepr {
    k: usize,
    atoms: Vec<Atom>,
}

impl From<FiniteMeasuredAlgebra> for AlgebraRepr {
    fn from(a: FiniteMeasuredAlgebra) -> AlgebraRepr {
        AlgebraRepr {
            k: a.k,
            atoms: a.atoms,
        }
    }
}

impl TryFrom<AlgebraRepr> for FiniteMeasuredAlgebra {
    type Error = AlgebraError;
    fn try_from(r: AlgebraRepr) -> Result<FiniteMeasuredAlgebra, AlgebraError> {
        FiniteMeasuredAlgebra::new(r.k, r.atoms)
    }
}

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum AlgebraError {
    #[error("duplicate atom id {0:?}")]
    DuplicateAtomId(AtomId),
    #[error("unknown atom id {0:?}")]
    UnknownAtomId(AtomId),
    #[error("empty vertex subset")]
    EmptyFace,
    #[error("vertex {0} out of range")]
    VertexOutOfRange(usize),
    #[error("atom sets do not partition the ambient algebra")]
    NotAPartition,
    #[error("presentations do not share an ambient carrier")]
    CarrierMismatch,
}

/// One structural defect found by [`FiniteMeasuredAlgebra::validate`].
#[derive(Debug, Clone, PartialEq, Eq)]
pub enum Violation {
    NoAtoms,
    VectorLengthMismatch { atom: AtomId, len: usize },
    NonPositiveEntry { atom: AtomId, vertex: usize, value: Rat },
    EntryExceedsOne { atom: AtomId, vertex: usize, value: Rat },
    CoordinateSumMismatch { vertex: usize, sum: Rat },
}

impl fmt::Display for Violation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Violation::NoAtoms => write!(f, "algebra has no atoms"),
            Violation::VectorLengthMismatch { atom, len } => {
                write!(f, "atom {atom:?} has {len} coordinates")
            }
            Violation::NonPositiveEntry {
                atom,
                vertex,
                value,
            } => write!(f, "atom {atom:?} has value {value} <= 0 at vertex {vertex}"),
            Violation::EntryExceedsOne {
                atom,
                vertex,
                value,
            } => write!(f, "atom {atom:?} has value {value} > 1 at vertex {vertex}"),
            Violation::CoordinateSumMismatch { vertex, sum } => {
                write!(f, "vertex {vertex} sums to {sum}, not 1")
            }
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Default)]
pub struct ValidityReport {
    pub violations: Vec<Violation>,
}

impl ValidityReport {
    pub fn is_valid(&self) -> bool {
        self.violations.is_empty()
    }
}

impl FiniteMeasuredAlgebra {
    /// Atoms are sorted by id; duplicate ids are rejected. Measure-level
    /// defects are left for [`validate`](Self::validate) to report.
    pub fn new(k: usize, mut atoms: Vec<Atom>) -> Result<FiniteMeasuredAlgebra, AlgebraError> {
        atoms.sort_by(|a, b| a.id.cmp(&b.id));
        for w in atoms.windows(2) {
            if w[0].id == w[1].id {
                return Err(AlgebraError::DuplicateAtomId(w[0].id.clone()));
            }
        }
        Ok(FiniteMeasuredAlgebra { k, atoms })
    }

    /// The one-atom algebra whose single atom is the unit.
    pub fn trivial(k: usize, unit_id: &str) -> FiniteMeasuredAlgebra {
        FiniteMeasuredAlgebra {
            k,
            atoms: vec![Atom {
                id: unit_id.to_string(),
                mu: MeasureVector::unit(k),
            }],
        }
    }

    pub fn k(&self) -> usize {
        self.k
    }

    pub fn atoms(&self) -> &[Atom] {
        &self.atoms
    }

    pub fn atom_ids(&self) -> impl Iterator<Item = &AtomId> {
        self.atoms.iter().map(|a| &a.id)
    }

    pub fn atom(&self, id: &str) -> Option<&Atom> {
        self.atoms
            .binary_search_by(|a| a.id.as_str().cmp(id))
            .ok()
            .map(|i| &self.atoms[i])
    }

    pub fn mu(&self, id: &str) -> Result<&MeasureVector, AlgebraError> {
        self.atom(id)
            .map(|a| &a.mu)
            .ok_or_else(|| AlgebraError::UnknownAtomId(id.to_string()))
    }

    /// Exact sum of the vectors of the named atoms.
    pub fn block_mass(&self, ids: &BTreeSet<AtomId>) -> Result<MeasureVector, AlgebraError> {
        let mut acc = MeasureVector::zero(self.k);
        for id in ids {
            acc = acc.add(self.mu(id)?);
        }
        Ok(acc)
    }

    /// Lists every violation: per-vertex sums, nonpositive or >1 entries,
    /// wrong vector lengths, empty atom list.
    pub fn validate(&self) -> ValidityReport {
        let mut violations = Vec::new();
        if self.atoms.is_empty() {
            violations.push(Violation::NoAtoms);
            return ValidityReport { violations };
        }
        let one = Rat::one();
        for atom in &self.atoms {
            if atom.mu.len() != self.k {
                violations.push(Violation::VectorLengthMismatch {
                    atom: atom.id.clone(),
                    len: atom.mu.len(),
                });
                continue;
            }
            for (vertex, value) in atom.mu.iter().enumerate() {
                if !value.is_positive() {
                    violations.push(Violation::NonPositiveEntry {
                        atom: atom.id.clone(),
                        vertex,
                        value: value.clone(),
                    });
                } else if *value > one {
                    violations.push(Violation::EntryExceedsOne {
                        atom: atom.id.clone(),
                        vertex,
                        value: value.clone(),
                    });
                }
            }
        }
        if self.atoms.iter().all(|a| a.mu.len() == self.k) {
            for vertex in 0..self.k {
                let sum: Rat = self.atoms.iter().map(|a| a.mu.get(vertex)).sum();
                if sum != one {
                    violations.push(Violation::CoordinateSumMismatch { vertex, sum });
                }
            }
        }
        ValidityReport { violations }
    }

    pub fn is_valid(&self) -> bool {
        self.validate().is_valid()
    }

    /// Largest reduced denominator appearing in any atom coordinate.
    pub fn max_denominator(&self) -> u64 {
        self.atoms
            .iter()
            .flat_map(|a| a.mu.iter())
            .map(|r| r.denom_u64().unwrap_or(u64::MAX))
            .max()
            .unwrap_or(1)
    }

    /// Projects every atom vector onto the given vertex subset (strictly
    /// increasing indices into `0..k`).
    pub fn restrict_to_face(&self, face: &[usize]) -> Result<FiniteMeasuredAlgebra, AlgebraError> {
        if face.is_empty() {
            return Err(AlgebraError::EmptyFace);
        }
        let increasing = face.windows(2).all(|w| w[0] < w[1]);
        if !increasing {
            return Err(AlgebraError::NotAPartition);
        }
        if let Some(&v) = face.iter().find(|&&v| v >= self.k) {
            return Err(AlgebraError::VertexOutOfRange(v));
        }
        Ok(FiniteMeasuredAlgebra {
            k: face.len(),
            atoms: self
                .atoms
                .iter()
                .map(|a| Atom {
                    id: a.id.clone(),
                    mu: a.mu.project(face),
                })
                .collect(),
        })
    }

    /// Reindexes every vector along a vertex map (see [`MeasureVector::reindex`]).
    pub fn reindex_vertices(&self, map: &[usize]) -> FiniteMeasuredAlgebra {
        FiniteMeasuredAlgebra {
            k: map.len(),
            atoms: self
                .atoms
                .iter()
                .map(|a| Atom {
                    id: a.id.clone(),
                    mu: a.mu.reindex(map),
                })
                .collect(),
        }
    }
}

/// Measure-preserving embedding, recorded as the block of target atoms under
/// each source atom.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct Embedding {
    pub source: FiniteMeasuredAlgebra,
    pub target: FiniteMeasuredAlgebra,
    pub blocks: BTreeMap<AtomId, BTreeSet<AtomId>>,
}

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum EmbeddingError {
    #[error("vertex counts differ: source {0}, target {1}")]
    VertexCountMismatch(usize, usize),
    #[error("source atom {0:?} has no block")]
    MissingBlock(AtomId),
    #[error("block key {0:?} is not a source atom")]
    UnknownSourceAtom(AtomId),
    #[error("block of {0:?} is empty")]
    EmptyBlock(AtomId),
    #[error("block member {member:?} of {atom:?} is not a target atom")]
    UnknownTargetAtom { atom: AtomId, member: AtomId },
    #[error("target atom {member:?} appears in blocks of {first:?} and {second:?}")]
    OverlappingBlocks {
        member: AtomId,
        first: AtomId,
        second: AtomId,
    },
    #[error("target atom {0:?} not covered by any block")]
    UncoveredTargetAtom(AtomId),
    #[error("block of {atom:?} sums to {got} instead of {want}")]
    MassMismatch {
        atom: AtomId,
        want: MeasureVector,
        got: MeasureVector,
    },
    #[error("embeddings do not compose: middle algebras differ")]
    CompositionMismatch,
}

impl Embedding {
    pub fn identity(a: &FiniteMeasuredAlgebra) -> Embedding {
        Embedding {
            source: a.clone(),
            target: a.clone(),
            blocks: a
                .atom_ids()
                .map(|id| (id.clone(), BTreeSet::from([id.clone()])))
                .collect(),
        }
    }

    /// First violation of the embedding contract, in deterministic order:
    /// block keys match source atoms, blocks are nonempty, pairwise disjoint,
    /// jointly exhaust the target, and masses agree exactly.
    pub fn check(&self) -> Result<(), EmbeddingError> {
        if self.source.k() != self.target.k() {
            return Err(EmbeddingError::VertexCountMismatch(
                self.source.k(),
                self.target.k(),
            ));
        }
        for key in self.blocks.keys() {
            if self.source.atom(key).is_none() {
                return Err(EmbeddingError::UnknownSourceAtom(key.clone()));
            }
        }
        let mut owner: BTreeMap<&AtomId, &AtomId> = BTreeMap::new();
        for atom in self.source.atoms() {
            let block = self
                .blocks
                .get(&atom.id)
                .ok_or_else(|| EmbeddingError::MissingBlock(atom.id.clone()))?;
            if block.is_empty() {
                return Err(EmbeddingError::EmptyBlock(atom.id.clone()));
            }
            for member in block {
                if self.target.atom(member).is_none() {
                    return Err(EmbeddingError::UnknownTargetAtom {
                        atom: atom.id.clone(),
                        member: member.clone(),
                    });
                }
                if let Some(first) = owner.insert(member, &atom.id) {
                    return Err(EmbeddingError::OverlappingBlocks {
                        member: member.clone(),
                        first: first.clone(),
                        second: atom.id.clone(),
                    });
                }
            }
        }
        for atom in self.target.atoms() {
            if !owner.contains_key(&atom.id) {
                return Err(EmbeddingError::UncoveredTargetAtom(atom.id.clone()));
            }
        }
        for atom in self.source.atoms() {
            let got = self
                .target
                .block_mass(&self.blocks[&atom.id])
                .expect("members checked above");
            if got != atom.mu {
                return Err(EmbeddingError::MassMismatch {
                    atom: atom.id.clone(),
                    want: atom.mu.clone(),
                    got,
                });
            }
        }
        Ok(())
    }

    pub fn is_embedding(&self) -> bool {
        self.check().is_ok()
    }

    /// `other` after `self`: blocks compose by unioning.
    pub fn compose(&self, other: &Embedding) -> Result<Embedding, EmbeddingError> {
        if self.target != other.source {
            return Err(EmbeddingError::CompositionMismatch);
        }
        let mut blocks = BTreeMap::new();
        for (id, mid) in &self.blocks {
            let mut joined = BTreeSet::new();
            for m in mid {
                let next = other
                    .blocks
                    .get(m)
                    .ok_or_else(|| EmbeddingError::MissingBlock(m.clone()))?;
                joined.extend(next.iter().cloned());
            }
            blocks.insert(id.clone(), joined);
        }
        Ok(Embedding {
            source: self.source.clone(),
            target: other.target.clone(),
            blocks,
        })
    }
}

/// A subalgebra of an ambient algebra, presented as a partition of the
/// ambient atoms into named blocks.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct PresentedAlgebra {
    pub blocks: Vec<(AtomId, BTreeSet<AtomId>)>,
}

impl PresentedAlgebra {
    pub fn new(mut blocks: Vec<(AtomId, BTreeSet<AtomId>)>) -> PresentedAlgebra {
        blocks.sort_by(|a, b| a.0.cmp(&b.0));
        PresentedAlgebra { blocks }
    }

    /// The whole ambient algebra as one block.
    pub fn trivial(ambient: &FiniteMeasuredAlgebra, unit_id: &str) -> PresentedAlgebra {
        PresentedAlgebra {
            blocks: vec![(
                unit_id.to_string(),
                ambient.atom_ids().cloned().collect(),
            )],
        }
    }

    /// Each ambient atom as its own block.
    pub fn identity(ambient: &FiniteMeasuredAlgebra) -> PresentedAlgebra {
        PresentedAlgebra {
            blocks: ambient
                .atom_ids()
                .map(|id| (id.clone(), BTreeSet::from([id.clone()])))
                .collect(),
        }
    }

    pub fn block(&self, id: &str) -> Option<&BTreeSet<AtomId>> {
        self.blocks
            .iter()
            .find(|(bid, _)| bid == id)
            .map(|(_, set)| set)
    }

    /// Blocks must be nonempty, pairwise disjoint, and exhaust the ambient
    /// atoms.
    pub fn check_partition(&self, ambient: &FiniteMeasuredAlgebra) -> Result<(), AlgebraError> {
        let mut seen: BTreeSet<&AtomId> = BTreeSet::new();
        let mut names: BTreeSet<&AtomId> = BTreeSet::new();
        for (id, set) in &self.blocks {
            if !names.insert(id) {
                return Err(AlgebraError::DuplicateAtomId(id.clone()));
            }
            if set.is_empty() {
                return Err(AlgebraError::NotAPartition);
            }
            for member in set {
                if ambient.atom(member).is_none() {
                    return Err(AlgebraError::UnknownAtomId(member.clone()));
                }
                if !seen.insert(member) {
                    return Err(AlgebraError::NotAPartition);
                }
            }
        }
        if seen.len() != ambient.atoms().len() {
            return Err(AlgebraError::NotAPartition);
        }
        Ok(())
    }

    /// The measured algebra this presentation induces, by exact summation.
    pub fn induced_algebra(
        &self,
        ambient: &FiniteMeasuredAlgebra,
    ) -> Result<FiniteMeasuredAlgebra, AlgebraError> {
        self.check_partition(ambient)?;
        let atoms = self
            .blocks
            .iter()
            .map(|(id, set)| {
                Ok(Atom {
                    id: id.clone(),
                    mu: ambient.block_mass(set)?,
                })
            })
            .collect::<Result<Vec<_>, AlgebraError>>()?;
        FiniteMeasuredAlgebra::new(ambient.k(), atoms)
    }

    /// The embedding of the induced algebra into the ambient one.
    pub fn inclusion(
        &self,
        ambient: &FiniteMeasuredAlgebra,
    ) -> Result<Embedding, AlgebraError> {
        let source = self.induced_algebra(ambient)?;
        Ok(Embedding {
            source,
            target: ambient.clone(),
            blocks: self.blocks.iter().cloned().collect(),
        })
    }
}

/// Coarsest common refinement of two subalgebras presented inside the same
/// ambient algebra: blocks are the nonempty pairwise intersections, named
/// `"a∧b"`.
pub fn common_refinement(
    ambient: &FiniteMeasuredAlgebra,
    a: &PresentedAlgebra,
    b: &PresentedAlgebra,
) -> Result<PresentedAlgebra, AlgebraError> {
    a.check_partition(ambient)
        .map_err(|_| AlgebraError::CarrierMismatch)?;
    b.check_partition(ambient)
        .map_err(|_| AlgebraError::CarrierMismatch)?;
    let mut blocks = Vec::new();
    for (aid, aset) in &a.blocks {
        for (bid, bset) in &b.blocks {
            let meet: BTreeSet<AtomId> = aset.intersection(bset).cloned().collect();
            if !meet.is_empty() {
                blocks.push((format!("{aid}∧{bid}"), meet));
            }
        }
    }
    Ok(PresentedAlgebra::new(blocks))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rational::rat;

    fn mv(pairs: &[(i64, i64)]) -> MeasureVector {
        MeasureVector::new(pairs.iter().map(|&(n, d)| rat(n, d)).collect())
    }

    fn atom(id: &str, pairs: &[(i64, i64)]) -> Atom {
        Atom {
            id: id.to_string(),
            mu: mv(pairs),
        }
    }

    fn two_atom_uniform() -> FiniteMeasuredAlgebra {
        FiniteMeasuredAlgebra::new(
            2,
            vec![atom("a", &[(1, 2), (1, 2)]), atom("b", &[(1, 2), (1, 2)])],
        )
        .unwrap()
    }

    #[test]
    fn valid_algebra_passes() {
        assert!(two_atom_uniform().is_valid());
        assert!(FiniteMeasuredAlgebra::trivial(3, "u").is_valid());
    }

    #[test]
    fn validator_reports_each_defect() {
        let bad = FiniteMeasuredAlgebra::new(
            2,
            vec![atom("a", &[(1, 2), (3, 2)]), atom("b", &[(1, 2), (-1, 2)])],
        )
        .unwrap();
        let report = bad.validate();
        assert!(report.violations.contains(&Violation::EntryExceedsOne {
            atom: "a".into(),
            vertex: 1,
            value: rat(3, 2),
        }));
        assert!(report.violations.contains(&Violation::NonPositiveEntry {
            atom: "b".into(),
            vertex: 1,
            value: rat(-1, 2),
        }));
        // vertex 0 sums to 1, vertex 1 sums to 1 as well; only entry defects.
        assert_eq!(report.violations.len(), 2);

        let gap = FiniteMeasuredAlgebra::new(1, vec![atom("a", &[(1, 3)])]).unwrap();
        assert_eq!(
            gap.validate().violations,
            vec![Violation::CoordinateSumMismatch {
                vertex: 0,
                sum: rat(1, 3),
            }]
        );
    }

    #[test]
    fn duplicate_ids_rejected() {
        let err = FiniteMeasuredAlgebra::new(
            1,
            vec![atom("a", &[(1, 2)]), atom("a", &[(1, 2)])],
        )
        .unwrap_err();
        assert_eq!(err, AlgebraError::DuplicateAtomId("a".into()));
    }

    #[test]
    fn embedding_round() {
        let a = FiniteMeasuredAlgebra::trivial(2, "u");
        let b = two_atom_uniform();
        let e = Embedding {
            source: a,
            target: b,
            blocks: BTreeMap::from([(
                "u".to_string(),
                BTreeSet::from(["a".to_string(), "b".to_string()]),
            )]),
        };
        assert!(e.is_embedding());
    }

    #[test]
    fn embedding_violations_in_order() {
        let b = two_atom_uniform();
        let mut e = Embedding {
            source: b.clone(),
            target: b.clone(),
            blocks: BTreeMap::from([
                ("a".to_string(), BTreeSet::from(["a".to_string()])),
                ("b".to_string(), BTreeSet::from(["a".to_string()])),
            ]),
        };
        assert_eq!(
            e.check(),
            Err(EmbeddingError::OverlappingBlocks {
                member: "a".into(),
                first: "a".into(),
                second: "b".into(),
            })
        );
        e.blocks.insert("b".into(), BTreeSet::from(["b".to_string()]));
        assert!(e.is_embedding());
        e.blocks.remove("b");
        assert_eq!(e.check(), Err(EmbeddingError::MissingBlock("b".into())));
    }

    #[test]
    fn mass_mismatch_detected() {
        let a = FiniteMeasuredAlgebra::new(
            1,
            vec![atom("x", &[(1, 3)]), atom("y", &[(2, 3)])],
        )
        .unwrap();
        let b = FiniteMeasuredAlgebra::new(
            1,
            vec![
                atom("p", &[(1, 2)]),
                atom("q", &[(1, 4)]),
                atom("r", &[(1, 4)]),
            ],
        )
        .unwrap();
        let e = Embedding {
            source: a,
            target: b,
            blocks: BTreeMap::from([
                ("x".to_string(), BTreeSet::from(["p".to_string()])),
                (
                    "y".to_string(),
                    BTreeSet::from(["q".to_string(), "r".to_string()]),
                ),
            ]),
        };
        assert!(matches!(
            e.check(),
            Err(EmbeddingError::MassMismatch { atom, .. }) if atom == "x"
        ));
    }

    #[test]
    fn composition_unions_blocks() {
        let a = FiniteMeasuredAlgebra::trivial(1, "u");
        let b = FiniteMeasuredAlgebra::new(
            1,
            vec![atom("x", &[(1, 2)]), atom("y", &[(1, 2)])],
        )
        .unwrap();
        let c = FiniteMeasuredAlgebra::new(
            1,
            vec![
                atom("x0", &[(1, 4)]),
                atom("x1", &[(1, 4)]),
                atom("y0", &[(1, 2)]),
            ],
        )
        .unwrap();
        let ab = Embedding {
            source: a,
            target: b.clone(),
            blocks: BTreeMap::from([(
                "u".to_string(),
                BTreeSet::from(["x".to_string(), "y".to_string()]),
            )]),
        };
        let bc = Embedding {
            source: b,
            target: c,
            blocks: BTreeMap::from([
                (
                    "x".to_string(),
                    BTreeSet::from(["x0".to_string(), "x1".to_string()]),
                ),
                ("y".to_string(), BTreeSet::from(["y0".to_string()])),
            ]),
        };
        let ac = ab.compose(&bc).unwrap();
        assert!(ac.is_embedding());
        assert_eq!(
            ac.blocks["u"],
            BTreeSet::from(["x0".to_string(), "x1".to_string(), "y0".to_string()])
        );
    }

    #[test]
    fn restriction_projects_coordinates() {
        let a = FiniteMeasuredAlgebra::new(
            3,
            vec![
                atom("x", &[(1, 2), (1, 3), (1, 4)]),
                atom("y", &[(1, 2), (2, 3), (3, 4)]),
            ],
        )
        .unwrap();
        let r = a.restrict_to_face(&[0, 2]).unwrap();
        assert_eq!(r.k(), 2);
        assert_eq!(*r.mu("x").unwrap(), mv(&[(1, 2), (1, 4)]));
        assert!(r.is_valid());
        assert_eq!(
            a.restrict_to_face(&[]).unwrap_err(),
            AlgebraError::EmptyFace
        );
        assert_eq!(
            a.restrict_to_face(&[0, 3]).unwrap_err(),
            AlgebraError::VertexOutOfRange(3)
        );
    }

    #[test]
    fn common_refinement_of_depth_one_splits() {
        // Ambient: depth-2 uniform cylinders. First split by first bit, second
        // by second bit; the refinement recovers all four cells of mass 1/4.
        let ambient = FiniteMeasuredAlgebra::new(
            1,
            vec![
                atom("00", &[(1, 4)]),
                atom("01", &[(1, 4)]),
                atom("10", &[(1, 4)]),
                atom("11", &[(1, 4)]),
            ],
        )
        .unwrap();
        let first = PresentedAlgebra::new(vec![
            ("0".into(), BTreeSet::from(["00".to_string(), "01".to_string()])),
            ("1".into(), BTreeSet::from(["10".to_string(), "11".to_string()])),
        ]);
        let second = PresentedAlgebra::new(vec![
            ("s0".into(), BTreeSet::from(["00".to_string(), "10".to_string()])),
            ("s1".into(), BTreeSet::from(["01".to_string(), "11".to_string()])),
        ]);
        let meet = common_refinement(&ambient, &first, &second).unwrap();
        let induced = meet.induced_algebra(&ambient).unwrap();
        assert_eq!(induced.atoms().len(), 4);
        for a in induced.atoms() {
            assert_eq!(a.mu, mv(&[(1, 4)]));
        }

        let skew = PresentedAlgebra::new(vec![(
            "z".into(),
            BTreeSet::from(["00".to_string()]),
        )]);
        assert_eq!(
            common_refinement(&ambient, &first, &skew).unwrap_err(),
            AlgebraError::CarrierMismatch
        );
    }

    #[test]
    fn presentation_checks() {
        let ambient = two_atom_uniform();
        let good = PresentedAlgebra::trivial(&ambient, "u");
        assert!(good.check_partition(&ambient).is_ok());
        let induced = good.induced_algebra(&ambient).unwrap();
        assert_eq!(*induced.mu("u").unwrap(), mv(&[(1, 1), (1, 1)]));
        let incl = good.inclusion(&ambient).unwrap();
        assert!(incl.is_embedding());

        let partial = PresentedAlgebra::new(vec![(
            "p".into(),
            BTreeSet::from(["a".to_string()]),
        )]);
        assert_eq!(
            partial.check_partition(&ambient).unwrap_err(),
            AlgebraError::NotAPartition
        );
    }
}
