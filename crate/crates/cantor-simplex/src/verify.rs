//! Witness-producing checks for the three simplex conditions on a chain.
//!
//! Everything here is exact: subdivision pieces, gap witnesses, and division
//! parts are computed as rationals and re-checked by summation before they
//! are reported. [`verify_dynamical_simplex`] searches a built chain without
//! modifying it; a witness it cannot find within budget makes the report
//! incomplete rather than failed, since a deeper chain may still contain it.

use std::collections::BTreeSet;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::algebra::{AlgebraError, Atom, AtomId, FiniteMeasuredAlgebra};
use crate::chain::{one_point_extension, split_block_task, ChainError, LimitChain};
use crate::measure::MeasureVector;
use crate::rational::Rat;

/// Nodes each subset-sum search may expand before giving up.
const SUBSET_SEARCH_CAP: usize = 1 << 17;

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum VerifyError {
    #[error("epsilon must be positive, got {0}")]
    BadEpsilon(Rat),
    #[error("vector must be coordinatewise in (0, 1]")]
    VectorOutOfRange,
    #[error("vectors have different lengths: {left} vs {right}")]
    LengthMismatch { left: usize, right: usize },
    #[error("no gap at vertex {vertex}: {small} is not below {large}")]
    GapViolated {
        vertex: usize,
        small: Rat,
        large: Rat,
    },
    #[error("complement vanishes at vertex {0} but not everywhere")]
    PartialUnitComplement(usize),
    #[error("divisor must be at least 1")]
    BadDivisor,
    #[error("cannot divide an empty block")]
    EmptyBlock,
    #[error("stage budget {budget} blocks the division task")]
    StageBudget { budget: usize },
    #[error(transparent)]
    Chain(#[from] ChainError),
    #[error(transparent)]
    Algebra(#[from] AlgebraError),
}

/// Per-atom minimum coordinate and the overall strict positivity verdict.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct PositivityReport {
    pub per_atom: Vec<(AtomId, Rat)>,
    pub minimum: Rat,
    pub strictly_positive: bool,
}

/// Minimum measure of every atom; for finitely many vertices the infimum in
/// the positivity condition is just this minimum.
pub fn check_positivity(algebra: &FiniteMeasuredAlgebra) -> PositivityReport {
    let per_atom: Vec<(AtomId, Rat)> = algebra
        .atoms()
        .iter()
        .map(|a| (a.id.clone(), a.mu.min_coord().clone()))
        .collect();
    let minimum = per_atom
        .iter()
        .map(|(_, m)| m.clone())
        .min()
        .unwrap_or_else(Rat::one);
    let strictly_positive = minimum.is_positive();
    PositivityReport {
        per_atom,
        minimum,
        strictly_positive,
    }
}

/// Splits `a` into `n = ceil(max_e a(e) / eps)` equal pieces `a / n`; each
/// piece is coordinatewise positive, at most `eps`, and the pieces sum back
/// to `a` exactly.
pub fn epsilon_subdivide(a: &MeasureVector, eps: &Rat) -> Result<Vec<MeasureVector>, VerifyError> {
    if !eps.is_positive() {
        return Err(VerifyError::BadEpsilon(eps.clone()));
    }
    if !a.is_strictly_positive() || a.iter().any(|c| c > &Rat::one()) {
        return Err(VerifyError::VectorOutOfRange);
    }
    let n = (a.max_coord() / eps).ceil_usize().max(1);
    let piece = a.div_int(n);
    Ok(vec![piece; n])
}

/// An algebra containing a marked copy of `a` inside a copy of `b`.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct GapWitness {
    pub algebra: FiniteMeasuredAlgebra,
    /// Atom carrying exactly the vector `a`.
    pub inner: AtomId,
    /// Atoms forming the copy of `b`: the inner atom plus the gap atom.
    pub outer: BTreeSet<AtomId>,
}

/// Builds the three-atom algebra `a`, `b - a`, `1 - b` (the complement atom
/// is dropped when `b` is the unit). Requires a strict gap `a(e) < b(e)` at
/// every vertex; a complement that vanishes at only some vertices cannot be
/// an atom and is rejected.
pub fn glasner_weiss_witness(
    a: &MeasureVector,
    b: &MeasureVector,
) -> Result<GapWitness, VerifyError> {
    if a.len() != b.len() {
        return Err(VerifyError::LengthMismatch {
            left: a.len(),
            right: b.len(),
        });
    }
    if !a.is_strictly_positive() || b.iter().any(|c| c > &Rat::one()) {
        return Err(VerifyError::VectorOutOfRange);
    }
    for (vertex, (small, large)) in a.iter().zip(b.iter()).enumerate() {
        if small >= large {
            return Err(VerifyError::GapViolated {
                vertex,
                small: small.clone(),
                large: large.clone(),
            });
        }
    }
    let unit = MeasureVector::unit(a.len());
    let rest = unit.sub(b);
    let mut atoms = vec![
        Atom {
            id: "a".to_string(),
            mu: a.clone(),
        },
        Atom {
            id: "b-a".to_string(),
            mu: b.sub(a),
        },
    ];
    if rest.is_zero() {
        // b is the unit: the witness has no complement atom.
    } else if rest.has_zero_coord() {
        let vertex = rest
            .iter()
            .position(|c| c.is_zero())
            .expect("a zero coordinate exists");
        return Err(VerifyError::PartialUnitComplement(vertex));
    } else {
        atoms.push(Atom {
            id: "rest".to_string(),
            mu: rest,
        });
    }
    let algebra = FiniteMeasuredAlgebra::new(a.len(), atoms)?;
    debug_assert!(algebra.validate().is_valid());
    Ok(GapWitness {
        algebra,
        inner: "a".to_string(),
        outer: BTreeSet::from(["a".to_string(), "b-a".to_string()]),
    })
}

/// An exact `n`-fold division: `part` is a block of stage `stage` atoms with
/// `n * mass(part) = mass(whole)` coordinatewise.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct ExactDivision {
    pub stage: usize,
    pub whole: BTreeSet<AtomId>,
    pub part: BTreeSet<AtomId>,
    pub part_mass: MeasureVector,
}

/// Divides the block `set` of stage-`stage` atoms into `n` parts of equal
/// measure, discharging one task that splits the block and passes everything
/// else through. With `n = 1` the block is its own division and the chain is
/// untouched. The task is refused once the chain holds `max_stages` stages.
pub fn exact_divide(
    chain: &mut LimitChain,
    stage: usize,
    set: &BTreeSet<AtomId>,
    n: usize,
    max_stages: usize,
) -> Result<ExactDivision, VerifyError> {
    if n == 0 {
        return Err(VerifyError::BadDivisor);
    }
    if set.is_empty() {
        return Err(VerifyError::EmptyBlock);
    }
    let last = chain.stage_count() - 1;
    let whole = chain.forward_set(stage, last, set)?;
    let whole_mass = chain.last_stage().block_mass(&whole)?;
    if n == 1 {
        return Ok(ExactDivision {
            stage: last,
            whole: whole.clone(),
            part: whole,
            part_mass: whole_mass,
        });
    }
    if chain.stage_count() >= max_stages {
        return Err(VerifyError::StageBudget { budget: max_stages });
    }

    let part_mass = whole_mass.div_int(n);
    let masses = vec![part_mass.clone(); n];
    let (task, part_ids) = split_block_task(chain, &whole, &masses, "d")?;
    *chain = one_point_extension(chain, task)?;
    let beta = &chain.task_log().last().expect("task just discharged").beta;
    let part = beta.blocks[&part_ids[0]].clone();
    let new_last = chain.stage_count() - 1;
    let whole_now = chain.forward_set(last, new_last, &whole)?;
    debug_assert_eq!(
        chain.last_stage().block_mass(&part).unwrap(),
        part_mass
    );
    Ok(ExactDivision {
        stage: new_last,
        whole: whole_now,
        part,
        part_mass,
    })
}

/// Overall verdict of a witness report.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "UPPERCASE")]
pub enum Verdict {
    Verified,
    Incomplete,
    Failed,
}

/// A vector realized by some atom of the chain, at its first occurrence.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct RealizedVector {
    pub vector: MeasureVector,
    pub stage: usize,
    pub atom: AtomId,
}

/// Equal division of one realized atom into pieces below the tolerance,
/// assembled from a uniform splitting task recorded in the chain.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct SubdivisionWitness {
    pub vector: MeasureVector,
    pub required_pieces: usize,
    pub found: Option<SubdivisionSite>,
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct SubdivisionSite {
    pub atom_stage: usize,
    pub atom: AtomId,
    pub witness_stage: usize,
    pub piece_mass: MeasureVector,
    pub pieces: Vec<BTreeSet<AtomId>>,
}

/// A block realizing the smaller vector inside the descendants of an atom
/// realizing the larger one.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct InclusionWitness {
    pub small: MeasureVector,
    pub large: MeasureVector,
    pub found: Option<InclusionSite>,
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct InclusionSite {
    pub large_stage: usize,
    pub large_atom: AtomId,
    pub witness_stage: usize,
    pub subset: BTreeSet<AtomId>,
}

/// An atom whose measures at two vertices differ, separating the measures.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct SeparationWitness {
    pub vertices: (usize, usize),
    pub found: Option<SeparationSite>,
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct SeparationSite {
    pub stage: usize,
    pub atom: AtomId,
    pub masses: (Rat, Rat),
}

/// Everything [`verify_dynamical_simplex`] established about a chain, with
/// the witnesses it found. The verdict is `Verified` only when every witness
/// search succeeded; a miss yields `Incomplete` (the chain may simply be too
/// shallow), and `Failed` is reserved for disproved conditions or an invalid
/// chain.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct SimplexReport {
    pub k: usize,
    pub denom_bound: u64,
    pub chain_valid: bool,
    pub minimum_measure: Rat,
    pub strictly_positive: bool,
    pub realized: Vec<RealizedVector>,
    pub subdivisions: Vec<SubdivisionWitness>,
    pub inclusions: Vec<InclusionWitness>,
    pub separations: Vec<SeparationWitness>,
    pub verdict: Verdict,
}

/// Distinct atom vectors with all denominators within the bound, tagged with
/// their first occurrence in stage-then-id order.
fn realized_vectors(chain: &LimitChain, denom_bound: u64) -> Vec<RealizedVector> {
    let mut seen: BTreeSet<MeasureVector> = BTreeSet::new();
    let mut out = Vec::new();
    for (s, stage) in chain.stages().iter().enumerate() {
        for atom in stage.atoms() {
            let in_bound = atom
                .mu
                .iter()
                .all(|r| r.denom_u64().map(|d| d <= denom_bound).unwrap_or(false));
            if in_bound && seen.insert(atom.mu.clone()) {
                out.push(RealizedVector {
                    vector: atom.mu.clone(),
                    stage: s,
                    atom: atom.id.clone(),
                });
            }
        }
    }
    out
}

/// Task-log entries that uniformly split a whole stage into `m` equal atoms:
/// `(task index, m, source stage)`.
fn uniform_split_entries(chain: &LimitChain) -> Vec<(usize, usize, usize)> {
    let mut out = Vec::new();
    for (i, entry) in chain.task_log().iter().enumerate() {
        let task = &entry.task;
        if task.sub.blocks.len() != 1 {
            continue;
        }
        let Ok(stage) = chain.stage(task.source_stage) else {
            continue;
        };
        if task.sub.blocks[0].1.len() != stage.atoms().len() {
            continue;
        }
        let m = task.ext.target.atoms().len();
        if m < 2 {
            continue;
        }
        let share = MeasureVector::constant(chain.k(), Rat::new(1, m as i64));
        if task.ext.target.atoms().iter().all(|a| a.mu == share) {
            out.push((i, m, task.source_stage));
        }
    }
    out
}

/// Finds an equal division of the realized atom into at least
/// `required_pieces` pieces by grouping the children of a uniform splitting
/// task; smallest usable task first.
fn find_subdivision(
    chain: &LimitChain,
    uniform: &[(usize, usize, usize)],
    realized: &RealizedVector,
    required_pieces: usize,
) -> Option<SubdivisionSite> {
    if required_pieces <= 1 {
        // The atom is already small enough to be its own single piece.
        return Some(SubdivisionSite {
            atom_stage: realized.stage,
            atom: realized.atom.clone(),
            witness_stage: realized.stage,
            piece_mass: realized.vector.clone(),
            pieces: vec![BTreeSet::from([realized.atom.clone()])],
        });
    }
    let mut candidates: Vec<&(usize, usize, usize)> = uniform
        .iter()
        .filter(|(_, m, source)| *m >= required_pieces && *source >= realized.stage)
        .collect();
    candidates.sort_by_key(|(i, m, _)| (*m, *i));
    let (task_index, m, source) = *candidates.first()?;
    let entry = &chain.task_log()[*task_index];
    let witness_stage = entry.new_stage;
    let seed = BTreeSet::from([realized.atom.clone()]);
    let descendants = chain
        .forward_set(realized.stage, witness_stage, &seed)
        .ok()?;
    let _ = source;
    let piece_mass = realized.vector.div_int(*m);
    let mut pieces = Vec::with_capacity(*m);
    for target_atom in entry.task.ext.target.atoms() {
        let block: BTreeSet<AtomId> = entry.beta.blocks[&target_atom.id]
            .intersection(&descendants)
            .cloned()
            .collect();
        debug_assert_eq!(
            chain.stages()[witness_stage].block_mass(&block).unwrap(),
            piece_mass
        );
        pieces.push(block);
    }
    Some(SubdivisionSite {
        atom_stage: realized.stage,
        atom: realized.atom.clone(),
        witness_stage,
        piece_mass,
        pieces,
    })
}

/// Depth-first subset-sum over `atoms` for a block with exactly the target
/// mass; suffix sums prune branches that cannot reach it, and the search
/// stops once the node budget is spent.
fn subset_with_mass(
    stage: &FiniteMeasuredAlgebra,
    atoms: &[AtomId],
    target: &MeasureVector,
    budget: &mut usize,
) -> Option<BTreeSet<AtomId>> {
    let vectors: Vec<&MeasureVector> = atoms
        .iter()
        .map(|id| stage.mu(id).expect("descendants are stage atoms"))
        .collect();
    let k = target.len();
    let mut suffix = vec![MeasureVector::zero(k); atoms.len() + 1];
    for i in (0..atoms.len()).rev() {
        suffix[i] = suffix[i + 1].add(vectors[i]);
    }
    let mut acc: Vec<usize> = Vec::new();
    fn rec(
        vectors: &[&MeasureVector],
        suffix: &[MeasureVector],
        i: usize,
        remaining: &MeasureVector,
        acc: &mut Vec<usize>,
        budget: &mut usize,
    ) -> bool {
        if remaining.is_zero() {
            return true;
        }
        if i == vectors.len() || *budget == 0 || !remaining.le(&suffix[i]) {
            if *budget > 0 {
                *budget -= 1;
            }
            return false;
        }
        *budget -= 1;
        if vectors[i].le(remaining) {
            acc.push(i);
            if rec(
                vectors,
                suffix,
                i + 1,
                &remaining.sub(vectors[i]),
                acc,
                budget,
            ) {
                return true;
            }
            acc.pop();
        }
        rec(vectors, suffix, i + 1, remaining, acc, budget)
    }
    if rec(&vectors, &suffix, 0, target, &mut acc, budget) {
        Some(acc.into_iter().map(|i| atoms[i].clone()).collect())
    } else {
        None
    }
}

/// Finds a block of descendants of the larger atom carrying exactly the
/// smaller vector, scanning stages upward from the larger atom's stage.
fn find_inclusion(
    chain: &LimitChain,
    small: &MeasureVector,
    large: &RealizedVector,
) -> Option<InclusionSite> {
    let seed = BTreeSet::from([large.atom.clone()]);
    for t in large.stage..chain.stage_count() {
        let descendants: Vec<AtomId> = chain
            .forward_set(large.stage, t, &seed)
            .expect("atom forwards within the chain")
            .into_iter()
            .collect();
        let mut budget = SUBSET_SEARCH_CAP;
        if let Some(subset) =
            subset_with_mass(&chain.stages()[t], &descendants, small, &mut budget)
        {
            return Some(InclusionSite {
                large_stage: large.stage,
                large_atom: large.atom.clone(),
                witness_stage: t,
                subset,
            });
        }
    }
    None
}

fn find_separation(chain: &LimitChain, e: usize, f: usize) -> Option<SeparationSite> {
    for (s, stage) in chain.stages().iter().enumerate() {
        for atom in stage.atoms() {
            if atom.mu.get(e) != atom.mu.get(f) {
                return Some(SeparationSite {
                    stage: s,
                    atom: atom.id.clone(),
                    masses: (atom.mu.get(e).clone(), atom.mu.get(f).clone()),
                });
            }
        }
    }
    None
}

/// Searches the chain for witnesses of the three simplex conditions over all
/// vectors realized with denominators within `denom_bound`, plus separation
/// witnesses for every vertex pair. The chain is not modified; the tolerance
/// for subdivisions is `1 / denom_bound`.
pub fn verify_dynamical_simplex(chain: &LimitChain, denom_bound: u64) -> SimplexReport {
    let k = chain.k();
    let chain_valid = chain.validate().is_ok() && denom_bound >= 1;

    let mut minimum_measure = Rat::one();
    for stage in chain.stages() {
        let report = check_positivity(stage);
        minimum_measure = minimum_measure.min(report.minimum);
    }
    let strictly_positive = minimum_measure.is_positive();

    let realized = if chain_valid {
        realized_vectors(chain, denom_bound)
    } else {
        Vec::new()
    };
    let uniform = uniform_split_entries(chain);
    let eps = Rat::new(1, denom_bound.max(1) as i64);

    // The searches are independent; parallel map with an order-preserving
    // collect keeps the report deterministic.
    let mut subdivisions = Vec::new();
    let mut inclusions = Vec::new();
    let mut separations = Vec::new();
    if chain_valid {
        subdivisions = realized
            .par_iter()
            .map(|r| {
                let required = (r.vector.max_coord() / &eps).ceil_usize().max(1);
                SubdivisionWitness {
                    vector: r.vector.clone(),
                    required_pieces: required,
                    found: find_subdivision(chain, &uniform, r, required),
                }
            })
            .collect();
        let pairs: Vec<(&RealizedVector, &RealizedVector)> = realized
            .iter()
            .flat_map(|small| realized.iter().map(move |large| (small, large)))
            .filter(|(small, large)| small.vector.lt(&large.vector))
            .collect();
        inclusions = pairs
            .par_iter()
            .map(|(small, large)| InclusionWitness {
                small: small.vector.clone(),
                large: large.vector.clone(),
                found: find_inclusion(chain, &small.vector, large),
            })
            .collect();
        let vertex_pairs: Vec<(usize, usize)> = (0..k)
            .flat_map(|e| ((e + 1)..k).map(move |f| (e, f)))
            .collect();
        separations = vertex_pairs
            .par_iter()
            .map(|&(e, f)| SeparationWitness {
                vertices: (e, f),
                found: find_separation(chain, e, f),
            })
            .collect();
    }

    let all_found = subdivisions.iter().all(|w| w.found.is_some())
        && inclusions.iter().all(|w| w.found.is_some())
        && separations.iter().all(|w| w.found.is_some());
    let verdict = if !chain_valid || !strictly_positive {
        Verdict::Failed
    } else if all_found {
        Verdict::Verified
    } else {
        Verdict::Incomplete
    };

    SimplexReport {
        k,
        denom_bound,
        chain_valid,
        minimum_measure,
        strictly_positive,
        realized,
        subdivisions,
        inclusions,
        separations,
        verdict,
    }
}
