//! Refinement chains approximating the generic measured algebra.
//!
//! A [`LimitChain`] is a finite tower of measured algebras joined by
//! refinement embeddings. Stages grow by discharging [`FraisseTask`]s: a
//! subalgebra of an existing stage, presented by blocks of atoms, is split
//! according to an embedding into a finer algebra, and the witness embedding
//! of that finer algebra into the new stage is kept in the task log.
//! [`build_limit`] drives this from a deterministic, seed-permuted schedule
//! covering every algebra within a denominator budget.

use std::collections::{BTreeMap, BTreeSet};

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::algebra::{
    AlgebraError, Atom, AtomId, Embedding, EmbeddingError, FiniteMeasuredAlgebra,
    PresentedAlgebra,
};
use crate::measure::MeasureVector;
use crate::rational::Rat;

/// Atom id of the root stage.
pub const ROOT_ATOM: &str = "r";

/// Block id used by joint-embedding tasks for the whole-stage block.
const JOINT_BLOCK: &str = "u";

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum ChainError {
    #[error("vertex count must be at least 1")]
    NoVertices,
    #[error("{0} budget must be at least 1")]
    BadBudget(&'static str),
    #[error("stage {stage} out of range, chain has {stages} stages")]
    StageIndex { stage: usize, stages: usize },
    #[error("atom {atom:?} is not in stage {stage}")]
    UnknownAtom { stage: usize, atom: AtomId },
    #[error("task extension source differs from the presented subalgebra")]
    SubalgebraMismatch,
    #[error("extension target atom {0:?} is not coordinatewise positive")]
    TargetNotPositive(AtomId),
    #[error("chain has no stages")]
    NoStages,
    #[error("stage 0 must be the trivial one-atom algebra")]
    RootNotTrivial,
    #[error("stage {0} is not a valid measured algebra")]
    InvalidStage(usize),
    #[error("chain with {stages} stages has {refinements} refinements")]
    RefinementCount { stages: usize, refinements: usize },
    #[error("refinement {0} does not join stage {0} to its successor")]
    RefinementEndpoints(usize),
    #[error("task log entry {0} is inconsistent with the chain")]
    TaskLogEntry(usize),
    #[error(transparent)]
    Algebra(#[from] AlgebraError),
    #[error(transparent)]
    Embedding(#[from] EmbeddingError),
}

/// An extension demand against a chain: a subalgebra of one stage, presented
/// by blocks of that stage's atoms, together with an embedding of the
/// presented algebra into a finer one.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct FraisseTask {
    pub source_stage: usize,
    pub sub: PresentedAlgebra,
    pub ext: Embedding,
}

impl FraisseTask {
    /// The task that splits the whole newest stage by `target`: its single
    /// block is the full stage, embedded as one unit atom into `target`.
    pub fn joint(chain: &LimitChain, target: FiniteMeasuredAlgebra) -> FraisseTask {
        let stage = chain.last_stage();
        let sub = PresentedAlgebra::trivial(stage, JOINT_BLOCK);
        let source = sub
            .induced_algebra(stage)
            .expect("whole-stage block is a partition");
        let blocks = BTreeMap::from([(
            JOINT_BLOCK.to_string(),
            target.atom_ids().cloned().collect::<BTreeSet<_>>(),
        )]);
        FraisseTask {
            source_stage: chain.stage_count() - 1,
            sub,
            ext: Embedding {
                source,
                target,
                blocks,
            },
        }
    }
}

/// A task that has been discharged, with the stage it created and the
/// witness embedding of the task's target into that stage. The witness
/// composed with the task extension is the identity on the subalgebra, which
/// is what makes every target algebra a subobject of the chain.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct DischargedTask {
    pub task: FraisseTask,
    pub new_stage: usize,
    pub beta: Embedding,
}

/// A finite tower of measured algebras under refinement.
///
/// Stage 0 is the one-atom algebra; `refinements[s]` embeds stage `s` into
/// stage `s + 1` by mapping each atom to the set of its children. The value
/// is append-only: extension operations return a new chain.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct LimitChain {
    k: usize,
    stages: Vec<FiniteMeasuredAlgebra>,
    refinements: Vec<Embedding>,
    task_log: Vec<DischargedTask>,
    truncated: bool,
}

impl LimitChain {
    pub fn new(k: usize) -> LimitChain {
        LimitChain {
            k,
            stages: vec![FiniteMeasuredAlgebra::trivial(k, ROOT_ATOM)],
            refinements: Vec::new(),
            task_log: Vec::new(),
            truncated: false,
        }
    }

    /// Reassembles a chain from transformed parts; callers must keep the
    /// refinement and task-log structure consistent (checked by `validate`).
    pub(crate) fn from_parts(
        k: usize,
        stages: Vec<FiniteMeasuredAlgebra>,
        refinements: Vec<Embedding>,
        task_log: Vec<DischargedTask>,
        truncated: bool,
    ) -> LimitChain {
        LimitChain {
            k,
            stages,
            refinements,
            task_log,
            truncated,
        }
    }

    pub fn k(&self) -> usize {
        self.k
    }

    pub fn stages(&self) -> &[FiniteMeasuredAlgebra] {
        &self.stages
    }

    pub fn stage_count(&self) -> usize {
        self.stages.len()
    }

    pub fn stage(&self, s: usize) -> Result<&FiniteMeasuredAlgebra, ChainError> {
        self.stages.get(s).ok_or(ChainError::StageIndex {
            stage: s,
            stages: self.stages.len(),
        })
    }

    pub fn last_stage(&self) -> &FiniteMeasuredAlgebra {
        self.stages.last().expect("chains always have stage 0")
    }

    pub fn refinements(&self) -> &[Embedding] {
        &self.refinements
    }

    pub fn task_log(&self) -> &[DischargedTask] {
        &self.task_log
    }

    /// True when the build schedule still had tasks left at the stage budget.
    pub fn is_truncated(&self) -> bool {
        self.truncated
    }

    /// Image of a set of stage-`s` atoms in stage `to` (`s <= to`), i.e. the
    /// union of descendants under the refinement embeddings.
    pub fn forward_set(
        &self,
        from: usize,
        to: usize,
        set: &BTreeSet<AtomId>,
    ) -> Result<BTreeSet<AtomId>, ChainError> {
        if from > to || to >= self.stages.len() {
            return Err(ChainError::StageIndex {
                stage: to,
                stages: self.stages.len(),
            });
        }
        for id in set {
            if self.stages[from].atom(id).is_none() {
                return Err(ChainError::UnknownAtom {
                    stage: from,
                    atom: id.clone(),
                });
            }
        }
        let mut current = set.clone();
        for refinement in &self.refinements[from..to] {
            let mut next = BTreeSet::new();
            for id in &current {
                next.extend(refinement.blocks[id].iter().cloned());
            }
            current = next;
        }
        Ok(current)
    }

    /// Full structural check: valid stages, matching refinement endpoints,
    /// and a task log whose witnesses land in the recorded stages.
    pub fn validate(&self) -> Result<(), ChainError> {
        if self.stages.is_empty() {
            return Err(ChainError::NoStages);
        }
        let root = &self.stages[0];
        if root.atoms().len() != 1 || !root.atoms()[0].mu.eq(&MeasureVector::unit(self.k)) {
            return Err(ChainError::RootNotTrivial);
        }
        for (s, stage) in self.stages.iter().enumerate() {
            if stage.k() != self.k || !stage.validate().is_valid() {
                return Err(ChainError::InvalidStage(s));
            }
        }
        if self.refinements.len() + 1 != self.stages.len() {
            return Err(ChainError::RefinementCount {
                stages: self.stages.len(),
                refinements: self.refinements.len(),
            });
        }
        for (s, refinement) in self.refinements.iter().enumerate() {
            if refinement.source != self.stages[s] || refinement.target != self.stages[s + 1] {
                return Err(ChainError::RefinementEndpoints(s));
            }
            refinement.check()?;
        }
        for (i, entry) in self.task_log.iter().enumerate() {
            let ok = entry.new_stage < self.stages.len()
                && entry.task.source_stage < entry.new_stage
                && entry.beta.source == entry.task.ext.target
                && entry.beta.target == self.stages[entry.new_stage]
                && entry.beta.is_embedding();
            if !ok {
                return Err(ChainError::TaskLogEntry(i));
            }
        }
        Ok(())
    }
}

/// Discharges one task: appends a stage in which every ambient atom lying in
/// a block of `task.sub` splits in the proportions of that block's extension
/// atoms. Blocks mapped to a single atom pass through unchanged, so an
/// identity extension copies the stage. The witness embedding of
/// `task.ext.target` into the new stage is recorded in the task log.
pub fn one_point_extension(
    chain: &LimitChain,
    task: FraisseTask,
) -> Result<LimitChain, ChainError> {
    let stage_count = chain.stage_count();
    if task.source_stage >= stage_count {
        return Err(ChainError::StageIndex {
            stage: task.source_stage,
            stages: stage_count,
        });
    }
    let presented_in = &chain.stages[task.source_stage];
    let induced = task.sub.induced_algebra(presented_in)?;
    if induced != task.ext.source {
        return Err(ChainError::SubalgebraMismatch);
    }
    task.ext.check()?;
    for atom in task.ext.target.atoms() {
        if !atom.mu.is_strictly_positive() {
            return Err(ChainError::TargetNotPositive(atom.id.clone()));
        }
    }

    let last = chain.last_stage();
    let mut children: Vec<Atom> = Vec::new();
    let mut refinement_blocks: BTreeMap<AtomId, BTreeSet<AtomId>> = BTreeMap::new();
    let mut beta_blocks: BTreeMap<AtomId, BTreeSet<AtomId>> = BTreeMap::new();
    for (block_id, members) in &task.sub.blocks {
        let block_mass = induced.mu(block_id)?;
        let targets = &task.ext.blocks[block_id];
        // Ambient atoms below this block in the newest stage.
        let ambient = chain.forward_set(task.source_stage, stage_count - 1, members)?;
        for x in &ambient {
            let parent = last.atom(x).expect("forward_set stays inside the stage");
            if targets.len() == 1 {
                let b = targets.iter().next().expect("checked nonempty");
                children.push(parent.clone());
                refinement_blocks.insert(x.clone(), BTreeSet::from([x.clone()]));
                beta_blocks.entry(b.clone()).or_default().insert(x.clone());
                continue;
            }
            let mut kids = BTreeSet::new();
            for (j, b) in targets.iter().enumerate() {
                // Product coupling: the child takes the parent's mass in the
                // proportion its extension atom holds inside the block.
                let share = task.ext.target.mu(b)?.pointwise_div(block_mass);
                let id = format!("{x}.{j}");
                children.push(Atom {
                    id: id.clone(),
                    mu: parent.mu.pointwise_mul(&share),
                });
                kids.insert(id.clone());
                beta_blocks.entry(b.clone()).or_default().insert(id);
            }
            refinement_blocks.insert(x.clone(), kids);
        }
    }

    let next = FiniteMeasuredAlgebra::new(chain.k, children)?;
    let refinement = Embedding {
        source: last.clone(),
        target: next.clone(),
        blocks: refinement_blocks,
    };
    let beta = Embedding {
        source: task.ext.target.clone(),
        target: next.clone(),
        blocks: beta_blocks,
    };
    debug_assert!(refinement.is_embedding());
    debug_assert!(beta.is_embedding());

    let mut out = chain.clone();
    out.stages.push(next);
    out.refinements.push(refinement);
    out.task_log.push(DischargedTask {
        task,
        new_stage: stage_count,
        beta,
    });
    Ok(out)
}

/// An id not yet taken, obtained by suffixing `base` until it is fresh.
pub(crate) fn fresh_id(base: &str, taken: &BTreeSet<AtomId>) -> AtomId {
    let mut id = base.to_string();
    while taken.contains(&id) {
        id.push('+');
    }
    id
}

/// Builds the task splitting one block of the last stage into atoms of the
/// given masses and passing every other atom through as a singleton. Child
/// ids start from `base` plus a running index; the returned list names the
/// split atoms in mass order. The masses must sum to the block mass; the
/// embedding check inside `one_point_extension` rejects anything else.
pub(crate) fn split_block_task(
    chain: &LimitChain,
    block: &BTreeSet<AtomId>,
    masses: &[MeasureVector],
    base: &str,
) -> Result<(FraisseTask, Vec<AtomId>), ChainError> {
    assert!(!block.is_empty(), "cannot split an empty block");
    let stage_now = chain.last_stage();
    let block_id = block.iter().next().expect("nonempty block").clone();
    let mut blocks: Vec<(AtomId, BTreeSet<AtomId>)> = vec![(block_id.clone(), block.clone())];
    let mut target_atoms: Vec<Atom> = Vec::new();
    let mut ext_blocks: BTreeMap<AtomId, BTreeSet<AtomId>> = BTreeMap::new();
    let mut taken: BTreeSet<AtomId> = BTreeSet::new();
    for atom in stage_now.atoms() {
        if block.contains(&atom.id) {
            continue;
        }
        blocks.push((atom.id.clone(), BTreeSet::from([atom.id.clone()])));
        target_atoms.push(atom.clone());
        ext_blocks.insert(atom.id.clone(), BTreeSet::from([atom.id.clone()]));
        taken.insert(atom.id.clone());
    }
    let mut child_ids = Vec::with_capacity(masses.len());
    for (j, mass) in masses.iter().enumerate() {
        let id = fresh_id(&format!("{base}{j}"), &taken);
        taken.insert(id.clone());
        target_atoms.push(Atom {
            id: id.clone(),
            mu: mass.clone(),
        });
        child_ids.push(id);
    }
    ext_blocks.insert(block_id, child_ids.iter().cloned().collect());
    let sub = PresentedAlgebra::new(blocks);
    let source = sub.induced_algebra(stage_now)?;
    let task = FraisseTask {
        source_stage: chain.stage_count() - 1,
        sub,
        ext: Embedding {
            source,
            target: FiniteMeasuredAlgebra::new(chain.k(), target_atoms)?,
            blocks: ext_blocks,
        },
    };
    Ok((task, child_ids))
}

/// All fractions in `(0, 1]` whose reduced denominator is at most `bound`.
fn fraction_values(bound: u64) -> Vec<Rat> {
    let mut values = BTreeSet::new();
    for q in 1..=bound {
        for p in 1..=q {
            values.insert(Rat::new(p as i64, q as i64));
        }
    }
    values.into_iter().collect()
}

/// Every measured algebra (up to isomorphism) whose atom vectors have all
/// reduced denominators at most `denom_budget`, including the one-atom
/// algebra. Atoms are listed in vector order with ids `a0, a1, ...`; the
/// result is sorted by (max denominator, atom count, atom vectors).
pub fn enumerate_class(k: usize, denom_budget: u64) -> Vec<FiniteMeasuredAlgebra> {
    assert!(k >= 1 && denom_budget >= 1);
    let values = fraction_values(denom_budget);
    let mut coords: Vec<Vec<Rat>> = vec![Vec::new()];
    for _ in 0..k {
        let mut next = Vec::with_capacity(coords.len() * values.len());
        for prefix in &coords {
            for v in &values {
                let mut row = prefix.clone();
                row.push(v.clone());
                next.push(row);
            }
        }
        coords = next;
    }
    let mut vectors: Vec<MeasureVector> = coords.into_iter().map(MeasureVector::new).collect();
    vectors.sort();

    let minimum = values[0].clone();
    let mut found: Vec<Vec<MeasureVector>> = Vec::new();
    let mut acc: Vec<MeasureVector> = Vec::new();
    fill_multisets(
        &vectors,
        &minimum,
        0,
        &MeasureVector::unit(k),
        &mut acc,
        &mut found,
    );

    let mut algebras: Vec<FiniteMeasuredAlgebra> = found
        .into_iter()
        .map(|vs| {
            let atoms = vs
                .into_iter()
                .enumerate()
                .map(|(i, mu)| Atom {
                    id: format!("a{i}"),
                    mu,
                })
                .collect();
            FiniteMeasuredAlgebra::new(k, atoms).expect("enumerated atoms are distinct")
        })
        .collect();
    algebras.sort_by_key(task_order_key);
    algebras
}

/// Multisets of strictly positive vectors summing to `remaining`, chosen in
/// non-decreasing order starting from index `start`.
fn fill_multisets(
    vectors: &[MeasureVector],
    minimum: &Rat,
    start: usize,
    remaining: &MeasureVector,
    acc: &mut Vec<MeasureVector>,
    out: &mut Vec<Vec<MeasureVector>>,
) {
    if remaining.is_zero() {
        if !acc.is_empty() {
            out.push(acc.clone());
        }
        return;
    }
    // Every future vector is positive everywhere, so a coordinate may not
    // finish early, and each must have at least one smallest value left.
    if remaining.has_zero_coord() || remaining.min_coord() < minimum {
        return;
    }
    for (i, v) in vectors.iter().enumerate().skip(start) {
        if !v.le(remaining) {
            continue;
        }
        acc.push(v.clone());
        fill_multisets(vectors, minimum, i, &remaining.sub(v), acc, out);
        acc.pop();
    }
}

fn task_order_key(algebra: &FiniteMeasuredAlgebra) -> (u64, usize, String) {
    let mut vectors: Vec<&MeasureVector> = algebra.atoms().iter().map(|a| &a.mu).collect();
    vectors.sort();
    let form = vectors
        .iter()
        .map(|v| {
            v.iter()
                .map(|r| r.to_string())
                .collect::<Vec<_>>()
                .join(",")
        })
        .collect::<Vec<_>>()
        .join("|");
    (algebra.max_denominator(), algebra.atoms().len(), form)
}

/// Builds a chain by discharging the joint-embedding task of every
/// nontrivial algebra within the denominator budget against the newest
/// stage, until `depth_budget` stages exist. Tasks run in order of
/// (max denominator, atom count, atom vectors); the seed shuffles only
/// within groups of equal max denominator, so the schedule stays fair. If
/// the stage budget runs out first the chain is marked truncated.
pub fn build_limit(
    k: usize,
    depth_budget: usize,
    denom_budget: u64,
    seed: u64,
) -> Result<LimitChain, ChainError> {
    if k == 0 {
        return Err(ChainError::NoVertices);
    }
    if depth_budget == 0 {
        return Err(ChainError::BadBudget("stage"));
    }
    if denom_budget == 0 {
        return Err(ChainError::BadBudget("denominator"));
    }

    let mut schedule = enumerate_class(k, denom_budget);
    schedule.retain(|c| c.atoms().len() > 1);
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut lo = 0;
    while lo < schedule.len() {
        let d = schedule[lo].max_denominator();
        let mut hi = lo;
        while hi < schedule.len() && schedule[hi].max_denominator() == d {
            hi += 1;
        }
        schedule[lo..hi].shuffle(&mut rng);
        lo = hi;
    }

    let mut chain = LimitChain::new(k);
    for target in schedule {
        if chain.stage_count() >= depth_budget {
            chain.truncated = true;
            break;
        }
        let task = FraisseTask::joint(&chain, target);
        chain = one_point_extension(&chain, task)?;
    }
    Ok(chain)
}
