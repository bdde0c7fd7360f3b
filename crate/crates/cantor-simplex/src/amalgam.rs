//! Amalgamation of two embeddings over a common base algebra.
//!
//! The core step splits one positive vector `f` against two prescribed
//! decompositions (row sums and column sums) into a full coupling matrix,
//! coordinate by coordinate. The product rule `h[j][k] = rows[j]*cols[k]/f`
//! is canonical and strictly positive; the northwest corner rule runs the
//! classical transportation fill per coordinate and may produce zeros.

use serde::{Deserialize, Serialize};
use std::collections::{BTreeMap, BTreeSet};
use thiserror::Error;

use crate::algebra::{Atom, AtomId, Embedding, FiniteMeasuredAlgebra};
use crate::measure::MeasureVector;
use crate::rational::Rat;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum CouplingStrategy {
    Product,
    Northwest,
}

impl std::fmt::Display for CouplingStrategy {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            CouplingStrategy::Product => write!(f, "product"),
            CouplingStrategy::Northwest => write!(f, "northwest"),
        }
    }
}

impl std::str::FromStr for CouplingStrategy {
    type Err = String;
    fn from_str(s: &str) -> Result<CouplingStrategy, String> {
        match s {
            "product" => Ok(CouplingStrategy::Product),
            "northwest" => Ok(CouplingStrategy::Northwest),
            other => Err(format!("unknown strategy {other:?} (product|northwest)")),
        }
    }
}

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum AmalgamationError {
    #[error("row sums disagree with f at vertex {vertex}: {got} != {want}")]
    RowMarginalMismatch {
        vertex: usize,
        want: Rat,
        got: Rat,
    },
    #[error("column sums disagree with f at vertex {vertex}: {got} != {want}")]
    ColumnMarginalMismatch {
        vertex: usize,
        want: Rat,
        got: Rat,
    },
    #[error("nonpositive entry in marginal data at vertex {0}")]
    NonPositiveMarginal(usize),
    #[error("empty marginal list")]
    EmptyMarginals,
    #[error("vertex counts disagree")]
    VertexCountMismatch,
    #[error("embeddings have different source algebras")]
    SourcesDiffer,
    #[error("embedding invalid: {0}")]
    InvalidEmbedding(#[from] crate::algebra::EmbeddingError),
    #[error(
        "northwest coupling left atom {atom:?} zero at vertices {zero_at:?} but not everywhere"
    )]
    PartiallyZeroAtom { atom: AtomId, zero_at: Vec<usize> },
}

/// Splits `f` into a `rows.len() x cols.len()` matrix whose row sums are
/// `rows` and column sums are `cols`, exactly, per coordinate.
///
/// All inputs must be strictly positive with matching marginals. Product
/// entries are strictly positive; northwest entries may vanish.
pub fn riesz_decompose(
    f: &MeasureVector,
    rows: &[MeasureVector],
    cols: &[MeasureVector],
    strategy: CouplingStrategy,
) -> Result<Vec<Vec<MeasureVector>>, AmalgamationError> {
    if rows.is_empty() || cols.is_empty() {
        return Err(AmalgamationError::EmptyMarginals);
    }
    let k = f.len();
    if rows.iter().chain(cols.iter()).any(|v| v.len() != k) {
        return Err(AmalgamationError::VertexCountMismatch);
    }
    for vertex in 0..k {
        if !f.get(vertex).is_positive()
            || rows.iter().any(|r| !r.get(vertex).is_positive())
            || cols.iter().any(|c| !c.get(vertex).is_positive())
        {
            return Err(AmalgamationError::NonPositiveMarginal(vertex));
        }
        let row_sum: Rat = rows.iter().map(|r| r.get(vertex)).sum();
        if row_sum != *f.get(vertex) {
            return Err(AmalgamationError::RowMarginalMismatch {
                vertex,
                want: f.get(vertex).clone(),
                got: row_sum,
            });
        }
        let col_sum: Rat = cols.iter().map(|c| c.get(vertex)).sum();
        if col_sum != *f.get(vertex) {
            return Err(AmalgamationError::ColumnMarginalMismatch {
                vertex,
                want: f.get(vertex).clone(),
                got: col_sum,
            });
        }
    }
    let matrix = match strategy {
        CouplingStrategy::Product => rows
            .iter()
            .map(|r| {
                cols.iter()
                    .map(|c| r.pointwise_mul(c).pointwise_div(f))
                    .collect()
            })
            .collect(),
        CouplingStrategy::Northwest => {
            let mut matrix =
                vec![vec![MeasureVector::zero(0); cols.len()]; rows.len()];
            let mut cells: Vec<Vec<Vec<Rat>>> =
                vec![vec![Vec::with_capacity(k); cols.len()]; rows.len()];
            for vertex in 0..k {
                let fills = northwest_fill(
                    &rows.iter().map(|r| r.get(vertex).clone()).collect::<Vec<_>>(),
                    &cols.iter().map(|c| c.get(vertex).clone()).collect::<Vec<_>>(),
                );
                for (j, row) in fills.iter().enumerate() {
                    for (l, value) in row.iter().enumerate() {
                        cells[j][l].push(value.clone());
                    }
                }
            }
            for (j, row) in cells.into_iter().enumerate() {
                for (l, coords) in row.into_iter().enumerate() {
                    matrix[j][l] = MeasureVector::new(coords);
                }
            }
            matrix
        }
    };
    Ok(matrix)
}

/// Classical northwest corner rule for one coordinate.
fn northwest_fill(rows: &[Rat], cols: &[Rat]) -> Vec<Vec<Rat>> {
    let mut out = vec![vec![Rat::zero(); cols.len()]; rows.len()];
    let mut row_rem: Vec<Rat> = rows.to_vec();
    let mut col_rem: Vec<Rat> = cols.to_vec();
    let (mut i, mut j) = (0usize, 0usize);
    while i < rows.len() && j < cols.len() {
        let t = row_rem[i].clone().min(col_rem[j].clone());
        out[i][j] = t.clone();
        row_rem[i] = &row_rem[i] - &t;
        col_rem[j] = &col_rem[j] - &t;
        if row_rem[i].is_zero() && i + 1 < rows.len() {
            i += 1;
        } else if col_rem[j].is_zero() && j + 1 < cols.len() {
            j += 1;
        } else {
            // Both exhausted on the last row and column.
            break;
        }
    }
    out
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct AmalgamationResult {
    pub amalgam: FiniteMeasuredAlgebra,
    pub alpha_prime: Embedding,
    pub beta_prime: Embedding,
    pub strategy: CouplingStrategy,
    /// Atom ids dropped because the northwest rule zeroed them at every
    /// coordinate.
    pub dropped: Vec<AtomId>,
}

/// Completes the span `B <- A -> C` to a commuting square over a new algebra
/// `D` whose atoms are pairs `"b⊗c"` with `b`, `c` lying over the same atom
/// of `A`.
pub fn amalgamate(
    alpha: &Embedding,
    beta: &Embedding,
    strategy: CouplingStrategy,
) -> Result<AmalgamationResult, AmalgamationError> {
    if alpha.source != beta.source {
        return Err(AmalgamationError::SourcesDiffer);
    }
    alpha.check()?;
    beta.check()?;
    let base = &alpha.source;
    let k = base.k();

    let mut atoms: Vec<Atom> = Vec::new();
    let mut alpha_blocks: BTreeMap<AtomId, BTreeSet<AtomId>> = alpha
        .target
        .atom_ids()
        .map(|id| (id.clone(), BTreeSet::new()))
        .collect();
    let mut beta_blocks: BTreeMap<AtomId, BTreeSet<AtomId>> = beta
        .target
        .atom_ids()
        .map(|id| (id.clone(), BTreeSet::new()))
        .collect();
    let mut dropped = Vec::new();

    for a in base.atoms() {
        let b_ids: Vec<&AtomId> = alpha.blocks[&a.id].iter().collect();
        let c_ids: Vec<&AtomId> = beta.blocks[&a.id].iter().collect();
        let rows: Vec<MeasureVector> = b_ids
            .iter()
            .map(|id| alpha.target.mu(id).expect("checked").clone())
            .collect();
        let cols: Vec<MeasureVector> = c_ids
            .iter()
            .map(|id| beta.target.mu(id).expect("checked").clone())
            .collect();
        let h = riesz_decompose(&a.mu, &rows, &cols, strategy)?;
        for (j, b_id) in b_ids.iter().enumerate() {
            for (l, c_id) in c_ids.iter().enumerate() {
                let id = format!("{b_id}⊗{c_id}");
                let mu = h[j][l].clone();
                if mu.is_zero() {
                    dropped.push(id);
                    continue;
                }
                if mu.has_zero_coord() {
                    let zero_at = (0..k).filter(|&v| mu.get(v).is_zero()).collect();
                    return Err(AmalgamationError::PartiallyZeroAtom { atom: id, zero_at });
                }
                alpha_blocks
                    .get_mut(*b_id)
                    .expect("target atom")
                    .insert(id.clone());
                beta_blocks
                    .get_mut(*c_id)
                    .expect("target atom")
                    .insert(id.clone());
                atoms.push(Atom { id, mu });
            }
        }
    }

    let amalgam =
        FiniteMeasuredAlgebra::new(k, atoms).expect("pair ids are unique per block pair");
    let alpha_prime = Embedding {
        source: alpha.target.clone(),
        target: amalgam.clone(),
        blocks: alpha_blocks,
    };
    let beta_prime = Embedding {
        source: beta.target.clone(),
        target: amalgam.clone(),
        blocks: beta_blocks,
    };
    Ok(AmalgamationResult {
        amalgam,
        alpha_prime,
        beta_prime,
        strategy,
        dropped,
    })
}
