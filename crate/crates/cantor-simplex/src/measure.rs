//! Measure vectors: one exact rational per vertex of the index set.
//!
//! A vector attached to a nonzero algebra element lives in `(0,1]^k`; the
//! algebra-level validator enforces that, the type itself is just exact
//! coordinatewise arithmetic.

use std::fmt;

use serde::{Deserialize, Serialize};

use crate::rational::Rat;

/// `k` rationals indexed by vertex `0..k`.
#[derive(Clone, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(transparent)]
pub struct MeasureVector(Vec<Rat>);

impl MeasureVector {
    pub fn new(coords: Vec<Rat>) -> MeasureVector {
        MeasureVector(coords)
    }

    pub fn constant(k: usize, value: Rat) -> MeasureVector {
        MeasureVector(vec![value; k])
    }

    pub fn unit(k: usize) -> MeasureVector {
        MeasureVector::constant(k, Rat::one())
    }

    pub fn zero(k: usize) -> MeasureVector {
        MeasureVector::constant(k, Rat::zero())
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    pub fn get(&self, vertex: usize) -> &Rat {
        &self.0[vertex]
    }

    pub fn iter(&self) -> std::slice::Iter<'_, Rat> {
        self.0.iter()
    }

    pub fn coords(&self) -> &[Rat] {
        &self.0
    }

    pub fn add(&self, other: &MeasureVector) -> MeasureVector {
        self.zip_with(other, |a, b| a + b)
    }

    pub fn sub(&self, other: &MeasureVector) -> MeasureVector {
        self.zip_with(other, |a, b| a - b)
    }

    pub fn scale(&self, factor: &Rat) -> MeasureVector {
        MeasureVector(self.0.iter().map(|a| a * factor).collect())
    }

    pub fn div_int(&self, n: usize) -> MeasureVector {
        let inv = Rat::from_int(n as i64).recip();
        self.scale(&inv)
    }

    pub fn pointwise_mul(&self, other: &MeasureVector) -> MeasureVector {
        self.zip_with(other, |a, b| a * b)
    }

    /// Coordinatewise `self / other`; every coordinate of `other` must be nonzero.
    pub fn pointwise_div(&self, other: &MeasureVector) -> MeasureVector {
        self.zip_with(other, |a, b| a / b)
    }

    fn zip_with(&self, other: &MeasureVector, f: impl Fn(&Rat, &Rat) -> Rat) -> MeasureVector {
        assert_eq!(self.len(), other.len(), "vertex count mismatch");
        MeasureVector(
            self.0
                .iter()
                .zip(other.0.iter())
                .map(|(a, b)| f(a, b))
                .collect(),
        )
    }

    pub fn is_strictly_positive(&self) -> bool {
        self.0.iter().all(Rat::is_positive)
    }

    pub fn is_zero(&self) -> bool {
        self.0.iter().all(Rat::is_zero)
    }

    pub fn has_zero_coord(&self) -> bool {
        self.0.iter().any(Rat::is_zero)
    }

    /// `self <= other` at every coordinate.
    pub fn le(&self, other: &MeasureVector) -> bool {
        assert_eq!(self.len(), other.len(), "vertex count mismatch");
        self.0.iter().zip(other.0.iter()).all(|(a, b)| a <= b)
    }

    /// `self < other` at every coordinate.
    pub fn lt(&self, other: &MeasureVector) -> bool {
        assert_eq!(self.len(), other.len(), "vertex count mismatch");
        self.0.iter().zip(other.0.iter()).all(|(a, b)| a < b)
    }

    pub fn min_coord(&self) -> &Rat {
        self.0.iter().min().expect("empty vector")
    }

    pub fn max_coord(&self) -> &Rat {
        self.0.iter().max().expect("empty vector")
    }

    /// Keep only the coordinates named by `face` (strictly increasing vertex
    /// indices).
    pub fn project(&self, face: &[usize]) -> MeasureVector {
        MeasureVector(face.iter().map(|&v| self.0[v].clone()).collect())
    }

    /// Reindex along a vertex map: coordinate `q` of the result reads
    /// coordinate `map[q]` of `self`.
    pub fn reindex(&self, map: &[usize]) -> MeasureVector {
        MeasureVector(map.iter().map(|&v| self.0[v].clone()).collect())
    }

    pub fn sum_of<'a>(vectors: impl IntoIterator<Item = &'a MeasureVector>, k: usize) -> MeasureVector {
        vectors
            .into_iter()
            .fold(MeasureVector::zero(k), |acc, v| acc.add(v))
    }
}

impl fmt::Display for MeasureVector {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "(")?;
        for (i, c) in self.0.iter().enumerate() {
            if i > 0 {
                write!(f, ", ")?;
            }
            write!(f, "{c}")?;
        }
        write!(f, ")")
    }
}

impl fmt::Debug for MeasureVector {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        fmt::Display::fmt(self, f)
    }
}
