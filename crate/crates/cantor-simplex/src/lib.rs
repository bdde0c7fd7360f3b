//! Exact-arithmetic machinery for simplices of invariant measures on Cantor space.
//!
//! Everything here computes with arbitrary-precision rationals; there is no
//! floating point anywhere. The crate has three layers:
//!
//! * finite measured Boolean algebras and their embeddings ([`algebra`]),
//!   amalgamated over a common subalgebra by exact coupling matrices
//!   ([`amalgam`]), and stacked into refinement chains with a deterministic
//!   task schedule ([`chain`], [`backforth`], [`verify`], [`face`]);
//! * clopen subsets of `{0,1}^N` as prefix-free word sets ([`words`]),
//!   homeomorphisms given by prefix substitution rules ([`prefix_map`]), and
//!   column partitions witnessing approximate divisibility ([`partition`]);
//! * certificates that record every check with exact values so a run can be
//!   replayed byte for byte ([`cert`], [`io`]).

pub mod algebra;
pub mod amalgam;
pub mod backforth;
pub mod cert;
pub mod chain;
pub mod face;
pub mod io;
pub mod measure;
pub mod partition;
pub mod prefix_map;
pub mod rational;
pub mod verify;
pub mod words;

pub use algebra::{Atom, Embedding, FiniteMeasuredAlgebra, PresentedAlgebra};
pub use chain::{build_limit, one_point_extension, FraisseTask, LimitChain};
pub use face::{face_extension_decompose, limit_isomorphism_h, restricted_limit};
pub use measure::MeasureVector;
pub use verify::{verify_dynamical_simplex, SimplexReport, Verdict};
pub use rational::Rat;
pub use words::{ClopenSet, Word};
