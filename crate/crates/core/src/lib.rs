//! Exact computations with automorphisms of rooted trees at finite depth.
//!
//! * [`tree`]: shapes, vertices and level-compatible permutation families.
//! * [`recursion`]: wreath-recursive definitions and their truncations.
//! * [`cycles`]: cycle structure, stability up to a depth budget, settledness.
//! * [`sampling`]: reproducible random automorphisms.
//! * [`affine`]: the affine model of the normalizer of an odometer.
//! * [`monodromy`]: iterated monodromy presentations and level groups.

pub mod affine;
pub mod cycles;
pub mod error;
pub mod monodromy;
pub mod recursion;
pub mod sampling;
pub mod tree;

pub use error::{Error, Result};
pub use recursion::{ElementExpr, Evaluator, RecursionEnv};
pub use tree::{Distance, LevelMap, TreeShape, TruncatedAutomorphism, Vertex};
