//! Probabilistic logic for toxidrome recognition.
//!
//! - [`rulelang`]: the rule language (parse, print).
//! - [`worlds`]: grounding and exact inference over possible worlds.
//! - [`toxkb`]: the toxidrome knowledge base and its vocabulary.
//! - [`casegen`]: seeded generation of simulated presentations.
//! - [`dtree`]: the CART decision-tree baseline.
//! - [`evalkappa`]: Cohen's kappa and the benchmark harness.

pub mod rulelang;
pub mod worlds;
pub mod toxkb;
pub mod casegen;
pub mod dtree;
pub mod evalkappa;
