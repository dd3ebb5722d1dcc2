//! Search engine for the bilinear rank of small bilinear maps over GF(2).
//!
//! The library computes, for a target bilinear map (truncated or cyclic
//! polynomial products, small matrix products), the minimal number of
//! coefficient multiplications needed to evaluate it, together with *all*
//! optimal rank-one decompositions. Three search strategies are provided:
//! a plain exhaustive search, a search pruned by the automorphism group of
//! the target, and a covering-sets search driven by a precomputed
//! classification of rank-one-generated subspaces.

pub mod bilinear;
pub mod error;
pub mod gf2;
pub mod group;
pub mod omega;
pub mod report;
pub mod search;
pub mod targets;

pub use bilinear::{BilinearForm, Decomposition, RankOneForm, Subspace};
pub use error::Error;
pub use gf2::BitMatrix;
pub use group::{GeneratedGroup, RpAutomorphism};
pub use omega::{OmegaClass, OmegaStore};
pub use search::{SearchStats, SolutionSet};
pub use targets::{TargetId, TargetMap};
