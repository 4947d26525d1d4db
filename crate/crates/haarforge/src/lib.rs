//! Desk-scale laboratory for approximate unitary k-designs built from random
//! phased permutations: the product ensemble V = Z_L (prod_j e^{iθA_m^(j)}) Z_R,
//! Kesten–McKay angle selection, the partition-algebra diagram calculus and
//! moment-operator experiments against Haar and Ginibre references.

pub mod error;
pub mod free_words;
pub mod interpolation;
pub mod matrix_engine;
pub mod moment_lab;
pub mod partition_algebra;
pub mod perm_core;
pub mod rng;
pub mod theta_select;

pub use error::{Error, Result};
