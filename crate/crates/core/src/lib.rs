//! Exact diagonalization of 1+1-dimensional SU(2) lattice Yang-Mills theory
//! with staggered fermions and Schwinger-boson (prepotential) links, together
//! with the cold-atom microscopic model that realizes it.
//!
//! The crate is `no_std` (it needs `alloc`). File formats, configuration and
//! the command-line driver live in the `ymsim` crate.
//!
//! Module map:
//!
//! - [`fock`]: modes, sector enumeration, ladder operators and fermionic signs
//! - [`sparse`]: the sparse operator type shared by all builders and solvers
//! - [`linkops`]: single-link Schwinger-boson operators and their SU(2) algebra
//! - [`hamiltonian`]: every Hamiltonian term, Gauss generators, staggered phase
//! - [`solver`]: Lanczos ground states, Krylov propagation, projectors
//! - [`effective`]: numerical adiabatic elimination of the ancilla fermions
//! - [`hyperfine`]: exact m_F selection-rule tables, validation and search
//! - [`experiments`]: string states, confinement scans, adiabatic sweeps

#![no_std]

extern crate alloc;

pub mod effective;
pub mod error;
pub mod experiments;
pub mod fock;
pub mod hamiltonian;
pub mod hyperfine;
pub mod linalg;
pub mod linkops;
pub mod solver;
pub mod sparse;

pub use error::{Error, Result};
pub use sparse::{SparseOperator, C64};
