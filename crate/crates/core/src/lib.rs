//! Focusing nonlinear Schrödinger equation on a star graph with a delta
//! coupling at the vertex.
//!
//! The crate builds the explicit stationary states of
//! `i d/dt Psi = H_alpha Psi - |Psi|^{2mu} Psi`, checks their variational and
//! spectral properties (natural-constraint minimization, linearization
//! inertia, Vakhitov-Kolokolov slope) and simulates their dynamics with a
//! Strang-split Crank-Nicolson scheme.
//!
//! All quantities are dimensionless.

pub mod arrow;
pub mod cli;
pub mod dynamics;
pub mod error;
pub mod functionals;
pub mod grid;
pub mod io;
pub mod operator;
pub mod spectral;
pub mod stationary;
pub mod variational;

pub use error::{Error, Result};
pub use functionals::{energy, h1_distance_mod_phase, mass, Quadrature};
pub use grid::{make_grid, GraphField, StarGrid, VertexCoupling};
pub use operator::apply_hamiltonian;
pub use stationary::{build_kirchhoff, build_state, StateKind, StationarySpec};
