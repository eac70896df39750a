//! Periodic fundamental solutions of second-order elliptic operators and
//! weakly singular periodic volume potentials.
//!
//! The crate is organised bottom-up:
//!
//! - [`cell`]: periodicity cells, folding and lattice enumeration.
//! - [`symbol`]: constant-coefficient operators, ellipticity and the
//!   frequency zero set.
//! - [`kernels`]: periodic kernels (synthetic power kernels, Yukawa image
//!   sums, Ewald-split Laplace kernel, damped Fourier series) and weighted
//!   norm estimation.
//! - [`quadrature`]: interior, complement and boundary rules for balls and
//!   boxes inside the cell, with Duffy refinement at the singular point.
//! - [`density`] and [`potentials`]: volume potentials over the domain and its
//!   complement, derivative identities and bound checks.
//! - [`roumieu`]: finite-order Roumieu seminorms and continuity probes.

pub mod cell;
pub mod density;
pub mod error;
pub mod kernels;
pub mod multi_index;
pub mod potentials;
pub mod quadrature;
pub mod roumieu;
pub mod special;
pub mod symbol;

pub use cell::{corner_set, fold_to_cell, lattice_window, make_cell, FoldedPoint, PeriodicityCell};
pub use error::{Error, Result};
pub use multi_index::MultiIndex;
