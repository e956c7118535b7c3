//! Simulation and analysis toolkit for a Bose-Einstein condensate strongly
//! coupled to an ultrahigh-finesse optical cavity.
//!
//! The crate covers the full model chain: Rb-87 D2 angular-momentum algebra
//! ([`atomic`]), cavity and transport geometry ([`geometry`]), the
//! single-excitation Hamiltonian of the coupled system and its eigenspectrum
//! ([`hamiltonian`]), condensate ground states and mode overlap ([`gpe`]),
//! synthetic transmission scans ([`scan`]) and nonlinear least-squares
//! fitting of couplings and populations ([`fit`]).

pub mod atomic;
pub mod config;
pub mod constants;
pub mod eigen;
pub mod error;
pub mod fit;
pub mod geometry;
pub mod gpe;
pub mod hamiltonian;
pub mod io;
pub mod rng;
pub mod scan;
pub mod wigner;

pub use error::{Error, Result};
