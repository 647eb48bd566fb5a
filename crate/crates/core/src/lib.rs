//! Simulation toolkit for polariton heat-pump cooling of mechanical modes in
//! linearized cavity optomechanics.
//!
//! The cavity mode `a` and phonon mode `b` form two polariton branches whose
//! character is switched between photon-like and phonon-like by sweeping the
//! laser detuning. A four-stroke cycle uses the upper polariton as a working
//! fluid: it is made phonon-like, swaps its population with a target
//! mechanical mode through a parametric pulse, is made photon-like again and
//! dumps the heat into the (cold) optical bath.
//!
//! Two interchangeable engines propagate the open-system dynamics: an exact
//! Gaussian moment engine and a truncated Fock-space master-equation engine
//! used as an independent check. Both are selected by name through
//! [`engine::EngineRegistry`].

#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod config;
pub mod engine;
pub mod error;
pub mod fock;
pub mod gaussian;
pub mod model;
pub mod polariton;
pub mod presets;
pub mod quadratic;
pub mod runner;
pub mod symplectic;

pub use error::{Error, ErrorKind, Result};
