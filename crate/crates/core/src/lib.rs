//! Holomorphic-embedding power flow.
//!
//! The crate computes the stable operating point of an AC network from a
//! power series in an embedding parameter, continues it analytically with
//! diagonal Padé approximants, and uses the approximants' zero/pole structure
//! to certify infeasibility and locate voltage-collapse points. A polar
//! Newton-Raphson solver is included as a reference.
//!
//! `no_std` with `alloc`.

#![no_std]
// `!(x > y)` is used on purpose so that NaN takes the failing branch.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

extern crate alloc;

pub mod error;
pub mod linalg;
pub mod mp;
pub mod network;
pub mod newton;
pub mod pade;
pub mod series;
pub mod stability;

pub use error::{NetworkError, NewtonError, PadeError, SeriesError, StabilityError};
pub use network::{
    builtin_network, ybus, AdmittanceMatrix, Branch, Bus, BusId, BusKind, Network, ParamField,
    ParameterRef, FIXTURES,
};
