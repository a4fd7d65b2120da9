//! Robust mean-square stability certification for a Josephson junction in a
//! resonant cavity, modelled as a linear quantum system with a
//! sector-bounded cosine perturbation.
//!
//! The pipeline is [`josephson::build_model`] to get a [`SystemModel`], then
//! [`stability::certify`], which checks that `F` is Hurwitz and that the
//! H-infinity norm of the perturbation channel is below `gamma / 2`.

// NaN must fail every range check, so comparisons are negated on purpose.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod error;
pub mod josephson;
pub mod linalg;
pub mod lqsys;
pub mod moment;
pub mod report;
pub mod sector;
pub mod stability;

pub use error::{Error, Result};
pub use lqsys::{PhysicalParams, SystemModel};
pub use stability::{certify, StabilityCertificate, Tolerances};
