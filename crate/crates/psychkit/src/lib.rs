//! psychkit: psychometric analysis of binary response matrices.
//!
//! The pipeline runs classical test theory (item statistics, coefficient
//! alpha, norm tables), group-comparison statistics, 1PL/2PL latent-trait
//! models fitted by marginal maximum likelihood EM, differential item
//! functioning with three detectors and anchor purification, and
//! PISA-style proficiency levels built on the logit scale.

pub mod ctt;
pub mod dataset;
pub mod dif;
pub mod error;
pub mod inference;
pub mod irt;
pub mod proficiency;
pub mod report;
pub mod sim;
pub mod stats;

pub use error::{Error, Result};
