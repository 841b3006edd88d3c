//! Harten-type multiresolution on dyadic trees: projection, prediction,
//! details, reconstruction and mesh adaptation.

mod adapt;
mod field;
mod prediction;
mod reconstruct;
mod transform;

pub use adapt::{adapt_mesh, enlarge, threshold, Adaptation, ThresholdPolicy};
pub use field::{DetailField, LeafField};
pub use prediction::{project, PredictionSpec};
pub use reconstruct::{reconstruct, reconstruct_finest, Reconstructor};
pub use transform::{compute_details, decode, encode};
