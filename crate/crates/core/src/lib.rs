//! Periodic molecular crystals: lattice geometry, CIF ingestion, symmetry
//! expansion, shell-based cropping, structure losses, a toy diffusion
//! sampler, packing metrics and the boundary-scaling experiments.

pub mod align;
pub mod block;
pub mod canonical;
pub mod crop;
pub mod crystal;
pub mod diffusion;
pub mod elements;
pub mod error;
pub mod fixtures;
pub mod ingest;
pub mod lattice;
pub mod losses;
pub mod metrics;
pub mod niggli;
pub mod rng;
pub mod scaling;
pub mod supercell;
pub mod symop;

pub use error::{Error, Result};
