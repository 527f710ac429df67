//! Multimode bosonic Fock states and exact passive linear-optical evolution.
//!
//! States are sparse maps from occupation vectors to complex amplitudes.
//! Optical elements act through the creation-operator expansion, so the
//! same code handles single- and multi-photon inputs.

mod linear_map;
mod mode;
mod optics;
mod state;

pub use linear_map::LinearMap;
pub use mode::{ModeKind, ModeLabel};
pub use optics::{
    apply_beam_splitter, apply_phase_shift, bright_state, mz_reverse, mz_transform,
    support_after_trace, InterferometerConfig, ModeMap, Optics,
};
pub use state::{inner_product, orthonormalize, FockBasisState, PhotonicState};
