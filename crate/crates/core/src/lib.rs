//! Ability-based keyboard personalization.
//!
//! The pipeline measures a user's pointing ability direction by direction
//! ([`charact`], [`fitts`]), turns it into a predicted movement-time cost
//! between every pair of key positions, and places the 27 symbols by solving
//! a quadratic assignment problem over digraph frequencies ([`corpus`],
//! [`qap`], [`layout`]). [`eval`] scores layouts with simulated users.

// `!(x > 0.0)` is how validation here rejects NaN along with the rest
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod charact;
pub mod corpus;
pub mod error;
pub mod eval;
pub mod fitts;
pub mod hexgeom;
pub mod layout;
pub mod qap;

pub use charact::{CharacterizationSession, Phase, SelectionEvent, TargetDemand};
pub use corpus::{DigraphMatrix, Symbol};
pub use error::{Error, Result};
pub use eval::{EvalReport, SimulatedUser, TranscriptionTrial};
pub use fitts::{DirectionalFittsModel, FittsBinModel, MovementSample};
pub use hexgeom::{build_grid, HexGrid, KeyPosition};
pub use layout::{KeyboardLayout, LayoutKind};
pub use qap::{Assignment, FaqParams, QapInstance};

/// The 9 × 9 honeycomb at 130 px pitch used throughout.
pub fn default_grid() -> HexGrid {
    build_grid(9, 9, 130.0).expect("valid dimensions")
}
