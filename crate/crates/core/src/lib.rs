//! Stationary light pulses in EIT media: a one-dimensional Maxwell-Bloch
//! solver and the reduced analytic models built on it.
//!
//! Everything is generic over the scalar type ([`Real`], implemented for f32
//! and f64). The aliases at the bottom fix f64 for everyday use.

pub mod comb;
pub mod error;
pub mod fokker_planck;
pub mod linalg;
pub mod mbe;
pub mod model;
pub mod normal_modes;
pub mod numerics;
pub mod profile;
pub mod scalar;
pub mod susceptibility;

pub use error::{Error, Result};
pub use mbe::{MbeSolver, Model, MomentWindow, Observables, RunPlan, SystemState};
pub use model::{Grid, MixingAngles, PhysicalParams};
pub use profile::ControlProfile;
pub use scalar::{Complex, Real};

pub type Params = model::PhysicalParams<f64>;
pub type Grid64 = model::Grid<f64>;
pub type Profile = profile::ControlProfile<f64>;
pub type State = mbe::SystemState<f64>;
pub type Solver = mbe::MbeSolver<f64>;
pub type C64 = num_complex::Complex<f64>;
