//! Photon-magnon hybrid negative-index toolkit.
//!
//! The numerical kernels in [`coupled_modes`], [`circuit_model`] and
//! [`nrw_extraction`] are generic over [`Real`] (`f32` or `f64`). Grid
//! analysis, fitting and file I/O work in `f64`.

pub mod analysis;
pub mod cli_io;
pub mod circuit_model;
pub mod coupled_modes;
pub mod error;
pub mod fitting;
pub mod nrw_extraction;
pub mod optim;
pub mod poly;
pub mod scalar;
pub mod units;

pub use error::{Error, Result};
pub use scalar::Real;

pub type C64 = num_complex::Complex<f64>;
pub type C32 = num_complex::Complex<f32>;

pub type BareMode64 = coupled_modes::BareMode<f64>;
pub type Coupling64 = coupled_modes::Coupling<f64>;
pub type KittelParams64 = coupled_modes::KittelParams<f64>;
pub type HybridPair64 = coupled_modes::HybridPair<f64>;
pub type CircuitParams64 = circuit_model::CircuitParams<f64>;
pub type CircuitParams32 = circuit_model::CircuitParams<f32>;
pub type MaterialPoint64 = circuit_model::MaterialPoint<f64>;
pub type TwoPortSpectrum64 = nrw_extraction::TwoPortSpectrum<f64>;
pub type MaterialSpectrum64 = nrw_extraction::MaterialSpectrum<f64>;
