//! Finite-alphabet spatial equalization for massive MU-MIMO uplink.
//!
//! The crate covers the whole chain from equalizer design to hardware cost:
//!
//! - [`sysmodel`]: complex-baseband channel model, constellations, L-MMSE
//!   equalization and MSE evaluation.
//! - [`alphabet`]: mid-rise finite alphabets, bipolar bit-plane encoding and
//!   two's-complement input quantization.
//! - [`fame`]: finite-alphabet equalizer design (quantized L-MMSE and
//!   forward-backward splitting) with an exhaustive search oracle.
//! - [`bitsim`]: bit-exact emulation of the bit-serial processing-in-memory
//!   array and of the MAC-array datapaths, with cycle counting.
//! - [`hwcost`]: instance replication, MAC replication scaling and
//!   design-space exploration from per-instance calibration data.
//! - [`ber`]: Monte-Carlo uncoded BER sweeps through floating-point or
//!   bit-exact datapaths.
//! - [`selftest`]: the acceptance checks, shared by the test suite and the
//!   `faeq selftest` command.
//!
//! Numerical routines are generic over [`Real`] (`f32` or `f64`); the
//! aliases at the crate root fix the scalar to `f64`.

pub mod alphabet;
pub mod ber;
pub mod bitsim;
mod error;
pub mod fame;
pub mod hwcost;
pub mod io;
pub mod linalg;
mod rng;
mod scalar;
pub mod selftest;
pub mod sysmodel;

pub use error::{Error, Result};
pub use linalg::{CMatrix, CVector};
pub use rng::seeded_rng;
pub use scalar::Real;

pub use num_complex::Complex;

/// Double-precision complex scalar.
pub type C64 = Complex<f64>;
/// Double-precision complex matrix.
pub type ComplexMatrix = CMatrix<f64>;
/// Double-precision complex vector.
pub type ComplexVector = CVector<f64>;
/// Double-precision finite-alphabet equalizer.
pub type FiniteAlphabetEqualizer = fame::FiniteAlphabetEqualizer<f64>;
/// Single-precision complex matrix.
pub type ComplexMatrix32 = CMatrix<f32>;
/// Single-precision finite-alphabet equalizer.
pub type FiniteAlphabetEqualizer32 = fame::FiniteAlphabetEqualizer<f32>;
