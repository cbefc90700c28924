//! Multiclass encryption by compressed sensing.
//!
//! A plaintext `x` is encoded as `y = A x` with a keyed Bernoulli (±1)
//! encoding matrix. Lower user classes only know a sign-flipped version of
//! the true matrix and therefore recover `x` with a controlled amount of
//! perturbation noise. This crate holds the algorithmic core:
//!
//! * [`keystream`]: SplitMix64 seed expansion, bit streams and key hierarchy.
//! * [`sensing`]: class-`u` encoding matrices, flip sets, perturbations, encoding.
//! * [`signals`]: orthonormal sparsity bases, sparse signal models and moments.
//! * [`numerics`]: dense linear algebra (SVD, Lanczos, pseudoinverse).
//! * [`recovery`]: basis pursuit denoising, CoSaMP and RSNR scoring.
//! * [`bounds`]: second-class recovery-error bounds and their Monte Carlo checks.
//! * [`secrecy`]: Kolmogorov–Smirnov distinguishing attacks and convergence estimates.
//!
//! The crate is `no_std` (it needs `alloc`). Enabling the `parallel` feature
//! runs Monte Carlo trials on the rayon pool; results do not depend on the
//! number of threads.

#![cfg_attr(not(feature = "parallel"), no_std)]
// Index loops read better than iterator chains in the dense kernels.
#![allow(clippy::needless_range_loop)]
#![allow(clippy::too_many_arguments)]

extern crate alloc;

pub mod bounds;
mod error;
pub mod keystream;
pub mod math;
pub mod numerics;
mod par;
pub mod recovery;
pub mod secrecy;
pub mod sensing;
pub mod signals;

pub use error::{Error, Result};
pub use keystream::{BitStream, KeyChain, Seed};
pub use numerics::DenseMatrix;
pub use sensing::{EncodingMatrix, FlipSet, MeasurementFrame, PerturbationMatrix};
pub use signals::OrthonormalBasis;
