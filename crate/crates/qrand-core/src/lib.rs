//! Quantum randomness toolkit: finite-dimensional quantum mechanics, Bell
//! scenarios and nonlocal behaviors, device-independent randomness
//! certification, weak-source models and extractors, a laser phase-diffusion
//! QRNG simulator with an explicit min-entropy budget, and seed-accounted
//! expansion/amplification protocols on top of all of it.
//!
//! Everything that consumes randomness does so through counter-based
//! generators keyed by `(seed, stream, index)`, so results are bitwise
//! reproducible regardless of thread count.

pub mod behaviors;
pub mod bits;
pub mod certify;
pub mod extractors;
pub mod protocols;
pub mod qrng;
pub mod quantum;
pub mod report;
pub mod rng;
pub mod sources;
