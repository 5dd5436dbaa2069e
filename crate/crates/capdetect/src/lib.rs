//! Random quantum channel sampling and single-copy capacity detection.
//!
//! The crate samples channels in Stinespring form from the Ginibre/Haar
//! push-forward measure, computes coherent information of a channel and of
//! its complement, and applies a perturbative trace-gap criterion to certify
//! positive coherent information from the relative size of the minimal output
//! and environment dimensions. A Monte Carlo harness reproduces the
//! almost-sure positivity statistics at desk scale, and the `capdetect`
//! binary exposes the whole pipeline on the command line.

pub mod channels;
pub mod detection;
pub mod harness;
pub mod numkernel;
pub mod sampling;
