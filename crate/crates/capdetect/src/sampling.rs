//! Reproducible random sampling: seeded ChaCha streams, complex Ginibre
//! matrices, Gram-Schmidt orthonormalization, Haar-distributed isometries and
//! Stinespring-form random channels.
//!
//! Reproducibility contract: every draw is a pure function of a
//! [`SeededStream`]. The Gaussian source consumes `u64` words from ChaCha8 in
//! a fixed documented order, so results are bitwise identical across runs,
//! platforms and thread schedules.

use crate::channels::{ChannelError, QuantumChannel};
use crate::numkernel::{svd_rank, CMatrix, NumError};
use num_complex::Complex64;
use rand_chacha::rand_core::{RngCore, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use std::f64::consts::{FRAC_1_SQRT_2, PI};
use thiserror::Error;

#[derive(Debug, Error)]
pub enum SamplingError {
    #[error("input has column rank {rank} < {cols}, cannot orthonormalize")]
    RankDeficientInput { rank: usize, cols: usize },
    #[error("dimension violation: {detail}")]
    DimensionViolation { detail: String },
    #[error(transparent)]
    Num(#[from] NumError),
    #[error(transparent)]
    Channel(#[from] ChannelError),
}

/// Addressable position in the global family of random streams: a base seed
/// shared by a whole campaign plus a per-task stream id.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct SeededStream {
    pub seed: u64,
    pub stream_id: u64,
}

impl SeededStream {
    pub fn new(seed: u64, stream_id: u64) -> Self {
        Self { seed, stream_id }
    }

    /// Fresh generator positioned at the start of this stream.
    pub fn rng(&self) -> ChaCha8Rng {
        let mut rng = ChaCha8Rng::seed_from_u64(self.seed);
        rng.set_stream(self.stream_id);
        rng
    }

    /// Derived stream for a distinct purpose (search, maximization, ...) so
    /// that consumers never share draws with the parent stream. The tag is
    /// folded into the top byte of the stream id, which campaign-level ids
    /// (sample indices) never reach.
    pub fn substream(&self, tag: u64) -> SeededStream {
        SeededStream { seed: self.seed, stream_id: self.stream_id ^ (tag << 56) }
    }
}

/// Standard normal sampler over a seeded stream.
///
/// Box-Muller on top of raw `u64` draws, two draws per pair, with the fixed
/// order: `u1` from `(0, 1]`, `u2` from `[0, 1)`, return the cosine branch
/// first and cache the sine branch.
pub struct GaussianSource {
    rng: ChaCha8Rng,
    spare: Option<f64>,
}

impl GaussianSource {
    pub fn new(stream: SeededStream) -> Self {
        Self { rng: stream.rng(), spare: None }
    }

    pub fn next_standard(&mut self) -> f64 {
        if let Some(z) = self.spare.take() {
            return z;
        }
        let scale = 2f64.powi(-53);
        let u1 = ((self.rng.next_u64() >> 11) as f64 + 1.0) * scale;
        let u2 = (self.rng.next_u64() >> 11) as f64 * scale;
        let r = (-2.0 * u1.ln()).sqrt();
        let theta = 2.0 * PI * u2;
        self.spare = Some(r * theta.sin());
        r * theta.cos()
    }

    /// Standard complex Gaussian with density `exp(-|z|^2)/pi`, i.e. real and
    /// imaginary parts independent `N(0, 1/2)`.
    pub fn next_complex(&mut self) -> Complex64 {
        let re = FRAC_1_SQRT_2 * self.next_standard();
        let im = FRAC_1_SQRT_2 * self.next_standard();
        Complex64::new(re, im)
    }
}

fn ginibre_from(rows: usize, cols: usize, src: &mut GaussianSource) -> CMatrix {
    let mut entries = Vec::with_capacity(rows * cols);
    for _ in 0..rows * cols {
        entries.push(src.next_complex());
    }
    CMatrix::new(rows, cols, entries).expect("gaussian draws are finite")
}

/// `rows x cols` matrix of i.i.d. standard complex Gaussians (`E|z|^2 = 1`),
/// filled row-major.
pub fn ginibre(rows: usize, cols: usize, stream: SeededStream) -> CMatrix {
    ginibre_from(rows, cols, &mut GaussianSource::new(stream))
}

/// Haar-random pure state on `C^d`: a normalized Ginibre vector.
pub fn random_pure_state(d: usize, src: &mut GaussianSource) -> CMatrix {
    loop {
        let v = ginibre_from(d, 1, src);
        let norm = v.norm_fro();
        if norm > 0.0 {
            return v.scale(1.0 / norm);
        }
    }
}

/// Orthonormalizes the columns of `m`: modified Gram-Schmidt with a second
/// re-orthogonalization pass. The first column keeps its direction exactly,
/// `Q[:,0] = m[:,0] / ||m[:,0]||`.
pub fn gram_schmidt(m: &CMatrix) -> Result<CMatrix, SamplingError> {
    let report = svd_rank(m)?;
    if report.rank < m.cols() {
        return Err(SamplingError::RankDeficientInput { rank: report.rank, cols: m.cols() });
    }
    let n = m.rows();
    let k = m.cols();
    let mut q: Vec<Vec<Complex64>> = Vec::with_capacity(k);
    for j in 0..k {
        let mut v: Vec<Complex64> = (0..n).map(|i| m[(i, j)]).collect();
        for _pass in 0..2 {
            for prev in q.iter().take(j) {
                let c: Complex64 = prev.iter().zip(&v).map(|(qi, vi)| qi.conj() * vi).sum();
                for (vi, qi) in v.iter_mut().zip(prev) {
                    *vi -= c * qi;
                }
            }
        }
        let norm = v.iter().map(|z| z.norm_sqr()).sum::<f64>().sqrt();
        if norm == 0.0 {
            return Err(SamplingError::RankDeficientInput { rank: j, cols: k });
        }
        let inv = 1.0 / norm;
        for vi in v.iter_mut() {
            *vi *= inv;
        }
        q.push(v);
    }
    Ok(CMatrix::from_fn(n, k, |i, j| q[j][i]))
}

fn haar_isometry_from(
    d: usize,
    d_out: usize,
    d_env: usize,
    src: &mut GaussianSource,
    resamples: &mut u32,
) -> Result<CMatrix, SamplingError> {
    if d == 0 || d_out == 0 || d_env == 0 || d > d_out * d_env {
        return Err(SamplingError::DimensionViolation {
            detail: format!("isometry needs 1 <= d <= d_out*d_env, got d={d} d_out={d_out} d_env={d_env}"),
        });
    }
    let rows = d_out * d_env;
    loop {
        let g = ginibre_from(rows, d, src);
        if svd_rank(&g)?.rank == d {
            return gram_schmidt(&g);
        }
        // measure-zero event at double precision, but resampling keeps the
        // sampler total; the count surfaces in diagnostics
        *resamples += 1;
    }
}

/// Haar-distributed isometry `C^d -> C^{d_out} (x) C^{d_env}` obtained by
/// orthonormalizing a Ginibre matrix. Row index convention:
/// `row = out_index * d_env + env_index`.
pub fn haar_isometry(
    d: usize,
    d_out: usize,
    d_env: usize,
    stream: SeededStream,
) -> Result<CMatrix, SamplingError> {
    let mut resamples = 0;
    haar_isometry_from(d, d_out, d_env, &mut GaussianSource::new(stream), &mut resamples)
}

/// Diagnostics from one channel draw.
#[derive(Clone, Copy, Debug, Default, Serialize, Deserialize)]
pub struct SampleDiagnostics {
    /// Rank-deficient Ginibre draws discarded before orthonormalization.
    pub ginibre_resamples: u32,
}

/// Random channel from the Stinespring measure with environment dimension
/// `d_env`: push-forward of the Haar isometry distribution.
pub fn sample_channel(
    d: usize,
    d_out: usize,
    d_env: usize,
    stream: SeededStream,
) -> Result<QuantumChannel, SamplingError> {
    sample_channel_with_diagnostics(d, d_out, d_env, stream).map(|(ch, _)| ch)
}

/// As [`sample_channel`], also reporting resample diagnostics.
pub fn sample_channel_with_diagnostics(
    d: usize,
    d_out: usize,
    d_env: usize,
    stream: SeededStream,
) -> Result<(QuantumChannel, SampleDiagnostics), SamplingError> {
    if d < 2 {
        return Err(SamplingError::DimensionViolation {
            detail: format!("channel input dimension must be at least 2, got {d}"),
        });
    }
    let mut diag = SampleDiagnostics::default();
    let mut src = GaussianSource::new(stream);
    let v = haar_isometry_from(d, d_out, d_env, &mut src, &mut diag.ginibre_resamples)?;
    let ch = QuantumChannel::new(d, d_out, d_env, v)?;
    Ok((ch, diag))
}
