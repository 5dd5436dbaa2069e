//! Quantum channels in Stinespring form, their complements, Choi matrices
//! and minimal dilation dimensions.
//!
//! A channel is stored as an isometry `V: C^{d_in} -> C^{d_out} (x) C^{d_env}`
//! with row convention `row = out_index * d_env + env_index`. The channel is
//! `rho -> Tr_env(V rho V*)` and its complement traces out the output factor
//! instead.

pub mod io;
pub mod zoo;

use crate::numkernel::{
    hermitian_eig, partial_trace, svd_rank, CMatrix, NumError, RankReport, Subsystem,
};
use num_complex::Complex64;
use serde::Serialize;
use thiserror::Error;

/// `||V*V - I||_F` must stay below this for a valid Stinespring isometry.
pub const ISOMETRY_TOL: f64 = 1e-10;

#[derive(Debug, Error)]
pub enum ChannelError {
    #[error("bad channel dimensions: {detail}")]
    BadDimensions { detail: String },
    #[error("input state must be {expected}x{expected}, got {rows}x{cols}")]
    InputDimension { expected: usize, rows: usize, cols: usize },
    #[error("isometry constraint violated: ||V*V - I||_F = {residual:.3e} exceeds {ISOMETRY_TOL:.0e}")]
    NotIsometry { residual: f64 },
    #[error("invalid Choi matrix: {invariant} violated, residual {residual:.3e}")]
    InvalidChoi { invariant: String, residual: f64 },
    #[error("minimal dimension cross-check failed: rank J(Phi) = {via_choi} but rank Phi_c(I) = {via_complement}")]
    RankInconsistency { via_choi: usize, via_complement: usize },
    #[error("parameter out of range: {name} = {value}, expected {expected}")]
    ParameterOutOfRange { name: &'static str, value: f64, expected: &'static str },
    #[error("invalid channel data: {detail}")]
    Parse { detail: String },
    #[error(transparent)]
    Num(#[from] NumError),
}

/// Completely positive trace-preserving map in Stinespring form.
#[derive(Clone, Debug, PartialEq)]
pub struct QuantumChannel {
    d_in: usize,
    d_out: usize,
    d_env: usize,
    isometry: CMatrix,
}

impl QuantumChannel {
    /// Validates dimensions and the isometry constraint `V*V = I`.
    pub fn new(d_in: usize, d_out: usize, d_env: usize, isometry: CMatrix) -> Result<Self, ChannelError> {
        if d_in < 2 {
            return Err(ChannelError::BadDimensions {
                detail: format!("d_in must be at least 2, got {d_in}"),
            });
        }
        if d_out == 0 || d_env == 0 || d_in > d_out * d_env {
            return Err(ChannelError::BadDimensions {
                detail: format!("need 1 <= d_in <= d_out*d_env, got d_in={d_in} d_out={d_out} d_env={d_env}"),
            });
        }
        if isometry.rows() != d_out * d_env || isometry.cols() != d_in {
            return Err(ChannelError::BadDimensions {
                detail: format!(
                    "isometry is {}x{}, expected {}x{}",
                    isometry.rows(),
                    isometry.cols(),
                    d_out * d_env,
                    d_in
                ),
            });
        }
        let gram = &isometry.adjoint() * &isometry;
        let residual = (&gram - &CMatrix::identity(d_in)).norm_fro();
        if residual > ISOMETRY_TOL {
            return Err(ChannelError::NotIsometry { residual });
        }
        Ok(Self { d_in, d_out, d_env, isometry })
    }

    pub fn d_in(&self) -> usize {
        self.d_in
    }

    pub fn d_out(&self) -> usize {
        self.d_out
    }

    pub fn d_env(&self) -> usize {
        self.d_env
    }

    pub fn isometry(&self) -> &CMatrix {
        &self.isometry
    }

    fn check_input(&self, rho: &CMatrix) -> Result<(), ChannelError> {
        if rho.rows() != self.d_in || rho.cols() != self.d_in {
            return Err(ChannelError::InputDimension {
                expected: self.d_in,
                rows: rho.rows(),
                cols: rho.cols(),
            });
        }
        Ok(())
    }

    /// `Phi(rho) = Tr_env(V rho V*)`.
    pub fn apply(&self, rho: &CMatrix) -> Result<CMatrix, ChannelError> {
        self.check_input(rho)?;
        let w = &(&self.isometry * rho) * &self.isometry.adjoint();
        Ok(partial_trace(&w, Subsystem::First, self.d_out, self.d_env)?)
    }

    /// Complement `Phi_c(rho) = Tr_out(V rho V*)`.
    pub fn apply_complement(&self, rho: &CMatrix) -> Result<CMatrix, ChannelError> {
        self.check_input(rho)?;
        let w = &(&self.isometry * rho) * &self.isometry.adjoint();
        Ok(partial_trace(&w, Subsystem::Second, self.d_out, self.d_env)?)
    }

    /// The complementary channel as a first-class channel: same isometry with
    /// the output and environment factors swapped.
    pub fn complement(&self) -> QuantumChannel {
        let v = CMatrix::from_fn(self.d_env * self.d_out, self.d_in, |row, i| {
            let e = row / self.d_out;
            let a = row % self.d_out;
            self.isometry[(a * self.d_env + e, i)]
        });
        QuantumChannel::new(self.d_in, self.d_env, self.d_out, v)
            .expect("row permutation preserves the isometry constraint")
    }

    /// Kraus operators `K_e[a, i] = V[a*d_env + e, i]`, one per environment
    /// basis index.
    pub fn kraus(&self) -> Vec<CMatrix> {
        (0..self.d_env)
            .map(|e| {
                CMatrix::from_fn(self.d_out, self.d_in, |a, i| {
                    self.isometry[(a * self.d_env + e, i)]
                })
            })
            .collect()
    }

    /// Choi matrix `J(Phi) = (Phi (x) id)|Omega><Omega|` with the unnormalized
    /// maximally entangled vector, so `Tr J = d_in`.
    pub fn choi(&self) -> ChoiMatrix {
        let d = self.d_in;
        let de = self.d_env;
        let j = CMatrix::from_fn(self.d_out * d, self.d_out * d, |row, col| {
            let (a, i) = (row / d, row % d);
            let (b, jj) = (col / d, col % d);
            (0..de)
                .map(|e| self.isometry[(a * de + e, i)] * self.isometry[(b * de + e, jj)].conj())
                .sum()
        });
        ChoiMatrix::new(d, self.d_out, j).expect("Choi of a valid channel satisfies the invariants")
    }

    /// Choi matrix of the complement.
    pub fn choi_complement(&self) -> ChoiMatrix {
        let d = self.d_in;
        let de = self.d_env;
        let j = CMatrix::from_fn(de * d, de * d, |row, col| {
            let (e, i) = (row / d, row % d);
            let (f, jj) = (col / d, col % d);
            (0..self.d_out)
                .map(|a| self.isometry[(a * de + e, i)] * self.isometry[(a * de + f, jj)].conj())
                .sum()
        });
        ChoiMatrix::new(d, de, j).expect("Choi of a valid complement satisfies the invariants")
    }

    /// Minimal output and environment dimensions of the dilation:
    /// `d*_out = rank Phi(I)` and `d*_env = rank J(Phi)`, the latter
    /// cross-checked against `rank Phi_c(I)`.
    pub fn minimal_dims(&self) -> Result<MinimalDims, ChannelError> {
        let identity = CMatrix::identity(self.d_in);
        let rank_phi_id = svd_rank(&self.apply(&identity)?)?;
        let rank_j = svd_rank(&self.choi().matrix)?;
        let via_complement = svd_rank(&self.apply_complement(&identity)?)?;
        if rank_j.rank != via_complement.rank {
            return Err(ChannelError::RankInconsistency {
                via_choi: rank_j.rank,
                via_complement: via_complement.rank,
            });
        }
        Ok(MinimalDims {
            d_star_out: rank_phi_id.rank,
            d_star_env: rank_j.rank,
            rank_phi_id,
            rank_j,
        })
    }
}

/// Minimal dilation dimensions with the rank evidence behind them.
#[derive(Clone, Debug, Serialize)]
pub struct MinimalDims {
    pub d_star_out: usize,
    pub d_star_env: usize,
    /// Rank report of `Phi(I)`; its rank is `d_star_out`.
    pub rank_phi_id: RankReport,
    /// Rank report of `J(Phi)`; its rank is `d_star_env`.
    pub rank_j: RankReport,
}

/// Choi matrix with its dimension bookkeeping. Index convention:
/// `row = out_index * d_in + in_index`.
#[derive(Clone, Debug, PartialEq)]
pub struct ChoiMatrix {
    pub d_in: usize,
    pub d_out: usize,
    pub matrix: CMatrix,
}

impl ChoiMatrix {
    /// Validates hermiticity, positive semidefiniteness (eigenvalues above
    /// `-1e-9`) and trace preservation (`Tr_out J = I` within `1e-9`).
    pub fn new(d_in: usize, d_out: usize, matrix: CMatrix) -> Result<Self, ChannelError> {
        let dim = d_in * d_out;
        if d_in == 0 || d_out == 0 || matrix.rows() != dim || matrix.cols() != dim {
            return Err(ChannelError::BadDimensions {
                detail: format!(
                    "Choi matrix is {}x{}, expected {}x{} for d_in={} d_out={}",
                    matrix.rows(),
                    matrix.cols(),
                    dim,
                    dim,
                    d_in,
                    d_out
                ),
            });
        }
        let herm_residual = matrix.hermitian_residual();
        if herm_residual > 1e-10 * matrix.norm_fro().max(1.0) {
            return Err(ChannelError::InvalidChoi {
                invariant: "hermiticity".into(),
                residual: herm_residual,
            });
        }
        let eig = hermitian_eig(&matrix)?;
        let min_eig = eig.eigenvalues.last().copied().unwrap_or(0.0);
        if min_eig < -1e-9 {
            return Err(ChannelError::InvalidChoi {
                invariant: "positive semidefiniteness".into(),
                residual: -min_eig,
            });
        }
        let reduced = partial_trace(&matrix, Subsystem::Second, d_out, d_in)?;
        let tp_residual = (&reduced - &CMatrix::identity(d_in)).norm_fro();
        if tp_residual > 1e-9 {
            return Err(ChannelError::InvalidChoi {
                invariant: "trace preservation (Tr_out J = I)".into(),
                residual: tp_residual,
            });
        }
        Ok(Self { d_in, d_out, matrix })
    }
}

/// Reconstructs a Stinespring dilation from a Choi matrix. The environment
/// dimension of the result is the numerical rank of `J`, with Kraus operators
/// `K_k = sqrt(lambda_k) unvec(u_k)` from the eigendecomposition.
pub fn from_choi(choi: &ChoiMatrix) -> Result<QuantumChannel, ChannelError> {
    let d = choi.d_in;
    let d_out = choi.d_out;
    let eig = hermitian_eig(&choi.matrix)?;
    let max_abs = eig.eigenvalues.iter().fold(0.0f64, |m, &l| m.max(l.abs()));
    let threshold = choi.matrix.rows() as f64 * f64::EPSILON * max_abs;
    let kept: Vec<usize> = (0..eig.eigenvalues.len())
        .filter(|&k| eig.eigenvalues[k] > threshold)
        .collect();
    if kept.is_empty() {
        return Err(ChannelError::InvalidChoi {
            invariant: "nonzero rank".into(),
            residual: max_abs,
        });
    }
    let d_env = kept.len();
    let v = CMatrix::from_fn(d_out * d_env, d, |row, i| {
        let a = row / d_env;
        let e = row % d_env;
        let k = kept[e];
        Complex64::new(eig.eigenvalues[k].sqrt(), 0.0) * eig.eigenvectors[(a * d + i, k)]
    });
    QuantumChannel::new(d, d_out, d_env, v).map_err(|err| match err {
        ChannelError::NotIsometry { residual } => ChannelError::InvalidChoi {
            invariant: "trace preservation (reconstructed isometry)".into(),
            residual,
        },
        other => other,
    })
}
