//! Gradient ascent on coherent information over the density manifold.
//!
//! States are parameterized as `rho = A A* / Tr(A A*)` so every iterate is a
//! valid density matrix. The result is an explicit lower bound on the maximal
//! coherent information, never an upper claim.

use super::{
    coherent_information, detect, DetectConfig, DetectionError, TAG_RESTART_BASE,
    TAG_WITNESS_DETECT,
};
use crate::channels::QuantumChannel;
use crate::numkernel::{hermitian_eig, outer, CMatrix};
use crate::sampling::{GaussianSource, SeededStream};
use num_complex::Complex64;

/// Result of [`maximize_ic`].
#[derive(Clone, Debug, serde::Serialize)]
pub struct MaximizeOutcome {
    /// Best state found.
    pub rho: CMatrix,
    /// Coherent information at `rho`: a certified lower bound on the maximum.
    pub ic_lower_bound: f64,
    /// Best value after each restart, non-decreasing.
    pub restart_values: Vec<f64>,
}

fn state_of(a: &CMatrix) -> Option<CMatrix> {
    let p = a * &a.adjoint();
    let tr = p.trace().re;
    if !(tr.is_finite() && tr > 1e-300) {
        return None;
    }
    Some(p.scale(1.0 / tr))
}

fn objective(ch: &QuantumChannel, a: &CMatrix) -> Result<f64, DetectionError> {
    match state_of(a) {
        Some(rho) => coherent_information(ch, &rho),
        None => Ok(f64::NEG_INFINITY),
    }
}

/// Central-difference gradient over the `2 d^2` real parameters of `A`.
fn gradient(ch: &QuantumChannel, a: &CMatrix) -> Result<CMatrix, DetectionError> {
    let d = a.rows();
    let h = 1e-6 * a.norm_fro().max(1.0);
    let mut grad = CMatrix::zeros(d, d);
    for i in 0..d {
        for j in 0..d {
            for (axis, unit) in [Complex64::new(1.0, 0.0), Complex64::new(0.0, 1.0)]
                .into_iter()
                .enumerate()
            {
                let mut plus = a.clone();
                plus[(i, j)] += unit * h;
                let mut minus = a.clone();
                minus[(i, j)] -= unit * h;
                let df = (objective(ch, &plus)? - objective(ch, &minus)?) / (2.0 * h);
                if axis == 0 {
                    grad[(i, j)] += Complex64::new(df, 0.0);
                } else {
                    grad[(i, j)] += Complex64::new(0.0, df);
                }
            }
        }
    }
    Ok(grad)
}

fn ascend(
    ch: &QuantumChannel,
    mut a: CMatrix,
    iters: usize,
) -> Result<(CMatrix, f64), DetectionError> {
    let mut value = objective(ch, &a)?;
    let mut step: f64 = 1.0;
    let mut stalls = 0;
    for _ in 0..iters {
        let g = gradient(ch, &a)?;
        let g_norm_sq = g.norm_fro().powi(2);
        if g_norm_sq < 1e-18 {
            break;
        }
        // backtracking line search with Armijo condition
        let mut t = (step * 2.0).min(100.0);
        let mut accepted = false;
        for _ in 0..50 {
            let candidate = &a + &g.scale(t);
            let v = objective(ch, &candidate)?;
            if v >= value + 1e-4 * t * g_norm_sq {
                let gain = v - value;
                a = candidate;
                value = v;
                step = t;
                accepted = true;
                if gain < 1e-13 * value.abs().max(1.0) {
                    stalls += 1;
                } else {
                    stalls = 0;
                }
                break;
            }
            t *= 0.5;
        }
        if !accepted || stalls >= 4 {
            break;
        }
    }
    Ok((a, value))
}

/// Square root factor of a density matrix: `A = U diag(sqrt(lambda))` so that
/// `A A* = rho` up to eigenvalue clipping at zero.
fn psd_sqrt(rho: &CMatrix) -> Result<CMatrix, DetectionError> {
    let eig = hermitian_eig(rho)?;
    let d = rho.rows();
    Ok(CMatrix::from_fn(d, d, |i, k| {
        let l = eig.eigenvalues[k].max(0.0);
        eig.eigenvectors[(i, k)] * l.sqrt()
    }))
}

/// Maximizes coherent information by gradient ascent with random restarts.
/// One extra restart is seeded from the detection witness at `eps = 1e-3`
/// when a witness is available. Deterministic in `stream`; `restart_values`
/// tracks the best value seen after each restart.
pub fn maximize_ic(
    ch: &QuantumChannel,
    restarts: usize,
    iters: usize,
    stream: SeededStream,
) -> Result<MaximizeOutcome, DetectionError> {
    let d = ch.d_in();
    let mut starts: Vec<CMatrix> = Vec::new();

    if let Ok(report) = detect(ch, &DetectConfig::new(stream.substream(TAG_WITNESS_DETECT))) {
        if let Some(psi) = report.witness_psi {
            let eps = 1e-3;
            let rho = &outer(&psi, &psi).scale(1.0 - eps)
                + &CMatrix::identity(d).scale(eps / d as f64);
            starts.push(psd_sqrt(&rho)?);
        }
    }
    for r in 0..restarts.max(1) {
        let mut src = GaussianSource::new(stream.substream(TAG_RESTART_BASE + r as u64));
        let mut a = CMatrix::zeros(d, d);
        for i in 0..d {
            for j in 0..d {
                a[(i, j)] = src.next_complex();
            }
        }
        starts.push(a.scale(1.0 / (d as f64).sqrt()));
    }

    let mut best: Option<(CMatrix, f64)> = None;
    let mut restart_values = Vec::with_capacity(starts.len());
    for a0 in starts {
        let (a, value) = ascend(ch, a0, iters)?;
        let better = best.as_ref().is_none_or(|(_, b)| value > *b);
        if better {
            let rho = state_of(&a).expect("accepted iterate is a valid state");
            best = Some((rho, value));
        }
        restart_values.push(best.as_ref().unwrap().1);
    }
    let (rho, ic_lower_bound) = best.expect("at least one restart");
    Ok(MaximizeOutcome { rho, ic_lower_bound, restart_values })
}
