//! Named reference channels with known coherent-information behavior.

use super::{from_choi, ChannelError, ChoiMatrix, QuantumChannel};
use crate::numkernel::CMatrix;
use num_complex::Complex64;
use std::f64::consts::TAU;

fn check_probability(name: &'static str, p: f64) -> Result<(), ChannelError> {
    if !(0.0..=1.0).contains(&p) || !p.is_finite() {
        return Err(ChannelError::ParameterOutOfRange { name, value: p, expected: "[0, 1]" });
    }
    Ok(())
}

/// Identity channel on `C^d` (trivial environment).
pub fn identity(d: usize) -> Result<QuantumChannel, ChannelError> {
    QuantumChannel::new(d, d, 1, CMatrix::identity(d))
}

/// Erasure channel: with probability `p` the input is replaced by an erasure
/// flag `|d>`. Dilation `V|i> = sqrt(1-p)|i>|d> + sqrt(p)|d>|i>` on
/// `d_out = d_env = d + 1`; the complement is the erasure channel with
/// probability `1 - p`.
pub fn erasure(d: usize, p: f64) -> Result<QuantumChannel, ChannelError> {
    check_probability("p", p)?;
    let dd = d + 1;
    let keep = Complex64::new((1.0 - p).sqrt(), 0.0);
    let lose = Complex64::new(p.sqrt(), 0.0);
    let mut v = CMatrix::zeros(dd * dd, d);
    for i in 0..d {
        v[(i * dd + d, i)] = keep;
        v[(d * dd + i, i)] = lose;
    }
    QuantumChannel::new(d, dd, dd, v)
}

/// Qubit dephasing channel with Kraus operators
/// `K0 = sqrt(1 - p/2) I`, `K1 = sqrt(p/2) Z`.
pub fn dephasing(p: f64) -> Result<QuantumChannel, ChannelError> {
    check_probability("p", p)?;
    let k0 = (1.0 - p / 2.0).sqrt();
    let k1 = (p / 2.0).sqrt();
    let mut v = CMatrix::zeros(4, 2);
    // row = out*2 + env
    v[(0, 0)] = Complex64::new(k0, 0.0);
    v[(1, 0)] = Complex64::new(k1, 0.0);
    v[(2, 1)] = Complex64::new(k0, 0.0);
    v[(3, 1)] = Complex64::new(-k1, 0.0);
    QuantumChannel::new(2, 2, 2, v)
}

/// Depolarizing channel `rho -> (1-p) rho + p I/d` dilated through the `d^2`
/// Weyl operators `X^a Z^b`, so `d_env = d^2`.
pub fn depolarizing(d: usize, p: f64) -> Result<QuantumChannel, ChannelError> {
    check_probability("p", p)?;
    if d < 2 {
        return Err(ChannelError::BadDimensions {
            detail: format!("depolarizing needs d >= 2, got {d}"),
        });
    }
    let de = d * d;
    let w0 = (1.0 - p + p / de as f64).sqrt();
    let wk = (p / de as f64).sqrt();
    let mut v = CMatrix::zeros(d * de, d);
    for a in 0..d {
        for b in 0..d {
            let k = a * d + b;
            let weight = if k == 0 { w0 } else { wk };
            // (X^a Z^b)[r, c] = delta(r, (c+a) mod d) * omega^(b c)
            for col in 0..d {
                let row = (col + a) % d;
                let phase = TAU * (b * col) as f64 / d as f64;
                let entry = Complex64::from_polar(weight, phase);
                v[(row * de + k, col)] = entry;
            }
        }
    }
    QuantumChannel::new(d, d, de, v)
}

/// Werner-Holevo channel `rho -> (Tr(rho) I - rho^T) / (d - 1)`, built from
/// its Choi matrix `(I - SWAP) / (d - 1)`. Every pure input maps to an output
/// of rank `d - 1`, strictly below `min(d*_out, d*_env) = d` for `d >= 3`.
pub fn werner_holevo(d: usize) -> Result<QuantumChannel, ChannelError> {
    if d < 2 {
        return Err(ChannelError::BadDimensions {
            detail: format!("werner_holevo needs d >= 2, got {d}"),
        });
    }
    let dim = d * d;
    let scale = 1.0 / (d as f64 - 1.0);
    let j = CMatrix::from_fn(dim, dim, |row, col| {
        let (a, i) = (row / d, row % d);
        let (b, jj) = (col / d, col % d);
        let ident = if a == b && i == jj { 1.0 } else { 0.0 };
        let swap = if a == jj && i == b { 1.0 } else { 0.0 };
        Complex64::new(scale * (ident - swap), 0.0)
    });
    from_choi(&ChoiMatrix::new(d, d, j)?)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::numkernel::{hermitian_eig, max_abs_diff, outer, svd_rank, CMatrix};
    use crate::sampling::{self, GaussianSource, SeededStream};
    use num_complex::Complex64;

    fn random_density(d: usize, seed: u64) -> CMatrix {
        let g = sampling::ginibre(d, d, SeededStream::new(seed, 1));
        let p = &g * &g.adjoint();
        p.scale(1.0 / p.trace().re)
    }

    #[test]
    fn identity_acts_trivially() {
        let ch = identity(3).unwrap();
        let rho = random_density(3, 1);
        assert!(max_abs_diff(&ch.apply(&rho).unwrap(), &rho) < 1e-12);
        let env = ch.apply_complement(&rho).unwrap();
        assert_eq!((env.rows(), env.cols()), (1, 1));
        assert!((env[(0, 0)] - Complex64::ONE).norm() < 1e-12);
    }

    #[test]
    fn erasure_mixes_identity_and_flag() {
        let d = 2;
        let ch = erasure(d, 0.25).unwrap();
        assert_eq!((ch.d_out(), ch.d_env()), (3, 3));
        let rho = random_density(d, 2);
        let out = ch.apply(&rho).unwrap();
        // top-left block (1-p) rho, flag weight p
        for i in 0..d {
            for j in 0..d {
                assert!((out[(i, j)] - rho[(i, j)].scale(0.75)).norm() < 1e-12);
            }
        }
        assert!((out[(2, 2)].re - 0.25).abs() < 1e-12);
        assert!(out[(0, 2)].norm() < 1e-12);
    }

    #[test]
    fn erasure_complement_is_erasure_with_flipped_probability() {
        let ch = erasure(2, 0.25).unwrap();
        let flipped = erasure(2, 0.75).unwrap();
        let rho = random_density(2, 3);
        let env = ch.apply_complement(&rho).unwrap();
        let expect = flipped.apply(&rho).unwrap();
        assert!(max_abs_diff(&env, &expect) < 1e-12);
    }

    #[test]
    fn erasure_at_zero_probability_embeds_identity() {
        let ch = erasure(2, 0.0).unwrap();
        let rho = random_density(2, 4);
        let out = ch.apply(&rho).unwrap();
        for i in 0..2 {
            for j in 0..2 {
                assert!((out[(i, j)] - rho[(i, j)]).norm() < 1e-14);
            }
        }
        for k in 0..3 {
            assert!(out[(2, k)].norm() < 1e-14);
            assert!(out[(k, 2)].norm() < 1e-14);
        }
    }

    #[test]
    fn erasure_rank_symmetry_at_half() {
        let ch = erasure(2, 0.5).unwrap();
        let j = svd_rank(&ch.choi().matrix).unwrap().rank;
        let jc = svd_rank(&ch.choi_complement().matrix).unwrap().rank;
        assert_eq!(j, jc);
    }

    #[test]
    fn dephasing_damps_off_diagonals() {
        let p = 0.3;
        let ch = dephasing(p).unwrap();
        let rho = random_density(2, 5);
        let out = ch.apply(&rho).unwrap();
        assert!((out[(0, 0)] - rho[(0, 0)]).norm() < 1e-12);
        assert!((out[(1, 1)] - rho[(1, 1)]).norm() < 1e-12);
        assert!((out[(0, 1)] - rho[(0, 1)].scale(1.0 - p)).norm() < 1e-12);
    }

    #[test]
    fn depolarizing_action_matches_closed_form() {
        for d in [2usize, 3] {
            let p = 0.4;
            let ch = depolarizing(d, p).unwrap();
            assert_eq!(ch.d_env(), d * d);
            let rho = random_density(d, 6 + d as u64);
            let out = ch.apply(&rho).unwrap();
            let expect = &rho.scale(1.0 - p) + &CMatrix::identity(d).scale(p / d as f64);
            assert!(max_abs_diff(&out, &expect) < 1e-12, "d={d}");
        }
    }

    #[test]
    fn completely_depolarizing_choi_is_maximally_mixed() {
        let ch = depolarizing(2, 1.0).unwrap();
        let choi = ch.choi();
        assert!(max_abs_diff(&choi.matrix, &CMatrix::identity(4).scale(0.5)) < 1e-12);
        let dims = ch.minimal_dims().unwrap();
        assert_eq!(dims.d_star_env, 4);
        assert_eq!(dims.d_star_out, 2);
    }

    #[test]
    fn werner_holevo_action_and_choi_rank() {
        let d = 3;
        let ch = werner_holevo(d).unwrap();
        let rho = random_density(d, 7);
        let out = ch.apply(&rho).unwrap();
        let expect = &CMatrix::identity(d).scale(1.0 / (d as f64 - 1.0))
            - &rho.transpose().scale(1.0 / (d as f64 - 1.0));
        assert!(max_abs_diff(&out, &expect) < 1e-10);
        // rank J = d(d-1)/2 antisymmetric dimensions
        assert_eq!(svd_rank(&ch.choi().matrix).unwrap().rank, 3);
        let dims = ch.minimal_dims().unwrap();
        assert_eq!((dims.d_star_out, dims.d_star_env), (3, 3));
    }

    #[test]
    fn werner_holevo_pure_outputs_never_reach_full_rank() {
        let ch = werner_holevo(3).unwrap();
        let mut src = GaussianSource::new(SeededStream::new(8, 0));
        let mut max_rank = 0;
        for _ in 0..10_000 {
            let psi = sampling::random_pure_state(3, &mut src);
            let out = ch.apply(&outer(&psi, &psi)).unwrap();
            max_rank = max_rank.max(svd_rank(&out).unwrap().rank);
        }
        assert_eq!(max_rank, 2);
    }

    #[test]
    fn zoo_validates_parameters() {
        assert!(matches!(erasure(2, -0.1), Err(ChannelError::ParameterOutOfRange { .. })));
        assert!(matches!(erasure(2, 1.5), Err(ChannelError::ParameterOutOfRange { .. })));
        assert!(matches!(dephasing(f64::NAN), Err(ChannelError::ParameterOutOfRange { .. })));
        assert!(matches!(depolarizing(1, 0.5), Err(ChannelError::BadDimensions { .. })));
        assert!(matches!(werner_holevo(1), Err(ChannelError::BadDimensions { .. })));
        assert!(matches!(identity(1), Err(ChannelError::BadDimensions { .. })));
    }

    #[test]
    fn zoo_channels_have_unit_entropy_budget() {
        // spot check: all zoo outputs are valid densities on random input
        let rho2 = random_density(2, 9);
        for ch in [identity(2).unwrap(), erasure(2, 0.3).unwrap(), dephasing(0.7).unwrap(), depolarizing(2, 0.6).unwrap(), werner_holevo(2).unwrap()] {
            let out = ch.apply(&rho2).unwrap();
            assert!((out.trace().re - 1.0).abs() < 1e-10);
            let eig = hermitian_eig(&out).unwrap();
            assert!(eig.eigenvalues.last().unwrap() > &-1e-10);
        }
    }
}
