//! Coherent information along the perturbation path
//! `rho(eps) = (1-eps) psi psi* + eps sigma`, with a slope fit that checks
//! the trace-gap prediction `I'(eps) ~ g * log2(1/eps)`.

use super::{coherent_information, trace_gap, validate_density, validate_pure, DetectionError};
use crate::channels::QuantumChannel;
use crate::numkernel::{outer, CMatrix};
use serde::Serialize;

/// Logarithmic epsilon grid, inclusive on both ends.
#[derive(Clone, Copy, Debug, Serialize)]
pub struct EpsGrid {
    pub eps_min: f64,
    pub eps_max: f64,
    pub points: usize,
}

impl Default for EpsGrid {
    fn default() -> Self {
        Self { eps_min: 1e-6, eps_max: 1e-1, points: 48 }
    }
}

impl EpsGrid {
    fn validate(&self) -> Result<(), DetectionError> {
        if !(self.eps_min.is_finite() && self.eps_max.is_finite())
            || self.eps_min <= 0.0
            || self.eps_max > 1.0
            || self.eps_min >= self.eps_max
            || self.points < 3
        {
            return Err(DetectionError::BadGrid {
                detail: format!(
                    "need 0 < eps_min < eps_max <= 1 and points >= 3, got [{}, {}] with {} points",
                    self.eps_min, self.eps_max, self.points
                ),
            });
        }
        Ok(())
    }

    /// The grid values, log-spaced and ascending.
    pub fn values(&self) -> Vec<f64> {
        let n = self.points;
        let log_min = self.eps_min.ln();
        let log_max = self.eps_max.ln();
        (0..n)
            .map(|k| (log_min + (log_max - log_min) * k as f64 / (n - 1) as f64).exp())
            .collect()
    }
}

/// Sampled curve `eps -> I_c(rho(eps))` plus the slope fit against the
/// trace-gap prediction.
#[derive(Clone, Debug, Serialize)]
pub struct PerturbationCurve {
    pub epsilons: Vec<f64>,
    pub ic_values: Vec<f64>,
    /// Interior grid points (smallest decade) where the derivative was taken.
    pub fit_epsilons: Vec<f64>,
    /// Central-difference values of `dI/deps` at `fit_epsilons`.
    pub derivatives: Vec<f64>,
    /// Coefficient `c` of the least-squares fit `I'(eps) = c*log2(1/eps)+k`.
    pub fitted_slope: f64,
    /// Offset `k` of the same fit.
    pub fitted_offset: f64,
    /// The trace gap at `(psi, sigma)`: the predicted value of `c`.
    pub slope_prediction: f64,
}

/// Evaluates the coherent-information curve along the perturbation path and
/// fits the log-divergent derivative over the smallest decade of the grid.
/// Needs at least 8 derivative points in that decade.
pub fn perturbation_curve(
    ch: &QuantumChannel,
    psi: &CMatrix,
    sigma: &CMatrix,
    grid: &EpsGrid,
) -> Result<PerturbationCurve, DetectionError> {
    grid.validate()?;
    let d = ch.d_in();
    validate_pure(psi, d)?;
    validate_density(sigma, d)?;

    let epsilons = grid.values();
    let rho_psi = outer(psi, psi);
    let mut ic_values = Vec::with_capacity(epsilons.len());
    for &eps in &epsilons {
        let rho = &rho_psi.scale(1.0 - eps) + &sigma.scale(eps);
        ic_values.push(coherent_information(ch, &rho)?);
    }

    // central differences on the log grid: dI/deps at eps_k
    let decade_cut = grid.eps_min * 10.0 * (1.0 + 1e-9);
    let mut fit_epsilons = Vec::new();
    let mut derivatives = Vec::new();
    for k in 1..epsilons.len() - 1 {
        if epsilons[k] > decade_cut {
            break;
        }
        let dlog = epsilons[k + 1].ln() - epsilons[k - 1].ln();
        let didlog = (ic_values[k + 1] - ic_values[k - 1]) / dlog;
        fit_epsilons.push(epsilons[k]);
        derivatives.push(didlog / epsilons[k]);
    }
    if derivatives.len() < 8 {
        return Err(DetectionError::GridTooCoarse { points_in_fit_decade: derivatives.len() });
    }

    // least squares y = c*x + k with x = log2(1/eps)
    let n = derivatives.len() as f64;
    let xs: Vec<f64> = fit_epsilons.iter().map(|e| e.recip().log2()).collect();
    let sx: f64 = xs.iter().sum();
    let sy: f64 = derivatives.iter().sum();
    let sxx: f64 = xs.iter().map(|x| x * x).sum();
    let sxy: f64 = xs.iter().zip(&derivatives).map(|(x, y)| x * y).sum();
    let denom = n * sxx - sx * sx;
    let fitted_slope = (n * sxy - sx * sy) / denom;
    let fitted_offset = (sy - fitted_slope * sx) / n;

    let slope_prediction = trace_gap(ch, psi, sigma)?;

    Ok(PerturbationCurve {
        epsilons,
        ic_values,
        fit_epsilons,
        derivatives,
        fitted_slope,
        fitted_offset,
        slope_prediction,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::channels::zoo;
    use crate::detection::{detect, DetectConfig};
    use crate::numkernel::CMatrix;
    use crate::sampling::{self, SeededStream};
    use num_complex::Complex64;

    fn basis_state(d: usize, k: usize) -> CMatrix {
        CMatrix::from_fn(d, 1, |i, _| {
            if i == k {
                Complex64::ONE
            } else {
                Complex64::ZERO
            }
        })
    }

    fn maximally_mixed(d: usize) -> CMatrix {
        CMatrix::identity(d).scale(1.0 / d as f64)
    }

    #[test]
    fn default_grid_is_log_spaced_with_enough_fit_points() {
        let grid = EpsGrid::default();
        let values = grid.values();
        assert_eq!(values.len(), 48);
        assert!((values[0] - 1e-6).abs() < 1e-18);
        assert!((values[47] - 1e-1).abs() < 1e-12);
        let ratio = values[1] / values[0];
        for w in values.windows(2) {
            assert!((w[1] / w[0] - ratio).abs() < 1e-9, "not log spaced");
        }
    }

    #[test]
    fn identity_curve_has_closed_form_and_half_slope() {
        // identity on C^2 from psi = |0>, sigma = I/2:
        // I(eps) = h(eps/2), so I'(eps) = 0.5*log2(1/eps) + 0.5*log2(2-eps)
        let ch = zoo::identity(2).unwrap();
        let curve = perturbation_curve(
            &ch,
            &basis_state(2, 0),
            &maximally_mixed(2),
            &EpsGrid::default(),
        )
        .unwrap();
        for (&eps, &ic) in curve.epsilons.iter().zip(&curve.ic_values) {
            let x: f64 = eps / 2.0;
            let expect = -x * x.log2() - (1.0 - x) * (1.0 - x).log2();
            assert!((ic - expect).abs() < 1e-12, "eps={eps}");
        }
        assert!((curve.slope_prediction - 0.5).abs() < 1e-12);
        assert!(
            (curve.fitted_slope - 0.5).abs() < 0.01,
            "fitted slope {} should be within 1% of 0.5",
            curve.fitted_slope
        );
    }

    #[test]
    fn fitted_slope_tracks_trace_gap_on_random_channels() {
        for seed in 0..5 {
            let ch = sampling::sample_channel(3, 4, 2, SeededStream::new(40 + seed, 0)).unwrap();
            let report = detect(&ch, &DetectConfig::new(SeededStream::new(50 + seed, 0))).unwrap();
            let psi = report.witness_psi.unwrap();
            let curve =
                perturbation_curve(&ch, &psi, &maximally_mixed(3), &EpsGrid::default()).unwrap();
            assert!((curve.slope_prediction - report.trace_gap).abs() < 1e-12);
            let rel = (curve.fitted_slope - curve.slope_prediction).abs()
                / curve.slope_prediction.abs();
            assert!(rel < 0.05, "seed {seed}: relative slope error {rel}");
        }
    }

    #[test]
    fn rejects_bad_grids_and_coarse_grids() {
        let ch = zoo::identity(2).unwrap();
        let psi = basis_state(2, 0);
        let sigma = maximally_mixed(2);
        let bad = EpsGrid { eps_min: 0.0, eps_max: 0.1, points: 48 };
        assert!(matches!(
            perturbation_curve(&ch, &psi, &sigma, &bad),
            Err(DetectionError::BadGrid { .. })
        ));
        let inverted = EpsGrid { eps_min: 0.1, eps_max: 1e-6, points: 48 };
        assert!(matches!(
            perturbation_curve(&ch, &psi, &sigma, &inverted),
            Err(DetectionError::BadGrid { .. })
        ));
        let coarse = EpsGrid { eps_min: 1e-6, eps_max: 1e-1, points: 10 };
        assert!(matches!(
            perturbation_curve(&ch, &psi, &sigma, &coarse),
            Err(DetectionError::GridTooCoarse { .. })
        ));
    }
}
