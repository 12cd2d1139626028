//! Scalability test by linear programming.
//!
//! A tensor `B` can be scaled to targets `s` iff every `y` in `U` whose
//! exponent sums are all `≤ 0` on the support has them all equal to zero.
//! The cone is homogeneous, so we minimize the total support sum over a box:
//! the optimum is zero when `B` is scalable and strictly negative otherwise,
//! in which case the minimizer is a certificate of infeasibility.

use nalgebra::DVector;

use crate::error::{Error, Result};
use crate::simplex::{LinearProgram, DEFAULT_MAX_PIVOTS};
use crate::subspace::{basis_u, check_instance, incidence_matrix};
use crate::tensor::{ScalingVectors, SparseTensor, TargetSums};

/// A box optimum below this value is a genuine violation.
pub const INFEASIBILITY_THRESHOLD: f64 = -1e-6;

/// Slack allowed on each support sum of a certificate.
pub const CERT_SUPPORT_TOL: f64 = 1e-9;

/// Relative slack allowed on `s_k · x_k = 0` for a certificate.
pub const CERT_EQUALITY_TOL: f64 = 1e-9;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Verdict {
    Feasible,
    Infeasible,
}

#[derive(Debug, Clone)]
pub struct FeasibilityReport {
    pub verdict: Verdict,
    /// Present iff the verdict is `Infeasible`; normalized to `‖y‖∞ = 1`.
    pub certificate: Option<ScalingVectors>,
    /// Total support sum at the certificate (zero when feasible).
    pub objective_at_certificate: f64,
    /// Optimum of the box LP.
    pub lp_optimum: f64,
    pub pivots: usize,
}

#[derive(Debug, Clone, Copy)]
pub struct FeasibilityOptions {
    pub max_pivots: usize,
    pub threshold: f64,
}

impl Default for FeasibilityOptions {
    fn default() -> Self {
        Self {
            max_pivots: DEFAULT_MAX_PIVOTS,
            threshold: INFEASIBILITY_THRESHOLD,
        }
    }
}

pub fn check_scalability(b: &SparseTensor, s: &TargetSums) -> Result<FeasibilityReport> {
    check_scalability_with(b, s, &FeasibilityOptions::default())
}

pub fn check_scalability_with(
    b: &SparseTensor,
    s: &TargetSums,
    opts: &FeasibilityOptions,
) -> Result<FeasibilityReport> {
    check_instance(b, s)?;

    // Work in U-coordinates c (y = basis_U · c) so the equalities hold by
    // construction; c is split as c⁺ − c⁻ with both halves in [0, 1].
    let basis = basis_u(s);
    let u = basis.ncols();
    let sums = incidence_matrix(b) * &basis;
    let cost: Vec<f64> = (0..u).map(|j| sums.column(j).sum()).collect();

    let objective: Vec<f64> = cost.iter().copied().chain(cost.iter().map(|c| -c)).collect();
    let rows: Vec<Vec<f64>> = sums
        .row_iter()
        .map(|r| r.iter().copied().chain(r.iter().map(|v| -v)).collect())
        .collect();
    let lp = LinearProgram {
        objective,
        rhs: vec![0.0; rows.len()],
        rows,
        lower: vec![0.0; 2 * u],
        upper: vec![1.0; 2 * u],
    };
    let sol = lp.solve(opts.max_pivots)?;
    log::debug!("feasibility LP optimum {:e} after {} pivots", sol.objective, sol.pivots);

    if sol.objective >= opts.threshold {
        return Ok(FeasibilityReport {
            verdict: Verdict::Feasible,
            certificate: None,
            objective_at_certificate: 0.0,
            lp_optimum: sol.objective,
            pivots: sol.pivots,
        });
    }

    let c = DVector::from_iterator(u, (0..u).map(|j| sol.x[j] - sol.x[u + j]));
    let y = &basis * c;
    let peak = y.amax();
    let y = ScalingVectors::new(b.dims().to_vec(), y.iter().map(|v| v / peak).collect())?;
    let total: f64 = b.exponent_sums(&y)?.iter().sum();
    if !verify_certificate(b, s, &y) {
        return Err(Error::Internal(
            "LP optimum is negative but its minimizer fails certificate verification".into(),
        ));
    }
    Ok(FeasibilityReport {
        verdict: Verdict::Infeasible,
        certificate: Some(y),
        objective_at_certificate: total,
        lp_optimum: sol.objective,
        pivots: sol.pivots,
    })
}

/// True iff `y` has every support sum `≤ 0` and `s_k · x_k = 0` (within the
/// certificate tolerances) while some support sum, and the total, is
/// strictly negative.
pub fn verify_certificate(b: &SparseTensor, s: &TargetSums, y: &ScalingVectors) -> bool {
    if s.check_dims(b).is_err() || y.dims() != b.dims() {
        return false;
    }
    if y.as_slice().iter().any(|v| !v.is_finite()) {
        return false;
    }
    for k in 0..s.num_modes() {
        let (sk, xk) = (s.mode(k), y.mode(k));
        let dot: f64 = sk.iter().zip(xk).map(|(a, b)| a * b).sum();
        let norm_s = sk.iter().map(|v| v * v).sum::<f64>().sqrt();
        let norm_x = xk.iter().map(|v| v * v).sum::<f64>().sqrt();
        if dot.abs() > CERT_EQUALITY_TOL * norm_s * norm_x {
            return false;
        }
    }
    let Ok(sums) = b.exponent_sums(y) else {
        return false;
    };
    let max = sums.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let min = sums.iter().copied().fold(f64::INFINITY, f64::min);
    let total: f64 = sums.iter().sum();
    max <= CERT_SUPPORT_TOL && min < INFEASIBILITY_THRESHOLD && total < INFEASIBILITY_THRESHOLD
}

#[cfg(test)]
mod tests {
    use super::*;

    fn targets(s: &[&[f64]]) -> TargetSums {
        TargetSums::new(s.iter().map(|v| v.to_vec()).collect()).unwrap()
    }

    fn three_cell() -> SparseTensor {
        SparseTensor::from_rows(&[&[0.0, 1.0], &[1.0, 1.0]]).unwrap()
    }

    #[test]
    fn full_support_is_feasible() {
        let b = SparseTensor::from_rows(&[&[1.0, 2.0], &[3.0, 4.0]]).unwrap();
        let r = check_scalability(&b, &targets(&[&[0.3, 1.7], &[1.1, 0.9]])).unwrap();
        assert_eq!(r.verdict, Verdict::Feasible);
        assert!(r.certificate.is_none());
    }

    #[test]
    fn three_cell_infeasible_with_certificate() {
        let s = targets(&[&[1.0, 1.0], &[1.5, 0.5]]);
        let r = check_scalability(&three_cell(), &s).unwrap();
        assert_eq!(r.verdict, Verdict::Infeasible);
        let y = r.certificate.unwrap();
        assert!(verify_certificate(&three_cell(), &s, &y));
        assert!((y.norm_inf() - 1.0).abs() < 1e-15);
        assert!(r.objective_at_certificate < INFEASIBILITY_THRESHOLD);
    }

    #[test]
    fn three_cell_feasible_orientation() {
        let r = check_scalability(&three_cell(), &targets(&[&[1.0, 1.0], &[0.5, 1.5]])).unwrap();
        assert_eq!(r.verdict, Verdict::Feasible);
    }

    #[test]
    fn hand_certificate() {
        let s = targets(&[&[1.0, 1.0], &[1.5, 0.5]]);
        let y = ScalingVectors::from_modes(vec![vec![1.0, -1.0], vec![0.5, -1.5]]);
        assert!(verify_certificate(&three_cell(), &s, &y));
        assert!(!verify_certificate(&three_cell(), &s, &ScalingVectors::zeros(&[2, 2])));
        let bad = ScalingVectors::from_modes(vec![vec![1.0, 0.0], vec![0.5, -1.5]]);
        assert!(!verify_certificate(&three_cell(), &s, &bad));
    }

    #[test]
    fn preconditions_are_errors() {
        let b = SparseTensor::from_rows(&[&[1.0, 1.0], &[0.0, 0.0]]).unwrap();
        let s = targets(&[&[1.0, 1.0], &[1.0, 1.0]]);
        assert!(matches!(check_scalability(&b, &s), Err(Error::ZeroSlices(_))));
        let s = targets(&[&[1.0, 1.0], &[1.0, 2.0]]);
        assert!(matches!(
            check_scalability(&three_cell(), &s),
            Err(Error::IncompatibleTargets { .. })
        ));
    }

    #[test]
    fn pivot_cap_is_a_failure_not_a_verdict() {
        let s = targets(&[&[1.0, 1.0], &[1.5, 0.5]]);
        let opts = FeasibilityOptions {
            max_pivots: 0,
            ..Default::default()
        };
        assert!(matches!(
            check_scalability_with(&three_cell(), &s, &opts),
            Err(Error::SimplexIterationLimit(0))
        ));
    }
}
