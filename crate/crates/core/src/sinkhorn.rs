//! Cyclic proportional fitting for d-mode tensors.
//!
//! Each sweep visits the modes in order and rescales every `(k, i_k)` slice to
//! its target. The factors are accumulated as logarithms in the scaling
//! vectors and the current tensor is always re-read as `apply_scaling(B, x)`,
//! so diagonal equivalence to `B` holds by construction.

use crate::error::{Error, Result};
use crate::newton::{ScalingResult, SolverOptions, Status, TraceEntry};
use crate::subspace::check_instance;
use crate::tensor::{mode_offsets, residual, ScalingVectors, SparseTensor, TargetSums};

/// Current slice sums of `b · exp(sums)` for one mode.
fn mode_sums(b: &SparseTensor, exps: &[f64], k: usize) -> Vec<f64> {
    let mut out = vec![0.0; b.dims()[k]];
    for ((idx, v), t) in b.entries().zip(exps) {
        out[idx[k]] += v * t.exp();
    }
    out
}

fn support_exponents(b: &SparseTensor, x: &[f64], offsets: &[usize]) -> Vec<f64> {
    b.entries()
        .map(|(idx, _)| idx.iter().zip(offsets).map(|(i, o)| x[i + o]).sum())
        .collect()
}

pub fn sinkhorn_scale(b: &SparseTensor, s: &TargetSums, opts: &SolverOptions) -> Result<ScalingResult> {
    opts.validate()?;
    check_instance(b, s)?;
    let s_hat = s.normalized_to(s.common_total());
    let offsets = mode_offsets(b.dims());
    let cap = opts.exponent_cap;

    let mut x = ScalingVectors::zeros(b.dims());
    let start = b.clone();
    let mut trace = vec![TraceEntry {
        iteration: 0,
        objective: start.total(),
        residual: residual(&start, &s_hat)?,
        step_length: 0.0,
    }];
    let mut current = start;
    let mut res = trace[0].residual;
    let mut status = if res <= opts.residual_tol {
        Status::Converged
    } else {
        Status::MaxItersExceeded
    };
    let mut sweeps = 0;

    'outer: while status != Status::Converged && sweeps < opts.max_iters {
        let mut next = x.clone();
        for k in 0..b.num_modes() {
            let exps = support_exponents(b, next.as_slice(), &offsets);
            let sums = mode_sums(b, &exps, k);
            if let Some(i) = sums.iter().position(|&v| !(v > 0.0)) {
                return Err(Error::Internal(format!(
                    "slice ({},{}) sum vanished during proportional fitting",
                    k + 1,
                    i + 1
                )));
            }
            for ((xi, want), got) in next.mode_mut(k).iter_mut().zip(s_hat.mode(k)).zip(&sums) {
                *xi += (want / got).ln();
            }
            let exps = support_exponents(b, next.as_slice(), &offsets);
            if next.norm_inf() > cap || exps.iter().any(|t| t.abs() > cap) {
                log::debug!("sinkhorn: exponent cap exceeded in sweep {}", sweeps + 1);
                status = Status::Diverged;
                break 'outer;
            }
        }
        x = next;
        sweeps += 1;
        current = b.apply_scaling_with_cap(&x, cap)?;
        res = residual(&current, &s_hat)?;
        trace.push(TraceEntry {
            iteration: sweeps,
            objective: current.total(),
            residual: res,
            step_length: 1.0,
        });
        if res <= opts.residual_tol {
            status = Status::Converged;
        }
    }

    let final_residual = residual(&current, s)?;
    Ok(ScalingResult {
        scaling: x,
        scaled_tensor: current,
        residual: final_residual,
        iterations: sweeps,
        trace,
        status,
        certificate: None,
        multipliers: Vec::new(),
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn targets(s: &[&[f64]]) -> TargetSums {
        TargetSums::new(s.iter().map(|v| v.to_vec()).collect()).unwrap()
    }

    #[test]
    fn single_row_pass() {
        // One mode-1 pass toward unit row sums, done by hand through the
        // same log-factor update.
        let b = SparseTensor::from_rows(&[&[1.0, 2.0], &[3.0, 4.0]]).unwrap();
        let sums = b.slice_sums(0).unwrap();
        let x = ScalingVectors::from_modes(vec![sums.iter().map(|v| (1.0 / v).ln()).collect(), vec![0.0, 0.0]]);
        let a = b.apply_scaling(&x).unwrap();
        let want = [1.0 / 3.0, 2.0 / 3.0, 3.0 / 7.0, 4.0 / 7.0];
        for (v, w) in a.values().iter().zip(want) {
            assert!((v - w).abs() < 1e-15);
        }
    }

    #[test]
    fn flat_matrix_in_one_sweep() {
        let b = SparseTensor::ones(vec![2, 2]).unwrap();
        let r = sinkhorn_scale(&b, &targets(&[&[1.0, 1.0], &[1.0, 1.0]]), &SolverOptions::default()).unwrap();
        assert_eq!(r.status, Status::Converged);
        assert_eq!(r.iterations, 1);
        for &v in r.scaled_tensor.values() {
            assert!((v - 0.5).abs() < 1e-15);
        }
    }

    #[test]
    fn infeasible_three_cell_hits_exponent_cap() {
        let b = SparseTensor::from_rows(&[&[0.0, 1.0], &[1.0, 1.0]]).unwrap();
        let s = targets(&[&[1.0, 1.0], &[1.5, 0.5]]);
        let opts = SolverOptions {
            max_iters: 100_000,
            ..Default::default()
        };
        let r = sinkhorn_scale(&b, &s, &opts).unwrap();
        assert_eq!(r.status, Status::Diverged);
        assert!(r.iterations > 10);
        assert!(r.scaling.norm_inf() > 100.0);
    }

    #[test]
    fn diagonal_equivalence_holds_exactly() {
        let b = SparseTensor::from_rows(&[&[1.0, 2.0, 0.5], &[3.0, 0.0, 4.0]]).unwrap();
        let s = targets(&[&[2.0, 5.0], &[3.0, 1.0, 3.0]]);
        let r = sinkhorn_scale(&b, &s, &SolverOptions { max_iters: 5, ..Default::default() }).unwrap();
        let again = b.apply_scaling(&r.scaling).unwrap();
        for (u, v) in again.values().iter().zip(r.scaled_tensor.values()) {
            assert!((u - v).abs() <= 1e-10 * v);
        }
    }
}
