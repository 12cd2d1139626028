//! Newton minimization of `f(y) = Σ b · exp(x_{1,i_1} + … + x_{d,i_d})` over
//! the reduced space `V⊥`.
//!
//! On `V⊥` the objective is strictly convex, and a critical point there gives
//! a scaled tensor whose slice sums are a common multiple `λ s_k` of the
//! targets. Shifting mode 1 by `−log λ` then produces the scaled tensor with
//! exactly the prescribed sums. When no critical point exists the iterates
//! run off to infinity; we then confirm infeasibility with the LP and attach
//! its certificate.

use nalgebra::{DMatrix, DVector};

use crate::error::{Error, Result};
use crate::feasibility::{check_scalability, Verdict};
use crate::subspace::{build_frame, linalg, Subspace, SubspaceFrame};
use crate::tensor::{residual, residual_of_sums, ScalingVectors, SparseTensor, TargetSums, DEFAULT_EXPONENT_CAP};

/// Number of consecutive non-improving iterations that counts as a stall.
const STALL_WINDOW: usize = 5;

/// Relative decrease a residual needs to count as an improvement.
const IMPROVEMENT_FRACTION: f64 = 1e-6;

/// Backtracking gives up after this many reductions.
const MAX_BACKTRACKS: usize = 60;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SolverOptions {
    pub residual_tol: f64,
    pub max_iters: usize,
    pub armijo_c: f64,
    pub backtrack_factor: f64,
    /// Added to the Hessian diagonal on every step.
    pub hessian_ridge: f64,
    pub divergence_norm_cap: f64,
    pub exponent_cap: f64,
}

impl Default for SolverOptions {
    fn default() -> Self {
        Self {
            residual_tol: 1e-10,
            max_iters: 100,
            armijo_c: 1e-4,
            backtrack_factor: 0.5,
            hessian_ridge: 0.0,
            divergence_norm_cap: 1e3,
            exponent_cap: DEFAULT_EXPONENT_CAP,
        }
    }
}

impl SolverOptions {
    pub fn validate(&self) -> Result<()> {
        let bad = |msg: &str| Err(Error::InvalidOptions(msg.into()));
        if !(self.residual_tol > 0.0) {
            return bad("residual_tol must be positive");
        }
        if !(self.armijo_c > 0.0 && self.armijo_c < 1.0) {
            return bad("armijo_c must lie in (0, 1)");
        }
        if !(self.backtrack_factor > 0.0 && self.backtrack_factor < 1.0) {
            return bad("backtrack_factor must lie in (0, 1)");
        }
        if !(self.hessian_ridge >= 0.0) {
            return bad("hessian_ridge must be nonnegative");
        }
        if !(self.divergence_norm_cap > 0.0 && self.exponent_cap > 0.0) {
            return bad("caps must be positive");
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Status {
    Converged,
    Diverged,
    MaxItersExceeded,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TraceEntry {
    pub iteration: usize,
    /// Objective value at the iterate (Newton) or total mass (Sinkhorn).
    pub objective: f64,
    pub residual: f64,
    /// Step length that produced this iterate; zero for the start point.
    pub step_length: f64,
}

#[derive(Debug, Clone)]
pub struct ScalingResult {
    pub scaling: ScalingVectors,
    pub scaled_tensor: SparseTensor,
    pub residual: f64,
    pub iterations: usize,
    pub trace: Vec<TraceEntry>,
    pub status: Status,
    /// LP certificate, attached when the run was declared divergent.
    pub certificate: Option<ScalingVectors>,
    /// Per-mode multipliers `λ_k` fitted from the unnormalized critical point
    /// (empty for Sinkhorn).
    pub multipliers: Vec<f64>,
}

/// `f(y)` with a max-shift when the largest exponent is large.
pub fn objective(b: &SparseTensor, y: &ScalingVectors) -> Result<f64> {
    let sums = b.exponent_sums(y)?;
    shifted_objective(b.values(), &sums, DEFAULT_EXPONENT_CAP)
}

fn shifted_objective(values: &[f64], sums: &[f64], cap: f64) -> Result<f64> {
    if sums.iter().any(|t| t.is_nan()) {
        return Err(Error::NonFinite("NaN exponent sum".into()));
    }
    let peak = sums.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    if peak > cap {
        return Err(Error::ExponentOverflow { value: peak, cap });
    }
    if peak > cap / 2.0 {
        let scaled: f64 = values.iter().zip(sums).map(|(b, t)| b * (t - peak).exp()).sum();
        Ok(peak.exp() * scaled)
    } else {
        Ok(values.iter().zip(sums).map(|(b, t)| b * t.exp()).sum())
    }
}

/// Ambient gradient (the slice sums of the scaled tensor) and ambient
/// Hessian `H[(k,i),(l,j)] = Σ {a : idx_k = i, idx_l = j}`.
pub fn ambient_gradient_hessian(b: &SparseTensor, y: &ScalingVectors) -> Result<(Vec<f64>, DMatrix<f64>)> {
    let a = b.apply_scaling(y)?;
    let n = b.stacked_len();
    let d = b.num_modes();
    let positions = b.stacked_positions();
    let mut grad = vec![0.0; n];
    let mut hess = DMatrix::zeros(n, n);
    for (pos, &value) in positions.chunks_exact(d).zip(a.values()) {
        for (k, &p) in pos.iter().enumerate() {
            grad[p] += value;
            hess[(p, p)] += value;
            for &q in &pos[..k] {
                hess[(p, q)] += value;
                hess[(q, p)] += value;
            }
        }
    }
    Ok((grad, hess))
}

/// Gradient and Hessian of `c ↦ f(P c) − sᵀ P c` with `P = basis_{V⊥}`.
pub fn gradient_hessian_reduced(
    b: &SparseTensor,
    s: &TargetSums,
    frame: &SubspaceFrame,
    c: &[f64],
) -> Result<(DVector<f64>, DMatrix<f64>)> {
    let reduced = ReducedProblem::new(b, s, frame);
    let point = reduced.evaluate(&DVector::from_column_slice(c), DEFAULT_EXPONENT_CAP)?;
    Ok(reduced.gradient_hessian(&point))
}

/// Newton step: solves `H Δ = −g` by Cholesky, retrying once with a ridge
/// `μ I`, `μ = 1e-12 · trace(H) / p`, if the factorization fails.
pub fn solve_kkt_step(h: &DMatrix<f64>, g: &DVector<f64>) -> Result<DVector<f64>> {
    let p = h.nrows();
    if h.ncols() != p || g.len() != p {
        return Err(Error::DimensionMismatch(format!(
            "Hessian {}×{} with gradient of length {}",
            h.nrows(),
            h.ncols(),
            g.len()
        )));
    }
    if p == 0 {
        return Ok(DVector::zeros(0));
    }
    let asym = linalg::asymmetry(h);
    if asym > 1e-12 {
        return Err(Error::NotSymmetric(asym));
    }
    let rhs = -g;
    if let Some(step) = linalg::solve_spd(h, &rhs) {
        return Ok(step);
    }
    let mu = 1e-12 * h.trace() / p as f64;
    let ridged = h + DMatrix::identity(p, p) * mu;
    linalg::solve_spd(&ridged, &rhs).ok_or(Error::HessianFactorization)
}

/// Problem data in `V⊥` coordinates.
struct ReducedProblem<'a> {
    b: &'a SparseTensor,
    /// `nnz × p`: coordinates to support exponent sums.
    sum_map: DMatrix<f64>,
    /// `Pᵀ s`, identically zero in exact arithmetic since `V⊥ ⊂ U`.
    projected_targets: DVector<f64>,
}

struct Point {
    coords: DVector<f64>,
    values: Vec<f64>,
    objective: f64,
}

impl<'a> ReducedProblem<'a> {
    fn new(b: &'a SparseTensor, s: &TargetSums, frame: &SubspaceFrame) -> Self {
        let basis = frame.basis(Subspace::Vperp);
        let projected_targets = basis.tr_mul(&DVector::from_vec(s.stacked()));
        Self {
            b,
            sum_map: frame.support_sum_matrix(Subspace::Vperp),
            projected_targets,
        }
    }

    fn evaluate(&self, coords: &DVector<f64>, cap: f64) -> Result<Point> {
        let sums = &self.sum_map * coords;
        if let Some(t) = sums.iter().find(|t| !t.is_finite() || t.abs() > cap) {
            return Err(Error::ExponentOverflow { value: *t, cap });
        }
        let objective = shifted_objective(self.b.values(), sums.as_slice(), cap)?;
        let values = self
            .b
            .values()
            .iter()
            .zip(sums.iter())
            .map(|(b, t)| b * t.exp())
            .collect();
        Ok(Point {
            coords: coords.clone(),
            values,
            objective,
        })
    }

    fn slice_sums(&self, point: &Point) -> Vec<Vec<f64>> {
        let d = self.b.num_modes();
        let mut sums: Vec<Vec<f64>> = self.b.dims().iter().map(|&m| vec![0.0; m]).collect();
        for (idx, &a) in self.b.entries().map(|(idx, _)| idx).zip(&point.values) {
            for k in 0..d {
                sums[k][idx[k]] += a;
            }
        }
        sums
    }

    fn gradient_hessian(&self, point: &Point) -> (DVector<f64>, DMatrix<f64>) {
        let p = self.sum_map.ncols();
        let a = DVector::from_column_slice(&point.values);
        let grad = self.sum_map.tr_mul(&a) - &self.projected_targets;
        let mut weighted = self.sum_map.clone();
        for (mut row, &w) in weighted.row_iter_mut().zip(point.values.iter()) {
            row *= w;
        }
        let mut hess = self.sum_map.tr_mul(&weighted);
        // exact symmetry
        for i in 0..p {
            for j in 0..i {
                let avg = 0.5 * (hess[(i, j)] + hess[(j, i)]);
                hess[(i, j)] = avg;
                hess[(j, i)] = avg;
            }
        }
        (grad, hess)
    }
}

/// Newton's method from `y = 0`.
pub fn newton_scale(b: &SparseTensor, s: &TargetSums, opts: &SolverOptions) -> Result<ScalingResult> {
    let frame = build_frame(b, s)?;
    let start = vec![0.0; frame.dim(Subspace::Vperp)];
    newton_scale_in_frame(b, s, &frame, opts, &start)
}

/// Newton's method from the `V⊥` coordinates `start`.
pub fn newton_scale_from(
    b: &SparseTensor,
    s: &TargetSums,
    opts: &SolverOptions,
    start: &[f64],
) -> Result<ScalingResult> {
    let frame = build_frame(b, s)?;
    newton_scale_in_frame(b, s, &frame, opts, start)
}

pub fn newton_scale_in_frame(
    b: &SparseTensor,
    s: &TargetSums,
    frame: &SubspaceFrame,
    opts: &SolverOptions,
    start: &[f64],
) -> Result<ScalingResult> {
    opts.validate()?;
    if frame.dims() != b.dims() {
        return Err(Error::DimensionMismatch("frame built for other dims".into()));
    }
    let p = frame.dim(Subspace::Vperp);
    if start.len() != p {
        return Err(Error::DimensionMismatch(format!(
            "start point has {} coordinates, V⊥ has dimension {}",
            start.len(),
            p
        )));
    }
    // Each mode scaled to the common total so the sums match exactly.
    let target_total = s.common_total();
    let s_hat = s.normalized_to(target_total);
    let problem = ReducedProblem::new(b, &s_hat, frame);
    let cap = opts.exponent_cap;

    let normalized_residual = |point: &Point| {
        let ratio = target_total / point.objective;
        let sums: Vec<Vec<f64>> = problem
            .slice_sums(point)
            .into_iter()
            .map(|row| row.into_iter().map(|v| v * ratio).collect())
            .collect();
        residual_of_sums(&sums, &s_hat)
    };

    let mut point = problem.evaluate(&DVector::from_column_slice(start), cap)?;
    let mut res = normalized_residual(&point);
    let mut trace = vec![TraceEntry {
        iteration: 0,
        objective: point.objective,
        residual: res,
        step_length: 0.0,
    }];
    let mut best = res;
    let mut since_improvement = 0;
    let mut iterations = 0;
    let mut converged = res <= opts.residual_tol;
    let mut hessian_failed = false;

    while !converged && iterations < opts.max_iters {
        let (grad, mut hess) = problem.gradient_hessian(&point);
        if opts.hessian_ridge > 0.0 {
            for i in 0..p {
                hess[(i, i)] += opts.hessian_ridge;
            }
        }
        let step = match solve_kkt_step(&hess, &grad) {
            Ok(step) => step,
            Err(Error::HessianFactorization) => {
                hessian_failed = true;
                break;
            }
            Err(e) => return Err(e),
        };
        let slope = grad.dot(&step);
        let slack = 8.0 * f64::EPSILON * point.objective.abs();

        let mut t = 1.0;
        let mut accepted = None;
        for _ in 0..MAX_BACKTRACKS {
            let trial = &point.coords + &step * t;
            if let Ok(candidate) = problem.evaluate(&trial, cap) {
                if candidate.objective <= point.objective + opts.armijo_c * t * slope + slack {
                    accepted = Some(candidate);
                    break;
                }
            }
            t *= opts.backtrack_factor;
        }
        let Some(next) = accepted else {
            log::debug!("newton: line search failed at iteration {}", iterations);
            break;
        };
        point = next;
        iterations += 1;
        res = normalized_residual(&point);
        trace.push(TraceEntry {
            iteration: iterations,
            objective: point.objective,
            residual: res,
            step_length: t,
        });
        log::debug!("newton: iter {} f = {:e} residual = {:e} t = {}", iterations, point.objective, res, t);

        if res < best * (1.0 - IMPROVEMENT_FRACTION) {
            best = res;
            since_improvement = 0;
        } else {
            since_improvement += 1;
        }
        converged = res <= opts.residual_tol;
        if !converged && since_improvement >= STALL_WINDOW {
            let y_norm = (frame.basis(Subspace::Vperp) * &point.coords).amax();
            if y_norm > opts.divergence_norm_cap {
                log::debug!("newton: ‖y‖∞ = {:e} with stalled residual, testing feasibility", y_norm);
                break;
            }
        }
    }

    // Multiplier normalization: slice sums are λ s_k at the critical point.
    let y = frame.embed(Subspace::Vperp, point.coords.as_slice())?;
    let raw_sums = problem.slice_sums(&point);
    let multipliers: Vec<f64> = raw_sums
        .iter()
        .zip(s.modes())
        .map(|(got, want)| {
            let num: f64 = got.iter().zip(want).map(|(g, w)| g * w).sum();
            let den: f64 = want.iter().map(|w| w * w).sum();
            num / den
        })
        .collect();
    let shift = (target_total / point.objective).ln();
    let mut scaling = y;
    for v in scaling.mode_mut(0) {
        *v += shift;
    }
    let scaled_tensor = b.apply_scaling_with_cap(&scaling, cap + shift.abs())?;
    let final_residual = residual(&scaled_tensor, s)?;

    let mut status = if converged && final_residual <= opts.residual_tol {
        Status::Converged
    } else {
        Status::MaxItersExceeded
    };
    let mut certificate = None;
    if status == Status::Converged {
        let hi = multipliers.iter().copied().fold(f64::MIN, f64::max);
        let lo = multipliers.iter().copied().fold(f64::MAX, f64::min);
        if hi - lo > (1e-9 + 4.0 * opts.residual_tol) * hi {
            return Err(Error::Internal(format!("mode multipliers disagree: {:?}", multipliers)));
        }
    } else {
        let report = check_scalability(b, s)?;
        if report.verdict == Verdict::Infeasible {
            status = Status::Diverged;
            certificate = report.certificate;
        } else if hessian_failed {
            return Err(Error::HessianFactorization);
        }
    }

    Ok(ScalingResult {
        scaling,
        scaled_tensor,
        residual: final_residual,
        iterations,
        trace,
        status,
        certificate,
        multipliers,
    })
}
