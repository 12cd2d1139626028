//! Newton vs. Sinkhorn on generated feasible instances.

use std::time::Instant;

use serde::Serialize;

use crate::error::Result;
use crate::generate::{generate_feasible_with, GenOptions, SplitMix64};
use crate::io::status_name;
use crate::newton::{newton_scale, SolverOptions, TraceEntry};
use crate::sinkhorn::sinkhorn_scale;

/// Residual window in which the quadratic-convergence signature is read.
pub const QUADRATIC_WINDOW: (f64, f64) = (1e-10, 1e-3);

/// Largest fitted constant `C` in `r_{k+1} ≤ C r_k²` accepted as quadratic.
/// A linearly convergent method with rate `ρ` has `r_{k+1} / r_k² = ρ / r_k`,
/// which passes this bound once `r_k` drops below `ρ · 1e-6`.
pub const QUADRATIC_C_BOUND: f64 = 1e6;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub enum Method {
    Newton,
    Sinkhorn,
}

impl Method {
    pub fn name(self) -> &'static str {
        match self {
            Method::Newton => "newton",
            Method::Sinkhorn => "sinkhorn",
        }
    }
}

#[derive(Debug, Clone)]
pub struct BenchConfig {
    pub dims: Vec<usize>,
    pub density: f64,
    pub count: usize,
    pub seed: u64,
    pub gen: GenOptions,
    pub newton: SolverOptions,
    pub sinkhorn: SolverOptions,
}

impl Default for BenchConfig {
    fn default() -> Self {
        Self {
            dims: vec![5, 5],
            density: 1.0,
            count: 10,
            seed: 1,
            gen: GenOptions::default(),
            newton: SolverOptions::default(),
            sinkhorn: SolverOptions {
                max_iters: 10_000,
                ..SolverOptions::default()
            },
        }
    }
}

#[derive(Debug, Clone, Serialize)]
pub struct BenchRow {
    pub instance: usize,
    pub method: &'static str,
    pub status: &'static str,
    pub iterations: usize,
    pub iterations_to_1e6: Option<usize>,
    pub final_residual: f64,
    #[serde(skip)]
    pub wall_ms: f64,
}

#[derive(Debug, Clone)]
pub struct BenchReport {
    pub rows: Vec<BenchRow>,
    /// `(instance, method, trace)` in row order.
    pub traces: Vec<(usize, Method, Vec<TraceEntry>)>,
}

/// First iteration whose residual is at or below `tol`.
pub fn iterations_to(trace: &[TraceEntry], tol: f64) -> Option<usize> {
    trace.iter().find(|t| t.residual <= tol).map(|t| t.iteration)
}

/// Fitted `C = max r_{k+1} / r_k²` over consecutive residual pairs with `r_k`
/// inside [`QUADRATIC_WINDOW`]; `None` when no pair falls in the window.
pub fn quadratic_constant(trace: &[TraceEntry]) -> Option<f64> {
    let (lo, hi) = QUADRATIC_WINDOW;
    trace
        .windows(2)
        .filter(|w| w[0].residual >= lo && w[0].residual <= hi)
        .map(|w| w[1].residual / (w[0].residual * w[0].residual))
        .fold(None, |acc: Option<f64>, c| Some(acc.map_or(c, |a| a.max(c))))
}

pub fn run_bench(cfg: &BenchConfig) -> Result<BenchReport> {
    let mut seeds = SplitMix64::new(cfg.seed);
    let mut rows = Vec::with_capacity(2 * cfg.count);
    let mut traces = Vec::with_capacity(2 * cfg.count);
    for instance in 0..cfg.count {
        let (b, s) = generate_feasible_with(&cfg.dims, cfg.density, seeds.next_u64(), &cfg.gen)?;
        for method in [Method::Newton, Method::Sinkhorn] {
            let start = Instant::now();
            let result = match method {
                Method::Newton => newton_scale(&b, &s, &cfg.newton)?,
                Method::Sinkhorn => sinkhorn_scale(&b, &s, &cfg.sinkhorn)?,
            };
            let wall_ms = start.elapsed().as_secs_f64() * 1e3;
            log::info!(
                "instance {} {}: {} in {} iterations",
                instance,
                method.name(),
                status_name(result.status),
                result.iterations
            );
            rows.push(BenchRow {
                instance,
                method: method.name(),
                status: status_name(result.status),
                iterations: result.iterations,
                iterations_to_1e6: iterations_to(&result.trace, 1e-6),
                final_residual: result.residual,
                wall_ms,
            });
            traces.push((instance, method, result.trace));
        }
    }
    Ok(BenchReport { rows, traces })
}

impl BenchReport {
    /// CSV of all rows. Wall time is included only when asked for, so the
    /// default output is a deterministic function of the seed.
    pub fn to_csv(&self, with_timing: bool) -> Result<String> {
        let mut w = csv::Writer::from_writer(Vec::new());
        let mut header = vec!["instance", "method", "status", "iterations", "iterations_to_1e-6", "final_residual"];
        if with_timing {
            header.push("wall_ms");
        }
        w.write_record(&header).map_err(csv_err)?;
        for row in &self.rows {
            let mut rec = vec![
                row.instance.to_string(),
                row.method.to_string(),
                row.status.to_string(),
                row.iterations.to_string(),
                row.iterations_to_1e6.map_or(String::new(), |i| i.to_string()),
                format!("{:.16e}", row.final_residual),
            ];
            if with_timing {
                rec.push(format!("{:.3}", row.wall_ms));
            }
            w.write_record(&rec).map_err(csv_err)?;
        }
        let bytes = w.into_inner().map_err(|e| crate::error::Error::Io(e.to_string()))?;
        Ok(String::from_utf8(bytes).expect("csv output is utf-8"))
    }

    pub fn trace_csv(trace: &[TraceEntry]) -> Result<String> {
        let mut w = csv::Writer::from_writer(Vec::new());
        w.write_record(["iteration", "f", "residual", "step_length"]).map_err(csv_err)?;
        for t in trace {
            w.write_record([
                t.iteration.to_string(),
                format!("{:.16e}", t.objective),
                format!("{:.16e}", t.residual),
                format!("{:.16e}", t.step_length),
            ])
            .map_err(csv_err)?;
        }
        let bytes = w.into_inner().map_err(|e| crate::error::Error::Io(e.to_string()))?;
        Ok(String::from_utf8(bytes).expect("csv output is utf-8"))
    }

    /// Human-readable summary table.
    pub fn to_table(&self) -> String {
        let mut out = format!(
            "{:>8}  {:<8}  {:<16}  {:>6}  {:>8}  {:>11}  {:>10}\n",
            "instance", "method", "status", "iters", "to 1e-6", "residual", "wall ms"
        );
        for r in &self.rows {
            out.push_str(&format!(
                "{:>8}  {:<8}  {:<16}  {:>6}  {:>8}  {:>11.3e}  {:>10.3}\n",
                r.instance,
                r.method,
                r.status,
                r.iterations,
                r.iterations_to_1e6.map_or("-".to_string(), |i| i.to_string()),
                r.final_residual,
                r.wall_ms
            ));
        }
        out
    }
}

fn csv_err(e: csv::Error) -> crate::error::Error {
    crate::error::Error::Io(e.to_string())
}
