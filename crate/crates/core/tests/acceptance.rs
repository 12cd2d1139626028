//! One pass/fail line per acceptance criterion; exits non-zero on any fail.

use std::process::ExitCode;
use std::time::{Duration, Instant};

use slicescale::bench::{iterations_to, quadratic_constant, QUADRATIC_C_BOUND};
use slicescale::feasibility::{check_scalability, verify_certificate, Verdict};
use slicescale::generate::{generate_feasible, generate_infeasible_2mode, sample_pattern, SplitMix64};
use slicescale::maxflow::pattern_feasible_maxflow;
use slicescale::newton::{gradient_hessian_reduced, newton_scale, newton_scale_from, objective, SolverOptions, Status};
use slicescale::sinkhorn::sinkhorn_scale;
use slicescale::subspace::{build_frame, Subspace};
use slicescale::{ScalingResult, ScalingVectors, SparseTensor, TargetSums};

struct Outcome {
    pass: bool,
    detail: String,
}

fn outcome(pass: bool, detail: String) -> Outcome {
    Outcome { pass, detail }
}

/// Every certificate produced anywhere in the run, with its instance.
#[derive(Default)]
struct Certificates {
    seen: Vec<(SparseTensor, TargetSums, Option<ScalingVectors>)>,
}

impl Certificates {
    fn record(&mut self, b: &SparseTensor, s: &TargetSums, y: Option<&ScalingVectors>) {
        self.seen.push((b.clone(), s.clone(), y.cloned()));
    }
}

fn random_targets(dims: &[usize], rng: &mut SplitMix64) -> TargetSums {
    let mut modes: Vec<Vec<f64>> = dims.iter().map(|&m| (0..m).map(|_| rng.uniform(0.5, 1.5)).collect()).collect();
    let total: f64 = modes[0].iter().sum();
    for mode in modes.iter_mut().skip(1) {
        let t: f64 = mode.iter().sum();
        mode.iter_mut().for_each(|v| *v *= total / t);
    }
    TargetSums::new(modes).unwrap()
}

fn max_rel_diff(a: &SparseTensor, b: &SparseTensor) -> f64 {
    assert_eq!(a.nnz(), b.nnz());
    a.values()
        .iter()
        .zip(b.values())
        .map(|(u, v)| (u - v).abs() / v.abs())
        .fold(0.0, f64::max)
}

fn random_dims_3(rng: &mut SplitMix64) -> Vec<usize> {
    (0..3).map(|_| rng.range(2, 4)).collect()
}

fn within(elapsed: Duration, limit_s: f64) -> bool {
    elapsed.as_secs_f64() < limit_s
}

fn criterion_1() -> Outcome {
    let start = Instant::now();
    let opts = SolverOptions::default();
    let b = SparseTensor::ones(vec![2, 2]).unwrap();
    let s = TargetSums::new(vec![vec![1.0, 1.0], vec![1.0, 1.0]]).unwrap();
    let r = newton_scale(&b, &s, &opts).unwrap();
    let err2 = r.scaled_tensor.values().iter().map(|v| (v - 0.5).abs()).fold(0.0, f64::max);
    let ok2 = r.status == Status::Converged && r.residual <= 1e-12 && err2 <= 1e-12;

    let b = SparseTensor::ones(vec![2, 2, 2]).unwrap();
    let s = TargetSums::new(vec![vec![4.0, 4.0]; 3]).unwrap();
    let r = newton_scale(&b, &s, &opts).unwrap();
    let err3 = r.scaled_tensor.values().iter().map(|v| (v - 1.0).abs()).fold(0.0, f64::max);
    let ok3 = r.status == Status::Converged && r.residual <= 1e-12 && err3 <= 1e-12 && r.scaled_tensor.nnz() == 8;

    let elapsed = start.elapsed();
    outcome(
        ok2 && ok3 && within(elapsed, 1.0),
        format!("2x2 max err {:.1e}, 2x2x2 max err {:.1e}, {:.3}s", err2, err3, elapsed.as_secs_f64()),
    )
}

fn criterion_2() -> Outcome {
    let start = Instant::now();
    let mut rng = SplitMix64::new(0x2002);
    let mut worst = 0.0f64;
    let mut failures = 0;
    for _ in 0..100 {
        let (m, n) = (rng.range(1, 6), rng.range(1, 7));
        let u: Vec<f64> = (0..m).map(|_| rng.uniform(0.5, 1.5)).collect();
        let v: Vec<f64> = (0..n).map(|_| rng.uniform(0.5, 1.5)).collect();
        let dense: Vec<f64> = u.iter().flat_map(|ui| v.iter().map(move |vj| ui * vj)).collect();
        let b = SparseTensor::from_dense(vec![m, n], &dense).unwrap();
        let s = random_targets(&[m, n], &mut rng);
        let (r, c) = (s.mode(0), s.mode(1));
        let total: f64 = r.iter().sum();
        let res = newton_scale(&b, &s, &SolverOptions::default()).unwrap();
        if res.status != Status::Converged {
            failures += 1;
            continue;
        }
        for (idx, a) in res.scaled_tensor.entries() {
            let want = r[idx[0]] * c[idx[1]] / total;
            worst = worst.max((a - want).abs());
        }
    }
    let elapsed = start.elapsed();
    outcome(
        failures == 0 && worst <= 1e-9 && within(elapsed, 10.0),
        format!("100 rank-one matrices, max abs err {:.1e}, {} unconverged, {:.2}s", worst, failures, elapsed.as_secs_f64()),
    )
}

fn criterion_3(certs: &mut Certificates) -> Outcome {
    let start = Instant::now();
    let mut rng = SplitMix64::new(0x3003);
    let (mut agree, mut infeasible) = (0, 0);
    for _ in 0..200 {
        let density = rng.uniform(0.25, 0.75);
        let pattern = sample_pattern(&[4, 4], density, &mut rng).unwrap();
        let entries = pattern.into_iter().map(|c| (c, rng.uniform(0.5, 1.5))).collect();
        let b = SparseTensor::from_entries(vec![4, 4], entries).unwrap();
        let s = random_targets(&[4, 4], &mut rng);
        let report = check_scalability(&b, &s).unwrap();
        let oracle = pattern_feasible_maxflow(&b, &s).unwrap();
        if (report.verdict == Verdict::Feasible) == oracle {
            agree += 1;
        }
        if report.verdict == Verdict::Infeasible {
            infeasible += 1;
            certs.record(&b, &s, report.certificate.as_ref());
        }
    }
    let elapsed = start.elapsed();
    outcome(
        agree == 200 && within(elapsed, 30.0),
        format!("{}/200 agree ({} infeasible), {:.2}s", agree, infeasible, elapsed.as_secs_f64()),
    )
}

fn criterion_4(certs: &Certificates) -> Outcome {
    let accepted = certs
        .seen
        .iter()
        .filter(|(b, s, y)| y.as_ref().is_some_and(|y| verify_certificate(b, s, y)))
        .count();
    outcome(
        accepted == certs.seen.len() && !certs.seen.is_empty(),
        format!("{}/{} infeasible verdicts carry an accepted certificate", accepted, certs.seen.len()),
    )
}

struct Suite5 {
    instances: Vec<(SparseTensor, TargetSums)>,
    runs: Vec<ScalingResult>,
}

fn criterion_5() -> (Outcome, Suite5) {
    let start = Instant::now();
    let mut rng = SplitMix64::new(0x5005);
    let mut suite = Suite5 {
        instances: Vec::new(),
        runs: Vec::new(),
    };
    let (mut worst, mut failures) = (0.0f64, 0);
    for _ in 0..50 {
        let dims = random_dims_3(&mut rng);
        let density = rng.uniform(0.5, 1.0);
        let (b, s) = generate_feasible(&dims, density, rng.next_u64()).unwrap();
        let p = build_frame(&b, &s).unwrap().dim(Subspace::Vperp);
        let c1: Vec<f64> = (0..p).map(|_| rng.uniform(-1.0, 1.0)).collect();
        let c2: Vec<f64> = (0..p).map(|_| rng.uniform(-1.0, 1.0)).collect();
        let r1 = newton_scale_from(&b, &s, &SolverOptions::default(), &c1).unwrap();
        let r2 = newton_scale_from(&b, &s, &SolverOptions::default(), &c2).unwrap();
        if r1.status != Status::Converged || r2.status != Status::Converged {
            failures += 1;
        } else {
            worst = worst.max(max_rel_diff(&r1.scaled_tensor, &r2.scaled_tensor));
        }
        suite.instances.push((b, s));
        suite.runs.push(r1);
    }
    let elapsed = start.elapsed();
    (
        outcome(
            failures == 0 && worst <= 1e-8,
            format!("50 d=3 instances, max rel diff {:.1e}, {} unconverged, {:.2}s", worst, failures, elapsed.as_secs_f64()),
        ),
        suite,
    )
}

fn criterion_6(suite: &Suite5, sinkhorn_runs: &mut Vec<ScalingResult>) -> Outcome {
    let opts = SolverOptions {
        residual_tol: 1e-8,
        max_iters: 1_000_000,
        ..Default::default()
    };
    let (mut worst, mut failures) = (0.0f64, 0);
    for ((b, s), newton) in suite.instances.iter().zip(&suite.runs) {
        let r = sinkhorn_scale(b, s, &opts).unwrap();
        if r.status != Status::Converged || newton.status != Status::Converged {
            failures += 1;
        } else {
            worst = worst.max(max_rel_diff(&r.scaled_tensor, &newton.scaled_tensor));
        }
        sinkhorn_runs.push(r);
    }
    outcome(
        failures == 0 && worst <= 1e-6,
        format!("max rel diff Newton vs Sinkhorn {:.1e}, {} unconverged", worst, failures),
    )
}

fn reduced_value(b: &SparseTensor, s: &TargetSums, y: &ScalingVectors) -> f64 {
    let linear: f64 = s.stacked().iter().zip(y.as_slice()).map(|(a, b)| a * b).sum();
    objective(b, y).unwrap() - linear
}

fn criterion_7() -> Outcome {
    let mut rng = SplitMix64::new(0x7007);
    let (mut worst_g, mut worst_h) = (0.0f64, 0.0f64);
    let h = 1e-5;
    for _ in 0..10 {
        let dims: Vec<usize> = (0..rng.range(2, 3)).map(|_| rng.range(2, 4)).collect();
        let (b, s) = generate_feasible(&dims, 0.7, rng.next_u64()).unwrap();
        let frame = build_frame(&b, &s).unwrap();
        let p = frame.dim(Subspace::Vperp);
        let phi = |c: &[f64]| reduced_value(&b, &s, &frame.embed(Subspace::Vperp, c).unwrap());
        for _ in 0..20 {
            let c: Vec<f64> = (0..p).map(|_| rng.uniform(-1.0, 1.0)).collect();
            let (g, hess) = gradient_hessian_reduced(&b, &s, &frame, &c).unwrap();
            let g_scale = g.amax().max(1.0);
            let h_scale = hess.amax().max(1.0);
            for i in 0..p {
                let mut cp = c.clone();
                let mut cm = c.clone();
                cp[i] += h;
                cm[i] -= h;
                let fd = (phi(&cp) - phi(&cm)) / (2.0 * h);
                worst_g = worst_g.max((fd - g[i]).abs() / g_scale);
                let (gp, _) = gradient_hessian_reduced(&b, &s, &frame, &cp).unwrap();
                let (gm, _) = gradient_hessian_reduced(&b, &s, &frame, &cm).unwrap();
                for j in 0..p {
                    let fd = (gp[j] - gm[j]) / (2.0 * h);
                    worst_h = worst_h.max((fd - hess[(j, i)]).abs() / h_scale);
                }
            }
        }
    }
    outcome(
        worst_g <= 1e-6 && worst_h <= 1e-5,
        format!("200 points, gradient rel err {:.1e}, Hessian rel err {:.1e}", worst_g, worst_h),
    )
}

/// A d-mode pattern that is a union of two diagonal blocks, each full.
fn block_instance(rng: &mut SplitMix64) -> (SparseTensor, TargetSums) {
    let d = rng.range(2, 3);
    let dims: Vec<usize> = (0..d).map(|_| rng.range(2, 4)).collect();
    let cuts: Vec<usize> = dims.iter().map(|&m| rng.range(1, m - 1)).collect();
    let total: usize = dims.iter().product();
    let mut entries = Vec::new();
    for flat in 0..total {
        let mut idx = vec![0; d];
        let mut rem = flat;
        for k in (0..d).rev() {
            idx[k] = rem % dims[k];
            rem /= dims[k];
        }
        let lower: Vec<bool> = idx.iter().zip(&cuts).map(|(i, c)| i < c).collect();
        if lower.iter().all(|&l| l) || lower.iter().all(|&l| !l) {
            entries.push((idx, rng.uniform(0.5, 1.5)));
        }
    }
    let b = SparseTensor::from_entries(dims, entries).unwrap();
    let s = TargetSums::from_tensor(&b).unwrap();
    (b, s)
}

fn criterion_8() -> Outcome {
    let mut rng = SplitMix64::new(0x8008);
    let mut worst = 0.0f64;
    let mut trivial = 0;
    for _ in 0..20 {
        let (b, s) = block_instance(&mut rng);
        let frame = build_frame(&b, &s).unwrap();
        let dim_u = frame.dim(Subspace::U);
        let dim_v = frame.dim(Subspace::V);
        if dim_v == 0 {
            trivial += 1;
            continue;
        }
        let cu: Vec<f64> = (0..dim_u).map(|_| rng.uniform(-1.0, 1.0)).collect();
        let y = frame.embed(Subspace::U, &cu).unwrap();
        let fy = objective(&b, &y).unwrap();
        for _ in 0..10 {
            let cv: Vec<f64> = (0..dim_v).map(|_| rng.uniform(-5.0, 5.0)).collect();
            let v = frame.embed(Subspace::V, &cv).unwrap();
            let fyv = objective(&b, &y.add(&v).unwrap()).unwrap();
            worst = worst.max((fyv - fy).abs() / fy);
        }
    }
    outcome(
        trivial == 0 && worst <= 1e-9,
        format!("20 block instances, max |f(y+v)-f(y)|/f(y) {:.1e}, {} with trivial V", worst, trivial),
    )
}

fn criterion_9(suite: &Suite5, sinkhorn_runs: &[ScalingResult]) -> Outcome {
    let n = suite.runs.len();
    let (mut quadratic, mut vacuous) = (0, 0);
    let mut worst_c = 0.0f64;
    for run in &suite.runs {
        // No pair inside the window means the residual jumped straight past it.
        let c = quadratic_constant(&run.trace);
        if run.status == Status::Converged && c.is_none_or(|c| c <= QUADRATIC_C_BOUND) {
            quadratic += 1;
        }
        vacuous += usize::from(c.is_none());
        worst_c = worst_c.max(c.unwrap_or(0.0));
    }
    let sinkhorn_quadratic = sinkhorn_runs
        .iter()
        .filter(|r| quadratic_constant(&r.trace).is_some_and(|c| c <= QUADRATIC_C_BOUND))
        .count();
    println!(
        "  info: same bound met by {}/{} Sinkhorn traces; {} Newton traces skipped the window",
        sinkhorn_quadratic,
        sinkhorn_runs.len(),
        vacuous
    );
    let mut faster = 0;
    let mut ratios = Vec::new();
    for (nw, sk) in suite.runs.iter().zip(sinkhorn_runs) {
        if let (Some(a), Some(b)) = (iterations_to(&nw.trace, 1e-6), iterations_to(&sk.trace, 1e-6)) {
            let ratio = b as f64 / a.max(1) as f64;
            ratios.push(ratio);
            if ratio >= 3.0 {
                faster += 1;
            }
        }
    }
    ratios.sort_by(f64::total_cmp);
    let median = ratios.get(ratios.len() / 2).copied().unwrap_or(f64::NAN);
    println!(
        "  info: Sinkhorn needs >= 3x Newton iterations to 1e-6 on {}/{} instances (median ratio {:.1})",
        faster, n, median
    );
    outcome(
        quadratic * 10 >= n * 9,
        format!("{}/{} Newton traces quadratic (C <= {:.0e}, worst C {:.1e})", quadratic, n, QUADRATIC_C_BOUND, worst_c),
    )
}

fn criterion_10(certs: &mut Certificates) -> Outcome {
    let start = Instant::now();
    let mut rng = SplitMix64::new(0xA00A);
    let (mut diverged, mut converged) = (0, 0);
    for i in 0..50 {
        let size = 2 + i % 4;
        let (b, s) = generate_infeasible_2mode(size, rng.next_u64()).unwrap();
        let r = newton_scale(&b, &s, &SolverOptions::default()).unwrap();
        match r.status {
            Status::Converged => converged += 1,
            Status::Diverged => {
                certs.record(&b, &s, r.certificate.as_ref());
                if r.certificate.as_ref().is_some_and(|y| verify_certificate(&b, &s, y)) {
                    diverged += 1;
                }
            }
            Status::MaxItersExceeded => {}
        }
    }
    let elapsed = start.elapsed();
    outcome(
        diverged == 50 && converged == 0 && within(elapsed, 30.0),
        format!("{}/50 Diverged with certificate, {} Converged, {:.2}s", diverged, converged, elapsed.as_secs_f64()),
    )
}

fn main() -> ExitCode {
    let mut certs = Certificates::default();
    let mut results = Vec::new();
    results.push(("1 exact symmetric instances", criterion_1()));
    results.push(("2 rank-one closed form", criterion_2()));
    results.push(("3 feasibility vs max-flow", criterion_3(&mut certs)));
    let (c5, suite) = criterion_5();
    let mut sinkhorn_runs = Vec::new();
    let c6 = criterion_6(&suite, &mut sinkhorn_runs);
    results.push(("5 uniqueness from random starts", c5));
    results.push(("6 Newton vs Sinkhorn", c6));
    results.push(("7 gradient and Hessian", criterion_7()));
    results.push(("8 f constant along V", criterion_8()));
    results.push(("9 quadratic convergence", criterion_9(&suite, &sinkhorn_runs)));
    results.push(("10 divergence detection", criterion_10(&mut certs)));
    for seed in 0..20 {
        let (b, s) = generate_infeasible_2mode(2 + (seed as usize) % 4, seed).unwrap();
        let report = check_scalability(&b, &s).unwrap();
        if report.verdict == Verdict::Infeasible {
            certs.record(&b, &s, report.certificate.as_ref());
        }
    }
    results.push(("4 certificate soundness", criterion_4(&certs)));
    results.sort_by_key(|(name, _)| name.split(' ').next().unwrap().parse::<u32>().unwrap());

    let mut failed = 0;
    for (name, o) in &results {
        println!("criterion {}: {} ({})", name, if o.pass { "PASS" } else { "FAIL" }, o.detail);
        if !o.pass {
            failed += 1;
        }
    }
    println!("{} passed, {} failed", results.len() - failed, failed);
    if failed == 0 {
        ExitCode::SUCCESS
    } else {
        ExitCode::FAILURE
    }
}
