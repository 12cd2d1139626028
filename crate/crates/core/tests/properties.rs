use proptest::prelude::*;

use slicescale::feasibility::{check_scalability, verify_certificate, Verdict};
use slicescale::generate::{generate_feasible, generate_infeasible_2mode};
use slicescale::io::{parse_tensor, parse_targets, write_targets, write_tensor};
use slicescale::maxflow::pattern_feasible_maxflow;
use slicescale::newton::{newton_scale, newton_scale_from, objective, SolverOptions, Status};
use slicescale::sinkhorn::sinkhorn_scale;
use slicescale::subspace::{build_frame, Subspace};
use slicescale::tensor::residual;
use slicescale::{ScalingVectors, SparseTensor, TargetSums};

fn dims_strategy() -> impl Strategy<Value = Vec<usize>> {
    prop::collection::vec(1usize..5, 2..4)
}

/// Tensor with entries in `[0.1, 10]` on a random support.
fn tensor_strategy() -> impl Strategy<Value = SparseTensor> {
    dims_strategy().prop_flat_map(|dims| {
        let n: usize = dims.iter().product();
        prop::collection::vec(prop::option::weighted(0.7, 0.1f64..10.0), n)
            .prop_filter_map("empty tensor", move |cells| {
                let data: Vec<f64> = cells.into_iter().map(|c| c.unwrap_or(0.0)).collect();
                SparseTensor::from_dense(dims.clone(), &data).ok().filter(|t| t.nnz() > 0)
            })
    })
}

fn scaling_for(dims: &[usize], seed: &[f64]) -> ScalingVectors {
    let n: usize = dims.iter().sum();
    ScalingVectors::new(dims.to_vec(), (0..n).map(|i| seed[i % seed.len()]).collect()).unwrap()
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn mode_totals_agree(t in tensor_strategy()) {
        let sums = t.all_slice_sums();
        let totals: Vec<f64> = sums.iter().map(|m| m.iter().sum()).collect();
        for w in totals.windows(2) {
            prop_assert!((w[0] - w[1]).abs() <= 1e-12 * w[0].abs().max(1.0));
        }
    }

    #[test]
    fn scaling_preserves_support_and_composes(
        t in tensor_strategy(),
        a in prop::collection::vec(-3.0f64..3.0, 1..8),
        b in prop::collection::vec(-3.0f64..3.0, 1..8),
    ) {
        let x = scaling_for(t.dims(), &a);
        let y = scaling_for(t.dims(), &b);
        let once = t.apply_scaling(&x.add(&y).unwrap()).unwrap();
        let twice = t.apply_scaling(&x).unwrap().apply_scaling(&y).unwrap();
        prop_assert!(once.same_zero_pattern(&t).unwrap());
        for (u, v) in once.values().iter().zip(twice.values()) {
            prop_assert!((u - v).abs() <= 1e-12 * v);
        }
    }

    #[test]
    fn residual_vanishes_on_own_sums(t in tensor_strategy()) {
        prop_assume!(t.zero_slices().is_empty());
        let s = TargetSums::from_tensor(&t).unwrap();
        prop_assert_eq!(residual(&t, &s).unwrap(), 0.0);
    }

    #[test]
    fn text_format_round_trips(t in tensor_strategy()) {
        prop_assert_eq!(parse_tensor(&write_tensor(&t)).unwrap(), t.clone());
        if t.zero_slices().is_empty() {
            let s = TargetSums::from_tensor(&t).unwrap();
            prop_assert_eq!(parse_targets(&write_targets(&s)).unwrap(), s);
        }
    }
}

#[test]
fn maxflow_agrees_with_lp_on_random_patterns() {
    use slicescale::generate::{sample_pattern, SplitMix64};
    let mut rng = SplitMix64::new(99);
    let mut infeasible = 0;
    for _ in 0..100 {
        let pattern = sample_pattern(&[4, 4], 0.45, &mut rng).unwrap();
        let b = SparseTensor::from_entries(vec![4, 4], pattern.into_iter().map(|c| (c, 1.0)).collect()).unwrap();
        let rows: Vec<f64> = (0..4).map(|_| rng.uniform(0.5, 1.5)).collect();
        let cols: Vec<f64> = (0..4).map(|_| rng.uniform(0.5, 1.5)).collect();
        let (rt, ct): (f64, f64) = (rows.iter().sum(), cols.iter().sum());
        let s = TargetSums::new(vec![rows, cols.iter().map(|c| c * rt / ct).collect()]).unwrap();
        let lp = check_scalability(&b, &s).unwrap();
        assert_eq!(lp.verdict == Verdict::Feasible, pattern_feasible_maxflow(&b, &s).unwrap());
        if lp.verdict == Verdict::Infeasible {
            infeasible += 1;
            assert!(verify_certificate(&b, &s, lp.certificate.as_ref().unwrap()));
        }
    }
    assert!(infeasible > 0 && infeasible < 100);
}

#[test]
fn verdict_ignores_target_scale_and_mode_order() {
    for seed in 0..10 {
        let (b, s) = generate_infeasible_2mode(3, seed).unwrap();
        let base = check_scalability(&b, &s).unwrap().verdict;
        assert_eq!(base, Verdict::Infeasible);
        assert_eq!(check_scalability(&b, &s.scaled(7.5).unwrap()).unwrap().verdict, base);
        let bp = b.permute_modes(&[1, 0]).unwrap();
        let sp = s.permute_modes(&[1, 0]).unwrap();
        assert_eq!(check_scalability(&bp, &sp).unwrap().verdict, base);
    }
}

#[test]
fn full_support_is_always_feasible() {
    use slicescale::generate::SplitMix64;
    let mut rng = SplitMix64::new(5);
    for _ in 0..20 {
        let dims: Vec<usize> = (0..rng.range(2, 3)).map(|_| rng.range(1, 4)).collect();
        let b = SparseTensor::ones(dims.clone()).unwrap();
        let mut modes: Vec<Vec<f64>> = dims.iter().map(|&m| (0..m).map(|_| rng.uniform(0.1, 3.0)).collect()).collect();
        let total: f64 = modes[0].iter().sum();
        for m in modes.iter_mut().skip(1) {
            let t: f64 = m.iter().sum();
            m.iter_mut().for_each(|v| *v *= total / t);
        }
        let s = TargetSums::new(modes).unwrap();
        assert_eq!(check_scalability(&b, &s).unwrap().verdict, Verdict::Feasible);
    }
}

#[test]
fn generated_instances_are_feasible_and_solvable() {
    for seed in 0..15 {
        let dims = [2 + seed as usize % 3, 3, 2 + seed as usize % 2];
        let (b, s) = generate_feasible(&dims, 0.6, seed).unwrap();
        assert!(b.validate_no_zero_slice().is_ok());
        assert!(s.check_compatibility(1e-9).is_ok());
        assert_eq!(check_scalability(&b, &s).unwrap().verdict, Verdict::Feasible);
        let r = newton_scale(&b, &s, &SolverOptions::default()).unwrap();
        assert_eq!(r.status, Status::Converged);
        assert!(r.residual <= 1e-10);
        assert!(r.scaled_tensor.same_zero_pattern(&b).unwrap());
    }
}

#[test]
fn newton_descends_monotonically() {
    for seed in 0..10 {
        let (b, s) = generate_feasible(&[4, 3, 3], 0.7, seed).unwrap();
        let frame = build_frame(&b, &s).unwrap();
        let start = vec![2.0; frame.dim(Subspace::Vperp)];
        let r = newton_scale_from(&b, &s, &SolverOptions::default(), &start).unwrap();
        assert_eq!(r.status, Status::Converged);
        for w in r.trace.windows(2) {
            assert!(w[1].objective <= w[0].objective + 1e-12 * w[0].objective.abs().max(1.0));
        }
    }
}

#[test]
fn objective_is_constant_along_v() {
    // Two full diagonal blocks: V contains the direction that raises one block
    // in mode 1 and lowers it in mode 2.
    let b = SparseTensor::from_rows(&[&[1.0, 2.0, 0.0], &[3.0, 1.0, 0.0], &[0.0, 0.0, 5.0]]).unwrap();
    let s = TargetSums::from_tensor(&b).unwrap();
    let frame = build_frame(&b, &s).unwrap();
    assert_eq!(frame.dim(Subspace::V), 1);
    let y = ScalingVectors::from_modes(vec![vec![0.3, -0.2, 0.1], vec![0.0, 0.4, -0.5]]);
    let f0 = objective(&b, &y).unwrap();
    for t in [-10.0, -1.0, 0.5, 4.0] {
        let v = frame.embed(Subspace::V, &[t]).unwrap();
        assert!((objective(&b, &y.add(&v).unwrap()).unwrap() - f0).abs() <= 1e-12 * f0);
    }
}

#[test]
fn newton_and_sinkhorn_agree_on_sparse_matrix() {
    let (b, s) = generate_feasible(&[6, 5], 0.5, 3).unwrap();
    let n = newton_scale(&b, &s, &SolverOptions::default()).unwrap();
    let k = sinkhorn_scale(&b, &s, &SolverOptions { residual_tol: 1e-11, max_iters: 100_000, ..Default::default() }).unwrap();
    assert_eq!(n.status, Status::Converged);
    assert_eq!(k.status, Status::Converged);
    for (u, v) in n.scaled_tensor.values().iter().zip(k.scaled_tensor.values()) {
        assert!((u - v).abs() <= 1e-8 * v);
    }
}
