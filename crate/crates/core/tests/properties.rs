mod common;

use proptest::prelude::*;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use common::{brute_force_lmo_value, oracle_local_gradient};
use dstofw::constraint::{contains_l1, lmo_l1, ConstraintSet, L1Ball};
use dstofw::graph::{build_topology, metropolis_weights, TopologyKind};
use dstofw::metrics::{fw_gap, fw_gap_l1};
use dstofw::problem::{
    parse_libsvm, partition, LibsvmOptions, LocalDataset, Objective, PartitionStrategy, Sample, SparseVector,
};
use dstofw::sampling::{draw_sample_set, SamplingSchedule, SizeRule};
use dstofw::solvers::StepSchedule;

fn direction(max_dim: usize) -> impl Strategy<Value = Vec<f64>> {
    prop::collection::vec(-1e3..1e3_f64, 1..=max_dim)
}

fn objective() -> impl Strategy<Value = Objective> {
    prop_oneof![Just(Objective::ConvexLogistic), Just(Objective::NonconvexSigmoid)]
}

fn sample_strategy(dim: usize) -> impl Strategy<Value = Sample> {
    (prop::collection::vec(-3.0..3.0_f64, dim), any::<bool>())
        .prop_map(|(a, pos)| Sample::new(SparseVector::from_dense(&a), if pos { 1.0 } else { -1.0 }))
}

/// A point of the l1 ball of the given radius with dimension `dim`.
fn feasible_point(dim: usize, radius: f64) -> impl Strategy<Value = Vec<f64>> {
    (prop::collection::vec(-1.0..1.0_f64, dim), 0.0..=1.0_f64).prop_map(move |(v, t)| {
        let norm: f64 = v.iter().map(|x| x.abs()).sum();
        if norm == 0.0 {
            v
        } else {
            v.iter().map(|x| x * t * radius / norm).collect()
        }
    })
}

proptest! {
    #[test]
    fn lmo_attains_vertex_minimum(g in direction(12), radius in 0.01..100.0_f64) {
        let value = lmo_l1(&g, radius).unwrap().dot(&g);
        prop_assert!((value - brute_force_lmo_value(&g, radius)).abs() <= 1e-12 * (1.0 + value.abs()));
    }

    #[test]
    fn lmo_ignores_positive_scaling(g in direction(12), c in 1e-3..1e3_f64, radius in 0.1..10.0_f64) {
        let scaled: Vec<f64> = g.iter().map(|v| v * c).collect();
        prop_assert_eq!(lmo_l1(&g, radius).unwrap(), lmo_l1(&scaled, radius).unwrap());
    }

    #[test]
    fn fw_step_stays_feasible(
        (x, g) in (1usize..10).prop_flat_map(|d| (feasible_point(d, 5.0), prop::collection::vec(-10.0..10.0_f64, d))),
        gamma in 0.0..=1.0_f64,
    ) {
        let set = L1Ball::new(5.0, x.len()).unwrap();
        let vertex = set.lmo(&g).unwrap();
        let mut next = vec![0.0; x.len()];
        vertex.combine_into(&x, gamma, &mut next);
        prop_assert!(contains_l1(&next, 5.0, 1e-9));
        prop_assert!(set.contains(&vertex.to_dense(x.len()), 0.0));
    }

    #[test]
    fn fw_gap_closed_form(
        (x, g) in (1usize..10).prop_flat_map(|d| (feasible_point(d, 3.0), prop::collection::vec(-10.0..10.0_f64, d))),
    ) {
        let set = L1Ball::new(3.0, x.len()).unwrap();
        let inner: f64 = g.iter().zip(&x).map(|(a, b)| a * b).sum();
        let sup = g.iter().fold(0.0_f64, |m, v| m.max(v.abs()));
        let closed = inner + 3.0 * sup;
        let via_set = fw_gap(&x, &g, &set).unwrap();
        prop_assert!((via_set - closed).abs() <= 1e-9 * (1.0 + closed.abs()));
        prop_assert!((fw_gap_l1(&x, &g, 3.0) - closed).abs() <= 1e-9 * (1.0 + closed.abs()));
        prop_assert!(via_set >= -1e-9);
    }

    #[test]
    fn metropolis_matrix_is_doubly_stochastic_and_contracts(
        m in 2usize..12,
        p in 0.3..1.0_f64,
        seed in 0u64..1000,
        v in prop::collection::vec(-5.0..5.0_f64, 12),
    ) {
        let topology = build_topology(&TopologyKind::ErdosRenyi { p }, m, seed).unwrap();
        let w = metropolis_weights(&topology).unwrap();
        let matrix = w.matrix();
        for i in 0..m {
            prop_assert!((matrix.row(i).iter().sum::<f64>() - 1.0).abs() <= 1e-12);
            for j in 0..m {
                prop_assert!(matrix.get(i, j) >= 0.0);
                prop_assert_eq!(matrix.get(i, j), matrix.get(j, i));
                if i != j && !topology.has_edge(i, j) {
                    prop_assert_eq!(matrix.get(i, j), 0.0);
                }
            }
        }
        prop_assert!(w.lambda2() < 1.0);

        // Mixing preserves the mean and shrinks the deviation from it by lambda2.
        let x = &v[..m];
        let mut mixed = vec![0.0; m];
        matrix.mul_vec(x, &mut mixed);
        let mean = x.iter().sum::<f64>() / m as f64;
        prop_assert!((mixed.iter().sum::<f64>() / m as f64 - mean).abs() <= 1e-12);
        let dev = |y: &[f64]| y.iter().map(|a| (a - mean).powi(2)).sum::<f64>().sqrt();
        prop_assert!(dev(&mixed) <= w.lambda2() * dev(x) + 1e-9);
    }

    #[test]
    fn gradient_matches_finite_differences(
        s in sample_strategy(4),
        x in prop::collection::vec(-2.0..2.0_f64, 4),
        obj in objective(),
    ) {
        let analytic = s.gradient(&x, obj);
        let h = 1e-6;
        for i in 0..4 {
            let mut hi = x.clone();
            let mut lo = x.clone();
            hi[i] += h;
            lo[i] -= h;
            let numeric = (s.loss(&hi, obj) - s.loss(&lo, obj)) / (2.0 * h);
            prop_assert!((numeric - analytic[i]).abs() <= 1e-6 * (1.0 + numeric.abs()), "coord {}: {} vs {}", i, numeric, analytic[i]);
        }
    }

    #[test]
    fn local_gradient_matches_textbook_formula(
        samples in prop::collection::vec(sample_strategy(5), 1..20),
        x in prop::collection::vec(-2.0..2.0_f64, 5),
        obj in objective(),
    ) {
        let local = LocalDataset::new(samples, 5).unwrap();
        let mut ifo = 0;
        let fast = local.full_gradient(&x, obj, &mut ifo);
        let slow = oracle_local_gradient(&local, &x, obj);
        prop_assert_eq!(ifo, local.len() as u64);
        for (a, b) in fast.iter().zip(&slow) {
            prop_assert!((a - b).abs() <= 1e-12);
        }
    }

    #[test]
    fn logistic_loss_is_midpoint_convex(
        samples in prop::collection::vec(sample_strategy(3), 1..15),
        x in prop::collection::vec(-4.0..4.0_f64, 3),
        y in prop::collection::vec(-4.0..4.0_f64, 3),
    ) {
        let local = LocalDataset::new(samples, 3).unwrap();
        let mid: Vec<f64> = x.iter().zip(&y).map(|(a, b)| 0.5 * (a + b)).collect();
        let mut ifo = 0;
        let f = |p: &[f64], ifo: &mut u64| local.loss(p, Objective::ConvexLogistic, ifo);
        let (fx, fy, fm) = (f(&x, &mut ifo), f(&y, &mut ifo), f(&mid, &mut ifo));
        prop_assert!(fm <= 0.5 * (fx + fy) + 1e-12);
    }

    #[test]
    fn partition_conserves_samples(
        n in 1usize..60,
        m in 1usize..8,
        contiguous in any::<bool>(),
        equalize in any::<bool>(),
        seed in any::<u64>(),
    ) {
        prop_assume!(n >= m);
        // Each sample is tagged by its first coordinate.
        let samples: Vec<Sample> = (0..n).map(|i| Sample::new(SparseVector::from_dense(&[i as f64 + 1.0]), 1.0)).collect();
        let strategy = if contiguous { PartitionStrategy::Contiguous } else { PartitionStrategy::RoundRobin };
        let locals = partition(&samples, 1, m, strategy, equalize, seed).unwrap();
        prop_assert_eq!(locals.len(), m);
        let sizes: Vec<usize> = locals.iter().map(|l| l.len()).collect();
        let (lo, hi) = (*sizes.iter().min().unwrap(), *sizes.iter().max().unwrap());
        prop_assert!(hi - lo <= 1);
        let total: usize = sizes.iter().sum();
        if equalize {
            prop_assert_eq!(lo, hi);
            prop_assert_eq!(total, m * (n / m));
        } else {
            prop_assert_eq!(total, n);
        }
        let mut tags: Vec<u64> = locals
            .iter()
            .flat_map(|l| l.samples().iter().map(|s| s.features.iter().next().unwrap().1 as u64))
            .collect();
        tags.sort_unstable();
        tags.dedup();
        prop_assert_eq!(tags.len(), total);
    }

    #[test]
    fn sampling_rule_holds_for_any_schedule(
        q in 2usize..25,
        kind in 0u8..4,
        alpha in 0.05..=1.0_f64,
        scale in 0.1..=1.0_f64,
        rule_direct in any::<bool>(),
    ) {
        let step = match kind {
            0 => StepSchedule::Harmonic,
            1 => StepSchedule::nonconvex(0.5),
            2 => StepSchedule::nonconvex(1.0),
            _ => StepSchedule::Polynomial { scale, alpha },
        };
        let rule = if rule_direct { SizeRule::Direct } else { SizeRule::Backward };
        let sched = SamplingSchedule::new(q, usize::MAX, step, rule).unwrap();
        for k in 1..=6 * q {
            let size = sched.rule_size(k).unwrap();
            if (k + 1) % q == 0 {
                prop_assert_eq!(size, (q * q) as u64);
                continue;
            }
            let next = sched.rule_size(k + 1).unwrap();
            prop_assert!(next <= size, "k={}: {} then {}", k, size, next);
            if rule == SizeRule::Backward {
                let lhs = step.gamma(k) / (size as f64).sqrt();
                let rhs = step.gamma(k + 1) / (next as f64).sqrt();
                prop_assert!(lhs <= rhs * (1.0 + 1e-12), "k={}: {} > {}", k, lhs, rhs);
            }
        }
    }

    #[test]
    fn capped_sizes_stay_in_range(q in 2usize..20, n_local in 1usize..200, full in any::<bool>()) {
        let sched = SamplingSchedule::new(q, n_local, StepSchedule::Harmonic, SizeRule::Backward).unwrap().with_full_batch(full);
        for k in 1..=5 * q {
            if sched.is_refresh(k) {
                prop_assert!(sched.sample_size(k).is_err());
                continue;
            }
            let size = sched.sample_size(k).unwrap();
            prop_assert!((1..=n_local).contains(&size));
            let expected = if full { n_local } else { sched.rule_size(k).unwrap().min(n_local as u64) as usize };
            prop_assert_eq!(size, expected);
        }
    }

    #[test]
    fn drawn_sets_are_distinct_and_in_range(n in 1usize..300, frac in 0.0..=1.0_f64, seed in any::<u64>()) {
        let size = ((n as f64 * frac).ceil() as usize).clamp(1, n);
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut picks = draw_sample_set(&mut rng, n, size).unwrap();
        prop_assert_eq!(picks.len(), size);
        prop_assert!(picks.iter().all(|&j| j < n));
        picks.sort_unstable();
        picks.dedup();
        prop_assert_eq!(picks.len(), size);
    }

    #[test]
    fn libsvm_round_trip(samples in prop::collection::vec(sample_strategy(6), 1..10)) {
        let mut text = String::new();
        for s in &samples {
            text.push_str(if s.label > 0.0 { "+1" } else { "-1" });
            for (i, v) in s.features.iter() {
                text.push_str(&format!(" {}:{v:e}", i + 1));
            }
            text.push('\n');
        }
        let parsed = parse_libsvm(text.as_bytes(), &LibsvmOptions { dim: Some(6), ..Default::default() }).unwrap();
        prop_assert_eq!(parsed.dim, 6);
        prop_assert_eq!(parsed.samples, samples);
    }
}
