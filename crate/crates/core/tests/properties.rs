use kuramoto_pin_core::dynamics::{max_storage_increase, simulate, SimConfig};
use kuramoto_pin_core::feasibility::{
    lp_feasibility_oracle, lp_feasibility_pinned, sample_initial_phases, EdgeInterval,
};
use kuramoto_pin_core::graph::{generate_ensemble, random_frequencies, reduce, EnsembleSpec, GraphKind};
use kuramoto_pin_core::select::{
    choose_alpha, run_algorithm, select_optimal, Algorithm, QEstimatorConfig, QEvaluator, SphereSamples,
};
use kuramoto_pin_core::spectral::{certifies, coupling_matrices, dtw_norm, hetero_threshold, principal_submatrix};
use kuramoto_pin_core::{InputSet, NaturalFrequencies, SignedDigraph};
use nalgebra::DVector;
use proptest::prelude::*;

fn graph_strategy(max_n: usize) -> impl Strategy<Value = SignedDigraph> {
    (0..4usize, 3..=max_n, 0.0..0.5f64, any::<u64>()).prop_map(|(k, n, neg, seed)| {
        let spec = EnsembleSpec::new(GraphKind::ALL[k], n).with_neg_fraction(neg);
        generate_ensemble(&spec, seed).expect("valid ensemble")
    })
}

fn subset(n: usize, mask: u32) -> InputSet {
    InputSet::new(n, (0..n).filter(|i| mask & (1 << i) != 0)).unwrap()
}

fn retained(g: &SignedDigraph, s: &InputSet) -> Vec<usize> {
    (0..g.m()).filter(|&e| !s.contains(g.edge(e).dst)).collect()
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn reduced_r_is_a_principal_submatrix(g in graph_strategy(9), mask in any::<u32>()) {
        let s = subset(g.n(), mask);
        let (_, r) = coupling_matrices(&g);
        let rs = reduce(&g, &NaturalFrequencies::zeros(g.n()), &s);
        let sub = principal_submatrix(&r, &retained(&g, &s));
        prop_assert!((rs.r_s - sub).abs().max() <= 1e-12);
    }

    #[test]
    fn pinning_more_never_lowers_lambda(g in graph_strategy(9), mask in any::<u32>(), extra in 0usize..9) {
        let s = subset(g.n(), mask);
        let bigger = s.with(extra % g.n());
        let w = NaturalFrequencies::zeros(g.n());
        prop_assert!(reduce(&g, &w, &bigger).lambda_min() >= reduce(&g, &w, &s).lambda_min() - 1e-10);
    }

    #[test]
    fn hetero_threshold_dominates(g in graph_strategy(8), mask in any::<u32>(), seed in any::<u64>()) {
        let w = random_frequencies(g.n(), (0.0, 2.0), seed);
        let rs = reduce(&g, &w, &subset(g.n(), mask));
        prop_assert!(dtw_norm(&rs) <= hetero_threshold(&g, &w) + 1e-12);
    }

    #[test]
    fn q_is_monotone_with_shared_samples(g in graph_strategy(7), a in any::<u32>(), b in any::<u32>()) {
        let (_, r) = coupling_matrices(&g);
        let delta = 0.5;
        let samples = SphereSamples::draw(r.nrows(), 300, 5);
        let eval = QEvaluator::new(&r, &samples, choose_alpha(&r, delta), delta);
        let small: Vec<usize> = (0..g.m()).filter(|e| a & (1 << (e % 32)) != 0).collect();
        let mut big = small.clone();
        big.extend((0..g.m()).filter(|e| b & (1 << (e % 32)) != 0 && !small.contains(e)));
        prop_assert!(eval.estimate(&big).value >= eval.estimate(&small).value - 1e-12);
    }

    #[test]
    fn q_has_diminishing_returns(g in graph_strategy(7), a in any::<u32>(), b in any::<u32>(), v in 0usize..64) {
        let (_, r) = coupling_matrices(&g);
        let delta = 0.5;
        let samples = SphereSamples::draw(r.nrows(), 400, 6);
        let eval = QEvaluator::new(&r, &samples, choose_alpha(&r, delta), delta);
        let s: Vec<usize> = (0..g.m()).filter(|e| a & (1 << (e % 32)) != 0).collect();
        let mut t = s.clone();
        t.extend((0..g.m()).filter(|e| b & (1 << (e % 32)) != 0 && !s.contains(e)));
        let e = v % g.m();
        let with = |set: &[usize]| {
            let mut x = set.to_vec();
            if !x.contains(&e) {
                x.push(e);
            }
            eval.estimate(&x)
        };
        let (qs, qt) = (eval.estimate(&s), eval.estimate(&t));
        let (gain_s, gain_t) = (with(&s).value - qs.value, with(&t).value - qt.value);
        prop_assert!(gain_s >= gain_t - 2.0 * qs.stderr.max(qt.stderr) - 1e-12);
    }

    #[test]
    fn oracle_is_relabel_invariant(g in graph_strategy(8), seed in any::<u64>()) {
        use rand::seq::SliceRandom;
        let mut perm: Vec<usize> = (0..g.n()).collect();
        perm.shuffle(&mut kuramoto_pin_core::seed::rng(seed));
        let h = g.relabeled(&perm).unwrap();
        let a = lp_feasibility_oracle(&g, 0.05).unwrap();
        let b = lp_feasibility_oracle(&h, 0.05).unwrap();
        prop_assert_eq!(a.feasible, b.feasible);
        prop_assert!((a.max_slack - b.max_slack).abs() < 1e-6 || a.max_slack == b.max_slack);
        let (_, r1) = coupling_matrices(&g);
        let (_, r2) = coupling_matrices(&h);
        let l1 = kuramoto_pin_core::spectral::lambda_min(&r1).unwrap();
        let l2 = kuramoto_pin_core::spectral::lambda_min(&r2).unwrap();
        prop_assert!((l1 - l2).abs() < 1e-9);
    }

    #[test]
    fn witnesses_are_sound(g in graph_strategy(9), mask in any::<u32>()) {
        let s = subset(g.n(), mask);
        let rep = lp_feasibility_pinned(&g, &s, 0.05).unwrap();
        if let Some(theta) = rep.witness {
            for e in retained(&g, &s) {
                let edge = g.edge(e);
                let iv = EdgeInterval::for_weight(e, edge.weight);
                prop_assert!(iv.slack(theta[edge.dst] - theta[edge.src]) >= 0.05 - 1e-9);
            }
            for v in s.iter() {
                prop_assert_eq!(theta[v], 0.0);
            }
        }
        // pinning can only remove constraints
        if lp_feasibility_oracle(&g, 0.05).unwrap().feasible {
            prop_assert!(lp_feasibility_pinned(&g, &InputSet::empty(), 0.05).unwrap().feasible);
        }
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(24))]

    #[test]
    fn every_algorithm_certifies_and_optimal_is_smallest(g in graph_strategy(7), seed in any::<u64>(), hetero in any::<bool>()) {
        let w = if hetero { random_frequencies(g.n(), (0.0, 2.0), seed) } else { NaturalFrequencies::zeros(g.n()) };
        let delta = if hetero { hetero_threshold(&g, &w) } else { 0.0 };
        let cfg = QEstimatorConfig { sample_count: 300, ..QEstimatorConfig::with_seed(seed) };
        let opt = select_optimal(&g, &w, delta, 16).unwrap();
        let (_, r) = coupling_matrices(&g);
        for alg in Algorithm::ALL {
            let res = run_algorithm(alg, &g, &w, delta, &cfg).unwrap();
            prop_assert!(res.terminated_ok);
            prop_assert!(res.num_inputs() >= opt.num_inputs());
            let lam = kuramoto_pin_core::spectral::lambda_min(&principal_submatrix(&r, &retained(&g, &res.inputs))).unwrap();
            prop_assert!(certifies(lam, delta));
            if alg == Algorithm::Greedy {
                prop_assert!(res.iterations.windows(2).all(|w| w[1].lambda_min >= w[0].lambda_min - 1e-10));
            }
        }
    }

    #[test]
    fn trajectories_are_consistent(g in graph_strategy(6), mask in any::<u32>(), seed in any::<u64>()) {
        let s = subset(g.n(), mask);
        let w = random_frequencies(g.n(), (0.0, 2.0), seed);
        let Ok(theta0) = sample_initial_phases(&g, &s, seed, 0.05) else { return Ok(()) };
        let cfg = SimConfig { horizon_t: 2.0, ..SimConfig::default() };
        let tr = simulate(&g, &w, &s, &theta0, &cfg).unwrap();
        let keep = retained(&g, &s);
        for (th, z) in tr.theta.iter().zip(&tr.z) {
            for v in s.iter() {
                prop_assert_eq!(th[v], 0.0);
            }
            for (k, &e) in keep.iter().enumerate() {
                let edge = g.edge(e);
                prop_assert!((z[k] - (th[edge.dst] - th[edge.src])).abs() <= 1e-10);
            }
        }
    }

    #[test]
    fn storage_decreases_under_homogeneous_certificate(g in graph_strategy(6), seed in any::<u64>()) {
        let w = NaturalFrequencies::zeros(g.n());
        let s = kuramoto_pin_core::select::select_greedy_lambda(&g, &w, 0.0).unwrap().inputs;
        let theta0 = sample_initial_phases(&g, &s, seed, 0.05).unwrap();
        let cfg = SimConfig { horizon_t: 20.0, ..SimConfig::default() };
        let tr = simulate(&g, &w, &s, &theta0, &cfg).unwrap();
        prop_assert!(max_storage_increase(&tr) <= 1e-6);
    }
}

#[test]
fn near_origin_start_phase_synchronizes() {
    let mut runs = 0;
    for kind in GraphKind::ALL {
        for seed in 0..5 {
            let g = generate_ensemble(&EnsembleSpec::new(kind, 6), seed).unwrap();
            let w = NaturalFrequencies::zeros(6);
            let mut s = kuramoto_pin_core::select::select_greedy_lambda(&g, &w, 0.0).unwrap().inputs;
            // a source node has no dynamics and keeps its initial offset
            for v in (0..6).filter(|&v| g.incoming(v).is_empty()) {
                s = s.with(v);
            }
            if s.is_empty() {
                continue;
            }
            let theta0 = DVector::from_fn(6, |i, _| if s.contains(i) { 0.0 } else { 0.1 * ((i as f64) * 1.7).sin() });
            let cfg = SimConfig::default();
            let tr = simulate(&g, &w, &s, &theta0, &cfg).unwrap();
            assert!(kuramoto_pin_core::dynamics::detect_phase_sync(&tr, &cfg).synced, "{kind} seed {seed}");
            runs += 1;
        }
    }
    assert!(runs >= 10);
}
