mod oracles;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use resub_core::betweenness::{
    assign_kappa, edge_betweenness_exact, edge_betweenness_sampled, quantile_thresholds,
    KappaAssignment,
};

use oracles::betweenness::{digraph, pair_counting, random_digraph};

#[test]
fn exact_matches_pair_counting_on_random_digraphs() {
    for seed in 0..100 {
        let inst = random_digraph(seed, 50);
        let got = edge_betweenness_exact(&inst);
        let want = pair_counting(&inst);
        for (a, (&g, &w)) in got.values.iter().zip(&want).enumerate() {
            assert!(
                (g - w).abs() <= 1e-9 * w.abs().max(1.0),
                "seed {seed} arc {a}: {g} vs {w}"
            );
        }
    }
}

#[test]
fn full_pivot_sampling_equals_exact() {
    for seed in 0..30 {
        let inst = random_digraph(seed, 40);
        let exact = edge_betweenness_exact(&inst);
        let sampled = edge_betweenness_sampled(&inst, inst.num_nodes(), seed).unwrap();
        assert_eq!(sampled.values, exact.values);
    }
}

#[test]
fn sampled_estimator_is_unbiased_on_average() {
    let inst = digraph(&mut ChaCha8Rng::seed_from_u64(7), 30);
    let exact = edge_betweenness_exact(&inst).values;
    let runs = 200;
    let mut mean = vec![0.0; exact.len()];
    for seed in 0..runs {
        let s = edge_betweenness_sampled(&inst, 15, seed).unwrap();
        for (m, v) in mean.iter_mut().zip(s.values) {
            *m += v / runs as f64;
        }
    }
    let err: f64 = mean.iter().zip(&exact).map(|(m, e)| (m - e).abs()).sum();
    let total: f64 = exact.iter().sum();
    assert!(err / total < 0.10, "relative L1 error {}", err / total);
}

#[test]
fn equal_class_kappas_collapse_to_static() {
    for seed in 0..20 {
        let inst = random_digraph(seed, 30);
        let report = edge_betweenness_exact(&inst);
        let tau = quantile_thresholds(&report, 0.5, 0.9).unwrap();
        for k in 1..=4 {
            let dynamic = assign_kappa(&report, tau, (k, k, k)).unwrap();
            assert_eq!(
                dynamic.kappa,
                KappaAssignment::uniform(inst.num_arcs(), k).kappa
            );
        }
    }
}
