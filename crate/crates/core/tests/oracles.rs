//! Cross-checks against independent brute-force computations.

use pmedian_core::distances::{graph_matrix, DistanceMatrix, StreetGraph};
use pmedian_core::evaluation::{fitness_of, AssignmentState as State};
use pmedian_core::instance::{CandidateSite, Customer, SyntheticParams};
use pmedian_core::local_search::{fi, LocalSearch};
use pmedian_core::metaheuristics::{run, Algorithm, IterBudget, RunOptions};
use pmedian_core::neighborhood::{DomainKind, DomainModel};
use pmedian_core::statistics::{wilcoxon_rank_sum_with, Alternative, Method};
use pmedian_core::{AlgorithmConfig, AssignmentState, DistanceKind, Instance, InstanceF32, Solution};
use proptest::prelude::*;
use rand::seq::index::sample;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

fn random_instance(seed: u64, n: usize, f: usize, p: usize) -> Instance {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let rows: Vec<Vec<f64>> = (0..n).map(|_| (0..f).map(|_| rng.random_range(1.0..1000.0)).collect()).collect();
    let w: Vec<f64> = (0..n).map(|_| rng.random_range(0.0..50.0)).collect();
    Instance::from_matrix(DistanceMatrix::from_rows(DistanceKind::Euclidean, &rows).unwrap(), w, p).unwrap()
}

fn subsets(n: usize, k: usize) -> Vec<Vec<usize>> {
    if k == 0 {
        return vec![Vec::new()];
    }
    if n < k {
        return Vec::new();
    }
    let mut with: Vec<Vec<usize>> = subsets(n - 1, k - 1);
    for s in &mut with {
        s.push(n - 1);
    }
    with.extend(subsets(n - 1, k));
    with
}

fn optimum(inst: &Instance) -> f64 {
    subsets(inst.n_sites(), inst.p()).iter().map(|s| fitness_of(inst, s)).fold(f64::INFINITY, f64::min)
}

#[test]
fn vns_reaches_brute_force_optimum_on_tiny_instances() {
    for seed in 0..8 {
        let inst = random_instance(seed, 12, 9, 3);
        let mut cfg = AlgorithmConfig::preset(Algorithm::Vns);
        cfg.seed = seed;
        cfg.time_budget_s = 10.0;
        let r = run(&inst, &cfg, RunOptions::default()).unwrap();
        let opt = optimum(&inst);
        assert!((r.fitness - opt).abs() <= 1e-9 * opt, "seed {seed}: {} vs {opt}", r.fitness);
    }
}

#[test]
fn fi_result_has_no_improving_swap() {
    for seed in 0..10 {
        let inst = random_instance(seed, 30, 20, 5);
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let start = sample(&mut rng, 20, 5).into_vec();
        let mut st = AssignmentState::new(&inst, &Solution::new(start, 0)).unwrap();
        fi(&mut st, None);
        let sites = st.open_sites().to_vec();
        let f0 = fitness_of(&inst, &sites);
        for pos in 0..sites.len() {
            for c in (0..20).filter(|c| !sites.contains(c)) {
                let mut s = sites.clone();
                s[pos] = c;
                assert!(fitness_of(&inst, &s) >= f0 * (1.0 - 1e-12));
            }
        }
    }
}

#[test]
fn imp_with_full_domain_matches_exhaustive_swap_check() {
    let inst = random_instance(4, 25, 14, 4);
    let pts: Vec<_> = (0..14).map(|j| pmedian_core::distances::Point { x: j as f64, y: (j * j % 7) as f64 }).collect();
    let domain = DomainModel::build(DomainKind::Near, &pts, 13).unwrap();
    let start = Solution::new(vec![0, 1, 2, 3], 0);
    let ls = LocalSearch::Imp { imp_param: 50 };
    let out = ls.apply(&inst, &start, Some(&domain)).unwrap();
    let f0 = fitness_of(&inst, out.sites());
    for pos in 0..4 {
        for c in (0..14).filter(|c| !out.contains(*c)) {
            let mut s = out.sites().to_vec();
            s[pos] = c;
            assert!(fitness_of(&inst, &s) >= f0 * (1.0 - 1e-12));
        }
    }
}

#[test]
fn long_swap_chain_stays_consistent() {
    let inst = random_instance(8, 100, 200, 10);
    let mut rng = ChaCha8Rng::seed_from_u64(8);
    let mut st = State::new(&inst, &Solution::new(sample(&mut rng, 200, 10).into_vec(), 0)).unwrap();
    for _ in 0..20_000 {
        let out = st.open_sites()[rng.random_range(0..10)];
        let inn = loop {
            let c = rng.random_range(0..200);
            if !st.is_open(c) {
                break c;
            }
        };
        let predicted = st.fitness() + st.swap_delta(out, inn).unwrap();
        st.apply_swap(out, inn).unwrap();
        let fresh = fitness_of(&inst, st.open_sites());
        assert_eq!(st.fitness(), fresh);
        assert!((predicted - fresh).abs() <= 1e-9 * fresh);
    }
}

#[test]
fn graph_matrix_matches_floyd_warshall() {
    let mut rng = ChaCha8Rng::seed_from_u64(31);
    for _ in 0..50 {
        let n = rng.random_range(2..=30usize);
        let mut edges = Vec::new();
        for v in 1..n {
            edges.push((rng.random_range(0..v), v, rng.random_range(1..400) as f64 / 4.0));
        }
        for _ in 0..n {
            let (a, b) = (rng.random_range(0..n), rng.random_range(0..n));
            if a != b {
                edges.push((a, b, rng.random_range(1..400) as f64 / 4.0));
            }
        }
        let mut d = vec![vec![f64::INFINITY; n]; n];
        for (i, row) in d.iter_mut().enumerate() {
            row[i] = 0.0;
        }
        for &(a, b, w) in &edges {
            d[a][b] = d[a][b].min(w);
            d[b][a] = d[b][a].min(w);
        }
        for k in 0..n {
            for i in 0..n {
                for j in 0..n {
                    if d[i][k] + d[k][j] < d[i][j] {
                        d[i][j] = d[i][k] + d[k][j];
                    }
                }
            }
        }
        let graph = StreetGraph::from_edges(edges.iter().map(|&(a, b, w)| (a as u64, b as u64, w))).unwrap();
        let customers: Vec<Customer> = (0..n)
            .map(|i| Customer { id: i as i64, lat: 0.0, lon: 0.0, population: 1, graph_node: Some(i as u64) })
            .collect();
        let sites: Vec<CandidateSite> =
            (0..n).map(|j| CandidateSite { id: j as i64, lat: 0.0, lon: 0.0, graph_node: Some(j as u64) }).collect();
        let m: DistanceMatrix = graph_matrix(&graph, &customers, &sites).unwrap();
        for i in 0..n {
            for j in 0..n {
                assert_eq!(m.get(i, j), d[i][j]);
            }
        }
    }
}

#[test]
fn exact_and_normal_rank_sum_agree_at_six_per_side() {
    let mut rng = ChaCha8Rng::seed_from_u64(66);
    for shift in [0.0, 0.3, 0.8, 1.5] {
        let a: Vec<f64> = (0..6).map(|_| rng.random_range(0.0..1.0)).collect();
        let b: Vec<f64> = (0..6).map(|_| rng.random_range(0.0..1.0) + shift).collect();
        for alt in [Alternative::TwoSided, Alternative::Less, Alternative::Greater] {
            let e = wilcoxon_rank_sum_with(&a, &b, alt, Method::Exact).unwrap();
            let z = wilcoxon_rank_sum_with(&a, &b, alt, Method::Normal).unwrap();
            assert!((e.p_value - z.p_value).abs() < 0.05, "{alt:?}: {} vs {}", e.p_value, z.p_value);
        }
    }
}

#[test]
fn f32_and_f64_instances_agree_on_synthetic_city() {
    let data = SyntheticParams::new(5, 40, 80, 0.4).with_p(6).generate().unwrap();
    let a: Instance = data.default_instance().unwrap();
    let b: InstanceF32 = data.default_instance().unwrap();
    let mut cfg = AlgorithmConfig::preset(Algorithm::Ils);
    cfg.iter = IterBudget::Fixed(40);
    let ra = run(&a, &cfg, RunOptions::default()).unwrap();
    let rb = run(&b, &cfg, RunOptions::default()).unwrap();
    let fb_in_f64 = fitness_of(&a, rb.solution.sites());
    assert!((ra.fitness - fb_in_f64).abs() <= 0.02 * ra.fitness);
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn every_algorithm_keeps_fixed_prefix(seed in any::<u64>(), alg_ix in 0usize..5, fixed in 0usize..3) {
        let inst = random_instance(seed, 15, 10, 4).with_p(4, (0..fixed).collect()).unwrap();
        let mut cfg = AlgorithmConfig::preset(Algorithm::ALL[alg_ix]);
        cfg.iter = IterBudget::Fixed(15);
        cfg.seed = seed;
        let r = run(&inst, &cfg, RunOptions::default()).unwrap();
        prop_assert_eq!(&r.solution.sites()[..fixed], inst.fixed_sites());
        r.solution.validate(&inst).unwrap();
    }
}
