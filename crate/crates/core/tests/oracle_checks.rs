use gmfilter::faq::objective;
use gmfilter::graph::{Graph, Injection};
use gmfilter::models::{homogeneous_params, sample_corr_er};
use gmfilter::oracle::{
    brute_force_gmp, brute_force_with, count_injections, enumerate_objectives, Criterion,
    EnumerationBudget,
};
use gmfilter::padding::{pad, PaddedMatrix, Scheme};
use proptest::prelude::*;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

fn graph(n: usize, directed: bool) -> impl Strategy<Value = Graph> {
    proptest::collection::vec(any::<bool>(), n * n).prop_map(move |bits| {
        let edges = (0..n)
            .flat_map(|u| (0..n).map(move |v| (u, v)))
            .filter(|&(u, v)| u != v && (directed || u < v) && bits[u * n + v]);
        Graph::new(n, directed, edges).unwrap()
    })
}

/// Minimum and minimisers by backtracking over partial injections with
/// objectives computed from dense matrices.
fn backtrack(at: &PaddedMatrix, bt: &PaddedMatrix, n_c: usize, full: bool) -> (f64, Vec<Vec<usize>>) {
    let (ad, bd) = (at.to_dense(), bt.to_dense());
    let n = bd.nrows();
    let mut all = Vec::new();
    fn go(n_c: usize, n: usize, cur: &mut Vec<usize>, out: &mut Vec<Vec<usize>>) {
        if cur.len() == n_c {
            out.push(cur.clone());
            return;
        }
        for j in 0..n {
            if cur.contains(&j) {
                continue;
            }
            cur.push(j);
            go(n_c, n, cur, out);
            cur.pop();
        }
    }
    go(n_c, n, &mut Vec::new(), &mut all);
    let value = |s: &[usize]| {
        if full {
            // Complete the injection to a permutation, unmatched rows in order.
            let rest: Vec<usize> = (0..n).filter(|j| !s.contains(j)).collect();
            let p: Vec<usize> = s.iter().copied().chain(rest).collect();
            (0..n)
                .flat_map(|i| (0..n).map(move |j| (i, j)))
                .map(|(i, j)| (ad[(i, j)] - bd[(p[i], p[j])]).powi(2))
                .sum::<f64>()
        } else {
            (0..n_c)
                .flat_map(|i| (0..n_c).map(move |j| (i, j)))
                .map(|(i, j)| (ad[(i, j)] - bd[(s[i], s[j])]).powi(2))
                .sum::<f64>()
        }
    };
    let values: Vec<f64> = all.iter().map(|s| value(s)).collect();
    let best = values.iter().copied().fold(f64::INFINITY, f64::min);
    let argmin = all
        .into_iter()
        .zip(&values)
        .filter(|(_, &v)| v <= best + 1e-9 * best.abs().max(1.0))
        .map(|(s, _)| s)
        .collect();
    (best, argmin)
}

fn schemes(k: usize) -> Scheme {
    [Scheme::Naive, Scheme::Centered, Scheme::LowRank(1)][k % 3].clone()
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(48))]

    #[test]
    fn template_block_minimisers_match_backtracking(
        directed in any::<bool>(),
        pair in (graph(3, false), graph(6, false), graph(3, true), graph(6, true)),
        k in 0usize..3,
    ) {
        let (a, b) = if directed { (pair.2, pair.3) } else { (pair.0, pair.1) };
        let (at, bt) = pad(&a, &b, &schemes(k)).unwrap();
        let bf = brute_force_gmp(&at, &bt, &EnumerationBudget::default()).unwrap();
        let (best, argmin) = backtrack(&at, &bt, 3, false);
        prop_assert!((bf.objective - best).abs() <= 1e-9);
        let got: Vec<Vec<usize>> = bf.minimizers.iter().map(|s| s.as_slice().to_vec()).collect();
        prop_assert_eq!(got, argmin);
    }

    #[test]
    fn frobenius_minimisers_match_backtracking(
        pair in (graph(3, false), graph(5, false)),
        k in 0usize..3,
    ) {
        let (at, bt) = pad(&pair.0, &pair.1, &schemes(k)).unwrap();
        let bf = brute_force_with(&at, &bt, 3, &EnumerationBudget::default(), Criterion::Frobenius).unwrap();
        let (best, argmin) = backtrack(&at, &bt, 3, true);
        prop_assert!((bf.objective - best).abs() <= 1e-9 * best.max(1.0));
        let got: Vec<Vec<usize>> = bf.minimizers.iter().map(|s| s.as_slice().to_vec()).collect();
        prop_assert_eq!(got, argmin);
    }

    #[test]
    fn enumeration_lists_every_injection_once(a in graph(3, false), b in graph(6, false)) {
        let (at, bt) = pad(&a, &b, &Scheme::Centered).unwrap();
        let all = enumerate_objectives(&at, &bt, 3, &EnumerationBudget::default(), Criterion::TemplateBlock).unwrap();
        prop_assert_eq!(all.len() as u128, count_injections(3, 6));
        for w in all.windows(2) {
            prop_assert!(w[0].0.as_slice() < w[1].0.as_slice());
        }
        for (sigma, v) in &all {
            prop_assert!((objective(&at, &bt, sigma).unwrap() - v).abs() <= 1e-9);
        }
    }
}

#[test]
fn budget_is_enforced() {
    let a = Graph::empty(4, false);
    let b = Graph::empty(8, false);
    let (at, bt) = pad(&a, &b, &Scheme::Naive).unwrap();
    let tight = EnumerationBudget { max_injections: 1679 };
    assert!(brute_force_gmp(&at, &bt, &tight).is_err());
    let exact = EnumerationBudget { max_injections: 1680 };
    assert_eq!(brute_force_gmp(&at, &bt, &exact).unwrap().minimizers.len(), 1680);
}

#[test]
fn four_cycle_automorphisms_are_all_minimisers() {
    let c4 = Graph::new(4, false, [(0, 1), (1, 2), (2, 3), (3, 0)]).unwrap();
    let b = Graph::new(7, false, [(0, 1), (1, 2), (2, 3), (3, 0), (4, 5), (5, 6), (0, 6)]).unwrap();
    let (at, bt) = pad(&c4, &b, &Scheme::Centered).unwrap();
    let bf = brute_force_gmp(&at, &bt, &EnumerationBudget::default()).unwrap();
    assert_eq!(bf.objective, 0.0);
    assert!(bf.minimizers.len() >= 8);
}

#[test]
fn naive_and_centered_agree_without_padding() {
    let mut rng = ChaCha8Rng::seed_from_u64(19);
    for _ in 0..30 {
        let n = rng.random_range(3..=6);
        let params = homogeneous_params(n, n, rng.random_range(0.2..0.8), rng.random_range(0.0..1.0)).unwrap();
        let (a, b) = sample_corr_er(&params, &mut rng).unwrap();
        let budget = EnumerationBudget::default();
        let (an, bn) = pad(&a, &b, &Scheme::Naive).unwrap();
        let (ac, bc) = pad(&a, &b, &Scheme::Centered).unwrap();
        let naive = brute_force_gmp(&an, &bn, &budget).unwrap();
        let centered = brute_force_gmp(&ac, &bc, &budget).unwrap();
        assert_eq!(naive.minimizers, centered.minimizers);
    }
}

#[test]
fn identity_is_the_unique_match_of_an_asymmetric_exact_copy() {
    // Every undirected graph on four vertices has a nontrivial automorphism;
    // the directed path does not.
    let b = Graph::new(8, true, [(0, 1), (1, 2), (2, 3), (4, 5), (5, 4), (6, 4)]).unwrap();
    let a = b.induced_subgraph(&[0, 1, 2, 3]).unwrap();
    let (at, bt) = pad(&a, &b, &Scheme::Centered).unwrap();
    let bf = brute_force_gmp(&at, &bt, &EnumerationBudget::default()).unwrap();
    assert_eq!(bf.objective, 0.0);
    assert_eq!(bf.minimizers, vec![Injection::identity(4, 8)]);
}
