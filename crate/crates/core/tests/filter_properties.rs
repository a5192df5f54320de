use std::collections::BTreeMap;

use gmfilter::filter::{
    objective_gap_profile, pair_frequencies, random_start, rank_by_objective, restart_rng, run_filter, FilterConfig,
    MatchResult,
};
use gmfilter::graph::{correct_matches, Graph, Injection, Permutation};
use gmfilter::models::{homogeneous_params, sample_corr_er, shuffle_network};
use gmfilter::oracle::random_injection;
use gmfilter::padding::Scheme;
use proptest::prelude::*;
use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

fn results(n_c: usize, n: usize, objectives: &[u8], seed: u64) -> Vec<MatchResult> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    objectives
        .iter()
        .enumerate()
        .map(|(restart, &o)| MatchResult {
            restart,
            injection: random_injection(n_c, n, &mut rng),
            objective: o as f64,
            objective2: None,
            iterations: 1,
            alpha0: 0.5,
        })
        .collect()
}

fn exact_copy(n: usize, n_c: usize, seed: u64) -> (Graph, Graph) {
    let params = homogeneous_params(n, n_c, 0.5, 1.0).unwrap();
    sample_corr_er(&params, &mut ChaCha8Rng::seed_from_u64(seed)).unwrap()
}

proptest! {
    #[test]
    fn ranking_matches_reference_sort(objectives in proptest::collection::vec(0u8..6, 1..100), seed in any::<u64>()) {
        let mut shuffled = results(3, 6, &objectives, seed);
        shuffled.shuffle(&mut ChaCha8Rng::seed_from_u64(seed));
        let ranked = rank_by_objective(shuffled);
        let mut want: Vec<(u8, usize)> = objectives.iter().copied().zip(0..).collect();
        want.sort();
        let got: Vec<(u8, usize)> = ranked.iter().map(|m| (m.objective as u8, m.restart)).collect();
        prop_assert_eq!(got, want);
    }

    #[test]
    fn pair_tally_counts_every_restart(objectives in proptest::collection::vec(0u8..6, 1..60), seed in any::<u64>()) {
        let rs = results(4, 9, &objectives, seed);
        let freq = pair_frequencies(&rs).unwrap();
        prop_assert_eq!(freq.total, rs.len());
        for i in 0..4 {
            prop_assert_eq!(freq.counts.row(i).sum(), rs.len());
            for j in 0..9 {
                let direct = rs.iter().filter(|m| m.injection.as_slice()[i] == j).count();
                prop_assert_eq!(freq.counts[(i, j)], direct);
            }
        }
    }

    #[test]
    fn gap_profile_groups_by_correct_count(objectives in proptest::collection::vec(0u8..6, 1..60), seed in any::<u64>()) {
        let rs = results(3, 5, &objectives, seed);
        let truth = Injection::identity(3, 5);
        let mut groups: BTreeMap<usize, Vec<f64>> = BTreeMap::new();
        for m in &rs {
            groups.entry(correct_matches(&m.injection, &truth)).or_default().push(m.objective);
        }
        let rows = objective_gap_profile(&rs, &truth);
        prop_assert_eq!(rows.len(), groups.len());
        for (row, (correct, objs)) in rows.iter().zip(groups) {
            prop_assert_eq!(row.correct, correct);
            prop_assert_eq!(row.restarts, objs.len());
            prop_assert!((row.mean_objective - objs.iter().sum::<f64>() / objs.len() as f64).abs() <= 1e-12);
        }
    }
}

#[test]
fn random_starts_average_to_barycenter_on_free_rows() {
    let (n, n_c, s, draws) = (20, 6, 2, 10_000);
    let mut sums = vec![0.0; n];
    let mut squares = vec![0.0; n];
    for k in 0..draws {
        let (plan, alpha) = random_start(n_c, n, s, &mut restart_rng(77, k)).unwrap();
        assert!((0.0..1.0).contains(&alpha));
        for (j, &x) in plan.rows().row(3).iter().enumerate() {
            sums[j] += x;
            squares[j] += x * x;
        }
    }
    for j in 0..n {
        let mean = sums[j] / draws as f64;
        if j < s {
            assert_eq!(mean, 0.0);
            continue;
        }
        let se = ((squares[j] / draws as f64 - mean * mean) / draws as f64).sqrt();
        let want = 1.0 / (n - s) as f64;
        assert!((mean - want).abs() <= 3.0 * se, "column {j}: {mean} vs {want}");
    }
}

#[test]
fn full_seeding_with_one_restart_returns_seeds() {
    let (a, b) = exact_copy(30, 8, 4);
    let run = run_filter(&a, &b, &FilterConfig::new(1, 8, Scheme::Centered, 0)).unwrap();
    assert_eq!(run.results[0].injection, Injection::identity(8, 30));
    assert_eq!(run.results[0].objective, 0.0);
}

#[test]
fn partially_seeded_shuffled_copy_is_recovered() {
    let (a, b) = exact_copy(60, 12, 6);
    let shuffled = shuffle_network(&b, 12, 6, &mut ChaCha8Rng::seed_from_u64(7)).unwrap();
    let run = run_filter(&a, &shuffled.network, &FilterConfig::new(20, 6, Scheme::Centered, 8)).unwrap();
    let best = &run.results[0];
    assert_eq!(correct_matches(&best.injection, &shuffled.truth), 12);
    assert_eq!(best.objective, 0.0);
}

#[test]
fn wrong_seed_can_be_overturned() {
    let (a, b) = exact_copy(30, 8, 9);
    // Swap network vertices 1 and 20 so the seed (1, 1) is wrong.
    let swap = Permutation::new(
        (0..30)
            .map(|v| match v {
                1 => 20,
                20 => 1,
                v => v,
            })
            .collect(),
    )
    .unwrap();
    let edges = b.edges().iter().map(|&(u, v)| (swap.apply(u), swap.apply(v)));
    let network = Graph::new(30, false, edges).unwrap();
    let run = run_filter(&a, &network, &FilterConfig::new(50, 2, Scheme::Centered, 10)).unwrap();
    let overturned = run.results.iter().filter(|m| m.injection.as_slice()[1] == 20).count();
    assert!(overturned >= 1, "seed kept in all 50 restarts");
}

#[test]
fn thread_count_does_not_change_results() {
    let params = homogeneous_params(40, 10, 0.4, 0.7).unwrap();
    let (a, b) = sample_corr_er(&params, &mut ChaCha8Rng::seed_from_u64(11)).unwrap();
    let mut cfg = FilterConfig::new(16, 2, Scheme::Centered, 12);
    cfg.scheme2 = Some(Scheme::Naive);
    let run_with = |threads: usize| {
        let pool = rayon::ThreadPoolBuilder::new().num_threads(threads).build().unwrap();
        pool.install(|| run_filter(&a, &b, &cfg).unwrap()).results
    };
    let single = run_with(1);
    assert_eq!(single, run_with(4));
    assert!(single.iter().all(|m| m.objective2.is_some()));
}

#[test]
fn restart_streams_are_distinct() {
    let draws: Vec<Vec<usize>> = (0..8)
        .map(|r| {
            let mut rng = restart_rng(5, r);
            random_injection(6, 40, &mut rng).as_slice().to_vec()
        })
        .collect();
    for i in 0..draws.len() {
        for j in i + 1..draws.len() {
            assert_ne!(draws[i], draws[j]);
        }
    }
    assert_eq!(random_injection(6, 40, &mut restart_rng(5, 3)).as_slice(), draws[3].as_slice());
}
