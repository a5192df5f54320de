//! Matched filter: soft-seeded random restarts of the relaxed solver,
//! objective ranking and optional two-stage re-matching.

use std::collections::BTreeMap;
use std::time::Instant;

use ndarray::Array2;
use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::Serialize;

use crate::error::{Error, Result};
use crate::faq::{run_faq, FaqConfig};
use crate::graph::{correct_matches, Graph, Injection, TransportPlan};
use crate::padding::{pad, PaddedMatrix, Scheme};

#[derive(Clone, Debug)]
pub struct FilterConfig {
    pub restarts: usize,
    /// Seeds are the pairs `(i, i)` for `i < seeds`.
    pub seeds: usize,
    pub scheme1: Scheme,
    /// Re-match from the first stage's final plan under this scheme.
    pub scheme2: Option<Scheme>,
    pub rng_seed: u64,
    pub faq: FaqConfig,
}

impl FilterConfig {
    pub fn new(restarts: usize, seeds: usize, scheme1: Scheme, rng_seed: u64) -> Self {
        FilterConfig {
            restarts,
            seeds,
            scheme1,
            scheme2: None,
            rng_seed,
            faq: FaqConfig::default(),
        }
    }

    pub fn validate(&self, n_c: usize) -> Result<()> {
        if self.restarts == 0 {
            return Err(Error::InvalidParameter("at least one restart is required".into()));
        }
        if self.seeds > n_c {
            return Err(Error::InvalidParameter(format!(
                "{} seeds exceed template order {n_c}",
                self.seeds
            )));
        }
        self.faq.validate()
    }
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct MatchResult {
    pub restart: usize,
    pub injection: Injection,
    /// First-stage objective, used for ranking.
    pub objective: f64,
    pub objective2: Option<f64>,
    pub iterations: usize,
    pub alpha0: f64,
}

#[derive(Clone, Debug, Default)]
pub struct FilterRun {
    /// Ranked by first-stage objective.
    pub results: Vec<MatchResult>,
    /// Restarts that failed, with the error message.
    pub failures: Vec<(usize, String)>,
    /// Wall-clock seconds of each restart, by restart index.
    pub seconds: Vec<f64>,
}

/// The RNG driving restart `restart`; independent of scheduling.
pub fn restart_rng(rng_seed: u64, restart: usize) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(rng_seed);
    rng.set_stream(restart as u64);
    rng
}

/// Seed rows fixed; other rows `α P + (1 − α)/(n − s) J` over the
/// non-seed columns, with `P` built from `perm`, a permutation of the
/// non-seed columns.
pub fn soft_start(n_c: usize, n: usize, s: usize, alpha: f64, perm: &[usize]) -> Result<TransportPlan> {
    if s > n_c || n_c > n {
        return Err(Error::SizeMismatch(format!("need s <= n_c <= n, got {s}, {n_c}, {n}")));
    }
    if !(0.0..=1.0).contains(&alpha) {
        return Err(Error::InvalidParameter(format!("mixing weight {alpha} outside [0, 1]")));
    }
    if perm.len() != n - s {
        return Err(Error::SizeMismatch(format!(
            "permutation of {} non-seed columns expected, got {}",
            n - s,
            perm.len()
        )));
    }
    let free = n - s;
    let mut rows = Array2::zeros((n_c, n));
    for i in 0..s {
        rows[(i, i)] = 1.0;
    }
    let planted: Vec<usize> = (0..s).chain(perm[..n_c - s].iter().copied()).collect();
    if n_c == s {
        return TransportPlan::from_parts(rows, vec![(1.0, Injection::new(planted, n)?)]);
    }
    let w = (1.0 - alpha) / free as f64;
    for i in s..n_c {
        for j in s..n {
            rows[(i, j)] = w;
        }
        rows[(i, planted[i])] += alpha;
    }
    // The uniform part is the average of the cyclic shifts of the free block.
    let mut combo = vec![(alpha, Injection::new(planted, n)?)];
    for t in 0..free {
        let shift: Vec<usize> = (0..s).chain((s..n_c).map(|i| s + (i - s + t) % free)).collect();
        combo.push((w, Injection::from_raw(shift, n)));
    }
    combo.retain(|term| term.0 > 0.0);
    TransportPlan::from_parts(rows, combo)
}

/// Random soft-seeded start and the mixing weight drawn for it.
pub fn random_start<R: Rng + ?Sized>(n_c: usize, n: usize, s: usize, rng: &mut R) -> Result<(TransportPlan, f64)> {
    if s > n_c || n_c > n {
        return Err(Error::SizeMismatch(format!("need s <= n_c <= n, got {s}, {n_c}, {n}")));
    }
    let alpha: f64 = rng.random();
    let mut perm: Vec<usize> = (s..n).collect();
    perm.shuffle(rng);
    Ok((soft_start(n_c, n, s, alpha, &perm)?, alpha))
}

struct Stage {
    at: PaddedMatrix,
    bt: PaddedMatrix,
}

fn run_restart(
    restart: usize,
    n_c: usize,
    n: usize,
    cfg: &FilterConfig,
    first: &Stage,
    second: Option<&Stage>,
) -> Result<MatchResult> {
    let mut rng = restart_rng(cfg.rng_seed, restart);
    let (d0, alpha0) = random_start(n_c, n, cfg.seeds, &mut rng)?;
    let out1 = run_faq(&first.at, &first.bt, &d0, &cfg.faq)?;
    let (injection, objective2, iterations) = match second {
        Some(stage) => {
            let out2 = run_faq(&stage.at, &stage.bt, &out1.plan, &cfg.faq)?;
            (out2.injection, Some(out2.objective), out1.trace.iterations + out2.trace.iterations)
        }
        None => (out1.injection, None, out1.trace.iterations),
    };
    Ok(MatchResult {
        restart,
        injection,
        objective: out1.objective,
        objective2,
        iterations,
        alpha0,
    })
}

/// Runs all restarts in parallel. Seeds must already be relabelled to the
/// front of both graphs.
pub fn run_filter(a: &Graph, b: &Graph, cfg: &FilterConfig) -> Result<FilterRun> {
    let (n_c, n) = (a.n(), b.n());
    cfg.validate(n_c)?;
    let (at, bt) = pad(a, b, &cfg.scheme1)?;
    let first = Stage { at, bt };
    let second = match &cfg.scheme2 {
        Some(s) => {
            let (at, bt) = pad(a, b, s)?;
            Some(Stage { at, bt })
        }
        None => None,
    };
    let outcomes: Vec<(Result<MatchResult>, f64)> = (0..cfg.restarts)
        .into_par_iter()
        .map(|r| {
            let start = Instant::now();
            let out = run_restart(r, n_c, n, cfg, &first, second.as_ref());
            (out, start.elapsed().as_secs_f64())
        })
        .collect();
    let mut run = FilterRun::default();
    let mut results = Vec::with_capacity(outcomes.len());
    for (r, (o, secs)) in outcomes.into_iter().enumerate() {
        run.seconds.push(secs);
        match o {
            Ok(m) => results.push(m),
            Err(e) => run.failures.push((r, e.to_string())),
        }
    }
    run.results = rank_by_objective(results);
    Ok(run)
}

/// Ascending first-stage objective, ties by restart index.
pub fn rank_by_objective(mut results: Vec<MatchResult>) -> Vec<MatchResult> {
    results.sort_by(|x, y| x.objective.total_cmp(&y.objective).then(x.restart.cmp(&y.restart)));
    results
}

#[derive(Clone, Debug, PartialEq)]
pub struct PairFrequency {
    /// `counts[(i, j)]` restarts matched template vertex `i` to `j`.
    pub counts: Array2<usize>,
    pub total: usize,
}

pub fn pair_frequencies(results: &[MatchResult]) -> Result<PairFrequency> {
    let first = results
        .first()
        .ok_or_else(|| Error::InvalidParameter("no results to tally".into()))?;
    let (n_c, n) = (first.injection.n_c(), first.injection.n());
    let mut counts = Array2::zeros((n_c, n));
    for m in results {
        if m.injection.n_c() != n_c || m.injection.n() != n {
            return Err(Error::SizeMismatch(format!(
                "result {} has shape {}x{}, expected {n_c}x{n}",
                m.restart,
                m.injection.n_c(),
                m.injection.n()
            )));
        }
        for (i, &j) in m.injection.as_slice().iter().enumerate() {
            counts[(i, j)] += 1;
        }
    }
    Ok(PairFrequency {
        counts,
        total: results.len(),
    })
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct GapRow {
    pub correct: usize,
    pub mean_objective: f64,
    pub restarts: usize,
}

/// Mean first-stage objective for each achieved number of correct matches,
/// ascending in the number correct.
pub fn objective_gap_profile(results: &[MatchResult], truth: &Injection) -> Vec<GapRow> {
    let mut groups: BTreeMap<usize, (f64, usize)> = BTreeMap::new();
    for m in results {
        let e = groups.entry(correct_matches(&m.injection, truth)).or_insert((0.0, 0));
        e.0 += m.objective;
        e.1 += 1;
    }
    groups
        .into_iter()
        .map(|(correct, (sum, k))| GapRow {
            correct,
            mean_objective: sum / k as f64,
            restarts: k,
        })
        .collect()
}
