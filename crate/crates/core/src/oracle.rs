//! Exhaustive graph matching for micro instances.
//!
//! Deliberately simple: every injection is evaluated in full, with no
//! pruning, so results can serve as ground truth for the solvers.

use rand::Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::filter::restart_rng;
use crate::graph::Injection;
use crate::models::{sample_corr_er, CorrErParams};
use crate::padding::{pad, PaddedMatrix, Scheme};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct EnumerationBudget {
    pub max_injections: u64,
}

impl Default for EnumerationBudget {
    fn default() -> Self {
        EnumerationBudget {
            max_injections: 2_000_000,
        }
    }
}

/// What the enumeration minimises.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Criterion {
    /// The template-block objective used to rank restarts.
    #[default]
    TemplateBlock,
    /// `‖Ã − P B̃ Pᵀ‖²_F` over the full padded matrices.
    Frobenius,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct BruteForce {
    /// All minimisers in lexicographic order.
    pub minimizers: Vec<Injection>,
    pub objective: f64,
}

/// `n! / (n − n_c)!`.
pub fn count_injections(n_c: usize, n: usize) -> u128 {
    if n_c > n {
        return 0;
    }
    ((n - n_c + 1)..=n).fold(1u128, |acc, k| acc.saturating_mul(k as u128))
}

/// Dense copies of the entries the evaluators read, so every evaluation
/// performs the same floating point operations as the library objective.
struct Tables {
    n_c: usize,
    n: usize,
    a: Vec<f64>,
    b: Vec<f64>,
    /// `‖Ã‖² + ‖B̃‖²` for the Frobenius criterion.
    constant: f64,
}

impl Tables {
    fn new(at: &PaddedMatrix, bt: &PaddedMatrix, n_c: usize, criterion: Criterion) -> Self {
        let n = bt.n();
        let a = (0..n_c * n_c).map(|k| at.entry(k / n_c, k % n_c)).collect();
        let b = (0..n * n).map(|k| bt.entry(k / n, k % n)).collect();
        let constant = match criterion {
            Criterion::TemplateBlock => 0.0,
            Criterion::Frobenius => {
                let sq = |m: &PaddedMatrix| {
                    (0..n)
                        .flat_map(|i| (0..n).map(move |j| (i, j)))
                        .map(|(i, j)| m.entry(i, j).powi(2))
                        .sum::<f64>()
                };
                sq(at) + sq(bt)
            }
        };
        Tables { n_c, n, a, b, constant }
    }

    fn eval(&self, sigma: &[usize], criterion: Criterion) -> f64 {
        let (n_c, n) = (self.n_c, self.n);
        match criterion {
            Criterion::TemplateBlock => {
                let mut total = 0.0;
                for i in 0..n_c {
                    for j in 0..n_c {
                        let d = self.a[i * n_c + j] - self.b[sigma[i] * n + sigma[j]];
                        total += d * d;
                    }
                }
                total
            }
            Criterion::Frobenius => {
                let mut cross = 0.0;
                for i in 0..n_c {
                    for j in 0..n_c {
                        cross += self.a[i * n_c + j] * self.b[sigma[i] * n + sigma[j]];
                    }
                }
                self.constant - 2.0 * cross
            }
        }
    }
}

fn check(at: &PaddedMatrix, bt: &PaddedMatrix, n_c: usize, budget: &EnumerationBudget) -> Result<()> {
    if budget.max_injections == 0 {
        return Err(Error::InvalidParameter("enumeration budget must be positive".into()));
    }
    if at.n() != bt.n() || at.support() > n_c || n_c > bt.n() {
        return Err(Error::SizeMismatch(format!(
            "padded orders {} and {} with template support {} and {n_c} rows",
            at.n(),
            bt.n(),
            at.support()
        )));
    }
    let needed = count_injections(n_c, bt.n());
    if needed > budget.max_injections as u128 {
        return Err(Error::BudgetExceeded {
            needed,
            budget: budget.max_injections,
        });
    }
    Ok(())
}

/// Depth-first visit of every injection whose first entry is `first`, in
/// lexicographic order.
fn visit_branch(n_c: usize, n: usize, first: usize, f: &mut impl FnMut(&[usize])) {
    let mut sigma = vec![0usize; n_c];
    let mut used = vec![false; n];
    sigma[0] = first;
    used[first] = true;
    fn rec(depth: usize, sigma: &mut [usize], used: &mut [bool], f: &mut impl FnMut(&[usize])) {
        if depth == sigma.len() {
            f(sigma);
            return;
        }
        for j in 0..used.len() {
            if !used[j] {
                used[j] = true;
                sigma[depth] = j;
                rec(depth + 1, sigma, used, f);
                used[j] = false;
            }
        }
    }
    rec(1, &mut sigma, &mut used, f);
}

fn tie_tolerance(best: f64) -> f64 {
    1e-9 * best.abs().max(1.0)
}

/// All minimisers of the template-block objective over injections of the
/// template support into the network.
pub fn brute_force_gmp(at: &PaddedMatrix, bt: &PaddedMatrix, budget: &EnumerationBudget) -> Result<BruteForce> {
    brute_force_with(at, bt, at.support(), budget, Criterion::TemplateBlock)
}

pub fn brute_force_with(
    at: &PaddedMatrix,
    bt: &PaddedMatrix,
    n_c: usize,
    budget: &EnumerationBudget,
    criterion: Criterion,
) -> Result<BruteForce> {
    check(at, bt, n_c, budget)?;
    let n = bt.n();
    if n_c == 0 {
        return Ok(BruteForce {
            minimizers: vec![Injection::identity(0, n)],
            objective: 0.0,
        });
    }
    let tables = Tables::new(at, bt, n_c, criterion);
    let branches: Vec<(f64, Vec<(Vec<usize>, f64)>)> = (0..n)
        .into_par_iter()
        .map(|first| {
            let mut best = f64::INFINITY;
            let mut kept: Vec<(Vec<usize>, f64)> = Vec::new();
            visit_branch(n_c, n, first, &mut |sigma| {
                let v = tables.eval(sigma, criterion);
                if v < best {
                    best = v;
                    let tol = tie_tolerance(best);
                    kept.retain(|(_, w)| *w <= best + tol);
                }
                if v <= best + tie_tolerance(best) {
                    kept.push((sigma.to_vec(), v));
                }
            });
            (best, kept)
        })
        .collect();
    let best = branches.iter().map(|b| b.0).fold(f64::INFINITY, f64::min);
    let tol = tie_tolerance(best);
    let minimizers = branches
        .into_iter()
        .flat_map(|(_, kept)| kept)
        .filter(|(_, v)| *v <= best + tol)
        .map(|(s, _)| Injection::from_raw(s, n))
        .collect();
    Ok(BruteForce {
        minimizers,
        objective: best,
    })
}

/// Every injection with its objective, in lexicographic order.
pub fn enumerate_objectives(
    at: &PaddedMatrix,
    bt: &PaddedMatrix,
    n_c: usize,
    budget: &EnumerationBudget,
    criterion: Criterion,
) -> Result<Vec<(Injection, f64)>> {
    check(at, bt, n_c, budget)?;
    let n = bt.n();
    if n_c == 0 {
        return Ok(vec![(Injection::identity(0, n), 0.0)]);
    }
    let tables = Tables::new(at, bt, n_c, criterion);
    let branches: Vec<Vec<(Injection, f64)>> = (0..n)
        .into_par_iter()
        .map(|first| {
            let mut out = Vec::new();
            visit_branch(n_c, n, first, &mut |sigma| {
                out.push((Injection::from_raw(sigma.to_vec(), n), tables.eval(sigma, criterion)));
            });
            out
        })
        .collect();
    Ok(branches.into_iter().flatten().collect())
}

/// Per-replicate indicator of whether the planted alignment is among the
/// minimisers of `‖Ã − P B̃ Pᵀ‖²_F`. Replicate `k` draws from the RNG
/// stream `k` of `rng_seed`, so runs with different schemes see the same
/// graphs.
pub fn recovery_outcomes(
    params: &CorrErParams,
    scheme: &Scheme,
    replicates: usize,
    rng_seed: u64,
    budget: &EnumerationBudget,
) -> Result<Vec<bool>> {
    params.validate()?;
    let (n_c, n) = (params.n_c(), params.n());
    let truth = Injection::identity(n_c, n);
    (0..replicates)
        .into_par_iter()
        .map(|k| {
            let mut rng = restart_rng(rng_seed, k);
            let (a, b) = sample_corr_er(params, &mut rng)?;
            let (at, bt) = pad(&a, &b, scheme)?;
            let bf = brute_force_with(&at, &bt, n_c, budget, Criterion::Frobenius)?;
            Ok(bf.minimizers.contains(&truth))
        })
        .collect()
}

/// Fraction of replicates whose planted alignment is a global minimiser.
pub fn verify_recovery_rate(
    params: &CorrErParams,
    scheme: &Scheme,
    replicates: usize,
    rng_seed: u64,
    budget: &EnumerationBudget,
) -> Result<f64> {
    if replicates == 0 {
        return Err(Error::InvalidParameter("at least one replicate is required".into()));
    }
    let hits = recovery_outcomes(params, scheme, replicates, rng_seed, budget)?;
    Ok(hits.iter().filter(|&&h| h).count() as f64 / replicates as f64)
}

/// Uniformly random injection, for tests and diagnostics.
pub fn random_injection<R: Rng + ?Sized>(n_c: usize, n: usize, rng: &mut R) -> Injection {
    let map = rand::seq::index::sample(rng, n, n_c).into_vec();
    Injection::from_raw(map, n)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::faq::objective;
    use crate::graph::Graph;
    use crate::padding::{pad_centered, pad_naive};

    #[test]
    fn injection_counts() {
        assert_eq!(count_injections(4, 8), 1680);
        assert_eq!(count_injections(0, 5), 1);
        assert_eq!(count_injections(3, 2), 0);
        assert_eq!(count_injections(10, 10), 3_628_800);
    }

    #[test]
    fn isomorphic_copy_has_unique_minimiser() {
        // Triangle 1-2-3 with pendant 0, plus disjoint noise edges in B.
        let a = Graph::new(4, false, [(0, 1), (1, 2), (2, 3), (1, 3)]).unwrap();
        let b = Graph::new(8, false, [(0, 1), (1, 2), (2, 3), (1, 3), (4, 5), (6, 7)]).unwrap();
        let (at, bt) = pad_centered(&a, &b).unwrap();
        let bf = brute_force_gmp(&at, &bt, &EnumerationBudget::default()).unwrap();
        assert_eq!(bf.objective, 0.0);
        assert!(bf.minimizers.contains(&Injection::identity(4, 8)));
    }

    #[test]
    fn four_cycle_automorphisms() {
        let c4 = [(0, 1), (1, 2), (2, 3), (0, 3)];
        let a = Graph::new(4, false, c4).unwrap();
        let b = Graph::new(6, false, c4).unwrap();
        let (at, bt) = pad_centered(&a, &b).unwrap();
        let bf = brute_force_gmp(&at, &bt, &EnumerationBudget::default()).unwrap();
        assert_eq!(bf.objective, 0.0);
        assert!(bf.minimizers.len() >= 8);
    }

    #[test]
    fn budget_is_enforced() {
        let a = Graph::empty(6, false);
        let b = Graph::empty(12, false);
        let (at, bt) = pad_naive(&a, &b).unwrap();
        let err = brute_force_gmp(&at, &bt, &EnumerationBudget { max_injections: 1000 }).unwrap_err();
        assert!(matches!(err, Error::BudgetExceeded { needed: 665_280, budget: 1000 }));
    }

    #[test]
    fn enumeration_matches_library_objective() {
        let a = Graph::new(3, false, [(0, 1), (1, 2)]).unwrap();
        let b = Graph::new(5, false, [(0, 2), (2, 4), (1, 3)]).unwrap();
        let (at, bt) = pad_centered(&a, &b).unwrap();
        let all = enumerate_objectives(&at, &bt, 3, &EnumerationBudget::default(), Criterion::TemplateBlock).unwrap();
        assert_eq!(all.len(), 60);
        for (sigma, v) in &all {
            assert_eq!(objective(&at, &bt, sigma).unwrap(), *v);
        }
        assert!(all.windows(2).all(|w| w[0].0 < w[1].0));
    }

    #[test]
    fn frobenius_criterion_value() {
        let a = Graph::new(2, false, [(0, 1)]).unwrap();
        let b = Graph::new(3, false, [(1, 2)]).unwrap();
        let (at, bt) = pad_naive(&a, &b).unwrap();
        let bf = brute_force_with(&at, &bt, 2, &EnumerationBudget::default(), Criterion::Frobenius).unwrap();
        // ‖Ã‖² = 2, ‖B̃‖² = 2, best cross term 2.
        assert_eq!(bf.objective, 0.0);
        assert_eq!(bf.minimizers.len(), 2);
    }
}
