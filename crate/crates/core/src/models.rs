//! Random graph pair generators.
//!
//! Correlated Erdős–Rényi pairs are drawn through the three-coin
//! decomposition `B = Z0`, `A = (1 − Z0) Z1 + Z0 Z2`, which gives each core
//! edge pair the prescribed marginals and correlation.

use ndarray::Array2;
use rand::seq::index;
use rand::seq::SliceRandom;
use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::graph::{Graph, Injection, Permutation};

#[derive(Clone, Debug, PartialEq)]
pub struct CorrErParams {
    /// Edge probabilities of the network, `n × n`.
    pub lambda: Array2<f64>,
    /// Edge correlations on the core, `n_c × n_c`.
    pub r: Array2<f64>,
    pub directed: bool,
}

fn check_unit(name: &str, m: &Array2<f64>) -> Result<()> {
    if let Some(x) = m.iter().find(|x| !(0.0..=1.0).contains(*x)) {
        return Err(Error::InvalidParameter(format!("{name} entry {x} outside [0, 1]")));
    }
    Ok(())
}

fn check_prob(name: &str, x: f64) -> Result<()> {
    if !(0.0..=1.0).contains(&x) {
        return Err(Error::InvalidParameter(format!("{name} = {x} outside [0, 1]")));
    }
    Ok(())
}

fn hollow(mut m: Array2<f64>) -> Array2<f64> {
    m.diag_mut().fill(0.0);
    m
}

impl CorrErParams {
    pub fn new(lambda: Array2<f64>, r: Array2<f64>, directed: bool) -> Result<Self> {
        let p = CorrErParams { lambda, r, directed };
        p.validate()?;
        Ok(p)
    }

    pub fn n(&self) -> usize {
        self.lambda.nrows()
    }

    pub fn n_c(&self) -> usize {
        self.r.nrows()
    }

    pub fn validate(&self) -> Result<()> {
        let (n, n2) = self.lambda.dim();
        let (c, c2) = self.r.dim();
        if n != n2 || c != c2 {
            return Err(Error::SizeMismatch("probability and correlation matrices must be square".into()));
        }
        if c > n {
            return Err(Error::SizeMismatch(format!("core of order {c} exceeds network order {n}")));
        }
        check_unit("lambda", &self.lambda)?;
        check_unit("correlation", &self.r)?;
        if !self.directed {
            for i in 0..n {
                for j in 0..i {
                    if self.lambda[(i, j)] != self.lambda[(j, i)] || (i < c && self.r[(i, j)] != self.r[(j, i)]) {
                        return Err(Error::InvalidParameter(format!(
                            "undirected parameters must be symmetric, differ at ({i}, {j})"
                        )));
                    }
                }
            }
        }
        Ok(())
    }
}

/// `Λ = λJ`, `R = ρJ`, both hollow.
pub fn homogeneous_params(n: usize, n_c: usize, lambda: f64, rho: f64) -> Result<CorrErParams> {
    planted_partition_params(n, n_c, lambda, lambda, rho)
}

/// Core block density `q`, all other pairs `p`, correlation `ρ` on the core.
pub fn planted_partition_params(n: usize, n_c: usize, p: f64, q: f64, rho: f64) -> Result<CorrErParams> {
    check_prob("p", p)?;
    check_prob("q", q)?;
    check_prob("rho", rho)?;
    if n_c > n {
        return Err(Error::SizeMismatch(format!("core of order {n_c} exceeds network order {n}")));
    }
    let lambda = Array2::from_shape_fn((n, n), |(i, j)| if i < n_c && j < n_c { q } else { p });
    CorrErParams::new(hollow(lambda), hollow(Array2::from_elem((n_c, n_c), rho)), false)
}

/// Density `β` everywhere except a decoy block on vertices `n_c..2n_c`
/// whose density `β + (1 − β)ρ + ε` beats the expected core agreement
/// under zero padding.
pub fn adversarial_naive_lambda(n: usize, n_c: usize, beta: f64, rho: f64, eps: f64) -> Result<CorrErParams> {
    check_prob("beta", beta)?;
    check_prob("rho", rho)?;
    if !(eps >= 0.0) {
        return Err(Error::InvalidParameter(format!("eps must be nonnegative, got {eps}")));
    }
    if 2 * n_c > n {
        return Err(Error::InvalidParameter(format!("decoy block needs n >= 2 n_c, got n = {n}, n_c = {n_c}")));
    }
    let decoy = beta + (1.0 - beta) * rho + eps;
    if decoy >= 1.0 {
        return Err(Error::InvalidParameter(format!("decoy density {decoy} must stay below 1")));
    }
    let in_decoy = |i: usize| (n_c..2 * n_c).contains(&i);
    let lambda = Array2::from_shape_fn((n, n), |(i, j)| if in_decoy(i) && in_decoy(j) { decoy } else { beta });
    CorrErParams::new(hollow(lambda), hollow(Array2::from_elem((n_c, n_c), rho)), false)
}

fn bern<R: Rng + ?Sized>(rng: &mut R, p: f64) -> bool {
    rng.random::<f64>() < p
}

/// Samples `(A, B)`; `A` lives on the core vertices `0..n_c` of `B`.
pub fn sample_corr_er<R: Rng + ?Sized>(params: &CorrErParams, rng: &mut R) -> Result<(Graph, Graph)> {
    params.validate()?;
    let (n, n_c) = (params.n(), params.n_c());
    let mut a_edges = Vec::new();
    let mut b_edges = Vec::new();
    let mut visit = |u: usize, v: usize, rng: &mut R| {
        let l = params.lambda[(u, v)];
        if u < n_c && v < n_c {
            let rho = params.r[(u, v)];
            let z0 = bern(rng, l);
            let z1 = bern(rng, l * (1.0 - rho));
            let z2 = bern(rng, l + rho * (1.0 - l));
            if z0 {
                b_edges.push((u, v));
            }
            if (z0 && z2) || (!z0 && z1) {
                a_edges.push((u, v));
            }
        } else if bern(rng, l) {
            b_edges.push((u, v));
        }
    };
    for u in 0..n {
        if params.directed {
            for v in (0..n).filter(|&v| v != u) {
                visit(u, v, rng);
            }
        } else {
            for v in u + 1..n {
                visit(u, v, rng);
            }
        }
    }
    Ok((
        Graph::new(n_c, params.directed, a_edges)?,
        Graph::new(n, params.directed, b_edges)?,
    ))
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum CoreSelection {
    #[default]
    Random,
    /// The vertices with the largest ratio of second to first latent
    /// coordinate.
    MaxAngle,
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct RdpgParams {
    pub n: usize,
    pub n_c: usize,
    pub rho: f64,
    #[serde(default)]
    pub selection: CoreSelection,
}

#[derive(Clone, Debug)]
pub struct RdpgSample {
    pub a: Graph,
    pub b: Graph,
    /// Core vertices come first, so this is the identity.
    pub truth: Injection,
    /// Latent positions after relabelling, `n × 2`.
    pub positions: Array2<f64>,
    pub params: CorrErParams,
}

/// `n` points uniform on the triangle `{x, y > 0, x + y < 1}`.
pub fn triangle_positions<R: Rng + ?Sized>(n: usize, rng: &mut R) -> Array2<f64> {
    let mut x = Array2::zeros((n, 2));
    for i in 0..n {
        let (mut u, mut v): (f64, f64) = (rng.random(), rng.random());
        if u + v > 1.0 {
            u = 1.0 - u;
            v = 1.0 - v;
        }
        x[(i, 0)] = u;
        x[(i, 1)] = v;
    }
    x
}

/// Indices of the `n_c` largest `y / x` ratios, ties by index.
pub fn max_angle_core(positions: &Array2<f64>, n_c: usize) -> Vec<usize> {
    let mut idx: Vec<usize> = (0..positions.nrows()).collect();
    let ratio = |i: usize| positions[(i, 1)] / positions[(i, 0)];
    idx.sort_by(|&i, &j| ratio(j).total_cmp(&ratio(i)).then(i.cmp(&j)));
    idx.truncate(n_c);
    idx.sort_unstable();
    idx
}

pub fn sample_rdpg_pair<R: Rng + ?Sized>(params: &RdpgParams, rng: &mut R) -> Result<RdpgSample> {
    check_prob("rho", params.rho)?;
    if params.n_c > params.n {
        return Err(Error::SizeMismatch(format!(
            "core of order {} exceeds network order {}",
            params.n_c, params.n
        )));
    }
    let raw = triangle_positions(params.n, rng);
    let core = match params.selection {
        CoreSelection::Random => {
            let mut c = index::sample(rng, params.n, params.n_c).into_vec();
            c.sort_unstable();
            c
        }
        CoreSelection::MaxAngle => max_angle_core(&raw, params.n_c),
    };
    let mut in_core = vec![false; params.n];
    for &v in &core {
        in_core[v] = true;
    }
    let order: Vec<usize> = core.iter().copied().chain((0..params.n).filter(|&v| !in_core[v])).collect();
    let positions = Array2::from_shape_fn((params.n, 2), |(i, k)| raw[(order[i], k)]);
    let lambda = hollow(positions.dot(&positions.t()).mapv(|x| x.clamp(0.0, 1.0)));
    let corr = CorrErParams::new(lambda, hollow(Array2::from_elem((params.n_c, params.n_c), params.rho)), false)?;
    let (a, b) = sample_corr_er(&corr, rng)?;
    Ok(RdpgSample {
        a,
        b,
        truth: Injection::identity(params.n_c, params.n),
        positions,
        params: corr,
    })
}

#[derive(Clone, Debug)]
pub struct Shuffled {
    pub network: Graph,
    /// New label of each original vertex.
    pub relabel: Permutation,
    /// Image of the template's identity alignment.
    pub truth: Injection,
}

impl Shuffled {
    /// `m` indexed by the new labels.
    pub fn relabel_matrix(&self, m: &Array2<f64>) -> Array2<f64> {
        let inv = self.relabel.inverse();
        Array2::from_shape_fn(m.dim(), |(i, j)| m[(inv.apply(i), inv.apply(j))])
    }
}

/// Relabels the network by a uniform permutation that fixes the first
/// `fixed` vertices.
pub fn shuffle_network<R: Rng + ?Sized>(b: &Graph, n_c: usize, fixed: usize, rng: &mut R) -> Result<Shuffled> {
    if fixed > n_c || n_c > b.n() {
        return Err(Error::SizeMismatch(format!(
            "cannot fix {fixed} of {n_c} core vertices in a network of order {}",
            b.n()
        )));
    }
    let mut tail: Vec<usize> = (fixed..b.n()).collect();
    tail.shuffle(rng);
    let relabel = Permutation::new((0..fixed).chain(tail).collect())?;
    let edges = b.edges().iter().map(|&(u, v)| (relabel.apply(u), relabel.apply(v)));
    let network = Graph::new(b.n(), b.directed(), edges)?;
    let truth = Injection::new(relabel.as_slice()[..n_c].to_vec(), b.n())?;
    Ok(Shuffled { network, relabel, truth })
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn full_correlation_copies_core() {
        let p = homogeneous_params(30, 12, 0.4, 1.0).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        for _ in 0..5 {
            let (a, b) = sample_corr_er(&p, &mut rng).unwrap();
            let core: Vec<usize> = (0..12).collect();
            assert_eq!(a, b.induced_subgraph(&core).unwrap());
        }
    }

    #[test]
    fn extreme_densities() {
        let mut rng = ChaCha8Rng::seed_from_u64(2);
        let (a, b) = sample_corr_er(&homogeneous_params(20, 5, 0.0, 0.5).unwrap(), &mut rng).unwrap();
        assert_eq!(a.edge_count() + b.edge_count(), 0);
        let (a, b) = sample_corr_er(&homogeneous_params(20, 5, 1.0, 0.5).unwrap(), &mut rng).unwrap();
        assert_eq!(a.edge_count(), 10);
        assert_eq!(b.edge_count(), 190);
    }

    #[test]
    fn planted_with_equal_densities_is_homogeneous() {
        assert_eq!(
            planted_partition_params(50, 10, 0.3, 0.3, 0.8).unwrap(),
            homogeneous_params(50, 10, 0.3, 0.8).unwrap()
        );
    }

    #[test]
    fn adversarial_decoy_density() {
        let p = adversarial_naive_lambda(20, 5, 0.3, 0.9, 0.05).unwrap();
        assert!((p.lambda[(5, 6)] - 0.98).abs() < 1e-12);
        assert_eq!(p.lambda[(0, 1)], 0.3);
        assert_eq!(p.lambda[(4, 5)], 0.3);
        assert_eq!(p.lambda[(10, 11)], 0.3);
        let p = adversarial_naive_lambda(20, 5, 0.3, 0.5, 0.0).unwrap();
        assert_eq!(p.lambda[(7, 8)], 0.3 + 0.7 * 0.5);
        assert!(adversarial_naive_lambda(9, 5, 0.3, 0.9, 0.05).is_err());
        assert!(adversarial_naive_lambda(20, 5, 0.3, 0.9, 0.2).is_err());
    }

    #[test]
    fn out_of_range_parameters() {
        assert!(homogeneous_params(10, 3, 1.5, 0.5).is_err());
        assert!(homogeneous_params(10, 3, 0.5, -0.1).is_err());
        assert!(homogeneous_params(3, 10, 0.5, 0.5).is_err());
        let mut lambda = Array2::from_elem((4, 4), 0.5);
        lambda[(0, 1)] = 0.2;
        assert!(CorrErParams::new(lambda, Array2::zeros((2, 2)), false).is_err());
    }

    #[test]
    fn max_angle_full_selection() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let x = triangle_positions(15, &mut rng);
        assert_eq!(max_angle_core(&x, 15), (0..15).collect::<Vec<_>>());
        assert!(x.iter().all(|&v| v > 0.0));
        assert!(x.rows().into_iter().all(|r| r[0] + r[1] <= 1.0));
    }

    #[test]
    fn max_angle_core_comes_first() {
        let mut rng = ChaCha8Rng::seed_from_u64(4);
        let p = RdpgParams { n: 40, n_c: 6, rho: 0.9, selection: CoreSelection::MaxAngle };
        let s = sample_rdpg_pair(&p, &mut rng).unwrap();
        let ratio = |i: usize| s.positions[(i, 1)] / s.positions[(i, 0)];
        let worst_core = (0..6).map(ratio).fold(f64::INFINITY, f64::min);
        assert!((6..40).all(|i| ratio(i) <= worst_core));
        assert_eq!(s.a.n(), 6);
        assert_eq!(s.b.n(), 40);
        assert_eq!(s.truth, Injection::identity(6, 40));
    }

    #[test]
    fn shuffle_preserves_core_alignment() {
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        let (a, b) = sample_corr_er(&homogeneous_params(25, 8, 0.5, 1.0).unwrap(), &mut rng).unwrap();
        let sh = shuffle_network(&b, 8, 3, &mut rng).unwrap();
        assert_eq!(&sh.truth.as_slice()[..3], &[0, 1, 2]);
        assert_eq!(sh.network.edge_count(), b.edge_count());
        assert_eq!(a, sh.network.induced_subgraph(sh.truth.as_slice()).unwrap());
        let m = Array2::from_shape_fn((25, 25), |(i, j)| (i * 25 + j) as f64);
        let moved = sh.relabel_matrix(&m);
        let (u, v) = (4, 17);
        assert_eq!(moved[(sh.relabel.apply(u), sh.relabel.apply(v))], m[(u, v)]);
    }
}
