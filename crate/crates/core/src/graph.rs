//! Graphs, injections and transport plans.
//!
//! Vertices are 0-indexed. An [`Injection`] `σ: [n_c] ↣ [n]` is stored as the
//! vector of images and stands for the first `n_c` rows of a permutation
//! matrix, with row `i` holding its single 1 in column `σ(i)`.

use std::collections::HashMap;

use ndarray::Array2;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Simple graph on `0..n` without self-loops or multi-edges.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Graph {
    n: usize,
    directed: bool,
    /// Canonical edge list: sorted, and `u < v` when undirected.
    edges: Vec<(usize, usize)>,
    /// Sorted out-neighbours. Undirected graphs store both directions.
    out: Vec<Vec<usize>>,
}

impl Graph {
    pub fn new<I>(n: usize, directed: bool, edges: I) -> Result<Self>
    where
        I: IntoIterator<Item = (usize, usize)>,
    {
        let mut canon = Vec::new();
        for (u, v) in edges {
            if u >= n || v >= n {
                return Err(Error::InvalidGraph(format!(
                    "edge ({u}, {v}) out of range for {n} vertices"
                )));
            }
            if u == v {
                return Err(Error::InvalidGraph(format!("self-loop at vertex {u}")));
            }
            if directed || u < v {
                canon.push((u, v));
            } else {
                canon.push((v, u));
            }
        }
        canon.sort_unstable();
        canon.dedup();

        let mut out = vec![Vec::new(); n];
        for &(u, v) in &canon {
            out[u].push(v);
            if !directed {
                out[v].push(u);
            }
        }
        for list in &mut out {
            list.sort_unstable();
        }
        Ok(Graph {
            n,
            directed,
            edges: canon,
            out,
        })
    }

    pub fn empty(n: usize, directed: bool) -> Self {
        Graph {
            n,
            directed,
            edges: Vec::new(),
            out: vec![Vec::new(); n],
        }
    }

    /// Builds a graph from a dense 0/1 matrix. Off-diagonal entries must be
    /// exactly 0 or 1; undirected input must be symmetric.
    pub fn from_dense(m: &Array2<f64>, directed: bool) -> Result<Self> {
        let (r, c) = m.dim();
        if r != c {
            return Err(Error::SizeMismatch(format!("adjacency is {r}x{c}")));
        }
        let mut edges = Vec::new();
        for u in 0..r {
            if m[(u, u)] != 0.0 {
                return Err(Error::InvalidGraph(format!("nonzero diagonal at {u}")));
            }
            for v in 0..r {
                let x = m[(u, v)];
                if x != 0.0 && x != 1.0 {
                    return Err(Error::InvalidGraph(format!(
                        "entry ({u}, {v}) = {x} is not 0/1"
                    )));
                }
                if !directed && x != m[(v, u)] {
                    return Err(Error::InvalidGraph(format!(
                        "asymmetric entry ({u}, {v}) in undirected graph"
                    )));
                }
                if x == 1.0 && (directed || u < v) {
                    edges.push((u, v));
                }
            }
        }
        Graph::new(r, directed, edges)
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn directed(&self) -> bool {
        self.directed
    }

    pub fn edges(&self) -> &[(usize, usize)] {
        &self.edges
    }

    pub fn edge_count(&self) -> usize {
        self.edges.len()
    }

    pub fn neighbors(&self, u: usize) -> &[usize] {
        &self.out[u]
    }

    pub fn has_edge(&self, u: usize, v: usize) -> bool {
        self.out[u].binary_search(&v).is_ok()
    }

    /// Dense adjacency as a real matrix.
    pub fn to_dense(&self) -> Array2<f64> {
        let mut m = Array2::zeros((self.n, self.n));
        for (u, list) in self.out.iter().enumerate() {
            for &v in list {
                m[(u, v)] = 1.0;
            }
        }
        m
    }

    /// Induced subgraph on `vertices`; vertex `vertices[i]` becomes `i`.
    pub fn induced_subgraph(&self, vertices: &[usize]) -> Result<Graph> {
        let mut pos = HashMap::with_capacity(vertices.len());
        for (i, &v) in vertices.iter().enumerate() {
            if v >= self.n {
                return Err(Error::InvalidGraph(format!("vertex {v} out of range")));
            }
            if pos.insert(v, i).is_some() {
                return Err(Error::InvalidGraph(format!("vertex {v} listed twice")));
            }
        }
        let edges = self.edges.iter().filter_map(|&(u, v)| {
            let (pu, pv) = (pos.get(&u)?, pos.get(&v)?);
            Some((*pu, *pv))
        });
        Graph::new(vertices.len(), self.directed, edges)
    }

    /// Relabels vertices so that old vertex `order[i]` becomes `i`.
    pub fn reorder(&self, order: &[usize]) -> Result<Graph> {
        if order.len() != self.n {
            return Err(Error::SizeMismatch(format!(
                "ordering of length {} for {} vertices",
                order.len(),
                self.n
            )));
        }
        self.induced_subgraph(order)
    }
}

/// Permutation of `0..n`, `map[i]` is the image of `i`.
#[derive(Clone, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct Permutation {
    map: Vec<usize>,
}

impl Permutation {
    pub fn new(map: Vec<usize>) -> Result<Self> {
        let n = map.len();
        check_injective(&map, n)?;
        Ok(Permutation { map })
    }

    pub fn identity(n: usize) -> Self {
        Permutation {
            map: (0..n).collect(),
        }
    }

    pub fn len(&self) -> usize {
        self.map.len()
    }

    pub fn is_empty(&self) -> bool {
        self.map.is_empty()
    }

    pub fn apply(&self, i: usize) -> usize {
        self.map[i]
    }

    pub fn as_slice(&self) -> &[usize] {
        &self.map
    }

    pub fn inverse(&self) -> Permutation {
        let mut inv = vec![0; self.map.len()];
        for (i, &j) in self.map.iter().enumerate() {
            inv[j] = i;
        }
        Permutation { map: inv }
    }
}

/// Injective map `σ: [n_c] ↣ [n]`.
#[derive(Clone, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub struct Injection {
    n: usize,
    map: Vec<usize>,
}

impl Injection {
    pub fn new(map: Vec<usize>, n: usize) -> Result<Self> {
        if map.len() > n {
            return Err(Error::InvalidInjection(format!(
                "domain {} larger than codomain {n}",
                map.len()
            )));
        }
        check_injective(&map, n)?;
        Ok(Injection { n, map })
    }

    /// Construction without validation, for hot loops whose output is
    /// injective by construction.
    pub(crate) fn from_raw(map: Vec<usize>, n: usize) -> Self {
        debug_assert!(check_injective(&map, n).is_ok());
        Injection { n, map }
    }

    pub fn identity(n_c: usize, n: usize) -> Self {
        assert!(n_c <= n, "identity injection needs n_c <= n");
        Injection {
            n,
            map: (0..n_c).collect(),
        }
    }

    pub fn n_c(&self) -> usize {
        self.map.len()
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn apply(&self, i: usize) -> usize {
        self.map[i]
    }

    pub fn as_slice(&self) -> &[usize] {
        &self.map
    }

    pub fn into_vec(self) -> Vec<usize> {
        self.map
    }

    /// The `n_c × n` 0/1 matrix with a single 1 per row.
    pub fn indicator_rows(&self) -> Array2<f64> {
        let mut m = Array2::zeros((self.map.len(), self.n));
        for (i, &j) in self.map.iter().enumerate() {
            m[(i, j)] = 1.0;
        }
        m
    }

    /// Extends `σ` to a permutation of `[n]`: unused targets are assigned to
    /// rows `n_c..n` in increasing order.
    pub fn extend_to_permutation(&self) -> Permutation {
        let mut used = vec![false; self.n];
        for &j in &self.map {
            used[j] = true;
        }
        let mut map = self.map.clone();
        map.extend((0..self.n).filter(|&j| !used[j]));
        Permutation { map }
    }
}

fn check_injective(map: &[usize], n: usize) -> Result<()> {
    let mut seen = vec![false; n];
    for (i, &j) in map.iter().enumerate() {
        if j >= n {
            return Err(Error::InvalidInjection(format!(
                "image {j} of {i} outside codomain of size {n}"
            )));
        }
        if std::mem::replace(&mut seen[j], true) {
            return Err(Error::InvalidInjection(format!("image {j} used twice")));
        }
    }
    Ok(())
}

/// `i ↦ τ(σ(i))`.
pub fn compose_injection(sigma: &Injection, tau: &Permutation) -> Result<Injection> {
    if tau.len() != sigma.n() {
        return Err(Error::SizeMismatch(format!(
            "injection into [{}] composed with permutation of [{}]",
            sigma.n(),
            tau.len()
        )));
    }
    let map = sigma.map.iter().map(|&j| tau.apply(j)).collect();
    Ok(Injection { n: sigma.n, map })
}

/// Number of template vertices where `sigma` agrees with `truth`.
pub fn correct_matches(sigma: &Injection, truth: &Injection) -> usize {
    assert_eq!(sigma.n_c(), truth.n_c(), "domain sizes differ");
    assert_eq!(sigma.n(), truth.n(), "codomain sizes differ");
    sigma
        .map
        .iter()
        .zip(&truth.map)
        .filter(|(a, b)| a == b)
        .count()
}

/// How disagreements on directed graphs are tallied.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum EdgeCounting {
    /// Each ordered pair `(u, v)` counts separately.
    #[default]
    PerDirection,
    /// An unordered pair counts once if either direction disagrees.
    PerPair,
}

/// Edge disagreements between `a` and the subgraph of `b` induced by `sigma`.
///
/// Undirected pairs are always counted once. Directed graphs follow `mode`.
pub fn edge_errors(a: &Graph, b: &Graph, sigma: &Injection, mode: EdgeCounting) -> usize {
    assert_eq!(a.n(), sigma.n_c(), "template order differs from injection domain");
    assert_eq!(b.n(), sigma.n(), "network order differs from injection codomain");
    let n_c = a.n();
    let directed = a.directed() || b.directed();
    let mut errors = 0;
    for u in 0..n_c {
        for v in (u + 1)..n_c {
            let (su, sv) = (sigma.apply(u), sigma.apply(v));
            let fwd = a.has_edge(u, v) != b.has_edge(su, sv);
            if !directed {
                errors += fwd as usize;
                continue;
            }
            let bwd = a.has_edge(v, u) != b.has_edge(sv, su);
            errors += match mode {
                EdgeCounting::PerDirection => fwd as usize + bwd as usize,
                EdgeCounting::PerPair => (fwd || bwd) as usize,
            };
        }
    }
    errors
}

/// Seed count: template vertex `i` is identified with network vertex `i` for
/// `i < s`.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct SeedSet {
    s: usize,
}

impl SeedSet {
    pub fn new(s: usize, n_c: usize) -> Result<Self> {
        if s > n_c {
            return Err(Error::InvalidParameter(format!(
                "{s} seeds for a template with {n_c} vertices"
            )));
        }
        Ok(SeedSet { s })
    }

    pub fn count(&self) -> usize {
        self.s
    }
}

/// A template/network pair relabelled so that seeds come first, together with
/// the orderings needed to map results back to the input labels.
#[derive(Clone, Debug)]
pub struct SeededPair {
    pub a: Graph,
    pub b: Graph,
    pub seeds: SeedSet,
    /// `a_order[i]` is the original label of relabelled template vertex `i`.
    pub a_order: Vec<usize>,
    /// `b_order[j]` is the original label of relabelled network vertex `j`.
    pub b_order: Vec<usize>,
}

impl SeededPair {
    /// Relabels `a` and `b` so that the seed pairs `(a_i, b_i)` become
    /// `(i, i)`. Non-seed vertices keep their relative order.
    pub fn new(a: &Graph, b: &Graph, seeds: &[(usize, usize)]) -> Result<Self> {
        if a.n() > b.n() {
            return Err(Error::SizeMismatch(format!(
                "template has {} vertices, network only {}",
                a.n(),
                b.n()
            )));
        }
        let seed_a: Vec<usize> = seeds.iter().map(|p| p.0).collect();
        let seed_b: Vec<usize> = seeds.iter().map(|p| p.1).collect();
        Injection::new(seed_a.clone(), a.n())
            .map_err(|e| Error::InvalidParameter(format!("template seeds: {e}")))?;
        Injection::new(seed_b.clone(), b.n())
            .map_err(|e| Error::InvalidParameter(format!("network seeds: {e}")))?;

        let a_order = seeds_first(&seed_a, a.n());
        let b_order = seeds_first(&seed_b, b.n());
        Ok(SeededPair {
            a: a.reorder(&a_order)?,
            b: b.reorder(&b_order)?,
            seeds: SeedSet::new(seeds.len(), a.n())?,
            a_order,
            b_order,
        })
    }

    /// Maps an injection between relabelled graphs back to input labels.
    pub fn to_original(&self, sigma: &Injection) -> Injection {
        let mut map = vec![0; sigma.n_c()];
        for (i, &j) in sigma.as_slice().iter().enumerate() {
            map[self.a_order[i]] = self.b_order[j];
        }
        Injection::from_raw(map, sigma.n())
    }

    /// Maps an injection between input labels to the relabelled graphs.
    pub fn from_original(&self, sigma: &Injection) -> Injection {
        let b_pos = inverse_order(&self.b_order);
        let map = self
            .a_order
            .iter()
            .map(|&orig| b_pos[sigma.apply(orig)])
            .collect();
        Injection::from_raw(map, sigma.n())
    }

    /// Reorders a network-sized matrix (e.g. an edge-probability matrix)
    /// into the relabelled vertex order.
    pub fn reorder_network_matrix(&self, m: &Array2<f64>) -> Array2<f64> {
        let n = self.b_order.len();
        Array2::from_shape_fn((n, n), |(i, j)| m[(self.b_order[i], self.b_order[j])])
    }
}

fn seeds_first(seeds: &[usize], n: usize) -> Vec<usize> {
    let mut is_seed = vec![false; n];
    for &s in seeds {
        is_seed[s] = true;
    }
    let mut order = seeds.to_vec();
    order.extend((0..n).filter(|&v| !is_seed[v]));
    order
}

fn inverse_order(order: &[usize]) -> Vec<usize> {
    let mut pos = vec![0; order.len()];
    for (i, &v) in order.iter().enumerate() {
        pos[v] = i;
    }
    pos
}

/// First `n_c` rows of a doubly stochastic matrix, optionally tracked as a
/// convex combination of injections.
#[derive(Clone, Debug)]
pub struct TransportPlan {
    rows: Array2<f64>,
    combo: Vec<(f64, Injection)>,
}

/// Row sums must be 1 and column sums at most 1 up to this slack.
pub const PLAN_TOLERANCE: f64 = 1e-9;

impl TransportPlan {
    pub fn from_injection(sigma: &Injection) -> Self {
        TransportPlan {
            rows: sigma.indicator_rows(),
            combo: vec![(1.0, sigma.clone())],
        }
    }

    /// Plan `Σ w_k σ_k`. Weights must be nonnegative and sum to one; repeated
    /// injections are merged.
    pub fn from_combination(terms: Vec<(f64, Injection)>) -> Result<Self> {
        let first = terms
            .first()
            .ok_or_else(|| Error::InvalidParameter("empty convex combination".into()))?;
        let (n_c, n) = (first.1.n_c(), first.1.n());
        let mut total = 0.0;
        for (w, sigma) in &terms {
            if !w.is_finite() || *w < 0.0 {
                return Err(Error::InvalidParameter(format!("weight {w} is not >= 0")));
            }
            if sigma.n_c() != n_c || sigma.n() != n {
                return Err(Error::SizeMismatch("injections of different shapes".into()));
            }
            total += w;
        }
        if (total - 1.0).abs() > PLAN_TOLERANCE {
            return Err(Error::InvalidParameter(format!("weights sum to {total}")));
        }
        let mut plan = TransportPlan {
            rows: Array2::zeros((n_c, n)),
            combo: Vec::with_capacity(terms.len()),
        };
        let mut index: HashMap<Injection, usize> = HashMap::new();
        for (w, sigma) in terms {
            if w == 0.0 {
                continue;
            }
            for (i, &j) in sigma.as_slice().iter().enumerate() {
                plan.rows[(i, j)] += w;
            }
            match index.get(&sigma) {
                Some(&k) => plan.combo[k].0 += w,
                None => {
                    index.insert(sigma.clone(), plan.combo.len());
                    plan.combo.push((w, sigma));
                }
            }
        }
        Ok(plan)
    }

    /// Rows computed directly together with a decomposition that reproduces
    /// them up to rounding.
    pub(crate) fn from_parts(rows: Array2<f64>, combo: Vec<(f64, Injection)>) -> Result<Self> {
        let plan = TransportPlan { rows, combo };
        plan.validate()?;
        Ok(plan)
    }

    /// Plan from explicit rows, without a tracked decomposition.
    pub fn from_rows(rows: Array2<f64>) -> Result<Self> {
        let plan = TransportPlan {
            rows,
            combo: Vec::new(),
        };
        plan.validate()?;
        Ok(plan)
    }

    pub fn n_c(&self) -> usize {
        self.rows.nrows()
    }

    pub fn n(&self) -> usize {
        self.rows.ncols()
    }

    pub fn rows(&self) -> &Array2<f64> {
        &self.rows
    }

    pub fn combo(&self) -> &[(f64, Injection)] {
        &self.combo
    }

    /// Checks nonnegativity, unit row sums and column sums at most one.
    pub fn validate(&self) -> Result<()> {
        if self.n_c() > self.n() {
            return Err(Error::SizeMismatch(format!(
                "plan has {} rows but {} columns",
                self.n_c(),
                self.n()
            )));
        }
        if self.rows.iter().any(|x| !x.is_finite()) {
            return Err(Error::NonFinite("transport plan"));
        }
        if self.rows.iter().any(|&x| x < -PLAN_TOLERANCE) {
            return Err(Error::InvalidParameter("negative plan entry".into()));
        }
        for (i, row) in self.rows.rows().into_iter().enumerate() {
            let s: f64 = row.sum();
            if (s - 1.0).abs() > PLAN_TOLERANCE {
                return Err(Error::InvalidParameter(format!("row {i} sums to {s}")));
            }
        }
        for (j, col) in self.rows.columns().into_iter().enumerate() {
            let s: f64 = col.sum();
            if s > 1.0 + PLAN_TOLERANCE {
                return Err(Error::InvalidParameter(format!("column {j} sums to {s}")));
            }
        }
        let w: f64 = self.combo.iter().map(|t| t.0).sum();
        if !self.combo.is_empty() && (w - 1.0).abs() > PLAN_TOLERANCE {
            return Err(Error::InvalidParameter(format!("combination weights sum to {w}")));
        }
        Ok(())
    }

    /// Dense rows rebuilt from the tracked convex combination.
    pub fn reconstruct(&self) -> Option<Array2<f64>> {
        if self.combo.is_empty() {
            return None;
        }
        let mut m = Array2::zeros(self.rows.dim());
        for (w, sigma) in &self.combo {
            for (i, &j) in sigma.as_slice().iter().enumerate() {
                m[(i, j)] += w;
            }
        }
        Some(m)
    }

    /// The injection this plan equals, if every row is a unit vector.
    pub fn as_injection(&self) -> Option<Injection> {
        if let [(w, sigma)] = self.combo.as_slice() {
            if *w == 1.0 {
                return Some(sigma.clone());
            }
        }
        let mut map = Vec::with_capacity(self.n_c());
        for row in self.rows.rows() {
            let mut hit = None;
            for (j, &x) in row.iter().enumerate() {
                if x == 1.0 && hit.is_none() {
                    hit = Some(j);
                } else if x != 0.0 {
                    return None;
                }
            }
            map.push(hit?);
        }
        Injection::new(map, self.n()).ok()
    }

    /// Replaces the plan by `alpha * self + (1 - alpha) * step`.
    pub fn blend(&mut self, alpha: f64, step: &Injection) {
        debug_assert!((0.0..=1.0).contains(&alpha));
        let beta = 1.0 - alpha;
        self.rows.mapv_inplace(|x| x * alpha);
        for (i, &j) in step.as_slice().iter().enumerate() {
            self.rows[(i, j)] += beta;
        }
        if alpha == 0.0 {
            self.combo = vec![(1.0, step.clone())];
            return;
        }
        let tracked = !self.combo.is_empty();
        for term in &mut self.combo {
            term.0 *= alpha;
        }
        if tracked && beta > 0.0 {
            match self.combo.iter_mut().find(|t| &t.1 == step) {
                Some(term) => term.0 += beta,
                None => self.combo.push((beta, step.clone())),
            }
        }
    }
}
