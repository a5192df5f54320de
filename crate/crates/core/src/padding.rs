//! Padding and centering of a template/network pair.
//!
//! Every scheme turns the `n_c`-vertex template `A` and the `n`-vertex network
//! `B` into two `n × n` real matrices `(Ã, B̃)` with `Ã` supported on its
//! leading `n_c × n_c` block. Both are stored as a sparse part plus a short
//! list of rank-one terms so products against `n_c × n` plans stay cheap.

use std::fmt;
use std::path::PathBuf;
use std::str::FromStr;
use std::sync::Arc;

use nalgebra::DMatrix;
use ndarray::{Array1, Array2};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::graph::Graph;
use crate::sparse::SparseMatrix;

/// `scale · left · rightᵀ`.
#[derive(Clone, Debug, PartialEq)]
pub struct RankOne {
    pub scale: f64,
    pub left: Vec<f64>,
    pub right: Vec<f64>,
}

/// Square matrix `sparse + Σ_k scale_k · left_k · right_kᵀ`.
#[derive(Clone, Debug)]
pub struct PaddedMatrix {
    n: usize,
    /// Entries outside the leading `support × support` block are zero.
    support: usize,
    sparse: SparseMatrix,
    sparse_t: Option<SparseMatrix>,
    lowrank: Vec<RankOne>,
    symmetric: bool,
}

impl PaddedMatrix {
    pub fn new(sparse: SparseMatrix, lowrank: Vec<RankOne>, support: usize) -> Self {
        let n = sparse.nrows();
        assert_eq!(n, sparse.ncols(), "padded matrix must be square");
        assert!(support <= n);
        for term in &lowrank {
            assert_eq!(term.left.len(), n);
            assert_eq!(term.right.len(), n);
        }
        let symmetric = sparse.is_symmetric() && lowrank.iter().all(|t| t.left == t.right);
        let sparse_t = (!symmetric).then(|| sparse.transpose());
        PaddedMatrix {
            n,
            support,
            sparse,
            sparse_t,
            lowrank,
            symmetric,
        }
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn support(&self) -> usize {
        self.support
    }

    pub fn sparse(&self) -> &SparseMatrix {
        &self.sparse
    }

    pub fn lowrank(&self) -> &[RankOne] {
        &self.lowrank
    }

    /// Structurally symmetric: symmetric sparse part and rank-one terms of the
    /// form `c·u·uᵀ`.
    pub fn is_symmetric(&self) -> bool {
        self.symmetric
    }

    pub fn entry(&self, i: usize, j: usize) -> f64 {
        let mut x = self.sparse.get(i, j);
        for t in &self.lowrank {
            x += t.scale * t.left[i] * t.right[j];
        }
        x
    }

    pub fn to_dense(&self) -> Array2<f64> {
        Array2::from_shape_fn((self.n, self.n), |(i, j)| self.entry(i, j))
    }

    /// `X · M` for `X` with `n` columns.
    pub fn right_mul(&self, x: &Array2<f64>) -> Array2<f64> {
        let mut out = self.sparse.left_mul_dense(x);
        for t in &self.lowrank {
            add_rank_one(&mut out, x, t.scale, &t.left, &t.right);
        }
        out
    }

    /// `X · Mᵀ` for `X` with `n` columns.
    pub fn right_mul_t(&self, x: &Array2<f64>) -> Array2<f64> {
        let Some(st) = &self.sparse_t else {
            return self.right_mul(x);
        };
        let mut out = st.left_mul_dense(x);
        for t in &self.lowrank {
            add_rank_one(&mut out, x, t.scale, &t.right, &t.left);
        }
        out
    }

    /// `M_k · Y` where `M_k` is the leading `k × k` block and `k = nrows(Y)`.
    pub fn block_left_mul(&self, y: &Array2<f64>) -> Array2<f64> {
        self.block_left_mul_impl(y, false)
    }

    /// `M_kᵀ · Y` where `M_k` is the leading `k × k` block and `k = nrows(Y)`.
    pub fn block_left_mul_t(&self, y: &Array2<f64>) -> Array2<f64> {
        if self.symmetric {
            return self.block_left_mul_impl(y, false);
        }
        self.block_left_mul_impl(y, true)
    }

    fn block_left_mul_impl(&self, y: &Array2<f64>, transpose: bool) -> Array2<f64> {
        let k = y.nrows();
        assert!(k <= self.n);
        let sparse = if transpose {
            self.sparse_t.as_ref().unwrap_or(&self.sparse)
        } else {
            &self.sparse
        };
        let mut out = Array2::zeros(y.dim());
        for i in 0..k {
            let mut orow = out.row_mut(i);
            for (j, v) in sparse.row(i) {
                if j < k {
                    orow.scaled_add(v, &y.row(j));
                }
            }
        }
        for t in &self.lowrank {
            let (l, r) = if transpose {
                (&t.right, &t.left)
            } else {
                (&t.left, &t.right)
            };
            // c · l[..k] · (r[..k]ᵀ Y)
            let mut ry = Array1::<f64>::zeros(y.ncols());
            for (j, &rj) in r[..k].iter().enumerate() {
                if rj != 0.0 {
                    ry.scaled_add(rj, &y.row(j));
                }
            }
            for (i, &li) in l[..k].iter().enumerate() {
                if li != 0.0 {
                    out.row_mut(i).scaled_add(t.scale * li, &ry);
                }
            }
        }
        out
    }
}

/// `out += c · (X u) vᵀ`.
fn add_rank_one(out: &mut Array2<f64>, x: &Array2<f64>, c: f64, u: &[f64], v: &[f64]) {
    let u = ndarray::ArrayView1::from(u);
    let v = ndarray::ArrayView1::from(v);
    let xu = x.dot(&u);
    for (mut row, &s) in out.rows_mut().into_iter().zip(xu.iter()) {
        if s != 0.0 {
            row.scaled_add(c * s, &v);
        }
    }
}

/// A padding scheme with any data it needs.
#[derive(Clone, Debug)]
pub enum Scheme {
    Naive,
    Centered,
    /// Subtract a known `n × n` edge-probability matrix.
    Oracle(Arc<Array2<f64>>),
    /// Subtract each graph's best rank-`r` approximation.
    LowRank(usize),
}

impl Scheme {
    pub fn label(&self) -> String {
        match self {
            Scheme::Naive => "naive".into(),
            Scheme::Centered => "centered".into(),
            Scheme::Oracle(_) => "oracle".into(),
            Scheme::LowRank(r) => format!("rank:{r}"),
        }
    }
}

/// Textual scheme selector: `naive | centered | oracle:<lambda-file> | rank:<r>`.
#[derive(Clone, Debug, PartialEq, Eq)]
pub enum SchemeSpec {
    Naive,
    Centered,
    Oracle(PathBuf),
    LowRank(usize),
}

impl FromStr for SchemeSpec {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        let s = s.trim();
        match s {
            "naive" => return Ok(SchemeSpec::Naive),
            "centered" => return Ok(SchemeSpec::Centered),
            _ => {}
        }
        if let Some(path) = s.strip_prefix("oracle:") {
            if path.is_empty() {
                return Err(Error::InvalidParameter("oracle scheme needs a file".into()));
            }
            return Ok(SchemeSpec::Oracle(PathBuf::from(path)));
        }
        if let Some(r) = s.strip_prefix("rank:") {
            let r: usize = r
                .parse()
                .map_err(|_| Error::InvalidParameter(format!("bad rank in scheme {s:?}")))?;
            return Ok(SchemeSpec::LowRank(r));
        }
        Err(Error::InvalidParameter(format!("unknown scheme {s:?}")))
    }
}

impl fmt::Display for SchemeSpec {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            SchemeSpec::Naive => write!(f, "naive"),
            SchemeSpec::Centered => write!(f, "centered"),
            SchemeSpec::Oracle(p) => write!(f, "oracle:{}", p.display()),
            SchemeSpec::LowRank(r) => write!(f, "rank:{r}"),
        }
    }
}

impl Serialize for SchemeSpec {
    fn serialize<S: serde::Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        s.collect_str(self)
    }
}

impl<'de> Deserialize<'de> for SchemeSpec {
    fn deserialize<D: serde::Deserializer<'de>>(d: D) -> std::result::Result<Self, D::Error> {
        let s = String::deserialize(d)?;
        s.parse().map_err(serde::de::Error::custom)
    }
}

fn check_orders(a: &Graph, b: &Graph) -> Result<()> {
    if a.n() > b.n() {
        return Err(Error::SizeMismatch(format!(
            "template has {} vertices but network only {}",
            a.n(),
            b.n()
        )));
    }
    Ok(())
}

fn indicator(n: usize, k: usize) -> Vec<f64> {
    (0..n).map(|i| if i < k { 1.0 } else { 0.0 }).collect()
}

/// `Ã = A ⊕ 0`, `B̃ = B`.
pub fn pad_naive(a: &Graph, b: &Graph) -> Result<(PaddedMatrix, PaddedMatrix)> {
    check_orders(a, b)?;
    let n = b.n();
    Ok((
        PaddedMatrix::new(SparseMatrix::from_graph(a, n, 1.0), Vec::new(), a.n()),
        PaddedMatrix::new(SparseMatrix::from_graph(b, n, 1.0), Vec::new(), n),
    ))
}

/// `Ã = (2A − J) ⊕ 0`, `B̃ = 2B − J`, with `J` hollow so diagonals stay zero.
pub fn pad_centered(a: &Graph, b: &Graph) -> Result<(PaddedMatrix, PaddedMatrix)> {
    check_orders(a, b)?;
    let n = b.n();
    let centered = |g: &Graph| {
        let k = g.n();
        let mut triplets: Vec<_> = (0..k)
            .flat_map(|u| g.neighbors(u).iter().map(move |&v| (u, v, 2.0)))
            .collect();
        triplets.extend((0..k).map(|i| (i, i, 1.0)));
        let ones = indicator(n, k);
        PaddedMatrix::new(
            SparseMatrix::from_triplets(n, n, triplets),
            vec![RankOne {
                scale: -1.0,
                left: ones.clone(),
                right: ones,
            }],
            k,
        )
    };
    Ok((centered(a), centered(b)))
}

/// `Ã = (A − Λ_c) ⊕ 0`, `B̃ = B − Λ` where `Λ_c` is the leading block of `Λ`.
pub fn pad_oracle(a: &Graph, b: &Graph, lambda: &Array2<f64>) -> Result<(PaddedMatrix, PaddedMatrix)> {
    check_orders(a, b)?;
    let n = b.n();
    if lambda.dim() != (n, n) {
        return Err(Error::SizeMismatch(format!(
            "edge-probability matrix is {:?}, network has {n} vertices",
            lambda.dim()
        )));
    }
    if lambda.iter().any(|x| !x.is_finite()) {
        return Err(Error::NonFinite("edge-probability matrix"));
    }
    if let Some(x) = lambda.iter().find(|&&x| !(0.0..=1.0).contains(&x)) {
        return Err(Error::InvalidParameter(format!(
            "edge probability {x} outside [0, 1]"
        )));
    }
    let residual = |g: &Graph| {
        let k = g.n();
        let mut triplets = Vec::with_capacity(k * k);
        for i in 0..k {
            for j in 0..k {
                let adj = if g.has_edge(i, j) { 1.0 } else { 0.0 };
                triplets.push((i, j, adj - lambda[(i, j)]));
            }
        }
        PaddedMatrix::new(SparseMatrix::from_triplets(n, n, triplets), Vec::new(), k)
    };
    Ok((residual(a), residual(b)))
}

/// `Ã = (A − Â_r) ⊕ 0`, `B̃ = B − B̂_r` with `M̂_r` the best rank-`r`
/// approximation of `M` in Frobenius norm.
pub fn pad_lowrank(a: &Graph, b: &Graph, r: usize) -> Result<(PaddedMatrix, PaddedMatrix)> {
    check_orders(a, b)?;
    if r == 0 || r > a.n() {
        return Err(Error::InvalidParameter(format!(
            "rank {r} outside 1..={}",
            a.n()
        )));
    }
    let n = b.n();
    let residual = |g: &Graph| -> Result<PaddedMatrix> {
        let k = g.n();
        let approx = if k > DENSE_EIGEN_LIMIT {
            best_rank_r_sparse(&SparseMatrix::from_graph(g, k, 1.0), r, !g.directed())?
        } else {
            best_rank_r(&g.to_dense(), r)?
        };
        let pad = |v: Vec<f64>| {
            let mut v = v;
            v.resize(n, 0.0);
            v
        };
        let terms = approx
            .terms
            .into_iter()
            .map(|t| RankOne {
                scale: -t.scale,
                left: pad(t.left),
                right: pad(t.right),
            })
            .collect();
        Ok(PaddedMatrix::new(SparseMatrix::from_graph(g, n, 1.0), terms, k))
    };
    Ok((residual(a)?, residual(b)?))
}

/// Pads `(a, b)` according to `scheme`.
pub fn pad(a: &Graph, b: &Graph, scheme: &Scheme) -> Result<(PaddedMatrix, PaddedMatrix)> {
    match scheme {
        Scheme::Naive => pad_naive(a, b),
        Scheme::Centered => pad_centered(a, b),
        Scheme::Oracle(lambda) => pad_oracle(a, b, lambda),
        Scheme::LowRank(r) => pad_lowrank(a, b, *r),
    }
}

/// Largest order for which `best_rank_r` uses a dense eigensolver.
pub const DENSE_EIGEN_LIMIT: usize = 4096;

/// Truncated spectral factorisation `Σ_k scale_k · left_k · right_kᵀ`, terms
/// ordered by decreasing `|scale|`.
#[derive(Clone, Debug)]
pub struct LowRank {
    pub terms: Vec<RankOne>,
}

impl LowRank {
    pub fn to_dense(&self, nrows: usize, ncols: usize) -> Array2<f64> {
        let mut m = Array2::zeros((nrows, ncols));
        for t in &self.terms {
            for i in 0..nrows {
                for j in 0..ncols {
                    m[(i, j)] += t.scale * t.left[i] * t.right[j];
                }
            }
        }
        m
    }
}

/// Best rank-`r` approximation of `m` in Frobenius norm.
///
/// Symmetric input uses a symmetric eigendecomposition and keeps the `r`
/// eigenvalues of largest magnitude with their signs; other input uses the
/// singular value decomposition.
pub fn best_rank_r(m: &Array2<f64>, r: usize) -> Result<LowRank> {
    let (rows, cols) = m.dim();
    if m.iter().any(|x| !x.is_finite()) {
        return Err(Error::NonFinite("matrix to approximate"));
    }
    if r > rows.min(cols) {
        return Err(Error::InvalidParameter(format!(
            "rank {r} exceeds matrix dimension {}",
            rows.min(cols)
        )));
    }
    let dm = DMatrix::from_fn(rows, cols, |i, j| m[(i, j)]);
    let symmetric = rows == cols && (0..rows).all(|i| (0..i).all(|j| m[(i, j)] == m[(j, i)]));
    let mut terms = Vec::with_capacity(r);
    if symmetric {
        let eig = dm.symmetric_eigen();
        let mut order: Vec<usize> = (0..rows).collect();
        order.sort_by(|&x, &y| {
            eig.eigenvalues[y]
                .abs()
                .total_cmp(&eig.eigenvalues[x].abs())
                .then(x.cmp(&y))
        });
        for &k in order.iter().take(r) {
            let v: Vec<f64> = eig.eigenvectors.column(k).iter().copied().collect();
            terms.push(RankOne {
                scale: eig.eigenvalues[k],
                left: v.clone(),
                right: v,
            });
        }
    } else {
        let svd = dm.svd(true, true);
        let (u, vt) = (svd.u.unwrap(), svd.v_t.unwrap());
        let mut order: Vec<usize> = (0..svd.singular_values.len()).collect();
        order.sort_by(|&x, &y| {
            svd.singular_values[y]
                .total_cmp(&svd.singular_values[x])
                .then(x.cmp(&y))
        });
        for &k in order.iter().take(r) {
            terms.push(RankOne {
                scale: svd.singular_values[k],
                left: u.column(k).iter().copied().collect(),
                right: vt.row(k).iter().copied().collect(),
            });
        }
    }
    Ok(LowRank { terms })
}

/// Randomised subspace iteration for the leading `r` singular triplets of a
/// sparse square matrix. When `symmetric` is set, each triplet is converted
/// to a signed eigenpair.
pub fn best_rank_r_sparse(m: &SparseMatrix, r: usize, symmetric: bool) -> Result<LowRank> {
    const OVERSAMPLE: usize = 10;
    const POWER_ITERS: usize = 40;
    let n = m.nrows();
    if r > n.min(m.ncols()) {
        return Err(Error::InvalidParameter(format!("rank {r} exceeds matrix dimension")));
    }
    let k = (r + OVERSAMPLE).min(n.min(m.ncols()));
    let mt = m.transpose();
    let mut rng = ChaCha8Rng::seed_from_u64(0x5eed_1ead);
    let omega = Array2::from_shape_fn((m.ncols(), k), |_| rng.random::<f64>() - 0.5);
    let mut q = orthonormal_columns(&m.mul_dense(&omega));
    for _ in 0..POWER_ITERS {
        let z = orthonormal_columns(&mt.mul_dense(&q));
        q = orthonormal_columns(&m.mul_dense(&z));
    }
    // Small problem: B = Qᵀ M  (k × ncols).
    let bt = mt.mul_dense(&q);
    let small = DMatrix::from_fn(k, m.ncols(), |i, j| bt[(j, i)]);
    let svd = small.svd(true, true);
    let (ub, vt) = (svd.u.unwrap(), svd.v_t.unwrap());
    let mut order: Vec<usize> = (0..svd.singular_values.len()).collect();
    order.sort_by(|&x, &y| svd.singular_values[y].total_cmp(&svd.singular_values[x]));
    let mut terms = Vec::with_capacity(r);
    for &c in order.iter().take(r) {
        let left: Vec<f64> = (0..n)
            .map(|i| (0..k).map(|l| q[(i, l)] * ub[(l, c)]).sum())
            .collect();
        let right: Vec<f64> = vt.row(c).iter().copied().collect();
        let sigma = svd.singular_values[c];
        if symmetric {
            let sign = if left.iter().zip(&right).map(|(a, b)| a * b).sum::<f64>() < 0.0 {
                -1.0
            } else {
                1.0
            };
            terms.push(RankOne {
                scale: sign * sigma,
                left: left.clone(),
                right: left,
            });
        } else {
            terms.push(RankOne {
                scale: sigma,
                left,
                right,
            });
        }
    }
    Ok(LowRank { terms })
}

fn orthonormal_columns(x: &Array2<f64>) -> Array2<f64> {
    let dm = DMatrix::from_fn(x.nrows(), x.ncols(), |i, j| x[(i, j)]);
    let q = dm.qr().q();
    Array2::from_shape_fn((q.nrows(), q.ncols()), |(i, j)| q[(i, j)])
}
