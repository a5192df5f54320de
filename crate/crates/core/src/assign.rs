//! Rectangular linear assignment.
//!
//! Shortest augmenting paths with row/column potentials on the `n_c × n`
//! matrix directly (no square padding), `O(n_c² n)`. Among optimal
//! assignments the lexicographically smallest one is returned.

use ndarray::Array2;

use crate::error::{Error, Result};
use crate::graph::{Injection, TransportPlan};

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Sense {
    Maximize,
    Minimize,
}

#[derive(Clone, Debug)]
pub struct AssignmentProblem {
    pub rewards: Array2<f64>,
    pub sense: Sense,
}

impl AssignmentProblem {
    pub fn maximize(rewards: Array2<f64>) -> Self {
        AssignmentProblem {
            rewards,
            sense: Sense::Maximize,
        }
    }

    pub fn minimize(costs: Array2<f64>) -> Self {
        AssignmentProblem {
            rewards: costs,
            sense: Sense::Minimize,
        }
    }
}

/// Optimal injection and its objective `Σ_i rewards[i, σ(i)]`.
pub fn solve(problem: &AssignmentProblem) -> Result<(Injection, f64)> {
    let (rows, cols) = problem.rewards.dim();
    if rows > cols {
        return Err(Error::SizeMismatch(format!(
            "assignment needs rows <= columns, got {rows}x{cols}"
        )));
    }
    if problem.rewards.iter().any(|x| !x.is_finite()) {
        return Err(Error::NonFinite("assignment matrix"));
    }
    // Nonnegative costs: negate for maximisation, then shift each row by its
    // minimum. Row shifts leave the argmin unchanged.
    let mut cost = match problem.sense {
        Sense::Minimize => problem.rewards.clone(),
        Sense::Maximize => problem.rewards.mapv(|x| -x),
    };
    for mut row in cost.rows_mut() {
        let m = row.iter().copied().fold(f64::INFINITY, f64::min);
        row.mapv_inplace(|x| x - m);
    }
    let solver = Solver::run(&cost);
    let map = solver.lexicographic_refine(&cost);
    let value = map
        .iter()
        .enumerate()
        .map(|(i, &j)| problem.rewards[(i, j)])
        .sum();
    Ok((Injection::from_raw(map, cols), value))
}

/// Nearest injection to `plan` in the linear-assignment sense.
pub fn project_to_injection(plan: &TransportPlan) -> Result<Injection> {
    solve(&AssignmentProblem::maximize(plan.rows().clone())).map(|r| r.0)
}

struct Solver {
    rows: usize,
    cols: usize,
    /// Row potentials.
    u: Vec<f64>,
    /// Column potentials; zero exactly on unassigned columns, <= 0 otherwise.
    v: Vec<f64>,
    /// Row assigned to each column.
    col_row: Vec<Option<usize>>,
}

impl Solver {
    fn run(cost: &Array2<f64>) -> Self {
        let (rows, cols) = cost.dim();
        let mut u = vec![0.0; rows];
        let mut v = vec![0.0; cols];
        let mut col_row: Vec<Option<usize>> = vec![None; cols];
        let mut minv = vec![0.0; cols];
        let mut way = vec![usize::MAX; cols];
        let mut used = vec![false; cols];

        for start in 0..rows {
            minv.fill(f64::INFINITY);
            used.fill(false);
            // Current row being relaxed and the column we reached it from.
            let mut row = start;
            let mut from = usize::MAX;
            let free_col = loop {
                let mut delta = f64::INFINITY;
                let mut next = usize::MAX;
                for j in 0..cols {
                    if used[j] {
                        continue;
                    }
                    let cur = cost[(row, j)] - u[row] - v[j];
                    if cur < minv[j] {
                        minv[j] = cur;
                        way[j] = from;
                    }
                    if minv[j] < delta {
                        delta = minv[j];
                        next = j;
                    }
                }
                // Potentials: the start row plus rows of used columns move up.
                u[start] += delta;
                for j in 0..cols {
                    if used[j] {
                        if let Some(r) = col_row[j] {
                            u[r] += delta;
                        }
                        v[j] -= delta;
                    } else {
                        minv[j] -= delta;
                    }
                }
                used[next] = true;
                match col_row[next] {
                    None => break next,
                    Some(r) => {
                        row = r;
                        from = next;
                    }
                }
            };
            // Augment back along `way`.
            let mut j = free_col;
            loop {
                let prev = way[j];
                if prev == usize::MAX {
                    col_row[j] = Some(start);
                    break;
                }
                col_row[j] = col_row[prev];
                j = prev;
            }
        }
        // Used columns on the final path were adjusted before being matched;
        // unmatched columns were never used and keep v = 0.
        Solver {
            rows,
            cols,
            u,
            v,
            col_row,
        }
    }

    /// Among all optimal assignments, the lexicographically smallest.
    ///
    /// Optimal assignments are exactly those using tight edges only and
    /// covering every column with a negative potential. Rows are fixed in
    /// order; each is moved to the smallest tight column reachable by an
    /// alternating path that keeps the covering condition.
    fn lexicographic_refine(&self, cost: &Array2<f64>) -> Vec<usize> {
        let (rows, cols) = (self.rows, self.cols);
        let scale = cost.iter().fold(1.0f64, |m, &x| m.max(x.abs()));
        let eps = 1e-10 * scale;
        let tight = |i: usize, j: usize| (cost[(i, j)] - self.u[i] - self.v[j]).abs() <= eps;
        let must_cover: Vec<bool> = self.v.iter().map(|&x| x < -eps).collect();

        let mut row_col = vec![0; rows];
        let mut col_row = self.col_row.clone();
        for (j, r) in col_row.iter().enumerate() {
            if let Some(r) = r {
                row_col[*r] = j;
            }
        }
        if !(0..rows).any(|i| (0..row_col[i]).any(|j| tight(i, j))) {
            return row_col;
        }

        let mut fixed = vec![false; rows];
        for i in 0..rows {
            let current = row_col[i];
            for target in 0..current {
                if !tight(i, target) {
                    continue;
                }
                if let Some(path) =
                    alternating_path(i, target, &row_col, &col_row, &fixed, &tight, &must_cover, cols)
                {
                    // path: sequence of (row, new column), applied in order.
                    for &(r, _) in &path {
                        col_row[row_col[r]] = None;
                    }
                    for &(r, c) in &path {
                        row_col[r] = c;
                        col_row[c] = Some(r);
                    }
                    break;
                }
            }
            fixed[i] = true;
        }
        row_col
    }
}

/// Searches for a reassignment sending `row` to `target` while keeping every
/// other assignment tight, leaving earlier rows fixed, and never uncovering a
/// column that must stay covered. Returns the `(row, new column)` moves.
#[allow(clippy::too_many_arguments)]
fn alternating_path(
    row: usize,
    target: usize,
    row_col: &[usize],
    col_row: &[Option<usize>],
    fixed: &[bool],
    tight: &impl Fn(usize, usize) -> bool,
    must_cover: &[bool],
    cols: usize,
) -> Option<Vec<(usize, usize)>> {
    let vacated = row_col[row];
    // BFS over columns; parent[c] = (row that moves into c, column that row leaves).
    let mut parent: Vec<Option<(usize, usize)>> = vec![None; cols];
    let mut seen = vec![false; cols];
    let mut queue = std::collections::VecDeque::new();
    seen[target] = true;
    seen[vacated] = true;
    parent[target] = Some((row, vacated));
    queue.push_back(target);

    let unwind = |mut c: usize, parent: &[Option<(usize, usize)>]| {
        let mut moves = Vec::new();
        loop {
            let (r, left) = parent[c].unwrap();
            moves.push((r, c));
            if r == row {
                break;
            }
            c = left;
        }
        moves
    };

    while let Some(c) = queue.pop_front() {
        match col_row[c] {
            // Free column: the chain ends here and `vacated` becomes free.
            None => {
                if !must_cover[vacated] {
                    return Some(unwind(c, &parent));
                }
            }
            Some(r) if r == row => unreachable!(),
            Some(r) => {
                if fixed[r] {
                    continue;
                }
                // Row r must move somewhere tight.
                if tight(r, vacated) {
                    let mut moves = unwind(c, &parent);
                    moves.push((r, vacated));
                    return Some(moves);
                }
                for nc in 0..cols {
                    if !seen[nc] && tight(r, nc) {
                        seen[nc] = true;
                        parent[nc] = Some((r, c));
                        queue.push_back(nc);
                    }
                }
            }
        }
    }
    None
}
