//! Frank–Wolfe on the doubly stochastic relaxation, restricted to the first
//! `n_c` rows of the plan.
//!
//! The relaxed objective is `g(D) = −⟨Ã_c, D B̃ Dᵀ⟩`, which for a permutation
//! equals the cross term of `‖Ã − P B̃ Pᵀ‖²_F` up to a factor of −2. Each
//! iteration solves a rectangular assignment problem on the gradient, picks
//! the exact minimiser of `g` on the segment towards that injection, and
//! blends.

use ndarray::{Array2, Zip};
use serde::{Deserialize, Serialize};

use crate::assign::{self, AssignmentProblem};
use crate::error::{Error, Result};
use crate::graph::{Injection, TransportPlan};
use crate::padding::PaddedMatrix;

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct FaqConfig {
    pub max_iters: usize,
    /// Stop when the relative decrease of the relaxed objective drops below
    /// this value.
    pub tol: f64,
    /// Stop when two successive assignment steps coincide.
    pub stop_on_repeat: bool,
}

impl Default for FaqConfig {
    fn default() -> Self {
        FaqConfig {
            max_iters: 100,
            tol: 1e-6,
            stop_on_repeat: true,
        }
    }
}

impl FaqConfig {
    pub fn validate(&self) -> Result<()> {
        if self.max_iters == 0 {
            return Err(Error::InvalidParameter("max_iters must be at least 1".into()));
        }
        if !(self.tol > 0.0) {
            return Err(Error::InvalidParameter(format!("tol must be positive, got {}", self.tol)));
        }
        Ok(())
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Termination {
    /// The Frank–Wolfe gap vanished: no injection improves the linearisation.
    Stationary,
    RepeatedStep,
    SmallImprovement,
    MaxIters,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct FaqTrace {
    /// Relaxed objective at `D_0, D_1, …, D_final`.
    pub objectives: Vec<f64>,
    pub alphas: Vec<f64>,
    pub iterations: usize,
    pub termination: Termination,
}

impl FaqTrace {
    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string(self)?)
    }
}

#[derive(Clone, Debug)]
pub struct FaqOutcome {
    pub injection: Injection,
    /// Matched-filter objective of `injection`.
    pub objective: f64,
    pub trace: FaqTrace,
    /// Final plan before projection.
    pub plan: TransportPlan,
}

fn check_shapes(at: &PaddedMatrix, bt: &PaddedMatrix, n_c: usize, n: usize) -> Result<()> {
    if at.n() != bt.n() || bt.n() != n {
        return Err(Error::SizeMismatch(format!(
            "padded matrices of order {} and {} with codomain {n}",
            at.n(),
            bt.n()
        )));
    }
    if at.support() > n_c || n_c > n {
        return Err(Error::SizeMismatch(format!(
            "template block of order {} with {n_c} plan rows",
            at.support()
        )));
    }
    Ok(())
}

/// `Σ_{i,j < n_c} (Ã − P B̃ Pᵀ)²_{ij}` where `P` extends `sigma`.
pub fn objective(at: &PaddedMatrix, bt: &PaddedMatrix, sigma: &Injection) -> Result<f64> {
    let n_c = sigma.n_c();
    check_shapes(at, bt, n_c, sigma.n())?;
    let s = sigma.as_slice();
    let mut total = 0.0;
    for i in 0..n_c {
        for j in 0..n_c {
            let d = at.entry(i, j) - bt.entry(s[i], s[j]);
            total += d * d;
        }
    }
    Ok(total)
}

/// `Ã_cᵀ X B̃`.
fn left_product(at: &PaddedMatrix, bt: &PaddedMatrix, x: &Array2<f64>) -> Array2<f64> {
    at.block_left_mul_t(&bt.right_mul(x))
}

/// `Ã_c X B̃ᵀ`.
fn right_product(at: &PaddedMatrix, bt: &PaddedMatrix, x: &Array2<f64>) -> Array2<f64> {
    at.block_left_mul(&bt.right_mul_t(x))
}

fn inner(x: &Array2<f64>, y: &Array2<f64>) -> f64 {
    Zip::from(x).and(y).fold(0.0, |acc, &a, &b| acc + a * b)
}

/// `−⟨Ã_c, D B̃ Dᵀ⟩`.
pub fn relaxed_objective(at: &PaddedMatrix, bt: &PaddedMatrix, plan: &TransportPlan) -> Result<f64> {
    check_shapes(at, bt, plan.n_c(), plan.n())?;
    Ok(-inner(plan.rows(), &left_product(at, bt, plan.rows())))
}

/// Gradient of `⟨Ã_c, D B̃ Dᵀ⟩` with respect to the plan rows:
/// `Ã_c D B̃ᵀ + Ã_cᵀ D B̃`.
pub fn gradient_rows(at: &PaddedMatrix, bt: &PaddedMatrix, plan: &TransportPlan) -> Result<Array2<f64>> {
    check_shapes(at, bt, plan.n_c(), plan.n())?;
    let products = Products::new(at, bt, plan.rows());
    Ok(products.gradient())
}

/// `H = Ã_cᵀ D B̃` and, for asymmetric input, `K = Ã_c D B̃ᵀ`.
struct Products {
    h: Array2<f64>,
    k: Option<Array2<f64>>,
}

impl Products {
    fn new(at: &PaddedMatrix, bt: &PaddedMatrix, d: &Array2<f64>) -> Self {
        let h = left_product(at, bt, d);
        let k = (!(at.is_symmetric() && bt.is_symmetric())).then(|| right_product(at, bt, d));
        Products { h, k }
    }

    fn gradient(&self) -> Array2<f64> {
        match &self.k {
            Some(k) => &self.h + k,
            None => &self.h * 2.0,
        }
    }
}

/// Coefficients of `g(α) = aα² + bα + c` along `D_α = α D + (1 − α) P`.
struct Quadratic {
    a: f64,
    b: f64,
    c: f64,
    scale: f64,
}

impl Quadratic {
    fn new(at: &PaddedMatrix, bt: &PaddedMatrix, d: &Array2<f64>, h_d: &Array2<f64>, step: &Injection) -> Self {
        let p = step.indicator_rows();
        let h_p = left_product(at, bt, &p);
        // f(X, Y) = ⟨Y, Ã_cᵀ X B̃⟩ = ⟨Ã_c, X B̃ Yᵀ⟩
        let f_dd = inner(d, h_d);
        let f_dp = inner(&p, h_d);
        let f_pd = inner(d, &h_p);
        let f_pp = inner(&p, &h_p);
        let f_ee = f_dd - f_dp - f_pd + f_pp;
        let f_cross = f_dp + f_pd - 2.0 * f_pp;
        Quadratic {
            a: -f_ee,
            b: -f_cross,
            c: -f_pp,
            scale: f_dd.abs().max(f_pp.abs()).max(f_dp.abs()).max(f_pd.abs()).max(1.0),
        }
    }

    fn value(&self, alpha: f64) -> f64 {
        (self.a * alpha + self.b) * alpha + self.c
    }

    fn argmin(&self) -> f64 {
        let eps = 1e-12 * self.scale;
        let a = if self.a.abs() <= eps { 0.0 } else { self.a };
        let b = if self.b.abs() <= eps { 0.0 } else { self.b };
        if a == 0.0 && b == 0.0 {
            return 0.0;
        }
        if a > 0.0 {
            return (-b / (2.0 * a)).clamp(0.0, 1.0);
        }
        // Concave or linear: the better endpoint, α = 0 on ties.
        if a + b < 0.0 {
            1.0
        } else {
            0.0
        }
    }
}

/// Exact minimiser over `α ∈ [0, 1]` of `−⟨Ã_c, D_α B̃ D_αᵀ⟩` with
/// `D_α = α D + (1 − α) P`. Degenerate segments return 0.
pub fn line_search(at: &PaddedMatrix, bt: &PaddedMatrix, plan: &TransportPlan, step: &Injection) -> Result<f64> {
    check_shapes(at, bt, plan.n_c(), plan.n())?;
    if step.n_c() != plan.n_c() || step.n() != plan.n() {
        return Err(Error::SizeMismatch("step and plan shapes differ".into()));
    }
    let h_d = left_product(at, bt, plan.rows());
    Ok(Quadratic::new(at, bt, plan.rows(), &h_d, step).argmin())
}

/// Runs Frank–Wolfe from `d0` and projects the final plan onto injections.
pub fn run_faq(at: &PaddedMatrix, bt: &PaddedMatrix, d0: &TransportPlan, cfg: &FaqConfig) -> Result<FaqOutcome> {
    cfg.validate()?;
    check_shapes(at, bt, d0.n_c(), d0.n())?;
    d0.validate()?;

    let mut plan = d0.clone();
    let mut objectives = Vec::new();
    let mut alphas = Vec::new();
    let mut previous: Option<Injection> = None;
    let mut termination = Termination::MaxIters;
    // Set when the loop exits right after an update, so the final objective
    // still needs evaluating.
    let mut pending = true;

    for _ in 0..cfg.max_iters {
        let products = Products::new(at, bt, plan.rows());
        let current = -inner(plan.rows(), &products.h);
        objectives.push(current);
        let grad = products.gradient();

        let (step, _) = assign::solve(&AssignmentProblem::maximize(grad.clone()))?;
        let gap = step
            .as_slice()
            .iter()
            .enumerate()
            .map(|(i, &j)| grad[(i, j)])
            .sum::<f64>()
            - inner(&grad, plan.rows());
        if gap <= 1e-12 * current.abs().max(1.0) {
            termination = Termination::Stationary;
            pending = false;
            break;
        }
        if cfg.stop_on_repeat && previous.as_ref() == Some(&step) {
            termination = Termination::RepeatedStep;
            pending = false;
            break;
        }

        let quad = Quadratic::new(at, bt, plan.rows(), &products.h, &step);
        let alpha = quad.argmin();
        let next = quad.value(alpha);
        alphas.push(alpha);
        plan.blend(alpha, &step);
        previous = Some(step);

        if current - next < cfg.tol * current.abs().max(1.0) {
            termination = Termination::SmallImprovement;
            break;
        }
    }
    if pending {
        objectives.push(relaxed_objective(at, bt, &plan)?);
    }

    let injection = match plan.as_injection() {
        Some(sigma) => sigma,
        None => assign::project_to_injection(&plan)?,
    };
    let objective = objective(at, bt, &injection)?;
    Ok(FaqOutcome {
        injection,
        objective,
        trace: FaqTrace {
            objectives,
            iterations: alphas.len(),
            alphas,
            termination,
        },
        plan,
    })
}
