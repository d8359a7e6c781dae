//! Alternating optimisation of the bias-free ADSEL objective
//!
//! ```text
//! |H X'W - H Q Y U|^2 + delta |W|_21 + lambda |P o (Y - QYU)|^2
//!     + alpha |U|_21 + beta Tr((QYU)' L (QYU)) + mu Tr(W'AW),   Q, U >= 0
//! ```
//!
//! `W` has a closed form given the reweighting diagonal `D`; `Q` and `U` use
//! multiplicative updates that keep them elementwise nonnegative. Signed
//! numerators are clamped at zero and denominators at `epsilon_div`.
//!
//! A clamped denominator can inflate a step by orders of magnitude, so `fit`
//! by default shrinks any `Q` or `U` step that would raise the objective
//! (`safeguard`); with it off the updates are applied unchanged.

use nalgebra::DMatrix;
use ndarray::{Array1, Array2, ArrayView2, Axis, Zip};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use crate::data::Dataset;
use crate::error::SolverError;
use crate::graph::{build_affinity, build_laplacian, Sigma};
use crate::redundancy::build_redundancy;

/// Which model components are switched off.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Ablation {
    #[default]
    Full,
    /// `Q = I`, `U = I`, never updated: the regression target is `Y` itself.
    NoDualSe,
    /// Redundancy term off (`mu = 0`).
    NoGfrl,
    /// Manifold term off (`beta = 0`).
    NoGmr,
}

impl std::str::FromStr for Ablation {
    type Err = String;
    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "full" => Ok(Self::Full),
            "no_dual_se" => Ok(Self::NoDualSe),
            "no_gfrl" => Ok(Self::NoGfrl),
            "no_gmr" => Ok(Self::NoGmr),
            _ => Err(format!(
                "unknown ablation {s:?} (full, no_dual_se, no_gfrl, no_gmr)"
            )),
        }
    }
}

impl std::fmt::Display for Ablation {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(match self {
            Self::Full => "full",
            Self::NoDualSe => "no_dual_se",
            Self::NoGfrl => "no_gfrl",
            Self::NoGmr => "no_gmr",
        })
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct Hyperparams {
    /// Masked label reconstruction weight.
    pub lambda: f64,
    /// Row sparsity weight on `U`.
    pub alpha: f64,
    /// Manifold regulariser weight. Also accepted as `eta`.
    #[serde(alias = "eta")]
    pub beta: f64,
    /// Feature redundancy weight.
    pub mu: f64,
    /// Row sparsity weight on `W`.
    pub delta: f64,
    /// Neighbours per sample in the affinity graph.
    pub q: usize,
    pub sigma: Sigma,
    /// Smoothing inside the `D` and `V` reweighting diagonals.
    pub epsilon: f64,
    /// Floor for multiplicative-update denominators.
    pub epsilon_div: f64,
    pub max_iter: usize,
    /// Relative objective change that stops the iteration.
    pub tol: f64,
    pub seed: u64,
    pub ablation: Ablation,
    /// Shrink `Q` and `U` steps that would raise the objective.
    pub safeguard: bool,
}

impl Default for Hyperparams {
    fn default() -> Self {
        Self {
            lambda: 1.0,
            alpha: 1.0,
            beta: 1.0,
            mu: 1.0,
            delta: 1.0,
            q: 5,
            sigma: Sigma::Auto,
            epsilon: 1e-8,
            epsilon_div: 1e-12,
            max_iter: 200,
            tol: 1e-6,
            seed: 0,
            ablation: Ablation::Full,
            safeguard: true,
        }
    }
}

impl Hyperparams {
    /// Copy with the ablated weights forced to zero.
    pub fn effective(&self) -> Self {
        let mut hp = self.clone();
        match hp.ablation {
            Ablation::NoGfrl => hp.mu = 0.0,
            Ablation::NoGmr => hp.beta = 0.0,
            Ablation::Full | Ablation::NoDualSe => {}
        }
        hp
    }

    pub fn validate(&self) -> Result<(), SolverError> {
        let bad = |msg: String| Err(SolverError::Hyperparams(msg));
        let mut weights = vec![
            ("lambda", self.lambda),
            ("alpha", self.alpha),
            ("delta", self.delta),
        ];
        if self.ablation != Ablation::NoGfrl {
            weights.push(("mu", self.mu));
        }
        if self.ablation != Ablation::NoGmr {
            weights.push(("beta", self.beta));
        }
        for (name, w) in weights {
            if !(w > 0.0 && w.is_finite()) {
                return bad(format!("{name} must be positive and finite, got {w}"));
            }
        }
        if !(self.epsilon > 0.0 && self.epsilon_div > 0.0) {
            return bad("epsilon and epsilon_div must be positive".into());
        }
        if self.max_iter == 0 {
            return bad("max_iter must be at least 1".into());
        }
        if self.tol.is_nan() || self.tol < 0.0 {
            return bad(format!("tol must be nonnegative, got {}", self.tol));
        }
        if self.q == 0 {
            return bad("q must be at least 1".into());
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ModelState {
    /// Projection, `d x k`.
    pub w: Array2<f64>,
    pub b: Array1<f64>,
    /// Sample self-expression, `n x n`, nonnegative.
    pub q: Array2<f64>,
    /// Label-dimension self-expression, `k x k`, nonnegative.
    pub u: Array2<f64>,
    /// Diagonal of `D` (reweighting for `|W|_21`).
    pub d: Array1<f64>,
    /// Diagonal of `V` (reweighting for `|U|_21`).
    pub v: Array1<f64>,
    /// Completed iterations.
    pub iter: usize,
    pub initial_objective: f64,
    /// Objective after each iteration.
    pub objective_trace: Vec<f64>,
}

/// Everything the updates need that depends only on the data.
#[derive(Debug, Clone)]
pub struct Problem {
    /// Features, `d x n`.
    pub x: Array2<f64>,
    /// Observed labels, zero at masked cells, `n x k`.
    pub y: Array2<f64>,
    pub p: Array2<f64>,
    /// `P o Y`.
    pub py: Array2<f64>,
    /// Centring matrix `I - 11'/n`.
    pub h: Array2<f64>,
    /// Graph Laplacian over samples (zero when the manifold term is off).
    pub l: Array2<f64>,
    /// Feature redundancy matrix.
    pub a: Array2<f64>,
    /// `X H X'`.
    pub xhxt: Array2<f64>,
}

impl Problem {
    pub fn new(ds: &Dataset, hp: &Hyperparams) -> Result<Self, SolverError> {
        let hp = hp.effective();
        let x = ds.features.values().clone();
        let n = x.ncols();
        let y = ds.labels.values().clone();
        let p = ds.mask.values().clone();
        let py = &p * &y;
        let h = compute_centering(n);
        let l = if hp.beta != 0.0 {
            let g = build_affinity(x.view(), hp.q, hp.sigma)?;
            build_laplacian(&g).laplacian
        } else {
            Array2::zeros((n, n))
        };
        let a = build_redundancy(x.view()).values;
        let xh = x.dot(&h);
        let xhxt = xh.dot(&x.t());
        Ok(Self {
            x,
            y,
            p,
            py,
            h,
            l,
            a,
            xhxt,
        })
    }

    pub fn n_samples(&self) -> usize {
        self.x.ncols()
    }
}

/// `I_n - (1/n) 1 1'`.
pub fn compute_centering(n: usize) -> Array2<f64> {
    let mut h = Array2::from_elem((n, n), -1.0 / n as f64);
    h.diag_mut().mapv_inplace(|v| v + 1.0);
    h
}

/// `1 / (2 sqrt(|m_i|^2 + eps))` for each row `m_i`; the diagonal of `D` (for
/// `W`) or `V` (for `U`).
pub fn reweight_rows(m: ArrayView2<f64>, epsilon: f64) -> Array1<f64> {
    m.rows()
        .into_iter()
        .map(|r| 1.0 / (2.0 * (r.dot(&r) + epsilon).sqrt()))
        .collect()
}

/// Random starting point: `W ~ 0.01 N(0,1)`, `Q, U ~ U(0,1)`.
pub fn init_state(ds: &Dataset, hp: &Hyperparams) -> ModelState {
    let (d, n, k) = (ds.n_features(), ds.n_samples(), ds.n_labels());
    let mut rng = ChaCha8Rng::seed_from_u64(hp.seed);
    let w = Array2::from_shape_simple_fn((d, k), || 0.01 * rng.sample::<f64, _>(StandardNormal));
    let (q, u) = if hp.ablation == Ablation::NoDualSe {
        (Array2::eye(n), Array2::eye(k))
    } else {
        let q = Array2::from_shape_simple_fn((n, n), || rng.random::<f64>());
        let u = Array2::from_shape_simple_fn((k, k), || rng.random::<f64>());
        (q, u)
    };
    let dd = reweight_rows(w.view(), hp.epsilon);
    let v = reweight_rows(u.view(), hp.epsilon);
    ModelState {
        w,
        b: Array1::zeros(k),
        q,
        u,
        d: dd,
        v,
        iter: 0,
        initial_objective: f64::NAN,
        objective_trace: Vec::new(),
    }
}

fn to_dmatrix(a: &Array2<f64>) -> DMatrix<f64> {
    DMatrix::from_row_iterator(a.nrows(), a.ncols(), a.iter().copied())
}

fn from_dmatrix(m: &DMatrix<f64>) -> Array2<f64> {
    Array2::from_shape_fn((m.nrows(), m.ncols()), |(i, j)| m[(i, j)])
}

fn solve_spd(lhs: &DMatrix<f64>, rhs: &DMatrix<f64>) -> Option<DMatrix<f64>> {
    let sol = match lhs.clone().cholesky() {
        Some(ch) => ch.solve(rhs),
        None => lhs.clone().lu().solve(rhs)?,
    };
    sol.iter().all(|v| v.is_finite()).then_some(sol)
}

/// Left-hand side `X H X' + mu A + delta D` and right-hand side `X H Q Y U`
/// of the `W` system.
pub fn w_system(state: &ModelState, problem: &Problem, hp: &Hyperparams) -> (Array2<f64>, Array2<f64>) {
    let hp = hp.effective();
    let mut lhs = &problem.xhxt + &(hp.mu * &problem.a);
    for (i, dii) in state.d.iter().enumerate() {
        lhs[[i, i]] += hp.delta * dii;
    }
    let target = state.q.dot(&problem.y).dot(&state.u);
    let rhs = problem.x.dot(&problem.h.dot(&target));
    (lhs, rhs)
}

/// Closed-form `W` for the current `D`, `Q` and `U`.
pub fn update_w(state: &ModelState, problem: &Problem, hp: &Hyperparams) -> Result<Array2<f64>, SolverError> {
    let (lhs, rhs) = w_system(state, problem, hp);
    let lhs_n = to_dmatrix(&lhs);
    let rhs_n = to_dmatrix(&rhs);
    let mut sol = solve_spd(&lhs_n, &rhs_n);
    if sol.is_none() {
        let d = lhs.nrows() as f64;
        let jitter = 1e-8 * lhs_n.trace().abs().max(f64::MIN_POSITIVE) / d;
        let mut shifted = lhs_n.clone();
        for i in 0..shifted.nrows() {
            shifted[(i, i)] += jitter;
        }
        sol = solve_spd(&shifted, &rhs_n);
        if sol.is_none() {
            return Err(SolverError::Singular { jitter });
        }
    }
    let mut w = sol.expect("checked above");

    // one step of iterative refinement when the residual is loose
    let tol = 1e-8 * (1.0 + rhs_n.norm());
    let residual = &rhs_n - &lhs_n * &w;
    if residual.norm() > tol {
        if let Some(corr) = solve_spd(&lhs_n, &residual) {
            w += corr;
        }
    }
    let w = from_dmatrix(&w);
    check_finite(&w, "W", state.iter)?;
    Ok(w)
}

fn check_finite(m: &Array2<f64>, matrix: &'static str, iter: usize) -> Result<(), SolverError> {
    match m.indexed_iter().find(|(_, v)| !v.is_finite()) {
        Some(((row, col), _)) => Err(SolverError::NonFinite {
            iter,
            matrix,
            row,
            col,
        }),
        None => Ok(()),
    }
}

/// `current o max(num, 0) / max(den, floor)`.
pub fn multiplicative_step(
    current: &Array2<f64>,
    num: &Array2<f64>,
    den: &Array2<f64>,
    floor: f64,
) -> Array2<f64> {
    let mut out = current.clone();
    Zip::from(&mut out)
        .and(num)
        .and(den)
        .for_each(|o, &nu, &de| {
            if *o != 0.0 {
                *o *= nu.max(0.0) / de.max(floor);
            }
        });
    out
}

/// `current o (max(num, 0) / max(den, floor))^power`; `power = 1` is
/// [`multiplicative_step`].
pub fn damped_step(current: &Array2<f64>, num: &Array2<f64>, den: &Array2<f64>, floor: f64, power: f64) -> Array2<f64> {
    let mut out = current.clone();
    Zip::from(&mut out)
        .and(num)
        .and(den)
        .for_each(|o, &nu, &de| {
            if *o != 0.0 {
                *o *= (nu.max(0.0) / de.max(floor)).powf(power);
            }
        });
    out
}

/// Numerator and denominator of the `Q` update, both `n x n`.
pub fn q_update_terms(state: &ModelState, problem: &Problem, hp: &Hyperparams) -> (Array2<f64>, Array2<f64>) {
    let hp = hp.effective();
    let yu = problem.y.dot(&state.u);
    let m = state.q.dot(&yu);
    let hxw = problem.h.dot(&problem.x.t().dot(&state.w));
    let num = &hxw + &(hp.lambda * &problem.py);
    let den = problem.h.dot(&m) + hp.beta * problem.l.dot(&m) + hp.lambda * (&problem.p * &m);
    (num.dot(&yu.t()), den.dot(&yu.t()))
}

pub fn update_q(state: &ModelState, problem: &Problem, hp: &Hyperparams) -> Result<Array2<f64>, SolverError> {
    let (num, den) = q_update_terms(state, problem, hp);
    check_finite(&num, "Q numerator", state.iter)?;
    check_finite(&den, "Q denominator", state.iter)?;
    let q = multiplicative_step(&state.q, &num, &den, hp.epsilon_div);
    check_finite(&q, "Q", state.iter)?;
    Ok(q)
}

/// Numerator and denominator of the `U` update, both `k x k`, with
/// `N = (QY)'`.
pub fn u_update_terms(state: &ModelState, problem: &Problem, hp: &Hyperparams) -> (Array2<f64>, Array2<f64>) {
    let hp = hp.effective();
    let qy = state.q.dot(&problem.y);
    let m = qy.dot(&state.u);
    let nt = qy.t();
    let hxw = problem.h.dot(&problem.x.t().dot(&state.w));
    let num = nt.dot(&(&hxw + &(hp.lambda * &problem.py)));
    let inner = problem.h.dot(&m) + hp.beta * problem.l.dot(&m) + hp.lambda * (&problem.p * &m);
    let mut den = nt.dot(&inner);
    let vu = &state.u * &state.v.view().insert_axis(Axis(1));
    den.scaled_add(hp.alpha, &vu);
    (num, den)
}

pub fn update_u(state: &ModelState, problem: &Problem, hp: &Hyperparams) -> Result<Array2<f64>, SolverError> {
    let (num, den) = u_update_terms(state, problem, hp);
    check_finite(&num, "U numerator", state.iter)?;
    check_finite(&den, "U denominator", state.iter)?;
    let u = multiplicative_step(&state.u, &num, &den, hp.epsilon_div);
    check_finite(&u, "U", state.iter)?;
    Ok(u)
}

/// Bias minimising the uncentred regression term: the mean residual
/// `(1/n) (U'Y'Q' 1 - W'X 1)`.
pub fn compute_bias(state: &ModelState, ds: &Dataset) -> Array1<f64> {
    let x = ds.features.values();
    let n = x.ncols() as f64;
    let m = state.q.dot(ds.labels.values()).dot(&state.u);
    let xw = x.t().dot(&state.w);
    (m.sum_axis(Axis(0)) - xw.sum_axis(Axis(0))) / n
}

/// Weighted contribution of each objective term.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ObjectiveTerms {
    pub regression: f64,
    pub w_sparsity: f64,
    pub reconstruction: f64,
    pub u_sparsity: f64,
    pub manifold: f64,
    pub redundancy: f64,
}

impl ObjectiveTerms {
    pub fn total(&self) -> f64 {
        self.regression
            + self.w_sparsity
            + self.reconstruction
            + self.u_sparsity
            + self.manifold
            + self.redundancy
    }
}

pub fn l21_norm(m: ArrayView2<f64>) -> f64 {
    m.rows().into_iter().map(|r| r.dot(&r).sqrt()).sum()
}

pub fn objective_terms(state: &ModelState, problem: &Problem, hp: &Hyperparams) -> ObjectiveTerms {
    let hp = hp.effective();
    let m = state.q.dot(&problem.y).dot(&state.u);
    let resid = problem.h.dot(&(problem.x.t().dot(&state.w) - &m));
    let recon = &problem.p * &(&problem.y - &m);
    let manifold = if hp.beta != 0.0 {
        (&m * &problem.l.dot(&m)).sum()
    } else {
        0.0
    };
    let redundancy = if hp.mu != 0.0 {
        (&state.w * &problem.a.dot(&state.w)).sum()
    } else {
        0.0
    };
    ObjectiveTerms {
        regression: resid.iter().map(|v| v * v).sum(),
        w_sparsity: hp.delta * l21_norm(state.w.view()),
        reconstruction: hp.lambda * recon.iter().map(|v| v * v).sum::<f64>(),
        u_sparsity: hp.alpha * l21_norm(state.u.view()),
        manifold: hp.beta * manifold,
        redundancy: hp.mu * redundancy,
    }
}

pub fn objective(state: &ModelState, problem: &Problem, hp: &Hyperparams) -> f64 {
    objective_terms(state, problem, hp).total()
}

#[derive(Debug, Clone, PartialEq)]
pub struct ObjectiveGradient {
    pub w: Array2<f64>,
    pub q: Array2<f64>,
    pub u: Array2<f64>,
}

fn l21_gradient(m: &Array2<f64>) -> Array2<f64> {
    let mut g = m.clone();
    for mut row in g.rows_mut() {
        let nrm = row.dot(&row).sqrt();
        if nrm > 0.0 {
            row /= nrm;
        } else {
            row.fill(0.0);
        }
    }
    g
}

/// Gradient of [`objective`] in `W`, `Q` and `U`. Rows of `W` or `U` with zero
/// norm get a zero subgradient.
pub fn objective_gradient(state: &ModelState, problem: &Problem, hp: &Hyperparams) -> ObjectiveGradient {
    let hp = hp.effective();
    let yu = problem.y.dot(&state.u);
    let qy = state.q.dot(&problem.y);
    let m = state.q.dot(&yu);
    let resid = problem.h.dot(&(problem.x.t().dot(&state.w) - &m));

    let mut gw = 2.0 * problem.x.dot(&resid);
    gw.scaled_add(2.0 * hp.mu, &problem.a.dot(&state.w));
    gw.scaled_add(hp.delta, &l21_gradient(&state.w));

    // d/dM of everything that depends on M = QYU
    let mut gm = -2.0 * &resid;
    gm.scaled_add(-2.0 * hp.lambda, &(&problem.p * &(&problem.p * &(&problem.y - &m))));
    gm.scaled_add(2.0 * hp.beta, &problem.l.dot(&m));

    let gq = gm.dot(&yu.t());
    let mut gu = qy.t().dot(&gm);
    gu.scaled_add(hp.alpha, &l21_gradient(&state.u));
    ObjectiveGradient { w: gw, q: gq, u: gu }
}

/// `2 (lhs W - rhs)`: gradient of the `W` subproblem with `D` frozen.
pub fn w_step_gradient(state: &ModelState, problem: &Problem, hp: &Hyperparams) -> Array2<f64> {
    let (lhs, rhs) = w_system(state, problem, hp);
    2.0 * (lhs.dot(&state.w) - rhs)
}

/// Runs the alternating updates until the relative objective change drops
/// below `tol` or `max_iter` iterations have run.
pub fn fit(ds: &Dataset, hp: &Hyperparams) -> Result<ModelState, SolverError> {
    fit_observed(ds, hp, |_, _| {})
}

/// [`fit`], calling `observe` with the state and problem after every
/// iteration.
pub fn fit_observed<F>(ds: &Dataset, hp: &Hyperparams, mut observe: F) -> Result<ModelState, SolverError>
where
    F: FnMut(&ModelState, &Problem),
{
    hp.validate()?;
    let problem = Problem::new(ds, hp)?;
    let mut state = init_state(ds, hp);
    state.initial_objective = objective(&state, &problem, hp);
    let mut prev = state.initial_objective;

    while state.iter < hp.max_iter {
        state.iter += 1;
        let iter = state.iter;
        state.d = reweight_rows(state.w.view(), hp.epsilon);
        state.v = reweight_rows(state.u.view(), hp.epsilon);
        state.w = update_w(&state, &problem, hp).map_err(|e| at_iteration(e, iter))?;
        if hp.ablation != Ablation::NoDualSe {
            if hp.safeguard {
                let after_w = objective(&state, &problem, hp);
                let after_q = safeguarded_step(&mut state, &problem, hp, Factor::Q, after_w)?;
                safeguarded_step(&mut state, &problem, hp, Factor::U, after_q)?;
            } else {
                state.q = update_q(&state, &problem, hp)?;
                state.u = update_u(&state, &problem, hp)?;
            }
        }
        let obj = objective(&state, &problem, hp);
        if !obj.is_finite() {
            return Err(SolverError::NonFinite {
                iter,
                matrix: "objective",
                row: 0,
                col: 0,
            });
        }
        state.objective_trace.push(obj);
        observe(&state, &problem);
        let change = (obj - prev).abs() / prev.max(1.0);
        prev = obj;
        if change < hp.tol {
            break;
        }
    }
    state.b = compute_bias(&state, ds);
    Ok(state)
}

#[derive(Clone, Copy)]
enum Factor {
    Q,
    U,
}

/// Halvings of the step exponent tried before the old factor is kept.
const MAX_HALVINGS: i32 = 12;

/// Applies the `Q` or `U` update, raising the multiplicative factor to
/// `1, 1/2, 1/4, ...` until the objective does not exceed `before`. Keeps
/// the current factor if no power qualifies. Returns the new objective.
fn safeguarded_step(
    state: &mut ModelState,
    problem: &Problem,
    hp: &Hyperparams,
    factor: Factor,
    before: f64,
) -> Result<f64, SolverError> {
    let (num, den) = match factor {
        Factor::Q => q_update_terms(state, problem, hp),
        Factor::U => u_update_terms(state, problem, hp),
    };
    let (name_num, name_den) = match factor {
        Factor::Q => ("Q numerator", "Q denominator"),
        Factor::U => ("U numerator", "U denominator"),
    };
    check_finite(&num, name_num, state.iter)?;
    check_finite(&den, name_den, state.iter)?;
    let current = match factor {
        Factor::Q => state.q.clone(),
        Factor::U => state.u.clone(),
    };
    let slot = |s: &mut ModelState, m: Array2<f64>| match factor {
        Factor::Q => s.q = m,
        Factor::U => s.u = m,
    };
    for h in 0..=MAX_HALVINGS {
        let candidate = damped_step(&current, &num, &den, hp.epsilon_div, 0.5f64.powi(h));
        if candidate.iter().any(|v| !v.is_finite()) {
            continue;
        }
        slot(state, candidate);
        let obj = objective(state, problem, hp);
        if obj <= before {
            return Ok(obj);
        }
    }
    slot(state, current);
    Ok(before)
}

fn at_iteration(e: SolverError, iter: usize) -> SolverError {
    match e {
        SolverError::NonFinite { .. } | SolverError::AtIteration { .. } => e,
        other => SolverError::AtIteration {
            iter,
            source: Box::new(other),
        },
    }
}
