//! Log-barrier path following with exact Newton steps.
//!
//! The centering problem at barrier weight `t` is
//! `min t·φ(y) − Σ_k log det S_k(y) − Σ_j log y_j`, where the slacks
//! `S_k` are the sign-normalized constraint maps. Gradients and Hessians
//! come from `G_j = L⁻¹ S_{k,j} L⁻ᵀ` with `L` the Cholesky factor of
//! `S_k(y)`:
//!
//! * `∂/∂y_j  (−log det S) = −tr G_j`
//! * `∂²/∂y_i∂y_j (−log det S) = tr(G_i G_j)`
//!
//! The line search uses the eigenvalues of `Σ_j Δy_j G_j`, which gives the
//! barrier change along the step exactly, without re-factorizing.

use nalgebra::{Cholesky, DMatrix, DVector, SymmetricEigen};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::linalg::{self, sym_from_coords, sym_to_coords, SymMatrix};

use super::map::AffineSymMap;
use super::problem::{LmiProblem, Objective};

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SolverOptions {
    /// Factor applied to the barrier weight after each centering.
    pub mu_growth: f64,
    pub initial_mu: f64,
    /// Bound on half the squared Newton decrement at an accepted center.
    pub newton_tol: f64,
    /// Stop once `(barrier dimension)/t` falls below this.
    pub path_tol: f64,
    pub max_outer: usize,
    pub max_newton: usize,
}

impl Default for SolverOptions {
    fn default() -> Self {
        SolverOptions {
            mu_growth: 8.0,
            initial_mu: 1.0,
            newton_tol: 1e-9,
            path_tol: 1e-8,
            max_outer: 60,
            max_newton: 50,
        }
    }
}

impl SolverOptions {
    pub fn validate(&self) -> Result<()> {
        let ok = self.mu_growth > 1.0
            && self.initial_mu > 0.0
            && self.newton_tol > 0.0
            && self.path_tol > 0.0
            && self.max_outer > 0
            && self.max_newton > 0;
        if ok {
            Ok(())
        } else {
            Err(Error::InvalidProblem("solver options must be positive, growth > 1".into()))
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub enum SolverStatus {
    Optimal,
    MaxIterations,
    Infeasible,
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct SolverDiagnostics {
    pub final_mu: f64,
    pub newton_decrement: f64,
    pub min_slack_eigenvalues: Vec<f64>,
    pub min_nonneg: Option<f64>,
    pub outer_iterations: usize,
    pub newton_steps: usize,
    /// Objective at each accepted center.
    pub objective_history: Vec<f64>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SolverResult {
    pub y: Vec<f64>,
    pub objective: f64,
    pub status: SolverStatus,
    pub diagnostics: SolverDiagnostics,
}

/// Margin required of a phase-one point: every slack eigenvalue and every
/// nonnegative variable at least this large.
pub const PHASE1_MARGIN: f64 = 1e-6;

const UNBOUNDED_LIMIT: f64 = 1e10;

/// Finds a strictly feasible point, or `None` when the auxiliary problem
/// `min s  s.t.  S_k(y) + s·I ⪰ 0, y_j + s ≥ 0` has optimal `s ≥ 0`.
pub fn phase1(problem: &LmiProblem) -> Option<Vec<f64>> {
    problem.validate().ok()?;
    let lowered = problem.lower_trace_inverse();
    let y = phase1_inner(&lowered, None, &SolverOptions::default())?;
    Some(y[..problem.num_vars()].to_vec())
}

pub fn solve(
    problem: &LmiProblem,
    opts: &SolverOptions,
    start: Option<&[f64]>,
) -> Result<SolverResult> {
    problem.validate()?;
    opts.validate()?;
    if let Some(s) = start {
        if s.len() != problem.num_vars() {
            return Err(Error::dim(problem.num_vars(), s.len()));
        }
    }
    let lowered = problem.lower_trace_inverse();
    let start = start.map(|s| extend_start(problem, &lowered, s));
    let y0 = phase1_inner(&lowered, start.as_deref(), opts)
        .ok_or_else(|| Error::Infeasible("no strictly feasible point".into()))?;

    let barrier = Barrier::new(&lowered);
    let outcome = barrier.follow(y0, opts, |_, _| false)?;

    let y = outcome.y[..problem.num_vars()].to_vec();
    let objective = objective_value(problem, &y)?;
    let diagnostics = SolverDiagnostics {
        final_mu: outcome.t,
        newton_decrement: outcome.decrement,
        min_slack_eigenvalues: (0..problem.constraints().len())
            .map(|k| problem.slack(k, &y).map(|s| s.min_eigenvalue()))
            .collect::<Result<_>>()?,
        min_nonneg: problem
            .nonneg_vars()
            .iter()
            .map(|&j| y[j])
            .reduce(f64::min),
        outer_iterations: outcome.outer,
        newton_steps: outcome.newton_steps,
        objective_history: outcome
            .history
            .iter()
            .map(|yy| objective_value(problem, &yy[..problem.num_vars()]))
            .collect::<Result<_>>()?,
    };
    let mut result = SolverResult {
        y,
        objective,
        status: SolverStatus::Optimal,
        diagnostics,
    };
    if !outcome.converged {
        result.status = SolverStatus::MaxIterations;
        return Err(Error::MaxIterations(Box::new(result)));
    }
    Ok(result)
}

/// `φ(y)` for the problem as posed (before any epigraph lowering).
pub fn objective_value(problem: &LmiProblem, y: &[f64]) -> Result<f64> {
    match problem.objective() {
        Objective::Linear(c) => Ok(c.iter().zip(y).map(|(a, b)| a * b).sum()),
        Objective::NegLogDet { constraint } => {
            Ok(-linalg::spd_logdet(problem.slack(*constraint, y)?.as_matrix())?)
        }
        Objective::TraceInverse { constraint } => {
            Ok(linalg::spd_inverse(problem.slack(*constraint, y)?.as_matrix())?.trace())
        }
    }
}

/// Appends `Z = S⁻¹ + I` to a start point when the trace-inverse objective
/// was lowered to its epigraph form.
fn extend_start(original: &LmiProblem, lowered: &LmiProblem, y: &[f64]) -> Vec<f64> {
    let mut out = y.to_vec();
    if lowered.num_vars() == original.num_vars() {
        return out;
    }
    let Objective::TraceInverse { constraint } = original.objective() else {
        unreachable!("only trace-inverse objectives are lowered");
    };
    let extra = lowered.num_vars() - original.num_vars();
    match original.slack(*constraint, y).ok().and_then(|s| linalg::spd_inverse(s.as_matrix()).ok()) {
        Some(inv) => {
            let d = inv.nrows();
            out.extend(sym_to_coords(&(inv + DMatrix::identity(d, d))));
        }
        None => out.extend(std::iter::repeat_n(0.0, extra)),
    }
    out
}

fn phase1_inner(problem: &LmiProblem, start: Option<&[f64]>, opts: &SolverOptions) -> Option<Vec<f64>> {
    let p = problem.num_vars();
    let y0 = start.map(|s| s.to_vec()).unwrap_or_else(|| vec![0.0; p]);

    let mut margin = f64::INFINITY;
    for k in 0..problem.constraints().len() {
        margin = margin.min(problem.slack(k, &y0).ok()?.min_eigenvalue());
    }
    for &j in problem.nonneg_vars() {
        margin = margin.min(y0[j]);
    }
    if margin >= PHASE1_MARGIN {
        return Some(y0);
    }

    // Variables (y, s); minimize s.
    let mut cost = vec![0.0; p + 1];
    cost[p] = 1.0;
    let mut aux = LmiProblem::new(p + 1, Objective::Linear(cost));
    for c in problem.constraints() {
        let slack = c.slack_map().padded(1);
        let d = slack.order();
        let mut m = slack;
        m.set_coeff(p, SymMatrix::identity(d));
        aux.psd(m);
    }
    for &j in problem.nonneg_vars() {
        let mut m = AffineSymMap::zeros(1, p + 1);
        m.set_coeff(j, SymMatrix::identity(1));
        m.set_coeff(p, SymMatrix::identity(1));
        aux.psd(m);
    }
    let mut floor = AffineSymMap::zeros(1, p + 1);
    floor.set_constant(SymMatrix::identity(1));
    floor.set_coeff(p, SymMatrix::identity(1));
    aux.psd(floor);

    let mut z0 = y0;
    z0.push(1.0 - margin);

    let barrier = Barrier::new(&aux);
    let outcome = barrier
        .follow(z0, opts, |z, _| z[p] < -PHASE1_MARGIN)
        .ok()?;
    let s = outcome.y[p];
    if s < -PHASE1_MARGIN {
        let mut y = outcome.y;
        y.truncate(p);
        Some(y)
    } else {
        None
    }
}

struct SlackTerm {
    map: AffineSymMap,
    active: Vec<usize>,
    objective: bool,
}

struct Barrier {
    terms: Vec<SlackTerm>,
    nonneg: Vec<usize>,
    cost: Vec<f64>,
    num_vars: usize,
    dimension: f64,
}

struct Outcome {
    y: Vec<f64>,
    t: f64,
    decrement: f64,
    outer: usize,
    newton_steps: usize,
    converged: bool,
    history: Vec<Vec<f64>>,
}

/// Per-slack data at the current point.
struct Local {
    g: Vec<DMatrix<f64>>,
}

impl Barrier {
    fn new(problem: &LmiProblem) -> Self {
        let logdet_obj = match problem.objective() {
            Objective::NegLogDet { constraint } => Some(*constraint),
            _ => None,
        };
        let terms: Vec<SlackTerm> = problem
            .constraints()
            .iter()
            .enumerate()
            .map(|(k, c)| {
                let map = c.slack_map();
                SlackTerm {
                    active: map.active_vars(),
                    map,
                    objective: logdet_obj == Some(k),
                }
            })
            .collect();
        let cost = match problem.objective() {
            Objective::Linear(c) => c.clone(),
            _ => vec![0.0; problem.num_vars()],
        };
        let dimension = terms.iter().map(|t| t.map.order() as f64).sum::<f64>()
            + problem.nonneg_vars().len() as f64;
        Barrier {
            terms,
            nonneg: problem.nonneg_vars().to_vec(),
            cost,
            num_vars: problem.num_vars(),
            dimension,
        }
    }

    fn weight(term: &SlackTerm, t: f64) -> f64 {
        if term.objective {
            1.0 + t
        } else {
            1.0
        }
    }

    fn locals(&self, y: &[f64]) -> Option<Vec<Local>> {
        self.terms
            .iter()
            .map(|term| {
                let s = term.map.eval(y).ok()?;
                let chol = Cholesky::new(s.into_inner())?;
                let l = chol.l();
                let g = term
                    .active
                    .iter()
                    .map(|&j| {
                        let x = l
                            .solve_lower_triangular(term.map.coeff(j))
                            .expect("positive pivots");
                        let g = l
                            .solve_lower_triangular(&x.transpose())
                            .expect("positive pivots");
                        linalg::symmetrize(&g)
                    })
                    .collect();
                Some(Local { g })
            })
            .collect()
    }

    fn grad_hess(&self, y: &[f64], t: f64, locals: &[Local]) -> (DVector<f64>, DMatrix<f64>) {
        let p = self.num_vars;
        let mut g = DVector::from_iterator(p, self.cost.iter().map(|c| c * t));
        let mut h = DMatrix::zeros(p, p);
        for (term, local) in self.terms.iter().zip(locals) {
            let w = Self::weight(term, t);
            for (a, &i) in term.active.iter().enumerate() {
                g[i] -= w * local.g[a].trace();
                for (b, &j) in term.active.iter().enumerate().skip(a) {
                    let v = w * local.g[a].dot(&local.g[b]);
                    h[(i, j)] += v;
                    if i != j {
                        h[(j, i)] += v;
                    }
                }
            }
        }
        for &j in &self.nonneg {
            g[j] -= 1.0 / y[j];
            h[(j, j)] += 1.0 / (y[j] * y[j]);
        }
        (g, h)
    }

    fn newton_direction(&self, g: &DVector<f64>, h: &DMatrix<f64>) -> Option<DVector<f64>> {
        if let Some(ch) = linalg::cholesky(h) {
            return Some(-ch.solve(g));
        }
        let scale = 1.0 + h.diagonal().amax();
        let mut reg = 1e-10 * scale;
        for _ in 0..20 {
            let hr = h + DMatrix::identity(h.nrows(), h.ncols()) * reg;
            if let Some(ch) = Cholesky::new(hr) {
                return Some(-ch.solve(g));
            }
            reg *= 10.0;
        }
        None
    }

    /// Newton iterations at fixed `t`. Returns the final half squared
    /// decrement and the number of steps taken.
    fn center(&self, y: &mut Vec<f64>, t: f64, opts: &SolverOptions) -> Result<(f64, usize)> {
        let mut dec = f64::INFINITY;
        for step in 0..opts.max_newton {
            let locals = self
                .locals(y)
                .ok_or_else(|| Error::OptimizerFailed("iterate left the interior".into()))?;
            let (g, h) = self.grad_hess(y, t, &locals);
            let dy = self
                .newton_direction(&g, &h)
                .ok_or_else(|| Error::OptimizerFailed("singular Newton system".into()))?;
            let slope = g.dot(&dy);
            dec = -slope / 2.0;
            if dec <= opts.newton_tol || !dec.is_finite() {
                return Ok((dec, step));
            }

            // Eigenvalues of L⁻¹ΔS L⁻ᵀ give log det S(y + s·Δy) − log det S(y)
            // in closed form for every trial s.
            let spectra: Vec<(f64, DVector<f64>)> = self
                .terms
                .iter()
                .zip(&locals)
                .map(|(term, local)| {
                    let d = term.map.order();
                    let mut m = DMatrix::zeros(d, d);
                    for (a, &j) in term.active.iter().enumerate() {
                        m += &local.g[a] * dy[j];
                    }
                    (Self::weight(term, t), SymmetricEigen::new(m).eigenvalues)
                })
                .collect();
            let lin: f64 = self.cost.iter().zip(dy.iter()).map(|(c, d)| c * d).sum::<f64>() * t;
            let delta = |s: f64| -> Option<f64> {
                let mut v = s * lin;
                for (w, mu) in &spectra {
                    for &m in mu.iter() {
                        let arg = s * m;
                        if arg <= -1.0 {
                            return None;
                        }
                        v -= w * arg.ln_1p();
                    }
                }
                for &j in &self.nonneg {
                    let arg = s * dy[j] / y[j];
                    if arg <= -1.0 {
                        return None;
                    }
                    v -= arg.ln_1p();
                }
                Some(v)
            };

            let mut s = 1.0;
            loop {
                if let Some(d) = delta(s) {
                    if d <= 1e-4 * s * slope {
                        break;
                    }
                }
                s *= 0.5;
                if s < 1e-14 {
                    return Ok((dec, step));
                }
            }
            for (yi, di) in y.iter_mut().zip(dy.iter()) {
                *yi += s * di;
            }
            // Guard against accumulated round-off pushing a slack to the
            // boundary; an exact Cholesky trial is the final word.
            if self.locals(y).is_none() {
                for (yi, di) in y.iter_mut().zip(dy.iter()) {
                    *yi -= 0.5 * s * di;
                }
            }
        }
        Ok((dec, opts.max_newton))
    }

    fn objective_proxy(&self, y: &[f64]) -> f64 {
        let lin: f64 = self.cost.iter().zip(y).map(|(c, v)| c * v).sum();
        let logdet: f64 = self
            .terms
            .iter()
            .filter(|t| t.objective)
            .filter_map(|t| t.map.eval(y).ok())
            .filter_map(|s| linalg::spd_logdet(s.as_matrix()).ok())
            .map(|l| -l)
            .sum();
        lin + logdet
    }

    fn follow(
        &self,
        mut y: Vec<f64>,
        opts: &SolverOptions,
        mut stop: impl FnMut(&[f64], f64) -> bool,
    ) -> Result<Outcome> {
        let mut t = opts.initial_mu;
        let mut newton_steps = 0;
        let mut history = Vec::new();
        let mut decrement = f64::INFINITY;
        for outer in 1..=opts.max_outer {
            let (dec, steps) = self.center(&mut y, t, opts)?;
            decrement = dec;
            newton_steps += steps;
            history.push(y.clone());

            if y.iter().any(|v| v.abs() > UNBOUNDED_LIMIT)
                || self.objective_proxy(&y) < -UNBOUNDED_LIMIT
            {
                return Err(Error::Infeasible("objective is unbounded below".into()));
            }
            let done = self.dimension / t <= opts.path_tol;
            if done || stop(&y, t) {
                return Ok(Outcome {
                    y,
                    t,
                    decrement,
                    outer,
                    newton_steps,
                    converged: true,
                    history,
                });
            }
            t *= opts.mu_growth;
        }
        Ok(Outcome {
            y,
            t,
            decrement,
            outer: opts.max_outer,
            newton_steps,
            converged: false,
            history,
        })
    }
}

/// Recovers a symmetric matrix block stored in scaled coordinates at
/// `y[offset..offset + n(n+1)/2]`.
pub fn sym_block(y: &[f64], offset: usize, n: usize) -> DMatrix<f64> {
    sym_from_coords(n, &y[offset..offset + linalg::sym_dim(n)])
}
