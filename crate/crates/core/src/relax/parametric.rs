//! The parametric family `W_t = Σ t_i W_i`, `x_t = W_t⁻¹ Σ t_i W_i x_i` over
//! simplex weights, where `W_i = P_i⁻¹`. The scalar
//! `δ_t = Σ t_i (x_i − x_t)ᵀ W_i (x_i − x_t)` tightens the fused shape:
//! `{x : Σ t_i q_i(x) ≤ 0}` is exactly `(x_t, (1 − δ_t) W_t⁻¹)`, so it
//! contains the intersection.

use nalgebra::{DMatrix, DVector};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Exp1};
use serde::{Deserialize, Serialize};
use serde_json::json;

use crate::ellipsoid::{Ellipsoid, IntersectionSpec, SizeCriterion};
use crate::error::{Error, Result};
use crate::linalg::{self, SymMatrix};

use super::method::{Method, MethodResult, RelaxOptions};
use super::weights::{project_simplex, Normalization, WeightVector};

/// Upper clamp on `δ_t` before forming `(1 − δ_t)·P_t`.
pub const DELTA_CLAMP: f64 = 1.0 - 1e-12;

/// `δ_t` above `1` by more than this proves the intersection empty.
const DELTA_EMPTY: f64 = 1e-9;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ParametricFusion {
    /// `P_t = (Σ t_i P_i⁻¹)⁻¹`
    pub shape: SymMatrix,
    pub center: DVector<f64>,
    pub delta: f64,
}

impl ParametricFusion {
    /// `(x_t, (1 − δ_t)·P_t)` with `δ_t` clamped to `[0, 1 − 1e-12]`.
    pub fn outer_ellipsoid(&self) -> Result<Ellipsoid> {
        let d = self.delta.clamp(0.0, DELTA_CLAMP);
        Ellipsoid::new(self.center.clone(), self.shape.scale(1.0 - d))
    }

    /// `(x_t, P_t)` without tightening.
    pub fn unscaled_ellipsoid(&self) -> Result<Ellipsoid> {
        Ellipsoid::new(self.center.clone(), self.shape.clone())
    }
}

pub fn parametric_fuse(spec: &IntersectionSpec, t: &WeightVector) -> Result<ParametricFusion> {
    if t.len() != spec.len() {
        return Err(Error::dim(spec.len(), t.len()));
    }
    if t.normalization() != Normalization::Simplex {
        return Err(Error::DegenerateInput("parametric fusion needs simplex weights".into()));
    }
    let fam = Family::new(spec);
    let ev = fam.eval(t.as_slice())?;
    Ok(ParametricFusion {
        shape: SymMatrix::symmetrized(&ev.p)?,
        center: ev.x,
        delta: ev.delta,
    })
}

/// Precomputed inverse shapes of the members.
pub(crate) struct Family {
    n: usize,
    w: Vec<DMatrix<f64>>,
    b: Vec<DVector<f64>>,
    centers: Vec<DVector<f64>>,
}

pub(crate) struct Evaluation {
    /// `W_t⁻¹`
    pub p: DMatrix<f64>,
    pub logdet_w: f64,
    pub x: DVector<f64>,
    pub delta: f64,
    /// `d_i = (x_i − x_t)ᵀ W_i (x_i − x_t) = ∂δ_t/∂t_i`
    pub d: Vec<f64>,
}

impl Family {
    pub fn new(spec: &IntersectionSpec) -> Self {
        let w: Vec<DMatrix<f64>> = spec.ellipsoids().iter().map(|e| e.shape_inverse()).collect();
        let b = spec
            .ellipsoids()
            .iter()
            .zip(&w)
            .map(|(e, wi)| wi * e.center())
            .collect();
        Family {
            n: spec.dim(),
            w,
            b,
            centers: spec.ellipsoids().iter().map(|e| e.center().clone()).collect(),
        }
    }

    pub fn eval(&self, t: &[f64]) -> Result<Evaluation> {
        let n = self.n;
        let mut wt = DMatrix::zeros(n, n);
        let mut bt = DVector::zeros(n);
        for ((wi, bi), &ti) in self.w.iter().zip(&self.b).zip(t) {
            if ti != 0.0 {
                wt += wi * ti;
                bt += bi * ti;
            }
        }
        let wt = linalg::symmetrize(&wt);
        let chol = linalg::cholesky(&wt).ok_or(Error::SingularCombination)?;
        let x = chol.solve(&bt);
        let p = linalg::symmetrize(&chol.inverse());
        let logdet_w = linalg::logdet_from_cholesky(&chol);
        let d: Vec<f64> = self
            .centers
            .iter()
            .zip(&self.w)
            .map(|(c, wi)| {
                let r = c - &x;
                r.dot(&(wi * &r))
            })
            .collect();
        let delta = d.iter().zip(t).map(|(di, ti)| di * ti).sum();
        Ok(Evaluation {
            p,
            logdet_w,
            x,
            delta,
            d,
        })
    }

    /// Size of `P_t` (`tighten = false`) or of `(1 − δ_t)·P_t`, with its
    /// gradient in `t`.
    pub fn objective(
        &self,
        t: &[f64],
        criterion: SizeCriterion,
        tighten: bool,
    ) -> Result<(f64, Vec<f64>)> {
        let ev = self.eval(t)?;
        let n = self.n as f64;
        if tighten && ev.delta > 1.0 + DELTA_EMPTY {
            return Err(Error::Infeasible(format!(
                "weighted quadratic has no solutions (delta = {}); the intersection is empty",
                ev.delta
            )));
        }
        let one_minus = if tighten {
            1.0 - ev.delta.clamp(0.0, DELTA_CLAMP)
        } else {
            1.0
        };
        let (value, grad) = match criterion {
            SizeCriterion::LogDet => {
                let mut v = -ev.logdet_w;
                if tighten {
                    v += n * one_minus.ln();
                }
                let g = self
                    .w
                    .iter()
                    .zip(&ev.d)
                    .map(|(wi, di)| {
                        let base = -ev.p.dot(wi);
                        if tighten {
                            base - n * di / one_minus
                        } else {
                            base
                        }
                    })
                    .collect();
                (v, g)
            }
            SizeCriterion::Trace => {
                let tr = ev.p.trace();
                let pp = &ev.p * &ev.p;
                let g = self
                    .w
                    .iter()
                    .zip(&ev.d)
                    .map(|(wi, di)| {
                        let base = -pp.dot(wi);
                        if tighten {
                            -di * tr + one_minus * base
                        } else {
                            base
                        }
                    })
                    .collect();
                (one_minus * tr, g)
            }
        };
        if !value.is_finite() {
            return Err(Error::OptimizerFailed("objective is not finite".into()));
        }
        Ok((value, grad))
    }
}

pub(crate) struct SimplexRun {
    pub t: Vec<f64>,
    pub value: f64,
    pub iterations: usize,
}

/// Projected gradient with Armijo backtracking along the projection arc.
pub(crate) fn projected_gradient(
    mut f: impl FnMut(&[f64]) -> Result<(f64, Vec<f64>)>,
    start: Vec<f64>,
    max_iterations: usize,
) -> Result<SimplexRun> {
    let mut t = start;
    let (mut value, mut grad) = f(&t)?;
    let mut alpha = 1.0 / (1.0 + grad.iter().fold(0.0_f64, |a, g| a.max(g.abs())));
    for it in 0..max_iterations {
        let mut accepted = None;
        loop {
            let trial: Vec<f64> = t.iter().zip(&grad).map(|(ti, gi)| ti - alpha * gi).collect();
            let cand = project_simplex(&trial);
            let step: Vec<f64> = cand.iter().zip(&t).map(|(c, ti)| c - ti).collect();
            let size = step.iter().fold(0.0_f64, |a, s| a.max(s.abs()));
            if size <= 1e-15 {
                break;
            }
            let (fc, gc) = f(&cand)?;
            let slope: f64 = grad.iter().zip(&step).map(|(g, s)| g * s).sum();
            if fc <= value + 1e-4 * slope {
                accepted = Some((cand, fc, gc, size));
                break;
            }
            alpha *= 0.5;
            if alpha < 1e-30 {
                break;
            }
        }
        let Some((cand, fc, gc, size)) = accepted else {
            return Ok(SimplexRun {
                t,
                value,
                iterations: it,
            });
        };
        t = cand;
        value = fc;
        grad = gc;
        if size <= 1e-12 {
            return Ok(SimplexRun {
                t,
                value,
                iterations: it + 1,
            });
        }
        alpha = (alpha * 2.0).min(1e12);
    }
    Ok(SimplexRun {
        t,
        value,
        iterations: max_iterations,
    })
}

/// Minimizes a scalar function on `[0, 1]`. On exact ties both ends of the
/// bracket move, so a constant function yields `0.5`.
pub(crate) fn golden_section(mut f: impl FnMut(f64) -> Result<f64>, tol: f64) -> Result<f64> {
    let inv_phi = (5f64.sqrt() - 1.0) / 2.0;
    let (mut a, mut b) = (0.0_f64, 1.0_f64);
    let mut c = b - inv_phi * (b - a);
    let mut d = a + inv_phi * (b - a);
    let mut fc = f(c)?;
    let mut fd = f(d)?;
    while b - a > tol {
        if fc < fd {
            b = d;
            d = c;
            fd = fc;
            c = b - inv_phi * (b - a);
            fc = f(c)?;
        } else if fd < fc {
            a = c;
            c = d;
            fc = fd;
            d = a + inv_phi * (b - a);
            fd = f(d)?;
        } else {
            a = c;
            b = d;
            c = b - inv_phi * (b - a);
            d = a + inv_phi * (b - a);
            fc = f(c)?;
            fd = f(d)?;
        }
    }
    let mid = 0.5 * (a + b);
    let fm = f(mid)?;
    let mut best = (mid, fm);
    for end in [0.0, 1.0] {
        let fe = f(end)?;
        if fe < best.1 - 1e-12 * (1.0 + best.1.abs()) {
            best = (end, fe);
        }
    }
    Ok(best.0)
}

fn single_member(method: Method, spec: &IntersectionSpec, criterion: SizeCriterion) -> MethodResult {
    let e = spec.ellipsoids()[0].clone();
    MethodResult {
        method,
        objective: e.size(criterion),
        ellipsoid: e,
        weights: Some(WeightVector::vertex(1, 0)),
        diagnostics: json!({ "delta": 0.0 }),
    }
}

fn simplex(t: Vec<f64>) -> WeightVector {
    WeightVector::simplex_from(&t)
}

/// Minimizes the size of `P_t` from the barycenter. The objective is convex
/// in `t`, so one start suffices.
fn ci_weights(
    fam: &Family,
    m: usize,
    criterion: SizeCriterion,
    opts: &RelaxOptions,
) -> Result<SimplexRun> {
    projected_gradient(
        |t| fam.objective(t, criterion, false),
        vec![1.0 / m as f64; m],
        opts.max_iterations,
    )
}

pub fn covariance_intersection(
    spec: &IntersectionSpec,
    criterion: SizeCriterion,
    opts: &RelaxOptions,
) -> Result<MethodResult> {
    if spec.len() == 1 {
        return Ok(single_member(Method::CovarianceIntersection, spec, criterion));
    }
    let fam = Family::new(spec);
    let run = ci_weights(&fam, spec.len(), criterion, opts)?;
    let w = simplex(run.t);
    let fused = parametric_fuse(spec, &w)?;
    check_delta(fused.delta)?;
    let e = fused.unscaled_ellipsoid()?;
    Ok(MethodResult {
        method: Method::CovarianceIntersection,
        objective: e.size(criterion),
        ellipsoid: e,
        weights: Some(w),
        diagnostics: json!({ "delta": fused.delta, "iterations": run.iterations }),
    })
}

pub fn bounding_no_delta(
    spec: &IntersectionSpec,
    criterion: SizeCriterion,
    opts: &RelaxOptions,
) -> Result<MethodResult> {
    if spec.len() == 1 {
        return Ok(single_member(Method::BoundingNoDelta, spec, criterion));
    }
    let fam = Family::new(spec);
    let run = ci_weights(&fam, spec.len(), criterion, opts)?;
    let w = simplex(run.t);
    let fused = parametric_fuse(spec, &w)?;
    check_delta(fused.delta)?;
    let e = fused.outer_ellipsoid()?;
    Ok(MethodResult {
        method: Method::BoundingNoDelta,
        objective: e.size(criterion),
        ellipsoid: e,
        weights: Some(w),
        diagnostics: json!({ "delta": fused.delta, "iterations": run.iterations }),
    })
}

fn check_delta(delta: f64) -> Result<()> {
    if delta > 1.0 + DELTA_EMPTY {
        Err(Error::Infeasible(format!(
            "delta = {delta} exceeds 1; the intersection is empty"
        )))
    } else {
        Ok(())
    }
}

/// Start points: barycenter, vertices, then seeded Dirichlet(1) draws.
fn multistarts(m: usize, count: usize, seed: u64) -> Vec<Vec<f64>> {
    let mut starts = vec![vec![1.0 / m as f64; m]];
    starts.extend((0..m).map(|i| WeightVector::vertex(m, i).as_slice().to_vec()));
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    while starts.len() < count {
        let e: Vec<f64> = (0..m).map(|_| Exp1.sample(&mut rng)).collect();
        let s: f64 = e.iter().sum();
        starts.push(e.into_iter().map(|v: f64| v / s).collect());
    }
    starts
}

pub fn bounding_optimal(
    spec: &IntersectionSpec,
    criterion: SizeCriterion,
    opts: &RelaxOptions,
) -> Result<MethodResult> {
    if spec.len() == 1 {
        return Ok(single_member(Method::BoundingOptimal, spec, criterion));
    }
    let fam = Family::new(spec);
    let m = spec.len();
    let mut runs = Vec::new();
    for start in multistarts(m, opts.multistarts, opts.multistart_seed) {
        runs.push(projected_gradient(
            |t| fam.objective(t, criterion, true),
            start,
            opts.max_iterations,
        )?);
    }
    let mut best = 0;
    for (k, r) in runs.iter().enumerate().skip(1) {
        let incumbent = runs[best].value;
        if r.value < incumbent - 1e-12 * (1.0 + incumbent.abs()) {
            best = k;
        }
    }
    let values: Vec<f64> = runs.iter().map(|r| r.value).collect();
    let iterations = runs[best].iterations;
    let w = simplex(runs.swap_remove(best).t);
    let fused = parametric_fuse(spec, &w)?;
    check_delta(fused.delta)?;
    let e = fused.outer_ellipsoid()?;
    Ok(MethodResult {
        method: Method::BoundingOptimal,
        objective: e.size(criterion),
        ellipsoid: e,
        weights: Some(w),
        diagnostics: json!({
            "delta": fused.delta,
            "iterations": iterations,
            "multistart_values": values,
        }),
    })
}

/// Folds the members in order, fusing the running ellipsoid with the next
/// member at the scalar weight that minimizes the size of `P_t`.
pub fn recursive_bounding(
    spec: &IntersectionSpec,
    criterion: SizeCriterion,
    scale_delta: bool,
) -> Result<MethodResult> {
    let members = spec.ellipsoids();
    let mut current = members[0].clone();
    let mut steps = Vec::new();
    for next in &members[1..] {
        let pair = IntersectionSpec::new(vec![current.clone(), next.clone()])?;
        let fam = Family::new(&pair);
        let t = golden_section(
            |s| fam.objective(&[1.0 - s, s], criterion, false).map(|(v, _)| v),
            1e-10,
        )?;
        let w = WeightVector::new(vec![1.0 - t, t], Normalization::Simplex)
            .unwrap_or_else(|_| WeightVector::simplex_from(&[1.0 - t, t]));
        let fused = parametric_fuse(&pair, &w)?;
        current = if scale_delta {
            check_delta(fused.delta)?;
            fused.outer_ellipsoid()?
        } else {
            fused.unscaled_ellipsoid()?
        };
        steps.push(json!({ "t": t, "delta": fused.delta }));
    }
    Ok(MethodResult {
        method: Method::RecursiveBounding,
        objective: current.size(criterion),
        ellipsoid: current,
        weights: None,
        diagnostics: json!({ "scale_delta": scale_delta, "steps": steps }),
    })
}
