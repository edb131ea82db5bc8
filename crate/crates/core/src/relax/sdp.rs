//! LMI relaxations of the minimum outer ellipsoid problem.
//!
//! Notation: `W_i = P_i⁻¹`, `b_i = W_i x_i`, `c_i = x_iᵀ W_i x_i`, and for the
//! unknown ellipsoid `W = P₀⁻¹`, `x̃ = W x₀`.
//!
//! * Full relaxation, order `2n+1`, required `⪯ 0`:
//!   `[[W − Σλ_iW_i, −x̃ + Σλ_ib_i, 0], [·, −1 − Σλ_i(c_i−1), x̃ᵀ], [0, x̃, −W]]`
//! * S-procedure form, required `⪰ 0`: `[[Στ_iA_i − A(W, x̃), e x̃ᵀ], [x̃ eᵀ, W]]`
//!   with `A_i` the member quadratic forms and `A(W, x̃) = [[W, −x̃], [−x̃ᵀ, −1]]`.
//!   It is a congruence of the full relaxation, so both have one feasible set.
//! * Decoupled form, order `n+1`, required `⪰ 0`:
//!   `[[1, 0], [0, 0]] + Σλ_i [[c_i − 1, b_iᵀ], [b_i, W_i]]`, with the
//!   ellipsoid recovered as `W = Σλ_iW_i`, `x₀ = W⁻¹ Σλ_ib_i`.

use nalgebra::{DMatrix, DVector};
use serde_json::json;

use crate::barrier::{self, AffineSymMap, BlockBuilder, LmiProblem, Objective, SolverResult};
use crate::ellipsoid::{Ellipsoid, IntersectionSpec, SizeCriterion};
use crate::error::{Error, Result};
use crate::linalg::{self, sym_basis, sym_dim, sym_from_coords, SymMatrix};

use super::method::{Method, MethodResult, RelaxOptions};
use super::weights::WeightVector;

struct Members {
    n: usize,
    w: Vec<DMatrix<f64>>,
    b: Vec<DVector<f64>>,
    c: Vec<f64>,
}

impl Members {
    fn new(spec: &IntersectionSpec) -> Self {
        let w: Vec<DMatrix<f64>> = spec.ellipsoids().iter().map(|e| e.shape_inverse()).collect();
        let b: Vec<DVector<f64>> = spec
            .ellipsoids()
            .iter()
            .zip(&w)
            .map(|(e, wi)| wi * e.center())
            .collect();
        let c = spec
            .ellipsoids()
            .iter()
            .zip(&b)
            .map(|(e, bi)| e.center().dot(bi))
            .collect();
        Members {
            n: spec.dim(),
            w,
            b,
            c,
        }
    }

    fn m(&self) -> usize {
        self.w.len()
    }
}

fn objective_for(criterion: SizeCriterion, constraint: usize) -> Objective {
    match criterion {
        SizeCriterion::LogDet => Objective::NegLogDet { constraint },
        SizeCriterion::Trace => Objective::TraceInverse { constraint },
    }
}

fn col(v: &DVector<f64>) -> DMatrix<f64> {
    DMatrix::from_column_slice(v.len(), 1, v.as_slice())
}

fn unit(n: usize, j: usize) -> DMatrix<f64> {
    let mut e = DMatrix::zeros(n, 1);
    e[(j, 0)] = 1.0;
    e
}

fn scalar(v: f64) -> DMatrix<f64> {
    DMatrix::from_element(1, 1, v)
}

/// The decoupled map in `λ` (order `n+1`, scalar entry first).
pub fn decoupled_map(spec: &IntersectionSpec) -> AffineSymMap {
    let mm = Members::new(spec);
    let n = mm.n;
    let mut b = BlockBuilder::new(n + 1, mm.m());
    b.add_constant(0, 0, &scalar(1.0));
    for i in 0..mm.m() {
        b.add_coeff(i, 0, 0, &scalar(mm.c[i] - 1.0));
        b.add_coeff(i, 1, 0, &col(&mm.b[i]));
        b.add_coeff(i, 1, 1, &mm.w[i]);
    }
    b.finish()
}

/// `Σλ_i W_i` as a map in `λ`.
fn weighted_inverse_map(mm: &Members) -> AffineSymMap {
    let coeffs = mm
        .w
        .iter()
        .map(|w| SymMatrix::symmetrized(w).expect("square"))
        .collect();
    AffineSymMap::new(SymMatrix::zeros(mm.n), coeffs).expect("one order")
}

pub fn decoupled_problem(spec: &IntersectionSpec, criterion: SizeCriterion) -> LmiProblem {
    let mm = Members::new(spec);
    let m = mm.m();
    let mut p = LmiProblem::new(m, Objective::Linear(vec![0.0; m]));
    p.psd(decoupled_map(spec));
    let k = p.psd(weighted_inverse_map(&mm));
    p.nonneg(0..m);
    p.set_objective(objective_for(criterion, k));
    p
}

fn solver_json(r: &SolverResult) -> serde_json::Value {
    json!({
        "solver_objective": r.objective,
        "solver": r.diagnostics,
    })
}

pub fn decoupled_sdp(
    spec: &IntersectionSpec,
    criterion: SizeCriterion,
    opts: &RelaxOptions,
) -> Result<MethodResult> {
    let problem = decoupled_problem(spec, criterion);
    let m = spec.len();
    let start = vec![0.5 / m as f64; m];
    let r = barrier::solve(&problem, &opts.solver, Some(&start))?;
    let mm = Members::new(spec);
    let e = recover_decoupled(&mm, &r.y)?;
    Ok(MethodResult {
        method: Method::DecoupledSdp,
        objective: e.size(criterion),
        ellipsoid: e,
        weights: Some(WeightVector::nonnegative_clipped(&r.y)),
        diagnostics: solver_json(&r),
    })
}

fn recover_decoupled(mm: &Members, lambda: &[f64]) -> Result<Ellipsoid> {
    let n = mm.n;
    let mut w = DMatrix::zeros(n, n);
    let mut bsum = DVector::zeros(n);
    for i in 0..mm.m() {
        w += &mm.w[i] * lambda[i];
        bsum += &mm.b[i] * lambda[i];
    }
    let chol = linalg::cholesky(&linalg::symmetrize(&w)).ok_or(Error::SingularCombination)?;
    let center = chol.solve(&bsum);
    Ellipsoid::new(center, SymMatrix::symmetrized(&chol.inverse())?)
}

/// Variable layout shared by the full and S-procedure problems:
/// `[W (scaled upper triangle) | x̃ | λ]`.
struct Layout {
    n: usize,
    m: usize,
}

impl Layout {
    fn k(&self) -> usize {
        sym_dim(self.n)
    }
    fn xt(&self, j: usize) -> usize {
        self.k() + j
    }
    fn lam(&self, i: usize) -> usize {
        self.k() + self.n + i
    }
    fn total(&self) -> usize {
        self.k() + self.n + self.m
    }
    fn w_map(&self) -> AffineSymMap {
        let mut coeffs = sym_basis(self.n);
        coeffs.extend(std::iter::repeat_n(SymMatrix::zeros(self.n), self.n + self.m));
        AffineSymMap::new(SymMatrix::zeros(self.n), coeffs).expect("one order")
    }
}

/// The full relaxation map (required `⪯ 0`) in `[W | x̃ | λ]`.
pub fn full_sdp_map(spec: &IntersectionSpec) -> AffineSymMap {
    let mm = Members::new(spec);
    let l = Layout { n: mm.n, m: mm.m() };
    let n = l.n;
    let mut b = BlockBuilder::new(2 * n + 1, l.total());
    for (k, basis) in sym_basis(n).iter().enumerate() {
        b.add_coeff(k, 0, 0, basis);
        b.add_coeff(k, n + 1, n + 1, &-basis.as_matrix());
    }
    for j in 0..n {
        b.add_coeff(l.xt(j), 0, n, &-unit(n, j));
        b.add_coeff(l.xt(j), n, n + 1, &unit(n, j).transpose());
    }
    b.add_constant(n, n, &scalar(-1.0));
    for i in 0..l.m {
        b.add_coeff(l.lam(i), 0, 0, &-&mm.w[i]);
        b.add_coeff(l.lam(i), 0, n, &col(&mm.b[i]));
        b.add_coeff(l.lam(i), n, n, &scalar(-(mm.c[i] - 1.0)));
    }
    b.finish()
}

/// The S-procedure map (required `⪰ 0`) in `[W | x̃ | τ]`, assembled from
/// the members' quadratic forms.
pub fn s_procedure_map(spec: &IntersectionSpec) -> AffineSymMap {
    let n = spec.dim();
    let l = Layout { n, m: spec.len() };
    let mut b = BlockBuilder::new(2 * n + 1, l.total());
    for (i, e) in spec.ellipsoids().iter().enumerate() {
        b.add_coeff(l.lam(i), 0, 0, e.quadratic_form().matrix());
    }
    for (k, basis) in sym_basis(n).iter().enumerate() {
        b.add_coeff(k, 0, 0, &-basis.as_matrix());
        b.add_coeff(k, n + 1, n + 1, basis);
    }
    for j in 0..n {
        // −A(W, x̃) contributes +x̃ to the off-diagonal of the top-left block.
        b.add_coeff(l.xt(j), 0, n, &unit(n, j));
        b.add_coeff(l.xt(j), n, n + 1, &unit(n, j).transpose());
    }
    b.add_constant(n, n, &scalar(1.0));
    b.finish()
}

pub fn full_sdp_problem(spec: &IntersectionSpec, criterion: SizeCriterion) -> LmiProblem {
    let l = Layout { n: spec.dim(), m: spec.len() };
    let mut p = LmiProblem::new(l.total(), Objective::Linear(vec![0.0; l.total()]));
    p.nsd(full_sdp_map(spec));
    let k = p.psd(l.w_map());
    p.nonneg((0..l.m).map(|i| l.lam(i)));
    p.set_objective(objective_for(criterion, k));
    p
}

pub fn s_procedure_problem(spec: &IntersectionSpec, criterion: SizeCriterion) -> LmiProblem {
    let l = Layout { n: spec.dim(), m: spec.len() };
    let mut p = LmiProblem::new(l.total(), Objective::Linear(vec![0.0; l.total()]));
    p.psd(s_procedure_map(spec));
    let k = p.psd(l.w_map());
    p.nonneg((0..l.m).map(|i| l.lam(i)));
    p.set_objective(objective_for(criterion, k));
    p
}

fn recover_full(spec: &IntersectionSpec, y: &[f64]) -> Result<(Ellipsoid, Vec<f64>)> {
    let l = Layout { n: spec.dim(), m: spec.len() };
    let w = sym_from_coords(l.n, &y[..l.k()]);
    let xt = DVector::from_column_slice(&y[l.xt(0)..l.xt(0) + l.n]);
    let chol = linalg::cholesky(&w).ok_or(Error::NotPositiveDefinite)?;
    let center = chol.solve(&xt);
    let e = Ellipsoid::new(center, SymMatrix::symmetrized(&chol.inverse())?)?;
    Ok((e, y[l.lam(0)..].to_vec()))
}

fn run_lifted(
    method: Method,
    spec: &IntersectionSpec,
    criterion: SizeCriterion,
    problem: LmiProblem,
    opts: &RelaxOptions,
) -> Result<MethodResult> {
    let r = barrier::solve(&problem, &opts.solver, None)?;
    let (e, lam) = recover_full(spec, &r.y)?;
    Ok(MethodResult {
        method,
        objective: e.size(criterion),
        ellipsoid: e,
        weights: Some(WeightVector::nonnegative_clipped(&lam)),
        diagnostics: solver_json(&r),
    })
}

pub fn full_sdp(
    spec: &IntersectionSpec,
    criterion: SizeCriterion,
    opts: &RelaxOptions,
) -> Result<MethodResult> {
    run_lifted(Method::FullSdp, spec, criterion, full_sdp_problem(spec, criterion), opts)
}

pub fn s_procedure(
    spec: &IntersectionSpec,
    criterion: SizeCriterion,
    opts: &RelaxOptions,
) -> Result<MethodResult> {
    run_lifted(Method::SProcedure, spec, criterion, s_procedure_problem(spec, criterion), opts)
}

fn candidate_coords(spec: &IntersectionSpec, candidate: &Ellipsoid, lambda: &[f64]) -> Result<Vec<f64>> {
    if candidate.dim() != spec.dim() {
        return Err(Error::dim(spec.dim(), candidate.dim()));
    }
    if lambda.len() != spec.len() {
        return Err(Error::dim(spec.len(), lambda.len()));
    }
    let w = candidate.shape_inverse();
    let xt = &w * candidate.center();
    let mut y = linalg::sym_to_coords(&w);
    y.extend(xt.iter());
    y.extend_from_slice(lambda);
    Ok(y)
}

/// Whether `(P₀⁻¹, P₀⁻¹x₀, λ)` satisfies the full relaxation LMI with `λ ≥ 0`.
pub fn sdp_feasible(spec: &IntersectionSpec, candidate: &Ellipsoid, lambda: &[f64]) -> Result<bool> {
    let y = candidate_coords(spec, candidate, lambda)?;
    if lambda.iter().any(|l| *l < 0.0) {
        return Ok(false);
    }
    let m = full_sdp_map(spec).eval(&y)?;
    Ok(linalg::is_psd(&-m.as_matrix()))
}

/// Whether `A₀ ⪯ Σ τ_i A_i` for the candidate's quadratic form `A₀`, which
/// certifies that the candidate contains the intersection.
pub fn s_procedure_certificate(
    spec: &IntersectionSpec,
    candidate: &Ellipsoid,
    tau: &[f64],
) -> Result<bool> {
    candidate_coords(spec, candidate, tau)?;
    if tau.iter().any(|t| *t < 0.0) {
        return Ok(false);
    }
    let mut s = -candidate.quadratic_form().matrix().as_matrix();
    for (e, &t) in spec.ellipsoids().iter().zip(tau) {
        s += e.quadratic_form().matrix().as_matrix() * t;
    }
    Ok(linalg::is_psd(&s))
}

/// Bound on `Σ τ_i` during the certificate search.
const TAU_BOUND: f64 = 1e6;

/// Searches for multipliers with `A₀ ⪯ Σ τ_i A_i` by minimizing `s` subject
/// to `Σ τ_i A_i − A₀ + s·I ⪰ 0`. Returns the multipliers only when they
/// pass [`s_procedure_certificate`].
pub fn find_certificate(
    spec: &IntersectionSpec,
    candidate: &Ellipsoid,
    opts: &RelaxOptions,
) -> Result<Option<WeightVector>> {
    if candidate.dim() != spec.dim() {
        return Err(Error::dim(spec.dim(), candidate.dim()));
    }
    let n = spec.dim();
    let m = spec.len();
    let vars = m + 1;
    let mut cost = vec![0.0; vars];
    cost[m] = 1.0;
    let mut p = LmiProblem::new(vars, Objective::Linear(cost));

    let mut coeffs: Vec<SymMatrix> = spec
        .ellipsoids()
        .iter()
        .map(|e| e.quadratic_form().0)
        .collect();
    coeffs.push(SymMatrix::identity(n + 1));
    p.psd(AffineSymMap::new(candidate.quadratic_form().0.scale(-1.0), coeffs)?);

    let mut floor = AffineSymMap::zeros(1, vars);
    floor.set_constant(SymMatrix::identity(1));
    floor.set_coeff(m, SymMatrix::identity(1));
    p.psd(floor);

    let mut cap = AffineSymMap::zeros(1, vars);
    cap.set_constant(SymMatrix::identity(1).scale(TAU_BOUND));
    for i in 0..m {
        cap.set_coeff(i, SymMatrix::identity(1).scale(-1.0));
    }
    p.psd(cap);
    p.nonneg(0..m);

    let r = match barrier::solve(&p, &opts.solver, None) {
        Ok(r) => r,
        Err(Error::MaxIterations(r)) => *r,
        Err(e) => return Err(e),
    };
    let tau: Vec<f64> = r.y[..m].iter().map(|t| t.max(0.0)).collect();
    if s_procedure_certificate(spec, candidate, &tau)? {
        Ok(Some(WeightVector::nonnegative_clipped(&tau)))
    } else {
        Ok(None)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;

    fn interval(c: f64, p: f64) -> Ellipsoid {
        Ellipsoid::from_slices(&[c], &[vec![p]]).unwrap()
    }

    fn pair_1d() -> IntersectionSpec {
        IntersectionSpec::new(vec![interval(0.0, 1.0), interval(1.0, 1.0)]).unwrap()
    }

    #[test]
    fn decoupled_map_on_1d_pair() {
        // Scalar entry: 1 + ½(0 − 1) + ½(1 − 1) = ½.
        let m = decoupled_map(&pair_1d()).eval(&[0.5, 0.5]).unwrap();
        assert_abs_diff_eq!(m[(0, 0)], 0.5, epsilon = 1e-15);
        assert_abs_diff_eq!(m[(0, 1)], 0.5, epsilon = 1e-15);
        assert_abs_diff_eq!(m[(1, 1)], 1.0, epsilon = 1e-15);
    }

    #[test]
    fn single_member_is_returned() {
        let e = Ellipsoid::from_slices(&[1.0, -2.0], &[vec![3.0, 1.0], vec![1.0, 2.0]]).unwrap();
        let spec = IntersectionSpec::new(vec![e.clone()]).unwrap();
        let opts = RelaxOptions::default();
        for criterion in [SizeCriterion::LogDet, SizeCriterion::Trace] {
            for r in [
                decoupled_sdp(&spec, criterion, &opts).unwrap(),
                full_sdp(&spec, criterion, &opts).unwrap(),
                s_procedure(&spec, criterion, &opts).unwrap(),
            ] {
                assert_abs_diff_eq!(r.ellipsoid.center(), e.center(), epsilon = 1e-6);
                assert_abs_diff_eq!(*r.ellipsoid.shape().as_matrix(), *e.shape().as_matrix(), epsilon = 1e-6);
                assert_abs_diff_eq!(r.weights.as_ref().unwrap().as_slice()[0], 1.0, epsilon = 1e-6);
            }
        }
    }

    #[test]
    fn one_dimensional_pair_by_hand() {
        // Weighted sums of x² − 1 and (x − 1)² − 1 cannot vanish at both 0
        // and 1, so the relaxation is not exact here: the best member is
        // t = (½, ½) with δ = ¼, giving shape ¾ about 0.5.
        let opts = RelaxOptions::default();
        let r = decoupled_sdp(&pair_1d(), SizeCriterion::LogDet, &opts).unwrap();
        assert_abs_diff_eq!(r.ellipsoid.center()[0], 0.5, epsilon = 1e-6);
        assert_abs_diff_eq!(r.ellipsoid.shape()[(0, 0)], 0.75, epsilon = 1e-6);
        let f = full_sdp(&pair_1d(), SizeCriterion::LogDet, &opts).unwrap();
        assert_abs_diff_eq!(f.objective, r.objective, epsilon = 1e-6);
    }

    #[test]
    fn disjoint_members_are_infeasible() {
        let spec = IntersectionSpec::new(vec![interval(0.0, 1.0), interval(5.0, 1.0)]).unwrap();
        let opts = RelaxOptions::default();
        assert!(matches!(decoupled_sdp(&spec, SizeCriterion::LogDet, &opts), Err(Error::Infeasible(_))));
        assert!(matches!(full_sdp(&spec, SizeCriterion::LogDet, &opts), Err(Error::Infeasible(_))));
    }

    #[test]
    fn certificate_of_a_member_itself() {
        let e = Ellipsoid::from_slices(&[1.0, 0.0], &[vec![2.0, 0.3], vec![0.3, 1.0]]).unwrap();
        let spec = IntersectionSpec::new(vec![e.clone()]).unwrap();
        assert!(s_procedure_certificate(&spec, &e, &[1.0]).unwrap());
        assert!(!s_procedure_certificate(&spec, &e, &[-1.0]).unwrap());
        let shrunk = e.scaled_shape(0.9).unwrap();
        assert!(!s_procedure_certificate(&spec, &shrunk, &[1.0]).unwrap());
        assert!(find_certificate(&spec, &e, &RelaxOptions::default()).unwrap().is_some());
        assert!(find_certificate(&spec, &shrunk, &RelaxOptions::default()).unwrap().is_none());
    }

    #[test]
    fn certificate_of_optimum_and_of_shrunk_candidate() {
        let spec = IntersectionSpec::new(vec![
            Ellipsoid::from_slices(&[0.0, 0.0], &[vec![4.0, 1.0], vec![1.0, 2.0]]).unwrap(),
            Ellipsoid::from_slices(&[1.0, 0.5], &[vec![3.0, -0.5], vec![-0.5, 1.5]]).unwrap(),
        ])
        .unwrap();
        let opts = RelaxOptions::default();
        let r = full_sdp(&spec, SizeCriterion::LogDet, &opts).unwrap();
        let grown = r.ellipsoid.scaled_shape(1.01).unwrap();
        assert!(find_certificate(&spec, &grown, &opts).unwrap().is_some());
        let shrunk = r.ellipsoid.scaled_shape(0.9).unwrap();
        assert!(find_certificate(&spec, &shrunk, &opts).unwrap().is_none());
    }

    #[test]
    fn predicates_agree_at_the_optimum() {
        let spec = IntersectionSpec::new(vec![
            Ellipsoid::from_slices(&[0.0, 0.0], &[vec![4.0, 1.0], vec![1.0, 2.0]]).unwrap(),
            Ellipsoid::from_slices(&[1.0, 0.5], &[vec![3.0, -0.5], vec![-0.5, 1.5]]).unwrap(),
        ])
        .unwrap();
        let opts = RelaxOptions::default();
        let r = full_sdp(&spec, SizeCriterion::LogDet, &opts).unwrap();
        let lam = r.weights.unwrap();
        assert!(sdp_feasible(&spec, &r.ellipsoid, lam.as_slice()).unwrap());
        assert!(s_procedure_certificate(&spec, &r.ellipsoid, lam.as_slice()).unwrap());
        let s = s_procedure(&spec, SizeCriterion::LogDet, &opts).unwrap();
        assert_abs_diff_eq!(s.objective, r.objective, epsilon = 1e-6);
    }
}
