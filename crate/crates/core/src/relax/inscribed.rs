//! Largest ellipsoid `{x̄ + E u : ‖u‖ ≤ 1}` inside every member, with `E`
//! symmetric positive definite. Containment in member `i` holds exactly when
//! some `τ_i ≥ 0` makes
//! `[[−P_i, x_i − x̄, E], [(x_i − x̄)ᵀ, τ_i − 1, 0], [E, 0, −τ_i I]] ⪯ 0`.

use nalgebra::DVector;
use serde_json::json;

use crate::barrier::{self, AffineSymMap, BlockBuilder, LmiProblem, Objective};
use crate::ellipsoid::{Ellipsoid, IntersectionSpec, SizeCriterion};
use crate::error::Result;
use crate::linalg::{sym_basis, sym_dim, sym_from_coords, SymMatrix};

use super::method::{Method, MethodResult, RelaxOptions};
use super::weights::WeightVector;

pub fn inscribed_problem(spec: &IntersectionSpec) -> LmiProblem {
    let n = spec.dim();
    let m = spec.len();
    let k = sym_dim(n);
    let total = k + n + m;
    let basis = sym_basis(n);
    let mut p = LmiProblem::new(total, Objective::Linear(vec![0.0; total]));
    for (i, e) in spec.ellipsoids().iter().enumerate() {
        let mut b = BlockBuilder::new(2 * n + 1, total);
        b.add_constant(0, 0, &-e.shape().as_matrix());
        b.add_constant(0, n, &nalgebra::DMatrix::from_column_slice(n, 1, e.center().as_slice()));
        b.add_constant(n, n, &nalgebra::DMatrix::from_element(1, 1, -1.0));
        for j in 0..n {
            let mut u = nalgebra::DMatrix::zeros(n, 1);
            u[(j, 0)] = -1.0;
            b.add_coeff(k + j, 0, n, &u);
        }
        for (q, bq) in basis.iter().enumerate() {
            b.add_coeff(q, 0, n + 1, bq);
        }
        b.add_coeff(k + n + i, n, n, &nalgebra::DMatrix::from_element(1, 1, 1.0));
        b.add_coeff(k + n + i, n + 1, n + 1, &-nalgebra::DMatrix::<f64>::identity(n, n));
        p.nsd(b.finish());
    }
    let mut coeffs = basis;
    coeffs.extend(std::iter::repeat_n(SymMatrix::zeros(n), n + m));
    let e_map = AffineSymMap::new(SymMatrix::zeros(n), coeffs).expect("one order");
    let c = p.psd(e_map);
    p.nonneg(k + n..total);
    p.set_objective(Objective::NegLogDet { constraint: c });
    p
}

/// Returns the inscribed ellipsoid `(x̄, E²)` and the multipliers `τ`.
pub fn max_inscribed(
    spec: &IntersectionSpec,
    opts: &RelaxOptions,
) -> Result<(Ellipsoid, WeightVector)> {
    let n = spec.dim();
    let k = sym_dim(n);
    let r = barrier::solve(&inscribed_problem(spec), &opts.solver, None)?;
    let e = sym_from_coords(n, &r.y[..k]);
    let center = DVector::from_column_slice(&r.y[k..k + n]);
    let shape = SymMatrix::symmetrized(&(&e * &e))?;
    Ok((
        Ellipsoid::new(center, shape)?,
        WeightVector::nonnegative_clipped(&r.y[k + n..]),
    ))
}

/// The inscribed ellipsoid enlarged by the factor `n` about its center.
pub fn inscribed_inflate(
    spec: &IntersectionSpec,
    criterion: SizeCriterion,
    opts: &RelaxOptions,
) -> Result<MethodResult> {
    let (inner, tau) = max_inscribed(spec, opts)?;
    let n = spec.dim() as f64;
    let e = inner.scaled_shape(n * n)?;
    Ok(MethodResult {
        method: Method::InscribedInflate,
        objective: e.size(criterion),
        diagnostics: json!({ "inscribed": inner }),
        ellipsoid: e,
        weights: Some(tau),
    })
}
