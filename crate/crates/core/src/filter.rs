//! Set-membership filtering for `x⁺ = F x + w`, `y = x + v` with `w` and `v`
//! confined to centered ellipsoids.

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use crate::ellipsoid::{Ellipsoid, IntersectionSpec, SizeCriterion};
use crate::error::{Error, Result};
use crate::linalg::{self, SymMatrix};
use crate::relax::{run_method, Method, MethodResult, RelaxOptions};
use crate::sampling::intersection_feasible_point;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "DynamicsRepr", into = "DynamicsRepr")]
pub struct LinearDynamics {
    f: DMatrix<f64>,
    q: SymMatrix,
    sensors: Vec<SymMatrix>,
    period: f64,
}

#[derive(Serialize, Deserialize)]
struct DynamicsRepr {
    transition: Vec<Vec<f64>>,
    process_noise: SymMatrix,
    sensor_noise: Vec<SymMatrix>,
    period: f64,
}

impl TryFrom<DynamicsRepr> for LinearDynamics {
    type Error = Error;

    fn try_from(r: DynamicsRepr) -> Result<Self> {
        let n = r.transition.len();
        if let Some(row) = r.transition.iter().find(|row| row.len() != n) {
            return Err(Error::dim(n, row.len()));
        }
        let f = DMatrix::from_fn(n, n, |i, j| r.transition[i][j]);
        LinearDynamics::new(f, r.process_noise, r.sensor_noise, r.period)
    }
}

impl From<LinearDynamics> for DynamicsRepr {
    fn from(d: LinearDynamics) -> Self {
        DynamicsRepr {
            transition: d.f.row_iter().map(|r| r.iter().cloned().collect()).collect(),
            process_noise: d.q,
            sensor_noise: d.sensors,
            period: d.period,
        }
    }
}

impl LinearDynamics {
    pub fn new(f: DMatrix<f64>, q: SymMatrix, sensors: Vec<SymMatrix>, period: f64) -> Result<Self> {
        let n = f.nrows();
        if f.ncols() != n {
            return Err(Error::dim(n, f.ncols()));
        }
        for m in std::iter::once(&q).chain(&sensors) {
            if m.order() != n {
                return Err(Error::dim(n, m.order()));
            }
            linalg::cholesky(m).ok_or(Error::NotPositiveDefinite)?;
        }
        Ok(LinearDynamics {
            f,
            q,
            sensors,
            period,
        })
    }

    /// Constant-velocity target in one coordinate, observed in full by three
    /// sensors.
    pub fn constant_velocity(period: f64) -> Self {
        let t = period;
        let f = DMatrix::from_row_slice(2, 2, &[1.0, t, 0.0, 1.0]);
        let q = SymMatrix::from_rows(&[
            vec![t.powi(3) / 3.0, t.powi(2) / 2.0],
            vec![t.powi(2) / 2.0, t],
        ])
        .expect("2x2");
        let sensors = vec![
            SymMatrix::from_diagonal(&[20.0, 20.0]),
            SymMatrix::from_diagonal(&[18.0, 22.0]),
            SymMatrix::from_diagonal(&[22.0, 18.0]),
        ];
        LinearDynamics::new(f, q, sensors, t).expect("valid constants")
    }

    pub fn dim(&self) -> usize {
        self.f.nrows()
    }

    pub fn transition(&self) -> &DMatrix<f64> {
        &self.f
    }

    pub fn process_noise(&self) -> &SymMatrix {
        &self.q
    }

    pub fn sensors(&self) -> &[SymMatrix] {
        &self.sensors
    }

    pub fn period(&self) -> f64 {
        self.period
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct FilterState {
    pub estimate: Ellipsoid,
    pub step: usize,
}

/// `(τ₁, τ₂)` for the Minkowski-sum bound `FPFᵀ/τ₁ + Q/τ₂`.
pub fn predict_weights(trace_fpf: f64, trace_q: f64) -> Result<(f64, f64)> {
    if !(trace_fpf > 0.0) || !(trace_q > 0.0) {
        return Err(Error::DegenerateTrace);
    }
    let (a, b) = (trace_fpf.sqrt(), trace_q.sqrt());
    Ok((a / (a + b), b / (a + b)))
}

pub fn predict(state: &FilterState, dynamics: &LinearDynamics) -> Result<FilterState> {
    let e = &state.estimate;
    if e.dim() != dynamics.dim() {
        return Err(Error::dim(dynamics.dim(), e.dim()));
    }
    let f = dynamics.transition();
    let fpf = f * e.shape().as_matrix() * f.transpose();
    let (t1, t2) = predict_weights(fpf.trace(), dynamics.process_noise().trace())?;
    let shape = fpf / t1 + dynamics.process_noise().as_matrix() / t2;
    Ok(FilterState {
        estimate: Ellipsoid::new(f * e.center(), SymMatrix::symmetrized(&shape)?)?,
        step: state.step + 1,
    })
}

/// `{x : (y − x)ᵀR⁻¹(y − x) ≤ 1}`
pub fn measurement_ellipsoid(y: &DVector<f64>, r: &SymMatrix) -> Result<Ellipsoid> {
    Ellipsoid::new(y.clone(), r.clone())
}

/// Bounds the intersection of the predicted set and the measurement set.
/// Returns [`Error::EmptyIntersection`] when no common point can be found or
/// the relaxation reports infeasibility.
pub fn update(
    predicted: &FilterState,
    measurement: &Ellipsoid,
    method: Method,
    criterion: SizeCriterion,
    opts: &RelaxOptions,
) -> Result<FilterState> {
    let spec = IntersectionSpec::new(vec![predicted.estimate.clone(), measurement.clone()])?;
    if intersection_feasible_point(&spec).is_none() {
        return Err(Error::EmptyIntersection);
    }
    match run_method(method, &spec, criterion, opts) {
        Ok(r) => Ok(FilterState {
            estimate: r.ellipsoid,
            step: predicted.step,
        }),
        Err(Error::Infeasible(_)) => Err(Error::EmptyIntersection),
        Err(e) => Err(e),
    }
}

pub fn fusion_center(
    locals: &[Ellipsoid],
    method: Method,
    criterion: SizeCriterion,
    opts: &RelaxOptions,
) -> Result<MethodResult> {
    let spec = IntersectionSpec::new(locals.to_vec())?;
    run_method(method, &spec, criterion, opts)
}
