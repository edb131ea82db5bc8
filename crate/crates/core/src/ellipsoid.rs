//! Ellipsoids in center/shape form, `{x : (x−c)ᵀP⁻¹(x−c) ≤ 1}`, and the
//! homogeneous quadratic-form view used to state containment as an LMI.

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::linalg::{self, SymMatrix};

/// Scalar size of an ellipsoid's shape matrix.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum SizeCriterion {
    /// `trace(P)`, the sum of squared semi-axis lengths.
    Trace,
    /// `log det(P)`, the log-volume up to an additive constant.
    LogDet,
}

impl std::str::FromStr for SizeCriterion {
    type Err = String;

    fn from_str(s: &str) -> std::result::Result<Self, String> {
        match s {
            "trace" => Ok(SizeCriterion::Trace),
            "logdet" => Ok(SizeCriterion::LogDet),
            other => Err(format!("unknown criterion `{other}` (expected trace|logdet)")),
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "EllipsoidRepr", into = "EllipsoidRepr")]
pub struct Ellipsoid {
    center: DVector<f64>,
    shape: SymMatrix,
    /// Lower Cholesky factor of `shape`.
    factor: DMatrix<f64>,
}

#[derive(Serialize, Deserialize)]
struct EllipsoidRepr {
    center: Vec<f64>,
    shape: Vec<Vec<f64>>,
}

impl TryFrom<EllipsoidRepr> for Ellipsoid {
    type Error = Error;

    fn try_from(r: EllipsoidRepr) -> Result<Self> {
        Ellipsoid::new(DVector::from_vec(r.center), SymMatrix::from_rows(&r.shape)?)
    }
}

impl From<Ellipsoid> for EllipsoidRepr {
    fn from(e: Ellipsoid) -> Self {
        EllipsoidRepr {
            center: e.center.iter().cloned().collect(),
            shape: e.shape.to_rows(),
        }
    }
}

impl Ellipsoid {
    pub fn new(center: DVector<f64>, shape: SymMatrix) -> Result<Self> {
        if center.len() != shape.order() {
            return Err(Error::dim(shape.order(), center.len()));
        }
        let chol = linalg::cholesky(&shape).ok_or(Error::NotPositiveDefinite)?;
        Ok(Ellipsoid {
            center,
            shape,
            factor: chol.l(),
        })
    }

    pub fn from_slices(center: &[f64], shape_rows: &[Vec<f64>]) -> Result<Self> {
        Self::new(DVector::from_column_slice(center), SymMatrix::from_rows(shape_rows)?)
    }

    /// Ball of the given radius.
    pub fn ball(center: &[f64], radius: f64) -> Result<Self> {
        let n = center.len();
        Self::new(
            DVector::from_column_slice(center),
            SymMatrix::identity(n).scale(radius * radius),
        )
    }

    pub fn dim(&self) -> usize {
        self.center.len()
    }

    pub fn center(&self) -> &DVector<f64> {
        &self.center
    }

    pub fn shape(&self) -> &SymMatrix {
        &self.shape
    }

    /// Lower-triangular `L` with `P = L Lᵀ`.
    pub fn factor(&self) -> &DMatrix<f64> {
        &self.factor
    }

    /// `P⁻¹`, symmetrized.
    pub fn shape_inverse(&self) -> DMatrix<f64> {
        let linv = self
            .factor
            .clone()
            .solve_lower_triangular(&DMatrix::identity(self.dim(), self.dim()))
            .expect("cholesky factor has positive diagonal");
        linalg::symmetrize(&(linv.transpose() * linv))
    }

    /// `(x−c)ᵀP⁻¹(x−c)`, evaluated with one triangular solve.
    pub fn quadratic_value(&self, x: &DVector<f64>) -> Result<f64> {
        if x.len() != self.dim() {
            return Err(Error::dim(self.dim(), x.len()));
        }
        let z = self
            .factor
            .solve_lower_triangular(&(x - &self.center))
            .expect("cholesky factor has positive diagonal");
        Ok(z.norm_squared())
    }

    pub fn contains(&self, x: &DVector<f64>, tol: f64) -> Result<bool> {
        Ok(self.quadratic_value(x)? <= 1.0 + tol)
    }

    pub fn size(&self, criterion: SizeCriterion) -> f64 {
        match criterion {
            SizeCriterion::Trace => self.shape.trace(),
            SizeCriterion::LogDet => {
                2.0 * (0..self.dim()).map(|i| self.factor[(i, i)].ln()).sum::<f64>()
            }
        }
    }

    /// Same center, shape multiplied by `s`.
    pub fn scaled_shape(&self, s: f64) -> Result<Self> {
        Ellipsoid::new(self.center.clone(), self.shape.scale(s))
    }

    pub fn with_center(&self, center: DVector<f64>) -> Result<Self> {
        Ellipsoid::new(center, self.shape.clone())
    }

    pub fn quadratic_form(&self) -> QuadraticForm {
        let n = self.dim();
        let w = self.shape_inverse();
        let wx = &w * &self.center;
        let mut a = DMatrix::zeros(n + 1, n + 1);
        a.view_mut((0, 0), (n, n)).copy_from(&w);
        for i in 0..n {
            a[(i, n)] = -wx[i];
            a[(n, i)] = -wx[i];
        }
        a[(n, n)] = self.center.dot(&wx) - 1.0;
        QuadraticForm(SymMatrix::from_upper(a).expect("square by construction"))
    }

    /// Points on the boundary of a 2D ellipsoid, `c + L(cos θ, sin θ)`.
    pub fn boundary_2d(&self, count: usize) -> Result<Vec<[f64; 2]>> {
        if self.dim() != 2 {
            return Err(Error::dim(2, self.dim()));
        }
        Ok((0..count)
            .map(|k| {
                let th = 2.0 * std::f64::consts::PI * k as f64 / count as f64;
                let u = DVector::from_column_slice(&[th.cos(), th.sin()]);
                let p = &self.center + &self.factor * u;
                [p[0], p[1]]
            })
            .collect())
    }
}

/// Homogeneous form `ξᵀAξ` with `ξ = [xᵀ 1]ᵀ`; the ellipsoid is `{ξᵀAξ ≤ 0}`.
#[derive(Clone, Debug, PartialEq)]
pub struct QuadraticForm(pub SymMatrix);

impl QuadraticForm {
    pub fn matrix(&self) -> &SymMatrix {
        &self.0
    }

    pub fn dim(&self) -> usize {
        self.0.order() - 1
    }

    pub fn evaluate(&self, x: &DVector<f64>) -> Result<f64> {
        let n = self.dim();
        if x.len() != n {
            return Err(Error::dim(n, x.len()));
        }
        let xi = DVector::from_fn(n + 1, |i, _| if i < n { x[i] } else { 1.0 });
        Ok(xi.dot(&(self.0.as_matrix() * &xi)))
    }

    /// Recovers center and shape. Any positive multiple of a form built by
    /// [`Ellipsoid::quadratic_form`] recovers the same ellipsoid.
    pub fn to_ellipsoid(&self) -> Result<Ellipsoid> {
        let n = self.dim();
        let a = self.0.as_matrix();
        let w = a.view((0, 0), (n, n)).into_owned();
        let b = a.view((0, n), (n, 1)).into_owned();
        let chol = linalg::cholesky(&w).ok_or(Error::NotPositiveDefinite)?;
        let center = -chol.solve(&b).column(0).into_owned();
        let r = center.dot(&(&w * &center)) - a[(n, n)];
        if r <= 0.0 {
            return Err(Error::DegenerateInput("quadratic form describes an empty set".into()));
        }
        let shape = linalg::symmetrize(&chol.inverse()) * r;
        Ellipsoid::new(center, SymMatrix::from_upper(shape)?)
    }
}

/// The ordered family whose intersection is to be bounded.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "SpecRepr", into = "SpecRepr")]
pub struct IntersectionSpec {
    ellipsoids: Vec<Ellipsoid>,
}

#[derive(Serialize, Deserialize)]
struct SpecRepr {
    ellipsoids: Vec<Ellipsoid>,
}

impl TryFrom<SpecRepr> for IntersectionSpec {
    type Error = Error;

    fn try_from(r: SpecRepr) -> Result<Self> {
        IntersectionSpec::new(r.ellipsoids)
    }
}

impl From<IntersectionSpec> for SpecRepr {
    fn from(s: IntersectionSpec) -> Self {
        SpecRepr { ellipsoids: s.ellipsoids }
    }
}

impl IntersectionSpec {
    pub fn new(ellipsoids: Vec<Ellipsoid>) -> Result<Self> {
        let first = ellipsoids
            .first()
            .ok_or_else(|| Error::DegenerateInput("intersection needs at least one ellipsoid".into()))?;
        let n = first.dim();
        if let Some(bad) = ellipsoids.iter().find(|e| e.dim() != n) {
            return Err(Error::dim(n, bad.dim()));
        }
        Ok(IntersectionSpec { ellipsoids })
    }

    pub fn dim(&self) -> usize {
        self.ellipsoids[0].dim()
    }

    pub fn len(&self) -> usize {
        self.ellipsoids.len()
    }

    pub fn is_empty(&self) -> bool {
        self.ellipsoids.is_empty()
    }

    pub fn ellipsoids(&self) -> &[Ellipsoid] {
        &self.ellipsoids
    }

    pub fn contains(&self, x: &DVector<f64>, tol: f64) -> Result<bool> {
        for e in &self.ellipsoids {
            if !e.contains(x, tol)? {
                return Ok(false);
            }
        }
        Ok(true)
    }

    /// `max_i (x−x_i)ᵀP_i⁻¹(x−x_i)` and the index attaining it.
    pub fn max_quadratic(&self, x: &DVector<f64>) -> Result<(f64, usize)> {
        let mut best = (f64::NEG_INFINITY, 0);
        for (i, e) in self.ellipsoids.iter().enumerate() {
            let v = e.quadratic_value(x)?;
            if v > best.0 {
                best = (v, i);
            }
        }
        Ok(best)
    }

    pub fn with_appended(&self, e: Ellipsoid) -> Result<Self> {
        let mut v = self.ellipsoids.clone();
        v.push(e);
        IntersectionSpec::new(v)
    }
}

/// Decides `[[A, B], [Bᵀ, C]] ⪰ 0` from the eigenvalues of the assembled
/// block matrix.
pub fn schur_psd(a: &DMatrix<f64>, b: &DMatrix<f64>, c: &DMatrix<f64>) -> Result<bool> {
    let block = assemble_block(a, b, c)?;
    Ok(linalg::is_psd(&block))
}

/// The same decision through the pseudoinverse characterization:
/// `C ⪰ 0`, `A − BC⁺Bᵀ ⪰ 0` and `(I − CC⁺)Bᵀ = 0`.
pub fn schur_psd_pinv(a: &DMatrix<f64>, b: &DMatrix<f64>, c: &DMatrix<f64>) -> Result<bool> {
    assemble_block(a, b, c)?;
    let tol = linalg::eps_psd(&assemble_block(a, b, c)?);
    let c_pinv = linalg::pinv_sym(c);
    let c_ok = linalg::min_eigenvalue(c) >= -tol;
    let comp = a - b * &c_pinv * b.transpose();
    let comp_ok = linalg::min_eigenvalue(&comp) >= -tol;
    let proj = DMatrix::identity(c.nrows(), c.nrows()) - c * &c_pinv;
    let range_ok = (proj * b.transpose()).amax() <= tol.sqrt();
    Ok(c_ok && comp_ok && range_ok)
}

fn assemble_block(a: &DMatrix<f64>, b: &DMatrix<f64>, c: &DMatrix<f64>) -> Result<DMatrix<f64>> {
    let (p, q) = (a.nrows(), c.nrows());
    if a.ncols() != p {
        return Err(Error::dim(p, a.ncols()));
    }
    if c.ncols() != q {
        return Err(Error::dim(q, c.ncols()));
    }
    if b.nrows() != p {
        return Err(Error::dim(p, b.nrows()));
    }
    if b.ncols() != q {
        return Err(Error::dim(q, b.ncols()));
    }
    let mut m = DMatrix::zeros(p + q, p + q);
    m.view_mut((0, 0), (p, p)).copy_from(a);
    m.view_mut((0, p), (p, q)).copy_from(b);
    m.view_mut((p, 0), (q, p)).copy_from(&b.transpose());
    m.view_mut((p, p), (q, q)).copy_from(c);
    Ok(m)
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;
    use proptest::prelude::*;

    fn dv(v: &[f64]) -> DVector<f64> {
        DVector::from_column_slice(v)
    }

    fn dm(r: usize, c: usize, v: &[f64]) -> DMatrix<f64> {
        DMatrix::from_row_slice(r, c, v)
    }

    fn unit_disk() -> Ellipsoid {
        Ellipsoid::ball(&[0.0, 0.0], 1.0).unwrap()
    }

    #[test]
    fn construction() {
        let e = unit_disk();
        assert_eq!(e.dim(), 2);
        Ellipsoid::from_slices(&[12.0, 11.0], &[vec![6.0, -5.0], vec![-5.0, 12.0]]).unwrap();
        assert!(matches!(
            Ellipsoid::from_slices(&[0.0], &[vec![-1.0]]),
            Err(Error::NotPositiveDefinite)
        ));
        assert!(matches!(
            Ellipsoid::from_slices(&[0.0, 0.0, 0.0], &[vec![1.0, 0.0], vec![0.0, 1.0]]),
            Err(Error::DimensionMismatch { .. })
        ));
    }

    #[test]
    fn containment() {
        let e = unit_disk();
        assert!(e.contains(&dv(&[0.0, 0.0]), 0.0).unwrap());
        assert!(e.contains(&dv(&[1.0, 0.0]), 0.0).unwrap());
        assert_abs_diff_eq!(e.quadratic_value(&dv(&[1.1, 0.0])).unwrap(), 1.21, epsilon = 1e-14);
        assert!(!e.contains(&dv(&[1.1, 0.0]), 0.0).unwrap());
        assert!(e.contains(&dv(&[1.0]), 0.0).is_err());
    }

    #[test]
    fn size_values() {
        let e = unit_disk();
        assert_abs_diff_eq!(e.size(SizeCriterion::LogDet), 0.0, epsilon = 1e-15);
        assert_abs_diff_eq!(e.size(SizeCriterion::Trace), 2.0, epsilon = 1e-15);
        let p1 = Ellipsoid::from_slices(&[12.0, 11.0], &[vec![6.0, -5.0], vec![-5.0, 12.0]]).unwrap();
        assert_abs_diff_eq!(p1.size(SizeCriterion::LogDet), 47f64.ln(), epsilon = 1e-12);
        assert_abs_diff_eq!(p1.size(SizeCriterion::LogDet), 3.8501, epsilon = 1e-4);
    }

    #[test]
    fn quadratic_form_examples() {
        let a = unit_disk().quadratic_form();
        assert_abs_diff_eq!(
            *a.matrix().as_matrix(),
            dm(3, 3, &[1.0, 0.0, 0.0, 0.0, 1.0, 0.0, 0.0, 0.0, -1.0]),
            epsilon = 1e-15
        );
        let e = Ellipsoid::from_slices(&[2.0], &[vec![4.0]]).unwrap();
        assert_abs_diff_eq!(
            *e.quadratic_form().matrix().as_matrix(),
            dm(2, 2, &[0.25, -0.5, -0.5, 0.0]),
            epsilon = 1e-15
        );
        let p1 = Ellipsoid::from_slices(&[12.0, 11.0], &[vec![6.0, -5.0], vec![-5.0, 12.0]]).unwrap();
        let q = p1.quadratic_form();
        // Hand inverse: [[12, 5], [5, 6]] / 47.
        let inv = dm(2, 2, &[12.0, 5.0, 5.0, 6.0]) / 47.0;
        assert_abs_diff_eq!(q.matrix().view((0, 0), (2, 2)).into_owned(), inv, epsilon = 1e-13);
        // ξᵀAξ is zero on the boundary and −1 at the center.
        assert_abs_diff_eq!(q.evaluate(p1.center()).unwrap(), -1.0, epsilon = 1e-12);
    }

    #[test]
    fn schur_examples() {
        let i2 = DMatrix::identity(2, 2);
        assert!(schur_psd(&i2, &DMatrix::zeros(2, 2), &i2).unwrap());
        assert!(!schur_psd(&dm(1, 1, &[1.0]), &dm(1, 1, &[2.0]), &dm(1, 1, &[1.0])).unwrap());
        assert!(schur_psd(&dm(1, 1, &[1.0]), &dm(1, 1, &[1.0]), &dm(1, 1, &[1.0])).unwrap());
        assert!(schur_psd(&i2, &DMatrix::zeros(2, 3), &i2).is_err());
        for (a, b, c) in [
            (1.0, 2.0, 1.0),
            (1.0, 1.0, 1.0),
            (1.0, 0.0, 0.0),
            (1.0, 1.0, 0.0),
        ] {
            let (a, b, c) = (dm(1, 1, &[a]), dm(1, 1, &[b]), dm(1, 1, &[c]));
            assert_eq!(schur_psd(&a, &b, &c).unwrap(), schur_psd_pinv(&a, &b, &c).unwrap());
        }
    }

    #[test]
    fn json_layout() {
        let e = Ellipsoid::from_slices(&[1.5, -2.0], &[vec![2.0, 0.5], vec![0.5, 1.0]]).unwrap();
        let s = serde_json::to_string(&e).unwrap();
        assert_eq!(s, r#"{"center":[1.5,-2.0],"shape":[[2.0,0.5],[0.5,1.0]]}"#);
        let spec: IntersectionSpec =
            serde_json::from_str(&format!(r#"{{"ellipsoids":[{s},{s}]}}"#)).unwrap();
        assert_eq!(spec.len(), 2);
        assert!(serde_json::from_str::<Ellipsoid>(r#"{"center":[0],"shape":[[-1]]}"#).is_err());
        assert!(serde_json::from_str::<IntersectionSpec>(r#"{"ellipsoids":[]}"#).is_err());
    }

    fn random_spd(n: usize, seed: &[f64]) -> DMatrix<f64> {
        let a = DMatrix::from_fn(n, n, |i, j| seed[(i * n + j) % seed.len()] + 0.1 * (i as f64 - j as f64));
        &a * a.transpose() + DMatrix::identity(n, n) * 0.5
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(1000))]

        #[test]
        fn quadratic_form_round_trip(
            n in 1usize..=6,
            vals in prop::collection::vec(-2.0f64..2.0, 36),
            center in prop::collection::vec(-10.0f64..10.0, 6),
            scale in 0.1f64..10.0,
        ) {
            let p = random_spd(n, &vals);
            let c = DVector::from_column_slice(&center[..n]);
            let e = Ellipsoid::new(c.clone(), SymMatrix::symmetrized(&p).unwrap()).unwrap();
            let q = e.quadratic_form();
            let back = q.to_ellipsoid().unwrap();
            let rel = |a: f64, b: f64| (a - b).abs() / (1.0 + b.abs());
            for i in 0..n {
                prop_assert!(rel(back.center()[i], c[i]) < 1e-10);
                for j in 0..n {
                    prop_assert!(rel(back.shape()[(i, j)], p[(i, j)]) < 1e-10 * (1.0 + p.amax()));
                }
            }
            let scaled = QuadraticForm(q.matrix().scale(scale)).to_ellipsoid().unwrap();
            prop_assert!((scaled.center() - back.center()).amax() < 1e-9 * (1.0 + c.amax()));
        }

        #[test]
        fn schur_agrees_with_pinv_characterization(
            p in 1usize..=4,
            q in 1usize..=4,
            rank in 0usize..=4,
            vals in prop::collection::vec(-1.5f64..1.5, 64),
            shift in -0.5f64..1.5,
            in_range in any::<bool>(),
        ) {
            let rank = rank.min(q);
            let g = |k: usize| vals[k % vals.len()];
            // C = G Gᵀ with G of width `rank` (rank-deficient when rank < q).
            let gm = DMatrix::from_fn(q, rank, |i, j| g(3 * i + 5 * j + 1));
            let c = &gm * gm.transpose();
            let b = if in_range && rank > 0 {
                let k = DMatrix::from_fn(rank, p, |i, j| g(7 * i + 2 * j + 3));
                (&gm * k).transpose()
            } else {
                DMatrix::from_fn(p, q, |i, j| g(11 * i + 13 * j + 2))
            };
            let base = DMatrix::from_fn(p, p, |i, j| g(17 * i + 19 * j + 4));
            let a = &base * base.transpose() + DMatrix::identity(p, p) * shift;
            let lhs = schur_psd(&a, &b, &c).unwrap();
            let rhs = schur_psd_pinv(&a, &b, &c).unwrap();
            // Skip draws sitting on the PSD boundary where either test is a
            // coin flip at the tolerance.
            let block = assemble_block(&a, &b, &c).unwrap();
            let lam = linalg::min_eigenvalue(&block);
            prop_assume!(lam.abs() > 1e-6);
            prop_assert_eq!(lhs, rhs);
        }
    }
}
