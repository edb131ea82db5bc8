//! Minimum-volume enclosing ellipsoid of a finite point set.
//!
//! Khachiyan's multiplicative-weight iteration on the lifted moment matrix
//! `X(u) = Σ u_j q_j q_jᵀ`, `q_j = [p_j; 1]`, with Todd-Yildirim away steps
//! and rank-one updates of the leverage scores `ω_j = q_jᵀX⁻¹q_j`.
//!
//! The returned shape is `n·Σ(u)` for the final weights. For any weights on
//! the simplex this has log-volume no larger than the true minimum, so it is
//! also a certified lower bound on the size of every enclosing ellipsoid.

use nalgebra::{DMatrix, DVector, SymmetricEigen};

use crate::ellipsoid::Ellipsoid;
use crate::error::{Error, Result};
use crate::linalg::{self, SymMatrix};

const MAX_ITERATIONS: usize = 200_000;
const REFRESH_EVERY: usize = 200;
/// Point count above which the iteration runs on a growing working set.
const WORKING_SET: usize = 512;

pub fn mvee_of_points(points: &[DVector<f64>], tol: f64) -> Result<Ellipsoid> {
    let first = points
        .first()
        .ok_or_else(|| Error::DegenerateInput("no points".into()))?;
    let n = first.len();
    if let Some(bad) = points.iter().find(|p| p.len() != n) {
        return Err(Error::dim(n, bad.len()));
    }
    let count = points.len();
    if count < n + 1 {
        return Err(Error::DegenerateInput(format!(
            "need at least {} points in dimension {n}, got {count}",
            n + 1
        )));
    }
    let d1 = n + 1;
    let lifted: Vec<DVector<f64>> = points
        .iter()
        .map(|p| DVector::from_fn(d1, |i, _| if i < n { p[i] } else { 1.0 }))
        .collect();

    let uniform = vec![1.0 / count as f64; count];
    let x0 = moment(&lifted, &uniform);
    let eig = SymmetricEigen::new(x0.clone()).eigenvalues;
    if eig.min() <= 1e-12 * eig.max().max(1e-300) {
        return Err(Error::DegenerateInput("points are affinely dependent".into()));
    }

    let u = if count <= WORKING_SET {
        khachiyan(&lifted, tol)?
    } else {
        // Start from the points farthest out under the uniform moment matrix
        // and add violators until the stopping test holds for every point.
        let x0inv = linalg::spd_inverse(&x0)?;
        let mut order: Vec<usize> = (0..count).collect();
        let lev: Vec<f64> = lifted.iter().map(|q| q.dot(&(&x0inv * q))).collect();
        order.sort_by(|&a, &b| lev[b].total_cmp(&lev[a]));
        let mut active: Vec<usize> = order[..WORKING_SET].to_vec();
        let mut in_active = vec![false; count];
        for &j in &active {
            in_active[j] = true;
        }
        loop {
            let sub: Vec<DVector<f64>> = active.iter().map(|&j| lifted[j].clone()).collect();
            let Ok(w) = khachiyan(&sub, tol) else {
                break khachiyan(&lifted, tol)?;
            };
            let mut u = vec![0.0; count];
            for (&j, &wj) in active.iter().zip(&w) {
                u[j] = wj;
            }
            let xinv = linalg::spd_inverse(&moment(&lifted, &u))?;
            let limit = d1 as f64 + n as f64 * tol;
            let mut violators: Vec<(usize, f64)> = lifted
                .iter()
                .enumerate()
                .map(|(j, q)| (j, q.dot(&(&xinv * q))))
                .filter(|&(j, w)| w > limit && !in_active[j])
                .collect();
            if violators.is_empty() {
                break u;
            }
            violators.sort_by(|a, b| b.1.total_cmp(&a.1));
            for &(j, _) in violators.iter().take(WORKING_SET) {
                in_active[j] = true;
                active.push(j);
            }
        }
    };

    let center = points
        .iter()
        .zip(&u)
        .fold(DVector::zeros(n), |acc, (p, w)| acc + p * *w);
    let second = points
        .iter()
        .zip(&u)
        .fold(DMatrix::zeros(n, n), |acc, (p, w)| acc + p * p.transpose() * *w);
    let sigma = second - &center * center.transpose();
    Ellipsoid::new(center, SymMatrix::symmetrized(&(sigma * n as f64))?)
}

fn moment(lifted: &[DVector<f64>], u: &[f64]) -> DMatrix<f64> {
    let d1 = lifted[0].len();
    lifted
        .iter()
        .zip(u)
        .fold(DMatrix::zeros(d1, d1), |acc, (q, w)| acc + q * q.transpose() * *w)
}

/// Weights on `lifted` whose leverage scores are within `n·tol` of `n + 1`.
fn khachiyan(lifted: &[DVector<f64>], tol: f64) -> Result<Vec<f64>> {
    let count = lifted.len();
    let d1 = lifted[0].len();
    let n = d1 - 1;
    let mut u = vec![1.0 / count as f64; count];
    let mut xinv = linalg::spd_inverse(&moment(lifted, &u))?;
    let mut omega: Vec<f64> = lifted.iter().map(|q| q.dot(&(&xinv * q))).collect();
    let target = d1 as f64;

    for iter in 0..MAX_ITERATIONS {
        if iter > 0 && iter % REFRESH_EVERY == 0 {
            xinv = linalg::spd_inverse(&moment(lifted, &u))?;
            for (w, q) in omega.iter_mut().zip(lifted) {
                *w = q.dot(&(&xinv * q));
            }
        }
        let (jp, wmax) = argmax(&omega);
        let (jm, wmin) = omega
            .iter()
            .enumerate()
            .filter(|(j, _)| u[*j] > 0.0)
            .fold((0, f64::INFINITY), |b, (j, &w)| if w < b.1 { (j, w) } else { b });

        let eps_plus = (wmax - target) / n as f64;
        let eps_minus = (target - wmin) / n as f64;
        if eps_plus <= tol && eps_minus <= tol {
            break;
        }

        // X ← a·X + b·q qᵀ
        let (j, a, b) = if eps_plus >= eps_minus {
            let tau = (wmax - target) / (target * (wmax - 1.0));
            for w in u.iter_mut() {
                *w *= 1.0 - tau;
            }
            u[jp] += tau;
            (jp, 1.0 - tau, tau)
        } else {
            let uj = u[jm];
            let tau = ((target - wmin) / (target * (wmin - 1.0))).min(uj / (1.0 - uj));
            for w in u.iter_mut() {
                *w *= 1.0 + tau;
            }
            u[jm] -= tau;
            if u[jm] < 1e-15 {
                u[jm] = 0.0;
            }
            (jm, 1.0 + tau, -tau)
        };

        let v = &xinv * &lifted[j];
        let wq = omega[j];
        let denom = 1.0 + (b / a) * wq;
        for (w, q) in omega.iter_mut().zip(lifted) {
            let s = q.dot(&v);
            *w = (*w - (b / a) * s * s / denom) / a;
        }
        xinv = (&xinv - &v * v.transpose() * ((b / a) / denom)) / a;
    }
    Ok(u)
}

fn argmax(v: &[f64]) -> (usize, f64) {
    v.iter()
        .enumerate()
        .fold((0, f64::NEG_INFINITY), |b, (j, &w)| if w > b.1 { (j, w) } else { b })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::ellipsoid::SizeCriterion;
    use approx::assert_abs_diff_eq;

    fn pts(v: &[&[f64]]) -> Vec<DVector<f64>> {
        v.iter().map(|p| DVector::from_column_slice(p)).collect()
    }

    #[test]
    fn square_gives_circumscribed_circle() {
        let p = pts(&[&[-1.0, -1.0], &[1.0, -1.0], &[1.0, 1.0], &[-1.0, 1.0]]);
        let e = mvee_of_points(&p, 1e-6).unwrap();
        assert_abs_diff_eq!(e.center().norm(), 0.0, epsilon = 1e-9);
        assert_abs_diff_eq!(*e.shape().as_matrix(), DMatrix::identity(2, 2) * 2.0, epsilon = 1e-6);
    }

    #[test]
    fn segment_in_1d() {
        let e = mvee_of_points(&pts(&[&[-1.0], &[1.0]]), 1e-8).unwrap();
        assert_abs_diff_eq!(e.center()[0], 0.0, epsilon = 1e-12);
        assert_abs_diff_eq!(e.shape()[(0, 0)], 1.0, epsilon = 1e-8);
    }

    #[test]
    fn collinear_is_degenerate() {
        let r = mvee_of_points(&pts(&[&[0.0, 0.0], &[1.0, 1.0], &[2.0, 2.0]]), 1e-6);
        assert!(matches!(r, Err(Error::DegenerateInput(_))));
        assert!(mvee_of_points(&pts(&[&[0.0, 0.0], &[1.0, 1.0]]), 1e-6).is_err());
    }

    #[test]
    fn regular_simplex_matches_closed_form() {
        // Equilateral triangle with unit circumradius: the MVEE is the
        // circumcircle, logdet = 0.
        let p: Vec<_> = (0..3)
            .map(|k| {
                let th = 2.0 * std::f64::consts::PI * k as f64 / 3.0;
                DVector::from_column_slice(&[th.cos(), th.sin()])
            })
            .collect();
        let e = mvee_of_points(&p, 1e-9).unwrap();
        assert_abs_diff_eq!(e.size(SizeCriterion::LogDet), 0.0, epsilon = 1e-8);
    }

    #[test]
    fn contains_skewed_cloud() {
        let mut p = Vec::new();
        for i in 0..40 {
            let t = i as f64 * 0.37;
            p.push(DVector::from_column_slice(&[
                3.0 * t.cos() + 0.2 * (3.0 * t).sin(),
                t.sin() + 0.5 * t.cos(),
                0.3 * (2.0 * t).cos(),
            ]));
        }
        let tol = 1e-7;
        let e = mvee_of_points(&p, tol).unwrap();
        for q in &p {
            assert!(e.contains(q, tol * 1.01).unwrap());
        }
    }

    #[test]
    fn working_set_matches_direct_iteration() {
        use rand::{Rng, SeedableRng};
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(11);
        let p: Vec<_> = (0..3000)
            .map(|_| DVector::from_fn(3, |i, _| rng.random_range(-1.0..1.0) * (i + 1) as f64))
            .collect();
        let tol = 1e-6;
        let fast = mvee_of_points(&p, tol).unwrap();
        let lifted: Vec<_> = p.iter().map(|x| x.clone().insert_row(3, 1.0)).collect();
        let u = khachiyan(&lifted, tol).unwrap();
        let x = moment(&lifted, &u);
        // log det(n·Σ) = n·log n + log det X for the lifted moment matrix.
        let direct = 3.0 * 3f64.ln() + linalg::spd_logdet(&x).unwrap();
        assert_abs_diff_eq!(fast.size(SizeCriterion::LogDet), direct, epsilon = 1e-4);
        for q in &p {
            assert!(fast.contains(q, 3.0 * tol * 1.01).unwrap());
        }
    }
}
