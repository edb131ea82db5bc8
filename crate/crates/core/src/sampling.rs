//! Random points in ellipsoids and in intersections of ellipsoids.
//!
//! Exact support-function evaluation over an intersection is intractable, so
//! containment claims are checked empirically against points drawn here.

use nalgebra::DVector;
use rand::Rng;
use rand_distr::StandardNormal;

use crate::ellipsoid::{Ellipsoid, IntersectionSpec, SizeCriterion};
use crate::error::{Error, Result};

/// Subgradient iterations spent looking for a point of the intersection.
pub const FEASIBILITY_ITERATIONS: usize = 5000;

/// Proposal draws allowed in [`sample_intersection`].
pub const SAMPLING_BUDGET: usize = 1_000_000;

/// Uniform draw from the solid ellipsoid: a uniform direction, radius
/// `u^{1/n}`, mapped through the Cholesky factor.
pub fn sample_in_ellipsoid<R: Rng + ?Sized>(e: &Ellipsoid, rng: &mut R) -> DVector<f64> {
    let n = e.dim();
    let dir = loop {
        let g = DVector::from_fn(n, |_, _| rng.sample::<f64, _>(StandardNormal));
        let norm = g.norm();
        if norm > 1e-300 {
            break g / norm;
        }
    };
    let u: f64 = rng.random();
    let r = u.powf(1.0 / n as f64);
    e.center() + e.factor() * (dir * r)
}

/// Searches for a point of the intersection by minimizing
/// `g(x) = max_i (x−x_i)ᵀP_i⁻¹(x−x_i)` with normalized subgradient steps of
/// length `c/√k`, starting from the mean of the centers. `None` means no
/// point with `g ≤ 1 − 1e-9` was found; it does not prove emptiness.
pub fn intersection_feasible_point(spec: &IntersectionSpec) -> Option<DVector<f64>> {
    let members = spec.ellipsoids();
    let n = spec.dim();
    let mut x = members
        .iter()
        .fold(DVector::zeros(n), |acc, e| acc + e.center())
        / members.len() as f64;

    let mut spread = 0.0_f64;
    for (i, a) in members.iter().enumerate() {
        for b in &members[i + 1..] {
            spread = spread.max((a.center() - b.center()).norm());
        }
    }
    if spread == 0.0 {
        spread = members
            .iter()
            .map(|e| e.shape().trace().sqrt())
            .fold(f64::INFINITY, f64::min);
    }

    let target = 1.0 - 1e-9;
    let inverses: Vec<_> = members.iter().map(|e| e.shape_inverse()).collect();
    for k in 1..=FEASIBILITY_ITERATIONS {
        let (g, i) = spec.max_quadratic(&x).ok()?;
        if g <= target {
            return Some(x);
        }
        let sub = &inverses[i] * (&x - members[i].center()) * 2.0;
        let norm = sub.norm();
        if norm == 0.0 {
            break;
        }
        x -= sub * (spread / (k as f64).sqrt() / norm);
    }
    let (g, _) = spec.max_quadratic(&x).ok()?;
    (g <= target).then_some(x)
}

/// Rejection sampling from the member of smallest log-volume. Every
/// returned point lies in all members with zero tolerance.
pub fn sample_intersection<R: Rng + ?Sized>(
    spec: &IntersectionSpec,
    count: usize,
    rng: &mut R,
) -> Result<Vec<DVector<f64>>> {
    let proposal = spec
        .ellipsoids()
        .iter()
        .min_by(|a, b| {
            a.size(SizeCriterion::LogDet)
                .total_cmp(&b.size(SizeCriterion::LogDet))
        })
        .expect("spec is nonempty");
    let mut accepted = Vec::with_capacity(count);
    for _ in 0..SAMPLING_BUDGET {
        if accepted.len() == count {
            break;
        }
        let x = sample_in_ellipsoid(proposal, rng);
        if spec.contains(&x, 0.0)? {
            accepted.push(x);
        }
    }
    if accepted.len() < count {
        return Err(Error::SamplingBudgetExceeded { accepted });
    }
    Ok(accepted)
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn disk(cx: f64, cy: f64) -> Ellipsoid {
        Ellipsoid::ball(&[cx, cy], 1.0).unwrap()
    }

    #[test]
    fn samples_stay_inside() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let e = Ellipsoid::from_slices(&[1.0, -2.0, 0.5], &[
            vec![4.0, 1.0, 0.0],
            vec![1.0, 2.0, 0.3],
            vec![0.0, 0.3, 0.5],
        ])
        .unwrap();
        for _ in 0..10_000 {
            let x = sample_in_ellipsoid(&e, &mut rng);
            assert!(e.contains(&x, 1e-12).unwrap());
        }
        let d = disk(0.0, 0.0);
        for _ in 0..1000 {
            assert!(sample_in_ellipsoid(&d, &mut rng).norm() <= 1.0 + 1e-12);
        }
        let seg = Ellipsoid::ball(&[0.0], 1.0).unwrap();
        for _ in 0..1000 {
            let x = sample_in_ellipsoid(&seg, &mut rng);
            assert!((-1.0..=1.0).contains(&x[0]));
        }
    }

    #[test]
    fn uniform_disk_mean_is_centered() {
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        let d = disk(0.0, 0.0);
        let n = 100_000;
        let mut sum = DVector::zeros(2);
        let mut inner = 0usize;
        for _ in 0..n {
            let x = sample_in_ellipsoid(&d, &mut rng);
            if x.norm() <= 0.5 {
                inner += 1;
            }
            sum += x;
        }
        let mean = sum / n as f64;
        assert!(mean.amax() < 0.02, "mean {mean}");
        // Area fraction of the half-radius disk is 1/4.
        assert!((inner as f64 / n as f64 - 0.25).abs() < 0.01);
    }

    #[test]
    fn feasible_point_examples() {
        let one = IntersectionSpec::new(vec![disk(0.0, 0.0)]).unwrap();
        assert_eq!(intersection_feasible_point(&one).unwrap(), DVector::zeros(2));

        let lens = IntersectionSpec::new(vec![disk(0.0, 0.0), disk(1.0, 0.0)]).unwrap();
        let x = intersection_feasible_point(&lens).unwrap();
        assert!((x - DVector::from_column_slice(&[0.5, 0.0])).norm() < 1e-9);

        let apart = IntersectionSpec::new(vec![disk(0.0, 0.0), disk(3.0, 0.0)]).unwrap();
        assert!(intersection_feasible_point(&apart).is_none());
    }

    #[test]
    fn feasible_point_needs_descent() {
        // Mean of centers lies outside the thin third member.
        let a = disk(0.0, 0.0);
        let b = disk(1.5, 0.0);
        let c = Ellipsoid::from_slices(&[0.75, 1.2], &[vec![4.0, 0.0], vec![0.0, 1.0]]).unwrap();
        let spec = IntersectionSpec::new(vec![a, b, c]).unwrap();
        let x = intersection_feasible_point(&spec).unwrap();
        assert!(spec.contains(&x, 0.0).unwrap());
    }

    #[test]
    fn intersection_sampling() {
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        let one = IntersectionSpec::new(vec![disk(0.0, 0.0)]).unwrap();
        assert_eq!(sample_intersection(&one, 10, &mut rng).unwrap().len(), 10);

        let lens = IntersectionSpec::new(vec![disk(0.0, 0.0), disk(1.0, 0.0)]).unwrap();
        let pts = sample_intersection(&lens, 100, &mut rng).unwrap();
        assert_eq!(pts.len(), 100);
        for p in &pts {
            assert!(p.norm() <= 1.0);
            assert!((p - DVector::from_column_slice(&[1.0, 0.0])).norm() <= 1.0);
        }

        let apart = IntersectionSpec::new(vec![disk(0.0, 0.0), disk(3.0, 0.0)]).unwrap();
        match sample_intersection(&apart, 5, &mut rng) {
            Err(Error::SamplingBudgetExceeded { accepted }) => assert!(accepted.is_empty()),
            other => panic!("expected budget error, got {other:?}"),
        }
    }
}
