//! Built-in problem instances: the three-sensor static scenario, its Monte
//! Carlo table, and the seeded random instance grid.

use std::time::{Duration, Instant};

use nalgebra::{DMatrix, DVector};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::ellipsoid::{Ellipsoid, IntersectionSpec, SizeCriterion};
use crate::error::Result;
use crate::linalg::SymMatrix;
use crate::relax::{run_method, Method, RelaxOptions};

/// Root seed of the static table and the instance grid.
pub const DEFAULT_SEED: u64 = 20_180_601;

/// Methods reported in the static table, in row order.
pub const TABLE_METHODS: [Method; 5] = [
    Method::FullSdp,
    Method::DecoupledSdp,
    Method::InscribedInflate,
    Method::BoundingNoDelta,
    Method::RecursiveBounding,
];

/// Three local estimates whose third center has second coordinate `xi`.
pub fn static_scenario(xi: f64) -> IntersectionSpec {
    let e = |c: [f64; 2], p: [[f64; 2]; 2]| {
        Ellipsoid::from_slices(&c, &[p[0].to_vec(), p[1].to_vec()]).expect("valid constants")
    };
    IntersectionSpec::new(vec![
        e([12.0, 11.0], [[6.0, -5.0], [-5.0, 12.0]]),
        e([12.0, 10.0], [[10.0, 1.0], [1.0, 3.0]]),
        e([12.0, xi], [[5.0, 5.0], [5.0, 9.0]]),
    ])
    .expect("valid constants")
}

/// `count` draws of `ξ ~ U[9, 10]`.
pub fn static_draws(seed: u64, count: usize) -> Vec<f64> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    (0..count).map(|_| rng.random_range(9.0..10.0)).collect()
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TableRow {
    pub method: Method,
    pub mean_objective: f64,
    /// Summed single-threaded time of the method calls.
    pub wall_time: Duration,
    pub objectives: Vec<f64>,
}

/// Runs each table method on every draw and averages the objectives.
pub fn static_table(
    draws: &[f64],
    methods: &[Method],
    criterion: SizeCriterion,
    opts: &RelaxOptions,
) -> Result<Vec<TableRow>> {
    methods
        .iter()
        .map(|&method| {
            let timed: Vec<(f64, Duration)> = draws
                .par_iter()
                .map(|&xi| {
                    let spec = static_scenario(xi);
                    let start = Instant::now();
                    let r = run_method(method, &spec, criterion, opts)?;
                    Ok((r.objective, start.elapsed()))
                })
                .collect::<Result<_>>()?;
            let objectives: Vec<f64> = timed.iter().map(|t| t.0).collect();
            Ok(TableRow {
                method,
                mean_objective: objectives.iter().sum::<f64>() / objectives.len().max(1) as f64,
                wall_time: timed.iter().map(|t| t.1).sum(),
                objectives,
            })
        })
        .collect()
}

fn random_rotation<R: Rng>(n: usize, rng: &mut R) -> DMatrix<f64> {
    let g = DMatrix::from_fn(n, n, |_, _| rng.sample::<f64, _>(StandardNormal));
    g.qr().q()
}

fn unit_direction<R: Rng>(n: usize, rng: &mut R) -> DVector<f64> {
    loop {
        let g = DVector::from_fn(n, |_, _| rng.sample::<f64, _>(StandardNormal));
        let norm = g.norm();
        if norm > 1e-12 {
            return g / norm;
        }
    }
}

/// `m` ellipsoids in `ℝⁿ` sharing the interior point `p`: each shape has
/// eigenvalues in `[1, 2]` and each center sits at normalized distance
/// `r ∈ [0.1, 0.5]` from `p`.
pub fn random_instance(seed: u64, n: usize, m: usize) -> IntersectionSpec {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let p = DVector::from_fn(n, |_, _| rng.random_range(-1.0..1.0));
    let members = (0..m)
        .map(|_| {
            let q = random_rotation(n, &mut rng);
            let eig = DVector::from_fn(n, |_, _| rng.random_range(1.0..2.0));
            let shape = &q * DMatrix::from_diagonal(&eig) * q.transpose();
            let shape = SymMatrix::symmetrized(&shape).expect("square");
            let r = rng.random_range(0.1..0.5);
            let offset = &q * DMatrix::from_diagonal(&eig.map(f64::sqrt)) * unit_direction(n, &mut rng) * r;
            Ellipsoid::new(&p + offset, shape).expect("eigenvalues at least 1")
        })
        .collect();
    IntersectionSpec::new(members).expect("uniform dimension")
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct GridPoint {
    pub seed: u64,
    pub n: usize,
    pub m: usize,
}

impl GridPoint {
    pub fn instance(&self) -> IntersectionSpec {
        random_instance(self.seed, self.n, self.m)
    }
}

pub const GRID_DIMS: [usize; 4] = [1, 2, 3, 4];
pub const GRID_COUNTS: [usize; 4] = [1, 2, 3, 5];

/// `count` instances cycling through every `(n, m)` pair of the grid.
pub fn instance_grid(seed: u64, count: usize) -> Vec<GridPoint> {
    (0..count)
        .map(|k| GridPoint {
            seed: seed.wrapping_add(k as u64),
            n: GRID_DIMS[k % GRID_DIMS.len()],
            m: GRID_COUNTS[(k / GRID_DIMS.len()) % GRID_COUNTS.len()],
        })
        .collect()
}
