//! Invariant suite over the seeded instance grid.

use nalgebra::{DMatrix, DVector};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::ellipsoid::{Ellipsoid, IntersectionSpec, SizeCriterion};
use crate::error::{Error, Result};
use crate::mvee::mvee_of_points;
use crate::relax::{run_method, s_procedure_certificate, sdp_feasible, Method, MethodResult, RelaxOptions};
use crate::sampling::sample_intersection;
use crate::scenarios::{instance_grid, GridPoint, DEFAULT_SEED};

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct Tolerances {
    /// `|full − decoupled|`
    pub prop1: f64,
    /// `|full − s-procedure|`
    pub prop2: f64,
    /// `|decoupled − bounding-optimal|`
    pub prop3: f64,
    /// Slack on the volume orderings.
    pub order: f64,
    /// Slack on the quadratic value of sampled points.
    pub containment: f64,
    /// Slack below the sample-based log-volume bound.
    pub mvee: f64,
}

impl Default for Tolerances {
    fn default() -> Self {
        Tolerances {
            prop1: 1e-4,
            prop2: 1e-6,
            prop3: 1e-4,
            order: 1e-8,
            containment: 1e-9,
            mvee: 1e-6,
        }
    }
}

impl Tolerances {
    pub const NAMES: [&'static str; 6] = ["prop1", "prop2", "prop3", "order", "containment", "mvee"];

    /// Applies `name=value`, or a bare value to the three equivalence checks.
    pub fn apply_override(&mut self, spec: &str) -> Result<()> {
        let bad = || Error::InvalidProblem(format!("bad tolerance override `{spec}`"));
        let (name, value) = match spec.split_once('=') {
            Some((n, v)) => (Some(n.trim()), v.trim()),
            None => (None, spec.trim()),
        };
        let v: f64 = value.parse().map_err(|_| bad())?;
        if !(v >= 0.0) {
            return Err(bad());
        }
        match name {
            None => {
                self.prop1 = v;
                self.prop2 = v;
                self.prop3 = v;
            }
            Some("prop1") => self.prop1 = v,
            Some("prop2") => self.prop2 = v,
            Some("prop3") => self.prop3 = v,
            Some("order") => self.order = v,
            Some("containment") => self.containment = v,
            Some("mvee") => self.mvee = v,
            Some(_) => return Err(bad()),
        }
        Ok(())
    }
}

/// Deliberate corruption used to check that the suite can fail.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub enum Fault {
    /// Moves the decoupled result's center along the first axis.
    ShiftDecoupledCenter(f64),
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct VerifyConfig {
    pub seed: u64,
    pub instances: usize,
    pub samples: usize,
    /// Random `(P₀, x₀, τ)` candidates per instance for the predicate check.
    pub candidates: usize,
    pub tolerances: Tolerances,
    pub fault: Option<Fault>,
}

impl Default for VerifyConfig {
    fn default() -> Self {
        VerifyConfig {
            seed: DEFAULT_SEED,
            instances: 50,
            samples: 10_000,
            candidates: 100,
            tolerances: Tolerances::default(),
            fault: None,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct CheckRow {
    pub name: String,
    pub tolerance: f64,
    pub passed: usize,
    pub failed: usize,
    /// Largest observed violation measure (gap, excess, or count).
    pub worst: f64,
    pub failing_seeds: Vec<u64>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct VerifyReport {
    pub rows: Vec<CheckRow>,
}

impl VerifyReport {
    pub fn all_passed(&self) -> bool {
        self.rows.iter().all(|r| r.failed == 0)
    }

    pub fn table(&self) -> String {
        let width = self.rows.iter().map(|r| r.name.len()).max().unwrap_or(5).max(5);
        let mut out = format!(
            "{:<width$}  {:>6}  {:>6}  {:>6}  {:>10}  {:>10}  seeds\n",
            "check", "result", "pass", "fail", "tolerance", "worst"
        );
        for r in &self.rows {
            let seeds: Vec<String> = r.failing_seeds.iter().map(u64::to_string).collect();
            out.push_str(&format!(
                "{:<width$}  {:>6}  {:>6}  {:>6}  {:>10.1e}  {:>10.3e}  {}\n",
                r.name,
                if r.failed == 0 { "PASS" } else { "FAIL" },
                r.passed,
                r.failed,
                r.tolerance,
                r.worst,
                seeds.join(",")
            ));
        }
        out
    }
}

/// One check's verdict on one instance: the measure and whether it is within
/// tolerance.
struct Observation {
    check: usize,
    measure: f64,
    ok: bool,
}

const CRITERIA: [SizeCriterion; 2] = [SizeCriterion::LogDet, SizeCriterion::Trace];

fn check_names(t: &Tolerances) -> Vec<(&'static str, f64)> {
    vec![
        ("prop1: full = decoupled", t.prop1),
        ("prop2: full = s-procedure", t.prop2),
        ("prop2: predicates agree", 0.0),
        ("prop3: decoupled = bounding-opt", t.prop3),
        ("cor1: decoupled <= bounding", t.order),
        ("cor2: decoupled <= ci", t.order),
        ("inscribed >= decoupled (n > 1)", t.order),
        ("containment", t.containment),
        ("sample volume bound", t.mvee),
    ]
}

fn results_for(
    spec: &IntersectionSpec,
    criterion: SizeCriterion,
    opts: &RelaxOptions,
    fault: Option<Fault>,
) -> Result<Vec<MethodResult>> {
    Method::ALL
        .iter()
        .map(|&m| {
            let mut r = run_method(m, spec, criterion, opts)?;
            if let (Method::DecoupledSdp, Some(Fault::ShiftDecoupledCenter(d))) = (m, fault) {
                let mut c = r.ellipsoid.center().clone();
                c[0] += d;
                r.ellipsoid = r.ellipsoid.with_center(c)?;
            }
            Ok(r)
        })
        .collect()
}

fn find(rs: &[MethodResult], m: Method) -> &MethodResult {
    rs.iter().find(|r| r.method == m).expect("all methods run")
}

fn max_quadratic(e: &Ellipsoid, points: &DMatrix<f64>) -> f64 {
    let mut shifted = points.clone();
    for mut col in shifted.column_iter_mut() {
        col -= e.center();
    }
    let z = e
        .factor()
        .solve_lower_triangular(&shifted)
        .expect("factor is nonsingular");
    z.column_iter().map(|c| c.norm_squared()).fold(0.0, f64::max)
}

fn check_instance(point: GridPoint, cfg: &VerifyConfig, opts: &RelaxOptions) -> Result<Vec<Observation>> {
    let t = &cfg.tolerances;
    let spec = point.instance();
    let mut obs = Vec::new();
    let mut push = |check: usize, measure: f64, ok: bool| obs.push(Observation { check, measure, ok });

    let mut rng = ChaCha8Rng::seed_from_u64(point.seed);
    let points = sample_intersection(&spec, cfg.samples, &mut rng)?;
    let stacked = DMatrix::from_columns(&points);
    let floor = if points.len() > spec.dim() {
        Some(mvee_of_points(&points, 1e-6)?.size(SizeCriterion::LogDet))
    } else {
        None
    };

    for criterion in CRITERIA {
        let rs = results_for(&spec, criterion, opts, cfg.fault)?;
        let f = |m| find(&rs, m).objective;
        let gap = |a, b| (f(a) - f(b)).abs();

        let g = gap(Method::FullSdp, Method::DecoupledSdp);
        push(0, g, g <= t.prop1);
        let g = gap(Method::FullSdp, Method::SProcedure);
        push(1, g, g <= t.prop2);
        let g = gap(Method::DecoupledSdp, Method::BoundingOptimal);
        push(3, g, g <= t.prop3);
        let e = f(Method::DecoupledSdp) - f(Method::BoundingNoDelta);
        push(4, e.max(0.0), e <= t.order);
        let e = f(Method::DecoupledSdp) - f(Method::CovarianceIntersection);
        push(5, e.max(0.0), e <= t.order);
        // In one dimension the inscribed interval is the intersection itself.
        if spec.dim() > 1 {
            let e = f(Method::DecoupledSdp) - f(Method::InscribedInflate);
            push(6, e.max(0.0), e <= t.order);
        }

        for r in &rs {
            let q = max_quadratic(&r.ellipsoid, &stacked) - 1.0;
            push(7, q.max(0.0), q <= t.containment);
            if let Some(floor) = floor {
                let e = floor - r.ellipsoid.size(SizeCriterion::LogDet);
                push(8, e.max(0.0), e <= t.mvee);
            }
        }

        if criterion == SizeCriterion::LogDet {
            let best = find(&rs, Method::DecoupledSdp);
            let lambda = best.weights.as_ref().map(|w| w.as_slice().to_vec()).unwrap_or_default();
            let mut disagreements = 0;
            for _ in 0..cfg.candidates {
                let e = &best.ellipsoid;
                let dir = DVector::from_fn(e.dim(), |_, _| rng.random_range(-1.0..1.0));
                let shift = e.factor() * dir * rng.random_range(0.0..0.5);
                let candidate = e.scaled_shape(rng.random_range(0.6..1.6))?.with_center(e.center() + shift)?;
                let tau: Vec<f64> = lambda.iter().map(|l| l * rng.random_range(0.5..1.5)).collect();
                if sdp_feasible(&spec, &candidate, &tau)? != s_procedure_certificate(&spec, &candidate, &tau)? {
                    disagreements += 1;
                }
            }
            push(2, disagreements as f64, disagreements == 0);
        }
    }
    Ok(obs)
}

pub fn run_suite(cfg: &VerifyConfig, opts: &RelaxOptions) -> Result<VerifyReport> {
    let grid = instance_grid(cfg.seed, cfg.instances);
    let per_instance: Vec<(GridPoint, Vec<Observation>)> = grid
        .into_par_iter()
        .map(|p| Ok((p, check_instance(p, cfg, opts)?)))
        .collect::<Result<_>>()?;

    let mut rows: Vec<CheckRow> = check_names(&cfg.tolerances)
        .into_iter()
        .map(|(name, tolerance)| CheckRow {
            name: name.to_string(),
            tolerance,
            passed: 0,
            failed: 0,
            worst: 0.0,
            failing_seeds: Vec::new(),
        })
        .collect();
    for (point, obs) in &per_instance {
        for o in obs {
            let row = &mut rows[o.check];
            row.worst = row.worst.max(o.measure);
            if o.ok {
                row.passed += 1;
            } else {
                row.failed += 1;
                if !row.failing_seeds.contains(&point.seed) {
                    row.failing_seeds.push(point.seed);
                }
            }
        }
    }
    Ok(VerifyReport { rows })
}
