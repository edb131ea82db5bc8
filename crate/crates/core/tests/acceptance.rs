//! Acceptance run. Prints one PASS/FAIL line per criterion and exits with a
//! nonzero status if any criterion fails.

use std::sync::OnceLock;
use std::time::Instant;

use nalgebra::{DMatrix, DVector};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;

use ellbound::barrier::{self, AffineSymMap, LmiProblem, Objective, SolverOptions, SolverResult, SolverStatus};
use ellbound::ellipsoid::{Ellipsoid, IntersectionSpec, SizeCriterion};
use ellbound::error::Error;
use ellbound::linalg::{eps_psd, SymMatrix};
use ellbound::mvee::mvee_of_points;
use ellbound::relax::inscribed::inscribed_problem;
use ellbound::relax::sdp::{decoupled_problem, full_sdp_problem, s_procedure_problem};
use ellbound::relax::{run_method, s_procedure_certificate, sdp_feasible, Method, MethodResult, RelaxOptions};
use ellbound::sampling::sample_intersection;
use ellbound::scenarios::{instance_grid, static_draws, static_table, GridPoint, DEFAULT_SEED, TABLE_METHODS};
use ellbound::sim::{simulate, TrackScenario, ORDER_SLACK};

const GRID_SIZE: usize = 50;
const CRITERIA: [SizeCriterion; 2] = [SizeCriterion::LogDet, SizeCriterion::Trace];

struct Outcome {
    pass: bool,
    detail: String,
}

impl Outcome {
    fn from_failures(failures: Vec<String>, summary: String) -> Outcome {
        if failures.is_empty() {
            Outcome { pass: true, detail: summary }
        } else {
            let shown: Vec<_> = failures.iter().take(5).cloned().collect();
            Outcome {
                pass: false,
                detail: format!("{summary}; {} failures: {}", failures.len(), shown.join("; ")),
            }
        }
    }
}

/// All eight methods under both criteria on one grid instance.
struct GridRun {
    point: GridPoint,
    spec: IntersectionSpec,
    results: Vec<(SizeCriterion, Vec<MethodResult>)>,
}

impl GridRun {
    fn get(&self, criterion: SizeCriterion, method: Method) -> &MethodResult {
        let (_, rs) = self.results.iter().find(|(c, _)| *c == criterion).unwrap();
        rs.iter().find(|r| r.method == method).unwrap()
    }
}

fn grid_runs() -> &'static [GridRun] {
    static RUNS: OnceLock<Vec<GridRun>> = OnceLock::new();
    RUNS.get_or_init(|| {
        let opts = RelaxOptions::default();
        instance_grid(DEFAULT_SEED, GRID_SIZE)
            .into_par_iter()
            .map(|point| {
                let spec = point.instance();
                let results = CRITERIA
                    .iter()
                    .map(|&c| {
                        let rs = Method::ALL
                            .iter()
                            .map(|&m| {
                                run_method(m, &spec, c, &opts)
                                    .unwrap_or_else(|e| panic!("{m} failed on {point:?}: {e}"))
                            })
                            .collect();
                        (c, rs)
                    })
                    .collect();
                GridRun { point, spec, results }
            })
            .collect()
    })
}

fn table_one() -> Outcome {
    let draws = static_draws(DEFAULT_SEED, 100);
    let rows = static_table(&draws, &TABLE_METHODS, SizeCriterion::LogDet, &RelaxOptions::default()).unwrap();
    let mean = |m: Method| rows.iter().find(|r| r.method == m).unwrap().mean_objective;
    let (sdp, dec, ins) = (mean(Method::FullSdp), mean(Method::DecoupledSdp), mean(Method::InscribedInflate));
    let (bnd, rec) = (mean(Method::BoundingNoDelta), mean(Method::RecursiveBounding));

    let mut failures = Vec::new();
    let mut near = |name: &str, got: f64, want: f64, tol: f64| {
        if (got - want).abs() > tol {
            failures.push(format!("{name} = {got:.6}, expected {want} ± {tol}"));
        }
    };
    near("sdp", sdp, 2.6293, 0.05);
    near("decoupled", dec, 2.6293, 0.05);
    near("sdp − decoupled", sdp - dec, 0.0, 1e-4);
    near("inscribed", ins, 4.2379, 0.05);
    let mut pair = [bnd, rec];
    pair.sort_by(f64::total_cmp);
    near("smaller bounding row", pair[0], 2.6378, 0.05);
    near("larger bounding row", pair[1], 2.6500, 0.05);
    Outcome::from_failures(
        failures,
        format!("sdp {sdp:.4}, decoupled {dec:.4}, inscribed {ins:.4}, bounding {bnd:.4}, recursive {rec:.4}"),
    )
}

fn paired_gap(a: Method, b: Method, tol: f64) -> Outcome {
    let mut failures = Vec::new();
    let mut worst = 0.0_f64;
    for run in grid_runs() {
        for c in CRITERIA {
            let gap = (run.get(c, a).objective - run.get(c, b).objective).abs();
            worst = worst.max(gap);
            if gap > tol {
                failures.push(format!("{:?} {c:?}: gap {gap:.3e}", run.point));
            }
        }
    }
    Outcome::from_failures(
        failures,
        format!("{GRID_SIZE} instances × 2 criteria, max |{a} − {b}| = {worst:.2e} (tol {tol:.0e})"),
    )
}

fn proposition_one() -> Outcome {
    paired_gap(Method::FullSdp, Method::DecoupledSdp, 1e-4)
}

/// Random `(P₀, x₀, τ)` around the decoupled optimum: shape scaled by
/// `[0.6, 1.6]`, center moved by up to half a semi-axis, multipliers scaled
/// entrywise by `[0.5, 1.5]`.
fn random_candidate(run: &GridRun, rng: &mut ChaCha8Rng) -> (Ellipsoid, Vec<f64>) {
    let best = run.get(SizeCriterion::LogDet, Method::DecoupledSdp);
    let e = &best.ellipsoid;
    let n = e.dim();
    let dir = DVector::from_fn(n, |_, _| rng.random_range(-1.0..1.0));
    let shift = e.factor() * dir * rng.random_range(0.0..0.5);
    let candidate = e
        .scaled_shape(rng.random_range(0.6..1.6))
        .unwrap()
        .with_center(e.center() + shift)
        .unwrap();
    let lambda = best.weights.as_ref().unwrap().as_slice();
    let tau = lambda.iter().map(|l| l * rng.random_range(0.5..1.5)).collect();
    (candidate, tau)
}

fn proposition_two() -> Outcome {
    let objectives = paired_gap(Method::FullSdp, Method::SProcedure, 1e-6);
    let mut failures = Vec::new();
    let (mut accepted, mut total) = (0, 0);
    for run in grid_runs() {
        let mut rng = ChaCha8Rng::seed_from_u64(run.point.seed);
        for _ in 0..100 {
            let (candidate, tau) = random_candidate(run, &mut rng);
            let a = sdp_feasible(&run.spec, &candidate, &tau).unwrap();
            let b = s_procedure_certificate(&run.spec, &candidate, &tau).unwrap();
            total += 1;
            accepted += usize::from(a);
            if a != b {
                failures.push(format!("{:?}: sdp {a}, s-procedure {b}", run.point));
            }
        }
    }
    let mut detail = format!("objectives: {}; predicates agree on {total} candidates ({accepted} feasible)", objectives.detail);
    if !objectives.pass {
        detail = format!("objectives FAIL: {}", objectives.detail);
    }
    let mut out = Outcome::from_failures(failures, detail);
    out.pass &= objectives.pass;
    out
}

fn proposition_three() -> Outcome {
    paired_gap(Method::DecoupledSdp, Method::BoundingOptimal, 1e-4)
}

fn corollaries() -> Outcome {
    let mut failures = Vec::new();
    let orders = [
        (Method::DecoupledSdp, Method::BoundingNoDelta),
        (Method::BoundingNoDelta, Method::CovarianceIntersection),
        (Method::DecoupledSdp, Method::CovarianceIntersection),
    ];
    for run in grid_runs() {
        for c in CRITERIA {
            for (a, b) in orders {
                let (fa, fb) = (run.get(c, a).objective, run.get(c, b).objective);
                if fa > fb + 1e-8 {
                    failures.push(format!("{:?} {c:?}: {a} {fa:.10} > {b} {fb:.10}", run.point));
                }
            }
        }
    }
    Outcome::from_failures(
        failures,
        format!("decoupled ≤ bounding ≤ ci and decoupled ≤ ci on {GRID_SIZE} instances × 2 criteria"),
    )
}

/// Largest `(x−c)ᵀP⁻¹(x−c)` over the columns of `points`.
fn max_quadratic(e: &Ellipsoid, points: &DMatrix<f64>) -> f64 {
    let mut shifted = points.clone();
    for mut col in shifted.column_iter_mut() {
        col -= e.center();
    }
    let z = e.factor().solve_lower_triangular(&shifted).unwrap();
    z.column_iter().map(|c| c.norm_squared()).fold(0.0, f64::max)
}

fn containment() -> Outcome {
    let failures: Vec<String> = grid_runs()
        .par_iter()
        .flat_map_iter(|run| {
            let mut rng = ChaCha8Rng::seed_from_u64(run.point.seed ^ 0xc0ffee);
            let points = sample_intersection(&run.spec, 10_000, &mut rng).unwrap();
            let floor = mvee_of_points(&points, 1e-6).unwrap().size(SizeCriterion::LogDet);
            let stacked = DMatrix::from_columns(&points);
            let mut failures = Vec::new();
            for (_, results) in &run.results {
                for r in results {
                    let worst = max_quadratic(&r.ellipsoid, &stacked);
                    if worst > 1.0 + 1e-9 {
                        failures.push(format!("{:?} {}: sample at quadratic value {worst:.12}", run.point, r.method));
                    }
                    let logdet = r.ellipsoid.size(SizeCriterion::LogDet);
                    if logdet < floor - 1e-6 {
                        failures.push(format!("{:?} {}: logdet {logdet:.6} below sample bound {floor:.6}", run.point, r.method));
                    }
                }
            }
            failures
        })
        .collect();
    Outcome::from_failures(
        failures,
        format!("8 methods × 2 criteria × {GRID_SIZE} instances against 10⁴ samples each"),
    )
}

fn dynamic_orderings() -> Outcome {
    let sc = TrackScenario::default();
    let report = simulate(&sc, &RelaxOptions::default()).unwrap();
    let v = &report.violations;
    let mut failures = Vec::new();
    if v.containment > 0 {
        failures.push(format!("{} containment violations (worst value {:.3e})", v.containment, v.worst_truth_value));
    }
    if v.update_order > 0 {
        failures.push(format!("{} steps with decoupled update larger than bounding", v.update_order));
    }
    if v.fusion_order > 0 {
        failures.push(format!("{} steps with decoupled fusion larger than ci", v.fusion_order));
    }
    let mut worst_margin = f64::NEG_INFINITY;
    for m in &report.steps {
        let best = m.rmse_sensor.iter().copied().fold(f64::INFINITY, f64::min);
        worst_margin = worst_margin.max(m.rmse_fused_dec - best);
        if m.rmse_fused_dec > best + 0.1 {
            failures.push(format!("step {}: fused rmse {} > best sensor rmse {best} + 0.1", m.step, m.rmse_fused_dec));
        }
        if m.vol_fused_dec > m.vol_fused_ci + ORDER_SLACK {
            failures.push(format!("step {}: mean fused volume decoupled {} > ci {}", m.step, m.vol_fused_dec, m.vol_fused_ci));
        }
        if m.step > 3 {
            let mean_sensor = m.rmse_sensor.iter().sum::<f64>() / m.rmse_sensor.len() as f64;
            if m.rmse_fused_dec > mean_sensor {
                failures.push(format!("step {}: fused rmse {} > mean sensor rmse {mean_sensor}", m.step, m.rmse_fused_dec));
            }
        }
    }
    let last = report.steps.last().unwrap();
    Outcome::from_failures(
        failures,
        format!(
            "{} runs × {} steps, {} fallbacks, worst fused − best sensor rmse {:.3}, final rmse fused {:.3} vs sensors {:.3?}",
            sc.runs,
            sc.steps,
            v.fallbacks,
            worst_margin,
            last.rmse_fused_dec,
            last.rmse_sensor
        ),
    )
}

fn scalar_map(constant: f64, coeffs: &[f64]) -> AffineSymMap {
    let one = |v: f64| SymMatrix::identity(1).scale(v);
    AffineSymMap::new(one(constant), coeffs.iter().map(|&c| one(c)).collect()).unwrap()
}

fn primal_feasible(p: &LmiProblem, r: &SolverResult) -> bool {
    (0..p.constraints().len()).all(|k| {
        let s = p.slack(k, &r.y).unwrap();
        s.min_eigenvalue() >= -eps_psd(&s)
    }) && p.nonneg_vars().iter().all(|&j| r.y[j] >= -1e-12)
}

fn solver_units() -> Outcome {
    let opts = SolverOptions::default();
    let mut failures = Vec::new();
    let eye = SymMatrix::identity(2);

    // min y  s.t.  I − y·I ⪯ 0
    let mut lp = LmiProblem::new(1, Objective::Linear(vec![1.0]));
    lp.nsd(AffineSymMap::new(eye.clone(), vec![eye.scale(-1.0)]).unwrap());
    // min −log det(y·I₂)  s.t.  y·I₂ ⪯ 2·I₂, y ≥ 0
    let mut ld = LmiProblem::new(1, Objective::Linear(vec![0.0]));
    ld.nsd(AffineSymMap::new(eye.scale(-2.0), vec![eye.clone()]).unwrap());
    let k = ld.psd(AffineSymMap::new(SymMatrix::zeros(2), vec![eye.clone()]).unwrap());
    ld.nonneg([0]);
    ld.set_objective(Objective::NegLogDet { constraint: k });
    // min tr((y·I₂)⁻¹)  s.t.  y ≤ 4
    let mut ti = LmiProblem::new(1, Objective::Linear(vec![0.0]));
    ti.nsd(AffineSymMap::new(eye.scale(-4.0), vec![eye.clone()]).unwrap());
    let k = ti.psd(AffineSymMap::new(SymMatrix::zeros(2), vec![eye.clone()]).unwrap());
    ti.set_objective(Objective::TraceInverse { constraint: k });
    // min y₁ + 2y₂  s.t.  y₁² + y₂² ≤ 1 as [[1, y₁, y₂],[y₁, 1, 0],[y₂, 0, 1]] ⪰ 0
    let mut disk = LmiProblem::new(2, Objective::Linear(vec![1.0, 2.0]));
    let e = |i: usize, j: usize| {
        let mut m = nalgebra::DMatrix::zeros(3, 3);
        m[(i, j)] = 1.0;
        m[(j, i)] = 1.0;
        SymMatrix::symmetrized(&m).unwrap()
    };
    disk.psd(AffineSymMap::new(SymMatrix::identity(3), vec![e(0, 1), e(0, 2)]).unwrap());
    // min y  s.t.  y ≥ 3 as a scalar map
    let mut shift = LmiProblem::new(1, Objective::Linear(vec![1.0]));
    shift.psd(scalar_map(-3.0, &[1.0]));

    let s5 = 5f64.sqrt();
    let analytic: Vec<(&str, &LmiProblem, Vec<f64>, f64)> = vec![
        ("lp", &lp, vec![1.0], 1.0),
        ("logdet", &ld, vec![2.0], -2.0 * 2f64.ln()),
        ("trace-inverse", &ti, vec![4.0], 0.5),
        ("disk", &disk, vec![-1.0 / s5, -2.0 / s5], -s5),
        ("scalar", &shift, vec![3.0], 3.0),
    ];
    for (name, p, y, f) in &analytic {
        match barrier::solve(p, &opts, None) {
            Ok(r) => {
                let err = r.y.iter().zip(y).map(|(a, b)| (a - b).abs()).fold((r.objective - f).abs(), f64::max);
                if err > 1e-6 {
                    failures.push(format!("{name}: error {err:.2e}"));
                }
                if r.status != SolverStatus::Optimal || !primal_feasible(p, &r) {
                    failures.push(format!("{name}: not an optimal feasible point"));
                }
            }
            Err(e) => failures.push(format!("{name}: {e}")),
        }
    }

    let mut optimal = 0;
    for run in grid_runs() {
        for c in CRITERIA {
            for p in [
                decoupled_problem(&run.spec, c),
                full_sdp_problem(&run.spec, c),
                s_procedure_problem(&run.spec, c),
            ] {
                match barrier::solve(&p, &opts, None) {
                    Ok(r) if r.status == SolverStatus::Optimal => {
                        optimal += 1;
                        if !primal_feasible(&p, &r) {
                            failures.push(format!("{:?} {c:?}: optimal point infeasible", run.point));
                        }
                    }
                    Ok(_) | Err(Error::MaxIterations(_)) => {}
                    Err(e) => failures.push(format!("{:?} {c:?}: {e}", run.point)),
                }
            }
        }
        let p = inscribed_problem(&run.spec);
        if let Ok(r) = barrier::solve(&p, &opts, None) {
            optimal += 1;
            if !primal_feasible(&p, &r) {
                failures.push(format!("{:?} inscribed: optimal point infeasible", run.point));
            }
        }
    }
    Outcome::from_failures(
        failures,
        format!("{} analytic problems within 1e-6; {optimal} optimal relaxation solves primal feasible", analytic.len()),
    )
}

fn main() {
    let criteria: [(&str, fn() -> Outcome); 8] = [
        ("static table reproduction", table_one),
        ("full and decoupled relaxations agree", proposition_one),
        ("full relaxation and S-procedure agree", proposition_two),
        ("decoupled relaxation and bounding family agree", proposition_three),
        ("volume orderings", corollaries),
        ("containment and sample lower bound", containment),
        ("dynamic tracking orderings", dynamic_orderings),
        ("solver unit problems", solver_units),
    ];
    let filter: Vec<String> = std::env::args().skip(1).filter(|a| !a.starts_with('-')).collect();
    let mut failed = 0;
    for (i, (name, check)) in criteria.iter().enumerate() {
        let id = format!("criterion {}", i + 1);
        if !filter.is_empty() && !filter.iter().any(|f| name.contains(f.as_str()) || id.ends_with(f.as_str())) {
            continue;
        }
        let start = Instant::now();
        let out = check();
        failed += usize::from(!out.pass);
        println!(
            "{} {id} ({name}) [{:.1} s]: {}",
            if out.pass { "PASS" } else { "FAIL" },
            start.elapsed().as_secs_f64(),
            out.detail
        );
    }
    if failed > 0 {
        println!("{failed} acceptance criteria failed");
        std::process::exit(1);
    }
}
