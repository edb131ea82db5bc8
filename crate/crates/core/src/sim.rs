//! Monte Carlo harness for multi-sensor set-membership tracking.
//!
//! Each run draws a truth trajectory with process noise uniform in the
//! process-noise ellipsoid, runs one filter per sensor, fuses the local
//! estimates at every step, and also runs a baseline filter on sensor 1 that
//! updates with the untightened-weight bounding method. Runs use independent
//! generators derived from the root seed, and reductions add runs in index
//! order, so results do not depend on the thread count.

use std::io::Write;

use nalgebra::DVector;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::ellipsoid::{Ellipsoid, SizeCriterion};
use crate::error::{Error, Result};
use crate::filter::{fusion_center, measurement_ellipsoid, predict, update, FilterState, LinearDynamics};
use crate::format::sig15;
use crate::linalg::SymMatrix;
use crate::relax::{Method, RelaxOptions};
use crate::sampling::sample_in_ellipsoid;

/// Containment tolerance on the quadratic value of the truth.
pub const TRUTH_TOL: f64 = 1e-9;

/// Slack on the per-step volume orderings.
pub const ORDER_SLACK: f64 = 1e-8;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct TrackScenario {
    pub dynamics: LinearDynamics,
    pub initial_truth: Vec<f64>,
    pub initial_estimate: Ellipsoid,
    pub steps: usize,
    pub runs: usize,
    pub seed: u64,
    /// Update rule of the per-sensor filters.
    pub update_method: Method,
    /// Update rule of the sensor-1 baseline filter.
    pub baseline_method: Method,
    pub criterion: SizeCriterion,
}

impl Default for TrackScenario {
    fn default() -> Self {
        TrackScenario {
            dynamics: LinearDynamics::constant_velocity(1.0),
            initial_truth: vec![1.0, 1.0],
            initial_estimate: Ellipsoid::from_slices(
                &[2.0, 2.0],
                &[vec![50.0, 0.0], vec![0.0, 50.0]],
            )
            .expect("valid constants"),
            steps: 50,
            runs: 100,
            seed: 20_180_601,
            update_method: Method::DecoupledSdp,
            baseline_method: Method::BoundingNoDelta,
            criterion: SizeCriterion::LogDet,
        }
    }
}

impl TrackScenario {
    pub fn validate(&self) -> Result<()> {
        let n = self.dynamics.dim();
        if self.initial_truth.len() != n {
            return Err(Error::dim(n, self.initial_truth.len()));
        }
        if self.initial_estimate.dim() != n {
            return Err(Error::dim(n, self.initial_estimate.dim()));
        }
        if self.steps == 0 || self.runs == 0 {
            return Err(Error::InvalidProblem("steps and runs must be at least 1".into()));
        }
        if self.dynamics.sensors().is_empty() {
            return Err(Error::InvalidProblem("at least one sensor is required".into()));
        }
        Ok(())
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct StepMetrics {
    pub step: usize,
    pub rmse_sensor: Vec<f64>,
    pub rmse_fused_dec: f64,
    pub rmse_fused_ci: f64,
    /// Mean log-determinant of the shape, per track.
    pub vol_sensor: Vec<f64>,
    pub vol_fused_dec: f64,
    pub vol_fused_ci: f64,
    pub rmse_sensor1_baseline: f64,
    pub vol_sensor1_baseline: f64,
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct Violations {
    /// Truth outside a predicted, updated or fused ellipsoid.
    pub containment: usize,
    /// Decoupled update larger than the baseline update on the same pair.
    pub update_order: usize,
    /// Decoupled fusion larger than covariance intersection.
    pub fusion_order: usize,
    /// Updates that fell back to the predicted ellipsoid.
    pub fallbacks: usize,
    /// Largest quadratic value of the truth seen in any checked ellipsoid.
    pub worst_truth_value: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TrackReport {
    pub runs: usize,
    pub steps: Vec<StepMetrics>,
    pub violations: Violations,
}

/// Per-track squared error and log-determinant at one step of one run.
/// Track order: sensors, fused decoupled, fused CI, baseline.
struct StepSample {
    err2: Vec<f64>,
    logdet: Vec<f64>,
}

struct RunTrace {
    samples: Vec<StepSample>,
    violations: Violations,
}

pub fn run_generator(seed: u64, run: usize) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(run as u64);
    rng
}

fn check_truth(e: &Ellipsoid, truth: &DVector<f64>, v: &mut Violations) -> Result<()> {
    let q = e.quadratic_value(truth)?;
    v.worst_truth_value = v.worst_truth_value.max(q);
    if q > 1.0 + TRUTH_TOL {
        v.containment += 1;
    }
    Ok(())
}

fn step_update(
    predicted: &FilterState,
    meas: &Ellipsoid,
    method: Method,
    criterion: SizeCriterion,
    opts: &RelaxOptions,
    v: &mut Violations,
) -> Result<Option<FilterState>> {
    match update(predicted, meas, method, criterion, opts) {
        Ok(s) => Ok(Some(s)),
        Err(Error::EmptyIntersection) => {
            log::warn!("empty intersection at step {}; keeping prediction", predicted.step);
            v.fallbacks += 1;
            Ok(None)
        }
        Err(e) => Err(e),
    }
}

fn simulate_run(sc: &TrackScenario, run: usize, opts: &RelaxOptions) -> Result<RunTrace> {
    let mut rng = run_generator(sc.seed, run);
    let dynamics = &sc.dynamics;
    let n = dynamics.dim();
    let process = Ellipsoid::new(DVector::zeros(n), dynamics.process_noise().clone())?;
    let noises: Vec<Ellipsoid> = dynamics
        .sensors()
        .iter()
        .map(|r| Ellipsoid::new(DVector::zeros(n), r.clone()))
        .collect::<Result<_>>()?;

    let start = FilterState {
        estimate: sc.initial_estimate.clone(),
        step: 0,
    };
    let mut locals = vec![start.clone(); noises.len()];
    let mut baseline = start;
    let mut truth = DVector::from_column_slice(&sc.initial_truth);
    let mut v = Violations::default();
    let mut samples = Vec::with_capacity(sc.steps);

    for _ in 0..sc.steps {
        truth = dynamics.transition() * &truth + sample_in_ellipsoid(&process, &mut rng);
        let meas: Vec<Ellipsoid> = noises
            .iter()
            .zip(dynamics.sensors())
            .map(|(noise, r)| {
                let y = &truth + sample_in_ellipsoid(noise, &mut rng);
                measurement_ellipsoid(&y, r)
            })
            .collect::<Result<_>>()?;

        for (i, local) in locals.iter_mut().enumerate() {
            let predicted = predict(local, dynamics)?;
            check_truth(&predicted.estimate, &truth, &mut v)?;
            let updated = step_update(&predicted, &meas[i], sc.update_method, sc.criterion, opts, &mut v)?;
            let compare = step_update(&predicted, &meas[i], sc.baseline_method, sc.criterion, opts, &mut v)?;
            if let (Some(u), Some(c)) = (&updated, &compare) {
                if u.estimate.size(sc.criterion) > c.estimate.size(sc.criterion) + ORDER_SLACK {
                    v.update_order += 1;
                }
            }
            *local = updated.unwrap_or(predicted);
            check_truth(&local.estimate, &truth, &mut v)?;
        }

        let predicted = predict(&baseline, dynamics)?;
        check_truth(&predicted.estimate, &truth, &mut v)?;
        baseline = step_update(&predicted, &meas[0], sc.baseline_method, sc.criterion, opts, &mut v)?
            .unwrap_or(predicted);
        check_truth(&baseline.estimate, &truth, &mut v)?;

        let estimates: Vec<Ellipsoid> = locals.iter().map(|s| s.estimate.clone()).collect();
        let fused_dec = fusion_center(&estimates, Method::DecoupledSdp, sc.criterion, opts)?;
        let fused_ci = fusion_center(&estimates, Method::CovarianceIntersection, sc.criterion, opts)?;
        check_truth(&fused_dec.ellipsoid, &truth, &mut v)?;
        check_truth(&fused_ci.ellipsoid, &truth, &mut v)?;
        if fused_dec.objective > fused_ci.objective + ORDER_SLACK {
            v.fusion_order += 1;
        }

        let tracks = estimates
            .iter()
            .chain([&fused_dec.ellipsoid, &fused_ci.ellipsoid, &baseline.estimate]);
        let mut err2 = Vec::new();
        let mut logdet = Vec::new();
        for e in tracks {
            err2.push((e.center() - &truth).norm_squared());
            logdet.push(e.size(SizeCriterion::LogDet));
        }
        samples.push(StepSample { err2, logdet });
    }
    Ok(RunTrace {
        samples,
        violations: v,
    })
}

pub fn simulate(sc: &TrackScenario, opts: &RelaxOptions) -> Result<TrackReport> {
    sc.validate()?;
    let traces: Vec<RunTrace> = (0..sc.runs)
        .into_par_iter()
        .map(|run| simulate_run(sc, run, opts))
        .collect::<Result<_>>()?;

    let s = sc.dynamics.sensors().len();
    let runs = sc.runs as f64;
    let mut steps = Vec::with_capacity(sc.steps);
    for k in 0..sc.steps {
        let tracks = s + 3;
        let mut err2 = vec![0.0; tracks];
        let mut logdet = vec![0.0; tracks];
        for t in &traces {
            for j in 0..tracks {
                err2[j] += t.samples[k].err2[j];
                logdet[j] += t.samples[k].logdet[j];
            }
        }
        let rmse: Vec<f64> = err2.iter().map(|e| (e / runs).sqrt()).collect();
        let vol: Vec<f64> = logdet.iter().map(|l| l / runs).collect();
        steps.push(StepMetrics {
            step: k + 1,
            rmse_sensor: rmse[..s].to_vec(),
            rmse_fused_dec: rmse[s],
            rmse_fused_ci: rmse[s + 1],
            vol_sensor: vol[..s].to_vec(),
            vol_fused_dec: vol[s],
            vol_fused_ci: vol[s + 1],
            rmse_sensor1_baseline: rmse[s + 2],
            vol_sensor1_baseline: vol[s + 2],
        });
    }

    let mut violations = Violations::default();
    for t in &traces {
        let v = &t.violations;
        violations.containment += v.containment;
        violations.update_order += v.update_order;
        violations.fusion_order += v.fusion_order;
        violations.fallbacks += v.fallbacks;
        violations.worst_truth_value = violations.worst_truth_value.max(v.worst_truth_value);
    }
    Ok(TrackReport {
        runs: sc.runs,
        steps,
        violations,
    })
}

/// Writes the per-step metrics as comma-separated values with a header.
pub fn write_metrics_csv<W: Write>(report: &TrackReport, mut out: W) -> std::io::Result<()> {
    let s = report.steps.first().map_or(0, |m| m.rmse_sensor.len());
    let mut header = vec!["step".to_string()];
    header.extend((1..=s).map(|i| format!("rmse_sensor{i}")));
    header.extend(["rmse_fused_dec".into(), "rmse_fused_ci".into()]);
    header.extend((1..=s).map(|i| format!("vol_sensor{i}")));
    header.extend(["vol_fused_dec".into(), "vol_fused_ci".into()]);
    header.extend(["rmse_sensor1_baseline".into(), "vol_sensor1_baseline".into()]);
    writeln!(out, "{}", header.join(","))?;
    for m in &report.steps {
        let mut row = vec![m.step.to_string()];
        row.extend(m.rmse_sensor.iter().map(|v| sig15(*v)));
        row.extend([sig15(m.rmse_fused_dec), sig15(m.rmse_fused_ci)]);
        row.extend(m.vol_sensor.iter().map(|v| sig15(*v)));
        row.extend([sig15(m.vol_fused_dec), sig15(m.vol_fused_ci)]);
        row.extend([sig15(m.rmse_sensor1_baseline), sig15(m.vol_sensor1_baseline)]);
        writeln!(out, "{}", row.join(","))?;
    }
    Ok(())
}

/// Scenario with every sensor's noise shape replaced by `eps·I`.
pub fn with_sensor_noise(sc: &TrackScenario, eps: f64) -> Result<TrackScenario> {
    let d = &sc.dynamics;
    let n = d.dim();
    let sensors = vec![SymMatrix::identity(n).scale(eps); d.sensors().len()];
    let dynamics = LinearDynamics::new(
        d.transition().clone(),
        d.process_noise().clone(),
        sensors,
        d.period(),
    )?;
    Ok(TrackScenario {
        dynamics,
        ..sc.clone()
    })
}
