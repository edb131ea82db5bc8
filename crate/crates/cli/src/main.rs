//! `ellbound` command-line entry point.

mod svg;

use std::fs;
use std::io::{self, Write};
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use ellbound::ellipsoid::{IntersectionSpec, SizeCriterion};
use ellbound::error::Error;
use ellbound::format::sig15;
use ellbound::relax::{run_method, Method, MethodResult, RelaxOptions};
use ellbound::scenarios::{static_draws, static_scenario, static_table, DEFAULT_SEED, TABLE_METHODS};
use ellbound::sim::{simulate, write_metrics_csv, TrackScenario};
use ellbound::verify::{run_suite, Fault, VerifyConfig};

const EXIT_VERIFY: u8 = 1;
const EXIT_PARSE: u8 = 2;
const EXIT_INFEASIBLE: u8 = 3;
const EXIT_SOLVER: u8 = 4;

#[derive(Parser)]
#[command(name = "ellbound", version, about = "Outer ellipsoidal bounds for intersections of ellipsoids")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Bound the intersection given in a spec JSON file.
    Fuse(FuseArgs),
    /// Monte Carlo table for the built-in three-sensor static scenario.
    StaticDemo(StaticArgs),
    /// Multi-sensor tracking simulation.
    Track(TrackArgs),
    /// Run the invariant suite over the seeded instance grid.
    Verify(VerifyArgs),
    /// Draw the members of a spec, and optionally method results, as SVG.
    Plot(PlotArgs),
}

#[derive(Clone)]
struct MethodList(Vec<Method>);

fn parse_methods(s: &str) -> Result<MethodList, String> {
    if s == "all" {
        return Ok(MethodList(Method::ALL.to_vec()));
    }
    s.split(',')
        .map(|t| {
            Method::from_tag(t.trim()).ok_or_else(|| {
                let tags: Vec<&str> = Method::ALL.iter().map(|m| m.tag()).collect();
                format!("unknown method `{t}` (expected {}|all)", tags.join("|"))
            })
        })
        .collect::<Result<_, _>>()
        .map(MethodList)
}

fn parse_method(s: &str) -> Result<Method, String> {
    Method::from_tag(s).ok_or_else(|| format!("unknown method `{s}`"))
}

#[derive(Args)]
struct FuseArgs {
    #[arg(long)]
    input: PathBuf,
    /// Directory for `fuse.json`; standard output when omitted.
    #[arg(long)]
    out: Option<PathBuf>,
    #[arg(long, default_value = "all", value_parser = parse_methods)]
    method: MethodList,
    #[arg(long, default_value = "logdet")]
    criterion: SizeCriterion,
    /// Solver path tolerance.
    #[arg(long)]
    tol: Option<f64>,
}

#[derive(Args)]
struct StaticArgs {
    #[arg(long, default_value = ".")]
    out: PathBuf,
    #[arg(long, default_value_t = DEFAULT_SEED)]
    seed: u64,
    /// Number of draws of the third center.
    #[arg(long, default_value_t = 100, value_parser = clap::value_parser!(u64).range(1..))]
    runs: u64,
    #[arg(long, default_value = "logdet")]
    criterion: SizeCriterion,
    #[arg(long)]
    tol: Option<f64>,
}

#[derive(Args)]
struct TrackArgs {
    /// Scenario JSON; the built-in scenario when omitted.
    #[arg(long)]
    input: Option<PathBuf>,
    #[arg(long, default_value = ".")]
    out: PathBuf,
    #[arg(long)]
    seed: Option<u64>,
    #[arg(long, value_parser = clap::value_parser!(u64).range(1..))]
    runs: Option<u64>,
    #[arg(long, value_parser = clap::value_parser!(u64).range(1..))]
    steps: Option<u64>,
    /// Update rule of the per-sensor filters.
    #[arg(long, value_parser = parse_method)]
    method: Option<Method>,
    #[arg(long)]
    criterion: Option<SizeCriterion>,
    #[arg(long)]
    tol: Option<f64>,
}

#[derive(Args)]
struct VerifyArgs {
    #[arg(long, default_value_t = DEFAULT_SEED)]
    seed: u64,
    /// Tolerance override, `NAME=VALUE` or a bare value for the three
    /// equivalence checks. Names: prop1, prop2, prop3, order, containment, mvee.
    #[arg(long)]
    tol: Vec<String>,
    #[arg(long, default_value_t = 50, value_parser = clap::value_parser!(u64).range(1..))]
    instances: u64,
    #[arg(long, default_value_t = 10_000, value_parser = clap::value_parser!(u64).range(1..))]
    samples: u64,
    /// Move every decoupled result's center by 0.5 along the first axis.
    #[arg(long)]
    inject_fault: bool,
}

#[derive(Args)]
struct PlotArgs {
    #[arg(long)]
    input: PathBuf,
    #[arg(long, default_value = ".")]
    out: PathBuf,
    /// Methods whose results are overlaid on the members.
    #[arg(long, value_parser = parse_methods)]
    method: Option<MethodList>,
    #[arg(long, default_value = "logdet")]
    criterion: SizeCriterion,
}

struct Failure {
    code: u8,
    message: String,
}

impl From<Error> for Failure {
    fn from(e: Error) -> Self {
        let code = match e {
            Error::Infeasible(_) | Error::EmptyIntersection => EXIT_INFEASIBLE,
            Error::DimensionMismatch { .. }
            | Error::NotPositiveDefinite
            | Error::DegenerateInput(_)
            | Error::InvalidProblem(_) => EXIT_PARSE,
            _ => EXIT_SOLVER,
        };
        Failure {
            code,
            message: e.to_string(),
        }
    }
}

fn io_failure(path: &Path, e: io::Error) -> Failure {
    Failure {
        code: EXIT_SOLVER,
        message: format!("{}: {e}", path.display()),
    }
}

fn read_json<T: serde::de::DeserializeOwned>(path: &Path) -> Result<T, Failure> {
    let text = fs::read_to_string(path).map_err(|e| Failure {
        code: EXIT_PARSE,
        message: format!("{}: {e}", path.display()),
    })?;
    serde_json::from_str(&text).map_err(|e| Failure {
        code: EXIT_PARSE,
        message: format!("{}: {e}", path.display()),
    })
}

fn write_file(dir: &Path, name: &str, contents: &[u8]) -> Result<PathBuf, Failure> {
    fs::create_dir_all(dir).map_err(|e| io_failure(dir, e))?;
    let path = dir.join(name);
    fs::write(&path, contents).map_err(|e| io_failure(&path, e))?;
    Ok(path)
}

fn relax_options(tol: Option<f64>) -> Result<RelaxOptions, Failure> {
    let mut opts = RelaxOptions::default();
    if let Some(t) = tol {
        opts.solver.path_tol = t;
    }
    opts.solver.validate()?;
    Ok(opts)
}

fn run_all(
    spec: &IntersectionSpec,
    methods: &[Method],
    criterion: SizeCriterion,
    opts: &RelaxOptions,
) -> Result<Vec<MethodResult>, Failure> {
    methods
        .iter()
        .map(|&m| {
            run_method(m, spec, criterion, opts).map_err(|e| {
                let mut f = Failure::from(e);
                f.message = format!("{m}: {}", f.message);
                f
            })
        })
        .collect()
}

fn cmd_fuse(a: FuseArgs) -> Result<(), Failure> {
    let spec: IntersectionSpec = read_json(&a.input)?;
    let opts = relax_options(a.tol)?;
    let results = run_all(&spec, &a.method.0, a.criterion, &opts)?;
    let mut json = serde_json::to_string_pretty(&results).expect("results serialize");
    json.push('\n');
    match a.out {
        Some(dir) => {
            let path = write_file(&dir, "fuse.json", json.as_bytes())?;
            eprintln!("wrote {}", path.display());
        }
        None => io::stdout()
            .write_all(json.as_bytes())
            .map_err(|e| io_failure(Path::new("<stdout>"), e))?,
    }
    Ok(())
}

fn cmd_static_demo(a: StaticArgs) -> Result<(), Failure> {
    let opts = relax_options(a.tol)?;
    let draws = static_draws(a.seed, a.runs as usize);
    let rows = static_table(&draws, &TABLE_METHODS, a.criterion, &opts)?;

    let mut table = String::from("method,mean_objective\n");
    let mut timing = String::from("method,wall_seconds\n");
    for r in &rows {
        table.push_str(&format!("{},{}\n", r.method, sig15(r.mean_objective)));
        timing.push_str(&format!("{},{:.6}\n", r.method, r.wall_time.as_secs_f64()));
        println!("{:<10} {:.4}  ({:.3} s)", r.method.tag(), r.mean_objective, r.wall_time.as_secs_f64());
    }
    write_file(&a.out, "static_table.csv", table.as_bytes())?;
    write_file(&a.out, "static_timing.csv", timing.as_bytes())?;

    let spec = static_scenario(draws[0]);
    let fused = run_method(Method::DecoupledSdp, &spec, a.criterion, &opts)?;
    let mut items: Vec<_> = spec
        .ellipsoids()
        .iter()
        .enumerate()
        .map(|(i, e)| (e, format!("sensor {}", i + 1)))
        .collect();
    items.push((&fused.ellipsoid, "decoupled".to_string()));
    let labelled: Vec<_> = items.iter().map(|(e, l)| (*e, l.as_str())).collect();
    let title = format!("static scenario, third center at {:.4}", draws[0]);
    write_file(&a.out, "static_demo.svg", svg::ellipses(&title, &labelled)?.as_bytes())?;
    Ok(())
}

fn cmd_track(a: TrackArgs) -> Result<(), Failure> {
    let mut sc: TrackScenario = match &a.input {
        Some(p) => read_json(p)?,
        None => TrackScenario::default(),
    };
    if let Some(s) = a.seed {
        sc.seed = s;
    }
    if let Some(r) = a.runs {
        sc.runs = r as usize;
    }
    if let Some(s) = a.steps {
        sc.steps = s as usize;
    }
    if let Some(m) = a.method {
        sc.update_method = m;
    }
    if let Some(c) = a.criterion {
        sc.criterion = c;
    }
    let opts = relax_options(a.tol)?;
    let report = simulate(&sc, &opts)?;

    let mut csv = Vec::new();
    write_metrics_csv(&report, &mut csv).map_err(|e| io_failure(&a.out, e))?;
    write_file(&a.out, "track_metrics.csv", &csv)?;

    let s = report.steps.first().map_or(0, |m| m.rmse_sensor.len());
    let column = |f: &dyn Fn(&ellbound::sim::StepMetrics) -> f64| -> Vec<f64> { report.steps.iter().map(f).collect() };
    let mut rmse: Vec<(String, Vec<f64>)> = (0..s)
        .map(|i| (format!("sensor {}", i + 1), column(&|m| m.rmse_sensor[i])))
        .collect();
    rmse.push(("fused decoupled".into(), column(&|m| m.rmse_fused_dec)));
    rmse.push(("fused ci".into(), column(&|m| m.rmse_fused_ci)));
    rmse.push(("sensor 1 baseline".into(), column(&|m| m.rmse_sensor1_baseline)));
    let mut vol: Vec<(String, Vec<f64>)> = (0..s)
        .map(|i| (format!("sensor {}", i + 1), column(&|m| m.vol_sensor[i])))
        .collect();
    vol.push(("fused decoupled".into(), column(&|m| m.vol_fused_dec)));
    vol.push(("fused ci".into(), column(&|m| m.vol_fused_ci)));
    vol.push(("sensor 1 baseline".into(), column(&|m| m.vol_sensor1_baseline)));
    write_file(&a.out, "track_rmse.svg", svg::line_chart("RMSE per step", "rmse", &borrowed(&rmse)).as_bytes())?;
    write_file(&a.out, "track_volume.svg", svg::line_chart("mean log det per step", "log det", &borrowed(&vol)).as_bytes())?;

    let v = &report.violations;
    println!(
        "runs {} steps {}: containment violations {}, update order violations {}, fusion order violations {}, fallbacks {}",
        sc.runs, sc.steps, v.containment, v.update_order, v.fusion_order, v.fallbacks
    );
    Ok(())
}

fn borrowed(v: &[(String, Vec<f64>)]) -> Vec<(&str, Vec<f64>)> {
    v.iter().map(|(l, d)| (l.as_str(), d.clone())).collect()
}

fn cmd_verify(a: VerifyArgs) -> Result<bool, Failure> {
    let mut cfg = VerifyConfig {
        seed: a.seed,
        instances: a.instances as usize,
        samples: a.samples as usize,
        ..VerifyConfig::default()
    };
    for t in &a.tol {
        cfg.tolerances.apply_override(t)?;
    }
    if a.inject_fault {
        cfg.fault = Some(Fault::ShiftDecoupledCenter(0.5));
    }
    let report = run_suite(&cfg, &RelaxOptions::default())?;
    print!("{}", report.table());
    Ok(report.all_passed())
}

fn cmd_plot(a: PlotArgs) -> Result<(), Failure> {
    let spec: IntersectionSpec = read_json(&a.input)?;
    let results = match &a.method {
        Some(ms) => run_all(&spec, &ms.0, a.criterion, &RelaxOptions::default())?,
        None => Vec::new(),
    };
    let mut items: Vec<_> = spec
        .ellipsoids()
        .iter()
        .enumerate()
        .map(|(i, e)| (e, format!("member {}", i + 1)))
        .collect();
    items.extend(results.iter().map(|r| (&r.ellipsoid, r.method.tag().to_string())));
    let labelled: Vec<_> = items.iter().map(|(e, l)| (*e, l.as_str())).collect();
    let title = a.input.file_name().map_or_else(String::new, |n| n.to_string_lossy().into_owned());
    let path = write_file(&a.out, "plot.svg", svg::ellipses(&title, &labelled)?.as_bytes())?;
    eprintln!("wrote {}", path.display());
    Ok(())
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    let cli = Cli::parse();
    let outcome = match cli.command {
        Command::Fuse(a) => cmd_fuse(a).map(|_| true),
        Command::StaticDemo(a) => cmd_static_demo(a).map(|_| true),
        Command::Track(a) => cmd_track(a).map(|_| true),
        Command::Verify(a) => cmd_verify(a),
        Command::Plot(a) => cmd_plot(a).map(|_| true),
    };
    match outcome {
        Ok(true) => ExitCode::SUCCESS,
        Ok(false) => ExitCode::from(EXIT_VERIFY),
        Err(f) => {
            eprintln!("error: {}", f.message);
            ExitCode::from(f.code)
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn error_codes() {
        assert_eq!(Failure::from(Error::EmptyIntersection).code, EXIT_INFEASIBLE);
        assert_eq!(Failure::from(Error::Infeasible("x".into())).code, EXIT_INFEASIBLE);
        assert_eq!(Failure::from(Error::NotPositiveDefinite).code, EXIT_PARSE);
        assert_eq!(Failure::from(Error::OptimizerFailed("x".into())).code, EXIT_SOLVER);
        assert_eq!(Failure::from(Error::SingularCombination).code, EXIT_SOLVER);
    }

    #[test]
    fn method_lists() {
        assert_eq!(parse_methods("all").unwrap().0.len(), 8);
        assert_eq!(parse_methods("sdp,ci").unwrap().0, vec![Method::FullSdp, Method::CovarianceIntersection]);
        assert!(parse_methods("sdp,x").is_err());
    }

    #[test]
    fn cli_definition_is_consistent() {
        use clap::CommandFactory;
        Cli::command().debug_assert();
    }
}
