use std::ffi::OsString;
use std::fs;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Parser, Subcommand, ValueEnum};
use cutlocus::chart::ChartPoint;
use cutlocus::cut::{compute_cut_locus, defining_equality, detect_separating_points, point_source_exclusion, CutOptions};
use cutlocus::eikonal::{solve_distance, Grid, MIN_GRID};
use cutlocus::experiment::{emit_report, run_experiment, ExperimentSpec};
use cutlocus::hausdorff::hausdorff_points;
use cutlocus::metric::parse_metric;
use cutlocus::oracle::LatticeOracle;
use cutlocus::svg::Overlay;
use cutlocus::MetricField;

mod validate;

/// Cut loci, distance fields and stability sweeps on flat-chart tori.
#[derive(Debug, Parser)]
#[command(name = "cutlocus", version)]
struct Cli {
    /// Worker threads (results do not depend on it).
    #[arg(long, global = true, env = "CUTLOCUS_THREADS")]
    threads: Option<usize>,

    /// Print more per-step detail.
    #[arg(short, long, global = true, action = clap::ArgAction::Count)]
    verbose: u8,

    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, clap::Args)]
struct Problem {
    /// Metric: flat, constant:[g11,g12,g22], conformal:{amp,ku,kv} or grid:<csv>.
    #[arg(long)]
    metric: String,

    /// Node count of a grid: metric file.
    #[arg(long)]
    metric_grid: Option<usize>,

    /// Source point as u,v.
    #[arg(long, default_value = "0,0", value_parser = parse_point)]
    source: [f64; 2],

    /// Nodes per axis.
    #[arg(long, default_value_t = 256)]
    grid: usize,

    /// Output directory.
    #[arg(long, default_value = "out")]
    out: PathBuf,
}

#[derive(Debug, Clone, Copy, ValueEnum)]
enum Format {
    Csv,
    Json,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Cut locus of one point: JSON sample and SVG overlay.
    CutLocus {
        #[command(flatten)]
        problem: Problem,
        /// Directions K.
        #[arg(long, default_value_t = 256)]
        directions: usize,
        /// Cut detection tolerance (default max(3Ch, 1e-3)).
        #[arg(long)]
        tol_cut: Option<f64>,
        #[arg(long, default_value_t = 0.2)]
        tau_sep: f64,
    },
    /// Distance field from one point.
    Distance {
        #[command(flatten)]
        problem: Problem,
        #[arg(long, value_enum, default_value = "csv")]
        format: Format,
    },
    /// Run the sweeps of an experiment spec file.
    Sweep {
        spec: PathBuf,
        #[arg(long, default_value = "out")]
        out: PathBuf,
    },
    /// Oracle comparisons; exit 0 iff all pass.
    Validate {
        /// Restrict to modules (metric, geodesic, eikonal, cut, hausdorff, oracle, experiment).
        #[arg(long, value_delimiter = ',')]
        only: Vec<String>,
        #[arg(long)]
        tol_cut: Option<f64>,
        #[arg(long, default_value_t = 256)]
        grid: usize,
        #[arg(long, default_value_t = 256)]
        directions: usize,
        #[arg(long, default_value_t = 0.2)]
        tau_sep: f64,
        #[arg(long, default_value = "out")]
        out: PathBuf,
    },
    /// Compare a constant metric's computed cut locus with the lattice oracle.
    OracleCompare {
        #[command(flatten)]
        problem: Problem,
        #[arg(long, default_value_t = 256)]
        directions: usize,
        #[arg(long)]
        tol_cut: Option<f64>,
    },
}

enum Failure {
    Usage(String),
    Compute(String),
}

impl From<cutlocus::Error> for Failure {
    fn from(e: cutlocus::Error) -> Self {
        match e {
            cutlocus::Error::Parse { .. }
            | cutlocus::Error::InvalidArgument(_)
            | cutlocus::Error::FamilyRejected { .. }
            | cutlocus::Error::DegenerateMetric { .. } => {
                Failure::Usage(e.to_string())
            }
            other => Failure::Compute(other.to_string()),
        }
    }
}

type Outcome = Result<bool, Failure>;

fn parse_point(s: &str) -> Result<[f64; 2], String> {
    let parts: Vec<&str> = s.split(',').map(str::trim).collect();
    if parts.len() != 2 {
        return Err(format!("expected u,v, found '{s}'"));
    }
    let num = |x: &str| x.parse::<f64>().map_err(|e| format!("'{x}': {e}"));
    let p = [num(parts[0])?, num(parts[1])?];
    if !(p[0].is_finite() && p[1].is_finite()) {
        return Err("coordinates must be finite".into());
    }
    Ok(p)
}

fn check_grid(n: usize) -> Result<Grid, Failure> {
    if n < MIN_GRID {
        return Err(Failure::Usage(format!("--grid must be at least {MIN_GRID}, got {n}")));
    }
    Grid::new(n).map_err(Failure::from)
}

fn check_positive(name: &str, x: Option<f64>) -> Result<(), Failure> {
    match x {
        Some(v) if !(v > 0.0 && v.is_finite()) => Err(Failure::Usage(format!("{name} must be positive, got {v}"))),
        _ => Ok(()),
    }
}

fn check_tau(tau: f64) -> Result<(), Failure> {
    if !(tau > 0.0 && tau < 1.0) {
        return Err(Failure::Usage(format!("--tau-sep must lie in (0, 1), got {tau}")));
    }
    Ok(())
}

fn check_directions(k: usize) -> Result<(), Failure> {
    if k < 4 {
        return Err(Failure::Usage(format!("--directions must be at least 4, got {k}")));
    }
    Ok(())
}

fn write(path: &Path, text: &str) -> Result<(), Failure> {
    if let Some(dir) = path.parent() {
        fs::create_dir_all(dir).map_err(|e| Failure::Compute(format!("cannot create {}: {e}", dir.display())))?;
    }
    fs::write(path, text).map_err(|e| Failure::Compute(format!("cannot write {}: {e}", path.display())))
}

fn field_of(p: &Problem) -> Result<MetricField, Failure> {
    Ok(parse_metric(&p.metric, p.metric_grid)?)
}

fn cmd_cut_locus(p: &Problem, k: usize, tol_cut: Option<f64>, tau: f64, verbose: u8) -> Outcome {
    let grid = check_grid(p.grid)?;
    check_directions(k)?;
    check_positive("--tol-cut", tol_cut)?;
    check_tau(tau)?;
    let field = field_of(p)?;
    let src = ChartPoint::new(p.source[0], p.source[1]);
    let opts = CutOptions {
        tol_cut,
        ..CutOptions::default()
    };
    let (df, sample) = compute_cut_locus(&field, src, k, grid, &opts)?;
    write(&p.out.join("cut_locus.json"), &sample.to_json()?)?;
    let exclude = point_source_exclusion(&df, &field);
    let sep = detect_separating_points(&df, &field, tau, &exclude);
    let mut overlay = Overlay {
        title: format!("cut locus of ({}, {}) under {field}", src.u(), src.v()),
        sample: sample.points(),
        sep: sep.points(),
        source: Some(src),
        ..Overlay::default()
    };
    if let Some(g) = field.as_constant() {
        overlay.polygons.push(LatticeOracle::new(g)?.cut_locus_polygon(src));
    }
    write(&p.out.join("cut_locus.svg"), &overlay.render())?;
    println!(
        "{} entries (K = {k}, N = {}), refined {:.1}%, tol_cut {:.4e}, {} Sep nodes; wrote {}",
        sample.entries.len(),
        p.grid,
        100.0 * sample.refined_fraction(),
        sample.tol_cut,
        sep.len(),
        p.out.display()
    );
    if verbose > 0 {
        let (worst, past) = defining_equality(&field, &df, &sample, sample.tol_cut)?;
        println!("defining equality: worst {worst:.4e}, {past} entries still minimizing past the cut");
    }
    Ok(true)
}

fn cmd_distance(p: &Problem, format: Format) -> Outcome {
    let grid = check_grid(p.grid)?;
    let field = field_of(p)?;
    let df = solve_distance(&field, ChartPoint::new(p.source[0], p.source[1]), grid)?;
    let (name, text) = match format {
        Format::Csv => ("distance.csv", df.to_csv()),
        Format::Json => ("distance.json", df.to_json()?),
    };
    write(&p.out.join(name), &text)?;
    println!(
        "solved N = {} in {} sweeps, max value {:.6}; wrote {}",
        p.grid,
        df.iterations,
        df.max_value(),
        p.out.join(name).display()
    );
    Ok(true)
}

fn cmd_sweep(spec_path: &Path, out: &Path, verbose: u8) -> Outcome {
    let text = fs::read_to_string(spec_path)
        .map_err(|e| Failure::Usage(format!("cannot read spec {}: {e}", spec_path.display())))?;
    let spec = ExperimentSpec::from_json_str(&text).map_err(|e| Failure::Usage(format!("malformed spec: {e}")))?;
    let dir = out.join(spec.output.clone().unwrap_or_else(|| spec.name.clone()));
    let exp = run_experiment(&spec)?;
    emit_report(&exp, &dir, spec.svg)?;
    if verbose > 0 {
        print!("{}", exp.report.to_csv());
    }
    for v in &exp.report.verdicts {
        println!("{} {}: {}", if v.pass { "PASS" } else { "FAIL" }, v.name, v.detail);
    }
    if let Some(e) = &exp.report.error {
        println!("aborted: {e}");
    }
    println!("wrote {}", dir.display());
    Ok(exp.report.passed())
}

#[allow(clippy::too_many_arguments)]
fn cmd_validate(only: &[String], tol_cut: Option<f64>, grid: usize, k: usize, tau: f64, out: &Path, verbose: u8) -> Outcome {
    check_grid(grid)?;
    check_directions(k)?;
    check_positive("--tol-cut", tol_cut)?;
    check_tau(tau)?;
    let mut modules = Vec::new();
    for m in only {
        match validate::module_name(m) {
            Some(name) => modules.push(name),
            None => {
                return Err(Failure::Usage(format!(
                    "unknown module '{m}' (expected one of {})",
                    validate::MODULES.join(", ")
                )))
            }
        }
    }
    let cfg = validate::Config {
        grid,
        directions: k,
        tol_cut,
        tau_sep: tau,
    };
    let checks = validate::run(&cfg, &modules);
    for c in &checks {
        let value = c.value.map(|v| format!("{v:.4e}")).unwrap_or_else(|| "-".into());
        let op = match c.op {
            validate::Op::Le => "<=",
            validate::Op::Ge => ">=",
        };
        if verbose > 0 || !c.pass {
            println!(
                "{:4} {:44} {value:>11} {op} {:<11.4e} {}",
                if c.pass { "ok" } else { "FAIL" },
                c.name,
                c.tolerance,
                c.detail
            );
        } else {
            println!("{:4} {:44} {value:>11} {op} {:<11.4e}", "ok", c.name, c.tolerance);
        }
    }
    write(&out.join("validate.csv"), &validate::to_csv(&checks))?;
    let json = serde_json::to_string_pretty(&checks).map_err(|e| Failure::Compute(e.to_string()))?;
    write(&out.join("validate.json"), &json)?;
    let failed: Vec<&str> = checks.iter().filter(|c| !c.pass).map(|c| c.name.as_str()).collect();
    if failed.is_empty() {
        println!("all {} checks passed", checks.len());
    } else {
        println!("{} of {} checks failed: {}", failed.len(), checks.len(), failed.join(", "));
    }
    Ok(failed.is_empty())
}

fn cmd_oracle_compare(p: &Problem, k: usize, tol_cut: Option<f64>) -> Outcome {
    let grid = check_grid(p.grid)?;
    check_directions(k)?;
    check_positive("--tol-cut", tol_cut)?;
    let field = field_of(p)?;
    let g = field
        .as_constant()
        .ok_or_else(|| Failure::Usage(format!("oracle-compare needs a constant metric, got {field}")))?;
    let oracle = LatticeOracle::new(g)?;
    let src = ChartPoint::new(p.source[0], p.source[1]);
    let opts = CutOptions {
        tol_cut,
        ..CutOptions::default()
    };
    let (df, sample) = compute_cut_locus(&field, src, k, grid, &opts)?;
    let mut max_err: f64 = 0.0;
    for e in &sample.entries {
        max_err = max_err.max((e.rho - oracle.cut_time_at_angle(e.theta)?).abs());
    }
    let h = grid.h();
    let poly = oracle.cut_locus(src, 0.5 * h);
    let d_h = hausdorff_points(&sample.points(), &poly)?;
    let (defeq, past) = defining_equality(&field, &df, &sample, sample.tol_cut)?;
    let pass = max_err <= 5e-3 && d_h <= 2.0 * h && defeq <= sample.tol_cut && past == 0;
    let report = serde_json::json!({
        "metric": field.to_string(),
        "source": [src.u(), src.v()],
        "grid": p.grid,
        "K": k,
        "entries": sample.entries.len(),
        "tol_cut": sample.tol_cut,
        "max_cut_time_error": max_err,
        "cut_time_tolerance": 5e-3,
        "hausdorff": d_h,
        "hausdorff_tolerance": 2.0 * h,
        "defining_equality": defeq,
        "still_minimizing_past_cut": past,
        "injectivity_radius": oracle.injectivity_radius(),
        "diameter": oracle.diameter(),
        "pass": pass,
    });
    write(
        &p.out.join("oracle_compare.json"),
        &serde_json::to_string_pretty(&report).map_err(|e| Failure::Compute(e.to_string()))?,
    )?;
    let overlay = Overlay {
        title: format!("computed cut locus vs oracle polygon, {field}"),
        sample: sample.points(),
        polygons: vec![oracle.cut_locus_polygon(src)],
        source: Some(src),
        ..Overlay::default()
    };
    write(&p.out.join("oracle_compare.svg"), &overlay.render())?;
    println!(
        "{} max |ρ − ρ_oracle| = {max_err:.3e} (<= 5e-3), d_H = {d_h:.4e} (<= 2h = {:.4e}), defining equality {defeq:.3e} (<= {:.3e})",
        if pass { "PASS" } else { "FAIL" },
        2.0 * h,
        sample.tol_cut
    );
    Ok(pass)
}

/// Parses `args` (program name first), runs the command and returns the exit code.
fn run<I, T>(args: I) -> u8
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(c) => c,
        Err(e) => {
            let _ = e.print();
            return e.exit_code() as u8;
        }
    };
    if let Some(n) = cli.threads {
        if n == 0 {
            eprintln!("error: --threads must be positive");
            return 2;
        }
        if let Err(e) = rayon::ThreadPoolBuilder::new().num_threads(n).build_global() {
            eprintln!("error: cannot configure {n} threads: {e}");
            return 2;
        }
    }
    let v = cli.verbose;
    let outcome = match &cli.command {
        Command::CutLocus {
            problem,
            directions,
            tol_cut,
            tau_sep,
        } => cmd_cut_locus(problem, *directions, *tol_cut, *tau_sep, v),
        Command::Distance { problem, format } => cmd_distance(problem, *format),
        Command::Sweep { spec, out } => cmd_sweep(spec, out, v),
        Command::Validate {
            only,
            tol_cut,
            grid,
            directions,
            tau_sep,
            out,
        } => cmd_validate(only, *tol_cut, *grid, *directions, *tau_sep, out, v),
        Command::OracleCompare {
            problem,
            directions,
            tol_cut,
        } => cmd_oracle_compare(problem, *directions, *tol_cut),
    };
    match outcome {
        Ok(true) => 0,
        Ok(false) => 1,
        Err(Failure::Usage(m)) => {
            eprintln!("error: {m}");
            eprintln!("run 'cutlocus --help' for usage");
            2
        }
        Err(Failure::Compute(m)) => {
            eprintln!("error: {m}");
            1
        }
    }
}

fn main() -> ExitCode {
    ExitCode::from(run(std::env::args_os()))
}
