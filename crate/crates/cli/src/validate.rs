//! Oracle comparisons run by `cutlocus validate`.
//!
//! Every check records a measured value, the tolerance it is held to and the
//! direction of the comparison, so the output table can be read without the
//! source. Random inputs come from fixed seeds.

use std::f64::consts::{FRAC_PI_2, PI, SQRT_2, TAU};

use cutlocus::chart::ChartPoint;
use cutlocus::cut::{
    self, circle_cut_check, compute_cut_locus, defining_equality, detect_separating_points, distance_to_cross,
    global_estimates, point_source_exclusion, CutLocusSample, CutOptions, CutSearch,
};
use cutlocus::eikonal::{error_scale, point_distance, solve_distance, sup_norm_diff, DistanceField, Grid};
use cutlocus::experiment::{run_experiment, ExperimentSpec};
use cutlocus::geodesic::{
    exp_map, geodesic_flow, integrate_geodesic, step_for_grid, unit_direction, unit_directions, GeodesicState,
    DEFAULT_SPEED_TOL, DEFAULT_STEP,
};
use cutlocus::hausdorff::{
    directed_hausdorff, directed_hausdorff_by, hausdorff_distance, hausdorff_points, sequence_convergence_check,
    CompactSample,
};
use cutlocus::metric::{
    c0_envelope, christoffel, cr_distance, curve_length, eval_metric, make_family, metric_norm, Perturbation, Sym2,
    TensorField, TrigPoly,
};
use cutlocus::oracle::LatticeOracle;
use cutlocus::{MetricField, Result, TangentVector};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::Serialize;

pub const MODULES: [&str; 7] = ["metric", "geodesic", "eikonal", "cut", "hausdorff", "oracle", "experiment"];

/// Canonical module name for a `--only` argument.
pub fn module_name(s: &str) -> Option<&'static str> {
    Some(match s.trim() {
        "metric" | "manifold_metric" => "metric",
        "geodesic" | "geodesics" => "geodesic",
        "eikonal" => "eikonal",
        "cut" | "cut_locus" => "cut",
        "hausdorff" => "hausdorff",
        "oracle" | "oracles" => "oracle",
        "experiment" | "experiments" => "experiment",
        _ => return None,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub enum Op {
    #[serde(rename = "<=")]
    Le,
    #[serde(rename = ">=")]
    Ge,
}

#[derive(Debug, Clone, Serialize)]
pub struct Check {
    pub module: &'static str,
    pub name: String,
    pub value: Option<f64>,
    pub op: Op,
    pub tolerance: f64,
    pub pass: bool,
    pub detail: String,
}

impl Check {
    fn new(module: &'static str, name: impl Into<String>, value: f64, op: Op, tolerance: f64, detail: impl Into<String>) -> Self {
        let pass = value.is_finite()
            && match op {
                Op::Le => value <= tolerance,
                Op::Ge => value >= tolerance,
            };
        Check {
            module,
            name: name.into(),
            value: value.is_finite().then_some(value),
            op,
            tolerance,
            pass,
            detail: detail.into(),
        }
    }

    fn failed(module: &'static str, err: impl std::fmt::Display) -> Self {
        Check {
            module,
            name: format!("{module}.run"),
            value: None,
            op: Op::Le,
            tolerance: 0.0,
            pass: false,
            detail: format!("error: {err}"),
        }
    }
}

pub const CSV_HEADER: &str = "module,check,value,op,tolerance,pass,detail";

pub fn to_csv(checks: &[Check]) -> String {
    let mut out = format!("{CSV_HEADER}\n");
    for c in checks {
        let op = match c.op {
            Op::Le => "<=",
            Op::Ge => ">=",
        };
        let value = c.value.map(|v| v.to_string()).unwrap_or_default();
        let detail = c.detail.replace('"', "'");
        out.push_str(&format!(
            "{},{},{value},{op},{},{},\"{detail}\"\n",
            c.module, c.name, c.tolerance, c.pass
        ));
    }
    out
}

#[derive(Debug, Clone)]
pub struct Config {
    pub grid: usize,
    pub directions: usize,
    pub tol_cut: Option<f64>,
    pub tau_sep: f64,
}

impl Config {
    fn h(&self) -> f64 {
        TAU / self.grid as f64
    }

    fn opts(&self) -> CutOptions {
        CutOptions {
            tol_cut: self.tol_cut,
            ..CutOptions::default()
        }
    }

    fn tol_for(&self, field: &MetricField) -> f64 {
        self.tol_cut.unwrap_or_else(|| cut::default_tol_cut(field, self.h()))
    }
}

/// The three constant metrics of the oracle comparisons.
fn constants() -> [(&'static str, Sym2); 3] {
    [
        ("identity", Sym2::IDENTITY),
        ("diag_1_4", Sym2::diag(1.0, 4.0)),
        ("shear_0.4", Sym2::new(1.0, 0.4, 1.0)),
    ]
}

fn oracle(g: Sym2) -> Result<LatticeOracle> {
    LatticeOracle::new(g)
}

/// Runs the checks of the selected modules (all when `only` is empty), in module order.
pub fn run(cfg: &Config, only: &[&'static str]) -> Vec<Check> {
    let mut out = Vec::new();
    for m in MODULES {
        if !only.is_empty() && !only.contains(&m) {
            continue;
        }
        let r = match m {
            "metric" => metric_checks(),
            "geodesic" => geodesic_checks(cfg),
            "eikonal" => eikonal_checks(cfg),
            "cut" => cut_checks(cfg),
            "hausdorff" => hausdorff_checks(cfg),
            "oracle" => oracle_checks(),
            _ => experiment_checks(cfg),
        };
        match r {
            Ok(c) => out.extend(c),
            Err(e) => out.push(Check::failed(m, e)),
        }
    }
    out
}

fn metric_checks() -> Result<Vec<Check>> {
    const M: &str = "metric";
    let mut out = Vec::new();
    let conf = MetricField::conformal(0.1, 1, 0);
    let x = ChartPoint::new(FRAC_PI_2, 0.3);
    let jet = eval_metric(&conf, x, 2)?;
    let e = 1e-3;
    let f = |du: f64| conf.tensor_at(x.u() + du, x.v()).a11;
    let d1 = (-f(2.0 * e) + 8.0 * f(e) - 8.0 * f(-e) + f(-2.0 * e)) / (12.0 * e);
    let d2 = (-f(2.0 * e) + 16.0 * f(e) - 30.0 * f(0.0) + 16.0 * f(-e) - f(-2.0 * e)) / (12.0 * e * e);
    out.push(Check::new(M, "metric.conformal_du", (jet.du.a11 - d1).abs(), Op::Le, 1e-8, "∂u g11 against 4th-order differences"));
    out.push(Check::new(M, "metric.conformal_duu", (jet.duu.a11 - d2).abs(), Op::Le, 1e-6, "∂uu g11 against 4th-order differences"));
    out.push(Check::new(M, "metric.conformal_du_closed_form", (jet.du.a11 + 0.2).abs(), Op::Le, 1e-12, "∂u g11 = −0.2 at u = π/2"));

    let shear = MetricField::constant(1.0, 0.3, 1.0);
    let n = metric_norm(&shear, &TangentVector::new(x, 1.0, 1.0))?;
    out.push(Check::new(M, "metric.norm_quadratic_form", (n - 2.6f64.sqrt()).abs(), Op::Le, 1e-15, "|(1,1)| under [[1,.3],[.3,1]] = sqrt(2.6)"));

    // circle of radius 1 about (π, π); the Riemannian speed is e^{φ}
    let m = 20000;
    let path: Vec<ChartPoint> = (0..=m)
        .map(|k| {
            let s = TAU * k as f64 / m as f64;
            ChartPoint::new(PI + s.cos(), PI + s.sin())
        })
        .collect();
    let len = curve_length(&conf, &path)?;
    let q = 4000;
    let exact: f64 = (0..q)
        .map(|k| {
            let s = TAU * k as f64 / q as f64;
            (0.1 * (PI + s.cos()).cos()).exp()
        })
        .sum::<f64>()
        * TAU
        / q as f64;
    out.push(Check::new(M, "metric.curve_length_circle", (len - exact).abs(), Op::Le, 1e-6, "conformal circle length against periodic quadrature"));

    let gam = christoffel(&conf, x)?;
    out.push(Check::new(M, "metric.christoffel_conformal", (gam.gamma[0][0][0] + 0.1).abs(), Op::Le, 1e-12, "Γ¹₁₁ = ∂uφ = −0.1"));
    out.push(Check::new(M, "metric.christoffel_constant", christoffel(&shear, x)?.max_abs(), Op::Le, 0.0, "constant metric is flat"));

    let flat = MetricField::flat();
    let t = 0.3;
    let dir = TensorField::Trig {
        a11: TrigPoly::sine(1.0, 1, 0),
        a12: TrigPoly::zero(),
        a22: TrigPoly::zero(),
    };
    let pert = Perturbation::Additive(dir).member(&flat, t)?;
    out.push(Check::new(M, "metric.cr_distance_sine", (cr_distance(&flat, &pert, 2, 256) - t).abs(), Op::Le, 1e-12, "I vs I + t·diag(sin u, 0), r = 2"));
    let sh = MetricField::constant(1.0, t, 1.0);
    out.push(Check::new(M, "metric.c0_envelope_shear", (c0_envelope(&flat, &sh, 16, 64) - t).abs(), Op::Le, 1e-12, "extremal at w = (1, ±1)/√2"));

    let off = Perturbation::Additive(TensorField::Constant(Sym2::new(0.0, 1.0, 0.0)));
    let ok = make_family(&flat, off.clone(), &[0.9], 32).is_ok();
    let rejected = make_family(&flat, off, &[1.0], 32).is_err();
    out.push(Check::new(M, "metric.family_determinant", if ok && rejected { 0.0 } else { 1.0 }, Op::Le, 0.0, "t = 0.9 accepted, t = 1.0 rejected"));
    Ok(out)
}

fn geodesic_checks(cfg: &Config) -> Result<Vec<Check>> {
    const M: &str = "geodesic";
    let mut out = Vec::new();
    let conf = MetricField::conformal(0.2, 1, 0);
    let p = ChartPoint::new(0.3, 0.2);
    let v = unit_direction(&conf, p, 0.7)?;
    let s0 = GeodesicState::from_tangent(&v);
    let ends: Vec<[f64; 2]> = [0.2, 0.1, 0.05]
        .iter()
        .map(|&dt| geodesic_flow(&conf, &s0, 3.0, dt).map(|s| s.position))
        .collect::<Result<_>>()?;
    let diff = |a: [f64; 2], b: [f64; 2]| (a[0] - b[0]).hypot(a[1] - b[1]);
    let order = (diff(ends[0], ends[1]) / diff(ends[1], ends[2])).log2();
    out.push(Check::new(M, "geodesic.rk4_order", order, Op::Ge, 3.9, "step-halving order on a conformal metric"));

    let a = geodesic_flow(&conf, &geodesic_flow(&conf, &s0, 0.7, DEFAULT_STEP)?, 1.3, DEFAULT_STEP)?;
    let b = geodesic_flow(&conf, &s0, 2.0, DEFAULT_STEP)?;
    out.push(Check::new(M, "geodesic.flow_composition", diff(a.position, b.position), Op::Le, 1e-8, "flow(1.3)∘flow(0.7) vs flow(2)"));

    let aniso = MetricField::constant(2.0, -0.9, 1.0);
    let g = Sym2::new(2.0, -0.9, 1.0);
    let worst = unit_directions(&aniso, p, 64)?
        .iter()
        .map(|w| (g.quad(w.components()) - 1.0).abs())
        .fold(0.0, f64::max);
    out.push(Check::new(M, "geodesic.unit_directions", worst, Op::Le, 1e-12, "quadratic form of each direction"));

    let mut rng = ChaCha8Rng::seed_from_u64(11);
    let mut drift: f64 = 0.0;
    let mut back: f64 = 0.0;
    for field in [MetricField::conformal(0.2, 1, 0), MetricField::conformal(0.1, 1, 1)] {
        for _ in 0..50 {
            let q = ChartPoint::new(rng.gen_range(0.0..TAU), rng.gen_range(0.0..TAU));
            let w = unit_direction(&field, q, rng.gen_range(0.0..TAU))?;
            let t = rng.gen_range(0.5..6.0);
            let path = integrate_geodesic(&field, &w, t, DEFAULT_STEP, f64::INFINITY)?;
            drift = drift.max((path.end().speed(&field) - 1.0).abs());
            let ret = geodesic_flow(&field, &path.end().reversed(), t, DEFAULT_STEP)?;
            back = back.max(ret.point().flat_distance(&q));
        }
    }
    out.push(Check::new(M, "geodesic.speed_conservation", drift, Op::Le, DEFAULT_SPEED_TOL, "100 random geodesics on conformal metrics"));
    out.push(Check::new(M, "geodesic.reversibility", back, Op::Le, 1e-7, "integrate forward, then back from the reversed end"));

    // exp_p(ρ v) reproduces the cut-locus sample points
    let shear = MetricField::constant(1.0, 0.4, 1.0);
    let n = cfg.grid.min(128);
    let (_, sample) = compute_cut_locus(&shear, ChartPoint::origin(), 64, Grid::new(n)?, &cfg.opts())?;
    let step = step_for_grid(TAU / n as f64);
    let mut worst: f64 = 0.0;
    for e in &sample.entries {
        let w = unit_direction(&shear, sample.source, e.theta)?;
        worst = worst.max(exp_map(&shear, &w.scaled(e.rho), step / e.rho)?.flat_distance(&e.point()));
    }
    out.push(Check::new(M, "geodesic.exp_matches_cut_locus", worst, Op::Le, 1e-9, "exp_p(ρ_k v_k) against the sample"));
    Ok(out)
}

fn oracle_error(df: &DistanceField, o: &LatticeOracle) -> f64 {
    let g = df.grid();
    let mut worst: f64 = 0.0;
    for i in 0..g.n() {
        for j in 0..g.n() {
            let d = df.source.delta_to(&g.node(i, j));
            worst = worst.max((df.at(i, j) - o.displacement_distance(d)).abs());
        }
    }
    worst
}

fn eikonal_checks(cfg: &Config) -> Result<Vec<Check>> {
    const M: &str = "eikonal";
    let mut out = Vec::new();
    let n = cfg.grid;
    let p = ChartPoint::origin();
    for (name, g) in constants() {
        let field = MetricField::Constant(g);
        let o = oracle(g)?;
        let errs: Vec<f64> = [n / 2, n, 2 * n]
            .iter()
            .map(|&m| Ok(oracle_error(&solve_distance(&field, p, Grid::new(m)?)?, &o)))
            .collect::<Result<_>>()?;
        out.push(Check::new(
            M,
            format!("eikonal.oracle_error.{name}"),
            errs[1],
            Op::Le,
            error_scale(&field, TAU / n as f64),
            format!("sup error at N = {n} against C·h·sqrt(λmax)"),
        ));
        let order = (errs[0] / errs[1]).log2().min((errs[1] / errs[2]).log2());
        out.push(Check::new(
            M,
            format!("eikonal.order.{name}"),
            order,
            Op::Ge,
            0.9,
            format!("errors {:.3e}, {:.3e}, {:.3e} at N = {}, {n}, {}", errs[0], errs[1], errs[2], n / 2, 2 * n),
        ));
    }
    let flat = MetricField::flat();
    let grid = Grid::new(n)?;
    let h = grid.h();
    let df = solve_distance(&flat, p, grid)?;
    let ch = error_scale(&flat, h);
    out.push(Check::new(M, "eikonal.source_value", df.at(0, 0), Op::Le, h, "value at the source node"));
    out.push(Check::new(M, "eikonal.half_period", (point_distance(&df, ChartPoint::new(PI, 0.0)) - PI).abs(), Op::Le, ch, "flat d(p, p + (π, 0)) = π"));
    let t = 0.2;
    let scaled = MetricField::constant((1.0 + t) * (1.0 + t), 0.0, (1.0 + t) * (1.0 + t));
    let ds = solve_distance(&scaled, p, grid)?;
    out.push(Check::new(
        M,
        "eikonal.scaled_envelope",
        sup_norm_diff(&df, &ds)?,
        Op::Le,
        t * PI * SQRT_2 + 2.0 * ch,
        "flat vs (1+t)²·I, t = 0.2",
    ));
    let coarse = solve_distance(&flat, p, Grid::new(n / 2)?)?;
    out.push(Check::new(
        M,
        "eikonal.refinement",
        cutlocus::eikonal::interpolated_diff(&coarse, &df),
        Op::Le,
        error_scale(&flat, 2.0 * h) + ch,
        "N/2 vs N at shared nodes",
    ));

    // symmetry on a conformal metric
    let conf = MetricField::conformal(0.2, 1, 0);
    let mut rng = ChaCha8Rng::seed_from_u64(5);
    let gn = Grid::new(n.min(128))?;
    let mut asym: f64 = 0.0;
    for _ in 0..3 {
        let a = ChartPoint::new(rng.gen_range(0.0..TAU), rng.gen_range(0.0..TAU));
        let b = ChartPoint::new(rng.gen_range(0.0..TAU), rng.gen_range(0.0..TAU));
        let (da, db) = (solve_distance(&conf, a, gn)?, solve_distance(&conf, b, gn)?);
        asym = asym.max((point_distance(&da, b) - point_distance(&db, a)).abs());
    }
    out.push(Check::new(
        M,
        "eikonal.symmetry_conformal",
        asym,
        Op::Le,
        2.0 * error_scale(&conf, gn.h()),
        format!("three random pairs at N = {}", gn.n()),
    ));

    // residual away from the source and the cross
    let mask: Vec<bool> = (0..n * n)
        .map(|idx| {
            let q = grid.node(idx / n, idx % n);
            df.values[idx] > 0.5 && distance_to_cross(q, PI, PI) > 3.0 * h
        })
        .collect();
    out.push(Check::new(
        M,
        "eikonal.residual_smooth",
        cutlocus::eikonal::eikonal_residual(&df, &flat, &mask),
        Op::Le,
        ch,
        "masked central-difference residual",
    ));
    Ok(out)
}

struct Computed {
    name: &'static str,
    g: Sym2,
    field: MetricField,
    oracle: LatticeOracle,
    df: DistanceField,
    sample: CutLocusSample,
}

fn cut_checks(cfg: &Config) -> Result<Vec<Check>> {
    const M: &str = "cut";
    let mut out = Vec::new();
    let grid = Grid::new(cfg.grid)?;
    let h = grid.h();
    let p = ChartPoint::origin();
    let opts = cfg.opts();
    let mut computed = Vec::new();
    for (name, g) in constants() {
        let field = MetricField::Constant(g);
        let (df, sample) = compute_cut_locus(&field, p, cfg.directions, grid, &opts)?;
        computed.push(Computed {
            name,
            g,
            oracle: oracle(g)?,
            field,
            df,
            sample,
        });
    }
    for c in &computed {
        let mut worst: f64 = 0.0;
        for e in &c.sample.entries {
            worst = worst.max((e.rho - c.oracle.cut_time_at_angle(e.theta)?).abs());
        }
        out.push(Check::new(M, format!("cut.oracle_error.{}", c.name), worst, Op::Le, 5e-3, format!("{} entries", c.sample.entries.len())));
        let poly = c.oracle.cut_locus(p, 0.5 * h);
        out.push(Check::new(
            M,
            format!("cut.hausdorff.{}", c.name),
            hausdorff_points(&c.sample.points(), &poly)?,
            Op::Le,
            2.0 * h,
            "d_H to the oracle polygon sampled at h/2",
        ));
        let tol = cfg.tol_for(&c.field);
        let (eq, past) = defining_equality(&c.field, &c.df, &c.sample, tol)?;
        out.push(Check::new(M, format!("cut.defining_equality.{}", c.name), eq, Op::Le, tol, "|u(γ(ρ)) − ρ| against tol_cut"));
        out.push(Check::new(M, format!("cut.fails_past_cut.{}", c.name), past as f64, Op::Le, 0.0, "entries still minimizing at ρ + 5 tol_cut"));
        let (inj, diam) = (c.oracle.injectivity_radius(), c.oracle.diameter());
        let outside = c
            .sample
            .entries
            .iter()
            .map(|e| (inj - tol - e.rho).max(e.rho - diam - tol))
            .fold(f64::NEG_INFINITY, f64::max);
        out.push(Check::new(M, format!("cut.inj_le_rho_le_diam.{}", c.name), outside, Op::Le, 0.0, "largest excursion outside [Inj − tol, Diam + tol]"));
    }

    let flat = &computed[0];
    let search = CutSearch::new(&flat.field, &flat.df, &opts)?;
    out.push(Check::new(M, "cut.flat_axis", (search.cut_time_at(0.0)?.rho - PI).abs(), Op::Le, 5e-3, "v = (1, 0) gives π"));
    out.push(Check::new(M, "cut.flat_diagonal", (search.cut_time_at(PI / 4.0)?.rho - PI * SQRT_2).abs(), Op::Le, 5e-3, "v = (1, 1)/√2 gives π√2"));
    let two = MetricField::constant(2.0, 0.0, 2.0);
    let d2 = solve_distance(&two, p, grid)?;
    let s2 = CutSearch::new(&two, &d2, &opts)?;
    out.push(Check::new(M, "cut.scaling", (s2.cut_time_at(0.3)?.rho - SQRT_2 * search.cut_time_at(0.3)?.rho).abs(), Op::Le, 5e-3, "ρ for 2·I is √2 times the flat value"));

    // Sep on the flat torus
    let exclude = point_source_exclusion(&flat.df, &flat.field);
    let sep = detect_separating_points(&flat.df, &flat.field, cfg.tau_sep, &exclude);
    let n = grid.n();
    let on_cross: Vec<(usize, usize)> = (0..n)
        .flat_map(|i| (0..n).map(move |j| (i, j)))
        .filter(|&(i, j)| distance_to_cross(grid.node(i, j), PI, PI) < 1e-12)
        .collect();
    let flagged: std::collections::HashSet<[usize; 2]> = sep.nodes.iter().copied().collect();
    let hit = on_cross.iter().filter(|(i, j)| flagged.contains(&[*i, *j])).count();
    out.push(Check::new(M, "cut.sep_coverage", hit as f64 / on_cross.len() as f64, Op::Ge, 0.9, format!("{hit} of {} cross nodes flagged", on_cross.len())));
    let far = sep.points().iter().map(|q| distance_to_cross(*q, PI, PI)).fold(0.0, f64::max);
    out.push(Check::new(M, "cut.sep_near_cross", far, Op::Le, 2.0 * h, format!("{} flagged nodes", sep.len())));
    let sep_sample = CompactSample::new("sep", sep.points())?;
    let cut_sample = CompactSample::new("cut", flat.sample.points())?;
    out.push(Check::new(M, "cut.cut_to_sep", directed_hausdorff(&cut_sample, &sep_sample)?, Op::Le, 3.0 * h, "directed d_H from the sample to Sep"));
    let inner = sep.nodes.iter().filter(|[i, j]| flat.df.at(*i, *j) < PI / 2.0).count();
    out.push(Check::new(M, "cut.sep_smooth_ball", inner as f64, Op::Le, 0.0, "flags with u < Inj/2"));
    let shear = &computed[2];
    let ex = point_source_exclusion(&shear.df, &shear.field);
    let ssep = detect_separating_points(&shear.df, &shear.field, cfg.tau_sep, &ex);
    let poly = shear.oracle.cut_locus(p, 0.25 * h);
    out.push(Check::new(
        M,
        "cut.sep_near_polygon.shear_0.4",
        directed_hausdorff_by(&ssep.points(), &poly, ChartPoint::flat_distance)?,
        Op::Le,
        2.0 * h,
        format!("{} flagged nodes against the oracle polygon", ssep.len()),
    ));

    // circle S(p, δ)
    let mut circle = Vec::new();
    for delta in [0.5, 1.0, 2.0] {
        circle.push(circle_cut_check(&flat.field, p, delta, PI, grid, cfg.directions, cfg.tau_sep, &opts)?.d_h);
    }
    out.push(Check::new(M, "cut.circle_delta_1", circle[1], Op::Le, 3.0 * h, "d_H(Sep of d(S,·), {p} ∪ Cut(p))"));
    let spread = circle.iter().copied().fold(f64::NEG_INFINITY, f64::max) - circle.iter().copied().fold(f64::INFINITY, f64::min);
    out.push(Check::new(M, "cut.circle_delta_independence", spread, Op::Le, 3.0 * h, format!("d_H for δ = 0.5, 1, 2: {circle:?}")));
    out.push(Check::new(
        M,
        "cut.circle_guard",
        if circle_cut_check(&flat.field, p, PI, PI, grid, 16, cfg.tau_sep, &opts).is_err() { 0.0 } else { 1.0 },
        Op::Le,
        0.0,
        "δ ≥ Inj rejected",
    ));

    // Inj and Diam
    for (name, field) in [
        ("identity", MetricField::flat()),
        ("rectangular_a2", MetricField::constant(1.0, 0.0, 4.0)),
        ("scaled_2", MetricField::constant(2.0, 0.0, 2.0)),
    ] {
        let o = oracle(field.as_constant().expect("constant"))?;
        let est = global_estimates(&field, 4, 64, grid, &opts)?;
        out.push(Check::new(M, format!("cut.injectivity.{name}"), (est.inj - o.injectivity_radius()).abs(), Op::Le, 5e-3, format!("Inj = {:.6}", est.inj)));
        out.push(Check::new(M, format!("cut.diameter.{name}"), (est.diam - o.diameter()).abs(), Op::Le, 5e-3, format!("Diam = {:.6}", est.diam)));
    }

    // cut-locus images are invariant under constant scaling
    for c in [&computed[0], &computed[2]] {
        for s in [0.5, 2.0] {
            let scaled = MetricField::Constant(c.g.scale(s));
            let (_, ss) = compute_cut_locus(&scaled, p, cfg.directions, grid, &opts)?;
            out.push(Check::new(
                M,
                format!("cut.scaling_invariance.{}.c{s}", c.name),
                hausdorff_points(&ss.points(), &c.sample.points())?,
                Op::Le,
                2.0 * h,
                "d_H(Cut(p, g), Cut(p, c·g))",
            ));
        }
    }
    Ok(out)
}

fn random_cloud(rng: &mut ChaCha8Rng, max: usize) -> Vec<ChartPoint> {
    let n = rng.gen_range(1..=max);
    (0..n)
        .map(|_| ChartPoint::new(rng.gen_range(0.0..TAU), rng.gen_range(0.0..TAU)))
        .collect()
}

fn hausdorff_checks(cfg: &Config) -> Result<Vec<Check>> {
    const M: &str = "hausdorff";
    let mut out = Vec::new();
    let mut rng = ChaCha8Rng::seed_from_u64(7);
    let mut asym: f64 = 0.0;
    let mut triangle: f64 = 0.0;
    let mut brute: f64 = 0.0;
    for _ in 0..1000 {
        let a = random_cloud(&mut rng, 20);
        let b = random_cloud(&mut rng, 20);
        let c = random_cloud(&mut rng, 20);
        let (ab, ba) = (hausdorff_points(&a, &b)?, hausdorff_points(&b, &a)?);
        asym = asym.max((ab - ba).abs());
        let (ac, bc) = (hausdorff_points(&a, &c)?, hausdorff_points(&b, &c)?);
        triangle = triangle.max(ac - (ab + bc));
        let sup_inf = |x: &[ChartPoint], y: &[ChartPoint]| {
            x.iter()
                .map(|p| y.iter().map(|q| p.flat_distance(q)).fold(f64::INFINITY, f64::min))
                .fold(0.0, f64::max)
        };
        brute = brute.max((ab - sup_inf(&a, &b).max(sup_inf(&b, &a))).abs());
    }
    out.push(Check::new(M, "hausdorff.symmetry", asym, Op::Le, 0.0, "1000 random triples"));
    out.push(Check::new(M, "hausdorff.triangle", triangle, Op::Le, 1e-12, "largest d(a,c) − d(a,b) − d(b,c), rounding slack 1e-12"));
    out.push(Check::new(M, "hausdorff.brute_force", brute, Op::Le, 0.0, "against a plain double loop"));

    let h = TAU / cfg.grid as f64;
    let cross = |spacing: f64| -> Vec<ChartPoint> {
        let m = (TAU / spacing).ceil() as usize;
        (0..m)
            .flat_map(|k| {
                let s = TAU * k as f64 / m as f64;
                [ChartPoint::new(PI, s), ChartPoint::new(s, PI)]
            })
            .collect()
    };
    out.push(Check::new(M, "hausdorff.dense_cross", hausdorff_points(&cross(h), &cross(0.5 * h))?, Op::Le, 0.5 * h + 1e-12, "cross at h vs h/2, h/2 plus rounding slack"));

    let singles = hausdorff_distance(
        &CompactSample::new("a", vec![ChartPoint::origin()])?,
        &CompactSample::new("b", vec![ChartPoint::new(1.0, 0.0)])?,
    )?;
    out.push(Check::new(M, "hausdorff.singletons", (singles - 1.0).abs(), Op::Le, 0.0, "{(0,0)} vs {(1,0)}"));

    // the finite form of the convergence characterization on random families
    let mut violations = 0;
    for _ in 0..100 {
        let x = random_cloud(&mut rng, 15);
        let len = rng.gen_range(3..8);
        let scale = rng.gen_range(0.01..1.0);
        let xs: Vec<CompactSample> = (0..len)
            .map(|j| {
                let s = scale / (j + 1) as f64;
                let mut pts: Vec<ChartPoint> = x
                    .iter()
                    .map(|p| p.offset(rng.gen_range(-s..s), rng.gen_range(-s..s)))
                    .collect();
                if rng.gen_bool(0.2) {
                    pts.push(ChartPoint::new(rng.gen_range(0.0..TAU), rng.gen_range(0.0..TAU)));
                }
                CompactSample::new(format!("x{j}"), pts)
            })
            .collect::<Result<_>>()?;
        let xs_limit = CompactSample::new("x", x)?;
        let eps = rng.gen_range(0.001..0.5);
        let at = sequence_convergence_check(&xs, &xs_limit, eps, None)?;
        let top = at.tail().iter().copied().fold(0.0, f64::max);
        if at.converged() && top > 2.0 * eps {
            violations += 1;
        }
        if top <= eps && !sequence_convergence_check(&xs, &xs_limit, 2.0 * eps, None)?.converged() {
            violations += 1;
        }
    }
    out.push(Check::new(M, "hausdorff.sequence_equivalence", violations as f64, Op::Le, 0.0, "100 randomized families"));
    Ok(out)
}

fn oracle_checks() -> Result<Vec<Check>> {
    const M: &str = "oracle";
    let mut out = Vec::new();
    let flat = oracle(Sym2::IDENTITY)?;
    let p = ChartPoint::origin();
    out.push(Check::new(M, "oracle.half_period", (flat.distance(p, ChartPoint::new(PI, 0.0))? - PI).abs(), Op::Le, 1e-15, "G = I, q − p = (π, 0)"));
    out.push(Check::new(M, "oracle.corner", (flat.distance(p, ChartPoint::new(PI, PI))? - PI * SQRT_2).abs(), Op::Le, 1e-15, "G = I, q − p = (π, π)"));
    out.push(Check::new(M, "oracle.cut_axis", (flat.cut_time([1.0, 0.0])? - PI).abs(), Op::Le, 1e-15, "v = (1, 0)"));
    out.push(Check::new(M, "oracle.cut_diagonal", (flat.cut_time([SQRT_2 / 2.0, SQRT_2 / 2.0])? - PI * SQRT_2).abs(), Op::Le, 1e-12, "v = (1, 1)/√2"));

    let g = Sym2::new(1.0, 0.5, 1.0);
    let (r2, r3) = (LatticeOracle::with_radius(g, 2)?, LatticeOracle::with_radius(g, 3)?);
    let mut rng = ChaCha8Rng::seed_from_u64(3);
    let mut gap: f64 = 0.0;
    for _ in 0..200 {
        let a = ChartPoint::new(rng.gen_range(0.0..TAU), rng.gen_range(0.0..TAU));
        let b = ChartPoint::new(rng.gen_range(0.0..TAU), rng.gen_range(0.0..TAU));
        gap = gap.max((r2.distance(a, b)? - r3.distance(a, b)?).abs());
    }
    out.push(Check::new(M, "oracle.radius_stability", gap, Op::Le, 0.0, "R = 2 equals R = 3 on 200 pairs"));

    let mut worst: f64 = 0.0;
    for _ in 0..1000 {
        let (a, c) = (rng.gen_range(0.5..3.0), rng.gen_range(0.5..3.0));
        let b = rng.gen_range(-0.9..0.9) * f64::sqrt(a * c);
        let o = oracle(Sym2::new(a, b, c))?;
        let th: f64 = rng.gen_range(0.0..TAU);
        let v = [th.cos(), th.sin()];
        let n = o.metric().quad(v).sqrt();
        let v = [v[0] / n, v[1] / n];
        let minimizing = |t: f64| t - o.displacement_distance([t * v[0], t * v[1]]) <= 1e-12;
        let (mut lo, mut hi) = (0.0, o.diameter() + 1.0);
        while hi - lo > 1e-11 {
            let mid = 0.5 * (lo + hi);
            if minimizing(mid) {
                lo = mid
            } else {
                hi = mid
            }
        }
        worst = worst.max((lo - o.cut_time(v)?).abs());
    }
    out.push(Check::new(M, "oracle.bisection_cross_check", worst, Op::Le, 1e-9, "1000 random (G, v)"));

    for (name, g) in constants() {
        let o = oracle(g)?;
        let cell = o.voronoi_cell();
        let fewest = cell.iter().map(|x| o.nearest_count(*x, 1e-9)).min().unwrap_or(0);
        out.push(Check::new(M, format!("oracle.cell_vertices.{name}"), fewest as f64, Op::Ge, 3.0, format!("{} vertices", cell.len())));
    }
    Ok(out)
}

fn experiment_checks(cfg: &Config) -> Result<Vec<Check>> {
    const M: &str = "experiment";
    let mut out = Vec::new();
    let n = cfg.grid.min(128);
    let h = TAU / n as f64;
    let tol = cfg.tol_cut.map(|t| format!(", \"tol_cut\": {t}")).unwrap_or_default();
    let zero = ExperimentSpec::from_json_str(&format!(
        r#"{{"name": "zero", "base": "constant:[1,0.4,1]",
            "perturbation": {{"kind": "additive", "direction": "zero"}},
            "schedule": [0.4, 0.2, 0.1], "grid": {n}, "directions": 128,
            "sweeps": ["stability", "cut_time", "viscosity"], "svg": false {tol}}}"#
    ))?;
    let r = run_experiment(&zero)?.report;
    let worst = r.rows.iter().filter_map(|x| x.d_h).fold(0.0, f64::max);
    out.push(Check::new(M, "experiment.zero_perturbation", worst, Op::Le, 2.0 * h, "d_H reproducibility floor"));
    out.push(Check::new(M, "experiment.zero_verdicts", if r.passed() { 0.0 } else { 1.0 }, Op::Le, 0.0, "all verdicts PASS"));
    let shear = ExperimentSpec::from_json_str(&format!(
        r#"{{"name": "shear", "base": "flat",
            "perturbation": {{"kind": "additive", "direction": "constant:[0,1,0]"}},
            "schedule": {{"start": 0.4, "ratio": 0.5, "count": 4}}, "grid": {n}, "directions": 128,
            "sweeps": ["stability", "cut_time"], "svg": false {tol}}}"#
    ))?;
    let r = run_experiment(&shear)?.report;
    let gap = r
        .rows
        .iter()
        .filter_map(|x| Some((x.d_h? - x.d_h_reference?).abs()))
        .fold(0.0, f64::max);
    out.push(Check::new(M, "experiment.shear_oracle_match", gap, Op::Le, 3.0 * h, "|d_H − d_H(oracle polygons)|"));
    let ct = r.rows.iter().filter_map(|x| x.cut_time_error).fold(0.0, f64::max);
    out.push(Check::new(M, "experiment.shear_cut_time", ct, Op::Le, 2.0 * r.base.tol_cut, "v = (1, 0) cut time along the family"));
    Ok(out)
}
