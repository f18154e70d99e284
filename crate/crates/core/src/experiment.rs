//! Stability sweeps over perturbation families `(p_i, g_i) → (p, g)`.
//!
//! A sweep builds the family from an [`ExperimentSpec`], computes cut loci,
//! cut times, `Inj`/`Diam` and distance fields for every member, and compares
//! them with the base. Constant metrics are checked against the lattice
//! oracle; other metrics against the same computation at `2N` nodes and `2K`
//! directions.

use std::f64::consts::TAU;
use std::fmt::Write as _;
use std::fs;
use std::path::{Path, PathBuf};

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::chart::{ChartPoint, TangentVector};
use crate::cut::{
    self, compute_cut_locus, detect_separating_points, global_estimates, point_source_exclusion, CutLocusSample,
    CutOptions, CutSearch, DEFAULT_TAU_SEP,
};
use crate::eikonal::{error_scale, solve_distance, sup_norm_diff, DistanceField, Grid};
use crate::error::{Error, Result};
use crate::geodesic::normalize;
use crate::hausdorff::hausdorff_points;
use crate::metric::{
    c0_envelope, cr_distance, make_family, parse_metric, parse_tensor, MetricField, Perturbation, TrigPoly,
    CR_DISTANCE_GRID,
};
use crate::oracle::LatticeOracle;
use crate::svg::Overlay;

const FAMILY_CHECK_GRID: usize = 128;
const ENVELOPE_GRID: usize = 64;
const ENVELOPE_DIRECTIONS: usize = 64;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SweepKind {
    Stability,
    CutTime,
    InjDiam,
    Viscosity,
}

impl SweepKind {
    pub const ALL: [SweepKind; 4] = [SweepKind::Stability, SweepKind::CutTime, SweepKind::InjDiam, SweepKind::Viscosity];
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum PerturbationSpec {
    /// `g_t = base + t·direction`, direction given by a tensor catalog name.
    Additive { direction: String },
    /// `g_t = e^{2t·amp·cos(ku·u + kv·v)}·base`.
    Conformal {
        amp: f64,
        #[serde(default = "one")]
        ku: i32,
        #[serde(default)]
        kv: i32,
    },
}

fn one() -> i32 {
    1
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum ScheduleSpec {
    List(Vec<f64>),
    /// `t_i = start · ratio^i` for `i = 0..count`.
    Geometric { start: f64, ratio: f64, count: usize },
}

impl ScheduleSpec {
    pub fn values(&self) -> Vec<f64> {
        match self {
            ScheduleSpec::List(v) => v.clone(),
            ScheduleSpec::Geometric { start, ratio, count } => {
                (0..*count).map(|i| start * ratio.powi(i as i32)).collect()
            }
        }
    }
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum PointSequence {
    /// `p_i = p`.
    #[default]
    Fixed,
    /// `p_i = p + offset/(i+1)`, wrapped.
    Offset([f64; 2]),
    /// Explicit points, one per schedule entry.
    List(Vec<[f64; 2]>),
}

impl PointSequence {
    pub fn points(&self, p: ChartPoint, count: usize) -> Result<Vec<ChartPoint>> {
        match self {
            PointSequence::Fixed => Ok(vec![p; count]),
            PointSequence::Offset([a, b]) => Ok((0..count)
                .map(|i| {
                    let s = 1.0 / (i + 1) as f64;
                    p.offset(a * s, b * s)
                })
                .collect()),
            PointSequence::List(xs) => {
                if xs.len() != count {
                    return Err(Error::InvalidArgument(format!(
                        "point list has {} entries but the schedule has {count}",
                        xs.len()
                    )));
                }
                Ok(xs.iter().map(|x| ChartPoint::new(x[0], x[1])).collect())
            }
        }
    }
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ReferenceKind {
    /// Oracle when both base and member are constant, refined grid otherwise.
    #[default]
    Auto,
    Oracle,
    Refined,
    None,
}

fn default_grid() -> usize {
    256
}
fn default_directions() -> usize {
    256
}
fn default_tau() -> f64 {
    DEFAULT_TAU_SEP
}
fn default_sweeps() -> Vec<SweepKind> {
    SweepKind::ALL.to_vec()
}
fn default_cut_directions() -> Vec<[f64; 2]> {
    vec![[1.0, 0.0]]
}
fn default_sources() -> usize {
    4
}
fn default_inj_directions() -> usize {
    64
}
fn yes() -> bool {
    true
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentSpec {
    pub name: String,
    /// Catalog name of the base metric.
    pub base: String,
    /// Declared node count for `grid:` metrics.
    #[serde(default)]
    pub metric_grid: Option<usize>,
    pub perturbation: PerturbationSpec,
    pub schedule: ScheduleSpec,
    #[serde(default)]
    pub source: [f64; 2],
    #[serde(default)]
    pub points: PointSequence,
    #[serde(default = "default_grid")]
    pub grid: usize,
    #[serde(default = "default_directions")]
    pub directions: usize,
    #[serde(default)]
    pub tol_cut: Option<f64>,
    #[serde(default = "default_tau")]
    pub tau_sep: f64,
    #[serde(default = "default_sweeps")]
    pub sweeps: Vec<SweepKind>,
    /// Chart directions for the cut-time sweep; each is `g_i`-normalized at `p_i`.
    #[serde(default = "default_cut_directions")]
    pub cut_directions: Vec<[f64; 2]>,
    /// `M` for the `M × M` source grid of `Inj`/`Diam`.
    #[serde(default = "default_sources")]
    pub inj_sources: usize,
    #[serde(default = "default_inj_directions")]
    pub inj_directions: usize,
    #[serde(default)]
    pub reference: ReferenceKind,
    /// First row of the tail on which verdicts are evaluated.
    #[serde(default)]
    pub tail_start: usize,
    #[serde(default = "yes")]
    pub svg: bool,
    /// Output subdirectory, relative to the output directory.
    #[serde(default)]
    pub output: Option<String>,
}

impl ExperimentSpec {
    pub fn from_json_str(text: &str) -> Result<Self> {
        let spec: ExperimentSpec = serde_json::from_str(text)?;
        spec.validate()?;
        Ok(spec)
    }

    pub fn from_path(path: &Path) -> Result<Self> {
        let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Self::from_json_str(&text)
    }

    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string_pretty(self)?)
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |m: String| Err(Error::InvalidArgument(m));
        if self.grid < crate::eikonal::MIN_GRID {
            return bad(format!("grid must be at least {}, got {}", crate::eikonal::MIN_GRID, self.grid));
        }
        if self.directions < 4 || self.inj_directions < 4 {
            return bad("need at least 4 directions".into());
        }
        if self.inj_sources < 1 {
            return bad("inj_sources must be positive".into());
        }
        if !(self.tau_sep > 0.0 && self.tau_sep < 1.0) {
            return bad(format!("tau_sep must lie in (0, 1), got {}", self.tau_sep));
        }
        if let Some(t) = self.tol_cut {
            if !(t > 0.0) {
                return bad(format!("tol_cut must be positive, got {t}"));
            }
        }
        let s = self.schedule.values();
        for w in s.windows(2) {
            if !(w[1] < w[0]) {
                return bad("schedule must be strictly decreasing".into());
            }
        }
        if s.iter().any(|&t| !(t > 0.0)) {
            return bad("schedule entries must be positive".into());
        }
        if self.cut_directions.iter().any(|d| !(d[0].hypot(d[1]) > 0.0)) {
            return bad("cut directions must be nonzero".into());
        }
        Ok(())
    }

    pub fn h(&self) -> f64 {
        TAU / self.grid as f64
    }

    fn perturbation(&self) -> Result<Perturbation> {
        Ok(match &self.perturbation {
            PerturbationSpec::Additive { direction } => Perturbation::Additive(parse_tensor(direction)?),
            PerturbationSpec::Conformal { amp, ku, kv } => Perturbation::Conformal(TrigPoly::cosine(*amp, *ku, *kv)),
        })
    }

    fn runs(&self, k: SweepKind) -> bool {
        self.sweeps.contains(&k)
    }
}

/// One schedule step. Columns of sweeps that were not run are `None`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ReportRow {
    pub index: usize,
    pub t: f64,
    pub p_u: f64,
    pub p_v: f64,
    pub c2_distance: f64,
    pub c0_envelope: f64,
    pub d_h: Option<f64>,
    /// The same distance between reference cut loci (oracle polygons or refined grid).
    pub d_h_reference: Option<f64>,
    /// Max over the cut directions of `|ρ_i(v_i) − ρ(v)|`.
    pub cut_time_error: Option<f64>,
    pub cut_time_reference: Option<f64>,
    pub cut_times: Option<Vec<f64>>,
    pub inj: Option<f64>,
    pub diam: Option<f64>,
    pub inj_diff: Option<f64>,
    pub diam_diff: Option<f64>,
    pub inj_reference: Option<f64>,
    pub diam_reference: Option<f64>,
    pub sup_u_diff: Option<f64>,
    pub viscosity_bound: Option<f64>,
    pub tol_cut: f64,
}

pub const CSV_HEADER: &str = "index,t,p_u,p_v,c2_distance,c0_envelope,d_h,d_h_reference,cut_time_error,cut_time_reference,inj,diam,inj_diff,diam_diff,inj_reference,diam_reference,sup_u_diff,viscosity_bound,tol_cut";

fn opt(x: Option<f64>) -> String {
    x.map(|v| v.to_string()).unwrap_or_default()
}

impl ReportRow {
    fn csv(&self) -> String {
        [
            self.index.to_string(),
            self.t.to_string(),
            self.p_u.to_string(),
            self.p_v.to_string(),
            self.c2_distance.to_string(),
            self.c0_envelope.to_string(),
            opt(self.d_h),
            opt(self.d_h_reference),
            opt(self.cut_time_error),
            opt(self.cut_time_reference),
            opt(self.inj),
            opt(self.diam),
            opt(self.inj_diff),
            opt(self.diam_diff),
            opt(self.inj_reference),
            opt(self.diam_reference),
            opt(self.sup_u_diff),
            opt(self.viscosity_bound),
            self.tol_cut.to_string(),
        ]
        .join(",")
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Verdict {
    pub name: String,
    pub pass: bool,
    pub detail: String,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct BaseSummary {
    pub metric: String,
    pub tol_cut: f64,
    pub cut_times: Option<Vec<f64>>,
    pub inj: Option<f64>,
    pub diam: Option<f64>,
    pub diam_grid: Option<f64>,
    pub inj_reference: Option<f64>,
    pub diam_reference: Option<f64>,
}

/// Cut-locus point sets the `d_H` column was computed from.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct ReportSamples {
    pub base: Vec<ChartPoint>,
    pub members: Vec<Vec<ChartPoint>>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ConvergenceReport {
    pub name: String,
    pub grid: usize,
    pub directions: usize,
    pub h: f64,
    pub tau_sep: f64,
    pub sweeps: Vec<SweepKind>,
    pub reference: Option<String>,
    pub base: BaseSummary,
    pub rows: Vec<ReportRow>,
    pub verdicts: Vec<Verdict>,
    /// First failing step, when the sweep aborted.
    pub error: Option<String>,
    pub samples: Option<ReportSamples>,
}

impl ConvergenceReport {
    pub fn passed(&self) -> bool {
        self.error.is_none() && self.verdicts.iter().all(|v| v.pass)
    }

    pub fn to_csv(&self) -> String {
        let mut out = String::from(CSV_HEADER);
        out.push('\n');
        for r in &self.rows {
            out.push_str(&r.csv());
            out.push('\n');
        }
        out
    }

    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string_pretty(self)?)
    }

    pub fn from_json_str(text: &str) -> Result<Self> {
        Ok(serde_json::from_str(text)?)
    }

    pub fn column(&self, f: impl Fn(&ReportRow) -> Option<f64>) -> Vec<Option<f64>> {
        self.rows.iter().map(f).collect()
    }
}

/// A finished sweep: the report and one overlay per step.
#[derive(Debug, Clone)]
pub struct Experiment {
    pub report: ConvergenceReport,
    pub overlays: Vec<Overlay>,
}

fn cut_opts(spec: &ExperimentSpec) -> CutOptions {
    CutOptions {
        tol_cut: spec.tol_cut,
        ..CutOptions::default()
    }
}

fn tol_for(spec: &ExperimentSpec, field: &MetricField, h: f64) -> f64 {
    spec.tol_cut.unwrap_or_else(|| cut::default_tol_cut(field, h))
}

fn oracle_of(field: &MetricField) -> Option<LatticeOracle> {
    field.as_constant().and_then(|g| LatticeOracle::new(g).ok())
}

/// Reference cut locus: the oracle polygon sampled at `h/2`, or the refined-grid sample.
fn reference_locus(
    field: &MetricField,
    p: ChartPoint,
    kind: ReferenceKind,
    spec: &ExperimentSpec,
) -> Result<Option<(Vec<ChartPoint>, &'static str)>> {
    let h = spec.h();
    let oracle = oracle_of(field);
    let use_oracle = match kind {
        ReferenceKind::None => return Ok(None),
        ReferenceKind::Oracle => true,
        ReferenceKind::Refined => false,
        ReferenceKind::Auto => oracle.is_some(),
    };
    if use_oracle {
        let o = oracle.ok_or_else(|| Error::InvalidArgument(format!("no oracle for metric {field}")))?;
        return Ok(Some((o.cut_locus(p, 0.5 * h), "oracle")));
    }
    let (_, s) = compute_cut_locus(field, p, 2 * spec.directions, Grid::new(2 * spec.grid)?, &cut_opts(spec))?;
    Ok(Some((s.points(), "refined")))
}

fn chart_direction(field: &MetricField, p: ChartPoint, d: [f64; 2]) -> Result<TangentVector> {
    normalize(field, &TangentVector::new(p, d[0], d[1]))
}

fn oracle_cut_time(o: &LatticeOracle, v: &TangentVector) -> Result<f64> {
    o.cut_time(v.components())
}

struct Base {
    field: MetricField,
    p: ChartPoint,
    df: DistanceField,
    sample: Option<CutLocusSample>,
    reference: Option<Vec<ChartPoint>>,
    cut_times: Option<Vec<f64>>,
    oracle_cut_times: Option<Vec<f64>>,
    global: Option<cut::GlobalEstimates>,
    tol_cut: f64,
}

struct Step {
    row: ReportRow,
    sample: Option<Vec<ChartPoint>>,
    overlay: Overlay,
}

fn prepare_base(spec: &ExperimentSpec, field: &MetricField, p: ChartPoint, grid: Grid) -> Result<Base> {
    let h = grid.h();
    let opts = cut_opts(spec);
    let df = solve_distance(field, p, grid)?;
    let sample = if spec.runs(SweepKind::Stability) {
        Some(cut::cut_locus(field, &df, spec.directions, &opts)?)
    } else {
        None
    };
    let reference = if spec.runs(SweepKind::Stability) {
        reference_locus(field, p, spec.reference, spec)?.map(|r| r.0)
    } else {
        None
    };
    let (cut_times, oracle_cut_times) = if spec.runs(SweepKind::CutTime) {
        let search = CutSearch::new(field, &df, &opts)?;
        let oracle = oracle_of(field);
        let mut rho = Vec::new();
        let mut orc = Vec::new();
        for d in &spec.cut_directions {
            let v = chart_direction(field, p, *d)?;
            rho.push(search.cut_time(&v)?.rho);
            if let Some(o) = &oracle {
                orc.push(oracle_cut_time(o, &v)?);
            }
        }
        (Some(rho), oracle.map(|_| orc))
    } else {
        (None, None)
    };
    let global = if spec.runs(SweepKind::InjDiam) {
        Some(global_estimates(field, spec.inj_sources, spec.inj_directions, grid, &opts)?)
    } else {
        None
    };
    Ok(Base {
        field: field.clone(),
        p,
        df,
        sample,
        reference,
        cut_times,
        oracle_cut_times,
        global,
        tol_cut: tol_for(spec, field, h),
    })
}

fn run_step(spec: &ExperimentSpec, base: &Base, index: usize, t: f64, field: &MetricField, p: ChartPoint, grid: Grid) -> Result<Step> {
    let h = grid.h();
    let opts = cut_opts(spec);
    let tol_cut = tol_for(spec, field, h).max(base.tol_cut);
    let mut row = ReportRow {
        index,
        t,
        p_u: p.u(),
        p_v: p.v(),
        c2_distance: cr_distance(field, &base.field, 2, CR_DISTANCE_GRID),
        c0_envelope: c0_envelope(&base.field, field, ENVELOPE_GRID, ENVELOPE_DIRECTIONS),
        d_h: None,
        d_h_reference: None,
        cut_time_error: None,
        cut_time_reference: None,
        cut_times: None,
        inj: None,
        diam: None,
        inj_diff: None,
        diam_diff: None,
        inj_reference: None,
        diam_reference: None,
        sup_u_diff: None,
        viscosity_bound: None,
        tol_cut,
    };
    let df = solve_distance(field, p, grid)?;
    let oracle = oracle_of(field);
    let mut overlay = Overlay {
        title: format!("{} step {index}: t = {t}, metric {field}", spec.name),
        source: Some(p),
        ..Overlay::default()
    };
    if let Some(o) = &oracle {
        overlay.polygons.push(o.cut_locus_polygon(p));
    }
    let mut sample_points = None;

    if let (Some(base_sample), true) = (&base.sample, spec.runs(SweepKind::Stability)) {
        let sample = cut::cut_locus(field, &df, spec.directions, &opts)?;
        let pts = sample.points();
        row.d_h = Some(hausdorff_points(&pts, &base_sample.points())?);
        if let Some(base_ref) = &base.reference {
            if let Some((r, _)) = reference_locus(field, p, spec.reference, spec)? {
                row.d_h_reference = Some(hausdorff_points(&r, base_ref)?);
            }
        }
        overlay.sample = pts.clone();
        sample_points = Some(pts);
    }

    if let (Some(base_rho), true) = (&base.cut_times, spec.runs(SweepKind::CutTime)) {
        let search = CutSearch::new(field, &df, &opts)?;
        let mut rho = Vec::new();
        let mut worst: f64 = 0.0;
        let mut worst_ref: Option<f64> = base.oracle_cut_times.as_ref().and(oracle.as_ref()).map(|_| 0.0);
        for (k, d) in spec.cut_directions.iter().enumerate() {
            let v = chart_direction(field, p, *d)?;
            let r = search.cut_time(&v)?.rho;
            worst = worst.max((r - base_rho[k]).abs());
            if let (Some(o), Some(base_o), Some(w)) = (&oracle, &base.oracle_cut_times, worst_ref.as_mut()) {
                *w = w.max((oracle_cut_time(o, &v)? - base_o[k]).abs());
            }
            rho.push(r);
        }
        row.cut_time_error = Some(worst);
        row.cut_time_reference = worst_ref;
        row.cut_times = Some(rho);
    }

    if let (Some(bg), true) = (&base.global, spec.runs(SweepKind::InjDiam)) {
        let g = global_estimates(field, spec.inj_sources, spec.inj_directions, grid, &opts)?;
        row.inj = Some(g.inj);
        row.diam = Some(g.diam);
        row.inj_diff = Some((g.inj - bg.inj).abs());
        row.diam_diff = Some((g.diam - bg.diam).abs());
        if let Some(o) = &oracle {
            row.inj_reference = Some(o.injectivity_radius());
            row.diam_reference = Some(o.diameter());
        }
    }

    if spec.runs(SweepKind::Viscosity) {
        // the bound concerns the metric alone, so both fields share the base source
        let u = if p == base.p { df.clone() } else { solve_distance(field, base.p, grid)? };
        let diam = base
            .global
            .map(|g| g.diam)
            .or_else(|| oracle_of(&base.field).map(|o| o.diameter()))
            .unwrap_or_else(|| base.df.max_value());
        row.sup_u_diff = Some(sup_norm_diff(&u, &base.df)?);
        row.viscosity_bound = Some(row.c0_envelope * (diam + 1.0) + 2.0 * error_scale(&base.field, h));
    }

    if spec.svg {
        let exclude = point_source_exclusion(&df, field);
        overlay.sep = detect_separating_points(&df, field, spec.tau_sep, &exclude).points();
    }
    Ok(Step {
        row,
        sample: sample_points,
        overlay,
    })
}

fn fmt_list(xs: &[f64]) -> String {
    let mut s = String::from("[");
    for (k, x) in xs.iter().enumerate() {
        if k > 0 {
            s.push_str(", ");
        }
        let _ = write!(s, "{x:.4e}");
    }
    s.push(']');
    s
}

fn verdicts(spec: &ExperimentSpec, base: &BaseSummary, rows: &[ReportRow]) -> Vec<Verdict> {
    let h = spec.h();
    let tail = &rows[spec.tail_start.min(rows.len())..];
    let mut out = Vec::new();
    let mut push = |name: &str, pass: bool, detail: String| {
        out.push(Verdict {
            name: name.into(),
            pass,
            detail,
        })
    };
    let col = |f: &dyn Fn(&ReportRow) -> Option<f64>| tail.iter().filter_map(f).collect::<Vec<f64>>();

    if spec.runs(SweepKind::Stability) {
        let d = col(&|r| r.d_h);
        let rises: Vec<usize> = (1..d.len()).filter(|&k| d[k] > d[k - 1] + 2.0 * h).collect();
        push(
            "stability.nonincreasing",
            rises.is_empty(),
            format!("d_H tail {} with jitter allowance 2h = {:.4e}", fmt_list(&d), 2.0 * h),
        );
        let last = d.last().copied();
        push(
            "stability.final",
            last.is_none_or(|x| x <= 3.0 * h),
            format!("final d_H {:?} against 3h = {:.4e}", last, 3.0 * h),
        );
        let gaps: Vec<f64> = tail
            .iter()
            .filter_map(|r| Some((r.d_h? - r.d_h_reference?).abs()))
            .collect();
        if !gaps.is_empty() {
            let worst = gaps.iter().copied().fold(0.0, f64::max);
            push(
                "stability.reference",
                worst <= 3.0 * h,
                format!("max |d_H − d_H(reference)| = {worst:.4e} against 3h = {:.4e}", 3.0 * h),
            );
        }
    }
    if spec.runs(SweepKind::CutTime) {
        let bad: Vec<usize> = tail
            .iter()
            .filter(|r| match r.cut_time_error {
                Some(e) => e > 2.0 * r.tol_cut + r.cut_time_reference.unwrap_or(0.0),
                None => false,
            })
            .map(|r| r.index)
            .collect();
        push(
            "cut_time.tail",
            bad.is_empty(),
            format!(
                "errors {} within 2·tol_cut + reference error; failing steps {bad:?}",
                fmt_list(&col(&|r| r.cut_time_error))
            ),
        );
    }
    if spec.runs(SweepKind::InjDiam) {
        // the exact difference still left at the last step, when an oracle knows it
        let last = tail.last();
        let floor = 2.0 * h;
        let left = |x: Option<f64>, y: Option<f64>| x.zip(y).map(|(a, b)| (a - b).abs()).unwrap_or(0.0);
        let inj = last.and_then(|r| r.inj_diff);
        let diam = last.and_then(|r| r.diam_diff);
        let inj_left = left(last.and_then(|r| r.inj_reference), base.inj_reference);
        let diam_left = left(last.and_then(|r| r.diam_reference), base.diam_reference);
        push(
            "inj_diam.floor",
            inj.is_none_or(|x| x <= floor + inj_left) && diam.is_none_or(|x| x <= floor + diam_left),
            format!(
                "final |ΔInj| {inj:?}, |ΔDiam| {diam:?} against floor 2h = {floor:.4e} plus exact differences {inj_left:.4e}, {diam_left:.4e}"
            ),
        );
        let errs: Vec<f64> = tail
            .iter()
            .flat_map(|r| {
                [
                    r.inj.zip(r.inj_reference).map(|(a, b)| (a - b).abs()),
                    r.diam.zip(r.diam_reference).map(|(a, b)| (a - b).abs()),
                ]
            })
            .flatten()
            .collect();
        if !errs.is_empty() {
            let worst = errs.iter().copied().fold(0.0, f64::max);
            let tol = tail.iter().map(|r| r.tol_cut).fold(f64::INFINITY, f64::min);
            push(
                "inj_diam.reference",
                worst <= tol,
                format!("max error against oracle {worst:.4e}, tolerance {tol:.4e}"),
            );
        }
    }
    if spec.runs(SweepKind::Viscosity) {
        let bad: Vec<usize> = tail
            .iter()
            .filter(|r| matches!((r.sup_u_diff, r.viscosity_bound), (Some(d), Some(b)) if d > b))
            .map(|r| r.index)
            .collect();
        push(
            "viscosity.bound",
            bad.is_empty(),
            format!(
                "sup|u_i − u| {} against ε_i(Diam+1) + 2Ch {}; failing steps {bad:?}",
                fmt_list(&col(&|r| r.sup_u_diff)),
                fmt_list(&col(&|r| r.viscosity_bound))
            ),
        );
    }
    out
}

/// Runs every sweep listed in `spec.sweeps`.
///
/// A failing step aborts the sweep; the rows before it are kept and the error
/// is recorded in the report.
pub fn run_experiment(spec: &ExperimentSpec) -> Result<Experiment> {
    spec.validate()?;
    let base_field = parse_metric(&spec.base, spec.metric_grid)?;
    let schedule = spec.schedule.values();
    let family = make_family(&base_field, spec.perturbation()?, &schedule, FAMILY_CHECK_GRID)?;
    let p = ChartPoint::new(spec.source[0], spec.source[1]);
    let points = spec.points.points(p, schedule.len())?;
    let grid = Grid::new(spec.grid)?;
    let base = prepare_base(spec, &base_field, p, grid)?;

    let steps: Vec<Result<Step>> = (0..schedule.len())
        .into_par_iter()
        .map(|i| run_step(spec, &base, i, schedule[i], &family.members[i], points[i], grid))
        .collect();
    let mut rows = Vec::new();
    let mut members = Vec::new();
    let mut overlays = Vec::new();
    let mut error = None;
    for (i, s) in steps.into_iter().enumerate() {
        match s {
            Ok(s) => {
                rows.push(s.row);
                if let Some(pts) = s.sample {
                    members.push(pts);
                }
                overlays.push(s.overlay);
            }
            Err(e) => {
                error = Some(format!("step {i}: {e}"));
                break;
            }
        }
    }
    let summary = BaseSummary {
        metric: base_field.to_string(),
        tol_cut: base.tol_cut,
        cut_times: base.cut_times.clone(),
        inj: base.global.map(|g| g.inj),
        diam: base.global.map(|g| g.diam),
        diam_grid: base.global.map(|g| g.diam_grid),
        inj_reference: base.global.and(oracle_of(&base_field)).map(|o| o.injectivity_radius()),
        diam_reference: base.global.and(oracle_of(&base_field)).map(|o| o.diameter()),
    };
    let mut verdicts = verdicts(spec, &summary, &rows);
    if let Some(e) = &error {
        verdicts.push(Verdict {
            name: "completed".into(),
            pass: false,
            detail: e.clone(),
        });
    }
    let reference = if spec.runs(SweepKind::Stability) && spec.reference != ReferenceKind::None {
        let constant = base_field.as_constant().is_some() && family.members.iter().all(|m| m.as_constant().is_some());
        Some(
            match (spec.reference, constant) {
                (ReferenceKind::Oracle, _) | (ReferenceKind::Auto, true) => "oracle",
                _ => "refined",
            }
            .to_string(),
        )
    } else {
        None
    };
    let report = ConvergenceReport {
        name: spec.name.clone(),
        grid: spec.grid,
        directions: spec.directions,
        h: spec.h(),
        tau_sep: spec.tau_sep,
        sweeps: spec.sweeps.clone(),
        reference,
        base: summary,
        rows,
        verdicts,
        error,
        samples: base.sample.as_ref().map(|s| ReportSamples {
            base: s.points(),
            members,
        }),
    };
    Ok(Experiment { report, overlays })
}

fn only(spec: &ExperimentSpec, kind: SweepKind) -> ExperimentSpec {
    ExperimentSpec {
        sweeps: vec![kind],
        ..spec.clone()
    }
}

pub fn stability_sweep(spec: &ExperimentSpec) -> Result<ConvergenceReport> {
    Ok(run_experiment(&only(spec, SweepKind::Stability))?.report)
}

/// Cut-time errors for the given chart directions.
pub fn cut_time_sweep(spec: &ExperimentSpec, directions: &[[f64; 2]]) -> Result<ConvergenceReport> {
    let s = ExperimentSpec {
        cut_directions: directions.to_vec(),
        ..only(spec, SweepKind::CutTime)
    };
    Ok(run_experiment(&s)?.report)
}

pub fn inj_diam_sweep(spec: &ExperimentSpec) -> Result<ConvergenceReport> {
    Ok(run_experiment(&only(spec, SweepKind::InjDiam))?.report)
}

pub fn viscosity_sweep(spec: &ExperimentSpec) -> Result<ConvergenceReport> {
    Ok(run_experiment(&only(spec, SweepKind::Viscosity))?.report)
}

fn write(path: PathBuf, text: &str) -> Result<PathBuf> {
    fs::write(&path, text).map_err(|e| Error::io(&path, e))?;
    Ok(path)
}

/// Writes `report.csv`, `report.json` and, when `svg` is set, `overlay_<i>.svg` into `dir`.
pub fn emit_report(exp: &Experiment, dir: &Path, svg: bool) -> Result<Vec<PathBuf>> {
    fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
    let mut out = vec![
        write(dir.join("report.csv"), &exp.report.to_csv())?,
        write(dir.join("report.json"), &exp.report.to_json()?)?,
    ];
    if svg {
        for (i, o) in exp.overlays.iter().enumerate() {
            out.push(write(dir.join(format!("overlay_{i}.svg")), &o.render())?);
        }
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn spec(json: &str) -> ExperimentSpec {
        ExperimentSpec::from_json_str(json).unwrap()
    }

    fn shear(extra: &str) -> ExperimentSpec {
        spec(&format!(
            r#"{{"name": "shear", "base": "flat",
                "perturbation": {{"kind": "additive", "direction": "constant:[0,1,0]"}},
                "schedule": {{"start": 0.4, "ratio": 0.5, "count": 3}},
                "grid": 64, "directions": 64, "inj_sources": 2, "inj_directions": 16 {extra}}}"#
        ))
    }

    #[test]
    fn parses_spec_forms() {
        let s = shear("");
        assert_eq!(s.schedule.values(), vec![0.4, 0.2, 0.1]);
        assert_eq!(s.points, PointSequence::Fixed);
        assert_eq!(s.sweeps, SweepKind::ALL.to_vec());
        let s = shear(r#", "points": {"offset": [1, 0.5]}, "sweeps": ["cut_time"]"#);
        let pts = s.points.points(ChartPoint::origin(), 3).unwrap();
        assert!((pts[1].u() - 0.5).abs() < 1e-15 && (pts[1].v() - 0.25).abs() < 1e-15);
        let c = spec(
            r#"{"name": "c", "base": "flat", "perturbation": {"kind": "conformal", "amp": 1},
                "schedule": [0.2, 0.1]}"#,
        );
        assert_eq!(c.perturbation, PerturbationSpec::Conformal { amp: 1.0, ku: 1, kv: 0 });
        assert_eq!(c.grid, 256);
        let back = ExperimentSpec::from_json_str(&c.to_json().unwrap()).unwrap();
        assert_eq!(back, c);
    }

    #[test]
    fn rejects_bad_specs() {
        let base = r#""name": "x", "base": "flat", "perturbation": {"kind": "additive", "direction": "identity"}"#;
        for bad in [
            r#""schedule": [0.1, 0.2]"#,
            r#""schedule": [0.1, -0.2]"#,
            r#""schedule": [0.1], "grid": 8"#,
            r#""schedule": [0.1], "tau_sep": 1.5"#,
            r#""schedule": [0.1], "bogus": 1"#,
        ] {
            assert!(ExperimentSpec::from_json_str(&format!("{{{base}, {bad}}}")).is_err(), "{bad}");
        }
        let s = shear(r#", "points": {"list": [[0, 0]]}"#);
        assert!(s.points.points(ChartPoint::origin(), 3).is_err());
    }

    #[test]
    fn zero_perturbation_reproduces_base() {
        let s = spec(
            r#"{"name": "zero", "base": "constant:[1,0.4,1]",
                "perturbation": {"kind": "additive", "direction": "zero"},
                "schedule": [0.5, 0.25, 0.125], "grid": 64, "directions": 64,
                "inj_sources": 2, "inj_directions": 16}"#,
        );
        let exp = run_experiment(&s).unwrap();
        let r = &exp.report;
        assert!(r.passed(), "{:?}", r.verdicts);
        for row in &r.rows {
            assert!(row.d_h.unwrap() <= 1e-12);
            assert!(row.cut_time_error.unwrap() <= 1e-12);
            assert!(row.sup_u_diff.unwrap() <= 1e-12);
            assert_eq!(row.c2_distance, 0.0);
        }
    }

    #[test]
    fn shear_sweep_tracks_oracle() {
        let exp = run_experiment(&shear("")).unwrap();
        let r = &exp.report;
        assert_eq!(r.rows.len(), 3);
        assert_eq!(r.reference.as_deref(), Some("oracle"));
        assert!(r.passed(), "{:#?}", r.verdicts);
        let h = r.h;
        for row in &r.rows {
            assert!((row.c2_distance - row.t).abs() < 1e-12);
            assert!((row.d_h.unwrap() - row.d_h_reference.unwrap()).abs() <= 3.0 * h);
            assert!((row.inj.unwrap() - row.inj_reference.unwrap()).abs() < 1e-6);
        }
        assert_eq!(exp.overlays.len(), 3);
        assert!(!exp.overlays[0].sep.is_empty());
    }

    #[test]
    fn report_files_are_deterministic() {
        let s = shear(r#", "sweeps": ["stability", "viscosity"]"#);
        let a = run_experiment(&s).unwrap();
        let b = run_experiment(&s).unwrap();
        let (da, db) = (tempfile::tempdir().unwrap(), tempfile::tempdir().unwrap());
        let fa = emit_report(&a, da.path(), true).unwrap();
        emit_report(&b, db.path(), true).unwrap();
        assert_eq!(fa.len(), 5);
        for f in &fa {
            let name = f.file_name().unwrap();
            assert_eq!(fs::read(f).unwrap(), fs::read(db.path().join(name)).unwrap(), "{name:?}");
        }
        let csv = fs::read_to_string(da.path().join("report.csv")).unwrap();
        assert_eq!(csv.lines().count(), 4);
        assert_eq!(csv.lines().next().unwrap(), CSV_HEADER);
        // the d_H column can be recomputed from the emitted samples
        let back = ConvergenceReport::from_json_str(&fs::read_to_string(&fa[1]).unwrap()).unwrap();
        let samples = back.samples.as_ref().unwrap();
        for (row, pts) in back.rows.iter().zip(&samples.members) {
            assert_eq!(row.d_h.unwrap(), hausdorff_points(pts, &samples.base).unwrap());
        }
    }

    #[test]
    fn empty_schedule_gives_header_only_csv() {
        let s = shear("").clone();
        let s = ExperimentSpec {
            schedule: ScheduleSpec::List(vec![]),
            sweeps: vec![SweepKind::Stability],
            ..s
        };
        let exp = run_experiment(&s).unwrap();
        assert_eq!(exp.report.to_csv(), format!("{CSV_HEADER}\n"));
    }

    #[test]
    fn scaling_cut_times_follow_square_root() {
        let s = spec(
            r#"{"name": "scale", "base": "flat",
                "perturbation": {"kind": "additive", "direction": "identity"},
                "schedule": [0.5, 0.25], "grid": 64, "directions": 64, "sweeps": ["cut_time"]}"#,
        );
        let r = cut_time_sweep(&s, &[[1.0, 0.0], [0.0, 1.0]]).unwrap();
        for row in &r.rows {
            let expect = ((1.0 + row.t).sqrt() - 1.0) * std::f64::consts::PI;
            assert!((row.cut_time_error.unwrap() - expect).abs() < 1e-6);
            assert!((row.cut_time_reference.unwrap() - expect).abs() < 1e-12);
        }
    }
}
