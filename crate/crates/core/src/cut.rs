//! Cut times, cut-locus samples, separating points, injectivity radius and diameter.
//!
//! A cut time is located in two stages. The geodesic `γ_v` is marched against
//! the grid distance field and the first sustained crossing of
//! `d(p, γ_v(t)) < t − tol_cut` is bisected. That estimate carries the grid
//! error, so it is then sharpened by shooting: the cut point is where `γ_v`
//! meets a second unit-speed geodesic `γ_w` from `p` (possibly reaching `p`
//! through a lattice translate `λ`) after the same time, i.e. a root of
//! `γ_v(t) − γ_w(t) − λ = 0` in `(t, w)`. When several roots fall inside the
//! search window, the earliest one wins.

use std::f64::consts::{PI, TAU};

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::chart::{wrapped_delta, ChartPoint, TangentVector};
use crate::eikonal::{
    central_gradient, error_scale, interpolate, point_distance, solve_distance, solve_from_band, DistanceField, Grid,
    SolveOptions, SOURCE_RADIUS,
};
use crate::error::{Error, Result};
use crate::geodesic::{geodesic_flow, log_map, log_map_with, rk4_step, step_for_grid, unit_direction, GeodesicState};
use crate::hausdorff::hausdorff_points;
use crate::metric::MetricField;

pub const DEFAULT_TAU_SEP: f64 = 0.2;
pub const TOL_CUT_FLOOR: f64 = 1e-3;
pub const BISECT_TOL: f64 = 1e-4;
/// Consecutive march steps below the threshold that count as a crossing.
const SUSTAIN: usize = 3;
const SCAN_ANGLES: usize = 64;
/// Extra characteristic traces started around the first point past the crossing.
const RING: usize = 6;
const ALONG: usize = 6;

/// `max(3·C·h·√λmax, 10⁻³)`.
pub fn default_tol_cut(field: &MetricField, h: f64) -> f64 {
    (3.0 * error_scale(field, h)).max(TOL_CUT_FLOOR)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CutOptions {
    /// Crossing tolerance; `None` selects [`default_tol_cut`].
    pub tol_cut: Option<f64>,
    /// Sharpen coarse cut times by geodesic shooting.
    pub refine: bool,
    /// Largest allowed flat gap between consecutive sample points; `None` means `h`.
    pub max_gap: Option<f64>,
    /// Bisection depth limit for densification (0 disables it).
    pub max_depth: usize,
    /// Search bound; `None` means the largest grid value plus one.
    pub t_max: Option<f64>,
}

impl Default for CutOptions {
    fn default() -> Self {
        CutOptions {
            tol_cut: None,
            refine: true,
            max_gap: None,
            max_depth: 6,
            t_max: None,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CutTime {
    pub rho: f64,
    /// Threshold-crossing estimate before refinement.
    pub coarse: f64,
    pub refined: bool,
    /// Cut point, lifted.
    pub point: [f64; 2],
}

/// Shared state for cut-time searches from one source.
pub struct CutSearch<'a> {
    field: &'a MetricField,
    df: &'a DistanceField,
    p: ChartPoint,
    h: f64,
    step: f64,
    tol: f64,
    t_max: f64,
    window: f64,
    refine: bool,
    sqrt_lambda_min: f64,
}

struct Root {
    t: f64,
    phi: f64,
}

impl<'a> CutSearch<'a> {
    pub fn new(field: &'a MetricField, df: &'a DistanceField, opts: &CutOptions) -> Result<Self> {
        let h = df.h();
        let tol = opts.tol_cut.unwrap_or_else(|| default_tol_cut(field, h));
        if !(tol > 0.0) {
            return Err(Error::InvalidArgument(format!("tol_cut must be positive, got {tol}")));
        }
        let (lo, hi) = field.eigenvalue_range(64);
        Ok(CutSearch {
            field,
            df,
            p: df.source,
            h,
            step: step_for_grid(h),
            tol,
            t_max: opts.t_max.unwrap_or(df.max_value() + 1.0),
            window: 2.0 * tol + 4.0 * h * hi.sqrt(),
            refine: opts.refine,
            sqrt_lambda_min: lo.sqrt(),
        })
    }

    pub fn tol_cut(&self) -> f64 {
        self.tol
    }

    pub fn source(&self) -> ChartPoint {
        self.p
    }

    #[inline]
    fn crossed(&self, t: f64, s: &GeodesicState) -> bool {
        interpolate(self.df, s.position[0], s.position[1]) < t - self.tol
    }

    /// Cut time in the chart direction `theta`.
    pub fn cut_time_at(&self, theta: f64) -> Result<CutTime> {
        self.cut_time(&unit_direction(self.field, self.p, theta)?)
    }

    pub fn cut_time(&self, v: &TangentVector) -> Result<CutTime> {
        let dt = self.step;
        let mut s = GeodesicState::from_tangent(v);
        let mut states = vec![s];
        let mut run = 0;
        let first = loop {
            let k = states.len();
            let t = k as f64 * dt;
            if t > self.t_max {
                return Err(Error::NoCutDetected { t_max: self.t_max });
            }
            s = rk4_step(self.field, &s, dt)?;
            states.push(s);
            if self.crossed(t, &s) {
                run += 1;
                if run == SUSTAIN {
                    break k + 1 - SUSTAIN;
                }
            } else {
                run = 0;
            }
        };
        let base = states[first - 1];
        let t0 = (first - 1) as f64 * dt;
        let (mut lo, mut hi) = (t0, first as f64 * dt);
        while hi - lo > BISECT_TOL {
            let mid = 0.5 * (lo + hi);
            let st = geodesic_flow(self.field, &base, mid - t0, self.step)?;
            if self.crossed(mid, &st) {
                hi = mid;
            } else {
                lo = mid;
            }
        }
        let coarse = 0.5 * (lo + hi);
        if self.refine {
            if let Some(r) = self.refine_root(v, &states, coarse)? {
                let point = self.gamma_v(&states, r.t)?.position;
                return Ok(CutTime {
                    rho: r.t,
                    coarse,
                    refined: true,
                    point,
                });
            }
        }
        let point = self.gamma_v(&states, coarse)?.position;
        Ok(CutTime {
            rho: coarse,
            coarse,
            refined: false,
            point,
        })
    }

    fn gamma_v(&self, states: &[GeodesicState], t: f64) -> Result<GeodesicState> {
        let k = ((t / self.step).floor().max(0.0) as usize).min(states.len() - 1);
        geodesic_flow(self.field, &states[k], t - k as f64 * self.step, self.step)
    }

    fn gamma_w(&self, phi: f64, t: f64) -> Result<GeodesicState> {
        let w = unit_direction(self.field, self.p, phi)?;
        geodesic_flow(self.field, &GeodesicState::from_tangent(&w), t, self.step)
    }

    fn newton(&self, states: &[GeodesicState], theta: f64, start: (f64, f64), lambda: [f64; 2], coarse: f64) -> Result<Option<Root>> {
        let (mut t, mut phi) = start;
        let (mut best, mut stalled) = (f64::INFINITY, 0);
        for _ in 0..40 {
            let a = self.gamma_v(states, t)?;
            let b = self.gamma_w(phi, t)?;
            let f = [
                a.position[0] - b.position[0] - lambda[0],
                a.position[1] - b.position[1] - lambda[1],
            ];
            let res = f[0].hypot(f[1]);
            if res < 1e-10 {
                let trivial = lambda == [0.0, 0.0] && wrapped_delta(theta, phi).abs() < 1e-5;
                if trivial || (t - coarse).abs() > self.window {
                    return Ok(None);
                }
                return Ok(Some(Root { t, phi }));
            }
            if res < 0.5 * best {
                stalled = 0;
            } else {
                stalled += 1;
                if stalled >= 4 {
                    return Ok(None);
                }
            }
            best = best.min(res);
            let eps = 1e-6;
            let b2 = self.gamma_w(phi + eps, t)?;
            let jt = [a.velocity[0] - b.velocity[0], a.velocity[1] - b.velocity[1]];
            let jp = [
                -(b2.position[0] - b.position[0]) / eps,
                -(b2.position[1] - b.position[1]) / eps,
            ];
            let det = jt[0] * jp[1] - jp[0] * jt[1];
            if det.abs() < 1e-14 {
                return Ok(None);
            }
            let dt = ((-f[0] * jp[1] + jp[0] * f[1]) / det).clamp(-0.25, 0.25);
            let dphi = ((-jt[0] * f[1] + jt[1] * f[0]) / det).clamp(-0.2, 0.2);
            t += dt;
            phi += dphi;
            if (t - coarse).abs() > 2.0 * self.window || t <= 0.0 {
                return Ok(None);
            }
        }
        Ok(None)
    }

    /// Lower bound on the length of any curve from `p + λ` to the lifted point `y`.
    fn length_lower_bound(&self, y: [f64; 2], lambda: [f64; 2]) -> f64 {
        let d = [y[0] - self.p.u() - lambda[0], y[1] - self.p.v() - lambda[1]];
        self.sqrt_lambda_min * d[0].hypot(d[1])
    }

    fn refine_root(&self, v: &TangentVector, states: &[GeodesicState], coarse: f64) -> Result<Option<Root>> {
        let theta = v.angle();
        let y = self.gamma_v(states, coarse + 3.0 * self.h)?.position;

        // competitor guesses from grid characteristics through points of γ_v across
        // the search window and a ring around the far end, which reaches every sheet
        // the geodesic crosses near the coarse cut
        let r = 2.0 * self.h;
        let mut seeds = Vec::new();
        let lo = (coarse - self.window).max(0.5 * coarse);
        let hi = coarse + 3.0 * self.h;
        for k in 0..ALONG {
            let t = lo + (hi - lo) * k as f64 / (ALONG - 1) as f64;
            seeds.push(self.gamma_v(states, t)?.position);
        }
        for k in 0..RING {
            let a = TAU * k as f64 / RING as f64;
            seeds.push([y[0] + r * a.cos(), y[1] + r * a.sin()]);
        }
        let mut starts: Vec<(f64, [f64; 2])> = Vec::new();
        let mut push = |phi: f64, l: [f64; 2]| {
            let known = starts
                .iter()
                .any(|(q, m)| *m == l && wrapped_delta(*q, phi).abs() < 1e-2);
            let trivial = l == [0.0, 0.0] && wrapped_delta(theta, phi).abs() < 1e-2;
            if !known && !trivial {
                starts.push((phi, l));
            }
        };
        for y0 in seeds {
            if let Some((phi, l)) = self.descend(y0)? {
                push(phi, l);
            }
        }
        // straight shooting towards the neighbouring lifts of the coarse point
        let yc = self.gamma_v(states, coarse)?.position;
        let base = [
            ((yc[0] - self.p.u()) / TAU).round() * TAU,
            ((yc[1] - self.p.v()) / TAU).round() * TAU,
        ];
        for a in -1..=1 {
            for b in -1..=1 {
                let l = [base[0] + TAU * a as f64, base[1] + TAU * b as f64];
                let d = [yc[0] - self.p.u() - l[0], yc[1] - self.p.v() - l[1]];
                if self.length_lower_bound(yc, l) > coarse + self.window {
                    continue;
                }
                // only a seed angle is needed here
                if let Ok(w) = log_map_with(self.field, self.p, d, 0.05, 1e-6) {
                    push(w[1].atan2(w[0]), l);
                }
            }
        }
        let mut best: Option<Root> = None;
        let mut centre = None;
        // roots already found, so starts on the same sheet are not re-solved
        let mut found: Vec<(f64, [f64; 2])> = Vec::new();
        for (phi, l) in &starts {
            if found.iter().any(|(q, m)| m == l && wrapped_delta(*q, *phi).abs() < 0.1) {
                continue;
            }
            if let Some(r) = self.newton(states, theta, (coarse, *phi), *l, coarse)? {
                found.push((r.phi, *l));
                if best.as_ref().is_none_or(|b| r.t < b.t) {
                    best = Some(r);
                }
            }
            centre.get_or_insert(*l);
        }
        if best.is_some() {
            return Ok(best);
        }
        self.scan(states, theta, coarse, y, centre.unwrap_or([0.0, 0.0]))
    }

    /// Follows `−∇u` on the grid from the lifted point `y0` into the exact source
    /// disk and returns the initial direction at `p` and the lattice offset of the
    /// traced minimizing curve.
    fn descend(&self, y0: [f64; 2]) -> Result<Option<(f64, [f64; 2])>> {
        let df = self.df;
        let ds = self.h;
        let stop = 0.5 * SOURCE_RADIUS;
        let mut x = y0;
        let max_steps = (2.0 * self.t_max / ds) as usize + 1;
        for _ in 0..max_steps {
            let u = interpolate(df, x[0], x[1]);
            if u <= stop {
                let lambda = [
                    ((x[0] - self.p.u()) / TAU).round() * TAU,
                    ((x[1] - self.p.v()) / TAU).round() * TAU,
                ];
                let d = [x[0] - self.p.u() - lambda[0], x[1] - self.p.v() - lambda[1]];
                return Ok(log_map(self.field, self.p, d).ok().map(|w| (w[1].atan2(w[0]), lambda)));
            }
            let grad = self.interpolated_gradient(x);
            let g = self.field.tensor_at(x[0], x[1]);
            let vec = g.inverse().mul_vec(grad);
            let n = g.quad(vec).sqrt();
            if !(n > 1e-6) {
                return Ok(None);
            }
            // unit g-speed step, shortened near the disk
            let s = ds.min(0.5 * (u - stop) + 1e-3 * ds);
            x = [x[0] - s * vec[0] / n, x[1] - s * vec[1] / n];
        }
        Ok(None)
    }

    fn interpolated_gradient(&self, y: [f64; 2]) -> [f64; 2] {
        let df = self.df;
        let h = df.h();
        let (x, z) = (crate::chart::wrap(y[0]) / h, crate::chart::wrap(y[1]) / h);
        let (i0, j0) = (x.floor(), z.floor());
        let (fx, fz) = (x - i0, z - j0);
        let g = df.grid();
        let mut grad = [0.0; 2];
        for (di, wi) in [(0, 1.0 - fx), (1, fx)] {
            for (dj, wj) in [(0, 1.0 - fz), (1, fz)] {
                let i = g.wrap_index(i0 as isize + di);
                let j = g.wrap_index(j0 as isize + dj);
                let c = central_gradient(df, i, j);
                grad[0] += wi * wj * c[0];
                grad[1] += wi * wj * c[1];
            }
        }
        grad
    }

    /// Fallback: Newton from the best of a fixed fan of directions for each nearby offset.
    fn scan(&self, states: &[GeodesicState], theta: f64, coarse: f64, y: [f64; 2], centre: [f64; 2]) -> Result<Option<Root>> {
        let a = self.gamma_v(states, coarse)?.position;
        let ends: Vec<(f64, [f64; 2])> = (0..SCAN_ANGLES)
            .map(|k| {
                let phi = TAU * k as f64 / SCAN_ANGLES as f64;
                self.gamma_w(phi, coarse).map(|s| (phi, s.position))
            })
            .collect::<Result<_>>()?;
        let mut best: Option<Root> = None;
        for da in -1..=1 {
            for db in -1..=1 {
                let l = [centre[0] + da as f64 * TAU, centre[1] + db as f64 * TAU];
                if self.length_lower_bound(y, l) > coarse + self.window + 3.0 * self.h {
                    continue;
                }
                let pick = ends
                    .iter()
                    .filter(|(phi, _)| l != [0.0, 0.0] || wrapped_delta(theta, *phi).abs() > 3.0 * TAU / SCAN_ANGLES as f64)
                    .map(|(phi, e)| (*phi, (a[0] - e[0] - l[0]).hypot(a[1] - e[1] - l[1])))
                    .min_by(|x, y| x.1.total_cmp(&y.1));
                if let Some((phi, _)) = pick {
                    if let Some(r) = self.newton(states, theta, (coarse, phi), l, coarse)? {
                        if best.as_ref().is_none_or(|b| r.t < b.t) {
                            best = Some(r);
                        }
                    }
                }
            }
        }
        Ok(best)
    }
}

/// Cut time `ρ_g(p, v)` for a unit `v` at the source of `df`.
pub fn cut_time(field: &MetricField, v: &TangentVector, df: &DistanceField, opts: &CutOptions) -> Result<CutTime> {
    CutSearch::new(field, df, opts)?.cut_time(v)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CutEntry {
    pub theta: f64,
    pub rho: f64,
    pub x_u: f64,
    pub x_v: f64,
    pub refined: bool,
}

impl CutEntry {
    pub fn point(&self) -> ChartPoint {
        ChartPoint::new(self.x_u, self.x_v)
    }
}

/// Directions, cut times and cut points `x_k = exp_p(ρ_k v_k)` from one source.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CutLocusSample {
    pub source: ChartPoint,
    /// Base direction count before densification.
    #[serde(rename = "K")]
    pub k: usize,
    pub grid: usize,
    pub tol_cut: f64,
    pub metric: String,
    pub entries: Vec<CutEntry>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct CutTimeProfile {
    pub source: ChartPoint,
    pub thetas: Vec<f64>,
    pub rhos: Vec<f64>,
}

impl CutLocusSample {
    pub fn points(&self) -> Vec<ChartPoint> {
        self.entries.iter().map(CutEntry::point).collect()
    }

    pub fn profile(&self) -> CutTimeProfile {
        CutTimeProfile {
            source: self.source,
            thetas: self.entries.iter().map(|e| e.theta).collect(),
            rhos: self.entries.iter().map(|e| e.rho).collect(),
        }
    }

    pub fn refined_fraction(&self) -> f64 {
        self.entries.iter().filter(|e| e.refined).count() as f64 / self.entries.len().max(1) as f64
    }

    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string_pretty(self)?)
    }

    pub fn from_json_str(text: &str) -> Result<Self> {
        Ok(serde_json::from_str(text)?)
    }
}

fn entry(search: &CutSearch, theta: f64, index: usize) -> Result<CutEntry> {
    let c = search.cut_time_at(theta).map_err(|e| Error::Direction {
        index,
        source: Box::new(e),
    })?;
    let x = ChartPoint::new(c.point[0], c.point[1]);
    Ok(CutEntry {
        theta,
        rho: c.rho,
        x_u: x.u(),
        x_v: x.v(),
        refined: c.refined,
    })
}

/// Cut locus sampled over `k` equally spaced chart directions, then densified
/// by bisecting directions between consecutive points farther apart than `max_gap`.
pub fn cut_locus(field: &MetricField, df: &DistanceField, k: usize, opts: &CutOptions) -> Result<CutLocusSample> {
    if k < 4 {
        return Err(Error::InvalidArgument(format!("need at least 4 directions, got {k}")));
    }
    let search = CutSearch::new(field, df, opts)?;
    let mut entries: Vec<CutEntry> = (0..k)
        .into_par_iter()
        .map(|i| entry(&search, TAU * i as f64 / k as f64, i))
        .collect::<Result<_>>()?;
    let max_gap = opts.max_gap.unwrap_or(df.h());
    for _ in 0..opts.max_depth {
        let n = entries.len();
        let gaps: Vec<usize> = (0..n)
            .filter(|&i| entries[i].point().flat_distance(&entries[(i + 1) % n].point()) > max_gap)
            .collect();
        if gaps.is_empty() {
            break;
        }
        let fresh: Vec<CutEntry> = gaps
            .par_iter()
            .map(|&i| {
                let a = entries[i].theta;
                let b = if i + 1 == n { entries[0].theta + TAU } else { entries[i + 1].theta };
                entry(&search, crate::chart::wrap(0.5 * (a + b)), i)
            })
            .collect::<Result<_>>()?;
        entries.extend(fresh);
        entries.sort_by(|a, b| a.theta.total_cmp(&b.theta));
    }
    Ok(CutLocusSample {
        source: df.source,
        k,
        grid: df.n,
        tol_cut: search.tol,
        metric: field.to_string(),
        entries,
    })
}

/// Solves the distance field from `p` on `grid` and samples the cut locus.
pub fn compute_cut_locus(
    field: &MetricField,
    p: ChartPoint,
    k: usize,
    grid: Grid,
    opts: &CutOptions,
) -> Result<(DistanceField, CutLocusSample)> {
    let df = solve_distance(field, p, grid)?;
    let sample = cut_locus(field, &df, k, opts)?;
    Ok((df, sample))
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SepPointSet {
    pub n: usize,
    pub tau: f64,
    pub nodes: Vec<[usize; 2]>,
}

impl SepPointSet {
    pub fn points(&self) -> Vec<ChartPoint> {
        let g = Grid::new(self.n).expect("grid was valid when the set was built");
        self.nodes.iter().map(|[i, j]| g.node(*i, *j)).collect()
    }

    pub fn len(&self) -> usize {
        self.nodes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.nodes.is_empty()
    }
}

/// Nodes within the frozen source disk, where the grid values are imposed.
pub fn point_source_exclusion(df: &DistanceField, field: &MetricField) -> Vec<bool> {
    let (_, hi) = field.eigenvalue_range(64);
    let r = SOURCE_RADIUS + 2.0 * df.h() * hi.sqrt();
    df.values.iter().map(|&u| u <= r).collect()
}

/// Grid nodes where `u` has a supergradient of `g`-norm at most `1 − τ`.
///
/// A node is flagged when the central-difference differential has dual norm
/// `≤ 1 − τ` and `u` is strictly concave across the node along one of the
/// axis or diagonal lines, i.e. two incoming characteristics meet there.
pub fn detect_separating_points(df: &DistanceField, field: &MetricField, tau: f64, exclude: &[bool]) -> SepPointSet {
    let g = df.grid();
    let n = g.n();
    let h = g.h();
    let nodes: Vec<[usize; 2]> = (0..n)
        .into_par_iter()
        .flat_map_iter(|i| {
            (0..n).filter_map(move |j| {
                if exclude[g.index(i, j)] {
                    return None;
                }
                let p = central_gradient(df, i, j);
                let ginv = field.tensor_at(i as f64 * h, j as f64 * h).inverse();
                if ginv.quad(p).sqrt() > 1.0 - tau {
                    return None;
                }
                let (ii, jj) = (i as isize, j as isize);
                let c = 2.0 * df.at(i, j);
                let second = [(1, 0), (0, 1), (1, 1), (1, -1)]
                    .iter()
                    .map(|&(a, b)| df.at_wrapped(ii + a, jj + b) + df.at_wrapped(ii - a, jj - b) - c)
                    .fold(f64::INFINITY, f64::min);
                (second < 0.0).then_some([i, j])
            })
        })
        .collect();
    SepPointSet { n, tau, nodes }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CircleReport {
    pub delta: f64,
    pub band_nodes: usize,
    pub detected: usize,
    /// `d_H(detected, {p} ∪ cut-locus sample)`.
    pub d_h: f64,
    pub detected_to_reference: f64,
    pub reference_to_detected: f64,
}

/// Compares the singular set of `d(S(p, δ), ·)` with `{p} ∪ Cut(p)`.
///
/// `inj` is an injectivity-radius estimate; `δ` must lie in `(0, inj)`.
#[allow(clippy::too_many_arguments)]
pub fn circle_cut_check(
    field: &MetricField,
    p: ChartPoint,
    delta: f64,
    inj: f64,
    grid: Grid,
    k: usize,
    tau: f64,
    opts: &CutOptions,
) -> Result<CircleReport> {
    if !(delta > 0.0 && delta < inj) {
        return Err(Error::InvalidArgument(format!(
            "circle radius {delta} must lie in (0, {inj:.4}) (injectivity radius estimate)"
        )));
    }
    let (df, sample) = compute_cut_locus(field, p, k, grid, opts)?;
    let (_, hi) = field.eigenvalue_range(64);
    let band = grid.h() * hi.sqrt();
    let mut init = vec![f64::INFINITY; df.values.len()];
    let mut frozen = vec![false; df.values.len()];
    for (idx, &u) in df.values.iter().enumerate() {
        if (u - delta).abs() <= band {
            init[idx] = (u - delta).abs();
            frozen[idx] = true;
        }
    }
    let ds = solve_from_band(field, grid, init, &frozen, p, &SolveOptions::default())?;
    let sep = detect_separating_points(&ds, field, tau, &frozen);
    if sep.is_empty() {
        return Err(Error::EmptySample("no separating nodes detected for the circle".into()));
    }
    let detected = sep.points();
    let mut reference = sample.points();
    reference.push(p);
    let a = crate::hausdorff::directed_hausdorff_by(&detected, &reference, ChartPoint::flat_distance)?;
    let b = crate::hausdorff::directed_hausdorff_by(&reference, &detected, ChartPoint::flat_distance)?;
    Ok(CircleReport {
        delta,
        band_nodes: frozen.iter().filter(|&&f| f).count(),
        detected: detected.len(),
        d_h: a.max(b),
        detected_to_reference: a,
        reference_to_detected: b,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GlobalEstimates {
    pub inj: f64,
    pub diam: f64,
    /// Largest grid distance value over the sources, an upper-biased cross-check.
    pub diam_grid: f64,
    pub sources: usize,
}

/// Golden-section search for an extremum of `f` on `[a, b]`.
fn golden(f: impl Fn(f64) -> Result<f64>, mut a: f64, mut b: f64, maximize: bool) -> Result<f64> {
    let r = 0.5 * (5f64.sqrt() - 1.0);
    let sign = if maximize { -1.0 } else { 1.0 };
    let mut c = b - r * (b - a);
    let mut d = a + r * (b - a);
    let (mut fc, mut fd) = (sign * f(c)?, sign * f(d)?);
    let mut best = fc.min(fd);
    for _ in 0..30 {
        if fc < fd {
            b = d;
            d = c;
            fd = fc;
            c = b - r * (b - a);
            fc = sign * f(c)?;
        } else {
            a = c;
            c = d;
            fc = fd;
            d = a + r * (b - a);
            fd = sign * f(d)?;
        }
        best = best.min(fc).min(fd);
    }
    Ok(sign * best)
}

/// Extreme cut time over all directions from one source, sharpening the best
/// sampled direction by golden-section search between its neighbours.
fn extreme_cut_time(search: &CutSearch, k: usize, maximize: bool) -> Result<f64> {
    let thetas: Vec<f64> = (0..k).map(|i| TAU * i as f64 / k as f64).collect();
    let rhos: Vec<f64> = thetas
        .par_iter()
        .enumerate()
        .map(|(i, &th)| {
            search.cut_time_at(th).map(|c| c.rho).map_err(|e| Error::Direction {
                index: i,
                source: Box::new(e),
            })
        })
        .collect::<Result<_>>()?;
    let pick = |a: &(usize, &f64), b: &(usize, &f64)| a.1.total_cmp(b.1);
    let (i, &r) = if maximize {
        rhos.iter().enumerate().max_by(pick)
    } else {
        rhos.iter().enumerate().min_by(pick)
    }
    .expect("at least four directions");
    let dth = TAU / k as f64;
    let refined = golden(|th| Ok(search.cut_time_at(th)?.rho), thetas[i] - dth, thetas[i] + dth, maximize)?;
    Ok(if maximize { r.max(refined) } else { r.min(refined) })
}

/// `Inj` and `Diam` from an `m × m` grid of sources.
///
/// `Inj` is the smallest and `Diam` the largest cut time found; every point at
/// maximal distance from `p` is a cut point of `p`.
pub fn global_estimates(field: &MetricField, m: usize, k: usize, grid: Grid, opts: &CutOptions) -> Result<GlobalEstimates> {
    if m < 1 {
        return Err(Error::InvalidArgument("need at least one source".into()));
    }
    let sources: Vec<ChartPoint> = (0..m * m)
        .map(|s| ChartPoint::new(TAU * (s / m) as f64 / m as f64, TAU * (s % m) as f64 / m as f64))
        .collect();
    let per: Vec<(f64, f64, f64)> = sources
        .par_iter()
        .map(|&p| {
            let df = solve_distance(field, p, grid)?;
            let search = CutSearch::new(field, &df, opts)?;
            Ok((
                extreme_cut_time(&search, k, false)?,
                extreme_cut_time(&search, k, true)?,
                df.max_value(),
            ))
        })
        .collect::<Result<_>>()?;
    Ok(GlobalEstimates {
        inj: per.iter().map(|x| x.0).fold(f64::INFINITY, f64::min),
        diam: per.iter().map(|x| x.1).fold(0.0, f64::max),
        diam_grid: per.iter().map(|x| x.2).fold(0.0, f64::max),
        sources: sources.len(),
    })
}

pub fn injectivity_radius(field: &MetricField, m: usize, k: usize, grid: Grid, opts: &CutOptions) -> Result<f64> {
    if m < 2 {
        return Err(Error::InvalidArgument(format!("need an m x m source grid with m >= 2, got {m}")));
    }
    Ok(global_estimates(field, m, k, grid, opts)?.inj)
}

pub fn diameter(field: &MetricField, m: usize, k: usize, grid: Grid, opts: &CutOptions) -> Result<f64> {
    if m < 2 {
        return Err(Error::InvalidArgument(format!("need an m x m source grid with m >= 2, got {m}")));
    }
    Ok(global_estimates(field, m, k, grid, opts)?.diam)
}

/// Checks the defining property of each cut time against the grid field:
/// `|d(γ(ρ)) − ρ| ≤ tol` and `d(γ(ρ + 5 tol)) < ρ + 4 tol`.
///
/// Returns the worst violation of the first inequality and the number of
/// entries failing the second.
pub fn defining_equality(field: &MetricField, df: &DistanceField, sample: &CutLocusSample, tol: f64) -> Result<(f64, usize)> {
    let step = step_for_grid(df.h());
    let mut worst: f64 = 0.0;
    let mut failures = 0;
    for e in &sample.entries {
        let v = unit_direction(field, sample.source, e.theta)?;
        let s = GeodesicState::from_tangent(&v);
        let at = geodesic_flow(field, &s, e.rho, step)?;
        worst = worst.max((point_distance(df, at.point()) - e.rho).abs());
        let past = e.rho + 5.0 * tol;
        let beyond = geodesic_flow(field, &at, 5.0 * tol, step)?;
        if point_distance(df, beyond.point()) >= past - tol {
            failures += 1;
        }
    }
    Ok((worst, failures))
}

/// Flat distance from `q` to the cross `{u = a} ∪ {v = b}`.
pub fn distance_to_cross(q: ChartPoint, a: f64, b: f64) -> f64 {
    wrapped_delta(q.u(), a).abs().min(wrapped_delta(q.v(), b).abs())
}

/// `d_H` between a sample and the flat cut locus (the cross through `p + (π, π)`).
pub fn cross_hausdorff(points: &[ChartPoint], p: ChartPoint, spacing: f64) -> Result<f64> {
    let m = (TAU / spacing).ceil() as usize;
    let (a, b) = (p.u() + PI, p.v() + PI);
    let cross: Vec<ChartPoint> = (0..m)
        .flat_map(|k| {
            let s = k as f64 * TAU / m as f64;
            [ChartPoint::new(a, s), ChartPoint::new(s, b)]
        })
        .collect();
    hausdorff_points(points, &cross)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::metric::Sym2;
    use crate::oracle::LatticeOracle;
    use std::f64::consts::SQRT_2;

    fn flat_df(n: usize) -> DistanceField {
        solve_distance(&MetricField::flat(), ChartPoint::origin(), Grid::new(n).unwrap()).unwrap()
    }

    #[test]
    fn flat_axis_and_diagonal() {
        let g = MetricField::flat();
        let df = flat_df(64);
        let s = CutSearch::new(&g, &df, &CutOptions::default()).unwrap();
        let a = s.cut_time_at(0.0).unwrap();
        assert!(a.refined);
        assert!((a.rho - PI).abs() < 1e-6, "{a:?}");
        let d = s.cut_time_at(PI / 4.0).unwrap();
        assert!((d.rho - PI * SQRT_2).abs() < 1e-6, "{d:?}");
    }

    #[test]
    fn coarse_only_is_within_tolerance() {
        let g = MetricField::flat();
        let df = flat_df(64);
        let opts = CutOptions {
            refine: false,
            ..CutOptions::default()
        };
        let s = CutSearch::new(&g, &df, &opts).unwrap();
        let c = s.cut_time_at(0.3).unwrap();
        assert!(!c.refined);
        let exact = LatticeOracle::new(Sym2::IDENTITY).unwrap().cut_time_at_angle(0.3).unwrap();
        assert!((c.rho - exact).abs() <= s.tol_cut() + 2.0 * df.h());
    }

    #[test]
    fn scaled_metric_cut_times() {
        for c in [0.5, 2.0] {
            let g = MetricField::constant(c, 0.0, c);
            let df = solve_distance(&g, ChartPoint::origin(), Grid::new(64).unwrap()).unwrap();
            let s = CutSearch::new(&g, &df, &CutOptions::default()).unwrap();
            for th in [0.0, 0.4, 1.0] {
                let base = LatticeOracle::new(Sym2::IDENTITY).unwrap().cut_time_at_angle(th).unwrap();
                assert!((s.cut_time_at(th).unwrap().rho - c.sqrt() * base).abs() < 1e-6);
            }
        }
    }

    #[test]
    fn sheared_metric_matches_oracle() {
        let gm = Sym2::new(1.0, 0.4, 1.0);
        let g = MetricField::Constant(gm);
        let df = solve_distance(&g, ChartPoint::new(0.5, 0.2), Grid::new(64).unwrap()).unwrap();
        let o = LatticeOracle::new(gm).unwrap();
        let sample = cut_locus(&g, &df, 32, &CutOptions::default()).unwrap();
        for e in &sample.entries {
            let exact = o.cut_time_at_angle(e.theta).unwrap();
            assert!((e.rho - exact).abs() < 1e-6, "theta {} got {} vs {}", e.theta, e.rho, exact);
        }
    }

    #[test]
    fn densified_flat_sample_hugs_the_cross() {
        let g = MetricField::flat();
        let df = flat_df(64);
        let sample = cut_locus(&g, &df, 64, &CutOptions::default()).unwrap();
        assert!(sample.entries.len() > 64);
        let d = cross_hausdorff(&sample.points(), ChartPoint::origin(), df.h() / 2.0).unwrap();
        assert!(d <= 2.0 * df.h(), "d_H {d}");
        for w in sample.entries.windows(2) {
            assert!(w[0].theta < w[1].theta);
        }
    }

    #[test]
    fn defining_equality_holds() {
        let g = MetricField::flat();
        let df = flat_df(64);
        let sample = cut_locus(&g, &df, 32, &CutOptions::default()).unwrap();
        let (worst, fails) = defining_equality(&g, &df, &sample, sample.tol_cut).unwrap();
        assert!(worst <= sample.tol_cut, "worst {worst} vs {}", sample.tol_cut);
        assert_eq!(fails, 0);
    }

    #[test]
    fn sep_flags_cross_only() {
        let g = MetricField::flat();
        let df = flat_df(64);
        let ex = point_source_exclusion(&df, &g);
        let sep = detect_separating_points(&df, &g, DEFAULT_TAU_SEP, &ex);
        assert!(!sep.is_empty());
        for q in sep.points() {
            assert!(distance_to_cross(q, PI, PI) <= 2.0 * df.h(), "{q}");
            assert!(q.flat_distance(&ChartPoint::origin()) >= PI / 2.0);
        }
    }

    #[test]
    fn no_cut_detected_is_reported() {
        let g = MetricField::flat();
        let df = flat_df(32);
        let opts = CutOptions {
            t_max: Some(1.0),
            ..CutOptions::default()
        };
        let s = CutSearch::new(&g, &df, &opts).unwrap();
        assert!(matches!(s.cut_time_at(0.0), Err(Error::NoCutDetected { .. })));
    }

    #[test]
    fn circle_radius_guard() {
        let g = MetricField::flat();
        let grid = Grid::new(32).unwrap();
        let o = CutOptions::default();
        assert!(circle_cut_check(&g, ChartPoint::origin(), 3.5, PI, grid, 16, 0.2, &o).is_err());
        assert!(circle_cut_check(&g, ChartPoint::origin(), 0.0, PI, grid, 16, 0.2, &o).is_err());
    }

    #[test]
    fn flat_global_estimates() {
        let est = global_estimates(&MetricField::flat(), 2, 32, Grid::new(32).unwrap(), &CutOptions::default()).unwrap();
        assert!((est.inj - PI).abs() < 1e-6, "{est:?}");
        assert!((est.diam - PI * SQRT_2).abs() < 1e-6, "{est:?}");
        assert!(est.diam >= est.inj);
    }

    #[test]
    fn sample_json_round_trip() {
        let g = MetricField::flat();
        let df = flat_df(32);
        let s = cut_locus(&g, &df, 8, &CutOptions::default()).unwrap();
        let back = CutLocusSample::from_json_str(&s.to_json().unwrap()).unwrap();
        assert_eq!(back, s);
        assert!(s.to_json().unwrap().contains("\"K\": 8"));
    }
}
