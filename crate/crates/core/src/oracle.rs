//! Exact ground truth for constant metrics via the lattice `2π·ℤ²`.
//!
//! For a constant SPD matrix `G` the torus is flat, `d(p, q)` is the shortest
//! `G`-length of `q − p + λ` over lattice vectors `λ`, the cut locus of `p`
//! is the boundary of the `G`-Voronoi cell of the lattice translated to `p`,
//! and the cut time in direction `v` is the exit time of `t·v` from that cell.

use std::f64::consts::TAU;

use crate::chart::ChartPoint;
use crate::error::{Error, Result};
use crate::metric::Sym2;

pub const DEFAULT_RADIUS: i32 = 3;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LatticeOracle {
    g: Sym2,
    radius: i32,
}

fn lattice_vectors(r: i32) -> impl Iterator<Item = [f64; 2]> {
    (-r..=r).flat_map(move |a| (-r..=r).map(move |b| [a as f64 * TAU, b as f64 * TAU]))
}

impl LatticeOracle {
    pub fn new(g: Sym2) -> Result<Self> {
        Self::with_radius(g, DEFAULT_RADIUS)
    }

    pub fn with_radius(g: Sym2, radius: i32) -> Result<Self> {
        if !g.is_spd() {
            return Err(Error::DegenerateMetric {
                u: 0.0,
                v: 0.0,
                g11: g.a11,
                det: g.det(),
            });
        }
        if radius < 1 {
            return Err(Error::InvalidArgument(format!("lattice radius must be positive, got {radius}")));
        }
        Ok(LatticeOracle { g, radius })
    }

    pub fn metric(&self) -> Sym2 {
        self.g
    }

    pub fn radius(&self) -> i32 {
        self.radius
    }

    fn distance_at(&self, d: [f64; 2], r: i32) -> f64 {
        lattice_vectors(r)
            .map(|l| self.g.quad([d[0] + l[0], d[1] + l[1]]))
            .fold(f64::INFINITY, f64::min)
            .sqrt()
    }

    /// `d_G(p, q)`, certified by comparing radius `R` with `R + 1`.
    pub fn distance(&self, p: ChartPoint, q: ChartPoint) -> Result<f64> {
        let d = p.delta_to(&q);
        let a = self.distance_at(d, self.radius);
        if a != self.distance_at(d, self.radius + 1) {
            return Err(Error::RadiusUnstable { radius: self.radius });
        }
        Ok(a)
    }

    /// `d_G` for a raw chart displacement, without certification.
    pub fn displacement_distance(&self, d: [f64; 2]) -> f64 {
        self.distance_at(d, self.radius)
    }

    fn cut_time_at(&self, v: [f64; 2], r: i32) -> f64 {
        let gv = self.g.mul_vec(v);
        lattice_vectors(r)
            .filter_map(|l| {
                let ip = gv[0] * l[0] + gv[1] * l[1];
                (ip > 0.0).then(|| self.g.quad(l) / (2.0 * ip))
            })
            .fold(f64::INFINITY, f64::min)
    }

    /// Exit time of `t·v` from the Voronoi cell, for a `G`-unit `v`.
    pub fn cut_time(&self, v: [f64; 2]) -> Result<f64> {
        let norm = self.g.quad(v).sqrt();
        if (norm - 1.0).abs() > 1e-9 {
            return Err(Error::InvalidArgument(format!("direction has G-norm {norm}, expected 1")));
        }
        let a = self.cut_time_at(v, self.radius);
        if a != self.cut_time_at(v, self.radius + 1) {
            return Err(Error::RadiusUnstable { radius: self.radius });
        }
        Ok(a)
    }

    /// Cut time for a chart direction, normalized to unit `G`-length first.
    pub fn cut_time_at_angle(&self, theta: f64) -> Result<f64> {
        let v = [theta.cos(), theta.sin()];
        let n = self.g.quad(v).sqrt();
        self.cut_time([v[0] / n, v[1] / n])
    }

    /// Half the shortest nonzero lattice vector.
    pub fn injectivity_radius(&self) -> f64 {
        lattice_vectors(self.radius)
            .filter(|l| l[0] != 0.0 || l[1] != 0.0)
            .map(|l| self.g.quad(l))
            .fold(f64::INFINITY, f64::min)
            .sqrt()
            / 2.0
    }

    /// Largest distance from the origin over the cell, attained at a vertex.
    pub fn diameter(&self) -> f64 {
        self.voronoi_cell()
            .iter()
            .map(|x| self.g.quad(*x))
            .fold(0.0, f64::max)
            .sqrt()
    }

    /// Vertices of the `G`-Voronoi cell of the origin, counter-clockwise.
    pub fn voronoi_cell(&self) -> Vec<[f64; 2]> {
        let big = (self.radius as f64 + 1.0) * TAU;
        let mut poly = vec![[-big, -big], [big, -big], [big, big], [-big, big]];
        for l in lattice_vectors(self.radius) {
            if l[0] == 0.0 && l[1] == 0.0 {
                continue;
            }
            let n = self.g.mul_vec(l);
            poly = clip(&poly, n, 0.5 * self.g.quad(l));
        }
        dedup_vertices(poly)
    }

    /// Number of lattice points (including the origin) `G`-nearest to `x`.
    pub fn nearest_count(&self, x: [f64; 2], rel_tol: f64) -> usize {
        let d: Vec<f64> = lattice_vectors(self.radius + 1)
            .map(|l| self.g.quad([x[0] - l[0], x[1] - l[1]]).sqrt())
            .collect();
        let best = d.iter().copied().fold(f64::INFINITY, f64::min);
        d.iter().filter(|&&x| x - best <= rel_tol * best.max(1.0)).count()
    }

    /// The cell boundary translated to `p`, in lifted chart coordinates.
    pub fn cut_locus_polygon(&self, p: ChartPoint) -> Vec<[f64; 2]> {
        self.voronoi_cell()
            .into_iter()
            .map(|x| [x[0] + p.u(), x[1] + p.v()])
            .collect()
    }

    /// Points along the translated cell boundary at chart spacing at most `spacing`, wrapped.
    pub fn cut_locus(&self, p: ChartPoint, spacing: f64) -> Vec<ChartPoint> {
        sample_polygon(&self.cut_locus_polygon(p), spacing)
    }
}

/// Keeps the part of a convex polygon where `x · n ≤ c`.
fn clip(poly: &[[f64; 2]], n: [f64; 2], c: f64) -> Vec<[f64; 2]> {
    let side = |x: &[f64; 2]| x[0] * n[0] + x[1] * n[1] - c;
    let mut out = Vec::with_capacity(poly.len() + 1);
    for k in 0..poly.len() {
        let a = poly[k];
        let b = poly[(k + 1) % poly.len()];
        let (sa, sb) = (side(&a), side(&b));
        if sa <= 0.0 {
            out.push(a);
        }
        if (sa < 0.0 && sb > 0.0) || (sa > 0.0 && sb < 0.0) {
            let t = sa / (sa - sb);
            out.push([a[0] + t * (b[0] - a[0]), a[1] + t * (b[1] - a[1])]);
        }
    }
    out
}

fn dedup_vertices(poly: Vec<[f64; 2]>) -> Vec<[f64; 2]> {
    let mut out: Vec<[f64; 2]> = Vec::with_capacity(poly.len());
    for x in poly {
        if out.last().is_none_or(|y| (x[0] - y[0]).hypot(x[1] - y[1]) > 1e-9) {
            out.push(x);
        }
    }
    while out.len() > 1 {
        let (f, l) = (out[0], out[out.len() - 1]);
        if (f[0] - l[0]).hypot(f[1] - l[1]) > 1e-9 {
            break;
        }
        out.pop();
    }
    out
}

/// Samples the closed polygon edges at chart spacing at most `spacing`.
pub fn sample_polygon(poly: &[[f64; 2]], spacing: f64) -> Vec<ChartPoint> {
    let mut out = Vec::new();
    for k in 0..poly.len() {
        let a = poly[k];
        let b = poly[(k + 1) % poly.len()];
        let len = (b[0] - a[0]).hypot(b[1] - a[1]);
        let m = (len / spacing).ceil().max(1.0) as usize;
        for s in 0..m {
            let t = s as f64 / m as f64;
            out.push(ChartPoint::new(a[0] + t * (b[0] - a[0]), a[1] + t * (b[1] - a[1])));
        }
    }
    out
}
