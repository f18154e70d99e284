//! Metrics sampled on a periodic `N×N` grid.
//!
//! Derivatives are fourth-order central differences with periodic wrap;
//! off-node evaluation uses periodic cubic Lagrange interpolation of each
//! coefficient table.

use std::f64::consts::TAU;
use std::fmt::Write as _;
use std::path::Path;

use super::tensor::{MetricJet, Sym2};
use crate::error::{Error, Result};

pub const GRID_CSV_HEADER: &str = "u_index,v_index,g11,g12,g22";

#[derive(Debug, Clone, PartialEq)]
pub struct GridMetric {
    n: usize,
    h: f64,
    value: Vec<Sym2>,
    du: Vec<Sym2>,
    dv: Vec<Sym2>,
    duu: Vec<Sym2>,
    duv: Vec<Sym2>,
    dvv: Vec<Sym2>,
}

fn fd1(t: &[Sym2], n: usize, h: f64, axis: usize) -> Vec<Sym2> {
    let mut out = vec![Sym2::ZERO; n * n];
    for i in 0..n {
        for j in 0..n {
            let at = |k: isize| {
                let (a, b) = if axis == 0 {
                    ((i as isize + k).rem_euclid(n as isize) as usize, j)
                } else {
                    (i, (j as isize + k).rem_euclid(n as isize) as usize)
                };
                t[a * n + b]
            };
            let s = at(-2)
                .sub(&at(-1).scale(8.0))
                .add(&at(1).scale(8.0))
                .sub(&at(2));
            out[i * n + j] = s.scale(1.0 / (12.0 * h));
        }
    }
    out
}

fn fd2(t: &[Sym2], n: usize, h: f64, axis: usize) -> Vec<Sym2> {
    let mut out = vec![Sym2::ZERO; n * n];
    for i in 0..n {
        for j in 0..n {
            let at = |k: isize| {
                let (a, b) = if axis == 0 {
                    ((i as isize + k).rem_euclid(n as isize) as usize, j)
                } else {
                    (i, (j as isize + k).rem_euclid(n as isize) as usize)
                };
                t[a * n + b]
            };
            let s = at(-2)
                .scale(-1.0)
                .add(&at(-1).scale(16.0))
                .sub(&at(0).scale(30.0))
                .add(&at(1).scale(16.0))
                .sub(&at(2));
            out[i * n + j] = s.scale(1.0 / (12.0 * h * h));
        }
    }
    out
}

/// Cubic Lagrange weights for nodes at offsets -1, 0, 1, 2 and fractional position `s ∈ [0,1)`.
#[inline]
fn cubic_weights(s: f64) -> [f64; 4] {
    [
        -s * (s - 1.0) * (s - 2.0) / 6.0,
        (s + 1.0) * (s - 1.0) * (s - 2.0) / 2.0,
        -(s + 1.0) * s * (s - 2.0) / 2.0,
        (s + 1.0) * s * (s - 1.0) / 6.0,
    ]
}

impl GridMetric {
    /// Builds a grid metric from row-major samples (`u` index outer).
    pub fn new(n: usize, value: Vec<Sym2>) -> Result<Self> {
        if n < 5 {
            return Err(Error::InvalidArgument(format!(
                "grid metric needs at least 5 nodes per axis, got {n}"
            )));
        }
        if value.len() != n * n {
            return Err(Error::InvalidArgument(format!(
                "grid metric expects {} samples, got {}",
                n * n,
                value.len()
            )));
        }
        let h = TAU / n as f64;
        for (k, g) in value.iter().enumerate() {
            if !g.is_spd() {
                return Err(Error::DegenerateMetric {
                    u: (k / n) as f64 * h,
                    v: (k % n) as f64 * h,
                    g11: g.a11,
                    det: g.det(),
                });
            }
        }
        let du = fd1(&value, n, h, 0);
        let dv = fd1(&value, n, h, 1);
        let duu = fd2(&value, n, h, 0);
        let dvv = fd2(&value, n, h, 1);
        let duv = fd1(&dv, n, h, 0);
        Ok(GridMetric {
            n,
            h,
            value,
            du,
            dv,
            duu,
            duv,
            dvv,
        })
    }

    /// Samples a closure at the grid nodes.
    pub fn sample(n: usize, f: impl Fn(f64, f64) -> Sym2) -> Result<Self> {
        let h = TAU / n as f64;
        let mut value = Vec::with_capacity(n * n);
        for i in 0..n {
            for j in 0..n {
                value.push(f(i as f64 * h, j as f64 * h));
            }
        }
        GridMetric::new(n, value)
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn node_value(&self, i: usize, j: usize) -> Sym2 {
        self.value[i * self.n + j]
    }

    pub fn jet(&self, u: f64, v: f64, order: u8) -> MetricJet {
        let n = self.n as isize;
        let (xu, xv) = (u / self.h, v / self.h);
        let (iu, iv) = (xu.floor(), xv.floor());
        let (wu, wv) = (cubic_weights(xu - iu), cubic_weights(xv - iv));
        let (iu, iv) = (iu as isize, iv as isize);
        let mut idx = [[0usize; 4]; 4];
        let mut w = [[0.0; 4]; 4];
        for a in 0..4 {
            let ia = (iu + a as isize - 1).rem_euclid(n) as usize;
            for b in 0..4 {
                let ib = (iv + b as isize - 1).rem_euclid(n) as usize;
                idx[a][b] = ia * self.n + ib;
                w[a][b] = wu[a] * wv[b];
            }
        }
        let interp = |t: &[Sym2]| {
            let mut s = Sym2::ZERO;
            for a in 0..4 {
                for b in 0..4 {
                    let g = &t[idx[a][b]];
                    let c = w[a][b];
                    s.a11 += c * g.a11;
                    s.a12 += c * g.a12;
                    s.a22 += c * g.a22;
                }
            }
            s
        };
        let mut jet = MetricJet::constant(interp(&self.value), order);
        if order >= 1 {
            jet.du = interp(&self.du);
            jet.dv = interp(&self.dv);
        }
        if order >= 2 {
            jet.duu = interp(&self.duu);
            jet.duv = interp(&self.duv);
            jet.dvv = interp(&self.dvv);
        }
        jet
    }

    pub fn to_csv(&self) -> String {
        let mut s = String::from(GRID_CSV_HEADER);
        s.push('\n');
        for i in 0..self.n {
            for j in 0..self.n {
                let g = self.node_value(i, j);
                let _ = writeln!(s, "{i},{j},{:?},{:?},{:?}", g.a11, g.a12, g.a22);
            }
        }
        s
    }

    /// Parses the coefficient CSV. `expected_n`, when given, must match the data.
    pub fn from_csv_str(text: &str, expected_n: Option<usize>) -> Result<Self> {
        let mut lines = text.lines().filter(|l| !l.trim().is_empty());
        let header = lines.next().ok_or_else(|| Error::parse("grid CSV", "empty file"))?;
        if header.trim() != GRID_CSV_HEADER {
            return Err(Error::parse(
                "grid CSV",
                format!("expected header '{GRID_CSV_HEADER}', found '{}'", header.trim()),
            ));
        }
        let mut rows = Vec::new();
        for (k, line) in lines.enumerate() {
            let fields: Vec<&str> = line.split(',').map(str::trim).collect();
            if fields.len() != 5 {
                return Err(Error::parse("grid CSV", format!("row {} has {} fields", k + 1, fields.len())));
            }
            let bad = |e: &dyn std::fmt::Display| Error::parse("grid CSV", format!("row {}: {e}", k + 1));
            let i: usize = fields[0].parse().map_err(|e| bad(&e))?;
            let j: usize = fields[1].parse().map_err(|e| bad(&e))?;
            let g: Vec<f64> = fields[2..]
                .iter()
                .map(|f| f.parse::<f64>())
                .collect::<std::result::Result<_, _>>()
                .map_err(|e| bad(&e))?;
            rows.push((i, j, Sym2::new(g[0], g[1], g[2])));
        }
        let n = (rows.len() as f64).sqrt().round() as usize;
        if n * n != rows.len() {
            return Err(Error::parse("grid CSV", format!("{} rows is not a square count", rows.len())));
        }
        if let Some(e) = expected_n {
            if e != n {
                return Err(Error::parse("grid CSV", format!("declared N = {e} but file holds N = {n}")));
            }
        }
        let mut value = vec![Sym2::ZERO; n * n];
        for (k, (i, j, g)) in rows.into_iter().enumerate() {
            if i * n + j != k {
                return Err(Error::parse(
                    "grid CSV",
                    format!("row {} has indices ({i},{j}); rows must be row-major", k + 1),
                ));
            }
            value[k] = g;
        }
        GridMetric::new(n, value)
    }

    pub fn from_csv_path(path: &Path, expected_n: Option<usize>) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        GridMetric::from_csv_str(&text, expected_n)
    }
}
