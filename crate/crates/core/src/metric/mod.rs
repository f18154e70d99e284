//! Riemannian metrics on the torus chart.
//!
//! A [`MetricField`] assigns an SPD coefficient matrix `g_ij(u, v)` to every
//! chart point. Derivatives up to order two are exact for the closed-form
//! kinds and fourth-order finite differences for [`GridMetric`].

mod catalog;
mod family;
mod grid;
mod tensor;

use std::f64::consts::TAU;
use std::fmt;
use std::sync::Arc;

pub use catalog::{parse_metric, parse_tensor};
pub use family::{make_family, Perturbation, PerturbationFamily};
pub use grid::{GridMetric, GRID_CSV_HEADER};
pub use tensor::{MetricJet, ScalarJet, Sym2, TensorField, TrigPoly, TrigTerm};

use crate::chart::{ChartPoint, TangentVector};
use crate::error::{Error, Result};

/// Default resolution of the grid on which C^r distances are evaluated.
pub const CR_DISTANCE_GRID: usize = 256;

#[derive(Debug, Clone, PartialEq)]
pub enum MetricField {
    /// Constant coefficients.
    Constant(Sym2),
    /// `e^{2φ(u,v)} · base` with a trigonometric exponent `φ`.
    Conformal { base: Sym2, exponent: TrigPoly },
    /// Sampled coefficients.
    Grid(Arc<GridMetric>),
    /// `base + scale · direction`.
    Perturbed {
        base: Box<MetricField>,
        direction: TensorField,
        scale: f64,
    },
    /// `factor · base`.
    Scaled { base: Box<MetricField>, factor: f64 },
}

impl MetricField {
    pub fn flat() -> Self {
        MetricField::Constant(Sym2::IDENTITY)
    }

    pub fn constant(a11: f64, a12: f64, a22: f64) -> Self {
        MetricField::Constant(Sym2::new(a11, a12, a22))
    }

    /// `e^{2·amp·cos(ku·u + kv·v)} · I`.
    pub fn conformal(amp: f64, ku: i32, kv: i32) -> Self {
        MetricField::Conformal {
            base: Sym2::IDENTITY,
            exponent: TrigPoly::cosine(amp, ku, kv),
        }
    }

    pub fn scaled(&self, factor: f64) -> Self {
        match self {
            MetricField::Constant(g) => MetricField::Constant(g.scale(factor)),
            other => MetricField::Scaled {
                base: Box::new(other.clone()),
                factor,
            },
        }
    }

    /// Unchecked jet evaluation at raw (possibly unwrapped) chart coordinates.
    pub fn jet_at(&self, u: f64, v: f64, order: u8) -> MetricJet {
        match self {
            MetricField::Constant(g) => MetricJet::constant(*g, order),
            MetricField::Conformal { base, exponent } => {
                MetricJet::conformal(base, &exponent.jet(u, v, order), order)
            }
            MetricField::Grid(grid) => grid.jet(crate::chart::wrap(u), crate::chart::wrap(v), order),
            MetricField::Perturbed {
                base,
                direction,
                scale,
            } => base
                .jet_at(u, v, order)
                .add(&direction.jet(u, v, order).scale(*scale)),
            MetricField::Scaled { base, factor } => base.jet_at(u, v, order).scale(*factor),
        }
    }

    /// Unchecked order-0 coefficients.
    #[inline]
    pub fn tensor_at(&self, u: f64, v: f64) -> Sym2 {
        match self {
            MetricField::Constant(g) => *g,
            _ => self.jet_at(u, v, 0).value,
        }
    }

    /// Constant coefficients, if the field has them.
    pub fn as_constant(&self) -> Option<Sym2> {
        match self {
            MetricField::Constant(g) => Some(*g),
            MetricField::Conformal { base, exponent } if exponent.is_constant() => {
                Some(base.scale((2.0 * exponent.value(0.0, 0.0)).exp()))
            }
            MetricField::Perturbed {
                base,
                direction,
                scale,
            } => {
                let b = base.as_constant()?;
                let d = direction.as_constant()?;
                Some(b.add(&d.scale(*scale)))
            }
            MetricField::Scaled { base, factor } => base.as_constant().map(|g| g.scale(*factor)),
            _ => None,
        }
    }

    /// Smallest and largest eigenvalue of `g` over an `n×n` node grid.
    pub fn eigenvalue_range(&self, n: usize) -> (f64, f64) {
        if let Some(g) = self.as_constant() {
            return g.eigenvalues();
        }
        let h = TAU / n as f64;
        let mut lo = f64::INFINITY;
        let mut hi = f64::NEG_INFINITY;
        for i in 0..n {
            for j in 0..n {
                let (a, b) = self.tensor_at(i as f64 * h, j as f64 * h).eigenvalues();
                lo = lo.min(a);
                hi = hi.max(b);
            }
        }
        (lo, hi)
    }

    /// Checks positive definiteness on an `n×n` node grid.
    pub fn validate_on_grid(&self, n: usize) -> Result<()> {
        let h = TAU / n as f64;
        let nn = if self.as_constant().is_some() { 1 } else { n };
        for i in 0..nn {
            for j in 0..nn {
                eval_metric(self, ChartPoint::new(i as f64 * h, j as f64 * h), 0)?;
            }
        }
        Ok(())
    }
}

impl fmt::Display for MetricField {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            MetricField::Constant(g) if *g == Sym2::IDENTITY => write!(f, "flat"),
            MetricField::Constant(g) => write!(f, "constant:[{},{},{}]", g.a11, g.a12, g.a22),
            MetricField::Conformal { base, exponent } => {
                write!(f, "conformal:{{")?;
                for (k, t) in exponent.terms.iter().enumerate() {
                    if k > 0 {
                        write!(f, ";")?;
                    }
                    write!(f, "amp={},ku={},kv={}", t.cos, t.ku, t.kv)?;
                    if t.sin != 0.0 {
                        write!(f, ",sin={}", t.sin)?;
                    }
                }
                write!(f, "}}")?;
                if *base != Sym2::IDENTITY {
                    write!(f, "*[{},{},{}]", base.a11, base.a12, base.a22)?;
                }
                Ok(())
            }
            MetricField::Grid(g) => write!(f, "grid:N={}", g.n()),
            MetricField::Perturbed { base, scale, .. } => write!(f, "{base}+{scale}*direction"),
            MetricField::Scaled { base, factor } => write!(f, "{factor}*({base})"),
        }
    }
}

/// Metric coefficients and derivatives at `x`, rejecting degenerate values.
pub fn eval_metric(field: &MetricField, x: ChartPoint, order: u8) -> Result<MetricJet> {
    if order > 2 {
        return Err(Error::InvalidArgument(format!("derivative order {order} > 2")));
    }
    let jet = field.jet_at(x.u(), x.v(), order);
    check_spd(&jet.value, x.u(), x.v())?;
    Ok(jet)
}

#[inline]
pub(crate) fn check_spd(g: &Sym2, u: f64, v: f64) -> Result<()> {
    if g.is_spd() {
        Ok(())
    } else {
        Err(Error::DegenerateMetric {
            u,
            v,
            g11: g.a11,
            det: g.det(),
        })
    }
}

/// `‖w‖_g = sqrt(g(w, w))` at `w.base`.
pub fn metric_norm(field: &MetricField, w: &TangentVector) -> Result<f64> {
    let g = eval_metric(field, w.base, 0)?.value;
    Ok(g.quad(w.components()).max(0.0).sqrt())
}

/// Length of the piecewise-linear path through `path`, using the metric at segment midpoints.
pub fn curve_length(field: &MetricField, path: &[ChartPoint]) -> Result<f64> {
    if path.len() < 2 {
        return Err(Error::InvalidArgument("a path needs at least two points".into()));
    }
    let mut total = 0.0;
    for (k, w) in path.windows(2).enumerate() {
        let d = w[0].delta_to(&w[1]);
        if d[0].abs() >= std::f64::consts::PI - 1e-12 || d[1].abs() >= std::f64::consts::PI - 1e-12 {
            return Err(Error::AmbiguousWrap { index: k, next: k + 1 });
        }
        let mid = w[0].offset(0.5 * d[0], 0.5 * d[1]);
        let g = eval_metric(field, mid, 0)?.value;
        total += g.quad(d).sqrt();
    }
    Ok(total)
}

/// Christoffel symbols of the second kind, `gamma[k][i][j] = Γ^k_ij`.
#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct Christoffel {
    pub gamma: [[[f64; 2]; 2]; 2],
}

impl Christoffel {
    /// From an order ≥ 1 jet; `jet.value` must be invertible.
    pub fn from_jet(jet: &MetricJet) -> Self {
        let ginv = jet.value.inverse();
        // first kind: Γ_{l,ij} = ½(∂_i g_jl + ∂_j g_il − ∂_l g_ij)
        let mut first = [[[0.0; 2]; 2]; 2];
        for l in 0..2 {
            for i in 0..2 {
                for j in 0..2 {
                    first[l][i][j] =
                        0.5 * (jet.d(i).at(j, l) + jet.d(j).at(i, l) - jet.d(l).at(i, j));
                }
            }
        }
        let mut gamma = [[[0.0; 2]; 2]; 2];
        for k in 0..2 {
            for i in 0..2 {
                for j in 0..2 {
                    gamma[k][i][j] = ginv.at(k, 0) * first[0][i][j] + ginv.at(k, 1) * first[1][i][j];
                }
            }
        }
        Christoffel { gamma }
    }

    /// Geodesic acceleration `-Γ^k_ij ẋ^i ẋ^j`.
    #[inline]
    pub fn acceleration(&self, vel: [f64; 2]) -> [f64; 2] {
        let mut a = [0.0; 2];
        for (k, ak) in a.iter_mut().enumerate() {
            let g = &self.gamma[k];
            *ak = -(g[0][0] * vel[0] * vel[0]
                + 2.0 * g[0][1] * vel[0] * vel[1]
                + g[1][1] * vel[1] * vel[1]);
        }
        a
    }

    pub fn max_abs(&self) -> f64 {
        self.gamma
            .iter()
            .flatten()
            .flatten()
            .fold(0.0f64, |m, x| m.max(x.abs()))
    }
}

pub fn christoffel(field: &MetricField, x: ChartPoint) -> Result<Christoffel> {
    let jet = eval_metric(field, x, 1)?;
    Ok(Christoffel::from_jet(&jet))
}

/// Max over grid nodes, coefficients and multi-indices `|β| ≤ r` of `|∂_β(gA − gB)_ij|`.
pub fn cr_distance(a: &MetricField, b: &MetricField, r: u8, n: usize) -> f64 {
    let r = r.min(2);
    if let (Some(ga), Some(gb)) = (a.as_constant(), b.as_constant()) {
        return ga.sub(&gb).max_abs();
    }
    let h = TAU / n as f64;
    let mut worst = 0.0f64;
    for i in 0..n {
        for j in 0..n {
            let (u, v) = (i as f64 * h, j as f64 * h);
            let ja = a.jet_at(u, v, r);
            let jb = b.jet_at(u, v, r);
            for (x, y) in ja.blocks(r).iter().zip(jb.blocks(r).iter()) {
                worst = worst.max(x.sub(y).max_abs());
            }
        }
    }
    worst
}

/// Smallest `ε` with `(1−ε)·gA ≤ gB ≤ (1+ε)·gA` on an `n×n` base grid and `directions` unit vectors.
pub fn c0_envelope(a: &MetricField, b: &MetricField, n: usize, directions: usize) -> f64 {
    let dirs: Vec<[f64; 2]> = (0..directions)
        .map(|k| {
            let th = TAU * k as f64 / directions as f64;
            [th.cos(), th.sin()]
        })
        .collect();
    let nn = if a.as_constant().is_some() && b.as_constant().is_some() {
        1
    } else {
        n
    };
    let h = TAU / nn as f64;
    let mut eps = 0.0f64;
    for i in 0..nn {
        for j in 0..nn {
            let (u, v) = (i as f64 * h, j as f64 * h);
            let ga = a.tensor_at(u, v);
            let gb = b.tensor_at(u, v);
            for w in &dirs {
                eps = eps.max((gb.quad(*w) / ga.quad(*w) - 1.0).abs());
            }
        }
    }
    eps
}
