use serde::{Deserialize, Serialize};

/// Symmetric 2×2 matrix `[[a11, a12], [a12, a22]]`.
///
/// Used both for metric values (which must be SPD) and for their
/// derivatives and perturbation directions (which need not be).
#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct Sym2 {
    pub a11: f64,
    pub a12: f64,
    pub a22: f64,
}

impl Sym2 {
    pub const ZERO: Sym2 = Sym2 {
        a11: 0.0,
        a12: 0.0,
        a22: 0.0,
    };
    pub const IDENTITY: Sym2 = Sym2 {
        a11: 1.0,
        a12: 0.0,
        a22: 1.0,
    };

    pub const fn new(a11: f64, a12: f64, a22: f64) -> Self {
        Sym2 { a11, a12, a22 }
    }

    pub fn diag(a11: f64, a22: f64) -> Self {
        Sym2::new(a11, 0.0, a22)
    }

    pub fn scalar(c: f64) -> Self {
        Sym2::new(c, 0.0, c)
    }

    /// Component by index pair, `i, j ∈ {0, 1}`.
    #[inline]
    pub fn at(&self, i: usize, j: usize) -> f64 {
        match (i, j) {
            (0, 0) => self.a11,
            (1, 1) => self.a22,
            _ => self.a12,
        }
    }

    pub fn components(&self) -> [f64; 3] {
        [self.a11, self.a12, self.a22]
    }

    #[inline]
    pub fn det(&self) -> f64 {
        self.a11 * self.a22 - self.a12 * self.a12
    }

    #[inline]
    pub fn is_spd(&self) -> bool {
        self.a11 > 0.0 && self.det() > 0.0 && self.a11.is_finite() && self.a22.is_finite()
    }

    /// Inverse; caller guarantees `det != 0`.
    #[inline]
    pub fn inverse(&self) -> Sym2 {
        let d = self.det();
        Sym2::new(self.a22 / d, -self.a12 / d, self.a11 / d)
    }

    #[inline]
    pub fn quad(&self, w: [f64; 2]) -> f64 {
        self.a11 * w[0] * w[0] + 2.0 * self.a12 * w[0] * w[1] + self.a22 * w[1] * w[1]
    }

    #[inline]
    pub fn bilinear(&self, x: [f64; 2], y: [f64; 2]) -> f64 {
        self.a11 * x[0] * y[0] + self.a12 * (x[0] * y[1] + x[1] * y[0]) + self.a22 * x[1] * y[1]
    }

    #[inline]
    pub fn mul_vec(&self, w: [f64; 2]) -> [f64; 2] {
        [
            self.a11 * w[0] + self.a12 * w[1],
            self.a12 * w[0] + self.a22 * w[1],
        ]
    }

    /// Eigenvalues in ascending order.
    pub fn eigenvalues(&self) -> (f64, f64) {
        let m = 0.5 * (self.a11 + self.a22);
        let r = (0.25 * (self.a11 - self.a22).powi(2) + self.a12 * self.a12).sqrt();
        (m - r, m + r)
    }

    pub fn scale(&self, s: f64) -> Sym2 {
        Sym2::new(self.a11 * s, self.a12 * s, self.a22 * s)
    }

    pub fn add(&self, o: &Sym2) -> Sym2 {
        Sym2::new(self.a11 + o.a11, self.a12 + o.a12, self.a22 + o.a22)
    }

    pub fn sub(&self, o: &Sym2) -> Sym2 {
        Sym2::new(self.a11 - o.a11, self.a12 - o.a12, self.a22 - o.a22)
    }

    pub fn max_abs(&self) -> f64 {
        self.a11.abs().max(self.a12.abs()).max(self.a22.abs())
    }
}

/// Values of a scalar function and its partial derivatives up to order two.
#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct ScalarJet {
    pub f: f64,
    pub fu: f64,
    pub fv: f64,
    pub fuu: f64,
    pub fuv: f64,
    pub fvv: f64,
}

/// One term `c·cos(θ) + s·sin(θ)` with `θ = ku·u + kv·v`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TrigTerm {
    pub cos: f64,
    pub sin: f64,
    pub ku: i32,
    pub kv: i32,
}

/// Trigonometric polynomial in `(u, v)`; integer frequencies make it 2π-periodic.
#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
pub struct TrigPoly {
    pub terms: Vec<TrigTerm>,
}

impl TrigPoly {
    pub fn zero() -> Self {
        TrigPoly { terms: Vec::new() }
    }

    pub fn constant(c: f64) -> Self {
        TrigPoly {
            terms: vec![TrigTerm {
                cos: c,
                sin: 0.0,
                ku: 0,
                kv: 0,
            }],
        }
    }

    pub fn cosine(amp: f64, ku: i32, kv: i32) -> Self {
        TrigPoly {
            terms: vec![TrigTerm {
                cos: amp,
                sin: 0.0,
                ku,
                kv,
            }],
        }
    }

    pub fn sine(amp: f64, ku: i32, kv: i32) -> Self {
        TrigPoly {
            terms: vec![TrigTerm {
                cos: 0.0,
                sin: amp,
                ku,
                kv,
            }],
        }
    }

    pub fn scaled(&self, s: f64) -> Self {
        TrigPoly {
            terms: self
                .terms
                .iter()
                .map(|t| TrigTerm {
                    cos: t.cos * s,
                    sin: t.sin * s,
                    ..*t
                })
                .collect(),
        }
    }

    pub fn is_zero(&self) -> bool {
        self.terms.iter().all(|t| t.cos == 0.0 && t.sin == 0.0)
    }

    /// True when every term has zero frequency.
    pub fn is_constant(&self) -> bool {
        self.terms.iter().all(|t| (t.ku == 0 && t.kv == 0) || (t.cos == 0.0 && t.sin == 0.0))
    }

    pub fn value(&self, u: f64, v: f64) -> f64 {
        self.terms
            .iter()
            .map(|t| {
                let th = t.ku as f64 * u + t.kv as f64 * v;
                t.cos * th.cos() + t.sin * th.sin()
            })
            .sum()
    }

    pub fn jet(&self, u: f64, v: f64, order: u8) -> ScalarJet {
        let mut j = ScalarJet::default();
        for t in &self.terms {
            let (ku, kv) = (t.ku as f64, t.kv as f64);
            let (s, c) = (ku * u + kv * v).sin_cos();
            let f = t.cos * c + t.sin * s;
            j.f += f;
            if order >= 1 {
                let g = -t.cos * s + t.sin * c;
                j.fu += ku * g;
                j.fv += kv * g;
            }
            if order >= 2 {
                j.fuu -= ku * ku * f;
                j.fuv -= ku * kv * f;
                j.fvv -= kv * kv * f;
            }
        }
        j
    }
}

/// Metric coefficients and their partial derivatives up to `order`.
///
/// Entries beyond `order` are zero.
#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct MetricJet {
    pub order: u8,
    pub value: Sym2,
    pub du: Sym2,
    pub dv: Sym2,
    pub duu: Sym2,
    pub duv: Sym2,
    pub dvv: Sym2,
}

impl MetricJet {
    pub fn constant(value: Sym2, order: u8) -> Self {
        MetricJet {
            order,
            value,
            ..Default::default()
        }
    }

    /// The six blocks in the order value, ∂u, ∂v, ∂uu, ∂uv, ∂vv, truncated to `order`.
    pub fn blocks(&self, order: u8) -> Vec<Sym2> {
        let mut out = vec![self.value];
        if order >= 1 {
            out.extend([self.du, self.dv]);
        }
        if order >= 2 {
            out.extend([self.duu, self.duv, self.dvv]);
        }
        out
    }

    /// First derivative along coordinate `k`.
    #[inline]
    pub fn d(&self, k: usize) -> &Sym2 {
        if k == 0 {
            &self.du
        } else {
            &self.dv
        }
    }

    pub fn add(&self, o: &MetricJet) -> MetricJet {
        MetricJet {
            order: self.order.min(o.order),
            value: self.value.add(&o.value),
            du: self.du.add(&o.du),
            dv: self.dv.add(&o.dv),
            duu: self.duu.add(&o.duu),
            duv: self.duv.add(&o.duv),
            dvv: self.dvv.add(&o.dvv),
        }
    }

    pub fn scale(&self, s: f64) -> MetricJet {
        MetricJet {
            order: self.order,
            value: self.value.scale(s),
            du: self.du.scale(s),
            dv: self.dv.scale(s),
            duu: self.duu.scale(s),
            duv: self.duv.scale(s),
            dvv: self.dvv.scale(s),
        }
    }

    /// Jet of `e^{2φ}·base` for a constant `base`.
    pub fn conformal(base: &Sym2, phi: &ScalarJet, order: u8) -> MetricJet {
        let s = (2.0 * phi.f).exp();
        let mut j = MetricJet::constant(base.scale(s), order);
        if order >= 1 {
            j.du = base.scale(2.0 * s * phi.fu);
            j.dv = base.scale(2.0 * s * phi.fv);
        }
        if order >= 2 {
            j.duu = base.scale(2.0 * s * (phi.fuu + 2.0 * phi.fu * phi.fu));
            j.duv = base.scale(2.0 * s * (phi.fuv + 2.0 * phi.fu * phi.fv));
            j.dvv = base.scale(2.0 * s * (phi.fvv + 2.0 * phi.fv * phi.fv));
        }
        j
    }

    fn from_components(c: [ScalarJet; 3], order: u8) -> MetricJet {
        let pick = |f: fn(&ScalarJet) -> f64| Sym2::new(f(&c[0]), f(&c[1]), f(&c[2]));
        MetricJet {
            order,
            value: pick(|j| j.f),
            du: pick(|j| j.fu),
            dv: pick(|j| j.fv),
            duu: pick(|j| j.fuu),
            duv: pick(|j| j.fuv),
            dvv: pick(|j| j.fvv),
        }
    }
}

/// Symmetric (not necessarily definite) tensor field used as a perturbation direction.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum TensorField {
    Constant(Sym2),
    Trig {
        a11: TrigPoly,
        a12: TrigPoly,
        a22: TrigPoly,
    },
}

impl TensorField {
    pub fn zero() -> Self {
        TensorField::Constant(Sym2::ZERO)
    }

    pub fn jet(&self, u: f64, v: f64, order: u8) -> MetricJet {
        match self {
            TensorField::Constant(s) => MetricJet::constant(*s, order),
            TensorField::Trig { a11, a12, a22 } => MetricJet::from_components(
                [a11.jet(u, v, order), a12.jet(u, v, order), a22.jet(u, v, order)],
                order,
            ),
        }
    }

    pub fn as_constant(&self) -> Option<Sym2> {
        match self {
            TensorField::Constant(s) => Some(*s),
            TensorField::Trig { a11, a12, a22 } => {
                if a11.is_constant() && a12.is_constant() && a22.is_constant() {
                    Some(Sym2::new(a11.value(0.0, 0.0), a12.value(0.0, 0.0), a22.value(0.0, 0.0)))
                } else {
                    None
                }
            }
        }
    }

    pub fn is_zero(&self) -> bool {
        match self {
            TensorField::Constant(s) => *s == Sym2::ZERO,
            TensorField::Trig { a11, a12, a22 } => a11.is_zero() && a12.is_zero() && a22.is_zero(),
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn eigenvalues_of_shear() {
        let (lo, hi) = Sym2::new(1.0, 0.3, 1.0).eigenvalues();
        assert!((lo - 0.7).abs() < 1e-15);
        assert!((hi - 1.3).abs() < 1e-15);
    }

    #[test]
    fn trig_jet_matches_finite_differences() {
        let p = TrigPoly {
            terms: vec![
                TrigTerm { cos: 0.3, sin: -0.2, ku: 1, kv: 2 },
                TrigTerm { cos: 0.1, sin: 0.05, ku: -3, kv: 1 },
            ],
        };
        let (u, v) = (0.7, 2.1);
        let j = p.jet(u, v, 2);
        let e = 1e-4;
        let f = |a: f64, b: f64| p.value(a, b);
        let fu = (f(u + e, v) - f(u - e, v)) / (2.0 * e);
        let fv = (f(u, v + e) - f(u, v - e)) / (2.0 * e);
        let fuu = (f(u + e, v) - 2.0 * f(u, v) + f(u - e, v)) / (e * e);
        let fuv = (f(u + e, v + e) - f(u + e, v - e) - f(u - e, v + e) + f(u - e, v - e)) / (4.0 * e * e);
        assert!((j.fu - fu).abs() < 1e-7);
        assert!((j.fv - fv).abs() < 1e-7);
        assert!((j.fuu - fuu).abs() < 1e-5);
        assert!((j.fuv - fuv).abs() < 1e-5);
    }
}
