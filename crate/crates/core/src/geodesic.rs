//! Geodesics, the exponential map and the geodesic flow.
//!
//! The geodesic equation `ẍ^k + Γ^k_ij ẋ^i ẋ^j = 0` is integrated with the
//! classical fourth-order Runge–Kutta scheme at a fixed step. Positions are
//! carried in lifted (unwrapped) chart coordinates so that the lattice class
//! of a geodesic is available to callers; wrap with [`GeodesicState::point`].

use std::fmt::Write as _;

use crate::chart::{ChartPoint, TangentVector};
use crate::error::{Error, Result};
use crate::metric::{check_spd, Christoffel, MetricField};

/// Default integration step in time units.
pub const DEFAULT_STEP: f64 = 1e-2;
/// Default bound on `|‖γ̇(T)‖ − ‖γ̇(0)‖|`, relative to `max(1, ‖γ̇(0)‖)`.
pub const DEFAULT_SPEED_TOL: f64 = 1e-7;

/// Step used alongside an eikonal grid of spacing `h`.
pub fn step_for_grid(h: f64) -> f64 {
    DEFAULT_STEP.min(0.5 * h)
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GeodesicState {
    /// Lifted chart coordinates (not wrapped).
    pub position: [f64; 2],
    pub velocity: [f64; 2],
}

impl GeodesicState {
    pub fn new(p: ChartPoint, velocity: [f64; 2]) -> Self {
        GeodesicState {
            position: p.coords(),
            velocity,
        }
    }

    pub fn from_tangent(v: &TangentVector) -> Self {
        GeodesicState::new(v.base, v.components())
    }

    pub fn point(&self) -> ChartPoint {
        ChartPoint::new(self.position[0], self.position[1])
    }

    pub fn speed(&self, field: &MetricField) -> f64 {
        field
            .tensor_at(self.position[0], self.position[1])
            .quad(self.velocity)
            .max(0.0)
            .sqrt()
    }

    pub fn reversed(&self) -> Self {
        GeodesicState {
            position: self.position,
            velocity: [-self.velocity[0], -self.velocity[1]],
        }
    }
}

#[inline]
fn acceleration(field: &MetricField, pos: [f64; 2], vel: [f64; 2]) -> Result<[f64; 2]> {
    if let MetricField::Constant(_) = field {
        return Ok([0.0, 0.0]);
    }
    let jet = field.jet_at(pos[0], pos[1], 1);
    check_spd(&jet.value, pos[0], pos[1])?;
    Ok(Christoffel::from_jet(&jet).acceleration(vel))
}

/// One classical RK4 step of size `dt` (may be negative).
pub fn rk4_step(field: &MetricField, s: &GeodesicState, dt: f64) -> Result<GeodesicState> {
    let (x, v) = (s.position, s.velocity);
    let add = |a: [f64; 2], b: [f64; 2], c: f64| [a[0] + c * b[0], a[1] + c * b[1]];
    let a1 = acceleration(field, x, v)?;
    let (x2, v2) = (add(x, v, 0.5 * dt), add(v, a1, 0.5 * dt));
    let a2 = acceleration(field, x2, v2)?;
    let (x3, v3) = (add(x, v2, 0.5 * dt), add(v, a2, 0.5 * dt));
    let a3 = acceleration(field, x3, v3)?;
    let (x4, v4) = (add(x, v3, dt), add(v, a3, dt));
    let a4 = acceleration(field, x4, v4)?;
    let w = dt / 6.0;
    Ok(GeodesicState {
        position: [
            x[0] + w * (v[0] + 2.0 * v2[0] + 2.0 * v3[0] + v4[0]),
            x[1] + w * (v[1] + 2.0 * v2[1] + 2.0 * v3[1] + v4[1]),
        ],
        velocity: [
            v[0] + w * (a1[0] + 2.0 * a2[0] + 2.0 * a3[0] + a4[0]),
            v[1] + w * (a1[1] + 2.0 * a2[1] + 2.0 * a3[1] + a4[1]),
        ],
    })
}

/// Time-`t` geodesic flow on `TM`, using `ceil(|t|/step)` equal RK4 steps.
pub fn geodesic_flow(field: &MetricField, state: &GeodesicState, t: f64, step: f64) -> Result<GeodesicState> {
    if t == 0.0 {
        return Ok(*state);
    }
    if let MetricField::Constant(_) = field {
        return Ok(GeodesicState {
            position: [
                state.position[0] + t * state.velocity[0],
                state.position[1] + t * state.velocity[1],
            ],
            velocity: state.velocity,
        });
    }
    let n = (t.abs() / step).ceil().max(1.0) as usize;
    let dt = t / n as f64;
    let mut s = *state;
    for _ in 0..n {
        s = rk4_step(field, &s, dt)?;
    }
    Ok(s)
}

/// Geodesic sampled at uniform times `t_k = k·dt`, `k = 0..=n`, `n·dt = total`.
#[derive(Debug, Clone)]
pub struct GeodesicPath {
    pub states: Vec<GeodesicState>,
    pub dt: f64,
    pub total: f64,
}

impl GeodesicPath {
    pub fn end(&self) -> &GeodesicState {
        self.states.last().expect("path holds at least one state")
    }

    pub fn points(&self) -> Vec<ChartPoint> {
        self.states.iter().map(GeodesicState::point).collect()
    }

    /// CSV with columns `t,u,v,du,dv` (positions wrapped).
    pub fn to_csv(&self) -> String {
        let mut out = String::from("t,u,v,du,dv\n");
        for (k, s) in self.states.iter().enumerate() {
            let p = s.point();
            let _ = writeln!(
                out,
                "{:?},{:?},{:?},{:?},{:?}",
                k as f64 * self.dt,
                p.u(),
                p.v(),
                s.velocity[0],
                s.velocity[1]
            );
        }
        out
    }
}

/// Integrates the geodesic with initial velocity `v` for time `total`.
///
/// Fails when the speed drifts by more than `speed_tol · max(1, ‖v‖)`.
pub fn integrate_geodesic(
    field: &MetricField,
    v: &TangentVector,
    total: f64,
    step: f64,
    speed_tol: f64,
) -> Result<GeodesicPath> {
    if !(total > 0.0 && step > 0.0) {
        return Err(Error::InvalidArgument(format!(
            "integration needs positive time and step, got T={total}, dt={step}"
        )));
    }
    let n = (total / step).ceil().max(1.0) as usize;
    let dt = total / n as f64;
    let mut s = GeodesicState::from_tangent(v);
    let speed0 = s.speed(field);
    let mut states = Vec::with_capacity(n + 1);
    states.push(s);
    for _ in 0..n {
        s = rk4_step(field, &s, dt)?;
        states.push(s);
    }
    let drift = (s.speed(field) - speed0).abs();
    let tol = speed_tol * speed0.max(1.0);
    if drift > tol {
        return Err(Error::SpeedDrift { drift, tol, step: dt });
    }
    Ok(GeodesicPath { states, dt, total })
}

/// `exp_p(v) = γ_v(1)`, integrated with arclength steps of at most `step`.
pub fn exp_map(field: &MetricField, v: &TangentVector, step: f64) -> Result<ChartPoint> {
    let s = GeodesicState::from_tangent(v);
    let speed = s.speed(field);
    if speed == 0.0 {
        return Ok(v.base);
    }
    Ok(geodesic_flow(field, &s, 1.0, step / speed.max(1.0))?.point())
}

/// Initial velocity `w` with `exp_p(w) = p + delta` (lifted), by Newton shooting
/// from `w = delta`. Meant for displacements well inside the injectivity radius.
pub fn log_map(field: &MetricField, p: ChartPoint, delta: [f64; 2]) -> Result<[f64; 2]> {
    let r = delta[0].hypot(delta[1]);
    log_map_with(field, p, delta, (r / 16.0).min(DEFAULT_STEP), 1e-13)
}

/// [`log_map`] with an explicit g-length step and relative residual tolerance.
/// Fails when the shooting stalls or runs away.
pub fn log_map_with(field: &MetricField, p: ChartPoint, delta: [f64; 2], step: f64, tol: f64) -> Result<[f64; 2]> {
    if field.as_constant().is_some() {
        return Ok(delta);
    }
    let r = delta[0].hypot(delta[1]);
    if r == 0.0 {
        return Ok(delta);
    }
    let shoot = |w: [f64; 2]| -> Result<[f64; 2]> {
        let s = GeodesicState::new(p, w);
        let speed = s.speed(field).max(1e-300);
        let e = geodesic_flow(field, &s, 1.0, step / speed)?;
        Ok([e.position[0] - p.u() - delta[0], e.position[1] - p.v() - delta[1]])
    };
    let mut w = delta;
    let (mut best, mut best_w) = (f64::INFINITY, w);
    let mut stalled = 0;
    // residual reachable with a finite-difference Jacobian; a stall below it is convergence
    let floor = tol.max(1e-9) * (1.0 + r);
    for _ in 0..20 {
        let f = shoot(w)?;
        let res = f[0].hypot(f[1]);
        if res < tol * (1.0 + r) {
            return Ok(w);
        }
        if res < best {
            best_w = w;
        }
        if res < 0.5 * best {
            stalled = 0;
        } else {
            stalled += 1;
            if stalled >= 3 {
                return fail_at(best.min(res), best_w, floor);
            }
        }
        best = best.min(res);
        let eps = 1e-7 * r;
        let fa = shoot([w[0] + eps, w[1]])?;
        let fb = shoot([w[0], w[1] + eps])?;
        let j = [
            [(fa[0] - f[0]) / eps, (fb[0] - f[0]) / eps],
            [(fa[1] - f[1]) / eps, (fb[1] - f[1]) / eps],
        ];
        let det = j[0][0] * j[1][1] - j[0][1] * j[1][0];
        if det.abs() < 1e-300 {
            return fail_at(best, best_w, floor);
        }
        let mut d = [
            (j[1][1] * f[0] - j[0][1] * f[1]) / det,
            (j[0][0] * f[1] - j[1][0] * f[0]) / det,
        ];
        // damped, since the integration cost grows with |w|
        let len = d[0].hypot(d[1]);
        if len > 0.5 * r {
            d = [d[0] * 0.5 * r / len, d[1] * 0.5 * r / len];
        }
        w = [w[0] - d[0], w[1] - d[1]];
        if !(w[0].hypot(w[1]) <= 8.0 * r) {
            return fail_at(best, best_w, floor);
        }
    }
    let f = shoot(w)?;
    if f[0].hypot(f[1]) < best {
        return fail_at(f[0].hypot(f[1]), w, floor);
    }
    fail_at(best, best_w, floor)
}

fn fail_at(res: f64, w: [f64; 2], floor: f64) -> Result<[f64; 2]> {
    if res < floor {
        Ok(w)
    } else {
        Err(Error::NoConvergence {
            iterations: 20,
            residual: res,
        })
    }
}

/// `v` rescaled to unit `g`-length at its base.
pub fn normalize(field: &MetricField, v: &TangentVector) -> Result<TangentVector> {
    let g = field.tensor_at(v.base.u(), v.base.v());
    check_spd(&g, v.base.u(), v.base.v())?;
    let n = g.quad(v.components()).sqrt();
    if !(n > 0.0) {
        return Err(Error::InvalidArgument("cannot normalize a zero vector".into()));
    }
    Ok(v.scaled(1.0 / n))
}

/// Unit vector at `p` in the Euclidean chart direction `theta`.
pub fn unit_direction(field: &MetricField, p: ChartPoint, theta: f64) -> Result<TangentVector> {
    normalize(field, &TangentVector::new(p, theta.cos(), theta.sin()))
}

/// `count` unit vectors at `p`, the g-normalizations of the chart directions `2πk/count`.
pub fn unit_directions(field: &MetricField, p: ChartPoint, count: usize) -> Result<Vec<TangentVector>> {
    if count < 4 {
        return Err(Error::InvalidArgument(format!("need at least 4 directions, got {count}")));
    }
    (0..count)
        .map(|k| unit_direction(field, p, std::f64::consts::TAU * k as f64 / count as f64))
        .collect()
}
