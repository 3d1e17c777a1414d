//! Hyperbolic-plane primitives in the Poincaré disc.
//!
//! Every query about a ray from the origin `o` is reduced to the pair
//! `(t, Δ)`: the hyperbolic distance of the other object from `o` and its
//! angular offset from the ray direction. Rotations are exact in that form,
//! so no Möbius arithmetic happens in the hot loops.
//!
//! Formulas are written in cancellation-free forms. The most important one
//! is the "haversine" form of the law of cosines,
//!
//! ```text
//! cosh d = cosh(t - s) + 2 sinh t sinh s sin²(Δ/2)
//! ```
//!
//! which stays accurate when `d` is tiny and `t`, `s` are large.

use std::f64::consts::{FRAC_PI_2, PI, TAU};

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::error::{domain, Result};

/// Largest amount by which an inverse-hyperbolic argument may be clamped.
const CLAMP_SLACK: f64 = 1e-14;

/// `acosh(1 + x)` without the cancellation of `acosh` near 1.
pub fn acosh1p(x: f64) -> f64 {
    let x = if x < 0.0 && x > -CLAMP_SLACK { 0.0 } else { x };
    (x + (x * (x + 2.0)).sqrt()).ln_1p()
}

/// `acosh(x)` with round-off below 1 absorbed.
pub fn acosh_clamped(x: f64) -> f64 {
    acosh1p(x - 1.0)
}

/// `atanh(x)` in log form, with |x| clamped to 1 when it overshoots by round-off.
pub fn atanh_clamped(x: f64) -> f64 {
    let x = if x.abs() > 1.0 && x.abs() < 1.0 + CLAMP_SLACK {
        x.signum()
    } else {
        x
    };
    0.5 * (2.0 * x / (1.0 - x)).ln_1p()
}

/// Reduce an angle to `[0, 2π)`.
pub fn wrap_angle(a: f64) -> f64 {
    let w = a.rem_euclid(TAU);
    // rem_euclid can round up to exactly TAU for tiny negative inputs
    if w >= TAU {
        0.0
    } else {
        w
    }
}

/// Absolute angular separation of two directions, in `[0, π]`.
pub fn angular_separation(a: f64, b: f64) -> f64 {
    let d = wrap_angle(a - b);
    if d > PI {
        TAU - d
    } else {
        d
    }
}

/// A point of the hyperbolic plane, stored in disc coordinates.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct HPoint {
    u: f64,
    v: f64,
}

impl HPoint {
    pub const ORIGIN: HPoint = HPoint { u: 0.0, v: 0.0 };

    /// Point with disc coordinates `(u, v)`; fails unless `u² + v² < 1`.
    pub fn from_disc(u: f64, v: f64) -> Result<Self> {
        let r2 = u * u + v * v;
        if !(r2 < 1.0) {
            return Err(domain(format!("({u}, {v}) is not inside the unit disc")));
        }
        Ok(HPoint { u, v })
    }

    /// Point at hyperbolic distance `t` from `o` in direction `phi`.
    pub fn from_polar(t: f64, phi: f64) -> Result<Self> {
        if !(t >= 0.0) || !t.is_finite() {
            return Err(domain(format!("radial distance {t} must be finite and >= 0")));
        }
        let rho = (0.5 * t).tanh();
        if rho >= 1.0 {
            return Err(domain(format!("radial distance {t} is not representable")));
        }
        Ok(HPoint {
            u: rho * phi.cos(),
            v: rho * phi.sin(),
        })
    }

    pub fn disc(&self) -> (f64, f64) {
        (self.u, self.v)
    }

    /// Euclidean radius in the disc.
    pub fn disc_radius(&self) -> f64 {
        self.u.hypot(self.v)
    }

    /// Hyperbolic polar form `(t, φ)` with `φ ∈ [0, 2π)`.
    pub fn polar(&self) -> (f64, f64) {
        let t = 2.0 * atanh_clamped(self.disc_radius());
        let phi = if t == 0.0 {
            0.0
        } else {
            wrap_angle(self.v.atan2(self.u))
        };
        (t, phi)
    }

    fn complex(&self) -> Complex64 {
        Complex64::new(self.u, self.v)
    }

    fn from_complex(z: Complex64) -> Result<Self> {
        HPoint::from_disc(z.re, z.im)
    }
}

/// Geodesic segment from `o` in direction `theta`; `length = None` is the full ray.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Ray {
    pub theta: f64,
    pub length: Option<f64>,
}

impl Ray {
    pub fn segment(theta: f64, length: f64) -> Result<Self> {
        if !(length >= 0.0) {
            return Err(domain(format!("ray length {length} must be >= 0")));
        }
        Ok(Ray {
            theta: wrap_angle(theta),
            length: Some(length),
        })
    }

    pub fn unbounded(theta: f64) -> Self {
        Ray {
            theta: wrap_angle(theta),
            length: None,
        }
    }

    /// Point at arclength `s` along the ray.
    pub fn point_at(&self, s: f64) -> Result<HPoint> {
        HPoint::from_polar(s, self.theta)
    }
}

/// A closed hyperbolic ball, the obstacle of the Boolean model.
///
/// Stored in polar form around `o`; `t` is the centre distance and `phi` its direction.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct BallObstacle {
    pub t: f64,
    pub phi: f64,
    pub radius: f64,
}

impl BallObstacle {
    pub fn center(&self) -> Result<HPoint> {
        HPoint::from_polar(self.t, self.phi)
    }
}

/// A geodesic of the line process, identified by its closest point to `o`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GeodesicObstacle {
    /// Hyperbolic distance from `o` to the foot point.
    pub p: f64,
    /// Direction of the foot point.
    pub phi: f64,
}

/// Hyperbolic distance `2 artanh |(a − b)/(1 − ā b)|`.
pub fn dist(a: HPoint, b: HPoint) -> f64 {
    let (za, zb) = (a.complex(), b.complex());
    let q = (za - zb).norm() / (Complex64::new(1.0, 0.0) - za.conj() * zb).norm();
    2.0 * atanh_clamped(q.min(1.0))
}

/// The Möbius isometry `φ_x(z) = (z − x)/(1 − x̄ z)` sending `x` to `o`.
pub fn mobius_to_origin(x: HPoint, z: HPoint) -> Result<HPoint> {
    let (zx, zz) = (x.complex(), z.complex());
    HPoint::from_complex((zz - zx) / (Complex64::new(1.0, 0.0) - zx.conj() * zz))
}

/// Distance between points at polar `(t, Δ)` and `(s, 0)`.
pub fn polar_distance(t: f64, delta: f64, s: f64) -> f64 {
    let half = 0.5 * (t - s);
    let sh = half.sinh();
    let sd = (0.5 * delta).sin();
    acosh1p(2.0 * sh * sh + 2.0 * t.sinh() * s.sinh() * sd * sd)
}

/// Distance from the point at polar `(t, Δ)` to the segment `L_r(0)`.
///
/// `Δ` is taken modulo 2π and folded to `[0, π]`.
pub fn dist_point_to_ray(t: f64, delta: f64, r: f64) -> f64 {
    let delta = angular_separation(delta, 0.0);
    if t == 0.0 || delta >= FRAC_PI_2 {
        return t;
    }
    if delta == 0.0 {
        return if t <= r { 0.0 } else { t - r };
    }
    let foot = atanh_clamped(t.tanh() * delta.cos());
    if foot <= r {
        (t.sinh() * delta.sin()).asinh()
    } else {
        polar_distance(t, delta, r)
    }
}

/// Arclength interval on which the ray in direction 0 lies inside the ball
/// of radius `radius` centred at polar `(t, Δ)`.
///
/// The interval is clipped below at 0; `None` when the ray misses the ball.
pub fn ball_hit_interval(t: f64, delta: f64, radius: f64) -> Option<(f64, f64)> {
    let delta = angular_separation(delta, 0.0);
    if t == 0.0 {
        return Some((0.0, radius));
    }
    let sh = t.sinh();
    let sin_d = delta.sin();
    let m = (1.0 + sh * sh * sin_d * sin_d).sqrt();
    let cr = radius.cosh();
    if cr < m {
        return None;
    }
    let (s2, c2) = (0.5 * delta).sin_cos();
    let e = (-t).exp();
    // ψ: arclength of the foot of the perpendicular from the centre
    let psi = 0.5 * ((e + 2.0 * sh * c2 * c2) / (e + 2.0 * sh * s2 * s2)).ln();
    let reach = acosh_clamped(cr / m);
    let (s_in, s_out) = (psi - reach, psi + reach);
    if t <= radius {
        return Some((0.0, s_out.max(0.0)));
    }
    if s_out < 0.0 {
        return None;
    }
    Some((s_in.max(0.0), s_out))
}

/// Half-width of the set of directions whose length-`r` ray meets the closed
/// ball of radius `radius` at centre distance `t`.
///
/// Returns `None` when no direction is blocked and `π` when the ball covers `o`.
pub fn ball_shadow_halfwidth(t: f64, radius: f64, r: f64) -> Option<f64> {
    if t <= radius {
        return Some(PI);
    }
    if t - radius > r {
        return None;
    }
    // Tangent direction of the full ray; its touching point is the foot of
    // the perpendicular, at arclength acosh(cosh t / cosh R).
    let s = radius.sinh() / t.sinh();
    let tangent = if s >= 1.0 { FRAC_PI_2 } else { s.asin() };
    let foot = acosh_clamped(t.cosh() / radius.cosh());
    if foot <= r {
        return Some(tangent);
    }
    // Otherwise the segment end point is what touches the ball.
    let num = 2.0 * (0.5 * (radius + t - r)).sinh() * (0.5 * (radius - t + r)).sinh();
    let x = num / (2.0 * t.sinh() * r.sinh());
    if x < 0.0 {
        return None;
    }
    Some(2.0 * x.sqrt().min(1.0).asin())
}

/// Half-width `arccos(tanh p / tanh r)` of the directions whose length-`r`
/// ray crosses the geodesic with foot point distance `p`; 0 when `p ≥ r`.
pub fn line_hit_halfwidth(p: f64, r: f64) -> f64 {
    if p >= r {
        return 0.0;
    }
    // sin²(w/2) = sinh(r − p) / (2 cosh p sinh r)
    let x = (r - p).sinh() / (2.0 * p.cosh() * r.sinh());
    2.0 * x.sqrt().min(1.0).asin()
}

/// Arclength at which the ray at angular offset `Δ` from the foot point
/// direction crosses the geodesic with foot distance `p`, if it does.
pub fn line_crossing(p: f64, delta: f64) -> Option<f64> {
    let delta = angular_separation(delta, 0.0);
    if delta >= FRAC_PI_2 {
        return None;
    }
    let (c, th) = (delta.cos(), p.tanh());
    // cos Δ − tanh p, accurate when both are close to 1
    let e = (-2.0 * p).exp();
    let gap = 2.0 * e / (1.0 + e) - 2.0 * (0.5 * delta).sin().powi(2);
    if gap <= 0.0 {
        return None;
    }
    Some(0.5 * ((c + th) / gap).ln())
}
