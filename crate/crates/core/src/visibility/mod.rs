//! What the origin sees through one obstacle configuration.
//!
//! The functions here work on materialized scenes and compute every quantity
//! exactly from the full obstacle list. [`multiscale`] answers the same
//! questions directly on an infinite lazily sampled field, touching only the
//! cells that can still matter; the Monte Carlo drivers use it.

pub mod multiscale;

use std::f64::consts::{PI, TAU};

use serde::{Deserialize, Serialize};

use crate::circlearcs::ArcSet;
use crate::error::{Error, Result};
use crate::hypgeo::{
    ball_hit_interval, ball_shadow_halfwidth, dist_point_to_ray, line_crossing, line_hit_halfwidth,
    BallObstacle, GeodesicObstacle,
};
use crate::sampler::{BooleanScene, LineScene};

/// The visible direction set at one probe length.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct VisibilityResult {
    pub r: f64,
    pub visible: ArcSet,
    pub y: f64,
    pub nonempty: bool,
}

/// Area of the visibility star, with a flag set when some ray reached `r_max`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct StarArea {
    pub area: f64,
    pub truncated: bool,
}

/// Directions `φ + Δ`, `|Δ| ≤ w`, blocked by `ball` at probe length `r`,
/// as `(φ, w)`; `w = 0` when the ball is out of reach.
pub fn shadow_arc(ball: &BallObstacle, r: f64) -> (f64, f64) {
    (
        ball.phi,
        ball_shadow_halfwidth(ball.t, ball.radius, r).unwrap_or(0.0),
    )
}

/// Same half-width as [`shadow_arc`], found by bisection on the monotone
/// map `Δ ↦ dist_point_to_ray(t, Δ, r)`.
pub fn shadow_halfwidth_bisection(ball: &BallObstacle, r: f64) -> f64 {
    let (t, radius) = (ball.t, ball.radius);
    if t <= radius {
        return PI;
    }
    if dist_point_to_ray(t, 0.0, r) > radius {
        return 0.0;
    }
    let (mut lo, mut hi) = (0.0f64, PI);
    while hi - lo > 1e-15 {
        let mid = 0.5 * (lo + hi);
        if mid <= lo || mid >= hi {
            break;
        }
        if dist_point_to_ray(t, mid, r) <= radius {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    lo
}

/// A scene the per-scene visibility functions can run on.
pub trait Scene {
    /// Probe length up to which the scene holds every relevant obstacle.
    fn exact_up_to(&self) -> f64;

    /// Union of all shadow arcs at probe length `r`.
    fn shadows(&self, r: f64) -> ArcSet;

    /// First-hit distance along direction `theta`, capped at `cap`.
    fn first_hit(&self, theta: f64, cap: f64) -> f64;

    fn check(&self, r: f64) -> Result<()> {
        let exact = self.exact_up_to();
        if r > exact {
            return Err(Error::WindowTooSmall {
                window: exact,
                required: r,
            });
        }
        Ok(())
    }
}

impl Scene for BooleanScene {
    fn exact_up_to(&self) -> f64 {
        self.window_radius - self.law.bound()
    }

    fn shadows(&self, r: f64) -> ArcSet {
        ArcSet::from_arcs(self.balls.iter().map(|b| shadow_arc(b, r)))
    }

    fn first_hit(&self, theta: f64, cap: f64) -> f64 {
        self.balls
            .iter()
            .filter_map(|b| ball_hit_interval(b.t, theta - b.phi, b.radius))
            .fold(cap, |m, (s, _)| m.min(s))
    }
}

impl Scene for LineScene {
    fn exact_up_to(&self) -> f64 {
        self.p_max
    }

    fn shadows(&self, r: f64) -> ArcSet {
        ArcSet::from_arcs(
            self.lines
                .iter()
                .map(|g: &GeodesicObstacle| (g.phi, line_hit_halfwidth(g.p, r))),
        )
    }

    fn first_hit(&self, theta: f64, cap: f64) -> f64 {
        self.lines
            .iter()
            .filter_map(|g| line_crossing(g.p, theta - g.phi))
            .fold(cap, f64::min)
    }
}

/// `Y_r`: directions whose length-`r` segment avoids every obstacle.
pub fn visible_set<S: Scene + ?Sized>(scene: &S, r: f64) -> Result<VisibilityResult> {
    scene.check(r)?;
    let shadows = scene.shadows(r);
    let visible = shadows.complement();
    let y = visible.measure();
    Ok(VisibilityResult {
        r,
        nonempty: !shadows.is_covered(),
        visible,
        y,
    })
}

/// `V(θ) ∧ r_max`.
pub fn direction_visibility<S: Scene + ?Sized>(scene: &S, theta: f64, r_max: f64) -> Result<f64> {
    scene.check(r_max)?;
    Ok(scene.first_hit(theta, r_max))
}

/// `𝔙 ∧ r_max` to within `tol`, by bisection on whether `Y_r` is nonempty.
pub fn total_visibility<S: Scene + ?Sized>(scene: &S, r_max: f64, tol: f64) -> Result<f64> {
    scene.check(r_max)?;
    let nonempty = |r: f64| !scene.shadows(r).is_covered();
    Ok(bisect_visibility(nonempty, r_max, tol))
}

pub(crate) fn bisect_visibility(mut nonempty: impl FnMut(f64) -> bool, r_max: f64, tol: f64) -> f64 {
    if nonempty(r_max) {
        return r_max;
    }
    let (mut lo, mut hi) = (0.0, r_max);
    while hi - lo > tol {
        let mid = 0.5 * (lo + hi);
        if nonempty(mid) {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    lo
}

/// Area of the visibility star truncated at `r_max`, by the midpoint rule
/// over `n_grid` equally spaced directions.
pub fn star_area<S: Scene + ?Sized>(scene: &S, r_max: f64, n_grid: usize) -> Result<StarArea> {
    scene.check(r_max)?;
    Ok(star_from_reach(
        |theta| scene.first_hit(theta, r_max),
        r_max,
        n_grid,
    ))
}

pub(crate) fn star_from_reach(mut reach: impl FnMut(f64) -> f64, r_max: f64, n_grid: usize) -> StarArea {
    let n = n_grid.max(1);
    let step = TAU / n as f64;
    let mut area = 0.0;
    let mut truncated = false;
    for i in 0..n {
        let v = reach(i as f64 * step);
        truncated |= v >= r_max;
        area += 2.0 * (0.5 * v).sinh().powi(2);
    }
    StarArea {
        area: area * step,
        truncated,
    }
}

/// `V′(θ) ∧ r_max`: how far from `o` the ray in direction `theta` stays
/// inside the occupied set; 0 when `o` is vacant.
pub fn covered_direction_visibility(scene: &BooleanScene, theta: f64, r_max: f64) -> Result<f64> {
    scene.check(r_max)?;
    let mut chords: Vec<(f64, f64)> = scene
        .balls
        .iter()
        .filter_map(|b| ball_hit_interval(b.t, theta - b.phi, b.radius))
        .collect();
    Ok(covered_prefix(&mut chords).min(r_max))
}

/// End of the initial run of `[0, ·]` covered by the union of `chords`.
pub(crate) fn covered_prefix(chords: &mut [(f64, f64)]) -> f64 {
    chords.sort_by(|a, b| a.0.total_cmp(&b.0));
    let mut front = 0.0;
    for &(s, e) in chords.iter() {
        if s > front {
            break;
        }
        front = f64::max(front, e);
    }
    front
}

/// Grid maximum of [`covered_direction_visibility`]; never exceeds the true
/// supremum over all directions.
pub fn covered_total_visibility_grid(scene: &BooleanScene, r_max: f64, n_grid: usize) -> Result<f64> {
    scene.check(r_max)?;
    let n = n_grid.max(1);
    let mut best = 0.0f64;
    for i in 0..n {
        let theta = i as f64 * TAU / n as f64;
        best = best.max(covered_direction_visibility(scene, theta, r_max)?);
    }
    Ok(best)
}
