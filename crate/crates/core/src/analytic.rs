//! Closed forms the simulations are checked against.

use std::f64::consts::{FRAC_PI_2, PI, TAU};

use serde::{Deserialize, Serialize};

use crate::error::{domain, Result};
use crate::hypgeo::acosh1p;
use crate::sampler::RadiusLaw;

/// Tolerance of the quadrature behind [`shadow_b`].
pub const QUAD_TOL: f64 = 1e-10;

/// Intensity and radius law of a Boolean model.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ModelParams {
    pub lambda: f64,
    pub law: RadiusLaw,
}

impl ModelParams {
    pub fn new(lambda: f64, law: RadiusLaw) -> Result<Self> {
        if !(lambda > 0.0 && lambda.is_finite()) {
            return Err(domain(format!("intensity {lambda} must be finite and > 0")));
        }
        law.validate()?;
        Ok(ModelParams { lambda, law })
    }

    /// Parameters with the intensity chosen to give decay rate `alpha`.
    pub fn with_alpha(alpha: f64, law: RadiusLaw) -> Result<Self> {
        let lambda = alpha * lambda_gv(&law);
        Self::new(lambda, law)
    }

    pub fn alpha(&self) -> f64 {
        alpha(self.lambda, &self.law)
    }

    pub fn vacancy(&self, r: f64) -> f64 {
        vacancy_f(r, self.lambda, &self.law)
    }
}

/// `f(r) = P[L_r(0) ⊂ 𝒲] = exp(−λ (2π E[cosh R − 1] + 2r E[sinh R]))`.
pub fn vacancy_f(r: f64, lambda: f64, law: &RadiusLaw) -> f64 {
    (-lambda * (TAU * law.mean_cosh_m1() + 2.0 * r * law.mean_sinh())).exp()
}

/// Decay rate `α = 2λ E[sinh R]` of the single-ray vacancy probability.
pub fn alpha(lambda: f64, law: &RadiusLaw) -> f64 {
    2.0 * lambda * law.mean_sinh()
}

/// Intensity at which `α = 1`.
pub fn lambda_gv(law: &RadiusLaw) -> f64 {
    1.0 / (2.0 * law.mean_sinh())
}

/// Constant radius at which intensity `lambda` is critical.
pub fn critical_radius(lambda: f64) -> f64 {
    (1.0 / (2.0 * lambda)).asinh()
}

/// Distance beyond which the length-`t` segments in directions 0 and `θ`
/// are more than `2C` apart.
pub fn t_theta(theta: f64, c: f64) -> Result<f64> {
    if !(theta > 0.0 && theta <= FRAC_PI_2) {
        return Err(domain(format!("angle {theta} must lie in (0, π/2]")));
    }
    // arcosh √((cosh 4C − cos 2θ)/(1 − cos 2θ)) = arsinh(sinh 2C / sin θ)
    Ok(((2.0 * c).sinh() / theta.sin()).asinh())
}

/// Angular half-width `h(C, r)` within which two length-`r` rays can both
/// be within `2C` of each other at their ends; `π/2` once `cosh² r < cosh 4C`.
pub fn h_of(c: f64, r: f64) -> f64 {
    let x = (2.0 * c).sinh() / r.sinh();
    // cosh² r ≥ cosh 4C  ⇔  sinh² r ≥ 2 sinh² 2C
    if !(2.0 * x * x <= 1.0) {
        return FRAC_PI_2;
    }
    // ½ arccos(1 − 2x²) = arcsin x
    x.asin()
}

/// `P[0 ∈ Y_r] = exp(−2λr)` for the line process.
pub fn line_vacancy(lambda: f64, r: f64) -> f64 {
    (-2.0 * lambda * r).exp()
}

/// Perimeter of the triangle spanned by `o` and the ends of the length-`r`
/// segments in directions 0 and `θ`.
pub fn triangle_perimeter(r: f64, theta: f64) -> f64 {
    // cosh² r (1 − cos θ) + cos θ = 1 + 2 sinh² r sin²(θ/2)
    let s = r.sinh() * (0.5 * theta).sin();
    2.0 * r + acosh1p(2.0 * s * s)
}

/// `P[0 ∈ Y_r, θ ∈ Y_r] = exp(−λ per(T_{r,θ}))` for the line process.
pub fn line_joint(lambda: f64, r: f64, theta: f64) -> f64 {
    (-lambda * triangle_perimeter(r, theta)).exp()
}

/// Euclidean radius `α(r̄)` within which a ball of Euclidean-disc radius
/// parameter `R̄` meets the disc `B(0, r̄)`.
pub fn alpha_bar(r_bar: f64, big_r_bar: f64) -> f64 {
    // tanh((r + R)/2) by the addition formula
    (r_bar + big_r_bar) / (1.0 + r_bar * big_r_bar)
}

/// Euclidean radius `β(r̄)` up to which the full tangent shadow formula holds.
pub fn beta_bar(r_bar: f64, big_r_bar: f64) -> f64 {
    let (a, b) = (big_r_bar * big_r_bar, r_bar * r_bar);
    ((a + b) / (a * b + 1.0)).sqrt()
}

/// Mean number `2πΛ = 4πλ α²/(1 − α²)` of balls meeting `B(0, r)`.
pub fn mean_count(lambda: f64, r: f64, radius: f64) -> f64 {
    let a = alpha_bar((0.5 * r).tanh(), (0.5 * radius).tanh());
    4.0 * PI * lambda * a * a / (1.0 - a * a)
}

/// `b = E[R̃]/π`, where `R̃ = (1 − X²)/X` is the small-ball limit of the
/// shadow half-width in radians divided by `R̄`, and `X` has density
/// proportional to `ρ/(1 − ρ²)²` on `[0, r̄]`.
pub fn shadow_b(r_bar: f64) -> Result<f64> {
    if !(r_bar > 0.0 && r_bar < 1.0) {
        return Err(domain(format!("r̄ = {r_bar} must lie in (0, 1)")));
    }
    use quadrature::double_exponential::integrate;
    // (1 − ρ²)/ρ · ρ/(1 − ρ²)² = 1/(1 − ρ²)
    let num = integrate(|x| 1.0 / (1.0 - x * x), 0.0, r_bar, QUAD_TOL).integral;
    let den = integrate(|x| x / (1.0 - x * x).powi(2), 0.0, r_bar, QUAD_TOL).integral;
    Ok(num / den / PI)
}

/// `t` with `exp(−e^{−t}) = p`.
pub fn gumbel_level(p: f64) -> Result<f64> {
    if !(p > 0.0 && p < 1.0) {
        return Err(domain(format!("probability {p} must lie in (0, 1)")));
    }
    Ok(-(1.0 / p).ln().ln())
}

/// Intensity `λ(R)` that drives `P[𝔙 ≤ r]` to `p` as the radius `R → 0`.
pub fn janson_intensity(radius: f64, r: f64, p: f64) -> Result<f64> {
    if !(radius > 0.0 && radius < r) {
        return Err(domain(format!("radius {radius} must lie in (0, {r})")));
    }
    let t = gumbel_level(p)?;
    let (rb, bb) = ((0.5 * r).tanh(), (0.5 * radius).tanh());
    let b = shadow_b(rb)?;
    let a2 = alpha_bar(rb, bb).powi(2);
    let scale = 2.0 * PI * b * bb;
    let bracket = -bb.ln() + (-bb.ln()).ln() + t - b.ln();
    let lambda = (1.0 - a2) / (2.0 * a2) * bracket / scale;
    if !(lambda > 0.0) {
        return Err(domain(format!("radius {radius} is too large: λ(R) = {lambda}")));
    }
    Ok(lambda)
}

/// Left side of the covering condition, `2πbR̄Λ + log(bR̄) − log(−log(bR̄))`.
pub fn janson_condition(lambda: f64, radius: f64, r: f64) -> Result<f64> {
    let (rb, bb) = ((0.5 * r).tanh(), (0.5 * radius).tanh());
    let b = shadow_b(rb)?;
    let big_lambda = mean_count(lambda, r, radius) / TAU;
    let eps = b * bb;
    Ok(TAU * eps * big_lambda + eps.ln() - (-eps.ln()).ln())
}

/// Predicted scale of the visibility statistics away from criticality.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Prediction {
    /// `α > 1`: mean total visibility and mean star area scale as `1/(α − 1)`.
    Supercritical { scale: f64 },
    /// `α < 1`: the probability of seeing to infinity scales as `1 − α`.
    Subcritical { scale: f64 },
}

impl Prediction {
    pub fn scale(&self) -> f64 {
        match self {
            Prediction::Supercritical { scale } | Prediction::Subcritical { scale } => *scale,
        }
    }
}

pub fn mean_visibility_prediction(alpha: f64) -> Result<Prediction> {
    if !(alpha > 0.0) || alpha == 1.0 || !alpha.is_finite() {
        return Err(domain(format!(
            "α = {alpha} must be positive and different from 1"
        )));
    }
    Ok(if alpha > 1.0 {
        Prediction::Supercritical {
            scale: 1.0 / (alpha - 1.0),
        }
    } else {
        Prediction::Subcritical { scale: 1.0 - alpha }
    })
}
