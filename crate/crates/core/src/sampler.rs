//! Poisson sampling of the ball and line obstacle processes.
//!
//! Both processes are laid out on a fixed multiscale grid of cells. Band `k`
//! covers radial coordinates `[k ln 2, (k + 1) ln 2)` and is split into
//! `2^(k+2)` equal angular sectors, so every cell carries O(λ) expected
//! obstacles. The content of a cell is a pure function of
//! `(seed, replicate, band, sector)`: the stream for it is keyed by hashing
//! that tuple. A scene is therefore an infinite, lazily evaluated object.
//! Queries touch only the cells they need, a finite window is the
//! restriction of the same field, and enlarging a window never changes the
//! obstacles already inside it.

use std::f64::consts::{LN_2, TAU};

use ethnum::U256;
use rand::{Rng, RngCore};
use rand_distr::{Distribution, Poisson};
use rand_pcg::Pcg64Mcg;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::hypgeo::{
    acosh1p, ball_hit_interval, ball_shadow_halfwidth, line_crossing, line_hit_halfwidth, BallObstacle,
    GeodesicObstacle,
};

/// Radial width of one band.
pub const BAND_WIDTH: f64 = LN_2;
/// Band 0 has `2^LEVEL0_BITS` angular sectors.
pub const LEVEL0_BITS: u32 = 2;
/// Deepest band a query may reach; sector indices must fit in 256 bits.
pub const MAX_BAND: u32 = 250;
/// Default cap on the expected number of obstacles in a materialized window.
pub const DEFAULT_BUDGET: f64 = 2e7;

pub fn band_edge(k: u32) -> f64 {
    k as f64 * BAND_WIDTH
}

/// Number of bits in the sector index of band `k`.
pub fn level_bits(k: u32) -> u32 {
    k + LEVEL0_BITS
}

/// Index of the band containing radial coordinate `t`.
pub fn band_of(t: f64) -> u32 {
    (t / BAND_WIDTH).floor().max(0.0) as u32
}

// splitmix64 finalizer
fn mix64(mut z: u64) -> u64 {
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

fn absorb(h: u64, x: u64) -> u64 {
    mix64((h ^ x).wrapping_add(0x9E37_79B9_7F4A_7C15))
}

/// Identifies one replicate's random stream: `(master seed, replicate index)`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct StreamKey {
    pub seed: u64,
    pub replicate: u64,
}

impl StreamKey {
    pub fn new(seed: u64, replicate: u64) -> Self {
        StreamKey { seed, replicate }
    }

    /// Generator for the cell `(band, sector)` of this replicate, salted by `salt`.
    fn cell_rng(&self, salt: u64, band: u32, sector: U256) -> Pcg64Mcg {
        let (hi, lo) = sector.into_words();
        let words = [
            salt,
            self.seed,
            self.replicate,
            band as u64,
            (hi >> 64) as u64,
            hi as u64,
            (lo >> 64) as u64,
            lo as u64,
        ];
        let (mut a, mut b) = (0x243F_6A88_85A3_08D3u64, 0x1319_8A2E_0370_7344u64);
        for w in words {
            a = absorb(a, w);
            b = absorb(b, w ^ 0xA409_3822_299F_31D0);
        }
        Pcg64Mcg::new(((a as u128) << 64) | b as u128)
    }

    /// Generator for replicate-level draws that are not part of the obstacle field.
    pub fn aux_rng(&self, salt: u64) -> Pcg64Mcg {
        self.cell_rng(salt ^ 0x5bd1_e995, u32::MAX, U256::ZERO)
    }
}

/// Law of the ball radius: a point mass or a finite discrete law on `(0, C]`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum RadiusLaw {
    Constant(f64),
    Discrete(Vec<(f64, f64)>),
}

impl RadiusLaw {
    pub fn constant(r: f64) -> Result<Self> {
        let law = RadiusLaw::Constant(r);
        law.validate()?;
        Ok(law)
    }

    /// Discrete law from `(value, weight)` atoms; weights must sum to 1.
    pub fn discrete(atoms: Vec<(f64, f64)>) -> Result<Self> {
        let law = RadiusLaw::Discrete(atoms);
        law.validate()?;
        Ok(law)
    }

    pub fn validate(&self) -> Result<()> {
        match self {
            RadiusLaw::Constant(r) => {
                if !(*r > 0.0 && r.is_finite()) {
                    return Err(Error::Model(format!("radius {r} must be finite and > 0")));
                }
            }
            RadiusLaw::Discrete(atoms) => {
                if atoms.is_empty() {
                    return Err(Error::Model("discrete radius law has no atoms".into()));
                }
                for &(v, w) in atoms {
                    if !(v > 0.0 && v.is_finite()) || !(w > 0.0) {
                        return Err(Error::Model(format!("bad atom ({v}, {w})")));
                    }
                }
                let total: f64 = atoms.iter().map(|a| a.1).sum();
                if (total - 1.0).abs() > 1e-12 {
                    return Err(Error::Model(format!("weights sum to {total}, not 1")));
                }
            }
        }
        Ok(())
    }

    /// Upper bound `C` of the support.
    pub fn bound(&self) -> f64 {
        match self {
            RadiusLaw::Constant(r) => *r,
            RadiusLaw::Discrete(atoms) => atoms.iter().map(|a| a.0).fold(0.0, f64::max),
        }
    }

    fn expect(&self, f: impl Fn(f64) -> f64) -> f64 {
        match self {
            RadiusLaw::Constant(r) => f(*r),
            RadiusLaw::Discrete(atoms) => atoms.iter().map(|&(v, w)| w * f(v)).sum(),
        }
    }

    /// `E[sinh R]`, an exact finite sum.
    pub fn mean_sinh(&self) -> f64 {
        self.expect(f64::sinh)
    }

    /// `E[cosh R]`.
    pub fn mean_cosh(&self) -> f64 {
        self.expect(f64::cosh)
    }

    /// `E[cosh R − 1]`, without cancellation for small radii.
    pub fn mean_cosh_m1(&self) -> f64 {
        self.expect(|r| 2.0 * (0.5 * r).sinh().powi(2))
    }

    pub fn sample<R: Rng + ?Sized>(&self, rng: &mut R) -> f64 {
        match self {
            RadiusLaw::Constant(r) => *r,
            RadiusLaw::Discrete(atoms) => {
                let u: f64 = rng.random();
                let mut acc = 0.0;
                for &(v, w) in atoms {
                    acc += w;
                    if u < acc {
                        return v;
                    }
                }
                atoms[atoms.len() - 1].0
            }
        }
    }
}

/// One obstacle of a field in multiscale coordinates.
///
/// Its direction is `2π (sector + frac) / 2^level_bits(band)`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct FieldPoint {
    pub sector: U256,
    pub frac: f64,
    /// Centre distance (balls) or foot point distance (lines).
    pub t: f64,
    /// Ball radius; zero for lines.
    pub radius: f64,
}

impl FieldPoint {
    pub fn direction(&self, band: u32) -> f64 {
        let bits = level_bits(band);
        let scale = TAU / 2f64.powi(bits as i32);
        // sector fits in an f64 exactly only for shallow bands; this is for output
        (self.sector.as_f64() + self.frac) * scale
    }
}

/// A Poisson obstacle field laid out on the multiscale cell grid.
pub trait ObstacleField: Sync {
    /// Append the obstacles of sector `sector` of band `band`.
    fn cell(&self, band: u32, sector: U256, out: &mut Vec<FieldPoint>);

    /// True when the field has no obstacles at all.
    fn is_empty(&self) -> bool;

    /// Radial coordinate beyond which no obstacle can touch a length-`r` probe.
    fn reach(&self, r: f64) -> f64;

    /// Shadow half-width at probe length `r`, or `None` if nothing is blocked.
    fn shadow(&self, pt: &FieldPoint, r: f64) -> Option<f64>;

    /// Upper bound of `shadow` over all obstacles of band `band`.
    fn max_shadow(&self, band: u32, r: f64) -> f64;

    /// First arclength at which the ray at angular offset `delta` from the
    /// obstacle's direction meets it.
    fn first_hit(&self, pt: &FieldPoint, delta: f64) -> Option<f64>;

    /// The arclength interval the ray spends inside the obstacle, if the
    /// obstacle has interior.
    fn chord(&self, pt: &FieldPoint, delta: f64) -> Option<(f64, f64)>;
}

fn sample_cell<F>(
    key: &StreamKey,
    salt: u64,
    band: u32,
    sector: U256,
    mean: f64,
    out: &mut Vec<FieldPoint>,
    mut point: F,
) where
    F: FnMut(&mut Pcg64Mcg, U256, f64) -> FieldPoint,
{
    if !(mean > 0.0) {
        return;
    }
    let mut rng = key.cell_rng(salt, band, sector);
    let n = Poisson::new(mean).map(|p| p.sample(&mut rng)).unwrap_or(0.0) as u64;
    for _ in 0..n {
        let frac = (rng.next_u64() >> 11) as f64 * (1.0 / (1u64 << 53) as f64);
        out.push(point(&mut rng, sector, frac));
    }
}

/// `cosh x − 1` without cancellation.
fn cosh_m1(x: f64) -> f64 {
    2.0 * (0.5 * x).sinh().powi(2)
}

const BALL_SALT: u64 = 0xB0A1;
const LINE_SALT: u64 = 0x11E5;

/// The Boolean model: balls with i.i.d. radii centred on a Poisson process
/// of intensity `lambda` per unit hyperbolic area.
#[derive(Debug, Clone, PartialEq)]
pub struct BallField {
    pub lambda: f64,
    pub law: RadiusLaw,
    pub stream: StreamKey,
}

impl BallField {
    pub fn new(lambda: f64, law: RadiusLaw, stream: StreamKey) -> Result<Self> {
        if !(lambda >= 0.0 && lambda.is_finite()) {
            return Err(Error::Model(format!(
                "intensity {lambda} must be finite and >= 0"
            )));
        }
        law.validate()?;
        Ok(BallField { lambda, law, stream })
    }

    /// Expected number of centres within hyperbolic distance `rho` of `o`.
    pub fn expected_count(&self, rho: f64) -> f64 {
        self.lambda * TAU * cosh_m1(rho)
    }

    fn cell_mean(&self, band: u32) -> f64 {
        let (a, b) = (band_edge(band), band_edge(band + 1));
        let sectors = 2f64.powi(level_bits(band) as i32);
        self.lambda * TAU * (cosh_m1(b) - cosh_m1(a)) / sectors
    }

    /// Every ball whose centre lies within `window` of `o`, in cell order.
    pub fn materialize(&self, window: f64, budget: f64) -> Result<BooleanScene> {
        check_budget(self.expected_count(window), window, budget)?;
        let mut balls = Vec::new();
        let mut buf = Vec::new();
        for_each_cell(window, |band, sector| {
            buf.clear();
            self.cell(band, sector, &mut buf);
            for p in &buf {
                if p.t <= window {
                    balls.push(BallObstacle {
                        t: p.t,
                        phi: p.direction(band),
                        radius: p.radius,
                    });
                }
            }
        });
        Ok(BooleanScene {
            balls,
            lambda: self.lambda,
            law: self.law.clone(),
            window_radius: window,
            stream: Some(self.stream),
        })
    }
}

impl ObstacleField for BallField {
    fn cell(&self, band: u32, sector: U256, out: &mut Vec<FieldPoint>) {
        let (a, b) = (cosh_m1(band_edge(band)), cosh_m1(band_edge(band + 1)));
        sample_cell(
            &self.stream,
            BALL_SALT,
            band,
            sector,
            self.cell_mean(band),
            out,
            |rng, sector, frac| {
                let u: f64 = rng.random();
                FieldPoint {
                    sector,
                    frac,
                    t: acosh1p(a + u * (b - a)),
                    radius: self.law.sample(rng),
                }
            },
        );
    }

    fn is_empty(&self) -> bool {
        self.lambda == 0.0
    }

    fn reach(&self, r: f64) -> f64 {
        r + self.law.bound()
    }

    fn shadow(&self, pt: &FieldPoint, r: f64) -> Option<f64> {
        ball_shadow_halfwidth(pt.t, pt.radius, r)
    }

    fn max_shadow(&self, band: u32, _r: f64) -> f64 {
        let (t, c) = (band_edge(band), self.law.bound());
        if t <= c {
            std::f64::consts::PI
        } else {
            (c.sinh() / t.sinh()).min(1.0).asin()
        }
    }

    fn first_hit(&self, pt: &FieldPoint, delta: f64) -> Option<f64> {
        ball_hit_interval(pt.t, delta, pt.radius).map(|(s, _)| s)
    }

    fn chord(&self, pt: &FieldPoint, delta: f64) -> Option<(f64, f64)> {
        ball_hit_interval(pt.t, delta, pt.radius)
    }
}

/// The Poisson line process: geodesics whose foot points form a Poisson
/// process with measure `2λ (1 + ρ²)/(1 − ρ²)² dρ dθ` in disc coordinates,
/// i.e. `2λ cosh p dp dθ` in hyperbolic foot distance `p`.
#[derive(Debug, Clone, PartialEq)]
pub struct LineField {
    pub lambda: f64,
    pub stream: StreamKey,
}

impl LineField {
    pub fn new(lambda: f64, stream: StreamKey) -> Result<Self> {
        if !(lambda >= 0.0 && lambda.is_finite()) {
            return Err(Error::Model(format!(
                "intensity {lambda} must be finite and >= 0"
            )));
        }
        Ok(LineField { lambda, stream })
    }

    /// Expected number of lines with foot distance at most `p_max`.
    pub fn expected_count(&self, p_max: f64) -> f64 {
        TAU * self.lambda * p_max.sinh()
    }

    fn cell_mean(&self, band: u32) -> f64 {
        let (a, b) = (band_edge(band), band_edge(band + 1));
        let sectors = 2f64.powi(level_bits(band) as i32);
        TAU * self.lambda * (b.sinh() - a.sinh()) / sectors
    }

    /// Every line with foot distance at most `p_max`, in cell order.
    pub fn materialize(&self, p_max: f64, budget: f64) -> Result<LineScene> {
        check_budget(self.expected_count(p_max), p_max, budget)?;
        let mut lines = Vec::new();
        let mut buf = Vec::new();
        for_each_cell(p_max, |band, sector| {
            buf.clear();
            self.cell(band, sector, &mut buf);
            for p in &buf {
                if p.t <= p_max {
                    lines.push(GeodesicObstacle {
                        p: p.t,
                        phi: p.direction(band),
                    });
                }
            }
        });
        Ok(LineScene {
            lines,
            lambda: self.lambda,
            p_max,
            stream: Some(self.stream),
        })
    }
}

impl ObstacleField for LineField {
    fn cell(&self, band: u32, sector: U256, out: &mut Vec<FieldPoint>) {
        let (a, b) = (band_edge(band).sinh(), band_edge(band + 1).sinh());
        sample_cell(
            &self.stream,
            LINE_SALT,
            band,
            sector,
            self.cell_mean(band),
            out,
            |rng, sector, frac| {
                let u: f64 = rng.random();
                FieldPoint {
                    sector,
                    frac,
                    t: (a + u * (b - a)).asinh(),
                    radius: 0.0,
                }
            },
        );
    }

    fn is_empty(&self) -> bool {
        self.lambda == 0.0
    }

    fn reach(&self, r: f64) -> f64 {
        r
    }

    fn shadow(&self, pt: &FieldPoint, r: f64) -> Option<f64> {
        if pt.t > r {
            None
        } else {
            Some(line_hit_halfwidth(pt.t, r))
        }
    }

    fn max_shadow(&self, band: u32, r: f64) -> f64 {
        line_hit_halfwidth(band_edge(band), r)
    }

    fn first_hit(&self, pt: &FieldPoint, delta: f64) -> Option<f64> {
        line_crossing(pt.t, delta)
    }

    fn chord(&self, _pt: &FieldPoint, _delta: f64) -> Option<(f64, f64)> {
        None
    }
}

fn check_budget(expected: f64, window: f64, budget: f64) -> Result<()> {
    if !(window > 0.0) {
        return Err(Error::Domain(format!("window radius {window} must be > 0")));
    }
    let bands = band_of(window) + 1;
    let cells = (1u64 << LEVEL0_BITS) as f64 * (2f64.powi(bands as i32) - 1.0);
    if expected > budget || cells > 8.0 * budget.max(1.0) || band_of(window) > MAX_BAND {
        return Err(Error::BudgetExceeded { expected, budget });
    }
    Ok(())
}

fn for_each_cell(window: f64, mut f: impl FnMut(u32, U256)) {
    let last = band_of(window);
    for band in 0..=last {
        let n = 1u64 << level_bits(band);
        for s in 0..n {
            f(band, U256::from(s));
        }
    }
}

/// Parameters of one Boolean-model sample.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BooleanModelConfig {
    pub lambda: f64,
    pub radius_law: RadiusLaw,
    pub window_radius: f64,
    pub seed: u64,
}

/// One sampled configuration of balls inside an exactness window.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BooleanScene {
    pub balls: Vec<BallObstacle>,
    pub lambda: f64,
    pub law: RadiusLaw,
    pub window_radius: f64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub stream: Option<StreamKey>,
}

impl BooleanScene {
    /// Scene with explicitly given balls, e.g. for hand-built configurations.
    pub fn from_balls(balls: Vec<BallObstacle>, law: RadiusLaw, window_radius: f64) -> Self {
        BooleanScene {
            balls,
            lambda: 0.0,
            law,
            window_radius,
            stream: None,
        }
    }
}

/// One sampled configuration of lines with foot distance at most `p_max`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LineScene {
    pub lines: Vec<GeodesicObstacle>,
    pub lambda: f64,
    pub p_max: f64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub stream: Option<StreamKey>,
}

/// Sample the Boolean model inside `config.window_radius` for one replicate.
///
/// The stream's seed overrides `config.seed`; pass `StreamKey::new(config.seed, i)`
/// for replicate `i`.
pub fn sample_boolean_scene(config: &BooleanModelConfig, stream: StreamKey) -> Result<BooleanScene> {
    if !(config.lambda > 0.0) {
        return Err(Error::Model(format!("intensity {} must be > 0", config.lambda)));
    }
    let field = BallField::new(config.lambda, config.radius_law.clone(), stream)?;
    field.materialize(config.window_radius, DEFAULT_BUDGET)
}

/// Sample the line process with foot distances up to `p_max`.
pub fn sample_line_scene(lambda: f64, p_max: f64, stream: StreamKey) -> Result<LineScene> {
    if !(lambda > 0.0) {
        return Err(Error::Model(format!("intensity {lambda} must be > 0")));
    }
    LineField::new(lambda, stream)?.materialize(p_max, DEFAULT_BUDGET)
}

/// Window radius that makes every visibility query up to `r_max` exact.
pub fn window_for_visibility(r_max: f64, law: &RadiusLaw) -> f64 {
    r_max + law.bound()
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;

    fn unit_law() -> RadiusLaw {
        RadiusLaw::constant(1.0).unwrap()
    }

    #[test]
    fn law_validation() {
        assert!(RadiusLaw::constant(0.0).is_err());
        assert!(RadiusLaw::discrete(vec![(0.5, 0.5), (1.0, 0.4)]).is_err());
        assert!(RadiusLaw::discrete(vec![(0.5, 0.5), (-1.0, 0.5)]).is_err());
        let law = RadiusLaw::discrete(vec![(0.5, 0.25), (1.5, 0.75)]).unwrap();
        assert_eq!(law.bound(), 1.5);
        assert_abs_diff_eq!(
            law.mean_sinh(),
            0.25 * 0.5f64.sinh() + 0.75 * 1.5f64.sinh(),
            epsilon = 1e-15
        );
        assert_abs_diff_eq!(law.mean_cosh() - 1.0, law.mean_cosh_m1(), epsilon = 1e-14);
    }

    #[test]
    fn window_rule() {
        assert_eq!(window_for_visibility(5.0, &unit_law()), 6.0);
        assert_eq!(window_for_visibility(0.0, &unit_law()), 1.0);
    }

    #[test]
    fn cell_means_add_up_to_window_mass() {
        let f = BallField::new(0.3, unit_law(), StreamKey::new(1, 0)).unwrap();
        let total: f64 = (0..6)
            .map(|k| f.cell_mean(k) * 2f64.powi(level_bits(k) as i32))
            .sum();
        assert_abs_diff_eq!(total, f.expected_count(band_edge(6)), epsilon = 1e-9);
        let l = LineField::new(0.5, StreamKey::new(1, 0)).unwrap();
        let total: f64 = (0..6)
            .map(|k| l.cell_mean(k) * 2f64.powi(level_bits(k) as i32))
            .sum();
        assert_abs_diff_eq!(total, l.expected_count(band_edge(6)), epsilon = 1e-9);
    }

    #[test]
    fn scenes_are_deterministic_and_windowed() {
        let cfg = BooleanModelConfig {
            lambda: 0.4,
            radius_law: unit_law(),
            window_radius: 4.0,
            seed: 9,
        };
        let a = sample_boolean_scene(&cfg, StreamKey::new(9, 3)).unwrap();
        let b = sample_boolean_scene(&cfg, StreamKey::new(9, 3)).unwrap();
        assert_eq!(a, b);
        assert!(a.balls.iter().all(|b| b.t <= 4.0 && b.radius == 1.0));
        let c = sample_boolean_scene(&cfg, StreamKey::new(9, 4)).unwrap();
        assert_ne!(a, c);
    }

    #[test]
    fn enlarging_the_window_keeps_inner_balls() {
        let f = BallField::new(0.5, unit_law(), StreamKey::new(4, 11)).unwrap();
        let small = f.materialize(3.0, 1e6).unwrap();
        let big = f.materialize(4.5, 1e6).unwrap();
        let inner: Vec<_> = big.balls.iter().filter(|b| b.t <= 3.0).copied().collect();
        assert_eq!(inner, small.balls);
    }

    #[test]
    fn budget_is_enforced() {
        let f = BallField::new(1.0, unit_law(), StreamKey::new(0, 0)).unwrap();
        assert!(matches!(
            f.materialize(30.0, DEFAULT_BUDGET),
            Err(Error::BudgetExceeded { .. })
        ));
    }

    #[test]
    fn tiny_intensity_gives_empty_scene() {
        let cfg = BooleanModelConfig {
            lambda: 1e-12,
            radius_law: unit_law(),
            window_radius: 3.0,
            seed: 1,
        };
        let empty = (0..100)
            .filter(|&i| {
                sample_boolean_scene(&cfg, StreamKey::new(1, i))
                    .unwrap()
                    .balls
                    .is_empty()
            })
            .count();
        assert_eq!(empty, 100);
        let s = sample_line_scene(0.5, 1e-9, StreamKey::new(0, 0)).unwrap();
        assert!(s.lines.is_empty());
    }

    #[test]
    fn mean_count_matches_poisson_mass() {
        // λ = 0.2, ρ_w = 3: expected 0.2·2π(cosh 3 − 1) = 11.39476…
        let cfg = BooleanModelConfig {
            lambda: 0.2,
            radius_law: unit_law(),
            window_radius: 3.0,
            seed: 5,
        };
        let n = 20_000;
        let counts: Vec<f64> = (0..n)
            .map(|i| {
                sample_boolean_scene(&cfg, StreamKey::new(5, i))
                    .unwrap()
                    .balls
                    .len() as f64
            })
            .collect();
        let mean = counts.iter().sum::<f64>() / n as f64;
        let var = counts.iter().map(|c| (c - mean).powi(2)).sum::<f64>() / (n - 1) as f64;
        let se = (var / n as f64).sqrt();
        assert!((mean - 11.394_760_124_468).abs() < 3.0 * se, "{mean} ± {se}");
    }
}
