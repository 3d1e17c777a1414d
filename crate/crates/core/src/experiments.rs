//! Monte Carlo drivers and the statistics applied to their output.
//!
//! Replicate `i` of a run with seed `s` always uses the obstacle field keyed
//! by `(s, i)`. Replicates are evaluated on a worker pool and reduced in
//! index order, so every table is bit-identical at any thread count.

use std::f64::consts::TAU;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::analytic::{janson_intensity, lambda_gv, mean_count};
use crate::error::{Error, Result};
use crate::sampler::{BallField, LineField, ObstacleField, RadiusLaw, StreamKey, DEFAULT_BUDGET};
use crate::visibility::multiscale::{
    covered_reach, direction_reach, nonempty, star_area, total_visibility, visible_measure, Direction, Region,
};

/// A Monte Carlo mean with its standard error.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Estimate {
    pub mean: f64,
    pub stderr: f64,
    pub n: u64,
}

/// Sum by recursive halving; fixed association order for a given length.
pub fn pairwise_sum(xs: &[f64]) -> f64 {
    if xs.len() <= 16 {
        return xs.iter().sum();
    }
    let (a, b) = xs.split_at(xs.len() / 2);
    pairwise_sum(a) + pairwise_sum(b)
}

impl Estimate {
    pub fn from_samples(xs: &[f64]) -> Self {
        let n = xs.len();
        assert!(n >= 1, "an estimate needs at least one sample");
        let mean = pairwise_sum(xs) / n as f64;
        let dev: Vec<f64> = xs.iter().map(|x| (x - mean).powi(2)).collect();
        let stderr = if n > 1 {
            (pairwise_sum(&dev) / (n - 1) as f64 / n as f64).sqrt()
        } else {
            0.0
        };
        Estimate {
            mean,
            stderr,
            n: n as u64,
        }
    }

    /// Frequency estimate from `k` successes in `n` trials.
    pub fn from_counts(k: u64, n: u64) -> Self {
        assert!(n >= 1 && k <= n);
        let mean = k as f64 / n as f64;
        let stderr = if n > 1 {
            (k as f64 * (n - k) as f64 / (n as f64 * (n - 1) as f64) / n as f64).sqrt()
        } else {
            0.0
        };
        Estimate { mean, stderr, n }
    }

    /// Whether `target` lies within `k` standard errors.
    pub fn covers(&self, target: f64, k: f64) -> bool {
        (self.mean - target).abs() <= k * self.stderr
    }

    /// `(mean − k·stderr, mean + k·stderr)`.
    pub fn interval(&self, k: f64) -> (f64, f64) {
        (self.mean - k * self.stderr, self.mean + k * self.stderr)
    }
}

/// Which obstacle process a run samples.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "snake_case")]
pub enum Model {
    Boolean { lambda: f64, law: RadiusLaw },
    Lines { lambda: f64 },
}

impl Model {
    pub fn boolean(lambda: f64, law: RadiusLaw) -> Self {
        Model::Boolean { lambda, law }
    }

    /// Boolean model with the intensity that gives decay rate `alpha`.
    pub fn boolean_alpha(alpha: f64, law: RadiusLaw) -> Self {
        let lambda = alpha * lambda_gv(&law);
        Model::Boolean { lambda, law }
    }

    pub fn lambda(&self) -> f64 {
        match self {
            Model::Boolean { lambda, .. } | Model::Lines { lambda } => *lambda,
        }
    }

    pub fn validate(&self) -> Result<()> {
        match self {
            Model::Boolean { lambda, law } => {
                BallField::new(*lambda, law.clone(), StreamKey::new(0, 0)).map(|_| ())
            }
            Model::Lines { lambda } => LineField::new(*lambda, StreamKey::new(0, 0)).map(|_| ()),
        }
    }

    fn field(&self, stream: StreamKey) -> Result<Field> {
        Ok(match self {
            Model::Boolean { lambda, law } => Field::Balls(BallField::new(*lambda, law.clone(), stream)?),
            Model::Lines { lambda } => Field::Lines(LineField::new(*lambda, stream)?),
        })
    }
}

enum Field {
    Balls(BallField),
    Lines(LineField),
}

impl Field {
    fn dyn_field(&self) -> &dyn ObstacleField {
        match self {
            Field::Balls(f) => f,
            Field::Lines(f) => f,
        }
    }
}

/// Runs replicates on a pool of `threads` workers (all cores when `None`).
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq)]
pub struct Runner {
    pub threads: Option<usize>,
}

impl Runner {
    pub fn new(threads: Option<usize>) -> Self {
        Runner { threads }
    }

    /// `f(0), …, f(n − 1)` in index order.
    pub fn map<T, F>(&self, n: u64, f: F) -> Result<Vec<T>>
    where
        T: Send,
        F: Fn(u64) -> Result<T> + Sync + Send,
    {
        let mut builder = rayon::ThreadPoolBuilder::new();
        if let Some(t) = self.threads {
            builder = builder.num_threads(t.max(1));
        }
        let pool = builder
            .build()
            .map_err(|e| Error::Model(format!("cannot start worker pool: {e}")))?;
        pool.install(|| (0..n).into_par_iter().map(f).collect())
    }
}

/// Events whose probability [`estimate_event`] estimates.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum Event {
    /// `L_r(0) ⊂ 𝒲`.
    SegmentVacancy { r: f64 },
    /// `Y_r(ε) ≠ ∅`, with `ε ≥ 2π` meaning the whole circle.
    VisibleNonempty { r: f64, eps: f64 },
    /// `0 ∈ Y_r` and `θ ∈ Y_r`.
    Joint { r: f64, theta: f64 },
    /// `𝔙 ≤ r`, i.e. shadows at probe `r` cover the circle.
    TotalAtMost { r: f64 },
    /// `L_r(0) ⊂ 𝒞` (Boolean model only).
    CoveredSegment { r: f64 },
}

fn region(eps: f64) -> Region {
    if eps >= TAU {
        Region::Full
    } else {
        Region::Window(eps)
    }
}

fn occurs(model: &Model, field: &Field, event: Event) -> Result<bool> {
    let f = field.dyn_field();
    match event {
        Event::SegmentVacancy { r } => Ok(direction_reach(f, Direction::from_angle(0.0), r)? >= r),
        Event::VisibleNonempty { r, eps } => nonempty(f, r, region(eps)),
        Event::Joint { r, theta } => Ok(direction_reach(f, Direction::from_angle(0.0), r)? >= r
            && direction_reach(f, Direction::from_angle(theta), r)? >= r),
        Event::TotalAtMost { r } => Ok(!nonempty(f, r, Region::Full)?),
        Event::CoveredSegment { r } => match field {
            Field::Balls(b) => Ok(covered_reach(b, Direction::from_angle(0.0), r)? >= r),
            Field::Lines(_) => Err(Error::Model(format!(
                "covered segments need a Boolean model, not {model:?}"
            ))),
        },
    }
}

/// Frequency of `event` over `n` independent replicates.
pub fn estimate_event(model: &Model, event: Event, n: u64, seed: u64, runner: Runner) -> Result<Estimate> {
    if n == 0 {
        return Err(Error::Domain("need at least one replicate".into()));
    }
    model.validate()?;
    let hits = runner.map(n, |i| {
        occurs(model, &model.field(StreamKey::new(seed, i))?, event)
    })?;
    Ok(Estimate::from_counts(
        hits.iter().filter(|&&h| h).count() as u64,
        n,
    ))
}

/// One row of a tail curve.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TailRow {
    pub r: f64,
    pub p_hat: f64,
    pub stderr: f64,
    pub n: u64,
}

/// Empirical `P[Y_r ≠ ∅]` over a grid of `r`, from coupled replicates.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TailCurve {
    pub rows: Vec<TailRow>,
    pub model: Model,
    pub seed: u64,
}

impl TailCurve {
    /// Curve from exact values, with zero standard errors.
    pub fn exact(model: Model, points: impl IntoIterator<Item = (f64, f64)>) -> Self {
        TailCurve {
            rows: points
                .into_iter()
                .map(|(r, p)| TailRow {
                    r,
                    p_hat: p,
                    stderr: 0.0,
                    n: 1,
                })
                .collect(),
            model,
            seed: 0,
        }
    }

    fn rows_in(&self, range: (f64, f64)) -> Vec<TailRow> {
        self.rows
            .iter()
            .filter(|row| row.r >= range.0 && row.r <= range.1)
            .copied()
            .collect()
    }
}

/// `P[Y_r ≠ ∅]` for each `r` of the increasing `r_list`. Each replicate is
/// probed at increasing `r` until its visible set dies, so the curve is
/// exactly non-increasing.
pub fn tail_curve(model: &Model, r_list: &[f64], n: u64, seed: u64, runner: Runner) -> Result<TailCurve> {
    if r_list.windows(2).any(|w| !(w[0] < w[1])) {
        return Err(Error::Domain("r grid must be strictly increasing".into()));
    }
    if n == 0 {
        return Err(Error::Domain("need at least one replicate".into()));
    }
    model.validate()?;
    let survive = runner.map(n, |i| {
        let field = model.field(StreamKey::new(seed, i))?;
        let mut k = 0;
        for &r in r_list {
            if !nonempty(field.dyn_field(), r, Region::Full)? {
                break;
            }
            k += 1;
        }
        Ok(k)
    })?;
    let mut counts = vec![0u64; r_list.len() + 1];
    for k in survive {
        counts[k] += 1;
    }
    let mut above = n;
    let rows = r_list
        .iter()
        .enumerate()
        .map(|(i, &r)| {
            above -= counts[i];
            let e = Estimate::from_counts(above, n);
            TailRow {
                r,
                p_hat: e.mean,
                stderr: e.stderr,
                n,
            }
        })
        .collect();
    Ok(TailCurve {
        rows,
        model: model.clone(),
        seed,
    })
}

/// Slope of `log p̂` against `r`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LogFit {
    pub slope: f64,
    pub stderr: f64,
    pub intercept: f64,
    pub points: usize,
    pub weighted: bool,
}

/// Least squares of `log p̂` on `r` over `range`, weighting each row by
/// `p̂²/stderr²`, the inverse delta-method variance of `log p̂`. Rows with
/// zero standard error make the fit unweighted, with the slope error
/// taken from the residuals.
pub fn fit_loglinear(curve: &TailCurve, range: (f64, f64)) -> Result<LogFit> {
    let rows = curve.rows_in(range);
    if rows.len() < 2 {
        return Err(Error::Fit(format!(
            "fewer than two rows in [{}, {}]",
            range.0, range.1
        )));
    }
    if let Some(row) = rows.iter().find(|row| !(row.p_hat > 0.0)) {
        return Err(Error::Fit(format!("p̂ = 0 at r = {}", row.r)));
    }
    let weighted = rows.iter().all(|row| row.stderr > 0.0);
    let xs: Vec<f64> = rows.iter().map(|row| row.r).collect();
    let ys: Vec<f64> = rows.iter().map(|row| row.p_hat.ln()).collect();
    let ws: Vec<f64> = rows
        .iter()
        .map(|row| {
            if weighted {
                (row.p_hat / row.stderr).powi(2)
            } else {
                1.0
            }
        })
        .collect();
    let sw: f64 = ws.iter().sum();
    let xm = xs.iter().zip(&ws).map(|(x, w)| x * w).sum::<f64>() / sw;
    let ym = ys.iter().zip(&ws).map(|(y, w)| y * w).sum::<f64>() / sw;
    let sxx: f64 = xs.iter().zip(&ws).map(|(x, w)| w * (x - xm).powi(2)).sum();
    if !(sxx > 0.0) {
        return Err(Error::Fit("all rows share one r".into()));
    }
    let sxy: f64 = xs
        .iter()
        .zip(&ys)
        .zip(&ws)
        .map(|((x, y), w)| w * (x - xm) * (y - ym))
        .sum();
    let slope = sxy / sxx;
    let intercept = ym - slope * xm;
    let stderr = if weighted {
        (1.0 / sxx).sqrt()
    } else if rows.len() > 2 {
        let rss: f64 = xs
            .iter()
            .zip(&ys)
            .map(|(x, y)| (y - intercept - slope * x).powi(2))
            .sum();
        (rss / (rows.len() - 2) as f64 / sxx).sqrt()
    } else {
        0.0
    };
    Ok(LogFit {
        slope,
        stderr,
        intercept,
        points: rows.len(),
        weighted,
    })
}

/// Spread of `r·p̂(r)` over a range; bounded for `Θ(1/r)` decay.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct InverseRReport {
    pub min: f64,
    pub max: f64,
    pub ratio: f64,
    pub values: Vec<(f64, f64)>,
}

pub fn fit_inverse_r(curve: &TailCurve, range: (f64, f64)) -> Result<InverseRReport> {
    let rows = curve.rows_in(range);
    if rows.is_empty() {
        return Err(Error::Fit(format!("no rows in [{}, {}]", range.0, range.1)));
    }
    if let Some(row) = rows.iter().find(|row| !(row.p_hat > 0.0)) {
        return Err(Error::Fit(format!("p̂ = 0 at r = {}", row.r)));
    }
    let values: Vec<(f64, f64)> = rows.iter().map(|row| (row.r, row.r * row.p_hat)).collect();
    let min = values.iter().map(|v| v.1).fold(f64::INFINITY, f64::min);
    let max = values.iter().map(|v| v.1).fold(0.0, f64::max);
    Ok(InverseRReport {
        min,
        max,
        ratio: max / min,
        values,
    })
}

/// Second-moment check of `P[Y_r(ε) ≠ ∅]` against `[m²/s, 4m²/s]`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MomentReport {
    pub r: f64,
    pub eps: f64,
    /// `E[y_r(ε)]`.
    pub first: Estimate,
    /// `E[y_r(ε)²]`.
    pub second: Estimate,
    /// `P[Y_r(ε) ≠ ∅]`.
    pub p_hat: Estimate,
    /// `m²/s`.
    pub ratio: f64,
    /// Delta-method standard error of `m²/s`.
    pub ratio_stderr: f64,
    /// Standard errors of `P̂ − m²/s` and `4m²/s − P̂`.
    pub lower_gap_stderr: f64,
    pub upper_gap_stderr: f64,
    pub pass: bool,
}

pub fn moment_ratio(
    model: &Model,
    r: f64,
    eps: f64,
    n: u64,
    seed: u64,
    runner: Runner,
) -> Result<MomentReport> {
    if !(eps > 0.0 && eps < std::f64::consts::FRAC_PI_2) {
        return Err(Error::Domain(format!("ε = {eps} must lie in (0, π/2)")));
    }
    if n < 2 {
        return Err(Error::Domain("need at least two replicates".into()));
    }
    model.validate()?;
    let ys = runner.map(n, |i| {
        let field = model.field(StreamKey::new(seed, i))?;
        visible_measure(field.dyn_field(), r, Region::Window(eps))
    })?;
    let sq: Vec<f64> = ys.iter().map(|y| y * y).collect();
    let hit: Vec<f64> = ys.iter().map(|&y| if y > 0.0 { 1.0 } else { 0.0 }).collect();
    let (first, second, p_hat) = (
        Estimate::from_samples(&ys),
        Estimate::from_samples(&sq),
        Estimate::from_samples(&hit),
    );
    let (m, s, p) = (first.mean, second.mean, p_hat.mean);
    let ratio = if s > 0.0 { m * m / s } else { 0.0 };
    // influence of each replicate on m²/s
    let (gm, gs) = if s > 0.0 {
        (2.0 * m / s, -m * m / (s * s))
    } else {
        (0.0, 0.0)
    };
    let infl: Vec<f64> = ys.iter().map(|&y| gm * (y - m) + gs * (y * y - s)).collect();
    let sd = |v: Vec<f64>| Estimate::from_samples(&v).stderr;
    let ratio_stderr = sd(infl.clone());
    let lower_gap_stderr = sd(hit.iter().zip(&infl).map(|(z, g)| (z - p) - g).collect());
    let upper_gap_stderr = sd(hit.iter().zip(&infl).map(|(z, g)| 4.0 * g - (z - p)).collect());
    let pass = p - ratio >= -3.0 * lower_gap_stderr && 4.0 * ratio - p >= -3.0 * upper_gap_stderr;
    Ok(MomentReport {
        r,
        eps,
        first,
        second,
        p_hat,
        ratio,
        ratio_stderr,
        lower_gap_stderr,
        upper_gap_stderr,
        pass,
    })
}

/// Settings of [`near_critical_sweep`].
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SweepOptions {
    /// Bisection tolerance for `𝔙`.
    pub tol: f64,
    /// Directions in the star-area quadrature.
    pub n_grid: usize,
    /// Largest probe length the stabilization rule may double up to.
    pub r_cap: f64,
}

impl Default for SweepOptions {
    fn default() -> Self {
        SweepOptions {
            tol: 1e-6,
            n_grid: 256,
            r_cap: 160.0,
        }
    }
}

/// One row of the near-critical table.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SweepRow {
    pub alpha: f64,
    pub lambda: f64,
    /// Mean of `𝔙 ∧ r_max` (supercritical rows).
    pub mean_visibility: Option<Estimate>,
    /// Mean star area truncated at `r_max` (supercritical rows).
    pub mean_star_area: Option<Estimate>,
    /// `P[Y_r ≠ ∅]` at the probe length actually used.
    pub p_visible: Estimate,
    /// Probe length used for `p_visible`; at least `r_max`.
    pub r_used: f64,
    /// Whether doubling `r_used` moved `p_visible` by less than its stderr.
    pub stabilized: bool,
}

/// Mean visibility, star area and the see-to-infinity proxy for each `α`.
pub fn near_critical_sweep(
    law: &RadiusLaw,
    alphas: &[f64],
    r_max: f64,
    n: u64,
    seed: u64,
    opts: SweepOptions,
    runner: Runner,
) -> Result<Vec<SweepRow>> {
    law.validate()?;
    let mut rows = Vec::with_capacity(alphas.len());
    for &alpha in alphas {
        let model = Model::boolean_alpha(alpha, law.clone());
        let lambda = model.lambda();
        let ball = |i: u64| BallField::new(lambda, law.clone(), StreamKey::new(seed, i));
        let (mean_visibility, mean_star_area) = if alpha > 1.0 {
            let pairs = runner.map(n, |i| {
                let f = ball(i)?;
                let v = total_visibility(&f, r_max, opts.tol)?;
                let a = star_area(&f, r_max, opts.n_grid)?.area;
                Ok((v, a))
            })?;
            let vs: Vec<f64> = pairs.iter().map(|p| p.0).collect();
            let areas: Vec<f64> = pairs.iter().map(|p| p.1).collect();
            (
                Some(Estimate::from_samples(&vs)),
                Some(Estimate::from_samples(&areas)),
            )
        } else {
            (None, None)
        };
        // see-to-infinity proxy, doubling r until it no longer moves
        let mut r = r_max;
        let (p_visible, stabilized) = loop {
            let pair = runner.map(n, |i| {
                let f = ball(i)?;
                let far = nonempty(&f, 2.0 * r, Region::Full)?;
                let near = far || nonempty(&f, r, Region::Full)?;
                Ok((near, far))
            })?;
            let near = Estimate::from_counts(pair.iter().filter(|p| p.0).count() as u64, n);
            let far = Estimate::from_counts(pair.iter().filter(|p| p.1).count() as u64, n);
            let moved = near.mean - far.mean;
            if moved < near.stderr.max(far.stderr) || moved == 0.0 {
                break (near, true);
            }
            if 4.0 * r > opts.r_cap {
                break (near, false);
            }
            r *= 2.0;
        };
        rows.push(SweepRow {
            alpha,
            lambda,
            mean_visibility,
            mean_star_area,
            p_visible,
            r_used: r,
            stabilized,
        });
    }
    Ok(rows)
}

/// One row of the varying-intensity table.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct JansonRow {
    pub radius: f64,
    pub lambda: f64,
    /// Mean number of balls that can touch `B(o, r)`.
    pub mean_count: f64,
    /// `P̂[𝔙 ≤ r]`.
    pub p_hat: Estimate,
}

/// `P[𝔙 ≤ r]` at intensity `λ(R)` for each radius of the decreasing `radii`.
pub fn janson_experiment(
    radii: &[f64],
    r: f64,
    p: f64,
    n: u64,
    seed: u64,
    runner: Runner,
) -> Result<Vec<JansonRow>> {
    if radii.windows(2).any(|w| !(w[0] > w[1])) {
        return Err(Error::Domain("radii must be strictly decreasing".into()));
    }
    let mut rows = Vec::with_capacity(radii.len());
    for &radius in radii {
        let lambda = janson_intensity(radius, r, p)?;
        let count = mean_count(lambda, r, radius);
        if count > DEFAULT_BUDGET {
            return Err(Error::BudgetExceeded {
                expected: count,
                budget: DEFAULT_BUDGET,
            });
        }
        let model = Model::boolean(lambda, RadiusLaw::constant(radius)?);
        let p_hat = estimate_event(&model, Event::TotalAtMost { r }, n, seed, runner)?;
        rows.push(JansonRow {
            radius,
            lambda,
            mean_count: count,
            p_hat,
        });
    }
    Ok(rows)
}
