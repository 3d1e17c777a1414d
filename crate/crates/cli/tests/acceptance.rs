//! Acceptance suite: one PASS/FAIL line per criterion, non-zero exit on any failure.

use std::f64::consts::{FRAC_PI_2, PI};
use std::path::Path;
use std::process::Command;
use std::time::Instant;

use hypervis_core::analytic::{line_joint, line_vacancy, vacancy_f};
use hypervis_core::experiments::{
    estimate_event, fit_loglinear, janson_experiment, moment_ratio, near_critical_sweep, tail_curve, Event,
    Model, Runner, SweepOptions,
};
use hypervis_core::hypgeo::{ball_hit_interval, dist, dist_point_to_ray, HPoint};
use hypervis_core::sampler::RadiusLaw;
use rand::{Rng, SeedableRng};
use rand_pcg::Pcg64Mcg;
use serde_json::Value;

type Criterion<'a> = (&'static str, Box<dyn Fn() -> Outcome + 'a>);

struct Outcome {
    pass: bool,
    detail: String,
}

impl Outcome {
    fn new(pass: bool, detail: impl Into<String>) -> Self {
        Outcome {
            pass,
            detail: detail.into(),
        }
    }
}

fn unit() -> RadiusLaw {
    RadiusLaw::constant(1.0).unwrap()
}

fn laws() -> Vec<(&'static str, RadiusLaw)> {
    vec![
        ("R=1", unit()),
        (
            "R in {0.5,1.5}",
            RadiusLaw::discrete(vec![(0.5, 0.5), (1.5, 0.5)]).unwrap(),
        ),
        (
            "R in {0.25,1}",
            RadiusLaw::discrete(vec![(0.25, 0.25), (1.0, 0.75)]).unwrap(),
        ),
    ]
}

fn runner() -> Runner {
    Runner::default()
}

fn vacancy() -> Outcome {
    let mut worst: f64 = 0.0;
    let mut fails = vec![];
    for lambda in [0.1, 0.3] {
        for (name, law) in laws() {
            let model = Model::boolean(lambda, law.clone());
            for r in [1.0, 2.0, 4.0] {
                let e = estimate_event(&model, Event::SegmentVacancy { r }, 100_000, 101, runner()).unwrap();
                let z = (e.mean - vacancy_f(r, lambda, &law)).abs() / e.stderr;
                worst = worst.max(z);
                if z > 3.0 {
                    fails.push(format!("λ={lambda} {name} r={r}: z={z:.2}"));
                }
            }
        }
    }
    Outcome::new(
        fails.is_empty(),
        format!("18 estimates, max |z| = {worst:.2}{}", failures(&fails)),
    )
}

fn first_moment() -> Outcome {
    let cases = [
        (Model::boolean(0.1, unit()), 2.0),
        (Model::boolean(0.3, unit()), 2.0),
        (Model::boolean(0.2, laws()[1].1.clone()), 3.0),
        (Model::boolean_alpha(1.0, unit()), 4.0),
    ];
    let mut worst: f64 = 0.0;
    for (model, r) in &cases {
        let Model::Boolean { lambda, law } = model else {
            unreachable!()
        };
        let rep = moment_ratio(model, *r, 0.5, 100_000, 102, runner()).unwrap();
        let z = (rep.first.mean - 0.5 * vacancy_f(*r, *lambda, law)).abs() / rep.first.stderr;
        worst = worst.max(z);
    }
    Outcome::new(worst <= 3.0, format!("4 parameter sets, max |z| = {worst:.2}"))
}

fn sandwich() -> Outcome {
    let mut fails = vec![];
    for alpha in [0.8, 1.0, 1.2] {
        let model = Model::boolean_alpha(alpha, unit());
        for r in [2.0, 4.0, 6.0] {
            let rep = moment_ratio(&model, r, 0.5, 100_000, 103, runner()).unwrap();
            if !rep.pass {
                fails.push(format!(
                    "α={alpha} r={r}: P={:.4} m²/s={:.4}",
                    rep.p_hat.mean, rep.ratio
                ));
            }
        }
    }
    Outcome::new(fails.is_empty(), format!("9 cases{}", failures(&fails)))
}

fn run_tail(dir: &Path, threads: usize) -> (String, Value, bool) {
    let out = dir.join(format!("tail_{threads}.csv"));
    let res = Command::new(env!("CARGO_BIN_EXE_hypervis"))
        .args(["tail", "--alpha", "1.5", "--radius", "1", "--r-grid", "3:8:0.5"])
        .args(["--n", "1000000", "--seed", "104", "--check"])
        .args(["--threads", &threads.to_string(), "--out"])
        .arg(&out)
        .output()
        .expect("run hypervis");
    let report = serde_json::from_slice(&res.stdout).unwrap_or(Value::Null);
    (
        std::fs::read_to_string(&out).unwrap_or_default(),
        report,
        res.status.success(),
    )
}

fn supercritical(dir: &Path) -> Outcome {
    let (_, report, ok) = run_tail(dir, 1);
    let slope = report["fit"]["loglinear"]["Ok"]["slope"]
        .as_f64()
        .unwrap_or(f64::NAN);
    let pass = ok && (slope + 0.5).abs() <= 0.15 * 0.5;
    Outcome::new(pass, format!("slope {slope:.4} vs -0.5 ± 15%, n = 10^6"))
}

fn critical() -> Outcome {
    let grid: Vec<f64> = (5..=20).map(f64::from).collect();
    let curve = tail_curve(&Model::boolean_alpha(1.0, unit()), &grid, 100_000, 105, runner()).unwrap();
    let fit = fit_loglinear(&curve, (5.0, 20.0)).unwrap();
    let rp: Vec<f64> = curve.rows.iter().map(|row| row.r * row.p_hat).collect();
    let ratio = rp.iter().cloned().fold(0.0, f64::max) / rp.iter().cloned().fold(f64::INFINITY, f64::min);
    Outcome::new(
        ratio <= 3.0 && fit.slope > -0.1,
        format!("max/min r·p̂ = {ratio:.3} (≤ 3), slope {:.4} (> -0.1)", fit.slope),
    )
}

fn lines() -> Outcome {
    let (lambda, r, theta) = (0.5, 2.0, FRAC_PI_2);
    let m = Model::Lines { lambda };
    let vac = estimate_event(&m, Event::SegmentVacancy { r }, 100_000, 106, runner()).unwrap();
    let joint = estimate_event(&m, Event::Joint { r, theta }, 100_000, 106, runner()).unwrap();
    let zv = (vac.mean - line_vacancy(lambda, r)).abs() / vac.stderr;
    let zj = (joint.mean - line_joint(lambda, r, theta)).abs() / joint.stderr;
    let grid: Vec<f64> = (0..=8).map(|k| 2.0 + 0.5 * k as f64).collect();
    let curve = tail_curve(&Model::Lines { lambda: 1.0 }, &grid, 200_000, 106, runner()).unwrap();
    let slope = fit_loglinear(&curve, (2.0, 6.0)).unwrap().slope;
    Outcome::new(
        zv <= 3.0 && zj <= 3.0 && (slope + 1.0).abs() <= 0.15,
        format!("vacancy |z| = {zv:.2}, joint |z| = {zj:.2}, λ=1 slope {slope:.4} vs -1 ± 15%"),
    )
}

fn near_critical() -> Outcome {
    let sup = near_critical_sweep(
        &unit(),
        &[1.25, 1.5],
        60.0,
        4000,
        107,
        SweepOptions {
            n_grid: 64,
            ..Default::default()
        },
        runner(),
    )
    .unwrap();
    let v = |i: usize| sup[i].mean_visibility.unwrap().mean;
    let v_ratio = v(0) / v(1);
    let sub = near_critical_sweep(
        &unit(),
        &[0.9, 0.95],
        40.0,
        10_000,
        107,
        SweepOptions::default(),
        runner(),
    )
    .unwrap();
    let p_ratio = sub[0].p_visible.mean / sub[1].p_visible.mean;
    let stable = sub.iter().all(|row| row.stabilized);
    Outcome::new(
        (1.4..=2.8).contains(&v_ratio) && (1.3..=3.0).contains(&p_ratio) && stable,
        format!(
            "mean-V ratio {v_ratio:.3} in [1.4, 2.8]; P ratio {p_ratio:.3} in [1.3, 3.0]; r_used {:?}, stabilized {stable}",
            sub.iter().map(|row| row.r_used).collect::<Vec<_>>()
        ),
    )
}

fn varying_intensity() -> Outcome {
    let rows = janson_experiment(&[0.2, 0.1, 0.05], 1.0, 0.5, 10_000, 108, runner()).unwrap();
    let gaps: Vec<f64> = rows.iter().map(|row| (row.p_hat.mean - 0.5).abs()).collect();
    let (first, last) = (&rows[0].p_hat, &rows[2].p_hat);
    // trend: the last gap may not exceed the first by more than two combined stderrs
    let slack = 2.0 * (first.stderr.powi(2) + last.stderr.powi(2)).sqrt();
    let trend = gaps[2] <= gaps[0] + slack;
    let lambdas_up = rows.windows(2).all(|w| w[1].lambda > w[0].lambda);
    Outcome::new(
        gaps[2] <= 0.15 && trend && lambdas_up,
        format!(
            "P̂ = {:?}, |P̂ - p| at R=0.05 is {:.4}, trend ok {trend}",
            rows.iter()
                .map(|row| (row.p_hat.mean * 1e4).round() / 1e4)
                .collect::<Vec<_>>(),
            gaps[2]
        ),
    )
}

/// Minimum of a convex function on `[a, b]` by golden-section search.
fn golden_min(f: impl Fn(f64) -> f64, mut a: f64, mut b: f64) -> f64 {
    let g = 0.5 * (5f64.sqrt() - 1.0);
    let (mut c, mut d) = (b - g * (b - a), a + g * (b - a));
    for _ in 0..200 {
        if f(c) < f(d) {
            b = d;
        } else {
            a = c;
        }
        c = b - g * (b - a);
        d = a + g * (b - a);
    }
    f(0.5 * (a + b)).min(f(a)).min(f(b))
}

fn geometry() -> Outcome {
    let mut rng = Pcg64Mcg::seed_from_u64(109);
    let (mut brute, mut refl, mut hit): (f64, f64, f64) = (0.0, 0.0, 0.0);
    for _ in 0..1000 {
        let t = rng.random_range(0.01..5.0);
        let delta = rng.random_range(0.0..PI);
        let r = rng.random_range(0.01..5.0);
        let x = HPoint::from_polar(t, delta).unwrap();
        let d = dist_point_to_ray(t, delta, r);
        let best = golden_min(|s| dist(x, HPoint::from_polar(s, 0.0).unwrap()), 0.0, r);
        brute = brute.max((d - best).abs());

        if delta < FRAC_PI_2 && (t.tanh() * delta.cos()).atanh() <= r {
            let rhs = t.cosh().powi(2) - t.sinh().powi(2) * (2.0 * delta).cos();
            refl = refl.max(((2.0 * d).cosh() - rhs).abs() / rhs);
        }

        let radius = rng.random_range(0.05..2.0);
        if let Some((s_in, s_out)) = ball_hit_interval(t, delta, radius) {
            for s in [s_in, s_out] {
                if s > 0.0 {
                    let p = HPoint::from_polar(s, 0.0).unwrap();
                    hit = hit.max((dist(x, p) - radius).abs());
                }
            }
        }
    }
    Outcome::new(
        brute < 1e-6 && refl < 1e-10 && hit < 1e-9,
        format!(
            "brute-force max error {brute:.2e}, reflection residual {refl:.2e}, boundary residual {hit:.2e}"
        ),
    )
}

fn determinism(dir: &Path) -> Outcome {
    let (one, _, _) = run_tail(dir, 1);
    let (three, _, _) = run_tail(dir, 3);
    Outcome::new(
        !one.is_empty() && one == three,
        format!(
            "{} CSV bytes, threads 1 vs 3 identical: {}",
            one.len(),
            one == three
        ),
    )
}

fn see_to_infinity_example() -> String {
    let rows = near_critical_sweep(
        &unit(),
        &[0.1],
        40.0,
        10_000,
        110,
        SweepOptions::default(),
        runner(),
    )
    .unwrap();
    let lambda = rows[0].lambda;
    let bound = (-lambda * 2.0 * PI * (1f64.cosh() - 1.0)).exp();
    format!(
        "α=0.1, R=1: P-proxy {:.4} ± {:.4}; P[o uncovered] = {bound:.4} caps it, so the 0.9 example cannot hold for this law",
        rows[0].p_visible.mean, rows[0].p_visible.stderr
    )
}

fn main() {
    let dir = tempfile::tempdir().expect("temporary directory");
    let criteria: Vec<Criterion> = vec![
        ("1 vacancy formula", Box::new(vacancy)),
        ("2 first-moment identity", Box::new(first_moment)),
        ("3 second-moment sandwich", Box::new(sandwich)),
        ("4 supercritical rate", Box::new(|| supercritical(dir.path()))),
        ("5 critical rate", Box::new(critical)),
        ("6 line process laws", Box::new(lines)),
        ("7 near-critical ratios", Box::new(near_critical)),
        ("8 varying intensity", Box::new(varying_intensity)),
        ("9 geometry oracles", Box::new(geometry)),
        ("10 determinism", Box::new(|| determinism(dir.path()))),
    ];
    let mut failed = 0;
    for (name, check) in &criteria {
        let start = Instant::now();
        let o = check();
        let tag = if o.pass { "PASS" } else { "FAIL" };
        println!(
            "{tag} criterion {name}: {} [{:.1}s]",
            o.detail,
            start.elapsed().as_secs_f64()
        );
        failed += usize::from(!o.pass);
    }
    println!("INFO {}", see_to_infinity_example());
    println!(
        "{} of {} criteria passed",
        criteria.len() - failed,
        criteria.len()
    );
    if failed > 0 {
        std::process::exit(1);
    }
}

fn failures<T: std::fmt::Debug>(fails: &[T]) -> String {
    if fails.is_empty() {
        String::new()
    } else {
        format!(", failed {fails:?}")
    }
}
