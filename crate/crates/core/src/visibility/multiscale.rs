//! Visibility queries evaluated directly on a lazily sampled obstacle field.
//!
//! The candidate visible set is refined band by band. At band `k` it is held
//! as sorted disjoint pieces measured in band-`k` sector units relative to an
//! integer anchor sector, so positions keep full `f64` precision however
//! deep the band is. Only sectors within the largest possible shadow of a
//! surviving piece are sampled. Pieces are split into groups spanning at most
//! [`GROUP_SPAN`] sectors and groups are explored depth first, so a
//! nonemptiness test stops at the first surviving branch.

use std::f64::consts::{PI, TAU};

use ethnum::U256;

use super::{bisect_visibility, covered_prefix, star_from_reach, StarArea};
use crate::error::{Error, Result};
use crate::sampler::{band_edge, level_bits, BallField, FieldPoint, ObstacleField, MAX_BAND};

/// Largest span, in sector units, of the pieces refined together.
pub const GROUP_SPAN: f64 = 32.0;

/// Part of the circle a query starts from.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Region {
    /// All directions.
    Full,
    /// Directions in `[0, ε)`.
    Window(f64),
}

/// A direction stored exactly as a 256-bit fraction of a full turn.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Direction(U256);

impl Direction {
    /// The direction `2π x` where `x` is the binary64 value nearest `θ/2π`.
    pub fn from_angle(theta: f64) -> Self {
        let x = theta.rem_euclid(TAU) / TAU;
        if !(x > 0.0) || x >= 1.0 {
            return Direction(U256::ZERO);
        }
        let bits = x.to_bits();
        let exp = ((bits >> 52) & 0x7ff) as i32;
        let mant = if exp == 0 {
            bits & ((1 << 52) - 1)
        } else {
            (bits & ((1 << 52) - 1)) | (1 << 52)
        };
        // x = mant · 2^(exp − 1075), scaled by 2^256
        let shift = 256 + exp.max(1) - 1075;
        let m = U256::from(mant);
        Direction(if shift >= 0 {
            m << shift as u32
        } else {
            m >> (-shift) as u32
        })
    }

    /// The direction `2π i / n`.
    pub fn from_fraction(i: u64, n: u64) -> Self {
        assert!(n > 0 && i < n);
        // floor(i · 2^256 / n) by long division in 64-bit steps
        let mut q = U256::ZERO;
        let mut rem = (i as u128) % n as u128;
        for _ in 0..4 {
            let num = rem << 64;
            q = (q << 64) | U256::from(num / n as u128);
            rem = num % n as u128;
        }
        Direction(q)
    }

    pub fn angle(&self) -> f64 {
        self.0.as_f64() / 2f64.powi(256) * TAU
    }

    /// Sector of band `band` containing the direction, and the offset within it.
    fn locate(&self, band: u32) -> (U256, f64) {
        let bits = level_bits(band);
        let low = 256 - bits;
        let sector = self.0 >> low;
        let rem = self.0 & ((U256::ONE << low) - 1);
        (sector, rem.as_f64() / 2f64.powi(low as i32))
    }
}

fn mask(bits: u32) -> U256 {
    if bits >= 256 {
        U256::MAX
    } else {
        (U256::ONE << bits) - 1
    }
}

fn offset(anchor: U256, j: i64, bits: u32) -> U256 {
    let s = if j >= 0 {
        anchor.wrapping_add(U256::from(j as u64))
    } else {
        anchor.wrapping_sub(U256::from(j.unsigned_abs()))
    };
    s & mask(bits)
}

/// Last band that can hold an obstacle relevant at probe length `r`.
fn last_band<F: ObstacleField + ?Sized>(field: &F, r: f64) -> Result<u32> {
    let reach = field.reach(r);
    let last = ((reach / band_edge(1)).ceil() as i64 - 1).max(0) as u32;
    if last > MAX_BAND {
        return Err(Error::Domain(format!(
            "probe length {r} needs band {last}, beyond the supported {MAX_BAND}"
        )));
    }
    Ok(last)
}

struct Group {
    band: u32,
    anchor: U256,
    pieces: Vec<(f64, f64)>,
}

struct Scratch {
    points: Vec<FieldPoint>,
    shadows: Vec<(f64, f64)>,
}

impl Scratch {
    fn new() -> Self {
        Scratch {
            points: Vec::new(),
            shadows: Vec::new(),
        }
    }
}

/// Remove from `group.pieces` every shadow cast at probe `r` by band `group.band`.
fn subtract_band<F: ObstacleField + ?Sized>(field: &F, r: f64, group: &mut Group, scratch: &mut Scratch) {
    let (lo, hi) = match (group.pieces.first(), group.pieces.last()) {
        (Some(a), Some(b)) => (a.0, b.1),
        _ => return,
    };
    let bits = level_bits(group.band);
    let cells = 2f64.powi(bits as i32);
    let to_cells = cells / TAU;
    let pad = field.max_shadow(group.band, r) * to_cells;
    let mut first = (lo - pad).floor() as i64 - 1;
    let mut last = (hi + pad).floor() as i64 + 1;
    let wrap = (last - first + 1) as f64 >= cells;
    if wrap {
        first = lo.floor() as i64;
        last = first + cells as i64 - 1;
    }
    scratch.shadows.clear();
    for j in first..=last {
        scratch.points.clear();
        field.cell(group.band, offset(group.anchor, j, bits), &mut scratch.points);
        for p in &scratch.points {
            let Some(w) = field.shadow(p, r) else { continue };
            let w = if w >= PI { 0.5 * cells } else { w * to_cells };
            let x = j as f64 + p.frac;
            let shifts: &[f64] = if wrap { &[-1.0, 0.0, 1.0] } else { &[0.0] };
            for &m in shifts {
                let (a, b) = (x + m * cells - w, x + m * cells + w);
                if b >= lo && a <= hi {
                    scratch.shadows.push((a, b));
                }
            }
        }
    }
    if scratch.shadows.is_empty() {
        return;
    }
    scratch.shadows.sort_by(|a, b| a.0.total_cmp(&b.0));
    let mut out = Vec::with_capacity(group.pieces.len() + 4);
    let mut si = 0;
    let sh = &scratch.shadows;
    for &(a, b) in &group.pieces {
        let mut start = a;
        while si < sh.len() && sh[si].1 < start {
            si += 1;
        }
        let mut k = si;
        while k < sh.len() && sh[k].0 < b {
            if sh[k].0 > start {
                out.push((start, sh[k].0));
            }
            start = start.max(sh[k].1);
            if start >= b {
                break;
            }
            k += 1;
        }
        if start < b {
            out.push((start, b));
        }
    }
    group.pieces = out;
}

/// Move to the next band and cut into groups of bounded span, pushed so
/// that the leftmost group is popped first.
fn refine(group: Group, out: &mut Vec<Group>) {
    let band = group.band + 1;
    let bits = level_bits(band);
    let anchor = (group.anchor << 1u32) & mask(bits);
    let start = out.len();
    let mut cur = Vec::new();
    let mut base = (2.0 * group.pieces[0].0).floor();
    for &(a, b) in &group.pieces {
        let (mut a, b) = (2.0 * a, 2.0 * b);
        loop {
            let cut = base + GROUP_SPAN;
            if a >= cut {
                push_group(band, anchor, &mut cur, out);
                base = a.floor();
            } else if b <= cut {
                cur.push((a, b));
                break;
            } else {
                cur.push((a, cut));
                push_group(band, anchor, &mut cur, out);
                a = cut;
                base = cut;
            }
        }
    }
    push_group(band, anchor, &mut cur, out);
    out[start..].reverse();
}

fn push_group(band: u32, anchor: U256, cur: &mut Vec<(f64, f64)>, out: &mut Vec<Group>) {
    if cur.is_empty() {
        return;
    }
    let shift = cur[0].0.floor();
    out.push(Group {
        band,
        anchor: offset(anchor, shift as i64, level_bits(band)),
        pieces: cur.iter().map(|&(a, b)| (a - shift, b - shift)).collect(),
    });
    cur.clear();
}

fn initial(region: Region) -> Group {
    let cells = 2f64.powi(level_bits(0) as i32);
    let end = match region {
        Region::Full => cells,
        Region::Window(eps) => (eps.min(TAU) / TAU * cells).min(cells),
    };
    Group {
        band: 0,
        anchor: U256::ZERO,
        pieces: if end > 0.0 { vec![(0.0, end)] } else { Vec::new() },
    }
}

/// Depth-first refinement; returns the visible measure, or stops at the
/// first survivor when `stop_early`.
fn explore<F: ObstacleField + ?Sized>(field: &F, r: f64, region: Region, stop_early: bool) -> Result<f64> {
    let start = initial(region);
    if field.is_empty() || start.pieces.is_empty() {
        return Ok(start.pieces.iter().map(|p| p.1 - p.0).sum::<f64>() * TAU / 4.0);
    }
    let last = last_band(field, r)?;
    let mut stack = vec![start];
    let mut scratch = Scratch::new();
    let mut total = 0.0;
    while let Some(mut g) = stack.pop() {
        subtract_band(field, r, &mut g, &mut scratch);
        if g.pieces.is_empty() {
            continue;
        }
        if g.band == last {
            let len: f64 = g.pieces.iter().map(|p| p.1 - p.0).sum();
            total += len * TAU / 2f64.powi(level_bits(last) as i32);
            if stop_early {
                return Ok(total);
            }
        } else {
            refine(g, &mut stack);
        }
    }
    Ok(total)
}

/// Whether some direction of `region` sees to distance `r`.
pub fn nonempty<F: ObstacleField + ?Sized>(field: &F, r: f64, region: Region) -> Result<bool> {
    Ok(explore(field, r, region, true)? > 0.0)
}

/// Measure of the directions of `region` that see to distance `r`.
pub fn visible_measure<F: ObstacleField + ?Sized>(field: &F, r: f64, region: Region) -> Result<f64> {
    explore(field, r, region, false)
}

/// `V(θ) ∧ r_max` along `dir`.
pub fn direction_reach<F: ObstacleField + ?Sized>(field: &F, dir: Direction, r_max: f64) -> Result<f64> {
    let mut cur = r_max;
    if field.is_empty() {
        return Ok(cur);
    }
    let mut points = Vec::new();
    let mut band = 0;
    while band_edge(band) < field.reach(cur) {
        if band > MAX_BAND {
            return Err(Error::Domain(format!(
                "probe length {r_max} is beyond the supported depth"
            )));
        }
        let bits = level_bits(band);
        let cells = 2f64.powi(bits as i32);
        let (sector, frac) = dir.locate(band);
        let pad = field.max_shadow(band, cur) * cells / TAU;
        let (mut first, mut last) = ((frac - pad).floor() as i64 - 1, (frac + pad).floor() as i64 + 1);
        if (last - first + 1) as f64 >= cells {
            first = 0;
            last = cells as i64 - 1;
        }
        for j in first..=last {
            points.clear();
            field.cell(band, offset(sector, j, bits), &mut points);
            for p in &points {
                let mut d = j as f64 + p.frac - frac;
                if d.abs() > 0.5 * cells {
                    d -= cells * (d / cells).round();
                }
                if let Some(s) = field.first_hit(p, (d / cells * TAU).abs()) {
                    cur = cur.min(s);
                }
            }
        }
        band += 1;
    }
    Ok(cur)
}

/// `𝔙 ∧ r_max` to within `tol`.
pub fn total_visibility<F: ObstacleField + ?Sized>(field: &F, r_max: f64, tol: f64) -> Result<f64> {
    last_band(field, r_max)?;
    let mut err = None;
    let v = bisect_visibility(
        |r| match nonempty(field, r, Region::Full) {
            Ok(b) => b,
            Err(e) => {
                err = Some(e);
                false
            }
        },
        r_max,
        tol,
    );
    match err {
        Some(e) => Err(e),
        None => Ok(v),
    }
}

/// Visibility-star area truncated at `r_max`, over `n_grid` directions.
pub fn star_area<F: ObstacleField + ?Sized>(field: &F, r_max: f64, n_grid: usize) -> Result<StarArea> {
    let n = n_grid.max(1) as u64;
    let mut reaches = Vec::with_capacity(n as usize);
    for i in 0..n {
        reaches.push(direction_reach(field, Direction::from_fraction(i, n), r_max)?);
    }
    let mut it = reaches.into_iter();
    Ok(star_from_reach(|_| it.next().unwrap_or(0.0), r_max, n as usize))
}

/// `V′(θ) ∧ r_max` along `dir`: extent of the occupied run starting at `o`.
pub fn covered_reach(field: &BallField, dir: Direction, r_max: f64) -> Result<f64> {
    if field.is_empty() {
        return Ok(0.0);
    }
    let c = field.law.bound();
    let mut chords = Vec::new();
    let mut points = Vec::new();
    let mut band = 0;
    loop {
        if band > MAX_BAND {
            return Err(Error::Domain(format!(
                "probe length {r_max} is beyond the supported depth"
            )));
        }
        let bits = level_bits(band);
        let cells = 2f64.powi(bits as i32);
        let (sector, frac) = dir.locate(band);
        let pad = field.max_shadow(band, r_max) * cells / TAU;
        let (mut first, mut last) = ((frac - pad).floor() as i64 - 1, (frac + pad).floor() as i64 + 1);
        if (last - first + 1) as f64 >= cells {
            first = 0;
            last = cells as i64 - 1;
        }
        for j in first..=last {
            points.clear();
            field.cell(band, offset(sector, j, bits), &mut points);
            for p in &points {
                let mut d = j as f64 + p.frac - frac;
                if d.abs() > 0.5 * cells {
                    d -= cells * (d / cells).round();
                }
                if let Some(ch) = field.chord(p, (d / cells * TAU).abs()) {
                    chords.push(ch);
                }
            }
        }
        // every chord not yet seen starts at or beyond `next − C`
        let next = band_edge(band + 1) - c;
        let front = covered_prefix(&mut chords);
        if front < next || front >= r_max {
            return Ok(front.min(r_max));
        }
        band += 1;
    }
}

/// Grid maximum of [`covered_reach`] over `n_grid` directions.
pub fn covered_total_grid(field: &BallField, r_max: f64, n_grid: usize) -> Result<f64> {
    let n = n_grid.max(1) as u64;
    let mut best = 0.0f64;
    for i in 0..n {
        best = best.max(covered_reach(field, Direction::from_fraction(i, n), r_max)?);
    }
    Ok(best)
}
