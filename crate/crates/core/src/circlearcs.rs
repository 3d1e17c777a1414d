//! Unions of closed arcs on the circle `[0, 2π)`.
//!
//! Arcs are kept sorted, pairwise disjoint and non-touching inside `[0, 2π]`.
//! An arc crossing angle 0 is stored as two pieces, `[s, 2π]` and `[0, e]`.
//! Endpoints are compared exactly; touching arcs merge because arcs are closed.

use std::f64::consts::{PI, TAU};

use serde::{Deserialize, Serialize};

use crate::hypgeo::wrap_angle;

/// One angular interval. `end` may exceed `2π` for a component that wraps.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Arc {
    pub start: f64,
    pub end: f64,
}

impl Arc {
    pub fn len(&self) -> f64 {
        self.end - self.start
    }

    pub fn is_empty(&self) -> bool {
        self.end <= self.start
    }

    /// Whether direction `theta` lies in the closed arc.
    pub fn contains(&self, theta: f64) -> bool {
        let theta = wrap_angle(theta);
        (theta >= self.start && theta <= self.end) || (self.end > TAU && theta + TAU <= self.end)
    }
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct ArcSet {
    arcs: Vec<(f64, f64)>,
    measure: f64,
}

impl ArcSet {
    pub fn empty() -> Self {
        Self::default()
    }

    pub fn full() -> Self {
        ArcSet {
            arcs: vec![(0.0, TAU)],
            measure: TAU,
        }
    }

    /// Union of arcs given as `(center, halfwidth)` pairs.
    ///
    /// Sorts once, so this is the way to build a set from many shadows.
    pub fn from_arcs<I>(arcs: I) -> Self
    where
        I: IntoIterator<Item = (f64, f64)>,
    {
        let mut pieces = Vec::new();
        for (center, halfwidth) in arcs {
            if push_pieces(&mut pieces, center, halfwidth) {
                return ArcSet::full();
            }
        }
        Self::from_pieces(pieces)
    }

    /// Union of closed intervals `[start, end]`, with `end − start ≤ 2π`;
    /// endpoints are taken modulo 2π.
    pub fn from_intervals<I>(intervals: I) -> Self
    where
        I: IntoIterator<Item = (f64, f64)>,
    {
        let mut pieces = Vec::new();
        for (start, end) in intervals {
            let len = end - start;
            if len >= TAU {
                return ArcSet::full();
            }
            if len < 0.0 {
                continue;
            }
            let (s, e) = if (0.0..TAU).contains(&start) {
                (start, end)
            } else {
                let s = wrap_angle(start);
                (s, s + len)
            };
            if e > TAU {
                pieces.push((s, TAU));
                pieces.push((0.0, e - TAU));
            } else {
                pieces.push((s, e));
            }
        }
        Self::from_pieces(pieces)
    }

    fn from_pieces(mut pieces: Vec<(f64, f64)>) -> Self {
        pieces.sort_by(|a, b| a.0.total_cmp(&b.0));
        let mut arcs: Vec<(f64, f64)> = Vec::with_capacity(pieces.len());
        for (s, e) in pieces {
            match arcs.last_mut() {
                Some(last) if s <= last.1 => {
                    if e > last.1 {
                        last.1 = e;
                    }
                }
                _ => arcs.push((s, e)),
            }
        }
        let measure = arcs.iter().map(|(s, e)| e - s).sum();
        ArcSet { arcs, measure }
    }

    /// The union with the closed arc `[center − halfwidth, center + halfwidth]`.
    pub fn insert_arc(&self, center: f64, halfwidth: f64) -> Self {
        let mut pieces = self.arcs.clone();
        if push_pieces(&mut pieces, center, halfwidth) {
            return ArcSet::full();
        }
        Self::from_pieces(pieces)
    }

    pub fn union(&self, other: &ArcSet) -> Self {
        let mut pieces = self.arcs.clone();
        pieces.extend_from_slice(&other.arcs);
        Self::from_pieces(pieces)
    }

    pub fn measure(&self) -> f64 {
        self.measure
    }

    pub fn is_empty(&self) -> bool {
        self.arcs.is_empty()
    }

    /// Stored pieces in increasing order; a wrapping arc appears as two pieces.
    pub fn pieces(&self) -> &[(f64, f64)] {
        &self.arcs
    }

    pub fn contains(&self, theta: f64) -> bool {
        let theta = wrap_angle(theta);
        let idx = self.arcs.partition_point(|&(s, _)| s <= theta);
        idx > 0 && theta <= self.arcs[idx - 1].1
    }

    /// True iff the arcs leave no gap, using exact endpoint comparison.
    pub fn is_covered(&self) -> bool {
        matches!(self.arcs.as_slice(), [(s, e)] if *s <= 0.0 && *e >= TAU)
    }

    /// Lebesgue measure of `[0, eps) \ self`.
    pub fn uncovered_measure(&self, eps: f64) -> f64 {
        let eps = eps.min(TAU);
        let covered: f64 = self
            .arcs
            .iter()
            .take_while(|&&(s, _)| s < eps)
            .map(|&(s, e)| e.min(eps) - s)
            .sum();
        (eps - covered).max(0.0)
    }

    /// Maximal open arcs not covered by the set, in increasing start order.
    ///
    /// A gap crossing angle 0 is reported once, with `end > 2π`.
    pub fn uncovered_components(&self) -> Vec<Arc> {
        if self.arcs.is_empty() {
            return vec![Arc { start: 0.0, end: TAU }];
        }
        let mut gaps = Vec::with_capacity(self.arcs.len() + 1);
        for w in self.arcs.windows(2) {
            gaps.push(Arc {
                start: w[0].1,
                end: w[1].0,
            });
        }
        let first = self.arcs[0].0;
        let last = self.arcs[self.arcs.len() - 1].1;
        let wrap = Arc {
            start: last,
            end: first + TAU,
        };
        if !wrap.is_empty() {
            if last >= TAU {
                gaps.insert(
                    0,
                    Arc {
                        start: last - TAU,
                        end: first,
                    },
                );
            } else {
                gaps.push(wrap);
            }
        }
        gaps.retain(|g| !g.is_empty());
        gaps.sort_by(|a, b| a.start.total_cmp(&b.start));
        gaps
    }

    /// The closure of the complement.
    pub fn complement(&self) -> Self {
        let mut pieces = Vec::with_capacity(self.arcs.len() + 1);
        let mut prev = 0.0;
        for &(s, e) in &self.arcs {
            if s > prev {
                pieces.push((prev, s));
            }
            prev = e;
        }
        if prev < TAU {
            pieces.push((prev, TAU));
        }
        Self::from_pieces(pieces)
    }
}

/// Push the pieces of one arc; returns true if it covers the whole circle.
fn push_pieces(pieces: &mut Vec<(f64, f64)>, center: f64, halfwidth: f64) -> bool {
    if halfwidth >= PI {
        return true;
    }
    if !(halfwidth > 0.0) {
        return false;
    }
    let c = wrap_angle(center);
    let (s, e) = (c - halfwidth, c + halfwidth);
    if s < 0.0 {
        pieces.push((s + TAU, TAU));
        pieces.push((0.0, e));
    } else if e > TAU {
        pieces.push((s, TAU));
        pieces.push((0.0, e - TAU));
    } else {
        pieces.push((s, e));
    }
    false
}
