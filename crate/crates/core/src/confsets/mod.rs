//! Confidence regions for `φ(P)`: the plug-in Wald interval, score-test
//! inversion for LATE, a binary union-bound set, and the interval
//! arithmetic they rely on. All levels are confidence levels `1 − α`.

mod quantile;
mod score;
mod union;
mod wald;

pub use quantile::normal_quantile;
pub use score::{score_invert_late, score_region_analytic, ScoreEval, ScoreGrid, LateMoments};
pub use union::{binary_union_set, ComponentCi, Grouping, UnionConfig, UnionTarget, UnionOutcome};
pub use wald::{dn_score_invert, influence_values, wald_ci, WaldOptions, WaldOutcome};

use std::fmt;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Closed interval with possibly infinite endpoints.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Interval {
    pub lo: f64,
    pub hi: f64,
}

impl Interval {
    pub fn new(lo: f64, hi: f64) -> Result<Self> {
        if lo.is_nan() || hi.is_nan() || lo > hi {
            return Err(Error::InvalidInput(format!("[{lo}, {hi}] is not an interval")));
        }
        Ok(Self { lo, hi })
    }

    pub fn point(x: f64) -> Self {
        Self { lo: x, hi: x }
    }

    pub fn real_line() -> Self {
        Self { lo: f64::NEG_INFINITY, hi: f64::INFINITY }
    }

    pub fn contains(&self, x: f64) -> bool {
        self.lo <= x && x <= self.hi
    }

    /// `0` lies strictly inside.
    pub fn straddles_zero(&self) -> bool {
        self.lo < 0.0 && 0.0 < self.hi
    }

    pub fn is_zero(&self) -> bool {
        self.lo == 0.0 && self.hi == 0.0
    }

    pub fn width(&self) -> f64 {
        self.hi - self.lo
    }

    pub fn is_bounded(&self) -> bool {
        self.lo.is_finite() && self.hi.is_finite()
    }

    pub fn intersect(&self, other: &Interval) -> Option<Interval> {
        let lo = self.lo.max(other.lo);
        let hi = self.hi.min(other.hi);
        (lo <= hi).then_some(Interval { lo, hi })
    }

    /// Minkowski sum.
    pub fn add(&self, other: &Interval) -> Interval {
        Interval { lo: self.lo + other.lo, hi: self.hi + other.hi }
    }

    /// Set image of `s·t`, with `0·∞ = 0` at unattained infinite ends.
    pub fn mul(&self, other: &Interval) -> Interval {
        let p = |a: f64, b: f64| if a == 0.0 || b == 0.0 { 0.0 } else { a * b };
        let c = [p(self.lo, other.lo), p(self.lo, other.hi), p(self.hi, other.lo), p(self.hi, other.hi)];
        Interval {
            lo: c.iter().copied().fold(f64::INFINITY, f64::min),
            hi: c.iter().copied().fold(f64::NEG_INFINITY, f64::max),
        }
    }
}

impl fmt::Display for Interval {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "[{}, {}]", self.lo, self.hi)
    }
}

/// Exact image `{s / t : s ∈ num, t ∈ den, t ≠ 0}` for finite boxes.
pub fn interval_div(num: Interval, den: Interval) -> ConfidenceRegion {
    let (a, b, c, d) = (num.lo, num.hi, den.lo, den.hi);
    let neg = f64::NEG_INFINITY;
    let pos = f64::INFINITY;
    let iv = |lo: f64, hi: f64| Interval { lo, hi };
    if den.is_zero() {
        return ConfidenceRegion::Empty;
    }
    if num.is_zero() {
        return ConfidenceRegion::Union(vec![Interval::point(0.0)]);
    }
    let pieces = if c > 0.0 || d < 0.0 {
        let q = [a / c, a / d, b / c, b / d];
        vec![iv(q.iter().copied().fold(pos, f64::min), q.iter().copied().fold(neg, f64::max))]
    } else if c < 0.0 && d > 0.0 {
        if a > 0.0 {
            vec![iv(neg, a / c), iv(a / d, pos)]
        } else if b < 0.0 {
            vec![iv(neg, b / d), iv(b / c, pos)]
        } else {
            vec![iv(neg, pos)]
        }
    } else if c == 0.0 {
        // t ∈ (0, d]
        if a > 0.0 {
            vec![iv(a / d, pos)]
        } else if b < 0.0 {
            vec![iv(neg, b / d)]
        } else if a == 0.0 {
            vec![iv(0.0, pos)]
        } else if b == 0.0 {
            vec![iv(neg, 0.0)]
        } else {
            vec![iv(neg, pos)]
        }
    } else {
        // t ∈ [c, 0)
        if a > 0.0 {
            vec![iv(neg, a / c)]
        } else if b < 0.0 {
            vec![iv(b / c, pos)]
        } else if a == 0.0 {
            vec![iv(neg, 0.0)]
        } else if b == 0.0 {
            vec![iv(0.0, pos)]
        } else {
            vec![iv(neg, pos)]
        }
    };
    ConfidenceRegion::Union(merge(pieces))
}

/// Sorts and merges overlapping or touching intervals.
fn merge(mut pieces: Vec<Interval>) -> Vec<Interval> {
    pieces.sort_by(|x, y| x.lo.total_cmp(&y.lo));
    let mut out: Vec<Interval> = Vec::with_capacity(pieces.len());
    for p in pieces {
        match out.last_mut() {
            Some(last) if p.lo <= last.hi => last.hi = last.hi.max(p.hi),
            _ => out.push(p),
        }
    }
    out
}

/// A finite union of closed intervals, possibly the whole parameter range.
#[derive(Debug, Clone, PartialEq)]
pub enum ConfidenceRegion {
    FullRange(Interval),
    Union(Vec<Interval>),
    Empty,
}

impl ConfidenceRegion {
    /// Normalizes `pieces ∩ s`: merged, clipped, and collapsed to
    /// `FullRange(s)` or `Empty` when appropriate.
    pub fn from_pieces(pieces: Vec<Interval>, s: Interval) -> Self {
        let clipped: Vec<Interval> = merge(pieces).iter().filter_map(|p| p.intersect(&s)).collect();
        match clipped.as_slice() {
            [] => ConfidenceRegion::Empty,
            [only] if *only == s => ConfidenceRegion::FullRange(s),
            _ => ConfidenceRegion::Union(clipped),
        }
    }

    pub fn intersect(&self, s: Interval) -> Self {
        match self {
            ConfidenceRegion::FullRange(r) => match r.intersect(&s) {
                Some(i) if i == s => ConfidenceRegion::FullRange(s),
                Some(i) => ConfidenceRegion::Union(vec![i]),
                None => ConfidenceRegion::Empty,
            },
            ConfidenceRegion::Union(v) => Self::from_pieces(v.clone(), s),
            ConfidenceRegion::Empty => ConfidenceRegion::Empty,
        }
    }

    /// Adds an interval to every piece (Minkowski sum).
    pub fn shift(&self, r: &Interval) -> Self {
        match self {
            ConfidenceRegion::FullRange(s) => ConfidenceRegion::Union(vec![s.add(r)]),
            ConfidenceRegion::Union(v) => ConfidenceRegion::Union(merge(v.iter().map(|p| p.add(r)).collect())),
            ConfidenceRegion::Empty => ConfidenceRegion::Empty,
        }
    }

    /// Multiplies every piece by an interval.
    pub fn scale(&self, r: &Interval) -> Self {
        match self {
            ConfidenceRegion::FullRange(s) => ConfidenceRegion::Union(vec![s.mul(r)]),
            ConfidenceRegion::Union(v) => ConfidenceRegion::Union(merge(v.iter().map(|p| p.mul(r)).collect())),
            ConfidenceRegion::Empty => ConfidenceRegion::Empty,
        }
    }

    pub fn contains(&self, x: f64) -> bool {
        match self {
            ConfidenceRegion::FullRange(s) => s.contains(x),
            ConfidenceRegion::Union(v) => v.iter().any(|p| p.contains(x)),
            ConfidenceRegion::Empty => false,
        }
    }

    pub fn is_full(&self) -> bool {
        matches!(self, ConfidenceRegion::FullRange(_))
    }

    pub fn intervals(&self) -> Vec<Interval> {
        match self {
            ConfidenceRegion::FullRange(s) => vec![*s],
            ConfidenceRegion::Union(v) => v.clone(),
            ConfidenceRegion::Empty => Vec::new(),
        }
    }

    /// `sup − inf` of the region; `0` when empty.
    pub fn diameter(&self) -> f64 {
        let v = self.intervals();
        match (v.first(), v.last()) {
            (Some(first), Some(last)) => last.hi - first.lo,
            _ => 0.0,
        }
    }

    pub fn to_file(&self) -> RegionFile {
        let kind = match self {
            ConfidenceRegion::FullRange(_) => "full",
            ConfidenceRegion::Union(_) => "union",
            ConfidenceRegion::Empty => "empty",
        };
        let d = self.diameter();
        RegionFile {
            kind: kind.into(),
            intervals: self.intervals().iter().map(|i| [Bound(i.lo), Bound(i.hi)]).collect(),
            diameter: Bound(d),
        }
    }
}

impl fmt::Display for ConfidenceRegion {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            ConfidenceRegion::FullRange(s) => write!(f, "full range {s}"),
            ConfidenceRegion::Empty => write!(f, "empty"),
            ConfidenceRegion::Union(v) => {
                let parts: Vec<String> = v.iter().map(|i| i.to_string()).collect();
                write!(f, "{}", parts.join(" ∪ "))
            }
        }
    }
}

/// Real number that serializes infinities as `"inf"` / `"-inf"`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Bound(pub f64);

impl Serialize for Bound {
    fn serialize<S: serde::Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        if self.0 == f64::INFINITY {
            s.serialize_str("inf")
        } else if self.0 == f64::NEG_INFINITY {
            s.serialize_str("-inf")
        } else {
            s.serialize_f64(self.0)
        }
    }
}

impl<'de> Deserialize<'de> for Bound {
    fn deserialize<D: serde::Deserializer<'de>>(d: D) -> std::result::Result<Self, D::Error> {
        #[derive(Deserialize)]
        #[serde(untagged)]
        enum Raw {
            Num(f64),
            Text(String),
        }
        match Raw::deserialize(d)? {
            Raw::Num(x) => Ok(Bound(x)),
            Raw::Text(t) if t == "inf" => Ok(Bound(f64::INFINITY)),
            Raw::Text(t) if t == "-inf" => Ok(Bound(f64::NEG_INFINITY)),
            Raw::Text(t) => Err(serde::de::Error::custom(format!("expected a number or \"inf\", got {t:?}"))),
        }
    }
}

/// On-disk form of a [`ConfidenceRegion`].
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RegionFile {
    pub kind: String,
    pub intervals: Vec<[Bound; 2]>,
    pub diameter: Bound,
}

pub(crate) fn check_level(level: f64) -> Result<()> {
    if level > 0.0 && level < 1.0 {
        Ok(())
    } else {
        Err(Error::InvalidInput(format!("level must lie in (0, 1), got {level}")))
    }
}
