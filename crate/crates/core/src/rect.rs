//! Rectangles `∏[a_k, b_k]` in `R^∞`, elementary rectangles, the shrinking
//! boxes `Δ_ε`, and their measures.
//!
//! Every [`Interval`] carries the natural log of its length alongside the
//! endpoints. Constructors that know the length analytically (the `Δ_ε`
//! sides, exponential-length fixtures) set it exactly; translation keeps it
//! and scaling adds `ln|s|`, so measure identities hold in log space without
//! the cancellation error of `ln(b - a)`.

use std::collections::BTreeMap;
use std::fmt;
use std::sync::Arc;

use serde::{Deserialize, Serialize};

use crate::error::{domain, Error, Result};
use crate::numeric::CompensatedSum;
use crate::products::{
    grouped_product, FactorSeq, GroupingAlpha, ProductMode, ProductStatus, TailKind,
    DEFAULT_MAX_TERMS, DEFAULT_TOL,
};

/// Absolute tolerance used by [`consistency_check`] on log values.
pub const CONSISTENCY_TOL: f64 = 1e-10;

/// A closed interval `[lo, hi]` with its log-length.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct Interval {
    lo: f64,
    hi: f64,
    ln_len: f64,
}

impl Interval {
    pub fn new(lo: f64, hi: f64) -> Result<Self> {
        if !(lo.is_finite() && hi.is_finite()) {
            return Err(domain(format!("interval endpoints must be finite, got [{lo}, {hi}]")));
        }
        if lo > hi {
            return Err(domain(format!("interval [{lo}, {hi}] has a > b")));
        }
        Ok(Self {
            lo,
            hi,
            ln_len: (hi - lo).ln(),
        })
    }

    /// `[lo, hi]` whose log-length is known to be `ln_len`.
    pub fn with_log_len(lo: f64, hi: f64, ln_len: f64) -> Self {
        debug_assert!(lo <= hi);
        Self { lo, hi, ln_len }
    }

    /// `[-h, h]` where `ln(2h) = ln_len`.
    pub fn symmetric_log(ln_len: f64) -> Self {
        let h = 0.5 * ln_len.exp();
        Self::with_log_len(-h, h, ln_len)
    }

    pub fn unit() -> Self {
        Self::with_log_len(0.0, 1.0, 0.0)
    }

    pub fn lo(&self) -> f64 {
        self.lo
    }

    pub fn hi(&self) -> f64 {
        self.hi
    }

    pub fn len(&self) -> f64 {
        self.ln_len.exp()
    }

    pub fn ln_len(&self) -> f64 {
        self.ln_len
    }

    pub fn is_degenerate(&self) -> bool {
        self.ln_len == f64::NEG_INFINITY
    }

    pub fn midpoint(&self) -> f64 {
        0.5 * (self.lo + self.hi)
    }

    pub fn contains(&self, x: f64) -> bool {
        self.lo <= x && x <= self.hi
    }

    pub fn contains_interval(&self, other: &Interval) -> bool {
        self.lo <= other.lo && other.hi <= self.hi
    }

    pub fn translate(&self, t: f64) -> Self {
        if t == 0.0 {
            return *self;
        }
        Self::with_log_len(self.lo + t, self.hi + t, self.ln_len)
    }

    /// Image under `x -> s x`; a negative `s` swaps the endpoints.
    pub fn scale(&self, s: f64) -> Self {
        let ln_len = self.ln_len + s.abs().ln();
        let (a, b) = (s * self.lo, s * self.hi);
        if s >= 0.0 {
            Self::with_log_len(a, b, ln_len)
        } else {
            Self::with_log_len(b, a, ln_len)
        }
    }

    pub fn negate(&self) -> Self {
        Self::with_log_len(-self.hi, -self.lo, self.ln_len)
    }

    /// Intersection, or `None` when empty.
    pub fn intersect(&self, other: &Interval) -> Option<Interval> {
        if self == other {
            return Some(*self);
        }
        if self.contains_interval(other) {
            return Some(*other);
        }
        if other.contains_interval(self) {
            return Some(*self);
        }
        let lo = self.lo.max(other.lo);
        let hi = self.hi.min(other.hi);
        (lo <= hi).then(|| Interval::new(lo, hi).expect("finite ordered endpoints"))
    }
}

impl fmt::Display for Interval {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "[{}, {}]", self.lo, self.hi)
    }
}

type CoordFn = Arc<dyn Fn(usize) -> Interval + Send + Sync>;

/// Coordinates beyond the explicitly stored head.
#[derive(Clone)]
pub enum RectTail {
    /// `[0, 1]` at every later coordinate.
    Unit,
    /// A generator valid at every index `k` (1-based).
    ClosedForm(CoordFn),
    /// Unknown.
    Truncated,
}

impl fmt::Debug for RectTail {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Self::Unit => f.write_str("Unit"),
            Self::ClosedForm(_) => f.write_str("ClosedForm(..)"),
            Self::Truncated => f.write_str("Truncated"),
        }
    }
}

/// An infinite rectangle `∏_{k>=1} [a_k, b_k]`.
#[derive(Clone, Debug)]
pub struct IntervalSeq {
    head: Vec<Interval>,
    tail: RectTail,
}

impl IntervalSeq {
    pub fn new(head: Vec<Interval>, tail: RectTail) -> Self {
        Self { head, tail }
    }

    /// `∏ [0, 1]`.
    pub fn unit() -> Self {
        Self::new(Vec::new(), RectTail::Unit)
    }

    /// The given leading intervals followed by `[0, 1]`.
    pub fn unit_tail(head: Vec<Interval>) -> Self {
        Self::new(head, RectTail::Unit)
    }

    pub fn truncated(head: Vec<Interval>) -> Self {
        Self::new(head, RectTail::Truncated)
    }

    pub fn closed_form<F>(f: F) -> Self
    where
        F: Fn(usize) -> Interval + Send + Sync + 'static,
    {
        Self::new(Vec::new(), RectTail::ClosedForm(Arc::new(f)))
    }

    /// `∏ [0, e^{l(k)}]` with exact log side lengths `l(k)`.
    pub fn from_log_sides<F>(l: F) -> Self
    where
        F: Fn(usize) -> f64 + Send + Sync + 'static,
    {
        Self::closed_form(move |k| {
            let ln_len = l(k);
            Interval::with_log_len(0.0, ln_len.exp(), ln_len)
        })
    }

    /// Number of explicitly stored leading coordinates.
    pub fn depth(&self) -> usize {
        self.head.len()
    }

    pub fn tail(&self) -> &RectTail {
        &self.tail
    }

    pub fn has_unit_tail(&self) -> bool {
        matches!(self.tail, RectTail::Unit)
    }

    /// Coordinate `k` (1-based).
    pub fn coord(&self, k: usize) -> Result<Interval> {
        if k == 0 {
            return Err(domain("coordinate indices start at 1"));
        }
        if let Some(iv) = self.head.get(k - 1) {
            return Ok(*iv);
        }
        match &self.tail {
            RectTail::Unit => Ok(Interval::unit()),
            RectTail::ClosedForm(f) => Ok(f(k)),
            RectTail::Truncated => Err(Error::TailUnspecified {
                index: k,
                depth: self.head.len(),
            }),
        }
    }

    /// The first `d` coordinates.
    pub fn coords(&self, d: usize) -> Result<Vec<Interval>> {
        (1..=d).map(|k| self.coord(k)).collect()
    }

    /// The log side lengths as a factor sequence.
    pub fn side_factors(&self) -> FactorSeq {
        let depth = self.head.len();
        let kind = match self.tail {
            RectTail::Unit => TailKind::ConstantOne,
            RectTail::ClosedForm(_) => TailKind::ClosedForm,
            RectTail::Truncated => TailKind::Truncated,
        };
        let r = self.clone();
        FactorSeq::from_log_fn(kind, depth, move |k| {
            r.coord(k).map(|iv| iv.ln_len()).unwrap_or(f64::NAN)
        })
    }

    /// Copy with the first `d` coordinates materialized in the head.
    fn materialized(&self, d: usize) -> Result<Self> {
        let mut out = self.clone();
        for k in out.head.len() + 1..=d {
            out.head.push(self.coord(k)?);
        }
        Ok(out)
    }

    /// Copy with coordinate `k` replaced.
    pub fn with_coord(&self, k: usize, iv: Interval) -> Result<Self> {
        if k == 0 {
            return Err(domain("coordinate indices start at 1"));
        }
        let mut out = self.materialized(k)?;
        out.head[k - 1] = iv;
        Ok(out)
    }

    /// Translate by the cylinder vector `t` (zero beyond `t.len()`).
    pub fn translate(&self, t: &[f64]) -> Result<Self> {
        let mut out = self.materialized(t.len())?;
        for (iv, &tk) in out.head.iter_mut().zip(t) {
            *iv = iv.translate(tk);
        }
        Ok(out)
    }

    /// Scale coordinate `k` by `s[k-1]` for `k <= s.len()`.
    pub fn scale_coords(&self, s: &[f64]) -> Result<Self> {
        let mut out = self.materialized(s.len())?;
        for (iv, &sk) in out.head.iter_mut().zip(s) {
            *iv = iv.scale(sk);
        }
        Ok(out)
    }

    /// Swap coordinates `i` and `j`.
    pub fn swap(&self, i: usize, j: usize) -> Result<Self> {
        if i == 0 || j == 0 {
            return Err(domain("coordinate indices start at 1"));
        }
        let mut out = self.materialized(i.max(j))?;
        out.head.swap(i - 1, j - 1);
        Ok(out)
    }

    /// `-R = ∏ [-b_k, -a_k]`.
    pub fn negate(&self) -> Self {
        let head = self.head.iter().map(Interval::negate).collect();
        let tail = match &self.tail {
            RectTail::Unit => {
                RectTail::ClosedForm(Arc::new(|_| Interval::unit().negate()))
            }
            RectTail::ClosedForm(f) => {
                let f = f.clone();
                RectTail::ClosedForm(Arc::new(move |k| f(k).negate()))
            }
            RectTail::Truncated => RectTail::Truncated,
        };
        Self::new(head, tail)
    }

    /// Coordinatewise intersection; both tails must be unit.
    pub fn intersect(&self, other: &IntervalSeq) -> Result<IntervalSeq> {
        if !(self.has_unit_tail() && other.has_unit_tail()) {
            return Err(domain("intersection needs unit tails beyond a common depth"));
        }
        let d = self.depth().max(other.depth());
        let mut head = Vec::with_capacity(d);
        for k in 1..=d {
            let (a, b) = (self.coord(k)?, other.coord(k)?);
            match a.intersect(&b) {
                Some(iv) => head.push(iv),
                None => return Err(domain(format!("rectangles do not meet at coordinate {k}"))),
            }
        }
        Ok(IntervalSeq::unit_tail(head))
    }

    /// Whether the cylinder point `x` (zero beyond `x.len()`) lies in the
    /// rectangle, checking coordinates up to `max(x.len(), depth)`.
    pub fn contains_point(&self, x: &[f64], depth: usize) -> Result<bool> {
        for k in 1..=x.len().max(depth) {
            let xk = x.get(k - 1).copied().unwrap_or(0.0);
            if !self.coord(k)?.contains(xk) {
                return Ok(false);
            }
        }
        Ok(true)
    }
}

/// The box `Δ_ε = ∏ [-a_k(ε), a_k(ε)]`, `a_k(ε) = e^{-1/(2^k ε)} / 2`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct DeltaBox {
    epsilon: f64,
}

impl DeltaBox {
    pub fn new(epsilon: f64) -> Result<Self> {
        if !(epsilon > 0.0 && epsilon.is_finite()) {
            return Err(domain(format!("epsilon must be positive, got {epsilon}")));
        }
        Ok(Self { epsilon })
    }

    pub fn epsilon(&self) -> f64 {
        self.epsilon
    }

    /// `ln(2 a_k) = -1 / (2^k ε)`.
    pub fn ln_side(&self, k: usize) -> f64 {
        -1.0 / (pow2(k) * self.epsilon)
    }

    /// `a_k(ε)`.
    pub fn half_width(&self, k: usize) -> f64 {
        0.5 * self.ln_side(k).exp()
    }

    pub fn interval(&self, k: usize) -> Interval {
        Interval::symmetric_log(self.ln_side(k))
    }

    /// `ln λ(Δ_ε) = -1/ε`.
    pub fn log_measure(&self) -> f64 {
        -1.0 / self.epsilon
    }

    pub fn to_rect(&self) -> IntervalSeq {
        let b = *self;
        IntervalSeq::closed_form(move |k| b.interval(k))
    }
}

/// `2^k` as a float, exact for every `k` that does not overflow.
pub(crate) fn pow2(k: usize) -> f64 {
    2f64.powi(k.min(i32::MAX as usize) as i32)
}

/// A measure value in log space.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct MeasureValue {
    pub log_value: f64,
    pub status: ProductStatus,
}

impl MeasureValue {
    pub fn value(&self) -> f64 {
        self.log_value.exp()
    }
}

/// `μ_α(R)` (ordinary) or `ν_α(R)` (standard) with default tolerances.
pub fn rect_measure(r: &IntervalSeq, alpha: &GroupingAlpha, mode: ProductMode) -> Result<MeasureValue> {
    rect_measure_with(r, alpha, mode, DEFAULT_TOL, DEFAULT_MAX_TERMS)
}

pub fn rect_measure_with(
    r: &IntervalSeq,
    alpha: &GroupingAlpha,
    mode: ProductMode,
    tol: f64,
    max_terms: usize,
) -> Result<MeasureValue> {
    let res = grouped_product(&r.side_factors(), alpha, mode, tol, max_terms)?;
    if res.status == ProductStatus::Oscillating {
        return Err(Error::NotInClass);
    }
    Ok(MeasureValue {
        log_value: res.log_value,
        status: res.status,
    })
}

/// A rectangle that differs from its parent in finitely many coordinates,
/// each override lying inside the parent side.
#[derive(Clone, Debug)]
pub struct ElementaryRect {
    parent: IntervalSeq,
    overrides: BTreeMap<usize, Interval>,
}

impl ElementaryRect {
    pub fn new(parent: IntervalSeq, overrides: Vec<(usize, Interval)>) -> Result<Self> {
        let mut map = BTreeMap::new();
        for (k, iv) in overrides {
            let side = parent.coord(k)?;
            if !(side.lo() <= iv.lo() && iv.lo() < iv.hi() && iv.hi() <= side.hi()) {
                return Err(domain(format!(
                    "override {iv} at coordinate {k} must satisfy a <= c < d <= b within {side}"
                )));
            }
            if map.insert(k, iv).is_some() {
                return Err(domain(format!("coordinate {k} overridden twice")));
            }
        }
        Ok(Self {
            parent,
            overrides: map,
        })
    }

    /// Skips the containment check; for grid cells whose float sides may
    /// collapse on very short parent sides.
    pub(crate) fn new_unchecked(parent: IntervalSeq, overrides: Vec<(usize, Interval)>) -> Result<Self> {
        Ok(Self {
            parent,
            overrides: overrides.into_iter().collect(),
        })
    }

    /// The parent itself, seen as an elementary rectangle.
    pub fn whole(parent: IntervalSeq) -> Self {
        Self {
            parent,
            overrides: BTreeMap::new(),
        }
    }

    pub fn parent(&self) -> &IntervalSeq {
        &self.parent
    }

    pub fn overrides(&self) -> &BTreeMap<usize, Interval> {
        &self.overrides
    }

    /// Largest overridden index, or 0.
    pub fn m(&self) -> usize {
        self.overrides.keys().next_back().copied().unwrap_or(0)
    }

    pub fn coord(&self, k: usize) -> Result<Interval> {
        match self.overrides.get(&k) {
            Some(iv) => Ok(*iv),
            None => self.parent.coord(k),
        }
    }

    /// The rectangle with overrides spliced into the parent.
    pub fn to_rect(&self) -> Result<IntervalSeq> {
        let mut r = self.parent.materialized(self.m())?;
        for (&k, iv) in &self.overrides {
            r.head[k - 1] = *iv;
        }
        Ok(r)
    }
}

pub fn elementary_measure(
    u: &ElementaryRect,
    alpha: &GroupingAlpha,
    mode: ProductMode,
) -> Result<MeasureValue> {
    rect_measure(&u.to_rect()?, alpha, mode)
}

/// Tychonoff distance between two cylinder points (zero beyond their lengths).
pub fn tychonoff_distance(x: &[f64], y: &[f64]) -> f64 {
    let n = x.len().max(y.len());
    let mut s = CompensatedSum::new();
    for k in 1..=n {
        let d = (x.get(k - 1).copied().unwrap_or(0.0) - y.get(k - 1).copied().unwrap_or(0.0)).abs();
        s.add(d / (pow2(k) * (1.0 + d)));
    }
    s.value()
}

/// `Σ_k ℓ_k / (2^k (1 + ℓ_k))` over the sides of `r`, stopped once the
/// remaining weight `2^{-K}` falls below `tail_tol`.
pub fn diameter(r: &IntervalSeq, tail_tol: f64) -> Result<f64> {
    if tail_tol.is_nan() || tail_tol <= 0.0 {
        return Err(domain(format!("tail_tol must be positive, got {tail_tol}")));
    }
    let mut s = CompensatedSum::new();
    let mut k = 1;
    loop {
        let l = r.coord(k)?.len();
        s.add(l / (pow2(k) * (1.0 + l)));
        if 1.0 / pow2(k) < tail_tol {
            break;
        }
        k += 1;
    }
    Ok(s.value())
}

/// Tychonoff diameter of `Δ_ε`.
pub fn delta_box_diameter(eps: f64, tail_tol: f64) -> Result<f64> {
    diameter(&DeltaBox::new(eps)?.to_rect(), tail_tol)
}

/// `ln μ_R(X) = ln λ(R) + Σ_k [ln m(X_k ∩ R_k) - ln m(R_k)]` for `X ⊆ R` with
/// unit tails.
pub fn relative_log_measure(
    r: &IntervalSeq,
    x: &IntervalSeq,
    alpha: &GroupingAlpha,
    mode: ProductMode,
) -> Result<f64> {
    let base = rect_measure(r, alpha, mode)?.log_value;
    let d = r.depth().max(x.depth());
    let mut s = CompensatedSum::new();
    s.add(base);
    for k in 1..=d {
        let rk = r.coord(k)?;
        let xk = x.coord(k)?;
        let meet = xk.intersect(&rk).map_or(f64::NEG_INFINITY, |iv| iv.ln_len());
        s.add(meet);
        s.add(-rk.ln_len());
    }
    Ok(s.value())
}

/// Whether `μ_{r1}(x)` and `μ_{r2}(x)` agree to [`CONSISTENCY_TOL`].
pub fn consistency_check(
    r1: &IntervalSeq,
    r2: &IntervalSeq,
    x: &ElementaryRect,
    alpha: &GroupingAlpha,
    mode: ProductMode,
) -> Result<bool> {
    let (a, b) = consistency_values(r1, r2, x, alpha, mode)?;
    Ok(a == b || (a - b).abs() <= CONSISTENCY_TOL)
}

/// The two log values compared by [`consistency_check`].
pub fn consistency_values(
    r1: &IntervalSeq,
    r2: &IntervalSeq,
    x: &ElementaryRect,
    alpha: &GroupingAlpha,
    mode: ProductMode,
) -> Result<(f64, f64)> {
    let z = r1.intersect(r2)?;
    let xr = x.to_rect()?;
    if !xr.has_unit_tail() {
        return Err(domain("x must have a unit tail"));
    }
    for k in 1..=z.depth().max(xr.depth()) {
        if !z.coord(k)?.contains_interval(&xr.coord(k)?) {
            return Err(domain(format!("x leaves r1 ∩ r2 at coordinate {k}")));
        }
    }
    Ok((
        relative_log_measure(r1, &xr, alpha, mode)?,
        relative_log_measure(r2, &xr, alpha, mode)?,
    ))
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum RectSpecTail {
    Unit,
    DeltaBox,
}

/// JSON description of a rectangle:
/// `{"coords": [[a, b], ...], "tail": "unit" | "delta_box", "epsilon": x, "depth": d}`.
///
/// For `delta_box`, `coords` replace the leading sides of `Δ_ε`. For `unit`,
/// coordinates past `coords` and up to `depth` are `[0, 1]`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RectSpec {
    #[serde(default)]
    pub coords: Vec<[f64; 2]>,
    pub tail: RectSpecTail,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub epsilon: Option<f64>,
    #[serde(default)]
    pub depth: usize,
}

impl RectSpec {
    pub fn to_rect(&self) -> Result<IntervalSeq> {
        let head = self
            .coords
            .iter()
            .map(|&[a, b]| Interval::new(a, b))
            .collect::<Result<Vec<_>>>()?;
        match self.tail {
            RectSpecTail::Unit => Ok(IntervalSeq::unit_tail(head)),
            RectSpecTail::DeltaBox => {
                let eps = self
                    .epsilon
                    .ok_or_else(|| Error::Input("delta_box rectangle needs \"epsilon\"".into()))?;
                let mut r = DeltaBox::new(eps)?.to_rect();
                for (i, iv) in head.into_iter().enumerate() {
                    r = r.with_coord(i + 1, iv)?;
                }
                Ok(r)
            }
        }
    }

    pub fn from_json(s: &str) -> Result<Self> {
        serde_json::from_str(s).map_err(|e| Error::Input(format!("rectangle spec: {e}")))
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string(self).expect("plain data serializes")
    }
}
