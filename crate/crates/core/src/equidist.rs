//! Uniformly distributed coordinate sequences and the product construction
//! `Y_n = ∏_{k<=n} {x_1^{(k)}, ..., x_n^{(k)}} × ∏_{k>n} {x_0^{(k)}}`.
//!
//! A [`PointFamily`] stores only its `n` coordinate lists; the `n^n` points
//! are enumerated lazily. Counting ratios factorize over coordinates, so
//! [`equidist_ratio`] is exact integer arithmetic and never enumerates.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{domain, Error, Result};
use crate::function::CylinderFn;
use crate::numeric::CompensatedSum;
use crate::rect::{ElementaryRect, Interval, IntervalSeq};

/// Largest family built without an explicit budget.
pub const DEFAULT_FAMILY_BUDGET: u128 = 1_000_000;

/// `(√5 - 1) / 2`.
pub const GOLDEN_CONJUGATE: f64 = 0.618_033_988_749_894_9;

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case", tag = "kind")]
pub enum SequenceKind {
    VanDerCorput,
    Weyl { alpha: f64 },
    SeededRandom { seed: u64 },
}

impl SequenceKind {
    pub fn golden_weyl() -> Self {
        Self::Weyl {
            alpha: GOLDEN_CONJUGATE,
        }
    }

    /// The sequence used at coordinate `k` when one kind serves all
    /// coordinates: random seeds are offset by `k - 1`.
    pub fn for_coordinate(self, k: usize) -> Self {
        match self {
            Self::SeededRandom { seed } => Self::SeededRandom {
                seed: seed.wrapping_add(k as u64 - 1),
            },
            other => other,
        }
    }

    /// First `count` points in `[0, 1)`.
    pub fn unit_points(&self, count: usize) -> Vec<f64> {
        match *self {
            Self::VanDerCorput => (1..=count as u64).map(van_der_corput).collect(),
            Self::Weyl { alpha } => (1..=count).map(|i| (i as f64 * alpha).fract()).collect(),
            Self::SeededRandom { seed } => {
                let mut rng = ChaCha8Rng::seed_from_u64(seed);
                (0..count).map(|_| rng.random::<f64>()).collect()
            }
        }
    }
}

impl std::str::FromStr for SequenceKind {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s {
            "vdc" | "van_der_corput" => Ok(Self::VanDerCorput),
            "weyl" => Ok(Self::golden_weyl()),
            "random" | "seeded_random" => Ok(Self::SeededRandom { seed: 0 }),
            other => Err(Error::Input(format!("unknown sequence kind '{other}'"))),
        }
    }
}

/// Base-2 radical inverse of `i`: the bits of `i` mirrored about the point.
pub fn van_der_corput(i: u64) -> f64 {
    (i.reverse_bits() >> 11) as f64 * (1.0 / (1u64 << 53) as f64)
}

/// A coordinate sequence living in `[a, b]`.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct CoordSequence {
    pub kind: SequenceKind,
    pub interval: Interval,
}

/// First `count` points of `seq`, mapped affinely into its interval.
pub fn coord_points(seq: &CoordSequence, count: usize) -> Result<Vec<f64>> {
    if count == 0 {
        return Err(domain("count must be at least 1"));
    }
    let (a, b) = (seq.interval.lo(), seq.interval.hi());
    Ok(seq
        .kind
        .unit_points(count)
        .into_iter()
        .map(|u| (a + u * (b - a)).clamp(a, b))
        .collect())
}

/// The finite family `Y_n` inside a rectangle.
#[derive(Clone, Debug)]
pub struct PointFamily {
    n: usize,
    parent: IntervalSeq,
    coords: Vec<Vec<f64>>,
    anchors: Vec<f64>,
}

impl PointFamily {
    pub fn n(&self) -> usize {
        self.n
    }

    pub fn parent(&self) -> &IntervalSeq {
        &self.parent
    }

    /// The `n` values taken by coordinate `k <= n`.
    pub fn coord_values(&self, k: usize) -> &[f64] {
        &self.coords[k - 1]
    }

    /// `x_0^{(k)}` for `k > n`.
    pub fn anchor(&self, k: usize) -> Result<f64> {
        if k <= self.n {
            return Err(domain(format!("coordinate {k} is not pinned in Y_{}", self.n)));
        }
        match self.anchors.get(k - self.n - 1) {
            Some(&a) => Ok(a),
            None => Ok(self.parent.coord(k)?.midpoint()),
        }
    }

    /// `#Y_n = n^n`.
    pub fn len(&self) -> u128 {
        (self.n as u128).pow(self.n as u32)
    }

    pub fn is_empty(&self) -> bool {
        false
    }

    /// Value of coordinate `k` at the point with per-coordinate indices `idx`.
    fn value(&self, idx: &[usize], k: usize) -> Result<f64> {
        if k <= self.n {
            Ok(self.coords[k - 1][idx[k - 1]])
        } else {
            self.anchor(k)
        }
    }

    /// Lazily enumerate the points, each given on its first `depth`
    /// coordinates (`depth >= n`; later coordinates are anchors).
    pub fn points(&self, depth: usize) -> Result<impl Iterator<Item = Vec<f64>> + '_> {
        let depth = depth.max(self.n);
        let tail: Vec<f64> = (self.n + 1..=depth).map(|k| self.anchor(k)).collect::<Result<_>>()?;
        let n = self.n;
        let total = self.len();
        let mut idx = vec![0usize; n];
        let mut emitted: u128 = 0;
        Ok(std::iter::from_fn(move || {
            if emitted == total {
                return None;
            }
            let mut p: Vec<f64> = (0..n).map(|k| self.coords[k][idx[k]]).collect();
            p.extend_from_slice(&tail);
            emitted += 1;
            for i in (0..n).rev() {
                idx[i] += 1;
                if idx[i] < n {
                    break;
                }
                idx[i] = 0;
            }
            Some(p)
        }))
    }
}

/// Build `Y_n` in `rect` from per-coordinate sequence kinds. `kinds[k-1]`
/// drives coordinate `k`; a shorter list repeats its last kind. Anchors
/// default to midpoints.
pub fn product_family(rect: &IntervalSeq, kinds: &[SequenceKind], n: usize) -> Result<PointFamily> {
    product_family_with(rect, kinds, n, &[], DEFAULT_FAMILY_BUDGET)
}

/// [`product_family`] with explicit anchors for `k = n+1, n+2, ...` and a
/// point budget.
pub fn product_family_with(
    rect: &IntervalSeq,
    kinds: &[SequenceKind],
    n: usize,
    anchors: &[f64],
    budget: u128,
) -> Result<PointFamily> {
    if n == 0 {
        return Err(domain("family index n must be at least 1"));
    }
    let last = *kinds
        .last()
        .ok_or_else(|| domain("at least one sequence kind is required"))?;
    let size = (n as u128).checked_pow(n as u32).unwrap_or(u128::MAX);
    if size > budget {
        return Err(Error::Budget {
            what: "product family points",
            requested: size,
            budget,
        });
    }
    let mut coords = Vec::with_capacity(n);
    for k in 1..=n {
        let kind = kinds.get(k - 1).copied().unwrap_or(last.for_coordinate(k));
        let seq = CoordSequence {
            kind,
            interval: rect.coord(k)?,
        };
        coords.push(coord_points(&seq, n)?);
    }
    for (i, &a) in anchors.iter().enumerate() {
        let k = n + 1 + i;
        if !rect.coord(k)?.contains(a) {
            return Err(domain(format!("anchor {a} lies outside coordinate {k}")));
        }
    }
    Ok(PointFamily {
        n,
        parent: rect.clone(),
        coords,
        anchors: anchors.to_vec(),
    })
}

/// Membership in an override side: half-open `[c, d)`, except that a side
/// ending at the parent's upper endpoint is closed.
pub fn in_override(x: f64, side: &Interval, parent_side: &Interval) -> bool {
    x >= side.lo() && (x < side.hi() || (side.hi() == parent_side.hi() && x <= side.hi()))
}

/// `#(Y_n ∩ U) / #Y_n`, counted exactly.
pub fn equidist_ratio(fam: &PointFamily, u: &ElementaryRect) -> Result<f64> {
    let n = fam.n as u128;
    let mut hits: u128 = 1;
    let mut pinned_in = true;
    let mut free = 0u32;
    for (&k, side) in u.overrides() {
        let parent_side = fam.parent.coord(k)?;
        if k <= fam.n {
            hits *= fam.coords[k - 1]
                .iter()
                .filter(|&&x| in_override(x, side, &parent_side))
                .count() as u128;
            free += 1;
        } else {
            pinned_in &= in_override(fam.anchor(k)?, side, &parent_side);
        }
    }
    if !pinned_in {
        return Ok(0.0);
    }
    Ok(hits as f64 / n.pow(free) as f64)
}

/// `λ(U) / λ(parent)` for an elementary rectangle, from its overrides.
pub fn relative_measure(u: &ElementaryRect) -> Result<f64> {
    let mut s = CompensatedSum::new();
    for (&k, side) in u.overrides() {
        s.add(side.ln_len() - u.parent().coord(k)?.ln_len());
    }
    Ok(s.value().exp())
}

/// Mean of `f` over `Y_n`. Only the first `f.m()` coordinates matter, and
/// `Y_n` projects onto them as a uniform grid, so the mean is taken over
/// `n^min(m, n)` projected points.
pub fn family_average(fam: &PointFamily, f: &CylinderFn) -> Result<f64> {
    let m = f.m();
    let gridded = m.min(fam.n);
    let count = (fam.n as u128).pow(gridded as u32);
    if count > DEFAULT_FAMILY_BUDGET * 16 {
        return Err(Error::Budget {
            what: "projected family points",
            requested: count,
            budget: DEFAULT_FAMILY_BUDGET * 16,
        });
    }
    let mut idx = vec![0usize; fam.n];
    let mut x = vec![0.0; m];
    for k in gridded + 1..=m {
        x[k - 1] = fam.value(&idx, k)?;
    }
    let mut s = CompensatedSum::new();
    for _ in 0..count {
        for k in 1..=gridded {
            x[k - 1] = fam.coords[k - 1][idx[k - 1]];
        }
        s.add(f.eval(&x));
        for i in (0..gridded).rev() {
            idx[i] += 1;
            if idx[i] < fam.n {
                break;
            }
            idx[i] = 0;
        }
    }
    Ok(s.value() / count as f64)
}

#[cfg(test)]
mod tests {
    use super::*;

    /// Independent oracle: reverse the binary digits of i by repeated division.
    fn bit_reversal(mut i: u64) -> f64 {
        let (mut v, mut w) = (0.0, 0.5);
        while i > 0 {
            if i & 1 == 1 {
                v += w;
            }
            i >>= 1;
            w /= 2.0;
        }
        v
    }

    fn unit_seq() -> CoordSequence {
        CoordSequence {
            kind: SequenceKind::VanDerCorput,
            interval: Interval::unit(),
        }
    }

    #[test]
    fn van_der_corput_prefix() {
        assert_eq!(coord_points(&unit_seq(), 4).unwrap(), vec![0.5, 0.25, 0.75, 0.125]);
        for i in 0..5000u64 {
            assert_eq!(van_der_corput(i), bit_reversal(i));
        }
    }

    #[test]
    fn dyadic_prefix_halves() {
        for m in 1..12 {
            let pts = coord_points(&unit_seq(), 1 << m).unwrap();
            let below = pts.iter().filter(|&&x| x < 0.5).count();
            assert_eq!(below, 1 << (m - 1));
        }
    }

    #[test]
    fn degenerate_interval() {
        let iv = Interval::new(2.5, 2.5).unwrap();
        for kind in [SequenceKind::VanDerCorput, SequenceKind::golden_weyl(), SequenceKind::SeededRandom { seed: 3 }] {
            let pts = coord_points(&CoordSequence { kind, interval: iv }, 10).unwrap();
            assert!(pts.iter().all(|&x| x == 2.5));
        }
        assert!(coord_points(&unit_seq(), 0).is_err());
    }

    #[test]
    fn points_stay_in_interval() {
        let iv = Interval::new(-3.0, 7.0).unwrap();
        for kind in [SequenceKind::VanDerCorput, SequenceKind::golden_weyl(), SequenceKind::SeededRandom { seed: 9 }] {
            let pts = coord_points(&CoordSequence { kind, interval: iv }, 1000).unwrap();
            assert!(pts.iter().all(|&x| iv.contains(x)));
        }
    }

    #[test]
    fn small_families() {
        let r = IntervalSeq::unit();
        let vdc = [SequenceKind::VanDerCorput];
        let f1 = product_family(&r, &vdc, 1).unwrap();
        assert_eq!(f1.points(3).unwrap().collect::<Vec<_>>(), vec![vec![0.5, 0.5, 0.5]]);

        let f2 = product_family(&r, &vdc, 2).unwrap();
        let pts: Vec<_> = f2.points(3).unwrap().collect();
        let expect = vec![
            vec![0.5, 0.5, 0.5],
            vec![0.5, 0.25, 0.5],
            vec![0.25, 0.5, 0.5],
            vec![0.25, 0.25, 0.5],
        ];
        assert_eq!(pts, expect);

        let f3 = product_family(&r, &vdc, 3).unwrap();
        let pts: Vec<_> = f3.points(5).unwrap().collect();
        assert_eq!(pts.len(), 27);
        for p in &pts {
            assert!(r.contains_point(p, 5).unwrap());
        }
    }

    #[test]
    fn family_budget() {
        let r = IntervalSeq::unit();
        let vdc = [SequenceKind::VanDerCorput];
        assert!(product_family(&r, &vdc, 7).is_ok());
        assert!(matches!(product_family(&r, &vdc, 8), Err(Error::Budget { .. })));
        assert!(product_family_with(&r, &vdc, 8, &[], 1 << 24).is_ok());
    }

    #[test]
    fn ratio_examples() {
        let r = IntervalSeq::unit();
        let fam = product_family(&r, &[SequenceKind::VanDerCorput], 4).unwrap();
        assert_eq!(equidist_ratio(&fam, &ElementaryRect::whole(r.clone())).unwrap(), 1.0);
        let half = ElementaryRect::new(r.clone(), vec![(1, Interval::new(0.0, 0.5).unwrap())]).unwrap();
        assert_eq!(equidist_ratio(&fam, &half).unwrap(), 0.5);

        // shrinking box [0, 1/n^2]
        let mut prev = f64::INFINITY;
        for n in 2..=7 {
            let fam = product_family(&r, &[SequenceKind::VanDerCorput], n).unwrap();
            let tiny = ElementaryRect::new(r.clone(), vec![(1, Interval::new(0.0, 1.0 / (n * n) as f64).unwrap())]).unwrap();
            let ratio = equidist_ratio(&fam, &tiny).unwrap();
            assert!(ratio <= prev);
            prev = ratio;
        }
        assert_eq!(prev, 0.0);
    }

    #[test]
    fn ratio_matches_enumeration() {
        let r = IntervalSeq::unit();
        let fam = product_family(&r, &[SequenceKind::golden_weyl()], 5).unwrap();
        let u = ElementaryRect::new(
            r.clone(),
            vec![
                (1, Interval::new(0.1, 0.7).unwrap()),
                (3, Interval::new(0.5, 1.0).unwrap()),
                (7, Interval::new(0.25, 0.75).unwrap()),
            ],
        )
        .unwrap();
        let brute = fam
            .points(7)
            .unwrap()
            .filter(|p| {
                u.overrides().iter().all(|(&k, side)| in_override(p[k - 1], side, &Interval::unit()))
            })
            .count() as f64
            / fam.len() as f64;
        assert_eq!(equidist_ratio(&fam, &u).unwrap(), brute);
    }

    #[test]
    fn family_average_examples() {
        let r = IntervalSeq::unit();
        let fam = product_family(&r, &[SequenceKind::VanDerCorput], 4).unwrap();
        let avg = family_average(&fam, &CylinderFn::projection(1)).unwrap();
        assert_eq!(avg, 0.40625);
        assert_eq!(family_average(&fam, &CylinderFn::constant(1.0)).unwrap(), 1.0);
        // coordinate 6 > n is pinned at the midpoint
        assert_eq!(family_average(&fam, &CylinderFn::projection(6)).unwrap(), 0.5);
    }

    #[test]
    fn determinism() {
        let r = IntervalSeq::unit();
        for kind in [SequenceKind::VanDerCorput, SequenceKind::SeededRandom { seed: 42 }] {
            let a: Vec<_> = product_family(&r, &[kind], 4).unwrap().points(4).unwrap().collect();
            let b: Vec<_> = product_family(&r, &[kind], 4).unwrap().points(4).unwrap().collect();
            assert_eq!(a, b);
        }
    }
}
