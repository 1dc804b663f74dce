//! The nascent delta `η_ε = e^{1/ε} 1_{Δ_ε}` and the delta functional
//! `δ(f) = lim_{ε→0+} ∫ η_ε f dλ`, evaluated two ways: as the limit of box
//! averages (Riemann route) and as a double limit of averages over the
//! product families `Y_n(ε) ⊂ Δ_ε` (families route).
//!
//! The height `e^{1/ε}` and the box measure `e^{-1/ε}` cancel exactly, so all
//! quadrature runs on normalized averages.

use serde::{Deserialize, Serialize};

use crate::equidist::{family_average, product_family, SequenceKind};
use crate::error::{domain, Error, Result};
use crate::function::CylinderFn;
use crate::numeric::CompensatedSum;
use crate::rect::{DeltaBox, IntervalSeq};
use crate::riemann::{intermediate_value_point, riemann_average, RiemannOptions};

/// Sides shorter than this (relative to `max(1, |center|)`) are held at
/// their center during quadrature.
pub const FREEZE_BELOW: f64 = 1e-14;

/// `ε_j = 2^{-j}`, `j = 1..=12`.
pub fn default_eps_schedule() -> Vec<f64> {
    (1..=12).map(|j| 0.5f64.powi(j)).collect()
}

/// `n = 2..=7`.
pub fn default_n_schedule() -> Vec<usize> {
    (2..=7).collect()
}

/// `η_ε`, represented by its box and log height.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct NascentDelta {
    pub boxed: DeltaBox,
}

impl NascentDelta {
    pub fn new(epsilon: f64) -> Result<Self> {
        Ok(Self {
            boxed: DeltaBox::new(epsilon)?,
        })
    }

    pub fn epsilon(&self) -> f64 {
        self.boxed.epsilon()
    }

    /// `ln e^{Σ_k 1/(2^k ε)} = 1/ε`.
    pub fn log_height(&self) -> f64 {
        1.0 / self.epsilon()
    }

    /// `ln η_ε(x)` for a cylinder point (zero beyond `x.len()`): `1/ε` inside
    /// `Δ_ε`, `-inf` outside. Compared in log space, `|x_k| <= a_k(ε)` reads
    /// `ln 2|x_k| <= -1/(2^k ε)`, which stays decidable when `a_k` underflows.
    pub fn log_eval(&self, x: &[f64]) -> Result<f64> {
        for (i, &xk) in x.iter().enumerate() {
            let k = i + 1;
            if xk.is_nan() {
                return Err(Error::Depth(k));
            }
            if (2.0 * xk.abs()).ln() > self.boxed.ln_side(k) {
                return Ok(f64::NEG_INFINITY);
            }
        }
        Ok(self.log_height())
    }
}

/// `η_ε(x)` in log space.
pub fn nascent_eval(nd: &NascentDelta, x: &[f64]) -> Result<f64> {
    nd.log_eval(x)
}

/// One estimate inside a limit schedule.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct LimitRow {
    pub epsilon: f64,
    /// Family size at which the inner limit stopped (families route).
    pub n: Option<usize>,
    pub estimate: f64,
    /// Whether the inner computation met its own tolerance.
    pub inner_converged: bool,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct LimitEstimate {
    pub value: f64,
    pub eps_schedule: Vec<f64>,
    pub n_schedule: Vec<usize>,
    pub cauchy_gap: f64,
    pub rows: Vec<LimitRow>,
}

fn check_schedule(eps: &[f64], tol: f64) -> Result<()> {
    if eps.is_empty() {
        return Err(domain("epsilon schedule is empty"));
    }
    if eps.iter().any(|&e| !(e > 0.0 && e.is_finite())) {
        return Err(domain("epsilon values must be positive"));
    }
    if eps.windows(2).any(|w| w[1] >= w[0]) {
        return Err(domain("epsilon schedule must be strictly decreasing"));
    }
    if tol.is_nan() || tol <= 0.0 {
        return Err(domain(format!("tol must be positive, got {tol}")));
    }
    Ok(())
}

/// Run an outer Cauchy loop over `eps`; `inner` yields one row per ε.
fn outer_limit<F>(eps: &[f64], tol: f64, what: &'static str, mut inner: F) -> Result<LimitEstimate>
where
    F: FnMut(f64) -> Result<LimitRow>,
{
    let mut rows: Vec<LimitRow> = Vec::new();
    let mut gap = f64::INFINITY;
    for &e in eps {
        let row = inner(e)?;
        if let Some(prev) = rows.last() {
            gap = (row.estimate - prev.estimate).abs();
            if gap < tol && prev.inner_converged && row.inner_converged {
                rows.push(row);
                let used = rows.iter().map(|r| r.epsilon).collect();
                let ns = rows.iter().filter_map(|r| r.n).collect();
                return Ok(LimitEstimate {
                    value: row.estimate,
                    eps_schedule: used,
                    n_schedule: ns,
                    cauchy_gap: gap,
                    rows,
                });
            }
        }
        rows.push(row);
    }
    Err(Error::NoConvergence {
        what,
        gap,
        partial: rows.iter().map(|r| (r.epsilon, r.estimate)).collect(),
    })
}

fn box_options(tol: f64) -> RiemannOptions {
    RiemannOptions {
        freeze_below: Some(FREEZE_BELOW),
        best_effort: true,
        ..RiemannOptions::new(tol)
    }
}

/// Normalized average of `f` over `rect` by refining Riemann sums.
fn box_average(f: &CylinderFn, rect: &IntervalSeq, tol: f64) -> Result<(f64, bool)> {
    let est = riemann_average(f, rect, &box_options(tol))?;
    Ok((est.average, est.converged))
}

/// `δ(f)` as the limit of `(1/λ(Δ_ε)) ∫_{Δ_ε} f dλ`.
///
/// Each box average targets a Darboux width of `tol/2`; when the cell budget
/// stops it short the row is marked unconverged and cannot end the schedule.
pub fn delta_via_integral(f: &CylinderFn, eps_schedule: &[f64], tol: f64) -> Result<LimitEstimate> {
    sifting(f, &[], eps_schedule, tol)
}

/// `∫ δ(x - T) f(x) dλ(x)`: the limit of averages of `f` over `Δ_ε + T`.
pub fn sifting(f: &CylinderFn, shift: &[f64], eps_schedule: &[f64], tol: f64) -> Result<LimitEstimate> {
    check_schedule(eps_schedule, tol)?;
    outer_limit(eps_schedule, tol, "delta functional (integral route)", |e| {
        let rect = DeltaBox::new(e)?.to_rect().translate(shift)?;
        let (estimate, inner_converged) = box_average(f, &rect, tol / 2.0)?;
        Ok(LimitRow {
            epsilon: e,
            n: None,
            estimate,
            inner_converged,
        })
    })
}

/// `δ(f) = lim_ε lim_n (1/#Y_n(ε)) Σ_{y ∈ Y_n(ε)} f(y)` with van der Corput
/// coordinates and centered anchors. The inner limit over `n_schedule`
/// stops at a Cauchy gap below `tol/2`; the outer one likewise.
pub fn delta_via_families(
    f: &CylinderFn,
    eps_schedule: &[f64],
    n_schedule: &[usize],
    tol: f64,
) -> Result<LimitEstimate> {
    check_schedule(eps_schedule, tol)?;
    if n_schedule.is_empty() || n_schedule.windows(2).any(|w| w[1] <= w[0]) {
        return Err(domain("n schedule must be non-empty and increasing"));
    }
    outer_limit(eps_schedule, tol / 2.0, "delta functional (families route)", |e| {
        let rect = DeltaBox::new(e)?.to_rect();
        let mut prev: Option<f64> = None;
        let mut row = LimitRow {
            epsilon: e,
            n: None,
            estimate: f64::NAN,
            inner_converged: false,
        };
        for &n in n_schedule {
            let fam = product_family(&rect, &[SequenceKind::VanDerCorput], n)?;
            let avg = family_average(&fam, f)?;
            row.n = Some(n);
            row.estimate = avg;
            if prev.is_some_and(|p| (avg - p).abs() < tol / 2.0) {
                row.inner_converged = true;
                break;
            }
            prev = Some(avg);
        }
        Ok(row)
    })
}

/// Limit behaviour of `|α|^{-D}` as `D → ∞`.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ScalingStatus {
    Zero,
    One,
    Infinite,
}

impl std::fmt::Display for ScalingStatus {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(match self {
            Self::Zero => "zero",
            Self::One => "one",
            Self::Infinite => "infinite",
        })
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct ScalingRatio {
    /// `ln [λ_D((1/α)Δ_ε) / λ_D(Δ_ε)]` over the first `D` coordinates.
    pub log_ratio: f64,
    pub status: ScalingStatus,
}

/// Truncated `(δ)∫ δ(αx) dλ(x) = |α|^{-∞}`: the ratio of the first-`D`
/// coordinate measures of `(1/α)Δ_ε` and `Δ_ε`, built side by side.
pub fn scaling_ratio(alpha: f64, depth: usize, eps: f64) -> Result<ScalingRatio> {
    if alpha == 0.0 || !alpha.is_finite() {
        return Err(domain(format!("scalar must be finite and nonzero, got {alpha}")));
    }
    if depth == 0 {
        return Err(domain("depth must be at least 1"));
    }
    let b = DeltaBox::new(eps)?;
    let mut s = CompensatedSum::new();
    for k in 1..=depth {
        let side = b.interval(k);
        s.add(side.scale(1.0 / alpha).ln_len() - side.ln_len());
    }
    let a = alpha.abs();
    let status = if a > 1.0 {
        ScalingStatus::Zero
    } else if a == 1.0 {
        ScalingStatus::One
    } else {
        ScalingStatus::Infinite
    };
    Ok(ScalingRatio {
        log_ratio: s.value(),
        status,
    })
}

/// The `Δ_ε` averages of `f` and of `x -> f(-x)`.
pub fn evenness_values(f: &CylinderFn, eps: f64, tol: f64) -> Result<(f64, f64)> {
    let rect = DeltaBox::new(eps)?.to_rect();
    let (a, _) = box_average(f, &rect, tol / 2.0)?;
    let (b, _) = box_average(&f.reflected(), &rect, tol / 2.0)?;
    Ok((a, b))
}

/// Whether `δ(f(-·))` and `δ(f)` agree on `Δ_ε` within `tol`.
pub fn evenness_check(f: &CylinderFn, eps: f64, tol: f64) -> Result<bool> {
    let (a, b) = evenness_values(f, eps, tol)?;
    Ok((a - b).abs() <= tol)
}

/// A point of `Δ_ε` where `f` equals its box average.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct MeanValuePoint {
    pub point: Vec<f64>,
    pub average: f64,
    pub residual: f64,
}

/// Box average of `f` on `Δ_ε` (Darboux width `avg_tol`), then a point
/// `y_ε ∈ Δ_ε` with `|f(y_ε) - average| <= tol`, found by bisection between
/// the lattice minimizer and maximizer of `f`.
pub fn mean_value_point(f: &CylinderFn, eps: f64, avg_tol: f64, tol: f64) -> Result<MeanValuePoint> {
    let rect = DeltaBox::new(eps)?.to_rect();
    let (average, _) = box_average(f, &rect, avg_tol)?;
    let m = f.m();
    let sides = rect.coords(m)?;
    let per_axis = if m == 0 {
        1
    } else {
        ((1e5f64).powf(1.0 / m as f64).floor() as usize).clamp(2, 65)
    };
    let total = per_axis.pow(m as u32);
    let mut x = vec![0.0; m];
    let (mut zmin, mut zmax) = (x.clone(), x.clone());
    let (mut fmin, mut fmax) = (f.eval(&x), f.eval(&x));
    for l in 0..total {
        let mut r = l;
        for (axis, side) in sides.iter().enumerate().rev() {
            let t = (r % per_axis) as f64 / (per_axis - 1).max(1) as f64;
            r /= per_axis;
            x[axis] = if t == 1.0 { side.hi() } else { side.lo() + t * (side.hi() - side.lo()) };
        }
        let v = f.eval(&x);
        if v < fmin {
            fmin = v;
            zmin.clone_from(&x);
        }
        if v > fmax {
            fmax = v;
            zmax.clone_from(&x);
        }
    }
    let point = intermediate_value_point(f, &rect, average, &zmin, &zmax, tol)?;
    let residual = (f.eval(&point) - average).abs();
    Ok(MeanValuePoint {
        point,
        average,
        residual,
    })
}
