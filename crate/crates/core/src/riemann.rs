//! Riemann partitions of rectangles, Darboux brackets and Riemann integrals
//! of cylinder functions.
//!
//! Partitions are uniform grids over the first `m` coordinates; later
//! coordinates stay whole. All sums are kept as *normalized averages*
//! (divided by the parent measure) next to `ln λ(parent)`, so integrals over
//! boxes of measure `e^{-4096}` never underflow before they are needed.

use serde::{Deserialize, Serialize};

use crate::equidist::{family_average, product_family, SequenceKind};
use crate::error::{domain, Error, Result};
use crate::function::CylinderFn;
use crate::numeric::CompensatedSum;
use crate::products::{GroupingAlpha, ProductMode};
use crate::rect::{diameter, rect_measure, ElementaryRect, Interval, IntervalSeq};

pub const DEFAULT_CELL_BUDGET: u128 = 1_000_000;
/// Lattice points per axis used by [`riemann_integral`]: the cell corners.
pub const DEFAULT_SAMPLES: usize = 2;
/// Tail tolerance for mesh evaluation.
pub const MESH_TAIL_TOL: f64 = 1e-15;

/// Uniform grid over the first `m` coordinates of a rectangle.
#[derive(Clone, Debug)]
pub struct Partition {
    parent: IntervalSeq,
    sides: Vec<Interval>,
    cuts: Vec<usize>,
}

impl Partition {
    pub fn parent(&self) -> &IntervalSeq {
        &self.parent
    }

    /// Number of gridded coordinates.
    pub fn m(&self) -> usize {
        self.cuts.len()
    }

    pub fn cuts(&self) -> &[usize] {
        &self.cuts
    }

    pub fn cell_count(&self) -> u128 {
        self.cuts.iter().map(|&c| c as u128).product()
    }

    /// `ln(λ(U_k) / λ(parent))`, the same for every cell.
    pub fn cell_log_fraction(&self) -> f64 {
        -self.cuts.iter().map(|&c| (c as f64).ln()).sum::<f64>()
    }

    /// Side `j` (0-based axis) of cell `i` along that axis.
    fn cell_side(&self, axis: usize, i: usize) -> Interval {
        let s = &self.sides[axis];
        let c = self.cuts[axis];
        let w = s.hi() - s.lo();
        let lo = s.lo() + w * (i as f64 / c as f64);
        let hi = if i + 1 == c {
            s.hi()
        } else {
            s.lo() + w * ((i + 1) as f64 / c as f64)
        };
        Interval::with_log_len(lo, hi, s.ln_len() - (c as f64).ln())
    }

    fn unravel(&self, mut flat: u128, idx: &mut [usize]) {
        for axis in (0..self.m()).rev() {
            let c = self.cuts[axis] as u128;
            idx[axis] = (flat % c) as usize;
            flat /= c;
        }
    }

    /// Cell number `flat` (row-major over the gridded coordinates).
    pub fn cell(&self, flat: u128) -> Result<ElementaryRect> {
        if flat >= self.cell_count() {
            return Err(domain(format!("cell {flat} out of range")));
        }
        let mut idx = vec![0; self.m()];
        self.unravel(flat, &mut idx);
        let overrides = idx
            .iter()
            .enumerate()
            .map(|(axis, &i)| (axis + 1, self.cell_side(axis, i)))
            .collect();
        ElementaryRect::new_unchecked(self.parent.clone(), overrides)
    }
}

/// Uniform grid with `cuts` pieces on each of the first `m` coordinates.
pub fn grid_partition(rect: &IntervalSeq, m: usize, cuts: usize) -> Result<Partition> {
    grid_partition_axes(rect, &vec![cuts; m], DEFAULT_CELL_BUDGET)
}

/// Grid with `cuts[j]` pieces on coordinate `j + 1`.
pub fn grid_partition_axes(rect: &IntervalSeq, cuts: &[usize], budget: u128) -> Result<Partition> {
    if cuts.contains(&0) {
        return Err(domain("cuts per coordinate must be at least 1"));
    }
    let count = cuts
        .iter()
        .try_fold(1u128, |acc, &c| acc.checked_mul(c as u128))
        .unwrap_or(u128::MAX);
    if count > budget {
        return Err(Error::Budget {
            what: "partition cells",
            requested: count,
            budget,
        });
    }
    Ok(Partition {
        parent: rect.clone(),
        sides: rect.coords(cuts.len())?,
        cuts: cuts.to_vec(),
    })
}

/// `max_k d(U_k)`; all cells of a uniform grid share one diameter.
pub fn mesh(p: &Partition) -> Result<f64> {
    let mut cell = p.parent.clone();
    for axis in 0..p.m() {
        cell = cell.with_coord(axis + 1, p.cell_side(axis, 0))?;
    }
    diameter(&cell, MESH_TAIL_TOL)
}

/// Lower and upper Darboux sums, stored as normalized averages.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct DarbouxBracket {
    /// `s_τ / λ(parent)`.
    pub lower_avg: f64,
    /// `S_τ / λ(parent)`.
    pub upper_avg: f64,
    /// Midpoint Riemann sum divided by `λ(parent)`.
    pub midpoint_avg: f64,
    pub mesh: f64,
    pub log_measure: f64,
}

impl DarbouxBracket {
    pub fn lower(&self) -> f64 {
        self.lower_avg * self.log_measure.exp()
    }

    pub fn upper(&self) -> f64 {
        self.upper_avg * self.log_measure.exp()
    }

    pub fn width_avg(&self) -> f64 {
        self.upper_avg - self.lower_avg
    }
}

/// Per-cell extrema sampled on a lattice of `samples_per_cell` points per
/// gridded axis (corners included, so at least 2) plus the cell midpoint.
/// Exact for functions monotone in each coordinate; an estimate otherwise.
pub fn darboux(f: &CylinderFn, p: &Partition, samples_per_cell: usize) -> Result<DarbouxBracket> {
    let log_measure = rect_measure(&p.parent, &GroupingAlpha::ones(), ProductMode::Ordinary)?.log_value;
    let sums = darboux_sums(f, p, samples_per_cell, &[])?;
    Ok(DarbouxBracket {
        lower_avg: sums.lower,
        upper_avg: sums.upper,
        midpoint_avg: sums.midpoint,
        mesh: mesh(p)?,
        log_measure,
    })
}

struct Sums {
    lower: f64,
    upper: f64,
    midpoint: f64,
}

/// Normalized Darboux and midpoint sums. Coordinates of `f` beyond the grid
/// are read at `fixed[k - m - 1]`, or at the parent midpoint.
fn darboux_sums(f: &CylinderFn, p: &Partition, samples: usize, fixed: &[f64]) -> Result<Sums> {
    if samples < 2 {
        return Err(domain("samples_per_cell must be at least 2 (cell corners)"));
    }
    let m = p.m();
    let fm = f.m().max(m);
    let mut x = vec![0.0; fm];
    for k in m + 1..=fm {
        x[k - 1] = match fixed.get(k - m - 1) {
            Some(&v) => v,
            None => p.parent.coord(k)?.midpoint(),
        };
    }
    // lattice offsets along one axis: 0, 1/(s-1), ..., 1
    let offsets: Vec<f64> = (0..samples).map(|t| t as f64 / (samples - 1) as f64).collect();
    let lattice = (samples as u128).pow(m as u32);

    let (mut lo_sum, mut hi_sum, mut mid_sum) =
        (CompensatedSum::new(), CompensatedSum::new(), CompensatedSum::new());
    let cells = p.cell_count();
    let mut idx = vec![0usize; m];
    let mut sides = vec![Interval::unit(); m];
    let mut lat = vec![0usize; m];
    for flat in 0..cells {
        p.unravel(flat, &mut idx);
        for axis in 0..m {
            sides[axis] = p.cell_side(axis, idx[axis]);
        }
        for axis in 0..m {
            x[axis] = sides[axis].midpoint();
        }
        let mid = f.eval(&x);
        let (mut lo, mut hi) = (mid, mid);
        for l in 0..lattice {
            let mut r = l;
            for axis in (0..m).rev() {
                lat[axis] = (r % samples as u128) as usize;
                r /= samples as u128;
            }
            for axis in 0..m {
                let s = sides[axis];
                let t = offsets[lat[axis]];
                x[axis] = if t == 1.0 { s.hi() } else { s.lo() + t * (s.hi() - s.lo()) };
            }
            let v = f.eval(&x);
            lo = lo.min(v);
            hi = hi.max(v);
        }
        lo_sum.add(lo);
        hi_sum.add(hi);
        mid_sum.add(mid);
    }
    let n = cells as f64;
    Ok(Sums {
        lower: lo_sum.value() / n,
        upper: hi_sum.value() / n,
        midpoint: mid_sum.value() / n,
    })
}

/// Controls for [`riemann_average`].
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct RiemannOptions {
    /// Target for the normalized bracket width.
    pub tol: f64,
    pub cell_budget: u128,
    pub samples_per_cell: usize,
    /// Coordinates whose side is shorter than `freeze_below · max(1, |center|)`
    /// are held at their midpoint instead of gridded.
    pub freeze_below: Option<f64>,
    /// Return the finest affordable estimate instead of a budget error.
    pub best_effort: bool,
}

impl RiemannOptions {
    pub fn new(tol: f64) -> Self {
        Self {
            tol,
            cell_budget: DEFAULT_CELL_BUDGET,
            samples_per_cell: DEFAULT_SAMPLES,
            freeze_below: None,
            best_effort: false,
        }
    }
}

/// Result of a refining Riemann computation, normalized by `λ(rect)`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RiemannEstimate {
    /// Midpoint Riemann sum divided by `λ(rect)`.
    pub average: f64,
    pub lower_avg: f64,
    pub upper_avg: f64,
    pub log_measure: f64,
    /// Cuts per gridded coordinate in the final round.
    pub cuts: usize,
    pub cells: u128,
    /// Whether the bracket width reached `tol`.
    pub converged: bool,
    /// Bracket width after each refinement round.
    pub widths: Vec<f64>,
}

impl RiemannEstimate {
    /// `(R)∫ f dλ`.
    pub fn integral(&self) -> f64 {
        self.average * self.log_measure.exp()
    }
}

/// Refine a uniform grid over `f`'s coordinates, doubling the cuts each
/// round, until the normalized Darboux width drops below `opts.tol`.
pub fn riemann_average(f: &CylinderFn, rect: &IntervalSeq, opts: &RiemannOptions) -> Result<RiemannEstimate> {
    if opts.tol.is_nan() || opts.tol <= 0.0 {
        return Err(domain(format!("tol must be positive, got {}", opts.tol)));
    }
    let log_measure = rect_measure(rect, &GroupingAlpha::ones(), ProductMode::Ordinary)?.log_value;
    if log_measure == f64::NEG_INFINITY {
        return Err(domain("rectangle has measure zero"));
    }
    // Move frozen coordinates to the back so the grid covers a prefix.
    let sides = rect.coords(f.m())?;
    let active: Vec<usize> = (0..f.m())
        .filter(|&i| match opts.freeze_below {
            Some(th) => sides[i].hi() - sides[i].lo() >= th * sides[i].midpoint().abs().max(1.0),
            None => true,
        })
        .collect();
    let frozen: Vec<usize> = (0..f.m()).filter(|i| !active.contains(i)).collect();
    let order: Vec<usize> = active.iter().chain(&frozen).copied().collect();
    let permuted_rect = IntervalSeq::unit_tail(order.iter().map(|&i| sides[i]).collect());
    let fixed: Vec<f64> = frozen.iter().map(|&i| sides[i].midpoint()).collect();
    let inner = f.clone();
    let g = CylinderFn::new(f.name(), f.m(), move |y| {
        let mut x = vec![0.0; y.len()];
        for (j, &i) in order.iter().enumerate() {
            x[i] = y[j];
        }
        inner.eval(&x)
    });

    let dims = active.len();
    let mut cuts = 1usize;
    let mut widths = Vec::new();
    let mut best: Option<RiemannEstimate> = None;
    loop {
        let p = match grid_partition_axes(&permuted_rect, &vec![cuts; dims], opts.cell_budget) {
            Ok(p) => p,
            Err(e @ Error::Budget { .. }) => {
                return match (opts.best_effort, best) {
                    (true, Some(b)) => Ok(b),
                    _ => Err(e),
                };
            }
            Err(e) => return Err(e),
        };
        let s = darboux_sums(&g, &p, opts.samples_per_cell, &fixed)?;
        let width = s.upper - s.lower;
        widths.push(width);
        let est = RiemannEstimate {
            average: s.midpoint,
            lower_avg: s.lower,
            upper_avg: s.upper,
            log_measure,
            cuts,
            cells: p.cell_count(),
            converged: width < opts.tol,
            widths: widths.clone(),
        };
        if est.converged || dims == 0 {
            return Ok(RiemannEstimate { converged: true, ..est });
        }
        best = Some(est);
        cuts *= 2;
    }
}

/// `(R)∫_rect f dλ` with bracket width below `tol · λ(rect)`.
pub fn riemann_integral(f: &CylinderFn, rect: &IntervalSeq, tol: f64) -> Result<f64> {
    Ok(riemann_average(f, rect, &RiemannOptions::new(tol))?.integral())
}

/// Both sides of the averages/integral equivalence at family index `n`:
/// `(mean of f over Y_n, (R)∫ f dλ / λ(rect))`, van der Corput coordinates.
pub fn average_vs_integral(f: &CylinderFn, rect: &IntervalSeq, n: usize) -> Result<(f64, f64)> {
    let fam = product_family(rect, &[SequenceKind::VanDerCorput], n)?;
    let avg = family_average(&fam, f)?;
    let opts = RiemannOptions {
        best_effort: true,
        ..RiemannOptions::new(1e-6)
    };
    Ok((avg, riemann_average(f, rect, &opts)?.average))
}

/// Bisection along the segment `zmin -> zmax` for a point `c` with
/// `|f(c) - u| <= tol`. Requires `f(zmin) <= u <= f(zmax)` up to `tol`.
pub fn intermediate_value_point(
    f: &CylinderFn,
    rect: &IntervalSeq,
    u: f64,
    zmin: &[f64],
    zmax: &[f64],
    tol: f64,
) -> Result<Vec<f64>> {
    let d = zmin.len().max(zmax.len()).max(f.m());
    let pad = |z: &[f64]| {
        let mut v = z.to_vec();
        v.resize(d, 0.0);
        v
    };
    let (a, b) = (pad(zmin), pad(zmax));
    for z in [&a, &b] {
        if !rect.contains_point(z, d)? {
            return Err(domain("endpoints must lie in the rectangle"));
        }
    }
    let (fa, fb) = (f.eval(&a), f.eval(&b));
    if !(fa <= u + tol && u - tol <= fb) {
        return Err(domain(format!("need f(zmin) <= u <= f(zmax), got {fa} <= {u} <= {fb}")));
    }
    let point = |t: f64| -> Vec<f64> {
        a.iter().zip(&b).map(|(&x, &y)| if t == 1.0 { y } else { x + t * (y - x) }).collect()
    };
    if (fa - u).abs() <= tol {
        return Ok(a);
    }
    if (fb - u).abs() <= tol {
        return Ok(b);
    }
    let (mut lo, mut hi) = (0.0f64, 1.0f64);
    let mut best = (f64::INFINITY, 0.0);
    for _ in 0..200 {
        let t = 0.5 * (lo + hi);
        let g = f.eval(&point(t));
        if (g - u).abs() < best.0 {
            best = ((g - u).abs(), t);
        }
        if (g - u).abs() <= tol || hi - lo <= f64::EPSILON {
            break;
        }
        if g < u {
            lo = t;
        } else {
            hi = t;
        }
    }
    Ok(point(best.1))
}
