//! Ordinary and standard infinite products of non-negative extended reals,
//! with optional α-grouping of the factors into consecutive blocks.
//!
//! Everything runs on natural logs: a factor sequence yields `ln β_k`, the
//! partial products are partial sums of logs (Neumaier-compensated), and the
//! result carries a log value. `ln 0 = -inf` and `ln +inf = +inf` short-circuit.
//!
//! A [`PartialMonitor`] watches the partial log-sums and classifies them:
//!
//! * **converged** when the last [`WINDOW`] steps and the whole window span
//!   stay below `tol`, or, at the horizon, when the window spread is still
//!   above `tol` but has shrunk by at least a quarter since `max_terms / 2`
//!   while the window mean has not drifted by more than the spread
//!   (slowly converging alternating remainders);
//! * **zero / infinite** when the partial sums leave `[-1/tol, 1/tol]`, or when
//!   the window means sampled at powers of two keep moving in one direction
//!   with increments that do not shrink (`D_{j+1} / D_j >= 0.99` over three
//!   consecutive doublings);
//! * **oscillating** otherwise once `max_terms` terms have been inspected.
//!
//! The converged value is the last partial when the window increments all
//! have one sign, and the mean of the window partials otherwise.

use std::collections::VecDeque;
use std::fmt;
use std::sync::Arc;

use serde::{Deserialize, Serialize};

use crate::error::{domain, Error, Result};
use crate::numeric::CompensatedSum;

/// Number of consecutive partials inspected by the convergence window.
pub const WINDOW: usize = 16;
pub const DEFAULT_TOL: f64 = 1e-10;
pub const DEFAULT_MAX_TERMS: usize = 1_000_000;

/// Minimum ratio of successive doubling-block increments that counts as
/// "not shrinking".
const DIVERGENCE_RATIO: f64 = 0.99;
/// Consecutive doublings that must agree before divergence is declared.
const DIVERGENCE_RUNS: usize = 3;
/// First checkpoint for the doubling test.
const FIRST_CHECKPOINT: usize = 64;
/// Required spread contraction between `max_terms / 2` and `max_terms`.
const HORIZON_CONTRACTION: f64 = 0.75;

type FactorFn = Arc<dyn Fn(usize) -> f64 + Send + Sync>;

/// What a factor sequence does beyond its declared depth.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum TailKind {
    /// `β_k = 1` for every `k > depth`.
    ConstantOne,
    /// The generator is valid at every index.
    ClosedForm,
    /// Nothing is known past `depth`.
    Truncated,
}

#[derive(Clone)]
enum Generator {
    Factor(FactorFn),
    Log(FactorFn),
}

/// A sequence `(β_k)_{k >= 1}` of factors in `[0, +inf]`.
#[derive(Clone)]
pub struct FactorSeq {
    generator: Generator,
    depth: usize,
    tail: TailKind,
}

impl fmt::Debug for FactorSeq {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("FactorSeq")
            .field("depth", &self.depth)
            .field("tail", &self.tail)
            .finish_non_exhaustive()
    }
}

impl FactorSeq {
    /// Factors given directly by a generator `k -> β_k` (1-based).
    pub fn from_fn<F>(tail: TailKind, depth: usize, generator: F) -> Self
    where
        F: Fn(usize) -> f64 + Send + Sync + 'static,
    {
        Self {
            generator: Generator::Factor(Arc::new(generator)),
            depth,
            tail,
        }
    }

    /// Factors given by their natural logs `k -> ln β_k`. Use this when the
    /// factors themselves under- or overflow.
    pub fn from_log_fn<F>(tail: TailKind, depth: usize, generator: F) -> Self
    where
        F: Fn(usize) -> f64 + Send + Sync + 'static,
    {
        Self {
            generator: Generator::Log(Arc::new(generator)),
            depth,
            tail,
        }
    }

    /// A closed-form sequence defined at every index.
    pub fn closed_form<F>(generator: F) -> Self
    where
        F: Fn(usize) -> f64 + Send + Sync + 'static,
    {
        Self::from_fn(TailKind::ClosedForm, 0, generator)
    }

    /// Finitely many factors followed by ones.
    pub fn finite(factors: Vec<f64>) -> Self {
        let depth = factors.len();
        Self::from_fn(TailKind::ConstantOne, depth, move |k| factors[k - 1])
    }

    /// Finitely many factors and nothing beyond.
    pub fn truncated(factors: Vec<f64>) -> Self {
        let depth = factors.len();
        Self::from_fn(TailKind::Truncated, depth, move |k| factors[k - 1])
    }

    pub fn depth(&self) -> usize {
        self.depth
    }

    pub fn tail(&self) -> TailKind {
        self.tail
    }

    /// `ln β_k` for a 1-based index `k`.
    pub fn log_factor(&self, k: usize) -> Result<f64> {
        if k == 0 {
            return Err(domain("factor indices start at 1"));
        }
        if k > self.depth {
            match self.tail {
                TailKind::ConstantOne => return Ok(0.0),
                TailKind::Truncated => {
                    return Err(Error::TailUnspecified {
                        index: k,
                        depth: self.depth,
                    })
                }
                TailKind::ClosedForm => {}
            }
        }
        match &self.generator {
            Generator::Factor(g) => {
                let beta = g(k);
                if beta.is_nan() || beta < 0.0 {
                    return Err(domain(format!("factor {k} is {beta}, expected β >= 0")));
                }
                Ok(beta.ln())
            }
            Generator::Log(g) => {
                let l = g(k);
                if l.is_nan() {
                    return Err(domain(format!("log factor {k} is NaN")));
                }
                Ok(l)
            }
        }
    }

    /// `β_k` for a 1-based index `k`.
    pub fn factor(&self, k: usize) -> Result<f64> {
        self.log_factor(k).map(f64::exp)
    }
}

/// The sequence `α = (n_k)` of block sizes, given as a finite prefix
/// followed by a cycle repeated forever.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct GroupingAlpha {
    prefix: Vec<usize>,
    cycle: Vec<usize>,
}

impl GroupingAlpha {
    pub fn new(prefix: Vec<usize>, cycle: Vec<usize>) -> Result<Self> {
        if cycle.is_empty() {
            return Err(domain("grouping cycle must be non-empty"));
        }
        if prefix.iter().chain(&cycle).any(|&n| n == 0) {
            return Err(domain("every block size n_k must be at least 1"));
        }
        Ok(Self { prefix, cycle })
    }

    /// `α = (1, 1, 1, ...)`.
    pub fn ones() -> Self {
        Self::uniform(1)
    }

    /// `α = (n, n, n, ...)`.
    pub fn uniform(n: usize) -> Self {
        Self::new(Vec::new(), vec![n.max(1)]).expect("n >= 1")
    }

    /// `α = (n, 1, 1, ...)`.
    pub fn leading(n: usize) -> Self {
        Self::new(vec![n.max(1)], vec![1]).expect("n >= 1")
    }

    /// A list whose last entry repeats forever: `[2, 1]` is `(2, 1, 1, ...)`.
    pub fn from_list(list: &[usize]) -> Result<Self> {
        match list.split_last() {
            None => Err(domain("empty grouping list")),
            Some((&last, head)) => Self::new(head.to_vec(), vec![last]),
        }
    }

    /// Size `n_k` of block `k` (0-based).
    pub fn block_size(&self, k: usize) -> usize {
        if k < self.prefix.len() {
            self.prefix[k]
        } else {
            self.cycle[(k - self.prefix.len()) % self.cycle.len()]
        }
    }

    pub fn prefix(&self) -> &[usize] {
        &self.prefix
    }

    pub fn cycle(&self) -> &[usize] {
        &self.cycle
    }

    /// Infinite iterator over the 1-based coordinate ranges `F_k`.
    pub fn blocks(&self) -> impl Iterator<Item = std::ops::RangeInclusive<usize>> + '_ {
        let mut start = 1usize;
        (0..).map(move |k| {
            let n = self.block_size(k);
            let r = start..=start + n - 1;
            start += n;
            r
        })
    }
}

impl Default for GroupingAlpha {
    fn default() -> Self {
        Self::ones()
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ProductMode {
    Ordinary,
    Standard,
}

impl std::str::FromStr for ProductMode {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s {
            "ordinary" | "O" => Ok(Self::Ordinary),
            "standard" | "S" => Ok(Self::Standard),
            other => Err(Error::Input(format!("unknown product mode '{other}'"))),
        }
    }
}

impl fmt::Display for ProductMode {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Self::Ordinary => "ordinary",
            Self::Standard => "standard",
        })
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ProductStatus {
    Converged,
    Zero,
    Infinite,
    Oscillating,
}

impl fmt::Display for ProductStatus {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Self::Converged => "converged",
            Self::Zero => "zero",
            Self::Infinite => "infinite",
            Self::Oscillating => "oscillating",
        })
    }
}

/// Outcome of an infinite-product evaluation.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct ProductResult {
    pub status: ProductStatus,
    /// `ln` of the product: finite when converged, `-inf` for zero, `+inf`
    /// for infinite, NaN when oscillating.
    pub log_value: f64,
    pub partials_inspected: usize,
    /// `max - min` of the last window of partial log-sums.
    pub spread: f64,
}

impl ProductResult {
    fn new(status: ProductStatus, log_value: f64, n: usize, spread: f64) -> Self {
        Self {
            status,
            log_value,
            partials_inspected: n,
            spread,
        }
    }

    /// The product value; present iff converged or zero.
    pub fn value(&self) -> Option<f64> {
        match self.status {
            ProductStatus::Converged => Some(self.log_value.exp()),
            ProductStatus::Zero => Some(0.0),
            _ => None,
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
enum Trend {
    Down,
    Up,
}

/// Watches partial log-sums `L_1, L_2, ...`.
#[derive(Clone, Debug)]
struct PartialMonitor {
    tol: f64,
    sum: CompensatedSum,
    n: usize,
    window: VecDeque<f64>,
    next_checkpoint: usize,
    checkpoint_means: Vec<f64>,
    trend: Option<Trend>,
}

impl PartialMonitor {
    fn new(tol: f64) -> Self {
        Self {
            tol,
            sum: CompensatedSum::new(),
            n: 0,
            window: VecDeque::with_capacity(WINDOW + 1),
            next_checkpoint: FIRST_CHECKPOINT,
            checkpoint_means: Vec::new(),
            trend: None,
        }
    }

    fn push(&mut self, log_term: f64) {
        self.sum.add(log_term);
        self.n += 1;
        if self.window.len() == WINDOW + 1 {
            self.window.pop_front();
        }
        self.window.push_back(self.sum.value());
        if self.n == self.next_checkpoint {
            self.next_checkpoint *= 2;
            self.checkpoint_means.push(self.mean());
            self.trend = self.doubling_trend();
        }
    }

    fn partial(&self) -> f64 {
        self.sum.value()
    }

    fn full(&self) -> bool {
        self.window.len() == WINDOW + 1
    }

    fn window_converged(&self) -> bool {
        if !self.full() {
            return false;
        }
        let steps_small = self
            .window
            .iter()
            .zip(self.window.iter().skip(1))
            .all(|(a, b)| (b - a).abs() < self.tol);
        let span_small = (self.window[WINDOW] - self.window[0]).abs() < self.tol;
        steps_small && span_small
    }

    /// Mean of the last `WINDOW` partials.
    fn mean(&self) -> f64 {
        let skip = self.window.len().saturating_sub(WINDOW);
        let w: Vec<f64> = self.window.iter().skip(skip).copied().collect();
        crate::numeric::fsum(w.iter().copied()) / w.len() as f64
    }

    fn spread(&self) -> f64 {
        let skip = self.window.len().saturating_sub(WINDOW);
        let (lo, hi) = self
            .window
            .iter()
            .skip(skip)
            .fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), &x| {
                (lo.min(x), hi.max(x))
            });
        hi - lo
    }

    fn monotone(&self) -> bool {
        let diffs = self
            .window
            .iter()
            .zip(self.window.iter().skip(1))
            .map(|(a, b)| b - a);
        let (mut up, mut down) = (false, false);
        for d in diffs {
            up |= d > 0.0;
            down |= d < 0.0;
        }
        !(up && down)
    }

    fn estimate(&self) -> f64 {
        if self.monotone() {
            self.partial()
        } else {
            self.mean()
        }
    }

    fn doubling_trend(&self) -> Option<Trend> {
        let m = &self.checkpoint_means;
        if m.len() < DIVERGENCE_RUNS + 1 {
            return None;
        }
        let d: Vec<f64> = m[m.len() - DIVERGENCE_RUNS - 1..]
            .windows(2)
            .map(|w| w[1] - w[0])
            .collect();
        let floor = 10.0 * self.tol;
        let all_down = d.iter().all(|&x| x < -floor);
        let all_up = d.iter().all(|&x| x > floor);
        if !(all_down || all_up) {
            return None;
        }
        let sustained = d.windows(2).all(|w| w[1] / w[0] >= DIVERGENCE_RATIO);
        match (sustained, all_down) {
            (true, true) => Some(Trend::Down),
            (true, false) => Some(Trend::Up),
            _ => None,
        }
    }
}

fn check_args(tol: f64, max_terms: usize) -> Result<()> {
    if !(tol > 0.0 && tol.is_finite()) {
        return Err(domain(format!("tol must be positive, got {tol}")));
    }
    if max_terms < 2 {
        return Err(domain(format!("max_terms must be at least 2, got {max_terms}")));
    }
    Ok(())
}

/// Ordinary-product classification of an arbitrary stream of log terms.
fn classify_ordinary<F>(mut term: F, tol: f64, max_terms: usize) -> Result<ProductResult>
where
    F: FnMut(usize) -> Result<f64>,
{
    check_args(tol, max_terms)?;
    use ProductStatus::*;
    let mut mon = PartialMonitor::new(tol);
    let bound = 1.0 / tol;
    let half = max_terms / 2;
    let mut half_snapshot: Option<(f64, f64)> = None;

    for k in 1..=max_terms {
        let t = term(k)?;
        if t == f64::NEG_INFINITY {
            return Ok(ProductResult::new(Zero, f64::NEG_INFINITY, k, f64::NAN));
        }
        if t == f64::INFINITY {
            return Ok(ProductResult::new(Infinite, f64::INFINITY, k, f64::NAN));
        }
        mon.push(t);
        let l = mon.partial();
        if l < -bound || mon.trend == Some(Trend::Down) {
            return Ok(ProductResult::new(Zero, f64::NEG_INFINITY, k, mon.spread()));
        }
        if l > bound || mon.trend == Some(Trend::Up) {
            return Ok(ProductResult::new(Infinite, f64::INFINITY, k, mon.spread()));
        }
        if mon.window_converged() {
            return Ok(ProductResult::new(Converged, mon.estimate(), k, mon.spread()));
        }
        if k == half && mon.full() {
            half_snapshot = Some((mon.spread(), mon.mean()));
        }
    }

    let spread = mon.spread();
    if spread <= 10.0 * tol {
        return Ok(ProductResult::new(Converged, mon.estimate(), max_terms, spread));
    }
    if let Some((half_spread, half_mean)) = half_snapshot {
        let contracting = spread <= HORIZON_CONTRACTION * half_spread;
        let settled = (mon.mean() - half_mean).abs() <= spread;
        if contracting && settled {
            return Ok(ProductResult::new(Converged, mon.estimate(), max_terms, spread));
        }
    }
    Ok(ProductResult::new(Oscillating, f64::NAN, max_terms, spread))
}

/// Standard-product classification: the negative and positive log parts are
/// monitored separately; a divergent negative part means zero.
fn classify_standard<F>(mut term: F, tol: f64, max_terms: usize) -> Result<ProductResult>
where
    F: FnMut(usize) -> Result<f64>,
{
    check_args(tol, max_terms)?;
    use ProductStatus::*;
    let mut neg = PartialMonitor::new(tol);
    let mut pos = PartialMonitor::new(tol);
    let bound = 1.0 / tol;

    for k in 1..=max_terms {
        let t = term(k)?;
        if t == f64::NEG_INFINITY {
            return Ok(ProductResult::new(Zero, f64::NEG_INFINITY, k, f64::NAN));
        }
        if t == f64::INFINITY {
            return Ok(ProductResult::new(Infinite, f64::INFINITY, k, f64::NAN));
        }
        neg.push(t.min(0.0));
        pos.push(t.max(0.0));
        let spread = neg.spread().max(pos.spread());
        if neg.partial() < -bound || neg.trend == Some(Trend::Down) {
            return Ok(ProductResult::new(Zero, f64::NEG_INFINITY, k, spread));
        }
        let neg_settled = neg.window_converged();
        if neg_settled && (pos.partial() > bound || pos.trend == Some(Trend::Up)) {
            return Ok(ProductResult::new(Infinite, f64::INFINITY, k, spread));
        }
        if neg_settled && pos.window_converged() {
            let log = neg.partial() + pos.partial();
            return Ok(ProductResult::new(Converged, log, k, spread));
        }
    }

    let spread = neg.spread().max(pos.spread());
    if pos.partial() > bound || pos.trend == Some(Trend::Up) {
        return Ok(ProductResult::new(Infinite, f64::INFINITY, max_terms, spread));
    }
    // Both parts are monotone and neither shows divergence: report the
    // current estimate; `spread` records how far it had settled.
    let log = neg.partial() + pos.partial();
    Ok(ProductResult::new(Converged, log, max_terms, spread))
}

/// `(O)∏ β_k`: the limit of the partial products.
pub fn ordinary_product(f: &FactorSeq, tol: f64, max_terms: usize) -> Result<ProductResult> {
    classify_ordinary(|k| f.log_factor(k), tol, max_terms)
}

/// `(S)∏ β_k`: zero when `Σ_{ln β_k < 0} ln β_k = -inf`, else `exp(Σ ln β_k)`.
pub fn standard_product(f: &FactorSeq, tol: f64, max_terms: usize) -> Result<ProductResult> {
    classify_standard(|k| f.log_factor(k), tol, max_terms)
}

/// `(O, α)∏` or `(S, α)∏`: the product over block factors `B_k = ∏_{i∈F_k} β_i`.
///
/// `max_terms` bounds the number of blocks. Blocks are reduced in ascending
/// order. A block holding both a zero and an infinite factor counts as zero.
pub fn grouped_product(
    f: &FactorSeq,
    alpha: &GroupingAlpha,
    mode: ProductMode,
    tol: f64,
    max_terms: usize,
) -> Result<ProductResult> {
    let mut blocks = alpha.blocks();
    let block_log = move |_k: usize| -> Result<f64> {
        let range = blocks.next().expect("grouping is infinite");
        let mut s = CompensatedSum::new();
        let mut has_zero = false;
        for i in range {
            let l = f.log_factor(i)?;
            has_zero |= l == f64::NEG_INFINITY;
            s.add(l);
        }
        Ok(if has_zero { f64::NEG_INFINITY } else { s.value() })
    };
    match mode {
        ProductMode::Ordinary => classify_ordinary(block_log, tol, max_terms),
        ProductMode::Standard => classify_standard(block_log, tol, max_terms),
    }
}

/// Convenience wrapper selecting the ungrouped product by mode.
pub fn product(f: &FactorSeq, mode: ProductMode, tol: f64, max_terms: usize) -> Result<ProductResult> {
    match mode {
        ProductMode::Ordinary => ordinary_product(f, tol, max_terms),
        ProductMode::Standard => standard_product(f, tol, max_terms),
    }
}
