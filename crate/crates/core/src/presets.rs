//! Named fixtures: factor sequences, rectangles, and the elementary-rectangle
//! corpus used for equidistribution checks.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::error::{Error, Result};
use crate::products::{FactorSeq, TailKind};
use crate::rect::{DeltaBox, ElementaryRect, Interval, IntervalSeq};

pub const FACTOR_PRESETS: &[&str] = &["alternating_harmonic", "alternating_two_half", "ones", "geometric_exp"];
pub const RECT_PRESETS: &[&str] = &["unit", "delta_box", "X_counterexample"];

/// `ln β_k = (-1)^k / k`.
fn alternating_harmonic_log(k: usize) -> f64 {
    if k.is_multiple_of(2) {
        1.0 / k as f64
    } else {
        -1.0 / k as f64
    }
}

/// Factor sequences by name:
/// `alternating_harmonic` (`e^{(-1)^k/k}`), `alternating_two_half`
/// (`2, 1/2, 2, ...`), `ones`, `geometric_exp` (`e^{-2^{-k}}`).
pub fn factor_preset(name: &str) -> Result<FactorSeq> {
    Ok(match name {
        "alternating_harmonic" => FactorSeq::from_log_fn(TailKind::ClosedForm, 0, alternating_harmonic_log),
        "alternating_two_half" => FactorSeq::closed_form(|k| if k % 2 == 1 { 2.0 } else { 0.5 }),
        "ones" => FactorSeq::closed_form(|_| 1.0),
        "geometric_exp" => FactorSeq::from_log_fn(TailKind::ClosedForm, 0, |k| -(0.5f64).powi(k as i32)),
        other => {
            return Err(Error::Input(format!(
                "unknown preset '{other}' (known: {})",
                FACTOR_PRESETS.join(", ")
            )))
        }
    })
}

/// Rectangles by name: `unit`, `delta_box` (needs `epsilon`), and
/// `X_counterexample` = `∏[0, e^{(-1)^k/k}]`.
pub fn rect_preset(name: &str, epsilon: Option<f64>) -> Result<IntervalSeq> {
    match name {
        "unit" => Ok(IntervalSeq::unit()),
        "delta_box" => {
            let e = epsilon.ok_or_else(|| Error::Input("delta_box needs an epsilon".into()))?;
            Ok(DeltaBox::new(e)?.to_rect())
        }
        "X_counterexample" => Ok(IntervalSeq::from_log_sides(alternating_harmonic_log)),
        other => Err(Error::Input(format!(
            "unknown rectangle '{other}' (known: {})",
            RECT_PRESETS.join(", ")
        ))),
    }
}

/// `count` elementary rectangles of `∏[0,1]`, each overriding one to three
/// of the coordinates {1, 2, 3} with sides `[c, d)` drawn uniformly.
pub fn u_corpus(seed: u64, count: usize) -> Vec<ElementaryRect> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut out = Vec::with_capacity(count);
    while out.len() < count {
        let how_many = rng.random_range(1..=3usize);
        let mut coords = vec![1usize, 2, 3];
        while coords.len() > how_many {
            let i = rng.random_range(0..coords.len());
            coords.remove(i);
        }
        let mut overrides = Vec::new();
        for k in coords {
            let (a, b): (f64, f64) = (rng.random(), rng.random());
            let (c, d) = if a < b { (a, b) } else { (b, a) };
            if c < d {
                overrides.push((k, Interval::new(c, d).expect("ordered unit endpoints")));
            }
        }
        if let Ok(u) = ElementaryRect::new(IntervalSeq::unit(), overrides) {
            out.push(u);
        }
    }
    out
}
