//! Lebesgue-type measures on infinite-dimensional rectangles, Riemann
//! integration of cylinder functions over them, and a nascent-delta
//! construction of the Dirac functional on `R^∞`.
//!
//! Values that under- or overflow as floats (`λ(Δ_ε) = e^{-1/ε}`) are carried
//! as natural logs throughout.
//!
//! ```
//! use infmeasure::products::{GroupingAlpha, ProductMode};
//! use infmeasure::rect::{rect_measure, DeltaBox};
//!
//! let b = DeltaBox::new(0.1).unwrap().to_rect();
//! let m = rect_measure(&b, &GroupingAlpha::ones(), ProductMode::Ordinary).unwrap();
//! assert!((m.log_value + 10.0).abs() < 1e-12);
//! ```

pub mod cli;
pub mod delta;
pub mod equidist;
pub mod error;
pub mod function;
pub mod linmap;
pub mod numeric;
pub mod presets;
pub mod products;
pub mod rect;
pub mod riemann;

pub use error::{Error, Result};
pub use function::CylinderFn;
pub use products::{FactorSeq, GroupingAlpha, ProductMode, ProductResult, ProductStatus};
pub use rect::{DeltaBox, ElementaryRect, Interval, IntervalSeq, MeasureValue};
