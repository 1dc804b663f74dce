//! Block-diagonal linear maps `T^N = (T^{n_1}, T^{n_2}, ..., id, id, ...)`
//! and the change-of-variables law `μ_α(T^N E) = (∏|Δ_i|) μ_α(E)`.
//!
//! Images of rectangles are rectangles only for monomial blocks (one nonzero
//! per row and column: diagonal and permutation-like matrices). For those
//! the image measure is computed directly; for general blocks the law itself
//! gives the predicted value.

use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};

use crate::error::{domain, Error, Result};
use crate::numeric::CompensatedSum;
use crate::products::{GroupingAlpha, ProductMode};
use crate::rect::{rect_measure, IntervalSeq, MeasureValue};

pub const MAX_BLOCK: usize = 16;
/// A block is singular when `|det|` is at most this fraction of its
/// Hadamard bound `∏_i ||row_i||`.
pub const SINGULAR_RATIO: f64 = 1e-12;
/// Agreement required between direct and predicted image log-measures.
pub const LOG_AGREEMENT_TOL: f64 = 1e-12;

/// Finitely many square blocks on consecutive coordinates, identity after.
#[derive(Clone, Debug, PartialEq)]
pub struct BlockLinearMap {
    blocks: Vec<DMatrix<f64>>,
}

impl BlockLinearMap {
    pub fn new(blocks: Vec<DMatrix<f64>>) -> Result<Self> {
        for (i, b) in blocks.iter().enumerate() {
            if !b.is_square() || b.nrows() == 0 {
                return Err(domain(format!("block {i} is not a non-empty square matrix")));
            }
            if b.nrows() > MAX_BLOCK {
                return Err(domain(format!("block {i} exceeds {MAX_BLOCK}x{MAX_BLOCK}")));
            }
            if b.iter().any(|x| !x.is_finite()) {
                return Err(domain(format!("block {i} has non-finite entries")));
            }
        }
        Ok(Self { blocks })
    }

    /// Blocks given as row-major nested lists.
    pub fn from_rows(rows: &[Vec<Vec<f64>>]) -> Result<Self> {
        let blocks = rows
            .iter()
            .enumerate()
            .map(|(i, b)| {
                let n = b.len();
                if b.iter().any(|r| r.len() != n) {
                    return Err(domain(format!("block {i} is not square")));
                }
                Ok(DMatrix::from_row_iterator(n, n, b.iter().flatten().copied()))
            })
            .collect::<Result<Vec<_>>>()?;
        Self::new(blocks)
    }

    /// Parse `[[[a, b], [c, d]], [[e]]]`.
    pub fn from_json(s: &str) -> Result<Self> {
        let rows: Vec<Vec<Vec<f64>>> =
            serde_json::from_str(s).map_err(|e| Error::Input(format!("block list: {e}")))?;
        Self::from_rows(&rows)
    }

    pub fn diagonal(entries: &[f64]) -> Result<Self> {
        Self::new(entries.iter().map(|&d| DMatrix::from_element(1, 1, d)).collect())
    }

    pub fn blocks(&self) -> &[DMatrix<f64>] {
        &self.blocks
    }

    pub fn block_sizes(&self) -> Vec<usize> {
        self.blocks.iter().map(|b| b.nrows()).collect()
    }

    /// Number of coordinates moved by the map.
    pub fn span(&self) -> usize {
        self.block_sizes().iter().sum()
    }

    /// `α = (n_1, ..., n_B, 1, 1, ...)`.
    pub fn natural_alpha(&self) -> GroupingAlpha {
        GroupingAlpha::new(self.block_sizes(), vec![1]).expect("block sizes are positive")
    }

    /// `self ∘ other`, blockwise.
    pub fn compose(&self, other: &BlockLinearMap) -> Result<Self> {
        if self.block_sizes() != other.block_sizes() {
            return Err(domain("composition needs equal block structure"));
        }
        Self::new(self.blocks.iter().zip(&other.blocks).map(|(a, b)| a * b).collect())
    }
}

/// Per-block determinants and `Σ ln|Δ_i|`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct JacobianProduct {
    pub dets: Vec<f64>,
    pub log_product: f64,
}

impl JacobianProduct {
    /// `∏|Δ_i|`.
    pub fn abs_product(&self) -> f64 {
        self.log_product.exp()
    }

    /// Sign of the signed product `∏Δ_i`.
    pub fn sign(&self) -> f64 {
        self.dets.iter().map(|d| d.signum()).product()
    }
}

/// LU determinants (partial pivoting) of every block.
pub fn block_determinants(m: &BlockLinearMap) -> Result<JacobianProduct> {
    let mut dets = Vec::with_capacity(m.blocks.len());
    let mut log = CompensatedSum::new();
    for (index, b) in m.blocks.iter().enumerate() {
        let det = b.clone().lu().determinant();
        let hadamard: f64 = b.row_iter().map(|r| r.norm()).product();
        if det.is_nan() || det.abs() <= SINGULAR_RATIO * hadamard {
            return Err(Error::Singular { index, det });
        }
        log.add(det.abs().ln());
        dets.push(det);
    }
    Ok(JacobianProduct {
        dets,
        log_product: log.value(),
    })
}

/// For a monomial block, `σ` and the entries with `y_i = M[i, σ(i)] x_{σ(i)}`.
fn monomial(b: &DMatrix<f64>) -> Option<Vec<(usize, f64)>> {
    let n = b.nrows();
    let mut seen = vec![false; n];
    let mut out = Vec::with_capacity(n);
    for i in 0..n {
        let nz: Vec<usize> = (0..n).filter(|&j| b[(i, j)] != 0.0).collect();
        if nz.len() != 1 || seen[nz[0]] {
            return None;
        }
        seen[nz[0]] = true;
        out.push((nz[0], b[(i, nz[0])]));
    }
    Some(out)
}

pub fn is_monomial(b: &DMatrix<f64>) -> bool {
    monomial(b).is_some()
}

/// `T^N(E)` when every block is monomial.
pub fn image_rectangle(m: &BlockLinearMap, e: &IntervalSeq) -> Result<Option<IntervalSeq>> {
    let mut out = e.clone();
    let mut offset = 0;
    for b in &m.blocks {
        let Some(perm) = monomial(b) else {
            return Ok(None);
        };
        for (i, (j, s)) in perm.into_iter().enumerate() {
            let side = e.coord(offset + j + 1)?.scale(s);
            out = out.with_coord(offset + i + 1, side)?;
        }
        offset += b.nrows();
    }
    Ok(Some(out))
}

/// Image measure under `T^N`, computed both ways when possible.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ImageMeasure {
    /// `ln(∏|Δ_i|) + ln μ_α(E)`.
    pub predicted: MeasureValue,
    /// `ln μ_α(T^N E)` evaluated on the image rectangle (monomial blocks).
    pub direct: Option<MeasureValue>,
    pub jacobian: JacobianProduct,
}

impl ImageMeasure {
    /// The image measure: direct when available, predicted otherwise.
    pub fn value(&self) -> MeasureValue {
        self.direct.unwrap_or(self.predicted)
    }

    /// `|direct - predicted|` in log space.
    pub fn log_discrepancy(&self) -> Option<f64> {
        self.direct.map(|d| {
            if d.log_value == self.predicted.log_value {
                0.0
            } else {
                (d.log_value - self.predicted.log_value).abs()
            }
        })
    }

    pub fn agrees(&self) -> bool {
        self.log_discrepancy().is_none_or(|d| d <= LOG_AGREEMENT_TOL)
    }
}

fn check_alignment(m: &BlockLinearMap, alpha: &GroupingAlpha) -> Result<()> {
    for (k, &n) in m.block_sizes().iter().enumerate() {
        if alpha.block_size(k) != n {
            return Err(domain(format!(
                "block {k} has size {n} but the grouping block F_{k} has size {}",
                alpha.block_size(k)
            )));
        }
    }
    Ok(())
}

/// `μ_α(T^N E)`. Block sizes must be the leading entries of `α`.
pub fn map_rectangle_measure(m: &BlockLinearMap, e: &IntervalSeq, alpha: &GroupingAlpha) -> Result<ImageMeasure> {
    check_alignment(m, alpha)?;
    let jacobian = block_determinants(m)?;
    let base = rect_measure(e, alpha, ProductMode::Ordinary)?;
    let predicted = MeasureValue {
        log_value: base.log_value + jacobian.log_product,
        status: base.status,
    };
    let direct = match image_rectangle(m, e)? {
        Some(img) => Some(rect_measure(&img, alpha, ProductMode::Ordinary)?),
        None => None,
    };
    Ok(ImageMeasure {
        predicted,
        direct,
        jacobian,
    })
}

/// `λ_1(T^N E) = |Δ| λ_1(E)` with a single `n × n` block and `α = (n, 1, 1, ...)`.
pub fn baker_special_case(nmat: &DMatrix<f64>, e: &IntervalSeq) -> Result<ImageMeasure> {
    let m = BlockLinearMap::new(vec![nmat.clone()])?;
    map_rectangle_measure(&m, e, &GroupingAlpha::leading(nmat.nrows()))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rect::DeltaBox;
    use nalgebra::dmatrix;

    #[test]
    fn determinants() {
        let id = BlockLinearMap::new(vec![DMatrix::identity(3, 3), DMatrix::identity(2, 2)]).unwrap();
        assert_eq!(block_determinants(&id).unwrap().log_product, 0.0);
        let d = BlockLinearMap::new(vec![dmatrix![2.0, 0.0; 0.0, 3.0]]).unwrap();
        let j = block_determinants(&d).unwrap();
        assert!((j.dets[0] - 6.0).abs() < 1e-14);
        let (c, s) = (0.3f64.cos(), 0.3f64.sin());
        let rot = BlockLinearMap::new(vec![dmatrix![c, -s; s, c]]).unwrap();
        assert!((block_determinants(&rot).unwrap().dets[0] - 1.0).abs() < 1e-15);
        let sing = BlockLinearMap::new(vec![dmatrix![1.0, 2.0; 2.0, 4.0]]).unwrap();
        assert!(matches!(block_determinants(&sing), Err(Error::Singular { index: 0, .. })));
    }

    #[test]
    fn construction_errors() {
        assert!(BlockLinearMap::from_rows(&[vec![vec![1.0, 2.0]]]).is_err());
        assert!(BlockLinearMap::new(vec![DMatrix::identity(17, 17)]).is_err());
        assert!(BlockLinearMap::from_json("[[[1, 0], [0, 1]], [[2]]]").is_ok());
        assert!(BlockLinearMap::from_json("[[1]]").is_err());
    }

    #[test]
    fn identity_and_diagonal_images() {
        let id = BlockLinearMap::new(vec![DMatrix::identity(2, 2)]).unwrap();
        let r = map_rectangle_measure(&id, &IntervalSeq::unit(), &GroupingAlpha::leading(2)).unwrap();
        assert_eq!(r.value().value(), 1.0);

        let d = BlockLinearMap::new(vec![dmatrix![2.0, 0.0; 0.0, 3.0]]).unwrap();
        let r = map_rectangle_measure(&d, &IntervalSeq::unit(), &GroupingAlpha::leading(2)).unwrap();
        let direct = r.direct.unwrap();
        assert!((direct.value() - 6.0).abs() < 1e-13);
        assert!(r.agrees());
        let img = image_rectangle(&d, &IntervalSeq::unit()).unwrap().unwrap();
        assert_eq!(img.coord(2).unwrap().hi(), 3.0);

        let d = BlockLinearMap::diagonal(&[2.0]).unwrap();
        let r = map_rectangle_measure(&d, &DeltaBox::new(0.1).unwrap().to_rect(), &GroupingAlpha::ones()).unwrap();
        assert!((r.predicted.log_value - (-10.0 + std::f64::consts::LN_2)).abs() < 1e-12);
        assert!(r.agrees());
    }

    #[test]
    fn misaligned_blocks_are_rejected() {
        let d = BlockLinearMap::new(vec![dmatrix![2.0, 0.0; 0.0, 3.0]]).unwrap();
        assert!(map_rectangle_measure(&d, &IntervalSeq::unit(), &GroupingAlpha::ones()).is_err());
    }

    #[test]
    fn baker_cases() {
        let r = baker_special_case(&DMatrix::identity(2, 2), &IntervalSeq::unit()).unwrap();
        assert_eq!(r.value().log_value, 0.0);
        let swap = dmatrix![0.0, 1.0; 1.0, 0.0];
        let e = IntervalSeq::unit_tail(vec![
            crate::rect::Interval::new(0.0, 2.0).unwrap(),
            crate::rect::Interval::new(0.0, 0.25).unwrap(),
        ]);
        let r = baker_special_case(&swap, &e).unwrap();
        assert_eq!(r.jacobian.dets[0], -1.0);
        assert!((r.value().value() - 0.5).abs() < 1e-15);
        assert!(r.agrees());
        let r = baker_special_case(&dmatrix![3.0], &IntervalSeq::unit()).unwrap();
        assert!((r.value().value() - 3.0).abs() < 1e-14);
    }

    #[test]
    fn general_blocks_use_the_law() {
        let m = dmatrix![1.0, 2.0; 3.0, 4.0];
        let r = baker_special_case(&m, &IntervalSeq::unit()).unwrap();
        assert!(r.direct.is_none());
        assert!((r.value().value() - 2.0).abs() < 1e-13);
    }

    #[test]
    fn composition_is_log_additive() {
        let a = BlockLinearMap::new(vec![dmatrix![1.0, 2.0; 3.0, 4.0], dmatrix![5.0]]).unwrap();
        let b = BlockLinearMap::new(vec![dmatrix![0.5, -1.0; 2.0, 0.3], dmatrix![-0.2]]).unwrap();
        let ab = a.compose(&b).unwrap();
        let (ja, jb, jab) = (
            block_determinants(&a).unwrap(),
            block_determinants(&b).unwrap(),
            block_determinants(&ab).unwrap(),
        );
        assert!((jab.log_product - ja.log_product - jb.log_product).abs() < 1e-10);
        assert!(a.compose(&BlockLinearMap::diagonal(&[1.0]).unwrap()).is_err());
    }
}
