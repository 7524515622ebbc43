use alloc::vec::Vec;

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum DepthError {
    #[error("grid has zero width or height")]
    EmptyGrid,
    #[error("expected {expected} values, got {actual}")]
    LengthMismatch { expected: usize, actual: usize },
    #[error("value at index {0} is not finite")]
    NonFinite(usize),
    #[error("dimension mismatch: {0}x{1} vs {2}x{3}")]
    DimensionMismatch(usize, usize, usize, usize),
    #[error("crop rectangle out of bounds")]
    CropOutOfBounds,
    #[error("feature vector {0} has zero norm")]
    ZeroNorm(usize),
    #[error("feature sets differ in shape")]
    ShapeMismatch,
    #[error("prediction has zero variance")]
    ZeroVariance,
    #[error("loss component `{0}` is negative or not finite")]
    NegativeComponent(&'static str),
    #[error("invalid loss weight `{0}`")]
    InvalidWeight(&'static str),
}

/// Row-major `width × height` grid of finite reals.
///
/// Values are relative depths; aligned or shifted maps may go negative, so
/// only finiteness is enforced.
#[derive(Debug, Clone, PartialEq)]
pub struct DepthMap {
    width: usize,
    height: usize,
    values: Vec<f64>,
}

impl DepthMap {
    pub fn new(width: usize, height: usize, values: Vec<f64>) -> Result<Self, DepthError> {
        if width == 0 || height == 0 {
            return Err(DepthError::EmptyGrid);
        }
        let expected = width
            .checked_mul(height)
            .ok_or(DepthError::LengthMismatch { expected: usize::MAX, actual: values.len() })?;
        if values.len() != expected {
            return Err(DepthError::LengthMismatch {
                expected,
                actual: values.len(),
            });
        }
        if let Some(i) = values.iter().position(|v| !v.is_finite()) {
            return Err(DepthError::NonFinite(i));
        }
        Ok(Self {
            width,
            height,
            values,
        })
    }

    pub fn filled(width: usize, height: usize, v: f64) -> Result<Self, DepthError> {
        Self::new(width, height, alloc::vec![v; width.saturating_mul(height)])
    }

    pub fn width(&self) -> usize {
        self.width
    }

    pub fn height(&self) -> usize {
        self.height
    }

    pub fn dims(&self) -> (usize, usize) {
        (self.width, self.height)
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn into_values(self) -> Vec<f64> {
        self.values
    }

    pub fn get(&self, x: usize, y: usize) -> f64 {
        self.values[y * self.width + x]
    }

    pub fn min_max(&self) -> (f64, f64) {
        self.values
            .iter()
            .fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), &v| (lo.min(v), hi.max(v)))
    }

    pub fn map(&self, f: impl Fn(f64) -> f64) -> Result<Self, DepthError> {
        Self::new(self.width, self.height, self.values.iter().map(|&v| f(v)).collect())
    }

    pub(crate) fn check_same_dims(&self, other: &DepthMap) -> Result<(), DepthError> {
        if self.dims() != other.dims() {
            return Err(DepthError::DimensionMismatch(
                self.width,
                self.height,
                other.width,
                other.height,
            ));
        }
        Ok(())
    }
}

/// `N` feature vectors of common dimension `K`, stored row-major.
#[derive(Debug, Clone, PartialEq)]
pub struct FeatureSet {
    dim: usize,
    data: Vec<f64>,
}

impl FeatureSet {
    pub fn new(count: usize, dim: usize, data: Vec<f64>) -> Result<Self, DepthError> {
        if dim == 0 {
            return Err(DepthError::EmptyGrid);
        }
        let expected = count.saturating_mul(dim);
        if data.len() != expected {
            return Err(DepthError::LengthMismatch {
                expected,
                actual: data.len(),
            });
        }
        if let Some(i) = data.iter().position(|v| !v.is_finite()) {
            return Err(DepthError::NonFinite(i));
        }
        Ok(Self { dim, data })
    }

    pub fn from_rows(rows: &[Vec<f64>]) -> Result<Self, DepthError> {
        let dim = rows.first().map_or(0, Vec::len);
        if rows.iter().any(|r| r.len() != dim) {
            return Err(DepthError::ShapeMismatch);
        }
        Self::new(rows.len(), dim, rows.iter().flatten().copied().collect())
    }

    pub fn len(&self) -> usize {
        self.data.len() / self.dim
    }

    pub fn is_empty(&self) -> bool {
        self.data.is_empty()
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn row(&self, i: usize) -> &[f64] {
        &self.data[i * self.dim..(i + 1) * self.dim]
    }

    pub fn rows(&self) -> impl Iterator<Item = &[f64]> {
        self.data.chunks_exact(self.dim)
    }
}

/// Boolean grid choosing CutMix region A (`true`) versus region B.
#[derive(Debug, Clone, PartialEq)]
pub struct RegionMask {
    width: usize,
    height: usize,
    cells: Vec<bool>,
}

impl RegionMask {
    pub fn new(width: usize, height: usize, cells: Vec<bool>) -> Result<Self, DepthError> {
        if width == 0 || height == 0 {
            return Err(DepthError::EmptyGrid);
        }
        if cells.len() != width.saturating_mul(height) {
            return Err(DepthError::LengthMismatch {
                expected: width.saturating_mul(height),
                actual: cells.len(),
            });
        }
        Ok(Self {
            width,
            height,
            cells,
        })
    }

    /// Axis-aligned box mask: cells with `x0 ≤ x < x1`, `y0 ≤ y < y1` are set.
    pub fn rect(width: usize, height: usize, x0: usize, y0: usize, x1: usize, y1: usize) -> Result<Self, DepthError> {
        let cells = (0..height)
            .flat_map(|y| (0..width).map(move |x| (x0..x1).contains(&x) && (y0..y1).contains(&y)))
            .collect();
        Self::new(width, height, cells)
    }

    pub fn dims(&self) -> (usize, usize) {
        (self.width, self.height)
    }

    pub fn cells(&self) -> &[bool] {
        &self.cells
    }

    pub fn complement(&self) -> Self {
        Self {
            width: self.width,
            height: self.height,
            cells: self.cells.iter().map(|c| !c).collect(),
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use alloc::vec;

    #[test]
    fn construction_checks() {
        assert_eq!(DepthMap::new(0, 1, vec![]), Err(DepthError::EmptyGrid));
        assert_eq!(
            DepthMap::new(2, 2, vec![1.0; 3]),
            Err(DepthError::LengthMismatch { expected: 4, actual: 3 })
        );
        assert_eq!(
            DepthMap::new(2, 1, vec![1.0, f64::NAN]),
            Err(DepthError::NonFinite(1))
        );
        let m = DepthMap::new(3, 2, vec![0.0, 1.0, 2.0, 3.0, 4.0, 5.0]).unwrap();
        assert_eq!(m.get(2, 1), 5.0);
        assert_eq!(m.min_max(), (0.0, 5.0));
    }

    #[test]
    fn features_and_masks() {
        let f = FeatureSet::from_rows(&[vec![1.0, 0.0], vec![0.0, 2.0]]).unwrap();
        assert_eq!(f.len(), 2);
        assert_eq!(f.row(1), &[0.0, 2.0]);
        assert!(FeatureSet::from_rows(&[vec![1.0], vec![1.0, 2.0]]).is_err());
        let m = RegionMask::rect(3, 2, 1, 0, 3, 1).unwrap();
        assert_eq!(m.cells(), &[false, true, true, false, false, false]);
        assert_eq!(m.complement().cells(), &[true, false, false, true, true, true]);
    }
}
