use alloc::vec::Vec;

use super::grid::{DepthError, DepthMap};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct CropRect {
    pub x: usize,
    pub y: usize,
    pub width: usize,
    pub height: usize,
}

pub fn crop(map: &DepthMap, rect: CropRect) -> Result<DepthMap, DepthError> {
    let fits = rect.width > 0
        && rect.height > 0
        && rect.x.checked_add(rect.width).is_some_and(|e| e <= map.width())
        && rect.y.checked_add(rect.height).is_some_and(|e| e <= map.height());
    if !fits {
        return Err(DepthError::CropOutOfBounds);
    }
    let mut values = Vec::with_capacity(rect.width * rect.height);
    for y in rect.y..rect.y + rect.height {
        let row = y * map.width();
        values.extend_from_slice(&map.values()[row + rect.x..row + rect.x + rect.width]);
    }
    DepthMap::new(rect.width, rect.height, values)
}

/// Source coordinate of destination sample `i` under the half-pixel-center
/// convention, clamped to the valid source range.
fn source_coord(i: usize, src: usize, dst: usize) -> (usize, usize, f64) {
    let s = ((i as f64 + 0.5) * src as f64 / dst as f64 - 0.5).clamp(0.0, (src - 1) as f64);
    let i0 = libm::floor(s) as usize;
    let i1 = (i0 + 1).min(src - 1);
    (i0, i1, s - i0 as f64)
}

/// Bilinear resampling with pixel centers at `(i + 0.5)`.
pub fn resample_bilinear(map: &DepthMap, width: usize, height: usize) -> Result<DepthMap, DepthError> {
    if width == 0 || height == 0 {
        return Err(DepthError::EmptyGrid);
    }
    if map.dims() == (width, height) {
        return Ok(map.clone());
    }
    let xs: Vec<_> = (0..width).map(|i| source_coord(i, map.width(), width)).collect();
    let mut values = Vec::with_capacity(width * height);
    for j in 0..height {
        let (y0, y1, fy) = source_coord(j, map.height(), height);
        for &(x0, x1, fx) in &xs {
            let top = map.get(x0, y0) * (1.0 - fx) + map.get(x1, y0) * fx;
            let bottom = map.get(x0, y1) * (1.0 - fx) + map.get(x1, y1) * fx;
            values.push(top * (1.0 - fy) + bottom * fy);
        }
    }
    DepthMap::new(width, height, values)
}

/// Min-max normalization to `[0, 1]`; constant maps become all zeros.
pub fn normalize_min_max(map: &DepthMap) -> DepthMap {
    let (lo, hi) = map.min_max();
    let range = hi - lo;
    let values = if range > 0.0 {
        map.values().iter().map(|v| (v - lo) / range).collect()
    } else {
        alloc::vec![0.0; map.values().len()]
    };
    DepthMap::new(map.width(), map.height(), values).expect("normalization keeps shape and finiteness")
}

/// Optional crop, bilinear resample to the target size, then min-max normalization.
pub fn preprocess(
    map: &DepthMap,
    target_w: usize,
    target_h: usize,
    crop_rect: Option<CropRect>,
) -> Result<DepthMap, DepthError> {
    let cropped;
    let src = match crop_rect {
        Some(r) => {
            cropped = crop(map, r)?;
            &cropped
        }
        None => map,
    };
    Ok(normalize_min_max(&resample_bilinear(src, target_w, target_h)?))
}
