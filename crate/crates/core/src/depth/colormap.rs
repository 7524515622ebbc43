use alloc::vec::Vec;

use super::grid::DepthMap;
use super::preprocess::normalize_min_max;

const ANCHORS: [[u8; 3]; 4] = [[255, 0, 0], [255, 255, 0], [0, 255, 255], [0, 0, 255]];
const SEGMENT: usize = 85;

const fn build_gradient() -> [[u8; 3]; 256] {
    let mut table = [[0u8; 3]; 256];
    let mut i = 0;
    while i < 256 {
        let mut seg = i / SEGMENT;
        if seg > 2 {
            seg = 2;
        }
        let u = (i - seg * SEGMENT) as u32;
        let mut c = 0;
        while c < 3 {
            let a = ANCHORS[seg][c] as u32;
            let b = ANCHORS[seg + 1][c] as u32;
            // Rounded linear blend; 85 is odd so no exact halves occur.
            table[i][c] = ((a * (SEGMENT as u32 - u) + b * u + 42) / SEGMENT as u32) as u8;
            c += 1;
        }
        i += 1;
    }
    table
}

/// 256-entry red → yellow → cyan → blue gradient. Index 0 (nearest) is the
/// warm end, index 255 (farthest) the cool end.
pub const GRADIENT: [[u8; 3]; 256] = build_gradient();

/// 8-bit RGB raster, row-major, 3 bytes per pixel.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct RgbImage {
    pub width: usize,
    pub height: usize,
    pub data: Vec<u8>,
}

/// Gradient index for a normalized depth in `[0, 1]`.
pub fn gradient_index(v: f64) -> usize {
    libm::round(v.clamp(0.0, 1.0) * 255.0) as usize
}

/// Colorizes a depth map: near is warm, far is cool. Constant maps render
/// entirely in the warmest color.
pub fn colorize(map: &DepthMap) -> RgbImage {
    let norm = normalize_min_max(map);
    let data = norm
        .values()
        .iter()
        .flat_map(|&v| GRADIENT[gradient_index(v)])
        .collect();
    RgbImage {
        width: map.width(),
        height: map.height(),
        data,
    }
}
