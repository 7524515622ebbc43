//! Depth-map, feature and mask files.
//!
//! * 16-bit binary graymap (`P5`, maxval up to 65535): sample / maxval.
//! * Text grid: `W H` then `W·H` reals, row-major. `#` starts a comment.
//! * Feature set: `N K` then `N·K` reals.
//! * Region mask: `W H` then `W·H` tokens of `0` or `1`.
//! * Output images are binary pixmaps (`P6`, maxval 255).

use std::io::Write;
use std::path::Path;

use waveshot_core::depth::{DepthError, DepthMap, FeatureSet, RegionMask, RgbImage};

#[derive(Debug, thiserror::Error)]
pub enum DepthIoError {
    #[error(transparent)]
    Io(#[from] std::io::Error),
    #[error("malformed {kind}: {message}")]
    Format { kind: &'static str, message: String },
    #[error(transparent)]
    Depth(#[from] DepthError),
}

fn format_err(kind: &'static str, message: impl Into<String>) -> DepthIoError {
    DepthIoError::Format {
        kind,
        message: message.into(),
    }
}

/// Whitespace-separated tokens with `#` comments removed.
fn tokens(text: &str) -> impl Iterator<Item = &str> {
    text.lines()
        .map(|l| l.split('#').next().unwrap_or(""))
        .flat_map(str::split_whitespace)
}

fn parse_dims<'a>(kind: &'static str, it: &mut impl Iterator<Item = &'a str>) -> Result<(usize, usize), DepthIoError> {
    let mut dim = |name: &str| -> Result<usize, DepthIoError> {
        let tok = it.next().ok_or_else(|| format_err(kind, format!("missing {name}")))?;
        tok.parse()
            .map_err(|_| format_err(kind, format!("{name} `{tok}` is not a non-negative integer")))
    };
    Ok((dim("first dimension")?, dim("second dimension")?))
}

fn parse_reals<'a>(
    kind: &'static str,
    it: impl Iterator<Item = &'a str>,
    expected: usize,
) -> Result<Vec<f64>, DepthIoError> {
    let mut out = Vec::with_capacity(expected);
    for tok in it {
        if out.len() == expected {
            return Err(format_err(kind, format!("more than {expected} values")));
        }
        let v: f64 = tok
            .parse()
            .map_err(|_| format_err(kind, format!("value `{tok}` is not a number")))?;
        out.push(v);
    }
    if out.len() != expected {
        return Err(format_err(kind, format!("expected {expected} values, found {}", out.len())));
    }
    Ok(out)
}

pub fn parse_grid(text: &str) -> Result<DepthMap, DepthIoError> {
    let mut it = tokens(text);
    let (w, h) = parse_dims("depth grid", &mut it)?;
    let values = parse_reals("depth grid", it, w.saturating_mul(h))?;
    Ok(DepthMap::new(w, h, values)?)
}

pub fn format_grid(map: &DepthMap) -> String {
    let mut s = format!("{} {}\n", map.width(), map.height());
    for row in map.values().chunks(map.width()) {
        let line: Vec<String> = row.iter().map(|v| v.to_string()).collect();
        s.push_str(&line.join(" "));
        s.push('\n');
    }
    s
}

pub fn parse_features(text: &str) -> Result<FeatureSet, DepthIoError> {
    let mut it = tokens(text);
    let (n, k) = parse_dims("feature set", &mut it)?;
    let data = parse_reals("feature set", it, n.saturating_mul(k))?;
    Ok(FeatureSet::new(n, k, data)?)
}

pub fn parse_mask(text: &str) -> Result<RegionMask, DepthIoError> {
    let mut it = tokens(text);
    let (w, h) = parse_dims("mask", &mut it)?;
    let mut cells = Vec::with_capacity(w.saturating_mul(h));
    for tok in it {
        match tok {
            "0" => cells.push(false),
            "1" => cells.push(true),
            other => return Err(format_err("mask", format!("cell `{other}` is not 0 or 1"))),
        }
    }
    Ok(RegionMask::new(w, h, cells)?)
}

/// Reads one whitespace-delimited header field of a netpbm file, skipping
/// comments. Returns the field and the offset just past it.
fn pnm_field(bytes: &[u8], mut pos: usize) -> Result<(&str, usize), DepthIoError> {
    loop {
        match bytes.get(pos) {
            None => return Err(format_err("graymap", "truncated header")),
            Some(b'#') => {
                while bytes.get(pos).is_some_and(|&b| b != b'\n') {
                    pos += 1;
                }
            }
            Some(b) if b.is_ascii_whitespace() => pos += 1,
            Some(_) => break,
        }
    }
    let start = pos;
    while bytes.get(pos).is_some_and(|b| !b.is_ascii_whitespace() && *b != b'#') {
        pos += 1;
    }
    let field = std::str::from_utf8(&bytes[start..pos]).map_err(|_| format_err("graymap", "non-ASCII header"))?;
    Ok((field, pos))
}

pub fn parse_pgm(bytes: &[u8]) -> Result<DepthMap, DepthIoError> {
    let (magic, pos) = pnm_field(bytes, 0)?;
    if magic != "P5" {
        return Err(format_err("graymap", format!("expected magic P5, found `{magic}`")));
    }
    let mut pos = pos;
    let mut nums = [0usize; 3];
    for (slot, name) in nums.iter_mut().zip(["width", "height", "maxval"]) {
        let (field, next) = pnm_field(bytes, pos)?;
        *slot = field
            .parse()
            .map_err(|_| format_err("graymap", format!("{name} `{field}` is not an integer")))?;
        pos = next;
    }
    let [w, h, maxval] = nums;
    if !(1..=65535).contains(&maxval) {
        return Err(format_err("graymap", format!("maxval {maxval} outside 1..=65535")));
    }
    // Exactly one whitespace byte separates the header from the raster.
    pos += 1;
    let bpp = if maxval > 255 { 2 } else { 1 };
    let n = w.saturating_mul(h);
    let raster = bytes.get(pos..).unwrap_or(&[]);
    if raster.len() < n.saturating_mul(bpp) {
        return Err(format_err(
            "graymap",
            format!("raster has {} bytes, need {}", raster.len(), n * bpp),
        ));
    }
    let scale = maxval as f64;
    let values = (0..n)
        .map(|i| {
            let v = if bpp == 2 {
                u16::from_be_bytes([raster[2 * i], raster[2 * i + 1]])
            } else {
                u16::from(raster[i])
            };
            f64::from(v) / scale
        })
        .collect();
    Ok(DepthMap::new(w, h, values)?)
}

/// 16-bit graymap of a map whose values lie in `[0, 1]` (clamped).
pub fn encode_pgm16(map: &DepthMap) -> Vec<u8> {
    let mut out = format!("P5\n{} {}\n65535\n", map.width(), map.height()).into_bytes();
    for &v in map.values() {
        let q = (v.clamp(0.0, 1.0) * 65535.0).round() as u16;
        out.extend_from_slice(&q.to_be_bytes());
    }
    out
}

pub fn encode_ppm(img: &RgbImage) -> Vec<u8> {
    let mut out = format!("P6\n{} {}\n255\n", img.width, img.height).into_bytes();
    out.extend_from_slice(&img.data);
    out
}

pub fn write_ppm(path: &Path, img: &RgbImage) -> Result<(), DepthIoError> {
    let mut f = std::fs::File::create(path)?;
    f.write_all(&encode_ppm(img))?;
    Ok(())
}

/// Loads a depth map, choosing the format by extension (`.pgm` binary,
/// anything else text grid).
pub fn read_depth(path: &Path) -> Result<DepthMap, DepthIoError> {
    if path.extension().is_some_and(|e| e.eq_ignore_ascii_case("pgm")) {
        parse_pgm(&std::fs::read(path)?)
    } else {
        parse_grid(&std::fs::read_to_string(path)?)
    }
}

pub fn read_features(path: &Path) -> Result<FeatureSet, DepthIoError> {
    parse_features(&std::fs::read_to_string(path)?)
}

pub fn read_mask(path: &Path) -> Result<RegionMask, DepthIoError> {
    parse_mask(&std::fs::read_to_string(path)?)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn grid_with_comments() {
        let m = parse_grid("# depth\n3 2\n0 1 2 # row 0\n3 4 5.5\n").unwrap();
        assert_eq!(m.dims(), (3, 2));
        assert_eq!(m.values(), &[0.0, 1.0, 2.0, 3.0, 4.0, 5.5]);
        assert_eq!(parse_grid(&format_grid(&m)).unwrap(), m);
    }

    #[test]
    fn grid_errors() {
        assert!(matches!(parse_grid(""), Err(DepthIoError::Format { .. })));
        assert!(matches!(parse_grid("2 2\n1 2 3"), Err(DepthIoError::Format { .. })));
        assert!(matches!(parse_grid("1 1\n1 2"), Err(DepthIoError::Format { .. })));
        assert!(matches!(parse_grid("1 1\nx"), Err(DepthIoError::Format { .. })));
        assert!(matches!(parse_grid("1 1\nNaN"), Err(DepthIoError::Depth(DepthError::NonFinite(0)))));
        assert!(matches!(parse_grid("0 3\n"), Err(DepthIoError::Depth(DepthError::EmptyGrid))));
    }

    #[test]
    fn pgm16_roundtrip() {
        let m = DepthMap::new(3, 1, vec![0.0, 0.5, 1.0]).unwrap();
        let bytes = encode_pgm16(&m);
        assert!(bytes.starts_with(b"P5\n3 1\n65535\n"));
        let back = parse_pgm(&bytes).unwrap();
        assert_eq!(back.values()[0], 0.0);
        assert_eq!(back.values()[1], 32768.0 / 65535.0);
        assert_eq!(back.values()[2], 1.0);
    }

    #[test]
    fn pgm_header_comments_and_8bit() {
        let mut bytes = b"P5 # c\n# another\n2 1 255\n".to_vec();
        bytes.extend_from_slice(&[0, 255]);
        assert_eq!(parse_pgm(&bytes).unwrap().values(), &[0.0, 1.0]);
        assert!(parse_pgm(b"P2\n1 1\n255\n0").is_err());
        assert!(parse_pgm(b"P5\n2 2\n65535\n\x00\x01").is_err());
        assert!(parse_pgm(b"P5\n1 1\n70000\n\x00\x00\x00").is_err());
    }

    #[test]
    fn features_and_masks() {
        let f = parse_features("2 3\n1 0 0\n0 1 0\n").unwrap();
        assert_eq!((f.len(), f.dim()), (2, 3));
        let m = parse_mask("2 1\n1 0\n").unwrap();
        assert_eq!(m.cells(), &[true, false]);
        assert!(parse_mask("2 1\n1 2\n").is_err());
    }

    #[test]
    fn ppm_header() {
        let img = RgbImage {
            width: 1,
            height: 1,
            data: vec![1, 2, 3],
        };
        assert_eq!(encode_ppm(&img), b"P6\n1 1\n255\n\x01\x02\x03");
    }
}
