//! Batch depth evaluation over directories of per-frame files.
//!
//! Files are paired by stem. Predictions (`frames`) are cropped/resampled and
//! min-max normalized; references and pseudo labels are only resampled to the
//! working size. Every input is loaded and checked before anything is written.

use std::collections::BTreeMap;
use std::fmt;
use std::path::{Path, PathBuf};

use serde::Serialize;
use waveshot_core::depth::{
    align_loss, colorize, cutmix_loss, fit_affine, labeled_loss, preprocess, pseudo_loss, resample_bilinear,
    total_loss, unlabeled_loss, DepthError, DepthMap, LossWeights, RgbImage,
};

use crate::depth_io::{read_depth, read_features, read_mask, write_ppm, DepthIoError};

const DEPTH_EXTS: [&str; 2] = ["pgm", "txt"];

#[derive(Debug, Clone, Default)]
pub struct EvalInputs {
    pub frames: PathBuf,
    pub refs: PathBuf,
    pub pseudo: Option<PathBuf>,
    /// Predictions on CutMix-blended images; needs `pseudo`, `pseudo_b` and `masks`.
    pub mixed: Option<PathBuf>,
    pub pseudo_b: Option<PathBuf>,
    pub masks: Option<PathBuf>,
    pub feats: Option<PathBuf>,
    pub pre_feats: Option<PathBuf>,
    /// Working size; defaults to the first frame's size.
    pub size: Option<(usize, usize)>,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct FrameMetrics {
    pub frame: String,
    pub l_labeled: f64,
    pub l_pseudo: f64,
    pub l_cutmix: f64,
    pub l_align: f64,
    pub l_total: f64,
    pub scale: f64,
    pub shift: f64,
    pub aligned_mae: f64,
}

/// Every problem found while validating the inputs.
#[derive(Debug, Clone, PartialEq)]
pub struct EvalErrors(pub Vec<String>);

impl fmt::Display for EvalErrors {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        writeln!(f, "{} problem(s) in depth-eval inputs:", self.0.len())?;
        for e in &self.0 {
            writeln!(f, "  - {e}")?;
        }
        Ok(())
    }
}

impl std::error::Error for EvalErrors {}

/// Stem → path for every depth file in `dir`.
fn depth_files(dir: &Path, exts: &[&str], errors: &mut Vec<String>) -> BTreeMap<String, PathBuf> {
    let mut out = BTreeMap::new();
    let entries = match std::fs::read_dir(dir) {
        Ok(e) => e,
        Err(e) => {
            errors.push(format!("{}: {e}", dir.display()));
            return out;
        }
    };
    for entry in entries.flatten() {
        let path = entry.path();
        let ext = path.extension().and_then(|e| e.to_str()).map(str::to_ascii_lowercase);
        let stem = path.file_stem().and_then(|s| s.to_str()).map(str::to_owned);
        if let (Some(ext), Some(stem)) = (ext, stem) {
            if path.is_file() && exts.contains(&ext.as_str()) {
                if let Some(prev) = out.insert(stem.clone(), path.clone()) {
                    errors.push(format!(
                        "{}: stem `{stem}` appears twice ({} and {})",
                        dir.display(),
                        prev.display(),
                        path.display()
                    ));
                }
            }
        }
    }
    out
}

struct Frame {
    stem: String,
    pred: DepthMap,
    gt: DepthMap,
    pseudo: Option<DepthMap>,
    cutmix: Option<(DepthMap, DepthMap, DepthMap, waveshot_core::depth::RegionMask)>,
    feats: Option<(waveshot_core::depth::FeatureSet, waveshot_core::depth::FeatureSet)>,
}

fn ctx<T>(r: Result<T, DepthIoError>, path: &Path, errors: &mut Vec<String>) -> Option<T> {
    r.map_err(|e| errors.push(format!("{}: {e}", path.display()))).ok()
}

fn companion(
    dir: &Option<PathBuf>,
    files: &Option<BTreeMap<String, PathBuf>>,
    stem: &str,
    errors: &mut Vec<String>,
) -> Option<PathBuf> {
    let (dir, files) = (dir.as_ref()?, files.as_ref()?);
    match files.get(stem) {
        Some(p) => Some(p.clone()),
        None => {
            errors.push(format!("{}: no file for frame `{stem}`", dir.display()));
            None
        }
    }
}

fn resampled(map: DepthMap, w: usize, h: usize, path: &Path, errors: &mut Vec<String>) -> Option<DepthMap> {
    ctx(resample_bilinear(&map, w, h).map_err(DepthIoError::from), path, errors)
}

fn load(inputs: &EvalInputs) -> Result<Vec<Frame>, EvalErrors> {
    let mut errors = Vec::new();
    let cutmix_dirs = [&inputs.mixed, &inputs.pseudo_b, &inputs.masks];
    let cutmix_given = cutmix_dirs.iter().filter(|d| d.is_some()).count();
    if cutmix_given != 0 && (cutmix_given != 3 || inputs.pseudo.is_none()) {
        errors.push("CutMix needs --mixed, --pseudo, --pseudo-b and --masks together".to_owned());
    }
    if inputs.feats.is_some() != inputs.pre_feats.is_some() {
        errors.push("alignment needs both --feats and --pre-feats".to_owned());
    }

    let frames = depth_files(&inputs.frames, &DEPTH_EXTS, &mut errors);
    let refs = depth_files(&inputs.refs, &DEPTH_EXTS, &mut errors);
    let list = |d: &Option<PathBuf>, exts: &[&str], errors: &mut Vec<String>| {
        d.as_ref().map(|d| depth_files(d, exts, errors))
    };
    let pseudo = list(&inputs.pseudo, &DEPTH_EXTS, &mut errors);
    let mixed = list(&inputs.mixed, &DEPTH_EXTS, &mut errors);
    let pseudo_b = list(&inputs.pseudo_b, &DEPTH_EXTS, &mut errors);
    let masks = list(&inputs.masks, &["txt"], &mut errors);
    let feats = list(&inputs.feats, &["txt"], &mut errors);
    let pre_feats = list(&inputs.pre_feats, &["txt"], &mut errors);

    if frames.is_empty() && errors.is_empty() {
        errors.push(format!("{}: no depth frames (.pgm or .txt)", inputs.frames.display()));
    }
    for stem in refs.keys().filter(|s| !frames.contains_key(*s)) {
        errors.push(format!("{}: reference `{stem}` has no matching frame", inputs.refs.display()));
    }
    if let Some((w, h)) = inputs.size {
        if w == 0 || h == 0 {
            errors.push(format!("working size {w}x{h} must be at least 1x1"));
        }
    }

    let mut size = inputs.size;
    let mut out = Vec::with_capacity(frames.len());
    for (stem, fpath) in &frames {
        let Some(raw) = ctx(read_depth(fpath), fpath, &mut errors) else { continue };
        let (w, h) = *size.get_or_insert(raw.dims());
        if w == 0 || h == 0 {
            continue;
        }
        let pred = ctx(preprocess(&raw, w, h, None).map_err(DepthIoError::from), fpath, &mut errors);
        if pred.as_ref().is_some_and(|p| p.min_max().0 == p.min_max().1) {
            errors.push(format!("{}: prediction is constant; scale/shift fit undefined", fpath.display()));
        }

        let gt = match refs.get(stem) {
            Some(rpath) => ctx(read_depth(rpath), rpath, &mut errors).and_then(|m| resampled(m, w, h, rpath, &mut errors)),
            None => {
                errors.push(format!("{}: no reference for frame `{stem}`", inputs.refs.display()));
                None
            }
        };
        let load_map = |dir: &Option<PathBuf>, files: &Option<BTreeMap<String, PathBuf>>, errors: &mut Vec<String>| {
            let p = companion(dir, files, stem, errors)?;
            ctx(read_depth(&p), &p, errors).and_then(|m| resampled(m, w, h, &p, errors))
        };
        let pseudo_map = load_map(&inputs.pseudo, &pseudo, &mut errors);
        let mixed_map = load_map(&inputs.mixed, &mixed, &mut errors);
        let pseudo_b_map = load_map(&inputs.pseudo_b, &pseudo_b, &mut errors);
        let mask = companion(&inputs.masks, &masks, stem, &mut errors).and_then(|p| {
            let m = ctx(read_mask(&p), &p, &mut errors)?;
            if m.dims() != (w, h) {
                errors.push(format!("{}: mask is {}x{}, working size is {w}x{h}", p.display(), m.dims().0, m.dims().1));
                return None;
            }
            Some(m)
        });
        let fpair = match (
            companion(&inputs.feats, &feats, stem, &mut errors),
            companion(&inputs.pre_feats, &pre_feats, stem, &mut errors),
        ) {
            (Some(a), Some(b)) => {
                let fa = ctx(read_features(&a), &a, &mut errors);
                let fb = ctx(read_features(&b), &b, &mut errors);
                match (fa, fb) {
                    (Some(fa), Some(fb)) => match align_loss(&fa, &fb, 0.0) {
                        Err(e) => {
                            errors.push(format!("{} vs {}: {e}", a.display(), b.display()));
                            None
                        }
                        Ok(_) => Some((fa, fb)),
                    },
                    _ => None,
                }
            }
            _ => None,
        };

        if let (Some(pred), Some(gt)) = (pred, gt) {
            let cutmix = match (mixed_map, pseudo_map.clone(), pseudo_b_map, mask) {
                (Some(m), Some(a), Some(b), Some(k)) => Some((m, a, b, k)),
                _ => None,
            };
            out.push(Frame {
                stem: stem.clone(),
                pred,
                gt,
                pseudo: pseudo_map,
                cutmix,
                feats: fpair,
            });
        }
    }
    if errors.is_empty() {
        Ok(out)
    } else {
        Err(EvalErrors(errors))
    }
}

fn evaluate_frame(f: &Frame, weights: &LossWeights) -> Result<(FrameMetrics, RgbImage), DepthError> {
    let l_labeled = labeled_loss(&f.pred, &f.gt)?;
    let l_pseudo = f.pseudo.as_ref().map_or(Ok(0.0), |p| pseudo_loss(&f.pred, p))?;
    let l_cutmix = f
        .cutmix
        .as_ref()
        .map_or(Ok(0.0), |(m, a, b, k)| cutmix_loss(m, a, b, k))?;
    let l_align = f
        .feats
        .as_ref()
        .map_or(Ok(0.0), |(a, b)| align_loss(a, b, weights.alpha))?;
    let l_total = total_loss(l_labeled, unlabeled_loss(l_pseudo, l_cutmix)?, l_align, weights)?;
    let fit = fit_affine(&f.pred, &f.gt)?;
    let aligned_mae = labeled_loss(&fit.apply(&f.pred)?, &f.gt)?;
    if fit.is_flipped() {
        log::warn!("frame {}: negative scale fit ({:.4}); depth order is inverted", f.stem, fit.scale);
    }
    Ok((
        FrameMetrics {
            frame: f.stem.clone(),
            l_labeled,
            l_pseudo,
            l_cutmix,
            l_align,
            l_total,
            scale: fit.scale,
            shift: fit.shift,
            aligned_mae,
        },
        colorize(&f.pred),
    ))
}

/// Computes metrics and colorized predictions without touching the disk
/// beyond reading inputs.
pub fn evaluate(inputs: &EvalInputs, weights: &LossWeights) -> Result<Vec<(FrameMetrics, RgbImage)>, EvalErrors> {
    let frames = load(inputs)?;
    let mut results = Vec::with_capacity(frames.len());
    let mut errors = Vec::new();
    for f in &frames {
        match evaluate_frame(f, weights) {
            Ok(r) => results.push(r),
            Err(e) => errors.push(format!("frame {}: {e}", f.stem)),
        }
    }
    if errors.is_empty() {
        Ok(results)
    } else {
        Err(EvalErrors(errors))
    }
}

#[derive(Debug, thiserror::Error)]
pub enum DepthEvalError {
    #[error(transparent)]
    Inputs(#[from] EvalErrors),
    #[error("writing {path}: {message}")]
    Output { path: PathBuf, message: String },
}

/// Evaluates and writes `metrics.csv` plus one `<frame>.ppm` per frame.
pub fn run(inputs: &EvalInputs, weights: &LossWeights, out_dir: &Path) -> Result<Vec<FrameMetrics>, DepthEvalError> {
    let results = evaluate(inputs, weights)?;
    let out_err = |path: &Path, e: &dyn fmt::Display| DepthEvalError::Output {
        path: path.to_owned(),
        message: e.to_string(),
    };
    std::fs::create_dir_all(out_dir).map_err(|e| out_err(out_dir, &e))?;
    let csv_path = out_dir.join("metrics.csv");
    let mut w = csv::Writer::from_path(&csv_path).map_err(|e| out_err(&csv_path, &e))?;
    for (m, _) in &results {
        w.serialize(m).map_err(|e| out_err(&csv_path, &e))?;
    }
    w.flush().map_err(|e| out_err(&csv_path, &e))?;
    for (m, img) in &results {
        let p = out_dir.join(format!("{}.ppm", m.frame));
        write_ppm(&p, img).map_err(|e| out_err(&p, &e))?;
    }
    Ok(results.into_iter().map(|(m, _)| m).collect())
}
