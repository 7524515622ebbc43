//! Semi-supervised depth training losses and least-squares alignment.
//!
//! `L_total = L_labeled + (L_pseudo + L_cutmix) + λ·L_align`, where every
//! dense term is a (region-wise) mean absolute error over the `W × H` grid
//! and `L_align` is a hinge on cosine similarity between feature vectors.

use super::grid::{DepthError, DepthMap, FeatureSet, RegionMask};

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LossWeights {
    /// Weight on the feature-alignment term.
    pub lambda: f64,
    /// Cosine-similarity threshold.
    pub alpha: f64,
}

impl LossWeights {
    pub fn new(lambda: f64, alpha: f64) -> Result<Self, DepthError> {
        if !(lambda.is_finite() && lambda >= 0.0) {
            return Err(DepthError::InvalidWeight("lambda"));
        }
        if !(-1.0..=1.0).contains(&alpha) {
            return Err(DepthError::InvalidWeight("alpha"));
        }
        Ok(Self { lambda, alpha })
    }
}

fn mean_abs_diff(a: &DepthMap, b: &DepthMap) -> Result<f64, DepthError> {
    a.check_same_dims(b)?;
    let sum: f64 = a
        .values()
        .iter()
        .zip(b.values())
        .map(|(x, y)| (x - y).abs())
        .sum();
    Ok(sum / a.values().len() as f64)
}

/// Mean absolute error between a prediction and ground truth.
///
/// This is the plain per-pixel MAE; use [`fit_affine`] first for a
/// scale/shift-aligned error.
pub fn labeled_loss(pred: &DepthMap, gt: &DepthMap) -> Result<f64, DepthError> {
    mean_abs_diff(pred, gt)
}

/// MAE against teacher pseudo labels.
pub fn pseudo_loss(pred: &DepthMap, pseudo: &DepthMap) -> Result<f64, DepthError> {
    mean_abs_diff(pred, pseudo)
}

/// Region-wise MAE of a CutMix prediction: pixels inside `mask` are compared
/// with `pseudo_a`, the rest with `pseudo_b`, normalized by the full grid size.
pub fn cutmix_loss(
    pred_mixed: &DepthMap,
    pseudo_a: &DepthMap,
    pseudo_b: &DepthMap,
    mask: &RegionMask,
) -> Result<f64, DepthError> {
    pred_mixed.check_same_dims(pseudo_a)?;
    pred_mixed.check_same_dims(pseudo_b)?;
    if mask.dims() != pred_mixed.dims() {
        let (w, h) = mask.dims();
        return Err(DepthError::DimensionMismatch(pred_mixed.width(), pred_mixed.height(), w, h));
    }
    let sum: f64 = pred_mixed
        .values()
        .iter()
        .zip(mask.cells())
        .enumerate()
        .map(|(i, (p, &in_a))| {
            let label = if in_a { pseudo_a.values()[i] } else { pseudo_b.values()[i] };
            (p - label).abs()
        })
        .sum();
    Ok(sum / pred_mixed.values().len() as f64)
}

fn non_negative(name: &'static str, v: f64) -> Result<f64, DepthError> {
    if v.is_finite() && v >= 0.0 {
        Ok(v)
    } else {
        Err(DepthError::NegativeComponent(name))
    }
}

pub fn unlabeled_loss(pseudo_component: f64, cutmix_component: f64) -> Result<f64, DepthError> {
    Ok(non_negative("pseudo", pseudo_component)? + non_negative("cutmix", cutmix_component)?)
}

pub fn cosine_similarity(a: &[f64], b: &[f64]) -> Option<f64> {
    let dot: f64 = a.iter().zip(b).map(|(x, y)| x * y).sum();
    let na = libm::sqrt(a.iter().map(|x| x * x).sum());
    let nb = libm::sqrt(b.iter().map(|x| x * x).sum());
    if na == 0.0 || nb == 0.0 {
        return None;
    }
    Some(dot / (na * nb))
}

/// `mean_i max(0, α − cos(f_i, f_i^pre))`.
pub fn align_loss(feats: &FeatureSet, pre_feats: &FeatureSet, alpha: f64) -> Result<f64, DepthError> {
    if feats.len() != pre_feats.len() || feats.dim() != pre_feats.dim() || feats.is_empty() {
        return Err(DepthError::ShapeMismatch);
    }
    let mut sum = 0.0;
    for (i, (f, p)) in feats.rows().zip(pre_feats.rows()).enumerate() {
        let cos = cosine_similarity(f, p).ok_or(DepthError::ZeroNorm(i))?;
        sum += (alpha - cos).max(0.0);
    }
    Ok(sum / feats.len() as f64)
}

pub fn total_loss(
    l_labeled: f64,
    l_unlabeled: f64,
    l_align: f64,
    weights: &LossWeights,
) -> Result<f64, DepthError> {
    Ok(non_negative("labeled", l_labeled)?
        + non_negative("unlabeled", l_unlabeled)?
        + weights.lambda * non_negative("align", l_align)?)
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct AffineFit {
    pub scale: f64,
    pub shift: f64,
}

impl AffineFit {
    pub const IDENTITY: AffineFit = AffineFit {
        scale: 1.0,
        shift: 0.0,
    };

    pub fn apply(&self, map: &DepthMap) -> Result<DepthMap, DepthError> {
        map.map(|v| self.scale * v + self.shift)
    }

    /// An inverted depth ordering; usually a sign of a disparity/depth mix-up.
    pub fn is_flipped(&self) -> bool {
        self.scale < 0.0
    }

    /// Sum of squared residuals of `scale·pred + shift − reference`.
    pub fn residual(&self, pred: &DepthMap, reference: &DepthMap) -> Result<f64, DepthError> {
        pred.check_same_dims(reference)?;
        Ok(pred
            .values()
            .iter()
            .zip(reference.values())
            .map(|(p, r)| {
                let e = self.scale * p + self.shift - r;
                e * e
            })
            .sum())
    }
}

/// Least-squares scale and shift mapping `pred` onto `reference`.
pub fn fit_affine(pred: &DepthMap, reference: &DepthMap) -> Result<AffineFit, DepthError> {
    pred.check_same_dims(reference)?;
    let p = pred.values();
    let r = reference.values();
    if p.iter().all(|&v| v == p[0]) {
        return Err(DepthError::ZeroVariance);
    }
    let n = p.len() as f64;
    let mean_p = p.iter().sum::<f64>() / n;
    let mean_r = r.iter().sum::<f64>() / n;
    let (mut cov, mut var) = (0.0, 0.0);
    for (a, b) in p.iter().zip(r) {
        let dp = a - mean_p;
        cov += dp * (b - mean_r);
        var += dp * dp;
    }
    if var.is_nan() || var <= 0.0 {
        return Err(DepthError::ZeroVariance);
    }
    let scale = cov / var;
    Ok(AffineFit {
        scale,
        shift: mean_r - scale * mean_p,
    })
}
