//! Scribble boosting: refine a prediction with the dense CRF, then densify
//! the annotation wherever the raw and refined predictions agree.

use crate::crf::{mean_field_inference, unary_from_saliency, CrfParams};
use crate::error::{Error, Result};
use crate::field::{check_dims, LabelField, RgbImage, SaliencyMap, ScribbleMap};
use crate::field::{LABEL_BACKGROUND, LABEL_FOREGROUND, LABEL_UNKNOWN};
use crate::scalar::Real;

/// Boosting configuration.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct BoostConfig<T> {
    /// Threshold at which both maps are binarized (`value >= threshold`).
    pub binarize_threshold: T,
    /// Keep the hand-drawn labels authoritative in the boosted annotation.
    pub preserve_original: bool,
    pub crf: CrfParams<T>,
}

impl<T: Real> Default for BoostConfig<T> {
    fn default() -> Self {
        Self {
            binarize_threshold: T::of(0.5),
            preserve_original: true,
            crf: CrfParams::default(),
        }
    }
}

impl<T: Real> BoostConfig<T> {
    pub fn validate(&self) -> Result<()> {
        if self.binarize_threshold <= T::zero() || self.binarize_threshold >= T::one() {
            return Err(Error::InvalidConfig {
                detail: "binarize threshold must lie strictly inside (0, 1)".into(),
            });
        }
        self.crf.validate()
    }
}

/// Agreement rule: label 1 where both binarized maps are foreground, 2 where
/// both are background, unknown where they disagree. With
/// `preserve_original` on, pixels labeled in `y` keep their label.
pub fn agreement_scribbles<T: Real>(
    s_init: &SaliencyMap<T>,
    s_crf: &SaliencyMap<T>,
    y: &ScribbleMap,
    cfg: &BoostConfig<T>,
) -> Result<ScribbleMap> {
    cfg.validate()?;
    check_dims("initial vs refined saliency", s_init.dims(), s_crf.dims())?;
    check_dims("saliency vs scribble", s_init.dims(), y.dims())?;
    let (w, h) = s_init.dims();
    let mut out = LabelField::new(w, h, LABEL_UNKNOWN)?;
    for yy in 0..h {
        for xx in 0..w {
            let original = y.get(xx, yy);
            if cfg.preserve_original && original != LABEL_UNKNOWN {
                out.set(xx, yy, original);
                continue;
            }
            let a = s_init.get(xx, yy) >= cfg.binarize_threshold;
            let b = s_crf.get(xx, yy) >= cfg.binarize_threshold;
            let label = match (a, b) {
                (true, true) => LABEL_FOREGROUND,
                (false, false) => LABEL_BACKGROUND,
                _ => LABEL_UNKNOWN,
            };
            out.set(xx, yy, label);
        }
    }
    ScribbleMap::new(out)
}

/// One boosting round: CRF-refine the prediction and emit the agreement
/// scribbles together with the refined map.
pub fn boost<T: Real>(
    img: &RgbImage<T>,
    s_init: &SaliencyMap<T>,
    y: &ScribbleMap,
    cfg: &BoostConfig<T>,
) -> Result<(ScribbleMap, SaliencyMap<T>)> {
    cfg.validate()?;
    check_dims("image vs saliency", img.dims(), s_init.dims())?;
    let unary = unary_from_saliency(s_init);
    let s_crf = mean_field_inference(img, &unary, &cfg.crf)?;
    let boosted = agreement_scribbles(s_init, &s_crf, y, cfg)?;
    Ok((boosted, s_crf))
}
