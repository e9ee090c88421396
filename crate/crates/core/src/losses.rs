//! Training losses: partial cross-entropy on scribbles, edge cross-entropy,
//! the gated structure-aware loss with its gate construction, and the
//! combined objective. Every loss returns its value together with the
//! analytic gradient with respect to the prediction.

use crate::error::Result;
use crate::field::{check_dims, EdgeMap, GateMask, GrayImage, SaliencyMap, ScalarField, ScribbleMap};
use crate::field::{LABEL_BACKGROUND, LABEL_FOREGROUND};
use crate::imgproc::{binarize, dilate_gray, gradients, gradients_adjoint, otsu_threshold, SquareKernel};
use crate::scalar::{clamp_prob, Real};

/// Stabilizer inside the square root of the structure penalty.
pub const PSI_EPSILON: f64 = 1e-6;

/// Loss weights of the combined objective.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct LossWeights<T> {
    /// Edge-sensitivity of the structure-aware weight.
    pub alpha: T,
    /// Weight of the structure term on the coarse prediction.
    pub beta1: T,
    /// Weight of the structure term on the refined prediction.
    pub beta2: T,
    /// Weight of the edge cross-entropy term.
    pub beta3: T,
}

impl<T: Real> Default for LossWeights<T> {
    fn default() -> Self {
        Self {
            alpha: T::of(10.0),
            beta1: T::of(0.3),
            beta2: T::of(0.3),
            beta3: T::one(),
        }
    }
}

/// A loss value and its gradient with respect to the prediction field.
#[derive(Clone, Debug)]
pub struct LossResult<T> {
    pub value: T,
    pub gradient: ScalarField<T>,
}

/// Cross-entropy summed over the labeled pixel set only.
///
/// Foreground pixels contribute `-ln s`, background pixels `-ln (1 - s)`,
/// both clamped away from zero. Unlabeled pixels contribute nothing and have
/// exactly zero gradient.
pub fn partial_cross_entropy<T: Real>(
    s: &SaliencyMap<T>,
    y: &ScribbleMap,
) -> Result<LossResult<T>> {
    check_dims("saliency vs scribble", s.dims(), y.dims())?;
    let (w, h) = s.dims();
    let mut grad = ScalarField::zeros(w, h)?;
    let mut value = T::zero();
    let eps = T::of(1e-7);
    let hi = T::one() - eps;
    for yy in 0..h {
        for xx in 0..w {
            let v = s.get(xx, yy);
            match y.get(xx, yy) {
                LABEL_FOREGROUND => {
                    let p = clamp_prob(v);
                    value -= p.ln();
                    if v > eps && v < hi {
                        grad.set(xx, yy, -p.recip());
                    }
                }
                LABEL_BACKGROUND => {
                    let p = clamp_prob(T::one() - v);
                    value -= p.ln();
                    if v > eps && v < hi {
                        grad.set(xx, yy, p.recip());
                    }
                }
                _ => {}
            }
        }
    }
    Ok(LossResult { value, gradient: grad })
}

/// Dense cross-entropy between a predicted edge map and a reference map.
/// Soft references are allowed.
pub fn edge_cross_entropy<T: Real>(e: &EdgeMap<T>, reference: &EdgeMap<T>) -> Result<LossResult<T>> {
    check_dims("edge prediction vs reference", e.dims(), reference.dims())?;
    let (w, h) = e.dims();
    let mut grad = ScalarField::zeros(w, h)?;
    let mut value = T::zero();
    let eps = T::of(1e-7);
    let hi = T::one() - eps;
    for yy in 0..h {
        for xx in 0..w {
            let target = reference.get(xx, yy);
            let v = e.get(xx, yy);
            let p = clamp_prob(v);
            value -= target * p.ln() + (T::one() - target) * (T::one() - p).ln();
            if v > eps && v < hi {
                grad.set(xx, yy, (p - target) / (p * (T::one() - p)));
            }
        }
    }
    Ok(LossResult { value, gradient: grad })
}

/// Gate construction: grayscale-dilate the prediction with a square kernel,
/// then binarize at the Otsu threshold of the dilated map.
pub fn compute_gate<T: Real>(s: &SaliencyMap<T>, k: SquareKernel) -> GateMask {
    let dilated = dilate_gray(s.field(), k);
    let t = otsu_threshold(&dilated);
    binarize(&dilated, t)
}

/// Everything the structure-aware loss computes, including the per-edge
/// weights and penalty values needed by the optimizer's preconditioner.
pub(crate) struct StructureTerms<T> {
    pub value: T,
    /// Gradient with respect to the saliency values.
    pub grad: ScalarField<T>,
    pub weight_x: ScalarField<T>,
    pub weight_y: ScalarField<T>,
    pub psi_x: ScalarField<T>,
    pub psi_y: ScalarField<T>,
}

pub(crate) fn structure_terms<T: Real>(
    s: &ScalarField<T>,
    intensity: &GrayImage<T>,
    gate: &GateMask,
    alpha: T,
) -> StructureTerms<T> {
    let (w, h) = s.dims();
    // Gated edge map: the gate masks the intensity derivatives, so only
    // edges inside the gated region suspend the smoothing. Masking the
    // derivatives rather than the image keeps the loss invariant under a
    // constant intensity shift.
    let gi = gradients(intensity.field());
    let masked = |d: &ScalarField<T>| {
        ScalarField::from_fn(w, h, |x, y| {
            if gate.is_set(x, y) {
                (-alpha * d.get(x, y).abs()).exp()
            } else {
                T::one()
            }
        })
        .expect("non-empty field")
    };
    let weight_x = masked(&gi.dx);
    let weight_y = masked(&gi.dy);

    let ds = gradients(s);
    let stab = T::of(PSI_EPSILON);
    let mut value = T::zero();
    let mut psi_x = ScalarField::zeros(w, h).expect("non-empty");
    let mut psi_y = ScalarField::zeros(w, h).expect("non-empty");
    let mut rx = ScalarField::zeros(w, h).expect("non-empty");
    let mut ry = ScalarField::zeros(w, h).expect("non-empty");
    for y in 0..h {
        for x in 0..w {
            let wx = weight_x.get(x, y);
            let tx = wx * ds.dx.get(x, y);
            let px = (tx * tx + stab).sqrt();
            value += px;
            psi_x.set(x, y, px);
            rx.set(x, y, wx * tx / px);

            let wy = weight_y.get(x, y);
            let ty = wy * ds.dy.get(x, y);
            let py = (ty * ty + stab).sqrt();
            value += py;
            psi_y.set(x, y, py);
            ry.set(x, y, wy * ty / py);
        }
    }
    let grad = gradients_adjoint(&rx, &ry);
    StructureTerms {
        value,
        grad,
        weight_x,
        weight_y,
        psi_x,
        psi_y,
    }
}

/// Gated structure-aware loss: an edge-weighted L1 penalty on the saliency
/// gradients, smoothed through `Psi(t) = sqrt(t^2 + 1e-6)`. The edge-aware
/// weight `exp(-alpha |dI|)` is gated, so image edges suspend the smoothing
/// only inside the gated region while the background is smoothed everywhere.
pub fn gated_structure_aware<T: Real>(
    s: &SaliencyMap<T>,
    intensity: &GrayImage<T>,
    gate: &GateMask,
    alpha: T,
) -> Result<LossResult<T>> {
    check_dims("saliency vs intensity", s.dims(), intensity.dims())?;
    check_dims("saliency vs gate", s.dims(), gate.dims())?;
    let terms = structure_terms(s.field(), intensity, gate, alpha);
    Ok(LossResult {
        value: terms.value,
        gradient: terms.grad,
    })
}

/// Value and per-prediction gradients of the combined objective.
#[derive(Clone, Debug)]
pub struct TotalLoss<T> {
    pub value: T,
    pub partial_ce_coarse: T,
    pub partial_ce_refined: T,
    pub structure_coarse: T,
    pub structure_refined: T,
    pub edge: T,
    pub grad_coarse: ScalarField<T>,
    pub grad_refined: ScalarField<T>,
    pub grad_edge: ScalarField<T>,
}

/// Combined objective over a coarse prediction, a refined prediction, and an
/// edge prediction. Each structure term uses a gate computed from its own
/// prediction.
#[allow(clippy::too_many_arguments)]
pub fn total_loss<T: Real>(
    s_coarse: &SaliencyMap<T>,
    s_refined: &SaliencyMap<T>,
    e: &EdgeMap<T>,
    y: &ScribbleMap,
    intensity: &GrayImage<T>,
    reference_edges: &EdgeMap<T>,
    weights: &LossWeights<T>,
    gate_kernel: SquareKernel,
) -> Result<TotalLoss<T>> {
    check_dims("coarse vs refined", s_coarse.dims(), s_refined.dims())?;
    check_dims("saliency vs edge", s_coarse.dims(), e.dims())?;

    let ce_c = partial_cross_entropy(s_coarse, y)?;
    let ce_r = partial_cross_entropy(s_refined, y)?;
    let gate_c = compute_gate(s_coarse, gate_kernel);
    let gate_r = compute_gate(s_refined, gate_kernel);
    let st_c = gated_structure_aware(s_coarse, intensity, &gate_c, weights.alpha)?;
    let st_r = gated_structure_aware(s_refined, intensity, &gate_r, weights.alpha)?;
    let ed = edge_cross_entropy(e, reference_edges)?;

    let value = ce_c.value
        + ce_r.value
        + weights.beta1 * st_c.value
        + weights.beta2 * st_r.value
        + weights.beta3 * ed.value;

    let combine = |a: &ScalarField<T>, b: &ScalarField<T>, beta: T| {
        let (w, h) = a.dims();
        ScalarField::from_fn(w, h, |x, yy| a.get(x, yy) + beta * b.get(x, yy))
            .expect("non-empty field")
    };

    Ok(TotalLoss {
        value,
        partial_ce_coarse: ce_c.value,
        partial_ce_refined: ce_r.value,
        structure_coarse: st_c.value,
        structure_refined: st_r.value,
        edge: ed.value,
        grad_coarse: combine(&ce_c.gradient, &st_c.gradient, weights.beta1),
        grad_refined: combine(&ce_r.gradient, &st_r.gradient, weights.beta2),
        grad_edge: ed.gradient.map(|v| weights.beta3 * v),
    })
}
