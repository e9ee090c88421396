//! Image-processing kernels shared by the losses, boosting, and metrics:
//! forward-difference gradients, Sobel edges, square-kernel morphology,
//! Otsu thresholding, and boundary extraction.

use crate::error::{Error, Result};
use crate::field::{BinaryMask, EdgeMap, GrayImage, LabelField, ScalarField};
use crate::scalar::Real;

/// Odd-sized square structuring element.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct SquareKernel {
    size: usize,
}

impl SquareKernel {
    pub fn new(size: usize) -> Result<Self> {
        if size == 0 || size.is_multiple_of(2) {
            return Err(Error::BadKernel { size });
        }
        Ok(Self { size })
    }

    #[inline]
    pub fn size(&self) -> usize {
        self.size
    }

    #[inline]
    pub fn radius(&self) -> usize {
        self.size / 2
    }
}

/// Forward-difference derivatives of a scalar field.
///
/// `dx(x, y) = f(x+1, y) - f(x, y)` with the last column zero, and likewise
/// `dy` along rows.
#[derive(Clone, Debug, PartialEq)]
pub struct GradientPair<T> {
    pub dx: ScalarField<T>,
    pub dy: ScalarField<T>,
}

pub fn gradients<T: Real>(f: &ScalarField<T>) -> GradientPair<T> {
    let (w, h) = f.dims();
    let mut dx = ScalarField::zeros(w, h).expect("non-empty field");
    let mut dy = ScalarField::zeros(w, h).expect("non-empty field");
    for y in 0..h {
        for x in 0..w {
            if x + 1 < w {
                dx.set(x, y, f.get(x + 1, y) - f.get(x, y));
            }
            if y + 1 < h {
                dy.set(x, y, f.get(x, y + 1) - f.get(x, y));
            }
        }
    }
    GradientPair { dx, dy }
}

/// Adjoint of [`gradients`]: scatters per-edge values back to the pixels that
/// produced them. Used by the analytic gradients of the structure-aware loss.
pub fn gradients_adjoint<T: Real>(rx: &ScalarField<T>, ry: &ScalarField<T>) -> ScalarField<T> {
    let (w, h) = rx.dims();
    debug_assert_eq!(rx.dims(), ry.dims());
    let mut out = ScalarField::zeros(w, h).expect("non-empty field");
    for y in 0..h {
        for x in 0..w {
            if x + 1 < w {
                let v = rx.get(x, y);
                out.set(x + 1, y, out.get(x + 1, y) + v);
                out.set(x, y, out.get(x, y) - v);
            }
            if y + 1 < h {
                let v = ry.get(x, y);
                out.set(x, y + 1, out.get(x, y + 1) + v);
                out.set(x, y, out.get(x, y) - v);
            }
        }
    }
    out
}

#[inline]
fn clamp_coord(v: isize, max: usize) -> usize {
    v.clamp(0, max as isize - 1) as usize
}

/// 3x3 Sobel edge strength, normalized to `[0, 1]` by the global maximum.
///
/// Images smaller than 3x3 produce an all-zero map.
pub fn sobel_edges<T: Real>(img: &GrayImage<T>) -> EdgeMap<T> {
    let (w, h) = img.dims();
    let zeros = || EdgeMap::new(ScalarField::zeros(w, h).expect("non-empty")).expect("zeros in range");
    if w < 3 || h < 3 {
        return zeros();
    }
    let mut mag = ScalarField::zeros(w, h).expect("non-empty");
    let two = T::of(2.0);
    let mut max = T::zero();
    for y in 0..h {
        for x in 0..w {
            // Replicate padding at the borders.
            let s = |dx: isize, dy: isize| {
                img.get(
                    clamp_coord(x as isize + dx, w),
                    clamp_coord(y as isize + dy, h),
                )
            };
            let gx = s(1, -1) - s(-1, -1) + two * (s(1, 0) - s(-1, 0)) + s(1, 1) - s(-1, 1);
            let gy = s(-1, 1) - s(-1, -1) + two * (s(0, 1) - s(0, -1)) + s(1, 1) - s(1, -1);
            let m = (gx * gx + gy * gy).sqrt();
            if m > max {
                max = m;
            }
            mag.set(x, y, m);
        }
    }
    if max <= T::zero() {
        return zeros();
    }
    EdgeMap::new(mag.map(|v| v / max)).expect("normalized magnitude in range")
}

/// Running 1-D max over a window of radius `r`, applied along x then y.
/// A square max-filter is separable, so this equals the full 2-D window max.
fn max_filter_1d<T: Real>(src: &ScalarField<T>, r: usize, horizontal: bool) -> ScalarField<T> {
    let (w, h) = src.dims();
    let mut out = src.clone();
    for y in 0..h {
        for x in 0..w {
            let mut m = src.get(x, y);
            for d in 1..=r {
                if horizontal {
                    if x >= d {
                        m = m.max(src.get(x - d, y));
                    }
                    if x + d < w {
                        m = m.max(src.get(x + d, y));
                    }
                } else {
                    if y >= d {
                        m = m.max(src.get(x, y - d));
                    }
                    if y + d < h {
                        m = m.max(src.get(x, y + d));
                    }
                }
            }
            out.set(x, y, m);
        }
    }
    out
}

/// Grayscale dilation: max-filter over the `k x k` window, clipped at borders.
pub fn dilate_gray<T: Real>(f: &ScalarField<T>, k: SquareKernel) -> ScalarField<T> {
    let r = k.radius();
    if r == 0 {
        return f.clone();
    }
    let pass = max_filter_1d(f, r, true);
    max_filter_1d(&pass, r, false)
}

fn binary_filter_1d(src: &LabelField, r: usize, horizontal: bool, any: bool) -> LabelField {
    let (w, h) = src.dims();
    let mut out = src.clone();
    for y in 0..h {
        for x in 0..w {
            let mut acc = src.get(x, y) != 0;
            for d in 1..=r {
                let probe = |xx: usize, yy: usize| src.get(xx, yy) != 0;
                let (lo, hi) = if horizontal {
                    (
                        (x >= d).then(|| probe(x - d, y)),
                        (x + d < w).then(|| probe(x + d, y)),
                    )
                } else {
                    (
                        (y >= d).then(|| probe(x, y - d)),
                        (y + d < h).then(|| probe(x, y + d)),
                    )
                };
                for v in [lo, hi].into_iter().flatten() {
                    if any {
                        acc |= v;
                    } else {
                        acc &= v;
                    }
                }
            }
            out.set(x, y, acc as u8);
        }
    }
    out
}

/// Binary dilation: 1 iff any pixel of the clipped `k x k` window is 1.
pub fn dilate(mask: &BinaryMask, k: SquareKernel) -> BinaryMask {
    let r = k.radius();
    if r == 0 {
        return mask.clone();
    }
    let pass = binary_filter_1d(mask.field(), r, true, true);
    let full = binary_filter_1d(&pass, r, false, true);
    BinaryMask::new(full).expect("dilation preserves {0,1}")
}

/// Binary erosion: 1 iff every pixel of the clipped `k x k` window is 1.
/// Pixels outside the image do not count against the window.
pub fn erode(mask: &BinaryMask, k: SquareKernel) -> BinaryMask {
    let r = k.radius();
    if r == 0 {
        return mask.clone();
    }
    let pass = binary_filter_1d(mask.field(), r, true, false);
    let full = binary_filter_1d(&pass, r, false, false);
    BinaryMask::new(full).expect("erosion preserves {0,1}")
}

/// Otsu's threshold over a 256-bin histogram of a `[0, 1]` field.
///
/// Returns the lowest value assigned to the upper class, so binarizing with
/// `value >= threshold` reproduces the Otsu split. A constant field returns
/// the degenerate 0.5.
pub fn otsu_threshold<T: Real>(f: &ScalarField<T>) -> T {
    let mut hist = [0u64; 256];
    for &v in f.as_slice() {
        let bin = ((v.as_f64() * 256.0).floor() as isize).clamp(0, 255) as usize;
        hist[bin] += 1;
    }
    let total = f.len() as f64;
    let mut sum_all = 0.0;
    for (i, &c) in hist.iter().enumerate() {
        sum_all += i as f64 * c as f64;
    }
    let mut w0 = 0.0;
    let mut sum0 = 0.0;
    let mut best = 0.0;
    let mut best_k: Option<usize> = None;
    for (k, &c) in hist.iter().enumerate().take(255) {
        w0 += c as f64;
        sum0 += k as f64 * c as f64;
        let w1 = total - w0;
        if w0 == 0.0 || w1 == 0.0 {
            continue;
        }
        let mu0 = sum0 / w0;
        let mu1 = (sum_all - sum0) / w1;
        let between = w0 * w1 * (mu0 - mu1) * (mu0 - mu1);
        if between > best {
            best = between;
            best_k = Some(k);
        }
    }
    match best_k {
        Some(k) => T::of((k + 1) as f64 / 256.0),
        None => T::of(0.5),
    }
}

/// Binarize a scalar field with `value >= threshold`.
pub fn binarize<T: Real>(f: &ScalarField<T>, threshold: T) -> BinaryMask {
    let (w, h) = f.dims();
    let mut out = LabelField::new(w, h, 0).expect("non-empty field");
    for y in 0..h {
        for x in 0..w {
            if f.get(x, y) >= threshold {
                out.set(x, y, 1);
            }
        }
    }
    BinaryMask::new(out).expect("binarization yields {0,1}")
}

/// Morphological boundary of a binary mask: `mask XOR erode3(mask)`, where
/// the size-3 erosion treats pixels outside the image as background, so a
/// region touching the border contributes a boundary run along it.
pub fn boundary(mask: &BinaryMask) -> BinaryMask {
    let (w, h) = mask.dims();
    let mut out = LabelField::new(w, h, 0).expect("non-empty field");
    for y in 0..h {
        for x in 0..w {
            if mask.get(x, y) == 0 {
                continue;
            }
            let mut eroded = true;
            'win: for dy in -1isize..=1 {
                for dx in -1isize..=1 {
                    let xx = x as isize + dx;
                    let yy = y as isize + dy;
                    let inside = xx >= 0 && yy >= 0 && xx < w as isize && yy < h as isize;
                    if !inside || mask.get(xx as usize, yy as usize) == 0 {
                        eroded = false;
                        break 'win;
                    }
                }
            }
            if !eroded {
                out.set(x, y, 1);
            }
        }
    }
    BinaryMask::new(out).expect("boundary yields {0,1}")
}
