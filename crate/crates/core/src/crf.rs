//! Fully-connected pairwise CRF with mean-field inference, used by scribble
//! boosting, plus an exact brute-force oracle for small instances.
//!
//! The pairwise energy is a Potts model over two labels with the usual
//! spatial + bilateral Gaussian kernel. Message passing is the exact O(N^2)
//! pairwise sum; instances above 256x256 pixels are rejected so the cost
//! stays explicit.

use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::field::{check_dims, RgbImage, SaliencyMap, ScalarField};
use crate::scalar::{clamp_prob, Real};

/// Pixel cap for [`mean_field_inference`] (256 * 256).
pub const MEAN_FIELD_PIXEL_CAP: usize = 256 * 256;

/// Pixel cap for [`exact_marginals`].
pub const EXACT_PIXEL_CAP: usize = 16;

/// Mean-field configuration: kernel weights, bandwidths, iteration count.
///
/// Bandwidths are in pixels for the spatial terms and in color units of a
/// `[0, 255]` scale for the bilateral range term.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct CrfParams<T> {
    pub iterations: usize,
    pub spatial_weight: T,
    pub spatial_sigma: T,
    pub bilateral_weight: T,
    pub bilateral_sigma_xy: T,
    pub bilateral_sigma_rgb: T,
}

impl<T: Real> Default for CrfParams<T> {
    fn default() -> Self {
        Self {
            iterations: 10,
            spatial_weight: T::of(3.0),
            spatial_sigma: T::of(3.0),
            bilateral_weight: T::of(4.0),
            bilateral_sigma_xy: T::of(60.0),
            bilateral_sigma_rgb: T::of(5.0),
        }
    }
}

impl<T: Real> CrfParams<T> {
    pub fn validate(&self) -> Result<()> {
        let ok = self.iterations >= 1
            && self.spatial_weight >= T::zero()
            && self.bilateral_weight >= T::zero()
            && self.spatial_sigma > T::zero()
            && self.bilateral_sigma_xy > T::zero()
            && self.bilateral_sigma_rgb > T::zero();
        if ok {
            Ok(())
        } else {
            Err(Error::InvalidConfig {
                detail: "CRF requires iterations >= 1, weights >= 0, sigmas > 0".into(),
            })
        }
    }
}

/// Per-pixel (foreground, background) energies.
#[derive(Clone, Debug, PartialEq)]
pub struct UnaryField<T> {
    pub foreground: ScalarField<T>,
    pub background: ScalarField<T>,
}

impl<T: Real> UnaryField<T> {
    pub fn new(foreground: ScalarField<T>, background: ScalarField<T>) -> Result<Self> {
        check_dims("unary energies", foreground.dims(), background.dims())?;
        Ok(Self {
            foreground,
            background,
        })
    }

    pub fn dims(&self) -> (usize, usize) {
        self.foreground.dims()
    }
}

/// Negative-log unaries from a saliency map: `fg = -ln s`, `bg = -ln (1-s)`,
/// with the probabilities clamped away from zero.
pub fn unary_from_saliency<T: Real>(s: &SaliencyMap<T>) -> UnaryField<T> {
    let fg = s.field().map(|v| -clamp_prob(v).ln());
    let bg = s.field().map(|v| -clamp_prob(T::one() - v).ln());
    UnaryField {
        foreground: fg,
        background: bg,
    }
}

struct PairwiseKernel<T> {
    xs: Vec<T>,
    ys: Vec<T>,
    colors: Vec<[T; 3]>,
    spatial_weight: T,
    bilateral_weight: T,
    inv_two_spatial: T,
    inv_two_xy: T,
    inv_two_rgb: T,
}

impl<T: Real> PairwiseKernel<T> {
    fn new(img: &RgbImage<T>, p: &CrfParams<T>) -> Self {
        let (w, h) = img.dims();
        let n = w * h;
        let mut xs = Vec::with_capacity(n);
        let mut ys = Vec::with_capacity(n);
        let mut colors = Vec::with_capacity(n);
        let scale = T::of(255.0);
        for y in 0..h {
            for x in 0..w {
                xs.push(T::of(x as f64));
                ys.push(T::of(y as f64));
                let (r, g, b) = img.rgb(x, y);
                colors.push([r * scale, g * scale, b * scale]);
            }
        }
        let two = T::of(2.0);
        Self {
            xs,
            ys,
            colors,
            spatial_weight: p.spatial_weight,
            bilateral_weight: p.bilateral_weight,
            inv_two_spatial: (two * p.spatial_sigma * p.spatial_sigma).recip(),
            inv_two_xy: (two * p.bilateral_sigma_xy * p.bilateral_sigma_xy).recip(),
            inv_two_rgb: (two * p.bilateral_sigma_rgb * p.bilateral_sigma_rgb).recip(),
        }
    }

    #[inline]
    fn eval(&self, i: usize, j: usize) -> T {
        let dx = self.xs[i] - self.xs[j];
        let dy = self.ys[i] - self.ys[j];
        let d2 = dx * dx + dy * dy;
        let ci = self.colors[i];
        let cj = self.colors[j];
        let mut c2 = T::zero();
        for k in 0..3 {
            let d = ci[k] - cj[k];
            c2 += d * d;
        }
        self.spatial_weight * (-d2 * self.inv_two_spatial).exp()
            + self.bilateral_weight * (-(d2 * self.inv_two_xy + c2 * self.inv_two_rgb)).exp()
    }
}

#[inline]
fn softmax2<T: Real>(a: T, b: T) -> (T, T) {
    // softmax of (a, b) = (e^a, e^b) normalized, computed stably
    let m = a.max(b);
    let ea = (a - m).exp();
    let eb = (b - m).exp();
    let z = ea + eb;
    (ea / z, eb / z)
}

fn mean_field_impl<T: Real>(
    img: &RgbImage<T>,
    unary: &UnaryField<T>,
    p: &CrfParams<T>,
) -> (Vec<T>, T) {
    let n = unary.foreground.len();
    let kernel = PairwiseKernel::new(img, p);
    let uf = unary.foreground.as_slice();
    let ub = unary.background.as_slice();

    let mut q_fg: Vec<T> = Vec::with_capacity(n);
    let mut q_bg: Vec<T> = Vec::with_capacity(n);
    for i in 0..n {
        let (f, b) = softmax2(-uf[i], -ub[i]);
        q_fg.push(f);
        q_bg.push(b);
    }

    let coupled =
        p.spatial_weight > T::zero() || p.bilateral_weight > T::zero();
    let mut last_delta = T::zero();
    for _ in 0..p.iterations {
        let (next, delta) = {
            let q_fg_ref = &q_fg;
            let q_bg_ref = &q_bg;
            let kernel_ref = &kernel;
            let updated: Vec<(T, T)> = (0..n)
                .into_par_iter()
                .map(|i| {
                    let mut msg_fg = T::zero();
                    let mut msg_bg = T::zero();
                    if coupled {
                        // Potts compatibility: a pixel's foreground energy rises
                        // with its neighbors' background mass and vice versa.
                        for j in 0..n {
                            if j == i {
                                continue;
                            }
                            let k = kernel_ref.eval(i, j);
                            msg_fg += k * q_bg_ref[j];
                            msg_bg += k * q_fg_ref[j];
                        }
                    }
                    softmax2(-uf[i] - msg_fg, -ub[i] - msg_bg)
                })
                .collect();
            let mut delta = T::zero();
            for (i, &(f, _)) in updated.iter().enumerate() {
                delta = delta.max((f - q_fg[i]).abs());
            }
            (updated, delta)
        };
        for (i, (f, b)) in next.into_iter().enumerate() {
            q_fg[i] = f;
            q_bg[i] = b;
        }
        last_delta = delta;
    }
    (q_fg, last_delta)
}

/// Mean-field inference of the foreground marginals.
///
/// `Q` starts at the softmax of the negated unaries; every iteration applies
/// the dense Potts message update and renormalizes. With both kernel weights
/// zero the output equals the initial softmax exactly.
pub fn mean_field_inference<T: Real>(
    img: &RgbImage<T>,
    unary: &UnaryField<T>,
    p: &CrfParams<T>,
) -> Result<SaliencyMap<T>> {
    p.validate()?;
    check_dims("image vs unary", img.dims(), unary.dims())?;
    let (w, h) = img.dims();
    if w * h > MEAN_FIELD_PIXEL_CAP {
        return Err(Error::CrfTooLarge {
            pixels: w * h,
            cap: MEAN_FIELD_PIXEL_CAP,
        });
    }
    let (q_fg, _) = mean_field_impl(img, unary, p);
    SaliencyMap::new(ScalarField::from_vec(w, h, q_fg)?)
}

/// Exact per-pixel foreground marginals by enumerating every labeling of the
/// Gibbs distribution with the same unary and Potts pairwise energies.
/// Limited to 16 pixels.
pub fn exact_marginals<T: Real>(
    img: &RgbImage<T>,
    unary: &UnaryField<T>,
    p: &CrfParams<T>,
) -> Result<SaliencyMap<T>> {
    p.validate()?;
    check_dims("image vs unary", img.dims(), unary.dims())?;
    let (w, h) = img.dims();
    let n = w * h;
    if n > EXACT_PIXEL_CAP {
        return Err(Error::CrfTooLarge {
            pixels: n,
            cap: EXACT_PIXEL_CAP,
        });
    }
    let kernel = PairwiseKernel::new(img, p);
    let uf = unary.foreground.as_slice();
    let ub = unary.background.as_slice();
    let mut pair_k = vec![T::zero(); n * n];
    for i in 0..n {
        for j in (i + 1)..n {
            let k = kernel.eval(i, j);
            pair_k[i * n + j] = k;
        }
    }

    let configs = 1usize << n;
    let mut energies = Vec::with_capacity(configs);
    let mut min_energy = T::infinity();
    for mask in 0..configs {
        let mut e = T::zero();
        for i in 0..n {
            e += if mask & (1 << i) != 0 { uf[i] } else { ub[i] };
        }
        for i in 0..n {
            let li = mask & (1 << i) != 0;
            for j in (i + 1)..n {
                let lj = mask & (1 << j) != 0;
                if li != lj {
                    e += pair_k[i * n + j];
                }
            }
        }
        if e < min_energy {
            min_energy = e;
        }
        energies.push(e);
    }

    let mut z = T::zero();
    let mut marginal = vec![T::zero(); n];
    for (mask, &e) in energies.iter().enumerate() {
        let weight = (min_energy - e).exp();
        z += weight;
        for (i, m) in marginal.iter_mut().enumerate() {
            if mask & (1 << i) != 0 {
                *m += weight;
            }
        }
    }
    let field = ScalarField::from_vec(w, h, marginal.into_iter().map(|m| m / z).collect())?;
    SaliencyMap::new(field)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::field::ScalarField;
    use rand::Rng;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn flat_image(w: usize, h: usize, v: f64) -> RgbImage<f64> {
        RgbImage::new(
            ScalarField::new(w, h, v).unwrap(),
            ScalarField::new(w, h, v).unwrap(),
            ScalarField::new(w, h, v).unwrap(),
        )
        .unwrap()
    }

    fn saliency_of(vals: Vec<f64>, w: usize, h: usize) -> SaliencyMap<f64> {
        SaliencyMap::new(ScalarField::from_vec(w, h, vals).unwrap()).unwrap()
    }

    #[test]
    fn unary_of_half_is_ln_two() {
        let s = saliency_of(vec![0.5], 1, 1);
        let u = unary_from_saliency(&s);
        assert!((u.foreground.get(0, 0) - std::f64::consts::LN_2).abs() < 1e-12);
        assert!((u.background.get(0, 0) - std::f64::consts::LN_2).abs() < 1e-12);
    }

    #[test]
    fn unary_of_one_hits_clamp() {
        let s = saliency_of(vec![1.0], 1, 1);
        let u = unary_from_saliency(&s);
        assert!(u.foreground.get(0, 0) < 2e-7);
        assert!((u.background.get(0, 0) - (-(1e-7f64).ln())).abs() < 1e-3);
    }

    #[test]
    fn unary_softmax_round_trips_saliency() {
        for i in 1..20 {
            let v = i as f64 / 20.0;
            let s = saliency_of(vec![v], 1, 1);
            let u = unary_from_saliency(&s);
            let (qf, _) = softmax2(-u.foreground.get(0, 0), -u.background.get(0, 0));
            assert!((qf - v).abs() < 1e-6, "v={v}, qf={qf}");
        }
    }

    #[test]
    fn zero_coupling_returns_unary_softmax() {
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let (w, h) = (6, 5);
        let s = saliency_of((0..w * h).map(|_| rng.random_range(0.05..0.95)).collect(), w, h);
        let img = flat_image(w, h, 0.5);
        let u = unary_from_saliency(&s);
        let mut p = CrfParams::<f64>::default();
        p.spatial_weight = 0.0;
        p.bilateral_weight = 0.0;
        let out = mean_field_inference(&img, &u, &p).unwrap();
        for (a, b) in out.field().as_slice().iter().zip(s.field().as_slice()) {
            assert!((a - b).abs() < 1e-9);
        }
    }

    #[test]
    fn two_pixel_mirror_symmetry() {
        let img = flat_image(2, 1, 0.3);
        let u = UnaryField::new(
            ScalarField::from_vec(2, 1, vec![0.4, 1.7]).unwrap(),
            ScalarField::from_vec(2, 1, vec![1.7, 0.4]).unwrap(),
        )
        .unwrap();
        let out = mean_field_inference(&img, &u, &CrfParams::default()).unwrap();
        let (a, b) = (out.get(0, 0), out.get(1, 0));
        assert!((a - (1.0 - b)).abs() < 1e-12);
    }

    #[test]
    fn label_swap_complements_marginals() {
        let mut rng = ChaCha8Rng::seed_from_u64(2);
        let (w, h) = (4, 4);
        let img = flat_image(w, h, 0.6);
        let uf = ScalarField::from_fn(w, h, |_, _| rng.random_range(0.0..3.0)).unwrap();
        let ub = ScalarField::from_fn(w, h, |_, _| rng.random_range(0.0..3.0)).unwrap();
        let u = UnaryField::new(uf.clone(), ub.clone()).unwrap();
        let swapped = UnaryField::new(ub, uf).unwrap();
        let p = CrfParams::default();
        let a = mean_field_inference(&img, &u, &p).unwrap();
        let b = mean_field_inference(&img, &swapped, &p).unwrap();
        for (x, y) in a.field().as_slice().iter().zip(b.field().as_slice()) {
            assert!((x - (1.0 - y)).abs() < 1e-12);
        }
    }

    #[test]
    fn horizontal_flip_equivariance() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let (w, h) = (5, 3);
        let img = RgbImage::new(
            ScalarField::from_fn(w, h, |_, _| rng.random_range(0.0..1.0)).unwrap(),
            ScalarField::from_fn(w, h, |_, _| rng.random_range(0.0..1.0)).unwrap(),
            ScalarField::from_fn(w, h, |_, _| rng.random_range(0.0..1.0)).unwrap(),
        )
        .unwrap();
        let uf = ScalarField::from_fn(w, h, |_, _| rng.random_range(-1.0..3.0)).unwrap();
        let ub = ScalarField::from_fn(w, h, |_, _| rng.random_range(-1.0..3.0)).unwrap();
        let flip =
            |f: &ScalarField<f64>| ScalarField::from_fn(w, h, |x, y| f.get(w - 1 - x, y)).unwrap();
        let img_f = RgbImage::new(flip(img.red()), flip(img.green()), flip(img.blue())).unwrap();
        let p = CrfParams::default();
        let out = mean_field_inference(&img, &UnaryField::new(uf.clone(), ub.clone()).unwrap(), &p)
            .unwrap();
        let out_f =
            mean_field_inference(&img_f, &UnaryField::new(flip(&uf), flip(&ub)).unwrap(), &p)
                .unwrap();
        for y in 0..h {
            for x in 0..w {
                assert!((out.get(x, y) - out_f.get(w - 1 - x, y)).abs() < 1e-12);
            }
        }
    }

    #[test]
    fn mean_field_converges_on_random_inputs() {
        let mut rng = ChaCha8Rng::seed_from_u64(4);
        for _ in 0..5 {
            let (w, h) = (8, 8);
            let img = RgbImage::new(
                ScalarField::from_fn(w, h, |_, _| rng.random_range(0.0..1.0)).unwrap(),
                ScalarField::from_fn(w, h, |_, _| rng.random_range(0.0..1.0)).unwrap(),
                ScalarField::from_fn(w, h, |_, _| rng.random_range(0.0..1.0)).unwrap(),
            )
            .unwrap();
            let u = UnaryField::new(
                ScalarField::from_fn(w, h, |_, _| rng.random_range(0.0..4.0)).unwrap(),
                ScalarField::from_fn(w, h, |_, _| rng.random_range(0.0..4.0)).unwrap(),
            )
            .unwrap();
            let mut p = CrfParams::<f64>::default();
            p.iterations = 20;
            let (_, last_delta) = mean_field_impl(&img, &u, &p);
            assert!(last_delta < 1e-4, "last delta {last_delta}");
        }
    }

    #[test]
    fn exact_single_pixel_is_softmax() {
        let img = flat_image(1, 1, 0.5);
        let u = UnaryField::new(
            ScalarField::from_vec(1, 1, vec![0.3]).unwrap(),
            ScalarField::from_vec(1, 1, vec![1.1]).unwrap(),
        )
        .unwrap();
        let m = exact_marginals(&img, &u, &CrfParams::default()).unwrap();
        let (want, _) = softmax2(-0.3, -1.1);
        assert!((m.get(0, 0) - want).abs() < 1e-12);
    }

    #[test]
    fn exact_two_pixels_zero_coupling_is_independent() {
        let img = flat_image(2, 1, 0.2);
        let u = UnaryField::new(
            ScalarField::from_vec(2, 1, vec![0.3, 2.0]).unwrap(),
            ScalarField::from_vec(2, 1, vec![1.1, 0.1]).unwrap(),
        )
        .unwrap();
        let mut p = CrfParams::<f64>::default();
        p.spatial_weight = 0.0;
        p.bilateral_weight = 0.0;
        let m = exact_marginals(&img, &u, &p).unwrap();
        let (w0, _) = softmax2(-0.3, -1.1);
        let (w1, _) = softmax2(-2.0, -0.1);
        assert!((m.get(0, 0) - w0).abs() < 1e-12);
        assert!((m.get(1, 0) - w1).abs() < 1e-12);
    }

    #[test]
    fn exact_two_pixels_flat_unaries_match_hand_enumeration() {
        // Joint probabilities are proportional to {1, e^-J, e^-J, 1}; the
        // marginals are exactly one half each.
        let img = flat_image(2, 1, 0.7);
        let u = UnaryField::new(
            ScalarField::zeros(2, 1).unwrap(),
            ScalarField::zeros(2, 1).unwrap(),
        )
        .unwrap();
        let m = exact_marginals(&img, &u, &CrfParams::default()).unwrap();
        assert!((m.get(0, 0) - 0.5).abs() < 1e-12);
        assert!((m.get(1, 0) - 0.5).abs() < 1e-12);
    }

    #[test]
    fn ambiguous_pixel_follows_confident_neighbors() {
        // 3x3 same-color image, eight confident foreground pixels and an
        // ambiguous center: attractive coupling must pull the center up, and
        // mean-field must be close to the exact marginals.
        let img = flat_image(3, 3, 0.5);
        let vals: Vec<f64> = (0..9).map(|i| if i == 4 { 0.5 } else { 0.95 }).collect();
        let s = saliency_of(vals, 3, 3);
        let u = unary_from_saliency(&s);
        let p = CrfParams::default();
        let mf = mean_field_inference(&img, &u, &p).unwrap();
        let exact = exact_marginals(&img, &u, &p).unwrap();
        assert!(mf.get(1, 1) > 0.5);
        for (a, b) in mf.field().as_slice().iter().zip(exact.field().as_slice()) {
            assert!((a - b).abs() <= 0.1, "mf {a} vs exact {b}");
        }
    }

    #[test]
    fn size_caps_are_enforced() {
        let img = flat_image(5, 4, 0.5);
        let u = UnaryField::new(
            ScalarField::zeros(5, 4).unwrap(),
            ScalarField::zeros(5, 4).unwrap(),
        )
        .unwrap();
        assert!(matches!(
            exact_marginals(&img, &u, &CrfParams::default()),
            Err(Error::CrfTooLarge { pixels: 20, cap: 16 })
        ));

        let big = flat_image(257, 256, 0.5);
        let ub = UnaryField::new(
            ScalarField::zeros(257, 256).unwrap(),
            ScalarField::zeros(257, 256).unwrap(),
        )
        .unwrap();
        assert!(matches!(
            mean_field_inference(&big, &ub, &CrfParams::default()),
            Err(Error::CrfTooLarge { .. })
        ));
    }
}
