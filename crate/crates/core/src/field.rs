//! Raster containers and the domain types built on them.
//!
//! All rasters are stored row-major with `(x, y)` addressing, `x` the column.
//! Scalar fields are generic over the [`Real`] precision; label rasters
//! (scribbles, binary masks) are `u8`. Domain types validate their invariants
//! at construction and are immutable afterwards.

use crate::error::{Error, Result};
use crate::scalar::Real;

/// Row-major scalar raster. The workhorse container behind every map type.
#[derive(Clone, Debug, PartialEq)]
pub struct ScalarField<T> {
    width: usize,
    height: usize,
    data: Vec<T>,
}

impl<T: Real> ScalarField<T> {
    pub fn new(width: usize, height: usize, fill: T) -> Result<Self> {
        if width == 0 || height == 0 {
            return Err(Error::EmptyField);
        }
        Ok(Self {
            width,
            height,
            data: vec![fill; width * height],
        })
    }

    pub fn zeros(width: usize, height: usize) -> Result<Self> {
        Self::new(width, height, T::zero())
    }

    pub fn from_vec(width: usize, height: usize, data: Vec<T>) -> Result<Self> {
        if width == 0 || height == 0 {
            return Err(Error::EmptyField);
        }
        if data.len() != width * height {
            return Err(Error::DimensionMismatch {
                what: "scalar field buffer",
                expected: (width, height),
                actual: (data.len(), 1),
            });
        }
        Ok(Self {
            width,
            height,
            data,
        })
    }

    pub fn from_fn(width: usize, height: usize, mut f: impl FnMut(usize, usize) -> T) -> Result<Self> {
        let mut data = Vec::with_capacity(width * height);
        for y in 0..height {
            for x in 0..width {
                data.push(f(x, y));
            }
        }
        Self::from_vec(width, height, data)
    }

    #[inline]
    pub fn width(&self) -> usize {
        self.width
    }

    #[inline]
    pub fn height(&self) -> usize {
        self.height
    }

    #[inline]
    pub fn dims(&self) -> (usize, usize) {
        (self.width, self.height)
    }

    #[inline]
    pub fn len(&self) -> usize {
        self.data.len()
    }

    #[inline]
    pub fn is_empty(&self) -> bool {
        self.data.is_empty()
    }

    #[inline]
    pub fn get(&self, x: usize, y: usize) -> T {
        debug_assert!(x < self.width && y < self.height);
        self.data[y * self.width + x]
    }

    #[inline]
    pub fn set(&mut self, x: usize, y: usize, v: T) {
        debug_assert!(x < self.width && y < self.height);
        self.data[y * self.width + x] = v;
    }

    #[inline]
    pub fn as_slice(&self) -> &[T] {
        &self.data
    }

    #[inline]
    pub fn as_mut_slice(&mut self) -> &mut [T] {
        &mut self.data
    }

    /// Apply `f` elementwise, producing a field with the same dimensions.
    pub fn map(&self, f: impl Fn(T) -> T) -> Self {
        Self {
            width: self.width,
            height: self.height,
            data: self.data.iter().map(|&v| f(v)).collect(),
        }
    }

    pub fn max_value(&self) -> T {
        self.data.iter().fold(T::neg_infinity(), |a, &b| a.max(b))
    }

    pub fn min_value(&self) -> T {
        self.data.iter().fold(T::infinity(), |a, &b| a.min(b))
    }

    pub fn mean(&self) -> T {
        let sum: T = self.data.iter().copied().sum();
        sum / T::of(self.data.len() as f64)
    }

    fn ensure_unit_range(&self, what: &'static str) -> Result<()> {
        for y in 0..self.height {
            for x in 0..self.width {
                let v = self.get(x, y);
                if !v.is_finite() || v < T::zero() || v > T::one() {
                    return Err(Error::OutOfRange {
                        what,
                        x,
                        y,
                        value: v.as_f64(),
                    });
                }
            }
        }
        Ok(())
    }
}

/// Row-major `u8` raster used for scribble codes and binary masks.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct LabelField {
    width: usize,
    height: usize,
    data: Vec<u8>,
}

impl LabelField {
    pub fn new(width: usize, height: usize, fill: u8) -> Result<Self> {
        if width == 0 || height == 0 {
            return Err(Error::EmptyField);
        }
        Ok(Self {
            width,
            height,
            data: vec![fill; width * height],
        })
    }

    pub fn from_vec(width: usize, height: usize, data: Vec<u8>) -> Result<Self> {
        if width == 0 || height == 0 {
            return Err(Error::EmptyField);
        }
        if data.len() != width * height {
            return Err(Error::DimensionMismatch {
                what: "label field buffer",
                expected: (width, height),
                actual: (data.len(), 1),
            });
        }
        Ok(Self {
            width,
            height,
            data,
        })
    }

    #[inline]
    pub fn width(&self) -> usize {
        self.width
    }

    #[inline]
    pub fn height(&self) -> usize {
        self.height
    }

    #[inline]
    pub fn dims(&self) -> (usize, usize) {
        (self.width, self.height)
    }

    #[inline]
    pub fn get(&self, x: usize, y: usize) -> u8 {
        debug_assert!(x < self.width && y < self.height);
        self.data[y * self.width + x]
    }

    #[inline]
    pub fn set(&mut self, x: usize, y: usize, v: u8) {
        debug_assert!(x < self.width && y < self.height);
        self.data[y * self.width + x] = v;
    }

    #[inline]
    pub fn as_slice(&self) -> &[u8] {
        &self.data
    }

    #[inline]
    pub fn as_mut_slice(&mut self) -> &mut [u8] {
        &mut self.data
    }
}

/// Check that two rasters share dimensions.
pub fn check_dims(what: &'static str, expected: (usize, usize), actual: (usize, usize)) -> Result<()> {
    if expected != actual {
        return Err(Error::DimensionMismatch {
            what,
            expected,
            actual,
        });
    }
    Ok(())
}

/// Grayscale intensity image, values in `[0, 1]`.
#[derive(Clone, Debug, PartialEq)]
pub struct GrayImage<T>(ScalarField<T>);

impl<T: Real> GrayImage<T> {
    pub fn new(field: ScalarField<T>) -> Result<Self> {
        field.ensure_unit_range("gray intensity")?;
        Ok(Self(field))
    }

    pub fn field(&self) -> &ScalarField<T> {
        &self.0
    }

    #[inline]
    pub fn get(&self, x: usize, y: usize) -> T {
        self.0.get(x, y)
    }

    pub fn dims(&self) -> (usize, usize) {
        self.0.dims()
    }

    pub fn width(&self) -> usize {
        self.0.width()
    }

    pub fn height(&self) -> usize {
        self.0.height()
    }
}

/// Three-channel color image, all channels in `[0, 1]` and equally sized.
#[derive(Clone, Debug, PartialEq)]
pub struct RgbImage<T> {
    r: ScalarField<T>,
    g: ScalarField<T>,
    b: ScalarField<T>,
}

impl<T: Real> RgbImage<T> {
    pub fn new(r: ScalarField<T>, g: ScalarField<T>, b: ScalarField<T>) -> Result<Self> {
        check_dims("rgb channels", r.dims(), g.dims())?;
        check_dims("rgb channels", r.dims(), b.dims())?;
        r.ensure_unit_range("red channel")?;
        g.ensure_unit_range("green channel")?;
        b.ensure_unit_range("blue channel")?;
        Ok(Self { r, g, b })
    }

    #[inline]
    pub fn rgb(&self, x: usize, y: usize) -> (T, T, T) {
        (self.r.get(x, y), self.g.get(x, y), self.b.get(x, y))
    }

    pub fn red(&self) -> &ScalarField<T> {
        &self.r
    }

    pub fn green(&self) -> &ScalarField<T> {
        &self.g
    }

    pub fn blue(&self) -> &ScalarField<T> {
        &self.b
    }

    pub fn dims(&self) -> (usize, usize) {
        self.r.dims()
    }

    pub fn width(&self) -> usize {
        self.r.width()
    }

    pub fn height(&self) -> usize {
        self.r.height()
    }

    /// Luminance intensity image: `0.299 R + 0.587 G + 0.114 B`.
    pub fn to_intensity(&self) -> GrayImage<T> {
        let (wr, wg, wb) = (T::of(0.299), T::of(0.587), T::of(0.114));
        let field = ScalarField::from_fn(self.width(), self.height(), |x, y| {
            let (r, g, b) = self.rgb(x, y);
            // Weights sum to 1, so the result stays in [0, 1] up to rounding.
            (wr * r + wg * g + wb * b).min(T::one()).max(T::zero())
        })
        .expect("source image is non-empty");
        GrayImage(field)
    }
}

/// Per-pixel foreground probability map, values in `[0, 1]`.
#[derive(Clone, Debug, PartialEq)]
pub struct SaliencyMap<T>(ScalarField<T>);

impl<T: Real> SaliencyMap<T> {
    pub fn new(field: ScalarField<T>) -> Result<Self> {
        field.ensure_unit_range("saliency value")?;
        Ok(Self(field))
    }

    pub fn field(&self) -> &ScalarField<T> {
        &self.0
    }

    pub fn into_field(self) -> ScalarField<T> {
        self.0
    }

    #[inline]
    pub fn get(&self, x: usize, y: usize) -> T {
        self.0.get(x, y)
    }

    pub fn dims(&self) -> (usize, usize) {
        self.0.dims()
    }

    pub fn width(&self) -> usize {
        self.0.width()
    }

    pub fn height(&self) -> usize {
        self.0.height()
    }
}

/// Per-pixel edge strength, values in `[0, 1]`.
#[derive(Clone, Debug, PartialEq)]
pub struct EdgeMap<T>(ScalarField<T>);

impl<T: Real> EdgeMap<T> {
    pub fn new(field: ScalarField<T>) -> Result<Self> {
        field.ensure_unit_range("edge strength")?;
        Ok(Self(field))
    }

    pub fn field(&self) -> &ScalarField<T> {
        &self.0
    }

    #[inline]
    pub fn get(&self, x: usize, y: usize) -> T {
        self.0.get(x, y)
    }

    pub fn dims(&self) -> (usize, usize) {
        self.0.dims()
    }

    pub fn width(&self) -> usize {
        self.0.width()
    }

    pub fn height(&self) -> usize {
        self.0.height()
    }
}

/// Binary `{0, 1}` mask. Gates and boundary maps are instances of this.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct BinaryMask(LabelField);

impl BinaryMask {
    pub fn new(field: LabelField) -> Result<Self> {
        for y in 0..field.height() {
            for x in 0..field.width() {
                let v = field.get(x, y);
                if v > 1 {
                    return Err(Error::BadLabel { x, y, value: v });
                }
            }
        }
        Ok(Self(field))
    }

    pub fn zeros(width: usize, height: usize) -> Result<Self> {
        Ok(Self(LabelField::new(width, height, 0)?))
    }

    pub fn field(&self) -> &LabelField {
        &self.0
    }

    #[inline]
    pub fn get(&self, x: usize, y: usize) -> u8 {
        self.0.get(x, y)
    }

    #[inline]
    pub fn is_set(&self, x: usize, y: usize) -> bool {
        self.0.get(x, y) != 0
    }

    pub fn dims(&self) -> (usize, usize) {
        self.0.dims()
    }

    pub fn width(&self) -> usize {
        self.0.width()
    }

    pub fn height(&self) -> usize {
        self.0.height()
    }

    pub fn count_ones(&self) -> usize {
        self.0.as_slice().iter().filter(|&&v| v != 0).count()
    }
}

/// Binary gate restricting where the structure-aware loss applies.
pub type GateMask = BinaryMask;

/// Scribble label codes.
pub const LABEL_UNKNOWN: u8 = 0;
pub const LABEL_FOREGROUND: u8 = 1;
pub const LABEL_BACKGROUND: u8 = 2;

/// Sparse three-valued annotation: 0 unknown, 1 foreground, 2 background.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct ScribbleMap(LabelField);

impl ScribbleMap {
    pub fn new(field: LabelField) -> Result<Self> {
        for y in 0..field.height() {
            for x in 0..field.width() {
                let v = field.get(x, y);
                if v > 2 {
                    return Err(Error::BadLabel { x, y, value: v });
                }
            }
        }
        Ok(Self(field))
    }

    pub fn unknown(width: usize, height: usize) -> Result<Self> {
        Ok(Self(LabelField::new(width, height, LABEL_UNKNOWN)?))
    }

    pub fn field(&self) -> &LabelField {
        &self.0
    }

    #[inline]
    pub fn get(&self, x: usize, y: usize) -> u8 {
        self.0.get(x, y)
    }

    pub fn dims(&self) -> (usize, usize) {
        self.0.dims()
    }

    pub fn width(&self) -> usize {
        self.0.width()
    }

    pub fn height(&self) -> usize {
        self.0.height()
    }

    /// Number of labeled (non-unknown) pixels.
    pub fn labeled_count(&self) -> usize {
        self.0.as_slice().iter().filter(|&&v| v != 0).count()
    }

    /// Fraction of labeled pixels, `|J_l| / (W * H)`.
    pub fn coverage(&self) -> f64 {
        self.labeled_count() as f64 / self.0.as_slice().len() as f64
    }
}
