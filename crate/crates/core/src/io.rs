//! File formats: 8-bit PNG for all raster data, plus the plain-text dataset
//! manifest. Scalar values live at the file boundary as `byte / 255`.

use std::fs;
use std::io::Write as _;
use std::path::{Path, PathBuf};

use crate::error::{Error, Result};
use crate::field::{BinaryMask, GrayImage, LabelField, RgbImage, SaliencyMap, ScalarField, ScribbleMap};
use crate::scalar::Real;

/// On-disk scribble encodings.
///
/// `Raw` stores the label codes directly as bytes {0, 1, 2}. `Visible` uses
/// {0 unknown, 255 foreground, 128 background} so the annotation can be
/// inspected in an image viewer.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum ScribbleEncoding {
    Raw,
    Visible,
}

impl ScribbleEncoding {
    fn name(self) -> &'static str {
        match self {
            ScribbleEncoding::Raw => "raw",
            ScribbleEncoding::Visible => "visible",
        }
    }

    fn decode_byte(self, b: u8) -> Option<u8> {
        match (self, b) {
            (ScribbleEncoding::Raw, 0..=2) => Some(b),
            (ScribbleEncoding::Visible, 0) => Some(0),
            (ScribbleEncoding::Visible, 255) => Some(1),
            (ScribbleEncoding::Visible, 128) => Some(2),
            _ => None,
        }
    }

    fn encode_label(self, code: u8) -> u8 {
        match (self, code) {
            (ScribbleEncoding::Raw, _) => code,
            (ScribbleEncoding::Visible, 1) => 255,
            (ScribbleEncoding::Visible, 2) => 128,
            (ScribbleEncoding::Visible, _) => 0,
        }
    }
}

fn open_image(path: &Path) -> Result<image::DynamicImage> {
    if !path.exists() {
        return Err(Error::MissingFile {
            path: path.to_path_buf(),
        });
    }
    image::open(path).map_err(|e| match e {
        image::ImageError::Unsupported(u) => Error::UnsupportedImage {
            path: path.to_path_buf(),
            detail: u.to_string(),
        },
        other => Error::CorruptImage {
            path: path.to_path_buf(),
            source: other,
        },
    })
}

fn byte_to_unit<T: Real>(b: u8) -> T {
    T::of(b as f64 / 255.0)
}

/// Load an 8-bit RGB or grayscale PNG as a color image.
///
/// Grayscale input is replicated across the three channels; alpha channels
/// are dropped. Higher bit depths are rejected.
pub fn load_rgb<T: Real>(path: impl AsRef<Path>) -> Result<RgbImage<T>> {
    let path = path.as_ref();
    let dynimg = open_image(path)?;
    let (raw, w, h): (Vec<[u8; 3]>, u32, u32) = match dynimg {
        image::DynamicImage::ImageLuma8(img) => {
            let (w, h) = img.dimensions();
            (img.pixels().map(|p| [p.0[0]; 3]).collect(), w, h)
        }
        image::DynamicImage::ImageLumaA8(img) => {
            let (w, h) = img.dimensions();
            (img.pixels().map(|p| [p.0[0]; 3]).collect(), w, h)
        }
        image::DynamicImage::ImageRgb8(img) => {
            let (w, h) = img.dimensions();
            (img.pixels().map(|p| [p.0[0], p.0[1], p.0[2]]).collect(), w, h)
        }
        image::DynamicImage::ImageRgba8(img) => {
            let (w, h) = img.dimensions();
            (img.pixels().map(|p| [p.0[0], p.0[1], p.0[2]]).collect(), w, h)
        }
        other => {
            return Err(Error::UnsupportedImage {
                path: path.to_path_buf(),
                detail: format!("bit depth of {:?} is not 8-bit", other.color()),
            })
        }
    };
    let (w, h) = (w as usize, h as usize);
    let channel = |c: usize| {
        ScalarField::from_vec(w, h, raw.iter().map(|px| byte_to_unit(px[c])).collect())
    };
    RgbImage::new(channel(0)?, channel(1)?, channel(2)?)
}

fn load_luma8(path: &Path) -> Result<image::GrayImage> {
    let path_buf = path.to_path_buf();
    match open_image(path)? {
        image::DynamicImage::ImageLuma8(img) => Ok(img),
        image::DynamicImage::ImageLumaA8(img) => {
            Ok(image::DynamicImage::ImageLumaA8(img).to_luma8())
        }
        other => Err(Error::UnsupportedImage {
            path: path_buf,
            detail: format!("expected 8-bit grayscale, found {:?}", other.color()),
        }),
    }
}

/// Load an 8-bit grayscale PNG as a saliency map (`byte / 255`).
pub fn load_saliency<T: Real>(path: impl AsRef<Path>) -> Result<SaliencyMap<T>> {
    let path = path.as_ref();
    let img = load_luma8(path)?;
    let (w, h) = (img.width() as usize, img.height() as usize);
    let field = ScalarField::from_vec(w, h, img.as_raw().iter().map(|&b| byte_to_unit(b)).collect())?;
    SaliencyMap::new(field)
}

/// Load an 8-bit grayscale PNG as an intensity image.
pub fn load_gray<T: Real>(path: impl AsRef<Path>) -> Result<GrayImage<T>> {
    let path = path.as_ref();
    let img = load_luma8(path)?;
    let (w, h) = (img.width() as usize, img.height() as usize);
    let field = ScalarField::from_vec(w, h, img.as_raw().iter().map(|&b| byte_to_unit(b)).collect())?;
    GrayImage::new(field)
}

/// Decode an 8-bit grayscale PNG into a scribble map.
///
/// Any byte outside the encoding's value set is an error naming the pixel.
pub fn decode_scribble(path: impl AsRef<Path>, encoding: ScribbleEncoding) -> Result<ScribbleMap> {
    let path = path.as_ref();
    let img = load_luma8(path)?;
    let (w, h) = (img.width() as usize, img.height() as usize);
    let mut data = Vec::with_capacity(w * h);
    for (i, &b) in img.as_raw().iter().enumerate() {
        match encoding.decode_byte(b) {
            Some(code) => data.push(code),
            None => {
                return Err(Error::ScribbleByte {
                    x: i % w,
                    y: i / w,
                    value: b,
                    encoding: encoding.name(),
                })
            }
        }
    }
    ScribbleMap::new(LabelField::from_vec(w, h, data)?)
}

fn write_luma8(path: &Path, w: usize, h: usize, bytes: Vec<u8>) -> Result<()> {
    let img = image::GrayImage::from_raw(w as u32, h as u32, bytes)
        .expect("buffer length matches dimensions");
    img.save_with_format(path, image::ImageFormat::Png)
        .map_err(|e| Error::UnwritablePath {
            path: path.to_path_buf(),
            detail: e.to_string(),
        })
}

/// Write a saliency map as 8-bit grayscale PNG, `byte = round(value * 255)`.
pub fn save_saliency<T: Real>(s: &SaliencyMap<T>, path: impl AsRef<Path>) -> Result<()> {
    let bytes = s
        .field()
        .as_slice()
        .iter()
        .map(|v| (v.as_f64() * 255.0).round() as u8)
        .collect();
    write_luma8(path.as_ref(), s.width(), s.height(), bytes)
}

/// Write a scribble map with the given on-disk encoding.
pub fn save_scribble(
    y: &ScribbleMap,
    path: impl AsRef<Path>,
    encoding: ScribbleEncoding,
) -> Result<()> {
    let bytes = y
        .field()
        .as_slice()
        .iter()
        .map(|&c| encoding.encode_label(c))
        .collect();
    write_luma8(path.as_ref(), y.width(), y.height(), bytes)
}

/// Write a binary mask as a black/white PNG (1 -> 255).
pub fn save_mask(mask: &BinaryMask, path: impl AsRef<Path>) -> Result<()> {
    let bytes = mask
        .field()
        .as_slice()
        .iter()
        .map(|&v| if v != 0 { 255 } else { 0 })
        .collect();
    write_luma8(path.as_ref(), mask.width(), mask.height(), bytes)
}

/// Write any `[0, 1]` scalar field (edge maps) as grayscale PNG.
pub fn save_unit_field<T: Real>(f: &ScalarField<T>, path: impl AsRef<Path>) -> Result<()> {
    let bytes = f
        .as_slice()
        .iter()
        .map(|v| (v.as_f64().clamp(0.0, 1.0) * 255.0).round() as u8)
        .collect();
    write_luma8(path.as_ref(), f.width(), f.height(), bytes)
}

/// One dataset entry: image and scribble always present, dense ground truth
/// and prediction optional.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct ManifestEntry {
    pub image: PathBuf,
    pub scribble: PathBuf,
    pub ground_truth: Option<PathBuf>,
    pub prediction: Option<PathBuf>,
}

/// Ordered list of dataset entries, parsed from a UTF-8 text file with one
/// `image,scribble,gt,prediction` line per entry and `-` for absent fields.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct DatasetManifest {
    pub entries: Vec<ManifestEntry>,
}

impl DatasetManifest {
    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let text = fs::read_to_string(path).map_err(|_| Error::MissingFile {
            path: path.to_path_buf(),
        })?;
        let base = path.parent().unwrap_or_else(|| Path::new(""));
        let mut entries = Vec::new();
        for (idx, line) in text.lines().enumerate() {
            let line = line.trim();
            if line.is_empty() {
                continue;
            }
            let fields: Vec<&str> = line.split(',').map(str::trim).collect();
            if fields.len() != 4 {
                return Err(Error::ManifestEntry {
                    path: path.to_path_buf(),
                    line: idx + 1,
                    detail: format!("expected 4 comma-separated fields, found {}", fields.len()),
                });
            }
            let required = |s: &str, what: &str| -> Result<PathBuf> {
                if s.is_empty() || s == "-" {
                    Err(Error::ManifestEntry {
                        path: path.to_path_buf(),
                        line: idx + 1,
                        detail: format!("{what} path must be present"),
                    })
                } else {
                    Ok(base.join(s))
                }
            };
            let optional = |s: &str| -> Option<PathBuf> {
                (s != "-" && !s.is_empty()).then(|| base.join(s))
            };
            entries.push(ManifestEntry {
                image: required(fields[0], "image")?,
                scribble: required(fields[1], "scribble")?,
                ground_truth: optional(fields[2]),
                prediction: optional(fields[3]),
            });
        }
        if entries.is_empty() {
            return Err(Error::EmptyManifest {
                path: path.to_path_buf(),
            });
        }
        Ok(Self { entries })
    }

    /// Write the manifest with paths exactly as given.
    pub fn save(&self, path: impl AsRef<Path>) -> Result<()> {
        let path = path.as_ref();
        let mut out = String::new();
        for e in &self.entries {
            let opt = |p: &Option<PathBuf>| {
                p.as_ref()
                    .map(|p| p.display().to_string())
                    .unwrap_or_else(|| "-".to_string())
            };
            out.push_str(&format!(
                "{},{},{},{}\n",
                e.image.display(),
                e.scribble.display(),
                opt(&e.ground_truth),
                opt(&e.prediction)
            ));
        }
        let mut f = fs::File::create(path).map_err(|e| Error::UnwritablePath {
            path: path.to_path_buf(),
            detail: e.to_string(),
        })?;
        f.write_all(out.as_bytes()).map_err(|e| Error::UnwritablePath {
            path: path.to_path_buf(),
            detail: e.to_string(),
        })
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;
    use tempfile::tempdir;

    fn write_png(path: &Path, w: u32, h: u32, bytes: Vec<u8>) {
        image::GrayImage::from_raw(w, h, bytes)
            .unwrap()
            .save_with_format(path, image::ImageFormat::Png)
            .unwrap();
    }

    #[test]
    fn load_rgb_scales_bytes() {
        let dir = tempdir().unwrap();
        let p = dir.path().join("g.png");
        write_png(&p, 2, 2, vec![0, 51, 102, 255]);
        let img: RgbImage<f64> = load_rgb(&p).unwrap();
        assert_eq!(img.rgb(0, 0).0, 0.0);
        assert!((img.rgb(1, 0).0 - 0.2).abs() < 1e-12);
        assert!((img.rgb(0, 1).1 - 0.4).abs() < 1e-12);
        assert_eq!(img.rgb(1, 1).2, 1.0);
    }

    #[test]
    fn load_rgb_missing_file() {
        assert!(matches!(
            load_rgb::<f64>("/nonexistent/nope.png"),
            Err(Error::MissingFile { .. })
        ));
    }

    #[test]
    fn load_rgb_rejects_16_bit() {
        let dir = tempdir().unwrap();
        let p = dir.path().join("deep.png");
        let img = image::ImageBuffer::<image::Luma<u16>, Vec<u16>>::from_raw(2, 2, vec![0, 1, 2, 3])
            .unwrap();
        image::DynamicImage::ImageLuma16(img)
            .save_with_format(&p, image::ImageFormat::Png)
            .unwrap();
        assert!(matches!(
            load_rgb::<f64>(&p),
            Err(Error::UnsupportedImage { .. })
        ));
    }

    #[test]
    fn load_rgb_rejects_corrupt_stream() {
        let dir = tempdir().unwrap();
        let p = dir.path().join("bad.png");
        fs::write(&p, b"\x89PNG\r\n\x1a\nnot a real png").unwrap();
        assert!(matches!(
            load_rgb::<f64>(&p),
            Err(Error::CorruptImage { .. })
        ));
    }

    #[test]
    fn decode_scribble_raw_and_visible() {
        let dir = tempdir().unwrap();
        let p = dir.path().join("s.png");
        write_png(&p, 3, 1, vec![0, 1, 2]);
        let y = decode_scribble(&p, ScribbleEncoding::Raw).unwrap();
        assert_eq!(y.field().as_slice(), &[0, 1, 2]);

        let p2 = dir.path().join("v.png");
        write_png(&p2, 3, 1, vec![0, 128, 255]);
        let y2 = decode_scribble(&p2, ScribbleEncoding::Visible).unwrap();
        assert_eq!(y2.field().as_slice(), &[0, 2, 1]);
    }

    #[test]
    fn decode_scribble_names_offending_pixel() {
        let dir = tempdir().unwrap();
        let p = dir.path().join("s.png");
        write_png(&p, 2, 2, vec![0, 1, 2, 3]);
        match decode_scribble(&p, ScribbleEncoding::Raw) {
            Err(Error::ScribbleByte { x, y, value, .. }) => {
                assert_eq!((x, y, value), (1, 1, 3));
            }
            other => panic!("expected ScribbleByte, got {other:?}"),
        }
    }

    #[test]
    fn save_saliency_rounds_half_up() {
        let dir = tempdir().unwrap();
        let p = dir.path().join("s.png");
        let s = SaliencyMap::new(ScalarField::from_vec(3, 1, vec![0.0f64, 0.5, 1.0]).unwrap())
            .unwrap();
        save_saliency(&s, &p).unwrap();
        let img = image::open(&p).unwrap().to_luma8();
        assert_eq!(img.as_raw(), &vec![0u8, 128, 255]);
    }

    #[test]
    fn manifest_round_trips_and_resolves_relative_paths() {
        let dir = tempdir().unwrap();
        let p = dir.path().join("m.txt");
        fs::write(&p, "a.png,b.png,-,c.png\nimg/x.png,scr/y.png,gt/z.png,-\n").unwrap();
        let m = DatasetManifest::load(&p).unwrap();
        assert_eq!(m.entries.len(), 2);
        assert_eq!(m.entries[0].image, dir.path().join("a.png"));
        assert!(m.entries[0].ground_truth.is_none());
        assert_eq!(m.entries[0].prediction, Some(dir.path().join("c.png")));
        assert_eq!(m.entries[1].ground_truth, Some(dir.path().join("gt/z.png")));
    }

    #[test]
    fn manifest_rejects_empty_and_malformed() {
        let dir = tempdir().unwrap();
        let p = dir.path().join("m.txt");
        fs::write(&p, "\n\n").unwrap();
        assert!(matches!(
            DatasetManifest::load(&p),
            Err(Error::EmptyManifest { .. })
        ));
        fs::write(&p, "only,three,fields\n").unwrap();
        assert!(matches!(
            DatasetManifest::load(&p),
            Err(Error::ManifestEntry { line: 1, .. })
        ));
    }

    proptest! {
        #[test]
        fn scribble_encodings_round_trip(codes in proptest::collection::vec(0u8..3, 12)) {
            let dir = tempdir().unwrap();
            let y = ScribbleMap::new(LabelField::from_vec(4, 3, codes).unwrap()).unwrap();
            for enc in [ScribbleEncoding::Raw, ScribbleEncoding::Visible] {
                let p = dir.path().join(format!("{}.png", enc.name()));
                save_scribble(&y, &p, enc).unwrap();
                let back = decode_scribble(&p, enc).unwrap();
                prop_assert_eq!(&back, &y);
                // byte-identical re-encode
                let p2 = dir.path().join(format!("{}_again.png", enc.name()));
                save_scribble(&back, &p2, enc).unwrap();
                prop_assert_eq!(fs::read(&p).unwrap(), fs::read(&p2).unwrap());
            }
        }

        #[test]
        fn saliency_round_trip_within_half_step(vals in proptest::collection::vec(0.0f64..=1.0, 9)) {
            let dir = tempdir().unwrap();
            let p = dir.path().join("s.png");
            let s = SaliencyMap::new(ScalarField::from_vec(3, 3, vals).unwrap()).unwrap();
            save_saliency(&s, &p).unwrap();
            let back: SaliencyMap<f64> = load_saliency(&p).unwrap();
            for (a, b) in s.field().as_slice().iter().zip(back.field().as_slice()) {
                prop_assert!((a - b).abs() <= 1.0 / 255.0 + 1e-12);
            }
        }
    }
}
