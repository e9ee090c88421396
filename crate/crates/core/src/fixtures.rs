//! Deterministic fixture corpus: writes the synthetic image / scribble /
//! ground-truth triples and their manifest to a directory so every test and
//! demo runs offline.

use std::fs;
use std::path::{Path, PathBuf};

use crate::demo::{make_synthetic, SyntheticShape, SyntheticSpec};
use crate::error::{Error, Result};
use crate::io::{save_saliency, save_scribble, DatasetManifest, ManifestEntry, ScribbleEncoding};
use crate::scalar::Real;

/// One generated fixture triple on disk.
#[derive(Clone, Debug)]
pub struct FixtureEntry {
    pub name: String,
    pub image: PathBuf,
    pub scribble: PathBuf,
    pub ground_truth: PathBuf,
}

/// A generated fixture directory: `images/`, `scribbles/`, `gt/`, and a
/// manifest listing every triple.
#[derive(Clone, Debug)]
pub struct FixtureSet {
    pub root: PathBuf,
    pub manifest: PathBuf,
    pub entries: Vec<FixtureEntry>,
}

const SHAPES: [SyntheticShape; 3] = [
    SyntheticShape::Square,
    SyntheticShape::Disk,
    SyntheticShape::TwoBlobs,
];
const SIZES: [usize; 2] = [32, 64];

fn ensure_dir(path: &Path) -> Result<()> {
    fs::create_dir_all(path).map_err(|e| Error::UnwritablePath {
        path: path.to_path_buf(),
        detail: e.to_string(),
    })
}

/// Write the fixture corpus. Regeneration with the same seed is
/// byte-identical, so callers may treat the directory as content-addressed.
pub fn generate(out_dir: impl AsRef<Path>, seed: u64) -> Result<FixtureSet> {
    let root = out_dir.as_ref().to_path_buf();
    ensure_dir(&root)?;
    for sub in ["images", "scribbles", "gt"] {
        ensure_dir(&root.join(sub))?;
    }

    let mut entries = Vec::new();
    let mut manifest_entries = Vec::new();
    for (index, (shape, size)) in SHAPES
        .iter()
        .flat_map(|s| SIZES.iter().map(move |z| (*s, *z)))
        .enumerate()
    {
        let mut spec = SyntheticSpec::new(shape, size, size);
        spec.seed = seed.wrapping_add(index as u64);
        let synthetic = make_synthetic::<f64>(&spec)?;
        let name = format!("{}_{}", shape.name(), size);
        let image = root.join("images").join(format!("{name}.png"));
        let scribble = root.join("scribbles").join(format!("{name}.png"));
        let gt = root.join("gt").join(format!("{name}.png"));

        save_rgb(&synthetic.image, &image)?;
        save_scribble(&synthetic.scribbles, &scribble, ScribbleEncoding::Raw)?;
        save_saliency(&synthetic.ground_truth, &gt)?;

        manifest_entries.push(ManifestEntry {
            image: PathBuf::from(format!("images/{name}.png")),
            scribble: PathBuf::from(format!("scribbles/{name}.png")),
            ground_truth: Some(PathBuf::from(format!("gt/{name}.png"))),
            prediction: None,
        });
        entries.push(FixtureEntry {
            name,
            image,
            scribble,
            ground_truth: gt,
        });
    }

    let manifest_path = root.join("manifest.txt");
    DatasetManifest {
        entries: manifest_entries,
    }
    .save(&manifest_path)?;

    Ok(FixtureSet {
        root,
        manifest: manifest_path,
        entries,
    })
}

fn save_rgb<T: Real>(img: &crate::field::RgbImage<T>, path: &Path) -> Result<()> {
    let (w, h) = img.dims();
    let mut bytes = Vec::with_capacity(w * h * 3);
    for y in 0..h {
        for x in 0..w {
            let (r, g, b) = img.rgb(x, y);
            for v in [r, g, b] {
                bytes.push((v.as_f64() * 255.0).round() as u8);
            }
        }
    }
    let buf = image::RgbImage::from_raw(w as u32, h as u32, bytes)
        .expect("buffer length matches dimensions");
    buf.save_with_format(path, image::ImageFormat::Png)
        .map_err(|e| Error::UnwritablePath {
            path: path.to_path_buf(),
            detail: e.to_string(),
        })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::io::{decode_scribble, load_saliency};
    use tempfile::tempdir;

    fn tree_bytes(root: &Path) -> Vec<(PathBuf, Vec<u8>)> {
        let mut files = Vec::new();
        let mut stack = vec![root.to_path_buf()];
        while let Some(dir) = stack.pop() {
            for entry in fs::read_dir(&dir).unwrap() {
                let p = entry.unwrap().path();
                if p.is_dir() {
                    stack.push(p);
                } else {
                    files.push((p.strip_prefix(root).unwrap().to_path_buf(), fs::read(&p).unwrap()));
                }
            }
        }
        files.sort();
        files
    }

    #[test]
    fn regeneration_is_byte_identical() {
        let d1 = tempdir().unwrap();
        let d2 = tempdir().unwrap();
        generate(d1.path(), 42).unwrap();
        generate(d2.path(), 42).unwrap();
        assert_eq!(tree_bytes(d1.path()), tree_bytes(d2.path()));
    }

    #[test]
    fn manifest_lists_every_fixture() {
        let dir = tempdir().unwrap();
        let set = generate(dir.path(), 7).unwrap();
        assert_eq!(set.entries.len(), 6);
        let manifest = DatasetManifest::load(&set.manifest).unwrap();
        assert_eq!(manifest.entries.len(), set.entries.len());
        for entry in &manifest.entries {
            assert!(entry.image.exists());
            assert!(entry.scribble.exists());
            assert!(entry.ground_truth.as_ref().unwrap().exists());
        }
    }

    #[test]
    fn square_fixture_foreground_count() {
        let dir = tempdir().unwrap();
        let set = generate(dir.path(), 0).unwrap();
        let square64 = set.entries.iter().find(|e| e.name == "square_64").unwrap();
        let gt: crate::field::SaliencyMap<f64> = load_saliency(&square64.ground_truth).unwrap();
        let fg = gt.field().as_slice().iter().filter(|&&v| v > 0.5).count();
        assert_eq!(fg, 576);
    }

    #[test]
    fn generated_scribbles_stay_sparse() {
        let dir = tempdir().unwrap();
        let set = generate(dir.path(), 3).unwrap();
        for e in &set.entries {
            let y = decode_scribble(&e.scribble, ScribbleEncoding::Raw).unwrap();
            let c = y.coverage();
            assert!((0.005..=0.05).contains(&c), "{}: {c}", e.name);
        }
    }
}
