//! Saliency evaluation: MAE, F-measure (adaptive and per-threshold curve),
//! E-measure, the boundary structure measure, and batch evaluation over a
//! dataset manifest with line-JSON reporting.

use std::io::Write;
use std::path::Path;

use rayon::prelude::*;
use serde::Serialize;

use crate::error::{Error, Result};
use crate::field::{check_dims, BinaryMask, SaliencyMap};
use crate::imgproc::{binarize, boundary, dilate, SquareKernel};
use crate::io::{load_saliency, DatasetManifest, ManifestEntry};
use crate::scalar::Real;

/// Number of thresholds in the F/E curves: `1/255 ... 255/255`.
pub const CURVE_STEPS: usize = 255;

/// Per-pair metric report.
#[derive(Clone, Debug)]
pub struct MetricReport<T> {
    pub mae: T,
    pub mean_f: T,
    pub mean_e: T,
    pub b_mu: T,
    pub f_curve: Vec<T>,
    pub e_curve: Vec<T>,
}

/// Mean absolute error between a prediction and a (possibly soft) ground truth.
pub fn mae<T: Real>(s: &SaliencyMap<T>, gt: &SaliencyMap<T>) -> Result<T> {
    check_dims("prediction vs ground truth", s.dims(), gt.dims())?;
    let mut sum = T::zero();
    for (a, b) in s.field().as_slice().iter().zip(gt.field().as_slice()) {
        sum += (*a - *b).abs();
    }
    Ok(sum / T::of(s.field().len() as f64))
}

fn confusion<T: Real>(s: &SaliencyMap<T>, gt: &BinaryMask, threshold: T) -> (usize, usize, usize) {
    let (w, h) = s.dims();
    let (mut tp, mut fp, mut fun) = (0usize, 0usize, 0usize);
    for y in 0..h {
        for x in 0..w {
            let pred = s.get(x, y) >= threshold;
            let truth = gt.is_set(x, y);
            match (pred, truth) {
                (true, true) => tp += 1,
                (true, false) => fp += 1,
                (false, true) => fun += 1,
                _ => {}
            }
        }
    }
    (tp, fp, fun)
}

/// F-measure of the prediction binarized at `threshold`, with precision
/// weighted by `beta2` (the conventional 0.3). Any 0/0 collapses to 0.
pub fn f_measure<T: Real>(
    s: &SaliencyMap<T>,
    gt: &BinaryMask,
    threshold: T,
    beta2: T,
) -> Result<T> {
    check_dims("prediction vs ground truth", s.dims(), gt.dims())?;
    let (tp, fp, fun) = confusion(s, gt, threshold);
    if tp == 0 {
        return Ok(T::zero());
    }
    let tp = T::of(tp as f64);
    let precision = tp / (tp + T::of(fp as f64));
    let recall = tp / (tp + T::of(fun as f64));
    Ok((T::one() + beta2) * precision * recall / (beta2 * precision + recall))
}

/// Adaptive binarization threshold: `min(2 * mean(s), 1)`.
pub fn adaptive_threshold<T: Real>(s: &SaliencyMap<T>) -> T {
    (T::of(2.0) * s.field().mean()).min(T::one())
}

/// F-measure at the adaptive threshold.
pub fn mean_f_measure<T: Real>(s: &SaliencyMap<T>, gt: &BinaryMask, beta2: T) -> Result<T> {
    f_measure(s, gt, adaptive_threshold(s), beta2)
}

/// F-measure at each threshold `1/255 ... 255/255`.
pub fn f_curve<T: Real>(s: &SaliencyMap<T>, gt: &BinaryMask, beta2: T) -> Result<Vec<T>> {
    (1..=CURVE_STEPS)
        .map(|i| f_measure(s, gt, T::of(i as f64 / 255.0), beta2))
        .collect()
}

/// Enhanced-alignment measure of the prediction binarized at `threshold`.
///
/// For a degenerate all-one or all-zero ground truth the measure falls back
/// to the fraction of pixels where the binarized prediction matches.
pub fn e_measure<T: Real>(s: &SaliencyMap<T>, gt: &BinaryMask, threshold: T) -> Result<T> {
    check_dims("prediction vs ground truth", s.dims(), gt.dims())?;
    let (w, h) = s.dims();
    let n = T::of((w * h) as f64);
    let gt_ones = gt.count_ones();
    let bin = binarize(s.field(), threshold);
    if gt_ones == 0 || gt_ones == w * h {
        let mut agree = 0usize;
        for y in 0..h {
            for x in 0..w {
                if bin.is_set(x, y) == gt.is_set(x, y) {
                    agree += 1;
                }
            }
        }
        return Ok(T::of(agree as f64) / n);
    }
    let mean_bin = T::of(bin.count_ones() as f64) / n;
    let mean_gt = T::of(gt_ones as f64) / n;
    let mut sum = T::zero();
    let quarter = T::of(0.25);
    for y in 0..h {
        for x in 0..w {
            let phi_s = T::of(bin.get(x, y) as f64) - mean_bin;
            let phi_g = T::of(gt.get(x, y) as f64) - mean_gt;
            let den = phi_s * phi_s + phi_g * phi_g;
            let xi = if den > T::zero() {
                T::of(2.0) * phi_s * phi_g / den
            } else {
                T::zero()
            };
            let e = (xi + T::one()) * (xi + T::one()) * quarter;
            sum += e;
        }
    }
    Ok(sum / n)
}

/// E-measure at the adaptive threshold.
pub fn mean_e_measure<T: Real>(s: &SaliencyMap<T>, gt: &BinaryMask) -> Result<T> {
    e_measure(s, gt, adaptive_threshold(s))
}

/// E-measure at each threshold `1/255 ... 255/255`.
pub fn e_curve<T: Real>(s: &SaliencyMap<T>, gt: &BinaryMask) -> Result<Vec<T>> {
    (1..=CURVE_STEPS)
        .map(|i| e_measure(s, gt, T::of(i as f64 / 255.0)))
        .collect()
}

/// Boundary structure measure: one minus the Dice overlap of the dilated
/// boundary maps of prediction (binarized at 0.5) and ground truth. Zero is
/// a perfect prediction. Both boundary maps empty scores 0; exactly one
/// empty scores 1.
pub fn b_mu<T: Real>(s: &SaliencyMap<T>, gt: &BinaryMask) -> Result<T> {
    check_dims("prediction vs ground truth", s.dims(), gt.dims())?;
    let k3 = SquareKernel::new(3).expect("3 is odd");
    let half = T::of(0.5);
    let g_s = dilate(&boundary(&binarize(s.field(), half)), k3);
    let g_y = dilate(&boundary(gt), k3);
    let ns = g_s.count_ones();
    let ny = g_y.count_ones();
    if ns == 0 && ny == 0 {
        return Ok(T::zero());
    }
    if ns == 0 || ny == 0 {
        return Ok(T::one());
    }
    let (w, h) = s.dims();
    let mut inter = 0usize;
    for y in 0..h {
        for x in 0..w {
            if g_s.is_set(x, y) && g_y.is_set(x, y) {
                inter += 1;
            }
        }
    }
    Ok(T::one() - T::of(2.0 * inter as f64) / T::of((ns + ny) as f64))
}

/// Metric options for batch evaluation.
#[derive(Clone, Copy, Debug)]
pub struct EvalOptions<T> {
    /// `beta^2` of the F-measure.
    pub beta2: T,
    /// Fixed binarization threshold; `None` selects the adaptive rule.
    pub threshold: Option<T>,
}

impl<T: Real> Default for EvalOptions<T> {
    fn default() -> Self {
        Self {
            beta2: T::of(0.3),
            threshold: None,
        }
    }
}

/// Full report for one prediction / ground-truth pair. The soft ground truth
/// drives MAE; it is binarized at 0.5 for the remaining metrics.
pub fn report<T: Real>(
    s: &SaliencyMap<T>,
    gt: &SaliencyMap<T>,
    opts: &EvalOptions<T>,
) -> Result<MetricReport<T>> {
    let gt_bin = binarize(gt.field(), T::of(0.5));
    let threshold = opts.threshold.unwrap_or_else(|| adaptive_threshold(s));
    Ok(MetricReport {
        mae: mae(s, gt)?,
        mean_f: f_measure(s, &gt_bin, threshold, opts.beta2)?,
        mean_e: e_measure(s, &gt_bin, threshold)?,
        b_mu: b_mu(s, &gt_bin)?,
        f_curve: f_curve(s, &gt_bin, opts.beta2)?,
        e_curve: e_curve(s, &gt_bin)?,
    })
}

/// Result of evaluating one manifest entry.
#[derive(Debug)]
pub struct EntryOutcome<T> {
    pub entry: ManifestEntry,
    pub report: Result<MetricReport<T>>,
}

/// Dataset means over the successfully evaluated entries.
#[derive(Clone, Copy, Debug, Default)]
pub struct EvalMeans<T> {
    pub mae: T,
    pub mean_f: T,
    pub mean_e: T,
    pub b_mu: T,
}

#[derive(Debug)]
pub struct EvalOutcome<T> {
    pub entries: Vec<EntryOutcome<T>>,
    /// `None` when every entry failed.
    pub means: Option<EvalMeans<T>>,
}

impl<T> EvalOutcome<T> {
    pub fn failed(&self) -> usize {
        self.entries.iter().filter(|e| e.report.is_err()).count()
    }

    pub fn evaluated(&self) -> usize {
        self.entries.len() - self.failed()
    }
}

fn evaluate_entry<T: Real>(entry: &ManifestEntry, opts: &EvalOptions<T>) -> Result<MetricReport<T>> {
    let pred_path = entry.prediction.as_ref().ok_or_else(|| Error::InvalidConfig {
        detail: format!("entry {} has no prediction path", entry.image.display()),
    })?;
    let gt_path = entry.ground_truth.as_ref().ok_or_else(|| Error::InvalidConfig {
        detail: format!("entry {} has no ground-truth path", entry.image.display()),
    })?;
    let pred: SaliencyMap<T> = load_saliency(pred_path)?;
    let gt: SaliencyMap<T> = load_saliency(gt_path)?;
    report(&pred, &gt, opts)
}

/// Evaluate every manifest entry; failures are recorded per entry and
/// excluded from the dataset means. Entries run in parallel, results keep
/// manifest order.
pub fn evaluate<T: Real>(
    manifest: &DatasetManifest,
    opts: &EvalOptions<T>,
) -> Result<EvalOutcome<T>> {
    if manifest.entries.is_empty() {
        return Err(Error::InvalidConfig {
            detail: "manifest has no entries".into(),
        });
    }
    let entries: Vec<EntryOutcome<T>> = manifest
        .entries
        .par_iter()
        .map(|entry| EntryOutcome {
            entry: entry.clone(),
            report: evaluate_entry(entry, opts),
        })
        .collect();

    let mut means = EvalMeans {
        mae: T::zero(),
        mean_f: T::zero(),
        mean_e: T::zero(),
        b_mu: T::zero(),
    };
    let mut ok = 0usize;
    for e in &entries {
        if let Ok(r) = &e.report {
            means.mae += r.mae;
            means.mean_f += r.mean_f;
            means.mean_e += r.mean_e;
            means.b_mu += r.b_mu;
            ok += 1;
        }
    }
    let means = (ok > 0).then(|| {
        let n = T::of(ok as f64);
        EvalMeans {
            mae: means.mae / n,
            mean_f: means.mean_f / n,
            mean_e: means.mean_e / n,
            b_mu: means.b_mu / n,
        }
    });
    Ok(EvalOutcome { entries, means })
}

#[derive(Serialize)]
struct EntryRecord<'a> {
    path: &'a Path,
    mae: f64,
    mean_f: f64,
    mean_e: f64,
    b_mu: f64,
}

#[derive(Serialize)]
struct ErrorRecord<'a> {
    path: &'a Path,
    error: String,
}

#[derive(Serialize)]
struct SummaryRecord {
    summary: bool,
    evaluated: usize,
    failed: usize,
    #[serde(skip_serializing_if = "Option::is_none")]
    mae: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    mean_f: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    mean_e: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    b_mu: Option<f64>,
}

/// Write one JSON record per entry plus a final summary record.
pub fn write_records<T: Real>(out: &mut dyn Write, outcome: &EvalOutcome<T>) -> std::io::Result<()> {
    for e in &outcome.entries {
        let line = match &e.report {
            Ok(r) => serde_json::to_string(&EntryRecord {
                path: &e.entry.image,
                mae: r.mae.as_f64(),
                mean_f: r.mean_f.as_f64(),
                mean_e: r.mean_e.as_f64(),
                b_mu: r.b_mu.as_f64(),
            })?,
            Err(err) => serde_json::to_string(&ErrorRecord {
                path: &e.entry.image,
                error: err.to_string(),
            })?,
        };
        writeln!(out, "{line}")?;
    }
    let summary = SummaryRecord {
        summary: true,
        evaluated: outcome.evaluated(),
        failed: outcome.failed(),
        mae: outcome.means.as_ref().map(|m| m.mae.as_f64()),
        mean_f: outcome.means.as_ref().map(|m| m.mean_f.as_f64()),
        mean_e: outcome.means.as_ref().map(|m| m.mean_e.as_f64()),
        b_mu: outcome.means.as_ref().map(|m| m.b_mu.as_f64()),
    };
    writeln!(out, "{}", serde_json::to_string(&summary)?)
}

/// Human-readable table of the same records.
pub fn write_pretty<T: Real>(out: &mut dyn Write, outcome: &EvalOutcome<T>) -> std::io::Result<()> {
    writeln!(
        out,
        "{:<40} {:>8} {:>8} {:>8} {:>8}",
        "path", "mae", "mean_f", "mean_e", "b_mu"
    )?;
    for e in &outcome.entries {
        let name = e.entry.image.display().to_string();
        match &e.report {
            Ok(r) => writeln!(
                out,
                "{:<40} {:>8.4} {:>8.4} {:>8.4} {:>8.4}",
                name,
                r.mae.as_f64(),
                r.mean_f.as_f64(),
                r.mean_e.as_f64(),
                r.b_mu.as_f64()
            )?,
            Err(err) => writeln!(out, "{name:<40} error: {err}")?,
        }
    }
    match &outcome.means {
        Some(m) => writeln!(
            out,
            "{:<40} {:>8.4} {:>8.4} {:>8.4} {:>8.4}  ({} evaluated, {} failed)",
            "mean",
            m.mae.as_f64(),
            m.mean_f.as_f64(),
            m.mean_e.as_f64(),
            m.b_mu.as_f64(),
            outcome.evaluated(),
            outcome.failed()
        ),
        None => writeln!(out, "no entry evaluated ({} failed)", outcome.failed()),
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::field::{LabelField, ScalarField};
    use proptest::prelude::*;

    fn saliency(w: usize, h: usize, f: impl FnMut(usize, usize) -> f64) -> SaliencyMap<f64> {
        SaliencyMap::new(ScalarField::from_fn(w, h, f).unwrap()).unwrap()
    }

    fn mask(w: usize, h: usize, mut f: impl FnMut(usize, usize) -> bool) -> BinaryMask {
        let mut m = LabelField::new(w, h, 0).unwrap();
        for y in 0..h {
            for x in 0..w {
                if f(x, y) {
                    m.set(x, y, 1);
                }
            }
        }
        BinaryMask::new(m).unwrap()
    }

    #[test]
    fn mae_basics() {
        let a = saliency(4, 4, |_, _| 1.0);
        let z = saliency(4, 4, |_, _| 0.0);
        let q = saliency(4, 4, |_, _| 0.25);
        assert_eq!(mae(&a, &a).unwrap(), 0.0);
        assert_eq!(mae(&a, &z).unwrap(), 1.0);
        assert_eq!(mae(&q, &z).unwrap(), 0.25);
    }

    #[test]
    fn mae_complement_invariance() {
        let s = saliency(5, 5, |x, y| ((x * 3 + y * 5) % 10) as f64 / 10.0);
        let gt = saliency(5, 5, |x, y| ((x + y) % 2) as f64);
        let s_c = SaliencyMap::new(s.field().map(|v| 1.0 - v)).unwrap();
        let gt_c = SaliencyMap::new(gt.field().map(|v| 1.0 - v)).unwrap();
        let a = mae(&s, &gt).unwrap();
        let b = mae(&s_c, &gt_c).unwrap();
        assert!((a - b).abs() < 1e-12);
    }

    #[test]
    fn f_measure_perfect_is_one() {
        let gt = mask(4, 4, |x, _| x < 2);
        let s = saliency(4, 4, |x, _| if x < 2 { 1.0 } else { 0.0 });
        let f = f_measure(&s, &gt, 0.5, 0.3).unwrap();
        assert!((f - 1.0).abs() < 1e-12);
    }

    #[test]
    fn f_measure_all_foreground_over_half_gt() {
        let gt = mask(4, 4, |x, _| x < 2);
        let s = saliency(4, 4, |_, _| 1.0);
        let f = f_measure(&s, &gt, 0.5, 0.3).unwrap();
        assert!((f - 0.65 / 1.15).abs() < 1e-9);
    }

    #[test]
    fn f_measure_empty_prediction_is_zero() {
        let gt = mask(4, 4, |x, _| x < 2);
        let s = saliency(4, 4, |_, _| 0.0);
        assert_eq!(f_measure(&s, &gt, 0.5, 0.3).unwrap(), 0.0);
    }

    #[test]
    fn mean_f_adaptive_threshold_cases() {
        // binary prediction with quarter coverage: threshold 0.5, perfect F
        let gt = mask(4, 4, |x, y| x < 2 && y < 2);
        let s = saliency(4, 4, |x, y| if x < 2 && y < 2 { 1.0 } else { 0.0 });
        assert!((mean_f_measure(&s, &gt, 0.3).unwrap() - 1.0).abs() < 1e-12);

        // all-zero prediction: threshold 0, everything foreground
        let z = saliency(4, 4, |_, _| 0.0);
        let rho: f64 = 0.25;
        let want = 1.3 * rho / (0.3 * rho + 1.0);
        assert!((mean_f_measure(&z, &gt, 0.3).unwrap() - want).abs() < 1e-12);

        // dense binary prediction: threshold capped at 1 keeps the s=1 pixels
        let gt6 = mask(10, 1, |x, _| x < 6);
        let s6 = saliency(10, 1, |x, _| if x < 6 { 1.0 } else { 0.0 });
        assert!((mean_f_measure(&s6, &gt6, 0.3).unwrap() - 1.0).abs() < 1e-12);
    }

    #[test]
    fn f_curve_of_perfect_binary_map_is_constant_one() {
        let gt = mask(6, 6, |x, y| x + y < 5);
        let s = saliency(6, 6, |x, y| if x + y < 5 { 1.0 } else { 0.0 });
        let curve = f_curve(&s, &gt, 0.3).unwrap();
        assert_eq!(curve.len(), 255);
        assert!(curve.iter().all(|&f| (f - 1.0).abs() < 1e-12));
    }

    #[test]
    fn f_curve_of_staircase_is_piecewise_constant() {
        let gt = mask(4, 1, |x, _| x >= 2);
        let s = saliency(4, 1, |x, _| [0.2, 0.4, 0.6, 0.8][x]);
        let curve = f_curve(&s, &gt, 0.3).unwrap();
        // all thresholds in (0.4, 0.6] give the same prediction {0.6, 0.8}
        let i1 = (0.45f64 * 255.0) as usize;
        let i2 = (0.55f64 * 255.0) as usize;
        assert_eq!(curve[i1], curve[i2]);
        assert!((curve[i1] - 1.0).abs() < 1e-12);
        // threshold near 0 marks everything foreground
        assert!((curve[0] - 1.3 * 0.5 / (0.3 * 0.5 + 1.0)).abs() < 1e-12);
    }

    #[test]
    fn e_measure_cases() {
        let gt = mask(4, 4, |x, _| x < 2);
        let s = saliency(4, 4, |x, _| if x < 2 { 0.9 } else { 0.1 });
        assert!((e_measure(&s, &gt, 0.5).unwrap() - 1.0).abs() < 1e-12);

        // anti-prediction of a half-half ground truth scores zero
        let s_inv = saliency(4, 4, |x, _| if x < 2 { 0.1 } else { 0.9 });
        assert!(e_measure(&s_inv, &gt, 0.5).unwrap().abs() < 1e-12);

        // degenerate all-zero ground truth
        let gt0 = mask(4, 4, |_, _| false);
        let z = saliency(4, 4, |_, _| 0.0);
        assert!((e_measure(&z, &gt0, 0.5).unwrap() - 1.0).abs() < 1e-12);
    }

    #[test]
    fn b_mu_perfect_and_disjoint() {
        let gt = mask(20, 20, |x, y| (5..12).contains(&x) && (5..12).contains(&y));
        let s = saliency(20, 20, |x, y| {
            if (5..12).contains(&x) && (5..12).contains(&y) {
                1.0
            } else {
                0.0
            }
        });
        assert_eq!(b_mu(&s, &gt).unwrap(), 0.0);

        // far-apart squares: dilated rings disjoint
        let gt2 = mask(30, 30, |x, y| x < 5 && y < 5);
        let s2 = saliency(30, 30, |x, y| {
            if x > 20 && y > 20 {
                1.0
            } else {
                0.0
            }
        });
        assert_eq!(b_mu(&s2, &gt2).unwrap(), 1.0);
    }

    #[test]
    fn b_mu_empty_conventions() {
        let empty = mask(8, 8, |_, _| false);
        let flat = saliency(8, 8, |_, _| 0.0);
        assert_eq!(b_mu(&flat, &empty).unwrap(), 0.0);
        let square = mask(8, 8, |x, y| (2..5).contains(&x) && (2..5).contains(&y));
        assert_eq!(b_mu(&flat, &square).unwrap(), 1.0);
    }

    #[test]
    fn report_on_identical_pair() {
        let gt = saliency(16, 16, |x, y| {
            if (4..10).contains(&x) && (4..10).contains(&y) {
                1.0
            } else {
                0.0
            }
        });
        let r = report(&gt, &gt, &EvalOptions::default()).unwrap();
        assert_eq!(r.mae, 0.0);
        assert!((r.mean_f - 1.0).abs() < 1e-12);
        assert!((r.mean_e - 1.0).abs() < 1e-12);
        assert_eq!(r.b_mu, 0.0);
        assert_eq!(r.f_curve.len(), 255);
        assert_eq!(r.e_curve.len(), 255);
    }

    #[test]
    fn evaluate_averages_over_entries_and_reports_failures() {
        use crate::io::{save_saliency, DatasetManifest, ManifestEntry};
        let dir = tempfile::tempdir().unwrap();
        let write = |name: &str, v: f64| {
            let path = dir.path().join(name);
            let map = SaliencyMap::new(ScalarField::new(4, 4, v).unwrap()).unwrap();
            save_saliency(&map, &path).unwrap();
            path
        };
        let gt = write("gt.png", 1.0);
        let perfect = write("perfect.png", 1.0);
        let half = write("half.png", 0.5);
        let entry = |pred: &std::path::Path, gt_path: Option<&std::path::Path>| ManifestEntry {
            image: dir.path().join("img.png"),
            scribble: dir.path().join("scr.png"),
            ground_truth: gt_path.map(|p| p.to_path_buf()),
            prediction: Some(pred.to_path_buf()),
        };
        let manifest = DatasetManifest {
            entries: vec![
                entry(&perfect, Some(&gt)),
                entry(&half, Some(&gt)),
                entry(&perfect, Some(std::path::Path::new("/missing/gt.png"))),
                entry(&perfect, None),
            ],
        };
        let outcome = evaluate::<f64>(&manifest, &EvalOptions::default()).unwrap();
        assert_eq!(outcome.evaluated(), 2);
        assert_eq!(outcome.failed(), 2);
        let means = outcome.means.unwrap();
        let mae_a = outcome.entries[0].report.as_ref().unwrap().mae;
        let mae_b = outcome.entries[1].report.as_ref().unwrap().mae;
        assert_eq!(mae_a, 0.0);
        let expected = (127.0 / 255.0) / 2.0; // byte 128 loads as 128/255 vs gt 1.0
        assert!((mae_b - 2.0 * expected).abs() < 1e-2);
        assert!((means.mae - (mae_a + mae_b) / 2.0).abs() < 1e-12);

        let mut records = Vec::new();
        write_records(&mut records, &outcome).unwrap();
        let text = String::from_utf8(records).unwrap();
        assert_eq!(text.lines().count(), 5);
        assert!(text.contains("\"error\""));
        assert!(text.lines().last().unwrap().contains("\"summary\":true"));

        let empty = DatasetManifest { entries: vec![] };
        assert!(evaluate(&empty, &EvalOptions::<f64>::default()).is_err());
    }

    proptest! {
        #[test]
        fn b_mu_in_range_and_symmetric(
            pred in proptest::collection::vec(0.0f64..1.0, 64),
            truth in proptest::collection::vec(proptest::bool::ANY, 64),
        ) {
            let s = SaliencyMap::new(ScalarField::from_vec(8, 8, pred).unwrap()).unwrap();
            let gt = {
                let mut m = LabelField::new(8, 8, 0).unwrap();
                for (i, &t) in truth.iter().enumerate() {
                    if t { m.as_mut_slice()[i] = 1; }
                }
                BinaryMask::new(m).unwrap()
            };
            let v = b_mu(&s, &gt).unwrap();
            prop_assert!((0.0..=1.0).contains(&v));

            // symmetry in the two binary inputs
            let s_bin = binarize(s.field(), 0.5);
            let gt_as_s = SaliencyMap::new(
                ScalarField::from_vec(8, 8, gt.field().as_slice().iter().map(|&b| b as f64).collect()).unwrap()
            ).unwrap();
            let swapped = b_mu(&gt_as_s, &s_bin).unwrap();
            prop_assert!((v - swapped).abs() < 1e-12);

            // zero iff the dilated boundary maps are identical
            let k3 = SquareKernel::new(3).unwrap();
            let g_s = dilate(&boundary(&s_bin), k3);
            let g_y = dilate(&boundary(&gt), k3);
            prop_assert_eq!(v == 0.0, g_s == g_y);
        }

        #[test]
        fn monotone_rescaling_preserves_f_and_e(vals in proptest::collection::vec(0.0f64..1.0, 36)) {
            let s = SaliencyMap::new(ScalarField::from_vec(6, 6, vals.clone()).unwrap()).unwrap();
            let squared = SaliencyMap::new(ScalarField::from_vec(6, 6, vals.iter().map(|v| v * v).collect()).unwrap()).unwrap();
            let gt = mask(6, 6, |x, y| x + y > 5);
            let t = 0.4f64;
            // v >= t  <=>  v^2 >= t^2 for non-negative values
            let f1 = f_measure(&s, &gt, t, 0.3).unwrap();
            let f2 = f_measure(&squared, &gt, t * t, 0.3).unwrap();
            prop_assert!((f1 - f2).abs() < 1e-12);
            let e1 = e_measure(&s, &gt, t).unwrap();
            let e2 = e_measure(&squared, &gt, t * t).unwrap();
            prop_assert!((e1 - e2).abs() < 1e-12);
        }

        #[test]
        fn curves_stay_in_unit_range(vals in proptest::collection::vec(0.0f64..1.0, 25)) {
            let s = SaliencyMap::new(ScalarField::from_vec(5, 5, vals).unwrap()).unwrap();
            let gt = mask(5, 5, |x, _| x % 2 == 0);
            for v in f_curve(&s, &gt, 0.3).unwrap().iter().chain(e_curve(&s, &gt).unwrap().iter()) {
                prop_assert!((0.0..=1.0).contains(v));
            }
        }
    }
}
