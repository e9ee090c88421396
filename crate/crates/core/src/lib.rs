//! Weak-supervision saliency toolkit.
//!
//! Scribble annotations label around 3% of an image's pixels as foreground
//! or background and leave the rest unknown. This crate implements the
//! machinery to learn and evaluate saliency from such annotations without a
//! network in the loop:
//!
//! - partial cross-entropy on the labeled pixels, dense edge cross-entropy,
//!   and a gated structure-aware smoothness loss, all with analytic
//!   gradients ([`losses`]);
//! - the gate construction (grayscale dilation + Otsu binarization) and the
//!   image kernels behind it ([`imgproc`]);
//! - a fully-connected Potts CRF with exact O(N^2) mean-field inference and
//!   a brute-force oracle for small instances ([`crf`]);
//! - scribble boosting: densify an annotation wherever the raw and
//!   CRF-refined predictions agree ([`boosting`]);
//! - evaluation metrics including the boundary structure measure `B_mu`
//!   ([`metrics`]);
//! - a per-pixel optimization demo driving the full optimize / boost /
//!   re-optimize loop ([`demo`]), plus a deterministic fixture generator
//!   ([`fixtures`]).
//!
//! All numeric code is generic over the scalar precision through
//! [`scalar::Real`]; the aliases at the crate root fix `f64`, which the
//! file-backed pipelines and the CLI use.

pub mod boosting;
pub mod crf;
pub mod demo;
mod error;
pub mod field;
pub mod fixtures;
pub mod imgproc;
pub mod io;
pub mod losses;
pub mod metrics;
pub mod scalar;

pub use error::{Error, Result};
pub use field::{BinaryMask, LabelField, ScribbleMap};
pub use field::{LABEL_BACKGROUND, LABEL_FOREGROUND, LABEL_UNKNOWN};
pub use imgproc::SquareKernel;
pub use io::{DatasetManifest, ManifestEntry, ScribbleEncoding};
pub use scalar::Real;

/// Default scalar precision of the file-backed pipelines.
pub type Scalar = f64;

pub type ScalarField = field::ScalarField<Scalar>;
pub type GrayImage = field::GrayImage<Scalar>;
pub type RgbImage = field::RgbImage<Scalar>;
pub type SaliencyMap = field::SaliencyMap<Scalar>;
pub type EdgeMap = field::EdgeMap<Scalar>;
pub type GateMask = field::GateMask;

pub type LossWeights = losses::LossWeights<Scalar>;
pub type LossResult = losses::LossResult<Scalar>;
pub type CrfParams = crf::CrfParams<Scalar>;
pub type UnaryField = crf::UnaryField<Scalar>;
pub type BoostConfig = boosting::BoostConfig<Scalar>;
pub type OptimizeConfig = demo::OptimizeConfig<Scalar>;
pub type MetricReport = metrics::MetricReport<Scalar>;
pub type EvalOptions = metrics::EvalOptions<Scalar>;
