//! `scribsal`: batch front end over the scribble-saliency pipelines.
//!
//! Subcommands: `eval`, `boost`, `loss`, `optimize`, `edges`, `gate`.
//! Exit codes: 0 success, 1 usage or I/O error, 2 partial failure (some
//! manifest entries could not be evaluated).

use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand, ValueEnum};
use serde::Serialize;

use scribble_saliency::demo::{run_with_boosting_traced, StepTrace};
use scribble_saliency::imgproc::{sobel_edges, SquareKernel};
use scribble_saliency::losses::{compute_gate, edge_cross_entropy, gated_structure_aware, partial_cross_entropy};
use scribble_saliency::metrics::{evaluate, write_pretty, write_records};
use scribble_saliency::{
    boosting, io, BoostConfig, CrfParams, DatasetManifest, EdgeMap, EvalOptions, LossWeights,
    OptimizeConfig, RgbImage, SaliencyMap, ScribbleEncoding,
};

#[derive(Parser)]
#[command(
    name = "scribsal",
    version,
    about = "Scribble-supervised saliency toolkit",
    long_about = "Losses, DenseCRF scribble boosting, per-pixel optimization demo, and \
                  evaluation metrics for scribble-supervised salient object detection. \
                  All rasters are 8-bit PNG; scalar values are byte/255."
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Evaluate predictions against dense ground truth over a manifest
    Eval(EvalArgs),
    /// One scribble-boosting round: CRF-refine a prediction and densify the annotation
    Boost(BoostArgs),
    /// Print the loss components and the combined objective for one prediction
    Loss(LossArgs),
    /// Optimize a per-pixel saliency field from scribbles, with boosting rounds
    Optimize(OptimizeArgs),
    /// Sobel edge map of an image
    Edges(EdgesArgs),
    /// Gate mask of a saliency map (dilate + Otsu binarization)
    Gate(GateArgs),
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, ValueEnum)]
enum EncodingArg {
    /// Label codes stored directly as bytes {0,1,2}
    Raw,
    /// Viewer-friendly bytes {0 unknown, 255 foreground, 128 background}
    Visible,
}

impl From<EncodingArg> for ScribbleEncoding {
    fn from(e: EncodingArg) -> Self {
        match e {
            EncodingArg::Raw => ScribbleEncoding::Raw,
            EncodingArg::Visible => ScribbleEncoding::Visible,
        }
    }
}

#[derive(Args)]
struct CrfFlags {
    /// Mean-field iterations
    #[arg(long, default_value_t = 10)]
    crf_iters: usize,
    /// Spatial kernel weight
    #[arg(long, default_value_t = 3.0)]
    crf_ws: f64,
    /// Spatial kernel sigma (pixels)
    #[arg(long, default_value_t = 3.0)]
    crf_sg: f64,
    /// Bilateral kernel weight
    #[arg(long, default_value_t = 4.0)]
    crf_wb: f64,
    /// Bilateral spatial sigma (pixels)
    #[arg(long, default_value_t = 60.0)]
    crf_sa: f64,
    /// Bilateral color sigma (on a 0-255 scale)
    #[arg(long, default_value_t = 5.0)]
    crf_sb: f64,
}

impl CrfFlags {
    fn params(&self) -> CrfParams {
        CrfParams {
            iterations: self.crf_iters,
            spatial_weight: self.crf_ws,
            spatial_sigma: self.crf_sg,
            bilateral_weight: self.crf_wb,
            bilateral_sigma_xy: self.crf_sa,
            bilateral_sigma_rgb: self.crf_sb,
        }
    }
}

#[derive(Args)]
struct WeightFlags {
    /// Edge sensitivity of the structure-aware weight
    #[arg(long, default_value_t = 10.0)]
    alpha: f64,
    /// Structure-loss weight on the coarse prediction
    #[arg(long, default_value_t = 0.3)]
    beta1: f64,
    /// Structure-loss weight on the refined prediction
    #[arg(long, default_value_t = 0.3)]
    beta2: f64,
    /// Edge-loss weight
    #[arg(long, default_value_t = 1.0)]
    beta3: f64,
    /// Gate dilation kernel size (odd)
    #[arg(long, default_value_t = 11)]
    gate_k: usize,
}

impl WeightFlags {
    fn weights(&self) -> LossWeights {
        LossWeights {
            alpha: self.alpha,
            beta1: self.beta1,
            beta2: self.beta2,
            beta3: self.beta3,
        }
    }
}

#[derive(Args)]
struct EvalArgs {
    /// Manifest file: one `image,scribble,gt,prediction` line per entry
    manifest: PathBuf,
    /// Write records here instead of stdout
    #[arg(long)]
    out: Option<PathBuf>,
    /// Evaluate entries in parallel with this many threads
    #[arg(long)]
    jobs: Option<usize>,
    /// Human-readable table instead of line-JSON
    #[arg(long)]
    pretty: bool,
    /// beta^2 of the F-measure
    #[arg(long = "beta2-f", default_value_t = 0.3)]
    beta2_f: f64,
    /// Per-image adaptive threshold min(2*mean, 1); this is the default
    #[arg(long, conflicts_with = "threshold")]
    adaptive: bool,
    /// Fixed binarization threshold instead of the adaptive rule
    #[arg(short = 't', long)]
    threshold: Option<f64>,
}

#[derive(Args)]
struct BoostArgs {
    image: PathBuf,
    scribble: PathBuf,
    saliency: PathBuf,
    /// Directory for `boosted_scribble.png` and `refined_saliency.png`
    #[arg(long)]
    out_dir: PathBuf,
    /// Encoding of the input scribble PNG
    #[arg(long, value_enum, default_value_t = EncodingArg::Raw)]
    scribble_encoding: EncodingArg,
    /// Binarization threshold of the agreement rule
    #[arg(long, default_value_t = 0.5)]
    threshold: f64,
    /// Let the agreement rule overwrite the original labels
    #[arg(long)]
    no_preserve: bool,
    #[command(flatten)]
    crf: CrfFlags,
}

#[derive(Args)]
struct LossArgs {
    saliency: PathBuf,
    scribble: PathBuf,
    image: PathBuf,
    #[command(flatten)]
    weights: WeightFlags,
    /// Predicted edge map; requires --edge-ref
    #[arg(long, requires = "edge_ref")]
    edge_pred: Option<PathBuf>,
    /// Reference edge map; requires --edge-pred
    #[arg(long, requires = "edge_pred")]
    edge_ref: Option<PathBuf>,
    #[arg(long, value_enum, default_value_t = EncodingArg::Raw)]
    scribble_encoding: EncodingArg,
    /// Human-readable lines instead of one JSON object
    #[arg(long)]
    pretty: bool,
}

#[derive(Args)]
struct OptimizeArgs {
    image: PathBuf,
    scribble: PathBuf,
    /// Directory for `final_saliency.png` and `boosted_scribble.png`
    #[arg(long)]
    out_dir: PathBuf,
    /// Optimization steps per round
    #[arg(long, default_value_t = 500)]
    steps: usize,
    /// Step size of the preconditioned descent
    #[arg(long, default_value_t = 0.5)]
    step_size: f64,
    /// Scribble-boosting rounds after the initial optimization
    #[arg(long, default_value_t = 1)]
    rounds: usize,
    /// Seed of the logit initialization noise
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// Disable the auxiliary edge field trained against the Sobel edges
    #[arg(long)]
    no_edge_term: bool,
    #[command(flatten)]
    weights: WeightFlags,
    /// Binarization threshold of the boosting agreement rule
    #[arg(long, default_value_t = 0.5)]
    threshold: f64,
    /// Let the agreement rule overwrite the original labels
    #[arg(long)]
    no_preserve: bool,
    #[command(flatten)]
    crf: CrfFlags,
    /// Write the per-step loss trace here (one JSON record per step)
    #[arg(long)]
    trace: Option<PathBuf>,
    #[arg(long, value_enum, default_value_t = EncodingArg::Raw)]
    scribble_encoding: EncodingArg,
}

#[derive(Args)]
struct EdgesArgs {
    image: PathBuf,
    /// Output PNG path
    #[arg(long)]
    out: PathBuf,
}

#[derive(Args)]
struct GateArgs {
    saliency: PathBuf,
    /// Output PNG path
    #[arg(long)]
    out: PathBuf,
    /// Gate dilation kernel size (odd)
    #[arg(short = 'k', long, default_value_t = 11)]
    gate_k: usize,
}

fn main() {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            use clap::error::ErrorKind;
            let code = match e.kind() {
                ErrorKind::DisplayHelp | ErrorKind::DisplayVersion => 0,
                _ => 1,
            };
            let _ = e.print();
            std::process::exit(code);
        }
    };
    let code = match dispatch(cli) {
        Ok(code) => code,
        Err(err) => {
            eprintln!("error: {err}");
            1
        }
    };
    std::process::exit(code);
}

type AnyError = Box<dyn std::error::Error>;

fn dispatch(cli: Cli) -> Result<i32, AnyError> {
    match cli.command {
        Command::Eval(args) => cmd_eval(args),
        Command::Boost(args) => cmd_boost(args),
        Command::Loss(args) => cmd_loss(args),
        Command::Optimize(args) => cmd_optimize(args),
        Command::Edges(args) => cmd_edges(args),
        Command::Gate(args) => cmd_gate(args),
    }
}

fn ensure_dir(dir: &Path) -> Result<(), AnyError> {
    fs::create_dir_all(dir).map_err(|e| format!("cannot create {}: {e}", dir.display()).into())
}

fn open_out(path: &Path) -> Result<Box<dyn Write>, AnyError> {
    let file = fs::File::create(path).map_err(|e| format!("cannot write {}: {e}", path.display()))?;
    Ok(Box::new(std::io::BufWriter::new(file)))
}

fn cmd_eval(args: EvalArgs) -> Result<i32, AnyError> {
    if let Some(t) = args.threshold {
        if !(0.0..=1.0).contains(&t) {
            return Err(format!("threshold {t} outside [0, 1]").into());
        }
    }
    if args.beta2_f < 0.0 || !args.beta2_f.is_finite() {
        return Err("beta2-f must be finite and non-negative".into());
    }
    let opts = EvalOptions {
        beta2: args.beta2_f,
        threshold: args.threshold,
    };
    let manifest = DatasetManifest::load(&args.manifest)?;
    let outcome = match args.jobs {
        Some(jobs) => {
            let pool = rayon::ThreadPoolBuilder::new()
                .num_threads(jobs.max(1))
                .build()?;
            pool.install(|| evaluate(&manifest, &opts))?
        }
        None => evaluate(&manifest, &opts)?,
    };
    let mut out: Box<dyn Write> = match &args.out {
        Some(path) => open_out(path)?,
        None => Box::new(std::io::stdout().lock()),
    };
    if args.pretty {
        write_pretty(&mut *out, &outcome)?;
    } else {
        write_records(&mut *out, &outcome)?;
    }
    out.flush()?;
    Ok(if outcome.failed() > 0 { 2 } else { 0 })
}

fn cmd_boost(args: BoostArgs) -> Result<i32, AnyError> {
    let cfg = BoostConfig {
        binarize_threshold: args.threshold,
        preserve_original: !args.no_preserve,
        crf: args.crf.params(),
    };
    cfg.validate()?;
    let image: RgbImage = io::load_rgb(&args.image)?;
    let scribble = io::decode_scribble(&args.scribble, args.scribble_encoding.into())?;
    let saliency: SaliencyMap = io::load_saliency(&args.saliency)?;
    let (boosted, refined) = boosting::boost(&image, &saliency, &scribble, &cfg)?;
    ensure_dir(&args.out_dir)?;
    io::save_scribble(&boosted, args.out_dir.join("boosted_scribble.png"), ScribbleEncoding::Raw)?;
    io::save_saliency(&refined, args.out_dir.join("refined_saliency.png"))?;
    Ok(0)
}

#[derive(Serialize)]
struct LossRecord {
    l_s: f64,
    l_b: f64,
    #[serde(skip_serializing_if = "Option::is_none")]
    l_e: Option<f64>,
    alpha: f64,
    beta1: f64,
    beta2: f64,
    beta3: f64,
    total: f64,
}

fn cmd_loss(args: LossArgs) -> Result<i32, AnyError> {
    let weights = args.weights.weights();
    let gate_k = SquareKernel::new(args.weights.gate_k)?;
    let saliency: SaliencyMap = io::load_saliency(&args.saliency)?;
    let scribble = io::decode_scribble(&args.scribble, args.scribble_encoding.into())?;
    let image: RgbImage = io::load_rgb(&args.image)?;
    let intensity = image.to_intensity();

    let l_s = partial_cross_entropy(&saliency, &scribble)?.value;
    let gate = compute_gate(&saliency, gate_k);
    let l_b = gated_structure_aware(&saliency, &intensity, &gate, weights.alpha)?.value;
    let l_e = match (&args.edge_pred, &args.edge_ref) {
        (Some(pred), Some(reference)) => {
            let e: EdgeMap = edge_map_from_png(pred)?;
            let e_ref: EdgeMap = edge_map_from_png(reference)?;
            Some(edge_cross_entropy(&e, &e_ref)?.value)
        }
        _ => None,
    };

    // The single prediction stands in for both branches of the combined
    // objective, so the partial term counts twice and the structure term
    // carries beta1 + beta2.
    let total = 2.0 * l_s + (weights.beta1 + weights.beta2) * l_b
        + l_e.map_or(0.0, |v| weights.beta3 * v);
    let record = LossRecord {
        l_s,
        l_b,
        l_e,
        alpha: weights.alpha,
        beta1: weights.beta1,
        beta2: weights.beta2,
        beta3: weights.beta3,
        total,
    };
    if args.pretty {
        println!("partial cross-entropy:  {l_s:.6}");
        println!("structure-aware:        {l_b:.6}");
        if let Some(v) = l_e {
            println!("edge cross-entropy:     {v:.6}");
        }
        println!("combined total:         {total:.6}");
    } else {
        println!("{}", serde_json::to_string(&record)?);
    }
    Ok(0)
}

fn edge_map_from_png(path: &Path) -> Result<EdgeMap, AnyError> {
    let map = io::load_saliency(path)?;
    Ok(EdgeMap::new(map.into_field())?)
}

#[derive(Serialize)]
struct TraceRecord {
    round: usize,
    #[serde(flatten)]
    step: StepTrace<f64>,
}

fn cmd_optimize(args: OptimizeArgs) -> Result<i32, AnyError> {
    let cfg = OptimizeConfig {
        steps: args.steps,
        step_size: args.step_size,
        weights: args.weights.weights(),
        gate_kernel: SquareKernel::new(args.weights.gate_k)?,
        use_edge_term: !args.no_edge_term,
        boosting_rounds: args.rounds,
        seed: args.seed,
        boost: BoostConfig {
            binarize_threshold: args.threshold,
            preserve_original: !args.no_preserve,
            crf: args.crf.params(),
        },
    };
    cfg.validate()?;
    let image: RgbImage = io::load_rgb(&args.image)?;
    let scribble = io::decode_scribble(&args.scribble, args.scribble_encoding.into())?;
    let edges = sobel_edges(&image.to_intensity());
    let (saliency, boosted, traces) = run_with_boosting_traced(&image, &scribble, &edges, &cfg)?;
    ensure_dir(&args.out_dir)?;
    io::save_saliency(&saliency, args.out_dir.join("final_saliency.png"))?;
    io::save_scribble(&boosted, args.out_dir.join("boosted_scribble.png"), ScribbleEncoding::Raw)?;
    if let Some(path) = &args.trace {
        let mut out = open_out(path)?;
        for (round, steps) in traces.iter().enumerate() {
            for step in steps {
                writeln!(out, "{}", serde_json::to_string(&TraceRecord { round, step: *step })?)?;
            }
        }
        out.flush()?;
    }
    Ok(0)
}

fn cmd_edges(args: EdgesArgs) -> Result<i32, AnyError> {
    let image: RgbImage = io::load_rgb(&args.image)?;
    let edges = sobel_edges(&image.to_intensity());
    io::save_unit_field(edges.field(), &args.out)?;
    Ok(0)
}

fn cmd_gate(args: GateArgs) -> Result<i32, AnyError> {
    let k = SquareKernel::new(args.gate_k)?;
    let saliency: SaliencyMap = io::load_saliency(&args.saliency)?;
    let gate = compute_gate(&saliency, k);
    io::save_mask(&gate, &args.out)?;
    Ok(0)
}
