//! Command-line front end: `train`, `explain`, `evaluate`, `saturate` and
//! `compare`.
//!
//! Exit codes: 0 success, 1 usage error, 2 data or model error.

use std::ffi::OsString;
use std::fs;
use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand, ValueEnum};
use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::Serialize;
use serde_json::{json, Value};

use crate::attribution::{
    explain, expected_gradcam, grad_cam, normalize_saliency, ExplainOptions, Method,
};
use crate::data::image::resize_bilinear;
use crate::data::{
    generate_shapes_dataset, read_cifar10_binary, read_ppm, write_ppm, heatmap_overlay, ShapeKind,
};
use crate::error::{Error, Result};
use crate::metrics::{
    complexity_entropy, infidelity, insertion_deletion_auc, localization, pixel_flipping_curve, sensitivity,
    sparseness_gini, MetricReport, PerturbationProtocol,
};
use crate::model::{load_checkpoint, save_checkpoint, train_toy, Arch, ModelGraph, TrainConfig};
use crate::saturation::{saturation_report, SaturationConfig};
use crate::tensor::Tensor;

/// Seed of the held-out shapes pool used by `evaluate`, `saturate` and
/// `compare`; training data uses the training seed.
pub const SHAPES_EVAL_SEED: u64 = 1007;
/// Size of the held-out shapes pool that `evaluate` subsamples.
pub const SHAPES_EVAL_POOL: usize = 500;

#[derive(Parser, Debug)]
#[command(name = "camlab", version, about = "Expected Grad-CAM attribution lab")]
pub struct Cli {
    /// Worker threads (default: all cores). Results do not depend on it.
    #[arg(long, global = true)]
    pub threads: Option<usize>,
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Subcommand, Debug)]
pub enum Command {
    /// Train a toy network and write a checkpoint.
    Train(TrainArgs),
    /// Explain one image and write a heatmap.
    Explain(ExplainArgs),
    /// Score methods with explanation-quality metrics over a dataset.
    Evaluate(EvaluateArgs),
    /// Run the feature-scaling saturation study.
    Saturate(SaturateArgs),
    /// Render side-by-side heatmaps of several methods for one image.
    Compare(CompareArgs),
}

#[derive(Args, Debug)]
pub struct TrainArgs {
    /// `shapes` or `cifar10:<path>`.
    #[arg(long, default_value = "shapes")]
    pub dataset: String,
    #[arg(long, value_enum, default_value_t = ArchArg::ToyVgg)]
    pub arch: ArchArg,
    #[arg(long, default_value_t = 30)]
    pub epochs: usize,
    #[arg(long, default_value_t = 7)]
    pub seed: u64,
    /// Number of generated images for `shapes`.
    #[arg(long, default_value_t = 1200)]
    pub samples: usize,
    /// Image side for `shapes` (and the CIFAR-10 upsample target).
    #[arg(long, default_value_t = 32)]
    pub size: usize,
    /// Number of shape classes for `shapes` (1 to 4).
    #[arg(long, default_value_t = 4)]
    pub classes: usize,
    #[arg(long, default_value_t = 0.01)]
    pub lr: f32,
    #[arg(long)]
    pub out: PathBuf,
}

#[derive(Args, Debug, Clone)]
pub struct AttributionArgs {
    /// Target layer (default: output of the last convolution block).
    #[arg(long)]
    pub layer: Option<String>,
    /// Monte-Carlo samples for egcam and smoothgrad.
    #[arg(long, default_value_t = 50)]
    pub n: usize,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    /// Riemann steps for ig.
    #[arg(long, default_value_t = 32)]
    pub steps: usize,
    /// Noise level for smoothgrad.
    #[arg(long, default_value_t = 0.15)]
    pub sigma: f32,
}

impl AttributionArgs {
    fn options(&self) -> ExplainOptions {
        let mut opts = ExplainOptions {
            target_layer: self.layer.clone(),
            ig_steps: self.steps,
            smoothgrad_sigma: self.sigma,
            ..ExplainOptions::default()
        };
        opts.config.n_samples = self.n;
        opts.config.seed = self.seed;
        opts
    }
}

#[derive(Args, Debug)]
pub struct ExplainArgs {
    #[arg(long)]
    pub ckpt: PathBuf,
    /// P6 PPM image; resized to the model input if needed.
    #[arg(long)]
    pub image: PathBuf,
    /// Class to explain (default: the predicted class).
    #[arg(long = "class")]
    pub class_index: Option<usize>,
    #[arg(long, value_enum, default_value_t = MethodArg::Egcam)]
    pub method: MethodArg,
    #[command(flatten)]
    pub attribution: AttributionArgs,
    /// Heatmap overlay (P6 PPM).
    #[arg(long)]
    pub out: PathBuf,
    /// Optional JSON with weights and run details.
    #[arg(long)]
    pub json: Option<PathBuf>,
}

#[derive(Args, Debug)]
pub struct EvaluateArgs {
    #[arg(long)]
    pub ckpt: PathBuf,
    /// `shapes` (held-out pool) or `cifar10:<path>`.
    #[arg(long, default_value = "shapes")]
    pub dataset: String,
    #[arg(long, value_enum, value_delimiter = ',', default_values_t = vec![MethodArg::Gradcam, MethodArg::Egcam])]
    pub methods: Vec<MethodArg>,
    #[arg(long, value_enum, value_delimiter = ',', default_values_t = vec![MetricArg::Insertion, MetricArg::Infidelity, MetricArg::Complexity])]
    pub metrics: Vec<MetricArg>,
    #[arg(long, default_value_t = 100)]
    pub samples: usize,
    /// Infidelity perturbations per sample.
    #[arg(long, default_value_t = 50)]
    pub perturbations: usize,
    /// Sensitivity draws per sample.
    #[arg(long, default_value_t = 10)]
    pub draws: usize,
    /// Sensitivity radius (l-infinity).
    #[arg(long, default_value_t = 0.02)]
    pub radius: f32,
    /// `k` for top-k intersection.
    #[arg(long, default_value_t = 50)]
    pub top_k: usize,
    #[command(flatten)]
    pub attribution: AttributionArgs,
    /// `.json` for the full report, `.csv` for one row per sample.
    #[arg(long)]
    pub out: PathBuf,
}

#[derive(Args, Debug)]
pub struct SaturateArgs {
    #[arg(long)]
    pub ckpt: PathBuf,
    #[arg(long, default_value = "shapes")]
    pub dataset: String,
    #[arg(long)]
    pub layer: Option<String>,
    #[arg(long, default_value_t = 25)]
    pub n_alphas: usize,
    #[arg(long, default_value_t = 25)]
    pub samples: usize,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    /// `.json` for per-sample curves, `.csv` for the aggregate.
    #[arg(long)]
    pub out: PathBuf,
}

#[derive(Args, Debug)]
pub struct CompareArgs {
    #[arg(long)]
    pub ckpt: PathBuf,
    #[arg(long)]
    pub image: PathBuf,
    #[arg(long = "class")]
    pub class_index: Option<usize>,
    #[arg(long, value_enum, value_delimiter = ',', default_values_t = vec![MethodArg::Gradcam, MethodArg::Ig, MethodArg::Smoothgrad, MethodArg::Egcam])]
    pub methods: Vec<MethodArg>,
    #[command(flatten)]
    pub attribution: AttributionArgs,
    /// Strip of the input followed by one overlay per method (P6 PPM).
    #[arg(long)]
    pub out: PathBuf,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
#[value(rename_all = "snake_case")]
pub enum ArchArg {
    ToyVgg,
    ToyPlain,
}

impl From<ArchArg> for Arch {
    fn from(a: ArchArg) -> Arch {
        match a {
            ArchArg::ToyVgg => Arch::ToyVgg,
            ArchArg::ToyPlain => Arch::ToyPlain,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum MethodArg {
    Gradcam,
    Ig,
    Smoothgrad,
    Egcam,
}

impl From<MethodArg> for Method {
    fn from(m: MethodArg) -> Method {
        match m {
            MethodArg::Gradcam => Method::GradCam,
            MethodArg::Ig => Method::IntegratedGradients,
            MethodArg::Smoothgrad => Method::SmoothGrad,
            MethodArg::Egcam => Method::ExpectedGradCam,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
#[value(rename_all = "snake_case")]
pub enum MetricArg {
    Insertion,
    Deletion,
    PixelFlipping,
    Infidelity,
    Sensitivity,
    Complexity,
    Sparseness,
    Localization,
}

/// Parses `argv` (program name first) and runs the command; returns the
/// process exit code.
pub fn run<I, T>(argv: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(argv) {
        Ok(cli) => cli,
        Err(e) => {
            let code = if e.use_stderr() { 1 } else { 0 };
            let _ = e.print();
            return code;
        }
    };
    match execute(cli) {
        Ok(()) => 0,
        Err(e) => {
            eprintln!("error: {e}");
            2
        }
    }
}

pub fn execute(cli: Cli) -> Result<()> {
    match cli.threads {
        Some(n) => {
            let pool = rayon::ThreadPoolBuilder::new()
                .num_threads(n)
                .build()
                .map_err(|e| Error::Config(format!("thread pool: {e}")))?;
            pool.install(|| dispatch(cli.command))
        }
        None => dispatch(cli.command),
    }
}

fn dispatch(command: Command) -> Result<()> {
    match command {
        Command::Train(a) => cmd_train(a),
        Command::Explain(a) => cmd_explain(a),
        Command::Evaluate(a) => cmd_evaluate(a),
        Command::Saturate(a) => cmd_saturate(a),
        Command::Compare(a) => cmd_compare(a),
    }
}

/// An evaluation image with its label and, for synthetic data, the object
/// mask.
struct Sample {
    image: Tensor,
    label: usize,
    mask: Option<Tensor>,
}

enum DatasetSpec {
    Shapes,
    Cifar10(PathBuf),
}

fn parse_dataset(spec: &str) -> Result<DatasetSpec> {
    if spec == "shapes" {
        Ok(DatasetSpec::Shapes)
    } else if let Some(path) = spec.strip_prefix("cifar10:") {
        Ok(DatasetSpec::Cifar10(PathBuf::from(path)))
    } else {
        Err(Error::Config(format!("unknown dataset `{spec}` (valid: shapes, cifar10:<path>)")))
    }
}

fn shape_kinds(classes: usize) -> Result<&'static [ShapeKind]> {
    if classes == 0 || classes > ShapeKind::ALL.len() {
        return Err(Error::Config(format!("shapes supports 1 to {} classes, got {classes}", ShapeKind::ALL.len())));
    }
    Ok(&ShapeKind::ALL[..classes])
}

/// Held-out evaluation pool matching the model's input.
fn eval_pool(spec: &str, model: &ModelGraph) -> Result<Vec<Sample>> {
    let [_, h, w] = model.input_shape();
    match parse_dataset(spec)? {
        DatasetSpec::Shapes => {
            let kinds = shape_kinds(model.class_count().min(ShapeKind::ALL.len()))?;
            Ok(generate_shapes_dataset(SHAPES_EVAL_POOL, kinds, h, w, SHAPES_EVAL_SEED)?
                .into_iter()
                .map(|s| Sample {
                    image: s.image,
                    label: s.label,
                    mask: Some(s.mask),
                })
                .collect())
        }
        DatasetSpec::Cifar10(path) => {
            if h != w {
                return Err(Error::Config("cifar10 needs a square model input".into()));
            }
            Ok(read_cifar10_binary(path, Some(h))?
                .into_iter()
                .map(|s| Sample {
                    image: s.image,
                    label: s.label,
                    mask: None,
                })
                .collect())
        }
    }
}

/// `k` pool indices chosen by `seed`, in ascending order.
fn subsample(pool_len: usize, k: usize, seed: u64) -> Vec<usize> {
    let mut idx: Vec<usize> = (0..pool_len).collect();
    idx.shuffle(&mut ChaCha8Rng::seed_from_u64(seed));
    idx.truncate(k.min(pool_len));
    idx.sort_unstable();
    idx
}

fn cmd_train(a: TrainArgs) -> Result<()> {
    let (data, desc) = match parse_dataset(&a.dataset)? {
        DatasetSpec::Shapes => {
            let set = generate_shapes_dataset(a.samples, shape_kinds(a.classes)?, a.size, a.size, a.seed)?;
            let desc = format!("shapes:n={}:size={}:classes={}:seed={}", a.samples, a.size, a.classes, a.seed);
            (set.iter().map(|s| s.labeled()).collect::<Vec<_>>(), desc)
        }
        DatasetSpec::Cifar10(path) => {
            let up = (a.size != 32).then_some(a.size);
            let desc = format!("cifar10:{}", path.display());
            (read_cifar10_binary(&path, up)?, desc)
        }
    };
    let classes = match parse_dataset(&a.dataset)? {
        DatasetSpec::Shapes => Some(a.classes),
        DatasetSpec::Cifar10(_) => Some(10),
    };
    let config = TrainConfig {
        arch: a.arch.into(),
        epochs: a.epochs,
        seed: a.seed,
        learning_rate: a.lr,
        classes,
        dataset: desc,
        ..TrainConfig::default()
    };
    let model = train_toy(&data, &config)?;
    save_checkpoint(&model, &a.out)?;
    println!(
        "trained {} for {} epochs: train accuracy {:.4}, validation accuracy {:.4}",
        model.meta.arch, model.meta.epochs, model.meta.train_accuracy, model.meta.val_accuracy
    );
    Ok(())
}

fn load_model(path: &Path) -> Result<ModelGraph> {
    load_checkpoint(path).map_err(|e| match e {
        Error::Io(io) => Error::Config(format!("cannot read checkpoint {}: {io}", path.display())),
        other => other,
    })
}

fn load_image(path: &Path, model: &ModelGraph) -> Result<Tensor> {
    let img = read_ppm(path).map_err(|e| match e {
        Error::Io(io) => Error::Config(format!("cannot read image {}: {io}", path.display())),
        other => other,
    })?;
    let [c, h, w] = model.input_shape();
    if img.shape()[0] != c {
        return Err(Error::Config(format!("model expects {c} channels, image has 3")));
    }
    if img.shape() == [c, h, w] {
        Ok(img)
    } else {
        resize_bilinear(&img, h, w)
    }
}

fn pick_class(model: &ModelGraph, x: &Tensor, class_index: Option<usize>) -> Result<usize> {
    match class_index {
        Some(c) => {
            model.check_class(c)?;
            Ok(c)
        }
        None => Ok(model.forward(x)?.argmax()),
    }
}

fn write_text(path: &Path, text: &str) -> Result<()> {
    fs::write(path, text)?;
    Ok(())
}

fn cmd_explain(a: ExplainArgs) -> Result<()> {
    let model = load_model(&a.ckpt)?;
    let x = load_image(&a.image, &model)?;
    let class_index = pick_class(&model, &x, a.class_index)?;
    let opts = a.attribution.options();
    let method: Method = a.method.into();
    let saliency = explain(method, &model, &x, class_index, &opts)?;
    write_ppm(&heatmap_overlay(&saliency, &x)?, &a.out)?;
    if let Some(json_path) = &a.json {
        let layer = model.resolve_target(opts.target_layer.as_deref())?;
        let mut report = json!({
            "command": "explain",
            "method": method.id(),
            "class_index": class_index,
            "probabilities": model.probabilities(&x)?.data(),
            "saliency_shape": saliency.shape(),
            "options": opts,
        });
        match method {
            Method::GradCam => {
                let cam = grad_cam(&model, &x, class_index, &layer)?;
                report["target_layer"] = json!(layer);
                report["weights"] = json!(cam.weights);
                report["coarse_map"] = json!(cam.map.data());
            }
            Method::ExpectedGradCam => {
                let eg = expected_gradcam(&model, &x, class_index, &layer, &opts.config)?;
                report["target_layer"] = json!(layer);
                report["weights"] = json!(eg.saliency.weights);
                report["coarse_map"] = json!(eg.saliency.map.data());
                report["kernel_normalizer"] = json!(eg.kernel_normalizer);
            }
            _ => {}
        }
        write_text(json_path, &serde_json::to_string_pretty(&report)?)?;
    }
    Ok(())
}

/// Per-sample values of every requested metric for one method, keyed by
/// report name.
fn sample_metrics(
    model: &ModelGraph,
    sample: &Sample,
    method: Method,
    a: &EvaluateArgs,
    opts: &ExplainOptions,
    protocol: &PerturbationProtocol,
    seed: u64,
) -> Result<Vec<(&'static str, f64)>> {
    let x = &sample.image;
    let c = sample.label;
    let saliency = explain(method, model, x, c, opts)?;
    let norm = normalize_saliency(&saliency);
    let mut out = Vec::new();
    let wants = |m: MetricArg| a.metrics.contains(&m);
    if wants(MetricArg::Insertion) || wants(MetricArg::Deletion) {
        let id = insertion_deletion_auc(model, x, &norm, c, protocol)?;
        if wants(MetricArg::Insertion) {
            out.push(("insertion_auc", id.insertion.auc));
        }
        if wants(MetricArg::Deletion) {
            out.push(("deletion_auc", id.deletion.auc));
        }
        if wants(MetricArg::Insertion) && wants(MetricArg::Deletion) {
            out.push(("ins_minus_del", id.ins_minus_del));
        }
    }
    if wants(MetricArg::PixelFlipping) {
        out.push(("pixel_flipping_auc", pixel_flipping_curve(model, x, &norm, c, protocol)?.auc));
    }
    if wants(MetricArg::Infidelity) {
        let inf = infidelity(model, x, &saliency, c, a.perturbations, protocol.patch_size, seed)?;
        out.push(("infidelity", inf.value));
        out.push(("infidelity_scaled", inf.scaled_value));
    }
    if wants(MetricArg::Sensitivity) {
        let s = sensitivity(x, |t| explain(method, model, t, c, opts), a.radius, a.draws, seed)?;
        out.push(("max_sensitivity", s.max));
        out.push(("avg_sensitivity", s.avg));
    }
    if wants(MetricArg::Complexity) {
        out.push(("complexity_entropy", complexity_entropy(&saliency).value));
    }
    if wants(MetricArg::Sparseness) {
        out.push(("sparseness_gini", sparseness_gini(&saliency).value));
    }
    if wants(MetricArg::Localization) {
        let mask = sample
            .mask
            .as_ref()
            .ok_or_else(|| Error::Config("localization needs a dataset with object masks (shapes)".into()))?;
        let l = localization(&saliency, mask, a.top_k)?;
        out.push(("top_k_intersection", l.top_k_intersection));
        out.push(("rank_accuracy", l.rank_accuracy));
        out.push(("mass_accuracy", l.mass_accuracy));
    }
    Ok(out)
}

#[derive(Serialize)]
struct EvaluationReport {
    command: &'static str,
    config: Value,
    reports: Vec<MetricReport>,
}

fn cmd_evaluate(a: EvaluateArgs) -> Result<()> {
    let model = load_model(&a.ckpt)?;
    let pool = eval_pool(&a.dataset, &model)?;
    let picked = subsample(pool.len(), a.samples, a.attribution.seed);
    let [_, h, w] = model.input_shape();
    let protocol = PerturbationProtocol::for_image(h, w, model.meta.channel_mean.clone());
    let opts = a.attribution.options();
    let methods: Vec<Method> = a.methods.iter().map(|&m| m.into()).collect();
    let metric_ids: Vec<String> = a
        .metrics
        .iter()
        .map(|m| m.to_possible_value().map(|v| v.get_name().to_string()).unwrap_or_default())
        .collect();
    let config = json!({
        "checkpoint": model.meta,
        "dataset": a.dataset,
        "samples": picked.len(),
        "sample_indices": picked,
        "methods": methods.iter().map(|m| m.id()).collect::<Vec<_>>(),
        "metrics": metric_ids,
        "perturbations": a.perturbations,
        "sensitivity_draws": a.draws,
        "sensitivity_radius": a.radius,
        "top_k": a.top_k,
        "protocol": protocol,
        "options": opts,
    });

    let mut reports = Vec::new();
    for &method in &methods {
        let rows = picked
            .par_iter()
            .map(|&i| {
                let seed = a.attribution.seed.wrapping_add(i as u64);
                sample_metrics(&model, &pool[i], method, &a, &opts, &protocol, seed)
            })
            .collect::<Result<Vec<_>>>()?;
        let names: Vec<&str> = rows.first().map(|r| r.iter().map(|(n, _)| *n).collect()).unwrap_or_default();
        for (k, name) in names.iter().enumerate() {
            let values = rows.iter().map(|r| r[k].1).collect();
            let cfg = json!({ "method": method.id(), "dataset": a.dataset, "samples": picked.len() });
            reports.push(MetricReport::new(*name, cfg, values, a.attribution.seed));
        }
    }

    if a.out.extension().is_some_and(|e| e == "csv") {
        let mut csv = String::from("method,metric,sample,value\n");
        for r in &reports {
            let method = r.config["method"].as_str().unwrap_or_default();
            for (s, v) in picked.iter().zip(&r.per_sample) {
                csv.push_str(&format!("{method},{},{s},{v}\n", r.metric));
            }
        }
        write_text(&a.out, &csv)?;
    } else {
        let report = EvaluationReport {
            command: "evaluate",
            config,
            reports,
        };
        write_text(&a.out, &serde_json::to_string_pretty(&report)?)?;
    }
    Ok(())
}

fn cmd_saturate(a: SaturateArgs) -> Result<()> {
    let model = load_model(&a.ckpt)?;
    let pool = eval_pool(&a.dataset, &model)?;
    let picked = subsample(pool.len(), a.samples, a.seed);
    let images: Vec<Tensor> = picked.iter().map(|&i| pool[i].image.clone()).collect();
    let layer = model.resolve_target(a.layer.as_deref())?;
    let config = SaturationConfig::new(layer, a.n_alphas, a.seed);
    let report = saturation_report(&model, &images, &config)?;
    if a.out.extension().is_some_and(|e| e == "csv") {
        write_text(&a.out, &report.to_csv())
    } else {
        write_text(&a.out, &report.to_json()?)
    }
}

fn cmd_compare(a: CompareArgs) -> Result<()> {
    let model = load_model(&a.ckpt)?;
    let x = load_image(&a.image, &model)?;
    let class_index = pick_class(&model, &x, a.class_index)?;
    let opts = a.attribution.options();
    let mut panels = vec![x.clone()];
    for &m in &a.methods {
        let saliency = explain(m.into(), &model, &x, class_index, &opts)?;
        panels.push(heatmap_overlay(&saliency, &x)?);
    }
    write_ppm(&hstack(&panels, 2)?, &a.out)
}

/// Concatenates `(3, H, W)` panels left to right with white gutters.
fn hstack(panels: &[Tensor], gutter: usize) -> Result<Tensor> {
    let [c, h, w] = *panels[0].shape() else {
        return Err(Error::Config("panels must be (C,H,W)".into()));
    };
    let total_w = panels.len() * w + (panels.len() - 1) * gutter;
    let mut data = vec![1.0f32; c * h * total_w];
    for (p, panel) in panels.iter().enumerate() {
        let x0 = p * (w + gutter);
        for ch in 0..c {
            for i in 0..h {
                for j in 0..w {
                    data[ch * h * total_w + i * total_w + x0 + j] = panel.data()[ch * h * w + i * w + j];
                }
            }
        }
    }
    Tensor::from_vec(&[c, h, total_w], data)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn subsample_is_seeded_and_sorted() {
        let a = subsample(500, 10, 3);
        assert_eq!(a, subsample(500, 10, 3));
        assert_ne!(a, subsample(500, 10, 4));
        assert!(a.windows(2).all(|w| w[0] < w[1]));
        assert_eq!(subsample(5, 10, 0).len(), 5);
    }

    #[test]
    fn dataset_specs() {
        assert!(matches!(parse_dataset("shapes"), Ok(DatasetSpec::Shapes)));
        assert!(matches!(parse_dataset("cifar10:/x/y.bin"), Ok(DatasetSpec::Cifar10(p)) if p == Path::new("/x/y.bin")));
        assert!(parse_dataset("imagenet").is_err());
    }

    #[test]
    fn hstack_layout() {
        let a = Tensor::zeros(&[3, 2, 2]);
        let s = hstack(&[a.clone(), a], 1).unwrap();
        assert_eq!(s.shape(), &[3, 2, 5]);
        assert_eq!(s.data()[2], 1.0);
        assert_eq!(s.data()[3], 0.0);
    }

    #[test]
    fn usage_errors_exit_one() {
        assert_eq!(run(["camlab", "frobnicate"]), 1);
        assert_eq!(run(["camlab", "explain", "--method", "lime", "--ckpt", "a", "--image", "b", "--out", "c"]), 1);
    }
}
