#![allow(dead_code)]

use std::hash::{DefaultHasher, Hash, Hasher};
use std::path::PathBuf;
use std::sync::OnceLock;

use camlab::data::{generate_shapes_dataset, ShapeKind, SyntheticSample};
use camlab::model::{load_checkpoint, save_checkpoint, train_toy, Layer, LayerKind, ModelGraph, TrainConfig};
use camlab::Tensor;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

pub fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

pub fn rand_tensor(shape: &[usize], rng: &mut ChaCha8Rng, scale: f32) -> Tensor {
    let n = shape.iter().product();
    Tensor::from_vec(shape, (0..n).map(|_| rng.random_range(-scale..scale)).collect()).unwrap()
}

pub fn rand_image(shape: &[usize], rng: &mut ChaCha8Rng) -> Tensor {
    let n = shape.iter().product();
    Tensor::from_vec(shape, (0..n).map(|_| rng.random_range(0.0..1.0)).collect()).unwrap()
}

/// `logits = W flatten(x) + b`.
pub fn linear_model(input: [usize; 3], classes: usize, seed: u64) -> (ModelGraph, Tensor) {
    let mut r = rng(seed);
    let d: usize = input.iter().product();
    let w = rand_tensor(&[classes, d], &mut r, 1.0);
    let b = rand_tensor(&[classes], &mut r, 1.0);
    let layers = vec![
        Layer::new("flatten", LayerKind::Flatten, vec![]),
        Layer::new("fc", LayerKind::Dense, vec![w.clone(), b]),
    ];
    (ModelGraph::new(input, classes, layers).unwrap(), w)
}

/// Row `c` of a dense weight matrix reshaped to the input.
pub fn weight_row(w: &Tensor, c: usize, input: [usize; 3]) -> Tensor {
    let d: usize = input.iter().product();
    Tensor::from_vec(&input, w.data()[c * d..(c + 1) * d].to_vec()).unwrap()
}

/// conv-relu-conv-relu-flatten-dense with biases on a small input.
pub fn tiny_cnn(seed: u64) -> ModelGraph {
    let mut r = rng(seed);
    let layers = vec![
        Layer::new(
            "conv1",
            LayerKind::Conv2d { stride: 1, pad: 1 },
            vec![rand_tensor(&[4, 3, 3, 3], &mut r, 0.5), rand_tensor(&[4], &mut r, 0.1)],
        ),
        Layer::new("relu1", LayerKind::Relu, vec![]),
        Layer::new(
            "conv2",
            LayerKind::Conv2d { stride: 1, pad: 1 },
            vec![rand_tensor(&[5, 4, 3, 3], &mut r, 0.4), rand_tensor(&[5], &mut r, 0.1)],
        ),
        Layer::new("relu2", LayerKind::Relu, vec![]),
        Layer::new("flatten", LayerKind::Flatten, vec![]),
        Layer::new(
            "fc",
            LayerKind::Dense,
            vec![rand_tensor(&[3, 5 * 6 * 6], &mut r, 0.2), rand_tensor(&[3], &mut r, 0.1)],
        ),
    ];
    ModelGraph::new([3, 6, 6], 3, layers).unwrap()
}

/// Random graph with at most five layers and at most 4x4 spatial input.
pub fn random_graph(seed: u64) -> ModelGraph {
    let mut r = rng(seed);
    let c = r.random_range(1..=2);
    let side = r.random_range(3..=4);
    let k = r.random_range(1..=3);
    let kernel = r.random_range(2..=3);
    let pad = r.random_range(0..=1);
    let out = side + 2 * pad - kernel + 1;
    let mut layers = vec![
        Layer::new(
            "conv",
            LayerKind::Conv2d { stride: 1, pad },
            vec![rand_tensor(&[k, c, kernel, kernel], &mut r, 1.0), rand_tensor(&[k], &mut r, 0.3)],
        ),
        Layer::new("relu", LayerKind::Relu, vec![]),
    ];
    let features = match r.random_range(0..3) {
        0 if out >= 2 => {
            layers.push(Layer::new("pool", LayerKind::MaxPool2d { size: 2, stride: 2 }, vec![]));
            k * (out / 2) * (out / 2)
        }
        1 => {
            layers.push(Layer::new("gap", LayerKind::GlobalAvgPool, vec![]));
            k
        }
        _ => k * out * out,
    };
    layers.push(Layer::new("flatten", LayerKind::Flatten, vec![]));
    layers.push(Layer::new(
        "fc",
        LayerKind::Dense,
        vec![rand_tensor(&[3, features], &mut r, 1.0), rand_tensor(&[3], &mut r, 0.3)],
    ));
    ModelGraph::new([c, side, side], 3, layers).unwrap()
}

/// Plain `f64` forward pass written independently of the library kernels,
/// returning the output and the discrete activation pattern (ReLU signs and
/// max-pool winners) that fixes the local linear piece.
pub mod reference {
    use camlab::model::{LayerKind, ModelGraph};
    use camlab::Tensor;

    pub struct Value {
        pub shape: Vec<usize>,
        pub data: Vec<f64>,
    }

    pub fn forward(
        model: &ModelGraph,
        x: &[f64],
        params: &[Vec<Vec<f64>>],
        from: usize,
        input_shape: &[usize],
    ) -> (Vec<f64>, Vec<usize>) {
        let mut v = Value {
            shape: input_shape.to_vec(),
            data: x.to_vec(),
        };
        let mut pattern = Vec::new();
        for (i, layer) in model.layers().iter().enumerate().skip(from) {
            let p = &params[i];
            let shapes: Vec<&[usize]> = layer.params.iter().map(Tensor::shape).collect();
            v = match layer.kind {
                LayerKind::Conv2d { stride, pad } => conv(&v, &p[0], shapes[0], &p[1], stride, pad),
                LayerKind::Relu => {
                    pattern.extend(v.data.iter().map(|&a| (a > 0.0) as usize));
                    Value {
                        shape: v.shape.clone(),
                        data: v.data.iter().map(|&a| a.max(0.0)).collect(),
                    }
                }
                LayerKind::MaxPool2d { size, stride } => maxpool(&v, size, stride, &mut pattern),
                LayerKind::Flatten => Value {
                    shape: vec![v.data.len()],
                    data: v.data,
                },
                LayerKind::Dense => {
                    let (o, n) = (shapes[0][0], shapes[0][1]);
                    let data = (0..o)
                        .map(|r| p[1][r] + (0..n).map(|j| p[0][r * n + j] * v.data[j]).sum::<f64>())
                        .collect();
                    Value { shape: vec![o], data }
                }
                LayerKind::GlobalAvgPool => {
                    let (c, plane) = (v.shape[0], v.shape[1] * v.shape[2]);
                    let data = (0..c)
                        .map(|k| v.data[k * plane..(k + 1) * plane].iter().sum::<f64>() / plane as f64)
                        .collect();
                    Value { shape: vec![c], data }
                }
            };
        }
        (v.data, pattern)
    }

    fn conv(v: &Value, w: &[f64], ws: &[usize], b: &[f64], stride: usize, pad: usize) -> Value {
        let (c, h, wd) = (v.shape[0], v.shape[1], v.shape[2]);
        let (k, kh, kw) = (ws[0], ws[2], ws[3]);
        let oh = (h + 2 * pad - kh) / stride + 1;
        let ow = (wd + 2 * pad - kw) / stride + 1;
        let mut out = vec![0.0; k * oh * ow];
        for o in 0..k {
            for i in 0..oh {
                for j in 0..ow {
                    let mut s = b[o];
                    for ci in 0..c {
                        for a in 0..kh {
                            for bb in 0..kw {
                                let y = (i * stride + a) as isize - pad as isize;
                                let x = (j * stride + bb) as isize - pad as isize;
                                if y >= 0 && x >= 0 && (y as usize) < h && (x as usize) < wd {
                                    s += w[((o * c + ci) * kh + a) * kw + bb]
                                        * v.data[(ci * h + y as usize) * wd + x as usize];
                                }
                            }
                        }
                    }
                    out[(o * oh + i) * ow + j] = s;
                }
            }
        }
        Value {
            shape: vec![k, oh, ow],
            data: out,
        }
    }

    fn maxpool(v: &Value, size: usize, stride: usize, pattern: &mut Vec<usize>) -> Value {
        let (c, h, w) = (v.shape[0], v.shape[1], v.shape[2]);
        let oh = (h - size) / stride + 1;
        let ow = (w - size) / stride + 1;
        let mut out = Vec::with_capacity(c * oh * ow);
        for ch in 0..c {
            for i in 0..oh {
                for j in 0..ow {
                    let mut best = f64::NEG_INFINITY;
                    let mut arg = 0;
                    for a in 0..size {
                        for b in 0..size {
                            let val = v.data[(ch * h + i * stride + a) * w + j * stride + b];
                            if val > best {
                                best = val;
                                arg = a * size + b;
                            }
                        }
                    }
                    pattern.push(arg);
                    out.push(best);
                }
            }
        }
        Value {
            shape: vec![c, oh, ow],
            data: out,
        }
    }

    pub fn params_f64(model: &ModelGraph) -> Vec<Vec<Vec<f64>>> {
        model
            .layers()
            .iter()
            .map(|l| l.params.iter().map(|t| t.data().iter().map(|&v| v as f64).collect()).collect())
            .collect()
    }
}

/// Trained toy_vgg on 32x32 shapes plus a held-out test set.
pub struct Toy {
    pub model: ModelGraph,
    pub test: Vec<SyntheticSample>,
}

pub const TOY_TRAIN_SAMPLES: usize = 1200;
pub const TOY_TEST_SEED: u64 = 1007;

fn toy_cache_path() -> PathBuf {
    let mut h = DefaultHasher::new();
    for src in [
        include_str!("../../src/model/train.rs"),
        include_str!("../../src/model/arch.rs"),
        include_str!("../../src/model/mod.rs"),
        include_str!("../../src/model/checkpoint.rs"),
        include_str!("../../src/ops.rs"),
        include_str!("../../src/tape.rs"),
        include_str!("../../src/tensor.rs"),
        include_str!("../../src/data/shapes.rs"),
    ] {
        src.hash(&mut h);
    }
    PathBuf::from(env!("CARGO_TARGET_TMPDIR")).join(format!("toy_vgg_shapes_{:016x}.ckpt", h.finish()))
}

/// toy_vgg trained for 30 epochs with seed 7 on 1200 shapes images. The
/// checkpoint is cached under the target directory, keyed by the sources
/// that influence training.
pub fn toy() -> &'static Toy {
    static TOY: OnceLock<Toy> = OnceLock::new();
    TOY.get_or_init(|| {
        let path = toy_cache_path();
        let model = match load_checkpoint(&path) {
            Ok(m) => m,
            Err(_) => {
                let data = generate_shapes_dataset(TOY_TRAIN_SAMPLES, &ShapeKind::ALL, 32, 32, 7).unwrap();
                let labeled: Vec<_> = data.iter().map(|s| s.labeled()).collect();
                let config = TrainConfig {
                    dataset: format!("shapes:n={TOY_TRAIN_SAMPLES}:size=32:classes=4:seed=7"),
                    ..TrainConfig::default()
                };
                let model = train_toy(&labeled, &config).unwrap();
                let tmp = path.with_extension(format!("tmp{}", std::process::id()));
                save_checkpoint(&model, &tmp).unwrap();
                std::fs::rename(&tmp, &path).unwrap();
                model
            }
        };
        let test = generate_shapes_dataset(100, &ShapeKind::ALL, 32, 32, TOY_TEST_SEED).unwrap();
        Toy { model, test }
    })
}

pub struct FdStats {
    pub max_rel_err: f64,
    pub checked: usize,
    pub skipped: usize,
}

/// Autodiff gradients of one class logit with respect to the input and
/// every parameter, against central differences (`eps = 1e-3`) of the
/// `f64` reference forward. Coordinates whose perturbation changes the
/// activation pattern straddle a kink and are skipped.
pub fn fd_check(model: &ModelGraph, seed: u64) -> FdStats {
    use camlab::ops::Op;
    use camlab::tape::Tape;

    let mut r = rng(seed ^ 0x5eed);
    let shape = model.input_shape();
    let x = rand_tensor(&shape, &mut r, 1.0);
    let class = (seed % model.class_count() as u64) as usize;

    let mut tape = Tape::new();
    let ids: Vec<Vec<_>> = model
        .layers()
        .iter()
        .map(|l| l.params.iter().map(|p| tape.leaf(p.clone(), true)).collect())
        .collect();
    let xid = tape.leaf(x.clone(), true);
    let logits = model.record(&mut tape, xid, 0, Some(&ids)).unwrap();
    let root = tape.apply(Op::Select(class), &[logits]).unwrap();
    let grads = tape.backward(root).unwrap();

    let eps = 1e-3;
    let params = reference::params_f64(model);
    let x64: Vec<f64> = x.data().iter().map(|&v| v as f64).collect();
    let (base_out, base_pattern) = reference::forward(model, &x64, &params, 0, &shape);
    let lib_out = model.forward(&x).unwrap();
    for (a, b) in base_out.iter().zip(lib_out.data()) {
        assert!((a - *b as f64).abs() < 1e-4 * (1.0 + a.abs()), "reference forward disagrees");
    }

    let mut stats = FdStats {
        max_rel_err: 0.0,
        checked: 0,
        skipped: 0,
    };
    let mut compare = |auto: f32, plus: (Vec<f64>, Vec<usize>), minus: (Vec<f64>, Vec<usize>)| {
        if plus.1 != base_pattern || minus.1 != base_pattern {
            stats.skipped += 1;
            return;
        }
        let fd = (plus.0[class] - minus.0[class]) / (2.0 * eps);
        let err = (auto as f64 - fd).abs() / fd.abs().max(1e-6);
        stats.max_rel_err = stats.max_rel_err.max(err);
        stats.checked += 1;
    };

    let gx = grads.get(xid).unwrap();
    for i in 0..x64.len() {
        let mut p = x64.clone();
        p[i] += eps;
        let plus = reference::forward(model, &p, &params, 0, &shape);
        p[i] -= 2.0 * eps;
        let minus = reference::forward(model, &p, &params, 0, &shape);
        compare(gx.data()[i], plus, minus);
    }
    for (li, layer_ids) in ids.iter().enumerate() {
        for (pi, &id) in layer_ids.iter().enumerate() {
            let g = grads.get(id).unwrap();
            for i in 0..g.len() {
                let mut p = params.clone();
                p[li][pi][i] += eps;
                let plus = reference::forward(model, &x64, &p, 0, &shape);
                p[li][pi][i] -= 2.0 * eps;
                let minus = reference::forward(model, &x64, &p, 0, &shape);
                compare(g.data()[i], plus, minus);
            }
        }
    }
    stats
}

/// Integrated Grad-CAM weights computed directly: midpoint-rule mean of
/// the target-layer gradients along the input path, multiplied by the layer
/// difference and spatially averaged, all in `f64`.
pub fn direct_integrated_weights(
    model: &ModelGraph,
    x: &Tensor,
    baseline: &Tensor,
    class: usize,
    layer: &str,
    steps: usize,
) -> Vec<f64> {
    let a_x = model.activations(x, layer).unwrap();
    let a_b = model.activations(baseline, layer).unwrap();
    let mut grad_sum = vec![0.0f64; a_x.len()];
    for i in 0..steps {
        let alpha = ((i as f64 + 0.5) / steps as f64) as f32;
        let point = Tensor::from_vec(
            x.shape(),
            x.data().iter().zip(baseline.data()).map(|(&v, &b)| (1.0 - alpha) * b + alpha * v).collect(),
        )
        .unwrap();
        let a = model.activations(&point, layer).unwrap();
        let (_, g) = model.trace_from(layer, &a, class).unwrap();
        for (s, &v) in grad_sum.iter_mut().zip(g.data()) {
            *s += v as f64;
        }
    }
    let [k, h, w] = *a_x.shape() else { panic!("non-spatial layer") };
    let plane = h * w;
    (0..k)
        .map(|u| {
            (0..plane)
                .map(|p| {
                    let i = u * plane + p;
                    (a_x.data()[i] as f64 - a_b.data()[i] as f64) * grad_sum[i] / steps as f64
                })
                .sum::<f64>()
                / plane as f64
        })
        .collect()
}

/// Spatial mean of the target-layer gradient at `x`.
pub fn direct_gap(model: &ModelGraph, x: &Tensor, class: usize, layer: &str) -> Vec<f64> {
    let tr = model.forward_with_trace(x, class, layer).unwrap();
    let [k, h, w] = *tr.grads.shape() else { panic!("non-spatial layer") };
    (0..k)
        .map(|u| tr.grads.data()[u * h * w..][..h * w].iter().map(|&v| v as f64).sum::<f64>() / (h * w) as f64)
        .collect()
}

pub fn max_abs_diff(a: &[f64], b: &[f64]) -> f64 {
    assert_eq!(a.len(), b.len());
    a.iter().zip(b).map(|(x, y)| (x - y).abs()).fold(0.0, f64::max)
}

/// Step-by-step insertion and deletion AUCs for a map with at most a
/// handful of pixels, one pixel per step: pixels are taken in decreasing
/// saliency (ties by position), every intermediate image is scored with
/// the class probability and the curve is integrated with the trapezoid
/// rule over `k / P`.
pub fn brute_force_insertion_deletion(
    model: &ModelGraph,
    x: &Tensor,
    saliency: &Tensor,
    class: usize,
    blurred: &Tensor,
    removed: &Tensor,
) -> (f64, f64) {
    let p = saliency.len();
    let c = x.shape()[0];
    let mut order: Vec<usize> = Vec::new();
    let mut left: Vec<usize> = (0..p).collect();
    while !left.is_empty() {
        let mut best = 0;
        for (j, &i) in left.iter().enumerate() {
            if saliency.data()[i] > saliency.data()[left[best]] {
                best = j;
            }
        }
        order.push(left.remove(best));
    }
    let curve = |start: &Tensor, target: &Tensor| {
        let mut ys = Vec::new();
        for k in 0..=p {
            let mut img = start.to_vec();
            for &px in &order[..k] {
                for ch in 0..c {
                    img[ch * p + px] = target.data()[ch * p + px];
                }
            }
            let t = Tensor::from_vec(x.shape(), img).unwrap();
            ys.push(model.probabilities(&t).unwrap().data()[class] as f64);
        }
        let mut auc = 0.0;
        for k in 0..p {
            auc += (ys[k] + ys[k + 1]) / 2.0 / p as f64;
        }
        auc
    };
    (curve(blurred, x), curve(x, removed))
}

/// `mean_d (f(x) - f(x - I_d))^2` over the infidelity patches of `seed`.
pub fn direct_zero_infidelity(model: &ModelGraph, x: &Tensor, class: usize, n: usize, patch: usize, seed: u64) -> f64 {
    use camlab::metrics::{infidelity_patch, patch_perturbation};
    let [_, h, w] = *x.shape() else { panic!() };
    let clean = model.class_score(x, class).unwrap() as f64;
    let mut total = 0.0;
    for d in 0..n {
        let pert = patch_perturbation(x, infidelity_patch(h, w, patch, seed, d)).unwrap();
        let after = model.class_score(&x.sub(&pert).unwrap(), class).unwrap() as f64;
        total += (clean - after).powi(2);
    }
    total / n as f64
}

/// Runs the `camlab` binary; returns exit code, stdout and stderr.
pub fn camlab(args: &[&str]) -> (i32, String, String) {
    let out = std::process::Command::new(env!("CARGO_BIN_EXE_camlab"))
        .args(args)
        .output()
        .expect("spawn camlab");
    (
        out.status.code().unwrap_or(-1),
        String::from_utf8_lossy(&out.stdout).into_owned(),
        String::from_utf8_lossy(&out.stderr).into_owned(),
    )
}

pub fn path_str(p: &std::path::Path) -> &str {
    p.to_str().unwrap()
}
