mod common;

use camlab::attribution::{normalize_saliency, vanilla_gradients, channel_abs_sum, sample_rng};
use camlab::metrics::{insertion_deletion_auc, PerturbationProtocol};
use camlab::model::accuracy;
use camlab::saturation::*;
use camlab::Tensor;
use common::*;
use rand::Rng;

#[test]
fn toy_model_reaches_validation_accuracy() {
    let toy = toy();
    assert!(toy.model.meta.val_accuracy >= 0.95, "val accuracy {}", toy.model.meta.val_accuracy);
    let labeled: Vec<_> = toy.test.iter().map(|s| s.labeled()).collect();
    let acc = accuracy(&toy.model, &labeled).unwrap();
    assert!(acc >= 0.9, "test accuracy {acc}");
}

#[test]
fn gradient_maps_delete_faster_than_random_maps() {
    let toy = toy();
    let proto = PerturbationProtocol::for_image(32, 32, toy.model.meta.channel_mean.clone());
    let mut wins = 0;
    let n = 40;
    for (i, s) in toy.test.iter().take(n).enumerate() {
        let g = channel_abs_sum(&vanilla_gradients(&toy.model, &s.image, s.label).unwrap()).unwrap();
        let mut r = sample_rng(77, i as u64);
        let random = Tensor::from_vec(&[32, 32], (0..1024).map(|_| r.random::<f32>()).collect()).unwrap();
        let grad = insertion_deletion_auc(&toy.model, &s.image, &normalize_saliency(&g), s.label, &proto).unwrap();
        let rand = insertion_deletion_auc(&toy.model, &s.image, &random, s.label, &proto).unwrap();
        if grad.deletion.auc < rand.deletion.auc {
            wins += 1;
        }
    }
    assert!(wins * 10 >= n * 9, "{wins}/{n}");
}

#[test]
fn grid_curves_recompute_on_the_trained_model() {
    let toy = toy();
    let layer = toy.model.default_target_layer().unwrap().to_string();
    let xs: Vec<Tensor> = toy.test.iter().take(5).map(|s| s.image.clone()).collect();
    let mut cfg = SaturationConfig::new(layer.clone(), 11, 0);
    cfg.mode = ScaleMode::Grid;
    let report = saturation_report(&toy.model, &xs, &cfg).unwrap();
    for (x, s) in xs.iter().zip(&report.per_sample) {
        let a1 = toy.model.activations(x, &layer).unwrap();
        for (p, &alpha) in report.alphas.iter().enumerate() {
            let scaled = x.scale(alpha as f32);
            let logits = toy.model.forward(&scaled).unwrap();
            assert_eq!(s.curves[1].values[p], logits.data()[s.class_index] as f64);
            let a = toy.model.activations(&scaled, &layer).unwrap();
            if a.norm() > 0.0 {
                let cos = a.dot(&a1).unwrap() / (a.norm() * a1.norm());
                assert!((s.curves[0].values[p] - cos).abs() < 1e-9);
            }
        }
        assert_eq!(*s.curves[0].values.last().unwrap(), 1.0);
    }
}
