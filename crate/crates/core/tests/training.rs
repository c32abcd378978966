//! Seeded end-to-end training runs on a short synthetic series.

use piconvae_core::model::{checkpoint, train, ModelConfig, PiConvAe, StopReason};
use piconvae_core::neural::Tensor;
use piconvae_core::telemetry::{generate_synthetic, windowize_rows, GeneratorConfig, CHANNELS};

fn setup(cfg: ModelConfig) -> (PiConvAe, piconvae_core::telemetry::WindowBatch, piconvae_core::telemetry::WindowBatch) {
    let s = generate_synthetic(&GeneratorConfig {
        length: 2000,
        ..GeneratorConfig::default()
    })
    .unwrap();
    let s = s.clone().fit_minmax(s.train_range()).unwrap();
    let mm = *s.minmax().unwrap();
    let n = s.apply_minmax().unwrap();
    let tr = windowize_rows(&n.rows(n.train_range()), 16, 1).unwrap();
    let va = windowize_rows(&n.rows(n.val_range()), 16, 1).unwrap();
    (PiConvAe::new(cfg).unwrap().with_minmax(mm).unwrap(), tr, va)
}

#[test]
fn patience_stops_early_and_restores_the_best_epoch() {
    let cfg = ModelConfig {
        enc_filters: [16, 8],
        epochs: 1000,
        steps_per_epoch: Some(4),
        ..ModelConfig::default()
    };
    let (mut model, tr, va) = setup(cfg);
    let report = train(&mut model, &tr, &va).unwrap();
    assert_eq!(report.stop_reason, StopReason::Patience);
    assert!(report.epochs.len() < 1000);
    let best = report.best().unwrap();
    assert!(best.val.total < report.epochs[0].val.total);
    // the 20 epochs after the best never improved on it
    assert_eq!(report.epochs.len(), best.epoch + 20);

    let batch = Tensor::new(vec![va.count(), 16, CHANNELS], va.data().to_vec()).unwrap();
    let xhat = model.reconstruct(&batch).unwrap();
    let again = piconvae_core::model::loss_total(&batch, &xhat, &model).unwrap();
    assert!((again.total - best.val.total).abs() <= 1e-9 * best.val.total);
}

#[test]
fn checkpoint_resumes_to_the_same_outputs() {
    let cfg = ModelConfig {
        enc_filters: [8, 4],
        epochs: 3,
        steps_per_epoch: Some(3),
        ..ModelConfig::default()
    };
    let (mut model, tr, va) = setup(cfg);
    train(&mut model, &tr, &va).unwrap();
    let loaded = checkpoint::decode(&checkpoint::encode(&model)).unwrap();
    assert_eq!(loaded, model);
    let batch = Tensor::new(vec![4, 16, CHANNELS], va.data()[..4 * 16 * CHANNELS].to_vec()).unwrap();
    assert_eq!(loaded.reconstruct(&batch).unwrap(), model.reconstruct(&batch).unwrap());
}
