use panosplat::baseline3d::{render_baseline, Scene3D};
use panosplat::experiment::{evaluate_frames, initial_scene, preset, render_frame, training_frames};
use panosplat::lidario::{read_checkpoint, synth_generate, write_checkpoint, Checkpoint, OptimizerSnapshot};
use panosplat::metrics::{FrameMetrics, MetricsConfig};
use panosplat::optim::{IterationLog, Trainer};
use panosplat::raster::render;

fn smoke_run(iterations: usize) -> (Vec<IterationLog>, Trainer) {
    let mut cfg = preset("smoke").unwrap();
    cfg.train.iterations = iterations;
    let sensor = cfg.scene.sensor.model().unwrap();
    let frames = synth_generate(&cfg.scene).unwrap();
    let (train, _) = cfg.holdout.split(frames.len());
    let train: Vec<_> = train.iter().map(|&k| frames[k].clone()).collect();
    let tf = training_frames(&train, &sensor).unwrap();
    let mut trainer = Trainer::new(initial_scene(&train, &sensor, &cfg.init).unwrap(), &tf, cfg.train).unwrap();
    let mut logs = Vec::new();
    trainer
        .run(&tf, |l| {
            logs.push(l.clone());
            Ok(())
        })
        .unwrap();
    (logs, trainer)
}

#[test]
fn smoke_training_lowers_the_loss_and_stays_finite() {
    let (logs, trainer) = smoke_run(50);
    assert_eq!(logs.len(), 50);
    assert!(logs.iter().all(|l| l.total.is_finite()));
    let head: f64 = logs[..5].iter().map(|l| l.total).sum();
    let tail: f64 = logs[45..].iter().map(|l| l.total).sum();
    assert!(tail < head, "loss went from {head} to {tail}");
    for p in &trainer.scene.primitives {
        assert!(p.to_params().iter().all(|x| x.is_finite()));
        assert!((p.tu.norm() - 1.0).abs() < 1e-9 && (p.tv.norm() - 1.0).abs() < 1e-9 && p.tu.dot(&p.tv).abs() < 1e-9);
    }
}

#[test]
fn checkpoint_bytes_survive_a_round_trip_after_training() {
    let (_, trainer) = smoke_run(10);
    let ck =
        Checkpoint { scene: trainer.scene.clone(), optimizer: Some(OptimizerSnapshot { iteration: trainer.iteration as u64, adam: trainer.adam.clone() }) };
    let mut bytes = Vec::new();
    write_checkpoint(&mut bytes, &ck).unwrap();
    let back = read_checkpoint(&mut bytes.as_slice()).unwrap();
    let mut again = Vec::new();
    write_checkpoint(&mut again, &back).unwrap();
    assert_eq!(bytes, again);
    assert_eq!(back.scene, trainer.scene);
}

#[test]
fn trained_scene_renders_on_both_paths_and_evaluates() {
    let cfg = preset("smoke").unwrap();
    let sensor = cfg.scene.sensor.model().unwrap();
    let frames = synth_generate(&cfg.scene).unwrap();
    let (_, trainer) = smoke_run(50);
    let f = &frames[5];
    let exact = render(&trainer.scene, f.timestamp, &sensor, &f.pose, &cfg.train.raster).unwrap();
    let base = render_baseline(&Scene3D::from_scene(&trainer.scene, f.timestamp), &sensor, &f.pose, &cfg.train.raster).unwrap();
    assert_eq!((exact.width, exact.height), (base.width, base.height));
    assert!(exact.accum_alpha.iter().chain(&base.accum_alpha).all(|a| (0.0..=1.0).contains(a)));

    let rendered = render_frame(&trainer.scene, &sensor, &f.pose, f.timestamp, &cfg.train.raster, &cfg.render).unwrap();
    assert_eq!(rendered.timestamp, f.timestamp);
    let per = evaluate_frames(&trainer.scene, &frames[5..6], &sensor, &cfg.train.raster, &cfg.render, &MetricsConfig::default()).unwrap();
    let m = FrameMetrics::mean(&per).unwrap();
    assert!((0.0..=1.0).contains(&m.drop_accuracy));
    assert!((0.0..=1.0).contains(&m.fscore));
}
