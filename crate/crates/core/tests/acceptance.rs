//! Acceptance suite. Each test prints one pass/fail line; run with
//! `cargo test -p derain-core --test acceptance -- --nocapture` to see
//! them. Criterion 2 trains the full desk-scale model and takes several
//! minutes; everything else is fast.

use std::panic::{catch_unwind, AssertUnwindSafe};
use std::time::Instant;

use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use derain_core::corruption::{render_scene, sample_droplet_field, synthesize_dataset, SceneSpec};
use derain_core::data::{split_indices, AlignedPair, DatasetSplit};
use derain_core::evaluation::{
    build_detector, evaluate_model, restoration_scores, DetectorSpec, TrioCounts,
};
use derain_core::networks::{
    build_generator, generator_forward, Discriminator, DiscriminatorConfig, Generator,
    GeneratorConfig,
};
use derain_core::training::{
    self, check, detect_overfit, discriminator_loss, train_step, Checkpoint, EpochMetrics,
    TrainCallback, TrainConfig, TrainState,
};
use derain_core::RasterImage;

fn criterion<F: FnOnce()>(number: usize, name: &str, body: F) {
    let result = catch_unwind(AssertUnwindSafe(body));
    let verdict = if result.is_ok() { "PASS" } else { "FAIL" };
    println!("[acceptance] criterion {number} ({name}): {verdict}");
    if let Err(payload) = result {
        std::panic::resume_unwind(payload);
    }
}

// --- criterion 1 -----------------------------------------------------

/// Independent recomputation: collect included ratios into vectors and
/// average them, excluding zero-clear trios.
fn brute_force_scores(counts: &[TrioCounts]) -> Option<(f64, f64, usize, usize)> {
    let mut input_ratios = Vec::new();
    let mut predicted_ratios = Vec::new();
    let mut skipped = 0usize;
    for c in counts {
        if c.n_clear == 0 {
            skipped += 1;
        } else {
            input_ratios.push(c.n_distorted as f64 / c.n_clear as f64);
            predicted_ratios.push(c.n_predicted as f64 / c.n_clear as f64);
        }
    }
    if input_ratios.is_empty() {
        return None;
    }
    let mean = |v: &[f64]| v.iter().sum::<f64>() / v.len() as f64;
    Some((
        mean(&input_ratios),
        mean(&predicted_ratios),
        input_ratios.len(),
        skipped,
    ))
}

#[test]
fn acceptance_1_metric_oracle_equivalence() {
    criterion(1, "metric oracle equivalence", || {
        let start = Instant::now();
        let mut rng = ChaCha8Rng::seed_from_u64(0xACCE);
        let mut checked = 0usize;
        while checked < 120 {
            let len = rng.gen_range(1..=50);
            let counts: Vec<TrioCounts> = (0..len)
                .map(|i| TrioCounts {
                    id: format!("t{i}"),
                    n_clear: rng.gen_range(0..=20),
                    n_distorted: rng.gen_range(0..=20),
                    n_predicted: rng.gen_range(0..=20),
                })
                .collect();
            match (restoration_scores(&counts), brute_force_scores(&counts)) {
                (Ok(scores), Some((t1, t2, m, s))) => {
                    assert!((scores.term1 - t1).abs() < 1e-12);
                    assert!((scores.term2 - t2).abs() < 1e-12);
                    assert_eq!(scores.m_effective, m);
                    assert_eq!(scores.skipped, s);
                    checked += 1;
                }
                (Err(_), None) => {} // both paths exclude the all-zero case
                (got, want) => panic!("oracle disagreement: {got:?} vs {want:?}"),
            }
        }
        let elapsed = start.elapsed();
        assert!(
            elapsed.as_secs_f64() < 1.0,
            "metric oracle check took {elapsed:?}"
        );
    });
}

// --- criterion 2 -----------------------------------------------------

const ACCEPT_DIMS: (u32, u32) = (64, 64);
const ACCEPT_DENSITY: f64 = 5000.0;
const ACCEPT_SEED: u64 = 4242;
const ACCEPT_EPOCHS: usize = 30;

struct QuietProgress;
impl TrainCallback for QuietProgress {
    fn on_epoch(&mut self, m: &EpochMetrics) {
        eprintln!(
            "  [acceptance 2] epoch {:2}: train_l1 {:.4} val_l1 {:.4}",
            m.epoch, m.train_l1, m.val_l1
        );
    }
}

#[test]
fn acceptance_2_desk_scale_end_to_end() {
    criterion(2, "desk-scale end-to-end restoration", || {
        let items = synthesize_dataset(260, ACCEPT_DIMS, ACCEPT_DENSITY, ACCEPT_SEED).unwrap();
        let pairs: Vec<AlignedPair> = items.into_iter().map(|(p, _)| p).collect();
        let split = DatasetSplit {
            train: pairs[..200].to_vec(),
            validation: pairs[200..220].to_vec(),
            test: pairs[220..260].to_vec(),
        };
        let spec = DetectorSpec::oracle();

        // Tuned corruption really does suppress detection on raw inputs.
        let detector = build_detector(&spec).unwrap();
        let raw_counts: Vec<TrioCounts> = split
            .test
            .iter()
            .map(|p| {
                let trio = derain_core::data::EvaluationTrio::new(
                    p.id.clone(),
                    p.distorted.clone(),
                    p.distorted.clone(),
                    p.clear.clone(),
                )
                .unwrap();
                derain_core::evaluation::count_trio_with(detector.as_ref(), &trio).unwrap()
            })
            .collect();
        let raw = restoration_scores(&raw_counts).unwrap();
        assert!(
            raw.term1 <= 0.4,
            "raw-input term1 {} exceeds 0.4; corruption mistuned",
            raw.term1
        );

        let gen_cfg = GeneratorConfig {
            base_channels: 8,
            depth: 3,
            input_dims: ACCEPT_DIMS,
            dropout: false,
        };
        let disc_cfg = DiscriminatorConfig::new(8, 2);
        let config = TrainConfig {
            epochs: ACCEPT_EPOCHS,
            seed: ACCEPT_SEED,
            ..TrainConfig::default()
        };
        let ckpt_dir = tempfile::tempdir().unwrap();
        let (final_ckpt, history) = training::train(
            &gen_cfg,
            &disc_cfg,
            &config,
            &split,
            &mut QuietProgress,
            Some(ckpt_dir.path()),
        )
        .unwrap();
        assert_eq!(history.len(), ACCEPT_EPOCHS);

        // Evaluate the best epoch by validation L1, as the training
        // command does.
        let report = detect_overfit(&history, 3);
        let best_path = ckpt_dir
            .path()
            .join(format!("ckpt_ep{:03}.dkpt", report.best_epoch + 1));
        let best_ckpt = Checkpoint::load(&best_path).unwrap();
        let outcome = evaluate_model(&best_ckpt, &split.test, &spec).unwrap();
        eprintln!(
            "  [acceptance 2] best epoch {}, term1 {:.3} term2 {:.3}, \
             L1 predicted {:.4} vs input {:.4}",
            report.best_epoch,
            outcome.scores.term1,
            outcome.scores.term2,
            outcome.mean_l1_predicted,
            outcome.mean_l1_input
        );

        assert!(
            outcome.scores.term2 >= outcome.scores.term1 + 0.3,
            "restoration gap too small: term1 {} term2 {}",
            outcome.scores.term1,
            outcome.scores.term2
        );
        assert!(
            outcome.mean_l1_predicted < outcome.mean_l1_input,
            "predicted L1 {} not below input L1 {}",
            outcome.mean_l1_predicted,
            outcome.mean_l1_input
        );

        // Trained validation L1 beats the identity baseline
        // (predicted := input).
        let identity_val_l1: f64 = split
            .validation
            .iter()
            .map(|p| p.distorted.mean_abs_diff(&p.clear))
            .sum::<f64>()
            / split.validation.len() as f64;
        let best_val_l1 = history[report.best_epoch].val_l1;
        assert!(
            best_val_l1 < identity_val_l1,
            "validation L1 {best_val_l1} not below identity baseline {identity_val_l1}"
        );

        let _ = final_ckpt;
    });
}

// --- criterion 3 -----------------------------------------------------

#[test]
fn acceptance_3_overfit_one_sanity() {
    criterion(3, "overfit-one sanity", || {
        let items = synthesize_dataset(1, ACCEPT_DIMS, ACCEPT_DENSITY, 31).unwrap();
        let pair = items[0].0.clone();
        let gen_cfg = GeneratorConfig {
            base_channels: 8,
            depth: 3,
            input_dims: ACCEPT_DIMS,
            dropout: false,
        };
        let disc_cfg = DiscriminatorConfig::new(8, 2);
        let config = TrainConfig {
            epochs: 1,
            seed: 7,
            ..TrainConfig::default()
        };
        let mut state = TrainState::new(&gen_cfg, &disc_cfg, &config).unwrap();
        for _ in 0..500 {
            train_step(&mut state, &[&pair]).unwrap();
        }
        let predicted = state.generator.forward_infer(pair.distorted.flat());
        let err: f64 = predicted
            .iter()
            .zip(pair.clear.flat())
            .map(|(a, b)| (a - b).abs())
            .sum::<f64>()
            / predicted.len() as f64;
        eprintln!("  [acceptance 3] reconstruction error after 500 steps: {err:.4}");
        assert!(err < 0.05, "reconstruction error {err} >= 0.05");
    });
}

// --- criterion 4 -----------------------------------------------------

fn random_pair(rng: &mut ChaCha8Rng, dims: u32) -> AlignedPair {
    let mut image = |salt: u64| {
        let mut local = ChaCha8Rng::seed_from_u64(rng.gen::<u64>() ^ salt);
        let n = 3 * (dims * dims) as usize;
        let values: Vec<f64> = (0..n).map(|_| local.gen_range(0.05..0.95)).collect();
        RasterImage::from_flat(dims, dims, values).unwrap()
    };
    AlignedPair::new("g".into(), image(1), image(2)).unwrap()
}

fn assert_grad_close(name: &str, idx: usize, analytic: f64, fd: f64) {
    let scale = analytic.abs().max(fd.abs());
    if scale < 1e-2 {
        assert!(
            (analytic - fd).abs() < 1e-5,
            "{name}[{idx}]: analytic {analytic} vs fd {fd} (absolute)"
        );
    } else {
        assert!(
            (analytic - fd).abs() / scale < 1e-3,
            "{name}[{idx}]: analytic {analytic} vs fd {fd} (relative)"
        );
    }
}

#[test]
fn acceptance_4_gradient_check() {
    criterion(4, "finite-difference gradient check", || {
        let l1_weight = TrainConfig::default().l1_weight;
        let h = 1e-6;
        for draw in 0..5u64 {
            let mut rng = ChaCha8Rng::seed_from_u64(1000 + draw);
            let gen_cfg = GeneratorConfig {
                base_channels: 4,
                depth: 2,
                input_dims: (8, 8),
                dropout: false,
            };
            let disc_cfg = DiscriminatorConfig::new(4, 1);
            let mut generator = Generator::init(gen_cfg, rng.gen()).unwrap();
            let mut discriminator = Discriminator::init(disc_cfg, rng.gen()).unwrap();
            let pair = random_pair(&mut rng, 8);

            // Generator parameters against the total generator loss.
            let (_, gen_grads) =
                check::generator_grads(&mut generator, &mut discriminator, &pair, l1_weight);
            let names = generator.param_names();
            for (pi, grads) in gen_grads.iter().enumerate() {
                for (gi, &analytic) in grads.iter().enumerate() {
                    let mut probe = |delta: f64| {
                        let mut pairs = generator.param_grad_pairs();
                        pairs[pi].0[gi] += delta;
                        drop(pairs);
                        let loss = check::generator_total_loss(
                            &generator,
                            &discriminator,
                            &pair,
                            l1_weight,
                        );
                        let mut pairs = generator.param_grad_pairs();
                        pairs[pi].0[gi] -= delta;
                        loss
                    };
                    let fd = (probe(h) - probe(-h)) / (2.0 * h);
                    assert_grad_close(&format!("draw {draw} gen {}", names[pi]), gi, analytic, fd);
                }
            }

            // Discriminator parameters against the discriminator loss.
            let (_, disc_grads) =
                check::discriminator_grads(&mut discriminator, &generator, &pair);
            let names = discriminator.param_names();
            for (pi, grads) in disc_grads.iter().enumerate() {
                for (gi, &analytic) in grads.iter().enumerate() {
                    let mut probe = |delta: f64| {
                        let mut pairs = discriminator.param_grad_pairs();
                        pairs[pi].0[gi] += delta;
                        drop(pairs);
                        let loss = check::discriminator_total_loss(
                            &discriminator,
                            &generator,
                            &pair,
                        );
                        let mut pairs = discriminator.param_grad_pairs();
                        pairs[pi].0[gi] -= delta;
                        loss
                    };
                    let fd = (probe(h) - probe(-h)) / (2.0 * h);
                    assert_grad_close(
                        &format!("draw {draw} disc {}", names[pi]),
                        gi,
                        analytic,
                        fd,
                    );
                }
            }
        }
    });
}

// --- criterion 5 -----------------------------------------------------

#[test]
fn acceptance_5_invariant_suite() {
    criterion(5, "invariant suite", || {
        // Corruption locality, bitwise outside the support union.
        let img = RasterImage::from_fn(48, 48, |c, x, y| {
            0.1 + 0.8 * (((c as u32 + 1) * (x + 2 * y)) % 90) as f64 / 89.0
        })
        .unwrap();
        let field = sample_droplet_field((48, 48), 2500.0, 11);
        assert!(!field.is_empty());
        let corrupted = derain_core::corruption::apply_corruption(&img, &field);
        let mask = field.support_mask(48, 48);
        for y in 0..48u32 {
            for x in 0..48u32 {
                if !mask[[y as usize, x as usize]] {
                    for c in 0..3 {
                        assert_eq!(
                            corrupted.get(c, x, y).to_bits(),
                            img.get(c, x, y).to_bits(),
                            "pixel ({x},{y}) changed outside support"
                        );
                    }
                }
            }
        }

        // Generator shape and range preservation.
        let gen = build_generator(&GeneratorConfig::new(4, 2, (16, 16)), 3).unwrap();
        let input = RasterImage::from_fn(16, 16, |c, x, y| {
            ((c as u32 + x * 3 + y * 5) % 16) as f64 / 15.0
        })
        .unwrap();
        let out = generator_forward(&gen, &input).unwrap();
        assert_eq!(out.dims(), input.dims());
        for v in out.planes().iter() {
            assert!(v.is_finite() && (0.0..=1.0).contains(v));
        }

        // Loss finiteness across the +/-80 logit range.
        for real in [-80.0, -37.5, 0.0, 37.5, 80.0] {
            for fake in [-80.0, -1.0, 0.0, 1.0, 80.0] {
                let r = ndarray::Array2::from_elem((3, 3), real);
                let f = ndarray::Array2::from_elem((3, 3), fake);
                let loss = discriminator_loss(&r, &f).unwrap();
                assert!(loss.is_finite() && loss >= 0.0, "r={real} f={fake}");
            }
        }

        // Checkpoint round-trip, byte-exact.
        let gen_cfg = GeneratorConfig::new(4, 2, (16, 16));
        let disc_cfg = DiscriminatorConfig::new(4, 1);
        let config = TrainConfig {
            epochs: 1,
            seed: 9,
            ..TrainConfig::default()
        };
        let mut state = TrainState::new(&gen_cfg, &disc_cfg, &config).unwrap();
        let pair = AlignedPair::new(
            "p".into(),
            RasterImage::filled(16, 16, 0.3).unwrap(),
            RasterImage::filled(16, 16, 0.7).unwrap(),
        )
        .unwrap();
        train_step(&mut state, &[&pair]).unwrap();
        let dir = tempfile::tempdir().unwrap();
        let p1 = dir.path().join("one.dkpt");
        let p2 = dir.path().join("two.dkpt");
        state.to_checkpoint().save(&p1).unwrap();
        Checkpoint::load(&p1).unwrap().save(&p2).unwrap();
        assert_eq!(std::fs::read(&p1).unwrap(), std::fs::read(&p2).unwrap());

        // Split and synthesis determinism under fixed seeds.
        assert_eq!(
            split_indices(1000, (800, 100, 100), 77).unwrap(),
            split_indices(1000, (800, 100, 100), 77).unwrap()
        );
        let a = synthesize_dataset(5, (64, 64), 2000.0, 123).unwrap();
        let b = synthesize_dataset(5, (64, 64), 2000.0, 123).unwrap();
        for ((pa, ga), (pb, gb)) in a.iter().zip(b.iter()) {
            assert!(pa.distorted.pixels_equal(&pb.distorted));
            assert!(pa.clear.pixels_equal(&pb.clear));
            assert_eq!(ga, gb);
        }
    });
}

// --- criterion 6 -----------------------------------------------------

#[test]
fn acceptance_6_detector_oracle_closure() {
    criterion(6, "detector oracle closure", || {
        let detector = build_detector(&DetectorSpec::oracle()).unwrap();
        for seed in 1000..1050u64 {
            let car_count = 1 + (seed % 3) as u32;
            let (img, gt) =
                render_scene(&SceneSpec::new(car_count, "road", seed), (64, 64)).unwrap();
            let detections = detector.detect(&img).unwrap();
            assert_eq!(
                detections.len(),
                gt.boxes.len(),
                "seed {seed}: {} detections vs {} cars",
                detections.len(),
                gt.boxes.len()
            );
        }
    });
}

// --- criterion 7 -----------------------------------------------------

#[test]
fn acceptance_7_overfit_detection_rule() {
    criterion(7, "overfit detection rule", || {
        let vals = [0.3, 0.2, 0.25, 0.3, 0.35];
        let trains = [0.9, 0.7, 0.5, 0.3, 0.1];
        let history: Vec<EpochMetrics> = vals
            .iter()
            .zip(&trains)
            .enumerate()
            .map(|(epoch, (&val_l1, &train_l1))| EpochMetrics {
                epoch,
                d_loss: 0.6,
                g_adv: 0.7,
                train_l1,
                val_l1,
            })
            .collect();
        let report = detect_overfit(&history, 2);
        assert_eq!(report.best_epoch, 1);
        assert_eq!(report.overfit_at, Some(3));
    });
}
