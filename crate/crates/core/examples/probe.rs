use std::collections::BTreeMap;
use std::time::Instant;
use derain_core::corruption::synthesize_dataset;
use derain_core::data::{AlignedPair, DatasetSplit};
use derain_core::evaluation::{evaluate_model, DetectorSpec};
use derain_core::networks::{generator_forward, DiscriminatorConfig, GeneratorConfig};
use derain_core::training::{self, detect_overfit, Checkpoint, TrainConfig, TrainCallback, EpochMetrics};
use derain_core::corruption::glyph::{luminance_template, glyph_height, TEMPLATE_WIDTHS};
use derain_core::RasterImage;

struct Quiet;
impl TrainCallback for Quiet {
    fn on_epoch(&mut self, m: &EpochMetrics) {
        if m.epoch % 10 == 9 { eprintln!("  ep {:2} val {:.4}", m.epoch, m.val_l1); }
    }
}

/// Best NCC over positions near a GT box, across template widths.
fn best_ncc_near(img: &RasterImage, bx: u32, by: u32) -> f64 {
    let lum = img.luminance_plane();
    let (ih, iw) = lum.dim();
    let mut best = -1.0f64;
    for width in TEMPLATE_WIDTHS {
        let tpl = luminance_template(width);
        let (th, tw) = (glyph_height(width) as usize, width as usize);
        let n = (th * tw) as f64;
        let t_mean = tpl.sum() / n;
        let tc: Vec<f64> = tpl.iter().map(|v| v - t_mean).collect();
        let t_norm = tc.iter().map(|v| v * v).sum::<f64>().sqrt();
        for dy in -3i64..=3 {
            for dx in -3i64..=3 {
                let y0 = by as i64 + dy;
                let x0 = bx as i64 + dx;
                if y0 < 0 || x0 < 0 || y0 as usize + th > ih || x0 as usize + tw > iw { continue; }
                let (y0, x0) = (y0 as usize, x0 as usize);
                let mut sum = 0.0; let mut sq = 0.0; let mut dot = 0.0;
                for ty in 0..th { for tx in 0..tw {
                    let v = lum[[y0 + ty, x0 + tx]];
                    sum += v; sq += v * v;
                }}
                let mean = sum / n;
                let var = (sq / n - mean * mean).max(0.0);
                if var <= 0.0 { continue; }
                for ty in 0..th { for tx in 0..tw {
                    dot += (lum[[y0 + ty, x0 + tx]] - mean) * tc[ty * tw + tx];
                }}
                let ncc = dot / ((var * n).sqrt() * t_norm);
                best = best.max(ncc);
            }
        }
    }
    best
}

fn main() {
    let density = 6000.0;
    let seed = 4242u64;
    let items = synthesize_dataset(260, (64, 64), density, seed).unwrap();
    let gts: Vec<_> = items.iter().map(|(_, g)| g.clone()).collect();
    let pairs: Vec<AlignedPair> = items.into_iter().map(|(p, _)| p).collect();
    let split = DatasetSplit {
        train: pairs[..200].to_vec(),
        validation: pairs[200..220].to_vec(),
        test: pairs[220..260].to_vec(),
    };
    let gen_cfg = GeneratorConfig { base_channels: 8, depth: 3, input_dims: (64, 64), dropout: false };
    let disc_cfg = DiscriminatorConfig::new(8, 1);  // weaker patch D
    let config = TrainConfig { epochs: 30, seed, ..TrainConfig::default() };
    let t0 = Instant::now();
    let dir = tempfile::tempdir().unwrap();
    let (_, history) = training::train(&gen_cfg, &disc_cfg, &config, &split, &mut Quiet, Some(dir.path())).unwrap();
    eprintln!("train {:.0}s", t0.elapsed().as_secs_f64());
    let report = detect_overfit(&history, 3);
    eprintln!("best epoch {}", report.best_epoch);
    let best = Checkpoint::load(&dir.path().join(format!("ckpt_ep{:03}.dkpt", report.best_epoch + 1))).unwrap();

    // Response distributions at GT boxes: raw inputs vs predictions.
    let mut raw_responses = Vec::new();
    let mut pred_responses = Vec::new();
    for (i, p) in split.test.iter().enumerate() {
        let gt = &gts[220 + i];
        let pred = generator_forward(&best.generator, &p.distorted).unwrap();
        for b in &gt.boxes {
            raw_responses.push(best_ncc_near(&p.distorted, b.x, b.y));
            pred_responses.push(best_ncc_near(&pred, b.x, b.y));
        }
    }
    let hist = |v: &[f64]| -> String {
        let mut bins = [0usize; 10];
        for &x in v { bins[((x.max(0.0) * 10.0) as usize).min(9)] += 1; }
        bins.iter().enumerate().map(|(i, c)| format!("{:.1}:{c:3}", i as f64 / 10.0)).collect::<Vec<_>>().join(" ")
    };
    println!("raw NCC at boxes : {}", hist(&raw_responses));
    println!("pred NCC at boxes: {}", hist(&pred_responses));

    for thr in [0.78, 0.80, 0.82, 0.85] {
        let mut params = BTreeMap::new();
        params.insert("threshold".to_string(), format!("{thr}"));
        let spec = DetectorSpec { kind: "oracle".into(), parameters: params };
        let o = evaluate_model(&best, &split.test, &spec).unwrap();
        println!("thr {thr:.2}: term1 {:.3} term2 {:.3} gap {:.3} skipped {} l1 {:.4}/{:.4}",
            o.scores.term1, o.scores.term2, o.scores.term2 - o.scores.term1,
            o.scores.skipped, o.mean_l1_predicted, o.mean_l1_input);
    }
}
