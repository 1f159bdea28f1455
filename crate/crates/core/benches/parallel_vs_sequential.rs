use criterion::{criterion_group, criterion_main, BenchmarkId, Criterion};

use transcript_core::crnn::{forward_batch, preprocess_cell, ModelWeights};
use transcript_core::gridparse::{extract_line_masks, hough_lines_with, template_match_ncc_with};
use transcript_core::pipeline::{anchor_template, font::render_text, render_transcript, synth_config, SynthParams};
use transcript_core::preprocess::{binarize, estimate_skew, gaussian_blur, otsu_threshold, DeskewParams};
use transcript_core::raster::GrayImage;
use transcript_core::ExecMode;

const MODES: [(&str, ExecMode); 2] = [("sequential", ExecMode::Sequential), ("parallel", ExecMode::Parallel)];

fn page(skew: f64) -> GrayImage {
    render_transcript(&SynthParams {
        seed: 11,
        rows: 30,
        skew_deg: skew,
        noise_sigma: 4.0,
    })
    .unwrap()
    .image
}

fn bench_layout(c: &mut Criterion) {
    let img = page(2.5);
    let blurred = gaussian_blur(&img, 1.0, 2).unwrap();
    let bin = binarize(&blurred, otsu_threshold(&blurred));
    let (_, vmask) = extract_line_masks(&bin, 0.5, 0.25).unwrap();
    let config = synth_config();

    let mut g = c.benchmark_group("deskew");
    g.sample_size(10);
    for (name, mode) in MODES {
        g.bench_with_input(BenchmarkId::from_parameter(name), &mode, |b, &m| {
            b.iter(|| estimate_skew(&bin, DeskewParams::default(), m).unwrap())
        });
    }
    g.finish();

    let mut g = c.benchmark_group("hough_vertical");
    g.sample_size(10);
    for (name, mode) in MODES {
        g.bench_with_input(BenchmarkId::from_parameter(name), &mode, |b, &m| {
            b.iter(|| hough_lines_with(&vmask, &config.hough_params(0.0), m).unwrap())
        });
    }
    g.finish();

    let header = img.crop(0, 0, img.width(), 100).unwrap();
    let anchor = anchor_template();
    let mut g = c.benchmark_group("ncc_anchor");
    g.sample_size(10);
    for (name, mode) in MODES {
        g.bench_with_input(BenchmarkId::from_parameter(name), &mode, |b, &m| {
            b.iter(|| template_match_ncc_with(&header, &anchor, m).unwrap())
        });
    }
    g.finish();
}

fn bench_forward(c: &mut Criterion) {
    let w = ModelWeights::seeded(3);
    let inputs: Vec<_> = ["20181234", "8.5", "10", "7,25", "123456", "9", "4.75", "20210042"]
        .iter()
        .map(|t| {
            let glyphs = render_text(t, 3);
            let mut cell = GrayImage::filled(glyphs.width() + 12, 32, 255);
            cell.paste(&glyphs, 6, 5);
            preprocess_cell(&cell).unwrap()
        })
        .collect();
    let mut g = c.benchmark_group("forward_batch_8");
    g.sample_size(10);
    for (name, mode) in MODES {
        g.bench_with_input(BenchmarkId::from_parameter(name), &mode, |b, &m| b.iter(|| forward_batch(&w, &inputs, m)));
    }
    g.finish();
}

criterion_group!(benches, bench_layout, bench_forward);
criterion_main!(benches);
