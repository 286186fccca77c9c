use std::path::PathBuf;

use criterion::{black_box, criterion_group, criterion_main, BenchmarkId, Criterion};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use storewatch_core::haar::{compute_integral, detect_multiscale, Cascade, DetectParams};
use storewatch_core::imaging::{read_ppm, GrayImage};
use storewatch_core::nn::demographics::{build_wrn, wrn_manifest, WrnConfig};
use storewatch_core::nn::expression::{build_mini_xception, xception_manifest, XceptionConfig};
use storewatch_core::nn::synthetic::random_archive;
use storewatch_core::tensor::{conv2d, ConvSpec, Padding};
use storewatch_core::Tensor;

fn core_data(name: &str) -> PathBuf {
    PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("../core/tests/data").join(name)
}

fn random_tensor(rng: &mut ChaCha8Rng, dims: Vec<usize>) -> Tensor {
    let n = dims.iter().product();
    Tensor::new(dims, (0..n).map(|_| rng.gen_range(-1.0f32..1.0)).collect()).unwrap()
}

fn conv(c: &mut Criterion) {
    let mut rng = ChaCha8Rng::seed_from_u64(1);
    let mut group = c.benchmark_group("conv2d");
    // The widest WRN-16-8 layers and a mini-Xception depthwise layer.
    for (name, x, k, spec) in [
        ("3x3 128->128 @64", vec![64, 64, 128], vec![3, 3, 128, 128], ConvSpec::new(1, Padding::Same)),
        ("3x3 512->512 @16", vec![16, 16, 512], vec![3, 3, 512, 512], ConvSpec::new(1, Padding::Same)),
        ("depthwise 3x3 x64 @16", vec![16, 16, 64], vec![3, 3, 1, 64], ConvSpec::depthwise(64, 1, Padding::Same)),
    ] {
        let x = random_tensor(&mut rng, x);
        let k = random_tensor(&mut rng, k);
        group.bench_function(name, |b| b.iter(|| conv2d(black_box(&x), &k, None, spec).unwrap()));
    }
    group.finish();
}

fn integral(c: &mut Criterion) {
    let mut rng = ChaCha8Rng::seed_from_u64(2);
    let mut group = c.benchmark_group("integral");
    for (w, h) in [(944u32, 576u32), (1920, 1080)] {
        let img = GrayImage::new(w, h, (0..w * h).map(|_| rng.gen()).collect()).unwrap();
        group.bench_with_input(BenchmarkId::from_parameter(format!("{w}x{h}")), &img, |b, img| {
            b.iter(|| compute_integral(black_box(img)))
        });
    }
    group.finish();
}

fn detect(c: &mut Criterion) {
    let cascade = Cascade::from_file(core_data("haarcascade_frontalface_default.xml")).unwrap();
    let file = std::fs::File::open(core_data("astronaut_256.ppm")).unwrap();
    let frame = read_ppm(std::io::BufReader::new(file)).unwrap().to_gray();
    let params = DetectParams::default();
    c.bench_function("detect_multiscale 256x256", |b| {
        b.iter(|| detect_multiscale(&cascade, black_box(&frame), &params).unwrap())
    });
}

fn networks(c: &mut Criterion) {
    let mut group = c.benchmark_group("forward");
    group.sample_size(10);
    let wrn_cfg = WrnConfig::default();
    let wrn = build_wrn(&wrn_cfg, &random_archive(&wrn_manifest(&wrn_cfg).unwrap(), 1).unwrap()).unwrap();
    let face = Tensor::filled(vec![64, 64, 3], 0.5).unwrap();
    group.bench_function("WRN-16-8", |b| b.iter(|| wrn.forward(black_box(&face)).unwrap()));

    let xc_cfg = XceptionConfig::default();
    let xc = build_mini_xception(&xc_cfg, &random_archive(&xception_manifest(&xc_cfg).unwrap(), 2).unwrap()).unwrap();
    let gray = Tensor::filled(vec![64, 64, 1], 0.0).unwrap();
    group.bench_function("mini-Xception", |b| b.iter(|| xc.forward(black_box(&gray)).unwrap()));
    group.finish();
}

criterion_group!(benches, conv, integral, detect, networks);
criterion_main!(benches);
