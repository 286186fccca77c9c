//! Seeded random weights for any manifest.
//!
//! Kernels get He-normal values so activations stay in a sane range through
//! deep stacks; batch-norm statistics are drawn near the identity.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};

use crate::error::Result;
use crate::tensor::Tensor;
use crate::weights::{Manifest, TensorArchive};

fn fan_in(dims: &[usize]) -> usize {
    dims[..dims.len() - 1].iter().product::<usize>().max(1)
}

fn sample(name: &str, dims: &[usize], rng: &mut ChaCha8Rng) -> Vec<f32> {
    let n: usize = dims.iter().product();
    let field = name.rsplit('.').next().unwrap_or(name);
    let normal = |std: f64| Normal::new(0.0, std).expect("positive std");
    match field {
        "gamma" => (0..n).map(|_| rng.gen_range(0.8..1.2)).collect(),
        "variance" => (0..n).map(|_| rng.gen_range(0.5..1.5)).collect(),
        "mean" => {
            let d = normal(0.1);
            (0..n).map(|_| d.sample(rng) as f32).collect()
        }
        "beta" | "bias" => {
            let d = normal(0.05);
            (0..n).map(|_| d.sample(rng) as f32).collect()
        }
        // Dense heads sit on unnormalised pixel-scale features; keep logits moderate.
        _ if dims.len() == 2 => {
            let d = normal(0.05 / fan_in(dims) as f64);
            (0..n).map(|_| d.sample(rng) as f32).collect()
        }
        _ => {
            let d = normal((2.0 / fan_in(dims) as f64).sqrt());
            (0..n).map(|_| d.sample(rng) as f32).collect()
        }
    }
}

/// An archive holding every manifest entry, reproducible from `seed`.
pub fn random_archive(manifest: &Manifest, seed: u64) -> Result<TensorArchive> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut archive = TensorArchive::new();
    archive.set_metadata("generator", format!("synthetic seed={seed}"));
    for (name, dims) in manifest {
        let data = sample(name, dims, &mut rng);
        archive.insert(name.clone(), Tensor::new(dims.clone(), data)?)?;
    }
    Ok(archive)
}
