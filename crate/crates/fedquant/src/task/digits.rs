//! Deterministic synthetic digit images for running without the real MNIST
//! files.
//!
//! Ten class prototypes are built from smooth Gaussian bumps on a 28x28
//! canvas; samples add per-pixel noise and quantize to bytes. The generator
//! writes standard IDX files and loads them back through `load_mnist_idx`,
//! so the whole dataset path is exercised end to end and a given spec always
//! produces byte-identical files.

use super::idx::{load_mnist_idx, write_idx_images, write_idx_labels, IdxImages};
use super::ClassData;
use crate::error::Result;
use crate::rng::StreamFactory;
use rand::Rng;
use rand_distr::{Distribution, StandardNormal};
use std::path::Path;

pub const SIDE: usize = 28;
const BUMPS_PER_CLASS: usize = 4;
const PIXEL_NOISE: f64 = 0.18;

#[derive(Clone, Copy, Debug, PartialEq, Eq, serde::Serialize)]
pub struct SyntheticDigitsSpec {
    pub train: usize,
    pub test: usize,
    pub seed: u64,
}

struct Bump {
    row: f64,
    col: f64,
    width: f64,
    amp: f64,
}

fn prototypes(factory: &StreamFactory) -> Vec<Vec<f64>> {
    (0..10)
        .map(|class| {
            let mut rng = factory.stream(&[crate::rng::label::DATA, 100 + class as u64]);
            let bumps: Vec<Bump> = (0..BUMPS_PER_CLASS)
                .map(|_| Bump {
                    row: 5.0 + 18.0 * rng.random::<f64>(),
                    col: 5.0 + 18.0 * rng.random::<f64>(),
                    width: 2.0 + 3.0 * rng.random::<f64>(),
                    amp: 0.6 + 0.4 * rng.random::<f64>(),
                })
                .collect();
            let mut img = vec![0.0; SIDE * SIDE];
            for r in 0..SIDE {
                for c in 0..SIDE {
                    let mut v = 0.0;
                    for b in &bumps {
                        let d2 = (r as f64 - b.row).powi(2) + (c as f64 - b.col).powi(2);
                        v += b.amp * (-d2 / (2.0 * b.width * b.width)).exp();
                    }
                    img[r * SIDE + c] = v.clamp(0.0, 1.0);
                }
            }
            img
        })
        .collect()
}

fn render_split(
    protos: &[Vec<f64>],
    n: usize,
    factory: &StreamFactory,
    split_label: u64,
) -> (IdxImages, Vec<u8>) {
    let mut rng = factory.stream(&[crate::rng::label::DATA, split_label]);
    let mut pixels = Vec::with_capacity(n * SIDE * SIDE);
    let mut labels = Vec::with_capacity(n);
    for i in 0..n {
        let class = i % 10;
        labels.push(class as u8);
        for &p in &protos[class] {
            let noise: f64 = StandardNormal.sample(&mut rng);
            let v = (p + PIXEL_NOISE * noise).clamp(0.0, 1.0);
            pixels.push((v * 255.0).round() as u8);
        }
    }
    (
        IdxImages {
            n,
            rows: SIDE,
            cols: SIDE,
            pixels,
        },
        labels,
    )
}

/// Generate the dataset, materialize it as IDX files under `dir`, and load
/// it back through the IDX reader.
pub fn synthetic_digits(spec: &SyntheticDigitsSpec, dir: &Path) -> Result<(ClassData, ClassData)> {
    std::fs::create_dir_all(dir)?;
    let factory = StreamFactory::new(spec.seed);
    let protos = prototypes(&factory);

    let (train_images, train_labels) = render_split(&protos, spec.train, &factory, 1);
    let (test_images, test_labels) = render_split(&protos, spec.test, &factory, 2);

    let train_img_path = dir.join("train-images-idx3-ubyte");
    let train_lbl_path = dir.join("train-labels-idx1-ubyte");
    let test_img_path = dir.join("t10k-images-idx3-ubyte");
    let test_lbl_path = dir.join("t10k-labels-idx1-ubyte");
    write_idx_images(&train_img_path, &train_images)?;
    write_idx_labels(&train_lbl_path, &train_labels)?;
    write_idx_images(&test_img_path, &test_images)?;
    write_idx_labels(&test_lbl_path, &test_labels)?;

    let train = load_mnist_idx(&train_img_path, &train_lbl_path)?;
    let test = load_mnist_idx(&test_img_path, &test_lbl_path)?;
    Ok((train, test))
}
