//! Deterministic oriented-bars corpus for desk-scale experiments: class
//! "horizontal" draws horizontal stripes, class "vertical" the transpose,
//! with random position and contrast plus Gaussian pixel noise. Oriented
//! structure is exactly what an orientation-tuned bank should separate.

use std::fs;
use std::path::Path;

use rand::prelude::*;
use rand_chacha::ChaCha8Rng;
use rand_distr::Normal;

use crate::error::Result;
use crate::imagekit::{Image, LabeledDataset};

/// Side length of every generated image.
pub const BARS_SIDE: usize = 32;
/// Standard deviation of the additive pixel noise.
pub const BARS_NOISE_SIGMA: f64 = 0.05;

/// Generates `n_per_class` images for each of the two bar classes.
///
/// `distractor_fraction` of the images (in both classes, so the texture
/// carries no label information) get an overlaid diagonal grating.
pub fn bars_dataset(n_per_class: usize, seed: u64, distractor_fraction: f64) -> LabeledDataset {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let noise = Normal::new(0.0, BARS_NOISE_SIGMA).expect("positive sigma");
    let mut images = Vec::with_capacity(2 * n_per_class);
    let mut labels = Vec::with_capacity(2 * n_per_class);
    for (label, horizontal) in [(1usize, true), (2usize, false)] {
        for _ in 0..n_per_class {
            images.push(bar_image(&mut rng, &noise, horizontal, distractor_fraction));
            labels.push(label);
        }
    }
    LabeledDataset::new(
        images,
        labels,
        vec!["horizontal".to_string(), "vertical".to_string()],
    )
    .expect("generator produces a consistent dataset")
}

fn bar_image(
    rng: &mut ChaCha8Rng,
    noise: &Normal<f64>,
    horizontal: bool,
    distractor_fraction: f64,
) -> Image {
    let side = BARS_SIDE;
    let mut values = vec![0.15; side * side];
    let bars = rng.gen_range(1..=2);
    for _ in 0..bars {
        let thickness = rng.gen_range(2..=4);
        let start = rng.gen_range(2..side - thickness - 2);
        let contrast = rng.gen_range(0.35..0.7);
        for offset in 0..thickness {
            for t in 0..side {
                let (x, y) = if horizontal {
                    (t, start + offset)
                } else {
                    (start + offset, t)
                };
                values[y * side + x] += contrast;
            }
        }
    }
    if rng.gen_bool(distractor_fraction.clamp(0.0, 1.0)) {
        let phase = rng.gen_range(0.0..std::f64::consts::TAU);
        for y in 0..side {
            for x in 0..side {
                let arg = std::f64::consts::TAU * (x + y) as f64 / 4.0 + phase;
                values[y * side + x] += 0.18 * arg.cos();
            }
        }
    }
    for v in &mut values {
        *v += noise.sample(rng);
    }
    Image::from_clamped(side, side, values).expect("clamped values are valid")
}

/// Writes a dataset as a `<root>/<class_name>/img_<n>.png` directory tree,
/// the layout the directory loader reads back.
pub fn write_dataset_dirs(dataset: &LabeledDataset, root: &Path) -> Result<()> {
    for name in &dataset.class_names {
        fs::create_dir_all(root.join(name))?;
    }
    let mut per_class_counter = vec![0usize; dataset.num_classes()];
    for (image, &label) in dataset.images.iter().zip(&dataset.labels) {
        let class = &dataset.class_names[label - 1];
        let n = per_class_counter[label - 1];
        per_class_counter[label - 1] += 1;
        image.save_png(&root.join(class).join(format!("img_{n:05}.png")))?;
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::filters::{make_gabor_bank, normalized_responses, GaborParams};

    #[test]
    fn generation_is_deterministic() {
        let a = bars_dataset(5, 7, 0.2);
        let b = bars_dataset(5, 7, 0.2);
        assert_eq!(a.labels, b.labels);
        for (x, y) in a.images.iter().zip(&b.images) {
            assert_eq!(x, y);
        }
        let c = bars_dataset(5, 8, 0.2);
        assert!(a.images.iter().zip(&c.images).any(|(x, y)| x != y));
    }

    #[test]
    fn counts_and_shapes() {
        let ds = bars_dataset(4, 1, 0.0);
        assert_eq!(ds.len(), 8);
        assert_eq!(ds.num_classes(), 2);
        assert_eq!(ds.images_of(1).len(), 4);
        for img in &ds.images {
            assert_eq!((img.width(), img.height()), (BARS_SIDE, BARS_SIDE));
        }
    }

    #[test]
    fn horizontal_class_dominates_orientation_zero() {
        let ds = bars_dataset(10, 3, 0.0);
        let bank = make_gabor_bank(&GaborParams::default(), 0).unwrap();
        let mut horiz_energy = 0.0;
        let mut vert_energy = 0.0;
        for img in ds.images_of(1) {
            let resp = normalized_responses(img, &bank).unwrap();
            horiz_energy += resp.maps[0].sum_of_squares();
            vert_energy += resp.maps[8].sum_of_squares();
        }
        assert!(
            horiz_energy > 1.5 * vert_energy,
            "orientation 0 energy {horiz_energy} vs orientation 8 {vert_energy}"
        );
    }

    #[test]
    fn roundtrips_through_the_directory_loader() {
        let dir = tempfile::tempdir().unwrap();
        let ds = bars_dataset(3, 9, 0.0);
        write_dataset_dirs(&ds, dir.path()).unwrap();
        let (loaded, skipped) = crate::imagekit::load_image_dir(dir.path(), BARS_SIDE).unwrap();
        assert_eq!(skipped, 0);
        assert_eq!(loaded.len(), 6);
        assert_eq!(loaded.class_names, ds.class_names);
        // PNG quantizes to 8 bits; values match to within one step
        for (a, b) in loaded.images.iter().zip(&ds.images) {
            for (x, y) in a.values().iter().zip(b.values()) {
                assert!((x - y).abs() <= 1.0 / 255.0 + 1e-9);
            }
        }
    }
}
