//! Image representation, dataset ingestion, and the convolution primitives
//! shared by every other module.
//!
//! Conventions fixed here and relied on everywhere else:
//!
//! - pixel values are `f64` in `[0, 1]`, row-major, `(x, y)` = (column, row);
//! - convolution is "valid" (no padding) and uses the correlation convention
//!   (no kernel flip), so a kernel acts as a template over co-located patches;
//! - grayscale uses the 0.299/0.587/0.114 luminance weights.

use std::fs;
use std::io::Read;
use std::path::Path;

use crate::error::{Error, Result};

/// A grayscale image with values in `[0, 1]`.
#[derive(Debug, Clone, PartialEq)]
pub struct Image {
    width: usize,
    height: usize,
    values: Vec<f64>,
}

impl Image {
    pub fn new(width: usize, height: usize, values: Vec<f64>) -> Result<Self> {
        if width == 0 || height == 0 || values.len() != width * height {
            return Err(Error::DimensionMismatch(format!(
                "image {}x{} needs {} values, got {}",
                width,
                height,
                width * height,
                values.len()
            )));
        }
        if let Some(v) = values
            .iter()
            .find(|v| !v.is_finite() || **v < 0.0 || **v > 1.0)
        {
            return Err(Error::InvalidArgument(format!(
                "image value {v} outside [0, 1]"
            )));
        }
        Ok(Self {
            width,
            height,
            values,
        })
    }

    /// Builds an image from arbitrary reals by clamping into `[0, 1]`.
    pub fn from_clamped(width: usize, height: usize, values: Vec<f64>) -> Result<Self> {
        let clamped = values
            .into_iter()
            .map(|v| if v.is_finite() { v.clamp(0.0, 1.0) } else { 0.0 })
            .collect();
        Self::new(width, height, clamped)
    }

    pub fn width(&self) -> usize {
        self.width
    }

    pub fn height(&self) -> usize {
        self.height
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    #[inline]
    pub fn get(&self, x: usize, y: usize) -> f64 {
        self.values[y * self.width + x]
    }

    pub fn mean(&self) -> f64 {
        self.values.iter().sum::<f64>() / self.values.len() as f64
    }

    /// Renders the image as an 8-bit grayscale PNG.
    pub fn save_png(&self, path: &Path) -> Result<()> {
        let buf: Vec<u8> = self
            .values
            .iter()
            .map(|v| (v.clamp(0.0, 1.0) * 255.0).round() as u8)
            .collect();
        let img = image::GrayImage::from_raw(self.width as u32, self.height as u32, buf)
            .expect("buffer length matches dimensions");
        img.save(path).map_err(|e| Error::ImageDecode {
            path: path.to_path_buf(),
            reason: e.to_string(),
        })
    }
}

/// Signed filter responses on the valid-convolution lattice of some image.
#[derive(Debug, Clone, PartialEq)]
pub struct ResponseMap {
    width: usize,
    height: usize,
    values: Vec<f64>,
}

impl ResponseMap {
    pub fn new(width: usize, height: usize, values: Vec<f64>) -> Self {
        assert_eq!(values.len(), width * height, "response map shape");
        Self {
            width,
            height,
            values,
        }
    }

    pub fn width(&self) -> usize {
        self.width
    }

    pub fn height(&self) -> usize {
        self.height
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    #[inline]
    pub fn get(&self, x: usize, y: usize) -> f64 {
        self.values[y * self.width + x]
    }

    pub fn sum_of_squares(&self) -> f64 {
        self.values.iter().map(|v| v * v).sum()
    }

    pub(crate) fn map_values(&self, f: impl Fn(f64) -> f64) -> ResponseMap {
        ResponseMap::new(
            self.width,
            self.height,
            self.values.iter().map(|&v| f(v)).collect(),
        )
    }
}

/// A square convolution kernel.
#[derive(Debug, Clone, PartialEq)]
pub struct Kernel {
    size: usize,
    values: Vec<f64>,
}

impl Kernel {
    pub fn new(size: usize, values: Vec<f64>) -> Result<Self> {
        if size == 0 || values.len() != size * size {
            return Err(Error::DimensionMismatch(format!(
                "kernel of side {size} needs {} values, got {}",
                size * size,
                values.len()
            )));
        }
        Ok(Self { size, values })
    }

    pub fn zeros(size: usize) -> Self {
        Self {
            size,
            values: vec![0.0; size * size],
        }
    }

    pub fn size(&self) -> usize {
        self.size
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn values_mut(&mut self) -> &mut [f64] {
        &mut self.values
    }

    #[inline]
    pub fn get(&self, x: usize, y: usize) -> f64 {
        self.values[y * self.size + x]
    }

    pub fn mean(&self) -> f64 {
        self.values.iter().sum::<f64>() / self.values.len() as f64
    }

    pub fn l2_norm(&self) -> f64 {
        self.values.iter().map(|v| v * v).sum::<f64>().sqrt()
    }

    pub fn l2_distance(&self, other: &Kernel) -> f64 {
        assert_eq!(self.size, other.size, "kernel sizes");
        self.values
            .iter()
            .zip(&other.values)
            .map(|(a, b)| (a - b) * (a - b))
            .sum::<f64>()
            .sqrt()
    }

    /// Subtracts the mean and rescales to unit L2 norm. Kernels that are
    /// constant (zero after centering) are left at zero.
    pub fn centered_unit(&self) -> Kernel {
        let m = self.mean();
        let mut out: Vec<f64> = self.values.iter().map(|v| v - m).collect();
        let norm = out.iter().map(|v| v * v).sum::<f64>().sqrt();
        if norm > 1e-12 {
            for v in &mut out {
                *v /= norm;
            }
        }
        Kernel {
            size: self.size,
            values: out,
        }
    }
}

/// Valid (no padding) correlation of `image` with `kernel`.
///
/// Output size is `(width - k + 1) x (height - k + 1)`; entry `(x, y)` is the
/// inner product of the kernel with the image patch whose top-left corner is
/// `(x, y)`. The kernel is not flipped.
pub fn convolve_valid(image: &Image, kernel: &Kernel) -> Result<ResponseMap> {
    let k = kernel.size();
    if k > image.width || k > image.height {
        return Err(Error::KernelTooLarge {
            kernel: k,
            width: image.width,
            height: image.height,
        });
    }
    let out_w = image.width - k + 1;
    let out_h = image.height - k + 1;
    let mut out = vec![0.0; out_w * out_h];
    for oy in 0..out_h {
        for ox in 0..out_w {
            let mut acc = 0.0;
            for ky in 0..k {
                let img_row = (oy + ky) * image.width + ox;
                let ker_row = ky * k;
                for kx in 0..k {
                    acc += kernel.values[ker_row + kx] * image.values[img_row + kx];
                }
            }
            out[oy * out_w + ox] = acc;
        }
    }
    Ok(ResponseMap::new(out_w, out_h, out))
}

/// Adjoint of [`convolve_valid`] at fixed image: correlates `image` with a
/// response-lattice map, producing a `k x k` kernel-shaped accumulation.
/// This is the gradient direction of `||g * I||^2` terms with respect to `g`
/// (up to the factor 2 applied by the caller).
pub(crate) fn correlate_adjoint(image: &Image, response: &ResponseMap, k: usize) -> Kernel {
    debug_assert_eq!(response.width, image.width - k + 1);
    debug_assert_eq!(response.height, image.height - k + 1);
    let mut out = Kernel::zeros(k);
    for ky in 0..k {
        for kx in 0..k {
            let mut acc = 0.0;
            for ry in 0..response.height {
                let img_row = (ry + ky) * image.width + kx;
                let res_row = ry * response.width;
                for rx in 0..response.width {
                    acc += response.values[res_row + rx] * image.values[img_row + rx];
                }
            }
            out.values[ky * k + kx] = acc;
        }
    }
    out
}

/// Images plus 1-based class labels.
#[derive(Debug, Clone)]
pub struct LabeledDataset {
    pub images: Vec<Image>,
    pub labels: Vec<usize>,
    pub class_names: Vec<String>,
}

impl LabeledDataset {
    pub fn new(images: Vec<Image>, labels: Vec<usize>, class_names: Vec<String>) -> Result<Self> {
        if images.len() != labels.len() {
            return Err(Error::DimensionMismatch(format!(
                "{} images but {} labels",
                images.len(),
                labels.len()
            )));
        }
        let k = class_names.len();
        if let Some(bad) = labels.iter().find(|&&l| l == 0 || l > k) {
            return Err(Error::DataFormat(format!(
                "label {bad} outside 1..={k}"
            )));
        }
        Ok(Self {
            images,
            labels,
            class_names,
        })
    }

    pub fn len(&self) -> usize {
        self.images.len()
    }

    pub fn is_empty(&self) -> bool {
        self.images.is_empty()
    }

    pub fn num_classes(&self) -> usize {
        self.class_names.len()
    }

    /// Images with label `class_id` (1-based).
    pub fn images_of(&self, class_id: usize) -> Vec<&Image> {
        self.images
            .iter()
            .zip(&self.labels)
            .filter(|(_, &l)| l == class_id)
            .map(|(i, _)| i)
            .collect()
    }

    /// Images with any label other than `class_id`.
    pub fn images_not_of(&self, class_id: usize) -> Vec<&Image> {
        self.images
            .iter()
            .zip(&self.labels)
            .filter(|(_, &l)| l != class_id)
            .map(|(i, _)| i)
            .collect()
    }
}

/// The 0.299/0.587/0.114 luminance combination; weights sum to 1, so
/// conversion fixes already-gray pixels.
#[inline]
pub fn rgb_to_luma(r: f64, g: f64, b: f64) -> f64 {
    0.299 * r + 0.587 * g + 0.114 * b
}

const IMAGE_EXTENSIONS: &[&str] = &["png", "pgm", "jpg", "jpeg"];

/// Loads a `<root>/<class_name>/*.{png,pgm,jpg}` directory tree.
///
/// Classes are ordered by sorted subdirectory name; every image is converted
/// to grayscale and resized to `target_size x target_size`. Returns the
/// dataset plus the number of files that carried an image extension but could
/// not be decoded (those are skipped).
pub fn load_image_dir(path: &Path, target_size: usize) -> Result<(LabeledDataset, usize)> {
    if target_size == 0 {
        return Err(Error::InvalidArgument("target_size must be positive".into()));
    }
    let mut class_dirs: Vec<(String, std::path::PathBuf)> = Vec::new();
    for entry in fs::read_dir(path)? {
        let entry = entry?;
        if entry.file_type()?.is_dir() {
            class_dirs.push((entry.file_name().to_string_lossy().into_owned(), entry.path()));
        }
    }
    class_dirs.sort_by(|a, b| a.0.cmp(&b.0));
    if class_dirs.is_empty() {
        return Err(Error::DataFormat(format!(
            "{} contains no class subdirectories",
            path.display()
        )));
    }

    let mut images = Vec::new();
    let mut labels = Vec::new();
    let mut skipped = 0usize;
    for (class_idx, (name, dir)) in class_dirs.iter().enumerate() {
        let mut files: Vec<std::path::PathBuf> = fs::read_dir(dir)?
            .filter_map(|e| e.ok())
            .map(|e| e.path())
            .filter(|p| {
                p.extension()
                    .and_then(|e| e.to_str())
                    .map(|e| IMAGE_EXTENSIONS.contains(&e.to_ascii_lowercase().as_str()))
                    .unwrap_or(false)
            })
            .collect();
        files.sort();
        let mut loaded_any = false;
        for file in files {
            match load_single_image(&file, target_size) {
                Ok(img) => {
                    images.push(img);
                    labels.push(class_idx + 1);
                    loaded_any = true;
                }
                Err(_) => skipped += 1,
            }
        }
        if !loaded_any {
            return Err(Error::EmptyClass(name.clone()));
        }
    }
    let dataset = LabeledDataset::new(
        images,
        labels,
        class_dirs.into_iter().map(|(n, _)| n).collect(),
    )?;
    Ok((dataset, skipped))
}

/// Decodes one image file to grayscale at `target_size x target_size`.
pub fn load_image(path: &Path, target_size: usize) -> Result<Image> {
    load_single_image(path, target_size)
}

fn load_single_image(path: &Path, target_size: usize) -> Result<Image> {
    let decoded = image::open(path).map_err(|e| Error::ImageDecode {
        path: path.to_path_buf(),
        reason: e.to_string(),
    })?;
    let rgb = decoded.to_rgb8();
    let (w, h) = (rgb.width(), rgb.height());
    let mut luma = image::ImageBuffer::<image::Luma<f32>, Vec<f32>>::new(w, h);
    for (x, y, px) in rgb.enumerate_pixels() {
        let v = rgb_to_luma(
            px[0] as f64 / 255.0,
            px[1] as f64 / 255.0,
            px[2] as f64 / 255.0,
        );
        luma.put_pixel(x, y, image::Luma([v as f32]));
    }
    let resized = if (w as usize, h as usize) == (target_size, target_size) {
        luma
    } else {
        image::imageops::resize(
            &luma,
            target_size as u32,
            target_size as u32,
            image::imageops::FilterType::Triangle,
        )
    };
    Image::from_clamped(
        target_size,
        target_size,
        resized.into_raw().into_iter().map(|v| v as f64).collect(),
    )
}

const CIFAR_RECORD_LEN: usize = 3073;
const CIFAR_SIDE: usize = 32;
const CIFAR_CLASSES: [&str; 10] = [
    "airplane",
    "automobile",
    "bird",
    "cat",
    "deer",
    "dog",
    "frog",
    "horse",
    "ship",
    "truck",
];

/// Loads CIFAR-10 binary batches (3073-byte records: 1 label byte followed by
/// three channel planes of 1024 bytes each). `path` may be one batch file or
/// a directory of `*.bin` batches, loaded in sorted order.
pub fn load_cifar10(path: &Path) -> Result<LabeledDataset> {
    let mut batch_files = Vec::new();
    if path.is_dir() {
        for entry in fs::read_dir(path)? {
            let p = entry?.path();
            if p.extension().and_then(|e| e.to_str()) == Some("bin") {
                batch_files.push(p);
            }
        }
        batch_files.sort();
        if batch_files.is_empty() {
            return Err(Error::DataFormat(format!(
                "{} holds no .bin batch files",
                path.display()
            )));
        }
    } else {
        batch_files.push(path.to_path_buf());
    }

    let mut images = Vec::new();
    let mut labels = Vec::new();
    for file in &batch_files {
        let mut bytes = Vec::new();
        fs::File::open(file)?.read_to_end(&mut bytes)?;
        if bytes.is_empty() || bytes.len() % CIFAR_RECORD_LEN != 0 {
            return Err(Error::DataFormat(format!(
                "{}: length {} is not a positive multiple of {CIFAR_RECORD_LEN}",
                file.display(),
                bytes.len()
            )));
        }
        for record in bytes.chunks_exact(CIFAR_RECORD_LEN) {
            let label = record[0];
            if label > 9 {
                return Err(Error::DataFormat(format!(
                    "{}: label byte {label} outside 0..=9",
                    file.display()
                )));
            }
            let pixels = &record[1..];
            let mut values = vec![0.0; CIFAR_SIDE * CIFAR_SIDE];
            for i in 0..CIFAR_SIDE * CIFAR_SIDE {
                values[i] = rgb_to_luma(
                    pixels[i] as f64 / 255.0,
                    pixels[1024 + i] as f64 / 255.0,
                    pixels[2048 + i] as f64 / 255.0,
                );
            }
            images.push(Image::new(CIFAR_SIDE, CIFAR_SIDE, values)?);
            labels.push(label as usize + 1);
        }
    }
    LabeledDataset::new(
        images,
        labels,
        CIFAR_CLASSES.iter().map(|s| s.to_string()).collect(),
    )
}
