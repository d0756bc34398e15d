//! Filter banks: Gabor construction with energy-normalized responses,
//! pairwise sigmoid composition, and similarity-based compression.
//!
//! A bank ("analysis dictionary") is an ordered set of square kernels owned
//! by one class and one layer. Layer 1 is a fixed Gabor bank; deeper layers
//! are built by composing pairs of the previous layer's selected filters.

use std::path::Path;

use rand::Rng;

use crate::error::{Error, Result};
use crate::imagekit::{convolve_valid, Image, Kernel, ResponseMap};

/// Kernel pairs closer than this L2 distance are deduplicated during
/// compression.
pub const DEFAULT_COMPRESSION_THRESHOLD: f64 = 0.7;

/// One convolution filter, tagged with its layer and (for composed filters)
/// the ids of the two parents it was built from.
#[derive(Debug, Clone, PartialEq)]
pub struct Filter {
    pub kernel: Kernel,
    pub id: usize,
    pub layer: usize,
    pub lineage: Option<(usize, usize)>,
}

impl Filter {
    pub fn base(kernel: Kernel, id: usize) -> Self {
        Self {
            kernel,
            id,
            layer: 1,
            lineage: None,
        }
    }
}

/// The per-class, per-layer ordered filter bank.
#[derive(Debug, Clone, PartialEq)]
pub struct AnalysisDictionary {
    filters: Vec<Filter>,
    layer: usize,
    class_id: usize,
}

impl AnalysisDictionary {
    pub fn new(filters: Vec<Filter>, layer: usize, class_id: usize) -> Result<Self> {
        if filters.is_empty() {
            return Err(Error::EmptyInput("analysis dictionary needs >= 1 filter"));
        }
        let size = filters[0].kernel.size();
        let mut ids: Vec<usize> = filters.iter().map(|f| f.id).collect();
        ids.sort_unstable();
        ids.dedup();
        if ids.len() != filters.len() {
            return Err(Error::InvalidArgument(
                "duplicate filter ids in dictionary".into(),
            ));
        }
        if filters
            .iter()
            .any(|f| f.kernel.size() != size || f.layer != layer)
        {
            return Err(Error::InvalidArgument(
                "dictionary filters must share support size and layer".into(),
            ));
        }
        Ok(Self {
            filters,
            layer,
            class_id,
        })
    }

    pub fn filters(&self) -> &[Filter] {
        &self.filters
    }

    pub fn len(&self) -> usize {
        self.filters.len()
    }

    pub fn is_empty(&self) -> bool {
        self.filters.is_empty()
    }

    pub fn layer(&self) -> usize {
        self.layer
    }

    pub fn class_id(&self) -> usize {
        self.class_id
    }

    pub fn kernel_size(&self) -> usize {
        self.filters[0].kernel.size()
    }

    /// Returns a copy with the kernel at position `index` replaced.
    pub(crate) fn with_kernel(&self, index: usize, kernel: Kernel) -> Self {
        let mut out = self.clone();
        out.filters[index].kernel = kernel;
        out
    }
}

/// Gabor bank configuration: `orientations` kernels at a single scale, on a
/// fixed `size x size` support.
#[derive(Debug, Clone, PartialEq)]
pub struct GaborParams {
    pub orientations: usize,
    pub scales: usize,
    pub size: usize,
    pub wavelength: f64,
    pub sigma: f64,
}

impl Default for GaborParams {
    fn default() -> Self {
        // One full carrier cycle fits the 5x5 support.
        Self {
            orientations: 16,
            scales: 1,
            size: 5,
            wavelength: 4.0,
            sigma: 2.0,
        }
    }
}

/// Builds the layer-1 Gabor bank: one kernel per orientation `a*pi/A`,
/// each re-centered to zero mean and rescaled to unit L2 norm.
///
/// The orientation parameter is the stroke direction: orientation 0 responds
/// to horizontal structure (intensity varying vertically).
pub fn make_gabor_bank(params: &GaborParams, class_id: usize) -> Result<AnalysisDictionary> {
    if params.orientations == 0 {
        return Err(Error::InvalidArgument("orientations must be >= 1".into()));
    }
    if params.scales != 1 {
        return Err(Error::InvalidArgument(
            "only single-scale Gabor banks are supported".into(),
        ));
    }
    if params.size < 2 || params.size.is_multiple_of(2) {
        return Err(Error::InvalidArgument(
            "gabor size must be odd and >= 3".into(),
        ));
    }
    let a_total = params.orientations;
    let filters = (0..a_total)
        .map(|a| {
            let theta = a as f64 * std::f64::consts::PI / a_total as f64;
            Filter::base(gabor_kernel(params, theta), a)
        })
        .collect();
    AnalysisDictionary::new(filters, 1, class_id)
}

fn gabor_kernel(params: &GaborParams, theta: f64) -> Kernel {
    let size = params.size;
    let c = (size as f64 - 1.0) / 2.0;
    let two_sigma_sq = 2.0 * params.sigma * params.sigma;
    let omega = 2.0 * std::f64::consts::PI / params.wavelength;
    let (sin_t, cos_t) = theta.sin_cos();
    let mut values = Vec::with_capacity(size * size);
    for y in 0..size {
        for x in 0..size {
            let dx = x as f64 - c;
            let dy = y as f64 - c;
            // carrier varies perpendicular to the stroke direction
            let t = -dx * sin_t + dy * cos_t;
            let envelope = (-(dx * dx + dy * dy) / two_sigma_sq).exp();
            values.push(envelope * (omega * t).cos());
        }
    }
    Kernel::new(size, values)
        .expect("gabor grid shape")
        .centered_unit()
}

/// Gabor responses of one image, normalized so that the mean squared
/// response over all orientations and lattice positions is 1.
#[derive(Debug, Clone)]
pub struct NormalizedResponses {
    pub maps: Vec<ResponseMap>,
    /// Set when the image had no oriented energy (constant image against
    /// zero-mean kernels); all responses are then defined as 0.
    pub degenerate: bool,
}

/// Computes `sqrt(r^2 / delta^2)` responses per orientation, where `delta^2`
/// is the mean squared raw response over every orientation and every valid
/// lattice position of this image.
pub fn normalized_responses(
    image: &Image,
    bank: &AnalysisDictionary,
) -> Result<NormalizedResponses> {
    if bank.layer() != 1 {
        return Err(Error::InvalidArgument(
            "response normalization applies to the layer-1 Gabor bank".into(),
        ));
    }
    let raw: Vec<ResponseMap> = bank
        .filters()
        .iter()
        .map(|f| convolve_valid(image, &f.kernel))
        .collect::<Result<_>>()?;
    let lattice = raw[0].values().len();
    let energy: f64 = raw.iter().map(|m| m.sum_of_squares()).sum();
    let delta_sq = energy / (lattice as f64 * raw.len() as f64);
    // kernels are zero-mean only to rounding, so a constant image leaves
    // delta^2 at ~1e-30 rather than exactly 0
    if delta_sq <= 1e-20 {
        let zeros = raw
            .iter()
            .map(|m| ResponseMap::new(m.width(), m.height(), vec![0.0; lattice]))
            .collect();
        return Ok(NormalizedResponses {
            maps: zeros,
            degenerate: true,
        });
    }
    let inv_delta = delta_sq.sqrt().recip();
    let maps = raw
        .iter()
        .map(|m| m.map_values(|v| v.abs() * inv_delta))
        .collect();
    Ok(NormalizedResponses {
        maps,
        degenerate: false,
    })
}

/// How composed kernels are post-processed.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Composition {
    /// Re-center to zero mean and rescale to unit L2 norm. The raw sigmoid
    /// output is strictly positive, so without this every composed filter
    /// carries a DC response that swamps its structure.
    Normalized,
    /// Keep the raw sigmoid output.
    Raw,
}

fn sigmoid(z: f64) -> f64 {
    if z >= 0.0 {
        1.0 / (1.0 + (-z).exp())
    } else {
        let e = z.exp();
        e / (1.0 + e)
    }
}

fn compose_with(a: &Filter, b: &Filter, mode: Composition) -> Result<Filter> {
    if a.layer != b.layer {
        return Err(Error::InvalidArgument(format!(
            "cannot compose filters from layers {} and {}",
            a.layer, b.layer
        )));
    }
    if a.id == b.id {
        return Err(Error::InvalidArgument(
            "cannot compose a filter with itself".into(),
        ));
    }
    let size = a.kernel.size();
    let raw = Kernel::new(
        size,
        a.kernel
            .values()
            .iter()
            .zip(b.kernel.values())
            .map(|(x, y)| sigmoid(x + y))
            .collect(),
    )?;
    let kernel = match mode {
        Composition::Normalized => raw.centered_unit(),
        Composition::Raw => raw,
    };
    Ok(Filter {
        kernel,
        id: 0, // assigned when the filter joins a bank
        layer: a.layer + 1,
        lineage: Some((a.id, b.id)),
    })
}

/// Elementwise sigmoid of the sum of two same-layer kernels, re-centered and
/// unit-normalized; the result sits one layer above its parents.
pub fn compose(a: &Filter, b: &Filter) -> Result<Filter> {
    compose_with(a, b, Composition::Normalized)
}

/// [`compose`] without the zero-mean/unit-norm correction.
pub fn compose_raw(a: &Filter, b: &Filter) -> Result<Filter> {
    compose_with(a, b, Composition::Raw)
}

/// Composes every unordered pair of `optimized`, yielding `M(M-1)/2` filters
/// with sequential ids in pair-enumeration order.
pub fn compose_all(optimized: &[Filter], mode: Composition) -> Result<Vec<Filter>> {
    if optimized.len() < 2 {
        return Err(Error::InvalidArgument(format!(
            "composition needs >= 2 filters, got {}",
            optimized.len()
        )));
    }
    let mut out = Vec::with_capacity(optimized.len() * (optimized.len() - 1) / 2);
    for i in 0..optimized.len() {
        for j in i + 1..optimized.len() {
            let mut f = compose_with(&optimized[i], &optimized[j], mode)?;
            f.id = out.len();
            out.push(f);
        }
    }
    Ok(out)
}

/// Drops one of every surviving pair whose kernel L2 distance is below
/// `threshold`; which side is dropped is the rng's call. Pairs are scanned in
/// ascending (id, id) order, so the result is a deterministic function of the
/// seed. Survivors keep their input order.
pub fn compress<R: Rng>(filters: &[Filter], threshold: f64, rng: &mut R) -> Vec<Filter> {
    let mut order: Vec<usize> = (0..filters.len()).collect();
    order.sort_by_key(|&i| filters[i].id);
    let mut alive = vec![true; filters.len()];
    for oi in 0..order.len() {
        for oj in oi + 1..order.len() {
            let (i, j) = (order[oi], order[oj]);
            if !alive[i] || !alive[j] {
                continue;
            }
            if filters[i].kernel.l2_distance(&filters[j].kernel) < threshold {
                if rng.gen::<bool>() {
                    alive[i] = false;
                    break; // i is gone; move to the next first element
                } else {
                    alive[j] = false;
                }
            }
        }
    }
    filters
        .iter()
        .zip(&alive)
        .filter(|(_, &a)| a)
        .map(|(f, _)| f.clone())
        .collect()
}

/// Renders every kernel of a bank as a min-max-stretched grayscale tile in a
/// grid image.
pub fn export_filter_grid(
    dict: &AnalysisDictionary,
    path: &Path,
    tile_scale: usize,
) -> Result<()> {
    let scale = tile_scale.max(1);
    let k = dict.kernel_size();
    let tile = k * scale;
    let cols = (dict.len() as f64).sqrt().ceil() as usize;
    let rows = dict.len().div_ceil(cols);
    let pad = 2;
    let img_w = cols * tile + (cols + 1) * pad;
    let img_h = rows * tile + (rows + 1) * pad;
    let mut canvas = image::GrayImage::from_pixel(img_w as u32, img_h as u32, image::Luma([32u8]));
    for (idx, filter) in dict.filters().iter().enumerate() {
        let stretched = min_max_stretch(&filter.kernel);
        let gx = idx % cols;
        let gy = idx / cols;
        let ox = pad + gx * (tile + pad);
        let oy = pad + gy * (tile + pad);
        for y in 0..tile {
            for x in 0..tile {
                let v = stretched[(y / scale) * k + (x / scale)];
                canvas.put_pixel(
                    (ox + x) as u32,
                    (oy + y) as u32,
                    image::Luma([(v * 255.0).round() as u8]),
                );
            }
        }
    }
    canvas.save(path).map_err(|e| Error::ImageDecode {
        path: path.to_path_buf(),
        reason: e.to_string(),
    })
}

/// Maps kernel values onto [0, 1]; constant kernels render mid-gray.
pub(crate) fn min_max_stretch(kernel: &Kernel) -> Vec<f64> {
    let min = kernel.values().iter().cloned().fold(f64::INFINITY, f64::min);
    let max = kernel
        .values()
        .iter()
        .cloned()
        .fold(f64::NEG_INFINITY, f64::max);
    if max - min < 1e-15 {
        return vec![0.5; kernel.values().len()];
    }
    kernel
        .values()
        .iter()
        .map(|v| (v - min) / (max - min))
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::prelude::*;
    use rand_chacha::ChaCha8Rng;

    fn default_bank() -> AnalysisDictionary {
        make_gabor_bank(&GaborParams::default(), 0).unwrap()
    }

    #[test]
    fn default_bank_has_sixteen_normalized_kernels() {
        let bank = default_bank();
        assert_eq!(bank.len(), 16);
        assert_eq!(bank.layer(), 1);
        assert_eq!(bank.kernel_size(), 5);
        for f in bank.filters() {
            assert!(f.kernel.mean().abs() <= 1e-8, "mean {}", f.kernel.mean());
            assert!((f.kernel.l2_norm() - 1.0).abs() <= 1e-8);
            assert!(f.lineage.is_none());
        }
    }

    #[test]
    fn quarter_turn_orientations_are_rotated_copies() {
        // k_{a + A/2} has its carrier rotated a quarter turn, so the kernels
        // coincide after rotating the grid by 90 degrees.
        let bank = default_bank();
        let a_total = 16;
        let s = 5;
        for a in 0..a_total / 2 {
            let k1 = &bank.filters()[a].kernel;
            let k2 = &bank.filters()[a + a_total / 2].kernel;
            for y in 0..s {
                for x in 0..s {
                    let rotated = k1.get(s - 1 - y, x);
                    assert!(
                        (k2.get(x, y) - rotated).abs() <= 1e-8,
                        "orientation {a}: ({x},{y}) {} vs {}",
                        k2.get(x, y),
                        rotated
                    );
                }
            }
        }
    }

    fn random_image(rng: &mut ChaCha8Rng, w: usize, h: usize, lo: f64, hi: f64) -> Image {
        Image::new(w, h, (0..w * h).map(|_| rng.gen_range(lo..hi)).collect()).unwrap()
    }

    #[test]
    fn normalized_responses_have_unit_mean_square() {
        let bank = default_bank();
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        for _ in 0..5 {
            let img = random_image(&mut rng, 20, 17, 0.0, 1.0);
            let resp = normalized_responses(&img, &bank).unwrap();
            assert!(!resp.degenerate);
            let n: usize = resp.maps.iter().map(|m| m.values().len()).sum();
            let mean_sq: f64 =
                resp.maps.iter().map(|m| m.sum_of_squares()).sum::<f64>() / n as f64;
            assert!((mean_sq - 1.0).abs() <= 1e-8, "mean square {mean_sq}");
            assert!(resp
                .maps
                .iter()
                .all(|m| m.values().iter().all(|&v| v >= 0.0)));
        }
    }

    #[test]
    fn constant_image_is_degenerate() {
        let bank = default_bank();
        let img = Image::new(12, 12, vec![0.5; 144]).unwrap();
        let resp = normalized_responses(&img, &bank).unwrap();
        assert!(resp.degenerate);
        assert!(resp
            .maps
            .iter()
            .all(|m| m.values().iter().all(|&v| v == 0.0)));
    }

    #[test]
    fn contrast_doubling_leaves_responses_unchanged() {
        let bank = default_bank();
        let mut rng = ChaCha8Rng::seed_from_u64(12);
        let img = random_image(&mut rng, 16, 16, 0.4, 0.6);
        let mean = img.mean();
        let doubled = Image::new(
            16,
            16,
            img.values().iter().map(|v| mean + 2.0 * (v - mean)).collect(),
        )
        .unwrap();
        let a = normalized_responses(&img, &bank).unwrap();
        let b = normalized_responses(&doubled, &bank).unwrap();
        for (ma, mb) in a.maps.iter().zip(&b.maps) {
            for (x, y) in ma.values().iter().zip(mb.values()) {
                assert!((x - y).abs() <= 1e-8);
            }
        }
    }

    #[test]
    fn responses_invariant_to_affine_intensity_change() {
        let bank = default_bank();
        let mut rng = ChaCha8Rng::seed_from_u64(13);
        for _ in 0..10 {
            let img = random_image(&mut rng, 14, 14, 0.3, 0.6);
            let a = rng.gen_range(0.5..1.5);
            let b = rng.gen_range(0.0..0.08);
            let shifted = Image::new(
                14,
                14,
                img.values().iter().map(|v| a * v + b).collect(),
            )
            .unwrap();
            let r1 = normalized_responses(&img, &bank).unwrap();
            let r2 = normalized_responses(&shifted, &bank).unwrap();
            for (ma, mb) in r1.maps.iter().zip(&r2.maps) {
                for (x, y) in ma.values().iter().zip(mb.values()) {
                    let scale = x.abs().max(y.abs()).max(1e-9);
                    assert!((x - y).abs() / scale <= 1e-6, "{x} vs {y}");
                }
            }
        }
    }

    fn filter_from(values: Vec<f64>, id: usize, layer: usize) -> Filter {
        Filter {
            kernel: Kernel::new((values.len() as f64).sqrt() as usize, values).unwrap(),
            id,
            layer,
            lineage: None,
        }
    }

    #[test]
    fn raw_composition_of_zero_kernels_is_half() {
        let a = filter_from(vec![0.0; 25], 0, 1);
        let b = filter_from(vec![0.0; 25], 1, 1);
        let c = compose_raw(&a, &b).unwrap();
        assert!(c.kernel.values().iter().all(|&v| (v - 0.5).abs() < 1e-12));
        assert_eq!(c.layer, 2);
        assert_eq!(c.lineage, Some((0, 1)));
    }

    #[test]
    fn raw_composition_applies_pointwise_sigmoid() {
        let mut av = vec![0.0; 25];
        av[0] = 2.0;
        let a = filter_from(av, 0, 1);
        let b = filter_from(vec![0.0; 25], 1, 1);
        let c = compose_raw(&a, &b).unwrap();
        assert!((c.kernel.values()[0] - 0.880_797_077_977_882_3).abs() < 1e-12);
        assert!((c.kernel.values()[1] - 0.5).abs() < 1e-12);
    }

    #[test]
    fn composition_commutes() {
        let mut rng = ChaCha8Rng::seed_from_u64(21);
        let a = filter_from((0..25).map(|_| rng.gen_range(-1.0..1.0)).collect(), 3, 2);
        let b = filter_from((0..25).map(|_| rng.gen_range(-1.0..1.0)).collect(), 7, 2);
        let ab = compose(&a, &b).unwrap();
        let ba = compose(&b, &a).unwrap();
        assert_eq!(ab.kernel.values(), ba.kernel.values());
        assert_eq!(ab.layer, 3);
    }

    #[test]
    fn composition_rejects_mismatched_layers_and_self() {
        let a = filter_from(vec![0.0; 25], 0, 1);
        let mut b = filter_from(vec![0.0; 25], 1, 2);
        assert!(compose(&a, &b).is_err());
        b.layer = 1;
        b.id = 0;
        assert!(compose(&a, &b).is_err());
    }

    #[test]
    fn normalized_composition_is_zero_mean_unit_norm() {
        let mut rng = ChaCha8Rng::seed_from_u64(22);
        let a = filter_from((0..25).map(|_| rng.gen_range(-1.0..1.0)).collect(), 0, 1);
        let b = filter_from((0..25).map(|_| rng.gen_range(-1.0..1.0)).collect(), 1, 1);
        let c = compose(&a, &b).unwrap();
        assert!(c.kernel.mean().abs() < 1e-12);
        assert!((c.kernel.l2_norm() - 1.0).abs() < 1e-12);
    }

    #[test]
    fn compose_all_counts() {
        let bank = default_bank();
        let composed = compose_all(bank.filters(), Composition::Normalized).unwrap();
        assert_eq!(composed.len(), 120);
        let ids: Vec<usize> = composed.iter().map(|f| f.id).collect();
        assert_eq!(ids, (0..120).collect::<Vec<_>>());
        assert!(composed.iter().all(|f| f.layer == 2 && f.lineage.is_some()));

        let two = compose_all(&bank.filters()[..2], Composition::Normalized).unwrap();
        assert_eq!(two.len(), 1);
        let five = compose_all(&bank.filters()[..5], Composition::Normalized).unwrap();
        assert_eq!(five.len(), 10);
        assert!(compose_all(&bank.filters()[..1], Composition::Normalized).is_err());
    }

    #[test]
    fn compress_drops_one_of_a_duplicate_pair() {
        let a = filter_from(vec![0.3; 25], 0, 2);
        let b = filter_from(vec![0.3; 25], 1, 2);
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let kept = compress(&[a, b], DEFAULT_COMPRESSION_THRESHOLD, &mut rng);
        assert_eq!(kept.len(), 1);
    }

    #[test]
    fn compress_keeps_orthogonal_unit_kernels() {
        // ||a - b||^2 = 2 for orthonormal kernels, well above 0.7.
        let mut av = vec![0.0; 25];
        av[0] = 1.0;
        let mut bv = vec![0.0; 25];
        bv[1] = 1.0;
        let a = filter_from(av, 0, 2);
        let b = filter_from(bv, 1, 2);
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let kept = compress(&[a, b], DEFAULT_COMPRESSION_THRESHOLD, &mut rng);
        assert_eq!(kept.len(), 2);
    }

    #[test]
    fn compress_contract_no_close_pair_survives() {
        let mut rng = ChaCha8Rng::seed_from_u64(33);
        for round in 0..20 {
            let filters: Vec<Filter> = (0..12)
                .map(|i| {
                    filter_from(
                        (0..25).map(|_| rng.gen_range(-0.3..0.3)).collect(),
                        i,
                        2,
                    )
                })
                .collect();
            let mut crng = ChaCha8Rng::seed_from_u64(round);
            let kept = compress(&filters, 0.7, &mut crng);
            assert!(kept.len() <= filters.len());
            for i in 0..kept.len() {
                for j in i + 1..kept.len() {
                    assert!(kept[i].kernel.l2_distance(&kept[j].kernel) >= 0.7);
                }
            }
            // zero threshold keeps everything
            let mut crng = ChaCha8Rng::seed_from_u64(round);
            assert_eq!(compress(&filters, 0.0, &mut crng).len(), filters.len());
        }
    }

    #[test]
    fn compress_is_deterministic_for_a_seed() {
        let mut rng = ChaCha8Rng::seed_from_u64(44);
        let filters: Vec<Filter> = (0..10)
            .map(|i| filter_from((0..25).map(|_| rng.gen_range(-0.2..0.2)).collect(), i, 2))
            .collect();
        let run = |seed| {
            let mut r = ChaCha8Rng::seed_from_u64(seed);
            compress(&filters, 0.7, &mut r)
                .iter()
                .map(|f| f.id)
                .collect::<Vec<_>>()
        };
        assert_eq!(run(5), run(5));
        assert!(compress(&[], 0.7, &mut ChaCha8Rng::seed_from_u64(0)).is_empty());
    }

    #[test]
    fn bars_excite_matching_orientations() {
        // a horizontal bar (orientation index 0) should dominate the
        // orientation-0 response over the perpendicular one.
        let bank = default_bank();
        let mut values = vec![0.1; 24 * 24];
        for y in 10..13 {
            for x in 0..24 {
                values[y * 24 + x] = 0.9;
            }
        }
        let img = Image::new(24, 24, values).unwrap();
        let resp = normalized_responses(&img, &bank).unwrap();
        let mean_energy: Vec<f64> = resp
            .maps
            .iter()
            .map(|m| m.sum_of_squares() / m.values().len() as f64)
            .collect();
        assert!(
            mean_energy[0] > 2.0 * mean_energy[8],
            "horizontal {} vs vertical {}",
            mean_energy[0],
            mean_energy[8]
        );
    }

    #[test]
    fn filter_grid_export_writes_png() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("bank.png");
        export_filter_grid(&default_bank(), &path, 8).unwrap();
        let img = image::open(&path).unwrap();
        assert!(img.width() > 0 && img.height() > 0);
    }
}
