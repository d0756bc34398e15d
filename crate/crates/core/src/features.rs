//! Winner-take-all activation, 3-level spatial-pyramid histograms, and the
//! index arithmetic that maps histogram dimensions back to filters.
//!
//! A feature vector for one image under an M-filter bank has length
//! `21 * C * M`: per filter, 21 pyramid blocks (1 + 2x2 + 4x4), each a
//! C-bin histogram of the activated response magnitudes falling in it.
//! Dimensions are filter-major, then block, then bin.

use std::collections::BTreeSet;
use std::io::Write;

use crate::boosting::StrongClassifier;
use crate::error::{Error, Result};
use crate::filters::{normalized_responses, AnalysisDictionary};
use crate::imagekit::{convolve_valid, Image, ResponseMap};
use crate::par;

/// Pyramid grid sides per level: 1x1, 2x2, 4x4.
pub const PYRAMID_LEVELS: [usize; 3] = [1, 2, 4];
/// Total spatial blocks across the three levels.
pub const PYRAMID_BLOCKS: usize = 21;

/// One winner-take-all record: response at `(x, y)` on map `filter` survived.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ActivationRecord {
    pub activated: bool,
    pub x: usize,
    pub y: usize,
    pub filter: usize,
}

/// The per-image activation index (winners only).
#[derive(Debug, Clone, Default)]
pub struct ResponseIndex {
    pub entries: Vec<ActivationRecord>,
}

/// M sparse, nonnegative maps: per pixel at most one map is nonzero.
#[derive(Debug, Clone)]
pub struct FeatureMapStack {
    maps: Vec<ResponseMap>,
    index: ResponseIndex,
}

impl FeatureMapStack {
    pub fn maps(&self) -> &[ResponseMap] {
        &self.maps
    }

    pub fn index(&self) -> &ResponseIndex {
        &self.index
    }

    pub fn num_maps(&self) -> usize {
        self.maps.len()
    }

    pub fn lattice_width(&self) -> usize {
        self.maps[0].width()
    }

    pub fn lattice_height(&self) -> usize {
        self.maps[0].height()
    }
}

/// Keeps, per pixel, only the largest-magnitude response across the maps
/// (ties to the lowest filter index); the winner's magnitude is stored and
/// every other map is zeroed there. Zero-valued winners are not recorded as
/// activations.
pub fn max_activate(responses: &[ResponseMap]) -> Result<FeatureMapStack> {
    if responses.is_empty() {
        return Err(Error::EmptyInput("max_activate needs >= 1 response map"));
    }
    let (w, h) = (responses[0].width(), responses[0].height());
    if responses
        .iter()
        .any(|m| m.width() != w || m.height() != h)
    {
        return Err(Error::DimensionMismatch(
            "response maps differ in lattice size".into(),
        ));
    }
    let mut maps: Vec<Vec<f64>> = vec![vec![0.0; w * h]; responses.len()];
    let mut entries = Vec::new();
    for y in 0..h {
        for x in 0..w {
            let pos = y * w + x;
            let mut winner = 0usize;
            let mut best = responses[0].values()[pos].abs();
            for (m, map) in responses.iter().enumerate().skip(1) {
                let mag = map.values()[pos].abs();
                if mag > best {
                    best = mag;
                    winner = m;
                }
            }
            if best > 0.0 {
                maps[winner][pos] = best;
                entries.push(ActivationRecord {
                    activated: true,
                    x,
                    y,
                    filter: winner,
                });
            }
        }
    }
    Ok(FeatureMapStack {
        maps: maps
            .into_iter()
            .map(|v| ResponseMap::new(w, h, v))
            .collect(),
        index: ResponseIndex { entries },
    })
}

/// Equal-width histogram edges over `[0, q]`, `q` the 99th percentile of the
/// activated training magnitudes.
#[derive(Debug, Clone, PartialEq)]
pub struct BinEdges {
    edges: Vec<f64>,
}

impl BinEdges {
    pub fn new(edges: Vec<f64>) -> Result<Self> {
        if edges.len() < 2 || edges.windows(2).any(|w| w[1] <= w[0]) {
            return Err(Error::InvalidArgument(
                "bin edges must be strictly ascending with >= 2 entries".into(),
            ));
        }
        Ok(Self { edges })
    }

    pub fn bins(&self) -> usize {
        self.edges.len() - 1
    }

    pub fn edges(&self) -> &[f64] {
        &self.edges
    }

    pub fn upper(&self) -> f64 {
        *self.edges.last().unwrap()
    }

    /// Bin index for a nonnegative magnitude; the flag reports values beyond
    /// the top edge, which are clamped into the last bin.
    fn bin_for(&self, v: f64) -> (usize, bool) {
        let c = self.bins();
        let upper = self.upper();
        if v > upper {
            return (c - 1, true);
        }
        let raw = (v / upper * c as f64).floor() as usize;
        (raw.min(c - 1), false)
    }
}

/// Fits shared equal-width bin edges from training stacks.
pub fn fit_bins(stacks: &[FeatureMapStack], bins: usize) -> Result<BinEdges> {
    if bins == 0 {
        return Err(Error::InvalidArgument("bins must be >= 1".into()));
    }
    let mut magnitudes: Vec<f64> = stacks
        .iter()
        .flat_map(|s| s.maps.iter())
        .flat_map(|m| m.values().iter().copied().filter(|&v| v > 0.0))
        .collect();
    if magnitudes.is_empty() {
        return Err(Error::EmptyInput("no activated responses to fit bins on"));
    }
    magnitudes.sort_by(f64::total_cmp);
    let idx = ((magnitudes.len() - 1) as f64 * 0.99).round() as usize;
    let q = magnitudes[idx];
    let edges = (0..=bins).map(|i| q * i as f64 / bins as f64).collect();
    BinEdges::new(edges)
}

/// Shape of the pyramid-histogram feature space for an M-filter bank,
/// including the shared bin edges.
#[derive(Debug, Clone, PartialEq)]
pub struct FeatureLayout {
    filter_count: usize,
    edges: BinEdges,
}

impl FeatureLayout {
    pub fn new(filter_count: usize, edges: BinEdges) -> Result<Self> {
        if filter_count == 0 {
            return Err(Error::InvalidArgument("layout needs >= 1 filter".into()));
        }
        Ok(Self {
            filter_count,
            edges,
        })
    }

    pub fn filter_count(&self) -> usize {
        self.filter_count
    }

    pub fn bins(&self) -> usize {
        self.edges.bins()
    }

    pub fn edges(&self) -> &BinEdges {
        &self.edges
    }

    /// Total feature dimension `21 * C * M`.
    pub fn dim(&self) -> usize {
        self.filter_count * PYRAMID_BLOCKS * self.bins()
    }

    pub fn encode(&self, filter: usize, block: usize, bin: usize) -> usize {
        debug_assert!(filter < self.filter_count && block < PYRAMID_BLOCKS && bin < self.bins());
        (filter * PYRAMID_BLOCKS + block) * self.bins() + bin
    }

    pub fn decode(&self, dim: usize) -> (usize, usize, usize) {
        debug_assert!(dim < self.dim());
        let bin = dim % self.bins();
        let rest = dim / self.bins();
        (rest / PYRAMID_BLOCKS, rest % PYRAMID_BLOCKS, bin)
    }

    pub fn filter_of_dim(&self, dim: usize) -> usize {
        self.decode(dim).0
    }
}

/// Global block ids (level 0: block 0; level 1: 1..=4; level 2: 5..=20)
/// containing a lattice position. Coarser blocks are unions of finest cells,
/// so a shift that stays inside a finest cell never changes block membership.
pub(crate) fn containing_blocks(x: usize, y: usize, width: usize, height: usize) -> [usize; 3] {
    let cx = finest_cell(x, width);
    let cy = finest_cell(y, height);
    [0, 1 + (cy / 2) * 2 + (cx / 2), 5 + cy * 4 + cx]
}

/// Finest-grid cell via integer division; the remainder rows/columns fall in
/// the last cell.
fn finest_cell(coord: usize, extent: usize) -> usize {
    let base = (extent / 4).max(1);
    (coord / base).min(3)
}

/// Pyramid-histogram feature vector of one image; `clamped` counts activated
/// responses that fell beyond the top bin edge.
#[derive(Debug, Clone, PartialEq)]
pub struct FeatureVector {
    pub values: Vec<f64>,
    pub clamped: usize,
}

/// Histograms each map's activated magnitudes over the 21 pyramid blocks.
/// Zeros are not counted; out-of-range magnitudes land in the end bin and
/// bump the clamp counter.
pub fn pyramid_histogram(stack: &FeatureMapStack, layout: &FeatureLayout) -> Result<FeatureVector> {
    if stack.num_maps() != layout.filter_count() {
        return Err(Error::DimensionMismatch(format!(
            "stack has {} maps, layout expects {}",
            stack.num_maps(),
            layout.filter_count()
        )));
    }
    let (w, h) = (stack.lattice_width(), stack.lattice_height());
    let mut values = vec![0.0; layout.dim()];
    let mut clamped = 0usize;
    for (m, map) in stack.maps.iter().enumerate() {
        for y in 0..h {
            for x in 0..w {
                let v = map.values()[y * w + x];
                if v <= 0.0 {
                    continue;
                }
                let (bin, was_clamped) = layout.edges.bin_for(v);
                if was_clamped {
                    clamped += 1;
                }
                for block in containing_blocks(x, y, w, h) {
                    values[layout.encode(m, block, bin)] += 1.0;
                }
            }
        }
    }
    Ok(FeatureVector { values, clamped })
}

/// Filter indices referenced by any stump of the classifier, through the
/// filter-major layout arithmetic.
pub fn selected_filters(classifier: &StrongClassifier, layout: &FeatureLayout) -> BTreeSet<usize> {
    classifier
        .stumps()
        .iter()
        .map(|s| layout.filter_of_dim(s.dim))
        .collect()
}

/// Raw response maps of an image under a bank: Gabor layers get the
/// energy-normalized magnitudes, deeper layers plain valid convolution.
pub fn response_stack(image: &Image, dict: &AnalysisDictionary) -> Result<Vec<ResponseMap>> {
    if dict.layer() == 1 {
        Ok(normalized_responses(image, dict)?.maps)
    } else {
        dict.filters()
            .iter()
            .map(|f| convolve_valid(image, &f.kernel))
            .collect()
    }
}

/// Responses, winner-take-all, ready for histogramming.
pub fn extract_stack(image: &Image, dict: &AnalysisDictionary) -> Result<FeatureMapStack> {
    max_activate(&response_stack(image, dict)?)
}

/// Per-image stacks for a batch; runs data-parallel with the `parallel`
/// feature.
pub fn batch_stacks(images: &[&Image], dict: &AnalysisDictionary) -> Result<Vec<FeatureMapStack>> {
    par::map_slice(images, |img| extract_stack(img, dict))
        .into_iter()
        .collect()
}

/// Row-major N x D feature matrix.
#[derive(Debug, Clone, PartialEq)]
pub struct FeatureMatrix {
    n_samples: usize,
    n_dims: usize,
    values: Vec<f64>,
}

impl FeatureMatrix {
    pub fn from_rows(rows: Vec<FeatureVector>, dim: usize) -> Result<Self> {
        let n = rows.len();
        let mut values = Vec::with_capacity(n * dim);
        for r in rows {
            if r.values.len() != dim {
                return Err(Error::DimensionMismatch(format!(
                    "feature row of length {} in a D={dim} matrix",
                    r.values.len()
                )));
            }
            values.extend_from_slice(&r.values);
        }
        Ok(Self {
            n_samples: n,
            n_dims: dim,
            values,
        })
    }

    pub fn n_samples(&self) -> usize {
        self.n_samples
    }

    pub fn n_dims(&self) -> usize {
        self.n_dims
    }

    pub fn row(&self, i: usize) -> &[f64] {
        &self.values[i * self.n_dims..(i + 1) * self.n_dims]
    }

    #[inline]
    pub fn get(&self, i: usize, d: usize) -> f64 {
        self.values[i * self.n_dims + d]
    }

    /// Plain text export: a `# D=<dims>` header line, then one
    /// delimiter-separated row per image.
    pub fn write_delimited<W: Write>(&self, out: &mut W, delimiter: char) -> std::io::Result<()> {
        writeln!(out, "# D={}", self.n_dims)?;
        for i in 0..self.n_samples {
            let row = self.row(i);
            let mut line = String::with_capacity(row.len() * 2);
            for (j, v) in row.iter().enumerate() {
                if j > 0 {
                    line.push(delimiter);
                }
                line.push_str(&format!("{v}"));
            }
            writeln!(out, "{line}")?;
        }
        Ok(())
    }
}

/// Histograms a batch of stacks into the feature matrix.
pub fn feature_matrix(stacks: &[FeatureMapStack], layout: &FeatureLayout) -> Result<FeatureMatrix> {
    let rows: Result<Vec<FeatureVector>> = par::map_slice(stacks, |s| pyramid_histogram(s, layout))
        .into_iter()
        .collect();
    FeatureMatrix::from_rows(rows?, layout.dim())
}
