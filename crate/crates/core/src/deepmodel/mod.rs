//! Layer stacking, one-vs-all multiclass training and decision, model
//! persistence, and template rendering.
//!
//! Each class owns a stack of trained layers. Layer 1 starts from the Gabor
//! bank; afterwards the filters behind the selected features are composed
//! pairwise, near-duplicates are compressed away, and the result becomes the
//! next layer's bank. At test time a class's score is the sum of its
//! per-layer ensemble scores and the predicted label is the argmax class.

mod persist;

pub use persist::{load_model, model_bytes, save_model};

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use crate::dictlearn::{joint_train_layer, JointConfig, LayerModel};
use crate::error::{Error, Result};
use crate::features::{extract_stack, pyramid_histogram};
use crate::filters::{
    compose_all, compress, make_gabor_bank, min_max_stretch, AnalysisDictionary, Composition,
    Filter, GaborParams, DEFAULT_COMPRESSION_THRESHOLD,
};
use crate::imagekit::{Image, LabeledDataset};
use crate::par;

/// Whole-model training configuration shared by every class.
#[derive(Debug, Clone, PartialEq)]
pub struct TrainConfig {
    /// layer count L
    pub layers: usize,
    /// boosting rounds per layer; the last entry repeats for deeper layers
    pub rounds: Vec<usize>,
    pub lambda: f64,
    pub eta: f64,
    pub grad_steps: usize,
    pub outer_iters: usize,
    pub tol: f64,
    pub bins: usize,
    pub gabor: GaborParams,
    pub compression_threshold: f64,
    /// disable to keep every composed filter (slower deep layers)
    pub compress: bool,
    /// keep raw sigmoid outputs when composing instead of re-normalizing
    pub raw_compose: bool,
    pub seed: u64,
    /// expected image side; prediction validates against it
    pub target_size: usize,
}

impl Default for TrainConfig {
    fn default() -> Self {
        Self {
            layers: 2,
            rounds: vec![50],
            lambda: 0.1,
            eta: 0.01,
            grad_steps: 10,
            outer_iters: 5,
            tol: 1e-3,
            bins: 50,
            gabor: GaborParams::default(),
            compression_threshold: DEFAULT_COMPRESSION_THRESHOLD,
            compress: true,
            raw_compose: false,
            seed: 0,
            target_size: 60,
        }
    }
}

impl TrainConfig {
    pub fn validate(&self) -> Result<()> {
        if self.layers == 0 {
            return Err(Error::InvalidArgument("layers must be >= 1".into()));
        }
        if self.rounds.is_empty() || self.rounds.contains(&0) {
            return Err(Error::InvalidArgument(
                "every layer needs >= 1 boosting round".into(),
            ));
        }
        if !self.compression_threshold.is_finite() || self.compression_threshold <= 0.0 {
            return Err(Error::InvalidArgument(
                "compression threshold must be > 0".into(),
            ));
        }
        if self.target_size == 0 {
            return Err(Error::InvalidArgument("target_size must be > 0".into()));
        }
        self.joint_config(1).validate()
    }

    pub fn rounds_for_layer(&self, layer: usize) -> usize {
        debug_assert!(layer >= 1);
        *self
            .rounds
            .get(layer - 1)
            .unwrap_or_else(|| self.rounds.last().expect("rounds nonempty"))
    }

    pub fn joint_config(&self, layer: usize) -> JointConfig {
        JointConfig {
            lambda: self.lambda,
            eta: self.eta,
            grad_steps: self.grad_steps,
            outer_iters: self.outer_iters,
            tol: self.tol,
            rounds: self.rounds_for_layer(layer),
            bins: self.bins,
        }
    }

    fn composition(&self) -> Composition {
        if self.raw_compose {
            Composition::Raw
        } else {
            Composition::Normalized
        }
    }
}

/// One class's trained layer stack.
#[derive(Debug, Clone)]
pub struct ClassModel {
    /// 1-based class id
    pub class_id: usize,
    pub layers: Vec<LayerModel>,
    /// layer after which training stopped because fewer than two filters
    /// were selected (composition needs a pair)
    pub truncated_after: Option<usize>,
}

impl ClassModel {
    /// Per-layer ensemble scores of one image.
    pub fn layer_scores(&self, image: &Image) -> Result<Vec<f64>> {
        self.layers
            .iter()
            .map(|layer| {
                let stack = extract_stack(image, &layer.dictionary)?;
                let fv = pyramid_histogram(&stack, &layer.layout)?;
                layer.classifier.score(&fv.values)
            })
            .collect()
    }

    /// Sum over layers of the ensemble scores.
    pub fn score(&self, image: &Image) -> Result<f64> {
        Ok(self.layer_scores(image)?.iter().sum())
    }
}

/// The K-class one-vs-all bundle.
#[derive(Debug, Clone)]
pub struct DeepBoostModel {
    pub class_models: Vec<ClassModel>,
    pub class_names: Vec<String>,
    pub config: TrainConfig,
}

/// Builds the next layer's bank from a layer's selected filters: pairwise
/// composition, optional compression, ids renumbered to positions.
fn next_layer_dictionary(
    layer: &LayerModel,
    config: &TrainConfig,
    class_id: usize,
    rng: &mut ChaCha8Rng,
) -> Result<Option<AnalysisDictionary>> {
    let selected: Vec<Filter> = layer
        .selected
        .iter()
        .map(|&m| layer.dictionary.filters()[m].clone())
        .collect();
    if selected.len() < 2 {
        return Ok(None);
    }
    let composed = compose_all(&selected, config.composition())?;
    let kept = if config.compress {
        compress(&composed, config.compression_threshold, rng)
    } else {
        composed
    };
    let renumbered: Vec<Filter> = kept
        .into_iter()
        .enumerate()
        .map(|(i, mut f)| {
            f.id = i;
            f
        })
        .collect();
    Ok(Some(AnalysisDictionary::new(
        renumbered,
        layer.dictionary.layer() + 1,
        class_id,
    )?))
}

/// Trains the full layer stack for one class: positives are the class's
/// images, negatives everything else.
pub fn train_class_model(
    dataset: &LabeledDataset,
    class_id: usize,
    config: &TrainConfig,
) -> Result<ClassModel> {
    config.validate()?;
    let positives = dataset.images_of(class_id);
    let negatives = dataset.images_not_of(class_id);
    if positives.is_empty() {
        return Err(Error::EmptyInput("class has no images"));
    }
    if negatives.is_empty() {
        return Err(Error::EmptyInput("class has no negatives"));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(config.seed.wrapping_add(class_id as u64));
    let mut dict = make_gabor_bank(&config.gabor, class_id)?;
    let mut layers = Vec::with_capacity(config.layers);
    let mut truncated_after = None;

    for layer_idx in 1..=config.layers {
        let layer = joint_train_layer(
            &positives,
            &negatives,
            &dict,
            &config.joint_config(layer_idx),
        )?;
        let next = if layer_idx < config.layers {
            next_layer_dictionary(&layer, config, class_id, &mut rng)?
        } else {
            None
        };
        layers.push(layer);
        match next {
            Some(d) => dict = d,
            None => {
                if layer_idx < config.layers {
                    truncated_after = Some(layer_idx);
                }
                break;
            }
        }
    }
    Ok(ClassModel {
        class_id,
        layers,
        truncated_after,
    })
}

/// Trains K independent one-vs-all class models (in parallel with the
/// `parallel` feature); class k's compression rng is seeded `seed + k`.
pub fn train_multiclass(dataset: &LabeledDataset, config: &TrainConfig) -> Result<DeepBoostModel> {
    config.validate()?;
    let k = dataset.num_classes();
    if k < 2 {
        return Err(Error::InvalidArgument(format!(
            "multiclass training needs >= 2 classes, got {k}"
        )));
    }
    let results = par::map_range(k, |idx| train_class_model(dataset, idx + 1, config));
    let mut class_models = Vec::with_capacity(k);
    for (idx, result) in results.into_iter().enumerate() {
        match result {
            Ok(model) => class_models.push(model),
            Err(e) => {
                return Err(Error::ClassTraining {
                    class: dataset.class_names[idx].clone(),
                    source: Box::new(e),
                })
            }
        }
    }
    Ok(DeepBoostModel {
        class_models,
        class_names: dataset.class_names.clone(),
        config: config.clone(),
    })
}

impl DeepBoostModel {
    pub fn num_classes(&self) -> usize {
        self.class_models.len()
    }

    /// Scores the image under every class and returns the argmax class id
    /// (1-based; ties to the lowest id) with the per-class score vector.
    pub fn predict(&self, image: &Image) -> Result<(usize, Vec<f64>)> {
        let side = self.config.target_size;
        if image.width() != side || image.height() != side {
            return Err(Error::DimensionMismatch(format!(
                "image is {}x{}, model expects {side}x{side}",
                image.width(),
                image.height()
            )));
        }
        let scores: Result<Vec<f64>> = self.class_models.iter().map(|c| c.score(image)).collect();
        let scores = scores?;
        let mut best = 0usize;
        for (i, &s) in scores.iter().enumerate().skip(1) {
            if s > scores[best] {
                best = i;
            }
        }
        Ok((self.class_models[best].class_id, scores))
    }
}

/// Renders the layer's selected filters onto a canvas: each kernel is
/// min-max-stretched and added at its strongest activation site on the
/// reference image. Returns the canvas and whether it is blank (no selected
/// features produced an activation).
pub fn render_template(
    class_model: &ClassModel,
    layer: usize,
    reference: &Image,
    canvas_size: usize,
) -> Result<(Image, bool)> {
    let layer_model = class_model
        .layers
        .get(layer.wrapping_sub(1))
        .ok_or_else(|| {
            Error::InvalidArgument(format!(
                "class {} has {} layers, asked for layer {layer}",
                class_model.class_id,
                class_model.layers.len()
            ))
        })?;
    let mut canvas = vec![0.0f64; canvas_size * canvas_size];
    let mut drew_any = false;
    if !layer_model.selected.is_empty() {
        let stack = extract_stack(reference, &layer_model.dictionary)?;
        let k = layer_model.dictionary.kernel_size();
        for &m in &layer_model.selected {
            let map = &stack.maps()[m];
            let mut best: Option<(usize, usize, f64)> = None;
            for entry in &stack.index().entries {
                if entry.filter != m {
                    continue;
                }
                let v = map.get(entry.x, entry.y);
                if best.is_none_or(|(_, _, b)| v > b) {
                    best = Some((entry.x, entry.y, v));
                }
            }
            let Some((x, y, _)) = best else { continue };
            let tile = min_max_stretch(&layer_model.dictionary.filters()[m].kernel);
            for ky in 0..k {
                for kx in 0..k {
                    let (cx, cy) = (x + kx, y + ky);
                    if cx < canvas_size && cy < canvas_size {
                        canvas[cy * canvas_size + cx] += tile[ky * k + kx];
                    }
                }
            }
            drew_any = true;
        }
    }
    let image = Image::from_clamped(canvas_size, canvas_size, canvas)?;
    Ok((image, !drew_any))
}
