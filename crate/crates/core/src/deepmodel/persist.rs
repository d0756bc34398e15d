//! Versioned binary model file.
//!
//! Layout (everything little-endian):
//!
//! ```text
//! magic   8 bytes  "DPBOOST1"
//! version u32      currently 1
//! count   u32      number of sections
//! section (repeated):
//!   tag   4 bytes  "CONF" once, then "CMDL" per class
//!   len   u64      payload length
//!   payload
//!   crc   u32      crc32 of the payload
//! ```
//!
//! The CONF payload carries the training configuration and class names; each
//! CMDL payload one class's layer stack. Per-round boosting diagnostics are
//! training artifacts (emitted as CSV) and are not persisted.

use std::collections::BTreeSet;
use std::fs;
use std::path::Path;

use crate::boosting::{Stump, StrongClassifier};
use crate::dictlearn::{LayerModel, OuterIterStats};
use crate::error::{Error, ModelFormatError, Result};
use crate::features::{BinEdges, FeatureLayout};
use crate::filters::{AnalysisDictionary, Filter, GaborParams};
use crate::imagekit::Kernel;

use super::{ClassModel, DeepBoostModel, TrainConfig};

const MAGIC: &[u8; 8] = b"DPBOOST1";
const FORMAT_VERSION: u32 = 1;
const TAG_CONFIG: &[u8; 4] = b"CONF";
const TAG_CLASS: &[u8; 4] = b"CMDL";

// ---------------------------------------------------------------------------
// primitive writers/readers

struct Writer {
    buf: Vec<u8>,
}

impl Writer {
    fn new() -> Self {
        Self { buf: Vec::new() }
    }

    fn u8(&mut self, v: u8) {
        self.buf.push(v);
    }

    fn bool(&mut self, v: bool) {
        self.u8(v as u8);
    }

    fn u64(&mut self, v: u64) {
        self.buf.extend_from_slice(&v.to_le_bytes());
    }

    fn usize(&mut self, v: usize) {
        self.u64(v as u64);
    }

    fn f64(&mut self, v: f64) {
        self.buf.extend_from_slice(&v.to_le_bytes());
    }

    fn str(&mut self, v: &str) {
        self.usize(v.len());
        self.buf.extend_from_slice(v.as_bytes());
    }
}

struct Reader<'a> {
    data: &'a [u8],
    pos: usize,
    section: &'static str,
}

impl<'a> Reader<'a> {
    fn new(data: &'a [u8], section: &'static str) -> Self {
        Self {
            data,
            pos: 0,
            section,
        }
    }

    fn take(&mut self, n: usize) -> std::result::Result<&'a [u8], ModelFormatError> {
        if self.pos + n > self.data.len() {
            return Err(ModelFormatError::Truncated(self.section));
        }
        let out = &self.data[self.pos..self.pos + n];
        self.pos += n;
        Ok(out)
    }

    fn u8(&mut self) -> std::result::Result<u8, ModelFormatError> {
        Ok(self.take(1)?[0])
    }

    fn bool(&mut self) -> std::result::Result<bool, ModelFormatError> {
        match self.u8()? {
            0 => Ok(false),
            1 => Ok(true),
            v => Err(ModelFormatError::Malformed(format!("bad bool byte {v}"))),
        }
    }

    fn u64(&mut self) -> std::result::Result<u64, ModelFormatError> {
        Ok(u64::from_le_bytes(self.take(8)?.try_into().unwrap()))
    }

    fn usize(&mut self) -> std::result::Result<usize, ModelFormatError> {
        let v = self.u64()?;
        usize::try_from(v).map_err(|_| ModelFormatError::Malformed(format!("count {v} too large")))
    }

    /// Length field that will be used to size an allocation; bounded by the
    /// bytes actually remaining so corrupt counts cannot balloon memory.
    fn count(&mut self, min_item_bytes: usize) -> std::result::Result<usize, ModelFormatError> {
        let v = self.usize()?;
        let remaining = self.data.len() - self.pos;
        if v.checked_mul(min_item_bytes.max(1)).is_none_or(|need| need > remaining) {
            return Err(ModelFormatError::Truncated(self.section));
        }
        Ok(v)
    }

    fn f64(&mut self) -> std::result::Result<f64, ModelFormatError> {
        Ok(f64::from_le_bytes(self.take(8)?.try_into().unwrap()))
    }

    fn str(&mut self) -> std::result::Result<String, ModelFormatError> {
        let len = self.count(1)?;
        let bytes = self.take(len)?;
        String::from_utf8(bytes.to_vec())
            .map_err(|_| ModelFormatError::Malformed("non-utf8 string".into()))
    }

    fn done(&self) -> std::result::Result<(), ModelFormatError> {
        if self.pos != self.data.len() {
            return Err(ModelFormatError::Malformed(format!(
                "{} trailing bytes in {}",
                self.data.len() - self.pos,
                self.section
            )));
        }
        Ok(())
    }
}

// ---------------------------------------------------------------------------
// payload encoding

fn encode_config(config: &TrainConfig, class_names: &[String]) -> Vec<u8> {
    let mut w = Writer::new();
    w.usize(config.layers);
    w.usize(config.rounds.len());
    for &r in &config.rounds {
        w.usize(r);
    }
    w.f64(config.lambda);
    w.f64(config.eta);
    w.usize(config.grad_steps);
    w.usize(config.outer_iters);
    w.f64(config.tol);
    w.usize(config.bins);
    w.usize(config.gabor.orientations);
    w.usize(config.gabor.scales);
    w.usize(config.gabor.size);
    w.f64(config.gabor.wavelength);
    w.f64(config.gabor.sigma);
    w.f64(config.compression_threshold);
    w.bool(config.compress);
    w.bool(config.raw_compose);
    w.u64(config.seed);
    w.usize(config.target_size);
    w.usize(class_names.len());
    for name in class_names {
        w.str(name);
    }
    w.buf
}

fn decode_config(
    payload: &[u8],
) -> std::result::Result<(TrainConfig, Vec<String>), ModelFormatError> {
    let mut r = Reader::new(payload, "CONF");
    let layers = r.usize()?;
    let rounds = (0..r.count(8)?)
        .map(|_| r.usize())
        .collect::<std::result::Result<Vec<_>, _>>()?;
    let config = TrainConfig {
        layers,
        rounds,
        lambda: r.f64()?,
        eta: r.f64()?,
        grad_steps: r.usize()?,
        outer_iters: r.usize()?,
        tol: r.f64()?,
        bins: r.usize()?,
        gabor: GaborParams {
            orientations: r.usize()?,
            scales: r.usize()?,
            size: r.usize()?,
            wavelength: r.f64()?,
            sigma: r.f64()?,
        },
        compression_threshold: r.f64()?,
        compress: r.bool()?,
        raw_compose: r.bool()?,
        seed: r.u64()?,
        target_size: r.usize()?,
    };
    let names = (0..r.count(8)?)
        .map(|_| r.str())
        .collect::<std::result::Result<Vec<_>, _>>()?;
    r.done()?;
    Ok((config, names))
}

fn encode_class(class: &ClassModel) -> Vec<u8> {
    let mut w = Writer::new();
    w.usize(class.class_id);
    w.usize(class.truncated_after.map_or(0, |l| l));
    w.usize(class.layers.len());
    for layer in &class.layers {
        let dict = &layer.dictionary;
        w.usize(dict.layer());
        w.usize(dict.class_id());
        w.usize(dict.kernel_size());
        w.usize(dict.len());
        for f in dict.filters() {
            w.usize(f.id);
            w.usize(f.layer);
            match f.lineage {
                Some((a, b)) => {
                    w.bool(true);
                    w.usize(a);
                    w.usize(b);
                }
                None => w.bool(false),
            }
            for &v in f.kernel.values() {
                w.f64(v);
            }
        }
        w.usize(layer.classifier.rounds());
        w.usize(layer.classifier.len());
        for s in layer.classifier.stumps() {
            w.usize(s.dim);
            w.f64(s.threshold);
            w.f64(s.scale);
            w.f64(s.offset);
        }
        w.usize(layer.layout.filter_count());
        w.usize(layer.layout.edges().edges().len());
        for &e in layer.layout.edges().edges() {
            w.f64(e);
        }
        w.usize(layer.selected.len());
        for &m in &layer.selected {
            w.usize(m);
        }
        w.usize(layer.trace.len());
        for t in &layer.trace {
            w.usize(t.outer_iter);
            w.f64(t.empirical);
            w.f64(t.regularizer);
            w.f64(t.objective);
            w.usize(t.selected_count);
            w.usize(t.boost_rounds_used);
            match t.reg_after_update {
                Some(v) => {
                    w.bool(true);
                    w.f64(v);
                }
                None => w.bool(false),
            }
            w.bool(t.stalled);
        }
    }
    w.buf
}

fn decode_class(payload: &[u8]) -> std::result::Result<ClassModel, ModelFormatError> {
    let malformed = |e: Error| ModelFormatError::Malformed(e.to_string());
    let mut r = Reader::new(payload, "CMDL");
    let class_id = r.usize()?;
    let truncated = r.usize()?;
    let n_layers = r.count(8)?;
    let mut layers = Vec::with_capacity(n_layers);
    for _ in 0..n_layers {
        let dict_layer = r.usize()?;
        let dict_class = r.usize()?;
        let kernel_size = r.usize()?;
        let n_filters = r.count(8)?;
        let mut filters = Vec::with_capacity(n_filters);
        for _ in 0..n_filters {
            let id = r.usize()?;
            let layer = r.usize()?;
            let lineage = if r.bool()? {
                Some((r.usize()?, r.usize()?))
            } else {
                None
            };
            let mut values = Vec::with_capacity(kernel_size * kernel_size);
            for _ in 0..kernel_size * kernel_size {
                values.push(r.f64()?);
            }
            filters.push(Filter {
                kernel: Kernel::new(kernel_size, values).map_err(malformed)?,
                id,
                layer,
                lineage,
            });
        }
        let dictionary =
            AnalysisDictionary::new(filters, dict_layer, dict_class).map_err(malformed)?;

        let rounds_cap = r.usize()?;
        let n_stumps = r.count(32)?;
        if n_stumps > rounds_cap {
            return Err(ModelFormatError::Malformed(format!(
                "{n_stumps} stumps exceed the {rounds_cap}-round cap"
            )));
        }
        let mut classifier = StrongClassifier::new(rounds_cap);
        for _ in 0..n_stumps {
            classifier.push(Stump {
                dim: r.usize()?,
                threshold: r.f64()?,
                scale: r.f64()?,
                offset: r.f64()?,
            });
        }

        let filter_count = r.usize()?;
        let n_edges = r.count(8)?;
        let mut edges = Vec::with_capacity(n_edges);
        for _ in 0..n_edges {
            edges.push(r.f64()?);
        }
        let layout = FeatureLayout::new(filter_count, BinEdges::new(edges).map_err(malformed)?)
            .map_err(malformed)?;

        let n_selected = r.count(8)?;
        let mut selected = BTreeSet::new();
        for _ in 0..n_selected {
            selected.insert(r.usize()?);
        }

        let n_trace = r.count(8)?;
        let mut trace = Vec::with_capacity(n_trace);
        for _ in 0..n_trace {
            trace.push(OuterIterStats {
                outer_iter: r.usize()?,
                empirical: r.f64()?,
                regularizer: r.f64()?,
                objective: r.f64()?,
                selected_count: r.usize()?,
                boost_rounds_used: r.usize()?,
                reg_after_update: if r.bool()? { Some(r.f64()?) } else { None },
                stalled: r.bool()?,
            });
        }
        layers.push(LayerModel {
            dictionary,
            classifier,
            layout,
            selected,
            trace,
            boost_rounds: Vec::new(),
        });
    }
    r.done()?;
    Ok(ClassModel {
        class_id,
        layers,
        truncated_after: if truncated == 0 { None } else { Some(truncated) },
    })
}

// ---------------------------------------------------------------------------
// container

fn push_section(out: &mut Vec<u8>, tag: &[u8; 4], payload: &[u8]) {
    out.extend_from_slice(tag);
    out.extend_from_slice(&(payload.len() as u64).to_le_bytes());
    out.extend_from_slice(payload);
    out.extend_from_slice(&crc32fast::hash(payload).to_le_bytes());
}

/// Serializes a model to its file bytes.
pub fn model_bytes(model: &DeepBoostModel) -> Vec<u8> {
    let mut out = Vec::new();
    out.extend_from_slice(MAGIC);
    out.extend_from_slice(&FORMAT_VERSION.to_le_bytes());
    out.extend_from_slice(&(1 + model.class_models.len() as u32).to_le_bytes());
    push_section(&mut out, TAG_CONFIG, &encode_config(&model.config, &model.class_names));
    for class in &model.class_models {
        push_section(&mut out, TAG_CLASS, &encode_class(class));
    }
    out
}

pub fn save_model(model: &DeepBoostModel, path: &Path) -> Result<()> {
    fs::write(path, model_bytes(model))?;
    Ok(())
}

/// Parses model bytes, verifying magic, version, and per-section checksums.
pub fn model_from_bytes(bytes: &[u8]) -> Result<DeepBoostModel> {
    if bytes.len() < MAGIC.len() {
        return Err(ModelFormatError::Truncated("magic").into());
    }
    if &bytes[..MAGIC.len()] != MAGIC {
        return Err(ModelFormatError::BadMagic.into());
    }
    let mut r = Reader::new(&bytes[MAGIC.len()..], "header");
    let version = u32::from_le_bytes(r.take(4).map_err(Error::ModelFormat)?.try_into().unwrap());
    if version != FORMAT_VERSION {
        return Err(ModelFormatError::UnsupportedVersion(version).into());
    }
    let n_sections =
        u32::from_le_bytes(r.take(4).map_err(Error::ModelFormat)?.try_into().unwrap()) as usize;

    let mut config_and_names = None;
    let mut classes = Vec::new();
    for _ in 0..n_sections {
        let tag: [u8; 4] = r
            .take(4)
            .map_err(|_| ModelFormatError::Truncated("section tag"))?
            .try_into()
            .unwrap();
        let len = u64::from_le_bytes(
            r.take(8)
                .map_err(|_| ModelFormatError::Truncated("section length"))?
                .try_into()
                .unwrap(),
        ) as usize;
        let payload = r
            .take(len)
            .map_err(|_| ModelFormatError::Truncated("section payload"))?;
        let stored_crc = u32::from_le_bytes(
            r.take(4)
                .map_err(|_| ModelFormatError::Truncated("section checksum"))?
                .try_into()
                .unwrap(),
        );
        if crc32fast::hash(payload) != stored_crc {
            return Err(ModelFormatError::ChecksumMismatch {
                section: String::from_utf8_lossy(&tag).into_owned(),
            }
            .into());
        }
        match &tag {
            TAG_CONFIG => config_and_names = Some(decode_config(payload)?),
            TAG_CLASS => classes.push(decode_class(payload)?),
            other => {
                return Err(ModelFormatError::Malformed(format!(
                    "unknown section tag {:?}",
                    String::from_utf8_lossy(other)
                ))
                .into())
            }
        }
    }
    let Some((config, class_names)) = config_and_names else {
        return Err(ModelFormatError::Malformed("missing CONF section".into()).into());
    };
    if class_names.len() != classes.len() {
        return Err(ModelFormatError::Malformed(format!(
            "{} class names but {} class sections",
            class_names.len(),
            classes.len()
        ))
        .into());
    }
    Ok(DeepBoostModel {
        class_models: classes,
        class_names,
        config,
    })
}

pub fn load_model(path: &Path) -> Result<DeepBoostModel> {
    let bytes = fs::read(path)?;
    model_from_bytes(&bytes)
}
