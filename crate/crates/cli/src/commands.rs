//! Subcommand implementations. All artifacts land under the command's output
//! directory.

use std::fs;
use std::path::Path;
use std::time::Instant;

use anyhow::{Context, Result};
use clap::ArgMatches;

use deepboost_core::boosting::write_round_csv;
use deepboost_core::deepmodel::{
    load_model, render_template as render_layer_template, save_model, train_multiclass,
    DeepBoostModel,
};
use deepboost_core::dictlearn::write_objective_csv;
use deepboost_core::evalkit::evaluate_model;
use deepboost_core::filters::export_filter_grid;
use deepboost_core::imagekit::{load_cifar10, load_image, load_image_dir, LabeledDataset};
use deepboost_core::synth::{bars_dataset, write_dataset_dirs};

use crate::config::{merge_config_file, resolve_seed, train_config_from_args};
use crate::plot::save_line_plot;
use crate::{
    EvaluateArgs, InspectArgs, PredictArgs, RenderArgs, SynthArgs, TrainArgs, UsageError,
};

/// Synthetic evaluation sets are drawn from a different stream than the
/// training sets of the same seed.
const TEST_SEED_OFFSET: u64 = 1_000_003;

const DISTRACTOR_FRACTION: f64 = 0.2;

enum Split {
    Train,
    Test,
}

fn load_dataset(
    spec: &str,
    target_size: usize,
    seed: u64,
    n_per_class: usize,
    split: Split,
) -> Result<LabeledDataset> {
    let synth_seed = match split {
        Split::Train => seed,
        Split::Test => seed.wrapping_add(TEST_SEED_OFFSET),
    };
    match spec {
        "synth-bars" => Ok(bars_dataset(n_per_class, synth_seed, 0.0)),
        "synth-bars-distract" => Ok(bars_dataset(n_per_class, synth_seed, DISTRACTOR_FRACTION)),
        _ => {
            if let Some(path) = spec.strip_prefix("dir:") {
                let (dataset, skipped) = load_image_dir(Path::new(path), target_size)?;
                if skipped > 0 {
                    eprintln!("warning: skipped {skipped} unreadable image file(s)");
                }
                Ok(dataset)
            } else if let Some(path) = spec.strip_prefix("cifar10:") {
                Ok(load_cifar10(Path::new(path))?)
            } else {
                Err(UsageError(format!(
                    "unknown dataset spec {spec:?}; use synth-bars, synth-bars-distract, dir:<path> or cifar10:<path>"
                ))
                .into())
            }
        }
    }
}

fn safe_name(name: &str) -> String {
    name.chars()
        .map(|c| if c.is_ascii_alphanumeric() { c } else { '_' })
        .collect()
}

pub fn train(mut args: TrainArgs, matches: &ArgMatches) -> Result<()> {
    if let Some(path) = args.config.clone() {
        merge_config_file(&mut args, matches, &path)?;
    }
    deepboost_core::init_parallelism(args.jobs);
    let config = train_config_from_args(&args)?;
    let dataset = load_dataset(
        &args.dataset,
        config.target_size,
        config.seed,
        args.synth_n,
        Split::Train,
    )?;
    println!(
        "training on {} images, {} classes, {} layer(s), seed {}",
        dataset.len(),
        dataset.num_classes(),
        config.layers,
        config.seed
    );

    let started = Instant::now();
    let model = train_multiclass(&dataset, &config)?;
    let elapsed = started.elapsed();
    println!("trained in {elapsed:.1?}");

    fs::create_dir_all(&args.out)
        .with_context(|| format!("creating output directory {}", args.out.display()))?;
    let model_path = args.out.join("model.dpb");
    save_model(&model, &model_path)?;
    println!("model written to {}", model_path.display());

    let mut class_reports = Vec::new();
    for class in &model.class_models {
        let name = safe_name(&model.class_names[class.class_id - 1]);
        let reference = dataset
            .images_of(class.class_id)
            .first()
            .cloned()
            .cloned()
            .expect("trained class has images");
        let mut layer_reports = Vec::new();
        for (idx, layer) in class.layers.iter().enumerate() {
            let layer_no = idx + 1;
            let mut buf = Vec::new();
            write_objective_csv(&mut buf, &layer.trace)?;
            fs::write(args.out.join(format!("objective_{name}_layer{layer_no}.csv")), buf)?;

            let mut buf = Vec::new();
            write_round_csv(&mut buf, &layer.boost_rounds)?;
            fs::write(args.out.join(format!("boost_{name}_layer{layer_no}.csv")), buf)?;

            export_filter_grid(
                &layer.dictionary,
                &args.out.join(format!("filters_{name}_layer{layer_no}.png")),
                12,
            )?;

            let (canvas, blank) = render_layer_template(
                class,
                layer_no,
                &reference,
                config.target_size,
            )?;
            if blank {
                eprintln!("warning: class {name} layer {layer_no} selected no features; template is blank");
            }
            canvas.save_png(&args.out.join(format!("template_{name}_layer{layer_no}.png")))?;

            layer_reports.push(serde_json::json!({
                "layer": layer_no,
                "filters": layer.dictionary.len(),
                "selected": layer.selected.len(),
                "boost_rounds_used": layer.boost_rounds.len(),
                "objective_trace_len": layer.trace.len(),
            }));
        }
        class_reports.push(serde_json::json!({
            "class": model.class_names[class.class_id - 1],
            "truncated_after_layer": class.truncated_after,
            "layers": layer_reports,
        }));
    }
    let report = serde_json::json!({
        "dataset": args.dataset,
        "images": dataset.len(),
        "classes": dataset.num_classes(),
        "seed": config.seed,
        "layers": config.layers,
        "rounds": config.rounds,
        "lambda": config.lambda,
        "train_seconds": elapsed.as_secs_f64(),
        "class_models": class_reports,
    });
    fs::write(
        args.out.join("training_report.json"),
        serde_json::to_string_pretty(&report)?,
    )?;
    println!("artifacts written to {}", args.out.display());
    Ok(())
}

pub fn evaluate(args: EvaluateArgs) -> Result<()> {
    deepboost_core::init_parallelism(args.jobs);
    let model = load_model(&args.model)
        .with_context(|| format!("loading model {}", args.model.display()))?;
    let seed = resolve_seed(args.seed)?;
    let dataset = load_dataset(
        &args.dataset,
        model.config.target_size,
        seed,
        args.synth_n,
        Split::Test,
    )?;
    if dataset.class_names != model.class_names {
        eprintln!(
            "warning: dataset classes {:?} differ from model classes {:?}",
            dataset.class_names, model.class_names
        );
    }
    let report = evaluate_model(&model, &dataset)?;
    fs::create_dir_all(&args.out)?;
    fs::write(args.out.join("report.json"), report.to_json())?;
    let mut buf = Vec::new();
    report.write_confusion_csv(&mut buf)?;
    fs::write(args.out.join("confusion.csv"), buf)?;
    println!("accuracy: {:.4} on {} images", report.accuracy, dataset.len());
    if let Some(mae) = report.mae {
        println!("mae: {mae:.3}");
    }
    if let Some(curve) = &report.cum_scores {
        let mut buf = Vec::new();
        report.write_cum_csv(&mut buf)?;
        fs::write(args.out.join("cum_score.csv"), buf)?;
        save_line_plot(curve, 100.0, &args.out.join("cum_score.png"))?;
    }
    println!("report written to {}", args.out.display());
    Ok(())
}

pub fn predict(args: PredictArgs) -> Result<()> {
    let model = load_model(&args.model)
        .with_context(|| format!("loading model {}", args.model.display()))?;
    let image = load_image(&args.image, model.config.target_size)?;
    let (class_id, scores) = model.predict(&image)?;
    println!("predicted: {}", model.class_names[class_id - 1]);
    for (name, score) in model.class_names.iter().zip(&scores) {
        println!("  {name}: {score:+.4}");
    }
    Ok(())
}

pub fn synth(args: SynthArgs) -> Result<()> {
    let fraction = match args.name.as_str() {
        "synth-bars" => 0.0,
        "synth-bars-distract" => DISTRACTOR_FRACTION,
        other => {
            return Err(UsageError(format!(
                "unknown generator {other:?}; use synth-bars or synth-bars-distract"
            ))
            .into())
        }
    };
    let seed = resolve_seed(args.seed)?;
    let dataset = bars_dataset(args.n_per_class, seed, fraction);
    write_dataset_dirs(&dataset, &args.out)?;
    println!(
        "wrote {} images ({} per class) to {}",
        dataset.len(),
        args.n_per_class,
        args.out.display()
    );
    Ok(())
}

pub fn inspect_filters(args: InspectArgs) -> Result<()> {
    let model = load_model(&args.model)
        .with_context(|| format!("loading model {}", args.model.display()))?;
    fs::create_dir_all(&args.out)?;
    println!("class            layer  filters  selected");
    for class in &model.class_models {
        let name = safe_name(&model.class_names[class.class_id - 1]);
        for (idx, layer) in class.layers.iter().enumerate() {
            let path = args
                .out
                .join(format!("filters_{name}_layer{}.png", idx + 1));
            export_filter_grid(&layer.dictionary, &path, args.tile_scale)?;
            println!(
                "{:<16} {:>5} {:>8} {:>9}",
                model.class_names[class.class_id - 1],
                idx + 1,
                layer.dictionary.len(),
                layer.selected.len()
            );
        }
    }
    println!("filter grids written to {}", args.out.display());
    Ok(())
}

pub fn render_template(args: RenderArgs) -> Result<()> {
    let model: DeepBoostModel = load_model(&args.model)
        .with_context(|| format!("loading model {}", args.model.display()))?;
    let class_idx = model
        .class_names
        .iter()
        .position(|n| n == &args.class)
        .ok_or_else(|| {
            UsageError(format!(
                "class {:?} not in model (classes: {:?})",
                args.class, model.class_names
            ))
        })?;
    let reference = load_image(&args.image, model.config.target_size)?;
    let (canvas, blank) = render_layer_template(
        &model.class_models[class_idx],
        args.layer,
        &reference,
        model.config.target_size,
    )?;
    if blank {
        eprintln!("warning: no selected features produced activations; template is blank");
    }
    canvas.save_png(&args.out)?;
    println!("template written to {}", args.out.display());
    Ok(())
}
