//! Training run configuration: command-line flags, optionally backed by a
//! flat `key = value` config file. Flags that were given explicitly win over
//! file values; the seed additionally falls back to `$DEEPBOOST_SEED`.

use std::collections::BTreeMap;
use std::path::Path;

use anyhow::{Context, Result};
use clap::parser::ValueSource;
use clap::ArgMatches;
use deepboost_core::deepmodel::TrainConfig;
use deepboost_core::filters::GaborParams;

use crate::{TrainArgs, UsageError};

pub const SEED_ENV: &str = "DEEPBOOST_SEED";

/// Parses `key = value` lines; `#` starts a comment. Keys use the flag
/// spelling (`target-size`, `no-compress`, ...).
pub fn parse_config_file(text: &str) -> Result<BTreeMap<String, String>> {
    let mut out = BTreeMap::new();
    for (lineno, raw) in text.lines().enumerate() {
        let line = raw.split('#').next().unwrap_or("").trim();
        if line.is_empty() {
            continue;
        }
        let Some((key, value)) = line.split_once('=') else {
            return Err(UsageError(format!(
                "config line {}: expected `key = value`, got {raw:?}",
                lineno + 1
            ))
            .into());
        };
        out.insert(key.trim().to_string(), value.trim().to_string());
    }
    Ok(out)
}

fn apply<T: std::str::FromStr>(target: &mut T, key: &str, value: &str) -> Result<()>
where
    T::Err: std::fmt::Display,
{
    *target = value
        .parse()
        .map_err(|e| UsageError(format!("config key {key}: {e}")))?;
    Ok(())
}

/// Merges a config file into the parsed args: every key whose flag was not
/// given on the command line overrides the default.
pub fn merge_config_file(args: &mut TrainArgs, matches: &ArgMatches, path: &Path) -> Result<()> {
    let text = std::fs::read_to_string(path)
        .with_context(|| format!("reading config file {}", path.display()))?;
    const KNOWN_KEYS: &[&str] = &[
        "dataset",
        "out",
        "target_size",
        "layers",
        "rounds",
        "lambda",
        "eta",
        "grad_steps",
        "outer_iters",
        "tol",
        "bins",
        "orientations",
        "compression_threshold",
        "no_compress",
        "raw_compose",
        "seed",
        "synth_n",
        "jobs",
    ];
    let from_cli = |id: &str| matches.value_source(id) == Some(ValueSource::CommandLine);
    for (key, value) in parse_config_file(&text)? {
        let id = key.replace('-', "_");
        if !KNOWN_KEYS.contains(&id.as_str()) {
            return Err(UsageError(format!("unknown config key {key:?}")).into());
        }
        if from_cli(&id) {
            continue;
        }
        match id.as_str() {
            "dataset" => apply(&mut args.dataset, &key, &value)?,
            "out" => apply(&mut args.out, &key, &value)?,
            "target_size" => apply(&mut args.target_size, &key, &value)?,
            "layers" => apply(&mut args.layers, &key, &value)?,
            "rounds" => apply(&mut args.rounds, &key, &value)?,
            "lambda" => apply(&mut args.lambda, &key, &value)?,
            "eta" => apply(&mut args.eta, &key, &value)?,
            "grad_steps" => apply(&mut args.grad_steps, &key, &value)?,
            "outer_iters" => apply(&mut args.outer_iters, &key, &value)?,
            "tol" => apply(&mut args.tol, &key, &value)?,
            "bins" => apply(&mut args.bins, &key, &value)?,
            "orientations" => apply(&mut args.orientations, &key, &value)?,
            "compression_threshold" => apply(&mut args.compression_threshold, &key, &value)?,
            "no_compress" => apply(&mut args.no_compress, &key, &value)?,
            "raw_compose" => apply(&mut args.raw_compose, &key, &value)?,
            "seed" => {
                let parsed: u64 = value
                    .parse()
                    .map_err(|e| UsageError(format!("config key {key}: {e}")))?;
                args.seed = Some(parsed);
            }
            "synth_n" => apply(&mut args.synth_n, &key, &value)?,
            "jobs" => {
                let parsed: usize = value
                    .parse()
                    .map_err(|e| UsageError(format!("config key {key}: {e}")))?;
                args.jobs = Some(parsed);
            }
            other => {
                return Err(UsageError(format!("unknown config key {other:?}")).into());
            }
        }
    }
    Ok(())
}

pub fn parse_rounds(spec: &str) -> Result<Vec<usize>> {
    let rounds: std::result::Result<Vec<usize>, _> =
        spec.split(',').map(|p| p.trim().parse::<usize>()).collect();
    let rounds = rounds.map_err(|e| UsageError(format!("--rounds {spec:?}: {e}")))?;
    if rounds.is_empty() || rounds.contains(&0) {
        return Err(UsageError("--rounds needs positive integers".into()).into());
    }
    Ok(rounds)
}

/// Seed resolution: explicit flag/config value, else `$DEEPBOOST_SEED`, else 0.
pub fn resolve_seed(explicit: Option<u64>) -> Result<u64> {
    if let Some(s) = explicit {
        return Ok(s);
    }
    match std::env::var(SEED_ENV) {
        Ok(text) => text
            .parse()
            .map_err(|e| UsageError(format!("${SEED_ENV}={text:?}: {e}")).into()),
        Err(_) => Ok(0),
    }
}

pub fn train_config_from_args(args: &TrainArgs) -> Result<TrainConfig> {
    Ok(TrainConfig {
        layers: args.layers,
        rounds: parse_rounds(&args.rounds)?,
        lambda: args.lambda,
        eta: args.eta,
        grad_steps: args.grad_steps,
        outer_iters: args.outer_iters,
        tol: args.tol,
        bins: args.bins,
        gabor: GaborParams {
            orientations: args.orientations,
            ..GaborParams::default()
        },
        compression_threshold: args.compression_threshold,
        compress: !args.no_compress,
        raw_compose: args.raw_compose,
        seed: resolve_seed(args.seed)?,
        target_size: args.target_size,
    })
}
