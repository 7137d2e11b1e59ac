//! Flat `key = value` configuration files.
//!
//! Blank lines and `#` comments are ignored. Each key may appear once;
//! unknown keys are errors. Lists are comma-separated.

use std::collections::HashSet;
use std::str::FromStr;

use igo_surrogate::experiment::{
    AlphaPolicy, ExperimentConfig, GateSourceChoice, Spectrum, SurrogateChoice, ThresholdPolicy,
    WeightPreset,
};
use igo_surrogate::CorrelationKind;

/// Every accepted key, in documentation order.
pub const KEYS: &[&str] = &[
    "seed",
    "dimension",
    "lambda",
    "weights",
    "spectrum",
    "rotate",
    "optimum",
    "initial_mean",
    "initial_cov_scale",
    "surrogate",
    "gate_kind",
    "gate_threshold",
    "gate_source",
    "ema_decay",
    "alpha",
    "iterations",
    "replicates",
    "samples",
    "reference_size",
    "gate_pairs",
    "drift_replicates",
    "drift_iterations",
];

#[derive(Debug, thiserror::Error, PartialEq)]
pub enum ConfigError {
    #[error("line {line}: expected `key = value`")]
    Syntax { line: usize },
    #[error("line {line}: unknown key `{key}`")]
    UnknownKey { line: usize, key: String },
    #[error("line {line}: duplicate key `{key}`")]
    Duplicate { line: usize, key: String },
    #[error("line {line}: invalid value for `{key}`: {reason}")]
    Value {
        line: usize,
        key: String,
        reason: String,
    },
}

fn num<T: FromStr>(s: &str) -> Result<T, String> {
    s.trim()
        .parse()
        .map_err(|_| format!("cannot parse `{}` as a number", s.trim()))
}

fn list(s: &str) -> Result<Vec<f64>, String> {
    s.split(',').map(num).collect()
}

fn tagged<'a>(s: &'a str, tag: &str) -> Option<&'a str> {
    s.strip_prefix(tag).and_then(|r| r.strip_prefix(':'))
}

fn weights(v: &str) -> Result<WeightPreset, String> {
    match v {
        "truncation" => Ok(WeightPreset::Truncation { mu: None }),
        "log" => Ok(WeightPreset::LogRank),
        "equal" => Ok(WeightPreset::Equal),
        _ => match tagged(v, "truncation") {
            Some(mu) => Ok(WeightPreset::Truncation { mu: Some(num(mu)?) }),
            None => list(v).map(WeightPreset::Explicit),
        },
    }
}

fn spectrum(v: &str) -> Result<Spectrum, String> {
    match v {
        "sphere" => Ok(Spectrum::Sphere),
        "linear" => Ok(Spectrum::Linear),
        _ => match tagged(v, "geometric") {
            Some(k) => Ok(Spectrum::Geometric(num(k)?)),
            None => list(v).map(Spectrum::Explicit),
        },
    }
}

fn surrogate(v: &str) -> Result<SurrogateChoice, String> {
    match v {
        "exact" => return Ok(SurrogateChoice::Exact),
        "negated" => return Ok(SurrogateChoice::Negated),
        _ => {}
    }
    if let Some(s) = tagged(v, "noise") {
        return Ok(SurrogateChoice::Noise(num(s)?));
    }
    if let Some(s) = tagged(v, "hessian_perturbed") {
        return Ok(SurrogateChoice::HessianPerturbed(num(s)?));
    }
    if let Some(s) = tagged(v, "block_swap") {
        return Ok(SurrogateChoice::BlockSwap(num(s)?));
    }
    Err("expected exact, negated, noise:<sigma>, hessian_perturbed:<eps> or block_swap:<mu>".into())
}

fn boolean(v: &str) -> Result<bool, String> {
    match v {
        "true" => Ok(true),
        "false" => Ok(false),
        _ => Err("expected true or false".into()),
    }
}

fn apply(cfg: &mut ExperimentConfig, key: &str, v: &str) -> Result<(), String> {
    let b = &mut cfg.budgets;
    match key {
        "seed" => cfg.seed = num(v)?,
        "dimension" => cfg.dimension = num(v)?,
        "lambda" => cfg.lambda = num(v)?,
        "weights" => cfg.weights = weights(v)?,
        "spectrum" => cfg.spectrum = spectrum(v)?,
        "rotate" => cfg.rotate = boolean(v)?,
        "optimum" => cfg.optimum = Some(list(v)?),
        "initial_mean" => cfg.initial_mean = Some(list(v)?),
        "initial_cov_scale" => cfg.initial_cov_scale = num(v)?,
        "surrogate" => cfg.surrogate = surrogate(v)?,
        "gate_kind" => cfg.gate_kind = v.parse::<CorrelationKind>().map_err(|e| e.to_string())?,
        "gate_threshold" => {
            cfg.gate_threshold = match v {
                "auto" => ThresholdPolicy::Auto,
                _ => ThresholdPolicy::Fixed(num(v)?),
            }
        }
        "gate_source" => {
            cfg.gate_source = match v {
                "sample" => GateSourceChoice::Sample,
                "ema" => GateSourceChoice::Ema,
                "population" => GateSourceChoice::Population,
                _ => return Err("expected sample, ema or population".into()),
            }
        }
        "ema_decay" => cfg.ema_decay = num(v)?,
        "alpha" => {
            cfg.alpha = match v {
                "optimal" => AlphaPolicy::Optimal,
                "max" => AlphaPolicy::Max,
                _ => AlphaPolicy::Fixed(num(v)?),
            }
        }
        "iterations" => cfg.iterations = num(v)?,
        "replicates" => cfg.replicates = num(v)?,
        "samples" => b.samples = num(v)?,
        "reference_size" => b.reference_size = num(v)?,
        "gate_pairs" => b.gate_pairs = num(v)?,
        "drift_replicates" => b.drift_replicates = num(v)?,
        "drift_iterations" => b.drift_iterations = num(v)?,
        _ => unreachable!("key checked against KEYS"),
    }
    Ok(())
}

/// Parse configuration text on top of the defaults.
pub fn parse(text: &str) -> Result<ExperimentConfig, ConfigError> {
    let mut cfg = ExperimentConfig::default();
    let mut seen = HashSet::new();
    for (i, raw) in text.lines().enumerate() {
        let line = i + 1;
        let content = raw.split('#').next().unwrap_or("").trim();
        if content.is_empty() {
            continue;
        }
        let (key, value) = content
            .split_once('=')
            .ok_or(ConfigError::Syntax { line })?;
        let (key, value) = (key.trim(), value.trim());
        if !KEYS.contains(&key) {
            return Err(ConfigError::UnknownKey {
                line,
                key: key.into(),
            });
        }
        if !seen.insert(key.to_string()) {
            return Err(ConfigError::Duplicate {
                line,
                key: key.into(),
            });
        }
        apply(&mut cfg, key, value).map_err(|reason| ConfigError::Value {
            line,
            key: key.into(),
            reason,
        })?;
    }
    Ok(cfg)
}
