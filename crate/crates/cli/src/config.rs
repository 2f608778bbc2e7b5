use std::path::Path;

use conceptbench::experiments::ExperimentConfig;

use crate::error::CliError;

fn line_col(text: &str, offset: usize) -> (usize, usize) {
    let before = &text[..offset.min(text.len())];
    let line = before.matches('\n').count() + 1;
    let col = before.len() - before.rfind('\n').map_or(0, |i| i + 1) + 1;
    (line, col)
}

/// Parses a TOML experiment config, rejecting unknown keys, then fills
/// per-experiment defaults and validates.
pub fn parse_config(text: &str) -> Result<ExperimentConfig, CliError> {
    let cfg: ExperimentConfig = toml::from_str(text).map_err(|e| {
        let msg = e.message().trim().to_string();
        CliError::Validation(match e.span() {
            Some(span) => {
                let (line, col) = line_col(text, span.start);
                format!("parse error at line {line}, column {col}: {msg}")
            }
            None => format!("parse error: {msg}"),
        })
    })?;
    cfg.with_defaults().map_err(|e| CliError::Validation(format!("validation error: {e}")))
}

pub fn load_config(path: &Path) -> Result<ExperimentConfig, CliError> {
    let text = std::fs::read_to_string(path)
        .map_err(|e| CliError::Validation(format!("cannot read {}: {e}", path.display())))?;
    parse_config(&text).map_err(|e| CliError::Validation(format!("{}: {e}", path.display())))
}

pub fn to_toml(cfg: &ExperimentConfig) -> Result<String, CliError> {
    toml::to_string(cfg).map_err(|e| CliError::Validation(format!("cannot serialize config: {e}")))
}

/// Applies `--seed` and `--scale` and re-validates.
pub fn apply_overrides(mut cfg: ExperimentConfig, seed: Option<u64>, scale: Option<usize>) -> Result<ExperimentConfig, CliError> {
    if let Some(s) = seed {
        cfg.seeds = vec![s];
    }
    if let Some(cap) = scale {
        cfg.max_samples = cap;
    }
    cfg.validate().map_err(|e| CliError::Validation(format!("validation error: {e}")))?;
    Ok(cfg)
}
