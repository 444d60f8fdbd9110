use std::fs;

use cuboidtrack::experiment::ExperimentConfig;

use crate::failure::Failure;
use crate::Cli;

pub fn dump_defaults() -> String {
    serde_json::to_string_pretty(&ExperimentConfig::default()).expect("config serializes")
}

/// Parses a config document; errors name the offending field path.
pub fn parse(text: &str) -> Result<ExperimentConfig, Failure> {
    let de = &mut serde_json::Deserializer::from_str(text);
    serde_path_to_error::deserialize(de).map_err(|e| {
        let path = e.path().to_string();
        Failure::config(format!("config field `{path}`: {}", e.into_inner()))
    })
}

/// Config file (or defaults) with command-line overrides applied, validated.
/// Commands that draw no random numbers may leave the seed unset.
pub fn resolve(cli: &Cli, needs_seed: bool) -> Result<ExperimentConfig, Failure> {
    let mut cfg = match &cli.config {
        Some(path) => parse(&fs::read_to_string(path).map_err(|e| Failure::io(path, e))?)?,
        None => ExperimentConfig::default(),
    };
    if let Some(seed) = cli.seed {
        cfg.seed = Some(seed);
    }
    if let Some(out) = &cli.out {
        cfg.out_dir = out.display().to_string();
    }
    if cli.no_filtering {
        cfg.tracker.filtering = false;
    }
    if cli.no_heatmap {
        cfg.tracker.conditioning = false;
    }
    if let Some(mode) = cli.init {
        cfg.tracker.init_mode = mode;
    }
    if needs_seed || cfg.seed.is_some() {
        cfg.validate()?;
    } else {
        ExperimentConfig { seed: Some(0), ..cfg.clone() }.validate()?;
    }
    log::debug!("resolved config: {cfg:?}");
    Ok(cfg)
}
