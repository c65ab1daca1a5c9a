pub mod attractor;
pub mod attribute;
pub mod demo;
pub mod simulate;
pub mod sweep;

use crate::config::{self, ModelConfig};
use crate::error::{CliError, CliResult};
use crate::Cli;

pub(crate) fn required_config(cli: &Cli) -> CliResult<&std::path::Path> {
    cli.config
        .as_deref()
        .ok_or_else(|| CliError::config("this command needs --config <path>"))
}

pub(crate) fn load_model(path: &std::path::Path) -> CliResult<ModelConfig> {
    let cfg: ModelConfig = config::load(path)?;
    cfg.validate()
        .map_err(|e| CliError::config(format!("{}: {}", path.display(), strip(&e))))?;
    Ok(cfg)
}

fn strip(e: &CliError) -> String {
    match e {
        CliError::Config(m) | CliError::Runtime(m) => m.clone(),
    }
}

pub(crate) fn to_json<T: serde::Serialize>(v: &T) -> serde_json::Value {
    serde_json::to_value(v).unwrap_or(serde_json::Value::Null)
}
