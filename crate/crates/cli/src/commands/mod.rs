pub mod analyze;
pub mod data;
pub mod run;

use anyhow::anyhow;
use decompcheck::model::Dataset;
use decompcheck::ingest::load_dataset;

use crate::config::Config;
use crate::error::{CliError, CliResult};
use crate::DataArgs;

/// Loads the dataset named by `--dataset` or, failing that, the config.
pub fn load(config: &Config, data: &DataArgs) -> CliResult<Dataset> {
    let path = match (&data.dataset, &config.dataset) {
        (Some(p), _) => p.clone(),
        (None, Some(p)) => config.resolve(p),
        (None, None) => return Err(CliError::usage(anyhow!("no dataset: pass --dataset or set `dataset` in the config"))),
    };
    Ok(load_dataset(&path, config.schema_version())?)
}
