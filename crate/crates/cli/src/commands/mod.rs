pub mod eval;
pub mod inspect;
pub mod params;
pub mod sr;
pub mod train;

use std::path::Path;

use log::info;
use mamsr::model::load_checkpoint;
use mamsr::{Model, NetworkConfig};

use crate::args::NetworkArgs;
use crate::error::CliError;

pub fn announce(cfg: &NetworkConfig) {
    info!("network: {cfg}");
}

/// Loads a checkpoint and rejects architecture flags that contradict it.
pub fn load_model(path: &Path, net: &NetworkArgs) -> Result<Model, CliError> {
    let model = load_checkpoint(path)?;
    net.check_against(&model.cfg)?;
    announce(&model.cfg);
    Ok(model)
}

pub fn create_dir(path: &Path) -> Result<(), CliError> {
    std::fs::create_dir_all(path)
        .map_err(|e| CliError::Other(anyhow::anyhow!("cannot create {}: {e}", path.display())))
}
