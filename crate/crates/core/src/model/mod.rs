//! Network architecture, parameters and checkpoints.

pub mod checkpoint;
pub mod config;
pub mod mamb;
pub mod network;
pub mod params;

pub use checkpoint::{load_checkpoint, save_checkpoint};
pub use config::{IcdStatistic, NetworkConfig, Paths};
pub use mamb::{icd_path, mamb_backward, mamb_forward, BlockCache, ModulationMaps};
pub use network::{network_backward, network_forward, network_forward_cached, ForwardCache};
pub use params::{count_params, count_params_by_layer, param_layout, BlockParams, IcdParams, ModelParams, ParamSpec};

use crate::error::Result;
use crate::image_io::Image;

/// A configured network together with its weights and the RGB mean that is
/// subtracted from inputs (and re-added to outputs).
#[derive(Clone, Debug, PartialEq)]
pub struct Model {
    pub cfg: NetworkConfig,
    pub params: ModelParams<f32>,
    pub rgb_mean: [f32; 3],
}

impl Model {
    pub fn new(cfg: NetworkConfig, seed: u64, rgb_mean: [f32; 3]) -> Result<Self> {
        cfg.validate()?;
        Ok(Self { params: ModelParams::init(&cfg, seed), cfg, rgb_mean })
    }

    /// Upscales `img` by the configured factor. The result is not clamped.
    pub fn super_resolve(&self, img: &Image) -> Result<Image> {
        let x = img.to_tensor::<f32>(self.rgb_mean);
        let y = network_forward(&x, &self.params, &self.cfg)?;
        Image::from_tensor(&y, 0, self.rgb_mean)
    }

    /// Modulation maps of every block for `img`.
    pub fn modulation_maps(&self, img: &Image) -> Result<Vec<ModulationMaps<f32>>> {
        let x = img.to_tensor::<f32>(self.rgb_mean);
        let (_, cache) = network_forward_cached(&x, &self.params, &self.cfg)?;
        Ok((0..cache.num_blocks()).filter_map(|r| cache.block_maps(r)).collect())
    }
}
