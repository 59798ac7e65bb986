//! Learned stencil-weight provider: a message-passing network over
//! star-shaped stencil graphs, trained self-supervised against Taylor
//! moment targets.
//!
//! The forward map embeds normalized relative positions into a latent
//! space, runs `L` rounds of message passing between the center and its
//! neighbors with attention-weighted aggregation, and decodes one
//! normalized weight per neighbor. Physical weights are recovered by
//! rescaling with `d_n^-m`.

mod dataset;
mod net;
mod params;
mod train;

pub use dataset::{generate_dataset, Dataset, DatasetSplits};
pub use net::{build_graph, forward_batch_weights, loss_and_grad, loss_batch, StencilGraph};
pub use params::{checkpoint_load, checkpoint_save, Layout, Parameters, SliceKind};
pub use train::{train, train_resumable, EpochLog, TrainConfig, TrainResult, TrainState};

use crate::classical::{OperatorWeights, Provenance};
use crate::error::{Error, Result};
use crate::geometry::Stencil;
use crate::taylor::OperatorKind;
use serde::{Deserialize, Serialize};
use std::path::Path;

/// Network shape. All MLPs (embed / message / update / output) share the
/// same hidden-layer count and use tanh activations on hidden layers.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct ModelConfig {
    pub stencil_n: usize,
    pub order_p: usize,
    pub kind: OperatorKind,
    /// Latent width F_h.
    pub f_h: usize,
    /// Message-passing rounds L.
    pub graph_layers: usize,
    /// Hidden layers per MLP.
    pub mlp_hidden: usize,
}

impl ModelConfig {
    /// Small reference configuration: 10 neighbors, F_h = 32, two graph
    /// layers, one hidden layer per MLP.
    pub fn small(kind: OperatorKind) -> Self {
        ModelConfig {
            stencil_n: 10,
            order_p: 2,
            kind,
            f_h: 32,
            graph_layers: 2,
            mlp_hidden: 1,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.stencil_n == 0 || self.f_h == 0 || self.graph_layers == 0 {
            return Err(Error::invalid(
                "stencil_n, f_h and graph_layers must all be at least 1",
            ));
        }
        if self.order_p < self.kind.min_order() {
            return Err(Error::invalid(format!(
                "order p={} cannot express {:?}",
                self.order_p, self.kind
            )));
        }
        Ok(())
    }
}

/// A trained (or freshly initialized) model: configuration, parameter
/// layout and the flat parameter vector.
#[derive(Clone, Debug)]
pub struct NemdoModel {
    pub config: ModelConfig,
    pub layout: Layout,
    pub params: Parameters,
}

impl NemdoModel {
    pub fn new(config: ModelConfig, params: Parameters) -> Result<Self> {
        config.validate()?;
        let layout = Layout::new(&config);
        if params.len() != layout.total() {
            return Err(Error::invalid(format!(
                "parameter vector of length {} does not match layout total {}",
                params.len(),
                layout.total()
            )));
        }
        Ok(NemdoModel {
            config,
            layout,
            params,
        })
    }

    pub fn init(config: ModelConfig, seed: u64) -> Result<Self> {
        config.validate()?;
        let layout = Layout::new(&config);
        let params = Parameters::init(&layout, seed);
        Ok(NemdoModel {
            config,
            layout,
            params,
        })
    }

    /// Normalized weights for one stencil graph.
    pub fn forward(&self, graph: &StencilGraph) -> Result<Vec<f64>> {
        net::forward_single(&self.config, &self.layout, &self.params, graph)
    }

    /// Physical weights for a stencil: forward pass on the normalized
    /// geometry, then rescaling by `d_n^-m`.
    pub fn infer_weights(&self, stencil: &Stencil) -> Result<OperatorWeights> {
        if stencil.len() != self.config.stencil_n {
            return Err(Error::invalid(format!(
                "stencil has {} neighbors but the model expects {}",
                stencil.len(),
                self.config.stencil_n
            )));
        }
        let normalized = stencil.normalize()?;
        let graph = build_graph(&normalized, self.config.stencil_n)?;
        let what = self.forward(&graph)?;
        let rescale = normalized.d_n.powi(-self.config.kind.derivative_order());
        let values: Vec<f64> = what.into_iter().map(|w| w * rescale).collect();
        OperatorWeights::new(self.config.kind, Provenance::Nemdo, values)
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        checkpoint_save(path, &self.config, &self.params)
    }

    pub fn load(path: &Path) -> Result<Self> {
        let (config, params) = checkpoint_load(path)?;
        NemdoModel::new(config, params)
    }

    /// Load and insist on a specific configuration.
    pub fn load_expecting(path: &Path, expected: &ModelConfig) -> Result<Self> {
        let model = Self::load(path)?;
        if model.config != *expected {
            return Err(Error::IncompatibleCheckpoint(format!(
                "checkpoint config {:?} does not match expected {:?}",
                model.config, expected
            )));
        }
        Ok(model)
    }
}
