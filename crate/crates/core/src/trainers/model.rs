use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::data::{ClassDistribution, Standardizer};
use crate::error::{Error, Result};

use super::network::{Network, NetworkSpec, Parameters};

/// A trained classifier as stored on disk: architecture, parameters and the
/// feature standardization applied before the first layer.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TrainedModel {
    pub spec: NetworkSpec,
    pub params: Parameters,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub standardizer: Option<Standardizer>,
}

impl TrainedModel {
    pub fn new(
        spec: NetworkSpec,
        params: Parameters,
        standardizer: Option<Standardizer>,
    ) -> Result<Self> {
        let model = TrainedModel {
            spec,
            params,
            standardizer,
        };
        model.network()?;
        Ok(model)
    }

    /// Rebuilds the network and checks the parameters fit it.
    pub fn network(&self) -> Result<Network> {
        let net = Network::new(self.spec.clone())?;
        if self.params.layout != net.layout() {
            return Err(Error::shape(
                "stored parameters do not match the stored network",
            ));
        }
        if let Some(s) = &self.standardizer {
            if s.mean.len() != net.input_len() {
                return Err(Error::shape(
                    "standardizer dimension does not match the network input",
                ));
            }
        }
        Ok(net)
    }

    /// Class probabilities for one raw (unstandardized) input.
    pub fn predict(&self, net: &Network, input: &[f64]) -> Result<ClassDistribution> {
        match &self.standardizer {
            Some(s) => net.forward(&self.params, &s.transform(input)),
            None => net.forward(&self.params, input),
        }
    }

    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string_pretty(self)?)
    }

    pub fn from_json(text: &str) -> Result<Self> {
        let model: TrainedModel = serde_json::from_str(text)?;
        model.network()?;
        Ok(model)
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        std::fs::write(path, self.to_json()?).map_err(|e| Error::io(path, e))
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Self::from_json(&text)
    }
}
