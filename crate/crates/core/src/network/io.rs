use std::fs;
use std::path::Path;

use ndarray::{Array1, Array2};
use serde::{Deserialize, Serialize};

use super::{Network, NetworkConfig, NetworkWeights};
use crate::{Error, Result};

pub const WEIGHTS_FORMAT_VERSION: u32 = 1;

/// On-disk form of a network: config plus row-major nested matrices.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct WeightsDocument {
    pub format_version: u32,
    pub config: NetworkConfig,
    pub matrices: Vec<Vec<Vec<f64>>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub biases: Option<Vec<Vec<f64>>>,
}

impl From<&Network> for WeightsDocument {
    fn from(net: &Network) -> Self {
        let w = net.weights();
        WeightsDocument {
            format_version: WEIGHTS_FORMAT_VERSION,
            config: net.config().clone(),
            matrices: w
                .matrices
                .iter()
                .map(|m| m.rows().into_iter().map(|r| r.to_vec()).collect())
                .collect(),
            biases: w
                .biases
                .as_ref()
                .map(|b| b.iter().map(|v| v.to_vec()).collect()),
        }
    }
}

impl TryFrom<WeightsDocument> for Network {
    type Error = Error;

    fn try_from(doc: WeightsDocument) -> Result<Network> {
        if doc.format_version != WEIGHTS_FORMAT_VERSION {
            return Err(Error::InvalidInput(format!(
                "unsupported weights format_version {}",
                doc.format_version
            )));
        }
        let matrices = doc
            .matrices
            .into_iter()
            .map(|rows| {
                let r = rows.len();
                let c = rows.first().map_or(0, Vec::len);
                if rows.iter().any(|row| row.len() != c) {
                    return Err(Error::InvalidInput("ragged weight matrix".into()));
                }
                Array2::from_shape_vec((r, c), rows.concat())
                    .map_err(|e| Error::InvalidInput(e.to_string()))
            })
            .collect::<Result<Vec<_>>>()?;
        let biases = doc
            .biases
            .map(|b| b.into_iter().map(Array1::from_vec).collect());
        Network::new(doc.config, NetworkWeights { matrices, biases })
    }
}

impl Network {
    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string_pretty(&WeightsDocument::from(self))?)
    }

    pub fn from_json(s: &str) -> Result<Network> {
        let doc: WeightsDocument = serde_json::from_str(s)?;
        Network::try_from(doc)
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        fs::write(path, self.to_json()?)?;
        Ok(())
    }

    pub fn load(path: &Path) -> Result<Network> {
        Network::from_json(&fs::read_to_string(path)?)
    }

    /// SHA-256 of the canonical (compact) JSON form, hex encoded.
    pub fn weights_hash(&self) -> String {
        let json = serde_json::to_string(&WeightsDocument::from(self)).expect("serializable");
        crate::sha256_hex(json.as_bytes())
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    proptest! {
        #[test]
        fn json_round_trip_is_value_exact(
            vals in proptest::collection::vec(-1e300f64..1e300, 2 * 3 + 3 + 3 + 1),
        ) {
            let cfg = NetworkConfig::new(2, vec![3]).with_biases(true);
            let mut w = NetworkWeights::zeros(&cfg);
            w.set_flat(&vals).unwrap();
            let net = Network::new(cfg, w).unwrap();
            let back = Network::from_json(&net.to_json().unwrap()).unwrap();
            let a: Vec<u64> = net.params().iter().map(|v| v.to_bits()).collect();
            let b: Vec<u64> = back.params().iter().map(|v| v.to_bits()).collect();
            prop_assert_eq!(a, b);
            prop_assert_eq!(net.config(), back.config());
        }
    }

    #[test]
    fn rejects_unknown_version_and_bad_shapes() {
        let cfg = NetworkConfig::new(1, vec![1]);
        let net = Network::new(cfg.clone(), NetworkWeights::zeros(&cfg)).unwrap();
        let mut doc = WeightsDocument::from(&net);
        doc.format_version = 99;
        assert!(Network::try_from(doc).is_err());
        let mut doc = WeightsDocument::from(&net);
        doc.matrices[0] = vec![vec![1.0, 2.0]];
        assert!(Network::try_from(doc).is_err());
    }
}
