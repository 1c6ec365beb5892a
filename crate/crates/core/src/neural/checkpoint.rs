//! Parameter checkpoints: `<stem>.bin` holds every parameter as
//! little-endian `f64` in layout order, `<stem>.json` describes it.

use std::fs;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use super::{NetConfig, Network, NeuralError, Tensor};

const FORMAT: &str = "solar-forecast-net/1";

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CheckpointMeta {
    pub format: String,
    pub config: NetConfig,
    pub names: Vec<String>,
    pub shapes: Vec<Vec<usize>>,
    pub steps: u64,
    pub diverged: bool,
    pub n_values: usize,
}

fn paths(stem: &Path) -> (PathBuf, PathBuf) {
    (stem.with_extension("bin"), stem.with_extension("json"))
}

impl Network {
    pub fn checkpoint_meta(&self) -> CheckpointMeta {
        CheckpointMeta {
            format: FORMAT.to_string(),
            config: self.config.clone(),
            names: self.config.layout().into_iter().map(|(n, _)| n.to_string()).collect(),
            shapes: self.params.iter().map(|t| t.shape().to_vec()).collect(),
            steps: self.steps,
            diverged: self.diverged,
            n_values: self.n_params(),
        }
    }

    pub fn save(&self, stem: &Path) -> Result<(), NeuralError> {
        let (bin, json) = paths(stem);
        let mut bytes = Vec::with_capacity(8 * self.n_params());
        for t in &self.params {
            for v in t.data() {
                bytes.extend_from_slice(&v.to_le_bytes());
            }
        }
        fs::write(bin, bytes)?;
        fs::write(json, serde_json::to_string_pretty(&self.checkpoint_meta())?)?;
        Ok(())
    }

    pub fn load(stem: &Path) -> Result<Self, NeuralError> {
        let (bin, json) = paths(stem);
        let meta: CheckpointMeta = serde_json::from_str(&fs::read_to_string(json)?)?;
        if meta.format != FORMAT {
            return Err(NeuralError::Checkpoint(format!("unknown format {:?}", meta.format)));
        }
        let bytes = fs::read(bin)?;
        if bytes.len() != 8 * meta.n_values {
            return Err(NeuralError::Checkpoint(format!(
                "expected {} bytes, found {}",
                8 * meta.n_values,
                bytes.len()
            )));
        }
        let mut values = bytes
            .chunks_exact(8)
            .map(|c| f64::from_le_bytes(c.try_into().expect("chunk of 8")));
        let mut params = Vec::with_capacity(meta.shapes.len());
        for shape in &meta.shapes {
            let n: usize = shape.iter().product();
            params.push(Tensor::new(shape.clone(), values.by_ref().take(n).collect())?);
        }
        if values.next().is_some() {
            return Err(NeuralError::Checkpoint("shapes do not cover the value count".into()));
        }
        let mut net = Network::from_params(meta.config, params)?;
        net.steps = meta.steps;
        net.diverged = meta.diverged;
        Ok(net)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::neural::{NetKind, Sample};

    #[test]
    fn round_trip_is_bit_exact() {
        let dir = tempfile::tempdir().unwrap();
        for kind in NetKind::ALL {
            let mut net = Network::init(NetConfig::new(kind, 10, 1, 42)).unwrap();
            let batch = [Sample {
                input: (0..10).map(|i| 0.1 * i as f64).collect(),
                target: vec![0.7],
            }];
            net.train_step(&batch).unwrap();
            let stem = dir.path().join(kind.name());
            net.save(&stem).unwrap();
            let back = Network::load(&stem).unwrap();
            assert_eq!(back, net);
            for (a, b) in back.params().iter().zip(net.params()) {
                for (x, y) in a.data().iter().zip(b.data()) {
                    assert_eq!(x.to_bits(), y.to_bits());
                }
            }
        }
    }

    #[test]
    fn rejects_truncated_values() {
        let dir = tempfile::tempdir().unwrap();
        let stem = dir.path().join("m");
        Network::init(NetConfig::new(NetKind::SlFnn, 3, 1, 0)).unwrap().save(&stem).unwrap();
        let bin = stem.with_extension("bin");
        let bytes = fs::read(&bin).unwrap();
        fs::write(&bin, &bytes[..bytes.len() - 8]).unwrap();
        assert!(matches!(Network::load(&stem), Err(NeuralError::Checkpoint(_))));
    }
}
