//! Binary model files.
//!
//! Layout: the 8-byte magic `SURVPIPE`, a little-endian `u32` format version,
//! a one-byte model kind tag, the 32-byte feature-map fingerprint, then a
//! payload of little-endian `f64` values. Counts and indices in the payload
//! are stored as exactly representable integral reals.
//!
//! Payloads by kind:
//! - logistic: `n_cols`, coefficients, bias
//! - forest: `n_cols`, tree count, then per tree its root weight, node count
//!   and nodes (`0, positive, weight_pos, weight_neg` for a leaf or
//!   `1, feature, threshold, left, right, gain` for a split)
//! - adaboost: `n_cols`, stump count, then `feature, threshold, polarity,
//!   alpha, gain` per stump
//! - mlp: `n_cols`, layer count, then per layer `n_in, n_out`, the weights
//!   row-major and the bias

use std::fs;
use std::path::Path;

use ndarray::{Array1, Array2};

use super::adaboost::{AdaBoostModel, Stump};
use super::forest::ForestModel;
use super::logistic::LogisticModel;
use super::mlp::{DenseLayer, MlpModel};
use super::tree::{DecisionTree, Node};
use super::{Learned, ModelKind, TrainedModel};
use crate::error::{Error, Result};

const MAGIC: &[u8; 8] = b"SURVPIPE";
const VERSION: u32 = 1;
const HEADER_LEN: usize = 8 + 4 + 1 + 32;

/// Largest integer every `f64` below it represents exactly.
const MAX_EXACT: f64 = 9_007_199_254_740_992.0;

pub fn model_to_bytes(model: &TrainedModel) -> Vec<u8> {
    let mut out = Vec::with_capacity(HEADER_LEN);
    out.extend_from_slice(MAGIC);
    out.extend_from_slice(&VERSION.to_le_bytes());
    out.push(model.kind().tag());
    out.extend_from_slice(model.fingerprint());
    let mut payload = vec![model.n_cols() as f64];
    match model.learned() {
        Learned::Logistic(m) => {
            payload.extend(m.coefficients().iter());
            payload.push(m.bias());
        }
        Learned::Forest(m) => {
            payload.push(m.trees().len() as f64);
            for tree in m.trees() {
                payload.push(tree.root_weight());
                payload.push(tree.nodes().len() as f64);
                for node in tree.nodes() {
                    match *node {
                        Node::Leaf {
                            positive,
                            weight_pos,
                            weight_neg,
                        } => payload.extend([0.0, f64::from(u8::from(positive)), weight_pos, weight_neg]),
                        Node::Split {
                            feature,
                            threshold,
                            left,
                            right,
                            gain,
                        } => payload.extend([1.0, feature as f64, threshold, left as f64, right as f64, gain]),
                    }
                }
            }
        }
        Learned::Adaboost(m) => {
            payload.push(m.stumps().len() as f64);
            for s in m.stumps() {
                payload.extend([s.feature as f64, f64::from(s.polarity), s.threshold, s.alpha, s.gain]);
            }
        }
        Learned::Mlp(m) => {
            payload.push(m.layers().len() as f64);
            for layer in m.layers() {
                let (n_in, n_out) = layer.weights.dim();
                payload.extend([n_in as f64, n_out as f64]);
                payload.extend(layer.weights.iter());
                payload.extend(layer.bias.iter());
            }
        }
    }
    for v in payload {
        out.extend_from_slice(&v.to_le_bytes());
    }
    out
}

struct Reader<'a> {
    values: std::slice::ChunksExact<'a, u8>,
}

impl Reader<'_> {
    fn real(&mut self) -> Result<f64> {
        let chunk = self.values.next().ok_or_else(|| Error::ModelFormat("file is truncated".into()))?;
        Ok(f64::from_le_bytes(chunk.try_into().expect("chunks are 8 bytes")))
    }

    fn finite(&mut self, what: &str) -> Result<f64> {
        let v = self.real()?;
        if v.is_finite() {
            Ok(v)
        } else {
            Err(Error::ModelFormat(format!("{what} is not finite")))
        }
    }

    fn count(&mut self, what: &str) -> Result<usize> {
        let v = self.real()?;
        if (0.0..MAX_EXACT).contains(&v) && v.fract() == 0.0 {
            Ok(v as usize)
        } else {
            Err(Error::ModelFormat(format!("{what} is not a valid count: {v}")))
        }
    }

    fn index(&mut self, what: &str, bound: usize) -> Result<usize> {
        let v = self.count(what)?;
        if v < bound {
            Ok(v)
        } else {
            Err(Error::ModelFormat(format!("{what} {v} is out of range (limit {bound})")))
        }
    }

    /// Guards allocations against absurd counts in corrupt files.
    fn bounded_count(&mut self, what: &str, per_item: usize) -> Result<usize> {
        let n = self.count(what)?;
        if n.saturating_mul(per_item.max(1)) > self.values.len() {
            return Err(Error::ModelFormat("file is truncated".into()));
        }
        Ok(n)
    }

    fn vec(&mut self, n: usize, what: &str) -> Result<Vec<f64>> {
        if n > self.values.len() {
            return Err(Error::ModelFormat("file is truncated".into()));
        }
        (0..n).map(|_| self.finite(what)).collect()
    }
}

pub fn model_from_bytes(bytes: &[u8]) -> Result<TrainedModel> {
    if bytes.len() < HEADER_LEN {
        return Err(Error::ModelFormat("file is too short for a model header".into()));
    }
    if &bytes[..8] != MAGIC {
        return Err(Error::ModelFormat("not a survpipe model file".into()));
    }
    let version = u32::from_le_bytes(bytes[8..12].try_into().expect("4 bytes"));
    if version != VERSION {
        return Err(Error::ModelFormat(format!("unsupported format version {version}")));
    }
    let kind = ModelKind::from_tag(bytes[12]).ok_or_else(|| Error::ModelFormat(format!("unknown model kind tag {}", bytes[12])))?;
    let mut fingerprint = [0u8; 32];
    fingerprint.copy_from_slice(&bytes[13..HEADER_LEN]);
    let body = &bytes[HEADER_LEN..];
    if !body.len().is_multiple_of(8) {
        return Err(Error::ModelFormat("payload is not a whole number of reals".into()));
    }
    let mut r = Reader {
        values: body.chunks_exact(8),
    };
    let n_cols = r.count("column count")?;
    let learned = match kind {
        ModelKind::Logistic => {
            let coefficients = r.vec(n_cols, "coefficient")?;
            let bias = r.finite("bias")?;
            Learned::Logistic(LogisticModel::new(coefficients, bias))
        }
        ModelKind::Forest => {
            let n_trees = r.bounded_count("tree count", 2)?;
            let mut trees = Vec::with_capacity(n_trees);
            for _ in 0..n_trees {
                let root_weight = r.finite("root weight")?;
                let n_nodes = r.bounded_count("node count", 4)?;
                if n_nodes == 0 {
                    return Err(Error::ModelFormat("tree has no nodes".into()));
                }
                let mut nodes = Vec::with_capacity(n_nodes);
                for at in 0..n_nodes {
                    let node = match r.count("node tag")? {
                        0 => {
                            let positive = match r.count("leaf class")? {
                                0 => false,
                                1 => true,
                                v => return Err(Error::ModelFormat(format!("leaf class {v} is not 0 or 1"))),
                            };
                            Node::Leaf {
                                positive,
                                weight_pos: r.finite("leaf weight")?,
                                weight_neg: r.finite("leaf weight")?,
                            }
                        }
                        1 => {
                            let feature = r.index("split feature", n_cols)?;
                            let threshold = r.finite("split threshold")?;
                            let left = r.index("child index", n_nodes)?;
                            let right = r.index("child index", n_nodes)?;
                            // children always follow their parent, which rules out cycles
                            if left <= at || right <= at {
                                return Err(Error::ModelFormat("child index precedes its parent".into()));
                            }
                            Node::Split {
                                feature,
                                threshold,
                                left,
                                right,
                                gain: r.finite("split gain")?,
                            }
                        }
                        v => return Err(Error::ModelFormat(format!("unknown node tag {v}"))),
                    };
                    nodes.push(node);
                }
                trees.push(DecisionTree::from_nodes(nodes, root_weight));
            }
            Learned::Forest(ForestModel::from_trees(trees))
        }
        ModelKind::Adaboost => {
            let n = r.bounded_count("stump count", 5)?;
            let mut stumps = Vec::with_capacity(n);
            for _ in 0..n {
                let feature = r.index("stump feature", n_cols)?;
                let p = r.real()?;
                let polarity = if p == 1.0 {
                    1
                } else if p == -1.0 {
                    -1
                } else {
                    return Err(Error::ModelFormat(format!("stump polarity {p} is not +1 or -1")));
                };
                stumps.push(Stump {
                    feature,
                    polarity,
                    threshold: r.finite("stump threshold")?,
                    alpha: r.finite("stump weight")?,
                    gain: r.finite("stump gain")?,
                });
            }
            Learned::Adaboost(AdaBoostModel::from_stumps(stumps)?)
        }
        ModelKind::Mlp => {
            let n_layers = r.bounded_count("layer count", 3)?;
            let mut layers = Vec::with_capacity(n_layers);
            for _ in 0..n_layers {
                let n_in = r.count("layer inputs")?;
                let n_out = r.count("layer outputs")?;
                let weights = r.vec(n_in.saturating_mul(n_out), "layer weight")?;
                let bias = r.vec(n_out, "layer bias")?;
                layers.push(DenseLayer {
                    weights: Array2::from_shape_vec((n_in, n_out), weights).map_err(|e| Error::ModelFormat(e.to_string()))?,
                    bias: Array1::from(bias),
                });
            }
            let model = MlpModel::from_layers(layers)?;
            if model.n_inputs() != n_cols {
                return Err(Error::ModelFormat("mlp input width does not match the column count".into()));
            }
            Learned::Mlp(model)
        }
    };
    if r.values.len() != 0 {
        return Err(Error::ModelFormat("trailing bytes after the model payload".into()));
    }
    Ok(TrainedModel::new(fingerprint, n_cols, learned))
}

pub fn save_model(model: &TrainedModel, path: &Path) -> Result<()> {
    fs::write(path, model_to_bytes(model))?;
    Ok(())
}

pub fn load_model(path: &Path) -> Result<TrainedModel> {
    model_from_bytes(&fs::read(path)?)
}

/// Loads a model and checks that it has the expected kind.
pub fn load_model_as(path: &Path, kind: ModelKind) -> Result<TrainedModel> {
    let model = load_model(path)?;
    if model.kind() != kind {
        return Err(Error::KindMismatch {
            expected: kind,
            found: model.kind(),
        });
    }
    Ok(model)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::seed::rng_from_seed;
    use ndarray::arr2;

    fn fp() -> [u8; 32] {
        let mut f = [0u8; 32];
        f[0] = 7;
        f
    }

    fn samples() -> Vec<TrainedModel> {
        let x = arr2(&[[0.0, 1.0], [1.0, 0.0], [2.0, 1.0], [3.0, 0.0]]);
        let y = [false, false, true, true];
        let forest = ForestModel::fit(x.view(), &y, &[1.0; 4], &Default::default(), 1);
        let boost = AdaBoostModel::fit(x.view(), &y, &[1.0; 4], &Default::default()).unwrap();
        vec![
            TrainedModel::new(fp(), 2, Learned::Logistic(LogisticModel::new(vec![0.25, -1.5], 0.125))),
            TrainedModel::new(fp(), 2, Learned::Forest(forest)),
            TrainedModel::new(fp(), 2, Learned::Adaboost(boost)),
            TrainedModel::new(fp(), 2, Learned::Mlp(MlpModel::init(2, &[3, 2], &mut rng_from_seed(5)))),
        ]
    }

    #[test]
    fn round_trips_every_kind() {
        for model in samples() {
            let bytes = model_to_bytes(&model);
            assert_eq!(&bytes[..8], MAGIC);
            assert_eq!(bytes[12], model.kind().tag());
            assert_eq!(model_from_bytes(&bytes).unwrap(), model);
        }
    }

    #[test]
    fn logistic_layout_is_exact() {
        let bytes = model_to_bytes(&samples()[0]);
        assert_eq!(bytes.len(), HEADER_LEN + 8 * 4);
        assert_eq!(&bytes[HEADER_LEN..HEADER_LEN + 8], &2.0f64.to_le_bytes());
        assert_eq!(&bytes[HEADER_LEN + 24..], &0.125f64.to_le_bytes());
    }

    #[test]
    fn corrupt_files_are_rejected() {
        for model in samples() {
            let bytes = model_to_bytes(&model);
            for cut in [0, 10, HEADER_LEN, bytes.len() - 8, bytes.len() - 3] {
                assert!(model_from_bytes(&bytes[..cut]).is_err(), "{} cut at {cut}", model.kind());
            }
            let mut extra = bytes.clone();
            extra.extend_from_slice(&0f64.to_le_bytes());
            assert!(model_from_bytes(&extra).is_err());
        }
        let mut bytes = model_to_bytes(&samples()[0]);
        bytes[0] = b'X';
        assert!(model_from_bytes(&bytes).is_err());
        let mut bytes = model_to_bytes(&samples()[0]);
        bytes[12] = 9;
        assert!(model_from_bytes(&bytes).is_err());
        let mut bytes = model_to_bytes(&samples()[0]);
        bytes[8] = 2;
        assert!(model_from_bytes(&bytes).is_err());
    }

    #[test]
    fn kind_check_on_load() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("m.bin");
        save_model(&samples()[0], &path).unwrap();
        assert!(load_model_as(&path, ModelKind::Logistic).is_ok());
        assert!(matches!(load_model_as(&path, ModelKind::Mlp), Err(Error::KindMismatch { .. })));
    }
}
