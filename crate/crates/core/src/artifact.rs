//! JSON model artifacts with base64-packed little-endian float payloads.

use std::collections::BTreeMap;
use std::path::Path;

use base64::engine::general_purpose::STANDARD as B64;
use base64::Engine;
use ndarray::{Array1, Array2};
use serde::{Deserialize, Serialize};
use serde_json::Value;

use crate::error::{Error, Result};
use crate::gbt::{GbtModel, TreeNode};
use crate::linmodels::{LinearKind, LinearModel};
use crate::mlp::{Affine, HiddenBlock, MlpArchitecture, MlpModel, Mode};

pub fn encode_f64s(values: &[f64]) -> String {
    let bytes: Vec<u8> = values.iter().flat_map(|v| v.to_le_bytes()).collect();
    B64.encode(bytes)
}

pub fn decode_f64s(text: &str) -> Result<Vec<f64>> {
    let bytes = B64
        .decode(text)
        .map_err(|e| Error::data(format!("bad base64 payload: {e}")))?;
    if bytes.len() % 8 != 0 {
        return Err(Error::data(format!("payload of {} bytes is not a float array", bytes.len())));
    }
    Ok(bytes
        .chunks_exact(8)
        .map(|c| f64::from_le_bytes(c.try_into().expect("chunk of 8")))
        .collect())
}

/// Preorder tree encoding: `{"f","t","l","r"}` for splits, `{"w"}` for leaves.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum TreeJson {
    Split {
        f: usize,
        t: f64,
        l: Box<TreeJson>,
        r: Box<TreeJson>,
    },
    Leaf {
        w: f64,
    },
}

impl From<&TreeNode> for TreeJson {
    fn from(node: &TreeNode) -> Self {
        match node {
            TreeNode::Split {
                feature,
                threshold,
                left,
                right,
                ..
            } => TreeJson::Split {
                f: *feature,
                t: *threshold,
                l: Box::new(left.as_ref().into()),
                r: Box::new(right.as_ref().into()),
            },
            TreeNode::Leaf { weight, .. } => TreeJson::Leaf { w: *weight },
        }
    }
}

impl TreeJson {
    /// Gain and cover are fit-time statistics and do not survive the round trip.
    fn to_node(&self) -> TreeNode {
        match self {
            TreeJson::Split { f, t, l, r } => TreeNode::Split {
                feature: *f,
                threshold: *t,
                gain: f64::NAN,
                cover: f64::NAN,
                left: Box::new(l.to_node()),
                right: Box::new(r.to_node()),
            },
            TreeJson::Leaf { w } => TreeNode::Leaf {
                weight: *w,
                cover: f64::NAN,
            },
        }
    }

    fn max_feature(&self) -> Option<usize> {
        match self {
            TreeJson::Split { f, l, r, .. } => [Some(*f), l.max_feature(), r.max_feature()].into_iter().flatten().max(),
            TreeJson::Leaf { .. } => None,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LayerJson {
    pub rows: usize,
    pub cols: usize,
    pub weight: String,
    pub bias: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub bn: Option<BatchNormJson>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BatchNormJson {
    pub scale: String,
    pub shift: String,
    pub running_mean: String,
    pub running_var: String,
}

/// Serialized model. Linear models carry weights and bias; MLPs add a
/// per-layer map (and `weights_b64` holds every trainable tensor flattened);
/// boosted trees store the base score as `bias` and the tree list.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ModelArtifact {
    pub kind: String,
    pub num_features: usize,
    pub weights_b64: String,
    pub bias: f64,
    pub config: Value,
    pub seed: u64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub layers: Option<BTreeMap<String, LayerJson>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub architecture: Option<MlpArchitecture>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub trees: Option<Vec<TreeJson>>,
}

#[derive(Debug, Clone, PartialEq)]
pub enum TrainedModel {
    Linear(LinearModel),
    Mlp(MlpModel),
    Gbt(GbtModel),
}

fn linear_kind_name(kind: LinearKind) -> &'static str {
    match kind {
        LinearKind::Logistic => "logistic",
        LinearKind::Svm => "svm",
    }
}

fn layer_name(i: usize) -> String {
    format!("layer{i:02}")
}

impl ModelArtifact {
    pub fn from_linear(model: &LinearModel, config: Value, seed: u64) -> Self {
        ModelArtifact {
            kind: linear_kind_name(model.kind).to_owned(),
            num_features: model.weights.len(),
            weights_b64: encode_f64s(&model.weights),
            bias: model.bias,
            config,
            seed,
            layers: None,
            architecture: None,
            trees: None,
        }
    }

    pub fn from_mlp(model: &MlpModel, config: Value, seed: u64) -> Self {
        let flat: Vec<f64> = model.param_slices().into_iter().flat_map(|(_, s)| s.to_vec()).collect();
        let affine = |a: &Affine, bn: Option<BatchNormJson>| LayerJson {
            rows: a.weight.nrows(),
            cols: a.weight.ncols(),
            weight: encode_f64s(&a.weight.iter().copied().collect::<Vec<_>>()),
            bias: encode_f64s(a.bias.as_slice().expect("contiguous")),
            bn,
        };
        let mut layers = BTreeMap::new();
        for (i, b) in model.blocks.iter().enumerate() {
            let bn = BatchNormJson {
                scale: encode_f64s(&b.bn_scale.to_vec()),
                shift: encode_f64s(&b.bn_shift.to_vec()),
                running_mean: encode_f64s(&b.running_mean.to_vec()),
                running_var: encode_f64s(&b.running_var.to_vec()),
            };
            layers.insert(layer_name(i), affine(&b.affine, Some(bn)));
        }
        layers.insert(layer_name(model.blocks.len()), affine(&model.output, None));
        ModelArtifact {
            kind: "mlp".to_owned(),
            num_features: model.arch.input_size,
            weights_b64: encode_f64s(&flat),
            bias: 0.0,
            config,
            seed,
            layers: Some(layers),
            architecture: Some(model.arch.clone()),
            trees: None,
        }
    }

    pub fn from_gbt(model: &GbtModel, config: Value, seed: u64) -> Self {
        ModelArtifact {
            kind: "gbt".to_owned(),
            num_features: model.num_features,
            weights_b64: String::new(),
            bias: model.base_score,
            config,
            seed,
            layers: None,
            architecture: None,
            trees: Some(model.trees.iter().map(TreeJson::from).collect()),
        }
    }

    pub fn to_model(&self) -> Result<TrainedModel> {
        match self.kind.as_str() {
            "logistic" | "svm" => {
                let weights = decode_f64s(&self.weights_b64)?;
                if weights.len() != self.num_features {
                    return Err(Error::Dimension {
                        expected: self.num_features,
                        got: weights.len(),
                    });
                }
                let kind = if self.kind == "svm" { LinearKind::Svm } else { LinearKind::Logistic };
                Ok(TrainedModel::Linear(LinearModel {
                    kind,
                    weights,
                    bias: self.bias,
                }))
            }
            "mlp" => self.to_mlp().map(TrainedModel::Mlp),
            "gbt" => {
                let trees = self.trees.as_ref().ok_or_else(|| Error::data("gbt artifact without trees"))?;
                if let Some(f) = trees.iter().filter_map(TreeJson::max_feature).max() {
                    if f >= self.num_features {
                        return Err(Error::data(format!("tree splits on feature {f} of {}", self.num_features)));
                    }
                }
                Ok(TrainedModel::Gbt(GbtModel {
                    base_score: self.bias,
                    num_features: self.num_features,
                    trees: trees.iter().map(TreeJson::to_node).collect(),
                }))
            }
            other => Err(Error::data(format!("unknown model kind {other:?}"))),
        }
    }

    fn to_mlp(&self) -> Result<MlpModel> {
        let arch = self.architecture.clone().ok_or_else(|| Error::data("mlp artifact without architecture"))?;
        arch.validate()?;
        let layers = self.layers.as_ref().ok_or_else(|| Error::data("mlp artifact without layers"))?;
        let vector = |s: &str, len: usize| -> Result<Array1<f64>> {
            let v = decode_f64s(s)?;
            if v.len() != len {
                return Err(Error::Dimension { expected: len, got: v.len() });
            }
            Ok(Array1::from(v))
        };
        let affine = |name: &str, rows: usize, cols: usize| -> Result<(Affine, &LayerJson)> {
            let l = layers.get(name).ok_or_else(|| Error::data(format!("missing layer {name}")))?;
            if (l.rows, l.cols) != (rows, cols) {
                return Err(Error::data(format!(
                    "layer {name} is {}x{}, expected {rows}x{cols}",
                    l.rows, l.cols
                )));
            }
            let w = vector(&l.weight, rows * cols)?;
            let weight = Array2::from_shape_vec((rows, cols), w.to_vec()).expect("length checked");
            Ok((
                Affine {
                    weight,
                    bias: vector(&l.bias, rows)?,
                },
                l,
            ))
        };
        let h = arch.hidden_size;
        let mut blocks = Vec::with_capacity(arch.num_hidden_blocks);
        for i in 0..arch.num_hidden_blocks {
            let fan_in = if i == 0 { arch.input_size } else { h };
            let (a, l) = affine(&layer_name(i), h, fan_in)?;
            let bn = l.bn.as_ref().ok_or_else(|| Error::data(format!("layer {i} lacks batch norm")))?;
            blocks.push(HiddenBlock {
                affine: a,
                bn_scale: vector(&bn.scale, h)?,
                bn_shift: vector(&bn.shift, h)?,
                running_mean: vector(&bn.running_mean, h)?,
                running_var: vector(&bn.running_var, h)?,
            });
        }
        let last_in = if arch.num_hidden_blocks == 0 { arch.input_size } else { h };
        let (output, _) = affine(&layer_name(arch.num_hidden_blocks), arch.output_size, last_in)?;
        let defaults = crate::mlp::MlpTrainConfig::default();
        Ok(MlpModel {
            arch,
            blocks,
            output,
            mode: Mode::Eval,
            bn_momentum: defaults.bn_momentum,
            bn_eps: self.config.get("bn_eps").and_then(Value::as_f64).unwrap_or(defaults.bn_eps),
            bn_frozen: false,
        })
    }

    pub fn write(&self, path: &Path) -> Result<()> {
        std::fs::write(path, serde_json::to_string_pretty(self)?)?;
        Ok(())
    }

    pub fn read(path: &Path) -> Result<Self> {
        Ok(serde_json::from_str(&std::fs::read_to_string(path)?)?)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::gbt::{fit, GbtConfig};
    use ndarray::array;

    #[test]
    fn float_payload_round_trip() {
        let v = [0.1, -0.0, f64::MIN_POSITIVE, 1e300, f64::NAN];
        let back = decode_f64s(&encode_f64s(&v)).unwrap();
        assert!(v.iter().zip(&back).all(|(a, b)| a.to_bits() == b.to_bits()));
        // "AAAAAAAA8D8=" is 1.0 little-endian
        assert_eq!(encode_f64s(&[1.0]), "AAAAAAAA8D8=");
        assert!(decode_f64s("AAAA").is_err());
    }

    #[test]
    fn linear_round_trip() {
        let m = LinearModel {
            kind: LinearKind::Svm,
            weights: vec![0.25, -1.5, 3.0],
            bias: 0.5,
        };
        let art = ModelArtifact::from_linear(&m, serde_json::json!({"lambda": 0.01}), 4);
        let json = serde_json::to_value(&art).unwrap();
        let keys: Vec<&str> = json.as_object().unwrap().keys().map(String::as_str).collect();
        assert_eq!(keys, ["bias", "config", "kind", "num_features", "seed", "weights_b64"]);
        let back: ModelArtifact = serde_json::from_value(json).unwrap();
        assert_eq!(back.to_model().unwrap(), TrainedModel::Linear(m));
    }

    #[test]
    fn mlp_round_trip() {
        let arch = MlpArchitecture {
            input_size: 5,
            hidden_size: 4,
            num_hidden_blocks: 2,
            output_size: 2,
            dropout_p: 0.5,
        };
        let mut m = MlpModel::init(&arch, 3).unwrap();
        m.set_mode(Mode::Eval);
        let art = ModelArtifact::from_mlp(&m, Value::Null, 3);
        let text = serde_json::to_string(&art).unwrap();
        let back: ModelArtifact = serde_json::from_str(&text).unwrap();
        let TrainedModel::Mlp(restored) = back.to_model().unwrap() else { panic!() };
        assert_eq!(restored, m);
    }

    #[test]
    fn gbt_round_trip_predicts_identically() {
        let x = array![[1.0, 5.0], [2.0, 3.0], [3.0, 1.0], [4.0, 0.0], [5.0, 2.0]];
        let y = [1.0, 1.5, 3.0, 3.5, 2.0];
        let cfg = GbtConfig {
            num_round: 5,
            min_child_weight: 0.0,
            ..GbtConfig::default()
        };
        let model = fit(x.view(), &y, &cfg).unwrap();
        let art = ModelArtifact::from_gbt(&model, Value::Null, 0);
        let text = serde_json::to_string(&art).unwrap();
        assert!(text.contains(r#""f":"#) && text.contains(r#""w":"#));
        let TrainedModel::Gbt(back) = serde_json::from_str::<ModelArtifact>(&text).unwrap().to_model().unwrap() else {
            panic!()
        };
        let a = model.predict(x.view()).unwrap();
        let b = back.predict(x.view()).unwrap();
        assert!(a.iter().zip(&b).all(|(p, q)| p.to_bits() == q.to_bits()));
    }

    #[test]
    fn rejects_bad_artifacts() {
        let mut art = ModelArtifact::from_linear(&LinearModel::zeros(LinearKind::Logistic, 3), Value::Null, 0);
        art.num_features = 4;
        assert!(art.to_model().is_err());
        art.kind = "forest".into();
        assert!(art.to_model().is_err());
    }
}
