//! Checkpoint file: one JSON document
//! `{schema_version, layer_sizes, weights, biases, hyperparams}`.

use std::path::Path;

use serde::Serialize;
use serde_json::Value;

use super::agent::Hyperparams;
use super::network::{Layer, QNetwork};
use super::DqnError;

pub const CHECKPOINT_SCHEMA_VERSION: u32 = 1;

#[derive(Debug, Clone, PartialEq)]
pub struct Checkpoint {
    pub network: QNetwork,
    pub hyperparams: Hyperparams,
}

impl Checkpoint {
    /// Shape error unless the network maps `input` features to `output` actions.
    pub fn check_dims(&self, input: usize, output: usize) -> Result<(), DqnError> {
        let (i, o) = (self.network.input_dim(), self.network.output_dim());
        if (i, o) != (input, output) {
            return Err(DqnError::Shape(format!(
                "checkpoint maps {i} features to {o} actions; environment needs {input} -> {output}"
            )));
        }
        Ok(())
    }
}

#[derive(Serialize)]
struct Document<'a> {
    schema_version: u32,
    layer_sizes: Vec<usize>,
    weights: Vec<&'a [f64]>,
    biases: Vec<&'a [f64]>,
    hyperparams: &'a Hyperparams,
}

pub fn to_json(net: &QNetwork, h: &Hyperparams) -> Result<String, DqnError> {
    let doc = Document {
        schema_version: CHECKPOINT_SCHEMA_VERSION,
        layer_sizes: net.layer_sizes(),
        weights: net.layers().iter().map(|l| l.weights.as_slice()).collect(),
        biases: net.layers().iter().map(|l| l.biases.as_slice()).collect(),
        hyperparams: h,
    };
    serde_json::to_string(&doc).map_err(|e| integrity("document", e))
}

/// Written to a sibling temp file then renamed, so an interrupted save
/// leaves the previous checkpoint intact.
pub fn save_checkpoint(net: &QNetwork, h: &Hyperparams, path: &Path) -> Result<(), DqnError> {
    let text = to_json(net, h)?;
    let tmp = path.with_extension("tmp");
    std::fs::write(&tmp, text).map_err(|e| io(&tmp, e))?;
    std::fs::rename(&tmp, path).map_err(|e| io(path, e))
}

pub fn load_checkpoint(path: &Path) -> Result<Checkpoint, DqnError> {
    let text = std::fs::read_to_string(path).map_err(|e| io(path, e))?;
    from_json(&text)
}

pub fn from_json(text: &str) -> Result<Checkpoint, DqnError> {
    let doc: Value = serde_json::from_str(text).map_err(|e| integrity("document", e))?;
    let obj = doc
        .as_object()
        .ok_or_else(|| integrity("document", "not a JSON object"))?;
    let field = |name: &str| {
        obj.get(name)
            .ok_or_else(|| integrity(name, "missing"))
    };

    let version: u32 = parse(field("schema_version")?, "schema_version")?;
    if version != CHECKPOINT_SCHEMA_VERSION {
        return Err(integrity(
            "schema_version",
            format!("unsupported version {version}, expected {CHECKPOINT_SCHEMA_VERSION}"),
        ));
    }
    let sizes: Vec<usize> = parse(field("layer_sizes")?, "layer_sizes")?;
    let weights: Vec<Vec<f64>> = parse(field("weights")?, "weights")?;
    let biases: Vec<Vec<f64>> = parse(field("biases")?, "biases")?;
    let hyperparams: Hyperparams = parse(field("hyperparams")?, "hyperparams")?;

    if sizes.len() < 2 {
        return Err(DqnError::Shape(format!(
            "layer_sizes needs at least two entries, got {sizes:?}"
        )));
    }
    let n_layers = sizes.len() - 1;
    if weights.len() != n_layers || biases.len() != n_layers {
        return Err(DqnError::Shape(format!(
            "layer_sizes {sizes:?} implies {n_layers} layers; file has {} weight and {} bias arrays",
            weights.len(),
            biases.len()
        )));
    }
    let layers = weights
        .into_iter()
        .zip(biases)
        .enumerate()
        .map(|(i, (w, b))| Layer {
            inputs: sizes[i],
            outputs: sizes[i + 1],
            weights: w,
            biases: b,
        })
        .collect();
    let network = QNetwork::from_layers(layers)?;
    Ok(Checkpoint {
        network,
        hyperparams,
    })
}

fn parse<T: serde::de::DeserializeOwned>(v: &Value, name: &str) -> Result<T, DqnError> {
    T::deserialize(v).map_err(|e| integrity(name, e))
}

fn integrity(field: &str, message: impl ToString) -> DqnError {
    DqnError::Integrity {
        field: field.to_string(),
        message: message.to_string(),
    }
}

fn io(path: &Path, source: std::io::Error) -> DqnError {
    DqnError::Io {
        path: path.display().to_string(),
        source,
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn sample() -> (QNetwork, Hyperparams) {
        let mut rng = ChaCha8Rng::seed_from_u64(17);
        let net = QNetwork::new(&[9, 16, 8, 72], &mut rng).unwrap();
        let h = Hyperparams {
            epsilon: 0.3,
            ..Default::default()
        };
        (net, h)
    }

    #[test]
    fn roundtrip_is_bit_exact() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("ckpt.json");
        let (net, h) = sample();
        save_checkpoint(&net, &h, &path).unwrap();
        let back = load_checkpoint(&path).unwrap();
        assert_eq!(back.network, net);
        assert_eq!(back.hyperparams, h);
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        for _ in 0..100 {
            let s: Vec<f64> = (0..9).map(|_| rng.random_range(-3.0..3.0)).collect();
            assert_eq!(net.forward(&s).unwrap(), back.network.forward(&s).unwrap());
        }
    }

    #[test]
    fn truncated_file_is_integrity_error() {
        let (net, h) = sample();
        let text = to_json(&net, &h).unwrap();
        let cut = &text[..text.len() / 2];
        assert!(matches!(from_json(cut), Err(DqnError::Integrity { .. })));
    }

    #[test]
    fn corrupt_field_is_named() {
        let (net, h) = sample();
        let mut doc: Value = serde_json::from_str(&to_json(&net, &h).unwrap()).unwrap();
        doc["biases"] = serde_json::json!("oops");
        match from_json(&doc.to_string()) {
            Err(DqnError::Integrity { field, .. }) => assert_eq!(field, "biases"),
            other => panic!("{other:?}"),
        }
        doc["biases"] = serde_json::json!(net.layers().iter().map(|l| l.biases.clone()).collect::<Vec<_>>());
        doc.as_object_mut().unwrap().remove("hyperparams");
        match from_json(&doc.to_string()) {
            Err(DqnError::Integrity { field, .. }) => assert_eq!(field, "hyperparams"),
            other => panic!("{other:?}"),
        }
    }

    #[test]
    fn mismatched_layer_config_is_shape_error() {
        let (net, h) = sample();
        let mut doc: Value = serde_json::from_str(&to_json(&net, &h).unwrap()).unwrap();
        // claims a wider hidden layer than the stored matrices
        doc["layer_sizes"] = serde_json::json!([9, 32, 8, 72]);
        assert!(matches!(from_json(&doc.to_string()), Err(DqnError::Shape(_))));
        let back = from_json(&to_json(&net, &h).unwrap()).unwrap();
        assert!(matches!(back.check_dims(9, 13), Err(DqnError::Shape(_))));
        back.check_dims(9, 72).unwrap();
    }
}
