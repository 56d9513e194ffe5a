//! Fully connected Q-network: rectifier hidden layers, identity output.

use rand::Rng;

use super::DqnError;

/// Dense layer with row-major `outputs x inputs` weights.
#[derive(Debug, Clone, PartialEq)]
pub struct Layer {
    pub inputs: usize,
    pub outputs: usize,
    pub weights: Vec<f64>,
    pub biases: Vec<f64>,
}

impl Layer {
    fn zeros(inputs: usize, outputs: usize) -> Self {
        Self {
            inputs,
            outputs,
            weights: vec![0.0; inputs * outputs],
            biases: vec![0.0; outputs],
        }
    }

    fn affine(&self, x: &[f64]) -> Vec<f64> {
        self.weights
            .chunks_exact(self.inputs)
            .zip(&self.biases)
            .map(|(row, b)| row.iter().zip(x).map(|(w, v)| w * v).sum::<f64>() + b)
            .collect()
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct QNetwork {
    layers: Vec<Layer>,
}

/// Loss gradient with the same layout as the network parameters.
#[derive(Debug, Clone, PartialEq)]
pub struct Gradients {
    pub weights: Vec<Vec<f64>>,
    pub biases: Vec<Vec<f64>>,
}

impl Gradients {
    pub fn zeros_like(net: &QNetwork) -> Self {
        Self {
            weights: net.layers.iter().map(|l| vec![0.0; l.weights.len()]).collect(),
            biases: net.layers.iter().map(|l| vec![0.0; l.biases.len()]).collect(),
        }
    }

    /// Flattened in parameter order: per layer, weights then biases.
    pub fn flat(&self) -> Vec<f64> {
        self.weights
            .iter()
            .zip(&self.biases)
            .flat_map(|(w, b)| w.iter().chain(b).copied())
            .collect()
    }

    pub fn norm(&self) -> f64 {
        self.flat().iter().map(|g| g * g).sum::<f64>().sqrt()
    }
}

/// One supervised sample: push `Q(state)[action]` toward `target`.
#[derive(Debug, Clone, PartialEq)]
pub struct RegressionSample<'a> {
    pub state: &'a [f64],
    pub action: usize,
    pub target: f64,
}

fn check_sizes(sizes: &[usize]) -> Result<(), DqnError> {
    if sizes.len() < 2 || sizes.contains(&0) {
        return Err(DqnError::Shape(format!(
            "layer sizes {sizes:?} need at least two nonzero entries"
        )));
    }
    Ok(())
}

impl QNetwork {
    /// Uniform(-1/sqrt(fan_in), 1/sqrt(fan_in)) weights, zero biases.
    pub fn new<R: Rng + ?Sized>(sizes: &[usize], rng: &mut R) -> Result<Self, DqnError> {
        check_sizes(sizes)?;
        let layers = sizes
            .windows(2)
            .map(|w| {
                let bound = 1.0 / (w[0] as f64).sqrt();
                let mut layer = Layer::zeros(w[0], w[1]);
                for v in &mut layer.weights {
                    *v = rng.random_range(-bound..bound);
                }
                layer
            })
            .collect();
        Ok(Self { layers })
    }

    pub fn zeros(sizes: &[usize]) -> Result<Self, DqnError> {
        check_sizes(sizes)?;
        Ok(Self {
            layers: sizes.windows(2).map(|w| Layer::zeros(w[0], w[1])).collect(),
        })
    }

    pub fn from_layers(layers: Vec<Layer>) -> Result<Self, DqnError> {
        if layers.is_empty() {
            return Err(DqnError::Shape("network has no layers".into()));
        }
        for (i, l) in layers.iter().enumerate() {
            if l.inputs == 0 || l.outputs == 0 {
                return Err(DqnError::Shape(format!("layer {i} has a zero dimension")));
            }
            if l.weights.len() != l.inputs * l.outputs {
                return Err(DqnError::Shape(format!(
                    "layer {i}: {} weights for {}x{}",
                    l.weights.len(),
                    l.outputs,
                    l.inputs
                )));
            }
            if l.biases.len() != l.outputs {
                return Err(DqnError::Shape(format!(
                    "layer {i}: {} biases for {} outputs",
                    l.biases.len(),
                    l.outputs
                )));
            }
            if i > 0 && layers[i - 1].outputs != l.inputs {
                return Err(DqnError::Shape(format!(
                    "layer {i} expects {} inputs but layer {} emits {}",
                    l.inputs,
                    i - 1,
                    layers[i - 1].outputs
                )));
            }
            if l.weights.iter().chain(&l.biases).any(|v| !v.is_finite()) {
                return Err(DqnError::Shape(format!("layer {i} has non-finite parameters")));
            }
        }
        Ok(Self { layers })
    }

    pub fn layers(&self) -> &[Layer] {
        &self.layers
    }

    pub fn layer_sizes(&self) -> Vec<usize> {
        std::iter::once(self.layers[0].inputs)
            .chain(self.layers.iter().map(|l| l.outputs))
            .collect()
    }

    pub fn input_dim(&self) -> usize {
        self.layers[0].inputs
    }

    pub fn output_dim(&self) -> usize {
        self.layers[self.layers.len() - 1].outputs
    }

    pub fn n_params(&self) -> usize {
        self.layers.iter().map(|l| l.weights.len() + l.biases.len()).sum()
    }

    pub fn params_flat(&self) -> Vec<f64> {
        self.layers
            .iter()
            .flat_map(|l| l.weights.iter().chain(&l.biases).copied())
            .collect()
    }

    pub fn set_params_flat(&mut self, flat: &[f64]) -> Result<(), DqnError> {
        if flat.len() != self.n_params() {
            return Err(DqnError::Shape(format!(
                "{} values for {} parameters",
                flat.len(),
                self.n_params()
            )));
        }
        let mut it = flat.iter().copied();
        for l in &mut self.layers {
            for v in l.weights.iter_mut().chain(l.biases.iter_mut()) {
                *v = it.next().expect("length checked");
            }
        }
        Ok(())
    }

    fn check_input(&self, state: &[f64]) -> Result<(), DqnError> {
        if state.len() != self.input_dim() {
            return Err(DqnError::Shape(format!(
                "state has {} features, network expects {}",
                state.len(),
                self.input_dim()
            )));
        }
        Ok(())
    }

    pub fn forward(&self, state: &[f64]) -> Result<Vec<f64>, DqnError> {
        self.check_input(state)?;
        let last = self.layers.len() - 1;
        let mut x = state.to_vec();
        for (i, layer) in self.layers.iter().enumerate() {
            x = layer.affine(&x);
            if i < last {
                relu_in_place(&mut x);
            }
        }
        Ok(x)
    }

    /// Layer inputs for every layer plus the final output.
    fn trace(&self, state: &[f64]) -> Vec<Vec<f64>> {
        let last = self.layers.len() - 1;
        let mut acts = Vec::with_capacity(self.layers.len() + 1);
        acts.push(state.to_vec());
        for (i, layer) in self.layers.iter().enumerate() {
            let mut z = layer.affine(&acts[i]);
            if i < last {
                relu_in_place(&mut z);
            }
            acts.push(z);
        }
        acts
    }

    /// Mean squared error over `samples` and its gradient.
    pub fn loss_and_gradients(&self, samples: &[RegressionSample<'_>]) -> Result<(f64, Gradients), DqnError> {
        if samples.is_empty() {
            return Err(DqnError::Argument("empty batch".into()));
        }
        let n = samples.len() as f64;
        let mut grads = Gradients::zeros_like(self);
        let mut loss = 0.0;
        let last = self.layers.len() - 1;
        for s in samples {
            self.check_input(s.state)?;
            if s.action >= self.output_dim() {
                return Err(DqnError::Argument(format!(
                    "action {} outside {} outputs",
                    s.action,
                    self.output_dim()
                )));
            }
            let acts = self.trace(s.state);
            let q = acts[last + 1][s.action];
            let err = q - s.target;
            loss += err * err / n;

            let mut delta = vec![0.0; self.output_dim()];
            delta[s.action] = 2.0 * err / n;
            for i in (0..=last).rev() {
                let layer = &self.layers[i];
                let input = &acts[i];
                let gw = &mut grads.weights[i];
                for (o, &d) in delta.iter().enumerate() {
                    if d == 0.0 {
                        continue;
                    }
                    let row = &mut gw[o * layer.inputs..(o + 1) * layer.inputs];
                    for (g, &x) in row.iter_mut().zip(input) {
                        *g += d * x;
                    }
                    grads.biases[i][o] += d;
                }
                if i == 0 {
                    break;
                }
                // back through the affine map, then the rectifier of layer i-1
                let mut prev = vec![0.0; layer.inputs];
                for (o, &d) in delta.iter().enumerate() {
                    if d == 0.0 {
                        continue;
                    }
                    let row = &layer.weights[o * layer.inputs..(o + 1) * layer.inputs];
                    for (p, &w) in prev.iter_mut().zip(row) {
                        *p += d * w;
                    }
                }
                for (p, &a) in prev.iter_mut().zip(input) {
                    if a <= 0.0 {
                        *p = 0.0;
                    }
                }
                delta = prev;
            }
        }
        Ok((loss, grads))
    }

    pub fn loss(&self, samples: &[RegressionSample<'_>]) -> Result<f64, DqnError> {
        if samples.is_empty() {
            return Err(DqnError::Argument("empty batch".into()));
        }
        let mut total = 0.0;
        for s in samples {
            let q = self.forward(s.state)?;
            let err = q.get(s.action).ok_or_else(|| {
                DqnError::Argument(format!("action {} outside {} outputs", s.action, q.len()))
            })? - s.target;
            total += err * err;
        }
        Ok(total / samples.len() as f64)
    }

    /// Plain gradient descent step.
    pub fn apply_gradients(&mut self, grads: &Gradients, learning_rate: f64) {
        for ((layer, gw), gb) in self.layers.iter_mut().zip(&grads.weights).zip(&grads.biases) {
            for (w, g) in layer.weights.iter_mut().zip(gw) {
                *w -= learning_rate * g;
            }
            for (b, g) in layer.biases.iter_mut().zip(gb) {
                *b -= learning_rate * g;
            }
        }
    }
}

fn relu_in_place(x: &mut [f64]) {
    for v in x {
        if *v < 0.0 {
            *v = 0.0;
        }
    }
}

/// Index of the largest value, lowest index on ties.
pub fn argmax(values: &[f64]) -> usize {
    let mut best = 0;
    for (i, &v) in values.iter().enumerate().skip(1) {
        if v > values[best] {
            best = i;
        }
    }
    best
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn zero_network_outputs_zero() {
        let net = QNetwork::zeros(&[4, 8, 3]).unwrap();
        assert_eq!(net.forward(&[1.0, -2.0, 3.0, 0.5]).unwrap(), vec![0.0; 3]);
    }

    #[test]
    fn identity_single_layer() {
        let mut weights = vec![0.0; 9];
        for i in 0..3 {
            weights[i * 3 + i] = 1.0;
        }
        let net = QNetwork::from_layers(vec![Layer {
            inputs: 3,
            outputs: 3,
            weights,
            biases: vec![0.0; 3],
        }])
        .unwrap();
        assert_eq!(net.forward(&[0.2, -0.7, 5.0]).unwrap(), vec![0.2, -0.7, 5.0]);
    }

    #[test]
    fn hand_computed_two_layer_net() {
        // h = relu([[1, -1], [0.5, 2]] x + [0, -1]); q = [[1, 1], [2, -1]] h + [0.5, 0]
        let net = QNetwork::from_layers(vec![
            Layer {
                inputs: 2,
                outputs: 2,
                weights: vec![1.0, -1.0, 0.5, 2.0],
                biases: vec![0.0, -1.0],
            },
            Layer {
                inputs: 2,
                outputs: 2,
                weights: vec![1.0, 1.0, 2.0, -1.0],
                biases: vec![0.5, 0.0],
            },
        ])
        .unwrap();
        // x = [3, 1]: pre = [2, 2.5], h = [2, 2.5], q = [5, 1.5]
        assert_eq!(net.forward(&[3.0, 1.0]).unwrap(), vec![5.0, 1.5]);
        // x = [1, 2]: pre = [-1, 3.5], h = [0, 3.5], q = [4, -3.5]
        assert_eq!(net.forward(&[1.0, 2.0]).unwrap(), vec![4.0, -3.5]);
    }

    #[test]
    fn shape_errors() {
        let net = QNetwork::zeros(&[3, 2]).unwrap();
        assert!(matches!(net.forward(&[1.0]), Err(DqnError::Shape(_))));
        assert!(QNetwork::zeros(&[3]).is_err());
        assert!(QNetwork::from_layers(vec![
            Layer {
                inputs: 2,
                outputs: 3,
                weights: vec![0.0; 6],
                biases: vec![0.0; 3]
            },
            Layer {
                inputs: 4,
                outputs: 1,
                weights: vec![0.0; 4],
                biases: vec![0.0; 1]
            },
        ])
        .is_err());
    }

    #[test]
    fn flat_params_roundtrip() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let net = QNetwork::new(&[3, 5, 2], &mut rng).unwrap();
        let flat = net.params_flat();
        assert_eq!(flat.len(), net.n_params());
        let mut other = QNetwork::zeros(&[3, 5, 2]).unwrap();
        other.set_params_flat(&flat).unwrap();
        assert_eq!(other, net);
        assert_eq!(Gradients::zeros_like(&net).flat().len(), net.n_params());
    }

    #[test]
    fn argmax_prefers_lowest_index() {
        assert_eq!(argmax(&[1.0, 3.0, 2.0]), 1);
        assert_eq!(argmax(&[5.0, 5.0, 5.0]), 0);
        assert_eq!(argmax(&[-1.0, 0.0, 0.0]), 1);
    }
}
