use rand::Rng;

use super::network::{QNetwork, RegressionSample};
use super::DqnError;

pub const FD_STEP: f64 = 1e-5;
const DENOM_FLOOR: f64 = 1e-8;

/// Max relative error between analytic gradients and central differences
/// over every parameter.
pub fn grad_check(net: &QNetwork, batch: &[RegressionSample<'_>]) -> Result<f64, DqnError> {
    let (_, grads) = net.loss_and_gradients(batch)?;
    let analytic = grads.flat();
    let base = net.params_flat();
    let mut probe = net.clone();
    let mut params = base.clone();
    let mut worst = 0.0f64;
    for (i, &a) in analytic.iter().enumerate() {
        params[i] = base[i] + FD_STEP;
        probe.set_params_flat(&params)?;
        let plus = probe.loss(batch)?;
        params[i] = base[i] - FD_STEP;
        probe.set_params_flat(&params)?;
        let minus = probe.loss(batch)?;
        params[i] = base[i];
        let numeric = (plus - minus) / (2.0 * FD_STEP);
        let denom = a.abs().max(numeric.abs()).max(DENOM_FLOOR);
        worst = worst.max((a - numeric).abs() / denom);
    }
    Ok(worst)
}

/// Grad-check a small network with random shape, parameters and batch.
pub fn check_random_net<R: Rng + ?Sized>(rng: &mut R) -> Result<f64, DqnError> {
    let input = rng.random_range(1..6);
    let hidden = rng.random_range(1..8);
    let out = rng.random_range(1..5);
    let mut net = QNetwork::zeros(&[input, hidden, hidden, out])?;
    // random biases too: zero biases put dead units exactly on the kink
    let params: Vec<f64> = (0..net.n_params()).map(|_| rng.random_range(-1.0..1.0)).collect();
    net.set_params_flat(&params)?;
    let states: Vec<Vec<f64>> = (0..4)
        .map(|_| (0..input).map(|_| rng.random_range(-1.0..1.0)).collect())
        .collect();
    let batch: Vec<_> = states
        .iter()
        .map(|s| RegressionSample {
            state: s,
            action: rng.random_range(0..out),
            target: rng.random_range(-2.0..2.0),
        })
        .collect();
    grad_check(&net, &batch)
}
