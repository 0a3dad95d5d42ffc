use serde::{Deserialize, Serialize};

use super::tensor::Tensor;
use crate::error::{Error, Result};
use crate::rng::{rng_from_seed, uniform_symmetric};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Activation {
    Tanh,
    Relu,
    Identity,
}

impl Activation {
    #[inline]
    fn apply(self, x: f64) -> f64 {
        match self {
            Activation::Tanh => x.tanh(),
            Activation::Relu => x.max(0.0),
            Activation::Identity => x,
        }
    }

    /// Derivative expressed through the pre-activation and the activation output.
    #[inline]
    fn derivative(self, pre: f64, out: f64) -> f64 {
        match self {
            Activation::Tanh => 1.0 - out * out,
            Activation::Relu => {
                if pre > 0.0 {
                    1.0
                } else {
                    0.0
                }
            }
            Activation::Identity => 1.0,
        }
    }
}

/// One affine layer followed by an elementwise activation. `weight` is
/// `out x in`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Layer {
    pub weight: Tensor,
    pub bias: Vec<f64>,
    pub activation: Activation,
}

impl Layer {
    pub fn new(weight: Tensor, bias: Vec<f64>, activation: Activation) -> Result<Self> {
        if weight.shape().len() != 2 || weight.rows() != bias.len() {
            return Err(Error::invalid(format!(
                "layer weight {:?} does not match bias length {}",
                weight.shape(),
                bias.len()
            )));
        }
        Ok(Self { weight, bias, activation })
    }

    pub fn in_dim(&self) -> usize {
        self.weight.shape()[1]
    }

    pub fn out_dim(&self) -> usize {
        self.weight.shape()[0]
    }
}

/// Feed-forward network. Initialization is a pure function of `(seed, dims)`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Mlp {
    layers: Vec<Layer>,
    seed: u64,
}

/// Everything `backward` needs from a forward pass.
#[derive(Debug, Clone)]
pub struct ForwardCache {
    /// Input to each layer.
    inputs: Vec<Vec<f64>>,
    pre_activations: Vec<Vec<f64>>,
    outputs: Vec<Vec<f64>>,
}

/// Per-parameter gradients mirroring an [`Mlp`] layout.
#[derive(Debug, Clone, PartialEq)]
pub struct Gradients {
    pub layers: Vec<(Tensor, Vec<f64>)>,
}

impl Mlp {
    /// Xavier-uniform weights (limit `sqrt(6 / (fan_in + fan_out))`), zero
    /// biases. `dims` lists input then each layer's output dimension.
    pub fn new(dims: &[usize], activations: &[Activation], seed: u64) -> Result<Self> {
        if dims.len() < 2 || activations.len() != dims.len() - 1 {
            return Err(Error::config(format!(
                "need {} activations for dims {dims:?}, got {}",
                dims.len().saturating_sub(1),
                activations.len()
            )));
        }
        if dims.contains(&0) {
            return Err(Error::config(format!("zero dimension in {dims:?}")));
        }
        let mut rng = rng_from_seed(seed);
        let layers = dims
            .windows(2)
            .zip(activations)
            .map(|(w, &act)| {
                let (fan_in, fan_out) = (w[0], w[1]);
                let limit = (6.0 / (fan_in + fan_out) as f64).sqrt();
                let weight =
                    Tensor::from_fn(vec![fan_out, fan_in], |_| uniform_symmetric(&mut rng, limit));
                Layer { weight, bias: vec![0.0; fan_out], activation: act }
            })
            .collect();
        Ok(Self { layers, seed })
    }

    pub fn from_layers(layers: Vec<Layer>, seed: u64) -> Result<Self> {
        if layers.is_empty() {
            return Err(Error::config("network needs at least one layer"));
        }
        for (k, pair) in layers.windows(2).enumerate() {
            if pair[0].out_dim() != pair[1].in_dim() {
                return Err(Error::config(format!(
                    "layer {k} outputs {} but layer {} expects {}",
                    pair[0].out_dim(),
                    k + 1,
                    pair[1].in_dim()
                )));
            }
        }
        Ok(Self { layers, seed })
    }

    pub fn layers(&self) -> &[Layer] {
        &self.layers
    }

    pub fn layers_mut(&mut self) -> &mut [Layer] {
        &mut self.layers
    }

    pub fn seed(&self) -> u64 {
        self.seed
    }

    pub fn in_dim(&self) -> usize {
        self.layers[0].in_dim()
    }

    pub fn out_dim(&self) -> usize {
        self.layers[self.layers.len() - 1].out_dim()
    }

    pub fn param_count(&self) -> usize {
        self.layers.iter().map(|l| l.weight.len() + l.bias.len()).sum()
    }

    pub fn forward(&self, input: &[f64]) -> Result<(Vec<f64>, ForwardCache)> {
        if input.len() != self.in_dim() {
            return Err(Error::invalid(format!(
                "network expects input of length {}, got {}",
                self.in_dim(),
                input.len()
            )));
        }
        let mut cache = ForwardCache {
            inputs: Vec::with_capacity(self.layers.len()),
            pre_activations: Vec::with_capacity(self.layers.len()),
            outputs: Vec::with_capacity(self.layers.len()),
        };
        let mut x = input.to_vec();
        for layer in &self.layers {
            let mut pre = layer.weight.matvec(&x)?;
            for (p, b) in pre.iter_mut().zip(&layer.bias) {
                *p += b;
            }
            let out: Vec<f64> = pre.iter().map(|&p| layer.activation.apply(p)).collect();
            cache.inputs.push(std::mem::replace(&mut x, out.clone()));
            cache.pre_activations.push(pre);
            cache.outputs.push(out);
        }
        if x.iter().any(|v| !v.is_finite()) {
            return Err(Error::numeric("non-finite network output"));
        }
        Ok((x, cache))
    }

    /// Forward pass without keeping the cache.
    pub fn predict(&self, input: &[f64]) -> Result<Vec<f64>> {
        self.forward(input).map(|(y, _)| y)
    }

    pub fn backward(&self, cache: &ForwardCache, output_gradient: &[f64]) -> Result<Gradients> {
        if cache.inputs.len() != self.layers.len() {
            return Err(Error::invalid("cache does not come from this network"));
        }
        if output_gradient.len() != self.out_dim() {
            return Err(Error::invalid(format!(
                "output gradient has length {}, network outputs {}",
                output_gradient.len(),
                self.out_dim()
            )));
        }
        let mut grads = vec![];
        let mut upstream = output_gradient.to_vec();
        for (k, layer) in self.layers.iter().enumerate().rev() {
            let input = &cache.inputs[k];
            if input.len() != layer.in_dim() || cache.outputs[k].len() != layer.out_dim() {
                return Err(Error::invalid("cache shape does not match network"));
            }
            let delta: Vec<f64> = upstream
                .iter()
                .zip(&cache.pre_activations[k])
                .zip(&cache.outputs[k])
                .map(|((g, &pre), &out)| g * layer.activation.derivative(pre, out))
                .collect();
            let (rows, cols) = (layer.out_dim(), layer.in_dim());
            let mut dw = vec![0.0; rows * cols];
            for (r, d) in delta.iter().enumerate() {
                if *d != 0.0 {
                    for (c, x) in input.iter().enumerate() {
                        dw[r * cols + c] = d * x;
                    }
                }
            }
            let mut next = vec![0.0; cols];
            for (r, d) in delta.iter().enumerate() {
                if *d != 0.0 {
                    let row = &layer.weight.data()[r * cols..(r + 1) * cols];
                    for (n, w) in next.iter_mut().zip(row) {
                        *n += d * w;
                    }
                }
            }
            grads.push((Tensor::new(vec![rows, cols], dw)?, delta));
            upstream = next;
        }
        grads.reverse();
        Ok(Gradients { layers: grads })
    }

    /// Flattened parameters: per layer, weights row-major then biases.
    pub fn flat_params(&self) -> Vec<f64> {
        let mut out = Vec::with_capacity(self.param_count());
        for l in &self.layers {
            out.extend_from_slice(l.weight.data());
            out.extend_from_slice(&l.bias);
        }
        out
    }

    pub fn set_flat_params(&mut self, flat: &[f64]) -> Result<()> {
        if flat.len() != self.param_count() {
            return Err(Error::invalid(format!(
                "expected {} parameters, got {}",
                self.param_count(),
                flat.len()
            )));
        }
        let mut offset = 0;
        for l in &mut self.layers {
            let n = l.weight.len();
            l.weight.data_mut().copy_from_slice(&flat[offset..offset + n]);
            offset += n;
            let b = l.bias.len();
            l.bias.copy_from_slice(&flat[offset..offset + b]);
            offset += b;
        }
        Ok(())
    }
}

impl Gradients {
    pub fn zeros_like(net: &Mlp) -> Self {
        Self {
            layers: net
                .layers()
                .iter()
                .map(|l| (Tensor::zeros(l.weight.shape().to_vec()), vec![0.0; l.bias.len()]))
                .collect(),
        }
    }

    pub fn flat(&self) -> Vec<f64> {
        let mut out = vec![];
        for (w, b) in &self.layers {
            out.extend_from_slice(w.data());
            out.extend_from_slice(b);
        }
        out
    }

    /// Rebuilds a bundle shaped like `net` from a flat vector.
    pub fn from_flat(net: &Mlp, flat: &[f64]) -> Result<Self> {
        let mut probe = net.clone();
        probe.set_flat_params(flat)?;
        Ok(Self {
            layers: probe.layers.into_iter().map(|l| (l.weight, l.bias)).collect(),
        })
    }

    /// `self += scale * other`.
    pub fn add_scaled(&mut self, other: &Gradients, scale: f64) {
        for ((w, b), (ow, ob)) in self.layers.iter_mut().zip(&other.layers) {
            for (x, y) in w.data_mut().iter_mut().zip(ow.data()) {
                *x += scale * y;
            }
            for (x, y) in b.iter_mut().zip(ob) {
                *x += scale * y;
            }
        }
    }

    pub fn all_finite(&self) -> bool {
        self.layers
            .iter()
            .all(|(w, b)| w.all_finite() && b.iter().all(|v| v.is_finite()))
    }

    pub fn is_zero(&self) -> bool {
        self.flat().iter().all(|&v| v == 0.0)
    }
}

/// Temperature-scaled softmax with max-subtraction.
pub fn softmax(logits: &[f64], temperature: f64) -> Result<Vec<f64>> {
    let scaled = scale_logits(logits, temperature)?;
    let max = scaled.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let exps: Vec<f64> = scaled.iter().map(|s| (s - max).exp()).collect();
    let total: f64 = exps.iter().sum();
    Ok(exps.into_iter().map(|e| e / total).collect())
}

pub fn log_softmax(logits: &[f64], temperature: f64) -> Result<Vec<f64>> {
    let scaled = scale_logits(logits, temperature)?;
    let max = scaled.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let lse = scaled.iter().map(|s| (s - max).exp()).sum::<f64>().ln();
    Ok(scaled.into_iter().map(|s| (s - max) - lse).collect())
}

/// Log-softmax over the entries where `mask` is true; masked entries get
/// negative infinity.
pub fn masked_log_softmax(logits: &[f64], mask: &[bool]) -> Result<Vec<f64>> {
    if logits.len() != mask.len() {
        return Err(Error::invalid("mask length differs from logits"));
    }
    let kept: Vec<f64> = logits.iter().zip(mask).filter(|(_, &m)| m).map(|(l, _)| *l).collect();
    let mut sub = log_softmax(&kept, 1.0)?.into_iter();
    Ok(mask
        .iter()
        .map(|&m| if m { sub.next().expect("one per kept entry") } else { f64::NEG_INFINITY })
        .collect())
}

fn scale_logits(logits: &[f64], temperature: f64) -> Result<Vec<f64>> {
    if logits.is_empty() {
        return Err(Error::invalid("softmax of an empty vector"));
    }
    if !(temperature > 0.0 && temperature.is_finite()) {
        return Err(Error::invalid(format!("temperature must be positive, got {temperature}")));
    }
    if logits.iter().any(|v| !v.is_finite()) {
        return Err(Error::invalid("softmax input has a non-finite entry"));
    }
    Ok(logits.iter().map(|l| l / temperature).collect())
}

#[cfg(test)]
mod tests {
    use super::*;

    fn single(weight: Vec<f64>, bias: Vec<f64>, rows: usize, cols: usize) -> Mlp {
        let layer = Layer::new(Tensor::new(vec![rows, cols], weight).unwrap(), bias, Activation::Identity)
            .unwrap();
        Mlp::from_layers(vec![layer], 0).unwrap()
    }

    #[test]
    fn softmax_symmetric_and_shift_invariant() {
        assert_eq!(softmax(&[0.0, 0.0], 1.0).unwrap(), vec![0.5, 0.5]);
        for c in [-50.0, 0.0, 3.5, 700.0] {
            let p = softmax(&[c, c, c], 1.0).unwrap();
            for v in p {
                assert!((v - 1.0 / 3.0).abs() < 1e-15);
            }
        }
    }

    #[test]
    fn softmax_errors() {
        assert!(softmax(&[], 1.0).is_err());
        assert!(softmax(&[f64::NAN], 1.0).is_err());
        assert!(softmax(&[1.0], 0.0).is_err());
    }

    #[test]
    fn identity_and_bias_only_layers() {
        let net = single(vec![1.0, 0.0, 0.0, 1.0], vec![0.0, 0.0], 2, 2);
        assert_eq!(net.predict(&[0.3, -2.0]).unwrap(), vec![0.3, -2.0]);
        let net = single(vec![0.0; 6], vec![4.0, -1.0], 2, 3);
        assert_eq!(net.predict(&[9.0, 8.0, 7.0]).unwrap(), vec![4.0, -1.0]);
        assert!(net.predict(&[1.0]).is_err());
    }

    #[test]
    fn linear_layer_weight_gradient_is_outer_product() {
        let net = single(vec![1.0, 2.0, 3.0, 4.0, 5.0, 6.0], vec![0.0, 0.0], 2, 3);
        let x = [0.5, -1.0, 2.0];
        let g = [3.0, -2.0];
        let (_, cache) = net.forward(&x).unwrap();
        let grads = net.backward(&cache, &g).unwrap();
        let expected: Vec<f64> = g.iter().flat_map(|gi| x.iter().map(move |xj| gi * xj)).collect();
        assert_eq!(grads.layers[0].0.data(), expected.as_slice());
        assert_eq!(grads.layers[0].1, g.to_vec());
    }

    #[test]
    fn zero_output_gradient_gives_zero_bundle() {
        let net = Mlp::new(&[3, 5, 2], &[Activation::Tanh, Activation::Identity], 7).unwrap();
        let (_, cache) = net.forward(&[0.1, 0.2, 0.3]).unwrap();
        assert!(net.backward(&cache, &[0.0, 0.0]).unwrap().is_zero());
        assert!(net.backward(&cache, &[0.0]).is_err());
    }

    #[test]
    fn init_is_pure_in_seed() {
        let a = Mlp::new(&[4, 8, 3], &[Activation::Tanh, Activation::Identity], 11).unwrap();
        let b = Mlp::new(&[4, 8, 3], &[Activation::Tanh, Activation::Identity], 11).unwrap();
        let c = Mlp::new(&[4, 8, 3], &[Activation::Tanh, Activation::Identity], 12).unwrap();
        assert_eq!(a, b);
        assert_ne!(a, c);
        let limit = (6.0f64 / 12.0).sqrt();
        assert!(a.layers()[0].weight.data().iter().all(|w| w.abs() <= limit));
    }

    #[test]
    fn flat_params_round_trip() {
        let mut net = Mlp::new(&[2, 3, 1], &[Activation::Relu, Activation::Identity], 3).unwrap();
        let mut flat = net.flat_params();
        assert_eq!(flat.len(), net.param_count());
        flat[0] = 42.0;
        net.set_flat_params(&flat).unwrap();
        assert_eq!(net.layers()[0].weight.data()[0], 42.0);
        assert!(net.set_flat_params(&[1.0]).is_err());
    }

    #[test]
    fn rejects_mismatched_chain() {
        let a = Layer::new(Tensor::zeros(vec![3, 2]), vec![0.0; 3], Activation::Tanh).unwrap();
        let b = Layer::new(Tensor::zeros(vec![1, 4]), vec![0.0], Activation::Identity).unwrap();
        assert!(Mlp::from_layers(vec![a, b], 0).is_err());
    }
}
