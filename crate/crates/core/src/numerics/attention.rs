use serde::{Deserialize, Serialize};

use super::mlp::softmax;
use super::tensor::{dot, Tensor};
use crate::error::{Error, Result};
use crate::rng::{derive_seed, rng_from_seed, uniform_symmetric};

/// Projections for one head; each maps the model dimension to `model_dim / head_count`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AttentionHead {
    pub query: Tensor,
    pub key: Tensor,
    pub value: Tensor,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AttentionLayer {
    pub heads: Vec<AttentionHead>,
    /// `model_dim x model_dim`, applied to the concatenated head outputs.
    pub output: Tensor,
}

/// Stacked cross-attention: each layer's output becomes the next layer's
/// query while keys and values stay fixed.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AttentionParams {
    pub model_dim: usize,
    pub head_count: usize,
    pub layers: Vec<AttentionLayer>,
}

#[derive(Debug, Clone)]
pub struct AttentionOutput {
    pub sequence: Vec<Vec<f64>>,
    /// `weights[layer][head][query][key]`; every innermost row sums to one.
    pub weights: Vec<Vec<Vec<Vec<f64>>>>,
}

impl AttentionOutput {
    /// Head-averaged attention of the last layer, one convex row per query.
    pub fn final_mixing(&self) -> Vec<Vec<f64>> {
        let last = &self.weights[self.weights.len() - 1];
        let heads = last.len() as f64;
        (0..last[0].len())
            .map(|q| {
                (0..last[0][q].len())
                    .map(|k| last.iter().map(|h| h[q][k]).sum::<f64>() / heads)
                    .collect()
            })
            .collect()
    }
}

impl AttentionParams {
    pub const DEFAULT_HEADS: usize = 4;
    pub const DEFAULT_LAYERS: usize = 2;

    /// Seeded query/key projections; value and output projections are
    /// identity, so every output coordinate is a convex mix of value coordinates.
    pub fn convex(model_dim: usize, head_count: usize, layer_count: usize, seed: u64) -> Result<Self> {
        Self::build(model_dim, head_count, layer_count, seed, false)
    }

    /// All four projections seeded.
    pub fn random(model_dim: usize, head_count: usize, layer_count: usize, seed: u64) -> Result<Self> {
        Self::build(model_dim, head_count, layer_count, seed, true)
    }

    fn build(model_dim: usize, head_count: usize, layer_count: usize, seed: u64, random_values: bool) -> Result<Self> {
        if head_count == 0 || layer_count == 0 || model_dim == 0 {
            return Err(Error::config("attention needs positive model dim, heads and layers"));
        }
        if !model_dim.is_multiple_of(head_count) {
            return Err(Error::config(format!(
                "model dim {model_dim} is not divisible by {head_count} heads"
            )));
        }
        let dh = model_dim / head_count;
        let limit = (6.0 / (model_dim + dh) as f64).sqrt();
        let layers = (0..layer_count)
            .map(|l| {
                let mut rng = rng_from_seed(derive_seed(seed, &[l as u64]));
                let mut proj = || Tensor::from_fn(vec![dh, model_dim], |_| uniform_symmetric(&mut rng, limit));
                let heads: Vec<AttentionHead> = (0..head_count)
                    .map(|h| {
                        let query = proj();
                        let key = proj();
                        let value = if random_values {
                            proj()
                        } else {
                            Tensor::from_fn(vec![dh, model_dim], |i| {
                                let (r, c) = (i / model_dim, i % model_dim);
                                if c == h * dh + r { 1.0 } else { 0.0 }
                            })
                        };
                        AttentionHead { query, key, value }
                    })
                    .collect();
                let output = if random_values {
                    let lim = (3.0 / model_dim as f64).sqrt();
                    Tensor::from_fn(vec![model_dim, model_dim], |_| uniform_symmetric(&mut rng, lim))
                } else {
                    Tensor::from_fn(vec![model_dim, model_dim], |i| {
                        if i / model_dim == i % model_dim { 1.0 } else { 0.0 }
                    })
                };
                AttentionLayer { heads, output }
            })
            .collect();
        Ok(Self { model_dim, head_count, layers })
    }

    pub fn head_dim(&self) -> usize {
        self.model_dim / self.head_count
    }

    fn validate(&self) -> Result<()> {
        if self.head_count == 0 || !self.model_dim.is_multiple_of(self.head_count) {
            return Err(Error::config(format!(
                "model dim {} is not divisible by {} heads",
                self.model_dim, self.head_count
            )));
        }
        let dh = self.head_dim();
        for layer in &self.layers {
            if layer.heads.len() != self.head_count
                || layer.output.shape() != [self.model_dim, self.model_dim]
                || layer.heads.iter().any(|h| {
                    [&h.query, &h.key, &h.value]
                        .iter()
                        .any(|t| t.shape() != [dh, self.model_dim])
                })
            {
                return Err(Error::config("attention projection shapes are inconsistent"));
            }
        }
        Ok(())
    }
}

pub fn multi_head_attention(
    params: &AttentionParams,
    query: &[Vec<f64>],
    key: &[Vec<f64>],
    value: &[Vec<f64>],
) -> Result<AttentionOutput> {
    params.validate()?;
    let d = params.model_dim;
    if query.is_empty() || key.is_empty() {
        return Err(Error::invalid("attention over an empty sequence"));
    }
    if key.len() != value.len() {
        return Err(Error::invalid(format!(
            "{} keys but {} values",
            key.len(),
            value.len()
        )));
    }
    if query.iter().chain(key).chain(value).any(|v| v.len() != d) {
        return Err(Error::invalid(format!("sequence element dimension differs from model dim {d}")));
    }
    let dh = params.head_dim();
    let scale = 1.0 / (dh as f64).sqrt();
    let mut current = query.to_vec();
    let mut all_weights = Vec::with_capacity(params.layers.len());
    for layer in &params.layers {
        let mut layer_weights = Vec::with_capacity(params.head_count);
        let mut concat = vec![vec![0.0; d]; current.len()];
        for (h, head) in layer.heads.iter().enumerate() {
            let keys: Vec<Vec<f64>> = key.iter().map(|k| head.key.matvec(k)).collect::<Result<_>>()?;
            let values: Vec<Vec<f64>> = value.iter().map(|v| head.value.matvec(v)).collect::<Result<_>>()?;
            let mut head_weights = Vec::with_capacity(current.len());
            for (qi, q) in current.iter().enumerate() {
                let qp = head.query.matvec(q)?;
                let scores: Vec<f64> = keys.iter().map(|k| dot(&qp, k) * scale).collect();
                let w = softmax(&scores, 1.0)?;
                for (wj, vj) in w.iter().zip(&values) {
                    for (c, x) in vj.iter().enumerate() {
                        concat[qi][h * dh + c] += wj * x;
                    }
                }
                head_weights.push(w);
            }
            layer_weights.push(head_weights);
        }
        current = concat.iter().map(|c| layer.output.matvec(c)).collect::<Result<_>>()?;
        all_weights.push(layer_weights);
    }
    Ok(AttentionOutput { sequence: current, weights: all_weights })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn defaults_and_divisibility() {
        assert!(AttentionParams::convex(8, 3, 2, 0).is_err());
        let p = AttentionParams::convex(8, AttentionParams::DEFAULT_HEADS, AttentionParams::DEFAULT_LAYERS, 0).unwrap();
        assert_eq!(p.head_dim(), 2);
        assert_eq!(p.layers.len(), 2);
    }

    #[test]
    fn single_element_returns_value_projection() {
        let p = AttentionParams::random(4, 2, 2, 5).unwrap();
        let v = vec![0.3, -0.2, 0.9, 0.1];
        let out = multi_head_attention(&p, &[vec![1.0, 0.0, 0.0, 0.0]], &[vec![0.5; 4]], std::slice::from_ref(&v)).unwrap();
        let last = &p.layers[1];
        let mut concat = vec![];
        for h in &last.heads {
            concat.extend(h.value.matvec(&v).unwrap());
        }
        let expected = last.output.matvec(&concat).unwrap();
        for (a, b) in out.sequence[0].iter().zip(&expected) {
            assert!((a - b).abs() < 1e-15);
        }
    }

    #[test]
    fn identical_keys_give_uniform_weights() {
        let p = AttentionParams::random(4, 4, 2, 9).unwrap();
        let k = vec![vec![0.2, 0.1, -0.4, 0.7]; 3];
        let v = vec![vec![1.0, 0.0, 0.0, 0.0], vec![0.0, 1.0, 0.0, 0.0], vec![0.0, 0.0, 1.0, 0.0]];
        let out = multi_head_attention(&p, &[vec![0.3, 0.3, 0.3, 0.3]], &k, &v).unwrap();
        for layer in &out.weights {
            for head in layer {
                for w in &head[0] {
                    assert!((w - 1.0 / 3.0).abs() < 1e-15);
                }
            }
        }
    }

    #[test]
    fn mismatched_dimensions() {
        let p = AttentionParams::convex(4, 2, 1, 0).unwrap();
        assert!(multi_head_attention(&p, &[vec![0.0; 3]], &[vec![0.0; 4]], &[vec![0.0; 4]]).is_err());
        assert!(multi_head_attention(&p, &[vec![0.0; 4]], &[vec![0.0; 4]], &[]).is_err());
    }
}
