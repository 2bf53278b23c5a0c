use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;

use super::net::{loss_and_grad, ops, zero_grads, Map, ModelParams};
use super::spec::RECEPTIVE_FIELD;
use crate::error::{Error, Result};

/// Samples per gradient partial; fixed so the reduction order never depends on threads.
const CHUNK: usize = 8;

pub const PATCH_BYTES: usize = RECEPTIVE_FIELD * RECEPTIVE_FIELD * 3;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TrainConfig {
    pub batch: usize,
    pub lr: f32,
    pub momentum: f32,
    pub steps: usize,
    pub seed: u64,
}

impl Default for TrainConfig {
    fn default() -> Self {
        Self {
            batch: 128,
            lr: 1e-3,
            momentum: 0.9,
            steps: 2000,
            seed: 0,
        }
    }
}

/// One training example: an interleaved RGB patch of 227×227 pixels.
#[derive(Debug, Clone, PartialEq)]
pub struct TrainSample {
    pub patch: Vec<u8>,
    pub label: bool,
    pub executed_bin: usize,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct StepStats {
    pub step: usize,
    pub loss: f64,
    /// Fraction of the batch where `p > 0.5` agrees with the label.
    pub accuracy: f64,
}

/// Minibatch SGD with momentum over seeded epoch shuffles.
pub fn train(params: &ModelParams, data: &[TrainSample], cfg: &TrainConfig) -> Result<(ModelParams, Vec<StepStats>)> {
    if data.is_empty() {
        return Err(Error::invalid("training set is empty"));
    }
    if cfg.batch == 0 || !(cfg.lr > 0.0 && cfg.lr.is_finite()) || !(0.0..1.0).contains(&cfg.momentum) {
        return Err(Error::invalid("batch must be positive, lr positive, momentum in [0, 1)"));
    }
    let n_bins = params.n_bins();
    for (i, s) in data.iter().enumerate() {
        if s.patch.len() != PATCH_BYTES {
            return Err(Error::invalid(format!("sample {i} patch has {} bytes", s.patch.len())));
        }
        if s.executed_bin >= n_bins {
            return Err(Error::invalid(format!(
                "sample {i} executed bin {} exceeds {n_bins} bins",
                s.executed_bin
            )));
        }
    }

    let mut params = params.clone();
    let spec = params.spec().clone();
    let op_list = ops(&spec);
    let mut velocity = zero_grads::<f32>(&spec);
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    let mut order: Vec<usize> = Vec::new();
    let mut cursor = 0;
    let mut curve = Vec::with_capacity(cfg.steps);

    for step in 0..cfg.steps {
        let mut batch = Vec::with_capacity(cfg.batch);
        while batch.len() < cfg.batch {
            if cursor == order.len() {
                order = (0..data.len()).collect();
                order.shuffle(&mut rng);
                cursor = 0;
            }
            batch.push(order[cursor]);
            cursor += 1;
        }

        let refs = params.refs();
        let partials = batch
            .par_chunks(CHUNK)
            .map(|chunk| {
                let mut grads = zero_grads::<f32>(&spec);
                let mut loss = 0.0f64;
                let mut correct = 0usize;
                for &i in chunk {
                    let s = &data[i];
                    let input = Map::from_rgb8(RECEPTIVE_FIELD, RECEPTIVE_FIELD, &s.patch);
                    let (l, p) = loss_and_grad(&op_list, &refs, input, s.label, s.executed_bin, &mut grads)?;
                    loss += l as f64;
                    correct += usize::from((p > 0.5) == s.label);
                }
                Ok((grads, loss, correct))
            })
            .collect::<Result<Vec<_>>>()?;

        let scale = 1.0 / cfg.batch as f32;
        let mut loss = 0.0;
        let mut correct = 0;
        let mut total = zero_grads::<f32>(&spec);
        for (grads, l, c) in partials {
            loss += l;
            correct += c;
            for ((tw, tb), (gw, gb)) in total.iter_mut().zip(&grads) {
                tw.iter_mut().zip(gw).for_each(|(t, g)| *t += g);
                tb.iter_mut().zip(gb).for_each(|(t, g)| *t += g);
            }
        }
        for ((layer, (vw, vb)), (gw, gb)) in params.layers.iter_mut().zip(velocity.iter_mut()).zip(&total) {
            for ((w, v), g) in layer.weight.data.iter_mut().zip(vw.iter_mut()).zip(gw) {
                *v = cfg.momentum * *v + g * scale;
                *w -= cfg.lr * *v;
            }
            for ((b, v), g) in layer.bias.data.iter_mut().zip(vb.iter_mut()).zip(gb) {
                *v = cfg.momentum * *v + g * scale;
                *b -= cfg.lr * *v;
            }
        }
        curve.push(StepStats {
            step,
            loss: loss / cfg.batch as f64,
            accuracy: correct as f64 / cfg.batch as f64,
        });
    }
    if !params.is_finite() {
        return Err(Error::invalid("training diverged to non-finite parameters"));
    }
    Ok((params, curve))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::planner::{forward_patch, init_params, ModelSpec, Tensor};

    fn disk_patch(bright: bool) -> Vec<u8> {
        let mut out = vec![60u8; PATCH_BYTES];
        if bright {
            for y in 0..227usize {
                for x in 0..227usize {
                    let (dx, dy) = (x as f64 - 113.0, y as f64 - 113.0);
                    if dx * dx + dy * dy < 40.0 * 40.0 {
                        out[(y * 227 + x) * 3..(y * 227 + x) * 3 + 3].copy_from_slice(&[230, 200, 40]);
                    }
                }
            }
        }
        out
    }

    #[test]
    fn rejects_bad_input() {
        let params = init_params(&ModelSpec::tiny(1).unwrap(), 0);
        assert!(train(&params, &[], &TrainConfig::default()).is_err());
        let s = TrainSample {
            patch: disk_patch(false),
            label: true,
            executed_bin: 1,
        };
        assert!(train(&params, &[s], &TrainConfig::default()).is_err());
    }

    #[test]
    fn memorises_single_positive() {
        let params = init_params(&ModelSpec::tiny(1).unwrap(), 5);
        let data: Vec<TrainSample> = (0..10)
            .map(|_| TrainSample {
                patch: disk_patch(true),
                label: true,
                executed_bin: 0,
            })
            .collect();
        let cfg = TrainConfig {
            batch: 8,
            steps: 200,
            ..TrainConfig::default()
        };
        let (trained, curve) = train(&params, &data, &cfg).unwrap();
        assert_eq!(curve.len(), 200);
        assert_eq!(curve.last().unwrap().accuracy, 1.0);
        let again = train(&params, &data, &cfg).unwrap().0;
        assert_eq!(trained, again);
        let patch = Tensor::from_rgb8(227, 227, &data[0].patch).unwrap();
        assert!(forward_patch(&trained, &patch).unwrap()[0] > 0.5);
    }
}
