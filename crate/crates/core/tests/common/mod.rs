#![allow(dead_code)]

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use tlunet_core::data::{Mask, MaskSet};
use tlunet_core::model::{build_model, EncoderSpec, ModelConfig, UNet};
use tlunet_core::nn::{Module, ParamKind};
use tlunet_core::{Scalar, Tensor};

pub fn tiny_resnet() -> EncoderSpec {
    EncoderSpec::ResNet { stem: 4, widths: [4, 6, 8, 8], blocks: [1, 1, 1, 1] }
}

pub fn tiny_densenet() -> EncoderSpec {
    EncoderSpec::DenseNet { init_features: 4, growth: 2, bn_size: 2, block_layers: [2, 2, 2, 2] }
}

/// Two-stage model on 8x8 input with narrow decoder.
pub fn tiny_model<T: Scalar>(encoder: EncoderSpec, seed: u64) -> UNet<T> {
    let mut cfg = ModelConfig::new(encoder, 8, 8).with_stages(2);
    cfg.decoder_channels = vec![6, 4];
    cfg.seed = seed;
    build_model(&cfg).unwrap()
}

pub fn random_input<T: Scalar>(b: usize, h: usize, w: usize, seed: u64) -> Tensor<T> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let data = (0..b * 3 * h * w).map(|_| T::from_f64(rng.random_range(-1.5..1.5))).collect();
    Tensor::from_vec([b, 3, h, w], data).unwrap()
}

pub fn random_masks(h: usize, w: usize, classes: usize, rng: &mut impl Rng) -> MaskSet {
    let masks = (0..classes)
        .map(|_| {
            let p = rng.random_range(0.0..0.6);
            let bits = (0..h * w).map(|_| u8::from(rng.random_bool(p))).collect();
            Mask::from_vec(h, w, bits).unwrap()
        })
        .collect();
    MaskSet::new(h, w, masks).unwrap()
}

/// Flattened trainable gradients, visiting order.
pub fn trainable_grads<T: Scalar>(m: &UNet<T>) -> Vec<(String, Vec<T>)> {
    let mut out = Vec::new();
    m.visit("", &mut |name, p| {
        if p.kind() == ParamKind::Trainable {
            out.push((name.to_string(), p.grad.clone()));
        }
    });
    out
}

pub fn nudge<T: Scalar>(m: &mut UNet<T>, name: &str, idx: usize, delta: T) {
    m.visit_mut("", &mut |n, p| {
        if n == name {
            p.value[idx] = p.value[idx] + delta;
        }
    });
}
