use alloc::vec::Vec;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use super::config::{EncoderSpec, ModelConfig};
use super::decoder::Decoder;
use super::densenet::DenseNetEncoder;
use super::resnet::ResNetEncoder;
use crate::error::{bail, Result};
use crate::nn::{global_avg_pool, global_avg_pool_backward, join, sigmoid, Conv2d, Linear, Module, Param};
use crate::scalar::Scalar;
use crate::tensor::Tensor;

#[derive(Debug, Clone)]
#[allow(clippy::large_enum_variant)]
pub enum Encoder<T> {
    ResNet(ResNetEncoder<T>),
    DenseNet(DenseNetEncoder<T>),
}

impl<T: Scalar> Encoder<T> {
    fn forward(&mut self, x: &Tensor<T>, train: bool) -> Vec<Tensor<T>> {
        match self {
            Self::ResNet(e) => e.forward(x, train),
            Self::DenseNet(e) => e.forward(x, train),
        }
    }
    fn infer(&self, x: &Tensor<T>) -> Vec<Tensor<T>> {
        match self {
            Self::ResNet(e) => e.infer(x),
            Self::DenseNet(e) => e.infer(x),
        }
    }
    fn backward(&mut self, grads: Vec<Tensor<T>>) {
        match self {
            Self::ResNet(e) => e.backward(grads),
            Self::DenseNet(e) => e.backward(grads),
        }
    }
}

impl<T: Scalar> Module<T> for Encoder<T> {
    fn visit(&self, prefix: &str, f: &mut dyn FnMut(&str, &Param<T>)) {
        match self {
            Self::ResNet(e) => e.visit(prefix, f),
            Self::DenseNet(e) => e.visit(prefix, f),
        }
    }
    fn visit_mut(&mut self, prefix: &str, f: &mut dyn FnMut(&str, &mut Param<T>)) {
        match self {
            Self::ResNet(e) => e.visit_mut(prefix, f),
            Self::DenseNet(e) => e.visit_mut(prefix, f),
        }
    }
}

/// Encoder feature maps, shallowest first; feature `s` (0-based) has spatial
/// size `(H / 2^(s+1), W / 2^(s+1))`.
#[derive(Debug, Clone)]
pub struct FeaturePyramid<T> {
    pub features: Vec<Tensor<T>>,
}

impl<T: Scalar> FeaturePyramid<T> {
    pub fn bottleneck(&self) -> &Tensor<T> {
        self.features.last().expect("non-empty pyramid")
    }
}

/// Per-image sigmoid outputs. Pixel probabilities are stored class-major
/// (`N` planes of `H × W`); [`Prediction::pixel_prob`] indexes them as `H × W × N`.
#[derive(Debug, Clone, PartialEq)]
pub struct Prediction<T> {
    pub height: usize,
    pub width: usize,
    pub pixel_probs: Vec<T>,
    pub class_probs: Vec<T>,
}

impl<T: Scalar> Prediction<T> {
    pub fn num_classes(&self) -> usize {
        self.class_probs.len()
    }
    /// `(H, W, N)`.
    pub fn shape(&self) -> (usize, usize, usize) {
        (self.height, self.width, self.num_classes())
    }
    pub fn pixel_prob(&self, row: usize, col: usize, class: usize) -> T {
        self.pixel_probs[(class * self.height + row) * self.width + col]
    }
    pub fn class_plane(&self, class: usize) -> &[T] {
        let hw = self.height * self.width;
        &self.pixel_probs[class * hw..(class + 1) * hw]
    }
}

/// Raw outputs of one forward pass over a batch.
#[derive(Debug, Clone)]
pub struct ForwardOutput<T> {
    pub pyramid: FeaturePyramid<T>,
    /// `[B, N, H, W]` segmentation logits.
    pub pixel_logits: Tensor<T>,
    /// Row-major `[B, N]` classification logits.
    pub class_logits: Vec<T>,
}

impl<T: Scalar> ForwardOutput<T> {
    pub fn predictions(&self) -> Vec<Prediction<T>> {
        let [b, n, h, w] = self.pixel_logits.shape();
        (0..b)
            .map(|i| Prediction {
                height: h,
                width: w,
                pixel_probs: self.pixel_logits.item(i).iter().map(|&v| sigmoid(v)).collect(),
                class_probs: self.class_logits[i * n..(i + 1) * n].iter().map(|&v| sigmoid(v)).collect(),
            })
            .collect()
    }
}

/// Which part of the network [`count_parameters`] counts. `Decoder` covers
/// everything outside the encoder, including both heads.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ParamScope {
    Encoder,
    Decoder,
    All,
}

/// U-Net with a swappable encoder, a sigmoid segmentation head and a
/// classification head on the spatially pooled bottleneck.
#[derive(Debug, Clone)]
pub struct UNet<T> {
    config: ModelConfig,
    pub(crate) encoder: Encoder<T>,
    decoder: Decoder<T>,
    segmentation_head: Conv2d<T>,
    classification_head: Linear<T>,
    feature_shapes: Vec<[usize; 4]>,
}

/// Builds a randomly initialized model. For `InitMode::Pretrained` the caller
/// then transfers encoder weights with [`load_pretrained`](super::load_pretrained);
/// the architecture is identical in both modes.
pub fn build_model<T: Scalar>(config: &ModelConfig) -> Result<UNet<T>> {
    config.validate()?;
    let mut rng = ChaCha8Rng::seed_from_u64(config.seed);
    let encoder = match config.encoder {
        EncoderSpec::ResNet { stem, widths, blocks } => {
            Encoder::ResNet(ResNetEncoder::new(stem, widths, blocks, config.stages, &mut rng))
        }
        EncoderSpec::DenseNet { init_features, growth, bn_size, block_layers } => Encoder::DenseNet(
            DenseNetEncoder::new(init_features, growth, bn_size, block_layers, config.stages, &mut rng),
        ),
    };
    let enc_channels = config.encoder.feature_channels(config.stages);
    let decoder = Decoder::new(&enc_channels, &config.decoder_channels, &mut rng);
    let last = *config.decoder_channels.last().expect("validated non-empty");
    let segmentation_head = Conv2d::new(last, config.num_classes, 3, 1, 1, true, &mut rng);
    let classification_head = Linear::new(enc_channels[config.stages - 1], config.num_classes, &mut rng);
    Ok(UNet {
        config: config.clone(),
        encoder,
        decoder,
        segmentation_head,
        classification_head,
        feature_shapes: Vec::new(),
    })
}

impl<T: Scalar> UNet<T> {
    pub fn config(&self) -> &ModelConfig {
        &self.config
    }

    fn check_input(&self, x: &Tensor<T>) -> Result<()> {
        let [b, c, h, w] = x.shape();
        if b == 0 || c != 3 || h != self.config.input_height || w != self.config.input_width {
            bail!(
                Validation,
                "input batch {:?} does not match model input [B, 3, {}, {}]",
                x.shape(),
                self.config.input_height,
                self.config.input_width
            );
        }
        Ok(())
    }

    /// Forward pass. With `train` set, batch-norm uses batch statistics and
    /// every layer keeps what [`UNet::backward`] needs.
    pub fn forward(&mut self, x: &Tensor<T>, train: bool) -> Result<ForwardOutput<T>> {
        self.check_input(x)?;
        let feats = self.encoder.forward(x, train);
        let dec = self.decoder.forward(&feats, train);
        let pixel_logits = self.segmentation_head.forward(&dec, train);
        let pooled = global_avg_pool(feats.last().expect("stages >= 2"));
        let class_logits = self.classification_head.forward(&pooled, train);
        self.feature_shapes = feats.iter().map(|f| f.shape()).collect();
        Ok(ForwardOutput { pyramid: FeaturePyramid { features: feats }, pixel_logits, class_logits })
    }

    /// Evaluation-mode forward pass through a shared reference.
    pub fn infer(&self, x: &Tensor<T>) -> Result<ForwardOutput<T>> {
        self.check_input(x)?;
        let feats = self.encoder.infer(x);
        let dec = self.decoder.infer(&feats);
        let pixel_logits = self.segmentation_head.infer(&dec);
        let class_logits = self.classify(feats.last().expect("stages >= 2"));
        Ok(ForwardOutput { pyramid: FeaturePyramid { features: feats }, pixel_logits, class_logits })
    }

    /// Classification logits from a bottleneck: spatial mean, then one affine map.
    pub fn classify(&self, bottleneck: &Tensor<T>) -> Vec<T> {
        self.classification_head.infer(&global_avg_pool(bottleneck))
    }

    pub fn classification_head(&self) -> &Linear<T> {
        &self.classification_head
    }

    /// Backpropagates logit gradients from the last training forward,
    /// accumulating into every parameter's `grad`.
    pub fn backward(&mut self, grad_pixel_logits: &Tensor<T>, grad_class_logits: &[T]) {
        let g_dec = self.segmentation_head.backward(grad_pixel_logits);
        let mut grads = self.decoder.backward(&g_dec, &self.feature_shapes);
        let g_pooled = self.classification_head.backward(grad_class_logits);
        let last = grads.len() - 1;
        grads[last].add_assign(&global_avg_pool_backward(&g_pooled, self.feature_shapes[last]));
        self.encoder.backward(grads);
    }
}

pub const ENCODER_PREFIX: &str = "encoder";

impl<T: Scalar> Module<T> for UNet<T> {
    fn visit(&self, prefix: &str, f: &mut dyn FnMut(&str, &Param<T>)) {
        self.encoder.visit(&join(prefix, ENCODER_PREFIX), f);
        self.decoder.visit(&join(prefix, "decoder"), f);
        self.segmentation_head.visit(&join(prefix, "segmentation_head.0"), f);
        self.classification_head.visit(&join(prefix, "classification_head"), f);
    }
    fn visit_mut(&mut self, prefix: &str, f: &mut dyn FnMut(&str, &mut Param<T>)) {
        self.encoder.visit_mut(&join(prefix, ENCODER_PREFIX), f);
        self.decoder.visit_mut(&join(prefix, "decoder"), f);
        self.segmentation_head.visit_mut(&join(prefix, "segmentation_head.0"), f);
        self.classification_head.visit_mut(&join(prefix, "classification_head"), f);
    }
}

/// Exact number of trainable scalars in `scope`.
pub fn count_parameters<T: Scalar>(model: &UNet<T>, scope: ParamScope) -> usize {
    let encoder = crate::nn::count_params(&model.encoder);
    let all = crate::nn::count_params(model);
    match scope {
        ParamScope::Encoder => encoder,
        ParamScope::Decoder => all - encoder,
        ParamScope::All => all,
    }
}
