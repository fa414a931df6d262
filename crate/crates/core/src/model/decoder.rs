use alloc::format;
use alloc::vec::Vec;

use rand::Rng;

use crate::nn::{join, upsample_nearest2x, upsample_nearest2x_backward, BatchNorm2d, Conv2d, Module, Param, Relu};
use crate::scalar::Scalar;
use crate::tensor::Tensor;

/// 2× nearest upsampling, optional skip concatenation, then two
/// conv3×3-BN-ReLU layers.
#[derive(Debug, Clone)]
pub struct DecoderBlock<T> {
    conv1: Conv2d<T>,
    bn1: BatchNorm2d<T>,
    relu1: Relu<T>,
    conv2: Conv2d<T>,
    bn2: BatchNorm2d<T>,
    relu2: Relu<T>,
    in_channels: usize,
    skip_channels: usize,
}

impl<T: Scalar> DecoderBlock<T> {
    fn new<R: Rng + ?Sized>(in_ch: usize, skip_ch: usize, out_ch: usize, rng: &mut R) -> Self {
        Self {
            conv1: Conv2d::new(in_ch + skip_ch, out_ch, 3, 1, 1, false, rng),
            bn1: BatchNorm2d::new(out_ch),
            relu1: Relu::new(),
            conv2: Conv2d::new(out_ch, out_ch, 3, 1, 1, false, rng),
            bn2: BatchNorm2d::new(out_ch),
            relu2: Relu::new(),
            in_channels: in_ch,
            skip_channels: skip_ch,
        }
    }

    fn merge(&self, x: &Tensor<T>, skip: Option<&Tensor<T>>) -> Tensor<T> {
        let up = upsample_nearest2x(x);
        match skip {
            Some(s) => Tensor::concat_channels(&[&up, s]),
            None => up,
        }
    }

    fn forward(&mut self, x: &Tensor<T>, skip: Option<&Tensor<T>>, train: bool) -> Tensor<T> {
        let h = self.merge(x, skip);
        let h = self.conv1.forward(&h, train);
        let h = self.bn1.forward(&h, train);
        let h = self.relu1.forward(&h, train);
        let h = self.conv2.forward(&h, train);
        let h = self.bn2.forward(&h, train);
        self.relu2.forward(&h, train)
    }

    fn infer(&self, x: &Tensor<T>, skip: Option<&Tensor<T>>) -> Tensor<T> {
        let h = self.merge(x, skip);
        let h = self.relu1.infer(&self.bn1.infer(&self.conv1.infer(&h)));
        self.relu2.infer(&self.bn2.infer(&self.conv2.infer(&h)))
    }

    /// Returns the gradients w.r.t. the block input and (if present) the skip feature.
    fn backward(&mut self, g: &Tensor<T>) -> (Tensor<T>, Option<Tensor<T>>) {
        let g = self.relu2.backward(g);
        let g = self.bn2.backward(&g);
        let g = self.conv2.backward(&g);
        let g = self.relu1.backward(&g);
        let g = self.bn1.backward(&g);
        let g = self.conv1.backward(&g);
        if self.skip_channels > 0 {
            let (g_up, g_skip) = g.split_channels(self.in_channels);
            (upsample_nearest2x_backward(&g_up), Some(g_skip))
        } else {
            (upsample_nearest2x_backward(&g), None)
        }
    }
}

impl<T: Scalar> Module<T> for DecoderBlock<T> {
    fn visit(&self, prefix: &str, f: &mut dyn FnMut(&str, &Param<T>)) {
        self.conv1.visit(&join(prefix, "conv1.0"), f);
        self.bn1.visit(&join(prefix, "conv1.1"), f);
        self.conv2.visit(&join(prefix, "conv2.0"), f);
        self.bn2.visit(&join(prefix, "conv2.1"), f);
    }
    fn visit_mut(&mut self, prefix: &str, f: &mut dyn FnMut(&str, &mut Param<T>)) {
        self.conv1.visit_mut(&join(prefix, "conv1.0"), f);
        self.bn1.visit_mut(&join(prefix, "conv1.1"), f);
        self.conv2.visit_mut(&join(prefix, "conv2.0"), f);
        self.bn2.visit_mut(&join(prefix, "conv2.1"), f);
    }
}

/// One decoder block per encoder stage. Block `i` consumes the previous
/// decoder output (the bottleneck for `i = 0`) and the encoder feature of the
/// matching resolution; the last block restores full input resolution and
/// has no skip.
#[derive(Debug, Clone)]
pub struct Decoder<T> {
    blocks: Vec<DecoderBlock<T>>,
}

impl<T: Scalar> Decoder<T> {
    pub fn new<R: Rng + ?Sized>(encoder_channels: &[usize], decoder_channels: &[usize], rng: &mut R) -> Self {
        let stages = encoder_channels.len();
        let mut in_ch = encoder_channels[stages - 1];
        let mut blocks = Vec::with_capacity(stages);
        for (i, &out_ch) in decoder_channels.iter().enumerate() {
            let skip = if i + 1 < stages { encoder_channels[stages - 2 - i] } else { 0 };
            blocks.push(DecoderBlock::new(in_ch, skip, out_ch, rng));
            in_ch = out_ch;
        }
        Self { blocks }
    }

    pub fn forward(&mut self, feats: &[Tensor<T>], train: bool) -> Tensor<T> {
        let stages = feats.len();
        let mut h = feats[stages - 1].clone();
        for (i, block) in self.blocks.iter_mut().enumerate() {
            let skip = (i + 1 < stages).then(|| &feats[stages - 2 - i]);
            h = block.forward(&h, skip, train);
        }
        h
    }

    pub fn infer(&self, feats: &[Tensor<T>]) -> Tensor<T> {
        let stages = feats.len();
        let mut h = feats[stages - 1].clone();
        for (i, block) in self.blocks.iter().enumerate() {
            let skip = (i + 1 < stages).then(|| &feats[stages - 2 - i]);
            h = block.infer(&h, skip);
        }
        h
    }

    /// Returns gradients for every encoder feature (index-aligned with `feats`).
    pub fn backward(&mut self, g: &Tensor<T>, feature_shapes: &[[usize; 4]]) -> Vec<Tensor<T>> {
        let stages = feature_shapes.len();
        let mut grads: Vec<Tensor<T>> = feature_shapes.iter().map(|&s| Tensor::zeros(s)).collect();
        let mut g = g.clone();
        for (i, block) in self.blocks.iter_mut().enumerate().rev() {
            let (g_in, g_skip) = block.backward(&g);
            if let Some(gs) = g_skip {
                grads[stages - 2 - i].add_assign(&gs);
            }
            g = g_in;
        }
        grads[stages - 1].add_assign(&g);
        grads
    }
}

impl<T: Scalar> Module<T> for Decoder<T> {
    fn visit(&self, prefix: &str, f: &mut dyn FnMut(&str, &Param<T>)) {
        for (i, b) in self.blocks.iter().enumerate() {
            b.visit(&join(prefix, &format!("blocks.{i}")), f);
        }
    }
    fn visit_mut(&mut self, prefix: &str, f: &mut dyn FnMut(&str, &mut Param<T>)) {
        for (i, b) in self.blocks.iter_mut().enumerate() {
            b.visit_mut(&join(prefix, &format!("blocks.{i}")), f);
        }
    }
}
