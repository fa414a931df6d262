use alloc::format;
use alloc::vec::Vec;

use rand::Rng;

use crate::nn::{join, BatchNorm2d, Conv2d, MaxPool3x3s2, Module, Param, Relu};
use crate::scalar::Scalar;
use crate::tensor::Tensor;

/// Two 3×3 conv + batch-norm layers with an additive identity (or projected) skip.
#[derive(Debug, Clone)]
pub struct BasicBlock<T> {
    conv1: Conv2d<T>,
    bn1: BatchNorm2d<T>,
    relu1: Relu<T>,
    conv2: Conv2d<T>,
    bn2: BatchNorm2d<T>,
    downsample: Option<(Conv2d<T>, BatchNorm2d<T>)>,
    relu_out: Relu<T>,
}

impl<T: Scalar> BasicBlock<T> {
    fn new<R: Rng + ?Sized>(in_ch: usize, out_ch: usize, stride: usize, rng: &mut R) -> Self {
        let downsample = (stride != 1 || in_ch != out_ch)
            .then(|| (Conv2d::new(in_ch, out_ch, 1, stride, 0, false, rng), BatchNorm2d::new(out_ch)));
        Self {
            conv1: Conv2d::new(in_ch, out_ch, 3, stride, 1, false, rng),
            bn1: BatchNorm2d::new(out_ch),
            relu1: Relu::new(),
            conv2: Conv2d::new(out_ch, out_ch, 3, 1, 1, false, rng),
            bn2: BatchNorm2d::new(out_ch),
            downsample,
            relu_out: Relu::new(),
        }
    }

    fn forward(&mut self, x: &Tensor<T>, train: bool) -> Tensor<T> {
        let h = self.conv1.forward(x, train);
        let h = self.bn1.forward(&h, train);
        let h = self.relu1.forward(&h, train);
        let h = self.conv2.forward(&h, train);
        let mut h = self.bn2.forward(&h, train);
        match &mut self.downsample {
            Some((conv, bn)) => {
                let id = conv.forward(x, train);
                h.add_assign(&bn.forward(&id, train));
            }
            None => h.add_assign(x),
        }
        self.relu_out.forward(&h, train)
    }

    fn infer(&self, x: &Tensor<T>) -> Tensor<T> {
        let h = self.relu1.infer(&self.bn1.infer(&self.conv1.infer(x)));
        let mut h = self.bn2.infer(&self.conv2.infer(&h));
        match &self.downsample {
            Some((conv, bn)) => h.add_assign(&bn.infer(&conv.infer(x))),
            None => h.add_assign(x),
        }
        self.relu_out.infer(&h)
    }

    fn backward(&mut self, g: &Tensor<T>) -> Tensor<T> {
        let g = self.relu_out.backward(g);
        let main = self.bn2.backward(&g);
        let main = self.conv2.backward(&main);
        let main = self.relu1.backward(&main);
        let main = self.bn1.backward(&main);
        let mut gx = self.conv1.backward(&main);
        match &mut self.downsample {
            Some((conv, bn)) => gx.add_assign(&conv.backward(&bn.backward(&g))),
            None => gx.add_assign(&g),
        }
        gx
    }
}

impl<T: Scalar> Module<T> for BasicBlock<T> {
    fn visit(&self, prefix: &str, f: &mut dyn FnMut(&str, &Param<T>)) {
        self.conv1.visit(&join(prefix, "conv1"), f);
        self.bn1.visit(&join(prefix, "bn1"), f);
        self.conv2.visit(&join(prefix, "conv2"), f);
        self.bn2.visit(&join(prefix, "bn2"), f);
        if let Some((conv, bn)) = &self.downsample {
            conv.visit(&join(prefix, "downsample.0"), f);
            bn.visit(&join(prefix, "downsample.1"), f);
        }
    }
    fn visit_mut(&mut self, prefix: &str, f: &mut dyn FnMut(&str, &mut Param<T>)) {
        self.conv1.visit_mut(&join(prefix, "conv1"), f);
        self.bn1.visit_mut(&join(prefix, "bn1"), f);
        self.conv2.visit_mut(&join(prefix, "conv2"), f);
        self.bn2.visit_mut(&join(prefix, "bn2"), f);
        if let Some((conv, bn)) = &mut self.downsample {
            conv.visit_mut(&join(prefix, "downsample.0"), f);
            bn.visit_mut(&join(prefix, "downsample.1"), f);
        }
    }
}

/// ResNet feature extractor truncated to `stages` outputs.
///
/// Stage 1 is the 7×7/2 stem (conv, bn, relu); stage 2 is the 3×3/2 max-pool
/// followed by `layer1`; stages 3..5 are `layer2..layer4`, each striding by 2.
/// Tensor names follow the torchvision layout (`conv1`, `bn1`, `layer1.0.conv1`, ...).
#[derive(Debug, Clone)]
pub struct ResNetEncoder<T> {
    conv1: Conv2d<T>,
    bn1: BatchNorm2d<T>,
    relu: Relu<T>,
    maxpool: MaxPool3x3s2,
    layers: Vec<Vec<BasicBlock<T>>>,
}

impl<T: Scalar> ResNetEncoder<T> {
    pub fn new<R: Rng + ?Sized>(stem: usize, widths: [usize; 4], blocks: [usize; 4], stages: usize, rng: &mut R) -> Self {
        let conv1 = Conv2d::new(3, stem, 7, 2, 3, false, rng);
        let mut layers = Vec::new();
        let mut in_ch = stem;
        for (i, (&width, &count)) in widths.iter().zip(&blocks).enumerate().take(stages - 1) {
            let stride = if i == 0 { 1 } else { 2 };
            let mut layer = Vec::with_capacity(count);
            for j in 0..count {
                layer.push(BasicBlock::new(in_ch, width, if j == 0 { stride } else { 1 }, rng));
                in_ch = width;
            }
            layers.push(layer);
        }
        Self { conv1, bn1: BatchNorm2d::new(stem), relu: Relu::new(), maxpool: MaxPool3x3s2::new(), layers }
    }

    pub fn forward(&mut self, x: &Tensor<T>, train: bool) -> Vec<Tensor<T>> {
        let mut feats = Vec::with_capacity(self.layers.len() + 1);
        let h = self.conv1.forward(x, train);
        let h = self.bn1.forward(&h, train);
        feats.push(self.relu.forward(&h, train));
        for (i, layer) in self.layers.iter_mut().enumerate() {
            let mut h = if i == 0 { self.maxpool.forward(&feats[0], train) } else { feats[i].clone() };
            for block in layer.iter_mut() {
                h = block.forward(&h, train);
            }
            feats.push(h);
        }
        feats
    }

    pub fn infer(&self, x: &Tensor<T>) -> Vec<Tensor<T>> {
        let mut feats = Vec::with_capacity(self.layers.len() + 1);
        feats.push(self.relu.infer(&self.bn1.infer(&self.conv1.infer(x))));
        for (i, layer) in self.layers.iter().enumerate() {
            let mut h = if i == 0 { self.maxpool.infer(&feats[0]) } else { feats[i].clone() };
            for block in layer {
                h = block.infer(&h);
            }
            feats.push(h);
        }
        feats
    }

    /// `grads[s]` is the loss gradient w.r.t. feature `s` (zero tensors where unused).
    pub fn backward(&mut self, mut grads: Vec<Tensor<T>>) {
        for i in (0..self.layers.len()).rev() {
            let mut g = grads.pop().expect("one gradient per stage");
            for block in self.layers[i].iter_mut().rev() {
                g = block.backward(&g);
            }
            if i == 0 {
                g = self.maxpool.backward(&g);
            }
            grads.last_mut().expect("stem gradient").add_assign(&g);
        }
        let g = grads.pop().expect("stem gradient");
        let g = self.relu.backward(&g);
        let g = self.bn1.backward(&g);
        self.conv1.backward(&g);
    }
}

impl<T: Scalar> Module<T> for ResNetEncoder<T> {
    fn visit(&self, prefix: &str, f: &mut dyn FnMut(&str, &Param<T>)) {
        self.conv1.visit(&join(prefix, "conv1"), f);
        self.bn1.visit(&join(prefix, "bn1"), f);
        for (i, layer) in self.layers.iter().enumerate() {
            for (j, block) in layer.iter().enumerate() {
                block.visit(&join(prefix, &format!("layer{}.{j}", i + 1)), f);
            }
        }
    }
    fn visit_mut(&mut self, prefix: &str, f: &mut dyn FnMut(&str, &mut Param<T>)) {
        self.conv1.visit_mut(&join(prefix, "conv1"), f);
        self.bn1.visit_mut(&join(prefix, "bn1"), f);
        for (i, layer) in self.layers.iter_mut().enumerate() {
            for (j, block) in layer.iter_mut().enumerate() {
                block.visit_mut(&join(prefix, &format!("layer{}.{j}", i + 1)), f);
            }
        }
    }
}
