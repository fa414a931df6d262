use alloc::format;
use alloc::vec::Vec;

use rand::Rng;

use crate::nn::{join, AvgPool2x2, BatchNorm2d, Conv2d, MaxPool3x3s2, Module, Param, Relu};
use crate::scalar::Scalar;
use crate::tensor::Tensor;

/// Pre-activation bottleneck layer: BN-ReLU-1×1 conv, BN-ReLU-3×3 conv.
/// Produces `growth` new channels that the block concatenates onto its input.
#[derive(Debug, Clone)]
struct DenseLayer<T> {
    norm1: BatchNorm2d<T>,
    relu1: Relu<T>,
    conv1: Conv2d<T>,
    norm2: BatchNorm2d<T>,
    relu2: Relu<T>,
    conv2: Conv2d<T>,
}

impl<T: Scalar> DenseLayer<T> {
    fn new<R: Rng + ?Sized>(in_ch: usize, growth: usize, bn_size: usize, rng: &mut R) -> Self {
        let mid = bn_size * growth;
        Self {
            norm1: BatchNorm2d::new(in_ch),
            relu1: Relu::new(),
            conv1: Conv2d::new(in_ch, mid, 1, 1, 0, false, rng),
            norm2: BatchNorm2d::new(mid),
            relu2: Relu::new(),
            conv2: Conv2d::new(mid, growth, 3, 1, 1, false, rng),
        }
    }

    fn forward(&mut self, x: &Tensor<T>, train: bool) -> Tensor<T> {
        let h = self.norm1.forward(x, train);
        let h = self.relu1.forward(&h, train);
        let h = self.conv1.forward(&h, train);
        let h = self.norm2.forward(&h, train);
        let h = self.relu2.forward(&h, train);
        self.conv2.forward(&h, train)
    }

    fn infer(&self, x: &Tensor<T>) -> Tensor<T> {
        let h = self.conv1.infer(&self.relu1.infer(&self.norm1.infer(x)));
        self.conv2.infer(&self.relu2.infer(&self.norm2.infer(&h)))
    }

    fn backward(&mut self, g: &Tensor<T>) -> Tensor<T> {
        let g = self.conv2.backward(g);
        let g = self.relu2.backward(&g);
        let g = self.norm2.backward(&g);
        let g = self.conv1.backward(&g);
        let g = self.relu1.backward(&g);
        self.norm1.backward(&g)
    }
}

impl<T: Scalar> Module<T> for DenseLayer<T> {
    fn visit(&self, prefix: &str, f: &mut dyn FnMut(&str, &Param<T>)) {
        self.norm1.visit(&join(prefix, "norm1"), f);
        self.conv1.visit(&join(prefix, "conv1"), f);
        self.norm2.visit(&join(prefix, "norm2"), f);
        self.conv2.visit(&join(prefix, "conv2"), f);
    }
    fn visit_mut(&mut self, prefix: &str, f: &mut dyn FnMut(&str, &mut Param<T>)) {
        self.norm1.visit_mut(&join(prefix, "norm1"), f);
        self.conv1.visit_mut(&join(prefix, "conv1"), f);
        self.norm2.visit_mut(&join(prefix, "norm2"), f);
        self.conv2.visit_mut(&join(prefix, "conv2"), f);
    }
}

#[derive(Debug, Clone)]
struct DenseBlock<T> {
    layers: Vec<DenseLayer<T>>,
}

impl<T: Scalar> DenseBlock<T> {
    fn forward(&mut self, x: &Tensor<T>, train: bool) -> Tensor<T> {
        let mut h = x.clone();
        for layer in &mut self.layers {
            let new = layer.forward(&h, train);
            h = Tensor::concat_channels(&[&h, &new]);
        }
        h
    }

    fn infer(&self, x: &Tensor<T>) -> Tensor<T> {
        let mut h = x.clone();
        for layer in &self.layers {
            let new = layer.infer(&h);
            h = Tensor::concat_channels(&[&h, &new]);
        }
        h
    }

    fn backward(&mut self, g: &Tensor<T>) -> Tensor<T> {
        let mut g = g.clone();
        for layer in self.layers.iter_mut().rev() {
            let growth = layer.conv2.out_channels();
            let (mut g_prev, g_new) = g.split_channels(g.channels() - growth);
            g_prev.add_assign(&layer.backward(&g_new));
            g = g_prev;
        }
        g
    }
}

/// Transition between dense blocks. Its BN-ReLU half closes one encoder stage
/// (the stage output is taken after it); the 1×1 compression conv and 2×2
/// average pool open the next stage and only exist if that stage is built.
#[derive(Debug, Clone)]
struct Transition<T> {
    norm: BatchNorm2d<T>,
    relu: Relu<T>,
    conv: Option<Conv2d<T>>,
}

/// DenseNet feature extractor truncated to `stages` outputs, using torchvision
/// tensor names (`features.conv0`, `features.denseblock1.denselayer1.norm1`, ...).
#[derive(Debug, Clone)]
pub struct DenseNetEncoder<T> {
    conv0: Conv2d<T>,
    norm0: BatchNorm2d<T>,
    relu0: Relu<T>,
    pool0: MaxPool3x3s2,
    blocks: Vec<DenseBlock<T>>,
    transitions: Vec<Transition<T>>,
    norm5: Option<BatchNorm2d<T>>,
}

impl<T: Scalar> DenseNetEncoder<T> {
    pub fn new<R: Rng + ?Sized>(
        init_features: usize,
        growth: usize,
        bn_size: usize,
        block_layers: [usize; 4],
        stages: usize,
        rng: &mut R,
    ) -> Self {
        let conv0 = Conv2d::new(3, init_features, 7, 2, 3, false, rng);
        let mut blocks = Vec::new();
        let mut transitions = Vec::new();
        let mut norm5 = None;
        let mut c = init_features;
        // Dense block `i` (0-based) lives in stage i + 2.
        for (i, &count) in block_layers.iter().enumerate().take(stages - 1) {
            let layers = (0..count).map(|l| DenseLayer::new(c + l * growth, growth, bn_size, rng)).collect();
            blocks.push(DenseBlock { layers });
            c += count * growth;
            if i < 3 {
                let conv = (stages >= i + 3).then(|| Conv2d::new(c, c / 2, 1, 1, 0, false, rng));
                transitions.push(Transition { norm: BatchNorm2d::new(c), relu: Relu::new(), conv });
                c /= 2;
            } else {
                norm5 = Some(BatchNorm2d::new(c));
            }
        }
        Self {
            conv0,
            norm0: BatchNorm2d::new(init_features),
            relu0: Relu::new(),
            pool0: MaxPool3x3s2::new(),
            blocks,
            transitions,
            norm5,
        }
    }

    pub fn forward(&mut self, x: &Tensor<T>, train: bool) -> Vec<Tensor<T>> {
        let mut feats = Vec::with_capacity(self.blocks.len() + 1);
        let h = self.conv0.forward(x, train);
        let h = self.norm0.forward(&h, train);
        feats.push(self.relu0.forward(&h, train));
        let mut h = self.pool0.forward(&feats[0], train);
        for i in 0..self.blocks.len() {
            if i > 0 {
                let conv = self.transitions[i - 1].conv.as_mut().expect("transition conv");
                let t = conv.forward(&feats[i], train);
                h = AvgPool2x2.infer(&t);
            }
            let b = self.blocks[i].forward(&h, train);
            let out = match self.transitions.get_mut(i) {
                Some(tr) => {
                    let n = tr.norm.forward(&b, train);
                    tr.relu.forward(&n, train)
                }
                None => self.norm5.as_mut().expect("final norm").forward(&b, train),
            };
            feats.push(out);
        }
        feats
    }

    pub fn infer(&self, x: &Tensor<T>) -> Vec<Tensor<T>> {
        let mut feats = Vec::with_capacity(self.blocks.len() + 1);
        feats.push(self.relu0.infer(&self.norm0.infer(&self.conv0.infer(x))));
        let mut h = self.pool0.infer(&feats[0]);
        for i in 0..self.blocks.len() {
            if i > 0 {
                let conv = self.transitions[i - 1].conv.as_ref().expect("transition conv");
                h = AvgPool2x2.infer(&conv.infer(&feats[i]));
            }
            let b = self.blocks[i].infer(&h);
            let out = match self.transitions.get(i) {
                Some(tr) => tr.relu.infer(&tr.norm.infer(&b)),
                None => self.norm5.as_ref().expect("final norm").infer(&b),
            };
            feats.push(out);
        }
        feats
    }

    pub fn backward(&mut self, mut grads: Vec<Tensor<T>>) {
        for i in (0..self.blocks.len()).rev() {
            let g = grads.pop().expect("one gradient per stage");
            let g = match self.transitions.get_mut(i) {
                Some(tr) => {
                    let g = tr.relu.backward(&g);
                    tr.norm.backward(&g)
                }
                None => self.norm5.as_mut().expect("final norm").backward(&g),
            };
            let g = self.blocks[i].backward(&g);
            let g = if i > 0 {
                let conv = self.transitions[i - 1].conv.as_mut().expect("transition conv");
                conv.backward(&AvgPool2x2.backward(&g))
            } else {
                self.pool0.backward(&g)
            };
            grads.last_mut().expect("previous stage gradient").add_assign(&g);
        }
        let g = grads.pop().expect("stem gradient");
        let g = self.relu0.backward(&g);
        let g = self.norm0.backward(&g);
        self.conv0.backward(&g);
    }
}

impl<T: Scalar> Module<T> for DenseNetEncoder<T> {
    fn visit(&self, prefix: &str, f: &mut dyn FnMut(&str, &Param<T>)) {
        let p = join(prefix, "features");
        self.conv0.visit(&join(&p, "conv0"), f);
        self.norm0.visit(&join(&p, "norm0"), f);
        for (i, block) in self.blocks.iter().enumerate() {
            for (l, layer) in block.layers.iter().enumerate() {
                layer.visit(&join(&p, &format!("denseblock{}.denselayer{}", i + 1, l + 1)), f);
            }
            if let Some(tr) = self.transitions.get(i) {
                let tp = join(&p, &format!("transition{}", i + 1));
                tr.norm.visit(&join(&tp, "norm"), f);
                if let Some(conv) = &tr.conv {
                    conv.visit(&join(&tp, "conv"), f);
                }
            }
        }
        if let Some(n) = &self.norm5 {
            n.visit(&join(&p, "norm5"), f);
        }
    }
    fn visit_mut(&mut self, prefix: &str, f: &mut dyn FnMut(&str, &mut Param<T>)) {
        let p = join(prefix, "features");
        self.conv0.visit_mut(&join(&p, "conv0"), f);
        self.norm0.visit_mut(&join(&p, "norm0"), f);
        for (i, block) in self.blocks.iter_mut().enumerate() {
            for (l, layer) in block.layers.iter_mut().enumerate() {
                layer.visit_mut(&join(&p, &format!("denseblock{}.denselayer{}", i + 1, l + 1)), f);
            }
            if let Some(tr) = self.transitions.get_mut(i) {
                let tp = join(&p, &format!("transition{}", i + 1));
                tr.norm.visit_mut(&join(&tp, "norm"), f);
                if let Some(conv) = &mut tr.conv {
                    conv.visit_mut(&join(&tp, "conv"), f);
                }
            }
        }
        if let Some(n) = &mut self.norm5 {
            n.visit_mut(&join(&p, "norm5"), f);
        }
    }
}
