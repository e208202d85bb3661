use rand::Rng;
use serde::{Deserialize, Serialize};

use super::{ParamId, ParamStore, Parameter, Tape, Tensor, Var};

/// Uniform samples in `±sqrt(6 / (fan_in + fan_out))`.
pub fn scaled_uniform<R: Rng + ?Sized>(
    rng: &mut R,
    shape: &[usize],
    fan_in: usize,
    fan_out: usize,
) -> Tensor {
    let limit = (6.0 / (fan_in + fan_out) as f64).sqrt() as f32;
    let numel = shape.iter().product();
    let data = (0..numel).map(|_| rng.random_range(-limit..=limit)).collect();
    Tensor::new(shape.to_vec(), data)
}

/// Fully connected layer `y = x W + b` with `W: [in, out]`.
#[derive(Clone, Debug, PartialEq)]
pub struct Linear {
    pub weight: ParamId,
    pub bias: ParamId,
    pub in_dim: usize,
    pub out_dim: usize,
}

impl Linear {
    pub fn new<R: Rng + ?Sized>(
        store: &mut ParamStore,
        name: &str,
        in_dim: usize,
        out_dim: usize,
        rng: &mut R,
    ) -> Self {
        let w = scaled_uniform(rng, &[in_dim, out_dim], in_dim, out_dim);
        let weight = store.add(Parameter::new(format!("{name}.weight"), w));
        let bias = store.add(Parameter::new(
            format!("{name}.bias"),
            Tensor::zeros(vec![out_dim]),
        ));
        Linear {
            weight,
            bias,
            in_dim,
            out_dim,
        }
    }

    pub fn forward(&self, tape: &mut Tape, store: &ParamStore, x: Var) -> Var {
        let shape = tape.shape(x);
        assert!(
            shape.len() == 2 && shape[1] == self.in_dim,
            "linear layer expects input width {}, got shape {:?}",
            self.in_dim,
            shape
        );
        let w = tape.param(store, self.weight);
        let b = tape.param(store, self.bias);
        let xw = tape.matmul(x, w);
        tape.add(xw, b)
    }
}

/// Stack of [`Linear`] layers with ReLU between them and none on the output.
#[derive(Clone, Debug, PartialEq)]
pub struct Mlp {
    pub layers: Vec<Linear>,
}

impl Mlp {
    /// `widths` lists every layer boundary, input first: `[in, h1, ..., out]`.
    pub fn new<R: Rng + ?Sized>(
        store: &mut ParamStore,
        name: &str,
        widths: &[usize],
        rng: &mut R,
    ) -> Self {
        assert!(widths.len() >= 2, "an MLP needs at least input and output widths");
        let layers = widths
            .windows(2)
            .enumerate()
            .map(|(i, w)| Linear::new(store, &format!("{name}.{i}"), w[0], w[1], rng))
            .collect();
        Mlp { layers }
    }

    pub fn in_dim(&self) -> usize {
        self.layers[0].in_dim
    }

    pub fn out_dim(&self) -> usize {
        self.layers.last().map(|l| l.out_dim).unwrap_or(0)
    }

    pub fn forward(&self, tape: &mut Tape, store: &ParamStore, x: Var) -> Var {
        let last = self.layers.len() - 1;
        let mut h = x;
        for (i, layer) in self.layers.iter().enumerate() {
            h = layer.forward(tape, store, h);
            if i < last {
                h = tape.relu(h);
            }
        }
        h
    }
}

/// One convolution stage: `out_channels` kernels of `kernel x kernel`.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct ConvStage {
    pub out_channels: usize,
    pub kernel: usize,
    pub stride: usize,
    pub padding: usize,
}

#[derive(Clone, Debug, PartialEq)]
pub struct Conv2d {
    pub weight: ParamId,
    pub bias: ParamId,
    pub in_channels: usize,
    pub stage: ConvStage,
}

impl Conv2d {
    pub fn new<R: Rng + ?Sized>(
        store: &mut ParamStore,
        name: &str,
        in_channels: usize,
        stage: ConvStage,
        rng: &mut R,
    ) -> Self {
        let k2 = stage.kernel * stage.kernel;
        let w = scaled_uniform(
            rng,
            &[stage.out_channels, in_channels, stage.kernel, stage.kernel],
            in_channels * k2,
            stage.out_channels * k2,
        );
        let weight = store.add(Parameter::new(format!("{name}.weight"), w));
        let bias = store.add(Parameter::new(
            format!("{name}.bias"),
            Tensor::zeros(vec![stage.out_channels]),
        ));
        Conv2d {
            weight,
            bias,
            in_channels,
            stage,
        }
    }

    pub fn output_hw(&self, h: usize, w: usize) -> (usize, usize) {
        let s = &self.stage;
        (
            (h + 2 * s.padding - s.kernel) / s.stride + 1,
            (w + 2 * s.padding - s.kernel) / s.stride + 1,
        )
    }

    pub fn forward(&self, tape: &mut Tape, store: &ParamStore, x: Var) -> Var {
        let w = tape.param(store, self.weight);
        let b = tape.param(store, self.bias);
        tape.conv2d(x, w, b, self.stage.stride, self.stage.padding)
    }
}

/// How the last feature map is reduced to a vector before the linear head.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum CnnHead {
    /// Every activation feeds the head.
    Flatten,
    /// Per channel: total mass and its first moments along x and y, with
    /// cell centres mapped to `[-1, 1]` (y pointing up).
    #[default]
    SpatialMoments,
}

impl CnnHead {
    fn width(self, c: usize, h: usize, w: usize) -> usize {
        match self {
            CnnHead::Flatten => c * h * w,
            CnnHead::SpatialMoments => c * 3,
        }
    }
}

fn moment_basis(h: usize, w: usize) -> Tensor {
    let mut m = Vec::with_capacity(h * w * 3);
    for i in 0..h {
        for j in 0..w {
            m.push(1.0);
            m.push((j as f32 + 0.5) / w as f32 * 2.0 - 1.0);
            m.push(1.0 - (i as f32 + 0.5) / h as f32 * 2.0);
        }
    }
    Tensor::new(vec![h * w, 3], m)
}

/// Convolution stages with ReLU, a [`CnnHead`] reduction and one linear
/// projection.
#[derive(Clone, Debug, PartialEq)]
pub struct Cnn {
    pub convs: Vec<Conv2d>,
    pub head_kind: CnnHead,
    pub head: Linear,
    pub input_shape: [usize; 3],
}

impl Cnn {
    pub fn new<R: Rng + ?Sized>(
        store: &mut ParamStore,
        name: &str,
        input_shape: [usize; 3],
        stages: &[ConvStage],
        head_kind: CnnHead,
        out_dim: usize,
        rng: &mut R,
    ) -> Self {
        let [mut c, mut h, mut w] = input_shape;
        let mut convs = Vec::with_capacity(stages.len());
        for (i, stage) in stages.iter().enumerate() {
            let conv = Conv2d::new(store, &format!("{name}.conv{i}"), c, *stage, rng);
            (h, w) = conv.output_hw(h, w);
            c = stage.out_channels;
            convs.push(conv);
        }
        let head = Linear::new(store, &format!("{name}.head"), head_kind.width(c, h, w), out_dim, rng);
        Cnn {
            convs,
            head_kind,
            head,
            input_shape,
        }
    }

    pub fn out_dim(&self) -> usize {
        self.head.out_dim
    }

    /// `x: [N, C, H, W]` -> `[N, out_dim]`.
    pub fn forward(&self, tape: &mut Tape, store: &ParamStore, x: Var) -> Var {
        let shape = tape.shape(x);
        assert!(
            shape.len() == 4 && shape[1..] == self.input_shape,
            "CNN expects images of shape {:?} (channels, height, width), got {:?}",
            self.input_shape,
            &shape[1.min(shape.len())..]
        );
        let mut h = x;
        for conv in &self.convs {
            h = conv.forward(tape, store, h);
            h = tape.relu(h);
        }
        let flat = match self.head_kind {
            CnnHead::Flatten => tape.flatten(h),
            CnnHead::SpatialMoments => {
                let s = tape.shape(h).to_vec();
                let (n, c, hh, ww) = (s[0], s[1], s[2], s[3]);
                let planes = tape.reshape(h, &[n * c, hh * ww]);
                let basis = tape.constant(&moment_basis(hh, ww));
                let moments = tape.matmul(planes, basis);
                tape.reshape(moments, &[n, c * 3])
            }
        };
        self.head.forward(tape, store, flat)
    }
}
