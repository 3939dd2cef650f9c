//! Dual-stream spectrum completion network (inference only).
//!
//! Each FSS channel is processed independently:
//!
//! 1. the power stream sees `log(1 + |F|^2)`, the phase stream sees `arg F`;
//! 2. their outputs `m` and `theta` are combined as `m cos(theta) + i m sin(theta)`;
//! 3. the real and imaginary planes are refined by a third network whose two
//!    output planes are the completed spectrum.
//!
//! All three sub-networks are the same U-Net shape: one double 3x3 conv
//! block per level, 2x2 max-pool down, nearest-neighbour up, skip
//! concatenation, leaky ReLU after every 3x3 conv and a 1x1 head. Inputs are
//! zero-padded at the bottom/right to a multiple of `2^levels`.

use ndarray::{s, Array2, Array3};
use num_complex::Complex64;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand::Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::spectrum::Fss;

pub const POWER_COMPRESSION_LOG1P: &str = "log1p_power";
pub const STREAM_OUTPUT_LINEAR: &str = "linear_magnitude_radian_phase";

/// Architecture constants shared with the training side. Stored in the
/// weights file so both sides agree.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct WeightsMetadata {
    pub architecture: String,
    /// Channel width of each resolution level; its length is the number of poolings.
    pub channels: Vec<usize>,
    pub kernel: usize,
    pub leaky_relu_slope: f32,
    pub upsample: String,
    pub downsample: String,
    pub power_compression: String,
    pub stream_output: String,
    pub dc_patch: usize,
    /// Mean conjugate-symmetry residual of the trained model on its validation set.
    pub validation_symmetry_residual: f64,
}

impl Default for WeightsMetadata {
    fn default() -> Self {
        Self::with_channels(vec![32, 64, 128, 256])
    }
}

impl WeightsMetadata {
    pub fn with_channels(channels: Vec<usize>) -> Self {
        Self {
            architecture: "dual_stream_unet".into(),
            channels,
            kernel: 3,
            leaky_relu_slope: 0.2,
            upsample: "nearest".into(),
            downsample: "maxpool2".into(),
            power_compression: POWER_COMPRESSION_LOG1P.into(),
            stream_output: STREAM_OUTPUT_LINEAR.into(),
            dc_patch: 5,
            validation_symmetry_residual: 0.0,
        }
    }

    /// Padding granularity: `2^levels`.
    pub fn pad_multiple(&self) -> usize {
        1 << self.channels.len()
    }

    pub fn validate(&self) -> Result<()> {
        if self.architecture != "dual_stream_unet" {
            return Err(Error::Format(format!("unknown architecture {}", self.architecture)));
        }
        if self.channels.is_empty() || self.channels.contains(&0) {
            return Err(Error::Format("channel widths must be non-empty and positive".into()));
        }
        if self.kernel != 3 || self.upsample != "nearest" || self.downsample != "maxpool2" {
            return Err(Error::Format("unsupported layer configuration".into()));
        }
        if self.power_compression != POWER_COMPRESSION_LOG1P {
            return Err(Error::Format(format!(
                "unsupported power compression {}",
                self.power_compression
            )));
        }
        if self.stream_output != STREAM_OUTPUT_LINEAR {
            return Err(Error::Format(format!(
                "unsupported stream output convention {}",
                self.stream_output
            )));
        }
        if self.dc_patch % 2 == 0 {
            return Err(Error::Format("dc_patch must be odd".into()));
        }
        Ok(())
    }

    /// `(out, in, k)` of every conv layer of one U-Net, in storage order.
    pub fn unet_shapes(&self, c_in: usize, c_out: usize) -> Vec<(usize, usize, usize)> {
        let ch = &self.channels;
        let k = self.kernel;
        let mut shapes = Vec::new();
        let mut prev = c_in;
        for &c in ch {
            shapes.push((c, prev, k));
            shapes.push((c, c, k));
            prev = c;
        }
        let bottom = *ch.last().expect("non-empty");
        shapes.push((bottom, prev, k));
        shapes.push((bottom, bottom, k));
        prev = bottom;
        for &c in ch.iter().rev() {
            shapes.push((c, prev + c, k));
            shapes.push((c, c, k));
            prev = c;
        }
        shapes.push((c_out, prev, 1));
        shapes
    }

    /// Shapes of all three sub-networks: power, phase, refinement.
    pub fn all_shapes(&self) -> Vec<(usize, usize, usize)> {
        let mut v = self.unet_shapes(1, 1);
        v.extend(self.unet_shapes(1, 1));
        v.extend(self.unet_shapes(2, 2));
        v
    }
}

/// One convolution: weights `[out, in, k, k]` and bias `[out]`.
#[derive(Debug, Clone, PartialEq)]
pub struct ConvLayer {
    pub out_channels: usize,
    pub in_channels: usize,
    pub kernel: usize,
    pub weights: Vec<f32>,
    pub bias: Vec<f32>,
}

impl ConvLayer {
    pub fn zeros(out_channels: usize, in_channels: usize, kernel: usize) -> Self {
        Self {
            out_channels,
            in_channels,
            kernel,
            weights: vec![0.0; out_channels * in_channels * kernel * kernel],
            bias: vec![0.0; out_channels],
        }
    }

    fn check(&self) -> Result<()> {
        let n = self.out_channels * self.in_channels * self.kernel * self.kernel;
        if self.weights.len() != n || self.bias.len() != self.out_channels {
            return Err(Error::Format("conv layer blob size does not match its shape".into()));
        }
        if self.weights.iter().chain(&self.bias).any(|v| !v.is_finite()) {
            return Err(Error::Format("conv layer has non-finite coefficients".into()));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ModelWeights {
    pub version: u32,
    pub metadata: WeightsMetadata,
    /// Power net, phase net, refinement net, concatenated.
    pub layers: Vec<ConvLayer>,
}

impl ModelWeights {
    pub const VERSION: u32 = 1;

    pub fn new(metadata: WeightsMetadata, layers: Vec<ConvLayer>) -> Result<Self> {
        let w = Self {
            version: Self::VERSION,
            metadata,
            layers,
        };
        w.validate()?;
        Ok(w)
    }

    pub fn zeros(metadata: WeightsMetadata) -> Self {
        let layers = metadata
            .all_shapes()
            .into_iter()
            .map(|(o, i, k)| ConvLayer::zeros(o, i, k))
            .collect();
        Self {
            version: Self::VERSION,
            metadata,
            layers,
        }
    }

    /// Seeded He-style initialisation, for tests and demos.
    pub fn random(metadata: WeightsMetadata, seed: u64) -> Self {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let layers = metadata
            .all_shapes()
            .into_iter()
            .map(|(o, i, k)| {
                let fan_in = (i * k * k) as f32;
                let scale = (2.0 / fan_in).sqrt();
                ConvLayer {
                    out_channels: o,
                    in_channels: i,
                    kernel: k,
                    weights: (0..o * i * k * k)
                        .map(|_| scale * (rng.gen::<f32>() * 2.0 - 1.0))
                        .collect(),
                    bias: (0..o).map(|_| 0.01 * (rng.gen::<f32>() * 2.0 - 1.0)).collect(),
                }
            })
            .collect();
        Self {
            version: Self::VERSION,
            metadata,
            layers,
        }
    }

    pub fn validate(&self) -> Result<()> {
        self.metadata.validate()?;
        let shapes = self.metadata.all_shapes();
        if shapes.len() != self.layers.len() {
            return Err(Error::Format(format!(
                "expected {} layers, found {}",
                shapes.len(),
                self.layers.len()
            )));
        }
        for (idx, ((o, i, k), layer)) in shapes.into_iter().zip(&self.layers).enumerate() {
            if (layer.out_channels, layer.in_channels, layer.kernel) != (o, i, k) {
                return Err(Error::Format(format!(
                    "layer {idx}: shape {}x{}x{k}x{k} expected {o}x{i}x{k}x{k}",
                    layer.out_channels, layer.in_channels
                )));
            }
            layer.check()?;
        }
        Ok(())
    }

    fn nets(&self) -> (&[ConvLayer], &[ConvLayer], &[ConvLayer]) {
        let per = 4 * self.metadata.channels.len() + 3;
        let (a, rest) = self.layers.split_at(per);
        let (b, c) = rest.split_at(per);
        (a, b, c)
    }
}

/// Feature maps `[channel, y, x]`.
type Features = Array3<f32>;

fn conv2d(input: &Features, layer: &ConvLayer, slope: Option<f32>) -> Features {
    let (c_in, h, w) = input.dim();
    debug_assert_eq!(c_in, layer.in_channels);
    let k = layer.kernel;
    let r = (k / 2) as isize;
    let mut out = Array3::<f32>::zeros((layer.out_channels, h, w));
    let input = input.as_standard_layout();
    let src = input.as_slice().expect("standard layout");
    out.outer_iter_mut()
        .into_par_iter()
        .enumerate()
        .for_each(|(o, mut plane)| {
            let dst = plane.as_slice_mut().expect("contiguous plane");
            dst.fill(layer.bias[o]);
            for i in 0..c_in {
                let sp = &src[i * h * w..(i + 1) * h * w];
                for ky in 0..k {
                    let dy = ky as isize - r;
                    for kx in 0..k {
                        let dx = kx as isize - r;
                        let wv = layer.weights[((o * c_in + i) * k + ky) * k + kx];
                        if wv == 0.0 {
                            continue;
                        }
                        let x_lo = (-dx).max(0) as usize;
                        let x_hi = (w as isize - dx.max(0)) as usize;
                        if x_lo >= x_hi {
                            continue;
                        }
                        for y in 0..h {
                            let sy = y as isize + dy;
                            if sy < 0 || sy >= h as isize {
                                continue;
                            }
                            let srow = &sp[sy as usize * w..(sy as usize + 1) * w];
                            let drow = &mut dst[y * w..(y + 1) * w];
                            let shift = (x_lo as isize + dx) as usize;
                            for (d, s) in drow[x_lo..x_hi]
                                .iter_mut()
                                .zip(&srow[shift..shift + (x_hi - x_lo)])
                            {
                                *d += wv * s;
                            }
                        }
                    }
                }
            }
            if let Some(a) = slope {
                dst.iter_mut().for_each(|v| {
                    if *v < 0.0 {
                        *v *= a
                    }
                });
            }
        });
    out
}

fn max_pool2(input: &Features) -> Features {
    let (c, h, w) = input.dim();
    Array3::from_shape_fn((c, h / 2, w / 2), |(ch, y, x)| {
        let a = input[[ch, 2 * y, 2 * x]];
        let b = input[[ch, 2 * y, 2 * x + 1]];
        let cc = input[[ch, 2 * y + 1, 2 * x]];
        let d = input[[ch, 2 * y + 1, 2 * x + 1]];
        a.max(b).max(cc).max(d)
    })
}

fn upsample_concat(low: &Features, skip: &Features) -> Features {
    let (cl, _, _) = low.dim();
    let (cs, h, w) = skip.dim();
    Array3::from_shape_fn((cl + cs, h, w), |(ch, y, x)| {
        if ch < cl {
            low[[ch, y / 2, x / 2]]
        } else {
            skip[[ch - cl, y, x]]
        }
    })
}

fn unet_forward(layers: &[ConvLayer], input: Features, slope: f32) -> Features {
    let levels = (layers.len() - 3) / 4;
    let mut it = layers.iter();
    let mut next = || it.next().expect("layer count checked");
    let mut skips = Vec::with_capacity(levels);
    let mut x = input;
    for _ in 0..levels {
        x = conv2d(&x, next(), Some(slope));
        x = conv2d(&x, next(), Some(slope));
        let pooled = max_pool2(&x);
        skips.push(x);
        x = pooled;
    }
    x = conv2d(&x, next(), Some(slope));
    x = conv2d(&x, next(), Some(slope));
    for skip in skips.iter().rev() {
        x = upsample_concat(&x, skip);
        x = conv2d(&x, next(), Some(slope));
        x = conv2d(&x, next(), Some(slope));
    }
    conv2d(&x, next(), None)
}

fn padded_dims(n: usize, w: usize, multiple: usize) -> (usize, usize) {
    (n.div_ceil(multiple) * multiple, w.div_ceil(multiple) * multiple)
}

/// Run the network on one complex plane.
pub fn complete_plane(plane: &Array2<Complex64>, weights: &ModelWeights) -> Result<Array2<Complex64>> {
    let (n, w) = plane.dim();
    let (ph, pw) = padded_dims(n, w, weights.metadata.pad_multiple());
    let mut power = Array3::<f32>::zeros((1, ph, pw));
    let mut phase = Array3::<f32>::zeros((1, ph, pw));
    for ((i, j), z) in plane.indexed_iter() {
        power[[0, i, j]] = z.norm_sqr().ln_1p() as f32;
        phase[[0, i, j]] = z.arg() as f32;
    }
    let slope = weights.metadata.leaky_relu_slope;
    let (power_net, phase_net, refine_net) = weights.nets();
    let m = unet_forward(power_net, power, slope);
    let theta = unet_forward(phase_net, phase, slope);
    let mut combined = Array3::<f32>::zeros((2, ph, pw));
    for i in 0..ph {
        for j in 0..pw {
            let (s, c) = theta[[0, i, j]].sin_cos();
            let mag = m[[0, i, j]];
            combined[[0, i, j]] = mag * c;
            combined[[1, i, j]] = mag * s;
        }
    }
    let refined = unet_forward(refine_net, combined, slope);
    let out = Array2::from_shape_fn((n, w), |(i, j)| {
        Complex64::new(refined[[0, i, j]] as f64, refined[[1, i, j]] as f64)
    });
    if out.iter().any(|z| !z.re.is_finite() || !z.im.is_finite()) {
        return Err(Error::Numerical("network produced non-finite activations".into()));
    }
    Ok(out)
}

/// Completed spectrum, before DC replacement. Output dims equal input dims.
pub fn neural_complete(fss: &Fss, weights: &ModelWeights) -> Result<Fss> {
    weights.validate()?;
    let (n, w, c) = fss.data().dim();
    let mut data = Array3::zeros((n, w, c));
    for ch in 0..c {
        let plane = fss.data().slice(s![.., .., ch]).to_owned();
        data.slice_mut(s![.., .., ch]).assign(&complete_plane(&plane, weights)?);
    }
    Fss::new(data, fss.provenance())
}
