//! Small deterministic backbones. They stand in for pretrained image,
//! video and text encoders so the full pipeline runs without external
//! weights; their outputs track coarse brightness, contrast and motion.

use ndarray::{Array2, Array4};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use super::backbone::{Backbone, BackboneKind, BackboneSpec, FrameEncoder, MotionEncoder, TextEncoder};
use super::{resize_frame, FeatureError};
use crate::corpus::Frame;
use crate::hashing::{fnv1a64, WeightDigest};

fn luma(p: [f32; 3]) -> f64 {
    0.299 * f64::from(p[0]) + 0.587 * f64::from(p[1]) + 0.114 * f64::from(p[2])
}

fn luma_plane(frame: &Frame) -> Vec<f64> {
    let mut out = Vec::with_capacity(frame.height * frame.width);
    for y in 0..frame.height {
        for x in 0..frame.width {
            out.push(luma(frame.pixel(y, x)));
        }
    }
    out
}

fn mean_std(xs: &[f64]) -> (f64, f64) {
    let n = xs.len() as f64;
    let mean = xs.iter().sum::<f64>() / n;
    let var = xs.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / n;
    (mean, var.sqrt())
}

fn uniform_matrix(rng: &mut ChaCha8Rng, rows: usize, cols: usize, bound: f64) -> Array2<f64> {
    Array2::from_shape_simple_fn((rows, cols), || rng.random_range(-bound..=bound))
}

fn matvec(w: &Array2<f64>, x: &[f64]) -> Vec<f64> {
    w.rows().into_iter().map(|row| row.iter().zip(x).map(|(a, b)| a * b).sum()).collect()
}

/// 3x3, stride 2, zero padding 1, followed by tanh.
struct Conv {
    weight: Array4<f64>,
    bias: Vec<f64>,
}

impl Conv {
    fn new(rng: &mut ChaCha8Rng, in_ch: usize, out_ch: usize) -> Self {
        let bound = 1.0 / ((in_ch * 9) as f64).sqrt();
        let weight = Array4::from_shape_simple_fn((out_ch, in_ch, 3, 3), || rng.random_range(-bound..=bound));
        let bias = (0..out_ch).map(|_| rng.random_range(-bound..=bound)).collect();
        Self { weight, bias }
    }

    /// `input` is `C x H x W` flattened; returns `(C_out, H', W', data)`.
    fn apply(&self, input: &[f64], h: usize, w: usize) -> (usize, usize, Vec<f64>) {
        let (out_ch, in_ch) = (self.weight.shape()[0], self.weight.shape()[1]);
        let (oh, ow) = (h.div_ceil(2), w.div_ceil(2));
        let mut out = vec![0.0; out_ch * oh * ow];
        for o in 0..out_ch {
            for oy in 0..oh {
                for ox in 0..ow {
                    let mut acc = self.bias[o];
                    for c in 0..in_ch {
                        for ky in 0..3 {
                            let iy = (2 * oy + ky) as isize - 1;
                            if iy < 0 || iy >= h as isize {
                                continue;
                            }
                            for kx in 0..3 {
                                let ix = (2 * ox + kx) as isize - 1;
                                if ix < 0 || ix >= w as isize {
                                    continue;
                                }
                                acc += self.weight[[o, c, ky, kx]] * input[(c * h + iy as usize) * w + ix as usize];
                            }
                        }
                    }
                    out[(o * oh + oy) * ow + ox] = acc.tanh();
                }
            }
        }
        (oh, ow, out)
    }

    fn digest(&self, d: &mut WeightDigest) {
        d.values(self.weight.iter()).values(self.bias.iter());
    }
}

/// Random-init two-layer convolutional frame encoder.
///
/// Output is `[luma mean, luma std, P * gap(conv2(conv1(frame)))]`,
/// truncated to `output_dim`.
pub struct ToyConvFrameEncoder {
    output_dim: usize,
    side: usize,
    conv1: Conv,
    conv2: Conv,
    projection: Array2<f64>,
    digest: String,
}

impl ToyConvFrameEncoder {
    pub const NAME: &'static str = "toy-conv";
    pub const DEFAULT_INPUT: usize = 32;
    const CHANNELS: (usize, usize) = (8, 16);

    pub fn new(output_dim: usize, seed: u64, side: usize) -> Result<Self, FeatureError> {
        if output_dim == 0 || side == 0 {
            return Err(FeatureError::InvalidConfig(format!(
                "{}: output_dim and input_size must be positive",
                Self::NAME
            )));
        }
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let conv1 = Conv::new(&mut rng, 3, Self::CHANNELS.0);
        let conv2 = Conv::new(&mut rng, Self::CHANNELS.0, Self::CHANNELS.1);
        let proj_rows = output_dim.saturating_sub(2);
        let projection = uniform_matrix(&mut rng, proj_rows, Self::CHANNELS.1, 1.0 / (Self::CHANNELS.1 as f64).sqrt());
        let mut d = WeightDigest::new();
        d.bytes(&(side as u64).to_le_bytes());
        conv1.digest(&mut d);
        conv2.digest(&mut d);
        d.values(projection.iter());
        Ok(Self { output_dim, side, conv1, conv2, projection, digest: d.hex() })
    }

    pub fn from_spec(spec: &BackboneSpec) -> Result<Self, FeatureError> {
        Self::new(spec.output_dim, spec.seed, spec.input_size.unwrap_or(Self::DEFAULT_INPUT))
    }
}

impl Backbone for ToyConvFrameEncoder {
    fn name(&self) -> &str {
        Self::NAME
    }
    fn output_dim(&self) -> usize {
        self.output_dim
    }
    fn kind(&self) -> BackboneKind {
        BackboneKind::FrameEncoder
    }
    fn weights_digest(&self) -> String {
        self.digest.clone()
    }
}

impl FrameEncoder for ToyConvFrameEncoder {
    fn input_size(&self) -> (usize, usize) {
        (self.side, self.side)
    }

    fn encode_frame(&self, frame: &Frame) -> Result<Vec<f64>, FeatureError> {
        let frame = resize_frame(frame, self.side, self.side);
        let frame = frame.as_ref();
        let (h, w) = (frame.height, frame.width);
        let mut planes = vec![0.0; 3 * h * w];
        for y in 0..h {
            for x in 0..w {
                let p = frame.pixel(y, x);
                for c in 0..3 {
                    planes[(c * h + y) * w + x] = f64::from(p[c]);
                }
            }
        }
        let (h1, w1, a1) = self.conv1.apply(&planes, h, w);
        let (h2, w2, a2) = self.conv2.apply(&a1, h1, w1);
        let area = (h2 * w2) as f64;
        let pooled: Vec<f64> = a2.chunks(h2 * w2).map(|c| c.iter().sum::<f64>() / area).collect();
        let (m, s) = mean_std(&luma_plane(frame));
        let mut out = vec![m, s];
        out.extend(matvec(&self.projection, &pooled));
        out.truncate(self.output_dim);
        Ok(out)
    }
}

/// Two-pathway motion encoder built from frame statistics.
///
/// With `phi_t` the per-frame descriptor (4x4 grid of luma means, channel
/// means, luma std):
/// - slow token: `[mean_t luma(x_t), W_s * mean_t phi_t]`, invariant to frame order;
/// - fast token: `[mean_t mean|luma(x_{t+1}) - luma(x_t)|, W_f * mean_t |phi_{t+1} - phi_t|]`.
pub struct MeanDiffMotionEncoder {
    output_dim: usize,
    side: usize,
    min_frames: usize,
    slow: Array2<f64>,
    fast: Array2<f64>,
    digest: String,
}

impl MeanDiffMotionEncoder {
    pub const NAME: &'static str = "toy-mean-diff";
    pub const DEFAULT_INPUT: usize = 16;
    pub const DEFAULT_MIN_FRAMES: usize = 2;
    const GRID: usize = 4;
    const DESCRIPTOR: usize = Self::GRID * Self::GRID + 4;

    pub fn new(output_dim: usize, seed: u64, side: usize, min_frames: usize) -> Result<Self, FeatureError> {
        if output_dim == 0 || side < Self::GRID || min_frames == 0 {
            return Err(FeatureError::InvalidConfig(format!(
                "{}: need output_dim >= 1, input_size >= {}, min_frames >= 1",
                Self::NAME,
                Self::GRID
            )));
        }
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let bound = 1.0 / (Self::DESCRIPTOR as f64).sqrt();
        let slow = uniform_matrix(&mut rng, output_dim - 1, Self::DESCRIPTOR, bound);
        let fast = uniform_matrix(&mut rng, output_dim - 1, Self::DESCRIPTOR, bound);
        let mut d = WeightDigest::new();
        d.bytes(&(side as u64).to_le_bytes()).bytes(&(min_frames as u64).to_le_bytes());
        d.values(slow.iter()).values(fast.iter());
        Ok(Self { output_dim, side, min_frames, slow, fast, digest: d.hex() })
    }

    pub fn from_spec(spec: &BackboneSpec) -> Result<Self, FeatureError> {
        Self::new(
            spec.output_dim,
            spec.seed,
            spec.input_size.unwrap_or(Self::DEFAULT_INPUT),
            spec.min_frames.unwrap_or(Self::DEFAULT_MIN_FRAMES),
        )
    }

    fn descriptor(frame: &Frame, luma: &[f64]) -> Vec<f64> {
        let (h, w, g) = (frame.height, frame.width, Self::GRID);
        let mut out = vec![0.0; Self::DESCRIPTOR];
        let mut counts = vec![0usize; g * g];
        for y in 0..h {
            for x in 0..w {
                let cell = (y * g / h) * g + x * g / w;
                out[cell] += luma[y * w + x];
                counts[cell] += 1;
            }
        }
        for (v, c) in out.iter_mut().zip(&counts) {
            *v /= (*c).max(1) as f64;
        }
        let area = (h * w) as f64;
        for c in 0..3 {
            out[g * g + c] = frame.data.iter().skip(c).step_by(3).map(|&v| f64::from(v)).sum::<f64>() / area;
        }
        out[g * g + 3] = mean_std(luma).1;
        out
    }
}

impl Backbone for MeanDiffMotionEncoder {
    fn name(&self) -> &str {
        Self::NAME
    }
    fn output_dim(&self) -> usize {
        self.output_dim
    }
    fn kind(&self) -> BackboneKind {
        BackboneKind::MotionEncoder
    }
    fn weights_digest(&self) -> String {
        self.digest.clone()
    }
}

impl MotionEncoder for MeanDiffMotionEncoder {
    fn input_size(&self) -> (usize, usize) {
        (self.side, self.side)
    }

    fn min_frames(&self) -> usize {
        self.min_frames
    }

    fn encode_clip(&self, frames: &[Frame]) -> Result<Array2<f64>, FeatureError> {
        if frames.len() < self.min_frames {
            return Err(FeatureError::ClipTooShort { frames: frames.len(), min_frames: self.min_frames });
        }
        let resized: Vec<Frame> = frames.iter().map(|f| resize_frame(f, self.side, self.side).into_owned()).collect();
        let lumas: Vec<Vec<f64>> = resized.iter().map(luma_plane).collect();
        let phis: Vec<Vec<f64>> = resized.iter().zip(&lumas).map(|(f, l)| Self::descriptor(f, l)).collect();
        let n = frames.len() as f64;

        let mut slow_phi = vec![0.0; Self::DESCRIPTOR];
        let mut slow_luma = 0.0;
        for (phi, l) in phis.iter().zip(&lumas) {
            for (a, b) in slow_phi.iter_mut().zip(phi) {
                *a += b / n;
            }
            slow_luma += mean_std(l).0 / n;
        }

        let mut fast_phi = vec![0.0; Self::DESCRIPTOR];
        let mut fast_luma = 0.0;
        let pairs = frames.len().saturating_sub(1);
        if pairs > 0 {
            let p = pairs as f64;
            for t in 0..pairs {
                for (a, (x, y)) in fast_phi.iter_mut().zip(phis[t].iter().zip(&phis[t + 1])) {
                    *a += (y - x).abs() / p;
                }
                let diff: f64 = lumas[t].iter().zip(&lumas[t + 1]).map(|(x, y)| (y - x).abs()).sum();
                fast_luma += diff / lumas[t].len() as f64 / p;
            }
        }

        let mut out = Array2::zeros((2, self.output_dim));
        out[[0, 0]] = slow_luma;
        out[[1, 0]] = fast_luma;
        for (j, v) in matvec(&self.slow, &slow_phi).into_iter().enumerate() {
            out[[0, j + 1]] = v;
        }
        for (j, v) in matvec(&self.fast, &fast_phi).into_iter().enumerate() {
            out[[1, j + 1]] = v;
        }
        Ok(out)
    }
}

/// Bag of hashed words. Each lowercase alphanumeric word adds `+-1` at
/// coordinate `fnv1a64(seed || word) mod output_dim`, signed by the
/// hash's top bit. No normalisation, so differences stay local to the
/// coordinates of the changed words.
pub struct HashedBagTextEncoder {
    output_dim: usize,
    seed: u64,
    max_tokens: usize,
}

impl HashedBagTextEncoder {
    pub const NAME: &'static str = "toy-hashed-bow";
    pub const DEFAULT_MAX_TOKENS: usize = 77;

    pub fn new(output_dim: usize, seed: u64, max_tokens: usize) -> Result<Self, FeatureError> {
        if output_dim == 0 || max_tokens == 0 {
            return Err(FeatureError::InvalidConfig(format!(
                "{}: output_dim and max_tokens must be positive",
                Self::NAME
            )));
        }
        Ok(Self { output_dim, seed, max_tokens })
    }

    pub fn from_spec(spec: &BackboneSpec) -> Result<Self, FeatureError> {
        Self::new(spec.output_dim, spec.seed, spec.max_tokens.unwrap_or(Self::DEFAULT_MAX_TOKENS))
    }

    pub fn tokenize(text: &str) -> Vec<String> {
        text.split(|c: char| !c.is_alphanumeric()).filter(|w| !w.is_empty()).map(str::to_lowercase).collect()
    }

    /// `(coordinate, sign)` contributed by one token.
    pub fn slot(&self, token: &str) -> (usize, f64) {
        let mut bytes = self.seed.to_le_bytes().to_vec();
        bytes.extend_from_slice(token.as_bytes());
        let h = fnv1a64(&bytes);
        let sign = if h >> 63 == 1 { -1.0 } else { 1.0 };
        ((h % self.output_dim as u64) as usize, sign)
    }
}

impl Backbone for HashedBagTextEncoder {
    fn name(&self) -> &str {
        Self::NAME
    }
    fn output_dim(&self) -> usize {
        self.output_dim
    }
    fn kind(&self) -> BackboneKind {
        BackboneKind::TextEncoder
    }
    fn weights_digest(&self) -> String {
        let mut d = WeightDigest::new();
        d.bytes(b"fnv1a64-bow/1").bytes(&self.seed.to_le_bytes()).bytes(&(self.max_tokens as u64).to_le_bytes());
        d.hex()
    }
}

impl TextEncoder for HashedBagTextEncoder {
    fn max_tokens(&self) -> usize {
        self.max_tokens
    }

    fn encode_text(&self, text: &str) -> Result<Vec<f64>, FeatureError> {
        let tokens = Self::tokenize(text);
        if tokens.is_empty() {
            return Err(FeatureError::EmptyPrompt);
        }
        if tokens.len() > self.max_tokens {
            return Err(FeatureError::TokenOverflow { tokens: tokens.len(), limit: self.max_tokens });
        }
        let mut out = vec![0.0; self.output_dim];
        for t in &tokens {
            let (i, s) = self.slot(t);
            out[i] += s;
        }
        Ok(out)
    }
}
