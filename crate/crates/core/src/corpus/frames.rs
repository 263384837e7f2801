use std::fs;
use std::io::BufReader;
use std::path::{Path, PathBuf};

use image::AnimationDecoder;

use super::{CorpusError, DatasetManifest, VideoClip};

pub const RAW_CLIP_EXTENSION: &str = "vclip";

const RAW_MAGIC: &[u8; 4] = b"VCLP";
const RAW_VERSION: u8 = 1;
const RAW_HEADER_LEN: usize = 20;
/// Upper bound on decoded samples, so a corrupt header cannot request an
/// absurd allocation.
const RAW_MAX_SAMPLES: usize = 1 << 31;

/// One RGB frame, row-major `H x W x 3`, channel values in `[0, 1]`.
#[derive(Debug, Clone, PartialEq)]
pub struct Frame {
    pub height: usize,
    pub width: usize,
    pub data: Vec<f32>,
}

impl Frame {
    pub fn new(height: usize, width: usize, data: Vec<f32>) -> Self {
        assert_eq!(data.len(), height * width * 3, "frame buffer size");
        Self { height, width, data }
    }

    pub fn filled(height: usize, width: usize, value: f32) -> Self {
        Self::new(height, width, vec![value; height * width * 3])
    }

    #[inline]
    pub fn pixel(&self, y: usize, x: usize) -> [f32; 3] {
        let i = (y * self.width + x) * 3;
        [self.data[i], self.data[i + 1], self.data[i + 2]]
    }

    pub fn mean(&self) -> f64 {
        self.data.iter().map(|&v| f64::from(v)).sum::<f64>() / self.data.len() as f64
    }
}

/// Turns a media location into normalised frames.
pub trait FrameProvider: Send + Sync {
    fn name(&self) -> &'static str;
    fn can_decode(&self, path: &Path) -> bool;
    fn decode(&self, path: &Path) -> Result<Vec<Frame>, CorpusError>;
}

/// Reads the raw tensor container used for synthetic and pre-decoded clips.
#[derive(Debug, Default, Clone, Copy)]
pub struct RawClipProvider;

impl FrameProvider for RawClipProvider {
    fn name(&self) -> &'static str {
        "raw-clip"
    }

    fn can_decode(&self, path: &Path) -> bool {
        path.extension().is_some_and(|e| e == RAW_CLIP_EXTENSION)
    }

    fn decode(&self, path: &Path) -> Result<Vec<Frame>, CorpusError> {
        let bytes = fs::read(path).map_err(|source| CorpusError::Io { path: path.to_path_buf(), source })?;
        decode_raw_clip(&bytes).map_err(|message| CorpusError::Decode { path: path.to_path_buf(), message })
    }
}

fn raw_header(frames: &[Frame], dtype: u8) -> Vec<u8> {
    assert!(!frames.is_empty(), "clip needs at least one frame");
    let (h, w) = (frames[0].height, frames[0].width);
    assert!(frames.iter().all(|f| (f.height, f.width) == (h, w)), "frame size changes within clip");
    let mut out = Vec::with_capacity(RAW_HEADER_LEN + frames.len() * h * w * 3 * if dtype == 0 { 1 } else { 4 });
    out.extend_from_slice(RAW_MAGIC);
    out.push(RAW_VERSION);
    out.push(dtype);
    out.extend_from_slice(&[0, 0]);
    for dim in [frames.len(), h, w] {
        out.extend_from_slice(&(dim as u32).to_le_bytes());
    }
    out
}

/// Serialises frames as an 8-bit raw clip. All frames must share a size.
pub fn encode_raw_clip(frames: &[Frame]) -> Vec<u8> {
    let mut out = raw_header(frames, 0);
    for f in frames {
        out.extend(f.data.iter().map(|&v| (v.clamp(0.0, 1.0) * 255.0).round() as u8));
    }
    out
}

/// Serialises frames losslessly as 32-bit float samples.
pub fn encode_raw_clip_f32(frames: &[Frame]) -> Vec<u8> {
    let mut out = raw_header(frames, 1);
    for f in frames {
        for v in &f.data {
            out.extend_from_slice(&v.clamp(0.0, 1.0).to_le_bytes());
        }
    }
    out
}

/// Decodes a raw clip: 20-byte header (`VCLP`, version, dtype, two reserved
/// bytes, then frame count, height and width as little-endian u32) followed
/// by `N*H*W*3` samples, either u8 (dtype 0) or little-endian f32 in `[0, 1]`
/// (dtype 1).
pub fn decode_raw_clip(bytes: &[u8]) -> Result<Vec<Frame>, String> {
    if bytes.len() < RAW_HEADER_LEN {
        return Err(format!("truncated header ({} bytes)", bytes.len()));
    }
    if &bytes[..4] != RAW_MAGIC {
        return Err("bad magic".into());
    }
    if bytes[4] != RAW_VERSION {
        return Err(format!("unsupported version {}", bytes[4]));
    }
    let dtype = bytes[5];
    let u32_at = |o: usize| u32::from_le_bytes(bytes[o..o + 4].try_into().unwrap()) as usize;
    let (n, h, w) = (u32_at(8), u32_at(12), u32_at(16));
    if n == 0 || h == 0 || w == 0 {
        return Err(format!("empty clip dimensions {n}x{h}x{w}"));
    }
    let per_frame = h
        .checked_mul(w)
        .and_then(|v| v.checked_mul(3))
        .filter(|&v| v <= RAW_MAX_SAMPLES)
        .ok_or("frame size overflow")?;
    let samples = per_frame.checked_mul(n).filter(|&v| v <= RAW_MAX_SAMPLES).ok_or("clip size overflow")?;
    let width_bytes = match dtype {
        0 => 1,
        1 => 4,
        other => return Err(format!("unknown dtype {other}")),
    };
    let payload = &bytes[RAW_HEADER_LEN..];
    if payload.len() != samples * width_bytes {
        return Err(format!("payload holds {} bytes, header implies {}", payload.len(), samples * width_bytes));
    }
    let values: Vec<f32> = if dtype == 0 {
        payload.iter().map(|&b| f32::from(b) / 255.0).collect()
    } else {
        let vals: Vec<f32> = payload.chunks_exact(4).map(|c| f32::from_le_bytes(c.try_into().unwrap())).collect();
        if let Some(bad) = vals.iter().find(|v| !(0.0..=1.0).contains(*v)) {
            return Err(format!("sample {bad} outside [0, 1]"));
        }
        vals
    };
    Ok(values.chunks_exact(per_frame).map(|c| Frame::new(h, w, c.to_vec())).collect())
}

/// Decodes animated GIFs and directories of still images (PNG/JPEG, taken
/// in lexicographic file-name order).
#[derive(Debug, Default, Clone, Copy)]
pub struct ImageSequenceProvider;

const STILL_EXTENSIONS: [&str; 3] = ["png", "jpg", "jpeg"];

fn is_still(path: &Path) -> bool {
    path.extension()
        .and_then(|e| e.to_str())
        .is_some_and(|e| STILL_EXTENSIONS.contains(&e.to_ascii_lowercase().as_str()))
}

fn rgb_to_frame(img: &image::RgbImage) -> Frame {
    let (w, h) = img.dimensions();
    let data = img.as_raw().iter().map(|&b| f32::from(b) / 255.0).collect();
    Frame::new(h as usize, w as usize, data)
}

impl FrameProvider for ImageSequenceProvider {
    fn name(&self) -> &'static str {
        "image-sequence"
    }

    fn can_decode(&self, path: &Path) -> bool {
        path.is_dir() || path.extension().is_some_and(|e| e.eq_ignore_ascii_case("gif")) || is_still(path)
    }

    fn decode(&self, path: &Path) -> Result<Vec<Frame>, CorpusError> {
        let io = |source| CorpusError::Io { path: path.to_path_buf(), source };
        let decode = |message: String| CorpusError::Decode { path: path.to_path_buf(), message };
        if path.is_dir() {
            let mut files: Vec<PathBuf> = fs::read_dir(path)
                .map_err(io)?
                .filter_map(|e| e.ok().map(|e| e.path()))
                .filter(|p| is_still(p))
                .collect();
            files.sort();
            if files.is_empty() {
                return Err(decode("directory holds no images".into()));
            }
            files
                .iter()
                .map(|f| {
                    image::open(f)
                        .map(|img| rgb_to_frame(&img.to_rgb8()))
                        .map_err(|e| decode(format!("{}: {e}", f.display())))
                })
                .collect()
        } else if is_still(path) {
            let img = image::open(path).map_err(|e| decode(e.to_string()))?;
            Ok(vec![rgb_to_frame(&img.to_rgb8())])
        } else {
            let file = fs::File::open(path).map_err(io)?;
            let decoder =
                image::codecs::gif::GifDecoder::new(BufReader::new(file)).map_err(|e| decode(e.to_string()))?;
            let frames = decoder.into_frames().collect_frames().map_err(|e| decode(e.to_string()))?;
            if frames.is_empty() {
                return Err(decode("animation holds no frames".into()));
            }
            Ok(frames
                .into_iter()
                .map(|f| rgb_to_frame(&image::DynamicImage::ImageRgba8(f.into_buffer()).to_rgb8()))
                .collect())
        }
    }
}

/// Dispatches to the first provider that accepts a path and enforces the
/// manifest's frame-count and resolution metadata.
pub struct FrameDecoder {
    providers: Vec<Box<dyn FrameProvider>>,
}

impl Default for FrameDecoder {
    fn default() -> Self {
        Self { providers: vec![Box::new(RawClipProvider), Box::new(ImageSequenceProvider)] }
    }
}

impl FrameDecoder {
    pub fn new(providers: Vec<Box<dyn FrameProvider>>) -> Self {
        Self { providers }
    }

    pub fn decode_path(&self, path: &Path) -> Result<Vec<Frame>, CorpusError> {
        let provider = self
            .providers
            .iter()
            .find(|p| p.can_decode(path))
            .ok_or_else(|| CorpusError::NoProvider(path.to_path_buf()))?;
        provider.decode(path)
    }

    /// Decodes a clip and rejects it when the frame count or resolution
    /// disagrees with its descriptor.
    pub fn frames(&self, manifest: &DatasetManifest, clip: &VideoClip) -> Result<Vec<Frame>, CorpusError> {
        let path = manifest.resolve_path(clip);
        let frames = self.decode_path(&path)?;
        let (actual_h, actual_w) = (frames[0].height, frames[0].width);
        let uniform = frames.iter().all(|f| f.height == actual_h && f.width == actual_w);
        if frames.len() != clip.num_frames || !uniform || actual_h != clip.height || actual_w != clip.width {
            return Err(CorpusError::FrameMismatch {
                path,
                expected: clip.num_frames,
                actual: frames.len(),
                expected_w: clip.width,
                expected_h: clip.height,
                actual_w,
                actual_h,
            });
        }
        Ok(frames)
    }
}
