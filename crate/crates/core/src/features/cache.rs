use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};
use std::sync::atomic::{AtomicUsize, Ordering};

use ndarray::Array2;
use rayon::prelude::*;

use super::{FeatureBundle, FeatureError, FeatureExtractor};
use crate::corpus::{DatasetManifest, FrameDecoder, VideoClip};
use crate::hashing::fnv1a64;

const MAGIC: &[u8; 8] = b"UGVQFEAT";
const VERSION: u8 = 1;
const DTYPE_F64: u8 = 8;
const MAX_VALUES: u64 = 1 << 28;

/// One decoded cache record.
#[derive(Debug, Clone, PartialEq)]
pub struct FeatureRecord {
    pub fingerprint: String,
    pub video_id: String,
    pub bundle: FeatureBundle,
}

fn put_str(out: &mut Vec<u8>, s: &str) {
    let b = s.as_bytes();
    let len = u16::try_from(b.len()).expect("identifier shorter than 64 KiB");
    out.extend_from_slice(&len.to_le_bytes());
    out.extend_from_slice(b);
}

/// Layout: magic, version, dtype, 2 reserved bytes, length-prefixed
/// fingerprint and video id, three `(rows: u32, cols: u32)` pairs, the
/// matrices as little-endian f64 in row-major order, and a trailing
/// FNV-1a checksum of everything before it.
pub fn encode_record(fingerprint: &str, video_id: &str, bundle: &FeatureBundle) -> Vec<u8> {
    let mut out = Vec::new();
    out.extend_from_slice(MAGIC);
    out.extend_from_slice(&[VERSION, DTYPE_F64, 0, 0]);
    put_str(&mut out, fingerprint);
    put_str(&mut out, video_id);
    let mats = [&bundle.spatial, &bundle.temporal, &bundle.text];
    for m in mats {
        out.extend_from_slice(&(m.nrows() as u32).to_le_bytes());
        out.extend_from_slice(&(m.ncols() as u32).to_le_bytes());
    }
    for m in mats {
        for v in m.iter() {
            out.extend_from_slice(&v.to_le_bytes());
        }
    }
    let sum = fnv1a64(&out);
    out.extend_from_slice(&sum.to_le_bytes());
    out
}

struct Reader<'a> {
    buf: &'a [u8],
    pos: usize,
}

impl<'a> Reader<'a> {
    fn take(&mut self, n: usize) -> Result<&'a [u8], String> {
        let end = self.pos.checked_add(n).filter(|&e| e <= self.buf.len()).ok_or("truncated record")?;
        let s = &self.buf[self.pos..end];
        self.pos = end;
        Ok(s)
    }

    fn u16(&mut self) -> Result<u16, String> {
        Ok(u16::from_le_bytes(self.take(2)?.try_into().unwrap()))
    }

    fn u32(&mut self) -> Result<u32, String> {
        Ok(u32::from_le_bytes(self.take(4)?.try_into().unwrap()))
    }

    fn string(&mut self) -> Result<String, String> {
        let n = self.u16()? as usize;
        String::from_utf8(self.take(n)?.to_vec()).map_err(|_| "identifier is not UTF-8".to_string())
    }
}

pub fn decode_record(bytes: &[u8]) -> Result<FeatureRecord, FeatureError> {
    decode_inner(bytes).map_err(FeatureError::Record)
}

fn decode_inner(bytes: &[u8]) -> Result<FeatureRecord, String> {
    if bytes.len() < MAGIC.len() + 4 + 8 {
        return Err("truncated record".into());
    }
    let (body, trailer) = bytes.split_at(bytes.len() - 8);
    if fnv1a64(body) != u64::from_le_bytes(trailer.try_into().unwrap()) {
        return Err("checksum mismatch".into());
    }
    let mut r = Reader { buf: body, pos: 0 };
    if r.take(8)? != MAGIC {
        return Err("bad magic".into());
    }
    let head = r.take(4)?;
    if head[0] != VERSION {
        return Err(format!("unsupported version {}", head[0]));
    }
    if head[1] != DTYPE_F64 {
        return Err(format!("unsupported dtype {}", head[1]));
    }
    let fingerprint = r.string()?;
    let video_id = r.string()?;
    let mut dims = [(0usize, 0usize); 3];
    let mut total: u64 = 0;
    for d in &mut dims {
        let (rows, cols) = (r.u32()?, r.u32()?);
        total += u64::from(rows) * u64::from(cols);
        *d = (rows as usize, cols as usize);
    }
    if total > MAX_VALUES || total * 8 != (body.len() - r.pos) as u64 {
        return Err(format!("payload of {} bytes does not hold {total} values", body.len() - r.pos));
    }
    let mut mats = Vec::with_capacity(3);
    for (rows, cols) in dims {
        let raw = r.take(rows * cols * 8)?;
        let vals = raw.chunks_exact(8).map(|c| f64::from_le_bytes(c.try_into().unwrap())).collect();
        mats.push(Array2::from_shape_vec((rows, cols), vals).map_err(|e| e.to_string())?);
    }
    let text = mats.pop().unwrap();
    let temporal = mats.pop().unwrap();
    let spatial = mats.pop().unwrap();
    Ok(FeatureRecord { fingerprint, video_id, bundle: FeatureBundle { spatial, temporal, text } })
}

#[derive(Debug)]
pub enum CacheLookup {
    Hit(FeatureBundle),
    Miss,
    /// Unreadable entry; the reason is for logging.
    Corrupt(String),
}

/// Directory of records for one extractor fingerprint:
/// `<root>/<fingerprint>/<hex(video_id)>.feat`.
#[derive(Debug, Clone)]
pub struct FeatureCache {
    dir: PathBuf,
    fingerprint: String,
}

static TEMP_COUNTER: AtomicUsize = AtomicUsize::new(0);

fn io_err(path: &Path) -> impl FnOnce(std::io::Error) -> FeatureError + '_ {
    move |source| FeatureError::Io { path: path.to_path_buf(), source }
}

impl FeatureCache {
    pub fn open(root: impl AsRef<Path>, fingerprint: &str) -> Result<Self, FeatureError> {
        let dir = root.as_ref().join(fingerprint);
        fs::create_dir_all(&dir).map_err(io_err(&dir))?;
        Ok(Self { dir, fingerprint: fingerprint.to_string() })
    }

    pub fn dir(&self) -> &Path {
        &self.dir
    }

    pub fn entry_path(&self, video_id: &str) -> PathBuf {
        self.dir.join(format!("{}.feat", hex::encode(video_id.as_bytes())))
    }

    /// A record whose fingerprint matches but whose shapes differ from
    /// `expected` is an error rather than a miss: silently re-encoding
    /// would hide a fingerprint that fails to capture a configuration change.
    pub fn load(&self, video_id: &str, expected: [(usize, usize); 3]) -> Result<CacheLookup, FeatureError> {
        let path = self.entry_path(video_id);
        let bytes = match fs::read(&path) {
            Ok(b) => b,
            Err(e) if e.kind() == std::io::ErrorKind::NotFound => return Ok(CacheLookup::Miss),
            Err(e) => return Err(io_err(&path)(e)),
        };
        let record = match decode_record(&bytes) {
            Ok(r) => r,
            Err(e) => return Ok(CacheLookup::Corrupt(e.to_string())),
        };
        if record.fingerprint != self.fingerprint || record.video_id != video_id {
            return Ok(CacheLookup::Corrupt("record belongs to another entry".into()));
        }
        if record.bundle.shapes() != expected {
            return Err(FeatureError::FingerprintCollision {
                video_id: video_id.to_string(),
                expected: format!("{expected:?}"),
                found: format!("{:?}", record.bundle.shapes()),
            });
        }
        Ok(CacheLookup::Hit(record.bundle))
    }

    /// Writes to a temporary sibling, then renames over the entry.
    pub fn store(&self, video_id: &str, bundle: &FeatureBundle) -> Result<(), FeatureError> {
        let path = self.entry_path(video_id);
        let tmp = self.dir.join(format!(
            ".{}.{}.{}.tmp",
            hex::encode(video_id.as_bytes()),
            std::process::id(),
            TEMP_COUNTER.fetch_add(1, Ordering::Relaxed)
        ));
        let bytes = encode_record(&self.fingerprint, video_id, bundle);
        let mut f = fs::File::create(&tmp).map_err(io_err(&tmp))?;
        f.write_all(&bytes).and_then(|_| f.sync_all()).map_err(io_err(&tmp))?;
        drop(f);
        fs::rename(&tmp, &path).map_err(io_err(&path))
    }
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq)]
pub struct CacheStats {
    pub hits: usize,
    pub encoded: usize,
    /// Corrupt entries that were re-encoded.
    pub recovered: usize,
}

/// Bundles for `clips`, in order. Clips are encoded in parallel; with a
/// cache, hits skip decoding and encoding entirely.
pub fn extract_all(
    extractor: &FeatureExtractor,
    decoder: &FrameDecoder,
    manifest: &DatasetManifest,
    clips: &[&VideoClip],
    cache: Option<&FeatureCache>,
) -> Result<(Vec<FeatureBundle>, CacheStats), FeatureError> {
    let expected = extractor.shapes();
    let hits = AtomicUsize::new(0);
    let encoded = AtomicUsize::new(0);
    let recovered = AtomicUsize::new(0);
    let bundles = clips
        .par_iter()
        .map(|clip| {
            if let Some(cache) = cache {
                match cache.load(&clip.video_id, expected)? {
                    CacheLookup::Hit(b) => {
                        hits.fetch_add(1, Ordering::Relaxed);
                        return Ok(b);
                    }
                    CacheLookup::Corrupt(reason) => {
                        log::warn!("cache entry for {} is unusable ({reason}); re-encoding", clip.video_id);
                        recovered.fetch_add(1, Ordering::Relaxed);
                    }
                    CacheLookup::Miss => {}
                }
            }
            let bundle = extractor.extract_clip(decoder, manifest, clip)?;
            encoded.fetch_add(1, Ordering::Relaxed);
            if let Some(cache) = cache {
                cache.store(&clip.video_id, &bundle)?;
            }
            Ok(bundle)
        })
        .collect::<Result<Vec<_>, FeatureError>>()?;
    let stats =
        CacheStats { hits: hits.into_inner(), encoded: encoded.into_inner(), recovered: recovered.into_inner() };
    Ok((bundles, stats))
}
