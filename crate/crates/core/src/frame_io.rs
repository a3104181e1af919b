//! Grayscale frame sequences: PGM directories, JSON dataset manifests, and
//! the seeded synthetic crowd generator.

use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// An ordered stack of equally sized grayscale frames with intensities in `[0, 1]`.
///
/// Each frame is stored row-major (`y * width + x`).
#[derive(Debug, Clone, PartialEq)]
pub struct FrameSequence {
    width: usize,
    height: usize,
    frames: Vec<Vec<f64>>,
}

impl FrameSequence {
    pub fn new(width: usize, height: usize, frames: Vec<Vec<f64>>) -> Result<Self> {
        if width == 0 || height == 0 {
            return Err(Error::InvalidInput(
                "frame dimensions must be positive".into(),
            ));
        }
        if frames.is_empty() {
            return Err(Error::InvalidInput(
                "a frame sequence needs at least one frame".into(),
            ));
        }
        for (t, frame) in frames.iter().enumerate() {
            if frame.len() != width * height {
                return Err(Error::InvalidInput(format!(
                    "frame {t} has {} pixels, expected {}",
                    frame.len(),
                    width * height
                )));
            }
            if let Some(v) = frame.iter().find(|v| !(0.0..=1.0).contains(*v)) {
                return Err(Error::InvalidInput(format!(
                    "frame {t} has intensity {v} outside [0, 1]"
                )));
            }
        }
        Ok(Self {
            width,
            height,
            frames,
        })
    }

    pub fn width(&self) -> usize {
        self.width
    }

    pub fn height(&self) -> usize {
        self.height
    }

    pub fn frame_count(&self) -> usize {
        self.frames.len()
    }

    pub fn frames(&self) -> &[Vec<f64>] {
        &self.frames
    }

    pub fn frame(&self, t: usize) -> &[f64] {
        &self.frames[t]
    }

    #[inline]
    pub fn pixel(&self, t: usize, y: usize, x: usize) -> f64 {
        self.frames[t][y * self.width + x]
    }

    /// Copy of frames `start..end`.
    pub fn sub_sequence(&self, start: usize, end: usize) -> Result<Self> {
        if start >= end || end > self.frame_count() {
            return Err(Error::InvalidInput(format!(
                "frame range {start}..{end} outside 0..{}",
                self.frame_count()
            )));
        }
        Ok(Self {
            width: self.width,
            height: self.height,
            frames: self.frames[start..end].to_vec(),
        })
    }
}

/// Ground-truth state of a single frame.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Label {
    Normal,
    Abnormal,
}

impl Label {
    pub fn as_str(self) -> &'static str {
        match self {
            Label::Normal => "normal",
            Label::Abnormal => "abnormal",
        }
    }
}

/// One label per frame of the sequence it annotates.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct LabelTrack(pub Vec<Label>);

impl LabelTrack {
    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    pub fn labels(&self) -> &[Label] {
        &self.0
    }

    /// Length of the leading run of `Normal` frames.
    pub fn normal_prefix_len(&self) -> usize {
        self.0.iter().take_while(|l| **l == Label::Normal).count()
    }
}

/// Half-open frame range `[start, end)` carrying a label.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct LabelInterval {
    pub start: usize,
    pub end: usize,
    pub label: Label,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ManifestEntry {
    /// Frame directory, relative to the manifest file unless absolute.
    pub path: PathBuf,
    pub scene: String,
    /// Optional frame count; when present intervals are range-checked at load time.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub frame_count: Option<usize>,
    #[serde(default)]
    pub intervals: Vec<LabelInterval>,
}

impl ManifestEntry {
    fn validate(&self) -> Result<()> {
        let mut sorted = self.intervals.clone();
        sorted.sort_by_key(|iv| (iv.start, iv.end));
        for iv in &sorted {
            if iv.start >= iv.end {
                return Err(Error::Manifest(format!(
                    "entry {:?}: empty or reversed interval [{}, {})",
                    self.scene, iv.start, iv.end
                )));
            }
            if let Some(n) = self.frame_count {
                if iv.end > n {
                    return Err(Error::Manifest(format!(
                        "entry {:?}: interval [{}, {}) exceeds frame count {n}",
                        self.scene, iv.start, iv.end
                    )));
                }
            }
        }
        for pair in sorted.windows(2) {
            if pair[1].start < pair[0].end {
                return Err(Error::Manifest(format!(
                    "entry {:?}: intervals [{}, {}) and [{}, {}) overlap",
                    self.scene, pair[0].start, pair[0].end, pair[1].start, pair[1].end
                )));
            }
        }
        Ok(())
    }

    /// Frame ranges labeled `label`, in ascending order.
    pub fn ranges(&self, label: Label) -> Vec<(usize, usize)> {
        let mut out: Vec<_> = self
            .intervals
            .iter()
            .filter(|iv| iv.label == label)
            .map(|iv| (iv.start, iv.end))
            .collect();
        out.sort_unstable();
        out
    }

    /// Expands the intervals into a per-frame track. Every frame must be covered.
    pub fn label_track(&self, frame_count: usize) -> Result<LabelTrack> {
        let mut labels = vec![None; frame_count];
        for iv in &self.intervals {
            if iv.end > frame_count {
                return Err(Error::Manifest(format!(
                    "entry {:?}: interval [{}, {}) exceeds frame count {frame_count}",
                    self.scene, iv.start, iv.end
                )));
            }
            for slot in &mut labels[iv.start..iv.end] {
                *slot = Some(iv.label);
            }
        }
        labels
            .into_iter()
            .enumerate()
            .map(|(t, l)| {
                l.ok_or_else(|| {
                    Error::Manifest(format!("entry {:?}: frame {t} has no label", self.scene))
                })
            })
            .collect::<Result<Vec<_>>>()
            .map(LabelTrack)
    }
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct DatasetManifest {
    #[serde(default)]
    pub entries: Vec<ManifestEntry>,
    /// Directory the manifest was loaded from; relative entry paths resolve against it.
    #[serde(skip)]
    pub base_dir: PathBuf,
}

impl DatasetManifest {
    pub fn validate(&self) -> Result<()> {
        self.entries.iter().try_for_each(ManifestEntry::validate)
    }

    pub fn resolve(&self, entry: &ManifestEntry) -> PathBuf {
        if entry.path.is_absolute() {
            entry.path.clone()
        } else {
            self.base_dir.join(&entry.path)
        }
    }

    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string_pretty(self)?)
    }
}

/// Parses a manifest from its JSON text. Blank input is an empty manifest.
pub fn parse_manifest(text: &str) -> Result<DatasetManifest> {
    if text.trim().is_empty() {
        return Ok(DatasetManifest::default());
    }
    let manifest: DatasetManifest =
        serde_json::from_str(text).map_err(|e| Error::Manifest(format!("malformed JSON: {e}")))?;
    manifest.validate()?;
    Ok(manifest)
}

pub fn load_manifest(path: impl AsRef<Path>) -> Result<DatasetManifest> {
    let path = path.as_ref();
    let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    let mut manifest = parse_manifest(&text)?;
    manifest.base_dir = path.parent().map(Path::to_path_buf).unwrap_or_default();
    Ok(manifest)
}

// ---------------------------------------------------------------------------
// PGM

/// Decodes a binary (P5) 8-bit PGM into `(width, height, intensities)`.
pub fn decode_pgm(bytes: &[u8]) -> std::result::Result<(usize, usize, Vec<f64>), String> {
    let mut pos = 0;
    let mut next_token = || -> std::result::Result<String, String> {
        loop {
            while pos < bytes.len() && bytes[pos].is_ascii_whitespace() {
                pos += 1;
            }
            if pos < bytes.len() && bytes[pos] == b'#' {
                while pos < bytes.len() && bytes[pos] != b'\n' {
                    pos += 1;
                }
                continue;
            }
            break;
        }
        let start = pos;
        while pos < bytes.len() && !bytes[pos].is_ascii_whitespace() && bytes[pos] != b'#' {
            pos += 1;
        }
        if start == pos {
            return Err("truncated header".into());
        }
        Ok(String::from_utf8_lossy(&bytes[start..pos]).into_owned())
    };
    if next_token()? != "P5" {
        return Err("missing P5 magic".into());
    }
    let mut number = |what: &str| -> std::result::Result<usize, String> {
        next_token()?
            .parse::<usize>()
            .map_err(|_| format!("bad {what} in header"))
    };
    let width = number("width")?;
    let height = number("height")?;
    let maxval = number("maxval")?;
    if width == 0 || height == 0 {
        return Err("zero dimension".into());
    }
    if maxval == 0 || maxval > 255 {
        return Err(format!("maxval {maxval} is not 8-bit"));
    }
    // exactly one whitespace byte separates the header from the raster
    let data_start = pos + 1;
    let n = width * height;
    if bytes.len() < data_start + n {
        return Err(format!(
            "raster truncated: {} of {n} bytes",
            bytes.len().saturating_sub(data_start)
        ));
    }
    let scale = maxval as f64;
    let pixels = bytes[data_start..data_start + n]
        .iter()
        .map(|&b| (b as f64 / scale).min(1.0))
        .collect();
    Ok((width, height, pixels))
}

/// Encodes one frame as binary PGM with maxval 255.
pub fn encode_pgm(width: usize, height: usize, pixels: &[f64]) -> Vec<u8> {
    let mut out = format!("P5\n{width} {height}\n255\n").into_bytes();
    out.extend(
        pixels
            .iter()
            .map(|v| (v.clamp(0.0, 1.0) * 255.0).round() as u8),
    );
    out
}

/// Writes `bytes` to a temporary sibling and renames it over `path`.
pub fn write_atomic(path: impl AsRef<Path>, bytes: &[u8]) -> Result<()> {
    let path = path.as_ref();
    let file_name = path
        .file_name()
        .ok_or_else(|| Error::InvalidInput(format!("not a file path: {}", path.display())))?;
    let tmp = path.with_file_name(format!(".{}.tmp", file_name.to_string_lossy()));
    let mut file = fs::File::create(&tmp).map_err(|e| Error::io(&tmp, e))?;
    file.write_all(bytes).map_err(|e| Error::io(&tmp, e))?;
    file.sync_all().map_err(|e| Error::io(&tmp, e))?;
    drop(file);
    fs::rename(&tmp, path).map_err(|e| Error::io(path, e))
}

pub fn frame_file_name(t: usize) -> String {
    format!("frame_{t:06}.pgm")
}

/// Writes every frame as `frame_%06d.pgm` into `dir`, creating it if needed.
pub fn write_frame_sequence(seq: &FrameSequence, dir: impl AsRef<Path>) -> Result<Vec<PathBuf>> {
    let dir = dir.as_ref();
    fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
    seq.frames()
        .iter()
        .enumerate()
        .map(|(t, frame)| {
            let path = dir.join(frame_file_name(t));
            write_atomic(&path, &encode_pgm(seq.width(), seq.height(), frame))?;
            Ok(path)
        })
        .collect()
}

fn frame_number(path: &Path) -> Option<u64> {
    let stem = path.file_stem()?.to_str()?;
    let digits: String = stem
        .chars()
        .rev()
        .take_while(char::is_ascii_digit)
        .collect::<Vec<_>>()
        .into_iter()
        .rev()
        .collect();
    digits.parse().ok()
}

/// Loads a directory of numerically ordered PGM frames.
pub fn load_frame_sequence(dir: impl AsRef<Path>) -> Result<FrameSequence> {
    let dir = dir.as_ref();
    if !dir.is_dir() {
        return Err(Error::MissingDirectory(dir.to_path_buf()));
    }
    let mut files = Vec::new();
    for entry in fs::read_dir(dir).map_err(|e| Error::io(dir, e))? {
        let path = entry.map_err(|e| Error::io(dir, e))?.path();
        if !path.is_file() {
            continue;
        }
        let is_pgm = path
            .extension()
            .and_then(|e| e.to_str())
            .is_some_and(|e| e.eq_ignore_ascii_case("pgm"));
        if !is_pgm {
            return Err(Error::NotPgm {
                path,
                reason: "extension is not .pgm".into(),
            });
        }
        let Some(number) = frame_number(&path) else {
            return Err(Error::NotPgm {
                path,
                reason: "file name carries no frame number".into(),
            });
        };
        files.push((number, path));
    }
    if files.is_empty() {
        return Err(Error::InvalidInput(format!(
            "no PGM frames in {}",
            dir.display()
        )));
    }
    files.sort();

    let mut frames = Vec::with_capacity(files.len());
    let mut dims: Option<(usize, usize)> = None;
    for (_, path) in &files {
        let bytes = fs::read(path).map_err(|e| Error::io(path, e))?;
        let (w, h, pixels) = decode_pgm(&bytes).map_err(|reason| Error::NotPgm {
            path: path.clone(),
            reason,
        })?;
        match dims {
            None => dims = Some((w, h)),
            Some((width, height)) if (w, h) != (width, height) => {
                return Err(Error::FrameDimensions {
                    path: path.clone(),
                    width,
                    height,
                    got_width: w,
                    got_height: h,
                })
            }
            Some(_) => {}
        }
        frames.push(pixels);
    }
    let (width, height) = dims.expect("at least one frame");
    FrameSequence::new(width, height, frames)
}

// ---------------------------------------------------------------------------
// Synthetic crowd generator

/// Parameters of the synthetic crowd scene.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct SynthConfig {
    pub width: usize,
    pub height: usize,
    pub n_particles: usize,
    pub n_frames: usize,
    pub dispersal_frame: usize,
    pub speed_normal: f64,
    pub speed_abnormal: f64,
}

impl Default for SynthConfig {
    fn default() -> Self {
        Self {
            width: 64,
            height: 64,
            n_particles: 40,
            n_frames: 64,
            dispersal_frame: 32,
            speed_normal: 0.5,
            speed_abnormal: 3.0,
        }
    }
}

impl SynthConfig {
    pub fn validate(&self) -> Result<()> {
        if self.width == 0 || self.height == 0 || self.n_frames == 0 {
            return Err(Error::InvalidConfig(
                "width, height and n_frames must be positive".into(),
            ));
        }
        if self.dispersal_frame >= self.n_frames {
            return Err(Error::InvalidConfig(format!(
                "dispersal_frame ({}) must be less than n_frames ({})",
                self.dispersal_frame, self.n_frames
            )));
        }
        for (name, v) in [
            ("speed_normal", self.speed_normal),
            ("speed_abnormal", self.speed_abnormal),
        ] {
            if !v.is_finite() || v < 0.0 {
                return Err(Error::InvalidConfig(format!(
                    "{name} must be finite and non-negative"
                )));
            }
        }
        Ok(())
    }
}

const PARTICLE_RADIUS: i64 = 1;

/// Reflects `pos` into `[0, max]`, flipping `vel` on every bounce.
fn reflect(pos: &mut f64, vel: &mut f64, max: f64) {
    if max <= 0.0 {
        *pos = 0.0;
        return;
    }
    for _ in 0..8 {
        if *pos < 0.0 {
            *pos = -*pos;
            *vel = -*vel;
        } else if *pos > max {
            *pos = 2.0 * max - *pos;
            *vel = -*vel;
        } else {
            return;
        }
    }
    *pos = pos.clamp(0.0, max);
}

fn render(width: usize, height: usize, particles: &[(f64, f64)]) -> Vec<f64> {
    let mut frame = vec![0.0f64; width * height];
    for &(px, py) in particles {
        let (cx, cy) = (px.round() as i64, py.round() as i64);
        for dy in -PARTICLE_RADIUS..=PARTICLE_RADIUS {
            for dx in -PARTICLE_RADIUS..=PARTICLE_RADIUS {
                let (x, y) = (cx + dx, cy + dy);
                if x >= 0 && y >= 0 && (x as usize) < width && (y as usize) < height {
                    let v = &mut frame[y as usize * width + x as usize];
                    *v = (*v + 1.0).min(1.0);
                }
            }
        }
    }
    frame
}

/// Renders a seeded crowd scene.
///
/// Particles random-walk at `speed_normal` until `dispersal_frame`, then flee
/// radially from the crowd centroid at `speed_abnormal`. Frames before
/// `dispersal_frame` are labeled normal, the rest abnormal.
pub fn generate_synthetic_sequence(
    config: &SynthConfig,
    seed: u64,
) -> Result<(FrameSequence, LabelTrack)> {
    config.validate()?;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let max_x = (config.width - 1) as f64;
    let max_y = (config.height - 1) as f64;
    let mut pos: Vec<(f64, f64)> = (0..config.n_particles)
        .map(|_| (rng.random::<f64>() * max_x, rng.random::<f64>() * max_y))
        .collect();
    let mut flee: Option<Vec<(f64, f64)>> = None;

    let mut frames = Vec::with_capacity(config.n_frames);
    for t in 0..config.n_frames {
        if t > 0 {
            if t < config.dispersal_frame {
                for p in pos.iter_mut() {
                    let angle = rng.random::<f64>() * std::f64::consts::TAU;
                    let (mut vx, mut vy) = (
                        config.speed_normal * angle.cos(),
                        config.speed_normal * angle.sin(),
                    );
                    p.0 += vx;
                    p.1 += vy;
                    reflect(&mut p.0, &mut vx, max_x);
                    reflect(&mut p.1, &mut vy, max_y);
                }
            } else {
                let vel = flee.get_or_insert_with(|| {
                    let n = pos.len().max(1) as f64;
                    let cx = pos.iter().map(|p| p.0).sum::<f64>() / n;
                    let cy = pos.iter().map(|p| p.1).sum::<f64>() / n;
                    pos.iter()
                        .map(|p| {
                            let (dx, dy) = (p.0 - cx, p.1 - cy);
                            let norm = dx.hypot(dy);
                            let (ux, uy) = if norm > 1e-9 {
                                (dx / norm, dy / norm)
                            } else {
                                let angle = rng.random::<f64>() * std::f64::consts::TAU;
                                (angle.cos(), angle.sin())
                            };
                            (config.speed_abnormal * ux, config.speed_abnormal * uy)
                        })
                        .collect()
                });
                for (p, v) in pos.iter_mut().zip(vel.iter_mut()) {
                    p.0 += v.0;
                    p.1 += v.1;
                    reflect(&mut p.0, &mut v.0, max_x);
                    reflect(&mut p.1, &mut v.1, max_y);
                }
            }
        }
        frames.push(render(config.width, config.height, &pos));
    }

    let labels = (0..config.n_frames)
        .map(|t| {
            if t < config.dispersal_frame {
                Label::Normal
            } else {
                Label::Abnormal
            }
        })
        .collect();
    Ok((
        FrameSequence::new(config.width, config.height, frames)?,
        LabelTrack(labels),
    ))
}

/// Manifest entry describing a generated sequence stored at `path`.
pub fn synthetic_manifest_entry(
    config: &SynthConfig,
    path: impl Into<PathBuf>,
    scene: impl Into<String>,
) -> ManifestEntry {
    let mut intervals = Vec::new();
    if config.dispersal_frame > 0 {
        intervals.push(LabelInterval {
            start: 0,
            end: config.dispersal_frame,
            label: Label::Normal,
        });
    }
    intervals.push(LabelInterval {
        start: config.dispersal_frame,
        end: config.n_frames,
        label: Label::Abnormal,
    });
    ManifestEntry {
        path: path.into(),
        scene: scene.into(),
        frame_count: Some(config.n_frames),
        intervals,
    }
}
