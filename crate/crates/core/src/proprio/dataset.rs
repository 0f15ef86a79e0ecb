//! Synthetic torque datasets and their on-disk form.
//!
//! A dataset directory holds `reference.ppm` (the zero-torque render),
//! one image per sample, and `index.tsv` mapping file names to torques.
//! Images are 16-bit P6 with the two channels in red and green and an
//! offset encoding `q = 32768 + 16384·v`, so values in [−2, 2) survive
//! with a resolution of 1/16384.

use std::path::{Path, PathBuf};

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};
use serde::{Deserialize, Serialize};

use super::backbone::{render_synthetic_frame, BackboneModel, LedDisplacements, RenderConfig};
use super::ProprioError;
use crate::imaging::ChannelImage;
use crate::pnm::{Pnm, PnmError};

pub const INDEX_FILE: &str = "index.tsv";
pub const REFERENCE_FILE: &str = "reference.ppm";
const INDEX_HEADER: &str = "filename\tbending_Nmm\ttwisting_Nmm";
const OFFSET: f64 = 32768.0;
const SCALE: f64 = 16384.0;

#[derive(Debug, thiserror::Error)]
pub enum DatasetError {
    #[error("{path}: {source}")]
    Io { path: PathBuf, source: std::io::Error },
    #[error("index line {line}: {message}")]
    Index { line: usize, message: String },
    #[error("{file}: {source}")]
    Image { file: String, source: PnmError },
    #[error("{file}: {message}")]
    Shape { file: String, message: String },
    #[error(transparent)]
    Model(#[from] ProprioError),
}

/// One training example: a two-channel difference image and its torques.
#[derive(Debug, Clone, PartialEq)]
pub struct Sample {
    pub image: ChannelImage,
    pub bending: f64,
    pub twisting: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Dataset {
    /// Zero-torque render the sample images are differenced against.
    pub reference: ChannelImage,
    pub samples: Vec<Sample>,
}

/// Gaussian torque population, truncated to the model's regime.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TorqueDistribution {
    pub bending_mean: f64,
    pub bending_std: f64,
    pub twisting_mean: f64,
    pub twisting_std: f64,
}

impl Default for TorqueDistribution {
    fn default() -> Self {
        Self { bending_mean: -62.4, bending_std: 28.3, twisting_mean: 5.4, twisting_std: 27.3 }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GenerateConfig {
    pub count: usize,
    /// Gaussian jitter (px, per axis) added to every LED position before
    /// rendering, independently per station and per sample.
    pub noise_sigma: f64,
    pub seed: u64,
    pub model: BackboneModel,
    pub render: RenderConfig,
    pub distribution: TorqueDistribution,
}

impl GenerateConfig {
    pub fn new(count: usize, noise_sigma: f64, seed: u64) -> Self {
        Self {
            count,
            noise_sigma,
            seed,
            model: BackboneModel::default(),
            render: RenderConfig::default(),
            distribution: TorqueDistribution::default(),
        }
    }
}

pub fn generate_dataset(cfg: &GenerateConfig) -> Result<Dataset, ProprioError> {
    cfg.model.validate()?;
    if !(cfg.noise_sigma >= 0.0 && cfg.noise_sigma.is_finite()) {
        return Err(ProprioError::InvalidModel(format!("noise sigma must be non-negative, got {}", cfg.noise_sigma)));
    }
    let d = &cfg.distribution;
    let bending = Normal::new(d.bending_mean, d.bending_std)
        .map_err(|e| ProprioError::InvalidModel(format!("bending distribution: {e}")))?;
    let twisting = Normal::new(d.twisting_mean, d.twisting_std)
        .map_err(|e| ProprioError::InvalidModel(format!("twisting distribution: {e}")))?;
    let noise = Normal::new(0.0, cfg.noise_sigma).expect("checked sigma");
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    let reference = render_synthetic_frame(&cfg.render, &LedDisplacements::zero(cfg.model.stations));
    let mut samples = Vec::with_capacity(cfg.count);
    for _ in 0..cfg.count {
        let b = draw_within(&bending, cfg.model.max_bending, &mut rng);
        let t = draw_within(&twisting, cfg.model.max_twisting, &mut rng);
        let mut d = cfg.model.deflect_leds(b, t)?;
        if cfg.noise_sigma > 0.0 {
            for (dx, dy) in d.strip_a.iter_mut().chain(d.strip_b.iter_mut()) {
                *dx += noise.sample(&mut rng);
                *dy += noise.sample(&mut rng);
            }
        }
        let mut image = render_synthetic_frame(&cfg.render, &d);
        for (v, r) in image.data.iter_mut().zip(&reference.data) {
            *v -= r;
        }
        samples.push(Sample { image, bending: b, twisting: t });
    }
    Ok(Dataset { reference, samples })
}

fn draw_within(dist: &Normal<f64>, limit: f64, rng: &mut ChaCha8Rng) -> f64 {
    loop {
        let v = dist.sample(rng);
        if v.abs() <= limit {
            return v;
        }
    }
}

/// Encode a two-channel image as 16-bit P6.
pub fn encode_image(img: &ChannelImage) -> Pnm {
    assert_eq!(img.channels, 2, "dataset images have two channels");
    let n = img.width * img.height;
    let q = |v: f64| (OFFSET + v * SCALE).round().clamp(0.0, 65535.0) as u16;
    let mut data = Vec::with_capacity(3 * n);
    for i in 0..n {
        data.extend([q(img.data[i]), q(img.data[n + i]), OFFSET as u16]);
    }
    Pnm::new(img.width, img.height, 3, 65535, data).expect("sized by construction")
}

pub fn decode_image(p: &Pnm) -> Result<ChannelImage, String> {
    if p.channels != 3 || p.maxval != 65535 {
        return Err("dataset images are 16-bit P6 (maxval 65535)".into());
    }
    let n = p.width * p.height;
    let mut img = ChannelImage::zeros(p.width, p.height, 2);
    for i in 0..n {
        img.data[i] = (p.data[3 * i] as f64 - OFFSET) / SCALE;
        img.data[n + i] = (p.data[3 * i + 1] as f64 - OFFSET) / SCALE;
    }
    Ok(img)
}

/// Parse `index.tsv` into (file name, bending, twisting) rows.
pub fn decode_index(text: &str) -> Result<Vec<(String, f64, f64)>, DatasetError> {
    let mut lines = text.lines().enumerate();
    match lines.next() {
        Some((_, h)) if h.trim_end_matches('\r') == INDEX_HEADER => {}
        _ => return Err(DatasetError::Index { line: 1, message: format!("expected header {INDEX_HEADER:?}") }),
    }
    let mut rows = Vec::new();
    for (i, raw) in lines {
        let line = i + 1;
        let l = raw.trim_end_matches('\r');
        if l.is_empty() {
            continue;
        }
        let fields: Vec<&str> = l.split('\t').collect();
        let [name, b, t] = fields[..] else {
            return Err(DatasetError::Index { line, message: format!("expected 3 fields, got {}", fields.len()) });
        };
        let plain = !name.is_empty()
            && name != "."
            && name != ".."
            && !name.contains(['/', '\\', '\0'])
            && name != REFERENCE_FILE
            && name != INDEX_FILE;
        if !plain {
            return Err(DatasetError::Index { line, message: format!("bad file name {name:?}") });
        }
        let num = |s: &str, what: &str| {
            s.parse::<f64>()
                .ok()
                .filter(|v| v.is_finite())
                .ok_or_else(|| DatasetError::Index { line, message: format!("{what} is not a finite number: {s:?}") })
        };
        rows.push((name.to_string(), num(b, "bending")?, num(t, "twisting")?));
    }
    Ok(rows)
}

fn sample_name(i: usize) -> String {
    format!("sample_{i:05}.ppm")
}

fn write(path: &Path, bytes: &[u8]) -> Result<(), DatasetError> {
    std::fs::write(path, bytes).map_err(|source| DatasetError::Io { path: path.to_path_buf(), source })
}

fn read(path: &Path) -> Result<Vec<u8>, DatasetError> {
    std::fs::read(path).map_err(|source| DatasetError::Io { path: path.to_path_buf(), source })
}

/// Write the dataset into an existing directory.
pub fn save_dataset(dir: &Path, ds: &Dataset) -> Result<(), DatasetError> {
    write(&dir.join(REFERENCE_FILE), &encode_image(&ds.reference).encode())?;
    let mut index = format!("{INDEX_HEADER}\n");
    for (i, s) in ds.samples.iter().enumerate() {
        let name = sample_name(i);
        write(&dir.join(&name), &encode_image(&s.image).encode())?;
        index.push_str(&format!("{name}\t{}\t{}\n", s.bending, s.twisting));
    }
    write(&dir.join(INDEX_FILE), index.as_bytes())
}

pub fn load_dataset(dir: &Path) -> Result<Dataset, DatasetError> {
    let load = |file: &str| -> Result<ChannelImage, DatasetError> {
        let bytes = read(&dir.join(file))?;
        let pnm = Pnm::decode(&bytes).map_err(|source| DatasetError::Image { file: file.to_string(), source })?;
        decode_image(&pnm).map_err(|message| DatasetError::Shape { file: file.to_string(), message })
    };
    let reference = load(REFERENCE_FILE)?;
    let index_bytes = read(&dir.join(INDEX_FILE))?;
    let text = String::from_utf8(index_bytes)
        .map_err(|_| DatasetError::Index { line: 0, message: "index is not UTF-8".into() })?;
    let mut samples = Vec::new();
    for (name, bending, twisting) in decode_index(&text)? {
        let image = load(&name)?;
        if (image.width, image.height) != (reference.width, reference.height) {
            return Err(DatasetError::Shape { file: name, message: "size differs from reference".into() });
        }
        samples.push(Sample { image, bending, twisting });
    }
    Ok(Dataset { reference, samples })
}
