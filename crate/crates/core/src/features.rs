//! Sky-image statistics (nRBR mean, spread and Rényi entropy) and the
//! clear-sky index.

use std::io::{BufRead, BufReader, Read, Write};
use std::path::Path;

use chrono::NaiveDate;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::data::Dataset;

/// Histogram resolution for the entropy feature.
pub const ENTROPY_BINS: usize = 150;
/// Order of the Rényi entropy.
pub const ENTROPY_ORDER: u32 = 2;

#[derive(Debug, Error)]
pub enum FeatureError {
    #[error("not a binary PPM (P6) file")]
    BadMagic,
    #[error("pixel data truncated: expected {expected} bytes, found {found}")]
    TruncatedPixelData { expected: usize, found: usize },
    #[error("unsupported maxval {0}")]
    UnsupportedMaxval(u32),
    #[error("malformed header: {0}")]
    BadHeader(String),
    #[error("image has no pixels")]
    EmptyImage,
    #[error("no values to histogram")]
    EmptyInput,
    #[error("invalid histogram parameters: bins={bins}, order={order}")]
    BadParameters { bins: usize, order: u32 },
    #[error(transparent)]
    Io(#[from] std::io::Error),
    #[error(transparent)]
    Csv(#[from] csv::Error),
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ImageRgb {
    pub width: usize,
    pub height: usize,
    /// Row-major RGB triples.
    pub pixels: Vec<[u8; 3]>,
}

impl ImageRgb {
    pub fn from_pixels(width: usize, height: usize, pixels: Vec<[u8; 3]>) -> Self {
        assert_eq!(width * height, pixels.len(), "pixel count must equal width*height");
        Self { width, height, pixels }
    }

    pub fn filled(width: usize, height: usize, rgb: [u8; 3]) -> Self {
        Self { width, height, pixels: vec![rgb; width * height] }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct NrbrSummary {
    pub mu: f64,
    pub sigma: f64,
    pub entropy: f64,
}

fn read_token<R: BufRead>(r: &mut R) -> Result<String, FeatureError> {
    let mut tok = Vec::new();
    let mut byte = [0u8; 1];
    loop {
        if r.read(&mut byte)? == 0 {
            break;
        }
        match byte[0] {
            b'#' if tok.is_empty() => {
                let mut sink = Vec::new();
                r.read_until(b'\n', &mut sink)?;
            }
            c if c.is_ascii_whitespace() => {
                if !tok.is_empty() {
                    break;
                }
            }
            c => tok.push(c),
        }
    }
    String::from_utf8(tok).map_err(|_| FeatureError::BadHeader("non-ascii token".into()))
}

/// Decodes a binary PPM (P6, maxval 255).
pub fn read_ppm<R: Read>(reader: R) -> Result<ImageRgb, FeatureError> {
    let mut r = BufReader::new(reader);
    let mut magic = [0u8; 2];
    if r.read_exact(&mut magic).is_err() || &magic != b"P6" {
        return Err(FeatureError::BadMagic);
    }
    let mut field = |name: &str| -> Result<u32, FeatureError> {
        let tok = read_token(&mut r)?;
        tok.parse().map_err(|_| FeatureError::BadHeader(format!("{name} = {tok:?}")))
    };
    let width = field("width")? as usize;
    let height = field("height")? as usize;
    let maxval = field("maxval")?;
    if maxval != 255 {
        return Err(FeatureError::UnsupportedMaxval(maxval));
    }
    // read_token consumed the single whitespace byte after maxval
    let expected = width * height * 3;
    let mut data = Vec::with_capacity(expected);
    r.take(expected as u64).read_to_end(&mut data)?;
    if data.len() < expected {
        return Err(FeatureError::TruncatedPixelData { expected, found: data.len() });
    }
    let pixels = data.chunks_exact(3).map(|c| [c[0], c[1], c[2]]).collect();
    Ok(ImageRgb { width, height, pixels })
}

pub fn load_image_ppm(path: impl AsRef<Path>) -> Result<ImageRgb, FeatureError> {
    read_ppm(std::fs::File::open(path)?)
}

pub fn write_ppm<W: Write>(img: &ImageRgb, mut w: W) -> std::io::Result<()> {
    write!(w, "P6\n{} {}\n255\n", img.width, img.height)?;
    for p in &img.pixels {
        w.write_all(p)?;
    }
    Ok(())
}

/// Normalized red-blue ratio of one pixel; black-ish pixels with R+B = 0 map to 0.
pub fn nrbr(rgb: [u8; 3]) -> f64 {
    let (r, b) = (rgb[0] as f64, rgb[2] as f64);
    if r + b == 0.0 {
        0.0
    } else {
        (r - b) / (r + b)
    }
}

/// Mean and population standard deviation of per-pixel nRBR.
///
/// The `entropy` field is left at zero; see [`image_features`] for all three.
pub fn nrbr_stats(img: &ImageRgb) -> Result<NrbrSummary, FeatureError> {
    if img.pixels.is_empty() {
        return Err(FeatureError::EmptyImage);
    }
    let n = img.pixels.len() as f64;
    let mu = img.pixels.iter().map(|p| nrbr(*p)).sum::<f64>() / n;
    let var = img.pixels.iter().map(|p| (nrbr(*p) - mu).powi(2)).sum::<f64>() / n;
    Ok(NrbrSummary { mu, sigma: var.sqrt(), entropy: 0.0 })
}

/// Rényi entropy (natural log) of a histogram with `bins` equal bins over [-1, 1].
///
/// Values outside the domain are clamped into the edge bins.
pub fn renyi_entropy(values: &[f64], bins: usize, order: u32) -> Result<f64, FeatureError> {
    if bins < 2 || order < 2 {
        return Err(FeatureError::BadParameters { bins, order });
    }
    if values.is_empty() {
        return Err(FeatureError::EmptyInput);
    }
    let mut counts = vec![0usize; bins];
    let width = 2.0 / bins as f64;
    for v in values {
        let idx = (((v + 1.0) / width).floor().max(0.0) as usize).min(bins - 1);
        counts[idx] += 1;
    }
    let n = values.len() as f64;
    let g = order as i32;
    let power_sum: f64 = counts.iter().map(|&c| (c as f64 / n).powi(g)).sum();
    // 1/(1-g) * ln(sum); clamp tiny negative rounding to zero
    Ok((power_sum.ln() / (1.0 - g as f64)).max(0.0))
}

/// Mean, standard deviation and order-2 entropy of the image's nRBR values.
pub fn image_features(img: &ImageRgb) -> Result<NrbrSummary, FeatureError> {
    let mut s = nrbr_stats(img)?;
    let values: Vec<f64> = img.pixels.iter().map(|p| nrbr(*p)).collect();
    s.entropy = renyi_entropy(&values, ENTROPY_BINS, ENTROPY_ORDER)?;
    Ok(s)
}

/// Ratio of measured to clear-sky GHI, zero when the clear-sky value is zero.
pub fn clear_sky_index(ghi: f64, ghi_clr: f64) -> f64 {
    if ghi_clr <= 0.0 {
        0.0
    } else {
        ghi / ghi_clr
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ImageFeatureRow {
    pub date: NaiveDate,
    pub hour: u32,
    pub img_mu: f64,
    pub img_sigma: f64,
    pub img_entropy: f64,
}

/// Computes image features for every record that references an image but
/// lacks the three `img_*` values, filling them in place. Relative image
/// paths are resolved against `base_dir`.
pub fn extract_image_features(
    ds: &mut Dataset,
    base_dir: &Path,
) -> Result<Vec<ImageFeatureRow>, FeatureError> {
    let mut rows = Vec::new();
    for rec in ds.days.iter_mut().flat_map(|d| d.records.iter_mut()) {
        let Some(path) = rec.image_path.clone() else { continue };
        if rec.img_mu.is_some() && rec.img_sigma.is_some() && rec.img_entropy.is_some() {
            continue;
        }
        let img = load_image_ppm(base_dir.join(path))?;
        let s = image_features(&img)?;
        rec.img_mu = Some(s.mu);
        rec.img_sigma = Some(s.sigma);
        rec.img_entropy = Some(s.entropy);
        rows.push(ImageFeatureRow {
            date: rec.date(),
            hour: rec.hour(),
            img_mu: s.mu,
            img_sigma: s.sigma,
            img_entropy: s.entropy,
        });
    }
    Ok(rows)
}

/// Writes `date,hour,img_mu,img_sigma,img_entropy`.
pub fn write_feature_csv<W: Write>(rows: &[ImageFeatureRow], w: W) -> Result<(), FeatureError> {
    let mut w = csv::Writer::from_writer(w);
    for r in rows {
        w.serialize(r)?;
    }
    w.flush()?;
    Ok(())
}
