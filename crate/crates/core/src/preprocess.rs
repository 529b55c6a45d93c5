//! Square cropping and thumbnail reduction.
//!
//! Vertical images keep their top-left square, horizontal images keep the
//! horizontally centered square, square images pass through uncropped. Every
//! square is then resampled to a 300×300 thumbnail: area averaging when
//! shrinking, bilinear interpolation when enlarging.

use std::collections::HashSet;
use std::fs;
use std::path::{Path, PathBuf};

use image::{DynamicImage, RgbImage};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::io;

/// Side length of every thumbnail in pixels.
pub const THUMB_SIDE: u32 = 300;

/// Number of images in a nine-grid set.
pub const SET_SIZE: usize = 9;

/// A decoded source image. Pixels are RGB8, row-major.
#[derive(Debug, Clone, PartialEq)]
pub struct SourceImage {
    pub id: String,
    pub pixels: RgbImage,
}

impl SourceImage {
    pub fn new(id: impl Into<String>, pixels: RgbImage) -> Result<Self> {
        if pixels.width() == 0 || pixels.height() == 0 {
            return Err(Error::InvalidInput("image has a zero dimension".into()));
        }
        Ok(SourceImage {
            id: id.into(),
            pixels,
        })
    }

    /// Builds an image from a raw `width × height × 3` RGB buffer.
    pub fn from_raw(id: impl Into<String>, width: u32, height: u32, data: Vec<u8>) -> Result<Self> {
        let expected = width as usize * height as usize * 3;
        if data.len() != expected {
            return Err(Error::InvalidInput(format!(
                "pixel buffer holds {} bytes, expected {expected}",
                data.len()
            )));
        }
        let pixels = RgbImage::from_raw(width, height, data)
            .ok_or_else(|| Error::InvalidInput("bad raster dimensions".into()))?;
        Self::new(id, pixels)
    }

    /// Decodes a PNG or JPEG file. Alpha is flattened over white.
    pub fn open(id: impl Into<String>, path: &Path) -> Result<Self> {
        let decoded = image::ImageReader::open(path)?
            .with_guessed_format()?
            .decode()?;
        Self::new(id, flatten_alpha(decoded))
    }

    pub fn width(&self) -> u32 {
        self.pixels.width()
    }

    pub fn height(&self) -> u32 {
        self.pixels.height()
    }
}

/// Drops the alpha channel by compositing over a white background.
pub fn flatten_alpha(img: DynamicImage) -> RgbImage {
    if !img.color().has_alpha() {
        return img.to_rgb8();
    }
    let rgba = img.to_rgba8();
    let mut out = RgbImage::new(rgba.width(), rgba.height());
    for (dst, src) in out.pixels_mut().zip(rgba.pixels()) {
        let a = src[3] as u32;
        for c in 0..3 {
            dst[c] = ((src[c] as u32 * a + 255 * (255 - a) + 127) / 255) as u8;
        }
    }
    out
}

/// Square window within a source image.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct CropSpec {
    pub x: u32,
    pub y: u32,
    pub side: u32,
}

/// Largest square window for a `width × height` image.
pub fn compute_crop(width: u32, height: u32) -> Result<CropSpec> {
    if width == 0 || height == 0 {
        return Err(Error::InvalidInput(format!(
            "cannot crop a {width}×{height} image"
        )));
    }
    let side = width.min(height);
    // Horizontal images are centered; vertical and square ones anchor top-left.
    let x = if width > height {
        (width - height) / 2
    } else {
        0
    };
    Ok(CropSpec { x, y: 0, side })
}

/// Copies the window described by `spec` out of `img`, bit for bit.
pub fn apply_crop(img: &RgbImage, spec: CropSpec) -> Result<RgbImage> {
    let in_bounds = spec.side > 0
        && (spec.x as u64 + spec.side as u64) <= img.width() as u64
        && (spec.y as u64 + spec.side as u64) <= img.height() as u64;
    if !in_bounds {
        return Err(Error::InvalidInput(format!(
            "crop {spec:?} exceeds {}×{} image",
            img.width(),
            img.height()
        )));
    }
    Ok(image::imageops::crop_imm(img, spec.x, spec.y, spec.side, spec.side).to_image())
}

/// One contributing source sample for an output sample.
#[derive(Debug, Clone, Copy)]
struct Tap {
    index: usize,
    weight: f64,
}

fn area_taps(src: usize, dst: usize) -> Vec<Vec<Tap>> {
    let scale = src as f64 / dst as f64;
    (0..dst)
        .map(|o| {
            let start = o as f64 * scale;
            let end = (o + 1) as f64 * scale;
            let first = start.floor() as usize;
            let last = (end.ceil() as usize).min(src);
            (first..last)
                .filter_map(|i| {
                    let overlap = end.min((i + 1) as f64) - start.max(i as f64);
                    (overlap > 0.0).then_some(Tap {
                        index: i,
                        weight: overlap,
                    })
                })
                .collect()
        })
        .collect()
}

fn bilinear_taps(src: usize, dst: usize) -> Vec<Vec<Tap>> {
    let scale = src as f64 / dst as f64;
    let max = (src - 1) as f64;
    (0..dst)
        .map(|o| {
            let center = ((o as f64 + 0.5) * scale - 0.5).clamp(0.0, max);
            let i0 = center.floor() as usize;
            let i1 = (i0 + 1).min(src - 1);
            let frac = center - i0 as f64;
            vec![
                Tap {
                    index: i0,
                    weight: 1.0 - frac,
                },
                Tap {
                    index: i1,
                    weight: frac,
                },
            ]
        })
        .collect()
}

fn apply_taps(values: impl Fn(usize) -> f64, taps: &[Tap]) -> f64 {
    let (sum, norm) = taps.iter().fold((0.0, 0.0), |(s, n), t| {
        (s + values(t.index) * t.weight, n + t.weight)
    });
    sum / norm
}

/// Resamples a square raster to `target × target`.
pub fn resize_square(sq: &RgbImage, target: u32) -> Result<RgbImage> {
    if sq.width() == 0 || sq.height() == 0 || target == 0 {
        return Err(Error::InvalidInput("cannot resize an empty raster".into()));
    }
    if sq.width() != sq.height() {
        return Err(Error::InvalidInput(format!(
            "expected a square raster, got {}×{}",
            sq.width(),
            sq.height()
        )));
    }
    if sq.width() == target {
        return Ok(sq.clone());
    }
    let src = sq.width() as usize;
    let dst = target as usize;
    let taps = if dst < src {
        area_taps(src, dst)
    } else {
        bilinear_taps(src, dst)
    };
    let raw = sq.as_raw();

    // Horizontal pass into a src-rows × dst-cols float buffer.
    let mut horiz = vec![0.0f64; src * dst * 3];
    for y in 0..src {
        for (x, col_taps) in taps.iter().enumerate() {
            for c in 0..3 {
                horiz[(y * dst + x) * 3 + c] =
                    apply_taps(|i| raw[(y * src + i) * 3 + c] as f64, col_taps);
            }
        }
    }

    let mut out = vec![0u8; dst * dst * 3];
    for (y, row_taps) in taps.iter().enumerate() {
        for x in 0..dst {
            for c in 0..3 {
                let v = apply_taps(|i| horiz[(i * dst + x) * 3 + c], row_taps);
                out[(y * dst + x) * 3 + c] = v.round().clamp(0.0, 255.0) as u8;
            }
        }
    }
    Ok(RgbImage::from_raw(target, target, out).expect("buffer sized for target"))
}

/// A 300×300 square thumbnail.
#[derive(Debug, Clone, PartialEq)]
pub struct Thumbnail {
    pub id: String,
    pub pixels: RgbImage,
}

impl Thumbnail {
    pub fn new(id: impl Into<String>, pixels: RgbImage) -> Result<Self> {
        if pixels.dimensions() != (THUMB_SIDE, THUMB_SIDE) {
            return Err(Error::InvalidInput(format!(
                "thumbnail must be {THUMB_SIDE}×{THUMB_SIDE}, got {}×{}",
                pixels.width(),
                pixels.height()
            )));
        }
        Ok(Thumbnail {
            id: id.into(),
            pixels,
        })
    }

    /// Crop to the largest square, then resample to 300×300.
    pub fn from_source(img: &SourceImage) -> Result<Self> {
        let spec = compute_crop(img.width(), img.height())?;
        let square = apply_crop(&img.pixels, spec)?;
        Thumbnail::new(img.id.clone(), resize_square(&square, THUMB_SIDE)?)
    }
}

/// Nine thumbnails in their original input order.
#[derive(Debug, Clone, PartialEq)]
pub struct ThumbnailSet {
    pub set_id: String,
    pub thumbs: Vec<Thumbnail>,
    /// `order[i]` is the input position of `thumbs[i]`.
    pub order: Vec<usize>,
}

impl ThumbnailSet {
    pub fn new(set_id: impl Into<String>, thumbs: Vec<Thumbnail>) -> Result<Self> {
        check_ids(thumbs.iter().map(|t| t.id.as_str()))?;
        let order = (0..thumbs.len()).collect();
        Ok(ThumbnailSet {
            set_id: set_id.into(),
            thumbs,
            order,
        })
    }

    /// Ids in input order.
    pub fn ids(&self) -> Vec<String> {
        let mut ids = vec![String::new(); self.thumbs.len()];
        for (thumb, &pos) in self.thumbs.iter().zip(&self.order) {
            ids[pos] = thumb.id.clone();
        }
        ids
    }

    pub fn get(&self, id: &str) -> Option<&Thumbnail> {
        self.thumbs.iter().find(|t| t.id == id)
    }

    /// Loads thumbnails listed in `<dir>/set.json`.
    pub fn load(dir: &Path) -> Result<Self> {
        let manifest = SetManifest::load(dir)?;
        let mut entries = manifest.images.clone();
        entries.sort_by_key(|e| e.order);
        let thumbs = entries
            .iter()
            .map(|e| {
                let path = dir.join(thumb_file_name(&e.id));
                let img = image::open(&path)?.to_rgb8();
                Thumbnail::new(e.id.clone(), img)
            })
            .collect::<Result<Vec<_>>>()?;
        ThumbnailSet::new(manifest.set_id, thumbs)
    }

    /// Writes `<id>.thumb.png` files and the `set.json` manifest into `dir`.
    pub fn save(&self, dir: &Path, sources: &[PathBuf]) -> Result<SetManifest> {
        fs::create_dir_all(dir).map_err(|source| Error::Write {
            path: dir.to_path_buf(),
            source,
        })?;
        let mut images = Vec::with_capacity(self.thumbs.len());
        for (i, (thumb, &order)) in self.thumbs.iter().zip(&self.order).enumerate() {
            io::write_png(&thumb.pixels, &dir.join(thumb_file_name(&thumb.id)))?;
            images.push(SetEntry {
                id: thumb.id.clone(),
                source: sources.get(i).cloned().unwrap_or_default(),
                order,
            });
        }
        let manifest = SetManifest {
            set_id: self.set_id.clone(),
            images,
        };
        io::write_json(&dir.join(SET_MANIFEST), &manifest)?;
        Ok(manifest)
    }
}

pub const SET_MANIFEST: &str = "set.json";

pub fn thumb_file_name(id: &str) -> String {
    format!("{id}.thumb.png")
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SetEntry {
    pub id: String,
    pub source: PathBuf,
    pub order: usize,
}

/// Contents of `set.json`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SetManifest {
    pub set_id: String,
    pub images: Vec<SetEntry>,
}

impl SetManifest {
    pub fn load(dir: &Path) -> Result<Self> {
        io::read_json(&dir.join(SET_MANIFEST))
    }

    /// Ids in input order.
    pub fn ids(&self) -> Vec<String> {
        let mut entries: Vec<_> = self.images.iter().collect();
        entries.sort_by_key(|e| e.order);
        entries.into_iter().map(|e| e.id.clone()).collect()
    }
}

fn check_ids<'a>(ids: impl ExactSizeIterator<Item = &'a str>) -> Result<()> {
    if ids.len() != SET_SIZE {
        return Err(Error::SetSize { found: ids.len() });
    }
    let mut seen = HashSet::new();
    for id in ids {
        if !seen.insert(id) {
            return Err(Error::DuplicateId(id.to_string()));
        }
    }
    Ok(())
}

/// Crops and resizes nine source images into a thumbnail set.
pub fn preprocess_set(images: &[SourceImage], set_id: &str) -> Result<ThumbnailSet> {
    check_ids(images.iter().map(|i| i.id.as_str()))?;
    let thumbs = images
        .iter()
        .map(Thumbnail::from_source)
        .collect::<Result<Vec<_>>>()?;
    ThumbnailSet::new(set_id, thumbs)
}
