//! No-reference quality heuristics: Laplacian-variance sharpness,
//! Hasler–Süsstrunk colorfulness, and mid-gray exposure distance.
//!
//! Every accumulation runs in exact integer arithmetic and converts to the
//! scalar type once at the end, so results are bit-reproducible for a given
//! raster. Luma is kept scaled by 1000 (`299R + 587G + 114B`).

use image::RgbImage;

use crate::preprocess::Thumbnail;
use crate::scalar::Scalar;

const LUMA_SCALE: i64 = 1000;

#[inline]
fn luma_milli(p: &image::Rgb<u8>) -> i64 {
    299 * p[0] as i64 + 587 * p[1] as i64 + 114 * p[2] as i64
}

fn gcd(mut a: i128, mut b: i128) -> i128 {
    while b != 0 {
        (a, b) = (b, a % b);
    }
    a.abs()
}

/// `num / den` after reducing the fraction.
fn ratio<T: Scalar>(num: i128, den: i128) -> T {
    let g = gcd(num, den).max(1);
    let (num, den) = (num / g, den / g);
    T::from_i128(num).expect("i128 converts") / T::from_i128(den).expect("i128 converts")
}

/// Population variance of the 4-neighbour Laplacian of luma, interior pixels only.
pub fn sharpness_of<T: Scalar>(img: &RgbImage) -> T {
    let (w, h) = (img.width() as usize, img.height() as usize);
    if w < 3 || h < 3 {
        return T::zero();
    }
    let luma: Vec<i64> = img.pixels().map(luma_milli).collect();
    let (mut sum, mut sum_sq) = (0i128, 0i128);
    for y in 1..h - 1 {
        for x in 1..w - 1 {
            let c = y * w + x;
            let lap = luma[c - w] + luma[c + w] + luma[c - 1] + luma[c + 1] - 4 * luma[c];
            sum += lap as i128;
            sum_sq += (lap as i128) * (lap as i128);
        }
    }
    let n = ((w - 2) * (h - 2)) as i128;
    let scale = (LUMA_SCALE as i128) * (LUMA_SCALE as i128);
    ratio(n * sum_sq - sum * sum, n * n * scale)
}

/// `sqrt(σ²_rg + σ²_yb) + 0.3 · sqrt(μ²_rg + μ²_yb)` over all pixels.
pub fn colorfulness_of<T: Scalar>(img: &RgbImage) -> T {
    let n = img.pixels().len() as i128;
    if n == 0 {
        return T::zero();
    }
    // yb is tracked doubled so it stays integral.
    let (mut s_rg, mut s_rg2, mut s_yb2, mut s_yb2sq) = (0i128, 0i128, 0i128, 0i128);
    for p in img.pixels() {
        let (r, g, b) = (p[0] as i128, p[1] as i128, p[2] as i128);
        let rg = r - g;
        let yb2 = r + g - 2 * b;
        s_rg += rg;
        s_rg2 += rg * rg;
        s_yb2 += yb2;
        s_yb2sq += yb2 * yb2;
    }
    let var_rg: T = ratio(n * s_rg2 - s_rg * s_rg, n * n);
    let var_yb: T = ratio(n * s_yb2sq - s_yb2 * s_yb2, 4 * n * n);
    let mean_rg: T = ratio(s_rg, n);
    let mean_yb: T = ratio(s_yb2, 2 * n);
    (var_rg + var_yb).sqrt() + T::lit(0.3) * (mean_rg * mean_rg + mean_yb * mean_yb).sqrt()
}

/// `-|mean_luma / 255 - 0.5|`, in `[-0.5, 0]`.
pub fn exposure_of<T: Scalar>(img: &RgbImage) -> T {
    let n = img.pixels().len() as i128;
    if n == 0 {
        return -T::lit(0.5);
    }
    let total: i128 = img.pixels().map(|p| luma_milli(p) as i128).sum();
    let mean_over_255: T = ratio(total, n * LUMA_SCALE as i128 * 255);
    -(mean_over_255 - T::lit(0.5)).abs()
}

pub fn score_sharpness<T: Scalar>(t: &Thumbnail) -> T {
    sharpness_of(&t.pixels)
}

pub fn score_colorfulness<T: Scalar>(t: &Thumbnail) -> T {
    colorfulness_of(&t.pixels)
}

pub fn score_exposure<T: Scalar>(t: &Thumbnail) -> T {
    exposure_of(&t.pixels)
}

/// Population z-scores; a constant column maps to all zeros.
pub(crate) fn z_scores<T: Scalar>(values: &[T]) -> Vec<T> {
    let first = match values.first() {
        Some(&v) => v,
        None => return Vec::new(),
    };
    if values.iter().all(|&v| v == first) {
        return vec![T::zero(); values.len()];
    }
    let n = T::from_count(values.len());
    let mean = values.iter().fold(T::zero(), |a, &v| a + v) / n;
    let var = values
        .iter()
        .fold(T::zero(), |a, &v| a + (v - mean) * (v - mean))
        / n;
    let sd = var.sqrt();
    if sd == T::zero() {
        return vec![T::zero(); values.len()];
    }
    values.iter().map(|&v| (v - mean) / sd).collect()
}

/// Equal-weight mean of in-set z-scores of the three raw dimensions.
pub fn composite_from_dimensions<T: Scalar>(dims: &[[T; 3]]) -> Vec<T> {
    let columns: Vec<Vec<T>> = (0..3)
        .map(|d| z_scores(&dims.iter().map(|row| row[d]).collect::<Vec<_>>()))
        .collect();
    let three = T::lit(3.0);
    (0..dims.len())
        .map(|i| (columns[0][i] + columns[1][i] + columns[2][i]) / three)
        .collect()
}

/// Composite score of each raster relative to the others in the slice.
pub fn composite_scores<T: Scalar>(set: &[&RgbImage]) -> Vec<T> {
    let dims: Vec<[T; 3]> = set
        .iter()
        .map(|img| [sharpness_of(img), colorfulness_of(img), exposure_of(img)])
        .collect();
    composite_from_dimensions(&dims)
}

/// Composite score of `t` within `set_context`, which must contain `t`.
pub fn score_composite<T: Scalar>(t: &Thumbnail, set_context: &[Thumbnail]) -> Option<T> {
    let idx = set_context.iter().position(|s| s.id == t.id)?;
    let rasters: Vec<_> = set_context.iter().map(|s| &s.pixels).collect();
    Some(composite_scores(&rasters)[idx])
}
