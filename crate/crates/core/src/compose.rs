//! 900×900 grid rendering.

use std::path::{Path, PathBuf};

use image::RgbImage;

use crate::arrange::{GridLayout, GridPosition, Strategy};
use crate::error::{Error, Result};
use crate::io;
use crate::preprocess::{ThumbnailSet, THUMB_SIDE};

pub const COMPOSITE_SIDE: u32 = 3 * THUMB_SIDE;

#[derive(Debug, Clone, PartialEq)]
pub struct Composite {
    pub set_id: String,
    pub scorer_id: String,
    pub strategy: Strategy,
    pub pixels: RgbImage,
}

impl Composite {
    pub fn file_name(&self) -> String {
        composite_file_name(&self.set_id, &self.scorer_id, self.strategy)
    }

    /// The 300×300 cell at `pos`, copied out.
    pub fn cell(&self, pos: GridPosition) -> RgbImage {
        image::imageops::crop_imm(
            &self.pixels,
            pos.col() * THUMB_SIDE,
            pos.row() * THUMB_SIDE,
            THUMB_SIDE,
            THUMB_SIDE,
        )
        .to_image()
    }
}

pub fn composite_file_name(set_id: &str, scorer_id: &str, strategy: Strategy) -> String {
    format!("composite.{set_id}.{scorer_id}.{strategy}.png")
}

/// Tiles the set's thumbnails per `layout`, no gutters.
pub fn compose_grid(set: &ThumbnailSet, layout: &GridLayout) -> Result<Composite> {
    if set.set_id != layout.set_id {
        return Err(Error::SetMismatch(format!(
            "layout for `{}` applied to set `{}`",
            layout.set_id, set.set_id
        )));
    }
    let side = THUMB_SIDE as usize;
    let stride = COMPOSITE_SIDE as usize * 3;
    let mut buf = vec![0u8; stride * COMPOSITE_SIDE as usize];
    for pos in GridPosition::all() {
        let id = layout.at(pos);
        let thumb = set.get(id).ok_or_else(|| {
            Error::SetMismatch(format!(
                "layout places `{id}`, absent from set `{}`",
                set.set_id
            ))
        })?;
        if thumb.pixels.dimensions() != (THUMB_SIDE, THUMB_SIDE) {
            return Err(Error::InvalidInput(format!(
                "thumbnail `{id}` is not 300×300"
            )));
        }
        let src = thumb.pixels.as_raw();
        let x0 = pos.col() as usize * side * 3;
        let y0 = pos.row() as usize * side;
        for row in 0..side {
            let dst = (y0 + row) * stride + x0;
            buf[dst..dst + side * 3].copy_from_slice(&src[row * side * 3..(row + 1) * side * 3]);
        }
    }
    Ok(Composite {
        set_id: set.set_id.clone(),
        scorer_id: layout.scorer_id.clone(),
        strategy: layout.strategy,
        pixels: RgbImage::from_raw(COMPOSITE_SIDE, COMPOSITE_SIDE, buf).expect("sized buffer"),
    })
}

/// Writes a lossless PNG at `path`.
pub fn write_composite(c: &Composite, path: &Path) -> Result<PathBuf> {
    io::write_png(&c.pixels, path)?;
    Ok(path.to_path_buf())
}
