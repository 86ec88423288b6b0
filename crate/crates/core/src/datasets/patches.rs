use std::path::Path;

use image::RgbImage;
use serde::{Deserialize, Serialize};

use super::{write_atomic, FeatureMode};
use crate::error::{Error, Result};
use crate::model::{Dataset, PatchRef};

/// Tiling of a scene into square patches. Only patches that fit entirely
/// inside the image are kept.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct PatchGrid {
    pub patch_size: u32,
    pub stride: u32,
    pub width: u32,
    pub height: u32,
    pub channels: u32,
}

impl PatchGrid {
    /// Non-overlapping 30 pixel RGB patches over a `width`×`height` scene.
    pub fn new(width: u32, height: u32) -> Self {
        Self {
            patch_size: 30,
            stride: 30,
            width,
            height,
            channels: 3,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.patch_size == 0 {
            return Err(Error::config("patch_size", "must be at least 1"));
        }
        if self.stride == 0 {
            return Err(Error::config("stride", "must be at least 1"));
        }
        if self.channels != 3 {
            return Err(Error::config("channels", "must be 3 (RGB)"));
        }
        Ok(())
    }

    fn fit(extent: u32, patch: u32, stride: u32) -> u32 {
        if extent < patch {
            0
        } else {
            (extent - patch) / stride + 1
        }
    }

    pub fn rows(&self) -> u32 {
        Self::fit(self.height, self.patch_size, self.stride)
    }

    pub fn cols(&self) -> u32 {
        Self::fit(self.width, self.patch_size, self.stride)
    }

    pub fn cells(&self) -> usize {
        self.rows() as usize * self.cols() as usize
    }

    pub fn feature_dim(&self, mode: FeatureMode) -> usize {
        let per_patch = (self.patch_size * self.patch_size * self.channels) as usize;
        match mode {
            FeatureMode::Concat => 2 * per_patch,
            FeatureMode::AbsDiff => per_patch,
        }
    }

    pub fn cell_id(row: u32, col: u32) -> String {
        format!("r{row}_c{col}")
    }

    /// Row-major cell origins `(row, col, x, y)`.
    fn cells_iter(&self) -> impl Iterator<Item = (u32, u32, u32, u32)> + '_ {
        (0..self.rows()).flat_map(move |r| {
            (0..self.cols()).map(move |c| (r, c, c * self.stride, r * self.stride))
        })
    }
}

fn check_pair(reference: &RgbImage, test: &RgbImage, grid: &PatchGrid) -> Result<()> {
    grid.validate()?;
    if reference.dimensions() != test.dimensions() {
        return Err(Error::InvalidArgument(format!(
            "reference is {:?} but test is {:?}",
            reference.dimensions(),
            test.dimensions()
        )));
    }
    if reference.dimensions() != (grid.width, grid.height) {
        return Err(Error::InvalidArgument(format!(
            "grid is for {}x{} but images are {:?}",
            grid.width,
            grid.height,
            reference.dimensions()
        )));
    }
    Ok(())
}

/// Decodes a registered image pair as RGB.
pub fn load_image_pair(reference: &Path, test: &Path) -> Result<(RgbImage, RgbImage)> {
    let open = |p: &Path| -> Result<RgbImage> {
        let img = image::open(p).map_err(|e| match e {
            image::ImageError::IoError(io) => Error::io(format!("reading {}", p.display()), io),
            other => Error::io(
                format!("decoding {}", p.display()),
                std::io::Error::new(std::io::ErrorKind::InvalidData, other),
            ),
        })?;
        Ok(img.to_rgb8())
    };
    Ok((open(reference)?, open(test)?))
}

fn patch_pixels(img: &RgbImage, x0: u32, y0: u32, p: u32) -> impl Iterator<Item = image::Rgb<u8>> + '_ {
    (y0..y0 + p).flat_map(move |y| (x0..x0 + p).map(move |x| *img.get_pixel(x, y)))
}

/// One feature row per grid cell, in row-major grid order, with intensities
/// scaled to `[0, 1]`. Ids are `r{row}_c{col}`; patch references point at
/// `patches/{id}/ref.png` and `patches/{id}/test.png`.
pub fn extract_patch_pairs(
    reference: &RgbImage,
    test: &RgbImage,
    grid: &PatchGrid,
    mode: FeatureMode,
) -> Result<Dataset> {
    check_pair(reference, test, grid)?;
    let d = grid.feature_dim(mode);
    let mut features = Vec::with_capacity(grid.cells() * d);
    let mut ids = Vec::with_capacity(grid.cells());
    let mut refs = Vec::with_capacity(grid.cells());
    let p = grid.patch_size;
    for (r, c, x0, y0) in grid.cells_iter() {
        let pixels = |img| patch_pixels(img, x0, y0, p);
        match mode {
            FeatureMode::Concat => {
                for img in [reference, test] {
                    for px in pixels(img) {
                        features.extend(px.0.iter().map(|&v| f32::from(v) / 255.0));
                    }
                }
            }
            FeatureMode::AbsDiff => {
                for (a, b) in pixels(reference).zip(pixels(test)) {
                    features.extend(
                        a.0.iter()
                            .zip(b.0.iter())
                            .map(|(&u, &v)| f32::from(u.abs_diff(v)) / 255.0),
                    );
                }
            }
        }
        let id = PatchGrid::cell_id(r, c);
        refs.push(PatchRef {
            grid_row: r,
            grid_col: c,
            reference: format!("patches/{id}/ref.png"),
            test: format!("patches/{id}/test.png"),
        });
        ids.push(id);
    }
    Dataset::new(features, d, ids, Some(refs))
}

/// Writes each cell's two patches as PNG files under `dir`, at the paths
/// recorded by [`extract_patch_pairs`].
pub fn write_patch_images(
    reference: &RgbImage,
    test: &RgbImage,
    grid: &PatchGrid,
    dir: &Path,
) -> Result<()> {
    check_pair(reference, test, grid)?;
    let p = grid.patch_size;
    for (r, c, x0, y0) in grid.cells_iter() {
        let id = PatchGrid::cell_id(r, c);
        for (img, side) in [(reference, "ref"), (test, "test")] {
            let patch = image::imageops::crop_imm(img, x0, y0, p, p).to_image();
            let mut bytes = Vec::new();
            patch
                .write_to(&mut std::io::Cursor::new(&mut bytes), image::ImageFormat::Png)
                .map_err(|e| Error::Format(format!("encoding patch {id}: {e}")))?;
            write_atomic(&dir.join(format!("patches/{id}/{side}.png")), &bytes)?;
        }
    }
    Ok(())
}
