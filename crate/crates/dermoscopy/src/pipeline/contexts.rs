//! Per-sample context images: the whole image plus tight lesion crops from
//! the predicted and ground-truth masks.

use std::collections::BTreeMap;

use crate::error::{Error, Result};
use crate::imaging::{self, ImageTensor, MaskImage, MASK_THRESHOLD};
use crate::pipeline::manifest::ManifestEntry;
use crate::pipeline::store::Context;

fn crop_by_mask(img: &ImageTensor, mask: &MaskImage, sample_id: &str) -> Result<ImageTensor> {
    if mask.width != img.width || mask.height != img.height {
        return Err(Error::validation(format!(
            "{sample_id}: mask {}x{} does not match image {}x{}",
            mask.width, mask.height, img.width, img.height
        )));
    }
    match imaging::mask_bbox(mask, MASK_THRESHOLD) {
        Ok(bbox) => imaging::crop(img, bbox),
        Err(Error::EmptyMask { .. }) => {
            log::warn!("{sample_id}: empty mask, falling back to the whole image");
            Ok(img.clone())
        }
        Err(e) => Err(e),
    }
}

/// Load the entry's image and build every context its masks allow: WI always,
/// CR from the predicted mask, CRGT from the ground-truth mask. An empty mask
/// falls back to the whole image and is logged.
pub fn build_contexts(entry: &ManifestEntry) -> Result<BTreeMap<Context, ImageTensor>> {
    let image = imaging::load_image(&entry.image_path)?;
    let mut out = BTreeMap::new();
    if let Some(path) = &entry.pred_mask_path {
        let mask = imaging::load_mask(path)?;
        out.insert(Context::Crop, crop_by_mask(&image, &mask, &entry.sample_id)?);
    }
    if let Some(path) = &entry.mask_path {
        let mask = imaging::load_mask(path)?;
        out.insert(Context::CropGroundTruth, crop_by_mask(&image, &mask, &entry.sample_id)?);
    }
    out.insert(Context::WholeImage, image);
    Ok(out)
}
