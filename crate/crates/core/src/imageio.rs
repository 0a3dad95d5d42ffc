//! PNG reading and writing for `H x W x 3` tensors in `[0,1]`.

use std::path::Path;

use crate::error::{Error, Result};
use crate::numerics::Tensor;

pub fn load_png(path: &Path) -> Result<Tensor> {
    let img = image::open(path)?.to_rgb8();
    let (w, h) = (img.width() as usize, img.height() as usize);
    let data = img.into_raw().into_iter().map(|b| b as f64 / 255.0).collect();
    Tensor::new(vec![h, w, 3], data)
}

pub fn save_png(pixels: &Tensor, path: &Path) -> Result<()> {
    let s = pixels.shape();
    if s.len() != 3 || s[2] != 3 {
        return Err(Error::invalid(format!("expected an H x W x 3 image, got shape {s:?}")));
    }
    let bytes: Vec<u8> = pixels.data().iter().map(|v| (v.clamp(0.0, 1.0) * 255.0).round() as u8).collect();
    let img = image::RgbImage::from_raw(s[1] as u32, s[0] as u32, bytes).expect("buffer matches shape");
    img.save(path)?;
    Ok(())
}
