use std::path::Path;

use image::{GrayImage, ImageBuffer, Luma, RgbImage};

use crate::geometry::{Mask, RgbdImage};

use super::{read_file, write_file, IoError};

/// Meters to 16-bit millimeters, rounding half to even. Invalid depth is 0;
/// depths beyond 65.535 m saturate.
pub fn depth_to_mm(d: f64) -> u16 {
    if !(d.is_finite() && d > 0.0) {
        return 0;
    }
    (d * 1000.0).round_ties_even().min(u16::MAX as f64) as u16
}

pub fn depth_from_mm(mm: u16) -> f64 {
    mm as f64 / 1000.0
}

fn encode_png<P, C>(img: &ImageBuffer<P, C>, path: &Path) -> Result<(), IoError>
where
    P: image::Pixel + image::PixelWithColorType,
    [P::Subpixel]: image::EncodableLayout,
    C: std::ops::Deref<Target = [P::Subpixel]>,
{
    let mut bytes = Vec::new();
    img.write_to(&mut std::io::Cursor::new(&mut bytes), image::ImageFormat::Png).map_err(|e| IoError::invalid(path, e))?;
    write_file(path, &bytes)
}

fn decode(path: &Path) -> Result<image::DynamicImage, IoError> {
    let bytes = read_file(path)?;
    image::load_from_memory_with_format(&bytes, image::ImageFormat::Png).map_err(|e| IoError::parse(path, None, None, e.to_string()))
}

pub fn save_rgb(path: impl AsRef<Path>, img: &RgbdImage) -> Result<(), IoError> {
    let (w, h) = img.dims();
    let raw: Vec<u8> = img.rgb().iter().flatten().copied().collect();
    let buf = RgbImage::from_raw(w as u32, h as u32, raw).expect("buffer size");
    encode_png(&buf, path.as_ref())
}

pub fn save_depth(path: impl AsRef<Path>, img: &RgbdImage) -> Result<(), IoError> {
    let (w, h) = img.dims();
    let raw: Vec<u16> = img.depth().iter().map(|d| depth_to_mm(*d)).collect();
    let buf: ImageBuffer<Luma<u16>, Vec<u16>> = ImageBuffer::from_raw(w as u32, h as u32, raw).expect("buffer size");
    encode_png(&buf, path.as_ref())
}

/// Writes `<stem>.png` and `<stem>_depth.png` into `dir`.
pub fn save_rgbd(dir: impl AsRef<Path>, stem: &str, img: &RgbdImage) -> Result<(), IoError> {
    let dir = dir.as_ref();
    save_rgb(dir.join(format!("{stem}.png")), img)?;
    save_depth(dir.join(format!("{stem}_depth.png")), img)
}

pub fn save_mask(path: impl AsRef<Path>, mask: &Mask) -> Result<(), IoError> {
    let (w, h) = mask.dims();
    let raw = mask.data().iter().map(|m| if *m { 255 } else { 0 }).collect();
    encode_png(&GrayImage::from_raw(w as u32, h as u32, raw).expect("buffer size"), path.as_ref())
}

pub fn load_rgb(path: impl AsRef<Path>) -> Result<(usize, usize, Vec<[u8; 3]>), IoError> {
    let img = decode(path.as_ref())?.into_rgb8();
    let (w, h) = img.dimensions();
    Ok((w as usize, h as usize, img.pixels().map(|p| p.0).collect()))
}

pub fn load_depth(path: impl AsRef<Path>) -> Result<(usize, usize, Vec<f64>), IoError> {
    let path = path.as_ref();
    let img = decode(path)?;
    if !matches!(img.color(), image::ColorType::L16) {
        return Err(IoError::invalid(path, format!("depth must be 16-bit grayscale, found {:?}", img.color())));
    }
    let img = img.into_luma16();
    let (w, h) = img.dimensions();
    Ok((w as usize, h as usize, img.pixels().map(|p| depth_from_mm(p.0[0])).collect()))
}

pub fn load_rgbd(rgb: impl AsRef<Path>, depth: impl AsRef<Path>) -> Result<RgbdImage, IoError> {
    let (w, h, c) = load_rgb(rgb)?;
    let depth = depth.as_ref();
    let (dw, dh, d) = load_depth(depth)?;
    if (w, h) != (dw, dh) {
        return Err(IoError::invalid(depth, format!("depth is {dw}x{dh} but color is {w}x{h}")));
    }
    RgbdImage::new(w, h, c, d).map_err(|e| IoError::invalid(depth, e))
}

/// Any nonzero gray value is inside the mask.
pub fn load_mask(path: impl AsRef<Path>) -> Result<Mask, IoError> {
    let path = path.as_ref();
    let img = decode(path)?.into_luma8();
    let (w, h) = img.dimensions();
    Mask::new(w as usize, h as usize, img.pixels().map(|p| p.0[0] > 0).collect()).map_err(|e| IoError::invalid(path, e))
}
