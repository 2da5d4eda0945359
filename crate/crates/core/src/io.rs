//! Lossless grayscale raster I/O (PNG and binary PGM), backed by the `image` crate.

use std::path::Path;

use image::{DynamicImage, ImageBuffer, ImageFormat, ImageReader, Luma, RgbImage};

use crate::error::{Error, Result};
use crate::imagecore::{BinaryMask, BitDepth, GrayImage};

pub fn load_image(path: impl AsRef<Path>) -> Result<GrayImage> {
    let path = path.as_ref();
    if !path.exists() {
        return Err(Error::FileNotFound(path.to_path_buf()));
    }
    let reader = ImageReader::open(path)
        .map_err(|source| io_err(path, source))?
        .with_guessed_format()
        .map_err(|source| io_err(path, source))?;
    if reader.format().is_none() {
        return Err(Error::UnsupportedFormat(format!(
            "{}: unrecognized raster format",
            path.display()
        )));
    }
    let decoded = reader.decode().map_err(|e| map_image_error(path, e))?;
    let (w, h) = (decoded.width() as usize, decoded.height() as usize);
    match decoded {
        DynamicImage::ImageLuma8(buf) => GrayImage::new(
            w,
            h,
            BitDepth::Eight,
            buf.into_raw().into_iter().map(u16::from).collect(),
        ),
        DynamicImage::ImageLuma16(buf) => GrayImage::new(w, h, BitDepth::Sixteen, buf.into_raw()),
        other => Err(Error::UnsupportedFormat(format!(
            "{}: expected single-channel 8/16-bit raster, found {:?}",
            path.display(),
            other.color()
        ))),
    }
}

/// Loads a mask stored as `{0, maxval}`; `maxval` maps to a set bit.
pub fn load_mask(path: impl AsRef<Path>) -> Result<BinaryMask> {
    let img = load_image(path)?;
    mask_from_image(&img)
}

pub fn mask_from_image(img: &GrayImage) -> Result<BinaryMask> {
    let max = img.max_value();
    let bits = img
        .pixels()
        .iter()
        .map(|&v| match v {
            0 => Ok(false),
            v if v == max => Ok(true),
            value => Err(Error::NonBinaryMask { value, max }),
        })
        .collect::<Result<Vec<_>>>()?;
    BinaryMask::new(img.width(), img.height(), bits)
}

pub fn mask_to_image(mask: &BinaryMask) -> GrayImage {
    let pixels = mask.bits().iter().map(|&b| if b { 255 } else { 0 }).collect();
    GrayImage::new(mask.width(), mask.height(), BitDepth::Eight, pixels)
        .expect("mask dimensions already validated")
}

/// Writes `img` as PNG, or as binary PGM when the extension is `.pgm`/`.pnm`.
pub fn save_image(img: &GrayImage, path: impl AsRef<Path>) -> Result<()> {
    let path = path.as_ref();
    let (w, h) = (img.width() as u32, img.height() as u32);
    let dynamic = match img.depth() {
        BitDepth::Eight => {
            let raw = img.pixels().iter().map(|&v| v as u8).collect();
            DynamicImage::ImageLuma8(
                ImageBuffer::<Luma<u8>, Vec<u8>>::from_raw(w, h, raw).expect("buffer size"),
            )
        }
        BitDepth::Sixteen => DynamicImage::ImageLuma16(
            ImageBuffer::<Luma<u16>, Vec<u16>>::from_raw(w, h, img.pixels().to_vec())
                .expect("buffer size"),
        ),
    };
    dynamic
        .save_with_format(path, format_for(path))
        .map_err(|e| map_image_error(path, e))
}

pub fn save_mask(mask: &BinaryMask, path: impl AsRef<Path>) -> Result<()> {
    save_image(&mask_to_image(mask), path)
}

pub fn save_rgb(img: &RgbImage, path: impl AsRef<Path>) -> Result<()> {
    let path = path.as_ref();
    img.save_with_format(path, ImageFormat::Png)
        .map_err(|e| map_image_error(path, e))
}

fn format_for(path: &Path) -> ImageFormat {
    match path
        .extension()
        .and_then(|e| e.to_str())
        .map(|e| e.to_ascii_lowercase())
        .as_deref()
    {
        Some("pgm") | Some("pnm") => ImageFormat::Pnm,
        _ => ImageFormat::Png,
    }
}

fn io_err(path: &Path, source: std::io::Error) -> Error {
    Error::Io {
        path: path.to_path_buf(),
        source,
    }
}

fn map_image_error(path: &Path, e: image::ImageError) -> Error {
    match e {
        image::ImageError::IoError(source) => io_err(path, source),
        image::ImageError::Unsupported(u) => {
            Error::UnsupportedFormat(format!("{}: {u}", path.display()))
        }
        other => Error::CorruptData(format!("{}: {other}", path.display())),
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn eight_bit_round_trip() {
        let dir = tempfile::tempdir().unwrap();
        let img = GrayImage::new(2, 2, BitDepth::Eight, vec![0, 255, 128, 64]).unwrap();
        for name in ["a.png", "a.pgm"] {
            let p = dir.path().join(name);
            save_image(&img, &p).unwrap();
            assert_eq!(load_image(&p).unwrap(), img, "{name}");
        }
    }

    #[test]
    fn sixteen_bit_max_preserved() {
        let dir = tempfile::tempdir().unwrap();
        let img = GrayImage::new(3, 1, BitDepth::Sixteen, vec![0, 65535, 4097]).unwrap();
        for name in ["b.png", "b.pgm"] {
            let p = dir.path().join(name);
            save_image(&img, &p).unwrap();
            let back = load_image(&p).unwrap();
            assert_eq!(back.depth(), BitDepth::Sixteen);
            assert_eq!(back, img, "{name}");
        }
    }

    #[test]
    fn rgb_rejected() {
        let dir = tempfile::tempdir().unwrap();
        let p = dir.path().join("rgb.png");
        RgbImage::new(2, 2).save(&p).unwrap();
        assert!(matches!(load_image(&p), Err(Error::UnsupportedFormat(_))));
    }

    #[test]
    fn missing_and_corrupt_files() {
        let dir = tempfile::tempdir().unwrap();
        assert!(matches!(
            load_image(dir.path().join("nope.png")),
            Err(Error::FileNotFound(_))
        ));
        let p = dir.path().join("junk.png");
        let mut bytes = b"\x89PNG\r\n\x1a\n".to_vec();
        bytes.extend_from_slice(&[0u8; 20]);
        std::fs::write(&p, bytes).unwrap();
        assert!(matches!(load_image(&p), Err(Error::CorruptData(_))));
    }

    #[test]
    fn mask_thresholds_at_maxval() {
        let img = GrayImage::new(4, 1, BitDepth::Eight, vec![0, 255, 255, 0]).unwrap();
        let m = mask_from_image(&img).unwrap();
        assert_eq!(m.bits(), &[false, true, true, false]);

        let bad = GrayImage::new(2, 1, BitDepth::Eight, vec![0, 1]).unwrap();
        assert!(matches!(
            mask_from_image(&bad),
            Err(Error::NonBinaryMask { value: 1, max: 255 })
        ));

        let zero = GrayImage::filled(3, 3, BitDepth::Eight, 0).unwrap();
        assert!(mask_from_image(&zero).unwrap().is_empty());
    }

    #[test]
    fn mask_round_trip_and_unwritable_path() {
        let dir = tempfile::tempdir().unwrap();
        let m = BinaryMask::from_fn(5, 3, |x, y| (x + y) % 2 == 0).unwrap();
        let p = dir.path().join("m.png");
        save_mask(&m, &p).unwrap();
        assert_eq!(load_mask(&p).unwrap(), m);

        let bad = dir.path().join("no/such/dir/m.png");
        assert!(matches!(save_mask(&m, &bad), Err(Error::Io { .. })));
    }
}
