//! IDX image and label files.
//!
//! The IDX container stores a big-endian header — magic number, then one
//! u32 per dimension — followed by raw `u8` payload. Images use magic
//! `0x0000_0803` (three dimensions: count, rows, cols); labels use
//! `0x0000_0801` (one dimension). Readers validate the magic and the exact
//! payload length so truncated or mislabeled files fail loudly instead of
//! producing garbage tensors.

use std::fs::File;
use std::io::{BufReader, BufWriter, Read, Write};
use std::path::Path;

use byteorder::{BigEndian, ReadBytesExt, WriteBytesExt};

use crate::error::{Error, Result};
use crate::ndnum::Matrix;

const IMAGE_MAGIC: u32 = 0x0000_0803;
const LABEL_MAGIC: u32 = 0x0000_0801;

/// A set of equally sized grayscale images, pixels row-major per image.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct IdxImageSet {
    count: usize,
    rows: usize,
    cols: usize,
    pixels: Vec<u8>,
}

impl IdxImageSet {
    /// Build from raw parts; `pixels.len()` must equal
    /// `count * rows * cols`.
    pub fn new(count: usize, rows: usize, cols: usize, pixels: Vec<u8>) -> Result<Self> {
        let expected = count * rows * cols;
        if pixels.len() != expected {
            return Err(Error::Shape(format!(
                "{} pixels for {count} images of {rows}x{cols} (expected {expected})",
                pixels.len()
            )));
        }
        Ok(Self {
            count,
            rows,
            cols,
            pixels,
        })
    }

    pub fn count(&self) -> usize {
        self.count
    }

    pub fn rows(&self) -> usize {
        self.rows
    }

    pub fn cols(&self) -> usize {
        self.cols
    }

    /// All pixels, image-major.
    pub fn pixels(&self) -> &[u8] {
        &self.pixels
    }

    /// One image's pixels, row-major.
    pub fn image(&self, index: usize) -> &[u8] {
        assert!(index < self.count, "image {index} of {}", self.count);
        let size = self.rows * self.cols;
        &self.pixels[index * size..(index + 1) * size]
    }
}

/// Read an IDX image file.
pub fn load_idx_images(path: &Path) -> Result<IdxImageSet> {
    let mut reader = BufReader::new(File::open(path)?);
    let magic = reader.read_u32::<BigEndian>()?;
    if magic != IMAGE_MAGIC {
        return Err(Error::Format(format!(
            "{}: image magic mismatch: found 0x{magic:08x}, expected 0x{IMAGE_MAGIC:08x}",
            path.display()
        )));
    }
    let count = reader.read_u32::<BigEndian>()? as usize;
    let rows = reader.read_u32::<BigEndian>()? as usize;
    let cols = reader.read_u32::<BigEndian>()? as usize;
    let expected = count * rows * cols;
    let mut pixels = Vec::new();
    reader.read_to_end(&mut pixels)?;
    if pixels.len() != expected {
        return Err(Error::Format(format!(
            "{}: payload holds {} bytes, header promises {expected} \
             ({count} images of {rows}x{cols})",
            path.display(),
            pixels.len()
        )));
    }
    IdxImageSet::new(count, rows, cols, pixels)
}

/// Read an IDX label file.
pub fn load_idx_labels(path: &Path) -> Result<Vec<u8>> {
    let mut reader = BufReader::new(File::open(path)?);
    let magic = reader.read_u32::<BigEndian>()?;
    if magic != LABEL_MAGIC {
        return Err(Error::Format(format!(
            "{}: label magic mismatch: found 0x{magic:08x}, expected 0x{LABEL_MAGIC:08x}",
            path.display()
        )));
    }
    let count = reader.read_u32::<BigEndian>()? as usize;
    let mut labels = Vec::new();
    reader.read_to_end(&mut labels)?;
    if labels.len() != count {
        return Err(Error::Format(format!(
            "{}: payload holds {} labels, header promises {count}",
            path.display(),
            labels.len()
        )));
    }
    Ok(labels)
}

/// Write an IDX image file.
pub fn write_idx_images(path: &Path, images: &IdxImageSet) -> Result<()> {
    let mut writer = BufWriter::new(File::create(path)?);
    writer.write_u32::<BigEndian>(IMAGE_MAGIC)?;
    writer.write_u32::<BigEndian>(images.count as u32)?;
    writer.write_u32::<BigEndian>(images.rows as u32)?;
    writer.write_u32::<BigEndian>(images.cols as u32)?;
    writer.write_all(&images.pixels)?;
    writer.flush()?;
    Ok(())
}

/// Write an IDX label file.
pub fn write_idx_labels(path: &Path, labels: &[u8]) -> Result<()> {
    let mut writer = BufWriter::new(File::create(path)?);
    writer.write_u32::<BigEndian>(LABEL_MAGIC)?;
    writer.write_u32::<BigEndian>(labels.len() as u32)?;
    writer.write_all(labels)?;
    writer.flush()?;
    Ok(())
}

/// Map pixel values affinely so 0 becomes -1 and 255 becomes +1,
/// optionally average-pooling each image down to `downsample x downsample`
/// first. Returns one flattened image per matrix row.
///
/// When given, the target side must divide both image sides exactly.
pub fn normalize_images(images: &IdxImageSet, downsample: Option<usize>) -> Result<Matrix> {
    let (out_rows, out_cols) = match downsample {
        None => (images.rows, images.cols),
        Some(side) => {
            if side == 0 || images.rows % side != 0 || images.cols % side != 0 {
                return Err(Error::Parameter(format!(
                    "downsample side {side} does not divide image size {}x{}",
                    images.rows, images.cols
                )));
            }
            (side, side)
        }
    };
    let block_r = images.rows / out_rows;
    let block_c = images.cols / out_cols;
    let block = (block_r * block_c) as f64;
    let mut out = Matrix::zeros(images.count, out_rows * out_cols);
    for i in 0..images.count {
        let img = images.image(i);
        for br in 0..out_rows {
            for bc in 0..out_cols {
                let mut sum = 0.0;
                for dr in 0..block_r {
                    for dc in 0..block_c {
                        let r = br * block_r + dr;
                        let c = bc * block_c + dc;
                        sum += f64::from(img[r * images.cols + c]);
                    }
                }
                let mean = sum / block;
                out.set(i, br * out_cols + bc, mean / 127.5 - 1.0);
            }
        }
    }
    Ok(out)
}

/// Load a paired image/label file set and check that the two headers agree
/// on the example count.
pub fn load_idx(images_path: &Path, labels_path: &Path) -> Result<(IdxImageSet, Vec<u8>)> {
    let images = load_idx_images(images_path)?;
    let labels = load_idx_labels(labels_path)?;
    if images.count() != labels.len() {
        return Err(Error::Data(format!(
            "{} images but {} labels ({} vs {})",
            images.count(),
            labels.len(),
            images_path.display(),
            labels_path.display()
        )));
    }
    Ok((images, labels))
}
