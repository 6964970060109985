//! IDX dataset files (the MNIST container format).
//!
//! [`load_idx`] reads the standard unsigned-byte image/label pair (magics
//! `0x00000803` / `0x00000801`, big-endian dimension fields) and scales
//! pixels to `[0, 1]`. For lossless persistence of real-valued batches
//! (adversarial examples), the same container is used with the IDX double
//! type code (`0x00000E02`): big-endian `f64` payload, two dimension fields.

use crate::error::{FipError, Result};
use crate::net::Batch;
use std::path::Path;

pub const IMAGES_MAGIC: u32 = 0x0000_0803;
pub const LABELS_MAGIC: u32 = 0x0000_0801;
pub const DOUBLE_MATRIX_MAGIC: u32 = 0x0000_0E02;

struct Reader<'a> {
    bytes: &'a [u8],
    pos: usize,
    file: String,
}

impl<'a> Reader<'a> {
    fn new(bytes: &'a [u8], file: &Path) -> Self {
        Reader {
            bytes,
            pos: 0,
            file: file.display().to_string(),
        }
    }

    fn truncated(&self, context: &str) -> FipError {
        FipError::Truncated {
            file: self.file.clone(),
            context: context.to_string(),
        }
    }

    fn read_u32_be(&mut self, context: &str) -> Result<u32> {
        if self.pos + 4 > self.bytes.len() {
            return Err(self.truncated(context));
        }
        let v = u32::from_be_bytes(self.bytes[self.pos..self.pos + 4].try_into().unwrap());
        self.pos += 4;
        Ok(v)
    }

    fn read_exact(&mut self, len: usize, context: &str) -> Result<&'a [u8]> {
        if self.pos + len > self.bytes.len() {
            return Err(self.truncated(context));
        }
        let s = &self.bytes[self.pos..self.pos + len];
        self.pos += len;
        Ok(s)
    }

    fn expect_end(&self) -> Result<()> {
        if self.pos != self.bytes.len() {
            return Err(self.truncated("trailing bytes after payload"));
        }
        Ok(())
    }
}

/// Loads a standard IDX image/label pair into a labeled batch. Pixels are
/// scaled to `[0, 1]`; images are flattened row-major to `rows * cols`
/// features.
pub fn load_idx(images_path: &Path, labels_path: &Path) -> Result<Batch> {
    let image_bytes = std::fs::read(images_path)?;
    let mut r = Reader::new(&image_bytes, images_path);
    let magic = r.read_u32_be("magic")?;
    if magic != IMAGES_MAGIC {
        return Err(FipError::BadMagic {
            file: r.file.clone(),
            got: magic,
            expected: IMAGES_MAGIC,
        });
    }
    let count = r.read_u32_be("image count")? as usize;
    let rows = r.read_u32_be("row count")? as usize;
    let cols = r.read_u32_be("column count")? as usize;
    let pixels = r.read_exact(count * rows * cols, "pixel data")?;
    r.expect_end()?;

    let label_bytes = std::fs::read(labels_path)?;
    let mut r = Reader::new(&label_bytes, labels_path);
    let magic = r.read_u32_be("magic")?;
    if magic != LABELS_MAGIC {
        return Err(FipError::BadMagic {
            file: r.file.clone(),
            got: magic,
            expected: LABELS_MAGIC,
        });
    }
    let label_count = r.read_u32_be("label count")? as usize;
    let labels_raw = r.read_exact(label_count, "label data")?;
    r.expect_end()?;

    if count != label_count {
        return Err(FipError::CountMismatch {
            images: count,
            labels: label_count,
        });
    }
    let inputs: Vec<f64> = pixels.iter().map(|&b| f64::from(b) / 255.0).collect();
    let labels: Vec<usize> = labels_raw.iter().map(|&b| b as usize).collect();
    Batch::new(inputs, rows * cols, Some(labels), 0)
}

/// Writes a standard unsigned-byte IDX image file (3 dimension fields).
pub fn write_idx_images(path: &Path, pixels: &[u8], count: usize, rows: usize, cols: usize) -> Result<()> {
    if pixels.len() != count * rows * cols {
        return Err(FipError::InvalidConfig(format!(
            "pixel buffer has {} bytes, expected {}",
            pixels.len(),
            count * rows * cols
        )));
    }
    let mut out = Vec::with_capacity(16 + pixels.len());
    out.extend_from_slice(&IMAGES_MAGIC.to_be_bytes());
    out.extend_from_slice(&(count as u32).to_be_bytes());
    out.extend_from_slice(&(rows as u32).to_be_bytes());
    out.extend_from_slice(&(cols as u32).to_be_bytes());
    out.extend_from_slice(pixels);
    std::fs::write(path, out)?;
    Ok(())
}

/// Writes a standard unsigned-byte IDX label file.
pub fn write_idx_labels(path: &Path, labels: &[usize]) -> Result<()> {
    let mut out = Vec::with_capacity(8 + labels.len());
    out.extend_from_slice(&LABELS_MAGIC.to_be_bytes());
    out.extend_from_slice(&(labels.len() as u32).to_be_bytes());
    for &l in labels {
        if l > u8::MAX as usize {
            return Err(FipError::InvalidConfig(format!("label {l} exceeds u8")));
        }
        out.push(l as u8);
    }
    std::fs::write(path, out)?;
    Ok(())
}

/// Writes an `n x dim` real-valued matrix in the IDX container with the
/// double type code: lossless for adversarial batches.
pub fn write_idx_f64_matrix(path: &Path, values: &[f64], n: usize, dim: usize) -> Result<()> {
    if values.len() != n * dim {
        return Err(FipError::InvalidConfig(format!(
            "value buffer has {} entries, expected {}",
            values.len(),
            n * dim
        )));
    }
    let mut out = Vec::with_capacity(12 + values.len() * 8);
    out.extend_from_slice(&DOUBLE_MATRIX_MAGIC.to_be_bytes());
    out.extend_from_slice(&(n as u32).to_be_bytes());
    out.extend_from_slice(&(dim as u32).to_be_bytes());
    for v in values {
        out.extend_from_slice(&v.to_be_bytes());
    }
    std::fs::write(path, out)?;
    Ok(())
}

pub fn read_idx_f64_matrix(path: &Path) -> Result<(Vec<f64>, usize, usize)> {
    let bytes = std::fs::read(path)?;
    let mut r = Reader::new(&bytes, path);
    let magic = r.read_u32_be("magic")?;
    if magic != DOUBLE_MATRIX_MAGIC {
        return Err(FipError::BadMagic {
            file: r.file.clone(),
            got: magic,
            expected: DOUBLE_MATRIX_MAGIC,
        });
    }
    let n = r.read_u32_be("row count")? as usize;
    let dim = r.read_u32_be("column count")? as usize;
    let payload = r.read_exact(n * dim * 8, "matrix data")?;
    r.expect_end()?;
    let values: Vec<f64> = payload
        .chunks_exact(8)
        .map(|c| f64::from_be_bytes(c.try_into().unwrap()))
        .collect();
    Ok((values, n, dim))
}

#[cfg(test)]
mod tests {
    use super::*;

    /// Four 2x2 images with hand-chosen bytes, recorded here as the fixture.
    fn fixture(dir: &Path) -> (std::path::PathBuf, std::path::PathBuf) {
        let pixels: Vec<u8> = vec![
            0, 51, 102, 153, // image 0
            255, 204, 153, 102, // image 1
            0, 0, 255, 255, // image 2
            17, 34, 51, 68, // image 3
        ];
        let labels = vec![0usize, 1, 2, 3];
        let ip = dir.join("imgs.idx3-ubyte");
        let lp = dir.join("labels.idx1-ubyte");
        write_idx_images(&ip, &pixels, 4, 2, 2).unwrap();
        write_idx_labels(&lp, &labels).unwrap();
        (ip, lp)
    }

    #[test]
    fn fixture_pixels_load_exactly() {
        let dir = tempfile::tempdir().unwrap();
        let (ip, lp) = fixture(dir.path());
        let batch = load_idx(&ip, &lp).unwrap();
        assert_eq!(batch.len(), 4);
        assert_eq!(batch.dim(), 4);
        assert_eq!(
            batch.input(0),
            &[0.0, 51.0 / 255.0, 102.0 / 255.0, 153.0 / 255.0]
        );
        assert_eq!(batch.input(2), &[0.0, 0.0, 1.0, 1.0]);
        assert_eq!(batch.labels().unwrap(), &[0, 1, 2, 3]);
    }

    #[test]
    fn count_mismatch_is_detected() {
        let dir = tempfile::tempdir().unwrap();
        let (ip, _) = fixture(dir.path());
        let lp = dir.path().join("short-labels.idx1-ubyte");
        write_idx_labels(&lp, &[0, 1]).unwrap();
        assert!(matches!(
            load_idx(&ip, &lp),
            Err(FipError::CountMismatch {
                images: 4,
                labels: 2
            })
        ));
    }

    #[test]
    fn empty_and_truncated_files_are_rejected() {
        let dir = tempfile::tempdir().unwrap();
        let (ip, lp) = fixture(dir.path());
        let empty = dir.path().join("empty.idx");
        std::fs::write(&empty, []).unwrap();
        assert!(matches!(
            load_idx(&empty, &lp),
            Err(FipError::Truncated { .. })
        ));
        let bytes = std::fs::read(&ip).unwrap();
        let cut = dir.path().join("cut.idx");
        std::fs::write(&cut, &bytes[..bytes.len() - 2]).unwrap();
        assert!(matches!(
            load_idx(&cut, &lp),
            Err(FipError::Truncated { .. })
        ));
    }

    #[test]
    fn bad_magic_is_rejected() {
        let dir = tempfile::tempdir().unwrap();
        let (ip, lp) = fixture(dir.path());
        let mut bytes = std::fs::read(&ip).unwrap();
        bytes[3] = 0x99;
        let bad = dir.path().join("bad.idx");
        std::fs::write(&bad, bytes).unwrap();
        assert!(matches!(load_idx(&bad, &lp), Err(FipError::BadMagic { .. })));
    }

    #[test]
    fn f64_matrix_round_trip_is_lossless() {
        let dir = tempfile::tempdir().unwrap();
        let p = dir.path().join("adv.idx");
        let values = vec![0.1, -2.5e-7, 1.0 / 3.0, 255.00000001, 0.0, -0.0];
        write_idx_f64_matrix(&p, &values, 2, 3).unwrap();
        let (back, n, dim) = read_idx_f64_matrix(&p).unwrap();
        assert_eq!((n, dim), (2, 3));
        assert_eq!(
            back.iter().map(|v| v.to_bits()).collect::<Vec<_>>(),
            values.iter().map(|v| v.to_bits()).collect::<Vec<_>>()
        );
    }
}
