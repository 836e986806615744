//! Reader for the IDX files MNIST is distributed in.
//!
//! Both the raw files and their gzip-compressed `.gz` variants are accepted,
//! under either the `train-images-idx3-ubyte` or `train-images.idx3-ubyte`
//! naming.

use std::fs::File;
use std::io::Read;
use std::path::{Path, PathBuf};

use flate2::read::GzDecoder;

use crate::learning::{Dataset, CLASSES, IMAGE_PIXELS, IMAGE_SIDE};
use crate::MnistError;

pub const IMAGES_MAGIC: u32 = 2051;
pub const LABELS_MAGIC: u32 = 2049;

/// Loads `(train, test)` from a directory of IDX files.
pub fn load_mnist(dir: &Path) -> Result<(Dataset, Dataset), MnistError> {
    let train = load_pair(dir, "train")?;
    let test = load_pair(dir, "t10k")?;
    Ok((train, test))
}

fn load_pair(dir: &Path, prefix: &str) -> Result<Dataset, MnistError> {
    let images = parse_images(&find(dir, prefix, "images-idx3-ubyte")?)?;
    let labels = parse_labels(&find(dir, prefix, "labels-idx1-ubyte")?)?;
    let n = labels.len();
    if images.len() != n * IMAGE_PIXELS {
        return Err(MnistError::CountMismatch {
            images: images.len() / IMAGE_PIXELS,
            labels: n,
        });
    }
    Ok(Dataset { images, labels })
}

fn find(dir: &Path, prefix: &str, stem: &str) -> Result<PathBuf, MnistError> {
    let dotted = stem.replacen('-', ".", 1);
    for name in [format!("{prefix}-{stem}"), format!("{prefix}-{dotted}")] {
        for candidate in [dir.join(&name), dir.join(format!("{name}.gz"))] {
            if candidate.is_file() {
                return Ok(candidate);
            }
        }
    }
    Err(MnistError::MissingFile(dir.join(format!("{prefix}-{stem}"))))
}

fn read_all(path: &Path) -> Result<Vec<u8>, MnistError> {
    let io = |source| MnistError::Io {
        path: path.to_owned(),
        source,
    };
    let mut file = File::open(path).map_err(io)?;
    let mut bytes = Vec::new();
    if path.extension().is_some_and(|e| e == "gz") {
        GzDecoder::new(file).read_to_end(&mut bytes).map_err(io)?;
    } else {
        file.read_to_end(&mut bytes).map_err(io)?;
    }
    Ok(bytes)
}

fn be_u32(bytes: &[u8], at: usize, path: &Path) -> Result<u32, MnistError> {
    bytes
        .get(at..at + 4)
        .map(|b| u32::from_be_bytes([b[0], b[1], b[2], b[3]]))
        .ok_or_else(|| MnistError::Truncated {
            path: path.to_owned(),
            expected: at + 4,
            found: bytes.len(),
        })
}

fn check_magic(bytes: &[u8], expected: u32, path: &Path) -> Result<(), MnistError> {
    let found = be_u32(bytes, 0, path)?;
    if found != expected {
        return Err(MnistError::BadMagic {
            path: path.to_owned(),
            expected,
            found,
        });
    }
    Ok(())
}

fn payload<'a>(bytes: &'a [u8], header: usize, len: usize, path: &Path) -> Result<&'a [u8], MnistError> {
    let expected = header + len;
    if bytes.len() < expected {
        return Err(MnistError::Truncated {
            path: path.to_owned(),
            expected,
            found: bytes.len(),
        });
    }
    Ok(&bytes[header..expected])
}

/// Pixels scaled to `[0, 1]`, `28 × 28` per image.
pub fn parse_images(path: &Path) -> Result<Vec<f64>, MnistError> {
    let bytes = read_all(path)?;
    check_magic(&bytes, IMAGES_MAGIC, path)?;
    let count = be_u32(&bytes, 4, path)? as usize;
    let rows = be_u32(&bytes, 8, path)? as usize;
    let cols = be_u32(&bytes, 12, path)? as usize;
    if rows != IMAGE_SIDE || cols != IMAGE_SIDE {
        return Err(MnistError::BadMagic {
            path: path.to_owned(),
            expected: IMAGE_SIDE as u32,
            found: if rows != IMAGE_SIDE { rows } else { cols } as u32,
        });
    }
    let raw = payload(&bytes, 16, count * rows * cols, path)?;
    Ok(raw.iter().map(|&p| p as f64 / 255.0).collect())
}

pub fn parse_labels(path: &Path) -> Result<Vec<u8>, MnistError> {
    let bytes = read_all(path)?;
    check_magic(&bytes, LABELS_MAGIC, path)?;
    let count = be_u32(&bytes, 4, path)? as usize;
    let raw = payload(&bytes, 8, count, path)?;
    if let Some(&label) = raw.iter().find(|&&l| l as usize >= CLASSES) {
        return Err(MnistError::BadLabel {
            path: path.to_owned(),
            label,
        });
    }
    Ok(raw.to_vec())
}

/// Writes a dataset as uncompressed IDX files under `dir` with the given
/// prefix (`train` or `t10k`).
pub fn write_idx(dir: &Path, prefix: &str, data: &Dataset) -> std::io::Result<()> {
    let n = data.len() as u32;
    let mut images = Vec::with_capacity(16 + data.images.len());
    for v in [IMAGES_MAGIC, n, IMAGE_SIDE as u32, IMAGE_SIDE as u32] {
        images.extend_from_slice(&v.to_be_bytes());
    }
    images.extend(data.images.iter().map(|&p| (p * 255.0).round().clamp(0.0, 255.0) as u8));
    std::fs::write(dir.join(format!("{prefix}-images-idx3-ubyte")), images)?;

    let mut labels = Vec::with_capacity(8 + data.labels.len());
    for v in [LABELS_MAGIC, n] {
        labels.extend_from_slice(&v.to_be_bytes());
    }
    labels.extend_from_slice(&data.labels);
    std::fs::write(dir.join(format!("{prefix}-labels-idx1-ubyte")), labels)
}
