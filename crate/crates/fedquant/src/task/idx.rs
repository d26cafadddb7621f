//! IDX binary format: the MNIST distribution format.
//!
//! Images: big-endian magic `0x00000803`, then counts and the two spatial
//! dimensions as big-endian u32, then one unsigned byte per pixel. Labels:
//! magic `0x00000801`, count, then one byte per label.

use super::ClassData;
use crate::error::{Error, Result};
use std::io::{Read, Write};
use std::path::Path;

pub const IMAGE_MAGIC: u32 = 0x0000_0803;
pub const LABEL_MAGIC: u32 = 0x0000_0801;

/// Raw pixel payload of an IDX image file.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct IdxImages {
    pub n: usize,
    pub rows: usize,
    pub cols: usize,
    pub pixels: Vec<u8>,
}

fn read_u32_be<R: Read>(reader: &mut R, offset: &mut u64, what: &str) -> Result<u32> {
    let mut buf = [0u8; 4];
    reader.read_exact(&mut buf).map_err(|_| Error::IdxFormat {
        offset: *offset,
        message: format!("truncated while reading {what}"),
    })?;
    *offset += 4;
    Ok(u32::from_be_bytes(buf))
}

pub fn read_idx_images(path: &Path) -> Result<IdxImages> {
    let mut reader = std::io::BufReader::new(std::fs::File::open(path)?);
    let mut offset = 0u64;
    let magic = read_u32_be(&mut reader, &mut offset, "image magic")?;
    if magic != IMAGE_MAGIC {
        return Err(Error::IdxFormat {
            offset: 0,
            message: format!("bad image magic 0x{magic:08x}, expected 0x{IMAGE_MAGIC:08x}"),
        });
    }
    let n = read_u32_be(&mut reader, &mut offset, "image count")? as usize;
    let rows = read_u32_be(&mut reader, &mut offset, "row count")? as usize;
    let cols = read_u32_be(&mut reader, &mut offset, "column count")? as usize;
    let expected = n
        .checked_mul(rows)
        .and_then(|x| x.checked_mul(cols))
        .ok_or_else(|| Error::IdxFormat {
            offset: 4,
            message: format!("image dimensions overflow: {n} x {rows} x {cols}"),
        })?;
    let mut pixels = vec![0u8; expected];
    reader.read_exact(&mut pixels).map_err(|_| Error::IdxFormat {
        offset,
        message: format!("truncated pixel payload, expected {expected} bytes"),
    })?;
    Ok(IdxImages {
        n,
        rows,
        cols,
        pixels,
    })
}

pub fn read_idx_labels(path: &Path) -> Result<Vec<u8>> {
    let mut reader = std::io::BufReader::new(std::fs::File::open(path)?);
    let mut offset = 0u64;
    let magic = read_u32_be(&mut reader, &mut offset, "label magic")?;
    if magic != LABEL_MAGIC {
        return Err(Error::IdxFormat {
            offset: 0,
            message: format!("bad label magic 0x{magic:08x}, expected 0x{LABEL_MAGIC:08x}"),
        });
    }
    let n = read_u32_be(&mut reader, &mut offset, "label count")? as usize;
    let mut labels = vec![0u8; n];
    reader.read_exact(&mut labels).map_err(|_| Error::IdxFormat {
        offset,
        message: format!("truncated label payload, expected {n} bytes"),
    })?;
    Ok(labels)
}

pub fn write_idx_images(path: &Path, images: &IdxImages) -> Result<()> {
    debug_assert_eq!(images.pixels.len(), images.n * images.rows * images.cols);
    let mut w = std::io::BufWriter::new(std::fs::File::create(path)?);
    w.write_all(&IMAGE_MAGIC.to_be_bytes())?;
    w.write_all(&(images.n as u32).to_be_bytes())?;
    w.write_all(&(images.rows as u32).to_be_bytes())?;
    w.write_all(&(images.cols as u32).to_be_bytes())?;
    w.write_all(&images.pixels)?;
    Ok(())
}

pub fn write_idx_labels(path: &Path, labels: &[u8]) -> Result<()> {
    let mut w = std::io::BufWriter::new(std::fs::File::create(path)?);
    w.write_all(&LABEL_MAGIC.to_be_bytes())?;
    w.write_all(&(labels.len() as u32).to_be_bytes())?;
    w.write_all(labels)?;
    Ok(())
}

/// Load an IDX image/label pair as classification data: pixels scaled to
/// `[0, 1]`, labels checked against `0..=9`.
pub fn load_mnist_idx(images_path: &Path, labels_path: &Path) -> Result<ClassData> {
    let images = read_idx_images(images_path)?;
    let labels = read_idx_labels(labels_path)?;
    if images.n != labels.len() {
        return Err(Error::IdxFormat {
            offset: 4,
            message: format!(
                "count mismatch: {} images vs {} labels",
                images.n,
                labels.len()
            ),
        });
    }
    if let Some(&bad) = labels.iter().find(|&&l| l > 9) {
        return Err(Error::IdxFormat {
            offset: 8,
            message: format!("label {bad} outside 0..=9"),
        });
    }
    let data = ClassData {
        features: images.pixels.iter().map(|&p| f64::from(p) / 255.0).collect(),
        n_features: images.rows * images.cols,
        labels: labels.into_iter().map(usize::from).collect(),
        n_classes: 10,
    };
    data.validate()?;
    Ok(data)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn tmp(name: &str) -> std::path::PathBuf {
        let dir = tempfile::tempdir().unwrap();
        // leak the tempdir so the path stays alive for the test body
        let path = dir.path().join(name);
        std::mem::forget(dir);
        path
    }

    fn sample_images() -> IdxImages {
        IdxImages {
            n: 3,
            rows: 2,
            cols: 2,
            pixels: vec![0, 255, 128, 64, 10, 20, 30, 40, 1, 2, 3, 4],
        }
    }

    #[test]
    fn roundtrip_images_and_labels() {
        let img_path = tmp("images.idx");
        let lbl_path = tmp("labels.idx");
        let images = sample_images();
        write_idx_images(&img_path, &images).unwrap();
        write_idx_labels(&lbl_path, &[7, 0, 9]).unwrap();
        assert_eq!(read_idx_images(&img_path).unwrap(), images);
        assert_eq!(read_idx_labels(&lbl_path).unwrap(), vec![7, 0, 9]);

        let data = load_mnist_idx(&img_path, &lbl_path).unwrap();
        assert_eq!(data.len(), 3);
        assert_eq!(data.n_features, 4);
        assert_eq!(data.labels, vec![7, 0, 9]);
        assert!((data.features[1] - 1.0).abs() < 1e-12);
        assert!(data.features.iter().all(|&x| (0.0..=1.0).contains(&x)));
    }

    #[test]
    fn corrupt_magic_names_offset() {
        let path = tmp("bad.idx");
        std::fs::write(&path, 0xdeadbeefu32.to_be_bytes()).unwrap();
        let err = read_idx_images(&path).unwrap_err();
        match err {
            Error::IdxFormat { offset, message } => {
                assert_eq!(offset, 0);
                assert!(message.contains("0xdeadbeef"), "{message}");
            }
            other => panic!("unexpected error {other:?}"),
        }
    }

    #[test]
    fn truncated_payload_detected() {
        let path = tmp("short.idx");
        let mut bytes = Vec::new();
        bytes.extend_from_slice(&IMAGE_MAGIC.to_be_bytes());
        bytes.extend_from_slice(&2u32.to_be_bytes());
        bytes.extend_from_slice(&2u32.to_be_bytes());
        bytes.extend_from_slice(&2u32.to_be_bytes());
        bytes.extend_from_slice(&[1, 2, 3]); // needs 8
        std::fs::write(&path, bytes).unwrap();
        let err = read_idx_images(&path).unwrap_err();
        assert!(err.to_string().contains("truncated"), "{err}");
    }

    #[test]
    fn count_mismatch_detected() {
        let img_path = tmp("images.idx");
        let lbl_path = tmp("labels.idx");
        write_idx_images(&img_path, &sample_images()).unwrap();
        write_idx_labels(&lbl_path, &[1, 2]).unwrap();
        let err = load_mnist_idx(&img_path, &lbl_path).unwrap_err();
        assert!(err.to_string().contains("count mismatch"), "{err}");
    }

    #[test]
    fn label_range_checked() {
        let img_path = tmp("images.idx");
        let lbl_path = tmp("labels.idx");
        write_idx_images(&img_path, &sample_images()).unwrap();
        write_idx_labels(&lbl_path, &[1, 2, 11]).unwrap();
        assert!(load_mnist_idx(&img_path, &lbl_path).is_err());
    }
}
