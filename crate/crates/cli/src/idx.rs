//! IDX image/label files (the MNIST distribution format), raw or gzipped.

use std::io::Read;
use std::path::Path;

use dwsnn_core::encoding::ImageSet;
use flate2::read::GzDecoder;

use crate::error::{CliError, Result};

pub const IMAGE_MAGIC: u32 = 0x0000_0803;
pub const LABEL_MAGIC: u32 = 0x0000_0801;

fn header(bytes: &[u8], magic: u32, dims: usize, what: &str) -> Result<(Vec<usize>, usize)> {
    let need = 4 + 4 * dims;
    if bytes.len() < need {
        return Err(CliError::Length(format!(
            "{what} file is {} bytes, shorter than its {need}-byte header",
            bytes.len()
        )));
    }
    let word = |i: usize| u32::from_be_bytes([bytes[i], bytes[i + 1], bytes[i + 2], bytes[i + 3]]);
    let found = word(0);
    if found != magic {
        return Err(CliError::Format(format!(
            "{what} file has magic {found:#010x}, expected {magic:#010x}"
        )));
    }
    let sizes: Vec<usize> = (0..dims).map(|d| word(4 + 4 * d) as usize).collect();
    Ok((sizes, need))
}

/// Parse an image file and a label file into a normalized set.
pub fn load_idx(image_bytes: &[u8], label_bytes: &[u8]) -> Result<ImageSet> {
    let (dims, off) = header(image_bytes, IMAGE_MAGIC, 3, "image")?;
    let (n, rows, cols) = (dims[0], dims[1], dims[2]);
    let payload = n * rows * cols;
    if image_bytes.len() - off != payload {
        return Err(CliError::Length(format!(
            "image payload is {} bytes, header promises {n}×{rows}×{cols} = {payload}",
            image_bytes.len() - off
        )));
    }
    let (ldims, loff) = header(label_bytes, LABEL_MAGIC, 1, "label")?;
    if label_bytes.len() - loff != ldims[0] {
        return Err(CliError::Length(format!(
            "label payload is {} bytes, header promises {}",
            label_bytes.len() - loff,
            ldims[0]
        )));
    }
    if ldims[0] != n {
        return Err(CliError::Consistency(format!(
            "{n} images but {} labels",
            ldims[0]
        )));
    }
    let labels = label_bytes[loff..].to_vec();
    Ok(ImageSet::from_u8(rows, cols, &image_bytes[off..], labels)?)
}

/// Serialize back to `(image bytes, label bytes)`.
pub fn export_idx(set: &ImageSet) -> (Vec<u8>, Vec<u8>) {
    let n = set.len() as u32;
    let mut images = Vec::with_capacity(16 + set.pixels().len());
    images.extend_from_slice(&IMAGE_MAGIC.to_be_bytes());
    for d in [n, set.rows() as u32, set.cols() as u32] {
        images.extend_from_slice(&d.to_be_bytes());
    }
    images.extend_from_slice(&set.to_u8());
    let mut labels = Vec::with_capacity(8 + set.len());
    labels.extend_from_slice(&LABEL_MAGIC.to_be_bytes());
    labels.extend_from_slice(&n.to_be_bytes());
    labels.extend_from_slice(set.labels());
    (images, labels)
}

/// Read a file, inflating it if it starts with the gzip magic.
pub fn read_maybe_gz(path: &Path) -> Result<Vec<u8>> {
    let raw = std::fs::read(path).map_err(|e| CliError::io(path, e))?;
    if raw.starts_with(&[0x1f, 0x8b]) {
        let mut out = Vec::new();
        GzDecoder::new(raw.as_slice())
            .read_to_end(&mut out)
            .map_err(|e| CliError::io(path, e))?;
        Ok(out)
    } else {
        Ok(raw)
    }
}

pub fn load_idx_files(images: &Path, labels: &Path) -> Result<ImageSet> {
    load_idx(&read_maybe_gz(images)?, &read_maybe_gz(labels)?)
}

/// Locate `{stem}-images-idx3-ubyte[.gz]` and `{stem}-labels-idx1-ubyte[.gz]`
/// under `dir`, with `stem` being `train` or `t10k`.
pub fn find_pair(dir: &Path, stem: &str) -> Result<(std::path::PathBuf, std::path::PathBuf)> {
    let pick = |kind: &str| {
        let base = format!("{stem}-{kind}-ubyte");
        [format!("{base}.gz"), base]
            .into_iter()
            .map(|name| dir.join(name))
            .find(|p| p.is_file())
            .ok_or_else(|| {
                CliError::Data(format!(
                    "no {stem}-{kind}-ubyte[.gz] under {}",
                    dir.display()
                ))
            })
    };
    Ok((pick("images-idx3")?, pick("labels-idx1")?))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn image_file(magic: u32, n: u32, payload: &[u8]) -> Vec<u8> {
        let mut v = magic.to_be_bytes().to_vec();
        for d in [n, 28, 28] {
            v.extend_from_slice(&d.to_be_bytes());
        }
        v.extend_from_slice(payload);
        v
    }

    fn label_file(labels: &[u8]) -> Vec<u8> {
        let mut v = LABEL_MAGIC.to_be_bytes().to_vec();
        v.extend_from_slice(&(labels.len() as u32).to_be_bytes());
        v.extend_from_slice(labels);
        v
    }

    #[test]
    fn all_white_image() {
        let set = load_idx(&image_file(IMAGE_MAGIC, 1, &[255; 784]), &label_file(&[4])).unwrap();
        assert_eq!(set.len(), 1);
        assert!(set.image(0).iter().all(|&p| p == 1.0));
        assert_eq!(set.label(0), 4);
    }

    #[test]
    fn wrong_magic_is_format_error() {
        let err = load_idx(&image_file(0x0000_0802, 1, &[0; 784]), &label_file(&[0])).unwrap_err();
        assert_eq!(err.class(), "format");
    }

    #[test]
    fn truncated_payload_is_length_error() {
        let err = load_idx(&image_file(IMAGE_MAGIC, 1, &[0; 700]), &label_file(&[0])).unwrap_err();
        assert_eq!(err.class(), "length");
        let err = load_idx(&[0, 0, 8], &label_file(&[0])).unwrap_err();
        assert_eq!(err.class(), "length");
    }

    #[test]
    fn count_mismatch_is_consistency_error() {
        let err =
            load_idx(&image_file(IMAGE_MAGIC, 1, &[0; 784]), &label_file(&[0, 1])).unwrap_err();
        assert_eq!(err.class(), "consistency");
    }

    #[test]
    fn gzip_is_detected() {
        use flate2::write::GzEncoder;
        use std::io::Write;
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("x.gz");
        let mut enc = GzEncoder::new(Vec::new(), flate2::Compression::fast());
        enc.write_all(b"hello").unwrap();
        std::fs::write(&path, enc.finish().unwrap()).unwrap();
        assert_eq!(read_maybe_gz(&path).unwrap(), b"hello");
    }
}
