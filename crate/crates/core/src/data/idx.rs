use std::path::Path;

use super::Dataset;
use crate::error::{Error, Result};
use crate::numerics::Matrix;

const IMAGES_MAGIC: u32 = 0x0000_0803;
const LABELS_MAGIC: u32 = 0x0000_0801;

fn read(path: &Path) -> Result<Vec<u8>> {
    std::fs::read(path).map_err(|e| Error::io(path, e))
}

fn be_u32(bytes: &[u8], offset: usize) -> Result<u32> {
    bytes
        .get(offset..offset + 4)
        .map(|b| u32::from_be_bytes([b[0], b[1], b[2], b[3]]))
        .ok_or_else(|| Error::format(0, format!("truncated header at byte {offset}")))
}

/// Loads an IDX ubyte image/label pair. Pixels are flattened row-major and
/// scaled to `[0, 1]`.
pub fn load_idx(images_path: impl AsRef<Path>, labels_path: impl AsRef<Path>) -> Result<Dataset> {
    let images = read(images_path.as_ref())?;
    let labels = read(labels_path.as_ref())?;

    let magic = be_u32(&images, 0)?;
    if magic != IMAGES_MAGIC {
        return Err(Error::format(
            0,
            format!("image file magic {magic:#010x}, expected {IMAGES_MAGIC:#010x}"),
        ));
    }
    let magic = be_u32(&labels, 0)?;
    if magic != LABELS_MAGIC {
        return Err(Error::format(
            0,
            format!("label file magic {magic:#010x}, expected {LABELS_MAGIC:#010x}"),
        ));
    }

    let n_images = be_u32(&images, 4)? as usize;
    let rows = be_u32(&images, 8)? as usize;
    let cols = be_u32(&images, 12)? as usize;
    let n_labels = be_u32(&labels, 4)? as usize;
    if n_images != n_labels {
        return Err(Error::CountMismatch {
            images: n_images,
            labels: n_labels,
        });
    }
    if n_images == 0 {
        return Err(Error::EmptyDataset);
    }

    let pixels = rows * cols;
    let body = &images[16..];
    if body.len() != n_images * pixels {
        return Err(Error::format(
            0,
            format!("image payload has {} bytes, expected {}", body.len(), n_images * pixels),
        ));
    }
    let label_body = &labels[8..];
    if label_body.len() != n_labels {
        return Err(Error::format(
            0,
            format!("label payload has {} bytes, expected {n_labels}", label_body.len()),
        ));
    }

    let data = body.iter().map(|&b| f64::from(b) / 255.0).collect();
    let features = Matrix::new(n_images, pixels, data)?;
    let external: Vec<u64> = label_body.iter().map(|&l| u64::from(l)).collect();
    Dataset::from_external_labels(features, &external)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn images(n: u32, rows: u32, cols: u32, pixels: &[u8]) -> Vec<u8> {
        let mut out = IMAGES_MAGIC.to_be_bytes().to_vec();
        for v in [n, rows, cols] {
            out.extend_from_slice(&v.to_be_bytes());
        }
        out.extend_from_slice(pixels);
        out
    }

    fn labels(ls: &[u8]) -> Vec<u8> {
        let mut out = LABELS_MAGIC.to_be_bytes().to_vec();
        out.extend_from_slice(&(ls.len() as u32).to_be_bytes());
        out.extend_from_slice(ls);
        out
    }

    fn write(dir: &tempfile::TempDir, name: &str, bytes: &[u8]) -> std::path::PathBuf {
        let p = dir.path().join(name);
        std::fs::write(&p, bytes).unwrap();
        p
    }

    #[test]
    fn single_image() {
        let dir = tempfile::tempdir().unwrap();
        let img = write(&dir, "img", &images(1, 2, 2, &[0, 255, 0, 255]));
        let lab = write(&dir, "lab", &labels(&[7]));
        let ds = load_idx(img, lab).unwrap();
        assert_eq!(ds.features().row(0), &[0.0, 1.0, 0.0, 1.0]);
        // the only class is stored densely as id 0 and remembers its file label
        assert_eq!(ds.labels(), &[0]);
        assert_eq!(ds.original_labels(), &[7]);
    }

    #[test]
    fn wrong_magic() {
        let dir = tempfile::tempdir().unwrap();
        let mut bad = images(1, 2, 2, &[0, 0, 0, 0]);
        bad[3] = 0x02;
        let img = write(&dir, "img", &bad);
        let lab = write(&dir, "lab", &labels(&[1]));
        assert!(matches!(load_idx(&img, &lab), Err(Error::Format { .. })));
        // swapped files
        assert!(matches!(load_idx(&lab, &img), Err(Error::Format { .. })));
    }

    #[test]
    fn count_mismatch() {
        let dir = tempfile::tempdir().unwrap();
        let img = write(&dir, "img", &images(10, 1, 1, &[0; 10]));
        let lab = write(&dir, "lab", &labels(&[0; 9]));
        assert!(matches!(
            load_idx(img, lab),
            Err(Error::CountMismatch { images: 10, labels: 9 })
        ));
    }
}
