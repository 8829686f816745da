//! IDX image/label files (big-endian, as used by MNIST).

use std::fs;
use std::path::Path;

use crate::network::{Label, LabeledDataset};
use crate::{Error, Result};

const IMAGES_MAGIC: u32 = 0x0000_0803;
const LABELS_MAGIC: u32 = 0x0000_0801;

/// Maps a digit class to a binary label.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum Grouping {
    /// `{0..4} → −1`, `{5..9} → +1`.
    #[default]
    LowHigh,
}

impl Grouping {
    pub fn label(self, class: u8) -> Result<Label> {
        match (self, class) {
            (Grouping::LowHigh, 0..=4) => Ok(-1),
            (Grouping::LowHigh, 5..=9) => Ok(1),
            (_, c) => Err(Error::InvalidInput(format!("class {c} is not a digit"))),
        }
    }
}

struct Cursor<'a> {
    bytes: &'a [u8],
    pos: usize,
}

impl<'a> Cursor<'a> {
    fn u32(&mut self) -> Result<u32> {
        let end = self.pos + 4;
        let chunk = self.bytes.get(self.pos..end).ok_or(Error::Format {
            offset: self.pos,
            message: "truncated header".into(),
        })?;
        self.pos = end;
        Ok(u32::from_be_bytes(chunk.try_into().expect("four bytes")))
    }

    fn magic(&mut self, want: u32) -> Result<()> {
        let at = self.pos;
        let got = self.u32()?;
        if got != want {
            return Err(Error::Format {
                offset: at,
                message: format!("bad magic {got:#010x}, expected {want:#010x}"),
            });
        }
        Ok(())
    }

    fn payload(&mut self, len: usize) -> Result<&'a [u8]> {
        let have = self.bytes.len() - self.pos;
        if have < len {
            return Err(Error::Format {
                offset: self.bytes.len(),
                message: format!("truncated payload: {len} bytes expected, {have} present"),
            });
        }
        let out = &self.bytes[self.pos..self.pos + len];
        self.pos += len;
        Ok(out)
    }
}

/// Flattened images scaled to `[0, 1]`.
pub fn parse_images(bytes: &[u8]) -> Result<Vec<Vec<f64>>> {
    let mut c = Cursor { bytes, pos: 0 };
    c.magic(IMAGES_MAGIC)?;
    let count = c.u32()? as usize;
    let rows = c.u32()? as usize;
    let cols = c.u32()? as usize;
    let dim = rows * cols;
    let data = c.payload(count * dim)?;
    Ok(data
        .chunks_exact(dim.max(1))
        .take(count)
        .map(|img| img.iter().map(|&p| p as f64 / 255.0).collect())
        .collect())
}

pub fn parse_labels(bytes: &[u8]) -> Result<Vec<u8>> {
    let mut c = Cursor { bytes, pos: 0 };
    c.magic(LABELS_MAGIC)?;
    let count = c.u32()? as usize;
    Ok(c.payload(count)?.to_vec())
}

pub fn idx_dataset(images: &[u8], labels: &[u8], grouping: Grouping) -> Result<LabeledDataset> {
    let xs = parse_images(images)?;
    let classes = parse_labels(labels)?;
    if xs.len() != classes.len() {
        return Err(Error::InvalidInput(format!(
            "{} images but {} labels",
            xs.len(),
            classes.len()
        )));
    }
    let ys = classes
        .iter()
        .map(|&c| grouping.label(c))
        .collect::<Result<Vec<_>>>()?;
    LabeledDataset::from_parts(xs, ys)
}

pub fn load_idx(images: &Path, labels: &Path, grouping: Grouping) -> Result<LabeledDataset> {
    idx_dataset(&fs::read(images)?, &fs::read(labels)?, grouping)
}

/// Serializes images (values rounded to bytes) and digit classes to IDX.
pub fn encode_idx(images: &[Vec<u8>], rows: usize, cols: usize, classes: &[u8]) -> (Vec<u8>, Vec<u8>) {
    let mut img = Vec::new();
    img.extend_from_slice(&IMAGES_MAGIC.to_be_bytes());
    img.extend_from_slice(&(images.len() as u32).to_be_bytes());
    img.extend_from_slice(&(rows as u32).to_be_bytes());
    img.extend_from_slice(&(cols as u32).to_be_bytes());
    for im in images {
        img.extend_from_slice(im);
    }
    let mut lab = Vec::new();
    lab.extend_from_slice(&LABELS_MAGIC.to_be_bytes());
    lab.extend_from_slice(&(classes.len() as u32).to_be_bytes());
    lab.extend_from_slice(classes);
    (img, lab)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn well_formed_pair() {
        let images: Vec<Vec<u8>> = (0..3).map(|k| vec![k as u8 * 100; 28 * 28]).collect();
        let (img, lab) = encode_idx(&images, 28, 28, &[7, 2, 5]);
        let d = idx_dataset(&img, &lab, Grouping::LowHigh).unwrap();
        assert_eq!(d.len(), 3);
        assert_eq!(d.dim(), Some(784));
        assert_eq!(d.labels(), vec![1, -1, 1]);
        assert_eq!(d.samples()[2].x[0], 200.0 / 255.0);
    }

    #[test]
    fn bad_magic_names_offset() {
        let (mut img, lab) = encode_idx(&[vec![0; 4]], 2, 2, &[1]);
        img[3] = 0x01;
        match idx_dataset(&img, &lab, Grouping::LowHigh) {
            Err(Error::Format { offset: 0, message }) => assert!(message.contains("magic")),
            other => panic!("{other:?}"),
        }
        // Labels file passed as images.
        assert!(matches!(parse_images(&lab), Err(Error::Format { offset: 0, .. })));
    }

    #[test]
    fn truncation_and_count_mismatch() {
        let (img, lab) = encode_idx(&[vec![0; 4], vec![1; 4]], 2, 2, &[1, 2]);
        assert!(matches!(parse_images(&img[..img.len() - 1]), Err(Error::Format { .. })));
        assert!(matches!(parse_images(&img[..6]), Err(Error::Format { .. })));
        let (_, short) = encode_idx(&[], 2, 2, &[1]);
        assert!(idx_dataset(&img, &short, Grouping::LowHigh).is_err());
        assert!(idx_dataset(&img, &lab, Grouping::LowHigh).is_ok());
    }

    #[test]
    fn grouping_rule() {
        assert_eq!(Grouping::LowHigh.label(7).unwrap(), 1);
        assert_eq!(Grouping::LowHigh.label(4).unwrap(), -1);
        assert!(Grouping::LowHigh.label(10).is_err());
    }
}
