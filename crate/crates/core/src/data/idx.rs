//! The IDX container used by the MNIST distribution.
//!
//! Every integer is a 4-byte big-endian value. Images: magic `0x00000803`,
//! count, rows, cols, then `count * rows * cols` unsigned pixel bytes in
//! row-major order. Labels: magic `0x00000801`, count, then `count` bytes.

use thiserror::Error;

pub const IDX_IMAGES_MAGIC: u32 = 0x0000_0803;
pub const IDX_LABELS_MAGIC: u32 = 0x0000_0801;

const MAX_LABEL: u8 = 9;

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum IdxError {
    #[error("bad IDX magic: expected {expected:#010x}, found {found:#010x}")]
    BadMagic { expected: u32, found: u32 },
    #[error("truncated IDX stream: need {needed} bytes, have {available}")]
    Truncated { needed: u64, available: u64 },
    #[error("IDX stream has {0} trailing bytes")]
    TrailingBytes(usize),
    #[error("label {label} at index {index} exceeds 9")]
    LabelOutOfRange { index: usize, label: u8 },
}

/// Raw IDX image payload. Pixel bytes are kept as stored; use
/// [`IdxImages::image`] for the `[0, 1]` scaled view.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct IdxImages {
    pub count: usize,
    pub rows: usize,
    pub cols: usize,
    pub pixels: Vec<u8>,
}

impl IdxImages {
    pub fn pixels_per_image(&self) -> usize {
        self.rows * self.cols
    }

    /// Image `i` scaled into `[0, 1]`.
    pub fn image(&self, i: usize) -> Vec<f64> {
        let n = self.pixels_per_image();
        self.pixels[i * n..(i + 1) * n]
            .iter()
            .map(|&p| f64::from(p) / 255.0)
            .collect()
    }
}

struct Reader<'a> {
    bytes: &'a [u8],
    pos: usize,
}

impl<'a> Reader<'a> {
    fn u32_be(&mut self) -> Result<u32, IdxError> {
        let b = self.take(4)?;
        Ok(u32::from_be_bytes([b[0], b[1], b[2], b[3]]))
    }

    fn take(&mut self, n: usize) -> Result<&'a [u8], IdxError> {
        let available = self.bytes.len() - self.pos;
        if n > available {
            return Err(IdxError::Truncated {
                needed: (self.pos + n) as u64,
                available: self.bytes.len() as u64,
            });
        }
        let out = &self.bytes[self.pos..self.pos + n];
        self.pos += n;
        Ok(out)
    }

    fn take_u64(&mut self, n: u64) -> Result<&'a [u8], IdxError> {
        let available = (self.bytes.len() - self.pos) as u64;
        if n > available {
            return Err(IdxError::Truncated {
                needed: (self.pos as u64).saturating_add(n),
                available: self.bytes.len() as u64,
            });
        }
        self.take(n as usize)
    }

    fn magic(&mut self, expected: u32) -> Result<(), IdxError> {
        let found = self.u32_be()?;
        if found == expected {
            Ok(())
        } else {
            Err(IdxError::BadMagic { expected, found })
        }
    }

    fn finish(&self) -> Result<(), IdxError> {
        match self.bytes.len() - self.pos {
            0 => Ok(()),
            n => Err(IdxError::TrailingBytes(n)),
        }
    }
}

pub fn parse_idx_images(bytes: &[u8]) -> Result<IdxImages, IdxError> {
    let mut r = Reader { bytes, pos: 0 };
    r.magic(IDX_IMAGES_MAGIC)?;
    let count = r.u32_be()?;
    let rows = r.u32_be()?;
    let cols = r.u32_be()?;
    let total = u64::from(count)
        .checked_mul(u64::from(rows))
        .and_then(|n| n.checked_mul(u64::from(cols)))
        .unwrap_or(u64::MAX);
    let pixels = r.take_u64(total)?.to_vec();
    r.finish()?;
    Ok(IdxImages {
        count: count as usize,
        rows: rows as usize,
        cols: cols as usize,
        pixels,
    })
}

pub fn parse_idx_labels(bytes: &[u8]) -> Result<Vec<u8>, IdxError> {
    let mut r = Reader { bytes, pos: 0 };
    r.magic(IDX_LABELS_MAGIC)?;
    let count = r.u32_be()?;
    let labels = r.take_u64(u64::from(count))?;
    r.finish()?;
    if let Some((index, &label)) = labels.iter().enumerate().find(|(_, &l)| l > MAX_LABEL) {
        return Err(IdxError::LabelOutOfRange { index, label });
    }
    Ok(labels.to_vec())
}

/// Serializes images back into an IDX stream.
///
/// # Panics
/// If a dimension exceeds `u32::MAX` or the pixel buffer length disagrees
/// with `count * rows * cols`.
pub fn write_idx_images(images: &IdxImages) -> Vec<u8> {
    assert_eq!(images.pixels.len(), images.count * images.rows * images.cols);
    let mut out = Vec::with_capacity(16 + images.pixels.len());
    out.extend_from_slice(&IDX_IMAGES_MAGIC.to_be_bytes());
    for dim in [images.count, images.rows, images.cols] {
        out.extend_from_slice(&u32::try_from(dim).expect("IDX dimension fits u32").to_be_bytes());
    }
    out.extend_from_slice(&images.pixels);
    out
}

pub fn write_idx_labels(labels: &[u8]) -> Vec<u8> {
    let mut out = Vec::with_capacity(8 + labels.len());
    out.extend_from_slice(&IDX_LABELS_MAGIC.to_be_bytes());
    out.extend_from_slice(&u32::try_from(labels.len()).expect("label count fits u32").to_be_bytes());
    out.extend_from_slice(labels);
    out
}
