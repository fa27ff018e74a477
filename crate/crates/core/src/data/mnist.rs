use std::fs;
use std::io::Read;
use std::path::{Path, PathBuf};

use flate2::read::GzDecoder;

use super::idx::{parse_idx_images, parse_idx_labels};
use super::{Dataset, Sample};
use crate::error::{Error, Result};

/// Environment variable consulted for the MNIST directory when none is given.
pub const DATA_DIR_ENV: &str = "SOFTFOREST_DATA_DIR";

const GZIP_MAGIC: [u8; 2] = [0x1f, 0x8b];

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum MnistSplit {
    Train,
    Test,
}

impl MnistSplit {
    fn prefix(self) -> &'static str {
        match self {
            MnistSplit::Train => "train",
            MnistSplit::Test => "t10k",
        }
    }
}

/// Finds `<prefix>-<kind>-idx<n>-ubyte`, its `.gz` twin, or the
/// `<prefix>-<kind>.idx<n>-ubyte` spelling some mirrors use.
fn locate(dir: &Path, prefix: &str, kind: &str, rank: u8) -> Result<PathBuf> {
    let candidates = [
        format!("{prefix}-{kind}-idx{rank}-ubyte"),
        format!("{prefix}-{kind}-idx{rank}-ubyte.gz"),
        format!("{prefix}-{kind}.idx{rank}-ubyte"),
        format!("{prefix}-{kind}.idx{rank}-ubyte.gz"),
    ];
    candidates
        .iter()
        .map(|name| dir.join(name))
        .find(|p| p.is_file())
        .ok_or_else(|| {
            Error::Io(std::io::Error::new(
                std::io::ErrorKind::NotFound,
                format!("no {} in {}", candidates[0], dir.display()),
            ))
        })
}

/// Reads a file, inflating it when it starts with the gzip magic.
fn read_maybe_gz(path: &Path) -> Result<Vec<u8>> {
    let raw = fs::read(path)?;
    if raw.starts_with(&GZIP_MAGIC) {
        let mut out = Vec::new();
        GzDecoder::new(raw.as_slice()).read_to_end(&mut out)?;
        Ok(out)
    } else {
        Ok(raw)
    }
}

pub fn load_mnist_split(dir: &Path, split: MnistSplit) -> Result<Dataset> {
    let images = parse_idx_images(&read_maybe_gz(&locate(dir, split.prefix(), "images", 3)?)?)?;
    let labels = parse_idx_labels(&read_maybe_gz(&locate(dir, split.prefix(), "labels", 1)?)?)?;
    if images.count != labels.len() {
        return Err(Error::invalid(format!(
            "{} images but {} labels",
            images.count,
            labels.len()
        )));
    }
    let samples = labels
        .iter()
        .enumerate()
        .map(|(i, &l)| Sample::new(images.image(i), usize::from(l)))
        .collect();
    Dataset::new(samples, images.pixels_per_image(), 10)
}

/// Loads `(train, test)` from a directory holding the four standard files.
pub fn load_mnist(dir: &Path) -> Result<(Dataset, Dataset)> {
    Ok((
        load_mnist_split(dir, MnistSplit::Train)?,
        load_mnist_split(dir, MnistSplit::Test)?,
    ))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::data::{write_idx_images, write_idx_labels, IdxImages};
    use flate2::write::GzEncoder;
    use flate2::Compression;
    use std::io::Write;

    fn scratch_dir(tag: &str) -> PathBuf {
        let dir = std::env::temp_dir().join(format!("softforest-mnist-{tag}-{}", std::process::id()));
        fs::create_dir_all(&dir).unwrap();
        dir
    }

    #[test]
    fn loads_plain_and_gzipped_files() {
        let dir = scratch_dir("mixed");
        let imgs = IdxImages {
            count: 2,
            rows: 2,
            cols: 2,
            pixels: vec![0, 255, 0, 255, 51, 0, 0, 0],
        };
        fs::write(dir.join("t10k-images-idx3-ubyte"), write_idx_images(&imgs)).unwrap();
        let mut gz = GzEncoder::new(Vec::new(), Compression::default());
        gz.write_all(&write_idx_labels(&[3, 7])).unwrap();
        fs::write(dir.join("t10k-labels-idx1-ubyte.gz"), gz.finish().unwrap()).unwrap();

        let test = load_mnist_split(&dir, MnistSplit::Test).unwrap();
        assert_eq!(test.len(), 2);
        assert_eq!(test.samples()[1].label, 7);
        assert_eq!(test.samples()[1].features[0], 0.2);
        assert!(load_mnist_split(&dir, MnistSplit::Train).is_err());
        fs::remove_dir_all(dir).ok();
    }

    #[test]
    fn count_mismatch_is_an_error() {
        let dir = scratch_dir("mismatch");
        let imgs = IdxImages {
            count: 1,
            rows: 1,
            cols: 1,
            pixels: vec![9],
        };
        fs::write(dir.join("train-images-idx3-ubyte"), write_idx_images(&imgs)).unwrap();
        fs::write(dir.join("train-labels-idx1-ubyte"), write_idx_labels(&[1, 2])).unwrap();
        assert!(load_mnist_split(&dir, MnistSplit::Train).is_err());
        fs::remove_dir_all(dir).ok();
    }
}
