//! Labeled image collections and the `BNDS` file format.
//!
//! Pixels are held 8-bit quantized in memory, exactly as they are written to
//! disk, and de-quantized to `v / 255` when batches are assembled for training.
//! A dataset read back from a file is therefore equal to the one written.
//!
//! File layout (little-endian):
//!
//! ```text
//! "BNDS" | version u16 | task u8 | count u64 | seed u64
//! count x ( label u8 | 1024 pixel bytes )
//! ```

use std::fs;
use std::io::{self, BufWriter, Write};
use std::path::Path;

use rayon::prelude::*;

use crate::linalg::Matrix;
use crate::raster::{rasterize, Image, PIXELS};
use crate::rng::{mix, Rng};
use crate::stimulus::{gen_spec, StimulusError, Task};

pub const DATASET_MAGIC: &[u8; 4] = b"BNDS";
pub const DATASET_VERSION: u16 = 1;
const HEADER_LEN: usize = 4 + 2 + 1 + 8 + 8;
const RECORD_LEN: usize = 1 + PIXELS;

/// Stream index reserved for the label shuffle, disjoint from example indices.
const LABEL_STREAM: u64 = u64::MAX;

#[derive(Debug, thiserror::Error)]
pub enum DatasetError {
    #[error("dataset needs at least 2 examples, got {0}")]
    TooSmall(usize),
    #[error("example {index}: {source}")]
    Generation {
        index: usize,
        #[source]
        source: StimulusError,
    },
    #[error("bad magic {0:?}, expected \"BNDS\"")]
    BadMagic([u8; 4]),
    #[error("unsupported dataset version {0}")]
    UnsupportedVersion(u16),
    #[error("unknown task id {0}")]
    UnknownTask(u8),
    #[error("file truncated: expected {expected} bytes, found {found}")]
    Truncated { expected: u64, found: u64 },
    #[error("trailing bytes after {0} examples")]
    TrailingBytes(u64),
    #[error("example {index} has non-binary label {label}")]
    BadLabel { index: usize, label: u8 },
    #[error(transparent)]
    Io(#[from] io::Error),
}

impl DatasetError {
    /// Stable numeric code per failure kind, used as a process exit status.
    pub fn code(&self) -> i32 {
        match self {
            DatasetError::TooSmall(_) => 10,
            DatasetError::Generation { .. } => 11,
            DatasetError::BadMagic(_) => 12,
            DatasetError::UnsupportedVersion(_) => 13,
            DatasetError::UnknownTask(_) => 14,
            DatasetError::Truncated { .. } => 15,
            DatasetError::TrailingBytes(_) => 16,
            DatasetError::BadLabel { .. } => 17,
            DatasetError::Io(_) => 18,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Dataset {
    pub task: Task,
    pub seed: u64,
    labels: Vec<u8>,
    pixels: Vec<u8>,
}

impl Dataset {
    pub fn from_parts(task: Task, seed: u64, labels: Vec<u8>, pixels: Vec<u8>) -> Self {
        assert_eq!(labels.len() * PIXELS, pixels.len(), "pixel buffer size");
        Self {
            task,
            seed,
            labels,
            pixels,
        }
    }

    pub fn len(&self) -> usize {
        self.labels.len()
    }

    pub fn is_empty(&self) -> bool {
        self.labels.is_empty()
    }

    pub fn label(&self, i: usize) -> u8 {
        self.labels[i]
    }

    pub fn labels(&self) -> &[u8] {
        &self.labels
    }

    pub fn quantized(&self, i: usize) -> &[u8] {
        &self.pixels[i * PIXELS..(i + 1) * PIXELS]
    }

    pub fn image(&self, i: usize) -> Image {
        Image::from_quantized(self.quantized(i))
    }

    /// De-quantized rows for the given example indices.
    pub fn gather(&self, rows: &[usize]) -> Matrix {
        let mut m = Matrix::zeros(rows.len(), PIXELS);
        for (r, &i) in rows.iter().enumerate() {
            for (dst, &b) in m.row_mut(r).iter_mut().zip(self.quantized(i)) {
                *dst = f64::from(b) / 255.0;
            }
        }
        m
    }

    pub fn count_label(&self, label: u8) -> usize {
        self.labels.iter().filter(|&&l| l == label).count()
    }

    pub fn to_bytes(&self) -> Vec<u8> {
        let mut out = Vec::with_capacity(HEADER_LEN + self.len() * RECORD_LEN);
        out.extend_from_slice(DATASET_MAGIC);
        out.extend_from_slice(&DATASET_VERSION.to_le_bytes());
        out.push(self.task.id());
        out.extend_from_slice(&(self.len() as u64).to_le_bytes());
        out.extend_from_slice(&self.seed.to_le_bytes());
        for i in 0..self.len() {
            out.push(self.labels[i]);
            out.extend_from_slice(self.quantized(i));
        }
        out
    }

    pub fn from_bytes(bytes: &[u8]) -> Result<Self, DatasetError> {
        if bytes.len() < 4 {
            return Err(DatasetError::Truncated {
                expected: HEADER_LEN as u64,
                found: bytes.len() as u64,
            });
        }
        let magic: [u8; 4] = bytes[..4].try_into().expect("4 bytes");
        if &magic != DATASET_MAGIC {
            return Err(DatasetError::BadMagic(magic));
        }
        if bytes.len() < HEADER_LEN {
            return Err(DatasetError::Truncated {
                expected: HEADER_LEN as u64,
                found: bytes.len() as u64,
            });
        }
        let version = u16::from_le_bytes([bytes[4], bytes[5]]);
        if version != DATASET_VERSION {
            return Err(DatasetError::UnsupportedVersion(version));
        }
        let task = Task::from_id(bytes[6]).ok_or(DatasetError::UnknownTask(bytes[6]))?;
        let count = u64::from_le_bytes(bytes[7..15].try_into().expect("8 bytes"));
        let seed = u64::from_le_bytes(bytes[15..23].try_into().expect("8 bytes"));

        let expected = (count as u128) * RECORD_LEN as u128 + HEADER_LEN as u128;
        let found = bytes.len() as u128;
        if found < expected {
            return Err(DatasetError::Truncated {
                expected: expected.min(u64::MAX as u128) as u64,
                found: bytes.len() as u64,
            });
        }
        if found > expected {
            return Err(DatasetError::TrailingBytes(count));
        }

        let n = count as usize;
        let mut labels = Vec::with_capacity(n);
        let mut pixels = Vec::with_capacity(n * PIXELS);
        for (index, record) in bytes[HEADER_LEN..].chunks_exact(RECORD_LEN).enumerate() {
            let label = record[0];
            if label > 1 {
                return Err(DatasetError::BadLabel { index, label });
            }
            labels.push(label);
            pixels.extend_from_slice(&record[1..]);
        }
        Ok(Self::from_parts(task, seed, labels, pixels))
    }
}

/// Generates `n` balanced examples of `task`. Example `i` draws from its own
/// stream `mix(seed, i)`, so parallel and sequential generation agree.
pub fn build_dataset(task: Task, n: usize, seed: u64) -> Result<Dataset, DatasetError> {
    if n < 2 {
        return Err(DatasetError::TooSmall(n));
    }
    let mut labels: Vec<u8> = (0..n).map(|i| (i % 2) as u8).collect();
    Rng::new(mix(seed, LABEL_STREAM)).shuffle(&mut labels);

    let images: Vec<Vec<u8>> = labels
        .par_iter()
        .enumerate()
        .map(|(index, &label)| {
            let mut rng = Rng::new(mix(seed, index as u64));
            let spec = gen_spec(task, label, &mut rng).map_err(|source| DatasetError::Generation { index, source })?;
            let img = rasterize(&spec, &mut rng).map_err(|source| DatasetError::Generation { index, source })?;
            Ok(img.quantize())
        })
        .collect::<Result<_, DatasetError>>()?;

    Ok(Dataset::from_parts(task, seed, labels, images.concat()))
}

pub fn write_dataset(dataset: &Dataset, path: impl AsRef<Path>) -> Result<(), DatasetError> {
    let mut w = BufWriter::new(fs::File::create(path)?);
    w.write_all(&dataset.to_bytes())?;
    w.flush()?;
    Ok(())
}

pub fn read_dataset(path: impl AsRef<Path>) -> Result<Dataset, DatasetError> {
    Dataset::from_bytes(&fs::read(path)?)
}
