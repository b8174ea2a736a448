//! `BNMD` model files.
//!
//! ```text
//! "BNMD" | version u16 | layer count u8
//! per layer: input u32 | output u32 | activation u8 | frozen u8
//!            | weights f64 x (output*input), row-major | biases f64 x output
//! ```
//!
//! All integers and floats are little-endian.

use std::fs;
use std::io;
use std::path::Path;

use sha2::{Digest, Sha256};

use crate::net::{Activation, DenseLayer, NetError, Network};

pub const MODEL_MAGIC: &[u8; 4] = b"BNMD";
pub const MODEL_VERSION: u16 = 1;

#[derive(Debug, thiserror::Error)]
pub enum ModelIoError {
    #[error("bad magic {0:?}")]
    BadMagic([u8; 4]),
    #[error("unsupported model version {0}")]
    UnsupportedVersion(u16),
    #[error("model file truncated at byte {0}")]
    Truncated(usize),
    #[error("{0} trailing bytes after the last layer")]
    TrailingBytes(usize),
    #[error("unknown activation code {0}")]
    BadActivation(u8),
    #[error("too many layers ({0}) for the format")]
    TooManyLayers(usize),
    #[error("invalid network: {0}")]
    Invalid(#[from] NetError),
    #[error(transparent)]
    Io(#[from] io::Error),
}

impl ModelIoError {
    /// Stable numeric code per failure kind.
    pub fn code(&self) -> i32 {
        match self {
            ModelIoError::BadMagic(_) => 20,
            ModelIoError::UnsupportedVersion(_) => 21,
            ModelIoError::Truncated(_) => 22,
            ModelIoError::TrailingBytes(_) => 23,
            ModelIoError::BadActivation(_) => 24,
            ModelIoError::TooManyLayers(_) => 25,
            ModelIoError::Invalid(_) => 26,
            ModelIoError::Io(_) => 27,
        }
    }
}

pub fn encode_layers(layers: &[DenseLayer]) -> Result<Vec<u8>, ModelIoError> {
    let count = u8::try_from(layers.len()).map_err(|_| ModelIoError::TooManyLayers(layers.len()))?;
    let params: usize = layers.iter().map(DenseLayer::param_count).sum();
    let mut out = Vec::with_capacity(7 + layers.len() * 10 + params * 8);
    out.extend_from_slice(MODEL_MAGIC);
    out.extend_from_slice(&MODEL_VERSION.to_le_bytes());
    out.push(count);
    for l in layers {
        write_layer(&mut out, l, true);
    }
    Ok(out)
}

fn write_layer(out: &mut Vec<u8>, l: &DenseLayer, with_flags: bool) {
    out.extend_from_slice(&(l.input_width as u32).to_le_bytes());
    out.extend_from_slice(&(l.output_width as u32).to_le_bytes());
    if with_flags {
        out.push(l.activation.code());
        out.push(u8::from(l.frozen));
    }
    for v in l.weights.iter().chain(&l.biases) {
        out.extend_from_slice(&v.to_le_bytes());
    }
}

struct Reader<'a> {
    bytes: &'a [u8],
    pos: usize,
}

impl<'a> Reader<'a> {
    fn take(&mut self, n: usize) -> Result<&'a [u8], ModelIoError> {
        let end = self.pos.checked_add(n).filter(|&e| e <= self.bytes.len());
        match end {
            Some(end) => {
                let s = &self.bytes[self.pos..end];
                self.pos = end;
                Ok(s)
            }
            None => Err(ModelIoError::Truncated(self.bytes.len())),
        }
    }

    fn u8(&mut self) -> Result<u8, ModelIoError> {
        Ok(self.take(1)?[0])
    }

    fn u32(&mut self) -> Result<u32, ModelIoError> {
        Ok(u32::from_le_bytes(self.take(4)?.try_into().expect("4 bytes")))
    }

    fn f64s(&mut self, n: usize) -> Result<Vec<f64>, ModelIoError> {
        let raw = self.take(n.checked_mul(8).ok_or(ModelIoError::Truncated(self.bytes.len()))?)?;
        Ok(raw
            .chunks_exact(8)
            .map(|c| f64::from_le_bytes(c.try_into().expect("8 bytes")))
            .collect())
    }
}

/// Decodes the layer list without checking that it chains into a [`Network`].
/// Returns the layers and the number of bytes consumed.
pub fn decode_layers(bytes: &[u8]) -> Result<(Vec<DenseLayer>, usize), ModelIoError> {
    let mut r = Reader { bytes, pos: 0 };
    let magic: [u8; 4] = r
        .take(4)
        .map_err(|_| ModelIoError::Truncated(bytes.len()))?
        .try_into()
        .expect("4 bytes");
    if &magic != MODEL_MAGIC {
        return Err(ModelIoError::BadMagic(magic));
    }
    let version = u16::from_le_bytes(r.take(2)?.try_into().expect("2 bytes"));
    if version != MODEL_VERSION {
        return Err(ModelIoError::UnsupportedVersion(version));
    }
    let count = r.u8()?;
    let mut layers = Vec::with_capacity(usize::from(count));
    for _ in 0..count {
        let input_width = r.u32()? as usize;
        let output_width = r.u32()? as usize;
        let code = r.u8()?;
        let activation = Activation::from_code(code).ok_or(ModelIoError::BadActivation(code))?;
        let frozen = r.u8()? != 0;
        let weights = r.f64s(input_width.saturating_mul(output_width))?;
        let biases = r.f64s(output_width)?;
        layers.push(DenseLayer {
            input_width,
            output_width,
            activation,
            weights,
            biases,
            frozen,
        });
    }
    Ok((layers, r.pos))
}

pub fn encode_network(net: &Network) -> Vec<u8> {
    encode_layers(net.layers()).expect("network layer count fits in u8")
}

pub fn decode_network(bytes: &[u8]) -> Result<Network, ModelIoError> {
    let (layers, used) = decode_layers(bytes)?;
    if used != bytes.len() {
        return Err(ModelIoError::TrailingBytes(bytes.len() - used));
    }
    Ok(Network::from_layers(layers)?)
}

pub fn save_model(net: &Network, path: impl AsRef<Path>) -> Result<(), ModelIoError> {
    fs::write(path, encode_network(net))?;
    Ok(())
}

pub fn load_model(path: impl AsRef<Path>) -> Result<Network, ModelIoError> {
    decode_network(&fs::read(path)?)
}

/// SHA-256 over widths, weights and biases of every layer. Ignores the
/// activation and frozen flags so a base keeps its digest once frozen.
pub fn parameter_digest(layers: &[DenseLayer]) -> [u8; 32] {
    let mut buf = Vec::new();
    for l in layers {
        write_layer(&mut buf, l, false);
    }
    Sha256::digest(&buf).into()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::net::{init_network, mlp_specs};

    #[test]
    fn file_size_matches_layout() {
        let net = init_network(&mlp_specs(2, &[8, 4]), 3).unwrap();
        let bytes = encode_network(&net);
        assert_eq!(bytes.len(), 7 + 3 * 10 + 8 * (8 * 2 + 8 + 4 * 8 + 4 + 4 + 1));
        assert_eq!(bytes.len(), 557);
    }

    #[test]
    fn round_trip_is_bit_exact() {
        let mut net = init_network(&mlp_specs(5, &[3, 2]), 3).unwrap();
        net.layers_mut()[1].frozen = true;
        net.layers_mut()[0].biases[1] = -0.0;
        let back = decode_network(&encode_network(&net)).unwrap();
        assert_eq!(encode_network(&back), encode_network(&net));
        assert!(back.layers()[1].frozen);
        assert!(back.layers()[0].biases[1].is_sign_negative());
    }

    #[test]
    fn header_errors_distinguished() {
        let net = init_network(&mlp_specs(2, &[2]), 0).unwrap();
        let good = encode_network(&net);
        let mut bad = good.clone();
        bad[0] = b'X';
        assert!(matches!(decode_network(&bad), Err(ModelIoError::BadMagic(_))));
        let mut bad = good.clone();
        bad[4] = 2;
        assert!(matches!(decode_network(&bad), Err(ModelIoError::UnsupportedVersion(2))));
        assert!(matches!(
            decode_network(&good[..good.len() - 3]),
            Err(ModelIoError::Truncated(_))
        ));
        let mut long = good.clone();
        long.push(0);
        assert!(matches!(decode_network(&long), Err(ModelIoError::TrailingBytes(1))));
    }

    #[test]
    fn digest_ignores_frozen_flag() {
        let mut net = init_network(&mlp_specs(3, &[2]), 1).unwrap();
        let d0 = parameter_digest(net.layers());
        net.set_frozen(true);
        assert_eq!(parameter_digest(net.layers()), d0);
        net.layers_mut()[0].weights[0] += 1e-12;
        assert_ne!(parameter_digest(net.layers()), d0);
    }
}
