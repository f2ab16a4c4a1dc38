//! Versioned binary model container.
//!
//! All integers are little-endian `u32`, all reals little-endian IEEE-754 `f64`.
//!
//! ```text
//! magic            8 bytes   "SSWPMODL"
//! version          u32       MODEL_FORMAT_VERSION
//! config hash      u64       first 8 bytes (LE) of SHA-256(config block)
//! config length    u32       byte length of the config block
//! config block:
//!   n_sizes        u32
//!   layer sizes    n_sizes × u32
//!   alpha          f64
//!   output act.    u8        0 = identity, 1 = leaky ReLU
//! normalization    6 × f64 input maxima, 3 × f64 output maxima, f64 log base
//! per layer l:
//!   rows, cols     u32, u32  (fan_out, fan_in)
//!   weights        rows × cols f64, row-major
//!   bias           rows f64
//! checksum         32 bytes  SHA-256 of every preceding byte
//! ```

use std::path::Path;

use sha2::{Digest, Sha256};

use super::matrix::Matrix;
use super::network::{ForwardTrace, Layer, NetworkConfig, NetworkParameters, OutputActivation};
use crate::dataset::{NormalizationSpec, INPUT_DIM, NUMERIC_INPUTS, OUTPUT_DIM};
use crate::error::LoadError;
use crate::sensor::SettingsCombination;
use crate::{Error, Result};

pub const MODEL_MAGIC: [u8; 8] = *b"SSWPMODL";
pub const MODEL_FORMAT_VERSION: u32 = 1;
const CHECKSUM_LEN: usize = 32;

/// A trained network together with the normalization that feeds it.
#[derive(Debug, Clone, PartialEq)]
pub struct Surrogate {
    pub config: NetworkConfig,
    pub params: NetworkParameters,
    pub norm: NormalizationSpec,
}

impl Surrogate {
    pub fn new(config: NetworkConfig, params: NetworkParameters, norm: NormalizationSpec) -> Result<Self> {
        config.validate()?;
        params.check_shapes(&config)?;
        norm.validate()?;
        if config.input_dim() != INPUT_DIM || config.output_dim() != OUTPUT_DIM {
            return Err(Error::Config("surrogate must map 10 inputs to 3 outputs".into()));
        }
        Ok(Surrogate { config, params, norm })
    }

    pub fn trace(&self) -> ForwardTrace {
        ForwardTrace::for_config(&self.config)
    }

    /// Normalized outputs for an encoded input.
    pub fn predict_encoded<'t>(&self, input: &[f64], trace: &'t mut ForwardTrace) -> &'t [f64] {
        self.params.predict_into(&self.config, input, trace)
    }

    /// `(signal, snr, output3)` in physical units.
    pub fn predict(
        &self,
        s: &SettingsCombination,
        input5: u32,
        category: usize,
        trace: &mut ForwardTrace,
    ) -> Result<(f64, f64, f64)> {
        let x = self.norm.encode_settings(s, input5, category)?;
        let y = self.predict_encoded(&x, trace);
        Ok(self.norm.decode_outputs(y))
    }

    pub fn to_bytes(&self) -> Vec<u8> {
        let config = config_block(&self.config);
        let mut out = Vec::new();
        out.extend_from_slice(&MODEL_MAGIC);
        out.extend_from_slice(&MODEL_FORMAT_VERSION.to_le_bytes());
        out.extend_from_slice(&config_hash(&config).to_le_bytes());
        out.extend_from_slice(&(config.len() as u32).to_le_bytes());
        out.extend_from_slice(&config);
        for v in self.norm.input_max.iter().chain(&self.norm.output_max) {
            out.extend_from_slice(&v.to_le_bytes());
        }
        out.extend_from_slice(&self.norm.log_base.to_le_bytes());
        for layer in &self.params.layers {
            out.extend_from_slice(&(layer.weights.rows() as u32).to_le_bytes());
            out.extend_from_slice(&(layer.weights.cols() as u32).to_le_bytes());
            for v in layer.weights.as_slice().iter().chain(&layer.bias) {
                out.extend_from_slice(&v.to_le_bytes());
            }
        }
        let digest = Sha256::digest(&out);
        out.extend_from_slice(&digest);
        out
    }

    pub fn from_bytes(bytes: &[u8]) -> Result<Self> {
        if bytes.len() < MODEL_MAGIC.len() || bytes[..MODEL_MAGIC.len()] != MODEL_MAGIC {
            return Err(LoadError::BadMagic.into());
        }
        if bytes.len() < MODEL_MAGIC.len() + 4 + CHECKSUM_LEN {
            return Err(LoadError::Corrupt("file too short".into()).into());
        }
        let (body, checksum) = bytes.split_at(bytes.len() - CHECKSUM_LEN);
        if Sha256::digest(body).as_slice() != checksum {
            return Err(LoadError::Corrupt("checksum mismatch".into()).into());
        }
        let mut r = Reader { buf: body, pos: MODEL_MAGIC.len() };
        let version = r.u32()?;
        if version != MODEL_FORMAT_VERSION {
            return Err(LoadError::Version {
                found: version,
                expected: MODEL_FORMAT_VERSION,
            }
            .into());
        }
        let stored_hash = r.u64()?;
        let config_len = r.u32()? as usize;
        let config_bytes = r.take(config_len)?;
        let computed = config_hash(config_bytes);
        if computed != stored_hash {
            return Err(LoadError::ConfigHash {
                stored: stored_hash,
                computed,
            }
            .into());
        }
        let config = parse_config(config_bytes)?;

        let mut input_max = [0.0; NUMERIC_INPUTS];
        for v in &mut input_max {
            *v = r.f64()?;
        }
        let mut output_max = [0.0; OUTPUT_DIM];
        for v in &mut output_max {
            *v = r.f64()?;
        }
        let norm = NormalizationSpec {
            input_max,
            output_max,
            log_base: r.f64()?,
        };

        let mut layers = Vec::with_capacity(config.n_layers());
        for w in config.layer_sizes.windows(2) {
            let rows = r.u32()? as usize;
            let cols = r.u32()? as usize;
            if rows != w[1] || cols != w[0] {
                return Err(LoadError::Corrupt(format!(
                    "layer shape {rows}x{cols} does not match config {}x{}",
                    w[1], w[0]
                ))
                .into());
            }
            let weights = (0..rows * cols).map(|_| r.f64()).collect::<Result<Vec<_>>>()?;
            let bias = (0..rows).map(|_| r.f64()).collect::<Result<Vec<_>>>()?;
            layers.push(Layer {
                weights: Matrix::from_vec(rows, cols, weights),
                bias,
            });
        }
        if r.pos != body.len() {
            return Err(LoadError::Corrupt(format!("{} trailing bytes", body.len() - r.pos)).into());
        }
        let params = NetworkParameters { layers };
        if !params.all_finite() {
            return Err(LoadError::Corrupt("non-finite parameter".into()).into());
        }
        Surrogate::new(config, params, norm).map_err(|e| LoadError::Corrupt(e.to_string()).into())
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        std::fs::write(path, self.to_bytes()).map_err(|e| Error::io(path, e))
    }

    pub fn load(path: &Path) -> Result<Self> {
        let bytes = std::fs::read(path).map_err(|e| Error::io(path, e))?;
        Self::from_bytes(&bytes)
    }
}

fn config_block(config: &NetworkConfig) -> Vec<u8> {
    let mut b = Vec::new();
    b.extend_from_slice(&(config.layer_sizes.len() as u32).to_le_bytes());
    for &n in &config.layer_sizes {
        b.extend_from_slice(&(n as u32).to_le_bytes());
    }
    b.extend_from_slice(&config.alpha.to_le_bytes());
    b.push(match config.output_activation {
        OutputActivation::Identity => 0,
        OutputActivation::LeakyRelu => 1,
    });
    b
}

fn config_hash(block: &[u8]) -> u64 {
    let d = Sha256::digest(block);
    u64::from_le_bytes(d[..8].try_into().unwrap())
}

fn parse_config(block: &[u8]) -> Result<NetworkConfig> {
    let mut r = Reader { buf: block, pos: 0 };
    let n = r.u32()? as usize;
    if n > 1024 {
        return Err(LoadError::Corrupt(format!("implausible layer count {n}")).into());
    }
    let layer_sizes = (0..n).map(|_| r.u32().map(|v| v as usize)).collect::<Result<Vec<_>>>()?;
    let alpha = r.f64()?;
    let output_activation = match r.take(1)?[0] {
        0 => OutputActivation::Identity,
        1 => OutputActivation::LeakyRelu,
        k => return Err(LoadError::Corrupt(format!("unknown output activation tag {k}")).into()),
    };
    if r.pos != block.len() {
        return Err(LoadError::Corrupt("config block has trailing bytes".into()).into());
    }
    let config = NetworkConfig {
        layer_sizes,
        alpha,
        output_activation,
    };
    config.validate().map_err(|e| LoadError::Corrupt(e.to_string()))?;
    Ok(config)
}

struct Reader<'a> {
    buf: &'a [u8],
    pos: usize,
}

impl<'a> Reader<'a> {
    fn take(&mut self, n: usize) -> Result<&'a [u8]> {
        if self.buf.len() - self.pos < n {
            return Err(LoadError::Corrupt(format!("unexpected end of data at byte {}", self.pos)).into());
        }
        let s = &self.buf[self.pos..self.pos + n];
        self.pos += n;
        Ok(s)
    }

    fn u32(&mut self) -> Result<u32> {
        Ok(u32::from_le_bytes(self.take(4)?.try_into().unwrap()))
    }

    fn u64(&mut self) -> Result<u64> {
        Ok(u64::from_le_bytes(self.take(8)?.try_into().unwrap()))
    }

    fn f64(&mut self) -> Result<f64> {
        Ok(f64::from_le_bytes(self.take(8)?.try_into().unwrap()))
    }
}
