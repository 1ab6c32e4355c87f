//! Codec parameters, their deterministic defaults, and the binary weight file.
//!
//! File layout (little-endian throughout):
//!
//! ```text
//! "ABWT" | version u8 | config_count u8 | config_count x (id u8, stride u8, channels u8)
//!        | trunk_width u16 | trunk_stages u8
//! tensor records, each: rank u8 | dims u32 x rank | f32 x prod(dims)
//!   per config in id order: encoder kernel (c,4,s,s), encoder bias (c),
//!                           head kernel (t,c,s,s), head bias (t)
//!   per trunk stage:        conv1 (t,t,3,3), bias1 (t), conv2 (t,t,3,3), bias2 (t)
//!   projection (4,t), projection bias (4)
//! ```

use std::fs::File;
use std::io::{BufReader, BufWriter, Read, Write};
use std::path::Path;

use super::CodecConfig;
use crate::error::{Error, Result};

pub const DEFAULT_TRUNK_WIDTH: usize = 16;
pub const DEFAULT_TRUNK_STAGES: usize = 3;

const MAGIC: &[u8; 4] = b"ABWT";
const VERSION: u8 = 1;

/// Dense row-major f32 tensor.
#[derive(Debug, Clone, PartialEq)]
pub struct Tensor {
    pub dims: Vec<usize>,
    pub data: Vec<f32>,
}

impl Tensor {
    pub fn zeros(dims: &[usize]) -> Self {
        Tensor { dims: dims.to_vec(), data: vec![0.0; dims.iter().product()] }
    }

    pub fn from_vec(dims: &[usize], data: Vec<f32>) -> Result<Self> {
        let n: usize = dims.iter().product();
        if n != data.len() {
            return Err(Error::mismatch(n, data.len()));
        }
        Ok(Tensor { dims: dims.to_vec(), data })
    }

    fn index(&self, idx: &[usize]) -> usize {
        idx.iter().zip(&self.dims).fold(0, |acc, (&i, &d)| acc * d + i)
    }

    pub fn at(&self, idx: &[usize]) -> f32 {
        self.data[self.index(idx)]
    }

    pub fn set(&mut self, idx: &[usize], value: f32) {
        let i = self.index(idx);
        self.data[i] = value;
    }

    pub fn is_zero(&self) -> bool {
        self.data.iter().all(|&v| v == 0.0)
    }
}

/// Patch convolution of one configuration: kernel `(c, 4, s, s)`, bias `(c)`.
#[derive(Debug, Clone, PartialEq)]
pub struct EncoderLayer {
    pub kernel: Tensor,
    pub bias: Vec<f32>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct EncoderWeights {
    /// Indexed by config id.
    pub layers: Vec<EncoderLayer>,
}

/// Transposed patch convolution: kernel `(t, c, s, s)`, bias `(t)`.
#[derive(Debug, Clone, PartialEq)]
pub struct DecoderHead {
    pub kernel: Tensor,
    pub bias: Vec<f32>,
}

/// `x + conv2(relu(conv1(x)))` with 3x3 zero-padded convolutions.
#[derive(Debug, Clone, PartialEq)]
pub struct ResidualStage {
    pub conv1: Tensor,
    pub bias1: Vec<f32>,
    pub conv2: Tensor,
    pub bias2: Vec<f32>,
}

impl ResidualStage {
    pub fn identity(width: usize) -> Self {
        ResidualStage {
            conv1: Tensor::zeros(&[width, width, 3, 3]),
            bias1: vec![0.0; width],
            conv2: Tensor::zeros(&[width, width, 3, 3]),
            bias2: vec![0.0; width],
        }
    }

    /// The residual branch contributes nothing.
    pub fn is_identity(&self) -> bool {
        self.conv2.is_zero() && self.bias2.iter().all(|&b| b == 0.0)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct DecoderWeights {
    /// Per-config heads, indexed by config id.
    pub heads: Vec<DecoderHead>,
    /// Shared by every head.
    pub trunk: Vec<ResidualStage>,
    /// `(4, t)` 1x1 projection back to the CFA planes.
    pub projection: Tensor,
    pub projection_bias: Vec<f32>,
}

impl DecoderWeights {
    pub fn trunk_width(&self) -> usize {
        self.projection.dims[1]
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct CodecWeights {
    pub encoder: EncoderWeights,
    pub decoder: DecoderWeights,
}

/// Untrained parameters that make the codec usable out of the box.
///
/// Output channel `j < 4` of every encoder is the patch mean of plane `j`.
/// Eight-channel encoders add the mean of the left half of each patch for
/// every plane, which the matching head turns back into separate left and
/// right half means. Each kernel sums to one per output channel, so a
/// uniform tile maps to uniform features of the same (scaled) value.
pub fn default_weights() -> CodecWeights {
    let width = DEFAULT_TRUNK_WIDTH;
    let mut layers = Vec::new();
    let mut heads = Vec::new();
    for cfg in CodecConfig::ALL {
        let (s, c) = (cfg.stride(), cfg.channels());
        let mut kernel = Tensor::zeros(&[c, 4, s, s]);
        let full = 1.0 / (s * s) as f32;
        let half = 2.0 / (s * s) as f32;
        for plane in 0..4 {
            for dy in 0..s {
                for dx in 0..s {
                    kernel.set(&[plane, plane, dy, dx], full);
                    if c == 8 && dx < s / 2 {
                        kernel.set(&[4 + plane, plane, dy, dx], half);
                    }
                }
            }
        }
        layers.push(EncoderLayer { kernel, bias: vec![0.0; c] });

        let mut head = Tensor::zeros(&[width, c, s, s]);
        for plane in 0..4 {
            for dy in 0..s {
                for dx in 0..s {
                    if c == 8 {
                        if dx < s / 2 {
                            head.set(&[plane, 4 + plane, dy, dx], 1.0);
                        } else {
                            head.set(&[plane, plane, dy, dx], 2.0);
                            head.set(&[plane, 4 + plane, dy, dx], -1.0);
                        }
                    } else {
                        head.set(&[plane, plane, dy, dx], 1.0);
                    }
                }
            }
        }
        heads.push(DecoderHead { kernel: head, bias: vec![0.0; width] });
    }

    let mut projection = Tensor::zeros(&[4, width]);
    for plane in 0..4 {
        projection.set(&[plane, plane], 1.0);
    }
    CodecWeights {
        encoder: EncoderWeights { layers },
        decoder: DecoderWeights {
            heads,
            trunk: (0..DEFAULT_TRUNK_STAGES).map(|_| ResidualStage::identity(width)).collect(),
            projection,
            projection_bias: vec![0.0; 4],
        },
    }
}

fn write_tensor<W: Write>(out: &mut W, dims: &[usize], data: &[f32]) -> Result<()> {
    out.write_all(&[dims.len() as u8])?;
    for &d in dims {
        out.write_all(&(d as u32).to_le_bytes())?;
    }
    for &v in data {
        out.write_all(&v.to_le_bytes())?;
    }
    Ok(())
}

pub fn write_weights<W: Write>(mut out: W, weights: &CodecWeights) -> Result<()> {
    let dec = &weights.decoder;
    out.write_all(MAGIC)?;
    out.write_all(&[VERSION, CodecConfig::ALL.len() as u8])?;
    for cfg in CodecConfig::ALL {
        out.write_all(&[cfg.id(), cfg.stride() as u8, cfg.channels() as u8])?;
    }
    out.write_all(&(dec.trunk_width() as u16).to_le_bytes())?;
    out.write_all(&[dec.trunk.len() as u8])?;
    for (layer, head) in weights.encoder.layers.iter().zip(&dec.heads) {
        write_tensor(&mut out, &layer.kernel.dims, &layer.kernel.data)?;
        write_tensor(&mut out, &[layer.bias.len()], &layer.bias)?;
        write_tensor(&mut out, &head.kernel.dims, &head.kernel.data)?;
        write_tensor(&mut out, &[head.bias.len()], &head.bias)?;
    }
    for stage in &dec.trunk {
        write_tensor(&mut out, &stage.conv1.dims, &stage.conv1.data)?;
        write_tensor(&mut out, &[stage.bias1.len()], &stage.bias1)?;
        write_tensor(&mut out, &stage.conv2.dims, &stage.conv2.data)?;
        write_tensor(&mut out, &[stage.bias2.len()], &stage.bias2)?;
    }
    write_tensor(&mut out, &dec.projection.dims, &dec.projection.data)?;
    write_tensor(&mut out, &[dec.projection_bias.len()], &dec.projection_bias)?;
    Ok(())
}

pub fn save_weights(path: impl AsRef<Path>, weights: &CodecWeights) -> Result<()> {
    let mut out = BufWriter::new(File::create(path)?);
    write_weights(&mut out, weights)?;
    out.flush()?;
    Ok(())
}

struct Reader<R> {
    inner: R,
}

impl<R: Read> Reader<R> {
    fn bytes<const N: usize>(&mut self) -> Result<[u8; N]> {
        let mut buf = [0u8; N];
        self.inner
            .read_exact(&mut buf)
            .map_err(|e| Error::format("weight file", format!("truncated: {e}")))?;
        Ok(buf)
    }

    fn u8(&mut self) -> Result<u8> {
        Ok(self.bytes::<1>()?[0])
    }

    /// Reads one record and checks its shape against `expected`.
    fn tensor(&mut self, what: &str, expected: &[usize]) -> Result<Tensor> {
        let rank = self.u8()? as usize;
        let mut dims = Vec::with_capacity(rank);
        for _ in 0..rank {
            dims.push(u32::from_le_bytes(self.bytes::<4>()?) as usize);
        }
        if dims != expected {
            return Err(Error::mismatch(
                format!("{what} dims {expected:?}"),
                format!("{dims:?}"),
            ));
        }
        let n: usize = dims.iter().product();
        let mut raw = vec![0u8; n * 4];
        self.inner
            .read_exact(&mut raw)
            .map_err(|e| Error::format("weight file", format!("truncated {what}: {e}")))?;
        let data: Vec<f32> =
            raw.chunks_exact(4).map(|b| f32::from_le_bytes(b.try_into().unwrap())).collect();
        if data.iter().any(|v| !v.is_finite()) {
            return Err(Error::format("weight file", format!("{what} holds non-finite values")));
        }
        Ok(Tensor { dims, data })
    }

    fn vector(&mut self, what: &str, len: usize) -> Result<Vec<f32>> {
        Ok(self.tensor(what, &[len])?.data)
    }
}

pub fn read_weights<R: Read>(input: R) -> Result<CodecWeights> {
    let mut r = Reader { inner: input };
    if &r.bytes::<4>()? != MAGIC {
        return Err(Error::format("weight file", "bad magic"));
    }
    let version = r.u8()?;
    if version != VERSION {
        return Err(Error::format("weight file", format!("unsupported version {version}")));
    }
    let count = r.u8()? as usize;
    if count != CodecConfig::ALL.len() {
        return Err(Error::format("weight file", format!("expected 4 configs, found {count}")));
    }
    for expected in CodecConfig::ALL {
        let [id, stride, channels] = r.bytes::<3>()?;
        let found = CodecConfig::from_id(id)?;
        if found != expected || found.stride() != stride as usize || found.channels() != channels as usize
        {
            return Err(Error::format(
                "weight file",
                format!("config table entry {id} = ({stride},{channels}) does not match {expected}"),
            ));
        }
    }
    let width = u16::from_le_bytes(r.bytes::<2>()?) as usize;
    if width < 4 {
        return Err(Error::format("weight file", "trunk narrower than the four CFA planes"));
    }
    let stages = r.u8()? as usize;

    let mut layers = Vec::new();
    let mut heads = Vec::new();
    for cfg in CodecConfig::ALL {
        let (s, c) = (cfg.stride(), cfg.channels());
        let kernel = r.tensor(&format!("encoder {cfg} kernel"), &[c, 4, s, s])?;
        let bias = r.vector(&format!("encoder {cfg} bias"), c)?;
        layers.push(EncoderLayer { kernel, bias });
        let kernel = r.tensor(&format!("head {cfg} kernel"), &[width, c, s, s])?;
        let bias = r.vector(&format!("head {cfg} bias"), width)?;
        heads.push(DecoderHead { kernel, bias });
    }
    let mut trunk = Vec::with_capacity(stages);
    for i in 0..stages {
        trunk.push(ResidualStage {
            conv1: r.tensor(&format!("trunk {i} conv1"), &[width, width, 3, 3])?,
            bias1: r.vector(&format!("trunk {i} bias1"), width)?,
            conv2: r.tensor(&format!("trunk {i} conv2"), &[width, width, 3, 3])?,
            bias2: r.vector(&format!("trunk {i} bias2"), width)?,
        });
    }
    let projection = r.tensor("projection", &[4, width])?;
    let projection_bias = r.vector("projection bias", 4)?;
    let mut rest = Vec::new();
    r.inner.read_to_end(&mut rest)?;
    if !rest.is_empty() {
        return Err(Error::format("weight file", format!("{} trailing bytes", rest.len())));
    }
    Ok(CodecWeights {
        encoder: EncoderWeights { layers },
        decoder: DecoderWeights { heads, trunk, projection, projection_bias },
    })
}

pub fn load_weights(path: impl AsRef<Path>) -> Result<CodecWeights> {
    read_weights(BufReader::new(File::open(path)?))
}
