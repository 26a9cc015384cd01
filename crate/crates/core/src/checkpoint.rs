//! Binary training checkpoints with bitwise-exact resume.
//!
//! A checkpoint freezes everything the training loop needs to continue as
//! if it had never stopped: both networks' parameters, the moment
//! ledger, the completed iteration count, and the counters of the three
//! random streams. Because all randomness is counter-based, restoring
//! the counters replays the exact draw sequence — a run of `2k`
//! iterations and a run of `k`, checkpoint, restore, `k` more produce
//! bitwise-identical parameters.
//!
//! The file also embeds the canonical text of the run configuration and
//! its FNV-1a hash. A resume under a different configuration is refused
//! up front by comparing hashes rather than discovered later as drift.
//!
//! Layout (all integers little-endian):
//!
//! ```text
//! magic         8 bytes  "PPGANCK1"
//! version       u32
//! config_hash   u64
//! config_text   u64 length + UTF-8 bytes
//! iteration     u64
//! generator     network block
//! critic        network block
//! ledger        u64 length + UTF-8 snapshot text
//! counters      3 x u64  (batch, prior, noise)
//! ```
//!
//! A network block is: `u32` dim count, the dims as `u32`s, one
//! activation tag byte per layer (0 relu, 1 tanh, 2 linear), then a
//! `u64` parameter count followed by the flattened `f64` parameters in
//! layer order (weights row-major, then biases).

use std::fs::File;
use std::io::{BufReader, BufWriter, Read, Write};
use std::path::Path;

use byteorder::{LittleEndian, ReadBytesExt, WriteBytesExt};

use crate::accountant::MomentLedger;
use crate::error::{Error, Result};
use crate::mlp::{Activation, Layer, MlpParams};
use crate::ndnum::Matrix;
use crate::train::Trainer;

const MAGIC: [u8; 8] = *b"PPGANCK1";
const VERSION: u32 = 1;

/// Maximum accepted length for embedded text and parameter blocks, to
/// fail fast on corrupt length prefixes instead of attempting a huge
/// allocation.
const MAX_BLOCK: u64 = 1 << 32;

fn activation_tag(a: Activation) -> u8 {
    match a {
        Activation::Relu => 0,
        Activation::Tanh => 1,
        Activation::Linear => 2,
    }
}

fn activation_from_tag(tag: u8) -> Result<Activation> {
    match tag {
        0 => Ok(Activation::Relu),
        1 => Ok(Activation::Tanh),
        2 => Ok(Activation::Linear),
        other => Err(Error::Format(format!(
            "unknown activation tag {other} in checkpoint"
        ))),
    }
}

fn write_text<W: Write>(w: &mut W, text: &str) -> Result<()> {
    w.write_u64::<LittleEndian>(text.len() as u64)?;
    w.write_all(text.as_bytes())?;
    Ok(())
}

fn read_text<R: Read>(r: &mut R, what: &str) -> Result<String> {
    let len = r.read_u64::<LittleEndian>()?;
    if len > MAX_BLOCK {
        return Err(Error::Format(format!(
            "{what} block claims {len} bytes, refusing"
        )));
    }
    let mut buf = vec![0u8; len as usize];
    r.read_exact(&mut buf)?;
    String::from_utf8(buf)
        .map_err(|_| Error::Format(format!("{what} block is not valid UTF-8")))
}

/// Serialize one network: dims, activation tags, flattened parameters.
pub(crate) fn write_mlp<W: Write>(w: &mut W, net: &MlpParams) -> Result<()> {
    let dims = net.dims();
    w.write_u32::<LittleEndian>(dims.len() as u32)?;
    for &d in &dims {
        w.write_u32::<LittleEndian>(d as u32)?;
    }
    for a in net.activations() {
        w.write_u8(activation_tag(a))?;
    }
    let flat = net.flatten();
    w.write_u64::<LittleEndian>(flat.len() as u64)?;
    for &v in &flat {
        w.write_f64::<LittleEndian>(v)?;
    }
    Ok(())
}

/// Deserialize one network written by [`write_mlp`].
pub(crate) fn read_mlp<R: Read>(r: &mut R) -> Result<MlpParams> {
    let ndims = r.read_u32::<LittleEndian>()? as usize;
    if ndims < 2 {
        return Err(Error::Format(format!(
            "network block claims {ndims} dims, need at least input and output"
        )));
    }
    let mut dims = Vec::with_capacity(ndims);
    for _ in 0..ndims {
        dims.push(r.read_u32::<LittleEndian>()? as usize);
    }
    let mut activations = Vec::with_capacity(ndims - 1);
    for _ in 0..ndims - 1 {
        activations.push(activation_from_tag(r.read_u8()?)?);
    }
    let mut layers = Vec::with_capacity(ndims - 1);
    for (l, &activation) in activations.iter().enumerate() {
        let (d_in, d_out) = (dims[l], dims[l + 1]);
        layers.push(Layer::new(
            Matrix::zeros(d_out, d_in),
            vec![0.0; d_out],
            activation,
        )?);
    }
    let mut net = MlpParams::new(layers)?;
    let count = r.read_u64::<LittleEndian>()?;
    if count != net.param_count() as u64 {
        return Err(Error::Format(format!(
            "network block holds {count} parameters but its dims need {}",
            net.param_count()
        )));
    }
    let mut flat = Vec::with_capacity(count as usize);
    for _ in 0..count {
        flat.push(r.read_f64::<LittleEndian>()?);
    }
    net.unflatten(&flat)?;
    Ok(net)
}

/// A frozen training state, ready to write or just read.
#[derive(Debug, Clone, PartialEq)]
pub struct CheckpointState {
    /// Canonical text of the run configuration that produced this state.
    pub config_text: String,
    /// FNV-1a hash of `config_text`; resumes compare against it.
    pub config_hash: u64,
    /// Completed outer iterations.
    pub iteration: u64,
    pub generator: MlpParams,
    pub critic: MlpParams,
    pub ledger: MomentLedger,
    pub batch_counter: u64,
    pub prior_counter: u64,
    pub noise_counter: u64,
}

impl CheckpointState {
    /// Capture a trainer's current state.
    pub fn from_trainer(trainer: &Trainer, config_text: String, config_hash: u64) -> Self {
        Self {
            config_text,
            config_hash,
            iteration: trainer.iteration(),
            generator: trainer.generator().clone(),
            critic: trainer.critic().clone(),
            ledger: trainer.ledger().clone(),
            batch_counter: trainer.batch_counter(),
            prior_counter: trainer.prior_counter(),
            noise_counter: trainer.noise_counter(),
        }
    }

    /// Refuse a resume whose current configuration differs from the one
    /// the checkpoint was written under.
    pub fn verify_config_hash(&self, current: u64) -> Result<()> {
        if self.config_hash != current {
            return Err(Error::Format(format!(
                "checkpoint was written for config hash {:016x} but the \
                 current config hashes to {current:016x}; refusing to resume",
                self.config_hash
            )));
        }
        Ok(())
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        let mut w = BufWriter::new(File::create(path)?);
        w.write_all(&MAGIC)?;
        w.write_u32::<LittleEndian>(VERSION)?;
        w.write_u64::<LittleEndian>(self.config_hash)?;
        write_text(&mut w, &self.config_text)?;
        w.write_u64::<LittleEndian>(self.iteration)?;
        write_mlp(&mut w, &self.generator)?;
        write_mlp(&mut w, &self.critic)?;
        write_text(&mut w, &self.ledger.to_text())?;
        w.write_u64::<LittleEndian>(self.batch_counter)?;
        w.write_u64::<LittleEndian>(self.prior_counter)?;
        w.write_u64::<LittleEndian>(self.noise_counter)?;
        w.flush()?;
        Ok(())
    }

    pub fn load(path: &Path) -> Result<Self> {
        let mut r = BufReader::new(File::open(path)?);
        let mut magic = [0u8; 8];
        r.read_exact(&mut magic)?;
        if magic != MAGIC {
            return Err(Error::Format(format!(
                "bad checkpoint magic {magic:02x?}, expected {MAGIC:02x?}"
            )));
        }
        let version = r.read_u32::<LittleEndian>()?;
        if version != VERSION {
            return Err(Error::Format(format!(
                "unsupported checkpoint version {version}, this build reads {VERSION}"
            )));
        }
        let config_hash = r.read_u64::<LittleEndian>()?;
        let config_text = read_text(&mut r, "config text")?;
        let iteration = r.read_u64::<LittleEndian>()?;
        let generator = read_mlp(&mut r)?;
        let critic = read_mlp(&mut r)?;
        let ledger = MomentLedger::from_text(&read_text(&mut r, "ledger")?)?;
        let batch_counter = r.read_u64::<LittleEndian>()?;
        let prior_counter = r.read_u64::<LittleEndian>()?;
        let noise_counter = r.read_u64::<LittleEndian>()?;
        Ok(Self {
            config_text,
            config_hash,
            iteration,
            generator,
            critic,
            ledger,
            batch_counter,
            prior_counter,
            noise_counter,
        })
    }
}
