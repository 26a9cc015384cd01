//! Run configuration files: flat `key = value` text.
//!
//! A config file holds one `key = value` pair per line. Blank lines are
//! skipped and `#` starts a comment (whole-line or trailing). Keys may
//! appear at most once; unknown keys are errors, as are missing required
//! keys — silent defaults for the privacy-relevant values would be a
//! footgun.
//!
//! `epsilon_target` accepts `inf` for a non-private run. `sigma_n` is
//! the one optional noise key: when omitted on a private run it is
//! derived from the coarse closed-form calibration once the dataset
//! size (and with it the sampling ratio) is known; the accountant
//! remains the authority on what such a run actually spends.
//!
//! [`RunConfig::canonical_text`] renders the parsed config in a fixed
//! key order with round-trip float formatting; its FNV-1a hash is what
//! checkpoints embed, so a resume under an edited config is caught by a
//! hash comparison rather than by drift.

use std::path::Path;

use crate::dp::{calibrate_sigma_eq17, PrivacyTarget};
use crate::error::{Error, Result};
use crate::train::TrainConfig;

const FNV_BASIS: u64 = 0xcbf2_9ce4_8422_2325;
const FNV_PRIME: u64 = 0x0000_0100_0000_01b3;

/// 64-bit FNV-1a over raw bytes.
pub fn fnv1a_hash(bytes: &[u8]) -> u64 {
    let mut hash = FNV_BASIS;
    for &b in bytes {
        hash ^= b as u64;
        hash = hash.wrapping_mul(FNV_PRIME);
    }
    hash
}

/// Everything a training run reads from its config file.
#[derive(Debug, Clone, PartialEq)]
pub struct RunConfig {
    pub seed: u64,
    pub alpha_d: f64,
    pub alpha_g: f64,
    pub weight_clip: f64,
    pub grad_clip: f64,
    pub batch: usize,
    pub critic_iters: u64,
    pub gen_iters: u64,
    /// Noise multiplier. `None` means: derive from the closed-form
    /// calibration at training time (0 when `epsilon_target` is `inf`).
    pub sigma_n: Option<f64>,
    pub latent_dim: usize,
    pub delta: f64,
    /// Privacy ceiling; `inf` for a non-private run.
    pub epsilon_target: f64,
    pub gen_hidden: usize,
    pub critic_hidden: usize,
    /// Pool images down to this side length before training; `None`
    /// trains at full resolution.
    pub downsample: Option<usize>,
    /// Write a checkpoint every this many iterations; 0 writes only the
    /// final one.
    pub checkpoint_interval: u64,
}

impl RunConfig {
    /// The noise multiplier this run will actually use, deriving the
    /// default from the closed-form calibration when the file omitted
    /// `sigma_n`.
    pub fn resolved_sigma(&self, data_rows: usize) -> Result<f64> {
        if let Some(sigma) = self.sigma_n {
            return Ok(sigma);
        }
        if self.epsilon_target.is_infinite() {
            return Ok(0.0);
        }
        if data_rows == 0 {
            return Err(Error::Data("cannot calibrate against an empty dataset".into()));
        }
        let q = self.batch as f64 / data_rows as f64;
        let n_d = u32::try_from(self.critic_iters).map_err(|_| {
            Error::Parameter(format!(
                "critic_iters {} is too large to calibrate for",
                self.critic_iters
            ))
        })?;
        let target = PrivacyTarget::new(self.epsilon_target, self.delta)?;
        calibrate_sigma_eq17(&target, q, n_d)
    }

    /// Build the validated training configuration around a resolved
    /// noise multiplier.
    pub fn train_config(&self, sigma_n: f64) -> Result<TrainConfig> {
        let cfg = TrainConfig {
            seed: self.seed,
            alpha_d: self.alpha_d,
            alpha_g: self.alpha_g,
            weight_clip: self.weight_clip,
            grad_clip: self.grad_clip,
            batch: self.batch,
            critic_iters: self.critic_iters,
            gen_iters: self.gen_iters,
            sigma_n,
            latent_dim: self.latent_dim,
            delta: self.delta,
            epsilon_target: self.epsilon_target,
        };
        cfg.validate()?;
        Ok(cfg)
    }

    /// Fixed-order rendering with round-trip float formatting. Optional
    /// keys appear only when set, so parse -> render -> parse is the
    /// identity.
    pub fn canonical_text(&self) -> String {
        let mut out = String::new();
        let mut line = |k: &str, v: String| {
            out.push_str(k);
            out.push_str(" = ");
            out.push_str(&v);
            out.push('\n');
        };
        line("seed", self.seed.to_string());
        line("alpha_d", self.alpha_d.to_string());
        line("alpha_g", self.alpha_g.to_string());
        line("weight_clip", self.weight_clip.to_string());
        line("grad_clip", self.grad_clip.to_string());
        line("batch", self.batch.to_string());
        line("critic_iters", self.critic_iters.to_string());
        line("gen_iters", self.gen_iters.to_string());
        if let Some(sigma) = self.sigma_n {
            line("sigma_n", sigma.to_string());
        }
        line("latent_dim", self.latent_dim.to_string());
        line("delta", self.delta.to_string());
        line("epsilon_target", self.epsilon_target.to_string());
        line("gen_hidden", self.gen_hidden.to_string());
        line("critic_hidden", self.critic_hidden.to_string());
        if let Some(side) = self.downsample {
            line("downsample", side.to_string());
        }
        line("checkpoint_interval", self.checkpoint_interval.to_string());
        out
    }

    /// FNV-1a hash of the canonical text.
    pub fn hash(&self) -> u64 {
        fnv1a_hash(self.canonical_text().as_bytes())
    }
}

/// One raw `key = value` pair with its 1-based source line.
struct RawPair {
    line: usize,
    value: String,
}

fn parse_field<T: std::str::FromStr>(pair: &RawPair, key: &str) -> Result<T> {
    pair.value.parse().map_err(|_| Error::Config {
        line: pair.line,
        message: format!("cannot parse {key} value {:?}", pair.value),
    })
}

/// Parse a config from text. See the module docs for the format.
pub fn parse_config(text: &str) -> Result<RunConfig> {
    let mut pairs: Vec<(String, RawPair)> = Vec::new();
    for (idx, raw_line) in text.lines().enumerate() {
        let line_no = idx + 1;
        let content = raw_line.split('#').next().unwrap_or("").trim();
        if content.is_empty() {
            continue;
        }
        let Some((key, value)) = content.split_once('=') else {
            return Err(Error::Config {
                line: line_no,
                message: format!("expected `key = value`, got {content:?}"),
            });
        };
        let key = key.trim().to_string();
        let value = value.trim().to_string();
        if value.is_empty() {
            return Err(Error::Config {
                line: line_no,
                message: format!("key {key:?} has no value"),
            });
        }
        if let Some((_, prev)) = pairs.iter().find(|(k, _)| *k == key) {
            return Err(Error::Config {
                line: line_no,
                message: format!("duplicate key {key:?}, first set on line {}", prev.line),
            });
        }
        pairs.push((
            key,
            RawPair {
                line: line_no,
                value,
            },
        ));
    }

    const KNOWN: &[&str] = &[
        "seed",
        "alpha_d",
        "alpha_g",
        "weight_clip",
        "grad_clip",
        "batch",
        "critic_iters",
        "gen_iters",
        "sigma_n",
        "latent_dim",
        "delta",
        "epsilon_target",
        "gen_hidden",
        "critic_hidden",
        "downsample",
        "checkpoint_interval",
    ];
    for (key, pair) in &pairs {
        if !KNOWN.contains(&key.as_str()) {
            return Err(Error::Config {
                line: pair.line,
                message: format!("unknown key {key:?}"),
            });
        }
    }

    let take = |key: &str| pairs.iter().find(|(k, _)| k == key).map(|(_, p)| p);
    let require = |key: &str| -> Result<&RawPair> {
        take(key).ok_or_else(|| Error::Config {
            line: 0,
            message: format!("missing required key {key:?}"),
        })
    };

    Ok(RunConfig {
        seed: parse_field(require("seed")?, "seed")?,
        alpha_d: parse_field(require("alpha_d")?, "alpha_d")?,
        alpha_g: parse_field(require("alpha_g")?, "alpha_g")?,
        weight_clip: parse_field(require("weight_clip")?, "weight_clip")?,
        grad_clip: parse_field(require("grad_clip")?, "grad_clip")?,
        batch: parse_field(require("batch")?, "batch")?,
        critic_iters: parse_field(require("critic_iters")?, "critic_iters")?,
        gen_iters: parse_field(require("gen_iters")?, "gen_iters")?,
        sigma_n: match take("sigma_n") {
            Some(pair) => Some(parse_field(pair, "sigma_n")?),
            None => None,
        },
        latent_dim: parse_field(require("latent_dim")?, "latent_dim")?,
        delta: parse_field(require("delta")?, "delta")?,
        epsilon_target: parse_field(require("epsilon_target")?, "epsilon_target")?,
        gen_hidden: parse_field(require("gen_hidden")?, "gen_hidden")?,
        critic_hidden: parse_field(require("critic_hidden")?, "critic_hidden")?,
        downsample: match take("downsample") {
            Some(pair) => Some(parse_field(pair, "downsample")?),
            None => None,
        },
        checkpoint_interval: match take("checkpoint_interval") {
            Some(pair) => parse_field(pair, "checkpoint_interval")?,
            None => 0,
        },
    })
}

/// Parse a config file from disk.
pub fn load_config(path: &Path) -> Result<RunConfig> {
    parse_config(&std::fs::read_to_string(path)?)
}
