//! Versioned binary checkpoints.
//!
//! Layout: 8-byte magic, `u32` format version, `u64` header length, the
//! JSON header, then every tensor listed in the header as little-endian
//! `f64`, in header order. All integers are little-endian.

use std::fs;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::coupling::{CouplingMode, InterAreaWeights};
use crate::dynamics::{Activation, BiasPlacement, MultiAreaNet};
use crate::error::{Error, Result};
use crate::numerics::DenseMatrix;
use crate::subnet::CertifiedSubnet;
use crate::topology::{Adjacency, NetworkLayout};
use crate::training::{OptimizerState, TrainConfig, TrainHistory, Trainer};

pub const CHECKPOINT_MAGIC: &[u8; 8] = b"CNETCKPT";
pub const CHECKPOINT_VERSION: u32 = 1;

#[derive(Debug, Clone, PartialEq)]
pub struct Checkpoint {
    pub config_hash: String,
    pub net: MultiAreaNet,
    pub trainer: Option<Trainer>,
}

#[derive(Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct Header {
    config_hash: String,
    net: NetHeader,
    trainer: Option<TrainerHeader>,
    tensors: Vec<TensorEntry>,
}

#[derive(Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct NetHeader {
    sizes: Vec<usize>,
    adjacency: Adjacency,
    coupling: CouplingMode,
    phi: Activation,
    psi: Activation,
    tau: f64,
    dt: f64,
    bias_placement: BiasPlacement,
    input_dim: usize,
    classes: usize,
    subnets: Vec<SubnetHeader>,
}

#[derive(Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct SubnetHeader {
    rate: f64,
    rho: f64,
    attempts: usize,
}

#[derive(Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct TrainerHeader {
    cfg: TrainConfig,
    epoch: usize,
    history: TrainHistory,
    optimizer_step: u64,
}

#[derive(Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct TensorEntry {
    name: String,
    len: usize,
}

impl Checkpoint {
    fn tensors(&self) -> Vec<(String, &[f64])> {
        let net = &self.net;
        let mut out: Vec<(String, &[f64])> = Vec::new();
        for (i, s) in net.subnets.iter().enumerate() {
            out.push((format!("subnet{i}.w"), s.w.as_slice()));
            out.push((format!("subnet{i}.metric"), &s.metric_diag));
        }
        out.push(("coupling.b".into(), net.weights.b.as_slice()));
        out.push(("coupling.l".into(), net.weights.l.as_slice()));
        out.push(("input_weights".into(), net.input_weights.as_slice()));
        out.push(("output_weights".into(), net.output_weights.as_slice()));
        out.push(("hidden_bias".into(), &net.hidden_bias));
        out.push(("output_bias".into(), &net.output_bias));
        if let Some(t) = &self.trainer {
            for (k, v) in t.optimizer.first.iter().enumerate() {
                out.push((format!("optimizer.first{k}"), v));
            }
            for (k, v) in t.optimizer.second.iter().enumerate() {
                out.push((format!("optimizer.second{k}"), v));
            }
        }
        out
    }

    pub fn to_bytes(&self) -> Result<Vec<u8>> {
        let net = &self.net;
        let tensors = self.tensors();
        let header = Header {
            config_hash: self.config_hash.clone(),
            net: NetHeader {
                sizes: net.layout.sizes().to_vec(),
                adjacency: net.adjacency.clone(),
                coupling: net.coupling,
                phi: net.phi,
                psi: net.psi,
                tau: net.tau,
                dt: net.dt,
                bias_placement: net.bias_placement,
                input_dim: net.input_dim(),
                classes: net.classes(),
                subnets: net
                    .subnets
                    .iter()
                    .map(|s| SubnetHeader {
                        rate: s.rate,
                        rho: s.rho,
                        attempts: s.attempts,
                    })
                    .collect(),
            },
            trainer: self.trainer.as_ref().map(|t| TrainerHeader {
                cfg: t.cfg.clone(),
                epoch: t.epoch,
                history: t.history.clone(),
                optimizer_step: t.optimizer.step,
            }),
            tensors: tensors
                .iter()
                .map(|(name, v)| TensorEntry {
                    name: name.clone(),
                    len: v.len(),
                })
                .collect(),
        };
        let json = serde_json::to_vec(&header)?;
        let body: usize = tensors.iter().map(|(_, v)| v.len() * 8).sum();
        let mut out = Vec::with_capacity(20 + json.len() + body);
        out.extend_from_slice(CHECKPOINT_MAGIC);
        out.extend_from_slice(&CHECKPOINT_VERSION.to_le_bytes());
        out.extend_from_slice(&(json.len() as u64).to_le_bytes());
        out.extend_from_slice(&json);
        for (_, v) in &tensors {
            for x in *v {
                out.extend_from_slice(&x.to_le_bytes());
            }
        }
        Ok(out)
    }

    pub fn from_bytes(bytes: &[u8]) -> Result<Self> {
        let bad = |m: String| Error::Checkpoint(m);
        if bytes.len() < 20 || &bytes[..8] != CHECKPOINT_MAGIC {
            return Err(bad("not a checkpoint (bad magic)".into()));
        }
        let version = u32::from_le_bytes(bytes[8..12].try_into().expect("4 bytes"));
        if version != CHECKPOINT_VERSION {
            return Err(bad(format!("unsupported checkpoint version {version}")));
        }
        let hlen = u64::from_le_bytes(bytes[12..20].try_into().expect("8 bytes")) as usize;
        let json = bytes
            .get(20..20 + hlen)
            .ok_or_else(|| bad("truncated header".into()))?;
        let header: Header = serde_json::from_slice(json)?;
        let mut pos = 20 + hlen;
        let expected: usize = header.tensors.iter().map(|t| t.len * 8).sum();
        if bytes.len() != pos + expected {
            return Err(bad(format!(
                "body is {} bytes, header lists {expected}",
                bytes.len() - pos
            )));
        }
        let mut tensors = header.tensors.iter().map(|t| {
            let v: Vec<f64> = bytes[pos..pos + t.len * 8]
                .chunks_exact(8)
                .map(|c| f64::from_le_bytes(c.try_into().expect("8 bytes")))
                .collect();
            pos += t.len * 8;
            (t.name.as_str(), v)
        });
        let mut take = |name: &str, len: usize| -> Result<Vec<f64>> {
            match tensors.next() {
                Some((n, v)) if n == name && v.len() == len => Ok(v),
                Some((n, v)) => Err(bad(format!(
                    "expected tensor {name} ({len}), found {n} ({})",
                    v.len()
                ))),
                None => Err(bad(format!("missing tensor {name}"))),
            }
        };

        let h = header.net;
        let layout = NetworkLayout::new(h.sizes)?;
        if h.subnets.len() != layout.p() {
            return Err(bad("subnet count does not match layout".into()));
        }
        let n = layout.total();
        let mut subnets = Vec::with_capacity(layout.p());
        for (i, (s, &size)) in h.subnets.iter().zip(layout.sizes()).enumerate() {
            let w = DenseMatrix::new(size, size, take(&format!("subnet{i}.w"), size * size)?)?;
            let metric_diag = take(&format!("subnet{i}.metric"), size)?;
            subnets.push(CertifiedSubnet {
                w,
                metric_diag,
                rate: s.rate,
                rho: s.rho,
                attempts: s.attempts,
            });
        }
        let b = DenseMatrix::new(n, n, take("coupling.b", n * n)?)?;
        let l = DenseMatrix::new(n, n, take("coupling.l", n * n)?)?;
        let input_weights =
            DenseMatrix::new(h.input_dim, n, take("input_weights", h.input_dim * n)?)?;
        let output_weights =
            DenseMatrix::new(n, h.classes, take("output_weights", n * h.classes)?)?;
        let hidden_bias = take("hidden_bias", n)?;
        let output_bias = take("output_bias", h.classes)?;
        let net = MultiAreaNet {
            layout,
            adjacency: h.adjacency,
            subnets,
            coupling: h.coupling,
            weights: InterAreaWeights { b, l },
            input_weights,
            output_weights,
            hidden_bias,
            output_bias,
            phi: h.phi,
            psi: h.psi,
            tau: h.tau,
            dt: h.dt,
            bias_placement: h.bias_placement,
        };
        net.coupling.validate(&net)?;

        let trainer = match header.trainer {
            None => None,
            Some(t) => {
                let shapes = OptimizerState::new(&net);
                let first = shapes
                    .first
                    .iter()
                    .enumerate()
                    .map(|(k, v)| take(&format!("optimizer.first{k}"), v.len()))
                    .collect::<Result<Vec<_>>>()?;
                let second = shapes
                    .second
                    .iter()
                    .enumerate()
                    .map(|(k, v)| take(&format!("optimizer.second{k}"), v.len()))
                    .collect::<Result<Vec<_>>>()?;
                Some(Trainer {
                    cfg: t.cfg,
                    optimizer: OptimizerState {
                        step: t.optimizer_step,
                        first,
                        second,
                    },
                    epoch: t.epoch,
                    history: t.history,
                })
            }
        };
        if let Some((name, _)) = tensors.next() {
            return Err(bad(format!("unexpected tensor {name}")));
        }
        Ok(Self {
            config_hash: header.config_hash,
            net,
            trainer,
        })
    }

    /// Writes through a temporary file and a rename, so an interrupted save
    /// leaves the previous checkpoint intact.
    pub fn save(&self, path: &Path) -> Result<()> {
        let tmp = path.with_extension("tmp");
        fs::write(&tmp, self.to_bytes()?)?;
        fs::rename(&tmp, path)?;
        Ok(())
    }

    pub fn load(path: &Path) -> Result<Self> {
        Self::from_bytes(&fs::read(path)?)
    }
}
