//! Experiment configuration, network and task construction, checkpoints
//! and the command implementations behind the `contractnet` binary.

mod checkpoint;
mod commands;

pub use checkpoint::{Checkpoint, CHECKPOINT_MAGIC, CHECKPOINT_VERSION};
pub use commands::{
    cmd_ablate, cmd_certify, cmd_eval, cmd_report, cmd_train, exit_code, CertifyReport, SeedReport,
    SubnetSummary, TrainOptions, TrainOutcome, EXIT_CERTIFICATION, EXIT_CONFIG, EXIT_DIVERGENCE,
    EXIT_OK,
};

use std::fs;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::analysis::AblationKind;
use crate::coupling::{gw_block_bound, CouplingMode};
use crate::data::{
    cifar10_files, downsample, load_cifar10_binary, load_idx, synthetic_task, to_pixel_sequence,
    ImageSet, PixelOrder, SequenceDataset, SyntheticKind, SyntheticParams,
};
use crate::dynamics::{Activation, BiasPlacement, MultiAreaNet};
use crate::error::{Error, Result};
use crate::seeds::{derive_seed, Stream};
use crate::subnet::{
    generate_certified_pool, CertifiedSubnet, CertifyConfig, MetricKind, SubnetSpec,
};
use crate::topology::{
    adjacency_all_to_all, adjacency_global_workspace, adjacency_gw_cluster, adjacency_random,
    Adjacency, RandomMode,
};
use crate::training::TrainConfig;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    #[serde(default)]
    pub name: String,
    /// Master seed; every random stream is derived from it.
    #[serde(default)]
    pub seed: u64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub out_dir: Option<PathBuf>,
    pub subnets: SubnetConfig,
    pub topology: TopologyConfig,
    pub coupling: CouplingConfig,
    #[serde(default)]
    pub dynamics: DynamicsConfig,
    pub task: TaskConfig,
    #[serde(default)]
    pub train: TrainConfig,
    #[serde(default)]
    pub certify: CertifySection,
    #[serde(default)]
    pub ablation: AblationConfig,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SubnetConfig {
    /// Number of subnets when all share `n`.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub count: Option<usize>,
    #[serde(default = "default_n")]
    pub n: usize,
    /// Per-subnet sizes; overrides `count` and `n`.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub sizes: Option<Vec<usize>>,
    #[serde(default = "default_sparsity")]
    pub sparsity: f64,
    #[serde(default = "default_magnitude")]
    pub magnitude: f64,
    /// Defaults to identity for nonlinear workspace coupling, diagonal otherwise.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub metric: Option<MetricKind>,
    #[serde(default = "default_max_attempts")]
    pub max_attempts: usize,
}

fn default_n() -> usize {
    32
}
fn default_sparsity() -> f64 {
    0.033
}
fn default_magnitude() -> f64 {
    6.0
}
fn default_max_attempts() -> usize {
    1000
}

impl SubnetConfig {
    pub fn sizes(&self) -> Result<Vec<usize>> {
        match (&self.sizes, self.count) {
            (Some(s), _) => Ok(s.clone()),
            (None, Some(c)) => Ok(vec![self.n; c]),
            (None, None) => Err(Error::Config(
                "subnets: give either `count` or `sizes`".into(),
            )),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum TopologyConfig {
    AllToAll,
    Random {
        density: f64,
        #[serde(default)]
        mode: RandomMode,
    },
    GlobalWorkspace {
        #[serde(default)]
        center: usize,
    },
    GwCluster {
        k: usize,
    },
    Pairs {
        pairs: Vec<(usize, usize)>,
    },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "mode", rename_all = "snake_case", deny_unknown_fields)]
pub enum CouplingConfig {
    NegativeFeedback {
        #[serde(default)]
        relax: f64,
    },
    GwNonlinear {
        #[serde(default = "default_g_psi")]
        g_psi: f64,
        /// Block-norm cap; the contraction bound from the subnet rates when absent.
        #[serde(default, skip_serializing_if = "Option::is_none")]
        ell: Option<f64>,
        #[serde(default = "default_psi")]
        psi: Activation,
    },
    Unconstrained,
}

fn default_g_psi() -> f64 {
    1.0
}
fn default_psi() -> Activation {
    Activation::Tanh
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct DynamicsConfig {
    pub dt: f64,
    pub tau: f64,
    pub bias_placement: BiasPlacement,
}

impl Default for DynamicsConfig {
    fn default() -> Self {
        Self {
            dt: 0.03,
            tau: 1.0,
            bias_placement: BiasPlacement::InsideDt,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum TaskConfig {
    /// `params.size` is the training-set size.
    Synthetic {
        task: SyntheticKind,
        test_size: usize,
        #[serde(default)]
        params: SyntheticParams,
    },
    /// Directory with `data_batch_1..5.bin` and `test_batch.bin`.
    Cifar10 {
        dir: PathBuf,
        #[serde(default)]
        order: PixelOrder,
        #[serde(default = "one")]
        downsample: usize,
        #[serde(default, skip_serializing_if = "Option::is_none")]
        train_limit: Option<usize>,
        #[serde(default, skip_serializing_if = "Option::is_none")]
        test_limit: Option<usize>,
        #[serde(default)]
        standardize: bool,
    },
    /// Directory with the four standard MNIST IDX files.
    Mnist {
        dir: PathBuf,
        #[serde(default)]
        order: PixelOrder,
        #[serde(default = "two")]
        downsample: usize,
        #[serde(default, skip_serializing_if = "Option::is_none")]
        train_limit: Option<usize>,
        #[serde(default, skip_serializing_if = "Option::is_none")]
        test_limit: Option<usize>,
        #[serde(default)]
        standardize: bool,
    },
}

fn one() -> usize {
    1
}
fn two() -> usize {
    2
}

impl TaskConfig {
    /// `(input_dim, classes)` of the task.
    pub fn dims(&self) -> (usize, usize) {
        match self {
            TaskConfig::Synthetic { params, .. } => (params.resolved_input_dim(), params.classes),
            TaskConfig::Cifar10 { .. } => (3, 10),
            TaskConfig::Mnist { .. } => (1, 10),
        }
    }

    fn required_paths(&self) -> Vec<PathBuf> {
        match self {
            TaskConfig::Synthetic { .. } => vec![],
            TaskConfig::Cifar10 { dir, .. } => {
                let (mut train, test) = cifar10_files(dir);
                train.push(test);
                train
            }
            TaskConfig::Mnist { dir, .. } => MNIST_FILES.iter().map(|f| dir.join(f)).collect(),
        }
    }
}

const MNIST_FILES: [&str; 4] = [
    "train-images-idx3-ubyte",
    "train-labels-idx1-ubyte",
    "t10k-images-idx3-ubyte",
    "t10k-labels-idx1-ubyte",
];

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct CertifySection {
    /// Random states probed by the Jacobian certificate.
    pub verifier_states: usize,
    pub margin: f64,
}

impl Default for CertifySection {
    fn default() -> Self {
        Self {
            verifier_states: 200,
            margin: CertifyConfig::default().margin,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct AblationConfig {
    /// Kinds swept over every subnet.
    pub kinds: Vec<AblationKind>,
    /// Extra multi-subnet total ablations.
    pub groups: Vec<Vec<usize>>,
    pub output_only_zeroes_output_bias: bool,
}

impl Default for AblationConfig {
    fn default() -> Self {
        Self {
            kinds: AblationKind::ALL.to_vec(),
            groups: Vec::new(),
            output_only_zeroes_output_bias: false,
        }
    }
}

impl ExperimentConfig {
    /// Parses and validates, without touching the file system.
    pub fn parse(text: &str) -> Result<Self> {
        let mut cfg: Self = toml::from_str(text).map_err(|e| Error::Config(e.to_string()))?;
        cfg.train.seed = cfg.seed;
        cfg.validate()?;
        Ok(cfg)
    }

    /// Reads, parses and validates a config file, checking that every
    /// referenced data file exists.
    pub fn load(path: &Path) -> Result<Self> {
        let text = fs::read_to_string(path)
            .map_err(|e| Error::Config(format!("{}: {e}", path.display())))?;
        let cfg = Self::parse(&text).map_err(|e| match e {
            Error::Config(m) => Error::Config(format!("{}: {m}", path.display())),
            other => other,
        })?;
        for p in cfg.task.required_paths() {
            if !p.exists() {
                return Err(Error::Config(format!(
                    "task file {} does not exist",
                    p.display()
                )));
            }
        }
        Ok(cfg)
    }

    pub fn with_seed(mut self, seed: u64) -> Self {
        self.seed = seed;
        self.train.seed = seed;
        self
    }

    pub fn to_toml(&self) -> String {
        toml::to_string(self).expect("config serializes")
    }

    /// SHA-256 of the canonical form, ignoring the output directory.
    pub fn hash(&self) -> String {
        let mut canon = self.clone();
        canon.out_dir = None;
        let digest = Sha256::digest(canon.to_toml().as_bytes());
        digest.iter().map(|b| format!("{b:02x}")).collect()
    }

    pub fn validate(&self) -> Result<()> {
        let sizes = self.subnets.sizes()?;
        if sizes.is_empty() || sizes.contains(&0) {
            return Err(Error::Config("subnets: sizes must be positive".into()));
        }
        let p = sizes.len();
        let gw_nonlinear = matches!(self.coupling, CouplingConfig::GwNonlinear { .. });
        if gw_nonlinear && self.metric_kind() != MetricKind::Identity {
            return Err(Error::Config(
                "coupling: gw_nonlinear needs subnets.metric = \"identity\"".into(),
            ));
        }
        match &self.topology {
            TopologyConfig::GlobalWorkspace { center } if *center >= p => {
                return Err(Error::Config(format!(
                    "topology: center {center} out of range for {p} subnets"
                )));
            }
            TopologyConfig::Pairs { pairs } => {
                if let Some(&(i, j)) = pairs.iter().find(|&&(i, j)| i >= p || j >= p || i == j) {
                    return Err(Error::Config(format!(
                        "topology: invalid pair ({i}, {j}) for {p} subnets"
                    )));
                }
            }
            _ => {}
        }
        if !(self.dynamics.dt >= 0.0) || !(self.dynamics.tau > 0.0) {
            return Err(Error::Config("dynamics: need dt >= 0 and tau > 0".into()));
        }
        let (_, classes) = self.task.dims();
        if classes < 2 {
            return Err(Error::Config("task: need at least two classes".into()));
        }
        self.train.validate()?;
        for g in &self.ablation.groups {
            if g.is_empty() || g.iter().any(|&i| i >= p) {
                return Err(Error::Config(format!("ablation: invalid group {g:?}")));
            }
        }
        Ok(())
    }

    pub fn metric_kind(&self) -> MetricKind {
        self.subnets.metric.unwrap_or(match self.coupling {
            CouplingConfig::GwNonlinear { .. } => MetricKind::Identity,
            _ => MetricKind::Diagonal,
        })
    }

    pub fn out_dir(&self) -> PathBuf {
        self.out_dir.clone().unwrap_or_else(|| {
            let name = if self.name.is_empty() {
                "run"
            } else {
                &self.name
            };
            PathBuf::from("runs").join(name)
        })
    }

    pub fn subnet_specs(&self) -> Result<Vec<SubnetSpec>> {
        Ok(self
            .subnets
            .sizes()?
            .into_iter()
            .enumerate()
            .map(|(i, n)| SubnetSpec {
                n,
                sparsity: self.subnets.sparsity,
                magnitude: self.subnets.magnitude,
                seed: derive_seed(self.seed, Stream::Subnets, i as u64),
            })
            .collect())
    }

    pub fn adjacency_seed(&self) -> u64 {
        derive_seed(self.seed, Stream::Adjacency, 0)
    }

    pub fn build_adjacency(&self) -> Result<Adjacency> {
        let p = self.subnets.sizes()?.len();
        match &self.topology {
            TopologyConfig::AllToAll => adjacency_all_to_all(p),
            TopologyConfig::Random { density, mode } => {
                adjacency_random(p, *density, self.adjacency_seed(), *mode)
            }
            TopologyConfig::GlobalWorkspace { center } => adjacency_global_workspace(p, *center),
            TopologyConfig::GwCluster { k } => adjacency_gw_cluster(p, *k),
            TopologyConfig::Pairs { pairs } => Adjacency::from_pairs(p, pairs),
        }
    }

    pub fn certify_config(&self) -> CertifyConfig {
        CertifyConfig {
            margin: self.certify.margin,
            ..Default::default()
        }
    }

    pub fn build_subnets(&self) -> Result<Vec<CertifiedSubnet>> {
        generate_certified_pool(
            &self.subnet_specs()?,
            self.subnets.max_attempts,
            self.metric_kind(),
            &self.certify_config(),
        )
    }

    /// Builds the initialized network from already certified subnets.
    pub fn build_network_from(&self, subnets: Vec<CertifiedSubnet>) -> Result<MultiAreaNet> {
        let adjacency = self.build_adjacency()?;
        let (input_dim, classes) = self.task.dims();
        let coupling = match self.coupling {
            CouplingConfig::NegativeFeedback { relax } => CouplingMode::NegativeFeedback { relax },
            CouplingConfig::Unconstrained => CouplingMode::Unconstrained,
            CouplingConfig::GwNonlinear { g_psi, ell, .. } => {
                let ell = match ell {
                    Some(v) => v,
                    None => {
                        let lambda = subnets.iter().map(|s| s.rate).fold(f64::INFINITY, f64::min);
                        gw_block_bound(lambda, g_psi, adjacency.p())?
                    }
                };
                CouplingMode::GwNonlinear { g_psi, ell }
            }
        };
        let mut net = MultiAreaNet::new(subnets, adjacency, coupling, input_dim, classes)?;
        if let CouplingConfig::GwNonlinear { psi, .. } = self.coupling {
            net.psi = psi;
        }
        net.dt = self.dynamics.dt;
        net.tau = self.dynamics.tau;
        net.bias_placement = self.dynamics.bias_placement;
        net.init_parameters(self.seed)?;
        Ok(net)
    }

    pub fn build_network(&self) -> Result<MultiAreaNet> {
        self.build_network_from(self.build_subnets()?)
    }

    /// Training and test sets of the task.
    pub fn load_task(&self) -> Result<(SequenceDataset, SequenceDataset)> {
        match &self.task {
            TaskConfig::Synthetic {
                task,
                test_size,
                params,
            } => {
                let train = synthetic_task(*task, params, derive_seed(self.seed, Stream::Data, 0))?;
                let test_params = SyntheticParams {
                    size: *test_size,
                    ..*params
                };
                let test =
                    synthetic_task(*task, &test_params, derive_seed(self.seed, Stream::Data, 1))?;
                Ok((train, test))
            }
            TaskConfig::Cifar10 {
                dir,
                order,
                downsample: factor,
                train_limit,
                test_limit,
                standardize,
            } => {
                let (train_files, test_file) = cifar10_files(dir);
                let train = load_cifar10_binary(&train_files)?;
                let test = load_cifar10_binary(&[test_file])?;
                images_to_sequences(
                    train,
                    test,
                    *order,
                    *factor,
                    *train_limit,
                    *test_limit,
                    *standardize,
                )
            }
            TaskConfig::Mnist {
                dir,
                order,
                downsample: factor,
                train_limit,
                test_limit,
                standardize,
            } => {
                let f: Vec<PathBuf> = MNIST_FILES.iter().map(|f| dir.join(f)).collect();
                let train = load_idx(&f[0], &f[1])?;
                let test = load_idx(&f[2], &f[3])?;
                images_to_sequences(
                    train,
                    test,
                    *order,
                    *factor,
                    *train_limit,
                    *test_limit,
                    *standardize,
                )
            }
        }
    }
}

fn images_to_sequences(
    train: ImageSet,
    test: ImageSet,
    order: PixelOrder,
    factor: usize,
    train_limit: Option<usize>,
    test_limit: Option<usize>,
    standardize: bool,
) -> Result<(SequenceDataset, SequenceDataset)> {
    let prep = |set: ImageSet, limit: Option<usize>| -> Result<SequenceDataset> {
        let set = set.truncate(limit.unwrap_or(usize::MAX));
        let set = if factor == 1 {
            set
        } else {
            downsample(&set, factor)?
        };
        to_pixel_sequence(&set, order)
    };
    let mut train = prep(train, train_limit)?;
    let mut test = prep(test, test_limit)?;
    if standardize {
        let (mean, std) = train.channel_stats();
        train.standardize(&mean, &std);
        test.standardize(&mean, &std);
    }
    Ok((train, test))
}
