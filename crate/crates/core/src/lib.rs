//! Provably contracting multi-area recurrent networks.
//!
//! Subnets with frozen sparse recurrent weights are certified contracting
//! in a diagonal metric; they are coupled so the whole network stays
//! contracting, and only the coupling and the input/output layers are
//! trained with backpropagation through time.
//!
//! - [`numerics`]: dense kernel (Perron root, symmetric top eigenvalue, spectral norm, solves)
//! - [`subnet`]: sampling and certifying subnets, diagonal metrics, unit ablation
//! - [`topology`]: adjacency builders, layout, block masks, parameter counts
//! - [`coupling`]: negative feedback, workspace norm cap, Jacobian certificate
//! - [`dynamics`]: the network and its Euler simulation
//! - [`training`]: BPTT, Adam, schedules, gradient checks
//! - [`data`]: IDX / CIFAR-10 loaders, pixel sequences, synthetic tasks
//! - [`analysis`]: ablation, pruning, confusion matrices, pair strengths
//! - [`experiment`]: config, checkpoints and the command implementations

pub mod analysis;
pub mod coupling;
pub mod data;
pub mod dynamics;
pub mod error;
pub mod experiment;
pub mod numerics;
pub mod seeds;
pub mod subnet;
pub mod topology;
pub mod training;

pub use coupling::{CouplingMode, InterAreaWeights};
pub use dynamics::{Activation, MultiAreaNet};
pub use error::{Error, Result};
pub use numerics::DenseMatrix;
pub use subnet::{CertifiedSubnet, MetricKind, SubnetSpec};
pub use topology::{Adjacency, NetworkLayout};
