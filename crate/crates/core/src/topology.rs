//! Inter-area adjacency structures, network layout and trainable parameter
//! counting.

use std::ops::Range;

use rand::seq::index;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::seeds::{rng_from_seed, unit_f64};

/// Symmetric, zero-diagonal `p x p` coupling pattern between subnets.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(try_from = "PairList", into = "PairList")]
pub struct Adjacency {
    p: usize,
    flags: Vec<bool>,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PairList {
    pub p: usize,
    pub pairs: Vec<(usize, usize)>,
}

impl TryFrom<PairList> for Adjacency {
    type Error = Error;

    fn try_from(list: PairList) -> Result<Self> {
        Adjacency::from_pairs(list.p, &list.pairs)
    }
}

impl From<Adjacency> for PairList {
    fn from(adj: Adjacency) -> Self {
        PairList {
            p: adj.p,
            pairs: adj.pairs(),
        }
    }
}

impl Adjacency {
    pub fn empty(p: usize) -> Self {
        Self {
            p,
            flags: vec![false; p * p],
        }
    }

    pub fn from_pairs(p: usize, pairs: &[(usize, usize)]) -> Result<Self> {
        let mut adj = Self::empty(p);
        for &(i, j) in pairs {
            if i >= p || j >= p {
                return Err(Error::IndexOutOfRange {
                    index: i.max(j),
                    len: p,
                });
            }
            if i == j {
                return Err(Error::InvalidArgument(format!(
                    "self-pair ({i}, {i}) in adjacency"
                )));
            }
            adj.connect(i, j);
        }
        Ok(adj)
    }

    pub fn p(&self) -> usize {
        self.p
    }

    #[inline]
    pub fn connected(&self, i: usize, j: usize) -> bool {
        self.flags[i * self.p + j]
    }

    fn connect(&mut self, i: usize, j: usize) {
        self.flags[i * self.p + j] = true;
        self.flags[j * self.p + i] = true;
    }

    /// Unordered pairs `(i, j)` with `i < j`, in lexicographic order.
    pub fn pairs(&self) -> Vec<(usize, usize)> {
        let mut out = Vec::new();
        for i in 0..self.p {
            for j in i + 1..self.p {
                if self.connected(i, j) {
                    out.push((i, j));
                }
            }
        }
        out
    }

    pub fn pair_count(&self) -> usize {
        self.pairs().len()
    }

    pub fn is_symmetric_zero_diag(&self) -> bool {
        (0..self.p).all(|i| {
            !self.connected(i, i)
                && (0..self.p).all(|j| self.connected(i, j) == self.connected(j, i))
        })
    }

    /// Number of true entries in the `p x p` flag matrix (twice the pair count).
    pub fn true_count(&self) -> usize {
        self.flags.iter().filter(|&&f| f).count()
    }

    /// Subnets other than `i` that `i` is coupled to.
    pub fn neighbors(&self, i: usize) -> impl Iterator<Item = usize> + '_ {
        (0..self.p).filter(move |&j| self.connected(i, j))
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum RandomMode {
    /// Each unordered pair kept independently with probability `density`.
    #[default]
    Bernoulli,
    /// Exactly `floor(density * p(p-1)/2)` pairs, uniformly without replacement.
    ExactCount,
}

pub fn adjacency_all_to_all(p: usize) -> Result<Adjacency> {
    if p < 2 {
        return Err(Error::InvalidArgument(format!(
            "all-to-all needs p >= 2, got {p}"
        )));
    }
    let mut adj = Adjacency::empty(p);
    for i in 0..p {
        for j in i + 1..p {
            adj.connect(i, j);
        }
    }
    Ok(adj)
}

pub fn adjacency_random(p: usize, density: f64, seed: u64, mode: RandomMode) -> Result<Adjacency> {
    if !(0.0..=1.0).contains(&density) {
        return Err(Error::InvalidArgument(format!(
            "density must lie in [0, 1], got {density}"
        )));
    }
    let mut rng = rng_from_seed(seed);
    let all: Vec<(usize, usize)> = (0..p)
        .flat_map(|i| (i + 1..p).map(move |j| (i, j)))
        .collect();
    let mut adj = Adjacency::empty(p);
    match mode {
        RandomMode::Bernoulli => {
            for &(i, j) in &all {
                if unit_f64(&mut rng) < density {
                    adj.connect(i, j);
                }
            }
        }
        RandomMode::ExactCount => {
            let k = ((density * all.len() as f64).floor() as usize).min(all.len());
            for idx in index::sample(&mut rng, all.len(), k) {
                let (i, j) = all[idx];
                adj.connect(i, j);
            }
        }
    }
    Ok(adj)
}

/// Star topology: `center` coupled to every other subnet, nothing else.
pub fn adjacency_global_workspace(p: usize, center: usize) -> Result<Adjacency> {
    if p <= 2 {
        return Err(Error::InvalidArgument(format!(
            "global workspace needs p > 2, got {p}"
        )));
    }
    if center >= p {
        return Err(Error::IndexOutOfRange {
            index: center,
            len: p,
        });
    }
    let mut adj = Adjacency::empty(p);
    for j in (0..p).filter(|&j| j != center) {
        adj.connect(center, j);
    }
    Ok(adj)
}

/// Subnets `0..k` form an all-to-all core, each core subnet is coupled to
/// every subnet `>= k`, and the periphery has no pairs among itself.
pub fn adjacency_gw_cluster(p: usize, k: usize) -> Result<Adjacency> {
    if k == 0 || k >= p {
        return Err(Error::InvalidArgument(format!(
            "cluster size must satisfy 1 <= k < p, got k={k}, p={p}"
        )));
    }
    let mut adj = Adjacency::empty(p);
    for i in 0..k {
        for j in i + 1..p {
            adj.connect(i, j);
        }
    }
    Ok(adj)
}

/// Unit counts of each subnet and where each sits in the stacked state.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(try_from = "Vec<usize>", into = "Vec<usize>")]
pub struct NetworkLayout {
    sizes: Vec<usize>,
    offsets: Vec<usize>,
    total: usize,
}

impl TryFrom<Vec<usize>> for NetworkLayout {
    type Error = Error;

    fn try_from(sizes: Vec<usize>) -> Result<Self> {
        NetworkLayout::new(sizes)
    }
}

impl From<NetworkLayout> for Vec<usize> {
    fn from(layout: NetworkLayout) -> Self {
        layout.sizes
    }
}

impl NetworkLayout {
    pub fn new(sizes: Vec<usize>) -> Result<Self> {
        if sizes.is_empty() {
            return Err(Error::InvalidArgument(
                "layout needs at least one subnet".into(),
            ));
        }
        if sizes.contains(&0) {
            return Err(Error::InvalidArgument(
                "subnet sizes must be positive".into(),
            ));
        }
        let mut offsets = Vec::with_capacity(sizes.len());
        let mut total = 0;
        for &n in &sizes {
            offsets.push(total);
            total += n;
        }
        Ok(Self {
            sizes,
            offsets,
            total,
        })
    }

    pub fn uniform(p: usize, n: usize) -> Result<Self> {
        Self::new(vec![n; p])
    }

    pub fn p(&self) -> usize {
        self.sizes.len()
    }

    pub fn total(&self) -> usize {
        self.total
    }

    pub fn sizes(&self) -> &[usize] {
        &self.sizes
    }

    pub fn offsets(&self) -> &[usize] {
        &self.offsets
    }

    pub fn range(&self, i: usize) -> Range<usize> {
        self.offsets[i]..self.offsets[i] + self.sizes[i]
    }

    pub fn subnet_of(&self, unit: usize) -> usize {
        debug_assert!(unit < self.total);
        self.offsets.partition_point(|&o| o <= unit) - 1
    }

    pub fn mean_size(&self) -> f64 {
        self.total as f64 / self.p() as f64
    }

    /// Layout with one unit removed from subnet `i`.
    pub fn without_unit_in(&self, i: usize) -> Result<Self> {
        let mut sizes = self.sizes.clone();
        if sizes[i] <= 1 {
            return Err(Error::InvalidArgument(format!(
                "subnet {i} has a single unit"
            )));
        }
        sizes[i] -= 1;
        Self::new(sizes)
    }
}

/// Boolean `N x N` mask, row-major.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct BlockMask {
    n: usize,
    bits: Vec<bool>,
}

impl BlockMask {
    #[inline]
    pub fn get(&self, r: usize, c: usize) -> bool {
        self.bits[r * self.n + c]
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn count(&self) -> usize {
        self.bits.iter().filter(|&&b| b).count()
    }

    /// The part of the mask strictly below the diagonal.
    pub fn lower(&self) -> BlockMask {
        let mut bits = self.bits.clone();
        for r in 0..self.n {
            for c in r..self.n {
                bits[r * self.n + c] = false;
            }
        }
        BlockMask { n: self.n, bits }
    }
}

pub fn build_block_mask(adj: &Adjacency, layout: &NetworkLayout) -> Result<BlockMask> {
    if adj.p() != layout.p() {
        return Err(Error::DimensionMismatch {
            context: "build_block_mask",
            expected: layout.p(),
            got: adj.p(),
        });
    }
    let n = layout.total();
    let mut bits = vec![false; n * n];
    for (i, j) in adj.pairs() {
        for r in layout.range(i) {
            for c in layout.range(j) {
                bits[r * n + c] = true;
                bits[c * n + r] = true;
            }
        }
    }
    Ok(BlockMask { n, bits })
}

/// Input layer, output layer, hidden and output biases, plus one full
/// `n_i x n_j` block of `B` per coupled pair.
pub fn count_trainable_params(
    layout: &NetworkLayout,
    adj: &Adjacency,
    input_dim: usize,
    classes: usize,
) -> Result<usize> {
    if adj.p() != layout.p() {
        return Err(Error::DimensionMismatch {
            context: "count_trainable_params",
            expected: layout.p(),
            got: adj.p(),
        });
    }
    let n = layout.total();
    let coupling: usize = adj
        .pairs()
        .into_iter()
        .map(|(i, j)| layout.sizes()[i] * layout.sizes()[j])
        .sum();
    Ok((input_dim + classes + 1) * n + classes + coupling)
}
