//! The multi-area network and its explicit-Euler simulation.
//!
//! Continuous dynamics per unit:
//!
//! ```text
//! dx/dt = -x + W φ(x) + L ψ(x) + Uᵀ u + b
//! ```
//!
//! with `W` block diagonal (frozen subnets), `L` block off-diagonal (the
//! trained coupling), `U` the input layer and `b` the hidden bias. One step
//! is `x + (dt / tau) f(x)`; the state starts at zero for every sequence and
//! the logits are read from the final state.

use std::io::Write;
use std::ops::Range;

use serde::{Deserialize, Serialize};

use crate::coupling::{negative_feedback_l, project_gw_blocks, CouplingMode, InterAreaWeights};
use crate::error::{Error, Result};
use crate::numerics::DenseMatrix;
use crate::seeds::{self, unit_f64, Stream};
use crate::subnet::CertifiedSubnet;
use crate::topology::{build_block_mask, Adjacency, BlockMask, NetworkLayout};

/// Magnitude past which a state is treated as diverged.
pub const OVERFLOW_THRESHOLD: f64 = 1e100;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Activation {
    #[default]
    Relu,
    Tanh,
    Identity,
}

impl Activation {
    #[inline]
    pub fn apply(self, x: f64) -> f64 {
        match self {
            Activation::Relu => x.max(0.0),
            Activation::Tanh => x.tanh(),
            Activation::Identity => x,
        }
    }

    /// Derivative; ReLU uses 0 at exactly 0.
    #[inline]
    pub fn derivative(self, x: f64) -> f64 {
        match self {
            Activation::Relu => {
                if x > 0.0 {
                    1.0
                } else {
                    0.0
                }
            }
            Activation::Tanh => {
                let t = x.tanh();
                1.0 - t * t
            }
            Activation::Identity => 1.0,
        }
    }

    /// Upper bound `g` on the slope.
    pub fn slope_bound(self) -> f64 {
        1.0
    }

    pub fn is_linear(self) -> bool {
        self == Activation::Identity
    }
}

/// Where the hidden bias enters the Euler update.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum BiasPlacement {
    /// Inside `f`, so it is scaled by `dt / tau`.
    #[default]
    InsideDt,
    /// Added after the Euler step, unscaled.
    OutsideDt,
}

/// One coupled block `L[rows, cols]` between two distinct subnets.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct CouplingBlock {
    pub to: usize,
    pub from: usize,
    pub rows: Range<usize>,
    pub cols: Range<usize>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MultiAreaNet {
    pub layout: NetworkLayout,
    pub adjacency: Adjacency,
    pub subnets: Vec<CertifiedSubnet>,
    pub coupling: CouplingMode,
    pub weights: InterAreaWeights,
    /// `input_dim x N`.
    pub input_weights: DenseMatrix,
    /// `N x classes`.
    pub output_weights: DenseMatrix,
    pub hidden_bias: Vec<f64>,
    pub output_bias: Vec<f64>,
    pub phi: Activation,
    pub psi: Activation,
    pub tau: f64,
    pub dt: f64,
    pub bias_placement: BiasPlacement,
}

#[derive(Debug, Clone, PartialEq)]
pub struct TrajectoryRecord {
    /// `T x N` states after each step, when tracing was requested.
    pub states: Option<DenseMatrix>,
    pub final_state: Vec<f64>,
    pub logits: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ConvergenceReport {
    /// Metric distance before the first step and after each step (floored).
    pub distances: Vec<f64>,
    /// Least-squares slope of `ln d` against time, over unfloored points.
    pub fitted_rate: f64,
}

/// Distances below this are reported as this value and left out of the fit.
pub const DISTANCE_FLOOR: f64 = 1e-14;

impl MultiAreaNet {
    /// Network with zero coupling and zero input/output layers. The
    /// coupling mode decides which subnets' metric is used and what `ψ` is
    /// (identity for linear modes, `tanh` for the nonlinear workspace).
    pub fn new(
        subnets: Vec<CertifiedSubnet>,
        adjacency: Adjacency,
        coupling: CouplingMode,
        input_dim: usize,
        classes: usize,
    ) -> Result<Self> {
        let layout = NetworkLayout::new(subnets.iter().map(|s| s.n()).collect())?;
        if adjacency.p() != layout.p() {
            return Err(Error::DimensionMismatch {
                context: "MultiAreaNet::new (adjacency size)",
                expected: layout.p(),
                got: adjacency.p(),
            });
        }
        if input_dim == 0 || classes == 0 {
            return Err(Error::InvalidArgument(
                "input_dim and classes must be positive".into(),
            ));
        }
        let n = layout.total();
        let psi = match coupling {
            CouplingMode::GwNonlinear { .. } => Activation::Tanh,
            _ => Activation::Identity,
        };
        let net = Self {
            weights: InterAreaWeights::zeros(n),
            input_weights: DenseMatrix::zeros(input_dim, n),
            output_weights: DenseMatrix::zeros(n, classes),
            hidden_bias: vec![0.0; n],
            output_bias: vec![0.0; classes],
            layout,
            adjacency,
            subnets,
            coupling,
            phi: Activation::Relu,
            psi,
            tau: 1.0,
            dt: 0.03,
            bias_placement: BiasPlacement::InsideDt,
        };
        net.coupling.validate(&net)?;
        Ok(net)
    }

    pub fn n(&self) -> usize {
        self.layout.total()
    }

    pub fn p(&self) -> usize {
        self.layout.p()
    }

    pub fn input_dim(&self) -> usize {
        self.input_weights.rows()
    }

    pub fn classes(&self) -> usize {
        self.output_weights.cols()
    }

    /// `ψ` as it enters the dynamics: the configured activation in the
    /// nonlinear workspace mode, identity otherwise.
    pub fn effective_psi(&self) -> Activation {
        match self.coupling {
            CouplingMode::GwNonlinear { .. } => self.psi,
            _ => Activation::Identity,
        }
    }

    /// Stacked diagonal contraction metric of the subnets.
    pub fn metric(&self) -> Vec<f64> {
        self.subnets
            .iter()
            .flat_map(|s| s.metric_diag.iter().copied())
            .collect()
    }

    /// Metric used when certifying the whole network.
    pub fn certificate_metric(&self) -> Vec<f64> {
        match self.coupling {
            CouplingMode::GwNonlinear { .. } => vec![1.0; self.n()],
            _ => self.metric(),
        }
    }

    pub fn coupling_mask(&self) -> Result<BlockMask> {
        build_block_mask(&self.adjacency, &self.layout)
    }

    /// Mask of the trainable coupling parameter: the lower-triangular part
    /// of the block mask for negative feedback, the whole mask otherwise.
    pub fn trainable_mask(&self) -> Result<BlockMask> {
        let mask = self.coupling_mask()?;
        Ok(match self.coupling {
            CouplingMode::NegativeFeedback { .. } => mask.lower(),
            _ => mask,
        })
    }

    /// Ordered coupled blocks `(to, from)` for every adjacent pair.
    pub fn coupling_blocks(&self) -> Vec<CouplingBlock> {
        let mut blocks = Vec::new();
        for to in 0..self.p() {
            for from in self.adjacency.neighbors(to) {
                blocks.push(CouplingBlock {
                    to,
                    from,
                    rows: self.layout.range(to),
                    cols: self.layout.range(from),
                });
            }
        }
        blocks
    }

    /// Block-diagonal `W` as a dense `N x N` matrix.
    pub fn intra_weights(&self) -> DenseMatrix {
        let mut w = DenseMatrix::zeros(self.n(), self.n());
        for (i, s) in self.subnets.iter().enumerate() {
            let off = self.layout.offsets()[i];
            w.set_block(off, off, &s.w);
        }
        w
    }

    /// Recomputes the effective coupling `L` from the trainable `B`.
    pub fn refresh_coupling(&mut self) -> Result<()> {
        let l = match self.coupling {
            CouplingMode::NegativeFeedback { relax } => {
                let mask = self.coupling_mask()?;
                let mut l = negative_feedback_l(&self.weights.b, &self.metric(), &mask)?;
                if relax != 0.0 {
                    let b = &self.weights.b;
                    for r in 0..self.n() {
                        for c in 0..self.n() {
                            l[(r, c)] += relax * (b[(r, c)] + b[(c, r)]);
                        }
                    }
                }
                l
            }
            CouplingMode::GwNonlinear { ell, .. } => {
                let projected = project_gw_blocks(&self.weights.b, &self.layout, ell)?;
                self.weights.b = projected.clone();
                projected
            }
            CouplingMode::Unconstrained => self.weights.b.clone(),
        };
        self.weights.l = l;
        Ok(())
    }

    /// Draws initial parameters: `B` entries normal with standard deviation
    /// `1/sqrt(mean subnet size)` on the trainable mask; input and output
    /// layers and their biases uniform on `±1/sqrt(fan_in)`.
    pub fn init_parameters(&mut self, seed: u64) -> Result<()> {
        use rand_distr::{Distribution, Normal};
        let n = self.n();
        let mask = self.trainable_mask()?;
        let std = 1.0 / self.layout.mean_size().sqrt();
        let normal = Normal::new(0.0, std).map_err(|e| Error::InvalidArgument(e.to_string()))?;
        let mut rng = seeds::stream(seed, Stream::BInit, 0);
        let mut b = DenseMatrix::zeros(n, n);
        for r in 0..n {
            for c in 0..n {
                if mask.get(r, c) {
                    b[(r, c)] = normal.sample(&mut rng);
                }
            }
        }
        self.weights.b = b;

        let mut rng = seeds::stream(seed, Stream::Layers, 0);
        let mut uniform = |bound: f64| bound * (2.0 * unit_f64(&mut rng) - 1.0);
        let in_bound = 1.0 / (self.input_dim() as f64).sqrt();
        let out_bound = 1.0 / (n as f64).sqrt();
        for v in self.input_weights.as_mut_slice() {
            *v = uniform(in_bound);
        }
        for v in self.hidden_bias.iter_mut() {
            *v = uniform(in_bound);
        }
        for v in self.output_weights.as_mut_slice() {
            *v = uniform(out_bound);
        }
        for v in self.output_bias.iter_mut() {
            *v = uniform(out_bound);
        }
        self.refresh_coupling()
    }

    /// `f(x) = -x + W φ(x) + L ψ(x) + Uᵀ u + b` (bias omitted when it sits outside dt).
    pub(crate) fn drift(
        &self,
        blocks: &[CouplingBlock],
        x: &[f64],
        u_raw: &[f64],
        s: &mut StepScratch,
    ) {
        let psi = self.effective_psi();
        for ((a, b), &v) in s.phi.iter_mut().zip(s.psi.iter_mut()).zip(x) {
            *a = self.phi.apply(v);
            *b = psi.apply(v);
        }
        let f = &mut s.f;
        for (fi, xi) in f.iter_mut().zip(x) {
            *fi = -xi;
        }
        for (i, sub) in self.subnets.iter().enumerate() {
            let range = self.layout.range(i);
            let src = &s.phi[range.clone()];
            for (r, fr) in f[range].iter_mut().enumerate() {
                *fr += dot(sub.w.row(r), src);
            }
        }
        let l = &self.weights.l;
        for blk in blocks {
            let src = &s.psi[blk.cols.clone()];
            for r in blk.rows.clone() {
                f[r] += dot(&l.row(r)[blk.cols.clone()], src);
            }
        }
        for (k, &u) in u_raw.iter().enumerate() {
            if u == 0.0 {
                continue;
            }
            for (fi, w) in f.iter_mut().zip(self.input_weights.row(k)) {
                *fi += w * u;
            }
        }
        if self.bias_placement == BiasPlacement::InsideDt {
            for (fi, b) in f.iter_mut().zip(&self.hidden_bias) {
                *fi += b;
            }
        }
    }

    pub(crate) fn step_inplace(
        &self,
        blocks: &[CouplingBlock],
        x: &mut [f64],
        u_raw: &[f64],
        scratch: &mut StepScratch,
        step_index: usize,
    ) -> Result<()> {
        self.drift(blocks, x, u_raw, scratch);
        let h = self.dt / self.tau;
        let outside = self.bias_placement == BiasPlacement::OutsideDt;
        for (k, (xi, fi)) in x.iter_mut().zip(scratch.f.iter()).enumerate() {
            *xi += h * fi;
            if outside {
                *xi += self.hidden_bias[k];
            }
            if !xi.is_finite() || xi.abs() > OVERFLOW_THRESHOLD {
                return Err(Error::StateOverflow { step: step_index });
            }
        }
        Ok(())
    }

    /// One Euler step from `x` under raw input `u_raw`.
    pub fn step(&self, x: &[f64], u_raw: &[f64]) -> Result<Vec<f64>> {
        self.check_state(x)?;
        self.check_input(u_raw)?;
        let blocks = self.coupling_blocks();
        let mut next = x.to_vec();
        let mut scratch = StepScratch::new(self.n());
        self.step_inplace(&blocks, &mut next, u_raw, &mut scratch, 0)?;
        Ok(next)
    }

    pub fn logits(&self, state: &[f64]) -> Vec<f64> {
        let mut z = self.output_weights.matvec_t(state);
        for (zi, b) in z.iter_mut().zip(&self.output_bias) {
            *zi += b;
        }
        z
    }

    /// Runs a `T x input_dim` row-major sequence from the zero state.
    pub fn run_sequence(&self, seq: &[f64], trace: bool) -> Result<TrajectoryRecord> {
        let x0 = vec![0.0; self.n()];
        self.run_from(&x0, seq, trace)
    }

    pub fn run_from(&self, x0: &[f64], seq: &[f64], trace: bool) -> Result<TrajectoryRecord> {
        self.check_state(x0)?;
        let t_len = self.sequence_len(seq)?;
        let d = self.input_dim();
        let n = self.n();
        let blocks = self.coupling_blocks();
        let mut x = x0.to_vec();
        let mut scratch = StepScratch::new(n);
        let mut states = trace.then(|| DenseMatrix::zeros(t_len, n));
        for t in 0..t_len {
            self.step_inplace(&blocks, &mut x, &seq[t * d..(t + 1) * d], &mut scratch, t)?;
            if let Some(states) = states.as_mut() {
                states.row_mut(t).copy_from_slice(&x);
            }
        }
        let logits = self.logits(&x);
        Ok(TrajectoryRecord {
            states,
            final_state: x,
            logits,
        })
    }

    /// Simulates two initial states under the same inputs and tracks their
    /// distance in the network metric.
    pub fn two_trajectory_convergence(
        &self,
        x0_a: &[f64],
        x0_b: &[f64],
        seq: &[f64],
    ) -> Result<ConvergenceReport> {
        self.check_state(x0_a)?;
        self.check_state(x0_b)?;
        if x0_a == x0_b {
            return Err(Error::IdenticalInitialStates);
        }
        let t_len = self.sequence_len(seq)?;
        let d = self.input_dim();
        let metric = self.certificate_metric();
        let blocks = self.coupling_blocks();
        let dist = |a: &[f64], b: &[f64]| -> f64 {
            a.iter()
                .zip(b)
                .zip(&metric)
                .map(|((x, y), m)| m * (x - y) * (x - y))
                .sum::<f64>()
                .sqrt()
        };
        let (mut xa, mut xb) = (x0_a.to_vec(), x0_b.to_vec());
        let mut scratch = StepScratch::new(self.n());
        let mut raw = Vec::with_capacity(t_len + 1);
        raw.push(dist(&xa, &xb));
        for t in 0..t_len {
            let u = &seq[t * d..(t + 1) * d];
            self.step_inplace(&blocks, &mut xa, u, &mut scratch, t)?;
            self.step_inplace(&blocks, &mut xb, u, &mut scratch, t)?;
            raw.push(dist(&xa, &xb));
        }
        let h = self.dt;
        let points: Vec<(f64, f64)> = raw
            .iter()
            .enumerate()
            .take_while(|(_, &d)| d > DISTANCE_FLOOR)
            .map(|(t, &d)| (t as f64 * h, d.ln()))
            .collect();
        let fitted_rate = least_squares_slope(&points);
        let distances = raw.into_iter().map(|d| d.max(DISTANCE_FLOOR)).collect();
        Ok(ConvergenceReport {
            distances,
            fitted_rate,
        })
    }

    /// `J(x) = -I + W D_φ(x) + L D_ψ(x)`.
    pub fn jacobian(&self, x: &[f64]) -> Result<DenseMatrix> {
        self.check_state(x)?;
        let psi = self.effective_psi();
        let dphi: Vec<f64> = x.iter().map(|&v| self.phi.derivative(v)).collect();
        let dpsi: Vec<f64> = x.iter().map(|&v| psi.derivative(v)).collect();
        Ok(self.jacobian_with(&dphi, &dpsi))
    }

    /// Jacobian for given activation-slope diagonals.
    pub fn jacobian_with(&self, dphi: &[f64], dpsi: &[f64]) -> DenseMatrix {
        let n = self.n();
        let mut j = DenseMatrix::zeros(n, n);
        for (i, s) in self.subnets.iter().enumerate() {
            let off = self.layout.offsets()[i];
            for r in 0..s.n() {
                for c in 0..s.n() {
                    j[(off + r, off + c)] = s.w[(r, c)] * dphi[off + c];
                }
            }
        }
        for blk in self.coupling_blocks() {
            for r in blk.rows.clone() {
                for c in blk.cols.clone() {
                    j[(r, c)] += self.weights.l[(r, c)] * dpsi[c];
                }
            }
        }
        for k in 0..n {
            j[(k, k)] -= 1.0;
        }
        j
    }

    pub(crate) fn sequence_len(&self, seq: &[f64]) -> Result<usize> {
        let d = self.input_dim();
        if seq.is_empty() || !seq.len().is_multiple_of(d) {
            return Err(Error::DimensionMismatch {
                context: "sequence length (multiple of input_dim, T >= 1)",
                expected: d,
                got: seq.len(),
            });
        }
        Ok(seq.len() / d)
    }

    fn check_state(&self, x: &[f64]) -> Result<()> {
        if x.len() != self.n() {
            return Err(Error::DimensionMismatch {
                context: "state vector",
                expected: self.n(),
                got: x.len(),
            });
        }
        Ok(())
    }

    fn check_input(&self, u: &[f64]) -> Result<()> {
        if u.len() != self.input_dim() {
            return Err(Error::DimensionMismatch {
                context: "input vector",
                expected: self.input_dim(),
                got: u.len(),
            });
        }
        Ok(())
    }
}

/// Reusable buffers for one Euler step.
#[derive(Debug, Clone)]
pub(crate) struct StepScratch {
    pub phi: Vec<f64>,
    pub psi: Vec<f64>,
    pub f: Vec<f64>,
}

impl StepScratch {
    pub fn new(n: usize) -> Self {
        Self {
            phi: vec![0.0; n],
            psi: vec![0.0; n],
            f: vec![0.0; n],
        }
    }
}

#[inline]
pub(crate) fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

fn least_squares_slope(points: &[(f64, f64)]) -> f64 {
    if points.len() < 2 {
        return f64::NAN;
    }
    let n = points.len() as f64;
    let mt = points.iter().map(|p| p.0).sum::<f64>() / n;
    let my = points.iter().map(|p| p.1).sum::<f64>() / n;
    let sxy: f64 = points.iter().map(|p| (p.0 - mt) * (p.1 - my)).sum();
    let sxx: f64 = points.iter().map(|p| (p.0 - mt) * (p.0 - mt)).sum();
    sxy / sxx
}

/// Writes a `T x N` state trace as CSV with header `t,unit_0,...`.
pub fn write_trajectory_csv<W: Write>(out: W, states: &DenseMatrix) -> Result<()> {
    let mut w = csv::Writer::from_writer(out);
    let mut header = vec!["t".to_string()];
    header.extend((0..states.cols()).map(|k| format!("unit_{k}")));
    w.write_record(&header)?;
    for t in 0..states.rows() {
        let mut rec = vec![t.to_string()];
        rec.extend(states.row(t).iter().map(|v| v.to_string()));
        w.write_record(&rec)?;
    }
    w.flush()?;
    Ok(())
}
