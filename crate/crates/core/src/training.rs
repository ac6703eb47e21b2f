//! Backpropagation through time and the training loop.
//!
//! Only the inter-area parameter (`B` for negative feedback, `L` otherwise),
//! the input and output layers and the two bias vectors are trained. The
//! subnet weights `W` never receive a gradient.

use std::io::Write;
use std::time::Instant;

use rand::seq::SliceRandom;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::analysis::evaluate;
use crate::coupling::{verify_contraction_certificate, CouplingMode};
use crate::data::SequenceDataset;
use crate::dynamics::{BiasPlacement, MultiAreaNet, StepScratch};
use crate::error::{Error, Result};
use crate::numerics::DenseMatrix;
use crate::seeds::{self, Stream};
use crate::topology::BlockMask;

/// Sequences per deterministic reduction chunk.
const REDUCE_CHUNK: usize = 8;
/// At most this many coordinates are compared by [`finite_diff_check`].
pub const FD_MAX_COORDS: usize = 5000;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum Optimizer {
    Adam {
        #[serde(default = "default_beta1")]
        beta1: f64,
        #[serde(default = "default_beta2")]
        beta2: f64,
        #[serde(default = "default_adam_eps")]
        eps: f64,
    },
    Sgd {
        #[serde(default)]
        momentum: f64,
    },
}

fn default_beta1() -> f64 {
    0.9
}
fn default_beta2() -> f64 {
    0.999
}
fn default_adam_eps() -> f64 {
    1e-8
}

impl Default for Optimizer {
    fn default() -> Self {
        Optimizer::Adam {
            beta1: default_beta1(),
            beta2: default_beta2(),
            eps: default_adam_eps(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct TrainConfig {
    pub batch_size: usize,
    pub lr: f64,
    pub epochs: usize,
    pub lr_cut_epochs: Vec<usize>,
    pub lr_cut_factor: f64,
    pub seed: u64,
    pub optimizer: Optimizer,
    /// Block-norm projection after each update. `None` means on exactly in
    /// the nonlinear workspace mode, which is also the only mode allowing it.
    pub gw_projection: Option<bool>,
    pub log_every: usize,
    /// Evaluate test accuracy every this many epochs (0 = never).
    pub eval_every: usize,
    /// Run the Jacobian certificate every this many epochs (0 = never).
    pub certify_every: usize,
    pub certify_states: usize,
}

impl Default for TrainConfig {
    fn default() -> Self {
        Self {
            batch_size: 128,
            lr: 0.002,
            epochs: 250,
            lr_cut_epochs: vec![150, 200],
            lr_cut_factor: 0.1,
            seed: 0,
            optimizer: Optimizer::default(),
            gw_projection: None,
            log_every: 1,
            eval_every: 1,
            certify_every: 0,
            certify_states: 200,
        }
    }
}

impl TrainConfig {
    pub fn validate(&self) -> Result<()> {
        let bad = |m: &str| Err(Error::Config(m.to_string()));
        if self.batch_size == 0 {
            return bad("batch_size must be at least 1");
        }
        if !(self.lr > 0.0) || !self.lr.is_finite() {
            return bad("lr must be positive");
        }
        if !(self.lr_cut_factor > 0.0) {
            return bad("lr_cut_factor must be positive");
        }
        if self.lr_cut_epochs.windows(2).any(|w| w[0] >= w[1]) {
            return bad("lr_cut_epochs must be strictly increasing");
        }
        if self.epochs > 0 && self.lr_cut_epochs.iter().any(|&e| e >= self.epochs) {
            return bad("lr_cut_epochs must be below epochs");
        }
        Ok(())
    }

    fn projection_for(&self, mode: &CouplingMode) -> Result<bool> {
        let gw = matches!(mode, CouplingMode::GwNonlinear { .. });
        match self.gw_projection {
            None => Ok(gw),
            Some(true) if !gw => Err(Error::Config("gw_projection needs gw_nonlinear coupling".into())),
            Some(false) if gw => Err(Error::Config(
                "gw_nonlinear coupling always projects; use unconstrained coupling for an unprojected control".into(),
            )),
            Some(v) => Ok(v),
        }
    }
}

/// Learning rate in `epoch`: the base rate times the cut factor once per
/// cut point at or before `epoch`.
pub fn lr_schedule(cfg: &TrainConfig, epoch: usize) -> f64 {
    let cuts = cfg.lr_cut_epochs.iter().filter(|&&e| e <= epoch).count();
    cfg.lr * cfg.lr_cut_factor.powi(cuts as i32)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EpochRecord {
    pub epoch: usize,
    /// Mean cross-entropy over the epoch's mini-batches, before each update.
    pub train_loss: f64,
    pub test_acc: Option<f64>,
    pub lr: f64,
    pub wall_s: f64,
    pub certificate_max_eig: Option<f64>,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct TrainHistory {
    pub epochs: Vec<EpochRecord>,
}

impl TrainHistory {
    pub fn len(&self) -> usize {
        self.epochs.len()
    }

    pub fn is_empty(&self) -> bool {
        self.epochs.is_empty()
    }

    pub fn final_test_acc(&self) -> Option<f64> {
        self.epochs.iter().rev().find_map(|e| e.test_acc)
    }
}

pub const HISTORY_CSV_HEADER: [&str; 5] = ["epoch", "train_loss", "test_acc", "lr", "wall_s"];

pub fn write_history_csv<W: Write>(out: W, history: &TrainHistory) -> Result<()> {
    let mut w = csv::Writer::from_writer(out);
    w.write_record(HISTORY_CSV_HEADER)?;
    for e in &history.epochs {
        w.write_record([
            e.epoch.to_string(),
            e.train_loss.to_string(),
            e.test_acc.map(|a| a.to_string()).unwrap_or_default(),
            e.lr.to_string(),
            e.wall_s.to_string(),
        ])?;
    }
    w.flush()?;
    Ok(())
}

/// Gradients of the mean loss with respect to every trainable tensor.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Gradients {
    /// `dB` (negative feedback) or masked `dL`.
    pub coupling: DenseMatrix,
    pub input: DenseMatrix,
    pub output: DenseMatrix,
    pub hidden_bias: Vec<f64>,
    pub output_bias: Vec<f64>,
}

impl Gradients {
    pub fn zeros_like(net: &MultiAreaNet) -> Self {
        Self {
            coupling: DenseMatrix::zeros(net.n(), net.n()),
            input: DenseMatrix::zeros(net.input_dim(), net.n()),
            output: DenseMatrix::zeros(net.n(), net.classes()),
            hidden_bias: vec![0.0; net.n()],
            output_bias: vec![0.0; net.classes()],
        }
    }

    pub fn tensors(&self) -> [&[f64]; 5] {
        [
            self.coupling.as_slice(),
            self.input.as_slice(),
            self.output.as_slice(),
            &self.hidden_bias,
            &self.output_bias,
        ]
    }

    fn tensors_mut(&mut self) -> [&mut [f64]; 5] {
        [
            self.coupling.as_mut_slice(),
            self.input.as_mut_slice(),
            self.output.as_mut_slice(),
            &mut self.hidden_bias,
            &mut self.output_bias,
        ]
    }

    fn add_assign(&mut self, other: &Self) {
        for (a, b) in self.tensors_mut().into_iter().zip(other.tensors()) {
            for (x, y) in a.iter_mut().zip(b) {
                *x += y;
            }
        }
    }

    fn scale(&mut self, s: f64) {
        for t in self.tensors_mut() {
            t.iter_mut().for_each(|v| *v *= s);
        }
    }
}

/// Trainable tensors of `net`, in the same order as [`Gradients::tensors`].
fn params_mut(net: &mut MultiAreaNet) -> [&mut [f64]; 5] {
    [
        net.weights.b.as_mut_slice(),
        net.input_weights.as_mut_slice(),
        net.output_weights.as_mut_slice(),
        &mut net.hidden_bias,
        &mut net.output_bias,
    ]
}

/// Recomputes `L` from the trainable parameter without any projection.
fn apply_coupling_exact(net: &mut MultiAreaNet) -> Result<()> {
    match net.coupling {
        CouplingMode::NegativeFeedback { .. } => net.refresh_coupling(),
        _ => {
            net.weights.l = net.weights.b.clone();
            Ok(())
        }
    }
}

fn log_softmax(z: &[f64]) -> Vec<f64> {
    let m = z.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    let lse = m + z.iter().map(|v| (v - m).exp()).sum::<f64>().ln();
    z.iter().map(|v| v - lse).collect()
}

/// Cross-entropy of one sequence.
pub fn sequence_loss(net: &MultiAreaNet, seq: &[f64], label: usize) -> Result<f64> {
    let rec = net.run_sequence(seq, false)?;
    Ok(-log_softmax(&rec.logits)[label])
}

/// Forward and backward pass for one sequence, accumulating raw `dL` (on
/// coupled blocks) and the layer gradients into `acc`. Returns the loss.
fn accumulate_sequence(
    net: &MultiAreaNet,
    seq: &[f64],
    label: usize,
    acc: &mut Gradients,
) -> Result<f64> {
    let rec = net.run_sequence(seq, true)?;
    let states = rec.states.expect("trace requested");
    let n = net.n();
    let d = net.input_dim();
    let t_len = states.rows();
    let h = net.dt / net.tau;
    let psi = net.effective_psi();
    let blocks = net.coupling_blocks();
    let outside = net.bias_placement == BiasPlacement::OutsideDt;

    let logp = log_softmax(&rec.logits);
    let loss = -logp[label];
    let mut dz: Vec<f64> = logp.iter().map(|v| v.exp()).collect();
    dz[label] -= 1.0;
    for (r, &x) in rec.final_state.iter().enumerate() {
        for (g, dzc) in acc.output.row_mut(r).iter_mut().zip(&dz) {
            *g += x * dzc;
        }
    }
    for (g, dzc) in acc.output_bias.iter_mut().zip(&dz) {
        *g += dzc;
    }

    let mut g = net.output_weights.matvec(&dz);
    let mut hg = vec![0.0; n];
    let mut back = vec![0.0; n];
    let mut scratch = StepScratch::new(n);
    let zero = vec![0.0; n];
    for t in (0..t_len).rev() {
        let x_prev: &[f64] = if t == 0 { &zero } else { states.row(t - 1) };
        for ((a, b), &v) in scratch
            .phi
            .iter_mut()
            .zip(scratch.psi.iter_mut())
            .zip(x_prev)
        {
            *a = net.phi.derivative(v);
            *b = psi.apply(v);
        }
        for (o, gi) in hg.iter_mut().zip(&g) {
            *o = h * gi;
        }
        let u = &seq[t * d..(t + 1) * d];
        for (k, &uk) in u.iter().enumerate() {
            if uk != 0.0 {
                for (gd, hv) in acc.input.row_mut(k).iter_mut().zip(&hg) {
                    *gd += uk * hv;
                }
            }
        }
        let bias_grad = if outside { &g } else { &hg };
        for (gd, v) in acc.hidden_bias.iter_mut().zip(bias_grad) {
            *gd += v;
        }

        // back = Wᵀ hg (masked by φ') + Lᵀ hg (masked by ψ')
        back.iter_mut().for_each(|v| *v = 0.0);
        for (i, sub) in net.subnets.iter().enumerate() {
            let range = net.layout.range(i);
            let off = range.start;
            for r in 0..sub.n() {
                let hr = hg[off + r];
                if hr == 0.0 {
                    continue;
                }
                for (bc, w) in back[range.clone()].iter_mut().zip(sub.w.row(r)) {
                    *bc += w * hr;
                }
            }
        }
        for k in 0..n {
            back[k] *= scratch.phi[k];
        }
        scratch.f.iter_mut().for_each(|v| *v = 0.0);
        for blk in &blocks {
            for r in blk.rows.clone() {
                let hr = hg[r];
                if hr == 0.0 {
                    continue;
                }
                let lrow = &net.weights.l.row(r)[blk.cols.clone()];
                for (bc, w) in scratch.f[blk.cols.clone()].iter_mut().zip(lrow) {
                    *bc += w * hr;
                }
                let src = &scratch.psi[blk.cols.clone()];
                for (gd, s) in acc.coupling.row_mut(r)[blk.cols.clone()]
                    .iter_mut()
                    .zip(src)
                {
                    *gd += hr * s;
                }
            }
        }
        for k in 0..n {
            let dpsi = psi.derivative(x_prev[k]);
            g[k] += -hg[k] + back[k] + dpsi * scratch.f[k];
        }
    }
    Ok(loss)
}

/// Maps the accumulated `dL` onto the trainable coupling parameter.
fn coupling_param_grad(net: &MultiAreaNet, dl: &DenseMatrix, mask: &BlockMask) -> DenseMatrix {
    let n = net.n();
    match net.coupling {
        CouplingMode::NegativeFeedback { relax } => {
            let m = net.metric();
            DenseMatrix::from_fn(n, n, |a, b| {
                if !mask.get(a, b) {
                    return 0.0;
                }
                dl[(a, b)] - m[a] / m[b] * dl[(b, a)] + relax * (dl[(a, b)] + dl[(b, a)])
            })
        }
        _ => DenseMatrix::from_fn(n, n, |a, b| if mask.get(a, b) { dl[(a, b)] } else { 0.0 }),
    }
}

/// Mean cross-entropy over `indices` of `data` and its gradient.
///
/// Sequences are processed in fixed chunks whose partial sums are added in
/// index order, so the result does not depend on the thread count.
pub fn bptt_grads(
    net: &MultiAreaNet,
    data: &SequenceDataset,
    indices: &[usize],
) -> Result<(f64, Gradients)> {
    if indices.is_empty() {
        return Err(Error::InvalidArgument("empty batch".into()));
    }
    if data.input_dim != net.input_dim() {
        return Err(Error::DimensionMismatch {
            context: "batch input_dim",
            expected: net.input_dim(),
            got: data.input_dim,
        });
    }
    for &i in indices {
        if i >= data.len() {
            return Err(Error::IndexOutOfRange {
                index: i,
                len: data.len(),
            });
        }
        if data.labels[i] >= net.classes() {
            return Err(Error::IndexOutOfRange {
                index: data.labels[i],
                len: net.classes(),
            });
        }
    }
    let partials = indices
        .par_chunks(REDUCE_CHUNK)
        .map(|chunk| {
            let mut acc = Gradients::zeros_like(net);
            let mut loss = 0.0;
            for &i in chunk {
                loss += accumulate_sequence(net, data.sequence(i), data.labels[i], &mut acc)?;
            }
            Ok((loss, acc))
        })
        .collect::<Result<Vec<_>>>()?;
    let mut iter = partials.into_iter();
    let (mut loss, mut acc) = iter.next().expect("nonempty batch");
    for (l, g) in iter {
        loss += l;
        acc.add_assign(&g);
    }
    let inv = 1.0 / indices.len() as f64;
    acc.scale(inv);
    acc.coupling = coupling_param_grad(net, &acc.coupling, &net.trainable_mask()?);
    Ok((loss * inv, acc))
}

/// Max relative error between [`bptt_grads`] and central differences with
/// step `h`, denominator `max(|g|, 1e-8)`. Every trainable coordinate is
/// checked, or a seeded random subset of [`FD_MAX_COORDS`] when there are more.
pub fn finite_diff_check(net: &MultiAreaNet, seq: &[f64], label: usize, h: f64) -> Result<f64> {
    if !(h > 0.0) {
        return Err(Error::InvalidArgument("h must be positive".into()));
    }
    let t_len = net.sequence_len(seq)?;
    let data = SequenceDataset::new(
        t_len,
        net.input_dim(),
        net.classes(),
        seq.to_vec(),
        vec![label],
    )?;
    let (_, grads) = bptt_grads(net, &data, &[0])?;

    let mask = net.trainable_mask()?;
    let mut coords: Vec<(usize, usize)> = Vec::new();
    for (t, tensor) in grads.tensors().iter().enumerate() {
        for k in 0..tensor.len() {
            if t == 0 && !mask.get(k / net.n(), k % net.n()) {
                continue;
            }
            coords.push((t, k));
        }
    }
    if coords.len() > FD_MAX_COORDS {
        coords.shuffle(&mut seeds::stream(0, Stream::Verifier, 1));
        coords.truncate(FD_MAX_COORDS);
    }

    let mut base = net.clone();
    apply_coupling_exact(&mut base)?;
    let errs = coords
        .par_iter()
        .map(|&(t, k)| {
            let mut probe = base.clone();
            let orig = params_mut(&mut probe)[t][k];
            let mut loss_at = |v: f64| -> Result<f64> {
                params_mut(&mut probe)[t][k] = v;
                if t == 0 {
                    apply_coupling_exact(&mut probe)?;
                }
                sequence_loss(&probe, seq, label)
            };
            let fd = (loss_at(orig + h)? - loss_at(orig - h)?) / (2.0 * h);
            let g = grads.tensors()[t][k];
            Ok((g - fd).abs() / g.abs().max(1e-8))
        })
        .collect::<Result<Vec<f64>>>()?;
    Ok(errs.into_iter().fold(0.0, f64::max))
}

/// Optimizer moments, one buffer per trainable tensor.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct OptimizerState {
    pub step: u64,
    pub first: Vec<Vec<f64>>,
    pub second: Vec<Vec<f64>>,
}

impl OptimizerState {
    pub fn new(net: &MultiAreaNet) -> Self {
        let g = Gradients::zeros_like(net);
        let first: Vec<Vec<f64>> = g.tensors().iter().map(|t| vec![0.0; t.len()]).collect();
        Self {
            step: 0,
            second: first.clone(),
            first,
        }
    }

    fn apply(&mut self, opt: &Optimizer, lr: f64, net: &mut MultiAreaNet, grads: &Gradients) {
        self.step += 1;
        let t = self.step as i32;
        let params = params_mut(net);
        for (k, (p, g)) in params.into_iter().zip(grads.tensors()).enumerate() {
            let (m, v) = (&mut self.first[k], &mut self.second[k]);
            match *opt {
                Optimizer::Adam { beta1, beta2, eps } => {
                    let c1 = 1.0 - beta1.powi(t);
                    let c2 = 1.0 - beta2.powi(t);
                    for i in 0..p.len() {
                        m[i] = beta1 * m[i] + (1.0 - beta1) * g[i];
                        v[i] = beta2 * v[i] + (1.0 - beta2) * g[i] * g[i];
                        p[i] -= lr * (m[i] / c1) / ((v[i] / c2).sqrt() + eps);
                    }
                }
                Optimizer::Sgd { momentum } => {
                    for i in 0..p.len() {
                        m[i] = momentum * m[i] + g[i];
                        p[i] -= lr * m[i];
                    }
                }
            }
        }
    }
}

/// Resumable training state.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Trainer {
    pub cfg: TrainConfig,
    pub optimizer: OptimizerState,
    /// Next epoch to run.
    pub epoch: usize,
    pub history: TrainHistory,
}

impl Trainer {
    pub fn new(cfg: TrainConfig, net: &MultiAreaNet) -> Result<Self> {
        cfg.validate()?;
        cfg.projection_for(&net.coupling)?;
        Ok(Self {
            optimizer: OptimizerState::new(net),
            cfg,
            epoch: 0,
            history: TrainHistory::default(),
        })
    }

    pub fn is_done(&self) -> bool {
        self.epoch >= self.cfg.epochs
    }

    /// Runs one epoch and returns its record.
    pub fn run_epoch(
        &mut self,
        net: &mut MultiAreaNet,
        train: &SequenceDataset,
        test: &SequenceDataset,
    ) -> Result<EpochRecord> {
        check_dataset(net, train)?;
        check_dataset(net, test)?;
        let start = Instant::now();
        let epoch = self.epoch;
        let lr = lr_schedule(&self.cfg, epoch);
        let project = self.cfg.projection_for(&net.coupling)?;
        let mask = net.trainable_mask()?;

        let mut order: Vec<usize> = (0..train.len()).collect();
        order.shuffle(&mut seeds::stream(
            self.cfg.seed,
            Stream::Shuffle,
            epoch as u64,
        ));

        let mut loss_sum = 0.0;
        for batch in order.chunks(self.cfg.batch_size) {
            let (loss, grads) = match bptt_grads(net, train, batch) {
                Ok(v) => v,
                Err(Error::StateOverflow { step }) => {
                    return Err(self.diverged(format!("state overflow at step {step}")))
                }
                Err(e) => return Err(e),
            };
            if !loss.is_finite()
                || grads
                    .tensors()
                    .iter()
                    .any(|t| t.iter().any(|v| !v.is_finite()))
            {
                return Err(self.diverged(format!("non-finite loss {loss}")));
            }
            loss_sum += loss * batch.len() as f64;
            self.optimizer.apply(&self.cfg.optimizer, lr, net, &grads);
            zero_outside(&mut net.weights.b, &mask);
            if project {
                net.refresh_coupling()?;
            } else {
                apply_coupling_exact(net)?;
            }
        }
        let train_loss = loss_sum / train.len() as f64;

        let evaluate_now = self.cfg.eval_every > 0
            && ((epoch + 1).is_multiple_of(self.cfg.eval_every) || epoch + 1 == self.cfg.epochs);
        let test_acc = if evaluate_now {
            match evaluate(net, test) {
                Ok(r) => Some(r.accuracy),
                Err(Error::StateOverflow { step }) => {
                    return Err(
                        self.diverged(format!("state overflow at step {step} in evaluation"))
                    )
                }
                Err(e) => return Err(e),
            }
        } else {
            None
        };
        let certificate_max_eig =
            if self.cfg.certify_every > 0 && (epoch + 1).is_multiple_of(self.cfg.certify_every) {
                Some(
                    verify_contraction_certificate(net, self.cfg.certify_states, self.cfg.seed)?
                        .max_sym_eig,
                )
            } else {
                None
            };
        let record = EpochRecord {
            epoch,
            train_loss,
            test_acc,
            lr,
            wall_s: start.elapsed().as_secs_f64(),
            certificate_max_eig,
        };
        if self.cfg.log_every > 0 && (epoch + 1).is_multiple_of(self.cfg.log_every) {
            log::info!(
                "epoch {epoch}: loss {train_loss:.5} acc {} lr {lr:e} ({:.1}s)",
                test_acc
                    .map(|a| format!("{:.4}", a))
                    .unwrap_or_else(|| "-".into()),
                record.wall_s
            );
        }
        self.history.epochs.push(record.clone());
        self.epoch += 1;
        Ok(record)
    }

    /// Runs the remaining epochs, calling `on_epoch` after each one.
    pub fn run(
        &mut self,
        net: &mut MultiAreaNet,
        train: &SequenceDataset,
        test: &SequenceDataset,
        mut on_epoch: impl FnMut(&Trainer, &MultiAreaNet) -> Result<()>,
    ) -> Result<TrainHistory> {
        while !self.is_done() {
            self.run_epoch(net, train, test)?;
            on_epoch(self, net)?;
        }
        Ok(self.history.clone())
    }

    fn diverged(&self, reason: String) -> Error {
        Error::Divergence {
            epoch: self.epoch,
            reason,
            history: Box::new(self.history.clone()),
        }
    }
}

fn check_dataset(net: &MultiAreaNet, data: &SequenceDataset) -> Result<()> {
    if data.is_empty() {
        return Err(Error::InvalidArgument("empty dataset".into()));
    }
    if data.classes != net.classes() || data.input_dim != net.input_dim() {
        return Err(Error::InvalidArgument(format!(
            "dataset has {} classes and input_dim {}, network expects {} and {}",
            data.classes,
            data.input_dim,
            net.classes(),
            net.input_dim()
        )));
    }
    Ok(())
}

fn zero_outside(b: &mut DenseMatrix, mask: &BlockMask) {
    let n = b.rows();
    for r in 0..n {
        for (c, v) in b.row_mut(r).iter_mut().enumerate() {
            if !mask.get(r, c) {
                *v = 0.0;
            }
        }
    }
}

/// Trains `net` for `cfg.epochs` epochs of shuffled mini-batch descent.
pub fn train(
    net: &mut MultiAreaNet,
    train_set: &SequenceDataset,
    test_set: &SequenceDataset,
    cfg: &TrainConfig,
) -> Result<TrainHistory> {
    let mut trainer = Trainer::new(cfg.clone(), net)?;
    trainer.run(net, train_set, test_set, |_, _| Ok(()))
}
