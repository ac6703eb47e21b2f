//! Post-training dissection: ablations, pruning, evaluation and coupling statistics.

use std::collections::BTreeSet;
use std::io::Write;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::coupling::{metric_skew_residual, CouplingMode};
use crate::data::SequenceDataset;
use crate::dynamics::MultiAreaNet;
use crate::error::{Error, Result};
use crate::numerics::DenseMatrix;
use crate::subnet::{ablate_unit, CertifyConfig};

/// Pruning must keep `‖ML + LᵀM‖_max` below this.
pub const SKEW_TOL: f64 = 1e-10;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum AblationKind {
    Total,
    InterArea,
    IntraArea,
    InputOnly,
    OutputOnly,
}

impl AblationKind {
    pub const ALL: [AblationKind; 5] = [
        AblationKind::Total,
        AblationKind::InterArea,
        AblationKind::IntraArea,
        AblationKind::InputOnly,
        AblationKind::OutputOnly,
    ];

    pub fn name(self) -> &'static str {
        match self {
            AblationKind::Total => "total",
            AblationKind::InterArea => "inter_area",
            AblationKind::IntraArea => "intra_area",
            AblationKind::InputOnly => "input_only",
            AblationKind::OutputOnly => "output_only",
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct AblationTarget {
    pub kind: AblationKind,
    pub subnets: BTreeSet<usize>,
}

impl AblationTarget {
    pub fn new(kind: AblationKind, subnets: impl IntoIterator<Item = usize>) -> Self {
        Self {
            kind,
            subnets: subnets.into_iter().collect(),
        }
    }

    fn validate(&self, p: usize) -> Result<()> {
        if self.subnets.is_empty() {
            return Err(Error::InvalidArgument(
                "ablation target names no subnets".into(),
            ));
        }
        match self.subnets.iter().find(|&&i| i >= p) {
            Some(&i) => Err(Error::IndexOutOfRange { index: i, len: p }),
            None => Ok(()),
        }
    }

    /// Subnet set as written in reports, e.g. `3+7`.
    pub fn subnet_label(&self) -> String {
        self.subnets
            .iter()
            .map(|i| i.to_string())
            .collect::<Vec<_>>()
            .join("+")
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct AblationOptions {
    /// Also zero the output bias under `output_only` ablation.
    pub output_only_zeroes_output_bias: bool,
}

/// Copy of `net` with the target's weights set to zero.
///
/// `total` is the union of the other four plus the hidden biases of the
/// target units. `inter_area` clears the target units' rows and columns of
/// both `B` and `L`, so the coupling stays consistent with its parameter.
pub fn ablate(net: &MultiAreaNet, target: &AblationTarget) -> Result<MultiAreaNet> {
    ablate_with(net, target, AblationOptions::default())
}

pub fn ablate_with(
    net: &MultiAreaNet,
    target: &AblationTarget,
    opts: AblationOptions,
) -> Result<MultiAreaNet> {
    target.validate(net.p())?;
    let mut out = net.clone();
    let kinds: &[AblationKind] = if target.kind == AblationKind::Total {
        &AblationKind::ALL[1..]
    } else {
        std::slice::from_ref(&target.kind)
    };
    for &i in &target.subnets {
        let range = net.layout.range(i);
        for &kind in kinds {
            match kind {
                AblationKind::InterArea => {
                    for m in [&mut out.weights.b, &mut out.weights.l] {
                        let n = m.rows();
                        for u in range.clone() {
                            m.row_mut(u).iter_mut().for_each(|v| *v = 0.0);
                            for r in 0..n {
                                m[(r, u)] = 0.0;
                            }
                        }
                    }
                }
                AblationKind::IntraArea => {
                    let s = &mut out.subnets[i];
                    s.w = DenseMatrix::zeros(s.n(), s.n());
                    s.rho = 0.0;
                    s.rate = 1.0;
                }
                AblationKind::InputOnly => {
                    for k in 0..out.input_weights.rows() {
                        out.input_weights.row_mut(k)[range.clone()]
                            .iter_mut()
                            .for_each(|v| *v = 0.0);
                    }
                }
                AblationKind::OutputOnly => {
                    for u in range.clone() {
                        out.output_weights
                            .row_mut(u)
                            .iter_mut()
                            .for_each(|v| *v = 0.0);
                    }
                    if opts.output_only_zeroes_output_bias {
                        out.output_bias.iter_mut().for_each(|v| *v = 0.0);
                    }
                }
                AblationKind::Total => unreachable!(),
            }
        }
        if target.kind == AblationKind::Total {
            out.hidden_bias[range].iter_mut().for_each(|v| *v = 0.0);
        }
    }
    Ok(out)
}

/// Removes the coupling between units `r` and `c` (in different subnets):
/// `L_rc`, `L_cr` and the matching entries of `B` become zero. Only valid for
/// negative feedback, where the pruned `L` stays skew in the metric.
pub fn prune_inter_area_pair(net: &MultiAreaNet, r: usize, c: usize) -> Result<MultiAreaNet> {
    let n = net.n();
    for u in [r, c] {
        if u >= n {
            return Err(Error::IndexOutOfRange { index: u, len: n });
        }
    }
    if net.layout.subnet_of(r) == net.layout.subnet_of(c) {
        return Err(Error::InvalidArgument(format!(
            "units {r} and {c} are in the same subnet"
        )));
    }
    if !matches!(net.coupling, CouplingMode::NegativeFeedback { .. }) {
        return Err(Error::InvalidArgument(
            "pair pruning needs negative-feedback coupling".into(),
        ));
    }
    let mut out = net.clone();
    for (a, b) in [(r, c), (c, r)] {
        out.weights.b[(a, b)] = 0.0;
        out.weights.l[(a, b)] = 0.0;
    }
    let residual = metric_skew_residual(&out.weights.l, &out.metric());
    if matches!(out.coupling, CouplingMode::NegativeFeedback { relax } if relax == 0.0)
        && residual >= SKEW_TOL {
            return Err(Error::InvalidArgument(format!(
                "coupling not skew in the metric after pruning ({residual:e})"
            )));
        }
    Ok(out)
}

/// Removes unit `k` of subnet `i` from every layer. The subnet keeps its
/// metric restricted to the remaining units and the coupling is rebuilt from
/// its parameter, so every certificate carries over.
pub fn remove_unit(
    net: &MultiAreaNet,
    i: usize,
    k: usize,
    cfg: &CertifyConfig,
) -> Result<MultiAreaNet> {
    if i >= net.p() {
        return Err(Error::IndexOutOfRange {
            index: i,
            len: net.p(),
        });
    }
    let sub = ablate_unit(&net.subnets[i], k, cfg)?;
    let u = net.layout.offsets()[i] + k;
    let mut out = net.clone();
    out.subnets[i] = sub;
    out.layout = net.layout.without_unit_in(i)?;
    out.weights.b = net.weights.b.remove_row_col(u);
    out.weights.l = net.weights.l.remove_row_col(u);
    out.input_weights = net.input_weights.remove_rows_cols(usize::MAX, u);
    out.output_weights = net.output_weights.remove_rows_cols(u, usize::MAX);
    out.hidden_bias.remove(u);
    if let CouplingMode::NegativeFeedback { .. } = out.coupling {
        out.refresh_coupling()?;
    }
    Ok(out)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EvalReport {
    pub accuracy: f64,
    pub per_class: Vec<f64>,
    /// `confusion[true][predicted]`.
    pub confusion: Vec<Vec<usize>>,
}

/// Index of the largest entry, lowest index on ties.
pub fn argmax(z: &[f64]) -> usize {
    let mut best = 0;
    for (k, &v) in z.iter().enumerate().skip(1) {
        if v > z[best] {
            best = k;
        }
    }
    best
}

pub fn evaluate(net: &MultiAreaNet, test: &SequenceDataset) -> Result<EvalReport> {
    if test.is_empty() {
        return Err(Error::InvalidArgument("empty test set".into()));
    }
    if test.classes != net.classes() {
        return Err(Error::DimensionMismatch {
            context: "evaluate (class count)",
            expected: net.classes(),
            got: test.classes,
        });
    }
    let preds = (0..test.len())
        .into_par_iter()
        .map(|i| Ok(argmax(&net.run_sequence(test.sequence(i), false)?.logits)))
        .collect::<Result<Vec<usize>>>()?;
    Ok(report_from_predictions(&test.labels, &preds, test.classes))
}

pub fn report_from_predictions(labels: &[usize], preds: &[usize], classes: usize) -> EvalReport {
    let mut confusion = vec![vec![0usize; classes]; classes];
    for (&y, &p) in labels.iter().zip(preds) {
        confusion[y][p] += 1;
    }
    let correct: usize = (0..classes).map(|c| confusion[c][c]).sum();
    let per_class = confusion
        .iter()
        .enumerate()
        .map(|(c, row)| {
            let total: usize = row.iter().sum();
            if total == 0 {
                0.0
            } else {
                row[c] as f64 / total as f64
            }
        })
        .collect();
    EvalReport {
        accuracy: correct as f64 / labels.len() as f64,
        per_class,
        confusion,
    }
}

/// `p x p` matrix of mean `|L_rc|` over each off-diagonal block of coupled subnets.
pub fn pair_strengths(net: &MultiAreaNet) -> DenseMatrix {
    let p = net.p();
    let mut out = DenseMatrix::zeros(p, p);
    for blk in net.coupling_blocks() {
        let count = blk.rows.len() * blk.cols.len();
        let sum: f64 = blk
            .rows
            .clone()
            .map(|r| {
                net.weights.l.row(r)[blk.cols.clone()]
                    .iter()
                    .map(|v| v.abs())
                    .sum::<f64>()
            })
            .sum();
        out[(blk.to, blk.from)] = sum / count as f64;
    }
    out
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AblationRow {
    pub target: Option<AblationKind>,
    pub subnets: String,
    pub report: EvalReport,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AblationReport {
    pub baseline: EvalReport,
    pub rows: Vec<AblationRow>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AblationSummaryRow {
    pub target: String,
    pub subnets: String,
    pub accuracy: f64,
    pub delta: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AblationSummary {
    pub baseline_accuracy: f64,
    pub targets: Vec<AblationSummaryRow>,
}

impl AblationReport {
    /// Long-form rows `target,subnet_set,class,rate`; class `all` is the overall accuracy.
    pub fn write_csv<W: Write>(&self, out: W) -> Result<()> {
        let mut w = csv::Writer::from_writer(out);
        w.write_record(["target", "subnet_set", "class", "rate"])?;
        let rows =
            std::iter::once(("baseline", "", &self.baseline)).chain(self.rows.iter().map(|r| {
                (
                    r.target.map_or("baseline", |k| k.name()),
                    r.subnets.as_str(),
                    &r.report,
                )
            }));
        for (name, set, rep) in rows {
            w.write_record([name, set, "all", &rep.accuracy.to_string()])?;
            for (c, rate) in rep.per_class.iter().enumerate() {
                w.write_record([name, set, &c.to_string(), &rate.to_string()])?;
            }
        }
        w.flush()?;
        Ok(())
    }

    pub fn summary(&self) -> AblationSummary {
        let base = self.baseline.accuracy;
        AblationSummary {
            baseline_accuracy: base,
            targets: self
                .rows
                .iter()
                .map(|r| AblationSummaryRow {
                    target: r.target.map_or("baseline", |k| k.name()).to_string(),
                    subnets: r.subnets.clone(),
                    accuracy: r.report.accuracy,
                    delta: r.report.accuracy - base,
                })
                .collect(),
        }
    }
}

/// Evaluates the intact net and each ablated copy. Targets are evaluated in
/// parallel; rows keep the order of `targets`.
pub fn ablation_sweep(
    net: &MultiAreaNet,
    test: &SequenceDataset,
    targets: &[AblationTarget],
) -> Result<AblationReport> {
    ablation_sweep_with(net, test, targets, AblationOptions::default())
}

pub fn ablation_sweep_with(
    net: &MultiAreaNet,
    test: &SequenceDataset,
    targets: &[AblationTarget],
    opts: AblationOptions,
) -> Result<AblationReport> {
    let baseline = evaluate(net, test)?;
    let rows = targets
        .par_iter()
        .map(|t| {
            let ablated = ablate_with(net, t, opts)?;
            Ok(AblationRow {
                target: Some(t.kind),
                subnets: t.subnet_label(),
                report: evaluate(&ablated, test)?,
            })
        })
        .collect::<Result<Vec<_>>>()?;
    Ok(AblationReport { baseline, rows })
}

/// One target per subnet for each kind.
pub fn single_subnet_targets(p: usize, kinds: &[AblationKind]) -> Vec<AblationTarget> {
    kinds
        .iter()
        .flat_map(|&k| (0..p).map(move |i| AblationTarget::new(k, [i])))
        .collect()
}
