//! Inter-area coupling: the negative-feedback parameterization, the
//! spectral-norm cap for nonlinear global-workspace coupling, and a
//! numerical Jacobian certificate for assembled networks.

use rand_distr::{Distribution, StandardNormal};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::dynamics::MultiAreaNet;
use crate::error::{Error, Result};
use crate::numerics::{max_eig_symmetric, spectral_norm, DenseMatrix};
use crate::seeds::{self, unit_f64, Stream};
use crate::topology::{BlockMask, NetworkLayout};

/// A certificate passes when the largest eigenvalue of `(MJ + JᵀM)/2`
/// over every probe is at most this.
pub const CERTIFICATE_TOL: f64 = 1e-8;
/// Networks up to this size get the exhaustive activation-pattern check.
pub const BRUTE_FORCE_MAX_UNITS: usize = 12;

const NORM_TOL: f64 = 1e-12;
const EIG_TOL: f64 = 1e-11;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "mode", rename_all = "snake_case", deny_unknown_fields)]
pub enum CouplingMode {
    /// `L = B - M⁻¹BᵀM (+ relax·(B + Bᵀ))` with the stacked subnet metric
    /// `M`; `relax = 0` is exact negative feedback.
    NegativeFeedback {
        #[serde(default)]
        relax: f64,
    },
    /// `L` trained directly on workspace blocks, each block's spectral
    /// norm capped at `ell`; inter-area activation slope at most `g_psi`.
    GwNonlinear { g_psi: f64, ell: f64 },
    /// `L` trained directly with no stability constraint (control runs).
    Unconstrained,
}

impl CouplingMode {
    pub fn validate(&self, net: &MultiAreaNet) -> Result<()> {
        match *self {
            CouplingMode::NegativeFeedback { relax } => {
                if !relax.is_finite() {
                    return Err(Error::InvalidArgument("relax must be finite".into()));
                }
                if let Some((index, &value)) =
                    net.metric().iter().enumerate().find(|(_, &m)| !(m > 0.0))
                {
                    return Err(Error::NonPositiveMetric { index, value });
                }
            }
            CouplingMode::GwNonlinear { g_psi, ell } => {
                if !(ell > 0.0) {
                    return Err(Error::InvalidArgument(format!(
                        "ell must be positive, got {ell}"
                    )));
                }
                if !(g_psi >= 0.0) {
                    return Err(Error::InvalidArgument(format!(
                        "g_psi must be nonnegative, got {g_psi}"
                    )));
                }
                if !is_star(net) {
                    return Err(Error::InvalidArgument(
                        "nonlinear workspace coupling needs a global-workspace adjacency".into(),
                    ));
                }
                if net
                    .subnets
                    .iter()
                    .any(|s| s.metric_diag.iter().any(|&m| m != 1.0))
                {
                    return Err(Error::InvalidArgument(
                        "nonlinear workspace coupling needs identity-metric subnets".into(),
                    ));
                }
            }
            CouplingMode::Unconstrained => {}
        }
        Ok(())
    }
}

fn is_star(net: &MultiAreaNet) -> bool {
    let adj = &net.adjacency;
    let p = adj.p();
    p > 2
        && (0..p).any(|c| {
            adj.pairs().iter().all(|&(i, j)| i == c || j == c) && adj.pair_count() == p - 1
        })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct InterAreaWeights {
    /// Trainable parameter: `B` for negative feedback, `L` itself otherwise.
    pub b: DenseMatrix,
    /// Effective coupling in the dynamics.
    pub l: DenseMatrix,
}

impl InterAreaWeights {
    pub fn zeros(n: usize) -> Self {
        Self {
            b: DenseMatrix::zeros(n, n),
            l: DenseMatrix::zeros(n, n),
        }
    }
}

/// `L = B - M⁻¹BᵀM` for diagonal `M`, entrywise `L_rc = B_rc - (m_c/m_r) B_cr`.
/// `B` must vanish outside the strictly lower-triangular part of `mask`.
pub fn negative_feedback_l(
    b: &DenseMatrix,
    metric: &[f64],
    mask: &BlockMask,
) -> Result<DenseMatrix> {
    b.require_square()?;
    let n = b.rows();
    if metric.len() != n || mask.n() != n {
        return Err(Error::DimensionMismatch {
            context: "negative_feedback_l",
            expected: n,
            got: if metric.len() != n {
                metric.len()
            } else {
                mask.n()
            },
        });
    }
    if let Some((index, &value)) = metric.iter().enumerate().find(|(_, &m)| !(m > 0.0)) {
        return Err(Error::NonPositiveMetric { index, value });
    }
    for r in 0..n {
        for c in 0..n {
            if b[(r, c)] != 0.0 && !(r > c && mask.get(r, c)) {
                return Err(Error::MaskViolation { row: r, col: c });
            }
        }
    }
    Ok(DenseMatrix::from_fn(n, n, |r, c| {
        b[(r, c)] - metric[c] / metric[r] * b[(c, r)]
    }))
}

/// `‖ML + LᵀM‖_max` for diagonal `M`.
pub fn metric_skew_residual(l: &DenseMatrix, metric: &[f64]) -> f64 {
    let n = l.rows();
    let mut worst: f64 = 0.0;
    for r in 0..n {
        for c in 0..n {
            worst = worst.max((metric[r] * l[(r, c)] + l[(c, r)] * metric[c]).abs());
        }
    }
    worst
}

/// Per-block spectral-norm cap `λ_min / (g_ψ √(p-1))`.
pub fn gw_block_bound(lambda_min: f64, g_psi: f64, p: usize) -> Result<f64> {
    if p <= 2 {
        return Err(Error::InvalidArgument(format!(
            "the workspace bound needs p > 2, got {p}"
        )));
    }
    if !(lambda_min > 0.0) {
        return Err(Error::InvalidArgument(format!(
            "lambda_min must be positive, got {lambda_min}"
        )));
    }
    if g_psi == 0.0 {
        return Err(Error::UnboundedSlope);
    }
    if !(g_psi > 0.0) {
        return Err(Error::InvalidArgument(format!(
            "g_psi must be positive, got {g_psi}"
        )));
    }
    Ok(lambda_min / (g_psi * ((p - 1) as f64).sqrt()))
}

/// Rescales every off-diagonal block whose spectral norm exceeds `ell`
/// down to norm `ell`. Blocks already within the cap are copied unchanged.
pub fn project_gw_blocks(l: &DenseMatrix, layout: &NetworkLayout, ell: f64) -> Result<DenseMatrix> {
    if l.rows() != layout.total() || l.cols() != layout.total() {
        return Err(Error::DimensionMismatch {
            context: "project_gw_blocks",
            expected: layout.total(),
            got: l.rows(),
        });
    }
    let mut out = l.clone();
    for i in 0..layout.p() {
        for j in (0..layout.p()).filter(|&j| j != i) {
            let (ri, rj) = (layout.range(i), layout.range(j));
            let block = l.block(ri.start, rj.start, ri.len(), rj.len());
            if block.as_slice().iter().all(|&v| v == 0.0) {
                continue;
            }
            let norm = spectral_norm(&block, NORM_TOL)?;
            if norm > ell {
                out.set_block(ri.start, rj.start, &block.scale(ell / norm));
            }
        }
    }
    Ok(out)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CertificateReport {
    pub max_sym_eig: f64,
    pub pass: bool,
    pub probes: usize,
}

/// Largest eigenvalue of `(MJ + JᵀM)/2` for one pair of slope diagonals.
pub fn metric_sym_max_eig(
    net: &MultiAreaNet,
    metric: &[f64],
    dphi: &[f64],
    dpsi: &[f64],
) -> Result<f64> {
    let j = net.jacobian_with(dphi, dpsi);
    let n = j.rows();
    let sym = DenseMatrix::from_fn(n, n, |r, c| {
        0.5 * (metric[r] * j[(r, c)] + j[(c, r)] * metric[c])
    });
    max_eig_symmetric(&sym, EIG_TOL)
}

/// Numerical contraction certificate.
///
/// Probes `(MJ + JᵀM)/2` at the slope diagonals of `num_states` random
/// states (standard normal per unit), at the four extreme diagonals
/// (`D_φ ∈ {0, g_φ I}`, `D_ψ ∈ {0, g_ψ I}`), at `num_states` random diagonals
/// drawn uniformly from the slope boxes, and, for `N <= 12`, at every shared
/// on/off pattern `D_φ = g_φ c`, `D_ψ = g_ψ c` with `c ∈ {0,1}^N`. The metric
/// is the stacked subnet metric, or the identity for nonlinear workspace
/// coupling. Probes are evaluated in parallel; the reduction is a max.
pub fn verify_contraction_certificate(
    net: &MultiAreaNet,
    num_states: usize,
    seed: u64,
) -> Result<CertificateReport> {
    let n = net.n();
    let metric = net.certificate_metric();
    let psi = net.effective_psi();
    let g_phi = net.phi.slope_bound();
    let g_psi = match net.coupling {
        CouplingMode::GwNonlinear { g_psi, .. } => g_psi,
        _ => psi.slope_bound(),
    };
    let psi_fixed = psi.is_linear();

    let mut probes: Vec<(Vec<f64>, Vec<f64>)> = Vec::new();
    let mut rng = seeds::stream(seed, Stream::Verifier, 0);
    for _ in 0..num_states {
        let x: Vec<f64> = (0..n).map(|_| StandardNormal.sample(&mut rng)).collect();
        probes.push((
            x.iter().map(|&v| net.phi.derivative(v)).collect(),
            x.iter().map(|&v| psi.derivative(v)).collect(),
        ));
    }
    for a in [0.0, g_phi] {
        for b in [0.0, g_psi] {
            if psi_fixed && b != g_psi {
                continue;
            }
            probes.push((vec![a; n], vec![b; n]));
        }
    }
    for _ in 0..num_states {
        let dphi = (0..n).map(|_| g_phi * unit_f64(&mut rng)).collect();
        let dpsi = if psi_fixed {
            vec![1.0; n]
        } else {
            (0..n).map(|_| g_psi * unit_f64(&mut rng)).collect()
        };
        probes.push((dphi, dpsi));
    }
    if n <= BRUTE_FORCE_MAX_UNITS {
        for pattern in 0u32..(1u32 << n) {
            let on = |k: usize| if pattern >> k & 1 == 1 { 1.0 } else { 0.0 };
            let dphi = (0..n).map(|k| g_phi * on(k)).collect();
            let dpsi = if psi_fixed {
                vec![1.0; n]
            } else {
                (0..n).map(|k| g_psi * on(k)).collect()
            };
            probes.push((dphi, dpsi));
        }
    }

    let eigs: Vec<f64> = probes
        .par_iter()
        .map(|(dphi, dpsi)| metric_sym_max_eig(net, &metric, dphi, dpsi))
        .collect::<Result<_>>()?;
    let max_sym_eig = eigs.into_iter().fold(f64::NEG_INFINITY, f64::max);
    Ok(CertificateReport {
        max_sym_eig,
        pass: max_sym_eig <= CERTIFICATE_TOL,
        probes: probes.len(),
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::subnet::{certify_subnet, CertifyConfig, MetricKind};
    use crate::topology::{adjacency_global_workspace, build_block_mask, Adjacency};
    use approx::assert_abs_diff_eq;

    #[test]
    fn identity_metric_gives_skew() {
        let layout = NetworkLayout::uniform(3, 2).unwrap();
        let mask = build_block_mask(&adjacency_global_workspace(3, 0).unwrap(), &layout).unwrap();
        let lower = mask.lower();
        let b = DenseMatrix::from_fn(6, 6, |r, c| {
            if lower.get(r, c) {
                (r * 7 + c) as f64 * 0.1
            } else {
                0.0
            }
        });
        let l = negative_feedback_l(&b, &[1.0; 6], &mask).unwrap();
        assert_eq!(l, b.sub(&b.transpose()).unwrap());
        let zero = negative_feedback_l(&DenseMatrix::zeros(6, 6), &[1.0; 6], &mask).unwrap();
        assert_eq!(zero, DenseMatrix::zeros(6, 6));
    }

    #[test]
    fn hand_computed_two_unit_case() {
        let layout = NetworkLayout::uniform(2, 1).unwrap();
        let mask =
            build_block_mask(&Adjacency::from_pairs(2, &[(0, 1)]).unwrap(), &layout).unwrap();
        let b = DenseMatrix::from_rows(&[&[0.0, 0.0], &[1.0, 0.0]]);
        let m = [1.0, 2.0];
        let l = negative_feedback_l(&b, &m, &mask).unwrap();
        assert_eq!(l, DenseMatrix::from_rows(&[&[0.0, -2.0], &[1.0, 0.0]]));
        assert_eq!(metric_skew_residual(&l, &m), 0.0);
    }

    #[test]
    fn parameterization_errors() {
        let layout = NetworkLayout::uniform(2, 1).unwrap();
        let mask =
            build_block_mask(&Adjacency::from_pairs(2, &[(0, 1)]).unwrap(), &layout).unwrap();
        let upper = DenseMatrix::from_rows(&[&[0.0, 1.0], &[0.0, 0.0]]);
        assert!(matches!(
            negative_feedback_l(&upper, &[1.0, 1.0], &mask),
            Err(Error::MaskViolation { row: 0, col: 1 })
        ));
        let empty_mask = build_block_mask(&Adjacency::empty(2), &layout).unwrap();
        let lower = DenseMatrix::from_rows(&[&[0.0, 0.0], &[1.0, 0.0]]);
        assert!(matches!(
            negative_feedback_l(&lower, &[1.0, 1.0], &empty_mask),
            Err(Error::MaskViolation { .. })
        ));
        assert!(matches!(
            negative_feedback_l(&lower, &[1.0, 0.0], &mask),
            Err(Error::NonPositiveMetric { index: 1, .. })
        ));
    }

    #[test]
    fn block_bound_values() {
        assert!(gw_block_bound(1.0, 1.0, 2).is_err());
        assert_abs_diff_eq!(gw_block_bound(0.5, 1.0, 5).unwrap(), 0.25, epsilon = 1e-15);
        assert_abs_diff_eq!(gw_block_bound(0.9, 2.0, 10).unwrap(), 0.15, epsilon = 1e-15);
        assert!(matches!(
            gw_block_bound(1.0, 0.0, 4),
            Err(Error::UnboundedSlope)
        ));
    }

    #[test]
    fn projection() {
        let layout = NetworkLayout::uniform(3, 2).unwrap();
        assert_eq!(
            project_gw_blocks(&DenseMatrix::zeros(6, 6), &layout, 0.3).unwrap(),
            DenseMatrix::zeros(6, 6)
        );

        let ell = 0.4;
        let mut l = DenseMatrix::zeros(6, 6);
        let blk = DenseMatrix::from_rows(&[&[0.3, -0.5], &[0.2, 0.1]]);
        let norm = spectral_norm(&blk, 1e-12).unwrap();
        l.set_block(2, 0, &blk.scale(2.0 * ell / norm));
        let p = project_gw_blocks(&l, &layout, ell).unwrap();
        let out = p.block(2, 0, 2, 2);
        assert_abs_diff_eq!(spectral_norm(&out, 1e-12).unwrap(), ell, epsilon = 1e-9);
        for (a, b) in out.as_slice().iter().zip(l.block(2, 0, 2, 2).as_slice()) {
            assert_abs_diff_eq!(*a, 0.5 * b, epsilon = 1e-12);
        }

        let small = l.scale(0.4);
        assert_eq!(project_gw_blocks(&small, &layout, ell).unwrap(), small);
    }

    #[test]
    fn relu_psi_dead_units_give_minus_identity() {
        let subnets = (0..3)
            .map(|_| {
                certify_subnet(
                    DenseMatrix::from_rows(&[&[0.0, 0.3], &[0.2, 0.0]]),
                    MetricKind::Identity,
                    &CertifyConfig::default(),
                )
                .unwrap()
            })
            .collect();
        let mut net = MultiAreaNet::new(
            subnets,
            adjacency_global_workspace(3, 0).unwrap(),
            CouplingMode::GwNonlinear {
                g_psi: 1.0,
                ell: 0.1,
            },
            1,
            2,
        )
        .unwrap();
        net.psi = crate::dynamics::Activation::Relu;
        net.init_parameters(3).unwrap();
        assert_eq!(
            net.jacobian(&[-1.0; 6]).unwrap(),
            DenseMatrix::identity(6).scale(-1.0)
        );
        let j = net.jacobian(&[1.0; 6]).unwrap();
        let expect = net
            .intra_weights()
            .add(&net.weights.l)
            .unwrap()
            .sub(&DenseMatrix::identity(6))
            .unwrap();
        assert_eq!(j, expect);
    }

    #[test]
    fn uncoupled_net_certificate_matches_subnet_rates() {
        let cfg = CertifyConfig::default();
        let subnets: Vec<_> = [0.4, 0.7, 0.2]
            .iter()
            .map(|&a| {
                certify_subnet(
                    DenseMatrix::from_rows(&[&[0.0, a], &[0.5 * a, 0.1]]),
                    MetricKind::Diagonal,
                    &cfg,
                )
                .unwrap()
            })
            .collect();
        let bound = subnets
            .iter()
            .map(|s| s.rate * s.metric_diag.iter().cloned().fold(f64::INFINITY, f64::min))
            .fold(f64::INFINITY, f64::min);
        let net = MultiAreaNet::new(
            subnets,
            adjacency_global_workspace(3, 0).unwrap(),
            CouplingMode::NegativeFeedback { relax: 0.0 },
            1,
            2,
        )
        .unwrap();
        let rep = verify_contraction_certificate(&net, 50, 1).unwrap();
        assert!(rep.pass);
        assert!(
            rep.max_sym_eig <= -bound + 1e-9,
            "{} vs {}",
            rep.max_sym_eig,
            -bound
        );
        assert!(rep.probes >= 64);
    }
}
