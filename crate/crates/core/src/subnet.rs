//! Random sparse subnetworks and their contraction certificates.
//!
//! A subnet `dx/dt = -x + W φ(x) + u` with slope-restricted `φ` (`0 <= φ' <= 1`)
//! is contracting whenever `-I + |W|` is Hurwitz. That matrix is Metzler, so
//! Hurwitz stability is equivalent to diagonal stability and the metric can
//! be taken diagonal. The metric is built from the two positive solutions
//! `A r = -1`, `Aᵀ s = -1` as `m_k = s_k / r_k`, then re-verified.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::numerics::{
    max_eig_symmetric, solve_linear, spectral_radius_nonneg, DenseMatrix, PowerIterConfig,
};
use crate::seeds::{rng_from_seed, unit_f64, REJECTION_SEED_STEP};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SubnetSpec {
    pub n: usize,
    pub sparsity: f64,
    pub magnitude: f64,
    pub seed: u64,
}

impl SubnetSpec {
    /// 32 units, 3.3% density, entries on [-6, 6].
    pub fn standard(seed: u64) -> Self {
        Self {
            n: 32,
            sparsity: 0.033,
            magnitude: 6.0,
            seed,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.n == 0 {
            return Err(Error::InvalidArgument(
                "subnet size must be at least 1".into(),
            ));
        }
        if !(0.0..=1.0).contains(&self.sparsity) {
            return Err(Error::InvalidArgument(format!(
                "sparsity must lie in [0, 1], got {}",
                self.sparsity
            )));
        }
        if !(self.magnitude >= 0.0) || !self.magnitude.is_finite() {
            return Err(Error::InvalidArgument(format!(
                "magnitude must be finite and nonnegative, got {}",
                self.magnitude
            )));
        }
        Ok(())
    }

    fn with_seed(self, seed: u64) -> Self {
        Self { seed, ..self }
    }
}

/// Which metric a certified subnet is contracting in.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum MetricKind {
    /// Diagonal metric from the weight-magnitude certificate.
    #[default]
    Diagonal,
    /// Identity metric; required by the nonlinear global-workspace bound.
    Identity,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CertifyConfig {
    /// Required gap between the spectral radius of `|W|` and 1.
    pub margin: f64,
    pub power: PowerIterConfig,
    pub eig_tol: f64,
}

impl Default for CertifyConfig {
    fn default() -> Self {
        Self {
            margin: 1e-6,
            power: PowerIterConfig::default(),
            eig_tol: 1e-12,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CertifiedSubnet {
    pub w: DenseMatrix,
    pub metric_diag: Vec<f64>,
    pub rate: f64,
    pub rho: f64,
    /// Samples drawn before this one was accepted (1 = first try).
    pub attempts: usize,
}

impl CertifiedSubnet {
    pub fn n(&self) -> usize {
        self.w.rows()
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct MagnitudeCertificate {
    pub pass: bool,
    pub rho: f64,
}

/// Draws an `n x n` weight matrix. Entries are visited in row-major order;
/// for each one a uniform `u` decides whether it is nonzero (`u < sparsity`)
/// and, if so, a second uniform `v` gives the value `magnitude * (2v - 1)`.
pub fn sample_subnet(spec: &SubnetSpec) -> DenseMatrix {
    let mut rng = rng_from_seed(spec.seed);
    DenseMatrix::from_fn(spec.n, spec.n, |_, _| {
        if unit_f64(&mut rng) < spec.sparsity {
            spec.magnitude * (2.0 * unit_f64(&mut rng) - 1.0)
        } else {
            0.0
        }
    })
}

pub fn certify_weight_magnitudes(
    w: &DenseMatrix,
    cfg: &CertifyConfig,
) -> Result<MagnitudeCertificate> {
    w.require_square()?;
    let rho = spectral_radius_nonneg(&w.abs(), &cfg.power)?;
    Ok(MagnitudeCertificate {
        pass: rho < 1.0 - cfg.margin,
        rho,
    })
}

/// `-I + |W|`.
pub fn magnitude_system(w: &DenseMatrix) -> DenseMatrix {
    let mut a = w.abs();
    for i in 0..a.rows() {
        a[(i, i)] -= 1.0;
    }
    a
}

/// Contraction rate of `-I + |W|` in the diagonal metric `diag(metric)`:
/// minus the top eigenvalue of the symmetric part of `D A D⁻¹`, `D = diag(√m)`.
pub fn metric_rate(w: &DenseMatrix, metric: &[f64], eig_tol: f64) -> Result<f64> {
    w.require_square()?;
    if metric.len() != w.rows() {
        return Err(Error::DimensionMismatch {
            context: "metric_rate",
            expected: w.rows(),
            got: metric.len(),
        });
    }
    if let Some((index, &value)) = metric.iter().enumerate().find(|(_, &m)| !(m > 0.0)) {
        return Err(Error::NonPositiveMetric { index, value });
    }
    let a = magnitude_system(w);
    let root: Vec<f64> = metric.iter().map(|m| m.sqrt()).collect();
    let n = a.rows();
    let sym = DenseMatrix::from_fn(n, n, |r, c| {
        0.5 * (root[r] * a[(r, c)] / root[c] + root[c] * a[(c, r)] / root[r])
    });
    Ok(-max_eig_symmetric(&sym, eig_tol)?)
}

#[derive(Debug, Clone, PartialEq)]
pub struct DiagonalMetric {
    pub metric_diag: Vec<f64>,
    pub rate: f64,
}

pub fn compute_diagonal_metric(w: &DenseMatrix, cfg: &CertifyConfig) -> Result<DiagonalMetric> {
    let cert = certify_weight_magnitudes(w, cfg)?;
    if !cert.pass {
        return Err(Error::NotCertified { rho: cert.rho });
    }
    let a = magnitude_system(w);
    let n = a.rows();
    let minus_ones = vec![-1.0; n];
    let r = solve_linear(&a, &minus_ones)?;
    let s = solve_linear(&a.transpose(), &minus_ones)?;
    let metric_diag: Vec<f64> = s.iter().zip(&r).map(|(s, r)| s / r).collect();
    if let Some(&bad) = metric_diag.iter().find(|m| !(**m > 0.0) || !m.is_finite()) {
        return Err(Error::MetricVerification { max_eig: bad });
    }
    let rate = metric_rate(w, &metric_diag, cfg.eig_tol)?;
    if !(rate > 0.0) {
        return Err(Error::MetricVerification { max_eig: -rate });
    }
    Ok(DiagonalMetric { metric_diag, rate })
}

/// Certifies `w` in the requested metric, or reports why it cannot be.
pub fn certify_subnet(
    w: DenseMatrix,
    kind: MetricKind,
    cfg: &CertifyConfig,
) -> Result<CertifiedSubnet> {
    match kind {
        MetricKind::Diagonal => {
            let rho = certify_weight_magnitudes(&w, cfg)?.rho;
            let DiagonalMetric { metric_diag, rate } = compute_diagonal_metric(&w, cfg)?;
            Ok(CertifiedSubnet {
                w,
                metric_diag,
                rate,
                rho,
                attempts: 1,
            })
        }
        MetricKind::Identity => {
            let cert = certify_weight_magnitudes(&w, cfg)?;
            if !cert.pass {
                return Err(Error::NotCertified { rho: cert.rho });
            }
            let metric_diag = vec![1.0; w.rows()];
            let rate = metric_rate(&w, &metric_diag, cfg.eig_tol)?;
            if !(rate > cfg.margin) {
                return Err(Error::MetricVerification { max_eig: -rate });
            }
            Ok(CertifiedSubnet {
                w,
                metric_diag,
                rate,
                rho: cert.rho,
                attempts: 1,
            })
        }
    }
}

/// One certified subnet per spec by rejection sampling. A rejected draw
/// retries with `seed + REJECTION_SEED_STEP` (wrapping).
pub fn generate_certified_pool(
    specs: &[SubnetSpec],
    max_attempts_per_subnet: usize,
    kind: MetricKind,
    cfg: &CertifyConfig,
) -> Result<Vec<CertifiedSubnet>> {
    if specs.is_empty() {
        return Err(Error::InvalidArgument("subnet spec list is empty".into()));
    }
    for spec in specs {
        spec.validate()?;
    }
    specs
        .par_iter()
        .enumerate()
        .map(|(spec_index, spec)| {
            let mut seed = spec.seed;
            let mut last_rho = f64::NAN;
            for attempt in 1..=max_attempts_per_subnet {
                let w = sample_subnet(&spec.with_seed(seed));
                match certify_subnet(w, kind, cfg) {
                    Ok(mut subnet) => {
                        subnet.attempts = attempt;
                        return Ok(subnet);
                    }
                    Err(Error::NotCertified { rho }) => last_rho = rho,
                    Err(Error::MetricVerification { .. }) => {}
                    Err(e) => return Err(e),
                }
                seed = seed.wrapping_add(REJECTION_SEED_STEP);
            }
            Err(Error::AttemptsExhausted {
                spec_index,
                attempts: max_attempts_per_subnet,
                last_rho,
            })
        })
        .collect()
}

/// Removes unit `k`: row and column `k` of `W` and entry `k` of the metric.
/// The principal submatrix of a diagonally stable Metzler matrix stays
/// diagonally stable in the same (restricted) metric; the rate is recomputed.
pub fn ablate_unit(
    subnet: &CertifiedSubnet,
    k: usize,
    cfg: &CertifyConfig,
) -> Result<CertifiedSubnet> {
    let n = subnet.n();
    if n <= 1 {
        return Err(Error::InvalidArgument(
            "cannot ablate the only unit of a subnet".into(),
        ));
    }
    if k >= n {
        return Err(Error::IndexOutOfRange { index: k, len: n });
    }
    let w = subnet.w.remove_row_col(k);
    let mut metric_diag = subnet.metric_diag.clone();
    metric_diag.remove(k);
    let rho = spectral_radius_nonneg(&w.abs(), &cfg.power)?;
    let rate = metric_rate(&w, &metric_diag, cfg.eig_tol)?;
    if !(rate > 0.0) {
        return Err(Error::MetricVerification { max_eig: -rate });
    }
    Ok(CertifiedSubnet {
        w,
        metric_diag,
        rate,
        rho,
        attempts: subnet.attempts,
    })
}
