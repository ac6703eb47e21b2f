//! Acceptance suite. Every criterion runs at its stated size and tolerance
//! and prints one PASS/FAIL line; the process fails if any criterion fails.
//!
//! Set `CONTRACTNET_CIFAR_DIR` to a directory with the CIFAR-10 binary
//! batches to run the smoke criterion on real images instead of generated
//! records.

use std::path::Path;
use std::time::Instant;

use nalgebra::DMatrix;
use rand::{Rng as _, SeedableRng};
use rand_distr::{Distribution, StandardNormal};
use rand_xoshiro::Xoshiro256PlusPlus;

use contractnet::analysis::{
    ablate, prune_inter_area_pair, remove_unit, AblationKind, AblationTarget,
};
use contractnet::coupling::{
    gw_block_bound, metric_skew_residual, negative_feedback_l, verify_contraction_certificate,
};
use contractnet::data::{synthetic_task, write_cifar10_binary, SyntheticKind, SyntheticParams};
use contractnet::experiment::{cmd_train, ExperimentConfig, TaskConfig, TrainOptions};
use contractnet::numerics::{
    max_eig_symmetric, spectral_norm, spectral_radius_nonneg, PowerIterConfig,
};
use contractnet::subnet::{
    certify_subnet, certify_weight_magnitudes, generate_certified_pool, sample_subnet,
    CertifyConfig,
};
use contractnet::topology::{
    adjacency_all_to_all, adjacency_global_workspace, adjacency_random, build_block_mask,
    count_trainable_params, Adjacency, NetworkLayout, RandomMode,
};
use contractnet::training::{finite_diff_check, sequence_loss, train};
use contractnet::{CouplingMode, DenseMatrix, Error, MetricKind, MultiAreaNet, SubnetSpec};

type Outcome = std::result::Result<String, String>;
type Criterion = (&'static str, fn() -> Outcome);

fn rng(seed: u64) -> Xoshiro256PlusPlus {
    Xoshiro256PlusPlus::seed_from_u64(seed)
}

fn to_na(m: &DenseMatrix) -> DMatrix<f64> {
    DMatrix::from_row_slice(m.rows(), m.cols(), m.as_slice())
}

fn sym_top_oracle(m: &DenseMatrix) -> f64 {
    to_na(m).symmetric_eigen().eigenvalues.max()
}

/// Subnet sampling distribution used by the randomized criteria.
#[derive(Clone, Copy)]
struct Dist {
    /// Expected nonzeros per row; density is this over `n`, capped at 1.
    per_row: f64,
    magnitude: f64,
}

/// Sparse chains of large weights: metrics spread over many decades.
const SPREAD: Dist = Dist {
    per_row: 2.0,
    magnitude: 1.5,
};
/// Small dense weights: metric spread of a few units and rates near 1/2.
const MILD: Dist = Dist {
    per_row: 3.0,
    magnitude: 0.2,
};

fn random_subnet(
    r: &mut Xoshiro256PlusPlus,
    n: usize,
    kind: MetricKind,
    dist: Dist,
) -> contractnet::CertifiedSubnet {
    let spec = SubnetSpec {
        n,
        sparsity: (dist.per_row / n as f64).min(1.0),
        magnitude: dist.magnitude,
        seed: r.random(),
    };
    generate_certified_pool(&[spec], 10_000, kind, &CertifyConfig::default())
        .expect("certifiable")
        .remove(0)
}

fn random_nf_net(r: &mut Xoshiro256PlusPlus, sizes: &[usize], dist: Dist) -> MultiAreaNet {
    let p = sizes.len();
    let subnets = sizes
        .iter()
        .map(|&n| random_subnet(r, n, MetricKind::Diagonal, dist))
        .collect();
    let adj = match r.random_range(0..3) {
        0 => adjacency_all_to_all(p).unwrap(),
        1 => adjacency_global_workspace(p, r.random_range(0..p)).unwrap(),
        _ => adjacency_random(p, 0.5, r.random(), RandomMode::Bernoulli).unwrap(),
    };
    let mut net = MultiAreaNet::new(
        subnets,
        adj,
        CouplingMode::NegativeFeedback { relax: 0.0 },
        2,
        3,
    )
    .unwrap();
    net.init_parameters(r.random()).unwrap();
    net
}

/// Spectral norm of `L` in the metric, `‖D L D⁻¹‖` with `D = diag(√m)`.
fn metric_norm(net: &MultiAreaNet) -> f64 {
    let m = net.metric();
    let n = net.n();
    let scaled = DenseMatrix::from_fn(n, n, |i, j| (m[i] / m[j]).sqrt() * net.weights.l[(i, j)]);
    spectral_norm(&scaled, 1e-12).unwrap()
}

fn criterion_1() -> Outcome {
    let cases: [(&str, Vec<usize>, Adjacency, usize); 6] = [
        (
            "16x32 GW",
            vec![32; 16],
            adjacency_global_workspace(16, 0).unwrap(),
            22_538,
        ),
        (
            "32x32 GW",
            vec![32; 32],
            adjacency_global_workspace(32, 0).unwrap(),
            46_090,
        ),
        (
            "24x32 all-to-all",
            vec![32; 24],
            adjacency_all_to_all(24).unwrap(),
            293_386,
        ),
        (
            "16x32 all-to-all",
            vec![32; 16],
            adjacency_all_to_all(16).unwrap(),
            130_058,
        ),
        (
            "size-128 GW + 32x32",
            std::iter::once(128)
                .chain(std::iter::repeat_n(32, 32))
                .collect(),
            adjacency_global_workspace(33, 0).unwrap(),
            147_210,
        ),
        // 14pn + 10 + (p - 1)n^2 with p = 24, n = 32.
        (
            "24x32 GW",
            vec![32; 24],
            adjacency_global_workspace(24, 0).unwrap(),
            34_314,
        ),
    ];
    let mut lines = Vec::new();
    for (name, sizes, adj, expected) in cases {
        let layout = NetworkLayout::new(sizes).unwrap();
        let got = count_trainable_params(&layout, &adj, 3, 10).map_err(|e| e.to_string())?;
        if got != expected {
            return Err(format!("{name}: {got} != {expected}"));
        }
        lines.push(format!("{name}={got}"));
    }
    Ok(lines.join(", "))
}

fn criterion_2() -> Outcome {
    let cfg = CertifyConfig::default();
    let mut passed = 0;
    let mut worst: f64 = f64::NEG_INFINITY;
    let mut min_rate = f64::INFINITY;
    let mut seed = 0u64;
    while passed < 1000 {
        seed += 1;
        let w = sample_subnet(&SubnetSpec::standard(seed));
        if !certify_weight_magnitudes(&w, &cfg)
            .map_err(|e| e.to_string())?
            .pass
        {
            continue;
        }
        let s = certify_subnet(w, MetricKind::Diagonal, &cfg)
            .map_err(|e| format!("seed {seed}: {e}"))?;
        let a = DenseMatrix::from_fn(32, 32, |r, c| {
            s.w[(r, c)].abs() - if r == c { 1.0 } else { 0.0 }
        });
        let m = &s.metric_diag;
        let sym = DenseMatrix::from_fn(32, 32, |r, c| 0.5 * (m[r] * a[(r, c)] + a[(c, r)] * m[c]));
        let ours = max_eig_symmetric(&sym, 1e-12).map_err(|e| e.to_string())?;
        let oracle = sym_top_oracle(&sym);
        // Sparse chains of large weights spread the metric over many orders
        // of magnitude, so agreement is measured against the matrix scale.
        let scale = to_na(&sym).norm().max(1.0);
        let root: Vec<f64> = m.iter().map(|x| x.sqrt()).collect();
        let scaled = DenseMatrix::from_fn(32, 32, |r, c| sym[(r, c)] / (root[r] * root[c]));
        let rate_oracle = -sym_top_oracle(&scaled);
        if !(ours < 0.0)
            || !(oracle < 0.0)
            || (ours - oracle).abs() > 1e-9 * scale
            || !(s.rate > 0.0)
            || (s.rate - rate_oracle).abs() > 1e-9 * to_na(&scaled).norm().max(1.0)
        {
            return Err(format!(
                "seed {seed}: max eig {ours:e} (oracle {oracle:e}, scale {scale:e}), rate {} (oracle {rate_oracle})",
                s.rate
            ));
        }
        worst = worst.max(oracle);
        min_rate = min_rate.min(s.rate);
        passed += 1;
    }
    Ok(format!("1000 certified of {seed} drawn; largest eigenvalue {worst:.3e}, smallest rate {min_rate:.3e}"))
}

fn criterion_3() -> Outcome {
    let mut r = rng(3);
    let mut worst: f64 = 0.0;
    for _ in 0..1000 {
        let p = r.random_range(3..7);
        let sizes: Vec<usize> = (0..p).map(|_| r.random_range(1..6)).collect();
        let layout = NetworkLayout::new(sizes).unwrap();
        let adj = adjacency_random(p, 0.6, r.random(), RandomMode::Bernoulli).unwrap();
        let mask = build_block_mask(&adj, &layout).unwrap();
        let lower = mask.lower();
        let n = layout.total();
        let b = DenseMatrix::from_fn(n, n, |i, j| {
            if lower.get(i, j) {
                Distribution::<f64>::sample(&StandardNormal, &mut r)
            } else {
                0.0
            }
        });
        let m: Vec<f64> = (0..n)
            .map(|_| 10f64.powf(r.random_range(-2.0..2.0)))
            .collect();
        let l = negative_feedback_l(&b, &m, &mask).map_err(|e| e.to_string())?;
        worst = worst.max(metric_skew_residual(&l, &m));
    }
    if worst < 1e-10 {
        Ok(format!("max residual {worst:.3e} over 1000 draws"))
    } else {
        Err(format!("max residual {worst:.3e}"))
    }
}

fn criterion_4() -> Outcome {
    let mut r = rng(4);
    let mut worst_ratio: f64 = f64::NEG_INFINITY;
    let mut worst_rise: f64 = 0.0;
    let mut max_l: f64 = 0.0;
    for k in 0..100 {
        let p = r.random_range(3..=8);
        let sizes: Vec<usize> = (0..p).map(|_| r.random_range(4..=16)).collect();
        let net = random_nf_net(&mut r, &sizes, MILD);
        max_l = max_l.max(metric_norm(&net));
        let n = net.n();
        let seq: Vec<f64> = (0..500 * 2).map(|_| r.random_range(-1.0..1.0)).collect();
        let xa: Vec<f64> = (0..n)
            .map(|_| 2.0 * Distribution::<f64>::sample(&StandardNormal, &mut r))
            .collect();
        let xb: Vec<f64> = (0..n)
            .map(|_| 2.0 * Distribution::<f64>::sample(&StandardNormal, &mut r))
            .collect();
        let rep = net
            .two_trajectory_convergence(&xa, &xb, &seq)
            .map_err(|e| e.to_string())?;
        let d0 = rep.distances[0];
        for w in rep.distances.windows(2) {
            let rise = w[1] - w[0];
            worst_rise = worst_rise.max(rise / d0);
            if rise > 1e-12 * d0 {
                return Err(format!("net {k}: distance rose by {:.3e} d0", rise / d0));
            }
        }
        let lambda = net
            .subnets
            .iter()
            .map(|s| s.rate)
            .fold(f64::INFINITY, f64::min);
        if !(rep.fitted_rate <= -0.5 * lambda) {
            return Err(format!(
                "net {k}: fitted rate {} > -0.5 * {lambda}",
                rep.fitted_rate
            ));
        }
        worst_ratio = worst_ratio.max(rep.fitted_rate / lambda);
    }
    Ok(format!(
        "100 nets monotone (max relative rise {worst_rise:.1e}, max metric norm of L {max_l:.2}); fitted rate / min rate <= {worst_ratio:.3}"
    ))
}

fn gw_net(r: &mut Xoshiro256PlusPlus, sizes: &[usize]) -> (MultiAreaNet, f64) {
    let p = sizes.len();
    let subnets: Vec<_> = sizes
        .iter()
        .map(|&n| random_subnet(r, n, MetricKind::Identity, MILD))
        .collect();
    let lambda = subnets.iter().map(|s| s.rate).fold(f64::INFINITY, f64::min);
    let ell = gw_block_bound(lambda, 1.0, p).unwrap();
    let mut net = MultiAreaNet::new(
        subnets,
        adjacency_global_workspace(p, r.random_range(0..p)).unwrap(),
        CouplingMode::GwNonlinear { g_psi: 1.0, ell },
        2,
        3,
    )
    .unwrap();
    net.init_parameters(r.random()).unwrap();
    (net, ell)
}

/// Top eigenvector of the symmetric part of `-I + W_i`.
fn top_direction(w: &DenseMatrix) -> Vec<f64> {
    let n = w.rows();
    let a = to_na(w);
    let sym = (&a + a.transpose()) * 0.5 - DMatrix::identity(n, n);
    let e = sym.symmetric_eigen();
    e.eigenvectors
        .column(e.eigenvalues.imax())
        .iter()
        .copied()
        .collect()
}

/// Sets every workspace block to spectral norm `norm`. Random blocks keep
/// their initialized direction; aligned blocks are the symmetric rank-one
/// pair `u_to v_fromᵀ` along each area's least stable direction, the worst
/// case for the symmetric part of the Jacobian.
fn set_blocks(net: &MultiAreaNet, norm: f64, aligned: bool) -> MultiAreaNet {
    let mut out = net.clone();
    let dirs: Vec<Vec<f64>> = net.subnets.iter().map(|s| top_direction(&s.w)).collect();
    for blk in net.coupling_blocks() {
        let (rows, cols) = (blk.rows.len(), blk.cols.len());
        let b = if aligned {
            let (u, v) = (&dirs[blk.to], &dirs[blk.from]);
            DenseMatrix::from_fn(rows, cols, |i, j| norm * u[i] * v[j])
        } else {
            let b = net
                .weights
                .l
                .block(blk.rows.start, blk.cols.start, rows, cols);
            let current = spectral_norm(&b, 1e-12).unwrap();
            b.scale(norm / current)
        };
        out.weights.l.set_block(blk.rows.start, blk.cols.start, &b);
    }
    out.weights.b = out.weights.l.clone();
    out
}

fn criterion_5() -> Outcome {
    let mut r = rng(5);
    let mut worst_ok = f64::NEG_INFINITY;
    let mut least_fail = f64::INFINITY;
    let mut exhaustive = 0;
    for k in 0..100u64 {
        // Half the nets are small enough for the exhaustive pattern check.
        let sizes: Vec<usize> = if k % 2 == 0 {
            let p = r.random_range(3..=4);
            (0..p).map(|_| r.random_range(2..=3)).collect()
        } else {
            let p = r.random_range(3..=6);
            (0..p).map(|_| r.random_range(4..=10)).collect()
        };
        let (net, ell) = gw_net(&mut r, &sizes);
        if net.n() <= 12 {
            exhaustive += 1;
        }
        for aligned in [false, true] {
            let at_bound = set_blocks(&net, ell, aligned);
            let rep =
                verify_contraction_certificate(&at_bound, 200, k).map_err(|e| e.to_string())?;
            if !rep.pass {
                return Err(format!(
                    "net {k} at the bound (aligned {aligned}): max eig {:e}",
                    rep.max_sym_eig
                ));
            }
            worst_ok = worst_ok.max(rep.max_sym_eig);
        }
        let big = set_blocks(&net, 10.0 * ell, true);
        let rep = verify_contraction_certificate(&big, 200, k).map_err(|e| e.to_string())?;
        if rep.pass {
            return Err(format!(
                "net {k} at 10x the bound still certified (max eig {:e})",
                rep.max_sym_eig
            ));
        }
        least_fail = least_fail.min(rep.max_sym_eig);
    }
    Ok(format!(
        "100 nets ({exhaustive} with exhaustive patterns) pass at the bound with random and aligned blocks (max eig <= {worst_ok:.3e}); all fail at 10x (max eig >= {least_fail:.3e})"
    ))
}

fn criterion_6() -> Outcome {
    let mut r = rng(6);
    let mut out = Vec::new();
    for (name, kind) in [
        ("negative_feedback", MetricKind::Diagonal),
        ("gw_nonlinear", MetricKind::Identity),
    ] {
        let subnets: Vec<_> = (0..3)
            .map(|_| random_subnet(&mut r, 4, kind, SPREAD))
            .collect();
        let lambda = subnets.iter().map(|s| s.rate).fold(f64::INFINITY, f64::min);
        let mode = match kind {
            MetricKind::Diagonal => CouplingMode::NegativeFeedback { relax: 0.0 },
            MetricKind::Identity => CouplingMode::GwNonlinear {
                g_psi: 1.0,
                ell: gw_block_bound(lambda, 1.0, 3).unwrap(),
            },
        };
        let mut net = MultiAreaNet::new(
            subnets,
            adjacency_global_workspace(3, 0).unwrap(),
            mode,
            2,
            3,
        )
        .unwrap();
        net.init_parameters(r.random()).unwrap();
        let seq: Vec<f64> = (0..10 * 2).map(|_| r.random_range(-1.0..1.0)).collect();
        let err = finite_diff_check(&net, &seq, 2, 1e-5).map_err(|e| e.to_string())?;
        if !(err < 1e-4) {
            return Err(format!("{name}: max relative error {err:e}"));
        }
        out.push(format!("{name} {err:.2e}"));
    }
    Ok(format!("max relative error: {}", out.join(", ")))
}

fn criterion_7() -> Outcome {
    let mut r = rng(7);
    let cfg = CertifyConfig::default();
    let mut ops = [0usize; 3];
    let mut worst = f64::NEG_INFINITY;
    for k in 0..100 {
        let p = r.random_range(3..=5);
        let sizes: Vec<usize> = (0..p).map(|_| r.random_range(2..=4)).collect();
        let mut net = random_nf_net(&mut r, &sizes, SPREAD);
        for step in 0..r.random_range(1..=6) {
            match r.random_range(0..3) {
                0 => {
                    let candidates: Vec<usize> = (0..net.p())
                        .filter(|&i| net.layout.sizes()[i] > 1)
                        .collect();
                    if candidates.is_empty() {
                        continue;
                    }
                    let i = candidates[r.random_range(0..candidates.len())];
                    let unit = r.random_range(0..net.layout.sizes()[i]);
                    net = remove_unit(&net, i, unit, &cfg)
                        .map_err(|e| format!("net {k} step {step}: {e}"))?;
                    ops[0] += 1;
                }
                1 => {
                    let pairs: Vec<(usize, usize)> = net.adjacency.pairs();
                    if pairs.is_empty() {
                        continue;
                    }
                    let (i, j) = pairs[r.random_range(0..pairs.len())];
                    let a = net.layout.range(i).start + r.random_range(0..net.layout.sizes()[i]);
                    let b = net.layout.range(j).start + r.random_range(0..net.layout.sizes()[j]);
                    net = prune_inter_area_pair(&net, a, b)
                        .map_err(|e| format!("net {k} step {step}: {e}"))?;
                    ops[1] += 1;
                }
                _ => {
                    let kind = AblationKind::ALL[r.random_range(0..5)];
                    let i = r.random_range(0..net.p());
                    net = ablate(&net, &AblationTarget::new(kind, [i]))
                        .map_err(|e| format!("net {k} step {step}: {e}"))?;
                    ops[2] += 1;
                }
            }
            let rep = verify_contraction_certificate(&net, 50, k).map_err(|e| e.to_string())?;
            if !rep.pass {
                return Err(format!(
                    "net {k} step {step}: max eig {:e}",
                    rep.max_sym_eig
                ));
            }
            worst = worst.max(rep.max_sym_eig);
        }
    }
    Ok(format!(
        "{} unit removals, {} pair prunes, {} subnet ablations; max eig {worst:.3e}",
        ops[0], ops[1], ops[2]
    ))
}

fn configs_dir() -> std::path::PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("../../configs")
}

fn load_config(name: &str) -> std::result::Result<ExperimentConfig, String> {
    let text =
        std::fs::read_to_string(configs_dir().join(name)).map_err(|e| format!("{name}: {e}"))?;
    ExperimentConfig::parse(&text).map_err(|e| format!("{name}: {e}"))
}

fn criterion_8() -> Outcome {
    let cfg = load_config("desk_delayed_class_8x16_gw.toml")?;
    let (train_set, test_set) = cfg.load_task().map_err(|e| e.to_string())?;
    if (
        train_set.len(),
        test_set.len(),
        train_set.seq_len,
        train_set.classes,
        cfg.train.epochs,
    ) != (2000, 500, 50, 4, 20)
    {
        return Err("desk config does not describe the 2000/500, T=50, C=4, 20-epoch task".into());
    }
    let mut net = cfg.build_network().map_err(|e| e.to_string())?;
    if (net.p(), net.n()) != (8, 128) {
        return Err(format!(
            "desk net has {} areas and {} units",
            net.p(),
            net.n()
        ));
    }
    let hist = train(&mut net, &train_set, &test_set, &cfg.train).map_err(|e| e.to_string())?;
    let acc = hist.final_test_acc().unwrap_or(0.0);
    let cert = verify_contraction_certificate(&net, 20, 8).map_err(|e| e.to_string())?;
    if !(acc >= 0.75) || !cert.pass {
        return Err(format!(
            "stable net test accuracy {acc:.3}, certificate pass {}",
            cert.pass
        ));
    }

    let control_cfg = load_config("desk_delayed_class_8x16_unconstrained.toml")?;
    let mut control = control_cfg.build_network().map_err(|e| e.to_string())?;
    if control.subnets != net.subnets || !matches!(control.coupling, CouplingMode::Unconstrained) {
        return Err("control must share the stable net's subnets and free its coupling".into());
    }
    // The same untrained control on 1024-step sequences, the horizon where
    // unconstrained coupling was reported to blow up.
    let long = synthetic_task(
        SyntheticKind::DelayedClass,
        &SyntheticParams {
            size: 4,
            classes: 4,
            seq_len: 1024,
            ..Default::default()
        },
        83,
    )
    .map_err(|e| e.to_string())?;
    let long_loss = (0..long.len())
        .map(|i| sequence_loss(&control, long.sequence(i), long.labels[i]).unwrap_or(f64::INFINITY))
        .fold(0.0, f64::max);
    let control_result = match train(&mut control, &train_set, &test_set, &control_cfg.train) {
        Err(Error::Divergence { epoch, reason, .. }) => {
            Ok(format!("control diverged at epoch {epoch} ({reason})"))
        }
        Err(e) => Err(e.to_string()),
        Ok(h) => {
            let max_loss = h.epochs.iter().map(|e| e.train_loss).fold(0.0, f64::max);
            let cacc = h.final_test_acc().unwrap_or(0.0);
            // 3 sigma above chance for 500 balanced samples of 4 classes.
            let chance_band = 0.25 + 3.0 * (0.25f64 * 0.75 / 500.0).sqrt();
            if max_loss > 1e6 {
                Ok(format!("control loss reached {max_loss:.3e}"))
            } else if cacc <= chance_band {
                Ok(format!("control stayed at chance ({cacc:.3})"))
            } else {
                Err(format!(
                    "control learned: accuracy {cacc:.3}, max loss {max_loss:.3}"
                ))
            }
        }
    };
    match control_result {
        Ok(c) => Ok(format!("stable net test accuracy {acc:.3} (certificate intact); {c}")),
        Err(c) => Err(format!(
            "stable net test accuracy {acc:.3} (certificate intact), but {c}; at T=1024 the untrained control's loss is {long_loss:.2e}"
        )),
    }
}

fn criterion_9() -> Outcome {
    let mut checked = Vec::new();
    for name in ["seqcifar10_24x32_random50.toml", "seqcifar10_24x32_gw.toml"] {
        let cfg = load_config(name)?;
        if cfg.train.epochs != 250 || cfg.train.batch_size != 128 || cfg.train.lr != 0.002 {
            return Err(format!("{name}: not the headline training regime"));
        }
        checked.push(name);
    }

    let tmp = tempfile::tempdir().map_err(|e| e.to_string())?;
    let data_dir = match std::env::var_os("CONTRACTNET_CIFAR_DIR") {
        Some(d) => std::path::PathBuf::from(d),
        None => {
            let dir = tmp.path().join("cifar");
            std::fs::create_dir_all(&dir).map_err(|e| e.to_string())?;
            let mut r = rng(9);
            let labels: Vec<u8> = (0..1000).map(|k| (k % 10) as u8).collect();
            let pixels: Vec<u8> = (0..1000 * 3072).map(|_| r.random()).collect();
            write_cifar10_binary(&dir.join("data_batch_1.bin"), &labels, &pixels)
                .map_err(|e| e.to_string())?;
            for k in 2..=5 {
                write_cifar10_binary(&dir.join(format!("data_batch_{k}.bin")), &[], &[])
                    .map_err(|e| e.to_string())?;
            }
            write_cifar10_binary(
                &dir.join("test_batch.bin"),
                &labels[..100],
                &pixels[..100 * 3072],
            )
            .map_err(|e| e.to_string())?;
            dir
        }
    };

    let mut cfg = load_config("seqcifar10_24x32_gw.toml")?;
    if let TaskConfig::Cifar10 {
        dir,
        train_limit,
        test_limit,
        ..
    } = &mut cfg.task
    {
        *dir = data_dir;
        *train_limit = Some(1000);
        *test_limit = Some(100);
    }
    cfg.train.epochs = 2;
    cfg.train.lr_cut_epochs = vec![];
    let out = tmp.path().join("run");
    let init = cfg.build_network().map_err(|e| e.to_string())?;
    let init_norm = metric_norm(&init);
    // Explicit Euler multiplies an M-skew mode of size s by sqrt((1-h)^2 + (h s)^2) per step.
    let h = init.dt / init.tau;
    let growth = ((1.0 - h).powi(2) + (h * init_norm).powi(2)).sqrt();
    let start = Instant::now();
    let outcome = cmd_train(&cfg, &out, &TrainOptions::default()).map_err(|e| {
        format!("{e}; coupling norm in the metric at init {init_norm:.3e}, worst Euler growth per step {growth:.3e}")
    })?;
    let secs = start.elapsed().as_secs_f64();
    let losses: Vec<f64> = outcome
        .history
        .epochs
        .iter()
        .map(|e| e.train_loss)
        .collect();
    if losses.len() != 2 || losses.iter().any(|l| !l.is_finite()) {
        return Err(format!("losses {losses:?}"));
    }
    let ck = contractnet::experiment::Checkpoint::load(&outcome.checkpoint)
        .map_err(|e| e.to_string())?;
    let net = &ck.net;
    let skew = metric_skew_residual(&net.weights.l, &net.metric());
    let cert = verify_contraction_certificate(net, 8, 9).map_err(|e| e.to_string())?;
    if skew >= 1e-10 || !cert.pass {
        return Err(format!(
            "certificate broken: skew residual {skew:e}, max eig {:e}",
            cert.max_sym_eig
        ));
    }
    Ok(format!(
        "configs {} parse; 2-epoch smoke on 1000 sequences of length 1024: losses {:.4}, {:.4}; skew residual {skew:.1e}, max eig {:.3e} ({secs:.0}s)",
        checked.join(", "),
        losses[0],
        losses[1],
        cert.max_sym_eig
    ))
}

fn criterion_10() -> Outcome {
    let mut r = rng(10);
    let cfg = PowerIterConfig::default();
    let mut worst = [0.0f64; 3];
    for k in 0..500 {
        let n = r.random_range(1..=12);
        let density = r.random_range(0.2..1.0);
        let a = DenseMatrix::from_fn(n, n, |_, _| {
            if r.random::<f64>() < density {
                r.random_range(0.0..2.0)
            } else {
                0.0
            }
        });
        let rho = spectral_radius_nonneg(&a, &cfg).map_err(|e| format!("matrix {k}: {e}"))?;
        let oracle = to_na(&a)
            .complex_eigenvalues()
            .iter()
            .map(|z| z.norm())
            .fold(0.0, f64::max);
        worst[0] = worst[0].max((rho - oracle).abs() / oracle.max(1.0));

        let g = DenseMatrix::from_fn(n, n, |_, _| {
            Distribution::<f64>::sample(&StandardNormal, &mut r)
        });
        let s = g.sym_part().unwrap();
        let top = max_eig_symmetric(&s, 1e-12).map_err(|e| e.to_string())?;
        worst[1] = worst[1].max((top - sym_top_oracle(&s)).abs());

        let m = r.random_range(1..=12);
        let rect = DenseMatrix::from_fn(n, m, |_, _| {
            Distribution::<f64>::sample(&StandardNormal, &mut r)
        });
        let norm = spectral_norm(&rect, 1e-12).map_err(|e| e.to_string())?;
        let svd = to_na(&rect).singular_values().max();
        worst[2] = worst[2].max((norm - svd).abs());
    }
    if worst.iter().all(|&w| w < 1e-6) {
        Ok(format!(
            "max deviation: spectral radius {:.1e}, symmetric top eigenvalue {:.1e}, spectral norm {:.1e}",
            worst[0], worst[1], worst[2]
        ))
    } else {
        Err(format!("deviations {worst:?}"))
    }
}

fn main() {
    let filter: Vec<String> = std::env::args()
        .skip(1)
        .filter(|a| !a.starts_with('-'))
        .collect();
    let criteria: [Criterion; 10] = [
        ("parameter counts", criterion_1),
        ("certification soundness", criterion_2),
        ("skew in metric", criterion_3),
        ("empirical contraction", criterion_4),
        ("workspace bound", criterion_5),
        ("gradient correctness", criterion_6),
        ("ablation preserves stability", criterion_7),
        ("desk-scale learning", criterion_8),
        ("headline configs and smoke run", criterion_9),
        ("numerics against dense oracle", criterion_10),
    ];
    let mut failed = 0;
    for (k, (name, f)) in criteria.iter().enumerate() {
        let id = k + 1;
        if !filter.is_empty() && !filter.contains(&id.to_string()) {
            continue;
        }
        let start = Instant::now();
        let result = std::panic::catch_unwind(f).unwrap_or_else(|e| {
            Err(e
                .downcast_ref::<String>()
                .cloned()
                .or_else(|| e.downcast_ref::<&str>().map(|s| s.to_string()))
                .unwrap_or_else(|| "panicked".into()))
        });
        let secs = start.elapsed().as_secs_f64();
        match result {
            Ok(detail) => println!("criterion {id:>2} PASS [{secs:7.1}s] {name}: {detail}"),
            Err(detail) => {
                failed += 1;
                println!("criterion {id:>2} FAIL [{secs:7.1}s] {name}: {detail}");
            }
        }
    }
    if failed > 0 {
        println!("{failed} acceptance criteria failed");
        std::process::exit(1);
    }
}
