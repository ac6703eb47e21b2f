use std::collections::BTreeMap;
use std::fs;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use serde_json::{json, Value};

use super::{Checkpoint, ExperimentConfig};
use crate::analysis::{
    ablation_sweep_with, evaluate, single_subnet_targets, AblationKind, AblationOptions,
    AblationReport, AblationTarget, EvalReport,
};
use crate::coupling::{verify_contraction_certificate, CertificateReport};
use crate::error::{Error, Result};
use crate::seeds::{derive_seed, Stream};
use crate::topology::count_trainable_params;
use crate::training::{write_history_csv, TrainHistory, Trainer};

pub const EXIT_OK: i32 = 0;
pub const EXIT_CONFIG: i32 = 1;
pub const EXIT_CERTIFICATION: i32 = 2;
pub const EXIT_DIVERGENCE: i32 = 3;

/// Process exit status for an error.
pub fn exit_code(err: &Error) -> i32 {
    match err {
        Error::NotCertified { .. }
        | Error::AttemptsExhausted { .. }
        | Error::MetricVerification { .. } => EXIT_CERTIFICATION,
        Error::Divergence { .. } | Error::StateOverflow { .. } => EXIT_DIVERGENCE,
        _ => EXIT_CONFIG,
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SeedReport {
    pub master: u64,
    pub subnets: Vec<u64>,
    pub adjacency: u64,
    pub b_init: u64,
    pub layers: u64,
    pub verifier: u64,
    pub data_train: u64,
    pub data_test: u64,
    /// Epoch `e` shuffles with `derive_seed(master, shuffle, e)`.
    pub shuffle_epoch0: u64,
}

impl SeedReport {
    fn new(cfg: &ExperimentConfig) -> Result<Self> {
        let m = cfg.seed;
        Ok(Self {
            master: m,
            subnets: cfg.subnet_specs()?.iter().map(|s| s.seed).collect(),
            adjacency: cfg.adjacency_seed(),
            b_init: derive_seed(m, Stream::BInit, 0),
            layers: derive_seed(m, Stream::Layers, 0),
            verifier: derive_seed(m, Stream::Verifier, 0),
            data_train: derive_seed(m, Stream::Data, 0),
            data_test: derive_seed(m, Stream::Data, 1),
            shuffle_epoch0: derive_seed(m, Stream::Shuffle, 0),
        })
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SubnetSummary {
    pub index: usize,
    pub n: usize,
    pub rho: f64,
    pub rate: f64,
    pub attempts: usize,
    pub metric_min: f64,
    pub metric_max: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CertifyReport {
    pub pass: bool,
    pub error: Option<String>,
    pub subnets: Vec<SubnetSummary>,
    pub param_count: Option<usize>,
    pub verifier: Option<CertificateReport>,
    pub config_hash: String,
    pub seeds: SeedReport,
}

fn write_json<T: Serialize>(path: &Path, value: &T) -> Result<()> {
    fs::write(path, serde_json::to_string_pretty(value)?)?;
    Ok(())
}

fn ensure_dir(dir: &Path) -> Result<()> {
    fs::create_dir_all(dir)?;
    Ok(())
}

/// Certifies every subnet, builds the network and runs the Jacobian
/// certificate. Writes `certificate.json`; `pass` is false when a subnet
/// cannot be certified or the assembled network fails the check.
pub fn cmd_certify(cfg: &ExperimentConfig, out: &Path) -> Result<CertifyReport> {
    ensure_dir(out)?;
    let mut report = CertifyReport {
        pass: false,
        error: None,
        subnets: vec![],
        param_count: None,
        verifier: None,
        config_hash: cfg.hash(),
        seeds: SeedReport::new(cfg)?,
    };
    let subnets = match cfg.build_subnets() {
        Ok(s) => s,
        Err(
            e @ (Error::AttemptsExhausted { .. }
            | Error::NotCertified { .. }
            | Error::MetricVerification { .. }),
        ) => {
            report.error = Some(e.to_string());
            write_json(&out.join("certificate.json"), &report)?;
            return Ok(report);
        }
        Err(e) => return Err(e),
    };
    report.subnets = subnets
        .iter()
        .enumerate()
        .map(|(index, s)| SubnetSummary {
            index,
            n: s.n(),
            rho: s.rho,
            rate: s.rate,
            attempts: s.attempts,
            metric_min: s.metric_diag.iter().cloned().fold(f64::INFINITY, f64::min),
            metric_max: s
                .metric_diag
                .iter()
                .cloned()
                .fold(f64::NEG_INFINITY, f64::max),
        })
        .collect();
    let net = cfg.build_network_from(subnets)?;
    let (input_dim, classes) = cfg.task.dims();
    report.param_count = Some(count_trainable_params(
        &net.layout,
        &net.adjacency,
        input_dim,
        classes,
    )?);
    let verifier = verify_contraction_certificate(&net, cfg.certify.verifier_states, cfg.seed)?;
    report.pass = verifier.pass;
    report.verifier = Some(verifier);
    write_json(&out.join("certificate.json"), &report)?;
    Ok(report)
}

#[derive(Debug, Clone, Default)]
pub struct TrainOptions {
    pub resume: bool,
    /// Defaults to `checkpoint.bin` in the output directory.
    pub checkpoint: Option<PathBuf>,
    /// Stop after this many epochs in this invocation (the checkpoint allows resuming).
    pub max_epochs: Option<usize>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct TrainOutcome {
    pub history: TrainHistory,
    pub checkpoint: PathBuf,
    pub finished: bool,
}

/// Trains from scratch or resumes from a checkpoint. The checkpoint and
/// `history.csv` are rewritten after every epoch; on divergence the history
/// so far is still written before the error is returned.
pub fn cmd_train(cfg: &ExperimentConfig, out: &Path, opts: &TrainOptions) -> Result<TrainOutcome> {
    ensure_dir(out)?;
    fs::write(out.join("config.toml"), cfg.to_toml())?;
    let ckpt_path = opts
        .checkpoint
        .clone()
        .unwrap_or_else(|| out.join("checkpoint.bin"));
    let hash = cfg.hash();

    let (mut net, mut trainer) = if opts.resume {
        let ck = Checkpoint::load(&ckpt_path)?;
        if ck.config_hash != hash {
            return Err(Error::Config(format!(
                "checkpoint {} was written for a different config ({} vs {hash})",
                ckpt_path.display(),
                ck.config_hash
            )));
        }
        let trainer = ck
            .trainer
            .ok_or_else(|| Error::Checkpoint("checkpoint holds no training state".into()))?;
        log::info!("resuming at epoch {}", trainer.epoch);
        (ck.net, trainer)
    } else {
        let net = cfg.build_network()?;
        let trainer = Trainer::new(cfg.train.clone(), &net)?;
        (net, trainer)
    };
    let (train_set, test_set) = cfg.load_task()?;

    let save = |trainer: &Trainer, net: &crate::dynamics::MultiAreaNet| -> Result<()> {
        Checkpoint {
            config_hash: hash.clone(),
            net: net.clone(),
            trainer: Some(trainer.clone()),
        }
        .save(&ckpt_path)?;
        write_history_csv(fs::File::create(out.join("history.csv"))?, &trainer.history)
    };
    save(&trainer, &net)?;

    let stop_at = opts.max_epochs.map_or(usize::MAX, |k| trainer.epoch + k);
    let mut result = Ok(());
    while !trainer.is_done() && trainer.epoch < stop_at {
        if let Err(e) = trainer
            .run_epoch(&mut net, &train_set, &test_set)
            .and_then(|_| save(&trainer, &net))
        {
            result = Err(e);
            break;
        }
    }
    let summary = json!({
        "config_hash": hash,
        "epochs_run": trainer.history.len(),
        "final_train_loss": trainer.history.epochs.last().map(|e| e.train_loss),
        "final_test_acc": trainer.history.final_test_acc(),
        "param_count": count_trainable_params(&net.layout, &net.adjacency, net.input_dim(), net.classes())?,
        "diverged": result.as_ref().err().map(|e| e.to_string()),
        "seeds": SeedReport::new(cfg)?,
    });
    write_json(&out.join("train_summary.json"), &summary)?;
    if let Err(e) = result {
        if let Error::Divergence { history, .. } = &e {
            write_history_csv(fs::File::create(out.join("history.csv"))?, history)?;
        }
        return Err(e);
    }
    Ok(TrainOutcome {
        finished: trainer.is_done(),
        history: trainer.history,
        checkpoint: ckpt_path,
    })
}

/// Evaluates a checkpoint on the config's test set and writes `eval.json`.
pub fn cmd_eval(cfg: &ExperimentConfig, checkpoint: &Path, out: &Path) -> Result<EvalReport> {
    ensure_dir(out)?;
    let ck = Checkpoint::load(checkpoint)?;
    let (_, test) = cfg.load_task()?;
    let report = evaluate(&ck.net, &test)?;
    write_json(&out.join("eval.json"), &report)?;
    Ok(report)
}

/// Sweeps the configured ablations over every subnet (plus any configured
/// groups as total ablations) and writes `ablation.csv` and `ablation.json`.
pub fn cmd_ablate(cfg: &ExperimentConfig, checkpoint: &Path, out: &Path) -> Result<AblationReport> {
    ensure_dir(out)?;
    let ck = Checkpoint::load(checkpoint)?;
    let (_, test) = cfg.load_task()?;
    let mut targets = single_subnet_targets(ck.net.p(), &cfg.ablation.kinds);
    targets.extend(
        cfg.ablation
            .groups
            .iter()
            .map(|g| AblationTarget::new(AblationKind::Total, g.iter().copied())),
    );
    let opts = AblationOptions {
        output_only_zeroes_output_bias: cfg.ablation.output_only_zeroes_output_bias,
    };
    let report = ablation_sweep_with(&ck.net, &test, &targets, opts)?;
    report.write_csv(fs::File::create(out.join("ablation.csv"))?)?;
    write_json(
        &out.join("ablation.json"),
        &json!({ "summary": report.summary(), "report": &report }),
    )?;
    Ok(report)
}

/// Collects the JSON outputs found in `run_dir` into `report.json` and
/// writes plot-ready `accuracy_curve.csv` and `ablation_deltas.csv`.
pub fn cmd_report(run_dir: &Path) -> Result<Value> {
    let mut doc = BTreeMap::new();
    for name in ["certificate", "train_summary", "eval", "ablation"] {
        let path = run_dir.join(format!("{name}.json"));
        if path.exists() {
            let v: Value = serde_json::from_str(&fs::read_to_string(&path)?)?;
            doc.insert(name.to_string(), v);
        }
    }
    let history = run_dir.join("history.csv");
    if history.exists() {
        let mut rdr = csv::Reader::from_path(&history)?;
        let mut w = csv::Writer::from_path(run_dir.join("accuracy_curve.csv"))?;
        w.write_record(["epoch", "train_loss", "test_acc"])?;
        let mut rows = Vec::new();
        for rec in rdr.records() {
            let rec = rec?;
            w.write_record([&rec[0], &rec[1], &rec[2]])?;
            rows.push(json!({ "epoch": &rec[0], "train_loss": &rec[1], "test_acc": &rec[2] }));
        }
        w.flush()?;
        doc.insert("history".into(), Value::Array(rows));
    }
    if let Some(targets) = doc
        .get("ablation")
        .and_then(|a| a["summary"]["targets"].as_array())
    {
        let mut w = csv::Writer::from_path(run_dir.join("ablation_deltas.csv"))?;
        w.write_record(["target", "subnet_set", "accuracy", "delta"])?;
        for t in targets {
            w.write_record([
                t["target"].as_str().unwrap_or_default(),
                t["subnets"].as_str().unwrap_or_default(),
                &t["accuracy"].to_string(),
                &t["delta"].to_string(),
            ])?;
        }
        w.flush()?;
    }
    if doc.is_empty() {
        return Err(Error::InvalidArgument(format!(
            "no run outputs found in {}",
            run_dir.display()
        )));
    }
    let value = serde_json::to_value(doc)?;
    write_json(&run_dir.join("report.json"), &value)?;
    Ok(value)
}
