use std::path::{Path, PathBuf};

use hdp_slds::dynamics::ModelShape;
use hdp_slds::eval::{
    changepoint_indicators, changepoint_probabilities, changepoint_roc, hamming_with_optimal_mapping,
    heldout_log_likelihood, mode_count_summary, quantiles, HeldoutMethod,
};
use hdp_slds::gibbs::{generate_synthetic, run_chains, Observations, Scenario, TraceRecord};
use hdp_slds::rng::chain_rng;
use log::info;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::config::RunConfig;
use crate::error::{CliError, Result};
use crate::io::{self, Series};
use crate::preprocess::{fit_transform, invert_affine, transform_with, PreprocessMeta, PreprocessSpec};

pub const MANIFEST_VERSION: u32 = 1;
pub const MANIFEST_FILE: &str = "manifest.json";

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Manifest {
    pub manifest_version: u32,
    pub version: String,
    pub trace_schema_version: u32,
    pub config_hash: String,
    pub data_sha256: String,
    pub seed: u64,
    pub chains: usize,
    pub traces: Vec<String>,
    pub preprocessing: PreprocessMeta,
    pub config: RunConfig,
}

fn file_sha256(path: &Path) -> Result<String> {
    let bytes = std::fs::read(path).map_err(|e| CliError::io(path, e))?;
    Ok(format!("{:x}", Sha256::digest(bytes)))
}

pub fn generate(scenario: &str, length: usize, seed: u64, out: &Path) -> Result<()> {
    let sc = Scenario::from_name(scenario).ok_or_else(|| {
        CliError::config(format!(
            "unknown scenario {scenario:?}; expected one of var1-5mode, ar2-3mode, slds-3mode, sparse-slds, mssv"
        ))
    })?;
    let syn = generate_synthetic(&sc, length, &mut chain_rng(seed, 0))?;
    let rows: Vec<_> = syn.observations.context.iter().chain(&syn.observations.y).cloned().collect();
    io::write_series(&out.join("data.csv"), &Series::new("y", rows))?;
    io::write_labels(&out.join("z.csv"), &syn.z)?;
    if let Some(x) = syn.x {
        io::write_series(&out.join("states.csv"), &Series::new("x", x))?;
    }
    info!("wrote {} steps of {scenario} to {}", syn.z.len(), out.display());
    Ok(())
}

pub struct PreprocessArgs<'a> {
    pub input: &'a Path,
    pub out: &'a Path,
    pub spec: PreprocessSpec,
    /// Undo the affine steps recorded in this metadata file instead.
    pub invert: Option<&'a Path>,
}

pub fn meta_path(out: &Path) -> PathBuf {
    let mut name = out.file_name().map(|n| n.to_os_string()).unwrap_or_default();
    name.push(".meta.json");
    out.with_file_name(name)
}

pub fn preprocess(args: PreprocessArgs) -> Result<()> {
    let series = io::read_series(args.input)?;
    if let Some(meta_file) = args.invert {
        let meta: PreprocessMeta = io::read_json(meta_file)?;
        let rows = invert_affine(&series.rows, &meta);
        return io::write_series(args.out, &Series { columns: series.columns, rows });
    }
    let (rows, meta) = fit_transform(&series.rows, &args.spec)?;
    io::write_series(args.out, &Series { columns: series.columns, rows })?;
    io::write_json(&meta_path(args.out), &meta)?;
    if meta.clamped > 0 {
        info!("{} zero returns clamped to log({})", meta.clamped, meta.log_squared_floor);
    }
    Ok(())
}

pub fn fit(cfg: RunConfig) -> Result<Manifest> {
    cfg.validate()?;
    let prepared = cfg.prepare()?;
    info!(
        "fitting {} chains of {} sweeps on {} steps",
        cfg.chains,
        prepared.model.schedule.iterations,
        prepared.observations.len()
    );
    let traces = run_chains(&prepared.model, &prepared.observations, cfg.chains, cfg.seed)?;
    let out = cfg.output.clone();
    let mut names = Vec::with_capacity(traces.len());
    for (c, records) in traces.iter().enumerate() {
        let path = io::trace_path(&out, c);
        io::write_traces(&path, records)?;
        names.push(path.file_name().unwrap().to_string_lossy().into_owned());
    }
    let manifest = Manifest {
        manifest_version: MANIFEST_VERSION,
        version: env!("CARGO_PKG_VERSION").to_string(),
        trace_schema_version: io::TRACE_SCHEMA_VERSION,
        config_hash: cfg.hash(),
        data_sha256: file_sha256(&cfg.data)?,
        seed: cfg.seed,
        chains: cfg.chains,
        traces: names,
        preprocessing: prepared.preprocessing,
        config: cfg,
    };
    io::write_json(&out.join(MANIFEST_FILE), &manifest)?;
    if let Ok(summary) = mode_count_summary(&traces.iter().flatten().filter(|r| !r.burn_in).cloned().collect::<Vec<_>>()) {
        info!("most frequent number of active modes: {}", summary.most_frequent);
    }
    Ok(manifest)
}

pub fn load_manifest(path: &Path) -> Result<Manifest> {
    let m: Manifest = io::read_json(path)?;
    if m.manifest_version != MANIFEST_VERSION {
        return Err(CliError::io(path, format!("unsupported manifest version {}", m.manifest_version)));
    }
    m.config.validate()?;
    Ok(m)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Protocol {
    Hamming,
    Roc,
    Heldout,
    Modes,
}

pub struct EvaluateArgs<'a> {
    pub traces: &'a Path,
    pub protocol: Protocol,
    pub out: &'a Path,
    pub truth: Option<&'a Path>,
    pub window: usize,
    pub heldout: Option<&'a Path>,
    pub seed: Option<u64>,
    pub draws: Option<usize>,
}

fn fmt(v: f64) -> String {
    if v.is_infinite() {
        if v > 0.0 { "inf" } else { "-inf" }.to_string()
    } else {
        format!("{v:?}")
    }
}

fn post_burn_in(traces: &[Vec<TraceRecord>]) -> Result<Vec<&TraceRecord>> {
    let kept: Vec<&TraceRecord> = traces.iter().flatten().filter(|r| !r.burn_in).collect();
    if kept.is_empty() {
        return Err(CliError::config("the traces contain no post-burn-in records"));
    }
    Ok(kept)
}

fn truth(args: &EvaluateArgs) -> Result<Vec<usize>> {
    let path = args
        .truth
        .ok_or_else(|| CliError::config("this protocol needs --truth with the true mode labels"))?;
    io::read_labels(path)
}

pub fn evaluate(args: EvaluateArgs) -> Result<()> {
    let traces = io::read_trace_dir(args.traces)?;
    match args.protocol {
        Protocol::Hamming => {
            let z_true = truth(&args)?;
            let records = post_burn_in(&traces)?;
            let mut rows = Vec::with_capacity(records.len());
            let mut values = Vec::with_capacity(records.len());
            for r in &records {
                let h = hamming_with_optimal_mapping(&r.modes_zero_based(), &z_true)?;
                rows.push(vec![r.chain.to_string(), r.iteration.to_string(), fmt(h)]);
                values.push(h);
            }
            io::write_table(&args.out.join("hamming_samples.csv"), &["chain", "iteration", "hamming"], &rows)?;
            let probs = [0.1, 0.5, 0.9];
            let q = quantiles(&values, &probs)?;
            let rows: Vec<Vec<String>> = probs.iter().zip(&q).map(|(p, v)| vec![fmt(*p), fmt(*v)]).collect();
            io::write_table(&args.out.join("hamming_quantiles.csv"), &["quantile", "hamming"], &rows)?;
            println!("median Hamming distance {:.4} over {} samples", q[1], values.len());
        }
        Protocol::Roc => {
            let z_true = truth(&args)?;
            let events: Vec<usize> = changepoint_indicators(&z_true)
                .iter()
                .enumerate()
                .filter(|(_, &v)| v > 0.0)
                .map(|(t, _)| t)
                .collect();
            let samples: Vec<Vec<usize>> = post_burn_in(&traces)?.iter().map(|r| r.modes_zero_based()).collect();
            let roc = changepoint_roc(&samples, &events, args.window)?;
            let rows: Vec<Vec<String>> =
                roc.points.iter().map(|p| vec![fmt(p.threshold), fmt(p.fpr), fmt(p.tpr)]).collect();
            io::write_table(&args.out.join("roc.csv"), &["threshold", "fpr", "tpr"], &rows)?;
            let prob = changepoint_probabilities(&samples)?;
            let rows: Vec<Vec<String>> =
                prob.iter().enumerate().map(|(t, p)| vec![(t + 1).to_string(), fmt(*p)]).collect();
            io::write_table(&args.out.join("changepoint_probability.csv"), &["t", "probability"], &rows)?;
            println!("windowed ROC AUC {:.4} over {} true change points", roc.auc, events.len());
        }
        Protocol::Heldout => {
            let path = args
                .heldout
                .ok_or_else(|| CliError::config("the heldout protocol needs --heldout with a data CSV"))?;
            let manifest = load_manifest(&args.traces.join(MANIFEST_FILE))?;
            let prepared = manifest.config.prepare()?;
            let rows = transform_with(&io::read_series(path)?.rows, &manifest.preprocessing)?;
            let heldout = match prepared.model.shape {
                ModelShape::Ar { order, .. } => Observations::split_context(rows, order)?,
                ModelShape::Slds { .. } => Observations::new(rows),
            };
            let records: Vec<TraceRecord> = post_burn_in(&traces)?.into_iter().cloned().collect();
            let method = args.draws.map(|draws| HeldoutMethod::SampledModes { draws });
            let mut rng = chain_rng(args.seed.unwrap_or(manifest.seed), u64::MAX);
            let res = heldout_log_likelihood(&prepared.model, &records, &heldout, method, &mut rng)?;
            let rows: Vec<Vec<String>> = records
                .iter()
                .zip(&res.values)
                .map(|(r, v)| vec![r.chain.to_string(), r.iteration.to_string(), fmt(*v)])
                .collect();
            io::write_table(&args.out.join("heldout.csv"), &["chain", "iteration", "log_likelihood"], &rows)?;
            let method = match res.method {
                HeldoutMethod::ForwardSum => "forward-sum".to_string(),
                HeldoutMethod::SampledModes { draws } => format!("sampled-modes-{draws}"),
            };
            io::write_table(
                &args.out.join("heldout_interval.csv"),
                &["mass", "lower", "upper", "method"],
                &[vec![fmt(0.95), fmt(res.interval.0), fmt(res.interval.1), method]],
            )?;
            println!("held-out log-likelihood 95% interval [{:.3}, {:.3}]", res.interval.0, res.interval.1);
        }
        Protocol::Modes => {
            let records: Vec<TraceRecord> = post_burn_in(&traces)?.into_iter().cloned().collect();
            let summary = mode_count_summary(&records)?;
            let rows: Vec<Vec<String>> =
                summary.histogram.iter().map(|(k, c)| vec![k.to_string(), c.to_string()]).collect();
            io::write_table(&args.out.join("mode_counts.csv"), &["active_modes", "samples"], &rows)?;
            println!("most frequent number of active modes: {}", summary.most_frequent);
        }
    }
    Ok(())
}
