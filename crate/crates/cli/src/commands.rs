//! The five subcommands.

use std::fmt::Write as _;
use std::fs;
use std::io::Write as _;
use std::path::Path;

use rand::SeedableRng;
use rayon::prelude::*;
use serde_json::{json, Value};

use hkmedian::algorithm::Algorithm;
use hkmedian::cost::medoid_cost;
use hkmedian::datasets::{check_well_clusterable, dbscan, dbscan_preset, save_csv_with_sidecar, DbscanParams};
use hkmedian::hierarchy::clnss_pipeline;
use hkmedian::linkage::agglomerate;
use hkmedian::sensitivity::{avg_sensitivity_empirical, avg_sensitivity_exact, SensitivityReport};
use hkmedian::stream::{derive_seed, Stream, TAG_ALGORITHM};
use hkmedian::{Dataset, Partition};

use crate::config::{Settings, CSV_CONFIG_PREFIX};
use crate::data::Input;
use crate::fail::{config_err, data_err, CliResult};

/// Seed of run `t` of every algorithm; sensitivity trial `t` uses the same.
fn run_stream(s: &Settings, t: usize) -> Stream {
    Stream::seed_from_u64(derive_seed(s.seed(), &[t as u64, TAG_ALGORITHM]))
}

/// Cluster counts to report: `--k K` means `1..=K`, the default is all.
fn level_range(s: &Settings, n: usize) -> CliResult<(usize, usize)> {
    let (lo, hi) = match (s.k, s.k_range) {
        (Some(k), _) => (1, k),
        (None, Some(r)) => (r.lo, r.hi),
        (None, None) => (1, n),
    };
    if lo == 0 || hi > n {
        return Err(config_err(format!(
            "k up to {hi} requested but the data has {n} points"
        )));
    }
    Ok((lo, hi))
}

/// Cluster counts for sensitivity: `--k K` is the single value `K`.
fn k_values(s: &Settings, n: usize) -> CliResult<Vec<usize>> {
    let ks: Vec<usize> = match (s.k, s.k_range) {
        (Some(k), _) => vec![k],
        (None, Some(r)) => (r.lo..=r.hi).collect(),
        (None, None) => unreachable!("resolve requires k"),
    };
    if let Some(&k) = ks.iter().find(|&&k| k == 0 || k > n) {
        return Err(config_err(format!("k = {k} outside 1..={n}")));
    }
    Ok(ks)
}

fn json_text(v: &Value) -> String {
    serde_json::to_string_pretty(v).expect("json values serialize") + "\n"
}

fn csv_preamble(s: &Settings) -> String {
    format!("{CSV_CONFIG_PREFIX}{}\n", s.embedded())
}

fn write_file(path: &Path, text: &str) -> CliResult<()> {
    fs::write(path, text).map_err(|e| config_err(format!("cannot write {}: {e}", path.display())))
}

/// Writes to `out`, or to stdout when no path was given.
fn emit(out: Option<&Path>, text: &str) -> CliResult<()> {
    match out {
        Some(path) => write_file(path, text),
        None => std::io::stdout()
            .lock()
            .write_all(text.as_bytes())
            .map_err(|e| config_err(format!("cannot write to stdout: {e}"))),
    }
}

fn out_dir(s: &Settings) -> CliResult<&Path> {
    let dir = s
        .out
        .as_deref()
        .ok_or_else(|| config_err("this command needs --out DIR"))?;
    fs::create_dir_all(dir).map_err(|e| config_err(format!("cannot create {}: {e}", dir.display())))?;
    Ok(dir)
}

fn epsilon_json(alg: &Algorithm) -> Value {
    alg.epsilon().map_or(Value::Null, Value::from)
}

fn level_json(k: usize, partition: &Partition, centers: &[usize], euclidean: f64, tree: Option<f64>) -> Value {
    let mut v = json!({
        "k": k,
        "centers": centers,
        "euclidean_cost": euclidean,
        "blocks": partition.blocks(),
    });
    if let Some(t) = tree {
        v["tree_cost"] = json!(t);
    }
    v
}

/// Levels `lo..=hi` of one algorithm with their costs.
fn hierarchy_json(alg: &Algorithm, ds: &Dataset, lo: usize, hi: usize, s: &Settings) -> CliResult<Value> {
    let mut levels = Vec::new();
    let mut run = json!({ "algorithm": alg.name(), "epsilon": epsilon_json(alg) });
    match alg.tree_mode() {
        Some((mode, shift)) => {
            let out = clnss_pipeline(ds, &mut run_stream(s, 0), mode, &shift, Some(hi))?;
            let h = &out.hierarchy;
            for k in lo..=hi {
                let tree = h.per_level_cost()[k - 1];
                levels.push(level_json(
                    k,
                    &h.level(k)?,
                    &h.centers()[..k],
                    out.euclidean_cost[k - 1],
                    Some(tree),
                ));
            }
            run["centers"] = json!(h.centers());
            run["shift"] = json!(out.tree.shift());
            run["tree_depth"] = json!(out.tree.depth());
        }
        None => {
            let Algorithm::Linkage { kind } = alg else {
                unreachable!("only linkage lacks a tree mode")
            };
            let dendrogram = agglomerate(ds, *kind);
            for k in lo..=hi {
                let p = dendrogram.cut(k)?;
                let (medoids, cost) = medoid_cost(ds, &p)?;
                levels.push(level_json(k, &p, &medoids, cost, None));
            }
        }
    }
    run["levels"] = Value::Array(levels);
    Ok(run)
}

pub fn cluster(s: &Settings, input: &Input) -> CliResult<()> {
    let ds = &input.dataset;
    let (lo, hi) = level_range(s, ds.len())?;
    let runs = s
        .algorithms()?
        .iter()
        .map(|alg| hierarchy_json(alg, ds, lo, hi, s))
        .collect::<CliResult<Vec<_>>>()?;
    let doc = json!({
        "config": s.embedded(),
        "n": ds.len(),
        "dim": ds.dim(),
        "runs": runs,
    });
    emit(s.out.as_deref(), &json_text(&doc))
}

/// Euclidean cost of levels `lo..=hi` in one run.
fn curve(alg: &Algorithm, ds: &Dataset, lo: usize, hi: usize, s: &Settings, t: usize) -> CliResult<Vec<f64>> {
    match alg.tree_mode() {
        Some((mode, shift)) => {
            let out = clnss_pipeline(ds, &mut run_stream(s, t), mode, &shift, Some(hi))?;
            Ok(out.euclidean_cost[lo - 1..hi].to_vec())
        }
        None => {
            let Algorithm::Linkage { kind } = alg else {
                unreachable!("only linkage lacks a tree mode")
            };
            let dendrogram = agglomerate(ds, *kind);
            (lo..=hi).map(|k| Ok(medoid_cost(ds, &dendrogram.cut(k)?)?.1)).collect()
        }
    }
}

pub fn cost_curve(s: &Settings, input: &Input) -> CliResult<()> {
    let ds = &input.dataset;
    let (lo, hi) = level_range(s, ds.len())?;
    let mut text = csv_preamble(s);
    text.push_str("k,algorithm,epsilon,cost,runs\n");
    for alg in s.algorithms()? {
        let runs = if alg.is_deterministic() {
            1
        } else {
            s.trials.unwrap_or(1).max(1)
        };
        let curves = (0..runs)
            .into_par_iter()
            .map(|t| curve(&alg, ds, lo, hi, s, t))
            .collect::<CliResult<Vec<_>>>()?;
        let eps = alg.epsilon().map(|e| e.to_string()).unwrap_or_default();
        for (i, k) in (lo..=hi).enumerate() {
            let mean = curves.iter().map(|c| c[i]).sum::<f64>() / runs as f64;
            writeln!(text, "{k},{},{eps},{mean:?},{runs}", alg.name()).expect("string write");
        }
    }
    emit(s.out.as_deref(), &text)
}

fn cell_slug(report: &SensitivityReport) -> String {
    let mut slug = report.algorithm.name().to_string();
    if let Some(e) = report.algorithm.epsilon() {
        write!(slug, "-eps{e}").expect("string write");
    }
    write!(slug, "-{}-k{}", report.schedule.to_string().replace(':', ""), report.k).expect("string write");
    slug
}

pub fn sensitivity(s: &Settings, input: &Input) -> CliResult<()> {
    let ds = &input.dataset;
    let ks = k_values(s, ds.len())?;
    let schedules = s.schedules()?;
    let exact = s.exact.unwrap_or(false);
    let dir = out_dir(s)?;
    let mut summary = csv_preamble(s);
    summary.push_str("algorithm,epsilon,schedule,k,n,trials,mean,stddev\n");
    for alg in s.algorithms()? {
        for schedule in &schedules {
            for &k in &ks {
                let report = if exact {
                    avg_sensitivity_exact(&alg, ds, k)?
                } else {
                    avg_sensitivity_empirical(&alg, ds, k, schedule, s.seed())?
                };
                let slug = cell_slug(&report);
                let mut trials = csv_preamble(s).into_bytes();
                report.write_csv(&mut trials).expect("in-memory write");
                write_file(
                    &dir.join(format!("{slug}.csv")),
                    &String::from_utf8(trials).expect("utf-8 csv"),
                )?;
                let doc = json!({ "config": s.embedded(), "summary": report.summary() });
                write_file(&dir.join(format!("{slug}.json")), &json_text(&doc))?;
                writeln!(
                    summary,
                    "{},{},{},{},{},{},{:?},{:?}",
                    alg.name(),
                    alg.epsilon().map(|e| e.to_string()).unwrap_or_default(),
                    report.schedule,
                    k,
                    report.n,
                    report.records.len(),
                    report.mean,
                    report.stddev
                )
                .expect("string write");
            }
        }
    }
    write_file(&dir.join("summary.csv"), &summary)
}

fn dbscan_params(s: &Settings) -> CliResult<DbscanParams> {
    let base = match &s.preset {
        Some(name) => Some(dbscan_preset(name).ok_or_else(|| config_err(format!("unknown DBSCAN preset `{name}`")))?),
        None => None,
    };
    let eps = s.eps.or(base.map(|b| b.eps));
    let min_samples = s.min_samples.or(base.map(|b| b.min_samples));
    match (eps, min_samples) {
        (Some(eps), Some(m)) => Ok(DbscanParams::new(eps, m)?),
        _ => Err(config_err("dbscan needs --preset or both --eps and --min-samples")),
    }
}

pub fn clusterability(s: &Settings, input: &Input) -> CliResult<()> {
    let ds = &input.dataset;
    let (clusters, noise, params) = match s.labels.as_deref() {
        Some("truth") => {
            let truth = input
                .truth
                .clone()
                .ok_or_else(|| config_err("--labels truth needs the clusterable generator"))?;
            (truth, Vec::new(), None)
        }
        _ => {
            let params = dbscan_params(s)?;
            let r = dbscan(ds, params);
            (r.clusters, r.noise, Some(params))
        }
    };
    if clusters.num_blocks() == 0 {
        return Err(data_err("every point is noise; no clusters to check"));
    }
    let clustered = ds.without(&noise)?;
    let report = check_well_clusterable(&clustered, &clusters)?;
    let doc = json!({
        "config": s.embedded(),
        "dbscan": params,
        "n": ds.len(),
        "noise": noise,
        "clusters": clusters.blocks(),
        "report": report,
    });
    let Some(_) = &s.out else {
        return emit(None, &json_text(&doc));
    };
    let dir = out_dir(s)?;
    write_file(&dir.join("report.json"), &json_text(&doc))?;
    let mut table = csv_preamble(s);
    table.push_str("cluster,size,max_intra,min_inter\n");
    for c in &report.clusters {
        writeln!(table, "{},{},{:?},{:?}", c.cluster, c.size, c.max_intra, c.min_inter).expect("string write");
    }
    write_file(&dir.join("table.csv"), &table)?;
    let index = clusters.block_index();
    let mut labels = csv_preamble(s);
    labels.push_str("id,label\n");
    for &id in ds.ids() {
        let label = index.get(&id).map_or(-1, |&b| b as i64);
        writeln!(labels, "{id},{label}").expect("string write");
    }
    write_file(&dir.join("labels.csv"), &labels)
}

pub fn gen(s: &Settings, input: &Input) -> CliResult<()> {
    let out = s.out.as_deref().ok_or_else(|| config_err("gen needs --out FILE"))?;
    let meta = json!({
        "config": s.embedded(),
        "n": input.dataset.len(),
        "dim": input.dataset.dim(),
        "extra": input.extra,
    });
    save_csv_with_sidecar(&input.dataset, out, &meta).map_err(|e| config_err(format!("cannot write output: {e}")))
}
