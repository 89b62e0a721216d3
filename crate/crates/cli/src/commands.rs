//! Command execution and artifact writing.

use std::fs::{self, File};
use std::io::BufWriter;
use std::path::{Path, PathBuf};
use std::sync::Arc;
use std::time::Instant;

use nalgebra::DMatrix;
use rand::RngCore;
use rayon::prelude::*;
use serde::Serialize;
use serde_json::{json, Value};

use stiefel_priors::inference::q_names;
use stiefel_priors::io::{
    load_matrix_csv, read_draws_by_chain, save_json, save_matrix_csv, summarize, summarize_table,
    write_chain_diagnostics_jsonl, write_derived_csv, write_draws_csv, write_wasserstein_csv,
    MatrixKind, ParameterSummary,
};
use stiefel_priors::linalg::orthogonality_defect;
use stiefel_priors::models::{
    auc, center_columns, eigenmodel_predict, invgamma_from_mean_sd, point_estimate_v,
    posterior_median_qlq, principal_angle, simulate_network, simulate_smooth_svd, Dyad, EigenModel,
    NetworkData, QPrior, SvdHyper, SvdModel,
};
use stiefel_priors::rng::stream_rng;
use stiefel_priors::theory::{
    coupled_frobenius_identity, count_zero_crossings, renormalized_covariance, semicircle_distance,
    wasserstein_experiment, PriorTemplate,
};
use stiefel_priors::{
    hmc_sample, polar_project, ChainOutput, CorrelationFamily, CorrelationMatrix, EntryLaw,
    HmcConfig, StructuredPriorSpec,
};

use crate::config::{
    Command, DiagnoseConfig, FitEigenmodelConfig, FitSvdConfig, MatrixSource, NetworkSource,
    Preset, ProjectConfig, RunConfig, SamplePriorConfig, TheoryCheckConfig,
};
use crate::error::{CliError, Context};

/// Files written by a command, relative to its output directory, and a short JSON summary.
#[derive(Debug, Default)]
pub struct Artifacts {
    pub files: Vec<String>,
    pub summary: Value,
}

struct Out<'a> {
    dir: &'a Path,
    files: Vec<String>,
}

impl<'a> Out<'a> {
    fn path(&mut self, name: &str) -> PathBuf {
        self.files.push(name.to_string());
        self.dir.join(name)
    }

    fn matrix(&mut self, name: &str, m: &DMatrix<f64>) -> Result<(), CliError> {
        let p = self.path(name);
        save_matrix_csv(&p, m).context(|| format!("writing {}", p.display()))
    }

    fn json<T: Serialize + ?Sized>(&mut self, name: &str, v: &T) -> Result<(), CliError> {
        let p = self.path(name);
        save_json(&p, v).context(|| format!("writing {}", p.display()))
    }

    fn writer(&mut self, name: &str) -> Result<BufWriter<File>, CliError> {
        let p = self.path(name);
        File::create(&p)
            .map(BufWriter::new)
            .map_err(|e| CliError::io(format!("creating {}", p.display()), e))
    }

    fn csv(&mut self, name: &str, header: &[&str], rows: &[Vec<String>]) -> Result<(), CliError> {
        let p = self.path(name);
        let ctx = || format!("writing {}", p.display());
        let mut w = csv::Writer::from_path(&p).map_err(|e| CliError::io(ctx(), e))?;
        w.write_record(header).map_err(|e| CliError::io(ctx(), e))?;
        for r in rows {
            w.write_record(r).map_err(|e| CliError::io(ctx(), e))?;
        }
        w.flush().map_err(|e| CliError::io(ctx(), e))
    }

    /// `draws.csv`, `derived.csv` and `diagnostics.jsonl` for a sampler run.
    fn chains(&mut self, prefix: &str, out: &ChainOutput) -> Result<(), CliError> {
        let ctx = |f: &str| format!("writing {f}");
        let name = format!("{prefix}draws.csv");
        write_draws_csv(self.writer(&name)?, out).context(|| ctx(&name))?;
        if !out.derived_names.is_empty() {
            let name = format!("{prefix}derived.csv");
            write_derived_csv(self.writer(&name)?, out).context(|| ctx(&name))?;
        }
        let name = format!("{prefix}diagnostics.jsonl");
        write_chain_diagnostics_jsonl(self.writer(&name)?, out).context(|| ctx(&name))
    }
}

fn num(x: f64) -> String {
    format!("{x:?}")
}

fn seed_of(cfg: &RunConfig) -> u64 {
    cfg.seed().unwrap_or(0)
}

/// Runs a validated configuration and writes its artifacts into the output directory.
pub fn run_command(cfg: &RunConfig) -> Result<Artifacts, CliError> {
    let dir = cfg.output_dir();
    fs::create_dir_all(dir).map_err(|e| CliError::io(format!("creating {}", dir.display()), e))?;
    let mut out = Out { dir, files: Vec::new() };
    let seed = seed_of(cfg);
    let summary = match cfg {
        RunConfig::SamplePrior(c) => sample_prior(c, seed, &mut out)?,
        RunConfig::Project(c) => project(c, &mut out)?,
        RunConfig::TheoryCheck(c) => theory_check(c, seed, &mut out)?,
        RunConfig::FitEigenmodel(c) => fit_eigenmodel(c, seed, &mut out)?,
        RunConfig::FitSvd(c) => fit_svd(c, seed, &mut out)?,
        RunConfig::Diagnose(c) => diagnose(c, &mut out)?,
    };
    Ok(Artifacts { files: out.files, summary })
}

/// Runs `cfg` and records `effective_config.json` and `run_log.json` next to its artifacts.
pub fn execute(cfg: &RunConfig) -> Result<Artifacts, CliError> {
    let start = Instant::now();
    let result = run_command(cfg);
    let dir = cfg.output_dir();
    let mut log = json!({
        "command": cfg.command().name(),
        "seed": cfg.seed(),
        "config_sha256": cfg.hash(),
        "config": serde_json::to_value(cfg).expect("config serializes"),
        "versions": {
            "stiefel-priors": stiefel_priors::VERSION,
            "stiefel-priors-cli": env!("CARGO_PKG_VERSION"),
        },
        "threads": rayon::current_num_threads(),
    });
    match &result {
        Ok(a) => {
            log["status"] = json!("ok");
            log["outputs"] = json!(a.files);
        }
        Err(e) => {
            log["status"] = json!("error");
            log["error"] = e.to_json()["error"].clone();
        }
    }
    log["elapsed_seconds"] = json!(start.elapsed().as_secs_f64());
    if dir.is_dir() {
        fs::write(dir.join("effective_config.json"), cfg.normal_form())
            .map_err(|e| CliError::io("writing effective_config.json", e))?;
        save_json(&dir.join("run_log.json"), &log).context(|| "writing run_log.json".into())?;
    }
    result
}

fn sample_prior(c: &SamplePriorConfig, seed: u64, out: &mut Out) -> Result<Value, CliError> {
    let omega = CorrelationMatrix::new(c.correlation.clone(), c.p, c.spacing)
        .context(|| "building the correlation matrix".into())?;
    let law = c.entry_law.build().context(|| "entry_law".into())?;
    let spec = StructuredPriorSpec::new(c.p, c.k, law, Arc::new(omega)).context(|| "prior".into())?;
    let rows = (0..c.draws)
        .into_par_iter()
        .map(|i| {
            spec.sample_q(&mut stream_rng(seed, i as u64))
                .map(|q| q.into_inner().as_slice().to_vec())
        })
        .collect::<Result<Vec<_>, _>>()
        .context(|| "sampling Q".into())?;
    let width = c.p * c.k;
    let m = DMatrix::from_fn(c.draws, width, |r, j| rows[r][j]);
    out.matrix("q_draws.csv", &m)?;
    let mean_sq: Vec<f64> = (0..width)
        .map(|j| m.column(j).iter().map(|v| v * v).sum::<f64>() / c.draws as f64)
        .collect();
    let summary = json!({
        "p": c.p,
        "k": c.k,
        "draws": c.draws,
        "columns": q_names("Q", c.p, c.k),
        "mean_squared_entry": mean_sq.iter().sum::<f64>() / width as f64,
        "expected_mean_squared_entry": 1.0 / c.p as f64,
    });
    out.json("summary.json", &summary)?;
    Ok(summary)
}

fn project(c: &ProjectConfig, out: &mut Out) -> Result<Value, CliError> {
    let x = load_matrix_csv(&c.input, MatrixKind::Numeric)
        .context(|| format!("reading {}", c.input.display()))?;
    let f = polar_project(&x).context(|| "polar projection".into())?;
    let q = f.q.as_matrix();
    out.matrix("q.csv", q)?;
    out.matrix("s_sqrt.csv", f.s_sqrt.as_matrix())?;
    let summary = json!({
        "p": x.nrows(),
        "k": x.ncols(),
        "orthogonality_defect": orthogonality_defect(q),
        "distance": (&x - q).norm(),
    });
    out.json("report.json", &summary)?;
    Ok(summary)
}

fn theory_check(c: &TheoryCheckConfig, seed: u64, out: &mut Out) -> Result<Value, CliError> {
    let summary = match &c.preset {
        Preset::Wasserstein {
            entry_law,
            correlation,
            spacing,
            p_grid,
            k,
            entries,
            replicates,
        } => {
            let template = PriorTemplate {
                entry_law: entry_law.build().context(|| "preset.entry_law".into())?,
                correlation: correlation.clone(),
                spacing: *spacing,
            };
            let zero_based: Vec<(usize, usize)> = entries.iter().map(|e| (e[0] - 1, e[1] - 1)).collect();
            let report = wasserstein_experiment(&template, p_grid, *k, &zero_based, *replicates, seed)
                .context(|| "wasserstein experiment".into())?;
            write_wasserstein_csv(out.writer("wasserstein.csv")?, &report)
                .context(|| "writing wasserstein.csv".into())?;
            let mut v = serde_json::to_value(&report).expect("report serializes");
            v["monotone_decay"] = json!(report.monotone_decay());
            v
        }
        Preset::FrobeniusIdentity {
            entry_law,
            correlation,
            spacing,
            p,
            k,
            instances,
        } => {
            let omega = CorrelationMatrix::new(correlation.clone(), *p, *spacing)
                .context(|| "preset.correlation".into())?;
            let law = entry_law.build().context(|| "preset.entry_law".into())?;
            let spec = StructuredPriorSpec::new_unrestricted(*p, *k, law, Arc::new(omega))
                .context(|| "prior".into())?;
            let pairs = (0..*instances)
                .into_par_iter()
                .map(|i| {
                    let x = spec.sample_x(&mut stream_rng(seed, i as u64))?;
                    coupled_frobenius_identity(&x)
                })
                .collect::<Result<Vec<_>, _>>()
                .context(|| "frobenius identity".into())?;
            let rows: Vec<Vec<String>> = pairs
                .iter()
                .enumerate()
                .map(|(i, (l, r))| vec![(i + 1).to_string(), num(*l), num(*r), num((l - r).abs())])
                .collect();
            out.csv("frobenius_identity.csv", &["instance", "lhs", "rhs", "abs_gap"], &rows)?;
            let worst = pairs.iter().map(|(l, r)| (l - r).abs() / l.max(1.0)).fold(0.0, f64::max);
            json!({ "instances": instances, "max_relative_gap": worst })
        }
        Preset::Semicircle {
            correlation,
            spacing,
            p,
            k,
            replicates,
        } => {
            let omega = CorrelationMatrix::new(correlation.clone(), *p, *spacing)
                .context(|| "preset.correlation".into())?;
            let results = (0..*replicates)
                .into_par_iter()
                .map(|r| {
                    let z = EntryLaw::StandardNormal.sample_matrix(*p, *k, &mut stream_rng(seed, r as u64));
                    let a = renormalized_covariance(&z, &omega)?.a_k;
                    let mut eigs: Vec<f64> = a.symmetric_eigenvalues().iter().copied().collect();
                    eigs.sort_by(f64::total_cmp);
                    Ok((semicircle_distance(&eigs), eigs))
                })
                .collect::<stiefel_priors::Result<Vec<_>>>()
                .context(|| "semicircle check".into())?;
            let rows: Vec<Vec<String>> = results
                .iter()
                .enumerate()
                .flat_map(|(r, (_, eigs))| eigs.iter().map(move |e| vec![(r + 1).to_string(), num(*e)]))
                .collect();
            out.csv("eigenvalues.csv", &["replicate", "eigenvalue"], &rows)?;
            let d: Vec<f64> = results.iter().map(|r| r.0).collect();
            json!({
                "replicates": replicates,
                "c_omega": omega.c_omega(),
                "kolmogorov_distance": d,
                "mean_distance": d.iter().sum::<f64>() / d.len() as f64,
            })
        }
        Preset::ZeroCrossings { rho, t, replicates } => {
            let omega = CorrelationMatrix::new(CorrelationFamily::SquaredExponential { rho: *rho }, *t, 1.0)
                .context(|| "squared exponential kernel".into())?;
            let spec = StructuredPriorSpec::new(*t, 1, EntryLaw::StandardNormal, Arc::new(omega))
                .context(|| "prior".into())?;
            let counts = (0..*replicates)
                .into_par_iter()
                .map(|r| {
                    spec.sample_x(&mut stream_rng(seed, r as u64))
                        .map(|x| count_zero_crossings(x.as_slice()))
                })
                .collect::<Result<Vec<_>, _>>()
                .context(|| "sampling curves".into())?;
            let rows: Vec<Vec<String>> = counts
                .iter()
                .enumerate()
                .map(|(r, n)| vec![(r + 1).to_string(), n.to_string()])
                .collect();
            out.csv("zero_crossings.csv", &["replicate", "crossings"], &rows)?;
            json!({
                "replicates": replicates,
                "mean_crossings": counts.iter().sum::<usize>() as f64 / counts.len() as f64,
                "expected": *t as f64 / (std::f64::consts::PI * rho),
            })
        }
    };
    out.json("report.json", &summary)?;
    Ok(summary)
}

/// Summaries of the named scalar parameters, keyed by name.
fn pick(all: &[ParameterSummary], prefixes: &[&str]) -> Value {
    let mut m = serde_json::Map::new();
    for s in all {
        let base = s.name.split('[').next().unwrap_or("");
        if prefixes.contains(&base) {
            m.insert(s.name.clone(), serde_json::to_value(s).expect("summary serializes"));
        }
    }
    Value::Object(m)
}

fn sampler_stats(out: &ChainOutput) -> Value {
    json!({
        "chains": out.chains.len(),
        "draws_per_chain": out.chains.first().map_or(0, |c| c.draws.len()),
        "divergences": out.divergences(),
        "max_split_rhat": out.max_rhat(),
        "accept_rate": out.chains.iter().map(|c| c.accept_rate).collect::<Vec<_>>(),
        "stepsize": out.chains.iter().map(|c| c.stepsize).collect::<Vec<_>>(),
    })
}

fn prior_name(p: QPrior) -> &'static str {
    match p {
        QPrior::Sparse => "sparse",
        QPrior::Uniform => "uniform",
    }
}

fn heldout_auc(out: &ChainOutput, held: &[Dyad]) -> Result<(Vec<f64>, f64), CliError> {
    let pairs: Vec<(usize, usize)> = held.iter().map(|d| (d.i, d.j)).collect();
    let scores = eigenmodel_predict(out, &pairs).context(|| "held-out predictions".into())?;
    let labels: Vec<bool> = held.iter().map(|d| d.y).collect();
    let a = auc(&scores, &labels).context(|| "held-out AUC".into())?;
    Ok((scores, a))
}

fn fit_eigenmodel(c: &FitEigenmodelConfig, seed: u64, out: &mut Out) -> Result<Value, CliError> {
    let mut truth_ell = None;
    let data = match &c.data {
        NetworkSource::Csv { path } => {
            let m = load_matrix_csv(path, MatrixKind::Adjacency)
                .context(|| format!("reading {}", path.display()))?;
            NetworkData::from_matrix(&m).context(|| format!("adjacency {}", path.display()))?
        }
        NetworkSource::Simulate { p, c: c0, lambda, ell } => {
            let (data, truth) = simulate_network(*p, *c0, lambda, *ell, &mut stream_rng(seed, 1))
                .context(|| "simulating the network".into())?;
            out.matrix("adjacency.csv", &data.to_matrix())?;
            out.matrix("true_probabilities.csv", &truth.probabilities)?;
            out.matrix("true_q.csv", &truth.q)?;
            out.json("truth.json", &json!({ "c": truth.c, "lambda": truth.lambda, "ell": truth.ell }))?;
            truth_ell = Some(truth.ell);
            data
        }
    };
    if data.p() < c.k {
        return Err(CliError::Validation(vec![format!(
            "k: must not exceed the number of nodes ({}), got {}",
            data.p(),
            c.k
        )]));
    }

    if let Some(folds) = c.folds {
        let parts = data.folds(folds, &mut stream_rng(seed, 2)).context(|| "folds".into())?;
        let mut priors = vec![c.q_prior];
        if c.compare_priors {
            priors.push(match c.q_prior {
                QPrior::Sparse => QPrior::Uniform,
                QPrior::Uniform => QPrior::Sparse,
            });
        }
        let mut rows = Vec::new();
        let mut per_prior: Vec<Vec<f64>> = vec![Vec::new(); priors.len()];
        for (f, (train, held)) in parts.into_iter().enumerate() {
            let fold_seed = stream_rng(seed, 3 + f as u64).next_u64();
            for (pi, prior) in priors.iter().enumerate() {
                let model = EigenModel::new(train.clone(), c.k, *prior, c.parameterization)
                    .context(|| format!("fold {}", f + 1))?;
                let fit = hmc_sample(&model, &c.hmc.with_seed(fold_seed))
                    .context(|| format!("sampling fold {} ({})", f + 1, prior_name(*prior)))?;
                let (_, a) = heldout_auc(&fit, &held)?;
                per_prior[pi].push(a);
                rows.push(vec![
                    (f + 1).to_string(),
                    prior_name(*prior).to_string(),
                    train.dyads().len().to_string(),
                    held.len().to_string(),
                    num(a),
                    fit.divergences().to_string(),
                ]);
            }
        }
        out.csv(
            "cv.csv",
            &["fold", "prior", "train_dyads", "heldout_dyads", "auc", "divergences"],
            &rows,
        )?;
        let mut by_prior = serde_json::Map::new();
        for (prior, aucs) in priors.iter().zip(&per_prior) {
            by_prior.insert(
                prior_name(*prior).into(),
                json!({ "auc": aucs, "mean_auc": aucs.iter().sum::<f64>() / aucs.len() as f64 }),
            );
        }
        let mut summary = json!({ "folds": folds, "k": c.k, "priors": by_prior });
        if priors.len() == 2 {
            let diff: Vec<f64> = per_prior[0].iter().zip(&per_prior[1]).map(|(a, b)| a - b).collect();
            summary["median_auc_difference"] = json!(stiefel_priors::stats::quantile(&diff, 0.5));
        }
        out.json("summary.json", &summary)?;
        return Ok(summary);
    }

    let (train, held) = if c.holdout_fraction > 0.0 {
        data.split(c.holdout_fraction, &mut stream_rng(seed, 2)).context(|| "holdout split".into())?
    } else {
        (data, Vec::new())
    };
    let model = EigenModel::new(train, c.k, c.q_prior, c.parameterization).context(|| "eigenmodel".into())?;
    let fit = hmc_sample(&model, &c.hmc.with_seed(seed)).context(|| "sampling".into())?;
    out.chains("", &fit)?;
    out.matrix("qlq_median.csv", &posterior_median_qlq(&fit).context(|| "posterior median".into())?)?;
    let all = summarize(&fit, true).context(|| "summaries".into())?;
    out.json("posterior_summary.json", &all)?;

    let mut summary = json!({
        "k": c.k,
        "q_prior": prior_name(c.q_prior),
        "parameters": pick(&all, &["c", "lambda", "ell"]),
        "sampler": sampler_stats(&fit),
    });
    if !held.is_empty() {
        let (scores, a) = heldout_auc(&fit, &held)?;
        let rows: Vec<Vec<String>> = held
            .iter()
            .zip(&scores)
            .map(|(d, s)| vec![(d.i + 1).to_string(), (d.j + 1).to_string(), (d.y as u8).to_string(), num(*s)])
            .collect();
        out.csv("heldout.csv", &["i", "j", "y", "probability"], &rows)?;
        summary["heldout_auc"] = json!(a);
        summary["heldout_dyads"] = json!(held.len());
    }
    if let (Some(ell), Some(s)) = (truth_ell, all.iter().find(|s| s.name == "ell")) {
        summary["ell_check"] = json!({ "truth": ell, "q05": s.q05, "q95": s.q95, "covered": s.q05 <= ell && ell <= s.q95 });
    }
    out.json("summary.json", &summary)?;
    Ok(summary)
}

fn fit_svd(c: &FitSvdConfig, seed: u64, out: &mut Out) -> Result<Value, CliError> {
    let mut truth = None;
    let raw = match &c.data {
        MatrixSource::Csv { path } => {
            load_matrix_csv(path, MatrixKind::Numeric).context(|| format!("reading {}", path.display()))?
        }
        MatrixSource::Simulate { n, p, d, sigma, rho } => {
            let (y, t) = simulate_smooth_svd(*n, d, *sigma, *rho, *p, c.spacing, &mut stream_rng(seed, 1))
                .context(|| "simulating data".into())?;
            out.matrix("y.csv", &y)?;
            out.matrix("true_v.csv", &t.v)?;
            out.json("truth.json", &json!({ "d": t.d, "sigma": t.sigma, "rho": t.rho }))?;
            truth = Some(t);
            y
        }
    };
    if raw.iter().any(|v| v.is_nan()) {
        return Err(CliError::Validation(vec!["data: missing values are not supported by fit-svd".into()]));
    }
    let y = if c.center { center_columns(&raw) } else { raw };
    let mut hyper = SvdHyper::defaults_for(&y).context(|| "default hyperparameters".into())?;
    let h = &c.hyper;
    hyper.nu_err = h.nu_err.unwrap_or(hyper.nu_err);
    hyper.s2 = h.s2.unwrap_or(hyper.s2);
    hyper.tau = h.tau.unwrap_or(hyper.tau);
    if let (Some(m), Some(sd)) = (h.rho_mean, h.rho_sd) {
        (hyper.alpha, hyper.beta) = invgamma_from_mean_sd(m, sd).context(|| "hyper.rho_mean".into())?;
    }
    let model = SvdModel::new(y, c.k, hyper, c.spacing, c.parameterization).context(|| "svd model".into())?;
    let cfg: HmcConfig = c.hmc.with_seed(seed);
    let fit = hmc_sample(&model, &cfg).context(|| "sampling".into())?;
    out.chains("", &fit)?;
    let v = point_estimate_v(&fit, c.k).context(|| "point estimate of V".into())?;
    out.matrix("v_hat.csv", v.as_matrix())?;
    let all = summarize(&fit, false).context(|| "summaries".into())?;
    out.json("posterior_summary.json", &all)?;
    let mut summary = json!({
        "k": c.k,
        "hyper": hyper,
        "parameters": pick(&all, &["d", "sigma2", "rho"]),
        "sampler": sampler_stats(&fit),
    });
    if let Some(t) = truth {
        let angle = principal_angle(v.as_matrix(), &t.v).context(|| "principal angle".into())?;
        let rho = all.iter().find(|s| s.name == "rho").map_or(f64::NAN, |s| s.mean);
        summary["truth_check"] = json!({
            "principal_angle_degrees": angle.to_degrees(),
            "rho_truth": t.rho,
            "rho_relative_error": (rho - t.rho).abs() / t.rho,
        });
    }
    out.json("summary.json", &summary)?;
    Ok(summary)
}

fn diagnose(c: &DiagnoseConfig, out: &mut Out) -> Result<Value, CliError> {
    let f = File::open(&c.draws).map_err(|e| CliError::io(format!("opening {}", c.draws.display()), e))?;
    let (names, chains) = read_draws_by_chain(f).context(|| format!("reading {}", c.draws.display()))?;
    let s = summarize_table(&names, &chains).context(|| "summaries".into())?;
    let max_rhat = s.iter().filter_map(|p| p.split_rhat).fold(f64::NAN, f64::max);
    let min_ess = s.iter().filter_map(|p| p.ess).fold(f64::NAN, f64::min);
    let summary = json!({
        "chains": chains.len(),
        "draws_per_chain": chains.iter().map(Vec::len).min(),
        "parameters": names.len(),
        "max_split_rhat": max_rhat,
        "min_ess": min_ess,
        "converged": max_rhat < 1.05,
    });
    let rows: Vec<Vec<String>> = s
        .iter()
        .map(|p| {
            let opt = |v: Option<f64>| v.map_or("NA".to_string(), num);
            vec![p.name.clone(), num(p.mean), num(p.sd), num(p.q05), num(p.q50), num(p.q95), opt(p.split_rhat), opt(p.ess)]
        })
        .collect();
    out.csv("diagnostics.csv", &["name", "mean", "sd", "q05", "q50", "q95", "split_rhat", "ess"], &rows)?;
    out.json("summary.json", &summary)?;
    Ok(summary)
}

/// Commands whose primary outputs must be reproducible; used by tests.
pub fn primary_outputs(cmd: Command) -> &'static [&'static str] {
    match cmd {
        Command::SamplePrior => &["q_draws.csv"],
        Command::Project => &["q.csv", "s_sqrt.csv"],
        Command::TheoryCheck => &["report.json"],
        Command::FitEigenmodel | Command::FitSvd => &["draws.csv", "derived.csv"],
        Command::Diagnose => &["diagnostics.csv"],
    }
}
