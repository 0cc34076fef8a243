use std::fs;
use std::path::{Path, PathBuf};

use anyhow::{bail, ensure, Context, Result};
use bandspike::bcd::SolverConfig;
use bandspike::bounds::{epsilon_bound, BoundInputs};
use bandspike::cmx::{load_cmx, save_cmx};
use bandspike::evaluation::{
    aggregate, band_recovery, monte_carlo_sweep, run_method, Method, MuRule, ScnrEvaluator, SteeringGrid,
    SweepConfig, SweepRow, BAND_REL_TOL, SWEEP_HEADER,
};
use bandspike::model::{make_banded_spiked_truth, sample_gaussian, scm, GroundTruthScenario};
use bandspike::noise::estimate_noise;
use bandspike::HermitianMatrix;
use rayon::prelude::*;
use serde::Serialize;
use serde_json::json;

use crate::config::ExperimentConfig;

fn write_json(path: &Path, value: &impl Serialize) -> Result<()> {
    let text = serde_json::to_string_pretty(value)?;
    fs::write(path, text + "\n").with_context(|| format!("writing {}", path.display()))
}

fn save(m: &HermitianMatrix, path: &Path) -> Result<()> {
    save_cmx(m, path).with_context(|| format!("writing {}", path.display()))
}

fn load(path: &Path) -> Result<HermitianMatrix> {
    load_cmx(path).with_context(|| format!("reading {}", path.display()))
}

pub fn simulate(config: &Path, seed: Option<u64>, out: &Path) -> Result<()> {
    let cfg = ExperimentConfig::load(config)?;
    let scenario = cfg.scenario.to_scenario()?;
    let seed = seed.or(cfg.seed).unwrap_or(0);
    let truth = make_banded_spiked_truth(&scenario)?;
    fs::create_dir_all(out)?;
    save(&truth, &out.join("truth.cmx"))?;

    let jobs: Vec<(usize, usize)> = cfg
        .sweep
        .k_list
        .iter()
        .flat_map(|&k| (0..cfg.sweep.trials).map(move |t| (k, t)))
        .collect();
    let records: Vec<serde_json::Value> = jobs
        .par_iter()
        .map(|&(k, trial)| {
            let sample_seed = seed.wrapping_add(trial as u64);
            let s = scm(&sample_gaussian(&truth, k, sample_seed)?)?;
            let file = format!("scm_K{k}_t{trial}.cmx");
            save(&s, &out.join(&file))?;
            Ok(json!({ "file": file, "K": k, "trial": trial, "seed": sample_seed }))
        })
        .collect::<Result<_>>()?;

    let eig = truth.eigenvalues();
    let manifest = json!({
        "master_seed": seed,
        "scenario": scenario,
        "truth": {
            "file": "truth.cmx",
            "lambda_min": eig[0],
            "lambda_max": eig[eig.len() - 1],
        },
        "scm": records,
        "annotations": cfg.annotations,
    });
    write_json(&out.join("manifest.json"), &manifest)?;
    println!("wrote truth.cmx, {} SCM files and manifest.json to {}", jobs.len(), out.display());
    Ok(())
}

#[derive(Debug, Serialize)]
pub struct EstimateSummary {
    pub method: String,
    pub p: usize,
    #[serde(rename = "K")]
    pub k: usize,
    pub sigma2_hat: f64,
    pub r_hat: usize,
    pub mu: Option<f64>,
    pub sweeps: usize,
    pub converged: bool,
    pub duality_gap: Option<f64>,
    pub lambda_min: f64,
    #[serde(rename = "L_hat")]
    pub l_hat: usize,
    pub output: PathBuf,
}

pub struct EstimateArgs {
    pub scm: PathBuf,
    pub k: usize,
    pub method: String,
    pub mu: Option<f64>,
    pub delta: Option<f64>,
    pub taper_l: Option<usize>,
    pub name: String,
}

pub fn parse_method(name: &str, mu: Option<f64>, delta: Option<f64>, taper_l: Option<usize>) -> Result<Method> {
    let method = match (name, taper_l) {
        ("band-taper", Some(l)) => Method::BandTaper { taper_l: l },
        ("band-taper", None) => bail!("method band-taper needs --taper-l"),
        _ => name.parse::<Method>()?,
    };
    Ok(match method {
        Method::BandedSpiked { .. } => Method::BandedSpiked {
            mu: mu.map_or(MuRule::Default, MuRule::Fixed),
        },
        Method::DiagonalLoading { .. } => Method::DiagonalLoading { delta },
        Method::Truth => bail!("method 'truth' is only available in sweeps"),
        other => other,
    })
}

pub fn estimate(args: &EstimateArgs, out: &Path) -> Result<EstimateSummary> {
    ensure!(args.k > 0, "--k must be positive");
    if let Some(mu) = args.mu {
        ensure!(mu.is_finite() && mu >= 0.0, "--mu must be non-negative");
    }
    let method = parse_method(&args.method, args.mu, args.delta, args.taper_l)?;
    let s = load(&args.scm)?;
    let p = s.dim();
    if let Method::BandedSpiked { mu: MuRule::Default } = method {
        eprintln!("mu = 3*sqrt(log(p)/K) = {} for p = {p}, K = {}", SolverConfig::default_mu(p, args.k), args.k);
    }
    let noise = estimate_noise(&s, args.k)?;
    let result = run_method(method, &s, args.k, &noise, None)?;

    fs::create_dir_all(out)?;
    let output = out.join(format!("{}.cmx", args.name));
    save(&result.estimate, &output)?;
    let summary = EstimateSummary {
        method: method.to_string(),
        p,
        k: args.k,
        sigma2_hat: noise.sigma2_hat,
        r_hat: noise.r_hat,
        mu: result.mu,
        sweeps: result.sweeps,
        converged: result.converged,
        duality_gap: result.duality_gap,
        lambda_min: result.estimate.min_eigenvalue(),
        l_hat: band_recovery(&result.estimate, BAND_REL_TOL),
        output,
    };
    write_json(&out.join(format!("{}.json", args.name)), &summary)?;
    println!("{}", serde_json::to_string(&summary)?);
    Ok(summary)
}

pub fn evaluate(truth: &Path, est: &Path, q: usize, out: &Path) -> Result<f64> {
    let truth = load(truth)?;
    let est = load(est)?;
    let p = truth.dim();
    ensure!(q > 0 && p % q == 0, "--q = {q} must divide p = {p}");
    let grid = SteeringGrid::standard(q, p / q)?;
    let (values, regularized) = ScnrEvaluator::new(&truth, &grid)?.evaluate(&est)?;

    fs::create_dir_all(out)?;
    let path = out.join("scnr.csv");
    let mut w = csv::Writer::from_path(&path).with_context(|| format!("writing {}", path.display()))?;
    w.write_record(["doppler", "azimuth", "scnr"])?;
    let mut it = values.iter();
    for fd in &grid.doppler {
        for th in &grid.azimuth {
            w.write_record([format!("{fd:.2}"), format!("{th}"), format!("{:.17e}", it.next().unwrap())])?;
        }
    }
    w.flush()?;
    let mean = values.iter().sum::<f64>() / values.len() as f64;
    println!("{}", json!({ "mean_scnr": mean, "points": values.len(), "regularized_inverse": regularized }));
    Ok(mean)
}

fn write_rows(path: &Path, rows: &[SweepRow]) -> Result<()> {
    let mut w = csv::Writer::from_path(path).with_context(|| format!("writing {}", path.display()))?;
    w.write_record(SWEEP_HEADER)?;
    for r in rows {
        w.write_record([
            r.method.clone(),
            r.k.to_string(),
            r.trial.to_string(),
            r.mean_scnr.to_string(),
            r.lambda_min.to_string(),
            r.l_hat.to_string(),
            r.sigma2_hat.to_string(),
            r.converged.to_string(),
            r.regularized_inverse.to_string(),
        ])?;
    }
    w.flush()?;
    Ok(())
}

pub fn sweep(config: &Path, seed: Option<u64>, out: &Path) -> Result<()> {
    let cfg = ExperimentConfig::load(config)?;
    let truth = make_banded_spiked_truth(&cfg.scenario.to_scenario()?)?;
    let sweep_cfg = SweepConfig {
        methods: cfg.methods()?,
        k_list: cfg.sweep.k_list.clone(),
        trials: cfg.sweep.trials,
        seed: seed.or(cfg.seed).unwrap_or(0),
    };
    let rows = monte_carlo_sweep(&truth, &cfg.grid()?, &sweep_cfg)?;

    fs::create_dir_all(out)?;
    write_rows(&out.join("sweep.csv"), &rows)?;
    let path = out.join("sweep_summary.csv");
    let mut w = csv::Writer::from_path(&path).with_context(|| format!("writing {}", path.display()))?;
    w.write_record(["method", "K", "n", "mean_scnr", "std_scnr"])?;
    for a in aggregate(&rows) {
        println!("{:>18} K={:<5} {:.4} ± {:.4} (n={})", a.method, a.k, a.mean, a.std, a.n);
        w.write_record([a.method, a.k.to_string(), a.n.to_string(), a.mean.to_string(), a.std.to_string()])?;
    }
    w.flush()?;

    let failed: Vec<_> = rows.iter().filter(|r| r.error.is_some()).collect();
    for r in &failed {
        eprintln!("{} K={} trial {}: {}", r.method, r.k, r.trial, r.error.as_deref().unwrap_or(""));
    }
    ensure!(failed.is_empty(), "{} of {} rows failed", failed.len(), rows.len());
    Ok(())
}

pub struct BoundsArgs {
    pub p: Option<usize>,
    pub k: Vec<usize>,
    pub sigma2: f64,
    pub c_db: (f64, f64, f64),
    pub scm: Option<PathBuf>,
    pub band_size: usize,
    pub spike_count: usize,
    pub spike_gain: f64,
    pub trials: usize,
}

/// Parses `start:stop:step`.
pub fn parse_range(s: &str) -> Result<(f64, f64, f64)> {
    let parts: Vec<f64> = s
        .split(':')
        .map(|x| x.trim().parse::<f64>())
        .collect::<std::result::Result<_, _>>()
        .with_context(|| format!("range '{s}' is not start:stop:step"))?;
    let [start, stop, step] = parts[..] else {
        bail!("range '{s}' is not start:stop:step");
    };
    ensure!(step > 0.0 && stop >= start, "range '{s}' needs step > 0 and stop >= start");
    Ok((start, stop, step))
}

pub fn bounds(args: &BoundsArgs, seed: u64, out: &Path) -> Result<usize> {
    ensure!(!args.k.is_empty() && !args.k.contains(&0), "--k needs positive values");
    ensure!(args.sigma2.is_finite() && args.sigma2 > 0.0, "--sigma2 must be positive");
    let (start, stop, step) = args.c_db;
    ensure!(start >= 0.0, "c must not lie below sigma2 (c_db >= 0)");
    let n_steps = ((stop - start) / step + 1e-9).floor() as usize;
    let c_dbs: Vec<f64> = (0..=n_steps).map(|i| start + step * i as f64).collect();

    // (p, K, mean λ_max(S), mean tr(S)) per K.
    let stats: Vec<(usize, usize, f64, f64)> = match &args.scm {
        Some(path) => {
            ensure!(args.k.len() == 1, "with --scm give the single K the file was formed from");
            let s = load(path)?;
            if let Some(p) = args.p {
                ensure!(p == s.dim(), "--p {p} disagrees with the SCM dimension {}", s.dim());
            }
            vec![(s.dim(), args.k[0], s.max_eigenvalue(), s.trace())]
        }
        None => {
            let p = args.p.context("--p is required without --scm")?;
            ensure!(args.trials > 0, "--trials must be positive");
            let truth = make_banded_spiked_truth(&GroundTruthScenario {
                p,
                band_size: args.band_size,
                spike_count: args.spike_count,
                sigma2: args.sigma2,
                spike_gain: args.spike_gain,
                seed,
            })?;
            args.k
                .iter()
                .map(|&k| {
                    let draws: Vec<(f64, f64)> = (0..args.trials)
                        .into_par_iter()
                        .map(|t| {
                            let s = scm(&sample_gaussian(&truth, k, seed.wrapping_add(t as u64))?)?;
                            Ok((s.max_eigenvalue(), s.trace()))
                        })
                        .collect::<Result<_>>()?;
                    let n = draws.len() as f64;
                    Ok((
                        p,
                        k,
                        draws.iter().map(|d| d.0).sum::<f64>() / n,
                        draws.iter().map(|d| d.1).sum::<f64>() / n,
                    ))
                })
                .collect::<Result<_>>()?
        }
    };

    fs::create_dir_all(out)?;
    let path = out.join("bounds.csv");
    let mut w = csv::Writer::from_path(&path).with_context(|| format!("writing {}", path.display()))?;
    w.write_record(["c_db", "K", "epsilon", "gamma", "relative_bound"])?;
    let mut rows = 0;
    for &(p, k, lambda_max_s, trace_s) in &stats {
        for &db in &c_dbs {
            let inputs = BoundInputs {
                p,
                k,
                sigma2: args.sigma2,
                c: args.sigma2 * 10f64.powf(db / 10.0),
                lambda_max_s,
                trace_s,
            };
            inputs.validate()?;
            let r = epsilon_bound(&inputs, inputs.regime());
            w.write_record([
                db.to_string(),
                k.to_string(),
                r.epsilon.to_string(),
                r.gamma.to_string(),
                r.relative_bound.to_string(),
            ])?;
            rows += 1;
        }
    }
    w.flush()?;
    println!("wrote {rows} rows to {}", path.display());
    Ok(rows)
}
