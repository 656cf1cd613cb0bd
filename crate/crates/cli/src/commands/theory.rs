use kdaug::theory::{
    kde_lipschitz_bound, n_threshold, sweep_optimal_tau, tau_threshold, verify_theorem, x_u,
    GroundTruth, SweepOptions, TheoremInstance,
};
use serde::{Deserialize, Serialize};

use super::fmt_f64;
use crate::error::CliError;
use crate::output::{csv_text, Run};
use crate::Io;

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct VerifyConfig {
    instance: TheoremInstance,
    trials: usize,
}

#[derive(Serialize)]
struct VerifySummary {
    trials: usize,
    gap_ok: usize,
    gap_ok_fraction: f64,
    mean_l1_err: f64,
    mean_gap: f64,
}

pub fn verify(io: &Io) -> Result<(), CliError> {
    let (mut run, cfg) = Run::start::<VerifyConfig>("theory verify", io)?;
    let reports = verify_theorem(&cfg.instance, cfg.trials)?;
    let rows: Vec<Vec<String>> = reports
        .iter()
        .map(|r| {
            vec![
                r.trial.to_string(),
                r.n.to_string(),
                fmt_f64(r.tau),
                fmt_f64(r.x_u),
                fmt_f64(r.tau_thresh),
                fmt_f64(r.n_thresh),
                fmt_f64(r.l1_err),
                fmt_f64(r.eps_t),
                fmt_f64(r.eps_s),
                fmt_f64(r.lambda),
                r.gap_ok.to_string(),
                fmt_f64(r.l1_stderr),
                fmt_f64(r.lambda_as_written),
            ]
        })
        .collect();
    let header = [
        "trial",
        "n",
        "tau",
        "x_u",
        "tau_thresh",
        "n_thresh",
        "l1_err",
        "eps_T",
        "eps_S",
        "lambda",
        "gap_ok",
        "l1_stderr",
        "lambda_as_written",
    ];
    run.write("theorem.csv", csv_text(&header, &rows)?)?;
    let n = reports.len() as f64;
    let ok = reports.iter().filter(|r| r.gap_ok).count();
    let summary = VerifySummary {
        trials: reports.len(),
        gap_ok: ok,
        gap_ok_fraction: ok as f64 / n,
        mean_l1_err: reports.iter().map(|r| r.l1_err).sum::<f64>() / n,
        mean_gap: reports.iter().map(|r| r.eps_t - r.eps_s).sum::<f64>() / n,
    };
    run.write_json("summary.json", &summary)?;
    println!(
        "gap bound held in {}/{} trials; mean L1 error {:.4}",
        ok, summary.trials, summary.mean_l1_err
    );
    run.finish()
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct SweepConfig {
    gt: GroundTruth,
    n_values: Vec<usize>,
    tau_grid: Vec<f64>,
    trials: usize,
    seed: u64,
    #[serde(default)]
    options: SweepOptions,
}

pub fn sweep_tau(io: &Io) -> Result<(), CliError> {
    let (mut run, cfg) = Run::start::<SweepConfig>("theory sweep-tau", io)?;
    let sweep = sweep_optimal_tau(
        &cfg.gt,
        &cfg.n_values,
        &cfg.tau_grid,
        cfg.trials,
        cfg.seed,
        &cfg.options,
    )?;
    let long: Vec<Vec<String>> = sweep
        .rows
        .iter()
        .map(|r| vec![r.n.to_string(), fmt_f64(r.tau), fmt_f64(r.mean_eps_t)])
        .collect();
    run.write(
        "sweep_long.csv",
        csv_text(&["n", "tau", "mean_eps_T"], &long)?,
    )?;

    let mut header = vec!["n".to_string()];
    header.extend(cfg.tau_grid.iter().map(|t| format!("tau_{}", fmt_f64(*t))));
    header.push("optimal_tau".into());
    let header_refs: Vec<&str> = header.iter().map(String::as_str).collect();
    let k = cfg.tau_grid.len();
    let wide: Vec<Vec<String>> = sweep
        .optimal
        .iter()
        .enumerate()
        .map(|(a, &(n, best))| {
            let mut row = vec![n.to_string()];
            row.extend(
                sweep.rows[a * k..(a + 1) * k]
                    .iter()
                    .map(|r| fmt_f64(r.mean_eps_t)),
            );
            row.push(fmt_f64(best));
            row
        })
        .collect();
    let table = csv_text(&header_refs, &wide)?;
    run.write("sweep_tau.csv", &table)?;
    for &(n, best) in &sweep.optimal {
        println!("n = {n}: optimal tau {best}");
    }
    run.finish()
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct BoundsConfig {
    d: usize,
    eps: f64,
    delta: f64,
    tau: f64,
    /// Adds the kernel-sum Lipschitz bound for this many centers.
    #[serde(default)]
    n: Option<usize>,
}

#[derive(Serialize)]
struct Bounds {
    x_u: f64,
    tau_threshold: f64,
    n_threshold: f64,
    #[serde(skip_serializing_if = "Option::is_none")]
    kde_lipschitz_bound: Option<f64>,
}

pub fn bounds(io: &Io) -> Result<(), CliError> {
    let (mut run, cfg) = Run::start::<BoundsConfig>("theory bounds", io)?;
    if cfg.d < 2 {
        return Err(CliError::config("d must be at least 2"));
    }
    if !(cfg.eps > 0.0 && cfg.eps < 1.0) {
        return Err(CliError::config("eps must lie in (0, 1)"));
    }
    if !(cfg.delta > 0.0 && cfg.delta < 1.0) {
        return Err(CliError::config("delta must lie in (0, 1)"));
    }
    if !(cfg.tau > 0.0 && cfg.tau.is_finite()) {
        return Err(CliError::config("tau must be positive"));
    }
    if cfg.n == Some(0) {
        return Err(CliError::config("n must be at least 1"));
    }
    let b = Bounds {
        x_u: x_u(cfg.d, cfg.eps),
        tau_threshold: tau_threshold(cfg.d, cfg.eps),
        n_threshold: n_threshold(cfg.d, cfg.eps, cfg.delta, cfg.tau),
        kde_lipschitz_bound: cfg.n.map(|n| kde_lipschitz_bound(n, cfg.tau)),
    };
    println!("x_u = {}", b.x_u);
    println!("tau_threshold = {}", b.tau_threshold);
    println!("n_threshold = {}", b.n_threshold);
    if let Some(v) = b.kde_lipschitz_bound {
        println!("kde_lipschitz_bound = {v}");
    }
    run.write_json("bounds.json", &b)?;
    run.finish()
}
