use std::path::Path;

use anyhow::{bail, Context, Result};
use serde::Serialize;

use penreg::concentration::{run_concentration, CoverageInput};
use penreg::constants::{re_type_constant_with, ConstantRow, ReStatus};
use penreg::geometry::{contraction_check, projection_identity_check, GeometryConfig};
use penreg::model::{replication_seed, sample_observation, ProblemDocument};
use penreg::penalties::{Penalty, PenaltyDocument};
use penreg::solvers::{solve, stationarity_certificate, SolverResult, StationarityReport};
use penreg::CheckReport;

use crate::config::{
    build_penalty, build_problem, groups_touching, natural_cone, Built, ExperimentConfig,
};
use crate::output::{flag, float, Sink};

/// What a command reports back to `main`.
pub struct Outcome {
    pub pass: bool,
    pub design_seed: Option<u64>,
}

fn setup(cfg: &ExperimentConfig, base_dir: &Path) -> Result<(Built, Penalty)> {
    let built = build_problem(cfg.problem.as_ref().expect("validated"), base_dir)?;
    let pen = build_penalty(cfg.penalty.as_ref().expect("validated"), &built.problem)?;
    Ok((built, pen))
}

fn check_rows(reports: &[CheckReport]) -> Vec<Vec<String>> {
    reports
        .iter()
        .map(|r| {
            vec![
                r.check.clone(),
                r.instances.to_string(),
                float(r.worst_slack),
                flag(r.pass),
            ]
        })
        .collect()
}

const CHECK_HEADER: [&str; 4] = ["check", "instances", "worst_slack", "pass"];

#[derive(Serialize)]
struct SolutionDocument<'a> {
    penalty: PenaltyDocument,
    result: &'a SolverResult,
    fitted: Vec<f64>,
    iters: usize,
    converged: bool,
    gap_tol: f64,
    stationarity: StationarityReport,
}

pub fn solve_cmd(cfg: &ExperimentConfig, base_dir: &Path, sink: &mut Sink) -> Result<Outcome> {
    let (built, pen) = setup(cfg, base_dir)?;
    let problem = &built.problem;
    let obs = match built.observation {
        Some(obs) => obs,
        None => sample_observation(problem, cfg.seed)?,
    };
    let res = solve(&obs.y, &problem.design, &pen, &cfg.solver)?;
    let cert = stationarity_certificate(&res, &obs.y, &problem.design, &pen)?;

    let mut gap = CheckReport::new("duality_gap");
    gap.record(res.gap_tol - res.gap);
    let mut stationarity = CheckReport::new("stationarity");
    stationarity.record(if cert.pass {
        cert.alignment_slack.unwrap_or(0.0).max(0.0)
    } else {
        -1.0
    });
    let reports = [gap, stationarity];
    sink.json(
        "problem.json",
        &ProblemDocument::from_problem(problem, Some(&obs)),
    )?;
    sink.json(
        "solution.json",
        &SolutionDocument {
            penalty: PenaltyDocument::from(pen.clone()),
            result: &res,
            fitted: res.fitted.iter().copied().collect(),
            iters: res.iters,
            converged: res.converged,
            gap_tol: res.gap_tol,
            stationarity: cert,
        },
    )?;
    sink.csv("checks.csv", &CHECK_HEADER, &check_rows(&reports))?;
    println!(
        "solve: {} iterations, gap {:.3e} (target {:.3e}), stationarity {}",
        res.iters,
        res.gap,
        res.gap_tol,
        if cert.pass { "pass" } else { "fail" }
    );
    Ok(Outcome {
        pass: res.converged && cert.pass,
        design_seed: built.design_seed,
    })
}

pub fn geometry_cmd(cfg: &ExperimentConfig, base_dir: &Path, sink: &mut Sink) -> Result<Outcome> {
    let (built, pen) = setup(cfg, base_dir)?;
    let problem = &built.problem;
    let opts = &cfg.geometry;
    let gcfg = GeometryConfig {
        solver: cfg.solver.clone().with_rel_gap(opts.rel_gap_tol),
        dykstra: opts.dykstra,
        tol: opts.tol,
        samples: opts.samples,
        seed: cfg.seed,
    };
    let mut identity = CheckReport::new("projection_identity");
    for i in 0..opts.instances {
        let obs = sample_observation(problem, replication_seed(cfg.seed, i as u64))?;
        identity.merge(&projection_identity_check(problem, &obs, &pen, &gcfg)?);
    }
    let offset = opts.instances as u64;
    let pairs = (0..opts.pairs as u64)
        .map(|k| {
            let a = sample_observation(problem, replication_seed(cfg.seed, offset + 2 * k))?;
            let b = sample_observation(problem, replication_seed(cfg.seed, offset + 2 * k + 1))?;
            Ok((a.y, b.y))
        })
        .collect::<Result<Vec<_>>>()?;
    let mut reports = vec![identity];
    if !pairs.is_empty() {
        reports.extend(contraction_check(&problem.design, &pen, &pairs, &gcfg)?);
    }
    sink.csv("geometry.csv", &CHECK_HEADER, &check_rows(&reports))?;
    for r in &reports {
        println!(
            "{}: {} instances, worst slack {:.3e}, {}",
            r.check,
            r.instances,
            r.worst_slack,
            if r.pass { "pass" } else { "fail" }
        );
    }
    Ok(Outcome {
        pass: reports.iter().all(|r| r.pass),
        design_seed: built.design_seed,
    })
}

/// Oracle support in the penalty's indexing: the configured one, else the
/// planted support (mapped to groups for the group LASSO).
fn oracle_support(cfg: &ExperimentConfig, built: &Built, pen: &Penalty) -> Result<Vec<usize>> {
    if let Some(s) = cfg.coverage.as_ref().and_then(|c| c.support.clone()) {
        return Ok(s);
    }
    if built.support.is_empty() {
        bail!("field `coverage.support`: required when the problem has no planted support");
    }
    Ok(match pen {
        Penalty::GroupL2 { partition, .. } => groups_touching(partition, &built.support),
        _ => built.support.clone(),
    })
}

pub fn constants_cmd(cfg: &ExperimentConfig, base_dir: &Path, sink: &mut Sink) -> Result<Outcome> {
    let (built, pen) = setup(cfg, base_dir)?;
    let specs = match &cfg.constants.specs {
        Some(specs) => specs.clone(),
        None => {
            let support = oracle_support(cfg, &built, &pen)?;
            cfg.constants
                .c0_grid
                .iter()
                .map(|&c0| natural_cone(&pen, &support, c0))
                .collect::<Result<_>>()?
        }
    };
    let mut rows = Vec::with_capacity(specs.len());
    let mut pass = true;
    for (k, spec) in specs.iter().enumerate() {
        let est = re_type_constant_with(&built.problem.design, spec, &cfg.constants.re)
            .with_context(|| format!("field `constants.specs[{k}]`"))?;
        pass &= est.value.is_finite() && est.cone_residual <= 1e-9;
        let row = ConstantRow::new(spec, &est);
        println!(
            "{} S={} c0={}: {:.6} ({})",
            row.kind, row.support, row.c0, row.value, row.status
        );
        rows.push(vec![
            row.kind,
            row.support,
            float(row.c0),
            float(row.value),
            row.status,
            row.starts.to_string(),
        ]);
    }
    sink.csv(
        "constants.csv",
        &["kind", "S", "c0", "value", "status", "starts"],
        &rows,
    )?;
    Ok(Outcome {
        pass,
        design_seed: built.design_seed,
    })
}

#[derive(Serialize)]
struct SimulationSummary {
    replications: usize,
    non_converged: usize,
    failures: Vec<String>,
    median: f64,
    mean: f64,
    coverage_constant: Option<f64>,
    coverage_status: Option<&'static str>,
    certifying: Option<bool>,
    pass: bool,
}

pub fn simulate_cmd(cfg: &ExperimentConfig, base_dir: &Path, sink: &mut Sink) -> Result<Outcome> {
    let (built, pen) = setup(cfg, base_dir)?;
    let problem = &built.problem;
    let mut mc = cfg.monte_carlo.clone();
    mc.base_seed = cfg.seed;

    let coverage = if cfg.coverage.is_some() || !built.support.is_empty() {
        let ccfg = cfg.coverage.clone().unwrap_or_default();
        let support = oracle_support(cfg, &built, &pen)?;
        let (constant, status) = match ccfg.constant {
            Some(c) => (c, ReStatus::Exact),
            None => {
                let spec = natural_cone(&pen, &support, ccfg.c0)?;
                let est = re_type_constant_with(&problem.design, &spec, &cfg.constants.re)
                    .context("estimating the coverage constant")?;
                (est.value, est.status)
            }
        };
        Some(CoverageInput {
            support,
            constant,
            status,
        })
    } else {
        None
    };

    let report = run_concentration(problem, &pen, &cfg.solver, &mc, coverage.as_ref())?;

    let rows: Vec<Vec<String>> = report
        .samples
        .rows
        .iter()
        .map(|r| {
            vec![
                r.rep.to_string(),
                r.seed.to_string(),
                float(r.error),
                flag(r.converged),
                float(r.gap),
            ]
        })
        .collect();
    sink.csv(
        "errors.csv",
        &["rep", "seed", "error", "converged", "gap"],
        &rows,
    )?;

    let rows: Vec<Vec<String>> = report
        .tail_rows
        .iter()
        .map(|r| {
            vec![
                float(r.t),
                float(r.empirical),
                float(r.bound),
                float(r.slack),
                flag(r.pass),
            ]
        })
        .collect();
    sink.csv(
        "tails.csv",
        &["t", "empirical", "bound", "slack", "pass"],
        &rows,
    )?;

    let rows: Vec<Vec<String>> = report
        .mean_tail_rows
        .iter()
        .map(|r| {
            vec![
                r.side.clone(),
                float(r.t),
                float(r.empirical),
                float(r.bound),
                float(r.slack),
                flag(r.pass),
            ]
        })
        .collect();
    sink.csv(
        "tails_mean.csv",
        &["side", "t", "empirical", "bound", "slack", "pass"],
        &rows,
    )?;

    if let Some(cov) = &report.coverage {
        let rows: Vec<Vec<String>> = cov
            .rows
            .iter()
            .map(|r| {
                vec![
                    float(r.delta),
                    float(r.bound),
                    float(r.violations),
                    flag(r.pass),
                ]
            })
            .collect();
        sink.csv(
            "coverage.csv",
            &["delta", "bound", "violations", "pass"],
            &rows,
        )?;
        let e = &cov.expectation;
        sink.csv(
            "expectation.csv",
            &["mean", "std_error", "bound", "slack", "pass"],
            &[vec![
                float(e.mean),
                float(e.std_error),
                float(e.bound),
                float(e.slack),
                flag(e.pass),
            ]],
        )?;
    }

    let rows: Vec<Vec<String>> = report
        .event_rows
        .iter()
        .map(|r| vec![r.event.clone(), float(r.frequency), flag(r.pass)])
        .collect();
    sink.csv("events.csv", &["event", "frequency", "pass"], &rows)?;

    sink.json(
        "summary.json",
        &SimulationSummary {
            replications: report.samples.rows.len(),
            non_converged: report.samples.non_converged,
            failures: report.samples.failures.clone(),
            median: report.median_hat,
            mean: report.mean_hat,
            coverage_constant: coverage.as_ref().map(|c| c.constant),
            coverage_status: coverage.as_ref().map(|c| c.status.as_str()),
            certifying: report.coverage.as_ref().map(|c| c.certifying),
            pass: report.pass,
        },
    )?;

    println!(
        "simulate: {} replications, median {:.6}, mean {:.6}, non-converged {}",
        report.samples.rows.len(),
        report.median_hat,
        report.mean_hat,
        report.samples.non_converged
    );
    for r in &report.tail_rows {
        println!(
            "  tail t={}: {:.4} <= {:.4} + {:.4} {}",
            r.t,
            r.empirical,
            r.bound,
            r.slack,
            if r.pass { "pass" } else { "FAIL" }
        );
    }
    if let Some(cov) = &report.coverage {
        for r in &cov.rows {
            println!(
                "  coverage δ={}: bound {:.4}, violations {:.4} {}",
                r.delta,
                r.bound,
                r.violations,
                if r.pass { "pass" } else { "FAIL" }
            );
        }
    }
    for r in &report.event_rows {
        println!(
            "  event {}: {:.4} {}",
            r.event,
            r.frequency,
            if r.pass { "pass" } else { "FAIL" }
        );
    }
    Ok(Outcome {
        pass: report.pass,
        design_seed: built.design_seed,
    })
}

/// Artifacts with a `pass` column that `report` aggregates.
const CHECKED_FILES: [&str; 7] = [
    "checks.csv",
    "geometry.csv",
    "tails.csv",
    "tails_mean.csv",
    "coverage.csv",
    "expectation.csv",
    "events.csv",
];

#[derive(Serialize)]
struct FileSummary {
    file: String,
    rows: usize,
    failed: usize,
}

#[derive(Serialize)]
struct ReportDocument {
    files: Vec<FileSummary>,
    pass: bool,
}

pub fn report_cmd(input: &Path, sink: &mut Sink) -> Result<Outcome> {
    let mut files = Vec::new();
    for name in CHECKED_FILES {
        let path = input.join(name);
        if !path.exists() {
            continue;
        }
        let mut reader =
            csv::Reader::from_path(&path).with_context(|| format!("reading {}", path.display()))?;
        let col = reader
            .headers()?
            .iter()
            .position(|h| h == "pass")
            .with_context(|| format!("{}: no `pass` column", path.display()))?;
        let (mut rows, mut failed) = (0, 0);
        for record in reader.records() {
            let record = record.with_context(|| format!("reading {}", path.display()))?;
            rows += 1;
            match &record[col] {
                "true" => {}
                "false" => failed += 1,
                other => bail!("{}: bad `pass` value {other:?}", path.display()),
            }
        }
        println!("{name}: {rows} rows, {failed} failed");
        files.push(FileSummary {
            file: name.to_string(),
            rows,
            failed,
        });
    }
    if files.is_empty() {
        bail!(
            "field `report_dir`: no artifacts found in {}",
            input.display()
        );
    }
    let pass = files.iter().all(|f| f.failed == 0);
    sink.json("report.json", &ReportDocument { files, pass })?;
    Ok(Outcome {
        pass,
        design_seed: None,
    })
}
