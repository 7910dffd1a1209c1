//! Subcommand implementations.

use std::path::{Path, PathBuf};

use anyhow::{anyhow, Context};
use rayon::prelude::*;
use serde_json::json;

use hcwalk::analysis::{self, CompareConfig, ComparisonReport};
use hcwalk::corrector::{solve_effective_model, EffectiveModel};
use hcwalk::environment::{CheckStatus, EnvError};
use hcwalk::simulate::{run_limit, run_walk, walk_positions_at, RngStream, Trajectory};
use hcwalk::testfn::TestTuple;
use hcwalk::Environment;

use crate::manifest::RunManifest;
use crate::model_doc;

/// Process exit codes: 1 validation, 2 solver, 3 I/O.
#[derive(Debug)]
pub enum CliError {
    Validation(String),
    Solver(String),
    Io(String),
}

impl CliError {
    pub fn code(&self) -> i32 {
        match self {
            CliError::Validation(_) => 1,
            CliError::Solver(_) => 2,
            CliError::Io(_) => 3,
        }
    }

    pub fn message(&self) -> &str {
        match self {
            CliError::Validation(m) | CliError::Solver(m) | CliError::Io(m) => m,
        }
    }
}

fn read_env(path: &Path) -> Result<Environment, CliError> {
    let text = std::fs::read_to_string(path)
        .map_err(|e| CliError::Io(format!("reading {}: {e}", path.display())))?;
    Environment::from_json(&text).map_err(|e| match e {
        EnvError::Schema(m) => CliError::Validation(format!("schema: {m}")),
        EnvError::Validation { check, detail } => {
            CliError::Validation(format!("check {check}: {detail}"))
        }
    })
}

fn ensure_dir(path: &Path) -> Result<(), CliError> {
    std::fs::create_dir_all(path)
        .map_err(|e| CliError::Io(format!("creating {}: {e}", path.display())))
}

fn write_io<T>(r: anyhow::Result<T>) -> Result<T, CliError> {
    r.map_err(|e| CliError::Io(format!("{e:#}")))
}

// ---------------------------------------------------------------------------
// validate
// ---------------------------------------------------------------------------

pub fn run_validate(env_path: &Path) -> Result<(), CliError> {
    let text = std::fs::read_to_string(env_path)
        .map_err(|e| CliError::Io(format!("reading {}: {e}", env_path.display())))?;
    let spec: hcwalk::EnvironmentSpec = match serde_json::from_str(&text) {
        Ok(s) => s,
        Err(e) => {
            println!("check schema: FAIL ({e})");
            return Err(CliError::Validation(format!("schema: {e}")));
        }
    };
    println!("check schema: PASS");
    let report = hcwalk::validate_spec(&spec);
    for check in &report.checks {
        let status = match check.status {
            CheckStatus::Pass => "PASS",
            CheckStatus::Fail => "FAIL",
            CheckStatus::Skipped => "SKIPPED",
        };
        println!("check {}: {} ({})", check.name, status, check.detail);
    }
    for warning in &report.warnings {
        println!("warning: {warning}");
    }
    match report.first_failure() {
        None => {
            println!("environment OK");
            Ok(())
        }
        Some(fail) => Err(CliError::Validation(format!(
            "check {}: {}",
            fail.name, fail.detail
        ))),
    }
}

// ---------------------------------------------------------------------------
// solve
// ---------------------------------------------------------------------------

pub fn run_solve(env_path: &Path, out: &Path, tolerance: f64) -> Result<(), CliError> {
    let env = read_env(env_path)?;
    let (model, correctors) =
        solve_effective_model(&env).map_err(|e| CliError::Solver(e.to_string()))?;
    if correctors.residuals.max() > tolerance {
        return Err(CliError::Solver(format!(
            "corrector residual {:e} exceeds tolerance {tolerance:e}",
            correctors.residuals.max()
        )));
    }
    ensure_dir(out)?;
    let doc = model_doc::to_doc(&env, &model, Some(&correctors));
    write_io(model_doc::write_model(&out.join("model.json"), &doc))?;
    write_io(write_theta_csv(&out.join("theta.csv"), &model))?;
    write_io(write_rates_csv(&out.join("rates.csv"), &model))?;

    let mut manifest = RunManifest::new(
        "solve",
        Some(&env_path.display().to_string()),
        json!({ "tolerance": tolerance }),
    );
    manifest.record_output("model.json");
    manifest.record_output("theta.csv");
    manifest.record_output("rates.csv");
    write_io(manifest.write(out))?;

    for (i, th) in model.theta.iter().enumerate() {
        println!("theta[fast:{}] = {:?}", i + 1, th.to_rows());
    }
    println!("lambda = {:?}", model.lambda);
    println!("max corrector residual = {:e}", correctors.residuals.max());
    println!("wrote {}", out.join("model.json").display());
    Ok(())
}

fn write_theta_csv(path: &Path, model: &EffectiveModel) -> anyhow::Result<()> {
    let mut w = csv::Writer::from_path(path).context("opening theta.csv")?;
    w.write_record(["component", "row", "col", "value"])?;
    for (i, th) in model.theta.iter().enumerate() {
        for r in 0..model.dim {
            for c in 0..model.dim {
                w.write_record(&[
                    format!("fast:{}", i + 1),
                    r.to_string(),
                    c.to_string(),
                    format!("{}", th[(r, c)]),
                ])?;
            }
        }
    }
    w.flush()?;
    Ok(())
}

fn write_rates_csv(path: &Path, model: &EffectiveModel) -> anyhow::Result<()> {
    let mut w = csv::Writer::from_path(path).context("opening rates.csv")?;
    w.write_record(["from", "to", "alpha", "lambda_from", "mu"])?;
    let k = model.n_labels();
    for i in 0..k {
        for j in 0..k {
            if i == j {
                continue;
            }
            w.write_record(&[
                model.label_name(i),
                model.label_name(j),
                format!("{}", model.alpha[(i, j)]),
                format!("{}", model.lambda[i]),
                format!("{}", model.mu[(i, j)]),
            ])?;
        }
    }
    w.flush()?;
    Ok(())
}

// ---------------------------------------------------------------------------
// simulate
// ---------------------------------------------------------------------------

pub struct SimulateArgs {
    pub env_path: PathBuf,
    pub model_path: Option<PathBuf>,
    pub kind: String,
    pub eps_list: Vec<f64>,
    pub t_final: f64,
    pub n_paths: usize,
    pub seed: u64,
    pub grid_points: usize,
    pub n_trajectories: usize,
    pub start: Option<Vec<i64>>,
    pub out: PathBuf,
}

pub fn run_simulate(args: &SimulateArgs) -> Result<(), CliError> {
    let env = read_env(&args.env_path)?;
    let start = args.start.clone().unwrap_or_else(|| env.base_cell());
    if start.len() != env.dim() {
        return Err(CliError::Validation(format!(
            "start point has {} coordinates, environment dimension is {}",
            start.len(),
            env.dim()
        )));
    }
    if args.t_final <= 0.0 {
        return Err(CliError::Validation("--t must be positive".into()));
    }
    ensure_dir(&args.out)?;

    let mut endpoints: Vec<(String, f64, usize, f64, Vec<f64>, usize)> = Vec::new();
    let mut trajectories: Vec<(String, f64, usize, Trajectory)> = Vec::new();

    match args.kind.as_str() {
        "micro" => {
            if args.eps_list.is_empty() {
                return Err(CliError::Validation(
                    "--eps is required for --kind micro".into(),
                ));
            }
            for &eps in &args.eps_list {
                let stream = RngStream::new(args.seed, 0);
                let results: Result<Vec<_>, _> = (0..args.n_paths)
                    .into_par_iter()
                    .map(|i| {
                        walk_positions_at(
                            &env,
                            eps,
                            &[args.t_final],
                            &start,
                            stream.offset(i as u64),
                        )
                    })
                    .collect();
                let results = results.map_err(|e| CliError::Validation(e.to_string()))?;
                for (i, states) in results.into_iter().enumerate() {
                    let (pos, label) = &states[0];
                    endpoints.push((
                        "micro".into(),
                        eps,
                        i,
                        args.t_final,
                        pos.clone(),
                        *label,
                    ));
                }
                for i in 0..args.n_trajectories.min(args.n_paths) {
                    let traj =
                        run_walk(&env, eps, args.t_final, &start, stream.offset(i as u64))
                            .map_err(|e| CliError::Validation(e.to_string()))?;
                    trajectories.push(("micro".into(), eps, i, traj));
                }
            }
        }
        "limit" => {
            let model = match &args.model_path {
                Some(p) => {
                    let (model, _) = write_io(model_doc::read_model(p))?;
                    model
                }
                None => {
                    solve_effective_model(&env)
                        .map_err(|e| CliError::Solver(e.to_string()))?
                        .0
                }
            };
            let k0 = env.component_index(&start);
            let x0 = vec![0.0; env.dim()];
            let grid: Vec<f64> = (1..=args.grid_points)
                .map(|i| args.t_final * i as f64 / args.grid_points as f64)
                .collect();
            let stream = RngStream::new(args.seed, 0);
            let results: Result<Vec<_>, _> = (0..args.n_paths)
                .into_par_iter()
                .map(|i| run_limit(&model, (&x0, k0), args.t_final, &grid, stream.offset(i as u64)))
                .collect();
            let results = results.map_err(|e| CliError::Solver(e.to_string()))?;
            for (i, traj) in results.into_iter().enumerate() {
                let (pos, label) = traj.state_at(args.t_final);
                endpoints.push(("limit".into(), 0.0, i, args.t_final, pos.to_vec(), label));
                if i < args.n_trajectories {
                    trajectories.push(("limit".into(), 0.0, i, traj));
                }
            }
        }
        other => {
            return Err(CliError::Validation(format!(
                "unknown --kind {other:?} (use micro or limit)"
            )));
        }
    }

    write_io(write_endpoints_csv(
        &args.out.join("endpoints.csv"),
        env.dim(),
        &endpoints,
    ))?;
    let mut manifest = RunManifest::new(
        "simulate",
        Some(&args.env_path.display().to_string()),
        json!({
            "kind": args.kind,
            "eps": args.eps_list,
            "t": args.t_final,
            "paths": args.n_paths,
            "seed": args.seed,
            "grid": args.grid_points,
            "trajectories": args.n_trajectories,
            "start": start,
        }),
    );
    manifest.record_output("endpoints.csv");
    if !trajectories.is_empty() {
        write_io(write_trajectories_csv(
            &args.out.join("trajectories.csv"),
            env.dim(),
            &trajectories,
        ))?;
        manifest.record_output("trajectories.csv");
    }
    write_io(manifest.write(&args.out))?;
    println!(
        "wrote {} endpoints ({} trajectories) to {}",
        endpoints.len(),
        trajectories.len(),
        args.out.display()
    );
    Ok(())
}

fn write_endpoints_csv(
    path: &Path,
    dim: usize,
    rows: &[(String, f64, usize, f64, Vec<f64>, usize)],
) -> anyhow::Result<()> {
    let mut w = csv::Writer::from_path(path).context("opening endpoints.csv")?;
    let mut header = vec!["kind".to_string(), "eps".into(), "path".into(), "t".into()];
    header.extend((1..=dim).map(|i| format!("x{i}")));
    header.push("label".into());
    w.write_record(&header)?;
    for (kind, eps, path_id, t, pos, label) in rows {
        let mut rec = vec![
            kind.clone(),
            format!("{eps}"),
            path_id.to_string(),
            format!("{t}"),
        ];
        rec.extend(pos.iter().map(|x| format!("{x}")));
        rec.push(label.to_string());
        w.write_record(&rec)?;
    }
    w.flush()?;
    Ok(())
}

fn write_trajectories_csv(
    path: &Path,
    dim: usize,
    trajs: &[(String, f64, usize, Trajectory)],
) -> anyhow::Result<()> {
    let mut w = csv::Writer::from_path(path).context("opening trajectories.csv")?;
    let mut header = vec!["kind".to_string(), "eps".into(), "path".into(), "t".into()];
    header.extend((1..=dim).map(|i| format!("x{i}")));
    header.push("label".into());
    w.write_record(&header)?;
    for (kind, eps, path_id, traj) in trajs {
        for i in 0..traj.len() {
            let mut rec = vec![
                kind.clone(),
                format!("{eps}"),
                path_id.to_string(),
                format!("{}", traj.times[i]),
            ];
            rec.extend(traj.positions[i].iter().map(|x| format!("{x}")));
            rec.push(traj.labels[i].to_string());
            w.write_record(&rec)?;
        }
    }
    w.flush()?;
    Ok(())
}

// ---------------------------------------------------------------------------
// compare / report
// ---------------------------------------------------------------------------

pub struct CompareArgs {
    pub env_path: PathBuf,
    pub eps_list: Vec<f64>,
    pub t_list: Vec<f64>,
    pub n_paths: usize,
    pub seed: u64,
    pub fns: Vec<String>,
    pub window_budget: usize,
    pub start: Option<Vec<i64>>,
    pub out: PathBuf,
}

pub fn run_compare(args: &CompareArgs) -> Result<(), CliError> {
    let env = read_env(&args.env_path)?;
    let (model, _) = solve_effective_model(&env).map_err(|e| CliError::Solver(e.to_string()))?;
    let n_labels = env.n_labels();
    let mut tuples = Vec::new();
    for name in &args.fns {
        match name.as_str() {
            "gaussian" => tuples.push(TestTuple::gaussian(n_labels, env.dim())),
            "cosine" => tuples.push(TestTuple::cosine(n_labels, env.dim())),
            other => {
                return Err(CliError::Validation(format!(
                    "unknown test function {other:?} (use gaussian, cosine)"
                )));
            }
        }
    }
    let mut cfg = CompareConfig::new(&env);
    cfg.eps_list = args.eps_list.clone();
    cfg.t_list = args.t_list.clone();
    cfg.n_paths = args.n_paths;
    cfg.seed = args.seed;
    cfg.window_budget = args.window_budget;
    if let Some(start) = &args.start {
        cfg.start_cell = start.clone();
    }
    for &eps in &cfg.eps_list {
        if eps > env.eps_max() {
            return Err(CliError::Validation(format!(
                "eps {eps} exceeds eps_max {}",
                env.eps_max()
            )));
        }
    }

    let report =
        analysis::compare_fdd(&env, &model, &tuples, &cfg).map_err(|e| match e {
            analysis::AnalysisError::Sim(s) => CliError::Validation(s.to_string()),
            other => CliError::Solver(other.to_string()),
        })?;
    ensure_dir(&args.out)?;
    let text = serde_json::to_string_pretty(&report)
        .map_err(|e| CliError::Io(format!("serializing report: {e}")))?;
    std::fs::write(args.out.join("report.json"), text + "\n")
        .map_err(|e| CliError::Io(format!("writing report.json: {e}")))?;
    write_io(write_report_csv(&args.out.join("report.csv"), &report))?;

    let mut manifest = RunManifest::new(
        "compare",
        Some(&args.env_path.display().to_string()),
        json!({
            "eps": cfg.eps_list,
            "t": cfg.t_list,
            "paths": cfg.n_paths,
            "seed": cfg.seed,
            "fns": args.fns,
            "window_budget": cfg.window_budget,
            "start": cfg.start_cell,
        }),
    );
    manifest.record_output("report.json");
    manifest.record_output("report.csv");
    write_io(manifest.write(&args.out))?;

    render_report(&report);
    Ok(())
}

fn write_report_csv(path: &Path, report: &ComparisonReport) -> anyhow::Result<()> {
    let mut w = csv::Writer::from_path(path).context("opening report.csv")?;
    w.write_record([
        "tuple",
        "t",
        "eps",
        "micro_mean",
        "micro_half_width",
        "micro_exact",
        "limit_mean",
        "limit_half_width",
        "discrepancy",
        "tolerance",
    ])?;
    for c in &report.cells {
        w.write_record(&[
            c.tuple.clone(),
            format!("{}", c.t),
            format!("{}", c.eps),
            format!("{}", c.micro_mean),
            format!("{}", c.micro_half_width),
            c.micro_exact.to_string(),
            format!("{}", c.limit_mean),
            format!("{}", c.limit_half_width),
            format!("{}", c.discrepancy),
            format!("{}", c.tolerance),
        ])?;
    }
    w.flush()?;
    Ok(())
}

pub fn render_report(report: &ComparisonReport) {
    println!(
        "{:<10} {:>6} {:>6} {:>13} {:>13} {:>11} {:>11}  route",
        "tuple", "t", "eps", "micro", "limit", "|diff|", "tol"
    );
    for c in &report.cells {
        println!(
            "{:<10} {:>6} {:>6} {:>13.6e} {:>13.6e} {:>11.4e} {:>11.4e}  {}",
            c.tuple,
            c.t,
            c.eps,
            c.micro_mean,
            c.limit_mean,
            c.discrepancy,
            c.tolerance,
            if c.micro_exact { "exact" } else { "mc" }
        );
    }
    if report.trends.is_empty() {
        println!("trend: insufficient data (need at least 3 eps values)");
    } else {
        for t in &report.trends {
            println!(
                "trend {} t={}: discrepancies {:?} decreasing within band: {}",
                t.tuple, t.t, t.discrepancies, t.decreasing_within_band
            );
        }
    }
    println!("verdict: {}", report.verdict);
}

pub fn run_report(report_path: &Path) -> Result<(), CliError> {
    let text = std::fs::read_to_string(report_path)
        .map_err(|e| CliError::Io(format!("reading {}: {e}", report_path.display())))?;
    let report: ComparisonReport = serde_json::from_str(&text)
        .map_err(|e| CliError::Io(format!("parsing report: {e}")))?;
    render_report(&report);
    Ok(())
}

pub fn parse_lattice_point(text: &str) -> anyhow::Result<Vec<i64>> {
    text.split(',')
        .map(|p| {
            p.trim()
                .parse::<i64>()
                .map_err(|e| anyhow!("bad coordinate {p:?}: {e}"))
        })
        .collect()
}
