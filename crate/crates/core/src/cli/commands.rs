//! The simulate → train → test pipeline and the reproduction runner.

use super::config::{ExperimentConfig, TestMode};
use super::io::{self, fmt_f};
use super::manifest::{file_sha256, RunManifest, MANIFEST};
use super::presets::{grid, ratio_label, Scale, Scenario};
use crate::eval::{
    coverage_radius, empirical_coverage, mean, median, r_squared, sin2_theta_series, MetricsReport,
};
use crate::manifold::{projection_from_basis, ProjectionMatrix, StiefelPoint};
use crate::model::{
    generate_tasks, gibbs_meta_train_resumable, linear::draw_true_coefficient, meta_test_posterior,
    posterior_predictive, variance_proportion, ChainState, Kernel, MetaPrior, NoiseVariance,
    PosteriorDraws, TaskData, Truth,
};
use crate::rng::{tag, RngStream};
use crate::samplers::mvn::std_normal_vec;
use crate::{Error, Mat, Result, Vector};
use rand::{Rng, RngCore};
use rand_distr::StandardNormal;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use std::collections::BTreeMap;
use std::path::{Path, PathBuf};
use std::time::Instant;

pub fn version_string() -> String {
    format!("metasub {}", env!("CARGO_PKG_VERSION"))
}

pub fn stage_stream(cfg: &ExperimentConfig, stage: u64) -> RngStream {
    RngStream::new(cfg.seed).child(&[stage])
}

/// Simulated training tasks, ground truth and meta-test tasks.
#[derive(Clone, Debug)]
pub struct Simulation {
    pub tasks: Vec<TaskData>,
    pub truth: Truth,
    pub tests: Vec<TaskData>,
    pub test_betas: Vec<Vector>,
}

/// Draws the training tasks, then one meta-test task of n★ rows per
/// replication from the same true prior.
pub fn simulate(cfg: &ExperimentConfig) -> Result<Simulation> {
    cfg.validate()?;
    let st = stage_stream(cfg, tag::SIMULATE);
    let (tasks, truth) = generate_tasks(&cfg.sim, &mut st.child(&[0]).rng())?;
    let n = cfg.metatest.n_star;
    let sd = cfg.sim.sigma2_0.sqrt();
    let mut tests = Vec::with_capacity(cfg.metatest.replications);
    let mut test_betas = Vec::with_capacity(cfg.metatest.replications);
    for r in 0..cfg.metatest.replications {
        let mut rng = st.child(&[1, r as u64]).rng();
        let beta = draw_true_coefficient(&truth.z0, cfg.sim.phi0.max(1e-12), &mut rng);
        let x = Mat::from_fn(n, cfg.sim.p, |_, _| rng.sample::<f64, _>(StandardNormal));
        let y = &x * &beta + std_normal_vec(n, &mut rng) * sd;
        tests.push(TaskData::new(
            r,
            y,
            x,
            NoiseVariance::Known(cfg.sim.sigma2_0),
        )?);
        test_betas.push(beta);
    }
    Ok(Simulation {
        tasks,
        truth,
        tests,
        test_betas,
    })
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TruthSummary {
    pub s: usize,
    pub p: usize,
    pub k: usize,
    pub phi0: f64,
    pub sigma2: f64,
}

fn rows_of(vs: &[Vector]) -> Mat {
    let p = vs.first().map_or(0, |v| v.len());
    Mat::from_fn(vs.len(), p, |i, j| vs[i][j])
}

/// Writes `tasks/`, `test/` and the truth files; returns the relative paths written.
pub fn write_simulation(out: &Path, sim: &Simulation) -> Result<Vec<String>> {
    let mut files = Vec::new();
    for t in &sim.tasks {
        io::write_task(&out.join("tasks"), t)?;
        files.push(format!("tasks/{}", io::task_file_name(t.id)));
    }
    for t in &sim.tests {
        io::write_task(&out.join("test"), t)?;
        files.push(format!("test/{}", io::task_file_name(t.id)));
    }
    io::write_matrix(&out.join("truth_z0.csv"), "truth-z0", sim.truth.z0.matrix())?;
    io::write_matrix(&out.join("truth_p0.csv"), "truth-p0", sim.truth.p0.matrix())?;
    io::write_matrix(
        &out.join("truth_beta0.csv"),
        "truth-beta0",
        &rows_of(&sim.truth.beta0),
    )?;
    io::write_matrix(
        &out.join("truth_test_beta.csv"),
        "truth-test-beta",
        &rows_of(&sim.test_betas),
    )?;
    io::write_json(
        &out.join("truth.json"),
        &TruthSummary {
            s: sim.tasks.len(),
            p: sim.truth.z0.p(),
            k: sim.truth.z0.k(),
            phi0: sim.truth.phi0,
            sigma2: sim.truth.sigma2,
        },
    )?;
    files.extend(
        [
            "truth_z0.csv",
            "truth_p0.csv",
            "truth_beta0.csv",
            "truth_test_beta.csv",
            "truth.json",
        ]
        .iter()
        .map(|s| s.to_string()),
    );
    Ok(files)
}

fn finish(
    out: &Path,
    cfg: &ExperimentConfig,
    stage: &str,
    stream: &RngStream,
    t0: Instant,
    files: &[String],
) -> Result<()> {
    let mut m = RunManifest::open(out, cfg);
    m.record(stage, stream, t0.elapsed().as_secs_f64(), out, files)?;
    m.save(out)
}

pub fn cmd_simulate(cfg: &ExperimentConfig) -> Result<()> {
    let t0 = Instant::now();
    let sim = simulate(cfg)?;
    let files = write_simulation(&cfg.out, &sim)?;
    log::info!(
        "simulated {} tasks and {} test tasks into {}",
        sim.tasks.len(),
        sim.tests.len(),
        cfg.out.display()
    );
    finish(
        &cfg.out,
        cfg,
        "simulate",
        &stage_stream(cfg, tag::SIMULATE),
        t0,
        &files,
    )
}

/// Meta-training. With `resume`, continues from `state` and keeps the draws
/// already recorded before it.
pub fn train(
    cfg: &ExperimentConfig,
    tasks: &[TaskData],
    resume: Option<(ChainState, PosteriorDraws)>,
) -> Result<(PosteriorDraws, ChainState)> {
    cfg.validate()?;
    if let Some(t) = tasks.iter().find(|t| t.p() != cfg.sim.p) {
        return Err(Error::Dimension(format!(
            "task {} has p = {} but the config says p = {}",
            t.id,
            t.p(),
            cfg.sim.p
        )));
    }
    let chain = cfg.chain();
    let stream = stage_stream(cfg, tag::TRAIN);
    let (state, mut earlier) = match resume {
        Some((s, d)) => {
            if d.burnin != chain.burnin
                || d.thin != chain.thin
                || d.p != cfg.sim.p
                || d.k != cfg.sim.k
            {
                return Err(Error::Config(
                    "resume: burn-in, thinning or shape differ from the saved run".into(),
                ));
            }
            if s.next_iteration > chain.iters {
                return Err(Error::Config(format!(
                    "resume: saved chain is already at iteration {} > iters = {}",
                    s.next_iteration, chain.iters
                )));
            }
            let keep: Vec<_> = d
                .draws
                .into_iter()
                .filter(|x| x.iteration < s.next_iteration)
                .collect();
            (Some(s), keep)
        }
        None => (None, Vec::new()),
    };
    let (mut draws, end) =
        gibbs_meta_train_resumable(tasks, &cfg.hyper(), cfg.sim.k, &chain, &stream, state, None)?;
    earlier.append(&mut draws.draws);
    draws.draws = earlier;
    Ok((draws, end))
}

pub fn noise_mode(cfg: &ExperimentConfig) -> NoiseVariance {
    if cfg.sampler.infer_sigma2 {
        NoiseVariance::Infer
    } else {
        NoiseVariance::Known(cfg.sim.sigma2_0)
    }
}

pub fn cmd_train(cfg: &ExperimentConfig, resume: bool) -> Result<()> {
    let t0 = Instant::now();
    let tasks = io::read_tasks(&cfg.tasks_dir(), noise_mode(cfg))?;
    if tasks.len() != cfg.sim.s {
        log::warn!(
            "config says S = {} but {} task files were found",
            cfg.sim.s,
            tasks.len()
        );
    }
    let prev = if resume {
        Some((io::read_state(&cfg.out)?, io::read_draws(&cfg.out)?))
    } else {
        None
    };
    let (draws, end) = train(cfg, &tasks, prev)?;
    io::write_draws(&cfg.out, &draws)?;
    io::write_state(&cfg.out, &end)?;
    log::info!("kept {} draws", draws.len());
    let files: Vec<String> = [io::DRAWS_Z, io::DRAWS_PHI, io::DRAWS_META, io::CHAIN_STATE]
        .iter()
        .map(|s| s.to_string())
        .collect();
    finish(
        &cfg.out,
        cfg,
        "train",
        &stage_stream(cfg, tag::TRAIN),
        t0,
        &files,
    )
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ReplicationMetrics {
    pub replication: usize,
    pub r_squared: f64,
    pub coverage_radius: f64,
    pub covered: f64,
    pub trace_sigma_y: f64,
}

#[derive(Clone, Debug, PartialEq)]
pub struct TestOutput {
    pub rows: Vec<ReplicationMetrics>,
    pub report: MetricsReport,
    /// (replication, validation row, y, ŷ).
    pub predictions: Vec<(usize, usize, f64, f64)>,
}

fn split(task: &TaskData, cfg: &ExperimentConfig) -> Result<(TaskData, Mat, Vector)> {
    let m = &cfg.metatest;
    let need = if m.validation_on_train {
        m.train
    } else {
        m.train + m.validation
    };
    if task.n() < need {
        return Err(Error::Dimension(format!(
            "test task {} has {} rows, need {need}",
            task.id,
            task.n()
        )));
    }
    let train_rows: Vec<usize> = (0..m.train).collect();
    let val_rows: Vec<usize> = if m.validation_on_train {
        train_rows.clone()
    } else {
        (m.train..m.train + m.validation).collect()
    };
    let tr = TaskData::new(
        task.id,
        task.y.select_rows(train_rows.iter()),
        task.x.select_rows(train_rows.iter()),
        NoiseVariance::Known(cfg.sim.sigma2_0),
    )?;
    Ok((
        tr,
        task.x.select_rows(val_rows.iter()),
        task.y.select_rows(val_rows.iter()),
    ))
}

/// Meta-tests every replication task against the learned prior.
pub fn meta_test(
    cfg: &ExperimentConfig,
    draws: &PosteriorDraws,
    tests: &[TaskData],
    p0: Option<&ProjectionMatrix>,
) -> Result<TestOutput> {
    cfg.validate()?;
    if draws.is_empty() {
        return Err(Error::EmptyDraws);
    }
    if tests.len() < cfg.metatest.replications {
        return Err(Error::Dimension(format!(
            "{} replications configured but {} test tasks found",
            cfg.metatest.replications,
            tests.len()
        )));
    }
    let point = match cfg.metatest.mode {
        TestMode::Point => Some(MetaPrior::point_estimate(draws)?),
        TestMode::Mixture => None,
    };
    let prior = point.clone().unwrap_or(MetaPrior::Draws(draws));
    let sigma2 = cfg.sim.sigma2_0;
    let st = stage_stream(cfg, tag::TEST);
    let per: Vec<(ReplicationMetrics, Vec<(usize, usize, f64, f64)>)> = tests
        [..cfg.metatest.replications]
        .par_iter()
        .enumerate()
        .map(|(r, task)| {
            let (tr, x_val, y_val) = split(task, cfg)?;
            let rs = st.child(&[r as u64]);
            let betas = meta_test_posterior(&tr, &prior, draws.len(), &rs.child(&[0]))?;
            let pred = posterior_predictive(&x_val, &betas, sigma2, &mut rs.child(&[1]).rng())?;
            let radius = coverage_radius(&pred.y_pred, &pred.y_hat, cfg.metatest.level)?;
            let rows = (0..y_val.len())
                .map(|i| (r, i, y_val[i], pred.y_hat[i]))
                .collect();
            Ok((
                ReplicationMetrics {
                    replication: r,
                    r_squared: r_squared(&y_val, &pred.y_hat)?,
                    coverage_radius: radius,
                    covered: empirical_coverage(radius, std::slice::from_ref(&y_val), &pred.y_hat)?,
                    trace_sigma_y: pred.trace(),
                },
                rows,
            ))
        })
        .collect::<Result<_>>()?;
    let rows: Vec<ReplicationMetrics> = per.iter().map(|(m, _)| m.clone()).collect();
    let predictions = per.into_iter().flat_map(|(_, p)| p).collect();
    let col = |f: fn(&ReplicationMetrics) -> f64| mean(&rows.iter().map(f).collect::<Vec<_>>());
    let phi_hat = match &prior {
        MetaPrior::Point { phi, .. } => *phi,
        MetaPrior::Draws(d) => mean(&d.phis()),
    };
    let report = MetricsReport {
        sin2_theta1: match p0 {
            Some(p0) => sin2_theta_series(draws, p0)?,
            None => Vec::new(),
        },
        r_squared: col(|m| m.r_squared),
        coverage_radius: col(|m| m.coverage_radius),
        coverage_probability: col(|m| m.covered),
        trace_sigma_y: col(|m| m.trace_sigma_y),
        variance_proportion: variance_proportion(draws.k, draws.p, phi_hat),
    };
    Ok(TestOutput {
        rows,
        report,
        predictions,
    })
}

fn read_truth(out: &Path) -> Option<(ProjectionMatrix, TruthSummary)> {
    let summary: TruthSummary = io::read_json(&out.join("truth.json")).ok()?;
    let z0 = io::read_matrix(&out.join("truth_z0.csv")).ok()?;
    let p0 = projection_from_basis(&StiefelPoint::new(z0).ok()?).ok()?;
    Some((p0, summary))
}

pub fn write_sin2(path: &Path, draws: &PosteriorDraws, sin2: &[f64]) -> Result<()> {
    let rows: Vec<Vec<String>> = draws
        .draws
        .iter()
        .zip(sin2)
        .enumerate()
        .map(|(i, (d, s))| {
            vec![
                i.to_string(),
                d.iteration.to_string(),
                fmt_f(*s),
                fmt_f(s.ln()),
            ]
        })
        .collect();
    io::write_csv(
        path,
        "sin2",
        &[
            "draw".into(),
            "iteration".into(),
            "sin2_theta1".into(),
            "log_sin2_theta1".into(),
        ],
        &rows,
    )
}

#[derive(Serialize)]
struct Summary<'a> {
    mode: &'a str,
    level: f64,
    replications: usize,
    phi0: Option<f64>,
    r_squared: f64,
    coverage_radius: f64,
    coverage_probability: f64,
    trace_sigma_y: f64,
    variance_proportion: f64,
    median_sin2_theta1: Option<f64>,
}

pub fn write_test_output(
    out: &Path,
    cfg: &ExperimentConfig,
    res: &TestOutput,
    draws: &PosteriorDraws,
    phi0: Option<f64>,
) -> Result<Vec<String>> {
    let phi0_s = fmt_f(phi0.unwrap_or(f64::NAN));
    let rows: Vec<Vec<String>> = res
        .rows
        .iter()
        .map(|m| {
            vec![
                m.replication.to_string(),
                phi0_s.clone(),
                fmt_f(m.covered),
                fmt_f(m.r_squared),
                fmt_f(m.trace_sigma_y),
                fmt_f(m.coverage_radius),
            ]
        })
        .collect();
    let header = [
        "replication",
        "phi0",
        "coverage",
        "r_squared",
        "trace_sigma_y",
        "coverage_radius",
    ]
    .map(String::from);
    io::write_csv(&out.join("metrics.csv"), "metrics", &header, &rows)?;
    let prow: Vec<Vec<String>> = res
        .predictions
        .iter()
        .map(|(r, i, y, yh)| vec![r.to_string(), i.to_string(), fmt_f(*y), fmt_f(*yh)])
        .collect();
    io::write_csv(
        &out.join("predictions.csv"),
        "predictions",
        &["replication", "row", "y", "y_hat"].map(String::from),
        &prow,
    )?;
    let mut files = vec!["metrics.csv".to_string(), "predictions.csv".to_string()];
    let sin2 = &res.report.sin2_theta1;
    if !sin2.is_empty() {
        write_sin2(&out.join("sin2.csv"), draws, sin2)?;
        files.push("sin2.csv".into());
    }
    let r = &res.report;
    io::write_json(
        &out.join("summary.json"),
        &Summary {
            mode: match cfg.metatest.mode {
                TestMode::Mixture => "mixture",
                TestMode::Point => "point",
            },
            level: cfg.metatest.level,
            replications: res.rows.len(),
            phi0,
            r_squared: r.r_squared,
            coverage_radius: r.coverage_radius,
            coverage_probability: r.coverage_probability,
            trace_sigma_y: r.trace_sigma_y,
            variance_proportion: r.variance_proportion,
            median_sin2_theta1: (!sin2.is_empty()).then(|| median(sin2)),
        },
    )?;
    files.push("summary.json".into());
    Ok(files)
}

pub fn cmd_test(cfg: &ExperimentConfig) -> Result<()> {
    let t0 = Instant::now();
    let draws = io::read_draws(&cfg.out)?;
    let tests = io::read_tasks(&cfg.test_dir(), NoiseVariance::Known(cfg.sim.sigma2_0))?;
    let truth = read_truth(&cfg.out);
    let res = meta_test(cfg, &draws, &tests, truth.as_ref().map(|t| &t.0))?;
    let files = write_test_output(
        &cfg.out,
        cfg,
        &res,
        &draws,
        truth.as_ref().map(|t| t.1.phi0),
    )?;
    log::info!(
        "R2 {:.4}, coverage {:.3}, trace {:.4}",
        res.report.r_squared,
        res.report.coverage_probability,
        res.report.trace_sigma_y
    );
    finish(
        &cfg.out,
        cfg,
        "test",
        &stage_stream(cfg, tag::TEST),
        t0,
        &files,
    )
}

/// One row of a reproduction table.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct CellResult {
    pub cell: String,
    pub seed_index: usize,
    pub seed: u64,
    pub s: usize,
    pub n_s: usize,
    pub p: usize,
    pub k: usize,
    pub phi0: f64,
    pub ratio: Option<f64>,
    pub median_sin2: f64,
    pub mean_phi: f64,
    pub r_squared: Option<f64>,
    pub coverage: Option<f64>,
    pub trace_sigma_y: Option<f64>,
    pub variance_proportion: Option<f64>,
}

#[derive(Clone, Debug, PartialEq)]
pub struct ReproduceReport {
    pub scenario: Scenario,
    pub scale: Scale,
    pub rows: Vec<CellResult>,
}

impl ReproduceReport {
    pub fn cell(&self, label: &str) -> Vec<&CellResult> {
        self.rows.iter().filter(|r| r.cell == label).collect()
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ReproduceManifest {
    pub schema: String,
    pub software_version: String,
    pub scenario: String,
    pub scale: String,
    pub master_seed: u64,
    pub kernel: String,
    pub cells: Vec<BTreeMap<String, serde_json::Value>>,
    pub wall_clock_secs: f64,
    pub outputs: BTreeMap<String, String>,
}

/// Seed for replicate `i` of a grid. Cells share it, so cells differing in
/// one setting see common random numbers.
pub fn replicate_seed(master: u64, i: usize) -> u64 {
    RngStream::new(master).child(&[i as u64]).rng().next_u64()
}

fn subsample(sim: &Simulation, s: usize, n: usize) -> Vec<TaskData> {
    sim.tasks[..s]
        .iter()
        .map(|t| {
            TaskData::new(
                t.id,
                t.y.rows(0, n).into_owned(),
                t.x.rows(0, n).into_owned(),
                t.sigma2,
            )
            .expect("subsample of a valid task")
        })
        .collect()
}

pub fn reproduce(
    scenario: Scenario,
    scale: Scale,
    seed: u64,
    out: &Path,
    kernel: Kernel,
) -> Result<ReproduceReport> {
    let t0 = Instant::now();
    let cells = grid(scenario, scale);
    let dir = out.join(scenario.name());
    let mut jobs = Vec::new();
    for c in &cells {
        for i in 0..c.seeds {
            jobs.push((c, i));
        }
    }
    // fig1 subsamples every cell from one simulated pool per replicate
    let pool_cfg = |i: usize| -> ExperimentConfig {
        let mut base = cells[0].config.clone();
        base.sim.s = cells.iter().map(|c| c.config.sim.s).max().unwrap_or(0);
        base.sim.n_s = cells.iter().map(|c| c.config.sim.n_s).max().unwrap_or(0);
        base.set_seed(replicate_seed(seed, i));
        base
    };
    let results: Vec<(CellResult, Vec<String>)> = jobs
        .par_iter()
        .map(|(c, i)| {
            let mut cfg = c.config.clone();
            cfg.set_seed(replicate_seed(seed, *i));
            cfg.sampler.kernel = kernel;
            let cell_dir = if c.seeds > 1 {
                dir.join(&c.label).join(format!("seed{i}"))
            } else {
                dir.join(&c.label)
            };
            cfg.out = cell_dir.clone();
            let (tasks, sim) = if scenario == Scenario::Fig1 {
                let sim = simulate(&pool_cfg(*i))?;
                (subsample(&sim, cfg.sim.s, cfg.sim.n_s), sim)
            } else {
                let sim = simulate(&cfg)?;
                (sim.tasks.clone(), sim)
            };
            let (draws, _) = train(&cfg, &tasks, None)?;
            let sin2 = sin2_theta_series(&draws, &sim.truth.p0)?;
            let mut files = Vec::new();
            let rel = |f: &str| {
                cell_dir
                    .join(f)
                    .strip_prefix(out)
                    .map(|p| p.display().to_string())
                    .unwrap_or_else(|_| f.to_string())
            };
            write_sin2(&cell_dir.join("sin2.csv"), &draws, &sin2)?;
            io::write_draws(&cell_dir, &draws)?;
            // relative to the reproduction root
            let mut recorded = cfg.clone();
            recorded.out = cell_dir
                .strip_prefix(out)
                .unwrap_or(&cell_dir)
                .to_path_buf();
            io::write_text(&cell_dir.join("config.txt"), &recorded.to_text())?;
            for f in [
                "sin2.csv",
                io::DRAWS_Z,
                io::DRAWS_PHI,
                io::DRAWS_META,
                "config.txt",
            ] {
                files.push(rel(f));
            }
            let mut row = CellResult {
                cell: c.label.clone(),
                seed_index: *i,
                seed: cfg.seed,
                s: cfg.sim.s,
                n_s: cfg.sim.n_s,
                p: cfg.sim.p,
                k: cfg.sim.k,
                phi0: cfg.sim.phi0,
                ratio: c.ratio,
                median_sin2: median(&sin2),
                mean_phi: mean(&draws.phis()),
                r_squared: None,
                coverage: None,
                trace_sigma_y: None,
                variance_proportion: None,
            };
            if scenario.runs_meta_test() {
                let res = meta_test(&cfg, &draws, &sim.tests, Some(&sim.truth.p0))?;
                for f in write_test_output(&cell_dir, &cfg, &res, &draws, Some(cfg.sim.phi0))? {
                    if f != "sin2.csv" {
                        files.push(rel(&f));
                    }
                }
                row.r_squared = Some(res.report.r_squared);
                row.coverage = Some(res.report.coverage_probability);
                row.trace_sigma_y = Some(res.report.trace_sigma_y);
                row.variance_proportion = Some(res.report.variance_proportion);
            }
            Ok((row, files))
        })
        .collect::<Result<_>>()?;
    let rows: Vec<CellResult> = results.iter().map(|(r, _)| r.clone()).collect();
    let opt = |v: Option<f64>| fmt_f(v.unwrap_or(f64::NAN));
    let table: Vec<Vec<String>> = rows
        .iter()
        .map(|r| {
            vec![
                r.cell.clone(),
                r.seed_index.to_string(),
                r.seed.to_string(),
                r.s.to_string(),
                r.n_s.to_string(),
                r.p.to_string(),
                r.k.to_string(),
                fmt_f(r.phi0),
                opt(r.ratio),
                fmt_f(r.median_sin2),
                fmt_f(r.mean_phi),
                opt(r.r_squared),
                opt(r.coverage),
                opt(r.trace_sigma_y),
                opt(r.variance_proportion),
            ]
        })
        .collect();
    let header = [
        "cell",
        "seed_index",
        "seed",
        "S",
        "n_s",
        "p",
        "k",
        "phi0",
        "ratio",
        "median_sin2",
        "mean_phi",
        "r_squared",
        "coverage",
        "trace_sigma_y",
        "variance_proportion",
    ]
    .map(String::from);
    io::write_csv(&dir.join("results.csv"), "results", &header, &table)?;
    let mut outputs = BTreeMap::new();
    let mut all: Vec<String> = results.into_iter().flat_map(|(_, f)| f).collect();
    all.push(format!("{}/results.csv", scenario.name()));
    for f in all {
        outputs.insert(f.clone(), file_sha256(&out.join(&f))?);
    }
    let cells_json = cells
        .iter()
        .map(|c| {
            let mut m = BTreeMap::new();
            m.insert("label".to_string(), serde_json::json!(c.label));
            m.insert(
                "config_hash".to_string(),
                serde_json::json!(c.config.hash()),
            );
            m.insert("seeds".to_string(), serde_json::json!(c.seeds));
            m.insert("phi0".to_string(), serde_json::json!(c.config.sim.phi0));
            m.insert("k".to_string(), serde_json::json!(c.config.sim.k));
            if let Some(r) = c.ratio {
                m.insert(
                    "k_over_trace".to_string(),
                    serde_json::json!(ratio_label(r)),
                );
            }
            m
        })
        .collect();
    let manifest = ReproduceManifest {
        schema: "metasub-reproduce-manifest v1".into(),
        software_version: env!("CARGO_PKG_VERSION").into(),
        scenario: scenario.name().into(),
        scale: scale.name().into(),
        master_seed: seed,
        kernel: kernel.name().into(),
        cells: cells_json,
        wall_clock_secs: t0.elapsed().as_secs_f64(),
        outputs,
    };
    io::write_json(&dir.join(MANIFEST), &manifest)?;
    Ok(ReproduceReport {
        scenario,
        scale,
        rows,
    })
}

/// Scenario, scale, seed and kernel recorded in a reproduction manifest.
pub fn reproduce_args_from_manifest(path: &Path) -> Result<(Scenario, Scale, u64, Kernel)> {
    let m: ReproduceManifest = io::read_json(path)?;
    Ok((
        m.scenario.parse()?,
        m.scale.parse()?,
        m.master_seed,
        m.kernel.parse()?,
    ))
}

pub fn default_reproduce_out() -> PathBuf {
    PathBuf::from("runs").join("reproduce")
}
