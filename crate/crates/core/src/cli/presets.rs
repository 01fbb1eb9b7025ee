//! Named configurations and the reproduction grids.
//!
//! Desk scale shrinks the simulation scenarios to p = 40, k = 5 so the whole
//! set finishes in minutes; full scale uses the published settings.

use super::config::{ExperimentConfig, MetaTestBlock, SamplerBlock};
use crate::model::SimConfig;
use crate::{Error, Result};

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Scenario {
    Fig1,
    Table1,
    TraceFixed,
}

impl Scenario {
    pub fn name(&self) -> &'static str {
        match self {
            Scenario::Fig1 => "fig1",
            Scenario::Table1 => "table1",
            Scenario::TraceFixed => "trace-fixed",
        }
    }

    /// Whether the cells of this scenario run the meta-test stage.
    pub fn runs_meta_test(&self) -> bool {
        !matches!(self, Scenario::Fig1)
    }
}

impl std::str::FromStr for Scenario {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s {
            "fig1" => Ok(Scenario::Fig1),
            "table1" => Ok(Scenario::Table1),
            "trace-fixed" | "trace_fixed" => Ok(Scenario::TraceFixed),
            other => Err(Error::Config(format!("unknown scenario '{other}'"))),
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Scale {
    Desk,
    Full,
}

impl Scale {
    pub fn name(&self) -> &'static str {
        match self {
            Scale::Desk => "desk",
            Scale::Full => "full",
        }
    }
}

impl std::str::FromStr for Scale {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s {
            "desk" => Ok(Scale::Desk),
            "full" => Ok(Scale::Full),
            other => Err(Error::Config(format!("unknown scale '{other}'"))),
        }
    }
}

/// Trace of the coefficient covariance held fixed in the trace-fixed grid.
pub const FULL_TRACE: f64 = 11.8;
pub const DESK_TRACE: f64 = 5.9;

pub const DESK_SEEDS: usize = 3;

/// Three-decimal label for a k/trace ratio, truncated as in the published
/// table (5/11.8 = 0.4237 reads 0.423).
pub fn ratio_label(r: f64) -> String {
    format!("{:.3}", (r * 1000.0 + 1e-9).floor() / 1000.0)
}

fn sim(s: usize, n_s: usize, p: usize, k: usize, phi0: f64, sigma2_0: f64) -> SimConfig {
    SimConfig {
        s,
        n_s,
        p,
        k,
        phi0,
        sigma2_0,
        seed: 0,
    }
}

fn sampler(iters: usize) -> SamplerBlock {
    SamplerBlock {
        iters,
        burnin: iters / 2,
        thin: 5,
        ..SamplerBlock::default()
    }
}

fn metatest_full() -> MetaTestBlock {
    MetaTestBlock::default()
}

fn metatest_desk() -> MetaTestBlock {
    MetaTestBlock {
        n_star: 55,
        train: 25,
        validation: 30,
        replications: 100,
        ..MetaTestBlock::default()
    }
}

fn build(
    name: &str,
    sim: SimConfig,
    sampler: SamplerBlock,
    metatest: MetaTestBlock,
) -> ExperimentConfig {
    let mut c = ExperimentConfig::new(name, sim);
    c.sampler = sampler;
    c.metatest = metatest;
    c
}

pub const TABLE1_PHI0: [f64; 6] = [0.20, 0.15, 0.10, 0.05, 0.02, 0.01];
pub const DESK_TABLE1_PHI0: [f64; 3] = [0.2, 0.05, 0.01];
pub const TRACE_FIXED_PAIRS: [(f64, usize); 3] = [(0.1, 2), (0.071, 5), (0.02, 10)];
pub const DESK_TRACE_FIXED_K: [usize; 3] = [1, 2, 5];

pub fn preset_names() -> Vec<String> {
    let mut v = vec!["smoke".to_string()];
    for phi in TABLE1_PHI0 {
        v.push(format!("table1-phi{phi:.2}"));
    }
    for s in [100, 500, 2000] {
        for n in [50, 100] {
            v.push(format!("fig1-S{s}-n{n}"));
        }
    }
    for (_, k) in TRACE_FIXED_PAIRS {
        v.push(format!("trace-fixed-k{k}"));
    }
    v
}

pub fn preset(name: &str) -> Result<ExperimentConfig> {
    if name == "smoke" {
        let mut c = build(
            name,
            sim(3, 20, 3, 1, 0.05, 0.01),
            sampler(2000),
            MetaTestBlock {
                n_star: 30,
                train: 20,
                validation: 10,
                replications: 5,
                ..MetaTestBlock::default()
            },
        );
        c.set_seed(7);
        return Ok(c);
    }
    if let Some(phi) = name.strip_prefix("table1-phi") {
        let phi0: f64 = phi.parse().map_err(|_| unknown(name))?;
        if TABLE1_PHI0.iter().any(|v| (v - phi0).abs() < 1e-12) {
            return Ok(build(
                name,
                sim(100, 50, 100, 10, phi0, 0.1),
                sampler(5000),
                metatest_full(),
            ));
        }
    }
    if let Some(rest) = name.strip_prefix("fig1-S") {
        if let Some((s, n)) = rest.split_once("-n") {
            let s: usize = s.parse().map_err(|_| unknown(name))?;
            let n: usize = n.parse().map_err(|_| unknown(name))?;
            return Ok(build(
                name,
                sim(s, n, 100, 10, 0.02, 0.01),
                sampler(5000),
                metatest_full(),
            ));
        }
    }
    if let Some(k) = name.strip_prefix("trace-fixed-k") {
        let k: usize = k.parse().map_err(|_| unknown(name))?;
        if let Some(&(phi0, _)) = TRACE_FIXED_PAIRS.iter().find(|(_, kk)| *kk == k) {
            return Ok(build(
                name,
                sim(100, 50, 100, k, phi0, 0.1),
                sampler(5000),
                metatest_full(),
            ));
        }
    }
    Err(unknown(name))
}

fn unknown(name: &str) -> Error {
    Error::Config(format!(
        "unknown preset '{name}' (known: {})",
        preset_names().join(", ")
    ))
}

/// One cell of a reproduction grid, replicated over `seeds` seeds.
#[derive(Clone, Debug, PartialEq)]
pub struct Cell {
    pub label: String,
    pub config: ExperimentConfig,
    pub seeds: usize,
    /// k / trace(Σ₀) for the trace-fixed grid.
    pub ratio: Option<f64>,
}

pub fn grid(scenario: Scenario, scale: Scale) -> Vec<Cell> {
    let cell = |label: String, config: ExperimentConfig, seeds: usize, ratio: Option<f64>| Cell {
        label,
        config,
        seeds,
        ratio,
    };
    match (scenario, scale) {
        (Scenario::Fig1, Scale::Desk) => {
            let mut v = Vec::new();
            for s in [20, 80] {
                for n in [25, 50] {
                    let label = format!("S{s}-n{n}");
                    let c = build(
                        &label,
                        sim(s, n, 40, 5, 0.02, 0.01),
                        sampler(2000),
                        metatest_desk(),
                    );
                    v.push(cell(label, c, DESK_SEEDS, None));
                }
            }
            v
        }
        (Scenario::Fig1, Scale::Full) => {
            let mut v = Vec::new();
            for s in [100, 500, 2000] {
                for n in [50, 100] {
                    let label = format!("S{s}-n{n}");
                    v.push(cell(
                        label.clone(),
                        preset(&format!("fig1-{label}")).unwrap(),
                        1,
                        None,
                    ));
                }
            }
            v
        }
        (Scenario::Table1, Scale::Desk) => DESK_TABLE1_PHI0
            .iter()
            .map(|&phi0| {
                let label = format!("phi{phi0:.2}");
                let c = build(
                    &label,
                    sim(80, 50, 40, 5, phi0, 0.1),
                    sampler(2000),
                    metatest_desk(),
                );
                cell(label, c, 1, None)
            })
            .collect(),
        (Scenario::Table1, Scale::Full) => TABLE1_PHI0
            .iter()
            .map(|&phi0| {
                let label = format!("phi{phi0:.2}");
                cell(
                    label,
                    preset(&format!("table1-phi{phi0:.2}")).unwrap(),
                    1,
                    None,
                )
            })
            .collect(),
        (Scenario::TraceFixed, Scale::Desk) => DESK_TRACE_FIXED_K
            .iter()
            .map(|&k| {
                let p = 40;
                let phi0 = (DESK_TRACE - k as f64) / (p - k) as f64;
                let label = format!("k{k}");
                let c = build(
                    &label,
                    sim(80, 50, p, k, phi0, 0.1),
                    sampler(2000),
                    metatest_desk(),
                );
                cell(label, c, 1, Some(k as f64 / DESK_TRACE))
            })
            .collect(),
        (Scenario::TraceFixed, Scale::Full) => TRACE_FIXED_PAIRS
            .iter()
            .map(|&(_, k)| {
                let label = format!("k{k}");
                cell(
                    label,
                    preset(&format!("trace-fixed-k{k}")).unwrap(),
                    1,
                    Some(k as f64 / FULL_TRACE),
                )
            })
            .collect(),
    }
}
