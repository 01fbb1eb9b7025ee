//! Experiment configuration: a plain `key = value` format with `[section]`
//! headers and `#` comments.
//!
//! ```text
//! [scenario]
//! name = smoke
//! seed = 7
//! out = runs/smoke
//!
//! [sim]
//! S = 3
//! n_s = 20
//! p = 3
//! k = 1
//! phi0 = 0.05
//! sigma2 = 0.01
//! ```

use crate::model::{ChainConfig, HyperParams, Kernel, PhiConvention, SimConfig};
use crate::samplers::{CsSettings, ThetaPrior};
use crate::{Error, Result};
use sha2::{Digest, Sha256};
use std::collections::BTreeMap;
use std::path::{Path, PathBuf};

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum TestMode {
    Mixture,
    Point,
}

#[derive(Clone, Debug, PartialEq)]
pub struct SamplerBlock {
    pub iters: usize,
    pub burnin: usize,
    pub thin: usize,
    pub kernel: Kernel,
    pub bingham_sweeps: usize,
    pub phi_convention: PhiConvention,
    pub phi_floor: f64,
    pub infer_sigma2: bool,
    pub a: f64,
    pub b: f64,
    pub kappa: f64,
    pub theta_steps: usize,
    pub theta_prior: ThetaPrior,
}

impl Default for SamplerBlock {
    fn default() -> Self {
        SamplerBlock {
            iters: 2000,
            burnin: 1000,
            thin: 5,
            kernel: Kernel::Bingham,
            bingham_sweeps: 1,
            phi_convention: PhiConvention::Likelihood,
            phi_floor: 1e-8,
            infer_sigma2: false,
            a: 1.0,
            b: 1.0,
            kappa: 0.0,
            theta_steps: 10,
            theta_prior: ThetaPrior::Haar,
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct MetaTestBlock {
    pub n_star: usize,
    pub train: usize,
    pub validation: usize,
    pub replications: usize,
    pub mode: TestMode,
    pub level: f64,
    /// Evaluate on the training rows instead of held-out rows.
    pub validation_on_train: bool,
}

impl Default for MetaTestBlock {
    fn default() -> Self {
        MetaTestBlock {
            n_star: 100,
            train: 70,
            validation: 30,
            replications: 100,
            mode: TestMode::Mixture,
            level: 0.95,
            validation_on_train: false,
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct ExperimentConfig {
    pub name: String,
    pub seed: u64,
    pub out: PathBuf,
    pub sim: SimConfig,
    pub sampler: SamplerBlock,
    pub metatest: MetaTestBlock,
    /// Directory of `task_<id>.csv` files to train on; defaults to `<out>/tasks`.
    pub tasks_dir: Option<PathBuf>,
    /// Directory of meta-test tasks; defaults to `<out>/test`.
    pub test_dir: Option<PathBuf>,
}

impl ExperimentConfig {
    pub fn new(name: &str, sim: SimConfig) -> Self {
        ExperimentConfig {
            name: name.to_string(),
            seed: sim.seed,
            out: PathBuf::from("runs").join(name),
            sim,
            sampler: SamplerBlock::default(),
            metatest: MetaTestBlock::default(),
            tasks_dir: None,
            test_dir: None,
        }
    }

    pub fn validate(&self) -> Result<()> {
        let c = |m: String| Err(Error::Config(m));
        self.sim
            .validate()
            .map_err(|e| Error::Config(format!("[sim] {e}")))?;
        self.chain().validate()?;
        self.hyper()
            .validate()
            .map_err(|e| Error::Config(format!("[sampler] {e}")))?;
        if self.sampler.bingham_sweeps == 0 {
            return c("[sampler] bingham_sweeps must be >= 1".into());
        }
        if !(self.sampler.phi_floor > 0.0 && self.sampler.phi_floor < 1.0) {
            return c("[sampler] phi_floor must lie in (0, 1)".into());
        }
        let m = &self.metatest;
        if m.train == 0 || m.validation == 0 || m.replications == 0 {
            return c("[metatest] train, validation and replications must be positive".into());
        }
        if m.validation_on_train {
            if m.train > m.n_star || m.validation != m.train {
                return c(
                    "[metatest] validation_on_train needs validation = train <= n_star".into(),
                );
            }
        } else if m.train + m.validation > m.n_star {
            return c(format!(
                "[metatest] train + validation = {} exceeds n_star = {}",
                m.train + m.validation,
                m.n_star
            ));
        }
        if !(m.level > 0.0 && m.level < 1.0) {
            return c("[metatest] level must lie in (0, 1)".into());
        }
        Ok(())
    }

    pub fn chain(&self) -> ChainConfig {
        let s = &self.sampler;
        ChainConfig {
            iters: s.iters,
            burnin: s.burnin,
            thin: s.thin,
            kernel: s.kernel,
            cs: CsSettings {
                theta_steps: s.theta_steps,
                prior: s.theta_prior,
                ..CsSettings::default()
            },
            phi_convention: s.phi_convention,
            phi_floor: s.phi_floor,
            store_betas: false,
        }
    }

    pub fn hyper(&self) -> HyperParams {
        HyperParams {
            a: self.sampler.a,
            b: self.sampler.b,
            kappa: self.sampler.kappa,
            z0_prior: None,
            bingham_sweeps: self.sampler.bingham_sweeps,
        }
    }

    pub fn tasks_dir(&self) -> PathBuf {
        self.tasks_dir
            .clone()
            .unwrap_or_else(|| self.out.join("tasks"))
    }

    pub fn test_dir(&self) -> PathBuf {
        self.test_dir
            .clone()
            .unwrap_or_else(|| self.out.join("test"))
    }

    /// Canonical text form; parsing it gives back an equal config.
    pub fn to_text(&self) -> String {
        let s = &self.sim;
        let sm = &self.sampler;
        let m = &self.metatest;
        let mut out = String::new();
        let mut push = |line: String| {
            out.push_str(&line);
            out.push('\n');
        };
        push("[scenario]".into());
        push(format!("name = {}", self.name));
        push(format!("seed = {}", self.seed));
        push(format!("out = {}", self.out.display()));
        if let Some(d) = &self.tasks_dir {
            push(format!("tasks_dir = {}", d.display()));
        }
        if let Some(d) = &self.test_dir {
            push(format!("test_dir = {}", d.display()));
        }
        push(String::new());
        push("[sim]".into());
        push(format!("S = {}", s.s));
        push(format!("n_s = {}", s.n_s));
        push(format!("p = {}", s.p));
        push(format!("k = {}", s.k));
        push(format!("phi0 = {:?}", s.phi0));
        push(format!("sigma2 = {:?}", s.sigma2_0));
        push(String::new());
        push("[sampler]".into());
        push(format!("iters = {}", sm.iters));
        push(format!("burnin = {}", sm.burnin));
        push(format!("thin = {}", sm.thin));
        push(format!("kernel = {}", sm.kernel.name()));
        push(format!("bingham_sweeps = {}", sm.bingham_sweeps));
        push(format!(
            "phi_convention = {}",
            match sm.phi_convention {
                PhiConvention::Likelihood => "likelihood",
                PhiConvention::Printed => "printed",
            }
        ));
        push(format!("phi_floor = {:?}", sm.phi_floor));
        push(format!("infer_sigma2 = {}", sm.infer_sigma2));
        push(format!("a = {:?}", sm.a));
        push(format!("b = {:?}", sm.b));
        push(format!("kappa = {:?}", sm.kappa));
        push(format!("theta_steps = {}", sm.theta_steps));
        push(format!(
            "theta_prior = {}",
            match sm.theta_prior {
                ThetaPrior::Haar => "haar",
                ThetaPrior::Uniform => "uniform",
            }
        ));
        push(String::new());
        push("[metatest]".into());
        push(format!("n_star = {}", m.n_star));
        push(format!("train = {}", m.train));
        push(format!("validation = {}", m.validation));
        push(format!("replications = {}", m.replications));
        push(format!(
            "mode = {}",
            match m.mode {
                TestMode::Mixture => "mixture",
                TestMode::Point => "point",
            }
        ));
        push(format!("level = {:?}", m.level));
        push(format!("validation_on_train = {}", m.validation_on_train));
        out
    }

    pub fn hash(&self) -> String {
        let d = Sha256::digest(self.to_text().as_bytes());
        d.iter().map(|b| format!("{b:02x}")).collect()
    }

    pub fn parse(text: &str) -> Result<Self> {
        let kv = parse_sections(text)?;
        let get = |sec: &str, key: &str| {
            kv.get(&(sec.to_string(), key.to_string()))
                .map(String::as_str)
        };
        for (sec, key) in kv.keys() {
            if !KNOWN.iter().any(|(s, k)| *s == sec && *k == key) {
                return Err(Error::Config(format!("unknown key [{sec}] {key}")));
            }
        }
        let name = get("scenario", "name").unwrap_or("experiment").to_string();
        let seed = num(get("scenario", "seed"), 0u64, "seed")?;
        let sim = SimConfig {
            s: num(get("sim", "S"), 0usize, "S")?,
            n_s: num(get("sim", "n_s"), 0usize, "n_s")?,
            p: num(get("sim", "p"), 0usize, "p")?,
            k: num(get("sim", "k"), 0usize, "k")?,
            phi0: num(get("sim", "phi0"), 0.05, "phi0")?,
            sigma2_0: num(get("sim", "sigma2"), 0.01, "sigma2")?,
            seed,
        };
        let d = SamplerBlock::default();
        let iters = num(get("sampler", "iters"), d.iters, "iters")?;
        let sampler = SamplerBlock {
            iters,
            burnin: num(get("sampler", "burnin"), iters / 2, "burnin")?,
            thin: num(get("sampler", "thin"), d.thin, "thin")?,
            kernel: match get("sampler", "kernel") {
                Some(v) => v.parse()?,
                None => d.kernel,
            },
            bingham_sweeps: num(
                get("sampler", "bingham_sweeps"),
                d.bingham_sweeps,
                "bingham_sweeps",
            )?,
            phi_convention: match get("sampler", "phi_convention") {
                None | Some("likelihood") => PhiConvention::Likelihood,
                Some("printed") => PhiConvention::Printed,
                Some(v) => return Err(Error::Config(format!("phi_convention '{v}'"))),
            },
            phi_floor: num(get("sampler", "phi_floor"), d.phi_floor, "phi_floor")?,
            infer_sigma2: flag(get("sampler", "infer_sigma2"), false)?,
            a: num(get("sampler", "a"), d.a, "a")?,
            b: num(get("sampler", "b"), d.b, "b")?,
            kappa: num(get("sampler", "kappa"), d.kappa, "kappa")?,
            theta_steps: num(get("sampler", "theta_steps"), d.theta_steps, "theta_steps")?,
            theta_prior: match get("sampler", "theta_prior") {
                None | Some("haar") => ThetaPrior::Haar,
                Some("uniform") => ThetaPrior::Uniform,
                Some(v) => return Err(Error::Config(format!("theta_prior '{v}'"))),
            },
        };
        let md = MetaTestBlock::default();
        let metatest = MetaTestBlock {
            n_star: num(get("metatest", "n_star"), md.n_star, "n_star")?,
            train: num(get("metatest", "train"), md.train, "train")?,
            validation: num(get("metatest", "validation"), md.validation, "validation")?,
            replications: num(
                get("metatest", "replications"),
                md.replications,
                "replications",
            )?,
            mode: match get("metatest", "mode") {
                None | Some("mixture") => TestMode::Mixture,
                Some("point") => TestMode::Point,
                Some(v) => return Err(Error::Config(format!("mode '{v}'"))),
            },
            level: num(get("metatest", "level"), md.level, "level")?,
            validation_on_train: flag(get("metatest", "validation_on_train"), false)?,
        };
        let cfg = ExperimentConfig {
            out: get("scenario", "out")
                .map(PathBuf::from)
                .unwrap_or_else(|| PathBuf::from("runs").join(&name)),
            name,
            seed,
            sim,
            sampler,
            metatest,
            tasks_dir: get("scenario", "tasks_dir").map(PathBuf::from),
            test_dir: get("scenario", "test_dir").map(PathBuf::from),
        };
        cfg.validate()?;
        Ok(cfg)
    }

    /// Reads a config file, or the config embedded in a run manifest.
    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        if text.trim_start().starts_with('{') {
            let m: super::manifest::RunManifest = serde_json::from_str(&text)
                .map_err(|e| Error::Config(format!("{}: {e}", path.display())))?;
            return Self::parse(&m.config);
        }
        Self::parse(&text)
    }

    pub fn set_seed(&mut self, seed: u64) {
        self.seed = seed;
        self.sim.seed = seed;
    }
}

const KNOWN: &[(&str, &str)] = &[
    ("scenario", "name"),
    ("scenario", "seed"),
    ("scenario", "out"),
    ("scenario", "tasks_dir"),
    ("scenario", "test_dir"),
    ("sim", "S"),
    ("sim", "n_s"),
    ("sim", "p"),
    ("sim", "k"),
    ("sim", "phi0"),
    ("sim", "sigma2"),
    ("sampler", "iters"),
    ("sampler", "burnin"),
    ("sampler", "thin"),
    ("sampler", "kernel"),
    ("sampler", "bingham_sweeps"),
    ("sampler", "phi_convention"),
    ("sampler", "phi_floor"),
    ("sampler", "infer_sigma2"),
    ("sampler", "a"),
    ("sampler", "b"),
    ("sampler", "kappa"),
    ("sampler", "theta_steps"),
    ("sampler", "theta_prior"),
    ("metatest", "n_star"),
    ("metatest", "train"),
    ("metatest", "validation"),
    ("metatest", "replications"),
    ("metatest", "mode"),
    ("metatest", "level"),
    ("metatest", "validation_on_train"),
];

fn parse_sections(text: &str) -> Result<BTreeMap<(String, String), String>> {
    let mut section = String::new();
    let mut kv = BTreeMap::new();
    for (i, raw) in text.lines().enumerate() {
        let line = raw.split('#').next().unwrap_or("").trim();
        if line.is_empty() {
            continue;
        }
        if let Some(rest) = line.strip_prefix('[') {
            let name = rest.strip_suffix(']').ok_or_else(|| {
                Error::Config(format!("line {}: unterminated section header", i + 1))
            })?;
            section = name.trim().to_string();
            continue;
        }
        let (k, v) = line
            .split_once('=')
            .ok_or_else(|| Error::Config(format!("line {}: expected key = value", i + 1)))?;
        if section.is_empty() {
            return Err(Error::Config(format!(
                "line {}: key outside any section",
                i + 1
            )));
        }
        let key = (section.clone(), k.trim().to_string());
        if kv.insert(key, v.trim().to_string()).is_some() {
            return Err(Error::Config(format!(
                "line {}: duplicate key {}",
                i + 1,
                k.trim()
            )));
        }
    }
    Ok(kv)
}

fn num<T: std::str::FromStr>(v: Option<&str>, default: T, key: &str) -> Result<T> {
    match v {
        None => Ok(default),
        Some(s) => s
            .parse()
            .map_err(|_| Error::Config(format!("{key}: cannot parse '{s}'"))),
    }
}

fn flag(v: Option<&str>, default: bool) -> Result<bool> {
    match v {
        None => Ok(default),
        Some("true") | Some("yes") | Some("1") => Ok(true),
        Some("false") | Some("no") | Some("0") => Ok(false),
        Some(s) => Err(Error::Config(format!("expected a boolean, got '{s}'"))),
    }
}
