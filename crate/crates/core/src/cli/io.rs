//! CSV and JSON persistence.
//!
//! Every CSV written here starts with a `# metasub-<schema> v1` comment line
//! followed by a single column-header line; rows are plain comma-separated
//! numbers printed in shortest round-trip form.

use crate::model::{ChainState, Draw, NoiseVariance, PosteriorDraws, TaskData};
use crate::{Error, Mat, Result, Vector};
use serde::{de::DeserializeOwned, Deserialize, Serialize};
use std::fmt::Write as _;
use std::path::{Path, PathBuf};

pub const SCHEMA_VERSION: u32 = 1;

pub fn fmt_f(x: f64) -> String {
    format!("{x:?}")
}

fn create_parent(path: &Path) -> Result<()> {
    if let Some(d) = path.parent() {
        if !d.as_os_str().is_empty() {
            std::fs::create_dir_all(d).map_err(|e| Error::io(d, e))?;
        }
    }
    Ok(())
}

pub fn write_text(path: &Path, text: &str) -> Result<()> {
    create_parent(path)?;
    std::fs::write(path, text).map_err(|e| Error::io(path, e))
}

pub fn write_csv(path: &Path, schema: &str, header: &[String], rows: &[Vec<String>]) -> Result<()> {
    let mut s = String::new();
    let _ = writeln!(s, "# metasub-{schema} v{SCHEMA_VERSION}");
    let _ = writeln!(s, "{}", header.join(","));
    for r in rows {
        let _ = writeln!(s, "{}", r.join(","));
    }
    write_text(path, &s)
}

/// A numeric table: optional header plus rows.
#[derive(Clone, Debug, PartialEq)]
pub struct Table {
    pub header: Vec<String>,
    pub rows: Vec<Vec<f64>>,
}

impl Table {
    pub fn column(&self, name: &str) -> Option<Vec<f64>> {
        let j = self.header.iter().position(|h| h == name)?;
        Some(self.rows.iter().map(|r| r[j]).collect())
    }
}

/// Reads comma-separated numbers, skipping `#` comments and blank lines. The
/// first remaining line is a header unless every field parses as a number.
pub fn read_table(path: &Path) -> Result<Table> {
    let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    let mut header = Vec::new();
    let mut rows: Vec<Vec<f64>> = Vec::new();
    let mut first = true;
    for (i, line) in text.lines().enumerate() {
        let line = line.trim();
        if line.is_empty() || line.starts_with('#') {
            continue;
        }
        let fields: Vec<&str> = line.split(',').map(str::trim).collect();
        let parsed: std::result::Result<Vec<f64>, _> =
            fields.iter().map(|f| f.parse::<f64>()).collect();
        match parsed {
            Ok(v) => {
                if let Some(w) = rows.first().map(Vec::len).or(if header.is_empty() {
                    None
                } else {
                    Some(header.len())
                }) {
                    if v.len() != w {
                        return Err(Error::Dimension(format!(
                            "{}: line {} has {} fields, expected {w}",
                            path.display(),
                            i + 1,
                            v.len()
                        )));
                    }
                }
                rows.push(v);
            }
            Err(_) if first => header = fields.iter().map(|s| s.to_string()).collect(),
            Err(_) => {
                return Err(Error::Config(format!(
                    "{}: line {} is not numeric",
                    path.display(),
                    i + 1
                )));
            }
        }
        first = false;
    }
    Ok(Table { header, rows })
}

pub fn write_matrix(path: &Path, schema: &str, m: &Mat) -> Result<()> {
    let header: Vec<String> = (1..=m.ncols()).map(|j| format!("c{j}")).collect();
    let rows: Vec<Vec<String>> = (0..m.nrows())
        .map(|i| (0..m.ncols()).map(|j| fmt_f(m[(i, j)])).collect())
        .collect();
    write_csv(path, schema, &header, &rows)
}

pub fn read_matrix(path: &Path) -> Result<Mat> {
    let t = read_table(path)?;
    let r = t.rows.len();
    let c = t.rows.first().map_or(0, Vec::len);
    Ok(Mat::from_fn(r, c, |i, j| t.rows[i][j]))
}

pub fn task_file_name(id: usize) -> String {
    format!("task_{id}.csv")
}

pub fn write_task(dir: &Path, task: &TaskData) -> Result<()> {
    let mut header = vec!["y".to_string()];
    header.extend((1..=task.p()).map(|j| format!("x{j}")));
    let rows: Vec<Vec<String>> = (0..task.n())
        .map(|i| {
            let mut r = vec![fmt_f(task.y[i])];
            r.extend((0..task.p()).map(|j| fmt_f(task.x[(i, j)])));
            r
        })
        .collect();
    write_csv(&dir.join(task_file_name(task.id)), "task", &header, &rows)
}

/// A task file: first column the response, remaining columns the design.
pub fn read_task(path: &Path, id: usize, sigma2: NoiseVariance) -> Result<TaskData> {
    let t = read_table(path)?;
    if t.rows.is_empty() || t.rows[0].len() < 2 {
        return Err(Error::Dimension(format!(
            "{}: need a response and at least one predictor",
            path.display()
        )));
    }
    let n = t.rows.len();
    let p = t.rows[0].len() - 1;
    let y = Vector::from_fn(n, |i, _| t.rows[i][0]);
    let x = Mat::from_fn(n, p, |i, j| t.rows[i][j + 1]);
    TaskData::new(id, y, x, sigma2)
}

/// `task_<id>.csv` files in `dir`, ordered by id.
pub fn list_tasks(dir: &Path) -> Result<Vec<(usize, PathBuf)>> {
    let rd = std::fs::read_dir(dir).map_err(|e| Error::io(dir, e))?;
    let mut out = Vec::new();
    for entry in rd {
        let entry = entry.map_err(|e| Error::io(dir, e))?;
        let name = entry.file_name().to_string_lossy().to_string();
        if let Some(id) = name
            .strip_prefix("task_")
            .and_then(|s| s.strip_suffix(".csv"))
            .and_then(|s| s.parse::<usize>().ok())
        {
            out.push((id, entry.path()));
        }
    }
    out.sort();
    if out.is_empty() {
        return Err(Error::io(
            dir,
            std::io::Error::new(std::io::ErrorKind::NotFound, "no task_<id>.csv files"),
        ));
    }
    Ok(out)
}

pub fn read_tasks(dir: &Path, sigma2: NoiseVariance) -> Result<Vec<TaskData>> {
    list_tasks(dir)?
        .into_iter()
        .map(|(id, path)| read_task(&path, id, sigma2))
        .collect()
}

pub fn write_json<T: Serialize>(path: &Path, value: &T) -> Result<()> {
    let mut s = serde_json::to_string_pretty(value).map_err(|e| Error::Config(e.to_string()))?;
    s.push('\n');
    write_text(path, &s)
}

pub fn read_json<T: DeserializeOwned>(path: &Path) -> Result<T> {
    let s = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    serde_json::from_str(&s).map_err(|e| Error::Config(format!("{}: {e}", path.display())))
}

pub const DRAWS_Z: &str = "draws_z.csv";
pub const DRAWS_PHI: &str = "draws_phi.csv";
pub const DRAWS_META: &str = "draws.json";
pub const CHAIN_STATE: &str = "state.json";

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
struct DrawsMeta {
    iters: usize,
    burnin: usize,
    thin: usize,
    seed: u64,
    stream: Vec<u64>,
    p: usize,
    k: usize,
    draws: usize,
}

/// Z draws as stacked p×k blocks (`draw, iteration, row, z1..zk`) and φ draws
/// as `draw, iteration, phi`.
pub fn write_draws(dir: &Path, d: &PosteriorDraws) -> Result<()> {
    let mut zh = vec!["draw".to_string(), "iteration".into(), "row".into()];
    zh.extend((1..=d.k).map(|j| format!("z{j}")));
    let mut zrows = Vec::with_capacity(d.len() * d.p);
    let mut prows = Vec::with_capacity(d.len());
    for (i, dr) in d.draws.iter().enumerate() {
        for r in 0..d.p {
            let mut row = vec![i.to_string(), dr.iteration.to_string(), r.to_string()];
            row.extend((0..d.k).map(|j| fmt_f(dr.z[(r, j)])));
            zrows.push(row);
        }
        prows.push(vec![i.to_string(), dr.iteration.to_string(), fmt_f(dr.phi)]);
    }
    write_csv(&dir.join(DRAWS_Z), "draws-z", &zh, &zrows)?;
    write_csv(
        &dir.join(DRAWS_PHI),
        "draws-phi",
        &["draw".into(), "iteration".into(), "phi".into()],
        &prows,
    )?;
    write_json(
        &dir.join(DRAWS_META),
        &DrawsMeta {
            iters: d.iters,
            burnin: d.burnin,
            thin: d.thin,
            seed: d.seed,
            stream: d.stream.clone(),
            p: d.p,
            k: d.k,
            draws: d.len(),
        },
    )
}

pub fn read_draws(dir: &Path) -> Result<PosteriorDraws> {
    let meta: DrawsMeta = read_json(&dir.join(DRAWS_META))?;
    let z = read_table(&dir.join(DRAWS_Z))?;
    let phi = read_table(&dir.join(DRAWS_PHI))?;
    if phi.rows.len() != meta.draws || z.rows.len() != meta.draws * meta.p {
        return Err(Error::Dimension(format!(
            "{}: draw files disagree with {DRAWS_META}",
            dir.display()
        )));
    }
    if z.rows.iter().any(|r| r.len() != 3 + meta.k) {
        return Err(Error::Dimension(format!(
            "{}: expected {} columns",
            DRAWS_Z,
            3 + meta.k
        )));
    }
    let draws = (0..meta.draws)
        .map(|i| {
            let block = &z.rows[i * meta.p..(i + 1) * meta.p];
            Draw {
                iteration: phi.rows[i][1] as usize,
                z: Mat::from_fn(meta.p, meta.k, |r, j| block[r][3 + j]),
                phi: phi.rows[i][2],
                betas: Vec::new(),
                sigma2: Vec::new(),
            }
        })
        .collect();
    Ok(PosteriorDraws {
        draws,
        iters: meta.iters,
        burnin: meta.burnin,
        thin: meta.thin,
        seed: meta.seed,
        stream: meta.stream,
        p: meta.p,
        k: meta.k,
    })
}

pub fn write_state(dir: &Path, s: &ChainState) -> Result<()> {
    write_json(&dir.join(CHAIN_STATE), s)
}

pub fn read_state(dir: &Path) -> Result<ChainState> {
    read_json(&dir.join(CHAIN_STATE))
}
