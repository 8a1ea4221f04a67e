use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use super::sweep::task_metric;
use super::{FssResult, SwitchCurve, SweepResult};
use crate::config::Config;
use crate::error::Result;
use crate::net::{write_weights_csv, SpikeRecord, Topology};

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct FileEntry {
    pub path: String,
    pub bytes: usize,
    pub sha256: String,
}

/// Everything needed to rerun a command: the resolved configuration, the
/// command line and the digests of every file written.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Manifest {
    pub tool: String,
    pub version: String,
    pub command: String,
    pub args: Vec<String>,
    pub seed: u64,
    pub config_sha256: String,
    pub config: Config,
    pub files: Vec<FileEntry>,
}

pub fn sha256_hex(bytes: &[u8]) -> String {
    hex::encode(Sha256::digest(bytes))
}

/// Output directory that remembers what was written into it.
#[derive(Debug)]
pub struct OutputDir {
    root: PathBuf,
    files: Vec<FileEntry>,
}

impl OutputDir {
    pub fn create(root: &Path) -> Result<Self> {
        std::fs::create_dir_all(root)?;
        Ok(Self {
            root: root.to_path_buf(),
            files: Vec::new(),
        })
    }

    pub fn root(&self) -> &Path {
        &self.root
    }

    pub fn files(&self) -> &[FileEntry] {
        &self.files
    }

    pub fn write(&mut self, rel: &str, bytes: &[u8]) -> Result<PathBuf> {
        let path = self.root.join(rel);
        if let Some(parent) = path.parent() {
            std::fs::create_dir_all(parent)?;
        }
        std::fs::write(&path, bytes)?;
        self.files.retain(|f| f.path != rel);
        self.files.push(FileEntry {
            path: rel.to_string(),
            bytes: bytes.len(),
            sha256: sha256_hex(bytes),
        });
        Ok(path)
    }

    pub fn write_csv(&mut self, rel: &str, header: &str, rows: &[String]) -> Result<PathBuf> {
        let mut s = String::with_capacity(64 * (rows.len() + 1));
        s.push_str(header);
        s.push('\n');
        for r in rows {
            s.push_str(r);
            s.push('\n');
        }
        self.write(rel, s.as_bytes())
    }

    pub fn write_spikes(&mut self, rel: &str, rec: &SpikeRecord) -> Result<PathBuf> {
        let mut buf = Vec::new();
        rec.write_to(&mut buf)?;
        self.write(rel, &buf)
    }

    pub fn write_weights(&mut self, rel: &str, topology: &Topology, weights: &[f64]) -> Result<PathBuf> {
        let mut buf = Vec::new();
        write_weights_csv(&mut buf, topology, weights)?;
        self.write(rel, &buf)
    }

    /// Writes `manifest.json` listing every file written so far.
    pub fn finish(mut self, command: &str, args: &[String], cfg: &Config) -> Result<Manifest> {
        self.files.sort_by(|a, b| a.path.cmp(&b.path));
        let cfg_text = cfg.to_toml();
        let manifest = Manifest {
            tool: "critnet".into(),
            version: env!("CARGO_PKG_VERSION").into(),
            command: command.into(),
            args: args.to_vec(),
            seed: cfg.seed,
            config_sha256: sha256_hex(cfg_text.as_bytes()),
            config: cfg.clone(),
            files: self.files.clone(),
        };
        let json = serde_json::to_string_pretty(&manifest).expect("manifest serializes");
        std::fs::write(self.root.join("manifest.json"), json)?;
        std::fs::write(self.root.join("config.toml"), cfg_text)?;
        Ok(manifest)
    }
}

fn figure_of(metric: &str) -> &'static str {
    match metric {
        "rate_median" | "rate_mean" => "rates",
        "avalanche_bin" | "n_avalanches" | "alpha_s" | "s_cut" | "lr" | "lr_p_value"
        | "power_law_preferred" => "avalanches",
        "m" | "tau_branch" | "tau_corr" | "fano" => "branching",
        "vrd" | "chi" => "perturbation",
        "h" | "mi" | "ais" | "te" | "joint_mi" | "mc" => "information",
        m if m.starts_with("pid_") => "pid",
        m if m.starts_with("task_") => "tasks",
        _ => "other",
    }
}

fn num(v: f64) -> String {
    format!("{v}")
}

/// Result CSVs of a sweep: one wide row per cell, long per-figure tables,
/// aggregated medians, pooled avalanche fits and the task table.
pub fn write_sweep(out: &mut OutputDir, cfg: &Config, res: &SweepResult, weights: bool) -> Result<()> {
    let n = cfg.network.n as f64;
    let mut columns: Vec<String> = Vec::new();
    for c in &res.cells {
        for (k, _) in c.metrics() {
            if !columns.contains(&k) {
                columns.push(k);
            }
        }
    }
    let mut rows = Vec::new();
    let mut long: BTreeMap<&'static str, Vec<String>> = BTreeMap::new();
    for c in &res.cells {
        let m: BTreeMap<String, f64> = c.metrics().into_iter().collect();
        let mut row = format!("{},{},{},{}", c.k_ext, num(c.k_ext as f64 / n), c.seed_index, c.seed);
        for col in &columns {
            let _ = write!(row, ",{}", m.get(col).map_or(String::new(), |v| num(*v)));
        }
        let _ = write!(row, ",\"{}\"", c.errors.join("; ").replace('"', "'"));
        rows.push(row);
        for (k, v) in c.metrics() {
            long.entry(figure_of(&k)).or_default().push(format!(
                "{},{},{},{},{}",
                c.k_ext,
                num(c.k_ext as f64 / n),
                c.seed_index,
                k,
                num(v)
            ));
        }
        if weights {
            if let Some((topo, w)) = &c.network {
                out.write_weights(&format!("weights/k{}_s{}.csv", c.k_ext, c.seed_index), topo, w)?;
            }
        }
    }
    let header = format!("K_ext,K_ext_over_N,seed_index,seed,{},errors", columns.join(","));
    out.write_csv("cells.csv", &header, &rows)?;
    for (fig, rows) in long {
        out.write_csv(&format!("long_{fig}.csv"), "K_ext,K_ext_over_N,seed_index,metric,value", &rows)?;
    }
    let agg: Vec<String> = res
        .aggregates
        .iter()
        .map(|a| {
            format!(
                "{},{},{},{},{},{},{}",
                a.k_ext,
                num(a.k_ext as f64 / n),
                a.metric,
                a.n,
                num(a.median),
                num(a.p05),
                num(a.p95)
            )
        })
        .collect();
    out.write_csv("summary.csv", "K_ext,K_ext_over_N,metric,n,median,p05,p95", &agg)?;

    if !res.pooled.is_empty() {
        let pooled: Vec<String> = res
            .pooled
            .iter()
            .map(|p| match &p.fit {
                Some(f) => format!(
                    "{},{},{},{},{},{},{},{},{},{},",
                    p.k_ext,
                    num(p.k_ext as f64 / n),
                    p.n_seeds,
                    f.n_avalanches,
                    f.n_in_range,
                    num(f.alpha_s),
                    num(f.s_cut),
                    num(f.lr),
                    num(f.lr_p_value),
                    f.preferred.as_str()
                ),
                None => format!(
                    "{},{},{},,,,,,,,\"{}\"",
                    p.k_ext,
                    num(p.k_ext as f64 / n),
                    p.n_seeds,
                    p.error.clone().unwrap_or_default()
                ),
            })
            .collect();
        out.write_csv(
            "avalanches_pooled.csv",
            "K_ext,K_ext_over_N,n_seeds,n_avalanches,n_in_range,alpha_s,s_cut,lr,lr_p_value,preferred,error",
            &pooled,
        )?;
        let mut hist: BTreeMap<(usize, u64), u64> = BTreeMap::new();
        for c in &res.cells {
            if let Some(a) = &c.activity {
                for &s in &a.sizes {
                    *hist.entry((c.k_ext, s)).or_default() += 1;
                }
            }
        }
        let rows: Vec<String> = hist
            .into_iter()
            .map(|((k, s), count)| format!("{k},{},{s},{count}", num(k as f64 / n)))
            .collect();
        out.write_csv("long_avalanche_sizes.csv", "K_ext,K_ext_over_N,size,count", &rows)?;
    }

    let tasks: Vec<String> = res
        .cells
        .iter()
        .flat_map(|c| {
            c.tasks.iter().map(move |t| {
                format!(
                    "{},{},{},{},{},{},{},{},{},{}",
                    t.task.as_str(),
                    t.n,
                    t.n_read,
                    c.k_ext,
                    c.seed_index,
                    num(t.result.i_raw),
                    num(t.result.i_shuffle),
                    num(t.result.i_corrected),
                    num(t.result.i_norm),
                    task_metric(t)
                )
            })
        })
        .collect();
    if !tasks.is_empty() {
        out.write_csv(
            "tasks.csv",
            "task,n,N_read,K_ext,seed_index,I_raw,I_shuffle,I_corrected,I_norm,metric",
            &tasks,
        )?;
    }
    Ok(())
}

/// Long table of switch curves plus the relaxation summary.
pub fn write_switch(
    out: &mut OutputDir,
    curves: &[SwitchCurve],
    bands: &[(usize, (f64, f64))],
    relax: &[(usize, usize, usize, Option<u64>)],
) -> Result<()> {
    let mut rows = Vec::new();
    for c in curves {
        for p in &c.points {
            rows.push(format!(
                "{},{},{},{},{},{},{},{}",
                c.from,
                c.to,
                c.seed_index,
                p.updates,
                num(p.seconds),
                num(p.m),
                num(p.rate),
                p.parity.map_or(String::new(), num)
            ));
        }
    }
    out.write_csv(
        "long_switch.csv",
        "from_K_ext,to_K_ext,seed_index,updates,seconds,m,rate,parity",
        &rows,
    )?;
    let b: Vec<String> = bands
        .iter()
        .map(|(k, (lo, hi))| format!("{k},{},{}", num(*lo), num(*hi)))
        .collect();
    out.write_csv("switch_bands.csv", "K_ext,m_p05,m_p95", &b)?;
    let r: Vec<String> = relax
        .iter()
        .map(|(from, to, s, u)| format!("{from},{to},{s},{}", u.map_or(String::new(), |v| v.to_string())))
        .collect();
    out.write_csv("switch_relaxation.csv", "from_K_ext,to_K_ext,seed_index,updates", &r)?;
    Ok(())
}

pub fn write_fss(out: &mut OutputDir, res: &FssResult) -> Result<()> {
    let rows: Vec<String> = res
        .points
        .iter()
        .map(|p| {
            let (a, c, pref) = p.fit.as_ref().map_or((String::new(), String::new(), ""), |f| {
                (num(f.alpha_s), num(f.s_cut), f.preferred.as_str())
            });
            format!(
                "{},{},{},{},{},{a},{c},{pref},\"{}\"",
                p.n,
                p.k_ext,
                p.n_inh,
                p.n_seeds,
                num(p.rate_median),
                p.error.clone().unwrap_or_default()
            )
        })
        .collect();
    out.write_csv(
        "long_fss.csv",
        "N,K_ext,N_inh,n_seeds,rate_median,alpha_s,s_cut,preferred,error",
        &rows,
    )?;
    let slope = format!(
        "{},{}",
        res.exponent.map_or(String::new(), num),
        res.intercept.map_or(String::new(), num)
    );
    out.write_csv("fss_exponent.csv", "exponent,intercept", &[slope])?;
    Ok(())
}
