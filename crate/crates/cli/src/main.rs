use std::fs::File;
use std::io::BufReader;
use std::path::{Path, PathBuf};

use anyhow::{bail, Context, Result};
use clap::{Args, Parser, Subcommand, ValueEnum};
use log::info;

use critnet::analysis::{bin, characterize, extract_avalanches, fit_avalanches, mean_iei, FitRange};
use critnet::config::{Config, Durations};
use critnet::harness::{
    self, burn_in, cell_seed, finite_size_scan, fresh_band, relaxation, run_jobs,
    stream_seed, sweep, task_measures, task_switch, write_fss, write_sweep, write_switch, OutputDir,
    Stream,
};
use critnet::net::read_weights_csv;
use critnet::pid::{broja_pid, estimate_joint, JointDistribution, PidResult};
use critnet::{SpikeRecord, StimulusConfig};

#[derive(Parser, Debug)]
#[command(name = "critnet", version, about = "Plastic spiking reservoir experiments")]
struct Cli {
    #[command(flatten)]
    global: Global,
    #[command(subcommand)]
    command: Command,
}

#[derive(Args, Debug)]
struct Global {
    /// TOML configuration file.
    #[arg(long, short, global = true)]
    config: Option<PathBuf>,
    /// Master seed, overriding the configuration.
    #[arg(long, global = true)]
    seed: Option<u64>,
    #[arg(long, global = true, default_value = "out")]
    out_dir: PathBuf,
    /// Full-length burn-in and 100 seeds.
    #[arg(long, global = true)]
    paper_scale: bool,
    /// Worker threads.
    #[arg(long, short, global = true)]
    jobs: Option<usize>,
}

#[derive(Copy, Clone, Debug, ValueEnum)]
enum Drive {
    Independent,
    Shared,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Runs one network and writes its spikes.
    Simulate {
        #[arg(long)]
        k_ext: Option<usize>,
        #[arg(long, default_value_t = 0)]
        seed_index: usize,
        /// Seconds; defaults to T_exp.
        #[arg(long)]
        duration: Option<f64>,
        /// Weight CSV from `burnin`; zero weights otherwise.
        #[arg(long)]
        weights: Option<PathBuf>,
        #[arg(long)]
        plastic: bool,
        #[arg(long, value_enum, default_value_t = Drive::Independent)]
        drive: Drive,
    },
    /// Plastic run from zero weights; writes the final weights.
    Burnin {
        #[arg(long)]
        k_ext: Option<usize>,
        #[arg(long, default_value_t = 0)]
        seed_index: usize,
        /// Snapshot cadence for the weight trace, seconds.
        #[arg(long)]
        trace_every: Option<f64>,
        #[arg(long)]
        keep_spikes: bool,
    },
    /// Burn-in and analysis of every (K_ext, seed) cell.
    Sweep {
        /// Comma-separated K_ext values.
        #[arg(long, value_delimiter = ',')]
        kext_grid: Option<Vec<usize>>,
        #[arg(long)]
        seeds: Option<usize>,
        /// Comma-separated analyses: avalanches, branching, perturbation,
        /// info, pid, tasks, all.
        #[arg(long, value_delimiter = ',')]
        analyses: Option<Vec<String>>,
        #[arg(long)]
        save_weights: bool,
    },
    /// Analyzes a spike file.
    Analyze {
        spikes: PathBuf,
        /// Also compute the pairwise information measures.
        #[arg(long)]
        info: bool,
    },
    /// Reservoir tasks on a burnt-in network.
    Task {
        #[arg(long)]
        k_ext: Option<usize>,
        #[arg(long, default_value_t = 0)]
        seed_index: usize,
    },
    /// Rewires a converged network and follows its relaxation.
    Switch {
        #[arg(long)]
        from: Option<usize>,
        #[arg(long)]
        to: Option<usize>,
        #[arg(long)]
        seeds: Option<usize>,
        /// Evaluate the parity task at each checkpoint.
        #[arg(long)]
        parity: bool,
        /// Only the forward direction.
        #[arg(long)]
        one_way: bool,
    },
    /// Avalanche cutoff scaling with network size.
    Fss {
        #[arg(long, value_delimiter = ',')]
        sizes: Option<Vec<usize>>,
        #[arg(long)]
        seeds: Option<usize>,
    },
    /// Decomposes a joint distribution table, or a neuron pair of a spike file.
    Pid {
        /// `t s1 s2 prob` rows.
        #[arg(long, conflicts_with = "spikes")]
        table: Option<PathBuf>,
        #[arg(long, requires_all = ["target", "source"])]
        spikes: Option<PathBuf>,
        #[arg(long)]
        target: Option<usize>,
        #[arg(long)]
        source: Option<usize>,
    },
}

fn load_config(g: &Global) -> Result<Config> {
    let mut cfg = match &g.config {
        Some(p) => Config::load(p).with_context(|| format!("reading {}", p.display()))?,
        None => Config::default(),
    };
    if g.paper_scale {
        cfg = cfg.paper_scale();
    }
    if let Some(s) = g.seed {
        cfg.seed = s;
    }
    if g.jobs.is_some() {
        cfg.jobs = g.jobs;
    }
    cfg.validate()?;
    Ok(cfg)
}

fn read_spikes(path: &Path) -> Result<SpikeRecord> {
    let f = File::open(path).with_context(|| format!("opening {}", path.display()))?;
    Ok(SpikeRecord::read_from(BufReader::new(f))?)
}

fn set_analyses(cfg: &mut Config, list: &[String]) -> Result<()> {
    let s = &mut cfg.sweep;
    let all = list.iter().any(|a| a == "all");
    s.avalanches = all;
    s.branching = all;
    s.perturbation = all;
    s.info = all;
    s.pid = all;
    s.tasks = all;
    for a in list {
        match a.as_str() {
            "all" => {}
            "avalanches" => s.avalanches = true,
            "branching" => s.branching = true,
            "perturbation" => s.perturbation = true,
            "info" => s.info = true,
            "pid" => s.pid = true,
            "tasks" => s.tasks = true,
            other => bail!("unknown analysis `{other}`"),
        }
    }
    Ok(())
}

fn main() -> Result<()> {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("info")).init();
    let cli = Cli::parse();
    let argv: Vec<String> = std::env::args().skip(1).collect();
    let mut cfg = load_config(&cli.global)?;
    let mut out = OutputDir::create(&cli.global.out_dir)?;
    let name = match &cli.command {
        Command::Simulate { .. } => "simulate",
        Command::Burnin { .. } => "burnin",
        Command::Sweep { .. } => "sweep",
        Command::Analyze { .. } => "analyze",
        Command::Task { .. } => "task",
        Command::Switch { .. } => "switch",
        Command::Fss { .. } => "fss",
        Command::Pid { .. } => "pid",
    };
    match cli.command {
        Command::Simulate {
            k_ext,
            seed_index,
            duration,
            weights,
            plastic,
            drive,
        } => {
            let k = k_ext.unwrap_or(cfg.network.k_ext);
            let net_cfg = cfg.network_config().with_k_ext(k);
            let seed = cell_seed(cfg.seed, k, seed_index);
            let topo = net_cfg.build_topology(stream_seed(seed, Stream::Topology, &[]))?;
            let w = match &weights {
                Some(p) => read_weights_csv(BufReader::new(File::open(p)?), &topo)?,
                None => vec![0.0; topo.n_synapses()],
            };
            let t = Durations::ms(duration.unwrap_or(cfg.durations.exp));
            let stim_seed = stream_seed(seed, Stream::ExpStimulus, &[]);
            let stim = match drive {
                Drive::Independent => StimulusConfig::independent(net_cfg.n, net_cfg.nu, t, stim_seed),
                Drive::Shared => StimulusConfig::shared(net_cfg.n, net_cfg.nu, t, stim_seed),
            }
            .generate(net_cfg.dt)?;
            let mut net = critnet::net::Network::new(
                &net_cfg,
                topo.clone(),
                w,
                stream_seed(seed, Stream::ExpRun, &[]),
            )?;
            let run = net.run(&stim, t, plastic, None)?;
            info!("mean rate {:.2} Hz over {} neurons", run.spikes.mean_rate(), net_cfg.n);
            out.write_spikes("stimulus.txt", &stim)?;
            out.write_spikes("spikes.txt", &run.spikes)?;
            out.write_weights("weights.csv", &topo, net.weights())?;
        }
        Command::Burnin {
            k_ext,
            seed_index,
            trace_every,
            keep_spikes,
        } => {
            let k = k_ext.unwrap_or(cfg.network.k_ext);
            let net_cfg = cfg.network_config().with_k_ext(k);
            let seed = cell_seed(cfg.seed, k, seed_index);
            let b = burn_in(
                &net_cfg,
                Durations::ms(cfg.durations.burnin),
                seed,
                trace_every.map(Durations::ms),
                keep_spikes,
            )?;
            out.write_weights("weights.csv", &b.topology, &b.weights)?;
            if !b.trace.times.is_empty() {
                let rows: Vec<String> = b
                    .trace
                    .times
                    .iter()
                    .zip(&b.trace.snapshots)
                    .flat_map(|(t, w)| {
                        let mean = w.iter().sum::<f64>() / w.len().max(1) as f64;
                        let max = w.iter().copied().fold(0.0, f64::max);
                        [format!("{},mean,{mean}", t / 1000.0), format!("{},max,{max}", t / 1000.0)]
                    })
                    .collect();
                out.write_csv("long_weight_trace.csv", "seconds,statistic,weight", &rows)?;
            }
            if let Some(s) = &b.spikes {
                out.write_spikes("burnin_spikes.txt", s)?;
            }
        }
        Command::Sweep {
            kext_grid,
            seeds,
            analyses,
            save_weights,
        } => {
            if let Some(g) = kext_grid {
                cfg.sweep.kext_grid = g;
            }
            if let Some(s) = seeds {
                cfg.sweep.n_seeds = s;
            }
            if let Some(a) = analyses {
                set_analyses(&mut cfg, &a)?;
            }
            let res = sweep(&cfg)?;
            write_sweep(&mut out, &cfg, &res, save_weights)?;
            for p in &res.pooled {
                if let Some(f) = &p.fit {
                    info!(
                        "K_ext={}: alpha {:.3}, s_cut {:.1}, {} (p={:.2e})",
                        p.k_ext,
                        f.alpha_s,
                        f.s_cut,
                        f.preferred.as_str(),
                        f.lr_p_value
                    );
                }
            }
        }
        Command::Analyze { spikes, info } => {
            let rec = read_spikes(&spikes)?;
            let mut rows = Vec::new();
            rows.push(format!("rate_mean,{}", rec.mean_rate()));
            let w = cfg.analysis.avalanche_bin.map_or_else(|| mean_iei(&rec), Ok)?;
            let sizes = extract_avalanches(&bin(&rec, w)?.population);
            rows.push(format!("avalanche_bin,{w}"));
            let range = FitRange::new(cfg.analysis.s_min, Some(cfg.analysis.s_max_factor * rec.n_sources as u64));
            match fit_avalanches(&sizes, range) {
                Ok(f) => {
                    rows.push(format!("alpha_s,{}", f.alpha_s));
                    rows.push(format!("s_cut,{}", f.s_cut));
                    rows.push(format!("lr,{}", f.lr));
                    rows.push(format!("lr_p_value,{}", f.lr_p_value));
                    rows.push(format!("preferred,{}", f.preferred.as_str()));
                }
                Err(e) => log::warn!("avalanche fit: {e}"),
            }
            let tau = cfg.neuron.tau_ref;
            match characterize(&bin(&rec, tau)?.population_f64(), tau) {
                Ok(b) => {
                    rows.push(format!("m,{}", b.m));
                    rows.push(format!("tau_branch,{}", b.tau_branch));
                    rows.push(format!("tau_corr,{}", b.tau_corr.unwrap_or(f64::NAN)));
                    rows.push(format!("fano,{}", b.fano.unwrap_or(f64::NAN)));
                }
                Err(e) => log::warn!("branching: {e}"),
            }
            if info {
                let s = harness::info_measures(&cfg, &rec, cfg.seed)?;
                for (k, v) in [("h", s.h), ("mi", s.mi), ("ais", s.ais), ("te", s.te), ("joint_mi", s.joint), ("mc", s.mc)] {
                    rows.push(format!("{k},{v}"));
                }
            }
            out.write_csv("analysis.csv", "metric,value", &rows)?;
            out.write_csv(
                "avalanche_sizes.csv",
                "size",
                &sizes.iter().map(|s| s.to_string()).collect::<Vec<_>>(),
            )?;
        }
        Command::Task { k_ext, seed_index } => {
            let k = k_ext.unwrap_or(cfg.network.k_ext);
            let net_cfg = cfg.network_config().with_k_ext(k);
            let seed = cell_seed(cfg.seed, k, seed_index);
            let b = burn_in(&net_cfg, Durations::ms(cfg.durations.burnin), seed, None, false)?;
            let mut errors = Vec::new();
            let rows = task_measures(&cfg, &net_cfg, &b, seed, &mut errors)?;
            for e in errors {
                log::warn!("{e}");
            }
            let lines: Vec<String> = rows
                .iter()
                .map(|t| {
                    format!(
                        "{},{},{},{k},{seed_index},{},{},{},{}",
                        t.task.as_str(),
                        t.n,
                        t.n_read,
                        t.result.i_raw,
                        t.result.i_shuffle,
                        t.result.i_corrected,
                        t.result.i_norm
                    )
                })
                .collect();
            out.write_csv("tasks.csv", "task,n,N_read,K_ext,seed_index,I_raw,I_shuffle,I_corrected,I_norm", &lines)?;
        }
        Command::Switch {
            from,
            to,
            seeds,
            parity,
            one_way,
        } => {
            let from = from.unwrap_or(cfg.switch.from);
            let to = to.unwrap_or(cfg.switch.to);
            let n = seeds.unwrap_or(cfg.sweep.n_seeds);
            let mut dirs = vec![(from, to)];
            if !one_way {
                dirs.push((to, from));
            }
            let mut bands = Vec::new();
            for &(_, target) in &dirs {
                let (lo, hi, _) = fresh_band(&cfg, target, n)?;
                info!("fresh-start m band at K_ext={target}: [{lo:.3}, {hi:.3}]");
                bands.push((target, (lo, hi)));
            }
            let jobs: Vec<(usize, usize, usize)> = dirs
                .iter()
                .flat_map(|&(a, b)| (0..n).map(move |s| (a, b, s)))
                .collect();
            let threads = cfg.jobs.unwrap_or_else(|| std::thread::available_parallelism().map_or(1, |v| v.get()));
            let curves = run_jobs(jobs.len(), threads, |i| {
                let (a, b, s) = jobs[i];
                task_switch(&cfg, a, b, s, parity)
            })
            .into_iter()
            .collect::<critnet::Result<Vec<_>>>()?;
            let relax: Vec<(usize, usize, usize, Option<u64>)> = curves
                .iter()
                .map(|c| {
                    let band = bands.iter().find(|b| b.0 == c.to).expect("band per target").1;
                    (c.from, c.to, c.seed_index, relaxation(&c.points, band))
                })
                .collect();
            write_switch(&mut out, &curves, &bands, &relax)?;
        }
        Command::Fss { sizes, seeds } => {
            if let Some(s) = sizes {
                cfg.fss.n_grid = s;
            }
            if let Some(s) = seeds {
                cfg.sweep.n_seeds = s;
            }
            let res = finite_size_scan(&cfg)?;
            if let Some(e) = res.exponent {
                info!("s_cut ~ N^{e:.3}");
            }
            write_fss(&mut out, &res)?;
        }
        Command::Pid {
            table,
            spikes,
            target,
            source,
        } => {
            let d = if let Some(p) = table {
                JointDistribution::read_table(BufReader::new(File::open(&p)?))?
            } else if let Some(p) = spikes {
                let rec = read_spikes(&p)?;
                let (t, s) = (target.expect("required"), source.expect("required"));
                if t >= rec.n_sources || s >= rec.n_sources {
                    bail!("neuron index out of range (record has {})", rec.n_sources);
                }
                let emb = &cfg.analysis.embedding;
                let b = bin(&rec, emb.dt_bin)?.binary_all();
                estimate_joint(&b[t], &b[t], &b[s], emb.l)?
            } else {
                bail!("give --table or --spikes with --target and --source");
            };
            let r = broja_pid(&d)?;
            println!("{}", PidResult::CSV_HEADER);
            println!("{}", r.csv_row());
            out.write_csv("pid.csv", PidResult::CSV_HEADER, &[r.csv_row()])?;
        }
    }
    let m = out.finish(name, &argv, &cfg)?;
    info!("wrote {} files and manifest.json to {}", m.files.len(), cli.global.out_dir.display());
    Ok(())
}
