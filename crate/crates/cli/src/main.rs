use std::fs::File;
use std::io::BufWriter;
use std::path::{Path, PathBuf};

use anyhow::{bail, Context, Result};
use clap::{Parser, Subcommand};
use isac_conic::dump::dump_program;
use isac_core::experiments::{
    angle_grid, convergence, emit_beampatterns, rank_one_census, summarize, write_beampattern_csv, write_census_csv,
    write_summary_csv, write_sweep_csv, write_trace_csv, CensusSpec, RunMetadata,
};
use isac_core::sca::{build_subproblem, Iterate};
use isac_core::{run_scheme, run_sweep, Config, RunReport, Scheme, SweepParam, SweepSpec};
use serde::Serialize;

/// Sum-rate optimization for an ISAC base station sharing its band with D2D links.
#[derive(Parser, Debug)]
#[command(name = "isac-d2d", version)]
struct Cli {
    /// TOML run configuration; defaults apply to everything it leaves out.
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    /// Overrides the configured base seed.
    #[arg(long, global = true)]
    seed: Option<u64>,
    #[arg(long, global = true, default_value = "out")]
    out_dir: PathBuf,
    /// Comma-separated schemes: proposed, comm_only, sensing_only, mrt, zf.
    #[arg(long, global = true)]
    schemes: Option<String>,
    /// Run Monte Carlo draws on the rayon pool.
    #[arg(long, global = true)]
    parallel: bool,
    /// Also write the first SCA subproblem of the run as JSON.
    #[arg(long, global = true)]
    dump_subproblem: Option<PathBuf>,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Sum rate over a grid of gamma_r, P_BS or P_m values.
    Sweep {
        /// gamma_r, p_bs or p_m (overrides the config).
        #[arg(long)]
        param: Option<String>,
        /// Comma-separated grid in dB / dBm (overrides the config).
        #[arg(long)]
        values: Option<String>,
        #[arg(long)]
        monte_carlo: Option<usize>,
    },
    /// Fraction of rank-one covariances over random operating points.
    Census {
        #[arg(long)]
        draws: Option<usize>,
    },
    /// Transmit, receive and combined beampatterns per scheme.
    Beampattern,
    /// Per-iteration objective of the proposed scheme for each array size.
    Converge,
}

fn write_json<T: Serialize>(path: &Path, value: &T) -> Result<()> {
    let f = BufWriter::new(File::create(path).with_context(|| format!("creating {}", path.display()))?);
    serde_json::to_writer_pretty(f, value)?;
    Ok(())
}

fn create(path: &Path) -> Result<BufWriter<File>> {
    Ok(BufWriter::new(File::create(path).with_context(|| format!("creating {}", path.display()))?))
}

fn parse_values(text: &str) -> Result<Vec<f64>> {
    text.split(',')
        .map(|v| v.trim().parse::<f64>().with_context(|| format!("bad grid value `{v}`")))
        .collect()
}

#[derive(Serialize)]
struct LabeledReport<'a> {
    scheme: &'a str,
    seed: u64,
    value: f64,
    report: &'a RunReport,
}

fn dump_first_subproblem(cfg: &Config, seed: u64, path: &Path) -> Result<()> {
    let (s, ch) = cfg.template()?.nominal(seed)?;
    let sub = build_subproblem(&Iterate::initial(&s, &ch, false), &s, &ch, true)?;
    dump_program(&sub.program, path)?;
    log::info!("wrote {}", path.display());
    Ok(())
}

fn sweep(cli: &Cli, cfg: &Config, seed: u64, param: &Option<String>, values: &Option<String>, mc: Option<usize>) -> Result<()> {
    let mut spec = SweepSpec::from_config(cfg, seed, cli.parallel)?;
    if let Some(p) = param {
        spec.param = SweepParam::parse(p)?;
    }
    if let Some(v) = values {
        spec.values = parse_values(v)?;
    }
    if let Some(m) = mc {
        spec.monte_carlo = m;
    }
    let out = run_sweep(&spec)?;
    let summary = summarize(&out.rows);
    write_sweep_csv(create(&cli.out_dir.join("sweep.csv"))?, &out.rows)?;
    write_summary_csv(create(&cli.out_dir.join("summary.csv"))?, &summary)?;
    let labeled: Vec<LabeledReport> = out
        .rows
        .iter()
        .zip(&out.reports)
        .filter_map(|(row, rep)| {
            let value = match spec.param {
                SweepParam::GammaR => row.gamma_r_db,
                SweepParam::PBs => row.p_bs_dbm,
                SweepParam::PM => row.p_m_dbm,
            };
            rep.as_ref().map(|report| LabeledReport { scheme: &row.scheme, seed: row.seed, value, report })
        })
        .collect();
    write_json(&cli.out_dir.join("reports.json"), &labeled)?;
    for s in &summary {
        println!(
            "{:<13} gamma_r {:>6} dB  P_BS {:>7.3} dBm  P_m {:>7.3} dBm  ok {}/{}  mean sum rate {}",
            s.scheme,
            s.gamma_r_db,
            s.p_bs_dbm,
            s.p_m_dbm,
            s.ok,
            s.draws,
            s.mean_sum_rate_bps_hz.map_or("-".into(), |v| format!("{v:.4}"))
        );
    }
    Ok(())
}

#[derive(Serialize)]
struct CensusSummary {
    draws: usize,
    failed_draws: usize,
    solved_subproblems: usize,
    threshold: f64,
    fraction: Vec<f64>,
}

fn census(cli: &Cli, cfg: &Config, seed: u64, draws: Option<usize>) -> Result<()> {
    let mut spec = CensusSpec::from_config(cfg, seed, cli.parallel)?;
    if let Some(d) = draws {
        spec.draws = d;
    }
    let res = rank_one_census(&spec)?;
    write_census_csv(create(&cli.out_dir.join("census.csv"))?, &res)?;
    let summary = CensusSummary {
        draws: res.draws.len(),
        failed_draws: res.draws.iter().filter(|d| d.status != "ok").count(),
        solved_subproblems: res.solved,
        threshold: spec.threshold,
        fraction: res.fraction.clone(),
    };
    write_json(&cli.out_dir.join("census_summary.json"), &summary)?;
    for (k, f) in res.fraction.iter().enumerate() {
        println!("W_{}: {:.2}% of {} subproblems above {:e}", k + 1, 100.0 * f, res.solved, spec.threshold);
    }
    if summary.failed_draws > 0 {
        println!("{} of {} draws ended without a solution", summary.failed_draws, summary.draws);
    }
    Ok(())
}

fn beampattern(cli: &Cli, cfg: &Config, seed: u64, schemes: &[Scheme]) -> Result<()> {
    let mut c = cfg.clone();
    c.radar.gamma_r_db = cfg.beampattern.gamma_r_db;
    c.power.p_bs_dbm = cfg.beampattern.p_bs_dbm;
    c.power.p_d2d_dbm = cfg.beampattern.p_m_dbm;
    let (s, ch) = c.template()?.nominal(seed)?;
    let settings = c.settings();
    let mut reports = Vec::new();
    for &sc in schemes {
        match run_scheme(sc, &s, &ch, &settings, seed) {
            Ok(rep) => reports.push((sc, rep)),
            Err(e) => log::warn!("{sc} failed: {e}"),
        }
    }
    let grid = angle_grid(cfg.beampattern.step_deg);
    for (sc, bp) in emit_beampatterns(&s, &reports, &grid) {
        let path = cli.out_dir.join(format!("beampattern_{}.csv", sc.name()));
        write_beampattern_csv(create(&path)?, &bp)?;
        println!("wrote {}", path.display());
    }
    let labeled: Vec<LabeledReport> = reports
        .iter()
        .map(|(sc, report)| LabeledReport { scheme: sc.name(), seed, value: cfg.beampattern.gamma_r_db, report })
        .collect();
    write_json(&cli.out_dir.join("reports.json"), &labeled)?;
    Ok(())
}

fn converge(cli: &Cli, cfg: &Config, seed: u64) -> Result<()> {
    let (points, reports) = convergence(cfg, &cfg.converge.antennas, seed)?;
    write_trace_csv(create(&cli.out_dir.join("trace.csv"))?, &points)?;
    let labeled: Vec<LabeledReport> = cfg
        .converge
        .antennas
        .iter()
        .zip(&reports)
        .map(|(&n, report)| LabeledReport { scheme: "proposed", seed, value: n as f64, report })
        .collect();
    write_json(&cli.out_dir.join("reports.json"), &labeled)?;
    for (&n, rep) in cfg.converge.antennas.iter().zip(&reports) {
        let rates: Vec<String> = rep.objective_trace.iter().map(|o| format!("{:.4}", -o)).collect();
        println!("N={n}: {} iterations, surrogate sum rate {}", rep.iterations, rates.join(" "));
    }
    Ok(())
}

fn main() -> Result<()> {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    let cli = Cli::parse();
    let mut cfg = match &cli.config {
        Some(p) => Config::load(p).with_context(|| format!("loading {}", p.display()))?,
        None => Config::default(),
    };
    let seed = cli.seed.unwrap_or(cfg.seed);
    cfg.seed = seed;
    if cli.parallel && !cfg!(feature = "parallel") {
        log::warn!("built without the `parallel` feature; draws run sequentially");
    }
    let schemes = cli.schemes.as_deref().map(Scheme::parse_list).transpose()?;
    if let Some(list) = &schemes {
        if list.is_empty() {
            bail!("--schemes needs at least one scheme");
        }
        cfg.sweep.schemes = list.clone();
        cfg.beampattern.schemes = list.clone();
    }
    std::fs::create_dir_all(&cli.out_dir).with_context(|| format!("creating {}", cli.out_dir.display()))?;

    let name = match &cli.command {
        Command::Sweep { .. } => "sweep",
        Command::Census { .. } => "census",
        Command::Beampattern => "beampattern",
        Command::Converge => "converge",
    };
    RunMetadata::new(name, &cfg, seed, cli.parallel).write(&cli.out_dir.join("run.toml"))?;
    if let Some(path) = &cli.dump_subproblem {
        dump_first_subproblem(&cfg, seed, path)?;
    }

    match &cli.command {
        Command::Sweep { param, values, monte_carlo } => sweep(&cli, &cfg, seed, param, values, *monte_carlo),
        Command::Census { draws } => census(&cli, &cfg, seed, *draws),
        Command::Beampattern => beampattern(&cli, &cfg, seed, &cfg.beampattern.schemes),
        Command::Converge => converge(&cli, &cfg, seed),
    }
}
