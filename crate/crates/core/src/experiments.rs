//! Seeded sweeps, the rank-one census, beampatterns and convergence traces.
//!
//! Draw `i` of a run with base seed `s` uses seed `s + i` for both the D2D
//! placement and the channel phases, and that seed is written into every row.

use std::io::Write;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::baselines::{comm_only, fixed_report, mrt, sensing_only, zf};
use crate::config::{Config, ScenarioTemplate};
use crate::error::{CoreError, Result};
use crate::metrics::{beampatterns, Beampatterns};
use crate::report::RunReport;
use crate::sca::{sca_solve, ScaOptions, ScaSettings};
use crate::scenario::{
    db_to_linear, dbm_to_watts, linear_to_db, random_d2d_placement, realize_channels, rng, watts_to_dbm, ChannelSet,
    Scenario, RNG_ALGORITHM, STREAM_CENSUS,
};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Scheme {
    Proposed,
    CommOnly,
    SensingOnly,
    Mrt,
    Zf,
}

impl Scheme {
    pub const ALL: [Scheme; 5] = [Scheme::Proposed, Scheme::CommOnly, Scheme::SensingOnly, Scheme::Mrt, Scheme::Zf];

    pub fn name(self) -> &'static str {
        match self {
            Scheme::Proposed => "proposed",
            Scheme::CommOnly => "comm_only",
            Scheme::SensingOnly => "sensing_only",
            Scheme::Mrt => "mrt",
            Scheme::Zf => "zf",
        }
    }

    pub fn parse(text: &str) -> Result<Self> {
        let t = text.trim().to_ascii_lowercase().replace('-', "_");
        Scheme::ALL
            .into_iter()
            .find(|s| s.name() == t)
            .ok_or_else(|| CoreError::Config(format!("unknown scheme `{text}`")))
    }

    /// Comma-separated list, e.g. `proposed,zf`.
    pub fn parse_list(text: &str) -> Result<Vec<Self>> {
        text.split(',').filter(|t| !t.trim().is_empty()).map(Scheme::parse).collect()
    }
}

impl std::fmt::Display for Scheme {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(self.name())
    }
}

pub fn run_scheme(scheme: Scheme, s: &Scenario, ch: &ChannelSet, settings: &ScaSettings, seed: u64) -> Result<RunReport> {
    match scheme {
        Scheme::Proposed => sca_solve(s, ch, settings, None, ScaOptions { radar: true, seed }),
        Scheme::CommOnly => comm_only(s, ch, settings, seed),
        Scheme::SensingOnly => sensing_only(s, ch, settings),
        Scheme::Mrt => Ok(fixed_report("mrt", s, ch, mrt(s, ch)?)),
        Scheme::Zf => Ok(fixed_report("zf", s, ch, zf(s, ch)?)),
    }
}

impl ScenarioTemplate {
    /// Scenario and channels of draw seed `seed`.
    pub fn draw(&self, seed: u64) -> Result<(Scenario, ChannelSet)> {
        let s = random_d2d_placement(&self.base, &self.ranges, seed)?;
        let ch = realize_channels(&s, seed)?;
        Ok((s, ch))
    }

    /// Channels of draw `seed` on the fixed base geometry (D2D pairs at their box centers).
    pub fn nominal(&self, seed: u64) -> Result<(Scenario, ChannelSet)> {
        let ch = realize_channels(&self.base, seed)?;
        Ok((self.base.clone(), ch))
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SweepParam {
    GammaR,
    PBs,
    PM,
}

impl SweepParam {
    pub fn parse(text: &str) -> Result<Self> {
        match text {
            "gamma_r" => Ok(SweepParam::GammaR),
            "p_bs" => Ok(SweepParam::PBs),
            "p_m" => Ok(SweepParam::PM),
            _ => Err(CoreError::Config(format!("unknown sweep parameter `{text}`"))),
        }
    }

    /// Sets the parameter on `s`; `value` is in dB for γ_r and dBm for powers.
    pub fn apply(self, s: &mut Scenario, value: f64) {
        match self {
            SweepParam::GammaR => s.gamma_r = db_to_linear(value),
            SweepParam::PBs => s.p_bs_max = dbm_to_watts(value),
            SweepParam::PM => s.p_d2d_max.iter_mut().for_each(|p| *p = dbm_to_watts(value)),
        }
    }
}

#[derive(Debug, Clone)]
pub struct SweepSpec {
    pub schemes: Vec<Scheme>,
    pub param: SweepParam,
    pub values: Vec<f64>,
    pub monte_carlo: usize,
    pub template: ScenarioTemplate,
    pub settings: ScaSettings,
    pub seed: u64,
    pub parallel: bool,
}

impl SweepSpec {
    pub fn from_config(cfg: &Config, seed: u64, parallel: bool) -> Result<Self> {
        Ok(SweepSpec {
            schemes: cfg.sweep.schemes.clone(),
            param: cfg.sweep.parameter,
            values: cfg.sweep.values.clone(),
            monte_carlo: cfg.sweep.monte_carlo,
            template: cfg.template()?,
            settings: cfg.settings(),
            seed,
            parallel,
        })
    }

    pub fn validate(&self) -> Result<()> {
        if self.values.is_empty() || self.monte_carlo == 0 || self.schemes.is_empty() {
            return Err(CoreError::Config("sweep needs a non-empty grid, monte_carlo ≥ 1 and at least one scheme".into()));
        }
        self.settings.validate()
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SweepRow {
    pub scheme: String,
    pub gamma_r_db: f64,
    pub p_bs_dbm: f64,
    pub p_m_dbm: f64,
    pub seed: u64,
    pub sum_rate_bps_hz: Option<f64>,
    pub radar_sinr_db: Option<f64>,
    pub iters: Option<usize>,
    pub status: String,
}

#[derive(Debug, Clone)]
pub struct SweepOutput {
    /// Ordered by grid value, then draw, then scheme.
    pub rows: Vec<SweepRow>,
    /// Same order as `rows`; `None` for failed runs.
    pub reports: Vec<Option<RunReport>>,
}

fn run_row(scheme: Scheme, s: &Scenario, ch: &ChannelSet, settings: &ScaSettings, seed: u64, value: (SweepParam, f64)) -> (SweepRow, Option<RunReport>) {
    let mut row = SweepRow {
        scheme: scheme.name().to_string(),
        gamma_r_db: linear_to_db(s.gamma_r),
        p_bs_dbm: watts_to_dbm(s.p_bs_max),
        p_m_dbm: watts_to_dbm(s.p_d2d_max.first().copied().unwrap_or(0.0)),
        seed,
        sum_rate_bps_hz: None,
        radar_sinr_db: None,
        iters: None,
        status: String::new(),
    };
    // keep the grid value verbatim rather than its round trip through watts
    match value.0 {
        SweepParam::GammaR => row.gamma_r_db = value.1,
        SweepParam::PBs => row.p_bs_dbm = value.1,
        SweepParam::PM => row.p_m_dbm = value.1,
    }
    match run_scheme(scheme, s, ch, settings, seed) {
        Ok(rep) => {
            let m = rep.metrics.as_ref().expect("successful runs carry metrics");
            row.sum_rate_bps_hz = Some(m.sum_rate);
            row.radar_sinr_db = Some(linear_to_db(m.radar_sinr));
            row.iters = Some(rep.iterations);
            row.status = "ok".into();
            (row, Some(rep))
        }
        Err(e) => {
            log::warn!("{} at seed {seed}: {e}", scheme.name());
            row.status = e.tag().to_string();
            (row, None)
        }
    }
}

pub fn run_sweep(spec: &SweepSpec) -> Result<SweepOutput> {
    spec.validate()?;
    let jobs: Vec<(f64, u64)> = spec
        .values
        .iter()
        .flat_map(|&v| (0..spec.monte_carlo as u64).map(move |d| (v, spec.seed.wrapping_add(d))))
        .collect();
    let chunks = crate::par_map(&jobs, spec.parallel, |&(value, seed)| -> Vec<(SweepRow, Option<RunReport>)> {
        let mut base = spec.template.clone();
        spec.param.apply(&mut base.base, value);
        match base.draw(seed) {
            Ok((s, ch)) => spec.schemes.iter().map(|&sc| run_row(sc, &s, &ch, &spec.settings, seed, (spec.param, value))).collect(),
            Err(e) => {
                log::warn!("draw {seed} failed: {e}");
                spec.schemes
                    .iter()
                    .map(|&sc| {
                        let mut s = base.base.clone();
                        spec.param.apply(&mut s, value);
                        let row = SweepRow {
                            scheme: sc.name().to_string(),
                            gamma_r_db: linear_to_db(s.gamma_r),
                            p_bs_dbm: watts_to_dbm(s.p_bs_max),
                            p_m_dbm: watts_to_dbm(s.p_d2d_max.first().copied().unwrap_or(0.0)),
                            seed,
                            sum_rate_bps_hz: None,
                            radar_sinr_db: None,
                            iters: None,
                            status: e.tag().to_string(),
                        };
                        (row, None)
                    })
                    .collect()
            }
        }
    });
    let (rows, reports) = chunks.into_iter().flatten().unzip();
    Ok(SweepOutput { rows, reports })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SummaryRow {
    pub scheme: String,
    pub gamma_r_db: f64,
    pub p_bs_dbm: f64,
    pub p_m_dbm: f64,
    pub draws: usize,
    pub ok: usize,
    pub mean_sum_rate_bps_hz: Option<f64>,
    pub mean_radar_sinr_db: Option<f64>,
    pub mean_iters: Option<f64>,
}

fn mean(xs: impl Iterator<Item = f64>) -> Option<f64> {
    let (n, sum) = xs.fold((0usize, 0.0), |(n, s), x| (n + 1, s + x));
    (n > 0).then(|| sum / n as f64)
}

/// Means over successful draws for every (grid point, scheme), in first-seen order.
pub fn summarize(rows: &[SweepRow]) -> Vec<SummaryRow> {
    let key = |r: &SweepRow| (r.scheme.clone(), r.gamma_r_db.to_bits(), r.p_bs_dbm.to_bits(), r.p_m_dbm.to_bits());
    let mut order = Vec::new();
    for r in rows {
        if !order.contains(&key(r)) {
            order.push(key(r));
        }
    }
    order
        .into_iter()
        .map(|k| {
            let group: Vec<&SweepRow> = rows.iter().filter(|r| key(r) == k).collect();
            let ok: Vec<&&SweepRow> = group.iter().filter(|r| r.status == "ok").collect();
            SummaryRow {
                scheme: k.0,
                gamma_r_db: group[0].gamma_r_db,
                p_bs_dbm: group[0].p_bs_dbm,
                p_m_dbm: group[0].p_m_dbm,
                draws: group.len(),
                ok: ok.len(),
                mean_sum_rate_bps_hz: mean(ok.iter().filter_map(|r| r.sum_rate_bps_hz)),
                mean_radar_sinr_db: mean(ok.iter().filter_map(|r| r.radar_sinr_db)),
                mean_iters: mean(ok.iter().filter_map(|r| r.iters.map(|i| i as f64))),
            }
        })
        .collect()
}

fn opt<T: ToString>(x: Option<T>) -> String {
    x.map(|v| v.to_string()).unwrap_or_default()
}

/// Floats use the shortest representation that round-trips; failed fields are empty.
pub fn write_sweep_csv<W: Write>(out: W, rows: &[SweepRow]) -> Result<()> {
    let mut w = csv::Writer::from_writer(out);
    w.write_record([
        "scheme",
        "gamma_r_db",
        "p_bs_dbm",
        "p_m_dbm",
        "seed",
        "sum_rate_bps_hz",
        "radar_sinr_db",
        "iters",
        "status",
    ])?;
    for r in rows {
        w.write_record([
            r.scheme.clone(),
            r.gamma_r_db.to_string(),
            r.p_bs_dbm.to_string(),
            r.p_m_dbm.to_string(),
            r.seed.to_string(),
            opt(r.sum_rate_bps_hz),
            opt(r.radar_sinr_db),
            opt(r.iters),
            r.status.clone(),
        ])?;
    }
    w.flush()?;
    Ok(())
}

pub fn write_summary_csv<W: Write>(out: W, rows: &[SummaryRow]) -> Result<()> {
    let mut w = csv::Writer::from_writer(out);
    w.write_record([
        "scheme",
        "gamma_r_db",
        "p_bs_dbm",
        "p_m_dbm",
        "draws",
        "ok",
        "mean_sum_rate_bps_hz",
        "mean_radar_sinr_db",
        "mean_iters",
    ])?;
    for r in rows {
        w.write_record([
            r.scheme.clone(),
            r.gamma_r_db.to_string(),
            r.p_bs_dbm.to_string(),
            r.p_m_dbm.to_string(),
            r.draws.to_string(),
            r.ok.to_string(),
            opt(r.mean_sum_rate_bps_hz),
            opt(r.mean_radar_sinr_db),
            opt(r.mean_iters),
        ])?;
    }
    w.flush()?;
    Ok(())
}

#[derive(Debug, Clone)]
pub struct CensusSpec {
    pub draws: usize,
    pub gamma_r_db: (f64, f64),
    pub p_m_dbm: (f64, f64),
    pub p_bs_dbm: (f64, f64),
    pub threshold: f64,
    pub template: ScenarioTemplate,
    pub settings: ScaSettings,
    pub seed: u64,
    pub parallel: bool,
}

impl CensusSpec {
    pub fn from_config(cfg: &Config, seed: u64, parallel: bool) -> Result<Self> {
        let c = &cfg.census;
        Ok(CensusSpec {
            draws: c.draws,
            gamma_r_db: (c.gamma_r_db[0], c.gamma_r_db[1]),
            p_m_dbm: (c.p_m_dbm[0], c.p_m_dbm[1]),
            p_bs_dbm: (c.p_bs_dbm[0], c.p_bs_dbm[1]),
            threshold: cfg.sca.rank_ratio_threshold,
            template: cfg.template()?,
            settings: cfg.settings(),
            seed,
            parallel,
        })
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CensusDraw {
    pub seed: u64,
    pub gamma_r_db: f64,
    pub p_bs_dbm: f64,
    pub p_m_dbm: f64,
    /// λ1/λ2 of every W_k, one row per SCA iteration; empty on failure.
    pub ratios: Vec<Vec<f64>>,
    pub status: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CensusResult {
    pub draws: Vec<CensusDraw>,
    /// Fraction of collected W_k (all iterations of all solved draws) above the threshold, per k.
    pub fraction: Vec<f64>,
    /// Number of solved subproblems that entered the count.
    pub solved: usize,
}

/// Counts how often the SCA subproblems return rank-one `W_k`, over every
/// iteration of every draw.
pub fn rank_one_census(spec: &CensusSpec) -> Result<CensusResult> {
    if spec.draws == 0 {
        return Err(CoreError::Config("census needs at least one draw".into()));
    }
    spec.settings.validate()?;
    let seeds: Vec<u64> = (0..spec.draws as u64).map(|d| spec.seed.wrapping_add(d)).collect();
    let draws = crate::par_map(&seeds, spec.parallel, |&seed| {
        use rand::Rng;
        let mut r = rng(seed, STREAM_CENSUS);
        let mut pick = |(lo, hi): (f64, f64)| if hi > lo { r.random_range(lo..=hi) } else { lo };
        let gamma_r_db = pick(spec.gamma_r_db);
        let p_m_dbm = pick(spec.p_m_dbm);
        let p_bs_dbm = pick(spec.p_bs_dbm);
        let mut t = spec.template.clone();
        SweepParam::GammaR.apply(&mut t.base, gamma_r_db);
        SweepParam::PM.apply(&mut t.base, p_m_dbm);
        SweepParam::PBs.apply(&mut t.base, p_bs_dbm);
        let mut out = CensusDraw { seed, gamma_r_db, p_bs_dbm, p_m_dbm, ratios: Vec::new(), status: "ok".into() };
        let res = t
            .draw(seed)
            .and_then(|(s, ch)| sca_solve(&s, &ch, &spec.settings, None, ScaOptions { radar: true, seed }));
        match res {
            Ok(rep) => out.ratios = rep.rank_ratios,
            Err(e) => out.status = e.tag().to_string(),
        }
        out
    });
    Ok(census_fractions(draws, spec.threshold))
}

/// Aggregates per-iteration ratios into per-beam fractions above `threshold`.
pub fn census_fractions(draws: Vec<CensusDraw>, threshold: f64) -> CensusResult {
    let rows: Vec<&Vec<f64>> = draws.iter().filter(|d| d.status == "ok").flat_map(|d| &d.ratios).collect();
    let k = rows.iter().map(|r| r.len()).max().unwrap_or(0);
    let fraction = (0..k)
        .map(|i| {
            let hits = rows.iter().filter(|r| r.get(i).is_some_and(|&x| x > threshold)).count();
            if rows.is_empty() {
                0.0
            } else {
                hits as f64 / rows.len() as f64
            }
        })
        .collect();
    let solved = rows.len();
    CensusResult { draws, fraction, solved }
}

/// One row per (draw, iteration); failed draws get a single row with empty ratios.
pub fn write_census_csv<W: Write>(out: W, res: &CensusResult) -> Result<()> {
    let k = res.fraction.len();
    let mut w = csv::Writer::from_writer(out);
    let mut header: Vec<String> =
        ["seed", "gamma_r_db", "p_bs_dbm", "p_m_dbm", "iteration"].iter().map(|s| s.to_string()).collect();
    header.extend((1..=k).map(|i| format!("ratio_w{i}")));
    header.push("status".into());
    w.write_record(&header)?;
    for d in &res.draws {
        let head = [d.seed.to_string(), d.gamma_r_db.to_string(), d.p_bs_dbm.to_string(), d.p_m_dbm.to_string()];
        if d.ratios.is_empty() {
            let mut rec = head.to_vec();
            rec.push(String::new());
            rec.extend((0..k).map(|_| String::new()));
            rec.push(d.status.clone());
            w.write_record(&rec)?;
        }
        for (t, row) in d.ratios.iter().enumerate() {
            let mut rec = head.to_vec();
            rec.push((t + 1).to_string());
            rec.extend((0..k).map(|i| opt(row.get(i))));
            rec.push(d.status.clone());
            w.write_record(&rec)?;
        }
    }
    w.flush()?;
    Ok(())
}

/// Uniform angle grid over `[-90°, 90°]`.
pub fn angle_grid(step_deg: f64) -> Vec<f64> {
    let n = (180.0 / step_deg).round() as usize;
    (0..=n).map(|i| -90.0 + 180.0 * i as f64 / n as f64).collect()
}

/// Beampatterns of every successful report, in the given order.
pub fn emit_beampatterns(s: &Scenario, reports: &[(Scheme, RunReport)], grid: &[f64]) -> Vec<(Scheme, Beampatterns)> {
    reports
        .iter()
        .filter_map(|(sc, rep)| rep.solution.as_ref().map(|sol| (*sc, beampatterns(s, sol, grid))))
        .collect()
}

/// Values below this are written as the floor (exact nulls would give −∞).
pub const DB_FLOOR: f64 = -300.0;

fn to_db_floored(x: f64) -> f64 {
    if x > 0.0 {
        linear_to_db(x).max(DB_FLOOR)
    } else {
        DB_FLOOR
    }
}

pub fn write_beampattern_csv<W: Write>(out: W, bp: &Beampatterns) -> Result<()> {
    let mut w = csv::Writer::from_writer(out);
    w.write_record(["angle_deg", "p1_db", "p2_db", "p3_db"])?;
    for i in 0..bp.grid_deg.len() {
        w.write_record([
            bp.grid_deg[i].to_string(),
            to_db_floored(bp.p1[i]).to_string(),
            to_db_floored(bp.p2[i]).to_string(),
            to_db_floored(bp.p3[i]).to_string(),
        ])?;
    }
    w.flush()?;
    Ok(())
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TracePoint {
    pub n_antennas: usize,
    pub iteration: usize,
    /// Surrogate sum rate returned by the subproblem.
    pub surrogate_sum_rate: f64,
    /// Relaxed sum rate at the new iterate.
    pub sum_rate: f64,
}

/// Proposed-scheme traces for every array size in `antennas`, on the nominal
/// geometry with channel draw `seed`.
pub fn convergence(cfg: &Config, antennas: &[usize], seed: u64) -> Result<(Vec<TracePoint>, Vec<RunReport>)> {
    let mut points = Vec::new();
    let mut reports = Vec::new();
    for &n in antennas {
        let mut c = cfg.clone();
        c.array.n_tx = n;
        c.array.n_rx = n;
        let (s, ch) = c.template()?.nominal(seed)?;
        let rep = sca_solve(&s, &ch, &c.settings(), None, ScaOptions { radar: true, seed })?;
        for (i, (a, b)) in rep.objective_trace.iter().zip(&rep.true_objective_trace).enumerate() {
            points.push(TracePoint { n_antennas: n, iteration: i + 1, surrogate_sum_rate: -a, sum_rate: -b });
        }
        reports.push(rep);
    }
    Ok((points, reports))
}

pub fn write_trace_csv<W: Write>(out: W, points: &[TracePoint]) -> Result<()> {
    let mut w = csv::Writer::from_writer(out);
    for p in points {
        w.serialize(p)?;
    }
    w.flush()?;
    Ok(())
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunMetadata {
    pub tool: String,
    pub version: String,
    pub command: String,
    pub seed: u64,
    pub rng: String,
    pub parallel: bool,
    pub solver_feas_tol: f64,
    pub solver_gap_tol: f64,
    pub solver_max_iters: usize,
    pub sca_rel_tol: f64,
    pub sca_max_iters: usize,
    pub rank_ratio_threshold: f64,
    pub randomization_samples: usize,
    pub log_handling: String,
    pub config: Config,
}

impl RunMetadata {
    pub fn new(command: &str, cfg: &Config, seed: u64, parallel: bool) -> Self {
        let st = cfg.settings();
        RunMetadata {
            tool: env!("CARGO_PKG_NAME").to_string(),
            version: env!("CARGO_PKG_VERSION").to_string(),
            command: command.to_string(),
            seed,
            rng: RNG_ALGORITHM.to_string(),
            parallel,
            solver_feas_tol: st.solver.feas,
            solver_gap_tol: st.solver.gap,
            solver_max_iters: st.solver.max_iters,
            sca_rel_tol: st.rel_tol,
            sca_max_iters: st.max_iters,
            rank_ratio_threshold: st.rank_ratio_threshold,
            randomization_samples: st.randomization_samples,
            log_handling: crate::report::LOG_HANDLING.to_string(),
            config: cfg.clone(),
        }
    }

    pub fn write(&self, path: &Path) -> Result<()> {
        let text = toml::to_string_pretty(self).map_err(|e| CoreError::Config(e.to_string()))?;
        std::fs::write(path, text)?;
        Ok(())
    }
}
