//! Successive convex approximation of the sum-rate problem.
//!
//! Each iteration linearizes the concave parts around the previous iterate:
//! the interference terms `E = log2(interference + noise)` of every rate and
//! the radar function `f(G) = a_rᴴ G⁻¹ a_r`. The resulting program over the
//! relaxed covariances `W_k` and powers `p_m` is handed to the conic solver.
//!
//! Variables are scaled inside the program (`W̄ = W/P_BS`, `p̄_m = p_m/P_m`, log
//! arguments divided by their value at the expansion point) so that the
//! budgets from 20 dBm to 120 dBm all produce O(1) data.

use std::f64::consts::LN_2;
use std::time::Instant;

use isac_conic::embed::{extract_hermitian, quadratic_form, trace_form};
use isac_conic::{solve, Affine, Block, ConicProgram, ConicSolution, LogTerm, Status, ToleranceSet};
use nalgebra::DVector;
use rand_distr::{Distribution, StandardNormal};
use serde::{Deserialize, Serialize};

use crate::error::{CoreError, Result};
use crate::linalg::{c, eig_desc, htrace, outer, psd_part, quad, rank_ratio, CMat, CVec};
use crate::metrics::{cu_sinr_cov, d2d_sinr_cov, radar_interference, Solution};
use crate::report::{RunReport, SolverDiag};
use crate::rxbeam::{mvdr, optimal_radar_sinr, InterferenceMatrix};
use crate::scenario::{rng, ChannelSet, Scenario, STREAM_RANDOMIZATION};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ScaSettings {
    pub max_iters: usize,
    pub rel_tol: f64,
    pub randomization_samples: usize,
    pub rank_ratio_threshold: f64,
    pub solver: ToleranceSet,
}

impl Default for ScaSettings {
    fn default() -> Self {
        ScaSettings {
            max_iters: 30,
            rel_tol: 1e-4,
            randomization_samples: 100,
            rank_ratio_threshold: 1e5,
            solver: ToleranceSet::default(),
        }
    }
}

impl ScaSettings {
    pub fn validate(&self) -> Result<()> {
        if self.max_iters == 0 || !(self.rel_tol > 0.0) {
            return Err(CoreError::Config("max_iters must be ≥ 1 and rel_tol > 0".into()));
        }
        Ok(())
    }
}

/// Affine functional `constant + Σ_k Σ wt·hᴴW_k h + Σ_m p_coef[m]·p_m`.
#[derive(Debug, Clone, PartialEq)]
pub struct WAffine {
    pub constant: f64,
    pub w_terms: Vec<Vec<(f64, CVec)>>,
    pub p_coef: DVector<f64>,
}

impl WAffine {
    pub fn zero(k: usize, m: usize) -> Self {
        WAffine { constant: 0.0, w_terms: vec![Vec::new(); k], p_coef: DVector::zeros(m) }
    }

    pub fn eval(&self, ws: &[CMat], p: &DVector<f64>) -> f64 {
        self.constant + self.linear(ws, p)
    }

    /// Value of the linear part alone (a directional derivative when `ws`, `p` are directions).
    pub fn linear(&self, ws: &[CMat], p: &DVector<f64>) -> f64 {
        let mut acc = 0.0;
        for (terms, w) in self.w_terms.iter().zip(ws) {
            for (wt, h) in terms {
                acc += wt * quad(w, h);
            }
        }
        acc + self.p_coef.dot(p)
    }

    pub fn scaled(mut self, a: f64) -> Self {
        self.constant *= a;
        for terms in &mut self.w_terms {
            for t in terms {
                t.0 *= a;
            }
        }
        self.p_coef *= a;
        self
    }

    /// Conic-program form over the scaled variables `W̄_k = W_k/P_BS`, `p̄_m = p_m/P_m`.
    pub(crate) fn to_conic(&self, scale: f64, s: &Scenario, p_block: usize) -> Affine {
        let mut a = Affine::constant(self.constant * scale);
        for (k, terms) in self.w_terms.iter().enumerate() {
            for (wt, h) in terms {
                a = a.add_sym(k, quadratic_form(h, wt * s.p_bs_max * scale));
            }
        }
        for (m, &v) in self.p_coef.iter().enumerate() {
            if v != 0.0 {
                a = a.add_entry(p_block, m, v * s.p_d2d_max[m] * scale);
            }
        }
        a
    }
}

/// hᴴ(Σ_{j∈beams} W_j)h + Σ_m p_m·gain_m + noise.
fn link_power(k: usize, beams: impl Iterator<Item = usize>, h: &CVec, gains: DVector<f64>, noise: f64) -> WAffine {
    let mut a = WAffine::zero(k, gains.len());
    for j in beams {
        a.w_terms[j].push((1.0, h.clone()));
    }
    a.p_coef = gains;
    a.constant = noise;
    a
}

/// Received power plus noise at CU `k`; with `interference_only` the own beam is left out.
pub fn cu_power(s: &Scenario, ch: &ChannelSet, k: usize, interference_only: bool) -> WAffine {
    let gains = DVector::from_fn(s.m(), |m, _| ch.h_d2dtx_cu[(m, k)].norm_sqr());
    link_power(s.k(), (0..s.k()).filter(|&j| !(interference_only && j == k)), &ch.h_bs_cu[k], gains, s.noise_cu)
}

/// Received power plus noise at D2D-RX `m`; with `interference_only` the own link is left out.
pub fn d2d_power(s: &Scenario, ch: &ChannelSet, m: usize, interference_only: bool) -> WAffine {
    let gains = DVector::from_fn(s.m(), |j, _| {
        if interference_only && j == m {
            0.0
        } else {
            ch.h_d2dtx_d2drx[(j, m)].norm_sqr()
        }
    });
    link_power(s.k(), 0..s.k(), &ch.h_bs_d2drx[m], gains, s.noise_d2d)
}

/// `φ = a_tᴴ F a_t`.
pub fn phi(s: &Scenario, ch: &ChannelSet) -> WAffine {
    let mut a = WAffine::zero(s.k(), s.m());
    for k in 0..s.k() {
        a.w_terms[k].push((1.0, ch.a_t0.clone()));
    }
    a
}

pub(crate) fn sum_cov(ws: &[CMat], n: usize) -> CMat {
    ws.iter().fold(CMat::zeros(n, n), |acc, w| acc + w)
}

/// Exact `f = a_rᴴ G⁻¹ a_r` at `(W, p)`; `with_d2d` selects whether D2D interference enters G.
pub fn radar_f(s: &Scenario, ch: &ChannelSet, ws: &[CMat], p: &DVector<f64>, with_d2d: bool) -> Result<f64> {
    let g = InterferenceMatrix { g: radar_interference(s, ch, &sum_cov(ws, s.array.n_tx), p, with_d2d) };
    g.inverse_quad(&ch.a_r0)
}

/// First-order expansion `f̃(G) = f(G0) − a_rᴴG0⁻¹(G − G0)G0⁻¹a_r` as a functional of `(W_k, p_m)`.
pub fn linearize_f(s: &Scenario, ch: &ChannelSet, g0: &InterferenceMatrix, with_d2d: bool) -> Result<WAffine> {
    linearize_f_blocks(s, ch, g0, with_d2d, s.k())
}

pub(crate) fn linearize_f_blocks(
    s: &Scenario,
    ch: &ChannelSet,
    g0: &InterferenceMatrix,
    with_d2d: bool,
    blocks: usize,
) -> Result<WAffine> {
    let v = g0.solve(&ch.a_r0)?;
    let f0 = ch.a_r0.dotc(&v).re;
    // f̃ = 2 f0 − vᴴ G v with v = G0⁻¹a_r, and vᴴGv = Σ_k (Bᴴv)ᴴW_k(Bᴴv) + Σ p_m|h_mᴴv|² + σ_r²‖v‖²
    let bv = ch.b.adjoint() * &v;
    let mut a = WAffine::zero(blocks, s.m());
    for k in 0..blocks {
        a.w_terms[k].push((-1.0, bv.clone()));
    }
    if with_d2d {
        a.p_coef = DVector::from_fn(s.m(), |m, _| -ch.h_d2dtx_bs[m].dotc(&v).norm_sqr());
    }
    a.constant = 2.0 * f0 - s.noise_radar * v.norm_squared();
    Ok(a)
}

/// Tangent upper bounds `Ẽ` of the interference terms of every CU and D2D rate, in bits.
#[derive(Debug, Clone, PartialEq)]
pub struct RateSurrogates {
    pub cu: Vec<WAffine>,
    pub d2d: Vec<WAffine>,
}

fn log2_tangent(interf: WAffine, ws: &[CMat], p: &DVector<f64>) -> WAffine {
    let i0 = interf.eval(ws, p);
    // log2(I0) + (I − I0)/(I0 ln 2)
    let mut t = interf.scaled(1.0 / (i0 * LN_2));
    t.constant += i0.log2() - 1.0 / LN_2;
    t
}

pub fn linearize_rate_terms(prev: &Iterate, s: &Scenario, ch: &ChannelSet) -> RateSurrogates {
    RateSurrogates {
        cu: (0..s.k()).map(|k| log2_tangent(cu_power(s, ch, k, true), &prev.big_w, &prev.p)).collect(),
        d2d: (0..s.m()).map(|m| log2_tangent(d2d_power(s, ch, m, true), &prev.big_w, &prev.p)).collect(),
    }
}

/// Exact interference terms `E_k^CU`, `E_m^D2D` in bits.
pub fn rate_e_terms(s: &Scenario, ch: &ChannelSet, ws: &[CMat], p: &DVector<f64>) -> (Vec<f64>, Vec<f64>) {
    (
        (0..s.k()).map(|k| cu_power(s, ch, k, true).eval(ws, p).log2()).collect(),
        (0..s.m()).map(|m| d2d_power(s, ch, m, true).eval(ws, p).log2()).collect(),
    )
}

/// Negated relaxed sum rate `−Σ log2(1 + SINR)` in covariance form.
pub fn true_objective(s: &Scenario, ch: &ChannelSet, ws: &[CMat], p: &DVector<f64>) -> f64 {
    let cu: f64 = (0..s.k()).map(|k| (1.0 + cu_sinr_cov(s, ch, ws, p, k)).log2()).sum();
    let d2d: f64 = (0..s.m()).map(|m| (1.0 + d2d_sinr_cov(s, ch, ws, p, m)).log2()).sum();
    -(cu + d2d)
}

#[derive(Debug, Clone, PartialEq)]
pub struct Iterate {
    pub big_w: Vec<CMat>,
    pub p: DVector<f64>,
    pub objective: f64,
    pub g_prev: InterferenceMatrix,
}

impl Iterate {
    pub fn new(s: &Scenario, ch: &ChannelSet, big_w: Vec<CMat>, p: DVector<f64>) -> Self {
        let f = sum_cov(&big_w, s.array.n_tx);
        let g_prev = InterferenceMatrix { g: radar_interference(s, ch, &f, &p, true) };
        let objective = true_objective(s, ch, &big_w, &p);
        Iterate { big_w, p, objective, g_prev }
    }

    /// MRT-shaped start `W_k = (P_BS/K) ĥĥᴴ`, `p_m = P_m/2`; with `blend` half of each
    /// beam's trace is moved onto `a_t(θ0)`.
    pub fn initial(s: &Scenario, ch: &ChannelSet, blend: bool) -> Self {
        let per = s.p_bs_max / s.k() as f64;
        let ws = ch
            .h_bs_cu
            .iter()
            .map(|h| {
                let hh = outer(&(h / c(h.norm(), 0.0)));
                if blend {
                    (hh + outer(&ch.a_t0)) * c(0.5 * per, 0.0)
                } else {
                    hh * c(per, 0.0)
                }
            })
            .collect();
        let p = DVector::from_iterator(s.m(), s.p_d2d_max.iter().map(|pm| 0.5 * pm));
        Iterate::new(s, ch, ws, p)
    }
}

/// Radar constraint data of a subproblem: `φ̄ · f̄ ≥ κ`.
#[derive(Debug, Clone, PartialEq)]
pub struct RadarSurrogate {
    pub phi: WAffine,
    pub f_tilde: WAffine,
    /// γ_r / |α0|², the bound on `φ · f̃`.
    pub product_min: f64,
}

impl RadarSurrogate {
    /// `φ·f̃ / (γ_r/|α0|²) − 1`, nonnegative when the surrogate constraint holds.
    pub fn slack(&self, ws: &[CMat], p: &DVector<f64>) -> f64 {
        let ph = self.phi.eval(ws, p);
        let f = self.f_tilde.eval(ws, p);
        if ph < 0.0 || f < 0.0 {
            return -1.0;
        }
        ph * f / self.product_min - 1.0
    }
}

/// One convexified subproblem and the data needed to interpret its solution.
#[derive(Debug, Clone)]
pub struct Subproblem {
    pub program: ConicProgram,
    pub rates: RateSurrogates,
    pub radar: Option<RadarSurrogate>,
    k: usize,
    m: usize,
    n_tx: usize,
    p_bs: f64,
    p_max: Vec<f64>,
    cu_total: Vec<WAffine>,
    d2d_total: Vec<WAffine>,
}

impl Subproblem {
    /// Real degrees of freedom: `K·N_t² + M`.
    pub fn variable_count(&self) -> usize {
        self.k * self.n_tx * self.n_tx + self.m
    }

    /// `−Σ C̃^CU − Σ C̃^D2D` evaluated exactly at `(W, p)`.
    pub fn objective(&self, ws: &[CMat], p: &DVector<f64>) -> f64 {
        let mut acc = 0.0;
        for (t, e) in self.cu_total.iter().zip(&self.rates.cu).chain(self.d2d_total.iter().zip(&self.rates.d2d)) {
            acc += -t.eval(ws, p).log2() + e.eval(ws, p);
        }
        acc
    }

    /// Covariances and powers from a solver answer, projected onto the budgets.
    pub fn decode(&self, sol: &ConicSolution) -> (Vec<CMat>, DVector<f64>) {
        let mut ws: Vec<CMat> =
            (0..self.k).map(|k| psd_part(&extract_hermitian(sol.x[k].mat())) * c(self.p_bs, 0.0)).collect();
        let total: f64 = ws.iter().map(htrace).sum();
        if total > self.p_bs {
            let shrink = self.p_bs / total;
            for w in &mut ws {
                *w *= c(shrink, 0.0);
            }
        }
        let p = if self.m > 0 {
            let raw = sol.x[self.k].vec();
            DVector::from_fn(self.m, |i, _| (raw[i] * self.p_max[i]).clamp(0.0, self.p_max[i]))
        } else {
            DVector::zeros(0)
        };
        (ws, p)
    }
}

/// Builds the convex subproblem around `prev`. With `radar = false` (or γ_r = 0)
/// the radar constraint is left out.
pub fn build_subproblem(prev: &Iterate, s: &Scenario, ch: &ChannelSet, radar: bool) -> Result<Subproblem> {
    let (k, m, nt) = (s.k(), s.m(), s.array.n_tx);
    if prev.big_w.len() != k || prev.p.len() != m || prev.big_w.iter().any(|w| w.nrows() != nt || w.ncols() != nt) {
        return Err(CoreError::InvalidScenario("iterate dimensions do not match the scenario".into()));
    }
    let mut prog = ConicProgram::new();
    for _ in 0..k {
        prog.add_block(Block::Psd { dim: 2 * nt, complex: true });
    }
    let p_block = if m > 0 { prog.add_block(Block::Nonneg(m)) } else { usize::MAX };

    let rates = linearize_rate_terms(prev, s, ch);
    let cu_total: Vec<WAffine> = (0..k).map(|i| cu_power(s, ch, i, false)).collect();
    let d2d_total: Vec<WAffine> = (0..m).map(|i| d2d_power(s, ch, i, false)).collect();

    let mut objective = Affine::constant(0.0);
    for (total, e) in cu_total.iter().zip(&rates.cu).chain(d2d_total.iter().zip(&rates.d2d)) {
        // −log2(T) = −log2(T0) − ln(T/T0)/ln 2
        let t0 = total.eval(&prev.big_w, &prev.p);
        objective = objective.add_const(-t0.log2()).plus(&e.to_conic(1.0, s, p_block));
        prog.logs.push(LogTerm { weight: 1.0 / LN_2, arg: total.to_conic(1.0 / t0, s, p_block) });
    }
    prog.objective = objective;

    let mut budget = Affine::constant(1.0);
    for i in 0..k {
        budget = budget.add_sym(i, trace_form(-1.0));
    }
    prog.ineqs.push(budget);
    for i in 0..m {
        prog.ineqs.push(Affine::constant(1.0).add_entry(p_block, i, -1.0));
    }

    let radar_sur = if radar && s.gamma_r > 0.0 {
        let f_tilde = linearize_f(s, ch, &prev.g_prev, true)?;
        let f0 = prev.g_prev.inverse_quad(&ch.a_r0)?;
        let ph = phi(s, ch);
        let product_min = s.gamma_r / ch.target_amp.norm_sqr();
        let kappa = product_min / (s.p_bs_max * f0);
        let phi_bar = ph.to_conic(1.0 / s.p_bs_max, s, p_block);
        let f_bar = f_tilde.to_conic(1.0 / f0, s, p_block);
        // φ̄ f̄ ≥ κ, φ̄, f̄ ≥ 0  ⇔  ‖(φ̄ − f̄, 2√κ)‖ ≤ φ̄ + f̄
        prog.socs.push(vec![
            phi_bar.clone().plus(&f_bar),
            phi_bar.plus(&f_bar.scaled(-1.0)),
            Affine::constant(2.0 * kappa.sqrt()),
        ]);
        Some(RadarSurrogate { phi: ph, f_tilde, product_min })
    } else {
        None
    };

    Ok(Subproblem {
        program: prog,
        rates,
        radar: radar_sur,
        k,
        m,
        n_tx: nt,
        p_bs: s.p_bs_max,
        p_max: s.p_d2d_max.clone(),
        cu_total,
        d2d_total,
    })
}

/// Options that distinguish the proposed scheme from the communication-only one.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ScaOptions {
    pub radar: bool,
    /// Seed of the Gaussian-randomization stream.
    pub seed: u64,
}

pub fn sca_solve(
    s: &Scenario,
    ch: &ChannelSet,
    settings: &ScaSettings,
    init: Option<Iterate>,
    opts: ScaOptions,
) -> Result<RunReport> {
    settings.validate()?;
    let start = Instant::now();
    let mut report = RunReport::new(if opts.radar { "proposed" } else { "comm_only" });
    let custom_init = init.is_some();
    let mut cur = init.unwrap_or_else(|| Iterate::initial(s, ch, false));

    for t in 1..=settings.max_iters {
        let (sub, sol) = match solve_step(&cur, s, ch, settings, opts.radar) {
            Ok(x) => x,
            Err(CoreError::SolverFailure { status: Status::Infeasible, .. }) if t == 1 && opts.radar => {
                if custom_init {
                    return Err(CoreError::InfeasibleRadarConstraint);
                }
                log::debug!("first subproblem radar-infeasible, retrying from blended start");
                cur = Iterate::initial(s, ch, true);
                report.notes.push("initial point blended toward a_t(theta0)".into());
                match solve_step(&cur, s, ch, settings, opts.radar) {
                    Ok(x) => x,
                    Err(CoreError::SolverFailure { status: Status::Infeasible, .. }) => {
                        return Err(CoreError::InfeasibleRadarConstraint)
                    }
                    Err(e) => return Err(e),
                }
            }
            Err(CoreError::SolverFailure { status, .. }) => {
                return Err(CoreError::SolverFailure { status, iteration: t })
            }
            Err(e) => return Err(e),
        };
        report.solver.push(SolverDiag::of(&sol));
        let (ws, p) = sub.decode(&sol);
        let new_val = sub.objective(&ws, &p);
        // the previous iterate is feasible here and the surrogates are tight at it
        let keep_val = sub.objective(&cur.big_w, &cur.p);
        report.iterations = t;
        if t > 1 && new_val > keep_val {
            report.objective_trace.push(keep_val);
            report.true_objective_trace.push(cur.objective);
            report.rank_ratios.push(cur.big_w.iter().map(rank_ratio).collect());
            report.converged = true;
            report.notes.push(format!("iteration {t}: solver point not better than previous, kept previous"));
            break;
        }
        report.rank_ratios.push(ws.iter().map(rank_ratio).collect());
        cur = Iterate::new(s, ch, ws, p);
        report.true_objective_trace.push(cur.objective);
        report.objective_trace.push(new_val);
        let n = report.objective_trace.len();
        if n >= 2 {
            let prev = report.objective_trace[n - 2];
            if ((new_val - prev) / prev.abs().max(f64::MIN_POSITIVE)).abs() < settings.rel_tol {
                report.converged = true;
                break;
            }
        }
    }

    let mut ws = cur.big_w.clone();
    let mut w = Vec::with_capacity(s.k());
    for k in 0..s.k() {
        let ctx = ExtractionContext { s, ch, ws: &ws, p: &cur.p, k, radar: opts.radar, seed: opts.seed };
        let (wk, path) = extract_rank_one(&cur.big_w[k], settings, &ctx)?;
        ws[k] = outer(&wk);
        w.push(wk);
        report.extraction.push(path.to_string());
    }
    let f = sum_cov(&ws, s.array.n_tx);
    let g = InterferenceMatrix { g: radar_interference(s, ch, &f, &cur.p, true) };
    let u = mvdr(&g, s.target_angle)?;
    let sol = Solution { w, big_w: None, u, p: cur.p.clone() };
    report.metrics = Some(crate::metrics::evaluate(s, ch, &sol));
    report.solution = Some(sol);
    report.wall_time_s = start.elapsed().as_secs_f64();
    Ok(report)
}

fn solve_step(
    cur: &Iterate,
    s: &Scenario,
    ch: &ChannelSet,
    settings: &ScaSettings,
    radar: bool,
) -> Result<(Subproblem, ConicSolution)> {
    let sub = build_subproblem(cur, s, ch, radar)?;
    let sol = solve(&sub.program, &settings.solver)?;
    if sol.status != Status::Optimal {
        log::debug!("subproblem status {:?}, residuals {:?}", sol.status, sol.residuals);
        return Err(CoreError::SolverFailure { status: sol.status, iteration: 0 });
    }
    Ok((sub, sol))
}

/// Everything the randomization step needs to score a candidate for beam `k`.
pub struct ExtractionContext<'a> {
    pub s: &'a Scenario,
    pub ch: &'a ChannelSet,
    /// Current covariances of all beams (entry `k` is replaced by each candidate).
    pub ws: &'a [CMat],
    pub p: &'a DVector<f64>,
    pub k: usize,
    pub radar: bool,
    pub seed: u64,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ExtractionPath {
    Evd,
    Randomized,
}

impl std::fmt::Display for ExtractionPath {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(match self {
            ExtractionPath::Evd => "evd",
            ExtractionPath::Randomized => "randomized",
        })
    }
}

/// Rotates `w` so its first component of magnitude above 1e-12 is real positive.
pub fn fix_phase(mut w: CVec) -> CVec {
    if let Some(z) = w.iter().find(|z| z.norm() > 1e-12).copied() {
        w *= z.conj() / z.norm();
    }
    w
}

pub fn extract_rank_one(
    w: &CMat,
    settings: &ScaSettings,
    ctx: &ExtractionContext,
) -> Result<(CVec, ExtractionPath)> {
    let (vals, vecs) = eig_desc(w);
    let ratio = rank_ratio(w);
    let lead = vals[0].max(0.0);
    if ratio > settings.rank_ratio_threshold || lead == 0.0 {
        return Ok((fix_phase(&vecs[0] * c(lead.sqrt(), 0.0)), ExtractionPath::Evd));
    }

    let tr = htrace(w).max(0.0);
    let n = w.nrows();
    let scale_to = |v: CVec| -> CVec {
        let nn = v.norm();
        if nn > 0.0 {
            v * c(tr.sqrt() / nn, 0.0)
        } else {
            v
        }
    };
    let mut r = rng(ctx.seed.wrapping_add(ctx.k as u64), STREAM_RANDOMIZATION);
    let mut candidates = vec![scale_to(vecs[0].clone())];
    for _ in 0..settings.randomization_samples {
        // w = V Λ^{1/2} z with z ~ CN(0, I)
        let mut v = CVec::zeros(n);
        for (l, e) in vals.iter().zip(&vecs) {
            if *l > 0.0 {
                let re: f64 = StandardNormal.sample(&mut r);
                let im: f64 = StandardNormal.sample(&mut r);
                v += e * (c(re, im) * (0.5 * l).sqrt());
            }
        }
        candidates.push(scale_to(v));
    }

    let mut best: Option<(f64, CVec)> = None;
    let mut ws = ctx.ws.to_vec();
    for cand in candidates {
        ws[ctx.k] = outer(&cand);
        if ctx.radar && ctx.s.gamma_r > 0.0 {
            let f = sum_cov(&ws, n);
            if optimal_radar_sinr(ctx.s, ctx.ch, &f, ctx.p)? < ctx.s.gamma_r * (1.0 - 1e-6) {
                continue;
            }
        }
        let val = -true_objective(ctx.s, ctx.ch, &ws, ctx.p);
        if best.as_ref().map_or(true, |(b, _)| val > *b) {
            best = Some((val, cand));
        }
    }
    best.map(|(_, v)| (fix_phase(v), ExtractionPath::Randomized)).ok_or(CoreError::RandomizationFailure)
}

/// Worst-case interior-point cost of one subproblem with the cone accounting
/// of `2M+1` scalar, `K` order-`N_t` and one order-2 semidefinite constraint:
/// `√μ (l Σn_soc² + l² Σn_sd² + l Σn_sd³ + l³) ln(1/ε)` with `l = K N_t² + M`.
pub fn complexity_estimate(k: usize, n_t: usize, m: usize, eps: f64) -> f64 {
    let (k, n, m) = (k as f64, n_t as f64, m as f64);
    let l = k * n * n + m;
    let sd_sizes = [(2.0 * m + 1.0, 1.0), (k, n), (1.0, 2.0)];
    let mu: f64 = sd_sizes.iter().map(|(cnt, sz)| cnt * sz).sum();
    let sq: f64 = sd_sizes.iter().map(|(cnt, sz)| cnt * sz * sz).sum();
    let cube: f64 = sd_sizes.iter().map(|(cnt, sz)| cnt * sz * sz * sz).sum();
    mu.sqrt() * (l * l * sq + l * cube + l * l * l) * (1.0 / eps).ln()
}
