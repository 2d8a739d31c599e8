//! Comparison schemes: MRT, ZF, sensing-only and communication-only.

use std::time::Instant;

use isac_conic::embed::{extract_hermitian, quadratic_form, trace_form};
use isac_conic::{solve, Affine, Block, ConicProgram, Status};
use nalgebra::DVector;
use serde::{Deserialize, Serialize};

use crate::error::Result;
use crate::linalg::{c, cholesky, eig_desc, htrace, outer, psd_part, quad, CMat, CVec};
use crate::metrics::{evaluate, radar_interference, Solution};
use crate::report::{RunReport, SolverDiag};
use crate::rxbeam::{mvdr, InterferenceMatrix};
use crate::sca::{linearize_f_blocks, sca_solve, ScaOptions, ScaSettings};
use crate::scenario::{linear_to_db, ChannelSet, Scenario};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum BaselineKind {
    Mrt,
    Zf,
    SensingOnly,
    CommOnly,
}

/// Fixed powers `p_m = P_m` and the MVDR filter for the given beams.
fn with_fixed_powers(s: &Scenario, ch: &ChannelSet, w: Vec<CVec>) -> Result<Solution> {
    let p = DVector::from_column_slice(&s.p_d2d_max);
    let f = w.iter().fold(CMat::zeros(s.array.n_tx, s.array.n_tx), |acc, x| acc + outer(x));
    let g = InterferenceMatrix { g: radar_interference(s, ch, &f, &p, true) };
    let u = mvdr(&g, s.target_angle)?;
    Ok(Solution { w, big_w: None, u, p })
}

fn scaled_to(v: CVec, power: f64) -> CVec {
    let n = v.norm();
    if n == 0.0 {
        return v;
    }
    v * c(power.sqrt() / n, 0.0)
}

/// `w_k = √(P_BS/K) h_{BS,k}/‖h_{BS,k}‖`.
pub fn mrt(s: &Scenario, ch: &ChannelSet) -> Result<Solution> {
    let per = s.p_bs_max / s.k() as f64;
    let w = ch.h_bs_cu.iter().map(|h| scaled_to(h.clone(), per)).collect();
    with_fixed_powers(s, ch, w)
}

/// Orthogonal projector onto the complement of the column space of `h`.
pub fn null_projector(h: &CMat) -> CMat {
    let n = h.nrows();
    if h.ncols() == 0 {
        return CMat::identity(n, n);
    }
    let gram = h.adjoint() * h;
    let proj = match cholesky(&gram) {
        Ok(chol) => h * chol.solve(&h.adjoint()),
        Err(_) => {
            log::warn!("ZF channel matrix is rank deficient, using the pseudo-inverse");
            let pinv = h.clone().pseudo_inverse(1e-12 * h.norm()).expect("pseudo-inverse of a finite matrix");
            h * pinv
        }
    };
    CMat::identity(n, n) - proj
}

/// Beam `k` steered into the null space of the D2D-RX channels and the other CUs.
pub fn zf(s: &Scenario, ch: &ChannelSet) -> Result<Solution> {
    let per = s.p_bs_max / s.k() as f64;
    let mut w = Vec::with_capacity(s.k());
    for k in 0..s.k() {
        let cols: Vec<CVec> =
            ch.h_bs_d2drx.iter().cloned().chain((0..s.k()).filter(|&j| j != k).map(|j| ch.h_bs_cu[j].clone())).collect();
        let h = CMat::from_columns(&cols);
        let p = null_projector(&h);
        // a second pass removes the rounding left by the first projection
        let v = &p * (&p * &ch.h_bs_cu[k]);
        if v.norm() == 0.0 {
            log::warn!("CU {k} lies in the span of the nulled channels; ZF beam is zero");
        }
        w.push(scaled_to(v, per));
    }
    with_fixed_powers(s, ch, w)
}

/// Radar SINR with the D2D term left out of G.
fn sensing_sinr(s: &Scenario, ch: &ChannelSet, f: &CMat) -> Result<f64> {
    let g = InterferenceMatrix { g: radar_interference(s, ch, f, &DVector::zeros(s.m()), false) };
    Ok(ch.target_amp.norm_sqr() * quad(f, &ch.a_t0) * g.inverse_quad(&ch.a_r0)?)
}

/// Bracket width at which the sensing-only bisection stops, in dB.
pub const SENSING_BRACKET_DB: f64 = 0.05;

/// Power-minimizing SCA at a fixed SINR target: returns a covariance with
/// `tr F ≤ P_BS` whose sensing SINR reaches `gamma`, or `None`.
fn probe(s: &Scenario, ch: &ChannelSet, gamma: f64, start: &CMat, settings: &ScaSettings, diags: &mut Vec<SolverDiag>) -> Result<Option<CMat>> {
    let nt = s.array.n_tx;
    let a0 = ch.target_amp.norm_sqr();
    let mut f0 = start.clone();
    let mut prev_tr = f64::INFINITY;
    for _ in 0..settings.max_iters {
        let g0 = InterferenceMatrix { g: radar_interference(s, ch, &f0, &DVector::zeros(s.m()), false) };
        let ft = linearize_f_blocks(s, ch, &g0, false, 1)?;
        let fv = g0.inverse_quad(&ch.a_r0)?;
        let kappa = gamma / (a0 * s.p_bs_max * fv);
        let mut prog = ConicProgram::new();
        let blk = prog.add_block(Block::Psd { dim: 2 * nt, complex: true });
        prog.objective = Affine::constant(0.0).add_sym(blk, trace_form(1.0));
        let phi_bar = Affine::constant(0.0).add_sym(blk, quadratic_form(&ch.a_t0, 1.0));
        let f_bar = ft.to_conic(1.0 / fv, s, usize::MAX);
        prog.socs.push(vec![
            phi_bar.clone().plus(&f_bar),
            phi_bar.plus(&f_bar.scaled(-1.0)),
            Affine::constant(2.0 * kappa.sqrt()),
        ]);
        let sol = solve(&prog, &settings.solver)?;
        diags.push(SolverDiag::of(&sol));
        if sol.status != Status::Optimal {
            log::debug!("sensing probe at {:.3} dB stopped with {:?}", linear_to_db(gamma), sol.status);
            return Ok(None);
        }
        let f = psd_part(&extract_hermitian(sol.x[blk].mat())) * c(s.p_bs_max, 0.0);
        let tr = htrace(&f);
        if tr <= s.p_bs_max * (1.0 + 1e-9) && sensing_sinr(s, ch, &f)? >= gamma * (1.0 - 1e-9) {
            return Ok(Some(f));
        }
        if ((prev_tr - tr) / tr).abs() < settings.rel_tol {
            return Ok(None);
        }
        prev_tr = tr;
        f0 = f;
    }
    Ok(None)
}

/// Maximizes the radar SINR over `tr F ≤ P_BS` by bisection in dB between the
/// SINR of `P_BS a_t a_tᴴ` and the clutter-free bound `|α0|² P_BS / σ_r²`.
pub fn sensing_only(s: &Scenario, ch: &ChannelSet, settings: &ScaSettings) -> Result<RunReport> {
    let start = Instant::now();
    let mut report = RunReport::new("sensing_only");
    report.notes.push("sensing objective omits D2D interference from G; reported metrics use the full model with p_m = P_m".into());
    let upper = ch.target_amp.norm_sqr() * s.p_bs_max / s.noise_radar;
    let mut best = outer(&ch.a_t0) * c(s.p_bs_max, 0.0);
    let mut lo = linear_to_db(sensing_sinr(s, ch, &best)?);
    let mut hi = linear_to_db(upper).max(lo);
    let mut probes = 0;
    while hi - lo > SENSING_BRACKET_DB {
        let mid = 0.5 * (lo + hi);
        probes += 1;
        match probe(s, ch, crate::scenario::db_to_linear(mid), &best, settings, &mut report.solver)? {
            Some(f) => {
                // more power never lowers the SINR, so use the whole budget
                let f = &f * c(s.p_bs_max / htrace(&f), 0.0);
                lo = linear_to_db(sensing_sinr(s, ch, &f)?).clamp(mid, hi);
                best = f;
            }
            None => hi = mid,
        }
    }
    report.iterations = probes;
    report.converged = true;
    report.bracket_db = Some([lo, hi]);
    report.notes.push(format!("bisection bracket [{lo:.4}, {hi:.4}] dB after {probes} probes"));

    let (vals, vecs) = eig_desc(&best);
    let w: Vec<CVec> = (0..s.k())
        .map(|k| {
            if k < vals.len() && vals[k] > 0.0 {
                &vecs[k] * c(vals[k].sqrt(), 0.0)
            } else {
                CVec::zeros(s.array.n_tx)
            }
        })
        .collect();
    let sol = with_fixed_powers(s, ch, w)?;
    report.metrics = Some(evaluate(s, ch, &sol));
    report.solution = Some(sol);
    report.wall_time_s = start.elapsed().as_secs_f64();
    Ok(report)
}

/// SCA with the radar constraint removed.
pub fn comm_only(s: &Scenario, ch: &ChannelSet, settings: &ScaSettings, seed: u64) -> Result<RunReport> {
    sca_solve(s, ch, settings, None, ScaOptions { radar: false, seed })
}

/// Wraps a closed-form baseline into a report.
pub fn fixed_report(name: &str, s: &Scenario, ch: &ChannelSet, sol: Solution) -> RunReport {
    let mut report = RunReport::new(name);
    report.converged = true;
    report.metrics = Some(evaluate(s, ch, &sol));
    report.solution = Some(sol);
    report
}

pub fn run_baseline(kind: BaselineKind, s: &Scenario, ch: &ChannelSet, settings: &ScaSettings, seed: u64) -> Result<RunReport> {
    match kind {
        BaselineKind::Mrt => Ok(fixed_report("mrt", s, ch, mrt(s, ch)?)),
        BaselineKind::Zf => Ok(fixed_report("zf", s, ch, zf(s, ch)?)),
        BaselineKind::SensingOnly => sensing_only(s, ch, settings),
        BaselineKind::CommOnly => comm_only(s, ch, settings, seed),
    }
}
