//! Primal log-barrier phase I.
//!
//! Finds a strictly interior point of `{Ax = b, x ∈ K}` by minimizing an
//! artificial residual multiplier along the central path of `t·ŝ + Φ(x)`, or
//! certifies that no such point exists. Only a coarse center is needed, which
//! keeps the method clear of the rounding floor a primal barrier hits at
//! large `t`.

use nalgebra::{Cholesky, DMatrix, DVector};

use crate::embed::project_structured;
use crate::lower::{coef_dot, dense_vec, sym, StdForm};
use crate::program::{Block, BlockValue, Coef, ToleranceSet};
use crate::sym::SymCoef;

// the artificial variable sits near 1/t at the center, so start where that is below 1
const PHASE1_T0: f64 = 10.0;
const MU: f64 = 10.0;
const CENTER_EPS: f64 = 1e-11;
const MAX_CENTER_STEPS: usize = 80;
const ARMIJO: f64 = 0.25;
// below this squared decrement steps are damped rather than line-searched
const DAMPED_DEC: f64 = 1.0;
const BACKTRACK: f64 = 0.5;
const STALL_DEC: f64 = 1e-3;
const MIN_STEP: f64 = 1e-14;

pub(crate) struct Counter {
    pub newton: usize,
    pub outer: usize,
    pub limit: usize,
}

pub(crate) enum PhaseOne {
    Interior(Vec<BlockValue>),
    Infeasible(f64),
    Failed,
}

/// `min ŝ  s.t.  A x̃ + ŝ·r0 = b + r0,  x̃ ∈ K, ŝ ≥ 0` with `r0 = b − A e`, started
/// at `(e, 2)`. Any iterate with `ŝ < 1` blends with the start into a strictly
/// feasible point of the original problem.
pub(crate) fn phase_one(std: &StdForm, tol: &ToleranceSet, counter: &mut Counter) -> PhaseOne {
    let e = std.identity();
    let r0 = &std.b - std.apply(&e);
    if r0.amax() <= 1e-13 * (1.0 + std.b.amax()) {
        return PhaseOne::Interior(e);
    }
    let mut aux = std.clone();
    let sb = aux.cones.len();
    aux.cones.push(Block::Nonneg(1));
    for (i, row) in aux.rows.iter_mut().enumerate() {
        if r0[i] != 0.0 {
            row.push((sb, Coef::Vec(vec![(0, r0[i])])));
        }
    }
    aux.b = &std.b + &r0;
    aux.c = vec![None; aux.cones.len()];
    aux.c[sb] = Some(Coef::Vec(vec![(0, 1.0)]));
    aux.logw = vec![None; aux.cones.len()];
    aux.obj_const = 0.0;
    aux.index();

    let pre = Pre::new(&aux);
    let deg = aux.degree();
    let mut x = e.clone();
    x.push(BlockValue::Vec(DVector::from_element(1, 2.0)));
    let shat = |x: &[BlockValue]| x[sb].vec()[0];
    let mut t = PHASE1_T0;
    while counter.outer < tol.max_iters {
        counter.outer += 1;
        match center(&aux, &pre, &mut x, t, counter, |x| shat(x) < 1.0) {
            Centering::Exit => {
                let s = shat(&x) - 1.0;
                let lam = 1.0 / (1.0 - s);
                let blended = x[..sb]
                    .iter()
                    .zip(&e)
                    .map(|(xt, e)| match (xt, e) {
                        (BlockValue::Mat(a), BlockValue::Mat(b)) => BlockValue::Mat(a * lam + b * (1.0 - lam)),
                        (BlockValue::Vec(a), BlockValue::Vec(b)) => BlockValue::Vec(a * lam + b * (1.0 - lam)),
                        _ => unreachable!(),
                    })
                    .collect();
                return PhaseOne::Interior(blended);
            }
            Centering::Done => {}
            Centering::Failed => return PhaseOne::Failed,
        }
        let lower = shat(&x) - 1.0 - deg / t;
        if lower > 10.0 * tol.feas {
            return PhaseOne::Infeasible(lower);
        }
        if deg / t <= 0.1 * tol.feas {
            return PhaseOne::Failed;
        }
        t *= MU;
    }
    PhaseOne::Failed
}

enum Centering {
    Done,
    Exit,
    Failed,
}

fn center(
    std: &StdForm,
    pre: &Pre,
    x: &mut Vec<BlockValue>,
    t: f64,
    counter: &mut Counter,
    exit: impl Fn(&[BlockValue]) -> bool,
) -> Centering {
    let mut prev_dec = f64::INFINITY;
    let mut stalls = 0;
    for _ in 0..MAX_CENTER_STEPS {
        if counter.newton >= counter.limit {
            return Centering::Failed;
        }
        counter.newton += 1;
        let Some(nt) = newton(std, pre, x, t) else {
            return Centering::Failed;
        };
        if !nt.dec.is_finite() {
            return Centering::Failed;
        }
        if nt.dec * 0.5 <= CENTER_EPS {
            return Centering::Done;
        }
        // near the center the decrease is too small to measure against t·f0,
        // so stop once the decrement no longer shrinks; farther out a slowly
        // shrinking decrement is just damped progress
        if nt.dec >= 0.9 * prev_dec && nt.dec < STALL_DEC {
            stalls += 1;
            if stalls >= 5 {
                return Centering::Done;
            }
        }
        prev_dec = nt.dec;
        let lam = nt.dec.sqrt();
        let mut accepted = None;
        if nt.dec >= DAMPED_DEC {
            let lin = lin_dot(std, &nt.dx);
            let mut alpha = 1.0;
            while alpha >= MIN_STEP {
                if let Some((xn, df)) = trial(std, x, &nt.dx, alpha, t, lin) {
                    // on the affine set the directional derivative is −dec; the
                    // explicit slope loses digits to cancellation at large t
                    if df <= -ARMIJO * alpha * nt.dec {
                        accepted = Some(xn);
                        break;
                    }
                }
                alpha *= BACKTRACK;
            }
        }
        if accepted.is_none() {
            // damped Newton step of a self-concordant function: stays in the
            // domain and decreases the barrier without a function test, which
            // at large t is swamped by rounding in t·f0
            let mut alpha = if lam <= 0.25 { 1.0 } else { 1.0 / (1.0 + lam) };
            while alpha >= MIN_STEP {
                if let Some((xn, _)) = trial(std, x, &nt.dx, alpha, t, 0.0) {
                    accepted = Some(xn);
                    break;
                }
                alpha *= BACKTRACK;
            }
        }
        match accepted {
            Some(xn) => *x = xn,
            None => return Centering::Failed,
        }
        if exit(x) {
            return Centering::Exit;
        }
    }
    Centering::Done
}

/// Per-solve constants.
struct Pre {
    c_mat: Vec<Option<DMatrix<f64>>>,
    c_vec: Vec<Option<DVector<f64>>>,
    free_offset: Vec<Option<usize>>,
    n_free: usize,
}

impl Pre {
    fn new(std: &StdForm) -> Pre {
        let mut c_mat = Vec::new();
        let mut c_vec = Vec::new();
        let mut free_offset = Vec::new();
        let mut n_free = 0;
        for (b, cone) in std.cones.iter().enumerate() {
            match *cone {
                Block::Psd { dim, .. } => {
                    c_mat.push(std.c[b].as_ref().map(|c| sym(c).to_dense(dim)));
                    c_vec.push(None);
                    free_offset.push(None);
                }
                _ => {
                    let n = cone.len();
                    c_mat.push(None);
                    c_vec.push(Some(match &std.c[b] {
                        Some(Coef::Vec(v)) => dense_vec(v, n),
                        _ => DVector::zeros(n),
                    }));
                    if let Block::Free(_) = cone {
                        free_offset.push(Some(n_free));
                        n_free += n;
                    } else {
                        free_offset.push(None);
                    }
                }
            }
        }
        Pre { c_mat, c_vec, free_offset, n_free }
    }
}

struct Newton {
    dx: Vec<BlockValue>,
    /// `dxᵀ H dx`, the squared Newton decrement.
    dec: f64,
}

fn soc_gamma(x: &DVector<f64>) -> f64 {
    x[0] * x[0] - x.rows(1, x.len() - 1).norm_squared()
}

fn soc_jx(x: &DVector<f64>) -> DVector<f64> {
    let mut j = x.clone();
    for i in 1..j.len() {
        j[i] = -j[i];
    }
    j
}

fn log_weights(std: &StdForm, b: usize, n: usize, t: f64) -> DVector<f64> {
    match &std.logw[b] {
        Some(w) => w.map(|w| 1.0 + t * w),
        None => DVector::from_element(n, 1.0),
    }
}

fn newton(std: &StdForm, pre: &Pre, x: &[BlockValue], t: f64) -> Option<Newton> {
    let m = std.m();
    let nf = pre.n_free;
    let mut big_m = DMatrix::<f64>::zeros(m, m);
    let mut rhs = std.apply(x) - &std.b;
    let mut af = DMatrix::<f64>::zeros(m, nf);
    let mut gf = DVector::<f64>::zeros(nf);
    let mut grads: Vec<BlockValue> = Vec::with_capacity(x.len());
    let mut xinvs: Vec<Option<DMatrix<f64>>> = Vec::with_capacity(x.len());

    for (b, cone) in std.cones.iter().enumerate() {
        let touching = &std.touching[b];
        match *cone {
            Block::Psd { dim: n, .. } => {
                let xm = x[b].mat();
                let chol = Cholesky::new(xm.clone())?;
                let xinv = chol.inverse();
                let mut g = -&xinv;
                if let Some(c) = &pre.c_mat[b] {
                    g += c * t;
                }
                // X g X rather than tXCX − X: the small-eigenvalue directions
                // of X then see only small absolute errors
                let hg = xm * &g * xm;
                let sandwiches: Vec<SymCoef> = touching
                    .iter()
                    .map(|&(i, pos)| match sym(&std.rows[i][pos].1) {
                        SymCoef::Identity(s) => SymCoef::Dense(xm * xm * *s),
                        other => other.sandwich(xm),
                    })
                    .collect();
                for (a, &(i, pos)) in touching.iter().enumerate() {
                    let ai = sym(&std.rows[i][pos].1);
                    rhs[i] -= ai.dot(&hg);
                    for (bidx, &(j, _)) in touching.iter().enumerate().skip(a) {
                        let v = ai.inner(&sandwiches[bidx], n);
                        big_m[(i, j)] += v;
                        if i != j {
                            big_m[(j, i)] += v;
                        }
                    }
                }
                grads.push(BlockValue::Mat(g));
                xinvs.push(Some(xinv));
            }
            Block::Nonneg(n) => {
                let xv = x[b].vec();
                let k = log_weights(std, b, n, t);
                let d = k.zip_map(xv, |k, x| k / (x * x));
                let g = pre.c_vec[b].as_ref().unwrap() * t - k.zip_map(xv, |k, x| k / x);
                let hg = g.component_div(&d);
                let rows: Vec<DVector<f64>> = touching.iter().map(|&(i, pos)| vec_coef(std, i, pos, n)).collect();
                for (a, &(i, _)) in touching.iter().enumerate() {
                    rhs[i] -= rows[a].dot(&hg);
                    for (bi, &(j, _)) in touching.iter().enumerate().skip(a) {
                        let v: f64 = rows[a].iter().zip(rows[bi].iter()).zip(d.iter()).map(|((p, q), d)| p * q / d).sum();
                        big_m[(i, j)] += v;
                        if i != j {
                            big_m[(j, i)] += v;
                        }
                    }
                }
                grads.push(BlockValue::Vec(g));
                xinvs.push(None);
            }
            Block::Soc(n) => {
                let xv = x[b].vec();
                let gamma = soc_gamma(xv);
                let jx = soc_jx(xv);
                let g = pre.c_vec[b].as_ref().unwrap() * t - &jx * (2.0 / gamma);
                let hinv = soc_hinv(xv, gamma);
                let hg = &hinv * &g;
                let rows: Vec<DVector<f64>> = touching.iter().map(|&(i, pos)| vec_coef(std, i, pos, n)).collect();
                let hrows: Vec<DVector<f64>> = rows.iter().map(|r| &hinv * r).collect();
                for (a, &(i, _)) in touching.iter().enumerate() {
                    rhs[i] -= rows[a].dot(&hg);
                    for (bi, &(j, _)) in touching.iter().enumerate().skip(a) {
                        let v = rows[a].dot(&hrows[bi]);
                        big_m[(i, j)] += v;
                        if i != j {
                            big_m[(j, i)] += v;
                        }
                    }
                }
                grads.push(BlockValue::Vec(g));
                xinvs.push(None);
            }
            Block::Free(n) => {
                let off = pre.free_offset[b].unwrap();
                let g = pre.c_vec[b].as_ref().unwrap() * t;
                for k in 0..n {
                    gf[off + k] = g[k];
                }
                for &(i, pos) in touching {
                    if let Coef::Vec(v) = &std.rows[i][pos].1 {
                        for &(k, a) in v {
                            af[(i, off + k)] += a;
                        }
                    }
                }
                grads.push(BlockValue::Vec(g));
                xinvs.push(None);
            }
        }
    }

    let dim = m + nf;
    let mut kkt = DMatrix::<f64>::zeros(dim, dim);
    kkt.view_mut((0, 0), (m, m)).copy_from(&big_m);
    kkt.view_mut((0, m), (m, nf)).copy_from(&(-&af));
    kkt.view_mut((m, 0), (nf, m)).copy_from(&(-af.transpose()));
    let mut full_rhs = DVector::<f64>::zeros(dim);
    full_rhs.rows_mut(0, m).copy_from(&rhs);
    full_rhs.rows_mut(m, nf).copy_from(&gf);
    let sol = solve_equilibrated(&kkt, &full_rhs)?;
    let nu = sol.rows(0, m).into_owned();
    let dxf = sol.rows(m, nf).into_owned();

    let mut dx = Vec::with_capacity(x.len());
    let mut dec = 0.0;
    for (b, cone) in std.cones.iter().enumerate() {
        let touching = &std.touching[b];
        match *cone {
            Block::Psd { complex, .. } => {
                let xm = x[b].mat();
                let mut r = grads[b].mat().clone();
                for &(i, pos) in touching {
                    sym(&std.rows[i][pos].1).add_to(&mut r, nu[i]);
                }
                let mut d = -(xm * r * xm);
                if complex {
                    project_structured(&mut d);
                } else {
                    let tr = d.transpose();
                    d += tr;
                    d *= 0.5;
                }
                let y = xinvs[b].as_ref().unwrap() * &d;
                dec += y.component_mul(&y.transpose()).sum();
                dx.push(BlockValue::Mat(d));
            }
            Block::Nonneg(n) => {
                let xv = x[b].vec();
                let k = log_weights(std, b, n, t);
                let mut r = grads[b].vec().clone();
                for &(i, pos) in touching {
                    r += vec_coef(std, i, pos, n) * nu[i];
                }
                let d = DVector::from_fn(n, |k_, _| -r[k_] * xv[k_] * xv[k_] / k[k_]);
                dec += (0..n).map(|j| k[j] * d[j] * d[j] / (xv[j] * xv[j])).sum::<f64>();
                dx.push(BlockValue::Vec(d));
            }
            Block::Soc(n) => {
                let xv = x[b].vec();
                let gamma = soc_gamma(xv);
                let mut r = grads[b].vec().clone();
                for &(i, pos) in touching {
                    r += vec_coef(std, i, pos, n) * nu[i];
                }
                let d = -(soc_hinv(xv, gamma) * r);
                let jx = soc_jx(xv);
                let jd = soc_jx(&d);
                let q = jx.dot(&d);
                dec += (2.0 / gamma) * (-d.dot(&jd) + 2.0 * q * q / gamma);
                dx.push(BlockValue::Vec(d));
            }
            Block::Free(n) => {
                let off = pre.free_offset[b].unwrap();
                let d = dxf.rows(off, n).into_owned();
                dx.push(BlockValue::Vec(d));
            }
        }
    }
    Some(Newton { dx, dec: dec.max(0.0) })
}

fn vec_coef(std: &StdForm, i: usize, pos: usize, n: usize) -> DVector<f64> {
    match &std.rows[i][pos].1 {
        Coef::Vec(v) => dense_vec(v, n),
        Coef::Sym(_) => unreachable!(),
    }
}

/// `(∇²(−ln xᵀJx))⁻¹ = x xᵀ − (γ/2) J`.
fn soc_hinv(x: &DVector<f64>, gamma: f64) -> DMatrix<f64> {
    let mut h = x * x.transpose();
    h[(0, 0)] -= 0.5 * gamma;
    for i in 1..x.len() {
        h[(i, i)] += 0.5 * gamma;
    }
    h
}

/// Symmetric Jacobi scaling, full-pivot LU, one step of iterative refinement.
fn solve_equilibrated(k: &DMatrix<f64>, rhs: &DVector<f64>) -> Option<DVector<f64>> {
    let n = k.nrows();
    if n == 0 {
        return Some(DVector::zeros(0));
    }
    let scale = DVector::from_fn(n, |i, _| {
        let d = k[(i, i)].abs();
        if d > 0.0 {
            1.0 / d.sqrt()
        } else {
            let r = k.row(i).amax();
            if r > 0.0 {
                1.0 / r.sqrt()
            } else {
                1.0
            }
        }
    });
    let ks = DMatrix::from_fn(n, n, |i, j| k[(i, j)] * scale[i] * scale[j]);
    let lu = ks.clone().full_piv_lu();
    let bs = rhs.component_mul(&scale);
    let mut y = lu.solve(&bs)?;
    let res = &bs - &ks * &y;
    if let Some(corr) = lu.solve(&res) {
        y += corr;
    }
    let x = y.component_mul(&scale);
    if x.iter().all(|v| v.is_finite()) {
        Some(x)
    } else {
        None
    }
}

fn lin_dot(std: &StdForm, dx: &[BlockValue]) -> f64 {
    std.c
        .iter()
        .enumerate()
        .filter_map(|(b, c)| c.as_ref().map(|c| coef_dot(c, &dx[b])))
        .sum()
}

fn log_det(m: &DMatrix<f64>) -> Option<f64> {
    let chol = Cholesky::new(m.clone())?;
    Some(2.0 * chol.l_dirty().diagonal().iter().map(|d| d.ln()).sum::<f64>())
}

/// Candidate point and the change of `t·f0 + Φ`, or `None` outside the cone.
fn trial(
    std: &StdForm,
    x: &[BlockValue],
    dx: &[BlockValue],
    alpha: f64,
    t: f64,
    lin: f64,
) -> Option<(Vec<BlockValue>, f64)> {
    let mut df = t * alpha * lin;
    let mut out = Vec::with_capacity(x.len());
    for (b, cone) in std.cones.iter().enumerate() {
        match *cone {
            Block::Psd { .. } => {
                let xm = x[b].mat();
                let xn = xm + dx[b].mat() * alpha;
                let after = log_det(&xn)?;
                let before = log_det(xm)?;
                df -= after - before;
                out.push(BlockValue::Mat(xn));
            }
            Block::Nonneg(n) => {
                let xv = x[b].vec();
                let xn = xv + dx[b].vec() * alpha;
                if xn.iter().any(|v| *v <= 0.0) {
                    return None;
                }
                let k = log_weights(std, b, n, t);
                for j in 0..n {
                    df -= k[j] * (xn[j] / xv[j]).ln();
                }
                out.push(BlockValue::Vec(xn));
            }
            Block::Soc(_) => {
                let xv = x[b].vec();
                let xn = xv + dx[b].vec() * alpha;
                let g = soc_gamma(&xn);
                if xn[0] <= 0.0 || g <= 0.0 {
                    return None;
                }
                df -= (g / soc_gamma(xv)).ln();
                out.push(BlockValue::Vec(xn));
            }
            Block::Free(_) => out.push(BlockValue::Vec(x[b].vec() + dx[b].vec() * alpha)),
        }
    }
    if df.is_finite() {
        Some((out, df))
    } else {
        None
    }
}
