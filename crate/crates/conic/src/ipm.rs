//! Primal-dual interior-point method with Nesterov–Todd scaling.
//!
//! Phase I of the barrier module supplies a strictly feasible primal start or
//! an infeasibility certificate; from there the iteration is the usual
//! Mehrotra predictor-corrector on `Ax = b, c − Aᵀy = s, x ∘ s = μe`, carried
//! out in the scaled space where `W⁻¹x = Ws = λ`.
//!
//! A log term `−w ln z` is an orthant entry whose complementarity target is
//! `w + μ` instead of `μ`: the stationarity condition of the log is `z s = w`.

use nalgebra::{Cholesky, DMatrix, DVector, SymmetricEigen};

use crate::barrier::{phase_one, Counter, PhaseOne};
use crate::embed::project_structured;
use crate::error::Result;
use crate::kkt::{residuals_std, DualPoint};
use crate::lower::{dense_vec, sym, StdForm};
use crate::program::{Block, BlockValue, Coef, ConicProgram, ConicSolution, Status, ToleranceSet};
use crate::sym::SymCoef;

// fraction of the distance to the boundary taken per step
const STEP_FRACTION: f64 = 0.99;
const STALL_STEP: f64 = 1e-10;
const MAX_STALLS: usize = 5;
// a log entry's product x·s may not drop below this fraction of min(w, current)
const LOG_CENTER_FRACTION: f64 = 0.25;

/// Solves `p` to the tolerances in `tol`.
///
/// The returned status is `Optimal` only when the KKT residuals of the
/// returned point are within `max(tol.feas, tol.gap)`.
pub fn solve(p: &ConicProgram, tol: &ToleranceSet) -> Result<ConicSolution> {
    p.validate()?;
    let std = StdForm::lower(p);
    let mut counter = Counter { newton: 0, outer: 0, limit: tol.max_newton };
    let x0 = match phase_one(&std, tol, &mut counter) {
        PhaseOne::Interior(x) => x,
        PhaseOne::Infeasible(cert) => return Ok(finish(p, &std, None, Status::Infeasible, Some(cert), &counter, tol)),
        PhaseOne::Failed => {
            // the path-following iteration tolerates an infeasible start, so a
            // phase I that broke down numerically is not the final word
            let sol = path_follow(p, &std, std.identity(), tol, &mut counter);
            return Ok(sol);
        }
    };
    Ok(path_follow(p, &std, x0, tol, &mut counter))
}

/// Scaling of one block: maps the primal point to `λ` by `W⁻¹` and the dual
/// point to `λ` by `W`.
enum Scaling {
    /// `W⁻¹ X W⁻ᵀ = Rᵀ S R = diag(λ)` with `W = R`.
    Psd { r: DMatrix<f64>, rinv: DMatrix<f64>, lam: DVector<f64> },
    /// `d = sqrt(x/s)`.
    Orthant { d: DVector<f64>, lam: DVector<f64> },
    /// `W = θ(2ūūᵀ − J)`.
    Soc { w: DMatrix<f64>, winv: DMatrix<f64>, lam: DVector<f64> },
    Free,
}

fn soc_j(v: &DVector<f64>) -> DVector<f64> {
    let mut j = v.clone();
    for i in 1..j.len() {
        j[i] = -j[i];
    }
    j
}

fn soc_det(v: &DVector<f64>) -> f64 {
    v[0] * v[0] - v.rows(1, v.len() - 1).norm_squared()
}

/// J-matrix `diag(1, −1, …, −1)`.
fn j_matrix(n: usize) -> DMatrix<f64> {
    let mut j = -DMatrix::identity(n, n);
    j[(0, 0)] = 1.0;
    j
}

fn soc_scaling(x: &DVector<f64>, s: &DVector<f64>) -> Option<Scaling> {
    let gx = soc_det(x);
    let gs = soc_det(s);
    if !(gx > 0.0 && gs > 0.0 && x[0] > 0.0 && s[0] > 0.0) {
        return None;
    }
    let n = x.len();
    let xb = x / gx.sqrt();
    let sb = s / gs.sqrt();
    // normalized scaling point p̄ (Q_p s = x) and its Jordan square root ū
    let pb = (&xb + soc_j(&sb)) / (2.0 * (1.0 + xb.dot(&sb))).sqrt();
    let mut ub = pb.clone();
    ub[0] += 1.0;
    ub /= (2.0 * (pb[0] + 1.0)).sqrt();
    let theta = (gx / gs).powf(0.25);
    let j = j_matrix(n);
    let w = (&ub * ub.transpose() * 2.0 - &j) * theta;
    let jw = soc_j(&ub);
    let winv = (&jw * jw.transpose() * 2.0 - &j) / theta;
    let lam = &w * s;
    Some(Scaling::Soc { w, winv, lam })
}

fn psd_scaling(x: &DMatrix<f64>, s: &DMatrix<f64>) -> Option<Scaling> {
    let lx = Cholesky::new(x.clone())?.l();
    let ls = Cholesky::new(s.clone())?.l();
    let svd = (ls.transpose() * &lx).svd(true, true);
    let vt = svd.v_t?;
    let lam = svd.singular_values;
    if lam.iter().any(|v| !(*v > 0.0)) {
        return None;
    }
    let n = lam.len();
    let isq = DVector::from_fn(n, |i, _| 1.0 / lam[i].sqrt());
    let sq = DVector::from_fn(n, |i, _| lam[i].sqrt());
    // R = Lx V Σ^{-1/2},  R⁻¹ = Σ^{1/2} Vᵀ Lx⁻¹
    let mut r = &lx * vt.transpose();
    for j in 0..n {
        let f = isq[j];
        r.column_mut(j).scale_mut(f);
    }
    let lx_inv = lx.solve_lower_triangular(&DMatrix::identity(n, n))?;
    let mut rinv = vt * lx_inv;
    for i in 0..n {
        let f = sq[i];
        rinv.row_mut(i).scale_mut(f);
    }
    Some(Scaling::Psd { r, rinv, lam })
}

fn scaling(cone: Block, x: &BlockValue, s: &BlockValue) -> Option<Scaling> {
    match cone {
        Block::Psd { .. } => psd_scaling(x.mat(), s.mat()),
        Block::Nonneg(_) => {
            let (x, s) = (x.vec(), s.vec());
            if x.iter().chain(s.iter()).any(|v| !(*v > 0.0)) {
                return None;
            }
            Some(Scaling::Orthant { d: x.zip_map(s, |a, b| (a / b).sqrt()), lam: x.zip_map(s, |a, b| (a * b).sqrt()) })
        }
        Block::Soc(_) => soc_scaling(x.vec(), s.vec()),
        Block::Free(_) => Some(Scaling::Free),
    }
}

impl Scaling {
    /// Coefficient in scaled space: `Rᵀ A R`, `d ∘ a`, `W a`.
    fn coef(&self, c: &Coef, n: usize) -> BlockValue {
        match (self, c) {
            (Scaling::Psd { r, .. }, Coef::Sym(s)) => BlockValue::Mat(match s {
                SymCoef::Dense(a) => r.transpose() * a * r,
                SymCoef::LowRank(fs) => {
                    let mut m = DMatrix::zeros(n, n);
                    for (w, v) in fs {
                        let rv = r.tr_mul(v);
                        m.ger(*w, &rv, &rv, 1.0);
                    }
                    m
                }
                SymCoef::Identity(a) => r.tr_mul(r) * *a,
            }),
            (Scaling::Orthant { d, .. }, Coef::Vec(v)) => BlockValue::Vec(dense_vec(v, n).component_mul(d)),
            (Scaling::Soc { w, .. }, Coef::Vec(v)) => BlockValue::Vec(w * dense_vec(v, n)),
            _ => unreachable!("coefficient kind matches block kind"),
        }
    }

    /// Dual-side scaling `Rᵀ V R`, `d ∘ v`, `W v`.
    fn dual_in(&self, v: &BlockValue) -> BlockValue {
        match self {
            Scaling::Psd { r, .. } => BlockValue::Mat(r.transpose() * v.mat() * r),
            Scaling::Orthant { d, .. } => BlockValue::Vec(v.vec().component_mul(d)),
            Scaling::Soc { w, .. } => BlockValue::Vec(w * v.vec()),
            Scaling::Free => v.clone(),
        }
    }

    /// Primal step back in original space: `R V Rᵀ`, `d ∘ v`, `W v`.
    fn primal_out(&self, v: &BlockValue) -> BlockValue {
        match self {
            Scaling::Psd { r, .. } => BlockValue::Mat(r * v.mat() * r.transpose()),
            Scaling::Orthant { d, .. } => BlockValue::Vec(v.vec().component_mul(d)),
            Scaling::Soc { w, .. } => BlockValue::Vec(w * v.vec()),
            Scaling::Free => v.clone(),
        }
    }

    /// Dual step back in original space: `R⁻ᵀ V R⁻¹`, `v / d`, `W⁻¹ v`.
    fn dual_out(&self, v: &BlockValue) -> BlockValue {
        match self {
            Scaling::Psd { rinv, .. } => BlockValue::Mat(rinv.transpose() * v.mat() * rinv),
            Scaling::Orthant { d, .. } => BlockValue::Vec(v.vec().component_div(d)),
            Scaling::Soc { winv, .. } => BlockValue::Vec(winv * v.vec()),
            Scaling::Free => v.clone(),
        }
    }

    fn lam(&self) -> BlockValue {
        match self {
            Scaling::Psd { lam, .. } => BlockValue::Mat(DMatrix::from_diagonal(lam)),
            Scaling::Orthant { lam, .. } | Scaling::Soc { lam, .. } => BlockValue::Vec(lam.clone()),
            Scaling::Free => unreachable!(),
        }
    }

    /// `λ⁻¹ ∘ r` in the block's Jordan algebra.
    fn lam_div(&self, r: &BlockValue) -> BlockValue {
        match self {
            Scaling::Psd { lam, .. } => {
                let r = r.mat();
                BlockValue::Mat(DMatrix::from_fn(r.nrows(), r.ncols(), |i, j| 2.0 * r[(i, j)] / (lam[i] + lam[j])))
            }
            Scaling::Orthant { lam, .. } => BlockValue::Vec(r.vec().component_div(lam)),
            Scaling::Soc { lam, .. } => {
                let r = r.vec();
                let n = r.len();
                let l1 = lam.rows(1, n - 1);
                let r1 = r.rows(1, n - 1);
                let u0 = (lam[0] * r[0] - l1.dot(&r1)) / soc_det(lam);
                let mut u = DVector::zeros(n);
                u[0] = u0;
                for i in 1..n {
                    u[i] = (r[i] - u0 * lam[i]) / lam[0];
                }
                BlockValue::Vec(u)
            }
            Scaling::Free => unreachable!(),
        }
    }

    /// Largest `α` with `λ + α d` in the cone (infinity if unbounded).
    fn max_step(&self, d: &BlockValue) -> f64 {
        match self {
            Scaling::Psd { lam, .. } => {
                let d = d.mat();
                let n = lam.len();
                let m = DMatrix::from_fn(n, n, |i, j| d[(i, j)] / (lam[i] * lam[j]).sqrt());
                let m = (&m + m.transpose()) * 0.5;
                let e = SymmetricEigen::new(m).eigenvalues.min();
                if e < 0.0 {
                    -1.0 / e
                } else {
                    f64::INFINITY
                }
            }
            Scaling::Orthant { lam, .. } => lam
                .iter()
                .zip(d.vec().iter())
                .filter(|(_, d)| **d < 0.0)
                .map(|(l, d)| -l / d)
                .fold(f64::INFINITY, f64::min),
            Scaling::Soc { lam, .. } => soc_max_step(lam, d.vec()),
            Scaling::Free => f64::INFINITY,
        }
    }
}

/// Smallest positive root of `det(λ + α d) = 0`, also bounded by `λ0 + α d0 ≥ 0`.
fn soc_max_step(lam: &DVector<f64>, d: &DVector<f64>) -> f64 {
    let n = lam.len();
    let a = soc_det(d);
    let b = lam[0] * d[0] - lam.rows(1, n - 1).dot(&d.rows(1, n - 1));
    let c = soc_det(lam);
    let mut best = f64::INFINITY;
    if d[0] < 0.0 {
        best = -lam[0] / d[0];
    }
    // a α² + 2 b α + c = 0 with c > 0
    if a.abs() < 1e-300 {
        if b < 0.0 {
            best = best.min(-c / (2.0 * b));
        }
    } else {
        let disc = b * b - a * c;
        if disc >= 0.0 {
            let sq = disc.sqrt();
            // stable pair of roots
            let q = -(b + b.signum() * sq);
            for root in [q / a, if q != 0.0 { c / q } else { f64::INFINITY }] {
                if root > 0.0 {
                    best = best.min(root);
                }
            }
        }
    }
    best
}

/// Jordan product `u ∘ v` for the given cone.
fn jordan(cone: Block, u: &BlockValue, v: &BlockValue) -> BlockValue {
    match cone {
        Block::Psd { .. } => {
            let (u, v) = (u.mat(), v.mat());
            BlockValue::Mat((u * v + v * u) * 0.5)
        }
        Block::Nonneg(_) => BlockValue::Vec(u.vec().component_mul(v.vec())),
        Block::Soc(n) => {
            let (u, v) = (u.vec(), v.vec());
            let mut w = DVector::zeros(n);
            w[0] = u.dot(v);
            for i in 1..n {
                w[i] = u[0] * v[i] + v[0] * u[i];
            }
            BlockValue::Vec(w)
        }
        Block::Free(_) => unreachable!(),
    }
}

fn identity(cone: Block) -> BlockValue {
    match cone {
        Block::Psd { dim, .. } => BlockValue::Mat(DMatrix::identity(dim, dim)),
        Block::Nonneg(n) => BlockValue::Vec(DVector::from_element(n, 1.0)),
        Block::Soc(n) => {
            let mut e = DVector::zeros(n);
            e[0] = 1.0;
            BlockValue::Vec(e)
        }
        Block::Free(n) => BlockValue::Vec(DVector::zeros(n)),
    }
}

fn bv_dot(a: &BlockValue, b: &BlockValue) -> f64 {
    match (a, b) {
        (BlockValue::Mat(a), BlockValue::Mat(b)) => a.dot(b),
        (BlockValue::Vec(a), BlockValue::Vec(b)) => a.dot(b),
        _ => unreachable!(),
    }
}

fn bv_axpy(y: &mut BlockValue, a: f64, x: &BlockValue) {
    match (y, x) {
        (BlockValue::Mat(y), BlockValue::Mat(x)) => *y += x * a,
        (BlockValue::Vec(y), BlockValue::Vec(x)) => *y += x * a,
        _ => unreachable!(),
    }
}

fn bv_sub(a: &BlockValue, b: &BlockValue) -> BlockValue {
    let mut out = a.clone();
    bv_axpy(&mut out, -1.0, b);
    out
}

fn bv_norm_sq(a: &BlockValue) -> f64 {
    match a {
        BlockValue::Mat(m) => m.norm_squared(),
        BlockValue::Vec(v) => v.norm_squared(),
    }
}

fn bv_zero_like(a: &BlockValue) -> BlockValue {
    match a {
        BlockValue::Mat(m) => BlockValue::Mat(DMatrix::zeros(m.nrows(), m.ncols())),
        BlockValue::Vec(v) => BlockValue::Vec(DVector::zeros(v.len())),
    }
}

/// Jacobi-equilibrated full-pivot LU of the reduced KKT matrix.
struct Factored {
    k: DMatrix<f64>,
    lu: nalgebra::linalg::FullPivLU<f64, nalgebra::Dyn, nalgebra::Dyn>,
    scale: DVector<f64>,
}

impl Factored {
    fn new(k: DMatrix<f64>) -> Factored {
        let n = k.nrows();
        let scale = DVector::from_fn(n, |i, _| {
            let d = k[(i, i)].abs();
            let r = if d > 0.0 { d } else { k.row(i).amax() };
            if r > 0.0 {
                1.0 / r.sqrt()
            } else {
                1.0
            }
        });
        let ks = DMatrix::from_fn(n, n, |i, j| k[(i, j)] * scale[i] * scale[j]);
        let lu = ks.full_piv_lu();
        Factored { k, lu, scale }
    }

    fn solve(&self, rhs: &DVector<f64>) -> Option<DVector<f64>> {
        if rhs.is_empty() {
            return Some(DVector::zeros(0));
        }
        let bs = rhs.component_mul(&self.scale);
        let mut x = self.lu.solve(&bs)?.component_mul(&self.scale);
        // refinement against the unscaled matrix
        for _ in 0..2 {
            let res = rhs - &self.k * &x;
            let corr = self.lu.solve(&res.component_mul(&self.scale))?.component_mul(&self.scale);
            x += corr;
        }
        x.iter().all(|v| v.is_finite()).then_some(x)
    }
}

struct Iterate {
    x: Vec<BlockValue>,
    s: Vec<BlockValue>,
    y: DVector<f64>,
}

struct Direction {
    dy: DVector<f64>,
    /// Scaled primal and dual steps; free blocks carry the raw step in `dxt`.
    dxt: Vec<BlockValue>,
    dzt: Vec<BlockValue>,
}

struct System<'a> {
    std: &'a StdForm,
    scalings: Vec<Scaling>,
    /// Scaled coefficients per block, aligned with `std.touching[b]`.
    coefs: Vec<Vec<BlockValue>>,
    factored: Factored,
    free_offset: Vec<Option<usize>>,
    rp: DVector<f64>,
    /// Scaled dual residual per block (raw on free blocks).
    rd: Vec<BlockValue>,
}

impl<'a> System<'a> {
    fn build(std: &'a StdForm, it: &Iterate, rp: DVector<f64>, rd: &[BlockValue]) -> Option<System<'a>> {
        let m = std.m();
        let mut scalings = Vec::with_capacity(std.cones.len());
        for (b, cone) in std.cones.iter().enumerate() {
            scalings.push(scaling(*cone, &it.x[b], &it.s[b])?);
        }
        let mut free_offset = Vec::new();
        let mut nf = 0;
        for cone in &std.cones {
            if let Block::Free(n) = cone {
                free_offset.push(Some(nf));
                nf += n;
            } else {
                free_offset.push(None);
            }
        }
        let mut k = DMatrix::<f64>::zeros(m + nf, m + nf);
        let mut coefs = Vec::with_capacity(std.cones.len());
        for (b, cone) in std.cones.iter().enumerate() {
            let touching = &std.touching[b];
            if let Block::Free(_) = cone {
                let off = m + free_offset[b].unwrap();
                for &(i, pos) in touching {
                    if let Coef::Vec(v) = &std.rows[i][pos].1 {
                        for &(kk, a) in v {
                            k[(i, off + kk)] += a;
                            k[(off + kk, i)] += a;
                        }
                    }
                }
                coefs.push(Vec::new());
                continue;
            }
            let n = cone.len();
            let scaled: Vec<BlockValue> =
                touching.iter().map(|&(i, pos)| scalings[b].coef(&std.rows[i][pos].1, n)).collect();
            for (a, &(i, _)) in touching.iter().enumerate() {
                for (c, &(j, _)) in touching.iter().enumerate().skip(a) {
                    let v = bv_dot(&scaled[a], &scaled[c]);
                    k[(i, j)] += v;
                    if a != c {
                        k[(j, i)] += v;
                    }
                }
            }
            coefs.push(scaled);
        }
        let rd = rd
            .iter()
            .enumerate()
            .map(|(b, r)| scalings[b].dual_in(r))
            .collect();
        Some(System { std, scalings, coefs, factored: Factored::new(k), free_offset, rp, rd })
    }

    /// Solves with complementarity right-hand side `rc` (per cone block, in
    /// the `λ ∘ (Δx̃ + Δz̃) = rc` form).
    fn direction(&self, rc: &[Option<BlockValue>]) -> Option<Direction> {
        let std = self.std;
        let m = std.m();
        let nf = self.factored.k.nrows() - m;
        let mut rhs = DVector::zeros(m + nf);
        rhs.rows_mut(0, m).copy_from(&self.rp);
        let mut rt: Vec<Option<BlockValue>> = Vec::with_capacity(std.cones.len());
        for (b, cone) in std.cones.iter().enumerate() {
            if let Block::Free(n) = cone {
                let off = m + self.free_offset[b].unwrap();
                rhs.rows_mut(off, *n).copy_from(self.rd[b].vec());
                rt.push(None);
                continue;
            }
            let r = self.scalings[b].lam_div(rc[b].as_ref().unwrap());
            let diff = bv_sub(&r, &self.rd[b]);
            for (a, &(i, _)) in std.touching[b].iter().enumerate() {
                rhs[i] -= bv_dot(&self.coefs[b][a], &diff);
            }
            rt.push(Some(r));
        }
        let sol = self.factored.solve(&rhs)?;
        let dy = sol.rows(0, m).into_owned();
        let mut dxt = Vec::with_capacity(std.cones.len());
        let mut dzt = Vec::with_capacity(std.cones.len());
        for (b, cone) in std.cones.iter().enumerate() {
            if let Block::Free(n) = cone {
                let off = m + self.free_offset[b].unwrap();
                dxt.push(BlockValue::Vec(sol.rows(off, *n).into_owned()));
                dzt.push(BlockValue::Vec(DVector::zeros(*n)));
                continue;
            }
            let mut dz = self.rd[b].clone();
            for (a, &(i, _)) in std.touching[b].iter().enumerate() {
                bv_axpy(&mut dz, -dy[i], &self.coefs[b][a]);
            }
            let dx = bv_sub(rt[b].as_ref().unwrap(), &dz);
            dxt.push(dx);
            dzt.push(dz);
        }
        Some(Direction { dy, dxt, dzt })
    }

    fn max_step(&self, d: &Direction) -> f64 {
        let mut a = f64::INFINITY;
        for (b, sc) in self.scalings.iter().enumerate() {
            a = a.min(sc.max_step(&d.dxt[b])).min(sc.max_step(&d.dzt[b]));
        }
        a
    }
}

/// `Aᵀy` restricted to block `b`, in the block's value shape.
fn at_y(std: &StdForm, b: usize, y: &DVector<f64>) -> BlockValue {
    let cone = std.cones[b];
    match cone {
        Block::Psd { dim, .. } => {
            let mut r = DMatrix::zeros(dim, dim);
            for &(i, pos) in &std.touching[b] {
                sym(&std.rows[i][pos].1).add_to(&mut r, y[i]);
            }
            BlockValue::Mat(r)
        }
        _ => {
            let n = cone.len();
            let mut r = DVector::zeros(n);
            for &(i, pos) in &std.touching[b] {
                if let Coef::Vec(v) = &std.rows[i][pos].1 {
                    for &(k, a) in v {
                        r[k] += a * y[i];
                    }
                }
            }
            BlockValue::Vec(r)
        }
    }
}

fn c_block(std: &StdForm, b: usize) -> BlockValue {
    match std.cones[b] {
        Block::Psd { dim, .. } => BlockValue::Mat(match &std.c[b] {
            Some(c) => sym(c).to_dense(dim),
            None => DMatrix::zeros(dim, dim),
        }),
        cone => BlockValue::Vec(match &std.c[b] {
            Some(Coef::Vec(v)) => dense_vec(v, cone.len()),
            _ => DVector::zeros(cone.len()),
        }),
    }
}

fn initial_dual(std: &StdForm, x: &[BlockValue], eta: f64) -> Vec<BlockValue> {
    std.cones
        .iter()
        .enumerate()
        .map(|(b, cone)| {
            let mut s = identity(*cone);
            match &mut s {
                BlockValue::Mat(m) => *m *= eta,
                BlockValue::Vec(v) => *v *= eta,
            }
            // log entries start centered on their own target w + η x
            if let (Some(w), BlockValue::Vec(v)) = (&std.logw[b], &mut s) {
                let xv = x[b].vec();
                for j in 0..v.len() {
                    v[j] = w[j] / xv[j] + eta;
                }
            }
            s
        })
        .collect()
}

fn path_follow(
    p: &ConicProgram,
    std: &StdForm,
    x0: Vec<BlockValue>,
    tol: &ToleranceSet,
    counter: &mut Counter,
) -> ConicSolution {
    let nb = std.cones.len();
    let deg = std.degree().max(1.0);
    let cs: Vec<BlockValue> = (0..nb).map(|b| c_block(std, b)).collect();
    let eta = 1.0 + cs.iter().map(|c| bv_norm_sq(c).sqrt()).fold(0.0, f64::max);
    let s0 = initial_dual(std, &x0, eta);
    let mut it = Iterate { x: x0, s: s0, y: DVector::zeros(std.m()) };
    let log_total: f64 = std.logw.iter().flatten().map(|w| w.sum()).sum();
    let complex: Vec<bool> = std.cones.iter().map(|c| matches!(c, Block::Psd { complex: true, .. })).collect();

    let mut best: Option<(f64, ConicSolution)> = None;
    let mut stalls = 0;
    let mut status = Status::MaxIterations;
    let start_outer = counter.outer;
    while counter.outer - start_outer < tol.max_iters {
        counter.outer += 1;

        let sol = finish(p, std, Some((&it.x, Some(&DualPoint { y: it.y.clone(), s: it.s.clone() }))), Status::Optimal, None, counter, tol);
        if sol.status == Status::Optimal {
            return sol;
        }
        let r = sol.residuals;
        let score = (r.primal_rel).max(r.dual_rel).max(r.gap_rel);
        if score.is_finite() && best.as_ref().is_none_or(|(s, _)| score < *s) {
            best = Some((score, sol));
        }

        let rp = &std.b - std.apply(&it.x);
        let rd: Vec<BlockValue> = (0..nb)
            .map(|b| {
                let mut r = bv_sub(&cs[b], &at_y(std, b, &it.y));
                bv_axpy(&mut r, -1.0, &it.s[b]);
                r
            })
            .collect();
        let Some(sys) = System::build(std, &it, rp, &rd) else {
            status = Status::NumericalFailure;
            break;
        };

        let lam: Vec<Option<BlockValue>> =
            sys.scalings.iter().map(|sc| (!matches!(sc, Scaling::Free)).then(|| sc.lam())).collect();
        let lam_sq: Vec<Option<BlockValue>> =
            (0..nb).map(|b| lam[b].as_ref().map(|l| jordan(std.cones[b], l, l))).collect();
        let mu = ((0..nb).filter_map(|b| lam[b].as_ref().map(|l| bv_dot(l, l))).sum::<f64>() - log_total).max(0.0) / deg;

        // complementarity right-hand side: target − λ∘λ − corr
        let rc = |sigma_mu: f64, corr: Option<&Direction>| -> Vec<Option<BlockValue>> {
            (0..nb)
                .map(|b| {
                    let l2 = lam_sq[b].as_ref()?;
                    let cone = std.cones[b];
                    let mut t = identity(cone);
                    match &mut t {
                        BlockValue::Mat(m) => *m *= sigma_mu,
                        BlockValue::Vec(v) => {
                            *v *= sigma_mu;
                            if let Some(w) = &std.logw[b] {
                                *v += w;
                            }
                        }
                    }
                    bv_axpy(&mut t, -1.0, l2);
                    if let Some(d) = corr {
                        bv_axpy(&mut t, -1.0, &jordan(cone, &d.dxt[b], &d.dzt[b]));
                    }
                    Some(t)
                })
                .collect()
        };

        counter.newton += 1;
        let Some(aff) = sys.direction(&rc(0.0, None)) else {
            status = Status::NumericalFailure;
            break;
        };
        let alpha_aff = sys.max_step(&aff).min(1.0);
        let mu_aff = ((0..nb)
            .filter_map(|b| {
                let l = lam[b].as_ref()?;
                let mut xa = l.clone();
                bv_axpy(&mut xa, alpha_aff, &aff.dxt[b]);
                let mut za = l.clone();
                bv_axpy(&mut za, alpha_aff, &aff.dzt[b]);
                Some(bv_dot(&xa, &za))
            })
            .sum::<f64>()
            - log_total)
            .max(0.0)
            / deg;
        let sigma = if mu > 0.0 { (mu_aff / mu).clamp(0.0, 1.0).powi(3) } else { 0.0 };

        counter.newton += 1;
        let Some(dir) = sys.direction(&rc(sigma * mu, Some(&aff))) else {
            status = Status::NumericalFailure;
            break;
        };
        let mut alpha = (STEP_FRACTION * sys.max_step(&dir)).min(1.0);

        let dx: Vec<BlockValue> = (0..nb)
            .map(|b| {
                let mut d = sys.scalings[b].primal_out(&dir.dxt[b]);
                if complex[b] {
                    if let BlockValue::Mat(m) = &mut d {
                        project_structured(m);
                    }
                }
                d
            })
            .collect();
        let ds: Vec<BlockValue> = (0..nb)
            .map(|b| {
                let mut d = sys.scalings[b].dual_out(&dir.dzt[b]);
                match &mut d {
                    BlockValue::Mat(m) if complex[b] => project_structured(m),
                    BlockValue::Mat(m) => {
                        let t = m.transpose();
                        *m += t;
                        *m *= 0.5;
                    }
                    _ => {}
                }
                d
            })
            .collect();

        // rounding can leave the full fraction step just outside the cone
        let next = loop {
            let cand = Iterate {
                x: it.x.iter().zip(&dx).map(|(x, d)| axpy_sym(x, alpha, d)).collect(),
                s: it.s.iter().zip(&ds).map(|(s, d)| axpy_sym(s, alpha, d)).collect(),
                y: &it.y + &dir.dy * alpha,
            };
            if interior(std, &cand) && log_centered(std, &it, &cand) {
                break Some(cand);
            }
            alpha *= 0.5;
            if alpha < STALL_STEP {
                break None;
            }
        };
        let Some(next) = next else {
            status = Status::NumericalFailure;
            break;
        };
        it = next;
        if alpha < STALL_STEP * 1e3 {
            stalls += 1;
            if stalls >= MAX_STALLS {
                status = Status::NumericalFailure;
                break;
            }
        } else {
            stalls = 0;
        }
    }

    let sol = finish(p, std, Some((&it.x, Some(&DualPoint { y: it.y.clone(), s: it.s.clone() }))), status, None, counter, tol);
    if sol.status == Status::Optimal {
        return sol;
    }
    match best {
        Some((score, mut b)) if score < {
            let r = sol.residuals;
            r.primal_rel.max(r.dual_rel).max(r.gap_rel)
        } =>
        {
            b.status = status;
            b.iterations = counter.outer;
            b.newton_steps = counter.newton;
            b
        }
        _ => sol,
    }
}

fn axpy_sym(x: &BlockValue, a: f64, d: &BlockValue) -> BlockValue {
    let mut out = x.clone();
    bv_axpy(&mut out, a, d);
    if let BlockValue::Mat(m) = &mut out {
        let t = m.transpose();
        *m += t;
        *m *= 0.5;
    }
    out
}

/// Full steps can overshoot the `x s = w` condition of a log entry by orders
/// of magnitude; from there the NT direction stalls against the boundary.
fn log_centered(std: &StdForm, cur: &Iterate, cand: &Iterate) -> bool {
    std.logw.iter().enumerate().all(|(b, w)| {
        let Some(w) = w else { return true };
        let (x0, s0) = (cur.x[b].vec(), cur.s[b].vec());
        let (x1, s1) = (cand.x[b].vec(), cand.s[b].vec());
        (0..w.len()).all(|i| x1[i] * s1[i] >= LOG_CENTER_FRACTION * w[i].min(x0[i] * s0[i]))
    })
}

fn interior(std: &StdForm, it: &Iterate) -> bool {
    std.cones.iter().enumerate().all(|(b, cone)| match cone {
        Block::Psd { .. } => Cholesky::new(it.x[b].mat().clone()).is_some() && Cholesky::new(it.s[b].mat().clone()).is_some(),
        Block::Nonneg(_) => it.x[b].vec().iter().chain(it.s[b].vec().iter()).all(|v| *v > 0.0),
        Block::Soc(_) => {
            let (x, s) = (it.x[b].vec(), it.s[b].vec());
            x[0] > 0.0 && s[0] > 0.0 && soc_det(x) > 0.0 && soc_det(s) > 0.0
        }
        Block::Free(_) => true,
    })
}

pub(crate) fn finish(
    p: &ConicProgram,
    std: &StdForm,
    point: Option<(&Vec<BlockValue>, Option<&DualPoint>)>,
    mut status: Status,
    certificate: Option<f64>,
    counter: &Counter,
    tol: &ToleranceSet,
) -> ConicSolution {
    let lay = &std.layout;
    let x = match point {
        Some((x, _)) => x.clone(),
        None => std.identity(),
    };
    let zero_dual = DualPoint { y: DVector::zeros(std.m()), s: x.iter().map(bv_zero_like).collect() };
    let dual = point.and_then(|(_, d)| d).unwrap_or(&zero_dual);
    let vec_of = |blk: Option<usize>| blk.map(|b| x[b].vec().clone()).unwrap_or_else(|| DVector::zeros(0));
    let y = &dual.y;
    let soc_dual: Vec<DVector<f64>> = lay
        .soc_lens
        .iter()
        .enumerate()
        .map(|(j, &len)| DVector::from_fn(len, |r, _| y[lay.soc_row(j, r)]))
        .collect();
    let mut sol = ConicSolution {
        status,
        x: x[..lay.n_user].to_vec(),
        ineq_slack: vec_of(lay.slack_block),
        soc_slack: lay.soc_blocks.iter().map(|&b| x[b].vec().clone()).collect(),
        log_args: vec_of(lay.log_block),
        z: dual.s[..lay.n_user].to_vec(),
        eq_dual: y.rows(0, lay.n_eq).into_owned(),
        ineq_dual: y.rows(lay.n_eq, lay.n_ineq).into_owned(),
        soc_dual,
        log_dual: y.rows(if lay.n_log > 0 { lay.log_row(0) } else { 0 }, lay.n_log).into_owned(),
        primal_objective: f64::NAN,
        dual_objective: f64::NAN,
        residuals: Default::default(),
        iterations: counter.outer,
        newton_steps: counter.newton,
        certificate,
    };
    if point.is_some() {
        let (res, pobj, dobj) = residuals_std(p, std, &sol);
        sol.residuals = res;
        sol.primal_objective = pobj;
        sol.dual_objective = dobj;
        let certified = res.within(tol.feas.max(tol.gap));
        if status == Status::Optimal && !certified {
            status = Status::NumericalFailure;
        } else if status == Status::NumericalFailure && certified {
            status = Status::Optimal;
        }
    }
    sol.status = status;
    sol
}
