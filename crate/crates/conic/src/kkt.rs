//! KKT residuals of a primal-dual pair.
//!
//! The dual point is `(y, Z)`: row multipliers in constraint order and dual
//! cone elements for the variable blocks. Slack blocks take their dual from the
//! row multipliers, and log rows use the conjugate
//! `inf_z (y z − w ln z) = w − w ln(w / y)`.

use nalgebra::{DMatrix, DVector, SymmetricEigen};

use crate::lower::{dense_vec, StdForm};
use crate::program::{Block, BlockValue, Coef, ConicProgram, ConicSolution, KktResiduals};

pub(crate) struct DualPoint {
    pub y: DVector<f64>,
    pub s: Vec<BlockValue>,
}

/// Residual norms of `sol` with respect to `p`.
pub fn kkt_residuals(p: &ConicProgram, sol: &ConicSolution) -> KktResiduals {
    let std = StdForm::lower(p);
    residuals_std(p, &std, sol).0
}

fn soc_violation(v: &DVector<f64>) -> f64 {
    (v.rows(1, v.len() - 1).norm() - v[0]).max(0.0)
}

pub(crate) fn residuals_std(p: &ConicProgram, std: &StdForm, sol: &ConicSolution) -> (KktResiduals, f64, f64) {
    let lay = &std.layout;
    let mut x: Vec<BlockValue> = sol.x.clone();
    if lay.slack_block.is_some() {
        x.push(BlockValue::Vec(sol.ineq_slack.clone()));
    }
    for s in &sol.soc_slack {
        x.push(BlockValue::Vec(s.clone()));
    }
    if lay.log_block.is_some() {
        x.push(BlockValue::Vec(sol.log_args.clone()));
    }

    let mut y = DVector::zeros(std.m());
    for i in 0..lay.n_eq {
        y[i] = sol.eq_dual[i];
    }
    for i in 0..lay.n_ineq {
        y[lay.ineq_row(i)] = sol.ineq_dual[i];
    }
    for (j, d) in sol.soc_dual.iter().enumerate() {
        for r in 0..d.len() {
            y[lay.soc_row(j, r)] = d[r];
        }
    }
    for j in 0..lay.n_log {
        y[lay.log_row(j)] = sol.log_dual[j];
    }

    let mut primal_viol: f64 = 0.0;
    for (b, cone) in std.cones.iter().enumerate() {
        let v = match (cone, &x[b]) {
            (Block::Psd { .. }, BlockValue::Mat(m)) => -SymmetricEigen::new((m + m.transpose()) * 0.5).eigenvalues.min(),
            (Block::Nonneg(_), BlockValue::Vec(v)) => -v.min(),
            (Block::Soc(_), BlockValue::Vec(v)) => soc_violation(v),
            _ => 0.0,
        };
        primal_viol = primal_viol.max(v);
    }
    let primal = (std.apply(&x) - &std.b).norm() + primal_viol.max(0.0);

    // stationarity on the variable blocks: c − Aᵀy − Z
    let mut dual_sq = 0.0;
    let mut c_norm: f64 = 0.0;
    let mut cone_viol: f64 = 0.0;
    for b in 0..lay.n_user {
        match std.cones[b] {
            Block::Psd { dim, .. } => {
                let mut r = match &std.c[b] {
                    Some(Coef::Sym(s)) => s.to_dense(dim),
                    _ => DMatrix::zeros(dim, dim),
                };
                c_norm = c_norm.max(r.norm());
                for &(i, pos) in &std.touching[b] {
                    if let Coef::Sym(s) = &std.rows[i][pos].1 {
                        s.add_to(&mut r, -y[i]);
                    }
                }
                let z = sol.z[b].mat();
                r -= z;
                dual_sq += r.norm_squared();
                let zs = (z + z.transpose()) * 0.5;
                let min_eig = SymmetricEigen::new(zs).eigenvalues.min();
                cone_viol = cone_viol.max(-min_eig);
            }
            cone => {
                let n = cone.len();
                let mut r = match &std.c[b] {
                    Some(Coef::Vec(v)) => dense_vec(v, n),
                    _ => DVector::zeros(n),
                };
                c_norm = c_norm.max(r.norm());
                for &(i, pos) in &std.touching[b] {
                    if let Coef::Vec(v) = &std.rows[i][pos].1 {
                        for &(k, a) in v {
                            r[k] -= a * y[i];
                        }
                    }
                }
                let z = sol.z[b].vec();
                r -= z;
                dual_sq += r.norm_squared();
                match cone {
                    Block::Nonneg(_) => cone_viol = cone_viol.max(-z.min()),
                    Block::Soc(_) => cone_viol = cone_viol.max(soc_violation(z)),
                    Block::Free(_) => cone_viol = cone_viol.max(z.amax()),
                    Block::Psd { .. } => unreachable!(),
                }
            }
        }
    }
    // slack duals are the row multipliers themselves
    if lay.n_ineq > 0 {
        cone_viol = cone_viol.max(-sol.ineq_dual.min());
    }
    for d in &sol.soc_dual {
        cone_viol = cone_viol.max(soc_violation(d));
    }
    let mut log_conj = 0.0;
    for (j, l) in p.logs.iter().enumerate() {
        let yj = sol.log_dual[j];
        if yj > 0.0 {
            log_conj += l.weight - l.weight * (l.weight / yj).ln();
        } else {
            cone_viol = cone_viol.max(-yj + f64::MIN_POSITIVE);
            log_conj = f64::NEG_INFINITY;
        }
    }
    let dual = dual_sq.sqrt() + cone_viol;

    let pobj = p.objective_value(&sol.x);
    let dobj = std.obj_const + std.b.dot(&y) + log_conj;
    let gap = if dobj.is_finite() { (pobj - dobj).abs() } else { f64::INFINITY };

    let res = KktResiduals {
        primal,
        dual,
        gap,
        primal_rel: primal / (1.0 + std.b.amax()),
        dual_rel: dual / (1.0 + c_norm),
        gap_rel: gap / (1.0 + pobj.abs()),
    };
    (res, pobj, dobj)
}
