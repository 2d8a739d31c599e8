//! Symmetric coefficient matrices attached to PSD blocks.
//!
//! Almost every coefficient produced by the beamforming models is a sum of a
//! few outer products (`h hᴴ` embeds to a rank-two real matrix) or a multiple
//! of the identity (trace constraints). Keeping that structure lets the Newton
//! system be assembled with matrix-vector products only.

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub enum SymCoef {
    /// Explicit symmetric matrix.
    Dense(DMatrix<f64>),
    /// `Σ wᵢ vᵢ vᵢᵀ`.
    LowRank(Vec<(f64, DVector<f64>)>),
    /// `s·I`.
    Identity(f64),
}

impl SymCoef {
    pub fn rank_one(weight: f64, v: DVector<f64>) -> Self {
        SymCoef::LowRank(vec![(weight, v)])
    }

    /// `tr(S X)` for a symmetric `X`.
    pub fn dot(&self, x: &DMatrix<f64>) -> f64 {
        match self {
            SymCoef::Dense(s) => s.dot(x),
            SymCoef::LowRank(fs) => fs.iter().map(|(w, v)| w * quad(x, v)).sum(),
            SymCoef::Identity(s) => s * x.trace(),
        }
    }

    pub fn trace(&self) -> f64 {
        match self {
            SymCoef::Dense(s) => s.trace(),
            SymCoef::LowRank(fs) => fs.iter().map(|(w, v)| w * v.norm_squared()).sum(),
            // caller supplies the dimension through `to_dense` when it matters
            SymCoef::Identity(_) => f64::NAN,
        }
    }

    pub fn to_dense(&self, n: usize) -> DMatrix<f64> {
        let mut m = DMatrix::zeros(n, n);
        self.add_to(&mut m, 1.0);
        m
    }

    /// `m += scale · S`.
    pub fn add_to(&self, m: &mut DMatrix<f64>, scale: f64) {
        match self {
            SymCoef::Dense(s) => *m += s * scale,
            SymCoef::LowRank(fs) => {
                for (w, v) in fs {
                    m.ger(scale * w, v, v, 1.0);
                }
            }
            SymCoef::Identity(s) => {
                for i in 0..m.nrows() {
                    m[(i, i)] += scale * s;
                }
            }
        }
    }

    pub fn scaled(&self, a: f64) -> SymCoef {
        match self {
            SymCoef::Dense(s) => SymCoef::Dense(s * a),
            SymCoef::LowRank(fs) => SymCoef::LowRank(fs.iter().map(|(w, v)| (w * a, v.clone())).collect()),
            SymCoef::Identity(s) => SymCoef::Identity(s * a),
        }
    }

    /// Sum of two coefficients on the same block, keeping low-rank form when possible.
    pub fn merged(self, other: SymCoef, n: usize) -> SymCoef {
        match (self, other) {
            (SymCoef::LowRank(mut a), SymCoef::LowRank(b)) => {
                a.extend(b);
                SymCoef::LowRank(a)
            }
            (SymCoef::Identity(a), SymCoef::Identity(b)) => SymCoef::Identity(a + b),
            (a, b) => {
                let mut m = a.to_dense(n);
                b.add_to(&mut m, 1.0);
                SymCoef::Dense(m)
            }
        }
    }

    /// `X S X`, the action of the inverse log-det Hessian at `X`.
    pub fn sandwich(&self, x: &DMatrix<f64>) -> SymCoef {
        match self {
            SymCoef::LowRank(fs) => SymCoef::LowRank(fs.iter().map(|(w, v)| (*w, x * v)).collect()),
            SymCoef::Dense(s) => SymCoef::Dense(x * s * x),
            SymCoef::Identity(s) => SymCoef::Dense(x * x * *s),
        }
    }

    /// `tr(S T)` for two symmetric coefficients of the same dimension.
    pub fn inner(&self, other: &SymCoef, n: usize) -> f64 {
        match (self, other) {
            (SymCoef::LowRank(a), SymCoef::LowRank(b)) => {
                let mut acc = 0.0;
                for (wa, va) in a {
                    for (wb, vb) in b {
                        let d = va.dot(vb);
                        acc += wa * wb * d * d;
                    }
                }
                acc
            }
            (SymCoef::Identity(s), o) | (o, SymCoef::Identity(s)) => match o {
                SymCoef::Identity(t) => s * t * n as f64,
                _ => s * o.trace(),
            },
            (SymCoef::Dense(d), o) | (o, SymCoef::Dense(d)) => o.dot(d),
        }
    }

    pub fn is_finite(&self) -> bool {
        match self {
            SymCoef::Dense(s) => s.iter().all(|v| v.is_finite()),
            SymCoef::LowRank(fs) => fs.iter().all(|(w, v)| w.is_finite() && v.iter().all(|x| x.is_finite())),
            SymCoef::Identity(s) => s.is_finite(),
        }
    }

    pub fn dim_ok(&self, n: usize) -> bool {
        match self {
            SymCoef::Dense(s) => s.nrows() == n && s.ncols() == n,
            SymCoef::LowRank(fs) => fs.iter().all(|(_, v)| v.len() == n),
            SymCoef::Identity(_) => true,
        }
    }
}

fn quad(x: &DMatrix<f64>, v: &DVector<f64>) -> f64 {
    v.dot(&(x * v))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn sym(n: usize, seed: u64) -> DMatrix<f64> {
        let mut s = seed;
        let m = DMatrix::from_fn(n, n, |_, _| {
            s = s.wrapping_mul(6364136223846793005).wrapping_add(1442695040888963407);
            ((s >> 11) as f64 / (1u64 << 53) as f64) - 0.5
        });
        &m + m.transpose()
    }

    #[test]
    fn low_rank_matches_dense() {
        let n = 5;
        let x = sym(n, 1);
        let v = DVector::from_fn(n, |i, _| i as f64 - 1.5);
        let u = DVector::from_fn(n, |i, _| (i * i) as f64 * 0.1);
        let lr = SymCoef::LowRank(vec![(2.0, v), (-0.5, u)]);
        let dense = SymCoef::Dense(lr.to_dense(n));
        assert!((lr.dot(&x) - dense.dot(&x)).abs() < 1e-12);
        let a = lr.sandwich(&x).to_dense(n);
        let b = dense.sandwich(&x).to_dense(n);
        assert!((a - b).norm() < 1e-12);
        let other = SymCoef::Dense(sym(n, 7));
        assert!((lr.inner(&other, n) - dense.inner(&other, n)).abs() < 1e-12);
        assert!((lr.inner(&lr, n) - dense.inner(&dense, n)).abs() < 1e-10);
    }

    #[test]
    fn identity_inner_products() {
        let n = 4;
        let x = sym(n, 3);
        let id = SymCoef::Identity(2.0);
        assert!((id.dot(&x) - 2.0 * x.trace()).abs() < 1e-14);
        assert!((id.inner(&SymCoef::Identity(3.0), n) - 24.0).abs() < 1e-14);
        let d = SymCoef::Dense(x.clone());
        assert!((id.inner(&d, n) - 2.0 * x.trace()).abs() < 1e-14);
        let merged = id.merged(SymCoef::Dense(x.clone()), n).to_dense(n);
        assert!((merged - (x + DMatrix::identity(n, n) * 2.0)).norm() < 1e-14);
    }
}
