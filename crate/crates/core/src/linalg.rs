//! Small complex linear-algebra helpers shared by the model modules.

use isac_conic::C64;
use nalgebra::{Cholesky, DMatrix, DVector, Dyn, SymmetricEigen};

use crate::error::{CoreError, Result};

pub type CVec = DVector<C64>;
pub type CMat = DMatrix<C64>;

pub fn c(re: f64, im: f64) -> C64 {
    C64::new(re, im)
}

pub fn outer(v: &CVec) -> CMat {
    v * v.adjoint()
}

/// `vᴴ M v`, real part (M Hermitian).
pub fn quad(m: &CMat, v: &CVec) -> f64 {
    v.dotc(&(m * v)).re
}

pub fn htrace(m: &CMat) -> f64 {
    m.trace().re
}

pub fn hermitize(m: &CMat) -> CMat {
    (m + m.adjoint()) * c(0.5, 0.0)
}

/// Eigenpairs of a Hermitian matrix sorted by decreasing eigenvalue.
pub fn eig_desc(m: &CMat) -> (Vec<f64>, Vec<CVec>) {
    let e = SymmetricEigen::new(hermitize(m));
    let mut idx: Vec<usize> = (0..e.eigenvalues.len()).collect();
    idx.sort_by(|&a, &b| e.eigenvalues[b].total_cmp(&e.eigenvalues[a]));
    let vals = idx.iter().map(|&i| e.eigenvalues[i]).collect();
    let vecs = idx.iter().map(|&i| e.eigenvectors.column(i).into_owned()).collect();
    (vals, vecs)
}

/// `λ1/λ2`; infinite when the second eigenvalue is not positive.
pub fn rank_ratio(m: &CMat) -> f64 {
    let (vals, _) = eig_desc(m);
    match vals.len() {
        0 => f64::NAN,
        1 => f64::INFINITY,
        _ if vals[1] <= 0.0 => f64::INFINITY,
        _ => vals[0] / vals[1],
    }
}

/// Nearest PSD matrix (negative eigenvalues clipped).
pub fn psd_part(m: &CMat) -> CMat {
    let (vals, vecs) = eig_desc(m);
    let n = m.nrows();
    let mut out = CMat::zeros(n, n);
    for (l, v) in vals.iter().zip(&vecs) {
        if *l > 0.0 {
            out += outer(v) * c(*l, 0.0);
        }
    }
    hermitize(&out)
}

pub fn cholesky(g: &CMat) -> Result<Cholesky<C64, Dyn>> {
    Cholesky::new(hermitize(g)).ok_or_else(|| CoreError::Numerical("matrix is not positive definite".into()))
}
