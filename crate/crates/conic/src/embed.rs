//! Real embedding of complex Hermitian matrices.
//!
//! `H = A + jB` maps to `[[A, -B], [B, A]]`. The image is exactly the set of
//! real symmetric matrices commuting with `J = [[0, -I], [I, 0]]`, and
//! `⟨embed(P), embed(Q)⟩ = 2·tr(PQ)` for Hermitian `P`, `Q`.

use nalgebra::{Complex, DMatrix, DVector};

use crate::error::{ConicError, Result};
use crate::sym::SymCoef;

pub type C64 = Complex<f64>;

const HERMITIAN_TOL: f64 = 1e-10;

pub fn embed_complex(h: &DMatrix<C64>) -> Result<DMatrix<f64>> {
    let n = h.nrows();
    if h.ncols() != n {
        return Err(ConicError::Dimension(format!("expected square matrix, got {}x{}", n, h.ncols())));
    }
    let scale = h.iter().map(|z| z.norm()).fold(1.0, f64::max);
    let mut asym = 0.0f64;
    for i in 0..n {
        for j in 0..n {
            asym = asym.max((h[(i, j)] - h[(j, i)].conj()).norm());
        }
    }
    if asym > HERMITIAN_TOL * scale {
        return Err(ConicError::NotHermitian(asym));
    }
    let mut out = DMatrix::zeros(2 * n, 2 * n);
    for i in 0..n {
        for j in 0..n {
            // average with the mirrored entry so the result is exactly symmetric
            let z = (h[(i, j)] + h[(j, i)].conj()) * 0.5;
            out[(i, j)] = z.re;
            out[(i + n, j + n)] = z.re;
            out[(i, j + n)] = -z.im;
            out[(i + n, j)] = z.im;
        }
    }
    Ok(out)
}

/// Inverse of [`embed_complex`] on structured matrices; for an arbitrary
/// symmetric input it returns the Hermitian matrix whose embedding is the
/// nearest structured one.
pub fn extract_hermitian(x: &DMatrix<f64>) -> DMatrix<C64> {
    let n = x.nrows() / 2;
    let mut h = DMatrix::from_element(n, n, C64::new(0.0, 0.0));
    for i in 0..n {
        for j in 0..n {
            let re = 0.5 * (x[(i, j)] + x[(i + n, j + n)]);
            let im = 0.5 * (x[(i + n, j)] - x[(i, j + n)]);
            h[(i, j)] = C64::new(re, im);
        }
    }
    // exact Hermitian symmetry
    for i in 0..n {
        h[(i, i)].im = 0.0;
        for j in 0..i {
            let z = (h[(i, j)] + h[(j, i)].conj()) * 0.5;
            h[(i, j)] = z;
            h[(j, i)] = z.conj();
        }
    }
    h
}

/// Stacks `v` as `[Re v; Im v]`.
pub fn real_vector(v: &DVector<C64>) -> DVector<f64> {
    let n = v.len();
    DVector::from_fn(2 * n, |i, _| if i < n { v[i].re } else { v[i - n].im })
}

/// `J v` for a stacked vector `[a; b]`, i.e. `[-b; a]`.
pub fn j_mul(v: &DVector<f64>) -> DVector<f64> {
    let n = v.len() / 2;
    DVector::from_fn(2 * n, |i, _| if i < n { -v[i + n] } else { v[i - n] })
}

/// Coefficient `S` with `⟨S, embed(W)⟩ = weight · hᴴ W h`.
pub fn quadratic_form(h: &DVector<C64>, weight: f64) -> SymCoef {
    let v1 = real_vector(h);
    let v2 = j_mul(&v1);
    SymCoef::LowRank(vec![(0.5 * weight, v1), (0.5 * weight, v2)])
}

/// Coefficient `S` with `⟨S, embed(W)⟩ = weight · tr(W)`.
pub fn trace_form(weight: f64) -> SymCoef {
    SymCoef::Identity(0.5 * weight)
}

/// Orthogonal projection of a symmetric matrix onto the embedded-Hermitian subspace.
pub fn project_structured(x: &mut DMatrix<f64>) {
    let n = x.nrows() / 2;
    for i in 0..n {
        for j in 0..n {
            let d = 0.5 * (x[(i, j)] + x[(i + n, j + n)]);
            let o = 0.5 * (x[(i, j + n)] - x[(i + n, j)]);
            x[(i, j)] = d;
            x[(i + n, j + n)] = d;
            x[(i, j + n)] = o;
            x[(i + n, j)] = -o;
        }
    }
    let t = x.transpose();
    *x += t;
    *x *= 0.5;
}

/// Projects a coefficient onto the structured subspace. Functionals restricted
/// to embedded matrices are unchanged by this.
pub fn project_coef(c: SymCoef) -> SymCoef {
    match c {
        SymCoef::Identity(s) => SymCoef::Identity(s),
        SymCoef::Dense(mut m) => {
            project_structured(&mut m);
            SymCoef::Dense(m)
        }
        SymCoef::LowRank(fs) => {
            // ‖S − JSJᵀ‖² = 2(‖S‖² − ⟨S, JSJᵀ⟩); skip the doubling when already invariant
            let mut self_inner = 0.0;
            let mut cross = 0.0;
            let jv: Vec<DVector<f64>> = fs.iter().map(|(_, v)| j_mul(v)).collect();
            for (a, (wa, va)) in fs.iter().enumerate() {
                for (b, (wb, vb)) in fs.iter().enumerate() {
                    let d = va.dot(vb);
                    self_inner += wa * wb * d * d;
                    let e = va.dot(&jv[b]);
                    cross += wa * wb * e * e;
                    let _ = a;
                }
            }
            if (self_inner - cross).abs() <= 1e-13 * self_inner.abs().max(f64::MIN_POSITIVE) {
                return SymCoef::LowRank(fs);
            }
            let mut out = Vec::with_capacity(2 * fs.len());
            for ((w, v), jv) in fs.into_iter().zip(jv) {
                out.push((0.5 * w, v));
                out.push((0.5 * w, jv));
            }
            SymCoef::LowRank(out)
        }
    }
}
