//! Optimal (MVDR) radar receive filter and the resulting SINR.

use nalgebra::DVector;

use crate::error::{CoreError, Result};
use crate::linalg::{cholesky, quad, CMat, CVec};
use crate::metrics::radar_interference;
use crate::scenario::{steering_vector, ChannelSet, Scenario};

/// G = B F Bᴴ + Σ p_m h hᴴ + σ_r² I.
#[derive(Debug, Clone, PartialEq)]
pub struct InterferenceMatrix {
    pub g: CMat,
}

impl InterferenceMatrix {
    /// Solves `G x = rhs` through a Cholesky factorization.
    pub fn solve(&self, rhs: &CVec) -> Result<CVec> {
        let ch = cholesky(&self.g)?;
        Ok(ch.solve(rhs))
    }

    /// `aᴴ G⁻¹ a`.
    pub fn inverse_quad(&self, a: &CVec) -> Result<f64> {
        let x = self.solve(a)?;
        Ok(a.dotc(&x).re)
    }
}

pub fn interference_matrix(s: &Scenario, ch: &ChannelSet, f: &CMat, p: &DVector<f64>) -> InterferenceMatrix {
    InterferenceMatrix { g: radar_interference(s, ch, f, p, true) }
}

/// `u = G⁻¹a_r(θ0) / (a_rᴴ G⁻¹ a_r)`.
pub fn mvdr(g: &InterferenceMatrix, theta0_deg: f64) -> Result<CVec> {
    let a = steering_vector(theta0_deg, g.g.nrows());
    let x = g.solve(&a)?;
    let denom = a.dotc(&x).re;
    if !(denom > 0.0 && denom.is_finite()) {
        return Err(CoreError::Numerical(format!("MVDR normalization {denom}")));
    }
    Ok(x / nalgebra::Complex::new(denom, 0.0))
}

/// `|α0|² (a_tᴴ F a_t)(a_rᴴ G⁻¹ a_r)`.
pub fn optimal_radar_sinr(s: &Scenario, ch: &ChannelSet, f: &CMat, p: &DVector<f64>) -> Result<f64> {
    let g = interference_matrix(s, ch, f, p);
    Ok(ch.target_amp.norm_sqr() * quad(f, &ch.a_t0) * g.inverse_quad(&ch.a_r0)?)
}
