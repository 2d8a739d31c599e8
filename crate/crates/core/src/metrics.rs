//! SINRs, rates, transmit covariance and beampatterns of a candidate solution.

use nalgebra::DVector;
use serde::{Deserialize, Serialize};

use crate::linalg::{c, htrace, outer, quad, CMat, CVec};
use crate::scenario::{steering_vector, ChannelSet, Scenario};

/// Transmit beamformers, optional relaxed covariances, receive filter and D2D powers.
#[derive(Debug, Clone, PartialEq)]
pub struct Solution {
    pub w: Vec<CVec>,
    /// When present, these covariances are authoritative for every metric.
    pub big_w: Option<Vec<CMat>>,
    pub u: CVec,
    pub p: DVector<f64>,
}

impl Solution {
    /// Per-beam covariances `W_k` (either stored or `w_k w_kᴴ`).
    pub fn covariances(&self) -> Vec<CMat> {
        match &self.big_w {
            Some(ws) => ws.clone(),
            None => self.w.iter().map(outer).collect(),
        }
    }

    pub fn bs_power(&self) -> f64 {
        self.covariances().iter().map(htrace).sum()
    }

    /// Checks the power budgets with absolute slack `tol`.
    pub fn within_budget(&self, s: &Scenario, tol: f64) -> bool {
        self.bs_power() <= s.p_bs_max + tol
            && self.p.iter().zip(&s.p_d2d_max).all(|(&p, &pm)| p >= -tol && p <= pm + tol)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Metrics {
    pub sinr_cu: Vec<f64>,
    pub sinr_d2d: Vec<f64>,
    pub rate_cu: Vec<f64>,
    pub rate_d2d: Vec<f64>,
    pub sum_rate: f64,
    pub radar_sinr: f64,
}

/// F = Σ_k W_k.
pub fn covariance(sol: &Solution) -> CMat {
    let ws = sol.covariances();
    let n = ws.first().map_or(0, |w| w.nrows());
    ws.iter().fold(CMat::zeros(n, n), |acc, w| acc + w)
}

pub(crate) fn cu_sinr_cov(s: &Scenario, ch: &ChannelSet, ws: &[CMat], p: &DVector<f64>, k: usize) -> f64 {
    let h = &ch.h_bs_cu[k];
    let mut interf = s.noise_cu;
    for (j, w) in ws.iter().enumerate() {
        if j != k {
            interf += quad(w, h);
        }
    }
    for m in 0..s.m() {
        interf += p[m] * ch.h_d2dtx_cu[(m, k)].norm_sqr();
    }
    quad(&ws[k], h) / interf
}

pub(crate) fn d2d_sinr_cov(s: &Scenario, ch: &ChannelSet, ws: &[CMat], p: &DVector<f64>, m: usize) -> f64 {
    let h = &ch.h_bs_d2drx[m];
    let mut interf = s.noise_d2d;
    for w in ws {
        interf += quad(w, h);
    }
    for j in 0..s.m() {
        if j != m {
            interf += p[j] * ch.h_d2dtx_d2drx[(j, m)].norm_sqr();
        }
    }
    p[m] * ch.h_d2dtx_d2drx[(m, m)].norm_sqr() / interf
}

pub fn cu_sinr(s: &Scenario, ch: &ChannelSet, sol: &Solution, k: usize) -> f64 {
    cu_sinr_cov(s, ch, &sol.covariances(), &sol.p, k)
}

pub fn d2d_sinr(s: &Scenario, ch: &ChannelSet, sol: &Solution, m: usize) -> f64 {
    d2d_sinr_cov(s, ch, &sol.covariances(), &sol.p, m)
}

/// Interference-plus-noise covariance seen by the radar receiver for a given `B`.
pub(crate) fn radar_interference(s: &Scenario, ch: &ChannelSet, f: &CMat, p: &DVector<f64>, with_d2d: bool) -> CMat {
    let nr = s.array.n_rx;
    let mut g = &ch.b * f * ch.b.adjoint();
    if with_d2d {
        for (m, h) in ch.h_d2dtx_bs.iter().enumerate() {
            g += outer(h) * c(p[m], 0.0);
        }
    }
    for i in 0..nr {
        g[(i, i)] += c(s.noise_radar, 0.0);
    }
    g
}

/// Radar SINR of a receive filter `u` for covariance `F` and powers `p`.
pub fn radar_sinr_of(s: &Scenario, ch: &ChannelSet, f: &CMat, p: &DVector<f64>, u: &CVec) -> f64 {
    let a0 = &ch.a_r0 * ch.a_t0.adjoint() * ch.target_amp;
    let num = quad(&(&a0 * f * a0.adjoint()), u);
    let den = quad(&radar_interference(s, ch, f, p, true), u);
    num / den
}

pub fn radar_sinr(s: &Scenario, ch: &ChannelSet, sol: &Solution) -> f64 {
    radar_sinr_of(s, ch, &covariance(sol), &sol.p, &sol.u)
}

pub fn evaluate(s: &Scenario, ch: &ChannelSet, sol: &Solution) -> Metrics {
    let ws = sol.covariances();
    let sinr_cu: Vec<f64> = (0..s.k()).map(|k| cu_sinr_cov(s, ch, &ws, &sol.p, k)).collect();
    let sinr_d2d: Vec<f64> = (0..s.m()).map(|m| d2d_sinr_cov(s, ch, &ws, &sol.p, m)).collect();
    let rate_cu: Vec<f64> = sinr_cu.iter().map(|x| (1.0 + x).log2()).collect();
    let rate_d2d: Vec<f64> = sinr_d2d.iter().map(|x| (1.0 + x).log2()).collect();
    let sum_rate = rate_cu.iter().sum::<f64>() + rate_d2d.iter().sum::<f64>();
    let f = ws.iter().fold(CMat::zeros(s.array.n_tx, s.array.n_tx), |acc, w| acc + w);
    Metrics { sinr_cu, sinr_d2d, rate_cu, rate_d2d, sum_rate, radar_sinr: radar_sinr_of(s, ch, &f, &sol.p, &sol.u) }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Beampatterns {
    pub grid_deg: Vec<f64>,
    pub p1: Vec<f64>,
    pub p2: Vec<f64>,
    pub p3: Vec<f64>,
}

/// Transmit, receive and cascaded beampatterns on an angle grid.
pub fn beampatterns(s: &Scenario, sol: &Solution, grid: &[f64]) -> Beampatterns {
    let f = covariance(sol);
    let uu = sol.u.norm_squared();
    let mut out = Beampatterns { grid_deg: grid.to_vec(), p1: Vec::new(), p2: Vec::new(), p3: Vec::new() };
    for &th in grid {
        let at = steering_vector(th, s.array.n_tx);
        let ar = steering_vector(th, s.array.n_rx);
        let p1 = quad(&f, &at).max(0.0);
        let p2 = sol.u.dotc(&ar).norm_sqr() / uu;
        // E|uᴴ a_r a_tᴴ x|² = |uᴴ a_r|² · a_tᴴ F a_t
        out.p1.push(p1);
        out.p2.push(p2);
        out.p3.push(p1 * sol.u.dotc(&ar).norm_sqr() / uu);
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::scenario::{ArrayConfig, PolarPlacement};
    use nalgebra::Complex;

    fn scen(k: usize, m: usize, n: usize) -> Scenario {
        Scenario {
            array: ArrayConfig { n_tx: n, n_rx: n },
            cus: (0..k).map(|i| PolarPlacement { angle_deg: 10.0 * i as f64, distance_m: 40.0 }).collect(),
            d2d_tx: (0..m).map(|i| PolarPlacement { angle_deg: -20.0 - i as f64, distance_m: 60.0 }).collect(),
            d2d_rx: (0..m).map(|i| PolarPlacement { angle_deg: -30.0 - i as f64, distance_m: 70.0 }).collect(),
            target_angle: 0.0,
            clutter_angles: vec![],
            target_power_gain: 1e-11,
            clutter_power_gains: vec![],
            si_power_gain: 1e-30,
            pathloss_ref: 1e-3,
            pathloss_exp: 3.0,
            noise_cu: 1.0,
            noise_d2d: 1.0,
            noise_radar: 1e-12,
            p_bs_max: 1.0,
            p_d2d_max: vec![1.0; m],
            gamma_r: 1.0,
        }
    }

    fn blank_channels(n: usize, k: usize, m: usize) -> ChannelSet {
        ChannelSet {
            h_bs_cu: vec![CVec::zeros(n); k],
            h_bs_d2drx: vec![CVec::zeros(n); m],
            h_d2dtx_bs: vec![CVec::zeros(n); m],
            h_d2dtx_d2drx: CMat::zeros(m, m),
            h_d2dtx_cu: CMat::zeros(m, k),
            h_si: CMat::zeros(n, n),
            target_amp: c(1.0, 0.0),
            clutter_amps: vec![],
            a_t0: steering_vector(0.0, n),
            a_r0: steering_vector(0.0, n),
            b: CMat::zeros(n, n),
        }
    }

    fn v(xs: &[(f64, f64)]) -> CVec {
        CVec::from_iterator(xs.len(), xs.iter().map(|&(a, b)| c(a, b)))
    }

    #[test]
    fn covariance_small_cases() {
        let sol = Solution { w: vec![v(&[(1.0, 0.0), (0.0, 0.0)])], big_w: None, u: v(&[(1.0, 0.0)]), p: DVector::zeros(0) };
        let f = covariance(&sol);
        assert_eq!(f[(0, 0)], c(1.0, 0.0));
        assert_eq!(f[(1, 1)], c(0.0, 0.0));
        let r = 1.0 / 2f64.sqrt();
        let sol = Solution {
            w: vec![v(&[(r, 0.0), (r, 0.0)]), v(&[(0.0, r), (0.0, -r)])],
            big_w: None,
            u: v(&[(1.0, 0.0)]),
            p: DVector::zeros(0),
        };
        assert!((htrace(&covariance(&sol)) - 2.0).abs() < 1e-14);
    }

    #[test]
    fn cu_sinr_examples() {
        let s = scen(1, 0, 2);
        let mut ch = blank_channels(2, 1, 0);
        ch.h_bs_cu[0] = v(&[(1.0, 0.0), (0.0, 0.0)]);
        let mut sol = Solution { w: vec![v(&[(2.0, 0.0), (0.0, 0.0)])], big_w: None, u: v(&[(1.0, 0.0), (0.0, 0.0)]), p: DVector::zeros(0) };
        assert!((cu_sinr(&s, &ch, &sol, 0) - 4.0).abs() < 1e-14);
        sol.w[0] = v(&[(0.0, 0.0), (3.0, 1.0)]);
        assert_eq!(cu_sinr(&s, &ch, &sol, 0), 0.0);
    }

    #[test]
    fn d2d_sinr_examples() {
        let s = scen(1, 1, 1);
        let mut ch = blank_channels(1, 1, 1);
        ch.h_d2dtx_d2drx[(0, 0)] = c(2.0, 0.0);
        ch.h_bs_d2drx[0] = v(&[(1.0, 0.0)]);
        let mut sol = Solution { w: vec![v(&[(1.0, 0.0)])], big_w: None, u: v(&[(1.0, 0.0)]), p: DVector::from_element(1, 1.0) };
        assert!((d2d_sinr(&s, &ch, &sol, 0) - 2.0).abs() < 1e-14);
        sol.p[0] = 0.0;
        assert_eq!(d2d_sinr(&s, &ch, &sol, 0), 0.0);
    }

    #[test]
    fn radar_clean_case_and_scaling() {
        let n = 4;
        let mut s = scen(1, 0, n);
        s.target_power_gain = 1e-11;
        let mut ch = blank_channels(n, 1, 0);
        ch.target_amp = Complex::from_polar(1e-11f64.sqrt(), 0.7);
        let w = ch.a_t0.clone();
        let sol = Solution { w: vec![w], big_w: None, u: ch.a_r0.clone(), p: DVector::zeros(0) };
        let r = radar_sinr(&s, &ch, &sol);
        assert!((r - 10.0).abs() < 1e-9, "{r}");
        let mut scaled = sol.clone();
        scaled.u *= c(-3.0, 2.0);
        assert!((radar_sinr(&s, &ch, &scaled) - r).abs() < 1e-12 * r);
    }

    #[test]
    fn beampattern_examples() {
        let n = 4;
        let s = scen(1, 0, n);
        let ws: Vec<CMat> = (0..n).map(|i| {
            let mut e = CVec::zeros(n);
            e[i] = c(1.0, 0.0);
            outer(&e)
        }).collect();
        let sol = Solution { w: vec![], big_w: Some(ws), u: steering_vector(0.0, n), p: DVector::zeros(0) };
        let grid: Vec<f64> = (-9..=9).map(|i| 10.0 * i as f64).collect();
        let bp = beampatterns(&s, &sol, &grid);
        assert!(bp.p1.iter().all(|x| (x - 1.0).abs() < 1e-12));
        let at0 = grid.iter().position(|&t| t == 0.0).unwrap();
        assert!((bp.p2[at0] - 1.0).abs() < 1e-12);
        assert!(bp.p2.iter().all(|&x| x <= 1.0 + 1e-12));
        let one = beampatterns(&s, &sol, &[12.5]);
        assert_eq!(one.p1.len(), 1);
    }
}
