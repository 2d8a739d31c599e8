//! Geometry, steering vectors and channel realizations.
//!
//! The BS sits at the origin and a polar placement `(θ, d)` maps to
//! `(d sin θ, d cos θ)`, so θ is measured from the array broadside.

use std::f64::consts::PI;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{CoreError, Result};
use crate::linalg::{c, CMat, CVec};

/// Name of the generator behind every seeded draw, recorded in run metadata.
pub const RNG_ALGORITHM: &str = "ChaCha8 (rand_chacha 0.9, seed_from_u64, per-purpose streams)";

// ChaCha streams keep channel, placement and randomization draws independent
// under the same seed.
pub(crate) const STREAM_CHANNELS: u64 = 0;
pub(crate) const STREAM_PLACEMENT: u64 = 1;
pub(crate) const STREAM_RANDOMIZATION: u64 = 2;
pub(crate) const STREAM_CENSUS: u64 = 3;

pub(crate) fn rng(seed: u64, stream: u64) -> ChaCha8Rng {
    let mut r = ChaCha8Rng::seed_from_u64(seed);
    r.set_stream(stream);
    r
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ArrayConfig {
    pub n_tx: usize,
    pub n_rx: usize,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PolarPlacement {
    pub angle_deg: f64,
    pub distance_m: f64,
}

impl PolarPlacement {
    pub fn new(angle_deg: f64, distance_m: f64) -> Result<Self> {
        let p = PolarPlacement { angle_deg, distance_m };
        p.validate()?;
        Ok(p)
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.distance_m > 0.0 && self.distance_m.is_finite()) {
            return Err(CoreError::InvalidScenario(format!("distance {} m must be positive", self.distance_m)));
        }
        if !(self.angle_deg > -90.0 && self.angle_deg < 90.0) {
            return Err(CoreError::InvalidScenario(format!("angle {}° outside (-90°, 90°)", self.angle_deg)));
        }
        Ok(())
    }

    pub fn cartesian(&self) -> (f64, f64) {
        let t = self.angle_deg.to_radians();
        (self.distance_m * t.sin(), self.distance_m * t.cos())
    }

    pub fn from_cartesian(x: f64, y: f64) -> Self {
        PolarPlacement { angle_deg: x.atan2(y).to_degrees(), distance_m: x.hypot(y) }
    }

    pub fn distance_to(&self, other: &PolarPlacement) -> f64 {
        let (x1, y1) = self.cartesian();
        let (x2, y2) = other.cartesian();
        (x1 - x2).hypot(y1 - y2)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Scenario {
    pub array: ArrayConfig,
    pub cus: Vec<PolarPlacement>,
    pub d2d_tx: Vec<PolarPlacement>,
    pub d2d_rx: Vec<PolarPlacement>,
    pub target_angle: f64,
    pub clutter_angles: Vec<f64>,
    /// |α0|², linear.
    pub target_power_gain: f64,
    pub clutter_power_gains: Vec<f64>,
    /// Per-entry residual self-interference power β.
    pub si_power_gain: f64,
    /// ε0, linear.
    pub pathloss_ref: f64,
    pub pathloss_exp: f64,
    pub noise_cu: f64,
    pub noise_d2d: f64,
    pub noise_radar: f64,
    pub p_bs_max: f64,
    pub p_d2d_max: Vec<f64>,
    /// γ_r, linear.
    pub gamma_r: f64,
}

impl Scenario {
    pub fn k(&self) -> usize {
        self.cus.len()
    }

    pub fn m(&self) -> usize {
        self.d2d_rx.len()
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |msg: String| Err(CoreError::InvalidScenario(msg));
        if self.array.n_tx == 0 || self.array.n_rx == 0 {
            return bad("array needs at least one element per side".into());
        }
        if self.cus.is_empty() {
            return bad("at least one CU is required".into());
        }
        if self.d2d_tx.len() != self.d2d_rx.len() || self.p_d2d_max.len() != self.d2d_rx.len() {
            return bad(format!(
                "D2D lengths differ: {} TX, {} RX, {} power budgets",
                self.d2d_tx.len(),
                self.d2d_rx.len(),
                self.p_d2d_max.len()
            ));
        }
        if self.clutter_angles.len() != self.clutter_power_gains.len() {
            return bad("clutter angles and gains differ in length".into());
        }
        for p in self.cus.iter().chain(&self.d2d_tx).chain(&self.d2d_rx) {
            p.validate()?;
        }
        let positive = [
            ("target gain", self.target_power_gain),
            ("SI gain", self.si_power_gain),
            ("path-loss reference", self.pathloss_ref),
            ("path-loss exponent", self.pathloss_exp),
            ("CU noise", self.noise_cu),
            ("D2D noise", self.noise_d2d),
            ("radar noise", self.noise_radar),
            ("BS power", self.p_bs_max),
        ];
        for (name, v) in positive {
            if !(v > 0.0 && v.is_finite()) {
                return bad(format!("{name} must be positive, got {v}"));
            }
        }
        if self.clutter_power_gains.iter().chain(&self.p_d2d_max).any(|&v| !(v > 0.0 && v.is_finite())) {
            return bad("clutter gains and D2D budgets must be positive".into());
        }
        if !(self.gamma_r >= 0.0 && self.gamma_r.is_finite()) {
            return bad(format!("gamma_r must be nonnegative, got {}", self.gamma_r));
        }
        Ok(())
    }

    fn amplitude(&self, d: f64) -> f64 {
        (self.pathloss_ref * d.powf(-self.pathloss_exp)).sqrt()
    }
}

/// All channel coefficients of one realization.
#[derive(Debug, Clone, PartialEq)]
pub struct ChannelSet {
    /// h_{BS,k}, length N_t.
    pub h_bs_cu: Vec<CVec>,
    /// h_{BS,m}, length N_t.
    pub h_bs_d2drx: Vec<CVec>,
    /// h^TX_{m,BS}, length N_r.
    pub h_d2dtx_bs: Vec<CVec>,
    /// Entry (m′, m) is h^TX_{m′,m}, TX m′ to RX m.
    pub h_d2dtx_d2drx: CMat,
    /// Entry (m, k) is h^TX_{m,k}.
    pub h_d2dtx_cu: CMat,
    /// N_r × N_t.
    pub h_si: CMat,
    pub target_amp: nalgebra::Complex<f64>,
    pub clutter_amps: Vec<nalgebra::Complex<f64>>,
    pub a_t0: CVec,
    pub a_r0: CVec,
    /// B = Σ_i α_i a_r(θ_i) a_t(θ_i)ᴴ + H_SI.
    pub b: CMat,
}

/// Unit-norm half-wavelength ULA response.
pub fn steering_vector(angle_deg: f64, n: usize) -> CVec {
    let s = angle_deg.to_radians().sin();
    let scale = 1.0 / (n as f64).sqrt();
    CVec::from_fn(n, |i, _| {
        let ph = PI * i as f64 * s;
        c(scale * ph.cos(), scale * ph.sin())
    })
}

pub fn dbm_to_watts(x: f64) -> f64 {
    10f64.powf((x - 30.0) / 10.0)
}

pub fn watts_to_dbm(w: f64) -> f64 {
    10.0 * w.log10() + 30.0
}

pub fn db_to_linear(x: f64) -> f64 {
    10f64.powf(x / 10.0)
}

pub fn linear_to_db(x: f64) -> f64 {
    10.0 * x.log10()
}

fn random_phase(r: &mut ChaCha8Rng, power: f64) -> nalgebra::Complex<f64> {
    let ph: f64 = r.random_range(0.0..2.0 * PI);
    nalgebra::Complex::from_polar(power.sqrt(), ph)
}

pub fn realize_channels(s: &Scenario, seed: u64) -> Result<ChannelSet> {
    s.validate()?;
    let (nt, nr) = (s.array.n_tx, s.array.n_rx);
    let (k, m) = (s.k(), s.m());
    let dist = |a: &PolarPlacement, an: String, b: &PolarPlacement, bn: String| -> Result<f64> {
        let d = a.distance_to(b);
        if d <= 0.0 {
            return Err(CoreError::CoincidentNodes(an, bn));
        }
        Ok(d)
    };

    let h_bs_cu = s
        .cus
        .iter()
        .map(|p| steering_vector(p.angle_deg, nt) * c(s.amplitude(p.distance_m) * (nt as f64).sqrt(), 0.0))
        .collect();
    let h_bs_d2drx = s
        .d2d_rx
        .iter()
        .map(|p| steering_vector(p.angle_deg, nt) * c(s.amplitude(p.distance_m) * (nt as f64).sqrt(), 0.0))
        .collect();
    let h_d2dtx_bs = s
        .d2d_tx
        .iter()
        .map(|p| steering_vector(p.angle_deg, nr) * c(s.amplitude(p.distance_m) * (nr as f64).sqrt(), 0.0))
        .collect();
    let mut h_d2dtx_d2drx = CMat::zeros(m, m);
    for (i, tx) in s.d2d_tx.iter().enumerate() {
        for (j, rx) in s.d2d_rx.iter().enumerate() {
            let d = dist(tx, format!("D2D-TX{i}"), rx, format!("D2D-RX{j}"))?;
            h_d2dtx_d2drx[(i, j)] = c(s.amplitude(d), 0.0);
        }
    }
    let mut h_d2dtx_cu = CMat::zeros(m, k);
    for (i, tx) in s.d2d_tx.iter().enumerate() {
        for (j, cu) in s.cus.iter().enumerate() {
            let d = dist(tx, format!("D2D-TX{i}"), cu, format!("CU{j}"))?;
            h_d2dtx_cu[(i, j)] = c(s.amplitude(d), 0.0);
        }
    }

    let mut r = rng(seed, STREAM_CHANNELS);
    let h_si = CMat::from_fn(nr, nt, |_, _| random_phase(&mut r, s.si_power_gain));
    let target_amp = random_phase(&mut r, s.target_power_gain);
    let clutter_amps: Vec<_> = s.clutter_power_gains.iter().map(|&g| random_phase(&mut r, g)).collect();

    let mut b = h_si.clone();
    for (&ang, &amp) in s.clutter_angles.iter().zip(&clutter_amps) {
        b += steering_vector(ang, nr) * steering_vector(ang, nt).adjoint() * amp;
    }

    Ok(ChannelSet {
        h_bs_cu,
        h_bs_d2drx,
        h_d2dtx_bs,
        h_d2dtx_d2drx,
        h_d2dtx_cu,
        h_si,
        target_amp,
        clutter_amps,
        a_t0: steering_vector(s.target_angle, nt),
        a_r0: steering_vector(s.target_angle, nr),
        b,
    })
}

/// Sampling box for one D2D pair.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PlacementRange {
    pub rx_angle_deg: (f64, f64),
    pub rx_distance_m: (f64, f64),
    pub separation_m: f64,
}

fn uniform(r: &mut ChaCha8Rng, (lo, hi): (f64, f64)) -> f64 {
    if hi > lo {
        r.random_range(lo..=hi)
    } else {
        lo
    }
}

const MAX_TX_DRAWS: usize = 10_000;

/// Draws every D2D-RX uniformly in its box and puts its TX at the configured
/// separation in a uniform bearing. Bearings that would push the TX outside
/// the BS half-plane `(−90°, 90°)` are redrawn.
pub fn random_d2d_placement(s: &Scenario, ranges: &[PlacementRange], seed: u64) -> Result<Scenario> {
    let mut r = rng(seed, STREAM_PLACEMENT);
    let mut out = s.clone();
    out.d2d_rx.clear();
    out.d2d_tx.clear();
    for (i, range) in ranges.iter().enumerate() {
        if range.rx_angle_deg.0 > range.rx_angle_deg.1 || range.rx_distance_m.0 > range.rx_distance_m.1 {
            return Err(CoreError::InvalidScenario(format!("placement range {i} is empty")));
        }
        let rx = PolarPlacement::new(uniform(&mut r, range.rx_angle_deg), uniform(&mut r, range.rx_distance_m))?;
        let (x, y) = rx.cartesian();
        let mut tx = None;
        for _ in 0..MAX_TX_DRAWS {
            let bearing: f64 = r.random_range(0.0..2.0 * PI);
            let cand = PolarPlacement::from_cartesian(
                x + range.separation_m * bearing.sin(),
                y + range.separation_m * bearing.cos(),
            );
            if cand.validate().is_ok() {
                tx = Some(cand);
                break;
            }
        }
        let tx = tx.ok_or_else(|| CoreError::InvalidScenario(format!("no valid D2D-TX{i} bearing found")))?;
        out.d2d_rx.push(rx);
        out.d2d_tx.push(tx);
    }
    if out.p_d2d_max.len() != ranges.len() {
        let p = s.p_d2d_max.first().copied().unwrap_or(0.0);
        out.p_d2d_max = vec![p; ranges.len()];
    }
    out.validate()?;
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;

    pub(crate) fn small() -> Scenario {
        Scenario {
            array: ArrayConfig { n_tx: 4, n_rx: 4 },
            cus: vec![PolarPlacement { angle_deg: -75.0, distance_m: 50.0 }],
            d2d_tx: vec![PolarPlacement { angle_deg: -30.0, distance_m: 60.0 }],
            d2d_rx: vec![PolarPlacement { angle_deg: -35.0, distance_m: 75.0 }],
            target_angle: 0.0,
            clutter_angles: vec![-50.0],
            target_power_gain: 1e-11,
            clutter_power_gains: vec![1e-9],
            si_power_gain: 1e-13,
            pathloss_ref: 1e-3,
            pathloss_exp: 3.0,
            noise_cu: 1e-12,
            noise_d2d: 1e-12,
            noise_radar: 1e-12,
            p_bs_max: 0.03,
            p_d2d_max: vec![0.01],
            gamma_r: 10.0,
        }
    }

    fn close(a: nalgebra::Complex<f64>, b: nalgebra::Complex<f64>) -> bool {
        (a - b).norm() < 1e-12
    }

    #[test]
    fn steering_examples() {
        let a = steering_vector(0.0, 4);
        assert!(a.iter().all(|z| close(*z, c(0.5, 0.0))));
        let a = steering_vector(90.0, 2);
        let r = 1.0 / 2f64.sqrt();
        assert!(close(a[0], c(r, 0.0)) && close(a[1], c(-r, 0.0)));
        let a = steering_vector(30.0, 2);
        assert!(close(a[0], c(r, 0.0)) && close(a[1], c(0.0, r)));
    }

    #[test]
    fn unit_conversions() {
        assert!((dbm_to_watts(-90.0) - 1e-12).abs() < 1e-24);
        assert!((dbm_to_watts(30.0) - 1.0).abs() < 1e-15);
        assert!((db_to_linear(-30.0) - 1e-3).abs() < 1e-18);
        assert!((watts_to_dbm(0.03) - 14.771212547196624).abs() < 1e-12);
    }

    #[test]
    fn d2d_link_amplitude() {
        let mut s = small();
        s.d2d_tx[0] = PolarPlacement::from_cartesian(0.0, 95.0);
        s.d2d_rx[0] = PolarPlacement::new(0.0, 75.0).unwrap();
        let ch = realize_channels(&s, 1).unwrap();
        assert!((ch.h_d2dtx_d2drx[(0, 0)].norm() - 1.25e-7f64.sqrt()).abs() < 1e-15);
    }

    #[test]
    fn broadside_cu_is_all_ones_direction() {
        let mut s = small();
        s.cus[0] = PolarPlacement::new(0.0, 50.0).unwrap();
        let ch = realize_channels(&s, 3).unwrap();
        let h = &ch.h_bs_cu[0];
        assert!(h.iter().all(|z| close(*z, h[0])));
    }

    #[test]
    fn same_seed_same_channels() {
        let s = small();
        assert_eq!(realize_channels(&s, 9).unwrap(), realize_channels(&s, 9).unwrap());
        assert_ne!(realize_channels(&s, 9).unwrap().h_si, realize_channels(&s, 10).unwrap().h_si);
    }

    #[test]
    fn rejects_coincident_nodes() {
        let mut s = small();
        s.d2d_tx[0] = s.cus[0];
        assert!(matches!(realize_channels(&s, 0), Err(CoreError::CoincidentNodes(_, _))));
    }

    #[test]
    fn placement_respects_box_and_separation() {
        let s = small();
        let ranges = [
            PlacementRange { rx_angle_deg: (-40.0, -30.0), rx_distance_m: (70.0, 80.0), separation_m: 20.0 },
            PlacementRange { rx_angle_deg: (65.0, 75.0), rx_distance_m: (70.0, 80.0), separation_m: 20.0 },
        ];
        for seed in 0..50 {
            let out = random_d2d_placement(&s, &ranges, seed).unwrap();
            for (i, r) in ranges.iter().enumerate() {
                let rx = out.d2d_rx[i];
                assert!(rx.angle_deg >= r.rx_angle_deg.0 && rx.angle_deg <= r.rx_angle_deg.1);
                assert!(rx.distance_m >= r.rx_distance_m.0 && rx.distance_m <= r.rx_distance_m.1);
                assert!((out.d2d_tx[i].distance_to(&rx) - 20.0).abs() < 1e-9);
            }
        }
        let fixed = [PlacementRange { rx_angle_deg: (-35.0, -35.0), rx_distance_m: (72.0, 72.0), separation_m: 20.0 }];
        let out = random_d2d_placement(&s, &fixed, 4).unwrap();
        assert_eq!(out.d2d_rx[0].angle_deg, -35.0);
        assert_eq!(out.d2d_rx[0].distance_m, 72.0);
    }
}
