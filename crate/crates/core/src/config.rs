//! TOML run configuration. Every physical quantity is given in dB, dBm,
//! meters or degrees and converted to linear units here.
//!
//! ```toml
//! [array]
//! n_tx = 16
//! n_rx = 16
//! array_gain = true        # scale target/clutter gains by N_t·N_r
//!
//! [radar]
//! target_angle_deg = 0.0
//! target_gain_db = 10.0    # |α0|² relative to the radar noise floor
//! si_power_db = -130.0
//! gamma_r_db = 15.0
//! clutter = [{ angle_deg = -50.0, gain_db = 30.0 }, { angle_deg = 40.0, gain_db = 30.0 }]
//!
//! [[cus]]
//! angle_deg = -75.0
//! distance_m = 50.0
//!
//! [[d2d]]
//! rx_angle_deg = [-40.0, -30.0]
//! rx_distance_m = [70.0, 80.0]
//! separation_m = 20.0
//! ```
//!
//! Omitted sections take the defaults of [`Config::default`].

use std::path::Path;

use isac_conic::ToleranceSet;
use serde::{Deserialize, Serialize};

use crate::error::{CoreError, Result};
use crate::experiments::{Scheme, SweepParam};
use crate::sca::ScaSettings;
use crate::scenario::{db_to_linear, dbm_to_watts, ArrayConfig, PlacementRange, PolarPlacement, Scenario};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ArraySection {
    pub n_tx: usize,
    pub n_rx: usize,
    /// Multiply the target and clutter power gains by `N_t·N_r`.
    pub array_gain: bool,
}

impl Default for ArraySection {
    fn default() -> Self {
        ArraySection { n_tx: 16, n_rx: 16, array_gain: true }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ClutterSection {
    pub angle_deg: f64,
    /// Power gain relative to the radar noise floor.
    pub gain_db: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RadarSection {
    pub target_angle_deg: f64,
    /// |α0|² relative to the radar noise floor.
    pub target_gain_db: f64,
    pub clutter: Vec<ClutterSection>,
    /// Per-entry residual self-interference power β.
    pub si_power_db: f64,
    pub gamma_r_db: f64,
}

impl Default for RadarSection {
    fn default() -> Self {
        RadarSection {
            target_angle_deg: 0.0,
            target_gain_db: 10.0,
            clutter: vec![
                ClutterSection { angle_deg: -50.0, gain_db: 30.0 },
                ClutterSection { angle_deg: 40.0, gain_db: 30.0 },
            ],
            si_power_db: -130.0,
            gamma_r_db: 15.0,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ChannelSection {
    pub pathloss_ref_db: f64,
    pub pathloss_exp: f64,
}

impl Default for ChannelSection {
    fn default() -> Self {
        ChannelSection { pathloss_ref_db: -30.0, pathloss_exp: 3.0 }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct NoiseSection {
    pub cu_dbm: f64,
    pub d2d_dbm: f64,
    pub radar_dbm: f64,
}

impl Default for NoiseSection {
    fn default() -> Self {
        NoiseSection { cu_dbm: -90.0, d2d_dbm: -90.0, radar_dbm: -90.0 }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct PowerSection {
    pub p_bs_dbm: f64,
    /// Budget of every D2D transmitter.
    pub p_d2d_dbm: f64,
}

impl Default for PowerSection {
    fn default() -> Self {
        // 30 mW and 10 mW
        PowerSection { p_bs_dbm: 10.0 * 30f64.log10(), p_d2d_dbm: 10.0 }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PlacementSection {
    pub angle_deg: f64,
    pub distance_m: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct D2dSection {
    pub rx_angle_deg: [f64; 2],
    pub rx_distance_m: [f64; 2],
    pub separation_m: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ScaSection {
    pub max_iters: usize,
    pub rel_tol: f64,
    pub randomization_samples: usize,
    pub rank_ratio_threshold: f64,
}

impl Default for ScaSection {
    fn default() -> Self {
        let s = ScaSettings::default();
        ScaSection {
            max_iters: s.max_iters,
            rel_tol: s.rel_tol,
            randomization_samples: s.randomization_samples,
            rank_ratio_threshold: s.rank_ratio_threshold,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SolverSection {
    pub feas: f64,
    pub gap: f64,
    pub max_iters: usize,
}

impl Default for SolverSection {
    fn default() -> Self {
        let t = ToleranceSet::default();
        SolverSection { feas: t.feas, gap: t.gap, max_iters: t.max_iters }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SweepSection {
    pub parameter: SweepParam,
    /// Grid in dB (γ_r) or dBm (powers).
    pub values: Vec<f64>,
    pub monte_carlo: usize,
    pub schemes: Vec<Scheme>,
}

impl Default for SweepSection {
    fn default() -> Self {
        SweepSection {
            parameter: SweepParam::GammaR,
            values: vec![10.0, 12.0, 14.0, 16.0, 18.0],
            monte_carlo: 5,
            schemes: Scheme::ALL.to_vec(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct CensusSection {
    pub draws: usize,
    pub gamma_r_db: [f64; 2],
    pub p_m_dbm: [f64; 2],
    pub p_bs_dbm: [f64; 2],
}

impl Default for CensusSection {
    fn default() -> Self {
        CensusSection { draws: 200, gamma_r_db: [10.0, 20.0], p_m_dbm: [0.7, 20.0], p_bs_dbm: [20.0, 120.0] }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct BeampatternSection {
    pub step_deg: f64,
    pub gamma_r_db: f64,
    pub p_bs_dbm: f64,
    pub p_m_dbm: f64,
    pub schemes: Vec<Scheme>,
}

impl Default for BeampatternSection {
    fn default() -> Self {
        BeampatternSection {
            step_deg: 0.5,
            gamma_r_db: 15.0,
            p_bs_dbm: 10.0 * 30f64.log10(),
            p_m_dbm: 10.0,
            schemes: vec![Scheme::Proposed, Scheme::CommOnly, Scheme::SensingOnly],
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ConvergeSection {
    pub antennas: Vec<usize>,
}

impl Default for ConvergeSection {
    fn default() -> Self {
        ConvergeSection { antennas: vec![16, 32] }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct Config {
    pub seed: u64,
    pub array: ArraySection,
    pub radar: RadarSection,
    pub channel: ChannelSection,
    pub noise: NoiseSection,
    pub power: PowerSection,
    pub cus: Vec<PlacementSection>,
    pub d2d: Vec<D2dSection>,
    pub sca: ScaSection,
    pub solver: SolverSection,
    pub sweep: SweepSection,
    pub census: CensusSection,
    pub beampattern: BeampatternSection,
    pub converge: ConvergeSection,
}

impl Default for Config {
    fn default() -> Self {
        Config {
            seed: 1,
            array: ArraySection::default(),
            radar: RadarSection::default(),
            channel: ChannelSection::default(),
            noise: NoiseSection::default(),
            power: PowerSection::default(),
            cus: vec![
                PlacementSection { angle_deg: -75.0, distance_m: 50.0 },
                PlacementSection { angle_deg: 20.0, distance_m: 60.0 },
            ],
            d2d: vec![
                D2dSection { rx_angle_deg: [-40.0, -30.0], rx_distance_m: [70.0, 80.0], separation_m: 20.0 },
                D2dSection { rx_angle_deg: [65.0, 75.0], rx_distance_m: [70.0, 80.0], separation_m: 20.0 },
            ],
            sca: ScaSection::default(),
            solver: SolverSection::default(),
            sweep: SweepSection::default(),
            census: CensusSection::default(),
            beampattern: BeampatternSection::default(),
            converge: ConvergeSection::default(),
        }
    }
}

/// A scenario whose D2D pairs are redrawn per Monte Carlo draw.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScenarioTemplate {
    /// D2D placements here are the box centers; draws replace them.
    pub base: Scenario,
    pub ranges: Vec<PlacementRange>,
}

impl Config {
    pub fn from_toml_str(text: &str) -> Result<Self> {
        toml::from_str(text).map_err(|e| CoreError::Config(e.to_string()))
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path)?;
        Self::from_toml_str(&text)
    }

    pub fn to_toml(&self) -> Result<String> {
        toml::to_string_pretty(self).map_err(|e| CoreError::Config(e.to_string()))
    }

    pub fn settings(&self) -> ScaSettings {
        ScaSettings {
            max_iters: self.sca.max_iters,
            rel_tol: self.sca.rel_tol,
            randomization_samples: self.sca.randomization_samples,
            rank_ratio_threshold: self.sca.rank_ratio_threshold,
            solver: ToleranceSet {
                feas: self.solver.feas,
                gap: self.solver.gap,
                max_iters: self.solver.max_iters,
                ..ToleranceSet::default()
            },
        }
    }

    pub fn template(&self) -> Result<ScenarioTemplate> {
        let array_gain = if self.array.array_gain { (self.array.n_tx * self.array.n_rx) as f64 } else { 1.0 };
        let noise_radar = dbm_to_watts(self.noise.radar_dbm);
        let relative = |db: f64| db_to_linear(db) * noise_radar * array_gain;
        let cus = self
            .cus
            .iter()
            .map(|p| PolarPlacement::new(p.angle_deg, p.distance_m))
            .collect::<Result<Vec<_>>>()?;
        let ranges: Vec<PlacementRange> = self
            .d2d
            .iter()
            .map(|d| PlacementRange {
                rx_angle_deg: (d.rx_angle_deg[0], d.rx_angle_deg[1]),
                rx_distance_m: (d.rx_distance_m[0], d.rx_distance_m[1]),
                separation_m: d.separation_m,
            })
            .collect();
        let mut d2d_rx = Vec::new();
        let mut d2d_tx = Vec::new();
        for r in &ranges {
            let rx = PolarPlacement::new(
                0.5 * (r.rx_angle_deg.0 + r.rx_angle_deg.1),
                0.5 * (r.rx_distance_m.0 + r.rx_distance_m.1),
            )?;
            let (x, y) = rx.cartesian();
            d2d_rx.push(rx);
            d2d_tx.push(PolarPlacement::from_cartesian(x, y + r.separation_m));
        }
        let base = Scenario {
            array: ArrayConfig { n_tx: self.array.n_tx, n_rx: self.array.n_rx },
            cus,
            d2d_tx,
            d2d_rx,
            target_angle: self.radar.target_angle_deg,
            clutter_angles: self.radar.clutter.iter().map(|c| c.angle_deg).collect(),
            target_power_gain: relative(self.radar.target_gain_db),
            clutter_power_gains: self.radar.clutter.iter().map(|c| relative(c.gain_db)).collect(),
            si_power_gain: db_to_linear(self.radar.si_power_db),
            pathloss_ref: db_to_linear(self.channel.pathloss_ref_db),
            pathloss_exp: self.channel.pathloss_exp,
            noise_cu: dbm_to_watts(self.noise.cu_dbm),
            noise_d2d: dbm_to_watts(self.noise.d2d_dbm),
            noise_radar,
            p_bs_max: dbm_to_watts(self.power.p_bs_dbm),
            p_d2d_max: vec![dbm_to_watts(self.power.p_d2d_dbm); ranges.len()],
            gamma_r: db_to_linear(self.radar.gamma_r_db),
        };
        base.validate()?;
        Ok(ScenarioTemplate { base, ranges })
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn default_round_trips_through_toml() {
        let c = Config::default();
        let text = c.to_toml().unwrap();
        assert_eq!(Config::from_toml_str(&text).unwrap(), c);
    }

    #[test]
    fn partial_config_fills_defaults() {
        let c = Config::from_toml_str("seed = 7\n[array]\nn_tx = 8\n").unwrap();
        assert_eq!(c.seed, 7);
        assert_eq!(c.array.n_tx, 8);
        assert_eq!(c.array.n_rx, 16);
        assert!(Config::from_toml_str("[array]\nbogus = 1\n").is_err());
    }

    #[test]
    fn template_units() {
        let t = Config::default().template().unwrap();
        let s = &t.base;
        assert!((s.noise_radar - 1e-12).abs() < 1e-24);
        assert!((s.target_power_gain - 10.0 * 1e-12 * 256.0).abs() < 1e-20);
        assert!((s.p_bs_max - 0.03).abs() < 1e-15);
        assert!((s.p_d2d_max[0] - 0.01).abs() < 1e-15);
        assert!((s.pathloss_ref - 1e-3).abs() < 1e-15);
        assert_eq!(t.ranges.len(), 2);
    }
}
