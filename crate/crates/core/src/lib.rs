//! Joint ISAC transmit beamforming, radar receive filtering and D2D power
//! allocation for a full-duplex base station.
//!
//! - [`scenario`]: geometry, steering vectors and seeded channel draws
//! - [`metrics`]: SINRs, rates and beampatterns of a candidate solution
//! - [`rxbeam`]: MVDR receive filter
//! - [`sca`]: the successive convex approximation optimizer
//! - [`baselines`]: MRT, ZF, sensing-only and communication-only schemes
//! - [`experiments`]: sweeps, rank-one census, beampatterns, traces
//! - [`config`]: TOML run configuration

pub mod baselines;
pub mod config;
pub mod error;
pub mod experiments;
pub mod linalg;
pub mod metrics;
pub mod report;
pub mod rxbeam;
pub mod sca;
pub mod scenario;

pub use config::{Config, ScenarioTemplate};
pub use error::{CoreError, Result};
pub use experiments::{run_scheme, run_sweep, Scheme, SweepParam, SweepSpec};
pub use metrics::{evaluate, Metrics, Solution};
pub use report::RunReport;
pub use sca::{sca_solve, ScaOptions, ScaSettings};
pub use scenario::{realize_channels, ChannelSet, Scenario};

/// Maps `f` over `items`, on the rayon pool when `parallel` is set and the
/// `parallel` feature is compiled in. Output order always follows `items`.
pub fn par_map<T, R, F>(items: &[T], parallel: bool, f: F) -> Vec<R>
where
    T: Sync,
    R: Send,
    F: Fn(&T) -> R + Sync + Send,
{
    #[cfg(feature = "parallel")]
    if parallel {
        use rayon::prelude::*;
        return items.par_iter().map(f).collect();
    }
    #[cfg(not(feature = "parallel"))]
    let _ = parallel;
    items.iter().map(f).collect()
}
