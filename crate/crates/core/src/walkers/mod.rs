//! Monte Carlo harmonic measure: random walks launched from far away,
//! accelerated by exact box-exit jumps, with one counter-addressed RNG
//! stream per walker.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::lattice::Cluster;
use crate::potential::HarmonicProfile;

mod field;
pub mod tables;

pub use field::{WalkField, WalkOutcome};

#[derive(Debug, Error, Clone, PartialEq)]
pub enum WalkerError {
    #[error("launch_factor must be at least 1.5 (got {0})")]
    LaunchTooSmall(f64),
    #[error("kill_factor must be at least 4 × launch_factor (got {kill} with launch {launch})")]
    KillTooSmall { kill: f64, launch: f64 },
    #[error("max_steps must be positive")]
    NoSteps,
    #[error("n_samples must be at least 1")]
    NoSamples,
}

/// Walker geometry and budget. Radii scale with `R + 2`, where `R` is the
/// cluster radius, floored at [`MIN_SCALE`] so that tiny clusters are not
/// probed from a handful of lattice spacings away.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct WalkerConfig {
    #[serde(default = "default_launch")]
    pub launch_factor: f64,
    #[serde(default = "default_kill")]
    pub kill_factor: f64,
    #[serde(default = "default_max_steps")]
    pub max_steps: u64,
    #[serde(default)]
    pub rng_seed: u64,
}

fn default_launch() -> f64 {
    2.0
}
fn default_kill() -> f64 {
    10.0
}
fn default_max_steps() -> u64 {
    1_000_000_000
}

/// Smallest length scale used for the launch and kill radii.
pub const MIN_SCALE: f64 = 8.0;

impl Default for WalkerConfig {
    fn default() -> Self {
        WalkerConfig {
            launch_factor: default_launch(),
            kill_factor: default_kill(),
            max_steps: default_max_steps(),
            rng_seed: 0,
        }
    }
}

impl WalkerConfig {
    pub fn with_seed(seed: u64) -> Self {
        WalkerConfig {
            rng_seed: seed,
            ..Self::default()
        }
    }

    pub fn validate(&self) -> Result<(), WalkerError> {
        if !(self.launch_factor >= 1.5) {
            return Err(WalkerError::LaunchTooSmall(self.launch_factor));
        }
        if !(self.kill_factor >= 4.0 * self.launch_factor) {
            return Err(WalkerError::KillTooSmall {
                kill: self.kill_factor,
                launch: self.launch_factor,
            });
        }
        if self.max_steps == 0 {
            return Err(WalkerError::NoSteps);
        }
        Ok(())
    }

    /// Length scale `max(R + 2, MIN_SCALE)` for a cluster of radius `R`.
    pub fn scale(radius: f64) -> f64 {
        (radius + 2.0).max(MIN_SCALE)
    }
}

/// Largest step index that fits the stream layout (tags use the top two
/// bits of the 32-bit step field).
pub const MAX_STEP: u64 = (1 << 30) - 1;

/// Stream families sharing one run seed. The step field of a stream id is
/// `tag | n` with `n ≤ MAX_STEP`.
pub mod stream {
    /// The chain's own draws and its per-step walkers.
    pub const MAIN: u64 = 0;
    /// Auxiliary `ω` estimates at checkpoints.
    pub const AUX: u64 = 1 << 30;
    /// Monte Carlo capacity estimates at checkpoints.
    pub const CAPACITY: u64 = 2 << 30;
    /// Profiles recomputed after the run (analysis, export).
    pub const ANALYSIS: u64 = 3 << 30;
}

/// The generator for one walker: keyed by the run seed, with the stream
/// selected by `(step, walker)` so results never depend on scheduling.
pub fn walker_rng(seed: u64, step: u64, walker: u64) -> ChaCha8Rng {
    debug_assert!(step >> 32 == 0 && walker >> 32 == 0);
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream((step << 32) | walker);
    rng
}

/// Counters accumulated over a batch of walkers.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct WalkStats {
    pub walkers: u64,
    pub moves: u64,
    /// 2D returns from the kill shell to the launch circle.
    pub reinjections: u64,
    /// 3D walkers discarded at the kill shell and relaunched.
    pub discarded: u64,
    /// Walkers that exceeded `max_steps` and were relaunched.
    pub abandoned: u64,
}

impl WalkStats {
    pub fn merge(mut self, o: WalkStats) -> WalkStats {
        self.walkers += o.walkers;
        self.moves += o.moves;
        self.reinjections += o.reinjections;
        self.discarded += o.discarded;
        self.abandoned += o.abandoned;
        self
    }
}

/// One first-hit site of `Ā` for walker `walker_index` (stream step 0).
pub fn sample_hit(
    c: &Cluster,
    cfg: &WalkerConfig,
    walker_index: u64,
) -> Result<crate::lattice::Site, WalkerError> {
    cfg.validate()?;
    let field = WalkField::new(c);
    Ok(field.sample_hit(cfg, 0, walker_index).site)
}

/// Normalized hit counts of `n_samples` walkers (stream step 0).
pub fn estimate_profile(
    c: &Cluster,
    n_samples: u64,
    cfg: &WalkerConfig,
) -> Result<HarmonicProfile, WalkerError> {
    cfg.validate()?;
    if n_samples == 0 {
        return Err(WalkerError::NoSamples);
    }
    let field = WalkField::new(c);
    Ok(field.estimate_profile(c, n_samples, cfg, 0).0)
}
