//! The DBM-η chain: starting from `{0}`, attach `y ∈ ∂A` with probability
//! proportional to `ω(y, Ā)^η`.
//!
//! Three ways to obtain `ω` are offered: exact solves, Monte Carlo
//! estimates raised to the power `η`, and (for `η = 1`) a single walker per
//! step whose hit site is itself a draw from `ω`.

use std::sync::{Arc, Mutex};

use rand::Rng;
use rand_chacha::ChaCha8Rng;
use rustc_hash::FxHashMap;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::lattice::{neighbors, Cluster, Dim, Site};
use crate::potential::{
    capacity_from_profile, exact::capacity_with, harmonic_measure_exact_with, ExactOptions,
    HarmonicProfile, PotentialError,
};
use crate::walkers::{stream, walker_rng, MAX_STEP, WalkField, WalkStats, WalkerConfig, WalkerError};

mod exterior;

pub use exterior::ExteriorTracker;

/// How the harmonic measure is obtained at each step.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum MeasureMode {
    Exact,
    MonteCarlo {
        /// Walkers per step; `None` means `max(10⁴, 20·|∂A|)`.
        #[serde(default)]
        samples_per_step: Option<u64>,
    },
    DlaFast,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GrowthConfig {
    pub dimension: Dim,
    pub eta: f64,
    pub n_particles: u64,
    pub measure_mode: MeasureMode,
    /// Record capacity (and, where not otherwise known, `ω` of the attached
    /// site) every this many steps; 0 disables checkpoints.
    #[serde(default)]
    pub capacity_checkpoint_every: u64,
    /// Record an estimate of `ω` of the attached site every this many steps
    /// when the mode does not provide it; 0 follows the capacity schedule.
    #[serde(default)]
    pub omega_every: u64,
    pub seed: u64,
    #[serde(default)]
    pub walker: WalkerConfig,
    /// For `η = 0`: attach uniformly over all of `∂A` instead of over the
    /// sites reachable from infinity.
    #[serde(default)]
    pub strict_eden: bool,
    /// Walkers for auxiliary `ω` and capacity estimates at checkpoints.
    #[serde(default = "default_aux_samples")]
    pub checkpoint_samples: u64,
    /// Largest closure handled by the exact solver.
    #[serde(default = "default_exact_cap")]
    pub exact_cap: usize,
}

fn default_aux_samples() -> u64 {
    10_000
}
fn default_exact_cap() -> usize {
    ExactOptions::default().max_closure_sites
}

#[derive(Debug, Error, Clone, PartialEq)]
pub enum ConfigError {
    #[error("eta must be finite and non-negative (got {0})")]
    BadEta(f64),
    #[error("dla_fast requires eta = 1 (got {0})")]
    FastNeedsDla(f64),
    #[error("exact mode with {n} particles may exceed the solver cap of {cap} closure sites")]
    ExactTooLarge { n: u64, cap: usize },
    #[error("strict_eden requires eta = 0")]
    StrictNeedsEden,
    #[error("checkpoint_samples must be positive")]
    NoCheckpointSamples,
    #[error("n_particles must not exceed {max} (got {n})")]
    TooManyParticles { n: u64, max: u64 },
    #[error("walker: {0}")]
    Walker(#[from] WalkerError),
}

impl GrowthConfig {
    pub fn new(dimension: Dim, eta: f64, n_particles: u64, mode: MeasureMode, seed: u64) -> Self {
        GrowthConfig {
            dimension,
            eta,
            n_particles,
            measure_mode: mode,
            capacity_checkpoint_every: 0,
            omega_every: 0,
            seed,
            walker: WalkerConfig::default(),
            strict_eden: false,
            checkpoint_samples: default_aux_samples(),
            exact_cap: default_exact_cap(),
        }
    }

    pub fn validate(&self) -> Result<(), ConfigError> {
        if !self.eta.is_finite() || self.eta < 0.0 {
            return Err(ConfigError::BadEta(self.eta));
        }
        if self.measure_mode == MeasureMode::DlaFast && self.eta != 1.0 {
            return Err(ConfigError::FastNeedsDla(self.eta));
        }
        if self.strict_eden && self.eta != 0.0 {
            return Err(ConfigError::StrictNeedsEden);
        }
        if self.checkpoint_samples == 0 {
            return Err(ConfigError::NoCheckpointSamples);
        }
        if self.n_particles > MAX_STEP {
            return Err(ConfigError::TooManyParticles {
                n: self.n_particles,
                max: MAX_STEP,
            });
        }
        // |Ā| ≤ (2d + 1)|A| bounds the closure of any cluster of n + 1 sites.
        let worst = (self.dimension.degree() as u64 + 1) * (self.n_particles + 1);
        if self.measure_mode == MeasureMode::Exact
            && self.eta > 0.0
            && worst > self.exact_cap as u64
        {
            return Err(ConfigError::ExactTooLarge {
                n: self.n_particles,
                cap: self.exact_cap,
            });
        }
        self.walker.validate()?;
        Ok(())
    }

    fn walker_cfg(&self) -> WalkerConfig {
        WalkerConfig {
            rng_seed: self.seed,
            ..self.walker
        }
    }

    fn exact_opts(&self) -> ExactOptions {
        ExactOptions {
            max_closure_sites: self.exact_cap,
        }
    }
}

/// One attachment.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StepRecord {
    pub n: u64,
    pub site: Vec<i32>,
    /// `ω(x_n, Ā_{n−1})` of the attached site, when measured.
    pub omega: Option<f64>,
    pub r: f64,
    pub cap: Option<f64>,
}

#[derive(Debug, Clone)]
pub struct GrowthTrace {
    pub config: GrowthConfig,
    pub steps: Vec<StepRecord>,
    pub final_cluster: Cluster,
    pub walk_stats: WalkStats,
}

impl GrowthTrace {
    /// Rebuilds the cluster from the recorded attachments.
    pub fn replay(&self) -> Result<Cluster, crate::lattice::LatticeError> {
        replay_steps(self.config.dimension, &self.steps)
    }
}

pub fn replay_steps(
    dim: Dim,
    steps: &[StepRecord],
) -> Result<Cluster, crate::lattice::LatticeError> {
    let mut c = Cluster::new(dim);
    for s in steps {
        let site = Site::from_coords(&s.site).ok_or(crate::lattice::LatticeError::DimensionMismatch {
            site: Site::ORIGIN,
            dim: dim.value(),
        })?;
        c.attach(site)?;
    }
    Ok(c)
}

#[derive(Debug, Error)]
pub enum GrowthError {
    #[error("invalid configuration: {0}")]
    Config(#[from] ConfigError),
    #[error("step {step}: {source}")]
    Potential {
        step: u64,
        source: PotentialError,
        partial: Box<GrowthTrace>,
    },
    #[error("step {step}: no boundary site has positive measure")]
    AllZero { step: u64, partial: Box<GrowthTrace> },
}

impl GrowthError {
    pub fn partial(&self) -> Option<&GrowthTrace> {
        match self {
            GrowthError::Config(_) => None,
            GrowthError::Potential { partial, .. } | GrowthError::AllZero { partial, .. } => {
                Some(partial)
            }
        }
    }
}

#[derive(Debug, Error, Clone, PartialEq)]
#[error("profile has no positive entry")]
pub struct AllZeroProfile;

/// Attachment weight of a site with measure `w`.
#[inline]
pub fn attachment_weight(w: f64, eta: f64) -> f64 {
    if w <= 0.0 {
        0.0
    } else if eta == 0.0 {
        1.0
    } else if eta == 1.0 {
        w
    } else {
        w.powf(eta)
    }
}

/// Samples `y ∈ ∂A` with probability `ω(y)^η / Σ ω^η`; at `η = 0` the law
/// is uniform over sites with `ω > 0`.
pub fn dbm_step(
    profile: &HarmonicProfile,
    eta: f64,
    rng: &mut ChaCha8Rng,
) -> Result<Site, AllZeroProfile> {
    let total: f64 = profile.weights().map(|w| attachment_weight(w, eta)).sum();
    if !(total > 0.0) {
        return Err(AllZeroProfile);
    }
    let u = rng.gen::<f64>() * total;
    let mut acc = 0.0;
    let mut last = None;
    for &(s, w) in &profile.entries {
        let a = attachment_weight(w, eta);
        if a > 0.0 {
            acc += a;
            last = Some(s);
            if u < acc {
                return Ok(s);
            }
        }
    }
    last.ok_or(AllZeroProfile)
}

/// Process-wide memo of exact profiles keyed by the site set.
#[derive(Default, Clone)]
pub struct ProfileCache {
    inner: Arc<Mutex<FxHashMap<Vec<Site>, Arc<HarmonicProfile>>>>,
}

impl std::fmt::Debug for ProfileCache {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("ProfileCache").field("len", &self.len()).finish()
    }
}

impl ProfileCache {
    pub fn get_or_compute(
        &self,
        c: &Cluster,
        opts: &ExactOptions,
    ) -> Result<Arc<HarmonicProfile>, PotentialError> {
        let key = c.sites_sorted();
        if let Some(p) = self.inner.lock().unwrap().get(&key) {
            return Ok(p.clone());
        }
        let p = Arc::new(harmonic_measure_exact_with(c, opts)?);
        self.inner.lock().unwrap().insert(key, p.clone());
        Ok(p)
    }

    pub fn len(&self) -> usize {
        self.inner.lock().unwrap().len()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }
}

/// Walker index reserved for the chain's own draws.
const CHAIN_STREAM: u64 = 0xFFFF_FFFF;

/// State passed to observers after each step.
pub struct StepView<'a> {
    pub record: &'a StepRecord,
    pub cluster: &'a Cluster,
    pub is_checkpoint: bool,
}

/// Runs the chain for `cfg.n_particles` steps.
pub fn grow(cfg: &GrowthConfig) -> Result<GrowthTrace, GrowthError> {
    grow_observed(cfg, None, |_| {})
}

/// Like [`grow`], with an optional shared profile memo and an observer
/// called after every step.
pub fn grow_observed(
    cfg: &GrowthConfig,
    cache: Option<&ProfileCache>,
    mut observe: impl FnMut(&StepView),
) -> Result<GrowthTrace, GrowthError> {
    cfg.validate()?;
    let dim = cfg.dimension;
    let wcfg = cfg.walker_cfg();
    let opts = cfg.exact_opts();
    let mut cluster = Cluster::new(dim);
    let needs_field = cfg.measure_mode != MeasureMode::Exact
        || (cfg.capacity_checkpoint_every > 0 && dim == Dim::Two);
    let mut field = needs_field.then(|| WalkField::new(&cluster));
    let eden = cfg.eta == 0.0 && !cfg.strict_eden;
    let mut tracker = eden.then(|| ExteriorTracker::new(&cluster));
    let mut steps: Vec<StepRecord> = Vec::with_capacity(cfg.n_particles as usize);
    let mut stats = WalkStats::default();

    let partial = |steps: &Vec<StepRecord>, cluster: &Cluster, stats: WalkStats| {
        Box::new(GrowthTrace {
            config: cfg.clone(),
            steps: steps.clone(),
            final_cluster: cluster.clone(),
            walk_stats: stats,
        })
    };

    for n in 1..=cfg.n_particles {
        let checkpoint = cfg.capacity_checkpoint_every > 0 && n % cfg.capacity_checkpoint_every == 0;
        let omega_point = match cfg.omega_every {
            0 => checkpoint,
            k => n % k == 0,
        };
        let mut rng = walker_rng(cfg.seed, n, CHAIN_STREAM);
        let fail = |e: PotentialError, steps: &Vec<StepRecord>, cl: &Cluster, st: WalkStats| {
            GrowthError::Potential {
                step: n,
                source: e,
                partial: partial(steps, cl, st),
            }
        };

        // Measure of the current cluster, when the mode provides one.
        let measured: Option<Arc<HarmonicProfile>> = if eden || cfg.strict_eden {
            None
        } else {
            match cfg.measure_mode {
                MeasureMode::Exact => Some(match cache {
                    Some(cache) => cache
                        .get_or_compute(&cluster, &opts)
                        .map_err(|e| fail(e, &steps, &cluster, stats))?,
                    None => Arc::new(
                        harmonic_measure_exact_with(&cluster, &opts)
                            .map_err(|e| fail(e, &steps, &cluster, stats))?,
                    ),
                }),
                MeasureMode::MonteCarlo { samples_per_step } => {
                    let f = field.as_ref().unwrap();
                    let m = samples_per_step
                        .unwrap_or_else(|| (20 * cluster.boundary().len() as u64).max(10_000));
                    let (p, s) = f.estimate_profile(&cluster, m, &wcfg, n);
                    stats = stats.merge(s);
                    Some(Arc::new(p))
                }
                MeasureMode::DlaFast => None,
            }
        };

        // Auxiliary estimate for ω of the attached site.
        let aux: Option<HarmonicProfile> = if omega_point && measured.is_none() {
            Some(
                auxiliary_profile(cfg, &cluster, field.as_ref(), &wcfg, n, &mut stats)
                    .map_err(|e| fail(e, &steps, &cluster, stats))?,
            )
        } else {
            None
        };

        let y = if let Some(p) = &measured {
            dbm_step(p, cfg.eta, &mut rng).map_err(|_| GrowthError::AllZero {
                step: n,
                partial: partial(&steps, &cluster, stats),
            })?
        } else if let Some(t) = &tracker {
            let a = t.accessible();
            a.get(rng.gen_range(0..a.len()))
        } else if cfg.strict_eden {
            let b = cluster.boundary().as_slice();
            // Sorted order keeps the draw independent of insertion history.
            let mut b = b.to_vec();
            b.sort_unstable();
            b[rng.gen_range(0..b.len())]
        } else {
            let o = field.as_ref().unwrap().sample_hit(&wcfg, n, 0);
            stats = stats.merge(o.stats);
            o.site
        };

        let omega = measured
            .as_deref()
            .or(aux.as_ref())
            .map(|p| p.weight(y));
        let new_closure: Vec<Site> = neighbors(dim, y).filter(|s| !cluster.in_closure(*s)).collect();
        cluster.attach(y).expect("sampled site lies on the boundary");
        if let Some(f) = field.as_mut() {
            f.attach(&cluster, y);
        }
        if let Some(t) = tracker.as_mut() {
            t.attach(&cluster, y, &new_closure);
        }
        let cap = if checkpoint {
            checkpoint_capacity(cfg, &cluster, field.as_ref(), &wcfg, n, &mut stats)
                .map_err(|e| fail(e, &steps, &cluster, stats))?
        } else {
            None
        };
        steps.push(StepRecord {
            n,
            site: y.coords(dim),
            omega,
            r: cluster.radius(),
            cap,
        });
        observe(&StepView {
            record: steps.last().unwrap(),
            cluster: &cluster,
            is_checkpoint: checkpoint,
        });
    }
    Ok(GrowthTrace {
        config: cfg.clone(),
        steps,
        final_cluster: cluster,
        walk_stats: stats,
    })
}

fn within_cap(c: &Cluster, cap: usize) -> bool {
    c.len() + c.boundary().len() <= cap
}

fn auxiliary_profile(
    cfg: &GrowthConfig,
    c: &Cluster,
    field: Option<&WalkField>,
    wcfg: &WalkerConfig,
    n: u64,
    stats: &mut WalkStats,
) -> Result<HarmonicProfile, PotentialError> {
    if within_cap(c, cfg.exact_cap.min(2_000)) {
        return harmonic_measure_exact_with(c, &cfg.exact_opts());
    }
    let owned;
    let f = match field {
        Some(f) => f,
        None => {
            owned = WalkField::new(c);
            &owned
        }
    };
    let (p, s) = f.estimate_profile(c, cfg.checkpoint_samples, wcfg, stream::AUX | n);
    *stats = stats.merge(s);
    Ok(p)
}

fn checkpoint_capacity(
    cfg: &GrowthConfig,
    c: &Cluster,
    field: Option<&WalkField>,
    wcfg: &WalkerConfig,
    n: u64,
    stats: &mut WalkStats,
) -> Result<Option<f64>, PotentialError> {
    if within_cap(c, cfg.exact_cap) {
        return Ok(Some(capacity_with(c, &cfg.exact_opts())?.value));
    }
    if c.dim() == Dim::Three {
        return Ok(None);
    }
    let owned;
    let f = match field {
        Some(f) => f,
        None => {
            owned = WalkField::new(c);
            &owned
        }
    };
    let (p, s) = f.estimate_profile(c, cfg.checkpoint_samples, wcfg, stream::CAPACITY | n);
    *stats = stats.merge(s);
    Ok(Some(capacity_from_profile(&p)?))
}
