//! Statistics built from harmonic-measure profiles and growth traces:
//! statistical sums and the τ-spectrum, the Makarov entropy statistic, the
//! maximal-measure exponent, the integral Beurling ratio, capacity against
//! radius, growth-exponent fits and margins against the known radius
//! bounds. All logarithms are natural.

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::growth::{GrowthTrace, StepRecord};
use crate::lattice::{Cluster, Dim};
use crate::potential::{harmonic_measure_exact_with, ExactOptions, HarmonicProfile, PotentialError};
use crate::walkers::{stream, WalkField, WalkerConfig};

/// Calibrated limits used by the verification checks. Each was measured on
/// reference runs and then fixed; see the README for the runs.
pub mod thresholds {
    /// Allowed growth of a sup-ratio from the next-to-last to the last
    /// decade of `n`.
    pub const TREND_FACTOR: f64 = 1.2;
    /// Slack added to a bound's exponent when judging a fitted slope.
    pub const SLOPE_SLACK: f64 = 0.03;
    /// `max |Cap − (2/π) ln R|` over checkpoints of a planar DLA run.
    pub const CAPACITY_RADIUS_GAP: f64 = 1.0;
    /// Allowed increase of the capacity gap between the last two decades.
    pub const CAPACITY_TREND_SLACK: f64 = 0.1;
    /// Lower radius of the integral Beurling band.
    pub const BEURLING_BAND_START: f64 = 50.0;
    /// Smallest number of measured attachments for the Beurling ratio.
    pub const BEURLING_MIN_COUNT: usize = 100;
    /// Bound on `√m · (Π ω)^{1/m}` for `m ≥ BEURLING_MIN_COUNT`.
    pub const BEURLING_RATIO: f64 = 0.25;
    /// Bound on `|Σ ω ln ω + ln R| / ln ln R` for planar DLA.
    pub const MAKAROV_RATIO: f64 = 1.1;
    /// Bound on `max ω · R / (ln R)^{1/2}` for 3D DLA.
    pub const BEURLING_3D: f64 = 0.06;
    /// Smallest fraction of measured `ω` in a band before a check runs.
    pub const MIN_COVERAGE: f64 = 0.1;
}

#[derive(Debug, Error)]
pub enum AnalysisError {
    #[error("fit window must span at least a decade in n (got {start}..={end})")]
    DegenerateWindow { start: u64, end: u64 },
    #[error("no attachment falls in the requested band")]
    EmptyBand,
    #[error("the spectra do not contain alpha = {0}")]
    MissingAlpha(f64),
    #[error("no capacity was recorded at or after the start of the band")]
    NoCapacity,
    #[error(transparent)]
    Potential(#[from] PotentialError),
}

/// `Σ ω^α` over the profile. Zero entries contribute nothing for `α > 0` and
/// are skipped for `α ≤ 0`.
pub fn statistical_sum(p: &HarmonicProfile, alpha: f64) -> f64 {
    statistical_sum_counted(p, alpha).0
}

/// Like [`statistical_sum`], also returning how many zero entries were
/// skipped because `α ≤ 0`.
pub fn statistical_sum_counted(p: &HarmonicProfile, alpha: f64) -> (f64, usize) {
    let mut sum = 0.0;
    let mut zeros = 0;
    for w in p.weights() {
        if w > 0.0 {
            sum += if alpha == 1.0 { w } else { w.powf(alpha) };
        } else {
            zeros += 1;
        }
    }
    (sum, if alpha <= 0.0 { zeros } else { 0 })
}

/// `Σ ω ln ω + ln R`.
pub fn makarov_statistic(p: &HarmonicProfile, radius: f64) -> f64 {
    let entropy: f64 = p.weights().filter(|&w| w > 0.0).map(|w| w * w.ln()).sum();
    entropy + radius.ln()
}

/// `−ln(max ω) / ln R`.
pub fn max_measure_exponent(p: &HarmonicProfile, radius: f64) -> f64 {
    -p.max_weight().ln() / radius.ln()
}

/// Statistical sums of one profile at several exponents.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SpectrumReport {
    /// Step at which the profile was taken, if known.
    pub n: Option<u64>,
    pub radius: f64,
    pub alphas: Vec<f64>,
    pub sums: Vec<f64>,
    /// `−ln(sum) / ln R` per alpha.
    pub tau_hat: Vec<f64>,
    /// Zero-measure sites skipped in the sums with `α ≤ 0`.
    pub excluded_zeros: usize,
}

/// Exponents reported by default: they include `η` and `η + 2` for the
/// usual `η ∈ {0, 0.5, 1, 1.5}`.
pub const DEFAULT_ALPHAS: [f64; 8] = [0.0, 0.5, 1.0, 1.5, 2.0, 2.5, 3.0, 3.5];

pub fn spectrum(p: &HarmonicProfile, radius: f64, alphas: &[f64], n: Option<u64>) -> SpectrumReport {
    let mut sums = Vec::with_capacity(alphas.len());
    let mut excluded = 0;
    for &a in alphas {
        let (s, z) = statistical_sum_counted(p, a);
        sums.push(s);
        excluded = excluded.max(z);
    }
    let tau_hat = sums.iter().map(|s| -s.ln() / radius.ln()).collect();
    SpectrumReport {
        n,
        radius,
        alphas: alphas.to_vec(),
        sums,
        tau_hat,
        excluded_zeros: excluded,
    }
}

/// Produces profiles for clusters met after a run: exact when the closure
/// is small, otherwise a Monte Carlo estimate on the analysis stream.
#[derive(Debug, Clone)]
pub struct ProfileSampler {
    /// Closures up to this size are solved exactly.
    pub exact_limit: usize,
    /// Walkers per estimate; `None` means `max(10⁴, 20·|∂A|)`.
    pub samples: Option<u64>,
    /// Upper limit applied to the default walker count.
    pub max_samples: Option<u64>,
    pub walker: WalkerConfig,
}

impl ProfileSampler {
    pub fn new(seed: u64) -> ProfileSampler {
        ProfileSampler {
            exact_limit: 2_000,
            samples: None,
            max_samples: None,
            walker: WalkerConfig::with_seed(seed),
        }
    }

    /// The profile of `c`, using walker streams keyed by the step `n`.
    pub fn profile(&self, c: &Cluster, n: u64) -> Result<HarmonicProfile, AnalysisError> {
        if c.len() + c.boundary().len() <= self.exact_limit {
            let opts = ExactOptions {
                max_closure_sites: self.exact_limit,
            };
            return Ok(harmonic_measure_exact_with(c, &opts)?);
        }
        let m = self.samples.unwrap_or_else(|| {
            (20 * c.boundary().len() as u64)
                .max(10_000)
                .min(self.max_samples.unwrap_or(u64::MAX))
        });
        let field = WalkField::new(c);
        Ok(field.estimate_profile(c, m, &self.walker, stream::ANALYSIS | n).0)
    }
}

/// Radius of `A_{n−1}`, the cluster whose measure `ω` of record `n` refers to.
fn radius_before(steps: &[StepRecord], i: usize) -> f64 {
    if i == 0 {
        0.0
    } else {
        steps[i - 1].r
    }
}

/// Result of the integral Beurling check.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BeurlingReport {
    pub band: (f64, f64),
    /// Attachments in the band.
    pub in_band: usize,
    /// Attachments used (measured and positive).
    pub m: usize,
    /// In-band attachments without a recorded `ω`.
    pub missing: usize,
    /// In-band attachments whose estimated `ω` was zero; left out like
    /// missing ones, which can only raise the geometric mean.
    pub zero_estimates: usize,
    pub geometric_mean: f64,
    /// `√(mean ω²)`, which bounds the geometric mean from above.
    pub root_mean_square: f64,
    /// Geometric mean divided by `m^{−1/2}` (planar) or `(m·Cap)^{−1/2}`.
    pub margin: f64,
    /// `Cap(A_n)` used in the 3D form.
    pub capacity: Option<f64>,
    /// Margin after each of the first `m` entries, in time order.
    pub running: Vec<f64>,
    /// Whether the geometric mean never exceeded the root mean square.
    pub am_gm_holds: bool,
}

impl BeurlingReport {
    pub fn coverage(&self) -> f64 {
        if self.in_band == 0 {
            0.0
        } else {
            (self.m + self.zero_estimates) as f64 / self.in_band as f64
        }
    }

    /// Largest running margin over `m ≥ from`.
    pub fn sup_from(&self, from: usize) -> Option<f64> {
        self.running
            .iter()
            .skip(from.saturating_sub(1))
            .copied()
            .reduce(f64::max)
    }
}

/// Geometric mean of `ω` over attachments, scaled by `m^{1/2}`.
///
/// In the plane the attachments are those made while `R < R(A) < 100R`. In
/// three dimensions they are all attachments after the first capacity
/// checkpoint whose cluster radius exceeds `R`, and the margin also carries
/// the factor `Cap(A_n)^{1/2}`.
pub fn beurling_integral_check(trace: &GrowthTrace, r: f64) -> Result<BeurlingReport, AnalysisError> {
    let steps = &trace.steps;
    let dim = trace.config.dimension;
    let (selected, band, capacity): (Vec<usize>, (f64, f64), Option<f64>) = match dim {
        Dim::Two => {
            let idx = (0..steps.len())
                .filter(|&i| {
                    let rb = radius_before(steps, i);
                    rb > r && rb < 100.0 * r
                })
                .collect();
            (idx, (r, 100.0 * r), None)
        }
        Dim::Three => {
            let start = steps
                .iter()
                .position(|s| s.r > r && s.cap.is_some())
                .ok_or(AnalysisError::NoCapacity)?;
            let cap = steps[start].cap;
            // ω of record i refers to A_{i}, so A_n itself is record start + 1.
            ((start + 1..steps.len()).collect(), (r, f64::INFINITY), cap)
        }
    };
    if selected.is_empty() {
        return Err(AnalysisError::EmptyBand);
    }
    let mut missing = 0;
    let mut zeros = 0;
    let mut log_sum = 0.0;
    let mut sq_sum = 0.0;
    let mut m = 0usize;
    let mut running = Vec::new();
    let mut am_gm_holds = true;
    let cap_factor = capacity.map_or(1.0, f64::sqrt);
    for &i in &selected {
        match steps[i].omega {
            None => missing += 1,
            Some(w) if w <= 0.0 => zeros += 1,
            Some(w) => {
                m += 1;
                log_sum += w.ln();
                sq_sum += w * w;
                let gm = (log_sum / m as f64).exp();
                let rms = (sq_sum / m as f64).sqrt();
                if gm > rms * (1.0 + 1e-12) {
                    am_gm_holds = false;
                }
                running.push(gm * (m as f64).sqrt() * cap_factor);
            }
        }
    }
    let (gm, rms) = if m > 0 {
        ((log_sum / m as f64).exp(), (sq_sum / m as f64).sqrt())
    } else {
        (f64::NAN, f64::NAN)
    };
    Ok(BeurlingReport {
        band,
        in_band: selected.len(),
        m,
        missing,
        zero_estimates: zeros,
        geometric_mean: gm,
        root_mean_square: rms,
        margin: running.last().copied().unwrap_or(f64::NAN),
        capacity,
        running,
        am_gm_holds,
    })
}

/// Least-squares fit of `ln R` against `ln n`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExponentFit {
    pub slope: f64,
    pub intercept: f64,
    /// Standard error of the slope from the residuals.
    pub slope_stderr: f64,
    pub points: usize,
}

/// Points per decade used by [`growth_exponent`].
const FIT_POINTS_PER_DECADE: f64 = 50.0;

/// Slope of `ln R` against `ln n` over steps `start..=end`.
///
/// Steps are taken at log-spaced `n` so that every scale carries the same
/// weight in the fit rather than the last decade dominating.
pub fn growth_exponent(
    trace: &GrowthTrace,
    start: u64,
    end: u64,
) -> Result<ExponentFit, AnalysisError> {
    let end = end.min(trace.steps.len() as u64);
    if start == 0 || end < start.saturating_mul(10) {
        return Err(AnalysisError::DegenerateWindow { start, end });
    }
    let (ls, le) = ((start as f64).ln(), (end as f64).ln());
    let count = ((le - ls) / std::f64::consts::LN_10 * FIT_POINTS_PER_DECADE).ceil() as usize + 1;
    let mut ns: Vec<u64> = (0..count)
        .map(|k| (ls + (le - ls) * k as f64 / (count - 1) as f64).exp().round() as u64)
        .map(|n| n.clamp(start, end))
        .collect();
    ns.dedup();
    let pts: Vec<(f64, f64)> = ns
        .iter()
        .map(|&n| ((n as f64).ln(), trace.steps[n as usize - 1].r.ln()))
        .collect();
    Ok(least_squares(&pts))
}

fn least_squares(pts: &[(f64, f64)]) -> ExponentFit {
    let k = pts.len() as f64;
    let mx = pts.iter().map(|p| p.0).sum::<f64>() / k;
    let my = pts.iter().map(|p| p.1).sum::<f64>() / k;
    let sxx: f64 = pts.iter().map(|p| (p.0 - mx).powi(2)).sum();
    let sxy: f64 = pts.iter().map(|p| (p.0 - mx) * (p.1 - my)).sum();
    let slope = sxy / sxx;
    let intercept = my - slope * mx;
    let rss: f64 = pts
        .iter()
        .map(|p| (p.1 - intercept - slope * p.0).powi(2))
        .sum();
    let stderr = if pts.len() > 2 {
        (rss / (k - 2.0) / sxx).sqrt()
    } else {
        0.0
    };
    ExponentFit {
        slope,
        intercept,
        slope_stderr: stderr,
        points: pts.len(),
    }
}

/// Outcome of one named check.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum CheckStatus {
    Pass,
    Fail,
    NotApplicable,
    InsufficientData,
    /// Informational only, never fails.
    Report,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Check {
    pub name: String,
    /// The published result the check instantiates.
    pub anchor: String,
    /// Human-readable form of the bound.
    pub bound: String,
    pub value: Option<f64>,
    pub threshold: Option<f64>,
    /// `threshold − value` for upper bounds, positive when passing.
    pub margin: Option<f64>,
    pub status: CheckStatus,
    /// Supporting numbers.
    #[serde(default)]
    pub details: BTreeMap<String, f64>,
}

impl Check {
    fn new(name: &str, anchor: &str, bound: String) -> Check {
        Check {
            name: name.to_string(),
            anchor: anchor.to_string(),
            bound,
            value: None,
            threshold: None,
            margin: None,
            status: CheckStatus::Report,
            details: BTreeMap::new(),
        }
    }

    /// Sets `value` against an upper `threshold` and the resulting status.
    fn upper(mut self, value: f64, threshold: f64) -> Check {
        self.value = Some(value);
        self.threshold = Some(threshold);
        self.margin = Some(threshold - value);
        self.status = if value <= threshold {
            CheckStatus::Pass
        } else {
            CheckStatus::Fail
        };
        self
    }

    fn status(mut self, s: CheckStatus) -> Check {
        self.status = s;
        self
    }

    fn detail(mut self, k: &str, v: f64) -> Check {
        self.details.insert(k.to_string(), v);
        self
    }
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct VerificationReport {
    pub checks: Vec<Check>,
}

impl VerificationReport {
    pub fn passed(&self) -> bool {
        self.checks.iter().all(|c| c.status != CheckStatus::Fail)
    }

    pub fn extend(&mut self, other: VerificationReport) {
        self.checks.extend(other.checks);
    }

    pub fn get(&self, name: &str) -> Option<&Check> {
        self.checks.iter().find(|c| c.name == name)
    }

    /// Fixed-width table for terminals.
    pub fn table(&self) -> String {
        let fmt = |v: Option<f64>| v.map_or_else(|| "-".to_string(), |v| format!("{v:.4}"));
        let mut out = format!(
            "{:<28} {:<18} {:>10} {:>10} {:>10}  {}\n",
            "check", "status", "value", "threshold", "margin", "bound"
        );
        for c in &self.checks {
            let status = serde_json::to_value(c.status)
                .ok()
                .and_then(|v| v.as_str().map(str::to_string))
                .unwrap_or_default();
            out.push_str(&format!(
                "{:<28} {:<18} {:>10} {:>10} {:>10}  {}\n",
                c.name,
                status,
                fmt(c.value),
                fmt(c.threshold),
                fmt(c.margin),
                c.bound
            ));
        }
        out
    }
}

/// A radius bound of the form `C n^p (ln n)^q`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BoundForm {
    pub power: f64,
    pub log_power: f64,
}

impl BoundForm {
    pub fn eval(&self, n: f64) -> f64 {
        n.powf(self.power) * n.ln().powf(self.log_power)
    }

    fn describe(&self) -> String {
        if self.log_power == 0.0 {
            format!("R <= C n^{:.4}", self.power)
        } else {
            format!("R <= C n^{:.4} (ln n)^{:.4}", self.power, self.log_power)
        }
    }
}

/// Sup of `R(A_n) / f(n)` over the whole run and over the last two decades.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SupTrend {
    pub sup: f64,
    /// Sup over `n ∈ (N/100, N/10]`.
    pub mid_sup: f64,
    /// Sup over `n ∈ (N/10, N]`.
    pub last_sup: f64,
}

impl SupTrend {
    pub fn ratio(&self) -> f64 {
        self.last_sup / self.mid_sup
    }

    pub fn non_trending(&self) -> bool {
        self.last_sup <= thresholds::TREND_FACTOR * self.mid_sup
    }
}

/// Smallest `n` entering sup-ratios; below it the log factors are not
/// meaningful.
const SUP_FLOOR: u64 = 10;

/// Sup-ratio of the radius against `form`; `None` when the run is shorter
/// than two decades above the floor.
pub fn sup_trend(steps: &[StepRecord], form: &BoundForm) -> Option<SupTrend> {
    let total = steps.len() as u64;
    if total < 100 * SUP_FLOOR {
        return None;
    }
    let (mid_lo, last_lo) = (total / 100, total / 10);
    let mut t = SupTrend {
        sup: 0.0,
        mid_sup: 0.0,
        last_sup: 0.0,
    };
    for s in steps.iter().filter(|s| s.n >= SUP_FLOOR) {
        let v = s.r / form.eval(s.n as f64);
        t.sup = t.sup.max(v);
        if s.n > last_lo {
            t.last_sup = t.last_sup.max(v);
        } else if s.n > mid_lo {
            t.mid_sup = t.mid_sup.max(v);
        }
    }
    Some(t)
}

/// The radius bounds that apply to a run, with their names and anchors.
pub fn applicable_bounds(dim: Dim, eta: f64, alpha: f64) -> Vec<(&'static str, &'static str, BoundForm)> {
    let mut out = Vec::new();
    match dim {
        Dim::Two => {
            if eta == 1.0 {
                out.push((
                    "kesten_bound",
                    "Kesten: DLA radius grows at most like n^{2/3} in the plane",
                    BoundForm { power: 2.0 / 3.0, log_power: 0.0 },
                ));
            }
            if (0.0..2.0).contains(&eta) {
                out.push((
                    "dbm_planar_bound",
                    "DBM-eta in the plane: R < C n^{2/(4-eta)} (ln n)^{alpha|eta-1|/(4-eta)}",
                    BoundForm {
                        power: 2.0 / (4.0 - eta),
                        log_power: alpha * (eta - 1.0).abs() / (4.0 - eta),
                    },
                ));
            }
        }
        Dim::Three => {
            if eta == 1.0 {
                out.push((
                    "kesten_bound",
                    "Kesten: DLA radius grows at most like n^{2/d}",
                    BoundForm { power: 2.0 / 3.0, log_power: 0.0 },
                ));
                out.push((
                    "lawler_bound",
                    "Lawler: 3D DLA radius at most n^{1/2} (ln n)^{1/4}",
                    BoundForm { power: 0.5, log_power: 0.25 },
                ));
            }
            let form = if eta >= 1.0 {
                BoundForm {
                    power: eta / (1.0 + eta),
                    log_power: eta / (2.0 * (eta + 1.0)),
                }
            } else {
                BoundForm { power: 0.5, log_power: 0.25 }
            };
            out.push((
                "dbm_spatial_bound",
                "DBM-eta in 3D: R < C n^{eta/(1+eta)} (ln n)^{eta/(2(eta+1))}, or n^{1/2} (ln n)^{1/4} for eta < 1",
                form,
            ));
        }
    }
    out
}

/// Sup-ratios of the radius against every applicable bound, each judged by
/// the non-trending rule. The exponent of the Makarov log factor in the
/// planar DBM bound is unknown; the check uses 1 and reports 0.5 and 2.
pub fn theorem_margin(trace: &GrowthTrace) -> VerificationReport {
    let cfg = &trace.config;
    let mut report = VerificationReport::default();
    if cfg.dimension == Dim::Two && cfg.eta >= 2.0 {
        report.checks.push(
            Check::new(
                "dbm_planar_bound",
                "DBM-eta planar bound (stated for 0 <= eta < 2)",
                "not applicable for eta >= 2".into(),
            )
            .status(CheckStatus::NotApplicable),
        );
        return report;
    }
    for (name, anchor, form) in applicable_bounds(cfg.dimension, cfg.eta, 1.0) {
        let mut check = Check::new(name, anchor, form.describe() + ", sup non-trending");
        match sup_trend(&trace.steps, &form) {
            None => check = check.status(CheckStatus::InsufficientData),
            Some(t) => {
                check = check
                    .upper(t.ratio(), thresholds::TREND_FACTOR)
                    .detail("sup", t.sup)
                    .detail("mid_decade_sup", t.mid_sup)
                    .detail("last_decade_sup", t.last_sup);
                if name == "dbm_planar_bound" {
                    for a in [0.5, 2.0] {
                        let f = applicable_bounds(cfg.dimension, cfg.eta, a)
                            .into_iter()
                            .find(|b| b.0 == name)
                            .unwrap()
                            .2;
                        if let Some(ta) = sup_trend(&trace.steps, &f) {
                            check = check
                                .detail(&format!("trend_ratio_alpha_{a}"), ta.ratio())
                                .detail(&format!("sup_alpha_{a}"), ta.sup);
                        }
                    }
                }
            }
        }
        report.checks.push(check);
    }
    report
}

/// Slope of `ln R` against `ln n` over the last decade, held against the
/// smallest applicable bound exponent plus [`thresholds::SLOPE_SLACK`].
pub fn slope_check(trace: &GrowthTrace) -> Check {
    let cfg = &trace.config;
    let bounds = applicable_bounds(cfg.dimension, cfg.eta, 1.0);
    let best = bounds
        .iter()
        .map(|b| b.2.power)
        .fold(f64::INFINITY, f64::min);
    let n = trace.steps.len() as u64;
    let mut check = Check::new(
        "growth_exponent",
        "growth exponent: lim ln R(A_n) / ln n",
        if best.is_finite() {
            format!("last-decade slope <= {best:.4} + {}", thresholds::SLOPE_SLACK)
        } else {
            "no bound applies".into()
        },
    );
    match growth_exponent(trace, (n / 10).max(1), n) {
        Err(_) => check.status(CheckStatus::InsufficientData),
        Ok(fit) => {
            check = check.detail("slope_stderr", fit.slope_stderr);
            if best.is_finite() {
                check.upper(fit.slope, best + thresholds::SLOPE_SLACK)
            } else {
                check.value = Some(fit.slope);
                check
            }
        }
    }
}

/// Capacity against `(2/π) ln R` at the recorded checkpoints.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CapacityRadiusReport {
    /// `(n, R, Cap − (2/π) ln R)` per checkpoint with `R ≥ 1`.
    pub points: Vec<(u64, f64, f64)>,
    pub max_gap: f64,
    /// Largest `|gap|` over `n ∈ (N/100, N/10]` and over `(N/10, N]`.
    pub mid_gap: Option<f64>,
    pub last_gap: Option<f64>,
}

pub fn capacity_radius(trace: &GrowthTrace) -> CapacityRadiusReport {
    let total = trace.steps.len() as u64;
    let points: Vec<(u64, f64, f64)> = trace
        .steps
        .iter()
        .filter(|s| s.r >= 1.0)
        .filter_map(|s| {
            s.cap
                .map(|c| (s.n, s.r, c - 2.0 / std::f64::consts::PI * s.r.ln()))
        })
        .collect();
    let max_abs = |lo: u64, hi: u64| {
        points
            .iter()
            .filter(|p| p.0 > lo && p.0 <= hi)
            .map(|p| p.2.abs())
            .reduce(f64::max)
    };
    CapacityRadiusReport {
        max_gap: points.iter().map(|p| p.2.abs()).fold(0.0, f64::max),
        mid_gap: max_abs(total / 100, total / 10),
        last_gap: max_abs(total / 10, total),
        points,
    }
}

/// `τ̂(η)` and `τ̂(η + 2)` across scales, the dimension estimate
/// `τ̂(η + 2) − τ̂(η)` next to `1/β̂`, and the margins of the two spectrum
/// inequalities. This is a report; none of it is asserted.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DimensionReport {
    pub eta: f64,
    /// Scales entering the averages (`R ≥ 30`).
    pub scales: Vec<f64>,
    pub tau_eta: Vec<f64>,
    pub tau_eta_plus_two: Vec<f64>,
    pub mean_tau_eta: f64,
    pub mean_tau_eta_plus_two: f64,
    pub dimension_estimate: f64,
    pub inverse_growth_exponent: Option<f64>,
    /// `τ̂(η + 2) − (η + 2)/2`; the Beurling side predicts `≥ 0`.
    pub lower_bound_margin: f64,
    /// `(η − 1) − τ̂(η)`; the Makarov side predicts `≥ 0`.
    pub upper_bound_margin: f64,
    /// Set when the scales span less than a decade of `R`.
    pub low_confidence: bool,
}

/// Smallest radius whose spectrum enters the averages.
pub const SPECTRUM_MIN_RADIUS: f64 = 30.0;

pub fn dimension_identity_report(
    spectra: &[SpectrumReport],
    eta: f64,
    growth_exponent: Option<f64>,
) -> Result<DimensionReport, AnalysisError> {
    let pick = |s: &SpectrumReport, a: f64| -> Result<f64, AnalysisError> {
        s.alphas
            .iter()
            .position(|&x| (x - a).abs() < 1e-12)
            .map(|i| s.tau_hat[i])
            .ok_or(AnalysisError::MissingAlpha(a))
    };
    let used: Vec<&SpectrumReport> = spectra
        .iter()
        .filter(|s| s.radius >= SPECTRUM_MIN_RADIUS)
        .collect();
    let mut scales = Vec::new();
    let mut t0 = Vec::new();
    let mut t2 = Vec::new();
    for s in &used {
        scales.push(s.radius);
        t0.push(pick(s, eta)?);
        t2.push(pick(s, eta + 2.0)?);
    }
    let mean = |v: &[f64]| {
        if v.is_empty() {
            f64::NAN
        } else {
            v.iter().sum::<f64>() / v.len() as f64
        }
    };
    let (m0, m2) = (mean(&t0), mean(&t2));
    let span = scales.iter().copied().fold(f64::NAN, f64::max)
        / scales.iter().copied().fold(f64::NAN, f64::min);
    Ok(DimensionReport {
        eta,
        low_confidence: !(span >= 10.0),
        scales,
        tau_eta: t0,
        tau_eta_plus_two: t2,
        mean_tau_eta: m0,
        mean_tau_eta_plus_two: m2,
        dimension_estimate: m2 - m0,
        inverse_growth_exponent: growth_exponent.map(|b| 1.0 / b),
        lower_bound_margin: m2 - (eta + 2.0) / 2.0,
        upper_bound_margin: (eta - 1.0) - m0,
    })
}

/// Profiles and spectra at chosen steps, recomputed by replaying a trace.
pub fn replay_spectra(
    trace: &GrowthTrace,
    at: &[u64],
    sampler: &ProfileSampler,
    alphas: &[f64],
) -> Result<Vec<(SpectrumReport, f64, f64)>, AnalysisError> {
    let mut wanted: Vec<u64> = at.to_vec();
    wanted.sort_unstable();
    wanted.dedup();
    let dim = trace.config.dimension;
    let mut c = Cluster::new(dim);
    let mut out = Vec::new();
    let mut next = wanted.iter().peekable();
    for s in &trace.steps {
        let Some(&&target) = next.peek() else { break };
        let site = crate::lattice::Site::from_coords(&s.site).expect("valid trace");
        c.attach(site).map_err(|_| AnalysisError::EmptyBand)?;
        if s.n == target {
            next.next();
            let p = sampler.profile(&c, s.n)?;
            let r = c.radius();
            out.push((
                spectrum(&p, r, alphas, Some(s.n)),
                makarov_statistic(&p, r),
                p.max_weight(),
            ));
        }
    }
    Ok(out)
}

/// Roughly `per_decade` log-spaced steps in `1..=n`, always including `n`.
pub fn log_spaced_steps(n: u64, first: u64, per_decade: usize) -> Vec<u64> {
    if n == 0 || first > n {
        return Vec::new();
    }
    let first = first.max(1);
    let (a, b) = ((first as f64).ln(), (n as f64).ln());
    let k = (((b - a) / std::f64::consts::LN_10) * per_decade as f64).ceil() as usize;
    let mut v: Vec<u64> = (0..=k)
        .map(|i| {
            if k == 0 {
                n
            } else {
                (a + (b - a) * i as f64 / k as f64).exp().round() as u64
            }
        })
        .collect();
    v.push(n);
    v.sort_unstable();
    v.dedup();
    v
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::growth::{GrowthConfig, MeasureMode};
    use crate::lattice::Site;
    use crate::potential::{harmonic_measure_exact, ProfileSource};
    use proptest::prelude::*;

    fn synthetic(weights: &[f64]) -> HarmonicProfile {
        let c = Cluster::new(Dim::Two);
        let entries = weights
            .iter()
            .enumerate()
            .map(|(i, &w)| (Site::new2(i as i32 + 5, 0), w))
            .collect();
        HarmonicProfile::new(&c, entries, ProfileSource::Exact)
    }

    /// A trace with prescribed radii; sites are placeholders.
    pub(crate) fn trace_with_radii(dim: Dim, eta: f64, radii: impl Fn(u64) -> f64, n: u64) -> GrowthTrace {
        let cfg = GrowthConfig::new(dim, eta, n, MeasureMode::DlaFast, 0);
        let steps = (1..=n)
            .map(|k| StepRecord {
                n: k,
                site: vec![0; dim.value()],
                omega: None,
                r: radii(k),
                cap: None,
            })
            .collect();
        GrowthTrace {
            config: cfg,
            steps,
            final_cluster: Cluster::new(dim),
            walk_stats: Default::default(),
        }
    }

    #[test]
    fn sums_of_the_point_profile() {
        let p = harmonic_measure_exact(&Cluster::new(Dim::Two)).unwrap();
        assert!((statistical_sum(&p, 1.0) - 1.0).abs() < 1e-9);
        assert_eq!(statistical_sum(&p, 0.0), 4.0);
        assert!((statistical_sum(&p, 2.0) - 0.25).abs() < 1e-12);
        assert!((makarov_statistic(&p, 1.0) + 4f64.ln()).abs() < 1e-12);
    }

    #[test]
    fn zeros_are_skipped_and_counted() {
        let p = synthetic(&[0.5, 0.0, 0.5, 0.0]);
        assert_eq!(statistical_sum_counted(&p, 0.0), (2.0, 2));
        assert_eq!(statistical_sum_counted(&p, -1.0), (4.0, 2));
        assert_eq!(statistical_sum_counted(&p, 2.0), (0.5, 0));
        let s = spectrum(&p, 10.0, &[0.0, 1.0], None);
        assert_eq!(s.excluded_zeros, 2);
        assert!(s.tau_hat[1].abs() < 1e-15);
    }

    #[test]
    fn uniform_profile_has_zero_makarov_statistic() {
        for m in [1usize, 2, 7, 100] {
            let p = synthetic(&vec![1.0 / m as f64; m]);
            let v = makarov_statistic(&p, m as f64);
            assert!(v.abs() < 1e-12, "{v}");
        }
    }

    #[test]
    fn max_exponent_of_uniform_profile() {
        let p = synthetic(&[0.25; 4]);
        assert!((max_measure_exponent(&p, 4.0) - 1.0).abs() < 1e-12);
        assert!((max_measure_exponent(&p, 16.0) - 0.5).abs() < 1e-12);
    }

    proptest! {
        #[test]
        fn sums_decrease_in_alpha(raw in prop::collection::vec(0.01f64..1.0, 2..30), a in -2.0f64..4.0, da in 0.01f64..2.0) {
            let t: f64 = raw.iter().sum();
            let p = synthetic(&raw.iter().map(|w| w / t).collect::<Vec<_>>());
            prop_assert!(statistical_sum(&p, a + da) < statistical_sum(&p, a));
            prop_assert!((statistical_sum(&p, 1.0) - 1.0).abs() < 1e-9);
        }

        #[test]
        fn geometric_mean_below_root_mean_square(ws in prop::collection::vec(prop::option::of(0.0f64..1.0), 1..60)) {
            let mut t = trace_with_radii(Dim::Two, 1.0, |k| 60.0 + k as f64, ws.len() as u64);
            for (s, w) in t.steps.iter_mut().zip(&ws) {
                s.omega = *w;
            }
            if let Ok(b) = beurling_integral_check(&t, 50.0) {
                prop_assert!(b.am_gm_holds);
                prop_assert_eq!(b.m + b.missing + b.zero_estimates, b.in_band);
                if b.m > 0 {
                    prop_assert!(b.geometric_mean <= b.root_mean_square * (1.0 + 1e-12));
                }
            }
        }
    }

    #[test]
    fn single_attachment_margin() {
        let mut t = trace_with_radii(Dim::Two, 1.0, |k| 60.0 + k as f64, 1);
        t.steps[0].omega = Some(0.3);
        // Record 1 refers to A_0 of radius 0, outside the band.
        assert!(matches!(beurling_integral_check(&t, 50.0), Err(AnalysisError::EmptyBand)));
        let mut t = trace_with_radii(Dim::Two, 1.0, |k| 60.0 + k as f64, 2);
        t.steps[1].omega = Some(0.3);
        let b = beurling_integral_check(&t, 50.0).unwrap();
        assert_eq!(b.m, 1);
        assert!((b.geometric_mean - 0.3).abs() < 1e-15);
        assert!((b.margin - 0.3).abs() < 1e-15);
    }

    #[test]
    fn band_excludes_far_radii_and_counts_missing() {
        let mut t = trace_with_radii(Dim::Two, 1.0, |k| k as f64, 200);
        for s in t.steps.iter_mut() {
            s.omega = if s.n % 2 == 0 { Some(0.01) } else { None };
        }
        t.steps[100].omega = Some(0.0);
        let b = beurling_integral_check(&t, 10.0).unwrap();
        // A_{n−1} has radius n − 1, in (10, 1000) for n = 12..=200.
        assert_eq!(b.in_band, 189);
        assert_eq!(b.zero_estimates, 1);
        assert_eq!(b.m + b.missing + 1, 189);
        assert!((b.geometric_mean - 0.01).abs() < 1e-15);
    }

    #[test]
    fn needle_and_ball_slopes() {
        let needle = trace_with_radii(Dim::Two, 1.0, |k| k as f64 / 2.0, 10_000);
        let f = growth_exponent(&needle, 100, 10_000).unwrap();
        assert!((f.slope - 1.0).abs() < 1e-12);
        let ball = trace_with_radii(Dim::Two, 0.0, |k| ((k as f64) / std::f64::consts::PI).sqrt().ceil(), 10_000);
        let f = growth_exponent(&ball, 100, 10_000).unwrap();
        assert!((f.slope - 0.5).abs() < 3.0 * f.slope_stderr + 0.01, "{f:?}");
        assert!(matches!(
            growth_exponent(&ball, 100, 900),
            Err(AnalysisError::DegenerateWindow { .. })
        ));
    }

    #[test]
    fn needle_fails_the_kesten_margin() {
        let needle = trace_with_radii(Dim::Two, 1.0, |k| k as f64 / 2.0, 20_000);
        let r = theorem_margin(&needle);
        let k = r.get("kesten_bound").unwrap();
        assert_eq!(k.status, CheckStatus::Fail);
        // last/mid sup ratio is 10^{1/3}.
        assert!((k.value.unwrap() - 10f64.powf(1.0 / 3.0)).abs() < 1e-2);
        assert!(!r.passed());
        assert_eq!(slope_check(&needle).status, CheckStatus::Fail);
    }

    #[test]
    fn compact_growth_passes_the_margin() {
        let ball = trace_with_radii(Dim::Two, 1.0, |k| (k as f64).sqrt(), 20_000);
        let r = theorem_margin(&ball);
        assert!(r.passed(), "{}", r.table());
        assert_eq!(r.checks.len(), 2);
        let eden = trace_with_radii(Dim::Two, 0.0, |k| (k as f64).sqrt(), 20_000);
        let d = theorem_margin(&eden);
        let c = d.get("dbm_planar_bound").unwrap();
        assert!(c.details.contains_key("trend_ratio_alpha_2"));
    }

    #[test]
    fn strong_eta_is_not_applicable_in_the_plane() {
        let t = trace_with_radii(Dim::Two, 2.5, |k| k as f64, 2000);
        let r = theorem_margin(&t);
        assert_eq!(r.checks.len(), 1);
        assert_eq!(r.checks[0].status, CheckStatus::NotApplicable);
        assert!(r.passed());
        let t3 = trace_with_radii(Dim::Three, 1.0, |k| (k as f64).sqrt(), 2000);
        assert_eq!(theorem_margin(&t3).checks.len(), 3);
    }

    #[test]
    fn short_runs_have_insufficient_data() {
        let t = trace_with_radii(Dim::Two, 1.0, |k| k as f64, 500);
        let r = theorem_margin(&t);
        assert!(r.checks.iter().all(|c| c.status == CheckStatus::InsufficientData));
    }

    #[test]
    fn spectral_identity_bookkeeping() {
        let p = synthetic(&[0.25; 4]);
        let s: Vec<SpectrumReport> = [40.0, 100.0, 500.0]
            .iter()
            .map(|&r| spectrum(&p, r, &DEFAULT_ALPHAS, None))
            .collect();
        let d = dimension_identity_report(&s, 1.0, Some(0.6)).unwrap();
        assert!(d.mean_tau_eta.abs() < 1e-12);
        assert!(!d.low_confidence);
        assert!((d.inverse_growth_exponent.unwrap() - 1.0 / 0.6).abs() < 1e-12);
        let low = dimension_identity_report(&s[..2], 1.0, None).unwrap();
        assert!(low.low_confidence);
        assert!(matches!(
            dimension_identity_report(&s, 1.7, None),
            Err(AnalysisError::MissingAlpha(_))
        ));
    }

    #[test]
    fn log_spacing() {
        let v = log_spaced_steps(1000, 10, 4);
        assert_eq!(v.first(), Some(&10));
        assert_eq!(v.last(), Some(&1000));
        assert!(v.windows(2).all(|w| w[0] < w[1]));
        assert_eq!(log_spaced_steps(5, 10, 4), Vec::<u64>::new());
    }

    #[test]
    fn replayed_spectra_match_direct_profiles() {
        let cfg = GrowthConfig::new(Dim::Two, 1.0, 30, MeasureMode::Exact, 4);
        let t = crate::growth::grow(&cfg).unwrap();
        let sampler = ProfileSampler::new(4);
        let out = replay_spectra(&t, &[10, 30], &sampler, &[1.0, 2.0]).unwrap();
        assert_eq!(out.len(), 2);
        let p = harmonic_measure_exact(&t.final_cluster).unwrap();
        assert!((out[1].0.sums[1] - statistical_sum(&p, 2.0)).abs() < 1e-12);
        assert!((out[1].1 - makarov_statistic(&p, t.final_cluster.radius())).abs() < 1e-12);
    }
}
