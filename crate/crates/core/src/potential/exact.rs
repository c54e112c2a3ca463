//! Exact exterior potential theory for finite sets via the free-space kernel.
//!
//! For a finite set `S` with sites `s_1..s_m` let `K_ij = a(s_i − s_j)` in
//! two dimensions and `K_ij = G0(s_i − s_j)` in three. Then
//!
//! * 2D: `[K 1; 1ᵀ 0] [μ; −λ] = [0; 1]` gives the harmonic measure `μ` of
//!   `S` from infinity and its capacity `λ`;
//! * 3D: `K e = 1` gives the escape probabilities `e`, with capacity `Σ e`
//!   and harmonic measure `e / Σ e`;
//! * the same factorization with right-hand side `[a(x − s_j); 1]` (2D) or
//!   `G0(x − s_j)` (3D) gives the hitting distribution of `S` from `x`, and
//!   with it the Green's function of `Z^d \ S`.
//!
//! A walk from infinity first enters `Ā` at a boundary site adjacent to the
//! unbounded component of the complement, so harmonic measure and capacity
//! of `Ā` are computed on that accessible part of `∂A` alone.

use faer::prelude::*;
use faer::Mat;

use super::kernel::{prefetch_lattice_green, GreenView3, KernelView2};
use super::profile::{HarmonicProfile, ProfileSource};
use super::PotentialError;
use crate::lattice::{accessible_boundary, Cluster, Dim, Site};

/// Residual above which a dense solve is reported as failed.
const SOLVE_TOLERANCE: f64 = 1e-8;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ExactOptions {
    /// Largest closure `|Ā|` accepted by the exact solver.
    pub max_closure_sites: usize,
}

impl Default for ExactOptions {
    fn default() -> Self {
        ExactOptions {
            max_closure_sites: 10_000,
        }
    }
}

/// A factorized kernel system for one finite set.
pub struct SetSolver {
    dim: Dim,
    sites: Vec<Site>,
    lu: faer::solvers::PartialPivLu<f64>,
    matrix: Mat<f64>,
}

fn kernel_extent(sites: &[Site], extra: &[Site]) -> usize {
    let m = sites
        .iter()
        .chain(extra)
        .map(|s| s.norm_inf())
        .max()
        .unwrap_or(0) as usize;
    2 * m + 2
}

impl SetSolver {
    /// Factorizes the kernel system of `sites` (any finite nonempty set).
    pub fn new(dim: Dim, sites: &[Site]) -> Result<SetSolver, PotentialError> {
        if sites.is_empty() {
            return Err(PotentialError::EmptySet);
        }
        let mut sites = sites.to_vec();
        sites.sort_unstable();
        sites.dedup();
        let m = sites.len();
        let matrix = match dim {
            Dim::Two => {
                let a = KernelView2::with_extent(kernel_extent(&sites, &[]));
                Mat::from_fn(m + 1, m + 1, |i, j| match (i < m, j < m) {
                    (true, true) => {
                        let d = sites[i].sub(sites[j]);
                        a.get(d.0[0], d.0[1])
                    }
                    (false, false) => 0.0,
                    _ => 1.0,
                })
            }
            Dim::Three => {
                prefetch_differences(&sites, &sites);
                let g = GreenView3::new();
                Mat::from_fn(m, m, |i, j| g.get(diff3(sites[i], sites[j])))
            }
        };
        let lu = matrix.partial_piv_lu();
        Ok(SetSolver {
            dim,
            sites,
            lu,
            matrix,
        })
    }

    pub fn sites(&self) -> &[Site] {
        &self.sites
    }

    fn solve_checked(&self, rhs: &Mat<f64>) -> Result<Mat<f64>, PotentialError> {
        let x = self.lu.solve(rhs);
        let r = &self.matrix * &x - rhs;
        let scale = 1.0 + x.norm_max();
        let residual = r.norm_max() / scale;
        if !residual.is_finite() || residual > SOLVE_TOLERANCE {
            return Err(PotentialError::Solver { residual });
        }
        Ok(x)
    }

    /// Harmonic measure from infinity and capacity of the set.
    pub fn equilibrium(&self) -> Result<(Vec<f64>, f64), PotentialError> {
        let m = self.sites.len();
        match self.dim {
            Dim::Two => {
                let rhs = Mat::from_fn(m + 1, 1, |i, _| if i == m { 1.0 } else { 0.0 });
                let x = self.solve_checked(&rhs)?;
                let mu = (0..m).map(|i| x.read(i, 0)).collect();
                Ok((mu, -x.read(m, 0)))
            }
            Dim::Three => {
                let rhs = Mat::from_fn(m, 1, |_, _| 1.0);
                let x = self.solve_checked(&rhs)?;
                let es: Vec<f64> = (0..m).map(|i| x.read(i, 0)).collect();
                let cap: f64 = es.iter().sum();
                Ok((es.iter().map(|e| e / cap).collect(), cap))
            }
        }
    }

    /// Escape probabilities `P^s(walk never returns to the set)` (3D only).
    pub fn escape_probabilities(&self) -> Result<Vec<f64>, PotentialError> {
        if self.dim != Dim::Three {
            return Err(PotentialError::UnsupportedDimension {
                expected: 3,
                got: 2,
            });
        }
        let m = self.sites.len();
        let x = self.solve_checked(&Mat::from_fn(m, 1, |_, _| 1.0))?;
        Ok((0..m).map(|i| x.read(i, 0)).collect())
    }

    /// Hitting distribution of the set from `x`, plus the 2D constant
    /// `g_S(x) = lim_{y→∞} G(x, y, S)` (zero in 3D).
    pub fn hitting(&self, x: Site) -> Result<(Vec<f64>, f64), PotentialError> {
        let m = self.sites.len();
        if let Ok(i) = self.sites.binary_search(&x) {
            let mut h = vec![0.0; m];
            h[i] = 1.0;
            return Ok((h, 0.0));
        }
        match self.dim {
            Dim::Two => {
                let a = KernelView2::with_extent(kernel_extent(&self.sites, &[x]));
                let rhs = Mat::from_fn(m + 1, 1, |i, _| {
                    if i == m {
                        1.0
                    } else {
                        let d = x.sub(self.sites[i]);
                        a.get(d.0[0], d.0[1])
                    }
                });
                drop(a);
                let v = self.solve_checked(&rhs)?;
                Ok(((0..m).map(|i| v.read(i, 0)).collect(), v.read(m, 0)))
            }
            Dim::Three => {
                prefetch_differences(&[x], &self.sites);
                let g = GreenView3::new();
                let rhs = Mat::from_fn(m, 1, |i, _| g.get(diff3(x, self.sites[i])));
                drop(g);
                let v = self.solve_checked(&rhs)?;
                Ok(((0..m).map(|i| v.read(i, 0)).collect(), 0.0))
            }
        }
    }

    /// `G(x, y, S)`: expected visits to `y` before hitting `S`, from `x`.
    pub fn green(&self, x: Site, y: Site) -> Result<f64, PotentialError> {
        if self.sites.binary_search(&x).is_ok() || self.sites.binary_search(&y).is_ok() {
            return Ok(0.0);
        }
        let (h, g_inf) = self.hitting(x)?;
        match self.dim {
            Dim::Two => {
                let a = KernelView2::with_extent(kernel_extent(&self.sites, &[x, y]));
                let k = |d: Site| a.get(d.0[0], d.0[1]);
                let through: f64 = self
                    .sites
                    .iter()
                    .zip(&h)
                    .map(|(&z, &w)| w * k(z.sub(y)))
                    .sum();
                Ok(through - k(x.sub(y)) + g_inf)
            }
            Dim::Three => {
                prefetch_differences(&[y], &self.sites);
                prefetch_differences(&[x], &[y]);
                let g = GreenView3::new();
                let through: f64 = self
                    .sites
                    .iter()
                    .zip(&h)
                    .map(|(&z, &w)| w * g.get(diff3(z, y)))
                    .sum();
                Ok(g.get(diff3(x, y)) - through)
            }
        }
    }
}

fn diff3(a: Site, b: Site) -> [i64; 3] {
    let d = a.sub(b);
    [d.0[0] as i64, d.0[1] as i64, d.0[2] as i64]
}

fn prefetch_differences(a: &[Site], b: &[Site]) {
    prefetch_lattice_green(a.iter().flat_map(|&x| b.iter().map(move |&y| diff3(x, y))));
}

fn accessible_sorted(c: &Cluster) -> Vec<Site> {
    let mut v: Vec<Site> = accessible_boundary(c).into_iter().collect();
    v.sort_unstable();
    v
}

fn check_size(c: &Cluster, opts: &ExactOptions) -> Result<(), PotentialError> {
    let closure = c.len() + c.boundary().len();
    if closure > opts.max_closure_sites {
        return Err(PotentialError::TooLarge {
            sites: closure,
            cap: opts.max_closure_sites,
        });
    }
    Ok(())
}

/// Equilibrium data of `Ā`: accessible sites, their measure and `Cap(Ā)`.
fn closure_equilibrium(
    c: &Cluster,
    opts: &ExactOptions,
) -> Result<(Vec<Site>, Vec<f64>, f64), PotentialError> {
    check_size(c, opts)?;
    let sites = accessible_sorted(c);
    let solver = SetSolver::new(c.dim(), &sites)?;
    let (mu, cap) = solver.equilibrium()?;
    Ok((solver.sites, mu, cap))
}

/// Exact `ω(·, Ā)` over all of `∂A`, with the default size cap.
pub fn harmonic_measure_exact(c: &Cluster) -> Result<HarmonicProfile, PotentialError> {
    harmonic_measure_exact_with(c, &ExactOptions::default())
}

pub fn harmonic_measure_exact_with(
    c: &Cluster,
    opts: &ExactOptions,
) -> Result<HarmonicProfile, PotentialError> {
    let (sites, mu, _) = closure_equilibrium(c, opts)?;
    Ok(profile_from(c, &sites, &mu))
}

fn profile_from(c: &Cluster, sites: &[Site], mu: &[f64]) -> HarmonicProfile {
    let mut entries: Vec<(Site, f64)> = c
        .boundary_sorted()
        .into_iter()
        .map(|s| {
            let w = sites
                .binary_search(&s)
                .map(|i| mu[i].max(0.0))
                .unwrap_or(0.0);
            (s, w)
        })
        .collect();
    let total: f64 = entries.iter().map(|e| e.1).sum();
    for e in &mut entries {
        e.1 /= total;
    }
    HarmonicProfile::new(c, entries, ProfileSource::Exact)
}

/// Capacity of `Ā` with the spread of the 2D formula over anchor choices.
#[derive(Debug, Clone, Copy, PartialEq, serde::Serialize, serde::Deserialize)]
pub struct CapacityReport {
    /// 2D: `Σ_{x∈∂A} ω(x, Ā) a(x)`; 3D: total escape probability of `Ā`.
    pub value: f64,
    /// 2D: largest `|Σ ω(x) a(x − z) − value|` over sampled anchors `z ∈ A`.
    pub anchor_spread: f64,
}

pub fn capacity(c: &Cluster) -> Result<CapacityReport, PotentialError> {
    capacity_with(c, &ExactOptions::default())
}

pub fn capacity_with(c: &Cluster, opts: &ExactOptions) -> Result<CapacityReport, PotentialError> {
    let (sites, mu, cap) = closure_equilibrium(c, opts)?;
    Ok(match c.dim() {
        Dim::Two => capacity_report_2d(c, &sites, &mu),
        Dim::Three => CapacityReport {
            value: cap,
            anchor_spread: 0.0,
        },
    })
}

fn capacity_report_2d(c: &Cluster, sites: &[Site], mu: &[f64]) -> CapacityReport {
    let a = KernelView2::with_extent(kernel_extent(sites, &[]));
    let at = |z: Site| -> f64 {
        sites
            .iter()
            .zip(mu)
            .map(|(&x, &w)| {
                let d = x.sub(z);
                w * a.get(d.0[0], d.0[1])
            })
            .sum()
    };
    let value = at(Site::ORIGIN);
    let order = c.attach_order();
    let stride = (order.len() / 8).max(1);
    let spread = order
        .iter()
        .step_by(stride)
        .chain(order.last())
        .map(|&z| (at(z) - value).abs())
        .fold(0.0, f64::max);
    CapacityReport {
        value,
        anchor_spread: spread,
    }
}

/// Capacity of an arbitrary finite set (2D: `λ` of the kernel system;
/// 3D: total escape probability).
pub fn capacity_of_set(dim: Dim, sites: &[Site]) -> Result<f64, PotentialError> {
    Ok(SetSolver::new(dim, sites)?.equilibrium()?.1)
}

/// Capacity from a (possibly estimated) 2D profile: `Σ ω(x) a(x)`.
pub fn capacity_from_profile(p: &HarmonicProfile) -> Result<f64, PotentialError> {
    if p.dim != Dim::Two {
        return Err(PotentialError::UnsupportedDimension {
            expected: 2,
            got: 3,
        });
    }
    let sites: Vec<Site> = p
        .entries
        .iter()
        .filter(|e| e.1 > 0.0)
        .map(|e| e.0)
        .collect();
    let a = KernelView2::with_extent(kernel_extent(&sites, &[]));
    Ok(p.entries
        .iter()
        .filter(|e| e.1 > 0.0)
        .map(|&(x, w)| w * a.get(x.0[0], x.0[1]))
        .sum())
}

/// The sum `Σ_{x∈∂A} P^x(walk never hits A)` in `Z³`, with `A` itself (not
/// its closure) as the target.
pub fn boundary_escape_sum(c: &Cluster) -> Result<f64, PotentialError> {
    if c.dim() != Dim::Three {
        return Err(PotentialError::UnsupportedDimension {
            expected: 3,
            got: 2,
        });
    }
    let sites = c.sites_sorted();
    let es = SetSolver::new(Dim::Three, &sites)?.escape_probabilities()?;
    let boundary = c.boundary_sorted();
    prefetch_differences(&boundary, &sites);
    let g = GreenView3::new();
    // Last-exit decomposition: P^x(hit A) = Σ_z G0(x − z) e_A(z).
    Ok(boundary
        .iter()
        .map(|&x| {
            let hit: f64 = sites
                .iter()
                .zip(&es)
                .map(|(&z, &e)| g.get(diff3(x, z)) * e)
                .sum();
            1.0 - hit
        })
        .sum())
}

/// Capacity change when a boundary site is attached.
#[derive(Debug, Clone, Copy, PartialEq, serde::Serialize, serde::Deserialize)]
pub struct CapacityIncrement {
    /// `ω(x, Ā)`.
    pub omega: f64,
    pub cap_before: f64,
    pub cap_after: f64,
    /// `Cap(B̄) − Cap(Ā)`.
    pub raw: f64,
    /// 2D: `Cap(B̄) − Cap(Ā)`; 3D: `1/Cap(Ā) − 1/Cap(B̄)`.
    pub lemma_form: f64,
    /// `lemma_form / ω²`, absent when `ω = 0`.
    pub ratio: Option<f64>,
}

/// Capacity increment for `B = A ∪ {x}`, on closures.
pub fn capacity_increment(c: &Cluster, x: Site) -> Result<CapacityIncrement, PotentialError> {
    if !c.is_boundary(x) {
        return Err(PotentialError::NotOnBoundary(x));
    }
    let opts = ExactOptions::default();
    let (sites, mu, cap_before) = closure_equilibrium(c, &opts)?;
    let before = match c.dim() {
        Dim::Two => capacity_report_2d(c, &sites, &mu).value,
        Dim::Three => cap_before,
    };
    let omega = sites.binary_search(&x).map(|i| mu[i]).unwrap_or(0.0);
    if sites.binary_search(&x).is_err() {
        // An inaccessible site leaves the accessible boundary, and hence
        // every exterior quantity, unchanged.
        return Ok(CapacityIncrement {
            omega: 0.0,
            cap_before: before,
            cap_after: before,
            raw: 0.0,
            lemma_form: 0.0,
            ratio: None,
        });
    }
    let mut b = c.clone();
    b.attach(x).map_err(|_| PotentialError::NotOnBoundary(x))?;
    let after = capacity_with(&b, &opts)?.value;
    let raw = after - before;
    let lemma_form = match c.dim() {
        Dim::Two => raw,
        Dim::Three => 1.0 / before - 1.0 / after,
    };
    Ok(CapacityIncrement {
        omega,
        cap_before: before,
        cap_after: after,
        raw,
        lemma_form,
        ratio: (omega > 0.0).then(|| lemma_form / (omega * omega)),
    })
}

/// Both sides of `Cap(B̄) = Cap(Ā) + Σ_{x_j ∈ B̄\Ā} ω(x_j, B̄) g_Ā(x_j)` in
/// `Z²`, where `g_Ā(x) = lim_{y→∞} G(x, y, Ā)`.
pub fn increment_identity_2d(c: &Cluster, x: Site) -> Result<(f64, f64), PotentialError> {
    if c.dim() != Dim::Two {
        return Err(PotentialError::UnsupportedDimension {
            expected: 2,
            got: 3,
        });
    }
    if !c.is_boundary(x) {
        return Err(PotentialError::NotOnBoundary(x));
    }
    let before = capacity(c)?.value;
    let mut b = c.clone();
    b.attach(x).map_err(|_| PotentialError::NotOnBoundary(x))?;
    let after = capacity(&b)?.value;
    let hm_after = harmonic_measure_exact(&b)?;
    let mut closure: Vec<Site> = c.sites_sorted();
    closure.extend(c.boundary_sorted());
    let solver = SetSolver::new(Dim::Two, &closure)?;
    let mut rhs = before;
    for &(s, w) in &hm_after.entries {
        if !c.in_closure(s) && w > 0.0 {
            rhs += w * solver.hitting(s)?.1;
        }
    }
    Ok((after, rhs))
}

/// `G(x, y, A)` with the cluster sites `A` absorbing.
pub fn greens_function(x: Site, y: Site, c: &Cluster) -> Result<f64, PotentialError> {
    if c.contains(x) || c.contains(y) {
        return Ok(0.0);
    }
    SetSolver::new(c.dim(), &c.sites_sorted())?.green(x, y)
}

/// `g_A(x) = lim_{y→∞} G(x, y, A)` in `Z²` (identically zero in `Z³`).
pub fn greens_to_infinity(x: Site, c: &Cluster) -> Result<f64, PotentialError> {
    if c.contains(x) || c.dim() == Dim::Three {
        return Ok(0.0);
    }
    Ok(SetSolver::new(c.dim(), &c.sites_sorted())?.hitting(x)?.1)
}
