//! Truncated exterior problems on a ball of radius `ρ`, solved by conjugate
//! gradients on the sparse lattice Laplacian.
//!
//! These converge to the exact quantities only as `ρ → ∞`, slowly in two
//! dimensions, and exist to cross-check the kernel-based solver.

use rustc_hash::FxHashSet;

use super::profile::{HarmonicProfile, ProfileSource};
use super::PotentialError;
use crate::lattice::{neighbors, Cluster, Dim, Site};

/// Cell status inside the bounding box of the ball.
const ABSORBED: i32 = -1;
const OUTSIDE: i32 = -2;

/// The unknowns of one truncated problem: lattice sites of the open ball
/// `|y| < ρ` that are not absorbing.
struct Region {
    dim: Dim,
    rho: i32,
    side: usize,
    cells: Vec<i32>,
    sites: Vec<Site>,
}

impl Region {
    fn new(dim: Dim, rho: i32, absorbing: &FxHashSet<Site>) -> Region {
        let side = (2 * rho + 1) as usize;
        let total = side.pow(dim.value() as u32);
        let mut cells = vec![OUTSIDE; total];
        let mut sites = Vec::new();
        let r2 = (rho as i64) * (rho as i64);
        for (flat, cell) in cells.iter_mut().enumerate() {
            let s = Self::site_of(dim, rho, side, flat);
            if s.norm2() >= r2 {
                continue;
            }
            if absorbing.contains(&s) {
                *cell = ABSORBED;
            } else {
                *cell = sites.len() as i32;
                sites.push(s);
            }
        }
        Region {
            dim,
            rho,
            side,
            cells,
            sites,
        }
    }

    fn site_of(dim: Dim, rho: i32, side: usize, mut flat: usize) -> Site {
        let mut c = [0i32; 3];
        for v in c.iter_mut().take(dim.value()) {
            *v = (flat % side) as i32 - rho;
            flat /= side;
        }
        Site(c)
    }

    fn cell(&self, s: Site) -> i32 {
        let mut flat = 0usize;
        let mut mult = 1usize;
        for k in 0..self.dim.value() {
            let v = s.0[k] + self.rho;
            if v < 0 || v as usize >= self.side {
                return OUTSIDE;
            }
            flat += v as usize * mult;
            mult *= self.side;
        }
        self.cells[flat]
    }

    /// Neighbour lists (unknown indices) and the count of outside neighbours.
    fn stencil(&self) -> (Vec<[i32; 6]>, Vec<u8>) {
        let mut nb = Vec::with_capacity(self.sites.len());
        let mut out = Vec::with_capacity(self.sites.len());
        for &s in &self.sites {
            let mut row = [-1i32; 6];
            let mut o = 0u8;
            for (k, n) in neighbors(self.dim, s).enumerate() {
                match self.cell(n) {
                    OUTSIDE => o += 1,
                    ABSORBED => {}
                    i => row[k] = i,
                }
            }
            nb.push(row);
            out.push(o);
        }
        (nb, out)
    }
}

/// Solves `(I − P) u = b` on the region by conjugate gradients, where `P`
/// is the walk restricted to the unknowns.
fn solve_cg(
    stencil: &[[i32; 6]],
    degree: f64,
    b: &[f64],
    tol: f64,
) -> Result<Vec<f64>, PotentialError> {
    let n = b.len();
    let apply = |x: &[f64], y: &mut [f64]| {
        for i in 0..n {
            let mut s = 0.0;
            for &j in &stencil[i] {
                if j >= 0 {
                    s += x[j as usize];
                }
            }
            y[i] = x[i] - s / degree;
        }
    };
    let mut x = vec![0.0; n];
    let mut r = b.to_vec();
    let mut p = r.clone();
    let mut ap = vec![0.0; n];
    let mut rr: f64 = r.iter().map(|v| v * v).sum();
    let max_iter = 20 * n + 1000;
    for it in 0..max_iter {
        let res = r.iter().fold(0.0f64, |m, v| m.max(v.abs()));
        if res < tol {
            return Ok(x);
        }
        apply(&p, &mut ap);
        let pap: f64 = p.iter().zip(&ap).map(|(a, b)| a * b).sum();
        let alpha = rr / pap;
        for i in 0..n {
            x[i] += alpha * p[i];
            r[i] -= alpha * ap[i];
        }
        let rr_new: f64 = r.iter().map(|v| v * v).sum();
        let beta = rr_new / rr;
        rr = rr_new;
        for i in 0..n {
            p[i] = r[i] + beta * p[i];
        }
        if it + 1 == max_iter {
            return Err(PotentialError::NonConvergence {
                residual: res,
                iterations: max_iter,
            });
        }
    }
    unreachable!()
}

const CG_TOLERANCE: f64 = 1e-10;

fn check_rho(c: &Cluster, rho: i64) -> Result<(), PotentialError> {
    let min = 2.0 * c.radius() + 2.0;
    if (rho as f64) <= min {
        return Err(PotentialError::InvalidRadius { rho, min });
    }
    Ok(())
}

/// For each `y ∈ ∂A`, the probability that a walk from `y` reaches the
/// sphere `|z| ≥ ρ` before returning to `Ā`.
pub fn escape_profile(c: &Cluster, rho: i64) -> Result<Vec<(Site, f64)>, PotentialError> {
    check_rho(c, rho)?;
    let dim = c.dim();
    let closure: FxHashSet<Site> = c
        .sites()
        .copied()
        .chain(c.boundary().as_slice().iter().copied())
        .collect();
    let region = Region::new(dim, rho as i32, &closure);
    let (stencil, outside) = region.stencil();
    let degree = dim.degree() as f64;
    let b: Vec<f64> = outside.iter().map(|&o| o as f64 / degree).collect();
    let u = solve_cg(&stencil, degree, &b, CG_TOLERANCE)?;
    let value = |s: Site| match region.cell(s) {
        OUTSIDE => 1.0,
        ABSORBED => 0.0,
        i => u[i as usize],
    };
    Ok(c.boundary_sorted()
        .into_iter()
        .map(|y| {
            let e = neighbors(dim, y).map(value).sum::<f64>() / degree;
            (y, e)
        })
        .collect())
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LadderOptions {
    /// Stop when successive extrapolated profiles differ by less than this
    /// in total variation.
    pub tolerance: f64,
    /// Number of radius doublings allowed.
    pub max_rungs: usize,
}

impl Default for LadderOptions {
    fn default() -> Self {
        LadderOptions {
            tolerance: 1e-8,
            max_rungs: 8,
        }
    }
}

fn normalized(c: &Cluster, raw: &[(Site, f64)]) -> HarmonicProfile {
    let total: f64 = raw.iter().map(|e| e.1).sum();
    let entries = raw.iter().map(|&(s, w)| (s, w / total)).collect();
    HarmonicProfile::new(c, entries, ProfileSource::Exact)
}

/// Harmonic measure from the normalized escape profiles at radii
/// `ρ_k = 2^k (2R + 3)`, with the geometric tail of successive differences
/// summed out (Aitken acceleration; the rate is estimated from the ladder).
pub fn harmonic_measure_ladder(
    c: &Cluster,
    opts: &LadderOptions,
) -> Result<HarmonicProfile, PotentialError> {
    let base = (2.0 * c.radius()).floor() as i64 + 3;
    let mut raw: Vec<HarmonicProfile> = Vec::new();
    let mut extrapolated: Vec<HarmonicProfile> = Vec::new();
    for k in 0..opts.max_rungs {
        let rho = base << k;
        raw.push(normalized(c, &escape_profile(c, rho)?));
        let n = raw.len();
        if n < 3 {
            continue;
        }
        let (p0, p1, p2) = (&raw[n - 3], &raw[n - 2], &raw[n - 1]);
        let q = p1.tv_distance(p2) / p0.tv_distance(p1).max(f64::MIN_POSITIVE);
        let q = q.clamp(0.0, 0.9);
        let entries = p2
            .entries
            .iter()
            .zip(&p1.entries)
            .map(|(&(s, w2), &(_, w1))| (s, (w2 + (w2 - w1) * q / (1.0 - q)).max(0.0)))
            .collect::<Vec<_>>();
        let total: f64 = entries.iter().map(|e| e.1).sum();
        let entries = entries.into_iter().map(|(s, w)| (s, w / total)).collect();
        extrapolated.push(HarmonicProfile::new(c, entries, ProfileSource::Exact));
        if let [.., a, b] = extrapolated.as_slice() {
            if a.tv_distance(b) < opts.tolerance {
                return Ok(b.clone());
            }
        }
    }
    match extrapolated.as_slice() {
        [.., a, b] => Err(PotentialError::LadderNotConverged {
            tv: a.tv_distance(b),
            previous: Box::new(a.clone()),
            last: Box::new(b.clone()),
        }),
        _ => {
            let last = raw.last().cloned().ok_or(PotentialError::EmptySet)?;
            Err(PotentialError::LadderNotConverged {
                tv: f64::INFINITY,
                previous: Box::new(last.clone()),
                last: Box::new(last),
            })
        }
    }
}

/// Expected visits to `y` from `x` before hitting `A` or leaving `|z| < ρ`.
pub fn truncated_green(x: Site, y: Site, c: &Cluster, rho: i64) -> Result<f64, PotentialError> {
    check_rho(c, rho)?;
    let dim = c.dim();
    let absorbing: FxHashSet<Site> = c.sites().copied().collect();
    let region = Region::new(dim, rho as i32, &absorbing);
    let (stencil, _) = region.stencil();
    let (ix, iy) = match (region.cell(x), region.cell(y)) {
        (i, j) if i >= 0 && j >= 0 => (i as usize, j as usize),
        _ => return Ok(0.0),
    };
    let mut b = vec![0.0; region.sites.len()];
    b[iy] = 1.0;
    // G(·, y) solves (I − P) G = δ_y.
    let g = solve_cg(&stencil, dim.degree() as f64, &b, CG_TOLERANCE)?;
    Ok(g[ix])
}
