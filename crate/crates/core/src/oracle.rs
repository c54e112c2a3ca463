//! Brute-force ground truth for small clusters: the exact law of the chain
//! after a few steps, and an exhaustive sweep of the capacity-increment
//! ratios over all small lattice animals.

use std::collections::{BTreeMap, BTreeSet};

use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::growth::{attachment_weight, ProfileCache};
use crate::lattice::{neighbors, Cluster, Dim, Site};
use crate::potential::{capacity, harmonic_measure_exact, ExactOptions, PotentialError};

/// Deepest enumeration allowed per dimension.
pub fn depth_guard(dim: Dim) -> usize {
    match dim {
        Dim::Two => 5,
        Dim::Three => 4,
    }
}

/// Largest animal size the lemma sweep accepts.
pub const SWEEP_GUARD: usize = 8;

#[derive(Debug, Error)]
pub enum OracleError {
    #[error("depth {depth} exceeds the guard {max} for this dimension (about {paths} attachment paths)")]
    TooDeep { depth: usize, max: usize, paths: u64 },
    #[error("max_sites {got} exceeds the guard {max}")]
    TooManySites { got: usize, max: usize },
    #[error("eta must be finite and non-negative (got {0})")]
    BadEta(f64),
    #[error("step with no positive weight at a cluster of {0} sites")]
    AllZero(usize),
    #[error(transparent)]
    Potential(#[from] PotentialError),
}

/// Upper estimate of the number of attachment paths of length `depth`:
/// a cluster of `k` sites has at most `2dk − 2(k − 1)` boundary sites.
/// Saturates at `u64::MAX`.
pub fn path_estimate(dim: Dim, depth: usize) -> u64 {
    let d = dim.degree() as u64;
    (1..=depth as u64).fold(1u64, |acc, k| acc.saturating_mul(d * k - 2 * (k - 1)))
}

/// One cluster shape with its exact probability.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ShapeEntry {
    /// Sorted sites, origin included.
    pub sites: Vec<Vec<i32>>,
    pub probability: f64,
    /// Index into [`ShapeDistribution::classes`].
    pub class: usize,
}

/// A point-group orbit of shapes.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SymmetryClass {
    /// The lexicographically least member.
    pub representative: Vec<Vec<i32>>,
    pub members: usize,
    pub probability: f64,
}

/// Exact law of `A_depth`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ShapeDistribution {
    pub dimension: Dim,
    pub eta: f64,
    pub depth: usize,
    pub strict_eden: bool,
    /// Sorted by site list.
    pub entries: Vec<ShapeEntry>,
    pub classes: Vec<SymmetryClass>,
}

impl ShapeDistribution {
    pub fn total(&self) -> f64 {
        self.entries.iter().map(|e| e.probability).sum()
    }

    /// Probability of the shape with these (sorted) sites.
    pub fn probability(&self, sites: &[Site]) -> f64 {
        let key: Vec<Vec<i32>> = sites.iter().map(|s| s.coords(self.dimension)).collect();
        self.entries
            .binary_search_by(|e| e.sites.cmp(&key))
            .map(|i| self.entries[i].probability)
            .unwrap_or(0.0)
    }

    /// Total variation distance to empirical counts keyed by sorted shapes.
    pub fn tv_to_counts(&self, counts: &BTreeMap<Vec<Site>, u64>) -> f64 {
        let total: u64 = counts.values().sum();
        let mut seen = 0.0;
        let mut tv = 0.0;
        for (shape, &k) in counts {
            let p = self.probability(shape);
            seen += p;
            tv += (k as f64 / total as f64 - p).abs();
        }
        // Shapes never observed contribute their full probability.
        tv += (self.total() - seen).max(0.0);
        tv / 2.0
    }
}

/// The `2^d d!` signed coordinate permutations.
pub fn point_group(dim: Dim) -> Vec<Box<dyn Fn(Site) -> Site + Send + Sync>> {
    let d = dim.value();
    let perms: Vec<Vec<usize>> = match d {
        2 => vec![vec![0, 1], vec![1, 0]],
        _ => vec![
            vec![0, 1, 2],
            vec![0, 2, 1],
            vec![1, 0, 2],
            vec![1, 2, 0],
            vec![2, 0, 1],
            vec![2, 1, 0],
        ],
    };
    let mut out: Vec<Box<dyn Fn(Site) -> Site + Send + Sync>> = Vec::new();
    for p in perms {
        for signs in 0..(1u32 << d) {
            let p = p.clone();
            out.push(Box::new(move |s: Site| {
                let mut c = [0i32; 3];
                for (i, &src) in p.iter().enumerate() {
                    let v = s.0[src];
                    c[i] = if signs >> i & 1 == 1 { -v } else { v };
                }
                Site(c)
            }));
        }
    }
    out
}

fn sorted_image(sites: &[Site], g: &dyn Fn(Site) -> Site) -> Vec<Site> {
    let mut v: Vec<Site> = sites.iter().map(|&s| g(s)).collect();
    v.sort_unstable();
    v
}

/// Options for [`enumerate_dbm_with`].
#[derive(Debug, Clone, Default)]
pub struct EnumerateOptions {
    /// For `η = 0`, weigh all of `∂A` equally instead of only the sites
    /// reachable from infinity.
    pub strict_eden: bool,
    pub cache: Option<ProfileCache>,
}

/// Exact distribution of the cluster after `depth` attachments.
pub fn enumerate_dbm(dim: Dim, eta: f64, depth: usize) -> Result<ShapeDistribution, OracleError> {
    enumerate_dbm_with(dim, eta, depth, &EnumerateOptions::default())
}

pub fn enumerate_dbm_with(
    dim: Dim,
    eta: f64,
    depth: usize,
    opts: &EnumerateOptions,
) -> Result<ShapeDistribution, OracleError> {
    if !eta.is_finite() || eta < 0.0 {
        return Err(OracleError::BadEta(eta));
    }
    let max = depth_guard(dim);
    if depth > max {
        return Err(OracleError::TooDeep {
            depth,
            max,
            paths: path_estimate(dim, depth),
        });
    }
    let cache = opts.cache.clone().unwrap_or_default();
    let exact = ExactOptions::default();

    // Breadth-first over distinct shapes: the chain's next step depends on
    // the site set only, so paths reaching the same set are merged.
    let mut level: BTreeMap<Vec<Site>, f64> = BTreeMap::new();
    level.insert(vec![Site::ORIGIN], 1.0);
    for _ in 0..depth {
        let parts: Vec<Result<Vec<(Vec<Site>, f64)>, OracleError>> = level
            .par_iter()
            .map(|(shape, &p)| {
                let c = Cluster::from_sites(dim, shape).expect("enumerated shapes are connected");
                let weights: Vec<(Site, f64)> = if opts.strict_eden && eta == 0.0 {
                    c.boundary_sorted().into_iter().map(|s| (s, 1.0)).collect()
                } else {
                    let prof = cache.get_or_compute(&c, &exact)?;
                    prof.entries
                        .iter()
                        .map(|&(s, w)| (s, attachment_weight(w, eta)))
                        .collect()
                };
                let total: f64 = weights.iter().map(|w| w.1).sum();
                if !(total > 0.0) {
                    return Err(OracleError::AllZero(c.len()));
                }
                Ok(weights
                    .into_iter()
                    .filter(|w| w.1 > 0.0)
                    .map(|(s, w)| {
                        let mut next = shape.clone();
                        let pos = next.binary_search(&s).unwrap_err();
                        next.insert(pos, s);
                        (next, p * w / total)
                    })
                    .collect())
            })
            .collect();
        let mut next: BTreeMap<Vec<Site>, f64> = BTreeMap::new();
        for part in parts {
            for (shape, p) in part? {
                *next.entry(shape).or_insert(0.0) += p;
            }
        }
        level = next;
    }

    let group = point_group(dim);
    let mut class_of: BTreeMap<Vec<Site>, usize> = BTreeMap::new();
    let mut classes: Vec<SymmetryClass> = Vec::new();
    let mut entries = Vec::with_capacity(level.len());
    for (shape, &p) in &level {
        let canon = group
            .iter()
            .map(|g| sorted_image(shape, g.as_ref()))
            .min()
            .unwrap();
        let next_id = classes.len();
        let id = *class_of.entry(canon.clone()).or_insert(next_id);
        if id == next_id {
            classes.push(SymmetryClass {
                representative: canon.iter().map(|s| s.coords(dim)).collect(),
                members: 0,
                probability: 0.0,
            });
        }
        classes[id].members += 1;
        classes[id].probability += p;
        entries.push(ShapeEntry {
            sites: shape.iter().map(|s| s.coords(dim)).collect(),
            probability: p,
            class: id,
        });
    }
    Ok(ShapeDistribution {
        dimension: dim,
        eta,
        depth,
        strict_eden: opts.strict_eden,
        entries,
        classes,
    })
}

/// Every edge-connected set of exactly `size` sites, translated so that its
/// least site is the origin, in sorted order.
pub fn lattice_animals(dim: Dim, size: usize) -> Vec<Vec<Site>> {
    if size == 0 {
        return Vec::new();
    }
    let mut level: BTreeSet<Vec<Site>> = BTreeSet::new();
    level.insert(vec![Site::ORIGIN]);
    for _ in 1..size {
        let mut next = BTreeSet::new();
        for shape in &level {
            let members: BTreeSet<Site> = shape.iter().copied().collect();
            let mut grown: BTreeSet<Site> = BTreeSet::new();
            for &s in shape {
                for n in neighbors(dim, s) {
                    if !members.contains(&n) {
                        grown.insert(n);
                    }
                }
            }
            for n in grown {
                let mut v = shape.clone();
                v.push(n);
                v.sort_unstable();
                let base = v[0];
                next.insert(v.iter().map(|s| s.sub(base)).collect::<Vec<Site>>());
            }
        }
        level = next;
    }
    level.into_iter().collect()
}

/// Ratio of the capacity increment to `ω²` for one `(shape, x)` pair.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LemmaExtreme {
    pub ratio: f64,
    pub sites: Vec<Vec<i32>>,
    pub attached: Vec<i32>,
    pub omega: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LemmaRow {
    pub sites: usize,
    pub shapes: usize,
    /// Boundary sites with `ω > 0`.
    pub pairs: usize,
    /// Boundary sites with `ω = 0` (sealed); their increment is zero.
    pub zero_pairs: usize,
    pub min_ratio: f64,
    pub max_ratio: f64,
}

/// Extremes of the capacity-increment ratio over all small shapes. The
/// planar ratio is `(Cap(B̄) − Cap(Ā)) / ω²`; in 3D it is
/// `(1/Cap(Ā) − 1/Cap(B̄)) / ω²`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LemmaTable {
    pub dimension: Dim,
    pub max_sites: usize,
    pub rows: Vec<LemmaRow>,
    pub min: LemmaExtreme,
    pub max: LemmaExtreme,
}

/// The ratios for one shape, one per boundary site in sorted order; `None`
/// for sealed sites.
fn shape_ratios(dim: Dim, shape: &[Site]) -> Result<Vec<(Site, f64, Option<f64>)>, OracleError> {
    // Shapes are translated to contain the origin at their least site.
    let c = Cluster::from_sites(dim, shape).expect("animals are connected");
    let prof = harmonic_measure_exact(&c)?;
    let before = capacity(&c)?.value;
    let mut out = Vec::with_capacity(prof.len());
    for &(x, w) in &prof.entries {
        if w <= 0.0 {
            out.push((x, w, None));
            continue;
        }
        let mut b = c.clone();
        b.attach(x).expect("boundary site");
        let after = capacity(&b)?.value;
        let form = match dim {
            Dim::Two => after - before,
            Dim::Three => 1.0 / before - 1.0 / after,
        };
        out.push((x, w, Some(form / (w * w))));
    }
    Ok(out)
}

pub fn lemma_sweep(dim: Dim, max_sites: usize) -> Result<LemmaTable, OracleError> {
    if max_sites > SWEEP_GUARD {
        return Err(OracleError::TooManySites {
            got: max_sites,
            max: SWEEP_GUARD,
        });
    }
    let mut rows = Vec::new();
    let mut lo: Option<LemmaExtreme> = None;
    let mut hi: Option<LemmaExtreme> = None;
    for size in 1..=max_sites {
        let shapes = lattice_animals(dim, size);
        let results: Vec<Result<Vec<(Site, f64, Option<f64>)>, OracleError>> =
            shapes.par_iter().map(|s| shape_ratios(dim, s)).collect();
        let mut row = LemmaRow {
            sites: size,
            shapes: shapes.len(),
            pairs: 0,
            zero_pairs: 0,
            min_ratio: f64::INFINITY,
            max_ratio: f64::NEG_INFINITY,
        };
        for (shape, res) in shapes.iter().zip(results) {
            for (x, w, ratio) in res? {
                let Some(r) = ratio else {
                    row.zero_pairs += 1;
                    continue;
                };
                row.pairs += 1;
                row.min_ratio = row.min_ratio.min(r);
                row.max_ratio = row.max_ratio.max(r);
                let ext = || LemmaExtreme {
                    ratio: r,
                    sites: shape.iter().map(|s| s.coords(dim)).collect(),
                    attached: x.coords(dim),
                    omega: w,
                };
                // Strict comparisons keep the first extreme in enumeration order.
                if lo.as_ref().map_or(true, |e| r < e.ratio) {
                    lo = Some(ext());
                }
                if hi.as_ref().map_or(true, |e| r > e.ratio) {
                    hi = Some(ext());
                }
            }
        }
        rows.push(row);
    }
    Ok(LemmaTable {
        dimension: dim,
        max_sites,
        rows,
        min: lo.expect("the single site has boundary"),
        max: hi.expect("the single site has boundary"),
    })
}
