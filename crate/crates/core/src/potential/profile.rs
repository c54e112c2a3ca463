use serde::{Deserialize, Serialize};

use crate::lattice::{Cluster, Dim, Site};

/// Where a harmonic-measure profile came from.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case", tag = "kind")]
pub enum ProfileSource {
    Exact,
    MonteCarlo { samples: u64 },
}

/// A probability vector over `∂A`: the harmonic measure `ω(·, Ā)` seen from
/// infinity, or an estimate of it. Entries are sorted by site and cover all
/// of `∂A`, including zero-measure sites.
#[derive(Debug, Clone, PartialEq)]
pub struct HarmonicProfile {
    pub dim: Dim,
    pub entries: Vec<(Site, f64)>,
    pub source: ProfileSource,
    /// [`Cluster::fingerprint`] of the cluster the profile was computed for.
    pub cluster_fingerprint: u64,
}

impl HarmonicProfile {
    pub fn new(cluster: &Cluster, mut entries: Vec<(Site, f64)>, source: ProfileSource) -> Self {
        entries.sort_unstable_by(|a, b| a.0.cmp(&b.0));
        HarmonicProfile {
            dim: cluster.dim(),
            entries,
            source,
            cluster_fingerprint: cluster.fingerprint(),
        }
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    pub fn weights(&self) -> impl Iterator<Item = f64> + '_ {
        self.entries.iter().map(|e| e.1)
    }

    pub fn weight(&self, s: Site) -> f64 {
        self.entries
            .binary_search_by(|e| e.0.cmp(&s))
            .map(|i| self.entries[i].1)
            .unwrap_or(0.0)
    }

    pub fn total(&self) -> f64 {
        self.weights().sum()
    }

    pub fn max_weight(&self) -> f64 {
        self.weights().fold(0.0, f64::max)
    }

    pub fn positive_count(&self) -> usize {
        self.weights().filter(|&w| w > 0.0).count()
    }

    /// True when the profile was computed for exactly this cluster state.
    pub fn matches(&self, cluster: &Cluster) -> bool {
        self.cluster_fingerprint == cluster.fingerprint() && self.dim == cluster.dim()
    }

    /// Total-variation distance; sites missing from one side count as zero.
    pub fn tv_distance(&self, other: &HarmonicProfile) -> f64 {
        let (mut i, mut j) = (0, 0);
        let (a, b) = (&self.entries, &other.entries);
        let mut sum = 0.0;
        while i < a.len() || j < b.len() {
            let ord = match (a.get(i), b.get(j)) {
                (Some(x), Some(y)) => x.0.cmp(&y.0),
                (Some(_), None) => std::cmp::Ordering::Less,
                _ => std::cmp::Ordering::Greater,
            };
            match ord {
                std::cmp::Ordering::Less => {
                    sum += a[i].1.abs();
                    i += 1;
                }
                std::cmp::Ordering::Greater => {
                    sum += b[j].1.abs();
                    j += 1;
                }
                std::cmp::Ordering::Equal => {
                    sum += (a[i].1 - b[j].1).abs();
                    i += 1;
                    j += 1;
                }
            }
        }
        0.5 * sum
    }

    /// Applies a lattice isometry to every site (used for symmetry checks).
    pub fn mapped(&self, f: impl Fn(Site) -> Site) -> HarmonicProfile {
        let mut entries: Vec<(Site, f64)> = self.entries.iter().map(|&(s, w)| (f(s), w)).collect();
        entries.sort_unstable_by(|a, b| a.0.cmp(&b.0));
        HarmonicProfile {
            entries,
            ..self.clone()
        }
    }
}
