//! Lattice geometry and cluster bookkeeping on Z² and Z³.
//!
//! A [`Cluster`] is the growing set `A`, together with its exterior
//! neighbour set `∂A` (maintained incrementally) and the order in which
//! sites were attached. The closure `Ā = A ∪ ∂A` is never stored
//! separately.

use std::fmt;

use rustc_hash::{FxHashMap, FxHashSet};
use serde::{Deserialize, Serialize};
use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum LatticeError {
    #[error("site {site} is not on the cluster boundary")]
    NotOnBoundary { site: Site },
    #[error("site {site} does not belong to Z^{dim}")]
    DimensionMismatch { site: Site, dim: usize },
    #[error("site set is not edge-connected")]
    Disconnected,
    #[error("site set does not contain the origin")]
    MissingOrigin,
    #[error("empty site set")]
    Empty,
}

/// Lattice dimension. Only the square and cubic lattices are supported.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize, PartialOrd, Ord)]
#[serde(try_from = "u8", into = "u8")]
pub enum Dim {
    Two,
    Three,
}

impl Dim {
    pub fn value(self) -> usize {
        match self {
            Dim::Two => 2,
            Dim::Three => 3,
        }
    }

    /// Number of nearest neighbours, `2d`.
    pub fn degree(self) -> usize {
        2 * self.value()
    }

    pub fn from_value(d: usize) -> Option<Dim> {
        match d {
            2 => Some(Dim::Two),
            3 => Some(Dim::Three),
            _ => None,
        }
    }

    pub fn offsets(self) -> &'static [[i32; 3]] {
        match self {
            Dim::Two => &OFFSETS_2D,
            Dim::Three => &OFFSETS_3D,
        }
    }
}

impl TryFrom<u8> for Dim {
    type Error = String;
    fn try_from(v: u8) -> Result<Self, Self::Error> {
        Dim::from_value(v as usize).ok_or_else(|| format!("dimension must be 2 or 3, got {v}"))
    }
}

impl From<Dim> for u8 {
    fn from(d: Dim) -> u8 {
        d.value() as u8
    }
}

const OFFSETS_2D: [[i32; 3]; 4] = [[1, 0, 0], [-1, 0, 0], [0, 1, 0], [0, -1, 0]];
const OFFSETS_3D: [[i32; 3]; 6] = [
    [1, 0, 0],
    [-1, 0, 0],
    [0, 1, 0],
    [0, -1, 0],
    [0, 0, 1],
    [0, 0, -1],
];

/// An integer lattice point. Planar sites carry `z = 0`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Default)]
pub struct Site(pub [i32; 3]);

impl Site {
    pub const ORIGIN: Site = Site([0, 0, 0]);

    pub fn new2(x: i32, y: i32) -> Site {
        Site([x, y, 0])
    }

    pub fn new3(x: i32, y: i32, z: i32) -> Site {
        Site([x, y, z])
    }

    pub fn x(self) -> i32 {
        self.0[0]
    }
    pub fn y(self) -> i32 {
        self.0[1]
    }
    pub fn z(self) -> i32 {
        self.0[2]
    }

    pub fn belongs_to(self, dim: Dim) -> bool {
        dim == Dim::Three || self.0[2] == 0
    }

    pub fn offset(self, d: [i32; 3]) -> Site {
        Site([self.0[0] + d[0], self.0[1] + d[1], self.0[2] + d[2]])
    }

    pub fn sub(self, other: Site) -> Site {
        Site([
            self.0[0] - other.0[0],
            self.0[1] - other.0[1],
            self.0[2] - other.0[2],
        ])
    }

    pub fn norm2(self) -> i64 {
        self.0.iter().map(|&c| (c as i64) * (c as i64)).sum()
    }

    pub fn norm(self) -> f64 {
        (self.norm2() as f64).sqrt()
    }

    pub fn norm_inf(self) -> i32 {
        self.0.iter().map(|c| c.abs()).max().unwrap_or(0)
    }

    /// Coordinates truncated to the lattice dimension.
    pub fn coords(self, dim: Dim) -> Vec<i32> {
        self.0[..dim.value()].to_vec()
    }

    pub fn from_coords(coords: &[i32]) -> Option<Site> {
        match coords {
            [x, y] => Some(Site::new2(*x, *y)),
            [x, y, z] => Some(Site::new3(*x, *y, *z)),
            _ => None,
        }
    }
}

impl fmt::Display for Site {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "({}, {}, {})", self.0[0], self.0[1], self.0[2])
    }
}

/// The `2d` axis neighbours of `s`.
pub fn neighbors(dim: Dim, s: Site) -> impl Iterator<Item = Site> {
    dim.offsets().iter().map(move |&d| s.offset(d))
}

/// Vec-backed set with O(1) insert, remove and indexed access.
#[derive(Debug, Clone, Default)]
pub struct IndexedSet {
    items: Vec<Site>,
    index: FxHashMap<Site, usize>,
}

impl IndexedSet {
    pub fn insert(&mut self, s: Site) -> bool {
        if self.index.contains_key(&s) {
            return false;
        }
        self.index.insert(s, self.items.len());
        self.items.push(s);
        true
    }

    pub fn remove(&mut self, s: &Site) -> bool {
        let Some(i) = self.index.remove(s) else {
            return false;
        };
        self.items.swap_remove(i);
        if i < self.items.len() {
            self.index.insert(self.items[i], i);
        }
        true
    }

    pub fn contains(&self, s: &Site) -> bool {
        self.index.contains_key(s)
    }

    pub fn len(&self) -> usize {
        self.items.len()
    }

    pub fn is_empty(&self) -> bool {
        self.items.is_empty()
    }

    pub fn get(&self, i: usize) -> Site {
        self.items[i]
    }

    pub fn as_slice(&self) -> &[Site] {
        &self.items
    }
}

/// An edge-connected, origin-rooted growing site set.
#[derive(Debug, Clone)]
pub struct Cluster {
    dim: Dim,
    sites: FxHashSet<Site>,
    boundary: IndexedSet,
    order: Vec<Site>,
    radius2: i64,
    closure_inf: i32,
}

impl Cluster {
    /// The single-site cluster `A₀ = {0}`.
    pub fn new(dim: Dim) -> Cluster {
        let mut c = Cluster {
            dim,
            sites: FxHashSet::default(),
            boundary: IndexedSet::default(),
            order: Vec::new(),
            radius2: 0,
            closure_inf: 0,
        };
        c.insert_unchecked(Site::ORIGIN);
        c
    }

    /// Builds a cluster from an arbitrary site set by attaching sites in
    /// breadth-first order from the origin.
    pub fn from_sites(dim: Dim, sites: &[Site]) -> Result<Cluster, LatticeError> {
        if sites.is_empty() {
            return Err(LatticeError::Empty);
        }
        let set: FxHashSet<Site> = sites.iter().copied().collect();
        for &s in &set {
            if !s.belongs_to(dim) {
                return Err(LatticeError::DimensionMismatch {
                    site: s,
                    dim: dim.value(),
                });
            }
        }
        if !set.contains(&Site::ORIGIN) {
            return Err(LatticeError::MissingOrigin);
        }
        let mut c = Cluster::new(dim);
        let mut queue = std::collections::VecDeque::from([Site::ORIGIN]);
        while let Some(s) = queue.pop_front() {
            for n in neighbors(dim, s) {
                if set.contains(&n) && !c.contains(n) {
                    c.attach(n)?;
                    queue.push_back(n);
                }
            }
        }
        if c.len() != set.len() {
            return Err(LatticeError::Disconnected);
        }
        Ok(c)
    }

    /// Replays an attach sequence whose first entry is the origin.
    pub fn replay(dim: Dim, order: &[Site]) -> Result<Cluster, LatticeError> {
        let mut c = Cluster::new(dim);
        for &s in order.iter().skip(usize::from(order.first() == Some(&Site::ORIGIN))) {
            c.attach(s)?;
        }
        Ok(c)
    }

    fn insert_unchecked(&mut self, y: Site) {
        self.sites.insert(y);
        self.boundary.remove(&y);
        self.order.push(y);
        self.radius2 = self.radius2.max(y.norm2());
        self.closure_inf = self.closure_inf.max(y.norm_inf() + 1);
        for n in neighbors(self.dim, y) {
            if !self.sites.contains(&n) {
                self.boundary.insert(n);
            }
        }
    }

    /// Attaches a boundary site.
    pub fn attach(&mut self, y: Site) -> Result<(), LatticeError> {
        if !y.belongs_to(self.dim) {
            return Err(LatticeError::DimensionMismatch {
                site: y,
                dim: self.dim.value(),
            });
        }
        if !self.boundary.contains(&y) {
            return Err(LatticeError::NotOnBoundary { site: y });
        }
        self.insert_unchecked(y);
        Ok(())
    }

    pub fn dim(&self) -> Dim {
        self.dim
    }

    pub fn len(&self) -> usize {
        self.sites.len()
    }

    pub fn is_empty(&self) -> bool {
        self.sites.is_empty()
    }

    pub fn contains(&self, s: Site) -> bool {
        self.sites.contains(&s)
    }

    pub fn in_closure(&self, s: Site) -> bool {
        self.sites.contains(&s) || self.boundary.contains(&s)
    }

    pub fn is_boundary(&self, s: Site) -> bool {
        self.boundary.contains(&s)
    }

    pub fn boundary(&self) -> &IndexedSet {
        &self.boundary
    }

    /// `∂A` in lexicographic order.
    pub fn boundary_sorted(&self) -> Vec<Site> {
        let mut v = self.boundary.as_slice().to_vec();
        v.sort_unstable();
        v
    }

    /// `A` in lexicographic order.
    pub fn sites_sorted(&self) -> Vec<Site> {
        let mut v: Vec<Site> = self.sites.iter().copied().collect();
        v.sort_unstable();
        v
    }

    pub fn sites(&self) -> impl Iterator<Item = &Site> {
        self.sites.iter()
    }

    /// Attachment history, starting with the origin.
    pub fn attach_order(&self) -> &[Site] {
        &self.order
    }

    /// `R(A) = max |x|` over `A`.
    pub fn radius(&self) -> f64 {
        (self.radius2 as f64).sqrt()
    }

    pub fn radius2(&self) -> i64 {
        self.radius2
    }

    /// Max ℓ∞ norm over the closure `Ā`.
    pub fn closure_inf_radius(&self) -> i32 {
        self.closure_inf
    }

    /// Recomputes `∂A` from scratch (used to validate the incremental one).
    pub fn recompute_boundary(&self) -> FxHashSet<Site> {
        let mut b = FxHashSet::default();
        for &s in &self.sites {
            for n in neighbors(self.dim, s) {
                if !self.sites.contains(&n) {
                    b.insert(n);
                }
            }
        }
        b
    }

    /// Order-independent fingerprint of the site set.
    pub fn fingerprint(&self) -> u64 {
        shape_fingerprint(&self.sites_sorted())
    }
}

/// Sites of `∂A` adjacent to the unbounded component of `Z^d \ Ā`.
///
/// These are exactly the boundary sites a walk from infinity can reach
/// before touching `Ā`, i.e. the support of `ω(·, Ā)`.
pub fn accessible_boundary(c: &Cluster) -> FxHashSet<Site> {
    let dim = c.dim();
    let l = c.closure_inf_radius() + 1;
    let in_box = |s: Site| s.0.iter().take(dim.value()).all(|v| v.abs() <= l);
    let mut exterior: FxHashSet<Site> = FxHashSet::default();
    let mut stack = Vec::new();
    // The box shell lies outside Ā and is connected, so one seed on it
    // reaches the whole unbounded component inside the box.
    let seed = Site([l, 0, 0]);
    exterior.insert(seed);
    stack.push(seed);
    while let Some(s) = stack.pop() {
        for n in neighbors(dim, s) {
            if in_box(n) && !c.in_closure(n) && exterior.insert(n) {
                stack.push(n);
            }
        }
    }
    c.boundary()
        .as_slice()
        .iter()
        .copied()
        .filter(|&b| neighbors(dim, b).any(|n| !in_box(n) || exterior.contains(&n)))
        .collect()
}

/// FNV-1a over sorted coordinates; stable across runs and platforms.
pub fn shape_fingerprint(sorted: &[Site]) -> u64 {
    let mut h: u64 = 0xcbf2_9ce4_8422_2325;
    for s in sorted {
        for c in s.0 {
            for b in c.to_le_bytes() {
                h ^= b as u64;
                h = h.wrapping_mul(0x0000_0100_0000_01b3);
            }
        }
    }
    h
}
