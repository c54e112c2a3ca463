//! Incremental tracking of the boundary sites reachable from infinity.
//!
//! After each attachment only the few exterior sites next to the new
//! closure sites can have been cut off. Breadth-first searches from those
//! sites are run in lockstep: a search that walks past the closure's
//! bounding box belongs to the unbounded component, and one that runs out
//! of sites has found a sealed pocket. Since the unbounded component is
//! unique, the race can stop once at most one search is left undecided, so
//! the work is proportional to the pockets found, not the exterior size.

use std::collections::VecDeque;

use rustc_hash::{FxHashMap, FxHashSet};

use crate::lattice::{neighbors, Cluster, Dim, IndexedSet, Site};

#[derive(Debug, Clone)]
pub struct ExteriorTracker {
    dim: Dim,
    /// Sites outside `Ā` that are cut off from infinity.
    sealed: FxHashSet<Site>,
    accessible: IndexedSet,
}

impl ExteriorTracker {
    pub fn new(c: &Cluster) -> ExteriorTracker {
        let mut accessible = IndexedSet::default();
        let mut acc: Vec<Site> = crate::lattice::accessible_boundary(c).into_iter().collect();
        acc.sort_unstable();
        for s in acc {
            accessible.insert(s);
        }
        let mut t = ExteriorTracker {
            dim: c.dim(),
            sealed: FxHashSet::default(),
            accessible,
        };
        t.sealed = t.pockets_from_scratch(c);
        t
    }

    fn pockets_from_scratch(&self, c: &Cluster) -> FxHashSet<Site> {
        let l = c.closure_inf_radius() + 1;
        let mut seen = FxHashSet::default();
        let mut stack = vec![Site([l, 0, 0])];
        seen.insert(stack[0]);
        while let Some(s) = stack.pop() {
            for n in neighbors(self.dim, s) {
                if n.norm_inf() <= l && !c.in_closure(n) && seen.insert(n) {
                    stack.push(n);
                }
            }
        }
        let mut sealed = FxHashSet::default();
        for &b in c.boundary().as_slice() {
            for n in neighbors(self.dim, b) {
                if !c.in_closure(n) && !seen.contains(&n) {
                    // Flood the whole pocket.
                    let mut st = vec![n];
                    if sealed.insert(n) {
                        while let Some(s) = st.pop() {
                            for m in neighbors(self.dim, s) {
                                if !c.in_closure(m) && sealed.insert(m) {
                                    st.push(m);
                                }
                            }
                        }
                    }
                }
            }
        }
        sealed
    }

    pub fn accessible(&self) -> &IndexedSet {
        &self.accessible
    }

    pub fn is_accessible(&self, s: Site) -> bool {
        self.accessible.contains(&s)
    }

    pub fn sealed_count(&self) -> usize {
        self.sealed.len()
    }

    fn is_exterior(&self, c: &Cluster, s: Site) -> bool {
        !c.in_closure(s) && !self.sealed.contains(&s)
    }

    fn has_exterior_neighbor(&self, c: &Cluster, s: Site) -> bool {
        neighbors(self.dim, s).any(|n| self.is_exterior(c, n))
    }

    /// Updates the tracker after `y` was attached to `c` (which already
    /// contains `y`). Sites of `Ā` new with this attachment are the
    /// neighbours of `y` that were previously outside `Ā`.
    pub fn attach(&mut self, c: &Cluster, y: Site, new_closure: &[Site]) {
        self.accessible.remove(&y);
        let mut recheck: Vec<Site> = Vec::new();
        let mut fronts: Vec<Site> = Vec::new();
        for &n in new_closure {
            self.sealed.remove(&n);
            recheck.push(n);
            for m in neighbors(self.dim, n) {
                if c.in_closure(m) {
                    recheck.push(m);
                } else if !self.sealed.contains(&m) {
                    fronts.push(m);
                }
            }
        }
        fronts.sort_unstable();
        fronts.dedup();
        let pockets = self.race(c, &fronts);
        for p in &pockets {
            for m in neighbors(self.dim, *p) {
                if c.in_closure(m) {
                    recheck.push(m);
                }
            }
        }
        self.sealed.extend(pockets);
        recheck.sort_unstable();
        recheck.dedup();
        for s in recheck {
            if c.is_boundary(s) && self.has_exterior_neighbor(c, s) {
                self.accessible.insert(s);
            } else {
                self.accessible.remove(&s);
            }
        }
    }

    /// Returns the sites of every front component that is bounded.
    fn race(&self, c: &Cluster, fronts: &[Site]) -> Vec<Site> {
        if fronts.len() <= 1 {
            return Vec::new();
        }
        let limit = c.closure_inf_radius();
        let k = fronts.len();
        let mut parent: Vec<usize> = (0..k).collect();
        fn find(p: &mut [usize], mut i: usize) -> usize {
            while p[i] != i {
                p[i] = p[p[i]];
                i = p[i];
            }
            i
        }
        let mut owner: FxHashMap<Site, usize> = FxHashMap::default();
        let mut queues: Vec<VecDeque<Site>> = vec![VecDeque::new(); k];
        let mut state = vec![State::Open; k];
        for (i, &f) in fronts.iter().enumerate() {
            match owner.get(&f) {
                Some(&j) => {
                    let (a, b) = (find(&mut parent, i), find(&mut parent, j));
                    parent[a] = b;
                }
                None => {
                    owner.insert(f, i);
                    queues[i].push_back(f);
                }
            }
        }
        loop {
            // Count undecided roots and unbounded roots.
            let mut open = 0;
            let mut unbounded = 0;
            for i in 0..k {
                if find(&mut parent, i) == i {
                    match state[i] {
                        State::Open => open += 1,
                        State::Unbounded => unbounded += 1,
                        State::Bounded => {}
                    }
                }
            }
            // Searches that escaped all belong to the one unbounded component.
            if open + unbounded.min(1) <= 1 {
                break;
            }
            for i in 0..k {
                if find(&mut parent, i) != i || state[i] != State::Open {
                    continue;
                }
                // Expand one site of this component.
                let Some(s) = queues[i].pop_front() else {
                    state[i] = State::Bounded;
                    continue;
                };
                if s.norm_inf() > limit {
                    state[i] = State::Unbounded;
                    continue;
                }
                for n in neighbors(self.dim, s) {
                    if !self.is_exterior(c, n) {
                        continue;
                    }
                    match owner.get(&n) {
                        None => {
                            owner.insert(n, i);
                            queues[i].push_back(n);
                        }
                        Some(&j) => {
                            let (a, b) = (find(&mut parent, i), find(&mut parent, j));
                            if a != b {
                                // Merge b into a, keeping the stronger state.
                                let moved = std::mem::take(&mut queues[b]);
                                queues[a].extend(moved);
                                if state[b] == State::Unbounded {
                                    state[a] = State::Unbounded;
                                }
                                parent[b] = a;
                            }
                        }
                    }
                }
            }
        }
        let mut out = Vec::new();
        let mut bounded_roots = vec![false; k];
        for i in 0..k {
            let r = find(&mut parent, i);
            bounded_roots[i] = state[r] == State::Bounded;
        }
        for (&s, &i) in &owner {
            if bounded_roots[i] {
                out.push(s);
            }
        }
        out.sort_unstable();
        out
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
enum State {
    Open,
    Bounded,
    Unbounded,
}
