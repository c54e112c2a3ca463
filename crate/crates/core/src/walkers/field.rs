use std::collections::VecDeque;
use std::f64::consts::PI;

use rand::Rng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use rustc_hash::FxHashMap;

use super::tables::{max_table, table_at_most};
use super::{walker_rng, WalkStats, WalkerConfig};
use crate::lattice::{neighbors, Cluster, Dim, Site};
use crate::potential::{HarmonicProfile, ProfileSource};

/// Largest stored clearance. Beyond it the far-field bound takes over.
fn clearance_cap(dim: Dim) -> u8 {
    match dim {
        Dim::Two => 16,
        Dim::Three => 6,
    }
}

/// A read-mostly snapshot of `Ā` for walkers: a dense grid holding the
/// ℓ∞ distance to the nearest site of `Ā` (capped; 0 on `Ā` itself).
#[derive(Debug, Clone)]
pub struct WalkField {
    dim: Dim,
    half: i32,
    side: usize,
    dist: Vec<u8>,
    cap: u8,
    closure_inf: i32,
    radius: f64,
}

/// Result of one walker.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct WalkOutcome {
    pub site: Site,
    pub stats: WalkStats,
}

impl WalkField {
    pub fn new(c: &Cluster) -> WalkField {
        let dim = c.dim();
        let cap = clearance_cap(dim);
        let half = c.closure_inf_radius() + cap as i32 + 8;
        let mut f = WalkField {
            dim,
            half,
            side: 0,
            dist: Vec::new(),
            cap,
            closure_inf: c.closure_inf_radius(),
            radius: c.radius(),
        };
        f.rebuild(c);
        f
    }

    pub fn dim(&self) -> Dim {
        self.dim
    }

    fn rebuild(&mut self, c: &Cluster) {
        self.side = (2 * self.half + 1) as usize;
        let cells = self.side.pow(self.dim.value() as u32);
        self.dist = vec![self.cap; cells];
        let mut queue = VecDeque::new();
        for &s in c.sites().chain(c.boundary().as_slice()) {
            let i = self.index(s).expect("closure inside grid");
            self.dist[i] = 0;
            queue.push_back(s);
        }
        // Multi-source BFS over the king-move graph yields ℓ∞ distances.
        let moves = king_moves(self.dim);
        while let Some(s) = queue.pop_front() {
            let d = self.dist[self.index(s).unwrap()];
            if d + 1 >= self.cap {
                continue;
            }
            for m in &moves {
                let n = s.offset(*m);
                if let Some(j) = self.index(n) {
                    if self.dist[j] > d + 1 {
                        self.dist[j] = d + 1;
                        queue.push_back(n);
                    }
                }
            }
        }
    }

    #[inline]
    fn index(&self, s: Site) -> Option<usize> {
        let h = self.half;
        let side = self.side;
        let x = s.0[0] + h;
        let y = s.0[1] + h;
        if x < 0 || y < 0 || x as usize >= side || y as usize >= side {
            return None;
        }
        match self.dim {
            Dim::Two => Some(y as usize * side + x as usize),
            Dim::Three => {
                let z = s.0[2] + h;
                if z < 0 || z as usize >= side {
                    return None;
                }
                Some((z as usize * side + y as usize) * side + x as usize)
            }
        }
    }

    /// Updates the field after `y` was attached to `c` (which already
    /// contains `y`).
    pub fn attach(&mut self, c: &Cluster, y: Site) {
        self.closure_inf = c.closure_inf_radius();
        self.radius = c.radius();
        if self.closure_inf + self.cap as i32 + 1 > self.half {
            self.half = (2 * self.half).max(self.closure_inf + self.cap as i32 + 8);
            self.rebuild(c);
            return;
        }
        let cap = self.cap as i32;
        for n in neighbors(self.dim, y) {
            let i = self.index(n).unwrap();
            if self.dist[i] == 0 {
                continue;
            }
            // Stamp ℓ∞ distances from the new closure site.
            let (lo, hi) = (-cap + 1, cap - 1);
            let zr = if self.dim == Dim::Three { lo..=hi } else { 0..=0 };
            for dz in zr {
                for dy in lo..=hi {
                    for dx in lo..=hi {
                        let d = dx.abs().max(dy.abs()).max(dz.abs()) as u8;
                        let j = self.index(n.offset([dx, dy, dz])).unwrap();
                        if self.dist[j] > d {
                            self.dist[j] = d;
                        }
                    }
                }
            }
        }
    }

    /// Lower bound on the ℓ∞ distance from `p` to `Ā`; zero exactly on `Ā`.
    #[inline]
    fn clearance(&self, p: Site) -> i32 {
        let far = p.norm_inf() - self.closure_inf;
        match self.index(p) {
            Some(i) => {
                let d = self.dist[i] as i32;
                if d == 0 {
                    0
                } else {
                    d.max(far)
                }
            }
            None => far,
        }
    }

    /// True if `p` lies in `Ā`.
    pub fn in_closure(&self, p: Site) -> bool {
        self.index(p).map(|i| self.dist[i] == 0).unwrap_or(false)
    }

    pub fn launch_radius(&self, cfg: &WalkerConfig) -> f64 {
        cfg.launch_factor * WalkerConfig::scale(self.radius)
    }

    pub fn kill_radius(&self, cfg: &WalkerConfig) -> f64 {
        cfg.kill_factor * WalkerConfig::scale(self.radius)
    }

    fn launch(&self, r: f64, rng: &mut ChaCha8Rng) -> Site {
        match self.dim {
            Dim::Two => {
                let t = 2.0 * PI * rng.gen::<f64>();
                Site::new2((r * t.cos()).round() as i32, (r * t.sin()).round() as i32)
            }
            Dim::Three => {
                let z: f64 = 2.0 * rng.gen::<f64>() - 1.0;
                let t = 2.0 * PI * rng.gen::<f64>();
                let rho = (1.0 - z * z).max(0.0).sqrt();
                Site::new3(
                    (r * rho * t.cos()).round() as i32,
                    (r * rho * t.sin()).round() as i32,
                    (r * z).round() as i32,
                )
            }
        }
    }

    /// Returns a walker at distance `r > r_launch` to the launch circle,
    /// at the point where a planar Brownian path from there first meets it
    /// (the exterior Poisson kernel, a wrapped Cauchy law in the angle).
    fn reinject(&self, p: Site, r: f64, r_launch: f64, rng: &mut ChaCha8Rng) -> Site {
        let phi = (p.0[1] as f64).atan2(p.0[0] as f64);
        let q = r_launch / r;
        let u: f64 = rng.gen();
        let t = phi + 2.0 * ((1.0 - q) / (1.0 + q) * (PI * (u - 0.5)).tan()).atan();
        Site::new2(
            (r_launch * t.cos()).round() as i32,
            (r_launch * t.sin()).round() as i32,
        )
    }

    /// Runs walker `walker` of step `step` until it enters `Ā`.
    pub fn sample_hit(&self, cfg: &WalkerConfig, step: u64, walker: u64) -> WalkOutcome {
        let mut rng = walker_rng(cfg.rng_seed, step, walker);
        self.walk(cfg, &mut rng)
    }

    fn walk(&self, cfg: &WalkerConfig, rng: &mut ChaCha8Rng) -> WalkOutcome {
        let r_launch = self.launch_radius(cfg);
        let r_kill = self.kill_radius(cfg);
        let kill2 = r_kill * r_kill;
        let deg = self.dim.degree() as u32;
        let offsets = self.dim.offsets();
        let big = max_table(self.dim);
        let mut stats = WalkStats {
            walkers: 1,
            ..WalkStats::default()
        };
        'launch: loop {
            let mut p = self.launch(r_launch, rng);
            let mut steps = 0u64;
            loop {
                let c = self.clearance(p);
                if c == 0 {
                    stats.moves += steps;
                    return WalkOutcome { site: p, stats };
                }
                steps += 1;
                if steps > cfg.max_steps {
                    stats.moves += steps;
                    stats.abandoned += 1;
                    continue 'launch;
                }
                if c == 1 {
                    p = p.offset(offsets[rng.gen_range(0..deg) as usize]);
                    continue;
                }
                let r2 = p.norm2() as f64;
                if r2 > kill2 {
                    match self.dim {
                        Dim::Two => {
                            stats.reinjections += 1;
                            p = self.reinject(p, r2.sqrt(), r_launch, rng);
                            continue;
                        }
                        Dim::Three => {
                            stats.moves += steps;
                            stats.discarded += 1;
                            continue 'launch;
                        }
                    }
                }
                let t = table_at_most(self.dim, ((c - 1) as usize).min(big));
                let bits: u64 = rng.gen();
                let face = (bits % (2 * self.dim.value() as u64)) as usize;
                let pos = t.position(rng.gen::<f64>());
                let (u, v) = t.transverse(pos);
                let axis = face / 2;
                let sign = if face % 2 == 0 { 1 } else { -1 };
                let mut d = [0i32; 3];
                d[axis] = sign * (t.k as i32 + 1);
                d[(axis + 1) % self.dim.value()] = u;
                if self.dim == Dim::Three {
                    d[(axis + 2) % 3] = v;
                }
                p = p.offset(d);
            }
        }
    }

    /// Hit sites of walkers `0..n`, in walker order.
    pub fn sample_hits(&self, n: u64, cfg: &WalkerConfig, step: u64) -> (Vec<Site>, WalkStats) {
        let out: Vec<WalkOutcome> = (0..n)
            .into_par_iter()
            .map(|w| self.sample_hit(cfg, step, w))
            .collect();
        let stats = out
            .iter()
            .fold(WalkStats::default(), |a, o| a.merge(o.stats));
        (out.into_iter().map(|o| o.site).collect(), stats)
    }

    /// Normalized hit counts over `∂A` for walkers `0..n` of `step`.
    pub fn estimate_profile(
        &self,
        c: &Cluster,
        n: u64,
        cfg: &WalkerConfig,
        step: u64,
    ) -> (HarmonicProfile, WalkStats) {
        let (counts, stats) = (0..n)
            .into_par_iter()
            .fold(
                || (FxHashMap::<Site, u64>::default(), WalkStats::default()),
                |(mut m, s), w| {
                    let o = self.sample_hit(cfg, step, w);
                    *m.entry(o.site).or_insert(0) += 1;
                    (m, s.merge(o.stats))
                },
            )
            .reduce(
                || (FxHashMap::default(), WalkStats::default()),
                |(mut a, sa), (b, sb)| {
                    for (k, v) in b {
                        *a.entry(k).or_insert(0) += v;
                    }
                    (a, sa.merge(sb))
                },
            );
        let entries = c
            .boundary_sorted()
            .into_iter()
            .map(|s| (s, counts.get(&s).copied().unwrap_or(0) as f64 / n as f64))
            .collect();
        let profile = HarmonicProfile::new(c, entries, ProfileSource::MonteCarlo { samples: n });
        (profile, stats)
    }
}

fn king_moves(dim: Dim) -> Vec<[i32; 3]> {
    let zr: &[i32] = if dim == Dim::Three { &[-1, 0, 1] } else { &[0] };
    let mut v = Vec::new();
    for &dz in zr {
        for dy in -1..=1 {
            for dx in -1..=1 {
                if (dx, dy, dz) != (0, 0, 0) {
                    v.push([dx, dy, dz]);
                }
            }
        }
    }
    v
}
