//! First-exit distributions of the simple random walk from the centre of
//! the cube `[−k, k]^d`, used for exact long jumps.
//!
//! With `N = 2k + 2` and sine modes `φ_m(y) = sin(mπ(y + k + 1)/N)`, the
//! probability of leaving through the face `x₁ = k + 1` at transverse
//! position `y` is
//!
//! ```text
//! Σ_m (2/N)^{d−1} Π φ_{m_i}(y_i) φ_{m_i}(0) / (2 cosh(β_m (k + 1)))
//! ```
//!
//! where `cosh β_m = d − Σ cos(m_i π / N)`.

use std::sync::OnceLock;

use crate::lattice::Dim;

/// Box half-widths with a tabulated exit law.
const SIZES_2D: &[usize] = &[
    1, 2, 3, 4, 5, 6, 7, 8, 9, 10, 11, 12, 13, 14, 15, 16, 24, 32, 48, 64, 96, 128, 192, 256, 384,
    512, 768, 1024, 1536, 2048, 3072, 4096,
];
const SIZES_3D: &[usize] = &[1, 2, 3, 4, 5, 6, 7, 8, 12, 16, 24, 32, 48, 64];

/// Cumulative exit law over one face of the box.
#[derive(Debug)]
pub struct ExitTable {
    pub k: usize,
    cdf: Vec<f64>,
}

impl ExitTable {
    fn from_weights(k: usize, w: Vec<f64>) -> ExitTable {
        let total: f64 = w.iter().sum();
        let mut acc = 0.0;
        let cdf = w
            .iter()
            .map(|v| {
                acc += v / total;
                acc
            })
            .collect();
        ExitTable { k, cdf }
    }

    /// Face position index for a uniform `u ∈ [0, 1)`.
    #[inline]
    pub fn position(&self, u: f64) -> usize {
        self.cdf
            .partition_point(|&c| c <= u)
            .min(self.cdf.len() - 1)
    }

    /// Transverse coordinates of a face position.
    #[inline]
    pub fn transverse(&self, idx: usize) -> (i32, i32) {
        let side = 2 * self.k + 1;
        let k = self.k as i32;
        ((idx % side) as i32 - k, (idx / side) as i32 - k)
    }

    pub fn len(&self) -> usize {
        self.cdf.len()
    }

    pub fn is_empty(&self) -> bool {
        self.cdf.is_empty()
    }

    /// Probability of a face position, conditioned on the face.
    pub fn probability(&self, idx: usize) -> f64 {
        self.cdf[idx] - if idx == 0 { 0.0 } else { self.cdf[idx - 1] }
    }
}

/// Unnormalized face weights, summing to `1/(2d)` up to rounding.
pub fn exit_weights(dim: Dim, k: usize) -> Vec<f64> {
    let n = 2 * k + 2;
    let nf = n as f64;
    let side = 2 * k + 1;
    let theta = |m: usize| m as f64 * std::f64::consts::PI / nf;
    let phi = |m: usize, y: i64| (theta(m) * (y + k as i64 + 1) as f64).sin();
    // Only odd modes survive: φ_m(0) = sin(mπ/2).
    let modes: Vec<usize> = (1..n).step_by(2).collect();
    let sign = |m: usize| if m % 4 == 1 { 1.0 } else { -1.0 };
    let depth = (k + 1) as f64;
    match dim {
        Dim::Two => {
            let coef: Vec<(f64, f64)> = modes
                .iter()
                .map(|&m| {
                    let beta = (2.0 - theta(m).cos()).acosh();
                    (theta(m), (2.0 / nf) * sign(m) / (2.0 * (beta * depth).cosh()))
                })
                .take_while(|c| c.1 != 0.0)
                .collect();
            (0..side)
                .map(|i| {
                    let shift = (i + 1) as f64;
                    coef.iter()
                        .map(|&(t, c)| c * (t * shift).sin())
                        .sum::<f64>()
                        .max(0.0)
                })
                .collect()
        }
        Dim::Three => {
            let basis: Vec<Vec<f64>> = modes
                .iter()
                .map(|&m| (0..side).map(|i| phi(m, i as i64 - k as i64)).collect())
                .collect();
            let nm = modes.len();
            let mut coef = vec![0.0; nm * nm];
            for (a, &m1) in modes.iter().enumerate() {
                for (b, &m2) in modes.iter().enumerate() {
                    let c = 3.0 - theta(m1).cos() - theta(m2).cos();
                    let beta = c.acosh();
                    coef[a * nm + b] = (2.0 / nf).powi(2) * sign(m1) * sign(m2)
                        / (2.0 * (beta * depth).cosh());
                }
            }
            // P(y, z) = Σ_a φ_a(y) Σ_b coef[a,b] φ_b(z), done as two products.
            let mut inner = vec![0.0; nm * side];
            for a in 0..nm {
                for z in 0..side {
                    inner[a * side + z] = (0..nm).map(|b| coef[a * nm + b] * basis[b][z]).sum();
                }
            }
            let mut w = vec![0.0; side * side];
            for z in 0..side {
                for y in 0..side {
                    let v: f64 = (0..nm).map(|a| basis[a][y] * inner[a * side + z]).sum();
                    w[z * side + y] = v.max(0.0);
                }
            }
            w
        }
    }
}

fn slots(dim: Dim) -> &'static [OnceLock<ExitTable>] {
    static T2: OnceLock<Vec<OnceLock<ExitTable>>> = OnceLock::new();
    static T3: OnceLock<Vec<OnceLock<ExitTable>>> = OnceLock::new();
    let (cell, sizes) = match dim {
        Dim::Two => (&T2, SIZES_2D),
        Dim::Three => (&T3, SIZES_3D),
    };
    cell.get_or_init(|| sizes.iter().map(|_| OnceLock::new()).collect())
}

fn sizes(dim: Dim) -> &'static [usize] {
    match dim {
        Dim::Two => SIZES_2D,
        Dim::Three => SIZES_3D,
    }
}

/// The largest tabulated box with half-width at most `k` (`k ≥ 1`).
pub fn table_at_most(dim: Dim, k: usize) -> &'static ExitTable {
    let sz = sizes(dim);
    let i = sz.partition_point(|&s| s <= k).max(1) - 1;
    slots(dim)[i].get_or_init(|| ExitTable::from_weights(sz[i], exit_weights(dim, sz[i])))
}

/// Largest half-width any table provides.
pub fn max_table(dim: Dim) -> usize {
    *sizes(dim).last().unwrap()
}

#[cfg(test)]
mod tests {
    use super::*;
    use faer::prelude::*;
    use faer::Mat;
    use rustc_hash::FxHashMap;

    /// Exit law from the centre by a dense solve of the Dirichlet problem.
    fn brute_force(dim: Dim, k: i32) -> FxHashMap<Vec<i32>, f64> {
        let d = dim.value();
        let side = 2 * k + 1;
        let count = (side as usize).pow(d as u32);
        let coord = |mut i: usize| -> Vec<i32> {
            (0..d)
                .map(|_| {
                    let v = (i % side as usize) as i32 - k;
                    i /= side as usize;
                    v
                })
                .collect()
        };
        let index = |c: &[i32]| -> Option<usize> {
            let mut i = 0usize;
            for &v in c.iter().rev() {
                if v.abs() > k {
                    return None;
                }
                i = i * side as usize + (v + k) as usize;
            }
            Some(i)
        };
        let mut m = Mat::<f64>::zeros(count, count);
        let mut exits: Vec<Vec<(Vec<i32>, usize)>> = vec![vec![]; count];
        for i in 0..count {
            m.write(i, i, 1.0);
            let c = coord(i);
            for a in 0..d {
                for s in [-1, 1] {
                    let mut n = c.clone();
                    n[a] += s;
                    match index(&n) {
                        Some(j) => m.write(i, j, m.read(i, j) - 1.0 / (2 * d) as f64),
                        None => exits[i].push((n, i)),
                    }
                }
            }
        }
        let lu = m.partial_piv_lu();
        let centre = index(&vec![0; d]).unwrap();
        // Green's function row from the centre: solve Mᵀ g = e_centre.
        let mut e = Mat::<f64>::zeros(count, 1);
        e.write(centre, 0, 1.0);
        let g = lu.solve_transpose(&e);
        let mut out = FxHashMap::default();
        for i in 0..count {
            for (n, _) in &exits[i] {
                *out.entry(n.clone()).or_insert(0.0) += g.read(i, 0) / (2 * d) as f64;
            }
        }
        out
    }

    #[test]
    fn planar_tables_match_dense_solve() {
        for k in [1usize, 3, 6] {
            let w = exit_weights(Dim::Two, k);
            assert!((w.iter().sum::<f64>() - 0.25).abs() < 1e-12);
            let bf = brute_force(Dim::Two, k as i32);
            for (i, wi) in w.iter().enumerate() {
                let y = i as i32 - k as i32;
                let v = bf[&vec![k as i32 + 1, y]];
                assert!((wi - v).abs() < 1e-12, "k={k} y={y}: {wi} vs {v}");
            }
        }
    }

    #[test]
    fn cubic_tables_match_dense_solve() {
        for k in [1usize, 3] {
            let w = exit_weights(Dim::Three, k);
            assert!((w.iter().sum::<f64>() - 1.0 / 6.0).abs() < 1e-12);
            let t = ExitTable::from_weights(k, w.clone());
            let bf = brute_force(Dim::Three, k as i32);
            for (i, wi) in w.iter().enumerate() {
                let (y, z) = t.transverse(i);
                let v = bf[&vec![k as i32 + 1, y, z]];
                assert!((wi - v).abs() < 1e-12, "k={k} ({y},{z}): {wi} vs {v}");
            }
        }
    }

    #[test]
    fn large_planar_table_is_a_distribution() {
        let t = table_at_most(Dim::Two, 5000);
        assert_eq!(t.k, 4096);
        assert!((t.cdf.last().unwrap() - 1.0).abs() < 1e-12);
        // Symmetric about the face centre.
        let mid = t.k;
        assert!((t.probability(mid - 7) - t.probability(mid + 7)).abs() < 1e-15);
        assert_eq!(table_at_most(Dim::Two, 20).k, 16);
        assert_eq!(table_at_most(Dim::Three, 70).k, 64);
        assert_eq!(table_at_most(Dim::Three, 1).k, 1);
    }
}
