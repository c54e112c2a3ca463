#![allow(dead_code)]

//! Independent oracles shared by the integration tests.

use std::f64::consts::PI;

/// Potential kernel from a finite-volume recurrence: solve
/// `mean of neighbours - v = δ₀` on the lattice disk of radius `radius`
/// with Dirichlet data `(2/π) ln|x|` outside it. Then `a = v - v(0)` and
/// the fitted additive constant is `-v(0)`. The boundary error is a
/// `cos 4θ / r²` mode whose harmonic extension is negligible near the
/// origin, so the small-|x| values converge quickly.
pub struct RecurrenceKernel {
    radius: i64,
    side: usize,
    v: Vec<f64>,
}

impl RecurrenceKernel {
    pub fn solve(radius: i64) -> RecurrenceKernel {
        let side = (2 * radius + 3) as usize;
        let idx = |x: i64, y: i64| ((y + radius + 1) as usize) * side + (x + radius + 1) as usize;
        let inside = |x: i64, y: i64| x * x + y * y <= radius * radius;
        let n = side * side;
        let mut boundary = vec![0.0; n];
        let mut interior = vec![false; n];
        for y in -radius - 1..=radius + 1 {
            for x in -radius - 1..=radius + 1 {
                if inside(x, y) {
                    interior[idx(x, y)] = true;
                } else {
                    let r = ((x * x + y * y) as f64).sqrt();
                    boundary[idx(x, y)] = 2.0 / PI * r.ln();
                }
            }
        }
        // Operator L v = 4v - sum of neighbours (SPD on the interior).
        let apply = |v: &[f64], out: &mut [f64]| {
            for y in -radius..=radius {
                for x in -radius..=radius {
                    let i = idx(x, y);
                    if !interior[i] {
                        continue;
                    }
                    let mut s = 4.0 * v[i];
                    for j in [idx(x + 1, y), idx(x - 1, y), idx(x, y + 1), idx(x, y - 1)] {
                        if interior[j] {
                            s -= v[j];
                        }
                    }
                    out[i] = s;
                }
            }
        };
        // Right-hand side: neighbours on the boundary, plus the source.
        let mut rhs = vec![0.0; n];
        for y in -radius..=radius {
            for x in -radius..=radius {
                let i = idx(x, y);
                if !interior[i] {
                    continue;
                }
                for j in [idx(x + 1, y), idx(x - 1, y), idx(x, y + 1), idx(x, y - 1)] {
                    if !interior[j] {
                        rhs[i] += boundary[j];
                    }
                }
            }
        }
        rhs[idx(0, 0)] -= 4.0;
        let mut v = vec![0.0; n];
        let mut r = rhs.clone();
        let mut p = r.clone();
        let mut ap = vec![0.0; n];
        let dot = |a: &[f64], b: &[f64]| a.iter().zip(b).map(|(x, y)| x * y).sum::<f64>();
        let mut rr = dot(&r, &r);
        let stop = 1e-28 * rr.max(1.0);
        for _ in 0..20 * n {
            if rr <= stop {
                break;
            }
            apply(&p, &mut ap);
            let alpha = rr / dot(&p, &ap);
            for i in 0..n {
                v[i] += alpha * p[i];
                r[i] -= alpha * ap[i];
            }
            let next = dot(&r, &r);
            let beta = next / rr;
            rr = next;
            for i in 0..n {
                p[i] = r[i] + beta * p[i];
            }
        }
        for i in 0..n {
            if !interior[i] {
                v[i] = boundary[i];
            }
        }
        RecurrenceKernel { radius, side, v }
    }

    fn raw(&self, x: i64, y: i64) -> f64 {
        let r = self.radius;
        self.v[((y + r + 1) as usize) * self.side + (x + r + 1) as usize]
    }

    pub fn value(&self, x: i64, y: i64) -> f64 {
        self.raw(x, y) - self.raw(0, 0)
    }

    pub fn constant(&self) -> f64 {
        -self.raw(0, 0)
    }
}
