//! Lattice kernels: the planar potential kernel `a(x)` and the cubic
//! lattice Green's function `G0(x)` (expected visits to `x` by a walk
//! from the origin, counting time zero).
//!
//! Both come from the Fourier representation of the walk after one axis
//! is integrated in closed form:
//!
//! ```text
//! a(x)  = (2/π)  ∫_0^π (1 − cos(x₂θ) e^{−|x₁|s}) / sinh s dθ,          cosh s = 2 − cos θ
//! G0(x) = (3/π²) ∫∫_{[0,π]²} cos(x₂θ₂) cos(x₃θ₃) e^{−|x₁|s} / sinh s,  cosh s = 3 − cos θ₂ − cos θ₃
//! ```
//!
//! with coordinates sorted so that `|x₁|` is the largest. Values are
//! memoized in process-wide tables. Far from the origin `G0` comes from
//! its asymptotic expansion instead, since each quadrature costs tens of
//! milliseconds.

use std::f64::consts::{FRAC_PI_2, FRAC_PI_4, PI};
use std::sync::{OnceLock, RwLock};

use rustc_hash::FxHashMap;

const QUAD_TOL: f64 = 1e-15;

fn integrate(f: impl Fn(f64) -> f64 + Copy, a: f64, b: f64) -> f64 {
    if b <= a {
        return 0.0;
    }
    quadrature::integrate(f, a, b, QUAD_TOL).integral
}

/// Panel breakpoints on `[0, end]` adapted to the decay length `1/scale`.
fn panels(scale: f64, end: f64) -> Vec<f64> {
    let mut pts = vec![0.0];
    if scale > 0.0 {
        for m in [0.5, 2.0, 6.0, 16.0, 40.0] {
            let p = m / scale;
            if p < end {
                pts.push(p);
            }
        }
    }
    pts.push(end);
    pts
}

/// Direct evaluation of `a(x₁, x₂)` by quadrature (no caching).
pub fn potential_kernel_direct(x1: i64, x2: i64) -> f64 {
    let (mut p, mut q) = (x1.unsigned_abs() as f64, x2.unsigned_abs() as f64);
    if q > p {
        std::mem::swap(&mut p, &mut q);
    }
    if p == 0.0 {
        return 0.0;
    }
    let f = move |t: f64| {
        let c = 2.0 - t.cos();
        // s = acosh(c) computed from c − 1 = 1 − cos t to keep precision near 0.
        let cm1 = 2.0 * (0.5 * t).sin().powi(2);
        let s = (cm1 + (cm1 * (c + 1.0)).sqrt()).ln_1p();
        let sh = s.sinh();
        if sh == 0.0 {
            return p;
        }
        // 1 − cos(qt)·e^{−ps} = −expm1(−ps) + e^{−ps}(1 − cos(qt))
        let decay = (-p * s).exp();
        let num = -(-p * s).exp_m1() + decay * 2.0 * (0.5 * q * t).sin().powi(2);
        num / sh
    };
    let pts = panels(p, PI);
    let total: f64 = pts.windows(2).map(|w| integrate(f, w[0], w[1])).sum();
    2.0 / PI * total
}

/// Direct evaluation of the cubic-lattice Green's function (no caching).
pub fn lattice_green_direct(x: [i64; 3]) -> f64 {
    let mut c = [
        x[0].unsigned_abs() as f64,
        x[1].unsigned_abs() as f64,
        x[2].unsigned_abs() as f64,
    ];
    c.sort_by(|a, b| b.partial_cmp(a).unwrap());
    let [p, q, r] = c;
    // Polar coordinates on the quarter square [0,π]² remove the 1/|θ|
    // singularity at the origin.
    let radial = move |phi: f64| {
        let (sp, cp) = phi.sin_cos();
        let rmax = PI / cp.max(sp);
        let g = move |rho: f64| {
            if rho == 0.0 {
                // r / sinh s → 1 as r → 0
                return 1.0;
            }
            let t2 = rho * cp;
            let t3 = rho * sp;
            let cm1 = 2.0 * (0.5 * t2).sin().powi(2) + 2.0 * (0.5 * t3).sin().powi(2);
            let cc = 1.0 + cm1;
            let s = (cm1 + (cm1 * (cc + 1.0)).sqrt()).ln_1p();
            let sh = s.sinh();
            rho * (q * t2).cos() * (r * t3).cos() * (-p * s).exp() / sh
        };
        let scale = p / 3f64.sqrt();
        let pts = panels(scale, rmax);
        pts.windows(2).map(|w| integrate(g, w[0], w[1])).sum::<f64>()
    };
    let total = integrate(radial, 0.0, FRAC_PI_4) + integrate(radial, FRAC_PI_4, FRAC_PI_2);
    3.0 / (PI * PI) * total
}

/// Squared distance from which `G0` is taken from [`lattice_green_far`].
pub const FAR_FIELD_RADIUS2: i64 = 256;

/// Coefficients of the `r⁻⁵` and `r⁻⁷` corrections on the cubic-invariant
/// angular basis. They were fitted once to quadrature values at
/// `12 ≤ |x| ≤ 40`; the residual beyond `|x| = 16` is below `10⁻¹⁰`
/// (checked against quadrature in the tests).
const FAR_R5: [f64; 4] = [4.491_469_263_504_863, -12.794_404_476_007_111, -35.434_856_043_026_61, 9.021_363_788_256_437];
const FAR_R7: [f64; 7] = [
    -154.767_303_124_838_1,
    685.882_343_653_267_4,
    1_666.410_100_251_381,
    -976.988_089_712_194,
    -3_407.206_349_772_801,
    451.379_605_835_202_54,
    -114.678_191_804_908_78,
];

/// Asymptotic expansion of `G0(x)`: the continuum term `3/(2π|x|)`, its
/// exact first lattice correction and the fitted higher corrections.
pub fn lattice_green_far(x: [i64; 3]) -> f64 {
    let [a, b, c] = x.map(|v| v as f64);
    let r2 = a * a + b * b + c * c;
    let r = r2.sqrt();
    let q4 = (a.powi(4) + b.powi(4) + c.powi(4)) / (r2 * r2);
    let s3 = (a * a * b * b * c * c) / (r2 * r2 * r2);
    let r5 = [1.0, q4, s3, q4 * q4];
    let r7 = [1.0, q4, s3, q4 * q4, q4 * s3, q4 * q4 * q4, s3 * s3];
    let dot = |c: &[f64], f: &[f64]| c.iter().zip(f).map(|(c, f)| c * f).sum::<f64>();
    let tail = dot(&FAR_R5, &r5) + dot(&FAR_R7, &r7) / r2;
    3.0 / (2.0 * PI * r) * (1.0 + (5.0 * q4 - 3.0) / (8.0 * r2) + tail / (r2 * r2))
}

fn is_far(d: [i64; 3]) -> bool {
    d[0] * d[0] + d[1] * d[1] + d[2] * d[2] >= FAR_FIELD_RADIUS2
}

/// Triangular table of `a(i, j)` for `0 ≤ j ≤ i < extent`.
struct Table2 {
    extent: usize,
    data: Vec<f64>,
}

fn table2() -> &'static RwLock<Table2> {
    static T: OnceLock<RwLock<Table2>> = OnceLock::new();
    T.get_or_init(|| {
        RwLock::new(Table2 {
            extent: 0,
            data: Vec::new(),
        })
    })
}

fn tri(i: usize, j: usize) -> usize {
    i * (i + 1) / 2 + j
}

/// Makes sure `a(i, j)` is tabulated for all `|i|, |j| < extent`.
pub fn ensure_kernel_extent(extent: usize) {
    if table2().read().unwrap().extent >= extent {
        return;
    }
    let mut t = table2().write().unwrap();
    let start = t.extent;
    if start >= extent {
        return;
    }
    let target = extent.max(start + start / 2);
    t.data.resize(tri(target, 0), 0.0);
    for i in start..target {
        for j in 0..=i {
            t.data[tri(i, j)] = potential_kernel_direct(i as i64, j as i64);
        }
    }
    t.extent = target;
}

/// `a(x)` for a planar displacement, memoized.
pub fn potential_kernel_at(dx: i64, dy: i64) -> f64 {
    let (mut i, mut j) = (dx.unsigned_abs() as usize, dy.unsigned_abs() as usize);
    if j > i {
        std::mem::swap(&mut i, &mut j);
    }
    ensure_kernel_extent(i + 1);
    table2().read().unwrap().data[tri(i, j)]
}

/// Read-only view of the planar table for bulk lookups.
pub struct KernelView2<'a> {
    guard: std::sync::RwLockReadGuard<'a, Table2>,
}

impl KernelView2<'_> {
    /// Tabulates up to `extent` and returns a lock-holding view.
    pub fn with_extent(extent: usize) -> KernelView2<'static> {
        ensure_kernel_extent(extent);
        KernelView2 {
            guard: table2().read().unwrap(),
        }
    }

    #[inline]
    pub fn get(&self, dx: i32, dy: i32) -> f64 {
        let (mut i, mut j) = (dx.unsigned_abs() as usize, dy.unsigned_abs() as usize);
        if j > i {
            std::mem::swap(&mut i, &mut j);
        }
        self.guard.data[tri(i, j)]
    }
}

fn table3() -> &'static RwLock<FxHashMap<[u32; 3], f64>> {
    static T: OnceLock<RwLock<FxHashMap<[u32; 3], f64>>> = OnceLock::new();
    T.get_or_init(|| RwLock::new(FxHashMap::default()))
}

fn key3(d: [i64; 3]) -> [u32; 3] {
    let mut k = [
        d[0].unsigned_abs() as u32,
        d[1].unsigned_abs() as u32,
        d[2].unsigned_abs() as u32,
    ];
    k.sort_unstable_by(|a, b| b.cmp(a));
    k
}

/// `G0(x)` for a cubic displacement, memoized.
pub fn lattice_green_at(d: [i64; 3]) -> f64 {
    if is_far(d) {
        return lattice_green_far(d);
    }
    let k = key3(d);
    if let Some(v) = table3().read().unwrap().get(&k) {
        return *v;
    }
    let v = lattice_green_direct([k[0] as i64, k[1] as i64, k[2] as i64]);
    table3().write().unwrap().insert(k, v);
    v
}

/// Computes any missing `G0` entries for the given displacements.
pub fn prefetch_lattice_green(displacements: impl IntoIterator<Item = [i64; 3]>) {
    let missing: Vec<[u32; 3]> = {
        let t = table3().read().unwrap();
        let mut m: Vec<[u32; 3]> = displacements
            .into_iter()
            .filter(|d| !is_far(*d))
            .map(key3)
            .filter(|k| !t.contains_key(k))
            .collect();
        m.sort_unstable();
        m.dedup();
        m
    };
    if missing.is_empty() {
        return;
    }
    use rayon::prelude::*;
    let vals: Vec<([u32; 3], f64)> = missing
        .par_iter()
        .map(|k| (*k, lattice_green_direct([k[0] as i64, k[1] as i64, k[2] as i64])))
        .collect();
    let mut t = table3().write().unwrap();
    t.extend(vals);
}

/// Snapshot accessor for bulk `G0` lookups after [`prefetch_lattice_green`].
pub struct GreenView3<'a> {
    guard: std::sync::RwLockReadGuard<'a, FxHashMap<[u32; 3], f64>>,
}

impl GreenView3<'_> {
    pub fn new() -> GreenView3<'static> {
        GreenView3 {
            guard: table3().read().unwrap(),
        }
    }

    #[inline]
    pub fn get(&self, d: [i64; 3]) -> f64 {
        if is_far(d) {
            return lattice_green_far(d);
        }
        self.guard[&key3(d)]
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn planar_kernel_closed_forms() {
        assert_eq!(potential_kernel_direct(0, 0), 0.0);
        assert!((potential_kernel_direct(1, 0) - 1.0).abs() < 1e-13);
        assert!((potential_kernel_direct(1, 1) - 4.0 / PI).abs() < 1e-13);
        assert!((potential_kernel_direct(2, 0) - (4.0 - 8.0 / PI)).abs() < 1e-13);
        // a(2,2) = (4/π)(1 + 1/3)
        assert!((potential_kernel_direct(2, 2) - 16.0 / (3.0 * PI)).abs() < 1e-13);
    }

    #[test]
    fn planar_kernel_far_field() {
        // a(x) − (2/π)ln|x| approaches the lattice constant (2γ + ln 8)/π.
        let kappa = (2.0 * 0.577_215_664_901_532_9 + 8f64.ln()) / PI;
        let v = potential_kernel_direct(400, 300) - 2.0 / PI * 500f64.ln();
        assert!((v - kappa).abs() < 1e-6, "{v} vs {kappa}");
    }

    #[test]
    fn cubic_green_watson_constant() {
        let g0 = lattice_green_direct([0, 0, 0]);
        assert!((g0 - 1.516_386_059_151_978).abs() < 1e-11, "{g0}");
        let g1 = lattice_green_direct([1, 0, 0]);
        assert!((g0 - g1 - 1.0).abs() < 1e-11);
    }

    #[test]
    fn cubic_green_is_harmonic_off_origin() {
        for x in [[1i64, 0, 0], [2, 1, 0], [3, 2, 1], [5, 0, 2]] {
            let mut s = 0.0;
            for d in [[1, 0, 0], [-1, 0, 0], [0, 1, 0], [0, -1, 0], [0, 0, 1], [0, 0, -1]] {
                s += lattice_green_direct([x[0] + d[0], x[1] + d[1], x[2] + d[2]]);
            }
            let defect = lattice_green_direct(x) - s / 6.0;
            assert!(defect.abs() < 1e-11, "{x:?}: {defect}");
        }
        let far = lattice_green_direct([30, 0, 0]) * 2.0 * PI * 30.0 / 3.0;
        assert!((far - 1.0).abs() < 1e-3);
    }

    #[test]
    fn tables_match_direct() {
        assert_eq!(potential_kernel_at(-3, 7), potential_kernel_direct(7, 3));
        assert_eq!(lattice_green_at([-1, 2, 0]), lattice_green_direct([2, 1, 0]));
    }

    #[test]
    fn far_field_expansion_matches_quadrature() {
        // Points away from the fitting grid, including the axis and the
        // diagonal where the angular corrections are extreme.
        for x in [[16i64, 0, 0], [9, 9, 9], [16, 16, 0], [17, 4, 1], [23, 3, 1], [29, 28, 2], [45, 0, 0]] {
            let far = lattice_green_far(x);
            let direct = lattice_green_direct(x);
            assert!((far - direct).abs() < 2e-10, "{x:?}: {far} vs {direct}");
        }
        assert_eq!(lattice_green_at([0, -20, 3]), lattice_green_far([20, 3, 0]));
    }
}
