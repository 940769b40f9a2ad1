//! Globally adaptive Gauss–Kronrod quadrature with infinite-range maps and
//! Wynn epsilon acceleration for oscillatory tails.

use num_complex::Complex64;
use std::cmp::Ordering;
use std::collections::BinaryHeap;
use std::ops::{Add, Mul, Sub};

/// Values that can be integrated: real scalars and complex numbers.
pub trait QuadValue:
    Copy + Default + Add<Output = Self> + Sub<Output = Self> + Mul<f64, Output = Self>
{
    fn norm(self) -> f64;
    fn finite(self) -> bool;
}

impl QuadValue for f64 {
    fn norm(self) -> f64 {
        self.abs()
    }
    fn finite(self) -> bool {
        self.is_finite()
    }
}

impl QuadValue for Complex64 {
    fn norm(self) -> f64 {
        self.re.abs().max(self.im.abs())
    }
    fn finite(self) -> bool {
        self.re.is_finite() && self.im.is_finite()
    }
}

/// Up to three coordinates integrated together.
#[derive(Debug, Clone, Copy, Default, PartialEq)]
pub struct V3(pub [f64; 3]);

impl Add for V3 {
    type Output = V3;
    fn add(self, o: V3) -> V3 {
        V3([self.0[0] + o.0[0], self.0[1] + o.0[1], self.0[2] + o.0[2]])
    }
}

impl Sub for V3 {
    type Output = V3;
    fn sub(self, o: V3) -> V3 {
        V3([self.0[0] - o.0[0], self.0[1] - o.0[1], self.0[2] - o.0[2]])
    }
}

impl Mul<f64> for V3 {
    type Output = V3;
    fn mul(self, s: f64) -> V3 {
        V3([self.0[0] * s, self.0[1] * s, self.0[2] * s])
    }
}

impl QuadValue for V3 {
    fn norm(self) -> f64 {
        self.0.iter().fold(0.0, |m, x| m.max(x.abs()))
    }
    fn finite(self) -> bool {
        self.0.iter().all(|x| x.is_finite())
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Tol {
    pub abs: f64,
    pub rel: f64,
    pub max_intervals: usize,
}

impl Tol {
    pub const fn new(abs: f64, rel: f64) -> Self {
        Tol {
            abs,
            rel,
            max_intervals: 100_000,
        }
    }

    pub const fn with_limit(mut self, max_intervals: usize) -> Self {
        self.max_intervals = max_intervals;
        self
    }
}

impl Default for Tol {
    fn default() -> Self {
        Tol::new(1e-13, 1e-12)
    }
}

#[derive(Debug, Clone, Copy)]
pub struct Quad<T> {
    pub value: T,
    pub error: f64,
    pub evals: usize,
    pub converged: bool,
}

const XGK: [f64; 11] = [
    0.995_657_163_025_808_080_735_527_280_689_003,
    0.973_906_528_517_171_720_077_964_012_084_452,
    0.930_157_491_355_708_226_001_207_180_059_508,
    0.865_063_366_688_984_510_732_096_688_423_493,
    0.780_817_726_586_416_897_063_717_578_345_042,
    0.679_409_568_299_024_406_234_327_365_114_874,
    0.562_757_134_668_604_683_339_000_099_272_694,
    0.433_395_394_129_247_190_799_265_943_165_784,
    0.294_392_862_701_460_198_131_126_603_103_866,
    0.148_874_338_981_631_210_884_826_001_129_720,
    0.0,
];
const WG: [f64; 5] = [
    0.066_671_344_308_688_137_593_568_809_893_332,
    0.149_451_349_150_580_593_145_776_339_657_697,
    0.219_086_362_515_982_043_995_534_934_228_163,
    0.269_266_719_309_996_355_091_226_921_569_469,
    0.295_524_224_714_752_870_173_892_994_651_338,
];
const WGK: [f64; 11] = [
    0.011_694_638_867_371_874_278_064_396_062_192,
    0.032_558_162_307_964_727_478_818_972_459_390,
    0.054_755_896_574_351_996_031_381_300_244_580,
    0.075_039_674_810_919_952_767_043_140_916_190,
    0.093_125_454_583_697_605_535_065_465_083_366,
    0.109_387_158_802_297_641_899_210_590_325_805,
    0.123_491_976_262_065_851_077_958_109_831_074,
    0.134_709_217_311_473_325_928_054_001_771_707,
    0.142_775_938_577_060_080_797_094_273_138_717,
    0.147_739_104_901_338_491_374_841_515_972_068,
    0.149_445_554_002_916_905_664_936_468_389_821,
];

#[derive(Debug, Clone, Copy)]
enum Map {
    Id,
    /// x = a + t / (1 - t) on t in [0, 1)
    Right(f64),
    /// x = b - t / (1 - t) on t in [0, 1)
    Left(f64),
}

impl Map {
    #[inline]
    fn apply<T: QuadValue, F: Fn(f64) -> T>(&self, f: &F, t: f64) -> T {
        match *self {
            Map::Id => f(t),
            Map::Right(a) => {
                let s = 1.0 - t;
                let x = a + t / s;
                if !x.is_finite() {
                    return T::default();
                }
                f(x) * (1.0 / (s * s))
            }
            Map::Left(b) => {
                let s = 1.0 - t;
                let x = b - t / s;
                if !x.is_finite() {
                    return T::default();
                }
                f(x) * (1.0 / (s * s))
            }
        }
    }
}

struct Seg<T> {
    lo: f64,
    hi: f64,
    map: Map,
    value: T,
    err: f64,
}

impl<T> PartialEq for Seg<T> {
    fn eq(&self, other: &Self) -> bool {
        self.err.total_cmp(&other.err) == Ordering::Equal
    }
}
impl<T> Eq for Seg<T> {}
impl<T> PartialOrd for Seg<T> {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}
impl<T> Ord for Seg<T> {
    fn cmp(&self, other: &Self) -> Ordering {
        self.err.total_cmp(&other.err)
    }
}

fn gk21<T: QuadValue, F: Fn(f64) -> T>(f: &F, map: Map, lo: f64, hi: f64) -> (T, f64) {
    let center = 0.5 * (lo + hi);
    let half = 0.5 * (hi - lo);
    let fc = map.apply(f, center);
    let mut resg = T::default();
    let mut resk = fc * WGK[10];
    let mut resabs = fc.norm() * WGK[10];
    let mut fv1 = [T::default(); 10];
    let mut fv2 = [T::default(); 10];
    for j in 0..10 {
        let dx = half * XGK[j];
        let f1 = map.apply(f, center - dx);
        let f2 = map.apply(f, center + dx);
        fv1[j] = f1;
        fv2[j] = f2;
        resk = resk + (f1 + f2) * WGK[j];
        resabs += WGK[j] * (f1.norm() + f2.norm());
        if j % 2 == 1 {
            resg = resg + (f1 + f2) * WG[j / 2];
        }
    }
    let mean = resk * 0.5;
    let mut resasc = WGK[10] * (fc - mean).norm();
    for j in 0..10 {
        resasc += WGK[j] * ((fv1[j] - mean).norm() + (fv2[j] - mean).norm());
    }
    let result = resk * half;
    let resabs = resabs * half.abs();
    let resasc = resasc * half.abs();
    let mut err = ((resk - resg) * half).norm();
    if resasc != 0.0 && err != 0.0 {
        err = resasc * (200.0 * err / resasc).powf(1.5).min(1.0);
    }
    if resabs > f64::MIN_POSITIVE / (50.0 * f64::EPSILON) {
        err = err.max(50.0 * f64::EPSILON * resabs);
    }
    if !result.finite() {
        err = f64::INFINITY;
    }
    (result, err)
}

/// Integrates `f` over `[a, b]`; either limit may be infinite.
pub fn integrate<T: QuadValue, F: Fn(f64) -> T>(f: F, a: f64, b: f64, tol: Tol) -> Quad<T> {
    integrate_breaks(f, &[a, b], tol)
}

/// Integrates `f` over the union of consecutive pieces of `points`, which must be
/// sorted. Interior points are places where the integrand may be non-smooth.
pub fn integrate_breaks<T: QuadValue, F: Fn(f64) -> T>(f: F, points: &[f64], tol: Tol) -> Quad<T> {
    let mut pts: Vec<f64> = points.iter().copied().filter(|x| !x.is_nan()).collect();
    pts.dedup();
    if pts.len() < 2 {
        return Quad {
            value: T::default(),
            error: 0.0,
            evals: 0,
            converged: true,
        };
    }
    let (first, last) = (pts[0], pts[pts.len() - 1]);
    if first > last {
        let mut rev = pts.clone();
        rev.reverse();
        let q = integrate_breaks(f, &rev, tol);
        return Quad {
            value: q.value * -1.0,
            ..q
        };
    }
    // A doubly infinite range needs one finite split point.
    if first == f64::NEG_INFINITY && last == f64::INFINITY && pts.len() == 2 {
        pts.insert(1, 0.0);
    }

    let mut heap: BinaryHeap<Seg<T>> = BinaryHeap::new();
    let mut done: Vec<Seg<T>> = Vec::new();
    let mut evals = 0usize;
    for w in pts.windows(2) {
        let (lo, hi) = (w[0], w[1]);
        if lo == hi {
            continue;
        }
        let (map, tlo, thi) = if lo == f64::NEG_INFINITY {
            (Map::Left(hi), 0.0, 1.0)
        } else if hi == f64::INFINITY {
            (Map::Right(lo), 0.0, 1.0)
        } else {
            (Map::Id, lo, hi)
        };
        let (value, err) = gk21(&f, map, tlo, thi);
        evals += 21;
        heap.push(Seg {
            lo: tlo,
            hi: thi,
            map,
            value,
            err,
        });
    }

    let total = |heap: &BinaryHeap<Seg<T>>, done: &Vec<Seg<T>>| {
        let mut v = T::default();
        let mut e = 0.0;
        for s in heap.iter().chain(done.iter()) {
            v = v + s.value;
            e += s.err;
        }
        (v, e)
    };

    let (mut value, mut error) = total(&heap, &done);
    let mut count = heap.len();
    let mut converged = false;
    loop {
        if !value.finite() || error.is_nan() {
            break;
        }
        let target = tol.abs.max(tol.rel * value.norm());
        if error <= target {
            converged = true;
            break;
        }
        if count >= tol.max_intervals {
            break;
        }
        let Some(seg) = heap.pop() else {
            break;
        };
        let mid = 0.5 * (seg.lo + seg.hi);
        if !(mid > seg.lo && mid < seg.hi) || (seg.hi - seg.lo) < 1e-15 * mid.abs().max(1e-300) {
            done.push(seg);
            if heap.is_empty() {
                break;
            }
            continue;
        }
        let (v1, e1) = gk21(&f, seg.map, seg.lo, mid);
        let (v2, e2) = gk21(&f, seg.map, mid, seg.hi);
        evals += 42;
        value = value - seg.value + v1 + v2;
        error = error - seg.err + e1 + e2;
        heap.push(Seg {
            lo: seg.lo,
            hi: mid,
            map: seg.map,
            value: v1,
            err: e1,
        });
        heap.push(Seg {
            lo: mid,
            hi: seg.hi,
            map: seg.map,
            value: v2,
            err: e2,
        });
        count += 1;
        // Refresh the running sums periodically to keep cancellation drift out.
        if count % 64 == 0 {
            let (v, e) = total(&heap, &done);
            value = v;
            error = e;
        }
    }
    let (v, e) = total(&heap, &done);
    Quad {
        value: v,
        error: e,
        evals,
        converged: converged || e <= tol.abs.max(tol.rel * v.norm()),
    }
}

/// Limit of a slowly converging sequence of partial sums by the Wynn epsilon
/// algorithm. Returns the estimate and an error indicator.
pub fn wynn_epsilon(partial: &[f64]) -> (f64, f64) {
    let n = partial.len();
    if n == 0 {
        return (0.0, f64::INFINITY);
    }
    if n < 3 {
        let last = partial[n - 1];
        let err = if n == 2 {
            (partial[1] - partial[0]).abs()
        } else {
            f64::INFINITY
        };
        return (last, err);
    }
    // e[k] holds the current column of the epsilon table.
    let mut prev: Vec<f64> = vec![0.0; n + 1];
    let mut cur: Vec<f64> = partial.to_vec();
    let mut best = partial[n - 1];
    let mut best_err = (partial[n - 1] - partial[n - 2]).abs();
    let mut col = 0usize;
    while cur.len() > 1 {
        let mut next = Vec::with_capacity(cur.len() - 1);
        for i in 0..cur.len() - 1 {
            let d = cur[i + 1] - cur[i];
            let base = if col == 0 { 0.0 } else { prev[i + 1] };
            if d == 0.0 || !d.is_finite() {
                next.push(f64::INFINITY);
            } else {
                next.push(base + 1.0 / d);
            }
        }
        col += 1;
        // Odd columns are auxiliary; even columns are estimates.
        if col % 2 == 0 && next.len() >= 2 {
            let m = next.len();
            let (a, b) = (next[m - 1], next[m - 2]);
            if a.is_finite() && b.is_finite() {
                let e = (a - b).abs();
                if e < best_err {
                    best = a;
                    best_err = e;
                }
            }
        }
        prev = cur;
        cur = next;
    }
    (best, best_err)
}

/// Complex version of [`wynn_epsilon`], applied to each component.
pub fn wynn_epsilon_c(partial: &[Complex64]) -> (Complex64, f64) {
    let re: Vec<f64> = partial.iter().map(|z| z.re).collect();
    let im: Vec<f64> = partial.iter().map(|z| z.im).collect();
    let (r, er) = wynn_epsilon(&re);
    let (i, ei) = wynn_epsilon(&im);
    (Complex64::new(r, i), er.max(ei))
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::f64::consts::PI;

    #[test]
    fn polynomial_is_exact() {
        let q = integrate(|x: f64| x.powi(5) - 2.0 * x, 0.0, 2.0, Tol::default());
        assert!(q.converged);
        assert!((q.value - (64.0 / 6.0 - 4.0)).abs() < 1e-13);
    }

    #[test]
    fn half_line_exponential() {
        let q = integrate(|x: f64| (-x).exp(), 0.0, f64::INFINITY, Tol::default());
        assert!((q.value - 1.0).abs() < 1e-12, "{}", q.value);
    }

    #[test]
    fn whole_line_gaussian() {
        let q = integrate(|x: f64| (-x * x / 2.0).exp(), f64::NEG_INFINITY, f64::INFINITY, Tol::default());
        assert!((q.value - (2.0 * PI).sqrt()).abs() < 1e-12);
    }

    #[test]
    fn endpoint_singularity() {
        let q = integrate(|x: f64| x.powf(-0.5), 0.0, 1.0, Tol::default());
        assert!(q.converged);
        assert!((q.value - 2.0).abs() < 1e-11, "{}", q.value);
    }

    #[test]
    fn reversed_limits_flip_sign() {
        let q = integrate(|x: f64| x, 1.0, 0.0, Tol::default());
        assert!((q.value + 0.5).abs() < 1e-15);
    }

    #[test]
    fn complex_integrand() {
        let q = integrate(|x: f64| Complex64::new(0.0, x).exp(), 0.0, PI, Tol::default());
        assert!((q.value - Complex64::new(0.0, 2.0)).norm() < 1e-13);
    }

    #[test]
    fn breakpoints_handle_kinks() {
        let q = integrate_breaks(|x: f64| (x - 0.3).abs(), &[0.0, 0.3, 1.0], Tol::default());
        assert!((q.value - (0.045 + 0.245)).abs() < 1e-14);
    }

    #[test]
    fn wynn_accelerates_alternating_series() {
        // log 2 = 1 - 1/2 + 1/3 - ...
        let mut s = 0.0;
        let partial: Vec<f64> = (1..=20)
            .map(|k| {
                s += if k % 2 == 1 { 1.0 } else { -1.0 } / k as f64;
                s
            })
            .collect();
        let (v, _) = wynn_epsilon(&partial);
        assert!((v - 2f64.ln()).abs() < 1e-12, "{v}");
    }
}
