//! Globally adaptive Gauss–Kronrod (7/15) quadrature on finite, half-infinite
//! and infinite intervals.
//!
//! Semi-infinite pieces are mapped onto `[0, 1)` with `x = a + u / (1 - u)`.
//! Every piece lives in one priority queue, so refinement always goes to the
//! interval with the largest error estimate, wherever it is.

use std::cmp::Ordering;
use std::collections::BinaryHeap;

use crate::error::{invalid, Error, Result};

const XGK: [f64; 8] = [
    0.991_455_371_120_812_639_206_854_697_526_329,
    0.949_107_912_342_758_524_526_189_684_047_851,
    0.864_864_423_359_769_072_789_712_788_640_926,
    0.741_531_185_599_394_439_863_864_773_280_788,
    0.586_087_235_467_691_130_294_144_845_693_013,
    0.405_845_151_377_397_166_906_606_412_076_961,
    0.207_784_955_007_898_467_600_689_403_773_245,
    0.0,
];

const WGK: [f64; 8] = [
    0.022_935_322_010_529_224_963_732_008_058_970,
    0.063_092_092_629_978_553_290_700_663_189_204,
    0.104_790_010_322_250_183_839_876_322_541_518,
    0.140_653_259_715_525_918_745_189_590_510_238,
    0.169_004_726_639_267_902_826_583_426_598_550,
    0.190_350_578_064_785_409_913_256_402_421_014,
    0.204_432_940_075_298_892_414_161_999_234_649,
    0.209_482_141_084_727_828_012_999_174_891_714,
];

// Gauss weights for the nodes XGK[1], XGK[3], XGK[5], XGK[7].
const WG: [f64; 4] = [
    0.129_484_966_168_869_693_270_611_432_679_082,
    0.279_705_391_489_276_667_901_467_771_423_780,
    0.381_830_050_505_118_944_950_369_775_488_975,
    0.417_959_183_673_469_387_755_102_040_816_327,
];

#[derive(Debug, Clone, Copy)]
pub struct QuadOptions {
    pub abs_tol: f64,
    pub rel_tol: f64,
    pub max_subdivisions: usize,
}

impl Default for QuadOptions {
    fn default() -> Self {
        Self {
            abs_tol: 1e-10,
            rel_tol: 1e-12,
            max_subdivisions: 20_000,
        }
    }
}

impl QuadOptions {
    pub fn with_abs_tol(abs_tol: f64) -> Self {
        Self {
            abs_tol,
            rel_tol: 0.0,
            ..Self::default()
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct QuadResult {
    pub value: f64,
    pub abs_error: f64,
    pub evaluations: usize,
}

#[derive(Debug, Clone, Copy)]
enum Map {
    Identity,
    /// `x = origin + u / (1 - u)`, `u` in `[0, 1)`.
    Upper(f64),
    /// `x = origin - u / (1 - u)`, `u` in `[0, 1)`.
    Lower(f64),
}

impl Map {
    #[inline]
    fn eval<F: Fn(f64) -> f64>(&self, f: &F, u: f64) -> f64 {
        match *self {
            Map::Identity => f(u),
            Map::Upper(a) | Map::Lower(a) => {
                let s = 1.0 - u;
                if s <= 0.0 {
                    return 0.0;
                }
                let jac = 1.0 / (s * s);
                let dx = u / s;
                let x = if matches!(self, Map::Upper(_)) { a + dx } else { a - dx };
                let y = f(x);
                if y == 0.0 {
                    0.0
                } else {
                    y * jac
                }
            }
        }
    }
}

struct Piece {
    map: Map,
    lo: f64,
    hi: f64,
    value: f64,
    error: f64,
}

impl PartialEq for Piece {
    fn eq(&self, other: &Self) -> bool {
        self.error == other.error
    }
}
impl Eq for Piece {}
impl PartialOrd for Piece {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}
impl Ord for Piece {
    fn cmp(&self, other: &Self) -> Ordering {
        self.error.total_cmp(&other.error)
    }
}

fn kronrod<F: Fn(f64) -> f64>(f: &F, map: Map, lo: f64, hi: f64) -> (f64, f64) {
    let center = 0.5 * (lo + hi);
    let half = 0.5 * (hi - lo);
    let fc = map.eval(f, center);
    let mut res_k = WGK[7] * fc;
    let mut res_g = WG[3] * fc;
    let mut res_abs = res_k.abs();
    let mut fv = [(0.0, 0.0); 7];
    for j in 0..7 {
        let dx = half * XGK[j];
        let f1 = map.eval(f, center - dx);
        let f2 = map.eval(f, center + dx);
        fv[j] = (f1, f2);
        res_k += WGK[j] * (f1 + f2);
        res_abs += WGK[j] * (f1.abs() + f2.abs());
        if j % 2 == 1 {
            res_g += WG[j / 2] * (f1 + f2);
        }
    }
    let mean = 0.5 * res_k;
    let mut res_asc = WGK[7] * (fc - mean).abs();
    for j in 0..7 {
        res_asc += WGK[j] * ((fv[j].0 - mean).abs() + (fv[j].1 - mean).abs());
    }
    let value = res_k * half;
    let res_abs = res_abs * half.abs();
    let res_asc = res_asc * half.abs();
    let mut err = ((res_k - res_g) * half).abs();
    if res_asc != 0.0 && err != 0.0 {
        err = res_asc * (200.0 * err / res_asc).powf(1.5).min(1.0);
    }
    if res_abs > f64::MIN_POSITIVE / (50.0 * f64::EPSILON) {
        err = err.max(50.0 * f64::EPSILON * res_abs);
    }
    (value, err)
}

/// Integrates `f` over `[a, b]`; either end may be infinite.
pub fn integrate<F: Fn(f64) -> f64>(f: F, a: f64, b: f64, opts: QuadOptions) -> Result<QuadResult> {
    integrate_with_breakpoints(f, &[a, b], opts)
}

/// Integrates `f` over `[points[0], points[last]]`, splitting at every
/// interior point. Put kinks and discontinuities in `points`.
pub fn integrate_with_breakpoints<F: Fn(f64) -> f64>(
    f: F,
    points: &[f64],
    opts: QuadOptions,
) -> Result<QuadResult> {
    if points.len() < 2 {
        return invalid("need at least two integration limits");
    }
    if points.iter().any(|p| p.is_nan()) {
        return invalid("integration limits must not be NaN");
    }
    if points.windows(2).any(|w| w[0] > w[1]) {
        return invalid("integration limits must be non-decreasing");
    }
    if points[1..points.len() - 1].iter().any(|p| !p.is_finite()) {
        return invalid("interior breakpoints must be finite");
    }

    let mut segments = Vec::new();
    for w in points.windows(2) {
        let (a, b) = (w[0], w[1]);
        if a == b {
            continue;
        }
        match (a.is_finite(), b.is_finite()) {
            (true, true) => segments.push((Map::Identity, a, b)),
            (true, false) => segments.push((Map::Upper(a), 0.0, 1.0)),
            (false, true) => segments.push((Map::Lower(b), 0.0, 1.0)),
            (false, false) => {
                segments.push((Map::Lower(0.0), 0.0, 1.0));
                segments.push((Map::Upper(0.0), 0.0, 1.0));
            }
        }
    }

    let mut heap = BinaryHeap::new();
    let mut evaluations = 0;
    for (map, lo, hi) in segments {
        let (value, error) = kronrod(&f, map, lo, hi);
        evaluations += 15;
        heap.push(Piece { map, lo, hi, value, error });
    }

    let totals = |heap: &BinaryHeap<Piece>| {
        let mut v = 0.0;
        let mut e = 0.0;
        for p in heap.iter() {
            v += p.value;
            e += p.error;
        }
        (v, e)
    };

    let mut subdivisions = 0;
    loop {
        let (value, error) = totals(&heap);
        if !value.is_finite() || !error.is_finite() {
            return Err(Error::Numeric(format!(
                "integrand produced non-finite values (estimate {value}, error {error})"
            )));
        }
        let target = opts.abs_tol.max(opts.rel_tol * value.abs());
        if error <= target {
            return Ok(QuadResult {
                value,
                abs_error: error,
                evaluations,
            });
        }
        if subdivisions >= opts.max_subdivisions {
            return Err(Error::Numeric(format!(
                "quadrature did not converge after {subdivisions} subdivisions: \
                 estimate {value}, error estimate {error}, target {target}"
            )));
        }
        let worst = heap.pop().expect("heap is never empty");
        let mid = 0.5 * (worst.lo + worst.hi);
        if mid <= worst.lo || mid >= worst.hi {
            return Err(Error::Numeric(format!(
                "interval [{}, {}] cannot be bisected further: estimate {value}, error estimate {error}",
                worst.lo, worst.hi
            )));
        }
        let (v1, e1) = kronrod(&f, worst.map, worst.lo, mid);
        let (v2, e2) = kronrod(&f, worst.map, mid, worst.hi);
        evaluations += 30;
        heap.push(Piece { map: worst.map, lo: worst.lo, hi: mid, value: v1, error: e1 });
        heap.push(Piece { map: worst.map, lo: mid, hi: worst.hi, value: v2, error: e2 });
        subdivisions += 1;
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn weights_sum_to_interval_length() {
        let k: f64 = 2.0 * WGK[..7].iter().sum::<f64>() + WGK[7];
        let g: f64 = 2.0 * WG[..3].iter().sum::<f64>() + WG[3];
        assert!((k - 2.0).abs() < 1e-15);
        assert!((g - 2.0).abs() < 1e-15);
    }

    #[test]
    fn single_rule_is_exact_for_polynomials() {
        // Kronrod-15 is exact through degree 22.
        for deg in 0..=22 {
            let (v, _) = kronrod(&|x: f64| x.powi(deg), Map::Identity, 0.0, 1.0);
            let exact = 1.0 / (deg as f64 + 1.0);
            assert!((v - exact).abs() < 1e-14, "degree {deg}: {v} vs {exact}");
        }
    }

    #[test]
    fn gaussian_over_real_line() {
        let r = integrate(
            |x| (-x * x / 2.0).exp(),
            f64::NEG_INFINITY,
            f64::INFINITY,
            QuadOptions::with_abs_tol(1e-12),
        )
        .unwrap();
        assert!((r.value - (2.0 * std::f64::consts::PI).sqrt()).abs() < 1e-11);
    }

    #[test]
    fn exponential_tail() {
        let r = integrate(|x| (-x).exp(), 3.0, f64::INFINITY, QuadOptions::default()).unwrap();
        assert!((r.value - (-3.0f64).exp()).abs() < 1e-12);
        let r = integrate(|x| x.exp(), f64::NEG_INFINITY, -1.0, QuadOptions::default()).unwrap();
        assert!((r.value - (-1.0f64).exp()).abs() < 1e-12);
    }

    #[test]
    fn kinked_integrand_with_breakpoint() {
        let r = integrate_with_breakpoints(|x: f64| x.abs(), &[-1.0, 0.0, 2.0], QuadOptions::default())
            .unwrap();
        assert!((r.value - 2.5).abs() < 1e-14);
        // Same integral without the breakpoint still converges, just slower.
        let r = integrate(|x: f64| (x - 0.3).abs(), -1.0, 2.0, QuadOptions::default()).unwrap();
        assert!((r.value - (0.5 * 1.3 * 1.3 + 0.5 * 1.7 * 1.7)).abs() < 1e-10);
    }

    #[test]
    fn reports_non_convergence() {
        let opts = QuadOptions { abs_tol: 1e-14, rel_tol: 0.0, max_subdivisions: 3 };
        let err = integrate(|x: f64| 1.0 / x.sqrt(), 0.0, 1.0, opts).unwrap_err();
        assert!(matches!(err, Error::Numeric(_)));
    }

    #[test]
    fn rejects_bad_limits() {
        assert!(integrate(|x| x, 1.0, 0.0, QuadOptions::default()).is_err());
        assert!(integrate(|x| x, f64::NAN, 0.0, QuadOptions::default()).is_err());
    }
}
