//! Synthetic importance-sampling problems with known answers.
//!
//! | family           | proposal `q`                       | target `p`                         | `f(x)`  | `θ`    |
//! |------------------|------------------------------------|------------------------------------|---------|--------|
//! | `exponential`    | `Expo(rate ν)`                     | `Expo(1)`                          | `x`     | `1`    |
//! | `normal`         | `N(0, ν)`                          | `N(0, 1)`                          | `x`     | `0`    |
//! | `t21`            | `t₂₁(loc ν, scale 20/21)`          | `t₂₁(0, 1)`                        | `x`     | `0`    |
//! | `mv_normal`      | `t₂₁,ν(0.4·𝟙, 0.8·I)`, dimension ν | `N_ν(0, I)`                        | `Σ xᵢ`  | `0`    |
//! | `normal_mixture` | `N(0, 4)`                          | `0.8 N(0, 0.5) + 0.2 N(ν, 0.5)`    | `x`     | `0.2ν` |
//!
//! The second argument of `N(·, ·)` is a variance under
//! [`ScaleConvention::Variance`] and a standard deviation under
//! [`ScaleConvention::Sd`].

use std::f64::consts::PI;
use std::fmt;
use std::str::FromStr;

use rand::Rng;
use rand_distr::{ChiSquared, Distribution, Exp1, StandardNormal};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::balancing::ThresholdLadder;
use crate::error::{invalid, Error, Result};
use crate::quadrature::{integrate_with_breakpoints, QuadOptions};
use crate::rng::{self, Purpose};
use crate::weights::{clamp_unchecked, CompensatedSum, Sample};

const T_DF: f64 = 21.0;
const T21_SCALE: f64 = 20.0 / 21.0;
const MV_LOCATION: f64 = 0.4;
const MV_SCALE: f64 = 0.8;
const MIX_MAIN: f64 = 0.8;
const MIX_COMPONENT_SPREAD: f64 = 0.5;
const MIX_PROPOSAL_SPREAD: f64 = 4.0;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Family {
    Exponential,
    Normal,
    T21,
    MvNormal,
    NormalMixture,
}

impl Family {
    pub const ALL: [Family; 5] = [
        Family::Exponential,
        Family::Normal,
        Family::T21,
        Family::MvNormal,
        Family::NormalMixture,
    ];

    pub fn name(self) -> &'static str {
        match self {
            Family::Exponential => "exponential",
            Family::Normal => "normal",
            Family::T21 => "t21",
            Family::MvNormal => "mv_normal",
            Family::NormalMixture => "normal_mixture",
        }
    }

    /// Parameter grid used in the reference study.
    pub fn default_params(self) -> Vec<f64> {
        match self {
            Family::Exponential => vec![1.3, 1.5, 1.9, 2.0, 2.1, 3.0, 4.0, 10.0],
            Family::Normal => vec![0.9, 0.8, 0.7, 0.6, 0.5, 0.4, 0.3, 0.2],
            Family::T21 => vec![0.0, 0.5, 1.0, 1.5, 2.0, 2.5, 3.0],
            Family::MvNormal => vec![20.0, 40.0, 50.0, 80.0, 100.0],
            Family::NormalMixture => vec![1.0, 3.0, 5.0, 7.0, 9.0, 11.0, 12.0],
        }
    }

    /// Threshold ladder used in the reference study.
    pub fn default_ladder(self) -> ThresholdLadder {
        let levels = match self {
            Family::T21 => vec![550.0, 500.0, 400.0, 200.0, 100.0, 50.0, 5.0, 1.0],
            Family::MvNormal => vec![550.0, 500.0, 400.0, 200.0, 100.0, 50.0, 10.0],
            _ => vec![550.0, 500.0, 400.0, 200.0, 100.0, 10.0],
        };
        ThresholdLadder::new(levels).expect("static ladder is valid")
    }
}

impl fmt::Display for Family {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Family {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        let key = s.to_ascii_lowercase().replace('-', "_");
        Family::ALL
            .into_iter()
            .find(|f| f.name() == key || (key == "mvnormal" && *f == Family::MvNormal))
            .ok_or_else(|| Error::InvalidArgument(format!("unknown problem family {s:?}")))
    }
}

/// How the second argument of `N(a, b)` is read.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ScaleConvention {
    #[default]
    Variance,
    Sd,
}

impl ScaleConvention {
    fn variance(self, b: f64) -> f64 {
        match self {
            ScaleConvention::Variance => b,
            ScaleConvention::Sd => b * b,
        }
    }
}

impl FromStr for ScaleConvention {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "variance" | "var" => Ok(ScaleConvention::Variance),
            "sd" | "std" => Ok(ScaleConvention::Sd),
            other => invalid(format!("unknown scale convention {other:?}")),
        }
    }
}

/// A configured importance-sampling problem.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct IsProblem {
    pub family: Family,
    pub param: f64,
    pub convention: ScaleConvention,
}

fn ln_normal_pdf(x: f64, mean: f64, var: f64) -> f64 {
    let d = x - mean;
    -0.5 * (2.0 * PI * var).ln() - 0.5 * d * d / var
}

/// Log density of a location-scale Student t in `dim` dimensions with
/// isotropic scale matrix `scale2 · I`.
fn ln_mv_t_pdf(sq_mahalanobis: f64, dim: f64, df: f64, scale2: f64) -> f64 {
    libm::lgamma(0.5 * (df + dim)) - libm::lgamma(0.5 * df) - 0.5 * dim * (df * PI).ln() - 0.5 * dim * scale2.ln()
        - 0.5 * (df + dim) * (1.0 + sq_mahalanobis / df).ln()
}

pub fn make_problem(family: Family, param: f64) -> Result<IsProblem> {
    IsProblem::new(family, param, ScaleConvention::Variance)
}

impl IsProblem {
    pub fn new(family: Family, param: f64, convention: ScaleConvention) -> Result<Self> {
        if !param.is_finite() {
            return invalid(format!("{family} parameter must be finite, got {param}"));
        }
        match family {
            Family::Exponential | Family::Normal if param <= 0.0 => {
                return invalid(format!("{family} parameter must be positive, got {param}"));
            }
            Family::MvNormal if param < 1.0 || param.fract() != 0.0 => {
                return invalid(format!("mv_normal dimension must be a positive integer, got {param}"));
            }
            _ => {}
        }
        Ok(Self { family, param, convention })
    }

    pub fn dim(&self) -> usize {
        match self.family {
            Family::MvNormal => self.param as usize,
            _ => 1,
        }
    }

    pub fn true_theta(&self) -> f64 {
        match self.family {
            Family::Exponential => 1.0,
            Family::NormalMixture => (1.0 - MIX_MAIN) * self.param,
            _ => 0.0,
        }
    }

    pub fn integrand(&self, x: &[f64]) -> f64 {
        x.iter().sum()
    }

    pub fn ln_target_density(&self, x: &[f64]) -> f64 {
        let c = self.convention;
        match self.family {
            Family::Exponential => {
                if x[0] < 0.0 {
                    f64::NEG_INFINITY
                } else {
                    -x[0]
                }
            }
            Family::Normal => ln_normal_pdf(x[0], 0.0, 1.0),
            Family::T21 => ln_mv_t_pdf(x[0] * x[0], 1.0, T_DF, 1.0),
            Family::MvNormal => {
                let sq: f64 = x.iter().map(|v| v * v).sum();
                -0.5 * x.len() as f64 * (2.0 * PI).ln() - 0.5 * sq
            }
            Family::NormalMixture => {
                let var = c.variance(MIX_COMPONENT_SPREAD);
                let a = MIX_MAIN.ln() + ln_normal_pdf(x[0], 0.0, var);
                let b = (1.0 - MIX_MAIN).ln() + ln_normal_pdf(x[0], self.param, var);
                let hi = a.max(b);
                hi + ((a - hi).exp() + (b - hi).exp()).ln()
            }
        }
    }

    pub fn ln_proposal_density(&self, x: &[f64]) -> f64 {
        let c = self.convention;
        match self.family {
            Family::Exponential => {
                if x[0] < 0.0 {
                    f64::NEG_INFINITY
                } else {
                    self.param.ln() - self.param * x[0]
                }
            }
            Family::Normal => ln_normal_pdf(x[0], 0.0, c.variance(self.param)),
            Family::T21 => {
                let z = (x[0] - self.param) / T21_SCALE;
                ln_mv_t_pdf(z * z, 1.0, T_DF, T21_SCALE * T21_SCALE)
            }
            Family::MvNormal => {
                let sq: f64 = x.iter().map(|v| (v - MV_LOCATION) * (v - MV_LOCATION)).sum::<f64>() / MV_SCALE;
                ln_mv_t_pdf(sq, x.len() as f64, T_DF, MV_SCALE)
            }
            Family::NormalMixture => ln_normal_pdf(x[0], 0.0, c.variance(MIX_PROPOSAL_SPREAD)),
        }
    }

    pub fn target_density(&self, x: &[f64]) -> f64 {
        self.ln_target_density(x).exp()
    }

    pub fn proposal_density(&self, x: &[f64]) -> f64 {
        self.ln_proposal_density(x).exp()
    }

    /// `f(x) p(x) / q(x)`, evaluated in log space.
    pub fn weight(&self, x: &[f64]) -> Result<f64> {
        let lq = self.ln_proposal_density(x);
        if lq == f64::NEG_INFINITY {
            return Err(Error::Internal(format!(
                "{self:?}: proposal density vanishes at a drawn point"
            )));
        }
        let f = self.integrand(x);
        let w = if f == 0.0 { 0.0 } else { f * (self.ln_target_density(x) - lq).exp() };
        if !w.is_finite() {
            return Err(Error::Internal(format!("{self:?}: non-finite weight {w}")));
        }
        Ok(w)
    }

    /// Draws one point from the proposal into `out`.
    pub fn sample_proposal<R: Rng + ?Sized>(&self, rng: &mut R, out: &mut Vec<f64>) {
        out.clear();
        let c = self.convention;
        match self.family {
            Family::Exponential => {
                let e: f64 = Exp1.sample(rng);
                out.push(e / self.param);
            }
            Family::Normal => {
                let z: f64 = StandardNormal.sample(rng);
                out.push(c.variance(self.param).sqrt() * z);
            }
            Family::T21 => {
                let z: f64 = StandardNormal.sample(rng);
                let chi = chi_squared_21().sample(rng);
                out.push(self.param + T21_SCALE * z / (chi / T_DF).sqrt());
            }
            Family::MvNormal => {
                let d = self.dim();
                let chi = chi_squared_21().sample(rng);
                let mult = MV_SCALE.sqrt() / (chi / T_DF).sqrt();
                for _ in 0..d {
                    let z: f64 = StandardNormal.sample(rng);
                    out.push(MV_LOCATION + mult * z);
                }
            }
            Family::NormalMixture => {
                let z: f64 = StandardNormal.sample(rng);
                out.push(c.variance(MIX_PROPOSAL_SPREAD).sqrt() * z);
            }
        }
    }

    /// Support of the one-dimensional proposal.
    fn support(&self) -> (f64, f64) {
        match self.family {
            Family::Exponential => (0.0, f64::INFINITY),
            _ => (f64::NEG_INFINITY, f64::INFINITY),
        }
    }
}

fn chi_squared_21() -> ChiSquared<f64> {
    ChiSquared::new(T_DF).expect("positive degrees of freedom")
}

/// Draws `n` weights `Y_i = f(X_i) p(X_i) / q(X_i)` with `X_i ~ q`.
pub fn draw_weights<R: Rng + ?Sized>(problem: &IsProblem, n: usize, rng: &mut R) -> Result<Sample> {
    if n == 0 {
        return invalid("need at least one draw");
    }
    let mut x = Vec::with_capacity(problem.dim());
    let mut values = Vec::with_capacity(n);
    for _ in 0..n {
        problem.sample_proposal(rng, &mut x);
        values.push(problem.weight(&x)?);
    }
    Sample::new(values)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum BiasMethod {
    Quadrature,
    MegaMc,
}

/// Bias `b(M) = |E[Y^M] − θ|` at every ladder level.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BiasCurve {
    pub levels: Vec<f64>,
    /// `E[Y^M]` per level.
    pub winsorized_mean: Vec<f64>,
    pub bias: Vec<f64>,
    pub method: BiasMethod,
    /// Quadrature error estimate or Monte Carlo standard error, per level.
    pub stderr: Vec<f64>,
}

/// Points where `|w(x)| = level`, located by a grid scan and bisection.
fn clip_breakpoints(problem: &IsProblem, level: f64, lo: f64, hi: f64, grid: usize) -> Vec<f64> {
    let ln_level = level.ln();
    let g = |x: f64| -> f64 {
        let xs = [x];
        let f = problem.integrand(&xs).abs();
        if f == 0.0 {
            return f64::NEG_INFINITY;
        }
        f.ln() + problem.ln_target_density(&xs) - problem.ln_proposal_density(&xs) - ln_level
    };
    let step = (hi - lo) / grid as f64;
    let mut out = Vec::new();
    let mut prev_x = lo;
    let mut prev = g(lo);
    for i in 1..=grid {
        let x = lo + step * i as f64;
        let cur = g(x);
        if (prev > 0.0) != (cur > 0.0) && prev.is_finite() | cur.is_finite() {
            let (mut a, mut b) = (prev_x, x);
            let sign_a = prev > 0.0;
            for _ in 0..80 {
                let m = 0.5 * (a + b);
                if (g(m) > 0.0) == sign_a {
                    a = m;
                } else {
                    b = m;
                }
            }
            out.push(0.5 * (a + b));
        }
        prev_x = x;
        prev = cur;
    }
    out
}

/// Adds points at distances 1, 2, 4, … from both ends of every finite
/// segment longer than 2, so that a sharp feature next to a breakpoint is
/// never hidden inside one wide initial interval.
fn dyadic_refinement(points: &[f64]) -> Vec<f64> {
    let mut out = vec![points[0]];
    for w in points.windows(2) {
        let (a, b) = (w[0], w[1]);
        if a.is_finite() && b.is_finite() && b - a > 2.0 {
            let mut extra = Vec::new();
            let mut d = 1.0;
            while 2.0 * d < b - a {
                extra.push(a + d);
                extra.push(b - d);
                d *= 2.0;
            }
            extra.sort_by(f64::total_cmp);
            out.extend(extra);
        }
        out.push(b);
    }
    out.dedup();
    out
}

/// `E[Y^M]` by adaptive quadrature. One-dimensional problems only.
pub fn winsorized_expectation(problem: &IsProblem, level: f64, opts: QuadOptions) -> Result<(f64, f64)> {
    if problem.dim() != 1 {
        return invalid("quadrature bias oracle needs a one-dimensional problem");
    }
    let ln_level = level.ln();
    let integrand = |x: f64| -> f64 {
        let xs = [x];
        let lq = problem.ln_proposal_density(&xs);
        if lq == f64::NEG_INFINITY {
            return 0.0;
        }
        let f = problem.integrand(&xs);
        if f == 0.0 {
            return 0.0;
        }
        let lp = problem.ln_target_density(&xs);
        // Inside the band the integrand is f·p, outside it is ±M·q.
        if f.abs().ln() + lp - lq <= ln_level {
            f * lp.exp()
        } else {
            f.signum() * level * lq.exp()
        }
    };
    let (s_lo, s_hi) = problem.support();
    let span = 50.0 + 5.0 * level;
    let scan_lo = if s_lo.is_finite() { s_lo } else { -span };
    let scan_hi = span;
    let mut points = vec![s_lo];
    if !s_lo.is_finite() {
        points.push(scan_lo);
    }
    points.extend(clip_breakpoints(problem, level, scan_lo, scan_hi, 20_000));
    points.push(scan_hi);
    points.push(s_hi);
    points.sort_by(f64::total_cmp);
    points.dedup();
    let points = dyadic_refinement(&points);
    let r = integrate_with_breakpoints(integrand, &points, opts)?;
    Ok((r.value, r.abs_error))
}

/// Bias curve by quadrature, to absolute tolerance `abs_tol` per level.
pub fn bias_oracle_quadrature(problem: &IsProblem, ladder: &ThresholdLadder, abs_tol: f64) -> Result<BiasCurve> {
    let theta = problem.true_theta();
    let opts = QuadOptions::with_abs_tol(abs_tol);
    let mut curve = BiasCurve {
        levels: ladder.levels().to_vec(),
        winsorized_mean: Vec::with_capacity(ladder.len()),
        bias: Vec::with_capacity(ladder.len()),
        method: BiasMethod::Quadrature,
        stderr: Vec::with_capacity(ladder.len()),
    };
    for &level in ladder.levels() {
        let (mean, err) = winsorized_expectation(problem, level, opts).map_err(|e| match e {
            Error::Numeric(msg) => Error::Numeric(format!("{} ν={} M={level}: {msg}", problem.family, problem.param)),
            other => other,
        })?;
        curve.winsorized_mean.push(mean);
        curve.bias.push((mean - theta).abs());
        curve.stderr.push(err);
    }
    Ok(curve)
}

/// Bias curve by a large seeded Monte Carlo run of `draws` proposal samples.
pub fn bias_oracle_mc(problem: &IsProblem, ladder: &ThresholdLadder, draws: usize, seed: u64) -> Result<BiasCurve> {
    if draws < 2 {
        return invalid("Monte Carlo bias oracle needs at least two draws");
    }
    const CHUNK: usize = 1 << 16;
    let k = ladder.len();
    let chunks = draws.div_ceil(CHUNK);
    let partials: Vec<Result<Vec<(CompensatedSum, CompensatedSum)>>> = (0..chunks)
        .into_par_iter()
        .map(|c| {
            let mut rng = rng::stream(seed, 0, c as u32, Purpose::Draws);
            let mut acc = vec![(CompensatedSum::new(), CompensatedSum::new()); k];
            let mut x = Vec::with_capacity(problem.dim());
            let count = CHUNK.min(draws - c * CHUNK);
            for _ in 0..count {
                problem.sample_proposal(&mut rng, &mut x);
                let w = problem.weight(&x)?;
                for (slot, &level) in acc.iter_mut().zip(ladder.levels()) {
                    let v = clamp_unchecked(w, level);
                    slot.0.add(v);
                    slot.1.add(v * v);
                }
            }
            Ok(acc)
        })
        .collect();
    let mut sums = vec![(CompensatedSum::new(), CompensatedSum::new()); k];
    for part in partials {
        for (total, p) in sums.iter_mut().zip(part?) {
            total.0.add(p.0.total());
            total.1.add(p.1.total());
        }
    }
    let theta = problem.true_theta();
    let nf = draws as f64;
    let mut curve = BiasCurve {
        levels: ladder.levels().to_vec(),
        winsorized_mean: Vec::with_capacity(k),
        bias: Vec::with_capacity(k),
        method: BiasMethod::MegaMc,
        stderr: Vec::with_capacity(k),
    };
    for (s, s2) in sums {
        let mean = s.total() / nf;
        let var = (s2.total() / nf - mean * mean).max(0.0) * nf / (nf - 1.0);
        curve.winsorized_mean.push(mean);
        curve.bias.push((mean - theta).abs());
        curve.stderr.push((var / nf).sqrt());
    }
    Ok(curve)
}
