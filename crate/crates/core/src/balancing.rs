//! Threshold selection by the balancing principle.
//!
//! Given a ladder of winsorization levels `M_1 < ... < M_k`, the selector
//! returns the smallest level `M_*` such that every pair of levels at or
//! above it has winsorized means within `c * Φ(ŝ(M'), ŝ(M''))` of each
//! other, where `ŝ(M) = t σ̂^M / (√n − t)`. It starts at the top of the
//! ladder and descends while the condition keeps holding, which costs
//! `O(k (k + n))`.
//!
//! If `|Ȳ^M − θ| ≤ b(M) + ŝ(M)` holds at every level (with `b` the bias),
//! the chosen estimate is within `constant_c(c)` times the best
//! `b(M) + ŝ(M)` on the ladder.

use serde::{Deserialize, Serialize};

use crate::error::{invalid, Result};
use crate::normal::std_normal_sf;
use crate::weights::{spread_factor, winsorized_moments, Sample, WinsorSummary};

/// Candidate winsorization levels, sorted ascending with duplicates removed.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "Vec<f64>", into = "Vec<f64>")]
pub struct ThresholdLadder {
    levels: Vec<f64>,
}

impl ThresholdLadder {
    pub fn new(mut levels: Vec<f64>) -> Result<Self> {
        if levels.is_empty() {
            return invalid("threshold ladder must contain at least one level");
        }
        if let Some(bad) = levels.iter().find(|m| !(**m > 0.0) || !m.is_finite()) {
            return invalid(format!("threshold levels must be positive and finite, got {bad}"));
        }
        levels.sort_by(f64::total_cmp);
        levels.dedup();
        Ok(Self { levels })
    }

    /// `count` levels `top, top/ratio, top/ratio², ...`.
    pub fn geometric(top: f64, ratio: f64, count: usize) -> Result<Self> {
        if !(ratio > 1.0) || count == 0 {
            return invalid("geometric ladder needs ratio > 1 and at least one level");
        }
        Self::new((0..count).map(|i| top / ratio.powi(i as i32)).collect())
    }

    pub fn levels(&self) -> &[f64] {
        &self.levels
    }

    pub fn len(&self) -> usize {
        self.levels.len()
    }

    pub fn is_empty(&self) -> bool {
        false
    }

    pub fn max(&self) -> f64 {
        *self.levels.last().expect("ladder is non-empty")
    }

    pub fn min(&self) -> f64 {
        self.levels[0]
    }

    pub fn scaled(&self, factor: f64) -> Result<Self> {
        Self::new(self.levels.iter().map(|m| m * factor).collect())
    }
}

impl TryFrom<Vec<f64>> for ThresholdLadder {
    type Error = crate::Error;

    fn try_from(levels: Vec<f64>) -> Result<Self> {
        Self::new(levels)
    }
}

impl From<ThresholdLadder> for Vec<f64> {
    fn from(ladder: ThresholdLadder) -> Self {
        ladder.levels
    }
}

/// How the two spreads of a compared pair are combined.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum PhiVariant {
    /// `(ŝ' + ŝ'') / 2`.
    #[default]
    #[serde(alias = "avg")]
    Average,
    /// `max(ŝ', ŝ'')`. Better constant, winsorizes more eagerly.
    Max,
}

impl PhiVariant {
    #[inline]
    pub fn combine(self, a: f64, b: f64) -> f64 {
        match self {
            PhiVariant::Average => 0.5 * (a + b),
            PhiVariant::Max => a.max(b),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ScanMode {
    /// Compare each candidate against every level above it.
    #[default]
    Full,
    /// Compare each candidate only against the next level up.
    Linear,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct BalancingParams {
    pub c: f64,
    pub t: f64,
    #[serde(rename = "phi")]
    pub phi_variant: PhiVariant,
    pub scan: ScanMode,
}

impl Default for BalancingParams {
    fn default() -> Self {
        Self {
            c: 1.0 + 3f64.sqrt(),
            t: 2.0,
            phi_variant: PhiVariant::Average,
            scan: ScanMode::Full,
        }
    }
}

impl BalancingParams {
    pub fn validate(&self) -> Result<()> {
        if !(self.c > 2.0) || !self.c.is_finite() {
            return invalid(format!("c must be a finite value above 2, got {}", self.c));
        }
        if !(self.t > 0.0) || !self.t.is_finite() {
            return invalid(format!("t must be positive and finite, got {}", self.t));
        }
        Ok(())
    }
}

/// One evaluated pairwise test: `|mean(upper) - mean(lower)| <= rhs`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Comparison {
    pub lower: f64,
    pub upper: f64,
    pub lhs: f64,
    pub rhs: f64,
    pub passed: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BalancedResult {
    pub chosen_level: f64,
    pub chosen_index: usize,
    pub estimate: f64,
    /// One summary per ladder level, ascending.
    pub summaries: Vec<WinsorSummary>,
    pub constant_c: f64,
    pub comparisons: Vec<Comparison>,
}

/// Relative tolerance for comparing two means whose spreads are both zero.
const ZERO_SPREAD_TOL: f64 = 1e-12;

fn compare(lower: &WinsorSummary, upper: &WinsorSummary, params: &BalancingParams) -> Comparison {
    let lhs = (upper.mean - lower.mean).abs();
    let (rhs, passed) = if lower.s_hat == 0.0 && upper.s_hat == 0.0 {
        let scale = lower.mean.abs().max(upper.mean.abs()).max(1.0);
        (0.0, lhs <= ZERO_SPREAD_TOL * scale)
    } else {
        let rhs = params.c * params.phi_variant.combine(lower.s_hat, upper.s_hat);
        (rhs, lhs <= rhs)
    };
    Comparison {
        lower: lower.level,
        upper: upper.level,
        lhs,
        rhs,
        passed,
    }
}

/// Summaries of `sample` at every level of `ladder`.
pub fn ladder_summaries(sample: &Sample, ladder: &ThresholdLadder, t: f64) -> Result<Vec<WinsorSummary>> {
    let factor = spread_factor(sample.len(), t)?;
    Ok(ladder
        .levels()
        .iter()
        .map(|&level| {
            let (mean, sigma_hat) = winsorized_moments(sample.values(), level);
            WinsorSummary {
                level,
                mean,
                sigma_hat,
                s_hat: factor * sigma_hat,
            }
        })
        .collect())
}

/// Runs the descent on precomputed summaries. `summaries` must be ascending
/// by level and non-empty.
pub fn select_from_summaries(summaries: Vec<WinsorSummary>, params: &BalancingParams) -> Result<BalancedResult> {
    params.validate()?;
    let k = summaries.len();
    if k == 0 {
        return invalid("no summaries to select from");
    }
    let mut comparisons = Vec::new();
    let mut chosen = k - 1;
    'descent: for i in (0..k - 1).rev() {
        let upper_end = match params.scan {
            ScanMode::Full => k,
            ScanMode::Linear => i + 2,
        };
        for j in i + 1..upper_end {
            let cmp = compare(&summaries[i], &summaries[j], params);
            comparisons.push(cmp);
            if !cmp.passed {
                break 'descent;
            }
        }
        chosen = i;
    }
    let base = constant_c(params.c, params.phi_variant)?;
    let constant_c = match params.scan {
        ScanMode::Full => base,
        ScanMode::Linear => base * k as f64,
    };
    Ok(BalancedResult {
        chosen_level: summaries[chosen].level,
        chosen_index: chosen,
        estimate: summaries[chosen].mean,
        summaries,
        constant_c,
        comparisons,
    })
}

/// Chooses the winsorization level; honours `params.scan`.
pub fn select_threshold(sample: &Sample, ladder: &ThresholdLadder, params: &BalancingParams) -> Result<BalancedResult> {
    params.validate()?;
    let summaries = ladder_summaries(sample, ladder, params.t)?;
    select_from_summaries(summaries, params)
}

/// [`select_threshold`] with only adjacent levels compared.
///
/// The reported `constant_c` is the full-scan constant times the ladder size,
/// a looser bound that is not known to be tight.
pub fn select_threshold_linear(
    sample: &Sample,
    ladder: &ThresholdLadder,
    params: &BalancingParams,
) -> Result<BalancedResult> {
    let params = BalancingParams {
        scan: ScanMode::Linear,
        ..*params
    };
    select_threshold(sample, ladder, &params)
}

/// Oracle-inequality constant `C(c)` for the full scan.
///
/// Average: `max(c + 1, 1 + 4 / (c − 2))`, minimised at `c = 1 + √5`.
/// Max: `max(c + 1, 1 + 2 / (c − 2))`, minimised at `c = 1 + √3`.
pub fn constant_c(c: f64, phi: PhiVariant) -> Result<f64> {
    if !(c > 2.0) || !c.is_finite() {
        return invalid(format!("c must be a finite value above 2, got {c}"));
    }
    let lower_branch = match phi {
        PhiVariant::Average => 1.0 + 4.0 / (c - 2.0),
        PhiVariant::Max => 1.0 + 2.0 / (c - 2.0),
    };
    Ok((c + 1.0).max(lower_branch))
}

/// Inputs to the probability defect `δ`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GuaranteeInputs {
    /// Bound on the third-moment ratio `E|Z|³ / (E Z²)^{3/2}`.
    pub k_bound: f64,
    pub n: u64,
    pub t: f64,
    /// Ladder size `|Λ|`.
    pub levels: usize,
}

/// `δ = 2k (1 + 50K/√n − Φ(t √(n / ((√n − t)² + t²))))`.
///
/// `1 − δ` lower-bounds the probability that the selector's hypotheses hold.
/// The raw value is returned; it is only a meaningful bound inside `(0, 1)`.
pub fn guarantee_probability(inputs: &GuaranteeInputs) -> Result<f64> {
    let GuaranteeInputs { k_bound, n, t, levels } = *inputs;
    if n == 0 || levels == 0 {
        return invalid("n and the number of levels must be at least 1");
    }
    if !(k_bound > 0.0) || !k_bound.is_finite() {
        return invalid(format!("K must be positive and finite, got {k_bound}"));
    }
    let root_n = (n as f64).sqrt();
    if !(t > 0.0) || t >= root_n {
        return invalid(format!("t = {t} must lie in (0, sqrt(n) = {root_n})"));
    }
    let gap = root_n - t;
    let arg = t * (n as f64 / (gap * gap + t * t)).sqrt();
    // 1 - Φ(arg) is taken from the upper tail directly so that the value
    // stays strictly monotone in t until the tail underflows.
    let tail = std_normal_sf(arg)?;
    Ok(2.0 * levels as f64 * (50.0 * k_bound / root_n + tail))
}

/// `K = 8 / α^{3/2}`, valid when `V[Y^M] ≥ α M²` at every level.
pub fn k_bound_from_alpha(alpha: f64) -> Result<f64> {
    if !(alpha > 0.0 && alpha < 1.0) {
        return invalid(format!("alpha must lie in (0, 1), got {alpha}"));
    }
    Ok(k_bound_formula(alpha))
}

#[inline]
fn k_bound_formula(alpha: f64) -> f64 {
    8.0 / alpha.powf(1.5)
}
