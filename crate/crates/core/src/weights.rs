//! Plain and winsorized importance-sampling estimators.

use serde::{Deserialize, Serialize};

use crate::error::{invalid, Error, Result};

/// A non-empty batch of finite importance weights `Y_i = f(X_i) p(X_i) / q(X_i)`.
#[derive(Debug, Clone, PartialEq)]
pub struct Sample {
    values: Vec<f64>,
}

impl Sample {
    pub fn new(values: Vec<f64>) -> Result<Self> {
        if values.is_empty() {
            return invalid("sample must contain at least one weight");
        }
        if let Some((i, v)) = values.iter().enumerate().find(|(_, v)| !v.is_finite()) {
            return invalid(format!("weight {i} is not finite ({v})"));
        }
        Ok(Self { values })
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    /// Always false; kept for clippy's `len_without_is_empty`.
    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    pub fn max_abs(&self) -> f64 {
        self.values.iter().fold(0.0_f64, |acc, v| acc.max(v.abs()))
    }

    /// Parses one weight per line. Blank lines and lines starting with `#`
    /// are skipped.
    pub fn parse_text(text: &str) -> Result<Self> {
        let mut values = Vec::new();
        for (lineno, line) in text.lines().enumerate() {
            let line = line.trim();
            if line.is_empty() || line.starts_with('#') {
                continue;
            }
            let v: f64 = line.parse().map_err(|_| {
                Error::InvalidArgument(format!("line {}: cannot parse {line:?}", lineno + 1))
            })?;
            values.push(v);
        }
        Self::new(values)
    }
}

impl TryFrom<Vec<f64>> for Sample {
    type Error = Error;

    fn try_from(values: Vec<f64>) -> Result<Self> {
        Self::new(values)
    }
}

/// Neumaier's variant of Kahan summation.
#[derive(Debug, Clone, Copy, Default)]
pub struct CompensatedSum {
    sum: f64,
    compensation: f64,
}

impl CompensatedSum {
    pub fn new() -> Self {
        Self::default()
    }

    #[inline]
    pub fn add(&mut self, x: f64) {
        let t = self.sum + x;
        if self.sum.abs() >= x.abs() {
            self.compensation += (self.sum - t) + x;
        } else {
            self.compensation += (x - t) + self.sum;
        }
        self.sum = t;
    }

    pub fn total(&self) -> f64 {
        self.sum + self.compensation
    }
}

impl FromIterator<f64> for CompensatedSum {
    fn from_iter<I: IntoIterator<Item = f64>>(iter: I) -> Self {
        let mut acc = Self::new();
        for x in iter {
            acc.add(x);
        }
        acc
    }
}

/// Compensated sum of an iterator of floats.
pub fn compensated_sum<I: IntoIterator<Item = f64>>(iter: I) -> f64 {
    iter.into_iter().collect::<CompensatedSum>().total()
}

/// Clamps `y` into `[-level, level]`.
pub fn winsorize(y: f64, level: f64) -> Result<f64> {
    if !(level > 0.0) || !level.is_finite() {
        return invalid(format!("winsorization level must be positive and finite, got {level}"));
    }
    if !y.is_finite() {
        return invalid(format!("cannot winsorize non-finite value {y}"));
    }
    Ok(clamp_unchecked(y, level))
}

#[inline]
pub(crate) fn clamp_unchecked(y: f64, level: f64) -> f64 {
    (-level).max(y.min(level))
}

/// The plain importance-sampling estimate `(1/n) Σ Y_i`.
pub fn is_estimate(sample: &Sample) -> f64 {
    compensated_sum(sample.values.iter().copied()) / sample.len() as f64
}

/// Mean and spread of a sample winsorized at one level.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct WinsorSummary {
    pub level: f64,
    /// Mean of the winsorized values.
    pub mean: f64,
    /// Standard deviation of the winsorized values, divisor `n`.
    pub sigma_hat: f64,
    /// `t * sigma_hat / (sqrt(n) - t)`.
    pub s_hat: f64,
}

/// The factor `t / (sqrt(n) - t)` that turns `sigma_hat` into `s_hat`.
pub fn spread_factor(n: usize, t: f64) -> Result<f64> {
    let root_n = (n as f64).sqrt();
    if !t.is_finite() || t < 0.0 {
        return invalid(format!("t must be finite and non-negative, got {t}"));
    }
    if t >= root_n {
        return invalid(format!("t = {t} must be below sqrt(n) = {root_n}"));
    }
    Ok(t / (root_n - t))
}

/// Winsorizes `sample` at `level` and summarises the result.
pub fn winsor_summary(sample: &Sample, level: f64, t: f64) -> Result<WinsorSummary> {
    if !(level > 0.0) || !level.is_finite() {
        return invalid(format!("winsorization level must be positive and finite, got {level}"));
    }
    let factor = spread_factor(sample.len(), t)?;
    let (mean, sigma_hat) = winsorized_moments(sample.values(), level);
    Ok(WinsorSummary {
        level,
        mean,
        sigma_hat,
        s_hat: factor * sigma_hat,
    })
}

/// Two-pass mean and population standard deviation of the winsorized values.
pub(crate) fn winsorized_moments(values: &[f64], level: f64) -> (f64, f64) {
    let n = values.len() as f64;
    let mean = compensated_sum(values.iter().map(|&y| clamp_unchecked(y, level))) / n;
    let ss = compensated_sum(values.iter().map(|&y| {
        let d = clamp_unchecked(y, level) - mean;
        d * d
    }));
    (mean, (ss / n).sqrt())
}

/// Central moment of order `p` with divisor `n`.
pub fn central_moment(values: &[f64], p: i32) -> f64 {
    let n = values.len() as f64;
    let mean = compensated_sum(values.iter().copied()) / n;
    compensated_sum(values.iter().map(|&y| (y - mean).powi(p))) / n
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn winsorize_clamps() {
        assert_eq!(winsorize(5.0, 3.0).unwrap(), 3.0);
        assert_eq!(winsorize(-5.0, 3.0).unwrap(), -3.0);
        assert_eq!(winsorize(2.0, 3.0).unwrap(), 2.0);
    }

    #[test]
    fn winsorize_rejects_bad_input() {
        assert!(winsorize(1.0, 0.0).is_err());
        assert!(winsorize(1.0, -2.0).is_err());
        assert!(winsorize(f64::NAN, 1.0).is_err());
        assert!(winsorize(f64::INFINITY, 1.0).is_err());
    }

    #[test]
    fn sample_rejects_empty_and_non_finite() {
        assert!(Sample::new(vec![]).is_err());
        assert!(Sample::new(vec![1.0, f64::NAN]).is_err());
        assert!(Sample::new(vec![f64::NEG_INFINITY]).is_err());
    }

    #[test]
    fn parse_text_accepts_scientific_notation() {
        let s = Sample::parse_text("1.5\n# comment\n\n2e3\n-4.0E-2\n").unwrap();
        assert_eq!(s.values(), &[1.5, 2000.0, -0.04]);
        assert!(Sample::parse_text("1.0\nabc\n").is_err());
        assert!(Sample::parse_text("\n\n").is_err());
    }

    #[test]
    fn plain_mean() {
        let s = Sample::new(vec![1.0, 2.0, 3.0]).unwrap();
        assert_eq!(is_estimate(&s), 2.0);
        let c = Sample::new(vec![7.25; 13]).unwrap();
        assert_eq!(is_estimate(&c), 7.25);
    }

    #[test]
    fn summary_three_points() {
        let s = Sample::new(vec![10.0, -10.0, 0.0]).unwrap();
        let w = winsor_summary(&s, 1.0, 0.5).unwrap();
        assert_eq!(w.mean, 0.0);
        assert!((w.sigma_hat - (2.0f64 / 3.0).sqrt()).abs() < 1e-15);
        let factor = 0.5 / (3f64.sqrt() - 0.5);
        assert!((w.s_hat - factor * w.sigma_hat).abs() < 1e-15);
    }

    #[test]
    fn summary_without_clipping_matches_raw_moments() {
        let s = Sample::new(vec![0.3, -1.2, 2.5, 0.0, 4.0]).unwrap();
        let w = winsor_summary(&s, 4.0, 1.0).unwrap();
        assert_eq!(w.mean, is_estimate(&s));
        let pop_sd = central_moment(s.values(), 2).sqrt();
        assert!((w.sigma_hat - pop_sd).abs() < 1e-14);
    }

    #[test]
    fn summary_rejects_large_t() {
        let s = Sample::new(vec![1.0; 4]).unwrap();
        assert!(winsor_summary(&s, 1.0, 2.0).is_err());
        assert!(winsor_summary(&s, 1.0, 1.99).is_ok());
        assert!(winsor_summary(&s, 0.0, 1.0).is_err());
    }

    #[test]
    fn compensated_sum_recovers_cancellation() {
        let xs = [1e16, 1.0, -1e16, 1.0];
        assert_eq!(compensated_sum(xs), 2.0);
    }

    fn weights() -> impl Strategy<Value = Vec<f64>> {
        prop::collection::vec(
            prop_oneof![
                -10.0..10.0f64,
                (-6.0..6.0f64).prop_map(|e: f64| 10f64.powf(e)),
                (-6.0..6.0f64).prop_map(|e: f64| -(10f64.powf(e))),
            ],
            1..60,
        )
    }

    proptest! {
        #[test]
        fn winsorize_is_idempotent_and_monotone(y in -1e6..1e6f64, z in -1e6..1e6f64, m in 1e-3..1e4f64) {
            let once = winsorize(y, m).unwrap();
            prop_assert_eq!(winsorize(once, m).unwrap(), once);
            let (lo, hi) = if y <= z { (y, z) } else { (z, y) };
            prop_assert!(winsorize(lo, m).unwrap() <= winsorize(hi, m).unwrap());
        }

        #[test]
        fn summary_bounds(values in weights(), m in 1e-3..1e5f64) {
            let s = Sample::new(values).unwrap();
            let w = winsor_summary(&s, m, 0.5).unwrap();
            prop_assert!(w.mean.abs() <= m * (1.0 + 1e-12));
            prop_assert!(w.sigma_hat <= m * (1.0 + 1e-12));
        }

        #[test]
        fn sigma_hat_monotone_in_level(values in weights(), a in 1e-3..1e5f64, b in 1e-3..1e5f64) {
            let s = Sample::new(values).unwrap();
            let (lo, hi) = if a <= b { (a, b) } else { (b, a) };
            let sl = winsor_summary(&s, lo, 0.5).unwrap().sigma_hat;
            let sh = winsor_summary(&s, hi, 0.5).unwrap().sigma_hat;
            prop_assert!(sl <= sh * (1.0 + 1e-12) + 1e-300);
        }

        #[test]
        fn decomposition_identity(values in weights(), m in 1e-3..1e5f64, kappa in -1e3..1e3f64) {
            let s = Sample::new(values).unwrap();
            let w = winsor_summary(&s, m, 0.5).unwrap();
            let n = s.len() as f64;
            let lhs = compensated_sum(s.values().iter().map(|&y| {
                let d = clamp_unchecked(y, m) - kappa;
                d * d
            })) / n;
            let rhs = w.sigma_hat * w.sigma_hat + (w.mean - kappa).powi(2);
            prop_assert!((lhs - rhs).abs() <= 1e-10 * lhs.abs().max(1e-300));
        }
    }
}
