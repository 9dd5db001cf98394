//! Seeded, replicated experiments comparing the plain, balanced and
//! cross-validated estimators, and their CSV/JSON output.
//!
//! Replication `r` of parameter `p` draws from stream `(master_seed, p, r)`,
//! so the output is a pure function of the configuration whatever the
//! number of worker threads.

use std::fmt::Write as _;
use std::fs;
use std::path::{Path, PathBuf};
use std::time::Instant;

use rand::Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use serde_json::json;

use crate::balancing::{select_threshold, BalancingParams, ThresholdLadder};
use crate::cv::{cv_select_threshold, CvConfig, CV_CRITERION};
use crate::error::{invalid, Error, Result};
use crate::problems::{draw_weights, Family, IsProblem, ScaleConvention};
use crate::rng::{self, Purpose, GENERATOR_ID};
use crate::saw::{known_csaw_count, sample_weights, TrapPolicy};
use crate::weights::{compensated_sum, is_estimate, spread_factor, Sample};

/// Environment variable that caps the worker count.
pub const THREADS_ENV: &str = "BALANCED_IS_THREADS";

/// Ladder used for the 10 × 10 CSAW study.
pub const SAW_TABLE_LADDER: [f64; 5] = [1e21, 5e23, 1e25, 5e26, 1e28];

/// Problem being estimated.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum ProblemSpec {
    Synthetic {
        family: Family,
        params: Vec<f64>,
        #[serde(default)]
        scale_convention: ScaleConvention,
    },
    Saw {
        m: usize,
        policy: TrapPolicy,
        /// Overrides the published count as the true value.
        #[serde(default, skip_serializing_if = "Option::is_none")]
        truth: Option<f64>,
    },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum EstimatorKind {
    Plain,
    Balanced,
    Cv,
}

impl EstimatorKind {
    pub const ALL: [EstimatorKind; 3] = [EstimatorKind::Plain, EstimatorKind::Balanced, EstimatorKind::Cv];

    pub fn name(self) -> &'static str {
        match self {
            EstimatorKind::Plain => "plain",
            EstimatorKind::Balanced => "balanced",
            EstimatorKind::Cv => "cv",
        }
    }
}

impl std::str::FromStr for EstimatorKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "plain" | "is" => Ok(EstimatorKind::Plain),
            "balanced" => Ok(EstimatorKind::Balanced),
            "cv" => Ok(EstimatorKind::Cv),
            other => invalid(format!("unknown estimator {other:?}")),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(default)]
pub struct CvSettings {
    pub folds: usize,
}

impl Default for CvSettings {
    fn default() -> Self {
        Self { folds: 10 }
    }
}

fn default_estimators() -> Vec<EstimatorKind> {
    EstimatorKind::ALL.to_vec()
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExperimentConfig {
    pub problem: ProblemSpec,
    /// Defaults to the family's reference ladder, or the CSAW ladder scaled
    /// to the grid's count.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub ladder: Option<ThresholdLadder>,
    pub n: usize,
    pub replications: usize,
    pub master_seed: u64,
    #[serde(default = "default_estimators")]
    pub estimators: Vec<EstimatorKind>,
    #[serde(default)]
    pub balancing: BalancingParams,
    #[serde(default)]
    pub cv: CvSettings,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub output_dir: Option<PathBuf>,
}

impl ExperimentConfig {
    /// Synthetic study at desk scale: `n = 2000`, 200 replications.
    pub fn synthetic(family: Family, params: Vec<f64>) -> Self {
        Self {
            problem: ProblemSpec::Synthetic {
                family,
                params,
                scale_convention: ScaleConvention::Variance,
            },
            ladder: None,
            n: 2000,
            replications: 200,
            master_seed: 0,
            estimators: default_estimators(),
            balancing: BalancingParams::default(),
            cv: CvSettings::default(),
            output_dir: None,
        }
    }

    /// CSAW study at desk scale: `n = 2000`, 100 replications.
    pub fn saw(m: usize, policy: TrapPolicy) -> Self {
        Self {
            problem: ProblemSpec::Saw { m, policy, truth: None },
            ladder: None,
            n: 2000,
            replications: 100,
            master_seed: 0,
            estimators: default_estimators(),
            balancing: BalancingParams::default(),
            cv: CvSettings::default(),
            output_dir: None,
        }
    }

    pub fn from_json(text: &str) -> Result<Self> {
        let cfg: Self = serde_json::from_str(text)?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn validate(&self) -> Result<()> {
        if self.n == 0 {
            return invalid("n must be at least 1");
        }
        if self.replications == 0 {
            return invalid("replications must be at least 1");
        }
        if self.replications > u32::MAX as usize {
            return invalid("too many replications");
        }
        if self.estimators.is_empty() {
            return invalid("no estimators selected");
        }
        if self.estimators.contains(&EstimatorKind::Balanced) {
            self.balancing.validate()?;
            spread_factor(self.n, self.balancing.t)?;
        }
        if self.estimators.contains(&EstimatorKind::Cv) && (self.cv.folds < 2 || self.cv.folds > self.n) {
            return invalid(format!("cv folds must lie in 2..={}, got {}", self.n, self.cv.folds));
        }
        match &self.problem {
            ProblemSpec::Synthetic {
                family,
                params,
                scale_convention,
            } => {
                for &p in params {
                    IsProblem::new(*family, p, *scale_convention)?;
                }
            }
            ProblemSpec::Saw { m, truth, .. } => {
                if *m == 0 {
                    return invalid("grid size m must be at least 1");
                }
                match truth {
                    Some(z) if !(z.is_finite() && *z > 0.0) => {
                        return invalid(format!("truth must be positive and finite, got {z}"))
                    }
                    None if known_csaw_count(*m).is_none() => {
                        return invalid(format!("no published count for m = {m}; supply `truth`"))
                    }
                    _ => {}
                }
            }
        }
        self.resolved_ladder().map(|_| ())
    }

    /// Label written in the `family` column.
    pub fn family_label(&self) -> String {
        match &self.problem {
            ProblemSpec::Synthetic { family, .. } => family.name().to_string(),
            ProblemSpec::Saw { policy, .. } => format!("saw-{policy}"),
        }
    }

    /// Parameter grid; a CSAW study has the single parameter `m`.
    pub fn params(&self) -> Vec<f64> {
        match &self.problem {
            ProblemSpec::Synthetic { params, .. } => params.clone(),
            ProblemSpec::Saw { m, .. } => vec![*m as f64],
        }
    }

    pub fn resolved_ladder(&self) -> Result<ThresholdLadder> {
        if let Some(l) = &self.ladder {
            return Ok(l.clone());
        }
        match &self.problem {
            ProblemSpec::Synthetic { family, .. } => Ok(family.default_ladder()),
            ProblemSpec::Saw { m, .. } => {
                let base = ThresholdLadder::new(SAW_TABLE_LADDER.to_vec())?;
                if *m == 10 {
                    return Ok(base);
                }
                let ten = known_csaw_count(10).unwrap() as f64;
                base.scaled(self.truth(0)? / ten)
            }
        }
    }

    fn truth(&self, param_index: usize) -> Result<f64> {
        match &self.problem {
            ProblemSpec::Synthetic {
                family,
                params,
                scale_convention,
            } => Ok(IsProblem::new(*family, params[param_index], *scale_convention)?.true_theta()),
            ProblemSpec::Saw { m, truth, .. } => truth
                .or_else(|| known_csaw_count(*m).map(|z| z as f64))
                .ok_or_else(|| Error::InvalidArgument(format!("no published count for m = {m}; supply `truth`"))),
        }
    }
}

/// All replications of one estimator at one parameter value.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct EstimatorRow {
    pub family: String,
    pub param: f64,
    pub estimator: EstimatorKind,
    pub truth: f64,
    pub estimates: Vec<f64>,
    /// `None` for the plain estimator.
    pub chosen_levels: Vec<Option<f64>>,
    pub mse: f64,
    pub mad: f64,
    /// `(level, count)` for every ladder level, ascending.
    pub level_histogram: Vec<(f64, usize)>,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ExperimentResult {
    pub config: ExperimentConfig,
    pub ladder: ThresholdLadder,
    pub rows: Vec<EstimatorRow>,
    pub wall_time_secs: f64,
}

impl ExperimentResult {
    pub fn row(&self, param: f64, estimator: EstimatorKind) -> Option<&EstimatorRow> {
        self.rows.iter().find(|r| r.param == param && r.estimator == estimator)
    }
}

/// Worker count from [`THREADS_ENV`], if set to a positive integer.
pub fn threads_from_env() -> Option<usize> {
    std::env::var(THREADS_ENV)
        .ok()
        .and_then(|v| v.trim().parse::<usize>().ok())
        .filter(|&n| n > 0)
}

type ReplicationOutcome = Vec<(f64, Option<f64>)>;

fn draw(config: &ExperimentConfig, param_index: usize, replication: u32) -> Result<Sample> {
    let mut rng = rng::stream(config.master_seed, param_index as u32, replication, Purpose::Draws);
    match &config.problem {
        ProblemSpec::Synthetic {
            family,
            params,
            scale_convention,
        } => {
            let problem = IsProblem::new(*family, params[param_index], *scale_convention)?;
            draw_weights(&problem, config.n, &mut rng)
        }
        ProblemSpec::Saw { m, policy, .. } => Sample::new(sample_weights(*m, *policy, config.n, &mut rng)?),
    }
}

fn replicate(
    config: &ExperimentConfig,
    ladder: &ThresholdLadder,
    param_index: usize,
    replication: u32,
) -> Result<ReplicationOutcome> {
    let sample = draw(config, param_index, replication)?;
    config
        .estimators
        .iter()
        .map(|kind| match kind {
            EstimatorKind::Plain => Ok((is_estimate(&sample), None)),
            EstimatorKind::Balanced => {
                let r = select_threshold(&sample, ladder, &config.balancing)?;
                Ok((r.estimate, Some(r.chosen_level)))
            }
            EstimatorKind::Cv => {
                let shuffle_seed = rng::stream(
                    config.master_seed,
                    param_index as u32,
                    replication,
                    Purpose::CrossValidation,
                )
                .random::<u64>();
                let cfg = CvConfig {
                    folds: config.cv.folds,
                    shuffle_seed,
                };
                let r = cv_select_threshold(&sample, ladder, &cfg)?;
                Ok((r.estimate, Some(r.level)))
            }
        })
        .collect()
}

/// Runs every replication of every parameter value. `threads` caps the
/// worker count; `None` uses the rayon default.
pub fn run_experiment(config: &ExperimentConfig, threads: Option<usize>) -> Result<ExperimentResult> {
    config.validate()?;
    let start = Instant::now();
    let ladder = config.resolved_ladder()?;
    let params = config.params();
    let reps = config.replications;

    let jobs: Vec<(usize, u32)> = (0..params.len())
        .flat_map(|p| (0..reps as u32).map(move |r| (p, r)))
        .collect();
    let run = || -> Result<Vec<ReplicationOutcome>> {
        jobs.par_iter()
            .map(|&(p, r)| replicate(config, &ladder, p, r))
            .collect()
    };
    let outcomes = match threads {
        Some(t) => rayon::ThreadPoolBuilder::new()
            .num_threads(t)
            .build()
            .map_err(|e| Error::Internal(format!("cannot build thread pool: {e}")))?
            .install(run)?,
        None => run()?,
    };

    let family = config.family_label();
    let mut rows = Vec::new();
    for (p, &param) in params.iter().enumerate() {
        let truth = config.truth(p)?;
        let block = &outcomes[p * reps..(p + 1) * reps];
        for (e, &estimator) in config.estimators.iter().enumerate() {
            let estimates: Vec<f64> = block.iter().map(|o| o[e].0).collect();
            let chosen_levels: Vec<Option<f64>> = block.iter().map(|o| o[e].1).collect();
            let (mse, mad) = error_summary(&estimates, truth);
            let level_histogram = ladder
                .levels()
                .iter()
                .map(|&l| (l, chosen_levels.iter().filter(|&&c| c == Some(l)).count()))
                .collect();
            rows.push(EstimatorRow {
                family: family.clone(),
                param,
                estimator,
                truth,
                estimates,
                chosen_levels,
                mse,
                mad,
                level_histogram,
            });
        }
    }
    Ok(ExperimentResult {
        config: config.clone(),
        ladder,
        rows,
        wall_time_secs: start.elapsed().as_secs_f64(),
    })
}

/// `(mean squared error, mean absolute deviation)` around `truth`.
pub fn error_summary(estimates: &[f64], truth: f64) -> (f64, f64) {
    let r = estimates.len() as f64;
    let mse = compensated_sum(estimates.iter().map(|&e| (e - truth) * (e - truth))) / r;
    let mad = compensated_sum(estimates.iter().map(|&e| (e - truth).abs())) / r;
    (mse, mad)
}

pub fn estimates_csv(result: &ExperimentResult) -> String {
    let mut s = String::from("family,param,estimator,replication,estimate,chosen_level\n");
    for row in &result.rows {
        for (r, (est, level)) in row.estimates.iter().zip(&row.chosen_levels).enumerate() {
            let level = level.map(|l| format!("{l:e}")).unwrap_or_default();
            writeln!(s, "{},{},{},{r},{est:e},{level}", row.family, row.param, row.estimator.name()).unwrap();
        }
    }
    s
}

pub fn summary_csv(result: &ExperimentResult) -> String {
    let mut s = String::from("family,param,estimator,mse,mad\n");
    for row in &result.rows {
        writeln!(s, "{},{},{},{:e},{:e}", row.family, row.param, row.estimator.name(), row.mse, row.mad).unwrap();
    }
    s
}

pub fn meta_json(result: &ExperimentResult) -> Result<String> {
    let cfg = &result.config;
    let truths: Vec<_> = result
        .rows
        .iter()
        .filter(|r| r.estimator == cfg.estimators[0])
        .map(|r| json!({ "param": r.param, "theta": r.truth }))
        .collect();
    let histograms: Vec<_> = result
        .rows
        .iter()
        .filter(|r| r.estimator != EstimatorKind::Plain)
        .map(|r| {
            json!({
                "param": r.param,
                "estimator": r.estimator,
                "counts": r.level_histogram.iter().map(|(l, c)| json!({"level": l, "count": c})).collect::<Vec<_>>(),
            })
        })
        .collect();
    let meta = json!({
        "config": cfg,
        "ladder": result.ladder,
        "seeds": {
            "master_seed": cfg.master_seed,
            "draws": "stream(master_seed, param_index, replication, purpose = 0)",
            "cv_shuffle": "first u64 of stream(master_seed, param_index, replication, purpose = 1)",
        },
        "generator": GENERATOR_ID,
        "cv_criterion": CV_CRITERION,
        "code_version": env!("CARGO_PKG_VERSION"),
        "truth": truths,
        "chosen_level_histograms": histograms,
    });
    let mut text = serde_json::to_string_pretty(&meta)?;
    text.push('\n');
    Ok(text)
}

/// Writes `estimates.csv`, `summary.csv` and `meta.json` into `dir`.
pub fn emit_outputs(result: &ExperimentResult, dir: &Path) -> Result<Vec<PathBuf>> {
    fs::create_dir_all(dir)?;
    let files = [
        ("estimates.csv", estimates_csv(result)),
        ("summary.csv", summary_csv(result)),
        ("meta.json", meta_json(result)?),
    ];
    let mut written = Vec::new();
    for (name, body) in files {
        let path = dir.join(name);
        fs::write(&path, body)?;
        written.push(path);
    }
    Ok(written)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn small(family: Family, params: Vec<f64>) -> ExperimentConfig {
        let mut c = ExperimentConfig::synthetic(family, params);
        c.n = 200;
        c.replications = 8;
        c.master_seed = 11;
        c
    }

    #[test]
    fn single_replication_without_clipping() {
        let mut c = small(Family::Normal, vec![1.0]);
        c.replications = 1;
        c.ladder = Some(ThresholdLadder::new(vec![1e6, 1e7]).unwrap());
        let r = run_experiment(&c, Some(1)).unwrap();
        let est: Vec<f64> = r.rows.iter().map(|row| row.estimates[0]).collect();
        assert_eq!(est[0], est[1]);
        assert_eq!(est[0], est[2]);
        for row in &r.rows {
            assert_eq!(row.mse, row.mad * row.mad);
        }
    }

    #[test]
    fn empty_grid_gives_header_only_csvs() {
        let c = small(Family::Exponential, vec![]);
        let r = run_experiment(&c, None).unwrap();
        assert_eq!(estimates_csv(&r), "family,param,estimator,replication,estimate,chosen_level\n");
        assert_eq!(summary_csv(&r), "family,param,estimator,mse,mad\n");
        let meta: serde_json::Value = serde_json::from_str(&meta_json(&r).unwrap()).unwrap();
        assert_eq!(meta["seeds"]["master_seed"], 11);
    }

    #[test]
    fn thread_count_does_not_change_output() {
        let c = small(Family::Exponential, vec![1.3, 3.0]);
        let a = run_experiment(&c, Some(1)).unwrap();
        let b = run_experiment(&c, Some(4)).unwrap();
        assert_eq!(estimates_csv(&a), estimates_csv(&b));
        assert_eq!(summary_csv(&a), summary_csv(&b));
    }

    #[test]
    fn balanced_estimate_is_a_ladder_mean() {
        let c = small(Family::T21, vec![2.0]);
        let r = run_experiment(&c, None).unwrap();
        let row = r.row(2.0, EstimatorKind::Balanced).unwrap();
        for lvl in &row.chosen_levels {
            assert!(r.ladder.levels().contains(&lvl.unwrap()));
        }
        assert_eq!(row.level_histogram.iter().map(|(_, c)| c).sum::<usize>(), c.replications);
    }

    #[test]
    fn saw_config() {
        let mut c = ExperimentConfig::saw(3, TrapPolicy::Q3NoTraps);
        c.n = 50;
        c.replications = 3;
        let r = run_experiment(&c, None).unwrap();
        assert_eq!(r.rows.len(), 3);
        assert_eq!(r.rows[0].family, "saw-q3");
        assert_eq!(r.rows[0].truth, 184.0);
        assert!((r.ladder.max() / 184.0 - 1e28 / 1.568_758_030_464_750_013_214_1e24).abs() < 1e-6);
    }

    #[test]
    fn config_validation() {
        let mut c = small(Family::Normal, vec![1.0]);
        c.n = 0;
        assert!(c.validate().is_err());
        let mut c = small(Family::Normal, vec![-1.0]);
        assert!(c.validate().is_err());
        c = small(Family::Normal, vec![1.0]);
        c.cv.folds = 1;
        assert!(c.validate().is_err());
        c = ExperimentConfig::saw(11, TrapPolicy::Q1AllTraps);
        assert!(c.validate().is_err());
        if let ProblemSpec::Saw { truth, .. } = &mut c.problem {
            *truth = Some(1e30);
        }
        assert!(c.validate().is_ok());
        assert!(ExperimentConfig::from_json(r#"{"problem":{"kind":"synthetic","family":"gamma","params":[1]},"n":10,"replications":1,"master_seed":0}"#).is_err());
        assert!(ExperimentConfig::from_json(r#"{"problem":{"kind":"saw","m":3,"policy":"q7"},"n":10,"replications":1,"master_seed":0}"#).is_err());
    }

    #[test]
    fn config_json_round_trip() {
        let c = small(Family::NormalMixture, vec![1.0, 3.0]);
        let text = serde_json::to_string(&c).unwrap();
        assert_eq!(ExperimentConfig::from_json(&text).unwrap(), c);
        let minimal = r#"{"problem":{"kind":"synthetic","family":"exponential","params":[2]},"n":100,"replications":2,"master_seed":5}"#;
        let c = ExperimentConfig::from_json(minimal).unwrap();
        assert_eq!(c.estimators, EstimatorKind::ALL.to_vec());
        assert_eq!(c.cv.folds, 10);
    }
}
