use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};

use anyhow::{bail, Context, Result};
use clap::{Args, Parser, Subcommand, ValueEnum};
use serde_json::json;

use balanced_is::balancing::{guarantee_probability, k_bound_from_alpha, select_threshold, GuaranteeInputs};
use balanced_is::harness::{emit_outputs, run_experiment, threads_from_env, EstimatorKind, ExperimentConfig, ProblemSpec};
use balanced_is::problems::{bias_oracle_mc, bias_oracle_quadrature, Family, IsProblem, ScaleConvention};
use balanced_is::saw::{enumerate_csaw, estimate_csaw_par, TrapPolicy};
use balanced_is::{BalancingParams, PhiVariant, Sample, ScanMode, ThresholdLadder};

#[derive(Parser)]
#[command(name = "balanced-is", version, about = "Winsorized importance sampling with balanced threshold selection")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Select a threshold for a file of weights (one per line).
    Estimate(EstimateArgs),
    /// Replicated synthetic study.
    Synth(SynthArgs),
    /// Sample CSAW importance weights.
    Saw(SawArgs),
    /// Replicated CSAW study comparing the estimators.
    SawExperiment(SawExperimentArgs),
    /// Exact CSAW count by exhaustive enumeration.
    SawEnumerate {
        #[arg(long)]
        m: usize,
    },
    /// Bias curve `|E[Y^M] - θ|` for a synthetic problem.
    BiasOracle(BiasArgs),
    /// Run an experiment described by a JSON config file.
    Run {
        #[arg(long)]
        config: PathBuf,
        /// Overrides `output_dir` in the config.
        #[arg(long)]
        out: Option<PathBuf>,
    },
}

#[derive(Clone, Copy, ValueEnum)]
enum PhiArg {
    Avg,
    Max,
}

#[derive(Clone, Copy, ValueEnum)]
enum ScanArg {
    Full,
    Linear,
}

#[derive(Clone, Copy, ValueEnum)]
enum PolicyArg {
    Q1,
    Q2,
    Q3,
}

impl From<PolicyArg> for TrapPolicy {
    fn from(p: PolicyArg) -> Self {
        match p {
            PolicyArg::Q1 => TrapPolicy::Q1AllTraps,
            PolicyArg::Q2 => TrapPolicy::Q2NoBoundaryTraps,
            PolicyArg::Q3 => TrapPolicy::Q3NoTraps,
        }
    }
}

#[derive(Clone, Copy, ValueEnum)]
enum BaselineArg {
    Cv,
    None,
}

#[derive(Clone, Copy, ValueEnum)]
enum BiasMethodArg {
    Quadrature,
    Mc,
}

#[derive(Clone, Copy, ValueEnum)]
enum ConventionArg {
    Variance,
    Sd,
}

impl From<ConventionArg> for ScaleConvention {
    fn from(c: ConventionArg) -> Self {
        match c {
            ConventionArg::Variance => ScaleConvention::Variance,
            ConventionArg::Sd => ScaleConvention::Sd,
        }
    }
}

/// Selector settings shared by several subcommands.
#[derive(Args)]
struct SelectorArgs {
    #[arg(long)]
    c: Option<f64>,
    #[arg(long)]
    t: Option<f64>,
    #[arg(long, value_enum)]
    phi: Option<PhiArg>,
    #[arg(long, value_enum)]
    scan: Option<ScanArg>,
}

impl SelectorArgs {
    fn apply(&self, p: &mut BalancingParams) {
        if let Some(c) = self.c {
            p.c = c;
        }
        if let Some(t) = self.t {
            p.t = t;
        }
        if let Some(phi) = self.phi {
            p.phi_variant = match phi {
                PhiArg::Avg => PhiVariant::Average,
                PhiArg::Max => PhiVariant::Max,
            };
        }
        if let Some(scan) = self.scan {
            p.scan = match scan {
                ScanArg::Full => ScanMode::Full,
                ScanArg::Linear => ScanMode::Linear,
            };
        }
    }
}

#[derive(Args)]
struct EstimateArgs {
    #[arg(long)]
    weights: PathBuf,
    #[arg(long, value_delimiter = ',', required = true)]
    ladder: Vec<f64>,
    #[command(flatten)]
    selector: SelectorArgs,
    /// Third-moment bound K for the guarantee defect.
    #[arg(long, conflicts_with = "alpha")]
    k_bound: Option<f64>,
    /// Derive K = 8 / alpha^1.5.
    #[arg(long)]
    alpha: Option<f64>,
    /// Output JSON path; stdout when omitted.
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Args)]
struct SynthArgs {
    /// Base config; the flags below override its fields.
    #[arg(long)]
    config: Option<PathBuf>,
    #[arg(long)]
    family: Option<String>,
    #[arg(long, value_delimiter = ',')]
    params: Option<Vec<f64>>,
    #[arg(long, value_delimiter = ',')]
    ladder: Option<Vec<f64>>,
    #[arg(long)]
    n: Option<usize>,
    #[arg(long)]
    reps: Option<usize>,
    #[arg(long)]
    seed: Option<u64>,
    #[arg(long, value_enum)]
    scale_convention: Option<ConventionArg>,
    #[command(flatten)]
    common: StudyArgs,
}

/// Flags shared by the study subcommands.
#[derive(Args)]
struct StudyArgs {
    #[arg(long, value_enum)]
    baseline: Option<BaselineArg>,
    #[arg(long)]
    folds: Option<usize>,
    #[command(flatten)]
    selector: SelectorArgs,
    #[arg(long)]
    out: Option<PathBuf>,
}

impl StudyArgs {
    fn apply(&self, cfg: &mut ExperimentConfig) {
        if let Some(b) = self.baseline {
            cfg.estimators = match b {
                BaselineArg::Cv => EstimatorKind::ALL.to_vec(),
                BaselineArg::None => vec![EstimatorKind::Plain, EstimatorKind::Balanced],
            };
        }
        if let Some(f) = self.folds {
            cfg.cv.folds = f;
        }
        self.selector.apply(&mut cfg.balancing);
        if let Some(out) = &self.out {
            cfg.output_dir = Some(out.clone());
        }
    }
}

#[derive(Args)]
struct SawArgs {
    #[arg(long)]
    m: usize,
    #[arg(long, value_enum)]
    policy: PolicyArg,
    #[arg(long)]
    paths: usize,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    #[arg(long)]
    out: PathBuf,
}

#[derive(Args)]
struct SawExperimentArgs {
    #[arg(long)]
    m: usize,
    #[arg(long, value_enum)]
    policy: PolicyArg,
    #[arg(long)]
    n: Option<usize>,
    #[arg(long)]
    reps: Option<usize>,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    #[arg(long, value_delimiter = ',')]
    ladder: Option<Vec<f64>>,
    /// True count, required when m has no published value.
    #[arg(long)]
    truth: Option<f64>,
    #[command(flatten)]
    common: StudyArgs,
}

#[derive(Args)]
struct BiasArgs {
    #[arg(long)]
    family: String,
    #[arg(long)]
    param: f64,
    #[arg(long, value_delimiter = ',', required = true)]
    ladder: Vec<f64>,
    #[arg(long, value_enum, default_value = "quadrature")]
    method: BiasMethodArg,
    #[arg(long, default_value_t = 10_000_000)]
    draws: usize,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    #[arg(long, default_value_t = 1e-10)]
    abs_tol: f64,
    #[arg(long, value_enum, default_value = "variance")]
    scale_convention: ConventionArg,
    #[arg(long)]
    out: Option<PathBuf>,
}

fn write_json(value: &serde_json::Value, out: Option<&Path>) -> Result<()> {
    let mut text = serde_json::to_string_pretty(value)?;
    text.push('\n');
    match out {
        Some(path) => fs::write(path, text).with_context(|| format!("writing {}", path.display())),
        None => Ok(std::io::stdout().write_all(text.as_bytes())?),
    }
}

fn estimate(args: EstimateArgs) -> Result<()> {
    let text = fs::read_to_string(&args.weights).with_context(|| format!("reading {}", args.weights.display()))?;
    let sample = Sample::parse_text(&text)?;
    let ladder = ThresholdLadder::new(args.ladder)?;
    let mut params = BalancingParams::default();
    args.selector.apply(&mut params);
    let result = select_threshold(&sample, &ladder, &params)?;
    let k_bound = match (args.k_bound, args.alpha) {
        (Some(k), _) => Some(k),
        (None, Some(a)) => Some(k_bound_from_alpha(a)?),
        (None, None) => None,
    };
    let guarantee = match k_bound {
        Some(k_bound) => {
            let inputs = GuaranteeInputs {
                k_bound,
                n: sample.len() as u64,
                t: params.t,
                levels: ladder.len(),
            };
            let delta = guarantee_probability(&inputs)?;
            Some(json!({ "inputs": inputs, "delta": delta }))
        }
        None => None,
    };
    let value = json!({
        "n": sample.len(),
        "params": params,
        "plain_estimate": balanced_is::is_estimate(&sample),
        "chosen_level": result.chosen_level,
        "chosen_index": result.chosen_index,
        "estimate": result.estimate,
        "constant_C": result.constant_c,
        "summaries": result.summaries,
        "comparisons": result.comparisons,
        "guarantee": guarantee,
    });
    write_json(&value, args.out.as_deref())
}

fn execute(cfg: &ExperimentConfig) -> Result<()> {
    let Some(dir) = cfg.output_dir.clone() else {
        bail!("no output directory: pass --out or set output_dir in the config");
    };
    let result = run_experiment(cfg, threads_from_env())?;
    let files = emit_outputs(&result, &dir)?;
    eprintln!(
        "{} rows in {:.2}s; wrote {}",
        result.rows.len(),
        result.wall_time_secs,
        files.iter().map(|p| p.display().to_string()).collect::<Vec<_>>().join(", ")
    );
    for row in &result.rows {
        eprintln!(
            "  {} {} {:>8}: mse {:.4e} mad {:.4e}",
            row.family,
            row.param,
            row.estimator.name(),
            row.mse,
            row.mad
        );
    }
    Ok(())
}

fn load_config(path: &Path) -> Result<ExperimentConfig> {
    let text = fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))?;
    Ok(ExperimentConfig::from_json(&text)?)
}

fn synth(args: SynthArgs) -> Result<()> {
    let mut cfg = match &args.config {
        Some(path) => load_config(path)?,
        None => {
            let Some(name) = &args.family else {
                bail!("--family is required without --config");
            };
            let family: Family = name.parse()?;
            ExperimentConfig::synthetic(family, family.default_params())
        }
    };
    let ProblemSpec::Synthetic {
        family,
        params,
        scale_convention,
    } = &mut cfg.problem
    else {
        bail!("synth needs a synthetic problem config");
    };
    if let Some(name) = &args.family {
        let new: Family = name.parse()?;
        if new != *family && args.params.is_none() {
            *params = new.default_params();
        }
        *family = new;
    }
    if let Some(p) = args.params {
        *params = p;
    }
    if let Some(c) = args.scale_convention {
        *scale_convention = c.into();
    }
    if let Some(l) = args.ladder {
        cfg.ladder = Some(ThresholdLadder::new(l)?);
    }
    if let Some(n) = args.n {
        cfg.n = n;
    }
    if let Some(r) = args.reps {
        cfg.replications = r;
    }
    if let Some(s) = args.seed {
        cfg.master_seed = s;
    }
    args.common.apply(&mut cfg);
    cfg.validate()?;
    execute(&cfg)
}

fn saw(args: SawArgs) -> Result<()> {
    let policy: TrapPolicy = args.policy.into();
    let (est, sample) = estimate_csaw_par(args.m, policy, args.paths, args.seed)?;
    let mut text = String::with_capacity(args.paths * 24);
    for w in sample.values() {
        text.push_str(&format!("{w:.16e}\n"));
    }
    fs::write(&args.out, text).with_context(|| format!("writing {}", args.out.display()))?;
    eprintln!(
        "m={} {policy}: z_hat {:.6e} (se {:.3e}), complete {:.4}",
        args.m, est.z_hat, est.std_error, est.complete_fraction
    );
    Ok(())
}

fn saw_experiment(args: SawExperimentArgs) -> Result<()> {
    let mut cfg = ExperimentConfig::saw(args.m, args.policy.into());
    if let ProblemSpec::Saw { truth, .. } = &mut cfg.problem {
        *truth = args.truth;
    }
    if let Some(n) = args.n {
        cfg.n = n;
    }
    if let Some(r) = args.reps {
        cfg.replications = r;
    }
    cfg.master_seed = args.seed;
    if let Some(l) = args.ladder {
        cfg.ladder = Some(ThresholdLadder::new(l)?);
    }
    args.common.apply(&mut cfg);
    cfg.validate()?;
    execute(&cfg)
}

fn bias_oracle(args: BiasArgs) -> Result<()> {
    let family: Family = args.family.parse()?;
    let problem = IsProblem::new(family, args.param, args.scale_convention.into())?;
    let ladder = ThresholdLadder::new(args.ladder)?;
    let curve = match args.method {
        BiasMethodArg::Quadrature => bias_oracle_quadrature(&problem, &ladder, args.abs_tol)?,
        BiasMethodArg::Mc => bias_oracle_mc(&problem, &ladder, args.draws, args.seed)?,
    };
    let value = json!({
        "family": family,
        "param": args.param,
        "theta": problem.true_theta(),
        "curve": curve,
    });
    write_json(&value, args.out.as_deref())
}

fn main() -> Result<()> {
    match Cli::parse().command {
        Command::Estimate(a) => estimate(a),
        Command::Synth(a) => synth(a),
        Command::Saw(a) => saw(a),
        Command::SawExperiment(a) => saw_experiment(a),
        Command::SawEnumerate { m } => {
            println!("{}", enumerate_csaw(m)?);
            Ok(())
        }
        Command::BiasOracle(a) => bias_oracle(a),
        Command::Run { config, out } => {
            let mut cfg = load_config(&config)?;
            if out.is_some() {
                cfg.output_dir = out;
            }
            execute(&cfg)
        }
    }
}
