//! Acceptance criteria A1–A9. Each test prints one `PASS`/`FAIL` line to
//! stdout (bypassing libtest capture) before asserting.

use std::io::Write;
use std::time::Instant;

use balanced_is::balancing::{constant_c, guarantee_probability, select_threshold, GuaranteeInputs};
use balanced_is::harness::{estimates_csv, run_experiment, EstimatorKind, ExperimentConfig};
use balanced_is::normal::std_normal_cdf;
use balanced_is::problems::{bias_oracle_quadrature, draw_weights, make_problem, Family};
use balanced_is::quadrature::{integrate, QuadOptions};
use balanced_is::rng::{self, Purpose};
use balanced_is::saw::{enumerate_csaw, estimate_csaw, support_unbiasedness_sum, TrapPolicy};
use balanced_is::weights::central_moment;
use balanced_is::{BalancingParams, PhiVariant, Sample, ScanMode, ThresholdLadder};
use num_bigint::BigInt;
use num_rational::BigRational;
use num_traits::One;
use rand::Rng;
use rayon::prelude::*;

fn report(id: &str, passed: bool, detail: &str, started: Instant) {
    let verdict = if passed { "PASS" } else { "FAIL" };
    let mut out = std::io::stdout().lock();
    writeln!(out, "acceptance {id}: {verdict} ({:.1}s) {detail}", started.elapsed().as_secs_f64()).unwrap();
}

#[test]
fn a1_exact_saw_unbiasedness() {
    let started = Instant::now();
    let mut failures = Vec::new();
    for m in 1..=3 {
        let count = enumerate_csaw(m).unwrap();
        for policy in TrapPolicy::ALL {
            let s = support_unbiasedness_sum(m, policy).unwrap();
            let expected = BigRational::from_integer(BigInt::from(count));
            if s.weighted_sum != expected || !s.probability_mass.is_one() {
                failures.push(format!("m={m} {policy}: sum {} mass {}", s.weighted_sum, s.probability_mass));
            }
        }
    }
    let ok = failures.is_empty() && started.elapsed().as_secs() < 60;
    report("A1", ok, &format!("9 (m, policy) pairs, mismatches {failures:?}"), started);
    assert!(ok, "{failures:?}");
}

#[test]
fn a2_known_count_recovery() {
    let started = Instant::now();
    let truth2 = enumerate_csaw(2).unwrap() as f64;
    let (est, _) = estimate_csaw(2, TrapPolicy::Q3NoTraps, 100_000, &mut rng::seeded(2024)).unwrap();
    let small_ok = (est.z_hat - truth2).abs() <= 3.0 * est.std_error;

    let z10 = 1.56e24;
    let runs: Vec<f64> = (0..50u32)
        .into_par_iter()
        .map(|r| {
            let mut g = rng::stream(77, 10, r, Purpose::Draws);
            estimate_csaw(10, TrapPolicy::Q3NoTraps, 10_000, &mut g).unwrap().0.z_hat
        })
        .collect();
    let within = runs.iter().filter(|&&z| z >= z10 / 3.0 && z <= 3.0 * z10).count();
    let ok = small_ok && within * 10 >= 50 * 9 && started.elapsed().as_secs() < 600;
    report(
        "A2",
        ok,
        &format!(
            "m=2: {:.4} vs {truth2} (se {:.4}); m=10: {within}/50 runs within factor 3 of 1.56e24",
            est.z_hat, est.std_error
        ),
        started,
    );
    assert!(ok);
}

fn saw_mse(policy: TrapPolicy) -> (f64, f64) {
    let mut cfg = ExperimentConfig::saw(10, policy);
    cfg.n = 2000;
    cfg.replications = 100;
    cfg.master_seed = 1;
    cfg.estimators = vec![EstimatorKind::Plain, EstimatorKind::Balanced];
    let r = run_experiment(&cfg, None).unwrap();
    (
        r.row(10.0, EstimatorKind::Balanced).unwrap().mse,
        r.row(10.0, EstimatorKind::Plain).unwrap().mse,
    )
}

#[test]
fn a3_table_one_direction() {
    let started = Instant::now();
    let (b1, p1) = saw_mse(TrapPolicy::Q1AllTraps);
    let (b3, p3) = saw_mse(TrapPolicy::Q3NoTraps);
    let ok = b1 <= 0.5 * p1 && b3 <= 1.5 * p3 && started.elapsed().as_secs() < 900;
    report(
        "A3",
        ok,
        &format!("q1: balanced {b1:.4e} vs plain {p1:.4e}; q3: balanced {b3:.4e} vs plain {p3:.4e}"),
        started,
    );
    assert!(ok);
}

/// Smallest index `i` such that every pair `i <= a < b` passes, computed
/// from scratch.
fn brute_force_choice(values: &[f64], levels: &[f64], c: f64, t: f64) -> usize {
    let n = values.len() as f64;
    let stats: Vec<(f64, f64)> = levels
        .iter()
        .map(|&m| {
            let w: Vec<f64> = values.iter().map(|&y| y.clamp(-m, m)).collect();
            let mean = w.iter().sum::<f64>() / n;
            let var = w.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / n;
            (mean, t * var.sqrt() / (n.sqrt() - t))
        })
        .collect();
    let pass = |a: usize, b: usize| {
        let (ma, sa) = stats[a];
        let (mb, sb) = stats[b];
        let d = (ma - mb).abs();
        if sa == 0.0 && sb == 0.0 {
            d <= 1e-12 * ma.abs().max(mb.abs()).max(1.0)
        } else {
            d <= c * (sa + sb) / 2.0
        }
    };
    let k = levels.len();
    (0..k)
        .find(|&i| (i..k).all(|a| (a + 1..k).all(|b| pass(a, b))))
        .unwrap()
}

#[test]
fn a4_selector_matches_brute_force() {
    let started = Instant::now();
    let mut rng = rng::seeded(4);
    let mut mismatches = 0;
    for case in 0..1000 {
        let n = rng.random_range(2..120);
        let heavy = rng.random_range(0.5..4.0);
        let values: Vec<f64> = (0..n)
            .map(|_| {
                if case % 50 == 0 {
                    3.5
                } else {
                    let u: f64 = rng.random_range(1e-6..1.0);
                    let sign = if rng.random_bool(0.8) { 1.0 } else { -1.0 };
                    sign * u.powf(-1.0 / heavy)
                }
            })
            .collect();
        let k = rng.random_range(1..9);
        let levels: Vec<f64> = (0..k).map(|_| 10f64.powf(rng.random_range(-1.0..3.0))).collect();
        let ladder = ThresholdLadder::new(levels).unwrap();
        let c = rng.random_range(2.01..8.0);
        let t = rng.random_range(0.05..(n as f64).sqrt() * 0.95);
        let params = BalancingParams {
            c,
            t,
            phi_variant: PhiVariant::Average,
            scan: ScanMode::Full,
        };
        let got = select_threshold(&Sample::new(values.clone()).unwrap(), &ladder, &params).unwrap();
        if got.chosen_index != brute_force_choice(&values, ladder.levels(), c, t) {
            mismatches += 1;
        }
    }
    let ok = mismatches == 0 && started.elapsed().as_secs() < 60;
    report("A4", ok, &format!("1000 random instances, {mismatches} mismatches"), started);
    assert!(ok);
}

#[test]
fn a5_balancing_theorem_implication() {
    let started = Instant::now();
    let ladder = ThresholdLadder::new(vec![10.0, 100.0, 200.0, 400.0, 500.0, 550.0]).unwrap();
    let c = 1.0 + 5f64.sqrt();
    let params = BalancingParams {
        c,
        t: 2.0,
        ..BalancingParams::default()
    };
    let big_c = 2.0 + 5f64.sqrt();
    let mut hypothesis_held = 0usize;
    let mut violations = 0usize;
    for (p, &nu) in [1.3, 3.0].iter().enumerate() {
        let problem = make_problem(Family::Exponential, nu).unwrap();
        let theta = problem.true_theta();
        let bias = bias_oracle_quadrature(&problem, &ladder, 1e-11).unwrap().bias;
        let outcomes: Vec<(bool, bool)> = (0..5000u32)
            .into_par_iter()
            .map(|r| {
                let mut g = rng::stream(505, p as u32, r, Purpose::Draws);
                let sample = draw_weights(&problem, 500, &mut g).unwrap();
                let res = select_threshold(&sample, &ladder, &params).unwrap();
                let bounds: Vec<f64> = res.summaries.iter().zip(&bias).map(|(s, b)| b + s.s_hat).collect();
                let hyp = res
                    .summaries
                    .iter()
                    .zip(&bounds)
                    .all(|(s, &bound)| (s.mean - theta).abs() <= bound);
                let best = bounds.iter().cloned().fold(f64::INFINITY, f64::min);
                (hyp, (res.estimate - theta).abs() <= big_c * best)
            })
            .collect();
        for (hyp, concl) in outcomes {
            if hyp {
                hypothesis_held += 1;
                if !concl {
                    violations += 1;
                }
            }
        }
    }
    let ok = violations == 0 && started.elapsed().as_secs() < 600;
    report(
        "A5",
        ok,
        &format!("10000 replications, hypothesis held in {hypothesis_held}, {violations} violations"),
        started,
    );
    assert!(ok);
}

#[test]
fn a6_winsorized_moments_do_not_exceed_raw() {
    let started = Instant::now();
    let mut rng = rng::seeded(6);
    let mut violations = 0;
    let mut checks = 0;
    for _ in 0..1000 {
        let n = rng.random_range(2..200);
        let shift = rng.random_range(-5.0..5.0);
        let values: Vec<f64> = (0..n)
            .map(|_| {
                let u: f64 = rng.random_range(1e-4..1.0);
                shift + if rng.random_bool(0.5) { u.powf(-0.7) } else { -u.powf(-0.4) }
            })
            .collect();
        let raw2 = central_moment(&values, 2);
        let raw4 = central_moment(&values, 4);
        for _ in 0..5 {
            let m = 10f64.powf(rng.random_range(-1.0..2.5));
            let w: Vec<f64> = values.iter().map(|y| y.clamp(-m, m)).collect();
            for (wins, raw) in [(central_moment(&w, 2), raw2), (central_moment(&w, 4), raw4)] {
                checks += 1;
                // Relative slack covers floating-point rounding only.
                if wins > raw * (1.0 + 1e-12) {
                    violations += 1;
                }
            }
        }
    }
    let ok = violations == 0;
    report("A6", ok, &format!("{checks} moment comparisons, {violations} violations"), started);
    assert!(ok);
}

#[test]
fn a7_guarantee_numerics() {
    let started = Instant::now();
    let pdf = |x: f64| (-0.5 * x * x).exp() / (2.0 * std::f64::consts::PI).sqrt();
    let mut worst_cdf = 0.0f64;
    for i in 0..1601 {
        let x = -8.0 + 16.0 * i as f64 / 1600.0;
        let oracle = integrate(pdf, f64::NEG_INFINITY, x, QuadOptions::with_abs_tol(1e-12)).unwrap().value;
        worst_cdf = worst_cdf.max((std_normal_cdf(x).unwrap() - oracle).abs());
    }
    let cdf_ok = worst_cdf <= 1e-9;

    let n = 25u64;
    let mut ts: Vec<f64> = (1..=9).map(|i| 0.5 * i as f64).collect();
    ts.push(5.0 - 1e-3);
    let deltas: Vec<f64> = ts
        .iter()
        .map(|&t| guarantee_probability(&GuaranteeInputs { k_bound: 1.0, n, t, levels: 6 }).unwrap())
        .collect();
    let monotone_ok = deltas.windows(2).all(|w| w[1] < w[0]);

    let t = 2.0;
    let delta = guarantee_probability(&GuaranteeInputs { k_bound: 1.0, n: 1_000_000_000_000, t, levels: 1 }).unwrap();
    let limit = 2.0 * (1.0 - std_normal_cdf(t).unwrap());
    let limit_ok = (delta - limit).abs() <= 1e-4;

    let cc = constant_c(1.0 + 5f64.sqrt(), PhiVariant::Average).unwrap();
    let const_ok = (cc - (2.0 + 5f64.sqrt())).abs() <= 1e-12;

    let ok = cdf_ok && monotone_ok && limit_ok && const_ok;
    report(
        "A7",
        ok,
        &format!(
            "cdf max err {worst_cdf:.2e}; delta monotone {monotone_ok}; limit gap {:.3e}; C(1+sqrt5) = {cc}",
            (delta - limit).abs()
        ),
        started,
    );
    assert!(ok);
}

#[test]
fn a8_infinite_variance_example() {
    let started = Instant::now();
    let problem = make_problem(Family::Normal, 0.01).unwrap();
    let ladder = Family::Normal.default_ladder();
    let params = BalancingParams::default();
    let seeds: [u64; 10] = [1, 2, 3, 4, 5, 6, 7, 8, 9, 10];
    let var = |v: &[f64]| {
        let m = v.iter().sum::<f64>() / v.len() as f64;
        v.iter().map(|x| (x - m).powi(2)).sum::<f64>() / (v.len() as f64 - 1.0)
    };
    let mut good_seeds = 0;
    let mut lines = Vec::new();
    for &seed in &seeds {
        let pairs: Vec<(f64, f64)> = (0..1000u32)
            .into_par_iter()
            .map(|r| {
                let mut g = rng::stream(seed, 0, r, Purpose::Draws);
                let s = draw_weights(&problem, 1000, &mut g).unwrap();
                let plain = balanced_is::is_estimate(&s);
                (plain, select_threshold(&s, &ladder, &params).unwrap().estimate)
            })
            .collect();
        let plain: Vec<f64> = pairs.iter().map(|p| p.0).collect();
        let bal: Vec<f64> = pairs.iter().map(|p| p.1).collect();
        let ratio = var(&bal) / var(&plain);
        let max_plain = plain.iter().fold(0.0f64, |a, &x| a.max(x.abs()));
        if ratio <= 0.1 && max_plain > 5.0 {
            good_seeds += 1;
        }
        lines.push(format!("seed {seed}: ratio {ratio:.3e} max {max_plain:.2}"));
    }
    let ok = good_seeds * 2 >= seeds.len();
    report("A8", ok, &format!("{good_seeds}/10 seeds meet both conditions [{}]", lines.join("; ")), started);
    assert!(ok);
}

#[test]
fn a9_determinism_across_thread_counts() {
    let started = Instant::now();
    let mut synth = ExperimentConfig::synthetic(Family::Exponential, vec![1.3, 2.0, 10.0]);
    synth.n = 500;
    synth.replications = 40;
    synth.master_seed = 9;
    let mut saw = ExperimentConfig::saw(6, TrapPolicy::Q2NoBoundaryTraps);
    saw.n = 200;
    saw.replications = 20;
    saw.master_seed = 9;
    let mut all_equal = true;
    for cfg in [&synth, &saw] {
        let a = estimates_csv(&run_experiment(cfg, Some(1)).unwrap());
        let b = estimates_csv(&run_experiment(cfg, Some(3)).unwrap());
        let c = estimates_csv(&run_experiment(cfg, None).unwrap());
        all_equal &= a == b && b == c;
    }
    report("A9", all_equal, "synthetic and CSAW configs at 1, 3 and default threads", started);
    assert!(all_equal);
}
