//! End-to-end acceptance checks. Prints one PASS/FAIL line per criterion and
//! exits nonzero if any criterion fails.

use std::time::{Duration, Instant};

use fairdiv::bandit::{PolicyKind, ValueModel};
use fairdiv::experiment::suites::{efe_suite, proportional_suite, robust_suite, SuiteReport};
use fairdiv::experiment::{
    demo_lower_bound, fit_regret_slope, run_config, run_single, trace_file_name, ExperimentConfig, MeanSource,
};
use fairdiv::{Family, MeanMatrix, ProblemSpec};
use rayon::prelude::*;

struct Outcome {
    passed: bool,
    detail: String,
}

fn suite_outcome(r: SuiteReport, limit: Duration, extra: Option<String>) -> Outcome {
    let mut detail = format!(
        "{} instances, {} failures, worst ratio {:.4}, {:.2}s",
        r.instances,
        r.failures.len(),
        r.worst_ratio,
        r.elapsed_secs
    );
    if let Some(f) = r.failures.first() {
        detail.push_str(&format!("; first: {f}"));
    }
    let mut passed = r.passed() && r.elapsed_secs < limit.as_secs_f64();
    if let Some(e) = extra {
        detail.push_str(&format!("; {e}"));
        passed &= r.clamp_events == 0;
    }
    Outcome { passed, detail }
}

fn criterion1() -> Outcome {
    suite_outcome(proportional_suite(500, 0xA11CE), Duration::from_secs(60), None)
}

fn criterion2() -> Outcome {
    let r = efe_suite(300, 0xB0B);
    let clamps = format!("clamp events {}", r.clamp_events);
    suite_outcome(r, Duration::from_secs(120), Some(clamps))
}

fn criterion3() -> Outcome {
    suite_outcome(robust_suite(200, 0xC0FFEE), Duration::from_secs(60), None)
}

fn binding_instance() -> MeanMatrix {
    MeanMatrix::from_rows(vec![vec![3.0, 3.0], vec![1.0, 1.0]]).unwrap()
}

fn criterion4() -> Outcome {
    let start = Instant::now();
    let mu = binding_instance();
    let mut points = Vec::new();
    let mut means = Vec::new();
    for exp in [12u32, 14, 16, 18] {
        let t = 1u64 << exp;
        let spec = ProblemSpec::uniform(2, 2, t, 1.0, 3.0, Family::Efe).unwrap();
        let regrets: Vec<f64> = (0..50u64)
            .into_par_iter()
            .map(|seed| {
                run_single(&spec, &mu, ValueModel::Gaussian, PolicyKind::Etc, seed)
                    .expect("episode")
                    .regret
                    .cumulative
            })
            .collect();
        let mean = regrets.iter().sum::<f64>() / regrets.len() as f64;
        means.push(format!("T=2^{exp}: {mean:.3e}"));
        points.push((t as f64, mean));
    }
    let elapsed = start.elapsed();
    let means = means.join(", ");
    let largest = points.iter().map(|p| p.1.abs()).fold(0.0, f64::max);
    if largest < 1e-9 {
        return Outcome {
            passed: false,
            detail: format!(
                "regret is zero up to rounding at every horizon, so no slope exists \
                 (the committed allocation attains the optimum); mean regret {means}; {:.1}s",
                elapsed.as_secs_f64()
            ),
        };
    }
    match fit_regret_slope(&points) {
        Ok(fit) => Outcome {
            passed: (0.55..=0.85).contains(&fit.slope) && elapsed < Duration::from_secs(600),
            detail: format!(
                "slope {:.4} ± {:.4} (window [0.55, 0.85]); mean regret {means}; {:.1}s",
                fit.slope,
                fit.stderr,
                elapsed.as_secs_f64()
            ),
        },
        Err(e) => Outcome {
            passed: false,
            detail: format!("no slope: {e}; mean regret {means}"),
        },
    }
}

fn criterion5() -> Outcome {
    let start = Instant::now();
    let mu = binding_instance();
    let spec = ProblemSpec::uniform(2, 2, 4096, 1.0, 3.0, Family::Efe).unwrap();
    let flags: Vec<(bool, bool)> = (0..200u64)
        .into_par_iter()
        .map(|seed| {
            let r = run_single(&spec, &mu, ValueModel::Gaussian, PolicyKind::Etc, seed).expect("episode");
            (r.committed_satisfies.expect("committed"), r.mu_in_box.expect("estimate"))
        })
        .collect();
    let violated = flags.iter().filter(|f| !f.0).count();
    let covered = flags.iter().filter(|f| f.1).count();
    let covered_ok = flags.iter().filter(|f| f.1 && f.0).count();
    let rate = violated as f64 / flags.len() as f64;
    let elapsed = start.elapsed();
    Outcome {
        passed: rate <= 0.05 && covered_ok == covered && elapsed < Duration::from_secs(300),
        detail: format!(
            "{violated}/200 committed allocations violate the true constraints; \
             {covered_ok}/{covered} runs with the means inside the box are safe; {:.1}s",
            elapsed.as_secs_f64()
        ),
    }
}

/// Runs within the envelope `sqrt(tau) * ln T` at every step.
fn envelope_hits(mu: &MeanMatrix, a: f64, b: f64, half_width: f64) -> usize {
    let t = 4096u64;
    let spec = ProblemSpec::uniform(2, 2, t, a, b, Family::Efe).unwrap();
    let log_t = (t as f64).ln();
    (0..100u64)
        .into_par_iter()
        .filter(|&seed| {
            let r = run_single(&spec, mu, ValueModel::BoundedUniform { half_width }, PolicyKind::Etc, seed)
                .expect("episode");
            r.fairness
                .envy
                .iter()
                .enumerate()
                .all(|(t, &e)| e <= ((t + 1) as f64).sqrt() * log_t)
        })
        .count()
}

fn criterion6() -> Outcome {
    let start = Instant::now();
    // The binding instance rescaled so that every value lies in [0, 1].
    let mu = MeanMatrix::from_rows(vec![vec![0.75, 0.75], vec![0.25, 0.25]]).unwrap();
    let hits = envelope_hits(&mu, 0.25, 0.75, 0.25);
    let raw = envelope_hits(&binding_instance(), 1.0, 3.0, 0.5);
    let elapsed = start.elapsed();
    Outcome {
        passed: hits >= 95 && elapsed < Duration::from_secs(300),
        detail: format!(
            "{hits}/100 runs inside the envelope (values in [0, 1]); \
             unscaled instance with half-width 0.5: {raw}/100 (informational); {:.1}s",
            elapsed.as_secs_f64()
        ),
    }
}

fn criterion7() -> Outcome {
    let start = Instant::now();
    let r = demo_lower_bound(100).expect("demo");
    let elapsed = start.elapsed();
    Outcome {
        passed: r.max_deviation <= 2e-3 && (r.per_step_gap - 0.5).abs() <= 0.01 && elapsed < Duration::from_secs(10),
        detail: format!(
            "max deviation from 1/2 {:.2e}, per-step gap {:.6}; {:.2}s",
            r.max_deviation,
            r.per_step_gap,
            elapsed.as_secs_f64()
        ),
    }
}

fn criterion8() -> Outcome {
    let dirs = [tempfile::tempdir().unwrap(), tempfile::tempdir().unwrap()];
    let make = |dir: &std::path::Path| ExperimentConfig {
        n: 3,
        m: 2,
        a: 0.5,
        b: 2.0,
        family: Family::Pe,
        item_distribution: Some(vec![0.3, 0.7]),
        means: MeanSource::Random { seed: 17 },
        value_model: ValueModel::Gaussian,
        policy: PolicyKind::Etc,
        horizons: vec![300, 1000],
        seeds: vec![1, 2, 3],
        output_dir: dir.to_path_buf(),
    };
    let mut files = 0;
    let mut mismatched = Vec::new();
    let cfgs: Vec<ExperimentConfig> = dirs.iter().map(|d| make(d.path())).collect();
    for cfg in &cfgs {
        run_config(cfg, true).expect("run");
    }
    for &h in &cfgs[0].horizons {
        for &s in &cfgs[0].seeds {
            let name = trace_file_name(h, s);
            let a = std::fs::read(dirs[0].path().join(&name)).unwrap();
            let b = std::fs::read(dirs[1].path().join(&name)).unwrap();
            files += 1;
            if a != b {
                mismatched.push(name);
            }
        }
    }
    Outcome {
        passed: mismatched.is_empty() && files == 6,
        detail: format!("{files} trace files compared, {} differ", mismatched.len()),
    }
}

type Criterion = (&'static str, fn() -> Outcome);

fn main() {
    let criteria: [Criterion; 8] = [
        ("proportionality transform suite", criterion1),
        ("EF transform suite", criterion2),
        ("robust LP equivalence", criterion3),
        ("regret scaling", criterion4),
        ("safety frequency", criterion5),
        ("realized-envy envelope", criterion6),
        ("lower-bound demo", criterion7),
        ("determinism", criterion8),
    ];
    let mut failed = 0;
    for (i, (name, f)) in criteria.iter().enumerate() {
        let out = f();
        let tag = if out.passed { "PASS" } else { "FAIL" };
        println!("criterion {} [{tag}] {name}: {}", i + 1, out.detail);
        if !out.passed {
            failed += 1;
        }
    }
    println!("acceptance: {} passed, {failed} failed", criteria.len() - failed);
    if failed > 0 {
        std::process::exit(1);
    }
}
