use std::io::Write;
use std::path::{Path, PathBuf};
use std::time::Instant;

use rayon::prelude::*;
use serde::Serialize;

use super::config::ExperimentConfig;
use super::slope::{fit_regret_slope, SlopeFit};
use crate::bandit::{
    make_policy, realized_series, regret_against, run_episode, Environment, EpisodeTrace, FairnessSeries,
    PolicyKind, Regret, ValueModel,
};
use crate::constraints::{all_satisfied, build_constraints};
use crate::error::{Error, Result};
use crate::lp::solve_optimal_fair;
use crate::matrix::MeanMatrix;
use crate::model::ProblemSpec;
use crate::FEASIBILITY_TOL;

pub const CSV_COLUMNS: [&str; 9] = [
    "t",
    "k",
    "i",
    "value",
    "phase",
    "expected_sw",
    "per_step_regret",
    "realized_envy",
    "realized_prop_gap",
];

/// One finished episode with its metrics.
pub struct RunResult {
    pub spec: ProblemSpec,
    pub policy: PolicyKind,
    pub seed: u64,
    pub trace: EpisodeTrace,
    pub regret: Regret,
    pub fairness: FairnessSeries,
    /// Whether the committed allocation satisfies the true constraints.
    pub committed_satisfies: Option<bool>,
    /// Whether the true means lie in the clamped confidence box.
    pub mu_in_box: Option<bool>,
}

impl RunResult {
    pub fn summary(&self) -> RunSummary {
        let max = |v: &[f64]| v.iter().copied().fold(0.0, f64::max);
        RunSummary {
            horizon: self.spec.horizon,
            seed: self.seed,
            cumulative_regret: self.regret.cumulative,
            committed: self.trace.committed.as_ref().map(|x| x.to_rows()),
            committed_satisfies: self.committed_satisfies,
            mu_in_box: self.mu_in_box,
            max_realized_envy: max(&self.fairness.envy),
            max_realized_prop_gap: max(&self.fairness.prop_gap),
            trace_file: None,
        }
    }
}

/// Runs one episode of `policy` on `true_means` and measures it.
pub fn run_single(
    spec: &ProblemSpec,
    true_means: &MeanMatrix,
    value_model: ValueModel,
    policy: PolicyKind,
    seed: u64,
) -> Result<RunResult> {
    let mut env = Environment::new(spec.clone(), true_means.clone(), value_model, seed)?;
    let eff = env.effective_means().clone();
    let mut pol = make_policy(policy, spec, &eff)?;
    let trace = run_episode(&mut env, pol.as_mut(), spec.horizon)?;
    let optimum = solve_optimal_fair(&eff, spec.family)?.value;
    let regret = regret_against(&trace, optimum);
    let fairness = realized_series(&trace);
    let committed_satisfies = match &trace.committed {
        Some(x) => {
            let set = build_constraints(spec.family, &eff)?;
            Some(all_satisfied(&set, x, FEASIBILITY_TOL)?.satisfied)
        }
        None => None,
    };
    let mu_in_box = match pol.estimate() {
        Some(st) => Some(st.confidence_box()?.contains(true_means)),
        None => None,
    };
    Ok(RunResult {
        spec: spec.clone(),
        policy,
        seed,
        trace,
        regret,
        fairness,
        committed_satisfies,
        mu_in_box,
    })
}

/// The CSV trace, starting with a `#` comment line naming the seed.
pub fn trace_csv(run: &RunResult) -> Result<Vec<u8>> {
    let mut out = Vec::new();
    writeln!(
        out,
        "# seed={} horizon={} policy={} family={}",
        run.seed,
        run.spec.horizon,
        run.policy.as_str(),
        run.spec.family
    )?;
    let mut w = csv::Writer::from_writer(out);
    let csv_err = |e: csv::Error| Error::invalid(format!("csv: {e}"));
    w.write_record(CSV_COLUMNS).map_err(csv_err)?;
    let tr = &run.trace;
    for t in 0..tr.len() {
        w.write_record([
            t.to_string(),
            tr.item_types[t].to_string(),
            tr.recipients[t].to_string(),
            tr.observed_value(t).to_string(),
            tr.phases[t].as_str().to_string(),
            tr.expected_sw[t].to_string(),
            run.regret.per_step[t].to_string(),
            run.fairness.envy[t].to_string(),
            run.fairness.prop_gap[t].to_string(),
        ])
        .map_err(csv_err)?;
    }
    w.into_inner().map_err(|e| Error::invalid(format!("csv: {e}")))
}

/// Writes `bytes` to a sibling temp file and renames it over `path`.
pub fn write_atomic(path: &Path, bytes: &[u8]) -> Result<()> {
    let name = path
        .file_name()
        .ok_or_else(|| Error::invalid(format!("not a file path: {}", path.display())))?;
    let tmp = path.with_file_name(format!(".{}.tmp{}", name.to_string_lossy(), std::process::id()));
    std::fs::write(&tmp, bytes)?;
    if let Err(e) = std::fs::rename(&tmp, path) {
        let _ = std::fs::remove_file(&tmp);
        return Err(e.into());
    }
    Ok(())
}

/// A rayon pool capped by `FAIRDIV_THREADS` when set.
pub fn thread_pool() -> Result<rayon::ThreadPool> {
    let mut builder = rayon::ThreadPoolBuilder::new();
    if let Ok(v) = std::env::var("FAIRDIV_THREADS") {
        let k: usize = v
            .trim()
            .parse()
            .map_err(|_| Error::invalid(format!("FAIRDIV_THREADS must be a positive integer, got `{v}`")))?;
        if k == 0 {
            return Err(Error::invalid("FAIRDIV_THREADS must be positive"));
        }
        builder = builder.num_threads(k);
    }
    builder
        .build()
        .map_err(|e| Error::invalid(format!("thread pool: {e}")))
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct RunSummary {
    pub horizon: u64,
    pub seed: u64,
    pub cumulative_regret: f64,
    pub committed: Option<Vec<Vec<f64>>>,
    pub committed_satisfies: Option<bool>,
    pub mu_in_box: Option<bool>,
    pub max_realized_envy: f64,
    pub max_realized_prop_gap: f64,
    pub trace_file: Option<String>,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct HorizonMean {
    pub horizon: u64,
    pub runs: usize,
    pub mean_cumulative_regret: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct SummaryReport {
    pub config: ExperimentConfig,
    pub true_means: Vec<Vec<f64>>,
    pub runs: Vec<RunSummary>,
    pub mean_regret: Vec<HorizonMean>,
    pub slope: Option<SlopeFit>,
    pub slope_note: Option<String>,
    pub wall_clock_secs: f64,
}

pub fn trace_file_name(horizon: u64, seed: u64) -> String {
    format!("trace_T{horizon}_seed{seed}.csv")
}

/// Averages cumulative regret per horizon, in ascending horizon order.
pub fn mean_regret_by_horizon(runs: &[RunSummary]) -> Vec<HorizonMean> {
    let mut hs: Vec<u64> = runs.iter().map(|r| r.horizon).collect();
    hs.sort_unstable();
    hs.dedup();
    hs.into_iter()
        .map(|h| {
            let vals: Vec<f64> = runs.iter().filter(|r| r.horizon == h).map(|r| r.cumulative_regret).collect();
            HorizonMean {
                horizon: h,
                runs: vals.len(),
                mean_cumulative_regret: vals.iter().sum::<f64>() / vals.len() as f64,
            }
        })
        .collect()
}

/// Runs every `(horizon, seed)` pair of the config, in parallel.
///
/// With `write_traces` each run's CSV lands in the output directory; the
/// summary is always written as `summary.json`. Files from a failed run are
/// removed.
pub fn run_config(cfg: &ExperimentConfig, write_traces: bool) -> Result<SummaryReport> {
    cfg.validate()?;
    let start = Instant::now();
    let mu = cfg.true_means()?;
    let dir = cfg.output_dir.clone();
    std::fs::create_dir_all(&dir)?;
    let jobs: Vec<(u64, u64)> = cfg
        .horizons
        .iter()
        .flat_map(|&h| cfg.seeds.iter().map(move |&s| (h, s)))
        .collect();
    let pool = thread_pool()?;
    let results: Vec<Result<(RunSummary, Option<PathBuf>)>> = pool.install(|| {
        jobs.par_iter()
            .map(|&(h, s)| {
                let spec = cfg.spec(h)?;
                let run = run_single(&spec, &mu, cfg.value_model, cfg.policy, s)?;
                let mut summary = run.summary();
                let mut written = None;
                if write_traces {
                    let name = trace_file_name(h, s);
                    let path = dir.join(&name);
                    write_atomic(&path, &trace_csv(&run)?)?;
                    summary.trace_file = Some(name);
                    written = Some(path);
                }
                Ok((summary, written))
            })
            .collect()
    });

    let mut runs = Vec::with_capacity(results.len());
    let mut written = Vec::new();
    let mut first_err = None;
    for r in results {
        match r {
            Ok((s, p)) => {
                written.extend(p);
                runs.push(s);
            }
            Err(e) => {
                first_err.get_or_insert(e);
            }
        }
    }
    if let Some(e) = first_err {
        for p in written {
            let _ = std::fs::remove_file(p);
        }
        return Err(e);
    }

    let mean_regret = mean_regret_by_horizon(&runs);
    let (slope, slope_note) = if mean_regret.len() < 3 {
        (None, Some(format!("{} distinct horizons; a slope needs 3", mean_regret.len())))
    } else {
        let pts: Vec<(f64, f64)> = mean_regret
            .iter()
            .map(|h| (h.horizon as f64, h.mean_cumulative_regret))
            .collect();
        match fit_regret_slope(&pts) {
            Ok(fit) => (Some(fit), None),
            Err(e) => (None, Some(e.to_string())),
        }
    };
    let report = SummaryReport {
        config: cfg.clone(),
        true_means: mu.to_rows(),
        runs,
        mean_regret,
        slope,
        slope_note,
        wall_clock_secs: start.elapsed().as_secs_f64(),
    };
    write_atomic(&dir.join("summary.json"), &serde_json::to_vec_pretty(&report)?)?;
    Ok(report)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::Family;

    fn spec(t: u64) -> ProblemSpec {
        ProblemSpec::uniform(2, 2, t, 1.0, 3.0, Family::Efe).unwrap()
    }

    #[test]
    fn csv_has_header_and_one_row_per_round() {
        let mu = MeanMatrix::from_rows(vec![vec![2.0, 1.0], vec![1.0, 2.0]]).unwrap();
        let run = run_single(&spec(20), &mu, ValueModel::Gaussian, PolicyKind::Etc, 3).unwrap();
        let text = String::from_utf8(trace_csv(&run).unwrap()).unwrap();
        let lines: Vec<&str> = text.lines().collect();
        assert_eq!(lines[0], "# seed=3 horizon=20 policy=etc family=efe");
        assert_eq!(lines[1], CSV_COLUMNS.join(","));
        assert_eq!(lines.len(), 22);
        assert!(lines[2].contains(",warmup,"));
        assert!(lines[21].contains(",commit,"));
    }

    #[test]
    fn etc_reports_safety_flags() {
        let mu = MeanMatrix::from_rows(vec![vec![3.0, 3.0], vec![1.0, 1.0]]).unwrap();
        let run = run_single(&spec(512), &mu, ValueModel::Gaussian, PolicyKind::Etc, 1).unwrap();
        assert!(run.committed_satisfies.is_some());
        assert!(run.mu_in_box.is_some());
        let run = run_single(&spec(64), &mu, ValueModel::Gaussian, PolicyKind::Uar, 1).unwrap();
        assert_eq!(run.committed_satisfies, None);
        assert_eq!(run.mu_in_box, None);
    }

    #[test]
    fn atomic_write_replaces_content() {
        let dir = tempfile::tempdir().unwrap();
        let p = dir.path().join("x.txt");
        write_atomic(&p, b"one").unwrap();
        write_atomic(&p, b"two").unwrap();
        assert_eq!(std::fs::read(&p).unwrap(), b"two");
        assert_eq!(std::fs::read_dir(dir.path()).unwrap().count(), 1);
    }
}
