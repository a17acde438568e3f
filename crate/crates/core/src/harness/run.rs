//! Running replicates of a configured experiment.

use std::fs::File;
use std::io::{BufWriter, Write};
use std::path::{Path, PathBuf};

use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::harness::config::ExperimentConfig;
use crate::harness::scenario::{Instance, Master};
use crate::harness::summary::{self, Aggregate, SeedSummary};
use crate::rng::replicate_seed;
use crate::trace::TraceWriter;

/// Outcome of one replicate.
#[derive(Debug, Clone)]
pub struct SeedRun {
    pub summary: SeedSummary,
    /// Cumulative pseudo-regret at [`curve_rounds`].
    pub curve: Vec<(u64, f64)>,
    pub diagnostics: Vec<String>,
}

/// Outcome of a whole experiment.
#[derive(Debug, Clone)]
pub struct RunOutput {
    pub runs: Vec<SeedRun>,
    pub mean_curve: Vec<(u64, f64)>,
    pub aggregate: Aggregate,
}

pub fn slope_window(cfg: &ExperimentConfig) -> (u64, u64) {
    match cfg.slope_window {
        Some([lo, hi]) => (lo, hi),
        None => summary::default_window(cfg.horizon),
    }
}

/// Rounds at which regret curves are kept: powers of two, the horizon, and
/// the checkpoints of the slope fit.
pub fn curve_rounds(cfg: &ExperimentConfig) -> Vec<u64> {
    let t = cfg.horizon;
    let (lo, hi) = slope_window(cfg);
    let mut rounds: Vec<u64> = (0..64).map(|k| 1u64 << k).take_while(|&r| r <= t).collect();
    rounds.push(t);
    let mut x = lo as f64;
    while x < hi as f64 {
        rounds.push((x.round() as u64).clamp(1, t));
        x *= 2f64.powf(0.25);
    }
    rounds.push(hi);
    rounds.sort_unstable();
    rounds.dedup();
    rounds
}

fn is_checkpoint(t: u64, horizon: u64) -> bool {
    t.is_power_of_two() || t == horizon
}

pub fn trace_path(dir: &Path, index: u64) -> PathBuf {
    dir.join(format!("trace_seed{index:03}.csv"))
}

/// Runs replicate `index` of `cfg`, streaming its trace to `trace` if given.
pub fn run_seed<W: Write>(cfg: &ExperimentConfig, index: u64, trace: Option<W>) -> Result<SeedRun> {
    let seed = replicate_seed(cfg.master_seed, index);
    let mut inst = Instance::build(cfg, seed)?;
    let learners = match cfg.master {
        crate::harness::config::MasterKind::Single => 1,
        _ => cfg.learner_count(),
    };
    let mut writer = trace.map(|w| TraceWriter::new(w, learners)).transpose()?;
    let rounds = curve_rounds(cfg);
    let mut next = 0;
    let mut curve = Vec::with_capacity(rounds.len());
    let mut eliminations = Vec::new();
    let mut final_regret = 0.0;
    for t in 1..=cfg.horizon {
        let r = inst.step()?;
        if let Some(w) = writer.as_mut() {
            if !cfg.checkpoint || is_checkpoint(t, cfg.horizon) {
                w.write(&r)?;
            }
        }
        eliminations.extend(r.eliminated.iter().map(|&i| (i, t)));
        if next < rounds.len() && rounds[next] == t {
            curve.push((t, r.cum_pseudo_regret));
            next += 1;
        }
        final_regret = r.cum_pseudo_regret;
    }
    if let Some(w) = writer {
        w.finish()?.flush()?;
    }
    let epoch_starts = match &inst.master {
        Master::Adversarial(m) => m.epoch_starts().to_vec(),
        _ => Vec::new(),
    };
    let oracle_regret = match cfg.oracle_learner {
        Some(i) => {
            let mut solo = Instance::single(cfg, seed, i)?;
            for _ in 0..cfg.horizon {
                solo.step()?;
            }
            Some(solo.master.regret().total())
        }
        None => None,
    };
    Ok(SeedRun {
        summary: SeedSummary {
            index,
            seed,
            final_regret,
            eliminations,
            epoch_starts,
            oracle_regret,
        },
        curve,
        diagnostics: inst.master.diagnostics().to_vec(),
    })
}

/// Runs all replicates of `cfg` in parallel, writing traces and summaries to
/// `out_dir` when given. Results do not depend on the thread count.
pub fn run_experiment(cfg: &ExperimentConfig, out_dir: Option<&Path>, threads: Option<usize>) -> Result<RunOutput> {
    cfg.validate()?;
    if let Some(dir) = out_dir {
        std::fs::create_dir_all(dir)?;
        std::fs::write(dir.join("config.toml"), cfg.to_toml())?;
    }
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(threads.unwrap_or(0))
        .build()
        .map_err(|e| Error::Config(format!("thread pool: {e}")))?;
    let runs: Vec<SeedRun> = pool.install(|| {
        (0..cfg.seeds)
            .into_par_iter()
            .map(|k| match out_dir {
                Some(dir) => {
                    let f = BufWriter::new(File::create(trace_path(dir, k))?);
                    run_seed(cfg, k, Some(f))
                }
                None => run_seed::<std::io::Sink>(cfg, k, None),
            })
            .collect::<Result<Vec<_>>>()
    })?;
    let curves: Vec<Vec<(u64, f64)>> = runs.iter().map(|r| r.curve.clone()).collect();
    let mean_curve = summary::mean_curve(&curves);
    let seeds: Vec<SeedSummary> = runs.iter().map(|r| r.summary.clone()).collect();
    let aggregate = summary::aggregate(&seeds, &mean_curve, slope_window(cfg));
    if let Some(dir) = out_dir {
        summary::write_summary(dir, &cfg.scenario, &seeds, &aggregate)?;
        let diagnostics: Vec<String> = runs
            .iter()
            .flat_map(|r| r.diagnostics.iter().map(move |d| format!("seed {}: {d}", r.summary.index)))
            .collect();
        if !diagnostics.is_empty() {
            std::fs::write(dir.join("diagnostics.txt"), diagnostics.join("\n") + "\n")?;
        }
    }
    Ok(RunOutput {
        runs,
        mean_curve,
        aggregate,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::harness::config::preset;

    #[test]
    fn curve_rounds_cover_checkpoints() {
        let mut cfg = preset("scripted-gap").unwrap();
        cfg.horizon = 1000;
        let r = curve_rounds(&cfg);
        assert_eq!(r[0], 1);
        assert_eq!(*r.last().unwrap(), 1000);
        assert!(r.contains(&512) && r.contains(&15));
        assert!(r.windows(2).all(|w| w[0] < w[1]));
    }

    #[test]
    fn traces_are_identical_across_thread_counts() {
        let mut cfg = preset("kappa-tuning").unwrap();
        cfg.horizon = 300;
        cfg.seeds = 3;
        cfg.oracle_learner = None;
        let a = tempfile::tempdir().unwrap();
        let b = tempfile::tempdir().unwrap();
        run_experiment(&cfg, Some(a.path()), Some(1)).unwrap();
        run_experiment(&cfg, Some(b.path()), Some(3)).unwrap();
        for k in 0..3 {
            let x = std::fs::read(trace_path(a.path(), k)).unwrap();
            let y = std::fs::read(trace_path(b.path(), k)).unwrap();
            assert_eq!(x, y);
        }
    }

    #[test]
    fn checkpoint_traces_keep_powers_of_two() {
        let mut cfg = preset("scripted-survival").unwrap();
        cfg.horizon = 100;
        cfg.checkpoint = true;
        let mut buf = Vec::new();
        run_seed(&cfg, 0, Some(&mut buf)).unwrap();
        let text = String::from_utf8(buf).unwrap();
        let ts: Vec<&str> = text.lines().skip(1).map(|l| l.split(',').next().unwrap()).collect();
        assert_eq!(ts, ["1", "2", "4", "8", "16", "32", "64", "100"]);
    }
}
