//! Per-seed and aggregate summaries of experiment runs.

use std::fmt::Write as _;
use std::path::Path;

use crate::error::{Error, Result};

/// Least-squares slope of `ln Reg(t)` against `ln t`.
///
/// `points` are `(t, Reg(t))` pairs in increasing `t`, e.g. the rows of a
/// trace. Checkpoints are spaced geometrically (ratio `2^{1/4}`) over
/// `[t_min, t_max]`; each takes the first point at or after it.
pub fn fit_loglog_slope(points: &[(u64, f64)], t_min: u64, t_max: u64) -> Result<f64> {
    if t_min == 0 || t_max <= t_min {
        return Err(Error::Slope(format!("invalid window [{t_min}, {t_max}]")));
    }
    let mut targets = Vec::new();
    let mut x = t_min as f64;
    while x < t_max as f64 {
        targets.push(x.round() as u64);
        x *= 2f64.powf(0.25);
    }
    targets.push(t_max);
    let mut picked: Vec<(u64, f64)> = Vec::new();
    let mut k = 0;
    for target in targets {
        while k < points.len() && points[k].0 < target {
            k += 1;
        }
        if k == points.len() || points[k].0 > t_max {
            break;
        }
        if picked.last().is_none_or(|p| p.0 != points[k].0) {
            picked.push(points[k]);
        }
    }
    if picked.len() < 2 {
        return Err(Error::Slope("fewer than two checkpoints in window".into()));
    }
    if let Some(p) = picked.iter().find(|p| !(p.1 > 0.0)) {
        return Err(Error::Slope(format!("regret {} at t = {} is not positive", p.1, p.0)));
    }
    let xs: Vec<f64> = picked.iter().map(|p| (p.0 as f64).ln()).collect();
    let ys: Vec<f64> = picked.iter().map(|p| p.1.ln()).collect();
    let n = xs.len() as f64;
    let mx = xs.iter().sum::<f64>() / n;
    let my = ys.iter().sum::<f64>() / n;
    let sxy: f64 = xs.iter().zip(&ys).map(|(x, y)| (x - mx) * (y - my)).sum();
    let sxx: f64 = xs.iter().map(|x| (x - mx) * (x - mx)).sum();
    Ok(sxy / sxx)
}

/// Ratio of mean final regrets, master over the reference learner.
pub fn compare_to_oracle(master_finals: &[f64], oracle_finals: &[f64]) -> Result<f64> {
    if master_finals.is_empty() || oracle_finals.is_empty() {
        return Err(Error::Input("need at least one run on each side".into()));
    }
    let m = master_finals.iter().sum::<f64>() / master_finals.len() as f64;
    let o = oracle_finals.iter().sum::<f64>() / oracle_finals.len() as f64;
    Ok(m / o)
}

/// Pointwise mean of several curves sampled at the same rounds.
pub fn mean_curve(curves: &[Vec<(u64, f64)>]) -> Vec<(u64, f64)> {
    let Some(first) = curves.first() else {
        return Vec::new();
    };
    let n = curves.len() as f64;
    (0..first.len())
        .map(|k| (first[k].0, curves.iter().map(|c| c[k].1).sum::<f64>() / n))
        .collect()
}

/// Slope of the regret accumulated since the final epoch began.
///
/// Each run is its per-round cumulative regret and the first round of its
/// final epoch. Curves are re-based to zero at that round, aligned on rounds
/// since the epoch start, truncated to the shortest, averaged, and fitted on
/// `[L/64, L]` where `L` is the common length.
pub fn final_epoch_slope(runs: &[(Vec<f64>, u64)]) -> Result<f64> {
    let mut curves = Vec::with_capacity(runs.len());
    for (regret, start) in runs {
        let s = *start as usize;
        if s == 0 || s > regret.len() {
            return Err(Error::Input(format!("epoch start {s} outside a run of {} rounds", regret.len())));
        }
        let base = if s == 1 { 0.0 } else { regret[s - 2] };
        curves.push(
            regret[s - 1..]
                .iter()
                .enumerate()
                .map(|(k, r)| (k as u64 + 1, r - base))
                .collect::<Vec<_>>(),
        );
    }
    let len = curves.iter().map(Vec::len).min().unwrap_or(0);
    for c in &mut curves {
        c.truncate(len);
    }
    let (lo, hi) = default_window(len as u64);
    fit_loglog_slope(&mean_curve(&curves), lo, hi)
}

/// Empirical quantile by linear interpolation between order statistics.
pub fn quantile(values: &[f64], q: f64) -> f64 {
    let mut v = values.to_vec();
    v.sort_by(f64::total_cmp);
    if v.is_empty() {
        return f64::NAN;
    }
    let pos = q.clamp(0.0, 1.0) * (v.len() - 1) as f64;
    let lo = pos.floor() as usize;
    let hi = pos.ceil() as usize;
    v[lo] + (v[hi] - v[lo]) * (pos - lo as f64)
}

/// Outcome of one replicate.
#[derive(Debug, Clone, PartialEq)]
pub struct SeedSummary {
    pub index: u64,
    pub seed: u64,
    pub final_regret: f64,
    /// `(learner, round)` for every elimination.
    pub eliminations: Vec<(usize, u64)>,
    /// First round of every epoch (adversarial master); empty otherwise.
    pub epoch_starts: Vec<u64>,
    /// Final regret of the reference learner run alone, if requested.
    pub oracle_regret: Option<f64>,
}

/// Aggregate statistics over replicates.
#[derive(Debug, Clone, PartialEq)]
pub struct Aggregate {
    pub seeds: usize,
    pub mean: f64,
    pub q10: f64,
    pub median: f64,
    pub q90: f64,
    pub slope: Option<f64>,
    pub slope_window: (u64, u64),
    pub oracle_ratio: Option<f64>,
    /// Fraction of replicates with at least one elimination.
    pub elimination_rate: f64,
}

/// Default slope window `[max(1, T/64), T]`.
pub fn default_window(horizon: u64) -> (u64, u64) {
    ((horizon / 64).max(1), horizon)
}

pub fn aggregate(seeds: &[SeedSummary], mean_regret: &[(u64, f64)], window: (u64, u64)) -> Aggregate {
    let finals: Vec<f64> = seeds.iter().map(|s| s.final_regret).collect();
    let oracle: Vec<f64> = seeds.iter().filter_map(|s| s.oracle_regret).collect();
    let oracle_ratio = (oracle.len() == finals.len())
        .then(|| compare_to_oracle(&finals, &oracle).ok())
        .flatten();
    let eliminated = seeds.iter().filter(|s| !s.eliminations.is_empty()).count();
    Aggregate {
        seeds: seeds.len(),
        mean: finals.iter().sum::<f64>() / finals.len().max(1) as f64,
        q10: quantile(&finals, 0.1),
        median: quantile(&finals, 0.5),
        q90: quantile(&finals, 0.9),
        slope: fit_loglog_slope(mean_regret, window.0, window.1).ok(),
        slope_window: window,
        oracle_ratio,
        elimination_rate: eliminated as f64 / seeds.len().max(1) as f64,
    }
}

fn join<T: ToString>(items: impl Iterator<Item = T>) -> String {
    items.map(|x| x.to_string()).collect::<Vec<_>>().join(";")
}

/// Writes `summary.csv` (one row per replicate) and `summary.txt`.
pub fn write_summary(dir: &Path, scenario: &str, seeds: &[SeedSummary], agg: &Aggregate) -> Result<()> {
    let mut w = csv::Writer::from_path(dir.join("summary.csv"))?;
    w.write_record([
        "seed_index",
        "seed",
        "final_regret",
        "eliminations",
        "epoch_starts",
        "oracle_final_regret",
    ])?;
    for s in seeds {
        w.write_record([
            s.index.to_string(),
            s.seed.to_string(),
            s.final_regret.to_string(),
            join(s.eliminations.iter().map(|(i, t)| format!("{i}@{t}"))),
            join(s.epoch_starts.iter()),
            s.oracle_regret.map(|r| r.to_string()).unwrap_or_default(),
        ])?;
    }
    w.flush()?;
    std::fs::write(dir.join("summary.txt"), render(scenario, agg))?;
    Ok(())
}

pub fn render(scenario: &str, agg: &Aggregate) -> String {
    let mut s = String::new();
    let _ = writeln!(s, "scenario: {scenario}");
    let _ = writeln!(s, "seeds: {}", agg.seeds);
    let _ = writeln!(s, "final regret mean: {:.4}", agg.mean);
    let _ = writeln!(
        s,
        "final regret quantiles (10/50/90%): {:.4} / {:.4} / {:.4}",
        agg.q10, agg.median, agg.q90
    );
    match agg.slope {
        Some(v) => {
            let _ = writeln!(
                s,
                "log-log slope of mean regret on [{}, {}]: {v:.4}",
                agg.slope_window.0, agg.slope_window.1
            );
        }
        None => {
            let _ = writeln!(s, "log-log slope: undefined");
        }
    }
    if let Some(r) = agg.oracle_ratio {
        let _ = writeln!(s, "ratio to reference learner: {r:.4}");
    }
    let _ = writeln!(s, "runs with eliminations: {:.1}%", 100.0 * agg.elimination_rate);
    s
}

/// What can be recovered from a trace CSV.
#[derive(Debug, Clone, PartialEq)]
pub struct ParsedTrace {
    pub learners: usize,
    /// `(t, cumulative pseudo-regret)` per row.
    pub regret: Vec<(u64, f64)>,
    pub eliminations: Vec<(usize, u64)>,
    /// Rows where the learners' play counts sum to one. With epoch-local
    /// statistics these are the epoch starts.
    pub fresh_rows: Vec<u64>,
    pub rows: usize,
}

/// Reads a trace written by [`crate::trace::TraceWriter`].
pub fn parse_trace(path: &Path) -> Result<ParsedTrace> {
    let mut r = csv::Reader::from_path(path)?;
    let headers = r.headers()?.clone();
    if headers.len() < 5 || (headers.len() - 5) % 4 != 0 || &headers[0] != "t" {
        return Err(Error::Input(format!("{} is not a trace file", path.display())));
    }
    let m = (headers.len() - 5) / 4;
    let mut regret = Vec::new();
    let mut eliminations = Vec::new();
    let mut prev_active = vec![true; m];
    let mut fresh_rows = Vec::new();
    let mut rows = 0;
    for rec in r.records() {
        let rec = rec?;
        let field = |i: usize| -> Result<f64> {
            rec[i]
                .parse::<f64>()
                .map_err(|e| Error::Input(format!("bad number '{}': {e}", &rec[i])))
        };
        let t = field(0)? as u64;
        regret.push((t, field(4)?));
        let mut plays = 0.0;
        for i in 0..m {
            plays += field(5 + 4 * i)?;
        }
        if plays == 1.0 {
            fresh_rows.push(t);
        }
        for (i, prev) in prev_active.iter_mut().enumerate() {
            let active = &rec[5 + 4 * i + 3] == "1";
            if *prev && !active {
                eliminations.push((i, t));
            }
            *prev = active;
        }
        rows += 1;
    }
    Ok(ParsedTrace {
        learners: m,
        regret,
        eliminations,
        fresh_rows,
        rows,
    })
}

/// Recomputes the summary of a run directory from its trace files and
/// rewrites `summary.csv` and `summary.txt`.
pub fn summarize_dir(dir: &Path) -> Result<Aggregate> {
    let cfg_path = dir.join("config.toml");
    let cfg = if cfg_path.exists() {
        Some(crate::harness::config::ExperimentConfig::load(&cfg_path)?)
    } else {
        None
    };
    let mut files: Vec<(u64, std::path::PathBuf)> = Vec::new();
    for entry in std::fs::read_dir(dir)? {
        let path = entry?.path();
        let name = path.file_name().and_then(|n| n.to_str()).unwrap_or("");
        if let Some(k) = name
            .strip_prefix("trace_seed")
            .and_then(|r| r.strip_suffix(".csv"))
            .and_then(|k| k.parse::<u64>().ok())
        {
            files.push((k, path));
        }
    }
    if files.is_empty() {
        return Err(Error::Input(format!("no trace files in {}", dir.display())));
    }
    files.sort();
    let adversarial = cfg
        .as_ref()
        .is_some_and(|c| c.master == crate::harness::config::MasterKind::Adversarial);
    let mut seeds = Vec::new();
    let mut curves = Vec::new();
    for (k, path) in &files {
        let tr = parse_trace(path)?;
        let final_regret = tr.regret.last().map_or(0.0, |p| p.1);
        seeds.push(SeedSummary {
            index: *k,
            seed: cfg
                .as_ref()
                .map_or(0, |c| crate::rng::replicate_seed(c.master_seed, *k)),
            final_regret,
            eliminations: tr.eliminations,
            epoch_starts: if adversarial { tr.fresh_rows } else { Vec::new() },
            oracle_regret: None,
        });
        curves.push(tr.regret);
    }
    if curves.windows(2).any(|w| w[0].len() != w[1].len()) {
        return Err(Error::Input("traces have different lengths".into()));
    }
    let mean = mean_curve(&curves);
    let horizon = mean.last().map_or(1, |p| p.0);
    let window = match cfg.as_ref().and_then(|c| c.slope_window) {
        Some([lo, hi]) => (lo, hi),
        None => default_window(horizon),
    };
    let agg = aggregate(&seeds, &mean, window);
    let name = cfg.as_ref().map_or("unknown", |c| c.scenario.as_str());
    write_summary(dir, name, &seeds, &agg)?;
    Ok(agg)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn curve(f: impl Fn(f64) -> f64, t: u64) -> Vec<(u64, f64)> {
        (1..=t).map(|t| (t, f(t as f64))).collect()
    }

    #[test]
    fn slope_of_power_laws() {
        let s = fit_loglog_slope(&curve(f64::sqrt, 10_000), 10, 10_000).unwrap();
        assert!((s - 0.5).abs() < 1e-6, "{s}");
        let s = fit_loglog_slope(&curve(|t| t, 10_000), 10, 10_000).unwrap();
        assert!((s - 1.0).abs() < 1e-9);
    }

    #[test]
    fn slope_on_sparse_checkpoints() {
        let pts: Vec<(u64, f64)> = (0..=16).map(|k| (1u64 << k, ((1u64 << k) as f64).powf(0.3))).collect();
        let s = fit_loglog_slope(&pts, 16, 1 << 16).unwrap();
        assert!((s - 0.3).abs() < 1e-9);
    }

    #[test]
    fn zero_regret_window_is_an_error() {
        assert!(matches!(
            fit_loglog_slope(&curve(|_| 0.0, 100), 10, 100),
            Err(Error::Slope(_))
        ));
    }

    #[test]
    fn oracle_ratio() {
        assert_eq!(compare_to_oracle(&[2.0, 4.0], &[2.0, 4.0]).unwrap(), 1.0);
        assert_eq!(compare_to_oracle(&[6.0], &[2.0, 4.0]).unwrap(), 2.0);
    }

    #[test]
    fn final_epoch_slope_rebases_curves() {
        // Linear regret until round 100, then sqrt growth from the new epoch.
        let run = |start: u64| {
            let c: Vec<f64> = (1..=20_000u64)
                .map(|t| {
                    if t < start {
                        t as f64
                    } else {
                        start as f64 - 1.0 + ((t - start + 1) as f64).sqrt()
                    }
                })
                .collect();
            (c, start)
        };
        let s = final_epoch_slope(&[run(100), run(250)]).unwrap();
        assert!((s - 0.5).abs() < 1e-6, "{s}");
    }

    #[test]
    fn quantiles() {
        let v = [3.0, 1.0, 2.0, 4.0, 5.0];
        assert_eq!(quantile(&v, 0.5), 3.0);
        assert_eq!(quantile(&v, 0.0), 1.0);
        assert_eq!(quantile(&v, 0.25), 2.0);
    }
}
