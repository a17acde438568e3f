//! Per-round records and their CSV encoding.

use std::io::Write;

use crate::error::Result;

/// A learner's statistics after a round.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LearnerStat {
    pub plays: u64,
    pub reward_sum: f64,
    pub bound: f64,
    pub active: bool,
}

/// Everything that happened in one round.
#[derive(Debug, Clone, PartialEq)]
pub struct RoundTrace {
    pub t: u64,
    pub learner_id: usize,
    pub action_index: usize,
    pub reward: f64,
    pub mu_star: f64,
    /// Conditional mean of the played action.
    pub mean: f64,
    pub cum_pseudo_regret: f64,
    pub learners: Vec<LearnerStat>,
    /// Learners removed at the end of this round.
    pub eliminated: Vec<usize>,
    /// True when an epoch ended at this round (adversarial master only).
    pub epoch_ended: bool,
}

/// Streams [`RoundTrace`]s as CSV rows.
///
/// Columns: `t, learner_id, reward, mu_star, cum_pseudo_regret`, then
/// `n_i, U_i, R_i, active_i` for every learner `i`. Floats use Rust's
/// shortest round-trip formatting, so the bytes are a pure function of the
/// values.
pub struct TraceWriter<W: Write> {
    inner: csv::Writer<W>,
    learners: usize,
    row: Vec<String>,
}

impl<W: Write> TraceWriter<W> {
    pub fn new(out: W, learners: usize) -> Result<Self> {
        let mut inner = csv::WriterBuilder::new().from_writer(out);
        inner.write_record(header(learners))?;
        Ok(Self {
            inner,
            learners,
            row: Vec::with_capacity(5 + 4 * learners),
        })
    }

    pub fn write(&mut self, r: &RoundTrace) -> Result<()> {
        debug_assert_eq!(r.learners.len(), self.learners);
        self.row.clear();
        self.row.push(r.t.to_string());
        self.row.push(r.learner_id.to_string());
        self.row.push(r.reward.to_string());
        self.row.push(r.mu_star.to_string());
        self.row.push(r.cum_pseudo_regret.to_string());
        for s in &r.learners {
            self.row.push(s.plays.to_string());
            self.row.push(s.reward_sum.to_string());
            self.row.push(s.bound.to_string());
            self.row.push(u8::from(s.active).to_string());
        }
        self.inner.write_record(&self.row)?;
        Ok(())
    }

    pub fn finish(mut self) -> Result<W> {
        self.inner.flush()?;
        self.inner
            .into_inner()
            .map_err(|e| crate::Error::Io(std::io::Error::other(e.to_string())))
    }
}

pub fn header(learners: usize) -> Vec<String> {
    let mut h: Vec<String> = ["t", "learner_id", "reward", "mu_star", "cum_pseudo_regret"]
        .iter()
        .map(|s| s.to_string())
        .collect();
    for i in 0..learners {
        h.push(format!("n_{i}"));
        h.push(format!("U_{i}"));
        h.push(format!("R_{i}"));
        h.push(format!("active_{i}"));
    }
    h
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn header_and_row() {
        let mut w = TraceWriter::new(Vec::new(), 1).unwrap();
        w.write(&RoundTrace {
            t: 1,
            learner_id: 0,
            action_index: 0,
            reward: 0.5,
            mu_star: 1.0,
            mean: 0.5,
            cum_pseudo_regret: 0.5,
            learners: vec![LearnerStat {
                plays: 1,
                reward_sum: 0.5,
                bound: 1.0,
                active: true,
            }],
            eliminated: vec![],
            epoch_ended: false,
        })
        .unwrap();
        let s = String::from_utf8(w.finish().unwrap()).unwrap();
        assert_eq!(
            s,
            "t,learner_id,reward,mu_star,cum_pseudo_regret,n_0,U_0,R_0,active_0\n1,0,0.5,1,0.5,1,0.5,1,1\n"
        );
    }
}
