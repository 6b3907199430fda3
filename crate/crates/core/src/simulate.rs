//! Monte-Carlo runs of a PTS.
//!
//! Run `i` draws from `ChaCha8Rng::seed_from_u64(seed)` switched to stream
//! `i`, so every run has its own independent sequence and the aggregate
//! does not depend on how runs are spread over threads.
//!
//! A P-state is sampled by drawing `k` uniformly from `0..2^64` and picking
//! the first support point whose cumulative mass `c` satisfies
//! `k < c * 2^64`, in ascending state order.

use std::io::{self, Write};

use num_bigint::BigInt;
use num_traits::{ToPrimitive, Zero};
use rand::{Rng, RngCore, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use thiserror::Error;

use crate::semantics::{Pts, StateId, StateKind};
use crate::term::{matches_any, ActionPattern, Rational};

/// How a run resolves N-states with several edges.
#[derive(Clone, Debug, PartialEq, Eq)]
pub enum Scheduler {
    Uniform,
    /// Edge indices consumed one per nondeterministic choice. A run that
    /// needs more choices than listed, or meets an index out of range,
    /// stops and counts as capped.
    Scripted(Vec<usize>),
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Outcome {
    Success,
    /// No transitions left (this includes successful termination).
    Deadlock,
    Capped,
}

impl Outcome {
    pub fn as_str(self) -> &'static str {
        match self {
            Outcome::Success => "success",
            Outcome::Deadlock => "deadlock",
            Outcome::Capped => "capped",
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct RunRecord {
    pub outcome: Outcome,
    /// Non-silent action steps, including the success step.
    pub visible_steps: u64,
}

#[derive(Clone, Debug, PartialEq)]
pub struct RunStats {
    pub runs: u64,
    pub successes: u64,
    pub deadlocks: u64,
    pub capped: u64,
    pub mean_visible_steps: Rational,
    /// `successes / runs`.
    pub estimate: Rational,
    /// Binomial standard error of the estimate.
    pub stderr: f64,
}

impl std::fmt::Display for RunStats {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        writeln!(f, "runs: {}", self.runs)?;
        writeln!(f, "successes: {}", self.successes)?;
        writeln!(f, "deadlocks: {}", self.deadlocks)?;
        writeln!(f, "capped: {}", self.capped)?;
        writeln!(
            f,
            "mean visible steps: {} ({:.6})",
            self.mean_visible_steps,
            self.mean_visible_steps.to_f64().unwrap_or(f64::NAN)
        )?;
        writeln!(
            f,
            "estimate: {} ({:.6})",
            self.estimate,
            self.estimate.to_f64().unwrap_or(f64::NAN)
        )?;
        writeln!(f, "stderr: {:.6}", self.stderr)
    }
}

#[derive(Clone, Debug, PartialEq, Eq, Error)]
pub enum SimError {
    #[error("at least one run is required")]
    NoRuns,
    #[error("the step cap must be at least 1")]
    ZeroCap,
}

/// Per P-state cumulative thresholds `ceil(c * 2^64)`.
fn thresholds(pts: &Pts) -> Vec<Vec<(StateId, u128)>> {
    let scale: BigInt = BigInt::from(1u8) << 64usize;
    pts.states()
        .iter()
        .map(|s| match &s.kind {
            StateKind::Prob(d) => {
                let mut cum = Rational::zero();
                d.iter()
                    .map(|(t, m)| {
                        cum += m;
                        let scaled = (cum.clone() * Rational::from_integer(scale.clone())).ceil();
                        (t, scaled.to_integer().to_u128().expect("at most 2^64"))
                    })
                    .collect()
            }
            StateKind::Nondet(_) => Vec::new(),
        })
        .collect()
}

fn one_run(
    pts: &Pts,
    table: &[Vec<(StateId, u128)>],
    scheduler: &Scheduler,
    success: &[ActionPattern],
    cap: u64,
    seed: u64,
    index: u64,
) -> RunRecord {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(index);
    let mut state = pts.init();
    let mut visible = 0;
    let mut choices = 0;
    for _ in 0..cap {
        match &pts.state(state).kind {
            StateKind::Prob(_) => {
                let k = u128::from(rng.next_u64());
                let row = &table[state];
                state = row.iter().find(|(_, c)| k < *c).unwrap_or(row.last().expect("non-empty support")).0;
            }
            StateKind::Nondet(edges) => {
                let pick = match edges.len() {
                    0 => {
                        return RunRecord {
                            outcome: Outcome::Deadlock,
                            visible_steps: visible,
                        }
                    }
                    1 => 0,
                    k => match scheduler {
                        Scheduler::Uniform => rng.random_range(0..k),
                        Scheduler::Scripted(script) => {
                            let next = script.get(choices).copied().filter(|i| *i < k);
                            choices += 1;
                            match next {
                                Some(i) => i,
                                None => {
                                    return RunRecord {
                                        outcome: Outcome::Capped,
                                        visible_steps: visible,
                                    }
                                }
                            }
                        }
                    },
                };
                let (label, target) = &edges[pick];
                if !label.is_silent() {
                    visible += 1;
                }
                if matches_any(success, label) {
                    return RunRecord {
                        outcome: Outcome::Success,
                        visible_steps: visible,
                    };
                }
                state = *target;
            }
        }
    }
    RunRecord {
        outcome: Outcome::Capped,
        visible_steps: visible,
    }
}

/// Runs and their per-run records, in run order.
pub fn run_with_trace(
    pts: &Pts,
    scheduler: &Scheduler,
    success: &[ActionPattern],
    runs: u64,
    step_cap: u64,
    seed: u64,
) -> Result<(RunStats, Vec<RunRecord>), SimError> {
    if runs == 0 {
        return Err(SimError::NoRuns);
    }
    if step_cap == 0 {
        return Err(SimError::ZeroCap);
    }
    let table = thresholds(pts);
    let records: Vec<RunRecord> = (0..runs)
        .into_par_iter()
        .map(|i| one_run(pts, &table, scheduler, success, step_cap, seed, i))
        .collect();
    let count = |o: Outcome| records.iter().filter(|r| r.outcome == o).count() as u64;
    let successes = count(Outcome::Success);
    let steps: u64 = records.iter().map(|r| r.visible_steps).sum();
    let p = successes as f64 / runs as f64;
    let stats = RunStats {
        runs,
        successes,
        deadlocks: count(Outcome::Deadlock),
        capped: count(Outcome::Capped),
        mean_visible_steps: Rational::new(steps.into(), runs.into()),
        estimate: Rational::new(successes.into(), runs.into()),
        stderr: (p * (1.0 - p) / runs as f64).sqrt(),
    };
    Ok((stats, records))
}

pub fn run(
    pts: &Pts,
    scheduler: &Scheduler,
    success: &[ActionPattern],
    runs: u64,
    step_cap: u64,
    seed: u64,
) -> Result<RunStats, SimError> {
    run_with_trace(pts, scheduler, success, runs, step_cap, seed).map(|(s, _)| s)
}

/// Writes `run,outcome,steps` rows.
pub fn write_trace_csv(records: &[RunRecord], mut out: impl Write) -> io::Result<()> {
    writeln!(out, "run,outcome,steps")?;
    for (i, r) in records.iter().enumerate() {
        writeln!(out, "{i},{},{}", r.outcome.as_str(), r.visible_steps)?;
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::parser::{parse_pattern, parse_spec};
    use crate::semantics::expand;
    use crate::term::ratio;

    fn pts(text: &str) -> Pts {
        expand(&parse_spec(text).unwrap(), 1000).unwrap()
    }

    fn succ(p: &str) -> Vec<ActionPattern> {
        vec![parse_pattern(p).unwrap()]
    }

    #[test]
    fn single_step_always_succeeds() {
        for seed in [0, 1, 99] {
            let s = run(&pts("init a . delta"), &Scheduler::Uniform, &succ("a"), 50, 10, seed).unwrap();
            assert_eq!(s.estimate, ratio(1, 1));
            assert_eq!(s.mean_visible_steps, ratio(1, 1));
        }
    }

    #[test]
    fn deadlock_only() {
        let s = run(&pts("init delta"), &Scheduler::Uniform, &succ("a"), 20, 10, 7).unwrap();
        assert_eq!(s.deadlocks, 20);
        assert_eq!(s.estimate, ratio(0, 1));
    }

    #[test]
    fn cap_and_script() {
        let looping = pts("proc X = a . X init X");
        let s = run(&looping, &Scheduler::Uniform, &succ("b"), 5, 3, 0).unwrap();
        assert_eq!(s.capped, 5);
        let choice = pts("init a . delta + b . delta");
        let s = run(&choice, &Scheduler::Scripted(vec![1]), &succ("b"), 5, 3, 0).unwrap();
        assert_eq!(s.successes, 5);
        let s = run(&choice, &Scheduler::Scripted(vec![]), &succ("b"), 5, 3, 0).unwrap();
        assert_eq!(s.capped, 5);
    }

    #[test]
    fn fixed_seed_is_reproducible() {
        let p = pts("init a . delta +{1/3} b . delta");
        let one = run(&p, &Scheduler::Uniform, &succ("b"), 500, 100, 42).unwrap();
        let two = run(&p, &Scheduler::Uniform, &succ("b"), 500, 100, 42).unwrap();
        assert_eq!(one, two);
        assert!(one.successes > 0 && one.successes < 500);
    }

    #[test]
    fn thresholds_end_at_full_scale() {
        let p = pts("init a . delta +{1/3} b . delta");
        let t = thresholds(&p);
        assert_eq!(t[0].last().unwrap().1, 1u128 << 64);
    }

    #[test]
    fn rejects_degenerate_arguments() {
        let p = pts("init delta");
        assert_eq!(run(&p, &Scheduler::Uniform, &[], 0, 1, 0), Err(SimError::NoRuns));
        assert_eq!(run(&p, &Scheduler::Uniform, &[], 1, 0, 0), Err(SimError::ZeroCap));
    }

    #[test]
    fn csv_trace() {
        let mut buf = Vec::new();
        let recs = [RunRecord {
            outcome: Outcome::Success,
            visible_steps: 3,
        }];
        write_trace_csv(&recs, &mut buf).unwrap();
        assert_eq!(String::from_utf8(buf).unwrap(), "run,outcome,steps\n0,success,3\n");
    }
}
