use std::collections::HashMap;

use num_traits::{One, Zero};
use thiserror::Error;

use crate::semantics::{Distribution, Pts, State, StateId, StateKind};
use crate::term::{matches_any, ActionLabel, ActionPattern, Rational};

/// How nondeterministic choices are resolved.
#[derive(Clone, Debug, PartialEq, Eq)]
pub enum Policy {
    /// Every option equally likely.
    Uniform,
    /// One option index per nondeterministic state, in ascending state
    /// order. States past the end of the script are left alone.
    Scripted(Vec<usize>),
    /// Options matching `labels` share mass `q`, the others share `1 - q`.
    /// Options that end up with no mass are dropped.
    Corruption { q: Rational, labels: Vec<ActionPattern> },
}

#[derive(Clone, Debug, PartialEq, Eq, Error)]
pub enum ScheduleError {
    #[error("script picks option {index} in state {state}, which has only {options} options")]
    OutOfRange { state: StateId, index: usize, options: usize },
    #[error("corruption probability {0} is not in [0,1]")]
    BadProbability(Rational),
}

/// Turns every N-state with several options into a P-state over fresh
/// single-edge N-states, weighted by the policy.
pub fn schedule(pts: &Pts, policy: &Policy) -> Result<Pts, ScheduleError> {
    if let Policy::Corruption { q, .. } = policy {
        if q < &Rational::zero() || q > &Rational::one() {
            return Err(ScheduleError::BadProbability(q.clone()));
        }
    }
    let mut states: Vec<State> = pts.states().to_vec();
    let mut fresh: HashMap<(ActionLabel, StateId, bool), StateId> = HashMap::new();
    let mut script_pos = 0;
    for s in 0..pts.len() {
        let st = pts.state(s);
        let StateKind::Nondet(edges) = &st.kind else { continue };
        if edges.len() < 2 {
            continue;
        }
        let weights: Vec<Rational> = match policy {
            Policy::Uniform => vec![Rational::new(1.into(), edges.len().into()); edges.len()],
            Policy::Scripted(script) => {
                let Some(&index) = script.get(script_pos) else { continue };
                script_pos += 1;
                if index >= edges.len() {
                    return Err(ScheduleError::OutOfRange {
                        state: s,
                        index,
                        options: edges.len(),
                    });
                }
                (0..edges.len())
                    .map(|i| if i == index { Rational::one() } else { Rational::zero() })
                    .collect()
            }
            Policy::Corruption { q, labels } => {
                let bad: Vec<bool> = edges.iter().map(|(l, _)| matches_any(labels, l)).collect();
                let nbad = bad.iter().filter(|b| **b).count();
                let ngood = edges.len() - nbad;
                let (qb, qg) = match (nbad, ngood) {
                    (0, _) => (Rational::zero(), Rational::one()),
                    (_, 0) => (Rational::one(), Rational::zero()),
                    _ => (q.clone(), Rational::one() - q),
                };
                bad.iter()
                    .map(|b| {
                        if *b {
                            &qb / Rational::from_integer(nbad.into())
                        } else {
                            &qg / Rational::from_integer(ngood.into())
                        }
                    })
                    .collect()
            }
        };
        let kept: Vec<(&(ActionLabel, StateId), Rational)> =
            edges.iter().zip(weights).filter(|(_, w)| !w.is_zero()).collect();
        if kept.len() == 1 {
            let mut single = State::nondet(vec![kept[0].0.clone()]);
            single.terminates = st.terminates;
            states[s] = single;
            continue;
        }
        let mut entries = Vec::new();
        for ((l, t), w) in kept {
            let key = (l.clone(), *t, st.terminates);
            let id = *fresh.entry(key).or_insert_with(|| {
                let mut one = State::nondet(vec![(l.clone(), *t)]);
                one.terminates = st.terminates;
                states.push(one);
                states.len() - 1
            });
            entries.push((id, w));
        }
        states[s] = State::prob(Distribution::new(entries).expect("weights sum to one"));
    }
    Ok(Pts::new(states, pts.init()).expect("scheduling keeps indices valid"))
}
