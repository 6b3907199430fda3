use std::collections::BTreeMap;

use num_traits::{One, Zero};
use thiserror::Error;

use super::graph;
use crate::semantics::{Pts, StateId, StateKind};
use crate::term::{matches_any, ActionPattern, Rational};

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Horizon {
    /// Success must happen before the source state is entered again.
    Round,
    /// Success at any time.
    Eventual,
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct ProbQuery {
    pub source: StateId,
    /// A step whose label matches one of these counts as success.
    pub success: Vec<ActionPattern>,
    pub horizon: Horizon,
}

#[derive(Clone, Debug, PartialEq, Eq, Error)]
pub enum ProbError {
    #[error("state {state} is nondeterministic ({options} options); schedule the system first")]
    Nondeterministic { state: StateId, options: usize },
    #[error("state {0} does not exist")]
    NoSuchState(StateId),
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
enum Target {
    Success,
    Fail,
    State(StateId),
}

/// Outgoing moves of a state as (probability, target). Deadlocks fail.
fn moves(pts: &Pts, q: &ProbQuery, s: StateId) -> Result<Vec<(Rational, Target)>, ProbError> {
    let back = |t: StateId| {
        if q.horizon == Horizon::Round && t == q.source {
            Target::Fail
        } else {
            Target::State(t)
        }
    };
    Ok(match &pts.state(s).kind {
        StateKind::Nondet(edges) => match edges.as_slice() {
            [] => vec![(Rational::one(), Target::Fail)],
            [(l, t)] => {
                let target = if matches_any(&q.success, l) {
                    Target::Success
                } else {
                    back(*t)
                };
                vec![(Rational::one(), target)]
            }
            _ => {
                return Err(ProbError::Nondeterministic {
                    state: s,
                    options: edges.len(),
                })
            }
        },
        StateKind::Prob(d) => d.iter().map(|(t, m)| (m.clone(), back(t))).collect(),
    })
}

/// Exact probability of reaching a success step from `q.source`.
///
/// States that cannot reach success get 0 and states that reach it almost
/// surely get 1 (both decided on the graph). The rest is solved component
/// by component in reverse topological order: single acyclic states by
/// substitution, cyclic components by exact Gaussian elimination.
pub fn success_probability(pts: &Pts, q: &ProbQuery) -> Result<Rational, ProbError> {
    if q.source >= pts.len() {
        return Err(ProbError::NoSuchState(q.source));
    }
    // states explored from the source, with their moves
    let mut mv: BTreeMap<StateId, Vec<(Rational, Target)>> = BTreeMap::new();
    let mut order = vec![q.source];
    let mut i = 0;
    while i < order.len() {
        let s = order[i];
        i += 1;
        if mv.contains_key(&s) {
            continue;
        }
        let m = moves(pts, q, s)?;
        for (_, t) in &m {
            if let Target::State(t) = t {
                if !mv.contains_key(t) {
                    order.push(*t);
                }
            }
        }
        mv.insert(s, m);
    }
    let states: Vec<StateId> = mv.keys().copied().collect();
    let n = pts.len();
    let mut preds: Vec<Vec<StateId>> = vec![Vec::new(); n];
    for (s, m) in &mv {
        for (_, t) in m {
            if let Target::State(t) = t {
                preds[*t].push(*s);
            }
        }
    }
    let backward = |seeds: Vec<StateId>| {
        let mut seen = vec![false; n];
        let mut stack = seeds;
        for &s in &stack {
            seen[s] = true;
        }
        while let Some(s) = stack.pop() {
            for &p in &preds[s] {
                if !seen[p] {
                    seen[p] = true;
                    stack.push(p);
                }
            }
        }
        seen
    };
    let can_succeed = backward(
        states
            .iter()
            .copied()
            .filter(|s| mv[s].iter().any(|(_, t)| *t == Target::Success))
            .collect(),
    );
    let can_fail = backward(
        states
            .iter()
            .copied()
            .filter(|s| !can_succeed[*s] || mv[s].iter().any(|(_, t)| *t == Target::Fail))
            .collect(),
    );
    let mut value: Vec<Option<Rational>> = vec![None; n];
    for &s in &states {
        if !can_succeed[s] {
            value[s] = Some(Rational::zero());
        } else if !can_fail[s] {
            value[s] = Some(Rational::one());
        }
    }
    let unknown: Vec<StateId> = states.iter().copied().filter(|s| value[*s].is_none()).collect();
    let succ = |s: StateId| -> Vec<StateId> {
        mv[&s]
            .iter()
            .filter_map(|(_, t)| match t {
                Target::State(t) if value_unknown(&unknown, *t) => Some(*t),
                _ => None,
            })
            .collect()
    };
    for comp in graph::sccs(&unknown, succ, n) {
        solve_component(&comp, &mv, &mut value);
    }
    Ok(value[q.source].clone().expect("source solved"))
}

fn value_unknown(unknown: &[StateId], s: StateId) -> bool {
    unknown.binary_search(&s).is_ok()
}

/// Solves x = A x + b on one component, every successor outside it being
/// already known.
fn solve_component(
    comp: &[StateId],
    mv: &BTreeMap<StateId, Vec<(Rational, Target)>>,
    value: &mut [Option<Rational>],
) {
    let k = comp.len();
    let pos: BTreeMap<StateId, usize> = comp.iter().enumerate().map(|(i, s)| (*s, i)).collect();
    // rows of (I - A | b)
    let mut rows: Vec<Vec<Rational>> = vec![vec![Rational::zero(); k + 1]; k];
    for (i, s) in comp.iter().enumerate() {
        rows[i][i] += Rational::one();
        for (p, t) in &mv[s] {
            match t {
                Target::Success => rows[i][k] += p,
                Target::Fail => {}
                Target::State(t) => match pos.get(t) {
                    Some(j) => rows[i][*j] -= p,
                    None => rows[i][k] += p * value[*t].as_ref().expect("successor solved"),
                },
            }
        }
    }
    for col in 0..k {
        let pivot = (col..k).find(|r| !rows[*r][col].is_zero()).expect("system is regular");
        rows.swap(col, pivot);
        let inv = Rational::one() / &rows[col][col];
        for c in col..=k {
            rows[col][c] = &rows[col][c] * &inv;
        }
        for r in 0..k {
            if r != col && !rows[r][col].is_zero() {
                let f = rows[r][col].clone();
                for c in col..=k {
                    let delta = &f * &rows[col][c];
                    rows[r][c] -= delta;
                }
            }
        }
    }
    for (i, s) in comp.iter().enumerate() {
        value[*s] = Some(rows[i][k].clone());
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::parser::{parse_pattern, parse_spec};
    use crate::semantics::expand;
    use crate::term::ratio;

    fn query(text: &str, success: &str, horizon: Horizon) -> Result<Rational, ProbError> {
        let p = expand(&parse_spec(text).unwrap(), 1000).unwrap();
        success_probability(
            &p,
            &ProbQuery {
                source: p.init(),
                success: vec![parse_pattern(success).unwrap()],
                horizon,
            },
        )
    }

    #[test]
    fn chained_choices_multiply() {
        let v = query("init (a . s . delta +{1/2} delta) +{1/3} delta", "s", Horizon::Round).unwrap();
        assert_eq!(v, ratio(1, 6));
    }

    #[test]
    fn unreachable_success_is_zero() {
        assert_eq!(query("init a . delta", "zzz", Horizon::Round).unwrap(), ratio(0, 1));
    }

    #[test]
    fn retry_loop_is_solved_exactly() {
        // geometric retries: success 1/3 per attempt, retry 1/2, give up 1/6
        let text = "proc X = s . delta +{1/3} (r . X +{3/4} delta) init X";
        assert_eq!(query(text, "s", Horizon::Eventual).unwrap(), ratio(2, 3));
        // re-entering the source ends the round
        assert_eq!(query(text, "s", Horizon::Round).unwrap(), ratio(1, 3));
    }

    #[test]
    fn certain_success_in_cycle() {
        let text = "proc X = s . delta +{1/2} r . X init X";
        assert_eq!(query(text, "s", Horizon::Eventual).unwrap(), ratio(1, 1));
    }

    #[test]
    fn nondeterminism_is_reported() {
        let err = query("init a . delta + b . delta", "a", Horizon::Round).unwrap_err();
        assert_eq!(err, ProbError::Nondeterministic { state: 0, options: 2 });
    }
}
