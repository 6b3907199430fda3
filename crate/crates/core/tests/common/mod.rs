//! Generators and brute-force oracles shared by the integration tests.
//!
//! The oracles deliberately avoid the library's own algorithms: bisimilarity
//! is decided by enumerating every partition of the state space and checking
//! the relational definition pair by pair, and probabilities are summed over
//! the explicit tree of paths.

#![allow(dead_code)]

use std::collections::BTreeMap;

use num_traits::{One, Zero};
use paver::parser::parse_spec;
use paver::semantics::{Distribution, Pts, State, StateId, StateKind};
use paver::term::{ratio, ActionLabel, ActionPattern, Arg, Prob, ProcessSpec, ProcessTerm, Rational};
use rand::seq::IndexedRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

pub fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

/// Declarations the random terms may refer to.
pub const CONTEXT: &str = "
domain D = {d1, d2}
param p = 1/3
comm a | b -> c
proc X = a . X +{1/2} b . delta
proc Y(d) = e(d) . Y(d) +{p} delta
init delta
";

pub fn context() -> ProcessSpec {
    parse_spec(CONTEXT).expect("context parses")
}

fn random_prob(rng: &mut impl Rng) -> Prob {
    if rng.random_bool(0.2) {
        return Prob::param("p");
    }
    let den = rng.random_range(2..=9);
    Prob::lit(rng.random_range(1..den), den)
}

fn random_label(rng: &mut impl Rng, bound: &[String]) -> ActionLabel {
    match rng.random_range(0..8) {
        0 => ActionLabel::Silent,
        1 => {
            let arg = match bound.choose(rng) {
                Some(v) if rng.random_bool(0.6) => Arg::var(v),
                _ => Arg::elem(if rng.random_bool(0.5) { "d1" } else { "d2" }),
            };
            ActionLabel::new("e", vec![arg])
        }
        2 => ActionLabel::new("f", vec![Arg::bit(rng.random_bool(0.5))]),
        k => ActionLabel::named(["a", "b", "c", "g", "h"][k - 3]),
    }
}

fn random_patterns(rng: &mut impl Rng) -> Vec<ActionPattern> {
    let mut names = vec!["a", "b", "c", "e", "g"];
    let k = rng.random_range(1..=2);
    let mut out = Vec::new();
    for _ in 0..k {
        let i = rng.random_range(0..names.len());
        out.push(ActionPattern::name(names.remove(i)));
    }
    out
}

/// A random term over [`CONTEXT`], with every data variable bound.
///
/// With `calls` false the term is finite and never mentions `X` or `Y`.
pub fn random_term(rng: &mut impl Rng, depth: u32, calls: bool) -> ProcessTerm {
    gen(rng, depth, calls, &mut Vec::new())
}

fn leaf(rng: &mut impl Rng, calls: bool, bound: &[String]) -> ProcessTerm {
    match rng.random_range(0..if calls { 5 } else { 3 }) {
        0 => ProcessTerm::Deadlock,
        1 | 2 => ProcessTerm::action(random_label(rng, bound)),
        3 => ProcessTerm::var("X", vec![]),
        _ => {
            let arg = match bound.choose(rng) {
                Some(v) => Arg::var(v),
                None => Arg::elem("d2"),
            };
            ProcessTerm::var("Y", vec![arg])
        }
    }
}

fn gen(rng: &mut impl Rng, depth: u32, calls: bool, bound: &mut Vec<String>) -> ProcessTerm {
    if depth == 0 {
        return leaf(rng, calls, bound);
    }
    let d = depth - 1;
    match rng.random_range(0..13) {
        0 => leaf(rng, calls, bound),
        1..=3 => {
            let a = random_label(rng, bound);
            ProcessTerm::prefix(a, gen(rng, d, calls, bound))
        }
        4 => {
            let a = random_label(rng, bound);
            if a.is_silent() {
                return ProcessTerm::prefix(a, gen(rng, d, calls, bound));
            }
            ProcessTerm::shadow(a, gen(rng, d, calls, bound))
        }
        5 | 6 => ProcessTerm::alt(gen(rng, d, calls, bound), gen(rng, d, calls, bound)),
        7 | 8 => {
            let p = random_prob(rng);
            ProcessTerm::pchoice(p, gen(rng, d, calls, bound), gen(rng, d, calls, bound))
        }
        9 => {
            let (l, r) = (gen(rng, d.min(1), calls, bound), gen(rng, d.min(1), calls, bound));
            match rng.random_range(0..3) {
                0 => ProcessTerm::merge(l, r),
                1 => ProcessTerm::parallel(l, r),
                _ => ProcessTerm::comm_merge(l, r),
            }
        }
        10 => ProcessTerm::encap(random_patterns(rng), gen(rng, d, calls, bound)),
        11 => ProcessTerm::hide(random_patterns(rng), gen(rng, d, calls, bound)),
        _ => {
            let v = format!("v{}", bound.len());
            bound.push(v.clone());
            let a = ActionLabel::new("e", vec![Arg::var(&v)]);
            let body = ProcessTerm::prefix(a, gen(rng, d, calls, bound));
            bound.pop();
            ProcessTerm::sum(&v, "D", body)
        }
    }
}

/// A random PTS over labels `a`, `b` and `tau`. About half the states are
/// probabilistic; masses have small denominators so that distinct
/// distributions sometimes coincide on classes.
pub fn random_pts(rng: &mut impl Rng, max_states: usize) -> Pts {
    let n = rng.random_range(1..=max_states);
    let labels = [ActionLabel::named("a"), ActionLabel::named("b"), ActionLabel::Silent];
    let mut states = Vec::with_capacity(n);
    for _ in 0..n {
        if rng.random_bool(0.4) {
            let k = rng.random_range(1..=n.min(3));
            let weights: Vec<(StateId, i64)> = (0..k).map(|_| (rng.random_range(0..n), rng.random_range(1..=2))).collect();
            let total: i64 = weights.iter().map(|(_, w)| w).sum();
            let d = Distribution::new(weights.into_iter().map(|(s, w)| (s, ratio(w, total)))).unwrap();
            states.push(State::prob(d));
        } else {
            let k = rng.random_range(0..=3);
            let edges = (0..k)
                .map(|_| (labels.choose(rng).unwrap().clone(), rng.random_range(0..n)))
                .collect();
            let mut s = State::nondet(edges);
            s.terminates = rng.random_bool(0.15);
            states.push(s);
        }
    }
    Pts::new(states, 0).unwrap()
}

/// Every partition of `0..n` as a block index per element (restricted
/// growth strings).
pub fn set_partitions(n: usize) -> Vec<Vec<usize>> {
    fn go(i: usize, n: usize, cur: &mut Vec<usize>, max: usize, out: &mut Vec<Vec<usize>>) {
        if i == n {
            out.push(cur.clone());
            return;
        }
        for b in 0..=max + usize::from(i > 0) {
            cur.push(b);
            go(i + 1, n, cur, max.max(b), out);
            cur.pop();
        }
    }
    let mut out = Vec::new();
    go(0, n, &mut Vec::new(), 0, &mut out);
    out
}

fn class_masses(d: &Distribution, blocks: &[usize]) -> BTreeMap<usize, Rational> {
    let mut m = BTreeMap::new();
    for (s, w) in d.iter() {
        *m.entry(blocks[s]).or_insert_with(Rational::zero) += w;
    }
    m
}

/// Whether the partition is a strong bisimulation.
fn strong_ok(pts: &Pts, blocks: &[usize]) -> bool {
    let n = pts.len();
    for s in 0..n {
        for t in 0..n {
            if s == t || blocks[s] != blocks[t] {
                continue;
            }
            let (x, y) = (pts.state(s), pts.state(t));
            match (&x.kind, &y.kind) {
                (StateKind::Nondet(ex), StateKind::Nondet(ey)) => {
                    if x.terminates != y.terminates {
                        return false;
                    }
                    for (l, u) in ex {
                        if !ey.iter().any(|(m, v)| m == l && blocks[*u] == blocks[*v]) {
                            return false;
                        }
                    }
                }
                (StateKind::Prob(dx), StateKind::Prob(dy)) => {
                    if class_masses(dx, blocks) != class_masses(dy, blocks) {
                        return false;
                    }
                }
                _ => return false,
            }
        }
    }
    true
}

/// States reachable from `t` by steps that stay inside the class of `t`:
/// `tau` edges, and probabilistic steps whose whole support stays inside.
fn inert_closure(pts: &Pts, blocks: &[usize], t: StateId) -> Vec<StateId> {
    let b = blocks[t];
    let mut seen = vec![false; pts.len()];
    let mut stack = vec![t];
    seen[t] = true;
    let mut out = Vec::new();
    while let Some(u) = stack.pop() {
        out.push(u);
        let next: Vec<StateId> = match &pts.state(u).kind {
            StateKind::Nondet(e) => e
                .iter()
                .filter(|(l, v)| l.is_silent() && blocks[*v] == b)
                .map(|(_, v)| *v)
                .collect(),
            StateKind::Prob(d) => {
                if d.support().all(|v| blocks[v] == b) {
                    d.support().collect()
                } else {
                    Vec::new()
                }
            }
        };
        for v in next {
            if !seen[v] {
                seen[v] = true;
                stack.push(v);
            }
        }
    }
    out
}

/// Whether the partition is a branching bisimulation: every visible move
/// of `s` is matched by `t` after an inert path.
fn branching_ok(pts: &Pts, blocks: &[usize]) -> bool {
    let n = pts.len();
    for s in 0..n {
        for t in 0..n {
            if s == t || blocks[s] != blocks[t] {
                continue;
            }
            let reach = inert_closure(pts, blocks, t);
            let x = pts.state(s);
            if x.terminates && !reach.iter().any(|u| pts.state(*u).terminates) {
                return false;
            }
            match &x.kind {
                StateKind::Nondet(ex) => {
                    for (l, u) in ex {
                        if l.is_silent() && blocks[*u] == blocks[s] {
                            continue;
                        }
                        let matched = reach.iter().any(|r| {
                            pts.state(*r)
                                .edges()
                                .iter()
                                .any(|(m, v)| m == l && blocks[*v] == blocks[*u])
                        });
                        if !matched {
                            return false;
                        }
                    }
                }
                StateKind::Prob(dx) => {
                    if dx.support().all(|v| blocks[v] == blocks[s]) {
                        continue;
                    }
                    let want = class_masses(dx, blocks);
                    let matched = reach.iter().any(|r| match pts.state(*r).distribution() {
                        Some(dr) => class_masses(dr, blocks) == want,
                        None => false,
                    });
                    if !matched {
                        return false;
                    }
                }
            }
        }
    }
    true
}

/// `related[s][t]` iff some partition satisfying `ok` puts `s` and `t`
/// together.
fn brute_force(pts: &Pts, ok: fn(&Pts, &[usize]) -> bool) -> Vec<Vec<bool>> {
    let n = pts.len();
    let mut related = vec![vec![false; n]; n];
    for blocks in set_partitions(n) {
        if ok(pts, &blocks) {
            for s in 0..n {
                for t in 0..n {
                    if blocks[s] == blocks[t] {
                        related[s][t] = true;
                    }
                }
            }
        }
    }
    related
}

pub fn oracle_strong(pts: &Pts) -> Vec<Vec<bool>> {
    brute_force(pts, strong_ok)
}

pub fn oracle_branching(pts: &Pts) -> Vec<Vec<bool>> {
    brute_force(pts, branching_ok)
}

/// Probability of a step named `success` before `source` is re-entered,
/// summed over the tree of paths up to `depth` steps. Returns the success
/// mass and the mass still undecided at the depth bound. Several edges in
/// one state are a test error.
pub fn tree_probability(pts: &Pts, source: StateId, success: &str, depth: usize) -> (Rational, Rational) {
    fn walk(
        pts: &Pts,
        source: StateId,
        success: &str,
        s: StateId,
        mass: Rational,
        left: usize,
        acc: &mut (Rational, Rational),
    ) {
        if left == 0 {
            acc.1 += mass;
            return;
        }
        match &pts.state(s).kind {
            StateKind::Nondet(e) => {
                assert!(e.len() <= 1, "state {s} is nondeterministic");
                if let Some((l, t)) = e.first() {
                    if l.name() == Some(success) {
                        acc.0 += mass;
                    } else if *t != source {
                        walk(pts, source, success, *t, mass, left - 1, acc);
                    }
                }
            }
            StateKind::Prob(d) => {
                for (t, w) in d.iter() {
                    if t != source {
                        walk(pts, source, success, t, &mass * w, left - 1, acc);
                    }
                }
            }
        }
    }
    let mut acc = (Rational::zero(), Rational::zero());
    walk(pts, source, success, source, Rational::one(), depth, &mut acc);
    acc
}

/// A random probability `a/b` with `0 < a <= b <= 12`.
pub fn random_unit_rational(rng: &mut impl Rng) -> Rational {
    let b = rng.random_range(1..=12);
    ratio(rng.random_range(1..=b), b)
}
