//! Probabilistic bisimilarity by signature refinement, quotients, exact
//! success probabilities and schedulers.
//!
//! Two systems are compared on their disjoint union: states `0..n1` belong
//! to the left system, `n1..n1+n2` to the right one.
//!
//! Strong bisimilarity keeps N-states and P-states apart and compares
//! N-states by their `(label, class)` edges and P-states by the mass they
//! assign to each class.
//!
//! Branching bisimilarity treats a step as *inert* when it stays inside the
//! current class: a `tau` edge of an N-state, or a P-state whose whole
//! support lies in its own class. The signature of a state is the set of
//! observations reachable through inert steps, where an observation is a
//! non-inert edge, the distribution of a non-inert P-state over classes, or
//! the ability to terminate. Rooted branching bisimilarity additionally
//! asks the two initial states to match their first steps exactly, up to
//! branching classes.
//!
//! Inert cycles are allowed (the check is divergence-blind) and reported
//! through [`BisimResult::divergent`]. A cycle of internal steps never
//! changes what can be observed; reading the result as "equivalent" assumes
//! the cycle is eventually left, which holds under any fair scheduler.

mod graph;
mod prob;
mod schedule;

use std::collections::{BTreeMap, BTreeSet, HashMap};
use std::fmt;

use num_traits::Zero;

use crate::semantics::{Distribution, Pts, State, StateId, StateKind};
use crate::term::{ActionLabel, Rational};

pub use prob::{success_probability, Horizon, ProbError, ProbQuery};
pub use schedule::{schedule, Policy, ScheduleError};

/// Which equivalence to decide.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum Mode {
    Strong,
    Branching,
    RootedBranching,
}

impl fmt::Display for Mode {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Mode::Strong => "strong",
            Mode::Branching => "branching",
            Mode::RootedBranching => "rooted-branching",
        })
    }
}

/// An assignment of states to dense block numbers.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Partition {
    blocks: Vec<usize>,
    count: usize,
}

impl Partition {
    /// Renumbers arbitrary block labels densely in order of first
    /// occurrence.
    pub fn from_labels<T: Eq + std::hash::Hash>(labels: impl IntoIterator<Item = T>) -> Partition {
        let mut ids: HashMap<T, usize> = HashMap::new();
        let blocks: Vec<usize> = labels
            .into_iter()
            .map(|l| {
                let next = ids.len();
                *ids.entry(l).or_insert(next)
            })
            .collect();
        Partition {
            count: ids.len(),
            blocks,
        }
    }

    pub fn trivial(n: usize) -> Partition {
        Partition {
            blocks: vec![0; n],
            count: usize::from(n > 0),
        }
    }

    pub fn block(&self, s: StateId) -> usize {
        self.blocks[s]
    }

    pub fn block_count(&self) -> usize {
        self.count
    }

    pub fn len(&self) -> usize {
        self.blocks.len()
    }

    pub fn is_empty(&self) -> bool {
        self.blocks.is_empty()
    }

    pub fn same(&self, a: StateId, b: StateId) -> bool {
        self.blocks[a] == self.blocks[b]
    }

    pub fn as_slice(&self) -> &[usize] {
        &self.blocks
    }

    /// Per-block mass of a distribution, in block order.
    pub fn masses(&self, d: &Distribution) -> Vec<(usize, Rational)> {
        let mut m: BTreeMap<usize, Rational> = BTreeMap::new();
        for (s, p) in d.iter() {
            *m.entry(self.blocks[s]).or_insert_with(Rational::zero) += p;
        }
        m.into_iter().collect()
    }
}

/// True iff both distributions give every block the same total mass.
pub fn lift(d1: &Distribution, d2: &Distribution, part: &Partition) -> bool {
    part.masses(d1) == part.masses(d2)
}

#[derive(Clone, Debug, PartialEq, Eq, PartialOrd, Ord, Hash)]
enum Obs {
    Tick,
    Edge(ActionLabel, usize),
    Dist(Vec<(usize, Rational)>),
}

impl fmt::Display for Obs {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Obs::Tick => f.write_str("successful termination"),
            Obs::Edge(l, b) => write!(f, "a {l}-step into class {b}"),
            Obs::Dist(v) => {
                f.write_str("a probabilistic step {")?;
                for (i, (b, m)) in v.iter().enumerate() {
                    if i > 0 {
                        f.write_str(", ")?;
                    }
                    write!(f, "class {b}: {m}")?;
                }
                f.write_str("}")
            }
        }
    }
}

/// `None` kind means kinds are not compared (branching).
#[derive(Clone, Debug, PartialEq, Eq, Hash)]
struct Sig {
    prob: Option<bool>,
    obs: Vec<Obs>,
}

#[derive(Clone, Copy, PartialEq, Eq)]
enum Flavor {
    Strong,
    Branching,
}

struct Refined {
    partition: Partition,
    sigs: Vec<Sig>,
    divergent: bool,
    split: Option<String>,
}

fn strong_sigs(pts: &Pts, part: &Partition) -> Vec<Sig> {
    pts.states()
        .iter()
        .map(|s| match &s.kind {
            StateKind::Nondet(edges) => {
                let mut obs: Vec<Obs> = edges.iter().map(|(l, t)| Obs::Edge(l.clone(), part.block(*t))).collect();
                if s.terminates {
                    obs.push(Obs::Tick);
                }
                obs.sort();
                obs.dedup();
                Sig { prob: Some(false), obs }
            }
            StateKind::Prob(d) => Sig {
                prob: Some(true),
                obs: vec![Obs::Dist(part.masses(d))],
            },
        })
        .collect()
}

fn inert_successors(pts: &Pts, part: &Partition, s: StateId) -> Vec<StateId> {
    let b = part.block(s);
    match &pts.state(s).kind {
        StateKind::Nondet(edges) => edges
            .iter()
            .filter(|(l, t)| l.is_silent() && part.block(*t) == b)
            .map(|(_, t)| *t)
            .collect(),
        StateKind::Prob(d) => {
            if d.support().all(|t| part.block(t) == b) {
                d.support().collect()
            } else {
                Vec::new()
            }
        }
    }
}

fn own_observations(pts: &Pts, part: &Partition, s: StateId) -> Vec<Obs> {
    let b = part.block(s);
    let st = pts.state(s);
    match &st.kind {
        StateKind::Nondet(edges) => {
            let mut obs: Vec<Obs> = edges
                .iter()
                .filter(|(l, t)| !(l.is_silent() && part.block(*t) == b))
                .map(|(l, t)| Obs::Edge(l.clone(), part.block(*t)))
                .collect();
            if st.terminates {
                obs.push(Obs::Tick);
            }
            obs
        }
        StateKind::Prob(d) => {
            if d.support().all(|t| part.block(t) == b) {
                Vec::new()
            } else {
                vec![Obs::Dist(part.masses(d))]
            }
        }
    }
}

/// Branching signatures and whether some inert cycle exists.
fn branching_sigs(pts: &Pts, part: &Partition) -> (Vec<Sig>, bool) {
    let n = pts.len();
    let all: Vec<usize> = (0..n).collect();
    let comps = graph::sccs(&all, |s| inert_successors(pts, part, s), n);
    let mut comp_of = vec![0; n];
    for (i, c) in comps.iter().enumerate() {
        for &s in c {
            comp_of[s] = i;
        }
    }
    let mut divergent = false;
    let mut comp_obs: Vec<Vec<Obs>> = Vec::with_capacity(comps.len());
    for (i, c) in comps.iter().enumerate() {
        let mut set: BTreeSet<Obs> = BTreeSet::new();
        for &s in c {
            set.extend(own_observations(pts, part, s));
            for t in inert_successors(pts, part, s) {
                let j = comp_of[t];
                if j == i {
                    divergent = true;
                } else {
                    set.extend(comp_obs[j].iter().cloned());
                }
            }
        }
        comp_obs.push(set.into_iter().collect());
    }
    let sigs = (0..n)
        .map(|s| Sig {
            prob: None,
            obs: comp_obs[comp_of[s]].clone(),
        })
        .collect();
    (sigs, divergent)
}

fn describe_split(left: &Sig, right: &Sig) -> String {
    if left.prob != right.prob {
        let kind = |p: Option<bool>| if p == Some(true) { "probabilistic" } else { "nondeterministic" };
        return format!(
            "left initial state is {}, right initial state is {}",
            kind(left.prob),
            kind(right.prob)
        );
    }
    if let Some(o) = left.obs.iter().find(|o| !right.obs.contains(o)) {
        return format!("left can perform {o}; right cannot");
    }
    if let Some(o) = right.obs.iter().find(|o| !left.obs.contains(o)) {
        return format!("right can perform {o}; left cannot");
    }
    "signatures differ".to_string()
}

/// Refines until stable. New blocks are keyed by (old block, signature)
/// and numbered in order of first occurrence, so the result depends only
/// on the state numbering.
fn refine(pts: &Pts, flavor: Flavor, watch: Option<(StateId, StateId)>) -> Refined {
    let mut part = Partition::trivial(pts.len());
    let mut split = None;
    loop {
        let (sigs, divergent) = match flavor {
            Flavor::Strong => (strong_sigs(pts, &part), false),
            Flavor::Branching => branching_sigs(pts, &part),
        };
        let next = Partition::from_labels((0..pts.len()).map(|s| (part.block(s), sigs[s].clone())));
        if let Some((a, b)) = watch {
            if split.is_none() && part.same(a, b) && !next.same(a, b) {
                split = Some(describe_split(&sigs[a], &sigs[b]));
            }
        }
        if next.block_count() == part.block_count() {
            return Refined {
                partition: part,
                sigs,
                divergent,
                split,
            };
        }
        part = next;
    }
}

/// The coarsest bisimulation of a single system, as a partition.
pub fn coarsest_partition(pts: &Pts, mode: Mode) -> Partition {
    let flavor = if mode == Mode::Strong {
        Flavor::Strong
    } else {
        Flavor::Branching
    };
    refine(pts, flavor, None).partition
}

/// Result of comparing two systems.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct BisimResult {
    pub equivalent: bool,
    /// Coarsest bisimulation on the disjoint union.
    pub witness: Partition,
    /// Number of states of the left system; right states are offset by it.
    pub left_states: usize,
    /// An inert cycle exists somewhere in the union (branching modes only).
    pub divergent: bool,
    /// First observation telling the initial states apart.
    pub report: Option<String>,
}

/// Disjoint union with the left initial state as initial state.
pub fn disjoint_union(p1: &Pts, p2: &Pts) -> Pts {
    let off = p1.len();
    let mut states: Vec<State> = p1.states().to_vec();
    for s in p2.states() {
        let kind = match &s.kind {
            StateKind::Nondet(e) => StateKind::Nondet(e.iter().map(|(l, t)| (l.clone(), t + off)).collect()),
            StateKind::Prob(d) => StateKind::Prob(d.map_states(|t| t + off)),
        };
        states.push(State {
            kind,
            terminates: s.terminates,
        });
    }
    Pts::new(states, p1.init()).expect("union of valid systems")
}

pub fn strong_bisim(p1: &Pts, p2: &Pts) -> BisimResult {
    check(p1, p2, Mode::Strong)
}

pub fn branching_bisim(p1: &Pts, p2: &Pts, rooted: bool) -> BisimResult {
    check(
        p1,
        p2,
        if rooted {
            Mode::RootedBranching
        } else {
            Mode::Branching
        },
    )
}

pub fn check(p1: &Pts, p2: &Pts, mode: Mode) -> BisimResult {
    let union = disjoint_union(p1, p2);
    let (a, b) = (p1.init(), p2.init() + p1.len());
    let flavor = if mode == Mode::Strong {
        Flavor::Strong
    } else {
        Flavor::Branching
    };
    let r = refine(&union, flavor, Some((a, b)));
    let mut equivalent = r.partition.same(a, b);
    let mut report = r.split;
    if equivalent && mode == Mode::RootedBranching {
        if let Err(why) = root_condition(&union, &r.partition, a, b) {
            equivalent = false;
            report = Some(why);
        }
    }
    if equivalent {
        report = None;
    }
    BisimResult {
        equivalent,
        witness: r.partition,
        left_states: p1.len(),
        divergent: flavor == Flavor::Branching && r.divergent,
        report,
    }
}

/// First steps of the initial states must match exactly up to classes.
fn root_condition(pts: &Pts, part: &Partition, a: StateId, b: StateId) -> Result<(), String> {
    let (sa, sb) = (pts.state(a), pts.state(b));
    match (&sa.kind, &sb.kind) {
        (StateKind::Nondet(ea), StateKind::Nondet(eb)) => {
            if sa.terminates != sb.terminates {
                let side = if sa.terminates { "left" } else { "right" };
                return Err(format!("only the {side} initial state can terminate"));
            }
            let first = |e: &[(ActionLabel, StateId)]| -> BTreeSet<(ActionLabel, usize)> {
                e.iter().map(|(l, t)| (l.clone(), part.block(*t))).collect()
            };
            let (fa, fb) = (first(ea), first(eb));
            if let Some((l, c)) = fa.difference(&fb).next() {
                return Err(format!("left initial step {l} into class {c} has no match on the right"));
            }
            if let Some((l, c)) = fb.difference(&fa).next() {
                return Err(format!("right initial step {l} into class {c} has no match on the left"));
            }
            Ok(())
        }
        (StateKind::Prob(da), StateKind::Prob(db)) => {
            if lift(da, db, part) {
                Ok(())
            } else {
                Err("initial distributions differ".to_string())
            }
        }
        _ => Err("one initial state is probabilistic, the other is not".to_string()),
    }
}

/// Quotient by the coarsest bisimulation of the given mode, restricted to
/// classes reachable from the initial class.
///
/// In branching mode a class whose signature is a single distribution
/// becomes a P-state. Otherwise it becomes an N-state with one edge per
/// observed edge, plus a `tau` edge to a fresh P-state for every observed
/// distribution.
pub fn minimize(pts: &Pts, mode: Mode) -> Pts {
    let flavor = if mode == Mode::Strong {
        Flavor::Strong
    } else {
        Flavor::Branching
    };
    let r = refine(pts, flavor, None);
    let part = &r.partition;
    let blocks = part.block_count();
    let mut rep = vec![usize::MAX; blocks];
    for s in 0..pts.len() {
        if rep[part.block(s)] == usize::MAX {
            rep[part.block(s)] = s;
        }
    }
    let dist_of = |v: &[(usize, Rational)]| Distribution::new(v.iter().cloned()).expect("class masses sum to one");
    let mut states: Vec<State> = Vec::with_capacity(blocks);
    let mut extra: Vec<State> = Vec::new();
    for b in 0..blocks {
        let sig = &r.sigs[rep[b]];
        if sig.prob == Some(true) || (sig.prob.is_none() && sig.obs.len() == 1 && matches!(sig.obs[0], Obs::Dist(_))) {
            let Obs::Dist(v) = &sig.obs[0] else { unreachable!() };
            states.push(State::prob(dist_of(v)));
            continue;
        }
        let mut edges = Vec::new();
        let mut terminates = false;
        for o in &sig.obs {
            match o {
                Obs::Tick => terminates = true,
                Obs::Edge(l, t) => edges.push((l.clone(), *t)),
                Obs::Dist(v) => {
                    edges.push((ActionLabel::Silent, blocks + extra.len()));
                    extra.push(State::prob(dist_of(v)));
                }
            }
        }
        let mut st = State::nondet(edges);
        st.terminates = terminates;
        states.push(st);
    }
    states.extend(extra);
    Pts::new(states, part.block(pts.init()))
        .expect("quotient is well formed")
        .restrict_reachable()
}
