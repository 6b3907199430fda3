//! Structural operational semantics: expansion of a specification into an
//! alternating probabilistic transition system (PTS).
//!
//! States are canonical terms. A term whose active part still contains a
//! probabilistic choice is a *P-state*; its single distribution is obtained
//! by resolving every active choice (operands of `+` and of the merges are
//! resolved independently and the results recombined). All other terms are
//! *N-states*, whose action edges follow the usual rules:
//!
//! * `a . P` offers `a` to `P`; `shadow(a) . P` offers nothing on its own;
//! * `P + Q` offers the union of both sides;
//! * `par(P, Q)` is `interleave(P, Q) + sync(P, Q)`;
//! * `interleave` lets either side move, except that an action of one side
//!   that matches a shadow offered by the other side is taken jointly with
//!   that shadow;
//! * `sync` offers only communications `γ(a, b)` of one step from each side;
//! * `encap(H, P)` drops steps matching `H`, `hide(I, P)` renames steps
//!   matching `I` to `tau`.
//!
//! Canonicalization unfolds process calls in active position, expands data
//! sums, flattens and sorts `+`, removes `delta` summands, sorts the
//! operands of the merges and drops terminated operands, so re-encountered
//! states are shared.

use std::collections::{BTreeMap, BTreeSet, HashMap, VecDeque};
use std::fmt::Write;

use num_traits::{One, Signed, Zero};
use thiserror::Error;

use crate::term::{
    matches_any, ActionLabel, ActionPattern, Arg, Prob, ProcessSpec, ProcessTerm, Rational, SpecError,
    Value,
};

pub type StateId = usize;

/// Default state budget for [`expand`].
pub const DEFAULT_STATE_LIMIT: usize = 100_000;

#[derive(Clone, Debug, PartialEq, Eq, Error)]
pub enum PtsError {
    #[error("state {0} does not exist")]
    NoSuchState(StateId),
    #[error("distribution of state {state} is invalid: {reason}")]
    BadDistribution { state: StateId, reason: String },
}

/// A finite distribution over states with exact masses in (0,1] summing to
/// one, stored in ascending state order.
#[derive(Clone, Debug, PartialEq, Eq, Hash)]
pub struct Distribution(Vec<(StateId, Rational)>);

impl Distribution {
    /// Merges repeated targets and checks positivity and total mass.
    pub fn new(entries: impl IntoIterator<Item = (StateId, Rational)>) -> Result<Distribution, String> {
        let mut merged: BTreeMap<StateId, Rational> = BTreeMap::new();
        for (s, m) in entries {
            *merged.entry(s).or_insert_with(Rational::zero) += m;
        }
        if merged.is_empty() {
            return Err("empty support".into());
        }
        let mut total = Rational::zero();
        for m in merged.values() {
            if !m.is_positive() {
                return Err(format!("non-positive mass {m}"));
            }
            total += m;
        }
        if !total.is_one() {
            return Err(format!("masses sum to {total}"));
        }
        Ok(Distribution(merged.into_iter().collect()))
    }

    pub fn dirac(s: StateId) -> Distribution {
        Distribution(vec![(s, Rational::one())])
    }

    pub fn iter(&self) -> impl Iterator<Item = (StateId, &Rational)> + '_ {
        self.0.iter().map(|(s, m)| (*s, m))
    }

    pub fn support(&self) -> impl Iterator<Item = StateId> + '_ {
        self.0.iter().map(|(s, _)| *s)
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    pub fn mass(&self, s: StateId) -> Rational {
        self.0
            .iter()
            .find(|(t, _)| *t == s)
            .map(|(_, m)| m.clone())
            .unwrap_or_else(Rational::zero)
    }

    /// The same distribution with state indices renamed (masses of merged
    /// targets are added).
    pub fn map_states(&self, f: impl Fn(StateId) -> StateId) -> Distribution {
        Distribution::new(self.0.iter().map(|(s, m)| (f(*s), m.clone()))).expect("renaming preserves mass")
    }
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub enum StateKind {
    /// Action edges, sorted and free of duplicates. Empty means deadlock.
    Nondet(Vec<(ActionLabel, StateId)>),
    Prob(Distribution),
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct State {
    pub kind: StateKind,
    /// Successful termination is possible without further steps.
    pub terminates: bool,
}

impl State {
    pub fn nondet(mut edges: Vec<(ActionLabel, StateId)>) -> State {
        edges.sort();
        edges.dedup();
        State {
            kind: StateKind::Nondet(edges),
            terminates: false,
        }
    }

    pub fn prob(d: Distribution) -> State {
        State {
            kind: StateKind::Prob(d),
            terminates: false,
        }
    }

    pub fn terminated() -> State {
        State {
            kind: StateKind::Nondet(Vec::new()),
            terminates: true,
        }
    }

    pub fn is_prob(&self) -> bool {
        matches!(self.kind, StateKind::Prob(_))
    }

    /// Action edges; empty for P-states.
    pub fn edges(&self) -> &[(ActionLabel, StateId)] {
        match &self.kind {
            StateKind::Nondet(e) => e,
            StateKind::Prob(_) => &[],
        }
    }

    pub fn distribution(&self) -> Option<&Distribution> {
        match &self.kind {
            StateKind::Prob(d) => Some(d),
            StateKind::Nondet(_) => None,
        }
    }

    fn successors(&self) -> Vec<StateId> {
        match &self.kind {
            StateKind::Nondet(e) => e.iter().map(|(_, t)| *t).collect(),
            StateKind::Prob(d) => d.support().collect(),
        }
    }
}

/// An alternating probabilistic transition system.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Pts {
    states: Vec<State>,
    init: StateId,
}

impl Pts {
    pub fn new(states: Vec<State>, init: StateId) -> Result<Pts, PtsError> {
        let n = states.len();
        if init >= n {
            return Err(PtsError::NoSuchState(init));
        }
        for s in &states {
            if let Some(bad) = s.successors().into_iter().find(|t| *t >= n) {
                return Err(PtsError::NoSuchState(bad));
            }
        }
        Ok(Pts { states, init })
    }

    pub fn init(&self) -> StateId {
        self.init
    }

    pub fn len(&self) -> usize {
        self.states.len()
    }

    pub fn is_empty(&self) -> bool {
        self.states.is_empty()
    }

    pub fn states(&self) -> &[State] {
        &self.states
    }

    pub fn state(&self, s: StateId) -> &State {
        &self.states[s]
    }

    pub fn with_init(&self, init: StateId) -> Pts {
        assert!(init < self.len(), "state {init} out of range");
        Pts {
            states: self.states.clone(),
            init,
        }
    }

    pub fn transition_count(&self) -> usize {
        self.states
            .iter()
            .map(|s| match &s.kind {
                StateKind::Nondet(e) => e.len(),
                StateKind::Prob(d) => d.len(),
            })
            .sum()
    }

    /// Exactly the labels occurring on action edges.
    pub fn reachable_actions(&self) -> BTreeSet<ActionLabel> {
        self.states
            .iter()
            .flat_map(|s| s.edges().iter().map(|(l, _)| l.clone()))
            .collect()
    }

    /// Renames every edge label matching `hidden` to `tau`. The state and
    /// transition structure is otherwise unchanged, apart from edges that
    /// become identical.
    pub fn hide(&self, hidden: &[ActionPattern]) -> Pts {
        let states = self
            .states
            .iter()
            .map(|s| match &s.kind {
                StateKind::Nondet(edges) => {
                    let mut st = State::nondet(
                        edges
                            .iter()
                            .map(|(l, t)| {
                                let l = if matches_any(hidden, l) {
                                    ActionLabel::Silent
                                } else {
                                    l.clone()
                                };
                                (l, *t)
                            })
                            .collect(),
                    );
                    st.terminates = s.terminates;
                    st
                }
                StateKind::Prob(_) => s.clone(),
            })
            .collect();
        Pts {
            states,
            init: self.init,
        }
    }

    /// States reachable from the initial state, in breadth-first order.
    pub fn reachable_states(&self) -> Vec<StateId> {
        let mut seen = vec![false; self.len()];
        let mut order = vec![self.init];
        seen[self.init] = true;
        let mut i = 0;
        while i < order.len() {
            for t in self.states[order[i]].successors() {
                if !seen[t] {
                    seen[t] = true;
                    order.push(t);
                }
            }
            i += 1;
        }
        order
    }

    /// The reachable part, renumbered breadth-first from the initial state.
    pub fn restrict_reachable(&self) -> Pts {
        let order = self.reachable_states();
        let mut rename = vec![usize::MAX; self.len()];
        for (new, old) in order.iter().enumerate() {
            rename[*old] = new;
        }
        let states = order
            .iter()
            .map(|old| {
                let s = &self.states[*old];
                match &s.kind {
                    StateKind::Nondet(e) => {
                        let mut st = State::nondet(e.iter().map(|(l, t)| (l.clone(), rename[*t])).collect());
                        st.terminates = s.terminates;
                        st
                    }
                    StateKind::Prob(d) => State::prob(d.map_states(|t| rename[t])),
                }
            })
            .collect();
        Pts { states, init: 0 }
    }

    /// The line-oriented `.pts` export.
    pub fn to_pts_text(&self) -> String {
        let mut out = String::new();
        writeln!(out, "pts {} {}", self.len(), self.init).unwrap();
        for (i, s) in self.states.iter().enumerate() {
            let kind = if s.is_prob() { "P" } else { "N" };
            let term = if s.terminates { "term" } else { "noterm" };
            writeln!(out, "state {i} {kind} {term}").unwrap();
            match &s.kind {
                StateKind::Nondet(edges) => {
                    for (l, t) in edges {
                        writeln!(out, "a {i} {l} {t}").unwrap();
                    }
                }
                StateKind::Prob(d) => {
                    write!(out, "p {i}").unwrap();
                    for (t, m) in d.iter() {
                        write!(out, " {t}:{}/{}", m.numer(), m.denom()).unwrap();
                    }
                    out.push('\n');
                }
            }
        }
        out
    }

    pub fn to_dot(&self) -> String {
        let mut out = String::from("digraph pts {\n  rankdir=LR;\n");
        for (i, s) in self.states.iter().enumerate() {
            let shape = if s.is_prob() {
                "point"
            } else if s.terminates {
                "doublecircle"
            } else {
                "circle"
            };
            let style = if i == self.init { ", penwidth=2" } else { "" };
            writeln!(out, "  s{i} [shape={shape}, label=\"{i}\"{style}];").unwrap();
            match &s.kind {
                StateKind::Nondet(edges) => {
                    for (l, t) in edges {
                        writeln!(out, "  s{i} -> s{t} [label=\"{l}\"];").unwrap();
                    }
                }
                StateKind::Prob(d) => {
                    for (t, m) in d.iter() {
                        writeln!(out, "  s{i} -> s{t} [style=dashed, label=\"{m}\"];").unwrap();
                    }
                }
            }
        }
        out.push_str("}\n");
        out
    }
}

#[derive(Clone, Debug, PartialEq, Eq, Error)]
pub enum ExpandError {
    #[error("state budget of {limit} exceeded with {frontier} states still unexplored")]
    Budget { limit: usize, frontier: usize },
    #[error(transparent)]
    Spec(#[from] SpecError),
    #[error("internal error: {0}")]
    Internal(String),
}

/// Expands `spec.init` with at most `limit` states. Probability parameters
/// are replaced by their declared values first.
pub fn expand(spec: &ProcessSpec, limit: usize) -> Result<Pts, ExpandError> {
    expand_with_terms(spec, limit).map(|(pts, _)| pts)
}

/// Like [`expand`], also returning the canonical term of every state.
pub fn expand_with_terms(spec: &ProcessSpec, limit: usize) -> Result<(Pts, Vec<ProcessTerm>), ExpandError> {
    spec.validate()?;
    let resolved = spec.resolve_params()?;
    let sem = Semantics { spec: &resolved };
    let init = sem.canon(&resolved.init, 0)?;

    let mut index: HashMap<ProcessTerm, StateId> = HashMap::new();
    let mut terms: Vec<ProcessTerm> = Vec::new();
    let mut queue = VecDeque::new();
    let mut intern = |t: ProcessTerm, queue: &mut VecDeque<StateId>, terms: &mut Vec<ProcessTerm>| -> Result<StateId, ExpandError> {
        if let Some(&id) = index.get(&t) {
            return Ok(id);
        }
        let id = terms.len();
        if id >= limit {
            return Err(ExpandError::Budget {
                limit,
                frontier: queue.len() + 1,
            });
        }
        index.insert(t.clone(), id);
        terms.push(t);
        queue.push_back(id);
        Ok(id)
    };
    intern(init, &mut queue, &mut terms)?;
    let mut states: Vec<Option<State>> = Vec::new();
    while let Some(id) = queue.pop_front() {
        let t = terms[id].clone();
        let state = if is_probabilistic(&t) {
            let mut entries = Vec::new();
            for (target, mass) in sem.dist(&t)? {
                entries.push((intern(target, &mut queue, &mut terms)?, mass));
            }
            let d = Distribution::new(entries).map_err(ExpandError::Internal)?;
            State::prob(d)
        } else {
            let mut edges: Vec<(ActionLabel, ProcessTerm)> = Vec::new();
            for o in sem.offers(&t)? {
                if !o.shadow {
                    edges.push((o.label, sem.canon(&o.cont, 0)?));
                }
            }
            edges.sort();
            edges.dedup();
            let mut ids = Vec::with_capacity(edges.len());
            for (l, target) in edges {
                ids.push((l, intern(target, &mut queue, &mut terms)?));
            }
            let mut st = State::nondet(ids);
            st.terminates = terminates(&t);
            st
        };
        if states.len() <= id {
            states.resize(id + 1, None);
        }
        states[id] = Some(state);
    }
    let states = states.into_iter().map(|s| s.expect("every state expanded")).collect();
    let pts = Pts::new(states, 0).map_err(|e| ExpandError::Internal(e.to_string()))?;
    Ok((pts, terms))
}

struct Offer {
    label: ActionLabel,
    cont: ProcessTerm,
    shadow: bool,
}

struct Semantics<'a> {
    spec: &'a ProcessSpec,
}

const MAX_UNFOLD: usize = 1000;

fn ground_values(args: &[Arg]) -> Option<Vec<Value>> {
    args.iter()
        .map(|a| match a {
            Arg::Val(v) => Some(v.clone()),
            Arg::Var(_) => None,
        })
        .collect()
}

fn flatten_alt(t: ProcessTerm, out: &mut Vec<ProcessTerm>) {
    match t {
        ProcessTerm::Alt(l, r) => {
            flatten_alt(*l, out);
            flatten_alt(*r, out);
        }
        ProcessTerm::Deadlock => {}
        other => out.push(other),
    }
}

fn union_patterns(a: &[ActionPattern], b: &[ActionPattern]) -> Vec<ActionPattern> {
    let mut out: Vec<ActionPattern> = a.iter().chain(b).cloned().collect();
    out.sort();
    out.dedup();
    out
}

/// Whether an active probabilistic choice remains.
fn is_probabilistic(t: &ProcessTerm) -> bool {
    match t {
        ProcessTerm::PChoice(..) => true,
        ProcessTerm::Alt(l, r)
        | ProcessTerm::Merge(l, r)
        | ProcessTerm::Parallel(l, r)
        | ProcessTerm::CommMerge(l, r) => is_probabilistic(l) || is_probabilistic(r),
        ProcessTerm::Encap(_, b) | ProcessTerm::Hide(_, b) => is_probabilistic(b),
        _ => false,
    }
}

fn terminates(t: &ProcessTerm) -> bool {
    match t {
        ProcessTerm::Skip => true,
        ProcessTerm::Alt(l, r) => terminates(l) || terminates(r),
        ProcessTerm::Merge(l, r) | ProcessTerm::Parallel(l, r) => terminates(l) && terminates(r),
        ProcessTerm::Encap(_, b) | ProcessTerm::Hide(_, b) => terminates(b),
        _ => false,
    }
}

impl Semantics<'_> {
    fn canon(&self, t: &ProcessTerm, depth: usize) -> Result<ProcessTerm, ExpandError> {
        use ProcessTerm as T;
        Ok(match t {
            T::Deadlock | T::Skip => t.clone(),
            T::Prefix(a, _) | T::Shadow(a, _) => {
                if !a.is_ground() {
                    return Err(ExpandError::Internal(format!("action {a} has a free variable")));
                }
                t.clone()
            }
            T::Alt(l, r) => {
                let mut items = Vec::new();
                flatten_alt(self.canon(l, depth)?, &mut items);
                flatten_alt(self.canon(r, depth)?, &mut items);
                items.sort();
                items.dedup();
                let mut it = items.into_iter().rev();
                match it.next() {
                    None => T::Deadlock,
                    Some(last) => it.fold(last, |acc, x| T::alt(x, acc)),
                }
            }
            T::PChoice(p, l, r) => {
                let Prob::Lit(v) = p else {
                    return Err(ExpandError::Internal(format!("unresolved parameter in {t}")));
                };
                T::pchoice(Prob::Lit(v.clone()), self.canon(l, depth)?, self.canon(r, depth)?)
            }
            T::Merge(l, r) | T::Parallel(l, r) | T::CommMerge(l, r) => {
                let (mut l, mut r) = (self.canon(l, depth)?, self.canon(r, depth)?);
                let comm_only = matches!(t, T::CommMerge(..));
                if l == T::Skip || r == T::Skip {
                    if comm_only {
                        return Ok(T::Deadlock);
                    }
                    return Ok(if l == T::Skip { r } else { l });
                }
                if l == T::Deadlock && r == T::Deadlock {
                    return Ok(T::Deadlock);
                }
                if r < l {
                    std::mem::swap(&mut l, &mut r);
                }
                match t {
                    T::Merge(..) => T::merge(l, r),
                    T::Parallel(..) => T::parallel(l, r),
                    _ => T::comm_merge(l, r),
                }
            }
            T::Encap(h, b) => match self.canon(b, depth)? {
                b @ (T::Deadlock | T::Skip) => b,
                T::Encap(h2, inner) => T::Encap(union_patterns(h, &h2), inner),
                b => T::encap(union_patterns(h, &[]), b),
            },
            T::Hide(i, b) => match self.canon(b, depth)? {
                b @ (T::Deadlock | T::Skip) => b,
                T::Hide(i2, inner) => T::Hide(union_patterns(i, &i2), inner),
                b => T::hide(union_patterns(i, &[]), b),
            },
            T::Var(name, args) => {
                if depth > MAX_UNFOLD {
                    return Err(ExpandError::Internal(format!("unguarded recursion through {name}")));
                }
                let def = self
                    .spec
                    .defs
                    .get(name)
                    .ok_or_else(|| ExpandError::Spec(SpecError::UnknownProcess(name.clone())))?;
                let values = ground_values(args)
                    .ok_or_else(|| ExpandError::Internal(format!("call {t} has a free variable")))?;
                let binding: BTreeMap<String, Value> = def.params.iter().cloned().zip(values).collect();
                self.canon(&def.body.substitute(&binding), depth + 1)?
            }
            T::Sum {
                binder,
                domain,
                body,
            } => {
                let elems = self
                    .spec
                    .domains
                    .get(domain)
                    .ok_or_else(|| ExpandError::Spec(SpecError::UnknownDomain(domain.clone())))?;
                let branches = elems.iter().map(|e| {
                    let binding = BTreeMap::from([(binder.clone(), Value::Elem(e.clone()))]);
                    body.substitute(&binding)
                });
                self.canon(&T::alts(branches), depth)?
            }
        })
    }

    /// Resolves every active choice of a canonical term.
    fn dist(&self, t: &ProcessTerm) -> Result<BTreeMap<ProcessTerm, Rational>, ExpandError> {
        use ProcessTerm as T;
        let mut out: BTreeMap<ProcessTerm, Rational> = BTreeMap::new();
        match t {
            T::PChoice(Prob::Lit(p), l, r) => {
                let q = Rational::one() - p;
                for (x, m) in self.dist(l)? {
                    *out.entry(x).or_insert_with(Rational::zero) += m * p;
                }
                for (x, m) in self.dist(r)? {
                    *out.entry(x).or_insert_with(Rational::zero) += m * &q;
                }
            }
            T::Alt(l, r) | T::Merge(l, r) | T::Parallel(l, r) | T::CommMerge(l, r) => {
                let dl = self.dist(l)?;
                let dr = self.dist(r)?;
                for (x, mx) in &dl {
                    for (y, my) in &dr {
                        let combined = match t {
                            T::Alt(..) => T::alt(x.clone(), y.clone()),
                            T::Merge(..) => T::merge(x.clone(), y.clone()),
                            T::Parallel(..) => T::parallel(x.clone(), y.clone()),
                            _ => T::comm_merge(x.clone(), y.clone()),
                        };
                        *out.entry(self.canon(&combined, 0)?).or_insert_with(Rational::zero) += mx * my;
                    }
                }
            }
            T::Encap(h, b) | T::Hide(h, b) => {
                for (x, m) in self.dist(b)? {
                    let wrapped = if matches!(t, T::Encap(..)) {
                        T::encap(h.clone(), x)
                    } else {
                        T::hide(h.clone(), x)
                    };
                    *out.entry(self.canon(&wrapped, 0)?).or_insert_with(Rational::zero) += m;
                }
            }
            _ => {
                out.insert(t.clone(), Rational::one());
            }
        }
        Ok(out)
    }

    fn offers(&self, t: &ProcessTerm) -> Result<Vec<Offer>, ExpandError> {
        use ProcessTerm as T;
        Ok(match t {
            T::Deadlock | T::Skip => Vec::new(),
            T::Prefix(a, r) => vec![Offer {
                label: a.clone(),
                cont: (**r).clone(),
                shadow: false,
            }],
            T::Shadow(a, r) => vec![Offer {
                label: a.clone(),
                cont: (**r).clone(),
                shadow: true,
            }],
            T::Alt(l, r) => {
                let mut v = self.offers(l)?;
                v.extend(self.offers(r)?);
                v
            }
            T::Merge(l, r) => {
                let (lo, ro) = (self.offers(l)?, self.offers(r)?);
                let mut v = interleave(l, r, &lo, &ro);
                v.extend(self.communicate(&lo, &ro));
                v
            }
            T::Parallel(l, r) => {
                let (lo, ro) = (self.offers(l)?, self.offers(r)?);
                interleave(l, r, &lo, &ro)
            }
            T::CommMerge(l, r) => {
                let (lo, ro) = (self.offers(l)?, self.offers(r)?);
                self.communicate(&lo, &ro)
            }
            T::Encap(h, b) => self
                .offers(b)?
                .into_iter()
                .filter(|o| !matches_any(h, &o.label))
                .map(|o| Offer {
                    cont: T::encap(h.clone(), o.cont),
                    ..o
                })
                .collect(),
            T::Hide(i, b) => self
                .offers(b)?
                .into_iter()
                .filter_map(|o| {
                    let hidden = matches_any(i, &o.label);
                    if hidden && o.shadow {
                        return None;
                    }
                    Some(Offer {
                        label: if hidden { ActionLabel::Silent } else { o.label },
                        cont: T::hide(i.clone(), o.cont),
                        shadow: o.shadow,
                    })
                })
                .collect(),
            T::PChoice(..) | T::Var(..) | T::Sum { .. } => {
                return Err(ExpandError::Internal(format!("offers of non-canonical term {t}")))
            }
        })
    }

    fn communicate(&self, lo: &[Offer], ro: &[Offer]) -> Vec<Offer> {
        let mut v = Vec::new();
        for a in lo.iter().filter(|o| !o.shadow) {
            for b in ro.iter().filter(|o| !o.shadow) {
                for c in self.spec.communicate(&a.label, &b.label) {
                    v.push(Offer {
                        label: c,
                        cont: ProcessTerm::merge(a.cont.clone(), b.cont.clone()),
                        shadow: false,
                    });
                }
            }
        }
        v
    }
}

/// Interleaving with shadow synchronization. A real step whose label is
/// shadowed by the other side is only taken together with that shadow.
/// Shadows that the other side cannot serve are passed outward.
fn interleave(l: &ProcessTerm, r: &ProcessTerm, lo: &[Offer], ro: &[Offer]) -> Vec<Offer> {
    let mut v = Vec::new();
    let mut side = |mine: &[Offer], other: &[Offer], other_term: &ProcessTerm, mine_left: bool| {
        let join = |a: ProcessTerm, b: ProcessTerm| {
            if mine_left {
                ProcessTerm::merge(a, b)
            } else {
                ProcessTerm::merge(b, a)
            }
        };
        for o in mine {
            if o.shadow {
                let served = other.iter().any(|x| !x.shadow && x.label == o.label);
                if !served {
                    v.push(Offer {
                        label: o.label.clone(),
                        cont: join(o.cont.clone(), other_term.clone()),
                        shadow: true,
                    });
                }
                continue;
            }
            let mut synced = false;
            for s in other.iter().filter(|x| x.shadow && x.label == o.label) {
                synced = true;
                v.push(Offer {
                    label: o.label.clone(),
                    cont: join(o.cont.clone(), s.cont.clone()),
                    shadow: false,
                });
            }
            if !synced {
                v.push(Offer {
                    label: o.label.clone(),
                    cont: join(o.cont.clone(), other_term.clone()),
                    shadow: false,
                });
            }
        }
    };
    side(lo, ro, r, true);
    side(ro, lo, l, false);
    v
}
