//! The process-term language: actions, terms, specifications, and the
//! imperfect-action transform.
//!
//! Terms are immutable trees. Sequential composition is not a constructor:
//! `x . P` is pushed into the action prefixes of `x` when the term is built
//! (see [`ProcessTerm::then`]), so `(a +{p} delta) . P` is stored as
//! `a . P +{p} delta`.

use std::collections::{BTreeMap, BTreeSet};
use std::fmt;

use indexmap::IndexMap;
use num_rational::BigRational;
use num_traits::{One, Zero};
use thiserror::Error;

/// Exact rational numbers used for every probability in the crate.
pub type Rational = BigRational;

/// Builds `num/den` as an exact rational.
pub fn ratio(num: i64, den: i64) -> Rational {
    BigRational::new(num.into(), den.into())
}

/// A data value carried by an action or passed to a process definition.
#[derive(Clone, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum Value {
    /// A constant of a declared data domain.
    Elem(String),
    Bit(bool),
    /// The corruption message.
    Bot,
}

impl fmt::Display for Value {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Value::Elem(e) => f.write_str(e),
            Value::Bit(b) => f.write_str(if *b { "1" } else { "0" }),
            Value::Bot => f.write_str("bot"),
        }
    }
}

/// An action argument: either a value or a data variable.
#[derive(Clone, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum Arg {
    Val(Value),
    Var(String),
}

impl Arg {
    pub fn elem(name: &str) -> Arg {
        Arg::Val(Value::Elem(name.to_string()))
    }

    pub fn var(name: &str) -> Arg {
        Arg::Var(name.to_string())
    }

    pub fn bit(b: bool) -> Arg {
        Arg::Val(Value::Bit(b))
    }

    pub fn bot() -> Arg {
        Arg::Val(Value::Bot)
    }

    fn substitute(&self, binding: &BTreeMap<String, Value>) -> Arg {
        match self {
            Arg::Var(v) => match binding.get(v) {
                Some(val) => Arg::Val(val.clone()),
                None => self.clone(),
            },
            Arg::Val(_) => self.clone(),
        }
    }
}

impl fmt::Display for Arg {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Arg::Val(v) => v.fmt(f),
            Arg::Var(v) => f.write_str(v),
        }
    }
}

/// A visible action with data arguments, or the silent action `tau`.
#[derive(Clone, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum ActionLabel {
    Silent,
    Visible { name: String, args: Vec<Arg> },
}

impl ActionLabel {
    pub fn new(name: &str, args: Vec<Arg>) -> ActionLabel {
        ActionLabel::Visible {
            name: name.to_string(),
            args,
        }
    }

    /// A visible action without arguments.
    pub fn named(name: &str) -> ActionLabel {
        ActionLabel::new(name, Vec::new())
    }

    pub fn name(&self) -> Option<&str> {
        match self {
            ActionLabel::Silent => None,
            ActionLabel::Visible { name, .. } => Some(name),
        }
    }

    pub fn args(&self) -> &[Arg] {
        match self {
            ActionLabel::Silent => &[],
            ActionLabel::Visible { args, .. } => args,
        }
    }

    pub fn is_silent(&self) -> bool {
        matches!(self, ActionLabel::Silent)
    }

    /// True when no argument is a variable.
    pub fn is_ground(&self) -> bool {
        self.args().iter().all(|a| matches!(a, Arg::Val(_)))
    }

    pub fn substitute(&self, binding: &BTreeMap<String, Value>) -> ActionLabel {
        match self {
            ActionLabel::Silent => ActionLabel::Silent,
            ActionLabel::Visible { name, args } => ActionLabel::Visible {
                name: name.clone(),
                args: args.iter().map(|a| a.substitute(binding)).collect(),
            },
        }
    }

    fn vars(&self, out: &mut BTreeSet<String>) {
        for a in self.args() {
            if let Arg::Var(v) = a {
                out.insert(v.clone());
            }
        }
    }
}

impl fmt::Display for ActionLabel {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            ActionLabel::Silent => f.write_str("tau"),
            ActionLabel::Visible { name, args } => {
                f.write_str(name)?;
                if !args.is_empty() {
                    f.write_str("(")?;
                    for (i, a) in args.iter().enumerate() {
                        if i > 0 {
                            f.write_str(",")?;
                        }
                        write!(f, "{a}")?;
                    }
                    f.write_str(")")?;
                }
                Ok(())
            }
        }
    }
}

/// One argument position of an [`ActionPattern`].
#[derive(Clone, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum PatArg {
    Any,
    Val(Value),
}

impl fmt::Display for PatArg {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            PatArg::Any => f.write_str("_"),
            PatArg::Val(v) => v.fmt(f),
        }
    }
}

/// Matches actions by name, optionally constraining arguments. A bare name
/// matches every instantiation of that name.
#[derive(Clone, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct ActionPattern {
    pub name: String,
    pub args: Option<Vec<PatArg>>,
}

impl ActionPattern {
    pub fn name(name: &str) -> ActionPattern {
        ActionPattern {
            name: name.to_string(),
            args: None,
        }
    }

    pub fn with_args(name: &str, args: Vec<PatArg>) -> ActionPattern {
        ActionPattern {
            name: name.to_string(),
            args: Some(args),
        }
    }

    /// Silent actions never match. A variable argument only matches `_`.
    pub fn matches(&self, label: &ActionLabel) -> bool {
        let ActionLabel::Visible { name, args } = label else {
            return false;
        };
        if *name != self.name {
            return false;
        }
        match &self.args {
            None => true,
            Some(pats) => {
                pats.len() == args.len()
                    && pats.iter().zip(args).all(|(p, a)| match (p, a) {
                        (PatArg::Any, _) => true,
                        (PatArg::Val(v), Arg::Val(w)) => v == w,
                        (PatArg::Val(_), Arg::Var(_)) => false,
                    })
            }
        }
    }

    /// Whether some concrete action is matched by both patterns.
    pub fn overlaps(&self, other: &ActionPattern) -> bool {
        if self.name != other.name {
            return false;
        }
        match (&self.args, &other.args) {
            (None, _) | (_, None) => true,
            (Some(a), Some(b)) => {
                a.len() == b.len()
                    && a.iter().zip(b).all(|(x, y)| match (x, y) {
                        (PatArg::Any, _) | (_, PatArg::Any) => true,
                        (PatArg::Val(v), PatArg::Val(w)) => v == w,
                    })
            }
        }
    }
}

impl fmt::Display for ActionPattern {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.name)?;
        if let Some(args) = &self.args {
            f.write_str("(")?;
            for (i, a) in args.iter().enumerate() {
                if i > 0 {
                    f.write_str(",")?;
                }
                write!(f, "{a}")?;
            }
            f.write_str(")")?;
        }
        Ok(())
    }
}

pub fn matches_any(patterns: &[ActionPattern], label: &ActionLabel) -> bool {
    patterns.iter().any(|p| p.matches(label))
}

/// A probability: either a literal or a named parameter declared in the
/// enclosing specification.
#[derive(Clone, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum Prob {
    Lit(Rational),
    Param(String),
}

impl Prob {
    pub fn lit(num: i64, den: i64) -> Prob {
        Prob::Lit(ratio(num, den))
    }

    pub fn param(name: &str) -> Prob {
        Prob::Param(name.to_string())
    }
}

/// Process terms. `Skip` is the successfully terminated process: it is what
/// remains after a bare action `a` has been executed.
#[derive(Clone, Debug, Default, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum ProcessTerm {
    #[default]
    Deadlock,
    Skip,
    Prefix(ActionLabel, Box<ProcessTerm>),
    Shadow(ActionLabel, Box<ProcessTerm>),
    Alt(Box<ProcessTerm>, Box<ProcessTerm>),
    PChoice(Prob, Box<ProcessTerm>, Box<ProcessTerm>),
    /// Full merge: interleaving plus communication.
    Merge(Box<ProcessTerm>, Box<ProcessTerm>),
    /// The interleaving part of the merge.
    Parallel(Box<ProcessTerm>, Box<ProcessTerm>),
    /// The communication part of the merge.
    CommMerge(Box<ProcessTerm>, Box<ProcessTerm>),
    Encap(Vec<ActionPattern>, Box<ProcessTerm>),
    Hide(Vec<ActionPattern>, Box<ProcessTerm>),
    Var(String, Vec<Arg>),
    Sum {
        binder: String,
        domain: String,
        body: Box<ProcessTerm>,
    },
}

use ProcessTerm as T;

/// Returned by [`ProcessTerm::then`] when the left operand cannot absorb a
/// continuation.
#[derive(Clone, Debug, PartialEq, Eq, Error)]
#[error("cannot sequence after {0}; only action prefixes, choices and sums may be followed by '.'")]
pub struct SequenceError(pub String);

impl ProcessTerm {
    /// `a . rest`
    pub fn prefix(action: ActionLabel, rest: ProcessTerm) -> ProcessTerm {
        T::Prefix(action, Box::new(rest))
    }

    /// The bare action `a`, terminating successfully.
    pub fn action(action: ActionLabel) -> ProcessTerm {
        T::Prefix(action, Box::new(T::Skip))
    }

    pub fn shadow(action: ActionLabel, rest: ProcessTerm) -> ProcessTerm {
        T::Shadow(action, Box::new(rest))
    }

    pub fn alt(left: ProcessTerm, right: ProcessTerm) -> ProcessTerm {
        T::Alt(Box::new(left), Box::new(right))
    }

    /// n-ary alternative, left-nested. An empty list is deadlock.
    pub fn alts(terms: impl IntoIterator<Item = ProcessTerm>) -> ProcessTerm {
        terms
            .into_iter()
            .reduce(ProcessTerm::alt)
            .unwrap_or(T::Deadlock)
    }

    /// Probabilistic choice taking `left` with probability `p`. Literal
    /// probabilities 1 and 0 collapse to the chosen operand.
    pub fn pchoice(p: Prob, left: ProcessTerm, right: ProcessTerm) -> ProcessTerm {
        if let Prob::Lit(r) = &p {
            if r.is_one() {
                return left;
            }
            if r.is_zero() {
                return right;
            }
        }
        T::PChoice(p, Box::new(left), Box::new(right))
    }

    pub fn merge(left: ProcessTerm, right: ProcessTerm) -> ProcessTerm {
        T::Merge(Box::new(left), Box::new(right))
    }

    pub fn parallel(left: ProcessTerm, right: ProcessTerm) -> ProcessTerm {
        T::Parallel(Box::new(left), Box::new(right))
    }

    pub fn comm_merge(left: ProcessTerm, right: ProcessTerm) -> ProcessTerm {
        T::CommMerge(Box::new(left), Box::new(right))
    }

    pub fn encap(forbidden: Vec<ActionPattern>, body: ProcessTerm) -> ProcessTerm {
        T::Encap(forbidden, Box::new(body))
    }

    pub fn hide(hidden: Vec<ActionPattern>, body: ProcessTerm) -> ProcessTerm {
        T::Hide(hidden, Box::new(body))
    }

    pub fn var(name: &str, args: Vec<Arg>) -> ProcessTerm {
        T::Var(name.to_string(), args)
    }

    pub fn sum(binder: &str, domain: &str, body: ProcessTerm) -> ProcessTerm {
        T::Sum {
            binder: binder.to_string(),
            domain: domain.to_string(),
            body: Box::new(body),
        }
    }

    /// Sequential composition `self . cont`, distributed over choices and
    /// pushed into the last prefix of every branch. `delta . P` is `delta`.
    /// The binder of a sum scopes over the continuation too, so
    /// `sum d:D . r(d) . X(d)` binds both occurrences of `d`.
    pub fn then(self, cont: ProcessTerm) -> Result<ProcessTerm, SequenceError> {
        Ok(match self {
            T::Deadlock => T::Deadlock,
            T::Skip => cont,
            T::Prefix(a, rest) => T::Prefix(a, Box::new(rest.then(cont)?)),
            T::Shadow(a, rest) => T::Shadow(a, Box::new(rest.then(cont)?)),
            T::Alt(l, r) => T::alt(l.then(cont.clone())?, r.then(cont)?),
            T::PChoice(p, l, r) => T::PChoice(p, Box::new(l.then(cont.clone())?), Box::new(r.then(cont)?)),
            T::Sum {
                binder,
                domain,
                body,
            } => T::Sum {
                binder,
                domain,
                body: Box::new(body.then(cont)?),
            },
            T::Var(name, _) => return Err(SequenceError(format!("process call {name}"))),
            T::Merge(..) | T::Parallel(..) | T::CommMerge(..) => {
                return Err(SequenceError("a parallel composition".into()))
            }
            T::Encap(..) => return Err(SequenceError("encap".into())),
            T::Hide(..) => return Err(SequenceError("hide".into())),
        })
    }

    /// Replaces free data variables. Sum binders shadow the binding inside
    /// their body.
    pub fn substitute(&self, binding: &BTreeMap<String, Value>) -> ProcessTerm {
        if binding.is_empty() {
            return self.clone();
        }
        match self {
            T::Deadlock | T::Skip => self.clone(),
            T::Prefix(a, r) => T::prefix(a.substitute(binding), r.substitute(binding)),
            T::Shadow(a, r) => T::shadow(a.substitute(binding), r.substitute(binding)),
            T::Alt(l, r) => T::alt(l.substitute(binding), r.substitute(binding)),
            T::PChoice(p, l, r) => T::PChoice(
                p.clone(),
                Box::new(l.substitute(binding)),
                Box::new(r.substitute(binding)),
            ),
            T::Merge(l, r) => T::merge(l.substitute(binding), r.substitute(binding)),
            T::Parallel(l, r) => T::parallel(l.substitute(binding), r.substitute(binding)),
            T::CommMerge(l, r) => T::comm_merge(l.substitute(binding), r.substitute(binding)),
            T::Encap(h, b) => T::encap(h.clone(), b.substitute(binding)),
            T::Hide(i, b) => T::hide(i.clone(), b.substitute(binding)),
            T::Var(n, args) => T::Var(n.clone(), args.iter().map(|a| a.substitute(binding)).collect()),
            T::Sum {
                binder,
                domain,
                body,
            } => {
                let inner;
                let b = if binding.contains_key(binder) {
                    let mut reduced = binding.clone();
                    reduced.remove(binder);
                    inner = reduced;
                    &inner
                } else {
                    binding
                };
                T::sum(binder, domain, body.substitute(b))
            }
        }
    }

    /// Data variables not bound by an enclosing sum.
    pub fn free_vars(&self) -> BTreeSet<String> {
        let mut out = BTreeSet::new();
        self.collect_free(&mut out);
        out
    }

    fn collect_free(&self, out: &mut BTreeSet<String>) {
        match self {
            T::Deadlock | T::Skip => {}
            T::Prefix(a, r) | T::Shadow(a, r) => {
                a.vars(out);
                r.collect_free(out);
            }
            T::Alt(l, r)
            | T::PChoice(_, l, r)
            | T::Merge(l, r)
            | T::Parallel(l, r)
            | T::CommMerge(l, r) => {
                l.collect_free(out);
                r.collect_free(out);
            }
            T::Encap(_, b) | T::Hide(_, b) => b.collect_free(out),
            T::Var(_, args) => {
                for a in args {
                    if let Arg::Var(v) = a {
                        out.insert(v.clone());
                    }
                }
            }
            T::Sum { binder, body, .. } => {
                let mut inner = BTreeSet::new();
                body.collect_free(&mut inner);
                inner.remove(binder);
                out.extend(inner);
            }
        }
    }

    /// Replaces named probability parameters by their values, collapsing
    /// choices whose probability becomes 0 or 1.
    pub fn resolve_params(&self, values: &IndexMap<String, Rational>) -> Result<ProcessTerm, SpecError> {
        let rec = |t: &ProcessTerm| t.resolve_params(values);
        Ok(match self {
            T::Deadlock | T::Skip | T::Var(..) => self.clone(),
            T::Prefix(a, r) => T::prefix(a.clone(), rec(r)?),
            T::Shadow(a, r) => T::shadow(a.clone(), rec(r)?),
            T::Alt(l, r) => T::alt(rec(l)?, rec(r)?),
            T::PChoice(p, l, r) => {
                let value = match p {
                    Prob::Lit(v) => v.clone(),
                    Prob::Param(name) => values
                        .get(name)
                        .cloned()
                        .ok_or_else(|| SpecError::UnknownParam(name.clone()))?,
                };
                T::pchoice(Prob::Lit(value), rec(l)?, rec(r)?)
            }
            T::Merge(l, r) => T::merge(rec(l)?, rec(r)?),
            T::Parallel(l, r) => T::parallel(rec(l)?, rec(r)?),
            T::CommMerge(l, r) => T::comm_merge(rec(l)?, rec(r)?),
            T::Encap(h, b) => T::encap(h.clone(), rec(b)?),
            T::Hide(i, b) => T::hide(i.clone(), rec(b)?),
            T::Sum {
                binder,
                domain,
                body,
            } => T::sum(binder, domain, rec(body)?),
        })
    }

    fn visit(&self, f: &mut impl FnMut(&ProcessTerm)) {
        f(self);
        match self {
            T::Deadlock | T::Skip | T::Var(..) => {}
            T::Prefix(_, r) | T::Shadow(_, r) | T::Encap(_, r) | T::Hide(_, r) => r.visit(f),
            T::Sum { body, .. } => body.visit(f),
            T::Alt(l, r)
            | T::PChoice(_, l, r)
            | T::Merge(l, r)
            | T::Parallel(l, r)
            | T::CommMerge(l, r) => {
                l.visit(f);
                r.visit(f);
            }
        }
    }

    /// Every action occurring in a prefix or shadow.
    pub fn actions(&self) -> Vec<ActionLabel> {
        let mut out = Vec::new();
        self.visit(&mut |t| {
            if let T::Prefix(a, _) | T::Shadow(a, _) = t {
                out.push(a.clone());
            }
        });
        out
    }

    /// Names of probability parameters referenced by choices.
    pub fn param_refs(&self) -> BTreeSet<String> {
        let mut out = BTreeSet::new();
        self.visit(&mut |t| {
            if let T::PChoice(Prob::Param(p), ..) = t {
                out.insert(p.clone());
            }
        });
        out
    }

    /// Process names called without an action prefix in front of them.
    fn unguarded_calls(&self, out: &mut Vec<String>) {
        match self {
            T::Deadlock | T::Skip | T::Prefix(..) | T::Shadow(..) => {}
            T::Var(n, _) => out.push(n.clone()),
            T::Alt(l, r)
            | T::PChoice(_, l, r)
            | T::Merge(l, r)
            | T::Parallel(l, r)
            | T::CommMerge(l, r) => {
                l.unguarded_calls(out);
                r.unguarded_calls(out);
            }
            T::Encap(_, b) | T::Hide(_, b) => b.unguarded_calls(out),
            T::Sum { body, .. } => body.unguarded_calls(out),
        }
    }
}

impl fmt::Display for ProcessTerm {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&crate::parser::pretty_print(self))
    }
}

/// One rule of the communication function: `left | right -> result`.
/// Variables in the rule are universally quantified and bound by matching.
/// Rules apply in both argument orders.
#[derive(Clone, Debug, PartialEq, Eq, Hash)]
pub struct CommRule {
    pub left: ActionLabel,
    pub right: ActionLabel,
    pub result: ActionLabel,
}

impl CommRule {
    pub fn new(left: ActionLabel, right: ActionLabel, result: ActionLabel) -> CommRule {
        CommRule { left, right, result }
    }

    /// The communication of two ground actions, if this rule covers them.
    pub fn apply(&self, a: &ActionLabel, b: &ActionLabel) -> Option<ActionLabel> {
        self.apply_ordered(a, b).or_else(|| self.apply_ordered(b, a))
    }

    fn apply_ordered(&self, a: &ActionLabel, b: &ActionLabel) -> Option<ActionLabel> {
        let mut binding = BTreeMap::new();
        if unify(&self.left, a, &mut binding) && unify(&self.right, b, &mut binding) {
            let out = self.result.substitute(&binding);
            out.is_ground().then_some(out)
        } else {
            None
        }
    }
}

fn unify(pattern: &ActionLabel, concrete: &ActionLabel, binding: &mut BTreeMap<String, Value>) -> bool {
    let (
        ActionLabel::Visible { name: pn, args: pa },
        ActionLabel::Visible { name: cn, args: ca },
    ) = (pattern, concrete)
    else {
        return false;
    };
    if pn != cn || pa.len() != ca.len() {
        return false;
    }
    for (p, c) in pa.iter().zip(ca) {
        let Arg::Val(cv) = c else { return false };
        match p {
            Arg::Val(pv) => {
                if pv != cv {
                    return false;
                }
            }
            Arg::Var(v) => match binding.get(v) {
                Some(bound) if bound != cv => return false,
                Some(_) => {}
                None => {
                    binding.insert(v.clone(), cv.clone());
                }
            },
        }
    }
    true
}

/// A process definition `proc Name(params) = body`.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Definition {
    pub params: Vec<String>,
    pub body: ProcessTerm,
}

#[derive(Clone, Debug, PartialEq, Eq, Error)]
pub enum SpecError {
    #[error("unknown domain '{0}'")]
    UnknownDomain(String),
    #[error("unknown identifier '{0}'")]
    UnknownIdentifier(String),
    #[error("'{0}' is not a constant of any declared domain")]
    UnknownConstant(String),
    #[error("unbound data variable '{var}' in {context}")]
    UnboundVariable { var: String, context: String },
    #[error("unknown process '{0}'")]
    UnknownProcess(String),
    #[error("{name} expects {expected} argument(s), got {found}")]
    ArityMismatch {
        name: String,
        expected: usize,
        found: usize,
    },
    #[error("unguarded recursion in {}", .0.join(", "))]
    Unguarded(Vec<String>),
    #[error("patterns {0} and {1} match the same action")]
    AmbiguousPattern(String, String),
    #[error("unknown probability parameter '{0}'")]
    UnknownParam(String),
    #[error("probability {0} outside {1}")]
    InvalidProbability(String, &'static str),
    #[error("communication rule result {0} must be a visible action whose variables occur on the left")]
    BadCommRule(String),
    #[error(transparent)]
    Sequence(#[from] SequenceError),
}

/// A closed specification: data domains, probability parameters, the
/// communication function, process definitions and an initial term.
#[derive(Clone, Debug, Default, PartialEq, Eq)]
pub struct ProcessSpec {
    pub domains: IndexMap<String, Vec<String>>,
    pub params: IndexMap<String, Rational>,
    pub comm: Vec<CommRule>,
    pub defs: IndexMap<String, Definition>,
    pub init: ProcessTerm,
}

impl ProcessSpec {
    /// A specification with only an initial term.
    pub fn from_init(init: ProcessTerm) -> ProcessSpec {
        ProcessSpec {
            init,
            ..ProcessSpec::default()
        }
    }

    /// All constants of all declared domains.
    pub fn constants(&self) -> BTreeSet<&str> {
        self.domains.values().flatten().map(String::as_str).collect()
    }

    /// Checked substitution: domain-element values must be declared.
    pub fn substitute(&self, term: &ProcessTerm, binding: &BTreeMap<String, Value>) -> Result<ProcessTerm, SpecError> {
        let constants = self.constants();
        for v in binding.values() {
            if let Value::Elem(e) = v {
                if !constants.contains(e.as_str()) {
                    return Err(SpecError::UnknownConstant(e.clone()));
                }
            }
        }
        Ok(term.substitute(binding))
    }

    /// All communication results of two ground actions.
    pub fn communicate(&self, a: &ActionLabel, b: &ActionLabel) -> Vec<ActionLabel> {
        let mut out: Vec<ActionLabel> = self.comm.iter().filter_map(|r| r.apply(a, b)).collect();
        out.sort();
        out.dedup();
        out
    }

    /// Overrides parameter values. Unknown names are errors.
    pub fn with_params(&self, overrides: &[(String, Rational)]) -> Result<ProcessSpec, SpecError> {
        let mut out = self.clone();
        for (name, value) in overrides {
            check_param_value(value)?;
            match out.params.get_mut(name) {
                Some(slot) => *slot = value.clone(),
                None => return Err(SpecError::UnknownParam(name.clone())),
            }
        }
        Ok(out)
    }

    /// Sets every declared parameter to `value`.
    pub fn with_all_params(&self, value: &Rational) -> Result<ProcessSpec, SpecError> {
        check_param_value(value)?;
        let mut out = self.clone();
        for v in out.params.values_mut() {
            *v = value.clone();
        }
        Ok(out)
    }

    /// The same specification with every parameter reference replaced by its
    /// value. The parameter table is emptied.
    pub fn resolve_params(&self) -> Result<ProcessSpec, SpecError> {
        let mut out = self.clone();
        for def in out.defs.values_mut() {
            def.body = def.body.resolve_params(&self.params)?;
        }
        out.init = out.init.resolve_params(&self.params)?;
        out.params.clear();
        Ok(out)
    }

    /// The same specification with a different initial term.
    pub fn with_init(&self, init: ProcessTerm) -> ProcessSpec {
        ProcessSpec {
            init,
            ..self.clone()
        }
    }

    /// Checks that every name resolves, arities agree, data variables are
    /// bound, parameters exist and recursion is guarded.
    pub fn validate(&self) -> Result<(), SpecError> {
        let constants = self.constants();
        for (name, value) in &self.params {
            check_param_value(value).map_err(|_| SpecError::InvalidProbability(format!("{name} = {value}"), "(0,1]"))?;
        }
        for rule in &self.comm {
            if rule.result.is_silent() {
                return Err(SpecError::BadCommRule(rule.result.to_string()));
            }
            let mut bound = BTreeSet::new();
            rule.left.vars(&mut bound);
            rule.right.vars(&mut bound);
            let mut used = BTreeSet::new();
            rule.result.vars(&mut used);
            if !used.is_subset(&bound) {
                return Err(SpecError::BadCommRule(rule.result.to_string()));
            }
        }
        for (name, def) in &self.defs {
            let scope: BTreeSet<String> = def.params.iter().cloned().collect();
            self.validate_term(&def.body, &scope, &constants, &format!("definition {name}"))?;
        }
        self.validate_term(&self.init, &BTreeSet::new(), &constants, "init")?;
        check_guarded(self).map_err(SpecError::Unguarded)
    }

    fn validate_term(
        &self,
        term: &ProcessTerm,
        scope: &BTreeSet<String>,
        constants: &BTreeSet<&str>,
        context: &str,
    ) -> Result<(), SpecError> {
        let check_args = |args: &[Arg]| -> Result<(), SpecError> {
            for a in args {
                match a {
                    Arg::Var(v) if !scope.contains(v) => {
                        return Err(SpecError::UnboundVariable {
                            var: v.clone(),
                            context: context.to_string(),
                        })
                    }
                    Arg::Val(Value::Elem(e)) if !constants.contains(e.as_str()) => {
                        return Err(SpecError::UnknownConstant(e.clone()))
                    }
                    _ => {}
                }
            }
            Ok(())
        };
        let rec = |t: &ProcessTerm| self.validate_term(t, scope, constants, context);
        match term {
            T::Deadlock | T::Skip => Ok(()),
            T::Prefix(a, r) | T::Shadow(a, r) => {
                check_args(a.args())?;
                rec(r)
            }
            T::Alt(l, r) | T::Merge(l, r) | T::Parallel(l, r) | T::CommMerge(l, r) => {
                rec(l)?;
                rec(r)
            }
            T::PChoice(p, l, r) => {
                match p {
                    Prob::Lit(v) => {
                        if !(v.is_positive() && *v < Rational::one()) {
                            return Err(SpecError::InvalidProbability(v.to_string(), "(0,1)"));
                        }
                    }
                    Prob::Param(n) => {
                        if !self.params.contains_key(n) {
                            return Err(SpecError::UnknownParam(n.clone()));
                        }
                    }
                }
                rec(l)?;
                rec(r)
            }
            T::Encap(_, b) | T::Hide(_, b) => rec(b),
            T::Var(name, args) => {
                let def = self
                    .defs
                    .get(name)
                    .ok_or_else(|| SpecError::UnknownProcess(name.clone()))?;
                if def.params.len() != args.len() {
                    return Err(SpecError::ArityMismatch {
                        name: name.clone(),
                        expected: def.params.len(),
                        found: args.len(),
                    });
                }
                check_args(args)
            }
            T::Sum {
                binder,
                domain,
                body,
            } => {
                if !self.domains.contains_key(domain) {
                    return Err(SpecError::UnknownDomain(domain.clone()));
                }
                let mut inner = scope.clone();
                inner.insert(binder.clone());
                self.validate_term(body, &inner, constants, context)
            }
        }
    }
}

use num_traits::Signed;

fn check_param_value(value: &Rational) -> Result<(), SpecError> {
    if value.is_positive() && *value <= Rational::one() {
        Ok(())
    } else {
        Err(SpecError::InvalidProbability(value.to_string(), "(0,1]"))
    }
}

/// Returns the definitions that can reach themselves through process calls
/// not preceded by an action prefix, in declaration order. `Ok` when none.
pub fn check_guarded(spec: &ProcessSpec) -> Result<(), Vec<String>> {
    let edges: IndexMap<&str, Vec<String>> = spec
        .defs
        .iter()
        .map(|(name, def)| {
            let mut calls = Vec::new();
            def.body.unguarded_calls(&mut calls);
            (name.as_str(), calls)
        })
        .collect();
    let mut offending = Vec::new();
    for start in edges.keys() {
        let mut seen = BTreeSet::new();
        let mut stack: Vec<&str> = edges[start].iter().map(String::as_str).collect();
        while let Some(n) = stack.pop() {
            if n == *start {
                offending.push(start.to_string());
                break;
            }
            if seen.insert(n) {
                if let Some(next) = edges.get(n) {
                    stack.extend(next.iter().map(String::as_str));
                }
            }
        }
    }
    if offending.is_empty() {
        Ok(())
    } else {
        Err(offending)
    }
}

/// Success probabilities for imperfect actions, keyed by action pattern.
#[derive(Clone, Debug, Default, PartialEq, Eq)]
pub struct ImperfectionMap {
    entries: Vec<(ActionPattern, Prob)>,
}

impl ImperfectionMap {
    pub fn new() -> ImperfectionMap {
        ImperfectionMap::default()
    }

    /// Adds a pattern. Literal probabilities must lie in (0,1]; the pattern
    /// may not overlap one already present.
    pub fn insert(&mut self, pattern: ActionPattern, prob: Prob) -> Result<(), SpecError> {
        if let Prob::Lit(v) = &prob {
            check_param_value(v)?;
        }
        if let Some((other, _)) = self.entries.iter().find(|(p, _)| p.overlaps(&pattern)) {
            return Err(SpecError::AmbiguousPattern(other.to_string(), pattern.to_string()));
        }
        self.entries.push((pattern, prob));
        Ok(())
    }

    pub fn with(mut self, pattern: ActionPattern, prob: Prob) -> Result<ImperfectionMap, SpecError> {
        self.insert(pattern, prob)?;
        Ok(self)
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    fn lookup(&self, action: &ActionLabel) -> Result<Option<&Prob>, SpecError> {
        let mut found = self.entries.iter().filter(|(p, _)| p.matches(action));
        let first = found.next();
        if let Some((second, _)) = found.next() {
            return Err(SpecError::AmbiguousPattern(first.unwrap().0.to_string(), second.to_string()));
        }
        Ok(first.map(|(_, prob)| prob))
    }
}

/// Rewrites every prefix `a . P` whose action is listed in `imap` with
/// probability `p` into `a . P' +{p} delta`, where `P'` is the rewritten
/// continuation. Shadows and silent steps are left alone.
pub fn imperfect_transform(term: &ProcessTerm, imap: &ImperfectionMap) -> Result<ProcessTerm, SpecError> {
    if imap.is_empty() {
        return Ok(term.clone());
    }
    let rec = |t: &ProcessTerm| imperfect_transform(t, imap);
    Ok(match term {
        T::Deadlock | T::Skip | T::Var(..) => term.clone(),
        T::Prefix(a, r) => {
            let body = T::prefix(a.clone(), rec(r)?);
            match imap.lookup(a)? {
                Some(p) => T::pchoice(p.clone(), body, T::Deadlock),
                None => body,
            }
        }
        T::Shadow(a, r) => T::shadow(a.clone(), rec(r)?),
        T::Alt(l, r) => T::alt(rec(l)?, rec(r)?),
        T::PChoice(p, l, r) => T::PChoice(p.clone(), Box::new(rec(l)?), Box::new(rec(r)?)),
        T::Merge(l, r) => T::merge(rec(l)?, rec(r)?),
        T::Parallel(l, r) => T::parallel(rec(l)?, rec(r)?),
        T::CommMerge(l, r) => T::comm_merge(rec(l)?, rec(r)?),
        T::Encap(h, b) => T::encap(h.clone(), rec(b)?),
        T::Hide(i, b) => T::hide(i.clone(), rec(b)?),
        T::Sum {
            binder,
            domain,
            body,
        } => T::sum(binder, domain, rec(body)?),
    })
}
