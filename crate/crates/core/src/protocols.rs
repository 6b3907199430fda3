//! Builders for the two case studies: the utopian communication protocol
//! (UCP) and the alternating bit protocol (ABP), plus the visible loop
//! both are expected to behave like.
//!
//! Every imperfect action `e` is written `e +{piK} delta` with `piK` a
//! declared parameter, so the same specification serves all probability
//! settings. Process definitions carry the datum being transmitted as a
//! parameter.

use std::fmt;
use std::str::FromStr;

use indexmap::IndexMap;
use num_traits::{One, Signed};
use thiserror::Error;

use crate::equivalence::{schedule, Policy, ScheduleError};
use crate::semantics::{expand, ExpandError, Pts};
use crate::term::{
    ActionLabel, ActionPattern, Arg, CommRule, Definition, PatArg, Prob, ProcessSpec, ProcessTerm as T, Rational,
    SpecError, Value,
};

pub const UCP_PAVER: &str = include_str!("../specs/ucp.paver");
pub const ABP_PAVER: &str = include_str!("../specs/abp.paver");
pub const UCP_SPEC_PAVER: &str = include_str!("../specs/ucp-spec.paver");
pub const ABP_SPEC_PAVER: &str = include_str!("../specs/abp-spec.paver");

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Protocol {
    Ucp,
    Abp,
}

impl FromStr for Protocol {
    type Err = String;

    fn from_str(s: &str) -> Result<Protocol, String> {
        match s {
            "ucp" => Ok(Protocol::Ucp),
            "abp" => Ok(Protocol::Abp),
            other => Err(format!("unknown protocol '{other}' (expected ucp or abp)")),
        }
    }
}

impl fmt::Display for Protocol {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Protocol::Ucp => "ucp",
            Protocol::Abp => "abp",
        })
    }
}

#[derive(Clone, Debug, PartialEq, Eq, Error)]
pub enum ProtocolError {
    #[error("invalid parameter: {0}")]
    InvalidParam(String),
    #[error(transparent)]
    Spec(#[from] SpecError),
    #[error(transparent)]
    Expand(#[from] ExpandError),
    #[error(transparent)]
    Schedule(#[from] ScheduleError),
}

/// `d1, ..., dn`.
pub fn delta_names(n: usize) -> Vec<String> {
    (1..=n).map(|i| format!("d{i}")).collect()
}

fn check_delta(delta: &[String]) -> Result<(), ProtocolError> {
    if delta.is_empty() {
        return Err(ProtocolError::InvalidParam("the data set is empty".into()));
    }
    Ok(())
}

fn check_pis(pis: &[Rational]) -> Result<(), ProtocolError> {
    for (i, p) in pis.iter().enumerate() {
        if !p.is_positive() || p > &Rational::one() {
            return Err(ProtocolError::InvalidParam(format!("pi{} = {p} is not in (0,1]", i + 1)));
        }
    }
    Ok(())
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct UcpParams {
    pub pi: [Rational; 4],
    pub delta: Vec<String>,
}

impl UcpParams {
    /// All four probabilities equal to `p`, data `d1..dn`.
    pub fn uniform(p: Rational, n: usize) -> UcpParams {
        UcpParams {
            pi: std::array::from_fn(|_| p.clone()),
            delta: delta_names(n),
        }
    }

    pub fn validate(&self) -> Result<(), ProtocolError> {
        check_delta(&self.delta)?;
        check_pis(&self.pi)
    }
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct AbpParams {
    pub pi: [Rational; 12],
    pub delta: Vec<String>,
    /// Probability that a scheduler picks a corrupted transmission when it
    /// has the choice. Not part of the specification itself.
    pub q: Rational,
}

impl AbpParams {
    pub fn uniform(p: Rational, n: usize, q: Rational) -> AbpParams {
        AbpParams {
            pi: std::array::from_fn(|_| p.clone()),
            delta: delta_names(n),
            q,
        }
    }

    pub fn validate(&self) -> Result<(), ProtocolError> {
        check_delta(&self.delta)?;
        check_pis(&self.pi)?;
        if self.q.is_negative() || self.q > Rational::one() {
            return Err(ProtocolError::InvalidParam(format!("q = {} is not in [0,1]", self.q)));
        }
        Ok(())
    }
}

fn act(name: &str, args: Vec<Arg>) -> ActionLabel {
    ActionLabel::new(name, args)
}

/// `e +{param} delta` followed by `cont`.
fn imperfect(e: ActionLabel, param: &str, cont: T) -> T {
    T::pchoice(Prob::param(param), T::prefix(e, cont), T::Deadlock)
}

fn call(name: &str, args: Vec<Arg>) -> T {
    T::var(name, args)
}

fn params_table(pis: &[Rational]) -> IndexMap<String, Rational> {
    pis.iter()
        .enumerate()
        .map(|(i, p)| (format!("pi{}", i + 1), p.clone()))
        .collect()
}

fn def(params: &[&str], body: T) -> Definition {
    Definition {
        params: params.iter().map(|p| p.to_string()).collect(),
        body,
    }
}

fn names(list: &[&str]) -> Vec<ActionPattern> {
    list.iter().map(|n| ActionPattern::name(n)).collect()
}

/// Actions blocked in UCP.
pub fn ucp_encapsulated() -> Vec<ActionPattern> {
    names(&["s_B", "r_B"])
}

/// Actions made internal in UCP.
pub fn ucp_hidden() -> Vec<ActionPattern> {
    names(&["c_B"])
}

pub fn abp_encapsulated() -> Vec<ActionPattern> {
    names(&["s_B", "r_B", "s_D", "r_D"])
}

pub fn abp_hidden() -> Vec<ActionPattern> {
    names(&["c_B", "c_D"])
}

/// The corrupted transmissions of ABP.
pub fn abp_corruption() -> Vec<ActionPattern> {
    vec![
        ActionPattern::with_args("c_B", vec![PatArg::Val(Value::Bot)]),
        ActionPattern::with_args("c_D", vec![PatArg::Val(Value::Bot)]),
    ]
}

/// Alice `A` and Bob `B` connected through channel B:
///
/// ```text
/// A     = sum d:D . (r_A(d) +{pi1} delta) . A1(d)
/// A1(d) = (s_B(d) +{pi2} delta) . A2(d)
/// A2(d) = shadow(s_C(d)) . A
/// B     = sum d:D . shadow(r_A(d)) . B1
/// B1    = sum d:D . (r_B(d) +{pi3} delta) . B2(d)
/// B2(d) = (s_C(d) +{pi4} delta) . B
/// init hide({c_B}, encap({s_B, r_B}, par(A, B)))
/// ```
pub fn build_ucp(p: &UcpParams) -> Result<ProcessSpec, ProtocolError> {
    p.validate()?;
    let d = || vec![Arg::var("d")];
    let mut defs = IndexMap::new();
    defs.insert("A".into(), def(&[], T::sum("d", "D", imperfect(act("r_A", d()), "pi1", call("A1", d())))));
    defs.insert("A1".into(), def(&["d"], imperfect(act("s_B", d()), "pi2", call("A2", d()))));
    defs.insert("A2".into(), def(&["d"], T::shadow(act("s_C", d()), call("A", vec![]))));
    defs.insert("B".into(), def(&[], T::sum("d", "D", T::shadow(act("r_A", d()), call("B1", vec![])))));
    defs.insert("B1".into(), def(&[], T::sum("d", "D", imperfect(act("r_B", d()), "pi3", call("B2", d())))));
    defs.insert("B2".into(), def(&["d"], imperfect(act("s_C", d()), "pi4", call("B", vec![]))));
    let spec = ProcessSpec {
        domains: IndexMap::from([("D".to_string(), p.delta.clone())]),
        params: params_table(&p.pi),
        comm: vec![CommRule::new(act("r_B", d()), act("s_B", d()), act("c_B", d()))],
        defs,
        init: T::hide(
            ucp_hidden(),
            T::encap(ucp_encapsulated(), T::merge(call("A", vec![]), call("B", vec![]))),
        ),
    };
    spec.validate()?;
    Ok(spec)
}

/// Sender `S_b` and receiver `R_b` for both bit values, written out as
/// separate definitions (`S0`, `S1`, ...):
///
/// ```text
/// S_b     = sum d:D . (r_A(d) +{pi1} delta) . T_b(d)
/// T_b(d)  = (s_B(d,b) +{pi2} delta) . (shadow(s_C(d)) . U_b(d) + U_b(d))
///         + (s_B(bot) +{pi3} delta) . U_b(d)
/// U_b(d)  = (r_D(b) +{pi4} delta) . S_1-b
///         + ((r_D(1-b) +{pi5} delta) + (r_D(bot) +{pi6} delta)) . T_b(d)
/// R_b     = sum d:D . shadow(r_A(d)) . Rp_b + Rp_b
/// Rp_b    = sum e:D . ((r_B(e,b) +{pi7} delta) . (s_C(e) +{pi8} delta) . Q_b
///                     + (r_B(e,1-b) +{pi9} delta) . Q_1-b)
///         + (r_B(bot) +{pi10} delta) . Q_1-b
/// Q_b     = ((s_D(b) +{pi11} delta) + (s_D(bot) +{pi12} delta)) . R_1-b
/// init hide({c_B, c_D}, encap({s_B, r_B, s_D, r_D}, par(R0, S0)))
/// ```
///
/// The shadows are optional: a retransmitted frame is not delivered again,
/// so the sender must be able to continue without its `s_C` shadow, and
/// the receiver must be able to take a retransmission without a new
/// `r_A`.
pub fn build_abp(p: &AbpParams) -> Result<ProcessSpec, ProtocolError> {
    p.validate()?;
    let mut defs = IndexMap::new();
    let bit = |b: u8| Arg::bit(b == 1);
    let dv = || Arg::var("d");
    let ev = || Arg::var("e");
    for b in [0u8, 1] {
        let nb = 1 - b;
        let n = |base: &str, x: u8| format!("{base}{x}");
        defs.insert(
            n("S", b),
            def(
                &[],
                T::sum("d", "D", imperfect(act("r_A", vec![dv()]), "pi1", call(&n("T", b), vec![dv()]))),
            ),
        );
        let u = || call(&n("U", b), vec![dv()]);
        defs.insert(
            n("T", b),
            def(
                &["d"],
                T::alt(
                    imperfect(
                        act("s_B", vec![dv(), bit(b)]),
                        "pi2",
                        T::alt(T::shadow(act("s_C", vec![dv()]), u()), u()),
                    ),
                    imperfect(act("s_B", vec![Arg::bot()]), "pi3", u()),
                ),
            ),
        );
        let t = || call(&n("T", b), vec![dv()]);
        defs.insert(
            n("U", b),
            def(
                &["d"],
                T::alt(
                    imperfect(act("r_D", vec![bit(b)]), "pi4", call(&n("S", nb), vec![])),
                    T::alt(
                        imperfect(act("r_D", vec![bit(nb)]), "pi5", t()),
                        imperfect(act("r_D", vec![Arg::bot()]), "pi6", t()),
                    ),
                ),
            ),
        );
    }
    for b in [0u8, 1] {
        let nb = 1 - b;
        let n = |base: &str, x: u8| format!("{base}{x}");
        defs.insert(
            n("R", b),
            def(
                &[],
                T::alt(
                    T::sum("d", "D", T::shadow(act("r_A", vec![dv()]), call(&n("Rp", b), vec![]))),
                    call(&n("Rp", b), vec![]),
                ),
            ),
        );
        defs.insert(
            n("Rp", b),
            def(
                &[],
                T::alt(
                    T::sum(
                        "e",
                        "D",
                        T::alt(
                            imperfect(
                                act("r_B", vec![ev(), bit(b)]),
                                "pi7",
                                imperfect(act("s_C", vec![ev()]), "pi8", call(&n("Q", b), vec![])),
                            ),
                            imperfect(act("r_B", vec![ev(), bit(nb)]), "pi9", call(&n("Q", nb), vec![])),
                        ),
                    ),
                    imperfect(act("r_B", vec![Arg::bot()]), "pi10", call(&n("Q", nb), vec![])),
                ),
            ),
        );
        let r = || call(&n("R", nb), vec![]);
        defs.insert(
            n("Q", b),
            def(
                &[],
                T::alt(
                    imperfect(act("s_D", vec![bit(b)]), "pi11", r()),
                    imperfect(act("s_D", vec![Arg::bot()]), "pi12", r()),
                ),
            ),
        );
    }
    let v = |x: &str| Arg::var(x);
    let comm = vec![
        CommRule::new(
            act("s_B", vec![v("d"), v("b")]),
            act("r_B", vec![v("d"), v("b")]),
            act("c_B", vec![v("d"), v("b")]),
        ),
        CommRule::new(act("s_B", vec![Arg::bot()]), act("r_B", vec![Arg::bot()]), act("c_B", vec![Arg::bot()])),
        CommRule::new(act("s_D", vec![v("b")]), act("r_D", vec![v("b")]), act("c_D", vec![v("b")])),
        CommRule::new(act("s_D", vec![Arg::bot()]), act("r_D", vec![Arg::bot()]), act("c_D", vec![Arg::bot()])),
    ];
    let spec = ProcessSpec {
        domains: IndexMap::from([("D".to_string(), p.delta.clone())]),
        params: params_table(&p.pi),
        comm,
        defs,
        init: T::hide(
            abp_hidden(),
            T::encap(abp_encapsulated(), T::merge(call("R0", vec![]), call("S0", vec![]))),
        ),
    };
    spec.validate()?;
    Ok(spec)
}

/// `Spec = sum d:D . r_A(d) . s_C(d) . Spec`, with the sum written out.
pub fn desired_behavior(_protocol: Protocol, delta: &[String]) -> Result<ProcessSpec, ProtocolError> {
    check_delta(delta)?;
    let body = T::alts(delta.iter().map(|d| {
        T::prefix(
            act("r_A", vec![Arg::elem(d)]),
            T::prefix(act("s_C", vec![Arg::elem(d)]), call("Spec", vec![])),
        )
    }));
    let spec = ProcessSpec {
        domains: IndexMap::from([("D".to_string(), delta.to_vec())]),
        defs: IndexMap::from([("Spec".to_string(), def(&[], body))]),
        init: call("Spec", vec![]),
        ..ProcessSpec::default()
    };
    spec.validate()?;
    Ok(spec)
}

/// The initial term without the outer hiding.
pub fn without_hiding(spec: &ProcessSpec) -> ProcessSpec {
    match &spec.init {
        T::Hide(_, body) => spec.with_init((**body).clone()),
        _ => spec.clone(),
    }
}

/// ABP with nondeterminism resolved: corrupted transmissions get mass
/// `q`, then internal communications are hidden.
pub fn abp_scheduled(p: &AbpParams, limit: usize) -> Result<Pts, ProtocolError> {
    let spec = build_abp(p)?;
    let raw = expand(&without_hiding(&spec), limit)?;
    let policy = Policy::Corruption {
        q: p.q.clone(),
        labels: abp_corruption(),
    };
    Ok(schedule(&raw, &policy)?.hide(&abp_hidden()))
}

/// Convenience: `pi` values by position, the rest left at one.
pub fn pis<const N: usize>(given: &[(usize, Rational)]) -> [Rational; N] {
    let mut out: [Rational; N] = std::array::from_fn(|_| Rational::one());
    for (i, v) in given {
        out[*i - 1] = v.clone();
    }
    out
}

/// Sets `pi` values from `name = value` pairs (`all` sets every one).
pub fn apply_pi_overrides(pi: &mut [Rational], overrides: &[(String, Rational)]) -> Result<(), ProtocolError> {
    for (name, value) in overrides {
        if name == "all" {
            pi.iter_mut().for_each(|p| *p = value.clone());
            continue;
        }
        let idx = name
            .strip_prefix("pi")
            .and_then(|k| k.parse::<usize>().ok())
            .filter(|k| *k >= 1 && *k <= pi.len())
            .ok_or_else(|| ProtocolError::InvalidParam(format!("unknown parameter '{name}'")))?;
        pi[idx - 1] = value.clone();
    }
    check_pis(pi)
}
