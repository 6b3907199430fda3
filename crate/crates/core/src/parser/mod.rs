//! The `.paver` specification format.
//!
//! ```text
//! spec  := decl*
//! decl  := "domain" ID "=" "{" ID ("," ID)* "}"
//!        | "param" ID "=" prob
//!        | "comm" action "|" action "->" action
//!        | "proc" ID ["(" ID ("," ID)* ")"] "=" term
//!        | "init" term
//! term  := pch ("+" pch)*                 left-associative
//! pch   := seq ("+{" prob "}" seq)*       left-associative
//! seq   := atom ("." atom)*               right-associative
//! atom  := action | "delta" | "tau" | "shadow" "(" action ")"
//!        | "sum" ID ":" ID "." atom
//!        | "encap" "(" "{" pat ("," pat)* "}" "," term ")"
//!        | "hide" "(" "{" pat ("," pat)* "}" "," term ")"
//!        | "par" "(" term "," term ")"
//!        | "interleave" "(" term "," term ")"
//!        | "sync" "(" term "," term ")"
//!        | ID ["(" arg ("," arg)* ")"]
//!        | "(" term ")"
//! arg   := ID | "0" | "1" | "bot"
//! pat   := ID ["(" (arg | "_") ("," (arg | "_"))* ")"]
//! prob  := INT ["/" INT] | DECIMAL | ID
//! ```
//!
//! An identifier applied like `X(d)` is a process call when `X` is declared
//! with `proc`, and an action otherwise. `%` starts a comment.

mod lexer;
mod print;

use std::collections::BTreeSet;
use std::fmt;

use num_bigint::BigInt;
use num_traits::{One, Signed, Zero};
use thiserror::Error;

use crate::term::{
    ActionLabel, ActionPattern, Arg, CommRule, Definition, PatArg, Prob, ProcessSpec, ProcessTerm, Rational,
    SpecError, Value,
};
use lexer::{Tok, Token};

pub use print::{pretty_print, print_spec};

/// Location of a diagnostic: byte offsets plus the 1-based line and column
/// of `start`.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq)]
pub struct SourceSpan {
    pub start: usize,
    pub end: usize,
    pub line: usize,
    pub column: usize,
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Diagnostic {
    pub span: SourceSpan,
    pub message: String,
}

impl fmt::Display for Diagnostic {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}:{}: {}", self.span.line, self.span.column, self.message)
    }
}

/// One or more diagnostics from [`parse_spec`].
#[derive(Clone, Debug, PartialEq, Eq, Error)]
pub struct ParseErrors(pub Vec<Diagnostic>);

impl fmt::Display for ParseErrors {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        for (i, d) in self.0.iter().enumerate() {
            if i > 0 {
                writeln!(f)?;
            }
            write!(f, "{d}")?;
        }
        Ok(())
    }
}

#[derive(Clone, Debug)]
struct RawArg {
    text: String,
    span: SourceSpan,
}

#[derive(Clone, Debug)]
struct RawAction {
    name: String,
    args: Vec<RawArg>,
    span: SourceSpan,
}

#[derive(Clone, Debug)]
enum RawProb {
    Lit(Rational, SourceSpan),
    Param(String, SourceSpan),
}

#[derive(Clone, Debug)]
enum Raw {
    Delta,
    Tau,
    Call(RawAction),
    Shadow(RawAction),
    Sum {
        binder: String,
        domain: String,
        span: SourceSpan,
        body: Box<Raw>,
    },
    Encap(Vec<RawAction>, Box<Raw>),
    Hide(Vec<RawAction>, Box<Raw>),
    Merge(Box<Raw>, Box<Raw>),
    Interleave(Box<Raw>, Box<Raw>),
    Sync(Box<Raw>, Box<Raw>),
    Alt(Box<Raw>, Box<Raw>),
    PChoice(RawProb, Box<Raw>, Box<Raw>),
    Seq(Box<Raw>, Box<Raw>, SourceSpan),
}

struct RawProc {
    name: String,
    span: SourceSpan,
    params: Vec<String>,
    body: Raw,
}

const KEYWORDS: &[&str] = &[
    "domain",
    "param",
    "comm",
    "proc",
    "init",
    "delta",
    "tau",
    "shadow",
    "sum",
    "encap",
    "hide",
    "par",
    "interleave",
    "sync",
    "bot",
];

struct Parser {
    toks: Vec<Token>,
    pos: usize,
}

type PResult<T> = Result<T, Diagnostic>;

impl Parser {
    fn peek(&self) -> &Tok {
        &self.toks[self.pos].tok
    }

    fn peek_at(&self, k: usize) -> &Tok {
        let i = (self.pos + k).min(self.toks.len() - 1);
        &self.toks[i].tok
    }

    fn span(&self) -> SourceSpan {
        self.toks[self.pos].span
    }

    fn advance(&mut self) -> Token {
        let t = self.toks[self.pos].clone();
        if self.pos + 1 < self.toks.len() {
            self.pos += 1;
        }
        t
    }

    fn error<T>(&self, what: &str) -> PResult<T> {
        Err(Diagnostic {
            span: self.span(),
            message: format!("expected {what}, found {}", self.peek().describe()),
        })
    }

    fn expect(&mut self, tok: Tok) -> PResult<SourceSpan> {
        if *self.peek() == tok {
            Ok(self.advance().span)
        } else {
            self.error(&tok.describe())
        }
    }

    fn is_keyword(&self, kw: &str) -> bool {
        matches!(self.peek(), Tok::Ident(s) if s == kw)
    }

    fn ident(&mut self) -> PResult<(String, SourceSpan)> {
        match self.peek().clone() {
            Tok::Ident(s) if !KEYWORDS.contains(&s.as_str()) => {
                let span = self.advance().span;
                Ok((s, span))
            }
            _ => self.error("identifier"),
        }
    }

    fn arg(&mut self, allow_wildcard: bool) -> PResult<RawArg> {
        let span = self.span();
        let text = match self.peek().clone() {
            Tok::Int(s) if s == "0" || s == "1" => s,
            Tok::Ident(s) if s == "bot" => s,
            Tok::Ident(s) if s == "_" && allow_wildcard => s,
            Tok::Ident(s) if s != "_" && !KEYWORDS.contains(&s.as_str()) => s,
            _ => return self.error("argument (identifier, 0, 1 or bot)"),
        };
        self.advance();
        Ok(RawArg { text, span })
    }

    fn action(&mut self, allow_wildcard: bool) -> PResult<RawAction> {
        let (name, span) = self.ident()?;
        let mut args = Vec::new();
        if *self.peek() == Tok::LParen {
            self.advance();
            loop {
                args.push(self.arg(allow_wildcard)?);
                if *self.peek() == Tok::Comma {
                    self.advance();
                } else {
                    break;
                }
            }
            self.expect(Tok::RParen)?;
        }
        Ok(RawAction { name, args, span })
    }

    fn prob(&mut self) -> PResult<RawProb> {
        let span = self.span();
        match self.peek().clone() {
            Tok::Int(num) => {
                self.advance();
                if *self.peek() != Tok::Slash {
                    let n: BigInt = num.parse().expect("digits");
                    return Ok(RawProb::Lit(Rational::from_integer(n), span));
                }
                self.advance();
                let Tok::Int(den) = self.peek().clone() else {
                    return self.error("denominator");
                };
                self.advance();
                let num: BigInt = num.parse().expect("digits");
                let den: BigInt = den.parse().expect("digits");
                if den.is_zero() {
                    return Err(Diagnostic {
                        span,
                        message: "zero denominator".into(),
                    });
                }
                Ok(RawProb::Lit(Rational::new(num, den), span))
            }
            Tok::Decimal(text) => {
                self.advance();
                Ok(RawProb::Lit(parse_decimal(&text), span))
            }
            Tok::Ident(_) => {
                let (name, span) = self.ident()?;
                Ok(RawProb::Param(name, span))
            }
            _ => self.error("probability"),
        }
    }

    fn term(&mut self) -> PResult<Raw> {
        let mut left = self.pchoice()?;
        while *self.peek() == Tok::Plus && *self.peek_at(1) != Tok::LBrace {
            self.advance();
            let right = self.pchoice()?;
            left = Raw::Alt(Box::new(left), Box::new(right));
        }
        Ok(left)
    }

    fn pchoice(&mut self) -> PResult<Raw> {
        let mut left = self.seq()?;
        while *self.peek() == Tok::Plus && *self.peek_at(1) == Tok::LBrace {
            self.advance();
            self.advance();
            let p = self.prob()?;
            self.expect(Tok::RBrace)?;
            let right = self.seq()?;
            left = Raw::PChoice(p, Box::new(left), Box::new(right));
        }
        Ok(left)
    }

    fn seq(&mut self) -> PResult<Raw> {
        let first = self.atom()?;
        if *self.peek() == Tok::Dot {
            let span = self.advance().span;
            let rest = self.seq()?;
            Ok(Raw::Seq(Box::new(first), Box::new(rest), span))
        } else {
            Ok(first)
        }
    }

    fn pair(&mut self) -> PResult<(Raw, Raw)> {
        self.expect(Tok::LParen)?;
        let l = self.term()?;
        self.expect(Tok::Comma)?;
        let r = self.term()?;
        self.expect(Tok::RParen)?;
        Ok((l, r))
    }

    fn pattern_set(&mut self) -> PResult<(Vec<RawAction>, Raw)> {
        self.expect(Tok::LParen)?;
        self.expect(Tok::LBrace)?;
        let mut pats = vec![self.action(true)?];
        while *self.peek() == Tok::Comma {
            self.advance();
            pats.push(self.action(true)?);
        }
        self.expect(Tok::RBrace)?;
        self.expect(Tok::Comma)?;
        let body = self.term()?;
        self.expect(Tok::RParen)?;
        Ok((pats, body))
    }

    fn atom(&mut self) -> PResult<Raw> {
        match self.peek().clone() {
            Tok::LParen => {
                self.advance();
                let t = self.term()?;
                self.expect(Tok::RParen)?;
                Ok(t)
            }
            Tok::Ident(kw) => match kw.as_str() {
                "delta" => {
                    self.advance();
                    Ok(Raw::Delta)
                }
                "tau" => {
                    self.advance();
                    Ok(Raw::Tau)
                }
                "shadow" => {
                    self.advance();
                    self.expect(Tok::LParen)?;
                    let a = self.action(false)?;
                    self.expect(Tok::RParen)?;
                    Ok(Raw::Shadow(a))
                }
                "sum" => {
                    let span = self.advance().span;
                    let (binder, _) = self.ident()?;
                    self.expect(Tok::Colon)?;
                    let (domain, _) = self.ident()?;
                    self.expect(Tok::Dot)?;
                    let body = self.atom()?;
                    Ok(Raw::Sum {
                        binder,
                        domain,
                        span,
                        body: Box::new(body),
                    })
                }
                "encap" | "hide" => {
                    self.advance();
                    let (pats, body) = self.pattern_set()?;
                    Ok(if kw == "encap" {
                        Raw::Encap(pats, Box::new(body))
                    } else {
                        Raw::Hide(pats, Box::new(body))
                    })
                }
                "par" | "interleave" | "sync" => {
                    self.advance();
                    let (l, r) = self.pair()?;
                    let (l, r) = (Box::new(l), Box::new(r));
                    Ok(match kw.as_str() {
                        "par" => Raw::Merge(l, r),
                        "interleave" => Raw::Interleave(l, r),
                        _ => Raw::Sync(l, r),
                    })
                }
                _ => Ok(Raw::Call(self.action(false)?)),
            },
            _ => self.error("term"),
        }
    }
}

fn parse_decimal(text: &str) -> Rational {
    let (int, frac) = text.split_once('.').expect("decimal token");
    let digits: BigInt = format!("{int}{frac}").parse().expect("digits");
    Rational::new(digits, BigInt::from(10).pow(frac.len() as u32))
}

/// Lowering context: declared names, collected while parsing.
struct Lower<'a> {
    procs: &'a indexmap::IndexMap<String, usize>,
    constants: BTreeSet<String>,
    domains: BTreeSet<String>,
    params: BTreeSet<String>,
    diags: Vec<Diagnostic>,
}

impl Lower<'_> {
    fn diag(&mut self, span: SourceSpan, message: String) {
        self.diags.push(Diagnostic { span, message });
    }

    fn value(&mut self, arg: &RawArg, scope: &[String]) -> Option<Arg> {
        match arg.text.as_str() {
            "0" => Some(Arg::bit(false)),
            "1" => Some(Arg::bit(true)),
            "bot" => Some(Arg::bot()),
            name if scope.iter().any(|s| s == name) => Some(Arg::var(name)),
            name if self.constants.contains(name) => Some(Arg::elem(name)),
            name => {
                self.diag(arg.span, format!("unknown identifier '{name}'"));
                None
            }
        }
    }

    fn label(&mut self, a: &RawAction, scope: &[String]) -> ActionLabel {
        let args = a.args.iter().filter_map(|x| self.value(x, scope)).collect();
        ActionLabel::new(&a.name, args)
    }

    fn pattern(&mut self, a: &RawAction) -> ActionPattern {
        if a.args.is_empty() {
            return ActionPattern::name(&a.name);
        }
        let mut args = Vec::new();
        for x in &a.args {
            if x.text == "_" {
                args.push(PatArg::Any);
            } else if let Some(Arg::Val(v)) = self.value(x, &[]) {
                args.push(PatArg::Val(v));
            }
        }
        ActionPattern::with_args(&a.name, args)
    }

    /// Comm rule actions: identifiers that are not constants are variables.
    fn rule_label(&mut self, a: &RawAction) -> ActionLabel {
        let args = a
            .args
            .iter()
            .map(|x| match x.text.as_str() {
                "0" => Arg::bit(false),
                "1" => Arg::bit(true),
                "bot" => Arg::bot(),
                n if self.constants.contains(n) => Arg::elem(n),
                n => Arg::var(n),
            })
            .collect();
        ActionLabel::new(&a.name, args)
    }

    fn prob(&mut self, p: &RawProb) -> Prob {
        match p {
            RawProb::Lit(v, span) => {
                if !(v.is_positive() && *v < Rational::one()) {
                    self.diag(*span, format!("probability {v} outside (0,1)"));
                }
                Prob::Lit(v.clone())
            }
            RawProb::Param(name, span) => {
                if !self.params.contains(name) {
                    self.diag(*span, format!("unknown probability parameter '{name}'"));
                }
                Prob::Param(name.clone())
            }
        }
    }

    /// `conts` are the continuations still to run after `raw`, innermost
    /// first.
    fn term(&mut self, raw: &Raw, scope: &mut Vec<String>, conts: &[&Raw]) -> ProcessTerm {
        match raw {
            Raw::Seq(first, rest, _) => {
                let mut next = Vec::with_capacity(conts.len() + 1);
                next.push(rest.as_ref());
                next.extend_from_slice(conts);
                self.term(first, scope, &next)
            }
            Raw::Delta => {
                // continuation after delta is unreachable but still checked
                self.conts(scope, conts);
                ProcessTerm::Deadlock
            }
            Raw::Tau => ProcessTerm::prefix(ActionLabel::Silent, self.conts(scope, conts)),
            Raw::Shadow(a) => {
                let label = self.label(a, scope);
                ProcessTerm::shadow(label, self.conts(scope, conts))
            }
            Raw::Call(a) => {
                if let Some(&arity) = self.procs.get(&a.name) {
                    if arity != a.args.len() {
                        self.diag(
                            a.span,
                            format!("{} expects {arity} argument(s), got {}", a.name, a.args.len()),
                        );
                    }
                    if !conts.is_empty() {
                        self.diag(
                            a.span,
                            format!("sequential composition after process call {} is not supported", a.name),
                        );
                    }
                    let args = a.args.iter().filter_map(|x| self.value(x, scope)).collect();
                    ProcessTerm::Var(a.name.clone(), args)
                } else {
                    let label = self.label(a, scope);
                    ProcessTerm::prefix(label, self.conts(scope, conts))
                }
            }
            Raw::Sum {
                binder,
                domain,
                span,
                body,
            } => {
                if !self.domains.contains(domain) {
                    self.diag(*span, format!("unknown domain '{domain}'"));
                }
                scope.push(binder.clone());
                let body = self.term(body, scope, conts);
                scope.pop();
                ProcessTerm::sum(binder, domain, body)
            }
            Raw::Alt(l, r) => {
                let l = self.term(l, scope, conts);
                let r = self.term(r, scope, conts);
                ProcessTerm::alt(l, r)
            }
            Raw::PChoice(p, l, r) => {
                let p = self.prob(p);
                let l = self.term(l, scope, conts);
                let r = self.term(r, scope, conts);
                ProcessTerm::PChoice(p, Box::new(l), Box::new(r))
            }
            Raw::Merge(l, r) | Raw::Interleave(l, r) | Raw::Sync(l, r) => {
                self.no_conts(raw, conts);
                let l = self.term(l, scope, &[]);
                let r = self.term(r, scope, &[]);
                match raw {
                    Raw::Merge(..) => ProcessTerm::merge(l, r),
                    Raw::Interleave(..) => ProcessTerm::parallel(l, r),
                    _ => ProcessTerm::comm_merge(l, r),
                }
            }
            Raw::Encap(pats, body) | Raw::Hide(pats, body) => {
                self.no_conts(raw, conts);
                let pats = pats.iter().map(|p| self.pattern(p)).collect();
                let body = self.term(body, scope, &[]);
                if matches!(raw, Raw::Encap(..)) {
                    ProcessTerm::encap(pats, body)
                } else {
                    ProcessTerm::hide(pats, body)
                }
            }
        }
    }

    fn conts(&mut self, scope: &mut Vec<String>, conts: &[&Raw]) -> ProcessTerm {
        match conts.split_first() {
            None => ProcessTerm::Skip,
            Some((first, rest)) => self.term(first, scope, rest),
        }
    }

    fn no_conts(&mut self, raw: &Raw, conts: &[&Raw]) {
        if conts.is_empty() {
            return;
        }
        let what = match raw {
            Raw::Encap(..) => "encap",
            Raw::Hide(..) => "hide",
            _ => "a parallel composition",
        };
        let span = first_span(conts[0]).unwrap_or_default();
        self.diag(span, format!("sequential composition after {what} is not supported"));
    }
}

fn first_span(raw: &Raw) -> Option<SourceSpan> {
    match raw {
        Raw::Call(a) | Raw::Shadow(a) => Some(a.span),
        Raw::Sum { span, .. } | Raw::Seq(_, _, span) => Some(*span),
        Raw::Alt(l, _) | Raw::PChoice(_, l, _) => first_span(l),
        _ => None,
    }
}

/// Parses a complete specification. On success the result has resolved
/// identifiers, matching arities and guarded recursion.
pub fn parse_spec(text: &str) -> Result<ProcessSpec, ParseErrors> {
    let toks = lexer::tokenize(text).map_err(|d| ParseErrors(vec![d]))?;
    let mut p = Parser { toks, pos: 0 };
    let mut spec = ProcessSpec::default();
    let mut raw_procs: Vec<RawProc> = Vec::new();
    let mut raw_comms: Vec<(RawAction, RawAction, RawAction)> = Vec::new();
    let mut raw_init: Option<(Raw, SourceSpan)> = None;
    let mut param_spans = Vec::new();
    let mut diags = Vec::new();

    let fail = |d: Diagnostic| ParseErrors(vec![d]);
    while *p.peek() != Tok::Eof {
        let span = p.span();
        if p.is_keyword("domain") {
            p.advance();
            let (name, _) = p.ident().map_err(fail)?;
            p.expect(Tok::Eq).map_err(fail)?;
            p.expect(Tok::LBrace).map_err(fail)?;
            let mut elems = vec![p.ident().map_err(fail)?.0];
            while *p.peek() == Tok::Comma {
                p.advance();
                elems.push(p.ident().map_err(fail)?.0);
            }
            p.expect(Tok::RBrace).map_err(fail)?;
            if spec.domains.insert(name.clone(), elems).is_some() {
                diags.push(Diagnostic {
                    span,
                    message: format!("domain '{name}' declared twice"),
                });
            }
        } else if p.is_keyword("param") {
            p.advance();
            let (name, nspan) = p.ident().map_err(fail)?;
            p.expect(Tok::Eq).map_err(fail)?;
            let value = match p.prob().map_err(fail)? {
                RawProb::Lit(v, _) => v,
                RawProb::Param(_, s) => {
                    return Err(fail(Diagnostic {
                        span: s,
                        message: "parameter value must be a number".into(),
                    }))
                }
            };
            if !(value.is_positive() && value <= Rational::one()) {
                diags.push(Diagnostic {
                    span: nspan,
                    message: format!("parameter {name} = {value} outside (0,1]"),
                });
            }
            param_spans.push(nspan);
            spec.params.insert(name, value);
        } else if p.is_keyword("comm") {
            p.advance();
            let l = p.action(false).map_err(fail)?;
            p.expect(Tok::Bar).map_err(fail)?;
            let r = p.action(false).map_err(fail)?;
            p.expect(Tok::Arrow).map_err(fail)?;
            let c = p.action(false).map_err(fail)?;
            raw_comms.push((l, r, c));
        } else if p.is_keyword("proc") {
            p.advance();
            let (name, nspan) = p.ident().map_err(fail)?;
            let mut params = Vec::new();
            if *p.peek() == Tok::LParen {
                p.advance();
                params.push(p.ident().map_err(fail)?.0);
                while *p.peek() == Tok::Comma {
                    p.advance();
                    params.push(p.ident().map_err(fail)?.0);
                }
                p.expect(Tok::RParen).map_err(fail)?;
            }
            p.expect(Tok::Eq).map_err(fail)?;
            let body = p.term().map_err(fail)?;
            if raw_procs.iter().any(|rp| rp.name == name) {
                diags.push(Diagnostic {
                    span: nspan,
                    message: format!("process '{name}' declared twice"),
                });
            }
            raw_procs.push(RawProc {
                name,
                span: nspan,
                params,
                body,
            });
        } else if p.is_keyword("init") {
            p.advance();
            let body = p.term().map_err(fail)?;
            if raw_init.is_some() {
                diags.push(Diagnostic {
                    span,
                    message: "more than one init declaration".into(),
                });
            }
            raw_init = Some((body, span));
        } else {
            return Err(fail(p.error::<()>("declaration (domain, param, comm, proc or init)").unwrap_err()));
        }
    }

    let procs: indexmap::IndexMap<String, usize> =
        raw_procs.iter().map(|rp| (rp.name.clone(), rp.params.len())).collect();
    let mut low = Lower {
        procs: &procs,
        constants: spec.constants().into_iter().map(str::to_string).collect(),
        domains: spec.domains.keys().cloned().collect(),
        params: spec.params.keys().cloned().collect(),
        diags,
    };

    for (l, r, c) in &raw_comms {
        let rule = CommRule::new(low.rule_label(l), low.rule_label(r), low.rule_label(c));
        let mut bound = BTreeSet::new();
        for a in rule.left.args().iter().chain(rule.right.args()) {
            if let Arg::Var(v) = a {
                bound.insert(v.clone());
            }
        }
        for a in rule.result.args() {
            if let Arg::Var(v) = a {
                if !bound.contains(v) {
                    low.diag(c.span, format!("variable '{v}' in communication result is not bound"));
                }
            }
        }
        spec.comm.push(rule);
    }
    for rp in &raw_procs {
        let mut scope = rp.params.clone();
        let body = low.term(&rp.body, &mut scope, &[]);
        spec.defs.insert(
            rp.name.clone(),
            Definition {
                params: rp.params.clone(),
                body,
            },
        );
    }
    match &raw_init {
        Some((raw, _)) => spec.init = low.term(raw, &mut Vec::new(), &[]),
        None => low.diag(p.span(), "missing init declaration".into()),
    }

    let mut diags = low.diags;
    if let Err(names) = crate::term::check_guarded(&spec) {
        for name in names {
            let span = raw_procs.iter().find(|rp| rp.name == name).map(|rp| rp.span).unwrap_or_default();
            diags.push(Diagnostic {
                span,
                message: format!("unguarded recursion in {name}"),
            });
        }
    }
    if diags.is_empty() {
        // everything the lowering checks should already hold here
        if let Err(e) = spec.validate() {
            let span = match &e {
                SpecError::UnknownProcess(n) | SpecError::ArityMismatch { name: n, .. } => {
                    raw_procs.iter().find(|rp| &rp.name == n).map(|rp| rp.span)
                }
                _ => None,
            };
            diags.push(Diagnostic {
                span: span.or(raw_init.as_ref().map(|(_, s)| *s)).unwrap_or_default(),
                message: e.to_string(),
            });
        }
    }
    if diags.is_empty() {
        Ok(spec)
    } else {
        diags.sort_by_key(|d| d.span.start);
        Err(ParseErrors(diags))
    }
}

/// Parses a single term in the context of `spec` (its processes, domains and
/// parameters).
pub fn parse_term(text: &str, spec: &ProcessSpec) -> Result<ProcessTerm, ParseErrors> {
    let toks = lexer::tokenize(text).map_err(|d| ParseErrors(vec![d]))?;
    let mut p = Parser { toks, pos: 0 };
    let raw = p.term().map_err(|d| ParseErrors(vec![d]))?;
    if *p.peek() != Tok::Eof {
        return Err(ParseErrors(vec![p.error::<()>("end of term").unwrap_err()]));
    }
    let procs: indexmap::IndexMap<String, usize> =
        spec.defs.iter().map(|(n, d)| (n.clone(), d.params.len())).collect();
    let mut low = Lower {
        procs: &procs,
        constants: spec.constants().into_iter().map(str::to_string).collect(),
        domains: spec.domains.keys().cloned().collect(),
        params: spec.params.keys().cloned().collect(),
        diags: Vec::new(),
    };
    let t = low.term(&raw, &mut Vec::new(), &[]);
    if low.diags.is_empty() {
        Ok(t)
    } else {
        Err(ParseErrors(low.diags))
    }
}

/// Parses an action pattern such as `s_C`, `c_B(bot)` or `s_B(_,0)`.
pub fn parse_pattern(text: &str) -> Result<ActionPattern, ParseErrors> {
    let toks = lexer::tokenize(text).map_err(|d| ParseErrors(vec![d]))?;
    let mut p = Parser { toks, pos: 0 };
    let a = p.action(true).map_err(|d| ParseErrors(vec![d]))?;
    if *p.peek() != Tok::Eof {
        return Err(ParseErrors(vec![p.error::<()>("end of pattern").unwrap_err()]));
    }
    let args = if a.args.is_empty() {
        None
    } else {
        Some(
            a.args
                .iter()
                .map(|x| match x.text.as_str() {
                    "_" => PatArg::Any,
                    "0" => PatArg::Val(Value::Bit(false)),
                    "1" => PatArg::Val(Value::Bit(true)),
                    "bot" => PatArg::Val(Value::Bot),
                    e => PatArg::Val(Value::Elem(e.to_string())),
                })
                .collect(),
        )
    };
    Ok(ActionPattern { name: a.name, args })
}

/// Parses a probability literal `n/d` or a decimal such as `0.25`.
pub fn parse_probability(text: &str) -> Option<Rational> {
    let text = text.trim();
    if let Some((n, d)) = text.split_once('/') {
        let n: BigInt = n.trim().parse().ok()?;
        let d: BigInt = d.trim().parse().ok()?;
        if d.is_zero() {
            return None;
        }
        Some(Rational::new(n, d))
    } else if text.contains('.') {
        let ok = text.chars().all(|c| c.is_ascii_digit() || c == '.') && text.matches('.').count() == 1;
        (ok && !text.starts_with('.') && !text.ends_with('.')).then(|| parse_decimal(text))
    } else {
        let n: BigInt = text.parse().ok()?;
        Some(Rational::from_integer(n))
    }
}
