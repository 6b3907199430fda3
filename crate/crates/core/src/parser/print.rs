use std::fmt::Write;

use crate::term::{ActionPattern, Prob, ProcessSpec, ProcessTerm};

const ALT: u8 = 0;
const PCH: u8 = 1;
const SEQ: u8 = 2;

/// Prints a term in `.paver` syntax with the fewest parentheses the
/// precedence rules allow. Parsing the output yields the same term.
pub fn pretty_print(term: &ProcessTerm) -> String {
    let mut out = String::new();
    write_term(&mut out, term, ALT);
    out
}

fn write_prob(out: &mut String, p: &Prob) {
    match p {
        Prob::Lit(r) => write!(out, "{}/{}", r.numer(), r.denom()).unwrap(),
        Prob::Param(name) => out.push_str(name),
    }
}

fn write_patterns(out: &mut String, pats: &[ActionPattern]) {
    out.push('{');
    for (i, p) in pats.iter().enumerate() {
        if i > 0 {
            out.push_str(", ");
        }
        write!(out, "{p}").unwrap();
    }
    out.push('}');
}

fn write_rest(out: &mut String, rest: &ProcessTerm) {
    if *rest != ProcessTerm::Skip {
        out.push_str(" . ");
        write_term(out, rest, SEQ);
    }
}

fn write_term(out: &mut String, term: &ProcessTerm, ctx: u8) {
    match term {
        ProcessTerm::Deadlock => out.push_str("delta"),
        // not expressible on its own; only produced by execution
        ProcessTerm::Skip => out.push_str("skip"),
        ProcessTerm::Prefix(a, rest) => {
            write!(out, "{a}").unwrap();
            write_rest(out, rest);
        }
        ProcessTerm::Shadow(a, rest) => {
            write!(out, "shadow({a})").unwrap();
            write_rest(out, rest);
        }
        ProcessTerm::Alt(l, r) => {
            let paren = ctx > ALT;
            if paren {
                out.push('(');
            }
            write_term(out, l, ALT);
            out.push_str(" + ");
            write_term(out, r, PCH);
            if paren {
                out.push(')');
            }
        }
        ProcessTerm::PChoice(p, l, r) => {
            let paren = ctx > PCH;
            if paren {
                out.push('(');
            }
            write_term(out, l, PCH);
            out.push_str(" +{");
            write_prob(out, p);
            out.push_str("} ");
            write_term(out, r, SEQ);
            if paren {
                out.push(')');
            }
        }
        ProcessTerm::Merge(l, r) | ProcessTerm::Parallel(l, r) | ProcessTerm::CommMerge(l, r) => {
            out.push_str(match term {
                ProcessTerm::Merge(..) => "par(",
                ProcessTerm::Parallel(..) => "interleave(",
                _ => "sync(",
            });
            write_term(out, l, ALT);
            out.push_str(", ");
            write_term(out, r, ALT);
            out.push(')');
        }
        ProcessTerm::Encap(pats, body) | ProcessTerm::Hide(pats, body) => {
            out.push_str(if matches!(term, ProcessTerm::Encap(..)) {
                "encap("
            } else {
                "hide("
            });
            write_patterns(out, pats);
            out.push_str(", ");
            write_term(out, body, ALT);
            out.push(')');
        }
        ProcessTerm::Var(name, args) => {
            out.push_str(name);
            if !args.is_empty() {
                out.push('(');
                for (i, a) in args.iter().enumerate() {
                    if i > 0 {
                        out.push(',');
                    }
                    write!(out, "{a}").unwrap();
                }
                out.push(')');
            }
        }
        ProcessTerm::Sum {
            binder,
            domain,
            body,
        } => {
            write!(out, "sum {binder}:{domain} . ").unwrap();
            write_term(out, body, SEQ);
        }
    }
}

/// Prints a whole specification, one declaration per line, in the order
/// domains, parameters, communication rules, processes, init.
pub fn print_spec(spec: &ProcessSpec) -> String {
    let mut out = String::new();
    for (name, elems) in &spec.domains {
        writeln!(out, "domain {name} = {{{}}}", elems.join(", ")).unwrap();
    }
    for (name, value) in &spec.params {
        if value.is_integer() {
            writeln!(out, "param {name} = {}", value.numer()).unwrap();
        } else {
            writeln!(out, "param {name} = {}/{}", value.numer(), value.denom()).unwrap();
        }
    }
    for rule in &spec.comm {
        writeln!(out, "comm {} | {} -> {}", rule.left, rule.right, rule.result).unwrap();
    }
    for (name, def) in &spec.defs {
        out.push_str("proc ");
        out.push_str(name);
        if !def.params.is_empty() {
            write!(out, "({})", def.params.join(", ")).unwrap();
        }
        out.push_str(" = ");
        write_term(&mut out, &def.body, ALT);
        out.push('\n');
    }
    out.push_str("init ");
    write_term(&mut out, &spec.init, ALT);
    out.push('\n');
    out
}
