mod common;

use std::collections::BTreeSet;

use paver::equivalence::{disjoint_union, strong_bisim};
use paver::parser::{parse_spec, parse_term};
use paver::protocols::{build_abp, build_ucp, without_hiding, AbpParams, UcpParams};
use paver::semantics::{expand, expand_with_terms, ExpandError, Pts};
use paver::term::{imperfect_transform, ratio, ActionPattern, ImperfectionMap, Prob, ProcessSpec, ProcessTerm, Rational};

fn pts(spec: &ProcessSpec) -> Pts {
    expand(spec, 100_000).unwrap()
}

fn labels(p: &Pts) -> BTreeSet<String> {
    p.reachable_actions().iter().map(|l| l.to_string()).collect()
}

#[test]
fn imperfect_transform_matches_oracle() {
    let spec = parse_spec("init a . b . delta").unwrap();
    let imap = ImperfectionMap::new()
        .with(ActionPattern::name("a"), Prob::lit(1, 2))
        .unwrap()
        .with(ActionPattern::name("b"), Prob::lit(1, 3))
        .unwrap();
    let got = imperfect_transform(&spec.init, &imap).unwrap();
    let want = parse_term("(a . (b . delta +{1/3} delta)) +{1/2} delta", &spec).unwrap();
    assert_eq!(got, want);
    let (l, r) = (pts(&spec.with_init(got)), pts(&spec.with_init(want)));
    let union = disjoint_union(&l, &r);
    let related = common::oracle_strong(&union);
    assert!(related[l.init()][l.len() + r.init()]);
    assert!(strong_bisim(&l, &r).equivalent);
}

#[test]
fn ucp_alphabet_after_hiding() {
    let p = pts(&build_ucp(&UcpParams::uniform(ratio(1, 1), 1)).unwrap());
    let want: BTreeSet<String> = ["r_A(d1)", "s_C(d1)", "tau"].iter().map(|s| s.to_string()).collect();
    assert_eq!(labels(&p), want);
    assert!(labels(&pts(&parse_spec("init delta").unwrap())).is_empty());
}

#[test]
fn abp_alphabet_after_encapsulation() {
    let spec = build_abp(&AbpParams::uniform(ratio(1, 1), 1, ratio(0, 1))).unwrap();
    let got = labels(&pts(&without_hiding(&spec)));
    for l in ["c_B(d1,0)", "c_B(d1,1)", "c_B(bot)", "c_D(0)", "c_D(1)", "c_D(bot)", "r_A(d1)", "s_C(d1)"] {
        assert!(got.contains(l), "missing {l} in {got:?}");
    }
    for name in ["s_B", "r_B", "s_D", "r_D"] {
        assert!(got.iter().all(|l| !l.starts_with(name)), "{name} survives in {got:?}");
    }
}

/// `X1 = r_A . X2 +{pi1} delta` etc., with `c_B` hidden.
fn linear_ucp(pi: &[Rational; 4]) -> ProcessSpec {
    let spec = parse_spec(
        "domain D = {d1}
         param pi1 = 1
         param pi2 = 1
         param pi3 = 1
         param pi4 = 1
         proc X1 = sum d:D . r_A(d) . X2(d) +{pi1} delta
         proc X2(d) = c_B(d) . X3(d) +{pi2} delta +{pi3} delta
         proc X3(d) = s_C(d) . X1 +{pi4} delta
         init hide({c_B}, X1)",
    )
    .unwrap();
    let values: Vec<(String, Rational)> = pi.iter().enumerate().map(|(i, v)| (format!("pi{}", i + 1), v.clone())).collect();
    spec.with_params(&values).unwrap()
}

#[test]
fn ucp_expands_to_linear_specification() {
    let mut rng = common::rng(205);
    for _ in 0..10 {
        let pi: [Rational; 4] = std::array::from_fn(|_| common::random_unit_rational(&mut rng));
        let ucp = pts(&build_ucp(&UcpParams {
            pi: pi.clone(),
            delta: vec!["d1".into()],
        })
        .unwrap());
        let r = strong_bisim(&ucp, &pts(&linear_ucp(&pi)));
        assert!(r.equivalent, "{pi:?}: {:?}", r.report);
    }
}

#[test]
fn hiding_commutes_with_expansion() {
    let base = common::context();
    let mut rng = common::rng(31);
    let hidden = vec![ActionPattern::name("a"), ActionPattern::name("c")];
    for _ in 0..100 {
        let t = common::random_term(&mut rng, 3, true);
        let whole = pts(&base.with_init(ProcessTerm::hide(hidden.clone(), t.clone())));
        let after = pts(&base.with_init(t)).hide(&hidden);
        assert!(strong_bisim(&whole, &after).equivalent);
    }
}

#[test]
fn state_terms_are_numbered_breadth_first() {
    let spec = parse_spec("proc X = a . b . X + c . delta init X").unwrap();
    let (p, terms) = expand_with_terms(&spec, 100).unwrap();
    assert_eq!(p.init(), 0);
    assert_eq!(terms.len(), p.len());
    let first = p.state(0).edges();
    let targets: Vec<usize> = first.iter().map(|(_, t)| *t).collect();
    assert_eq!(targets, vec![1, 2]);
}

#[test]
fn budget_error_reports_frontier() {
    let spec = parse_spec("proc X = a . b . c . X init X").unwrap();
    match expand(&spec, 2) {
        Err(ExpandError::Budget { limit, frontier }) => {
            assert_eq!(limit, 2);
            assert!(frontier >= 1);
        }
        other => panic!("expected budget error, got {other:?}"),
    }
    assert_eq!(expand(&spec, 3).unwrap().len(), 3);
}

#[test]
fn random_terms_expand_within_budget() {
    let base = common::context();
    let mut rng = common::rng(77);
    for _ in 0..200 {
        let t = common::random_term(&mut rng, 4, true);
        let p = expand(&base.with_init(t), 100_000).unwrap();
        assert_eq!(p.reachable_states().len(), p.len());
    }
}
