//! Randomized cross-checks between independent components: printer vs
//! parser, the two evaluators, the two AD modes, and the reproducibility
//! and shape of serialized reports.

use std::rc::Rc;

use proptest::prelude::*;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use pcfr::ad::{ad_term, grad_program, AdMode};
use pcfr::corpus;
use pcfr::eval::{eval_program, eval_program_need, EvalConfig, Strategy};
use pcfr::gen::{gen_branching_program, gen_roundtrip_term, gen_simple_program, GenConfig};
use pcfr::lab::failure_scan;
use pcfr::oracle::CompareConfig;
use pcfr::parser::parse;
use pcfr::pretty::print_term;
use pcfr::registry::PrimRegistry;
use pcfr::syntax::{alpha_eq, num, subst, Term};
use pcfr::typecheck::Program;

fn reg() -> PrimRegistry {
    PrimRegistry::default()
}

fn point(rng: &mut impl Rng, n: usize) -> Vec<f64> {
    (0..n).map(|_| rng.gen_range(-2.0..2.0)).collect()
}

proptest! {
    /// Printing and re-parsing is the identity up to alpha-equivalence.
    #[test]
    fn printer_parser_roundtrip(seed in any::<u64>()) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let registry = reg();
        let t = gen_roundtrip_term(&mut rng, 4);
        let text = print_term(&t);
        let parsed = parse(&text, &registry)
            .unwrap_or_else(|e| panic!("{text}\n  does not parse back: {e}"));
        prop_assert!(
            alpha_eq(&t, &parsed.term),
            "{text}\n  parsed to\n{}",
            print_term(&parsed.term)
        );
    }

    /// The by-need evaluator computes the same partial function as the
    /// small-step head strategy.
    #[test]
    fn need_evaluator_matches_small_step(seed in any::<u64>()) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let registry = reg();
        let cfg = GenConfig { max_depth: 4, arity: rng.gen_range(1..=2) };
        let prog = gen_branching_program(&mut rng, &cfg);
        for _ in 0..4 {
            let r = point(&mut rng, cfg.arity);
            let slow = eval_program(
                &prog,
                &r,
                Strategy::HeadDeterministic,
                &EvalConfig::default(),
                &registry,
            )
            .unwrap();
            let fast = eval_program_need(&prog, &r, 1, 1_000_000, &registry);
            prop_assert_eq!(&slow, &fast, "at {:?}", r);
        }
    }

    /// Forward and reverse gradients of simple programs coincide.
    #[test]
    fn modes_agree_on_simple_programs(seed in any::<u64>()) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let registry = reg();
        let cfg = GenConfig { max_depth: 5, arity: rng.gen_range(1..=3) };
        let prog = gen_simple_program(&mut rng, &cfg);
        let fwd = grad_program(&prog, AdMode::Forward, &registry).unwrap();
        let rev = grad_program(&prog, AdMode::Reverse, &registry).unwrap();
        let ecfg = EvalConfig::default();
        for _ in 0..4 {
            let r = point(&mut rng, cfg.arity);
            let gf = fwd
                .value_at(&r, Strategy::HeadDeterministic, &ecfg, &registry)
                .unwrap()
                .expect("simple programs terminate");
            let gr = rev
                .value_at(&r, Strategy::HeadDeterministic, &ecfg, &registry)
                .unwrap()
                .expect("simple programs terminate");
            for (a, b) in gf.iter().zip(&gr) {
                prop_assert!(
                    (a - b).abs() <= 1e-9 * a.abs().max(b.abs()).max(1.0),
                    "at {:?}: {:?} vs {:?}", r, gf, gr
                );
            }
        }
    }

    /// The transform commutes with substituting a numeral for a real
    /// variable: transforming after plugging in r equals plugging the
    /// transformed numeral into the transformed term.
    #[test]
    fn transform_commutes_with_numeral_substitution(seed in any::<u64>()) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let registry = reg();
        let cfg = GenConfig { max_depth: 4, arity: 2 };
        let prog = gen_simple_program(&mut rng, &cfg);
        let r = rng.gen_range(-2.0..2.0);
        let x = &prog.vars[0];
        for mode in [AdMode::Forward, AdMode::Reverse] {
            let sub_first = ad_term(
                &subst(&prog.term, x, &num(r)), mode, 2, &registry,
            ).unwrap();
            let dnum = ad_term(&num(r), mode, 2, &registry).unwrap();
            let transform_first =
                subst(&ad_term(&prog.term, mode, 2, &registry).unwrap(), x, &dnum);
            prop_assert!(
                alpha_eq(&sub_first, &transform_first),
                "{mode:?} transform does not commute with substitution"
            );
        }
    }
}

#[test]
fn roundtrip_thousand_terms() {
    let mut rng = ChaCha8Rng::seed_from_u64(1000);
    let registry = reg();
    for _ in 0..1000 {
        let t = gen_roundtrip_term(&mut rng, 5);
        let text = print_term(&t);
        let parsed = parse(&text, &registry)
            .unwrap_or_else(|e| panic!("{text}\n  does not parse back: {e}"));
        assert!(
            alpha_eq(&t, &parsed.term),
            "round trip changed:\n{text}\n  reparsed as\n{}",
            print_term(&parsed.term)
        );
    }
}

#[test]
fn corpus_sources_roundtrip() {
    let registry = reg();
    for entry in corpus::entries() {
        let parsed = parse(&entry.source, &registry)
            .unwrap_or_else(|e| panic!("{}: {e}", entry.name));
        let printed = print_term(&parsed.term);
        let reparsed = parse(&printed, &registry)
            .unwrap_or_else(|e| panic!("{}: {e}\n{printed}", entry.name));
        assert!(alpha_eq(&parsed.term, &reparsed.term), "{}", entry.name);
    }
}

#[test]
fn scans_are_reproducible() {
    let registry = reg();
    let prog = Program::from_term(Term::app(corpus::relu(), Term::var("x")));
    let cfg = CompareConfig::default();
    let a = failure_scan(&prog, &[(-1.0, 1.0)], 500, 7, &cfg, &registry);
    let b = failure_scan(&prog, &[(-1.0, 1.0)], 500, 7, &cfg, &registry);
    assert_eq!(a, b);
    assert_eq!(a.samples, 500);
    assert_eq!(a.seed, 7);
}

#[test]
fn scan_report_serializes_with_stable_field_names() {
    let registry = reg();
    let prog = Program::from_term(Term::app(corpus::silly_id(), Term::var("x")));
    let report = failure_scan(
        &prog,
        &[(-1.0, 1.0)],
        200,
        42,
        &CompareConfig::default(),
        &registry,
    );
    let v: serde_json::Value = serde_json::to_value(&report).unwrap();
    let obj = v.as_object().unwrap();
    for key in [
        "schema",
        "box",
        "samples",
        "seed",
        "evaluated",
        "divergent",
        "outsideDiffDomain",
        "agree",
        "fail",
        "failPoints",
        "failFraction",
    ] {
        assert!(obj.contains_key(key), "missing field {key}");
    }
    assert_eq!(obj["schema"], 1);
}

/// The three candidate traces pair up with the three regions of the
/// silly identity: which one is the actual execution slice depends on
/// the sign of the input, and its gradient matches the branch taken.
#[test]
fn silly_id_trace_region_consistency() {
    let registry = reg();
    let prog = Program::from_term(Term::app(corpus::silly_id(), Term::var("x")));
    let fwd = grad_program(&prog, AdMode::Forward, &registry).unwrap();
    let ecfg = EvalConfig::default();
    let grad_at = |r: f64| {
        fwd.value_at(&[r], Strategy::HeadDeterministic, &ecfg, &registry)
            .unwrap()
            .unwrap()[0]
    };
    // Off zero both branches compute the identity; at zero the composed
    // branches yield the constant-0 slice.
    assert_eq!(grad_at(-0.75), 1.0);
    assert_eq!(grad_at(0.75), 1.0);
    assert_eq!(grad_at(0.0), 0.0);
}
