//! The worked examples used throughout the test suite and shipped with the
//! CLI: ReLU, the silly identity, the integer test, floor, CRelu, the
//! equality-projection and the higher-order driver T.

use std::rc::Rc;

use crate::syntax::{num, Term, TypeExpr};

/// `\x:R. if x then 0 else x`
pub fn relu() -> Rc<Term> {
    Term::lam(
        "x",
        TypeExpr::Real,
        Term::cond(Term::var("x"), num(0.0), Term::var("x")),
    )
}

/// `\x:R. if x then (if -x then 0 else x) else x` — pointwise the
/// identity, but AD yields 0 at the origin.
pub fn silly_id() -> Rc<Term> {
    Term::lam(
        "x",
        TypeExpr::Real,
        Term::cond(
            Term::var("x"),
            Term::cond(Term::neg(Term::var("x")), num(0.0), Term::var("x")),
            Term::var("x"),
        ),
    )
}

/// `Int x y`: nonpositive exactly when y <= x < y + 1.
pub fn int_fn() -> Rc<Term> {
    let ymx = Term::sub(Term::var("y"), Term::var("x"));
    Term::lam(
        "x",
        TypeExpr::Real,
        Term::lam(
            "y",
            TypeExpr::Real,
            Term::cond(
                ymx.clone(),
                Term::cond(Term::add(ymx, num(1.0)), num(1.0), num(0.0)),
                num(1.0),
            ),
        ),
    )
}

/// Floor by unbounded search from 0, stepping toward x.
pub fn floor() -> Rc<Term> {
    let rr = TypeExpr::arrow(TypeExpr::Real, TypeExpr::Real);
    let guard = Term::apps(int_fn(), [Term::var("x"), Term::var("n")]);
    let step = Term::cond(
        Term::var("x"),
        Term::sub(Term::var("n"), num(1.0)),
        Term::add(Term::var("n"), num(1.0)),
    );
    let body = Term::lam(
        "n",
        TypeExpr::Real,
        Term::cond(guard, Term::var("n"), Term::app(Term::var("f"), step)),
    );
    Term::lam(
        "x",
        TypeExpr::Real,
        Term::app(Term::fix("f", rr, body), num(0.0)),
    )
}

/// `\x:R. if x then (if -x then q*x else 0) else x` — extensionally the
/// identity for any q, but AD reports slope q at the origin.
pub fn crelu(q: f64) -> Rc<Term> {
    Term::lam(
        "x",
        TypeExpr::Real,
        Term::cond(
            Term::var("x"),
            Term::cond(
                Term::neg(Term::var("x")),
                Term::mul(num(q), Term::var("x")),
                num(0.0),
            ),
            Term::var("x"),
        ),
    )
}

/// `\x:R. \y:R. if x - y then (if y - x then x else y) else y` — x on the
/// diagonal, y elsewhere.
pub fn eqproj() -> Rc<Term> {
    Term::lam(
        "x",
        TypeExpr::Real,
        Term::lam(
            "y",
            TypeExpr::Real,
            Term::cond(
                Term::sub(Term::var("x"), Term::var("y")),
                Term::cond(
                    Term::sub(Term::var("y"), Term::var("x")),
                    Term::var("x"),
                    Term::var("y"),
                ),
                Term::var("y"),
            ),
        ),
    )
}

/// `\f:R->R. f (f 0 + 1)`
pub fn t_driver() -> Rc<Term> {
    Term::lam(
        "f",
        TypeExpr::arrow(TypeExpr::Real, TypeExpr::Real),
        Term::app(
            Term::var("f"),
            Term::add(Term::app(Term::var("f"), num(0.0)), num(1.0)),
        ),
    )
}

/// A shipped surface-syntax example.
pub struct CorpusEntry {
    pub name: &'static str,
    pub source: &'static str,
}

/// The corpus files embedded into the binary (also present under corpus/).
pub fn entries() -> Vec<CorpusEntry> {
    vec![
        CorpusEntry {
            name: "relu",
            source: include_str!("../../../corpus/relu.pcfr"),
        },
        CorpusEntry {
            name: "sillyid",
            source: include_str!("../../../corpus/sillyid.pcfr"),
        },
        CorpusEntry {
            name: "int",
            source: include_str!("../../../corpus/int.pcfr"),
        },
        CorpusEntry {
            name: "floor",
            source: include_str!("../../../corpus/floor.pcfr"),
        },
        CorpusEntry {
            name: "crelu",
            source: include_str!("../../../corpus/crelu.pcfr"),
        },
        CorpusEntry {
            name: "eqproj",
            source: include_str!("../../../corpus/eqproj.pcfr"),
        },
        CorpusEntry {
            name: "tdriver",
            source: include_str!("../../../corpus/tdriver.pcfr"),
        },
    ]
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::registry::PrimRegistry;
    use crate::typecheck::{infer, TypingEnv};

    #[test]
    fn corpus_terms_typecheck() {
        let reg = PrimRegistry::default();
        let rr = TypeExpr::arrow(TypeExpr::Real, TypeExpr::Real);
        let rrr = TypeExpr::arrow(TypeExpr::Real, rr.clone());
        let cases: Vec<(Rc<Term>, TypeExpr)> = vec![
            (relu(), rr.clone()),
            (silly_id(), rr.clone()),
            (int_fn(), rrr.clone()),
            (floor(), rr.clone()),
            (crelu(0.5), rr.clone()),
            (eqproj(), rrr),
            (t_driver(), TypeExpr::arrow(rr, TypeExpr::Real)),
        ];
        for (t, want) in cases {
            assert_eq!(infer(&TypingEnv::new(), &t, &reg).unwrap(), want);
        }
    }
}
