//! Precedence-aware printer for the surface syntax; `parse(print(M))` is
//! alpha-equivalent to M (bit-identical numerals included).

use std::fmt::Write;
use std::rc::Rc;

use crate::registry::PrimSymbol;
use crate::syntax::{Term, TypeExpr};

/// Binding strengths, loosest to tightest. A node is parenthesized when
/// its own level is below what the context demands.
const TOP: u8 = 0;
const SUM: u8 = 1;
const PROD: u8 = 2;
const APP: u8 = 3;
const ATOM: u8 = 4;

pub fn print_type(ty: &TypeExpr) -> String {
    // The Display instance already emits the surface grammar.
    ty.to_string()
}

fn plain_ident(name: &str) -> bool {
    let mut cs = name.chars();
    matches!(cs.next(), Some(c) if c.is_ascii_alphabetic() || c == '_')
        && cs.all(|c| c.is_ascii_alphanumeric() || c == '_' || c == '\'')
        && !matches!(name, "if" | "then" | "else" | "fix" | "proj")
}

fn binary(out: &mut String, op: &str, l: &Term, r: &Term, level: u8, need: u8) {
    let parens = level < need;
    if parens {
        out.push('(');
    }
    go(out, l, level);
    let _ = write!(out, " {op} ");
    go(out, r, level + 1);
    if parens {
        out.push(')');
    }
}

fn go(out: &mut String, t: &Term, need: u8) {
    match t {
        Term::Var(x) => out.push_str(x),
        Term::Prim(sym, args) => {
            if let Some(r) = t.as_numeral() {
                let parens = r.is_sign_negative() && need > PROD;
                if parens {
                    out.push('(');
                }
                let _ = write!(out, "{r:?}");
                if parens {
                    out.push(')');
                }
                return;
            }
            match (sym, args.len()) {
                (PrimSymbol::Named(n), 2) if &**n == "add" => {
                    return binary(out, "+", &args[0], &args[1], SUM, need)
                }
                (PrimSymbol::Named(n), 2) if &**n == "sub" => {
                    return binary(out, "-", &args[0], &args[1], SUM, need)
                }
                (PrimSymbol::Named(n), 2) if &**n == "mul" => {
                    return binary(out, "*", &args[0], &args[1], PROD, need)
                }
                (PrimSymbol::Named(n), 1) if &**n == "neg" => {
                    let parens = need > PROD;
                    if parens {
                        out.push('(');
                    }
                    out.push('-');
                    // A bare numeral operand must keep its parentheses:
                    // -0.0 is a literal, -(0.0) is a negation.
                    if args[0].as_numeral().is_some() {
                        out.push('(');
                        go(out, &args[0], TOP);
                        out.push(')');
                    } else {
                        go(out, &args[0], ATOM);
                    }
                    if parens {
                        out.push(')');
                    }
                    return;
                }
                _ => {}
            }
            let name = sym.name();
            if plain_ident(&name) {
                out.push_str(&name);
            } else {
                let _ = write!(out, "`{name}`");
            }
            out.push('(');
            for (i, a) in args.iter().enumerate() {
                if i > 0 {
                    out.push_str(", ");
                }
                go(out, a, TOP);
            }
            out.push(')');
        }
        Term::Lam(x, ty, b) => {
            let parens = need > TOP;
            if parens {
                out.push('(');
            }
            let _ = write!(out, "\\{x}:{}. ", print_type(ty));
            go(out, b, TOP);
            if parens {
                out.push(')');
            }
        }
        Term::Fix(f, ty, b) => {
            let parens = need > TOP;
            if parens {
                out.push('(');
            }
            let _ = write!(out, "fix {f}:{}. ", print_type(ty));
            go(out, b, TOP);
            if parens {
                out.push(')');
            }
        }
        Term::Cond(p, m, n) => {
            let parens = need > TOP;
            if parens {
                out.push('(');
            }
            out.push_str("if ");
            go(out, p, SUM);
            out.push_str(" then ");
            go(out, m, SUM);
            out.push_str(" else ");
            go(out, n, TOP);
            if parens {
                out.push(')');
            }
        }
        Term::App(f, a) => {
            let parens = need > APP;
            if parens {
                out.push('(');
            }
            go(out, f, APP);
            out.push(' ');
            go(out, a, ATOM);
            if parens {
                out.push(')');
            }
        }
        Term::Tuple(ms) => {
            out.push('<');
            for (i, m) in ms.iter().enumerate() {
                if i > 0 {
                    out.push_str(", ");
                }
                go(out, m, TOP);
            }
            out.push('>');
        }
        Term::Proj(i, k, b) => {
            let parens = need > APP;
            if parens {
                out.push('(');
            }
            let _ = write!(out, "proj {i} {k} ");
            go(out, b, ATOM);
            if parens {
                out.push(')');
            }
        }
    }
}

pub fn print_term(t: &Rc<Term>) -> String {
    let mut out = String::new();
    go(&mut out, t, TOP);
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::corpus;
    use crate::parser::parse;
    use crate::registry::PrimRegistry;
    use crate::syntax::{alpha_eq, num};

    fn round_trip(t: &Rc<Term>) {
        let reg = PrimRegistry::default();
        let printed = print_term(t);
        let back = parse(&printed, &reg)
            .unwrap_or_else(|e| panic!("reparse of {printed:?} failed: {e}"))
            .term;
        assert!(
            alpha_eq(t, &back),
            "round trip drifted:\n  {printed}\n  reparsed {}",
            print_term(&back)
        );
    }

    #[test]
    fn corpus_round_trips() {
        for t in [
            corpus::relu(),
            corpus::silly_id(),
            corpus::int_fn(),
            corpus::floor(),
            corpus::crelu(0.5),
            corpus::eqproj(),
            corpus::t_driver(),
        ] {
            round_trip(&t);
        }
    }

    #[test]
    fn transformed_terms_round_trip() {
        use crate::ad::{ad_term, AdMode};
        let reg = PrimRegistry::default();
        for mode in [AdMode::Forward, AdMode::Reverse] {
            let d = ad_term(&corpus::silly_id(), mode, 2, &reg).unwrap();
            round_trip(&d);
        }
    }

    #[test]
    fn negative_literal_in_application_position() {
        let t = Term::app(corpus::relu(), num(-3.0));
        round_trip(&t);
        assert!(print_term(&t).contains("(-3.0)"));
    }

    #[test]
    fn nested_conditionals_round_trip() {
        let t = Term::cond(
            num(0.5),
            Term::cond(num(-1.0), num(1.0), num(2.0)),
            Term::cond(num(1.0), num(3.0), num(4.0)),
        );
        round_trip(&t);
    }

    #[test]
    fn subtraction_of_negative_literal() {
        let t = Term::sub(Term::var("x"), num(-1.0));
        let s = print_term(&t);
        assert!(!s.contains("--"), "printed {s:?}");
        round_trip(&t);
    }
}
