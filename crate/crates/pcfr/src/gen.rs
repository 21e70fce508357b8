//! Seeded random generators: simple ground programs for the soundness and
//! termination properties, programs with conditionals for strategy
//! agreement, and unconstrained well-formed terms for printer round-trips.
//!
//! Generated variable pools avoid registered primitive names so that
//! printed applications like `f (x)` never reparse as primitive calls.

use std::rc::Rc;

use rand::Rng;

use crate::registry::PrimSymbol;
use crate::syntax::{num, Term, TypeExpr};
use crate::typecheck::Program;

#[derive(Debug, Clone)]
pub struct GenConfig {
    pub max_depth: usize,
    pub arity: usize,
}

impl Default for GenConfig {
    fn default() -> Self {
        GenConfig {
            max_depth: 6,
            arity: 2,
        }
    }
}

fn var_name(i: usize) -> String {
    format!("x{}", i + 1)
}

fn arg_vars(arity: usize) -> Vec<String> {
    (0..arity).map(var_name).collect()
}

fn constant(rng: &mut impl Rng) -> Rc<Term> {
    // Halves in [-2, 2]: varied but exactly representable.
    num((rng.gen_range(-4i32..=4) as f64) * 0.5)
}

fn simple_expr(rng: &mut impl Rng, depth: usize, arity: usize) -> Rc<Term> {
    if depth == 0 || rng.gen_bool(0.3) {
        return if arity > 0 && rng.gen_bool(0.6) {
            Term::var(&var_name(rng.gen_range(0..arity)))
        } else {
            constant(rng)
        };
    }
    let l = simple_expr(rng, depth - 1, arity);
    let r = simple_expr(rng, depth - 1, arity);
    if rng.gen_bool(0.5) {
        Term::add(l, r)
    } else {
        Term::mul(l, r)
    }
}

/// A random simple program (no conditionals, no fixpoints) over the
/// primitives {constants, +, *}; always well-typed with coarity 1.
pub fn gen_simple_program(rng: &mut impl Rng, cfg: &GenConfig) -> Program {
    Program::new(
        simple_expr(rng, cfg.max_depth, cfg.arity),
        arg_vars(cfg.arity),
    )
}

fn branching_expr(rng: &mut impl Rng, depth: usize, arity: usize) -> Rc<Term> {
    if depth > 0 && rng.gen_bool(0.25) {
        return Term::cond(
            simple_expr(rng, depth - 1, arity),
            branching_expr(rng, depth - 1, arity),
            branching_expr(rng, depth - 1, arity),
        );
    }
    simple_expr(rng, depth, arity)
}

/// A random program that may branch on affine-ish guards; still total.
pub fn gen_branching_program(rng: &mut impl Rng, cfg: &GenConfig) -> Program {
    Program::new(
        branching_expr(rng, cfg.max_depth, cfg.arity),
        arg_vars(cfg.arity),
    )
}

fn rand_type(rng: &mut impl Rng, depth: usize) -> TypeExpr {
    if depth == 0 || rng.gen_bool(0.5) {
        return TypeExpr::Real;
    }
    match rng.gen_range(0..3) {
        0 => TypeExpr::arrow(rand_type(rng, depth - 1), rand_type(rng, depth - 1)),
        1 => TypeExpr::product(vec![
            rand_type(rng, depth - 1),
            rand_type(rng, depth - 1),
        ]),
        _ => TypeExpr::product(vec![]),
    }
}

const POOL: [&str; 6] = ["x", "y", "z", "f", "g", "w"];

fn rand_var(rng: &mut impl Rng) -> String {
    POOL[rng.gen_range(0..POOL.len())].to_string()
}

/// An arbitrary well-formed term (not necessarily well-typed) exercising
/// every constructor, for printer/parser round-trips.
pub fn gen_roundtrip_term(rng: &mut impl Rng, depth: usize) -> Rc<Term> {
    if depth == 0 {
        return match rng.gen_range(0..3) {
            0 => Term::var(&rand_var(rng)),
            1 => constant(rng),
            _ => num(-1.5e-3),
        };
    }
    let sub = |rng: &mut _| gen_roundtrip_term(rng, depth - 1);
    match rng.gen_range(0..10) {
        0 => Term::lam(&rand_var(rng), rand_type(rng, 2), sub(rng)),
        1 => Term::fix(
            &rand_var(rng),
            TypeExpr::arrow(rand_type(rng, 1), rand_type(rng, 1)),
            sub(rng),
        ),
        2 => Term::app(sub(rng), sub(rng)),
        3 => Rc::new(Term::Tuple(vec![sub(rng), sub(rng)])),
        4 => Rc::new(Term::Tuple(vec![sub(rng), sub(rng), sub(rng)])),
        5 => {
            let k = rng.gen_range(2..=3);
            let i = rng.gen_range(1..=k);
            Rc::new(Term::Proj(i, k, sub(rng)))
        }
        6 => Term::cond(sub(rng), sub(rng), sub(rng)),
        7 => Term::prim(
            PrimSymbol::named(["sin", "cos", "exp", "log", "neg"][rng.gen_range(0..5)]),
            vec![sub(rng)],
        ),
        8 => Term::prim(
            PrimSymbol::named(["add", "sub", "mul", "div", "mono2:2.5:1:0"][rng.gen_range(0..5)]),
            vec![sub(rng), sub(rng)],
        ),
        _ => Term::sub(sub(rng), sub(rng)),
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    use crate::registry::PrimRegistry;
    use crate::typecheck::{check_program, is_simple};

    #[test]
    fn simple_programs_are_simple_and_typed() {
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let reg = PrimRegistry::default();
        for _ in 0..200 {
            let p = gen_simple_program(&mut rng, &GenConfig::default());
            assert!(is_simple(&p.term));
            assert!(check_program(&p, 1, &reg));
        }
    }

    #[test]
    fn branching_programs_typecheck() {
        let mut rng = ChaCha8Rng::seed_from_u64(2);
        let reg = PrimRegistry::default();
        for _ in 0..200 {
            let p = gen_branching_program(&mut rng, &GenConfig::default());
            assert!(check_program(&p, 1, &reg));
        }
    }
}
