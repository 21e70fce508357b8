//! Typing rules for PCF_R and the program/simple-term recognizers.
//!
//! Types are checked structurally; binders are explicitly annotated so no
//! inference is needed. Addition is the one symbol lifted to act
//! componentwise on products of reals: the reverse-mode transformation sums
//! backpropagator outputs of type R^n, and `add` at R^n keeps that sum a
//! single syntax node regardless of n.

use std::fmt;
use std::rc::Rc;

use crate::parser::{Span, SpanTable};
use crate::registry::{PrimRegistry, PrimSymbol};
use crate::syntax::{free_vars, Term, TypeExpr};

/// A program of arity n: a term typed `x_1:R, ..., x_n:R |- M : R^m`
/// together with the ordered argument variables.
#[derive(Debug, Clone)]
pub struct Program {
    pub term: Rc<Term>,
    pub vars: Vec<String>,
}

impl Program {
    pub fn new(term: Rc<Term>, vars: Vec<String>) -> Program {
        Program { term, vars }
    }

    /// Builds a program whose arguments are the free variables of the term
    /// in order of first occurrence.
    pub fn from_term(term: Rc<Term>) -> Program {
        let vars = free_vars(&term);
        Program { term, vars }
    }

    pub fn arity(&self) -> usize {
        self.vars.len()
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum TypeErrorKind {
    UnboundVariable(String),
    UnknownPrimitive(String),
    ArityMismatch { symbol: String, expected: usize, got: usize },
    PrimArgNotReal { symbol: String, got: TypeExpr },
    NonArrowApplication(TypeExpr),
    ArgumentTypeMismatch { expected: TypeExpr, got: TypeExpr },
    ProjOnNonProduct { index: usize, width: usize, got: TypeExpr },
    BranchTypeMismatch { then_ty: TypeExpr, else_ty: TypeExpr },
    GuardNotReal(TypeExpr),
    FixNotArrow(TypeExpr),
    FixBodyMismatch { expected: TypeExpr, got: TypeExpr },
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct TypeError {
    pub kind: TypeErrorKind,
    /// Source location of the offending subterm, when known from the parser.
    pub span: Option<Span>,
}

impl fmt::Display for TypeError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        use TypeErrorKind::*;
        if let Some(s) = self.span {
            write!(f, "{}:{}: ", s.line, s.col)?;
        }
        match &self.kind {
            UnboundVariable(x) => write!(f, "unbound variable {x}"),
            UnknownPrimitive(p) => write!(f, "unknown primitive {p}"),
            ArityMismatch { symbol, expected, got } => {
                write!(f, "{symbol} expects {expected} arguments, got {got}")
            }
            PrimArgNotReal { symbol, got } => {
                write!(f, "argument of {symbol} must be R, got {got}")
            }
            NonArrowApplication(t) => write!(f, "cannot apply a term of type {t}"),
            ArgumentTypeMismatch { expected, got } => {
                write!(f, "argument has type {got}, expected {expected}")
            }
            ProjOnNonProduct { index, width, got } => {
                write!(f, "projection {index}/{width} on a term of type {got}")
            }
            BranchTypeMismatch { then_ty, else_ty } => {
                write!(f, "branches have types {then_ty} and {else_ty}")
            }
            GuardNotReal(t) => write!(f, "conditional guard has type {t}, expected R"),
            FixNotArrow(t) => write!(f, "fixpoint at non-arrow type {t}"),
            FixBodyMismatch { expected, got } => {
                write!(f, "fix body has type {got}, expected {expected}")
            }
        }
    }
}

impl std::error::Error for TypeError {}

/// Ordered typing environment; shadowing resolves innermost-first.
#[derive(Debug, Clone, Default)]
pub struct TypingEnv {
    bindings: Vec<(String, TypeExpr)>,
}

impl TypingEnv {
    pub fn new() -> TypingEnv {
        TypingEnv::default()
    }

    /// The ground environment `x_1:R, ..., x_n:R`.
    pub fn ground(vars: &[String]) -> TypingEnv {
        TypingEnv {
            bindings: vars
                .iter()
                .map(|v| (v.clone(), TypeExpr::Real))
                .collect(),
        }
    }

    pub fn bind(&mut self, x: &str, ty: TypeExpr) {
        self.bindings.push((x.to_string(), ty));
    }

    pub fn unbind(&mut self) {
        self.bindings.pop();
    }

    pub fn lookup(&self, x: &str) -> Option<&TypeExpr> {
        self.bindings.iter().rev().find(|(y, _)| y == x).map(|(_, t)| t)
    }
}

fn is_real_vector(ty: &TypeExpr) -> bool {
    match ty {
        TypeExpr::Real => true,
        TypeExpr::Product(vs) => vs.iter().all(|v| *v == TypeExpr::Real),
        TypeExpr::Arrow(_, _) => false,
    }
}

fn err(kind: TypeErrorKind, t: &Rc<Term>, spans: Option<&SpanTable>) -> TypeError {
    TypeError {
        kind,
        span: spans.and_then(|s| s.get(t)),
    }
}

fn infer_rec(
    env: &mut TypingEnv,
    t: &Rc<Term>,
    reg: &PrimRegistry,
    spans: Option<&SpanTable>,
) -> Result<TypeExpr, TypeError> {
    match &**t {
        Term::Var(x) => env
            .lookup(x)
            .cloned()
            .ok_or_else(|| err(TypeErrorKind::UnboundVariable(x.clone()), t, spans)),
        Term::Prim(sym, args) => {
            let entry = reg
                .lookup(sym)
                .ok_or_else(|| err(TypeErrorKind::UnknownPrimitive(sym.name()), t, spans))?;
            if args.len() != entry.arity {
                return Err(err(
                    TypeErrorKind::ArityMismatch {
                        symbol: sym.name(),
                        expected: entry.arity,
                        got: args.len(),
                    },
                    t,
                    spans,
                ));
            }
            let arg_tys = args
                .iter()
                .map(|a| infer_rec(env, a, reg, spans))
                .collect::<Result<Vec<_>, _>>()?;
            // Componentwise addition at R^n.
            if matches!(sym, PrimSymbol::Named(n) if &**n == "add")
                && arg_tys[0] == arg_tys[1]
                && is_real_vector(&arg_tys[0])
            {
                return Ok(arg_tys[0].clone());
            }
            for ty in &arg_tys {
                if *ty != TypeExpr::Real {
                    return Err(err(
                        TypeErrorKind::PrimArgNotReal {
                            symbol: sym.name(),
                            got: ty.clone(),
                        },
                        t,
                        spans,
                    ));
                }
            }
            Ok(TypeExpr::Real)
        }
        Term::Lam(x, ty, body) => {
            env.bind(x, ty.clone());
            let b = infer_rec(env, body, reg, spans);
            env.unbind();
            Ok(TypeExpr::arrow(ty.clone(), b?))
        }
        Term::App(f, a) => {
            let tf = infer_rec(env, f, reg, spans)?;
            let ta = infer_rec(env, a, reg, spans)?;
            match tf {
                TypeExpr::Arrow(dom, cod) => {
                    if *dom == ta {
                        Ok(*cod)
                    } else {
                        Err(err(
                            TypeErrorKind::ArgumentTypeMismatch {
                                expected: *dom,
                                got: ta,
                            },
                            t,
                            spans,
                        ))
                    }
                }
                other => Err(err(TypeErrorKind::NonArrowApplication(other), t, spans)),
            }
        }
        Term::Tuple(ms) => {
            let tys = ms
                .iter()
                .map(|m| infer_rec(env, m, reg, spans))
                .collect::<Result<Vec<_>, _>>()?;
            Ok(TypeExpr::product(tys))
        }
        Term::Proj(i, k, body) => {
            let tb = infer_rec(env, body, reg, spans)?;
            match &tb {
                TypeExpr::Product(vs) if vs.len() == *k && *i >= 1 && *i <= *k => {
                    Ok(vs[*i - 1].clone())
                }
                _ => Err(err(
                    TypeErrorKind::ProjOnNonProduct {
                        index: *i,
                        width: *k,
                        got: tb,
                    },
                    t,
                    spans,
                )),
            }
        }
        Term::Cond(p, m, n) => {
            let tp = infer_rec(env, p, reg, spans)?;
            if tp != TypeExpr::Real {
                return Err(err(TypeErrorKind::GuardNotReal(tp), t, spans));
            }
            let tm = infer_rec(env, m, reg, spans)?;
            let tn = infer_rec(env, n, reg, spans)?;
            if tm != tn {
                return Err(err(
                    TypeErrorKind::BranchTypeMismatch {
                        then_ty: tm,
                        else_ty: tn,
                    },
                    t,
                    spans,
                ));
            }
            Ok(tm)
        }
        Term::Fix(f, ty, body) => {
            if !ty.is_arrow() {
                return Err(err(TypeErrorKind::FixNotArrow(ty.clone()), t, spans));
            }
            env.bind(f, ty.clone());
            let tb = infer_rec(env, body, reg, spans);
            env.unbind();
            let tb = tb?;
            if tb != *ty {
                return Err(err(
                    TypeErrorKind::FixBodyMismatch {
                        expected: ty.clone(),
                        got: tb,
                    },
                    t,
                    spans,
                ));
            }
            Ok(ty.clone())
        }
    }
}

/// Infers the unique type of `t` under `env`.
pub fn infer(
    env: &TypingEnv,
    t: &Rc<Term>,
    reg: &PrimRegistry,
) -> Result<TypeExpr, TypeError> {
    infer_rec(&mut env.clone(), t, reg, None)
}

/// Like [`infer`] but attaches source spans from the parser to errors.
pub fn infer_with_spans(
    env: &TypingEnv,
    t: &Rc<Term>,
    reg: &PrimRegistry,
    spans: &SpanTable,
) -> Result<TypeExpr, TypeError> {
    infer_rec(&mut env.clone(), t, reg, Some(spans))
}

/// True iff `x_1:R,...,x_n:R |- M : R^m` (with `R^1 = R`).
pub fn check_program(prog: &Program, coarity: usize, reg: &PrimRegistry) -> bool {
    infer(&TypingEnv::ground(&prog.vars), &prog.term, reg)
        .map(|ty| ty == TypeExpr::reals(coarity))
        .unwrap_or(false)
}

/// The coarity m such that the program types as `R^m`, if any.
pub fn program_coarity(prog: &Program, reg: &PrimRegistry) -> Option<usize> {
    match infer(&TypingEnv::ground(&prog.vars), &prog.term, reg).ok()? {
        TypeExpr::Real => Some(1),
        TypeExpr::Product(vs) if vs.iter().all(|v| *v == TypeExpr::Real) => Some(vs.len()),
        _ => None,
    }
}

/// A term is simple when it contains no conditional and no fixpoint.
pub fn is_simple(t: &Term) -> bool {
    match t {
        Term::Cond(_, _, _) | Term::Fix(_, _, _) => false,
        Term::Var(_) => true,
        Term::Prim(_, args) => args.iter().all(|a| is_simple(a)),
        Term::Lam(_, _, b) | Term::Proj(_, _, b) => is_simple(b),
        Term::App(f, a) => is_simple(f) && is_simple(a),
        Term::Tuple(ms) => ms.iter().all(|m| is_simple(m)),
    }
}
