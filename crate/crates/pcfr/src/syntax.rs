//! Abstract syntax of PCF_R: types, terms, substitution and the small
//! syntactic builders (injections, fixpoint approximants, term size).
//!
//! Unary products are identified with their single component, so the
//! constructors [`TypeExpr::product`] and [`Term::tuple`]/[`Term::proj`]
//! collapse the width-1 case at construction time.

use std::fmt;
use std::rc::Rc;

use crate::registry::PrimSymbol;

/// Types of PCF_R: the ground type of reals, arrows and finite products.
/// `Product(vec![])` is the unit type `1`; `Product` never has exactly one
/// component (use [`TypeExpr::product`]).
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub enum TypeExpr {
    Real,
    Arrow(Box<TypeExpr>, Box<TypeExpr>),
    Product(Vec<TypeExpr>),
}

impl TypeExpr {
    pub fn arrow(dom: TypeExpr, cod: TypeExpr) -> TypeExpr {
        TypeExpr::Arrow(Box::new(dom), Box::new(cod))
    }

    /// Product constructor with the unary collapse.
    pub fn product(mut comps: Vec<TypeExpr>) -> TypeExpr {
        if comps.len() == 1 {
            comps.pop().unwrap()
        } else {
            TypeExpr::Product(comps)
        }
    }

    /// R^n, with R^1 = R and R^0 = 1.
    pub fn reals(n: usize) -> TypeExpr {
        TypeExpr::product(vec![TypeExpr::Real; n])
    }

    pub fn is_arrow(&self) -> bool {
        matches!(self, TypeExpr::Arrow(_, _))
    }

    /// Width as a product: R counts as width 1.
    pub fn product_width(&self) -> Option<usize> {
        match self {
            TypeExpr::Product(vs) => Some(vs.len()),
            TypeExpr::Real => Some(1),
            TypeExpr::Arrow(_, _) => None,
        }
    }
}

impl fmt::Display for TypeExpr {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            TypeExpr::Real => write!(f, "R"),
            TypeExpr::Arrow(a, b) => {
                match **a {
                    TypeExpr::Arrow(_, _) => write!(f, "({}) -> {}", a, b),
                    _ => write!(f, "{} -> {}", a, b),
                }
            }
            TypeExpr::Product(vs) if vs.is_empty() => write!(f, "1"),
            TypeExpr::Product(vs) => {
                write!(f, "(")?;
                for (i, v) in vs.iter().enumerate() {
                    if i > 0 {
                        write!(f, " * ")?;
                    }
                    write!(f, "{}", v)?;
                }
                write!(f, ")")
            }
        }
    }
}

/// Terms of PCF_R. Numerals are nullary primitive applications
/// ([`PrimSymbol::Lit`]). `Proj(i, k, body)` is the 1-based projection
/// `pi_i^k`; `Cond(p, m, n)` encodes `if p <= 0 then m else n`.
#[derive(Debug, Clone, PartialEq)]
pub enum Term {
    Var(String),
    Prim(PrimSymbol, Vec<Rc<Term>>),
    Lam(String, TypeExpr, Rc<Term>),
    App(Rc<Term>, Rc<Term>),
    Tuple(Vec<Rc<Term>>),
    Proj(usize, usize, Rc<Term>),
    Cond(Rc<Term>, Rc<Term>, Rc<Term>),
    Fix(String, TypeExpr, Rc<Term>),
}

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
pub enum SyntaxError {
    #[error("numeral must be finite, got {0}")]
    NonFiniteNumeral(String),
    #[error("injection index {i} out of range 1..={n}")]
    IndexOutOfRange { i: usize, n: usize },
    #[error("fixpoints exist only at arrow types, got {0}")]
    NonArrowFixType(String),
}

impl Term {
    pub fn var(name: &str) -> Rc<Term> {
        Rc::new(Term::Var(name.to_string()))
    }

    pub fn lam(x: &str, ty: TypeExpr, body: Rc<Term>) -> Rc<Term> {
        Rc::new(Term::Lam(x.to_string(), ty, body))
    }

    pub fn app(f: Rc<Term>, a: Rc<Term>) -> Rc<Term> {
        Rc::new(Term::App(f, a))
    }

    /// Apply to several arguments, left associated.
    pub fn apps(f: Rc<Term>, args: impl IntoIterator<Item = Rc<Term>>) -> Rc<Term> {
        args.into_iter().fold(f, Term::app)
    }

    /// Tuple constructor with the unary collapse `<M> = M`.
    pub fn tuple(mut comps: Vec<Rc<Term>>) -> Rc<Term> {
        if comps.len() == 1 {
            comps.pop().unwrap()
        } else {
            Rc::new(Term::Tuple(comps))
        }
    }

    /// Projection constructor with the unary collapse `pi_1^1 M = M`.
    /// `i` is 1-based and must satisfy `1 <= i <= k`.
    pub fn proj(i: usize, k: usize, body: Rc<Term>) -> Rc<Term> {
        assert!(i >= 1 && i <= k, "projection index {i} out of width {k}");
        if k == 1 {
            body
        } else {
            Rc::new(Term::Proj(i, k, body))
        }
    }

    pub fn cond(guard: Rc<Term>, then_b: Rc<Term>, else_b: Rc<Term>) -> Rc<Term> {
        Rc::new(Term::Cond(guard, then_b, else_b))
    }

    pub fn fix(f: &str, ty: TypeExpr, body: Rc<Term>) -> Rc<Term> {
        Rc::new(Term::Fix(f.to_string(), ty, body))
    }

    pub fn prim(sym: PrimSymbol, args: Vec<Rc<Term>>) -> Rc<Term> {
        Rc::new(Term::Prim(sym, args))
    }

    pub fn add(a: Rc<Term>, b: Rc<Term>) -> Rc<Term> {
        Term::prim(PrimSymbol::named("add"), vec![a, b])
    }

    pub fn sub(a: Rc<Term>, b: Rc<Term>) -> Rc<Term> {
        Term::prim(PrimSymbol::named("sub"), vec![a, b])
    }

    pub fn mul(a: Rc<Term>, b: Rc<Term>) -> Rc<Term> {
        Term::prim(PrimSymbol::named("mul"), vec![a, b])
    }

    pub fn neg(a: Rc<Term>) -> Rc<Term> {
        Term::prim(PrimSymbol::named("neg"), vec![a])
    }

    pub fn as_numeral(&self) -> Option<f64> {
        match self {
            Term::Prim(PrimSymbol::Lit(bits), args) if args.is_empty() => {
                Some(f64::from_bits(*bits))
            }
            _ => None,
        }
    }

    pub fn is_numeral(&self) -> bool {
        self.as_numeral().is_some()
    }
}

/// Numeral constructor; rejects NaN and infinities.
pub fn mk_numeral(r: f64) -> Result<Rc<Term>, SyntaxError> {
    if !r.is_finite() {
        return Err(SyntaxError::NonFiniteNumeral(r.to_string()));
    }
    Ok(Rc::new(Term::Prim(PrimSymbol::Lit(r.to_bits()), vec![])))
}

/// Numeral constructor for values known to be finite.
pub fn num(r: f64) -> Rc<Term> {
    mk_numeral(r).expect("finite numeral")
}

/// n-ary sum sugar: left-nested binary additions. The empty sum is the
/// numeral 0.
pub fn sum(terms: Vec<Rc<Term>>) -> Rc<Term> {
    let mut it = terms.into_iter();
    match it.next() {
        None => num(0.0),
        Some(first) => it.fold(first, Term::add),
    }
}

/// Free variables of a term, in order of first occurrence.
pub fn free_vars(term: &Term) -> Vec<String> {
    fn go(t: &Term, bound: &mut Vec<String>, acc: &mut Vec<String>) {
        match t {
            Term::Var(x) => {
                if !bound.iter().any(|b| b == x) && !acc.iter().any(|a| a == x) {
                    acc.push(x.clone());
                }
            }
            Term::Prim(_, args) => args.iter().for_each(|a| go(a, bound, acc)),
            Term::Lam(x, _, b) | Term::Fix(x, _, b) => {
                bound.push(x.clone());
                go(b, bound, acc);
                bound.pop();
            }
            Term::App(f, a) => {
                go(f, bound, acc);
                go(a, bound, acc);
            }
            Term::Tuple(ms) => ms.iter().for_each(|m| go(m, bound, acc)),
            Term::Proj(_, _, b) => go(b, bound, acc),
            Term::Cond(p, m, n) => {
                go(p, bound, acc);
                go(m, bound, acc);
                go(n, bound, acc);
            }
        }
    }
    let mut acc = Vec::new();
    go(term, &mut Vec::new(), &mut acc);
    acc
}

fn occurs_free(t: &Term, x: &str) -> bool {
    match t {
        Term::Var(y) => y == x,
        Term::Prim(_, args) => args.iter().any(|a| occurs_free(a, x)),
        Term::Lam(y, _, b) | Term::Fix(y, _, b) => y != x && occurs_free(b, x),
        Term::App(f, a) => occurs_free(f, x) || occurs_free(a, x),
        Term::Tuple(ms) => ms.iter().any(|m| occurs_free(m, x)),
        Term::Proj(_, _, b) => occurs_free(b, x),
        Term::Cond(p, m, n) => {
            occurs_free(p, x) || occurs_free(m, x) || occurs_free(n, x)
        }
    }
}

/// Picks a name based on `base` that is free in none of `avoid`.
pub fn fresh_name(base: &str, avoid: &[&Term]) -> String {
    let stem: &str = base.trim_end_matches(|c: char| c.is_ascii_digit() || c == '\'');
    let stem = if stem.is_empty() { "x" } else { stem };
    let mut k = 0usize;
    loop {
        let cand = if k == 0 {
            format!("{stem}'")
        } else {
            format!("{stem}'{k}")
        };
        if !avoid.iter().any(|t| occurs_free(t, &cand)) {
            return cand;
        }
        k += 1;
    }
}

/// Capture-free substitution `M[N/x]`. Binders shadowing `x` are left
/// untouched; binders that would capture a free variable of `N` are renamed.
pub fn subst(m: &Rc<Term>, x: &str, n: &Rc<Term>) -> Rc<Term> {
    match &**m {
        Term::Var(y) => {
            if y == x {
                n.clone()
            } else {
                m.clone()
            }
        }
        Term::Prim(sym, args) => {
            if args.is_empty() {
                return m.clone();
            }
            Term::prim(sym.clone(), args.iter().map(|a| subst(a, x, n)).collect())
        }
        Term::Lam(y, ty, b) => {
            if y == x || !occurs_free(b, x) {
                m.clone()
            } else if occurs_free(n, y) {
                let y2 = fresh_name(y, &[&**n, &**b]);
                let b2 = subst(b, y, &Term::var(&y2));
                Term::lam(&y2, ty.clone(), subst(&b2, x, n))
            } else {
                Term::lam(y, ty.clone(), subst(b, x, n))
            }
        }
        Term::Fix(y, ty, b) => {
            if y == x || !occurs_free(b, x) {
                m.clone()
            } else if occurs_free(n, y) {
                let y2 = fresh_name(y, &[&**n, &**b]);
                let b2 = subst(b, y, &Term::var(&y2));
                Term::fix(&y2, ty.clone(), subst(&b2, x, n))
            } else {
                Term::fix(y, ty.clone(), subst(b, x, n))
            }
        }
        Term::App(f, a) => Term::app(subst(f, x, n), subst(a, x, n)),
        Term::Tuple(ms) => Rc::new(Term::Tuple(
            ms.iter().map(|t| subst(t, x, n)).collect(),
        )),
        Term::Proj(i, k, b) => Rc::new(Term::Proj(*i, *k, subst(b, x, n))),
        Term::Cond(p, t, e) => {
            Term::cond(subst(p, x, n), subst(t, x, n), subst(e, x, n))
        }
    }
}

/// Alpha-equivalence.
pub fn alpha_eq(a: &Term, b: &Term) -> bool {
    fn go(a: &Term, b: &Term, env: &mut Vec<(String, String)>) -> bool {
        match (a, b) {
            (Term::Var(x), Term::Var(y)) => {
                for (bx, by) in env.iter().rev() {
                    if bx == x || by == y {
                        return bx == x && by == y;
                    }
                }
                x == y
            }
            (Term::Prim(s1, a1), Term::Prim(s2, a2)) => {
                s1 == s2
                    && a1.len() == a2.len()
                    && a1.iter().zip(a2).all(|(u, v)| go(u, v, env))
            }
            (Term::Lam(x, tx, bx), Term::Lam(y, ty, by))
            | (Term::Fix(x, tx, bx), Term::Fix(y, ty, by)) => {
                if std::mem::discriminant(a) != std::mem::discriminant(b) {
                    return false;
                }
                if tx != ty {
                    return false;
                }
                env.push((x.clone(), y.clone()));
                let r = go(bx, by, env);
                env.pop();
                r
            }
            (Term::App(f1, a1), Term::App(f2, a2)) => {
                go(f1, f2, env) && go(a1, a2, env)
            }
            (Term::Tuple(m1), Term::Tuple(m2)) => {
                m1.len() == m2.len() && m1.iter().zip(m2).all(|(u, v)| go(u, v, env))
            }
            (Term::Proj(i1, k1, b1), Term::Proj(i2, k2, b2)) => {
                i1 == i2 && k1 == k2 && go(b1, b2, env)
            }
            (Term::Cond(p1, m1, n1), Term::Cond(p2, m2, n2)) => {
                go(p1, p2, env) && go(m1, m2, env) && go(n1, n2, env)
            }
            _ => false,
        }
    }
    go(a, b, &mut Vec::new())
}

/// The injection `iota_i^n = \x:R. <0,...,x,...,0>` with `x` in position `i`.
pub fn iota(i: usize, n: usize) -> Result<Rc<Term>, SyntaxError> {
    if i < 1 || i > n {
        return Err(SyntaxError::IndexOutOfRange { i, n });
    }
    let comps = (1..=n)
        .map(|j| if j == i { Term::var("x") } else { num(0.0) })
        .collect();
    Ok(Term::lam("x", TypeExpr::Real, Term::tuple(comps)))
}

/// `Omega_ty = fix g. g`, the canonical divergent term at arrow type `ty`.
pub fn omega(ty: &TypeExpr) -> Rc<Term> {
    Term::fix("_omega", ty.clone(), Term::var("_omega"))
}

/// Fixpoint approximant depth; `Infinite` is the fixpoint itself.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum FixDepth {
    Finite(usize),
    Infinite,
}

/// Fixpoint approximants:
/// depth 0 is `Omega`, depth k+1 is `(\f.M)(\x.(fix_k f M) x)`, and
/// `Infinite` is `fix f. M`.
pub fn fix_approx(
    f: &str,
    ty: &TypeExpr,
    body: &Rc<Term>,
    depth: FixDepth,
) -> Result<Rc<Term>, SyntaxError> {
    let (dom, _) = match ty {
        TypeExpr::Arrow(a, b) => (a, b),
        other => return Err(SyntaxError::NonArrowFixType(other.to_string())),
    };
    match depth {
        FixDepth::Infinite => Ok(Term::fix(f, ty.clone(), body.clone())),
        FixDepth::Finite(0) => Ok(omega(ty)),
        FixDepth::Finite(k) => {
            let inner = fix_approx(f, ty, body, FixDepth::Finite(k - 1))?;
            let x = fresh_name("x", &[&**body]);
            let eta = Term::lam(
                &x,
                (**dom).clone(),
                Term::app(inner, Term::var(&x)),
            );
            Ok(Term::app(
                Term::lam(f, ty.clone(), body.clone()),
                eta,
            ))
        }
    }
}

/// Node count of the abstract syntax tree. Every constructor counts one,
/// numerals included; type annotations do not contribute.
pub fn term_size(t: &Term) -> usize {
    match t {
        Term::Var(_) => 1,
        Term::Prim(_, args) => 1 + args.iter().map(|a| term_size(a)).sum::<usize>(),
        Term::Lam(_, _, b) | Term::Fix(_, _, b) => 1 + term_size(b),
        Term::App(f, a) => 1 + term_size(f) + term_size(a),
        Term::Tuple(ms) => 1 + ms.iter().map(|m| term_size(m)).sum::<usize>(),
        Term::Proj(_, _, b) => 1 + term_size(b),
        Term::Cond(p, m, n) => 1 + term_size(p) + term_size(m) + term_size(n),
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::eval::{normalize, EvalConfig, Strategy};
    use crate::registry::PrimRegistry;

    #[test]
    fn numerals_round_trip() {
        assert_eq!(num(0.0).as_numeral(), Some(0.0));
        assert_eq!(num(3.25).as_numeral(), Some(3.25));
        assert!(matches!(
            mk_numeral(f64::NAN),
            Err(SyntaxError::NonFiniteNumeral(_))
        ));
        assert!(mk_numeral(f64::INFINITY).is_err());
    }

    #[test]
    fn subst_variable_and_shadowing() {
        let five = num(5.0);
        assert!(alpha_eq(&subst(&Term::var("x"), "x", &five), &five));
        let id = Term::lam("x", TypeExpr::Real, Term::var("x"));
        assert!(alpha_eq(&subst(&id, "x", &five), &id));
    }

    #[test]
    fn subst_avoids_capture() {
        // subst(\y. x + y, x, y) must rename the binder.
        let m = Term::lam(
            "y",
            TypeExpr::Real,
            Term::add(Term::var("x"), Term::var("y")),
        );
        let r = subst(&m, "x", &Term::var("y"));
        let expected = Term::lam(
            "z",
            TypeExpr::Real,
            Term::add(Term::var("y"), Term::var("z")),
        );
        assert!(alpha_eq(&r, &expected));

        // Check observably: both sides applied to sample arguments agree
        // once the free y is instantiated.
        let reg = PrimRegistry::default();
        let cfg = EvalConfig::default();
        for (yv, av) in [(2.0, 7.0), (-1.5, 0.5)] {
            let lhs = subst(&r, "y", &num(yv));
            let got = normalize(
                &Term::app(lhs, num(av)),
                Strategy::FullNormalize,
                &cfg,
                &reg,
            );
            let nf = got.normal_form().expect("normalizes");
            assert_eq!(nf.as_numeral(), Some(yv + av));
        }
    }

    #[test]
    fn iota_unary_is_identity() {
        let i = iota(1, 1).unwrap();
        let id = Term::lam("x", TypeExpr::Real, Term::var("x"));
        assert!(alpha_eq(&i, &id));
        assert!(matches!(
            iota(3, 2),
            Err(SyntaxError::IndexOutOfRange { i: 3, n: 2 })
        ));
    }

    #[test]
    fn iota_injects_into_position() {
        let reg = PrimRegistry::default();
        let cfg = EvalConfig::default();
        let t = Term::app(iota(2, 3).unwrap(), num(7.0));
        let got = normalize(&t, Strategy::HeadDeterministic, &cfg, &reg);
        let nf = got.normal_form().unwrap();
        let expected = Term::tuple(vec![num(0.0), num(7.0), num(0.0)]);
        assert!(alpha_eq(&nf, &expected));
    }

    #[test]
    fn fix_approx_cases() {
        let ty = TypeExpr::arrow(TypeExpr::Real, TypeExpr::Real);
        let body = Term::lam("x", TypeExpr::Real, Term::var("x"));
        let zero = fix_approx("f", &ty, &body, FixDepth::Finite(0)).unwrap();
        assert!(alpha_eq(&zero, &omega(&ty)));
        let inf = fix_approx("f", &ty, &body, FixDepth::Infinite).unwrap();
        assert!(alpha_eq(&inf, &Term::fix("f", ty.clone(), body.clone())));
        assert!(matches!(
            fix_approx("f", &TypeExpr::Real, &body, FixDepth::Finite(1)),
            Err(SyntaxError::NonArrowFixType(_))
        ));
    }

    #[test]
    fn finite_approximants_only_contain_omega_fixes() {
        fn non_omega_fix(t: &Term) -> bool {
            match t {
                Term::Fix(f, _, b) => {
                    !matches!(&**b, Term::Var(g) if g == f) || non_omega_fix(b)
                }
                Term::Var(_) => false,
                Term::Prim(_, args) => args.iter().any(|a| non_omega_fix(a)),
                Term::Lam(_, _, b) | Term::Proj(_, _, b) => non_omega_fix(b),
                Term::App(f, a) => non_omega_fix(f) || non_omega_fix(a),
                Term::Tuple(ms) => ms.iter().any(|m| non_omega_fix(m)),
                Term::Cond(p, m, n) => {
                    non_omega_fix(p) || non_omega_fix(m) || non_omega_fix(n)
                }
            }
        }
        let ty = TypeExpr::arrow(TypeExpr::Real, TypeExpr::Real);
        let body = Term::lam("x", TypeExpr::Real, Term::app(Term::var("f"), Term::var("x")));
        for k in 0..5 {
            let t = fix_approx("f", &ty, &body, FixDepth::Finite(k)).unwrap();
            assert!(!non_omega_fix(&t), "depth {k} reintroduced a real fix");
        }
    }

    #[test]
    fn term_size_convention() {
        assert_eq!(term_size(&num(3.0)), 1);
        let id = Term::lam("x", TypeExpr::Real, Term::var("x"));
        assert_eq!(term_size(&id), 2);
        let s = Term::add(Term::var("x"), Term::var("y"));
        assert_eq!(term_size(&s), 3);
    }
}
