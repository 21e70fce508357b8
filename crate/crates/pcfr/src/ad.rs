//! Forward and reverse AD as source-to-source transformations, plus the
//! gradient wrappers that seed them.
//!
//! Conventions. For gradients with respect to n variables, forward mode
//! sends R to the flattened (n+1)-tuple R^{n+1}: component 1 is the value,
//! components 2..n+1 are the tangent block (a value/tangent pair with the
//! nested product flattened). Reverse mode sends R to R x (R -> R^n),
//! a genuine width-2 pair whose second component is the backpropagator.
//! Primitive applications expand verbatim to a beta-redex template; no
//! simplification pass runs afterwards, so transformed terms stay auditable.
//! Backpropagator sums reuse the `add` symbol, which the evaluator lifts
//! componentwise to equal-width tuples of reals; this keeps the reverse
//! transform's size independent of n.

use std::rc::Rc;

use crate::eval::{decode_ground, normalize, EvalConfig, EvalOutcome, Strategy};
use crate::registry::{PrimRegistry, PrimSymbol};
use crate::syntax::{iota, num, sum, term_size, Term, TypeExpr};
use crate::typecheck::{check_program, Program};

#[derive(Debug, Clone, Copy, PartialEq, Eq, serde::Serialize)]
pub enum AdMode {
    Forward,
    Reverse,
}

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
pub enum AdError {
    #[error("primitive {0} has no registered partial derivatives")]
    MissingPartials(String),
    #[error("term is not a program of arity {arity} and coarity 1")]
    IllTyped { arity: usize },
    #[error("gradient point has {got} coordinates, expected {expected}")]
    BadPoint { expected: usize, got: usize },
}

/// The action of the transformation on types.
pub fn ad_type(a: &TypeExpr, mode: AdMode, n: usize) -> TypeExpr {
    assert!(n >= 1, "gradient dimension must be at least 1");
    match a {
        TypeExpr::Real => match mode {
            AdMode::Forward => TypeExpr::reals(n + 1),
            AdMode::Reverse => TypeExpr::product(vec![
                TypeExpr::Real,
                TypeExpr::arrow(TypeExpr::Real, TypeExpr::reals(n)),
            ]),
        },
        TypeExpr::Arrow(d, c) => {
            TypeExpr::arrow(ad_type(d, mode, n), ad_type(c, mode, n))
        }
        TypeExpr::Product(cs) => {
            TypeExpr::product(cs.iter().map(|c| ad_type(c, mode, n)).collect())
        }
    }
}

/// Width of the transformed ground type, for projecting its value slot.
fn ground_width(mode: AdMode, n: usize) -> usize {
    match mode {
        AdMode::Forward => n + 1,
        AdMode::Reverse => 2,
    }
}

fn zero_vec(n: usize) -> Rc<Term> {
    Term::tuple((0..n).map(|_| num(0.0)).collect())
}

/// Template for a primitive application phi(M_1,...,M_k) with k >= 1:
/// a beta-redex binding fresh z_1..z_k of type D(R) around the value/
/// derivative pair, applied to the transformed arguments.
fn prim_template(
    sym: &PrimSymbol,
    dargs: Vec<Rc<Term>>,
    mode: AdMode,
    n: usize,
    reg: &PrimRegistry,
) -> Result<Rc<Term>, AdError> {
    let entry = reg
        .lookup(sym)
        .filter(|e| e.partials.len() == e.arity)
        .ok_or_else(|| AdError::MissingPartials(sym.name()))?;
    let k = entry.arity;
    let w = ground_width(mode, n);
    let zs: Vec<String> = (1..=k).map(|i| format!("z{}", i)).collect();
    let firsts: Vec<Rc<Term>> = zs
        .iter()
        .map(|z| Term::proj(1, w, Term::var(z)))
        .collect();
    let value = Term::prim(sym.clone(), firsts.clone());
    let partial = |i: usize| {
        Term::prim(PrimSymbol::named(&entry.partials[i]), firsts.clone())
    };
    let body = match mode {
        AdMode::Forward => {
            // <phi(pi_1 z), Sum_i d_i phi(pi_1 z) * pi_{j+1} z_i> for j = 1..n,
            // flattened to a width-(n+1) tuple.
            let mut comps = vec![value];
            for j in 1..=n {
                comps.push(sum((0..k)
                    .map(|i| {
                        Term::mul(
                            partial(i),
                            Term::proj(j + 1, w, Term::var(&zs[i])),
                        )
                    })
                    .collect()));
            }
            Rc::new(Term::Tuple(comps))
        }
        AdMode::Reverse => {
            // <phi(pi_1 z), \a. Sum_i (pi_2 z_i)(d_i phi(pi_1 z) * a)>
            let calls = (0..k)
                .map(|i| {
                    Term::app(
                        Term::proj(2, 2, Term::var(&zs[i])),
                        Term::mul(partial(i), Term::var("a")),
                    )
                })
                .collect();
            Term::tuple(vec![
                value,
                Term::lam("a", TypeExpr::Real, sum(calls)),
            ])
        }
    };
    let dr = ad_type(&TypeExpr::Real, mode, n);
    let lam = zs
        .iter()
        .rev()
        .fold(body, |acc, z| Term::lam(z, dr.clone(), acc));
    Ok(Term::apps(lam, dargs))
}

/// The action of the transformation on terms (Forward and Reverse share
/// every clause except the primitive template and the ground width).
pub fn ad_term(
    t: &Rc<Term>,
    mode: AdMode,
    n: usize,
    reg: &PrimRegistry,
) -> Result<Rc<Term>, AdError> {
    assert!(n >= 1, "gradient dimension must be at least 1");
    match &**t {
        Term::Var(x) => Ok(Term::var(x)),
        Term::Lam(x, ty, b) => Ok(Term::lam(
            x,
            ad_type(ty, mode, n),
            ad_term(b, mode, n, reg)?,
        )),
        Term::App(f, a) => Ok(Term::app(
            ad_term(f, mode, n, reg)?,
            ad_term(a, mode, n, reg)?,
        )),
        Term::Tuple(ms) => {
            let ds: Result<Vec<_>, _> =
                ms.iter().map(|m| ad_term(m, mode, n, reg)).collect();
            Ok(Rc::new(Term::Tuple(ds?)))
        }
        Term::Proj(i, k, b) => {
            Ok(Rc::new(Term::Proj(*i, *k, ad_term(b, mode, n, reg)?)))
        }
        Term::Cond(p, m, q) => Ok(Term::cond(
            Term::proj(1, ground_width(mode, n), ad_term(p, mode, n, reg)?),
            ad_term(m, mode, n, reg)?,
            ad_term(q, mode, n, reg)?,
        )),
        Term::Fix(f, ty, b) => Ok(Term::fix(
            f,
            ad_type(ty, mode, n),
            ad_term(b, mode, n, reg)?,
        )),
        Term::Prim(sym, args) => {
            if args.is_empty() {
                // k = 0: numerals (and nullary symbols). Empty sums are 0,
                // empty backpropagator sums the all-zeros tuple.
                let v = t.clone();
                return Ok(match mode {
                    AdMode::Forward => {
                        let mut comps = vec![v];
                        comps.extend((0..n).map(|_| num(0.0)));
                        Rc::new(Term::Tuple(comps))
                    }
                    AdMode::Reverse => Term::tuple(vec![
                        v,
                        Term::lam("a", TypeExpr::Real, zero_vec(n)),
                    ]),
                });
            }
            let dargs: Result<Vec<_>, _> =
                args.iter().map(|a| ad_term(a, mode, n, reg)).collect();
            prim_template(sym, dargs?, mode, n, reg)
        }
    }
}

/// A gradient program: the transformed body plus the recipe for seeding it
/// at a concrete point.
#[derive(Debug, Clone)]
pub struct GradBuilder {
    pub body: Rc<Term>,
    pub vars: Vec<String>,
    pub mode: AdMode,
}

impl GradBuilder {
    pub fn arity(&self) -> usize {
        self.vars.len()
    }

    /// Builds the closed gradient term at a point: forward seeds variable i
    /// with <r_i, e_i> (e_i the i-th unit vector, flattened) and collects
    /// the tangent block; reverse seeds with <r_i, iota_i> and applies the
    /// backpropagator to 1.
    pub fn at(&self, r: &[f64]) -> Result<Rc<Term>, AdError> {
        let n = self.vars.len();
        if r.len() != n {
            return Err(AdError::BadPoint {
                expected: n,
                got: r.len(),
            });
        }
        let mut t = self.body.clone();
        for (i, (x, ri)) in self.vars.iter().zip(r).enumerate() {
            let seed = match self.mode {
                AdMode::Forward => {
                    let mut comps = vec![num(*ri)];
                    comps.extend(
                        (1..=n).map(|j| num(if j == i + 1 { 1.0 } else { 0.0 })),
                    );
                    Rc::new(Term::Tuple(comps))
                }
                AdMode::Reverse => Term::tuple(vec![
                    num(*ri),
                    iota(i + 1, n).expect("index in range"),
                ]),
            };
            t = crate::syntax::subst(&t, x, &seed);
        }
        Ok(match self.mode {
            AdMode::Forward => Term::tuple(
                (1..=n).map(|j| Term::proj(j + 1, n + 1, t.clone())).collect(),
            ),
            AdMode::Reverse => Term::app(Term::proj(2, 2, t), num(1.0)),
        })
    }

    /// Normalizes the gradient term at a point and decodes the n numerals.
    /// `Ok(None)` when evaluation diverges, errs, or gets stuck.
    pub fn value_at(
        &self,
        r: &[f64],
        strategy: Strategy,
        cfg: &EvalConfig,
        reg: &PrimRegistry,
    ) -> Result<Option<Vec<f64>>, AdError> {
        let t = self.at(r)?;
        let n = self.vars.len();
        if crate::eval::fast_path_applies(strategy, cfg) {
            return Ok(crate::eval::eval_ground_need(&t, n, cfg.fuel, reg));
        }
        let out = normalize(&t, strategy, cfg, reg);
        Ok(out.normal_form().and_then(|nf| decode_ground(&nf, n)))
    }

    pub fn outcome_at(
        &self,
        r: &[f64],
        strategy: Strategy,
        cfg: &EvalConfig,
        reg: &PrimRegistry,
    ) -> Result<EvalOutcome, AdError> {
        let t = self.at(r)?;
        Ok(normalize(&t, strategy, cfg, reg))
    }
}

/// Builds the gradient program for an arity-n, coarity-1 program.
pub fn grad_program(
    prog: &Program,
    mode: AdMode,
    reg: &PrimRegistry,
) -> Result<GradBuilder, AdError> {
    let n = prog.arity();
    if n == 0 || !check_program(prog, 1, reg) {
        return Err(AdError::IllTyped { arity: n });
    }
    Ok(GradBuilder {
        body: ad_term(&prog.term, mode, n, reg)?,
        vars: prog.vars.clone(),
        mode,
    })
}

/// Sizes of the transformed term across gradient dimensions (type
/// annotations never count toward term size).
pub fn transform_size_curve(
    t: &Rc<Term>,
    mode: AdMode,
    n_range: &[usize],
    reg: &PrimRegistry,
) -> Result<Vec<(usize, usize)>, AdError> {
    n_range
        .iter()
        .map(|&n| ad_term(t, mode, n, reg).map(|d| (n, term_size(&d))))
        .collect()
}
