//! Small-step reduction under selectable strategies, with fuel, optional
//! fixpoint capping, and a decision log feeding the trace lab.
//!
//! All strategies are deterministic refinements of the reduction relation:
//! given a term each selects at most one redex. `HeadDeterministic` fires
//! the leftmost-outermost redex among head positions (conditional guards
//! are head positions, so guards are evaluated before branch selection).
//! `CallByName` never evaluates an application argument before beta and
//! coincides with the deterministic head order on the positions it visits.

use std::rc::Rc;

use serde::Serialize;

use crate::registry::{PrimRegistry, PrimSymbol};
use crate::syntax::{fix_approx, subst, FixDepth, Term, TypeExpr};
use crate::typecheck::{check_program, program_coarity, Program};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub enum Strategy {
    HeadDeterministic,
    CallByValue,
    CallByName,
    FullNormalize,
}

#[derive(Debug, Clone)]
pub struct EvalConfig {
    /// Maximum number of reduction steps; must be at least 1.
    pub fuel: usize,
    /// When set, every fixpoint is replaced by its depth-k approximant
    /// before evaluation.
    pub fix_cap: Option<usize>,
    pub record_decisions: bool,
}

impl Default for EvalConfig {
    fn default() -> Self {
        EvalConfig {
            fuel: 1_000_000,
            fix_cap: None,
            record_decisions: false,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub enum Branch {
    Then,
    Else,
}

/// One entry of the decision log: a conditional branch taken or a fixpoint
/// unfolded.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub enum Event {
    CondTaken { branch: Branch, guard: f64 },
    FixUnfolded { binder: String },
}

pub type DecisionLog = Vec<Event>;

#[derive(Debug, Clone, PartialEq)]
pub struct PrimError {
    pub symbol: String,
    pub args: Vec<f64>,
}

#[derive(Debug, Clone)]
pub enum EvalOutcome {
    NormalForm {
        term: Rc<Term>,
        steps: usize,
        log: DecisionLog,
    },
    FuelExhausted {
        steps: usize,
        log: DecisionLog,
    },
    PrimDomainError {
        symbol: String,
        args: Vec<f64>,
        steps: usize,
        log: DecisionLog,
    },
    Stuck {
        term: Rc<Term>,
        steps: usize,
        log: DecisionLog,
    },
}

impl EvalOutcome {
    pub fn normal_form(&self) -> Option<Rc<Term>> {
        match self {
            EvalOutcome::NormalForm { term, .. } => Some(term.clone()),
            _ => None,
        }
    }

    pub fn log(&self) -> &DecisionLog {
        match self {
            EvalOutcome::NormalForm { log, .. }
            | EvalOutcome::FuelExhausted { log, .. }
            | EvalOutcome::PrimDomainError { log, .. }
            | EvalOutcome::Stuck { log, .. } => log,
        }
    }

    pub fn steps(&self) -> usize {
        match self {
            EvalOutcome::NormalForm { steps, .. }
            | EvalOutcome::FuelExhausted { steps, .. }
            | EvalOutcome::PrimDomainError { steps, .. }
            | EvalOutcome::Stuck { steps, .. } => *steps,
        }
    }
}

type StepOut = Option<(Rc<Term>, Option<Event>)>;
type StepResult = Result<StepOut, PrimError>;

fn is_add(sym: &PrimSymbol) -> bool {
    matches!(sym, PrimSymbol::Named(n) if &**n == "add")
}

/// delta rule: phi(r_1,...,r_k) -> numeral. NaN or infinite results are
/// primitive domain errors.
fn delta(sym: &PrimSymbol, args: &[Rc<Term>], reg: &PrimRegistry) -> StepResult {
    // A numeral is a normal form, not a redex.
    if matches!(sym, PrimSymbol::Lit(_)) {
        return Ok(None);
    }
    let vals: Option<Vec<f64>> = args.iter().map(|a| a.as_numeral()).collect();
    let vals = match vals {
        Some(v) => v,
        None => return Ok(None),
    };
    let entry = match reg.lookup(sym) {
        Some(e) if e.arity == args.len() => e,
        _ => return Ok(None),
    };
    let r = entry.eval.call(&vals);
    if !r.is_finite() {
        return Err(PrimError {
            symbol: sym.name(),
            args: vals,
        });
    }
    Ok(Some((crate::syntax::num(r), None)))
}

/// Componentwise addition of two literal tuples (the lift of `add` to R^n).
fn vector_add(sym: &PrimSymbol, args: &[Rc<Term>]) -> StepOut {
    if !is_add(sym) || args.len() != 2 {
        return None;
    }
    if let (Term::Tuple(us), Term::Tuple(vs)) = (&*args[0], &*args[1]) {
        if us.len() == vs.len() {
            let comps = us
                .iter()
                .zip(vs)
                .map(|(u, v)| Term::add(u.clone(), v.clone()))
                .collect();
            return Some((Rc::new(Term::Tuple(comps)), None));
        }
    }
    None
}

fn fire_cond(guard: f64, m: &Rc<Term>, n: &Rc<Term>) -> (Rc<Term>, Option<Event>) {
    if guard <= 0.0 {
        (
            m.clone(),
            Some(Event::CondTaken {
                branch: Branch::Then,
                guard,
            }),
        )
    } else {
        (
            n.clone(),
            Some(Event::CondTaken {
                branch: Branch::Else,
                guard,
            }),
        )
    }
}

/// fix f M -> M[\x.(fix f M) x / f]
fn fire_fix(f: &str, ty: &TypeExpr, body: &Rc<Term>, whole: &Rc<Term>) -> StepOut {
    let dom = match ty {
        TypeExpr::Arrow(d, _) => (**d).clone(),
        _ => return None,
    };
    let x = crate::syntax::fresh_name("x", &[&**body]);
    let eta = Term::lam(&x, dom, Term::app(whole.clone(), Term::var(&x)));
    Some((
        subst(body, f, &eta),
        Some(Event::FixUnfolded {
            binder: f.to_string(),
        }),
    ))
}

fn step_head(t: &Rc<Term>, reg: &PrimRegistry) -> StepResult {
    match &**t {
        Term::App(f, a) => {
            if let Term::Lam(x, _, b) = &**f {
                return Ok(Some((subst(b, x, a), None)));
            }
            Ok(step_head(f, reg)?.map(|(f2, ev)| (Term::app(f2, a.clone()), ev)))
        }
        Term::Proj(i, k, b) => {
            if let Term::Tuple(ms) = &**b {
                if ms.len() == *k {
                    return Ok(Some((ms[*i - 1].clone(), None)));
                }
            }
            Ok(step_head(b, reg)?.map(|(b2, ev)| (Rc::new(Term::Proj(*i, *k, b2)), ev)))
        }
        Term::Prim(sym, args) => {
            if let Some(out) = delta(sym, args, reg)? {
                return Ok(Some(out));
            }
            if let Some(out) = vector_add(sym, args) {
                return Ok(Some(out));
            }
            for (idx, a) in args.iter().enumerate() {
                if let Some((a2, ev)) = step_head(a, reg)? {
                    let mut args2 = args.clone();
                    args2[idx] = a2;
                    return Ok(Some((Rc::new(Term::Prim(sym.clone(), args2)), ev)));
                }
            }
            Ok(None)
        }
        Term::Cond(p, m, n) => {
            if let Some(r) = p.as_numeral() {
                return Ok(Some(fire_cond(r, m, n)));
            }
            Ok(step_head(p, reg)?
                .map(|(p2, ev)| (Term::cond(p2, m.clone(), n.clone()), ev)))
        }
        Term::Tuple(ms) => {
            for (idx, m) in ms.iter().enumerate() {
                if let Some((m2, ev)) = step_head(m, reg)? {
                    let mut ms2 = ms.clone();
                    ms2[idx] = m2;
                    return Ok(Some((Rc::new(Term::Tuple(ms2)), ev)));
                }
            }
            Ok(None)
        }
        Term::Fix(f, ty, b) => Ok(fire_fix(f, ty, b, t)),
        Term::Var(_) | Term::Lam(_, _, _) => Ok(None),
    }
}

fn is_value(t: &Term) -> bool {
    match t {
        Term::Lam(_, _, _) => true,
        Term::Prim(_, args) => args.is_empty() && t.is_numeral(),
        Term::Tuple(ms) => ms.iter().all(|m| is_value(m)),
        _ => false,
    }
}

fn step_cbv(t: &Rc<Term>, reg: &PrimRegistry) -> StepResult {
    match &**t {
        Term::App(f, a) => {
            if !is_value(f) {
                return Ok(step_cbv(f, reg)?
                    .map(|(f2, ev)| (Term::app(f2, a.clone()), ev)));
            }
            if !is_value(a) {
                return Ok(step_cbv(a, reg)?
                    .map(|(a2, ev)| (Term::app(f.clone(), a2), ev)));
            }
            if let Term::Lam(x, _, b) = &**f {
                return Ok(Some((subst(b, x, a), None)));
            }
            Ok(None)
        }
        Term::Proj(i, k, b) => {
            if is_value(b) {
                if let Term::Tuple(ms) = &**b {
                    if ms.len() == *k {
                        return Ok(Some((ms[*i - 1].clone(), None)));
                    }
                }
                return Ok(None);
            }
            Ok(step_cbv(b, reg)?.map(|(b2, ev)| (Rc::new(Term::Proj(*i, *k, b2)), ev)))
        }
        Term::Prim(sym, args) => {
            if let Some(out) = delta(sym, args, reg)? {
                return Ok(Some(out));
            }
            if args.iter().all(|a| is_value(a)) {
                if let Some(out) = vector_add(sym, args) {
                    return Ok(Some(out));
                }
                return Ok(None);
            }
            for (idx, a) in args.iter().enumerate() {
                if !is_value(a) {
                    return Ok(step_cbv(a, reg)?.map(|(a2, ev)| {
                        let mut args2 = args.clone();
                        args2[idx] = a2;
                        (Rc::new(Term::Prim(sym.clone(), args2)), ev)
                    }));
                }
            }
            Ok(None)
        }
        Term::Cond(p, m, n) => {
            if let Some(r) = p.as_numeral() {
                return Ok(Some(fire_cond(r, m, n)));
            }
            Ok(step_cbv(p, reg)?
                .map(|(p2, ev)| (Term::cond(p2, m.clone(), n.clone()), ev)))
        }
        Term::Tuple(ms) => {
            for (idx, m) in ms.iter().enumerate() {
                if !is_value(m) {
                    return Ok(step_cbv(m, reg)?.map(|(m2, ev)| {
                        let mut ms2 = ms.clone();
                        ms2[idx] = m2;
                        (Rc::new(Term::Tuple(ms2)), ev)
                    }));
                }
            }
            Ok(None)
        }
        Term::Fix(f, ty, b) => Ok(fire_fix(f, ty, b, t)),
        Term::Var(_) | Term::Lam(_, _, _) => Ok(None),
    }
}

fn step_full(t: &Rc<Term>, reg: &PrimRegistry) -> StepResult {
    // Root redex first (outermost), then leftmost descent into every
    // position, including under binders.
    match &**t {
        Term::App(f, a) => {
            if let Term::Lam(x, _, b) = &**f {
                return Ok(Some((subst(b, x, a), None)));
            }
            if let Some((f2, ev)) = step_full(f, reg)? {
                return Ok(Some((Term::app(f2, a.clone()), ev)));
            }
            Ok(step_full(a, reg)?.map(|(a2, ev)| (Term::app(f.clone(), a2), ev)))
        }
        Term::Proj(i, k, b) => {
            if let Term::Tuple(ms) = &**b {
                if ms.len() == *k {
                    return Ok(Some((ms[*i - 1].clone(), None)));
                }
            }
            Ok(step_full(b, reg)?.map(|(b2, ev)| (Rc::new(Term::Proj(*i, *k, b2)), ev)))
        }
        Term::Prim(sym, args) => {
            if let Some(out) = delta(sym, args, reg)? {
                return Ok(Some(out));
            }
            if let Some(out) = vector_add(sym, args) {
                return Ok(Some(out));
            }
            for (idx, a) in args.iter().enumerate() {
                if let Some((a2, ev)) = step_full(a, reg)? {
                    let mut args2 = args.clone();
                    args2[idx] = a2;
                    return Ok(Some((Rc::new(Term::Prim(sym.clone(), args2)), ev)));
                }
            }
            Ok(None)
        }
        Term::Cond(p, m, n) => {
            if let Some(r) = p.as_numeral() {
                return Ok(Some(fire_cond(r, m, n)));
            }
            if let Some((p2, ev)) = step_full(p, reg)? {
                return Ok(Some((Term::cond(p2, m.clone(), n.clone()), ev)));
            }
            if let Some((m2, ev)) = step_full(m, reg)? {
                return Ok(Some((Term::cond(p.clone(), m2, n.clone()), ev)));
            }
            Ok(step_full(n, reg)?
                .map(|(n2, ev)| (Term::cond(p.clone(), m.clone(), n2), ev)))
        }
        Term::Tuple(ms) => {
            for (idx, m) in ms.iter().enumerate() {
                if let Some((m2, ev)) = step_full(m, reg)? {
                    let mut ms2 = ms.clone();
                    ms2[idx] = m2;
                    return Ok(Some((Rc::new(Term::Tuple(ms2)), ev)));
                }
            }
            Ok(None)
        }
        Term::Fix(f, ty, b) => Ok(fire_fix(f, ty, b, t)),
        Term::Lam(x, ty, b) => Ok(step_full(b, reg)?
            .map(|(b2, ev)| (Term::lam(x, ty.clone(), b2), ev))),
        Term::Var(_) => Ok(None),
    }
}

/// Fires the strategy's unique redex, if any. `Err` reports a primitive
/// applied outside its domain.
pub fn step(t: &Rc<Term>, strategy: Strategy, reg: &PrimRegistry) -> StepResult {
    match strategy {
        Strategy::HeadDeterministic | Strategy::CallByName => step_head(t, reg),
        Strategy::CallByValue => step_cbv(t, reg),
        Strategy::FullNormalize => step_full(t, reg),
    }
}

/// Replaces every fixpoint with its depth-k approximant.
fn cap_fixes(t: &Rc<Term>, k: usize) -> Rc<Term> {
    match &**t {
        Term::Var(_) => t.clone(),
        Term::Prim(sym, args) => {
            Term::prim(sym.clone(), args.iter().map(|a| cap_fixes(a, k)).collect())
        }
        Term::Lam(x, ty, b) => Term::lam(x, ty.clone(), cap_fixes(b, k)),
        Term::App(f, a) => Term::app(cap_fixes(f, k), cap_fixes(a, k)),
        Term::Tuple(ms) => Rc::new(Term::Tuple(
            ms.iter().map(|m| cap_fixes(m, k)).collect(),
        )),
        Term::Proj(i, kk, b) => Rc::new(Term::Proj(*i, *kk, cap_fixes(b, k))),
        Term::Cond(p, m, n) => {
            Term::cond(cap_fixes(p, k), cap_fixes(m, k), cap_fixes(n, k))
        }
        Term::Fix(f, ty, b) => {
            let body = cap_fixes(b, k);
            fix_approx(f, ty, &body, FixDepth::Finite(k))
                .unwrap_or_else(|_| Term::fix(f, ty.clone(), body))
        }
    }
}

/// Detects shapes that can never reduce further yet are not meaningful
/// normal forms (only arises on ill-typed input).
fn has_stuck_shape(t: &Term) -> bool {
    match t {
        Term::App(f, a) => {
            matches!(&**f, Term::Tuple(_)) || f.is_numeral()
                || has_stuck_shape(f)
                || has_stuck_shape(a)
        }
        Term::Proj(_, k, b) => {
            matches!(&**b, Term::Tuple(ms) if ms.len() != *k) || has_stuck_shape(b)
        }
        Term::Prim(_, args) => args.iter().any(|a| has_stuck_shape(a)),
        Term::Tuple(ms) => ms.iter().any(|m| has_stuck_shape(m)),
        Term::Cond(p, m, n) => {
            has_stuck_shape(p) || has_stuck_shape(m) || has_stuck_shape(n)
        }
        Term::Lam(_, _, b) | Term::Fix(_, _, b) => has_stuck_shape(b),
        Term::Var(_) => false,
    }
}

/// Iterates [`step`] until a normal form, fuel exhaustion or a primitive
/// domain error.
pub fn normalize(
    t: &Rc<Term>,
    strategy: Strategy,
    cfg: &EvalConfig,
    reg: &PrimRegistry,
) -> EvalOutcome {
    assert!(cfg.fuel >= 1, "fuel must be at least 1");
    let mut cur = match cfg.fix_cap {
        Some(k) => cap_fixes(t, k),
        None => t.clone(),
    };
    let mut log = DecisionLog::new();
    let mut steps = 0usize;
    while steps < cfg.fuel {
        match step(&cur, strategy, reg) {
            Ok(Some((next, ev))) => {
                if cfg.record_decisions {
                    if let Some(e) = ev {
                        log.push(e);
                    }
                }
                cur = next;
                steps += 1;
            }
            Ok(None) => {
                return if has_stuck_shape(&cur) {
                    EvalOutcome::Stuck {
                        term: cur,
                        steps,
                        log,
                    }
                } else {
                    EvalOutcome::NormalForm {
                        term: cur,
                        steps,
                        log,
                    }
                };
            }
            Err(e) => {
                return EvalOutcome::PrimDomainError {
                    symbol: e.symbol,
                    args: e.args,
                    steps,
                    log,
                }
            }
        }
    }
    EvalOutcome::FuelExhausted { steps, log }
}

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
pub enum ProgramError {
    #[error("term is not a program of arity {0} with ground coarity")]
    IllTyped(usize),
    #[error("expected {expected} arguments, got {got}")]
    WrongArgCount { expected: usize, got: usize },
}

/// Decodes a normal form of type R^m into its numerals.
pub fn decode_ground(t: &Term, m: usize) -> Option<Vec<f64>> {
    if m == 1 {
        return t.as_numeral().map(|v| vec![v]);
    }
    match t {
        Term::Tuple(ms) if ms.len() == m => {
            ms.iter().map(|c| c.as_numeral()).collect()
        }
        _ => None,
    }
}

/// The partial function computed by a program under a strategy:
/// substitutes numerals for the argument variables, normalizes and decodes.
/// `Ok(None)` covers divergence (fuel), domain errors and stuck terms.
pub fn eval_program(
    prog: &Program,
    args: &[f64],
    strategy: Strategy,
    cfg: &EvalConfig,
    reg: &PrimRegistry,
) -> Result<Option<Vec<f64>>, ProgramError> {
    let coarity = program_coarity(prog, reg)
        .ok_or(ProgramError::IllTyped(prog.arity()))?;
    debug_assert!(check_program(prog, coarity, reg));
    if args.len() != prog.arity() {
        return Err(ProgramError::WrongArgCount {
            expected: prog.arity(),
            got: args.len(),
        });
    }
    let outcome = eval_program_outcome(prog, args, strategy, cfg, reg);
    Ok(outcome
        .normal_form()
        .and_then(|nf| decode_ground(&nf, coarity)))
}

/// Like [`eval_program`] but exposes the full outcome (used by the trace
/// lab to read the decision log). Argument arity must already match.
pub fn eval_program_outcome(
    prog: &Program,
    args: &[f64],
    strategy: Strategy,
    cfg: &EvalConfig,
    reg: &PrimRegistry,
) -> EvalOutcome {
    let mut t = prog.term.clone();
    for (x, r) in prog.vars.iter().zip(args) {
        t = subst(&t, x, &crate::syntax::num(*r));
    }
    normalize(&t, strategy, cfg, reg)
}

// --- Big-step call-by-need fast path ------------------------------------
//
// The small-step machine re-scans the whole term on every step, which is
// quadratic and far too slow for Monte-Carlo scans. For closed, ground
// results the call-by-need evaluator below converges exactly when head
// reduction does and computes the same numerals in the same floating-point
// order, so the oracle and gradient evaluation use it whenever no decision
// log or fixpoint cap is requested.

use std::cell::RefCell;

enum FastVal {
    Num(f64),
    Closure(Env, String, Rc<Term>),
    Tuple(Vec<ThunkRef>),
}

type ThunkRef = Rc<RefCell<Thunk>>;

enum Thunk {
    Delayed(Env, Rc<Term>),
    InProgress,
    Forced(Rc<FastVal>),
}

#[derive(Clone)]
struct Env(Option<Rc<EnvNode>>);

struct EnvNode {
    name: String,
    thunk: ThunkRef,
    next: Env,
}

impl Env {
    fn empty() -> Env {
        Env(None)
    }

    fn push(&self, name: &str, thunk: ThunkRef) -> Env {
        Env(Some(Rc::new(EnvNode {
            name: name.to_string(),
            thunk,
            next: self.clone(),
        })))
    }

    fn lookup(&self, name: &str) -> Option<ThunkRef> {
        let mut cur = self;
        while let Some(node) = &cur.0 {
            if node.name == name {
                return Some(node.thunk.clone());
            }
            cur = &node.next;
        }
        None
    }
}

enum FastErr {
    Diverge,
    Domain,
    Stuck,
}

/// Nesting-depth cap: real computations nest shallowly; a fix that grows
/// the stack without bound is divergence.
const FAST_MAX_DEPTH: usize = 10_000;

struct FastEval<'a> {
    reg: &'a PrimRegistry,
    fuel: usize,
}

impl<'a> FastEval<'a> {
    fn delayed(env: &Env, t: &Rc<Term>) -> ThunkRef {
        Rc::new(RefCell::new(Thunk::Delayed(env.clone(), t.clone())))
    }

    fn force(&mut self, th: &ThunkRef, depth: usize) -> Result<Rc<FastVal>, FastErr> {
        let taken = std::mem::replace(&mut *th.borrow_mut(), Thunk::InProgress);
        match taken {
            Thunk::Forced(v) => {
                *th.borrow_mut() = Thunk::Forced(v.clone());
                Ok(v)
            }
            Thunk::InProgress => Err(FastErr::Diverge),
            Thunk::Delayed(env, t) => {
                let v = self.eval(&env, &t, depth)?;
                *th.borrow_mut() = Thunk::Forced(v.clone());
                Ok(v)
            }
        }
    }

    fn num(&mut self, env: &Env, t: &Rc<Term>, depth: usize) -> Result<f64, FastErr> {
        match &*self.eval(env, t, depth)? {
            FastVal::Num(r) => Ok(*r),
            _ => Err(FastErr::Stuck),
        }
    }

    fn force_num(&mut self, th: &ThunkRef, depth: usize) -> Result<f64, FastErr> {
        match &*self.force(th, depth)? {
            FastVal::Num(r) => Ok(*r),
            _ => Err(FastErr::Stuck),
        }
    }

    fn eval(&mut self, env: &Env, t: &Rc<Term>, depth: usize) -> Result<Rc<FastVal>, FastErr> {
        if depth > FAST_MAX_DEPTH || self.fuel == 0 {
            return Err(FastErr::Diverge);
        }
        self.fuel -= 1;
        match &**t {
            Term::Var(x) => {
                let th = env.lookup(x).ok_or(FastErr::Stuck)?;
                self.force(&th, depth + 1)
            }
            Term::Lam(x, _, body) => Ok(Rc::new(FastVal::Closure(
                env.clone(),
                x.clone(),
                body.clone(),
            ))),
            Term::Fix(f, _, body) => {
                let th = Self::delayed(env, t);
                self.eval(&env.push(f, th), body, depth + 1)
            }
            Term::App(fun, arg) => {
                let fv = self.eval(env, fun, depth + 1)?;
                match &*fv {
                    FastVal::Closure(cenv, x, body) => {
                        let th = Self::delayed(env, arg);
                        self.eval(&cenv.push(x, th), body, depth + 1)
                    }
                    _ => Err(FastErr::Stuck),
                }
            }
            Term::Tuple(comps) => Ok(Rc::new(FastVal::Tuple(
                comps.iter().map(|c| Self::delayed(env, c)).collect(),
            ))),
            Term::Proj(i, _, body) => {
                let v = self.eval(env, body, depth + 1)?;
                match &*v {
                    FastVal::Tuple(comps) => {
                        let th = comps.get(i - 1).ok_or(FastErr::Stuck)?.clone();
                        self.force(&th, depth + 1)
                    }
                    _ => Err(FastErr::Stuck),
                }
            }
            Term::Cond(guard, then_b, else_b) => {
                let g = self.num(env, guard, depth + 1)?;
                let branch = if g <= 0.0 { then_b } else { else_b };
                self.eval(env, branch, depth + 1)
            }
            Term::Prim(sym, args) => {
                if let PrimSymbol::Lit(bits) = sym {
                    return Ok(Rc::new(FastVal::Num(f64::from_bits(*bits))));
                }
                if is_add(sym) && args.len() == 2 {
                    let a = self.eval(env, &args[0], depth + 1)?;
                    let b = self.eval(env, &args[1], depth + 1)?;
                    if let (FastVal::Tuple(xs), FastVal::Tuple(ys)) = (&*a, &*b) {
                        if xs.len() != ys.len() {
                            return Err(FastErr::Stuck);
                        }
                        let mut sums = Vec::with_capacity(xs.len());
                        for (x, y) in xs.iter().zip(ys) {
                            let s = self.force_num(x, depth + 1)?
                                + self.force_num(y, depth + 1)?;
                            if !s.is_finite() {
                                return Err(FastErr::Domain);
                            }
                            sums.push(Rc::new(RefCell::new(Thunk::Forced(Rc::new(
                                FastVal::Num(s),
                            )))));
                        }
                        return Ok(Rc::new(FastVal::Tuple(sums)));
                    }
                    if let (FastVal::Num(x), FastVal::Num(y)) = (&*a, &*b) {
                        let s = x + y;
                        if !s.is_finite() {
                            return Err(FastErr::Domain);
                        }
                        return Ok(Rc::new(FastVal::Num(s)));
                    }
                    return Err(FastErr::Stuck);
                }
                let entry = self.reg.lookup(sym).ok_or(FastErr::Stuck)?;
                if entry.arity != args.len() {
                    return Err(FastErr::Stuck);
                }
                let mut rs = Vec::with_capacity(args.len());
                for a in args {
                    rs.push(self.num(env, a, depth + 1)?);
                }
                let v = entry.eval.call(&rs);
                if !v.is_finite() {
                    return Err(FastErr::Domain);
                }
                Ok(Rc::new(FastVal::Num(v)))
            }
        }
    }

    fn decode(&mut self, v: &Rc<FastVal>, coarity: usize) -> Result<Vec<f64>, FastErr> {
        match &**v {
            FastVal::Num(r) if coarity == 1 => Ok(vec![*r]),
            FastVal::Tuple(comps) if comps.len() == coarity => comps
                .iter()
                .map(|c| self.force_num(c, 0))
                .collect(),
            _ => Err(FastErr::Stuck),
        }
    }
}

/// Evaluates a closed term of real-vector type to its numerals by need.
/// `None` covers divergence, domain errors and stuck terms, like the
/// small-step path; fuel counts evaluator steps rather than reductions.
pub fn eval_ground_need(
    t: &Rc<Term>,
    coarity: usize,
    fuel: usize,
    reg: &PrimRegistry,
) -> Option<Vec<f64>> {
    let mut ev = FastEval { reg, fuel };
    let v = ev.eval(&Env::empty(), t, 0).ok()?;
    ev.decode(&v, coarity).ok()
}

/// [`eval_ground_need`] for a program at a point: the arguments are bound
/// in the environment instead of substituted into the term.
pub fn eval_program_need(
    prog: &Program,
    args: &[f64],
    coarity: usize,
    fuel: usize,
    reg: &PrimRegistry,
) -> Option<Vec<f64>> {
    let mut env = Env::empty();
    for (x, r) in prog.vars.iter().zip(args) {
        env = env.push(
            x,
            Rc::new(RefCell::new(Thunk::Forced(Rc::new(FastVal::Num(*r))))),
        );
    }
    let mut ev = FastEval { reg, fuel };
    let v = ev.eval(&env, &prog.term, 0).ok()?;
    ev.decode(&v, coarity).ok()
}

/// True when [`eval_ground_need`] computes the same partial function as
/// small-step evaluation would under this configuration.
pub fn fast_path_applies(strategy: Strategy, cfg: &EvalConfig) -> bool {
    matches!(
        strategy,
        Strategy::HeadDeterministic | Strategy::CallByName
    ) && cfg.fix_cap.is_none()
        && !cfg.record_decisions
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::corpus;
    use crate::syntax::{num, omega};

    fn reg() -> PrimRegistry {
        PrimRegistry::default()
    }

    #[test]
    fn ite_selects_else_on_positive_guard() {
        let t = Term::cond(num(1.0), num(5.0), num(7.0));
        let (t2, ev) = step(&t, Strategy::HeadDeterministic, &reg())
            .unwrap()
            .unwrap();
        assert_eq!(t2.as_numeral(), Some(7.0));
        assert!(matches!(
            ev,
            Some(Event::CondTaken {
                branch: Branch::Else,
                guard
            }) if guard == 1.0
        ));
    }

    #[test]
    fn negative_zero_guard_selects_then() {
        let t = Term::cond(num(-0.0), num(1.0), num(2.0));
        let (t2, _) = step(&t, Strategy::HeadDeterministic, &reg())
            .unwrap()
            .unwrap();
        assert_eq!(t2.as_numeral(), Some(1.0));
    }

    #[test]
    fn projection_rule() {
        let t = Term::proj(
            2,
            3,
            Term::tuple(vec![num(1.0), num(2.0), num(3.0)]),
        );
        let (t2, _) = step(&t, Strategy::HeadDeterministic, &reg())
            .unwrap()
            .unwrap();
        assert_eq!(t2.as_numeral(), Some(2.0));
    }

    #[test]
    fn log_of_negative_is_domain_error() {
        let t = Term::prim(PrimSymbol::named("log"), vec![num(-1.0)]);
        let e = step(&t, Strategy::HeadDeterministic, &reg()).unwrap_err();
        assert_eq!(e.symbol, "log");
        assert_eq!(e.args, vec![-1.0]);
    }

    #[test]
    fn silly_id_at_zero() {
        let prog = Program::from_term(Term::app(corpus::silly_id(), Term::var("x")));
        let r = eval_program(
            &prog,
            &[0.0],
            Strategy::HeadDeterministic,
            &EvalConfig::default(),
            &reg(),
        )
        .unwrap();
        assert_eq!(r, Some(vec![0.0]));
    }

    #[test]
    fn omega_applied_exhausts_fuel() {
        let ty = crate::syntax::TypeExpr::arrow(
            crate::syntax::TypeExpr::Real,
            crate::syntax::TypeExpr::Real,
        );
        let t = Term::app(omega(&ty), num(1.0));
        let cfg = EvalConfig {
            fuel: 1000,
            ..Default::default()
        };
        let out = normalize(&t, Strategy::HeadDeterministic, &cfg, &reg());
        assert!(matches!(out, EvalOutcome::FuelExhausted { .. }));
    }

    #[test]
    fn floor_at_two_and_a_half() {
        let prog = Program::from_term(Term::app(corpus::floor(), Term::var("x")));
        let cfg = EvalConfig {
            record_decisions: true,
            ..Default::default()
        };
        let out = eval_program_outcome(
            &prog,
            &[2.5],
            Strategy::HeadDeterministic,
            &cfg,
            &reg(),
        );
        let nf = out.normal_form().expect("floor(2.5) normalizes");
        assert_eq!(nf.as_numeral(), Some(2.0));
        let unfolds = out
            .log()
            .iter()
            .filter(|e| matches!(e, Event::FixUnfolded { .. }))
            .count();
        assert_eq!(unfolds, 3);
    }

    #[test]
    fn floor_at_negative_half() {
        let prog = Program::from_term(Term::app(corpus::floor(), Term::var("x")));
        let r = eval_program(
            &prog,
            &[-0.5],
            Strategy::HeadDeterministic,
            &EvalConfig::default(),
            &reg(),
        )
        .unwrap();
        assert_eq!(r, Some(vec![-1.0]));
    }

    #[test]
    fn relu_program_negative() {
        let prog = Program::from_term(Term::app(corpus::relu(), Term::var("x")));
        for (input, want) in [(-2.0, 0.0), (3.5, 3.5), (0.0, 0.0)] {
            let r = eval_program(
                &prog,
                &[input],
                Strategy::HeadDeterministic,
                &EvalConfig::default(),
                &reg(),
            )
            .unwrap();
            assert_eq!(r, Some(vec![want]));
        }
    }

    #[test]
    fn eqproj_on_diagonal_full_strategy() {
        let prog = Program::from_term(Term::apps(
            corpus::eqproj(),
            [Term::var("x"), Term::var("y")],
        ));
        let r = eval_program(
            &prog,
            &[3.0, 3.0],
            Strategy::FullNormalize,
            &EvalConfig::default(),
            &reg(),
        )
        .unwrap();
        assert_eq!(r, Some(vec![3.0]));
    }

    #[test]
    fn fix_cap_zero_diverges_fix_cap_large_converges() {
        let prog = Program::from_term(Term::app(corpus::floor(), Term::var("x")));
        let cfg0 = EvalConfig {
            fuel: 10_000,
            fix_cap: Some(0),
            ..Default::default()
        };
        let out = eval_program_outcome(&prog, &[0.5], Strategy::HeadDeterministic, &cfg0, &reg());
        assert!(out.normal_form().is_none());
        let cfg8 = EvalConfig {
            fix_cap: Some(8),
            ..Default::default()
        };
        let out = eval_program_outcome(&prog, &[0.5], Strategy::HeadDeterministic, &cfg8, &reg());
        assert_eq!(out.normal_form().unwrap().as_numeral(), Some(0.0));
    }
}
